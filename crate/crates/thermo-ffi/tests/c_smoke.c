#include <math.h>
#include <stdio.h>
#include "thermo.h"

int main(void) {
    ThermoModel *m = NULL;
    if (thermo_model_new("exponential:lambda0=1", &m) != THERMO_STATUS_OK) return 1;
    double logc, keff;
    if (thermo_gpi_closed_form(m, 4.0, &logc, &keff) != THERMO_STATUS_OK) return 2;
    if (!(keff > 1.0 && keff < 1.1)) return 3;
    double data[3] = {0.5, 1.5, 2.0};
    double lz;
    if (thermo_log_evidence(m, THERMO_PRIOR_GPI, data, 3, &lz) != THERMO_STATUS_OK) return 4;
    if (!isfinite(lz)) return 5;
    thermo_model_free(m);
    if (thermo_model_new("gamma:k=1", &m) != THERMO_STATUS_INVALID_INPUT) return 6;
    if (thermo_last_error() == NULL) return 7;
    printf("ok %s\n", thermo_version());
    return 0;
}
