pub mod cli;
pub mod error;
pub mod evidence;
pub mod gpi;
pub mod model;
pub mod oracles;
pub mod prior;
pub mod quad;
pub mod registry;
pub mod rng;
pub mod selection;
pub mod space;
pub mod thermo;
pub mod zoo;
pub mod special;
