pub mod field;
pub mod model;
pub mod particles;
pub mod rng;
pub mod sim;
pub mod pide;
pub mod kolmogorov;
pub mod analysis;
pub mod cli;
