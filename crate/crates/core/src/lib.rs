pub mod model;
pub mod ks;
pub mod grid;
pub mod radial;
pub mod operators;
