pub mod asymptotics;
pub mod error;
pub mod geometry;
pub mod greens;
pub mod halfspace;
pub mod linsys;
pub mod specfun;
pub mod validators;

pub use error::{Error, ErrorClass, Result};
