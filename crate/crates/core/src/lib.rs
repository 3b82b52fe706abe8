pub mod averaged;
pub mod bifurcation;
pub mod document;
pub mod error;
pub mod jacobian;
pub mod model;
pub mod numerics;
pub mod orbit;
pub mod presets;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
