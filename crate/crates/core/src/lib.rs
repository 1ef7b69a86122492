pub mod bounds;
pub mod eigensolver;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod tensor_field;
pub mod tile_builder;
pub mod varifold;

pub use error::{Error, Result};
