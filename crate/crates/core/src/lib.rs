pub mod energy;
pub mod error;
pub mod experiment;
pub mod growth;
pub mod interval;
pub mod numeric;
pub mod pair;
pub mod sequence;

pub use error::{Error, Result};
