pub mod analysis;
pub mod catalog;
pub mod cli;
pub mod convert;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
