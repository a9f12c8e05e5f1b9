pub mod approx;
pub mod complex;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod io;
pub mod maps;
pub mod pipeline;
pub mod render;
pub mod squeeze;
pub mod verify;

pub use complex::{Complex, Key, RawComplex, StarSet};
pub use error::{Error, ErrorKind, Result};
