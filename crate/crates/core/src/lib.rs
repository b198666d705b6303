pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod io;
pub mod numerics;
pub mod panel;
pub mod study;

pub use error::{Error, Result};
