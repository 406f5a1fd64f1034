pub mod audio;
pub mod bcresnet;
pub mod error;
pub mod grad;
pub mod harness;
pub mod mel;
pub mod scene;
pub mod tflab;

pub use error::{Error, Result};
