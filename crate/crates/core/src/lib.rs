pub mod datagen;
pub mod error;
pub mod losses;
pub mod mirror;
pub mod protocols;
pub mod rng;
pub mod sparsify;
pub mod vecspace;

pub use error::{Error, Result};
