pub mod error;
pub mod field;
pub mod surrogate;
pub mod response;
pub mod fpca;
pub mod zones;
pub mod cfe;
pub mod cli;

pub use error::{Error, Result};
