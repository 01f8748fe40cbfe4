pub mod error;
pub mod fock;
pub mod hbsm;
pub mod nongauss;
pub mod protocols;
pub mod quadrature;
pub mod resource;

pub use error::{Error, Result};
