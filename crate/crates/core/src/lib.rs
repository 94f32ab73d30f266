pub mod certificate;
pub mod cli;
pub mod correspondence;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod selftest;
pub mod spectral;
pub mod timestepper;

pub use error::{Error, Result};
