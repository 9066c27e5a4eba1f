pub mod bench;
pub mod dynamics;
pub mod error;
pub mod lie;
pub mod mpc;
pub mod qp;
pub mod quadruped;

pub use error::{Error, Result};
