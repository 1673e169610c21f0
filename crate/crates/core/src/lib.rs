//! Weighted best approximations, twisted badness, and a Cantor-type subset
//! of the twisted weighted badly approximable set, with certified arithmetic.

pub mod arith;
pub mod badness;
pub mod bestapprox;
pub mod cantor;
pub mod error;
pub mod measure;

pub use error::{Error, Result};
