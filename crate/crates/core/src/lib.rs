//! Uplift modeling with response-ranking and uplift-ranking objectives.
//!
//! A shared representation network feeds treated and control heads that
//! each predict a zero-inflated lognormal response distribution. Training
//! combines the regression loss with pairwise response-ranking losses, a
//! listwise uplift-ranking loss, an optional representation-balancing term
//! and L2 regularization. The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod hillstrom;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod optim;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
