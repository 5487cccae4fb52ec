#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod distribution;
pub mod error;
mod linalg;
pub mod mediation;
pub mod mediator;
pub mod outcome;
pub mod sensitivity;
pub mod simulation;

pub use distribution::{
    barycenter, empirical_quantile, lqd_inverse, lqd_transform, lqd_transform_with, wasserstein2, Grid,
    LqdConfig, LqdFunction, QuantileFunction,
};
pub use error::{Error, Result};
