//! Simulation and diagnostics for the diffusion approximation of a
//! load-balancing network of infinite-server stations.
//!
//! * [`model`]: parameters, routing, and the pre-limit and limit coefficients.
//! * [`ctmc`]: exact simulation of the queue-length chain and path functionals.
//! * [`sde`]: Euler–Maruyama for the limit SDE and its variants, RK4 for the fluid ODE.
//! * [`stats`]: seeded ensembles and the statistical checks run against them.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the common double-precision case.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ctmc;
pub mod error;
pub mod model;
pub mod path;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ModelParams64 = model::ModelParams<f64>;
pub type DerivedRates64 = model::DerivedRates<f64>;
pub type QueuePath64 = ctmc::QueuePath<f64>;
pub type SamplePath64 = path::SamplePath<f64>;
pub type TimeGrid64 = path::TimeGrid<f64>;
pub type SdeSpec64 = sde::SdeSpec<f64>;
pub type FluidParams64 = sde::FluidParams<f64>;

pub type ModelParams32 = model::ModelParams<f32>;
pub type SamplePath32 = path::SamplePath<f32>;
pub type SdeSpec32 = sde::SdeSpec<f32>;
