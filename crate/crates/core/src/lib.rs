//! Rate-distortion-perception (RDP) function of Gaussian vector sources.
//!
//! The source is decorrelated by an eigendecomposition of its covariance,
//! after which every quantity factors over the eigen-components:
//!
//! | Quantity | Per-component form |
//! |----------|--------------------|
//! | rate | ½·ln(λ/γ) |
//! | distortion | λ − 2√(λ̂(λ−γ)) + λ̂ |
//! | KL perception | ½(λ̂/λ − 1 + ln(λ/λ̂)) |
//! | W2² perception | (√λ − √λ̂)² |
//!
//! Here λ is the component variance, γ the water level (MMSE of the
//! component given its reconstruction) and λ̂ the reconstruction variance.
//!
//! [`solver::solve`] evaluates R(D, P) by case analysis plus a search over
//! the two Lagrange multipliers. [`classic`] holds ordinary reverse
//! water-filling, [`oracle`] an independent barrier-method minimizer of the
//! primal program and [`montecarlo`] a sampling check of the joint Gaussian
//! construction.
//!
//! The crate is `no_std` and only needs `alloc`. All transcendental
//! functions go through `libm`, so results are identical across targets.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classic;
pub mod eigen;
pub mod error;
pub mod kernel;
pub(crate) mod math;
pub mod model;
pub mod montecarlo;
pub mod oracle;
pub mod roots;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    CaseTag, ComponentAllocation, CurveSweep, DualPoint, KktResiduals, PerceptionMetric, RateUnit, RdpSolution,
    SourceSpectrum, SweepMetadata, TradeoffQuery,
};
pub use solver::SolverConfig;
