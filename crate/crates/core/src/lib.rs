//! Stochastic quantum hydrodynamics on a periodic 1-D grid.
//!
//! A single particle in an external potential evolves under the
//! Schrödinger equation with a spatially correlated density noise. The crate
//! provides the field types, the quantum potential and its range analysis,
//! the noise generator, the stepper with Bohmian tracers, and the two
//! experiments built on them: forward/backward asymmetry and the classical
//! large-scale limit.

// `!(x > 0.0)` is deliberate throughout: it rejects NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical_limit;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod noise;
pub mod qpotential;
pub mod reversibility;
pub mod rng;
pub mod simulation;
pub mod spatial;

pub use classical_limit::{LimitReport, LimitSetup};
pub use config::RunConfig;
pub use dynamics::{PotentialSpec, SimState, TracerEnsemble};
pub use error::{Error, ErrorClass, Result};
pub use noise::{NoiseField, NoiseParams};
pub use qpotential::{LambdaQ, QuantumParams, RangeReport};
pub use reversibility::AsymmetryResult;
pub use rng::SeedStream;
pub use spatial::{DensityField, Grid1D, ScalarField, WaveField};
