//! Exact-diagonalization simulator for a dimerized (Su-Schrieffer-Heeger)
//! spin-chain quantum battery charged by a single cavity mode.
//!
//! The battery starts in its ground state, the cavity in a Fock state; the
//! composite system evolves unitarily and the charged energy, ergotropy,
//! occupations and capacities are read off the reduced battery state.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod observables;
pub mod operator;
pub mod params;
pub mod spectral;
pub mod sweeps;

pub use dynamics::{ChargingOptions, ChargingResult, ChargingSimulation, ExecutionMode, Sample, Trajectory};
pub use error::{Error, Result};
pub use observables::{Capacities, OrderingParams, SpinConvention};
pub use params::{BondRule, CavityCutoff, ModelParams};
pub use sweeps::{Grid, SweepOptions, SweepRecord};
