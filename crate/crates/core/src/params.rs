//! Physical and numerical parameters of one battery instance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which sites carry a `J(1 - delta)` bond.
///
/// `Corrected` bonds every even site `i` with `i + 1 <= N`, so an odd chain has
/// equally many strong and weak bonds. `AsPrinted` stops the weak-bond sum at
/// `i = N - 2`, which drops the last bond of odd chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BondRule {
    #[default]
    Corrected,
    AsPrinted,
}

/// How many cavity Fock levels are kept.
///
/// `Exact` keeps `n_c + k_g + 1` levels, enough for every state reachable
/// from the initial state, so the truncation introduces no error.
/// `Fock` keeps only `n_c + 1` levels; states that would need more photons
/// than the initial Fock state are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CavityCutoff {
    #[default]
    Exact,
    Fock,
}

/// All physical parameters of one battery-plus-cavity instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of spins in the chain.
    pub n: usize,
    pub omega_a: f64,
    pub omega_c: f64,
    pub g: f64,
    /// Nearest-neighbour hopping strength.
    pub j: f64,
    /// Dimerization parameter in `[-1, 1]`.
    pub delta: f64,
    /// Initial cavity photon number.
    pub n_c: usize,
    pub bond_rule: BondRule,
    pub cavity_cutoff: CavityCutoff,
}

impl ModelParams {
    /// Resonant defaults `omega_a = omega_c = g = J = 1`, `delta = 0`,
    /// `n_c = 2N + 1`.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            omega_a: 1.0,
            omega_c: 1.0,
            g: 1.0,
            j: 1.0,
            delta: 0.0,
            n_c: default_photons(n),
            bond_rule: BondRule::default(),
            cavity_cutoff: CavityCutoff::default(),
        }
    }

    pub fn with_hopping(mut self, j: f64) -> Self {
        self.j = j;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_photons(mut self, n_c: usize) -> Self {
        self.n_c = n_c;
        self
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(invalid("N", "spin count must be at least 1"));
        }
        // 2^N x 2^N dense blocks; beyond this the battery alone is several GB.
        if self.n > MAX_SPINS {
            return Err(invalid("N", format!("spin count must be at most {MAX_SPINS}")));
        }
        if !(self.omega_a.is_finite() && self.omega_a > 0.0) {
            return Err(invalid("omega-a", "spin frequency must be positive"));
        }
        for (name, value) in [("omega-c", self.omega_c), ("g", self.g), ("J", self.j)] {
            if !value.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(-1.0..=1.0).contains(&self.delta) {
            return Err(invalid("delta", format!("dimerization {} outside [-1, 1]", self.delta)));
        }
        Ok(())
    }
}

/// Largest chain the dense representation accepts.
pub const MAX_SPINS: usize = 12;

/// Photon number `2N + 1`, the smallest satisfying `n_c > 2N`.
pub fn default_photons(n: usize) -> usize {
    2 * n + 1
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
