//! Energy, ergotropy, occupations, ordering parameters and capacities of the
//! battery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::excitations;
use crate::operator::{check_dim, DensityMatrix, HermitianOperator};
use crate::spectral::{eigenvalues, GroundState};

/// Imaginary part of a trace tolerated as roundoff.
pub const IMAG_TOL: f64 = 1e-10;
/// Ergotropy in `[-ERGOTROPY_CLAMP, 0)` is reported as zero.
pub const ERGOTROPY_CLAMP: f64 = 1e-9;
/// Density-matrix eigenvalues below this are an invalid state.
pub const RHO_EIGEN_TOL: f64 = 1e-8;

/// `tr[H_B ρ_B]`
pub fn battery_energy(rho: &DensityMatrix, h_b: &HermitianOperator) -> Result<f64> {
    check_dim(h_b.dim(), rho.dim())?;
    let h = h_b.matrix();
    let r = rho.matrix();
    let n = h.nrows();
    // tr[HR] = Σ_ij H_ij R_ji without forming the product
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            acc += h[(i, j)] * r[(j, i)];
        }
    }
    if acc.im.abs() > IMAG_TOL {
        return Err(Error::ComplexExpectation(acc.im));
    }
    Ok(acc.re)
}

/// `ΔE = E_B − E_G`
pub fn charged_energy(e_b: f64, e_ground: f64) -> f64 {
    e_b - e_ground
}

/// Ergotropy with the battery spectrum precomputed.
///
/// `energy` is `tr[H_B ρ]` and `levels` the `H_B` eigenvalues in ascending
/// order. The passive energy pairs the largest population with the lowest
/// level.
pub fn ergotropy_from_levels(rho: &DensityMatrix, energy: f64, levels: &[f64]) -> Result<f64> {
    check_dim(levels.len(), rho.dim())?;
    let mut populations = rho.eigenvalues();
    if let Some(&lowest) = populations.iter().min_by(|a, b| a.total_cmp(b)) {
        if lowest < -RHO_EIGEN_TOL {
            return Err(Error::InvalidState(format!("density matrix eigenvalue {lowest:.3e}")));
        }
    }
    // descending; stable so equal populations keep their original order
    populations.sort_by(|a, b| b.total_cmp(a));
    let passive: f64 = populations.iter().zip(levels).map(|(r, e)| r * e).sum();
    clamp_ergotropy(energy - passive)
}

pub(crate) fn clamp_ergotropy(value: f64) -> Result<f64> {
    if value < -ERGOTROPY_CLAMP {
        return Err(Error::NegativeErgotropy(value));
    }
    Ok(value.max(0.0))
}

/// `ε = tr[H_B ρ] − Σ_n r_n e_n` with `r` descending and `e` ascending.
pub fn ergotropy(rho: &DensityMatrix, h_b: &HermitianOperator) -> Result<f64> {
    let energy = battery_energy(rho, h_b)?;
    ergotropy_from_levels(rho, energy, &eigenvalues(h_b))
}

/// `O_i = tr[ρ σ+_i σ−_i]` for sites `i = 1..=N`.
pub fn occupations(rho: &DensityMatrix) -> Vec<f64> {
    let dim = rho.dim();
    let n = dim.trailing_zeros() as usize;
    let m = rho.matrix();
    (0..n)
        .map(|site| (0..dim).filter(|s| s & (1 << site) != 0).map(|s| m[(s, s)].re).sum())
        .collect()
}

/// `tr[ρ Σ σ+σ−]` evaluated directly on the diagonal.
pub fn total_excitation(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    (0..rho.dim()).map(|s| excitations(s) as f64 * m[(s, s)].re).sum()
}

/// Eigenvalue convention for `σ_z` in the ordering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpinConvention {
    /// `σ_z = ±1`
    #[default]
    Pauli,
    /// `S_z = ±1/2`
    SpinHalf,
}

impl SpinConvention {
    pub fn scale(self) -> f64 {
        match self {
            SpinConvention::Pauli => 1.0,
            SpinConvention::SpinHalf => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingParams {
    pub m_z: f64,
    pub xi_z: f64,
}

/// `M_z = <S_z>/N`, `ξ_z = <S_z²>/N²` on the battery ground state.
pub fn ordering_params(ground: &GroundState, n: usize, convention: SpinConvention) -> OrderingParams {
    let scale = convention.scale();
    let amps = ground.vector.amplitudes();
    let (mut sz, mut sz2) = (0.0, 0.0);
    for (s, a) in amps.iter().enumerate() {
        let w = a.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let value = scale * (2.0 * excitations(s) as f64 - n as f64);
        sz += w * value;
        sz2 += w * value * value;
    }
    let nf = n as f64;
    OrderingParams {
        m_z: sz / nf,
        xi_z: sz2 / (nf * nf),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacities {
    pub r_eb: f64,
    pub r_epb: f64,
}

/// `R_eb = ΔE/(E_max − E_G)`, `R_epb = ε/(E_max − E_G)`.
pub fn capacities(d_e: f64, ergotropy: f64, e_max: f64, e_ground: f64) -> Result<Capacities> {
    let window = e_max - e_ground;
    if window <= 0.0 {
        return Err(Error::UndefinedCapacity(e_max));
    }
    Ok(Capacities {
        r_eb: d_e / window,
        r_epb: ergotropy / window,
    })
}
