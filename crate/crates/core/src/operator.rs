//! Dense operators, pure states and density matrices over a tagged space.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Entrywise Hermiticity tolerance, relative to the largest entry (at least 1).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on state norms and density-matrix traces.
pub const NORM_TOL: f64 = 1e-10;
/// Most negative density-matrix eigenvalue accepted as roundoff.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Which Hilbert space an object lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Battery,
    Cavity,
    Composite,
    Sector,
}

/// Largest entrywise deviation `|A_ij - conj(A_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Dense self-adjoint matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
    space: Space,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix, space: Space) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation > HERMITIAN_TOL * max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { matrix, space })
    }

    pub fn from_real(matrix: DMatrix<f64>, space: Space) -> Result<Self> {
        Self::new(matrix.map(|x| C64::new(x, 0.0)), space)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    /// Real part of the matrix; meaningful when [`is_real`](Self::is_real).
    pub fn real_part(&self) -> DMatrix<f64> {
        self.matrix.map(|z| z.re)
    }

    /// `<psi|H|psi>`, real by Hermiticity.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        check_dim(self.dim(), psi.dim())?;
        let value = psi.amplitudes().dotc(&(&self.matrix * psi.amplitudes()));
        Ok(value.re)
    }

    /// Largest entry of `|[self, other]|`.
    pub fn commutator_max(&self, other: &CMatrix) -> f64 {
        let c = &self.matrix * other - other * &self.matrix;
        max_abs(&c)
    }
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    space: Space,
}

impl StateVector {
    pub fn new(amplitudes: CVector, space: Space) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amplitudes, space })
    }

    /// Wraps amplitudes without checking the norm. Callers that evolve
    /// states report the norm error as a diagnostic instead.
    pub(crate) fn new_unchecked(amplitudes: CVector, space: Space) -> Self {
        Self { amplitudes, space }
    }

    pub fn basis(dim: usize, index: usize, space: Space) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: index + 1,
            });
        }
        let mut amps = CVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self::new_unchecked(amps, space))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn norm_error(&self) -> f64 {
        (self.norm() - 1.0).abs()
    }
}

/// Mixed state of the battery (or any tagged space).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    space: Space,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix, space: Space) -> Result<Self> {
        let rho = Self { matrix, space };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn new_unchecked(matrix: CMatrix, space: Space) -> Self {
        Self { matrix, space }
    }

    pub fn pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        Self::new_unchecked(a * a.adjoint(), psi.space())
    }

    pub fn maximally_mixed(dim: usize, space: Space) -> Self {
        Self::new_unchecked(CMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0), space)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Eigenvalues (unsorted) of the Hermitian matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.clone().symmetric_eigenvalues().iter().copied().collect()
    }

    pub fn validate(&self) -> Result<()> {
        let deviation = hermitian_deviation(&self.matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {deviation:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let lowest = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if lowest < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {lowest:.3e}")));
        }
        Ok(())
    }

    /// `UρU†`
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self::new_unchecked(u * &self.matrix * u.adjoint(), self.space)
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
