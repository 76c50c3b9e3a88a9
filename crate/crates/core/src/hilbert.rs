//! Basis bookkeeping for the cavity ⊗ spin-chain space.
//!
//! Composite basis index is `m * 2^N + s`: the cavity photon number `m` is the
//! major index and the spin bitstring `s` the minor one. Site `i` (1-based)
//! maps to bit `i - 1`; a set bit is an excited spin.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::{
    check_dim, CMatrix, CVector, DensityMatrix, HermitianOperator, Space, StateVector, C64, NORM_TOL,
};
use crate::params::{CavityCutoff, ModelParams};

/// Weight outside a sector above which a projection is refused.
pub const SECTOR_LEAKAGE_TOL: f64 = 1e-10;

/// Number of excited spins in bitstring `s`.
#[inline]
pub fn excitations(s: usize) -> usize {
    s.count_ones() as usize
}

/// Dimensions of the composite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertGeometry {
    pub n: usize,
    pub spin_dim: usize,
    pub cavity_dim: usize,
}

impl HilbertGeometry {
    pub fn new(n: usize, cavity_dim: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter {
                name: "N",
                reason: "spin count must be at least 1".into(),
            });
        }
        if cavity_dim < 1 {
            return Err(Error::InvalidParameter {
                name: "cavity_dim",
                reason: "cavity dimension must be at least 1".into(),
            });
        }
        Ok(Self {
            n,
            spin_dim: 1 << n,
            cavity_dim,
        })
    }

    /// Geometry for a charging run whose battery ground state has `k_g`
    /// excitations. With [`CavityCutoff::Exact`] the cavity holds every photon
    /// number reachable from `|n_c> ⊗ |g>`.
    pub fn for_charging(params: &ModelParams, k_g: usize) -> Result<Self> {
        let cavity_dim = match params.cavity_cutoff {
            CavityCutoff::Exact => params.n_c + k_g + 1,
            CavityCutoff::Fock => params.n_c + 1,
        };
        Self::new(params.n, cavity_dim)
    }

    pub fn full_dim(&self) -> usize {
        self.cavity_dim * self.spin_dim
    }

    #[inline]
    pub fn index(&self, photons: usize, spins: usize) -> usize {
        photons * self.spin_dim + spins
    }

    #[inline]
    pub fn split(&self, index: usize) -> (usize, usize) {
        (index / self.spin_dim, index % self.spin_dim)
    }
}

/// σ− on site `i` of an `n`-spin chain, identity elsewhere.
pub fn spin_lowering(i: usize, n: usize) -> Result<CMatrix> {
    if i < 1 || i > n {
        return Err(Error::SiteOutOfRange { index: i, n });
    }
    let dim = 1usize << n;
    let bit = 1usize << (i - 1);
    let mut m = CMatrix::zeros(dim, dim);
    for s in (0..dim).filter(|s| s & bit != 0) {
        m[(s ^ bit, s)] = C64::new(1.0, 0.0);
    }
    Ok(m)
}

pub fn spin_raising(i: usize, n: usize) -> Result<CMatrix> {
    Ok(spin_lowering(i, n)?.adjoint())
}

/// Photon annihilation operator truncated to `dim` Fock levels.
pub fn cavity_annihilation(dim: usize) -> Result<CMatrix> {
    if dim < 1 {
        return Err(Error::InvalidParameter {
            name: "cavity_dim",
            reason: "cavity dimension must be at least 1".into(),
        });
    }
    let mut c = CMatrix::zeros(dim, dim);
    for m in 1..dim {
        c[(m - 1, m)] = C64::new((m as f64).sqrt(), 0.0);
    }
    Ok(c)
}

/// Kronecker product `op_c ⊗ op_s` in cavity-major order. `None` stands for
/// the identity on that factor.
pub fn embed(geometry: &HilbertGeometry, op_c: Option<&CMatrix>, op_s: Option<&CMatrix>) -> Result<CMatrix> {
    let id_c;
    let id_s;
    let a = match op_c {
        Some(m) => m,
        None => {
            id_c = CMatrix::identity(geometry.cavity_dim, geometry.cavity_dim);
            &id_c
        }
    };
    let b = match op_s {
        Some(m) => m,
        None => {
            id_s = CMatrix::identity(geometry.spin_dim, geometry.spin_dim);
            &id_s
        }
    };
    check_dim(geometry.cavity_dim, a.nrows())?;
    check_dim(geometry.cavity_dim, a.ncols())?;
    check_dim(geometry.spin_dim, b.nrows())?;
    check_dim(geometry.spin_dim, b.ncols())?;
    Ok(a.kronecker(b))
}

/// Diagonal of `c†c + Σ σ+σ−` in the composite basis.
pub fn excitation_diagonal(geometry: &HilbertGeometry) -> Vec<f64> {
    (0..geometry.full_dim())
        .map(|idx| {
            let (m, s) = geometry.split(idx);
            (m + excitations(s)) as f64
        })
        .collect()
}

/// Total excitation operator `N_exc` on the composite space.
pub fn excitation_operator(geometry: &HilbertGeometry) -> HermitianOperator {
    let diag = excitation_diagonal(geometry);
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    HermitianOperator::from_real(m, Space::Composite).expect("diagonal real matrix")
}

/// `ρ_B = Σ_m <m|ψ><ψ|m>` for a composite pure state.
pub fn partial_trace_cavity(geometry: &HilbertGeometry, psi: &StateVector) -> Result<DensityMatrix> {
    check_dim(geometry.full_dim(), psi.dim())?;
    let norm = psi.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(partial_trace_unchecked(geometry, psi.amplitudes()))
}

pub(crate) fn partial_trace_unchecked(geometry: &HilbertGeometry, amps: &CVector) -> DensityMatrix {
    let d = geometry.spin_dim;
    let mut rho = CMatrix::zeros(d, d);
    for m in 0..geometry.cavity_dim {
        let block = amps.rows(m * d, d);
        rho += block * block.adjoint();
    }
    DensityMatrix::new_unchecked(rho, Space::Battery)
}

/// Composite basis states `|m> ⊗ |s>` with `m + popcount(s) = K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sector {
    geometry: HilbertGeometry,
    total: usize,
    indices: Vec<usize>,
    /// Full index -> position in `indices`.
    lookup: Vec<Option<usize>>,
}

/// Enumerates excitation sector `k_total` of the given composite space.
pub fn sector_basis(k_total: usize, geometry: &HilbertGeometry) -> Sector {
    let mut indices = Vec::new();
    for m in 0..geometry.cavity_dim.min(k_total + 1) {
        let k = k_total - m;
        if k > geometry.n {
            continue;
        }
        for s in (0..geometry.spin_dim).filter(|&s| excitations(s) == k) {
            indices.push(geometry.index(m, s));
        }
    }
    indices.sort_unstable();
    let mut lookup = vec![None; geometry.full_dim()];
    for (pos, &idx) in indices.iter().enumerate() {
        lookup[idx] = Some(pos);
    }
    Sector {
        geometry: *geometry,
        total: k_total,
        indices,
        lookup,
    }
}

impl Sector {
    pub fn total_excitation(&self) -> usize {
        self.total
    }

    pub fn geometry(&self) -> &HilbertGeometry {
        &self.geometry
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Position of full-space index `idx`, if it belongs to the sector.
    #[inline]
    pub fn position(&self, idx: usize) -> Option<usize> {
        self.lookup.get(idx).copied().flatten()
    }

    /// Restricts a composite state to the sector; fails if it leaks.
    pub fn project_state(&self, psi: &StateVector) -> Result<StateVector> {
        check_dim(self.geometry.full_dim(), psi.dim())?;
        let amps = psi.amplitudes();
        let inside: f64 = self.indices.iter().map(|&i| amps[i].norm_sqr()).sum();
        let outside = (amps.norm_squared() - inside).max(0.0);
        if outside > SECTOR_LEAKAGE_TOL {
            return Err(Error::SectorLeakage {
                sector: self.total,
                weight: outside,
            });
        }
        let reduced = CVector::from_iterator(self.len(), self.indices.iter().map(|&i| amps[i]));
        Ok(StateVector::new_unchecked(reduced, Space::Sector))
    }

    pub fn embed_state(&self, psi: &StateVector) -> Result<StateVector> {
        check_dim(self.len(), psi.dim())?;
        let mut full = CVector::zeros(self.geometry.full_dim());
        for (pos, &idx) in self.indices.iter().enumerate() {
            full[idx] = psi.amplitudes()[pos];
        }
        Ok(StateVector::new_unchecked(full, Space::Composite))
    }

    /// `P H P` restricted to the sector basis.
    pub fn project_operator(&self, op: &HermitianOperator) -> Result<HermitianOperator> {
        check_dim(self.geometry.full_dim(), op.dim())?;
        let n = self.len();
        let src = op.matrix();
        let m = CMatrix::from_fn(n, n, |a, b| src[(self.indices[a], self.indices[b])]);
        HermitianOperator::new(m, Space::Sector)
    }

    /// Reduced battery state of a sector-space state. Each spin bitstring
    /// appears at most once in a sector, so only pairs with equal photon
    /// number contribute.
    pub fn partial_trace(&self, psi: &StateVector) -> Result<DensityMatrix> {
        check_dim(self.len(), psi.dim())?;
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(self.partial_trace_unchecked(psi.amplitudes()))
    }

    pub(crate) fn partial_trace_unchecked(&self, amps: &CVector) -> DensityMatrix {
        let d = self.geometry.spin_dim;
        let mut rho = CMatrix::zeros(d, d);
        // indices are sorted, so equal-m runs are contiguous
        let mut start = 0;
        while start < self.len() {
            let (m, _) = self.geometry.split(self.indices[start]);
            let mut end = start;
            while end < self.len() && self.geometry.split(self.indices[end]).0 == m {
                end += 1;
            }
            for a in start..end {
                let sa = self.geometry.split(self.indices[a]).1;
                for b in start..end {
                    let sb = self.geometry.split(self.indices[b]).1;
                    rho[(sa, sb)] += amps[a] * amps[b].conj();
                }
            }
            start = end;
        }
        DensityMatrix::new_unchecked(rho, Space::Battery)
    }
}

/// Spin bitstrings with exactly `k` excitations, ascending.
pub fn spin_sector_indices(n: usize, k: usize) -> Vec<usize> {
    (0..1usize << n).filter(|&s| excitations(s) == k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn single_spin_lowering() {
        let sm = spin_lowering(1, 1).unwrap();
        assert_eq!(sm[(0, 1)], c(1.0));
        assert_eq!(sm.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn lowering_acts_on_named_site() {
        // |e,g>: site 1 excited -> bit 0 set -> index 1
        let sm = spin_lowering(1, 2).unwrap();
        let mut v = CVector::zeros(4);
        v[1] = c(1.0);
        let out = &sm * v;
        assert_eq!(out[0], c(1.0));
        assert_abs_diff_eq!(out.norm(), 1.0);
    }

    #[test]
    fn lowering_index_out_of_range() {
        assert_eq!(spin_lowering(0, 3), Err(Error::SiteOutOfRange { index: 0, n: 3 }));
        assert_eq!(spin_lowering(4, 3), Err(Error::SiteOutOfRange { index: 4, n: 3 }));
    }

    #[test]
    fn spin_number_counts_bits() {
        for n in 1..=4 {
            let dim = 1 << n;
            let mut number = CMatrix::zeros(dim, dim);
            for i in 1..=n {
                let sm = spin_lowering(i, n).unwrap();
                number += sm.adjoint() * &sm;
            }
            // bit-count oracle over every basis state
            for s in 0..dim {
                for t in 0..dim {
                    let expected = if s == t { s.count_ones() as f64 } else { 0.0 };
                    assert_eq!(number[(s, t)], c(expected));
                }
            }
        }
    }

    #[test]
    fn annihilation_ladder() {
        let a = cavity_annihilation(2).unwrap();
        assert_eq!(a[(0, 1)], c(1.0));
        let a = cavity_annihilation(6).unwrap();
        let number = a.adjoint() * &a;
        for m in 0..6 {
            assert_abs_diff_eq!(number[(m, m)].re, m as f64, epsilon = 1e-14);
        }
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        for m in 0..5 {
            for k in 0..5 {
                let expected = if m == k { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(comm[(m, k)].re, expected, epsilon = 1e-12);
            }
        }
        assert!(cavity_annihilation(0).is_err());
    }

    #[test]
    fn embed_number_expectation() {
        let g = HilbertGeometry::new(2, 5).unwrap();
        let a = cavity_annihilation(5).unwrap();
        let number = embed(&g, Some(&(a.adjoint() * &a)), None).unwrap();
        let op = HermitianOperator::new(number, Space::Composite).unwrap();
        for s in 0..4 {
            let psi = StateVector::basis(g.full_dim(), g.index(4, s), Space::Composite).unwrap();
            assert_abs_diff_eq!(op.expectation(&psi).unwrap(), 4.0);
        }
    }

    #[test]
    fn embed_rejects_wrong_dims() {
        let g = HilbertGeometry::new(2, 3).unwrap();
        let wrong = CMatrix::identity(3, 3);
        assert!(embed(&g, None, Some(&wrong)).is_err());
    }

    #[test]
    fn partial_trace_product_state() {
        let g = HilbertGeometry::new(1, 2).unwrap();
        let psi = StateVector::basis(g.full_dim(), g.index(0, 1), Space::Composite).unwrap();
        let rho = partial_trace_cavity(&g, &psi).unwrap();
        assert_eq!(rho.matrix()[(1, 1)], c(1.0));
        assert_eq!(rho.matrix()[(0, 0)], c(0.0));
    }

    #[test]
    fn partial_trace_bell_like_state() {
        let g = HilbertGeometry::new(1, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = CVector::zeros(4);
        v[g.index(0, 1)] = c(h);
        v[g.index(1, 0)] = c(h);
        let psi = StateVector::new(v, Space::Composite).unwrap();
        let rho = partial_trace_cavity(&g, &psi).unwrap();
        assert_abs_diff_eq!(rho.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.matrix()[(1, 1)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.matrix()[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn partial_trace_rejects_unnormalized() {
        let g = HilbertGeometry::new(1, 2).unwrap();
        let v = CVector::from_element(4, c(1.0));
        let psi = StateVector::new_unchecked(v, Space::Composite);
        assert!(matches!(
            partial_trace_cavity(&g, &psi),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn sector_sizes() {
        let g = HilbertGeometry::new(1, 2).unwrap();
        let s = sector_basis(1, &g);
        assert_eq!(s.indices(), &[g.index(0, 1), g.index(1, 0)]);

        let g = HilbertGeometry::new(3, 4).unwrap();
        let s = sector_basis(0, &g);
        assert_eq!(s.indices(), &[0]);
    }

    #[test]
    fn sector_size_matches_enumeration() {
        // brute force over all (m, bitstring) pairs
        for (n, k_total, cavity_dim) in [(5, 11, 12), (4, 2, 3), (3, 5, 2), (6, 13, 20)] {
            let g = HilbertGeometry::new(n, cavity_dim).unwrap();
            let brute = (0..cavity_dim)
                .flat_map(|m| (0..1usize << n).map(move |s| (m, s)))
                .filter(|&(m, s)| m + s.count_ones() as usize == k_total)
                .count();
            assert_eq!(sector_basis(k_total, &g).len(), brute);
        }
        let g = HilbertGeometry::new(5, 12).unwrap();
        assert_eq!(sector_basis(11, &g).len(), 32);
    }

    #[test]
    fn empty_sector_flagged() {
        let g = HilbertGeometry::new(2, 2).unwrap();
        assert!(sector_basis(5, &g).is_empty());
    }

    #[test]
    fn sector_projection_refuses_leaking_state() {
        let g = HilbertGeometry::new(2, 3).unwrap();
        let s = sector_basis(1, &g);
        let psi = StateVector::basis(g.full_dim(), g.index(2, 0), Space::Composite).unwrap();
        assert!(matches!(s.project_state(&psi), Err(Error::SectorLeakage { .. })));
    }

    #[test]
    fn sector_partial_trace_matches_full() {
        let g = HilbertGeometry::new(3, 5).unwrap();
        let s = sector_basis(4, &g);
        let raw: Vec<C64> = (0..s.len())
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let v = CVector::from_vec(raw);
        let v = &v / C64::new(v.norm(), 0.0);
        let psi = StateVector::new(v, Space::Sector).unwrap();
        let full = s.embed_state(&psi).unwrap();
        let a = s.partial_trace(&psi).unwrap();
        let b = partial_trace_cavity(&g, &full).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-14);
        a.validate().unwrap();
    }
}
