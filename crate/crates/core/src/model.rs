//! Hamiltonians of the dimerized chain, the cavity, and their coupling.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::hilbert::{cavity_annihilation, embed, excitations, spin_lowering, HilbertGeometry, Sector};
use crate::operator::{CMatrix, HermitianOperator, Space, C64};
use crate::params::{BondRule, ModelParams};

/// One nearest-neighbour bond between sites `site` and `site + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub site: usize,
    pub strength: f64,
}

impl Bond {
    /// Odd left sites carry `J(1 + δ)`.
    pub fn is_plus_type(&self) -> bool {
        self.site % 2 == 1
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BondList(pub Vec<Bond>);

impl BondList {
    pub fn iter(&self) -> impl Iterator<Item = &Bond> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn plus_count(&self) -> usize {
        self.0.iter().filter(|b| b.is_plus_type()).count()
    }

    pub fn minus_count(&self) -> usize {
        self.len() - self.plus_count()
    }
}

/// Staggered open-chain bonds: `J(1+δ)` on odd left sites, `J(1−δ)` on even.
pub fn bond_pattern(n: usize, j: f64, delta: f64, rule: BondRule) -> BondList {
    let last_minus = match rule {
        BondRule::Corrected => n.saturating_sub(1),
        BondRule::AsPrinted => n.saturating_sub(2),
    };
    let bonds = (1..n)
        .filter_map(|site| {
            if site % 2 == 1 {
                Some(Bond {
                    site,
                    strength: j * (1.0 + delta),
                })
            } else if site <= last_minus {
                Some(Bond {
                    site,
                    strength: j * (1.0 - delta),
                })
            } else {
                None
            }
        })
        .collect();
    BondList(bonds)
}

/// Real matrix of `ω_a Σ σ+σ− − Σ_bonds t (σ+_i σ−_{i+1} + h.c.)`.
pub(crate) fn battery_matrix(params: &ModelParams) -> DMatrix<f64> {
    let n = params.n;
    let dim = 1usize << n;
    let bonds = bond_pattern(n, params.j, params.delta, params.bond_rule);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..dim {
        h[(s, s)] = params.omega_a * excitations(s) as f64;
        for bond in bonds.iter() {
            let left = 1usize << (bond.site - 1);
            let right = 1usize << bond.site;
            // σ+_i σ−_{i+1}: excitation hops from site i+1 onto site i
            if s & right != 0 && s & left == 0 {
                let t = s ^ left ^ right;
                h[(t, s)] -= bond.strength;
                h[(s, t)] -= bond.strength;
            }
        }
    }
    h
}

pub fn build_battery_hamiltonian(params: &ModelParams) -> HermitianOperator {
    HermitianOperator::from_real(battery_matrix(params), Space::Battery).expect("symmetric by construction")
}

/// `ω_c c†c` on `cavity_dim` Fock levels.
pub fn build_cavity_hamiltonian(params: &ModelParams, cavity_dim: usize) -> HermitianOperator {
    let diag = nalgebra::DVector::from_fn(cavity_dim, |m, _| params.omega_c * m as f64);
    HermitianOperator::from_real(DMatrix::from_diagonal(&diag), Space::Cavity).expect("diagonal")
}

/// `g Σ_i (σ+_i c + h.c.)` assembled from Kronecker embeddings.
pub fn build_interaction(params: &ModelParams, geometry: &HilbertGeometry) -> Result<HermitianOperator> {
    let c = cavity_annihilation(geometry.cavity_dim)?;
    let mut h = CMatrix::zeros(geometry.full_dim(), geometry.full_dim());
    for i in 1..=params.n {
        let raise = spin_lowering(i, params.n)?.adjoint();
        let term = embed(geometry, Some(&c), Some(&raise))?;
        h += &term + term.adjoint();
    }
    h *= C64::new(params.g, 0.0);
    HermitianOperator::new(h, Space::Composite)
}

/// `H_S = H_A ⊗ I + I ⊗ H_B + H_I` on the full composite space.
pub fn build_total(params: &ModelParams, geometry: &HilbertGeometry) -> Result<HermitianOperator> {
    let h_a = build_cavity_hamiltonian(params, geometry.cavity_dim);
    let h_b = build_battery_hamiltonian(params);
    let h_i = build_interaction(params, geometry)?;
    let total = embed(geometry, Some(h_a.matrix()), None)? + embed(geometry, None, Some(h_b.matrix()))? + h_i.matrix();
    HermitianOperator::new(total, Space::Composite)
}

/// `H_S` restricted to one excitation sector, built element by element
/// without forming the full matrix.
pub fn build_total_sector(params: &ModelParams, sector: &Sector) -> HermitianOperator {
    let geometry = sector.geometry();
    let h_b = battery_matrix(params);
    let dim = sector.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (a, &idx) in sector.indices().iter().enumerate() {
        let (m, s) = geometry.split(idx);
        for (b, &jdx) in sector.indices().iter().enumerate() {
            let (m2, s2) = geometry.split(jdx);
            if m == m2 {
                h[(a, b)] += h_b[(s, s2)];
            }
        }
        h[(a, a)] += params.omega_c * m as f64;
        // σ+_i c: one photon absorbed by spin i
        if m >= 1 {
            for i in 0..params.n {
                let bit = 1usize << i;
                if s & bit == 0 {
                    if let Some(b) = sector.position(geometry.index(m - 1, s | bit)) {
                        let amp = params.g * (m as f64).sqrt();
                        h[(b, a)] += amp;
                        h[(a, b)] += amp;
                    }
                }
            }
        }
    }
    HermitianOperator::from_real(h, Space::Sector).expect("symmetric by construction")
}

/// Reflection `i -> N + 1 - i` of spin bitstrings.
pub fn reflect_sites(s: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, b| if s & (1 << b) != 0 { acc | 1 << (n - 1 - b) } else { acc })
}
