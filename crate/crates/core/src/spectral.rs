//! Eigendecompositions, battery ground states, spectra and level crossings.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::spin_sector_indices;
use crate::model::battery_matrix;
use crate::operator::{CMatrix, CVector, HermitianOperator, Space, StateVector, C64};
use crate::params::ModelParams;

/// Gap below which two levels count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Bisection stops once the bracket on `J*` is narrower than this.
pub const CROSSING_TOL: f64 = 1e-8;

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V Λ V†`
    pub fn reconstruct(&self) -> CMatrix {
        let scaled = CMatrix::from_fn(self.dim(), self.dim(), |i, k| {
            self.eigenvectors[(i, k)] * self.eigenvalues[k]
        });
        scaled * self.eigenvectors.adjoint()
    }
}

/// Ascending sort with original index as the tie-break.
fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Full eigendecomposition of a Hermitian operator. Real symmetric input
/// takes the real solver.
pub fn eigh(h: &HermitianOperator) -> Result<EigenSystem> {
    if h.is_real() {
        return Ok(eigh_real(h.real_part()));
    }
    let decomposition = h.matrix().clone().symmetric_eigen();
    let values: Vec<f64> = decomposition.eigenvalues.iter().copied().collect();
    let order = ascending_order(&values);
    let n = values.len();
    let vectors = CMatrix::from_fn(n, n, |i, k| decomposition.eigenvectors[(i, order[k])]);
    Ok(EigenSystem {
        eigenvalues: order.iter().map(|&k| values[k]).collect(),
        eigenvectors: vectors,
    })
}

pub(crate) fn eigh_real(m: DMatrix<f64>) -> EigenSystem {
    let decomposition = m.symmetric_eigen();
    let values: Vec<f64> = decomposition.eigenvalues.iter().copied().collect();
    let order = ascending_order(&values);
    let n = values.len();
    let vectors = CMatrix::from_fn(n, n, |i, k| C64::new(decomposition.eigenvectors[(i, order[k])], 0.0));
    EigenSystem {
        eigenvalues: order.iter().map(|&k| values[k]).collect(),
        eigenvectors: vectors,
    }
}

/// Ascending eigenvalues only.
pub fn eigenvalues(h: &HermitianOperator) -> Vec<f64> {
    let mut values: Vec<f64> = if h.is_real() {
        h.real_part().symmetric_eigenvalues().iter().copied().collect()
    } else {
        h.matrix().clone().symmetric_eigenvalues().iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    values
}

/// Lowest eigenpair of the battery Hamiltonian.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub vector: StateVector,
    /// Spin excitation count of the selected ground vector.
    pub k_g: usize,
    /// `λ_1 − λ_0` over the whole battery spectrum.
    pub degeneracy_gap: f64,
}

impl GroundState {
    pub fn is_degenerate(&self) -> bool {
        self.degeneracy_gap < DEGENERACY_TOL
    }
}

/// Battery spectrum resolved by spin-excitation sector.
#[derive(Debug, Clone)]
pub struct BatterySpectrum {
    /// All eigenvalues, ascending.
    pub levels: Vec<f64>,
    /// Lowest eigenvalue in each sector `k = 0..=N`.
    pub sector_minima: Vec<f64>,
    pub ground: GroundState,
}

impl BatterySpectrum {
    pub fn e_max(&self) -> f64 {
        *self.levels.last().expect("nonempty spectrum")
    }

    pub fn e_ground(&self) -> f64 {
        self.ground.energy
    }
}

/// Diagonalizes `H_B` sector by sector. The ground vector is taken from the
/// lowest-`k` sector attaining the minimum; inside that sector, degenerate
/// candidates are ranked by their dominant basis index.
pub fn battery_spectrum(h_b: &HermitianOperator) -> Result<BatterySpectrum> {
    let dim = h_b.dim();
    if !dim.is_power_of_two() || h_b.space() != Space::Battery {
        return Err(Error::InvalidParameter {
            name: "H_B",
            reason: format!("expected a battery operator of dimension 2^N, got {dim}"),
        });
    }
    let n = dim.trailing_zeros() as usize;
    let full = h_b.matrix();

    let mut levels = Vec::with_capacity(dim);
    let mut sector_minima = Vec::with_capacity(n + 1);
    let mut sectors = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let idx = spin_sector_indices(n, k);
        let block = HermitianOperator::new(
            CMatrix::from_fn(idx.len(), idx.len(), |a, b| full[(idx[a], idx[b])]),
            Space::Battery,
        )?;
        let es = eigh(&block)?;
        sector_minima.push(es.eigenvalues[0]);
        levels.extend_from_slice(&es.eigenvalues);
        sectors.push((idx, es));
    }
    levels.sort_by(f64::total_cmp);

    let energy = levels[0];
    let degeneracy_gap = if dim > 1 { levels[1] - levels[0] } else { f64::INFINITY };
    let k_g = sector_minima
        .iter()
        .position(|&e| e - energy < DEGENERACY_TOL)
        .expect("minimum attained in some sector");

    let (idx, es) = &sectors[k_g];
    let candidates: Vec<usize> = (0..es.dim())
        .take_while(|&c| es.eigenvalues[c] - es.eigenvalues[0] < DEGENERACY_TOL)
        .collect();
    let dominant = |c: usize| -> usize {
        let col = es.eigenvectors.column(c);
        (0..col.len())
            .fold((0, -1.0), |(best, w), r| {
                let x = col[r].norm();
                if x > w + 1e-12 {
                    (r, x)
                } else {
                    (best, w)
                }
            })
            .0
    };
    let chosen = *candidates
        .iter()
        .min_by_key(|&&c| (idx[dominant(c)], c))
        .expect("at least one candidate");
    let col = es.eigenvectors.column(chosen);
    // fix the global phase: dominant component real and positive
    let lead = col[dominant(chosen)];
    let phase = lead.conj() / lead.norm();
    let mut amps = CVector::zeros(dim);
    for (r, &s) in idx.iter().enumerate() {
        amps[s] = col[r] * phase;
    }
    let norm = amps.norm();
    amps /= C64::new(norm, 0.0);

    let ground = GroundState {
        energy,
        vector: StateVector::new(amps, Space::Battery)?,
        k_g,
        degeneracy_gap,
    };
    if ground.is_degenerate() {
        log::warn!(
            "battery ground state degenerate (gap {:.3e}); selected sector k = {}",
            degeneracy_gap,
            k_g
        );
    }
    Ok(BatterySpectrum {
        levels,
        sector_minima,
        ground,
    })
}

pub fn ground_state(h_b: &HermitianOperator) -> Result<GroundState> {
    Ok(battery_spectrum(h_b)?.ground)
}

/// Highest battery level.
pub fn e_max(h_b: &HermitianOperator) -> f64 {
    *eigenvalues(h_b).last().expect("nonempty operator")
}

/// Per-J rows of the lowest battery levels.
#[derive(Debug, Clone)]
pub struct SpectrumRow {
    pub j: f64,
    pub levels: Vec<f64>,
    pub k_g: usize,
}

#[derive(Debug, Clone)]
pub struct SpectrumTable {
    /// Parameters shared by every row; `j` is overridden per row.
    pub params: ModelParams,
    pub rows: Vec<SpectrumRow>,
}

/// Ascending `H_B(J)` eigenvalues for each grid point, truncated to `levels`.
pub fn spectrum_vs_j(params: &ModelParams, j_grid: &[f64], levels: usize) -> Result<SpectrumTable> {
    if j_grid.is_empty() {
        return Err(Error::InvalidGrid("empty J grid".into()));
    }
    let rows = j_grid
        .par_iter()
        .map(|&j| {
            let p = params.with_hopping(j);
            let h_b = HermitianOperator::from_real(battery_matrix(&p), Space::Battery)?;
            let spectrum = battery_spectrum(&h_b)?;
            let mut lv = spectrum.levels;
            lv.truncate(levels);
            Ok(SpectrumRow {
                j,
                levels: lv,
                k_g: spectrum.ground.k_g,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumTable { params: *params, rows })
}

/// A ground-level crossing between spin-excitation sectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub j: f64,
    pub from_sector: usize,
    pub to_sector: usize,
}

fn sector_minimum(params: &ModelParams, j: f64, k: usize) -> f64 {
    let p = params.with_hopping(j);
    let h = battery_matrix(&p);
    let idx = spin_sector_indices(p.n, k);
    let block = h.select_rows(&idx).select_columns(&idx);
    block
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn ground_sector(params: &ModelParams, j: f64) -> (usize, f64) {
    let minima: Vec<f64> = (0..=params.n).map(|k| sector_minimum(params, j, k)).collect();
    let lowest = minima.iter().copied().fold(f64::INFINITY, f64::min);
    let k = minima.iter().position(|&e| e - lowest < DEGENERACY_TOL).unwrap();
    (k, lowest)
}

/// Locates every change of the ground sector along the table's J grid by
/// bisecting the difference of the two sector minima. Fails with
/// [`Error::GridTooCoarse`] when a third sector is the ground at the
/// bisected point, meaning two crossings fell inside one grid step.
pub fn detect_ground_crossings(table: &SpectrumTable) -> Result<Vec<Crossing>> {
    let params = &table.params;
    let mut crossings = Vec::new();
    for pair in table.rows.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        if lo.k_g == hi.k_g {
            continue;
        }
        let (ka, kb) = (lo.k_g, hi.k_g);
        // positive while sector ka is strictly lower; an exact tie counts as
        // crossed so a degeneracy sitting on a grid point is found there
        let ka_lower = |j: f64| sector_minimum(params, j, kb) - sector_minimum(params, j, ka) > DEGENERACY_TOL;
        let (mut a, mut b) = (lo.j, hi.j);
        if !ka_lower(a) {
            b = a;
        }
        while (b - a).abs() > CROSSING_TOL {
            let mid = 0.5 * (a + b);
            if ka_lower(mid) {
                a = mid;
            } else {
                b = mid;
            }
        }
        let j_star = 0.5 * (a + b);
        let level = sector_minimum(params, j_star, ka).min(sector_minimum(params, j_star, kb));
        let (_, lowest) = ground_sector(params, j_star);
        if lowest < level - 1e-7 {
            return Err(Error::GridTooCoarse { j_lo: lo.j, j_hi: hi.j });
        }
        crossings.push(Crossing {
            j: j_star,
            from_sector: ka,
            to_sector: kb,
        });
    }
    Ok(crossings)
}
