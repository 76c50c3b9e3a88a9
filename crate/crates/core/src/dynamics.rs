//! Charging dynamics: initial state, exact spectral propagation, sampled
//! trajectories and the first-peak charging time.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{excitation_diagonal, partial_trace_unchecked, sector_basis, HilbertGeometry, Sector};
use crate::model::{build_battery_hamiltonian, build_total, build_total_sector};
use crate::observables::{battery_energy, ergotropy_from_levels};
use crate::operator::{CVector, DensityMatrix, HermitianOperator, Space, StateVector, C64};
use crate::params::{CavityCutoff, ModelParams};
use crate::spectral::{battery_spectrum, eigh, BatterySpectrum, EigenSystem, GroundState};

/// Charged energy a coarse-grid peak must exceed; filters roundoff wiggles
/// of an uncharged battery.
pub const PEAK_FLOOR: f64 = 1e-9;

/// Where the propagation is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    /// Only the conserved-excitation block containing the initial state.
    #[default]
    Sector,
    /// The whole truncated composite space.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingOptions {
    /// Coarse scan step.
    pub dt: f64,
    /// Multiplier on the single-spin first-peak estimate that bounds the scan.
    pub safety: f64,
    /// Explicit scan bound; overrides `safety`.
    pub t_max: Option<f64>,
    /// Width of the final bracket around the peak.
    pub refine_tol: f64,
}

impl Default for ChargingOptions {
    fn default() -> Self {
        Self {
            dt: 0.02,
            safety: 4.0,
            t_max: None,
            refine_tol: 1e-12,
        }
    }
}

impl ChargingOptions {
    /// Scan bound: `safety · π / (g √n_c)` unless given explicitly.
    pub fn window(&self, params: &ModelParams) -> f64 {
        if let Some(t) = self.t_max {
            return t;
        }
        let photons = params.n_c.max(1) as f64;
        let base = if params.g != 0.0 {
            PI / (params.g.abs() * photons.sqrt())
        } else {
            PI
        };
        self.safety * base
    }
}

/// `|ψ(0)> = |n_c> ⊗ |g>_B` on the full composite space.
pub fn initial_state(params: &ModelParams, geometry: &HilbertGeometry, ground: &GroundState) -> Result<StateVector> {
    let photons = match params.cavity_cutoff {
        CavityCutoff::Exact => params.n_c + ground.k_g,
        CavityCutoff::Fock => params.n_c,
    };
    if geometry.cavity_dim <= photons {
        return Err(Error::GeometryTooSmall {
            cavity_dim: geometry.cavity_dim,
            photons,
        });
    }
    if geometry.spin_dim != ground.vector.dim() {
        return Err(Error::DimensionMismatch {
            expected: geometry.spin_dim,
            actual: ground.vector.dim(),
        });
    }
    let mut amps = CVector::zeros(geometry.full_dim());
    let offset = geometry.index(params.n_c, 0);
    amps.rows_mut(offset, geometry.spin_dim)
        .copy_from(ground.vector.amplitudes());
    StateVector::new(amps, Space::Composite)
}

/// Exact propagator `V e^{−iΛt} V† ψ0` for a fixed initial state.
#[derive(Debug, Clone)]
pub struct Propagator {
    eigen: EigenSystem,
    coefficients: CVector,
    space: Space,
}

impl Propagator {
    pub fn new(eigen: EigenSystem, psi0: &StateVector) -> Result<Self> {
        if eigen.dim() != psi0.dim() {
            return Err(Error::DimensionMismatch {
                expected: eigen.dim(),
                actual: psi0.dim(),
            });
        }
        let coefficients = eigen.eigenvectors.adjoint() * psi0.amplitudes();
        Ok(Self {
            eigen,
            coefficients,
            space: psi0.space(),
        })
    }

    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eigen
    }

    pub fn state_at(&self, t: f64) -> StateVector {
        let phased = CVector::from_iterator(
            self.coefficients.len(),
            self.coefficients
                .iter()
                .zip(&self.eigen.eigenvalues)
                .map(|(c, &e)| c * C64::from_polar(1.0, -e * t)),
        );
        StateVector::new_unchecked(&self.eigen.eigenvectors * phased, self.space)
    }
}

/// `ψ(t)` from `ψ0` under the Hamiltonian with eigensystem `eigen`.
pub fn evolve(eigen: &EigenSystem, psi0: &StateVector, t: f64) -> Result<StateVector> {
    Ok(Propagator::new(eigen.clone(), psi0)?.state_at(t))
}

/// Observables at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub e_b: f64,
    pub d_e: f64,
    pub ergotropy: f64,
    pub norm_error: f64,
    pub n_exc: f64,
    pub total_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConservationReport {
    pub max_norm_error: f64,
    pub n_exc_drift: f64,
    pub energy_drift: f64,
}

impl ConservationReport {
    pub fn worst(&self) -> f64 {
        self.max_norm_error.max(self.n_exc_drift).max(self.energy_drift)
    }

    pub fn merge(&self, other: &ConservationReport) -> ConservationReport {
        ConservationReport {
            max_norm_error: self.max_norm_error.max(other.max_norm_error),
            n_exc_drift: self.n_exc_drift.max(other.n_exc_drift),
            energy_drift: self.energy_drift.max(other.energy_drift),
        }
    }
}

/// Time-sampled observables of one charging run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: ModelParams,
    pub mode: ExecutionMode,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn conservation(&self) -> ConservationReport {
        let Some(first) = self.samples.first() else {
            return ConservationReport::default();
        };
        self.samples
            .iter()
            .fold(ConservationReport::default(), |acc, s| ConservationReport {
                max_norm_error: acc.max_norm_error.max(s.norm_error),
                n_exc_drift: acc.n_exc_drift.max((s.n_exc - first.n_exc).abs()),
                energy_drift: acc.energy_drift.max((s.total_energy - first.total_energy).abs()),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingResult {
    pub tau_c: f64,
    pub d_e_max: f64,
    pub ergotropy_at_tau: f64,
    pub refinement_iterations: usize,
    /// Conservation diagnostics at `τ_c` relative to `t = 0`.
    pub conservation: ConservationReport,
}

/// One charging setup: battery spectrum, initial state and propagator.
#[derive(Debug, Clone)]
pub struct ChargingSimulation {
    params: ModelParams,
    mode: ExecutionMode,
    geometry: HilbertGeometry,
    h_b: HermitianOperator,
    battery: BatterySpectrum,
    sector: Option<Sector>,
    h_total: HermitianOperator,
    /// Nonzero entries `(row, col, value)` of `I ⊗ H_B` in the working basis.
    h_b_entries: Vec<(usize, usize, f64)>,
    n_exc: Vec<f64>,
    propagator: Propagator,
}

impl ChargingSimulation {
    pub fn new(params: &ModelParams, mode: ExecutionMode) -> Result<Self> {
        params.validate()?;
        let h_b = build_battery_hamiltonian(params);
        let battery = battery_spectrum(&h_b)?;
        let geometry = HilbertGeometry::for_charging(params, battery.ground.k_g)?;
        let psi0 = initial_state(params, &geometry, &battery.ground)?;

        let (sector, h_total, n_exc, start) = match mode {
            ExecutionMode::Sector => {
                let sector = sector_basis(params.n_c + battery.ground.k_g, &geometry);
                let h = build_total_sector(params, &sector);
                let start = sector.project_state(&psi0)?;
                let n_exc = vec![sector.total_excitation() as f64; sector.len()];
                (Some(sector), h, n_exc, start)
            }
            ExecutionMode::Full => {
                let h = build_total(params, &geometry)?;
                (None, h, excitation_diagonal(&geometry), psi0)
            }
        };
        let propagator = Propagator::new(eigh(&h_total)?, &start)?;
        let h_b_entries = working_battery_entries(&h_b, &geometry, sector.as_ref());
        Ok(Self {
            params: *params,
            mode,
            geometry,
            h_b,
            battery,
            sector,
            h_total,
            h_b_entries,
            n_exc,
            propagator,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mode(&self) -> ExecutionMode {
        self.mode
    }

    pub fn geometry(&self) -> &HilbertGeometry {
        &self.geometry
    }

    pub fn battery(&self) -> &BatterySpectrum {
        &self.battery
    }

    pub fn battery_hamiltonian(&self) -> &HermitianOperator {
        &self.h_b
    }

    /// Dimension of the space the propagation runs in.
    pub fn working_dim(&self) -> usize {
        self.h_total.dim()
    }

    /// State in the working basis (sector or full).
    pub fn state_at(&self, t: f64) -> StateVector {
        self.propagator.state_at(t)
    }

    /// State embedded in the full composite basis.
    pub fn composite_state_at(&self, t: f64) -> StateVector {
        let psi = self.state_at(t);
        match &self.sector {
            Some(sector) => sector.embed_state(&psi).expect("sector dimensions agree"),
            None => psi,
        }
    }

    pub fn reduced_state(&self, t: f64) -> DensityMatrix {
        self.reduce(&self.state_at(t))
    }

    fn reduce(&self, psi: &StateVector) -> DensityMatrix {
        match &self.sector {
            Some(sector) => sector.partial_trace_unchecked(psi.amplitudes()),
            None => partial_trace_unchecked(&self.geometry, psi.amplitudes()),
        }
    }

    pub fn charged_energy(&self, t: f64) -> Result<f64> {
        let rho = self.reduced_state(t);
        Ok(battery_energy(&rho, &self.h_b)? - self.battery.e_ground())
    }

    /// Charging power `dΔE/dt = −2 Im⟨H_S ψ | H_B ψ⟩`.
    pub fn power(&self, t: f64) -> f64 {
        let psi = self.state_at(t);
        let amps = psi.amplitudes();
        let h_psi = self.h_total.matrix() * amps;
        let mut b_psi = vec![C64::new(0.0, 0.0); amps.len()];
        for &(r, c, v) in &self.h_b_entries {
            b_psi[r] += amps[c] * v;
        }
        let z: C64 = h_psi.iter().zip(&b_psi).map(|(h, b)| h.conj() * b).sum();
        -2.0 * z.im
    }

    pub fn sample(&self, t: f64) -> Result<Sample> {
        let psi = self.state_at(t);
        let rho = self.reduce(&psi);
        let e_b = battery_energy(&rho, &self.h_b)?;
        let ergotropy = ergotropy_from_levels(&rho, e_b, &self.battery.levels)?;
        let amps = psi.amplitudes();
        let n_exc = amps.iter().zip(&self.n_exc).map(|(a, n)| a.norm_sqr() * n).sum();
        Ok(Sample {
            t,
            e_b,
            d_e: e_b - self.battery.e_ground(),
            ergotropy,
            norm_error: psi.norm_error(),
            n_exc,
            total_energy: self.h_total.expectation(&psi)?,
        })
    }

    /// Samples at `t = 0, dt, 2dt, …` up to `t_max`.
    pub fn trajectory(&self, t_max: f64, dt: f64) -> Result<Trajectory> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "time step must be positive".into(),
            });
        }
        if t_max.is_nan() || t_max < dt {
            return Err(Error::InvalidParameter {
                name: "t-max",
                reason: format!("t_max {t_max} must be at least dt {dt}"),
            });
        }
        let steps = (t_max / dt + 1e-9).floor() as usize;
        let samples = (0..=steps)
            .into_par_iter()
            .map(|k| self.sample(k as f64 * dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            params: self.params,
            mode: self.mode,
            samples,
        })
    }

    /// Scans `ΔE(t)` for its first strict local maximum, then locates the
    /// zero of the charging power inside the coarse bracket by bisection.
    /// Falls back to golden-section search on `ΔE` when the power has no
    /// clean sign change there.
    pub fn find_charging_time(&self, options: &ChargingOptions) -> Result<ChargingResult> {
        let dt = options.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "time step must be positive".into(),
            });
        }
        if options.refine_tol.is_nan() || options.refine_tol <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "refine-tol",
                reason: "refinement tolerance must be positive".into(),
            });
        }
        let t_max = options.window(&self.params);
        let f = |t: f64| self.charged_energy(t);

        let mut prev = f(0.0)?;
        let mut cur = f(dt)?;
        let mut k = 1usize;
        loop {
            let t_next = (k + 1) as f64 * dt;
            if t_next > t_max + 1e-12 {
                return Err(Error::NoPeakFound { t_max });
            }
            let next = f(t_next)?;
            if cur > prev && cur >= next && cur > PEAK_FLOOR {
                break;
            }
            prev = cur;
            cur = next;
            k += 1;
        }

        let (lo, mid, hi) = ((k - 1) as f64 * dt, k as f64 * dt, (k + 1) as f64 * dt);
        let p_mid = self.power(mid);
        let (a, b) = if p_mid > 0.0 { (mid, hi) } else { (lo, mid) };
        let (tau_c, refinement_iterations) = if p_mid == 0.0 {
            (mid, 0)
        } else if self.power(a) > 0.0 && self.power(b) < 0.0 {
            bisect_sign_change(|t| self.power(t), a, b, options.refine_tol)
        } else {
            let (t, it) = golden_section_max(&f, lo, hi, options.refine_tol.max(1e-9))?;
            (if f(t)? >= cur { t } else { mid }, it)
        };

        let start = self.sample(0.0)?;
        let at_tau = self.sample(tau_c)?;
        Ok(ChargingResult {
            tau_c,
            d_e_max: at_tau.d_e,
            ergotropy_at_tau: at_tau.ergotropy,
            refinement_iterations,
            conservation: ConservationReport {
                max_norm_error: at_tau.norm_error.max(start.norm_error),
                n_exc_drift: (at_tau.n_exc - start.n_exc).abs(),
                energy_drift: (at_tau.total_energy - start.total_energy).abs(),
            },
        })
    }
}

/// Maximizes `f` on `[a, b]`; returns the midpoint of the final bracket and
/// the number of iterations.
fn golden_section_max<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, usize)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iterations = 0;
    while b - a > tol {
        iterations += 1;
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok((0.5 * (a + b), iterations))
}

/// Root of `g` in `[a, b]` given `g(a) > 0 > g(b)`.
fn bisect_sign_change<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, tol: f64) -> (f64, usize) {
    let mut iterations = 0;
    while b - a > tol && iterations < 200 {
        iterations += 1;
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b), iterations)
}

fn working_battery_entries(
    h_b: &HermitianOperator,
    geometry: &HilbertGeometry,
    sector: Option<&Sector>,
) -> Vec<(usize, usize, f64)> {
    let m = h_b.matrix();
    let rows: Vec<Vec<(usize, f64)>> = (0..m.nrows())
        .map(|s| {
            (0..m.ncols())
                .map(|s2| (s2, m[(s, s2)].re))
                .filter(|e| e.1 != 0.0)
                .collect()
        })
        .collect();
    let mut entries = Vec::new();
    match sector {
        Some(sector) => {
            for (row, &idx) in sector.indices().iter().enumerate() {
                let (photons, s) = geometry.split(idx);
                for &(s2, v) in &rows[s] {
                    if let Some(col) = sector.position(geometry.index(photons, s2)) {
                        entries.push((row, col, v));
                    }
                }
            }
        }
        None => {
            for photons in 0..geometry.cavity_dim {
                for (s, row) in rows.iter().enumerate() {
                    for &(s2, v) in row {
                        entries.push((geometry.index(photons, s), geometry.index(photons, s2), v));
                    }
                }
            }
        }
    }
    entries
}

/// Samples a charging run of `params` every `dt` up to `t_max`.
pub fn trajectory(params: &ModelParams, t_max: f64, dt: f64, mode: ExecutionMode) -> Result<Trajectory> {
    ChargingSimulation::new(params, mode)?.trajectory(t_max, dt)
}

pub fn find_charging_time(
    params: &ModelParams,
    mode: ExecutionMode,
    options: &ChargingOptions,
) -> Result<ChargingResult> {
    ChargingSimulation::new(params, mode)?.find_charging_time(options)
}
