//! Parameter grids of charging runs and ground-state analyses.
//!
//! Every grid point is an independent job. Results come back in grid order
//! whatever the worker count, and a point evaluated inside a 2-D heatmap is
//! bit-identical to the same point in a 1-D sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ChargingOptions, ChargingSimulation, ConservationReport, ExecutionMode};
use crate::error::{Error, Result};
use crate::model::{bond_pattern, build_battery_hamiltonian};
use crate::observables::{capacities, occupations, ordering_params, Capacities, OrderingParams, SpinConvention};
use crate::params::{default_photons, ModelParams};
use crate::spectral::battery_spectrum;

/// Hopping preset of the weak-hopping regime.
pub const DEGENERATE_J: f64 = 0.3;
/// Hopping preset of the strong-hopping regime.
pub const NONDEGENERATE_J: f64 = 2.5;

/// Inclusive arithmetic grid `lo, lo + step, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if hi < lo {
            return Err(Error::InvalidGrid(format!("upper bound {hi} below lower bound {lo}")));
        }
        if step <= 0.0 && hi > lo {
            return Err(Error::InvalidGrid(format!("step {step} must be positive")));
        }
        Ok(Self { lo, hi, step })
    }

    /// A single point.
    pub fn point(x: f64) -> Self {
        Self {
            lo: x,
            hi: x,
            step: 1.0,
        }
    }

    /// Parses `LO:HI:STEP`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidGrid(format!("expected LO:HI:STEP, got `{text}`")));
        }
        let mut nums = [0.0; 3];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|_| Error::InvalidGrid(format!("`{part}` is not a number")))?;
        }
        Self::new(nums[0], nums[1], nums[2])
    }

    pub fn len(&self) -> usize {
        if self.hi == self.lo {
            return 1;
        }
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid values snapped to 1e-12 so that symmetric grids contain exact
    /// negatives of each other.
    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let x = self.lo + i as f64 * self.step;
                let snapped = (x * 1e12).round() / 1e12;
                if snapped == 0.0 {
                    0.0
                } else {
                    snapped
                }
            })
            .collect()
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepOptions {
    pub mode: ExecutionMode,
    pub charging: ChargingOptions,
    pub convention: SpinConvention,
}

/// Derived quantities of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    pub n_c: usize,
    pub j: f64,
    pub delta: f64,
    pub k_g: usize,
    pub e_ground: f64,
    pub e_max: f64,
    pub tau_c: f64,
    pub d_e_max: f64,
    pub ergotropy: f64,
    pub r_eb: f64,
    pub r_epb: f64,
    pub m_z: f64,
    pub xi_z: f64,
    /// Site occupations at `τ_c`, sites `1..=N`.
    pub occupations: Vec<f64>,
    pub degenerate_ground: bool,
    pub conservation: ConservationReport,
}

impl SweepRecord {
    pub fn capacities(&self) -> Capacities {
        Capacities {
            r_eb: self.r_eb,
            r_epb: self.r_epb,
        }
    }

    pub fn ordering(&self) -> OrderingParams {
        OrderingParams {
            m_z: self.m_z,
            xi_z: self.xi_z,
        }
    }
}

/// Full charging analysis at one parameter point.
pub fn evaluate_point(params: &ModelParams, options: &SweepOptions) -> Result<SweepRecord> {
    let sim = ChargingSimulation::new(params, options.mode)?;
    let charge = sim.find_charging_time(&options.charging)?;
    let battery = sim.battery();
    let caps = capacities(
        charge.d_e_max,
        charge.ergotropy_at_tau,
        battery.e_max(),
        battery.e_ground(),
    )?;
    let order = ordering_params(&battery.ground, params.n, options.convention);
    Ok(SweepRecord {
        n: params.n,
        n_c: params.n_c,
        j: params.j,
        delta: params.delta,
        k_g: battery.ground.k_g,
        e_ground: battery.e_ground(),
        e_max: battery.e_max(),
        tau_c: charge.tau_c,
        d_e_max: charge.d_e_max,
        ergotropy: charge.ergotropy_at_tau,
        r_eb: caps.r_eb,
        r_epb: caps.r_epb,
        m_z: order.m_z,
        xi_z: order.xi_z,
        occupations: occupations(&sim.reduced_state(charge.tau_c)),
        degenerate_ground: battery.ground.is_degenerate(),
        conservation: charge.conservation,
    })
}

fn evaluate_all(points: Vec<ModelParams>, options: &SweepOptions) -> Result<Vec<SweepRecord>> {
    points.par_iter().map(|p| evaluate_point(p, options)).collect()
}

/// One record per hopping value at fixed `δ`.
pub fn sweep_hopping(params: &ModelParams, j_grid: &[f64], options: &SweepOptions) -> Result<Vec<SweepRecord>> {
    non_empty(j_grid, "J")?;
    evaluate_all(j_grid.iter().map(|&j| params.with_hopping(j)).collect(), options)
}

/// One record per dimerization value at fixed `J`.
pub fn sweep_delta(params: &ModelParams, delta_grid: &[f64], options: &SweepOptions) -> Result<Vec<SweepRecord>> {
    non_empty(delta_grid, "delta")?;
    evaluate_all(delta_grid.iter().map(|&d| params.with_delta(d)).collect(), options)
}

/// Records over the `J × δ` cross product, `J` major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub j_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub records: Vec<SweepRecord>,
}

impl Heatmap {
    pub fn get(&self, j_index: usize, delta_index: usize) -> &SweepRecord {
        &self.records[j_index * self.delta_values.len() + delta_index]
    }

    /// Records at fixed `J`, in `δ` order.
    pub fn row(&self, j_index: usize) -> &[SweepRecord] {
        let w = self.delta_values.len();
        &self.records[j_index * w..(j_index + 1) * w]
    }

    /// Records at fixed `δ`, in `J` order.
    pub fn column(&self, delta_index: usize) -> Vec<&SweepRecord> {
        (0..self.j_values.len()).map(|j| self.get(j, delta_index)).collect()
    }
}

pub fn heatmap_j_delta(
    params: &ModelParams,
    j_grid: &[f64],
    delta_grid: &[f64],
    options: &SweepOptions,
) -> Result<Heatmap> {
    non_empty(j_grid, "J")?;
    non_empty(delta_grid, "delta")?;
    let points = j_grid
        .iter()
        .flat_map(|&j| delta_grid.iter().map(move |&d| params.with_hopping(j).with_delta(d)))
        .collect();
    Ok(Heatmap {
        j_values: j_grid.to_vec(),
        delta_values: delta_grid.to_vec(),
        records: evaluate_all(points, options)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationProfile {
    pub delta: f64,
    pub occupations: Vec<f64>,
}

/// Site occupations at `τ_c` for each `δ`.
pub fn occupation_profile(
    params: &ModelParams,
    delta_grid: &[f64],
    options: &SweepOptions,
) -> Result<Vec<OccupationProfile>> {
    Ok(sweep_delta(params, delta_grid, options)?
        .into_iter()
        .map(|r| OccupationProfile {
            delta: r.delta,
            occupations: r.occupations,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    pub delta: f64,
    pub capacities: Capacities,
}

pub fn capacity_sweep(params: &ModelParams, delta_grid: &[f64], options: &SweepOptions) -> Result<Vec<CapacityPoint>> {
    Ok(sweep_delta(params, delta_grid, options)?
        .iter()
        .map(|r| CapacityPoint {
            delta: r.delta,
            capacities: r.capacities(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderPoint {
    pub j: f64,
    pub k_g: usize,
    pub ordering: OrderingParams,
}

/// Ground-state ordering parameters along a `J` grid (no dynamics).
pub fn order_param_sweep(params: &ModelParams, j_grid: &[f64], convention: SpinConvention) -> Result<Vec<OrderPoint>> {
    non_empty(j_grid, "J")?;
    j_grid
        .par_iter()
        .map(|&j| {
            let p = params.with_hopping(j);
            let ground = battery_spectrum(&build_battery_hamiltonian(&p))?.ground;
            Ok(OrderPoint {
                j,
                k_g: ground.k_g,
                ordering: ordering_params(&ground, p.n, convention),
            })
        })
        .collect()
}

/// How the photon number follows the chain length in a scaling study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhotonRule {
    /// `n_c = 2N + 1`
    Scaled,
    Fixed(usize),
}

impl PhotonRule {
    pub fn photons(self, n: usize) -> usize {
        match self {
            PhotonRule::Scaled => default_photons(n),
            PhotonRule::Fixed(n_c) => n_c,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PhotonRule::Scaled => "scaled",
            PhotonRule::Fixed(_) => "fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub n: usize,
    pub n_c: usize,
    pub tau_c: f64,
    pub d_e_max: f64,
    pub conservation: ConservationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauScaling {
    pub rule: PhotonRule,
    pub points: Vec<TauPoint>,
    /// Least-squares slope of `ln τ_c` against `ln N`.
    pub slope: f64,
}

/// Largest chain accepted by [`tau_scaling`].
pub const TAU_SCALING_MAX_N: usize = 6;

/// Charging time for each chain length in `n_list`.
pub fn tau_scaling(
    base: &ModelParams,
    n_list: &[usize],
    rule: PhotonRule,
    options: &SweepOptions,
) -> Result<TauScaling> {
    if n_list.is_empty() {
        return Err(Error::InvalidGrid("empty N list".into()));
    }
    if let Some(&bad) = n_list.iter().find(|&&n| !(1..=TAU_SCALING_MAX_N).contains(&n)) {
        return Err(Error::InvalidGrid(format!("N = {bad} outside 1..={TAU_SCALING_MAX_N}")));
    }
    let points = n_list
        .par_iter()
        .map(|&n| {
            let p = ModelParams {
                n,
                n_c: rule.photons(n),
                ..*base
            };
            let sim = ChargingSimulation::new(&p, options.mode)?;
            let r = sim.find_charging_time(&options.charging)?;
            Ok(TauPoint {
                n,
                n_c: p.n_c,
                tau_c: r.tau_c,
                d_e_max: r.d_e_max,
                conservation: r.conservation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.tau_c.ln()).collect();
    Ok(TauScaling {
        rule,
        slope: least_squares_slope(&xs, &ys),
        points,
    })
}

/// Ordinary least-squares slope; NaN with fewer than two distinct x.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Sites joined by the strongest bond(s) of the chain: the dimerization
/// pairs. Empty when all bonds are equal.
pub fn dimer_sites(params: &ModelParams) -> Vec<usize> {
    let bonds = bond_pattern(params.n, params.j, params.delta, params.bond_rule);
    let strongest = bonds.iter().map(|b| b.strength.abs()).fold(0.0, f64::max);
    if bonds.iter().all(|b| b.strength.abs() == strongest) {
        return Vec::new();
    }
    let mut sites: Vec<usize> = bonds
        .iter()
        .filter(|b| b.strength.abs() == strongest)
        .flat_map(|b| [b.site, b.site + 1])
        .collect();
    sites.sort_unstable();
    sites.dedup();
    sites
}

fn non_empty(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid(format!("empty {name} grid")));
    }
    Ok(())
}
