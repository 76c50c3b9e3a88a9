//! Command-line front end.
//!
//! A run resolves flags and an optional flat TOML file into a [`RunConfig`],
//! computes one table, and writes `<command>.csv` plus `manifest.json` into
//! the output directory. CSV files start with a single `#` metadata line and
//! print floats with 12 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{ChargingOptions, ChargingSimulation, ConservationReport, ExecutionMode};
use crate::error::{Error, Result};
use crate::observables::SpinConvention;
use crate::params::{default_photons, BondRule, CavityCutoff, ModelParams};
use crate::spectral::{detect_ground_crossings, spectrum_vs_j};
use crate::sweeps::{
    heatmap_j_delta, order_param_sweep, sweep_delta, sweep_hopping, tau_scaling, Grid, PhotonRule, SweepOptions,
    SweepRecord, TAU_SCALING_MAX_N,
};

/// Conservation diagnostics above this fail the run.
pub const CONSERVATION_TOL: f64 = 1e-8;
/// Largest column difference tolerated between execution modes.
pub const MODE_AGREEMENT_TOL: f64 = 1e-9;

pub const DEFAULT_GRID_J: Grid = Grid {
    lo: 0.0,
    hi: 3.0,
    step: 0.02,
};
pub const DEFAULT_GRID_J_HEATMAP: Grid = Grid {
    lo: 0.0,
    hi: 3.0,
    step: 0.05,
};
pub const DEFAULT_GRID_DELTA: Grid = Grid {
    lo: -1.0,
    hi: 1.0,
    step: 0.05,
};
pub const DEFAULT_LEVEL_CAP: usize = 32;

#[derive(Debug, Parser)]
#[command(
    name = "sshqb",
    version,
    about = "SSH spin-chain quantum battery charged by a cavity mode"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// ΔE(t), ergotropy and conservation diagnostics on a time grid
    Dynamics,
    /// Charging maxima along a J grid
    SweepJ,
    /// Lowest battery levels along a J grid
    Spectrum,
    /// Ground-state M_z and ξ_z along a J grid
    OrderParams,
    /// Charging maxima along a δ grid
    SweepDelta,
    /// Charging maxima over the J × δ grid
    Heatmap,
    /// Site occupations at τ_c along a δ grid
    Occupations,
    /// Capacities along a δ grid
    Capacity,
    /// τ_c against chain length
    TauScaling,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Dynamics => "dynamics",
            Command::SweepJ => "sweep-j",
            Command::Spectrum => "spectrum",
            Command::OrderParams => "order-params",
            Command::SweepDelta => "sweep-delta",
            Command::Heatmap => "heatmap",
            Command::Occupations => "occupations",
            Command::Capacity => "capacity",
            Command::TauScaling => "tau-scaling",
        }
    }

    fn uses_dynamics(self) -> bool {
        !matches!(self, Command::Spectrum | Command::OrderParams)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    #[default]
    Sector,
    Full,
    Both,
}

impl ModeSelection {
    fn primary(self) -> ExecutionMode {
        match self {
            ModeSelection::Full => ExecutionMode::Full,
            _ => ExecutionMode::Sector,
        }
    }
}

/// Every setting accepted on the command line or in the config file.
/// Flags win over file values.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Overrides {
    /// Flat TOML file with the same keys as the long flags
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long = "N", global = true)]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long = "J", global = true)]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub nc: Option<usize>,
    #[arg(long, global = true)]
    pub g: Option<f64>,
    #[arg(long, global = true)]
    pub omega_a: Option<f64>,
    #[arg(long, global = true)]
    pub omega_c: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeSelection>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// LO:HI:STEP
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid_j: Option<String>,
    /// LO:HI:STEP
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid_delta: Option<String>,
    /// Spectrum levels per J value
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    /// Chain lengths for tau-scaling, comma separated
    #[arg(long, global = true)]
    pub n_list: Option<String>,
    /// Photon number of the fixed-n_c tau-scaling series
    #[arg(long, global = true)]
    pub fixed_nc: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub bond_rule: Option<BondRuleArg>,
    #[arg(long, global = true, value_enum)]
    pub cavity_cutoff: Option<CutoffArg>,
    #[arg(long, global = true, value_enum)]
    pub convention: Option<ConventionArg>,
    /// Scan window multiplier for the charging-time search
    #[arg(long, global = true)]
    pub safety: Option<f64>,
    #[arg(long, global = true)]
    pub refine_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BondRuleArg {
    Corrected,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffArg {
    Exact,
    Fock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    Pauli,
    SpinHalf,
}

impl Overrides {
    /// Field-wise merge; `self` wins.
    fn over(self, base: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: self.$f.or(base.$f),)* } };
        }
        pick!(
            config,
            n,
            j,
            delta,
            nc,
            g,
            omega_a,
            omega_c,
            dt,
            t_max,
            mode,
            out,
            grid_j,
            grid_delta,
            levels,
            n_list,
            fixed_nc,
            bond_rule,
            cavity_cutoff,
            convention,
            safety,
            refine_tol
        )
    }
}

/// Fully resolved and validated run settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub params: ModelParams,
    pub mode: ModeSelection,
    pub grid_j: Grid,
    pub grid_delta: Grid,
    pub charging: ChargingOptions,
    pub convention: SpinConvention,
    pub levels: usize,
    pub n_list: Vec<usize>,
    pub fixed_nc: usize,
    /// Time grid step of the dynamics table.
    pub dt: f64,
    pub t_max: f64,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    /// Reads the config file (if any), applies flags over it and fills in
    /// defaults.
    pub fn resolve(command: Command, flags: Overrides) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => parse_config_file(path)?,
            None => Overrides::default(),
        };
        Self::from_overrides(command, flags.over(file))
    }

    pub fn from_overrides(command: Command, o: Overrides) -> Result<Self> {
        let n = o.n.unwrap_or(5);
        if n < 1 {
            return Err(Error::InvalidParameter {
                name: "N",
                reason: "chain needs at least one site".into(),
            });
        }
        let mut params = ModelParams::new(n);
        params.j = o.j.unwrap_or(params.j);
        params.delta = o.delta.unwrap_or(params.delta);
        params.g = o.g.unwrap_or(params.g);
        params.omega_a = o.omega_a.unwrap_or(params.omega_a);
        params.omega_c = o.omega_c.unwrap_or(params.omega_c);
        params.n_c = o.nc.unwrap_or(params.n_c);
        params.bond_rule = match o.bond_rule {
            Some(BondRuleArg::AsPrinted) => BondRule::AsPrinted,
            _ => BondRule::Corrected,
        };
        params.cavity_cutoff = match o.cavity_cutoff {
            Some(CutoffArg::Fock) => CavityCutoff::Fock,
            _ => CavityCutoff::Exact,
        };
        params.validate()?;

        let parse_grid = |text: &Option<String>, default: Grid| text.as_deref().map_or(Ok(default), Grid::parse);
        let grid_j = parse_grid(
            &o.grid_j,
            if command == Command::Heatmap {
                DEFAULT_GRID_J_HEATMAP
            } else {
                DEFAULT_GRID_J
            },
        )?;
        let grid_delta = parse_grid(&o.grid_delta, DEFAULT_GRID_DELTA)?;
        if grid_delta.lo < -1.0 || grid_delta.hi > 1.0 {
            return Err(Error::InvalidGrid(format!("δ grid {grid_delta} leaves [-1, 1]")));
        }

        let defaults = ChargingOptions::default();
        let charging = ChargingOptions {
            dt: o.dt.unwrap_or(defaults.dt),
            safety: o.safety.unwrap_or(defaults.safety),
            t_max: o.t_max,
            refine_tol: o.refine_tol.unwrap_or(defaults.refine_tol),
        };
        positive("dt", charging.dt)?;
        positive("safety", charging.safety)?;
        positive("refine-tol", charging.refine_tol)?;
        if let Some(t) = charging.t_max {
            positive("t-max", t)?;
        }

        let n_list = match &o.n_list {
            Some(text) => parse_n_list(text)?,
            None => (1..=TAU_SCALING_MAX_N).collect(),
        };
        let levels = o.levels.unwrap_or((1usize << n).min(DEFAULT_LEVEL_CAP));
        if levels < 1 || levels > 1usize << n {
            return Err(Error::InvalidParameter {
                name: "levels",
                reason: format!("must lie in 1..={}", 1usize << n),
            });
        }
        Ok(Self {
            command,
            dt: charging.dt,
            t_max: charging.window(&params),
            params,
            mode: o.mode.unwrap_or_default(),
            grid_j,
            grid_delta,
            charging,
            convention: match o.convention {
                Some(ConventionArg::SpinHalf) => SpinConvention::SpinHalf,
                _ => SpinConvention::Pauli,
            },
            levels,
            fixed_nc: o.fixed_nc.or(o.nc).unwrap_or(default_photons(TAU_SCALING_MAX_N)),
            n_list,
            out: o.out.unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    fn sweep_options(&self, mode: ExecutionMode) -> SweepOptions {
        SweepOptions {
            mode,
            charging: self.charging,
            convention: self.convention,
        }
    }

    /// SHA-256 of the resolved configuration without the output directory.
    pub fn params_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{x} must be positive and finite"),
        })
    }
}

fn parse_n_list(text: &str) -> Result<Vec<usize>> {
    let list = text
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("`{part}` in n-list is not a chain length")))
        })
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() {
        return Err(Error::Config("empty n-list".into()));
    }
    Ok(list)
}

/// Parses a flat TOML config. Unknown keys are rejected.
pub fn parse_config_file(path: &Path) -> Result<Overrides> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<Overrides> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_sig12(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Formats with 12 significant digits, fixed notation for moderate
/// exponents and scientific otherwise.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{:.*}", (11 - exp) as usize, x);
        trim_zeros(&fixed)
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self, metadata: &str) -> String {
        let mut out = format!("# {metadata}\n{}\n", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Largest absolute difference between matching float cells.
    fn max_difference(&self, other: &Table) -> f64 {
        if self.rows.len() != other.rows.len() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            for (x, y) in a.iter().zip(b) {
                match (x, y) {
                    (Cell::Float(x), Cell::Float(y)) => worst = worst.max((x - y).abs()),
                    (x, y) if x != y => return f64::INFINITY,
                    _ => {}
                }
            }
        }
        worst
    }
}

pub const DYNAMICS_HEADER: &[&str] = &["t", "E_B", "dE", "ergotropy", "norm_err", "n_exc"];
pub const SWEEP_J_HEADER: &[&str] = &[
    "J",
    "k_g",
    "E_G",
    "E_max",
    "tau_c",
    "dE_max",
    "ergotropy",
    "R_Eb",
    "R_Epb",
];
pub const SWEEP_DELTA_HEADER: &[&str] = &[
    "delta",
    "k_g",
    "E_G",
    "E_max",
    "tau_c",
    "dE_max",
    "ergotropy",
    "R_Eb",
    "R_Epb",
];
pub const ORDER_HEADER: &[&str] = &["J", "k_g", "M_z", "xi_z"];
pub const HEATMAP_HEADER: &[&str] = &["J", "delta", "k_g", "tau_c", "dE_max", "ergotropy"];
pub const OCCUPATION_HEADER: &[&str] = &["delta", "site", "occupation"];
pub const CAPACITY_HEADER: &[&str] = &["delta", "R_Eb", "R_Epb", "dE_max", "ergotropy", "E_max", "E_G"];
pub const TAU_HEADER: &[&str] = &["rule", "N", "n_c", "tau_c", "dE_max", "slope"];
/// Spectrum columns are `J, k_g, level_0, …, level_{L-1}`.
pub const SPECTRUM_PREFIX: &[&str] = &["J", "k_g"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeComparison {
    pub max_abs_difference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Machine-readable record of one run; written exactly once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub params_hash: String,
    pub config: Option<RunConfig>,
    pub stages: Vec<StageTiming>,
    pub conservation: ConservationReport,
    pub conservation_tolerance: f64,
    pub mode_comparison: Option<ModeComparison>,
    pub warnings: Vec<String>,
    pub extra: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    pub status: String,
    pub error: Option<String>,
}

impl RunManifest {
    fn new(config: &RunConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            command: config.command.name().into(),
            params_hash: config.params_hash(),
            config: Some(config.clone()),
            stages: Vec::new(),
            conservation: ConservationReport::default(),
            conservation_tolerance: CONSERVATION_TOL,
            mode_comparison: None,
            warnings: Vec::new(),
            extra: BTreeMap::new(),
            outputs: Vec::new(),
            status: "ok".into(),
            error: None,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

/// Table plus the diagnostics gathered while computing it.
#[derive(Debug, Clone, Default)]
pub struct Computed {
    pub table: Table,
    pub conservation: ConservationReport,
    pub warnings: Vec<String>,
    pub extra: BTreeMap<String, f64>,
}

/// Computes the table of `config.command` in one execution mode.
pub fn compute(config: &RunConfig, mode: ExecutionMode) -> Result<Computed> {
    let p = &config.params;
    let opts = config.sweep_options(mode);
    let mut out = Computed::default();
    match config.command {
        Command::Dynamics => {
            let sim = ChargingSimulation::new(p, mode)?;
            if sim.battery().ground.is_degenerate() {
                out.warnings.push(format!(
                    "degenerate battery ground state (gap {:.3e})",
                    sim.battery().ground.degeneracy_gap
                ));
            }
            let traj = sim.trajectory(config.t_max, config.dt)?;
            out.conservation = traj.conservation();
            let mut table = Table::new(DYNAMICS_HEADER);
            for s in &traj.samples {
                table.rows.push(vec![
                    Cell::Float(s.t),
                    Cell::Float(s.e_b),
                    Cell::Float(s.d_e),
                    Cell::Float(s.ergotropy),
                    Cell::Float(s.norm_error),
                    Cell::Float(s.n_exc),
                ]);
            }
            match sim.find_charging_time(&config.charging) {
                Ok(r) => {
                    out.extra.insert("tau_c".into(), r.tau_c);
                    out.extra.insert("dE_max".into(), r.d_e_max);
                    out.extra.insert("ergotropy_at_tau".into(), r.ergotropy_at_tau);
                    out.conservation = out.conservation.merge(&r.conservation);
                }
                Err(e) => out.warnings.push(format!("charging time unavailable: {e}")),
            }
            out.table = table;
        }
        Command::SweepJ | Command::SweepDelta => {
            let (records, header, coordinate): (_, _, fn(&SweepRecord) -> f64) = if config.command == Command::SweepJ {
                (sweep_hopping(p, &config.grid_j.values(), &opts)?, SWEEP_J_HEADER, |r| {
                    r.j
                })
            } else {
                (
                    sweep_delta(p, &config.grid_delta.values(), &opts)?,
                    SWEEP_DELTA_HEADER,
                    |r| r.delta,
                )
            };
            absorb(&mut out, &records);
            let mut table = Table::new(header);
            for r in &records {
                table.rows.push(vec![
                    Cell::Float(coordinate(r)),
                    Cell::Int(r.k_g as i64),
                    Cell::Float(r.e_ground),
                    Cell::Float(r.e_max),
                    Cell::Float(r.tau_c),
                    Cell::Float(r.d_e_max),
                    Cell::Float(r.ergotropy),
                    Cell::Float(r.r_eb),
                    Cell::Float(r.r_epb),
                ]);
            }
            out.table = table;
        }
        Command::Spectrum => {
            let spectrum = spectrum_vs_j(p, &config.grid_j.values(), config.levels)?;
            let mut table = Table::new(SPECTRUM_PREFIX);
            table.header.extend((0..config.levels).map(|i| format!("level_{i}")));
            for row in &spectrum.rows {
                let mut cells = vec![Cell::Float(row.j), Cell::Int(row.k_g as i64)];
                cells.extend(row.levels.iter().map(|&e| Cell::Float(e)));
                table.rows.push(cells);
            }
            match detect_ground_crossings(&spectrum) {
                Ok(crossings) => {
                    for (i, c) in crossings.iter().enumerate() {
                        out.extra.insert(format!("crossing_{i}_J"), c.j);
                    }
                }
                Err(e) => out.warnings.push(format!("crossing detection: {e}")),
            }
            out.table = table;
        }
        Command::OrderParams => {
            let points = order_param_sweep(p, &config.grid_j.values(), config.convention)?;
            let mut table = Table::new(ORDER_HEADER);
            for pt in &points {
                table.rows.push(vec![
                    Cell::Float(pt.j),
                    Cell::Int(pt.k_g as i64),
                    Cell::Float(pt.ordering.m_z),
                    Cell::Float(pt.ordering.xi_z),
                ]);
            }
            out.table = table;
        }
        Command::Heatmap => {
            let map = heatmap_j_delta(p, &config.grid_j.values(), &config.grid_delta.values(), &opts)?;
            absorb(&mut out, &map.records);
            let mut table = Table::new(HEATMAP_HEADER);
            for r in &map.records {
                table.rows.push(vec![
                    Cell::Float(r.j),
                    Cell::Float(r.delta),
                    Cell::Int(r.k_g as i64),
                    Cell::Float(r.tau_c),
                    Cell::Float(r.d_e_max),
                    Cell::Float(r.ergotropy),
                ]);
            }
            out.table = table;
        }
        Command::Occupations => {
            let records = sweep_delta(p, &config.grid_delta.values(), &opts)?;
            absorb(&mut out, &records);
            let mut table = Table::new(OCCUPATION_HEADER);
            for r in &records {
                for (i, &occ) in r.occupations.iter().enumerate() {
                    table
                        .rows
                        .push(vec![Cell::Float(r.delta), Cell::Int(i as i64 + 1), Cell::Float(occ)]);
                }
            }
            out.table = table;
        }
        Command::Capacity => {
            let records = sweep_delta(p, &config.grid_delta.values(), &opts)?;
            absorb(&mut out, &records);
            let mut table = Table::new(CAPACITY_HEADER);
            for r in &records {
                table.rows.push(vec![
                    Cell::Float(r.delta),
                    Cell::Float(r.r_eb),
                    Cell::Float(r.r_epb),
                    Cell::Float(r.d_e_max),
                    Cell::Float(r.ergotropy),
                    Cell::Float(r.e_max),
                    Cell::Float(r.e_ground),
                ]);
            }
            out.table = table;
        }
        Command::TauScaling => {
            let mut table = Table::new(TAU_HEADER);
            for rule in [PhotonRule::Scaled, PhotonRule::Fixed(config.fixed_nc)] {
                let fit = tau_scaling(p, &config.n_list, rule, &opts)?;
                out.extra.insert(format!("slope_{}", rule.label()), fit.slope);
                for pt in &fit.points {
                    out.conservation = out.conservation.merge(&pt.conservation);
                    table.rows.push(vec![
                        Cell::Text(rule.label().into()),
                        Cell::Int(pt.n as i64),
                        Cell::Int(pt.n_c as i64),
                        Cell::Float(pt.tau_c),
                        Cell::Float(pt.d_e_max),
                        Cell::Float(fit.slope),
                    ]);
                }
            }
            out.table = table;
        }
    }
    Ok(out)
}

fn absorb(out: &mut Computed, records: &[SweepRecord]) {
    for r in records {
        out.conservation = out.conservation.merge(&r.conservation);
    }
    let degenerate: Vec<String> = records
        .iter()
        .filter(|r| r.degenerate_ground)
        .map(|r| format!("(J={}, delta={})", r.j, r.delta))
        .collect();
    if !degenerate.is_empty() {
        let shown = degenerate.iter().take(5).cloned().collect::<Vec<_>>().join(", ");
        let more = if degenerate.len() > 5 {
            format!(" and {} more", degenerate.len() - 5)
        } else {
            String::new()
        };
        out.warnings.push(format!(
            "degenerate battery ground state at {} point(s): {shown}{more}",
            degenerate.len()
        ));
    }
}

/// Runs `config`, writes the CSV and the manifest, and returns the
/// manifest. Computation failures are recorded in the manifest rather than
/// returned; only I/O failures produce `Err`.
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    let mut manifest = RunManifest::new(config);
    fs::create_dir_all(&config.out)?;
    let csv_name = format!("{}.csv", config.command.name());

    let result = execute(config, &mut manifest);
    match result {
        Ok(table) => {
            let started = Instant::now();
            let metadata = format!(
                "sshqb {} command={} params_sha256={}",
                env!("CARGO_PKG_VERSION"),
                config.command.name(),
                manifest.params_hash
            );
            fs::write(config.out.join(&csv_name), table.to_csv(&metadata))?;
            manifest.outputs.push(csv_name);
            manifest.stages.push(StageTiming {
                stage: "write".into(),
                seconds: started.elapsed().as_secs_f64(),
            });
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
        }
    }
    write_manifest(&config.out, &manifest)?;
    Ok(manifest)
}

fn execute(config: &RunConfig, manifest: &mut RunManifest) -> Result<Table> {
    let modes: Vec<ExecutionMode> = match (config.mode, config.command.uses_dynamics()) {
        (ModeSelection::Both, true) => vec![ExecutionMode::Sector, ExecutionMode::Full],
        (selection, _) => vec![selection.primary()],
    };
    if config.mode == ModeSelection::Both && !config.command.uses_dynamics() {
        manifest.warnings.push(format!(
            "{} has no execution-mode dependence; computed once",
            config.command.name()
        ));
    }
    let mut results = Vec::new();
    for mode in modes {
        let started = Instant::now();
        let computed = compute(config, mode)?;
        manifest.stages.push(StageTiming {
            stage: format!(
                "compute:{}",
                if mode == ExecutionMode::Full { "full" } else { "sector" }
            ),
            seconds: started.elapsed().as_secs_f64(),
        });
        results.push(computed);
    }
    let primary = results.remove(0);
    manifest.conservation = primary.conservation;
    manifest.warnings.extend(primary.warnings.iter().cloned());
    manifest.extra = primary.extra.clone();

    if let Some(other) = results.first() {
        manifest.conservation = manifest.conservation.merge(&other.conservation);
        let diff = primary.table.max_difference(&other.table);
        let passed = diff <= MODE_AGREEMENT_TOL;
        manifest.mode_comparison = Some(ModeComparison {
            max_abs_difference: diff,
            tolerance: MODE_AGREEMENT_TOL,
            passed,
        });
        if !passed {
            return Err(Error::Conservation(format!(
                "sector and full modes differ by {diff:.3e} (tolerance {MODE_AGREEMENT_TOL:e})"
            )));
        }
    }
    if manifest.conservation.worst() > CONSERVATION_TOL {
        return Err(Error::Conservation(format!(
            "conservation breach {:.3e} exceeds {CONSERVATION_TOL:e}",
            manifest.conservation.worst()
        )));
    }
    Ok(primary.table)
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

/// Caps the global worker pool from `SSHQB_THREADS`.
pub fn init_thread_pool() -> Result<()> {
    if let Ok(value) = std::env::var("SSHQB_THREADS") {
        let threads: usize = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("SSHQB_THREADS=`{value}` is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

/// Binary entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return 2;
    }
    let config = match RunConfig::resolve(cli.command, cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match run(&config) {
        Ok(manifest) if manifest.succeeded() => {
            for w in &manifest.warnings {
                log::warn!("{w}");
            }
            0
        }
        Ok(manifest) => {
            eprintln!("error: {}", manifest.error.as_deref().unwrap_or("run failed"));
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
