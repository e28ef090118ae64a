//! Bloch-ball parameter sweeps over initial atomic states.
//!
//! Each cell evolves `bloch_qubit(r, theta, 0) (x) thermal(n_bar)` over the
//! full time grid and reduces the trajectory to the exchange parameter `P`,
//! the mutual-entropy ratio `R_bar` and the negativity measure `E`. Cells are
//! independent; results come back in theta-major order whatever the worker
//! count.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{trajectory, TrajectoryOptions, TrajectoryRecord};
use crate::entanglement::{e_measure_of, EMeasure, DEFAULT_ARTIFACT_THRESHOLD};
use crate::entropy::{exchange_parameter, r_parameter, EntropySeries, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::states::{bloch_qubit, product_state, thermal_field, BlochParams, FieldDistribution};

/// Every `SPOT_CHECK_STRIDE`-th cell also checks propagator unitarity.
pub const SPOT_CHECK_STRIDE: usize = 20;

const UNITARITY_TOL: f64 = 1e-12;
const EXCITATION_DRIFT_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;

/// Atomic state whose populations match the field's Boltzmann ratio, making
/// both reduced states stationary.
pub fn fixed_point(n_bar: f64) -> Result<BlochParams> {
    let (_, p_g) = fixed_point_populations(n_bar)?;
    BlochParams::new(2.0 * p_g - 1.0, -FRAC_PI_2, 0.0)
}

/// `(P_e, P_g)` at the fixed point.
pub fn fixed_point_populations(n_bar: f64) -> Result<(f64, f64)> {
    if !(n_bar > 0.0 && n_bar.is_finite()) {
        return Err(Error::invalid(
            "n_bar",
            format!("must be positive, got {n_bar}"),
        ));
    }
    let p_g = (n_bar + 1.0) / (2.0 * n_bar + 1.0);
    let p_e = n_bar / (2.0 * n_bar + 1.0);
    Ok((p_e, p_g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostics {
    pub exchange: bool,
    pub mutual: bool,
    pub ppt: bool,
}

impl Diagnostics {
    pub const ALL: Diagnostics = Diagnostics {
        exchange: true,
        mutual: true,
        ppt: true,
    };

    /// Parses a comma-separated subset of `exchange,mutual,ppt`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut d = Diagnostics {
            exchange: false,
            mutual: false,
            ppt: false,
        };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "exchange" => d.exchange = true,
                "mutual" => d.mutual = true,
                "ppt" => d.ppt = true,
                other => {
                    return Err(Error::invalid(
                        "diagnostics",
                        format!("unknown diagnostic `{other}` (expected exchange, mutual, ppt)"),
                    ))
                }
            }
        }
        Ok(d)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.exchange {
            parts.push("exchange");
        }
        if self.mutual {
            parts.push("mutual");
        }
        if self.ppt {
            parts.push("ppt");
        }
        parts.join(",")
    }
}

impl std::str::FromStr for Diagnostics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    theta_values: Vec<f64>,
    r_values: Vec<f64>,
    n_bar: f64,
    n_f: usize,
    t_grid: Vec<f64>,
}

impl SweepGrid {
    pub fn new(
        theta_values: Vec<f64>,
        r_values: Vec<f64>,
        n_bar: f64,
        n_f: usize,
        t_grid: Vec<f64>,
    ) -> Result<Self> {
        check_axis("theta_values", &theta_values)?;
        check_axis("r_values", &r_values)?;
        if theta_values
            .iter()
            .any(|t| !(-FRAC_PI_2..=FRAC_PI_2).contains(t))
        {
            return Err(Error::invalid("theta_values", "must lie in [-pi/2, pi/2]"));
        }
        if r_values.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::invalid("r_values", "must lie in (0, 1]"));
        }
        if n_f < 1 {
            return Err(Error::invalid("n_f", "must be >= 1"));
        }
        if t_grid.len() < 2 {
            return Err(Error::invalid("t_grid", "needs at least two samples"));
        }
        thermal_field(n_bar, n_f)?;
        Ok(Self {
            theta_values,
            r_values,
            n_bar,
            n_f,
            t_grid,
        })
    }

    /// Evenly spaced axes: theta over `[-pi/2, pi/2]`, r over `[0.02, 1]`.
    pub fn uniform(
        n_theta: usize,
        n_r: usize,
        n_bar: f64,
        n_f: usize,
        t_grid: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            linspace(-FRAC_PI_2, FRAC_PI_2, n_theta),
            linspace(0.02, 1.0, n_r),
            n_bar,
            n_f,
            t_grid,
        )
    }

    pub fn theta_values(&self) -> &[f64] {
        &self.theta_values
    }

    pub fn r_values(&self) -> &[f64] {
        &self.r_values
    }

    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn len(&self) -> usize {
        self.theta_values.len() * self.r_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(theta, r)` of cell `index` in theta-major order.
    pub fn point(&self, index: usize) -> (f64, f64) {
        let nr = self.r_values.len();
        (self.theta_values[index / nr], self.r_values[index % nr])
    }

    pub fn field(&self) -> FieldDistribution {
        thermal_field(self.n_bar, self.n_f).expect("validated at construction")
    }
}

fn check_axis(name: &'static str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::invalid(name, "must not be empty"));
    }
    if axis
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::invalid(name, "must be strictly increasing"));
    }
    Ok(())
}

/// `n` evenly spaced points from `start` to `end`; a single point sits at `start`.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    end
                } else {
                    start + (end - start) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub diagnostics: Diagnostics,
    pub eps: f64,
    pub artifact_threshold: f64,
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            diagnostics: Diagnostics::ALL,
            eps: DEFAULT_EPS,
            artifact_threshold: DEFAULT_ARTIFACT_THRESHOLD,
            workers: None,
        }
    }
}

/// Why a cell value is missing or suspect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellIssue {
    /// Every step of the exchange parameter fell below eps.
    ExchangeUndefined,
    /// Every sample of the mutual ratio fell below eps.
    RatioUndefined,
    /// A conservation spot check exceeded its tolerance.
    InvariantViolation(String),
    /// The trajectory itself failed.
    Failed(String),
}

impl CellIssue {
    pub fn tag(&self) -> String {
        match self {
            CellIssue::ExchangeUndefined => "p_undefined".into(),
            CellIssue::RatioUndefined => "r_undefined".into(),
            CellIssue::InvariantViolation(what) => format!("invariant:{what}"),
            CellIssue::Failed(why) => format!("failed:{why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub theta: f64,
    pub r: f64,
    pub p: Option<f64>,
    pub r_bar: Option<f64>,
    pub e: Option<EMeasure>,
    /// Largest number of significant negative eigenvalues seen at any sample.
    pub n_significant_negatives: usize,
    /// Largest artifact-class negative eigenvalue magnitude seen.
    pub max_artifact_magnitude: f64,
    pub issues: Vec<CellIssue>,
}

impl SweepCell {
    fn empty(theta: f64, r: f64) -> Self {
        Self {
            theta,
            r,
            p: None,
            r_bar: None,
            e: None,
            n_significant_negatives: 0,
            max_artifact_magnitude: 0.0,
            issues: Vec::new(),
        }
    }

    /// `ok`, or the issue tags joined with `|`.
    pub fn status(&self) -> String {
        if self.issues.is_empty() {
            "ok".into()
        } else {
            self.issues
                .iter()
                .map(CellIssue::tag)
                .collect::<Vec<_>>()
                .join("|")
        }
    }
}

/// Runs every cell of `grid`. Per-cell failures are recorded in the cell.
pub fn run_sweep(grid: &SweepGrid, cfg: &SweepConfig) -> Result<Vec<SweepCell>> {
    if cfg.eps.is_nan() || cfg.eps <= 0.0 {
        return Err(Error::invalid("eps", "must be positive"));
    }
    if cfg.artifact_threshold.is_nan() || cfg.artifact_threshold <= 0.0 {
        return Err(Error::invalid("artifact_threshold", "must be positive"));
    }
    let field = grid.field().density();
    let job = || -> Vec<SweepCell> {
        (0..grid.len())
            .into_par_iter()
            .map(|index| {
                let (theta, r) = grid.point(index);
                evaluate_cell(grid, &field, cfg, index, theta, r)
            })
            .collect()
    };
    match cfg.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid("workers", e.to_string()))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

fn evaluate_cell(
    grid: &SweepGrid,
    field: &crate::states::DensityMatrix,
    cfg: &SweepConfig,
    index: usize,
    theta: f64,
    r: f64,
) -> SweepCell {
    let mut cell = SweepCell::empty(theta, r);
    let records = match cell_trajectory(grid, field, cfg, index, theta, r) {
        Ok(records) => records,
        Err(e) => {
            cell.issues.push(CellIssue::Failed(e.to_string()));
            return cell;
        }
    };
    spot_check(&records, &mut cell);

    let series = EntropySeries::from_records(&records);
    if cfg.diagnostics.exchange {
        match exchange_parameter(&series, cfg.eps) {
            Ok(x) => cell.p = Some(x.p),
            Err(Error::AllStepsSkipped { .. }) => cell.issues.push(CellIssue::ExchangeUndefined),
            Err(e) => cell.issues.push(CellIssue::Failed(e.to_string())),
        }
    }
    if cfg.diagnostics.mutual {
        match r_parameter(&series, cfg.eps) {
            Ok(x) => cell.r_bar = Some(x.r_bar),
            Err(Error::AllStepsSkipped { .. }) => cell.issues.push(CellIssue::RatioUndefined),
            Err(e) => cell.issues.push(CellIssue::Failed(e.to_string())),
        }
    }
    if cfg.diagnostics.ppt {
        let reports: Vec<_> = records.iter().filter_map(|r| r.ppt.as_ref()).collect();
        let lambdas: Vec<f64> = reports.iter().map(|p| p.lambda_m).collect();
        cell.e = Some(e_measure_of(&lambdas));
        cell.n_significant_negatives = reports
            .iter()
            .map(|p| p.significant_negatives.len())
            .max()
            .unwrap_or(0);
        cell.max_artifact_magnitude = reports
            .iter()
            .map(|p| p.max_artifact_magnitude())
            .fold(0.0, f64::max);
    }
    cell
}

fn cell_trajectory(
    grid: &SweepGrid,
    field: &crate::states::DensityMatrix,
    cfg: &SweepConfig,
    index: usize,
    theta: f64,
    r: f64,
) -> Result<Vec<TrajectoryRecord>> {
    let atom = bloch_qubit(BlochParams::new(r, theta, 0.0)?);
    let rho0 = product_state(&atom, field)?;
    let opts = TrajectoryOptions {
        track_joint_entropy: false,
        ppt_threshold: cfg.diagnostics.ppt.then_some(cfg.artifact_threshold),
        check_unitarity: index.is_multiple_of(SPOT_CHECK_STRIDE),
    };
    trajectory(&rho0, grid.t_grid(), &opts)
}

fn spot_check(records: &[TrajectoryRecord], cell: &mut SweepCell) {
    let n0 = records[0].n_expect;
    let drift = records
        .iter()
        .map(|r| (r.n_expect - n0).abs())
        .fold(0.0, f64::max);
    if drift > EXCITATION_DRIFT_TOL {
        cell.issues.push(CellIssue::InvariantViolation(format!(
            "excitation_drift={drift:e}"
        )));
    }
    let trace = records.iter().map(|r| r.trace_error).fold(0.0, f64::max);
    if trace > TRACE_TOL {
        cell.issues
            .push(CellIssue::InvariantViolation(format!("trace={trace:e}")));
    }
    let unitarity = records
        .iter()
        .filter_map(|r| r.unitarity_residual)
        .fold(0.0, f64::max);
    if unitarity > UNITARITY_TOL {
        cell.issues.push(CellIssue::InvariantViolation(format!(
            "unitarity={unitarity:e}"
        )));
    }
}

/// Cells with a defined `P` strictly below `cutoff`.
pub fn exchange_region(cells: &[SweepCell], cutoff: f64) -> Vec<&SweepCell> {
    cells
        .iter()
        .filter(|c| matches!(c.p, Some(p) if p < cutoff))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::uniform_grid;

    #[test]
    fn fixed_point_for_weak_field() {
        let p = fixed_point(0.1).unwrap();
        assert!((p.r() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(p.theta(), -FRAC_PI_2);
        assert_eq!(p.phi(), 0.0);
    }

    #[test]
    fn fixed_point_limits_and_ratio() {
        assert!((fixed_point(1e-9).unwrap().r() - 1.0).abs() < 1e-8);
        let p = fixed_point(0.5).unwrap();
        assert!((p.r() - 0.5).abs() < 1e-15);
        let (pe, pg) = fixed_point_populations(0.5).unwrap();
        assert!((pe / pg - 1.0 / 3.0).abs() < 1e-15);
        assert!(fixed_point(0.0).is_err());
        assert!(fixed_point(-1.0).is_err());
    }

    #[test]
    fn diagnostics_parsing() {
        assert_eq!(
            Diagnostics::parse("exchange,mutual,ppt").unwrap(),
            Diagnostics::ALL
        );
        let d = Diagnostics::parse("ppt").unwrap();
        assert!(d.ppt && !d.exchange && !d.mutual);
        assert!(Diagnostics::parse("exchange,bogus").is_err());
        assert_eq!(Diagnostics::ALL.label(), "exchange,mutual,ppt");
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.02, 1.0, 51);
        assert_eq!(v.len(), 51);
        assert_eq!(v[0], 0.02);
        assert_eq!(v[50], 1.0);
        assert_eq!(linspace(0.3, 1.0, 1), vec![0.3]);
    }

    #[test]
    fn grid_validation() {
        let t = uniform_grid(1.0, 0.1).unwrap();
        assert!(SweepGrid::new(vec![], vec![0.5], 0.1, 5, t.clone()).is_err());
        assert!(SweepGrid::new(vec![0.0], vec![0.0], 0.1, 5, t.clone()).is_err());
        assert!(SweepGrid::new(vec![0.2, 0.1], vec![0.5], 0.1, 5, t.clone()).is_err());
        assert!(SweepGrid::new(vec![0.0], vec![0.5], 0.1, 0, t.clone()).is_err());
        assert!(SweepGrid::new(vec![0.0], vec![0.5], 0.1, 5, t).is_ok());
    }

    #[test]
    fn single_cell_at_fixed_point_has_undefined_exchange() {
        let fp = fixed_point(0.1).unwrap();
        let grid = SweepGrid::new(
            vec![fp.theta()],
            vec![fp.r()],
            0.1,
            13,
            uniform_grid(5.0, 0.05).unwrap(),
        )
        .unwrap();
        let cells = run_sweep(&grid, &SweepConfig::default()).unwrap();
        assert_eq!(cells.len(), 1);
        let cell = &cells[0];
        assert_eq!(cell.p, None);
        assert!(cell.issues.contains(&CellIssue::ExchangeUndefined));
        assert!(cell.r_bar.unwrap().abs() < 1e-9);
        assert_eq!(cell.n_significant_negatives, 0);
        assert_eq!(cell.e, Some(EMeasure::SeparableGrade));
    }

    #[test]
    fn cells_come_back_theta_major() {
        let grid = SweepGrid::new(
            vec![-1.0, 0.0, 1.0],
            vec![0.4, 0.9],
            0.1,
            6,
            uniform_grid(1.0, 0.1).unwrap(),
        )
        .unwrap();
        let cells = run_sweep(&grid, &SweepConfig::default()).unwrap();
        let coords: Vec<(f64, f64)> = cells.iter().map(|c| (c.theta, c.r)).collect();
        assert_eq!(
            coords,
            vec![
                (-1.0, 0.4),
                (-1.0, 0.9),
                (0.0, 0.4),
                (0.0, 0.9),
                (1.0, 0.4),
                (1.0, 0.9)
            ]
        );
        for c in &cells {
            let p = c.p.unwrap();
            assert!((-1.0..=1.0).contains(&p));
            assert!(c.issues.is_empty(), "{:?}", c.issues);
        }
    }

    #[test]
    fn exchange_region_cutoffs() {
        let mk = |p: Option<f64>| SweepCell {
            p,
            ..SweepCell::empty(0.0, 0.5)
        };
        let cells = vec![mk(Some(-0.9)), mk(Some(-0.5)), mk(None), mk(Some(0.4))];
        assert_eq!(exchange_region(&cells, -0.8).len(), 1);
        assert!(exchange_region(&cells, -1.01).is_empty());
        assert_eq!(exchange_region(&cells, 1.0).len(), 3);
    }
}
