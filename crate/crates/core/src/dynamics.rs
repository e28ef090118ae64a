//! Exact resonant Jaynes-Cummings evolution.
//!
//! The propagator is assembled directly from its closed form in the
//! atom-major basis `{|e,n>} (+) {|g,n>}`: `|e,n>` and `|g,n+1>` form an
//! invariant pair rotating at frequency `sqrt(n+1)` (units of the coupling).
//! The top excited level `|e,n_f+1>` has no partner inside the truncated
//! space and stays put. Time is the dimensionless `lambda t`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::entanglement::{ppt_report, PptReport};
use crate::entropy::{purity, von_neumann};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::states::{partial_trace, validate_density, DensityMatrix, FieldDistribution, Subsystem};

/// Rabi frequencies of the truncated model. `alpha[n]` drives `|e,n>`,
/// `beta[n]` drives `|g,n>`; `alpha[n-1] == beta[n] == sqrt(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RabiFrequencies {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl RabiFrequencies {
    /// Frequencies for a field space of `field_dim` levels.
    pub fn new(field_dim: usize) -> Self {
        let beta: Vec<f64> = (0..field_dim).map(|n| (n as f64).sqrt()).collect();
        let alpha = (0..field_dim)
            .map(|n| if n + 1 < field_dim { beta[n + 1] } else { 0.0 })
            .collect();
        Self { alpha, beta }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn field_dim(&self) -> usize {
        self.beta.len()
    }
}

/// `U(t) = exp(-i H t)` for a given cutoff, stored densely.
#[derive(Debug, Clone)]
pub struct Propagator {
    n_f: usize,
    t: f64,
    mat: ComplexMatrix,
}

impl Propagator {
    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    /// `||U^dagger U - I||_F`.
    pub fn unitarity_residual(&self) -> f64 {
        let prod = self
            .mat
            .adjoint()
            .matmul(&self.mat)
            .expect("square propagator");
        prod.sub(&ComplexMatrix::identity(self.mat.dim()))
            .expect("same dimension")
            .frobenius_norm()
    }

    /// `U rho U^dagger` for Hermitian `rho`, computed as `U (U rho)^dagger`
    /// so both products are sparse-times-dense.
    pub fn conjugate(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let left = self.mat.matmul(rho)?;
        self.mat.matmul(&left.adjoint())
    }
}

pub fn build_propagator(n_f: usize, t: f64) -> Result<Propagator> {
    if n_f < 1 {
        return Err(Error::invalid("n_f", "propagator needs n_f >= 1"));
    }
    if !t.is_finite() {
        return Err(Error::invalid("t", format!("must be finite, got {t}")));
    }
    let d = n_f + 2;
    let freqs = RabiFrequencies::new(d);
    let mut u = ComplexMatrix::zeros(2 * d);
    for n in 0..d {
        u[(n, n)] = Complex64::new((freqs.alpha[n] * t).cos(), 0.0);
        u[(d + n, d + n)] = Complex64::new((freqs.beta[n] * t).cos(), 0.0);
    }
    for n in 0..d - 1 {
        let s = Complex64::new(0.0, -(freqs.alpha[n] * t).sin());
        u[(n, d + n + 1)] = s;
        u[(d + n + 1, n)] = s;
    }
    Ok(Propagator { n_f, t, mat: u })
}

fn joint_field_dim(rho: &DensityMatrix) -> Result<usize> {
    let (da, df) = rho.bipartite()?;
    if da != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: da,
        });
    }
    if df < 3 {
        return Err(Error::invalid(
            "rho",
            "field needs at least n_f + 2 = 3 levels",
        ));
    }
    Ok(df)
}

/// `rho(t) = U(t) rho0 U(t)^dagger`, revalidated.
pub fn evolve(rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let df = joint_field_dim(rho0)?;
    let u = build_propagator(df - 2, t)?;
    evolve_with(rho0, &u)
}

pub fn evolve_with(rho0: &DensityMatrix, u: &Propagator) -> Result<DensityMatrix> {
    if u.mat.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho0.dim(),
            found: u.mat.dim(),
        });
    }
    validate_density(u.conjugate(rho0.matrix())?, rho0.dims())
}

/// Reduced populations for an initial state diagonal in the energy basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEvolution {
    /// `(A(t), B(t))`: excited and ground populations.
    pub atom: [f64; 2],
    /// `C_n(t) + D_n(t)` for every field level.
    pub field: Vec<f64>,
}

/// Closed-form reduced dynamics of `diag(p_e, 1 - p_e) (x) field`.
pub fn diagonal_evolve(p_e: f64, field: &FieldDistribution, t: f64) -> Result<DiagonalEvolution> {
    if !(0.0..=1.0).contains(&p_e) {
        return Err(Error::invalid(
            "p_e",
            format!("must lie in [0, 1], got {p_e}"),
        ));
    }
    if !t.is_finite() {
        return Err(Error::invalid("t", format!("must be finite, got {t}")));
    }
    let p = field.probs();
    let d = p.len();
    let p_g = 1.0 - p_e;
    let freqs = RabiFrequencies::new(d);
    let (alpha, beta) = (freqs.alpha(), freqs.beta());
    let prob = |n: isize| -> f64 {
        if n < 0 || n as usize >= d {
            0.0
        } else {
            p[n as usize]
        }
    };
    let cos2 = |w: f64| (w * t).cos().powi(2);
    let sin2 = |w: f64| (w * t).sin().powi(2);

    let mut field_pop = Vec::with_capacity(d);
    for n in 0..d {
        let ni = n as isize;
        let c = p_e
            * (prob(ni) * cos2(alpha[n])
                + if n > 0 {
                    prob(ni - 1) * sin2(alpha[n - 1])
                } else {
                    0.0
                });
        let dd = p_g
            * (if n + 1 < d {
                prob(ni + 1) * sin2(beta[n + 1])
            } else {
                0.0
            } + prob(ni) * cos2(beta[n]));
        field_pop.push(c + dd);
    }

    let mut a = 0.0;
    let mut b = 0.0;
    for n in 0..d {
        a += p_e * p[n] * cos2(alpha[n]);
        b += p_g * p[n] * cos2(beta[n]);
        if n + 1 < d {
            a += p_g * p[n + 1] * sin2(beta[n + 1]);
            b += p_e * p[n] * sin2(alpha[n]);
        }
    }

    Ok(DiagonalEvolution {
        atom: [a, b],
        field: field_pop,
    })
}

/// Number of excitations `<a^dagger a + sigma_+ sigma_->`.
pub fn excitation_expectation(rho: &DensityMatrix) -> Result<f64> {
    let df = joint_field_dim(rho)?;
    let m = rho.matrix();
    let mut total = 0.0;
    for n in 0..df {
        total += (n + 1) as f64 * m[(n, n)].re;
        total += n as f64 * m[(df + n, df + n)].re;
    }
    Ok(total)
}

/// What a trajectory computes at each sample besides the partial entropies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    /// Diagonalize the joint state at every sample. When false the initial
    /// joint entropy is reused; it is a unitary invariant.
    pub track_joint_entropy: bool,
    /// Run the partial-transpose analysis with this artifact threshold.
    pub ppt_threshold: Option<f64>,
    /// Record `||U^dagger U - I||_F` of every propagator.
    pub check_unitarity: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            track_joint_entropy: true,
            ppt_threshold: None,
            check_unitarity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub s_atom: f64,
    pub s_field: f64,
    pub s_joint: f64,
    pub purity_atom: f64,
    pub purity_field: f64,
    pub n_expect: f64,
    /// `|Tr rho(t) - 1|`.
    pub trace_error: f64,
    pub unitarity_residual: Option<f64>,
    pub ppt: Option<PptReport>,
}

/// Evaluates every sample of `t_grid` from `rho0` with its own propagator.
pub fn trajectory(
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &TrajectoryOptions,
) -> Result<Vec<TrajectoryRecord>> {
    let df = joint_field_dim(rho0)?;
    check_time_grid(t_grid)?;
    let initial_joint = if opts.track_joint_entropy {
        None
    } else {
        Some(von_neumann(rho0)?)
    };
    t_grid
        .par_iter()
        .map(|&t| sample(rho0, df, t, initial_joint, opts))
        .collect()
}

fn sample(
    rho0: &DensityMatrix,
    df: usize,
    t: f64,
    initial_joint: Option<f64>,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    let u = build_propagator(df - 2, t)?;
    let evolved = u.conjugate(rho0.matrix())?;
    if !evolved.is_finite() {
        return Err(Error::NonFinite {
            operation: "evolve",
        });
    }
    let rho = DensityMatrix::new_unchecked(evolved, rho0.dims());
    let rho_a = partial_trace(&rho, Subsystem::Atom)?;
    let rho_f = partial_trace(&rho, Subsystem::Field)?;
    let s_joint = match initial_joint {
        Some(s) => s,
        None => von_neumann(&rho)?,
    };
    let ppt = opts
        .ppt_threshold
        .map(|threshold| ppt_report(&rho, threshold))
        .transpose()?;
    Ok(TrajectoryRecord {
        t,
        s_atom: von_neumann(&rho_a)?,
        s_field: von_neumann(&rho_f)?,
        s_joint,
        purity_atom: purity(&rho_a),
        purity_field: purity(&rho_f),
        n_expect: excitation_expectation(&rho)?,
        trace_error: (rho.trace() - 1.0).abs(),
        unitarity_residual: opts.check_unitarity.then(|| u.unitarity_residual()),
        ppt,
    })
}

fn check_time_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        None => return Err(Error::invalid("t_grid", "must not be empty")),
        Some(&t0) if t0 != 0.0 => {
            return Err(Error::invalid(
                "t_grid",
                format!("must start at 0, starts at {t0}"),
            ))
        }
        _ => {}
    }
    if t_grid
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::invalid("t_grid", "must be strictly increasing"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("t_grid", "must be finite"));
    }
    Ok(())
}

/// `0, dt, 2 dt, ...` up to and including `t_max` (to within rounding).
pub fn uniform_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(t_max >= dt && t_max.is_finite()) {
        return Err(Error::invalid(
            "t_max",
            format!("must be >= dt, got {t_max}"),
        ));
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}
