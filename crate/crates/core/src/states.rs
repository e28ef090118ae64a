//! Atomic, field and joint density matrices.
//!
//! Joint states are ordered atom-major: index `a * d_field + n` addresses
//! `|a> (x) |n>` with atom index 0 = excited, 1 = ground. The thermal field is
//! truncated after Fock level `n_f`, and the discarded probability is lumped
//! into one extra level `n_f + 1` so that every field state has `n_f + 2`
//! levels and unit trace.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, kron, ComplexMatrix};

/// Largest Fock cutoff [`auto_truncate`] will return before giving up.
pub const MAX_AUTO_CUTOFF: usize = 100_000;

/// Which factor of a bipartite atom-field state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    Atom,
    Field,
}

/// Tensor factorization carried by a [`DensityMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dims {
    Single(usize),
    Bipartite { atom: usize, field: usize },
}

impl Dims {
    pub fn total(&self) -> usize {
        match *self {
            Dims::Single(d) => d,
            Dims::Bipartite { atom, field } => atom * field,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationTolerances {
    pub hermitian: f64,
    pub trace: f64,
    /// Smallest eigenvalue still accepted as non-negative (a negative number).
    pub psd_floor: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-12,
            trace: 1e-12,
            psd_floor: -1e-10,
        }
    }
}

/// A Hermitian, unit-trace, positive semidefinite matrix with its factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    dims: Dims,
}

impl DensityMatrix {
    /// Wraps a matrix the caller knows to be a valid state (e.g. a unitary
    /// image or partial trace of one).
    pub(crate) fn new_unchecked(mat: ComplexMatrix, dims: Dims) -> Self {
        debug_assert_eq!(mat.dim(), dims.total());
        Self { mat, dims }
    }

    /// Pure state `|psi><psi|`, normalizing `psi`.
    pub fn from_pure(psi: &[Complex64], dims: Dims) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid(
                "psi",
                "state vector must have finite, non-zero norm",
            ));
        }
        let unit: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        validate_density(ComplexMatrix::outer(&unit), dims)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    /// `(d_atom, d_field)` of a joint state.
    pub fn bipartite(&self) -> Result<(usize, usize)> {
        match self.dims {
            Dims::Bipartite { atom, field } => Ok((atom, field)),
            Dims::Single(_) => Err(Error::MissingFactorization),
        }
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.mat)
    }
}

pub fn validate_density(m: ComplexMatrix, dims: Dims) -> Result<DensityMatrix> {
    validate_density_with(m, dims, &ValidationTolerances::default())
}

pub fn validate_density_with(
    m: ComplexMatrix,
    dims: Dims,
    tol: &ValidationTolerances,
) -> Result<DensityMatrix> {
    if dims.total() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: m.dim(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite {
            operation: "validate_density",
        });
    }
    let herm = m.hermitian_residual();
    if herm > tol.hermitian {
        return Err(Error::NotHermitian {
            residual: herm,
            tolerance: tol.hermitian,
        });
    }
    let trace_err = (m.trace() - Complex64::new(1.0, 0.0)).norm();
    if trace_err > tol.trace {
        return Err(Error::TraceNotOne {
            residual: trace_err,
            tolerance: tol.trace,
        });
    }
    let min = hermitian_eigenvalues(&m)?.first().copied().unwrap_or(0.0);
    if min < tol.psd_floor {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
            tolerance: tol.psd_floor,
        });
    }
    Ok(DensityMatrix { mat: m, dims })
}

/// Bloch-ball coordinates of a qubit state. `theta` is measured from the
/// equator, so `theta > 0` leans toward the excited state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochParams {
    r: f64,
    theta: f64,
    phi: f64,
}

impl BlochParams {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::invalid("r", format!("must lie in (0, 1], got {r}")));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&theta) {
            return Err(Error::invalid(
                "theta",
                format!("must lie in [-pi/2, pi/2], got {theta}"),
            ));
        }
        if !(0.0..TAU).contains(&phi) {
            return Err(Error::invalid(
                "phi",
                format!("must lie in [0, 2pi), got {phi}"),
            ));
        }
        Ok(Self { r, theta, phi })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Cartesian Bloch vector `(x, y, z)` with `z = r sin(theta)`.
    pub fn vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [self.r * ct * cp, self.r * ct * sp, self.r * st]
    }

    pub fn excited_population(&self) -> f64 {
        0.5 * (1.0 + self.vector()[2])
    }
}

/// `rho = (I + x sx + y sy + z sz) / 2` in the (excited, ground) basis.
pub fn bloch_qubit(p: BlochParams) -> DensityMatrix {
    let [x, y, z] = p.vector();
    let mut m = ComplexMatrix::zeros(2);
    m[(0, 0)] = Complex64::new(0.5 * (1.0 + z), 0.0);
    m[(1, 1)] = Complex64::new(0.5 * (1.0 - z), 0.0);
    m[(0, 1)] = Complex64::new(0.5 * x, -0.5 * y);
    m[(1, 0)] = Complex64::new(0.5 * x, 0.5 * y);
    DensityMatrix::new_unchecked(m, Dims::Single(2))
}

/// Atom diagonal in the energy basis with excited population `p_e`.
pub fn diagonal_qubit(p_e: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p_e) {
        return Err(Error::invalid(
            "p_e",
            format!("must lie in [0, 1], got {p_e}"),
        ));
    }
    Ok(DensityMatrix::new_unchecked(
        ComplexMatrix::from_real_diag(&[p_e, 1.0 - p_e]),
        Dims::Single(2),
    ))
}

/// Initial atomic state as accepted by the front ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomState {
    Ground,
    Excited,
    Bloch(BlochParams),
}

impl AtomState {
    pub fn density(&self) -> DensityMatrix {
        match self {
            AtomState::Ground => diagonal_qubit(0.0).expect("0 is a valid population"),
            AtomState::Excited => diagonal_qubit(1.0).expect("1 is a valid population"),
            AtomState::Bloch(p) => bloch_qubit(*p),
        }
    }
}

/// `n_bar / (n_bar + 1)`, the Boltzmann factor `exp(-hbar omega / k_B T)`
/// of a thermal mode in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannRatio(f64);

impl BoltzmannRatio {
    pub fn new(ratio: f64) -> Result<Self> {
        if ratio > 0.0 && ratio < 1.0 {
            Ok(Self(ratio))
        } else {
            Err(Error::invalid(
                "ratio",
                format!("must lie in (0, 1), got {ratio}"),
            ))
        }
    }

    pub fn from_mean_photons(n_bar: f64) -> Result<Self> {
        if !(n_bar > 0.0 && n_bar.is_finite()) {
            return Err(Error::invalid(
                "n_bar",
                format!("must be positive, got {n_bar}"),
            ));
        }
        Self::new(n_bar / (n_bar + 1.0))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn mean_photons(&self) -> f64 {
        self.0 / (1.0 - self.0)
    }
}

/// Thermal photon-number distribution truncated after `n_f` with the tail
/// mass lumped into level `n_f + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDistribution {
    n_bar: f64,
    n_f: usize,
    probs: Vec<f64>,
}

impl FieldDistribution {
    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    /// `P_0 .. P_{n_f}` followed by the lumped tail.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of field levels, `n_f + 2`.
    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn tail_mass(&self) -> f64 {
        *self
            .probs
            .last()
            .expect("distribution always has a lump level")
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(
            ComplexMatrix::from_real_diag(&self.probs),
            Dims::Single(self.dim()),
        )
    }

    pub fn mean_photons(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

pub fn thermal_field(n_bar: f64, n_f: usize) -> Result<FieldDistribution> {
    if !(n_bar >= 0.0 && n_bar.is_finite()) {
        return Err(Error::invalid(
            "n_bar",
            format!("must be finite and >= 0, got {n_bar}"),
        ));
    }
    let q = n_bar / (n_bar + 1.0);
    let mut probs = Vec::with_capacity(n_f + 2);
    let mut p = 1.0 / (n_bar + 1.0);
    for _ in 0..=n_f {
        probs.push(p);
        p *= q;
    }
    let lump = (1.0 - neumaier_sum(&probs)).max(0.0);
    probs.push(lump);
    Ok(FieldDistribution { n_bar, n_f, probs })
}

/// Smallest `n_f >= 1` for which moving the cutoff to `n_f + 1` changes the
/// field entropy by less than `tol`.
pub fn auto_truncate(n_bar: f64, tol: f64) -> Result<usize> {
    if !(n_bar >= 0.0 && n_bar.is_finite()) {
        return Err(Error::invalid(
            "n_bar",
            format!("must be finite and >= 0, got {n_bar}"),
        ));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid(
            "tol",
            format!("must be positive, got {tol}"),
        ));
    }
    if n_bar == 0.0 {
        return Ok(1);
    }
    let q = n_bar / (n_bar + 1.0);
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    // Raising the cutoff from k to k + 1 splits the lump q^{k+1} into
    // P_{k+1} = q^{k+1} / (n_bar + 1) and a new lump q^{k+2}.
    for k in 1..MAX_AUTO_CUTOFF {
        let lump = q.powi(k as i32 + 1);
        let split = lump / (n_bar + 1.0);
        let delta = h(split) + h(lump * q) - h(lump);
        if delta.abs() < tol {
            return Ok(k);
        }
    }
    Err(Error::invalid(
        "n_bar",
        format!("no cutoff below {MAX_AUTO_CUTOFF} meets tol {tol:e}"),
    ))
}

pub fn product_state(atom: &DensityMatrix, field: &DensityMatrix) -> Result<DensityMatrix> {
    let (Dims::Single(da), Dims::Single(df)) = (atom.dims, field.dims) else {
        return Err(Error::invalid(
            "product_state",
            "factors must be single-system states",
        ));
    };
    Ok(DensityMatrix::new_unchecked(
        kron(&atom.mat, &field.mat),
        Dims::Bipartite {
            atom: da,
            field: df,
        },
    ))
}

/// Reduced state of `keep`, tracing out the other factor.
pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
    let (da, df) = rho.bipartite()?;
    let m = &rho.mat;
    let out = match keep {
        Subsystem::Atom => ComplexMatrix::from_fn(da, |i, j| {
            (0..df).map(|n| m[(i * df + n, j * df + n)]).sum()
        }),
        Subsystem::Field => ComplexMatrix::from_fn(df, |a, b| {
            (0..da).map(|i| m[(i * df + a, i * df + b)]).sum()
        }),
    };
    let d = out.dim();
    Ok(DensityMatrix::new_unchecked(out, Dims::Single(d)))
}

fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
