//! Partial transposition and the negativity-based entanglement diagnostics.
//!
//! With a truncated Fock basis the partial transpose of an otherwise
//! separable state can carry one negative eigenvalue whose size tracks the
//! truncated tail probability. Such eigenvalues are split off as artifacts
//! by a magnitude threshold before any verdict is drawn.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{hermitian_eigenvalues, ComplexMatrix};
use crate::states::{DensityMatrix, Subsystem};

pub const DEFAULT_ARTIFACT_THRESHOLD: f64 = 1e-12;

/// Partial transpose on the field factor: `out[(i a), (j b)] = rho[(i b), (j a)]`.
pub fn partial_transpose(rho: &DensityMatrix) -> Result<ComplexMatrix> {
    partial_transpose_on(rho, Subsystem::Field)
}

pub fn partial_transpose_on(rho: &DensityMatrix, factor: Subsystem) -> Result<ComplexMatrix> {
    let (_, df) = rho.bipartite()?;
    let m = rho.matrix();
    let split = |k: usize| (k / df, k % df);
    Ok(ComplexMatrix::from_fn(m.dim(), |row, col| {
        let ((i, a), (j, b)) = (split(row), split(col));
        match factor {
            Subsystem::Field => m[(i * df + b, j * df + a)],
            Subsystem::Atom => m[(j * df + a, i * df + b)],
        }
    }))
}

/// Strictly negative eigenvalues of a Hermitian matrix, ascending.
pub fn negative_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigenvalues(m)?
        .into_iter()
        .take_while(|&l| l < 0.0)
        .collect())
}

/// Splits negatives into `(artifacts, significant)` by `|lambda| < threshold`.
///
/// Panics if `threshold` is not positive.
pub fn filter_artifact(negatives: &[f64], threshold: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(
        threshold > 0.0,
        "artifact threshold must be positive, got {threshold}"
    );
    negatives.iter().partition(|l| l.abs() < threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PptReport {
    /// Spectrum of the partial transpose, ascending.
    pub eigenvalues: Vec<f64>,
    pub negatives: Vec<f64>,
    pub artifacts: Vec<f64>,
    pub significant_negatives: Vec<f64>,
    /// Most negative significant eigenvalue, or 0 when there is none.
    pub lambda_m: f64,
}

impl PptReport {
    pub fn artifact_count(&self) -> usize {
        self.artifacts.len()
    }

    pub fn max_artifact_magnitude(&self) -> f64 {
        self.artifacts.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }
}

pub fn ppt_report(rho: &DensityMatrix, threshold: f64) -> Result<PptReport> {
    let eigenvalues = hermitian_eigenvalues(&partial_transpose(rho)?)?;
    let negatives: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .take_while(|&l| l < 0.0)
        .collect();
    let (artifacts, significant_negatives) = filter_artifact(&negatives, threshold);
    let lambda_m = significant_negatives.first().copied().unwrap_or(0.0);
    Ok(PptReport {
        eigenvalues,
        negatives,
        artifacts,
        significant_negatives,
        lambda_m,
    })
}

/// `log10 |mean lambda_m|` over a trajectory, or the separable-grade
/// sentinel when the mean vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EMeasure {
    Finite(f64),
    SeparableGrade,
}

impl EMeasure {
    /// `-inf` for the sentinel.
    pub fn value(&self) -> f64 {
        match self {
            EMeasure::Finite(e) => *e,
            EMeasure::SeparableGrade => f64::NEG_INFINITY,
        }
    }
}

pub fn e_measure(reports: &[PptReport]) -> EMeasure {
    let lambdas: Vec<f64> = reports.iter().map(|r| r.lambda_m).collect();
    e_measure_of(&lambdas)
}

/// Same as [`e_measure`] from the per-sample `lambda_m` values.
pub fn e_measure_of(lambda_m: &[f64]) -> EMeasure {
    if lambda_m.is_empty() {
        return EMeasure::SeparableGrade;
    }
    let mean = lambda_m.iter().sum::<f64>() / lambda_m.len() as f64;
    if mean == 0.0 {
        EMeasure::SeparableGrade
    } else {
        EMeasure::Finite(mean.abs().log10())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PptVerdict {
    Entangled,
    /// No significant negativity. Positivity of the partial transpose does
    /// not prove separability in 2 x N with N > 3.
    Indeterminate,
}

pub fn ppt_verdict(report: &PptReport) -> PptVerdict {
    if report.significant_negatives.is_empty() {
        PptVerdict::Indeterminate
    } else {
        PptVerdict::Entangled
    }
}
