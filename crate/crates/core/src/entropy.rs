//! Entropies, purities and the two time-averaged correlation measures:
//! the entropy exchange parameter `P` and the mutual-entropy ratio `R`.
//!
//! All entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::dynamics::{RabiFrequencies, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::states::{partial_trace, DensityMatrix, FieldDistribution, Subsystem};

/// Eigenvalues below this are treated as exact zeros before taking logs.
pub const EIGENVALUE_FLOOR: f64 = 1e-14;

/// Default guard for vanishing denominators in `P` and `R`.
pub const DEFAULT_EPS: f64 = 1e-9;

/// Eigenvalues below this mean the input was not a state at all.
const PSD_FLOOR: f64 = -1e-10;

pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l >= EIGENVALUE_FLOOR)
        .map(|&l| -l * l.ln())
        .sum()
}

/// `-Tr(rho ln rho)`.
pub fn von_neumann(rho: &DensityMatrix) -> Result<f64> {
    let ev = rho.eigenvalues()?;
    if let Some(&min) = ev.first() {
        if min < PSD_FLOOR {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
                tolerance: PSD_FLOOR,
            });
        }
    }
    Ok(entropy_of_spectrum(&ev))
}

/// `Tr(rho^2)`, i.e. the squared Frobenius norm of a Hermitian matrix.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().entries().iter().map(|z| z.norm_sqr()).sum()
}

/// Tsallis entropy of index 2, `1 - Tr(rho^2)`.
pub fn tsallis2(rho: &DensityMatrix) -> f64 {
    1.0 - purity(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// `S(A|B) = S_AB - S_B` with A the atom.
    AtomGivenField,
    /// `S(B|A) = S_AB - S_A`.
    FieldGivenAtom,
}

pub fn conditional_entropy(rho: &DensityMatrix, which: Conditioning) -> Result<f64> {
    let joint = von_neumann(rho)?;
    let traced = match which {
        Conditioning::AtomGivenField => Subsystem::Field,
        Conditioning::FieldGivenAtom => Subsystem::Atom,
    };
    Ok(joint - von_neumann(&partial_trace(rho, traced)?)?)
}

/// `S_A + S_B - S_AB`.
pub fn mutual_entropy(rho: &DensityMatrix) -> Result<f64> {
    let s_a = von_neumann(&partial_trace(rho, Subsystem::Atom)?)?;
    let s_f = von_neumann(&partial_trace(rho, Subsystem::Field)?)?;
    Ok(s_a + s_f - von_neumann(rho)?)
}

/// Entropy and purity time series of one trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EntropySeries {
    pub t: Vec<f64>,
    pub s_atom: Vec<f64>,
    pub s_field: Vec<f64>,
    pub s_joint: Vec<f64>,
    pub purity_atom: Vec<f64>,
    pub purity_field: Vec<f64>,
}

impl EntropySeries {
    pub fn from_records(records: &[TrajectoryRecord]) -> Self {
        Self {
            t: records.iter().map(|r| r.t).collect(),
            s_atom: records.iter().map(|r| r.s_atom).collect(),
            s_field: records.iter().map(|r| r.s_field).collect(),
            s_joint: records.iter().map(|r| r.s_joint).collect(),
            purity_atom: records.iter().map(|r| r.purity_atom).collect(),
            purity_field: records.iter().map(|r| r.purity_field).collect(),
        }
    }

    /// Series carrying only partial entropies; the joint entropy is zero.
    pub fn from_partials(t: Vec<f64>, s_atom: Vec<f64>, s_field: Vec<f64>) -> Result<Self> {
        if t.len() != s_atom.len() || t.len() != s_field.len() {
            return Err(Error::DimensionMismatch {
                expected: t.len(),
                found: s_atom.len().min(s_field.len()),
            });
        }
        let n = t.len();
        Ok(Self {
            t,
            s_atom,
            s_field,
            s_joint: vec![0.0; n],
            purity_atom: vec![1.0; n],
            purity_field: vec![1.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeResult {
    pub p: f64,
    pub used_steps: usize,
    pub skipped_steps: usize,
}

/// Time-averaged ratio of consecutive partial-entropy changes. At each step
/// the change of smaller magnitude is divided by the larger one, so every
/// ratio lies in `[-1, 1]`; steps where both changes are below `eps` are
/// skipped.
pub fn exchange_parameter(series: &EntropySeries, eps: f64) -> Result<ExchangeResult> {
    exchange_parameter_of(&series.s_atom, &series.s_field, eps)
}

pub fn exchange_parameter_of(s_atom: &[f64], s_field: &[f64], eps: f64) -> Result<ExchangeResult> {
    if s_atom.len() != s_field.len() {
        return Err(Error::DimensionMismatch {
            expected: s_atom.len(),
            found: s_field.len(),
        });
    }
    if s_atom.len() < 2 {
        return Err(Error::invalid("series", "needs at least two samples"));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid(
            "eps",
            format!("must be positive, got {eps}"),
        ));
    }
    let mut sum = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for j in 1..s_atom.len() {
        let da = s_atom[j] - s_atom[j - 1];
        let df = s_field[j] - s_field[j - 1];
        if da.abs().max(df.abs()) < eps {
            skipped += 1;
            continue;
        }
        sum += if da.abs() <= df.abs() {
            da / df
        } else {
            df / da
        };
        used += 1;
    }
    if used == 0 {
        return Err(Error::AllStepsSkipped { eps });
    }
    Ok(ExchangeResult {
        p: sum / used as f64,
        used_steps: used,
        skipped_steps: skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutualRatio {
    pub r_bar: f64,
    pub used_samples: usize,
    pub skipped_samples: usize,
}

/// `R(t) = S(a:f) / min(S_a, S_f)`, averaged over samples whose smaller
/// partial entropy is at least `eps`.
pub fn r_parameter(series: &EntropySeries, eps: f64) -> Result<MutualRatio> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid(
            "eps",
            format!("must be positive, got {eps}"),
        ));
    }
    let mut sum = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for j in 0..series.len() {
        let (sa, sf, saf) = (series.s_atom[j], series.s_field[j], series.s_joint[j]);
        let smaller = sa.min(sf);
        if smaller < eps {
            skipped += 1;
            continue;
        }
        sum += (sa + sf - saf) / smaller;
        used += 1;
    }
    if used == 0 {
        return Err(Error::AllStepsSkipped { eps });
    }
    Ok(MutualRatio {
        r_bar: sum / used as f64,
        used_samples: used,
        skipped_samples: skipped,
    })
}

/// Pure initial atomic state for the purity-rate formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialAtom {
    Ground,
    Excited,
}

/// Time derivatives `(d Tr(rho_a^2)/dt, d Tr(rho_f^2)/dt)` from the closed
/// double sums over the (truncated) photon distribution.
pub fn purity_rate_exact(initial: InitialAtom, field: &FieldDistribution, t: f64) -> (f64, f64) {
    let p = field.probs();
    let d = p.len();
    let freqs = RabiFrequencies::new(d);
    // P_n with P_{-1} = P_d = 0
    let prob = |n: isize| -> f64 {
        if n < 0 || n as usize >= d {
            0.0
        } else {
            p[n as usize]
        }
    };
    match initial {
        InitialAtom::Ground => {
            let beta = |n: isize| -> f64 {
                if n < 0 || n as usize >= d {
                    0.0
                } else {
                    freqs.beta()[n as usize]
                }
            };
            let mut up_pop = 0.0; // sum P_{n+1} sin^2(beta_{n+1} t)
            let mut up_rate = 0.0; // sum P_{n+1} beta_{n+1} sin(2 beta_{n+1} t)
            let mut down_pop = 0.0; // sum P_n cos^2(beta_n t)
            let mut down_rate = 0.0; // sum P_n beta_n sin(2 beta_n t)
            let mut field_rate = 0.0;
            for n in 0..d as isize {
                let (b0, b1) = (beta(n), beta(n + 1));
                let (p0, p1) = (prob(n), prob(n + 1));
                up_pop += p1 * (b1 * t).sin().powi(2);
                up_rate += p1 * b1 * (2.0 * b1 * t).sin();
                down_pop += p0 * (b0 * t).cos().powi(2);
                down_rate += p0 * b0 * (2.0 * b0 * t).sin();
                let level = p0 * (b0 * t).cos().powi(2) + p1 * (b1 * t).sin().powi(2);
                field_rate +=
                    (p1 * b1 * (2.0 * b1 * t).sin() - p0 * b0 * (2.0 * b0 * t).sin()) * level;
            }
            (
                2.0 * up_pop * up_rate - 2.0 * down_pop * down_rate,
                2.0 * field_rate,
            )
        }
        InitialAtom::Excited => {
            let alpha = |n: isize| -> f64 {
                if n < 0 || n as usize >= d {
                    0.0
                } else {
                    freqs.alpha()[n as usize]
                }
            };
            let mut stay_pop = 0.0; // sum P_n cos^2(alpha_n t)
            let mut stay_rate = 0.0; // sum P_n alpha_n sin(2 alpha_n t)
            let mut emit_pop = 0.0; // sum P_{n-1} sin^2(alpha_{n-1} t)
            let mut emit_rate = 0.0; // sum P_{n-1} alpha_{n-1} sin(2 alpha_{n-1} t)
            let mut field_rate = 0.0;
            for n in 0..d as isize {
                let (a0, am) = (alpha(n), alpha(n - 1));
                let (p0, pm) = (prob(n), prob(n - 1));
                stay_pop += p0 * (a0 * t).cos().powi(2);
                stay_rate += p0 * a0 * (2.0 * a0 * t).sin();
                emit_pop += pm * (am * t).sin().powi(2);
                emit_rate += pm * am * (2.0 * am * t).sin();
                let level = p0 * (a0 * t).cos().powi(2) + pm * (am * t).sin().powi(2);
                field_rate +=
                    (pm * am * (2.0 * am * t).sin() - p0 * a0 * (2.0 * a0 * t).sin()) * level;
            }
            (
                -2.0 * stay_rate * stay_pop + 2.0 * emit_pop * emit_rate,
                2.0 * field_rate,
            )
        }
    }
}

/// Leading `P_i P_j` term of [`purity_rate_exact`] for a weak thermal field.
/// Ground: `-/+ 2 P_0 P_1 sin(2t)`; excited: `-P_0^2 sin(4t)` for both.
pub fn purity_rate_approx(initial: InitialAtom, n_bar: f64, t: f64) -> (f64, f64) {
    let p0 = 1.0 / (n_bar + 1.0);
    let p1 = p0 * n_bar / (n_bar + 1.0);
    match initial {
        InitialAtom::Ground => {
            // beta_1 = 1
            let rate = 2.0 * p0 * p1 * (2.0 * t).sin();
            (-rate, rate)
        }
        InitialAtom::Excited => {
            // alpha_0 = 1
            let rate = -p0 * p0 * (4.0 * t).sin();
            (rate, rate)
        }
    }
}
