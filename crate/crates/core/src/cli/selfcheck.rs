use std::io::Write;

use num_complex::Complex64;

use crate::dynamics::{build_propagator, diagonal_evolve, evolve, excitation_expectation};
use crate::entanglement::partial_transpose;
use crate::entropy::{purity_rate_approx, von_neumann, InitialAtom};
use crate::linalg::{hermitian_eig, ComplexMatrix};
use crate::states::{
    auto_truncate, bloch_qubit, diagonal_qubit, partial_trace, product_state, thermal_field,
    BlochParams, DensityMatrix, Dims, Subsystem,
};
use crate::Result;

/// Inputs for the built-in invariant suite. Tests may corrupt a field to
/// check that the matching check fails.
#[derive(Debug, Clone)]
pub struct Fixtures {
    pub n_bar: f64,
    pub n_f: usize,
    pub times: Vec<f64>,
    pub mixed_atom: BlochParams,
    pub pure_atom: BlochParams,
    /// Pure field amplitudes, padded with zeros to `n_f + 2`.
    pub pure_field: Vec<Complex64>,
    pub diagonal_p_e: f64,
    pub fixed_point_p_e: f64,
    pub hermitian: ComplexMatrix,
    pub thermal_n_bars: Vec<f64>,
}

impl Default for Fixtures {
    fn default() -> Self {
        let c = Complex64::new;
        Self {
            n_bar: 0.1,
            n_f: 13,
            times: vec![0.0, 0.37, 1.9, 7.3, 24.1],
            mixed_atom: BlochParams::new(0.7, 0.4, 1.1).expect("valid fixture"),
            pure_atom: BlochParams::new(1.0, -0.3, 2.0).expect("valid fixture"),
            pure_field: vec![c(0.8, 0.0), c(0.3, 0.4), c(0.0, -0.2), c(0.1, 0.05)],
            diagonal_p_e: 0.3,
            fixed_point_p_e: 1.0 / 12.0,
            hermitian: ComplexMatrix::from_fn(6, |i, j| {
                let (a, b) = (i as f64, j as f64);
                if i == j {
                    c(1.0 + a * 0.5, 0.0)
                } else {
                    let re = 0.3 / (1.0 + (a - b).abs()) + 0.01 * a * b;
                    let im = 0.2 * (a - b) / (1.0 + a + b);
                    c(re, im)
                }
            }),
            thermal_n_bars: vec![0.1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub error: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.residual <= self.tolerance
    }
}

type Check = (&'static str, f64, fn(&Fixtures) -> Result<f64>);

const CHECKS: &[Check] = &[
    ("eigen_reconstruction", 1e-12, eigen_reconstruction),
    ("propagator_unitarity", 1e-12, propagator_unitarity),
    ("trace_preservation", 1e-12, trace_preservation),
    ("excitation_conservation", 1e-12, excitation_conservation),
    ("joint_entropy_invariance", 1e-10, joint_entropy_invariance),
    ("schmidt_equality", 1e-10, schmidt_equality),
    ("oracle_equivalence", 1e-10, oracle_equivalence),
    ("ppt_trace", 1e-12, ppt_trace),
    ("fixed_point_stationarity", 1e-9, fixed_point_stationarity),
    (
        "thermal_entropy_closed_form",
        1e-10,
        thermal_entropy_closed_form,
    ),
    ("purity_rate_antisymmetry", 1e-15, purity_rate_antisymmetry),
];

pub fn run_checks(fx: &Fixtures) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, tolerance, check)| match check(fx) {
            Ok(residual) => CheckOutcome {
                name,
                residual,
                tolerance,
                error: None,
            },
            Err(e) => CheckOutcome {
                name,
                residual: f64::INFINITY,
                tolerance,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// Prints one line per check; returns whether all passed.
pub fn report(outcomes: &[CheckOutcome], out: &mut dyn Write) -> std::io::Result<bool> {
    for o in outcomes {
        let verdict = if o.passed() { "PASS" } else { "FAIL" };
        write!(
            out,
            "{verdict} {:<28} residual={:.3e} tol={:.0e}",
            o.name, o.residual, o.tolerance
        )?;
        if let Some(e) = &o.error {
            write!(out, " error={e}")?;
        }
        writeln!(out)?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    writeln!(out, "{} checks, {} failed", outcomes.len(), failed)?;
    Ok(failed == 0)
}

fn max_over<I: IntoIterator<Item = Result<f64>>>(it: I) -> Result<f64> {
    it.into_iter().try_fold(0.0_f64, |acc, r| Ok(acc.max(r?)))
}

fn mixed_product(fx: &Fixtures) -> Result<DensityMatrix> {
    let field = thermal_field(fx.n_bar, fx.n_f)?;
    product_state(&bloch_qubit(fx.mixed_atom), &field.density())
}

fn pure_product(fx: &Fixtures) -> Result<DensityMatrix> {
    let d = fx.n_f + 2;
    let mut amps = fx.pure_field.clone();
    amps.resize(d, Complex64::new(0.0, 0.0));
    let field = DensityMatrix::from_pure(&amps, Dims::Single(d))?;
    product_state(&bloch_qubit(fx.pure_atom), &field)
}

fn eigen_reconstruction(fx: &Fixtures) -> Result<f64> {
    let h = &fx.hermitian;
    let eig = hermitian_eig(h, true)?;
    let v = eig.vectors.expect("vectors requested");
    let lambda = ComplexMatrix::from_real_diag(&eig.values);
    let rebuilt = v.matmul(&lambda)?.matmul(&v.adjoint())?;
    Ok(rebuilt.max_abs_diff(h) / h.frobenius_norm().max(1.0))
}

fn propagator_unitarity(fx: &Fixtures) -> Result<f64> {
    max_over(
        fx.times
            .iter()
            .map(|&t| Ok(build_propagator(fx.n_f, t)?.unitarity_residual())),
    )
}

fn trace_preservation(fx: &Fixtures) -> Result<f64> {
    let rho0 = mixed_product(fx)?;
    max_over(
        fx.times
            .iter()
            .map(|&t| Ok((evolve(&rho0, t)?.trace() - 1.0).abs())),
    )
}

fn excitation_conservation(fx: &Fixtures) -> Result<f64> {
    let rho0 = mixed_product(fx)?;
    let n0 = excitation_expectation(&rho0)?;
    max_over(
        fx.times
            .iter()
            .map(|&t| Ok((excitation_expectation(&evolve(&rho0, t)?)? - n0).abs())),
    )
}

fn joint_entropy_invariance(fx: &Fixtures) -> Result<f64> {
    let rho0 = mixed_product(fx)?;
    let s0 = von_neumann(&rho0)?;
    max_over(
        fx.times
            .iter()
            .map(|&t| Ok((von_neumann(&evolve(&rho0, t)?)? - s0).abs())),
    )
}

fn schmidt_equality(fx: &Fixtures) -> Result<f64> {
    let rho0 = pure_product(fx)?;
    max_over(fx.times.iter().map(|&t| {
        let rho = evolve(&rho0, t)?;
        let sa = von_neumann(&partial_trace(&rho, Subsystem::Atom)?)?;
        let sf = von_neumann(&partial_trace(&rho, Subsystem::Field)?)?;
        Ok((sa - sf).abs())
    }))
}

fn oracle_equivalence(fx: &Fixtures) -> Result<f64> {
    let field = thermal_field(fx.n_bar, fx.n_f)?;
    let rho0 = product_state(&diagonal_qubit(fx.diagonal_p_e)?, &field.density())?;
    max_over(fx.times.iter().map(|&t| {
        let oracle = diagonal_evolve(fx.diagonal_p_e, &field, t)?;
        let rho = evolve(&rho0, t)?;
        let atom = partial_trace(&rho, Subsystem::Atom)?;
        let fld = partial_trace(&rho, Subsystem::Field)?;
        let atom_dev = atom
            .matrix()
            .max_abs_diff(&ComplexMatrix::from_real_diag(&oracle.atom));
        let field_dev = fld
            .matrix()
            .max_abs_diff(&ComplexMatrix::from_real_diag(&oracle.field));
        Ok(atom_dev.max(field_dev))
    }))
}

fn ppt_trace(fx: &Fixtures) -> Result<f64> {
    let rho0 = mixed_product(fx)?;
    max_over(fx.times.iter().map(|&t| {
        let pt = partial_transpose(&evolve(&rho0, t)?)?;
        Ok((pt.trace() - 1.0).norm().max(pt.hermitian_residual()))
    }))
}

fn fixed_point_stationarity(fx: &Fixtures) -> Result<f64> {
    let field = thermal_field(fx.n_bar, fx.n_f)?;
    let rho0 = product_state(&diagonal_qubit(fx.fixed_point_p_e)?, &field.density())?;
    let sa0 = von_neumann(&partial_trace(&rho0, Subsystem::Atom)?)?;
    let sf0 = von_neumann(&partial_trace(&rho0, Subsystem::Field)?)?;
    max_over(fx.times.iter().map(|&t| {
        let rho = evolve(&rho0, t)?;
        let sa = von_neumann(&partial_trace(&rho, Subsystem::Atom)?)?;
        let sf = von_neumann(&partial_trace(&rho, Subsystem::Field)?)?;
        Ok((sa - sa0).abs().max((sf - sf0).abs()))
    }))
}

fn thermal_entropy_closed_form(fx: &Fixtures) -> Result<f64> {
    max_over(fx.thermal_n_bars.iter().map(|&n| {
        let field = thermal_field(n, auto_truncate(n, 1e-14)?)?;
        let s = von_neumann(&field.density())?;
        let exact = (n + 1.0) * (n + 1.0).ln() - n * n.ln();
        Ok((s - exact).abs())
    }))
}

fn purity_rate_antisymmetry(fx: &Fixtures) -> Result<f64> {
    Ok(fx
        .times
        .iter()
        .map(|&t| {
            let (a, f) = purity_rate_approx(InitialAtom::Ground, fx.n_bar, t);
            (a + f).abs()
        })
        .fold(0.0, f64::max))
}
