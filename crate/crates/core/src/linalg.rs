//! Dense complex matrices and a Hermitian eigensolver.
//!
//! Every operator in the simulator (ladder operators, propagators, density
//! matrices, partial transposes) lives in a [`ComplexMatrix`]. Dimensions stay
//! small (a few hundred at most), so everything is dense and row-major.
//!
//! The eigensolver reduces a Hermitian matrix to real symmetric tridiagonal
//! form with complex Householder reflections, strips the remaining phases with
//! a diagonal unitary, and finishes with implicit-shift QL iterations.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default bound on `max |H - H^dagger|` accepted by [`hermitian_eig`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default QL iteration budget per eigenvalue.
pub const MAX_QL_ITERATIONS: usize = 60;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square matrix of complex entries stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from a row-major entry vector.
    pub fn from_entries(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite {
                operation: "from_entries",
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        m
    }

    /// Rank-one projector `|psi><psi|`.
    pub fn outer(psi: &[Complex64]) -> Self {
        Self::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Matrix product. Zero entries of `self` are skipped, which makes the
    /// product cheap when the left factor is sparse (propagators are).
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.entries[k * n..(k + 1) * n];
                for (o, b) in row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            dim: n,
            entries: out,
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest elementwise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.dim, rhs.dim, "max_abs_diff on mismatched dimensions");
        self.entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |H - H^dagger|` over all entries.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `(H + H^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4e}{:+.4e}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Kronecker product: block `(i, j)` of the result is `a[i, j] * b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim, b.dim);
    let n = da * db;
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..da {
        for j in 0..da {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k, j * db + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Knobs for [`hermitian_eig_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigConfig {
    pub hermitian_tol: f64,
    pub max_iterations: usize,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            hermitian_tol: HERMITIAN_TOL,
            max_iterations: MAX_QL_ITERATIONS,
        }
    }
}

/// Eigenvalues in ascending order, with eigenvectors as the columns of
/// `vectors` when they were requested.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Option<ComplexMatrix>,
}

pub fn hermitian_eig(h: &ComplexMatrix, want_vectors: bool) -> Result<Eigen> {
    hermitian_eig_with(h, want_vectors, &EigConfig::default())
}

pub fn hermitian_eigenvalues(h: &ComplexMatrix) -> Result<Vec<f64>> {
    hermitian_eig(h, false).map(|e| e.values)
}

pub fn hermitian_eig_with(h: &ComplexMatrix, want_vectors: bool, cfg: &EigConfig) -> Result<Eigen> {
    let residual = h.hermitian_residual();
    if residual > cfg.hermitian_tol || residual.is_nan() {
        return Err(Error::NotHermitian {
            residual,
            tolerance: cfg.hermitian_tol,
        });
    }
    let n = h.dim;
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: want_vectors.then(|| ComplexMatrix::zeros(0)),
        });
    }

    let mut work = h.hermitian_part();
    let mut q = want_vectors.then(|| ComplexMatrix::identity(n));
    tridiagonalize(&mut work, q.as_mut());

    let mut diag: Vec<f64> = (0..n).map(|k| work[(k, k)].re).collect();
    let mut off = vec![0.0; n];
    let mut phases = vec![ONE; n];
    for k in 0..n.saturating_sub(1) {
        let e = work[(k + 1, k)];
        let modulus = e.norm();
        off[k] = modulus;
        phases[k + 1] = if modulus > 0.0 {
            phases[k] * (e / modulus)
        } else {
            phases[k]
        };
    }

    let mut z = want_vectors.then(|| {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        z
    });
    tridiagonal_ql(&mut diag, &mut off, z.as_deref_mut(), cfg.max_iterations)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();

    let vectors = match (q, z) {
        (Some(q), Some(z)) => {
            // V = Q * diag(phases) * Z, with columns permuted into ascending order.
            let mut v = ComplexMatrix::zeros(n);
            for i in 0..n {
                for (col, &src) in order.iter().enumerate() {
                    let mut acc = ZERO;
                    for k in 0..n {
                        let zk = z[k * n + src];
                        if zk != 0.0 {
                            acc += q[(i, k)] * phases[k] * zk;
                        }
                    }
                    v[(i, col)] = acc;
                }
            }
            Some(v)
        }
        _ => None,
    };

    Ok(Eigen { values, vectors })
}

/// Householder reduction of a Hermitian matrix in place. On return the
/// diagonal and first subdiagonal of `a` hold the (complex) tridiagonal form
/// and `q`, if given, has been right-multiplied by the reflections so that
/// `A = Q T Q^dagger`.
fn tridiagonalize(a: &mut ComplexMatrix, mut q: Option<&mut ComplexMatrix>) {
    let n = a.dim;
    if n < 3 {
        return;
    }
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    for k in 0..n - 2 {
        let lo = k + 1;
        let xnorm = (lo..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = a[(lo, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * xnorm;

        for i in lo..n {
            v[i] = a[(i, k)];
        }
        v[lo] -= alpha;
        let vnorm = (lo..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in &mut v[lo..n] {
            *vi /= vnorm;
        }

        // p = 2 B v on the trailing block B = a[lo.., lo..]
        let e = &mut a.entries;
        for i in lo..n {
            let row = &e[i * n + lo..i * n + n];
            let acc: Complex64 = row.iter().zip(&v[lo..n]).map(|(b, vj)| b * vj).sum();
            p[i] = acc * 2.0;
        }
        // w = p - (v^dagger p) v; v^dagger p is real for Hermitian B
        let vp: Complex64 = (lo..n).map(|i| v[i].conj() * p[i]).sum();
        let vp = vp.re;
        for i in lo..n {
            p[i] -= v[i] * vp;
        }
        // B <- B - v w^dagger - w v^dagger on the lower triangle, then mirror
        for i in lo..n {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut e[i * n + lo..i * n + i + 1];
            for ((b, vj), wj) in row.iter_mut().zip(&v[lo..=i]).zip(&p[lo..=i]) {
                *b -= vi * wj.conj() + wi * vj.conj();
            }
        }
        for i in lo..n {
            for j in i + 1..n {
                e[i * n + j] = e[j * n + i].conj();
            }
        }

        a[(lo, k)] = alpha;
        a[(k, lo)] = alpha.conj();
        for i in lo + 1..n {
            a[(i, k)] = ZERO;
            a[(k, i)] = ZERO;
        }

        if let Some(q) = q.as_deref_mut() {
            // Q <- Q (I - 2 v v^dagger) on columns lo..n
            for r in 0..n {
                let mut qv = ZERO;
                for j in lo..n {
                    qv += q[(r, j)] * v[j];
                }
                qv *= 2.0;
                for j in lo..n {
                    let update = qv * v[j].conj();
                    q[(r, j)] -= update;
                }
            }
        }
    }
}

/// `sqrt(a^2 + b^2)`, falling back to `hypot` when the squares leave the normal range.
#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    let sq = a * a + b * b;
    if sq.is_finite() && sq >= f64::MIN_POSITIVE {
        sq.sqrt()
    } else {
        a.hypot(b)
    }
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix. `off[i]` couples
/// rows `i` and `i + 1`. When `z` is given (row-major `n x n`, initially the
/// identity) its columns accumulate the eigenvectors.
fn tridiagonal_ql(
    diag: &mut [f64],
    off: &mut [f64],
    mut z: Option<&mut [f64]>,
    max_iterations: usize,
) -> Result<()> {
    let n = diag.len();
    if n < 2 {
        return Ok(());
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > max_iterations {
                return Err(Error::NoConvergence {
                    iterations: max_iterations,
                });
            }

            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = pythag(g, 1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = pythag(f, g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let zi1 = z[k * n + i + 1];
                        let zi = z[k * n + i];
                        z[k * n + i + 1] = s * zi + c * zi1;
                        z[k * n + i] = c * zi - s * zi1;
                    }
                }
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[1.0, -1.0])
    }

    fn random_matrix(rng: &mut StdRng, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn random_hermitian(rng: &mut StdRng, n: usize) -> ComplexMatrix {
        random_matrix(rng, n).hermitian_part()
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let k = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3));
        assert_eq!(k, ComplexMatrix::identity(6));
    }

    #[test]
    fn kron_sigma_z_identity() {
        let k = kron(&sigma_z(), &ComplexMatrix::identity(2));
        assert_eq!(k, ComplexMatrix::from_real_diag(&[1.0, 1.0, -1.0, -1.0]));
    }

    #[test]
    fn kron_trace_factorizes() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 3);
        let b = random_matrix(&mut rng, 3);
        let k = kron(&a, &b);
        // oracle: explicit block sum of a_ii * b_jj
        let mut expected = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                expected += a[(i, i)] * b[(j, j)];
            }
        }
        assert!((k.trace() - expected).norm() < 1e-13);
        assert!((k.trace() - a.trace() * b.trace()).norm() < 1e-13);
    }

    #[test]
    fn kron_is_associative() {
        let mut rng = StdRng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 2);
        let b = random_matrix(&mut rng, 3);
        let cm = random_matrix(&mut rng, 2);
        let left = kron(&kron(&a, &b), &cm);
        let right = kron(&a, &kron(&b, &cm));
        assert!(left.max_abs_diff(&right) < 1e-13);
    }

    #[test]
    fn trace_and_identity_products() {
        assert_eq!(ComplexMatrix::identity(4).trace(), c(4.0, 0.0));
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 5);
        assert_eq!(a.matmul(&ComplexMatrix::identity(5)).unwrap(), a);
    }

    #[test]
    fn trace_is_cyclic() {
        let mut rng = StdRng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 5);
        let b = random_matrix(&mut rng, 5);
        let ab = a.matmul(&b).unwrap().trace();
        let ba = b.matmul(&a).unwrap().trace();
        assert!((ab - ba).norm() < 1e-12);
    }

    #[test]
    fn adjoint_is_an_involution() {
        let mut rng = StdRng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 4);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn matmul_rejects_mismatched_dims() {
        let err = ComplexMatrix::identity(2)
            .matmul(&ComplexMatrix::identity(3))
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn from_entries_checks_length_and_finiteness() {
        assert!(ComplexMatrix::from_entries(2, vec![ONE; 3]).is_err());
        let bad = vec![ONE, ZERO, ZERO, c(f64::NAN, 0.0)];
        assert!(matches!(
            ComplexMatrix::from_entries(2, bad),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn eig_sigma_z() {
        let e = hermitian_eig(&sigma_z(), false).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
    }

    #[test]
    fn eig_sorts_diagonal() {
        let e = hermitian_eig(&ComplexMatrix::from_real_diag(&[3.0, 1.0, 2.0]), false).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eig_of_real_diagonal_is_exact() {
        let d = [0.3, -2.5, 7.25, 1e-9, 0.0, 4.0];
        let e = hermitian_eig(&ComplexMatrix::from_real_diag(&d), false).unwrap();
        let mut sorted = d.to_vec();
        sorted.sort_by(f64::total_cmp);
        for (a, b) in e.values.iter().zip(&sorted) {
            assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = StdRng::seed_from_u64(42);
        let h = random_hermitian(&mut rng, 8);
        let e = hermitian_eig(&h, true).unwrap();
        let v = e.vectors.unwrap();
        let lambda = ComplexMatrix::from_real_diag(&e.values);
        let rebuilt = v.matmul(&lambda).unwrap().matmul(&v.adjoint()).unwrap();
        assert!(rebuilt.sub(&h).unwrap().frobenius_norm() < 1e-9);
        let vhv = v.adjoint().matmul(&h).unwrap().matmul(&v).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert!(vhv[(i, j)].norm() < 1e-9);
                }
            }
        }
        let sum: f64 = e.values.iter().sum();
        assert!((sum - h.trace().re).abs() < 1e-10 * 8.0);
    }

    #[test]
    fn eig_handles_degenerate_spectra() {
        // Bell-like projector embedded in 6 dims: eigenvalues (0 x5, 1)
        let s = 0.5_f64.sqrt();
        let mut psi = vec![ZERO; 6];
        psi[0] = c(s, 0.0);
        psi[4] = c(0.0, s);
        let h = ComplexMatrix::outer(&psi);
        let e = hermitian_eig(&h, true).unwrap();
        assert!((e.values[5] - 1.0).abs() < 1e-14);
        assert!(e.values[..5].iter().all(|x| x.abs() < 1e-14));
        let v = e.vectors.unwrap();
        let vv = v.adjoint().matmul(&v).unwrap();
        assert!(vv.max_abs_diff(&ComplexMatrix::identity(6)) < 1e-13);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = c(1.0, 0.0);
        let err = hermitian_eig(&m, false).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn eig_reports_no_convergence_on_zero_budget() {
        let mut rng = StdRng::seed_from_u64(1);
        let h = random_hermitian(&mut rng, 5);
        let cfg = EigConfig {
            max_iterations: 0,
            ..EigConfig::default()
        };
        let err = hermitian_eig_with(&h, false, &cfg).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }
}
