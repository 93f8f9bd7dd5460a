//! Dense Hermitian-operator algebra on small Hilbert spaces.
//!
//! Everything here works for arbitrary dimension; the two-level case takes a
//! closed-form eigensolver so that qubit spectra are exact to rounding.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

const HERMITIAN_TOL: f64 = 1e-12;
const GAP_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-14;
const LOGMEAN_SWITCH: f64 = 1e-3;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A square complex matrix acting on a `d`-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(DMatrix<C64>);

impl OperatorMatrix {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(invalid(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self(m))
    }

    /// Row-major construction.
    pub fn from_rows(d: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(invalid(format!(
                "expected {} entries, got {}",
                d * d,
                entries.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(d, d, entries))
    }

    pub fn from_real_rows(d: usize, entries: &[f64]) -> Result<Self> {
        let e: Vec<C64> = entries.iter().map(|&x| r(x)).collect();
        Self::from_rows(d, &e)
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn sigma_x() -> Self {
        Self(DMatrix::from_row_slice(
            2,
            2,
            &[r(0.0), r(1.0), r(1.0), r(0.0)],
        ))
    }

    pub fn sigma_y() -> Self {
        Self(DMatrix::from_row_slice(
            2,
            2,
            &[r(0.0), c(0.0, -1.0), c(0.0, 1.0), r(0.0)],
        ))
    }

    pub fn sigma_z() -> Self {
        Self(DMatrix::from_row_slice(
            2,
            2,
            &[r(1.0), r(0.0), r(0.0), r(-1.0)],
        ))
    }

    /// `|v><v|` for a (not necessarily normalised) vector.
    pub fn projector(v: &DVector<C64>) -> Self {
        Self(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| (self.0[(i, j)] - self.0[(j, i)].conj()).norm() <= tol))
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// `tr{A B}` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for k in 0..d {
                acc += self.0[(i, k)] * other.0[(k, i)];
            }
        }
        acc
    }

    /// Hermitian part `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()).map(|z| z * 0.5))
    }

    pub fn expectation(&self, rho: &Self) -> C64 {
        self.trace_product(rho)
    }

    /// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
    pub fn eigh(&self) -> Result<SpectralDecomposition> {
        self.require_hermitian()?;
        if self.dim() == 2 {
            Ok(eigh2(&self.0))
        } else {
            Ok(eigh_general(&self.0))
        }
    }

    pub(crate) fn require_hermitian(&self) -> Result<()> {
        let scale = self.max_abs().max(1.0);
        if !self.is_hermitian(HERMITIAN_TOL * scale) {
            return Err(invalid("operator is not Hermitian"));
        }
        if self
            .0
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(invalid("operator has non-finite entries"));
        }
        Ok(())
    }

    /// Checks `rho = rho†`, `tr rho = 1` and `rho >= 0` within `tol`.
    pub fn is_density_matrix(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) || (self.trace() - r(1.0)).norm() > tol {
            return false;
        }
        match self.eigh() {
            Ok(s) => s.values.iter().all(|&p| p >= -tol),
            Err(_) => false,
        }
    }

    fn require_density(&self, what: &str) -> Result<SpectralDecomposition> {
        self.require_hermitian()?;
        if (self.trace() - r(1.0)).norm() > 1e-10 {
            return Err(invalid(format!("{what} does not have unit trace")));
        }
        let s = self.eigh()?;
        if s.values[0] < -1e-10 {
            return Err(invalid(format!("{what} is not positive semidefinite")));
        }
        Ok(s)
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: Self) -> OperatorMatrix {
        OperatorMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: Self) -> OperatorMatrix {
        OperatorMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: Self) -> OperatorMatrix {
        OperatorMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        OperatorMatrix(-&self.0)
    }
}

impl Add for OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: Self) -> OperatorMatrix {
        OperatorMatrix(self.0 + rhs.0)
    }
}

impl Sub for OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: Self) -> OperatorMatrix {
        OperatorMatrix(self.0 - rhs.0)
    }
}

/// `H = V diag(values) V†` with orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V f(Λ) V†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> OperatorMatrix {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (k, &lam) in self.values.iter().enumerate() {
            let fk = f(lam);
            let v = self.vectors.column(k);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += v[i] * v[j].conj() * fk;
                }
            }
        }
        OperatorMatrix(m)
    }

    pub fn reconstruct(&self) -> OperatorMatrix {
        self.apply(|x| x)
    }

    /// `V† A V`.
    pub fn to_eigenbasis(&self, a: &OperatorMatrix) -> DMatrix<C64> {
        self.vectors.adjoint() * a.matrix() * &self.vectors
    }

    /// `V A V†`.
    pub fn from_eigenbasis(&self, a: &DMatrix<C64>) -> OperatorMatrix {
        OperatorMatrix(&self.vectors * a * self.vectors.adjoint())
    }

    /// Smallest adjacent gap divided by the spectral scale.
    pub fn relative_gap(&self) -> f64 {
        let scale = self.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(f64::INFINITY, f64::min)
            / scale
    }
}

fn eigh2(m: &DMatrix<C64>) -> SpectralDecomposition {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let rad = half.hypot(b.norm());
    // The smaller-magnitude root via the determinant keeps its relative accuracy.
    let det = a * d - b.norm_sqr();
    let (lo, hi) = if mean >= 0.0 {
        let hi = mean + rad;
        (if hi != 0.0 { det / hi } else { 0.0 }, hi)
    } else {
        let lo = mean - rad;
        (lo, det / lo)
    };
    // Null vector of M - lo from whichever row is better conditioned.
    let (v0, v1) = if b.norm() == 0.0 {
        if a <= d {
            (r(1.0), r(0.0))
        } else {
            (r(0.0), r(1.0))
        }
    } else {
        let from_row1 = (b, r(lo - a));
        let from_row2 = (r(d - lo), -b.conj());
        let n1 = from_row1.0.norm_sqr() + from_row1.1.norm_sqr();
        let n2 = from_row2.0.norm_sqr() + from_row2.1.norm_sqr();
        if n1 >= n2 {
            from_row1
        } else {
            from_row2
        }
    };
    let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    let (v0, v1) = (v0 / norm, v1 / norm);
    let vectors = DMatrix::from_row_slice(2, 2, &[v0, -v1.conj(), v1, v0.conj()]);
    SpectralDecomposition {
        values: vec![lo, hi],
        vectors,
    }
}

fn eigh_general(m: &DMatrix<C64>) -> SpectralDecomposition {
    let herm = (m + m.adjoint()).map(|z| z * 0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let d = m.nrows();
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    SpectralDecomposition { values, vectors }
}

/// `e^{-βH} / tr e^{-βH}`.
pub fn gibbs_state(h: &OperatorMatrix, beta: f64) -> Result<OperatorMatrix> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(invalid(format!(
            "inverse temperature must be finite and >= 0, got {beta}"
        )));
    }
    let s = h.eigh()?;
    let e_min = s.values[0];
    let z: f64 = s.values.iter().map(|&e| (-beta * (e - e_min)).exp()).sum();
    Ok(s.apply(|e| (-beta * (e - e_min)).exp() / z))
}

/// Projection of `a` onto the commutant of `h`: `Σ_n |n><n|a|n><n|`.
pub fn dephase(a: &OperatorMatrix, h: &OperatorMatrix) -> Result<OperatorMatrix> {
    check_dims(a, h)?;
    let s = h.eigh()?;
    let gap = s.relative_gap();
    if gap < GAP_TOL {
        return Err(Error::Degenerate { gap });
    }
    let at = s.to_eigenbasis(a);
    let diag = DMatrix::from_diagonal(&at.diagonal());
    Ok(s.from_eigenbasis(&diag))
}

/// Logarithmic mean `(a - b)/(ln a - ln b)`, series in `(a-b)/(a+b)` near `a = b`.
pub fn log_mean(a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    let d = (a - b) / (a + b);
    if d.abs() < LOGMEAN_SWITCH {
        let d2 = d * d;
        m / (1.0 + d2 * (1.0 / 3.0 + d2 * (1.0 / 5.0 + d2 / 7.0)))
    } else {
        (a - b) / (a.ln() - b.ln())
    }
}

/// `J_rho(A) = ∫_0^1 rho^s A rho^{1-s} ds`.
pub fn matrix_mean_j(rho: &OperatorMatrix, a: &OperatorMatrix) -> Result<OperatorMatrix> {
    j_map(rho, a, false)
}

/// Inverse of [`matrix_mean_j`].
pub fn matrix_mean_j_inverse(rho: &OperatorMatrix, a: &OperatorMatrix) -> Result<OperatorMatrix> {
    j_map(rho, a, true)
}

fn j_map(rho: &OperatorMatrix, a: &OperatorMatrix, inverse: bool) -> Result<OperatorMatrix> {
    check_dims(rho, a)?;
    let s = rho.require_density("state")?;
    let min_eig = s.values[0];
    if min_eig <= RANK_TOL {
        return Err(Error::RankDeficient { min_eig });
    }
    let mut at = s.to_eigenbasis(a);
    let d = s.dim();
    for i in 0..d {
        for j in 0..d {
            let k = log_mean(s.values[i], s.values[j]);
            at[(i, j)] *= if inverse { 1.0 / k } else { k };
        }
    }
    Ok(s.from_eigenbasis(&at))
}

/// Quantum relative entropy `tr{rho (ln rho - ln sigma)}`.
pub fn relative_entropy(rho: &OperatorMatrix, sigma: &OperatorMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let sr = rho.require_density("rho")?;
    let ss = sigma.require_density("sigma")?;
    if ss.values[0] <= RANK_TOL {
        return Err(Error::Divergence {
            min_eig: ss.values[0],
        });
    }
    let neg_entropy: f64 = sr
        .values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum();
    let ln_sigma = ss.apply(f64::ln);
    let cross = rho.trace_product(&ln_sigma).re;
    Ok((neg_entropy - cross).max(0.0))
}

/// Petz–Rényi divergence `ln tr{rho^α sigma^{1-α}} / (α - 1)`.
pub fn renyi_divergence(rho: &OperatorMatrix, sigma: &OperatorMatrix, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid(format!(
            "Renyi order must be positive, got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return relative_entropy(rho, sigma);
    }
    check_dims(rho, sigma)?;
    let sr = rho.require_density("rho")?;
    let ss = sigma.require_density("sigma")?;
    if ss.values[0] <= RANK_TOL {
        return Err(Error::Divergence {
            min_eig: ss.values[0],
        });
    }
    let ra = sr.apply(|p| if p > 0.0 { p.powf(alpha) } else { 0.0 });
    let sa = ss.apply(|p| p.powf(1.0 - alpha));
    let tr = ra.trace_product(&sa).re;
    if tr <= 0.0 {
        return Err(Error::Divergence { min_eig: tr });
    }
    Ok(tr.ln() / (alpha - 1.0))
}

fn check_dims(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn qubit_h(eps: f64, theta: f64) -> OperatorMatrix {
        OperatorMatrix::sigma_z().scale(0.5 * eps * theta.cos())
            + OperatorMatrix::sigma_x().scale(0.5 * eps * theta.sin())
    }

    fn random_hermitian(d: usize, entries: &[f64]) -> OperatorMatrix {
        let mut m = DMatrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            m[(i, i)] = r(entries[k]);
            k += 1;
            for j in (i + 1)..d {
                let z = c(entries[k], entries[k + 1]);
                k += 2;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        OperatorMatrix(m)
    }

    #[test]
    fn gibbs_of_sigma_z() {
        let beta = 20.0;
        let pi = gibbs_state(&qubit_h(1.0, 0.0), beta).unwrap();
        let pe = 1.0 / (1.0 + (beta * 1.0).exp());
        assert_relative_eq!(pi.get(0, 0).re, pe, max_relative = 1e-12);
        assert_relative_eq!(pi.get(1, 1).re, 1.0 - pe, max_relative = 1e-12);
        assert!(pi.get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn gibbs_at_infinite_temperature_is_maximally_mixed() {
        let pi = gibbs_state(&qubit_h(0.7, 1.1), 0.0).unwrap();
        assert!((&pi - &OperatorMatrix::identity(2).scale(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn dephase_sigma_x_in_z_basis_vanishes() {
        let out = dephase(&OperatorMatrix::sigma_x(), &OperatorMatrix::sigma_z()).unwrap();
        assert!(out.max_abs() < 1e-15);
    }

    #[test]
    fn dephase_rejects_degenerate_hamiltonian() {
        let err = dephase(&OperatorMatrix::sigma_x(), &OperatorMatrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
    }

    #[test]
    fn j_of_commuting_operator_is_product() {
        let pi = gibbs_state(&qubit_h(1.0, 0.0), 3.0).unwrap();
        let a = OperatorMatrix::sigma_z();
        let j = matrix_mean_j(&pi, &a).unwrap();
        assert!((&j - &(&pi * &a)).max_abs() < 1e-14);
    }

    #[test]
    fn j_rejects_pure_state() {
        let rho = OperatorMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let err = matrix_mean_j(&rho, &OperatorMatrix::sigma_x()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn relative_entropy_of_state_with_itself_is_zero() {
        let pi = gibbs_state(&qubit_h(1.0, 0.4), 2.0).unwrap();
        assert!(relative_entropy(&pi, &pi).unwrap().abs() < 1e-14);
    }

    #[test]
    fn relative_entropy_against_pure_state_diverges() {
        let rho = gibbs_state(&qubit_h(1.0, 0.0), 1.0).unwrap();
        let pure = OperatorMatrix::from_real_rows(2, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            relative_entropy(&rho, &pure),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn renyi_order_one_is_relative_entropy() {
        let rho = gibbs_state(&qubit_h(1.0, 0.4), 2.0).unwrap();
        let sigma = gibbs_state(&qubit_h(0.6, -0.3), 1.5).unwrap();
        let s1 = renyi_divergence(&rho, &sigma, 1.0).unwrap();
        assert_eq!(s1, relative_entropy(&rho, &sigma).unwrap());
        let near = renyi_divergence(&rho, &sigma, 1.0 + 1e-6).unwrap();
        assert_relative_eq!(near, s1, max_relative = 1e-4);
    }

    #[test]
    fn renyi_rejects_nonpositive_order() {
        let pi = gibbs_state(&qubit_h(1.0, 0.4), 2.0).unwrap();
        assert!(renyi_divergence(&pi, &pi, 0.0).is_err());
    }

    #[test]
    fn general_eigensolver_handles_three_levels() {
        let h = random_hermitian(3, &[0.3, 0.1, 0.2, -0.4, 0.5, 1.2, 0.0, 0.7, -0.9]);
        let s = h.eigh().unwrap();
        assert!((&s.reconstruct() - &h).max_abs() < 1e-13);
        let gram = s.vectors.adjoint() * &s.vectors;
        assert!((gram - DMatrix::<C64>::identity(3, 3))
            .iter()
            .all(|z| z.norm() < 1e-13));
    }

    proptest! {
        #[test]
        fn qubit_eigh_is_orthonormal_and_exact(e in prop::collection::vec(-3.0f64..3.0, 4)) {
            let h = random_hermitian(2, &e);
            let s = h.eigh().unwrap();
            let gram = s.vectors.adjoint() * &s.vectors;
            for i in 0..2 {
                for j in 0..2 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((gram[(i, j)] - r(target)).norm() < 1e-12);
                }
            }
            prop_assert!((&s.reconstruct() - &h).max_abs() < 1e-12 * h.max_abs().max(1.0));
            prop_assert!(s.values[0] <= s.values[1]);
        }

        #[test]
        fn gibbs_is_density_matrix(eps in 0.01f64..5.0, th in -3.2f64..3.2, beta in 0.0f64..50.0) {
            let pi = gibbs_state(&qubit_h(eps, th), beta).unwrap();
            prop_assert!(pi.is_density_matrix(1e-12));
        }

        #[test]
        fn j_preserves_hermiticity_and_trace(
            eps in 0.05f64..3.0, th in -3.0f64..3.0, beta in 0.1f64..3.0,
            a in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let pi = gibbs_state(&qubit_h(eps, th), beta).unwrap();
            let op = random_hermitian(2, &a);
            let j = matrix_mean_j(&pi, &op).unwrap();
            prop_assert!(j.is_hermitian(1e-12));
            prop_assert!((j.trace() - op.trace_product(&pi)).norm() < 1e-12);
            let back = matrix_mean_j_inverse(&pi, &j).unwrap();
            prop_assert!((&back - &op).max_abs() < 1e-9 * op.max_abs().max(1.0));
        }

        #[test]
        fn relative_entropy_nonnegative(
            e1 in 0.05f64..3.0, t1 in -3.0f64..3.0, b1 in 0.1f64..5.0,
            e2 in 0.05f64..3.0, t2 in -3.0f64..3.0, b2 in 0.1f64..5.0,
        ) {
            let rho = gibbs_state(&qubit_h(e1, t1), b1).unwrap();
            let sigma = gibbs_state(&qubit_h(e2, t2), b2).unwrap();
            prop_assert!(relative_entropy(&rho, &sigma).unwrap() >= 0.0);
        }

        #[test]
        fn log_mean_matches_long_series(a in 1e-6f64..1.0, x in -0.05f64..0.05) {
            let b = a * (1.0 + x);
            let d = (a - b) / (a + b);
            let denom: f64 = (0..8).map(|k| d.powi(2 * k) / (2 * k + 1) as f64).sum();
            let oracle = 0.5 * (a + b) / denom;
            prop_assert!((log_mean(a, b) - oracle).abs() <= 1e-12 * oracle);
        }
    }
}
