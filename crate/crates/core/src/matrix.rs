//! Dense square matrices over `f64` and over exact rationals.
//!
//! [`StochMatrix`] is the workhorse for transition matrices; [`RatMatrix`]
//! mirrors the operations needed for exact-arithmetic checks. Both implement
//! [`MatrixAlgebra`], so signed-sum evaluators can run in either mode.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub const STOCH_TOL: f64 = 1e-9;

/// Operations shared by the float and rational matrix types.
pub trait MatrixAlgebra: Clone {
    fn identity(w: usize) -> Self;
    fn zeros(w: usize) -> Self;
    fn order(&self) -> usize;
    fn mul(&self, rhs: &Self) -> Self;
    /// `self += sign * rhs`.
    fn add_signed(&mut self, rhs: &Self, sign: i64);
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochMatrix {
    m: DMatrix<f64>,
}

impl StochMatrix {
    pub fn zeros(w: usize) -> Self {
        StochMatrix { m: DMatrix::zeros(w, w) }
    }

    pub fn identity(w: usize) -> Self {
        StochMatrix { m: DMatrix::identity(w, w) }
    }

    /// All entries 1/w.
    pub fn uniform(w: usize) -> Self {
        StochMatrix { m: DMatrix::from_element(w, w, 1.0 / w as f64) }
    }

    pub fn from_fn(w: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        StochMatrix { m: DMatrix::from_fn(w, w, f) }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let w = rows.len();
        if rows.iter().any(|r| r.len() != w) {
            return Err(Error::Dimension("rows must form a square matrix".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Param("non-finite entry".into()));
        }
        Ok(Self::from_fn(w, |i, j| rows[i][j]))
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        Ok(StochMatrix { m })
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn order(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[(i, j)] = v;
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.m[(i, j)] += v;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.order()).map(|j| self.m[(i, j)]).collect()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.order())
            .map(|i| (0..self.order()).map(|j| self.m[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn entrywise_max(&self) -> f64 {
        self.m.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn transpose(&self) -> Self {
        StochMatrix { m: self.m.transpose() }
    }

    pub fn scale(&self, c: f64) -> Self {
        StochMatrix { m: &self.m * c }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.order(), rhs.order(), "order mismatch");
        StochMatrix { m: &self.m - &rhs.m }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.order(), rhs.order(), "order mismatch");
        StochMatrix { m: &self.m + &rhs.m }
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.order() != rhs.order() {
            return Err(Error::Dimension(format!("{} vs {}", self.order(), rhs.order())));
        }
        Ok(StochMatrix { m: &self.m * &rhs.m })
    }

    /// Left-to-right product; an empty sequence is an error since the order is unknown.
    pub fn product(ms: &[StochMatrix]) -> Result<Self> {
        let first = ms.first().ok_or_else(|| Error::Dimension("empty product".into()))?;
        let mut acc = first.clone();
        for m in &ms[1..] {
            acc = acc.try_mul(m)?;
        }
        Ok(acc)
    }

    /// `u^T M v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let w = self.order();
        let mut s = 0.0;
        for i in 0..w {
            if u[i] == 0.0 {
                continue;
            }
            let mut r = 0.0;
            for j in 0..w {
                r += self.m[(i, j)] * v[j];
            }
            s += u[i] * r;
        }
        s
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        let w = self.order();
        (0..w).all(|i| {
            (0..w).all(|j| self.m[(i, j)] >= -tol)
                && ((0..w).map(|j| self.m[(i, j)]).sum::<f64>() - 1.0).abs() <= tol
        })
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.is_row_stochastic(tol) && self.transpose().is_row_stochastic(tol)
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        self.sub(rhs).entrywise_max()
    }
}

impl MatrixAlgebra for StochMatrix {
    fn identity(w: usize) -> Self {
        StochMatrix::identity(w)
    }
    fn zeros(w: usize) -> Self {
        StochMatrix::zeros(w)
    }
    fn order(&self) -> usize {
        self.m.nrows()
    }
    fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.m.ncols(), rhs.m.nrows(), "order mismatch");
        StochMatrix { m: &self.m * &rhs.m }
    }
    fn add_signed(&mut self, rhs: &Self, sign: i64) {
        if sign != 0 {
            self.m += &rhs.m * (sign as f64);
        }
    }
}

/// `sqrt(x^T A x)`; `A` is expected to be PSD.
pub fn psd_norm(x: &[f64], a: &StochMatrix) -> f64 {
    a.bilinear(x, x).max(0.0).sqrt()
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Smallest ε ≥ 0 with `|y^T (Wt − W) x| ≤ (ε/4)(‖x‖²_{I−WᵀW} + ‖y‖²_{I−WWᵀ})`
/// for all x, y.
///
/// The quantified inequality holds iff the block matrix
/// `[[ (ε/4)(I−WWᵀ), ±Δ/2 ], [ ±Δᵀ/2, (ε/4)(I−WᵀW) ]]` is PSD (expand the
/// quadratic form at `(y, x)`), so ε is found by bisection on that test.
/// Returns `f64::INFINITY` when Δ does not vanish on the null spaces of the
/// two Gram deficiencies, since then no finite ε works.
pub fn sv_approx_error(wt: &StochMatrix, w: &StochMatrix) -> Result<f64> {
    if wt.order() != w.order() {
        return Err(Error::Dimension(format!("{} vs {}", wt.order(), w.order())));
    }
    if !wt.is_doubly_stochastic(STOCH_TOL) || !w.is_doubly_stochastic(STOCH_TOL) {
        return Err(Error::NotDoublyStochastic);
    }
    let n = w.order();
    let wm = w.as_dmatrix();
    let delta = wt.as_dmatrix() - wm;
    if delta.iter().all(|v| v.abs() <= 1e-14) {
        return Ok(0.0);
    }
    let id = DMatrix::<f64>::identity(n, n);
    let p = &id - wm.transpose() * wm; // acts on x
    let q = &id - wm * wm.transpose(); // acts on y

    // Null-space test.
    let null_tol = 1e-9;
    let resid_tol = 1e-8;
    let ep = SymmetricEigen::new(p.clone());
    for (k, ev) in ep.eigenvalues.iter().enumerate() {
        if ev.abs() < null_tol {
            let v = ep.eigenvectors.column(k);
            if (&delta * v).norm() > resid_tol {
                return Ok(f64::INFINITY);
            }
        }
    }
    let eq = SymmetricEigen::new(q.clone());
    for (k, ev) in eq.eigenvalues.iter().enumerate() {
        if ev.abs() < null_tol {
            let u = eq.eigenvectors.column(k);
            if (delta.transpose() * u).norm() > resid_tol {
                return Ok(f64::INFINITY);
            }
        }
    }

    let feasible = |eps: f64| -> bool {
        [1.0, -1.0].iter().all(|&sg| {
            let mut z = DMatrix::<f64>::zeros(2 * n, 2 * n);
            z.view_mut((0, 0), (n, n)).copy_from(&(&q * (eps / 4.0)));
            z.view_mut((n, n), (n, n)).copy_from(&(&p * (eps / 4.0)));
            z.view_mut((0, n), (n, n)).copy_from(&(&delta * (sg / 2.0)));
            z.view_mut((n, 0), (n, n)).copy_from(&(delta.transpose() * (sg / 2.0)));
            min_eigenvalue(z) >= -1e-9
        })
    };
    let mut hi = 1.0;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > 1e18 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Dense square matrix of exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatMatrix {
    w: usize,
    e: Vec<BigRational>,
}

impl RatMatrix {
    pub fn zeros(w: usize) -> Self {
        RatMatrix { w, e: vec![BigRational::zero(); w * w] }
    }

    pub fn identity(w: usize) -> Self {
        let mut m = Self::zeros(w);
        for i in 0..w {
            m.e[i * w + i] = BigRational::one();
        }
        m
    }

    pub fn order(&self) -> usize {
        self.w
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.e[i * self.w + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigRational) {
        self.e[i * self.w + j] = v;
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: &BigRational) {
        self.e[i * self.w + j] += v;
    }

    /// Exact conversion of a float matrix (every finite double is a dyadic rational).
    pub fn from_f64(m: &StochMatrix) -> Self {
        let w = m.order();
        let mut r = Self::zeros(w);
        for i in 0..w {
            for j in 0..w {
                r.set(i, j, BigRational::from_float(m.get(i, j)).expect("finite entry"));
            }
        }
        r
    }

    pub fn to_f64(&self) -> StochMatrix {
        use num_traits::ToPrimitive;
        StochMatrix::from_fn(self.w, |i, j| self.get(i, j).to_f64().unwrap_or(f64::NAN))
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        let one = BigRational::one();
        (0..self.w).all(|i| {
            let mut r = BigRational::zero();
            let mut c = BigRational::zero();
            for j in 0..self.w {
                if self.get(i, j).is_negative() || self.get(j, i).is_negative() {
                    return false;
                }
                r += self.get(i, j);
                c += self.get(j, i);
            }
            r == one && c == one
        })
    }
}

impl MatrixAlgebra for RatMatrix {
    fn identity(w: usize) -> Self {
        RatMatrix::identity(w)
    }
    fn zeros(w: usize) -> Self {
        RatMatrix::zeros(w)
    }
    fn order(&self) -> usize {
        self.w
    }
    fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.w, rhs.w, "order mismatch");
        let w = self.w;
        let mut out = RatMatrix::zeros(w);
        for i in 0..w {
            for k in 0..w {
                let a = &self.e[i * w + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..w {
                    let b = &rhs.e[k * w + j];
                    if !b.is_zero() {
                        out.e[i * w + j] += a * b;
                    }
                }
            }
        }
        out
    }
    fn add_signed(&mut self, rhs: &Self, sign: i64) {
        if sign == 0 {
            return;
        }
        let s = BigRational::from_integer(sign.into());
        for (a, b) in self.e.iter_mut().zip(&rhs.e) {
            if !b.is_zero() {
                *a += &s * b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(p: &[usize]) -> StochMatrix {
        StochMatrix::from_fn(p.len(), |i, j| if p[i] == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn norms() {
        assert_eq!(StochMatrix::identity(3).inf_norm(), 1.0);
        let m = StochMatrix::from_rows(&[vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        assert!((m.inf_norm() - 1.0).abs() < 1e-15);
        assert_eq!(m.entrywise_max(), 1.0);
    }

    #[test]
    fn product_by_hand() {
        let a = StochMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = StochMatrix::from_rows(&[vec![0.0, 1.0], vec![5.0, -1.0]]).unwrap();
        let p = StochMatrix::product(&[a, b]).unwrap();
        assert_eq!(p.row(0), vec![10.0, -1.0]);
        assert_eq!(p.row(1), vec![20.0, -1.0]);
        assert!(StochMatrix::product(&[StochMatrix::identity(2), StochMatrix::identity(3)]).is_err());
    }

    #[test]
    fn doubly_stochastic_checks() {
        assert!(perm(&[2, 0, 1]).is_doubly_stochastic(1e-9));
        let r = StochMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(r.is_row_stochastic(1e-9));
        assert!(!r.is_doubly_stochastic(1e-9));
        let avg = perm(&[1, 2, 0]).add(&perm(&[0, 2, 1])).add(&perm(&[2, 1, 0])).scale(1.0 / 3.0);
        assert!(avg.is_doubly_stochastic(1e-9));
    }

    #[test]
    fn sv_zero_cases() {
        let j = StochMatrix::uniform(3);
        assert_eq!(sv_approx_error(&j, &j).unwrap(), 0.0);
        let p = perm(&[1, 0, 2]);
        assert_eq!(sv_approx_error(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn sv_infinite_when_outside_range() {
        // W is a permutation, so I − WᵀW = 0 and any nonzero Δ is uncertifiable.
        let p = perm(&[0, 1]);
        let j = StochMatrix::uniform(2);
        assert!(sv_approx_error(&j, &p).unwrap().is_infinite());
    }

    #[test]
    fn sv_rejects_non_doubly_stochastic() {
        let r = StochMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(sv_approx_error(&r, &StochMatrix::uniform(2)), Err(Error::NotDoublyStochastic));
    }

    #[test]
    fn rational_ops() {
        let mut a = RatMatrix::identity(2);
        a.add_signed(&RatMatrix::identity(2), -1);
        assert_eq!(a, RatMatrix::zeros(2));
        let m = StochMatrix::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let r = RatMatrix::from_f64(&m);
        assert_eq!(r.mul(&RatMatrix::identity(2)), r);
        assert_eq!(r.to_f64(), m);
    }
}
