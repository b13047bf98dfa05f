//! Regular graphs given by rotation maps.
//!
//! A rotation map `rot(v, i) = (v', j)` says that the `i`-th edge leaving `v`
//! enters `v'` as its `j`-th incoming edge. All constructions here are
//! involutions, so they double as two-way labelings.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Largest vertex count handled by dense spectral computations.
pub const DENSE_CAP: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Expander {
    /// Margulis–Gabber–Galil graph on `Z_m × Z_m`, degree 8.
    Mgg { m: u64 },
    /// Complete graph with self-loops on `d` vertices, degree `d`.
    Complete { d: u64 },
    /// `c` parallel self-loops at each of `d` vertices.
    Loops { d: u64, c: u64 },
    /// Tensor product with the complete graph on two vertices.
    TensorK2 { base: Box<Expander> },
    /// `t`-step walks.
    Power { base: Box<Expander>, t: u32 },
}

/// Nominal second singular value of the 8-regular MGG graph.
pub const MGG_NOMINAL_LAMBDA: f64 = 0.883_883_476_483_184_4; // 5√2/8

pub fn mgg_rot(m: u64, v: u64, label: u64) -> (u64, u64) {
    let (x, y) = (v / m, v % m);
    let add = |a: u64, b: u64| (a + b) % m;
    let sub = |a: u64, b: u64| (a + m - b % m) % m;
    let (nx, ny) = match label {
        0 => (add(x, y), y),
        1 => (sub(x, y), y),
        2 => (add(add(x, y), 1), y),
        3 => (sub(sub(x, y), 1), y),
        4 => (x, add(y, x)),
        5 => (x, sub(y, x)),
        6 => (x, add(add(y, x), 1)),
        7 => (x, sub(sub(y, x), 1)),
        _ => panic!("MGG label {label} out of range"),
    };
    (nx * m + ny, label ^ 1)
}

impl Expander {
    pub fn mgg(m: u64) -> Self {
        Expander::Mgg { m }
    }

    pub fn complete(d: u64) -> Self {
        Expander::Complete { d }
    }

    pub fn power(self, t: u32) -> Self {
        assert!(t >= 1, "power needs t ≥ 1");
        if t == 1 {
            self
        } else {
            Expander::Power { base: Box::new(self), t }
        }
    }

    pub fn tensor_k2(self) -> Self {
        Expander::TensorK2 { base: Box::new(self) }
    }

    /// MGG-based graph on `2^e` vertices: `MGG(2^{e/2})`, or `MGG(2^{(e−1)/2}) ⊗ K_2` for odd `e`.
    pub fn mgg_on_power_of_two(e: u32) -> Self {
        if e % 2 == 0 {
            Expander::mgg(1 << (e / 2))
        } else {
            Expander::mgg(1 << (e / 2)).tensor_k2()
        }
    }

    pub fn vertices(&self) -> u64 {
        match self {
            Expander::Mgg { m } => m * m,
            Expander::Complete { d } => *d,
            Expander::Loops { d, .. } => *d,
            Expander::TensorK2 { base } => 2 * base.vertices(),
            Expander::Power { base, .. } => base.vertices(),
        }
    }

    pub fn degree(&self) -> u64 {
        match self {
            Expander::Mgg { .. } => 8,
            Expander::Complete { d } => *d,
            Expander::Loops { c, .. } => *c,
            Expander::TensorK2 { base } => 2 * base.degree(),
            Expander::Power { base, t } => base.degree().pow(*t),
        }
    }

    /// `log2(degree)`; degrees are powers of two for every construction used.
    pub fn degree_bits(&self) -> u32 {
        self.degree().trailing_zeros()
    }

    pub fn lambda_bound(&self) -> f64 {
        match self {
            Expander::Mgg { m } => {
                if *m == 1 {
                    0.0
                } else {
                    MGG_NOMINAL_LAMBDA
                }
            }
            Expander::Complete { .. } => 0.0,
            Expander::Loops { d, .. } => {
                if *d == 1 {
                    0.0
                } else {
                    1.0
                }
            }
            Expander::TensorK2 { base } => base.lambda_bound(),
            Expander::Power { base, t } => base.lambda_bound().powi(*t as i32),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Expander::Mgg { m } => *m >= 1,
            Expander::Complete { d } => *d >= 1 && d.is_power_of_two(),
            Expander::Loops { d, c } => *d >= 1 && c.is_power_of_two(),
            Expander::TensorK2 { base } => base.validate().is_ok(),
            Expander::Power { base, t } => {
                *t >= 1 && base.validate().is_ok() && (base.degree_bits() as u64) * (*t as u64) <= 48
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Param(format!("invalid expander {self:?}")))
        }
    }

    pub fn rot(&self, v: u64, i: u64) -> (u64, u64) {
        match self {
            Expander::Mgg { m } => mgg_rot(*m, v, i),
            Expander::Complete { .. } => (i, v),
            Expander::Loops { .. } => (v, i),
            Expander::TensorK2 { base } => {
                let (bv, a) = (v >> 1, v & 1);
                let (bi, b) = (i >> 1, i & 1);
                let (nv, ni) = base.rot(bv, bi);
                ((nv << 1) | b, (ni << 1) | a)
            }
            Expander::Power { base, t } => {
                let c = base.degree();
                let mut digits = Vec::with_capacity(*t as usize);
                let mut rest = i;
                for _ in 0..*t {
                    digits.push(rest % c);
                    rest /= c;
                }
                // digits[t-1] is the first step (most significant)
                let mut cur = v;
                let mut out = 0u64;
                for k in (0..*t as usize).rev() {
                    let (nv, j) = base.rot(cur, digits[k]);
                    cur = nv;
                    // j of the first step becomes the least significant digit
                    out += j * c.pow((*t as usize - 1 - k) as u32);
                }
                (cur, out)
            }
        }
    }

    /// Neighbor `H[v, i]`.
    pub fn neighbor(&self, v: u64, i: u64) -> u64 {
        self.rot(v, i).0
    }

    /// `W[v][u]` = fraction of `u`'s edges entering `v`.
    pub fn walk_matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.vertices();
        if d > DENSE_CAP {
            return Err(Error::CapExceeded { bits: 64 - d.leading_zeros(), cap: 12 });
        }
        let d = d as usize;
        Ok(match self {
            Expander::Complete { .. } => DMatrix::from_element(d, d, 1.0 / d as f64),
            Expander::Loops { .. } => DMatrix::identity(d, d),
            Expander::TensorK2 { base } => base.walk_matrix()?.kronecker(&DMatrix::from_element(2, 2, 0.5)),
            Expander::Power { base, t } => {
                let b = base.walk_matrix()?;
                let mut acc = b.clone();
                for _ in 1..*t {
                    acc = &acc * &b;
                }
                acc
            }
            Expander::Mgg { .. } => {
                let c = self.degree();
                let mut w = DMatrix::zeros(d, d);
                for u in 0..d as u64 {
                    for i in 0..c {
                        w[(self.neighbor(u, i) as usize, u as usize)] += 1.0 / c as f64;
                    }
                }
                w
            }
        })
    }

    fn base_is_symmetric(&self) -> bool {
        !matches!(self, Expander::Power { .. })
    }
}

/// Second singular value `‖W_H − J‖₂`, by a dense symmetric eigensolver (the
/// walk matrices of involutive rotation maps are symmetric) or an SVD otherwise.
/// For powers of symmetric graphs `W^t − J = (W − J)^t`, so `λ(H^t) = λ(H)^t` exactly,
/// and tensoring with `K_2` keeps λ.
pub fn lambda_measure(h: &Expander) -> Result<f64> {
    if let Expander::Power { base, t } = h {
        if base.base_is_symmetric() {
            return Ok(lambda_measure(base)?.powi(*t as i32));
        }
    }
    // W ⊗ J₂ − J = (W − J) ⊗ J₂ has the singular values of W − J
    if let Expander::TensorK2 { base } = h {
        return lambda_measure(base);
    }
    let w = h.walk_matrix()?;
    let d = w.nrows();
    let m = w.add_scalar(-1.0 / d as f64);
    if (&m - m.transpose()).amax() < 1e-12 {
        let e = SymmetricEigen::new(m);
        Ok(e.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())))
    } else {
        Ok(m.singular_values().iter().cloned().fold(0.0, f64::max))
    }
}

/// Cheapest (smallest degree) graph on `vertices = 2^e` vertices with measured
/// `λ ≤ target`, choosing between powers of the MGG-based graph and the complete graph.
pub fn cheapest_expander(vertices: u64, target: f64, max_degree_bits: u32) -> Result<Expander> {
    if !vertices.is_power_of_two() {
        return Err(Error::Param(format!("vertex count {vertices} is not a power of two")));
    }
    let e = vertices.trailing_zeros();
    let complete = Expander::complete(vertices);
    let mut best: Option<Expander> = if e <= max_degree_bits { Some(complete) } else { None };
    if e >= 2 && vertices <= DENSE_CAP {
        let base = Expander::mgg_on_power_of_two(e);
        let lam = lambda_measure(&base)?;
        if lam < 1.0 - 1e-12 && (target > 0.0 || lam == 0.0) {
            let t = if lam <= target {
                1
            } else if lam == 0.0 {
                1
            } else {
                (target.ln() / lam.ln()).ceil().max(1.0) as u32
            };
            // guard against rounding in the logarithm
            let t = (t.saturating_sub(1).max(1)..=t + 1)
                .find(|&t| lam.powi(t as i32) <= target)
                .unwrap_or(t + 1);
            let bits = base.degree_bits() * t;
            if bits <= max_degree_bits && best.as_ref().is_none_or(|b| bits < b.degree_bits()) {
                best = Some(base.power(t));
            }
        }
    }
    best.ok_or_else(|| {
        Error::Infeasible(format!("no expander on {vertices} vertices with λ ≤ {target} and degree ≤ 2^{max_degree_bits}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_bijective(h: &Expander) {
        let (d, c) = (h.vertices(), h.degree());
        let mut seen = vec![false; (d * c) as usize];
        for v in 0..d {
            for i in 0..c {
                let (nv, j) = h.rot(v, i);
                assert!(nv < d && j < c);
                assert!(!std::mem::replace(&mut seen[(nv * c + j) as usize], true));
                assert_eq!(h.rot(nv, j), (v, i), "not an involution");
            }
        }
    }

    #[test]
    fn mgg_single_vertex() {
        for i in 0..8 {
            assert_eq!(mgg_rot(1, 0, i), (0, i ^ 1));
        }
    }

    #[test]
    fn rotations_are_bijective() {
        for m in [2, 3, 4, 8] {
            assert_bijective(&Expander::mgg(m));
        }
        assert_bijective(&Expander::mgg(4).power(2));
        assert_bijective(&Expander::mgg(2).tensor_k2());
        assert_bijective(&Expander::mgg(2).tensor_k2().power(3));
        assert_bijective(&Expander::complete(8));
    }

    #[test]
    fn spectral_values() {
        assert!(lambda_measure(&Expander::complete(16)).unwrap() < 1e-12);
        assert!((lambda_measure(&Expander::Loops { d: 8, c: 4 }).unwrap() - 1.0).abs() < 1e-12);
        let l8 = lambda_measure(&Expander::mgg(8)).unwrap();
        assert!(l8 <= 0.94, "{l8}");
        let l = lambda_measure(&Expander::mgg(4)).unwrap();
        let base = Expander::mgg(4);
        let w2 = {
            let w = base.walk_matrix().unwrap();
            &w * &w
        };
        let explicit = {
            let m = w2.add_scalar(-1.0 / 16.0);
            m.singular_values().iter().cloned().fold(0.0, f64::max)
        };
        assert!(explicit <= l * l + 1e-9);
        assert_eq!(Expander::mgg(4).power(3).degree(), 512);
        assert!(Expander::mgg(4).power(3).degree().is_power_of_two());
    }

    #[test]
    fn power_one_is_identity() {
        let h = Expander::mgg(3);
        assert_eq!(h.clone().power(1), h);
    }

    #[test]
    fn tensor_keeps_lambda() {
        let a = lambda_measure(&Expander::mgg(4)).unwrap();
        let b = lambda_measure(&Expander::mgg(4).tensor_k2()).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn cheapest_choices() {
        assert_eq!(cheapest_expander(4, 0.5, 20).unwrap(), Expander::complete(4));
        let h = cheapest_expander(256, 0.02, 40).unwrap();
        assert!(lambda_measure(&h).unwrap() <= 0.02);
        assert!(cheapest_expander(256, 0.02, 3).is_err());
    }
}
