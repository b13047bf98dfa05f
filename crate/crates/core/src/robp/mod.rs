//! Read-once branching programs.
//!
//! Layers are materialized: transition `t` (0-based, `t < n`) maps states of
//! vertex layer `t` to states of vertex layer `t + 1`. Every vertex layer has
//! the same width.

mod format;

pub use format::{read_robp, write_robp};

use crate::error::{Error, Result};
use crate::matrix::{RatMatrix, StochMatrix};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::fmt;

/// Largest alphabet the materialized representation accepts.
pub const MAX_ALPHABET_BITS: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobpClass {
    General,
    Regular,
    Permutation,
}

impl fmt::Display for RobpClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RobpClass::General => "general",
            RobpClass::Regular => "regular",
            RobpClass::Permutation => "permutation",
        })
    }
}

impl std::str::FromStr for RobpClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(RobpClass::General),
            "regular" => Ok(RobpClass::Regular),
            "permutation" => Ok(RobpClass::Permutation),
            _ => Err(Error::Param(format!("unknown class {s:?}"))),
        }
    }
}

/// Incoming labels for every edge. `rot_t(u, x) = (T_t(u, x), inc[t][u][x])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoWayLabeling {
    n: usize,
    w: usize,
    s: u32,
    inc: Vec<u32>,
}

impl TwoWayLabeling {
    pub fn incoming(&self, t: usize, u: usize, x: u64) -> u64 {
        self.inc[((t * self.w + u) << self.s) | x as usize] as u64
    }

    pub fn from_incoming(n: usize, w: usize, s: u32, inc: Vec<u32>) -> Self {
        TwoWayLabeling { n, w, s, inc }
    }

    pub fn raw(&self) -> &[u32] {
        &self.inc
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Robp {
    n: usize,
    w: usize,
    s: u32,
    trans: Vec<u32>,
    start: usize,
    accept: Vec<bool>,
    labeling: Option<TwoWayLabeling>,
}

impl Robp {
    /// `trans` is layer-major: entry `((t * w + u) << s) | x` is the target of
    /// state `u` on symbol `x` in transition `t`.
    pub fn new(n: usize, w: usize, s: u32, trans: Vec<u32>, start: usize, accept: &[usize]) -> Result<Self> {
        if n == 0 || w == 0 || s == 0 {
            return Err(Error::Shape(format!("n={n}, w={w}, s={s} must all be positive")));
        }
        if s > MAX_ALPHABET_BITS {
            return Err(Error::Shape(format!("alphabet of {s} bits is too large to materialize")));
        }
        if trans.len() != (n * w) << s {
            return Err(Error::Shape(format!("expected {} transitions, got {}", (n * w) << s, trans.len())));
        }
        if let Some(&bad) = trans.iter().find(|&&v| v as usize >= w) {
            return Err(Error::StateOutOfRange(bad as usize));
        }
        if start >= w {
            return Err(Error::StateOutOfRange(start));
        }
        let mut acc = vec![false; w];
        for &a in accept {
            if a >= w {
                return Err(Error::StateOutOfRange(a));
            }
            acc[a] = true;
        }
        Ok(Robp { n, w, s, trans, start, accept: acc, labeling: None })
    }

    pub fn from_fn(
        n: usize,
        w: usize,
        s: u32,
        start: usize,
        accept: &[usize],
        mut f: impl FnMut(usize, usize, u64) -> usize,
    ) -> Result<Self> {
        if s > MAX_ALPHABET_BITS {
            return Err(Error::Shape(format!("alphabet of {s} bits is too large to materialize")));
        }
        let mut trans = Vec::with_capacity((n * w) << s);
        for t in 0..n {
            for u in 0..w {
                for x in 0..(1u64 << s) {
                    trans.push(f(t, u, x) as u32);
                }
            }
        }
        Self::new(n, w, s, trans, start, accept)
    }

    /// Program whose every transition is the identity.
    pub fn identity(n: usize, w: usize, s: u32, start: usize, accept: &[usize]) -> Result<Self> {
        Self::from_fn(n, w, s, start, accept, |_, u, _| u)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn w(&self) -> usize {
        self.w
    }
    pub fn s(&self) -> u32 {
        self.s
    }
    pub fn alphabet(&self) -> u64 {
        1u64 << self.s
    }
    pub fn start(&self) -> usize {
        self.start
    }
    pub fn is_accept(&self, u: usize) -> bool {
        self.accept[u]
    }
    pub fn accept_mask(&self) -> &[bool] {
        &self.accept
    }
    pub fn accept_set(&self) -> Vec<usize> {
        (0..self.w).filter(|&u| self.accept[u]).collect()
    }
    pub fn transitions(&self) -> &[u32] {
        &self.trans
    }
    pub fn labeling(&self) -> Option<&TwoWayLabeling> {
        self.labeling.as_ref()
    }

    pub fn with_accept(&self, accept: &[usize]) -> Result<Robp> {
        let mut r = Robp::new(self.n, self.w, self.s, self.trans.clone(), self.start, accept)?;
        r.labeling = self.labeling.clone();
        Ok(r)
    }

    pub fn with_start(&self, start: usize) -> Result<Robp> {
        if start >= self.w {
            return Err(Error::StateOutOfRange(start));
        }
        let mut r = self.clone();
        r.start = start;
        Ok(r)
    }

    /// Attaches a labeling after checking it is a valid two-way labeling.
    pub fn with_labeling(&self, lab: TwoWayLabeling) -> Result<Robp> {
        self.check_labeling(&lab)?;
        let mut r = self.clone();
        r.labeling = Some(lab);
        Ok(r)
    }

    /// Attaches the canonical labeling.
    pub fn labeled(&self) -> Result<Robp> {
        let lab = self.assign_two_way_labeling()?;
        self.with_labeling(lab)
    }

    pub fn without_labeling(&self) -> Robp {
        let mut r = self.clone();
        r.labeling = None;
        r
    }

    #[inline]
    pub fn step(&self, t: usize, u: usize, x: u64) -> usize {
        self.trans[((t * self.w + u) << self.s) | x as usize] as usize
    }

    /// Runs symbols from state `u` at vertex layer `t0`.
    pub fn run_from(&self, t0: usize, mut u: usize, symbols: &[u64]) -> usize {
        for (k, &x) in symbols.iter().enumerate() {
            u = self.step(t0 + k, u, x);
        }
        u
    }

    fn check_symbols(&self, input: &[u64]) -> Result<()> {
        match input.iter().find(|&&x| x >= self.alphabet()) {
            Some(&x) => Err(Error::SymbolOutOfRange { symbol: x, bits: self.s }),
            None => Ok(()),
        }
    }

    pub fn evaluate(&self, input: &[u64]) -> Result<bool> {
        if input.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: input.len() });
        }
        self.check_symbols(input)?;
        Ok(self.accept[self.run_from(0, self.start, input)])
    }

    /// 0/1 matrix of the walk from vertex layer `i` to `j` on `input`.
    pub fn transition_matrix(&self, i: usize, j: usize, input: &[u64]) -> Result<StochMatrix> {
        if i >= j || j > self.n {
            return Err(Error::LayerRange { i, j, n: self.n });
        }
        if input.len() != j - i {
            return Err(Error::LengthMismatch { expected: j - i, got: input.len() });
        }
        self.check_symbols(input)?;
        let mut m = StochMatrix::zeros(self.w);
        for u in 0..self.w {
            m.set(u, self.run_from(i, u, input), 1.0);
        }
        Ok(m)
    }

    /// Average over symbols of the one-step matrices of transition `t`.
    pub fn one_step_average(&self, t: usize) -> StochMatrix {
        let mut m = StochMatrix::zeros(self.w);
        let p = 1.0 / self.alphabet() as f64;
        for u in 0..self.w {
            for x in 0..self.alphabet() {
                m.add_at(u, self.step(t, u, x), p);
            }
        }
        m
    }

    pub fn one_step_average_rational(&self, t: usize) -> RatMatrix {
        let mut counts = vec![0u64; self.w * self.w];
        for u in 0..self.w {
            for x in 0..self.alphabet() {
                counts[u * self.w + self.step(t, u, x)] += 1;
            }
        }
        let den = BigInt::from(self.alphabet());
        let mut m = RatMatrix::zeros(self.w);
        for u in 0..self.w {
            for v in 0..self.w {
                let c = counts[u * self.w + v];
                if c != 0 {
                    m.set(u, v, BigRational::new(BigInt::from(c), den.clone()));
                }
            }
        }
        m
    }

    /// Exact product `A_{i+1} ⋯ A_j` of one-step averages, vertex layers `i..j`.
    pub fn segment_product(&self, i: usize, j: usize) -> StochMatrix {
        let mut m = StochMatrix::identity(self.w);
        for t in i..j {
            m = crate::matrix::MatrixAlgebra::mul(&m, &self.one_step_average(t));
        }
        m
    }

    pub fn segment_product_rational(&self, i: usize, j: usize) -> RatMatrix {
        use crate::matrix::MatrixAlgebra;
        let mut m = RatMatrix::identity(self.w);
        for t in i..j {
            m = m.mul(&self.one_step_average_rational(t));
        }
        m
    }

    pub fn accept_vector(&self) -> Vec<f64> {
        self.accept.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect()
    }

    /// Value of `e_start^T M 1_accept`.
    pub fn readout(&self, m: &StochMatrix) -> f64 {
        let acc = self.accept_vector();
        (0..self.w).map(|v| m.get(self.start, v) * acc[v]).sum()
    }

    /// Acceptance probabilities `q_t(u)` for every vertex layer, by backward induction.
    pub fn acceptance_probabilities(&self) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.w]; self.n + 1];
        q[self.n] = self.accept_vector();
        let p = 1.0 / self.alphabet() as f64;
        for t in (0..self.n).rev() {
            for u in 0..self.w {
                let mut acc = 0.0;
                for x in 0..self.alphabet() {
                    acc += q[t + 1][self.step(t, u, x)];
                }
                q[t][u] = acc * p;
            }
        }
        q
    }

    /// `E_x f(x)` in double precision.
    pub fn exact_expectation(&self) -> f64 {
        self.acceptance_probabilities()[0][self.start]
    }

    /// `E_x f(x)` exactly, by the same backward induction in rational arithmetic.
    pub fn exact_expectation_rational(&self) -> BigRational {
        let mut q: Vec<BigRational> = self
            .accept
            .iter()
            .map(|&a| if a { BigRational::one() } else { BigRational::zero() })
            .collect();
        let den = BigRational::from_integer(BigInt::from(self.alphabet()));
        for t in (0..self.n).rev() {
            let mut next = vec![BigRational::zero(); self.w];
            for (u, slot) in next.iter_mut().enumerate() {
                let mut acc = BigRational::zero();
                for x in 0..self.alphabet() {
                    acc += &q[self.step(t, u, x)];
                }
                *slot = acc / &den;
            }
            q = next;
        }
        q[self.start].clone()
    }

    /// `E_x f(x)` by counting accepted inputs over all `(2^s)^n` strings.
    pub fn exact_expectation_enumerated(&self, cap_bits: u32) -> Result<BigRational> {
        let bits = self.s as usize * self.n;
        if bits > cap_bits as usize {
            return Err(Error::CapExceeded { bits: bits as u32, cap: cap_bits });
        }
        let total = 1u64 << bits;
        let mask = self.alphabet() - 1;
        let mut count = 0u64;
        let mut input = vec![0u64; self.n];
        for z in 0..total {
            for (k, slot) in input.iter_mut().enumerate() {
                *slot = (z >> (self.s as usize * (self.n - 1 - k))) & mask;
            }
            if self.accept[self.run_from(0, self.start, &input)] {
                count += 1;
            }
        }
        Ok(BigRational::new(BigInt::from(count), BigInt::from(total)))
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![usize::MAX; self.w];
        for t in 0..self.n {
            for x in 0..self.alphabet() {
                let tag = t * (self.alphabet() as usize) + x as usize;
                for u in 0..self.w {
                    let v = self.step(t, u, x);
                    if seen[v] == tag {
                        return false;
                    }
                    seen[v] = tag;
                }
            }
        }
        true
    }

    pub fn is_regular(&self) -> bool {
        let d = self.alphabet() as usize;
        (0..self.n).all(|t| {
            let mut indeg = vec![0usize; self.w];
            for u in 0..self.w {
                for x in 0..self.alphabet() {
                    indeg[self.step(t, u, x)] += 1;
                }
            }
            indeg.iter().all(|&c| c == d)
        })
    }

    pub fn classify(&self) -> RobpClass {
        if self.is_permutation() {
            RobpClass::Permutation
        } else if self.is_regular() {
            RobpClass::Regular
        } else {
            RobpClass::General
        }
    }

    /// Canonical labeling: the incoming label of edge `(u, x)` is its rank among the
    /// edges entering the same target, ordered by `(u, x)`.
    pub fn assign_two_way_labeling(&self) -> Result<TwoWayLabeling> {
        if !self.is_regular() {
            return Err(Error::NotRegular);
        }
        let mut inc = vec![0u32; self.trans.len()];
        let mut next = vec![0u32; self.w];
        for t in 0..self.n {
            next.iter_mut().for_each(|c| *c = 0);
            for u in 0..self.w {
                for x in 0..self.alphabet() {
                    let idx = ((t * self.w + u) << self.s) | x as usize;
                    let v = self.trans[idx] as usize;
                    inc[idx] = next[v];
                    next[v] += 1;
                }
            }
        }
        Ok(TwoWayLabeling { n: self.n, w: self.w, s: self.s, inc })
    }

    pub fn check_labeling(&self, lab: &TwoWayLabeling) -> Result<()> {
        if lab.n != self.n || lab.w != self.w || lab.s != self.s || lab.inc.len() != self.trans.len() {
            return Err(Error::Labeling("shape mismatch".into()));
        }
        let d = self.alphabet() as usize;
        let mut seen = vec![false; self.w * d];
        for t in 0..self.n {
            seen.iter_mut().for_each(|b| *b = false);
            for u in 0..self.w {
                for x in 0..self.alphabet() {
                    let v = self.step(t, u, x);
                    let j = lab.incoming(t, u, x) as usize;
                    if j >= d {
                        return Err(Error::Labeling(format!("incoming label {j} out of range")));
                    }
                    if std::mem::replace(&mut seen[v * d + j], true) {
                        return Err(Error::Labeling(format!("layer {t}: (v={v}, label {j}) hit twice")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn rotation_step(&self, lab: &TwoWayLabeling, t: usize, u: usize, x: u64) -> Result<(usize, u64)> {
        if t >= self.n {
            return Err(Error::LayerRange { i: t, j: t + 1, n: self.n });
        }
        if u >= self.w {
            return Err(Error::StateOutOfRange(u));
        }
        if x >= self.alphabet() {
            return Err(Error::SymbolOutOfRange { symbol: x, bits: self.s });
        }
        if lab.inc.len() != self.trans.len() {
            return Err(Error::Labeling("shape mismatch".into()));
        }
        Ok((self.step(t, u, x), lab.incoming(t, u, x)))
    }

    /// Rotation through the attached labeling (unchecked hot path).
    #[inline]
    pub fn rot(&self, t: usize, u: usize, x: u64) -> (usize, u64) {
        let lab = self.labeling.as_ref().expect("program has no labeling");
        (self.step(t, u, x), lab.incoming(t, u, x))
    }

    /// Appends identity layers (with identity labels when labeled) up to length `n_new`.
    pub fn pad_identity(&self, n_new: usize) -> Result<Robp> {
        if n_new < self.n {
            return Err(Error::Param(format!("cannot pad length {} down to {n_new}", self.n)));
        }
        let mut trans = self.trans.clone();
        let mut inc = self.labeling.as_ref().map(|l| l.inc.clone());
        for _ in self.n..n_new {
            for u in 0..self.w {
                for x in 0..self.alphabet() {
                    trans.push(u as u32);
                    if let Some(inc) = inc.as_mut() {
                        inc.push(x as u32);
                    }
                }
            }
        }
        let mut r = Robp::new(n_new, self.w, self.s, trans, self.start, &self.accept_set())?;
        r.labeling = inc.map(|inc| TwoWayLabeling { n: n_new, w: self.w, s: self.s, inc });
        Ok(r)
    }

    /// Relabels a binary regular program into a permutation program with the same
    /// one-step averages, by walking the cycles of each layer's 2-regular bigraph.
    pub fn regular_to_permutation_binary(&self) -> Result<Robp> {
        if self.s != 1 {
            return Err(Error::NotBinary);
        }
        if !self.is_regular() {
            return Err(Error::NotRegular);
        }
        let w = self.w;
        let mut trans = self.trans.clone();
        for t in 0..self.n {
            let target = |e: usize| self.trans[((t * w) << 1) + e] as usize;
            // incoming[v] = the two edge ids entering v
            let mut incoming = vec![[usize::MAX; 2]; w];
            for e in 0..2 * w {
                let v = target(e);
                let slot = if incoming[v][0] == usize::MAX { 0 } else { 1 };
                incoming[v][slot] = e;
            }
            let other_in = |e: usize| {
                let v = target(e);
                if incoming[v][0] == e {
                    incoming[v][1]
                } else {
                    incoming[v][0]
                }
            };
            let on_cycle_of = |start: usize, node: usize| -> bool {
                let mut e = 2 * start;
                loop {
                    let l = other_in(e) / 2;
                    if l == node {
                        return true;
                    }
                    if l == start {
                        return false;
                    }
                    e = other_in(e) ^ 1;
                }
            };
            let mut lab: Vec<u8> = (0..2 * w).map(|e| (e & 1) as u8).collect();
            for v0 in 0..w {
                if (0..v0).any(|p| on_cycle_of(p, v0)) {
                    continue;
                }
                let mut e = 2 * v0;
                loop {
                    let e1 = other_in(e);
                    if lab[e1] == lab[e] {
                        lab[e1] ^= 1;
                    }
                    let l = e1 / 2;
                    if l == v0 {
                        debug_assert_ne!(lab[e1], lab[2 * v0]);
                        break;
                    }
                    let e2 = e1 ^ 1;
                    if lab[e2] == lab[e1] {
                        lab[e2] ^= 1;
                    }
                    e = e2;
                }
            }
            for u in 0..w {
                for b in 0..2 {
                    let e = 2 * u + b;
                    trans[((t * w) << 1) + 2 * u + lab[e] as usize] = target(e) as u32;
                }
            }
        }
        let out = Robp::new(self.n, w, 1, trans, self.start, &self.accept_set())?;
        debug_assert!(out.is_permutation());
        Ok(out)
    }

    /// `W(f) = Σ_{edges (u,v)} |q(v) − q(u)|`, counting each labeled edge once.
    pub fn robp_weight(&self) -> f64 {
        let q = self.acceptance_probabilities();
        let mut total = 0.0;
        for t in 0..self.n {
            for u in 0..self.w {
                for x in 0..self.alphabet() {
                    total += (q[t + 1][self.step(t, u, x)] - q[t][u]).abs();
                }
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Robp {
        // n=3, w=4, s=1, hand-written
        let t = vec![
            1, 2, 0, 3, 3, 3, 2, 1, //
            0, 0, 1, 2, 3, 0, 2, 2, //
            3, 1, 2, 0, 1, 1, 0, 3,
        ];
        Robp::new(3, 4, 1, t, 0, &[1, 3]).unwrap()
    }

    #[test]
    fn trivial_programs() {
        let r = Robp::identity(1, 1, 1, 0, &[0]).unwrap();
        assert!(r.evaluate(&[0]).unwrap() && r.evaluate(&[1]).unwrap());
        let r = Robp::identity(2, 3, 2, 1, &[1]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert!(r.evaluate(&[a, b]).unwrap());
            }
        }
    }

    #[test]
    fn evaluate_errors() {
        let r = sample();
        assert!(matches!(r.evaluate(&[0, 1]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(r.evaluate(&[0, 1, 2]), Err(Error::SymbolOutOfRange { .. })));
        assert!(r.transition_matrix(2, 2, &[]).is_err());
        assert!(r.transition_matrix(0, 4, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn path_trace_by_hand() {
        let r = sample();
        // start 0, input 1,0,1: layer0 (0,1)->2; layer1 (2,0)->3; layer2 (3,1)->3 accept
        assert!(r.evaluate(&[1, 0, 1]).unwrap());
        // 0,0,0: 0->1 ->1 ->2 reject
        assert!(!r.evaluate(&[0, 0, 0]).unwrap());
        let m = r.transition_matrix(0, 3, &[1, 1, 1]).unwrap();
        let v = (0..4).find(|&v| m.get(0, v) == 1.0).unwrap();
        assert_eq!(r.evaluate(&[1, 1, 1]).unwrap(), r.is_accept(v));
    }

    #[test]
    fn small_expectations() {
        assert_eq!(Robp::identity(3, 2, 1, 0, &[0, 1]).unwrap().exact_expectation(), 1.0);
        let r = Robp::from_fn(1, 2, 1, 0, &[0], |_, u, x| if u == 0 && x == 0 { 0 } else { 1 }).unwrap();
        assert_eq!(r.exact_expectation(), 0.5);
        assert_eq!(r.exact_expectation_rational(), BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn classification_examples() {
        let g = Robp::from_fn(1, 2, 1, 0, &[0], |_, _, _| 0).unwrap();
        assert_eq!(g.classify(), RobpClass::General);
        // both symbols of node 0 to 0 and node 1 to 1: regular, not permutation
        let r = Robp::from_fn(1, 2, 1, 0, &[0], |_, u, _| u).unwrap();
        assert_eq!(r.classify(), RobpClass::Permutation);
        let r = Robp::new(1, 2, 1, vec![0, 1, 1, 0], 0, &[0]).unwrap();
        assert_eq!(r.classify(), RobpClass::Permutation);
        let r = Robp::new(1, 2, 1, vec![0, 1, 0, 1], 0, &[0]).unwrap();
        assert_eq!(r.classify(), RobpClass::Regular);
    }

    #[test]
    fn width_one_labeling_is_identity() {
        let r = Robp::identity(3, 1, 2, 0, &[0]).unwrap();
        let lab = r.assign_two_way_labeling().unwrap();
        for t in 0..3 {
            for x in 0..4 {
                assert_eq!(r.rotation_step(&lab, t, 0, x).unwrap(), (0, x));
            }
        }
        assert_eq!(lab, r.assign_two_way_labeling().unwrap());
    }

    #[test]
    fn labeling_requires_regular() {
        let g = Robp::from_fn(1, 2, 1, 0, &[0], |_, _, _| 0).unwrap();
        assert_eq!(g.assign_two_way_labeling(), Err(Error::NotRegular));
    }

    #[test]
    fn transform_parallel_edges() {
        let r = Robp::new(2, 2, 1, vec![0, 1, 0, 1, 1, 1, 0, 0], 0, &[1]).unwrap();
        assert_eq!(r.classify(), RobpClass::Regular);
        let p = r.regular_to_permutation_binary().unwrap();
        assert_eq!(p.classify(), RobpClass::Permutation);
        assert_eq!(p.exact_expectation_rational(), r.exact_expectation_rational());
    }

    #[test]
    fn transform_keeps_permutations() {
        let r = Robp::new(2, 3, 1, vec![1, 0, 2, 1, 0, 2, 2, 2, 0, 0, 1, 1], 1, &[0]).unwrap();
        assert!(r.is_permutation());
        assert_eq!(r.regular_to_permutation_binary().unwrap(), r);
    }

    #[test]
    fn weight_by_hand() {
        assert_eq!(Robp::identity(4, 3, 1, 0, &[0, 1, 2]).unwrap().robp_weight(), 0.0);
        // n=1, w=2: state0 -> {0 on 0, 1 on 1}, state1 -> {1,1}; accept {0}
        // q1 = (1,0); q0 = (1/2, 0); edges from 0: |1-1/2| + |0-1/2| = 1; from 1: 0 + 0
        let r = Robp::new(1, 2, 1, vec![0, 1, 1, 1], 0, &[0]).unwrap();
        assert_eq!(r.robp_weight(), 1.0);
    }

    #[test]
    fn padding() {
        let r = sample();
        let p = r.pad_identity(5).unwrap();
        assert_eq!(p.exact_expectation(), r.exact_expectation());
        assert_eq!(p.evaluate(&[1, 0, 1, 1, 0]).unwrap(), r.evaluate(&[1, 0, 1]).unwrap());
    }
}
