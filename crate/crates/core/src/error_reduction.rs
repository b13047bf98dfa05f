//! Error-reduction polynomials as explicit signed term sets.
//!
//! A term is a sign and a nondecreasing breakpoint list `n_1 ≤ … ≤ n_k = n`
//! standing for the product `B_{0,n_1} B_{n_1,n_2} ⋯ B_{n_{k−1},n_k}`, with
//! `B_{i,i} = I` and unit entries `B_{i−1,i}` equal to the true step `A_i`.

use crate::error::{Error, Result};
use crate::matrix::{MatrixAlgebra, StochMatrix};
use crate::robp::Robp;
use rayon::prelude::*;
use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignedTerm {
    pub sign: i8,
    pub breakpoints: Vec<usize>,
}

impl SignedTerm {
    /// The nonempty factors `(a, b)` with `a < b`.
    pub fn factors(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut prev = 0;
        self.breakpoints.iter().filter_map(move |&b| {
            let a = std::mem::replace(&mut prev, b);
            (a < b).then_some((a, b))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Richardson,
    BinarySplitting,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Richardson => "richardson",
            Flavor::BinarySplitting => "binary-splitting",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermSet {
    pub n: usize,
    pub k: usize,
    pub flavor: Flavor,
    pub terms: Vec<SignedTerm>,
}

impl TermSet {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest number of nonempty factors in a term.
    pub fn max_factors(&self) -> usize {
        self.terms.iter().map(|t| t.factors().count()).max().unwrap_or(0)
    }

    /// Appends zero-sign terms up to the next power of two.
    pub fn padded_pow2(&self) -> TermSet {
        let mut out = self.clone();
        let target = self.terms.len().max(1).next_power_of_two();
        let filler = SignedTerm { sign: 0, breakpoints: vec![self.n; self.breakpoint_count()] };
        out.terms.resize(target, filler);
        out
    }

    /// Breakpoints per term (uniform within a Richardson set).
    pub fn breakpoint_count(&self) -> usize {
        self.terms.iter().map(|t| t.breakpoints.len()).max().unwrap_or(1)
    }

    /// One line per term: sign then breakpoints.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.flavor, self.n, self.k);
        for t in &self.terms {
            s.push_str(&format!("{:+}", t.sign));
            for b in &t.breakpoints {
                s.push_str(&format!(" {b}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<TermSet> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse_err = |line: usize, msg: &str| Error::Parse { line: line + 1, msg: msg.to_string() };
        let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "empty term set"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(parse_err(hl, "header must be `flavor n k`"));
        }
        let flavor = match h[0] {
            "richardson" => Flavor::Richardson,
            "binary-splitting" => Flavor::BinarySplitting,
            _ => return Err(parse_err(hl, "unknown flavor")),
        };
        let n = h[1].parse().map_err(|_| parse_err(hl, "bad n"))?;
        let k = h[2].parse().map_err(|_| parse_err(hl, "bad k"))?;
        let mut terms = Vec::new();
        for (ln, l) in lines {
            let mut it = l.split_whitespace();
            let sign: i8 = it.next().unwrap().parse().map_err(|_| parse_err(ln, "bad sign"))?;
            if !(-1..=1).contains(&sign) {
                return Err(parse_err(ln, "sign must be −1, 0 or +1"));
            }
            let breakpoints = it.map(|b| b.parse().map_err(|_| parse_err(ln, "bad breakpoint"))).collect::<Result<Vec<usize>>>()?;
            if breakpoints.windows(2).any(|w| w[0] > w[1]) || breakpoints.last() != Some(&n) {
                return Err(parse_err(ln, "breakpoints must be nondecreasing and end at n"));
            }
            terms.push(SignedTerm { sign, breakpoints });
        }
        Ok(TermSet { n, k, flavor, terms })
    }
}

/// Lazy enumeration of the Richardson expansion of degree `k` (odd).
///
/// With `Δ_{a,b} = B_{a,b−1} A_b − B_{a,b}`, the `(0, n)` block of
/// `Σ_{i ≤ (k−1)/2} (I − B M)^i B` is the sum over chains `0 < r_1 < … < r_t ≤ n`
/// of `Δ_{0,r_1} ⋯ Δ_{r_{t−1},r_t} B_{r_t,n}`.
#[derive(Clone, Debug)]
pub struct RichardsonIter {
    n: usize,
    k: usize,
    t: usize,
    chain: Vec<usize>,
    choice: u64,
    done: bool,
}

impl RichardsonIter {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::Param(format!("Richardson degree must be odd, got {k}")));
        }
        if n == 0 {
            return Err(Error::Param("Richardson needs n ≥ 1".into()));
        }
        Ok(RichardsonIter { n, k, t: 0, chain: vec![], choice: 0, done: false })
    }

    fn advance(&mut self) {
        self.choice += 1;
        if self.choice < 1 << self.t {
            return;
        }
        self.choice = 0;
        // next t-subset of 1..=n in lexicographic order
        let (n, t) = (self.n, self.t);
        if let Some(p) = (0..t).rev().find(|&p| self.chain[p] < n - (t - 1 - p)) {
            self.chain[p] += 1;
            for q in p + 1..t {
                self.chain[q] = self.chain[q - 1] + 1;
            }
            return;
        }
        self.t += 1;
        if self.t > (self.k - 1) / 2 || self.t > self.n {
            self.done = true;
        } else {
            self.chain = (1..=self.t).collect();
        }
    }
}

impl Iterator for RichardsonIter {
    type Item = SignedTerm;

    fn next(&mut self) -> Option<SignedTerm> {
        if self.done {
            return None;
        }
        let mut bps = Vec::with_capacity(self.k);
        let mut sign = 1i8;
        for (p, &r) in self.chain.iter().enumerate() {
            if self.choice >> p & 1 == 0 {
                bps.push(r - 1);
                bps.push(r);
            } else {
                sign = -sign;
                bps.push(r);
            }
        }
        bps.push(self.n);
        bps.retain(|&b| b != 0);
        bps.dedup();
        bps.resize(self.k, self.n);
        self.advance();
        Some(SignedTerm { sign, breakpoints: bps })
    }
}

pub fn richardson_terms(n: usize, k: usize) -> Result<TermSet> {
    Ok(TermSet { n, k, flavor: Flavor::Richardson, terms: RichardsonIter::new(n, k)?.collect() })
}

/// `ε^{(k+1)/2} · (n+1)`.
pub fn richardson_bound(eps: f64, n: usize, k: usize) -> f64 {
    eps.powf((k as f64 + 1.0) / 2.0) * (n as f64 + 1.0)
}

/// Number of Richardson terms, `Σ_{t ≤ (k−1)/2} C(n,t) 2^t`.
pub fn richardson_count(n: usize, k: usize) -> u128 {
    let mut c = 1u128;
    let mut total = 0u128;
    for t in 0..=((k.saturating_sub(1)) / 2).min(n) {
        total += c << t;
        c = c * (n - t) as u128 / (t + 1) as u128;
    }
    total
}

/// Whether `[a, b)` is a unit step or a dyadic interval of `BS_n`.
pub fn in_bs(n: usize, a: usize, b: usize) -> bool {
    let len = b.wrapping_sub(a);
    b <= n && a < b && len.is_power_of_two() && a % len == 0
}

type TermMap = BTreeMap<Vec<usize>, i64>;

fn bs_rec(l: usize, r: usize, k: usize, memo: &mut BTreeMap<(usize, usize, usize), TermMap>) -> TermMap {
    if let Some(m) = memo.get(&(l, r, k)) {
        return m.clone();
    }
    let mut out = TermMap::new();
    if r == l + 1 || k == 0 {
        out.insert(vec![r], 1);
    } else {
        let m = (l + r) / 2;
        let mut add = |i: usize, j: usize, sign: i64, memo: &mut BTreeMap<_, _>| {
            let left = bs_rec(l, m, i, memo);
            let right = bs_rec(m, r, j, memo);
            for (lb, lc) in &left {
                for (rb, rc) in &right {
                    let mut bp = lb.clone();
                    bp.extend_from_slice(rb);
                    *out.entry(bp).or_insert(0) += sign * lc * rc;
                }
            }
        };
        for i in 0..=k {
            add(i, k - i, 1, memo);
        }
        for i in 0..k {
            add(i, k - 1 - i, -1, memo);
        }
        out.retain(|_, c| *c != 0);
    }
    memo.insert((l, r, k), out.clone());
    out
}

/// Binary-splitting expansion of `M^{(k)}_{0…n}`: unit intervals are true steps,
/// degree-0 intervals are base factors, and higher degrees combine the halves as
/// `Σ_{i+j=k} M^{(i)} M^{(j)} − Σ_{i+j=k−1} M^{(i)} M^{(j)}`. Identical factor
/// lists are merged; a merged coefficient `c` becomes `|c|` terms of sign `±1`.
pub fn binary_splitting_terms(n: usize, k: usize) -> Result<TermSet> {
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut memo = BTreeMap::new();
    let mut terms = Vec::new();
    for (bp, c) in bs_rec(0, n, k, &mut memo) {
        let sign = c.signum() as i8;
        for _ in 0..c.unsigned_abs() {
            terms.push(SignedTerm { sign, breakpoints: bp.clone() });
        }
    }
    Ok(TermSet { n, k, flavor: Flavor::BinarySplitting, terms })
}

/// `(4 √τ · log₂ n)^{k+1}`.
pub fn bs_entrywise_bound(tau: f64, n: usize, k: usize) -> f64 {
    (4.0 * tau.sqrt() * (n as f64).log2()).powi(k as i32 + 1)
}

/// `(30 ε · log₂ n)^k`.
pub fn weighted_bound_regular(eps: f64, n: usize, k: usize) -> f64 {
    (30.0 * eps * (n as f64).log2()).powi(k as i32)
}

/// Table of segment matrices `B_{i,j}`, `0 ≤ i ≤ j ≤ n`.
#[derive(Clone, Debug)]
pub struct SegmentTable<M> {
    n: usize,
    w: usize,
    entries: Vec<Option<M>>,
}

impl<M: MatrixAlgebra> SegmentTable<M> {
    pub fn new(n: usize, w: usize) -> Self {
        SegmentTable { n, w, entries: vec![None; (n + 1) * (n + 1)] }
    }

    pub fn from_fn(n: usize, w: usize, mut f: impl FnMut(usize, usize) -> Option<M>) -> Self {
        let mut t = Self::new(n, w);
        for i in 0..=n {
            for j in i + 1..=n {
                t.entries[i * (n + 1) + j] = f(i, j);
            }
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn set(&mut self, i: usize, j: usize, m: M) {
        self.entries[i * (self.n + 1) + j] = Some(m);
    }

    pub fn get(&self, i: usize, j: usize) -> Result<M> {
        if i == j && i <= self.n {
            return Ok(M::identity(self.w));
        }
        if i > j || j > self.n {
            return Err(Error::LayerRange { i, j, n: self.n });
        }
        self.entries[i * (self.n + 1) + j].clone().ok_or(Error::MissingEntry(i, j))
    }

    fn get_ref(&self, i: usize, j: usize) -> Result<&M> {
        if i >= j || j > self.n {
            return Err(Error::LayerRange { i, j, n: self.n });
        }
        self.entries[i * (self.n + 1) + j].as_ref().ok_or(Error::MissingEntry(i, j))
    }
}

impl SegmentTable<StochMatrix> {
    /// The exact table of true segment products of `f`.
    pub fn exact(f: &Robp) -> Self {
        let n = f.n();
        let mut t = Self::new(n, f.w());
        for i in 0..n {
            let mut acc = StochMatrix::identity(f.w());
            for j in i + 1..=n {
                acc = acc.mul(&f.one_step_average(j - 1));
                t.set(i, j, acc.clone());
            }
        }
        t
    }
}

fn term_product<M: MatrixAlgebra>(t: &SignedTerm, table: &SegmentTable<M>) -> Result<M> {
    let mut acc: Option<M> = None;
    for (a, b) in t.factors() {
        let f = table.get_ref(a, b)?;
        acc = Some(match acc {
            None => f.clone(),
            Some(m) => m.mul(f),
        });
    }
    Ok(acc.unwrap_or_else(|| M::identity(table.w)))
}

/// `Σ σ_i · Π_j B_{n_{i,j−1}, n_{i,j}}`, summed sequentially in term order.
pub fn eval_terms<M, I>(terms: I, table: &SegmentTable<M>) -> Result<M>
where
    M: MatrixAlgebra,
    I: IntoIterator,
    I::Item: Borrow<SignedTerm>,
{
    let mut acc = M::zeros(table.w);
    for t in terms {
        let t = t.borrow();
        if t.sign == 0 {
            continue;
        }
        acc.add_signed(&term_product(t, table)?, t.sign as i64);
    }
    Ok(acc)
}

/// Parallel version of [`eval_terms`]; the summation order is unspecified.
pub fn eval_terms_par<M>(terms: &[SignedTerm], table: &SegmentTable<M>) -> Result<M>
where
    M: MatrixAlgebra + Send + Sync,
{
    terms
        .par_iter()
        .filter(|t| t.sign != 0)
        .map(|t| {
            let mut m = M::zeros(table.w);
            m.add_signed(&term_product(t, table)?, t.sign as i64);
            Ok(m)
        })
        .try_reduce(
            || M::zeros(table.w),
            |mut a, b| {
                a.add_signed(&b, 1);
                Ok(a)
            },
        )
}

pub fn richardson_eval<M: MatrixAlgebra>(terms: &TermSet, table: &SegmentTable<M>) -> Result<M> {
    eval_terms(&terms.terms, table)
}

pub fn binary_splitting_eval<M: MatrixAlgebra>(terms: &TermSet, table: &SegmentTable<M>) -> Result<M> {
    eval_terms(&terms.terms, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RatMatrix;

    fn bp(v: &[usize]) -> Vec<usize> {
        v.to_vec()
    }

    #[test]
    fn degree_one_is_single_term() {
        for n in 1..6 {
            let t = richardson_terms(n, 1).unwrap();
            assert_eq!(t.terms, vec![SignedTerm { sign: 1, breakpoints: vec![n] }]);
        }
        assert!(richardson_terms(3, 2).is_err());
    }

    #[test]
    fn richardson_degree_three_by_hand() {
        // B_{0,2} + Σ_{r ∈ {1,2}} (B_{0,r−1} A_r − B_{0,r}) B_{r,2}
        let t = richardson_terms(2, 3).unwrap();
        let got: Vec<(i8, Vec<usize>)> = t.terms.iter().map(|t| (t.sign, t.breakpoints.clone())).collect();
        assert_eq!(
            got,
            vec![(1, bp(&[2, 2, 2])), (1, bp(&[1, 2, 2])), (-1, bp(&[1, 2, 2])), (1, bp(&[1, 2, 2])), (-1, bp(&[2, 2, 2]))]
        );
        assert_eq!(t.len() as u128, richardson_count(2, 3));
        assert!(t.len() <= 16usize.pow(4));
    }

    #[test]
    fn counts_match_formula() {
        for n in 1..9 {
            for k in [1, 3, 5, 7] {
                assert_eq!(richardson_terms(n, k).unwrap().len() as u128, richardson_count(n, k));
            }
        }
    }

    #[test]
    fn bound_formulas() {
        assert!((richardson_bound(1e-2, 4, 3) - 5e-4).abs() < 1e-18);
        assert!((richardson_bound(0.3, 7, 1) - 2.4).abs() < 1e-12);
        assert!((weighted_bound_regular(1.0 / (60.0 * 3.0), 8, 2) - 0.25).abs() < 1e-12);
        assert_eq!(weighted_bound_regular(0.1, 8, 0), 1.0);
    }

    #[test]
    fn binary_splitting_small_cases() {
        let t = binary_splitting_terms(2, 0).unwrap();
        assert_eq!(t.terms, vec![SignedTerm { sign: 1, breakpoints: vec![2] }]);
        let t = binary_splitting_terms(4, 1).unwrap();
        let mut got: Vec<(i8, Vec<usize>)> = t.terms.iter().map(|t| (t.sign, t.breakpoints.clone())).collect();
        got.sort();
        let mut want = vec![(1, bp(&[1, 2, 4])), (1, bp(&[2, 3, 4])), (-1, bp(&[2, 4]))];
        want.sort();
        assert_eq!(got, want);
        assert!(binary_splitting_terms(6, 1).is_err());
        for k in 0..4 {
            let t = binary_splitting_terms(16, k).unwrap();
            assert!(t.terms.iter().all(|t| t.factors().all(|(a, b)| in_bs(16, a, b))));
        }
    }

    #[test]
    fn exact_table_gives_exact_product() {
        let f = Robp::from_fn(4, 3, 1, 0, &[0], |t, u, x| (u * (t + 1) + x as usize) % 3).unwrap();
        let table = SegmentTable::exact(&f);
        let want = f.segment_product(0, 4);
        for k in [1, 3, 5] {
            assert!(richardson_eval(&richardson_terms(4, k).unwrap(), &table).unwrap().max_abs_diff(&want) < 1e-12);
        }
        for k in 0..3 {
            let got = binary_splitting_eval(&binary_splitting_terms(4, k).unwrap(), &table).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn zero_padding_and_text_round_trip() {
        let t = richardson_terms(3, 3).unwrap();
        let p = t.padded_pow2();
        assert!(p.len().is_power_of_two() && p.len() >= t.len());
        let f = Robp::from_fn(3, 2, 1, 0, &[0], |_, u, x| u ^ x as usize).unwrap();
        let table = SegmentTable::exact(&f);
        assert!(richardson_eval(&t, &table).unwrap().max_abs_diff(&richardson_eval(&p, &table).unwrap()) < 1e-15);
        assert_eq!(TermSet::from_text(&p.to_text()).unwrap(), p);
        assert!(TermSet::from_text("richardson 3 3\n+1 2 1 3\n").is_err());
    }

    #[test]
    fn rational_and_parallel_agree() {
        let f = Robp::from_fn(4, 2, 1, 1, &[0], |t, u, x| if t % 2 == 0 { u ^ x as usize } else { u & x as usize }).unwrap();
        let table = SegmentTable::exact(&f);
        let rt = SegmentTable::from_fn(4, 2, |i, j| Some(RatMatrix::from_f64(&table.get(i, j).unwrap())));
        let terms = richardson_terms(4, 5).unwrap();
        let r = richardson_eval(&terms, &rt).unwrap();
        let p = eval_terms_par(&terms.terms, &table).unwrap();
        assert!(r.to_f64().max_abs_diff(&p) < 1e-12);
        assert!(r.to_f64().max_abs_diff(&f.segment_product(0, 4)) < 1e-12);
    }
}
