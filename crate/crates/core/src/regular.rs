//! Derandomization of regular programs with two-way labelings.
//!
//! A walk seed for `L` expander levels is one integer laid out most significant
//! first as `x ‖ e_1 ‖ … ‖ e_L`; the prefix `(x, e_1, …, e_{t−1})` is a vertex
//! of `H_t` and `e_t` is an edge label of `H_t`.

use crate::error::{Error, Result};
use crate::error_reduction::{binary_splitting_terms, eval_terms, bs_entrywise_bound, SegmentTable, SignedTerm};
use crate::generators::{inw_family, FamilyPolicy};
use crate::matrix::{sv_approx_error, RatMatrix, StochMatrix};
use crate::randomness::{lambda_measure, Expander};
use crate::robp::{Robp, TwoWayLabeling, MAX_ALPHABET_BITS};
use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

/// Largest `w · 2^s` enumerated per layer.
pub const LAYER_CAP_BITS: u32 = 26;

/// Regular bigraph `[left] × [d] → [right] × [d]` given by its rotation map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledBigraph {
    left: usize,
    right: usize,
    d: u64,
    rot: Vec<(u32, u64)>,
}

impl LabeledBigraph {
    pub fn from_fn(left: usize, right: usize, d: u64, mut f: impl FnMut(usize, u64) -> (usize, u64)) -> Result<Self> {
        let mut rot = Vec::with_capacity(left * d as usize);
        for u in 0..left {
            for i in 0..d {
                let (v, j) = f(u, i);
                rot.push((v as u32, j));
            }
        }
        let g = LabeledBigraph { left, right, d, rot };
        g.check()?;
        Ok(g)
    }

    /// Layer `t` of a labeled program.
    pub fn from_layer(f: &Robp, t: usize) -> Result<Self> {
        let lab = f.labeling().ok_or_else(|| Error::Labeling("program has no labeling".into()))?;
        Self::from_fn(f.w(), f.w(), f.alphabet(), |u, x| {
            let (v, j) = f.rotation_step(lab, t, u, x).expect("in range");
            (v, j)
        })
    }

    /// `H` as a bigraph on `[vertices]`.
    pub fn from_expander(h: &Expander) -> Result<Self> {
        let n = h.vertices() as usize;
        Self::from_fn(n, n, h.degree(), |v, i| {
            let (nv, j) = h.rot(v as u64, i);
            (nv as usize, j)
        })
    }

    pub fn left(&self) -> usize {
        self.left
    }
    pub fn right(&self) -> usize {
        self.right
    }
    pub fn degree(&self) -> u64 {
        self.d
    }

    pub fn rot(&self, u: usize, i: u64) -> (usize, u64) {
        let (v, j) = self.rot[u * self.d as usize + i as usize];
        (v as usize, j)
    }

    /// Both label sides collision-free and in range.
    pub fn check(&self) -> Result<()> {
        if self.left * self.d as usize != self.right * self.d as usize {
            return Err(Error::NotRegular);
        }
        let mut seen = vec![false; self.right * self.d as usize];
        for &(v, j) in &self.rot {
            if v as usize >= self.right || j >= self.d {
                return Err(Error::Labeling(format!("rotation ({v}, {j}) out of range")));
            }
            if std::mem::replace(&mut seen[v as usize * self.d as usize + j as usize], true) {
                return Err(Error::Labeling(format!("(v={v}, label {j}) hit twice")));
            }
        }
        Ok(())
    }

    /// Row-stochastic matrix `M[u][v]` = fraction of `u`'s edges entering `v`.
    pub fn transition_matrix(&self) -> Result<StochMatrix> {
        if self.left != self.right {
            return Err(Error::Dimension("rectangular bigraph".into()));
        }
        let mut m = StochMatrix::zeros(self.left);
        let inv = 1.0 / self.d as f64;
        for u in 0..self.left {
            for i in 0..self.d {
                m.add_at(u, self.rot(u, i).0, inv);
            }
        }
        Ok(m)
    }
}

/// `G_1 ⓟ_H G_2`: label `(i_0, j_0)` is encoded `i_0 · c + j_0`.
pub fn derandomized_product(g1: &LabeledBigraph, g2: &LabeledBigraph, h: &Expander) -> Result<LabeledBigraph> {
    if g1.right != g2.left {
        return Err(Error::Dimension(format!("G_1 has {} right vertices, G_2 has {} left", g1.right, g2.left)));
    }
    if g1.d != g2.d || h.vertices() != g1.d {
        return Err(Error::Param(format!("degrees {} and {} against an expander on {} vertices", g1.d, g2.d, h.vertices())));
    }
    let c = h.degree();
    LabeledBigraph::from_fn(g1.left, g2.right, g1.d * c, |v0, lab| {
        let (i0, j0) = (lab / c, lab % c);
        let (v1, i1) = g1.rot(v0, i0);
        let (i2, j1) = h.rot(i1, j0);
        let (v2, i3) = g2.rot(v1, i2);
        (v2, i3 * c + j1)
    })
}

/// Layered access to a labeled regular program.
pub trait Rotation: Send + Sync {
    fn n(&self) -> usize;
    fn w(&self) -> usize;
    fn s(&self) -> u32;
    fn rot(&self, t: usize, u: usize, x: u64) -> (usize, u64);
}

impl Rotation for Robp {
    fn n(&self) -> usize {
        Robp::n(self)
    }
    fn w(&self) -> usize {
        Robp::w(self)
    }
    fn s(&self) -> u32 {
        Robp::s(self)
    }
    fn rot(&self, t: usize, u: usize, x: u64) -> (usize, u64) {
        Robp::rot(self, t, u, x)
    }
}

/// Walk over `2^L` layers with expander levels `H_1 … H_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerandWalk {
    s: u32,
    family: Vec<Expander>,
    /// `below[t]` = bits of `e_{t+1} … e_L`.
    below: Vec<u32>,
}

impl DerandWalk {
    pub fn new(s: u32, family: Vec<Expander>) -> Result<Self> {
        let mut bits = s;
        for (t, h) in family.iter().enumerate() {
            h.validate()?;
            if h.vertices() != 1u64 << bits {
                return Err(Error::Param(format!("H_{} has {} vertices, labels need 2^{bits}", t + 1, h.vertices())));
            }
            if !h.degree().is_power_of_two() {
                return Err(Error::Param(format!("H_{} degree {} is not a power of two", t + 1, h.degree())));
            }
            bits += h.degree_bits();
        }
        if bits > 63 {
            return Err(Error::CapExceeded { bits, cap: 63 });
        }
        let mut below = vec![0u32; family.len() + 1];
        for t in (0..family.len()).rev() {
            below[t] = below[t + 1] + family[t].degree_bits();
        }
        Ok(DerandWalk { s, family, below })
    }

    /// Walk for segments of up to `2^levels` layers with the cheapest family meeting `lambda`.
    pub fn for_levels(s: u32, levels: usize, lambda: f64, max_degree_bits: u32) -> Result<Self> {
        Self::new(s, inw_family(s, levels, lambda, max_degree_bits, FamilyPolicy::Cheapest)?)
    }

    pub fn levels(&self) -> usize {
        self.family.len()
    }
    pub fn family(&self) -> &[Expander] {
        &self.family
    }
    pub fn span(&self) -> usize {
        1 << self.family.len()
    }
    pub fn symbol_bits(&self) -> u32 {
        self.s
    }
    pub fn seed_bits(&self) -> u32 {
        self.s + self.below[0]
    }

    pub fn lambda_max(&self) -> Result<f64> {
        self.family.iter().try_fold(0.0f64, |m, h| Ok(m.max(lambda_measure(h)?)))
    }

    /// `Rot` of the derandomized graph over layers `[l, r)`, padded with identity
    /// layers to `2^L`.
    pub fn walk(&self, f: &dyn Rotation, l: usize, r: usize, u: usize, seed: u64) -> (usize, u64) {
        let low = self.below[0];
        let low_mask = (1u64 << low) - 1;
        let mut v = u;
        let mut z = seed;
        let span = self.span();
        for i in 1..=span {
            let layer = l + i - 1;
            if layer < r {
                let (nv, x) = f.rot(layer, v, z >> low);
                v = nv;
                z = (x << low) | (z & low_mask);
            }
            if i < span {
                let t = i.trailing_zeros() as usize + 1;
                let (hi, lo) = (self.below[t - 1], self.below[t]);
                let prefix = z >> hi;
                let e = (z >> lo) & ((1u64 << (hi - lo)) - 1);
                let (np, ne) = self.family[t - 1].rot(prefix, e);
                z = (np << hi) | (ne << lo) | (z & ((1u64 << lo) - 1));
            }
        }
        (v, z)
    }

    fn check_segment(&self, f: &dyn Rotation, l: usize, r: usize) -> Result<()> {
        if l > r || r > f.n() {
            return Err(Error::LayerRange { i: l, j: r, n: f.n() });
        }
        if r - l > self.span() {
            return Err(Error::Param(format!("segment of {} layers exceeds the walk span {}", r - l, self.span())));
        }
        if f.s() != self.s {
            return Err(Error::Shape(format!("walk reads {} bits, program has {}", self.s, f.s())));
        }
        let bits = self.seed_bits() + usize::BITS - f.w().leading_zeros();
        if bits > LAYER_CAP_BITS + 1 {
            return Err(Error::CapExceeded { bits, cap: LAYER_CAP_BITS });
        }
        Ok(())
    }

    /// Edge counts `C[u][v]` of the walk graph, summed over all seeds.
    fn counts(&self, f: &dyn Rotation, l: usize, r: usize) -> Result<Vec<Vec<u64>>> {
        self.check_segment(f, l, r)?;
        let w = f.w();
        Ok((0..w)
            .into_par_iter()
            .map(|u| {
                let mut row = vec![0u64; w];
                for seed in 0..1u64 << self.seed_bits() {
                    row[self.walk(f, l, r, u, seed).0] += 1;
                }
                row
            })
            .collect())
    }

    /// Transition matrix of the walk graph over `[l, r)`, by enumerating `(u, seed)`.
    pub fn matrix(&self, f: &dyn Rotation, l: usize, r: usize) -> Result<StochMatrix> {
        let c = self.counts(f, l, r)?;
        let inv = 1.0 / (1u64 << self.seed_bits()) as f64;
        Ok(StochMatrix::from_fn(f.w(), |u, v| c[u][v] as f64 * inv))
    }

    pub fn matrix_rational(&self, f: &dyn Rotation, l: usize, r: usize) -> Result<RatMatrix> {
        let c = self.counts(f, l, r)?;
        let den = BigInt::from(1u64 << self.seed_bits());
        let mut m = RatMatrix::zeros(f.w());
        for (u, row) in c.iter().enumerate() {
            for (v, &k) in row.iter().enumerate() {
                m.set(u, v, BigRational::new(BigInt::from(k), den.clone()));
            }
        }
        Ok(m)
    }

    /// The walk over `[l, r)` as a one-layer labeled program graph.
    pub fn bigraph(&self, f: &dyn Rotation, l: usize, r: usize) -> Result<LabeledBigraph> {
        self.check_segment(f, l, r)?;
        LabeledBigraph::from_fn(f.w(), f.w(), 1u64 << self.seed_bits(), |u, seed| self.walk(f, l, r, u, seed))
    }
}

/// `derand_walk_matrix` for a labeled program.
pub fn derand_walk_matrix(walk: &DerandWalk, f: &dyn Rotation, l: usize, r: usize) -> Result<StochMatrix> {
    walk.matrix(f, l, r)
}

/// Program whose layer `t` is the walk over `segments[t]` of `parent`; rotations
/// are computed on demand through the parent.
#[derive(Clone)]
pub struct ReducedRegular {
    parent: Arc<dyn Rotation>,
    walk: Arc<DerandWalk>,
    segments: Vec<(usize, usize)>,
}

impl ReducedRegular {
    pub fn new(parent: Arc<dyn Rotation>, walk: Arc<DerandWalk>, segments: Vec<(usize, usize)>) -> Result<Self> {
        for &(l, r) in &segments {
            walk.check_segment(&*parent, l, r)?;
        }
        Ok(ReducedRegular { parent, walk, segments })
    }

    pub fn segments(&self) -> &[(usize, usize)] {
        &self.segments
    }
}

impl Rotation for ReducedRegular {
    fn n(&self) -> usize {
        self.segments.len()
    }
    fn w(&self) -> usize {
        self.parent.w()
    }
    fn s(&self) -> u32 {
        self.walk.seed_bits()
    }
    fn rot(&self, t: usize, u: usize, x: u64) -> (usize, u64) {
        let (l, r) = self.segments[t];
        self.walk.walk(&*self.parent, l, r, u, x)
    }
}

/// Explicit labeled program with the rotations of `g`.
pub fn materialize(g: &dyn Rotation, start: usize, accept: &[usize]) -> Result<Robp> {
    let (n, w, s) = (g.n(), g.w(), g.s());
    if s > MAX_ALPHABET_BITS {
        return Err(Error::CapExceeded { bits: s, cap: MAX_ALPHABET_BITS });
    }
    let layers: Vec<(Vec<u32>, Vec<u32>)> = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut tr = Vec::with_capacity(w << s);
            let mut inc = Vec::with_capacity(w << s);
            for u in 0..w {
                for x in 0..1u64 << s {
                    let (v, j) = g.rot(t, u, x);
                    tr.push(v as u32);
                    inc.push(j as u32);
                }
            }
            (tr, inc)
        })
        .collect();
    let (mut trans, mut inc) = (Vec::new(), Vec::new());
    for (tr, ic) in layers {
        trans.extend(tr);
        inc.extend(ic);
    }
    Robp::new(n, w, s, trans, start, accept)?.with_labeling(TwoWayLabeling::from_incoming(n, w, s, inc))
}

/// One level of the regular schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerandLevel {
    pub k: usize,
    pub lambda: f64,
    #[serde(default = "default_degree_bits")]
    pub max_degree_bits: u32,
    /// Declared sv error of the walk matrices; `None` measures it on the programs met.
    #[serde(default)]
    pub tau: Option<f64>,
}

fn default_degree_bits() -> u32 {
    8
}

/// A level instantiated for an input shape.
#[derive(Clone, Debug)]
pub struct BuiltLevel {
    pub n_in: usize,
    pub s_in: u32,
    pub k: usize,
    pub walk: Arc<DerandWalk>,
    pub terms: Vec<SignedTerm>,
    /// Factor intervals per term, padded with empty intervals to `n_out`.
    pub slots: Vec<Vec<(usize, usize)>>,
    pub n_out: usize,
    pub tau: Option<f64>,
}

impl BuiltLevel {
    pub fn s_out(&self) -> u32 {
        self.walk.seed_bits()
    }

    /// Number of terms `K`.
    pub fn count(&self) -> usize {
        self.terms.len()
    }

    fn used_segments(&self) -> BTreeSet<(usize, usize)> {
        self.slots.iter().flatten().copied().filter(|&(a, b)| a < b).collect()
    }
}

/// Instantiates `levels` over programs of length `n` (a power of two) and `s`-bit symbols.
pub fn build_levels(n: usize, s: u32, levels: &[DerandLevel]) -> Result<Vec<BuiltLevel>> {
    let (mut n_cur, mut s_cur) = (n, s);
    let mut out = Vec::with_capacity(levels.len());
    for lv in levels {
        if !n_cur.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n_cur));
        }
        let big_l = n_cur.trailing_zeros() as usize;
        let walk = Arc::new(DerandWalk::for_levels(s_cur, big_l, lv.lambda, lv.max_degree_bits)?);
        let set = binary_splitting_terms(n_cur, lv.k)?;
        let width = set.max_factors().next_power_of_two();
        let slots = set
            .terms
            .iter()
            .map(|t| {
                let mut v: Vec<(usize, usize)> = t.factors().collect();
                v.resize(width, (n_cur, n_cur));
                v
            })
            .collect();
        let b = BuiltLevel { n_in: n_cur, s_in: s_cur, k: lv.k, walk, terms: set.terms, slots, n_out: width, tau: lv.tau };
        n_cur = b.n_out;
        s_cur = b.s_out();
        out.push(b);
    }
    Ok(out)
}

/// `f_{i_1…i_p}` for the index path `path`, computed lazily.
pub fn reduced_regular_program(f: Arc<dyn Rotation>, levels: &[BuiltLevel], path: &[usize]) -> Result<Arc<dyn Rotation>> {
    if path.len() > levels.len() {
        return Err(Error::Param(format!("path of length {} for {} levels", path.len(), levels.len())));
    }
    let mut g = f;
    for (lv, &i) in levels.iter().zip(path) {
        if i >= lv.count() {
            return Err(Error::Param(format!("term index {i} out of {}", lv.count())));
        }
        if g.n() != lv.n_in || g.s() != lv.s_in {
            return Err(Error::Shape(format!("level expects ({}, {}), program is ({}, {})", lv.n_in, lv.s_in, g.n(), g.s())));
        }
        g = Arc::new(ReducedRegular::new(g, lv.walk.clone(), lv.slots[i].clone())?);
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularLevelReport {
    pub n: usize,
    pub s: u32,
    pub k: usize,
    pub terms: usize,
    pub lambda_max: f64,
    /// `11 λ log n`, the provable sv error of the walk matrices.
    pub tau_bound: f64,
    /// Largest measured sv error over the walk matrices used at this level.
    pub tau_measured: f64,
    /// τ used in the declared error (explicit or measured).
    pub tau: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularEstimate {
    pub value: f64,
    pub declared: f64,
    pub levels: Vec<RegularLevelReport>,
    pub seed_bits: u32,
}

/// `Σ σ_{i_1} ⋯ σ_{i_ℓ} E f_{i_1…i_ℓ}` over all index tuples. Each level's walk
/// matrices are enumerated once per parent program; the last level is read out
/// through the term products. The declared error is
/// `Σ_p (Π_{q<p} K_q) · (4√τ_p log n_{p−1})^{k_p+1} · w`.
pub fn regular_estimator(f: &Robp, levels: &[DerandLevel]) -> Result<RegularEstimate> {
    if !f.is_regular() {
        return Err(Error::NotRegular);
    }
    let f = match f.labeling() {
        Some(_) => f.clone(),
        None => f.labeled()?,
    };
    let n_pad = f.n().next_power_of_two();
    let f = if n_pad == f.n() { f } else { f.pad_identity(n_pad)? };
    let built = build_levels(n_pad, f.s(), levels)?;
    let mut taus = vec![0.0f64; built.len()];
    let value = estimate_rec(&f, &built, 0, &mut taus)?;
    let mut reports = Vec::with_capacity(built.len());
    let mut declared = 0.0;
    let mut mult = 1.0;
    for (p, lv) in built.iter().enumerate() {
        let lam = lv.walk.lambda_max()?;
        let tau = lv.tau.unwrap_or(taus[p]);
        let eps = bs_entrywise_bound(tau, lv.n_in, lv.k);
        declared += mult * eps * f.w() as f64;
        mult *= lv.count() as f64;
        reports.push(RegularLevelReport {
            n: lv.n_in,
            s: lv.s_in,
            k: lv.k,
            terms: lv.count(),
            lambda_max: lam,
            tau_bound: 11.0 * lam * lv.walk.levels() as f64,
            tau_measured: taus[p],
            tau,
            eps,
        });
    }
    let index_bits: u32 = built.iter().map(|l| l.count().next_power_of_two().trailing_zeros()).sum();
    let seed_bits = index_bits + built.last().map_or(f.s(), |l| l.s_out()) * built.last().map_or(f.n(), |l| l.n_out) as u32;
    Ok(RegularEstimate { value, declared, levels: reports, seed_bits })
}

fn estimate_rec(g: &Robp, built: &[BuiltLevel], p: usize, taus: &mut [f64]) -> Result<f64> {
    if p == built.len() {
        return Ok(g.exact_expectation());
    }
    let lv = &built[p];
    let segs: Vec<(usize, usize)> = lv.used_segments().into_iter().collect();
    let mats = segs.iter().map(|&(a, b)| lv.walk.matrix(g, a, b)).collect::<Result<Vec<_>>>()?;
    let mut table = SegmentTable::new(g.n(), g.w());
    for (&(a, b), m) in segs.iter().zip(mats) {
        if b - a >= 2 {
            taus[p] = taus[p].max(sv_approx_error(&m, &g.segment_product(a, b))?);
        }
        table.set(a, b, m);
    }
    if p + 1 == built.len() {
        return Ok(g.readout(&eval_terms(&lv.terms, &table)?));
    }
    let parent: Arc<dyn Rotation> = Arc::new(g.clone());
    let mut total = 0.0;
    for (i, t) in lv.terms.iter().enumerate() {
        let child = ReducedRegular::new(parent.clone(), lv.walk.clone(), lv.slots[i].clone())?;
        let child = materialize(&child, g.start(), &g.accept_set())?;
        total += t.sign as f64 * estimate_rec(&child, built, p + 1, taus)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Layers are unions of `2^s` random perfect matchings with canonical labels.
    fn random_regular(n: usize, w: usize, s: u32, seed: u64) -> Robp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perms = Vec::new();
        for _ in 0..n {
            let layer: Vec<Vec<usize>> = (0..1 << s)
                .map(|_| {
                    let mut p: Vec<usize> = (0..w).collect();
                    p.shuffle(&mut rng);
                    p
                })
                .collect();
            perms.push(layer);
        }
        let acc = rng.gen_range(0..w);
        Robp::from_fn(n, w, s, 0, &[acc], |t, u, x| perms[t][x as usize][u]).unwrap().labeled().unwrap()
    }

    #[test]
    fn product_with_complete_graph_is_exact() {
        let f = random_regular(2, 4, 2, 1);
        let g1 = LabeledBigraph::from_layer(&f, 0).unwrap();
        let g2 = LabeledBigraph::from_layer(&f, 1).unwrap();
        let p = derandomized_product(&g1, &g2, &Expander::complete(4)).unwrap();
        assert_eq!(p.degree(), 16);
        p.check().unwrap();
        let exact = f.segment_product(0, 2);
        assert!(p.transition_matrix().unwrap().max_abs_diff(&exact) < 1e-12);
    }

    #[test]
    fn product_sv_error_within_two_lambda() {
        let h = Expander::mgg(2).tensor_k2();
        let lam = lambda_measure(&h).unwrap();
        for seed in 0..10 {
            let f = random_regular(2, 5, 3, seed);
            let g1 = LabeledBigraph::from_layer(&f, 0).unwrap();
            let g2 = LabeledBigraph::from_layer(&f, 1).unwrap();
            let p = derandomized_product(&g1, &g2, &h).unwrap();
            p.check().unwrap();
            let e = sv_approx_error(&p.transition_matrix().unwrap(), &f.segment_product(0, 2)).unwrap();
            assert!(e <= 2.0 * lam + 1e-9, "{e} > 2·{lam}");
        }
    }

    #[test]
    fn unit_walk_is_one_rotation() {
        let f = random_regular(3, 4, 1, 2);
        let walk = DerandWalk::new(1, vec![]).unwrap();
        for u in 0..4 {
            for x in 0..2 {
                assert_eq!(walk.walk(&f, 1, 2, u, x), f.rot(1, u, x));
            }
        }
    }

    #[test]
    fn walk_matches_recursive_products() {
        let f = random_regular(4, 4, 1, 3);
        let walk = DerandWalk::for_levels(1, 2, 0.7, 8).unwrap();
        let fam = walk.family().to_vec();
        let layer = |t| LabeledBigraph::from_layer(&f, t).unwrap();
        let left = derandomized_product(&layer(0), &layer(1), &fam[0]).unwrap();
        let right = derandomized_product(&layer(2), &layer(3), &fam[0]).unwrap();
        let full = derandomized_product(&left, &right, &fam[1]).unwrap();
        assert_eq!(walk.bigraph(&f, 0, 4).unwrap(), full);
    }

    #[test]
    fn walk_is_bijective_and_doubly_stochastic() {
        for seed in 0..5 {
            let f = random_regular(4, 4, 1, seed);
            let walk = DerandWalk::for_levels(1, 2, 0.7, 8).unwrap();
            for (l, r) in [(0, 4), (1, 3), (2, 3), (0, 2)] {
                walk.bigraph(&f, l, r).unwrap().check().unwrap();
                assert!(walk.matrix_rational(&f, l, r).unwrap().is_doubly_stochastic());
            }
        }
    }

    #[test]
    fn walk_sv_error_within_bound() {
        let walk = DerandWalk::for_levels(2, 3, 0.7, 8).unwrap();
        let lam = walk.lambda_max().unwrap();
        assert!(lam > 0.0);
        for seed in 0..5 {
            let f = random_regular(8, 4, 2, seed);
            for (l, r) in [(0, 8), (0, 4), (4, 8), (2, 4)] {
                let e = sv_approx_error(&walk.matrix(&f, l, r).unwrap(), &f.segment_product(l, r)).unwrap();
                assert!(e <= 11.0 * lam * 3.0);
            }
        }
    }

    #[test]
    fn zero_lambda_walk_is_exact() {
        let f = random_regular(8, 3, 1, 9);
        let walk = DerandWalk::for_levels(1, 3, 0.0, 12).unwrap();
        assert_eq!(walk.lambda_max().unwrap(), 0.0);
        assert!(walk.matrix(&f, 0, 8).unwrap().max_abs_diff(&f.segment_product(0, 8)) < 1e-12);
    }

    #[test]
    fn reduced_programs_keep_labelings() {
        let f = random_regular(4, 4, 1, 4);
        let built = build_levels(4, 1, &[DerandLevel { k: 1, lambda: 0.7, max_degree_bits: 8, tau: None }]).unwrap();
        let root: Arc<dyn Rotation> = Arc::new(f.clone());
        assert_eq!(reduced_regular_program(root.clone(), &built, &[]).unwrap().n(), 4);
        for i in 0..built[0].count() {
            let g = reduced_regular_program(root.clone(), &built, &[i]).unwrap();
            let m = materialize(&*g, 0, &[0]).unwrap();
            assert!(m.is_regular());
            for (t, &(a, b)) in built[0].slots[i].iter().enumerate() {
                let got = m.one_step_average(t);
                assert!(got.max_abs_diff(&built[0].walk.matrix(&f, a, b).unwrap()) < 1e-12);
            }
        }
    }

    #[test]
    fn no_levels_is_exact() {
        let f = random_regular(5, 4, 2, 5);
        let r = regular_estimator(&f, &[]).unwrap();
        assert!((r.value - f.exact_expectation()).abs() < 1e-12);
        assert_eq!(r.declared, 0.0);
    }

    #[test]
    fn complete_family_estimate_is_exact() {
        let f = random_regular(4, 3, 1, 6);
        let lv = DerandLevel { k: 1, lambda: 0.0, max_degree_bits: 12, tau: None };
        let r = regular_estimator(&f, &[lv.clone(), lv]).unwrap();
        assert!((r.value - f.exact_expectation()).abs() < 1e-9);
    }

    #[test]
    fn one_level_within_declared() {
        for seed in 0..5 {
            let f = random_regular(8, 4, 1, 10 + seed);
            let r = regular_estimator(&f, &[DerandLevel { k: 1, lambda: 0.3, max_degree_bits: 8, tau: None }]).unwrap();
            let err = (r.value - f.exact_expectation()).abs();
            assert!(err <= r.declared + 1e-12, "{err} > {}", r.declared);
            assert!(r.levels[0].tau_measured <= r.levels[0].tau_bound + 1e-12);
        }
    }
}
