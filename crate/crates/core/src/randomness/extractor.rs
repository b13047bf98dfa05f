//! Seeded extractor built from multiplication in GF(2^n).
//!
//! `Ext(x, y)` is the top `m_out` bits of `a_y · x`, where the multiplier
//! `a_y = (y mod (2^n − 1)) + 1` is never zero. For every seed the map
//! `x ↦ a_y · x` is a bijection, so each output value has exactly
//! `2^{n−m}` preimages and a uniform source is mapped to exactly uniform output.

use super::gf2::Gf2n;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Work limit for the exhaustive error computations.
const WORK_CAP: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractorParams {
    pub n_src: u32,
    pub d_ext: u32,
    pub m_out: u32,
    pub k_min: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractorSpec {
    pub n_src: u32,
    pub d_ext: u32,
    pub m_out: u32,
    pub k_min: u32,
    /// Certified error at min-entropy `k_min` (see [`ExtractorSpec::measured_error`]).
    pub eps_ext: f64,
    field: Gf2n,
}

impl ExtractorSpec {
    pub fn new(n_src: u32, d_ext: u32, m_out: u32, k_min: u32) -> Result<Self> {
        if n_src == 0 || n_src > 32 || d_ext == 0 || d_ext > 32 {
            return Err(Error::Param(format!("extractor needs 1 ≤ n_src, d_ext ≤ 32 (got {n_src}, {d_ext})")));
        }
        if m_out > n_src || k_min > n_src {
            return Err(Error::Param(format!("need m_out, k_min ≤ n_src (got {m_out}, {k_min})")));
        }
        let mut spec = ExtractorSpec { n_src, d_ext, m_out, k_min, eps_ext: 1.0, field: Gf2n::new(n_src) };
        spec.eps_ext = spec.measured_error(k_min)?;
        Ok(spec)
    }

    pub fn from_params(p: &ExtractorParams) -> Result<Self> {
        Self::new(p.n_src, p.d_ext, p.m_out, p.k_min)
    }

    pub fn params(&self) -> ExtractorParams {
        ExtractorParams { n_src: self.n_src, d_ext: self.d_ext, m_out: self.m_out, k_min: self.k_min }
    }

    #[inline]
    pub fn multiplier(&self, y: u64) -> u64 {
        let order = (1u64 << self.n_src) - 1;
        (y % order) + 1
    }

    #[inline]
    pub fn eval(&self, x: u64, y: u64) -> u64 {
        if self.m_out == 0 {
            return 0;
        }
        self.field.mul(self.multiplier(y), x) >> (self.n_src - self.m_out)
    }

    pub fn eval_checked(&self, x: u64, y: u64) -> Result<u64> {
        if x >> self.n_src != 0 || y >> self.d_ext != 0 {
            return Err(Error::Param(format!("extractor input ({x}, {y}) exceeds ({}, {}) bits", self.n_src, self.d_ext)));
        }
        Ok(self.eval(x, y))
    }

    /// Number of seeds selecting each nonzero multiplier, indexed by `a − 1`.
    fn multiplier_counts(&self) -> Vec<u64> {
        let order = (1u64 << self.n_src) - 1;
        let seeds = 1u64 << self.d_ext;
        let distinct = order.min(seeds);
        let (q, r) = (seeds / order, seeds % order);
        if seeds <= order {
            vec![1; distinct as usize]
        } else {
            (0..order).map(|i| q + u64::from(i < r)).collect()
        }
    }

    /// `Pr_y[Ext(x, y) = o]` for every output `o`.
    pub fn output_distribution(&self, x: u64) -> Vec<f64> {
        let mut q = vec![0.0; 1 << self.m_out];
        for (o, p) in self.output_support(x) {
            q[o as usize] += p;
        }
        q
    }

    /// The outputs `Ext(x, ·)` with their probabilities, one entry per distinct multiplier.
    pub fn output_support(&self, x: u64) -> Vec<(u64, f64)> {
        let seeds = (1u64 << self.d_ext) as f64;
        self.multiplier_counts()
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let a = i as u64 + 1;
                let o = if self.m_out == 0 { 0 } else { self.field.mul(a, x) >> (self.n_src - self.m_out) };
                (o, c as f64 / seeds)
            })
            .collect()
    }

    /// `max_{z ≠ 0} Pr_y[top_m(a_y · z) = 0]`, the collision probability of the hash family.
    pub fn max_collision(&self) -> Result<f64> {
        let counts = self.multiplier_counts();
        let work = ((1u64 << self.n_src) - 1).saturating_mul(counts.len() as u64);
        if work > WORK_CAP {
            return Err(Error::CapExceeded { bits: 64 - work.leading_zeros(), cap: 32 });
        }
        let seeds = (1u64 << self.d_ext) as f64;
        let mut best = 0.0f64;
        for z in 1..(1u64 << self.n_src) {
            let mut hits = 0u64;
            for (i, &c) in counts.iter().enumerate() {
                if self.m_out == 0 || self.field.mul(i as u64 + 1, z) >> (self.n_src - self.m_out) == 0 {
                    hits += c;
                }
            }
            best = best.max(hits as f64 / seeds);
        }
        Ok(best)
    }

    /// Leftover-hash bound `½·sqrt(2^m (2^{−k} + cp) − 1)` on the distance of
    /// `(Y, Ext(X, Y))` from uniform for any source of min-entropy `k`.
    pub fn lhl_bound(&self, k: u32) -> Result<f64> {
        let cp = self.max_collision()?;
        let m = (1u64 << self.m_out) as f64;
        let v = m * (2f64.powi(-(k as i32)) + cp) - 1.0;
        Ok((0.5 * v.max(0.0).sqrt()).min(1.0))
    }

    /// Exact worst-case distance from uniform of `Ext(X, U)` over all sources of
    /// min-entropy `k` (the worst case is a flat source on `2^k` points).
    pub fn worst_flat_tv(&self, k: u32) -> Result<f64> {
        if self.m_out > 3 {
            return Err(Error::Infeasible(format!("exact worst-case search needs m_out ≤ 3, got {}", self.m_out)));
        }
        let work = (1u64 << self.n_src).saturating_mul(1u64 << self.d_ext.min(self.n_src));
        if work > WORK_CAP || k > self.n_src {
            return Err(Error::CapExceeded { bits: self.n_src + self.d_ext.min(self.n_src), cap: 32 });
        }
        let big_m = 1usize << self.m_out;
        let dists: Vec<Vec<f64>> = (0..1u64 << self.n_src).map(|x| self.output_distribution(x)).collect();
        let kk = 1usize << k;
        let mut best = 0.0f64;
        let mut vals = vec![0.0; dists.len()];
        for t in 1..(1usize << big_m) - 1 {
            for (v, q) in vals.iter_mut().zip(&dists) {
                *v = (0..big_m).filter(|o| t >> o & 1 == 1).map(|o| q[o]).sum();
            }
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let top: f64 = vals[..kk].iter().sum::<f64>() / kk as f64;
            best = best.max(top - t.count_ones() as f64 / big_m as f64);
        }
        Ok(best.max(0.0))
    }

    /// Best available certified error at min-entropy `k`: the exact worst case when
    /// it is computable, otherwise the leftover-hash bound.
    pub fn measured_error(&self, k: u32) -> Result<f64> {
        match self.worst_flat_tv(k) {
            Ok(v) => Ok(v),
            Err(_) => self.lhl_bound(k),
        }
    }
}

/// Exact distance of `Ext(X, U_d)` from uniform for an explicit source distribution.
pub fn extractor_tv_oracle(spec: &ExtractorSpec, source: &[f64]) -> Result<f64> {
    if source.len() != 1usize << spec.n_src {
        return Err(Error::Param(format!("source must list 2^{} probabilities", spec.n_src)));
    }
    if spec.n_src + spec.d_ext > 30 {
        return Err(Error::CapExceeded { bits: spec.n_src + spec.d_ext, cap: 30 });
    }
    let big_m = 1usize << spec.m_out;
    let mut hist = vec![0.0; big_m];
    let py = 1.0 / (1u64 << spec.d_ext) as f64;
    for (x, &p) in source.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for y in 0..1u64 << spec.d_ext {
            hist[spec.eval(x as u64, y) as usize] += p * py;
        }
    }
    Ok(0.5 * hist.iter().map(|h| (h - 1.0 / big_m as f64).abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_output() {
        let e = ExtractorSpec::new(6, 3, 0, 6).unwrap();
        assert!((0..64).all(|x| e.eval(x, 5) == 0));
    }

    #[test]
    fn regular_for_every_seed() {
        let e = ExtractorSpec::new(10, 4, 3, 8).unwrap();
        for y in 0..16 {
            let mut hist = [0u32; 8];
            for x in 0..1024 {
                hist[e.eval(x, y) as usize] += 1;
            }
            assert!(hist.iter().all(|&h| h == 128));
        }
    }

    #[test]
    fn point_mass_and_uniform_sources() {
        let e = ExtractorSpec::new(6, 4, 6, 6).unwrap();
        let mut point = vec![0.0; 64];
        point[5] = 1.0;
        // 16 seeds give 16 distinct outputs a·5, each with mass 1/16
        let tv = extractor_tv_oracle(&e, &point).unwrap();
        assert!((tv - (1.0 - 16.0 / 64.0)).abs() < 1e-12);
        let e1 = ExtractorSpec::new(6, 4, 1, 6).unwrap();
        assert!(extractor_tv_oracle(&e1, &vec![1.0 / 64.0; 64]).unwrap() < 1e-12);
    }

    #[test]
    fn half_cube_within_nominal() {
        let e = ExtractorSpec::new(8, 4, 2, 7).unwrap();
        let src: Vec<f64> = (0..256).map(|x| if x < 128 { 1.0 / 128.0 } else { 0.0 }).collect();
        assert!(extractor_tv_oracle(&e, &src).unwrap() <= e.eps_ext + 1e-12);
    }

    #[test]
    fn worst_case_dominates_lhl_free_sources() {
        let e = ExtractorSpec::new(8, 3, 2, 6).unwrap();
        let lhl = e.lhl_bound(6).unwrap();
        let exact = e.worst_flat_tv(6).unwrap();
        assert!(exact <= lhl + 1e-12, "{exact} > {lhl}");
    }
}
