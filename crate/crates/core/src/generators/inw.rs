//! The INW generator over a family of expanders.
//!
//! Seed layout for `L` levels, most significant first:
//!
//! ```text
//! | x_0 (s bits) | y_1 (log c_1) | y_2 (log c_2) | ... | y_L (log c_L) |
//! ```
//!
//! `INW_t(x, y_t) = INW_{t−1}(x), INW_{t−1}(H_t[x, y_t])` where `x` is the top
//! `s + Σ_{j<t} log c_j` bits, so `H_t` has `2^{s + Σ_{j<t} log c_j}` vertices.

use super::{check_segment, enumerate_segment, Generator, GeneratorDescriptor};
use crate::error::{Error, Result};
use crate::matrix::StochMatrix;
use crate::randomness::{cheapest_expander, lambda_measure, Expander};
use crate::robp::Robp;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub struct Inw {
    s: u32,
    family: Vec<Expander>,
    /// `level_bits[t]` = seed bits of `INW_t`.
    level_bits: Vec<u32>,
}

impl Inw {
    pub fn new(s: u32, family: Vec<Expander>) -> Result<Self> {
        if s == 0 {
            return Err(Error::Param("INW needs at least one symbol bit".into()));
        }
        let mut level_bits = vec![s];
        for (t, h) in family.iter().enumerate() {
            h.validate()?;
            let have = *level_bits.last().unwrap();
            if h.vertices() != 1u64 << have.min(63) || have >= 63 {
                return Err(Error::Param(format!(
                    "H_{} has {} vertices, level {} seeds need 2^{have}",
                    t + 1,
                    h.vertices(),
                    t
                )));
            }
            if !h.degree().is_power_of_two() {
                return Err(Error::Param(format!("H_{} has degree {}, not a power of two", t + 1, h.degree())));
            }
            let next = have + h.degree_bits();
            if next > 63 {
                return Err(Error::Param(format!("INW seed of {next} bits does not fit a u64")));
            }
            level_bits.push(next);
        }
        Ok(Inw { s, family, level_bits })
    }

    pub fn levels(&self) -> usize {
        self.family.len()
    }

    pub fn family(&self) -> &[Expander] {
        &self.family
    }

    /// Largest measured λ over the family.
    pub fn lambda_max(&self) -> Result<f64> {
        self.family.iter().try_fold(0.0f64, |a, h| Ok(a.max(lambda_measure(h)?)))
    }

    fn prefix_level(&self, m: usize) -> usize {
        let mut j = 0;
        while (1usize << j) < m {
            j += 1;
        }
        j
    }

    fn eval_level(&self, t: usize, seed: u64, m: usize, out: &mut Vec<u64>) {
        if m == 0 {
            return;
        }
        if t == 0 {
            out.push(seed);
            return;
        }
        let h = &self.family[t - 1];
        let yb = h.degree_bits();
        let (x, y) = (seed >> yb, seed & ((1u64 << yb) - 1));
        let half = 1usize << (t - 1);
        self.eval_level(t - 1, x, m.min(half), out);
        if m > half {
            self.eval_level(t - 1, h.neighbor(x, y), m - half, out);
        }
    }

    /// Averaged segment through the walk matrix of the top level used:
    /// `(1/D) Σ_x P(x) Σ_z W[z][x] Q(z)` with `P`, `Q` the two half transitions.
    pub fn averaged_segment_walk(&self, robp: &Robp, a: usize, len: usize) -> Result<StochMatrix> {
        check_segment(self, robp, a, len)?;
        let w = robp.w();
        let j = self.prefix_level(len);
        if j == 0 {
            return enumerate_segment(self, robp, a, len, 63);
        }
        let h = &self.family[j - 1];
        let wm = h.walk_matrix()?;
        let d = h.vertices() as usize;
        let half = 1usize << (j - 1);
        let mut buf = Vec::with_capacity(half);
        // maps[x][u] = endpoint of the half-walk from u driven by INW_{j-1}(x)
        let mut halves = |start: usize, m: usize| -> Vec<Vec<usize>> {
            (0..d as u64)
                .map(|x| {
                    buf.clear();
                    self.eval_level(j - 1, x, m, &mut buf);
                    (0..w).map(|u| robp.run_from(start, u, &buf)).collect()
                })
                .collect()
        };
        let p = halves(a, half.min(len));
        let q = halves(a + half.min(len), len.saturating_sub(half));
        let mut acc = vec![0.0; w * w];
        let mut r = vec![0.0; w * w];
        for x in 0..d {
            r.iter_mut().for_each(|v| *v = 0.0);
            for (z, qz) in q.iter().enumerate() {
                let wt = wm[(z, x)];
                if wt == 0.0 {
                    continue;
                }
                for (mid, &v) in qz.iter().enumerate() {
                    r[mid * w + v] += wt;
                }
            }
            for u in 0..w {
                let mid = p[x][u];
                for v in 0..w {
                    acc[u * w + v] += r[mid * w + v];
                }
            }
        }
        Ok(StochMatrix::from_fn(w, |u, v| acc[u * w + v] / d as f64))
    }
}

impl Generator for Inw {
    fn seed_bits(&self) -> u32 {
        *self.level_bits.last().unwrap()
    }
    fn out_len(&self) -> usize {
        1 << self.family.len()
    }
    fn symbol_bits(&self) -> u32 {
        self.s
    }
    fn eval_prefix(&self, seed: u64, m: usize, out: &mut Vec<u64>) {
        self.eval_level(self.levels(), seed, m.min(self.out_len()), out);
    }
    fn prefix_seed_bits(&self, m: usize) -> u32 {
        self.level_bits[self.prefix_level(m)]
    }
    fn descriptor(&self) -> GeneratorDescriptor {
        GeneratorDescriptor::Inw { s: self.s, family: self.family.clone() }
    }
    fn averaged_segment(&self, robp: &Robp, a: usize, len: usize, cap_bits: u32) -> Result<StochMatrix> {
        if len == 0 || self.prefix_seed_bits(len) <= cap_bits {
            return enumerate_segment(self, robp, a, len, cap_bits);
        }
        let j = self.prefix_level(len);
        if self.level_bits[j - 1] > crate::randomness::expander::DENSE_CAP.trailing_zeros() {
            return Err(Error::CapExceeded { bits: self.prefix_seed_bits(len), cap: cap_bits });
        }
        self.averaged_segment_walk(robp, a, len)
    }
}

/// How [`inw_family`] picks each level's graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyPolicy {
    /// Smallest degree meeting the λ target at every level.
    #[default]
    Cheapest,
    /// Cheapest at lower levels, an MGG power at the top level.
    MggTop,
}

/// Expander family for `levels` levels over `s`-bit symbols with measured λ ≤ `target`.
pub fn inw_family(s: u32, levels: usize, target: f64, max_degree_bits: u32, policy: FamilyPolicy) -> Result<Vec<Expander>> {
    let mut bits = s;
    let mut family = Vec::with_capacity(levels);
    for t in 0..levels {
        let vertices = 1u64 << bits;
        let top = t + 1 == levels;
        let h = if top && policy == FamilyPolicy::MggTop && bits >= 2 {
            let base = Expander::mgg_on_power_of_two(bits);
            let lam = lambda_measure(&base)?;
            let mut p = 1;
            while lam.powi(p as i32) > target {
                p += 1;
                if p * base.degree_bits() > max_degree_bits {
                    return Err(Error::Infeasible(format!(
                        "MGG power on {vertices} vertices needs more than {max_degree_bits} degree bits for λ ≤ {target}"
                    )));
                }
            }
            base.power(p)
        } else {
            cheapest_expander(vertices, target, max_degree_bits)?
        };
        bits += h.degree_bits();
        family.push(h);
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_sv_error, DEFAULT_SEED_CAP};

    #[test]
    fn level_zero_is_identity() {
        let g = Inw::new(3, vec![]).unwrap();
        assert_eq!(g.out_len(), 1);
        for x in 0..8 {
            assert_eq!(g.eval(x), vec![x]);
        }
    }

    #[test]
    fn two_symbols_by_hand() {
        let h = Expander::mgg(2).tensor_k2();
        let g = Inw::new(3, vec![h.clone()]).unwrap();
        assert_eq!(g.seed_bits(), 3 + h.degree_bits());
        for x in 0..8 {
            for y in 0..h.degree() {
                let seed = (x << h.degree_bits()) | y;
                assert_eq!(g.eval(seed), vec![x, h.neighbor(x, y)]);
            }
        }
    }

    #[test]
    fn seed_accounting_and_prefixes() {
        let fam = inw_family(2, 3, 0.3, 12, FamilyPolicy::Cheapest).unwrap();
        let g = Inw::new(2, fam.clone()).unwrap();
        assert_eq!(g.seed_bits(), 2 + fam.iter().map(|h| h.degree_bits()).sum::<u32>());
        for seed in (0..1u64 << g.seed_bits()).step_by(97) {
            let full = g.eval(seed);
            for m in 0..=8 {
                let mut p = Vec::new();
                g.eval_prefix(seed, m, &mut p);
                assert_eq!(p, full[..m]);
                // the prefix depends only on the top prefix_seed_bits(m) bits
                let low = g.seed_bits() - g.prefix_seed_bits(m);
                let mut q = Vec::new();
                g.eval_prefix(seed & !((1u64 << low) - 1), m, &mut q);
                assert_eq!(p, q);
            }
        }
    }

    #[test]
    fn mismatched_family_rejected() {
        assert!(Inw::new(2, vec![Expander::complete(8)]).is_err());
    }

    #[test]
    fn walk_route_matches_enumeration() {
        let fam = inw_family(1, 3, 0.5, 10, FamilyPolicy::MggTop).unwrap();
        let g = Inw::new(1, fam).unwrap();
        let f = Robp::from_fn(8, 3, 1, 0, &[2], |t, u, x| (u + x as usize * (t % 2 + 1)) % 3).unwrap();
        for (a, len) in [(0, 8), (1, 5), (3, 2), (2, 6)] {
            let e = enumerate_segment(&g, &f, a, len, 40).unwrap();
            let wk = g.averaged_segment_walk(&f, a, len).unwrap();
            assert!(e.max_abs_diff(&wk) < 1e-12);
        }
        let sv = gen_sv_error(&g, &f, DEFAULT_SEED_CAP).unwrap();
        assert!(sv <= 11.0 * g.lambda_max().unwrap() * 3.0);
    }
}
