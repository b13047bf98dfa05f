//! Seeded instance families.
//!
//! Randomness comes from ChaCha20 (the RFC 8439 block function as implemented
//! by `rand_chacha`), keyed by the 64-bit config seed expanded with
//! `seed_from_u64`, with the instance index as the stream id. Integers below
//! `m` use rejection on the top bits of `next_u64`; permutations are
//! Fisher–Yates from the last position down.

use crate::error::{Error, Result};
use crate::robp::{Robp, RobpClass};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub struct PortableRng(ChaCha20Rng);

impl PortableRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut r = ChaCha20Rng::seed_from_u64(seed);
        r.set_stream(stream);
        PortableRng(r)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, m)`.
    pub fn below(&mut self, m: u64) -> u64 {
        assert!(m > 0, "empty range");
        if m == 1 {
            return 0;
        }
        let bits = 64 - (m - 1).leading_zeros();
        loop {
            let v = self.next_u64() >> (64 - bits);
            if v < m {
                return v;
            }
        }
    }

    /// Uniform in `[lo, hi]`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below((hi - lo + 1) as u64) as usize
    }

    /// Uniform in `[0, 1)` with 53 bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            p.swap(i, j);
        }
        p
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptMode {
    /// One uniformly chosen accept state.
    #[default]
    Single,
    /// Each state accepts independently with probability 1/2.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub class: RobpClass,
    /// Length, or the largest length when `n_min` is set.
    pub n: usize,
    #[serde(default)]
    pub n_min: Option<usize>,
    /// Width, or the largest width when `w_min` is set.
    pub w: usize,
    #[serde(default)]
    pub w_min: Option<usize>,
    pub s: u32,
    pub count: usize,
    pub seed: u64,
    #[serde(default)]
    pub accept: AcceptMode,
}

impl FamilySpec {
    pub fn validate(&self) -> Result<()> {
        let lo = self.w_min.unwrap_or(self.w);
        let n_lo = self.n_min.unwrap_or(self.n);
        if n_lo == 0 || n_lo > self.n || self.s == 0 || lo == 0 || lo > self.w {
            return Err(Error::Shape(format!("invalid family n={n_lo}..{}, w={lo}..{}, s={}", self.n, self.w, self.s)));
        }
        if self.s > 16 {
            return Err(Error::Shape(format!("instance alphabets are limited to 16 bits, got {}", self.s)));
        }
        Ok(())
    }
}

/// Per-symbol random permutations.
pub fn random_permutation(rng: &mut PortableRng, n: usize, w: usize, s: u32) -> Result<Robp> {
    let maps: Vec<Vec<usize>> = (0..n << s).map(|_| rng.permutation(w)).collect();
    Robp::from_fn(n, w, s, 0, &[0], |t, u, x| maps[(t << s) | x as usize][u])
}

/// Union of `2^s` random perfect matchings per layer, out-labels shuffled per vertex.
pub fn random_regular(rng: &mut PortableRng, n: usize, w: usize, s: u32) -> Result<Robp> {
    let d = 1usize << s;
    let mut trans = Vec::with_capacity((n * w) << s);
    for _ in 0..n {
        let matchings: Vec<Vec<usize>> = (0..d).map(|_| rng.permutation(w)).collect();
        for u in 0..w {
            let order = rng.permutation(d);
            for &j in &order {
                trans.push(matchings[j][u] as u32);
            }
        }
    }
    Robp::new(n, w, s, trans, 0, &[0])
}

/// Independent uniform transitions.
pub fn random_general(rng: &mut PortableRng, n: usize, w: usize, s: u32) -> Result<Robp> {
    let trans = (0..(n * w) << s).map(|_| rng.below(w as u64) as u32).collect();
    Robp::new(n, w, s, trans, 0, &[0])
}

pub fn random_accept(rng: &mut PortableRng, w: usize, mode: AcceptMode) -> Vec<usize> {
    match mode {
        AcceptMode::Single => vec![rng.below(w as u64) as usize],
        AcceptMode::Random => (0..w).filter(|_| rng.next_u64() >> 63 == 1).collect(),
    }
}

/// Instance `index` of the family; start state 0.
pub fn gen_instance(spec: &FamilySpec, index: usize) -> Result<Robp> {
    spec.validate()?;
    let mut rng = PortableRng::new(spec.seed, index as u64);
    let n = rng.range(spec.n_min.unwrap_or(spec.n), spec.n);
    let w = rng.range(spec.w_min.unwrap_or(spec.w), spec.w);
    let f = match spec.class {
        RobpClass::Permutation => random_permutation(&mut rng, n, w, spec.s)?,
        RobpClass::Regular => random_regular(&mut rng, n, w, spec.s)?,
        RobpClass::General => random_general(&mut rng, n, w, spec.s)?,
    };
    let acc = random_accept(&mut rng, w, spec.accept);
    f.with_accept(&acc)
}

pub fn gen_instances(spec: &FamilySpec) -> Result<Vec<Robp>> {
    (0..spec.count).map(|i| gen_instance(spec, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robp::write_robp;

    fn spec(class: RobpClass, count: usize) -> FamilySpec {
        FamilySpec { class, n: 5, n_min: None, w: 6, w_min: Some(2), s: 2, count, seed: 7, accept: AcceptMode::Random }
    }

    #[test]
    fn classes_hold() {
        for f in gen_instances(&spec(RobpClass::Permutation, 50)).unwrap() {
            assert_eq!(f.classify(), RobpClass::Permutation);
        }
        for f in gen_instances(&spec(RobpClass::Regular, 1000)).unwrap() {
            assert!(f.is_regular());
        }
    }

    #[test]
    fn identical_config_identical_files() {
        let a: Vec<String> = gen_instances(&spec(RobpClass::General, 20)).unwrap().iter().map(write_robp).collect();
        let b: Vec<String> = gen_instances(&spec(RobpClass::General, 20)).unwrap().iter().map(write_robp).collect();
        assert_eq!(a, b);
        let mut other = spec(RobpClass::General, 20);
        other.seed = 8;
        let c: Vec<String> = gen_instances(&other).unwrap().iter().map(write_robp).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn below_is_uniform_enough() {
        let mut rng = PortableRng::new(1, 0);
        let mut counts = [0u32; 6];
        for _ in 0..60_000 {
            counts[rng.below(6) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (9_000..11_000).contains(&c)));
    }
}
