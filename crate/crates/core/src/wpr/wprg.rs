//! Weighted generators built from a reduction and a tail.

use super::{rat, rat_to_f64, tail_expectation, Reduction};
use crate::error::{Error, Result};
use crate::generators::{Generator, DEFAULT_SEED_CAP};
use crate::robp::Robp;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub(crate) const DEFAULT_CAP: u32 = DEFAULT_SEED_CAP;

/// Seeds per sequential chunk in exhaustive sums; fixed so the float summation
/// order does not depend on the thread count.
const CHUNK: u64 = 1 << 12;

/// Per-index loop: `2^{−d} Σ_i σ(i) E f(R_i(·))`.
pub(crate) fn loop_expectation<R: Reduction + ?Sized>(r: &R, f: &Robp, tail: Option<&dyn Generator>, cap_bits: u32) -> Result<f64> {
    super::check_source(r, f)?;
    let d = r.index_bits();
    let vals: Vec<Result<f64>> = (0..1u64 << d)
        .into_par_iter()
        .map(|i| {
            let wt = r.weight(i);
            if wt == 0.0 {
                return Ok(0.0);
            }
            Ok(wt * match tail {
                None => r.expected(f, i)?,
                Some(g) => tail_expectation(g, &r.reduced_robp(f, i)?, cap_bits)?,
            })
        })
        .collect();
    let mut total = 0.0;
    for v in vals {
        total += v?;
    }
    Ok(total / (1u64 << d) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EstimateMode {
    /// Every seed is generated and run through the program.
    Exhaustive { cap_bits: u32 },
    /// The same weighted mean computed through averaged transition matrices.
    Structured { cap_bits: u32 },
    /// Uniformly sampled seeds; not a certified value.
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: Option<f64>,
    pub certified: bool,
}

/// A seeded generator whose outputs carry real weights.
pub trait WeightedGenerator: Send + Sync {
    fn seed_bits(&self) -> u32;
    fn out_len(&self) -> usize;
    fn symbol_bits(&self) -> u32;
    fn eval(&self, seed: u64) -> Result<(Vec<u64>, f64)>;
    fn weight_bound(&self) -> f64;
    fn declared_error(&self) -> f64;

    /// `2^{−d} Σ_r σ(r) f(G(r))` by enumerating every seed.
    fn estimate_exhaustive(&self, f: &Robp, cap_bits: u32) -> Result<f64> {
        let bits = self.seed_bits();
        if bits > cap_bits {
            return Err(Error::CapExceeded { bits, cap: cap_bits });
        }
        let f = if self.out_len() > f.n() { f.pad_identity(self.out_len())? } else { f.clone() };
        if self.out_len() != f.n() || self.symbol_bits() != f.s() {
            return Err(Error::Shape(format!(
                "generator emits {} symbols of {} bits, program reads {} of {}",
                self.out_len(),
                self.symbol_bits(),
                f.n(),
                f.s()
            )));
        }
        let total = 1u64 << bits;
        let chunks: Vec<Result<f64>> = (0..total.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = 0.0;
                for seed in c * CHUNK..((c + 1) * CHUNK).min(total) {
                    let (x, wt) = self.eval(seed)?;
                    if wt != 0.0 && f.evaluate(&x)? {
                        acc += wt;
                    }
                }
                Ok(acc)
            })
            .collect();
        let mut sum = 0.0;
        for c in chunks {
            sum += c?;
        }
        Ok(sum / total as f64)
    }

    fn estimate_monte_carlo(&self, f: &Robp, samples: u64, seed: u64) -> Result<Estimate> {
        if samples < 2 {
            return Err(Error::Param("Monte Carlo needs at least two samples".into()));
        }
        let f = if self.out_len() > f.n() { f.pad_identity(self.out_len())? } else { f.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = self.seed_bits();
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..samples {
            let r = if bits == 0 { 0 } else { rng.gen::<u64>() >> (64 - bits) };
            let (x, wt) = self.eval(r)?;
            let v = if f.evaluate(&x)? { wt } else { 0.0 };
            sum += v;
            sq += v * v;
        }
        let m = samples as f64;
        let mean = sum / m;
        let var = ((sq / m - mean * mean) * m / (m - 1.0)).max(0.0);
        Ok(Estimate { value: mean, std_err: Some((var / m).sqrt()), certified: false })
    }
}

/// `(index ‖ tail seed) ↦ (R_i(tail(seed)), σ(i))`.
#[derive(Clone)]
pub struct Wprg {
    red: Arc<dyn Reduction>,
    tail: Option<Arc<dyn Generator>>,
    tail_error: f64,
}

impl Wprg {
    /// `tail = None` uses true randomness over the target shape (error 0).
    pub fn from_reduction(red: Arc<dyn Reduction>, tail: Option<Arc<dyn Generator>>, tail_error: f64) -> Result<Self> {
        let t = red.target();
        if let Some(g) = &tail {
            if g.symbol_bits() != t.s || g.out_len() < t.n {
                return Err(Error::Shape(format!(
                    "tail emits {} symbols of {} bits, reduction reads {} of {}",
                    g.out_len(),
                    g.symbol_bits(),
                    t.n,
                    t.s
                )));
            }
        }
        if tail.is_none() && tail_error != 0.0 {
            return Err(Error::Param("true-randomness tail has error 0".into()));
        }
        Ok(Wprg { red, tail, tail_error })
    }

    pub fn reduction(&self) -> &Arc<dyn Reduction> {
        &self.red
    }

    fn tail_bits(&self) -> u32 {
        let t = self.red.target();
        match &self.tail {
            Some(g) => g.seed_bits(),
            None => t.n as u32 * t.s,
        }
    }

    pub fn index_bits(&self) -> u32 {
        self.red.index_bits()
    }

    pub fn declared_error_exact(&self) -> BigRational {
        self.red.declared_error() + self.red.weight_bound() * rat(self.tail_error)
    }

    /// Exact weighted mean, by enumeration when the seed space fits the cap and
    /// through averaged matrices otherwise; `MonteCarlo` samples seeds.
    pub fn estimate(&self, f: &Robp, mode: EstimateMode) -> Result<Estimate> {
        match mode {
            EstimateMode::Exhaustive { cap_bits } => {
                Ok(Estimate { value: self.estimate_exhaustive(f, cap_bits)?, std_err: None, certified: true })
            }
            EstimateMode::Structured { cap_bits } => Ok(Estimate {
                value: self.red.weighted_expectation(f, self.tail.as_deref(), cap_bits)?,
                std_err: None,
                certified: true,
            }),
            EstimateMode::MonteCarlo { samples, seed } => self.estimate_monte_carlo(f, samples, seed),
        }
    }
}

impl WeightedGenerator for Wprg {
    fn seed_bits(&self) -> u32 {
        self.red.index_bits() + self.tail_bits()
    }
    fn out_len(&self) -> usize {
        self.red.source().n
    }
    fn symbol_bits(&self) -> u32 {
        self.red.source().s
    }
    fn eval(&self, seed: u64) -> Result<(Vec<u64>, f64)> {
        let tb = self.tail_bits();
        if self.seed_bits() > 63 {
            return Err(Error::CapExceeded { bits: self.seed_bits(), cap: 63 });
        }
        let i = seed >> tb;
        let low = seed & ((1u64 << tb) - 1);
        let t = self.red.target();
        let inner = match &self.tail {
            Some(g) => {
                let mut v = Vec::with_capacity(t.n);
                g.eval_prefix(low, t.n, &mut v);
                v
            }
            None => (0..t.n).map(|j| (low >> (t.s as usize * (t.n - 1 - j))) & ((1u64 << t.s) - 1)).collect(),
        };
        Ok((self.red.reduce(i, &inner)?, self.red.weight(i)))
    }
    fn weight_bound(&self) -> f64 {
        rat_to_f64(&self.red.weight_bound())
    }
    fn declared_error(&self) -> f64 {
        rat_to_f64(&self.declared_error_exact())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Nz, TrueRandom};
    use crate::randomness::ExtractorSpec;
    use crate::wpr::{length_reduction, IdentityReduction, Shape};

    fn prog() -> Robp {
        Robp::from_fn(4, 3, 1, 0, &[0, 2], |t, u, x| (u + x as usize * (t + 1)) % 3).unwrap()
    }

    #[test]
    fn identity_with_true_randomness_is_exact() {
        let f = prog();
        let g = Wprg::from_reduction(Arc::new(IdentityReduction { shape: Shape::of(&f) }), None, 0.0).unwrap();
        let e = g.estimate(&f, EstimateMode::Exhaustive { cap_bits: 24 }).unwrap().value;
        assert_eq!(e, f.exact_expectation());
        assert_eq!(g.declared_error(), 0.0);
    }

    #[test]
    fn exhaustive_structured_and_monte_carlo_agree() {
        let f = prog();
        let base: Arc<dyn Generator> = Arc::new(Nz::new(ExtractorSpec::new(2, 1, 1, 2).unwrap(), 4).unwrap());
        let red = Arc::new(length_reduction(base, 4, 3, 0.5).unwrap());
        let tail: Arc<dyn Generator> = Arc::new(TrueRandom::new(3, 6).unwrap());
        for t in [None, Some(tail)] {
            let g = Wprg::from_reduction(red.clone(), t, 0.0).unwrap();
            let a = g.estimate(&f, EstimateMode::Exhaustive { cap_bits: 24 }).unwrap().value;
            let b = g.estimate(&f, EstimateMode::Structured { cap_bits: 24 }).unwrap().value;
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            let mc = g.estimate(&f, EstimateMode::MonteCarlo { samples: 20000, seed: 7 }).unwrap();
            assert!((mc.value - a).abs() <= 3.0 * mc.std_err.unwrap() + 1e-12);
            for seed in 0..1u64 << g.seed_bits() {
                assert!(g.eval(seed).unwrap().1.abs() <= g.weight_bound());
            }
        }
    }
}
