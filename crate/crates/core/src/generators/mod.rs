//! Seeded generators of symbol sequences.
//!
//! Seeds are integers whose bits are the concatenation of the seed components
//! in recursion order, most significant first. Every generator here has the
//! prefix property: the first `m` output symbols depend only on the top
//! [`Generator::prefix_seed_bits`]`(m)` bits of the seed.

mod inw;
mod nz;

pub use inw::{inw_family, FamilyPolicy, Inw};
pub use nz::Nz;

use crate::error::{Error, Result};
use crate::matrix::{sv_approx_error, StochMatrix};
use crate::randomness::{Expander, ExtractorParams, ExtractorSpec};
use crate::robp::Robp;
use serde::{Deserialize, Serialize};

/// Default cap on exhaustive seed enumeration, in bits.
pub const DEFAULT_SEED_CAP: u32 = 24;

/// Serializable description of a generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorDescriptor {
    TrueRandom { n: usize, s: u32 },
    Inw { s: u32, family: Vec<Expander> },
    Nz { ext: ExtractorParams, n: usize },
}

impl GeneratorDescriptor {
    pub fn build(&self) -> Result<Box<dyn Generator>> {
        Ok(match self {
            GeneratorDescriptor::TrueRandom { n, s } => Box::new(TrueRandom::new(*n, *s)?),
            GeneratorDescriptor::Inw { s, family } => Box::new(Inw::new(*s, family.clone())?),
            GeneratorDescriptor::Nz { ext, n } => Box::new(Nz::new(ExtractorSpec::from_params(ext)?, *n)?),
        })
    }
}

pub trait Generator: Send + Sync {
    fn seed_bits(&self) -> u32;
    fn out_len(&self) -> usize;
    fn symbol_bits(&self) -> u32;

    /// Appends the first `m` output symbols to `out`.
    fn eval_prefix(&self, seed: u64, m: usize, out: &mut Vec<u64>);

    /// Seed bits (counted from the top) that determine the first `m` symbols.
    fn prefix_seed_bits(&self, m: usize) -> u32;

    fn descriptor(&self) -> GeneratorDescriptor;

    fn eval(&self, seed: u64) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.out_len());
        self.eval_prefix(seed, self.out_len(), &mut out);
        out
    }

    /// `E_seed` of the transition matrix of `robp` from vertex layer `a` over
    /// `len` layers, driven by the length-`len` prefix of the output.
    fn averaged_segment(&self, robp: &Robp, a: usize, len: usize, cap_bits: u32) -> Result<StochMatrix> {
        enumerate_segment(self, robp, a, len, cap_bits)
    }
}

/// Averaged segment matrix by enumerating every relevant seed prefix.
pub fn enumerate_segment<G: Generator + ?Sized>(
    g: &G,
    robp: &Robp,
    a: usize,
    len: usize,
    cap_bits: u32,
) -> Result<StochMatrix> {
    check_segment(g, robp, a, len)?;
    let w = robp.w();
    if len == 0 {
        return Ok(StochMatrix::identity(w));
    }
    let bits = g.prefix_seed_bits(len);
    if bits > cap_bits {
        return Err(Error::CapExceeded { bits, cap: cap_bits });
    }
    let shift = g.seed_bits() - bits;
    let mut counts = vec![0u64; w * w];
    let mut buf = Vec::with_capacity(len);
    for z in 0..1u64 << bits {
        buf.clear();
        g.eval_prefix(z << shift, len, &mut buf);
        for u in 0..w {
            counts[u * w + robp.run_from(a, u, &buf)] += 1;
        }
    }
    let p = 1.0 / (1u64 << bits) as f64;
    Ok(StochMatrix::from_fn(w, |u, v| counts[u * w + v] as f64 * p))
}

fn check_segment<G: Generator + ?Sized>(g: &G, robp: &Robp, a: usize, len: usize) -> Result<()> {
    if a + len > robp.n() {
        return Err(Error::LayerRange { i: a, j: a + len, n: robp.n() });
    }
    if len > g.out_len() {
        return Err(Error::Param(format!("segment of {len} symbols exceeds generator length {}", g.out_len())));
    }
    if g.symbol_bits() != robp.s() {
        return Err(Error::Shape(format!("generator emits {}-bit symbols, program reads {}", g.symbol_bits(), robp.s())));
    }
    Ok(())
}

/// The identity generator: the seed is the output.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueRandom {
    n: usize,
    s: u32,
}

impl TrueRandom {
    pub fn new(n: usize, s: u32) -> Result<Self> {
        if n == 0 || s == 0 || n as u64 * s as u64 > 63 {
            return Err(Error::Param(format!("true randomness over {n} symbols of {s} bits does not fit a seed")));
        }
        Ok(TrueRandom { n, s })
    }
}

impl Generator for TrueRandom {
    fn seed_bits(&self) -> u32 {
        self.n as u32 * self.s
    }
    fn out_len(&self) -> usize {
        self.n
    }
    fn symbol_bits(&self) -> u32 {
        self.s
    }
    fn eval_prefix(&self, seed: u64, m: usize, out: &mut Vec<u64>) {
        let mask = (1u64 << self.s) - 1;
        for k in 0..m {
            out.push((seed >> (self.s as usize * (self.n - 1 - k))) & mask);
        }
    }
    fn prefix_seed_bits(&self, m: usize) -> u32 {
        m as u32 * self.s
    }
    fn descriptor(&self) -> GeneratorDescriptor {
        GeneratorDescriptor::TrueRandom { n: self.n, s: self.s }
    }
    fn averaged_segment(&self, robp: &Robp, a: usize, len: usize, _cap_bits: u32) -> Result<StochMatrix> {
        check_segment(self, robp, a, len)?;
        Ok(robp.segment_product(a, a + len))
    }
}

fn padded_for<G: Generator + ?Sized>(g: &G, robp: &Robp) -> Result<Robp> {
    if g.out_len() < robp.n() {
        return Err(Error::Param(format!("generator length {} is shorter than program length {}", g.out_len(), robp.n())));
    }
    robp.pad_identity(g.out_len())
}

/// `max |E_seed f(G(seed)) − Π A_i|` entrywise over the end-to-end matrix.
pub fn gen_entrywise_error<G: Generator + ?Sized>(g: &G, robp: &Robp, cap_bits: u32) -> Result<f64> {
    let f = padded_for(g, robp)?;
    let avg = g.averaged_segment(&f, 0, f.n(), cap_bits)?;
    Ok(avg.max_abs_diff(&f.segment_product(0, f.n())))
}

/// sv-approximation error of the generator-averaged end-to-end matrix.
pub fn gen_sv_error<G: Generator + ?Sized>(g: &G, robp: &Robp, cap_bits: u32) -> Result<f64> {
    if !robp.is_permutation() {
        return Err(Error::NotPermutation);
    }
    let f = padded_for(g, robp)?;
    let avg = g.averaged_segment(&f, 0, f.n(), cap_bits)?;
    sv_approx_error(&avg, &f.segment_product(0, f.n()))
}

/// `max_{0 ≤ i < j ≤ n} ‖B_{i,j} − A_{i+1}⋯A_j‖_∞` with `B_{i,j}` the averaged
/// prefix of length `j − i` placed at layer `i`.
pub fn segment_inf_error<G: Generator + ?Sized>(g: &G, robp: &Robp, cap_bits: u32) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..robp.n() {
        let mut exact = StochMatrix::identity(robp.w());
        for j in i + 1..=robp.n() {
            exact = crate::matrix::MatrixAlgebra::mul(&exact, &robp.one_step_average(j - 1));
            let b = g.averaged_segment(robp, i, j - i, cap_bits)?;
            worst = worst.max(b.sub(&exact).inf_norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog() -> Robp {
        Robp::from_fn(3, 3, 1, 0, &[1], |t, u, x| (u + t + x as usize * (u + 1)) % 3).unwrap()
    }

    #[test]
    fn true_randomness_is_exact() {
        let g = TrueRandom::new(3, 1).unwrap();
        let f = prog();
        assert!(gen_entrywise_error(&g, &f, 24).unwrap() < 1e-15);
        // the enumeration route agrees with the override
        let e = enumerate_segment(&g, &f, 0, 3, 24).unwrap();
        assert!(e.max_abs_diff(&f.segment_product(0, 3)) < 1e-15);
        assert_eq!(g.eval(0b101), vec![1, 0, 1]);
    }

    struct Constant(usize);
    impl Generator for Constant {
        fn seed_bits(&self) -> u32 {
            1
        }
        fn out_len(&self) -> usize {
            self.0
        }
        fn symbol_bits(&self) -> u32 {
            1
        }
        fn eval_prefix(&self, _seed: u64, m: usize, out: &mut Vec<u64>) {
            out.extend(std::iter::repeat_n(0, m));
        }
        fn prefix_seed_bits(&self, _m: usize) -> u32 {
            0
        }
        fn descriptor(&self) -> GeneratorDescriptor {
            GeneratorDescriptor::TrueRandom { n: self.0, s: 1 }
        }
    }

    #[test]
    fn constant_generator_error_is_half() {
        let f = Robp::from_fn(1, 2, 1, 0, &[0], |_, _, x| x as usize).unwrap();
        assert_eq!(f.exact_expectation(), 0.5);
        assert_eq!(gen_entrywise_error(&Constant(1), &f, 24).unwrap(), 0.5);
    }

    #[test]
    fn cap_is_enforced() {
        let g = TrueRandom::new(30, 1).unwrap();
        let f = Robp::identity(30, 2, 1, 0, &[0]).unwrap();
        assert!(matches!(enumerate_segment(&g, &f, 0, 30, 20), Err(Error::CapExceeded { .. })));
    }
}
