//! Weighted pseudorandom reductions, their composition, and weighted generators.
//!
//! A reduction with index `i` maps an inner input of `n₁` symbols (`s₁` bits)
//! to an outer input of `n₀` symbols (`s₀` bits) blockwise: inner symbol `j`
//! expands to a block of outer symbols that depends on that symbol alone. This
//! is what makes `x ↦ f(R_i(x))` an ROBP of the target shape.

mod alphabet;
mod pipeline;
mod sampler;
mod terms;
mod wprg;

pub use alphabet::AlphabetReduction;
pub use pipeline::{main_reduction_pipeline, Pipeline, Stage};
pub use sampler::{sampler_amplified_wprg, SamplerWprg};
pub use terms::{length_reduction, TermReduction};
pub use wprg::{EstimateMode, Estimate, WeightedGenerator, Wprg};

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::matrix::{MatrixAlgebra, StochMatrix};
use crate::robp::Robp;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use std::sync::Arc;

/// Exact rational value of a finite float.
pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(|| panic!("non-finite value {x}"))
}

pub fn rat_int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

pub fn rat_to_f64(x: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap_or(f64::INFINITY)
}

/// Program length and symbol bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub s: u32,
}

impl Shape {
    pub fn of(f: &Robp) -> Self {
        Shape { n: f.n(), s: f.s() }
    }
}

/// `(d, K, ε)` of one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageMeta {
    pub name: String,
    pub index_bits: u32,
    pub weight_bound: BigRational,
    pub declared: BigRational,
}

/// `Σ_i (Π_{j<i} K_j) ε_i` over a chain of stages.
pub fn chain_error(stages: &[StageMeta]) -> BigRational {
    let mut k = BigRational::one();
    let mut total = BigRational::zero();
    for s in stages {
        total += &k * &s.declared;
        k *= &s.weight_bound;
    }
    total
}

pub trait Reduction: Send + Sync {
    fn name(&self) -> String;
    fn source(&self) -> Shape;
    fn target(&self) -> Shape;
    fn index_bits(&self) -> u32;
    fn weight_bound(&self) -> BigRational;
    fn declared_error(&self) -> BigRational;
    fn weight(&self, i: u64) -> f64;

    /// Number of outer symbols produced by inner symbol `j` under index `i`.
    fn block_len(&self, i: u64, j: usize) -> usize;

    /// Appends the outer block of inner symbol `j` with value `sym`.
    fn block(&self, i: u64, j: usize, sym: u64, out: &mut Vec<u64>);

    /// Metadata of the constituent stages, outermost first.
    fn stages(&self) -> Vec<StageMeta> {
        vec![StageMeta {
            name: self.name(),
            index_bits: self.index_bits(),
            weight_bound: self.weight_bound(),
            declared: self.declared_error(),
        }]
    }

    fn reduce(&self, i: u64, inner: &[u64]) -> Result<Vec<u64>> {
        let t = self.target();
        if inner.len() != t.n {
            return Err(Error::LengthMismatch { expected: t.n, got: inner.len() });
        }
        if let Some(&x) = inner.iter().find(|&&x| x >> t.s != 0) {
            return Err(Error::SymbolOutOfRange { symbol: x, bits: t.s });
        }
        let mut out = Vec::with_capacity(self.source().n);
        for (j, &x) in inner.iter().enumerate() {
            self.block(i, j, x, &mut out);
        }
        Ok(out)
    }

    /// The ROBP `x ↦ f(R_i(x))`, one layer per inner symbol.
    fn reduced_robp(&self, f: &Robp, i: u64) -> Result<Robp> {
        check_source(self, f)?;
        materialize(self, f, i)
    }

    /// One-step averages of the layers of `reduced_robp(f, i)`.
    fn layer_averages(&self, f: &Robp, i: u64) -> Result<Vec<StochMatrix>> {
        let g = self.reduced_robp(f, i)?;
        Ok((0..g.n()).map(|t| g.one_step_average(t)).collect())
    }

    /// `E_x f(R_i(x))` over uniform inner inputs.
    fn expected(&self, f: &Robp, i: u64) -> Result<f64> {
        let ms = self.layer_averages(f, i)?;
        let mut m = StochMatrix::identity(f.w());
        for a in &ms {
            m = m.mul(a);
        }
        Ok(f.readout(&m))
    }

    /// `2^{−d} Σ_i σ(i) · E f(R_i(inner))`, where the inner input is uniform
    /// (`tail = None`) or the output of `tail` on a uniform seed.
    fn weighted_expectation(&self, f: &Robp, tail: Option<&dyn Generator>, cap_bits: u32) -> Result<f64> {
        wprg::loop_expectation(self, f, tail, cap_bits)
    }
}

/// `E_seed g(tail(seed))` through the tail's averaged end-to-end matrix.
pub fn tail_expectation(tail: &dyn Generator, g: &Robp, cap_bits: u32) -> Result<f64> {
    let g = if tail.out_len() > g.n() { g.pad_identity(tail.out_len())? } else { g.clone() };
    let m = tail.averaged_segment(&g, 0, g.n(), cap_bits)?;
    Ok(g.readout(&m))
}

pub(crate) fn check_source<R: Reduction + ?Sized>(r: &R, f: &Robp) -> Result<()> {
    let src = r.source();
    if Shape::of(f) != src {
        return Err(Error::Shape(format!(
            "{} expects programs of length {} over {} bits, got length {} over {} bits",
            r.name(),
            src.n,
            src.s,
            f.n(),
            f.s()
        )));
    }
    Ok(())
}

fn materialize<R: Reduction + ?Sized>(r: &R, f: &Robp, i: u64) -> Result<Robp> {
    let t = r.target();
    if t.s > crate::robp::MAX_ALPHABET_BITS {
        return Err(Error::CapExceeded { bits: t.s, cap: crate::robp::MAX_ALPHABET_BITS });
    }
    let w = f.w();
    let sigma = 1usize << t.s;
    let mut pos = Vec::with_capacity(t.n + 1);
    pos.push(0);
    for j in 0..t.n {
        pos.push(pos[j] + r.block_len(i, j));
    }
    if pos[t.n] != f.n() {
        return Err(Error::Shape(format!("{} blocks cover {} of {} layers", r.name(), pos[t.n], f.n())));
    }
    let layers: Vec<Vec<u32>> = (0..t.n)
        .into_par_iter()
        .map(|j| {
            let mut layer = vec![0u32; w * sigma];
            let mut buf = Vec::new();
            for x in 0..sigma {
                buf.clear();
                r.block(i, j, x as u64, &mut buf);
                for u in 0..w {
                    layer[(u << t.s) | x] = f.run_from(pos[j], u, &buf) as u32;
                }
            }
            layer
        })
        .collect();
    Robp::new(t.n, w, t.s, layers.concat(), f.start(), &f.accept_set())
}

/// The reduction with no index and `R(x) = x`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReduction {
    pub shape: Shape,
}

impl Reduction for IdentityReduction {
    fn name(&self) -> String {
        "identity".into()
    }
    fn source(&self) -> Shape {
        self.shape
    }
    fn target(&self) -> Shape {
        self.shape
    }
    fn index_bits(&self) -> u32 {
        0
    }
    fn weight_bound(&self) -> BigRational {
        BigRational::one()
    }
    fn declared_error(&self) -> BigRational {
        BigRational::zero()
    }
    fn weight(&self, _i: u64) -> f64 {
        1.0
    }
    fn block_len(&self, _i: u64, _j: usize) -> usize {
        1
    }
    fn block(&self, _i: u64, _j: usize, sym: u64, out: &mut Vec<u64>) {
        out.push(sym);
    }
    fn reduced_robp(&self, f: &Robp, _i: u64) -> Result<Robp> {
        check_source(self, f)?;
        Ok(f.clone())
    }
}

/// `R1 ∘ R2`: index `i₁ ‖ i₂`, weight `σ₁σ₂`, parameters `(d₁+d₂, K₁K₂, ε₁+K₁ε₂)`.
#[derive(Clone)]
pub struct Composite {
    outer: Arc<dyn Reduction>,
    inner: Arc<dyn Reduction>,
}

pub fn compose(outer: Arc<dyn Reduction>, inner: Arc<dyn Reduction>) -> Result<Composite> {
    if outer.target() != inner.source() {
        return Err(Error::Shape(format!(
            "cannot compose {} (target {:?}) with {} (source {:?})",
            outer.name(),
            outer.target(),
            inner.name(),
            inner.source()
        )));
    }
    Ok(Composite { outer, inner })
}

impl Composite {
    fn split(&self, i: u64) -> (u64, u64) {
        let d2 = self.inner.index_bits();
        (i >> d2, i & ((1u64 << d2) - 1))
    }
}

impl Reduction for Composite {
    fn name(&self) -> String {
        format!("{} ∘ {}", self.outer.name(), self.inner.name())
    }
    fn source(&self) -> Shape {
        self.outer.source()
    }
    fn target(&self) -> Shape {
        self.inner.target()
    }
    fn index_bits(&self) -> u32 {
        self.outer.index_bits() + self.inner.index_bits()
    }
    fn weight_bound(&self) -> BigRational {
        self.outer.weight_bound() * self.inner.weight_bound()
    }
    fn declared_error(&self) -> BigRational {
        self.outer.declared_error() + self.outer.weight_bound() * self.inner.declared_error()
    }
    fn weight(&self, i: u64) -> f64 {
        let (a, b) = self.split(i);
        self.outer.weight(a) * self.inner.weight(b)
    }
    fn block_len(&self, i: u64, j: usize) -> usize {
        let (a, b) = self.split(i);
        let start: usize = (0..j).map(|q| self.inner.block_len(b, q)).sum();
        (start..start + self.inner.block_len(b, j)).map(|p| self.outer.block_len(a, p)).sum()
    }
    fn block(&self, i: u64, j: usize, sym: u64, out: &mut Vec<u64>) {
        let (a, b) = self.split(i);
        let start: usize = (0..j).map(|q| self.inner.block_len(b, q)).sum();
        let mut mid = Vec::new();
        self.inner.block(b, j, sym, &mut mid);
        for (p, &m) in mid.iter().enumerate() {
            self.outer.block(a, start + p, m, out);
        }
    }
    fn stages(&self) -> Vec<StageMeta> {
        let mut v = self.outer.stages();
        v.extend(self.inner.stages());
        v
    }
    fn reduced_robp(&self, f: &Robp, i: u64) -> Result<Robp> {
        let (a, b) = self.split(i);
        self.inner.reduced_robp(&self.outer.reduced_robp(f, a)?, b)
    }
    fn layer_averages(&self, f: &Robp, i: u64) -> Result<Vec<StochMatrix>> {
        let (a, b) = self.split(i);
        self.inner.layer_averages(&self.outer.reduced_robp(f, a)?, b)
    }
    fn weighted_expectation(&self, f: &Robp, tail: Option<&dyn Generator>, cap_bits: u32) -> Result<f64> {
        check_source(self, f)?;
        let d1 = self.outer.index_bits();
        let vals: Vec<Result<f64>> = (0..1u64 << d1)
            .into_par_iter()
            .map(|a| {
                let wt = self.outer.weight(a);
                if wt == 0.0 {
                    return Ok(0.0);
                }
                let g = self.outer.reduced_robp(f, a)?;
                Ok(wt * self.inner.weighted_expectation(&g, tail, cap_bits)?)
            })
            .collect();
        let mut total = 0.0;
        for v in vals {
            total += v?;
        }
        Ok(total / (1u64 << d1) as f64)
    }
}

/// Left-nested composition of a nonempty chain.
pub fn compose_chain(chain: Vec<Arc<dyn Reduction>>) -> Result<Arc<dyn Reduction>> {
    let mut it = chain.into_iter();
    let mut acc = it.next().ok_or_else(|| Error::Param("empty reduction chain".into()))?;
    for r in it {
        acc = Arc::new(compose(acc, r)?);
    }
    Ok(acc)
}

/// `|E f − 2^{−d} Σ_i σ(i) E f(R_i(U))|`, the quantity bounded by the declared error.
pub fn measured_reduction_error<R: Reduction + ?Sized>(r: &R, f: &Robp, cap_bits: u32) -> Result<f64> {
    Ok((f.exact_expectation() - r.weighted_expectation(f, None, cap_bits)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_neutral() {
        let f = Robp::from_fn(3, 3, 1, 0, &[2], |t, u, x| (u + t * x as usize + x as usize) % 3).unwrap();
        let id: Arc<dyn Reduction> = Arc::new(IdentityReduction { shape: Shape::of(&f) });
        let c = compose(id.clone(), id.clone()).unwrap();
        assert_eq!(c.index_bits(), 0);
        assert_eq!(c.declared_error(), BigRational::zero());
        assert_eq!(c.reduced_robp(&f, 0).unwrap(), f);
        assert_eq!(materialize(&c, &f, 0).unwrap(), f);
        assert!(measured_reduction_error(&c, &f, 24).unwrap() < 1e-15);
        assert_eq!(chain_error(&c.stages()), c.declared_error());
    }

    #[test]
    fn chain_error_formula() {
        let m = |k: u64, e: f64| StageMeta { name: String::new(), index_bits: 1, weight_bound: rat_int(k), declared: rat(e) };
        let st = [m(2, 0.5), m(3, 0.25), m(5, 0.125)];
        assert_eq!(chain_error(&st), rat(0.5) + rat_int(2) * rat(0.25) + rat_int(6) * rat(0.125));
    }
}
