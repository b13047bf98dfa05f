//! Error amplification of a weighted generator through an averaging sampler.
//!
//! Seed layout, most significant first: `| x (r) | y_1 (p) | … | y_k (p) | i |`.
//! Factor `j` of Richardson term `i` is the prefix of `G_0(Samp(x, y_j))`;
//! the weight is `σ_i K · Π_j σ_0(Samp(x, y_j))` over the nonempty factors.

use super::wprg::WeightedGenerator;
use crate::error::{Error, Result};
use crate::error_reduction::{richardson_bound, richardson_terms, TermSet};
use crate::randomness::SamplerSpec;
use std::sync::Arc;

#[derive(Clone)]
pub struct SamplerWprg {
    base: Arc<dyn WeightedGenerator>,
    samp: SamplerSpec,
    terms: TermSet,
    slots: Vec<Vec<(usize, usize)>>,
    k: usize,
    n: usize,
    declared: f64,
    /// Certified fraction of sampler seeds `x` on which some factor is off.
    pub bad_fraction: f64,
    pub alpha: f64,
}

/// Declared error: good seeds keep every factor within
/// `h = w·ε₀ + 1/(w(n+1)²)` in ∞-norm, giving `richardson_bound(2(n+1)h, n, k)`;
/// bad seeds cost at most `1 + K·W^k` each, and the expander mixing lemma bounds
/// their fraction by `(#segments)·w²·(λ/α)²` with `α = 1/(W w² (n+1)²)`.
pub fn sampler_amplified_wprg(base: Arc<dyn WeightedGenerator>, samp: SamplerSpec, k: usize, n: usize, w: usize) -> Result<SamplerWprg> {
    if base.out_len() < n {
        return Err(Error::Param(format!("base length {} is shorter than {n}", base.out_len())));
    }
    if samp.q != base.seed_bits() {
        return Err(Error::Shape(format!("sampler outputs {} bits, base seed has {}", samp.q, base.seed_bits())));
    }
    let nf = n as f64 + 1.0;
    let wf = w as f64;
    let eps0 = base.declared_error();
    let hyp = 1.0 / (2.0 * wf * nf * nf);
    if eps0 > hyp {
        return Err(Error::BudgetUnmet { what: "sampler base generator".into(), measured: eps0, budget: hyp });
    }
    let big_w = base.weight_bound();
    let alpha = 1.0 / (big_w * wf * wf * nf * nf);
    let per_entry = (samp.lambda / alpha).powi(2);
    if per_entry >= 1.0 {
        return Err(Error::Infeasible(format!("sampler λ = {} is not below α = {alpha:e}", samp.lambda)));
    }
    let segments = (n * (n + 1) / 2) as f64;
    let bad_fraction = (segments * wf * wf * per_entry).min(1.0);
    let terms = richardson_terms(n, k)?.padded_pow2();
    let big_k = terms.len() as f64;
    let h = wf * eps0 + 1.0 / (wf * nf * nf);
    let declared = richardson_bound(2.0 * nf * h, n, k) + (1.0 + big_k * big_w.powi(k as i32)) * bad_fraction;
    let slots = terms
        .terms
        .iter()
        .map(|t| {
            let mut prev = 0;
            t.breakpoints.iter().map(|&b| (std::mem::replace(&mut prev, b), b)).collect()
        })
        .collect();
    let g = SamplerWprg { base, samp, terms, slots, k, n, declared, bad_fraction, alpha };
    if g.seed_bits() > 63 {
        return Err(Error::CapExceeded { bits: g.seed_bits(), cap: 63 });
    }
    Ok(g)
}

impl SamplerWprg {
    /// `r + k·p`, the seed bits outside the term index.
    pub fn sampler_seed_bits(&self) -> u32 {
        self.samp.r + self.k as u32 * self.samp.p
    }

    pub fn index_bits(&self) -> u32 {
        self.terms.len().trailing_zeros()
    }
}

impl WeightedGenerator for SamplerWprg {
    fn seed_bits(&self) -> u32 {
        self.sampler_seed_bits() + self.index_bits()
    }
    fn out_len(&self) -> usize {
        self.n
    }
    fn symbol_bits(&self) -> u32 {
        self.base.symbol_bits()
    }
    fn eval(&self, seed: u64) -> Result<(Vec<u64>, f64)> {
        let ib = self.index_bits();
        let p = self.samp.p;
        let i = (seed & ((1u64 << ib) - 1)) as usize;
        let rest = seed >> ib;
        let x = rest >> (p as usize * self.k);
        let term = &self.terms.terms[i];
        if term.sign == 0 {
            return Ok((vec![0; self.n], 0.0));
        }
        let mut out = Vec::with_capacity(self.n);
        let mut wt = term.sign as f64 * self.terms.len() as f64;
        for (j, &(a, b)) in self.slots[i].iter().enumerate() {
            if a == b {
                continue;
            }
            let y = (rest >> (p as usize * (self.k - 1 - j))) & ((1u64 << p) - 1);
            let (sym, w0) = self.base.eval(self.samp.eval(x, y))?;
            out.extend_from_slice(&sym[..b - a]);
            wt *= w0;
        }
        Ok((out, wt))
    }
    fn weight_bound(&self) -> f64 {
        self.terms.len() as f64 * self.base.weight_bound().powi(self.k as i32)
    }
    fn declared_error(&self) -> f64 {
        self.declared
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::Expander;
    use crate::robp::Robp;
    use crate::wpr::{IdentityReduction, Shape, Wprg};

    #[test]
    fn complete_sampler_over_true_randomness_is_exact() {
        let f = Robp::from_fn(4, 2, 1, 0, &[1], |t, u, x| if t == 2 { u } else { u ^ x as usize }).unwrap();
        let base: Arc<dyn WeightedGenerator> =
            Arc::new(Wprg::from_reduction(Arc::new(IdentityReduction { shape: Shape { n: 4, s: 1 } }), None, 0.0).unwrap());
        let samp = SamplerSpec::from_graph(Expander::complete(16), 0.01, 0.01).unwrap();
        let g = sampler_amplified_wprg(base, samp, 3, 4, 2).unwrap();
        assert_eq!(g.sampler_seed_bits(), 4 + 3 * 4);
        assert_eq!(g.index_bits(), 4);
        assert_eq!(g.bad_fraction, 0.0);
        let est = g.estimate_exhaustive(&f, 24).unwrap();
        assert!((est - f.exact_expectation()).abs() < 1e-12);
        assert!((est - f.exact_expectation()).abs() <= g.declared_error());
    }
}
