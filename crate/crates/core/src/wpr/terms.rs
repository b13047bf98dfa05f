//! Reductions indexed by the terms of an error-reduction polynomial.
//!
//! Index `i` selects term `i` of the zero-padded term set; inner symbol `j` is a
//! seed of the base generator whose prefix fills the `j`-th factor `[a, b)`.
//! Unit factors take the low `s` bits of the inner symbol directly, so the
//! unit entries of the averaged table are the true steps. Empty factors read
//! and ignore their symbol.

use super::{check_source, rat, rat_int, Reduction, Shape};
use crate::error::{Error, Result};
use crate::error_reduction::{eval_terms, richardson_bound, richardson_terms, SegmentTable, TermSet};
use crate::generators::Generator;
use crate::matrix::StochMatrix;
use crate::robp::Robp;
use num_rational::BigRational;
use std::collections::BTreeSet;
use std::sync::Arc;

#[derive(Clone)]
pub struct TermReduction {
    name: String,
    base: Arc<dyn Generator>,
    source: Shape,
    terms: TermSet,
    slots: Vec<Vec<(usize, usize)>>,
    width: usize,
    declared: BigRational,
}

impl TermReduction {
    /// `terms` is padded to a power of two; every term is spread over `width` slots.
    pub fn new(name: &str, base: Arc<dyn Generator>, source: Shape, terms: &TermSet, width: usize, declared: f64) -> Result<Self> {
        if terms.n != source.n {
            return Err(Error::Shape(format!("terms cover length {}, source has {}", terms.n, source.n)));
        }
        if base.symbol_bits() != source.s {
            return Err(Error::Shape(format!("base emits {} bits, source reads {}", base.symbol_bits(), source.s)));
        }
        if base.seed_bits() < source.s {
            return Err(Error::Param("base seed is shorter than one source symbol".into()));
        }
        let terms = terms.padded_pow2();
        let mut slots: Vec<Vec<(usize, usize)>> = Vec::with_capacity(terms.len());
        for t in &terms.terms {
            // zero-weight filler reuses the first term's layout
            if t.sign == 0 && !slots.is_empty() {
                slots.push(slots[0].clone());
                continue;
            }
            let mut prev = 0;
            let mut v: Vec<(usize, usize)> = t.breakpoints.iter().map(|&b| (std::mem::replace(&mut prev, b), b)).collect();
            if v.len() > width {
                return Err(Error::Param(format!("term with {} factors exceeds width {width}", v.len())));
            }
            v.resize(width, (source.n, source.n));
            for &(a, b) in &v {
                if b - a > base.out_len() {
                    return Err(Error::Param(format!("factor of length {} exceeds base length {}", b - a, base.out_len())));
                }
            }
            slots.push(v);
        }
        if !(declared >= 0.0) {
            return Err(Error::Param(format!("declared error must be nonnegative, got {declared}")));
        }
        Ok(TermReduction { name: name.into(), base, source, terms, slots, width, declared: rat(declared) })
    }

    pub fn terms(&self) -> &TermSet {
        &self.terms
    }

    pub fn base(&self) -> &Arc<dyn Generator> {
        &self.base
    }

    /// Distinct nonempty factors used by nonzero terms.
    fn used_factors(&self) -> BTreeSet<(usize, usize)> {
        self.terms
            .terms
            .iter()
            .zip(&self.slots)
            .filter(|(t, _)| t.sign != 0)
            .flat_map(|(_, s)| s.iter().copied().filter(|&(a, b)| a < b))
            .collect()
    }

    /// Averaged table: unit factors exact, longer factors averaged over base seeds.
    pub fn averaged_table(&self, f: &Robp, cap_bits: u32) -> Result<SegmentTable<StochMatrix>> {
        check_source(self, f)?;
        let mut table = SegmentTable::new(f.n(), f.w());
        for (a, b) in self.used_factors() {
            let m = if b - a == 1 { f.one_step_average(a) } else { self.base.averaged_segment(f, a, b - a, cap_bits)? };
            table.set(a, b, m);
        }
        Ok(table)
    }

    /// `max ‖B_{a,b} − A_{a+1}⋯A_b‖_∞` over the factors of length ≥ 2.
    pub fn factor_inf_error(&self, f: &Robp, cap_bits: u32) -> Result<f64> {
        let table = self.averaged_table(f, cap_bits)?;
        let mut worst = 0.0f64;
        for (a, b) in self.used_factors() {
            if b - a >= 2 {
                worst = worst.max(table.get(a, b)?.sub(&f.segment_product(a, b)).inf_norm());
            }
        }
        Ok(worst)
    }
}

impl Reduction for TermReduction {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn source(&self) -> Shape {
        self.source
    }
    fn target(&self) -> Shape {
        Shape { n: self.width, s: self.base.seed_bits() }
    }
    fn index_bits(&self) -> u32 {
        self.terms.len().trailing_zeros()
    }
    fn weight_bound(&self) -> BigRational {
        rat_int(self.terms.len() as u64)
    }
    fn declared_error(&self) -> BigRational {
        self.declared.clone()
    }
    fn weight(&self, i: u64) -> f64 {
        self.terms.terms[i as usize].sign as f64 * self.terms.len() as f64
    }
    fn block_len(&self, i: u64, j: usize) -> usize {
        let (a, b) = self.slots[i as usize][j];
        b - a
    }
    fn block(&self, i: u64, j: usize, sym: u64, out: &mut Vec<u64>) {
        let (a, b) = self.slots[i as usize][j];
        match b - a {
            0 => {}
            1 => out.push(sym & ((1u64 << self.source.s) - 1)),
            len => self.base.eval_prefix(sym, len, out),
        }
    }
    fn layer_averages(&self, f: &Robp, i: u64) -> Result<Vec<StochMatrix>> {
        check_source(self, f)?;
        self.slots[i as usize]
            .iter()
            .map(|&(a, b)| match b - a {
                0 => Ok(StochMatrix::identity(f.w())),
                1 => Ok(f.one_step_average(a)),
                len => self.base.averaged_segment(f, a, len, super::wprg::DEFAULT_CAP),
            })
            .collect()
    }
    fn weighted_expectation(&self, f: &Robp, tail: Option<&dyn Generator>, cap_bits: u32) -> Result<f64> {
        if tail.is_some() {
            return super::wprg::loop_expectation(self, f, tail, cap_bits);
        }
        let table = self.averaged_table(f, cap_bits)?;
        // 2^{−d} Σ_i (σ_i 2^d) E_i = Σ_i σ_i E_i
        Ok(f.readout(&eval_terms(&self.terms.terms, &table)?))
    }
}

/// Length reduction over the Richardson terms of degree `k` (odd) with declared
/// error `ε^{(k+1)/2}(n+1)`; the base must satisfy `‖B − Π‖_∞ ≤ ε/(2(n+1))` on
/// every factor (see [`TermReduction::factor_inf_error`]).
pub fn length_reduction(base: Arc<dyn Generator>, n: usize, k: usize, eps: f64) -> Result<TermReduction> {
    let s = base.symbol_bits();
    let terms = richardson_terms(n, k)?;
    TermReduction::new("length", base, Shape { n, s }, &terms, k, richardson_bound(eps, n, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Nz, TrueRandom};
    use crate::randomness::ExtractorSpec;
    use crate::wpr::measured_reduction_error;

    fn prog() -> Robp {
        Robp::from_fn(4, 3, 1, 0, &[1], |t, u, x| (u * (t + 1) + x as usize * (u + 1)) % 3).unwrap()
    }

    #[test]
    fn true_random_base_is_exact() {
        let f = prog();
        let base: Arc<dyn Generator> = Arc::new(TrueRandom::new(4, 1).unwrap());
        for k in [1, 3, 5] {
            let r = length_reduction(base.clone(), 4, k, 0.1).unwrap();
            assert_eq!(r.target(), Shape { n: k, s: 4 });
            assert!(measured_reduction_error(&r, &f, 24).unwrap() < 1e-12);
            assert_eq!(r.factor_inf_error(&f, 24).unwrap(), 0.0);
        }
    }

    #[test]
    fn reduced_program_matches_reduce_everywhere() {
        let f = prog();
        let base: Arc<dyn Generator> = Arc::new(Nz::new(ExtractorSpec::new(2, 1, 1, 2).unwrap(), 4).unwrap());
        let r = length_reduction(base, 4, 3, 0.5).unwrap();
        let t = r.target();
        for i in 0..1u64 << r.index_bits() {
            let g = r.reduced_robp(&f, i).unwrap();
            for x in 0..1u64 << (t.n as u32 * t.s) {
                let inner: Vec<u64> = (0..t.n).map(|j| (x >> (t.s as usize * (t.n - 1 - j))) & ((1 << t.s) - 1)).collect();
                assert_eq!(g.evaluate(&inner).unwrap(), f.evaluate(&r.reduce(i, &inner).unwrap()).unwrap());
            }
            // structured averages agree with the materialized program
            let ms = r.layer_averages(&f, i).unwrap();
            for (t, m) in ms.iter().enumerate() {
                assert!(m.max_abs_diff(&g.one_step_average(t)) < 1e-12);
            }
        }
        let direct = (0..1u64 << r.index_bits())
            .map(|i| r.weight(i) * r.expected(&f, i).unwrap())
            .sum::<f64>()
            / (1u64 << r.index_bits()) as f64;
        assert!((direct - r.weighted_expectation(&f, None, 24).unwrap()).abs() < 1e-12);
    }
}
