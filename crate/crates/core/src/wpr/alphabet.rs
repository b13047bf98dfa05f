//! Alphabet reduction: index `x`, `R_x(y_1..y_n) = Ext(x, y_1), …, Ext(x, y_n)`, weight 1.

use super::{check_source, rat, rat_int, Reduction, Shape};
use crate::error::{Error, Result};
use crate::generators::{Generator, Nz};
use crate::randomness::ExtractorSpec;
use crate::robp::Robp;
use num_rational::BigRational;

#[derive(Clone, Debug)]
pub struct AlphabetReduction {
    ext: ExtractorSpec,
    nz: Nz,
    n: usize,
    w: usize,
    /// Extractor error at the entropy left after conditioning on a state.
    eps_ext: f64,
    declared: BigRational,
}

impl AlphabetReduction {
    /// Refuses unless `3n · ε_ext(n_src − ⌈log₂ w⌉) ≤ eps`; `eps = None` declares
    /// exactly `3n · ε_ext`.
    pub fn new(ext: ExtractorSpec, n: usize, w: usize, eps: Option<f64>) -> Result<Self> {
        let eps_ext = Self::conditioned_error(&ext, w)?;
        let need = 3.0 * n as f64 * eps_ext;
        let declared = match eps {
            None => need,
            Some(e) if need <= e => e,
            Some(e) => return Err(Error::BudgetUnmet { what: "alphabet reduction extractor".into(), measured: need, budget: e }),
        };
        let nz = Nz::new(ext.clone(), n)?;
        Ok(AlphabetReduction { ext, nz, n, w, eps_ext, declared: rat(declared) })
    }

    /// `ε_ext` at min-entropy `n_src − ⌈log₂ w⌉`.
    pub fn conditioned_error(ext: &ExtractorSpec, w: usize) -> Result<f64> {
        let loss = usize::BITS - (w.max(1) - 1).leading_zeros();
        let k = ext.n_src.saturating_sub(loss);
        ext.measured_error(k)
    }

    pub fn ext(&self) -> &ExtractorSpec {
        &self.ext
    }

    pub fn eps_ext(&self) -> f64 {
        self.eps_ext
    }

    pub fn width(&self) -> usize {
        self.w
    }
}

impl Reduction for AlphabetReduction {
    fn name(&self) -> String {
        "alphabet".into()
    }
    fn source(&self) -> Shape {
        Shape { n: self.n, s: self.ext.m_out }
    }
    fn target(&self) -> Shape {
        Shape { n: self.n, s: self.ext.d_ext }
    }
    fn index_bits(&self) -> u32 {
        self.ext.n_src
    }
    fn weight_bound(&self) -> BigRational {
        rat_int(1)
    }
    fn declared_error(&self) -> BigRational {
        self.declared.clone()
    }
    fn weight(&self, _i: u64) -> f64 {
        1.0
    }
    fn block_len(&self, _i: u64, _j: usize) -> usize {
        1
    }
    fn block(&self, i: u64, _j: usize, sym: u64, out: &mut Vec<u64>) {
        out.push(self.ext.eval(i, sym));
    }
    fn weighted_expectation(&self, f: &Robp, tail: Option<&dyn Generator>, cap_bits: u32) -> Result<f64> {
        if tail.is_some() {
            return super::wprg::loop_expectation(self, f, tail, cap_bits);
        }
        check_source(self, f)?;
        // E_x E_y f(Ext(x, y_1), …) is the NZ average
        Ok(f.readout(&self.nz.averaged_segment(f, 0, f.n(), cap_bits)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wpr::measured_reduction_error;

    #[test]
    fn weight_one_and_shape() {
        let ext = ExtractorSpec::new(6, 3, 2, 4).unwrap();
        let r = AlphabetReduction::new(ext.clone(), 2, 4, None).unwrap();
        assert!((0..64).all(|x| r.weight(x) == 1.0));
        assert_eq!(r.target(), Shape { n: 2, s: 3 });
        let f = Robp::from_fn(2, 4, 2, 0, &[1, 2], |t, u, x| (u + x as usize + t) % 4).unwrap();
        for x in 0..64 {
            let g = r.reduced_robp(&f, x).unwrap();
            assert_eq!(g.s(), 3);
            for y in 0..64u64 {
                let ys = [y >> 3, y & 7];
                assert_eq!(g.evaluate(&ys).unwrap(), f.evaluate(&[ext.eval(x, ys[0]), ext.eval(x, ys[1])]).unwrap());
            }
        }
        let err = measured_reduction_error(&r, &f, 24).unwrap();
        assert!(err <= crate::wpr::rat_to_f64(&r.declared_error()) + 1e-12);
        // structured average equals the per-index loop
        let looped = crate::wpr::wprg::loop_expectation(&r, &f, None, 24).unwrap();
        assert!((looped - r.weighted_expectation(&f, None, 24).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn weak_extractor_refused() {
        let ext = ExtractorSpec::new(6, 1, 2, 4).unwrap();
        assert!(matches!(AlphabetReduction::new(ext, 4, 4, Some(1e-3)), Err(Error::BudgetUnmet { .. })));
    }
}
