//! One-level NZ generator: `NZ(x, y_1..y_n) = Ext(x, y_1), …, Ext(x, y_n)`.
//!
//! Seed layout, most significant first: `| x (n_src) | y_1 (d) | … | y_n (d) |`.

use super::{check_segment, Generator, GeneratorDescriptor};
use crate::error::{Error, Result};
use crate::matrix::{MatrixAlgebra, StochMatrix};
use crate::randomness::ExtractorSpec;
use crate::robp::Robp;

#[derive(Clone, Debug, PartialEq)]
pub struct Nz {
    ext: ExtractorSpec,
    n: usize,
}

impl Nz {
    pub fn new(ext: ExtractorSpec, n: usize) -> Result<Self> {
        if n == 0 || ext.m_out == 0 {
            return Err(Error::Param("NZ needs n ≥ 1 and a nonempty extractor output".into()));
        }
        if ext.n_src as u64 + n as u64 * ext.d_ext as u64 > 63 {
            return Err(Error::Param(format!("NZ seed of {} + {n}·{} bits does not fit a u64", ext.n_src, ext.d_ext)));
        }
        Ok(Nz { ext, n })
    }

    pub fn ext(&self) -> &ExtractorSpec {
        &self.ext
    }

    /// `E_y` of the one-step matrix of transition `t` given source value `x`.
    pub fn conditional_step(&self, robp: &Robp, t: usize, q: &[(u64, f64)]) -> StochMatrix {
        let w = robp.w();
        let mut m = StochMatrix::zeros(w);
        for u in 0..w {
            for &(o, p) in q {
                m.add_at(u, robp.step(t, u, o), p);
            }
        }
        m
    }
}

impl Generator for Nz {
    fn seed_bits(&self) -> u32 {
        self.ext.n_src + self.n as u32 * self.ext.d_ext
    }
    fn out_len(&self) -> usize {
        self.n
    }
    fn symbol_bits(&self) -> u32 {
        self.ext.m_out
    }
    fn eval_prefix(&self, seed: u64, m: usize, out: &mut Vec<u64>) {
        let d = self.ext.d_ext as usize;
        let x = seed >> (d * self.n);
        let mask = (1u64 << d) - 1;
        for k in 0..m.min(self.n) {
            out.push(self.ext.eval(x, (seed >> (d * (self.n - 1 - k))) & mask));
        }
    }
    fn prefix_seed_bits(&self, m: usize) -> u32 {
        self.ext.n_src + m as u32 * self.ext.d_ext
    }
    fn descriptor(&self) -> GeneratorDescriptor {
        GeneratorDescriptor::Nz { ext: self.ext.params(), n: self.n }
    }
    /// Given `x` the symbols are independent, so the average is `E_x Π_t E_y A_t^{(x)}`.
    fn averaged_segment(&self, robp: &Robp, a: usize, len: usize, _cap_bits: u32) -> Result<StochMatrix> {
        check_segment(self, robp, a, len)?;
        let w = robp.w();
        let sources = 1u64 << self.ext.n_src;
        let mut acc = StochMatrix::zeros(w);
        for x in 0..sources {
            let q = self.ext.output_support(x);
            let mut m = StochMatrix::identity(w);
            for t in a..a + len {
                m = m.mul(&self.conditional_step(robp, t, &q));
            }
            acc = acc.add(&m);
        }
        Ok(acc.scale(1.0 / sources as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{enumerate_segment, gen_entrywise_error};

    fn prog() -> Robp {
        Robp::from_fn(2, 4, 2, 0, &[1, 3], |t, u, x| (u * (t + 2) + x as usize) % 4).unwrap()
    }

    #[test]
    fn single_call() {
        let e = ExtractorSpec::new(6, 3, 2, 4).unwrap();
        let g = Nz::new(e.clone(), 1).unwrap();
        for x in 0..64 {
            for y in 0..8 {
                assert_eq!(g.eval(x << 3 | y), vec![e.eval(x, y)]);
            }
        }
    }

    #[test]
    fn conditional_average_matches_enumeration() {
        let g = Nz::new(ExtractorSpec::new(8, 4, 2, 6).unwrap(), 2).unwrap();
        let f = prog();
        let e = enumerate_segment(&g, &f, 0, 2, 24).unwrap();
        let c = g.averaged_segment(&f, 0, 2, 24).unwrap();
        assert!(e.max_abs_diff(&c) < 1e-12);
    }

    #[test]
    fn perfect_extractor_fools_one_symbol_exactly() {
        // m_out = n_src: every seed multiplier is a bijection
        let e = ExtractorSpec::new(2, 3, 2, 2).unwrap();
        assert_eq!(e.eps_ext, 0.0);
        let f = Robp::from_fn(1, 4, 2, 0, &[1, 3], |_, u, x| (u + x as usize) % 4).unwrap();
        assert!(gen_entrywise_error(&Nz::new(e.clone(), 1).unwrap(), &f, 24).unwrap() < 1e-15);
        // two symbols share the source, so equality of outputs is detectable;
        // the error still respects the bound at the conditioned entropy
        let eq = Robp::from_fn(2, 4, 2, 0, &[0], |t, u, x| match t {
            0 => x as usize,
            _ => usize::from(x as usize != u) * 3,
        })
        .unwrap();
        let g = Nz::new(e.clone(), 2).unwrap();
        let err = gen_entrywise_error(&g, &eq, 24).unwrap();
        assert!(err > 0.0);
        assert!(err <= 2.0 * 3.0 * e.measured_error(0).unwrap() + 1e-12);
    }
}
