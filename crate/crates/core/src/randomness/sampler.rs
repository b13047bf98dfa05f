//! Averaging sampler from expander neighborhoods.
//!
//! `Samp(x, y)` is the `y`-th neighbor of vertex `x` in a graph on `2^q`
//! vertices. For `f: [2^q] → [−1, 1]` the expander mixing lemma gives
//! `Σ_x (avg_y f(Samp(x, y)) − E f)² ≤ λ² · 2^q`, so the fraction of `x` whose
//! sample mean is off by at least α is at most `(λ/α)²`.

use super::expander::{cheapest_expander, lambda_measure, Expander};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerSpec {
    pub r: u32,
    pub p: u32,
    pub q: u32,
    pub alpha: f64,
    pub gamma: f64,
    pub graph: Expander,
    pub lambda: f64,
}

impl SamplerSpec {
    /// Picks the smallest-degree graph on `2^q` vertices whose measured λ certifies
    /// `(λ/α)² ≤ γ`; fails when that needs more than `max_p` sample-index bits.
    pub fn design(q: u32, alpha: f64, gamma: f64, max_p: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 && gamma > 0.0 && gamma < 1.0) || q == 0 {
            return Err(Error::Param(format!("need α, γ ∈ (0,1) and q ≥ 1 (got {alpha}, {gamma}, {q})")));
        }
        let target = alpha * gamma.sqrt();
        let graph = cheapest_expander(1u64 << q, target, max_p).map_err(|_| {
            Error::Infeasible(format!("sampler with q={q}, α={alpha:e}, γ={gamma:e} needs more than {max_p} index bits"))
        })?;
        Self::from_graph(graph, alpha, gamma)
    }

    pub fn from_graph(graph: Expander, alpha: f64, gamma: f64) -> Result<Self> {
        let v = graph.vertices();
        if !v.is_power_of_two() {
            return Err(Error::Param("sampler graph needs 2^q vertices".into()));
        }
        let lambda = lambda_measure(&graph)?;
        Ok(SamplerSpec { r: v.trailing_zeros(), p: graph.degree_bits(), q: v.trailing_zeros(), alpha, gamma, graph, lambda })
    }

    pub fn eval(&self, x: u64, y: u64) -> u64 {
        self.graph.neighbor(x, y)
    }

    /// Certified bound on the fraction of bad `x`.
    pub fn failure_bound(&self) -> f64 {
        (self.lambda / self.alpha).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_has_no_deviation() {
        let s = SamplerSpec::design(6, 0.3, 0.5, 12).unwrap();
        for x in 0..64 {
            let avg: f64 = (0..1u64 << s.p).map(|y| { let _ = s.eval(x, y); 1.0 }).sum::<f64>() / (1u64 << s.p) as f64;
            assert_eq!(avg, 1.0);
        }
    }

    #[test]
    fn half_cube_exhaustive() {
        let s = SamplerSpec::design(8, 0.25, 0.2, 16).unwrap();
        assert!(s.failure_bound() <= s.gamma);
        let f = |v: u64| if v < 128 { 1.0 } else { 0.0 };
        let bad = (0..256u64)
            .filter(|&x| {
                let avg: f64 = (0..1u64 << s.p).map(|y| f(s.eval(x, y))).sum::<f64>() / (1u64 << s.p) as f64;
                (avg - 0.5).abs() >= s.alpha
            })
            .count();
        assert!(bad as f64 / 256.0 <= s.gamma);
    }

    #[test]
    fn infeasible_is_reported() {
        assert!(matches!(SamplerSpec::design(10, 1e-3, 1e-3, 4), Err(Error::Infeasible(_))));
    }
}
