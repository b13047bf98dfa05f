//! Weighted generators for permutation programs with a single accept node.

use crate::error::{Error, Result};
use crate::error_reduction::{binary_splitting_terms, in_bs, bs_entrywise_bound};
use crate::generators::{inw_family, FamilyPolicy, Generator, Inw};
use crate::matrix::sv_approx_error;
use crate::robp::Robp;
use crate::wpr::{compose_chain, EstimateMode, Reduction, Shape, StageMeta, TermReduction, WeightedGenerator, Wprg};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Largest number of reduced programs tracked for calibrating later levels.
const CALIBRATION_CAP: usize = 1 << 12;

/// One level of the chain: binary-splitting degree and the INW family target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermLevel {
    pub k: usize,
    pub lambda: f64,
    #[serde(default = "default_degree_bits")]
    pub max_degree_bits: u32,
    /// Declared base sv error; `None` calibrates on the supplied programs.
    #[serde(default)]
    pub tau: Option<f64>,
}

fn default_degree_bits() -> u32 {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermSchedule {
    pub levels: Vec<PermLevel>,
}

impl PermSchedule {
    /// Degree-1 levels with the given λ targets until the length is at most `threshold`.
    pub fn desk(n: usize, threshold: usize, lambdas: &[f64]) -> Self {
        let mut levels = Vec::new();
        let mut len = n;
        let mut p = 0;
        while len > threshold && len >= 4 {
            levels.push(PermLevel { k: 1, lambda: lambdas[p.min(lambdas.len() - 1)], max_degree_bits: 8, tau: None });
            len = bs_width(len, 1);
            p += 1;
        }
        PermSchedule { levels }
    }
}

/// Number of factor slots of the degree-`k` expansion over `n`, rounded up to a power of two.
pub fn bs_width(n: usize, k: usize) -> usize {
    binary_splitting_terms(n, k).map(|t| t.max_factors().next_power_of_two()).unwrap_or(n)
}

/// `max sv_approx_error(E G(U)_{b−a}, A_{a+1}⋯A_b)` over the dyadic intervals of
/// length ≥ 2 in `BS_n` that fit the generator.
pub fn measure_tau(g: &dyn Generator, f: &Robp, cap_bits: u32) -> Result<f64> {
    if !f.is_permutation() {
        return Err(Error::NotPermutation);
    }
    let n = f.n();
    let mut worst = 0.0f64;
    let mut len = 2;
    while len <= n.min(g.out_len()) {
        for a in (0..n).step_by(len) {
            debug_assert!(in_bs(n, a, a + len));
            let b = g.averaged_segment(f, a, len, cap_bits)?;
            worst = worst.max(sv_approx_error(&b, &f.segment_product(a, a + len))?);
        }
        len *= 2;
    }
    Ok(worst)
}

/// `τ < min{ε^{2/(k+1)}/(16 log² n), 1/(64 log² n)}`.
pub fn tau_hypothesis(tau: f64, eps: f64, n: usize, k: usize) -> bool {
    let l2 = (n as f64).log2().powi(2);
    tau < (eps.powf(2.0 / (k as f64 + 1.0)) / (16.0 * l2)).min(1.0 / (64.0 * l2))
}

/// INW base for one level: long enough for the longest base factor.
pub fn level_generator(n: usize, s: u32, k: usize, lambda: f64, max_degree_bits: u32) -> Result<Inw> {
    let longest = if k == 0 { n } else { n / 2 };
    let levels = longest.max(1).trailing_zeros() as usize;
    Inw::new(s, inw_family(s, levels, lambda, max_degree_bits, FamilyPolicy::Cheapest)?)
}

/// One level: binary-splitting terms over an INW base with declared entrywise
/// error `(4√τ log n)^{k+1}`.
pub fn perm_one_level(n: usize, inw: Arc<Inw>, k: usize, tau: f64) -> Result<TermReduction> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::NotPowerOfTwo(n));
    }
    let s = inw.symbol_bits();
    let terms = binary_splitting_terms(n, k)?;
    let width = terms.max_factors().next_power_of_two();
    TermReduction::new("perm-level", inw, Shape { n, s }, &terms, width, bs_entrywise_bound(tau, n, k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub n: usize,
    pub s: u32,
    pub k: usize,
    pub lambda_max: f64,
    pub tau: f64,
    pub declared: f64,
    /// Whether `τ < 1/(64 log² n)` (the hypothesis of the entrywise bound).
    pub hypothesis_ok: bool,
}

#[derive(Clone)]
pub struct PermChain {
    pub reduction: Arc<dyn Reduction>,
    pub stages: Vec<StageMeta>,
    pub levels: Vec<LevelReport>,
}

/// Composes the levels of `schedule` over programs of shape `(n, s)`.
pub fn perm_chain(n: usize, s: u32, schedule: &PermSchedule, calibrate: &[Robp], cap_bits: u32) -> Result<PermChain> {
    if schedule.levels.is_empty() {
        return Err(Error::Param("empty permutation schedule".into()));
    }
    let mut shape = Shape { n, s };
    let mut programs = Some(calibrate.to_vec());
    let mut chain: Vec<Arc<dyn Reduction>> = Vec::new();
    let mut levels = Vec::new();
    for (p, lv) in schedule.levels.iter().enumerate() {
        let inw = Arc::new(level_generator(shape.n, shape.s, lv.k, lv.lambda, lv.max_degree_bits)?);
        let tau = match (lv.tau, programs.as_deref()) {
            (Some(t), _) => t,
            (None, Some(progs)) if !progs.is_empty() => {
                let mut worst = 0.0f64;
                for g in progs {
                    worst = worst.max(measure_tau(&*inw, g, cap_bits)?);
                }
                worst
            }
            _ => return Err(Error::Infeasible(format!("level {p} needs calibration programs or an explicit τ"))),
        };
        let red = perm_one_level(shape.n, inw.clone(), lv.k, tau)?;
        let l2 = (shape.n as f64).log2().powi(2);
        levels.push(LevelReport {
            n: shape.n,
            s: shape.s,
            k: lv.k,
            lambda_max: inw.lambda_max()?,
            tau,
            declared: bs_entrywise_bound(tau, shape.n, lv.k),
            hypothesis_ok: tau < 1.0 / (64.0 * l2),
        });
        shape = red.target();
        let later = p + 1 < schedule.levels.len() && schedule.levels[p + 1].tau.is_none();
        programs = match programs {
            Some(progs) if later => expand(&red, &progs),
            _ => None,
        };
        chain.push(Arc::new(red));
    }
    let reduction = compose_chain(chain)?;
    let stages = reduction.stages();
    Ok(PermChain { reduction, stages, levels })
}

fn expand(red: &TermReduction, progs: &[Robp]) -> Option<Vec<Robp>> {
    let d = red.index_bits();
    let live: Vec<u64> = (0..1u64 << d).filter(|&i| red.weight(i) != 0.0).collect();
    if live.len().saturating_mul(progs.len()) > CALIBRATION_CAP {
        return None;
    }
    let mut out = Vec::new();
    for g in progs {
        for &i in &live {
            out.push(red.reduced_robp(g, i).ok()?);
        }
    }
    Some(out)
}

/// The chain followed by true randomness over the final shape.
pub fn perm_wprg(chain: &PermChain) -> Result<Wprg> {
    Wprg::from_reduction(chain.reduction.clone(), None, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiAccept {
    pub value: f64,
    /// Sum of the per-node declared errors.
    pub declared: f64,
    pub seed_bits: u32,
    pub weight_bound: f64,
}

/// Single-accept estimates summed over the accept set.
pub fn multi_accept_estimate(f: &Robp, schedule: &PermSchedule, cap_bits: u32) -> Result<MultiAccept> {
    if !f.is_permutation() {
        return Err(Error::NotPermutation);
    }
    let mut out = MultiAccept { value: 0.0, declared: 0.0, seed_bits: 0, weight_bound: 0.0 };
    for a in f.accept_set() {
        let fa = f.with_accept(&[a])?;
        let chain = perm_chain(f.n(), f.s(), schedule, std::slice::from_ref(&fa), cap_bits)?;
        let g = perm_wprg(&chain)?;
        out.value += g.estimate(&fa, EstimateMode::Structured { cap_bits })?.value;
        out.declared += g.declared_error();
        out.seed_bits = g.seed_bits();
        out.weight_bound = g.weight_bound();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wpr::measured_reduction_error;

    fn perm_prog(n: usize, w: usize) -> Robp {
        Robp::from_fn(n, w, 1, 0, &[1], |t, u, x| if x == 0 { (u + t + 1) % w } else { (w - 1 - u + t) % w }).unwrap()
    }

    #[test]
    fn degree_zero_is_segmented_inw() {
        let inw = Arc::new(level_generator(8, 1, 0, 0.5, 8).unwrap());
        let r = perm_one_level(8, inw.clone(), 0, 0.1).unwrap();
        assert_eq!(r.index_bits(), 0);
        assert_eq!(r.target(), Shape { n: 1, s: inw.seed_bits() });
    }

    #[test]
    fn reduced_programs_stay_single_accept_permutations() {
        let f = perm_prog(8, 5);
        let inw = Arc::new(level_generator(8, 1, 1, 0.5, 8).unwrap());
        let r = perm_one_level(8, inw, 1, 0.0).unwrap();
        for i in 0..1u64 << r.index_bits() {
            let g = r.reduced_robp(&f, i).unwrap();
            assert!(g.is_permutation());
            assert_eq!(g.accept_set().len(), 1);
        }
    }

    #[test]
    fn measured_error_within_declared() {
        let f = perm_prog(8, 4);
        let sched = PermSchedule { levels: vec![PermLevel { k: 1, lambda: 0.3, max_degree_bits: 8, tau: None }] };
        let chain = perm_chain(8, 1, &sched, std::slice::from_ref(&f), 24).unwrap();
        let err = measured_reduction_error(&*chain.reduction, &f, 24).unwrap();
        assert!(err <= chain.levels[0].declared + 1e-12, "{err} > {}", chain.levels[0].declared);
    }

    #[test]
    fn all_states_accepting_sums_to_one() {
        let f = perm_prog(8, 3).with_accept(&[0, 1, 2]).unwrap();
        let sched = PermSchedule { levels: vec![PermLevel { k: 1, lambda: 0.3, max_degree_bits: 8, tau: None }] };
        let est = multi_accept_estimate(&f, &sched, 24).unwrap().value;
        assert!((est - 1.0).abs() < 1e-12);
        let none = f.with_accept(&[]).unwrap();
        assert_eq!(multi_accept_estimate(&none, &sched, 24).unwrap().value, 0.0);
    }
}
