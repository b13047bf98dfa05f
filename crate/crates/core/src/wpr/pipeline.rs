//! Stage schedules composed into one reduction.

use super::{compose_chain, length_reduction, AlphabetReduction, Reduction, Shape, StageMeta};
use crate::error::{Error, Result};
use crate::generators::GeneratorDescriptor;
use crate::randomness::{ExtractorParams, ExtractorSpec};
use crate::robp::Robp;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Largest number of reduced programs tracked for calibrating later stages.
const CALIBRATION_CAP: usize = 1 << 12;

/// One schedule stage. `epsilon = None` calibrates the stage on the supplied
/// programs: the declared error is the smallest one whose hypothesis the
/// measured quantities satisfy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Stage {
    Length {
        k: usize,
        generator: GeneratorDescriptor,
        #[serde(default)]
        epsilon: Option<f64>,
    },
    Alphabet {
        extractor: ExtractorParams,
        #[serde(default)]
        epsilon: Option<f64>,
    },
}

#[derive(Clone)]
pub struct Pipeline {
    pub reduction: Arc<dyn Reduction>,
    pub stages: Vec<StageMeta>,
    /// Measured hypothesis value per stage (largest base factor error for
    /// length stages, conditioned extractor error for alphabet stages).
    pub hypotheses: Vec<Option<f64>>,
}

/// Builds the stages in order and composes them; `calibrate` lists the
/// source-shape programs the calibrated stages are measured on.
pub fn main_reduction_pipeline(source: Shape, w: usize, stages: &[Stage], calibrate: &[Robp], cap_bits: u32) -> Result<Pipeline> {
    if stages.is_empty() {
        return Err(Error::Param("empty schedule".into()));
    }
    let mut shape = source;
    let mut programs: Option<Vec<Robp>> = Some(calibrate.to_vec());
    let mut chain: Vec<Arc<dyn Reduction>> = Vec::new();
    let mut hypotheses = Vec::new();
    for (p, stage) in stages.iter().enumerate() {
        let (red, hyp): (Arc<dyn Reduction>, Option<f64>) = match stage {
            Stage::Length { k, generator, epsilon } => {
                let base: Arc<dyn crate::generators::Generator> = Arc::from(generator.build()?);
                let probe = length_reduction(base.clone(), shape.n, *k, 0.0)?;
                let progs = programs.as_deref().unwrap_or(&[]);
                let mut worst: Option<f64> = None;
                for g in progs {
                    let e = probe.factor_inf_error(g, cap_bits)?;
                    worst = Some(worst.map_or(e, |m: f64| m.max(e)));
                }
                let budget = 2.0 * (shape.n as f64 + 1.0);
                let eps = match (epsilon, worst) {
                    (Some(e), Some(m)) if m > e / budget => {
                        return Err(Error::BudgetUnmet { what: format!("stage {p} base generator"), measured: m, budget: e / budget })
                    }
                    (Some(e), _) => *e,
                    (None, Some(m)) => m * budget,
                    (None, None) => {
                        return Err(Error::Infeasible(format!("stage {p} needs calibration programs or an explicit epsilon")))
                    }
                };
                (Arc::new(length_reduction(base, shape.n, *k, eps)?), worst)
            }
            Stage::Alphabet { extractor, epsilon } => {
                let ext = ExtractorSpec::from_params(extractor)?;
                let r = AlphabetReduction::new(ext, shape.n, w, *epsilon)?;
                let e = r.eps_ext();
                (Arc::new(r), Some(e))
            }
        };
        if red.source() != shape {
            return Err(Error::Shape(format!("stage {p} expects {:?}, previous stage produces {shape:?}", red.source())));
        }
        shape = red.target();
        let later_needs = stages[p + 1..].iter().any(|s| matches!(s, Stage::Length { .. }));
        programs = match programs {
            Some(progs) if later_needs => expand(&*red, &progs),
            _ => None,
        };
        chain.push(red);
        hypotheses.push(hyp);
    }
    let reduction = compose_chain(chain)?;
    let stages = reduction.stages();
    Ok(Pipeline { reduction, stages, hypotheses })
}

fn expand(red: &dyn Reduction, progs: &[Robp]) -> Option<Vec<Robp>> {
    let d = red.index_bits();
    let live = (0..1u64 << d.min(20)).filter(|&i| red.weight(i) != 0.0).count();
    if d > 20 || live.saturating_mul(progs.len()) > CALIBRATION_CAP {
        return None;
    }
    let mut out = Vec::new();
    for g in progs {
        for i in 0..1u64 << d {
            if red.weight(i) != 0.0 {
                out.push(red.reduced_robp(g, i).ok()?);
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wpr::{chain_error, measured_reduction_error, rat_to_f64};

    #[test]
    fn schedule_round_trips_and_composes() {
        let f = Robp::from_fn(4, 2, 1, 0, &[1], |t, u, x| if t % 2 == 0 { u ^ x as usize } else { u & x as usize }).unwrap();
        let stages = vec![
            Stage::Length {
                k: 3,
                generator: GeneratorDescriptor::Nz { ext: ExtractorParams { n_src: 2, d_ext: 1, m_out: 1, k_min: 2 }, n: 4 },
                epsilon: None,
            },
            Stage::Alphabet { extractor: ExtractorParams { n_src: 6, d_ext: 3, m_out: 6, k_min: 6 }, epsilon: None },
        ];
        let json = serde_json::to_string(&stages).unwrap();
        assert_eq!(serde_json::from_str::<Vec<Stage>>(&json).unwrap(), stages);
        let p = main_reduction_pipeline(Shape::of(&f), 2, &stages, std::slice::from_ref(&f), 24).unwrap();
        assert_eq!(p.stages.len(), 2);
        assert_eq!(chain_error(&p.stages), p.reduction.declared_error());
        assert_eq!(p.reduction.target(), Shape { n: 3, s: 3 });
        let err = measured_reduction_error(&*p.reduction, &f, 24).unwrap();
        assert!(err <= rat_to_f64(&p.reduction.declared_error()) + 1e-12);
    }

    #[test]
    fn explicit_budget_is_enforced() {
        let f = Robp::from_fn(4, 2, 1, 0, &[1], |_, u, x| u ^ x as usize).unwrap();
        let stages = vec![Stage::Length {
            k: 1,
            generator: GeneratorDescriptor::Nz { ext: ExtractorParams { n_src: 2, d_ext: 1, m_out: 1, k_min: 2 }, n: 4 },
            epsilon: Some(1e-9),
        }];
        assert!(matches!(
            main_reduction_pipeline(Shape::of(&f), 2, &stages, &[f], 24),
            Err(Error::BudgetUnmet { .. })
        ));
    }
}
