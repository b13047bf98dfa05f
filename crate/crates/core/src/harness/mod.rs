//! Instance generation, experiment orchestration and reporting.

mod acceptance;
mod checks;
mod instances;
mod report;

pub use acceptance::{acceptance_suite, quick_check};
pub use checks::{functional_mismatches, run_check, Check, BLOCK_TOLERANCE};
pub use instances::{gen_instance, gen_instances, random_accept, AcceptMode, FamilySpec, PortableRng};
pub use report::{
    emit_report, parse_csv, parse_json, ratio, to_csv, to_json, ExperimentReport, Format, Record, Report, Summary, CSV_HEADER,
    SLACK,
};

use crate::error::{Error, Result};
use crate::perm::{multi_accept_estimate, perm_chain, perm_wprg, PermLevel, PermSchedule};
use crate::regular::{regular_estimator, DerandLevel};
use crate::robp::RobpClass;
use crate::wpr::{main_reduction_pipeline, EstimateMode, Shape, Stage, WeightedGenerator, Wprg};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const DEFAULT_CAP_BITS: u32 = 24;
/// Largest accepted enumeration cap.
pub const MAX_CAP_BITS: u32 = 40;

/// `reproducible` runs instances in order and zeroes wall times; `fast` runs
/// instances in parallel and records them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Reproducible,
    Fast,
}

/// How a weighted generator's mean is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Exhaustive,
    #[default]
    Structured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "kebab-case")]
pub enum Schedule {
    /// Length and alphabet stages followed by a true-random tail.
    Main { stages: Vec<Stage> },
    /// Binary-splitting levels over INW bases for permutation programs.
    Perm {
        levels: Vec<PermLevel>,
        #[serde(default)]
        multi_accept: bool,
    },
    /// Derandomized-walk levels for regular programs.
    Regular { levels: Vec<DerandLevel> },
}

/// A schedule given inline or as a path relative to the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleRef {
    File { file: PathBuf },
    Inline(Schedule),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Estimate {
        name: String,
        family: FamilySpec,
        schedule: ScheduleRef,
        #[serde(default)]
        estimator: Estimator,
    },
    Verify {
        name: String,
        #[serde(default)]
        family: Option<FamilySpec>,
        check: Check,
    },
}

impl Experiment {
    pub fn name(&self) -> &str {
        match self {
            Experiment::Estimate { name, .. } | Experiment::Verify { name, .. } => name,
        }
    }
}

fn default_cap() -> u32 {
    DEFAULT_CAP_BITS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    #[serde(default)]
    pub mode: Mode,
    /// Enumeration cap for exhaustive oracles, in seed bits.
    #[serde(default = "default_cap")]
    pub cap_bits: u32,
    /// Directory for reports.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
}

impl SuiteConfig {
    pub fn new(experiments: Vec<Experiment>) -> Self {
        SuiteConfig { mode: Mode::Reproducible, cap_bits: DEFAULT_CAP_BITS, out: None, experiments }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cap_bits == 0 || self.cap_bits > MAX_CAP_BITS {
            return Err(Error::Param(format!("cap must be between 1 and {MAX_CAP_BITS} bits, got {}", self.cap_bits)));
        }
        let mut names = std::collections::BTreeSet::new();
        for e in &self.experiments {
            if !names.insert(e.name()) {
                return Err(Error::Param(format!("duplicate experiment name {}", e.name())));
            }
            match e {
                Experiment::Estimate { family, .. } => family.validate()?,
                Experiment::Verify { family, check, name } => {
                    if let Some(f) = family {
                        f.validate()?;
                    } else if check.needs_family() {
                        return Err(Error::Param(format!("{name}: check {} needs an instance family", check.kind())));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses a config and inlines schedule files relative to `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: SuiteConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        for e in &mut cfg.experiments {
            if let Experiment::Estimate { schedule, .. } = e {
                if let ScheduleRef::File { file } = schedule {
                    *schedule = ScheduleRef::Inline(load_schedule(&base.join(file))?);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_schedule(path: &Path) -> Result<Schedule> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), msg: format!("{}: {e}", path.display()) })
}

pub fn class_name(c: RobpClass) -> &'static str {
    match c {
        RobpClass::Permutation => "permutation",
        RobpClass::Regular => "regular",
        RobpClass::General => "general",
    }
}

/// Runs `f` on instances `0..count` and concatenates the records in index order.
pub fn map_instances<F>(mode: Mode, count: usize, f: F) -> Result<Vec<Record>>
where
    F: Fn(usize) -> Result<Vec<Record>> + Sync + Send,
{
    let run = |i: usize| -> Result<Vec<Record>> {
        let t = Instant::now();
        let mut recs = f(i)?;
        let ms = match mode {
            Mode::Fast => t.elapsed().as_millis() as u64,
            Mode::Reproducible => 0,
        };
        for r in &mut recs {
            r.wall_ms = ms;
        }
        Ok(recs)
    };
    let parts: Vec<Result<Vec<Record>>> = match mode {
        Mode::Fast => (0..count).into_par_iter().map(run).collect(),
        Mode::Reproducible => (0..count).map(run).collect(),
    };
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn estimate_mode(e: Estimator, cap_bits: u32) -> EstimateMode {
    match e {
        Estimator::Exhaustive => EstimateMode::Exhaustive { cap_bits },
        Estimator::Structured => EstimateMode::Structured { cap_bits },
    }
}

fn run_estimate(name: &str, fam: &FamilySpec, schedule: &Schedule, estimator: Estimator, mode: Mode, cap_bits: u32) -> Result<Vec<Record>> {
    let class = class_name(fam.class);
    let em = estimate_mode(estimator, cap_bits);
    map_instances(mode, fam.count, |i| {
        let f = gen_instance(fam, i)?;
        let exact = f.exact_expectation();
        let (value, declared, seeds, wb) = match schedule {
            Schedule::Main { stages } => {
                let pipe = main_reduction_pipeline(Shape::of(&f), f.w(), stages, std::slice::from_ref(&f), cap_bits)?;
                let g = Wprg::from_reduction(pipe.reduction, None, 0.0)?;
                (g.estimate(&f, em)?.value, g.declared_error(), g.seed_bits(), g.weight_bound())
            }
            Schedule::Perm { levels, multi_accept: true } => {
                let m = multi_accept_estimate(&f, &PermSchedule { levels: levels.clone() }, cap_bits)?;
                (m.value, m.declared, m.seed_bits, m.weight_bound)
            }
            Schedule::Perm { levels, multi_accept: false } => {
                let sched = PermSchedule { levels: levels.clone() };
                let chain = perm_chain(f.n(), f.s(), &sched, std::slice::from_ref(&f), cap_bits)?;
                let g = perm_wprg(&chain)?;
                (g.estimate(&f, em)?.value, g.declared_error(), g.seed_bits(), g.weight_bound())
            }
            Schedule::Regular { levels } => {
                let est = regular_estimator(&f, levels)?;
                let wb = est.levels.iter().map(|l| l.terms as f64).product();
                (est.value, est.declared, est.seed_bits, wb)
            }
        };
        Ok(vec![Record::new(i, class, name, declared, (value - exact).abs()).shape(f.n(), f.w(), f.s()).seeds(seeds, wb)])
    })
}

pub fn run_experiment(e: &Experiment, mode: Mode, cap_bits: u32) -> Result<ExperimentReport> {
    let records = match e {
        Experiment::Estimate { name, family, schedule, estimator } => {
            let sched = match schedule {
                ScheduleRef::Inline(s) => s.clone(),
                ScheduleRef::File { file } => load_schedule(file)?,
            };
            run_estimate(name, family, &sched, *estimator, mode, cap_bits)?
        }
        Experiment::Verify { name, family, check } => run_check(name, check, family.as_ref(), mode, cap_bits)?,
    };
    Ok(ExperimentReport::new(e.name(), records))
}

/// Runs every experiment in order; fails on the first construction error.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Report> {
    cfg.validate()?;
    let mut reports = Vec::with_capacity(cfg.experiments.len());
    for e in &cfg.experiments {
        reports.push(run_experiment(e, cfg.mode, cfg.cap_bits)?);
    }
    Ok(Report::new(reports))
}
