//! The acceptance suite, also shipped as `configs/acceptance.json`.

use super::{AcceptMode, Check, Estimator, Experiment, FamilySpec, Schedule, ScheduleRef, SuiteConfig};
use crate::generators::{FamilyPolicy, GeneratorDescriptor};
use crate::perm::PermLevel;
use crate::randomness::ExtractorParams;
use crate::robp::RobpClass;
use crate::wpr::Stage;

fn family(class: RobpClass, n: usize, w: usize, s: u32, count: usize, seed: u64) -> FamilySpec {
    FamilySpec { class, n, n_min: None, w, w_min: None, s, count, seed, accept: AcceptMode::Single }
}

fn verify(name: &str, family: Option<FamilySpec>, check: Check) -> Experiment {
    Experiment::Verify { name: name.into(), family, check }
}

fn ext(n_src: u32, d_ext: u32, m_out: u32) -> ExtractorParams {
    ExtractorParams { n_src, d_ext, m_out, k_min: n_src }
}

pub fn acceptance_suite() -> SuiteConfig {
    let mut ex = Vec::new();
    ex.push(verify(
        "richardson",
        None,
        Check::Richardson {
            ns: vec![2, 4, 6, 8],
            ws: vec![2, 3, 4],
            ks: vec![1, 3, 5],
            epsilons: vec![1e-1, 1e-2],
            trials: 100,
            seed: 1,
        },
    ));
    ex.push(verify("binary-splitting", None, Check::BinarySplitting { ns: vec![2, 4, 8], ks: vec![0, 1, 2], w: 3, trials: 20, seed: 2 }));

    let perm8 = |s: u32| FamilySpec { w_min: Some(2), ..family(RobpClass::Permutation, 8, 6, s, 50, 3) };
    ex.push(verify("inw-sv-s1", Some(perm8(1)), Check::InwSv { lambda: 0.02, max_degree_bits: 40, policy: FamilyPolicy::MggTop }));
    ex.push(verify("inw-sv-s2", Some(perm8(2)), Check::InwSv { lambda: 0.02, max_degree_bits: 12, policy: FamilyPolicy::Cheapest }));
    for s in [1, 2] {
        ex.push(verify(
            &format!("bs-envelope-s{s}"),
            Some(perm8(s)),
            Check::BsEnvelope { lambda: 0.7, max_degree_bits: 12, policy: FamilyPolicy::Cheapest, ks: vec![1, 2] },
        ));
    }

    for n in [2, 3] {
        for n_src in [8, 9, 10] {
            ex.push(verify(&format!("nz-n{n}-src{n_src}"), Some(family(RobpClass::General, n, 4, 2, 50, 5)), Check::Nz { n_src, d_ext: 3 }));
        }
    }

    ex.push(verify("reductions", Some(family(RobpClass::General, 4, 3, 1, 50, 6)), Check::Reductions));

    ex.push(Experiment::Estimate {
        name: "end-to-end".into(),
        family: family(RobpClass::General, 12, 4, 1, 50, 7),
        schedule: ScheduleRef::Inline(Schedule::Main {
            stages: vec![
                Stage::Length { k: 3, generator: GeneratorDescriptor::Nz { ext: ext(3, 1, 1), n: 12 }, epsilon: None },
                Stage::Alphabet { extractor: ext(15, 2, 15), epsilon: None },
            ],
        }),
        estimator: Estimator::Structured,
    });

    let perm_levels = vec![
        PermLevel { k: 1, lambda: 0.7, max_degree_bits: 8, tau: None },
        PermLevel { k: 1, lambda: 0.92, max_degree_bits: 8, tau: None },
    ];
    let perm16 = FamilySpec { w_min: Some(2), ..family(RobpClass::Permutation, 16, 6, 1, 50, 8) };
    ex.push(Experiment::Estimate {
        name: "perm-single".into(),
        family: perm16.clone(),
        schedule: ScheduleRef::Inline(Schedule::Perm { levels: perm_levels.clone(), multi_accept: false }),
        estimator: Estimator::Structured,
    });
    ex.push(Experiment::Estimate {
        name: "perm-multi".into(),
        family: FamilySpec { accept: AcceptMode::Random, ..perm16 },
        schedule: ScheduleRef::Inline(Schedule::Perm { levels: perm_levels, multi_accept: true }),
        estimator: Estimator::Structured,
    });

    let regular = FamilySpec { n_min: Some(1), w_min: Some(1), ..family(RobpClass::Regular, 8, 8, 1, 200, 9) };
    ex.push(verify("transform", Some(regular), Check::Transform));

    for s in [1, 2] {
        ex.push(verify(
            &format!("derand-walk-s{s}"),
            Some(family(RobpClass::Regular, 8, 4, s, 50, 10)),
            Check::DerandWalk { lambda: 0.7, max_degree_bits: 8, k: 1 },
        ));
    }

    ex.push(verify("sampler", Some(family(RobpClass::General, 4, 2, 1, 50, 11)), Check::Sampler { k: 3 }));
    SuiteConfig::new(ex)
}

/// A small instance of each verification check, for quick runs.
pub fn quick_check(kind: &str) -> Option<Experiment> {
    let perm8 = FamilySpec { w_min: Some(2), ..family(RobpClass::Permutation, 8, 4, 1, 5, 1) };
    Some(match kind {
        "richardson" => verify(
            kind,
            None,
            Check::Richardson { ns: vec![2, 4], ws: vec![2, 3], ks: vec![1, 3], epsilons: vec![1e-1], trials: 5, seed: 1 },
        ),
        "binary-splitting" => verify(kind, None, Check::BinarySplitting { ns: vec![2, 4, 8], ks: vec![0, 1, 2], w: 2, trials: 3, seed: 2 }),
        "inw-sv" => verify(kind, Some(perm8), Check::InwSv { lambda: 0.7, max_degree_bits: 12, policy: FamilyPolicy::Cheapest }),
        "bs-envelope" => verify(
            kind,
            Some(FamilySpec { s: 2, ..perm8 }),
            Check::BsEnvelope { lambda: 0.7, max_degree_bits: 12, policy: FamilyPolicy::Cheapest, ks: vec![1, 2] },
        ),
        "nz" => verify(kind, Some(family(RobpClass::General, 2, 4, 2, 5, 5)), Check::Nz { n_src: 8, d_ext: 3 }),
        "reductions" => verify(kind, Some(family(RobpClass::General, 4, 3, 1, 2, 6)), Check::Reductions),
        "transform" => verify(
            kind,
            Some(FamilySpec { n_min: Some(1), w_min: Some(1), ..family(RobpClass::Regular, 6, 6, 1, 20, 9) }),
            Check::Transform,
        ),
        "derand-walk" => verify(kind, Some(family(RobpClass::Regular, 8, 4, 1, 3, 10)), Check::DerandWalk { lambda: 0.7, max_degree_bits: 8, k: 1 }),
        "sampler" => verify(kind, Some(family(RobpClass::General, 4, 2, 1, 3, 11)), Check::Sampler { k: 3 }),
        _ => return None,
    })
}
