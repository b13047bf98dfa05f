//! Verification experiments: each record compares a measured quantity with the
//! bound the construction promises (0 for exact identities).

use super::instances::{gen_instance, FamilySpec, PortableRng};
use super::report::Record;
use super::{class_name, map_instances, Mode};
use crate::error::{Error, Result};
use crate::error_reduction::{
    binary_splitting_eval, binary_splitting_terms, bs_entrywise_bound, in_bs, richardson_bound, richardson_eval,
    richardson_terms, SegmentTable,
};
use crate::generators::{gen_sv_error, inw_family, FamilyPolicy, Generator, Inw, Nz, TrueRandom};
use crate::matrix::{sv_approx_error, MatrixAlgebra, RatMatrix, StochMatrix};
use crate::perm::{measure_tau, perm_chain, PermLevel, PermSchedule};
use crate::randomness::{Expander, ExtractorParams, ExtractorSpec, SamplerSpec};
use crate::regular::{regular_estimator, DerandLevel, DerandWalk};
use crate::robp::{Robp, RobpClass};
use crate::verify::{binary_splitting_direct, block_richardson, brute_generator_expectation};
use crate::wpr::{
    chain_error, compose, length_reduction, main_reduction_pipeline, measured_reduction_error, rat_to_f64,
    sampler_amplified_wprg, AlphabetReduction, IdentityReduction, Reduction, Shape, Stage, WeightedGenerator, Wprg,
};
use crate::generators::GeneratorDescriptor;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

/// Agreement required between the term sum and the block-matrix iteration.
pub const BLOCK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum Check {
    /// Perturbed segment tables around random substochastic steps.
    Richardson { ns: Vec<usize>, ws: Vec<usize>, ks: Vec<usize>, epsilons: Vec<f64>, trials: usize, seed: u64 },
    /// Term sums against the direct recursion on random rational tables.
    BinarySplitting { ns: Vec<usize>, ks: Vec<usize>, w: usize, trials: usize, seed: u64 },
    /// sv error of an INW generator against `11 λ log n`.
    InwSv {
        lambda: f64,
        max_degree_bits: u32,
        #[serde(default)]
        policy: FamilyPolicy,
    },
    /// Entrywise error of binary-splitting sums over an INW base against `(4√τ log n)^{k+1}`.
    BsEnvelope {
        lambda: f64,
        max_degree_bits: u32,
        #[serde(default)]
        policy: FamilyPolicy,
        ks: Vec<usize>,
    },
    /// One NZ call against `3n` times the conditioned extractor error.
    Nz { n_src: u32, d_ext: u32 },
    /// Declared errors, functional equality and composition metadata of the reductions.
    Reductions,
    /// Regular-to-permutation transform preserves the acceptance probability.
    Transform,
    /// Bijectivity, double stochasticity and sv error of derandomized walks, and
    /// a one-level regular estimate.
    DerandWalk { lambda: f64, max_degree_bits: u32, k: usize },
    /// Sampler amplification over a true-random base with the complete graph.
    Sampler { k: usize },
}

impl Check {
    pub fn kind(&self) -> &'static str {
        match self {
            Check::Richardson { .. } => "richardson",
            Check::BinarySplitting { .. } => "binary-splitting",
            Check::InwSv { .. } => "inw-sv",
            Check::BsEnvelope { .. } => "bs-envelope",
            Check::Nz { .. } => "nz",
            Check::Reductions => "reductions",
            Check::Transform => "transform",
            Check::DerandWalk { .. } => "derand-walk",
            Check::Sampler { .. } => "sampler",
        }
    }

    pub fn needs_family(&self) -> bool {
        !matches!(self, Check::Richardson { .. } | Check::BinarySplitting { .. })
    }
}

pub fn run_check(name: &str, check: &Check, family: Option<&FamilySpec>, mode: Mode, cap_bits: u32) -> Result<Vec<Record>> {
    let fam = || family.ok_or_else(|| Error::Param(format!("{name}: check {} needs an instance family", check.kind())));
    match check {
        Check::Richardson { ns, ws, ks, epsilons, trials, seed } => richardson(name, ns, ws, ks, epsilons, *trials, *seed, mode),
        Check::BinarySplitting { ns, ks, w, trials, seed } => binary_splitting(name, ns, ks, *w, *trials, *seed, mode),
        Check::InwSv { lambda, max_degree_bits, policy } => inw_sv(name, fam()?, *lambda, *max_degree_bits, *policy, mode, cap_bits),
        Check::BsEnvelope { lambda, max_degree_bits, policy, ks } => {
            bs_envelope(name, fam()?, *lambda, *max_degree_bits, *policy, ks, mode, cap_bits)
        }
        Check::Nz { n_src, d_ext } => nz(name, fam()?, *n_src, *d_ext, mode, cap_bits),
        Check::Reductions => reductions(name, fam()?, mode, cap_bits),
        Check::Transform => transform(name, fam()?, mode),
        Check::DerandWalk { lambda, max_degree_bits, k } => derand_walk(name, fam()?, *lambda, *max_degree_bits, *k, mode),
        Check::Sampler { k } => sampler(name, fam()?, *k, mode, cap_bits),
    }
}

fn product(steps: &[StochMatrix], i: usize, j: usize, w: usize) -> StochMatrix {
    steps[i..j].iter().fold(StochMatrix::identity(w), |m, a| m.mul(a))
}

fn random_substochastic(rng: &mut PortableRng, w: usize) -> StochMatrix {
    let mut m = StochMatrix::zeros(w);
    for r in 0..w {
        let v: Vec<f64> = (0..w).map(|_| rng.unit()).collect();
        let scale = rng.unit() / v.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        for (c, x) in v.into_iter().enumerate() {
            m.set(r, c, x * scale);
        }
    }
    m
}

/// Random matrix with every row's absolute sum in `[δ/2, δ]`.
fn perturbation(rng: &mut PortableRng, w: usize, delta: f64) -> StochMatrix {
    let mut m = StochMatrix::zeros(w);
    for r in 0..w {
        let v: Vec<f64> = (0..w).map(|_| 2.0 * rng.unit() - 1.0).collect();
        let norm: f64 = v.iter().map(|x| x.abs()).sum();
        let scale = delta * (0.5 + 0.5 * rng.unit()) / norm.max(f64::MIN_POSITIVE);
        for (c, x) in v.into_iter().enumerate() {
            m.set(r, c, x * scale);
        }
    }
    m
}

#[allow(clippy::too_many_arguments)]
fn richardson(
    name: &str,
    ns: &[usize],
    ws: &[usize],
    ks: &[usize],
    epsilons: &[f64],
    trials: usize,
    seed: u64,
    mode: Mode,
) -> Result<Vec<Record>> {
    let mut combos = Vec::new();
    for &n in ns {
        for &w in ws {
            for &k in ks {
                for &e in epsilons {
                    combos.push((n, w, k, e));
                }
            }
        }
    }
    map_instances(mode, combos.len() * trials, |idx| {
        let (n, w, k, eps) = combos[idx / trials];
        let terms = richardson_terms(n, k)?;
        let mut rng = PortableRng::new(seed, idx as u64);
        let steps: Vec<StochMatrix> = (0..n).map(|_| random_substochastic(&mut rng, w)).collect();
        let delta = eps / (2.0 * (n as f64 + 1.0));
        // unit segments are the steps themselves
        let table = SegmentTable::from_fn(n, w, |i, j| {
            let exact = product(&steps, i, j, w);
            Some(if j - i <= 1 { exact } else { exact.add(&perturbation(&mut rng, w, delta)) })
        });
        let got = richardson_eval(&terms, &table)?;
        let err = got.sub(&product(&steps, 0, n, w)).inf_norm();
        let block = block_richardson(&steps, &table, (k - 1) / 2)?;
        let tag = format!("k{k}/eps{eps:e}");
        Ok(vec![
            Record::new(idx, "substochastic", &format!("{name}/envelope/{tag}"), richardson_bound(eps, n, k), err)
                .shape(n, w, 0)
                .seeds(0, terms.len() as f64),
            Record::new(idx, "substochastic", &format!("{name}/block/{tag}"), BLOCK_TOLERANCE, got.max_abs_diff(&block))
                .shape(n, w, 0),
        ])
    })
}

fn random_rational(rng: &mut PortableRng, w: usize) -> RatMatrix {
    let mut m = RatMatrix::zeros(w);
    for r in 0..w {
        for c in 0..w {
            let num = rng.below(17) as i64 - 8;
            let den = rng.range(1, 8) as i64;
            m.set(r, c, BigRational::new(BigInt::from(num), BigInt::from(den)));
        }
    }
    m
}

fn binary_splitting(name: &str, ns: &[usize], ks: &[usize], w: usize, trials: usize, seed: u64, mode: Mode) -> Result<Vec<Record>> {
    let combos: Vec<(usize, usize)> = ns.iter().flat_map(|&n| ks.iter().map(move |&k| (n, k))).collect();
    let total = combos.len() * trials;
    let mut recs = map_instances(mode, total, |idx| {
        let (n, k) = combos[idx / trials];
        let mut rng = PortableRng::new(seed, idx as u64);
        let steps: Vec<RatMatrix> = (0..n).map(|_| random_rational(&mut rng, w)).collect();
        let table = SegmentTable::from_fn(n, w, |i, j| {
            if j == i + 1 {
                Some(steps[i].clone())
            } else if in_bs(n, i, j) {
                Some(random_rational(&mut rng, w))
            } else {
                None
            }
        });
        let terms = binary_splitting_terms(n, k)?;
        let same = binary_splitting_eval(&terms, &table)? == binary_splitting_direct(&steps, &table, 0, n, k)?;
        Ok(vec![Record::new(idx, "rational", &format!("{name}/recursion/k{k}"), 0.0, if same { 0.0 } else { 1.0 })
            .shape(n, w, 0)
            .seeds(0, terms.len() as f64)])
    })?;
    let mut got: Vec<(i8, Vec<usize>)> =
        binary_splitting_terms(4, 1)?.terms.into_iter().map(|t| (t.sign, t.breakpoints)).collect();
    got.sort();
    let mut want = vec![(1, vec![1, 2, 4]), (1, vec![2, 3, 4]), (-1, vec![2, 4])];
    want.sort();
    recs.push(Record::new(total, "terms", &format!("{name}/closed-form"), 0.0, if got == want { 0.0 } else { 1.0 }).shape(4, 0, 0));
    Ok(recs)
}

fn log2_exact(n: usize) -> Result<usize> {
    if n.is_power_of_two() {
        Ok(n.trailing_zeros() as usize)
    } else {
        Err(Error::NotPowerOfTwo(n))
    }
}

fn family_inw(fam: &FamilySpec, lambda: f64, max_degree_bits: u32, policy: FamilyPolicy) -> Result<Inw> {
    let levels = log2_exact(fam.n)?;
    Inw::new(fam.s, inw_family(fam.s, levels, lambda, max_degree_bits, policy)?)
}

fn inw_sv(name: &str, fam: &FamilySpec, lambda: f64, mdb: u32, policy: FamilyPolicy, mode: Mode, cap_bits: u32) -> Result<Vec<Record>> {
    let inw = family_inw(fam, lambda, mdb, policy)?;
    let bound = 11.0 * inw.lambda_max()? * inw.levels() as f64;
    map_instances(mode, fam.count, |i| {
        let f = gen_instance(fam, i)?;
        let e = gen_sv_error(&inw, &f, cap_bits)?;
        Ok(vec![Record::new(i, class_name(fam.class), name, bound, e).shape(f.n(), f.w(), f.s()).seeds(inw.seed_bits(), 1.0)])
    })
}

#[allow(clippy::too_many_arguments)]
fn bs_envelope(
    name: &str,
    fam: &FamilySpec,
    lambda: f64,
    mdb: u32,
    policy: FamilyPolicy,
    ks: &[usize],
    mode: Mode,
    cap_bits: u32,
) -> Result<Vec<Record>> {
    let inw = family_inw(fam, lambda, mdb, policy)?;
    map_instances(mode, fam.count, |i| {
        let f = gen_instance(fam, i)?;
        let n = f.n();
        let tau = measure_tau(&inw, &f, cap_bits)?;
        let exact = f.segment_product(0, n);
        let mut out = Vec::new();
        for &k in ks {
            let terms = binary_splitting_terms(n, k)?;
            let factors: BTreeSet<(usize, usize)> = terms.terms.iter().flat_map(|t| t.factors()).collect();
            let mut table = SegmentTable::new(n, f.w());
            for (a, b) in factors {
                let m = if b - a == 1 { f.one_step_average(a) } else { inw.averaged_segment(&f, a, b - a, cap_bits)? };
                table.set(a, b, m);
            }
            let err = binary_splitting_eval(&terms, &table)?.max_abs_diff(&exact);
            out.push(
                Record::new(i, class_name(fam.class), &format!("{name}/k{k}"), bs_entrywise_bound(tau, n, k), err)
                    .shape(n, f.w(), f.s())
                    .seeds(inw.seed_bits(), terms.len() as f64),
            );
        }
        Ok(out)
    })
}

fn nz(name: &str, fam: &FamilySpec, n_src: u32, d_ext: u32, mode: Mode, cap_bits: u32) -> Result<Vec<Record>> {
    let ext = ExtractorSpec::new(n_src, d_ext, fam.s, n_src)?;
    map_instances(mode, fam.count, |i| {
        let f = gen_instance(fam, i)?;
        let g = Nz::new(ext.clone(), f.n())?;
        let declared = 3.0 * f.n() as f64 * AlphabetReduction::conditioned_error(&ext, f.w())?;
        let measured = (brute_generator_expectation(&g, &f, cap_bits)? - f.exact_expectation()).abs();
        Ok(vec![Record::new(i, class_name(fam.class), &format!("{name}/src{n_src}"), declared, measured)
            .shape(f.n(), f.w(), f.s())
            .seeds(g.seed_bits(), 1.0)])
    })
}

/// Inputs `x` with `f(R_i(x)) ≠ reduced_robp(f, i)(x)`, over every index and inner input.
pub fn functional_mismatches(r: &dyn Reduction, f: &Robp, cap_bits: u32) -> Result<u64> {
    let t = r.target();
    let inner_bits = t.n as u32 * t.s;
    let bits = r.index_bits() + inner_bits;
    if bits > cap_bits {
        return Err(Error::CapExceeded { bits, cap: cap_bits });
    }
    let mask = (1u64 << t.s) - 1;
    let mut bad = 0;
    let mut inner = vec![0u64; t.n];
    for i in 0..1u64 << r.index_bits() {
        let g = r.reduced_robp(f, i)?;
        for x in 0..1u64 << inner_bits {
            for (j, v) in inner.iter_mut().enumerate() {
                *v = (x >> ((t.n - 1 - j) as u32 * t.s)) & mask;
            }
            if f.evaluate(&r.reduce(i, &inner)?)? != g.evaluate(&inner)? {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

fn reduction_records(
    name: &str,
    label: &str,
    i: usize,
    class: &str,
    r: &dyn Reduction,
    f: &Robp,
    cap_bits: u32,
) -> Result<Vec<Record>> {
    let t = r.target();
    let bits = r.index_bits() + t.n as u32 * t.s;
    let wb = rat_to_f64(&r.weight_bound());
    let err = measured_reduction_error(r, f, cap_bits)?;
    let bad = functional_mismatches(r, f, cap_bits)?;
    Ok(vec![
        Record::new(i, class, &format!("{name}/{label}/error"), rat_to_f64(&r.declared_error()), err)
            .shape(f.n(), f.w(), f.s())
            .seeds(bits, wb),
        Record::new(i, class, &format!("{name}/{label}/functional"), 0.0, bad as f64).shape(f.n(), f.w(), f.s()).seeds(bits, wb),
    ])
}

/// Extractor used by the NZ base of the calibrated length stage.
fn small_nz(n: usize, s: u32) -> GeneratorDescriptor {
    GeneratorDescriptor::Nz { ext: ExtractorParams { n_src: 6, d_ext: 1, m_out: s, k_min: 6 }, n }
}

fn reductions(name: &str, fam: &FamilySpec, mode: Mode, cap_bits: u32) -> Result<Vec<Record>> {
    let perm_fam = FamilySpec { class: RobpClass::Permutation, ..fam.clone() };
    map_instances(mode, fam.count, |i| {
        let f = gen_instance(fam, i)?;
        let (n, s, w) = (f.n(), f.s(), f.w());
        let class = class_name(fam.class);
        let mut out = Vec::new();
        let id = IdentityReduction { shape: Shape::of(&f) };
        out.extend(reduction_records(name, "identity", i, class, &id, &f, cap_bits)?);
        let tr: Arc<dyn Generator> = Arc::new(TrueRandom::new(n, s)?);
        for k in [1, 3] {
            let r = length_reduction(tr.clone(), n, k, 0.0)?;
            out.extend(reduction_records(name, &format!("length-true-random-k{k}"), i, class, &r, &f, cap_bits)?);
        }
        let stage = Stage::Length { k: 1, generator: small_nz(n, s), epsilon: None };
        let len_nz = main_reduction_pipeline(Shape::of(&f), w, &[stage], std::slice::from_ref(&f), cap_bits)?.reduction;
        out.extend(reduction_records(name, "length-nz", i, class, &*len_nz, &f, cap_bits)?);
        let alpha = AlphabetReduction::new(ExtractorSpec::new(4, 2, s, 4)?, n, w, None)?;
        out.extend(reduction_records(name, "alphabet", i, class, &alpha, &f, cap_bits)?);
        let t = len_nz.target();
        let inner: Arc<dyn Reduction> = Arc::new(AlphabetReduction::new(ExtractorSpec::new(t.s, 2, t.s, t.s)?, t.n, w, None)?);
        let comp = compose(len_nz.clone(), inner.clone())?;
        out.extend(reduction_records(name, "composite", i, class, &comp, &f, cap_bits)?);
        let meta_ok = comp.index_bits() == len_nz.index_bits() + inner.index_bits()
            && comp.weight_bound() == len_nz.weight_bound() * inner.weight_bound()
            && comp.declared_error() == len_nz.declared_error() + len_nz.weight_bound() * inner.declared_error()
            && chain_error(&comp.stages()) == comp.declared_error();
        out.push(Record::new(i, class, &format!("{name}/composite/metadata"), 0.0, if meta_ok { 0.0 } else { 1.0 }).shape(n, w, s));
        let g = gen_instance(&perm_fam, i)?;
        if n.is_power_of_two() && n >= 4 {
            let sched = PermSchedule { levels: vec![PermLevel { k: 1, lambda: 0.5, max_degree_bits: 8, tau: None }] };
            let chain = perm_chain(n, s, &sched, std::slice::from_ref(&g), cap_bits)?;
            out.extend(reduction_records(name, "perm-level", i, "permutation", &*chain.reduction, &g, cap_bits)?);
        }
        Ok(out)
    })
}

fn transform(name: &str, fam: &FamilySpec, mode: Mode) -> Result<Vec<Record>> {
    map_instances(mode, fam.count, |i| {
        let f = gen_instance(fam, i)?;
        let g = f.regular_to_permutation_binary()?;
        let ok = g.classify() == RobpClass::Permutation && g.exact_expectation_rational() == f.exact_expectation_rational();
        Ok(vec![Record::new(i, class_name(fam.class), name, 0.0, if ok { 0.0 } else { 1.0 }).shape(f.n(), f.w(), f.s())])
    })
}

fn derand_walk(name: &str, fam: &FamilySpec, lambda: f64, mdb: u32, k: usize, mode: Mode) -> Result<Vec<Record>> {
    let levels = log2_exact(fam.n)?;
    let walk = DerandWalk::for_levels(fam.s, levels, lambda, mdb)?;
    let bound = 11.0 * walk.lambda_max()? * levels as f64;
    let schedule = [DerandLevel { k, lambda, max_degree_bits: mdb, tau: None }];
    map_instances(mode, fam.count, |i| {
        let f = gen_instance(fam, i)?.labeled()?;
        let (n, w, s) = (f.n(), f.w(), f.s());
        let class = class_name(fam.class);
        let (mut not_bijective, mut not_ds, mut sv) = (0usize, 0usize, 0.0f64);
        let mut len = 1;
        while len <= n {
            for a in (0..n).step_by(len) {
                if walk.bigraph(&f, a, a + len)?.check().is_err() {
                    not_bijective += 1;
                }
                let m = walk.matrix_rational(&f, a, a + len)?;
                if !m.is_doubly_stochastic() {
                    not_ds += 1;
                }
                if len >= 2 {
                    sv = sv.max(sv_approx_error(&m.to_f64(), &f.segment_product(a, a + len))?);
                }
            }
            len *= 2;
        }
        let seeds = walk.seed_bits();
        let est = regular_estimator(&f, &schedule)?;
        Ok(vec![
            Record::new(i, class, &format!("{name}/bijective"), 0.0, not_bijective as f64).shape(n, w, s).seeds(seeds, 1.0),
            Record::new(i, class, &format!("{name}/doubly-stochastic"), 0.0, not_ds as f64).shape(n, w, s).seeds(seeds, 1.0),
            Record::new(i, class, &format!("{name}/sv"), bound, sv).shape(n, w, s).seeds(seeds, 1.0),
            Record::new(i, class, &format!("{name}/estimator"), est.declared, (est.value - f.exact_expectation()).abs())
                .shape(n, w, s)
                .seeds(est.seed_bits, est.levels.iter().map(|l| l.terms as f64).product()),
        ])
    })
}

fn sampler(name: &str, fam: &FamilySpec, k: usize, mode: Mode, cap_bits: u32) -> Result<Vec<Record>> {
    let shape = Shape { n: fam.n, s: fam.s };
    let base: Arc<dyn WeightedGenerator> = Arc::new(Wprg::from_reduction(Arc::new(IdentityReduction { shape }), None, 0.0)?);
    let q = base.seed_bits();
    let samp = SamplerSpec::from_graph(Expander::complete(1u64 << q), 0.5, 0.5)?;
    let (r, p) = (samp.r, samp.p);
    let g = Arc::new(sampler_amplified_wprg(base, samp, k, fam.n, fam.w)?);
    let mut recs = map_instances(mode, fam.count, |i| {
        let f = gen_instance(fam, i)?;
        let est = g.estimate_exhaustive(&f, cap_bits)?;
        Ok(vec![Record::new(i, class_name(fam.class), name, g.declared_error(), (est - f.exact_expectation()).abs())
            .shape(f.n(), f.w(), f.s())
            .seeds(g.seed_bits(), g.weight_bound())])
    })?;
    let want = r + k as u32 * p;
    let diff = (g.sampler_seed_bits() as f64 - want as f64).abs();
    recs.push(Record::new(fam.count, class_name(fam.class), &format!("{name}/seed-length"), 0.0, diff).seeds(g.sampler_seed_bits(), 1.0));
    Ok(recs)
}
