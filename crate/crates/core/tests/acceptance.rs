//! Runs the acceptance suite and prints one pass/fail line per criterion.

use std::time::{Duration, Instant};
use wprg::harness::{acceptance_suite, run_experiment, to_csv, to_json, ExperimentReport, Mode, Report};

struct Criterion {
    title: &'static str,
    prefixes: &'static [&'static str],
    limit: Option<Duration>,
}

const fn crit(title: &'static str, prefixes: &'static [&'static str], secs: u64) -> Criterion {
    Criterion { title, prefixes, limit: if secs == 0 { None } else { Some(Duration::from_secs(secs)) } }
}

const CRITERIA: [Criterion; 11] = [
    crit("richardson envelope and block formula", &["richardson"], 60),
    crit("binary-splitting recursion equivalence", &["binary-splitting"], 10),
    crit("inw sv-fooling", &["inw-sv-"], 300),
    crit("binary-splitting entrywise envelope", &["bs-envelope-"], 0),
    crit("one-level nz", &["nz-"], 120),
    crit("reduction calculus", &["reductions"], 0),
    crit("end-to-end wprg", &["end-to-end"], 600),
    crit("permutation pipeline", &["perm-"], 0),
    crit("regular to permutation transform", &["transform"], 60),
    crit("derandomized walk", &["derand-walk-"], 600),
    crit("sampler amplification", &["sampler"], 0),
];

fn main() {
    let cfg = acceptance_suite();
    let mut reports: Vec<(ExperimentReport, Duration)> = Vec::new();
    for e in &cfg.experiments {
        let t = Instant::now();
        let r = run_experiment(e, cfg.mode, cfg.cap_bits).unwrap_or_else(|err| panic!("{}: {err}", e.name()));
        reports.push((r, t.elapsed()));
    }

    let mut all = true;
    for (i, c) in CRITERIA.iter().enumerate() {
        let mine: Vec<&(ExperimentReport, Duration)> =
            reports.iter().filter(|(r, _)| c.prefixes.iter().any(|p| r.name.starts_with(p))).collect();
        let records: usize = mine.iter().map(|(r, _)| r.summary.records).sum();
        let violations: usize = mine.iter().map(|(r, _)| r.summary.violations).sum();
        let max_ratio = mine.iter().map(|(r, _)| r.summary.max_ratio).fold(0.0, f64::max);
        let elapsed: Duration = mine.iter().map(|(_, d)| *d).sum();
        let in_time = c.limit.map_or(true, |l| elapsed <= l);
        let ok = !mine.is_empty() && records > 0 && mine.iter().all(|(r, _)| r.summary.pass) && in_time;
        all &= ok;
        println!(
            "{:>2} {} {:<40} records={records} violations={violations} max_ratio={max_ratio:.3e} time={:.1}s{}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            c.title,
            elapsed.as_secs_f64(),
            c.limit.map_or(String::new(), |l| format!(" limit={}s", l.as_secs())),
        );
    }

    let first = Report::new(reports.into_iter().map(|(r, _)| r).collect());
    let second = Report::new(
        cfg.experiments.iter().map(|e| run_experiment(e, Mode::Reproducible, cfg.cap_bits).unwrap()).collect(),
    );
    let same = to_csv(&first.records().cloned().collect::<Vec<_>>()).unwrap()
        == to_csv(&second.records().cloned().collect::<Vec<_>>()).unwrap()
        && to_json(&first).unwrap() == to_json(&second).unwrap();
    all &= same;
    println!("12 {} {:<40} records={}", if same { "PASS" } else { "FAIL" }, "byte-identical reproducible reports", first.summary.records);

    if !all {
        eprintln!("acceptance criteria failed");
        std::process::exit(1);
    }
}
