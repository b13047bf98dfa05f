use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use wprg::harness::{
    emit_report, gen_instances, load_schedule, parse_csv, parse_json, quick_check, run_suite, to_csv, Experiment, FamilySpec,
    Format, Mode, Record, Report, Schedule, SuiteConfig, Summary,
};
use wprg::perm::{multi_accept_estimate, perm_chain, perm_wprg, PermSchedule};
use wprg::randomness::{lambda_measure, Expander};
use wprg::regular::regular_estimator;
use wprg::robp::{read_robp, write_robp, Robp};
use wprg::wpr::{main_reduction_pipeline, EstimateMode, Shape, WeightedGenerator, Wprg};

#[derive(Parser)]
#[command(name = "wprg", version, about = "Weighted pseudorandom generators for read-once branching programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Reproducible,
    Fast,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RunOpts {
    /// Directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Enumeration cap, as `2^k` or a power of two.
    #[arg(long, value_parser = parse_cap)]
    cap_seeds: Option<u32>,
    /// Report format; both are written when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Writes the instances of a family config as ROBP files.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs a suite config, or estimates one program with a schedule.
    Estimate {
        #[arg(long, conflicts_with_all = ["robp", "schedule"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "schedule")]
        robp: Option<PathBuf>,
        #[arg(long, requires = "robp")]
        schedule: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Estimates a regular program with a derandomized-walk schedule.
    DerandRegular {
        #[arg(long)]
        robp: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Runs one kind of verification check, from a config or with built-in parameters.
    Verify {
        #[arg(value_parser = ["richardson", "binary-splitting", "inw-sv", "bs-envelope", "nz", "reductions", "sampler", "transform", "derand-walk"])]
        kind: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Prints the measured second singular value of an expander.
    LambdaMeasure {
        /// Expander as JSON, e.g. `{"kind":"mgg","m":4}`.
        #[arg(long, conflicts_with_all = ["mgg", "complete"])]
        graph: Option<String>,
        #[arg(long, conflicts_with = "complete")]
        mgg: Option<u64>,
        #[arg(long)]
        complete: Option<u64>,
        #[arg(long, default_value_t = 1)]
        power: u32,
    },
    /// Summarizes a report file, optionally converting it.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
}

fn parse_cap(s: &str) -> Result<u32, String> {
    if let Some(k) = s.strip_prefix("2^") {
        return k.parse().map_err(|e| format!("bad exponent: {e}"));
    }
    let v: u64 = s.parse().map_err(|e| format!("bad cap: {e}"))?;
    if !v.is_power_of_two() {
        return Err(format!("cap {v} is not a power of two"));
    }
    Ok(v.trailing_zeros())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_family(path: &Path) -> Result<FamilySpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_robp(path: &Path) -> Result<Robp> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_robp(&text)?)
}

/// Returns whether every declared bound held.
fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Gen { config, out } => {
            let fam = read_family(&config)?;
            std::fs::create_dir_all(&out)?;
            for (i, f) in gen_instances(&fam)?.iter().enumerate() {
                std::fs::write(out.join(format!("instance_{i:04}.robp")), write_robp(f))?;
            }
            println!("wrote {} instances to {}", fam.count, out.display());
            Ok(true)
        }
        Cmd::Estimate { config: Some(config), opts, .. } => {
            let cfg = SuiteConfig::load(&config)?;
            run_and_emit(cfg, &opts)
        }
        Cmd::Estimate { robp: Some(robp), schedule: Some(schedule), opts, .. } => {
            let f = load_robp(&robp)?;
            let sched = load_schedule(&schedule)?;
            estimate_one(&f, &sched, cap_of(&opts))
        }
        Cmd::Estimate { .. } => bail!("estimate needs --config or --robp with --schedule"),
        Cmd::DerandRegular { robp, schedule } => {
            let f = load_robp(&robp)?;
            match load_schedule(&schedule)? {
                sched @ Schedule::Regular { .. } => estimate_one(&f, &sched, wprg::harness::DEFAULT_CAP_BITS),
                _ => bail!("{} is not a regular schedule", schedule.display()),
            }
        }
        Cmd::Verify { kind, config, opts } => {
            let cfg = match config {
                Some(p) => {
                    let mut cfg = SuiteConfig::load(&p)?;
                    cfg.experiments.retain(|e| matches!(e, Experiment::Verify { check, .. } if check.kind() == kind));
                    if cfg.experiments.is_empty() {
                        bail!("{} has no {kind} checks", p.display());
                    }
                    cfg
                }
                None => SuiteConfig::new(vec![quick_check(&kind).ok_or_else(|| anyhow!("unknown check {kind}"))?]),
            };
            run_and_emit(cfg, &opts)
        }
        Cmd::LambdaMeasure { graph, mgg, complete, power } => {
            let h = match (graph, mgg, complete) {
                (Some(g), _, _) => serde_json::from_str(&g).context("parsing --graph")?,
                (_, Some(m), _) => Expander::mgg(m),
                (_, _, Some(d)) => Expander::complete(d),
                _ => bail!("give --graph, --mgg or --complete"),
            };
            let h = if power > 1 { h.power(power) } else { h };
            h.validate()?;
            println!("vertices {} degree {} lambda {:.6}", h.vertices(), h.degree(), lambda_measure(&h)?);
            Ok(true)
        }
        Cmd::Report { input, format } => {
            let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let records: Vec<Record> = if input.extension().is_some_and(|e| e == "csv") {
                parse_csv(&text)?
            } else {
                parse_json(&text)?.records().cloned().collect()
            };
            let summary = Summary::of(&records);
            match format {
                Some(FormatArg::Csv) => print!("{}", to_csv(&records)?),
                Some(FormatArg::Json) => println!("{}", serde_json::to_string_pretty(&records)?),
                None => print_summary("report", &summary),
            }
            Ok(summary.pass)
        }
    }
}

fn cap_of(opts: &RunOpts) -> u32 {
    opts.cap_seeds.unwrap_or(wprg::harness::DEFAULT_CAP_BITS)
}

fn print_summary(name: &str, s: &Summary) {
    println!(
        "{:<24} {} records={} violations={} max_ratio={:.3e}",
        name,
        if s.pass { "PASS" } else { "FAIL" },
        s.records,
        s.violations,
        s.max_ratio
    );
}

fn run_and_emit(mut cfg: SuiteConfig, opts: &RunOpts) -> Result<bool> {
    if let Some(m) = opts.mode {
        cfg.mode = match m {
            ModeArg::Reproducible => Mode::Reproducible,
            ModeArg::Fast => Mode::Fast,
        };
    }
    if let Some(c) = opts.cap_seeds {
        cfg.cap_bits = c;
    }
    let report: Report = run_suite(&cfg)?;
    for e in &report.experiments {
        print_summary(&e.name, &e.summary);
    }
    print_summary("total", &report.summary);
    if let Some(dir) = opts.out.as_ref().or(cfg.out.as_ref()) {
        let formats = match opts.format {
            Some(FormatArg::Csv) => vec![Format::Csv],
            Some(FormatArg::Json) => vec![Format::Json],
            None => vec![Format::Csv, Format::Json],
        };
        for p in emit_report(&report, dir, &formats)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(report.summary.pass)
}

fn estimate_one(f: &Robp, sched: &Schedule, cap_bits: u32) -> Result<bool> {
    let exact = f.exact_expectation();
    let (value, declared, seed_bits) = match sched {
        Schedule::Main { stages } => {
            let pipe = main_reduction_pipeline(Shape::of(f), f.w(), stages, std::slice::from_ref(f), cap_bits)?;
            let g = Wprg::from_reduction(pipe.reduction, None, 0.0)?;
            (g.estimate(f, EstimateMode::Structured { cap_bits })?.value, g.declared_error(), g.seed_bits())
        }
        Schedule::Perm { levels, multi_accept } => {
            let ps = PermSchedule { levels: levels.clone() };
            if *multi_accept {
                let m = multi_accept_estimate(f, &ps, cap_bits)?;
                (m.value, m.declared, m.seed_bits)
            } else {
                let chain = perm_chain(f.n(), f.s(), &ps, std::slice::from_ref(f), cap_bits)?;
                let g = perm_wprg(&chain)?;
                (g.estimate(f, EstimateMode::Structured { cap_bits })?.value, g.declared_error(), g.seed_bits())
            }
        }
        Schedule::Regular { levels } => {
            let e = regular_estimator(f, levels)?;
            (e.value, e.declared, e.seed_bits)
        }
    };
    let err = (value - exact).abs();
    let ok = err <= declared + wprg::harness::SLACK;
    println!(
        "{}",
        serde_json::json!({
            "estimate": value,
            "exact": exact,
            "measured_err": err,
            "declared_eps": declared,
            "seed_bits": seed_bits,
            "pass": ok,
        })
    );
    Ok(ok)
}
