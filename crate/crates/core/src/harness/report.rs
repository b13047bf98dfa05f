//! Per-instance records, summaries and their CSV/JSON encodings.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Absolute slack for floating-point rounding when comparing against a declared bound.
pub const SLACK: f64 = 1e-12;

pub const CSV_HEADER: [&str; 12] = [
    "instance_id",
    "class",
    "n",
    "w",
    "s",
    "pipeline",
    "declared_eps",
    "measured_err",
    "ratio",
    "seed_bits",
    "weight_bound",
    "wall_ms",
];

/// Finite values as numbers, the rest as `"inf"`, `"-inf"` or `"NaN"`.
mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub instance_id: usize,
    pub class: String,
    pub n: usize,
    pub w: usize,
    pub s: u32,
    pub pipeline: String,
    #[serde(with = "float")]
    pub declared_eps: f64,
    #[serde(with = "float")]
    pub measured_err: f64,
    #[serde(with = "float")]
    pub ratio: f64,
    pub seed_bits: u32,
    #[serde(with = "float")]
    pub weight_bound: f64,
    pub wall_ms: u64,
}

impl Record {
    /// A record with `ratio` filled in and the remaining numeric fields zero.
    pub fn new(instance_id: usize, class: &str, pipeline: &str, declared: f64, measured: f64) -> Self {
        Record {
            instance_id,
            class: class.into(),
            n: 0,
            w: 0,
            s: 0,
            pipeline: pipeline.into(),
            declared_eps: declared,
            measured_err: measured,
            ratio: ratio(measured, declared),
            seed_bits: 0,
            weight_bound: 1.0,
            wall_ms: 0,
        }
    }

    pub fn shape(mut self, n: usize, w: usize, s: u32) -> Self {
        (self.n, self.w, self.s) = (n, w, s);
        self
    }

    pub fn seeds(mut self, seed_bits: u32, weight_bound: f64) -> Self {
        (self.seed_bits, self.weight_bound) = (seed_bits, weight_bound);
        self
    }

    pub fn passed(&self) -> bool {
        self.measured_err <= self.declared_eps + SLACK
    }
}

/// `measured / declared`, with `0/0 = 0`.
pub fn ratio(measured: f64, declared: f64) -> f64 {
    if measured == 0.0 && declared == 0.0 {
        0.0
    } else {
        measured / declared
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub violations: usize,
    #[serde(with = "float")]
    pub max_ratio: f64,
    pub pass: bool,
}

impl Summary {
    pub fn of<'a>(records: impl IntoIterator<Item = &'a Record>) -> Self {
        let (mut count, mut violations, mut max_ratio) = (0, 0, 0.0f64);
        for r in records {
            count += 1;
            if !r.passed() {
                violations += 1;
            }
            // a NaN ratio sticks
            if !max_ratio.is_nan() && (r.ratio.is_nan() || r.ratio > max_ratio) {
                max_ratio = r.ratio;
            }
        }
        Summary { records: count, violations, max_ratio, pass: violations == 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub records: Vec<Record>,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn new(name: &str, records: Vec<Record>) -> Self {
        let summary = Summary::of(&records);
        ExperimentReport { name: name.into(), records, summary }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiments: Vec<ExperimentReport>,
    pub summary: Summary,
}

impl Report {
    pub fn new(experiments: Vec<ExperimentReport>) -> Self {
        let summary = Summary::of(experiments.iter().flat_map(|e| &e.records));
        Report { experiments, summary }
    }

    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.experiments.iter().flat_map(|e| &e.records)
    }

    pub fn experiment(&self, name: &str) -> Option<&ExperimentReport> {
        self.experiments.iter().find(|e| e.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

pub fn to_csv(records: &[Record]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<Record>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse { line: 1, msg: format!("unexpected header {header:?}") });
    }
    rd.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn to_json(report: &Report) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))
}

pub fn parse_json(text: &str) -> Result<Report> {
    serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, msg: e.to_string() }
}

/// Writes `report.<ext>` for each format into `dir` and returns the paths.
pub fn emit_report(report: &Report, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for f in formats {
        let (name, text) = match f {
            Format::Csv => ("report.csv", to_csv(&report.records().cloned().collect::<Vec<_>>())?),
            Format::Json => ("report.json", to_json(report)?),
        };
        let p = dir.join(name);
        std::fs::write(&p, text)?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let a = Record::new(0, "general", "x", 0.5, 0.25).shape(4, 3, 1).seeds(12, 2.0);
        let b = Record::new(1, "general", "x", 0.0, 1.0);
        let c = Record::new(2, "permutation", "y", f64::NAN, 0.0);
        Report::new(vec![ExperimentReport::new("x", vec![a, b]), ExperimentReport::new("y", vec![c])])
    }

    #[test]
    fn header_is_stable() {
        let csv = to_csv(&[]).unwrap();
        assert_eq!(
            csv.trim_end(),
            "instance_id,class,n,w,s,pipeline,declared_eps,measured_err,ratio,seed_bits,weight_bound,wall_ms"
        );
    }

    #[test]
    fn csv_round_trip_and_field_count() {
        let rep = sample();
        let recs: Vec<Record> = rep.records().cloned().collect();
        let text = to_csv(&recs).unwrap();
        for line in text.lines() {
            assert_eq!(line.split(',').count(), CSV_HEADER.len());
        }
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[..2], recs[..2]);
        assert!(back[2].declared_eps.is_nan());
        assert!(back[1].ratio.is_infinite());
    }

    #[test]
    fn json_round_trip() {
        let rep = sample();
        let back = parse_json(&to_json(&rep).unwrap()).unwrap();
        assert_eq!(back.experiments[0], rep.experiments[0]);
        assert!(!back.summary.pass);
        assert_eq!(back.summary.violations, 2);
    }

    #[test]
    fn summaries() {
        let rep = sample();
        let x = rep.experiment("x").unwrap();
        assert_eq!(x.summary.violations, 1);
        assert!(x.summary.max_ratio.is_infinite());
        assert!(rep.experiment("y").unwrap().summary.max_ratio.is_nan());
        assert!(Report::new(vec![]).summary.pass);
    }
}
