//! Line-oriented text format for programs.
//!
//! ```text
//! <n> <w> <s> <class>
//! start <u>
//! accept <a> <b> ...
//! layer <t>
//! <targets of state 0 for symbols 0..2^s>
//! ...
//! rot <t>                    (optional, one per layer)
//! <incoming labels of state 0>
//! ...
//! ```
//! Lines starting with `#` and blank lines are ignored on input.

use super::{Robp, RobpClass, TwoWayLabeling};
use crate::error::{Error, Result};
use std::fmt::Write;

pub fn write_robp(r: &Robp) -> String {
    let mut out = String::new();
    writeln!(out, "{} {} {} {}", r.n(), r.w(), r.s(), r.classify()).unwrap();
    writeln!(out, "start {}", r.start()).unwrap();
    let acc: Vec<String> = r.accept_set().iter().map(|a| a.to_string()).collect();
    if acc.is_empty() {
        writeln!(out, "accept").unwrap();
    } else {
        writeln!(out, "accept {}", acc.join(" ")).unwrap();
    }
    let row = |vals: &mut dyn Iterator<Item = u64>| vals.map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    for t in 0..r.n() {
        writeln!(out, "layer {t}").unwrap();
        for u in 0..r.w() {
            writeln!(out, "{}", row(&mut (0..r.alphabet()).map(|x| r.step(t, u, x) as u64))).unwrap();
        }
    }
    if let Some(lab) = r.labeling() {
        for t in 0..r.n() {
            writeln!(out, "rot {t}").unwrap();
            for u in 0..r.w() {
                writeln!(out, "{}", row(&mut (0..r.alphabet()).map(|x| lab.incoming(t, u, x)))).unwrap();
            }
        }
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn nums<T: std::str::FromStr>(line: usize, toks: &[&str]) -> Result<Vec<T>> {
    toks.iter()
        .map(|t| t.parse::<T>().map_err(|_| perr(line, format!("bad number {t:?}"))))
        .collect()
}

pub fn read_robp(text: &str) -> Result<Robp> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines.next().ok_or_else(|| perr(0, "empty input"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 {
        return Err(perr(ln, "header must be `n w s class`"));
    }
    let n: usize = h[0].parse().map_err(|_| perr(ln, "bad n"))?;
    let w: usize = h[1].parse().map_err(|_| perr(ln, "bad w"))?;
    let s: u32 = h[2].parse().map_err(|_| perr(ln, "bad s"))?;
    let class: RobpClass = h[3].parse().map_err(|_| perr(ln, "bad class"))?;
    if s == 0 || s > super::MAX_ALPHABET_BITS {
        return Err(perr(ln, "alphabet bits out of range"));
    }
    let d = 1usize << s;

    let mut start = None;
    let mut accept: Option<Vec<usize>> = None;
    let mut trans: Vec<Option<Vec<u32>>> = vec![None; n];
    let mut inc: Vec<Option<Vec<u32>>> = vec![None; n];

    while let Some((ln, l)) = lines.next() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks[0] {
            "start" => {
                let v: Vec<usize> = nums(ln, &toks[1..])?;
                if v.len() != 1 {
                    return Err(perr(ln, "start takes one state"));
                }
                start = Some(v[0]);
            }
            "accept" => accept = Some(nums(ln, &toks[1..])?),
            kind @ ("layer" | "rot") => {
                let t: Vec<usize> = nums(ln, &toks[1..])?;
                if t.len() != 1 || t[0] >= n {
                    return Err(perr(ln, "bad layer index"));
                }
                let mut block = Vec::with_capacity(w * d);
                for _ in 0..w {
                    let (ln2, row) = lines.next().ok_or_else(|| perr(ln, "truncated layer"))?;
                    let vals: Vec<u32> = nums(ln2, &row.split_whitespace().collect::<Vec<_>>())?;
                    if vals.len() != d {
                        return Err(perr(ln2, format!("expected {d} entries")));
                    }
                    block.extend(vals);
                }
                let slot = if kind == "layer" { &mut trans[t[0]] } else { &mut inc[t[0]] };
                if slot.replace(block).is_some() {
                    return Err(perr(ln, "duplicate layer"));
                }
            }
            other => return Err(perr(ln, format!("unknown record {other:?}"))),
        }
    }
    let start = start.ok_or_else(|| perr(0, "missing start record"))?;
    let accept = accept.ok_or_else(|| perr(0, "missing accept record"))?;
    let mut flat = Vec::with_capacity(n * w * d);
    for (t, l) in trans.into_iter().enumerate() {
        flat.extend(l.ok_or_else(|| perr(0, format!("missing layer {t}")))?);
    }
    let mut r = Robp::new(n, w, s, flat, start, &accept)?;
    if r.classify() != class {
        return Err(perr(1, format!("declared class {class} but program is {}", r.classify())));
    }
    let have = inc.iter().filter(|l| l.is_some()).count();
    if have == n {
        let flat: Vec<u32> = inc.into_iter().flatten().flatten().collect();
        r = r.with_labeling(TwoWayLabeling::from_incoming(n, w, s, flat))?;
    } else if have != 0 {
        return Err(perr(0, "rot section must cover every layer"));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let r = Robp::new(2, 2, 1, vec![0, 1, 0, 1, 1, 0, 1, 0], 1, &[0]).unwrap();
        let text = write_robp(&r);
        assert!(text.starts_with("2 2 1 regular\n"));
        let back = read_robp(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(write_robp(&back), text);
        let labeled = r.labeled().unwrap();
        let text = write_robp(&labeled);
        assert!(text.contains("rot 1"));
        let back = read_robp(&text).unwrap();
        assert_eq!(back, labeled);
        assert_eq!(write_robp(&back), text);
    }

    #[test]
    fn rejects_wrong_class_and_garbage() {
        let r = Robp::new(1, 2, 1, vec![0, 0, 0, 0], 0, &[]).unwrap();
        let text = write_robp(&r).replace("general", "regular");
        assert!(read_robp(&text).is_err());
        assert!(read_robp("1 1 1 permutation\nstart 0\naccept 0\nlayer 0\n0\n").is_err());
        assert!(read_robp("").is_err());
    }
}
