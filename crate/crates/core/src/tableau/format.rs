//! Plain-text tableau exchange format.
//!
//! ```text
//! # two-stage Gauss-Legendre
//! s = 2
//! p = 4
//! a.1 = 2.5000000000000000e-1 -3.8675134594812866e-2
//! a.2 = 5.3867513459481287e-1 2.5000000000000000e-1
//! b = 5.0000000000000000e-1 5.0000000000000000e-1
//! c = 2.1132486540518713e-1 7.8867513459481287e-1
//! ```
//!
//! Rows of `alpha` are numbered from 1. Values are written with 17
//! significant digits so that writing and re-reading is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::ButcherTableau;
use crate::error::{Error, Result};

pub fn write_tableau(t: &ButcherTableau) -> String {
    let mut out = String::new();
    let row = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.16e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(out, "s = {}", t.stages()).unwrap();
    writeln!(out, "p = {}", t.order()).unwrap();
    for (i, r) in t.rows().iter().enumerate() {
        writeln!(out, "a.{} = {}", i + 1, row(r)).unwrap();
    }
    writeln!(out, "b = {}", row(t.b())).unwrap();
    writeln!(out, "c = {}", row(t.c())).unwrap();
    out
}

pub fn parse_tableau(text: &str) -> Result<ButcherTableau> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, "expected `key = value`"))?;
        let key = key.trim().to_string();
        if entries.contains_key(&key) {
            return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
        }
        entries.insert(key, (line_no, value.trim().to_string()));
    }

    let mut take = |key: &str| -> Result<(usize, String)> {
        entries
            .remove(key)
            .ok_or_else(|| Error::parse(0, format!("missing key `{key}`")))
    };
    let (line, s_text) = take("s")?;
    let s: usize = s_text
        .parse()
        .map_err(|_| Error::parse(line, "`s` must be a positive integer"))?;
    if s == 0 {
        return Err(Error::parse(line, "`s` must be positive"));
    }
    let (line, p_text) = take("p")?;
    let p: usize = p_text
        .parse()
        .map_err(|_| Error::parse(line, "`p` must be a non-negative integer"))?;

    let numbers = |line: usize, key: &str, text: &str| -> Result<Vec<f64>> {
        let values = text
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("`{key}`: bad number `{v}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != s {
            return Err(Error::parse(
                line,
                format!("`{key}` has {} entries, expected {s}", values.len()),
            ));
        }
        Ok(values)
    };

    let mut a = Vec::with_capacity(s);
    for i in 1..=s {
        let key = format!("a.{i}");
        let (line, text) = take(&key)?;
        a.push(numbers(line, &key, &text)?);
    }
    let (line, text) = take("b")?;
    let b = numbers(line, "b", &text)?;
    let (line, text) = take("c")?;
    let c = numbers(line, "c", &text)?;

    if let Some((key, (line, _))) = entries.into_iter().next() {
        return Err(Error::parse(line, format!("unknown key `{key}`")));
    }
    ButcherTableau::new(a, b, c, p)
}
