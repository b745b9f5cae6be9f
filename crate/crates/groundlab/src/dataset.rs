//! Newline-delimited JSON persistence of grounding datasets. Every number
//! is written with 17 significant digits.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use groundlab_core::agents::ActionIndex;
use groundlab_core::gat::{JointInput, Source, TransitionRecord};
use serde::Deserialize;

use crate::error::{Error, Result};

fn push_numbers(out: &mut String, key: &str, values: &[f64]) {
    let _ = write!(out, "\"{key}\":[");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push(']');
}

/// One record as a single JSON line (no trailing newline).
pub fn record_line(r: &TransitionRecord) -> String {
    let mut s = String::new();
    let _ = write!(s, "{{\"agent\":{},\"t\":{},", r.agent, r.t);
    push_numbers(&mut s, "obs", &r.input.obs);
    s.push(',');
    push_numbers(&mut s, "act", &r.input.act);
    s.push(',');
    push_numbers(&mut s, "mask", &r.input.mask);
    s.push_str(",\"action\":[");
    for (i, a) in r.actions.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{}", a.index());
    }
    s.push_str("],");
    push_numbers(&mut s, "next_obs", &r.next_obs);
    let _ = write!(s, ",\"source\":\"{}\"}}", r.source.name());
    s
}

pub fn write<'a, W: Write>(
    mut w: W,
    records: impl IntoIterator<Item = &'a TransitionRecord>,
) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", record_line(r))?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    agent: usize,
    t: u64,
    obs: Vec<f64>,
    act: Vec<f64>,
    mask: Vec<f64>,
    action: Vec<usize>,
    next_obs: Vec<f64>,
    source: Source,
}

pub fn read<R: BufRead>(r: R) -> Result<Vec<TransitionRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Config(format!("dataset line {}: {e}", n + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("dataset line {}: {e}", n + 1)))?;
        let actions = l
            .action
            .iter()
            .map(|&a| {
                ActionIndex::new(a)
                    .ok_or_else(|| Error::Config(format!("dataset line {}: action {a}", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(TransitionRecord {
            agent: l.agent,
            t: l.t,
            input: JointInput {
                obs: l.obs,
                act: l.act,
                mask: l.mask,
            },
            actions,
            next_obs: l.next_obs,
            source: l.source,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let r = TransitionRecord {
            agent: 2,
            t: 40,
            input: JointInput {
                obs: vec![0.1, 1.0 / 3.0, 7.0, -0.0],
                act: vec![0.0, 1.0],
                mask: vec![1.0],
            },
            actions: vec![ActionIndex::new(6).unwrap()],
            next_obs: vec![std::f64::consts::PI, 1e-300],
            source: Source::Real,
        };
        let mut buf = Vec::new();
        write(&mut buf, [&r, &r]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("3.3333333333333331e-1"));
        let back = read(buf.as_slice()).unwrap();
        assert_eq!(back, vec![r.clone(), r]);
    }
}
