//! Plain-text weight format.
//!
//! ```text
//! dense-net v1
//! head linear            (or: head simplex <groups>)
//! sizes 24 64 64 8
//! layer 0
//! <one line per output row: in-size weights>
//! <one line: out-size biases>
//! layer 1
//! ...
//! ```
//!
//! Numbers use 17 significant digits in scientific notation, which makes
//! dump → restore bit-exact.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::net::{DenseNet, OutputHead};
use crate::error::{Error, Result};

const MAGIC: &str = "dense-net v1";

pub fn dump(net: &DenseNet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    match net.head() {
        OutputHead::Linear => out.push_str("head linear\n"),
        OutputHead::Simplex { groups } => {
            let _ = writeln!(out, "head simplex {groups}");
        }
    }
    out.push_str("sizes");
    for s in net.layer_sizes() {
        let _ = write!(out, " {s}");
    }
    out.push('\n');
    for l in 0..net.layer_count() {
        let n_in = net.layer_sizes()[l];
        let _ = writeln!(out, "layer {l}");
        for row in net.weights(l).chunks(n_in) {
            write_row(&mut out, row);
        }
        write_row(&mut out, net.biases(l));
    }
    out
}

fn write_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

struct Lines<'a> {
    inner: core::iter::Enumerate<core::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                Some((i, line)) if !line.trim().is_empty() => return Ok((i + 1, line.trim())),
                Some(_) => continue,
                None => {
                    return Err(Error::Parse {
                        line: 0,
                        message: "unexpected end of input".to_string(),
                    })
                }
            }
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_numbers(line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let values = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| parse_err(line, format!("invalid number {tok:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != expected {
        return Err(parse_err(
            line,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

pub fn restore(text: &str) -> Result<DenseNet> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (n, magic) = lines.next()?;
    if magic != MAGIC {
        return Err(parse_err(n, format!("expected header {MAGIC:?}")));
    }
    let (n, head_line) = lines.next()?;
    let head_parts: Vec<&str> = head_line.split_whitespace().collect();
    let head = match head_parts.as_slice() {
        ["head", "linear"] => OutputHead::Linear,
        ["head", "simplex", g] => OutputHead::Simplex {
            groups: g.parse().map_err(|_| parse_err(n, "invalid group count"))?,
        },
        _ => {
            return Err(parse_err(
                n,
                "expected `head linear` or `head simplex <groups>`",
            ))
        }
    };
    let (n, sizes_line) = lines.next()?;
    let mut parts = sizes_line.split_whitespace();
    if parts.next() != Some("sizes") {
        return Err(parse_err(n, "expected `sizes ...`"));
    }
    let sizes = parts
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| parse_err(n, format!("invalid size {tok:?}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    if sizes.len() < 2 {
        return Err(parse_err(n, "need at least two layer sizes"));
    }
    let mut params = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (n, tag) = lines.next()?;
        if tag != format!("layer {l}") {
            return Err(parse_err(n, format!("expected `layer {l}`")));
        }
        for _ in 0..sizes[l + 1] {
            let (n, row) = lines.next()?;
            params.extend(parse_numbers(n, row, sizes[l])?);
        }
        let (n, row) = lines.next()?;
        params.extend(parse_numbers(n, row, sizes[l + 1])?);
    }
    DenseNet::from_raw(sizes, head, params)
}
