//! The `.cra` text format.
//!
//! ```text
//! cra <name>
//! props: <ap1> <ap2> ...
//! states: <u0> <u1> ...
//! initial: <u0>
//! final: <f1> ...
//! counters: <n>
//! T <src> | <guard> | <zero test, e.g. 10> | <deltas, e.g. +1,0> | <reward> | <dst>
//! ```
//!
//! A zero-test digit `1` requires the counter to be nonzero, `0` requires zero.

use std::fmt::Write as _;
use std::path::Path;

use crate::pdrm::format::split_fields;

use super::{Cra, CraError, CraSpec, RawCraTransition};

fn parse_err(line: usize, message: impl Into<String>) -> CraError {
    CraError::Parse {
        line,
        message: message.into(),
    }
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub(crate) fn zero_test_text(z: &[bool]) -> String {
    z.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn deltas_text(d: &[i64]) -> String {
    d.iter()
        .map(|&x| if x > 0 { format!("+{x}") } else { x.to_string() })
        .collect::<Vec<_>>()
        .join(",")
}

impl CraSpec {
    pub fn parse(text: &str) -> Result<CraSpec, CraError> {
        let mut spec = CraSpec::default();
        let (mut seen_header, mut seen_initial, mut seen_counters) = (false, false, false);
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("T ") {
                spec.transitions.push(parse_transition(rest, line_no)?);
                continue;
            }
            if let Some(rest) = line.strip_prefix("cra") {
                if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
                    return Err(parse_err(line_no, format!("unrecognised line `{line}`")));
                }
                spec.name = rest.trim().to_string();
                seen_header = true;
                continue;
            }
            let Some((key, value)) = line.split_once(':') else {
                return Err(parse_err(line_no, format!("unrecognised line `{line}`")));
            };
            let value = value.trim();
            match key.trim() {
                "props" => spec.props = words(value),
                "states" => spec.states = words(value),
                "final" => spec.finals = words(value),
                "initial" => {
                    spec.initial = value.to_string();
                    seen_initial = true;
                }
                "counters" => {
                    spec.n_counters = value
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad counter count `{value}`")))?;
                    seen_counters = true;
                }
                other => return Err(parse_err(line_no, format!("unknown key `{other}`"))),
            }
        }
        if !seen_header {
            return Err(parse_err(0, "missing `cra <name>` header"));
        }
        if !seen_initial {
            return Err(parse_err(0, "missing `initial:` line"));
        }
        if !seen_counters {
            return Err(parse_err(0, "missing `counters:` line"));
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cra {}", self.name);
        let _ = writeln!(out, "props: {}", self.props.join(" "));
        let _ = writeln!(out, "states: {}", self.states.join(" "));
        let _ = writeln!(out, "initial: {}", self.initial);
        let _ = writeln!(out, "final: {}", self.finals.join(" "));
        let _ = writeln!(out, "counters: {}", self.n_counters);
        for t in &self.transitions {
            let _ = writeln!(
                out,
                "T {} | {} | {} | {} | {} | {}",
                t.source,
                t.guard,
                zero_test_text(&t.zero_test),
                deltas_text(&t.deltas),
                t.reward,
                t.target
            );
        }
        out
    }
}

fn parse_transition(rest: &str, line: usize) -> Result<RawCraTransition, CraError> {
    let fields = split_fields(rest).ok_or_else(|| parse_err(line, "expected 6 `|`-separated fields"))?;
    if fields[1].is_empty() {
        return Err(parse_err(line, "empty guard"));
    }
    let zero_test = fields[2]
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(parse_err(line, format!("bad zero test `{}`", fields[2]))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let deltas = fields[3]
        .split(',')
        .map(|d| {
            let d = d.trim();
            d.strip_prefix('+')
                .unwrap_or(d)
                .parse::<i64>()
                .map_err(|_| parse_err(line, format!("bad delta `{d}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reward: f64 = fields[4]
        .parse()
        .map_err(|_| parse_err(line, format!("bad reward `{}`", fields[4])))?;
    if !reward.is_finite() {
        return Err(parse_err(line, "reward must be finite"));
    }
    Ok(RawCraTransition {
        source: fields[0].to_string(),
        guard: fields[1].to_string(),
        zero_test,
        deltas,
        reward,
        target: fields[5].to_string(),
        line,
    })
}

impl Cra {
    pub fn from_text(text: &str) -> Result<Cra, CraError> {
        CraSpec::parse(text)?.validate()
    }

    pub fn from_file(path: &Path) -> Result<Cra, CraError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| parse_err(0, format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        self.to_spec().to_text()
    }
}
