//! The line-based `.pdrm` text format.
//!
//! ```text
//! pdrm <name>
//! props: <ap1> <ap2> ...
//! states: <u0> <u1> ...
//! initial: <u0>
//! final: <f1> <f2> ...
//! stack: <z1> <z2> ...
//! bottom: <Z>
//! mode: lenient|strict
//! T <src> | <guard or eps> | <pop, eps or *> | <push or eps> | <reward> | <dst>
//! ```
//!
//! Push strings are whitespace-separated symbols, new top first.

use std::fmt::Write as _;
use std::path::Path;

use super::{Mode, Pdrm, PdrmError, PdrmSpec, RawPop, RawTransition};

fn parse_err(line: usize, message: impl Into<String>) -> PdrmError {
    PdrmError::Parse {
        line,
        message: message.into(),
    }
}

/// Splits a transition line into its six fields. Only the guard may contain
/// `|` (disjunction), so the source is split off the left and the four
/// trailing fields off the right.
pub(crate) fn split_fields(rest: &str) -> Option<[&str; 6]> {
    let (source, tail) = rest.split_once('|')?;
    let mut right = tail.rsplitn(5, '|');
    let target = right.next()?;
    let reward = right.next()?;
    let push = right.next()?;
    let pop = right.next()?;
    let guard = right.next()?;
    Some([source, guard, pop, push, reward, target].map(str::trim))
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

impl PdrmSpec {
    pub fn parse(text: &str) -> Result<PdrmSpec, PdrmError> {
        let mut spec = PdrmSpec::default();
        let mut seen_header = false;
        let mut seen_initial = false;
        let mut seen_bottom = false;
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
            if let Some(rest) = line.strip_prefix("pdrm") {
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
                "stack" => spec.stack = words(value),
                "initial" => {
                    spec.initial = value.to_string();
                    seen_initial = true;
                }
                "bottom" => {
                    spec.bottom = value.to_string();
                    seen_bottom = true;
                }
                "mode" => {
                    spec.mode = match value {
                        "lenient" => Mode::Lenient,
                        "strict" => Mode::Strict,
                        other => return Err(parse_err(line_no, format!("unknown mode `{other}`"))),
                    }
                }
                other => return Err(parse_err(line_no, format!("unknown key `{other}`"))),
            }
        }
        if !seen_header {
            return Err(parse_err(0, "missing `pdrm <name>` header"));
        }
        if !seen_initial {
            return Err(parse_err(0, "missing `initial:` line"));
        }
        if !seen_bottom {
            return Err(parse_err(0, "missing `bottom:` line"));
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "pdrm {}", self.name);
        let _ = writeln!(out, "props: {}", self.props.join(" "));
        let _ = writeln!(out, "states: {}", self.states.join(" "));
        let _ = writeln!(out, "initial: {}", self.initial);
        let _ = writeln!(out, "final: {}", self.finals.join(" "));
        let _ = writeln!(out, "stack: {}", self.stack.join(" "));
        let _ = writeln!(out, "bottom: {}", self.bottom);
        let _ = writeln!(
            out,
            "mode: {}",
            match self.mode {
                Mode::Lenient => "lenient",
                Mode::Strict => "strict",
            }
        );
        for t in &self.transitions {
            let pop = match &t.pop {
                RawPop::Epsilon => "eps",
                RawPop::Any => "*",
                RawPop::Symbol(s) => s.as_str(),
            };
            let push = if t.push.is_empty() {
                "eps".to_string()
            } else {
                t.push.join(" ")
            };
            let _ = writeln!(
                out,
                "T {} | {} | {} | {} | {} | {}",
                t.source,
                t.guard.as_deref().unwrap_or("eps"),
                pop,
                push,
                t.reward,
                t.target
            );
        }
        out
    }
}

fn parse_transition(rest: &str, line: usize) -> Result<RawTransition, PdrmError> {
    let fields = split_fields(rest).ok_or_else(|| parse_err(line, "expected 6 `|`-separated fields"))?;
    let guard = match fields[1] {
        "eps" => None,
        "" => return Err(parse_err(line, "empty guard")),
        g => Some(g.to_string()),
    };
    let pop = match fields[2] {
        "eps" => RawPop::Epsilon,
        "*" => RawPop::Any,
        "" => return Err(parse_err(line, "empty pop field")),
        s if s.contains(char::is_whitespace) => {
            return Err(parse_err(line, "a transition pops at most one symbol"))
        }
        s => RawPop::Symbol(s.to_string()),
    };
    let push = match fields[3] {
        "eps" => Vec::new(),
        "" => return Err(parse_err(line, "empty push field (use `eps`)")),
        s => words(s),
    };
    let reward: f64 = fields[4]
        .parse()
        .map_err(|_| parse_err(line, format!("bad reward `{}`", fields[4])))?;
    if !reward.is_finite() {
        return Err(parse_err(line, "reward must be finite"));
    }
    Ok(RawTransition {
        source: fields[0].to_string(),
        guard,
        pop,
        push,
        reward,
        target: fields[5].to_string(),
        line,
    })
}

impl Pdrm {
    /// Parses and validates `.pdrm` text.
    pub fn from_text(text: &str) -> Result<Pdrm, PdrmError> {
        PdrmSpec::parse(text)?.validate()
    }

    pub fn from_file(path: &Path) -> Result<Pdrm, PdrmError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            parse_err(0, format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        self.to_spec().to_text()
    }
}
