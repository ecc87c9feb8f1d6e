use crate::pdrm::{Mode, Pdrm, PdrmSpec, RawPop, RawTransition};

use super::{Cra, CraError};

/// Counter unit symbol on the translated stack.
pub const UNIT: &str = "A";
/// Bottom marker; exposed exactly when the counter is zero.
pub const ZERO: &str = "#";

/// Builds a pdRM whose stack holds the counter in unary above `#`.
///
/// A decrement by `m` reads the input into the first of `|m|` helper states,
/// then walks the helpers with silent transitions, each popping `A` if present
/// and leaving `#` in place otherwise. The reward is emitted on the last one.
pub fn translate_cra_to_pdrm(cra: &Cra) -> Result<Pdrm, CraError> {
    if cra.n_counters() != 1 {
        return Err(CraError::MultiCounterUnsupported(cra.n_counters()));
    }
    let taken = |name: &str| cra.state_names().iter().any(|n| n == name);
    let mut helpers = Vec::new();
    let mut transitions = Vec::new();
    for (ti, t) in cra.transitions().iter().enumerate() {
        let source = cra.state_name(t.source).to_string();
        let target = cra.state_name(t.target).to_string();
        let guard = Some(t.guard.display(cra.props()).to_string());
        let top = if t.zero_test[0] { UNIT } else { ZERO };
        let m = t.deltas[0];
        if m >= 0 {
            let mut push = vec![UNIT.to_string(); m as usize];
            push.push(top.to_string());
            transitions.push(RawTransition {
                source,
                guard,
                pop: RawPop::Symbol(top.to_string()),
                push,
                reward: t.reward,
                target,
                line: 0,
            });
            continue;
        }
        let steps = m.unsigned_abs() as usize;
        let names: Vec<String> = (1..=steps)
            .map(|i| {
                let mut name = format!("h_{source}_{ti}_{i}");
                while taken(&name) {
                    name.push('\'');
                }
                name
            })
            .collect();
        transitions.push(RawTransition {
            source,
            guard,
            pop: RawPop::Symbol(top.to_string()),
            push: vec![top.to_string()],
            reward: 0.0,
            target: names[0].clone(),
            line: 0,
        });
        for (i, h) in names.iter().enumerate() {
            let last = i + 1 == steps;
            let next = if last { target.clone() } else { names[i + 1].clone() };
            let reward = if last { t.reward } else { 0.0 };
            transitions.push(RawTransition {
                source: h.clone(),
                guard: None,
                pop: RawPop::Symbol(UNIT.into()),
                push: Vec::new(),
                reward,
                target: next.clone(),
                line: 0,
            });
            transitions.push(RawTransition {
                source: h.clone(),
                guard: None,
                pop: RawPop::Symbol(ZERO.into()),
                push: vec![ZERO.into()],
                reward,
                target: next,
                line: 0,
            });
        }
        helpers.extend(names);
    }
    let n_working = cra.n_working_states();
    let spec = PdrmSpec {
        name: format!("{}-translated", cra.name()),
        props: cra.props().to_vec(),
        states: cra.state_names()[..n_working]
            .iter()
            .cloned()
            .chain(helpers)
            .collect(),
        initial: cra.state_name(cra.initial_state()).to_string(),
        finals: cra.state_names()[n_working..].to_vec(),
        stack: vec![UNIT.into(), ZERO.into()],
        bottom: ZERO.into(),
        mode: Mode::Lenient,
        transitions,
    };
    spec.validate().map_err(CraError::Translation)
}
