//! Value iteration on explicit products, the top-k sufficiency check and
//! key-space accounting.

mod counting;

pub use counting::{count_full_bound, count_stack_strings, measure_blowup, BlowupReport, BlowupRow};

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::pdrm::Pdrm;
use crate::product::{ExplicitProductMdp, NodeKind, ProductError};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const TIE_TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("non-finite value at state {state}")]
    NonFiniteValue { state: usize },
    #[error("discount must lie in (0, 1), got {0}")]
    BadDiscount(f64),
    #[error("value iteration did not reach the tolerance in {0} sweeps")]
    NotConverged(usize),
    #[error(transparent)]
    Product(#[from] ProductError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueSolution {
    pub values: Vec<f64>,
    /// Actions whose backup is within the tie tolerance of the best one.
    pub optimal_actions: Vec<Vec<usize>>,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-norm residual after each sweep.
    pub residual_history: Vec<f64>,
    pub tie_tolerance: f64,
}

impl ValueSolution {
    /// Expected value of the start distribution, pending start rewards included.
    pub fn initial_value(&self, mdp: &ExplicitProductMdp) -> f64 {
        mdp.initial
            .iter()
            .map(|&(s, p, pending)| p * (pending + self.values[s]))
            .sum()
    }
}

fn backup(mdp: &ExplicitProductMdp, values: &[f64], s: usize, a: usize) -> f64 {
    mdp.row(s, a)
        .iter()
        .map(|&(next, p, r)| p * (r + mdp.gamma * values[next as usize]))
        .sum()
}

/// Synchronous Bellman backups until the sup-norm residual drops below `tol`.
pub fn value_iteration(mdp: &ExplicitProductMdp, tol: f64) -> Result<ValueSolution, AnalysisError> {
    if !(mdp.gamma > 0.0 && mdp.gamma < 1.0) {
        return Err(AnalysisError::BadDiscount(mdp.gamma));
    }
    let n = mdp.n_states();
    for s in 0..n {
        for a in 0..mdp.n_actions {
            if mdp.row(s, a).iter().any(|&(_, p, r)| !p.is_finite() || !r.is_finite()) {
                return Err(AnalysisError::NonFiniteValue { state: s });
            }
        }
    }
    let mut values = vec![0.0; n];
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while residual >= tol {
        if iterations == MAX_ITERATIONS {
            return Err(AnalysisError::NotConverged(iterations));
        }
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|s| {
                (0..mdp.n_actions)
                    .map(|a| backup(mdp, &values, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        if let Some(state) = next.iter().position(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFiniteValue { state });
        }
        residual = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        history.push(residual);
        iterations += 1;
        log::trace!("sweep {iterations}: residual {residual:e}");
    }
    let optimal_actions = (0..n)
        .into_par_iter()
        .map(|s| {
            let q: Vec<f64> = (0..mdp.n_actions).map(|a| backup(mdp, &values, s, a)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..mdp.n_actions)
                .filter(|&a| q[a] >= best - TIE_TOLERANCE)
                .collect()
        })
        .collect();
    Ok(ValueSolution {
        values,
        optimal_actions,
        iterations,
        residual,
        residual_history: history,
        tie_tolerance: TIE_TOLERANCE,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Sufficient,
    Insufficient,
    InconclusiveOverflow,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Sufficient => "sufficient",
            Verdict::Insufficient => "insufficient",
            Verdict::InconclusiveOverflow => "inconclusive-overflow",
        })
    }
}

/// Two equivalent states that disagree. `reference` is the lowest-index
/// member of their group.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub reference: usize,
    pub other: usize,
    pub values: (f64, f64),
    pub actions: (Vec<usize>, Vec<usize>),
}

impl Counterexample {
    pub fn values_differ(&self) -> bool {
        (self.values.0 - self.values.1).abs() > TIE_TOLERANCE
    }

    pub fn actions_differ(&self) -> bool {
        self.actions.0 != self.actions.1
    }

    pub fn describe(&self, mdp: &ExplicitProductMdp, pdrm: &Pdrm) -> String {
        let show = |s: usize| {
            let node = &mdp.nodes[s];
            let config = node.config.as_ref().expect("grouped states have a configuration");
            let stack: Vec<&str> = config.stack_top_first().map(|z| pdrm.symbol_name(z)).collect();
            format!("<s{}, {}, [{}]>", node.env.0, pdrm.state_name(config.state), stack.join(" "))
        };
        format!(
            "{} V={:.6} A={:?}  vs  {} V={:.6} A={:?}",
            show(self.reference),
            self.values.0,
            self.actions.0,
            show(self.other),
            self.values.1,
            self.actions.1
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KStackReport {
    pub k: usize,
    pub verdict: Verdict,
    /// At most `max_listed` disagreements are kept; the counts cover all.
    pub counterexamples: Vec<Counterexample>,
    pub n_counterexamples: usize,
    pub n_value_mismatches: usize,
    pub n_action_mismatches: usize,
    pub n_groups: usize,
    pub n_grouped_states: usize,
    pub n_states: usize,
    pub overflow_reachable: bool,
    pub tie_tolerance: f64,
}

impl fmt::Display for KStackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k = {}: {}", self.k, self.verdict)?;
        writeln!(
            f,
            "{} reachable non-absorbing states in {} groups ({} states enumerated)",
            self.n_grouped_states, self.n_groups, self.n_states
        )?;
        writeln!(
            f,
            "{} disagreeing states: {} on value, {} on optimal actions (tolerance {:e})",
            self.n_counterexamples, self.n_value_mismatches, self.n_action_mismatches, self.tie_tolerance
        )?;
        match self.verdict {
            Verdict::Sufficient => writeln!(f, "top-{} policies can attain the optimal full-stack values", self.k),
            Verdict::Insufficient => writeln!(
                f,
                "the sufficient condition fails; this does not prove top-{} policies are worse",
                self.k
            ),
            Verdict::InconclusiveOverflow => writeln!(f, "the stack cap was hit; raise it to decide"),
        }
    }
}

/// Groups reachable non-absorbing states by environment state, machine state
/// and top `k` symbols, and checks that each group agrees on value and on
/// the set of optimal actions.
pub fn check_k_stack_optimality(sol: &ValueSolution, mdp: &ExplicitProductMdp, k: usize, max_listed: usize) -> KStackReport {
    let mut groups: BTreeMap<(u32, u32, Vec<u16>), usize> = BTreeMap::new();
    let mut report = KStackReport {
        k,
        verdict: Verdict::Sufficient,
        counterexamples: Vec::new(),
        n_counterexamples: 0,
        n_value_mismatches: 0,
        n_action_mismatches: 0,
        n_groups: 0,
        n_grouped_states: 0,
        n_states: mdp.n_states(),
        overflow_reachable: mdp.overflow_reachable(),
        tie_tolerance: sol.tie_tolerance,
    };
    for (s, node) in mdp.nodes.iter().enumerate() {
        if node.kind != NodeKind::Normal {
            continue;
        }
        let config = node.config.as_ref().expect("normal nodes carry a configuration");
        let (state, top) = config.top_k_view(k);
        let key = (node.env.0, state.0, top.iter().map(|z| z.0).collect());
        report.n_grouped_states += 1;
        let reference = *groups.entry(key).or_insert(s);
        if reference == s {
            continue;
        }
        let c = Counterexample {
            reference,
            other: s,
            values: (sol.values[reference], sol.values[s]),
            actions: (sol.optimal_actions[reference].clone(), sol.optimal_actions[s].clone()),
        };
        let (dv, da) = (c.values_differ(), c.actions_differ());
        if !dv && !da {
            continue;
        }
        report.n_counterexamples += 1;
        report.n_value_mismatches += usize::from(dv);
        report.n_action_mismatches += usize::from(da);
        if report.counterexamples.len() < max_listed {
            report.counterexamples.push(c);
        }
    }
    report.n_groups = groups.len();
    report.verdict = if report.overflow_reachable {
        Verdict::InconclusiveOverflow
    } else if report.n_counterexamples == 0 {
        Verdict::Sufficient
    } else {
        Verdict::Insufficient
    };
    report
}
