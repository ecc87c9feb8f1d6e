use std::collections::{HashMap, VecDeque};
use std::io::{self, Write};

use crate::env::{EnvState, LabeledMdp};
use crate::pdrm::{Configuration, Pdrm};

use super::{Product, ProductError};

pub const DEFAULT_STATE_CAP: usize = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Normal,
    /// The machine reached a final state; absorbing with reward 0.
    Final,
    /// Distinguished absorbing sink for successors over the stack cap.
    Overflow,
    /// First reached at the depth bound and never expanded; absorbing with
    /// reward 0.
    Frontier,
}

impl NodeKind {
    pub fn is_absorbing(self) -> bool {
        self != NodeKind::Normal
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductNode {
    pub env: EnvState,
    /// `None` only for the overflow sink.
    pub config: Option<Configuration>,
    pub kind: NodeKind,
    /// Breadth-first depth of first reach.
    pub depth: usize,
}

/// A bounded unfolding of an environment-pdRM product.
///
/// Transitions are stored per `(state, action)` as sparse
/// `(next, probability, reward)` rows. Absorbing states loop on themselves
/// with reward 0 under every action.
#[derive(Clone, Debug)]
pub struct ExplicitProductMdp {
    pub nodes: Vec<ProductNode>,
    pub n_actions: usize,
    pub gamma: f64,
    /// `(state, probability, pending reward)` per start.
    pub initial: Vec<(usize, f64, f64)>,
    pub horizon: usize,
    pub stack_cap: usize,
    pub overflow: Option<usize>,
    offsets: Vec<usize>,
    rows: Vec<(u32, f64, f64)>,
}

impl ExplicitProductMdp {
    pub fn n_states(&self) -> usize {
        self.nodes.len()
    }

    pub fn row(&self, s: usize, a: usize) -> &[(u32, f64, f64)] {
        let i = s * self.n_actions + a;
        &self.rows[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.nodes[s].kind.is_absorbing()
    }

    /// Whether the overflow sink has any incoming transition.
    pub fn overflow_reachable(&self) -> bool {
        self.overflow.is_some()
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Writes `state, action, next, probability, reward` rows, tab-separated,
    /// after a header line.
    pub fn write_tsv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "state\taction\tnext\tprobability\treward")?;
        for s in 0..self.n_states() {
            for a in 0..self.n_actions {
                for &(next, p, r) in self.row(s, a) {
                    writeln!(out, "{s}\t{a}\t{next}\t{p}\t{r}")?;
                }
            }
        }
        Ok(())
    }
}

/// `n·m·(e+1) + 1` for `n` label reads, where `m` is the longest push and
/// `e` the longest chain of pushing silent transitions; `None` when the
/// silent transitions can cycle.
pub fn default_stack_cap(pdrm: &Pdrm, reads: usize) -> Option<usize> {
    let e = pdrm.max_pushing_epsilon_chain()?;
    Some(reads * pdrm.max_push_len() * (e + 1) + 1)
}

/// Breadth-first closure of the product from every start state, expanding
/// states at depth below `horizon`.
///
/// The start label counts as one read when sizing the default stack cap.
pub fn enumerate_bounded_product(
    env: &dyn LabeledMdp,
    pdrm: &Pdrm,
    horizon: usize,
    gamma: f64,
    stack_cap: Option<usize>,
    state_cap: usize,
) -> Result<ExplicitProductMdp, ProductError> {
    let product = Product::new(env, pdrm);
    let stack_cap = match stack_cap {
        Some(c) => c,
        None => default_stack_cap(pdrm, horizon + 1).ok_or(ProductError::NoStackBound)?,
    };
    let n_actions = env.n_actions();
    let mut nodes: Vec<ProductNode> = Vec::new();
    let mut index: HashMap<(EnvState, Configuration), usize> = HashMap::new();
    let mut queue = VecDeque::new();

    let mut intern = |env_s: EnvState,
                      config: Configuration,
                      depth: usize,
                      nodes: &mut Vec<ProductNode>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize, ProductError> {
        if let Some(&i) = index.get(&(env_s, config.clone())) {
            return Ok(i);
        }
        if nodes.len() >= state_cap {
            return Err(ProductError::ExplosionGuard { cap: state_cap });
        }
        let kind = if config.terminal {
            NodeKind::Final
        } else if depth >= horizon {
            NodeKind::Frontier
        } else {
            NodeKind::Normal
        };
        let i = nodes.len();
        nodes.push(ProductNode {
            env: env_s,
            config: Some(config.clone()),
            kind,
            depth,
        });
        index.insert((env_s, config), i);
        if kind == NodeKind::Normal {
            queue.push_back(i);
        }
        Ok(i)
    };

    let mut initial = Vec::new();
    for (s, label, p) in env.initial_distribution() {
        let (ps, pending) = product.start_from(s, label)?;
        let i = intern(ps.env, ps.config, 0, &mut nodes, &mut queue)?;
        initial.push((i, p, pending));
    }

    let mut overflow: Option<usize> = None;
    let mut pending_rows: Vec<Vec<(u32, f64, f64)>> = Vec::new();
    let mut expanded: Vec<Option<usize>> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let ps = super::ProductState {
            env: nodes[i].env,
            config: nodes[i].config.clone().expect("expanded node has a configuration"),
        };
        let depth = nodes[i].depth;
        if expanded.len() <= i {
            expanded.resize(i + 1, None);
        }
        expanded[i] = Some(pending_rows.len());
        for a in 0..n_actions {
            let mut row = Vec::new();
            for (next, p) in env.transitions(ps.env, a) {
                let o = product.step_to(&ps, a, next)?;
                let j = if o.next.config.stack_len() > stack_cap {
                    *overflow.get_or_insert(usize::MAX)
                } else {
                    intern(o.next.env, o.next.config, depth + 1, &mut nodes, &mut queue)?
                };
                row.push((j as u32, p, o.reward));
            }
            pending_rows.push(row);
        }
    }

    // the overflow sink goes last so indices of ordinary states are stable
    let overflow = overflow.map(|_| {
        nodes.push(ProductNode {
            env: EnvState(u32::MAX),
            config: None,
            kind: NodeKind::Overflow,
            depth: horizon,
        });
        nodes.len() - 1
    });
    let mut offsets = Vec::with_capacity(nodes.len() * n_actions + 1);
    let mut rows = Vec::new();
    offsets.push(0);
    for (i, node) in nodes.iter().enumerate() {
        for a in 0..n_actions {
            match expanded.get(i).copied().flatten() {
                Some(base) if node.kind == NodeKind::Normal => {
                    for &(j, p, r) in &pending_rows[base + a] {
                        let j = if j == u32::MAX { overflow.unwrap() as u32 } else { j };
                        rows.push((j, p, r));
                    }
                }
                _ => rows.push((i as u32, 1.0, 0.0)),
            }
            offsets.push(rows.len());
        }
    }
    Ok(ExplicitProductMdp {
        nodes,
        n_actions,
        gamma,
        initial,
        horizon,
        stack_cap,
        overflow,
        offsets,
        rows,
    })
}
