use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, Pow};

use crate::env::LabeledMdp;
use crate::pdrm::Pdrm;
use crate::product::{enumerate_bounded_product, ExplicitProductMdp, ProductError};

/// Number of strings of length at most `k` over an alphabet of size
/// `gamma_size`: `(g^(k+1) - 1) / (g - 1)`, or `k + 1` when `g = 1`.
pub fn count_stack_strings(gamma_size: u64, k: u64) -> BigUint {
    assert!(gamma_size >= 1, "alphabet must be non-empty");
    if gamma_size == 1 {
        return BigUint::from(k) + 1u32;
    }
    let g = BigUint::from(gamma_size);
    let exp = u32::try_from(k + 1).expect("stack length bound too large");
    (Pow::pow(&g, exp) - BigUint::one()) / (g - BigUint::one())
}

/// Number of stack strings reachable in `n` reads when each read pushes at
/// most `m` symbols through at most `e` further pushing silent moves:
/// strings of length up to `n·m·(e+1)`.
pub fn count_full_bound(gamma_size: u64, n: u64, m: u64, e: u64) -> BigUint {
    count_stack_strings(gamma_size, n * m * (e + 1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupRow {
    pub abstraction: String,
    /// Distinct policy keys among reachable states.
    pub empirical: usize,
    pub bound: BigUint,
}

impl BlowupRow {
    pub fn within_bound(&self) -> bool {
        BigUint::from(self.empirical) <= self.bound
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupReport {
    pub horizon: usize,
    /// Label reads counted for the bound, including a start label.
    pub reads: usize,
    pub gamma_size: usize,
    pub max_push: usize,
    pub epsilon_chain: usize,
    pub n_env_states: usize,
    pub n_machine_states: usize,
    pub n_product_states: usize,
    pub full: BlowupRow,
    pub top_k: Vec<(usize, BlowupRow)>,
    pub distinct_stacks: usize,
    pub max_stack_len: usize,
}

impl BlowupReport {
    pub fn all_within_bounds(&self) -> bool {
        self.full.within_bound() && self.top_k.iter().all(|(_, r)| r.within_bound())
    }
}

/// Counts distinct full and top-k keys among the states of the bounded
/// product and sets them against the closed-form bounds.
pub fn measure_blowup(
    env: &dyn LabeledMdp,
    pdrm: &Pdrm,
    horizon: usize,
    k_list: &[usize],
    state_cap: usize,
) -> Result<BlowupReport, ProductError> {
    let mdp = enumerate_bounded_product(env, pdrm, horizon, 0.99, None, state_cap)?;
    blowup_of(env, pdrm, &mdp, k_list)
}

pub(crate) fn blowup_of(
    env: &dyn LabeledMdp,
    pdrm: &Pdrm,
    mdp: &ExplicitProductMdp,
    k_list: &[usize],
) -> Result<BlowupReport, ProductError> {
    let e = pdrm.max_pushing_epsilon_chain().ok_or(ProductError::NoStackBound)?;
    let m = pdrm.max_push_len();
    let start_read = env.initial_distribution().iter().any(|s| !s.1.is_empty());
    let reads = mdp.horizon + usize::from(start_read);
    let gamma_size = pdrm.stack_symbols().len();
    let prefix = BigUint::from(env.n_states()) * BigUint::from(pdrm.n_states());

    let configs: Vec<_> = mdp
        .nodes
        .iter()
        .filter_map(|n| n.config.as_ref().map(|c| (n.env, c)))
        .collect();
    let full_keys: HashSet<_> = configs.iter().copied().collect();
    let stacks: HashSet<Vec<_>> = configs.iter().map(|(_, c)| c.stack_vec()).collect();
    let max_stack_len = configs.iter().map(|(_, c)| c.stack_len()).max().unwrap_or(0);
    let top_k = k_list
        .iter()
        .map(|&k| {
            let keys: HashSet<_> = configs.iter().map(|(s, c)| (*s, c.top_k_view(k))).collect();
            let row = BlowupRow {
                abstraction: format!("top-{k}"),
                empirical: keys.len(),
                bound: &prefix * count_stack_strings(gamma_size as u64, k as u64),
            };
            (k, row)
        })
        .collect();
    Ok(BlowupReport {
        horizon: mdp.horizon,
        reads,
        gamma_size,
        max_push: m,
        epsilon_chain: e,
        n_env_states: env.n_states(),
        n_machine_states: pdrm.n_states(),
        n_product_states: mdp.n_states(),
        full: BlowupRow {
            abstraction: "full".into(),
            empirical: full_keys.len(),
            bound: &prefix * count_full_bound(gamma_size as u64, reads as u64, m as u64, e as u64),
        },
        top_k,
        distinct_stacks: stacks.len(),
        max_stack_len,
    })
}
