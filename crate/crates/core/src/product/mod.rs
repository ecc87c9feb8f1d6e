//! Products of a labelled environment with a reward-emitting monitor.
//!
//! A monitor is anything that reads labels and emits rewards: a pdRM, a
//! counting automaton or the path-encoding automaton. [`Product`] steps the
//! pair; [`enumerate_bounded_product`] unfolds a pdRM product into an explicit
//! finite MDP.

mod explicit;
mod monitor;

pub use monitor::PathMonitor;

use std::fmt::Debug;
use std::hash::Hash;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cra::CraError;
use crate::env::{sample_start, EnvState, LabeledMdp, Start};
use crate::pdrm::PdrmError;
use crate::props::PropSet;

pub use explicit::{enumerate_bounded_product, default_stack_cap, ExplicitProductMdp, NodeKind, ProductNode, DEFAULT_STATE_CAP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProductError {
    #[error(transparent)]
    Pdrm(#[from] PdrmError),
    #[error(transparent)]
    Cra(#[from] CraError),
    #[error("product enumeration exceeded {cap} states")]
    ExplosionGuard { cap: usize },
    #[error("machine has a cycle of silent transitions; give an explicit stack cap")]
    NoStackBound,
}

/// How much of the monitor configuration a policy can see.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AbstractionSpec {
    Full,
    TopK(usize),
}

impl std::fmt::Display for AbstractionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AbstractionSpec::Full => write!(f, "full"),
            AbstractionSpec::TopK(k) => write!(f, "top-{k}"),
        }
    }
}

pub trait Monitor: Send + Sync {
    type Config: Clone + Eq + Hash + Debug + Send + Sync;

    fn props(&self) -> &[String];

    /// Start configuration and any reward pending from silent start moves.
    fn reset(&self) -> Result<(Self::Config, f64), ProductError>;

    fn advance(&self, config: &Self::Config, sigma: PropSet) -> Result<(Self::Config, f64), ProductError>;

    fn is_final(&self, config: &Self::Config) -> bool;

    /// Appends the policy-visible part of `config` to `out`. Monitors without
    /// a stack ignore `abstraction` and expose everything.
    fn write_key(&self, config: &Self::Config, abstraction: AbstractionSpec, out: &mut Vec<u32>);
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductState<C> {
    pub env: EnvState,
    pub config: C,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<C> {
    pub next: ProductState<C>,
    pub label: PropSet,
    /// Environment reward plus monitor reward.
    pub reward: f64,
    /// The monitor reached a final configuration.
    pub done: bool,
}

/// Maps environment proposition indices onto a monitor's vocabulary by name.
#[derive(Clone, Debug)]
pub struct LabelMap {
    targets: Vec<Option<usize>>,
    identity: bool,
}

impl LabelMap {
    pub fn new(from: &[String], to: &[String]) -> LabelMap {
        let targets: Vec<Option<usize>> = from
            .iter()
            .map(|p| to.iter().position(|q| q == p))
            .collect();
        let identity = targets.iter().enumerate().all(|(i, t)| *t == Some(i));
        LabelMap { targets, identity }
    }

    pub fn apply(&self, sigma: PropSet) -> PropSet {
        if self.identity {
            return sigma;
        }
        sigma
            .iter()
            .filter_map(|i| self.targets.get(i).copied().flatten())
            .fold(PropSet::EMPTY, PropSet::with)
    }
}

/// An environment paired with a monitor.
pub struct Product<'a, M: Monitor> {
    pub env: &'a dyn LabeledMdp,
    pub monitor: &'a M,
    labels: LabelMap,
}

impl<'a, M: Monitor> Product<'a, M> {
    pub fn new(env: &'a dyn LabeledMdp, monitor: &'a M) -> Self {
        Product {
            env,
            monitor,
            labels: LabelMap::new(env.props(), monitor.props()),
        }
    }

    pub fn map_label(&self, sigma: PropSet) -> PropSet {
        self.labels.apply(sigma)
    }

    /// Product state for a given environment start and start label, with the
    /// reward owed to the first step.
    pub fn start_from(&self, env: EnvState, label: PropSet) -> Result<(ProductState<M::Config>, f64), ProductError> {
        let (mut config, mut pending) = self.monitor.reset()?;
        let sigma = self.labels.apply(label);
        if !sigma.is_empty() && !self.monitor.is_final(&config) {
            let (next, r) = self.monitor.advance(&config, sigma)?;
            config = next;
            pending += r;
        }
        Ok((ProductState { env, config }, pending))
    }

    pub fn reset(&self, starts: &[Start], rng: &mut ChaCha8Rng) -> Result<(ProductState<M::Config>, f64), ProductError> {
        let (s, label) = sample_start(starts, rng);
        self.start_from(s, label)
    }

    /// Outcome of taking `a` in `ps` when the environment moves to `next`.
    /// A final monitor configuration is absorbing: the state is held fixed
    /// and the reward is 0.
    pub fn step_to(&self, ps: &ProductState<M::Config>, a: usize, next: EnvState) -> Result<StepOutcome<M::Config>, ProductError> {
        let label = self.env.label(ps.env, a, next);
        if self.monitor.is_final(&ps.config) {
            return Ok(StepOutcome {
                next: ps.clone(),
                label,
                reward: 0.0,
                done: true,
            });
        }
        let env_reward = self.env.reward(ps.env, a, next);
        let (config, r) = self.monitor.advance(&ps.config, self.labels.apply(label))?;
        let done = self.monitor.is_final(&config);
        Ok(StepOutcome {
            next: ProductState { env: next, config },
            label,
            reward: env_reward + r,
            done,
        })
    }

    pub fn step(&self, ps: &ProductState<M::Config>, a: usize, rng: &mut ChaCha8Rng) -> Result<StepOutcome<M::Config>, ProductError> {
        let next = self.env.sample_next(ps.env, a, rng);
        self.step_to(ps, a, next)
    }

    pub fn is_final(&self, ps: &ProductState<M::Config>) -> bool {
        self.monitor.is_final(&ps.config)
    }

    pub fn key(&self, ps: &ProductState<M::Config>, abstraction: AbstractionSpec) -> Vec<u32> {
        let mut out = vec![ps.env.0];
        self.monitor.write_key(&ps.config, abstraction, &mut out);
        out
    }

    pub fn normalize(&self, ret: f64) -> f64 {
        (ret / self.env.reward_normalizer()).clamp(-1.0, 1.0)
    }
}

/// One-step free-function form of [`Product::step`].
pub fn product_step<M: Monitor>(
    env: &dyn LabeledMdp,
    monitor: &M,
    ps: &ProductState<M::Config>,
    a: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(ProductState<M::Config>, f64, bool), ProductError> {
    let o = Product::new(env, monitor).step(ps, a, rng)?;
    Ok((o.next, o.reward, o.done))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout<C> {
    pub ret: f64,
    pub normalized: f64,
    /// (state, action, reward) per step.
    pub trajectory: Vec<(ProductState<C>, usize, f64)>,
    pub final_state: Option<ProductState<C>>,
}

/// Runs one episode from the training start distribution.
pub fn rollout<M: Monitor>(
    product: &Product<'_, M>,
    policy: &mut dyn FnMut(&ProductState<M::Config>, &mut ChaCha8Rng) -> usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Rollout<M::Config>, ProductError> {
    let starts = product.env.initial_distribution();
    rollout_from(product, &starts, policy, horizon, rng)
}

pub fn rollout_from<M: Monitor>(
    product: &Product<'_, M>,
    starts: &[Start],
    policy: &mut dyn FnMut(&ProductState<M::Config>, &mut ChaCha8Rng) -> usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Rollout<M::Config>, ProductError> {
    let mut trajectory = Vec::new();
    if horizon == 0 {
        return Ok(Rollout {
            ret: 0.0,
            normalized: 0.0,
            trajectory,
            final_state: None,
        });
    }
    let (mut ps, mut pending) = product.reset(starts, rng)?;
    let mut ret = 0.0;
    for _ in 0..horizon {
        if product.is_final(&ps) {
            break;
        }
        let a = policy(&ps, rng);
        let o = product.step(&ps, a, rng)?;
        let r = o.reward + std::mem::take(&mut pending);
        ret += r;
        trajectory.push((ps, a, r));
        ps = o.next;
        if o.done {
            break;
        }
    }
    Ok(Rollout {
        ret,
        normalized: product.normalize(ret),
        trajectory,
        final_state: Some(ps),
    })
}

#[cfg(test)]
mod tests;
