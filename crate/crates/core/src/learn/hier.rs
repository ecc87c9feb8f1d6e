//! Options-based hierarchical learning over pdRM products.
//!
//! Every pdRM transition that changes the machine state or consumes a stack
//! symbol belongs to an option identified by (source state, pop, target
//! state). An option is available while the machine sits in its source state
//! with its pop symbol on top. Option policies see only the environment
//! state, the machine state and the top `k` symbols; they are trained by
//! intra-option Q-learning on a pseudo-reward of 1 when their transition
//! fires. The meta-policy sees the whole product state and is trained by
//! SMDP Q-learning on the real rewards.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{LabeledMdp, Start};
use crate::pdrm::{Configuration, Pdrm, Pop, StateId};
use crate::product::{AbstractionSpec, Product, ProductError, ProductState};

use super::{
    argmax_random_tie, CurvePoint, EvalStats, Hyperparams, LearningCurve, QTable, TrainStats,
};

#[derive(Clone, Debug, PartialEq)]
pub struct OptionSpec {
    pub source: StateId,
    pub pop: Pop,
    pub target: StateId,
    /// Input transitions that trigger the option.
    pub transitions: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub specs: Vec<OptionSpec>,
    by_transition: Vec<Option<usize>>,
}

impl Options {
    pub fn from_pdrm(pdrm: &Pdrm) -> Options {
        let mut specs: Vec<OptionSpec> = Vec::new();
        let mut by_transition = vec![None; pdrm.transitions().len()];
        for (i, t) in pdrm.transitions().iter().enumerate() {
            if t.input.is_epsilon() || (t.source == t.target && t.pop == Pop::Epsilon) {
                continue;
            }
            let idx = match specs
                .iter()
                .position(|o| (o.source, o.pop, o.target) == (t.source, t.pop, t.target))
            {
                Some(j) => j,
                None => {
                    specs.push(OptionSpec {
                        source: t.source,
                        pop: t.pop,
                        target: t.target,
                        transitions: Vec::new(),
                    });
                    specs.len() - 1
                }
            };
            specs[idx].transitions.push(i);
            by_transition[i] = Some(idx);
        }
        Options { specs, by_transition }
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Option owning input transition `t`, if any.
    pub fn attribute(&self, t: usize) -> Option<usize> {
        self.by_transition.get(t).copied().flatten()
    }

    pub fn is_available(&self, o: usize, config: &Configuration) -> bool {
        let spec = &self.specs[o];
        !config.terminal && spec.source == config.state && spec.pop.accepts(config.top())
    }

    pub fn available(&self, config: &Configuration) -> Vec<usize> {
        (0..self.specs.len())
            .filter(|&o| self.is_available(o, config))
            .collect()
    }
}

/// Learned meta-policy and option policies.
#[derive(Clone, Debug)]
pub struct HierPolicy {
    pub options: Options,
    pub meta: QTable,
    pub option_tables: Vec<QTable>,
    pub option_k: usize,
    pub option_budget: usize,
}

#[derive(Clone, Debug)]
pub struct HierOutcome {
    pub policy: HierPolicy,
    pub curve: LearningCurve,
    pub stats: TrainStats,
    /// Steps taken by the fallback primitive policy because no option was available.
    pub fallback_steps: u64,
}

struct Traced {
    next: ProductState<Configuration>,
    reward: f64,
    fired: Option<usize>,
    done: bool,
}

fn traced_step(
    product: &Product<'_, Pdrm>,
    pdrm: &Pdrm,
    ps: &ProductState<Configuration>,
    a: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Traced, ProductError> {
    let env = product.env;
    let next = env.sample_next(ps.env, a, rng);
    let label = product.map_label(env.label(ps.env, a, next));
    let trace = pdrm.step_traced(&ps.config, label)?;
    Ok(Traced {
        reward: env.reward(ps.env, a, next) + trace.reward,
        done: trace.config.terminal,
        fired: trace.fired,
        next: ProductState {
            env: next,
            config: trace.config,
        },
    })
}

fn explore_or_greedy(values: &[f64], allowed: Option<&[usize]>, eps: f64, rng: &mut ChaCha8Rng) -> usize {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        match allowed {
            Some(list) => list[rng.gen_range(0..list.len())],
            None => rng.gen_range(0..values.len()),
        }
    } else {
        argmax_random_tie(values, allowed, rng)
    }
}

fn best_available(table: &QTable, key: &[u32], avail: &[usize]) -> f64 {
    let row = table.row(key);
    avail.iter().map(|&o| row[o]).fold(f64::NEG_INFINITY, f64::max)
}

impl HierPolicy {
    fn option_key(&self, product: &Product<'_, Pdrm>, ps: &ProductState<Configuration>) -> Vec<u32> {
        product.key(ps, AbstractionSpec::TopK(self.option_k))
    }

    /// Runs one episode with exploration rate `eps`, learning when `learn`
    /// is set. Returns the undiscounted return, the step count and the
    /// number of fallback steps.
    #[allow(clippy::too_many_arguments)]
    fn episode(
        &mut self,
        product: &Product<'_, Pdrm>,
        pdrm: &Pdrm,
        starts: &[Start],
        horizon: usize,
        hp: Option<&Hyperparams>,
        eps: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, u64, u64), ProductError> {
        let (mut ps, mut pending) = product.reset(starts, rng)?;
        let mut ret = 0.0;
        let mut t = 0;
        let mut fallbacks = 0;
        if horizon == 0 {
            return Ok((0.0, 0, 0));
        }
        while t < horizon && !ps.config.terminal {
            let avail = self.options.available(&ps.config);
            if avail.is_empty() {
                log::debug!("no option available in {}; acting randomly", pdrm.state_name(ps.config.state));
                let a = rng.gen_range(0..product.env.n_actions());
                let o = traced_step(product, pdrm, &ps, a, rng)?;
                ret += o.reward + std::mem::take(&mut pending);
                ps = o.next;
                t += 1;
                fallbacks += 1;
                continue;
            }
            let meta_key = product.key(&ps, AbstractionSpec::Full);
            let chosen = explore_or_greedy(self.meta.row(&meta_key), Some(&avail), eps, rng);
            let mut acc = 0.0;
            let mut discount = 1.0;
            let mut tau = 0;
            loop {
                let key = self.option_key(product, &ps);
                let a = explore_or_greedy(self.option_tables[chosen].row(&key), None, eps, rng);
                let o = traced_step(product, pdrm, &ps, a, rng)?;
                let r = o.reward + std::mem::take(&mut pending);
                ret += r;
                let fired = o.fired.and_then(|i| self.options.attribute(i));
                if let Some(hp) = hp {
                    acc += discount * r;
                    discount *= hp.gamma;
                    let next_key = self.option_key(product, &o.next);
                    for opt in 0..self.options.len() {
                        if !self.options.is_available(opt, &ps.config) {
                            continue;
                        }
                        let hit = fired == Some(opt);
                        let stop = hit || o.done || !self.options.is_available(opt, &o.next.config);
                        let pseudo = if hit { 1.0 } else { 0.0 };
                        let target = if stop {
                            pseudo
                        } else {
                            pseudo + hp.gamma * self.option_tables[opt].max(&next_key)
                        };
                        let q = &mut self.option_tables[opt].row_mut(&key)[a];
                        *q += hp.alpha * (target - *q);
                    }
                }
                tau += 1;
                t += 1;
                let stop = fired == Some(chosen)
                    || o.done
                    || !self.options.is_available(chosen, &o.next.config)
                    || tau >= self.option_budget
                    || t >= horizon;
                ps = o.next;
                if stop {
                    break;
                }
            }
            if let Some(hp) = hp {
                let next_avail = self.options.available(&ps.config);
                let future = if ps.config.terminal || next_avail.is_empty() {
                    0.0
                } else {
                    discount * best_available(&self.meta, &product.key(&ps, AbstractionSpec::Full), &next_avail)
                };
                let q = &mut self.meta.row_mut(&meta_key)[chosen];
                *q += hp.alpha * (acc + future - *q);
            }
        }
        Ok((ret, t as u64, fallbacks))
    }

    pub(crate) fn evaluate(
        &mut self,
        product: &Product<'_, Pdrm>,
        pdrm: &Pdrm,
        starts: &[Start],
        n_episodes: usize,
        horizon: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<EvalStats, ProductError> {
        let mut returns = Vec::with_capacity(n_episodes);
        for _ in 0..n_episodes {
            let (ret, _, _) = self.episode(product, pdrm, starts, horizon, None, 0.0, rng)?;
            returns.push(product.normalize(ret));
        }
        Ok(EvalStats::from_returns(returns))
    }

    /// Greedy rollout from the evaluation distribution, for inspection.
    pub fn rollout_return(
        &mut self,
        env: &dyn LabeledMdp,
        pdrm: &Pdrm,
        horizon: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64, ProductError> {
        let product = Product::new(env, pdrm);
        let starts = env.eval_distribution();
        let (ret, _, _) = self.episode(&product, pdrm, &starts, horizon, None, 0.0, rng)?;
        Ok(product.normalize(ret))
    }
}

/// Hierarchical training with option policies keyed on the top `option_k`
/// stack symbols.
pub fn hierarchical_train(
    env: &dyn LabeledMdp,
    pdrm: &Pdrm,
    hp: &Hyperparams,
    option_k: usize,
) -> Result<HierOutcome, ProductError> {
    let product = Product::new(env, pdrm);
    let horizon = hp.horizon.unwrap_or_else(|| env.horizon());
    let options = Options::from_pdrm(pdrm);
    let n_options = options.len();
    let mut policy = HierPolicy {
        option_tables: vec![QTable::new(env.n_actions(), hp.q_init); n_options],
        meta: QTable::new(n_options.max(1), hp.q_init),
        options,
        option_k,
        option_budget: hp.option_budget.unwrap_or(horizon).max(1),
    };
    let train_starts = env.initial_distribution();
    let eval_starts = env.eval_distribution();
    let mut rng = hp.train_rng();
    let mut curve = LearningCurve::default();
    let mut steps = 0;
    let mut fallback_steps = 0;
    let points = hp.eval_points();
    let mut next_point = 0;
    for episode in 0..=hp.episodes {
        if points.get(next_point) == Some(&episode) {
            let mut eval_rng = hp.eval_rng(next_point);
            let stats = policy.evaluate(&product, pdrm, &eval_starts, hp.eval_episodes, horizon, &mut eval_rng)?;
            curve.points.push(CurvePoint { episode, stats });
            next_point += 1;
        }
        if episode == hp.episodes {
            break;
        }
        let eps = hp.epsilon_at(episode);
        let (_, n, f) = policy.episode(&product, pdrm, &train_starts, horizon, Some(hp), eps, &mut rng)?;
        steps += n;
        fallback_steps += f;
    }
    let stats = TrainStats {
        episodes: hp.episodes,
        steps,
        table_keys: policy.meta.len() + policy.option_tables.iter().map(QTable::len).sum::<usize>(),
    };
    Ok(HierOutcome {
        policy,
        curve,
        stats,
        fallback_steps,
    })
}
