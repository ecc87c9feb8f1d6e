use rand_chacha::ChaCha8Rng;

use crate::env::{LabeledMdp, Start};
use crate::product::{rollout_from, AbstractionSpec, Monitor, Product, ProductError};

use super::{
    argmax_random_tie, select_action_epsilon_greedy, CurvePoint, EvalStats, Hyperparams, LearningCurve,
    QTable, TrainStats,
};

/// Greedy policy read off a Q-table, ties broken at random.
#[derive(Clone, Debug)]
pub struct GreedyPolicy {
    pub table: QTable,
    pub abstraction: AbstractionSpec,
}

impl GreedyPolicy {
    pub fn act<M: Monitor>(
        &self,
        product: &Product<'_, M>,
        ps: &crate::product::ProductState<M::Config>,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let key = product.key(ps, self.abstraction);
        argmax_random_tie(self.table.row(&key), None, rng)
    }
}

#[derive(Clone, Debug)]
pub struct QOutcome {
    pub policy: GreedyPolicy,
    pub curve: LearningCurve,
    pub stats: TrainStats,
}

/// Runs `n_episodes` episodes of `policy` from `starts` and summarizes the
/// normalized returns.
pub fn evaluate<M: Monitor>(
    product: &Product<'_, M>,
    starts: &[Start],
    policy: &mut dyn FnMut(&crate::product::ProductState<M::Config>, &mut ChaCha8Rng) -> usize,
    n_episodes: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EvalStats, ProductError> {
    assert!(n_episodes >= 1);
    let mut returns = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        returns.push(rollout_from(product, starts, policy, horizon, rng)?.normalized);
    }
    Ok(EvalStats::from_returns(returns))
}

/// One-step Q-learning on product rollouts with keys given by `abstraction`.
pub fn q_learning_train<M: Monitor>(
    env: &dyn LabeledMdp,
    monitor: &M,
    abstraction: AbstractionSpec,
    hp: &Hyperparams,
) -> Result<QOutcome, ProductError> {
    let product = Product::new(env, monitor);
    let horizon = hp.horizon.unwrap_or_else(|| env.horizon());
    let train_starts = env.initial_distribution();
    let eval_starts = env.eval_distribution();
    let mut table = QTable::new(env.n_actions(), hp.q_init);
    let mut rng = hp.train_rng();
    let mut curve = LearningCurve::default();
    let mut steps = 0u64;
    let points = hp.eval_points();
    let mut next_point = 0;

    for episode in 0..=hp.episodes {
        if points.get(next_point) == Some(&episode) {
            let policy = GreedyPolicy { table, abstraction };
            let mut eval_rng = hp.eval_rng(next_point);
            let stats = evaluate(
                &product,
                &eval_starts,
                &mut |ps, r| policy.act(&product, ps, r),
                hp.eval_episodes,
                horizon,
                &mut eval_rng,
            )?;
            curve.points.push(CurvePoint { episode, stats });
            table = policy.table;
            next_point += 1;
        }
        if episode == hp.episodes {
            break;
        }
        let eps = hp.epsilon_at(episode);
        let (mut ps, mut pending) = product.reset(&train_starts, &mut rng)?;
        let mut key = product.key(&ps, abstraction);
        for _ in 0..horizon {
            if product.is_final(&ps) {
                break;
            }
            let a = select_action_epsilon_greedy(&table, &key, eps, &mut rng);
            let o = product.step(&ps, a, &mut rng)?;
            let r = o.reward + std::mem::take(&mut pending);
            let next_key = product.key(&o.next, abstraction);
            let target = if o.done { r } else { r + hp.gamma * table.max(&next_key) };
            let q = &mut table.row_mut(&key)[a];
            *q += hp.alpha * (target - *q);
            steps += 1;
            ps = o.next;
            key = next_key;
            if o.done {
                break;
            }
        }
    }
    let stats = TrainStats {
        episodes: hp.episodes,
        steps,
        table_keys: table.len(),
    };
    Ok(QOutcome {
        policy: GreedyPolicy { table, abstraction },
        curve,
        stats,
    })
}
