//! Tabular Q-learning over product states, plus the options-based
//! hierarchical learner and the periodic greedy evaluation protocol.

mod hier;
mod qlearn;

pub use hier::{hierarchical_train, HierOutcome, HierPolicy, OptionSpec, Options};
pub use qlearn::{evaluate, q_learning_train, GreedyPolicy, QOutcome};

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("bad hyperparameter: {0}")]
    BadHyperparams(String),
    #[error("malformed learning curve: {0}")]
    BadCurve(String),
}

/// Training and evaluation settings for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episodes over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
    pub episodes: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub q_init: f64,
    /// Overrides the environment horizon when set.
    pub horizon: Option<usize>,
    /// Step budget of a hierarchical option; defaults to the horizon.
    pub option_budget: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.8,
            episodes: 1000,
            eval_every: 50,
            eval_episodes: 10,
            seed: 0,
            q_init: 0.0,
            horizon: None,
            option_budget: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::BadHyperparams(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        for e in [self.epsilon_start, self.epsilon_end, self.epsilon_decay_fraction] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon settings must lie in [0, 1]");
            }
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return bad("eval_every and eval_episodes must be positive");
        }
        if !self.q_init.is_finite() {
            return bad("q_init must be finite");
        }
        Ok(())
    }

    /// Exploration rate used during training episode `episode` (0-based).
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let decay = (self.epsilon_decay_fraction * self.episodes as f64).floor();
        if decay <= 0.0 {
            return self.epsilon_end;
        }
        let t = (episode as f64 / decay).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }

    pub(crate) fn train_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Independent stream for the `point`-th evaluation.
    pub(crate) fn eval_rng(&self, point: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(point as u64 + 1);
        rng
    }

    /// Episode indices after which an evaluation is recorded: 0, every
    /// `eval_every`, and the final one.
    pub fn eval_points(&self) -> Vec<usize> {
        let mut pts: Vec<usize> = (0..=self.episodes).step_by(self.eval_every.max(1)).collect();
        if pts.last() != Some(&self.episodes) {
            pts.push(self.episodes);
        }
        pts
    }
}

/// Action values keyed by abstracted product state.
#[derive(Clone, Debug)]
pub struct QTable {
    n_actions: usize,
    init: f64,
    values: HashMap<Vec<u32>, Vec<f64>>,
    default_row: Vec<f64>,
}

impl QTable {
    pub fn new(n_actions: usize, init: f64) -> Self {
        QTable {
            n_actions,
            init,
            values: HashMap::new(),
            default_row: vec![init; n_actions],
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Values for `key`; unseen keys read as the initial value.
    pub fn row(&self, key: &[u32]) -> &[f64] {
        self.values.get(key).map_or(&self.default_row, Vec::as_slice)
    }

    pub fn get(&self, key: &[u32], a: usize) -> f64 {
        self.row(key)[a]
    }

    pub fn row_mut(&mut self, key: &[u32]) -> &mut Vec<f64> {
        if !self.values.contains_key(key) {
            self.values.insert(key.to_vec(), vec![self.init; self.n_actions]);
        }
        self.values.get_mut(key).unwrap()
    }

    pub fn max(&self, key: &[u32]) -> f64 {
        self.row(key).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Number of keys with stored values.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, &Vec<f64>)> {
        self.values.iter()
    }
}

/// Argmax over `values` restricted to `allowed` (all when `None`), ties
/// broken uniformly at random.
pub fn argmax_random_tie(values: &[f64], allowed: Option<&[usize]>, rng: &mut ChaCha8Rng) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut chosen = usize::MAX;
    let mut ties = 0u32;
    let mut consider = |a: usize| {
        let v = values[a];
        if v > best {
            best = v;
            chosen = a;
            ties = 1;
        } else if v == best {
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                chosen = a;
            }
        }
    };
    match allowed {
        Some(list) => list.iter().for_each(|&a| consider(a)),
        None => (0..values.len()).for_each(&mut consider),
    }
    assert!(chosen != usize::MAX, "no action to choose from");
    chosen
}

/// With probability `epsilon` a uniform action, otherwise a greedy one.
pub fn select_action_epsilon_greedy(table: &QTable, key: &[u32], epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..table.n_actions())
    } else {
        argmax_random_tie(table.row(key), None, rng)
    }
}

/// Linear-interpolation percentile of sorted data with the `p(n+1)` rank
/// rule, clamped to the sample range.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let h = (p * (n as f64 + 1.0)).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo >= n {
        return sorted[n - 1];
    }
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub returns: Vec<f64>,
}

impl EvalStats {
    pub fn from_returns(returns: Vec<f64>) -> EvalStats {
        let mut sorted = returns.clone();
        sorted.sort_by(f64::total_cmp);
        EvalStats {
            median: percentile(&sorted, 0.5),
            p25: percentile(&sorted, 0.25),
            p75: percentile(&sorted, 0.75),
            returns,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    /// Training episodes completed before this evaluation.
    pub episode: usize,
    pub stats: EvalStats,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

pub const CURVE_HEADER: &str = "episode,median,p25,p75";

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CURVE_HEADER}\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                p.episode, p.stats.median, p.stats.p25, p.stats.p75
            );
        }
        out
    }

    /// Raw evaluation returns, one row per evaluation point.
    pub fn returns_csv(&self) -> String {
        let mut out = String::from("episode,returns\n");
        for p in &self.points {
            let r: Vec<String> = p.stats.returns.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(out, "{},{}", p.episode, r.join(" "));
        }
        out
    }

    /// Inverse of [`LearningCurve::returns_csv`].
    pub fn from_returns_csv(text: &str) -> Result<LearningCurve, LearnError> {
        let mut lines = text.lines();
        if lines.next() != Some("episode,returns") {
            return Err(LearnError::BadCurve("missing header".into()));
        }
        let mut points = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (ep, rest) = line
                .split_once(',')
                .ok_or_else(|| LearnError::BadCurve(format!("bad row `{line}`")))?;
            let episode = ep
                .parse()
                .map_err(|_| LearnError::BadCurve(format!("bad episode `{ep}`")))?;
            let returns = rest
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| LearnError::BadCurve(format!("bad returns in `{line}`")))?;
            if returns.is_empty() {
                return Err(LearnError::BadCurve(format!("no returns in `{line}`")));
            }
            points.push(CurvePoint {
                episode,
                stats: EvalStats::from_returns(returns),
            });
        }
        Ok(LearningCurve { points })
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    /// First evaluation episode whose median reaches `level`.
    pub fn first_crossing(&self, level: f64) -> Option<usize> {
        self.points
            .iter()
            .find(|p| p.stats.median >= level - 1e-12)
            .map(|p| p.episode)
    }

    /// Pools the raw returns of several curves point by point. All curves
    /// must share evaluation episodes.
    pub fn pool(curves: &[LearningCurve]) -> Result<LearningCurve, LearnError> {
        let Some(first) = curves.first() else {
            return Err(LearnError::BadCurve("nothing to pool".into()));
        };
        let mut points = Vec::with_capacity(first.points.len());
        for (i, p) in first.points.iter().enumerate() {
            let mut returns = Vec::new();
            for c in curves {
                let q = c
                    .points
                    .get(i)
                    .filter(|q| q.episode == p.episode)
                    .ok_or_else(|| LearnError::BadCurve("evaluation episodes differ".into()))?;
                returns.extend_from_slice(&q.stats.returns);
            }
            points.push(CurvePoint {
                episode: p.episode,
                stats: EvalStats::from_returns(returns),
            });
        }
        if curves.iter().any(|c| c.points.len() != first.points.len()) {
            return Err(LearnError::BadCurve("evaluation episodes differ".into()));
        }
        Ok(LearningCurve { points })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainStats {
    pub episodes: usize,
    pub steps: u64,
    pub table_keys: usize,
}
