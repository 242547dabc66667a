//! Linear-softmax policy over hand-built state-action features, trained with
//! a clipped policy-gradient surrogate and an entropy bonus.

use std::hash::Hasher;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{discounted_return, returns_to_go, run_episode, EnvConfig, EnvError, EpisodeTrace};
use crate::grounding::{FactId, GroundTask, OpId};
use crate::meta_ops::{ConflictSet, MetaAction};
use crate::transition::State;

pub const D_CORE: usize = 6;
pub const D_HASH: usize = 64;
pub const FEATURE_DIM: usize = D_CORE + D_HASH;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("no applicable actions")]
    NoActions,
    #[error("empty training batch")]
    EmptyBatch,
    #[error("no training tasks")]
    NoTasks,
    #[error("non-finite gradient{}", .iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    NonFinite { iteration: Option<usize> },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub d_core: usize,
    pub d_hash: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            d_core: D_CORE,
            d_hash: D_HASH,
        }
    }
}

fn bucket(sign: u8, predicate: &str, slot: &str) -> usize {
    let mut h = FnvHasher::default();
    h.write_u8(sign);
    h.write(predicate.as_bytes());
    h.write_u8(0xff);
    h.write(slot.as_bytes());
    (h.finish() % D_HASH as u64) as usize
}

/// Per-task feature extractor. Hash buckets of every fact are computed once.
#[derive(Debug, Clone)]
pub struct Featurizer {
    degree: usize,
    goal: Vec<FactId>,
    is_goal: Vec<bool>,
    add_buckets: Vec<Vec<usize>>,
    del_buckets: Vec<Vec<usize>>,
}

impl Featurizer {
    pub fn new(task: &GroundTask, degree: usize) -> Self {
        let mut is_goal = vec![false; task.num_facts()];
        for &g in &task.goal {
            is_goal[g] = true;
        }
        let buckets = |sign: u8| -> Vec<Vec<usize>> {
            task.facts
                .iter()
                .enumerate()
                .map(|(f, fact)| {
                    let mut keys: Vec<usize> = (0..fact.args.len())
                        .map(|j| bucket(sign, &fact.predicate, &j.to_string()))
                        .collect();
                    if fact.args.is_empty() {
                        keys.push(bucket(sign, &fact.predicate, "nullary"));
                    }
                    if is_goal[f] {
                        keys.push(bucket(sign, &fact.predicate, "goal"));
                    }
                    keys
                })
                .collect()
        };
        Self {
            degree: degree.max(1),
            goal: task.goal.clone(),
            add_buckets: buckets(b'+'),
            del_buckets: buckets(b'-'),
            is_goal,
        }
    }

    pub fn dim(&self) -> usize {
        FEATURE_DIM
    }

    /// Features of applying `action` in `state`, written into `out`.
    pub fn write(&self, state: &State, action: &MetaAction, out: &mut [f64]) {
        out[..FEATURE_DIM].fill(0.0);
        let newly_added = action
            .add
            .iter()
            .filter(|&&f| self.is_goal[f] && !state.contains(f))
            .count();
        let deleted = action
            .del
            .iter()
            .filter(|&&f| self.is_goal[f] && state.contains(f) && action.add.binary_search(&f).is_err())
            .count();
        let add_goal = action.add.iter().filter(|&&f| self.is_goal[f]).count();
        let satisfied = self.goal.iter().filter(|&&g| state.contains(g)).count();
        let fraction = if self.goal.is_empty() {
            1.0
        } else {
            (satisfied + newly_added - deleted) as f64 / self.goal.len() as f64
        };
        out[0] = 1.0;
        out[1] = action.degree() as f64 / self.degree as f64;
        out[2] = newly_added as f64;
        out[3] = deleted as f64;
        out[4] = fraction;
        out[5] = add_goal as f64;
        for &f in &action.add {
            for &b in &self.add_buckets[f] {
                out[D_CORE + b] += 1.0;
            }
        }
        for &f in &action.del {
            for &b in &self.del_buckets[f] {
                out[D_CORE + b] += 1.0;
            }
        }
    }

    pub fn featurize(&self, state: &State, action: &MetaAction) -> Vec<f64> {
        let mut out = vec![0.0; FEATURE_DIM];
        self.write(state, action, &mut out);
        out
    }

    /// Row-major `actions.len() × FEATURE_DIM` matrix.
    pub fn featurize_all(&self, task: &GroundTask, state: &State, actions: &[Vec<OpId>]) -> Vec<f64> {
        let mut out = vec![0.0; actions.len() * FEATURE_DIM];
        for (row, atoms) in out.chunks_mut(FEATURE_DIM).zip(actions) {
            self.write(state, &MetaAction::from_atoms(task, atoms), row);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub weights: Vec<f64>,
    pub baseline: f64,
    pub baseline_count: u64,
    pub version: u64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self::zeros(FEATURE_DIM)
    }
}

impl PolicyParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            baseline: 0.0,
            baseline_count: 0,
            version: 0,
        }
    }
}

pub fn logits(weights: &[f64], feats: &[f64]) -> Vec<f64> {
    feats
        .chunks(weights.len())
        .map(|row| row.iter().zip(weights).map(|(x, w)| x * w).sum())
        .collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Softmax over the feature rows of the applicable actions.
pub fn action_distribution(params: &PolicyParams, feats: &[f64]) -> Result<Vec<f64>, PolicyError> {
    if feats.is_empty() {
        return Err(PolicyError::NoActions);
    }
    if !feats.len().is_multiple_of(params.weights.len()) {
        return Err(PolicyError::Dimension {
            expected: params.weights.len(),
            got: feats.len(),
        });
    }
    Ok(softmax(&logits(&params.weights, feats)))
}

pub fn sample_action(dist: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.len() - 1
}

/// Lowest index among the maximal logits.
pub fn greedy_action(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub gradient_steps: usize,
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            episodes_per_iteration: 32,
            gradient_steps: 10,
            clip_epsilon: 0.2,
            learning_rate: 0.01,
            entropy_coef: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::Config(m.into()));
        if self.episodes_per_iteration == 0 {
            return bad("episodes_per_iteration must be >= 1");
        }
        if self.gradient_steps == 0 {
            return bad("gradient_steps must be >= 1");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0) {
            return bad("entropy_coef must be >= 0");
        }
        Ok(())
    }
}

/// One sampled choice: the feature rows of every applicable action and the
/// index taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub features: Vec<f64>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub trace: EpisodeTrace,
    pub decisions: Vec<Decision>,
}

/// Samples one episode from the stochastic policy.
pub fn rollout(
    task: &GroundTask,
    n: &ConflictSet,
    featurizer: &Featurizer,
    params: &PolicyParams,
    env_cfg: &EnvConfig,
    rng: &mut impl Rng,
) -> Rollout {
    let mut decisions = Vec::new();
    let trace = run_episode(task, n, env_cfg, |state, actions| {
        let features = featurizer.featurize_all(task, state, actions);
        let dist = softmax(&logits(&params.weights, &features));
        let chosen = sample_action(&dist, rng);
        decisions.push(Decision { features, chosen });
        chosen
    });
    Rollout { trace, decisions }
}

/// Rebuilds the decisions of recorded traces by re-enumerating the actions
/// of every visited state.
pub fn decisions_from_trace(
    task: &GroundTask,
    n: &ConflictSet,
    featurizer: &Featurizer,
    degree: usize,
    trace: &EpisodeTrace,
) -> Result<Rollout, PolicyError> {
    let mut decisions = Vec::with_capacity(trace.len());
    for (state, taken) in trace.states.iter().zip(&trace.actions) {
        let actions = crate::meta_ops::applicable_atom_sets(task, state, degree, n);
        let mut key = taken.clone();
        key.sort_unstable();
        let chosen = actions
            .iter()
            .position(|a| *a == key)
            .ok_or(EnvError::Inapplicable { op: taken[0] })?;
        decisions.push(Decision {
            features: featurizer.featurize_all(task, state, &actions),
            chosen,
        });
    }
    Ok(Rollout {
        trace: trace.clone(),
        decisions,
    })
}

/// Decisions flattened with the quantities fixed for one update.
#[derive(Debug, Clone)]
pub struct Batch {
    pub decisions: Vec<Decision>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Mean clipped surrogate plus entropy bonus at `weights`.
pub fn surrogate_objective(weights: &[f64], batch: &Batch, clip: f64, entropy_coef: f64) -> f64 {
    let mut total = 0.0;
    for ((d, &old), &adv) in batch.decisions.iter().zip(&batch.old_log_probs).zip(&batch.advantages) {
        let logp = log_softmax(&logits(weights, &d.features));
        let ratio = (logp[d.chosen] - old).exp();
        let surrogate = (ratio * adv).min(ratio.clamp(1.0 - clip, 1.0 + clip) * adv);
        let entropy: f64 = -logp.iter().map(|l| l.exp() * l).sum::<f64>();
        total += surrogate + entropy_coef * entropy;
    }
    total / batch.decisions.len().max(1) as f64
}

/// Analytic gradient of [`surrogate_objective`].
pub fn surrogate_gradient(weights: &[f64], batch: &Batch, clip: f64, entropy_coef: f64) -> Vec<f64> {
    let dim = weights.len();
    let mut grad = vec![0.0; dim];
    let mut mean = vec![0.0; dim];
    for ((d, &old), &adv) in batch.decisions.iter().zip(&batch.old_log_probs).zip(&batch.advantages) {
        let logp = log_softmax(&logits(weights, &d.features));
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        mean.fill(0.0);
        for (row, p) in d.features.chunks(dim).zip(&probs) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += p * x;
            }
        }
        let ratio = (logp[d.chosen] - old).exp();
        let clipped_out = (adv > 0.0 && ratio > 1.0 + clip) || (adv < 0.0 && ratio < 1.0 - clip);
        if !clipped_out {
            let row = &d.features[d.chosen * dim..(d.chosen + 1) * dim];
            for k in 0..dim {
                grad[k] += adv * ratio * (row[k] - mean[k]);
            }
        }
        if entropy_coef > 0.0 {
            // dH/dw = -Σ_b π_b (φ_b - φ̄) log π_b
            for ((row, p), l) in d.features.chunks(dim).zip(&probs).zip(&logp) {
                for k in 0..dim {
                    grad[k] -= entropy_coef * p * (row[k] - mean[k]) * l;
                }
            }
        }
    }
    let n = batch.decisions.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    grad
}

/// Advantages against the running-mean baseline, which absorbs this batch's
/// returns first.
pub fn prepare_batch(params: &PolicyParams, rollouts: &[Rollout], gamma: f64) -> (Batch, f64, u64) {
    let mut decisions = Vec::new();
    let mut returns = Vec::new();
    for r in rollouts {
        returns.extend(returns_to_go(&r.trace.rewards, gamma));
        decisions.extend(r.decisions.iter().cloned());
    }
    let count = params.baseline_count + returns.len() as u64;
    let baseline = if count == 0 {
        params.baseline
    } else {
        (params.baseline * params.baseline_count as f64 + returns.iter().sum::<f64>()) / count as f64
    };
    let old_log_probs = decisions
        .iter()
        .map(|d| log_softmax(&logits(&params.weights, &d.features))[d.chosen])
        .collect();
    let advantages = returns.iter().map(|g| g - baseline).collect();
    (
        Batch {
            decisions,
            old_log_probs,
            advantages,
        },
        baseline,
        count,
    )
}

pub fn policy_update(
    params: &PolicyParams,
    rollouts: &[Rollout],
    cfg: &TrainConfig,
    env_cfg: &EnvConfig,
) -> Result<PolicyParams, PolicyError> {
    if rollouts.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    let (batch, baseline, baseline_count) = prepare_batch(params, rollouts, env_cfg.gamma);
    let mut weights = params.weights.clone();
    if !batch.decisions.is_empty() {
        // Adam ascent; moments start fresh for every update
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let mut m = vec![0.0; weights.len()];
        let mut v = vec![0.0; weights.len()];
        for step in 1..=cfg.gradient_steps {
            let grad = surrogate_gradient(&weights, &batch, cfg.clip_epsilon, cfg.entropy_coef);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(PolicyError::NonFinite { iteration: None });
            }
            let (c1, c2) = (1.0 - b1.powi(step as i32), 1.0 - b2.powi(step as i32));
            for k in 0..weights.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
                v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
                weights[k] += cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(PolicyError::NonFinite { iteration: None });
        }
    }
    Ok(PolicyParams {
        weights,
        baseline,
        baseline_count,
        version: params.version + 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub task: usize,
    pub mean_return: f64,
    pub coverage: f64,
    /// Mean over non-empty episodes; `None` when every episode was empty.
    pub mean_parallelism: Option<f64>,
    pub mean_length: f64,
}

/// Seeded generator for episode `episode` of iteration `iteration`.
pub fn episode_rng(seed: u64, iteration: usize, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | episode as u64);
    rng
}

fn summarize(iteration: usize, task: usize, rollouts: &[Rollout], gamma: f64) -> CurvePoint {
    let n = rollouts.len() as f64;
    let rates: Vec<f64> = rollouts.iter().filter_map(|r| r.trace.parallelism_rate()).collect();
    CurvePoint {
        iteration,
        task,
        mean_return: rollouts.iter().map(|r| discounted_return(&r.trace.rewards, gamma)).sum::<f64>() / n,
        coverage: rollouts.iter().filter(|r| r.trace.reached_goal()).count() as f64 / n,
        mean_parallelism: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
        mean_length: rollouts.iter().map(|r| r.trace.len() as f64).sum::<f64>() / n,
    }
}

/// Trains from zero weights.
pub fn train(
    tasks: &[GroundTask],
    env_cfg: &EnvConfig,
    cfg: &TrainConfig,
) -> Result<(PolicyParams, Vec<CurvePoint>), PolicyError> {
    train_from(tasks, env_cfg, cfg, PolicyParams::default(), |_| {})
}

/// Trains from `params`, reporting every curve point to `on_iteration`.
/// Rollouts of one iteration run in parallel and are merged in episode order.
pub fn train_from(
    tasks: &[GroundTask],
    env_cfg: &EnvConfig,
    cfg: &TrainConfig,
    mut params: PolicyParams,
    mut on_iteration: impl FnMut(&CurvePoint),
) -> Result<(PolicyParams, Vec<CurvePoint>), PolicyError> {
    if tasks.is_empty() {
        return Err(PolicyError::NoTasks);
    }
    env_cfg.validate()?;
    cfg.validate()?;
    if params.weights.len() != FEATURE_DIM {
        return Err(PolicyError::Dimension {
            expected: FEATURE_DIM,
            got: params.weights.len(),
        });
    }
    let conflict_sets: Vec<ConflictSet> = tasks.iter().map(ConflictSet::full).collect();
    let featurizers: Vec<Featurizer> = tasks.iter().map(|t| Featurizer::new(t, env_cfg.degree)).collect();
    let mut picker = ChaCha8Rng::seed_from_u64(cfg.seed);
    picker.set_stream(u64::MAX);

    let mut curve = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let ti = picker.gen_range(0..tasks.len());
        let (task, n, feat) = (&tasks[ti], &conflict_sets[ti], &featurizers[ti]);
        let current = &params;
        let rollouts: Vec<Rollout> = (0..cfg.episodes_per_iteration)
            .into_par_iter()
            .map(|e| {
                let mut rng = episode_rng(cfg.seed, iteration, e);
                rollout(task, n, feat, current, env_cfg, &mut rng)
            })
            .collect();
        params = policy_update(&params, &rollouts, cfg, env_cfg).map_err(|e| match e {
            PolicyError::NonFinite { .. } => PolicyError::NonFinite {
                iteration: Some(iteration),
            },
            other => other,
        })?;
        let point = summarize(iteration, ti, &rollouts, env_cfg.gamma);
        on_iteration(&point);
        curve.push(point);
    }
    Ok((params, curve))
}

/// Saved policy together with the configuration it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub params: PolicyParams,
    pub features: FeatureConfig,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(params: PolicyParams, env: EnvConfig, train: TrainConfig) -> Self {
        Self {
            schema_version: 1,
            params,
            features: FeatureConfig::default(),
            seed: train.seed,
            env,
            train,
        }
    }

    pub fn check(&self) -> Result<(), PolicyError> {
        if self.features != FeatureConfig::default() || self.params.weights.len() != FEATURE_DIM {
            return Err(PolicyError::Dimension {
                expected: FEATURE_DIM,
                got: self.params.weights.len(),
            });
        }
        if self.params.weights.iter().any(|w| !w.is_finite()) {
            return Err(PolicyError::NonFinite { iteration: None });
        }
        Ok(())
    }
}
