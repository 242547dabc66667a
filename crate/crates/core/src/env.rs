//! Episodic environment over a ground task whose actions are meta-actions.
//!
//! Each step earns `goal_reward` when the successor satisfies the goal plus
//! `meta_reward` when the action has two or more atoms. Episodes end on the
//! goal, on the step cap, or in a state with no applicable operator.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::{GroundTask, OpId};
use crate::meta_ops::{applicable_atom_sets, conflicts, ConflictSet, MetaAction};
use crate::transition::{applicable_operators, is_goal, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub gamma: f64,
    pub goal_reward: f64,
    pub meta_reward: f64,
    pub max_steps: usize,
    pub degree: usize,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            goal_reward: 1.0,
            meta_reward: 0.0,
            max_steps: 100,
            degree: 2,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !self.goal_reward.is_finite() {
            return bad(format!("goal_reward must be finite, got {}", self.goal_reward));
        }
        if !(self.meta_reward.is_finite() && self.meta_reward >= 0.0) {
            return bad(format!("meta_reward must be finite and >= 0, got {}", self.meta_reward));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1".into());
        }
        if self.degree == 0 {
            return bad("degree must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("empty action")]
    EmptyAction,
    #[error("action of degree {degree} exceeds the limit {limit}")]
    Degree { degree: usize, limit: usize },
    #[error("operator id {0} is out of range")]
    UnknownOperator(OpId),
    #[error("operator {0} appears twice in the action")]
    Duplicate(OpId),
    #[error("operator {op} is not applicable in the current state")]
    Inapplicable { op: OpId },
    #[error("operators {a} and {b} conflict")]
    Conflict { a: OpId, b: OpId },
    #[error("episode already finished")]
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInfo {
    pub degree: usize,
    pub goal_reached: bool,
    pub steps_so_far: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next: State,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Goal,
    StepCap,
    DeadEnd,
}

impl Terminal {
    pub fn as_str(self) -> &'static str {
        match self {
            Terminal::Goal => "goal",
            Terminal::StepCap => "step_cap",
            Terminal::DeadEnd => "dead_end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub states: Vec<State>,
    pub actions: Vec<Vec<OpId>>,
    pub rewards: Vec<f64>,
    pub terminal: Terminal,
}

impl EpisodeTrace {
    pub fn reached_goal(&self) -> bool {
        self.terminal == Terminal::Goal
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Share of steps with two or more atoms; `None` for an empty trace.
    pub fn parallelism_rate(&self) -> Option<f64> {
        if self.actions.is_empty() {
            return None;
        }
        let meta = self.actions.iter().filter(|a| a.len() >= 2).count();
        Some(meta as f64 / self.actions.len() as f64)
    }
}

pub fn reset(task: &GroundTask) -> State {
    task.init.clone()
}

/// Checks that `atoms` form a legal action in `state` under degree `limit`.
pub fn check_action(task: &GroundTask, state: &State, atoms: &[OpId], limit: usize) -> Result<(), EnvError> {
    if atoms.is_empty() {
        return Err(EnvError::EmptyAction);
    }
    if atoms.len() > limit {
        return Err(EnvError::Degree { degree: atoms.len(), limit });
    }
    for (i, &a) in atoms.iter().enumerate() {
        if a >= task.num_operators() {
            return Err(EnvError::UnknownOperator(a));
        }
        if atoms[..i].contains(&a) {
            return Err(EnvError::Duplicate(a));
        }
    }
    for &a in atoms {
        if !state.contains_all(&task.operators[a].pre) {
            return Err(EnvError::Inapplicable { op: a });
        }
    }
    for (i, &a) in atoms.iter().enumerate() {
        for &b in &atoms[i + 1..] {
            if conflicts(task, a, b) {
                return Err(EnvError::Conflict { a, b });
            }
        }
    }
    Ok(())
}

pub fn step_reward(cfg: &EnvConfig, degree: usize, goal_reached: bool) -> f64 {
    let goal = if goal_reached { cfg.goal_reward } else { 0.0 };
    let meta = if degree >= 2 { cfg.meta_reward } else { 0.0 };
    goal + meta
}

/// One transition. `steps_before` counts the steps already taken.
pub fn step(
    task: &GroundTask,
    state: &State,
    action: &MetaAction,
    cfg: &EnvConfig,
    steps_before: usize,
) -> Result<StepOutcome, EnvError> {
    check_action(task, state, &action.atoms, cfg.degree)?;
    let next = action.apply(state);
    let goal_reached = is_goal(task, &next);
    let steps_so_far = steps_before + 1;
    let done = goal_reached || steps_so_far >= cfg.max_steps || applicable_operators(task, &next).is_empty();
    Ok(StepOutcome {
        reward: step_reward(cfg, action.degree(), goal_reached),
        next,
        done,
        info: StepInfo {
            degree: action.degree(),
            goal_reached,
            steps_so_far,
        },
    })
}

/// `Σ_k γ^k · rewards[k]`
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for &r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total
}

/// Per-step returns `G_t = Σ_k γ^k r_{t+k}` for every t.
pub fn returns_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[t] = acc;
    }
    out
}

/// A meta reward small enough that a capped episode cannot out-earn the goal.
pub fn conservative_meta_reward(cfg: &EnvConfig) -> f64 {
    cfg.goal_reward / cfg.max_steps as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardAudit {
    pub meta_steps: usize,
    pub meta_total: f64,
    pub goal_total: f64,
    /// Shaping collected exceeds the goal reward.
    pub masking: bool,
}

pub fn shaped_reward_audit(trace: &EpisodeTrace, cfg: &EnvConfig) -> RewardAudit {
    let meta_steps = trace.actions.iter().filter(|a| a.len() >= 2).count();
    let meta_total = meta_steps as f64 * cfg.meta_reward;
    RewardAudit {
        meta_steps,
        meta_total,
        goal_total: if trace.reached_goal() { cfg.goal_reward } else { 0.0 },
        masking: meta_total > cfg.goal_reward,
    }
}

/// Runs one episode, letting `choose` pick an index into the applicable
/// action list of each state.
pub fn run_episode(
    task: &GroundTask,
    n: &ConflictSet,
    cfg: &EnvConfig,
    mut choose: impl FnMut(&State, &[Vec<OpId>]) -> usize,
) -> EpisodeTrace {
    let mut state = reset(task);
    let mut trace = EpisodeTrace {
        states: vec![state.clone()],
        actions: Vec::new(),
        rewards: Vec::new(),
        terminal: Terminal::DeadEnd,
    };
    if is_goal(task, &state) {
        trace.terminal = Terminal::Goal;
        return trace;
    }
    loop {
        let actions = applicable_atom_sets(task, &state, cfg.degree, n);
        if actions.is_empty() {
            trace.terminal = Terminal::DeadEnd;
            return trace;
        }
        let chosen = &actions[choose(&state, &actions)];
        let meta = MetaAction::from_atoms(task, chosen);
        let next = meta.apply(&state);
        let goal_reached = is_goal(task, &next);
        trace.rewards.push(step_reward(cfg, meta.degree(), goal_reached));
        trace.actions.push(meta.atoms);
        trace.states.push(next.clone());
        state = next;
        if goal_reached {
            trace.terminal = Terminal::Goal;
            return trace;
        }
        if trace.actions.len() >= cfg.max_steps {
            trace.terminal = Terminal::StepCap;
            return trace;
        }
    }
}

/// Stateful wrapper holding the task, its conflict relation and the step
/// counter of the current episode.
#[derive(Debug, Clone)]
pub struct PlanningEnv {
    task: Arc<GroundTask>,
    conflicts: Arc<ConflictSet>,
    cfg: EnvConfig,
    state: State,
    steps: usize,
    done: bool,
}

impl PlanningEnv {
    pub fn new(task: Arc<GroundTask>, cfg: EnvConfig) -> Result<Self, EnvError> {
        let conflicts = Arc::new(ConflictSet::full(&task));
        Self::with_conflicts(task, conflicts, cfg)
    }

    pub fn with_conflicts(task: Arc<GroundTask>, conflicts: Arc<ConflictSet>, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let state = reset(&task);
        Ok(Self {
            task,
            conflicts,
            cfg,
            state,
            steps: 0,
            done: false,
        })
    }

    pub fn reset(&mut self) -> State {
        self.state = reset(&self.task);
        self.steps = 0;
        self.done = false;
        self.state.clone()
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn task(&self) -> &GroundTask {
        &self.task
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn applicable_actions(&self) -> Vec<Vec<OpId>> {
        applicable_atom_sets(&self.task, &self.state, self.cfg.degree, &self.conflicts)
    }

    pub fn step(&mut self, atoms: &[OpId]) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::Finished);
        }
        let action = MetaAction::from_atoms(&self.task, atoms);
        if action.degree() != atoms.len() {
            return Err(EnvError::Duplicate(atoms[0]));
        }
        let out = step(&self.task, &self.state, &action, &self.cfg, self.steps)?;
        self.state = out.next.clone();
        self.steps = out.info.steps_so_far;
        self.done = out.done;
        Ok(out)
    }
}
