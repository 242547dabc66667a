//! Plan execution, validation, metrics and a breadth-first oracle planner.

use std::collections::HashMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{run_episode, EnvConfig, Terminal};
use crate::grounding::{GroundTask, OpId};
use crate::meta_ops::{applicable_atom_sets, conflicts, ConflictSet, MetaAction};
use crate::policy::{greedy_action, logits, sample_action, softmax, Featurizer, PolicyParams};
use crate::transition::{is_goal, State};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<Vec<OpId>>,
    pub provenance: String,
}

impl Plan {
    pub fn new(steps: Vec<Vec<OpId>>, provenance: impl Into<String>) -> Self {
        Self {
            steps,
            provenance: provenance.into(),
        }
    }

    pub fn timesteps(&self) -> usize {
        self.steps.len()
    }

    pub fn atomic_ops(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("parallelism rate is undefined for an empty plan")]
    EmptyPlan,
    #[error("search exceeded the state cap after visiting {visited} states")]
    StateCap { visited: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Inapplicable,
    Conflict,
    DegreeExceeded,
    GoalUnsatisfied,
}

impl Cause {
    pub fn as_str(self) -> &'static str {
        match self {
            Cause::Inapplicable => "inapplicable",
            Cause::Conflict => "conflict",
            Cause::DegreeExceeded => "degree_exceeded",
            Cause::GoalUnsatisfied => "goal_unsatisfied",
        }
    }
}

/// First failure found by [`validate_plan`]. `step` is `None` for a goal
/// failure after the last step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanError {
    pub step: Option<usize>,
    pub cause: Cause,
    pub detail: String,
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(t) => write!(f, "step {t}: {}: {}", self.cause.as_str(), self.detail),
            None => write!(f, "{}: {}", self.cause.as_str(), self.detail),
        }
    }
}

impl std::error::Error for PlanError {}

/// Executes `plan` from the initial state, returning the final state.
pub fn validate_plan(task: &GroundTask, plan: &Plan, degree: usize) -> Result<State, PlanError> {
    let mut state = task.init.clone();
    for (t, atoms) in plan.steps.iter().enumerate() {
        let fail = |cause, detail: String| PlanError {
            step: Some(t),
            cause,
            detail,
        };
        if atoms.is_empty() || atoms.len() > degree {
            return Err(fail(
                Cause::DegreeExceeded,
                format!("step has {} operators, allowed 1..={degree}", atoms.len()),
            ));
        }
        for (i, &a) in atoms.iter().enumerate() {
            if a >= task.num_operators() {
                return Err(fail(Cause::Inapplicable, format!("unknown operator id {a}")));
            }
            if let Some(&b) = atoms[..i].iter().find(|&&b| b == a || conflicts(task, a, b)) {
                return Err(fail(
                    Cause::Conflict,
                    format!("{} and {}", task.operator_label(b), task.operator_label(a)),
                ));
            }
        }
        for &a in atoms {
            if let Some(&f) = task.operators[a].pre.iter().find(|&&f| !state.contains(f)) {
                return Err(fail(
                    Cause::Inapplicable,
                    format!("{} needs {}", task.operator_label(a), task.facts[f]),
                ));
            }
        }
        state = MetaAction::from_atoms(task, atoms).apply(&state);
    }
    if let Some(&g) = task.goal.iter().find(|&&g| !state.contains(g)) {
        return Err(PlanError {
            step: None,
            cause: Cause::GoalUnsatisfied,
            detail: format!("goal fact {} is false after the last step", task.facts[g]),
        });
    }
    Ok(state)
}

/// Share of timesteps that apply two or more operators.
pub fn parallelism_rate(plan: &Plan) -> Result<f64, EvalError> {
    if plan.steps.is_empty() {
        return Err(EvalError::EmptyPlan);
    }
    let parallel = plan.steps.iter().filter(|s| s.len() >= 2).count();
    Ok(parallel as f64 / plan.steps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Mode {
    Greedy,
    Sample { seed: u64 },
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Greedy => "greedy",
            Mode::Sample { .. } => "sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunOutcome {
    Solved(Plan),
    Failed { reason: Terminal, steps: usize },
}

impl RunOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            RunOutcome::Solved(p) => Some(p),
            RunOutcome::Failed { .. } => None,
        }
    }
}

pub fn run_policy(params: &PolicyParams, task: &GroundTask, mode: Mode, env_cfg: &EnvConfig) -> RunOutcome {
    run_policy_with(params, task, &ConflictSet::full(task), mode, env_cfg)
}

pub fn run_policy_with(
    params: &PolicyParams,
    task: &GroundTask,
    n: &ConflictSet,
    mode: Mode,
    env_cfg: &EnvConfig,
) -> RunOutcome {
    let featurizer = Featurizer::new(task, env_cfg.degree);
    let mut rng = match mode {
        Mode::Sample { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Mode::Greedy => None,
    };
    let trace = run_episode(task, n, env_cfg, |state, actions| {
        let scores = logits(&params.weights, &featurizer.featurize_all(task, state, actions));
        match rng.as_mut() {
            None => greedy_action(&scores),
            Some(rng) => sample_action(&softmax(&scores), rng),
        }
    });
    match trace.terminal {
        Terminal::Goal => RunOutcome::Solved(Plan::new(trace.actions, format!("policy:{}", mode.name()))),
        reason => RunOutcome::Failed {
            reason,
            steps: trace.actions.len(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub name: String,
    pub solved: bool,
    pub timesteps: Option<usize>,
    pub atomic_ops: Option<usize>,
    pub parallelism_rate: Option<f64>,
    pub failure: Option<String>,
}

impl ProblemOutcome {
    pub fn from_run(name: impl Into<String>, outcome: &RunOutcome) -> Self {
        match outcome {
            RunOutcome::Solved(plan) => Self::solved(name, plan),
            RunOutcome::Failed { reason, .. } => Self {
                name: name.into(),
                solved: false,
                timesteps: None,
                atomic_ops: None,
                parallelism_rate: None,
                failure: Some(reason.as_str().to_string()),
            },
        }
    }

    pub fn solved(name: impl Into<String>, plan: &Plan) -> Self {
        Self {
            name: name.into(),
            solved: true,
            timesteps: Some(plan.timesteps()),
            atomic_ops: Some(plan.atomic_ops()),
            parallelism_rate: parallelism_rate(plan).ok(),
            failure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub problems: Vec<ProblemOutcome>,
    pub solved: usize,
    pub total: usize,
    pub coverage: Option<f64>,
    pub avg_timesteps: Option<f64>,
    pub avg_atomic_ops: Option<f64>,
    pub mean_parallelism_rate: Option<f64>,
    pub config: EnvConfig,
    pub mode: Mode,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Averages are taken over solved problems only.
pub fn aggregate(problems: Vec<ProblemOutcome>, config: EnvConfig, mode: Mode) -> EvalReport {
    let solved: Vec<&ProblemOutcome> = problems.iter().filter(|p| p.solved).collect();
    let total = problems.len();
    EvalReport {
        schema_version: 1,
        solved: solved.len(),
        total,
        coverage: (total > 0).then(|| solved.len() as f64 / total as f64),
        avg_timesteps: mean(solved.iter().filter_map(|p| p.timesteps).map(|t| t as f64)),
        avg_atomic_ops: mean(solved.iter().filter_map(|p| p.atomic_ops).map(|t| t as f64)),
        mean_parallelism_rate: mean(solved.iter().filter_map(|p| p.parallelism_rate)),
        config,
        mode,
        problems,
    }
}

/// Runs the policy on every task in parallel; problem `i` in sampling mode
/// uses stream `i` of the seed.
pub fn evaluate(
    params: &PolicyParams,
    tasks: &[(String, GroundTask)],
    mode: Mode,
    env_cfg: &EnvConfig,
) -> EvalReport {
    let problems = tasks
        .par_iter()
        .enumerate()
        .map(|(i, (name, task))| {
            let mode = match mode {
                Mode::Greedy => Mode::Greedy,
                Mode::Sample { seed } => Mode::Sample {
                    seed: seed.wrapping_add(i as u64),
                },
            };
            ProblemOutcome::from_run(name.clone(), &run_policy(params, task, mode, env_cfg))
        })
        .collect();
    aggregate(problems, env_cfg.clone(), mode)
}

/// Shallowest plan over the degree-`degree` action space, or `None` when no
/// plan exists within `depth_limit` timesteps.
pub fn bfs_solve(
    task: &GroundTask,
    degree: usize,
    depth_limit: usize,
    state_cap: usize,
) -> Result<Option<Plan>, EvalError> {
    let provenance = format!("oracle:bfs:L{degree}");
    if is_goal(task, &task.init) {
        return Ok(Some(Plan::new(Vec::new(), provenance)));
    }
    let n = ConflictSet::full(task);
    // node: (state, parent, action, depth)
    let mut nodes: Vec<(State, usize, Vec<OpId>, usize)> = vec![(task.init.clone(), usize::MAX, Vec::new(), 0)];
    let mut seen: HashMap<State, usize> = HashMap::from([(task.init.clone(), 0)]);
    let mut head = 0;
    while head < nodes.len() {
        let (state, depth) = (nodes[head].0.clone(), nodes[head].3);
        if depth < depth_limit {
            for atoms in applicable_atom_sets(task, &state, degree, &n) {
                let next = MetaAction::from_atoms(task, &atoms).apply(&state);
                if seen.contains_key(&next) {
                    continue;
                }
                if seen.len() >= state_cap {
                    return Err(EvalError::StateCap { visited: seen.len() });
                }
                let goal = is_goal(task, &next);
                seen.insert(next.clone(), nodes.len());
                nodes.push((next, head, atoms, depth + 1));
                if goal {
                    let mut steps = Vec::new();
                    let mut at = nodes.len() - 1;
                    while at != 0 {
                        steps.push(nodes[at].2.clone());
                        at = nodes[at].1;
                    }
                    steps.reverse();
                    return Ok(Some(Plan::new(steps, provenance)));
                }
            }
        }
        head += 1;
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct PlanFormatError {
    pub line: usize,
    pub message: String,
}

/// `<t>: (<op> <args>) ...`, one line per timestep, operators in id order.
pub fn format_plan(task: &GroundTask, plan: &Plan) -> String {
    let mut out = String::new();
    for (t, atoms) in plan.steps.iter().enumerate() {
        let mut sorted = atoms.clone();
        sorted.sort_unstable();
        let labels: Vec<String> = sorted.iter().map(|&a| task.operator_label(a)).collect();
        out.push_str(&format!("{t}: {}\n", labels.join(" ")));
    }
    out
}

/// Textual plan: per step, the (name, args) of each operator.
pub type RawPlan = Vec<Vec<(String, Vec<String>)>>;

fn parse_step(body: &str, line: usize) -> Result<Vec<(String, Vec<String>)>, PlanFormatError> {
    let err = |m: &str| PlanFormatError {
        line,
        message: m.to_string(),
    };
    let mut ops = Vec::new();
    let mut rest = body.trim();
    while !rest.is_empty() {
        let inner = rest.strip_prefix('(').ok_or_else(|| err("expected '('"))?;
        let close = inner.find(')').ok_or_else(|| err("missing ')'"))?;
        let mut words = inner[..close].split_whitespace().map(str::to_lowercase);
        let name = words.next().ok_or_else(|| err("empty operator"))?;
        ops.push((name, words.collect()));
        rest = inner[close + 1..].trim_start();
    }
    if ops.is_empty() {
        return Err(err("empty step"));
    }
    Ok(ops)
}

/// Parses plan text. Blank lines and `;` comments are skipped.
pub fn parse_plan(text: &str) -> Result<RawPlan, PlanFormatError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (index, body) = content.split_once(':').ok_or(PlanFormatError {
            line,
            message: "expected '<t>: (op ...)'".into(),
        })?;
        let t: usize = index.trim().parse().map_err(|_| PlanFormatError {
            line,
            message: format!("bad timestep '{}'", index.trim()),
        })?;
        if t != steps.len() {
            return Err(PlanFormatError {
                line,
                message: format!("expected timestep {} but found {t}", steps.len()),
            });
        }
        steps.push(parse_step(body, line)?);
    }
    if steps.is_empty() {
        return Err(PlanFormatError {
            line: 0,
            message: "empty plan".into(),
        });
    }
    Ok(steps)
}

/// Resolves operator names against the task's operator table.
pub fn resolve_plan(task: &GroundTask, raw: &RawPlan, provenance: &str) -> Result<Plan, PlanFormatError> {
    let index = task.operator_index();
    let steps = raw
        .iter()
        .enumerate()
        .map(|(t, ops)| {
            ops.iter()
                .map(|(name, args)| {
                    index.get(&(name.clone(), args.clone())).copied().ok_or_else(|| PlanFormatError {
                        line: t + 1,
                        message: format!("unknown operator ({name}{})", args.iter().map(|a| format!(" {a}")).collect::<String>()),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Plan::new(steps, provenance))
}

pub fn read_plan(task: &GroundTask, text: &str) -> Result<Plan, PlanFormatError> {
    resolve_plan(task, &parse_plan(text)?, "file")
}
