use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use metaplan::env::EnvConfig;
use metaplan::evalkit::{
    bfs_solve, evaluate, format_plan, parallelism_rate, parse_plan, resolve_plan, validate_plan, Mode, Plan,
};
use metaplan::generators::{generate, generate_grid, DomainKind, GenError, GenSpec, Instance, Preset};
use metaplan::grounding::{self, reachability_prune, GroundTask};
use metaplan::meta_ops::{action_space_stats, applicable_atom_sets, ConflictSet};
use metaplan::pddl::{domain_to_string, parse_domain, parse_problem, problem_to_string, DomainAst};
use metaplan::policy::{train_from, Checkpoint, CurvePoint, PolicyError, PolicyParams};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{ActionsArgs, EvalArgs, GenArgs, ProblemSet, RateArgs, SolveArgs, TaskArgs, TrainArgs, ValidateArgs};

const DEFAULT_OUT: &str = "metaplan-out";

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load_domain(path: &Path) -> CliResult<DomainAst> {
    parse_domain(&read(path)?).map_err(|e| CliError::runtime(e.in_file(path.display().to_string()).to_string()))
}

fn load_problem(domain: &DomainAst, path: &Path, prune: bool) -> CliResult<GroundTask> {
    let problem = parse_problem(&read(path)?)
        .map_err(|e| CliError::runtime(e.in_file(path.display().to_string()).to_string()))?;
    let task = grounding::ground(domain, &problem).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    Ok(if prune { reachability_prune(&task) } else { task })
}

fn load_task(args: &TaskArgs) -> CliResult<GroundTask> {
    load_problem(&load_domain(&args.domain)?, &args.problem, args.prune)
}

fn check_degree(degree: usize) -> CliResult {
    if degree == 0 {
        return Err(CliError::usage("degree must be ≥ 1"));
    }
    Ok(())
}

fn problem_files(set: &ProblemSet) -> CliResult<(PathBuf, Vec<PathBuf>)> {
    let domain = set.domain.clone().unwrap_or_else(|| set.problems.join("domain.pddl"));
    let entries = fs::read_dir(&set.problems)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", set.problems.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pddl"))
        .filter(|p| p.file_name() != domain.file_name())
        .collect();
    files.sort();
    Ok((domain, files))
}

fn load_set(set: &ProblemSet) -> CliResult<Vec<(String, GroundTask)>> {
    let (domain_path, files) = problem_files(set)?;
    if files.is_empty() {
        return Ok(Vec::new());
    }
    let domain = load_domain(&domain_path)?;
    files
        .iter()
        .map(|f| {
            let name = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, load_problem(&domain, f, set.prune)?))
        })
        .collect()
}

fn parse_range(text: &str) -> CliResult<(String, u32, u32)> {
    let bad = || CliError::usage(format!("bad range '{text}', expected KEY=LO..HI or KEY=N"));
    let (key, value) = text.split_once('=').ok_or_else(bad)?;
    let (lo, hi) = value.split_once("..").unwrap_or((value, value));
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    Ok((key.trim().to_string(), lo, hi))
}

fn gen_error(e: GenError) -> CliError {
    CliError::usage(e.to_string())
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    file: String,
    stream: u64,
    counts: &'a metaplan::generators::Counts,
}

pub fn gen(args: GenArgs, cfg: &RunConfig) -> CliResult {
    let kind = DomainKind::from_str(&args.domain).map_err(gen_error)?;
    let preset = Preset::from_str(&args.preset).map_err(gen_error)?;
    let mut spec = match preset {
        Preset::Custom => GenSpec::custom(kind, &[], args.seed).map_err(gen_error)?,
        p => GenSpec::preset(kind, p, args.seed).map_err(gen_error)?,
    };
    for r in &args.ranges {
        let (key, lo, hi) = parse_range(r)?;
        spec.ranges.insert(key, (lo, hi));
        spec.preset = Preset::Custom;
    }
    spec.validate().map_err(gen_error)?;

    let instances: Vec<Instance> = match args.per_config {
        Some(n) => generate_grid(&spec, n).map_err(gen_error)?,
        None => (0..args.count as u64)
            .map(|i| generate(&spec, i))
            .collect::<Result<_, _>>()
            .map_err(gen_error)?,
    };
    let out = args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into());
    write(&out.join("domain.pddl"), &domain_to_string(&kind.domain()))?;
    let width = instances.len().saturating_sub(1).to_string().len().max(2);
    let mut entries = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let file = format!("p{i:0width$}.pddl");
        write(&out.join(&file), &problem_to_string(&inst.problem))?;
        entries.push(ManifestEntry {
            file,
            stream: inst.stream,
            counts: &inst.counts,
        });
    }
    let manifest = json!({
        "schema_version": 1,
        "spec": spec,
        "sampling": if args.per_config.is_some() { "grid" } else { "uniform" },
        "count": entries.len(),
        "problems": entries,
    });
    write(&out.join("manifest.json"), &to_json(&manifest))?;
    eprintln!("wrote {} problems to {}", instances.len(), out.display());
    Ok(())
}

pub fn actions(args: ActionsArgs) -> CliResult {
    check_degree(args.degree)?;
    let task = load_task(&args.task)?;
    let n = ConflictSet::full(&task);
    let sets = applicable_atom_sets(&task, &task.init, args.degree, &n);
    let stats = action_space_stats(sets.iter().map(Vec::as_slice));
    let listed: Vec<_> = sets
        .iter()
        .map(|atoms| {
            json!({
                "degree": atoms.len(),
                "operators": atoms.iter().map(|&a| task.operator_label(a)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let report = json!({
        "schema_version": 1,
        "degree": args.degree,
        "total": stats.total,
        "histogram": stats.by_degree,
        "actions": listed,
    });
    print!("{}", to_json(&report));
    Ok(())
}

fn policy_error(e: PolicyError) -> CliError {
    match e {
        PolicyError::Config(_) | PolicyError::Env(_) => CliError::usage(e.to_string()),
        other => CliError::runtime(format!("training aborted: {other}")),
    }
}

fn curve_lines(curve: &[CurvePoint]) -> String {
    curve
        .iter()
        .map(|p| serde_json::to_string(p).expect("serializable") + "\n")
        .collect()
}

pub fn train(args: TrainArgs, cfg: &RunConfig) -> CliResult {
    let mut env = cfg.env.clone();
    args.env.apply(&mut env);
    let mut train_cfg = cfg.train.clone();
    args.train.apply(&mut train_cfg);
    env.seed = train_cfg.seed;
    env.validate().map_err(|e| CliError::usage(e.to_string()))?;
    train_cfg.validate().map_err(policy_error)?;

    let tasks = load_set(&args.set)?;
    if tasks.is_empty() {
        return Err(CliError::usage(format!("no problem files in {}", args.set.problems.display())));
    }
    let tasks: Vec<GroundTask> = tasks.into_iter().map(|(_, t)| t).collect();
    let out = args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into());

    let sweep = args.sweep_meta_reward.clone();
    let rewards = sweep.clone().unwrap_or_else(|| vec![env.meta_reward]);
    let mut summary = Vec::new();
    for r in rewards {
        let run_env = EnvConfig {
            meta_reward: r,
            ..env.clone()
        };
        run_env.validate().map_err(|e| CliError::usage(e.to_string()))?;
        let dir = match &sweep {
            Some(_) => out.join(format!("meta-reward-{r}")),
            None => out.clone(),
        };
        let quiet = args.quiet;
        let (params, curve) = train_from(&tasks, &run_env, &train_cfg, PolicyParams::default(), |p| {
            if !quiet && (p.iteration + 1) % 10 == 0 {
                eprintln!(
                    "iter {:>4}  return {:.3}  coverage {:.3}  parallelism {}",
                    p.iteration + 1,
                    p.mean_return,
                    p.coverage,
                    p.mean_parallelism.map_or("-".into(), |v| format!("{v:.3}"))
                );
            }
        })
        .map_err(policy_error)?;
        let checkpoint = Checkpoint::new(params, run_env.clone(), train_cfg.clone());
        write(&dir.join("checkpoint.json"), &to_json(&checkpoint))?;
        write(&dir.join("curve.jsonl"), &curve_lines(&curve))?;
        let last = curve.last();
        summary.push(json!({
            "meta_reward": r,
            "dir": dir.display().to_string(),
            "final_coverage": last.map(|p| p.coverage),
            "final_mean_parallelism": last.and_then(|p| p.mean_parallelism),
        }));
        eprintln!("wrote {}", dir.join("checkpoint.json").display());
    }
    if sweep.is_some() {
        let report = json!({ "schema_version": 1, "env": env, "train": train_cfg, "runs": summary });
        write(&out.join("sweep.json"), &to_json(&report))?;
    }
    Ok(())
}

pub fn eval(args: EvalArgs, _cfg: &RunConfig) -> CliResult {
    let checkpoint: Checkpoint = serde_json::from_str(&read(&args.checkpoint)?)
        .map_err(|e| CliError::runtime(format!("{}: {e}", args.checkpoint.display())))?;
    checkpoint
        .check()
        .map_err(|e| CliError::runtime(format!("{}: {e}", args.checkpoint.display())))?;
    let mut env = checkpoint.env.clone();
    args.env.apply(&mut env);
    env.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let mode = if args.sample {
        Mode::Sample { seed: args.seed }
    } else {
        Mode::Greedy
    };
    let tasks = load_set(&args.set)?;
    let report = evaluate(&checkpoint.params, &tasks, mode, &env);
    let text = to_json(&report);
    match &args.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_plan_file(task: &GroundTask, path: &Path) -> CliResult<Plan> {
    let text = read(path)?;
    let raw = parse_plan(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    resolve_plan(task, &raw, "file").map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn validate(args: ValidateArgs) -> CliResult {
    check_degree(args.degree)?;
    let task = load_task(&args.task)?;
    let plan = read_plan_file(&task, &args.plan)?;
    match validate_plan(&task, &plan, args.degree) {
        Ok(_) => {
            println!("VALID");
            Ok(())
        }
        Err(e) => {
            println!("INVALID {e}");
            Err(CliError::invalid(String::new()))
        }
    }
}

pub fn rate(args: RateArgs) -> CliResult {
    let text = read(&args.plan)?;
    let raw = parse_plan(&text).map_err(|e| CliError::usage(format!("{}: {e}", args.plan.display())))?;
    let plan = Plan::new(raw.iter().map(|ops| (0..ops.len()).collect()).collect(), "file");
    let rate = parallelism_rate(&plan).map_err(|e| CliError::usage(e.to_string()))?;
    println!("{rate:.3}");
    Ok(())
}

pub fn solve(args: SolveArgs) -> CliResult {
    check_degree(args.degree)?;
    let task = load_task(&args.task)?;
    let plan = bfs_solve(&task, args.degree, args.depth, args.state_cap)
        .map_err(|e| CliError::runtime(e.to_string()))?
        .ok_or_else(|| CliError::runtime(format!("no plan within depth {}", args.depth)))?;
    let text = format_plan(&task, &plan);
    match &args.out {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn ground(args: TaskArgs) -> CliResult {
    let task = load_task(&args)?;
    println!("{}", task.to_json());
    Ok(())
}
