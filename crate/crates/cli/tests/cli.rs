use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn metaplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metaplan"))
        .args(args)
        .env_remove("METAPLAN_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SWITCHES: &str = "(define (domain switches) (:requirements :strips)
  (:predicates (off ?x) (on ?x))
  (:action turn-on :parameters (?x) :precondition (off ?x) :effect (and (on ?x) (not (off ?x)))))";

fn switches(dir: &Path, k: usize) -> (String, String) {
    let objects: Vec<String> = (0..k).map(|i| format!("s{i}")).collect();
    let init: String = objects.iter().map(|o| format!("(off {o})")).collect();
    let goal: String = objects.iter().map(|o| format!("(on {o})")).collect();
    let domain = dir.join("switches.pddl");
    let problem = dir.join(format!("sw{k}.pddl"));
    fs::write(&domain, SWITCHES).unwrap();
    fs::write(
        &problem,
        format!("(define (problem sw) (:domain switches) (:objects {}) (:init {init}) (:goal (and {goal})))", objects.join(" ")),
    )
    .unwrap();
    (s(&domain).to_string(), s(&problem).to_string())
}

fn gen_blocks(out: &Path, blocks: &str, arms: &str, count: &str, seed: &str) {
    let o = metaplan(&[
        "gen", "--domain", "multiblocks", "--preset", "custom", "--range", blocks, "--range", arms, "--count", count,
        "--seed", seed, "--out", s(out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn gen_writes_problems_domain_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("set");
    let o = metaplan(&["gen", "--domain", "logistics", "--preset", "train", "--count", "5", "--seed", "7", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["domain.pddl", "manifest.json", "p00.pddl", "p01.pddl", "p02.pddl", "p03.pddl", "p04.pddl"]);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["count"], 5);
    assert_eq!(manifest["spec"]["seed"], 7);
}

#[test]
fn gen_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = metaplan(&["gen", "--domain", "depots", "--preset", "test", "--count", "10", "--seed", "1", "--out", s(&out)]);
        assert_eq!(code(&o), 0);
    }
    for e in fs::read_dir(tmp.path().join("a")).unwrap() {
        let name = e.unwrap().file_name();
        assert_eq!(fs::read(tmp.path().join("a").join(&name)).unwrap(), fs::read(tmp.path().join("b").join(&name)).unwrap());
    }
}

#[test]
fn gen_rejects_bad_presets_and_ranges() {
    let o = metaplan(&["gen", "--domain", "logistics", "--preset", "huge"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("huge"), "{}", stderr(&o));
    let o = metaplan(&["gen", "--domain", "multiblocks", "--preset", "custom", "--range", "blocks=5..2"]);
    assert_eq!(code(&o), 2);
    let o = metaplan(&["gen", "--domain", "multiblocks", "--range", "blocks"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn actions_counts_singletons_and_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, p) = switches(tmp.path(), 4);
    let o = metaplan(&["actions", "--domain", &d, "--problem", &p, "-L", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["total"], 10);
    assert_eq!(report["histogram"]["1"], 4);
    assert_eq!(report["histogram"]["2"], 6);

    let (d, p) = switches(tmp.path(), 1);
    let report: Value = serde_json::from_str(&stdout(&metaplan(&["actions", "--domain", &d, "--problem", &p]))).unwrap();
    assert_eq!(report["total"], 1);
    assert_eq!(report["histogram"], serde_json::json!({"1": 1}));

    let o = metaplan(&["actions", "--domain", &d, "--problem", &p, "-L", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("degree must be ≥ 1"));
}

#[test]
fn actions_reports_parse_errors_as_runtime_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, _) = switches(tmp.path(), 1);
    let bad = tmp.path().join("bad.pddl");
    fs::write(&bad, "(define (problem x) (:domain switches) (:init (off a)").unwrap();
    let o = metaplan(&["actions", "--domain", &d, "--problem", s(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bad.pddl"), "{}", stderr(&o));
}

#[test]
fn train_zero_iterations_keeps_initial_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("set");
    gen_blocks(&set, "blocks=3", "arms=1", "2", "0");
    let out = tmp.path().join("run");
    let o = metaplan(&["train", "--problems", s(&set), "--iterations", "0", "--out", s(&out), "-q"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ckpt = json(&out.join("checkpoint.json"));
    let weights = ckpt["params"]["weights"].as_array().unwrap();
    assert!(!weights.is_empty());
    assert!(weights.iter().all(|w| w.as_f64() == Some(0.0)));
    assert_eq!(fs::read_to_string(out.join("curve.jsonl")).unwrap(), "");
}

#[test]
fn train_and_eval_are_deterministic_and_labelled() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("set");
    gen_blocks(&set, "blocks=3..4", "arms=2", "3", "2");
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = metaplan(&[
            "train", "--problems", s(&set), "--iterations", "10", "--episodes", "8", "--seed", "5", "--out", s(&out), "-q",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for file in ["checkpoint.json", "curve.jsonl"] {
        assert_eq!(fs::read(tmp.path().join("a").join(file)).unwrap(), fs::read(tmp.path().join("b").join(file)).unwrap());
    }
    let ckpt = tmp.path().join("a/checkpoint.json");
    let greedy = metaplan(&["eval", "--checkpoint", s(&ckpt), "--problems", s(&set), "--greedy"]);
    let sample = metaplan(&["eval", "--checkpoint", s(&ckpt), "--problems", s(&set), "--sample", "--seed", "3"]);
    let again = metaplan(&["eval", "--checkpoint", s(&ckpt), "--problems", s(&set), "--sample", "--seed", "3"]);
    assert_eq!(code(&greedy), 0);
    assert_eq!(stdout(&sample), stdout(&again));
    let g: Value = serde_json::from_str(&stdout(&greedy)).unwrap();
    let r: Value = serde_json::from_str(&stdout(&sample)).unwrap();
    assert_eq!(g["mode"]["mode"], "greedy");
    assert_eq!(r["mode"]["mode"], "sample");
    assert_eq!(r["mode"]["seed"], 3);
    assert_eq!(g["total"], 3);
    assert_eq!(g["config"]["seed"], 5);
}

#[test]
fn eval_on_empty_directory_reports_zero_of_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("set");
    gen_blocks(&set, "blocks=3", "arms=1", "1", "0");
    let run = tmp.path().join("run");
    assert_eq!(code(&metaplan(&["train", "--problems", s(&set), "--iterations", "0", "--out", s(&run), "-q"])), 0);
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = metaplan(&["eval", "--checkpoint", s(&run.join("checkpoint.json")), "--problems", s(&empty)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["solved"], 0);
    assert_eq!(report["total"], 0);
    assert!(report["coverage"].is_null());
}

#[test]
fn eval_missing_checkpoint_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = metaplan(&["eval", "--checkpoint", s(&tmp.path().join("nope.json")), "--problems", s(tmp.path())]);
    assert_eq!(code(&o), 1);
}

#[test]
fn train_on_empty_directory_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = metaplan(&["train", "--problems", s(tmp.path()), "-q"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn trained_checkpoint_solves_small_block_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("set");
    gen_blocks(&set, "blocks=3", "arms=1", "4", "3");
    let run = tmp.path().join("run");
    let o = metaplan(&["train", "--problems", s(&set), "-L", "1", "--out", s(&run), "-q"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let curve = fs::read_to_string(run.join("curve.jsonl")).unwrap();
    let last: Value = serde_json::from_str(curve.lines().last().unwrap()).unwrap();
    assert_eq!(last["coverage"], 1.0);

    let o = metaplan(&["eval", "--checkpoint", s(&run.join("checkpoint.json")), "--problems", s(&set)]);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["coverage"], 1.0, "{report}");
    for (i, problem) in report["problems"].as_array().unwrap().iter().enumerate() {
        let bfs = metaplan(&[
            "solve", "--domain", s(&set.join("domain.pddl")), "--problem", s(&set.join(format!("p{i:02}.pddl"))),
        ]);
        let optimal = stdout(&bfs).lines().count() as u64;
        assert!(problem["timesteps"].as_u64().unwrap() >= optimal);
    }
}

#[test]
fn sweep_writes_one_run_per_reward() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("set");
    gen_blocks(&set, "blocks=3", "arms=2", "2", "1");
    let out = tmp.path().join("sweep");
    let o = metaplan(&[
        "train", "--problems", s(&set), "--iterations", "2", "--episodes", "4", "--sweep-meta-reward", "0,0.01", "--out",
        s(&out), "-q",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = json(&out.join("sweep.json"));
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    let ckpt = json(&out.join("meta-reward-0.01/checkpoint.json"));
    assert_eq!(ckpt["env"]["meta_reward"], 0.01);
    assert!(out.join("meta-reward-0/checkpoint.json").exists());
}

#[test]
fn config_file_values_apply_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("set");
    gen_blocks(&set, "blocks=3", "arms=1", "1", "0");
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[env]\nmax_steps = 7\nmeta_reward = 0.5\n\n[train]\niterations = 1\nepisodes_per_iteration = 2\nseed = 9\n")
        .unwrap();
    let out = tmp.path().join("run");
    let o = metaplan(&["--config", s(&cfg), "train", "--problems", s(&set), "--meta-reward", "0.25", "--out", s(&out), "-q"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ckpt = json(&out.join("checkpoint.json"));
    assert_eq!(ckpt["env"]["max_steps"], 7);
    assert_eq!(ckpt["env"]["meta_reward"], 0.25);
    assert_eq!(ckpt["train"]["seed"], 9);
    assert_eq!(fs::read_to_string(out.join("curve.jsonl")).unwrap().lines().count(), 1);

    fs::write(&cfg, "[env]\nbogus = 1\n").unwrap();
    let o = metaplan(&["--config", s(&cfg), "train", "--problems", s(&set), "-q"]);
    assert_eq!(code(&o), 2);
}

fn stack_task(dir: &Path) -> (String, String, String) {
    let set = dir.join("blocks");
    gen_blocks(&set, "blocks=3", "arms=2", "1", "0");
    let domain = set.join("domain.pddl");
    let problem = set.join("p00.pddl");
    let plan = dir.join("oracle.plan");
    let o = metaplan(&["solve", "--domain", s(&domain), "--problem", s(&problem), "-L", "2", "--out", s(&plan)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    (s(&domain).into(), s(&problem).into(), s(&plan).into())
}

#[test]
fn validate_accepts_oracle_plans_and_reports_causes() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, p, plan) = stack_task(tmp.path());
    let o = metaplan(&["validate", "--domain", &d, "--problem", &p, "--plan", &plan]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).trim(), "VALID");

    let text = fs::read_to_string(&plan).unwrap();
    let first = text.lines().next().unwrap();
    let op = &first[first.find('(').unwrap()..first.find(')').unwrap() + 1];
    let bad = tmp.path().join("conflict.plan");
    fs::write(&bad, text.replacen(first, &format!("0: {op} {op}"), 1)).unwrap();
    let o = metaplan(&["validate", "--domain", &d, "--problem", &p, "--plan", s(&bad)]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).starts_with("INVALID step 0: conflict"), "{}", stdout(&o));

    let truncated = tmp.path().join("short.plan");
    let lines: Vec<&str> = text.lines().collect();
    fs::write(&truncated, lines[..lines.len() - 1].join("\n")).unwrap();
    let o = metaplan(&["validate", "--domain", &d, "--problem", &p, "--plan", s(&truncated)]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("goal_unsatisfied"), "{}", stdout(&o));
}

#[test]
fn validate_rejects_malformed_plan_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, p, _) = stack_task(tmp.path());
    let bad = tmp.path().join("bad.plan");
    fs::write(&bad, "0: (pick-up b0 arm0\n").unwrap();
    let o = metaplan(&["validate", "--domain", &d, "--problem", &p, "--plan", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing ')'"), "{}", stderr(&o));
    fs::write(&bad, "0: (teleport b0)\n").unwrap();
    let o = metaplan(&["validate", "--domain", &d, "--problem", &p, "--plan", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown operator"), "{}", stderr(&o));
}

#[test]
fn rate_prints_three_decimals() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = tmp.path().join("p.plan");
    let seq: String = (0..10).map(|t| format!("{t}: (op x{t})\n")).collect();
    fs::write(&plan, &seq).unwrap();
    assert_eq!(stdout(&metaplan(&["rate", "--plan", s(&plan)])), "0.000\n");

    let mixed: String = (0..10)
        .map(|t| if t < 3 { format!("{t}: (op x{t}) (op y{t})\n") } else { format!("{t}: (op x{t})\n") })
        .collect();
    fs::write(&plan, mixed).unwrap();
    assert_eq!(stdout(&metaplan(&["rate", "--plan", s(&plan)])), "0.300\n");

    fs::write(&plan, "").unwrap();
    let o = metaplan(&["rate", "--plan", s(&plan)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("empty plan"), "{}", stderr(&o));
}

#[test]
fn ground_prints_task_json() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, p) = switches(tmp.path(), 3);
    let o = metaplan(&["ground", "--domain", &d, "--problem", &p]);
    assert_eq!(code(&o), 0);
    let task: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(task["operators"].as_array().unwrap().len(), 3);
    assert_eq!(task["goal"].as_array().unwrap().len(), 3);
}
