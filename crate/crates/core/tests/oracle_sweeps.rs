use std::collections::BTreeSet;

use metaplan::evalkit::{bfs_solve, validate_plan, DEFAULT_STATE_CAP};
use metaplan::generators::{generate, DomainKind, GenSpec};
use metaplan::grounding::{ground, reachability_prune, GroundTask};
use metaplan::pddl::{parse_domain, parse_problem};

fn solve_all(spec: &GenSpec, depth: usize, n: u64) {
    for i in 0..n {
        let inst = generate(spec, i).unwrap();
        let task = ground(&inst.domain, &inst.problem).unwrap();
        let plan = bfs_solve(&task, 1, depth, DEFAULT_STATE_CAP)
            .unwrap()
            .unwrap_or_else(|| panic!("{} instance {i} unsolved within depth {depth}", spec.kind));
        validate_plan(&task, &plan, 1).unwrap();
    }
}

#[test]
fn small_multiblocks_instances_are_solvable() {
    let spec = GenSpec::custom(DomainKind::Multiblocks, &[("blocks", 3, 4), ("arms", 1, 2)], 11).unwrap();
    solve_all(&spec, 20, 100);
}

#[test]
fn small_logistics_instances_are_solvable() {
    let spec = GenSpec::custom(
        DomainKind::Logistics,
        &[("cities", 1, 2), ("trucks", 1, 2), ("locations", 1, 2), ("packages", 1, 1)],
        12,
    )
    .unwrap();
    solve_all(&spec, 20, 100);
}

#[test]
fn minimal_depots_instances_are_solvable() {
    let spec = GenSpec::custom(DomainKind::Depots, &[("pallets", 2, 2), ("hoists", 2, 2)], 13).unwrap();
    solve_all(&spec, 15, 100);
}

const BLOCKS: &str = "(define (domain bw) (:requirements :strips)
  (:predicates (on ?x ?y) (ontable ?x) (clear ?x) (holding ?x) (handempty))
  (:action pick-up :parameters (?x)
    :precondition (and (clear ?x) (ontable ?x) (handempty))
    :effect (and (not (ontable ?x)) (not (clear ?x)) (not (handempty)) (holding ?x)))
  (:action put-down :parameters (?x)
    :precondition (holding ?x)
    :effect (and (not (holding ?x)) (clear ?x) (handempty) (ontable ?x)))
  (:action stack :parameters (?x ?y)
    :precondition (and (holding ?x) (clear ?y))
    :effect (and (not (holding ?x)) (not (clear ?y)) (clear ?x) (handempty) (on ?x ?y)))
  (:action unstack :parameters (?x ?y)
    :precondition (and (on ?x ?y) (clear ?x) (handempty))
    :effect (and (holding ?x) (clear ?y) (not (clear ?x)) (not (handempty)) (not (on ?x ?y)))))";

#[test]
fn two_block_stacking_takes_two_steps() {
    let d = parse_domain(BLOCKS).unwrap();
    let p = parse_problem(
        "(define (problem two) (:domain bw) (:objects a b)
           (:init (ontable a) (ontable b) (clear a) (clear b) (handempty))
           (:goal (on a b)))",
    )
    .unwrap();
    let task = ground(&d, &p).unwrap();
    let plan = bfs_solve(&task, 1, 10, DEFAULT_STATE_CAP).unwrap().unwrap();
    let labels: Vec<String> = plan.steps.iter().map(|s| task.operator_label(s[0])).collect();
    assert_eq!(labels, vec!["(pick-up a)", "(stack a b)"]);
}

#[test]
fn single_city_logistics_is_solved() {
    let d = DomainKind::Logistics.domain();
    let p = parse_problem(
        "(define (problem one) (:domain logistics)
           (:objects c - city a - airport l - location t - truck p - package)
           (:init (in-city a c) (in-city l c) (at t a) (at p a))
           (:goal (at p l)))",
    )
    .unwrap();
    let task = ground(&d, &p).unwrap();
    let plan = bfs_solve(&task, 1, 10, DEFAULT_STATE_CAP).unwrap().unwrap();
    assert_eq!(plan.timesteps(), 3);
}

#[test]
fn makespan_never_grows_with_degree() {
    let spec = GenSpec::custom(DomainKind::Multiblocks, &[("blocks", 3, 3), ("arms", 2, 2)], 5).unwrap();
    for i in 0..20 {
        let inst = generate(&spec, i).unwrap();
        let task = ground(&inst.domain, &inst.problem).unwrap();
        let l1 = bfs_solve(&task, 1, 20, DEFAULT_STATE_CAP).unwrap().unwrap();
        let l2 = bfs_solve(&task, 2, 20, DEFAULT_STATE_CAP).unwrap().unwrap();
        validate_plan(&task, &l2, 2).unwrap();
        assert!(l2.timesteps() <= l1.timesteps());
    }
}

/// Naive fixpoint: sweep all operators until no new fact appears.
fn reachable_operator_labels(task: &GroundTask) -> BTreeSet<String> {
    let mut facts: BTreeSet<usize> = task.init.iter().collect();
    loop {
        let before = facts.len();
        for op in &task.operators {
            if op.pre.iter().all(|f| facts.contains(f)) {
                facts.extend(op.add.iter().copied());
            }
        }
        if facts.len() == before {
            break;
        }
    }
    task.operators
        .iter()
        .filter(|op| op.pre.iter().all(|f| facts.contains(f)))
        .map(|op| task.operator_label(op.id))
        .collect()
}

#[test]
fn pruning_matches_naive_fixpoint_on_train_logistics() {
    let spec = GenSpec::preset(DomainKind::Logistics, metaplan::generators::Preset::Train, 2).unwrap();
    for i in 0..5 {
        let inst = generate(&spec, i).unwrap();
        let task = ground(&inst.domain, &inst.problem).unwrap();
        let expected = reachable_operator_labels(&task);
        let pruned = reachability_prune(&task);
        let got: BTreeSet<String> = (0..pruned.num_operators()).map(|op| pruned.operator_label(op)).collect();
        assert_eq!(got, expected);
        assert!(pruned.num_operators() < task.num_operators());
        // pruning keeps the problem solvable with the same optimal length
        let a = bfs_solve(&task, 1, 12, DEFAULT_STATE_CAP);
        let b = bfs_solve(&pruned, 1, 12, DEFAULT_STATE_CAP);
        if let (Ok(a), Ok(b)) = (a, b) {
            assert_eq!(a.map(|p| p.timesteps()), b.map(|p| p.timesteps()));
        }
    }
}
