//! Grounding of lifted schemas and predicates into a STRIPS task.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{check_compat, Atom, Diagnostic, DomainAst, ProblemAst};
use crate::transition::State;

pub type FactId = usize;
pub type OpId = usize;

pub const DEFAULT_MAX_OPERATORS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub predicate: String,
    pub args: Vec<String>,
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSignature {
    pub name: String,
    pub params: Vec<String>,
}

/// A ground operator. `pre`, `add` and `del` are sorted and duplicate-free,
/// and `add ∩ del = ∅`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundOperator {
    pub id: OpId,
    pub schema: usize,
    pub args: Vec<String>,
    pub pre: Vec<FactId>,
    pub add: Vec<FactId>,
    pub del: Vec<FactId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTask {
    pub domain_name: String,
    pub problem_name: String,
    pub schemas: Vec<SchemaSignature>,
    pub facts: Vec<Fact>,
    pub operators: Vec<GroundOperator>,
    pub init: State,
    pub goal: Vec<FactId>,
}

impl GroundTask {
    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn num_operators(&self) -> usize {
        self.operators.len()
    }

    pub fn schema_name(&self, op: OpId) -> &str {
        &self.schemas[self.operators[op].schema].name
    }

    /// `(name arg1 arg2 ...)`
    pub fn operator_label(&self, op: OpId) -> String {
        let o = &self.operators[op];
        let mut out = format!("({}", self.schemas[o.schema].name);
        for a in &o.args {
            out.push(' ');
            out.push_str(a);
        }
        out.push(')');
        out
    }

    /// Parameter → object pairs of an operator.
    pub fn binding(&self, op: OpId) -> Vec<(&str, &str)> {
        let o = &self.operators[op];
        self.schemas[o.schema]
            .params
            .iter()
            .zip(&o.args)
            .map(|(p, a)| (p.as_str(), a.as_str()))
            .collect()
    }

    /// Looks an operator up by schema name and arguments.
    pub fn operator_index(&self) -> HashMap<(String, Vec<String>), OpId> {
        self.operators
            .iter()
            .map(|o| ((self.schemas[o.schema].name.clone(), o.args.clone()), o.id))
            .collect()
    }

    pub fn dump(&self) -> TaskDump {
        TaskDump {
            schema_version: 1,
            domain: self.domain_name.clone(),
            problem: self.problem_name.clone(),
            facts: self.facts.iter().map(ToString::to_string).collect(),
            operators: self
                .operators
                .iter()
                .map(|o| OperatorDump {
                    id: o.id,
                    name: self.operator_label(o.id),
                    pre: o.pre.clone(),
                    add: o.add.clone(),
                    del: o.del.clone(),
                })
                .collect(),
            init: self.init.iter().collect(),
            goal: self.goal.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.dump()).expect("task dump serializes")
    }
}

/// Interchange form of a ground task: facts, operator triplets as index
/// arrays, initial state and goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDump {
    pub schema_version: u32,
    pub domain: String,
    pub problem: String,
    pub facts: Vec<String>,
    pub operators: Vec<OperatorDump>,
    pub init: Vec<FactId>,
    pub goal: Vec<FactId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorDump {
    pub id: OpId,
    pub name: String,
    pub pre: Vec<FactId>,
    pub add: Vec<FactId>,
    pub del: Vec<FactId>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundError {
    #[error("problem does not match domain: {}", join_diagnostics(.0))]
    Incompatible(Vec<Diagnostic>),
    #[error("grounding would produce {count} operators, above the cap of {cap}")]
    Capacity { count: u128, cap: usize },
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.message.as_str()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy)]
pub struct GroundingOptions {
    pub max_operators: usize,
}

impl Default for GroundingOptions {
    fn default() -> Self {
        Self {
            max_operators: DEFAULT_MAX_OPERATORS,
        }
    }
}

pub fn ground(domain: &DomainAst, problem: &ProblemAst) -> Result<GroundTask, GroundError> {
    ground_with(domain, problem, &GroundingOptions::default())
}

struct FactTable {
    predicates: HashMap<String, usize>,
    index: HashMap<(usize, Vec<usize>), FactId>,
    facts: Vec<Fact>,
}

impl FactTable {
    fn intern(&mut self, predicate: &str, args: Vec<usize>, objects: &[String]) -> FactId {
        let next = self.predicates.len();
        let pred = *self.predicates.entry(predicate.to_string()).or_insert(next);
        let facts = &mut self.facts;
        *self.index.entry((pred, args)).or_insert_with_key(|(_, args)| {
            facts.push(Fact {
                predicate: predicate.to_string(),
                args: args.iter().map(|&o| objects[o].clone()).collect(),
            });
            facts.len() - 1
        })
    }
}

/// Literal of a schema with arguments given as parameter positions.
struct CompiledLiteral<'a> {
    predicate: &'a str,
    params: Vec<usize>,
}

fn compile<'a>(atoms: &'a [Atom], params: &[String]) -> Vec<CompiledLiteral<'a>> {
    atoms
        .iter()
        .map(|a| CompiledLiteral {
            predicate: &a.predicate,
            params: a
                .args
                .iter()
                .map(|v| params.iter().position(|p| p == v).expect("parser checks bound variables"))
                .collect(),
        })
        .collect()
}

pub fn ground_with(
    domain: &DomainAst,
    problem: &ProblemAst,
    opts: &GroundingOptions,
) -> Result<GroundTask, GroundError> {
    let diags = check_compat(domain, problem);
    if !diags.is_empty() {
        return Err(GroundError::Incompatible(diags));
    }
    let hierarchy = domain.type_hierarchy();

    // Objects sorted by name; bindings are enumerated lexicographically over
    // this order.
    let mut objects: Vec<(String, String)> = problem
        .objects
        .iter()
        .map(|o| (o.name.clone(), o.ty.clone()))
        .collect();
    objects.sort();
    let names: Vec<String> = objects.iter().map(|(n, _)| n.clone()).collect();
    let object_index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let candidates: Vec<Vec<Vec<usize>>> = domain
        .schemas
        .iter()
        .map(|s| {
            s.params
                .iter()
                .map(|p| {
                    objects
                        .iter()
                        .enumerate()
                        .filter(|(_, (_, ty))| hierarchy.is_subtype(ty, &p.ty))
                        .map(|(i, _)| i)
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut total: u128 = 0;
    for per_param in &candidates {
        total += per_param.iter().map(|c| c.len() as u128).product::<u128>();
    }
    if total > opts.max_operators as u128 {
        return Err(GroundError::Capacity {
            count: total,
            cap: opts.max_operators,
        });
    }

    let mut table = FactTable {
        predicates: HashMap::new(),
        index: HashMap::new(),
        facts: Vec::new(),
    };
    let ground_atoms = |atoms: &[Atom], table: &mut FactTable| -> Vec<FactId> {
        atoms
            .iter()
            .map(|a| {
                let args = a.args.iter().map(|n| object_index[n.as_str()]).collect();
                table.intern(&a.predicate, args, &names)
            })
            .collect()
    };
    let init_facts = ground_atoms(&problem.init, &mut table);
    let mut goal = ground_atoms(&problem.goal, &mut table);
    goal.sort_unstable();
    goal.dedup();

    let mut schemas = Vec::with_capacity(domain.schemas.len());
    let mut operators = Vec::with_capacity(total as usize);
    for (schema_idx, (schema, per_param)) in domain.schemas.iter().zip(&candidates).enumerate() {
        let params: Vec<String> = schema.params.iter().map(|p| p.name.clone()).collect();
        let pre = compile(&schema.pre, &params);
        let add = compile(&schema.add, &params);
        let del = compile(&schema.del, &params);
        schemas.push(SchemaSignature {
            name: schema.name.clone(),
            params,
        });
        if per_param.iter().any(Vec::is_empty) {
            continue;
        }

        let mut choice = vec![0usize; per_param.len()];
        loop {
            let binding: Vec<usize> = choice.iter().zip(per_param).map(|(&c, cands)| cands[c]).collect();
            let mut instantiate = |lits: &[CompiledLiteral]| -> Vec<FactId> {
                let mut out: Vec<FactId> = lits
                    .iter()
                    .map(|l| table.intern(l.predicate, l.params.iter().map(|&p| binding[p]).collect(), &names))
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            };
            let op_pre = instantiate(&pre);
            let op_add = instantiate(&add);
            let mut op_del = instantiate(&del);
            // A binding that makes an add and a delete coincide keeps the
            // fact: (s \ del) ∪ add is unchanged by dropping it from del.
            op_del.retain(|f| op_add.binary_search(f).is_err());
            operators.push(GroundOperator {
                id: operators.len(),
                schema: schema_idx,
                args: binding.iter().map(|&o| names[o].clone()).collect(),
                pre: op_pre,
                add: op_add,
                del: op_del,
            });

            // odometer, last parameter fastest
            let mut exhausted = true;
            for k in (0..choice.len()).rev() {
                choice[k] += 1;
                if choice[k] < per_param[k].len() {
                    exhausted = false;
                    break;
                }
                choice[k] = 0;
            }
            if exhausted {
                break;
            }
        }
    }

    let num_facts = table.facts.len();
    Ok(GroundTask {
        domain_name: domain.name.clone(),
        problem_name: problem.name.clone(),
        schemas,
        facts: table.facts,
        operators,
        init: State::from_facts(num_facts, init_facts),
        goal,
    })
}

/// Facts reachable from the initial state when delete effects are ignored.
pub fn relaxed_reachable(task: &GroundTask) -> State {
    let mut reached = task.init.clone();
    let mut waiting: Vec<usize> = task.operators.iter().map(|o| o.pre.len()).collect();
    let mut by_pre: Vec<Vec<OpId>> = vec![Vec::new(); task.num_facts()];
    for o in &task.operators {
        for &f in &o.pre {
            by_pre[f].push(o.id);
        }
    }
    let mut queue: Vec<FactId> = reached.iter().collect();
    let mut fire: Vec<OpId> = task.operators.iter().filter(|o| o.pre.is_empty()).map(|o| o.id).collect();
    loop {
        while let Some(op) = fire.pop() {
            for &f in &task.operators[op].add {
                if !reached.contains(f) {
                    reached.insert(f);
                    queue.push(f);
                }
            }
        }
        let Some(f) = queue.pop() else { break };
        for &op in &by_pre[f] {
            waiting[op] -= 1;
            if waiting[op] == 0 {
                fire.push(op);
            }
        }
    }
    reached
}

/// Drops operators whose preconditions are not delete-relaxed reachable and
/// re-densifies fact and operator indices, preserving relative order.
pub fn reachability_prune(task: &GroundTask) -> GroundTask {
    let reached = relaxed_reachable(task);
    let kept: Vec<&GroundOperator> = task
        .operators
        .iter()
        .filter(|o| reached.contains_all(&o.pre))
        .collect();

    let mut used = State::empty(task.num_facts());
    for f in task.init.iter().chain(task.goal.iter().copied()) {
        used.insert(f);
    }
    for o in &kept {
        for &f in o.pre.iter().chain(&o.add).chain(&o.del) {
            used.insert(f);
        }
    }
    let mut remap = vec![usize::MAX; task.num_facts()];
    let mut facts = Vec::with_capacity(used.count());
    for f in used.iter() {
        remap[f] = facts.len();
        facts.push(task.facts[f].clone());
    }
    let map = |v: &[FactId]| -> Vec<FactId> { v.iter().map(|&f| remap[f]).collect() };
    let operators = kept
        .iter()
        .enumerate()
        .map(|(id, o)| GroundOperator {
            id,
            schema: o.schema,
            args: o.args.clone(),
            pre: map(&o.pre),
            add: map(&o.add),
            del: map(&o.del),
        })
        .collect();
    GroundTask {
        domain_name: task.domain_name.clone(),
        problem_name: task.problem_name.clone(),
        schemas: task.schemas.clone(),
        init: State::from_facts(facts.len(), task.init.iter().map(|f| remap[f])),
        goal: map(&task.goal),
        facts,
        operators,
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};

    const TRANSPORT: &str = "(define (domain transport)
        (:requirements :strips :typing)
        (:types truck city - object)
        (:predicates (at ?t - truck ?c - city))
        (:action move
          :parameters (?t - truck ?c1 - city ?c2 - city)
          :precondition (and (at ?t ?c1))
          :effect (and (not (at ?t ?c1)) (at ?t ?c2))))";

    fn transport(objects: &str, init: &str) -> GroundTask {
        let d = parse_domain(TRANSPORT).unwrap();
        let p = parse_problem(&format!(
            "(define (problem p) (:domain transport) (:objects {objects}) (:init {init}) (:goal (and)))"
        ))
        .unwrap();
        ground(&d, &p).unwrap()
    }

    #[test]
    fn counts_typed_bindings() {
        let t = transport("t1 t2 - truck a b c - city", "(at t1 a)");
        assert_eq!(t.num_operators(), 2 * 3 * 3);
        // lexicographic: t1 a a, t1 a b, ...
        assert_eq!(t.operator_label(0), "(move t1 a a)");
        assert_eq!(t.operator_label(1), "(move t1 a b)");
        assert_eq!(t.operator_label(17), "(move t2 c c)");
        assert_eq!(t.binding(1), vec![("?t", "t1"), ("?c1", "a"), ("?c2", "b")]);
    }

    #[test]
    fn self_move_keeps_the_fact() {
        let t = transport("t1 - truck a - city", "(at t1 a)");
        let o = &t.operators[0];
        assert_eq!(o.add, o.pre);
        assert!(o.del.is_empty());
    }

    #[test]
    fn empty_type_gives_no_operators() {
        let t = transport("a b - city", "");
        assert_eq!(t.num_operators(), 0);
    }

    #[test]
    fn binding_reproduces_literals() {
        let t = transport("t1 t2 - truck a b c - city", "(at t1 a)");
        for o in &t.operators {
            let b: HashMap<_, _> = t.binding(o.id).into_iter().collect();
            let at = |v: &str, w: &str| Fact {
                predicate: "at".into(),
                args: vec![b[v].to_string(), b[w].to_string()],
            };
            assert_eq!(t.facts[o.pre[0]], at("?t", "?c1"));
            assert_eq!(t.facts[o.add[0]], at("?t", "?c2"));
        }
    }

    #[test]
    fn capacity_error() {
        let d = parse_domain(TRANSPORT).unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain transport) (:objects t1 t2 - truck a b c - city) (:init) (:goal (and)))",
        )
        .unwrap();
        let err = ground_with(&d, &p, &GroundingOptions { max_operators: 17 }).unwrap_err();
        assert_eq!(err, GroundError::Capacity { count: 18, cap: 17 });
    }

    #[test]
    fn incompatible_problem_is_refused() {
        let d = parse_domain(TRANSPORT).unwrap();
        let p = parse_problem("(define (problem p) (:domain other) (:objects) (:init) (:goal (and)))").unwrap();
        assert!(matches!(ground(&d, &p), Err(GroundError::Incompatible(_))));
    }

    #[test]
    fn grounding_is_deterministic() {
        let a = transport("t1 t2 - truck a b c - city", "(at t1 a) (at t2 c)");
        let b = transport("t1 t2 - truck a b c - city", "(at t1 a) (at t2 c)");
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn prune_keeps_reachable_operators() {
        let t = task_from(&[(&[0], &[1], &[]), (&[1], &[2], &[0])], &[0]);
        let p = reachability_prune(&t);
        assert_eq!(p.num_operators(), 2);
        assert_eq!(p.operators, t.operators);
    }

    #[test]
    fn prune_drops_unreachable_operators() {
        // op 1 needs f3 which nothing adds
        let t = task_from(&[(&[0], &[1], &[]), (&[3], &[2], &[]), (&[1], &[0], &[])], &[0]);
        let p = reachability_prune(&t);
        assert_eq!(p.num_operators(), 2);
        assert_eq!(p.operators[1].args, vec!["o2".to_string()]);
        // f2 and f3 were only used by the dropped operator
        assert_eq!(p.num_facts(), 2);
    }

    fn task_from(ops: &[(&[FactId], &[FactId], &[FactId])], init: &[FactId]) -> GroundTask {
        test_support::task_from_triplets(4, ops, init, &[])
    }
}
