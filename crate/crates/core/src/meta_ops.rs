//! Meta-operators: sets of pairwise non-conflicting operators applied in a
//! single timestep, and the degree-L action spaces built from them.
//!
//! Two operators conflict when one deletes a precondition of the other
//! (interference) or one deletes a fact the other adds (inconsistent
//! effects), checked in both directions. A conflict-free set can be executed
//! in any order with the same result, `(s \ ∪del) ∪ ∪add`.
//!
//! The conflict relation is computed once per task over the whole operator
//! table and filtered to the applicable operators of each state; restricting
//! the global relation gives exactly the relation computed from scratch on
//! the restricted set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::{FactId, GroundTask, OpId};
use crate::transition::{applicable_operators, State};

pub const DEFAULT_DEGREE: usize = 2;
pub const DEFAULT_MAX_META_ACTIONS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetaOpsError {
    #[error("degree must be >= {min}, got {got}")]
    Degree { got: usize, min: usize },
    #[error("meta-operator enumeration exceeded the cap of {cap} actions")]
    Capacity { cap: usize },
}

fn intersects(a: &[FactId], b: &[FactId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Interference or inconsistent effects between two distinct operators, in
/// either direction.
pub fn conflicts(task: &GroundTask, a: OpId, b: OpId) -> bool {
    let (x, y) = (&task.operators[a], &task.operators[b]);
    intersects(&x.pre, &y.del)
        || intersects(&y.pre, &x.del)
        || intersects(&x.add, &y.del)
        || intersects(&y.add, &x.del)
}

/// Symmetric conflict relation over a set of operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictSet {
    members: Vec<OpId>,
    // indexed by operator id; empty for non-members
    adjacency: Vec<Vec<u32>>,
}

impl ConflictSet {
    /// Conflict relation over `ops` (any order, duplicates ignored).
    pub fn build(task: &GroundTask, ops: &[OpId]) -> Self {
        let mut members = ops.to_vec();
        members.sort_unstable();
        members.dedup();

        let mut deleters: Vec<Vec<u32>> = vec![Vec::new(); task.num_facts()];
        for &op in &members {
            for &f in &task.operators[op].del {
                deleters[f].push(op as u32);
            }
        }

        let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); task.num_operators()];
        for &a in &members {
            let o = &task.operators[a];
            for &p in o.pre.iter().chain(&o.add) {
                for &b in &deleters[p] {
                    if b as usize != a {
                        adjacency[a].push(b);
                        adjacency[b as usize].push(a as u32);
                    }
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self { members, adjacency }
    }

    /// Relation over the whole operator table.
    pub fn full(task: &GroundTask) -> Self {
        let all: Vec<OpId> = (0..task.num_operators()).collect();
        Self::build(task, &all)
    }

    pub fn members(&self) -> &[OpId] {
        &self.members
    }

    pub fn contains(&self, a: OpId, b: OpId) -> bool {
        self.adjacency
            .get(a)
            .is_some_and(|n| n.binary_search(&(b as u32)).is_ok())
    }

    /// Operators conflicting with `op`, ascending.
    pub fn neighbors(&self, op: OpId) -> impl Iterator<Item = OpId> + '_ {
        self.adjacency
            .get(op)
            .into_iter()
            .flatten()
            .map(|&b| b as usize)
    }

    /// Unordered pairs `(a, b)` with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (OpId, OpId)> + '_ {
        self.members
            .iter()
            .flat_map(move |&a| self.neighbors(a).filter(move |&b| b > a).map(move |b| (a, b)))
    }

    /// Number of unordered conflicting pairs.
    pub fn len(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The relation induced on `ops ∩ members`.
    pub fn restrict(&self, ops: &[OpId]) -> Self {
        let mut members: Vec<OpId> = ops
            .iter()
            .copied()
            .filter(|op| self.members.binary_search(op).is_ok())
            .collect();
        members.sort_unstable();
        members.dedup();
        let mut adjacency = vec![Vec::new(); self.adjacency.len()];
        for &a in &members {
            adjacency[a] = self.adjacency[a]
                .iter()
                .copied()
                .filter(|&b| members.binary_search(&(b as usize)).is_ok())
                .collect();
        }
        Self { members, adjacency }
    }
}

/// A set of 1..L pairwise non-conflicting operators with unioned triplets.
/// Degree-1 actions are the operators themselves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetaAction {
    pub atoms: Vec<OpId>,
    pub pre: Vec<FactId>,
    pub add: Vec<FactId>,
    pub del: Vec<FactId>,
}

fn union(sets: impl Iterator<Item = impl IntoIterator<Item = FactId>>) -> Vec<FactId> {
    let mut out: Vec<FactId> = sets.flatten().collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl MetaAction {
    /// Builds the unioned triplet. `atoms` is sorted; conflicts are not
    /// checked here.
    pub fn from_atoms(task: &GroundTask, atoms: &[OpId]) -> Self {
        let mut atoms = atoms.to_vec();
        atoms.sort_unstable();
        atoms.dedup();
        let ops = || atoms.iter().map(|&a| &task.operators[a]);
        Self {
            pre: union(ops().map(|o| o.pre.iter().copied())),
            add: union(ops().map(|o| o.add.iter().copied())),
            del: union(ops().map(|o| o.del.iter().copied())),
            atoms,
        }
    }

    pub fn degree(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_applicable(&self, state: &State) -> bool {
        state.contains_all(&self.pre)
    }

    /// `(s \ ∪del) ∪ ∪add`
    pub fn apply(&self, state: &State) -> State {
        state.successor(&self.add, &self.del)
    }
}

/// Visits every subset of `ops` (sorted) of exactly `size` elements that
/// contains no conflicting pair, in lexicographic order.
fn for_each_clique(ops: &[OpId], size: usize, n: &ConflictSet, visit: &mut dyn FnMut(&[OpId]) -> bool) -> bool {
    fn extend(
        ops: &[OpId],
        from: usize,
        size: usize,
        n: &ConflictSet,
        current: &mut Vec<OpId>,
        visit: &mut dyn FnMut(&[OpId]) -> bool,
    ) -> bool {
        if current.len() == size {
            return visit(current);
        }
        let needed = size - current.len();
        for i in from..ops.len() {
            if ops.len() - i < needed {
                break;
            }
            let cand = ops[i];
            if current.iter().any(|&c| n.contains(c, cand)) {
                continue;
            }
            current.push(cand);
            let keep_going = extend(ops, i + 1, size, n, current, visit);
            current.pop();
            if !keep_going {
                return false;
            }
        }
        true
    }
    let mut current = Vec::with_capacity(size);
    extend(ops, 0, size, n, &mut current, visit)
}

/// All conflict-free subsets of `ops` with 2..=`degree` elements, ordered by
/// degree and then lexicographically.
pub fn make_meta_operators(
    task: &GroundTask,
    ops: &[OpId],
    degree: usize,
    n: &ConflictSet,
    cap: usize,
) -> Result<Vec<MetaAction>, MetaOpsError> {
    if degree < 2 {
        return Err(MetaOpsError::Degree { got: degree, min: 2 });
    }
    let mut sorted = ops.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = Vec::new();
    for size in 2..=degree {
        let complete = for_each_clique(&sorted, size, n, &mut |atoms| {
            if out.len() >= cap {
                return false;
            }
            out.push(MetaAction::from_atoms(task, atoms));
            true
        });
        if !complete {
            return Err(MetaOpsError::Capacity { cap });
        }
    }
    Ok(out)
}

/// Atom sets of every action applicable in `state`: the applicable
/// operators first, then conflict-free combinations of them by degree.
pub fn applicable_atom_sets(task: &GroundTask, state: &State, degree: usize, n: &ConflictSet) -> Vec<Vec<OpId>> {
    let ops = applicable_operators(task, state);
    let mut out: Vec<Vec<OpId>> = ops.iter().map(|&o| vec![o]).collect();
    for size in 2..=degree {
        for_each_clique(&ops, size, n, &mut |atoms| {
            out.push(atoms.to_vec());
            true
        });
    }
    out
}

/// Every meta-action of degree ≤ `degree` applicable in `state`.
pub fn applicable_actions(task: &GroundTask, state: &State, degree: usize, n: &ConflictSet) -> Vec<MetaAction> {
    applicable_atom_sets(task, state, degree, n)
        .into_iter()
        .map(|atoms| MetaAction::from_atoms(task, &atoms))
        .collect()
}

/// Distinct actions seen, with a per-degree histogram.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpaceStats {
    pub total: usize,
    pub by_degree: BTreeMap<usize, usize>,
}

pub fn action_space_stats<'a>(trace: impl IntoIterator<Item = &'a [OpId]>) -> ActionSpaceStats {
    let distinct: BTreeSet<Vec<OpId>> = trace
        .into_iter()
        .map(|atoms| {
            let mut a = atoms.to_vec();
            a.sort_unstable();
            a.dedup();
            a
        })
        .collect();
    let mut stats = ActionSpaceStats {
        total: distinct.len(),
        ..Default::default()
    };
    for a in &distinct {
        *stats.by_degree.entry(a.len()).or_default() += 1;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::test_support::task_from_triplets;
    use crate::transition::apply;
    use proptest::prelude::*;

    /// The conflict loop written out literally: for every a, every p in
    /// Pre(a) then Add(a), every b with p ∈ Del(b).
    fn literal_conflict_loop(task: &GroundTask, ops: &[OpId]) -> BTreeSet<(OpId, OpId)> {
        let mut n = BTreeSet::new();
        for &a in ops {
            let oa = &task.operators[a];
            for p in oa.pre.iter().chain(&oa.add) {
                for &b in ops {
                    if a != b && task.operators[b].del.contains(p) {
                        n.insert((a, b));
                        n.insert((b, a));
                    }
                }
            }
        }
        n
    }

    fn ordered_pairs(c: &ConflictSet) -> BTreeSet<(OpId, OpId)> {
        c.pairs().flat_map(|(a, b)| [(a, b), (b, a)]).collect()
    }

    /// 10 operators over 8 facts with a mix of conflicts.
    fn toy() -> GroundTask {
        task_from_triplets(
            8,
            &[
                (&[0], &[1], &[0]),
                (&[0], &[2], &[]),
                (&[1], &[3], &[]),
                (&[2], &[4], &[2]),
                (&[], &[5], &[3]),
                (&[5], &[6], &[]),
                (&[6], &[7], &[5]),
                (&[], &[0], &[]),
                (&[7], &[], &[]),
                (&[], &[], &[6]),
            ],
            &[0, 1, 2, 5, 6, 7],
            &[],
        )
    }

    #[test]
    fn interference_and_independence() {
        // pickup(b1, arm1): del handempty(arm1)=f0; pickup(b2, arm1): pre f0;
        // pickup(b3, arm2): pre handempty(arm2)=f1
        let t = task_from_triplets(
            6,
            &[(&[0, 2], &[3], &[0, 2]), (&[0, 4], &[5], &[0, 4]), (&[1, 4], &[5], &[1, 4])],
            &[0, 1, 2, 4],
            &[],
        );
        assert!(conflicts(&t, 0, 1));
        assert!(conflicts(&t, 1, 0));
        assert!(!conflicts(&t, 0, 2));
    }

    #[test]
    fn inconsistent_effects() {
        let t = task_from_triplets(2, &[(&[], &[1], &[]), (&[], &[], &[1])], &[], &[]);
        assert!(conflicts(&t, 0, 1));
    }

    #[test]
    fn disjoint_footprints_give_empty_relation() {
        let t = task_from_triplets(6, &[(&[0], &[1], &[0]), (&[2], &[3], &[2]), (&[4], &[5], &[4])], &[], &[]);
        let n = ConflictSet::full(&t);
        assert!(n.is_empty());
    }

    #[test]
    fn mutual_interference_is_one_pair() {
        let t = task_from_triplets(2, &[(&[0], &[], &[1]), (&[1], &[], &[0])], &[], &[]);
        let n = ConflictSet::full(&t);
        assert_eq!(n.len(), 1);
        assert_eq!(n.pairs().collect::<Vec<_>>(), vec![(0, 1)]);
        assert!(n.contains(1, 0));
    }

    #[test]
    fn build_matches_literal_loop_and_restriction() {
        let t = toy();
        let full = ConflictSet::full(&t);
        let all: Vec<OpId> = (0..10).collect();
        assert_eq!(ordered_pairs(&full), literal_conflict_loop(&t, &all));
        for subset in [vec![0, 1, 2], vec![3, 4, 5, 9], vec![2, 6, 7, 8, 9]] {
            let restricted = full.restrict(&subset);
            assert_eq!(restricted, ConflictSet::build(&t, &subset));
            assert_eq!(ordered_pairs(&restricted), literal_conflict_loop(&t, &subset));
        }
    }

    #[test]
    fn pairs_without_conflicts() {
        let t = task_from_triplets(3, &[(&[], &[0], &[]), (&[], &[1], &[]), (&[], &[2], &[])], &[], &[]);
        let n = ConflictSet::full(&t);
        let metas = make_meta_operators(&t, &[0, 1, 2], 2, &n, DEFAULT_MAX_META_ACTIONS).unwrap();
        let atoms: Vec<_> = metas.iter().map(|m| m.atoms.clone()).collect();
        assert_eq!(atoms, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(metas[0].add, vec![0, 1]);
    }

    #[test]
    fn all_pairs_conflicting() {
        let t = task_from_triplets(1, &[(&[0], &[], &[0]), (&[0], &[], &[0]), (&[0], &[], &[0])], &[], &[]);
        let n = ConflictSet::full(&t);
        assert!(make_meta_operators(&t, &[0, 1, 2], 2, &n, 100).unwrap().is_empty());
    }

    #[test]
    fn degree_and_capacity_errors() {
        let t = task_from_triplets(3, &[(&[], &[0], &[]), (&[], &[1], &[]), (&[], &[2], &[])], &[], &[]);
        let n = ConflictSet::full(&t);
        assert_eq!(
            make_meta_operators(&t, &[0, 1, 2], 1, &n, 100),
            Err(MetaOpsError::Degree { got: 1, min: 2 })
        );
        assert_eq!(
            make_meta_operators(&t, &[0, 1, 2], 3, &n, 3),
            Err(MetaOpsError::Capacity { cap: 3 })
        );
        assert_eq!(make_meta_operators(&t, &[0, 1, 2], 3, &n, 4).unwrap().len(), 4);
    }

    #[test]
    fn degree_three_matches_brute_force() {
        let t = toy();
        let n = ConflictSet::full(&t);
        let ops: Vec<OpId> = (0..10).collect();
        let got: Vec<Vec<OpId>> = make_meta_operators(&t, &ops, 3, &n, DEFAULT_MAX_META_ACTIONS)
            .unwrap()
            .into_iter()
            .map(|m| m.atoms)
            .collect();

        let mut expected = Vec::new();
        for size in 2..=3usize {
            for mask in 0u32..(1 << 10) {
                if mask.count_ones() as usize != size {
                    continue;
                }
                let subset: Vec<OpId> = (0..10).filter(|i| mask & (1 << i) != 0).collect();
                let ok = subset
                    .iter()
                    .all(|&a| subset.iter().all(|&b| a == b || !conflicts(&t, a, b)));
                if ok {
                    expected.push(subset);
                }
            }
        }
        expected.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        assert_eq!(got, expected);
        assert!(!got.is_empty());
    }

    #[test]
    fn closed_form_count_without_conflicts() {
        for k in 0..7usize {
            let ops: Vec<(&[FactId], &[FactId], &[FactId])> = (0..k).map(|_| (&[][..], &[][..], &[][..])).collect();
            let t = task_from_triplets(1, &ops, &[], &[]);
            let n = ConflictSet::full(&t);
            let actions = applicable_actions(&t, &t.init, 2, &n);
            assert_eq!(actions.len(), k + k * k.saturating_sub(1) / 2);
        }
    }

    #[test]
    fn dead_end_and_single_operator() {
        let t = task_from_triplets(2, &[(&[1], &[0], &[])], &[0], &[]);
        let n = ConflictSet::full(&t);
        assert!(applicable_actions(&t, &t.init, 2, &n).is_empty());
        let s = State::from_facts(2, [1]);
        let actions = applicable_actions(&t, &s, 2, &n);
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].degree(), 1);
    }

    #[test]
    fn stats() {
        assert_eq!(action_space_stats(std::iter::empty()), ActionSpaceStats::default());
        let trace: Vec<Vec<OpId>> = vec![
            vec![0],
            vec![1],
            vec![2],
            vec![3],
            vec![4],
            vec![0],
            vec![0, 1],
            vec![1, 0],
            vec![2, 3],
            vec![3, 4],
        ];
        let stats = action_space_stats(trace.iter().map(Vec::as_slice));
        assert_eq!(stats.total, 8);
        assert_eq!(stats.by_degree, BTreeMap::from([(1, 5), (2, 3)]));
    }

    fn permutations(items: &[OpId]) -> Vec<Vec<OpId>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let first = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, first);
                out.push(p);
            }
        }
        out
    }

    fn arb_task() -> impl Strategy<Value = (GroundTask, Vec<FactId>)> {
        let set = || proptest::collection::btree_set(0usize..10, 0..4);
        (
            proptest::collection::vec((set(), set(), set()), 1..9),
            proptest::collection::btree_set(0usize..10, 0..10),
        )
            .prop_map(|(ops, init)| {
                let ops: Vec<(Vec<FactId>, Vec<FactId>, Vec<FactId>)> = ops
                    .into_iter()
                    .map(|(p, a, d)| {
                        let a: Vec<FactId> = a.into_iter().collect();
                        let d = d.into_iter().filter(|f| !a.contains(f)).collect();
                        (p.into_iter().collect(), a, d)
                    })
                    .collect();
                let refs: Vec<(&[FactId], &[FactId], &[FactId])> =
                    ops.iter().map(|(p, a, d)| (&p[..], &a[..], &d[..])).collect();
                let init: Vec<FactId> = init.into_iter().collect();
                (task_from_triplets(10, &refs, &init, &[]), init)
            })
    }

    proptest! {
        #[test]
        fn any_order_gives_the_union_result((t, _) in arb_task()) {
            let n = ConflictSet::full(&t);
            for action in applicable_actions(&t, &t.init, 3, &n) {
                let expected = action.apply(&t.init);
                for order in permutations(&action.atoms) {
                    let mut s = t.init.clone();
                    for op in order {
                        s = apply(&t, &s, op).expect("conflict-free atoms stay applicable");
                    }
                    prop_assert_eq!(&s, &expected);
                }
            }
        }

        #[test]
        fn order_dependence_implies_conflict((t, _) in arb_task()) {
            let ops = applicable_operators(&t, &t.init);
            for &a in &ops {
                for &b in &ops {
                    if a >= b { continue; }
                    let ab = apply(&t, &t.init, a).ok().and_then(|s| apply(&t, &s, b).ok());
                    let ba = apply(&t, &t.init, b).ok().and_then(|s| apply(&t, &s, a).ok());
                    let diverge = match (&ab, &ba) {
                        (Some(x), Some(y)) => x != y,
                        _ => true,
                    };
                    if diverge {
                        prop_assert!(conflicts(&t, a, b));
                    }
                }
            }
        }

        #[test]
        fn degree_one_slice_and_monotonicity((t, _) in arb_task()) {
            let n = ConflictSet::full(&t);
            let one = applicable_atom_sets(&t, &t.init, 1, &n);
            let ops: Vec<Vec<OpId>> = applicable_operators(&t, &t.init).into_iter().map(|o| vec![o]).collect();
            prop_assert_eq!(&one, &ops);
            let mut previous: BTreeSet<Vec<OpId>> = one.into_iter().collect();
            for degree in 2..=4 {
                let current: BTreeSet<Vec<OpId>> = applicable_atom_sets(&t, &t.init, degree, &n).into_iter().collect();
                prop_assert!(previous.is_subset(&current));
                previous = current;
            }
        }

        #[test]
        fn restriction_equals_rebuild((t, _) in arb_task()) {
            let full = ConflictSet::full(&t);
            let app = applicable_operators(&t, &t.init);
            prop_assert_eq!(full.restrict(&app), ConflictSet::build(&t, &app));
            prop_assert_eq!(ordered_pairs(&ConflictSet::build(&t, &app)), literal_conflict_loop(&t, &app));
        }
    }
}
