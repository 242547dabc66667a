//! Seeded problem generators for multi-arm blocksworld, logistics and depots.
//!
//! Every generated instance is solvable by construction. Instance `i` of a
//! spec draws from stream `i` of a ChaCha8 generator seeded with the spec's
//! seed, so output is byte-identical across runs and platforms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{parse_domain, Atom, DomainAst, ProblemAst, TypedName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Multiblocks,
    Logistics,
    Depots,
}

impl DomainKind {
    pub const ALL: [DomainKind; 3] = [DomainKind::Multiblocks, DomainKind::Logistics, DomainKind::Depots];

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Multiblocks => "multiblocks",
            DomainKind::Logistics => "logistics",
            DomainKind::Depots => "depots",
        }
    }

    /// Object-count keys a spec of this kind must provide.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            DomainKind::Multiblocks => &["blocks", "arms"],
            DomainKind::Logistics => &["airplanes", "cities", "trucks", "locations", "packages"],
            DomainKind::Depots => &["depots", "distributors", "trucks", "pallets", "hoists", "crates"],
        }
    }

    pub fn domain(self) -> DomainAst {
        let text = match self {
            DomainKind::Multiblocks => MULTIBLOCKS_DOMAIN,
            DomainKind::Logistics => LOGISTICS_DOMAIN,
            DomainKind::Depots => DEPOTS_DOMAIN,
        };
        parse_domain(text).expect("built-in domain parses")
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainKind {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "multiblocks" | "multi-blocks" | "blocks" => Ok(DomainKind::Multiblocks),
            "logistics" => Ok(DomainKind::Logistics),
            "depots" => Ok(DomainKind::Depots),
            other => Err(GenError::Spec(format!("unknown domain '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Train,
    Test,
    Custom,
}

impl FromStr for Preset {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Preset::Train),
            "test" => Ok(Preset::Test),
            "custom" => Ok(Preset::Custom),
            other => Err(GenError::Spec(format!("unknown preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error("infeasible spec: {0}")]
    Infeasible(String),
}

pub type Counts = BTreeMap<String, u32>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: DomainKind,
    pub ranges: BTreeMap<String, (u32, u32)>,
    pub seed: u64,
    pub preset: Preset,
}

fn ranges(pairs: &[(&str, u32, u32)]) -> BTreeMap<String, (u32, u32)> {
    pairs.iter().map(|&(k, lo, hi)| (k.to_string(), (lo, hi))).collect()
}

impl GenSpec {
    pub fn preset(kind: DomainKind, preset: Preset, seed: u64) -> Result<Self, GenError> {
        let table = match (kind, preset) {
            (_, Preset::Custom) => return Err(GenError::Spec("custom specs need explicit ranges".into())),
            (DomainKind::Multiblocks, Preset::Train) => ranges(&[("blocks", 5, 6), ("arms", 2, 2)]),
            (DomainKind::Multiblocks, Preset::Test) => ranges(&[("blocks", 10, 11), ("arms", 2, 2)]),
            (DomainKind::Logistics, Preset::Train) => ranges(&[
                ("airplanes", 2, 4),
                ("cities", 2, 4),
                ("trucks", 2, 4),
                ("locations", 2, 4),
                ("packages", 1, 3),
            ]),
            (DomainKind::Logistics, Preset::Test) => ranges(&[
                ("airplanes", 3, 4),
                ("cities", 6, 7),
                ("trucks", 3, 4),
                ("locations", 6, 7),
                ("packages", 6, 7),
            ]),
            (DomainKind::Depots, Preset::Train) => ranges(&[
                ("depots", 1, 2),
                ("distributors", 2, 3),
                ("trucks", 2, 3),
                ("pallets", 3, 5),
                ("hoists", 2, 4),
                ("crates", 3, 5),
            ]),
            (DomainKind::Depots, Preset::Test) => ranges(&[
                ("depots", 5, 6),
                ("distributors", 5, 6),
                ("trucks", 5, 6),
                ("pallets", 5, 6),
                ("hoists", 5, 6),
                ("crates", 5, 6),
            ]),
        };
        Ok(Self {
            kind,
            ranges: table,
            seed,
            preset,
        })
    }

    /// Custom spec; every count not listed in `overrides` is fixed at 1.
    pub fn custom(kind: DomainKind, overrides: &[(&str, u32, u32)], seed: u64) -> Result<Self, GenError> {
        let mut table: BTreeMap<String, (u32, u32)> = kind.keys().iter().map(|k| (k.to_string(), (1, 1))).collect();
        for &(k, lo, hi) in overrides {
            table.insert(k.to_string(), (lo, hi));
        }
        let spec = Self {
            kind,
            ranges: table,
            seed,
            preset: Preset::Custom,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        for key in self.kind.keys() {
            match self.ranges.get(*key) {
                None => return Err(GenError::Spec(format!("missing range for '{key}'"))),
                Some((lo, hi)) if lo > hi => {
                    return Err(GenError::Spec(format!("empty range for '{key}': {lo} > {hi}")))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.ranges.keys().find(|k| !self.kind.keys().contains(&k.as_str())) {
            return Err(GenError::Spec(format!("unknown count '{extra}' for {}", self.kind)));
        }
        Ok(())
    }

    /// Every combination of counts within the ranges, in key order.
    pub fn configurations(&self) -> Result<Vec<Counts>, GenError> {
        self.validate()?;
        let mut out = vec![Counts::new()];
        for (key, &(lo, hi)) in &self.ranges {
            out = out
                .into_iter()
                .flat_map(|c| {
                    (lo..=hi).map(move |v| {
                        let mut c = c.clone();
                        c.insert(key.clone(), v);
                        c
                    })
                })
                .collect();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub domain: DomainAst,
    pub problem: ProblemAst,
    pub counts: Counts,
    pub stream: u64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Instance `index` with counts drawn uniformly from the ranges.
pub fn generate(spec: &GenSpec, index: u64) -> Result<Instance, GenError> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, index);
    let counts: Counts = spec
        .ranges
        .iter()
        .map(|(k, &(lo, hi))| (k.clone(), rng.gen_range(lo..=hi)))
        .collect();
    build(spec.kind, &counts, &format!("{}-{index}", spec.kind), &mut rng, index)
}

/// `per_config` instances for every configuration of the spec's ranges.
pub fn generate_grid(spec: &GenSpec, per_config: usize) -> Result<Vec<Instance>, GenError> {
    let mut out = Vec::new();
    for counts in spec.configurations()? {
        for _ in 0..per_config {
            let stream = out.len() as u64;
            let mut rng = rng_for(spec.seed, stream);
            out.push(build(spec.kind, &counts, &format!("{}-{stream}", spec.kind), &mut rng, stream)?);
        }
    }
    Ok(out)
}

pub fn gen_multiblocks(spec: &GenSpec) -> Result<(DomainAst, ProblemAst), GenError> {
    expect_kind(spec, DomainKind::Multiblocks)?;
    generate(spec, 0).map(|i| (i.domain, i.problem))
}

pub fn gen_logistics(spec: &GenSpec) -> Result<(DomainAst, ProblemAst), GenError> {
    expect_kind(spec, DomainKind::Logistics)?;
    generate(spec, 0).map(|i| (i.domain, i.problem))
}

pub fn gen_depots(spec: &GenSpec) -> Result<(DomainAst, ProblemAst), GenError> {
    expect_kind(spec, DomainKind::Depots)?;
    generate(spec, 0).map(|i| (i.domain, i.problem))
}

fn expect_kind(spec: &GenSpec, kind: DomainKind) -> Result<(), GenError> {
    if spec.kind != kind {
        return Err(GenError::Spec(format!("expected a {kind} spec, got {}", spec.kind)));
    }
    Ok(())
}

fn build(kind: DomainKind, counts: &Counts, name: &str, rng: &mut ChaCha8Rng, stream: u64) -> Result<Instance, GenError> {
    let c = |k: &str| counts[k] as usize;
    let problem = match kind {
        DomainKind::Multiblocks => multiblocks_problem(name, c("blocks"), c("arms"), rng)?,
        DomainKind::Logistics => logistics_problem(
            name,
            c("airplanes"),
            c("cities"),
            c("trucks"),
            c("locations"),
            c("packages"),
            rng,
        )?,
        DomainKind::Depots => depots_problem(
            name,
            c("depots"),
            c("distributors"),
            c("trucks"),
            c("pallets"),
            c("hoists"),
            c("crates"),
            rng,
        )?,
    };
    Ok(Instance {
        domain: kind.domain(),
        problem,
        counts: counts.clone(),
        stream,
    })
}

fn atom(pred: &str, args: &[&str]) -> Atom {
    Atom::new(pred, args.iter().copied())
}

/// Random stacking of `blocks` (indices) as a list of towers, bottom first.
fn random_towers(blocks: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..blocks).collect();
    order.shuffle(rng);
    let mut towers: Vec<Vec<usize>> = Vec::new();
    for b in order {
        let choice = rng.gen_range(0..=towers.len());
        match towers.get_mut(choice) {
            Some(t) => t.push(b),
            None => towers.push(vec![b]),
        }
    }
    towers
}

fn tower_atoms(towers: &[Vec<usize>], names: &[String]) -> Vec<Atom> {
    let mut atoms = Vec::new();
    for t in towers {
        atoms.push(atom("ontable", &[&names[t[0]]]));
        for w in t.windows(2) {
            atoms.push(atom("on", &[&names[w[1]], &names[w[0]]]));
        }
    }
    atoms
}

fn multiblocks_problem(name: &str, blocks: usize, arms: usize, rng: &mut impl Rng) -> Result<ProblemAst, GenError> {
    if blocks == 0 || arms == 0 {
        return Err(GenError::Spec("multiblocks needs at least one block and one arm".into()));
    }
    let block_names: Vec<String> = (0..blocks).map(|i| format!("b{i}")).collect();
    let arm_names: Vec<String> = (0..arms).map(|i| format!("arm{i}")).collect();
    let start = random_towers(blocks, rng);
    let goal = random_towers(blocks, rng);

    let mut init = tower_atoms(&start, &block_names);
    for t in &start {
        init.push(atom("clear", &[&block_names[*t.last().unwrap()]]));
    }
    for a in &arm_names {
        init.push(atom("handempty", &[a]));
    }
    let objects = block_names
        .iter()
        .map(|b| TypedName::new(b.as_str(), "block"))
        .chain(arm_names.iter().map(|a| TypedName::new(a.as_str(), "arm")))
        .collect();
    Ok(ProblemAst {
        name: name.to_string(),
        domain_name: "multi-blocksworld".into(),
        objects,
        init,
        goal: tower_atoms(&goal, &block_names),
    })
}

#[allow(clippy::too_many_arguments)]
fn logistics_problem(
    name: &str,
    airplanes: usize,
    cities: usize,
    trucks: usize,
    locations: usize,
    packages: usize,
    rng: &mut impl Rng,
) -> Result<ProblemAst, GenError> {
    if cities == 0 || trucks == 0 {
        return Err(GenError::Spec("logistics needs at least one city and one truck".into()));
    }
    if cities > 1 && airplanes == 0 {
        return Err(GenError::Infeasible(
            "packages cannot move between cities without an airplane".into(),
        ));
    }
    let mut objects = Vec::new();
    let mut init = Vec::new();
    let city_names: Vec<String> = (0..cities).map(|c| format!("city{c}")).collect();
    // places[c][0] is the airport of city c
    let mut places: Vec<Vec<String>> = Vec::new();
    for (c, city) in city_names.iter().enumerate() {
        objects.push(TypedName::new(city.as_str(), "city"));
        let mut here = vec![format!("apt{c}")];
        objects.push(TypedName::new(here[0].as_str(), "airport"));
        for l in 0..locations {
            let loc = format!("loc{c}-{l}");
            objects.push(TypedName::new(loc.as_str(), "location"));
            here.push(loc);
        }
        for p in &here {
            init.push(atom("in-city", &[p, city]));
        }
        places.push(here);
    }
    let mut served = vec![false; cities];
    for t in 0..trucks {
        let truck = format!("tru{t}");
        let city = t % cities;
        served[city] = true;
        let at = places[city].choose(rng).unwrap();
        objects.push(TypedName::new(truck.as_str(), "truck"));
        init.push(atom("at", &[&truck, at]));
    }
    for a in 0..airplanes {
        let plane = format!("apn{a}");
        let at = &places[rng.gen_range(0..cities)][0];
        objects.push(TypedName::new(plane.as_str(), "airplane"));
        init.push(atom("at", &[&plane, at]));
    }
    // airports are reachable by plane; other locations need a local truck
    let reachable: Vec<&String> = places
        .iter()
        .enumerate()
        .flat_map(|(c, here)| {
            let limit = if served[c] { here.len() } else { 1 };
            here[..limit].iter()
        })
        .collect();
    let mut goal = Vec::new();
    for p in 0..packages {
        let pkg = format!("obj{p}");
        objects.push(TypedName::new(pkg.as_str(), "package"));
        let from = *reachable.choose(rng).unwrap();
        let to = *reachable.choose(rng).unwrap();
        init.push(atom("at", &[&pkg, from]));
        goal.push(atom("at", &[&pkg, to]));
    }
    Ok(ProblemAst {
        name: name.to_string(),
        domain_name: "logistics".into(),
        objects,
        init,
        goal,
    })
}

#[allow(clippy::too_many_arguments)]
fn depots_problem(
    name: &str,
    depots: usize,
    distributors: usize,
    trucks: usize,
    pallets: usize,
    hoists: usize,
    crates: usize,
    rng: &mut impl Rng,
) -> Result<ProblemAst, GenError> {
    if depots + distributors == 0 || trucks == 0 || pallets == 0 || hoists == 0 {
        return Err(GenError::Spec(
            "depots needs a place, a truck, a pallet and a hoist".into(),
        ));
    }
    let mut objects = Vec::new();
    let mut init = Vec::new();
    let places: Vec<String> = (0..depots)
        .map(|i| format!("depot{i}"))
        .chain((0..distributors).map(|i| format!("distributor{i}")))
        .collect();
    for (i, p) in places.iter().enumerate() {
        objects.push(TypedName::new(p.as_str(), if i < depots { "depot" } else { "distributor" }));
    }
    let n = places.len();
    let mut has_hoist = vec![false; n];
    for h in 0..hoists {
        let hoist = format!("hoist{h}");
        has_hoist[h % n] = true;
        objects.push(TypedName::new(hoist.as_str(), "hoist"));
        init.push(atom("at", &[&hoist, &places[h % n]]));
        init.push(atom("available", &[&hoist]));
    }
    let mut pallet_place = Vec::new();
    for p in 0..pallets {
        let pallet = format!("pallet{p}");
        objects.push(TypedName::new(pallet.as_str(), "pallet"));
        init.push(atom("at", &[&pallet, &places[p % n]]));
        pallet_place.push(p % n);
    }
    // pallets a hoist can reach
    let usable: Vec<usize> = (0..pallets).filter(|&p| has_hoist[pallet_place[p]]).collect();
    if crates > 0 && usable.is_empty() {
        return Err(GenError::Infeasible(
            "no place has both a hoist and a pallet to hold crates".into(),
        ));
    }
    for t in 0..trucks {
        let truck = format!("truck{t}");
        objects.push(TypedName::new(truck.as_str(), "truck"));
        init.push(atom("at", &[&truck, places.choose(rng).unwrap()]));
    }
    let crate_names: Vec<String> = (0..crates).map(|c| format!("crate{c}")).collect();
    for c in &crate_names {
        objects.push(TypedName::new(c.as_str(), "crate"));
    }
    let pallet_name = |p: usize| format!("pallet{p}");

    // initial stacks on usable pallets
    let mut top: Vec<String> = (0..pallets).map(pallet_name).collect();
    let mut order: Vec<usize> = (0..crates).collect();
    order.shuffle(rng);
    for c in order {
        let p = *usable.choose(rng).unwrap();
        init.push(atom("at", &[&crate_names[c], &places[pallet_place[p]]]));
        init.push(atom("on", &[&crate_names[c], &top[p]]));
        top[p] = crate_names[c].clone();
    }
    for t in &top {
        init.push(atom("clear", &[t]));
    }

    // goal towers, also on usable pallets, hence acyclic
    let mut goal_top: Vec<String> = (0..pallets).map(pallet_name).collect();
    let mut order: Vec<usize> = (0..crates).collect();
    order.shuffle(rng);
    let mut goal = Vec::new();
    for c in order {
        let p = *usable.choose(rng).unwrap();
        goal.push(atom("on", &[&crate_names[c], &goal_top[p]]));
        goal_top[p] = crate_names[c].clone();
    }
    Ok(ProblemAst {
        name: name.to_string(),
        domain_name: "depot".into(),
        objects,
        init,
        goal,
    })
}

pub const MULTIBLOCKS_DOMAIN: &str = "\
(define (domain multi-blocksworld)
  (:requirements :strips :typing)
  (:types block arm)
  (:predicates (on ?x - block ?y - block) (ontable ?x - block) (clear ?x - block)
               (holding ?a - arm ?x - block) (handempty ?a - arm))
  (:action pick-up
    :parameters (?a - arm ?x - block)
    :precondition (and (clear ?x) (ontable ?x) (handempty ?a))
    :effect (and (not (ontable ?x)) (not (clear ?x)) (not (handempty ?a)) (holding ?a ?x)))
  (:action put-down
    :parameters (?a - arm ?x - block)
    :precondition (and (holding ?a ?x))
    :effect (and (not (holding ?a ?x)) (clear ?x) (handempty ?a) (ontable ?x)))
  (:action stack
    :parameters (?a - arm ?x - block ?y - block)
    :precondition (and (holding ?a ?x) (clear ?y))
    :effect (and (not (holding ?a ?x)) (not (clear ?y)) (clear ?x) (handempty ?a) (on ?x ?y)))
  (:action unstack
    :parameters (?a - arm ?x - block ?y - block)
    :precondition (and (on ?x ?y) (clear ?x) (handempty ?a))
    :effect (and (holding ?a ?x) (clear ?y) (not (clear ?x)) (not (handempty ?a)) (not (on ?x ?y)))))
";

pub const LOGISTICS_DOMAIN: &str = "\
(define (domain logistics)
  (:requirements :strips :typing)
  (:types truck airplane - vehicle
          package vehicle - physobj
          airport location - place
          city place physobj - object)
  (:predicates (in-city ?loc - place ?city - city)
               (at ?obj - physobj ?loc - place)
               (in ?pkg - package ?veh - vehicle))
  (:action load-truck
    :parameters (?pkg - package ?truck - truck ?loc - place)
    :precondition (and (at ?truck ?loc) (at ?pkg ?loc))
    :effect (and (not (at ?pkg ?loc)) (in ?pkg ?truck)))
  (:action load-airplane
    :parameters (?pkg - package ?airplane - airplane ?loc - place)
    :precondition (and (at ?pkg ?loc) (at ?airplane ?loc))
    :effect (and (not (at ?pkg ?loc)) (in ?pkg ?airplane)))
  (:action unload-truck
    :parameters (?pkg - package ?truck - truck ?loc - place)
    :precondition (and (at ?truck ?loc) (in ?pkg ?truck))
    :effect (and (not (in ?pkg ?truck)) (at ?pkg ?loc)))
  (:action unload-airplane
    :parameters (?pkg - package ?airplane - airplane ?loc - place)
    :precondition (and (in ?pkg ?airplane) (at ?airplane ?loc))
    :effect (and (not (in ?pkg ?airplane)) (at ?pkg ?loc)))
  (:action drive-truck
    :parameters (?truck - truck ?loc-from - place ?loc-to - place ?city - city)
    :precondition (and (at ?truck ?loc-from) (in-city ?loc-from ?city) (in-city ?loc-to ?city))
    :effect (and (not (at ?truck ?loc-from)) (at ?truck ?loc-to)))
  (:action fly-airplane
    :parameters (?airplane - airplane ?loc-from - airport ?loc-to - airport)
    :precondition (and (at ?airplane ?loc-from))
    :effect (and (not (at ?airplane ?loc-from)) (at ?airplane ?loc-to))))
";

pub const DEPOTS_DOMAIN: &str = "\
(define (domain depot)
  (:requirements :strips :typing)
  (:types place locatable - object
          depot distributor - place
          truck hoist surface - locatable
          pallet crate - surface)
  (:predicates (at ?x - locatable ?y - place)
               (on ?x - crate ?y - surface)
               (in ?x - crate ?y - truck)
               (lifting ?x - hoist ?y - crate)
               (available ?x - hoist)
               (clear ?x - surface))
  (:action drive
    :parameters (?x - truck ?y - place ?z - place)
    :precondition (and (at ?x ?y))
    :effect (and (not (at ?x ?y)) (at ?x ?z)))
  (:action lift
    :parameters (?x - hoist ?y - crate ?z - surface ?p - place)
    :precondition (and (at ?x ?p) (available ?x) (at ?y ?p) (on ?y ?z) (clear ?y))
    :effect (and (not (at ?y ?p)) (lifting ?x ?y) (not (clear ?y)) (not (available ?x))
                 (clear ?z) (not (on ?y ?z))))
  (:action drop
    :parameters (?x - hoist ?y - crate ?z - surface ?p - place)
    :precondition (and (at ?x ?p) (at ?z ?p) (clear ?z) (lifting ?x ?y))
    :effect (and (available ?x) (not (lifting ?x ?y)) (at ?y ?p) (not (clear ?z))
                 (clear ?y) (on ?y ?z)))
  (:action load
    :parameters (?x - hoist ?y - crate ?z - truck ?p - place)
    :precondition (and (at ?x ?p) (at ?z ?p) (lifting ?x ?y))
    :effect (and (not (lifting ?x ?y)) (in ?y ?z) (available ?x)))
  (:action unload
    :parameters (?x - hoist ?y - crate ?z - truck ?p - place)
    :precondition (and (at ?x ?p) (at ?z ?p) (available ?x) (in ?y ?z))
    :effect (and (not (in ?y ?z)) (not (available ?x)) (lifting ?x ?y))))
";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{bfs_solve, DEFAULT_STATE_CAP};
    use crate::grounding::ground;
    use crate::pddl::{check_compat, problem_to_string};

    fn count(p: &ProblemAst, ty: &str) -> usize {
        p.objects.iter().filter(|o| o.ty == ty).count()
    }

    #[test]
    fn domains_parse_and_instances_are_compatible() {
        for kind in DomainKind::ALL {
            for preset in [Preset::Train, Preset::Test] {
                let spec = GenSpec::preset(kind, preset, 5).unwrap();
                let inst = generate(&spec, 3).unwrap();
                assert!(check_compat(&inst.domain, &inst.problem).is_empty(), "{kind} {preset:?}");
            }
        }
        assert_eq!(DomainKind::Multiblocks.domain().schemas.len(), 4);
    }

    #[test]
    fn presets_match_ranges() {
        for i in 0..30 {
            let p = generate(&GenSpec::preset(DomainKind::Multiblocks, Preset::Train, 1).unwrap(), i).unwrap().problem;
            assert!((5..=6).contains(&count(&p, "block")));
            assert_eq!(count(&p, "arm"), 2);
            let p = generate(&GenSpec::preset(DomainKind::Logistics, Preset::Test, 1).unwrap(), i).unwrap().problem;
            assert!((6..=7).contains(&count(&p, "city")));
            assert!((6..=7).contains(&count(&p, "package")));
            let p = generate(&GenSpec::preset(DomainKind::Depots, Preset::Train, 1).unwrap(), i).unwrap().problem;
            assert!((3..=5).contains(&count(&p, "crate")));
            assert!((2..=4).contains(&count(&p, "hoist")));
        }
    }

    #[test]
    fn depots_test_grid_has_640_instances() {
        let spec = GenSpec::preset(DomainKind::Depots, Preset::Test, 0).unwrap();
        assert_eq!(spec.configurations().unwrap().len(), 64);
    }

    #[test]
    fn same_seed_same_bytes() {
        for kind in DomainKind::ALL {
            let spec = GenSpec::preset(kind, Preset::Train, 77).unwrap();
            let a = problem_to_string(&generate(&spec, 4).unwrap().problem);
            let b = problem_to_string(&generate(&spec, 4).unwrap().problem);
            assert_eq!(a, b);
            let c = problem_to_string(&generate(&spec, 5).unwrap().problem);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn single_block_goal_equals_init() {
        let spec = GenSpec::custom(DomainKind::Multiblocks, &[], 0).unwrap();
        let (d, p) = gen_multiblocks(&spec).unwrap();
        let task = ground(&d, &p).unwrap();
        let plan = bfs_solve(&task, 1, 0, DEFAULT_STATE_CAP).unwrap().unwrap();
        assert!(plan.steps.is_empty());
    }

    #[test]
    fn infeasible_and_invalid_specs() {
        let spec = GenSpec::custom(DomainKind::Logistics, &[("cities", 2, 2), ("airplanes", 0, 0)], 0).unwrap();
        assert!(matches!(gen_logistics(&spec), Err(GenError::Infeasible(_))));
        let spec = GenSpec::custom(DomainKind::Depots, &[("hoists", 1, 1), ("pallets", 1, 1), ("depots", 0, 0), ("distributors", 2, 2)], 0);
        // hoist0 and pallet0 share distributor0, so this one is fine
        assert!(gen_depots(&spec.unwrap()).is_ok());
        let mut bad = GenSpec::preset(DomainKind::Depots, Preset::Train, 0).unwrap();
        bad.ranges.insert("crates".into(), (5, 3));
        assert!(matches!(generate(&bad, 0), Err(GenError::Spec(_))));
        bad.ranges.remove("crates");
        assert!(matches!(generate(&bad, 0), Err(GenError::Spec(_))));
        assert!(gen_depots(&GenSpec::preset(DomainKind::Logistics, Preset::Train, 0).unwrap()).is_err());
    }

    #[test]
    fn depot_crates_start_at_service_places() {
        for i in 0..20 {
            let spec = GenSpec::preset(DomainKind::Depots, Preset::Train, 3).unwrap();
            let p = generate(&spec, i).unwrap().problem;
            let hoist_places: Vec<&str> = p
                .init
                .iter()
                .filter(|a| a.predicate == "at" && a.args[0].starts_with("hoist"))
                .map(|a| a.args[1].as_str())
                .collect();
            for a in p.init.iter().filter(|a| a.predicate == "at" && a.args[0].starts_with("crate")) {
                assert!(hoist_places.contains(&a.args[1].as_str()));
            }
        }
    }
}
