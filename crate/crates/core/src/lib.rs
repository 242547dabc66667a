//! Planning environments whose action space includes meta-operators: sets of
//! pairwise non-conflicting STRIPS operators applied in one timestep.

pub mod pddl;
pub mod grounding;
pub mod transition;
pub mod meta_ops;
pub mod env;
pub mod policy;
pub mod evalkit;
pub mod generators;
