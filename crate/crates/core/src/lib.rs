//! Adaptive active automata learning for Mealy machines.
//!
//! The crate learns a black-box Mealy machine through output and equivalence
//! queries with the L# rules, optionally guided by one or more reference
//! models through rebuilding and (approximate) state matching.
//!
//! Everything here is `no_std` + `alloc`: IO, file formats and the CLI live in
//! the companion `alsharp` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adaptive;
pub mod gen;
pub mod learner;
pub mod mealy;
pub mod mutations;
pub mod norm;
pub mod obstree;
pub mod oracle;

pub use adaptive::{run_alsharp, Ablation, MatchMode, MatchTable};
pub use learner::{run_lsharp, Event, LearnError, Learner, LearnerConfig, Rule, RunResult, Step};
pub use mealy::{
    build_reference_pack, language_equivalent, Equivalence, InputId, MealyBuilder, MealyError, MealyMachine, OutputId,
    ReferencePack, StateId, Word,
};
pub use gen::{random_machine, GenParams};
pub use mutations::{mutate, MutationError, MutationOp, MutationSpec};
pub use norm::{compute_norm, norm_bound};
pub use obstree::{FrontierStatus, Hypothesis, NodeId, ObservationTree};
pub use oracle::{EqOracle, RunMetrics, Teacher, WpParams};
