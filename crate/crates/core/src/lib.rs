//! Battery-discharge model: a periodic stochastic automaton that tracks the
//! linear and jump complexity of multisequences over `F_q`, with bounded
//! finite approximations, stationary analysis, complexity statistics and an
//! exact linear-algebra oracle over prime fields.

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod field;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod partitions;
pub mod solver;
pub mod stats;

pub use dynamics::{
    step, subcycle_phase, typical_degree, update_phase, Action, BdmState, BudgetPolicy, Discharge, ProbMonomial,
    SubcycleOutcome, TransitionWeight,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use field::{FieldParam, Probability};
pub use model::{build_bounded_model, class_deviation_histogram, compute_classes, BoundedModel, ClassMap};
pub use partitions::partition_count;
