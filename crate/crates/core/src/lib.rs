//! Datalog evaluation with why-provenance relative to unambiguous proof trees.

pub mod closure;
pub mod datalog;
pub mod encoder;
pub mod engine;
pub mod generators;
pub mod harness;
pub mod error;
pub mod prooftrees;
pub mod provenance;
pub mod sat;
pub mod symbol;
pub mod testing;

pub use closure::{build_gri, downward_closure, goal_closure, DownwardClosure, Hypergraph};
pub use encoder::{encode, Acyclicity, CnfInstance, EncodeOptions};
pub use prooftrees::{oracle_unwhy, oracle_why, OracleOptions, ProofDag, ProofTree, Support};
pub use provenance::{
    check_membership, enumerate, EnumerateOptions, EnumerationSession, ProvenanceMember, SessionStatus,
};
pub use datalog::{Atom, Database, Fact, Program, Query, Rule, Term, Tuple};
pub use engine::{fixpoint, EngineOptions, FixpointResult};
pub use error::{Error, Result};
pub use symbol::Symbol;
