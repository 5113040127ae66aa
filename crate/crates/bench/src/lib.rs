//! Shared workloads for the criterion benches.

use whyprov::generators::{gen_random_instance, gen_transclosure, Profile};
use whyprov::testing::example_2_2;
use whyprov::{fixpoint, Database, EngineOptions, FixpointResult, Query, Symbol};

pub const SEED: u64 = 7;

/// Transitive-closure graphs as `(nodes, edges)`.
pub const GRAPHS: [(usize, usize); 3] = [(200, 400), (1000, 2000), (4000, 5000)];

pub fn transclosure(nodes: usize, edges: usize) -> (Query, Database) {
    gen_transclosure(nodes, edges, SEED)
}

pub fn path_accessibility() -> (Query, Database) {
    let (p, d) = example_2_2();
    (Query::new(p, "A").unwrap(), d)
}

pub fn random(profile: Profile) -> (Query, Database) {
    gen_random_instance(profile, SEED)
}

pub fn evaluate(q: &Query, db: &Database) -> FixpointResult {
    let opts = EngineOptions {
        record_instantiations: false,
        ..Default::default()
    };
    fixpoint(&q.program, db, &opts).unwrap()
}

/// The answer tuple in the middle of derivation order.
pub fn middle_answer(q: &Query, fix: &FixpointResult) -> Vec<Symbol> {
    let n = fix.facts_of(q.answer).count();
    fix.facts_of(q.answer).nth(n / 2).expect("no answers").args.to_vec()
}
