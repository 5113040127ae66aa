//! Differential sweeps of the SAT pipeline against the exhaustive oracles.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::datalog::{Database, Query, Tuple};
use crate::encoder::{Acyclicity, EncodeOptions};
use crate::engine::{answers_from, fixpoint, EngineOptions};
use crate::error::{Error, Result};
use crate::generators::{gen_3sat_instance, gen_random_instance, Cnf3Formula, Literal, Profile};
use crate::prooftrees::{
    ground, is_unambiguous, min_depth_tree, oracle_unwhy, oracle_why, unravel, validate_dag, validate_tree,
    OracleOptions, Support,
};
use crate::provenance::{check_membership, enumerate, EnumerateOptions, EnumerationSession, PipelineStats, SessionStatus};
use crate::sat::ExternalSolver;
use crate::symbol::Symbol;
use crate::testing;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MismatchKind {
    /// Enumerated members differ from the oracle.
    Oracle,
    /// The two acyclicity encodings disagree.
    Encodings,
    /// A decoded model is not a valid compressed DAG, or its unravelling is
    /// not a valid unambiguous tree with the same support.
    Witness,
    /// `check_membership` rejected an enumerated member.
    Membership,
    /// A member was emitted twice.
    Duplicate,
    /// A session ended other than exhausted.
    Status,
    /// A fact's fixpoint rank differs from its minimum proof-tree depth.
    Rank,
    /// Satisfiability and `why` membership of `D_φ` disagree.
    Reduction,
    /// The external solver enumerated a different member set.
    Solvers,
}

#[derive(Clone, Debug, Serialize)]
pub struct Mismatch {
    pub kind: MismatchKind,
    pub instance: String,
    pub tuple: String,
    pub expected: String,
    pub got: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepReport {
    /// Instances generated, including skipped ones.
    pub attempted: usize,
    /// Instances fully compared.
    pub instances: usize,
    /// Instances beyond the oracle's reach.
    pub skipped: usize,
    /// Answer tuples compared.
    pub tuples: usize,
    /// Members enumerated, over both encodings.
    pub members: usize,
    /// Facts whose rank was compared with their minimum proof depth.
    pub ranked_facts: usize,
    pub mismatches: Vec<Mismatch>,
    pub elapsed_ms: f64,
    pub max_instance_ms: f64,
}

impl SweepReport {
    pub fn count(&self, kind: MismatchKind) -> usize {
        self.mismatches.iter().filter(|m| m.kind == kind).count()
    }

    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }

    fn absorb(&mut self, o: InstanceOutcome) {
        self.attempted += 1;
        self.max_instance_ms = self.max_instance_ms.max(o.ms);
        if o.skipped {
            self.skipped += 1;
            return;
        }
        self.instances += 1;
        self.tuples += o.tuples;
        self.members += o.members;
        self.ranked_facts += o.ranked_facts;
        self.mismatches.extend(o.mismatches);
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub oracle: OracleOptions,
    /// Check decoded witnesses and their unravellings.
    pub witnesses: bool,
    /// Compare fixpoint ranks with minimum proof-tree depths.
    pub ranks: bool,
    /// Re-check every member with `check_membership`.
    pub membership: bool,
    /// Instances whose answer relation is empty do not count.
    pub require_answers: bool,
    /// Also enumerate with this solver and compare.
    pub external: Option<ExternalSolver>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            oracle: OracleOptions::default(),
            witnesses: true,
            ranks: true,
            membership: true,
            require_answers: true,
            external: None,
        }
    }
}

#[derive(Default)]
struct InstanceOutcome {
    skipped: bool,
    tuples: usize,
    members: usize,
    ranked_facts: usize,
    mismatches: Vec<Mismatch>,
    ms: f64,
}

fn show(tuple: &[Symbol]) -> String {
    let parts: Vec<&str> = tuple.iter().map(|s| s.as_str()).collect();
    format!("({})", parts.join(","))
}

fn show_family(f: &BTreeSet<Support>) -> String {
    let parts: Vec<String> = f.iter().map(|s| format!("{{{s}}}")).collect();
    parts.join(" ")
}

/// Runs every check on one instance. Oracle blow-ups mark it as skipped.
fn check_instance(name: &str, q: &Query, db: &Database, opts: &SweepOptions) -> Result<InstanceOutcome> {
    let started = Instant::now();
    let mut out = InstanceOutcome::default();
    let mut miss = |kind, tuple: &str, expected: String, got: String| {
        out.mismatches.push(Mismatch {
            kind,
            instance: name.to_owned(),
            tuple: tuple.to_owned(),
            expected,
            got,
        })
    };
    let fix = fixpoint(&q.program, db, &EngineOptions::default())?;
    let tuples = answers_from(q, &fix);
    if tuples.is_empty() && opts.require_answers {
        return Ok(InstanceOutcome {
            skipped: true,
            ..Default::default()
        });
    }

    let mut oracles = Vec::with_capacity(tuples.len());
    for t in &tuples {
        match oracle_unwhy(q, db, t, &opts.oracle) {
            Ok(set) => oracles.push(set),
            Err(Error::OracleTooLarge(_)) => {
                return Ok(InstanceOutcome {
                    skipped: true,
                    ..Default::default()
                })
            }
            Err(e) => return Err(e),
        }
    }

    let mut ranked = 0;
    if opts.ranks {
        match ground(&q.program, db, &opts.oracle) {
            Ok(g) => {
                for f in fix.facts() {
                    ranked += 1;
                    let rank = fix.rank(&f).map(|r| r as usize);
                    let depth = min_depth_tree(&g, &f).map(|t| t.depth());
                    if rank != depth {
                        miss(MismatchKind::Rank, &f.to_string(), format!("{depth:?}"), format!("{rank:?}"));
                    }
                }
            }
            Err(Error::OracleTooLarge(_)) => {}
            Err(e) => return Err(e),
        }
    }

    let mut members = 0;
    for (t, expected) in tuples.iter().zip(&oracles) {
        let label = show(t);
        let goal = q.goal(t)?;
        let mut per_encoding = Vec::new();
        for acyc in [Acyclicity::TransitiveClosure, Acyclicity::VertexElimination] {
            let eopts = EnumerateOptions {
                encode: EncodeOptions::with(acyc),
                witnesses: opts.witnesses,
                ..Default::default()
            };
            let mut session = enumerate(q, db, t, eopts.clone())?;
            let mut got = BTreeSet::new();
            for m in session.by_ref() {
                let m = m?;
                members += 1;
                if opts.witnesses {
                    let dag = m.witness.as_ref().expect("witnesses requested");
                    let dag_ok = dag.is_compressed()
                        && validate_dag(dag, &q.program, db, &goal)
                        && dag.support() == m.facts;
                    let tree = unravel(dag, &q.program);
                    let tree_ok = validate_tree(&tree, &q.program, db, &goal)
                        && is_unambiguous(&tree)
                        && tree.support() == m.facts;
                    if !(dag_ok && tree_ok) {
                        miss(
                            MismatchKind::Witness,
                            &label,
                            format!("{{{}}}", m.facts),
                            format!("dag ok: {dag_ok}, tree ok: {tree_ok}"),
                        );
                    }
                }
                if opts.membership && !check_membership(q, db, t, &m.facts.to_database(), &eopts)? {
                    miss(MismatchKind::Membership, &label, "member".into(), format!("{{{}}}", m.facts));
                }
                if !got.insert(m.facts.clone()) {
                    miss(MismatchKind::Duplicate, &label, "distinct".into(), format!("{{{}}}", m.facts));
                }
            }
            if session.status() != SessionStatus::Exhausted {
                miss(MismatchKind::Status, &label, "Exhausted".into(), session.status().to_string());
            }
            if &got != expected {
                miss(
                    MismatchKind::Oracle,
                    &format!("{label} [{acyc}]"),
                    show_family(expected),
                    show_family(&got),
                );
            }
            per_encoding.push(got);
        }
        if let Some(ext) = &opts.external {
            let eopts = EnumerateOptions {
                external: Some(ext.clone()),
                ..Default::default()
            };
            let got = enumerate(q, db, t, eopts)?
                .map(|m| m.map(|m| m.facts))
                .collect::<Result<BTreeSet<_>>>()?;
            if got != per_encoding[1] {
                miss(MismatchKind::Solvers, &label, show_family(&per_encoding[1]), show_family(&got));
            }
        }
        if per_encoding[0] != per_encoding[1] {
            miss(
                MismatchKind::Encodings,
                &label,
                show_family(&per_encoding[0]),
                show_family(&per_encoding[1]),
            );
        }
    }
    out.tuples = tuples.len();
    out.members = members;
    out.ranked_facts = ranked;
    out.ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(out)
}

fn errored(name: &str, e: Error) -> InstanceOutcome {
    InstanceOutcome {
        mismatches: vec![Mismatch {
            kind: MismatchKind::Oracle,
            instance: name.to_owned(),
            tuple: String::new(),
            expected: "no error".into(),
            got: e.to_string(),
        }],
        ..Default::default()
    }
}

/// Compares enumeration against `oracle_unwhy` until `n_instances` random
/// instances have been compared, cycling through `profiles`. The two pinned
/// examples come first and count toward the total.
pub fn sweep_unwhy(profiles: &[Profile], n_instances: usize, seed: u64, opts: &SweepOptions) -> SweepReport {
    assert!(!profiles.is_empty(), "need a profile");
    let started = Instant::now();
    let mut report = SweepReport::default();
    for (name, (p, d)) in [
        ("example-2.2", testing::example_2_2()),
        ("example-5.1", testing::example_5_1()),
    ] {
        let q = Query::new(p, "A").expect("A is intensional");
        report.absorb(check_instance(name, &q, &d, opts).unwrap_or_else(|e| errored(name, e)));
    }
    // Bounded so that a profile producing nothing but skips still stops.
    let max_attempts = 20 * n_instances + 100;
    let mut next = 0u64;
    while report.instances < n_instances && (next as usize) < max_attempts {
        let batch = (n_instances - report.instances).max(8) as u64 * 3 / 2;
        let outcomes: Vec<InstanceOutcome> = (next..next + batch)
            .into_par_iter()
            .map(|i| {
                let profile = profiles[i as usize % profiles.len()];
                let s = seed.wrapping_add(i);
                let name = format!("{profile}#{s}");
                let (q, d) = gen_random_instance(profile, s);
                check_instance(&name, &q, &d, opts).unwrap_or_else(|e| errored(&name, e))
            })
            .collect();
        next += batch;
        for o in outcomes {
            if report.instances >= n_instances {
                break;
            }
            report.absorb(o);
        }
    }
    report.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    report
}

/// Checks that φ is satisfiable iff `D_φ` is in `why((v1), D_φ, Q)` over
/// random formulas with at most 3 variables and 3 clauses, starting with a
/// trivially satisfiable and a trivially unsatisfiable one.
pub fn sweep_reduction(n_formulas: usize, seed: u64, oracle: &OracleOptions) -> SweepReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut formulas = vec![
        Cnf3Formula::new(1, vec![[Literal::pos(1); 3]]).expect("valid"),
        Cnf3Formula::new(1, vec![[Literal::pos(1); 3], [Literal::neg(1); 3]]).expect("valid"),
    ];
    while formulas.len() < n_formulas {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        formulas.push(Cnf3Formula::random(n, m, &mut rng));
    }
    let outcomes: Vec<InstanceOutcome> = formulas
        .par_iter()
        .map(|phi| {
            let t0 = Instant::now();
            let name = phi.to_string();
            let (q, db, t) = gen_3sat_instance(phi);
            let sat = phi.is_satisfiable();
            let mut o = match oracle_why(&q, &db, &t, oracle) {
                Ok(why) => {
                    let member = why.contains(&Support::new(db.iter().cloned()));
                    let mut o = InstanceOutcome {
                        tuples: 1,
                        members: why.len(),
                        ..Default::default()
                    };
                    if member != sat {
                        o.mismatches.push(Mismatch {
                            kind: MismatchKind::Reduction,
                            instance: name,
                            tuple: show(&t),
                            expected: format!("satisfiable: {sat}"),
                            got: format!("member: {member}"),
                        });
                    }
                    o
                }
                Err(Error::OracleTooLarge(_)) => InstanceOutcome {
                    skipped: true,
                    ..Default::default()
                },
                Err(e) => errored(&name, e),
            };
            o.ms = t0.elapsed().as_secs_f64() * 1e3;
            o
        })
        .collect();
    let mut report = SweepReport::default();
    for o in outcomes {
        report.absorb(o);
    }
    report.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    report
}

#[derive(Clone, Debug, Serialize)]
pub struct DelayStats {
    pub min_ms: f64,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl DelayStats {
    pub fn of(delays: &[std::time::Duration]) -> Option<Self> {
        if delays.is_empty() {
            return None;
        }
        let mut ms: Vec<f64> = delays.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        let median = if n % 2 == 1 { ms[n / 2] } else { (ms[n / 2 - 1] + ms[n / 2]) / 2.0 };
        Some(DelayStats {
            min_ms: ms[0],
            median_ms: median,
            mean_ms: ms.iter().sum::<f64>() / n as f64,
            max_ms: ms[n - 1],
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TupleRecord {
    pub tuple: Vec<String>,
    #[serde(flatten)]
    pub pipeline: PipelineStats,
    pub members: usize,
    pub status: SessionStatus,
    pub enumerate_ms: f64,
    pub delays: Option<DelayStats>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub facts: usize,
    pub answers: usize,
    pub acyclicity: Acyclicity,
    pub fixpoint_ms: f64,
    pub tuples: Vec<TupleRecord>,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    /// Number of answer tuples drawn.
    pub tuples: usize,
    /// Members per tuple; 0 only builds the closure and the formula.
    pub limit: usize,
    pub seed: u64,
    pub acyclicity: Acyclicity,
    pub time_limit: Option<std::time::Duration>,
    /// Run the tuples concurrently.
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            tuples: 5,
            limit: 1000,
            seed: 0,
            acyclicity: Acyclicity::default(),
            time_limit: None,
            parallel: false,
        }
    }
}

/// Evaluates the query once, draws answer tuples uniformly with a seeded
/// generator and measures closure, encoding and enumeration per tuple.
pub fn bench(q: &Query, db: &Database, opts: &BenchOptions) -> Result<BenchReport> {
    let t = Instant::now();
    let engine = EngineOptions {
        record_instantiations: false,
        ..Default::default()
    };
    let fix = fixpoint(&q.program, db, &engine)?;
    let fixpoint_ms = t.elapsed().as_secs_f64() * 1e3;
    // Derivation order is deterministic, so sampling from it is reproducible.
    let total = fix.facts_of(q.answer).count();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut idx = rand::seq::index::sample(&mut rng, total, opts.tuples.min(total)).into_vec();
    let order = idx.clone();
    idx.sort_unstable();
    let mut chosen: FxHashMap<usize, Tuple> = FxHashMap::default();
    let mut it = idx.iter().peekable();
    for (i, f) in fix.facts_of(q.answer).enumerate() {
        match it.peek() {
            Some(&&j) if j == i => {
                chosen.insert(i, f.args);
                it.next();
            }
            Some(_) => {}
            None => break,
        }
    }
    let picked: Vec<Tuple> = order.iter().map(|i| chosen.remove(i).expect("sampled")).collect();
    let run = |t: &Tuple| -> Result<TupleRecord> {
        let eopts = EnumerateOptions {
            encode: EncodeOptions::with(opts.acyclicity),
            max_members: Some(opts.limit),
            time_limit: opts.time_limit,
            ..Default::default()
        };
        let mut session = EnumerationSession::from_fixpoint(q, db, &fix, t, eopts)?;
        let t0 = Instant::now();
        let members = if opts.limit == 0 { 0 } else { session.by_ref().map(|m| m.map(|_| ())).collect::<Result<Vec<_>>>()?.len() };
        Ok(TupleRecord {
            tuple: t.iter().map(|s| s.to_string()).collect(),
            pipeline: session.stats().clone(),
            members,
            status: session.status(),
            enumerate_ms: t0.elapsed().as_secs_f64() * 1e3,
            delays: DelayStats::of(session.delays()),
        })
    };
    let tuples = if opts.parallel {
        picked.par_iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        picked.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    Ok(BenchReport {
        facts: db.len(),
        answers: total,
        acyclicity: opts.acyclicity,
        fixpoint_ms,
        tuples,
    })
}
