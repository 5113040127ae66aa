//! Membership checks and incremental enumeration of the supports of
//! unambiguous proof trees, by SAT solving with blocking clauses.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rustc_hash::FxHashSet;
use serde::Serialize;

use crate::closure::{goal_closure, DownwardClosure};
use crate::datalog::{Database, Fact, Query};
use crate::encoder::{encode, CnfInstance, EncodeOptions};
use crate::engine::{fixpoint, EngineOptions, FixpointResult};
use crate::error::{Error, Result};
use crate::prooftrees::{ProofDag, Support};
use crate::sat::{Cnf, ExternalSolver, Lit, SolveResult, Solver, SolverOptions};
use crate::symbol::Symbol;

#[derive(Clone, Debug, Default)]
pub struct EnumerateOptions {
    pub engine: EngineOptions,
    pub encode: EncodeOptions,
    pub solver: SolverOptions,
    /// Stop after this many members.
    pub max_members: Option<usize>,
    /// Wall-clock budget for the enumeration, excluding preparation.
    pub time_limit: Option<Duration>,
    /// Decode the selected subgraph of every model.
    pub witnesses: bool,
    /// Solve with this program instead of the built-in solver.
    pub external: Option<ExternalSolver>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SessionStatus {
    Running,
    Exhausted,
    LimitReached,
    Timeout,
}

impl std::fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug)]
pub struct ProvenanceMember {
    pub facts: Support,
    /// Position in the enumeration, from 0.
    pub ordinal: usize,
    pub witness: Option<ProofDag>,
    /// Time since the previous member, or since enumeration started.
    pub delay: Duration,
}

/// Preparation timings and formula size.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PipelineStats {
    pub fixpoint_ms: f64,
    pub closure_ms: f64,
    pub encode_ms: f64,
    pub closure_nodes: usize,
    pub closure_hyperedges: usize,
    pub vars: u32,
    pub clauses: usize,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

enum Backend {
    Internal(Box<Solver>),
    External {
        solver: ExternalSolver,
        cnf: Cnf,
        model: Vec<bool>,
    },
}

impl Backend {
    fn new(inst: &CnfInstance, opts: &EnumerateOptions) -> Self {
        match &opts.external {
            Some(ext) => Backend::External {
                solver: ext.clone(),
                cnf: inst.cnf.clone(),
                model: Vec::new(),
            },
            None => {
                let mut s = Solver::new(opts.solver.clone());
                s.ensure_vars(inst.cnf.num_vars);
                for c in &inst.cnf.clauses {
                    s.add_clause(c);
                }
                Backend::Internal(Box::new(s))
            }
        }
    }

    fn solve(&mut self, assumptions: &[Lit], time_limit: Option<Duration>) -> Result<bool> {
        match self {
            Backend::Internal(s) => {
                if time_limit.is_some() {
                    s.options_mut().time_limit = time_limit;
                }
                Ok(s.solve_with_assumptions(assumptions)? == SolveResult::Sat)
            }
            Backend::External { solver, cnf, model } => {
                let mut with = cnf.clone();
                for &a in assumptions {
                    with.add_clause([a]);
                }
                match solver.solve(&with)? {
                    Some(m) => {
                        *model = m;
                        Ok(true)
                    }
                    None => Ok(false),
                }
            }
        }
    }

    fn model(&self) -> &[bool] {
        match self {
            Backend::Internal(s) => s.model(),
            Backend::External { model, .. } => model,
        }
    }

    fn add_clause(&mut self, clause: Vec<Lit>) {
        match self {
            Backend::Internal(s) => {
                s.add_clause(&clause);
            }
            Backend::External { cnf, .. } => cnf.add_clause(clause),
        }
    }
}

/// An enumeration of the supports of the unambiguous proof trees of one
/// goal. Iterating yields members until the formula is exhausted or a
/// limit is hit; [`EnumerationSession::status`] tells which.
pub struct EnumerationSession {
    goal: Fact,
    instance: Option<Arc<CnfInstance>>,
    backend: Option<Backend>,
    opts: EnumerateOptions,
    status: SessionStatus,
    emitted: FxHashSet<Support>,
    count: usize,
    delays: Vec<Duration>,
    last: Option<Instant>,
    started: Option<Instant>,
    stats: PipelineStats,
}

impl EnumerationSession {
    /// Prepares the session from an already computed fixpoint.
    pub fn from_fixpoint(
        q: &Query,
        db: &Database,
        fix: &FixpointResult,
        tuple: &[Symbol],
        opts: EnumerateOptions,
    ) -> Result<Self> {
        let goal = q.goal(tuple)?;
        let mut stats = PipelineStats::default();
        if !fix.contains(&goal) {
            return Ok(EnumerationSession {
                goal,
                instance: None,
                backend: None,
                opts,
                status: SessionStatus::Exhausted,
                emitted: FxHashSet::default(),
                count: 0,
                delays: Vec::new(),
                last: None,
                started: None,
                stats,
            });
        }
        let t = Instant::now();
        let dc = goal_closure(db, fix, &goal)?;
        stats.closure_ms = ms(t.elapsed());
        Self::from_closure(&dc, opts, stats)
    }

    /// Prepares the session for the goal of `dc`.
    pub fn from_closure(dc: &DownwardClosure, opts: EnumerateOptions, mut stats: PipelineStats) -> Result<Self> {
        let t = Instant::now();
        let inst = encode(dc, &opts.encode)?;
        stats.encode_ms = ms(t.elapsed());
        stats.closure_nodes = dc.graph.node_count();
        stats.closure_hyperedges = dc.graph.edge_count();
        stats.vars = inst.cnf.num_vars;
        stats.clauses = inst.cnf.clauses.len();
        let backend = Backend::new(&inst, &opts);
        Ok(EnumerationSession {
            goal: dc.goal().clone(),
            instance: Some(Arc::new(inst)),
            backend: Some(backend),
            opts,
            status: SessionStatus::Running,
            emitted: FxHashSet::default(),
            count: 0,
            delays: Vec::new(),
            last: None,
            started: None,
            stats,
        })
    }

    pub fn goal(&self) -> &Fact {
        &self.goal
    }

    /// Whether the goal is an answer of the query.
    pub fn is_answer(&self) -> bool {
        self.instance.is_some()
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn instance(&self) -> Option<&CnfInstance> {
        self.instance.as_deref()
    }

    pub fn stats(&self) -> &PipelineStats {
        &self.stats
    }

    /// Delay before each emitted member.
    pub fn delays(&self) -> &[Duration] {
        &self.delays
    }

    pub fn emitted(&self) -> usize {
        self.count
    }

    /// A checker over the same formula, unaffected by blocking clauses.
    pub fn membership_checker(&self) -> Option<MembershipChecker> {
        self.instance.clone().map(|inst| MembershipChecker::new(inst, self.opts.solver.clone()))
    }

    fn next_member(&mut self) -> Result<Option<ProvenanceMember>> {
        if self.status != SessionStatus::Running {
            return Ok(None);
        }
        if self.opts.max_members.is_some_and(|m| self.count >= m) {
            self.status = SessionStatus::LimitReached;
            return Ok(None);
        }
        let now = Instant::now();
        let started = *self.started.get_or_insert(now);
        let last = self.last.unwrap_or(started);
        let remaining = match self.opts.time_limit {
            Some(limit) => match limit.checked_sub(started.elapsed()) {
                Some(r) if !r.is_zero() => Some(r),
                _ => {
                    self.status = SessionStatus::Timeout;
                    return Ok(None);
                }
            },
            None => None,
        };
        let inst = self.instance.as_ref().expect("running session has a formula");
        let backend = self.backend.as_mut().expect("running session has a solver");
        let sat = match backend.solve(&[], remaining) {
            Ok(sat) => sat,
            Err(Error::Timeout(_)) => {
                self.status = SessionStatus::Timeout;
                return Ok(None);
            }
            Err(e) => {
                self.status = SessionStatus::Exhausted;
                return Err(e);
            }
        };
        if !sat {
            self.status = SessionStatus::Exhausted;
            return Ok(None);
        }
        let model = backend.model();
        let facts = inst.db_of_model(model);
        let witness = self.opts.witnesses.then(|| inst.witness(model));
        let block: Vec<Lit> = inst
            .db_leaf_vars
            .iter()
            .map(|(v, _)| Lit::new(*v, model[v.index()]))
            .collect();
        backend.add_clause(block);
        let delay = last.elapsed();
        self.last = Some(Instant::now());
        self.delays.push(delay);
        let fresh = self.emitted.insert(facts.clone());
        debug_assert!(fresh, "blocking clause admitted a repeated member");
        let ordinal = self.count;
        self.count += 1;
        Ok(Some(ProvenanceMember {
            facts,
            ordinal,
            witness,
            delay,
        }))
    }
}

impl Iterator for EnumerationSession {
    type Item = Result<ProvenanceMember>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_member().transpose()
    }
}

/// Starts enumerating the supports of unambiguous proof trees of
/// `answer(tuple)`. A tuple that is not an answer gives an empty session
/// with status `Exhausted`.
pub fn enumerate(q: &Query, db: &Database, tuple: &[Symbol], opts: EnumerateOptions) -> Result<EnumerationSession> {
    q.goal(tuple)?;
    let engine = EngineOptions {
        record_instantiations: false,
        ..opts.engine.clone()
    };
    let t = Instant::now();
    let fix = fixpoint(&q.program, db, &engine)?;
    let fixpoint_ms = ms(t.elapsed());
    let mut session = EnumerationSession::from_fixpoint(q, db, &fix, tuple, opts)?;
    session.stats.fixpoint_ms = fixpoint_ms;
    Ok(session)
}

/// Decides membership of subsets against one formula, using assumptions.
pub struct MembershipChecker {
    instance: Arc<CnfInstance>,
    solver: Solver,
}

impl MembershipChecker {
    pub fn new(instance: Arc<CnfInstance>, opts: SolverOptions) -> Self {
        let mut solver = Solver::new(opts);
        solver.ensure_vars(instance.cnf.num_vars);
        for c in &instance.cnf.clauses {
            solver.add_clause(c);
        }
        MembershipChecker { instance, solver }
    }

    /// Whether `subset` is the support of some unambiguous proof tree.
    /// Facts outside the closure can never be leaves.
    pub fn check(&mut self, subset: &Support) -> Result<bool> {
        let leaves = &self.instance.db_leaf_vars;
        let inside = subset
            .facts()
            .iter()
            .all(|f| leaves.iter().any(|(_, g)| g == f));
        if !inside {
            return Ok(false);
        }
        let assumptions: Vec<Lit> = leaves
            .iter()
            .map(|(v, f)| Lit::new(*v, !subset.contains(f)))
            .collect();
        Ok(self.solver.solve_with_assumptions(&assumptions)? == SolveResult::Sat)
    }
}

/// Whether `subset` is the support of an unambiguous proof tree of
/// `answer(tuple)` w.r.t. `db`.
pub fn check_membership(
    q: &Query,
    db: &Database,
    tuple: &[Symbol],
    subset: &Database,
    opts: &EnumerateOptions,
) -> Result<bool> {
    if let Some(f) = subset.iter().find(|f| !db.contains(f)) {
        return Err(Error::NotASubset(f.to_string()));
    }
    let goal = q.goal(tuple)?;
    let engine = EngineOptions {
        record_instantiations: false,
        ..opts.engine.clone()
    };
    let fix = fixpoint(&q.program, db, &engine)?;
    if !fix.contains(&goal) {
        return Ok(false);
    }
    let dc = goal_closure(db, &fix, &goal)?;
    let inst = Arc::new(encode(&dc, &opts.encode)?);
    let support = Support::new(subset.iter().cloned());
    if let Some(ext) = &opts.external {
        let leaves = &inst.db_leaf_vars;
        if !support.facts().iter().all(|f| leaves.iter().any(|(_, g)| g == f)) {
            return Ok(false);
        }
        let mut cnf = inst.cnf.clone();
        for (v, f) in leaves {
            cnf.add_clause([Lit::new(*v, !support.contains(f))]);
        }
        return Ok(ext.solve(&cnf)?.is_some());
    }
    MembershipChecker::new(inst, opts.solver.clone()).check(&support)
}

/// `db(τ)` for a model of the instance's formula.
pub fn db_of_assignment(model: &[bool], instance: &CnfInstance) -> Support {
    instance.db_of_model(model)
}
