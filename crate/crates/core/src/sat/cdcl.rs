//! Conflict-driven clause learning in the MiniSat style: two watched
//! literals, first-UIP learning with clause minimisation, VSIDS branching,
//! phase saving, Luby restarts and learnt-clause reduction.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Lit, Var};
use crate::error::{Error, Result};

const TRUE: u8 = 1;
const FALSE: u8 = 0;
const UNDEF: u8 = 2;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub seed: u64,
    /// Probability of a random branching decision.
    pub random_var_freq: f64,
    /// Conflicts allowed per call to `solve`.
    pub max_conflicts: Option<u64>,
    /// Wall-clock time allowed per call to `solve`.
    pub time_limit: Option<Duration>,
    pub restart_base: u64,
    pub var_decay: f64,
    pub clause_decay: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            seed: 0x5eed,
            random_var_freq: 0.0,
            max_conflicts: None,
            time_limit: None,
            restart_base: 100,
            var_decay: 0.95,
            clause_decay: 0.999,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat,
    Unsat,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolverStats {
    pub solves: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub learnt_clauses: u64,
}

#[derive(Clone, Debug)]
struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Clone, Copy, Debug)]
struct Watcher {
    cref: u32,
    blocker: Lit,
}

/// Binary max-heap of variables keyed by activity, with position index.
#[derive(Clone, Debug, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<Option<u32>>,
}

impl VarHeap {
    fn grow(&mut self, n: usize) {
        self.pos.resize(n, None);
    }

    fn contains(&self, v: usize) -> bool {
        self.pos[v].is_some()
    }

    fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if act[self.heap[parent] as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.pos[self.heap[i] as usize] = Some(i as u32);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i as u32);
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let child = if r < self.heap.len() && act[self.heap[r] as usize] > act[self.heap[l] as usize] {
                r
            } else {
                l
            };
            if act[self.heap[child] as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[child];
            self.pos[self.heap[i] as usize] = Some(i as u32);
            i = child;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i as u32);
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v as u32);
        let i = self.heap.len() - 1;
        self.pos[v] = Some(i as u32);
        self.up(i, act);
    }

    fn increased(&mut self, v: usize, act: &[f64]) {
        if let Some(i) = self.pos[v] {
            self.up(i as usize, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = Some(0);
            self.down(0, act);
        }
        Some(top as usize)
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq as i32)
}

/// An incremental CDCL solver. Clauses may be added between calls to
/// [`Solver::solve`]; learnt clauses are kept.
#[derive(Clone, Debug)]
pub struct Solver {
    opts: SolverOptions,
    rng: ChaCha8Rng,
    clauses: Vec<Clause>,
    deleted: usize,
    learnts: Vec<u32>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    var_inc: f64,
    clause_inc: f64,
    heap: VarHeap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    ok: bool,
    model: Vec<bool>,
    max_learnts: f64,
    stats: SolverStats,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new(SolverOptions::default())
    }
}

impl Solver {
    pub fn new(opts: SolverOptions) -> Self {
        Solver {
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            opts,
            clauses: Vec::new(),
            deleted: 0,
            learnts: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            polarity: Vec::new(),
            activity: Vec::new(),
            var_inc: 1.0,
            clause_inc: 1.0,
            heap: VarHeap::default(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            seen: Vec::new(),
            ok: true,
            model: Vec::new(),
            max_learnts: 0.0,
            stats: SolverStats::default(),
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.assigns.len() as u32
    }

    pub fn new_var(&mut self) -> Var {
        let n = self.num_vars() as usize + 1;
        self.ensure_vars(n as u32);
        Var(n as u32)
    }

    /// Declares variables `1..=n`.
    pub fn ensure_vars(&mut self, n: u32) {
        let n = n as usize;
        let old = self.assigns.len();
        if n <= old {
            return;
        }
        self.assigns.resize(n, UNDEF);
        self.level.resize(n, 0);
        self.reason.resize(n, None);
        self.polarity.resize(n, true);
        self.activity.resize(n, 0.0);
        self.seen.resize(n, false);
        self.watches.resize(2 * n, Vec::new());
        self.heap.grow(n);
        for v in old..n {
            self.heap.insert(v, &self.activity);
        }
    }

    pub fn options_mut(&mut self) -> &mut SolverOptions {
        &mut self.opts
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len() - self.deleted
    }

    /// `false` once the clause set is unsatisfiable without assumptions.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    fn value(&self, l: Lit) -> u8 {
        let v = self.assigns[l.var().index()];
        if v == UNDEF {
            UNDEF
        } else {
            v ^ l.is_negated() as u8
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        let v = l.var().index();
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = !l.is_negated() as u8;
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn cancel_until(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().index();
            self.polarity[v] = l.is_negated();
            self.assigns[v] = UNDEF;
            self.reason[v] = None;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level);
        self.qhead = lim;
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[(!lits[0]).code()].push(Watcher { cref, blocker: lits[1] });
        self.watches[(!lits[1]).code()].push(Watcher { cref, blocker: lits[0] });
        self.clauses.push(Clause {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    /// Adds a clause. Returns `false` if the clause set became
    /// unsatisfiable. Literals over undeclared variables declare them.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if let Some(max) = lits.iter().map(|l| l.var().0).max() {
            self.ensure_vars(max);
        }
        self.cancel_until(0);
        if !self.ok {
            return false;
        }
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        let mut kept = Vec::with_capacity(c.len());
        for (i, &l) in c.iter().enumerate() {
            if i + 1 < c.len() && c[i + 1] == !l {
                return true;
            }
            match self.value(l) {
                TRUE => return true,
                FALSE => {}
                _ => kept.push(l),
            }
        }
        match kept.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(kept[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(kept, false);
                true
            }
        }
    }

    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.code()]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref as usize;
                if self.clauses[cref].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                let watcher = Watcher {
                    cref: w.cref,
                    blocker: first,
                };
                if first != w.blocker && self.value(first) == TRUE {
                    ws[j] = watcher;
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[cref].lits[k];
                    if self.value(l) != FALSE {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[(!l).code()].push(watcher);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = watcher;
                j += 1;
                if self.value(first) == FALSE {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.cref));
                }
            }
            ws.truncate(j);
            self.watches[p.code()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.increased(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.clause_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.clause_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause, asserting
    /// literal first, and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, usize) {
        let mut learnt: Vec<Lit> = vec![Lit(0)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let current = self.decision_level() as u32;
        let mut touched: Vec<usize> = Vec::new();
        loop {
            self.bump_clause(confl);
            let start = usize::from(p.is_some());
            let len = self.clauses[confl as usize].lits.len();
            for k in start..len {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    touched.push(v);
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let lit = self.trail[index];
            p = Some(lit);
            self.seen[lit.var().index()] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[lit.var().index()].expect("implied literal has a reason");
        }
        learnt[0] = !p.expect("conflict at positive level");

        // Drop literals implied by other literals of the clause.
        let mut keep = vec![learnt[0]];
        for &l in &learnt[1..] {
            let v = l.var().index();
            let redundant = match self.reason[v] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..].iter().all(|q| {
                    let u = q.var().index();
                    self.seen[u] || self.level[u] == 0
                }),
            };
            if !redundant {
                keep.push(l);
            }
        }
        for v in touched {
            self.seen[v] = false;
        }
        let mut learnt = keep;

        let level = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().index()] > self.level[learnt[max_i].var().index()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var().index()] as usize
        };
        (learnt, level)
    }

    fn locked(&self, cref: u32) -> bool {
        let l = self.clauses[cref as usize].lits[0];
        self.reason[l.var().index()] == Some(cref) && self.value(l) == TRUE
    }

    fn reduce_db(&mut self) {
        let mut learnts = std::mem::take(&mut self.learnts);
        learnts.sort_by(|a, b| {
            self.clauses[*a as usize]
                .activity
                .total_cmp(&self.clauses[*b as usize].activity)
        });
        let half = learnts.len() / 2;
        let mut kept = Vec::with_capacity(learnts.len());
        for (i, cref) in learnts.into_iter().enumerate() {
            let c = &self.clauses[cref as usize];
            if i < half && c.lits.len() > 2 && !self.locked(cref) {
                let c = &mut self.clauses[cref as usize];
                c.deleted = true;
                c.lits = Vec::new();
                self.deleted += 1;
            } else {
                kept.push(cref);
            }
        }
        self.learnts = kept;
        if self.deleted * 2 > self.clauses.len() {
            self.compact();
        }
    }

    /// Drops deleted clauses and renumbers the rest.
    fn compact(&mut self) {
        let mut remap = vec![u32::MAX; self.clauses.len()];
        let mut kept = Vec::with_capacity(self.clauses.len() - self.deleted);
        for (i, c) in std::mem::take(&mut self.clauses).into_iter().enumerate() {
            if !c.deleted {
                remap[i] = kept.len() as u32;
                kept.push(c);
            }
        }
        self.clauses = kept;
        self.deleted = 0;
        for r in self.reason.iter_mut().flatten() {
            *r = remap[*r as usize];
        }
        for l in &mut self.learnts {
            *l = remap[*l as usize];
        }
        for ws in &mut self.watches {
            ws.retain_mut(|w| {
                let n = remap[w.cref as usize];
                w.cref = n;
                n != u32::MAX
            });
        }
    }

    fn pick_branch_lit(&mut self) -> Option<Lit> {
        let n = self.assigns.len();
        if self.opts.random_var_freq > 0.0 && n > 0 && self.rng.random::<f64>() < self.opts.random_var_freq {
            let v = self.rng.random_range(0..n);
            if self.assigns[v] == UNDEF {
                return Some(Lit::new(Var::from_index(v), self.polarity[v]));
            }
        }
        while !self.heap.is_empty() {
            let v = self.heap.pop(&self.activity)?;
            if self.assigns[v] == UNDEF {
                return Some(Lit::new(Var::from_index(v), self.polarity[v]));
            }
        }
        None
    }

    pub fn solve(&mut self) -> Result<SolveResult> {
        self.solve_with_assumptions(&[])
    }

    /// Solves under temporary unit assumptions. `Unsat` means unsatisfiable
    /// together with the assumptions; the clause set itself stays usable.
    pub fn solve_with_assumptions(&mut self, assumptions: &[Lit]) -> Result<SolveResult> {
        if let Some(max) = assumptions.iter().map(|l| l.var().0).max() {
            self.ensure_vars(max);
        }
        self.stats.solves += 1;
        self.cancel_until(0);
        if !self.ok {
            return Ok(SolveResult::Unsat);
        }
        if self.propagate().is_some() {
            self.ok = false;
            return Ok(SolveResult::Unsat);
        }
        let start = Instant::now();
        let mut conflicts_here = 0u64;
        self.max_learnts = self.max_learnts.max(self.num_clauses() as f64 / 3.0).max(2000.0);
        let mut restart = 0u64;
        let result = loop {
            let budget = (luby(2.0, restart) * self.opts.restart_base as f64) as u64;
            match self.search(assumptions, budget, &mut conflicts_here, start)? {
                Some(r) => break r,
                None => {
                    restart += 1;
                    self.stats.restarts += 1;
                    self.max_learnts *= 1.05;
                }
            }
        };
        if result == SolveResult::Sat {
            self.model = self.assigns.iter().map(|&a| a == TRUE).collect();
        }
        self.cancel_until(0);
        Ok(result)
    }

    fn out_of_budget(&self, conflicts: u64, start: Instant) -> bool {
        self.opts.max_conflicts.is_some_and(|m| conflicts > m)
            || self.opts.time_limit.is_some_and(|t| start.elapsed() > t)
    }

    /// Runs until a verdict or `budget` conflicts; `None` asks for a restart.
    fn search(
        &mut self,
        assumptions: &[Lit],
        budget: u64,
        conflicts_here: &mut u64,
        start: Instant,
    ) -> Result<Option<SolveResult>> {
        let mut conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                conflicts += 1;
                *conflicts_here += 1;
                self.stats.conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Ok(Some(SolveResult::Unsat));
                }
                let (learnt, level) = self.analyze(confl);
                self.cancel_until(level);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(first, Some(cref));
                    self.stats.learnt_clauses += 1;
                }
                self.var_inc /= self.opts.var_decay;
                self.clause_inc /= self.opts.clause_decay;
                if *conflicts_here % 64 == 0 && self.out_of_budget(*conflicts_here, start) {
                    self.cancel_until(0);
                    return Err(Error::Timeout(start.elapsed()));
                }
            } else {
                if conflicts >= budget {
                    self.cancel_until(0);
                    return Ok(None);
                }
                if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                    self.reduce_db();
                }
                let mut next = None;
                while self.decision_level() < assumptions.len() {
                    let p = assumptions[self.decision_level()];
                    match self.value(p) {
                        TRUE => self.trail_lim.push(self.trail.len()),
                        FALSE => return Ok(Some(SolveResult::Unsat)),
                        _ => {
                            next = Some(p);
                            break;
                        }
                    }
                }
                let next = match next {
                    Some(p) => p,
                    None => {
                        self.stats.decisions += 1;
                        match self.pick_branch_lit() {
                            Some(p) => p,
                            None => return Ok(Some(SolveResult::Sat)),
                        }
                    }
                };
                if self.stats.decisions % 1024 == 0 && self.out_of_budget(*conflicts_here, start) {
                    self.cancel_until(0);
                    return Err(Error::Timeout(start.elapsed()));
                }
                self.trail_lim.push(self.trail.len());
                self.enqueue(next, None);
            }
        }
    }

    /// The model of the last satisfiable call, indexed by [`Var::index`].
    pub fn model(&self) -> &[bool] {
        &self.model
    }

    pub fn model_value(&self, v: Var) -> bool {
        self.model[v.index()]
    }
}
