//! Bottom-up evaluation: the immediate consequence operator, a semi-naive
//! fixpoint with per-fact ranks, and the log of rule instantiations.

use rustc_hash::FxHashMap;

use crate::datalog::{Database, Fact, Program, Query, Rule, Term, Tuple};
use crate::error::{Error, Result};
use crate::symbol::Symbol;

#[derive(Clone, Debug)]
pub struct EngineOptions {
    /// Hard cap on the number of facts in the fixpoint.
    pub max_facts: usize,
    /// Hard cap on semi-naive rounds; `None` means the `|base(D,Σ)|` bound.
    pub max_iterations: Option<usize>,
    /// Record every rule instantiation over the final fixpoint.
    pub record_instantiations: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            max_facts: 10_000_000,
            max_iterations: None,
            record_instantiations: true,
        }
    }
}

/// One satisfied rule instance over the fixpoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instantiation {
    pub rule: usize,
    /// Values of the rule's variables, aligned with [`Rule::variables`].
    pub binding: Vec<Symbol>,
    pub head: Fact,
    /// One fact per body atom, in body order.
    pub body: Vec<Fact>,
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Const(Symbol),
    Var(usize),
}

#[derive(Clone, Debug)]
struct AtomPlan {
    predicate: Symbol,
    slots: Vec<Slot>,
}

#[derive(Clone, Debug)]
struct CompiledRule {
    head: AtomPlan,
    body: Vec<AtomPlan>,
    var_count: usize,
}

impl CompiledRule {
    fn compile(rule: &Rule) -> Self {
        let vars = rule.variables();
        let index: FxHashMap<Symbol, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let plan = |atom: &crate::datalog::Atom| AtomPlan {
            predicate: atom.predicate,
            slots: atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => Slot::Const(*c),
                    Term::Var(v) => Slot::Var(index[v]),
                })
                .collect(),
        };
        CompiledRule {
            head: plan(&rule.head),
            body: rule.body.iter().map(plan).collect(),
            var_count: vars.len(),
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Relation {
    rows: Vec<Tuple>,
    ranks: Vec<u32>,
    lookup: FxHashMap<Tuple, u32>,
    /// `columns[i][c]` = ascending row ids whose i-th argument is `c`.
    columns: Vec<FxHashMap<Symbol, Vec<u32>>>,
}

impl Relation {
    fn new(arity: usize) -> Self {
        Relation {
            columns: vec![FxHashMap::default(); arity],
            ..Default::default()
        }
    }

    fn insert(&mut self, tuple: Tuple, rank: u32) -> bool {
        if self.lookup.contains_key(&tuple) {
            return false;
        }
        let id = self.rows.len() as u32;
        for (col, value) in tuple.iter().enumerate() {
            self.columns[col].entry(*value).or_default().push(id);
        }
        self.lookup.insert(tuple.clone(), id);
        self.rows.push(tuple);
        self.ranks.push(rank);
        true
    }

    fn len(&self) -> u32 {
        self.rows.len() as u32
    }
}

/// Facts grouped by predicate with per-column indexes.
#[derive(Clone, Debug, Default)]
struct FactStore {
    relations: FxHashMap<Symbol, Relation>,
    order: Vec<(Symbol, u32)>,
}

impl FactStore {
    fn insert(&mut self, fact: Fact, rank: u32) -> bool {
        let arity = fact.arity();
        let rel = self
            .relations
            .entry(fact.predicate)
            .or_insert_with(|| Relation::new(arity));
        let id = rel.len();
        if rel.insert(fact.args, rank) {
            self.order.push((fact.predicate, id));
            true
        } else {
            false
        }
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    fn relation_len(&self, predicate: Symbol) -> u32 {
        self.relations.get(&predicate).map_or(0, Relation::len)
    }

    fn fact(&self, predicate: Symbol, row: u32) -> Fact {
        Fact {
            predicate,
            args: self.relations[&predicate].rows[row as usize].clone(),
        }
    }

    fn find(&self, fact: &Fact) -> Option<(&Relation, u32)> {
        let rel = self.relations.get(&fact.predicate)?;
        rel.lookup.get(&fact.args).map(|&id| (rel, id))
    }

    /// Enumerates all extensions of `binding` satisfying `body`, where atom
    /// `i` only matches rows in `ranges[i]`. `first` forces an atom to be
    /// joined first; the rest are ordered greedily by bound arguments.
    fn join(
        &self,
        body: &[AtomPlan],
        ranges: &[(u32, u32)],
        first: Option<usize>,
        binding: &mut Vec<Option<Symbol>>,
        emit: &mut dyn FnMut(&[Option<Symbol>], &[u32]),
    ) {
        let mut done = vec![false; body.len()];
        let mut rows = vec![0u32; body.len()];
        self.join_step(body, ranges, first, &mut done, &mut rows, binding, emit);
    }

    #[allow(clippy::too_many_arguments)]
    fn join_step(
        &self,
        body: &[AtomPlan],
        ranges: &[(u32, u32)],
        first: Option<usize>,
        done: &mut Vec<bool>,
        rows: &mut Vec<u32>,
        binding: &mut Vec<Option<Symbol>>,
        emit: &mut dyn FnMut(&[Option<Symbol>], &[u32]),
    ) {
        let bound = |slot: &Slot, binding: &Vec<Option<Symbol>>| match *slot {
            Slot::Const(c) => Some(c),
            Slot::Var(v) => binding[v],
        };
        let next = match first {
            Some(i) => Some(i),
            None => (0..body.len()).filter(|&i| !done[i]).max_by_key(|&i| {
                let n = body[i].slots.iter().filter(|s| bound(s, binding).is_some()).count();
                // Prefer more bound arguments, then earlier atoms.
                (n, usize::MAX - i)
            }),
        };
        let Some(i) = next else {
            emit(binding, rows);
            return;
        };
        let atom = &body[i];
        let (lo, hi) = ranges[i];
        if lo >= hi {
            return;
        }
        let Some(rel) = self.relations.get(&atom.predicate) else {
            return;
        };
        done[i] = true;

        let values: Vec<Option<Symbol>> = atom.slots.iter().map(|s| bound(s, binding)).collect();
        let mut visit = |row: u32, binding: &mut Vec<Option<Symbol>>, done: &mut Vec<bool>, rows: &mut Vec<u32>| {
            let tuple = &rel.rows[row as usize];
            let mut newly = Vec::new();
            let mut ok = true;
            for (slot, value) in atom.slots.iter().zip(tuple.iter()) {
                match *slot {
                    Slot::Const(c) => {
                        if c != *value {
                            ok = false;
                            break;
                        }
                    }
                    Slot::Var(v) => match binding[v] {
                        Some(b) if b != *value => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            binding[v] = Some(*value);
                            newly.push(v);
                        }
                    },
                }
            }
            if ok {
                rows[i] = row;
                self.join_step(body, ranges, None, done, rows, binding, emit);
            }
            for v in newly {
                binding[v] = None;
            }
        };

        if values.iter().all(Option::is_some) {
            let tuple: Tuple = values.iter().map(|v| v.unwrap()).collect();
            if let Some(&row) = rel.lookup.get(&tuple) {
                if (lo..hi).contains(&row) {
                    visit(row, binding, done, rows);
                }
            }
        } else if let Some((col, value)) = values.iter().enumerate().find_map(|(c, v)| v.map(|v| (c, v))) {
            if let Some(ids) = rel.columns[col].get(&value) {
                let start = ids.partition_point(|&r| r < lo);
                for &row in ids[start..].iter().take_while(|&&r| r < hi) {
                    visit(row, binding, done, rows);
                }
            }
        } else {
            for row in lo..hi.min(rel.len()) {
                visit(row, binding, done, rows);
            }
        }
        done[i] = false;
    }
}

fn ground_head(plan: &AtomPlan, binding: &[Option<Symbol>]) -> Fact {
    Fact {
        predicate: plan.predicate,
        args: plan
            .slots
            .iter()
            .map(|s| match *s {
                Slot::Const(c) => c,
                Slot::Var(v) => binding[v].expect("safe rule binds head variables"),
            })
            .collect(),
    }
}

/// `|base(D,Σ)|`, saturating.
pub fn base_size(program: &Program, db: &Database) -> u128 {
    let mut domain = db.active_domain();
    for rule in program.rules() {
        for atom in std::iter::once(&rule.head).chain(&rule.body) {
            domain.extend(atom.args.iter().filter_map(|t| match t {
                Term::Const(c) => Some(*c),
                Term::Var(_) => None,
            }));
        }
    }
    let adom = domain.len() as u128;
    program
        .schema()
        .map(|(_, arity)| adom.saturating_pow(arity as u32))
        .fold(0u128, u128::saturating_add)
}

/// The result of evaluating a program to its least fixpoint.
#[derive(Clone, Debug)]
pub struct FixpointResult {
    store: FactStore,
    rules: Vec<CompiledRule>,
    instantiations: Vec<Instantiation>,
    iterations: usize,
}

impl FixpointResult {
    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.len() == 0
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.store.find(fact).is_some()
    }

    /// First iteration of the immediate consequence operator producing `fact`.
    pub fn rank(&self, fact: &Fact) -> Option<u32> {
        self.store
            .find(fact)
            .map(|(rel, id)| rel.ranks[id as usize])
    }

    /// Facts in derivation order.
    pub fn facts(&self) -> impl Iterator<Item = Fact> + '_ {
        self.store
            .order
            .iter()
            .map(|&(p, row)| self.store.fact(p, row))
    }

    pub fn database(&self) -> Database {
        self.facts().collect()
    }

    pub fn facts_of(&self, predicate: Symbol) -> impl Iterator<Item = Fact> + '_ {
        let n = self.store.relation_len(predicate);
        (0..n).map(move |row| self.store.fact(predicate, row))
    }

    pub fn instantiations(&self) -> &[Instantiation] {
        &self.instantiations
    }

    /// Number of semi-naive rounds that produced new facts.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// All instantiations over the fixpoint whose head is `head`, as
    /// `(rule index, body facts)`.
    pub fn instantiations_with_head(&self, head: &Fact) -> Vec<(usize, Vec<Fact>)> {
        let mut out = Vec::new();
        for (index, rule) in self.rules.iter().enumerate() {
            if rule.head.predicate != head.predicate || rule.head.slots.len() != head.arity() {
                continue;
            }
            let mut binding = vec![None; rule.var_count];
            let mut unifies = true;
            for (slot, value) in rule.head.slots.iter().zip(head.args.iter()) {
                match *slot {
                    Slot::Const(c) => unifies &= c == *value,
                    Slot::Var(v) => match binding[v] {
                        Some(b) => unifies &= b == *value,
                        None => binding[v] = Some(*value),
                    },
                }
            }
            if !unifies {
                continue;
            }
            let ranges: Vec<(u32, u32)> = rule
                .body
                .iter()
                .map(|a| (0, self.store.relation_len(a.predicate)))
                .collect();
            let store = &self.store;
            self.store.join(&rule.body, &ranges, None, &mut binding, &mut |_, rows| {
                let body = rule
                    .body
                    .iter()
                    .zip(rows)
                    .map(|(a, &row)| store.fact(a.predicate, row))
                    .collect();
                out.push((index, body));
            });
        }
        out
    }
}

fn load(db: &Database) -> FactStore {
    let mut store = FactStore::default();
    for fact in db {
        store.insert(fact.clone(), 0);
    }
    store
}

/// One application of the immediate consequence operator.
pub fn immediate_consequence(program: &Program, db: &Database) -> Database {
    let store = load(db);
    let mut result = db.clone();
    for rule in program.rules() {
        let compiled = CompiledRule::compile(rule);
        let ranges: Vec<(u32, u32)> = compiled
            .body
            .iter()
            .map(|a| (0, store.relation_len(a.predicate)))
            .collect();
        let mut binding = vec![None; compiled.var_count];
        store.join(&compiled.body, &ranges, None, &mut binding, &mut |b, _| {
            result.insert(ground_head(&compiled.head, b));
        });
    }
    result
}

/// Semi-naive evaluation of `program` over `db` to the least fixpoint.
pub fn fixpoint(program: &Program, db: &Database, options: &EngineOptions) -> Result<FixpointResult> {
    let rules: Vec<CompiledRule> = program.rules().iter().map(CompiledRule::compile).collect();
    let mut store = load(db);
    if store.len() > options.max_facts {
        return Err(Error::ResourceLimit(format!(
            "database has {} facts, cap is {}",
            store.len(),
            options.max_facts
        )));
    }
    let max_iterations = options
        .max_iterations
        .unwrap_or_else(|| base_size(program, db).saturating_add(1).min(usize::MAX as u128) as usize);

    // Rows in [delta_start, relation_len) are the facts of the latest rank.
    let mut delta_start: FxHashMap<Symbol, u32> = store.relations.keys().map(|p| (*p, 0)).collect();
    let mut iteration = 0usize;
    loop {
        let snapshot: FxHashMap<Symbol, u32> =
            store.relations.iter().map(|(p, r)| (*p, r.len())).collect();
        let has_delta = |p: Symbol| {
            let hi = snapshot.get(&p).copied().unwrap_or(0);
            delta_start.get(&p).copied().unwrap_or(0) < hi
        };
        if !snapshot.keys().any(|p| has_delta(*p)) {
            break;
        }
        if iteration >= max_iterations {
            return Err(Error::ResourceLimit(format!(
                "fixpoint not reached after {max_iterations} iterations"
            )));
        }
        iteration += 1;

        let mut pending: Vec<Fact> = Vec::new();
        for rule in &rules {
            for (j, atom) in rule.body.iter().enumerate() {
                if !has_delta(atom.predicate) {
                    continue;
                }
                let ranges: Vec<(u32, u32)> = rule
                    .body
                    .iter()
                    .enumerate()
                    .map(|(k, a)| {
                        let hi = snapshot.get(&a.predicate).copied().unwrap_or(0);
                        let lo = delta_start.get(&a.predicate).copied().unwrap_or(0);
                        match k.cmp(&j) {
                            std::cmp::Ordering::Less => (0, lo),
                            std::cmp::Ordering::Equal => (lo, hi),
                            std::cmp::Ordering::Greater => (0, hi),
                        }
                    })
                    .collect();
                let mut binding = vec![None; rule.var_count];
                store.join(&rule.body, &ranges, Some(j), &mut binding, &mut |b, _| {
                    pending.push(ground_head(&rule.head, b));
                });
            }
        }

        delta_start = snapshot;
        for fact in pending {
            if store.insert(fact, iteration as u32) && store.len() > options.max_facts {
                return Err(Error::ResourceLimit(format!(
                    "fixpoint exceeds {} facts",
                    options.max_facts
                )));
            }
        }
    }

    let mut instantiations = Vec::new();
    if options.record_instantiations {
        for (index, rule) in rules.iter().enumerate() {
            let ranges: Vec<(u32, u32)> = rule
                .body
                .iter()
                .map(|a| (0, store.relation_len(a.predicate)))
                .collect();
            let mut binding = vec![None; rule.var_count];
            let store_ref = &store;
            store.join(&rule.body, &ranges, None, &mut binding, &mut |b, rows| {
                instantiations.push(Instantiation {
                    rule: index,
                    binding: b.iter().map(|v| v.expect("all variables bound")).collect(),
                    head: ground_head(&rule.head, b),
                    body: rule
                        .body
                        .iter()
                        .zip(rows)
                        .map(|(a, &row)| store_ref.fact(a.predicate, row))
                        .collect(),
                });
            });
        }
    }

    Ok(FixpointResult {
        store,
        rules,
        instantiations,
        iterations: iteration.saturating_sub(1),
    })
}

/// `Q(D)`: tuples of the answer predicate in the fixpoint, canonically sorted.
pub fn answers(query: &Query, db: &Database, options: &EngineOptions) -> Result<Vec<Tuple>> {
    let options = EngineOptions {
        record_instantiations: false,
        ..options.clone()
    };
    let fix = fixpoint(&query.program, db, &options)?;
    Ok(answers_from(query, &fix))
}

pub fn answers_from(query: &Query, fix: &FixpointResult) -> Vec<Tuple> {
    let mut facts: Vec<Fact> = fix.facts_of(query.answer).collect();
    crate::datalog::sort_canonical(&mut facts);
    facts.into_iter().map(|f| f.args).collect()
}
