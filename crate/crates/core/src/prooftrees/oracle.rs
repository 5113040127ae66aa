//! Brute-force reference procedures. They share no code with the engine,
//! closure or encoder, so they can be used to check them.

use std::collections::BTreeSet;

use indexmap::{IndexMap, IndexSet};
use rustc_hash::{FxHashMap, FxHashSet};

use super::{unify, Binding, ProofDag, ProofTree, Support};
use crate::datalog::{Atom, Database, Fact, Program, Query};
use crate::error::{Error, Result};
use crate::symbol::Symbol;

#[derive(Clone, Debug)]
pub struct OracleOptions {
    /// Cap on facts reachable from the goal.
    pub max_nodes: usize,
    /// Cap on complete hyperedge choices explored by the unambiguous oracle.
    pub max_states: usize,
    /// Cap on the size of any intermediate family of supports.
    pub max_family: usize,
    /// Cap on facts produced by naive grounding.
    pub max_ground_facts: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_nodes: 64,
            max_states: 1_000_000,
            max_family: 100_000,
            max_ground_facts: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundInstance {
    pub rule: usize,
    pub head: Fact,
    pub body: Vec<Fact>,
}

/// All derivable facts with their naive-iteration rank, and every rule
/// instance over them.
#[derive(Clone, Debug)]
pub struct Grounding {
    pub facts: IndexMap<Fact, usize>,
    pub instances: Vec<GroundInstance>,
    database: FxHashSet<Fact>,
    by_head: FxHashMap<Fact, Vec<usize>>,
}

impl Grounding {
    pub fn rank(&self, fact: &Fact) -> Option<usize> {
        self.facts.get(fact).copied()
    }

    pub fn instances_of(&self, head: &Fact) -> impl Iterator<Item = &GroundInstance> + '_ {
        self.by_head
            .get(head)
            .into_iter()
            .flatten()
            .map(move |&i| &self.instances[i])
    }

    pub fn in_database(&self, fact: &Fact) -> bool {
        self.database.contains(fact)
    }

    /// Facts reachable from `goal` along instances, goal first.
    fn reachable(&self, goal: &Fact) -> IndexSet<Fact> {
        let mut seen = IndexSet::new();
        seen.insert(goal.clone());
        let mut i = 0;
        while i < seen.len() {
            let fact = seen[i].clone();
            for inst in self.instances_of(&fact) {
                for b in &inst.body {
                    seen.insert(b.clone());
                }
            }
            i += 1;
        }
        seen
    }
}

/// Every instantiation of `program` with body facts drawn from `facts`, by
/// nested loops over the whole fact list.
fn instantiate(program: &Program, facts: &[Fact], emit: &mut dyn FnMut(usize, Fact, Vec<Fact>)) {
    fn go(
        body: &[Atom],
        facts: &[Fact],
        binding: &mut Binding,
        trail: &mut Vec<Symbol>,
        chosen: &mut Vec<Fact>,
        done: &mut dyn FnMut(&Binding, &[Fact]),
    ) {
        let Some((atom, rest)) = body.split_first() else {
            done(binding, chosen);
            return;
        };
        for fact in facts {
            let mark = trail.len();
            if unify(atom, fact, binding, trail) {
                chosen.push(fact.clone());
                go(rest, facts, binding, trail, chosen, done);
                chosen.pop();
                super::undo(binding, trail, mark);
            }
        }
    }
    for (index, rule) in program.rules().iter().enumerate() {
        let mut binding = Binding::default();
        go(
            &rule.body,
            facts,
            &mut binding,
            &mut Vec::new(),
            &mut Vec::new(),
            &mut |b, body| {
                let head = rule.head.ground(|v| b[&v]);
                emit(index, head, body.to_vec());
            },
        );
    }
}

/// Naive bottom-up grounding: recompute all instantiations each round until
/// no new fact appears.
pub fn ground(program: &Program, db: &Database, opts: &OracleOptions) -> Result<Grounding> {
    let mut facts: IndexMap<Fact, usize> = db.iter().map(|f| (f.clone(), 0)).collect();
    let mut round = 0;
    loop {
        round += 1;
        let current: Vec<Fact> = facts.keys().cloned().collect();
        let mut fresh = Vec::new();
        instantiate(program, &current, &mut |_, head, _| {
            if !facts.contains_key(&head) {
                fresh.push(head);
            }
        });
        if fresh.is_empty() {
            break;
        }
        for f in fresh {
            facts.entry(f).or_insert(round);
        }
        if facts.len() > opts.max_ground_facts {
            return Err(Error::OracleTooLarge(format!(
                "grounding exceeds {} facts",
                opts.max_ground_facts
            )));
        }
    }
    let current: Vec<Fact> = facts.keys().cloned().collect();
    let mut instances = Vec::new();
    let mut by_head: FxHashMap<Fact, Vec<usize>> = FxHashMap::default();
    instantiate(program, &current, &mut |rule, head, body| {
        by_head.entry(head.clone()).or_default().push(instances.len());
        instances.push(GroundInstance { rule, head, body });
    });
    Ok(Grounding {
        facts,
        instances,
        database: db.iter().cloned().collect(),
        by_head,
    })
}

fn goal_of(q: &Query, tuple: &[Symbol]) -> Result<Fact> {
    q.goal(tuple)
}

/// Hyperedges `(head, body set)` of the reachable part of the grounding.
fn hyperedges(g: &Grounding, nodes: &IndexSet<Fact>) -> FxHashMap<Fact, Vec<Vec<Fact>>> {
    let mut out: FxHashMap<Fact, Vec<Vec<Fact>>> = FxHashMap::default();
    for head in nodes {
        let mut bodies: Vec<Vec<Fact>> = g
            .instances_of(head)
            .map(|inst| {
                let mut b = inst.body.clone();
                crate::datalog::sort_canonical(&mut b);
                b.dedup();
                b
            })
            .collect();
        bodies.sort_by(|a, b| Support(a.clone()).cmp(&Support(b.clone())));
        bodies.dedup();
        if !bodies.is_empty() {
            out.insert(head.clone(), bodies);
        }
    }
    out
}

/// Every support of a compressed DAG of the goal, each with one witness DAG.
pub fn oracle_unwhy_witnesses(
    q: &Query,
    db: &Database,
    tuple: &[Symbol],
    opts: &OracleOptions,
) -> Result<Vec<(Support, ProofDag)>> {
    let goal = goal_of(q, tuple)?;
    let g = ground(&q.program, db, opts)?;
    if !g.facts.contains_key(&goal) {
        return Ok(Vec::new());
    }
    let nodes = g.reachable(&goal);
    if nodes.len() > opts.max_nodes {
        return Err(Error::OracleTooLarge(format!(
            "{} reachable facts, cap is {}",
            nodes.len(),
            opts.max_nodes
        )));
    }
    let edges = hyperedges(&g, &nodes);

    struct Search<'a> {
        g: &'a Grounding,
        edges: &'a FxHashMap<Fact, Vec<Vec<Fact>>>,
        goal: &'a Fact,
        states: usize,
        max_states: usize,
        found: IndexMap<Support, ProofDag>,
    }

    impl Search<'_> {
        fn run(&mut self, reached: &mut IndexSet<Fact>, i: usize, choice: &mut FxHashMap<Fact, Vec<Fact>>) -> Result<()> {
            if i == reached.len() {
                self.states += 1;
                if self.states > self.max_states {
                    return Err(Error::OracleTooLarge(format!(
                        "more than {} hyperedge choices",
                        self.max_states
                    )));
                }
                let dag = ProofDag::compressed(self.goal, choice);
                if dag.is_acyclic() {
                    let support = dag.support();
                    self.found.entry(support).or_insert(dag);
                }
                return Ok(());
            }
            let fact = reached[i].clone();
            if self.g.in_database(&fact) {
                return self.run(reached, i + 1, choice);
            }
            let Some(options) = self.edges.get(&fact) else {
                return Ok(());
            };
            for body in options {
                let mark = reached.len();
                for b in body {
                    reached.insert(b.clone());
                }
                choice.insert(fact.clone(), body.clone());
                self.run(reached, i + 1, choice)?;
                choice.remove(&fact);
                reached.truncate(mark);
            }
            Ok(())
        }
    }

    let mut search = Search {
        g: &g,
        edges: &edges,
        goal: &goal,
        states: 0,
        max_states: opts.max_states,
        found: IndexMap::new(),
    };
    let mut reached = IndexSet::new();
    reached.insert(goal.clone());
    search.run(&mut reached, 0, &mut FxHashMap::default())?;
    let mut out: Vec<(Support, ProofDag)> = search.found.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// The supports of all unambiguous proof trees of the goal.
pub fn oracle_unwhy(q: &Query, db: &Database, tuple: &[Symbol], opts: &OracleOptions) -> Result<BTreeSet<Support>> {
    Ok(oracle_unwhy_witnesses(q, db, tuple, opts)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

/// The supports of all proof trees of the goal.
///
/// `F(α)` starts as `{{α}}` for database facts and is grown by
/// `F(α) ∪= {S_1 ∪ … ∪ S_n | S_i ∈ F(β_i)}` over every instance
/// `α ← β_1,…,β_n` until nothing changes. After round `k` the families hold the
/// supports of exactly the trees of depth at most `k`, so the limit is `why`.
pub fn oracle_why(q: &Query, db: &Database, tuple: &[Symbol], opts: &OracleOptions) -> Result<BTreeSet<Support>> {
    let goal = goal_of(q, tuple)?;
    let g = ground(&q.program, db, opts)?;
    if !g.facts.contains_key(&goal) {
        return Ok(BTreeSet::new());
    }
    let nodes = g.reachable(&goal);
    let leaves: Vec<&Fact> = nodes.iter().filter(|f| g.in_database(f)).collect();
    if leaves.len() > 128 {
        return Err(Error::OracleTooLarge(format!(
            "{} database facts below the goal, cap is 128",
            leaves.len()
        )));
    }
    let bit: FxHashMap<&Fact, u128> = leaves.iter().enumerate().map(|(i, f)| (*f, 1u128 << i)).collect();

    let mut families: FxHashMap<&Fact, FxHashSet<u128>> = nodes
        .iter()
        .map(|f| {
            let mut s = FxHashSet::default();
            if let Some(b) = bit.get(f) {
                s.insert(*b);
            }
            (f, s)
        })
        .collect();

    loop {
        let mut next = families.clone();
        let mut changed = false;
        for head in &nodes {
            for inst in g.instances_of(head) {
                let mut acc: FxHashSet<u128> = std::iter::once(0u128).collect();
                for b in &inst.body {
                    let fam = &families[b];
                    let mut grown = FxHashSet::default();
                    for a in &acc {
                        for s in fam {
                            grown.insert(a | s);
                        }
                    }
                    if grown.len() > opts.max_family {
                        return Err(Error::OracleTooLarge(format!(
                            "support family exceeds {}",
                            opts.max_family
                        )));
                    }
                    acc = grown;
                    if acc.is_empty() {
                        break;
                    }
                }
                let target = next.get_mut(head).expect("node");
                for s in acc {
                    changed |= target.insert(s);
                }
                if target.len() > opts.max_family {
                    return Err(Error::OracleTooLarge(format!(
                        "support family exceeds {}",
                        opts.max_family
                    )));
                }
            }
        }
        families = next;
        if !changed {
            break;
        }
    }

    Ok(families[&goal]
        .iter()
        .map(|mask| {
            Support::new(
                leaves
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, f)| (*f).clone()),
            )
        })
        .collect())
}

/// A proof tree of `fact` of minimum depth, built from the grounding by
/// searching depth bounds `0, 1, 2, …`.
pub fn min_depth_tree(g: &Grounding, fact: &Fact) -> Option<ProofTree> {
    if !g.facts.contains_key(fact) {
        return None;
    }
    let mut memo: FxHashMap<(Fact, usize), bool> = FxHashMap::default();
    fn has_tree(g: &Grounding, f: &Fact, d: usize, memo: &mut FxHashMap<(Fact, usize), bool>) -> bool {
        if g.in_database(f) {
            return true;
        }
        if d == 0 {
            return false;
        }
        if let Some(&v) = memo.get(&(f.clone(), d)) {
            return v;
        }
        let insts: Vec<GroundInstance> = g.instances_of(f).cloned().collect();
        let v = insts
            .iter()
            .any(|inst| inst.body.iter().all(|b| has_tree(g, b, d - 1, memo)));
        memo.insert((f.clone(), d), v);
        v
    }
    fn build(g: &Grounding, f: &Fact, d: usize, memo: &mut FxHashMap<(Fact, usize), bool>) -> ProofTree {
        if g.in_database(f) {
            return ProofTree::leaf(f.clone());
        }
        let insts: Vec<GroundInstance> = g.instances_of(f).cloned().collect();
        let inst = insts
            .iter()
            .find(|inst| inst.body.iter().all(|b| has_tree(g, b, d - 1, memo)))
            .expect("has_tree holds");
        ProofTree::node(f.clone(), inst.body.iter().map(|b| build(g, b, d - 1, memo)).collect())
    }
    let bound = g.facts.len();
    (0..=bound)
        .find(|&d| has_tree(g, fact, d, &mut memo))
        .map(|d| build(g, fact, d, &mut memo))
}

/// Every proof tree of `fact` of depth at most `max_depth`.
pub fn enumerate_trees(g: &Grounding, fact: &Fact, max_depth: usize, max_trees: usize) -> Result<Vec<ProofTree>> {
    fn go(
        g: &Grounding,
        f: &Fact,
        d: usize,
        cap: usize,
        memo: &mut FxHashMap<(Fact, usize), Vec<ProofTree>>,
    ) -> Result<Vec<ProofTree>> {
        if let Some(v) = memo.get(&(f.clone(), d)) {
            return Ok(v.clone());
        }
        let mut out = Vec::new();
        if g.in_database(f) {
            out.push(ProofTree::leaf(f.clone()));
        }
        if d > 0 {
            let insts: Vec<GroundInstance> = g.instances_of(f).cloned().collect();
            for inst in insts {
                let mut partial: Vec<Vec<ProofTree>> = vec![Vec::new()];
                for b in &inst.body {
                    let options = go(g, b, d - 1, cap, memo)?;
                    let mut grown = Vec::new();
                    for p in &partial {
                        for o in &options {
                            let mut q = p.clone();
                            q.push(o.clone());
                            grown.push(q);
                        }
                    }
                    if grown.len() > cap {
                        return Err(Error::OracleTooLarge(format!("more than {cap} proof trees")));
                    }
                    partial = grown;
                }
                out.extend(partial.into_iter().map(|kids| ProofTree::node(f.clone(), kids)));
                if out.len() > cap {
                    return Err(Error::OracleTooLarge(format!("more than {cap} proof trees")));
                }
            }
        }
        memo.insert((f.clone(), d), out.clone());
        Ok(out)
    }
    go(g, fact, max_depth, max_trees, &mut FxHashMap::default())
}

#[cfg(test)]
mod tests {
    use super::super::{is_unambiguous, unravel, validate_dag, validate_tree};
    use super::*;
    use crate::datalog::{parse_database, parse_fact, parse_program, FactScope};
    use crate::engine::{fixpoint, EngineOptions};
    use crate::testing::*;

    fn f(s: &str) -> Fact {
        parse_fact(s).unwrap()
    }

    fn sup(facts: &[&str]) -> Support {
        Support::new(facts.iter().map(|s| f(s)))
    }

    fn d() -> [Symbol; 1] {
        [Symbol::intern("d")]
    }

    #[test]
    fn why_of_example_3_2() {
        let (p, db) = example_2_2();
        let q = Query::new(p, "A").unwrap();
        let why = oracle_why(&q, &db, &d(), &OracleOptions::default()).unwrap();
        let expected: BTreeSet<Support> = [sup(&["S(a)", "T(a,a,d)"]), Support::new(db.iter().cloned())].into();
        assert_eq!(why, expected);
    }

    #[test]
    fn unwhy_of_example_3_2() {
        let (p, db) = example_2_2();
        let q = Query::new(p, "A").unwrap();
        let unwhy = oracle_unwhy(&q, &db, &d(), &OracleOptions::default()).unwrap();
        assert_eq!(unwhy, [sup(&["S(a)", "T(a,a,d)"])].into());
    }

    #[test]
    fn example_5_1_oracles() {
        let (p, db) = example_5_1();
        let q = Query::new(p, "A").unwrap();
        let left = sup(&["S(a)", "T(a,a,c)", "T(c,c,d)"]);
        let right = sup(&["S(b)", "T(b,b,c)", "T(c,c,d)"]);
        let union = Support::new(left.facts().iter().chain(right.facts()).cloned());
        let unwhy = oracle_unwhy(&q, &db, &d(), &OracleOptions::default()).unwrap();
        assert_eq!(unwhy, [left.clone(), right.clone()].into());
        let why = oracle_why(&q, &db, &d(), &OracleOptions::default()).unwrap();
        assert_eq!(why, [left, right, union].into());
    }

    #[test]
    fn non_answers_are_empty() {
        let (p, db) = example_2_2();
        let q = Query::new(p, "A").unwrap();
        let z = [Symbol::intern("zz")];
        assert!(oracle_unwhy(&q, &db, &z, &OracleOptions::default()).unwrap().is_empty());
        assert!(oracle_why(&q, &db, &z, &OracleOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn witnesses_unravel_to_unambiguous_trees() {
        for (p, db) in [example_2_2(), example_5_1()] {
            let q = Query::new(p.clone(), "A").unwrap();
            for (support, dag) in oracle_unwhy_witnesses(&q, &db, &d(), &OracleOptions::default()).unwrap() {
                assert!(validate_dag(&dag, &p, &db, &f("A(d)")));
                let t = unravel(&dag, &p);
                assert!(validate_tree(&t, &p, &db, &f("A(d)")));
                assert!(is_unambiguous(&t));
                assert_eq!(t.support(), support);
            }
        }
    }

    #[test]
    fn node_cap() {
        let (p, db) = example_5_1();
        let q = Query::new(p, "A").unwrap();
        let opts = OracleOptions {
            max_nodes: 3,
            ..Default::default()
        };
        assert!(matches!(oracle_unwhy(&q, &db, &d(), &opts), Err(Error::OracleTooLarge(_))));
    }

    #[test]
    fn naive_ranks_agree_with_engine() {
        for (p, db) in [example_2_2(), example_5_1()] {
            let g = ground(&p, &db, &OracleOptions::default()).unwrap();
            let fix = fixpoint(&p, &db, &EngineOptions::default()).unwrap();
            assert_eq!(g.facts.len(), fix.len());
            for (fact, rank) in &g.facts {
                assert_eq!(fix.rank(fact), Some(*rank as u32), "{fact}");
            }
            assert_eq!(g.instances.len(), fix.instantiations().len());
        }
    }

    #[test]
    fn min_depth_matches_rank() {
        let (p, db) = example_5_1();
        let g = ground(&p, &db, &OracleOptions::default()).unwrap();
        for (fact, rank) in &g.facts {
            let t = min_depth_tree(&g, fact).unwrap();
            assert!(validate_tree(&t, &p, &db, fact));
            assert_eq!(t.depth(), *rank);
        }
        assert!(min_depth_tree(&g, &f("A(zz)")).is_none());
    }

    #[test]
    fn tree_enumeration_example_5_1() {
        let (p, db) = example_5_1();
        let g = ground(&p, &db, &OracleOptions::default()).unwrap();
        let trees = enumerate_trees(&g, &f("A(d)"), 3, 1000).unwrap();
        // Two choices for each of the two A(c) children.
        assert_eq!(trees.len(), 4);
        assert!(trees.iter().all(|t| validate_tree(t, &p, &db, &f("A(d)"))));
        let unambiguous: BTreeSet<Support> = trees
            .iter()
            .filter(|t| is_unambiguous(t))
            .map(|t| t.support())
            .collect();
        let q = Query::new(p, "A").unwrap();
        assert_eq!(unambiguous, oracle_unwhy(&q, &db, &d(), &OracleOptions::default()).unwrap());
    }

    #[test]
    fn self_loop_instances_are_harmless() {
        let p = parse_program("R(x) :- E(x). R(x) :- R(x), F(x).").unwrap();
        let db = parse_database("E(a)\nF(a)", &p, FactScope::Input).unwrap();
        let q = Query::new(p, "R").unwrap();
        let a = [Symbol::intern("a")];
        let unwhy = oracle_unwhy(&q, &db, &a, &OracleOptions::default()).unwrap();
        assert_eq!(unwhy, [sup(&["E(a)"])].into());
        let why = oracle_why(&q, &db, &a, &OracleOptions::default()).unwrap();
        assert_eq!(why, [sup(&["E(a)"]), sup(&["E(a)", "F(a)"])].into());
    }
}
