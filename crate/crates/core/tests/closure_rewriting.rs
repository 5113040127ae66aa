//! Cross-checks the native downward closure against a Datalog rewriting
//! whose answers are exactly the closure's hyperedges: every atom is packed
//! into a fixed-width tuple (a predicate tag, its arguments, then padding),
//! `CurNode` marks the facts reached from the goal and `HEdge` collects the
//! rule instances fired under a reached head.

use std::collections::{BTreeMap, BTreeSet};

use whyprov::datalog::Atom;
use whyprov::engine::answers_from;
use whyprov::generators::{gen_random_instance, Profile};
use whyprov::testing::{example_2_2, example_5_1};
use whyprov::{
    fixpoint, goal_closure, Database, EngineOptions, Fact, Program, Query, Rule, Symbol, Term,
};

const PAD: &str = "*pad*";

struct Rewriting {
    program: Program,
    width: usize,
    body_slots: usize,
    tags: BTreeMap<Symbol, Symbol>,
}

fn tag(p: Symbol) -> Symbol {
    Symbol::intern(&format!("*tag*{p}"))
}

impl Rewriting {
    fn new(program: &Program) -> Self {
        let width = program.max_arity() + 1;
        let body_slots = program.max_body_len();
        let pad = Term::Const(Symbol::intern(PAD));
        let pack = |a: &Atom| -> Vec<Term> {
            let mut t = vec![Term::Const(tag(a.predicate))];
            t.extend(a.args.iter().copied());
            t.resize(width, pad);
            t
        };
        let mut rules = program.rules().to_vec();
        for r in program.rules() {
            let cur = Atom::new("CurNode", pack(&r.head));
            let mut body = vec![cur];
            body.extend(r.body.iter().cloned());
            let mut edge = pack(&r.head);
            for b in &r.body {
                edge.extend(pack(b));
            }
            edge.resize(width * (body_slots + 1), pad);
            rules.push(Rule::new(Atom::new("HEdge", edge), body.clone()));
            for b in &r.body {
                rules.push(Rule::new(Atom::new("CurNode", pack(b)), body.clone()));
            }
        }
        let tags = program.schema().map(|(p, _)| (tag(p), p)).collect();
        Rewriting {
            program: Program::new(rules).unwrap(),
            width,
            body_slots,
            tags,
        }
    }

    fn pack_fact(&self, f: &Fact) -> Vec<Symbol> {
        let mut t = vec![tag(f.predicate)];
        t.extend(f.args.iter().copied());
        t.resize(self.width, Symbol::intern(PAD));
        t
    }

    fn unpack(&self, t: &[Symbol]) -> Option<Fact> {
        let p = *self.tags.get(&t[0])?;
        let arity = self.program.arity(p).unwrap();
        Some(Fact::new(p, t[1..=arity].iter().copied()))
    }

    /// `(nodes, hyperedges)` of the closure of `goal`, read off the answers.
    fn closure(&self, db: &Database, goal: &Fact) -> (BTreeSet<Fact>, BTreeSet<(Fact, BTreeSet<Fact>)>) {
        let mut d = db.clone();
        d.insert(Fact::new("CurNode", self.pack_fact(goal)));
        let fix = fixpoint(&self.program, &d, &EngineOptions::default()).unwrap();
        let nodes = fix
            .facts_of(Symbol::intern("CurNode"))
            .map(|f| self.unpack(&f.args).unwrap())
            .collect();
        let q = Query::new(self.program.clone(), "HEdge").unwrap();
        let edges = answers_from(&q, &fix)
            .iter()
            .map(|t| {
                let head = self.unpack(&t[..self.width]).unwrap();
                let body = (1..=self.body_slots)
                    .filter_map(|i| self.unpack(&t[i * self.width..(i + 1) * self.width]))
                    .collect();
                (head, body)
            })
            .collect();
        (nodes, edges)
    }
}

fn native(program: &Program, db: &Database, goal: &Fact) -> (BTreeSet<Fact>, BTreeSet<(Fact, BTreeSet<Fact>)>) {
    let fix = fixpoint(program, db, &EngineOptions::default()).unwrap();
    let dc = goal_closure(db, &fix, goal).unwrap();
    let g = &dc.graph;
    let nodes = (0..g.node_count()).map(|v| g.node(v).clone()).collect();
    let edges = g
        .edges()
        .iter()
        .map(|e| (g.node(e.head).clone(), e.body.iter().map(|&b| g.node(b).clone()).collect()))
        .collect();
    (nodes, edges)
}

fn compare(q: &Query, db: &Database) -> usize {
    let rw = Rewriting::new(&q.program);
    let fix = fixpoint(&q.program, db, &EngineOptions::default()).unwrap();
    let mut checked = 0;
    for t in answers_from(q, &fix) {
        let goal = q.goal(&t).unwrap();
        let (n1, e1) = native(&q.program, db, &goal);
        let (n2, e2) = rw.closure(db, &goal);
        assert_eq!(n1, n2, "nodes of {goal}");
        assert_eq!(e1, e2, "hyperedges of {goal}");
        checked += 1;
    }
    checked
}

#[test]
fn examples_match_rewriting() {
    for (p, d) in [example_2_2(), example_5_1()] {
        let q = Query::new(p, "A").unwrap();
        assert_eq!(compare(&q, &d), 4);
    }
}

#[test]
fn random_instances_match_rewriting() {
    let mut checked = 0;
    for profile in Profile::ALL {
        for seed in 0..40 {
            let (q, d) = gen_random_instance(profile, seed);
            checked += compare(&q, &d);
        }
    }
    assert!(checked > 50, "only {checked} goals compared");
}
