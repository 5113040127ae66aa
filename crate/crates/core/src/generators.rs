//! Instance generators: the 3SAT hardness reduction, transitive closure over
//! random graphs, and small random programs for differential testing.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::datalog::{parse_program, Atom, Database, Fact, Program, Query, Rule, Term};
use crate::error::{Error, Result};
use crate::symbol::Symbol;

/// A literal over variable `v<var>`, variables numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, positive: false }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("-")?;
        }
        write!(f, "v{}", self.var)
    }
}

/// A Boolean formula in 3CNF over `v1..vn`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cnf3Formula {
    pub num_vars: usize,
    pub clauses: Vec<[Literal; 3]>,
}

impl Cnf3Formula {
    pub fn new(num_vars: usize, clauses: Vec<[Literal; 3]>) -> Result<Self> {
        if let Some(l) = clauses.iter().flatten().find(|l| l.var == 0 || l.var > num_vars) {
            return Err(Error::ResourceLimit(format!("literal {l} outside v1..v{num_vars}")));
        }
        Ok(Cnf3Formula { num_vars, clauses })
    }

    /// A uniformly random formula with exactly `m` clauses.
    pub fn random(num_vars: usize, m: usize, rng: &mut impl Rng) -> Self {
        let clauses = (0..m)
            .map(|_| {
                std::array::from_fn(|_| Literal {
                    var: rng.random_range(1..=num_vars),
                    positive: rng.random_bool(0.5),
                })
            })
            .collect();
        Cnf3Formula { num_vars, clauses }
    }

    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|l| assignment[l.var - 1] == l.positive))
    }

    /// A satisfying assignment found by trying all `2^n` of them.
    pub fn brute_force(&self) -> Option<Vec<bool>> {
        assert!(self.num_vars < 32, "too many variables for brute force");
        (0u64..1 << self.num_vars)
            .map(|bits| (0..self.num_vars).map(|i| bits >> i & 1 == 1).collect::<Vec<_>>())
            .find(|a| self.eval(a))
    }

    pub fn is_satisfiable(&self) -> bool {
        self.brute_force().is_some()
    }
}

impl fmt::Display for Cnf3Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "({} | {} | {})", c[0], c[1], c[2])?;
        }
        Ok(())
    }
}

/// The fixed linear program of the reduction, answer predicate `R`.
pub const REDUCTION_PROGRAM: &str = "\
R(x) :- Var(x, z, _), Assign(x, z).
R(x) :- Var(x, _, z), Assign(x, z).
Assign(x, y) :- C(x, y, _, _, _, _), Assign(x, y).
Assign(x, y) :- C(_, _, x, y, _, _), Assign(x, y).
Assign(x, y) :- C(_, _, _, _, x, y), Assign(x, y).
Assign(x, z) :- Next(x, y, z, _), R(y).
Assign(x, z) :- Next(x, y, _, z), R(y).
R(x) :- Last(x).
";

fn var_name(i: usize) -> Symbol {
    Symbol::intern(&format!("v{i}"))
}

/// `D_φ` with the reduction query and the tuple `(v1)`: φ is satisfiable
/// iff `D_φ` is the support of some proof tree of `R(v1)`.
pub fn gen_3sat_instance(phi: &Cnf3Formula) -> (Query, Database, Vec<Symbol>) {
    assert!(phi.num_vars >= 1 && !phi.clauses.is_empty(), "need n >= 1 and m >= 1");
    let program = parse_program(REDUCTION_PROGRAM).expect("reduction program parses");
    let q = Query::new(program, "R").expect("R is intensional");
    let (zero, one, bullet) = (Symbol::intern("c0"), Symbol::intern("c1"), Symbol::intern("bullet"));
    let sign = |l: &Literal| if l.positive { one } else { zero };
    let n = phi.num_vars;
    let mut db = Database::new();
    for i in 1..=n {
        db.insert(Fact::new("Var", [var_name(i), zero, one]));
    }
    for i in 1..n {
        db.insert(Fact::new("Next", [var_name(i), var_name(i + 1), zero, one]));
    }
    db.insert(Fact::new("Next", [var_name(n), bullet, zero, one]));
    db.insert(Fact::new("Last", [bullet]));
    for c in &phi.clauses {
        db.insert(Fact::new(
            "C",
            [var_name(c[0].var), sign(&c[0]), var_name(c[1].var), sign(&c[1]), var_name(c[2].var), sign(&c[2])],
        ));
    }
    (q, db, vec![var_name(1)])
}

/// The transitive-closure program, answer predicate `T`.
pub const TRANSCLOSURE_PROGRAM: &str = "\
T(x, y) :- E(x, y).
T(x, y) :- T(x, z), E(z, y).
";

pub fn transclosure_query() -> Query {
    Query::new(parse_program(TRANSCLOSURE_PROGRAM).expect("parses"), "T").expect("T is intensional")
}

/// Transitive closure over `edges` distinct random edges between nodes
/// `n0..n<nodes-1>`, without self-loops.
pub fn gen_transclosure(nodes: usize, edges: usize, seed: u64) -> (Query, Database) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = nodes.saturating_mul(nodes.saturating_sub(1));
    let edges = edges.min(max);
    let names: Vec<Symbol> = (0..nodes).map(|i| Symbol::intern(&format!("n{i}"))).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(edges);
    if edges * 2 > max {
        let mut all: Vec<(usize, usize)> = (0..nodes)
            .flat_map(|a| (0..nodes).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        all.shuffle(&mut rng);
        all.truncate(edges);
        pairs = all;
    } else {
        let mut seen = FxHashSet::default();
        while pairs.len() < edges {
            let a = rng.random_range(0..nodes);
            let b = rng.random_range(0..nodes);
            if a != b && seen.insert((a, b)) {
                pairs.push((a, b));
            }
        }
    }
    let db = pairs
        .into_iter()
        .map(|(a, b)| Fact::new("E", [names[a], names[b]]))
        .collect();
    (transclosure_query(), db)
}

/// Reads an edge list: two node names per line, `#` or `%` starts a comment.
pub fn load_edge_list(text: &str) -> Result<Database> {
    let mut db = Database::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split(['#', '%']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split([' ', '\t', ',']).filter(|s| !s.is_empty()).collect();
        match parts.as_slice() {
            [a, b, ..] => {
                db.insert(Fact::new("E", [*a, *b]));
            }
            _ => {
                return Err(Error::Syntax {
                    line: i + 1,
                    col: 1,
                    message: "expected two node names".into(),
                })
            }
        }
    }
    Ok(db)
}

/// Shapes of random programs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Recursive, at most one intensional atom per body.
    TinyLinear,
    /// Recursive, with rules having two intensional body atoms.
    TinyNonlinear,
    /// No recursion.
    TinyNonrecursive,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::TinyLinear, Profile::TinyNonlinear, Profile::TinyNonrecursive];

    pub fn name(self) -> &'static str {
        match self {
            Profile::TinyLinear => "tiny-linear",
            Profile::TinyNonlinear => "tiny-nonlinear",
            Profile::TinyNonrecursive => "tiny-nonrecursive",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown profile `{s}`"))
    }
}

struct RuleGen<'a> {
    rng: &'a mut ChaCha8Rng,
    consts: &'a [Symbol],
    vars: [Symbol; 3],
}

impl RuleGen<'_> {
    fn term(&mut self) -> Term {
        if self.rng.random_bool(0.1) {
            Term::Const(*self.consts.choose(self.rng).expect("constants"))
        } else {
            Term::Var(*self.vars.choose(self.rng).expect("variables"))
        }
    }

    fn atom(&mut self, pred: (Symbol, usize)) -> Atom {
        Atom::new(pred.0, (0..pred.1).map(|_| self.term()).collect())
    }

    fn rule(&mut self, head: (Symbol, usize), body_preds: &[(Symbol, usize)]) -> Rule {
        let body: Vec<Atom> = body_preds.iter().map(|&p| self.atom(p)).collect();
        let mut bound: Vec<Symbol> = body.iter().flat_map(Atom::variables).collect();
        bound.sort();
        bound.dedup();
        let args = (0..head.1)
            .map(|_| match bound.choose(self.rng) {
                Some(&v) if !self.rng.random_bool(0.05) => Term::Var(v),
                _ => Term::Const(*self.consts.choose(self.rng).expect("constants")),
            })
            .collect();
        Rule::new(Atom::new(head.0, args), body)
    }
}

/// A small random program and database, sized so the exhaustive oracles
/// usually finish. The answer predicate is `I0`.
pub fn gen_random_instance(profile: Profile, seed: u64) -> (Query, Database) {
    let salt = match profile {
        Profile::TinyLinear => 0x11,
        Profile::TinyNonlinear => 0x22,
        Profile::TinyNonrecursive => 0x33,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt);
    let consts: Vec<Symbol> = ["a", "b", "c"][..rng.random_range(2..=3)]
        .iter()
        .map(|s| Symbol::intern(s))
        .collect();
    let edb: Vec<(Symbol, usize)> = (0..rng.random_range(2..=3))
        .map(|i| {
            let arity = if rng.random_bool(0.15) { 3 } else { rng.random_range(1..=2) };
            (Symbol::intern(&format!("E{i}")), arity)
        })
        .collect();
    let idb_count = match profile {
        Profile::TinyNonrecursive => rng.random_range(2..=3),
        _ => rng.random_range(1..=2),
    };
    let idb: Vec<(Symbol, usize)> = (0..idb_count)
        .map(|i| (Symbol::intern(&format!("I{i}")), rng.random_range(1..=2)))
        .collect();

    let mut rules = Vec::new();
    {
        let mut g = RuleGen {
            rng: &mut rng,
            consts: &consts,
            vars: [Symbol::intern("x"), Symbol::intern("y"), Symbol::intern("z")],
        };
        for (h, &head) in idb.iter().enumerate() {
            let base: Vec<_> = (0..g.rng.random_range(1..=2))
                .map(|_| *edb.choose(g.rng).expect("edb"))
                .collect();
            rules.push(g.rule(head, &base));
            // Allowed intensional body predicates.
            let callable: Vec<(Symbol, usize)> = match profile {
                Profile::TinyNonrecursive => idb[h + 1..].to_vec(),
                _ => idb.clone(),
            };
            if callable.is_empty() {
                continue;
            }
            let extra = g.rng.random_range(1..=2);
            for k in 0..extra {
                let idb_atoms = match profile {
                    Profile::TinyNonlinear if h == 0 && k == 0 => 2,
                    Profile::TinyNonlinear => g.rng.random_range(1..=2),
                    _ => 1,
                };
                let mut body: Vec<(Symbol, usize)> = (0..idb_atoms)
                    .map(|_| *callable.choose(g.rng).expect("callable"))
                    .collect();
                if profile != Profile::TinyNonrecursive && h == 0 && k == 0 {
                    body[0] = head;
                }
                let edb_atoms = g.rng.random_range(0..=(3 - idb_atoms).min(2));
                body.extend((0..edb_atoms).map(|_| *edb.choose(g.rng).expect("edb")));
                body.shuffle(g.rng);
                rules.push(g.rule(head, &body));
            }
        }
    }
    let program = Program::new(rules).expect("generated rules are safe and consistent");

    let mut db = Database::new();
    for &(pred, arity) in edb.iter().filter(|(p, _)| program.arity(*p).is_some()) {
        for _ in 0..rng.random_range(2..=4) {
            let args: Vec<Symbol> = (0..arity).map(|_| *consts.choose(&mut rng).expect("constants")).collect();
            db.insert(Fact::new(pred, args));
        }
    }
    (Query::new(program, "I0").expect("I0 is intensional"), db)
}
