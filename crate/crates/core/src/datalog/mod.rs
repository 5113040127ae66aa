//! The Datalog model: terms, atoms, facts, rules, programs, databases and
//! queries, plus structural classification of programs.

mod parser;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use indexmap::{IndexMap, IndexSet};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::symbol::Symbol;

pub use parser::{parse_atom, parse_database, parse_fact, parse_program, FactScope};

/// Constant arguments of a fact.
pub type Tuple = SmallVec<[Symbol; 4]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Symbol),
    Var(Symbol),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<Symbol>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        })
    }

    /// Instantiates the atom under a total assignment of its variables.
    pub fn ground(&self, binding: impl Fn(Symbol) -> Symbol) -> Fact {
        Fact {
            predicate: self.predicate,
            args: self
                .args
                .iter()
                .map(|t| match *t {
                    Term::Const(c) => c,
                    Term::Var(v) => binding(v),
                })
                .collect(),
        }
    }
}

/// A ground atom.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub predicate: Symbol,
    pub args: Tuple,
}

impl Fact {
    pub fn new<S: Into<Symbol>>(predicate: impl Into<Symbol>, args: impl IntoIterator<Item = S>) -> Self {
        Fact {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// Order by predicate name, then argument strings. Independent of
    /// interning order, so it is stable across processes.
    pub fn canonical_cmp(&self, other: &Fact) -> Ordering {
        self.predicate
            .as_str()
            .cmp(other.predicate.as_str())
            .then_with(|| {
                self.args
                    .iter()
                    .map(|s| s.as_str())
                    .cmp(other.args.iter().map(|s| s.as_str()))
            })
    }
}

pub fn sort_canonical(facts: &mut [Fact]) {
    facts.sort_by(Fact::canonical_cmp);
}

fn is_plain_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_numeric_token(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_digit())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// Constants inside facts may be bare identifiers.
fn write_fact_constant(f: &mut fmt::Formatter<'_>, c: Symbol) -> fmt::Result {
    let s = c.as_str();
    if is_plain_identifier(s) || is_numeric_token(s) {
        f.write_str(s)
    } else {
        write_quoted(f, s)
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, c) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write_fact_constant(f, *c)?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Term::Var(v) => f.write_str(v.as_str()),
            // Inside rules a bare identifier is a variable.
            Term::Const(c) if is_numeric_token(c.as_str()) => f.write_str(c.as_str()),
            Term::Const(c) => write_quoted(f, c.as_str()),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Atom>) -> Self {
        Rule { head, body }
    }

    /// Variables in order of first occurrence, body first, then head.
    pub fn variables(&self) -> Vec<Symbol> {
        let mut seen = IndexSet::new();
        for atom in self.body.iter().chain(std::iter::once(&self.head)) {
            seen.extend(atom.variables());
        }
        seen.into_iter().collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(".")
    }
}

/// A validated Datalog program.
#[derive(Clone, Debug)]
pub struct Program {
    rules: Vec<Rule>,
    arities: IndexMap<Symbol, usize>,
    edb: IndexSet<Symbol>,
    idb: IndexSet<Symbol>,
    /// Predicate graph: `R -> P` iff `R` occurs in the body of a rule with head `P`.
    dependencies: IndexMap<Symbol, IndexSet<Symbol>>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl Eq for Program {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub is_linear: bool,
    pub is_nonrecursive: bool,
}

impl Program {
    /// Validates safety, non-empty bodies and arity consistency.
    pub fn new(rules: Vec<Rule>) -> Result<Self> {
        let mut arities: IndexMap<Symbol, usize> = IndexMap::new();
        for (index, rule) in rules.iter().enumerate() {
            if rule.body.is_empty() {
                return Err(Error::Syntax {
                    line: 0,
                    col: 0,
                    message: format!("rule {index} has an empty body"),
                });
            }
            for atom in std::iter::once(&rule.head).chain(&rule.body) {
                let expected = *arities.entry(atom.predicate).or_insert(atom.arity());
                if expected != atom.arity() {
                    return Err(Error::ArityMismatch {
                        predicate: atom.predicate.to_string(),
                        expected,
                        found: atom.arity(),
                    });
                }
            }
            let body_vars: IndexSet<Symbol> = rule.body.iter().flat_map(Atom::variables).collect();
            if let Some(v) = rule.head.variables().find(|v| !body_vars.contains(v)) {
                return Err(Error::SafetyViolation {
                    rule: index,
                    variable: v.to_string(),
                });
            }
        }

        let idb: IndexSet<Symbol> = rules.iter().map(|r| r.head.predicate).collect();
        let edb: IndexSet<Symbol> = arities.keys().copied().filter(|p| !idb.contains(p)).collect();
        let mut dependencies: IndexMap<Symbol, IndexSet<Symbol>> = IndexMap::new();
        for rule in &rules {
            for atom in &rule.body {
                dependencies
                    .entry(atom.predicate)
                    .or_default()
                    .insert(rule.head.predicate);
            }
        }
        Ok(Program {
            rules,
            arities,
            edb,
            idb,
            dependencies,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn edb(&self) -> &IndexSet<Symbol> {
        &self.edb
    }

    pub fn idb(&self) -> &IndexSet<Symbol> {
        &self.idb
    }

    pub fn arity(&self, predicate: Symbol) -> Option<usize> {
        self.arities.get(&predicate).copied()
    }

    /// All predicates of the schema with their arities.
    pub fn schema(&self) -> impl Iterator<Item = (Symbol, usize)> + '_ {
        self.arities.iter().map(|(p, a)| (*p, *a))
    }

    pub fn is_intensional(&self, predicate: Symbol) -> bool {
        self.idb.contains(&predicate)
    }

    /// Successors of `predicate` in the predicate graph.
    pub fn dependents(&self, predicate: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        self.dependencies
            .get(&predicate)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    pub fn max_arity(&self) -> usize {
        self.arities.values().copied().max().unwrap_or(0)
    }

    pub fn max_body_len(&self) -> usize {
        self.rules.iter().map(|r| r.body.len()).max().unwrap_or(0)
    }

    pub fn classify(&self) -> Classification {
        let is_linear = self.rules.iter().all(|r| {
            r.body
                .iter()
                .filter(|a| self.is_intensional(a.predicate))
                .count()
                <= 1
        });
        Classification {
            is_linear,
            is_nonrecursive: !self.has_cycle(),
        }
    }

    fn has_cycle(&self) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Unvisited,
            OnStack,
            Done,
        }
        let preds: Vec<Symbol> = self.arities.keys().copied().collect();
        let index: IndexMap<Symbol, usize> = preds.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut marks = vec![Mark::Unvisited; preds.len()];
        for start in 0..preds.len() {
            if marks[start] != Mark::Unvisited {
                continue;
            }
            // Iterative DFS; each frame holds the node and its pending successors.
            let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
            marks[start] = Mark::OnStack;
            stack.push((start, self.dependents(preds[start]).map(|s| index[&s]).collect()));
            while let Some((node, pending)) = stack.last_mut() {
                match pending.pop() {
                    Some(next) => match marks[next] {
                        Mark::OnStack => return true,
                        Mark::Done => {}
                        Mark::Unvisited => {
                            marks[next] = Mark::OnStack;
                            let succ = self.dependents(preds[next]).map(|s| index[&s]).collect();
                            stack.push((next, succ));
                        }
                    },
                    None => {
                        marks[*node] = Mark::Done;
                        stack.pop();
                    }
                }
            }
        }
        false
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

/// A duplicate-free set of facts, iterated in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    facts: IndexSet<Fact>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, fact: Fact) -> bool {
        self.facts.insert(fact)
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fact> + '_ {
        self.facts.iter()
    }

    pub fn index_of(&self, fact: &Fact) -> Option<usize> {
        self.facts.get_index_of(fact)
    }

    pub fn active_domain(&self) -> IndexSet<Symbol> {
        self.facts.iter().flat_map(|f| f.args.iter().copied()).collect()
    }

    pub fn is_subset_of(&self, other: &Database) -> bool {
        self.facts.iter().all(|f| other.contains(f))
    }

    /// Facts in canonical order.
    pub fn sorted(&self) -> Vec<Fact> {
        let mut facts: Vec<Fact> = self.facts.iter().cloned().collect();
        sort_canonical(&mut facts);
        facts
    }
}

impl FromIterator<Fact> for Database {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        Database {
            facts: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Database {
    type Item = &'a Fact;
    type IntoIter = indexmap::set::Iter<'a, Fact>;

    fn into_iter(self) -> Self::IntoIter {
        self.facts.iter()
    }
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in self.sorted() {
            writeln!(f, "{fact}")?;
        }
        Ok(())
    }
}

/// A program together with its answer predicate.
#[derive(Clone, Debug)]
pub struct Query {
    pub program: Arc<Program>,
    pub answer: Symbol,
}

impl Query {
    pub fn new(program: impl Into<Arc<Program>>, answer: impl Into<Symbol>) -> Result<Self> {
        let program = program.into();
        let answer = answer.into();
        if !program.is_intensional(answer) {
            return Err(Error::NotIntensional(answer.to_string()));
        }
        Ok(Query { program, answer })
    }

    pub fn arity(&self) -> usize {
        self.program.arity(self.answer).expect("answer predicate is in the schema")
    }

    /// The fact `answer(tuple)`, checking the tuple length.
    pub fn goal(&self, tuple: &[Symbol]) -> Result<Fact> {
        if tuple.len() != self.arity() {
            return Err(Error::ArityMismatch {
                predicate: self.answer.to_string(),
                expected: self.arity(),
                found: tuple.len(),
            });
        }
        Ok(Fact {
            predicate: self.answer,
            args: tuple.iter().copied().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const PATH_ACCESSIBILITY: &str = "A(x) :- S(x). A(x) :- A(y),A(z),T(y,z,x).";

    #[test]
    fn path_accessibility_schema() {
        let p = parse_program(PATH_ACCESSIBILITY).unwrap();
        let edb: Vec<_> = p.edb().iter().map(|s| s.as_str()).collect();
        let idb: Vec<_> = p.idb().iter().map(|s| s.as_str()).collect();
        assert_eq!(edb, vec!["S", "T"]);
        assert_eq!(idb, vec!["A"]);
        assert_eq!(
            p.classify(),
            Classification {
                is_linear: false,
                is_nonrecursive: false
            }
        );
    }

    #[test]
    fn single_rule_is_linear_and_nonrecursive() {
        let p = parse_program("A(x) :- S(x).").unwrap();
        assert_eq!(
            p.classify(),
            Classification {
                is_linear: true,
                is_nonrecursive: true
            }
        );
    }

    #[test]
    fn chained_nonrecursive_program() {
        let p = parse_program("B(x) :- A(x), A(x). A(x) :- S(x).").unwrap();
        let c = p.classify();
        assert!(c.is_nonrecursive);
        assert!(!c.is_linear);
    }

    #[test]
    fn mutual_recursion_detected() {
        let p = parse_program("A(x) :- B(x). B(x) :- A(x). A(x) :- S(x).").unwrap();
        assert!(!p.classify().is_nonrecursive);
        assert!(p.classify().is_linear);
    }

    #[test]
    fn unsafe_rule_rejected() {
        match parse_program("A(x) :- S(y).") {
            Err(Error::SafetyViolation { rule, variable }) => {
                assert_eq!(rule, 0);
                assert_eq!(variable, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arity_mismatch_rejected() {
        assert!(matches!(
            parse_program("A(x) :- S(x). A(x,y) :- S(x), S(y)."),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn query_goal_checks_arity() {
        let p = parse_program(PATH_ACCESSIBILITY).unwrap();
        let q = Query::new(p, "A").unwrap();
        assert!(q.goal(&[Symbol::intern("d")]).is_ok());
        assert!(matches!(q.goal(&[]), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn query_rejects_extensional_answer() {
        let p = parse_program(PATH_ACCESSIBILITY).unwrap();
        assert!(matches!(Query::new(p, "S"), Err(Error::NotIntensional(_))));
    }

    #[test]
    fn fact_display_quotes_odd_constants() {
        let f = Fact::new("P", ["a b", "x", "42"]);
        assert_eq!(f.to_string(), "P(\"a b\",x,42)");
    }
}
