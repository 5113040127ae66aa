//! Propositional satisfiability: literals and CNF formulas, an incremental
//! CDCL solver, DIMACS I/O, an external-solver bridge and a truth-table
//! reference solver.

mod cdcl;
pub mod dimacs;
mod external;
pub mod reference;

use std::fmt;
use std::ops::Not;

pub use cdcl::{SolveResult, Solver, SolverOptions, SolverStats};
pub use external::{ExternalSolver, SOLVER_ENV_VAR};

/// A propositional variable, numbered from 1 as in DIMACS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_index(i: usize) -> Var {
        Var(i as u32 + 1)
    }

    pub fn pos(self) -> Lit {
        Lit::new(self, false)
    }

    pub fn neg(self) -> Lit {
        Lit::new(self, true)
    }
}

/// A literal, encoded as `2 * index + negated`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, negated: bool) -> Lit {
        Lit(((var.0 - 1) << 1) | negated as u32)
    }

    pub fn var(self) -> Var {
        Var((self.0 >> 1) + 1)
    }

    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    pub(crate) fn code(self) -> usize {
        self.0 as usize
    }

    pub fn from_dimacs(x: i32) -> Lit {
        assert!(x != 0, "0 is not a literal");
        Lit::new(Var(x.unsigned_abs()), x < 0)
    }

    pub fn to_dimacs(self) -> i32 {
        let v = self.var().0 as i32;
        if self.is_negated() {
            -v
        } else {
            v
        }
    }

    /// Whether the literal holds under `model`, indexed by [`Var::index`].
    pub fn eval(self, model: &[bool]) -> bool {
        model[self.var().index()] != self.is_negated()
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A formula in conjunctive normal form over variables `1..=num_vars`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new(num_vars: u32) -> Self {
        Cnf {
            num_vars,
            clauses: Vec::new(),
        }
    }

    pub fn add_clause(&mut self, clause: impl IntoIterator<Item = Lit>) {
        let clause: Vec<Lit> = clause.into_iter().collect();
        for l in &clause {
            self.num_vars = self.num_vars.max(l.var().0);
        }
        self.clauses.push(clause);
    }

    /// Every clause has a literal true under `model`.
    pub fn is_satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| l.eval(model)))
    }
}
