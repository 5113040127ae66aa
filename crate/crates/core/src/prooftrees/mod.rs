//! Proof trees and proof DAGs, their shape predicates, unravelling of DAGs
//! into trees, and exhaustive oracles for small instances.

mod oracle;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Serialize, Serializer};

use crate::datalog::{Atom, Database, Fact, Program, Rule, Term};
use crate::engine::FixpointResult;
use crate::error::{Error, Result};
use crate::symbol::Symbol;

pub use oracle::{
    enumerate_trees, ground, min_depth_tree, oracle_unwhy, oracle_unwhy_witnesses, oracle_why, Grounding,
    OracleOptions,
};

/// A set of database facts, kept in canonical order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Support(Vec<Fact>);

impl Support {
    pub fn new(facts: impl IntoIterator<Item = Fact>) -> Self {
        let mut facts: Vec<Fact> = facts.into_iter().collect();
        crate::datalog::sort_canonical(&mut facts);
        facts.dedup();
        Support(facts)
    }

    pub fn facts(&self) -> &[Fact] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.0.binary_search_by(|f| f.canonical_cmp(fact)).is_ok()
    }

    pub fn to_database(&self) -> Database {
        self.0.iter().cloned().collect()
    }

    /// Facts as strings, in canonical order.
    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(Fact::to_string).collect()
    }
}

impl Ord for Support {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.0.iter();
        let mut b = other.0.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(x), Some(y)) => match x.canonical_cmp(y) {
                    Ordering::Equal => continue,
                    other => return other,
                },
            }
        }
    }
}

impl PartialOrd for Support {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FromIterator<Fact> for Support {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        Support::new(iter)
    }
}

/// `f1;f2;…`
impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fact) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{fact}")?;
        }
        Ok(())
    }
}

impl Serialize for Support {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter().map(Fact::to_string))
    }
}

/// A labeled rooted tree; children are ordered.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProofTree {
    pub label: Fact,
    pub children: Vec<ProofTree>,
}

impl ProofTree {
    pub fn leaf(label: Fact) -> Self {
        ProofTree {
            label,
            children: Vec::new(),
        }
    }

    pub fn node(label: Fact, children: Vec<ProofTree>) -> Self {
        ProofTree { label, children }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.children.iter().map(|c| c.depth() + 1).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ProofTree::size).sum::<usize>()
    }

    pub fn support(&self) -> Support {
        let mut leaves = Vec::new();
        self.collect_leaves(&mut leaves);
        Support::new(leaves)
    }

    fn collect_leaves(&self, out: &mut Vec<Fact>) {
        if self.is_leaf() {
            out.push(self.label.clone());
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph proof {\n");
        let mut next = 0usize;
        self.write_dot(&mut out, &mut next);
        out.push_str("}\n");
        out
    }

    fn write_dot(&self, out: &mut String, next: &mut usize) -> usize {
        let id = *next;
        *next += 1;
        let _ = writeln!(out, "  n{id} [label={:?}];", self.label.to_string());
        for c in &self.children {
            let child = c.write_dot(out, next);
            let _ = writeln!(out, "  n{id} -> n{child};");
        }
        id
    }
}

/// A labeled rooted DAG. `children[v]` lists distinct child node ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofDag {
    labels: Vec<Fact>,
    children: Vec<Vec<usize>>,
    root: usize,
}

impl ProofDag {
    pub fn new(labels: Vec<Fact>, children: Vec<Vec<usize>>, root: usize) -> Self {
        assert_eq!(labels.len(), children.len());
        assert!(root < labels.len());
        ProofDag { labels, children, root }
    }

    /// The DAG with one node per fact reachable from `root` through
    /// `choice`, which maps a fact to the body of its unique hyperedge.
    pub fn compressed(root: &Fact, choice: &FxHashMap<Fact, Vec<Fact>>) -> Self {
        let mut ids: FxHashMap<Fact, usize> = FxHashMap::default();
        let mut labels = vec![root.clone()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        ids.insert(root.clone(), 0);
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            let Some(body) = choice.get(&labels[v]) else {
                continue;
            };
            let mut kids = Vec::with_capacity(body.len());
            for b in body {
                let id = *ids.entry(b.clone()).or_insert_with(|| {
                    labels.push(b.clone());
                    children.push(Vec::new());
                    stack.push(labels.len() - 1);
                    labels.len() - 1
                });
                if !kids.contains(&id) {
                    kids.push(id);
                }
            }
            children[v] = kids;
        }
        ProofDag { labels, children, root: 0 }
    }

    pub fn from_tree(tree: &ProofTree) -> Self {
        fn go(t: &ProofTree, labels: &mut Vec<Fact>, children: &mut Vec<Vec<usize>>) -> usize {
            let id = labels.len();
            labels.push(t.label.clone());
            children.push(Vec::new());
            let kids = t.children.iter().map(|c| go(c, labels, children)).collect();
            children[id] = kids;
            id
        }
        let mut labels = Vec::new();
        let mut children = Vec::new();
        go(tree, &mut labels, &mut children);
        ProofDag { labels, children, root: 0 }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_label(&self) -> &Fact {
        &self.labels[self.root]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, v: usize) -> &Fact {
        &self.labels[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// At most one node per fact.
    pub fn is_compressed(&self) -> bool {
        let set: FxHashSet<&Fact> = self.labels.iter().collect();
        set.len() == self.labels.len()
    }

    pub fn support(&self) -> Support {
        Support::new(
            (0..self.len())
                .filter(|&v| self.children[v].is_empty())
                .map(|v| self.labels[v].clone()),
        )
    }

    /// Kahn's algorithm; `None` if there is a cycle.
    fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indegree = vec![0usize; self.len()];
        for kids in &self.children {
            for &k in kids {
                indegree[k] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..self.len()).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(v) = queue.pop() {
            order.push(v);
            for &k in &self.children[v] {
                indegree[k] -= 1;
                if indegree[k] == 0 {
                    queue.push(k);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Edges on the longest path from the root.
    pub fn depth(&self) -> Option<usize> {
        let order = self.topological_order()?;
        let mut depth = vec![0usize; self.len()];
        for &v in order.iter().rev() {
            depth[v] = self.children[v].iter().map(|&k| depth[k] + 1).max().unwrap_or(0);
        }
        Some(depth[self.root])
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph proof {\n");
        for (v, label) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "  n{v} [label={:?}];", label.to_string());
        }
        for (v, kids) in self.children.iter().enumerate() {
            for k in kids {
                let _ = writeln!(out, "  n{v} -> n{k};");
            }
        }
        out.push_str("}\n");
        out
    }
}

type Binding = FxHashMap<Symbol, Symbol>;

fn unify(atom: &Atom, fact: &Fact, binding: &mut Binding, trail: &mut Vec<Symbol>) -> bool {
    if atom.predicate != fact.predicate || atom.args.len() != fact.args.len() {
        return false;
    }
    let mark = trail.len();
    for (term, value) in atom.args.iter().zip(fact.args.iter()) {
        let ok = match *term {
            Term::Const(c) => c == *value,
            Term::Var(v) => match binding.get(&v) {
                Some(b) => b == value,
                None => {
                    binding.insert(v, *value);
                    trail.push(v);
                    true
                }
            },
        };
        if !ok {
            undo(binding, trail, mark);
            return false;
        }
    }
    true
}

fn undo(binding: &mut Binding, trail: &mut Vec<Symbol>, mark: usize) {
    for v in trail.drain(mark..) {
        binding.remove(&v);
    }
}

/// Whether some homomorphism maps `rule`'s head to `head` and its body atoms
/// one-to-one onto `children`, in any order.
fn matches_tree_step(rule: &Rule, head: &Fact, children: &[&Fact]) -> bool {
    if rule.body.len() != children.len() {
        return false;
    }
    let mut binding = Binding::default();
    let mut trail = Vec::new();
    if !unify(&rule.head, head, &mut binding, &mut trail) {
        return false;
    }
    let mut used = vec![false; children.len()];
    fn assign(
        body: &[Atom],
        children: &[&Fact],
        used: &mut [bool],
        binding: &mut Binding,
        trail: &mut Vec<Symbol>,
    ) -> bool {
        let Some((atom, rest)) = body.split_first() else {
            return true;
        };
        for j in 0..children.len() {
            if used[j] {
                continue;
            }
            let mark = trail.len();
            if unify(atom, children[j], binding, trail) {
                used[j] = true;
                if assign(rest, children, used, binding, trail) {
                    return true;
                }
                used[j] = false;
                undo(binding, trail, mark);
            }
        }
        false
    }
    assign(&rule.body, children, &mut used, &mut binding, &mut trail)
}

/// All homomorphisms `h` with `h(head) = head` and `{h(body_i)} = children`
/// (as sets), reported as variable values in [`Rule::variables`] order.
fn dag_step_bindings(rule: &Rule, head: &Fact, children: &[&Fact]) -> Vec<Vec<Symbol>> {
    let mut out = Vec::new();
    let mut binding = Binding::default();
    let mut trail = Vec::new();
    if !unify(&rule.head, head, &mut binding, &mut trail) {
        return out;
    }
    let vars = rule.variables();
    let mut hit = vec![0usize; children.len()];
    #[allow(clippy::too_many_arguments)]
    fn assign(
        body: &[Atom],
        children: &[&Fact],
        hit: &mut [usize],
        binding: &mut Binding,
        trail: &mut Vec<Symbol>,
        vars: &[Symbol],
        out: &mut Vec<Vec<Symbol>>,
    ) {
        let Some((atom, rest)) = body.split_first() else {
            if hit.iter().all(|&h| h > 0) {
                out.push(vars.iter().map(|v| binding[v]).collect());
            }
            return;
        };
        for j in 0..children.len() {
            let mark = trail.len();
            if unify(atom, children[j], binding, trail) {
                hit[j] += 1;
                assign(rest, children, hit, binding, trail, vars, out);
                hit[j] -= 1;
                undo(binding, trail, mark);
            }
        }
    }
    assign(&rule.body, children, &mut hit, &mut binding, &mut trail, &vars, &mut out);
    out
}

/// Checks the three conditions of a proof tree of `goal` w.r.t. `db` and `program`.
pub fn validate_tree(tree: &ProofTree, program: &Program, db: &Database, goal: &Fact) -> bool {
    fn ok(t: &ProofTree, program: &Program, db: &Database) -> bool {
        if t.is_leaf() {
            return db.contains(&t.label);
        }
        let kids: Vec<&Fact> = t.children.iter().map(|c| &c.label).collect();
        program.rules().iter().any(|r| matches_tree_step(r, &t.label, &kids))
            && t.children.iter().all(|c| ok(c, program, db))
    }
    tree.label == *goal && ok(tree, program, db)
}

/// Checks the conditions of a proof DAG of `goal`: rooted at a node labeled
/// `goal`, acyclic, leaves in `db`, and every inner node justified by a rule
/// instance whose body facts are exactly its children's labels.
pub fn validate_dag(dag: &ProofDag, program: &Program, db: &Database, goal: &Fact) -> bool {
    if dag.is_empty() || dag.root_label() != goal || !dag.is_acyclic() {
        return false;
    }
    let mut indegree = vec![0usize; dag.len()];
    for kids in &dag.children {
        for &k in kids {
            indegree[k] += 1;
        }
    }
    let roots: Vec<usize> = (0..dag.len()).filter(|&v| indegree[v] == 0).collect();
    if roots != [dag.root] {
        return false;
    }
    (0..dag.len()).all(|v| {
        let kids = &dag.children[v];
        if kids.is_empty() {
            return db.contains(&dag.labels[v]);
        }
        let mut labels: Vec<&Fact> = kids.iter().map(|&k| &dag.labels[k]).collect();
        labels.sort();
        labels.dedup();
        program
            .rules()
            .iter()
            .any(|r| !dag_step_bindings(r, &dag.labels[v], &labels).is_empty())
    })
}

/// Label-preserving isomorphism classes of subtrees, by hash-consing
/// `(label, sorted child classes)`.
fn subtree_classes(tree: &ProofTree, classes: &mut FxHashMap<(Fact, Vec<usize>), usize>, out: &mut Vec<(Fact, usize)>) -> usize {
    let mut kids: Vec<usize> = tree.children.iter().map(|c| subtree_classes(c, classes, out)).collect();
    kids.sort_unstable();
    let next = classes.len();
    let class = *classes.entry((tree.label.clone(), kids)).or_insert(next);
    out.push((tree.label.clone(), class));
    class
}

/// Equal labels imply isomorphic subtrees.
pub fn is_unambiguous(tree: &ProofTree) -> bool {
    let mut classes = FxHashMap::default();
    let mut nodes = Vec::new();
    subtree_classes(tree, &mut classes, &mut nodes);
    let mut seen: FxHashMap<Fact, usize> = FxHashMap::default();
    nodes
        .into_iter()
        .all(|(label, class)| *seen.entry(label).or_insert(class) == class)
}

/// No label repeats along a root-to-leaf path.
pub fn is_nonrecursive_tree(tree: &ProofTree) -> bool {
    fn go<'a>(t: &'a ProofTree, path: &mut Vec<&'a Fact>) -> bool {
        if path.contains(&&t.label) {
            return false;
        }
        path.push(&t.label);
        let ok = t.children.iter().all(|c| go(c, path));
        path.pop();
        ok
    }
    go(tree, &mut Vec::new())
}

/// `depth(tree) = rank(root label)`.
pub fn is_minimal_depth_tree(tree: &ProofTree, fix: &FixpointResult) -> Result<bool> {
    let rank = fix
        .rank(&tree.label)
        .ok_or_else(|| Error::GoalNotDerivable(tree.label.to_string()))?;
    Ok(tree.depth() == rank as usize)
}

/// Unravels a proof DAG into a proof tree. Each inner node is expanded along
/// the rule instance with the lowest rule index, then the lexicographically
/// smallest homomorphism, whose body facts are exactly its children's labels.
pub fn unravel(dag: &ProofDag, program: &Program) -> ProofTree {
    fn go(dag: &ProofDag, program: &Program, v: usize, memo: &mut FxHashMap<usize, ProofTree>) -> ProofTree {
        if let Some(t) = memo.get(&v) {
            return t.clone();
        }
        let label = dag.labels[v].clone();
        let kids = &dag.children[v];
        let tree = if kids.is_empty() {
            ProofTree::leaf(label)
        } else {
            let mut by_label: BTreeMap<&Fact, usize> = BTreeMap::new();
            for &k in kids {
                by_label.entry(&dag.labels[k]).or_insert(k);
            }
            let labels: Vec<&Fact> = by_label.keys().copied().collect();
            let chosen = program.rules().iter().enumerate().find_map(|(i, r)| {
                let mut hs = dag_step_bindings(r, &label, &labels);
                hs.sort_by(|a, b| {
                    a.iter()
                        .map(|s| s.as_str())
                        .cmp(b.iter().map(|s| s.as_str()))
                });
                hs.into_iter().next().map(|h| (i, h))
            });
            match chosen {
                Some((i, h)) => {
                    let rule = &program.rules()[i];
                    let vars = rule.variables();
                    let lookup: FxHashMap<Symbol, Symbol> = vars.into_iter().zip(h).collect();
                    let children = rule
                        .body
                        .iter()
                        .map(|atom| {
                            let fact = atom.ground(|x| lookup[&x]);
                            go(dag, program, by_label[&fact], memo)
                        })
                        .collect();
                    ProofTree::node(label, children)
                }
                // Not a valid proof DAG; keep the shape with one child per node.
                None => ProofTree::node(label, kids.iter().map(|&k| go(dag, program, k, memo)).collect()),
            }
        };
        memo.insert(v, tree.clone());
        tree
    }
    go(dag, program, dag.root, &mut FxHashMap::default())
}
