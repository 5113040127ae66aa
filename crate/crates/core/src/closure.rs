//! The graph of rule instances and the downward closure of a goal fact.

use std::fmt::Write as _;

use indexmap::IndexSet;
use rustc_hash::FxHashMap;

use crate::datalog::{Database, Fact};
use crate::engine::FixpointResult;
use crate::error::{Error, Result};

/// A hyperedge `head ← body`; `body` is a set of node ids sorted by the
/// canonical order of their facts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Hyperedge {
    pub head: usize,
    pub body: Vec<usize>,
}

/// Nodes are facts, hyperedges are rule instances with the body as a set.
#[derive(Clone, Debug, Default)]
pub struct Hypergraph {
    nodes: IndexSet<Fact>,
    extensional: Vec<bool>,
    edges: Vec<Hyperedge>,
    edge_index: FxHashMap<Hyperedge, usize>,
    by_head: Vec<Vec<usize>>,
    by_body: Vec<Vec<usize>>,
}

impl Hypergraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node, or returns the existing id.
    pub fn add_node(&mut self, fact: Fact, extensional: bool) -> usize {
        if let Some(id) = self.nodes.get_index_of(&fact) {
            return id;
        }
        let (id, _) = self.nodes.insert_full(fact);
        self.extensional.push(extensional);
        self.by_head.push(Vec::new());
        self.by_body.push(Vec::new());
        id
    }

    /// Adds `head ← body` as a set; duplicates are ignored. Returns whether
    /// the hyperedge is new.
    pub fn add_edge(&mut self, head: usize, body: impl IntoIterator<Item = usize>) -> bool {
        let mut body: Vec<usize> = body.into_iter().collect();
        body.sort_by(|a, b| self.nodes[*a].canonical_cmp(&self.nodes[*b]));
        body.dedup();
        let edge = Hyperedge { head, body };
        if self.edge_index.contains_key(&edge) {
            return false;
        }
        let id = self.edges.len();
        self.by_head[head].push(id);
        for &b in &edge.body {
            self.by_body[b].push(id);
        }
        self.edge_index.insert(edge.clone(), id);
        self.edges.push(edge);
        true
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: usize) -> &Fact {
        &self.nodes[id]
    }

    pub fn node_id(&self, fact: &Fact) -> Option<usize> {
        self.nodes.get_index_of(fact)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Fact> + '_ {
        self.nodes.iter()
    }

    pub fn is_extensional(&self, id: usize) -> bool {
        self.extensional[id]
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Hyperedge {
        &self.edges[id]
    }

    /// Ids of hyperedges with the given head.
    pub fn edges_with_head(&self, node: usize) -> &[usize] {
        &self.by_head[node]
    }

    /// Ids of hyperedges whose body contains the given node.
    pub fn edges_with_body_member(&self, node: usize) -> &[usize] {
        &self.by_body[node]
    }

    /// One line per hyperedge, `head <- f1, f2`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = write!(out, "{} <- ", self.nodes[e.head]);
            for (i, b) in e.body.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{}", self.nodes[*b]);
            }
            out.push('\n');
        }
        out
    }
}

/// The part of the graph of rule instances reachable from a goal fact.
/// The goal is node 0.
#[derive(Clone, Debug)]
pub struct DownwardClosure {
    pub graph: Hypergraph,
}

impl DownwardClosure {
    pub fn goal(&self) -> &Fact {
        self.graph.node(0)
    }

    pub fn goal_id(&self) -> usize {
        0
    }

    pub fn to_text(&self) -> String {
        self.graph.to_text()
    }

    /// Input database facts among the closure nodes.
    pub fn database_facts(&self) -> impl Iterator<Item = &Fact> + '_ {
        (0..self.graph.node_count())
            .filter(|&v| self.graph.is_extensional(v))
            .map(|v| self.graph.node(v))
    }
}

/// Nodes are the fixpoint facts; one hyperedge per logged instantiation.
/// If the fixpoint was computed without the log, instantiations are
/// recomputed per fact.
pub fn build_gri(db: &Database, fix: &FixpointResult) -> Hypergraph {
    let mut g = Hypergraph::new();
    for fact in fix.facts() {
        let ext = db.contains(&fact);
        g.add_node(fact, ext);
    }
    let add = |g: &mut Hypergraph, head: &Fact, body: &[Fact]| {
        let h = g.node_id(head).expect("head in fixpoint");
        let ids: Vec<usize> = body.iter().map(|b| g.node_id(b).expect("body in fixpoint")).collect();
        g.add_edge(h, ids);
    };
    if fix.instantiations().is_empty() {
        let facts: Vec<Fact> = fix.facts().collect();
        for head in &facts {
            for (_, body) in fix.instantiations_with_head(head) {
                add(&mut g, head, &body);
            }
        }
    } else {
        for inst in fix.instantiations() {
            add(&mut g, &inst.head, &inst.body);
        }
    }
    g
}

/// Restricts `gri` to the nodes reachable from `goal` and the hyperedges
/// whose head is one of them.
pub fn downward_closure(gri: &Hypergraph, goal: &Fact) -> Result<DownwardClosure> {
    let start = gri
        .node_id(goal)
        .ok_or_else(|| Error::GoalNotDerivable(goal.to_string()))?;
    let mut order: IndexSet<usize> = IndexSet::new();
    order.insert(start);
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        for &e in gri.edges_with_head(v) {
            for &b in &gri.edge(e).body {
                order.insert(b);
            }
        }
        i += 1;
    }
    let mut out = Hypergraph::new();
    for &v in &order {
        out.add_node(gri.node(v).clone(), gri.is_extensional(v));
    }
    for (new_id, &v) in order.iter().enumerate() {
        for &e in gri.edges_with_head(v) {
            let body: Vec<usize> = gri
                .edge(e)
                .body
                .iter()
                .map(|b| order.get_index_of(b).expect("reachable"))
                .collect();
            out.add_edge(new_id, body);
        }
    }
    Ok(DownwardClosure { graph: out })
}

/// The downward closure built directly from the fixpoint, expanding each
/// reached fact by the instantiations whose head it is. Avoids
/// materialising the whole graph of rule instances.
pub fn goal_closure(db: &Database, fix: &FixpointResult, goal: &Fact) -> Result<DownwardClosure> {
    if !fix.contains(goal) {
        return Err(Error::GoalNotDerivable(goal.to_string()));
    }
    let mut g = Hypergraph::new();
    g.add_node(goal.clone(), db.contains(goal));
    let mut i = 0;
    while i < g.node_count() {
        let head = g.node(i).clone();
        if !g.is_extensional(i) {
            for (_, body) in fix.instantiations_with_head(&head) {
                let ids: Vec<usize> = body
                    .into_iter()
                    .map(|b| {
                        let ext = db.contains(&b);
                        g.add_node(b, ext)
                    })
                    .collect();
                g.add_edge(i, ids);
            }
        }
        i += 1;
    }
    Ok(DownwardClosure { graph: g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalog::parse_fact;
    use crate::engine::{fixpoint, EngineOptions};
    use crate::testing::*;

    fn f(s: &str) -> Fact {
        parse_fact(s).unwrap()
    }

    fn edge_strings(g: &Hypergraph) -> Vec<String> {
        let mut v: Vec<String> = g.to_text().lines().map(str::to_owned).collect();
        v.sort();
        v
    }

    fn gri_of(p: &crate::datalog::Program, d: &Database) -> Hypergraph {
        build_gri(d, &fixpoint(p, d, &EngineOptions::default()).unwrap())
    }

    #[test]
    fn gri_of_example_2_2() {
        let (p, d) = example_2_2();
        let g = gri_of(&p, &d);
        let edges = edge_strings(&g);
        for e in ["A(a) <- S(a)", "A(d) <- A(a), T(a,a,d)", "A(a) <- A(b), A(c), T(b,c,a)"] {
            assert!(edges.contains(&e.to_string()), "{e}");
        }
        assert_eq!(g.node_count(), 9);
    }

    #[test]
    fn gri_of_empty_database() {
        let (p, _) = example_2_2();
        let g = gri_of(&p, &Database::new());
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn gri_of_example_5_1() {
        let (p, d) = example_5_1();
        let g = gri_of(&p, &d);
        let edges = edge_strings(&g);
        assert_eq!(edges.iter().filter(|e| e.contains("S(")).count(), 2);
        assert_eq!(edges.iter().filter(|e| e.contains("T(")).count(), 3);
        assert_eq!(g.edge_count(), 5);
    }

    #[test]
    fn closure_of_example_2_2() {
        let (p, d) = example_2_2();
        let dc = downward_closure(&gri_of(&p, &d), &f("A(d)")).unwrap();
        assert_eq!(dc.goal(), &f("A(d)"));
        assert_eq!(dc.graph.node_count(), 9);
        assert_eq!(dc.database_facts().count(), 5);
    }

    #[test]
    fn closure_of_extensional_goal() {
        let (p, d) = example_2_2();
        let dc = downward_closure(&gri_of(&p, &d), &f("S(a)")).unwrap();
        assert_eq!(dc.graph.node_count(), 1);
        assert_eq!(dc.graph.edge_count(), 0);
    }

    #[test]
    fn closure_of_example_5_1() {
        let (p, d) = example_5_1();
        let dc = downward_closure(&gri_of(&p, &d), &f("A(d)")).unwrap();
        let c = dc.graph.node_id(&f("A(c)")).unwrap();
        assert_eq!(dc.graph.edges_with_head(c).len(), 2);
        assert_eq!(dc.graph.node_count(), 9);
    }

    #[test]
    fn underivable_goal() {
        let (p, d) = example_5_1();
        assert!(matches!(
            downward_closure(&gri_of(&p, &d), &f("A(q)")),
            Err(Error::GoalNotDerivable(_))
        ));
    }

    #[test]
    fn unreachable_heads_are_dropped() {
        let (p, d) = example_5_1();
        let dc = downward_closure(&gri_of(&p, &d), &f("A(c)")).unwrap();
        assert!(dc.graph.node_id(&f("A(d)")).is_none());
        assert!(dc
            .graph
            .edges()
            .iter()
            .all(|e| dc.graph.node(e.head) != &f("A(d)")));
    }

    #[test]
    fn goal_closure_matches_gri_route() {
        for (p, d) in [example_2_2(), example_5_1()] {
            let fix = fixpoint(&p, &d, &EngineOptions::default()).unwrap();
            let gri = build_gri(&d, &fix);
            for goal in fix.facts() {
                let a = downward_closure(&gri, &goal).unwrap();
                let b = goal_closure(&d, &fix, &goal).unwrap();
                assert_eq!(edge_strings(&a.graph), edge_strings(&b.graph), "{goal}");
                let mut na: Vec<String> = a.graph.nodes().map(|n| n.to_string()).collect();
                let mut nb: Vec<String> = b.graph.nodes().map(|n| n.to_string()).collect();
                na.sort();
                nb.sort();
                assert_eq!(na, nb);
            }
        }
    }

    #[test]
    fn gri_without_log() {
        let (p, d) = example_5_1();
        let opts = EngineOptions {
            record_instantiations: false,
            ..Default::default()
        };
        let fix = fixpoint(&p, &d, &opts).unwrap();
        assert_eq!(edge_strings(&build_gri(&d, &fix)), edge_strings(&gri_of(&p, &d)));
    }

    #[test]
    fn text_export() {
        let (p, d) = example_2_2();
        let dc = downward_closure(&gri_of(&p, &d), &f("A(a)")).unwrap();
        let text = dc.to_text();
        assert!(text.lines().all(|l| l.contains(" <- ")));
        assert_eq!(text.lines().count(), dc.graph.edge_count());
    }
}
