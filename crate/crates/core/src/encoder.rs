//! CNF encoding of compressed DAGs inside a downward closure.
//!
//! Variables: `x_α` per closure node, `y_e` per hyperedge, `z_(α,β)` per
//! (head, body member) pair, and auxiliary reachability variables for the
//! acyclicity constraint. A model selects a rooted acyclic subgraph in which
//! every selected intensional node uses exactly one hyperedge.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::{self, Write as _};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::closure::DownwardClosure;
use crate::datalog::Fact;
use crate::error::{Error, Result};
use crate::prooftrees::{ProofDag, Support};
use crate::sat::{dimacs, Cnf, Lit, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Acyclicity {
    TransitiveClosure,
    #[default]
    VertexElimination,
}

impl fmt::Display for Acyclicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Acyclicity::TransitiveClosure => "tc",
            Acyclicity::VertexElimination => "ve",
        })
    }
}

impl std::str::FromStr for Acyclicity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tc" | "transitive-closure" => Ok(Acyclicity::TransitiveClosure),
            "ve" | "vertex-elimination" => Ok(Acyclicity::VertexElimination),
            other => Err(format!("unknown acyclicity encoding `{other}` (expected tc or ve)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EncodeOptions {
    pub acyclicity: Acyclicity,
    pub max_clauses: usize,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            acyclicity: Acyclicity::VertexElimination,
            max_clauses: 50_000_000,
        }
    }
}

impl EncodeOptions {
    pub fn with(acyclicity: Acyclicity) -> Self {
        EncodeOptions {
            acyclicity,
            ..Default::default()
        }
    }
}

/// What a variable stands for. Node ids refer to the closure graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Node(usize),
    Hedge(usize),
    Edge(usize, usize),
    /// Reachability from the first node to the second.
    Aux(usize, usize),
}

#[derive(Clone, Debug, Default)]
pub struct VarMap {
    node_vars: Vec<Var>,
    hedge_vars: Vec<Var>,
    edge_vars: FxHashMap<(usize, usize), Var>,
    kinds: Vec<VarKind>,
    counts: [usize; 4],
}

impl VarMap {
    fn push(&mut self, kind: VarKind) -> Var {
        self.kinds.push(kind);
        let family = match kind {
            VarKind::Node(_) => 0,
            VarKind::Hedge(_) => 1,
            VarKind::Edge(..) => 2,
            VarKind::Aux(..) => 3,
        };
        self.counts[family] += 1;
        Var(self.kinds.len() as u32)
    }

    pub fn num_vars(&self) -> u32 {
        self.kinds.len() as u32
    }

    pub fn node_var(&self, node: usize) -> Var {
        self.node_vars[node]
    }

    pub fn hedge_var(&self, edge: usize) -> Var {
        self.hedge_vars[edge]
    }

    pub fn edge_var(&self, from: usize, to: usize) -> Option<Var> {
        self.edge_vars.get(&(from, to)).copied()
    }

    pub fn kind(&self, var: Var) -> VarKind {
        self.kinds[var.index()]
    }

    pub fn node_count(&self) -> usize {
        self.counts[0]
    }

    pub fn hedge_count(&self) -> usize {
        self.counts[1]
    }

    pub fn edge_count(&self) -> usize {
        self.counts[2]
    }

    pub fn aux_count(&self) -> usize {
        self.counts[3]
    }
}

/// The formula for one goal together with its variable map and closure.
#[derive(Clone, Debug)]
pub struct CnfInstance {
    pub cnf: Cnf,
    pub vars: VarMap,
    pub closure: DownwardClosure,
    /// `(x_α, α)` for closure nodes that are input facts, in canonical order.
    pub db_leaf_vars: Vec<(Var, Fact)>,
    pub acyclicity: Acyclicity,
}

impl CnfInstance {
    /// `db(τ)`: input facts whose node variable is true.
    pub fn db_of_model(&self, model: &[bool]) -> Support {
        Support::new(
            self.db_leaf_vars
                .iter()
                .filter(|(v, _)| model[v.index()])
                .map(|(_, f)| f.clone()),
        )
    }

    /// The subgraph selected by a model: nodes with `x` true, edges with `z` true.
    pub fn witness(&self, model: &[bool]) -> ProofDag {
        let g = &self.closure.graph;
        let selected: Vec<usize> = (0..g.node_count())
            .filter(|&v| model[self.vars.node_var(v).index()])
            .collect();
        let local: FxHashMap<usize, usize> = selected.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let labels: Vec<Fact> = selected.iter().map(|&v| g.node(v).clone()).collect();
        let mut children = vec![Vec::new(); selected.len()];
        for (&(a, b), var) in &self.vars.edge_vars {
            if model[var.index()] {
                if let (Some(&la), Some(&lb)) = (local.get(&a), local.get(&b)) {
                    children[la].push(lb);
                }
            }
        }
        for kids in &mut children {
            kids.sort_unstable();
            kids.dedup();
        }
        let root = local[&self.closure.goal_id()];
        ProofDag::new(labels, children, root)
    }

    pub fn to_dimacs(&self) -> String {
        dimacs::write(&self.cnf)
    }

    /// `var <id> node|hedge|edge|aux <description>`, one line per variable.
    pub fn var_map_text(&self) -> String {
        let g = &self.closure.graph;
        let mut out = String::new();
        for (i, kind) in self.vars.kinds.iter().enumerate() {
            let id = i + 1;
            let _ = match *kind {
                VarKind::Node(v) => writeln!(out, "var {id} node {}", g.node(v)),
                VarKind::Hedge(e) => {
                    let e = g.edge(e);
                    let body: Vec<String> = e.body.iter().map(|b| g.node(*b).to_string()).collect();
                    writeln!(out, "var {id} hedge {} <- {}", g.node(e.head), body.join(", "))
                }
                VarKind::Edge(a, b) => writeln!(out, "var {id} edge {} -> {}", g.node(a), g.node(b)),
                VarKind::Aux(a, b) => writeln!(out, "var {id} aux t({}, {})", g.node(a), g.node(b)),
            };
        }
        out
    }
}

struct Clauses<'a> {
    cnf: &'a mut Cnf,
    cap: usize,
}

impl Clauses<'_> {
    fn add(&mut self, clause: Vec<Lit>) -> Result<()> {
        if self.cnf.clauses.len() >= self.cap {
            return Err(Error::EncodingTooLarge {
                clauses: self.cnf.clauses.len() + 1,
                cap: self.cap,
            });
        }
        self.cnf.clauses.push(clause);
        Ok(())
    }
}

/// Transitive-closure acyclicity over `nodes`: `z ⇒ t(α,β)`,
/// `z(α,β) ∧ t(β,γ) ⇒ t(α,γ)` and `¬t(α,α)`. `new_var` allocates `t(a, b)`.
pub fn acyclicity_tc(
    nodes: &[usize],
    edges: &[(usize, usize, Var)],
    new_var: &mut dyn FnMut(usize, usize) -> Var,
    emit: &mut dyn FnMut(Vec<Lit>) -> Result<()>,
) -> Result<()> {
    let mut t: FxHashMap<(usize, usize), Var> = FxHashMap::default();
    for &a in nodes {
        for &b in nodes {
            t.insert((a, b), new_var(a, b));
        }
    }
    for &(a, b, z) in edges {
        emit(vec![z.neg(), t[&(a, b)].pos()])?;
    }
    for &(a, b, z) in edges {
        for &c in nodes {
            emit(vec![z.neg(), t[&(b, c)].neg(), t[&(a, c)].pos()])?;
        }
    }
    for &a in nodes {
        emit(vec![t[&(a, a)].neg()])?;
    }
    Ok(())
}

/// Vertex-elimination acyclicity. Every edge of the elimination graph gets
/// a variable `t(u,w)` implied by its `z`. Eliminating `v` adds
/// `t(u,v) ∧ t(v,w) ⇒ t(u,w)` for in-neighbours `u` and out-neighbours `w`
/// (creating fill edges), and `¬t(u,v) ∨ ¬t(v,u)` when `u = w`. Self-loops
/// are forbidden outright. With `order = None`, vertices are eliminated by
/// minimum degree, ties to the lowest id.
pub fn acyclicity_ve(
    edges: &[(usize, usize, Var)],
    order: Option<&[usize]>,
    new_var: &mut dyn FnMut(usize, usize) -> Var,
    emit: &mut dyn FnMut(Vec<Lit>) -> Result<()>,
) -> Result<()> {
    let mut out_adj: FxHashMap<usize, FxHashSet<usize>> = FxHashMap::default();
    let mut in_adj: FxHashMap<usize, FxHashSet<usize>> = FxHashMap::default();
    let mut t: FxHashMap<(usize, usize), Var> = FxHashMap::default();
    for &(a, b, z) in edges {
        if a == b {
            emit(vec![z.neg()])?;
            continue;
        }
        let tv = *t.entry((a, b)).or_insert_with(|| new_var(a, b));
        emit(vec![z.neg(), tv.pos()])?;
        out_adj.entry(a).or_default().insert(b);
        in_adj.entry(b).or_default().insert(a);
        out_adj.entry(b).or_default();
        in_adj.entry(a).or_default();
    }

    let degree = |v: usize, out_adj: &FxHashMap<usize, FxHashSet<usize>>, in_adj: &FxHashMap<usize, FxHashSet<usize>>| {
        out_adj.get(&v).map_or(0, |s| s.len()) + in_adj.get(&v).map_or(0, |s| s.len())
    };

    let mut eliminated: FxHashSet<usize> = FxHashSet::default();
    let mut eliminate = |v: usize,
                         out_adj: &mut FxHashMap<usize, FxHashSet<usize>>,
                         in_adj: &mut FxHashMap<usize, FxHashSet<usize>>,
                         touched: &mut Vec<usize>|
     -> Result<()> {
        let mut ins: Vec<usize> = in_adj.remove(&v).unwrap_or_default().into_iter().collect();
        let mut outs: Vec<usize> = out_adj.remove(&v).unwrap_or_default().into_iter().collect();
        ins.sort_unstable();
        outs.sort_unstable();
        for &u in &ins {
            out_adj.get_mut(&u).expect("vertex").remove(&v);
        }
        for &w in &outs {
            in_adj.get_mut(&w).expect("vertex").remove(&v);
        }
        for &u in &ins {
            for &w in &outs {
                let uv = t[&(u, v)];
                let vw = t[&(v, w)];
                if u == w {
                    emit(vec![uv.neg(), vw.neg()])?;
                } else {
                    let uw = *t.entry((u, w)).or_insert_with(|| new_var(u, w));
                    emit(vec![uv.neg(), vw.neg(), uw.pos()])?;
                    out_adj.get_mut(&u).expect("vertex").insert(w);
                    in_adj.get_mut(&w).expect("vertex").insert(u);
                }
            }
        }
        touched.extend(ins);
        touched.extend(outs);
        Ok(())
    };

    let mut touched = Vec::new();
    match order {
        Some(order) => {
            for &v in order {
                if eliminated.insert(v) {
                    eliminate(v, &mut out_adj, &mut in_adj, &mut touched)?;
                }
            }
        }
        None => {
            let mut heap: BinaryHeap<Reverse<(usize, usize)>> = out_adj
                .keys()
                .map(|&v| Reverse((degree(v, &out_adj, &in_adj), v)))
                .collect();
            while let Some(Reverse((d, v))) = heap.pop() {
                if eliminated.contains(&v) {
                    continue;
                }
                let current = degree(v, &out_adj, &in_adj);
                if current != d {
                    heap.push(Reverse((current, v)));
                    continue;
                }
                eliminated.insert(v);
                touched.clear();
                eliminate(v, &mut out_adj, &mut in_adj, &mut touched)?;
                touched.sort_unstable();
                touched.dedup();
                for &u in &touched {
                    heap.push(Reverse((degree(u, &out_adj, &in_adj), u)));
                }
            }
        }
    }
    Ok(())
}

/// Builds the formula whose models are the compressed DAGs of the closure's
/// goal, projected on input facts by [`CnfInstance::db_of_model`].
/// Component id of every node.
fn strong_components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, edges.len());
    for _ in 0..n {
        g.add_node(());
    }
    g.extend_with_edges(edges.iter().map(|&(a, b)| (a as u32, b as u32)));
    let mut comp = vec![0; n];
    for (c, members) in tarjan_scc(&g).into_iter().enumerate() {
        for v in members {
            comp[v.index()] = c;
        }
    }
    comp
}

pub fn encode(dc: &DownwardClosure, opts: &EncodeOptions) -> Result<CnfInstance> {
    let g = &dc.graph;
    let n = g.node_count();

    // Canonical node order drives all numbering.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| g.node(a).canonical_cmp(g.node(b)));
    let mut rank = vec![0usize; n];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }

    let mut vars = VarMap {
        node_vars: vec![Var(0); n],
        hedge_vars: vec![Var(0); g.edge_count()],
        ..Default::default()
    };
    for &v in &order {
        vars.node_vars[v] = vars.push(VarKind::Node(v));
    }

    let mut hedges: Vec<usize> = (0..g.edge_count()).collect();
    let key = |e: usize| {
        let edge = g.edge(e);
        let mut body: Vec<usize> = edge.body.iter().map(|&b| rank[b]).collect();
        body.sort_unstable();
        (rank[edge.head], body)
    };
    hedges.sort_by_cached_key(|&e| key(e));
    for &e in &hedges {
        vars.hedge_vars[e] = vars.push(VarKind::Hedge(e));
    }

    let mut pairs: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .flat_map(|e| e.body.iter().map(move |&b| (e.head, b)))
        .collect();
    pairs.sort_by_key(|&(a, b)| (rank[a], rank[b]));
    pairs.dedup();
    for &(a, b) in &pairs {
        let z = vars.push(VarKind::Edge(a, b));
        vars.edge_vars.insert((a, b), z);
    }

    let body_total: usize = g.edges().iter().map(|e| e.body.len()).sum();
    assert!(vars.num_vars() as usize <= n + g.edge_count() + body_total);

    let mut cnf = Cnf::new(0);
    let mut out = Clauses {
        cnf: &mut cnf,
        cap: opts.max_clauses,
    };

    // Graph consistency.
    for &(a, b) in &pairs {
        let z = vars.edge_vars[&(a, b)];
        out.add(vec![z.neg(), vars.node_vars[a].pos()])?;
        out.add(vec![z.neg(), vars.node_vars[b].pos()])?;
    }

    // Rootedness.
    let goal = dc.goal_id();
    out.add(vec![vars.node_vars[goal].pos()])?;
    let mut incoming: Vec<Vec<Var>> = vec![Vec::new(); n];
    let mut outgoing: Vec<Vec<(usize, Var)>> = vec![Vec::new(); n];
    for &(a, b) in &pairs {
        let z = vars.edge_vars[&(a, b)];
        incoming[b].push(z);
        outgoing[a].push((b, z));
    }
    for z in &incoming[goal] {
        out.add(vec![z.neg()])?;
    }
    for &v in &order {
        if v == goal {
            continue;
        }
        let mut clause = vec![vars.node_vars[v].neg()];
        clause.extend(incoming[v].iter().map(|z| z.pos()));
        out.add(clause)?;
    }

    // Proof structure.
    for &v in &order {
        if g.is_extensional(v) {
            continue;
        }
        let mut own: Vec<usize> = g.edges_with_head(v).to_vec();
        own.sort_by_key(|&e| vars.hedge_vars[e]);
        let mut clause = vec![vars.node_vars[v].neg()];
        clause.extend(own.iter().map(|&e| vars.hedge_vars[e].pos()));
        out.add(clause)?;
    }
    for &e in &hedges {
        let edge = g.edge(e);
        let y = vars.hedge_vars[e];
        for &(b, z) in &outgoing[edge.head] {
            let lit = if edge.body.contains(&b) { z.pos() } else { z.neg() };
            out.add(vec![y.neg(), lit])?;
        }
    }

    // Acyclicity.
    // Only edges inside a strongly connected component can close a cycle.
    let comp = strong_components(n, &pairs);
    let edge_list: Vec<(usize, usize, Var)> = pairs
        .iter()
        .filter(|&&(a, b)| comp[a] == comp[b])
        .map(|&(a, b)| (a, b, vars.edge_vars[&(a, b)]))
        .collect();
    let base = vars.num_vars();
    {
        let mut new_var = |a: usize, b: usize| vars.push(VarKind::Aux(a, b));
        let mut emit = |c: Vec<Lit>| out.add(c);
        match opts.acyclicity {
            Acyclicity::TransitiveClosure => {
                let mut incident: Vec<usize> = edge_list.iter().flat_map(|&(a, b, _)| [a, b]).collect();
                incident.sort_by_key(|&v| rank[v]);
                incident.dedup();
                acyclicity_tc(&incident, &edge_list, &mut new_var, &mut emit)?;
            }
            Acyclicity::VertexElimination => {
                acyclicity_ve(&edge_list, None, &mut new_var, &mut emit)?;
            }
        }
    }
    if opts.acyclicity == Acyclicity::TransitiveClosure {
        assert!((vars.num_vars() - base) as usize <= n * n);
    }
    cnf.num_vars = vars.num_vars();

    let db_leaf_vars = order
        .iter()
        .filter(|&&v| g.is_extensional(v))
        .map(|&v| (vars.node_vars[v], g.node(v).clone()))
        .collect();

    Ok(CnfInstance {
        cnf,
        vars,
        closure: dc.clone(),
        db_leaf_vars,
        acyclicity: opts.acyclicity,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::closure::{build_gri, downward_closure};
    use crate::datalog::{parse_fact, Query};
    use crate::engine::{fixpoint, EngineOptions};
    use crate::prooftrees::{oracle_unwhy, validate_dag, OracleOptions};
    use crate::sat::{reference, SolveResult, Solver};
    use crate::symbol::Symbol;
    use crate::testing::*;

    fn f(s: &str) -> Fact {
        parse_fact(s).unwrap()
    }

    fn closure_of(p: &crate::datalog::Program, d: &crate::datalog::Database, goal: &str) -> DownwardClosure {
        let fix = fixpoint(p, d, &EngineOptions::default()).unwrap();
        downward_closure(&build_gri(d, &fix), &f(goal)).unwrap()
    }

    /// All projections `db(τ)` by blocking on the leaf variables.
    fn projections(inst: &CnfInstance) -> BTreeSet<Support> {
        let mut s = Solver::default();
        s.ensure_vars(inst.cnf.num_vars);
        for c in &inst.cnf.clauses {
            s.add_clause(c);
        }
        let mut out = BTreeSet::new();
        while s.solve().unwrap() == SolveResult::Sat {
            assert!(inst.cnf.is_satisfied_by(s.model()));
            let member = inst.db_of_model(s.model());
            let block: Vec<Lit> = inst
                .db_leaf_vars
                .iter()
                .map(|(v, _)| Lit::new(*v, s.model_value(*v)))
                .collect();
            assert!(out.insert(member));
            s.add_clause(&block);
        }
        out
    }

    #[test]
    fn example_5_1_matches_oracle() {
        let (p, d) = example_5_1();
        let dc = closure_of(&p, &d, "A(d)");
        let q = Query::new(p.clone(), "A").unwrap();
        let expected = oracle_unwhy(&q, &d, &[Symbol::intern("d")], &OracleOptions::default()).unwrap();
        for acyc in [Acyclicity::TransitiveClosure, Acyclicity::VertexElimination] {
            let inst = encode(&dc, &EncodeOptions::with(acyc)).unwrap();
            assert_eq!(projections(&inst), expected, "{acyc}");
        }
    }

    #[test]
    fn example_2_2_single_member() {
        let (p, d) = example_2_2();
        let dc = closure_of(&p, &d, "A(d)");
        for acyc in [Acyclicity::TransitiveClosure, Acyclicity::VertexElimination] {
            let inst = encode(&dc, &EncodeOptions::with(acyc)).unwrap();
            let got = projections(&inst);
            let expected: BTreeSet<Support> = [Support::new([f("S(a)"), f("T(a,a,d)")])].into();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn extensional_goal_has_one_model() {
        let (p, d) = example_2_2();
        let dc = closure_of(&p, &d, "S(a)");
        let inst = encode(&dc, &EncodeOptions::default()).unwrap();
        assert_eq!(inst.vars.num_vars(), 1);
        assert_eq!(reference::count_models(&inst.cnf), 1);
    }

    #[test]
    fn witnesses_are_compressed_dags() {
        let (p, d) = example_5_1();
        let dc = closure_of(&p, &d, "A(d)");
        let inst = encode(&dc, &EncodeOptions::default()).unwrap();
        let mut s = Solver::default();
        for c in &inst.cnf.clauses {
            s.add_clause(c);
        }
        s.ensure_vars(inst.cnf.num_vars);
        assert_eq!(s.solve().unwrap(), SolveResult::Sat);
        let dag = inst.witness(s.model());
        assert!(dag.is_compressed());
        assert!(validate_dag(&dag, &p, &d, &f("A(d)")));
        assert_eq!(dag.support(), inst.db_of_model(s.model()));
    }

    #[test]
    fn one_hyperedge_per_selected_node() {
        let (p, d) = example_5_1();
        let dc = closure_of(&p, &d, "A(d)");
        let inst = encode(&dc, &EncodeOptions::default()).unwrap();
        let c = dc.graph.node_id(&f("A(c)")).unwrap();
        let ys: Vec<Var> = dc.graph.edges_with_head(c).iter().map(|&e| inst.vars.hedge_var(e)).collect();
        assert_eq!(ys.len(), 2);
        let mut s = Solver::default();
        for cl in &inst.cnf.clauses {
            s.add_clause(cl);
        }
        assert_eq!(s.solve_with_assumptions(&[ys[0].pos(), ys[1].pos()]).unwrap(), SolveResult::Unsat);
    }

    fn tiny_graph_cnf(nodes: usize, edges: &[(usize, usize)], acyc: Acyclicity) -> Cnf {
        let mut cnf = Cnf::new(0);
        let zs: Vec<(usize, usize, Var)> = edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| (a, b, Var(i as u32 + 1)))
            .collect();
        let mut next = edges.len() as u32;
        let mut new_var = |_: usize, _: usize| {
            next += 1;
            Var(next)
        };
        let mut clauses = Vec::new();
        let mut emit = |c: Vec<Lit>| {
            clauses.push(c);
            Ok(())
        };
        match acyc {
            Acyclicity::TransitiveClosure => {
                let all: Vec<usize> = (0..nodes).collect();
                acyclicity_tc(&all, &zs, &mut new_var, &mut emit).unwrap()
            }
            Acyclicity::VertexElimination => acyclicity_ve(&zs, None, &mut new_var, &mut emit).unwrap(),
        }
        for c in clauses {
            cnf.add_clause(c);
        }
        cnf.num_vars = cnf.num_vars.max(edges.len() as u32);
        cnf
    }

    /// Projected on the edge variables, models are exactly the acyclic edge subsets.
    fn acyclic_subsets_agree(nodes: usize, edges: &[(usize, usize)]) {
        for acyc in [Acyclicity::TransitiveClosure, Acyclicity::VertexElimination] {
            let cnf = tiny_graph_cnf(nodes, edges, acyc);
            for mask in 0u32..(1 << edges.len()) {
                let mut s = Solver::default();
                s.ensure_vars(cnf.num_vars);
                for c in &cnf.clauses {
                    s.add_clause(c);
                }
                let assume: Vec<Lit> = (0..edges.len())
                    .map(|i| Lit::new(Var(i as u32 + 1), mask >> i & 1 == 0))
                    .collect();
                let sat = s.solve_with_assumptions(&assume).unwrap() == SolveResult::Sat;
                let chosen: Vec<(usize, usize)> = (0..edges.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| edges[i])
                    .collect();
                let dag = ProofDag::new(
                    (0..nodes).map(|i| Fact::new("N", [i.to_string().as_str()])).collect(),
                    (0..nodes)
                        .map(|v| chosen.iter().filter(|e| e.0 == v).map(|e| e.1).collect())
                        .collect(),
                    0,
                );
                assert_eq!(sat, dag.is_acyclic(), "{acyc} {chosen:?}");
            }
        }
    }

    #[test]
    fn two_cycle() {
        acyclic_subsets_agree(2, &[(0, 1), (1, 0)]);
    }

    #[test]
    fn three_cycle_with_chords() {
        acyclic_subsets_agree(3, &[(0, 1), (1, 2), (2, 0), (0, 2), (1, 1)]);
    }

    #[test]
    fn dense_four_nodes() {
        let edges: Vec<(usize, usize)> = (0..4)
            .flat_map(|a| (0..4).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        acyclic_subsets_agree(4, &edges[..10]);
    }

    #[test]
    fn empty_graph_has_no_constraints() {
        for acyc in [Acyclicity::TransitiveClosure, Acyclicity::VertexElimination] {
            let cnf = tiny_graph_cnf(2, &[], acyc);
            assert!(reference::solve(&cnf).is_some());
        }
        let tc = tiny_graph_cnf(2, &[], Acyclicity::TransitiveClosure);
        assert!(tc.clauses.iter().all(|c| c.len() == 1 && c[0].is_negated()));
    }

    #[test]
    fn explicit_elimination_order() {
        let edges = [(0usize, 1usize, Var(1)), (1, 2, Var(2)), (2, 0, Var(3))];
        for order in [[0usize, 1, 2], [2, 1, 0], [1, 0, 2]] {
            let mut cnf = Cnf::new(3);
            let mut next = 3;
            let mut new_var = |_: usize, _: usize| {
                next += 1;
                Var(next)
            };
            let mut clauses = Vec::new();
            acyclicity_ve(&edges, Some(&order), &mut new_var, &mut |c| {
                clauses.push(c);
                Ok(())
            })
            .unwrap();
            for c in clauses {
                cnf.add_clause(c);
            }
            for z in 1..=3 {
                cnf.add_clause([Lit::from_dimacs(z)]);
            }
            assert!(reference::solve(&cnf).is_none());
        }
    }

    #[test]
    fn deterministic_output() {
        let (p, d) = example_5_1();
        let a = encode(&closure_of(&p, &d, "A(d)"), &EncodeOptions::default()).unwrap();
        let b = encode(&closure_of(&p, &d, "A(d)"), &EncodeOptions::default()).unwrap();
        assert_eq!(a.to_dimacs(), b.to_dimacs());
        assert_eq!(a.var_map_text(), b.var_map_text());
    }

    #[test]
    fn numbering_and_sidecar() {
        let (p, d) = example_5_1();
        let inst = encode(&closure_of(&p, &d, "A(d)"), &EncodeOptions::default()).unwrap();
        let text = inst.var_map_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), inst.cnf.num_vars as usize);
        // Nodes first, in canonical order.
        assert_eq!(lines[0], "var 1 node A(a)");
        assert_eq!(lines[8], "var 9 node T(c,c,d)");
        assert!(lines[9].starts_with("var 10 hedge A(a) <- S(a)"));
        let kinds: Vec<&str> = lines.iter().map(|l| l.split(' ').nth(2).unwrap()).collect();
        let first = |k: &str| kinds.iter().position(|x| *x == k).unwrap();
        assert!(first("node") < first("hedge") && first("hedge") < first("edge"));
        // The closure has no cycles, so nothing needs ordering.
        assert_eq!(inst.vars.aux_count(), 0);
        assert_eq!(inst.vars.node_count(), 9);
        assert_eq!(inst.vars.hedge_count(), 5);
        assert_eq!(inst.db_leaf_vars.len(), 5);
    }

    #[test]
    fn clause_cap() {
        let (p, d) = example_5_1();
        let opts = EncodeOptions {
            max_clauses: 10,
            ..Default::default()
        };
        assert!(matches!(
            encode(&closure_of(&p, &d, "A(d)"), &opts),
            Err(Error::EncodingTooLarge { .. })
        ));
    }
}
