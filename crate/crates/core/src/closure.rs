//! Transitive closure of CONTAINS graphs and containment-cycle detection.
//!
//! Closure works on the strongly connected component condensation of the
//! graph: reachability is computed once per component in the reverse
//! topological order Tarjan's algorithm emits them in, then expanded back
//! to member nodes. For an acyclic graph every component is a singleton and
//! this is plain transitive closure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ContainerRelation, Document};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClosureError {
    #[error("self-containment edge on `{0}`")]
    SelfLoop(String),
    #[error("edge endpoint `{0}` is not a graph node")]
    UnknownNode(String),
    #[error("CONTAINS graph is inconsistent: {0}")]
    Inconsistent(ConsistencyResult),
}

/// Directed CONTAINS graph over entity ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationGraph {
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

impl RelationGraph {
    pub fn new<N, E, S>(nodes: N, edges: E) -> Result<Self, ClosureError>
    where
        N: IntoIterator<Item = S>,
        E: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let nodes: BTreeSet<String> = nodes.into_iter().map(Into::into).collect();
        let mut graph = RelationGraph {
            nodes,
            edges: BTreeSet::new(),
        };
        for (a, b) in edges {
            let (a, b) = (a.into(), b.into());
            for end in [&a, &b] {
                if !graph.nodes.contains(end) {
                    return Err(ClosureError::UnknownNode(end.clone()));
                }
            }
            if a == b {
                return Err(ClosureError::SelfLoop(a));
            }
            graph.edges.insert((a, b));
        }
        Ok(graph)
    }

    /// Graph whose nodes are exactly the edge endpoints.
    pub fn from_edges<E, S>(edges: E) -> Result<Self, ClosureError>
    where
        E: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let edges: Vec<(String, String)> = edges
            .into_iter()
            .map(|(a, b)| (a.into(), b.into()))
            .collect();
        let nodes: Vec<String> = edges
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        Self::new(nodes, edges)
    }

    /// Nodes are all entity ids of the document; edges its relations.
    pub fn from_document(doc: &Document) -> Result<Self, ClosureError> {
        let nodes = doc
            .timexes
            .iter()
            .map(|t| t.id.as_str())
            .chain(doc.events.iter().map(|e| e.id.as_str()));
        let edges = doc
            .relations
            .iter()
            .map(|r| (r.source.as_str(), r.target.as_str()));
        Self::new(nodes, edges)
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn contains_edge(&self, source: &str, target: &str) -> bool {
        self.edges
            .contains(&(source.to_string(), target.to_string()))
    }

    pub fn relations(&self) -> Vec<ContainerRelation> {
        self.edges
            .iter()
            .map(|(a, b)| ContainerRelation::new(a.as_str(), b.as_str()))
            .collect()
    }

    fn indexed(&self) -> Indexed<'_> {
        let names: Vec<&str> = self.nodes.iter().map(String::as_str).collect();
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut succ = vec![Vec::new(); names.len()];
        for (a, b) in &self.edges {
            succ[index[a.as_str()]].push(index[b.as_str()]);
        }
        Indexed { names, succ }
    }
}

struct Indexed<'a> {
    names: Vec<&'a str>,
    /// Successor lists, sorted because edges iterate in order.
    succ: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyResult {
    pub consistent: bool,
    /// A CONTAINS cycle `[a, b, ..., z]` with edges a→b, ..., z→a.
    pub witness_cycle: Option<Vec<String>>,
}

impl fmt::Display for ConsistencyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.witness_cycle {
            None => f.write_str("consistent"),
            Some(cycle) => {
                write!(f, "cycle {}", cycle.join(" -> "))?;
                if let Some(first) = cycle.first() {
                    write!(f, " -> {first}")?;
                }
                Ok(())
            }
        }
    }
}

/// Finds a directed cycle if one exists. Search order is deterministic
/// (nodes and successors in id order).
pub fn check_consistency(graph: &RelationGraph) -> ConsistencyResult {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }

    let g = graph.indexed();
    let mut mark = vec![Mark::New; g.names.len()];
    // (node, next successor position)
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for root in 0..g.names.len() {
        if mark[root] != Mark::New {
            continue;
        }
        mark[root] = Mark::Active;
        stack.push((root, 0));
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&child) = g.succ[node].get(*next) {
                *next += 1;
                match mark[child] {
                    Mark::New => {
                        mark[child] = Mark::Active;
                        stack.push((child, 0));
                    }
                    Mark::Active => {
                        let start = stack.iter().position(|&(n, _)| n == child).unwrap();
                        let cycle = stack[start..]
                            .iter()
                            .map(|&(n, _)| g.names[n].to_string())
                            .collect();
                        return ConsistencyResult {
                            consistent: false,
                            witness_cycle: Some(cycle),
                        };
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }

    ConsistencyResult {
        consistent: true,
        witness_cycle: None,
    }
}

/// Smallest transitively closed superset of the graph's edges.
/// Fails on a containment cycle, carrying the witness.
pub fn close_contains(graph: &RelationGraph) -> Result<RelationGraph, ClosureError> {
    let consistency = check_consistency(graph);
    if !consistency.consistent {
        return Err(ClosureError::Inconsistent(consistency));
    }
    Ok(reachability(graph))
}

/// Closure that tolerates cycles: every pair `(a, b)` with `a != b` and `b`
/// reachable from `a` is emitted, self-containments never are. Returns the
/// cycle witness alongside when the input was inconsistent.
pub fn close_contains_repairing(graph: &RelationGraph) -> (RelationGraph, Option<ConsistencyResult>) {
    let consistency = check_consistency(graph);
    let warning = (!consistency.consistent).then_some(consistency);
    (reachability(graph), warning)
}

fn reachability(graph: &RelationGraph) -> RelationGraph {
    let g = graph.indexed();
    let components = tarjan(&g.succ);

    let mut component_of = vec![0usize; g.names.len()];
    for (c, members) in components.iter().enumerate() {
        for &n in members {
            component_of[n] = c;
        }
    }

    // Components come out successors-first, so each one's reach can be
    // assembled from already finished ones.
    let words = components.len().div_ceil(64);
    let mut reach: Vec<Vec<u64>> = Vec::with_capacity(components.len());
    for (c, members) in components.iter().enumerate() {
        let mut bits = vec![0u64; words];
        for &n in members {
            for &s in &g.succ[n] {
                let d = component_of[s];
                if d != c {
                    bits[d / 64] |= 1 << (d % 64);
                    for (w, r) in bits.iter_mut().zip(&reach[d]) {
                        *w |= r;
                    }
                }
            }
        }
        reach.push(bits);
    }

    let mut edges = BTreeSet::new();
    for (c, members) in components.iter().enumerate() {
        let mut targets: Vec<usize> = Vec::new();
        if members.len() > 1 {
            targets.extend(members);
        }
        for d in 0..components.len() {
            if reach[c][d / 64] >> (d % 64) & 1 == 1 {
                targets.extend(&components[d]);
            }
        }
        for &a in members {
            for &b in &targets {
                if a != b {
                    edges.insert((g.names[a].to_string(), g.names[b].to_string()));
                }
            }
        }
    }

    RelationGraph {
        nodes: graph.nodes.clone(),
        edges,
    }
}

/// Iterative Tarjan. Components are returned in reverse topological order
/// of the condensation (every component after all components it reaches).
fn tarjan(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = succ.len();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut counter = 0;
    let mut components = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        while let Some(&(v, i)) = call.last() {
            if i == 0 && index[v] == UNVISITED {
                index[v] = counter;
                lowlink[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = succ[v].get(i) {
                call.last_mut().unwrap().1 += 1;
                if index[w] == UNVISITED {
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort_unstable();
                components.push(component);
            }
        }
    }
    components
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Repeatedly add every one-step composition until nothing changes.
    pub(crate) fn fixpoint_oracle(edges: &BTreeSet<(String, String)>) -> BTreeSet<(String, String)> {
        let mut closed = edges.clone();
        loop {
            let mut added = Vec::new();
            for (a, b) in &closed {
                for (c, d) in &closed {
                    if b == c && a != d && !closed.contains(&(a.clone(), d.clone())) {
                        added.push((a.clone(), d.clone()));
                    }
                }
            }
            if added.is_empty() {
                return closed;
            }
            closed.extend(added);
        }
    }

    fn graph(edges: &[(&str, &str)]) -> RelationGraph {
        RelationGraph::from_edges(edges.iter().copied()).unwrap()
    }

    #[test]
    fn one_transitive_step() {
        let closed = close_contains(&graph(&[("A", "B"), ("B", "C")])).unwrap();
        assert_eq!(closed, graph(&[("A", "B"), ("B", "C"), ("A", "C")]));
    }

    #[test]
    fn empty_graph() {
        let g = RelationGraph::new(["A", "B"], Vec::<(&str, &str)>::new()).unwrap();
        assert!(close_contains(&g).unwrap().edges().is_empty());
        assert!(close_contains(&RelationGraph::default()).unwrap().edges().is_empty());
    }

    #[test]
    fn chain_of_six() {
        let names: Vec<String> = (1..=6).map(|i| format!("A{i}")).collect();
        let edges: Vec<(String, String)> = names.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        let g = RelationGraph::from_edges(edges).unwrap();
        let oracle = fixpoint_oracle(g.edges());
        assert_eq!(oracle.len(), 15);
        assert_eq!(close_contains(&g).unwrap().edges(), &oracle);
    }

    #[test]
    fn two_cycle_witness() {
        let result = check_consistency(&graph(&[("A", "B"), ("B", "A")]));
        assert!(!result.consistent);
        assert_eq!(result.witness_cycle, Some(vec!["A".to_string(), "B".to_string()]));
        assert_eq!(result.to_string(), "cycle A -> B -> A");
    }

    #[test]
    fn three_cycle_witness_edges_exist() {
        let g = graph(&[("A", "B"), ("B", "C"), ("C", "A")]);
        let result = check_consistency(&g);
        let cycle = result.witness_cycle.unwrap();
        assert_eq!(cycle.len(), 3);
        for i in 0..cycle.len() {
            assert!(g.contains_edge(&cycle[i], &cycle[(i + 1) % cycle.len()]));
        }
        assert!(matches!(close_contains(&g), Err(ClosureError::Inconsistent(_))));
    }

    #[test]
    fn forest_of_hundred_is_consistent() {
        let edges: Vec<(String, String)> = (1..100).map(|i| (format!("n{}", (i - 1) / 3), format!("n{i}"))).collect();
        let g = RelationGraph::from_edges(edges).unwrap();
        assert_eq!(g.nodes().len(), 100);
        assert!(check_consistency(&g).consistent);
    }

    #[test]
    fn rejects_malformed_graphs() {
        assert_eq!(
            RelationGraph::from_edges([("A", "A")]),
            Err(ClosureError::SelfLoop("A".into()))
        );
        assert_eq!(
            RelationGraph::new(["A"], [("A", "B")]),
            Err(ClosureError::UnknownNode("B".into()))
        );
    }

    #[test]
    fn repairing_closure_on_cycle() {
        let g = graph(&[("A", "B"), ("B", "A"), ("B", "C"), ("D", "A")]);
        let (closed, warning) = close_contains_repairing(&g);
        assert!(warning.is_some());
        let expected = graph(&[
            ("A", "B"),
            ("B", "A"),
            ("A", "C"),
            ("B", "C"),
            ("D", "A"),
            ("D", "B"),
            ("D", "C"),
        ]);
        assert_eq!(closed, expected);
        assert_eq!(closed.edges(), &fixpoint_oracle(g.edges()));
    }

    fn arb_dag() -> impl Strategy<Value = RelationGraph> {
        (1usize..=12).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..30).prop_map(move |pairs| {
                let nodes: Vec<String> = (0..n).map(|i| format!("x{i:02}")).collect();
                let edges: Vec<(String, String)> = pairs
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (nodes[a.min(b)].clone(), nodes[a.max(b)].clone()))
                    .collect();
                RelationGraph::new(nodes.clone(), edges).unwrap()
            })
        })
    }

    fn arb_graph() -> impl Strategy<Value = RelationGraph> {
        (1usize..=8).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..20).prop_map(move |pairs| {
                let nodes: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
                let edges: Vec<(String, String)> = pairs
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (nodes[a].clone(), nodes[b].clone()))
                    .collect();
                RelationGraph::new(nodes.clone(), edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn matches_oracle_and_is_idempotent(g in arb_dag()) {
            let closed = close_contains(&g).unwrap();
            prop_assert_eq!(closed.edges(), &fixpoint_oracle(g.edges()));
            prop_assert!(g.edges().is_subset(closed.edges()));
            prop_assert_eq!(close_contains(&closed).unwrap(), closed);
        }

        #[test]
        fn monotone(g in arb_dag(), keep in proptest::collection::vec(any::<bool>(), 30)) {
            let sub_edges: Vec<(String, String)> = g.edges().iter().zip(keep.iter().cycle())
                .filter(|(_, &k)| k).map(|(e, _)| e.clone()).collect();
            let sub = RelationGraph::new(g.nodes().clone(), sub_edges).unwrap();
            let small = close_contains(&sub).unwrap();
            let large = close_contains(&g).unwrap();
            prop_assert!(small.edges().is_subset(large.edges()));
        }

        #[test]
        fn consistency_iff_no_self_reachability(g in arb_graph()) {
            let result = check_consistency(&g);
            let mut reach = g.edges().clone();
            // oracle including self pairs
            loop {
                let mut added = Vec::new();
                for (a, b) in &reach {
                    for (c, d) in &reach {
                        if b == c && !reach.contains(&(a.clone(), d.clone())) {
                            added.push((a.clone(), d.clone()));
                        }
                    }
                }
                if added.is_empty() { break; }
                reach.extend(added);
            }
            let self_reach = reach.iter().any(|(a, b)| a == b);
            prop_assert_eq!(result.consistent, !self_reach);
            if let Some(cycle) = &result.witness_cycle {
                prop_assert!(cycle.len() >= 2);
                for i in 0..cycle.len() {
                    prop_assert!(g.contains_edge(&cycle[i], &cycle[(i + 1) % cycle.len()]));
                }
            }
            let (repaired, warning) = close_contains_repairing(&g);
            prop_assert_eq!(warning.is_none(), result.consistent);
            let expected: BTreeSet<_> = reach.into_iter().filter(|(a, b)| a != b).collect();
            prop_assert_eq!(repaired.edges(), &expected);
        }
    }
}
