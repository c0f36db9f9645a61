//! Aggregations (connected vertex partitions), the pairwise matching
//! coarsener, multilevel matching hierarchies, and hierarchy-guided
//! aggregate splitting (un-matching).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error("labels must cover 0..n_c without gaps (found label {label}, n_c {n_c})")]
    InvalidLabels { label: usize, n_c: usize },
    #[error("labels length {got} does not match vertex count {expected}")]
    LabelLength { got: usize, expected: usize },
    #[error("aggregate {aggregate} is disconnected ({components} components)")]
    DisconnectedAggregate { aggregate: usize, components: usize },
    #[error("hierarchy level {level} out of range (depth {depth})")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("aggregate {aggregate} is not a group of the matching hierarchy")]
    NotAHierarchyGroup { aggregate: usize },
}

/// An interface between two aggregates: the edges joining them.
#[derive(Debug, Clone)]
pub struct Interface {
    /// `(a, b)` with `a < b`.
    pub pair: (usize, usize),
    /// Edge ids crossing between the two aggregates, ascending.
    pub edges: Vec<usize>,
}

/// A partition of the vertex set into connected aggregates, with the derived
/// interior-edge and interface-edge structure.
#[derive(Debug, Clone)]
pub struct Aggregation {
    labels: Vec<usize>,
    aggregates: Vec<Vec<usize>>,
    interior_edges: Vec<Vec<usize>>,
    interfaces: Vec<Interface>,
    interface_index: BTreeMap<(usize, usize), usize>,
}

impl Aggregation {
    /// Classifies every edge of `g` as interior or interface for the given
    /// vertex labels and checks that each aggregate is connected.
    pub fn from_labels(g: &Graph, labels: Vec<usize>) -> Result<Self, AggregationError> {
        if labels.len() != g.n_vertices() {
            return Err(AggregationError::LabelLength { got: labels.len(), expected: g.n_vertices() });
        }
        let n_c = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut aggregates = vec![Vec::new(); n_c];
        for (v, &a) in labels.iter().enumerate() {
            aggregates[a].push(v);
        }
        if let Some(a) = aggregates.iter().position(|list| list.is_empty()) {
            return Err(AggregationError::InvalidLabels { label: a, n_c });
        }

        let mut interior_edges = vec![Vec::new(); n_c];
        let mut interface_index = BTreeMap::new();
        let mut interfaces: Vec<Interface> = Vec::new();
        for (eid, e) in g.edges().iter().enumerate() {
            let (la, lb) = (labels[e.head], labels[e.tail]);
            if la == lb {
                interior_edges[la].push(eid);
            } else {
                let key = (la.min(lb), la.max(lb));
                let idx = *interface_index.entry(key).or_insert_with(|| {
                    interfaces.push(Interface { pair: key, edges: Vec::new() });
                    interfaces.len() - 1
                });
                interfaces[idx].edges.push(eid);
            }
        }
        // Deterministic interface order: sorted by aggregate pair.
        let mut order: Vec<usize> = (0..interfaces.len()).collect();
        order.sort_by_key(|&i| interfaces[i].pair);
        let interfaces: Vec<Interface> = order.into_iter().map(|i| interfaces[i].clone()).collect();
        let interface_index =
            interfaces.iter().enumerate().map(|(i, f)| (f.pair, i)).collect::<BTreeMap<_, _>>();

        for (a, members) in aggregates.iter().enumerate() {
            let (components, _) = g.connected_components(members);
            if components != 1 {
                return Err(AggregationError::DisconnectedAggregate { aggregate: a, components });
            }
        }
        Ok(Aggregation { labels, aggregates, interior_edges, interfaces, interface_index })
    }

    /// Every vertex its own aggregate.
    pub fn singletons(g: &Graph) -> Self {
        Aggregation::from_labels(g, (0..g.n_vertices()).collect()).unwrap()
    }

    pub fn n_c(&self) -> usize {
        self.aggregates.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_of(&self, vertex: usize) -> usize {
        self.labels[vertex]
    }

    /// Vertices of aggregate `a`, ascending.
    pub fn aggregate(&self, a: usize) -> &[usize] {
        &self.aggregates[a]
    }

    pub fn aggregate_size(&self, a: usize) -> usize {
        self.aggregates[a].len()
    }

    /// Interior edge ids of aggregate `a`.
    pub fn interior_edges(&self, a: usize) -> &[usize] {
        &self.interior_edges[a]
    }

    /// All interfaces, sorted by aggregate pair.
    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn interface_between(&self, a: usize, b: usize) -> Option<&Interface> {
        let key = (a.min(b), a.max(b));
        self.interface_index.get(&key).map(|&i| &self.interfaces[i])
    }

    /// Interface indices touching aggregate `a`.
    pub fn interfaces_of(&self, a: usize) -> Vec<usize> {
        self.interfaces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.pair.0 == a || f.pair.1 == a)
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks the partition / connectivity / edge-classification invariants.
    pub fn validate(&self, g: &Graph) {
        assert_eq!(self.labels.len(), g.n_vertices());
        let mut seen = vec![false; g.n_vertices()];
        for (a, members) in self.aggregates.iter().enumerate() {
            assert!(!members.is_empty(), "empty aggregate {a}");
            for &v in members {
                assert_eq!(self.labels[v], a);
                assert!(!seen[v], "vertex {v} in two aggregates");
                seen[v] = true;
            }
            let (components, _) = g.connected_components(members);
            assert_eq!(components, 1, "aggregate {a} disconnected");
        }
        assert!(seen.into_iter().all(|s| s), "labels do not cover all vertices");
        let mut edge_seen = vec![false; g.n_edges()];
        for list in &self.interior_edges {
            for &e in list {
                assert!(!edge_seen[e]);
                edge_seen[e] = true;
            }
        }
        for f in &self.interfaces {
            assert!(!f.edges.is_empty(), "empty interface {:?}", f.pair);
            for &e in &f.edges {
                assert!(!edge_seen[e]);
                edge_seen[e] = true;
            }
        }
        assert!(edge_seen.into_iter().all(|s| s), "edge neither interior nor interface");
    }
}

/// Quotient graph of an aggregation: one vertex per aggregate, one edge per
/// interface with the summed interface edge weights.
pub fn quotient_graph(g: &Graph, agg: &Aggregation) -> Graph {
    let edges: Vec<(usize, usize, f64)> = agg
        .interfaces()
        .iter()
        .map(|f| {
            let w: f64 = f.edges.iter().map(|&e| g.edge(e).weight).sum();
            (f.pair.0, f.pair.1, w)
        })
        .collect();
    Graph::build(agg.n_c(), &edges).expect("quotient of a valid aggregation")
}

/// One pairwise matching pass over the quotient graph of `current`.
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    /// Maps each aggregate of the input to its group in the output.
    pub grouping: Vec<usize>,
    pub coarse: Aggregation,
    /// False when the quotient graph had no edges (nothing to match).
    pub moved: bool,
    /// Groups that absorbed isolated vertices (size 3+).
    pub fallback_groups: usize,
}

/// Pairwise matching on the quotient graph: repeatedly select the unmatched
/// quotient vertex of minimal degree (degree counts its unmatched
/// neighbors; ties by smallest id) and pair it with the unmatched neighbor
/// of largest total connecting weight (ties by smallest id). Leftover
/// isolated vertices join the neighboring group sharing the largest total
/// edge weight.
pub fn match_once(g: &Graph, current: &Aggregation) -> MatchOutcome {
    let n = current.n_c();
    // Quotient adjacency with aggregated weights, derived from interfaces.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for f in current.interfaces() {
        let w: f64 = f.edges.iter().map(|&e| g.edge(e).weight).sum();
        adj[f.pair.0].push((f.pair.1, w));
        adj[f.pair.1].push((f.pair.0, w));
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0));
    }
    if current.interfaces().is_empty() {
        return MatchOutcome {
            grouping: (0..n).collect(),
            coarse: current.clone(),
            moved: false,
            fallback_groups: 0,
        };
    }

    let mut matched = vec![false; n];
    let mut group_of = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut active: BTreeSet<(usize, usize)> = (0..n).map(|q| (degree[q], q)).collect();

    // Step 1: pair off while any unmatched vertex still has an unmatched
    // neighbor (degree >= 1 entries in the active set).
    while let Some(&(deg, u)) = active.range((1, 0)..).next() {
        debug_assert!(deg >= 1 && !matched[u]);
        active.remove(&(deg, u));
        let partner = adj[u]
            .iter()
            .filter(|&&(v, _)| !matched[v])
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|&(v, _)| v)
            .expect("degree >= 1 implies an unmatched neighbor");
        active.remove(&(degree[partner], partner));
        matched[u] = true;
        matched[partner] = true;
        let gid = groups.len();
        group_of[u] = gid;
        group_of[partner] = gid;
        groups.push(vec![u, partner]);
        for &q in &[u, partner] {
            for &(w, _) in &adj[q] {
                if !matched[w] {
                    active.remove(&(degree[w], w));
                    degree[w] -= 1;
                    active.insert((degree[w], w));
                }
            }
        }
    }

    // Step 2: isolated leftovers join the neighboring group with the most
    // connections (largest total weight, ties to the earliest group).
    let mut fallback_groups = BTreeSet::new();
    for (_, q) in active {
        debug_assert!(!matched[q]);
        let mut weight_to: BTreeMap<usize, f64> = BTreeMap::new();
        for &(w, wt) in &adj[q] {
            if group_of[w] != usize::MAX {
                *weight_to.entry(group_of[w]).or_insert(0.0) += wt;
            }
        }
        let best = weight_to
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(a.0)))
            .map(|(&gid, _)| gid);
        match best {
            Some(gid) => {
                group_of[q] = gid;
                groups[gid].push(q);
                fallback_groups.insert(gid);
            }
            None => {
                // No neighbors at all: stays a singleton group.
                let gid = groups.len();
                group_of[q] = gid;
                groups.push(vec![q]);
            }
        }
    }

    let new_labels: Vec<usize> = current.labels().iter().map(|&a| group_of[a]).collect();
    let coarse = Aggregation::from_labels(g, new_labels)
        .expect("matching groups adjacent aggregates, so groups stay connected");
    MatchOutcome { grouping: group_of, coarse, moved: true, fallback_groups: fallback_groups.len() }
}

#[derive(Debug, Clone)]
struct Level {
    /// Fine aggregate id (level k-1) -> coarse group id (level k).
    group_of: Vec<usize>,
    /// Coarse group id -> fine aggregate ids, ascending.
    children: Vec<Vec<usize>>,
    summary: LevelSummary,
}

/// Per-level bookkeeping of the coarse quotient graph.
#[derive(Debug, Clone, Copy)]
pub struct LevelSummary {
    pub n_aggregates: usize,
    pub quotient_edges: usize,
    pub fallback_groups: usize,
}

/// A stack of pairwise matchings: enables both coarsening (composition) and
/// exact un-matching (splitting).
#[derive(Debug, Clone)]
pub struct MatchHierarchy {
    levels: Vec<Level>,
    /// `composed[k][v]` = aggregate id of vertex `v` at level `k`
    /// (`composed[0]` is the identity).
    composed: Vec<Vec<usize>>,
    /// `sizes[k][a]` = vertex count of aggregate `a` at level `k`.
    sizes: Vec<Vec<usize>>,
    requested_depth: usize,
}

impl MatchHierarchy {
    /// `k` successive matching passes starting from singletons. Stops early
    /// when a quotient graph has no edges; [`MatchHierarchy::depth`] reports
    /// the levels actually built.
    pub fn build(g: &Graph, k: usize) -> Self {
        let n = g.n_vertices();
        let mut levels = Vec::new();
        let mut composed = vec![(0..n).collect::<Vec<usize>>()];
        let mut sizes = vec![vec![1; n]];
        let mut current = Aggregation::singletons(g);
        for _ in 0..k {
            let outcome = match_once(g, &current);
            if !outcome.moved {
                break;
            }
            let n_fine = current.n_c();
            let n_coarse = outcome.coarse.n_c();
            let mut children = vec![Vec::new(); n_coarse];
            for (fine, &coarse) in outcome.grouping.iter().enumerate() {
                children[coarse].push(fine);
            }
            let last = composed.last().unwrap();
            let next: Vec<usize> = last.iter().map(|&a| outcome.grouping[a]).collect();
            let mut level_sizes = vec![0usize; n_coarse];
            for &a in &next {
                level_sizes[a] += 1;
            }
            levels.push(Level {
                group_of: outcome.grouping.clone(),
                children,
                summary: LevelSummary {
                    n_aggregates: n_coarse,
                    quotient_edges: outcome.coarse.interfaces().len(),
                    fallback_groups: outcome.fallback_groups,
                },
            });
            composed.push(next);
            sizes.push(level_sizes);
            current = outcome.coarse;
            debug_assert!(n_coarse < n_fine);
        }
        MatchHierarchy { levels, composed, sizes, requested_depth: k }
    }

    /// Number of matching levels actually built.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn requested_depth(&self) -> usize {
        self.requested_depth
    }

    pub fn summary(&self, level: usize) -> &LevelSummary {
        &self.levels[level - 1].summary
    }

    /// Grouping map of matching step `level` (1-based): aggregate ids at
    /// `level - 1` to group ids at `level`.
    pub fn grouping(&self, level: usize) -> &[usize] {
        &self.levels[level - 1].group_of
    }

    /// Vertex labels at `level` (0 = singletons).
    pub fn labels_at(&self, level: usize) -> Result<&[usize], AggregationError> {
        self.composed
            .get(level)
            .map(|v| v.as_slice())
            .ok_or(AggregationError::LevelOutOfRange { level, depth: self.depth() })
    }

    /// The aggregation obtained by composing matching levels `1..=level`.
    pub fn aggregation_at(&self, g: &Graph, level: usize) -> Result<Aggregation, AggregationError> {
        let labels = self.labels_at(level)?.to_vec();
        Ok(Aggregation::from_labels(g, labels).expect("hierarchy levels are valid aggregations"))
    }

    /// Finds the hierarchy node equal to the given vertex set, preferring
    /// the most refined representation. Returns `(level, id-at-level)`.
    fn find_node(&self, members: &[usize]) -> Option<(usize, usize)> {
        let v0 = members[0];
        for level in 0..self.composed.len() {
            let id = self.composed[level][v0];
            if self.sizes[level][id] != members.len() {
                continue;
            }
            if members.iter().all(|&v| self.composed[level][v] == id) {
                return Some((level, id));
            }
        }
        None
    }

    /// The vertex sets this node was merged from, one level below its
    /// creation level. Leaves (`level == 0`) return `None`.
    fn children_vertex_sets(&self, level: usize, id: usize, members: &[usize]) -> Option<Vec<Vec<usize>>> {
        if level == 0 {
            return None;
        }
        let child_ids = &self.levels[level - 1].children[id];
        debug_assert!(child_ids.len() >= 2, "find_node returns the most refined node");
        let mut sets: BTreeMap<usize, Vec<usize>> = child_ids.iter().map(|&c| (c, Vec::new())).collect();
        for &v in members {
            sets.get_mut(&self.composed[level - 1][v]).unwrap().push(v);
        }
        Some(sets.into_values().collect())
    }
}

/// Result of a split: `changed` is false when the aggregate was a
/// hierarchy leaf (singleton) and nothing could be split.
#[derive(Debug)]
pub struct SplitOutcome {
    pub aggregation: Aggregation,
    pub changed: bool,
}

/// Replaces `agg_id` by the sub-aggregates it was merged from one level
/// below in the hierarchy. Fallback groups split into the pair members and
/// each absorbed vertex separately, so splitting every aggregate of level
/// `k` reproduces level `k-1` exactly.
pub fn split_aggregate(
    g: &Graph,
    current: &Aggregation,
    agg_id: usize,
    hierarchy: &MatchHierarchy,
) -> Result<SplitOutcome, AggregationError> {
    split_many(g, current, &[agg_id], hierarchy)
}

/// Splits several aggregates at once (single relabel + rebuild).
pub fn split_many(
    g: &Graph,
    current: &Aggregation,
    agg_ids: &[usize],
    hierarchy: &MatchHierarchy,
) -> Result<SplitOutcome, AggregationError> {
    let mut labels = current.labels().to_vec();
    let mut next_label = current.n_c();
    let mut changed = false;
    for &agg_id in agg_ids {
        let members = current.aggregate(agg_id);
        let (level, id) = hierarchy
            .find_node(members)
            .ok_or(AggregationError::NotAHierarchyGroup { aggregate: agg_id })?;
        let Some(children) = hierarchy.children_vertex_sets(level, id, members) else {
            continue; // leaf: no-op
        };
        for (i, child) in children.iter().enumerate() {
            let label = if i == 0 {
                agg_id
            } else {
                let l = next_label;
                next_label += 1;
                l
            };
            for &v in child {
                labels[v] = label;
            }
        }
        changed = true;
    }
    if !changed {
        return Ok(SplitOutcome { aggregation: current.clone(), changed: false });
    }
    let aggregation = Aggregation::from_labels(g, labels)
        .expect("children of hierarchy groups are connected");
    Ok(SplitOutcome { aggregation, changed: true })
}
