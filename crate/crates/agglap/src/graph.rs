//! Weighted undirected graphs with a fixed edge orientation, the discrete
//! gradient `G`, its adjoint divergence `G*`, the edge weight operator `D`,
//! and the graph Laplacian `A = G* D G`.
//!
//! Vertex vectors are `Vec<f64>` of length [`Graph::n_vertices`], edge
//! vectors are `Vec<f64>` of length [`Graph::n_edges`]. Size mismatches are
//! programming errors and panic.

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({i}, {j}) is a self-loop")]
    SelfLoop { i: usize, j: usize },
    #[error("duplicate undirected edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("edge ({i}, {j}) has non-positive weight {weight}")]
    NonPositiveWeight { i: usize, j: usize, weight: f64 },
    #[error("edge ({i}, {j}) references a vertex out of range (n_vertices = {n})")]
    VertexOutOfRange { i: usize, j: usize, n: usize },
    #[error("vertex {vertex} is unreachable from root {root} within the subset")]
    UnreachableVertex { vertex: usize, root: usize },
    #[error("root {root} is not a member of the vertex subset")]
    RootOutsideSubset { root: usize },
    #[error("vertex subset is empty")]
    EmptySubset,
}

/// A single stored edge. `head`/`tail` fix the orientation used by the
/// gradient: `(Gv)_e = v[head] - v[tail]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub head: usize,
    pub tail: usize,
    pub weight: f64,
}

impl Edge {
    /// The endpoint opposite to `v`.
    pub fn other(&self, v: usize) -> usize {
        if v == self.head {
            self.tail
        } else {
            self.head
        }
    }
}

/// Immutable weighted graph. All operators are pure and the structure is
/// safe to share across threads once built.
#[derive(Debug, Clone)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<Edge>,
    /// Per vertex: `(neighbor, edge id)`, sorted by neighbor id.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a graph from an edge list `(i, j, weight)`.
    ///
    /// Each undirected edge is stored once with `head = min(i, j)`,
    /// `tail = max(i, j)`, and the edge list is sorted by `(head, tail)`,
    /// so the build is independent of input order. Self-loops, duplicate
    /// undirected pairs, out-of-range ids and non-positive weights are
    /// rejected.
    pub fn build(n_vertices: usize, edge_list: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut seen = HashSet::with_capacity(edge_list.len());
        for &(i, j, weight) in edge_list {
            if i >= n_vertices || j >= n_vertices {
                return Err(GraphError::VertexOutOfRange { i, j, n: n_vertices });
            }
            if i == j {
                return Err(GraphError::SelfLoop { i, j });
            }
            if !(weight > 0.0) {
                return Err(GraphError::NonPositiveWeight { i, j, weight });
            }
            let (head, tail) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((head, tail)) {
                return Err(GraphError::DuplicateEdge { i: head, j: tail });
            }
            edges.push(Edge { head, tail, weight });
        }
        edges.sort_by_key(|e| (e.head, e.tail));
        Ok(Self::from_sorted_edges(n_vertices, edges))
    }

    fn from_sorted_edges(n_vertices: usize, edges: Vec<Edge>) -> Self {
        let mut adjacency = vec![Vec::new(); n_vertices];
        for (id, e) in edges.iter().enumerate() {
            adjacency[e.head].push((e.tail, id));
            adjacency[e.tail].push((e.head, id));
        }
        // Canonical head < tail plus the (head, tail) sort already yields
        // sorted adjacency lists; sort again to stay correct for graphs with
        // flipped orientations.
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Graph { n_vertices, edges, adjacency }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// Neighbors of `v` as `(neighbor, edge id)`, ascending by neighbor.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// Sum of incident edge weights (the Laplacian diagonal).
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_vertices];
        for e in &self.edges {
            d[e.head] += e.weight;
            d[e.tail] += e.weight;
        }
        d
    }

    /// Discrete gradient: `(Gv)_e = v[head] - v[tail]`.
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_vertices, "vertex vector size mismatch");
        self.edges.iter().map(|e| v[e.head] - v[e.tail]).collect()
    }

    /// Discrete divergence `G*`, the adjoint of the gradient:
    /// `(G*t)_k = sum_{head(e)=k} t_e - sum_{tail(e)=k} t_e`.
    pub fn divergence(&self, t: &[f64]) -> Vec<f64> {
        assert_eq!(t.len(), self.edges.len(), "edge vector size mismatch");
        let mut out = vec![0.0; self.n_vertices];
        for (e, &te) in self.edges.iter().zip(t) {
            out[e.head] += te;
            out[e.tail] -= te;
        }
        out
    }

    /// Weight operator: `(Dt)_e = a_e t_e`.
    pub fn apply_weights(&self, t: &[f64]) -> Vec<f64> {
        assert_eq!(t.len(), self.edges.len(), "edge vector size mismatch");
        self.edges.iter().zip(t).map(|(e, &te)| e.weight * te).collect()
    }

    /// Inverse weight operator: `(D^{-1}t)_e = t_e / a_e`.
    pub fn apply_weights_inverse(&self, t: &[f64]) -> Vec<f64> {
        assert_eq!(t.len(), self.edges.len(), "edge vector size mismatch");
        self.edges.iter().zip(t).map(|(e, &te)| te / e.weight).collect()
    }

    /// Laplacian application `Av = G*(D(Gv))`.
    pub fn laplacian(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_vertices, "vertex vector size mismatch");
        let mut out = vec![0.0; self.n_vertices];
        for e in &self.edges {
            let flux = e.weight * (v[e.head] - v[e.tail]);
            out[e.head] += flux;
            out[e.tail] -= flux;
        }
        out
    }

    /// Energy (A-) norm `sqrt((Av, v)) = sqrt(sum_e a_e (Gv)_e^2)`.
    pub fn energy_norm(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.n_vertices, "vertex vector size mismatch");
        self.edges
            .iter()
            .map(|e| {
                let d = v[e.head] - v[e.tail];
                e.weight * d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Returns a copy with the stored orientation of `edge_id` reversed.
    ///
    /// Orientation is an arbitrary convention; derived quantities must not
    /// depend on it. This hook exists so tests can assert that.
    pub fn flip_edge_orientation(&self, edge_id: usize) -> Graph {
        let mut flipped = self.clone();
        let e = &mut flipped.edges[edge_id];
        std::mem::swap(&mut e.head, &mut e.tail);
        flipped
    }

    /// Connected components of the subgraph induced by `subset`.
    ///
    /// Returns `(component count, labels)` with labels parallel to `subset`,
    /// numbered by first appearance.
    pub fn connected_components(&self, subset: &[usize]) -> (usize, Vec<usize>) {
        let mut position = vec![usize::MAX; self.n_vertices];
        for (idx, &v) in subset.iter().enumerate() {
            position[v] = idx;
        }
        let mut labels = vec![usize::MAX; subset.len()];
        let mut n_components = 0;
        let mut stack = Vec::new();
        for start in 0..subset.len() {
            if labels[start] != usize::MAX {
                continue;
            }
            labels[start] = n_components;
            stack.push(subset[start]);
            while let Some(v) = stack.pop() {
                for &(w, _) in &self.adjacency[v] {
                    let pw = position[w];
                    if pw != usize::MAX && labels[pw] == usize::MAX {
                        labels[pw] = n_components;
                        stack.push(w);
                    }
                }
            }
            n_components += 1;
        }
        (n_components, labels)
    }

    /// Breadth-first spanning tree of the subgraph induced by `subset`,
    /// rooted at `root`, visiting neighbors in ascending vertex order.
    ///
    /// Each tree edge records the subtree size below its child endpoint
    /// (the mass `m_{e'}` used by the spanning-tree flux basis).
    pub fn spanning_tree(&self, subset: &[usize], root: usize) -> Result<SpanningTree, GraphError> {
        if subset.is_empty() {
            return Err(GraphError::EmptySubset);
        }
        if !subset.contains(&root) {
            return Err(GraphError::RootOutsideSubset { root });
        }
        let mut in_subset = vec![false; self.n_vertices];
        for &v in subset {
            in_subset[v] = true;
        }
        let mut visited = vec![false; self.n_vertices];
        visited[root] = true;
        let mut order = vec![root];
        // (edge_id, parent, child), BFS discovery order
        let mut tree_edges: Vec<(usize, usize, usize)> = Vec::with_capacity(subset.len() - 1);
        let mut cursor = 0;
        while cursor < order.len() {
            let v = order[cursor];
            cursor += 1;
            for &(w, eid) in &self.adjacency[v] {
                if in_subset[w] && !visited[w] {
                    visited[w] = true;
                    order.push(w);
                    tree_edges.push((eid, v, w));
                }
            }
        }
        if order.len() != subset.len() {
            let vertex = *subset.iter().find(|&&v| !visited[v]).unwrap();
            return Err(GraphError::UnreachableVertex { vertex, root });
        }

        // Subtree sizes: sweep discovery order backwards, adding each child's
        // accumulated size to its parent.
        let mut size = vec![0usize; self.n_vertices];
        for &v in &order {
            size[v] = 1;
        }
        let mut parent_of = vec![usize::MAX; self.n_vertices];
        for &(_, p, c) in &tree_edges {
            parent_of[c] = p;
        }
        for &v in order.iter().rev() {
            if parent_of[v] != usize::MAX {
                size[parent_of[v]] += size[v];
            }
        }
        let edges = tree_edges
            .into_iter()
            .map(|(edge_id, parent, child)| TreeEdge { edge_id, parent, child, subtree_size: size[child] })
            .collect();
        Ok(SpanningTree { root, order, edges })
    }
}

/// A rooted spanning tree of an induced subgraph.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    pub root: usize,
    /// BFS order; `order[0] == root`.
    pub order: Vec<usize>,
    /// One entry per non-root vertex, in discovery order.
    pub edges: Vec<TreeEdge>,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeEdge {
    pub edge_id: usize,
    pub parent: usize,
    pub child: usize,
    /// Number of subset vertices in the subtree rooted at `child`.
    pub subtree_size: usize,
}
