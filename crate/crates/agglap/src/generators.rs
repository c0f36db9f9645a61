//! Deterministic graph constructors used by tests, the CLI fallback, and
//! the browser demo.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

/// Path graph on `n` vertices with unit weights.
pub fn path_graph(n: usize) -> Graph {
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    Graph::build(n, &edges).unwrap()
}

/// Cycle graph on `n` vertices with unit weights.
pub fn cycle_graph(n: usize) -> Graph {
    let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    edges.push((n - 1, 0, 1.0));
    Graph::build(n, &edges).unwrap()
}

/// Star graph: vertex 0 joined to vertices `1..n`.
pub fn star_graph(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|i| (0, i, 1.0)).collect();
    Graph::build(n, &edges).unwrap()
}

/// `nx` x `ny` grid graph with unit weights; vertex `(x, y)` has id
/// `y * nx + x`.
pub fn grid_graph(nx: usize, ny: usize) -> Graph {
    let mut edges = Vec::with_capacity(2 * nx * ny);
    for y in 0..ny {
        for x in 0..nx {
            let v = y * nx + x;
            if x + 1 < nx {
                edges.push((v, v + 1, 1.0));
            }
            if y + 1 < ny {
                edges.push((v, v + nx, 1.0));
            }
        }
    }
    Graph::build(nx * ny, &edges).unwrap()
}

/// Seeded random connected graph: a random spanning tree plus `extra_edges`
/// additional distinct edges, weights uniform in `weight_range`.
pub fn random_connected_graph(
    n: usize,
    extra_edges: usize,
    weight_range: (f64, f64),
    seed: u64,
) -> Graph {
    assert!(n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = weight_range;
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1 + extra_edges);
    let mut present = std::collections::HashSet::new();
    // Random tree: attach each vertex to a uniformly chosen earlier vertex.
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v, rng.random_range(lo..hi)));
        present.insert((u, v));
    }
    let max_extra = n * (n - 1) / 2 - (n - 1);
    let mut remaining = extra_edges.min(max_extra);
    while remaining > 0 {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if present.insert(key) {
            edges.push((key.0, key.1, rng.random_range(lo..hi)));
            remaining -= 1;
        }
    }
    Graph::build(n, &edges).unwrap()
}

/// Seeded random vector with entries uniform in `(-1, 1)`.
pub fn random_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}
