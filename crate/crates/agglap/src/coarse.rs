//! Coarse vertex space (piecewise-constant prolongation and averaging
//! projection), coarse edge spaces built per interface either by local
//! saddle-point solves or by spanning trees, interface signatures, the
//! averaging functional, and the interpolation `pi_H` whose divergence
//! commutes with the aggregate averaging.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::aggregation::{quotient_graph, Aggregation};
use crate::graph::Graph;
use crate::linalg::{self, SolverError, SolverOptions};

#[derive(Debug, Error)]
pub enum CoarseError {
    #[error("local KKT solve failed on aggregate {aggregate}: {source}")]
    KktFailure { aggregate: usize, source: SolverError },
    #[error("coarse quotient graph is disconnected ({components} components)")]
    DisconnectedQuotient { components: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Which construction produced a coarse edge basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisConstruction {
    SaddlePoint,
    SpanningTree,
}

impl BasisConstruction {
    pub fn tag(&self) -> &'static str {
        match self {
            BasisConstruction::SaddlePoint => "saddle",
            BasisConstruction::SpanningTree => "tree",
        }
    }
}

/// Bilinear form minimized by the saddle-point construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BilinearForm {
    /// Plain Euclidean edge inner product.
    #[default]
    Euclidean,
    /// `D^{-1}`-weighted product (entries `1/a_e`).
    InverseWeights,
}

/// Piecewise-constant coarse vertex space: prolongation `P` (aggregate
/// indicator columns) and the averaging projection `Q_H`.
#[derive(Debug, Clone)]
pub struct VertexCoarseSpace {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl VertexCoarseSpace {
    pub fn from_aggregation(agg: &Aggregation) -> Self {
        let sizes = (0..agg.n_c()).map(|a| agg.aggregate_size(a)).collect();
        VertexCoarseSpace { labels: agg.labels().to_vec(), sizes }
    }

    pub fn n_coarse(&self) -> usize {
        self.sizes.len()
    }

    pub fn aggregate_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `P x`: broadcast each coarse value over its aggregate.
    pub fn prolongate(&self, coarse: &[f64]) -> Vec<f64> {
        assert_eq!(coarse.len(), self.sizes.len());
        self.labels.iter().map(|&a| coarse[a]).collect()
    }

    /// `P^T v`: sum fine values per aggregate.
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        assert_eq!(fine.len(), self.labels.len());
        let mut out = vec![0.0; self.sizes.len()];
        for (v, &a) in self.labels.iter().enumerate() {
            out[a] += fine[v];
        }
        out
    }

    /// `Q_H v`: average over each aggregate, then broadcast.
    pub fn project(&self, fine: &[f64]) -> Vec<f64> {
        let mut sums = self.restrict(fine);
        for (s, &n) in sums.iter_mut().zip(&self.sizes) {
            *s /= n as f64;
        }
        self.prolongate(&sums)
    }
}

/// Galerkin solution of `A u = f` in the coarse space: solves the quotient
/// Laplacian and returns the prolongated, fine-mean-zero representative.
pub fn solve_coarse(
    g: &Graph,
    f: &[f64],
    agg: &Aggregation,
    opts: &SolverOptions,
) -> Result<Vec<f64>, CoarseError> {
    assert_eq!(f.len(), g.n_vertices());
    let vcs = VertexCoarseSpace::from_aggregation(agg);
    if agg.n_c() == 1 {
        // The only mean-zero constant is zero.
        return Ok(vec![0.0; g.n_vertices()]);
    }
    let quotient = quotient_graph(g, agg);
    let all: Vec<usize> = (0..quotient.n_vertices()).collect();
    let (components, _) = quotient.connected_components(&all);
    if components > 1 {
        return Err(CoarseError::DisconnectedQuotient { components });
    }
    let rhs = vcs.restrict(f);
    let x = linalg::solve_singular_laplacian(&quotient, &rhs, opts)?;
    let mut u_h = vcs.prolongate(&x);
    linalg::project_mean_zero(&mut u_h);
    Ok(u_h)
}

/// Sparse edge vector as sorted `(edge id, value)` pairs.
pub type SparseVec = Vec<(usize, f64)>;

fn sparse_from_map(map: BTreeMap<usize, f64>) -> SparseVec {
    map.into_iter().collect()
}

/// Scatter-add `scale * v` into a dense vector.
pub fn sparse_add_into(dense: &mut [f64], v: &SparseVec, scale: f64) {
    for &(i, x) in v {
        dense[i] += scale * x;
    }
}

/// Dot product of a sparse and a dense vector.
pub fn sparse_dot_dense(v: &SparseVec, dense: &[f64]) -> f64 {
    v.iter().map(|&(i, x)| x * dense[i]).sum()
}

/// Dot product of two sorted sparse vectors under a per-index weight.
pub fn sparse_dot(a: &SparseVec, b: &SparseVec, weight: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 * b[j].1 * weight(a[i].0);
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

/// The signed indicator of an interface: `sigma_I = eps * Q_I G 1_A`,
/// carrying exactly `+-1` on the interface edges and zero elsewhere.
#[derive(Debug, Clone)]
pub struct InterfaceSignature {
    /// Index into [`Aggregation::interfaces`].
    pub interface: usize,
    /// The predetermined sign `eps`; `+1` under the `A < B` convention.
    pub sign: f64,
    /// `(edge id, +-1)`, ascending by edge id.
    pub entries: SparseVec,
}

impl InterfaceSignature {
    pub fn norm_sq(&self) -> f64 {
        self.entries.len() as f64
    }
}

/// Signature of interface `index` of `agg`. The sign convention is
/// `eps = +1` for the lower-id aggregate of the pair, so the entry on edge
/// `e` is `+1` exactly when the stored head of `e` lies in that aggregate.
pub fn interface_signature(g: &Graph, agg: &Aggregation, index: usize) -> InterfaceSignature {
    let iface = &agg.interfaces()[index];
    let a = iface.pair.0;
    let entries = iface
        .edges
        .iter()
        .map(|&eid| {
            let e = g.edge(eid);
            let value = if agg.label_of(e.head) == a { 1.0 } else { -1.0 };
            (eid, value)
        })
        .collect();
    InterfaceSignature { interface: index, sign: 1.0, entries }
}

/// The averaging functional `<psi>_I = (psi, sigma_I) / |sigma_I|^2`.
pub fn average_on_interface(psi: &[f64], sig: &InterfaceSignature) -> f64 {
    sparse_dot_dense(&sig.entries, psi) / sig.norm_sq()
}

/// A coarse edge basis: one flux vector `phi_I` per interface, supported on
/// the interface and the interiors of its two aggregates.
#[derive(Debug, Clone)]
pub struct EdgeCoarseBasis {
    pub construction: BasisConstruction,
    /// Aggregate pair per interface (copied from the aggregation).
    pub pairs: Vec<(usize, usize)>,
    pub signatures: Vec<InterfaceSignature>,
    /// `phi_I` per interface, sorted sparse.
    pub basis: Vec<SparseVec>,
    /// Spanning-tree construction only: the per-edge vector `phi^e` for each
    /// interface edge, in the stored head -> tail direction.
    pub per_edge: Option<BTreeMap<usize, SparseVec>>,
}

impl EdgeCoarseBasis {
    pub fn n_interfaces(&self) -> usize {
        self.basis.len()
    }

    /// Assembles the dense edge vector `sum_I c_I phi_I`.
    pub fn combine(&self, coefficients: &[f64], n_edges: usize) -> Vec<f64> {
        assert_eq!(coefficients.len(), self.basis.len());
        let mut out = vec![0.0; n_edges];
        for (phi, &c) in self.basis.iter().zip(coefficients) {
            sparse_add_into(&mut out, phi, c);
        }
        out
    }
}

/// Coarse edge basis via local saddle-point problems: on each side of an
/// interface, the interior flux minimizing `B(psi + sigma_I, psi + sigma_I)`
/// subject to matching the divergence of `-sigma_I` against mean-zero test
/// vectors on the aggregate.
pub fn build_basis_saddle(
    g: &Graph,
    agg: &Aggregation,
    bilinear: BilinearForm,
) -> Result<EdgeCoarseBasis, CoarseError> {
    let n_ifaces = agg.interfaces().len();
    let mut signatures = Vec::with_capacity(n_ifaces);
    let mut basis = Vec::with_capacity(n_ifaces);
    let mut pairs = Vec::with_capacity(n_ifaces);
    for idx in 0..n_ifaces {
        let sig = interface_signature(g, agg, idx);
        let (a, b) = agg.interfaces()[idx].pair;
        let mut entries: BTreeMap<usize, f64> = sig.entries.iter().copied().collect();
        for side in [a, b] {
            for (eid, value) in saddle_side(g, agg, side, &sig, bilinear)? {
                entries.insert(eid, value);
            }
        }
        pairs.push((a, b));
        signatures.push(sig);
        basis.push(sparse_from_map(entries));
    }
    Ok(EdgeCoarseBasis {
        construction: BasisConstruction::SaddlePoint,
        pairs,
        signatures,
        basis,
        per_edge: None,
    })
}

/// Interior flux on one side of an interface via the local KKT system.
fn saddle_side(
    g: &Graph,
    agg: &Aggregation,
    side: usize,
    sig: &InterfaceSignature,
    bilinear: BilinearForm,
) -> Result<SparseVec, CoarseError> {
    let interior = agg.interior_edges(side);
    let vertices = agg.aggregate(side);
    if interior.is_empty() {
        return Ok(SparseVec::new());
    }
    let m = interior.len();
    let p = vertices.len();
    let mut local = vec![usize::MAX; g.n_vertices()];
    for (i, &v) in vertices.iter().enumerate() {
        local[v] = i;
    }

    let mut b = DMatrix::zeros(m, m);
    for (j, &eid) in interior.iter().enumerate() {
        b[(j, j)] = match bilinear {
            BilinearForm::Euclidean => 1.0,
            BilinearForm::InverseWeights => 1.0 / g.edge(eid).weight,
        };
    }
    let mut c = DMatrix::zeros(p, m);
    for (j, &eid) in interior.iter().enumerate() {
        let e = g.edge(eid);
        c[(local[e.head], j)] = 1.0;
        c[(local[e.tail], j)] = -1.0;
    }
    // sigma_I has no interior support, so the primal right-hand side
    // -B(sigma_I, .) vanishes; the constraints carry -(G* sigma_I)|_A.
    let rhs_primal = vec![0.0; m];
    let mut rhs_constraints = vec![0.0; p];
    for &(eid, value) in &sig.entries {
        let e = g.edge(eid);
        if local[e.head] != usize::MAX {
            rhs_constraints[local[e.head]] -= value;
        }
        if local[e.tail] != usize::MAX {
            rhs_constraints[local[e.tail]] += value;
        }
    }

    let (psi, _) = linalg::solve_local_kkt(&b, &c, &rhs_primal, &rhs_constraints)
        .map_err(|source| CoarseError::KktFailure { aggregate: side, source })?;
    Ok(interior.iter().copied().zip(psi).collect())
}

/// Coarse edge basis via spanning trees. For each interface edge `e` from
/// head-side aggregate `H` to tail-side aggregate `T`, `phi^e` carries `+1`
/// on `e`, subtree masses `+-m/|V_H|` on a BFS tree of `H` rooted at the
/// head, and the negated analogue on `T` rooted at the tail, giving
/// `G* phi^e = 1_H/|V_H| - 1_T/|V_T|` exactly. The interface basis vector
/// is `phi_I = sum_e delta_e phi^e` with `delta_e` aligning every edge to
/// the lower-id aggregate of the pair.
pub fn build_basis_tree(g: &Graph, agg: &Aggregation) -> Result<EdgeCoarseBasis, CoarseError> {
    let n_ifaces = agg.interfaces().len();
    let mut signatures = Vec::with_capacity(n_ifaces);
    let mut basis = Vec::with_capacity(n_ifaces);
    let mut pairs = Vec::with_capacity(n_ifaces);
    let mut per_edge = BTreeMap::new();
    for idx in 0..n_ifaces {
        let sig = interface_signature(g, agg, idx);
        let (a, b) = agg.interfaces()[idx].pair;
        let mut accum: BTreeMap<usize, f64> = BTreeMap::new();
        for &eid in &agg.interfaces()[idx].edges {
            let e = g.edge(eid);
            let phi_e = tree_edge_vector(g, agg, eid);
            // +1 when the stored head lies in the lower-id aggregate.
            let delta = if agg.label_of(e.head) == a { 1.0 } else { -1.0 };
            for &(j, x) in &phi_e {
                *accum.entry(j).or_insert(0.0) += delta * x;
            }
            per_edge.insert(eid, phi_e);
        }
        pairs.push((a, b));
        signatures.push(sig);
        basis.push(sparse_from_map(accum));
    }
    Ok(EdgeCoarseBasis {
        construction: BasisConstruction::SpanningTree,
        pairs,
        signatures,
        basis,
        per_edge: Some(per_edge),
    })
}

/// `phi^e` for an interface edge, oriented stored-head -> stored-tail.
fn tree_edge_vector(g: &Graph, agg: &Aggregation, eid: usize) -> SparseVec {
    let e = g.edge(eid);
    let mut entries: BTreeMap<usize, f64> = BTreeMap::new();
    entries.insert(eid, 1.0);
    // Head side receives the unit flux and spreads 1/|V| to every vertex.
    side_tree_entries(g, agg, agg.label_of(e.head), e.head, 1.0, &mut entries);
    // Tail side sheds 1/|V| from every vertex.
    side_tree_entries(g, agg, agg.label_of(e.tail), e.tail, -1.0, &mut entries);
    sparse_from_map(entries)
}

fn side_tree_entries(
    g: &Graph,
    agg: &Aggregation,
    side: usize,
    root: usize,
    orientation: f64,
    entries: &mut BTreeMap<usize, f64>,
) {
    let members = agg.aggregate(side);
    if members.len() <= 1 {
        return;
    }
    let tree = g.spanning_tree(members, root).expect("aggregates are connected by construction");
    let size = members.len() as f64;
    for te in &tree.edges {
        let mass = te.subtree_size as f64 / size;
        let sign = if g.edge(te.edge_id).head == te.child { 1.0 } else { -1.0 };
        entries.insert(te.edge_id, orientation * sign * mass);
    }
}

/// Interpolation `pi_H` onto the coarse edge space.
///
/// Returns the per-interface coefficients `<psi>_I` and the interpolated
/// edge vector. The saddle-point construction interpolates as
/// `sum_I <psi>_I phi_I`; the spanning-tree construction routes each
/// interface edge value through its `phi^e` (interior edges map to zero),
/// so its output is not in general a combination of the `phi_I`.
pub fn project_pi_h(g: &Graph, basis: &EdgeCoarseBasis, psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(psi.len(), g.n_edges());
    let coefficients: Vec<f64> =
        basis.signatures.iter().map(|sig| average_on_interface(psi, sig)).collect();
    let mut out = vec![0.0; g.n_edges()];
    match &basis.per_edge {
        None => {
            for (phi, &c) in basis.basis.iter().zip(&coefficients) {
                sparse_add_into(&mut out, phi, c);
            }
        }
        Some(per_edge) => {
            for (&eid, phi_e) in per_edge {
                if psi[eid] != 0.0 {
                    sparse_add_into(&mut out, phi_e, psi[eid]);
                }
            }
        }
    }
    (coefficients, out)
}

/// Builds the basis for the requested construction.
pub fn build_basis(
    g: &Graph,
    agg: &Aggregation,
    construction: BasisConstruction,
    bilinear: BilinearForm,
) -> Result<EdgeCoarseBasis, CoarseError> {
    match construction {
        BasisConstruction::SaddlePoint => build_basis_saddle(g, agg, bilinear),
        BasisConstruction::SpanningTree => build_basis_tree(g, agg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::MatchHierarchy;
    use crate::generators::{path_graph, random_connected_graph, random_vector};
    use crate::graph::Graph;
    use crate::linalg::{norm, solve_singular_laplacian};
    use approx::assert_relative_eq;

    fn two_aggregate_p3(g: &Graph) -> Aggregation {
        Aggregation::from_labels(g, vec![0, 0, 1]).unwrap()
    }

    #[test]
    fn vertex_space_examples() {
        let g = path_graph(3);
        let singles = Aggregation::singletons(&g);
        let vcs = VertexCoarseSpace::from_aggregation(&singles);
        let v = vec![0.3, -1.0, 2.0];
        assert_eq!(vcs.project(&v), v);

        let one = Aggregation::from_labels(&g, vec![0, 0, 0]).unwrap();
        let vcs = VertexCoarseSpace::from_aggregation(&one);
        let q = vcs.project(&[1.0, 2.0, 3.0]);
        assert_eq!(q, vec![2.0, 2.0, 2.0]);

        let two = two_aggregate_p3(&g);
        let vcs = VertexCoarseSpace::from_aggregation(&two);
        assert_eq!(vcs.project(&[0.0, 1.0, -1.0]), vec![0.5, 0.5, -1.0]);
    }

    #[test]
    fn solve_coarse_examples() {
        let g = path_graph(3);
        let opts = SolverOptions::default();
        let f = vec![1.0, 0.0, -1.0];

        let exact = solve_coarse(&g, &f, &Aggregation::singletons(&g), &opts).unwrap();
        let u = solve_singular_laplacian(&g, &f, &opts).unwrap();
        for (a, b) in exact.iter().zip(&u) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }

        let one = Aggregation::from_labels(&g, vec![0, 0, 0]).unwrap();
        assert_eq!(solve_coarse(&g, &f, &one, &opts).unwrap(), vec![0.0; 3]);

        let two = two_aggregate_p3(&g);
        let u_h = solve_coarse(&g, &f, &two, &opts).unwrap();
        assert_relative_eq!(u_h[0], 1.0 / 3.0, max_relative = 1e-9);
        assert_relative_eq!(u_h[1], 1.0 / 3.0, max_relative = 1e-9);
        assert_relative_eq!(u_h[2], -2.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn signature_examples() {
        let g = path_graph(3);
        let agg = two_aggregate_p3(&g);
        let sig = interface_signature(&g, &agg, 0);
        assert_eq!(sig.entries, vec![(1, 1.0)]);
        assert_eq!(sig.norm_sq(), 1.0);

        // <sigma_I>_I = 1 by definition.
        let mut dense = vec![0.0; g.n_edges()];
        sparse_add_into(&mut dense, &sig.entries, 1.0);
        assert_relative_eq!(average_on_interface(&dense, &sig), 1.0);
    }

    #[test]
    fn signature_parallel_edges() {
        // Two aggregates joined by 3 parallel interface edges.
        let g = Graph::build(
            6,
            &[(0, 1, 1.0), (2, 3, 1.0), (4, 5, 1.0), (0, 2, 1.0), (0, 4, 1.0), (1, 3, 1.0), (1, 5, 1.0)],
        )
        .unwrap();
        let agg = Aggregation::from_labels(&g, vec![0, 1, 0, 1, 0, 1]).unwrap();
        let sig = interface_signature(&g, &agg, 0);
        assert_eq!(sig.norm_sq(), 3.0);
        for &(_, v) in &sig.entries {
            assert!(v == 1.0 || v == -1.0);
        }
    }

    #[test]
    fn average_examples() {
        let g = path_graph(3);
        let agg = two_aggregate_p3(&g);
        let sig = interface_signature(&g, &agg, 0);
        // Interior-only vector averages to zero.
        assert_eq!(average_on_interface(&[7.0, 0.0], &sig), 0.0);
        assert_eq!(average_on_interface(&[5.0, 2.0], &sig), 2.0);
    }

    #[test]
    fn saddle_basis_p2_no_interior() {
        let g = path_graph(2);
        let agg = Aggregation::singletons(&g);
        let basis = build_basis_saddle(&g, &agg, BilinearForm::Euclidean).unwrap();
        assert_eq!(basis.basis.len(), 1);
        assert_eq!(basis.basis[0], vec![(0, 1.0)]);
    }

    #[test]
    fn saddle_basis_p3() {
        let g = path_graph(3);
        let agg = two_aggregate_p3(&g);
        let basis = build_basis_saddle(&g, &agg, BilinearForm::Euclidean).unwrap();
        let phi = &basis.basis[0];
        assert_eq!(phi.len(), 2);
        assert_relative_eq!(phi[0].1, 0.5, max_relative = 1e-11);
        assert_relative_eq!(phi[1].1, 1.0);
    }

    #[test]
    fn tree_basis_p3() {
        let g = path_graph(3);
        let agg = two_aggregate_p3(&g);
        let basis = build_basis_tree(&g, &agg).unwrap();
        let phi = &basis.basis[0];
        assert_eq!(phi, &vec![(0, 0.5), (1, 1.0)]);
        // G* phi^e = (1/2, 1/2, -1).
        let per_edge = basis.per_edge.as_ref().unwrap();
        let mut dense = vec![0.0; g.n_edges()];
        sparse_add_into(&mut dense, &per_edge[&1], 1.0);
        let div = g.divergence(&dense);
        assert_relative_eq!(div[0], 0.5);
        assert_relative_eq!(div[1], 0.5);
        assert_relative_eq!(div[2], -1.0);
    }

    /// Divergence identity for both constructions on random aggregations:
    /// `G* phi_I = Q_H G* sigma_I` to 1e-11 on every interface.
    #[test]
    fn divergence_identity_random() {
        for seed in [1u64, 5, 9] {
            let g = random_connected_graph(30, 25, (0.1, 10.0), seed);
            let h = MatchHierarchy::build(&g, 2);
            let agg = h.aggregation_at(&g, 2).unwrap();
            let vcs = VertexCoarseSpace::from_aggregation(&agg);
            for construction in [BasisConstruction::SaddlePoint, BasisConstruction::SpanningTree] {
                let basis = build_basis(&g, &agg, construction, BilinearForm::Euclidean).unwrap();
                for (phi, sig) in basis.basis.iter().zip(&basis.signatures) {
                    let mut phi_dense = vec![0.0; g.n_edges()];
                    sparse_add_into(&mut phi_dense, phi, 1.0);
                    let lhs = g.divergence(&phi_dense);
                    let mut sigma_dense = vec![0.0; g.n_edges()];
                    sparse_add_into(&mut sigma_dense, &sig.entries, 1.0);
                    let rhs = vcs.project(&g.divergence(&sigma_dense));
                    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
                    assert!(norm(&diff) <= 1e-11, "seed {seed} {construction:?}: {}", norm(&diff));
                }
            }
        }
    }

    /// Commuting diagram: `G* pi_H psi = Q_H G* psi` for both constructions.
    #[test]
    fn commuting_diagram_random() {
        for seed in [2u64, 7] {
            let g = random_connected_graph(60, 60, (0.1, 10.0), seed);
            let h = MatchHierarchy::build(&g, 3);
            let agg = h.aggregation_at(&g, 3).unwrap();
            let vcs = VertexCoarseSpace::from_aggregation(&agg);
            for construction in [BasisConstruction::SaddlePoint, BasisConstruction::SpanningTree] {
                let basis = build_basis(&g, &agg, construction, BilinearForm::Euclidean).unwrap();
                for trial in 0..5 {
                    let psi = random_vector(g.n_edges(), seed * 100 + trial);
                    let (_, pi_psi) = project_pi_h(&g, &basis, &psi);
                    let lhs = g.divergence(&pi_psi);
                    let rhs = vcs.project(&g.divergence(&psi));
                    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
                    assert!(
                        norm(&diff) <= 1e-11 * (norm(&psi) + 1.0),
                        "seed {seed} trial {trial} {construction:?}: {}",
                        norm(&diff)
                    );
                }
            }
        }
    }

    #[test]
    fn pi_h_degenerate_cases() {
        let g = path_graph(3);
        let agg = two_aggregate_p3(&g);
        for construction in [BasisConstruction::SaddlePoint, BasisConstruction::SpanningTree] {
            let basis = build_basis(&g, &agg, construction, BilinearForm::Euclidean).unwrap();
            // Interior-only psi interpolates to zero.
            let (_, out) = project_pi_h(&g, &basis, &[3.0, 0.0]);
            assert_eq!(out, vec![0.0, 0.0]);
        }
        // psi = sigma_I maps to phi_I under the saddle construction.
        let basis = build_basis_saddle(&g, &agg, BilinearForm::Euclidean).unwrap();
        let mut sigma = vec![0.0; 2];
        sparse_add_into(&mut sigma, &basis.signatures[0].entries, 1.0);
        let (coefs, out) = project_pi_h(&g, &basis, &sigma);
        assert_relative_eq!(coefs[0], 1.0);
        let mut phi = vec![0.0; 2];
        sparse_add_into(&mut phi, &basis.basis[0], 1.0);
        assert_eq!(out, phi);
    }

    /// Saddle optimality: `|phi_I|` is minimal among fluxes that agree with
    /// `sigma_I` on the interface and satisfy the same local divergence
    /// constraints. Oracle: minimum-norm solution via SVD pseudoinverse.
    #[test]
    fn saddle_optimality_small() {
        let g = random_connected_graph(8, 8, (0.5, 2.0), 21);
        let h = MatchHierarchy::build(&g, 2);
        let agg = h.aggregation_at(&g, 2).unwrap();
        let basis = build_basis_saddle(&g, &agg, BilinearForm::Euclidean).unwrap();
        for (idx, phi) in basis.basis.iter().enumerate() {
            let (a, b) = basis.pairs[idx];
            let sig = &basis.signatures[idx];
            let mut oracle_norm_sq = sig.norm_sq();
            for side in [a, b] {
                let interior = agg.interior_edges(side);
                if interior.is_empty() {
                    continue;
                }
                let vertices = agg.aggregate(side);
                let m = interior.len();
                let p = vertices.len();
                let mut local = std::collections::HashMap::new();
                for (i, &v) in vertices.iter().enumerate() {
                    local.insert(v, i);
                }
                let mut c = DMatrix::zeros(p, m);
                for (j, &eid) in interior.iter().enumerate() {
                    let e = g.edge(eid);
                    c[(local[&e.head], j)] = 1.0;
                    c[(local[&e.tail], j)] = -1.0;
                }
                let mut d = vec![0.0; p];
                for &(eid, value) in &sig.entries {
                    let e = g.edge(eid);
                    if let Some(&i) = local.get(&e.head) {
                        d[i] -= value;
                    }
                    if let Some(&i) = local.get(&e.tail) {
                        d[i] += value;
                    }
                }
                // Center the constraint rhs (tested against mean-zero only).
                let mean: f64 = d.iter().sum::<f64>() / p as f64;
                for x in &mut d {
                    *x -= mean;
                }
                // Minimum-norm solution of C psi = d.
                let pinv = c.clone().svd(true, true).pseudo_inverse(1e-12).unwrap();
                let psi = pinv * nalgebra::DVector::from_column_slice(&d);
                oracle_norm_sq += psi.norm_squared();
            }
            let phi_norm_sq: f64 = phi.iter().map(|&(_, x)| x * x).sum();
            assert!(
                phi_norm_sq <= oracle_norm_sq + 1e-9,
                "interface {idx}: {phi_norm_sq} > {oracle_norm_sq}"
            );
        }
    }

    /// Nested coarse spaces: refining the aggregation cannot increase the
    /// Galerkin error.
    #[test]
    fn galerkin_error_monotone() {
        let g = random_connected_graph(40, 40, (0.1, 10.0), 17);
        let h = MatchHierarchy::build(&g, 3);
        let opts = SolverOptions::default();
        let mut f = random_vector(g.n_vertices(), 99);
        linalg::project_mean_zero(&mut f);
        let u = solve_singular_laplacian(&g, &f, &opts).unwrap();
        let mut last = 0.0;
        for level in 0..=h.depth() {
            let agg = h.aggregation_at(&g, level).unwrap();
            let u_h = solve_coarse(&g, &f, &agg, &opts).unwrap();
            let diff: Vec<f64> = u.iter().zip(&u_h).map(|(a, b)| a - b).collect();
            let err = g.energy_norm(&diff);
            assert!(err + 1e-10 >= last, "level {level}: {err} < {last}");
            last = err;
        }
    }

    #[test]
    fn fig_tree_basis_magnitudes() {
        // 8-vertex aggregate shaped like the spanning-tree figure plus a
        // single-vertex neighbor across the interface edge.
        let edges = [
            (0, 1, 1.0),
            (0, 6, 1.0),
            (0, 7, 1.0),
            (1, 2, 1.0),
            (1, 3, 1.0),
            (3, 4, 1.0),
            (3, 5, 1.0),
            (0, 8, 1.0), // interface edge
        ];
        let g = Graph::build(9, &edges).unwrap();
        let agg = Aggregation::from_labels(&g, vec![0, 0, 0, 0, 0, 0, 0, 0, 1]).unwrap();
        let basis = build_basis_tree(&g, &agg).unwrap();
        let phi = &basis.basis[0];
        let iface_edges = &agg.interfaces()[0].edges;
        assert_eq!(iface_edges.len(), 1);
        let iface = iface_edges[0];
        let mut magnitudes: Vec<f64> = phi
            .iter()
            .filter(|&&(eid, _)| eid != iface)
            .map(|&(_, x)| x.abs())
            .collect();
        magnitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(magnitudes, vec![0.125, 0.125, 0.125, 0.125, 0.125, 0.375, 0.625]);
        // Unit value on the interface edge.
        assert_eq!(phi.iter().find(|&&(eid, _)| eid == iface).unwrap().1.abs(), 1.0);
    }
}
