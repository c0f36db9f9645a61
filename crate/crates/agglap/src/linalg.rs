//! The few solvers the pipeline needs: conjugate gradients for SPD
//! operators, mean-zero-constrained singular Laplacian solves, the second
//! Laplacian eigenvalue, and small dense KKT solves for the local
//! saddle-point problems.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("CG did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("right-hand side is incompatible: relative mean component {mean_residual:.3e}")]
    IncompatibleRhs { mean_residual: f64 },
    #[error("graph is disconnected ({components} components); treat components separately")]
    Disconnected { components: usize },
    #[error("local KKT system is singular or too ill-conditioned (residual {residual:.3e})")]
    SingularKkt { residual: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub rel_tolerance: f64,
    /// `None` means `10 * n`.
    pub max_iterations: Option<usize>,
    /// Seed for randomized starting vectors.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { rel_tolerance: 1e-10, max_iterations: None, seed: 0 }
    }
}

impl SolverOptions {
    pub fn with_tolerance(rel_tolerance: f64) -> Self {
        SolverOptions { rel_tolerance, ..Default::default() }
    }

    fn iterations_for(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or_else(|| (10 * n).max(50))
    }
}

/// Anything that can apply a symmetric operator to a vector.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// Laplacian of a graph as an operator.
pub struct LaplacianOp<'a>(pub &'a Graph);

impl LinearOp for LaplacianOp<'_> {
    fn dim(&self) -> usize {
        self.0.n_vertices()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0.laplacian(x));
    }
}

/// Dense symmetric matrix as an operator (tests and oracles).
pub struct DenseOp(pub DMatrix<f64>);

impl LinearOp for DenseOp {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let y = &self.0 * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

/// Subtracts the mean, projecting onto the hyperplane orthogonal to 1.
pub fn project_mean_zero(a: &mut [f64]) {
    let m = mean(a);
    for x in a {
        *x -= m;
    }
}

/// Conjugate gradients for an SPD operator.
///
/// On success the true residual satisfies `|op x - rhs| <= tol * |rhs|`.
pub fn solve_spd(op: &impl LinearOp, rhs: &[f64], opts: &SolverOptions) -> Result<Vec<f64>, SolverError> {
    cg(op, rhs, opts, None)
}

/// Conjugate gradients restricted to a subspace: `project` is applied to the
/// right-hand side and to every residual, keeping all iterates in the
/// subspace on which the operator is SPD.
pub fn solve_spd_projected(
    op: &impl LinearOp,
    rhs: &[f64],
    opts: &SolverOptions,
    project: &dyn Fn(&mut [f64]),
) -> Result<Vec<f64>, SolverError> {
    cg(op, rhs, opts, Some(project))
}

fn cg(
    op: &impl LinearOp,
    rhs: &[f64],
    opts: &SolverOptions,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<Vec<f64>, SolverError> {
    let n = op.dim();
    assert_eq!(rhs.len(), n, "rhs size mismatch");
    let apply_projection = |v: &mut [f64]| {
        if let Some(p) = project {
            p(v);
        }
    };

    let mut b = rhs.to_vec();
    apply_projection(&mut b);
    let rhs_norm = norm(&b);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let target = opts.rel_tolerance * rhs_norm;

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut q = vec![0.0; n];
    let mut rs = dot(&r, &r);
    let max_iter = opts.iterations_for(n);
    let mut iterations = 0;

    while iterations < max_iter {
        if rs.sqrt() <= 0.5 * target {
            // Recurrence residual can drift; accept only on the true residual.
            op.apply(&x, &mut q);
            let mut true_r: Vec<f64> = b.iter().zip(&q).map(|(bi, qi)| bi - qi).collect();
            apply_projection(&mut true_r);
            if norm(&true_r) <= target {
                return Ok(x);
            }
            r = true_r;
            p = r.clone();
            rs = dot(&r, &r);
        }
        op.apply(&p, &mut q);
        apply_projection(&mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            // Not SPD on this subspace or breakdown.
            return Err(SolverError::NonConvergence { iterations, residual: rs.sqrt() / rhs_norm });
        }
        let alpha = rs / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        apply_projection(&mut r);
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
        iterations += 1;
    }

    op.apply(&x, &mut q);
    let mut true_r: Vec<f64> = b.iter().zip(&q).map(|(bi, qi)| bi - qi).collect();
    apply_projection(&mut true_r);
    let residual = norm(&true_r) / rhs_norm;
    if residual <= opts.rel_tolerance {
        Ok(x)
    } else {
        Err(SolverError::NonConvergence { iterations, residual })
    }
}

/// Solves `A x = f` for a connected graph Laplacian on the mean-zero
/// hyperplane; the returned solution has zero mean.
///
/// `f` must be (numerically) orthogonal to constants; callers wanting to
/// force compatibility should apply [`project_mean_zero`] to `f` first.
pub fn solve_singular_laplacian(g: &Graph, f: &[f64], opts: &SolverOptions) -> Result<Vec<f64>, SolverError> {
    assert_eq!(f.len(), g.n_vertices(), "vertex vector size mismatch");
    let f_norm = norm(f);
    if f_norm == 0.0 {
        return Ok(vec![0.0; f.len()]);
    }
    let mean_residual = (f.iter().sum::<f64>() / (f.len() as f64).sqrt()).abs() / f_norm;
    if mean_residual > 1e-10 {
        return Err(SolverError::IncompatibleRhs { mean_residual });
    }
    let op = LaplacianOp(g);
    let mut x = solve_spd_projected(&op, f, opts, &|v| project_mean_zero(v))?;
    project_mean_zero(&mut x);
    Ok(x)
}

/// Second-smallest eigenvalue of the graph Laplacian with its eigenvector.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda2: f64,
    /// Unit-norm, mean-zero eigenvector estimate.
    pub vector: Vec<f64>,
    /// `|A v - lambda2 v|` for the returned pair.
    pub residual: f64,
}

const DENSE_EIGEN_LIMIT: usize = 300;

/// Second Laplacian eigenvalue: dense solve below
/// 300 vertices, inverse iteration on the mean-zero hyperplane above.
pub fn second_eigenvalue(g: &Graph, opts: &SolverOptions) -> Result<EigenResult, SolverError> {
    let n = g.n_vertices();
    let all: Vec<usize> = (0..n).collect();
    let (components, _) = g.connected_components(&all);
    if components > 1 {
        return Err(SolverError::Disconnected { components });
    }
    if n <= DENSE_EIGEN_LIMIT {
        return Ok(dense_second_eigenvalue(g));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(0x5eed));
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    project_mean_zero(&mut x);
    normalize(&mut x);

    let inner = SolverOptions {
        rel_tolerance: (opts.rel_tolerance * 1e-2).max(1e-13),
        max_iterations: opts.max_iterations,
        seed: opts.seed,
    };
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let max_outer = 200;
    for _ in 0..max_outer {
        let mut y = solve_singular_laplacian(g, &x, &inner)?;
        project_mean_zero(&mut y);
        normalize(&mut y);
        let ay = g.laplacian(&y);
        lambda = dot(&ay, &y);
        residual = norm(&ay.iter().zip(&y).map(|(a, v)| a - lambda * v).collect::<Vec<_>>());
        x = y;
        if residual <= opts.rel_tolerance.max(1e-12) * lambda {
            break;
        }
    }
    if residual > opts.rel_tolerance.max(1e-12) * lambda {
        return Err(SolverError::NonConvergence { iterations: max_outer, residual: residual / lambda });
    }
    Ok(EigenResult { lambda2: lambda, vector: x, residual })
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}

/// Dense Laplacian matrix of a graph.
pub fn dense_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n_vertices();
    let mut a = DMatrix::zeros(n, n);
    for e in g.edges() {
        a[(e.head, e.head)] += e.weight;
        a[(e.tail, e.tail)] += e.weight;
        a[(e.head, e.tail)] -= e.weight;
        a[(e.tail, e.head)] -= e.weight;
    }
    a
}

fn dense_second_eigenvalue(g: &Graph) -> EigenResult {
    let a = dense_laplacian(g);
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let idx = order[1];
    let lambda2 = eig.eigenvalues[idx];
    let mut vector: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    project_mean_zero(&mut vector);
    normalize(&mut vector);
    let av = g.laplacian(&vector);
    let residual = norm(&av.iter().zip(&vector).map(|(x, v)| x - lambda2 * v).collect::<Vec<_>>());
    EigenResult { lambda2, vector, residual }
}

/// Solves the bordered KKT system
///
/// ```text
/// [ B   C^T  0 ] [x]   [rhs_primal]
/// [ C   0    1 ] [y] = [rhs_constraints]
/// [ 0   1^T  0 ] [s]   [0]
/// ```
///
/// `B` must be SPD on the primal space; `C` may be rank-deficient by the
/// constant multiplier (rows of a local divergence). The constraint
/// right-hand side is matched up to its mean, i.e. tested against mean-zero
/// vectors only, and the multipliers `y` are returned with zero mean. With
/// no constraint rows this reduces to a plain solve with `B`.
pub fn solve_local_kkt(
    b: &DMatrix<f64>,
    constraints: &DMatrix<f64>,
    rhs_primal: &[f64],
    rhs_constraints: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    let m = b.nrows();
    let p = constraints.nrows();
    assert_eq!(b.ncols(), m);
    assert_eq!(rhs_primal.len(), m);
    assert_eq!(rhs_constraints.len(), p);
    if p > 0 {
        assert_eq!(constraints.ncols(), m);
    }

    if p == 0 {
        if m == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        let rhs = DVector::from_column_slice(rhs_primal);
        let x = b
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| b.clone().lu().solve(&rhs))
            .ok_or(SolverError::SingularKkt { residual: f64::INFINITY })?;
        return Ok((x.as_slice().to_vec(), Vec::new()));
    }

    let dim = m + p + 1;
    let mut k = DMatrix::zeros(dim, dim);
    k.view_mut((0, 0), (m, m)).copy_from(b);
    k.view_mut((m, 0), (p, m)).copy_from(constraints);
    k.view_mut((0, m), (m, p)).copy_from(&constraints.transpose());
    for i in 0..p {
        k[(m + i, m + p)] = 1.0;
        k[(m + p, m + i)] = 1.0;
    }
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, m).copy_from(&DVector::from_column_slice(rhs_primal));
    rhs.rows_mut(m, p).copy_from(&DVector::from_column_slice(rhs_constraints));

    let sol = k
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(SolverError::SingularKkt { residual: f64::INFINITY })?;

    let check = &k * &sol - &rhs;
    let scale = rhs.norm().max(1.0);
    let residual = check.norm() / scale;
    if residual > 1e-10 {
        return Err(SolverError::SingularKkt { residual });
    }
    let x = sol.as_slice()[..m].to_vec();
    let y = sol.as_slice()[m..m + p].to_vec();
    Ok((x, y))
}
