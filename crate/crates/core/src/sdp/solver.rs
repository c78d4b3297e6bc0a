use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::operator::row_matrix;
use super::{
    independent_rows, BlockData, BlockVector, CompiledOperator, Row, SdpError, SdpProblem, SdpSolution, SolverStatus,
};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Threshold on the relative primal residual, dual residual and gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty parameter.
    pub sigma0: f64,
    /// Iterations between penalty updates (0 keeps σ fixed).
    pub sigma_adapt: usize,
    /// Cap on conjugate-gradient steps per outer iteration (large problems only).
    pub cg_max_iter: usize,
    /// Record residuals every this many iterations.
    pub history_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 50_000, sigma0: 1.0, sigma_adapt: 10, cg_max_iter: 1000, history_every: 10 }
    }
}

/// Splits a symmetric matrix into its positive and negative spectral parts.
pub fn project_psd(s: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), SdpError> {
    if !s.is_square() {
        return Err(SdpError::Dimension(format!("{}x{} matrix is not square", s.nrows(), s.ncols())));
    }
    let scale = s.amax().max(1.0);
    let asym = (s - s.transpose()).amax();
    if asym > 1e-9 * scale {
        return Err(SdpError::NotSymmetric(asym));
    }
    let sym = (s + s.transpose()) * 0.5;
    split_dense(&sym).ok_or(SdpError::Eigen(0))
}

/// Returns `(S₊, S₋)`. Only the side with fewer eigenvalues is assembled
/// from eigenvectors; the other is the remainder.
fn split_dense(s: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = s.nrows();
    if n == 0 {
        return Some((s.clone(), s.clone()));
    }
    let eig = SymmetricEigen::try_new(s.clone(), f64::EPSILON, 0)?;
    if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
        return None;
    }
    let n_pos = eig.eigenvalues.iter().filter(|&&l| l > 0.0).count();
    let take_pos = n_pos <= n - n_pos;
    let cols: Vec<usize> = (0..n).filter(|&k| (eig.eigenvalues[k] > 0.0) == take_pos).collect();
    let v = DMatrix::from_fn(n, cols.len(), |i, t| eig.eigenvectors[(i, cols[t])]);
    let mut scaled = v.clone();
    for (t, mut col) in scaled.column_iter_mut().enumerate() {
        col *= eig.eigenvalues[cols[t]];
    }
    let mut part = scaled * v.transpose();
    part = (&part + part.transpose()) * 0.5;
    let rest = s - &part;
    Some(if take_pos { (part, rest) } else { (rest, part) })
}

fn split_blocks(w: &BlockVector) -> Result<(BlockVector, BlockVector), SdpError> {
    let parts: Vec<Result<(BlockData, BlockData), SdpError>> = w
        .blocks
        .par_iter()
        .enumerate()
        .map(|(k, b)| match b {
            BlockData::Dense(m) => {
                let (p, n) = split_dense(m).ok_or(SdpError::Eigen(k))?;
                Ok((BlockData::Dense(p), BlockData::Dense(n)))
            }
            BlockData::Diag(d) => Ok((BlockData::Diag(d.map(|v| v.max(0.0))), BlockData::Diag(d.map(|v| v.min(0.0))))),
        })
        .collect();
    let mut plus = Vec::with_capacity(parts.len());
    let mut minus = Vec::with_capacity(parts.len());
    for p in parts {
        let (a, b) = p?;
        plus.push(a);
        minus.push(b);
    }
    Ok((BlockVector { blocks: plus }, BlockVector { blocks: minus }))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row counts up to this size factor `A Aᵀ` once instead of running CG.
const DIRECT_CAP: usize = 4000;

enum NormalSolve {
    Direct(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Cg(Vec<f64>),
}

impl NormalSolve {
    fn new(problem: &SdpProblem, op: &CompiledOperator, keep: &[usize]) -> Self {
        let m = keep.len();
        if m > 0 && m <= DIRECT_CAP {
            let mut e = vec![0.0; m];
            let mut g = DMatrix::zeros(m, m);
            for j in 0..m {
                e[j] = 1.0;
                let col = op.apply(&op.adjoint(&e));
                e[j] = 0.0;
                g.column_mut(j).copy_from_slice(&col);
            }
            g = (&g + g.transpose()) * 0.5;
            if let Some(ch) = g.cholesky() {
                return Self::Direct(ch);
            }
            log::debug!("normal matrix is not positive definite; using CG");
        }
        Self::Cg(op.normal_diagonal(problem, keep).into_iter().map(|d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect())
    }

    fn solve(&self, op: &CompiledOperator, rhs: &[f64], y: &mut [f64], rtol: f64, max_iter: usize) -> Result<(), SdpError> {
        match self {
            Self::Direct(ch) => {
                y.copy_from_slice(ch.solve(&DVector::from_column_slice(rhs)).as_slice());
                Ok(())
            }
            Self::Cg(precond) => pcg(op, precond, rhs, y, rtol, max_iter).map(|_| ()),
        }
    }
}

/// Preconditioned CG on `A Aᵀ y = rhs`, warm-started from `y`.
fn pcg(
    op: &CompiledOperator,
    precond: &[f64],
    rhs: &[f64],
    y: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<usize, SdpError> {
    let rn = norm(rhs);
    if rhs.is_empty() || rn == 0.0 {
        y.fill(0.0);
        return Ok(0);
    }
    let normal = |v: &[f64]| op.apply(&op.adjoint(v));
    let ay = normal(y);
    let mut r: Vec<f64> = rhs.iter().zip(&ay).map(|(a, b)| a - b).collect();
    let mut z: Vec<f64> = r.iter().zip(precond).map(|(a, p)| a * p).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for k in 0..max_iter {
        if norm(&r) <= rtol * rn {
            return Ok(k);
        }
        let q = normal(&p);
        let pq = dot(&p, &q);
        if pq.is_nan() {
            return Ok(k);
        }
        if pq <= 0.0 {
            return Err(SdpError::NormalSystem);
        }
        let alpha = rz / pq;
        for i in 0..y.len() {
            y[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            z[i] = r[i] * precond[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(max_iter)
}

pub fn solve_bpsdp(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    solve_bpsdp_from(problem, opts, None)
}

struct Snapshot {
    x: BlockVector,
    y: Vec<f64>,
    z: BlockVector,
    res: (f64, f64, f64),
    obj: (f64, f64),
    iterations: usize,
    sigma: f64,
}

/// Boundary-point iteration, optionally warm-started.
///
/// The start may come from a smaller problem: blocks are matched by
/// position (kind and size must agree) and dual values by row index, so a
/// solution of a problem that this one extends with extra blocks and rows
/// is a valid start. Anything that does not match starts from zero.
pub fn solve_bpsdp_from(
    problem: &SdpProblem,
    opts: &SolverOptions,
    start: Option<&SdpSolution>,
) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let selection = independent_rows(problem)?;
    if !selection.dropped.is_empty() {
        log::debug!("dropped {} dependent rows", selection.dropped.len());
    }
    let keep = &selection.keep;
    let op = CompiledOperator::new(problem, keep);
    let b: Vec<f64> = keep.iter().map(|&k| problem.b[k]).collect();
    let c = row_matrix(problem, &problem.c);
    let normal = NormalSolve::new(problem, &op, keep);
    let b_norm = norm(&b);
    let c_norm = c.norm();

    let mut x = op.zeros_like();
    let mut z = op.zeros_like();
    let mut y = vec![0.0; keep.len()];
    let mut sigma = opts.sigma0;
    if let Some(s) = start {
        for (k, (dst, src)) in x.blocks.iter_mut().zip(&s.x.blocks).enumerate() {
            if dst.dim() == src.dim() && std::mem::discriminant(dst) == std::mem::discriminant(src) {
                *dst = src.clone();
                z.blocks[k] = s.z.blocks[k].clone();
            }
        }
        for (t, &k) in keep.iter().enumerate() {
            y[t] = s.y.get(k).copied().unwrap_or(0.0);
        }
        if s.sigma.is_finite() && s.sigma > 0.0 {
            sigma = s.sigma;
        }
    }

    let mut ax = op.apply(&x);
    let mut best: Option<Snapshot> = None;
    let mut history = Vec::new();
    let mut last = f64::INFINITY;
    let mut status = SolverStatus::MaxIter;
    let mut current: Option<Snapshot> = None;

    for it in 1..=opts.max_iter {
        let mut cz = c.clone();
        cz.axpy(-1.0, &z);
        let acz = op.apply(&cz);
        let rhs: Vec<f64> = acz.iter().zip(&b).zip(&ax).map(|((a, bk), xk)| a + (bk - xk) / sigma).collect();
        let cg_tol = (0.01 * last).clamp(1e-12, 1e-4);
        normal.solve(&op, &rhs, &mut y, cg_tol, opts.cg_max_iter)?;

        let aty = op.adjoint(&y);
        let mut w = c.clone();
        w.axpy(-1.0, &aty);
        w.axpy(-1.0 / sigma, &x);
        let (plus, mut minus) = split_blocks(&w)?;
        minus.scale(-sigma);
        x = minus;
        z = plus;
        ax = op.apply(&x);

        let mut dres = aty;
        dres.axpy(1.0, &z);
        dres.axpy(-1.0, &c);
        let primal = norm(&ax.iter().zip(&b).map(|(a, bk)| a - bk).collect::<Vec<_>>()) / (1.0 + b_norm);
        let dual = dres.norm() / (1.0 + c_norm);
        let pobj = c.dot(&x);
        let dobj = dot(&b, &y);
        let gap = (pobj - dobj).abs() / (1.0 + dobj.abs());
        if !(primal.is_finite() && dual.is_finite() && gap.is_finite()) {
            status = SolverStatus::NumericalFailure;
            break;
        }
        last = primal.max(dual);
        let score = primal.max(dual).max(gap);
        if opts.history_every > 0 && it % opts.history_every == 0 {
            history.push((it, primal, dual, gap));
        }
        let snap = || Snapshot {
            x: x.clone(),
            y: y.clone(),
            z: z.clone(),
            res: (primal, dual, gap),
            obj: (pobj, dobj),
            iterations: it,
            sigma,
        };
        if primal <= opts.tol && dual <= opts.tol && gap <= opts.tol {
            status = SolverStatus::Converged;
            current = Some(snap());
            break;
        }
        if best.as_ref().is_none_or(|s| score < s.res.0.max(s.res.1).max(s.res.2)) {
            best = Some(snap());
        }
        if opts.sigma_adapt > 0 && it % opts.sigma_adapt == 0 && dual > 0.0 {
            let ratio = primal / dual;
            if ratio > 10.0 {
                sigma /= 1.5;
            } else if ratio < 0.1 {
                sigma *= 1.5;
            }
        }
    }

    let mut out = match (current, best) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => Snapshot {
            x: op.zeros_like(),
            y: vec![0.0; keep.len()],
            z: op.zeros_like(),
            res: (f64::NAN, f64::NAN, f64::NAN),
            obj: (f64::NAN, f64::NAN),
            iterations: 0,
            sigma,
        },
    };
    if status == SolverStatus::Converged || history.last().is_none_or(|h| h.0 != out.iterations) {
        history.push((out.iterations, out.res.0, out.res.1, out.res.2));
    }
    let mut y_full = vec![0.0; problem.rows.len()];
    for (t, &k) in keep.iter().enumerate() {
        y_full[k] = std::mem::take(&mut out.y[t]);
    }
    Ok(SdpSolution {
        x: out.x,
        y: y_full,
        z: out.z,
        primal_residual: out.res.0,
        dual_residual: out.res.1,
        gap: out.res.2,
        primal_objective: out.obj.0,
        dual_objective: out.obj.1,
        iterations: out.iterations,
        status,
        sigma: out.sigma,
        history,
    })
}

/// `⟨A, X⟩` for a single row (or the cost).
pub fn evaluate_row(problem: &SdpProblem, row: &Row, x: &BlockVector) -> f64 {
    let mut acc = 0.0;
    for e in &row.entries {
        let w = if e.i == e.j { 1.0 } else { 2.0 };
        acc += w * e.value * x.get(e.block, e.i, e.j);
    }
    for lr in &row.low_rank {
        let BlockData::Dense(m) = &x.blocks[lr.block] else { continue };
        let v = DVector::from_column_slice(&lr.v);
        debug_assert_eq!(v.len(), problem.blocks[lr.block].dim);
        acc += lr.weight * v.dot(&(m * &v));
    }
    acc
}

fn add_row_scaled(row: &Row, a: f64, out: &mut BlockVector) {
    for e in &row.entries {
        match &mut out.blocks[e.block] {
            BlockData::Dense(m) => {
                m[(e.i, e.j)] += a * e.value;
                if e.i != e.j {
                    m[(e.j, e.i)] += a * e.value;
                }
            }
            BlockData::Diag(d) => d[e.i] += a * e.value,
        }
    }
    for lr in &row.low_rank {
        if let BlockData::Dense(m) = &mut out.blocks[lr.block] {
            let v = DVector::from_column_slice(&lr.v);
            m.ger(a * lr.weight, &v, &v, 1.0);
        }
    }
}

/// Relative primal residual, dual residual and gap of `solution`,
/// recomputed from the rows of `problem`.
pub fn residuals(problem: &SdpProblem, solution: &SdpSolution) -> Result<(f64, f64, f64), SdpError> {
    if !solution.x.matches(&problem.blocks) || !solution.z.matches(&problem.blocks) {
        return Err(SdpError::Dimension("solution blocks do not match the problem".into()));
    }
    if solution.y.len() != problem.rows.len() || problem.b.len() != problem.rows.len() {
        return Err(SdpError::Dimension(format!("{} dual values for {} rows", solution.y.len(), problem.rows.len())));
    }
    let primal_sq: f64 = problem
        .rows
        .iter()
        .zip(&problem.b)
        .map(|(r, bk)| (evaluate_row(problem, r, &solution.x) - bk).powi(2))
        .sum();
    let mut dres = solution.z.clone();
    add_row_scaled(&problem.c, -1.0, &mut dres);
    for (r, &yk) in problem.rows.iter().zip(&solution.y) {
        if yk != 0.0 {
            add_row_scaled(r, yk, &mut dres);
        }
    }
    let mut c = BlockVector::zeros(&problem.blocks);
    add_row_scaled(&problem.c, 1.0, &mut c);
    let pobj = evaluate_row(problem, &problem.c, &solution.x);
    let dobj = dot(&problem.b, &solution.y);
    Ok((
        primal_sq.sqrt() / (1.0 + norm(&problem.b)),
        dres.norm() / (1.0 + c.norm()),
        (pobj - dobj).abs() / (1.0 + dobj.abs()),
    ))
}
