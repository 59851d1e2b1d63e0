//! Solvers that consume majorizers: structured `M` solves, CG, the quadratic MM
//! iteration and majorized-spectrum diagnostics.

use std::fmt::Write as _;

use nalgebra::Cholesky;

use crate::error::{check_len, Error, Result};
use crate::majorizer::{MajorizerSpec, Structure};
use crate::operator::{
    dot, hermitian_eigenvalues, ComplexVector, HermitianMap, HermitianOperator, LinearOperator, C64, ZERO,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Relative residual target `||M z - r|| / ||r||`.
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub x: ComplexVector,
    pub iterations: usize,
    /// Relative residual of the recursively updated residual vector.
    pub residual: f64,
    pub converged: bool,
    /// `(iteration, curvature)` if a direction with `p^H A p <= 0` stopped the run.
    pub breakdown: Option<(usize, f64)>,
}

/// Preconditioned CG on a Hermitian PSD map. `precond` applies an approximate inverse.
pub fn preconditioned_cg(
    a: &dyn HermitianMap,
    b: &ComplexVector,
    x0: Option<&ComplexVector>,
    iters: usize,
    tol: f64,
    precond: Option<&dyn Fn(&[C64], &mut [C64])>,
) -> Result<CgResult> {
    let n = a.dim();
    check_len("CG right-hand side", n, b.len())?;
    let mut x = match x0 {
        Some(x0) => {
            check_len("CG start", n, x0.len())?;
            x0.clone()
        }
        None => ComplexVector::zeros(n),
    };
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(CgResult {
            x: ComplexVector::zeros(n),
            iterations: 0,
            residual: 0.0,
            converged: true,
            breakdown: None,
        });
    }
    let mut r = b - a.apply_vec(&x)?;
    let mut z = vec![ZERO; n];
    let apply_p = |r: &[C64], z: &mut [C64]| match precond {
        Some(p) => p(r, z),
        None => z.copy_from_slice(r),
    };
    apply_p(r.as_slice(), &mut z);
    let mut p = z.clone();
    let mut rz = dot(r.as_slice(), &z).re;
    let mut ap = vec![ZERO; n];
    let mut residual = r.norm() / b_norm;
    let mut iterations = 0;
    let mut breakdown = None;
    while iterations < iters && residual > tol {
        a.apply_into(&p, &mut ap);
        let curvature = dot(&p, &ap).re;
        if curvature <= 0.0 || !curvature.is_finite() {
            breakdown = Some((iterations, curvature));
            break;
        }
        let step = rz / curvature;
        for i in 0..n {
            x[i] += p[i] * step;
            r[i] -= ap[i] * step;
        }
        iterations += 1;
        residual = r.norm() / b_norm;
        if residual <= tol {
            break;
        }
        apply_p(r.as_slice(), &mut z);
        let rz_new = dot(r.as_slice(), &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + p[i] * beta;
        }
    }
    Ok(CgResult {
        x,
        iterations,
        residual,
        converged: residual <= tol,
        breakdown,
    })
}

/// Plain CG; a nonpositive-curvature direction aborts with [`Error::NegativeCurvature`].
pub fn conjugate_gradient(
    a: &dyn HermitianMap,
    b: &ComplexVector,
    x0: &ComplexVector,
    iters: usize,
    tol: f64,
) -> Result<CgResult> {
    let out = preconditioned_cg(a, b, Some(x0), iters, tol, None)?;
    if let Some((iteration, curvature)) = out.breakdown {
        return Err(Error::NegativeCurvature { iteration, curvature });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: ComplexVector,
    /// `||M x - r|| / ||r||`; zero for exact structured solves.
    pub residual: f64,
    pub iterations: usize,
}

/// `sum_i d_i |a_ij|^2` for each column `j`, when cheaply available.
fn gram_diagonal(block: &LinearOperator, d: &[f64]) -> Option<Vec<f64>> {
    match block {
        LinearOperator::Identity(_) => Some(d.to_vec()),
        LinearOperator::Diagonal(k) => Some(k.iter().zip(d).map(|(k, d)| k.norm_sqr() * d).collect()),
        LinearOperator::Dense(m) => Some(
            (0..m.ncols())
                .map(|j| m.column(j).iter().zip(d).map(|(a, d)| a.norm_sqr() * d).sum())
                .collect(),
        ),
        LinearOperator::Projector(p) => Some(p.weighted_square_column_sums(d)),
        LinearOperator::Scaled(s, inner) => gram_diagonal(inner, d).map(|v| v.into_iter().map(|x| x * s * s).collect()),
        _ => None,
    }
}

/// Preconditioner for `M` with general structure.
///
/// Blocks whose `K_b^H D_b K_b` has a cheap diagonal contribute to a diagonal
/// part. A unitary DFT block turns the preconditioner into `alpha U^H (d_u + mean(diag)) U`,
/// otherwise it is Jacobi.
enum Preconditioner {
    Circulant {
        dft: std::sync::Arc<crate::operator::Dft>,
        inv: Vec<f64>,
    },
    Jacobi(Vec<f64>),
    None,
}

impl Preconditioner {
    fn build(m: &MajorizerSpec) -> Self {
        let blocks: Vec<LinearOperator> = match m.k() {
            LinearOperator::Stacked(b) => b.as_ref().clone(),
            other => vec![other.clone()],
        };
        let n = m.dim();
        let mut diag = vec![0.0; n];
        let mut unitary: Option<(std::sync::Arc<crate::operator::Dft>, Vec<f64>)> = None;
        let mut offset = 0;
        for b in &blocks {
            let seg = &m.d()[offset..offset + b.rows()];
            offset += b.rows();
            match b {
                LinearOperator::Dft(f) if unitary.is_none() => unitary = Some((f.clone(), seg.to_vec())),
                _ => {
                    if let Some(g) = gram_diagonal(b, seg) {
                        diag.iter_mut().zip(g).for_each(|(a, v)| *a += v);
                    }
                }
            }
        }
        let alpha = m.alpha();
        match unitary {
            Some((dft, du)) => {
                let shift = diag.iter().sum::<f64>() / n as f64;
                let inv: Vec<f64> = du.iter().map(|v| 1.0 / (alpha * (v + shift))).collect();
                if inv.iter().all(|v| v.is_finite()) {
                    Self::Circulant { dft, inv }
                } else {
                    Self::None
                }
            }
            None if diag.iter().all(|&v| v > 0.0) => Self::Jacobi(diag.iter().map(|v| 1.0 / (alpha * v)).collect()),
            None => Self::None,
        }
    }

    fn apply(&self, r: &[C64], z: &mut [C64]) {
        match self {
            Self::Circulant { dft, inv } => {
                let mut tmp = vec![ZERO; r.len()];
                dft.forward_into(r, &mut tmp);
                tmp.iter_mut().zip(inv).for_each(|(t, s)| *t *= *s);
                dft.inverse_into(&tmp, z);
            }
            Self::Jacobi(inv) => {
                for ((zi, ri), s) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * *s;
                }
            }
            Self::None => z.copy_from_slice(r),
        }
    }
}

/// Solves `M z = r`.
///
/// Diagonal and unitary structure are exact. Anything else runs preconditioned
/// CG from `warm` (or zero); a breakdown is logged and the iterate returned
/// with its residual.
pub fn solve_m(
    m: &MajorizerSpec,
    r: &ComplexVector,
    warm: Option<&ComplexVector>,
    opts: SolveOptions,
) -> Result<SolveResult> {
    check_len("solve_m right-hand side", m.dim(), r.len())?;
    match (m.structure(), m.k()) {
        (Structure::Diagonal, _) => {
            let diag = m.diagonal_entries().expect("diagonal structure");
            if let Some(i) = diag.iter().position(|&v| v <= 0.0) {
                return Err(Error::Singular(format!("diagonal majorizer entry {i} is zero")));
            }
            let x = ComplexVector::from_iterator(r.len(), r.iter().zip(&diag).map(|(ri, di)| ri / *di));
            Ok(SolveResult {
                x,
                residual: 0.0,
                iterations: 0,
            })
        }
        (Structure::Unitary, LinearOperator::Dft(f)) => {
            if let Some(i) = m.d().iter().position(|&v| v <= 0.0) {
                return Err(Error::Singular(format!("majorizer eigenvalue {i} is zero")));
            }
            let mut tmp = vec![ZERO; r.len()];
            f.forward_into(r.as_slice(), &mut tmp);
            for (t, d) in tmp.iter_mut().zip(m.d()) {
                *t /= m.alpha() * d;
            }
            let mut x = ComplexVector::zeros(r.len());
            f.inverse_into(&tmp, x.as_mut_slice());
            Ok(SolveResult {
                x,
                residual: 0.0,
                iterations: 0,
            })
        }
        _ => {
            let pre = Preconditioner::build(m);
            let apply = |a: &[C64], b: &mut [C64]| pre.apply(a, b);
            let out = preconditioned_cg(m, r, warm, opts.max_iters, opts.tol, Some(&apply))?;
            if let Some((it, curv)) = out.breakdown {
                log::warn!("CG on M broke down at iteration {it} (curvature {curv:e})");
            }
            Ok(SolveResult {
                x: out.x,
                residual: out.residual,
                iterations: out.iterations,
            })
        }
    }
}

/// `min_x 1/2 x^H H x + Re(x^H g)` started from `x0`.
#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    pub h: HermitianOperator,
    pub g: ComplexVector,
    pub x0: ComplexVector,
}

impl QuadraticProblem {
    pub fn new(h: HermitianOperator, g: ComplexVector, x0: ComplexVector) -> Result<Self> {
        check_len("quadratic linear term", h.dim(), g.len())?;
        check_len("quadratic start", h.dim(), x0.len())?;
        Ok(Self { h, g, x0 })
    }

    pub fn cost(&self, x: &ComplexVector) -> Result<f64> {
        let hx = self.h.apply_vec(x)?;
        Ok(0.5 * x.dotc(&hx).re + x.dotc(&self.g).re)
    }

    /// `-H^{-1} g` by dense Cholesky.
    pub fn dense_solution(&self) -> Result<ComplexVector> {
        let hm = self.h.materialize()?;
        let chol = Cholesky::new(hm).ok_or_else(|| Error::Singular("H is not positive definite".into()))?;
        Ok(-chol.solve(&self.g))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub distance: Option<f64>,
    pub cost: f64,
}

/// Per-iteration records of an MM or ADMM run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    /// CSV with header `iter,distance,cost`; a missing distance is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,distance,cost\n");
        for r in &self.records {
            let dist = r.distance.map(|d| format!("{d:.17e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:.17e}", r.iter, dist, r.cost);
        }
        out
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MmOptions {
    pub iters: usize,
    /// Stop once `||x - x*|| <= stop_relative * ||x0 - x*||` (needs `x*`).
    pub stop_relative: Option<f64>,
    /// Record every `record_every`-th iteration; the first and last are always kept.
    pub record_every: usize,
    pub solve: SolveOptions,
}

impl Default for MmOptions {
    fn default() -> Self {
        Self {
            iters: 100,
            stop_relative: None,
            record_every: 1,
            solve: SolveOptions::default(),
        }
    }
}

/// `x <- x - M^{-1} (H x + g)`.
///
/// With a certified `M` the cost must not increase; an increase beyond
/// `1e-10` of the cost's scale is reported as [`Error::MajorizationViolated`].
pub fn mm_quadratic(
    q: &QuadraticProblem,
    m: &MajorizerSpec,
    x_star: Option<&ComplexVector>,
    opts: MmOptions,
) -> Result<ConvergenceTrace> {
    check_len("majorizer vs H dimension", q.h.dim(), m.dim())?;
    if !m.certification.certified {
        log::warn!("running MM with an uncertified majorizer");
    }
    let every = opts.record_every.max(1);
    let mut x = q.x0.clone();
    let d0 = x_star.map(|xs| (&x - xs).norm());
    let distance = |x: &ComplexVector| x_star.map(|xs| (x - xs).norm());
    let mut hx = q.h.apply_vec(&x)?;
    let cost_of = |x: &ComplexVector, hx: &ComplexVector| 0.5 * x.dotc(hx).re + x.dotc(&q.g).re;
    let mut cost = cost_of(&x, &hx);
    let mut trace = ConvergenceTrace::default();
    trace.records.push(TraceRecord {
        iter: 0,
        distance: distance(&x),
        cost,
    });
    let mut warm: Option<ComplexVector> = None;
    for iter in 1..=opts.iters {
        let grad = &hx + &q.g;
        let step = solve_m(m, &grad, warm.as_ref(), opts.solve)?;
        x -= &step.x;
        warm = Some(step.x);
        hx = q.h.apply_vec(&x)?;
        let new_cost = cost_of(&x, &hx);
        let scale = cost.abs() + x.norm() * (hx.norm() + q.g.norm());
        if m.certification.certified && new_cost > cost + 1e-10 * scale {
            return Err(Error::MajorizationViolated(format!(
                "MM cost rose from {cost:e} to {new_cost:e} at iteration {iter}"
            )));
        }
        cost = new_cost;
        let dist = distance(&x);
        let done = matches!((opts.stop_relative, dist, d0), (Some(t), Some(d), Some(d0)) if d <= t * d0);
        if iter % every == 0 || done || iter == opts.iters {
            trace.records.push(TraceRecord {
                iter,
                distance: dist,
                cost,
            });
        }
        if done {
            break;
        }
    }
    Ok(trace)
}

/// Sorted eigenvalues of `M^{-1/2} H M^{-1/2}`, computed densely through a
/// Cholesky factor `M = L L^H` (same spectrum as `L^{-1} H L^{-H}`).
pub fn majorized_spectrum(m: &dyn HermitianMap, h: &dyn HermitianMap) -> Result<Vec<f64>> {
    check_len("majorizer vs H dimension", m.dim(), h.dim())?;
    let cap = crate::operator::DEFAULT_MATERIALIZE_CAP;
    let mm = crate::operator::materialize_hermitian(m, cap)?;
    let hm = crate::operator::materialize_hermitian(h, cap)?;
    let mm = (&mm + mm.adjoint()) * C64::new(0.5, 0.0);
    let chol = Cholesky::new(mm).ok_or_else(|| Error::Singular("majorizer is not positive definite".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&hm)
        .ok_or_else(|| Error::Singular("majorizer factor is singular".into()))?;
    let s = l
        .solve_lower_triangular(&y.adjoint())
        .ok_or_else(|| Error::Singular("majorizer factor is singular".into()))?;
    hermitian_eigenvalues(&s)
}

/// Largest `|1 - lambda|` over a majorized spectrum: the asymptotic MM contraction factor.
pub fn contraction_factor(spectrum: &[f64]) -> f64 {
    spectrum.iter().map(|l| (1.0 - l).abs()).fold(0.0, f64::max)
}
