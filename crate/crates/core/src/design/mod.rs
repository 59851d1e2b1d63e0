//! Majorizer design by dual steepest ascent.
//!
//! The primal problem is `min_d 1/2 d^T W d` subject to `K^H diag(d) K >= H`.
//! Its dual is
//!
//! ```text
//! L(x) = -1/2 sum_k |Kx|_k^4 / w_k + Re(x^H H x)
//! ```
//!
//! maximized over `x` in `C^N`. Along a search direction `g` the dual is a
//! quartic in the step, so the exact line search reduces to the real roots of a
//! cubic. A (local) maximizer `x` yields the diagonal `d = W^{-1} |Kx|^2`.

mod cubic;

use std::fmt::Write as _;

pub use cubic::cubic_real_roots;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::majorizer::{
    ratio_lambda_max, verify_majorization, CertMethod, Certification, MajorizerSpec, RatioOptions, Structure,
    VerifyMode,
};
use crate::operator::{
    dot, random_unit_vector, ComplexVector, DiagonalWeights, HermitianMap, HermitianOperator, LinearOperator, C64,
    ZERO,
};

/// `H`, `K` and the design weighting `w` (all entries positive).
#[derive(Clone, Debug)]
pub struct DesignProblem {
    pub h: HermitianOperator,
    pub k: LinearOperator,
    pub w: DiagonalWeights,
}

impl DesignProblem {
    pub fn new(h: HermitianOperator, k: LinearOperator, w: DiagonalWeights) -> Result<Self> {
        check_len("K columns vs H dimension", h.dim(), k.cols())?;
        check_len("design weights vs K rows", k.rows(), w.len())?;
        if w.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput("design weights must be strictly positive".into()));
        }
        Ok(Self { h, k, w })
    }

    /// Uniform weighting `W = I`.
    pub fn unweighted(h: HermitianOperator, k: LinearOperator) -> Result<Self> {
        let w = DiagonalWeights::uniform(k.rows(), 1.0)?;
        Self::new(h, k, w)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    fn dual_from_parts(&self, x: &[C64], kx: &[C64], hx: &[C64]) -> f64 {
        let quartic: f64 = kx
            .iter()
            .zip(self.w.values())
            .map(|(z, w)| z.norm_sqr() * z.norm_sqr() / w)
            .sum();
        -0.5 * quartic + dot(x, hx).re
    }

    /// `2 (Hx - K^H (W^{-1} |Kx|^2 .* Kx))`.
    fn gradient_from_parts(&self, kx: &[C64], hx: &[C64]) -> ComplexVector {
        let scaled: Vec<C64> = kx
            .iter()
            .zip(self.w.values())
            .map(|(z, w)| z * (z.norm_sqr() / w))
            .collect();
        let mut khs = ComplexVector::zeros(self.dim());
        self.k.adjoint_into(&scaled, khs.as_mut_slice());
        let mut g = ComplexVector::from_column_slice(hx);
        g -= khs;
        g * C64::new(2.0, 0.0)
    }
}

fn apply_k(p: &DesignProblem, x: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; p.k.rows()];
    p.k.apply_into(x, &mut out);
    out
}

fn apply_h(p: &DesignProblem, x: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; p.dim()];
    p.h.apply_into(x, &mut out);
    out
}

/// `L(x)`.
pub fn dual_value(p: &DesignProblem, x: &ComplexVector) -> Result<f64> {
    check_len("dual iterate", p.dim(), x.len())?;
    let kx = apply_k(p, x.as_slice());
    let hx = apply_h(p, x.as_slice());
    Ok(p.dual_from_parts(x.as_slice(), &kx, &hx))
}

/// Gradient of `L` over the `2N` real coordinates, packed as `dL/da + i dL/db`
/// for `x = a + i b`.
pub fn dual_gradient(p: &DesignProblem, x: &ComplexVector) -> Result<ComplexVector> {
    check_len("dual iterate", p.dim(), x.len())?;
    let kx = apply_k(p, x.as_slice());
    let hx = apply_h(p, x.as_slice());
    Ok(p.gradient_from_parts(&kx, &hx))
}

/// Exact line-search data for `f(a) = L(x + a g)`.
///
/// `f'(a) = -(c3 a^3 + c2 a^2 + c1 a + c0)`, so the roots of the cubic are the
/// stationary points of `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct LineSearchPolynomial {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub b1: f64,
    pub b2: f64,
    // Weighted inner products s_ij = v_i^T W^{-1} v_j.
    s01: f64,
    s02: f64,
    s11: f64,
    s12: f64,
    s22: f64,
}

impl LineSearchPolynomial {
    fn from_parts(w: &[f64], kx: &[C64], kg: &[C64], b1: f64, b2: f64) -> Self {
        let v0: Vec<f64> = kx.iter().map(|z| z.norm_sqr()).collect();
        let v1: Vec<f64> = kg.iter().zip(kx).map(|(g, x)| 2.0 * (g * x.conj()).re).collect();
        let v2: Vec<f64> = kg.iter().map(|z| z.norm_sqr()).collect();
        let s = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(w).map(|((a, b), w)| a * b / w).sum() };
        let (s01, s02, s11, s12, s22) = (s(&v0, &v1), s(&v0, &v2), s(&v1, &v1), s(&v1, &v2), s(&v2, &v2));
        Self {
            c3: 2.0 * s22,
            c2: 3.0 * s12,
            c1: 2.0 * s02 + s11 - 2.0 * b2,
            c0: s01 - b1,
            v0,
            v1,
            v2,
            b1,
            b2,
            s01,
            s02,
            s11,
            s12,
            s22,
        }
    }

    /// `f'(a)`.
    pub fn derivative(&self, a: f64) -> f64 {
        -(((self.c3 * a + self.c2) * a + self.c1) * a + self.c0)
    }

    /// `f(a) - f(0)`, exact for the quartic.
    pub fn increase(&self, a: f64) -> f64 {
        let quartic = a * self.s01
            + 0.5 * a * a * (self.s11 + 2.0 * self.s02)
            + a * a * a * self.s12
            + 0.5 * a * a * a * a * self.s22;
        -quartic + a * self.b1 + a * a * self.b2
    }

    pub fn stationary_points(&self) -> Result<Vec<f64>> {
        cubic_real_roots(self.c3, self.c2, self.c1, self.c0)
    }
}

pub fn line_search_coefficients(p: &DesignProblem, x: &ComplexVector, g: &ComplexVector) -> Result<LineSearchPolynomial> {
    check_len("dual iterate", p.dim(), x.len())?;
    check_len("search direction", p.dim(), g.len())?;
    if g.iter().all(|z| *z == ZERO) {
        return Err(Error::InvalidInput("zero search direction; the ascent has stopped".into()));
    }
    let kx = apply_k(p, x.as_slice());
    let kg = apply_k(p, g.as_slice());
    let hx = apply_h(p, x.as_slice());
    let hg = apply_h(p, g.as_slice());
    let b2 = dot(g.as_slice(), &hg).re;
    let b1 = 2.0 * dot(g.as_slice(), &hx).re;
    Ok(LineSearchPolynomial::from_parts(p.w.values(), &kx, &kg, b1, b2))
}

/// Iterate of the dual ascent with cached `Kx`, `Hx` and gradient.
#[derive(Clone, Debug)]
pub struct AscentState {
    pub x: ComplexVector,
    pub dual_value: f64,
    pub grad_norm: f64,
    pub iter: usize,
    /// Set when no stationary point of the line search improved `L`.
    pub stagnated: bool,
    grad: ComplexVector,
    kx: Vec<C64>,
    hx: Vec<C64>,
}

/// Steps between exact recomputations of the cached products.
const REFRESH_EVERY: usize = 50;

impl AscentState {
    pub fn new(p: &DesignProblem, x: ComplexVector) -> Result<Self> {
        check_len("dual iterate", p.dim(), x.len())?;
        crate::operator::validate_vector(&x)?;
        let kx = apply_k(p, x.as_slice());
        let hx = apply_h(p, x.as_slice());
        let grad = p.gradient_from_parts(&kx, &hx);
        Ok(Self {
            dual_value: p.dual_from_parts(x.as_slice(), &kx, &hx),
            grad_norm: grad.norm(),
            iter: 0,
            stagnated: false,
            grad,
            kx,
            hx,
            x,
        })
    }

    pub fn gradient(&self) -> &ComplexVector {
        &self.grad
    }
}

/// One steepest-ascent step with exact line search along the gradient.
///
/// Among the real stationary points of `f(a) = L(x + a g)` the one with the
/// largest `f` is taken. If none beats `a = 0` the state is returned unchanged
/// with `stagnated` set.
pub fn ascent_step(p: &DesignProblem, s: &AscentState) -> Result<AscentState> {
    let mut next = s.clone();
    next.iter += 1;
    if s.grad_norm == 0.0 {
        next.stagnated = true;
        return Ok(next);
    }
    let g = &s.grad;
    let kg = apply_k(p, g.as_slice());
    let hg = apply_h(p, g.as_slice());
    let b2 = dot(g.as_slice(), &hg).re;
    let b1 = 2.0 * dot(g.as_slice(), &s.hx).re;
    let poly = LineSearchPolynomial::from_parts(p.w.values(), &s.kx, &kg, b1, b2);
    let roots = match poly.stationary_points() {
        Ok(r) => r,
        Err(Error::DegeneratePolynomial) => Vec::new(),
        Err(e) => return Err(e),
    };
    let best = roots
        .iter()
        .map(|&a| (a, poly.increase(a)))
        .filter(|(_, inc)| inc.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1));
    // The gain comes from the coefficients, not from a difference of L values,
    // so it stays meaningful far below the roundoff level of L itself.
    let Some((alpha, _)) = best.filter(|&(a, inc)| inc > 0.0 && a != 0.0) else {
        next.stagnated = true;
        return Ok(next);
    };

    let step = C64::new(alpha, 0.0);
    next.x.axpy(step, g, C64::new(1.0, 0.0));
    if next.iter % REFRESH_EVERY == 0 {
        next.kx = apply_k(p, next.x.as_slice());
        next.hx = apply_h(p, next.x.as_slice());
    } else {
        next.kx.iter_mut().zip(&kg).for_each(|(a, b)| *a += b * step);
        next.hx.iter_mut().zip(&hg).for_each(|(a, b)| *a += b * step);
    }
    next.dual_value = p.dual_from_parts(next.x.as_slice(), &next.kx, &next.hx);
    next.grad = p.gradient_from_parts(&next.kx, &next.hx);
    next.grad_norm = next.grad.norm();
    next.stagnated = false;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertMode {
    /// `alpha = (1 + tol) lambda_max(M~^{-1} H)`.
    Power,
    /// `alpha = 3`, optionally raised to the power estimate when that exceeds 3.
    Factor3,
    None,
}

impl std::str::FromStr for CertMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Self::Power),
            "factor3" => Ok(Self::Factor3),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidInput(format!("unknown certification mode '{other}' (power, factor3, none)"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DesignConfig {
    pub iters: usize,
    pub seed: u64,
    pub cert: CertMode,
    /// Independent starts (seeds `seed`, `seed + 1`, ...); the largest dual value wins.
    pub restarts: usize,
    /// Safety inflation of power-iteration scalings.
    pub tol: f64,
    /// Stop once `||g|| <= grad_tol * max(1, ||x||)`.
    pub grad_tol: f64,
    /// In factor-3 mode, also estimate `lambda_max(M~^{-1} H)` and use it when it exceeds 3.
    pub factor3_guard: bool,
    pub ratio: RatioOptions,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            iters: 128,
            seed: 0,
            cert: CertMode::Factor3,
            restarts: 1,
            tol: 1e-3,
            grad_tol: 1e-8,
            factor3_guard: true,
            ratio: RatioOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub dual_value: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct DesignResult {
    pub majorizer: MajorizerSpec,
    /// `x` at the end of the winning run.
    pub x: ComplexVector,
    pub trace: Vec<TraceEntry>,
    pub stop: StopReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    GradientTolerance,
    Stagnation,
}

impl DesignResult {
    /// Trace CSV with header `iter,dual_value,grad_norm`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,dual_value,grad_norm\n");
        for t in &self.trace {
            let _ = writeln!(out, "{},{:.17e},{:.17e}", t.iter, t.dual_value, t.grad_norm);
        }
        out
    }
}

/// Runs the ascent from `x0` until the budget, the gradient tolerance or stagnation.
pub fn run_ascent(
    p: &DesignProblem,
    x0: ComplexVector,
    iters: usize,
    grad_tol: f64,
) -> Result<(AscentState, Vec<TraceEntry>, StopReason)> {
    let mut state = AscentState::new(p, x0)?;
    let mut trace = vec![TraceEntry {
        iter: 0,
        dual_value: state.dual_value,
        grad_norm: state.grad_norm,
    }];
    let mut reason = StopReason::Budget;
    for _ in 0..iters {
        if state.grad_norm <= grad_tol * state.x.norm().max(1.0) {
            reason = StopReason::GradientTolerance;
            break;
        }
        let next = ascent_step(p, &state)?;
        if next.stagnated {
            reason = StopReason::Stagnation;
            break;
        }
        state = next;
        trace.push(TraceEntry {
            iter: state.iter,
            dual_value: state.dual_value,
            grad_norm: state.grad_norm,
        });
    }
    if reason == StopReason::Budget && state.grad_norm <= grad_tol * state.x.norm().max(1.0) {
        reason = StopReason::GradientTolerance;
    }
    Ok((state, trace, reason))
}

/// `d = W^{-1} |Kx|^2`.
pub fn primal_from_dual(p: &DesignProblem, x: &ComplexVector) -> Result<Vec<f64>> {
    check_len("dual iterate", p.dim(), x.len())?;
    let kx = apply_k(p, x.as_slice());
    Ok(kx.iter().zip(p.w.values()).map(|(z, w)| z.norm_sqr() / w).collect())
}

/// Designs `d` and scales the resulting majorizer according to `config.cert`.
pub fn design(p: &DesignProblem, config: &DesignConfig) -> Result<DesignResult> {
    if config.iters == 0 {
        return Err(Error::InvalidInput("design needs at least one iteration".into()));
    }
    let mut best: Option<(AscentState, Vec<TraceEntry>, StopReason)> = None;
    for r in 0..config.restarts.max(1) {
        let x0 = random_unit_vector(p.dim(), config.seed.wrapping_add(r as u64));
        let run = run_ascent(p, x0, config.iters, config.grad_tol)?;
        log::debug!("design restart {r}: L = {:.6e}, {:?}", run.0.dual_value, run.2);
        if best.as_ref().is_none_or(|b| run.0.dual_value > b.0.dual_value) {
            best = Some(run);
        }
    }
    let (state, trace, stop) = best.expect("at least one restart");
    // max L > 0 exactly when H != 0; otherwise d = 0 is already feasible.
    if !(state.dual_value > 0.0) {
        return Err(Error::InvalidInput("H is zero (or the ascent found no positive dual value)".into()));
    }
    let d = primal_from_dual(p, &state.x)?;
    let unscaled = MajorizerSpec::new(p.k.clone(), d, 1.0, Certification::uncertified())?;
    let majorizer = certify(&unscaled, &p.h, config)?;
    Ok(DesignResult {
        majorizer,
        x: state.x,
        trace,
        stop,
    })
}

/// Chooses `alpha` for an unscaled designed majorizer.
pub fn certify(unscaled: &MajorizerSpec, h: &dyn HermitianMap, config: &DesignConfig) -> Result<MajorizerSpec> {
    let has_zero = unscaled.d().iter().any(|&v| v <= 0.0);
    let invertible = !has_zero || unscaled.structure() == Structure::General;
    let mut mode = config.cert;
    if mode == CertMode::Power && has_zero && unscaled.structure() != Structure::General {
        log::warn!("designed diagonal has zero entries; falling back to factor-3 scaling");
        mode = CertMode::Factor3;
    }
    let ratio_opts = RatioOptions {
        seed: config.seed,
        ..config.ratio
    };
    let estimate = |m: &MajorizerSpec| -> Result<(f64, bool)> {
        let est = ratio_lambda_max(m, h, ratio_opts)?;
        Ok((est.value, est.converged))
    };
    match mode {
        CertMode::None => Ok(unscaled.with_alpha(1.0, Certification::uncertified())),
        CertMode::Power => {
            let (lambda, converged) = estimate(unscaled)?;
            let inflation = if converged { config.tol } else { 2.0 * config.tol };
            Ok(unscaled.with_alpha(
                lambda * (1.0 + inflation),
                Certification {
                    method: CertMethod::PowerIteration,
                    certified: true,
                    ratio_estimate: Some(lambda),
                },
            ))
        }
        CertMode::Factor3 => {
            let mut alpha = 3.0;
            let mut ratio = None;
            if config.factor3_guard && invertible {
                match estimate(unscaled) {
                    Ok((lambda, converged)) => {
                        let inflation = if converged { config.tol } else { 2.0 * config.tol };
                        let lifted = lambda * (1.0 + inflation);
                        if lifted > alpha {
                            log::warn!("lambda_max(M^-1 H) = {lambda:.6} exceeds 3; scaling by {lifted:.6} instead");
                            alpha = lifted;
                        }
                        ratio = Some(lambda);
                    }
                    Err(e) => log::warn!("factor-3 guard skipped: {e}"),
                }
            }
            Ok(unscaled.with_alpha(
                alpha,
                Certification {
                    method: CertMethod::Factor3,
                    certified: true,
                    ratio_estimate: ratio,
                },
            ))
        }
    }
}

/// Marker returned by [`duality_gap`] for an infeasible `d`.
pub const INFEASIBLE_GAP: f64 = f64::INFINITY;

/// `J(d) - L(x)` with `J(d) = 1/2 sum_k w_k d_k^2`, or `+inf` when `K^H diag(d) K - H`
/// has a negative eigenvalue (dense check).
pub fn duality_gap(p: &DesignProblem, d: &[f64], x: &ComplexVector) -> Result<f64> {
    let m = MajorizerSpec::new(p.k.clone(), d.to_vec(), 1.0, Certification::uncertified())?;
    let v = verify_majorization(&m, &p.h, VerifyMode::Dense)?;
    if !v.holds {
        return Ok(INFEASIBLE_GAP);
    }
    Ok(primal_value(p, d) - dual_value(p, x)?)
}

/// `J(d) = 1/2 sum_k w_k d_k^2`.
pub fn primal_value(p: &DesignProblem, d: &[f64]) -> f64 {
    0.5 * d.iter().zip(p.w.values()).map(|(d, w)| w * d * d).sum::<f64>()
}

/// Dense Hessian of `L` at `x` over the real coordinates `(Re x, Im x)`.
///
/// Used by tests to confirm a local maximum before invoking the factor-3 bound.
pub fn dual_hessian_real(p: &DesignProblem, x: &ComplexVector, h_step: f64) -> Result<nalgebra::DMatrix<f64>> {
    let n = p.dim();
    let mut out = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
    for j in 0..2 * n {
        let mut e = ComplexVector::zeros(n);
        e[j % n] = if j < n { C64::new(h_step, 0.0) } else { C64::new(0.0, h_step) };
        let gp = dual_gradient(p, &(x + &e))?;
        let gm = dual_gradient(p, &(x - &e))?;
        for i in 0..n {
            let diff = (gp[i] - gm[i]) / (2.0 * h_step);
            out[(i, j)] = diff.re;
            out[(i + n, j)] = diff.im;
        }
    }
    Ok((&out + out.transpose()) * 0.5)
}
