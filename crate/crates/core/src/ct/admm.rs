use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::FftPlanner;

use crate::error::{check_len, Error, Result};
use crate::majorizer::{verify_majorization, MajorizerSpec, Verification, VerifyMode};
use crate::operator::{gram, DiagonalWeights, HermitianMap, HermitianOperator, LinearOperator, C64, ZERO};

use super::Projector;

/// Edge-preserving roughness penalty on horizontal and vertical neighbor
/// differences with the hyperbola potential
/// `psi(t) = delta^2 (sqrt(1 + (t / delta)^2) - 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularizer {
    pub delta: f64,
    pub strength: f64,
}

impl Regularizer {
    pub fn new(delta: f64, strength: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("regularizer delta must be positive, got {delta}")));
        }
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(Error::InvalidInput(format!("regularizer strength must be nonnegative, got {strength}")));
        }
        Ok(Self { delta, strength })
    }

    /// No penalty at all.
    pub fn off() -> Self {
        Self {
            delta: 1.0,
            strength: 0.0,
        }
    }

    pub fn value(&self, n: usize, x: &[f64]) -> f64 {
        self.value_grad(n, x).0
    }

    pub fn value_grad(&self, n: usize, x: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; x.len()];
        if self.strength == 0.0 {
            return (0.0, grad);
        }
        let dz = differences(n, x);
        let d = self.delta;
        let mut value = 0.0;
        let mut dpsi = vec![0.0; dz.len()];
        for (t, g) in dz.iter().zip(dpsi.iter_mut()) {
            let root = (1.0 + (t / d).powi(2)).sqrt();
            // d^2 (root - 1) without the cancellation for small t
            value += t * t / (root + 1.0);
            *g = self.strength * t / root;
        }
        differences_adjoint(n, &dpsi, &mut grad);
        (self.strength * value, grad)
    }

    /// `strength D^T D v`, a curvature bound for the penalty since `psi'' <= 1`.
    pub fn curvature_apply(&self, n: usize, v: &[f64], out: &mut [f64]) {
        if self.strength == 0.0 {
            out.fill(0.0);
            return;
        }
        let mut dz = differences(n, v);
        dz.iter_mut().for_each(|t| *t *= self.strength);
        differences_adjoint(n, &dz, out);
    }
}

/// Horizontal differences `x[r][c+1] - x[r][c]` followed by vertical ones `x[r+1][c] - x[r][c]`.
pub fn differences(n: usize, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * n * n.saturating_sub(1));
    for r in 0..n {
        for c in 0..n.saturating_sub(1) {
            out.push(x[r * n + c + 1] - x[r * n + c]);
        }
    }
    for r in 0..n.saturating_sub(1) {
        for c in 0..n {
            out.push(x[(r + 1) * n + c] - x[r * n + c]);
        }
    }
    out
}

pub fn differences_adjoint(n: usize, z: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    let m = n.saturating_sub(1);
    let (horiz, vert) = z.split_at(n * m);
    for r in 0..n {
        for c in 0..m {
            let t = horiz[r * m + c];
            out[r * n + c + 1] += t;
            out[r * n + c] -= t;
        }
    }
    for r in 0..m {
        for c in 0..n {
            let t = vert[r * n + c];
            out[(r + 1) * n + c] += t;
            out[r * n + c] -= t;
        }
    }
}

/// Penalized weighted least squares `1/2 ||Ax - y||_W^2 + R(x)`.
#[derive(Clone, Debug)]
pub struct CtProblem {
    pub projector: Arc<Projector>,
    pub y: Vec<f64>,
    pub w: DiagonalWeights,
    pub reg: Regularizer,
}

impl CtProblem {
    pub fn new(projector: Arc<Projector>, y: Vec<f64>, w: DiagonalWeights, reg: Regularizer) -> Result<Self> {
        check_len("sinogram", projector.rows(), y.len())?;
        check_len("statistical weights", projector.rows(), w.len())?;
        if w.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput("statistical weights must be positive".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sinogram has non-finite entries".into()));
        }
        Ok(Self { projector, y, w, reg })
    }

    pub fn n(&self) -> usize {
        self.projector.geometry().n
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.projector.rows()];
        self.projector.forward_real(x, &mut out).expect("image length");
        out
    }

    pub fn back(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.projector.cols()];
        self.projector.back_real(y, &mut out).expect("sinogram length");
        out
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        let ax = self.forward(x);
        let data: f64 = ax
            .iter()
            .zip(&self.y)
            .zip(self.w.values())
            .map(|((a, y), w)| w * (a - y).powi(2))
            .sum();
        0.5 * data + self.reg.value(self.n(), x)
    }

    /// Median of the statistical weights (mean of the middle pair for even counts).
    pub fn gamma(&self) -> f64 {
        let mut v = self.w.values().to_vec();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        }
    }

    /// `gamma A^T A`, the quadratic term every x-update majorizer must dominate.
    pub fn split_hessian(&self, gamma: f64) -> Result<HermitianOperator> {
        let a = LinearOperator::projector(self.projector.clone());
        gram(&a, &DiagonalWeights::uniform(self.projector.rows(), gamma)?)
    }
}

/// Iterates of the split `u = Ax` with scaled dual `e`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub gamma: f64,
}

impl AdmmState {
    /// `u = A x0`, `e = 0`.
    pub fn new(prob: &CtProblem, x0: Vec<f64>, gamma: f64) -> Result<Self> {
        check_len("initial image", prob.projector.cols(), x0.len())?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("ADMM penalty must be positive, got {gamma}")));
        }
        let u = prob.forward(&x0);
        let e = vec![0.0; u.len()];
        Ok(Self { x: x0, u, e, gamma })
    }
}

/// `u_i = (w_i y_i + gamma (Ax + e)_i) / (w_i + gamma)`.
pub fn admm_u_update(ax: &[f64], e: &[f64], y: &[f64], w: &[f64], gamma: f64) -> Vec<f64> {
    ax.iter()
        .zip(e)
        .zip(y.iter().zip(w))
        .map(|((a, e), (y, w))| (w * y + gamma * (a + e)) / (w + gamma))
        .collect()
}

/// `e + Ax - u`.
pub fn admm_dual_update(e: &[f64], ax_new: &[f64], u_new: &[f64]) -> Vec<f64> {
    e.iter().zip(ax_new).zip(u_new).map(|((e, a), u)| e + a - u).collect()
}

/// Outcome of one majorized x-update.
#[derive(Clone, Debug)]
pub struct XUpdate {
    pub x: Vec<f64>,
    /// Surrogate at the previous image; equals `R(x_prev)`.
    pub surrogate_start: f64,
    pub surrogate_end: f64,
    /// Quadratic model value after each CG step, starting with 0.
    pub model_trace: Vec<f64>,
}

fn apply_real(m: &dyn HermitianMap, v: &[f64], out: &mut [f64], buf_in: &mut [C64], buf_out: &mut [C64]) {
    for (b, &x) in buf_in.iter_mut().zip(v) {
        *b = C64::new(x, 0.0);
    }
    m.apply_into(buf_in, buf_out);
    for (o, z) in out.iter_mut().zip(buf_out.iter()) {
        *o = z.re;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Descends `S(x) = 1/2 ||x - xn||_M^2 + (x - xn)^T gamma A^T (A xn - u + e) + R(x)`.
///
/// CG runs `cg_iters` steps from `x = xn` on the model where `R` is replaced by
/// its quadratic upper bound with curvature `strength D^T D`. Any increase of
/// the model or of `S` itself means `M` (or the curvature bound) is not a
/// majorizer and is reported as [`Error::MajorizationViolated`].
pub fn admm_x_update(
    prob: &CtProblem,
    state: &AdmmState,
    m: &dyn HermitianMap,
    u_new: &[f64],
    cg_iters: usize,
) -> Result<XUpdate> {
    let n = prob.n();
    let np = prob.projector.cols();
    check_len("majorizer dimension", np, m.dim())?;
    check_len("split variable", prob.projector.rows(), u_new.len())?;

    let ax = prob.forward(&state.x);
    let resid: Vec<f64> = ax
        .iter()
        .zip(u_new)
        .zip(&state.e)
        .map(|((a, u), e)| state.gamma * (a - u + e))
        .collect();
    let lin = prob.back(&resid);
    let (r_start, grad_r) = prob.reg.value_grad(n, &state.x);

    let mut buf_in = vec![ZERO; np];
    let mut buf_out = vec![ZERO; np];
    let mut tmp = vec![0.0; np];
    let mut system = |v: &[f64], out: &mut [f64], buf_in: &mut [C64], buf_out: &mut [C64]| {
        apply_real(m, v, out, buf_in, buf_out);
        prob.reg.curvature_apply(n, v, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    };

    // Solve (M + strength D^T D) step = b with b = -(gradient of S at xn).
    let b: Vec<f64> = lin.iter().zip(&grad_r).map(|(l, g)| -(l + g)).collect();
    let mut step = vec![0.0; np];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; np];
    let mut model_trace: Vec<f64> = vec![0.0];
    let model = |step: &[f64], r: &[f64]| -0.5 * step.iter().zip(b.iter().zip(r)).map(|(s, (b, r))| s * (b + r)).sum::<f64>();
    for _ in 0..cg_iters {
        if rr == 0.0 {
            break;
        }
        system(&p, &mut ap, &mut buf_in, &mut buf_out);
        let curv = dot(&p, &ap);
        if curv <= 0.0 {
            return Err(Error::MajorizationViolated(format!(
                "x-update system has nonpositive curvature {curv:e}"
            )));
        }
        let a = rr / curv;
        step.iter_mut().zip(&p).for_each(|(s, p)| *s += a * p);
        r.iter_mut().zip(&ap).for_each(|(r, q)| *r -= a * q);
        let rr_new = dot(&r, &r);
        p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + rr_new / rr * *p);
        rr = rr_new;
        let q = model(&step, &r);
        let prev = *model_trace.last().expect("nonempty");
        if q > prev + 1e-10 * prev.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::MajorizationViolated(format!("CG model rose from {prev:e} to {q:e}")));
        }
        model_trace.push(q);
    }

    let x: Vec<f64> = state.x.iter().zip(&step).map(|(x, s)| x + s).collect();
    let mut m_step = vec![0.0; np];
    apply_real(m, &step, &mut m_step, &mut buf_in, &mut buf_out);
    let quad = 0.5 * dot(&step, &m_step);
    let linear = dot(&step, &lin);
    let r_end = prob.reg.value(n, &x);
    let surrogate_end = quad + linear + r_end;
    let scale = r_start.abs() + quad.abs() + linear.abs() + r_end.abs();
    if surrogate_end > r_start + 1e-10 * scale {
        return Err(Error::MajorizationViolated(format!(
            "x-update surrogate rose from {r_start:e} to {surrogate_end:e}"
        )));
    }
    Ok(XUpdate {
        x,
        surrogate_start: r_start,
        surrogate_end,
        model_trace,
    })
}

/// Filtered back-projection with a Hann-apodized ramp, each view zero-padded to
/// twice the channel count.
pub fn fbp(projector: &Projector, sinogram: &[f64]) -> Result<Vec<f64>> {
    check_len("sinogram", projector.rows(), sinogram.len())?;
    let g = projector.geometry();
    let (nv, nc) = (g.n_views, g.n_channels);
    let nf = 2 * nc;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nf);
    let inv = planner.plan_fft_inverse(nf);
    let filter: Vec<f64> = (0..nf)
        .map(|k| {
            let f = if k < nf.div_ceil(2) { k as f64 } else { k as f64 - nf as f64 } / nf as f64;
            f.abs() * (0.5 + 0.5 * (2.0 * std::f64::consts::PI * f).cos())
        })
        .collect();
    let mut filtered = vec![0.0; sinogram.len()];
    let mut buf = vec![ZERO; nf];
    for v in 0..nv {
        buf.fill(ZERO);
        for (b, &s) in buf.iter_mut().zip(&sinogram[v * nc..(v + 1) * nc]) {
            *b = C64::new(s, 0.0);
        }
        fwd.process(&mut buf);
        buf.iter_mut().zip(&filter).for_each(|(b, f)| *b *= f / nf as f64);
        inv.process(&mut buf);
        for (o, b) in filtered[v * nc..(v + 1) * nc].iter_mut().zip(&buf) {
            *o = b.re;
        }
    }
    let mut x = vec![0.0; projector.cols()];
    projector.back_real(&filtered, &mut x)?;
    let scale = std::f64::consts::PI / (nv as f64 * g.pixel_size * g.pixel_size);
    x.iter_mut().for_each(|v| *v *= scale);
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CtTraceRecord {
    pub iter: usize,
    pub cost: f64,
    /// `||Ax - u||` after the iteration; zero at `iter = 0`.
    pub consensus: f64,
    /// `S(x_prev) - S(x_new)` of the x-update; zero at `iter = 0`.
    pub surrogate_decrease: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CtTrace {
    pub records: Vec<CtTraceRecord>,
}

impl CtTrace {
    /// CSV with header `iter,cost,consensus_residual,surrogate_decrease`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,cost,consensus_residual,surrogate_decrease\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:.17e},{:.17e},{:.17e}", r.iter, r.cost, r.consensus, r.surrogate_decrease);
        }
        out
    }

    pub fn last(&self) -> Option<&CtTraceRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug)]
pub struct AdmmOptions {
    pub outer_iters: usize,
    pub cg_iters: usize,
    /// Initial image; filtered back-projection of `y` when absent.
    pub x0: Option<Vec<f64>>,
    /// Penalty; the median weight when absent.
    pub gamma: Option<f64>,
    pub verify: VerifyMode,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            outer_iters: 64,
            cg_iters: 5,
            x0: None,
            gamma: None,
            verify: VerifyMode::Lanczos,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub image: Vec<f64>,
    pub trace: CtTrace,
    pub verification: Verification,
    pub gamma: f64,
}

/// ADMM on the split `u = Ax` with majorized x-updates.
///
/// `m` must be certified and must pass [`verify_majorization`] against
/// `gamma A^T A` before the first iteration.
pub fn ct_reconstruct(prob: &CtProblem, m: &MajorizerSpec, opts: &AdmmOptions) -> Result<Reconstruction> {
    if !m.certification.certified {
        return Err(Error::InvalidInput("reconstruction needs a certified majorizer".into()));
    }
    let gamma = opts.gamma.unwrap_or_else(|| prob.gamma());
    let h = prob.split_hessian(gamma)?;
    let verification = verify_majorization(m, &h, opts.verify)?;
    if !verification.holds {
        return Err(Error::MajorizationViolated(format!(
            "majorizer fails against gamma A^T A: min eigenvalue {:e}",
            verification.min_eig
        )));
    }
    let x0 = match &opts.x0 {
        Some(x) => x.clone(),
        None => fbp(&prob.projector, &prob.y)?,
    };
    let mut state = AdmmState::new(prob, x0, gamma)?;
    let mut trace = CtTrace::default();
    trace.records.push(CtTraceRecord {
        iter: 0,
        cost: prob.cost(&state.x),
        consensus: 0.0,
        surrogate_decrease: 0.0,
    });
    let mut prev_cost = trace.records[0].cost;
    for iter in 1..=opts.outer_iters {
        let ax = prob.forward(&state.x);
        let u = admm_u_update(&ax, &state.e, &prob.y, prob.w.values(), gamma);
        let step = admm_x_update(prob, &state, m, &u, opts.cg_iters)?;
        let ax_new = prob.forward(&step.x);
        state.e = admm_dual_update(&state.e, &ax_new, &u);
        state.x = step.x;
        state.u = u;
        let consensus = ax_new.iter().zip(&state.u).map(|(a, u)| (a - u).powi(2)).sum::<f64>().sqrt();
        let cost = prob.cost(&state.x);
        if cost > prev_cost {
            log::debug!("ADMM cost rose at iteration {iter}: {prev_cost:e} -> {cost:e}");
        }
        prev_cost = cost;
        trace.records.push(CtTraceRecord {
            iter,
            cost,
            consensus,
            surrogate_decrease: step.surrogate_start - step.surrogate_end,
        });
    }
    Ok(Reconstruction {
        image: state.x,
        trace,
        verification,
        gamma,
    })
}
