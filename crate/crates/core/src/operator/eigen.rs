use nalgebra::{DMatrix, SymmetricEigen};

use super::{dot, norm_sq, random_unit_vector, ComplexMatrix, ComplexVector, HermitianMap, C64, ZERO};
use crate::error::{Error, Result};

/// Outcome of [`power_iteration`].
#[derive(Clone, Debug)]
pub struct PowerEstimate {
    /// Rayleigh quotient of `vector`; never exceeds the true largest eigenvalue.
    pub value: f64,
    pub vector: ComplexVector,
    /// `||H v - value v|| / |value|` for the returned vector.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a PSD Hermitian map by power iteration.
///
/// The start vector is a seeded unit complex Gaussian. If it lands in the null
/// space it is redrawn from the next seed. The loop stops once the relative
/// residual drops to `tol` or after `max_iters` products; non-convergence is
/// flagged and the best estimate so far is returned.
pub fn power_iteration(h: &dyn HermitianMap, tol: f64, max_iters: usize, seed: u64) -> Result<PowerEstimate> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::InvalidInput("power iteration on an empty operator".into()));
    }
    let mut v = random_unit_vector(n, seed);
    let mut hv = vec![ZERO; n];
    h.apply_into(v.as_slice(), &mut hv);
    let mut redraws = 0;
    while norm_sq(&hv) == 0.0 && redraws < 3 {
        redraws += 1;
        v = random_unit_vector(n, seed.wrapping_add(redraws));
        h.apply_into(v.as_slice(), &mut hv);
    }
    if norm_sq(&hv) == 0.0 {
        return Ok(PowerEstimate {
            value: 0.0,
            vector: v,
            residual: 0.0,
            iterations: 1,
            converged: true,
        });
    }

    let mut best: Option<PowerEstimate> = None;
    for iter in 1..=max_iters.max(1) {
        let value = dot(v.as_slice(), &hv).re;
        let resid: f64 = v
            .iter()
            .zip(&hv)
            .map(|(a, b)| (b - a * value).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let residual = resid / value.abs().max(f64::MIN_POSITIVE);
        let converged = residual <= tol;
        if best.as_ref().is_none_or(|b| value > b.value) || converged {
            best = Some(PowerEstimate {
                value,
                vector: v.clone(),
                residual,
                iterations: iter,
                converged,
            });
        }
        if converged {
            break;
        }
        let norm = norm_sq(&hv).sqrt();
        for (vi, hi) in v.iter_mut().zip(&hv) {
            *vi = hi / norm;
        }
        h.apply_into(v.as_slice(), &mut hv);
    }
    let mut out = best.expect("at least one iteration runs");
    if !out.converged {
        log::warn!(
            "power iteration stopped at {} iterations with residual {:.3e}",
            max_iters,
            out.residual
        );
    }
    out.iterations = out.iterations.max(1);
    Ok(out)
}

/// Extremal Ritz values from a Lanczos run with full reorthogonalization.
#[derive(Clone, Debug)]
pub struct LanczosEstimate {
    pub min: f64,
    pub max: f64,
    /// Residual norm `|beta_m s_m|` of the smallest Ritz pair.
    pub min_residual: f64,
    pub max_residual: f64,
    pub steps: usize,
}

pub fn lanczos_extremes(h: &dyn HermitianMap, max_steps: usize, seed: u64) -> Result<LanczosEstimate> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::InvalidInput("Lanczos on an empty operator".into()));
    }
    let m = max_steps.clamp(1, n);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut alphas = Vec::with_capacity(m);
    let mut betas: Vec<f64> = Vec::with_capacity(m);
    let mut q = random_unit_vector(n, seed).as_slice().to_vec();
    let mut w = vec![ZERO; n];
    let mut last_beta = 0.0;

    for j in 0..m {
        h.apply_into(&q, &mut w);
        let alpha = dot(&q, &w).re;
        alphas.push(alpha);
        basis.push(q.clone());
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= bi * c);
            }
        }
        let beta = norm_sq(&w).sqrt();
        last_beta = beta;
        let scale = alphas.iter().map(|a: &f64| a.abs()).fold(0.0, f64::max).max(1e-300);
        if j + 1 == m || beta <= 1e-14 * scale {
            break;
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
    }

    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (mut imin, mut imax) = (0, 0);
    for i in 0..k {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let resid = |i: usize| (last_beta * eig.eigenvectors[(k - 1, i)]).abs();
    Ok(LanczosEstimate {
        min: eig.eigenvalues[imin],
        max: eig.eigenvalues[imax],
        min_residual: resid(imin),
        max_residual: resid(imax),
        steps: k,
    })
}

/// All eigenvalues of a dense Hermitian matrix, ascending.
///
/// The input is symmetrized first; purely real input takes a real solver.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::InvalidInput("eigenvalues need a nonempty square matrix".into()));
    }
    let mut values: Vec<f64> = if m.iter().all(|z| z.im == 0.0) {
        let real = DMatrix::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
        real.symmetric_eigenvalues().iter().copied().collect()
    } else {
        let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}
