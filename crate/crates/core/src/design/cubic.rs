use crate::error::{Error, Result};

/// Real roots of `c3 a^3 + c2 a^2 + c1 a + c0`, ascending and deduplicated.
///
/// A zero leading coefficient drops the degree (cubic to quadratic to linear),
/// as does one so small that dividing by it overflows. Each root is
/// Newton-polished and checked against `|p(a)| <= 1e-8 max|c| (1 + |a|^3)`.
pub fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Result<Vec<f64>> {
    let coeffs = [c3, c2, c1, c0];
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("cubic coefficient is not finite".into()));
    }
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Err(Error::DegeneratePolynomial);
    }
    let [a, b, c, d] = coeffs.map(|v| v / scale);
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    let mut roots = if a != 0.0 && finite(&[b / a, c / a, d / a]) {
        monic_cubic_roots(b / a, c / a, d / a)
    } else if b != 0.0 && finite(&[c / b, d / b]) {
        quadratic_roots(b, c, d)
    } else if c != 0.0 {
        vec![-d / c]
    } else {
        // Only a constant is left: no stationary point.
        Vec::new()
    };

    let p = |x: f64| ((a * x + b) * x + c) * x + d;
    let dp = |x: f64| (3.0 * a * x + 2.0 * b) * x + c;
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let slope = dp(*r);
            if slope == 0.0 {
                break;
            }
            let next = *r - p(*r) / slope;
            if !next.is_finite() || p(next).abs() >= p(*r).abs() {
                break;
            }
            *r = next;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    for &r in &roots {
        let resid = p(r).abs();
        if resid > 1e-8 * (1.0 + r.abs().powi(3)) {
            log::warn!("cubic root {r:e} has residual {resid:e}");
        }
    }
    Ok(roots)
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    // Cancellation-free form.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Roots of `x^3 + b x^2 + c x + d`, solved after substituting `x = s t` with `s`
/// the size of the roots so the classification tolerances are scale-free.
fn monic_cubic_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let s = b.abs().max(c.abs().sqrt()).max(d.abs().cbrt());
    if s == 0.0 {
        return vec![0.0];
    }
    unit_cubic_roots(b / s, c / (s * s), d / (s * s * s))
        .into_iter()
        .map(|t| t * s)
        .collect()
}

/// Roots of the monic cubic `x^3 + b x^2 + c x + d` with coefficients of order one.
fn unit_cubic_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let tiny = 1e-14 * (q.abs() + p.abs().powf(1.5)).powi(2).max(f64::MIN_POSITIVE);
    if disc > tiny {
        let s = disc.sqrt();
        let t = (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt();
        vec![t - shift]
    } else if disc >= -tiny && p.abs() <= 1e-12 {
        vec![-shift]
    } else {
        let p = p.min(0.0);
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = if p == 0.0 { 0.0 } else { (3.0 * q / (p * m)).clamp(-1.0, 1.0) };
        let theta = arg.acos() / 3.0;
        (0..3).map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos() - shift).collect()
    }
}
