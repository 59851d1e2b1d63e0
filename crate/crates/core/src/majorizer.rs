//! `M = alpha K^H diag(d) K` and the reference majorizers built without design.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operator::{
    hermitian_eigenvalues, lanczos_extremes, materialize_hermitian, power_iteration, Circulant, ComplexMatrix,
    Difference, FnHermitian, HermitianMap, HermitianOperator, LinearOperator, C64, DEFAULT_MATERIALIZE_CAP, ZERO,
};
use crate::solvers::{solve_m, SolveOptions};

/// Smallest scaling ever stored, so a majorizer never collapses to zero.
pub const MIN_ALPHA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertMethod {
    /// Majorization follows from a closed-form argument (SQS, Lipschitz).
    Analytic,
    /// `alpha` is an inflated power-iteration estimate of `lambda_max(M^-1 H)`.
    PowerIteration,
    /// `alpha = 3` from the local-maximum Hessian bound, possibly raised by a guard.
    Factor3,
    None,
}

impl CertMethod {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::PowerIteration => "power-iteration",
            Self::Factor3 => "factor-3",
            Self::None => "none",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "analytic" => Ok(Self::Analytic),
            "power-iteration" => Ok(Self::PowerIteration),
            "factor-3" => Ok(Self::Factor3),
            "none" => Ok(Self::None),
            other => Err(Error::Parse(format!("unknown certification tag '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certification {
    pub method: CertMethod,
    pub certified: bool,
    /// Estimate of `lambda_max(M0^-1 H)` for the unscaled matrix, when computed.
    pub ratio_estimate: Option<f64>,
}

impl Certification {
    pub fn analytic() -> Self {
        Self {
            method: CertMethod::Analytic,
            certified: true,
            ratio_estimate: None,
        }
    }

    pub fn uncertified() -> Self {
        Self {
            method: CertMethod::None,
            certified: false,
            ratio_estimate: None,
        }
    }
}

/// How `M` can be inverted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    /// `K` is the identity or a diagonal: `M` is diagonal.
    Diagonal,
    /// `K` is a unitary DFT: `M` is (block-)circulant.
    Unitary,
    /// Anything else; solved iteratively.
    General,
}

/// `M = alpha K^H diag(d) K` with `d >= 0`.
#[derive(Clone)]
pub struct MajorizerSpec {
    k: LinearOperator,
    d: Arc<Vec<f64>>,
    alpha: f64,
    pub certification: Certification,
}

impl fmt::Debug for MajorizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MajorizerSpec")
            .field("k", &self.k)
            .field("alpha", &self.alpha)
            .field("certification", &self.certification)
            .finish()
    }
}

impl MajorizerSpec {
    pub fn new(k: LinearOperator, d: Vec<f64>, alpha: f64, certification: Certification) -> Result<Self> {
        check_len("majorizer diagonal", k.rows(), d.len())?;
        if let Some((i, v)) = d.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("majorizer entry d[{i}] = {v} is negative or not finite")));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidInput(format!("alpha = {alpha} must be finite and nonnegative")));
        }
        Ok(Self {
            k,
            d: Arc::new(d),
            alpha: alpha.max(MIN_ALPHA),
            certification,
        })
    }

    /// Diagonal majorizer `diag(d)` with `K = I` and `alpha = 1`.
    pub fn diagonal(d: Vec<f64>, certification: Certification) -> Result<Self> {
        let k = LinearOperator::identity(d.len())?;
        Self::new(k, d, 1.0, certification)
    }

    pub fn k(&self) -> &LinearOperator {
        &self.k
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.k.cols()
    }

    pub fn with_alpha(&self, alpha: f64, certification: Certification) -> Self {
        Self {
            alpha: alpha.max(MIN_ALPHA),
            certification,
            ..self.clone()
        }
    }

    pub fn structure(&self) -> Structure {
        match &self.k {
            LinearOperator::Identity(_) | LinearOperator::Diagonal(_) => Structure::Diagonal,
            LinearOperator::Dft(_) => Structure::Unitary,
            _ => Structure::General,
        }
    }

    /// The effective diagonal `alpha |k|^2 d` when `M` is diagonal.
    pub fn diagonal_entries(&self) -> Option<Vec<f64>> {
        match &self.k {
            LinearOperator::Identity(_) => Some(self.d.iter().map(|v| self.alpha * v).collect()),
            LinearOperator::Diagonal(k) => {
                Some(k.iter().zip(self.d.iter()).map(|(k, v)| self.alpha * k.norm_sqr() * v).collect())
            }
            _ => None,
        }
    }

    pub fn materialize(&self) -> Result<ComplexMatrix> {
        materialize_hermitian(self, DEFAULT_MATERIALIZE_CAP)
    }

    /// Applies `M^{-1/2}` for diagonal or unitary structure.
    fn apply_inv_sqrt(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        if self.d.iter().any(|&v| v <= 0.0) {
            return Err(Error::Singular("majorizer diagonal has a nonpositive entry".into()));
        }
        match (&self.k, self.structure()) {
            (_, Structure::Diagonal) => {
                let diag = self.diagonal_entries().expect("diagonal structure");
                if diag.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Singular("diagonal majorizer has a zero entry".into()));
                }
                for ((yi, xi), di) in y.iter_mut().zip(x).zip(&diag) {
                    *yi = xi / di.sqrt();
                }
                Ok(())
            }
            (LinearOperator::Dft(f), Structure::Unitary) => {
                let mut tmp = vec![ZERO; x.len()];
                f.forward_into(x, &mut tmp);
                for (t, di) in tmp.iter_mut().zip(self.d.iter()) {
                    *t /= (self.alpha * di).sqrt();
                }
                f.inverse_into(&tmp, y);
                Ok(())
            }
            _ => Err(Error::InvalidInput("inverse square root needs diagonal or unitary K".into())),
        }
    }
}

impl HermitianMap for MajorizerSpec {
    fn dim(&self) -> usize {
        self.k.cols()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let mut kx = vec![ZERO; self.k.rows()];
        self.k.apply_into(x, &mut kx);
        for (v, d) in kx.iter_mut().zip(self.d.iter()) {
            *v *= self.alpha * d;
        }
        self.k.adjoint_into(&kx, y);
    }
}

/// Estimate of `lambda_max(M^{-1} H)` for a nonsingular majorizer.
#[derive(Clone, Debug)]
pub struct RatioEstimate {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Options for [`ratio_lambda_max`].
#[derive(Clone, Copy, Debug)]
pub struct RatioOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Inner solves for general structure.
    pub solve: SolveOptions,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 20_000,
            seed: 0,
            solve: SolveOptions {
                max_iters: 1000,
                tol: 1e-11,
            },
        }
    }
}

/// `lambda_max(M^{-1} H)`.
///
/// Diagonal and unitary `M` use power iteration on `M^{-1/2} H M^{-1/2}`. Any
/// other structure runs power iteration on `M^{-1} H` with preconditioned CG
/// solves and reports the generalized Rayleigh quotient `v^H H v / v^H M v`.
pub fn ratio_lambda_max(m: &MajorizerSpec, h: &dyn HermitianMap, opts: RatioOptions) -> Result<RatioEstimate> {
    check_len("majorizer vs H dimension", m.dim(), h.dim())?;
    let n = m.dim();
    if m.structure() != Structure::General {
        // Checks singularity up front so the closure below cannot fail.
        let mut probe = vec![ZERO; n];
        m.apply_inv_sqrt(&vec![ZERO; n], &mut probe)?;
        let sym = FnHermitian::new(n, |x: &[C64], y: &mut [C64]| {
            let mut a = vec![ZERO; x.len()];
            let mut b = vec![ZERO; x.len()];
            m.apply_inv_sqrt(x, &mut a).expect("checked nonsingular");
            h.apply_into(&a, &mut b);
            m.apply_inv_sqrt(&b, y).expect("checked nonsingular");
        });
        let est = power_iteration(&sym, opts.tol, opts.max_iters, opts.seed)?;
        return Ok(RatioEstimate {
            value: est.value,
            residual: est.residual,
            iterations: est.iterations,
            converged: est.converged,
        });
    }

    let mut v = crate::operator::random_unit_vector(n, opts.seed);
    let mut hv = h.apply_vec(&v)?;
    let mut best = RatioEstimate {
        value: 0.0,
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    let mut warm: Option<crate::operator::ComplexVector> = None;
    for iter in 1..=opts.max_iters.max(1) {
        let mv = m.apply_vec(&v)?;
        let vhv = v.dotc(&hv).re;
        let vmv = v.dotc(&mv).re;
        if vmv <= 0.0 {
            return Err(Error::Singular("majorizer is not positive definite on the iterate".into()));
        }
        let value = vhv / vmv;
        let resid = (&hv - &mv * C64::new(value, 0.0)).norm() / hv.norm().max(f64::MIN_POSITIVE);
        let converged = resid <= opts.tol;
        if value > best.value || converged {
            best = RatioEstimate {
                value,
                residual: resid,
                iterations: iter,
                converged,
            };
        }
        if converged || hv.norm() == 0.0 {
            best.converged = true;
            break;
        }
        let solved = solve_m(m, &hv, warm.as_ref(), opts.solve)?;
        let z = solved.x;
        let norm = z.norm();
        if norm == 0.0 {
            break;
        }
        warm = Some(&z * C64::new(1.0 / norm, 0.0) * C64::new(value, 0.0));
        v = z / C64::new(norm, 0.0);
        hv = h.apply_vec(&v)?;
    }
    if !best.converged {
        log::warn!(
            "generalized power iteration did not converge (residual {:.3e} after {} iterations)",
            best.residual,
            opts.max_iters
        );
    }
    Ok(best)
}

/// `lambda_max(H) I`, inflated by `(1 + tol)`; the inflation doubles when power iteration stalls.
pub fn lipschitz_majorizer(h: &dyn HermitianMap, tol: f64, seed: u64) -> Result<MajorizerSpec> {
    let est = power_iteration(h, 1e-9, 50_000, seed)?;
    let inflation = if est.converged { tol } else { 2.0 * tol };
    let lambda = est.value.max(0.0) * (1.0 + inflation);
    MajorizerSpec::diagonal(vec![lambda; h.dim()], Certification::analytic())
}

/// Separable quadratic surrogate `diag(|H| 1)`.
///
/// With `nonnegative_hint` the diagonal is `H 1` from a single product; a sample
/// of columns is probed and any negative or complex entry found is an error.
/// Without the hint every column is probed (`N` products).
pub fn sqs_majorizer(h: &HermitianOperator, nonnegative_hint: bool) -> Result<MajorizerSpec> {
    let n = h.dim();
    let d = match h {
        HermitianOperator::Diagonal(v) => v.iter().map(|x| x.abs()).collect(),
        HermitianOperator::Dense(m) => {
            if nonnegative_hint {
                find_bad_entry(n, |j| m.column(j).iter().copied().collect(), (0..n).collect())?;
            }
            (0..n).map(|i| m.row(i).iter().map(|z| z.norm()).sum()).collect()
        }
        _ if nonnegative_hint => {
            let probes: Vec<usize> = if n <= 16 { (0..n).collect() } else { (0..16).map(|k| k * (n - 1) / 15).collect() };
            find_bad_entry(n, |j| column(h, j), probes)?;
            let ones = vec![C64::new(1.0, 0.0); n];
            let mut out = vec![ZERO; n];
            h.apply_into(&ones, &mut out);
            out.iter().map(|z| z.re.max(0.0)).collect()
        }
        _ => {
            // Column sums of |H| equal row sums by Hermitian symmetry.
            (0..n).map(|j| column(h, j).iter().map(|z| z.norm()).sum()).collect()
        }
    };
    MajorizerSpec::diagonal(d, Certification::analytic())
}

fn column(h: &dyn HermitianMap, j: usize) -> Vec<C64> {
    let mut e = vec![ZERO; h.dim()];
    e[j] = C64::new(1.0, 0.0);
    let mut out = vec![ZERO; h.dim()];
    h.apply_into(&e, &mut out);
    out
}

fn find_bad_entry(n: usize, col: impl Fn(usize) -> Vec<C64>, probes: Vec<usize>) -> Result<()> {
    for j in probes {
        let c = col(j);
        let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (i, z) in c.iter().enumerate().take(n) {
            if z.re < -1e-14 * scale || z.im.abs() > 1e-14 * scale {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: if z.re < 0.0 { z.re } else { -z.im.abs() },
                });
            }
        }
    }
    Ok(())
}

/// Frobenius-nearest circulant to a square matrix: wrapped-diagonal means.
pub fn best_circulant_approx(t: &ComplexMatrix) -> Result<LinearOperator> {
    let n = t.nrows();
    if n == 0 || t.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "circulant approximation needs a square matrix, got {}x{}",
            n,
            t.ncols()
        )));
    }
    let column: Vec<C64> = (0..n)
        .map(|k| (0..n).map(|j| t[((j + k) % n, j)]).sum::<C64>() / n as f64)
        .collect();
    LinearOperator::circulant(column)
}

/// Re-expresses a Hermitian circulant as `K = U_DFT`, `d = eigenvalues`, so it fits
/// the majorizer form. Small negative eigenvalues from roundoff are clipped to zero.
pub fn circulant_as_majorizer(c: &Circulant) -> Result<MajorizerSpec> {
    let n = c.len();
    let lambda_scale = c.eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut d = Vec::with_capacity(n);
    for (k, z) in c.eigenvalues().iter().enumerate() {
        if z.im.abs() > 1e-9 * lambda_scale.max(1e-300) {
            return Err(Error::InvalidInput(format!("circulant is not Hermitian (eigenvalue {k} = {z})")));
        }
        if z.re < -1e-9 * lambda_scale {
            return Err(Error::InvalidInput(format!("circulant has negative eigenvalue {}", z.re)));
        }
        d.push(z.re.max(0.0));
    }
    MajorizerSpec::new(LinearOperator::dft(n)?, d, 1.0, Certification::uncertified())
}

/// Sets `alpha = alpha0 (1 + tol) lambda_max(M0^{-1} H)`.
pub fn scale_to_majorize(m0: &MajorizerSpec, h: &dyn HermitianMap, tol: f64, seed: u64) -> Result<MajorizerSpec> {
    if let Some((k, v)) = m0.d().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        if m0.structure() != Structure::General {
            return Err(Error::Singular(format!("d[{k}] = {v} leaves M0 singular")));
        }
    }
    let est = ratio_lambda_max(
        m0,
        h,
        RatioOptions {
            seed,
            ..RatioOptions::default()
        },
    )?;
    let inflation = if est.converged { tol } else { 2.0 * tol };
    let alpha = m0.alpha() * est.value * (1.0 + inflation);
    Ok(m0.with_alpha(
        alpha,
        Certification {
            method: CertMethod::PowerIteration,
            certified: true,
            ratio_estimate: Some(est.value),
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    Dense,
    Lanczos,
}

#[derive(Clone, Debug)]
pub struct Verification {
    pub holds: bool,
    /// `lambda_min(M - H)`, exact (dense) or a Ritz estimate (Lanczos).
    pub min_eig: f64,
    pub lambda_max_h: f64,
    /// Ritz residual of the reported minimum; zero in dense mode.
    pub residual: f64,
}

/// Checks `lambda_min(M - H) >= -1e-8 lambda_max(H)`.
pub fn verify_majorization(m: &dyn HermitianMap, h: &dyn HermitianMap, mode: VerifyMode) -> Result<Verification> {
    check_len("majorizer vs H dimension", m.dim(), h.dim())?;
    let diff = Difference { plus: m, minus: h };
    let (min_eig, lambda_max_h, residual) = match mode {
        VerifyMode::Dense => {
            let mm = materialize_hermitian(m, DEFAULT_MATERIALIZE_CAP)?;
            let hm = materialize_hermitian(h, DEFAULT_MATERIALIZE_CAP)?;
            let ev = hermitian_eigenvalues(&(&mm - &hm))?;
            let eh = hermitian_eigenvalues(&hm)?;
            (ev[0], *eh.last().expect("nonempty"), 0.0)
        }
        VerifyMode::Lanczos => {
            let steps = h.dim().min(300);
            let est = lanczos_extremes(&diff, steps, 17)?;
            let eh = lanczos_extremes(h, steps.min(100), 18)?;
            (est.min, eh.max, est.min_residual)
        }
    };
    Ok(Verification {
        holds: min_eig >= -1e-8 * lambda_max_h.abs(),
        min_eig,
        lambda_max_h,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{random_complex_gaussian, real_vector};
    use proptest::prelude::*;

    fn h2(a: f64, b: f64) -> HermitianOperator {
        HermitianOperator::dense_real(2, &[a, b, b, a]).unwrap()
    }

    #[test]
    fn lipschitz_examples() {
        let m = lipschitz_majorizer(&HermitianOperator::diagonal(vec![1.0, 2.0, 3.0]).unwrap(), 1e-3, 1).unwrap();
        for &v in m.d() {
            assert!(v > 3.0 && v <= 3.0 * (1.0 + 2e-3) + 1e-12);
        }
        let m = lipschitz_majorizer(&h2(2.0, 1.0), 1e-3, 1).unwrap();
        assert!((m.d()[0] - 3.003).abs() < 1e-6);
    }

    #[test]
    fn sqs_examples() {
        assert_eq!(sqs_majorizer(&h2(2.0, 1.0), true).unwrap().d(), &[3.0, 3.0]);
        assert_eq!(sqs_majorizer(&HermitianOperator::identity(5).unwrap(), true).unwrap().d(), &[1.0; 5]);
        let h = h2(2.0, -1.0);
        let m = sqs_majorizer(&h, false).unwrap();
        assert_eq!(m.d(), &[3.0, 3.0]);
        let v = verify_majorization(&m, &h, VerifyMode::Dense).unwrap();
        assert!(v.holds && v.min_eig.abs() < 1e-12);
        assert!(matches!(sqs_majorizer(&h, true), Err(Error::NegativeEntry { .. })));
    }

    #[test]
    fn sqs_hint_probe_on_gram() {
        let a = LinearOperator::dense_real(2, 2, &[1.0, -1.0, 0.0, 1.0]).unwrap();
        let h = crate::operator::gram(&a, &crate::operator::DiagonalWeights::uniform(2, 1.0).unwrap()).unwrap();
        assert!(sqs_majorizer(&h, true).is_err());
        let general = sqs_majorizer(&h, false).unwrap();
        assert!(verify_majorization(&general, &h, VerifyMode::Dense).unwrap().holds);
    }

    #[test]
    fn circulant_examples() {
        let t = ComplexMatrix::from_diagonal(&real_vector(&[1.0, 2.0, 3.0]));
        let c = best_circulant_approx(&t).unwrap();
        let LinearOperator::Circulant(c) = c else { panic!() };
        assert!((c.first_column()[0] - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(c.first_column()[1].norm() < 1e-15 && c.first_column()[2].norm() < 1e-15);
        assert!(best_circulant_approx(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn circulant_is_a_projection() {
        let n = 8;
        let t = ComplexMatrix::from_iterator(n, n, random_complex_gaussian(n * n, 4).iter().copied());
        let c1 = best_circulant_approx(&t).unwrap().materialize().unwrap();
        let c2 = best_circulant_approx(&c1).unwrap().materialize().unwrap();
        assert!((&c1 - &c2).norm() < 1e-12);
        let resid = &t - &c1;
        for k in 0..n {
            let mut col = vec![ZERO; n];
            col[k] = C64::new(1.0, 0.0);
            let basis = LinearOperator::circulant(col).unwrap().materialize().unwrap();
            let inner: C64 = resid.iter().zip(basis.iter()).map(|(a, b)| a.conj() * b).sum();
            assert!(inner.norm() < 1e-12);
        }
    }

    #[test]
    fn scale_examples() {
        let h = HermitianOperator::diagonal(vec![0.5, 2.0]).unwrap();
        let m0 = MajorizerSpec::diagonal(vec![1.0, 1.0], Certification::uncertified()).unwrap();
        let m = scale_to_majorize(&m0, &h, 1e-3, 2).unwrap();
        assert!((m.alpha() - 2.0 * 1.001).abs() < 1e-9);

        let m0 = MajorizerSpec::diagonal(vec![2.0, 2.0], Certification::uncertified()).unwrap();
        let m = scale_to_majorize(&m0, &HermitianOperator::identity(2).unwrap(), 1e-3, 2).unwrap();
        assert!((m.alpha() - 0.5 * 1.001).abs() < 1e-9);

        let singular = MajorizerSpec::diagonal(vec![1.0, 0.0], Certification::uncertified()).unwrap();
        assert!(matches!(scale_to_majorize(&singular, &h, 1e-3, 2), Err(Error::Singular(_))));
    }

    #[test]
    fn verify_trivial_cases() {
        let i2 = HermitianOperator::identity(2).unwrap();
        let two = MajorizerSpec::diagonal(vec![2.0, 2.0], Certification::analytic()).unwrap();
        let v = verify_majorization(&two, &i2, VerifyMode::Dense).unwrap();
        assert!(v.holds && (v.min_eig - 1.0).abs() < 1e-12);
        let one = MajorizerSpec::diagonal(vec![1.0, 1.0], Certification::analytic()).unwrap();
        let h = HermitianOperator::diagonal(vec![2.0, 2.0]).unwrap();
        let v = verify_majorization(&one, &h, VerifyMode::Dense).unwrap();
        assert!(!v.holds && (v.min_eig + 1.0).abs() < 1e-12);
        let v = verify_majorization(&one, &h, VerifyMode::Lanczos).unwrap();
        assert!(!v.holds);
    }

    #[test]
    fn rejects_bad_diagonals() {
        let k = LinearOperator::identity(2).unwrap();
        assert!(MajorizerSpec::new(k.clone(), vec![1.0, -1.0], 1.0, Certification::analytic()).is_err());
        assert!(MajorizerSpec::new(k.clone(), vec![1.0], 1.0, Certification::analytic()).is_err());
        let m = MajorizerSpec::new(k, vec![1.0, 1.0], 0.0, Certification::analytic()).unwrap();
        assert_eq!(m.alpha(), MIN_ALPHA);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sqs_always_majorizes(n in 1usize..12, seed in 0u64..10_000) {
            let a = random_complex_gaussian(n * n, seed);
            let a = ComplexMatrix::from_iterator(n, n, a.iter().copied());
            let h = HermitianOperator::dense((&a + a.adjoint()) * C64::new(0.5, 0.0)).unwrap();
            let m = sqs_majorizer(&h, false).unwrap();
            let v = verify_majorization(&m, &h, VerifyMode::Dense).unwrap();
            prop_assert!(v.min_eig >= -1e-10 * v.lambda_max_h.abs().max(1e-300));
        }

        #[test]
        fn scaled_unitary_is_tight(n in 2usize..16, seed in 0u64..10_000) {
            let a = random_complex_gaussian(n * n, seed);
            let a = ComplexMatrix::from_iterator(n, n, a.iter().copied());
            let h = HermitianOperator::dense(a.adjoint() * &a).unwrap();
            let d: Vec<f64> = (0..n).map(|k| 1.0 + k as f64).collect();
            let m0 = MajorizerSpec::new(LinearOperator::dft(n).unwrap(), d, 1.0, Certification::uncertified()).unwrap();
            let tol = 1e-3;
            let m = scale_to_majorize(&m0, &h, tol, seed).unwrap();
            let v = verify_majorization(&m, &h, VerifyMode::Dense).unwrap();
            prop_assert!(v.min_eig >= -1e-8 * v.lambda_max_h);
            prop_assert!(v.min_eig <= 2.0 * tol * v.lambda_max_h);
        }
    }
}
