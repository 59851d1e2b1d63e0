//! Matrix-free complex linear operators.
//!
//! Every operator works on `Complex64` vectors, even when the underlying map is
//! real. Operators are immutable after construction and cheap to clone (heavy
//! state sits behind `Arc`), so they can be shared across threads freely.
//!
//! Dense materialization exists only to support oracle checks at desk scale and
//! is refused above a configurable entry cap.

mod eigen;
mod fourier;
pub mod io;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ct::Projector;
use crate::error::{check_len, Error, Result};

pub use eigen::{
    hermitian_eigenvalues, lanczos_extremes, power_iteration, LanczosEstimate, PowerEstimate,
};
pub use fourier::{Circulant, Dft};

pub type C64 = Complex64;
/// Complex column vector; length must be positive and entries finite.
pub type ComplexVector = DVector<C64>;
pub type ComplexMatrix = DMatrix<C64>;

/// Default cap on `rows * cols` for dense materialization.
pub const DEFAULT_MATERIALIZE_CAP: usize = 4096 * 4096;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

/// Checks the `ComplexVector` invariants.
pub fn validate_vector(x: &ComplexVector) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidInput("vector has length zero".into()));
    }
    if let Some(i) = x.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput(format!("vector entry {i} is not finite")));
    }
    Ok(())
}

pub fn real_vector(values: &[f64]) -> ComplexVector {
    ComplexVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0)))
}

/// Unit-norm complex Gaussian vector drawn from a ChaCha stream seeded by `seed`.
pub fn random_unit_vector(n: usize, seed: u64) -> ComplexVector {
    let mut v = random_complex_gaussian(n, seed);
    let norm = v.norm();
    if norm > 0.0 {
        v /= C64::new(norm, 0.0);
    }
    v
}

pub fn random_complex_gaussian(n: usize, seed: u64) -> ComplexVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexVector::from_iterator(
        n,
        (0..n).map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        }),
    )
}

/// Real standard normal samples from a ChaCha stream seeded by `seed`.
pub fn random_real_gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn dense_gemv(m: &ComplexMatrix, x: &[C64], y: &mut [C64]) {
    let xv = DVectorView::from_slice(x, m.ncols());
    let mut yv = DVectorViewMut::from_slice(y, m.nrows());
    yv.gemv(C64::new(1.0, 0.0), m, &xv, ZERO);
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Positive-semidefinite diagonal weights (the `W` of a weighted norm or a Gram product).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalWeights(Arc<Vec<f64>>);

impl DiagonalWeights {
    /// Weights that must be nonnegative and finite.
    pub fn nonnegative(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("weights have length zero".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidInput(format!("weight {i} = {v} is negative or not finite")));
        }
        Ok(Self(Arc::new(values)))
    }

    /// Weights used as a positive-definite `W` or ADMM penalty: every entry > 0.
    pub fn positive(values: Vec<f64>) -> Result<Self> {
        let w = Self::nonnegative(values)?;
        if let Some((i, v)) = w.0.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(Error::InvalidInput(format!("weight {i} = {v} must be strictly positive")));
        }
        Ok(w)
    }

    pub fn uniform(len: usize, value: f64) -> Result<Self> {
        Self::positive(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Discriminant of a [`LinearOperator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Identity,
    Dense,
    Diagonal,
    Circulant,
    Dft,
    Stacked,
    Composed,
    Scaled,
    Projector,
}

/// A complex linear map from `C^cols` to `C^rows`.
#[derive(Clone)]
pub enum LinearOperator {
    Identity(usize),
    Dense(Arc<ComplexMatrix>),
    Diagonal(Arc<Vec<C64>>),
    Circulant(Arc<Circulant>),
    /// Unitary DFT over a 1-D or 2-D grid.
    Dft(Arc<Dft>),
    /// Vertical concatenation `[K1; K2; ...]`.
    Stacked(Arc<Vec<LinearOperator>>),
    /// `outer * inner`.
    Composed(Arc<(LinearOperator, LinearOperator)>),
    Scaled(f64, Arc<LinearOperator>),
    Projector(Arc<Projector>),
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({}x{})", self.kind(), self.rows(), self.cols())
    }
}

impl LinearOperator {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("identity of size zero".into()));
        }
        Ok(Self::Identity(n))
    }

    pub fn dense(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidInput("dense operator with an empty dimension".into()));
        }
        Ok(Self::Dense(Arc::new(m)))
    }

    pub fn dense_real(rows: usize, cols: usize, row_major: &[f64]) -> Result<Self> {
        check_len("dense_real entries", rows * cols, row_major.len())?;
        Self::dense(ComplexMatrix::from_fn(rows, cols, |i, j| {
            C64::new(row_major[i * cols + j], 0.0)
        }))
    }

    pub fn diagonal(values: Vec<C64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("diagonal operator of size zero".into()));
        }
        Ok(Self::Diagonal(Arc::new(values)))
    }

    pub fn diagonal_real(values: &[f64]) -> Result<Self> {
        Self::diagonal(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn dft(n: usize) -> Result<Self> {
        Ok(Self::Dft(Arc::new(Dft::new_1d(n)?)))
    }

    pub fn dft2(rows: usize, cols: usize) -> Result<Self> {
        Ok(Self::Dft(Arc::new(Dft::new_2d(rows, cols)?)))
    }

    pub fn circulant(first_column: Vec<C64>) -> Result<Self> {
        Ok(Self::Circulant(Arc::new(Circulant::new(first_column)?)))
    }

    pub fn stacked(blocks: Vec<LinearOperator>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidInput("stacked operator needs at least one block".into()))?;
        let cols = first.cols();
        for b in &blocks[1..] {
            check_len("stacked block columns", cols, b.cols())?;
        }
        Ok(Self::Stacked(Arc::new(blocks)))
    }

    pub fn compose(outer: LinearOperator, inner: LinearOperator) -> Result<Self> {
        check_len("composed inner rows vs outer cols", outer.cols(), inner.rows())?;
        Ok(Self::Composed(Arc::new((outer, inner))))
    }

    pub fn scaled(factor: f64, inner: LinearOperator) -> Result<Self> {
        if !factor.is_finite() {
            return Err(Error::InvalidInput("scale factor is not finite".into()));
        }
        Ok(Self::Scaled(factor, Arc::new(inner)))
    }

    pub fn projector(p: impl Into<Arc<Projector>>) -> Self {
        Self::Projector(p.into())
    }

    pub fn kind(&self) -> OperatorKind {
        match self {
            Self::Identity(_) => OperatorKind::Identity,
            Self::Dense(_) => OperatorKind::Dense,
            Self::Diagonal(_) => OperatorKind::Diagonal,
            Self::Circulant(_) => OperatorKind::Circulant,
            Self::Dft(_) => OperatorKind::Dft,
            Self::Stacked(_) => OperatorKind::Stacked,
            Self::Composed(_) => OperatorKind::Composed,
            Self::Scaled(..) => OperatorKind::Scaled,
            Self::Projector(_) => OperatorKind::Projector,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Dense(m) => m.nrows(),
            Self::Diagonal(d) => d.len(),
            Self::Circulant(c) => c.len(),
            Self::Dft(f) => f.len(),
            Self::Stacked(blocks) => blocks.iter().map(|b| b.rows()).sum(),
            Self::Composed(pair) => pair.0.rows(),
            Self::Scaled(_, inner) => inner.rows(),
            Self::Projector(p) => p.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Dense(m) => m.ncols(),
            Self::Diagonal(d) => d.len(),
            Self::Circulant(c) => c.len(),
            Self::Dft(f) => f.len(),
            Self::Stacked(blocks) => blocks[0].cols(),
            Self::Composed(pair) => pair.1.cols(),
            Self::Scaled(_, inner) => inner.cols(),
            Self::Projector(p) => p.cols(),
        }
    }

    /// True when `K^H K = I` holds exactly by construction.
    pub fn is_unitary(&self) -> bool {
        matches!(self, Self::Identity(_) | Self::Dft(_))
    }

    /// Checked `op * x`.
    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        check_len("apply input", self.cols(), x.len())?;
        let mut y = ComplexVector::zeros(self.rows());
        self.apply_into(x.as_slice(), y.as_mut_slice());
        Ok(y)
    }

    /// Checked `op^H * y`.
    pub fn adjoint_apply(&self, y: &ComplexVector) -> Result<ComplexVector> {
        check_len("adjoint_apply input", self.rows(), y.len())?;
        let mut x = ComplexVector::zeros(self.cols());
        self.adjoint_into(y.as_slice(), x.as_mut_slice());
        Ok(x)
    }

    /// Unchecked forward map; slice lengths must equal `cols()` and `rows()`.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(y.len(), self.rows());
        match self {
            Self::Identity(_) => y.copy_from_slice(x),
            Self::Dense(m) => dense_gemv(m, x, y),
            Self::Diagonal(d) => {
                for ((yi, di), xi) in y.iter_mut().zip(d.iter()).zip(x) {
                    *yi = di * xi;
                }
            }
            Self::Circulant(c) => c.apply_into(x, y, false),
            Self::Dft(f) => f.forward_into(x, y),
            Self::Stacked(blocks) => {
                let mut offset = 0;
                for b in blocks.iter() {
                    let r = b.rows();
                    b.apply_into(x, &mut y[offset..offset + r]);
                    offset += r;
                }
            }
            Self::Composed(pair) => {
                let mut tmp = vec![ZERO; pair.1.rows()];
                pair.1.apply_into(x, &mut tmp);
                pair.0.apply_into(&tmp, y);
            }
            Self::Scaled(s, inner) => {
                inner.apply_into(x, y);
                y.iter_mut().for_each(|v| *v *= *s);
            }
            Self::Projector(p) => p.forward_into(x, y),
        }
    }

    /// Unchecked adjoint map; slice lengths must equal `rows()` and `cols()`.
    pub fn adjoint_into(&self, y: &[C64], x: &mut [C64]) {
        debug_assert_eq!(y.len(), self.rows());
        debug_assert_eq!(x.len(), self.cols());
        match self {
            Self::Identity(_) => x.copy_from_slice(y),
            Self::Dense(m) => {
                let yv = DVectorView::from_slice(y, y.len());
                let mut xv = DVectorViewMut::from_slice(x, m.ncols());
                xv.gemv_ad(C64::new(1.0, 0.0), &**m, &yv, ZERO);
            }
            Self::Diagonal(d) => {
                for ((xi, di), yi) in x.iter_mut().zip(d.iter()).zip(y) {
                    *xi = di.conj() * yi;
                }
            }
            Self::Circulant(c) => c.apply_into(y, x, true),
            Self::Dft(f) => f.inverse_into(y, x),
            Self::Stacked(blocks) => {
                x.iter_mut().for_each(|v| *v = ZERO);
                let mut tmp = vec![ZERO; x.len()];
                let mut offset = 0;
                for b in blocks.iter() {
                    let r = b.rows();
                    b.adjoint_into(&y[offset..offset + r], &mut tmp);
                    x.iter_mut().zip(&tmp).for_each(|(a, t)| *a += t);
                    offset += r;
                }
            }
            Self::Composed(pair) => {
                let mut tmp = vec![ZERO; pair.1.rows()];
                pair.0.adjoint_into(y, &mut tmp);
                pair.1.adjoint_into(&tmp, x);
            }
            Self::Scaled(s, inner) => {
                inner.adjoint_into(y, x);
                x.iter_mut().for_each(|v| *v *= *s);
            }
            Self::Projector(p) => p.back_into(y, x),
        }
    }

    /// Dense copy of the operator, refused when `rows * cols` exceeds the default cap.
    pub fn materialize(&self) -> Result<ComplexMatrix> {
        self.materialize_with_cap(DEFAULT_MATERIALIZE_CAP)
    }

    pub fn materialize_with_cap(&self, cap: usize) -> Result<ComplexMatrix> {
        let (rows, cols) = (self.rows(), self.cols());
        if rows.saturating_mul(cols) > cap {
            return Err(Error::MaterializeCap { rows, cols, cap });
        }
        if let Self::Dense(m) = self {
            return Ok((**m).clone());
        }
        let mut out = ComplexMatrix::zeros(rows, cols);
        let mut e = vec![ZERO; cols];
        let mut col = vec![ZERO; rows];
        for j in 0..cols {
            e[j] = C64::new(1.0, 0.0);
            self.apply_into(&e, &mut col);
            out.column_mut(j).copy_from_slice(&col);
            e[j] = ZERO;
        }
        Ok(out)
    }
}

/// Anything that applies a Hermitian `N x N` map.
pub trait HermitianMap: Send + Sync {
    fn dim(&self) -> usize;

    fn apply_into(&self, x: &[C64], y: &mut [C64]);

    fn apply_vec(&self, x: &ComplexVector) -> Result<ComplexVector> {
        check_len("hermitian apply input", self.dim(), x.len())?;
        let mut y = ComplexVector::zeros(self.dim());
        self.apply_into(x.as_slice(), y.as_mut_slice());
        Ok(y)
    }

    /// Real part of `x^H A x`.
    fn quadratic_form(&self, x: &[C64]) -> f64 {
        let mut y = vec![ZERO; self.dim()];
        self.apply_into(x, &mut y);
        dot(x, &y).re
    }
}

/// Dense Hermitian matrix assembled column by column from basis probes.
pub fn materialize_hermitian(h: &dyn HermitianMap, cap: usize) -> Result<ComplexMatrix> {
    let n = h.dim();
    if n.saturating_mul(n) > cap {
        return Err(Error::MaterializeCap {
            rows: n,
            cols: n,
            cap,
        });
    }
    let mut out = ComplexMatrix::zeros(n, n);
    let mut e = vec![ZERO; n];
    let mut col = vec![ZERO; n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        h.apply_into(&e, &mut col);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = ZERO;
    }
    Ok(out)
}

/// Symmetric/Hermitian PSD operator such as `A^H W A` or `F^T F`.
#[derive(Clone)]
pub enum HermitianOperator {
    Dense(Arc<ComplexMatrix>),
    Diagonal(Arc<Vec<f64>>),
    Gram {
        a: LinearOperator,
        weights: DiagonalWeights,
    },
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dense(_) => write!(f, "Dense({0}x{0})", self.dim()),
            Self::Diagonal(_) => write!(f, "Diagonal({})", self.dim()),
            Self::Gram { a, .. } => write!(f, "Gram({a:?})"),
        }
    }
}

impl HermitianOperator {
    /// Wraps a dense matrix after checking it is square and Hermitian to `1e-10` relative.
    pub fn dense(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "Hermitian operator must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-10 * scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not Hermitian at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::Dense(Arc::new(m)))
    }

    pub fn dense_real(n: usize, row_major: &[f64]) -> Result<Self> {
        check_len("dense_real entries", n * n, row_major.len())?;
        Self::dense(ComplexMatrix::from_fn(n, n, |i, j| C64::new(row_major[i * n + j], 0.0)))
    }

    pub fn diagonal(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("diagonal must be nonempty and finite".into()));
        }
        Ok(Self::Diagonal(Arc::new(values)))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diagonal(vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dense(m) => m.nrows(),
            Self::Diagonal(d) => d.len(),
            Self::Gram { a, .. } => a.cols(),
        }
    }

    pub fn materialize(&self) -> Result<ComplexMatrix> {
        self.materialize_with_cap(DEFAULT_MATERIALIZE_CAP)
    }

    pub fn materialize_with_cap(&self, cap: usize) -> Result<ComplexMatrix> {
        match self {
            Self::Dense(m) => {
                let n = m.nrows();
                if n * n > cap {
                    return Err(Error::MaterializeCap {
                        rows: n,
                        cols: n,
                        cap,
                    });
                }
                Ok((**m).clone())
            }
            _ => materialize_hermitian(self, cap),
        }
    }
}

impl HermitianMap for HermitianOperator {
    fn dim(&self) -> usize {
        HermitianOperator::dim(self)
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        match self {
            Self::Dense(m) => dense_gemv(m, x, y),
            Self::Diagonal(d) => {
                for ((yi, di), xi) in y.iter_mut().zip(d.iter()).zip(x) {
                    *yi = xi * *di;
                }
            }
            Self::Gram { a, weights } => {
                let mut ax = vec![ZERO; a.rows()];
                a.apply_into(x, &mut ax);
                ax.iter_mut()
                    .zip(weights.values())
                    .for_each(|(v, w)| *v *= *w);
                a.adjoint_into(&ax, y);
            }
        }
    }
}

/// `A^H diag(w) A`, kept matrix-free.
pub fn gram(a: &LinearOperator, w: &DiagonalWeights) -> Result<HermitianOperator> {
    check_len("gram weights", a.rows(), w.len())?;
    Ok(HermitianOperator::Gram {
        a: a.clone(),
        weights: w.clone(),
    })
}

/// `A - B` for two Hermitian maps of equal dimension.
pub struct Difference<'a> {
    pub plus: &'a dyn HermitianMap,
    pub minus: &'a dyn HermitianMap,
}

impl HermitianMap for Difference<'_> {
    fn dim(&self) -> usize {
        self.plus.dim()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let mut tmp = vec![ZERO; x.len()];
        self.plus.apply_into(x, y);
        self.minus.apply_into(x, &mut tmp);
        y.iter_mut().zip(&tmp).for_each(|(a, b)| *a -= b);
    }
}

/// Hermitian map built from a closure; used for symmetrized products.
pub struct FnHermitian<F> {
    dim: usize,
    f: F,
}

impl<F> FnHermitian<F>
where
    F: Fn(&[C64], &mut [C64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> HermitianMap for FnHermitian<F>
where
    F: Fn(&[C64], &mut [C64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        (self.f)(x, y)
    }
}
