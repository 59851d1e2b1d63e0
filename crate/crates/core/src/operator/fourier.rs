use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::{C64, ZERO};
use crate::error::{Error, Result};

/// Unitary discrete Fourier transform on a 1-D signal or a row-major 2-D grid.
///
/// Forward and inverse both carry a `1/sqrt(N)` factor, so `U^H U = I`.
pub struct Dft {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dft({}x{})", self.rows, self.cols)
    }
}

impl Dft {
    pub fn new_1d(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("DFT of length zero".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            rows: 1,
            cols: n,
            row_fwd: planner.plan_fft_forward(n),
            row_inv: planner.plan_fft_inverse(n),
            col_fwd: None,
        })
    }

    /// 2-D transform of an image stored row-major with `rows` rows of `cols` pixels.
    pub fn new_2d(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("2-D DFT with an empty axis".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: Some((planner.plan_fft_forward(rows), planner.plan_fft_inverse(rows))),
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(rows, cols)` of the grid; `rows == 1` for a 1-D transform.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Averages a spectral diagonal over the pairs `k, -k`. The result makes
    /// `U^H diag(d) U` real, equal to the real part of the original.
    pub fn conjugate_pair_average(&self, d: &[f64]) -> Result<Vec<f64>> {
        if d.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "spectral diagonal",
                expected: self.len(),
                found: d.len(),
            });
        }
        let (rows, cols) = (self.rows, self.cols);
        Ok((0..rows * cols)
            .map(|k| {
                let (r, c) = (k / cols, k % cols);
                let mirror = ((rows - r) % rows) * cols + (cols - c) % cols;
                0.5 * (d[k] + d[mirror])
            })
            .collect())
    }

    pub fn forward_into(&self, x: &[C64], y: &mut [C64]) {
        self.transform(x, y, false)
    }

    pub fn inverse_into(&self, y: &[C64], x: &mut [C64]) {
        self.transform(y, x, true)
    }

    fn transform(&self, input: &[C64], out: &mut [C64], inverse: bool) {
        out.copy_from_slice(input);
        let row_plan = if inverse { &self.row_inv } else { &self.row_fwd };
        row_plan.process(out);
        if let Some((fwd, inv)) = &self.col_fwd {
            let plan = if inverse { inv } else { fwd };
            let mut column = vec![ZERO; self.rows];
            for j in 0..self.cols {
                for i in 0..self.rows {
                    column[i] = out[i * self.cols + j];
                }
                plan.process(&mut column);
                for i in 0..self.rows {
                    out[i * self.cols + j] = column[i];
                }
            }
        }
        let scale = 1.0 / (self.len() as f64).sqrt();
        out.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Circulant matrix defined by its first column, applied through the FFT.
pub struct Circulant {
    first_column: Vec<C64>,
    /// Unnormalized DFT of the first column: `C = U^H diag(eigenvalues) U`.
    eigenvalues: Vec<C64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Circulant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Circulant({})", self.first_column.len())
    }
}

impl Circulant {
    pub fn new(first_column: Vec<C64>) -> Result<Self> {
        let n = first_column.len();
        if n == 0 {
            return Err(Error::InvalidInput("circulant of size zero".into()));
        }
        if first_column.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("circulant column is not finite".into()));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut eigenvalues = first_column.clone();
        fwd.process(&mut eigenvalues);
        Ok(Self {
            first_column,
            eigenvalues,
            fwd,
            inv,
        })
    }

    pub fn len(&self) -> usize {
        self.first_column.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_column.is_empty()
    }

    pub fn first_column(&self) -> &[C64] {
        &self.first_column
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub(crate) fn apply_into(&self, x: &[C64], y: &mut [C64], adjoint: bool) {
        y.copy_from_slice(x);
        self.fwd.process(y);
        let n = self.len() as f64;
        for (v, l) in y.iter_mut().zip(&self.eigenvalues) {
            let l = if adjoint { l.conj() } else { *l };
            *v *= l / n;
        }
        self.inv.process(y);
    }
}
