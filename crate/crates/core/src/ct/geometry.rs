use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operator::{ComplexMatrix, C64};

/// Parallel-beam scan over `[0, pi)` of an `n x n` image.
///
/// Pixel `(r, c)` sits at `x = (c - (n-1)/2) px`, `y = ((n-1)/2 - r) px`. The
/// detector spans `detector_extent` centered on the rotation axis, split into
/// `n_channels` equal bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub n: usize,
    pub pixel_size: f64,
    pub n_views: usize,
    pub n_channels: usize,
    pub detector_extent: f64,
}

impl Geometry {
    /// Geometry whose detector is as wide as the image.
    pub fn new(n: usize, n_views: usize, n_channels: usize) -> Result<Self> {
        let g = Self {
            n,
            pixel_size: 1.0,
            n_views,
            n_channels,
            detector_extent: n as f64,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_views == 0 || self.n_channels == 0 {
            return Err(Error::InvalidInput(format!(
                "degenerate geometry: n={}, views={}, channels={}",
                self.n, self.n_views, self.n_channels
            )));
        }
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return Err(Error::InvalidInput("pixel size must be positive".into()));
        }
        if !(self.detector_extent > 0.0 && self.detector_extent.is_finite()) {
            return Err(Error::InvalidInput("detector extent must be positive".into()));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.n * self.n
    }

    pub fn rays(&self) -> usize {
        self.n_views * self.n_channels
    }

    pub fn channel_width(&self) -> f64 {
        self.detector_extent / self.n_channels as f64
    }

    pub fn angle(&self, view: usize) -> f64 {
        PI * view as f64 / self.n_views as f64
    }

    /// Same angular range and detector extent with `floor(views / vf)` views and
    /// `floor(channels / cf)` channels.
    pub fn downsampled(&self, view_factor: f64, channel_factor: f64) -> Result<Self> {
        if !(view_factor >= 1.0 && channel_factor >= 1.0) {
            return Err(Error::InvalidInput("downsampling factors must be at least 1".into()));
        }
        let n_views = (self.n_views as f64 / view_factor).floor() as usize;
        let n_channels = (self.n_channels as f64 / channel_factor).floor() as usize;
        let g = Self {
            n_views,
            n_channels,
            ..self.clone()
        };
        g.validate()?;
        Ok(g)
    }
}

/// Integral from `-inf` to `t` of a trapezoid centered at zero with plateau
/// half-width `bmin`, support half-width `bmax` and height `h`.
fn trapezoid_cdf(t: f64, bmin: f64, bmax: f64, h: f64) -> f64 {
    let t = t.clamp(-bmax, bmax);
    let ramp = bmax - bmin;
    let mut out = 0.0;
    if ramp > 1e-15 {
        let a = t.clamp(-bmax, -bmin) + bmax;
        out += h * a * a / (2.0 * ramp);
    }
    out += h * (t.clamp(-bmin, bmin) + bmin);
    if ramp > 1e-15 {
        let c = t.clamp(bmin, bmax) - bmin;
        out += h * (c * ramp - 0.5 * c * c) / ramp;
    }
    out
}

#[derive(Clone, Debug, Default)]
struct Csr {
    ptr: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl Csr {
    /// Builds from triplets already grouped so that a stable sort by row keeps
    /// columns ascending within each row.
    fn from_triplets(rows: usize, triplets: &[(u32, u32, f64)], transpose: bool) -> Self {
        let key = |t: &(u32, u32, f64)| if transpose { t.1 } else { t.0 } as usize;
        let mut ptr = vec![0usize; rows + 1];
        for t in triplets {
            ptr[key(t) + 1] += 1;
        }
        for i in 0..rows {
            ptr[i + 1] += ptr[i];
        }
        let mut next = ptr.clone();
        let mut idx = vec![0u32; triplets.len()];
        let mut val = vec![0.0; triplets.len()];
        for t in triplets {
            let r = key(t);
            let slot = next[r];
            next[r] += 1;
            idx[slot] = if transpose { t.0 } else { t.1 };
            val[slot] = t.2;
        }
        Self { ptr, idx, val }
    }

    fn rows(&self) -> usize {
        self.ptr.len() - 1
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.ptr[i]..self.ptr[i + 1];
        self.idx[span.clone()]
            .iter()
            .zip(&self.val[span])
            .map(|(&j, &v)| (j as usize, v))
    }

    fn apply<T>(&self, x: &[T], y: &mut [T])
    where
        T: Copy + Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        for (i, yi) in y.iter_mut().enumerate().take(self.rows()) {
            let mut acc = T::default();
            for (j, v) in self.row(i) {
                acc += x[j] * v;
            }
            *yi = acc;
        }
    }
}

/// Strip-integral parallel-beam projector.
///
/// Entry `(ray, pixel)` is the pixel footprint (a trapezoid in the detector
/// coordinate) integrated over the channel bin, divided by the bin width: the
/// mean chord length through the pixel across the bin. The back-projector is
/// the exact transpose, stored separately so both directions are gathers.
#[derive(Clone)]
pub struct Projector {
    geometry: Geometry,
    forward: Csr,
    backward: Csr,
}

impl fmt::Debug for Projector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Projector(n={}, views={}, channels={}, nnz={})",
            self.geometry.n,
            self.geometry.n_views,
            self.geometry.n_channels,
            self.nnz()
        )
    }
}

impl Projector {
    pub fn new(geometry: &Geometry) -> Result<Self> {
        geometry.validate()?;
        let g = geometry;
        let (n, nc) = (g.n, g.n_channels);
        let px = g.pixel_size;
        let ds = g.channel_width();
        let half = (n as f64 - 1.0) / 2.0;
        let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
        for v in 0..g.n_views {
            let (st, ct) = g.angle(v).sin_cos();
            let a1 = px * ct.abs();
            let a2 = px * st.abs();
            let bmax = 0.5 * (a1 + a2);
            let bmin = 0.5 * (a1 - a2).abs();
            let h = px * px / a1.max(a2);
            for pix in 0..n * n {
                let (r, c) = (pix / n, pix % n);
                let x = (c as f64 - half) * px;
                let y = (half - r as f64) * px;
                let s0 = x * ct + y * st;
                let lo = ((s0 - bmax) / ds + nc as f64 / 2.0).floor() as i64;
                let hi = ((s0 + bmax) / ds + nc as f64 / 2.0).floor() as i64;
                for ch in lo.max(0)..=hi.min(nc as i64 - 1) {
                    let e0 = (ch as f64 - nc as f64 / 2.0) * ds - s0;
                    let value = (trapezoid_cdf(e0 + ds, bmin, bmax, h) - trapezoid_cdf(e0, bmin, bmax, h)) / ds;
                    if value > 1e-15 {
                        triplets.push(((v * nc + ch as usize) as u32, pix as u32, value));
                    }
                }
            }
        }
        let forward = Csr::from_triplets(g.rays(), &triplets, false);
        // Columns within each pixel row must come out ascending: sort by ray first.
        triplets.sort_by_key(|t| (t.0, t.1));
        let backward = Csr::from_triplets(g.pixels(), &triplets, true);
        Ok(Self {
            geometry: g.clone(),
            forward,
            backward,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn rows(&self) -> usize {
        self.geometry.rays()
    }

    pub fn cols(&self) -> usize {
        self.geometry.pixels()
    }

    pub fn nnz(&self) -> usize {
        self.forward.val.len()
    }

    pub fn forward_into(&self, x: &[C64], y: &mut [C64]) {
        self.forward.apply(x, y)
    }

    pub fn back_into(&self, y: &[C64], x: &mut [C64]) {
        self.backward.apply(y, x)
    }

    pub fn forward_real(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len("projector input", self.cols(), x.len())?;
        check_len("projector output", self.rows(), y.len())?;
        self.forward.apply(x, y);
        Ok(())
    }

    pub fn back_real(&self, y: &[f64], x: &mut [f64]) -> Result<()> {
        check_len("back-projector input", self.rows(), y.len())?;
        check_len("back-projector output", self.cols(), x.len())?;
        self.backward.apply(y, x);
        Ok(())
    }

    /// Sum of every column, `A^T 1`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.back_real(&vec![1.0; self.rows()], &mut out).expect("lengths match");
        out
    }

    /// `sum_i d_i a_ij^2` for every pixel `j`: the diagonal of `A^T diag(d) A`.
    pub fn weighted_square_column_sums(&self, d: &[f64]) -> Vec<f64> {
        (0..self.cols())
            .map(|j| self.backward.row(j).map(|(i, v)| d[i] * v * v).sum())
            .collect()
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.rows(), self.cols());
        for i in 0..self.rows() {
            for (j, v) in self.forward.row(i) {
                m[(i, j)] = C64::new(v, 0.0);
            }
        }
        m
    }
}
