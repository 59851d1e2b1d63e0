use crate::error::{Error, Result};

/// One ellipse of an analytic phantom, in coordinates normalized so the image
/// spans `[-1, 1]` in both directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub x0: f64,
    pub y0: f64,
    pub a: f64,
    pub b: f64,
    /// Rotation in radians.
    pub phi: f64,
    pub value: f64,
}

impl Ellipse {
    pub const fn new(x0: f64, y0: f64, a: f64, b: f64, phi: f64, value: f64) -> Self {
        Self { x0, y0, a, b, phi, value }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi.sin_cos();
        let u = (x - self.x0) * c + (y - self.y0) * s;
        let v = -(x - self.x0) * s + (y - self.y0) * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

/// Shepp-Logan-style head: nested ellipses with low-contrast inserts.
pub const SHEPP_LOGAN: [Ellipse; 7] = [
    Ellipse::new(0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    Ellipse::new(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    Ellipse::new(0.22, 0.0, 0.11, 0.31, -0.3, -0.2),
    Ellipse::new(-0.22, 0.0, 0.16, 0.41, 0.3, -0.2),
    Ellipse::new(0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    Ellipse::new(0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    Ellipse::new(-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
];

/// Rasterizes ellipses at pixel centers into a row-major `n x n` image, times `scale`.
pub fn rasterize(n: usize, ellipses: &[Ellipse], scale: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("phantom needs n >= 1".into()));
    }
    let half = (n as f64 - 1.0) / 2.0;
    let norm = n as f64 / 2.0;
    let mut img = vec![0.0; n * n];
    for r in 0..n {
        let y = (half - r as f64) / norm;
        for c in 0..n {
            let x = (c as f64 - half) / norm;
            img[r * n + c] = scale * ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.value).sum::<f64>();
        }
    }
    Ok(img)
}

pub fn shepp_logan(n: usize, scale: f64) -> Result<Vec<f64>> {
    rasterize(n, &SHEPP_LOGAN, scale)
}

/// Uniform disk of the given radius (in pixels) about the image center, with
/// each pixel set to its covered area fraction estimated on a `sub x sub` grid.
pub fn disk(n: usize, radius: f64, sub: usize) -> Result<Vec<f64>> {
    if n == 0 || sub == 0 || !(radius > 0.0) {
        return Err(Error::InvalidInput("disk needs n, sub >= 1 and a positive radius".into()));
    }
    let half = (n as f64 - 1.0) / 2.0;
    let r2 = radius * radius;
    let mut img = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut hits = 0usize;
            for i in 0..sub {
                let y = half - r as f64 + (i as f64 + 0.5) / sub as f64 - 0.5;
                for j in 0..sub {
                    let x = c as f64 - half + (j as f64 + 0.5) / sub as f64 - 0.5;
                    if x * x + y * y <= r2 {
                        hits += 1;
                    }
                }
            }
            img[r * n + c] = hits as f64 / (sub * sub) as f64;
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shepp_logan_levels() {
        let img = shepp_logan(64, 1.0).unwrap();
        // Center sits in the outer two ellipses only.
        let center = img[32 * 64 + 32];
        assert!((center - 0.2).abs() < 1e-12, "{center}");
        assert_eq!(img[0], 0.0);
        assert!(img.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn disk_area() {
        let img = disk(64, 20.0, 8).unwrap();
        let area: f64 = img.iter().sum();
        let exact = std::f64::consts::PI * 400.0;
        assert!((area - exact).abs() / exact < 2e-3, "{area} vs {exact}");
    }
}
