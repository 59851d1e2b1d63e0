//! Named inputs: Hessian generators, `K` descriptor strings and weight sources.

use std::path::{Path, PathBuf};

use crate::ct::{Geometry, Projector};
use crate::error::{Error, Result};
use crate::operator::{io, ComplexMatrix, DiagonalWeights, HermitianOperator, LinearOperator, C64};

/// `F_ij = (0.1 + cos^2(2 pi i / N)) / sqrt(1 + |i - j|)`: a row-weighted Toeplitz
/// matrix with a slowly decaying response.
pub fn weighted_toeplitz(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidInput("Toeplitz generator needs N >= 1".into()));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let c = (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
        let diff = (i as f64 - j as f64).abs();
        C64::new((0.1 + c * c) / (1.0 + diff).sqrt(), 0.0)
    }))
}

/// `H = F^T F` for [`weighted_toeplitz`].
pub fn toeplitz_hessian(n: usize) -> Result<HermitianOperator> {
    let f = weighted_toeplitz(n)?;
    HermitianOperator::dense(f.adjoint() * &f)
}

/// Where a Hessian comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum HSource {
    /// `diag:a..b` (integer range, inclusive) or `diag:v1,v2,...`.
    Diagonal(Vec<f64>),
    /// `toeplitz:N=...`.
    Toeplitz(usize),
    MatrixMarket(PathBuf),
}

impl HSource {
    pub fn parse(desc: &str) -> Result<Self> {
        if let Some(rest) = desc.strip_prefix("diag:") {
            return parse_diag(rest).map(Self::Diagonal);
        }
        if let Some(rest) = desc.strip_prefix("toeplitz:") {
            let n = rest
                .strip_prefix("N=")
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| Error::InvalidInput(format!("expected 'toeplitz:N=<size>', got '{desc}'")))?;
            return Ok(Self::Toeplitz(n));
        }
        Ok(Self::MatrixMarket(PathBuf::from(desc)))
    }

    pub fn load(&self) -> Result<HermitianOperator> {
        match self {
            Self::Diagonal(v) => HermitianOperator::diagonal(v.clone()),
            Self::Toeplitz(n) => toeplitz_hessian(*n),
            Self::MatrixMarket(path) => {
                if !path.is_file() {
                    return Err(Error::InvalidInput(format!("H file '{}' does not exist", path.display())));
                }
                HermitianOperator::dense(io::read_matrix_market(path)?)
            }
        }
    }
}

fn parse_diag(rest: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("malformed diagonal generator 'diag:{rest}'"));
    if let Some((a, b)) = rest.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).map(|v| v as f64).collect());
    }
    let values = rest
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

/// Reads a geometry from a TOML key-value file.
pub fn read_geometry(path: &Path) -> Result<Geometry> {
    let text = std::fs::read_to_string(path)?;
    let g: Geometry = toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    g.validate()?;
    Ok(g)
}

pub fn write_geometry(path: &Path, g: &Geometry) -> Result<()> {
    let text = toml::to_string(g).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Builds `K` for an `n`-dimensional problem from a descriptor.
///
/// Grammar: `stacked:<block>+<block>+...` or a single block, where a block is
/// `[<factor>*]<atom>` and an atom is `identity`, `dft`, `dft2` (square image
/// ordering, `n` must be a perfect square) or `projector@<geometry.toml>`.
/// Relative geometry paths resolve against `base`.
pub fn parse_k(desc: &str, n: usize, base: &Path) -> Result<LinearOperator> {
    let blocks: Vec<&str> = match desc.strip_prefix("stacked:") {
        Some(rest) => rest.split('+').collect(),
        None => vec![desc],
    };
    if blocks.iter().any(|b| b.trim().is_empty()) {
        return Err(Error::InvalidInput(format!("empty block in K descriptor '{desc}'")));
    }
    let ops = blocks
        .iter()
        .map(|b| parse_block(b.trim(), n, base))
        .collect::<Result<Vec<_>>>()?;
    let k = if ops.len() == 1 {
        ops.into_iter().next().expect("one block")
    } else {
        LinearOperator::stacked(ops)?
    };
    if k.cols() != n {
        return Err(Error::DimensionMismatch {
            context: "K descriptor columns",
            expected: n,
            found: k.cols(),
        });
    }
    Ok(k)
}

fn parse_block(block: &str, n: usize, base: &Path) -> Result<LinearOperator> {
    let (factor, atom) = match block.split_once('*') {
        Some((f, a)) => {
            let f: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad scale factor in K block '{block}'")))?;
            (Some(f), a.trim())
        }
        None => (None, block),
    };
    let op = match atom {
        "identity" => LinearOperator::identity(n)?,
        "dft" => LinearOperator::dft(n)?,
        "dft2" => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(Error::InvalidInput(format!("dft2 needs a square dimension, got {n}")));
            }
            LinearOperator::dft2(side, side)?
        }
        _ => match atom.strip_prefix("projector@") {
            Some(path) => {
                let path = base.join(path);
                LinearOperator::projector(Projector::new(&read_geometry(&path)?)?)
            }
            None => return Err(Error::InvalidInput(format!("unknown K block '{atom}'"))),
        },
    };
    match factor {
        Some(f) => LinearOperator::scaled(f, op),
        None => Ok(op),
    }
}

/// `uniform` or a vector file (CSV or Matrix Market).
pub fn parse_weights(desc: &str, len: usize) -> Result<DiagonalWeights> {
    if desc == "uniform" {
        return DiagonalWeights::uniform(len, 1.0);
    }
    let path = Path::new(desc);
    if !path.is_file() {
        return Err(Error::InvalidInput(format!("weight file '{desc}' does not exist")));
    }
    let v = io::read_vector(path)?;
    if v.len() != len {
        return Err(Error::DimensionMismatch {
            context: "weight vector",
            expected: len,
            found: v.len(),
        });
    }
    if v.iter().any(|z| z.im != 0.0) {
        return Err(Error::InvalidInput("weights must be real".into()));
    }
    DiagonalWeights::positive(v.iter().map(|z| z.re).collect())
}
