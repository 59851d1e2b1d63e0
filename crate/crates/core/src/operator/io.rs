//! Matrix Market and CSV readers/writers for dense matrices and vectors.
//!
//! Supported Matrix Market headers: `array` or `coordinate` layout, `real`,
//! `integer` or `complex` fields, and `general`, `symmetric`, `hermitian` or
//! `skew-symmetric` symmetry. Matrices are always returned dense.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ComplexMatrix, ComplexVector, C64};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Hermitian,
    Skew,
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

pub fn parse_matrix_market(text: &str) -> Result<ComplexMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'"));
    }
    let layout = match tokens[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(parse_err(1, format!("unsupported layout '{other}'"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "complex" => Field::Complex,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| parse_err(size_line + 1, e)))
        .collect::<Result<_>>()?;
    let (rows, cols) = match (layout, dims.as_slice()) {
        (Layout::Array, [r, c]) | (Layout::Coordinate, [r, c, _]) => (*r, *c),
        _ => return Err(parse_err(size_line + 1, "malformed size line")),
    };
    if rows == 0 || cols == 0 {
        return Err(parse_err(size_line + 1, "matrix has an empty dimension"));
    }
    if symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(size_line + 1, "symmetric storage requires a square matrix"));
    }
    let mut m = ComplexMatrix::zeros(rows, cols);

    let parse_value = |lineno: usize, toks: &[&str]| -> Result<C64> {
        let num = |t: &str| t.parse::<f64>().map_err(|e| parse_err(lineno, e));
        match (field, toks) {
            (Field::Real, [re]) => Ok(C64::new(num(re)?, 0.0)),
            (Field::Complex, [re, im]) => Ok(C64::new(num(re)?, num(im)?)),
            _ => Err(parse_err(lineno, "wrong number of value fields")),
        }
    };
    let mirror = |m: &mut ComplexMatrix, i: usize, j: usize, v: C64| {
        m[(i, j)] = v;
        if i != j && symmetry != Symmetry::General {
            m[(j, i)] = match symmetry {
                Symmetry::General | Symmetry::Symmetric => v,
                Symmetry::Hermitian => v.conj(),
                Symmetry::Skew => -v,
            };
        }
    };

    match layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            for _ in 0..nnz {
                let (ln, line) = body
                    .next()
                    .ok_or_else(|| Error::Parse("fewer entries than declared".into()))?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() < 3 {
                    return Err(parse_err(ln + 1, "coordinate entry needs row, column and value"));
                }
                let i: usize = toks[0].parse().map_err(|e| parse_err(ln + 1, e))?;
                let j: usize = toks[1].parse().map_err(|e| parse_err(ln + 1, e))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(ln + 1, format!("index ({i}, {j}) out of range")));
                }
                let v = parse_value(ln + 1, &toks[2..])?;
                mirror(&mut m, i - 1, j - 1, v);
            }
        }
        Layout::Array => {
            // Column-major; symmetric variants store the lower triangle only.
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Skew => j + 1,
                    _ => j,
                };
                for i in start..rows {
                    let (ln, line) = body
                        .next()
                        .ok_or_else(|| Error::Parse("fewer array entries than declared".into()))?;
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    let v = parse_value(ln + 1, &toks)?;
                    mirror(&mut m, i, j, v);
                }
            }
        }
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Parse("matrix contains non-finite values".into()));
    }
    Ok(m)
}

pub fn read_matrix_market(path: &Path) -> Result<ComplexMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

/// Dense `array general` serialization; the field is `real` when every entry is real.
pub fn format_matrix_market(m: &ComplexMatrix) -> String {
    let real = m.iter().all(|z| z.im == 0.0);
    let mut out = format!(
        "%%MatrixMarket matrix array {} general\n{} {}\n",
        if real { "real" } else { "complex" },
        m.nrows(),
        m.ncols()
    );
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if real {
                let _ = writeln!(out, "{:e}", z.re);
            } else {
                let _ = writeln!(out, "{:e} {:e}", z.re, z.im);
            }
        }
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &ComplexMatrix) -> Result<()> {
    fs::write(path, format_matrix_market(m))?;
    Ok(())
}

pub fn write_real_vector_mm(path: &Path, values: &[f64]) -> Result<()> {
    let m = ComplexMatrix::from_iterator(values.len(), 1, values.iter().map(|&v| C64::new(v, 0.0)));
    write_matrix_market(path, &m)
}

/// CSV with header `re,im`, one entry per line.
pub fn format_vector_csv(v: &ComplexVector) -> String {
    let mut out = String::from("re,im\n");
    for z in v.iter() {
        let _ = writeln!(out, "{:e},{:e}", z.re, z.im);
    }
    out
}

pub fn parse_vector_csv(text: &str) -> Result<ComplexVector> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["re", "im"] {
        return Err(parse_err(1, "expected header 're,im'"));
    }
    let mut values = Vec::new();
    for (ln, line) in lines {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(parse_err(ln + 1, "expected two columns"));
        }
        let re: f64 = parts[0].parse().map_err(|e| parse_err(ln + 1, e))?;
        let im: f64 = parts[1].parse().map_err(|e| parse_err(ln + 1, e))?;
        values.push(C64::new(re, im));
    }
    let v = ComplexVector::from_vec(values);
    super::validate_vector(&v)?;
    Ok(v)
}

/// Reads a vector from CSV (by `.csv` extension) or a single-column Matrix Market file.
pub fn read_vector(path: &Path) -> Result<ComplexVector> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return parse_vector_csv(&text);
    }
    let m = parse_matrix_market(&text)?;
    if m.ncols() != 1 {
        return Err(Error::Parse(format!("expected a single column, found {}", m.ncols())));
    }
    Ok(m.column(0).into_owned())
}

pub fn write_vector(path: &Path, v: &ComplexVector) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        fs::write(path, format_vector_csv(v))?;
        Ok(())
    } else {
        write_matrix_market(path, &ComplexMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }
}
