//! Majorizer files: a TOML key-value sidecar naming `K`, `alpha` and the
//! certification, next to a Matrix Market vector holding `d`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majorizer::{CertMethod, Certification, MajorizerSpec};
use crate::operator::io;

use super::sources::parse_k;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    /// `K` descriptor, see [`parse_k`].
    pub k: String,
    /// Matrix Market file with `d`, relative to the sidecar.
    pub d: String,
    pub alpha: f64,
    pub certification: String,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_estimate: Option<f64>,
    pub dim: usize,
    /// Hessian source the majorizer was built for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
}

impl Sidecar {
    pub fn describe(m: &MajorizerSpec, k: &str, d_file: &str) -> Self {
        Self {
            k: k.to_string(),
            d: d_file.to_string(),
            alpha: m.alpha(),
            certification: m.certification.method.tag().to_string(),
            certified: m.certification.certified,
            ratio_estimate: m.certification.ratio_estimate,
            dim: m.dim(),
            h: None,
            seed: None,
            iters: None,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// File contents for a majorizer saved as `<stem>.toml` plus `<stem>_d.mtx`.
pub fn majorizer_files(m: &MajorizerSpec, sidecar: &Sidecar, stem: &str) -> Result<Vec<(PathBuf, String)>> {
    let d = nalgebra::DMatrix::from_iterator(m.d().len(), 1, m.d().iter().map(|&v| crate::operator::C64::new(v, 0.0)));
    Ok(vec![
        (PathBuf::from(format!("{stem}.toml")), sidecar.to_toml()?),
        (PathBuf::from(&sidecar.d), io::format_matrix_market(&d)),
    ])
}

pub fn load_majorizer(path: &Path) -> Result<(MajorizerSpec, Sidecar)> {
    if !path.is_file() {
        return Err(Error::InvalidInput(format!("majorizer sidecar '{}' does not exist", path.display())));
    }
    let text = std::fs::read_to_string(path)?;
    let sc: Sidecar = toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let k = parse_k(&sc.k, sc.dim, base)?;
    let d = io::read_vector(&base.join(&sc.d))?;
    if d.iter().any(|z| z.im != 0.0) {
        return Err(Error::Parse("majorizer diagonal must be real".into()));
    }
    let certification = Certification {
        method: CertMethod::from_tag(&sc.certification)?,
        certified: sc.certified,
        ratio_estimate: sc.ratio_estimate,
    };
    let m = MajorizerSpec::new(k, d.iter().map(|z| z.re).collect(), sc.alpha, certification)?;
    Ok((m, sc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{HermitianMap, LinearOperator};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let k = LinearOperator::stacked(vec![LinearOperator::dft(4).unwrap(), LinearOperator::identity(4).unwrap()]).unwrap();
        let m = MajorizerSpec::new(
            k,
            vec![0.5, 1.0, 1.5, 2.0, 0.0, 0.25, 1e-9, 3.0],
            3.0,
            Certification {
                method: CertMethod::Factor3,
                certified: true,
                ratio_estimate: Some(1.25),
            },
        )
        .unwrap();
        let mut sc = Sidecar::describe(&m, "stacked:dft+identity", "m_d.mtx");
        sc.seed = Some(4);
        for (name, text) in majorizer_files(&m, &sc, "m").unwrap() {
            std::fs::write(dir.path().join(name), text).unwrap();
        }
        let (back, sc2) = load_majorizer(&dir.path().join("m.toml")).unwrap();
        assert_eq!(sc2, sc);
        assert_eq!(back.d(), m.d());
        assert_eq!(back.alpha(), 3.0);
        assert_eq!(back.certification, m.certification);
        let x = crate::operator::random_complex_gaussian(4, 1);
        assert!((back.apply_vec(&x).unwrap() - m.apply_vec(&x).unwrap()).norm() < 1e-14);
    }
}
