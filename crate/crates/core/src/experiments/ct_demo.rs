//! Desk-scale CT reconstruction comparing SQS, circulant and downsampled-Gram majorizers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ct::{
    build_projector, ct_reconstruct, downsampled_k, fbp, shepp_logan, AdmmOptions, CtProblem, Geometry,
    Reconstruction, Regularizer,
};
use crate::design::{certify, design, CertMode, DesignConfig, DesignProblem};
use crate::error::{Error, Result};
use crate::majorizer::{sqs_majorizer, Certification, MajorizerSpec, VerifyMode};
use crate::operator::{random_real_gaussian, Dft, DiagonalWeights, HermitianOperator, LinearOperator};

use super::sidecar::{majorizer_files, Sidecar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CtArm {
    Sqs,
    Circ,
    Down,
}

impl CtArm {
    pub fn name(self) -> &'static str {
        match self {
            CtArm::Sqs => "sqs",
            CtArm::Circ => "circ",
            CtArm::Down => "down",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtConfig {
    pub n: usize,
    pub n_views: usize,
    pub n_channels: usize,
    pub noise_seed: u64,
    /// Noise standard deviation relative to the largest line integral.
    pub noise_level: f64,
    pub phantom_scale: f64,
    pub delta: f64,
    pub strength: f64,
    pub outer_iters: usize,
    pub cg_iters: usize,
    pub design_iters: usize,
    pub design_seed: u64,
    pub cert: CertMode,
    pub view_factor: f64,
    pub channel_factor: f64,
    /// Weight `c` of the projector block in `K = [c A_down; I]`.
    pub down_block_scale: f64,
    pub arms: Vec<CtArm>,
    /// When nonzero, an SQS run of `reference_factor * outer_iters` iterations
    /// gives a reference cost for the summary. The reference is not converged either.
    pub reference_factor: usize,
}

impl Default for CtConfig {
    fn default() -> Self {
        Self {
            n: 64,
            n_views: 96,
            n_channels: 96,
            noise_seed: 7,
            noise_level: 0.01,
            phantom_scale: 0.02,
            delta: 0.002,
            strength: 1.0,
            outer_iters: 64,
            cg_iters: 5,
            design_iters: 128,
            design_seed: 1,
            cert: CertMode::Factor3,
            view_factor: 12.0,
            channel_factor: 7.0,
            down_block_scale: 0.09,
            arms: vec![CtArm::Sqs, CtArm::Circ, CtArm::Down],
            reference_factor: 0,
        }
    }
}

impl CtConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.n, self.n_views, self.n_channels)
    }
}

/// Phantom, weights and noisy sinogram for a config.
#[derive(Clone, Debug)]
pub struct CtInstance {
    pub problem: CtProblem,
    pub truth: Vec<f64>,
}

/// Weights `0.05 + 0.95 t` where `t` rescales `exp(-Ax)` to `[0, 1]`; noise has
/// variance proportional to `1 / w`.
pub fn build_instance(cfg: &CtConfig) -> Result<CtInstance> {
    let geometry = cfg.geometry()?;
    let projector = build_projector(&geometry)?;
    let truth = shepp_logan(cfg.n, cfg.phantom_scale)?;
    let mut p = vec![0.0; projector.rows()];
    projector.forward_real(&truth, &mut p)?;
    let trans: Vec<f64> = p.iter().map(|v| (-v).exp()).collect();
    let (lo, hi) = trans.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let w: Vec<f64> = trans
        .iter()
        .map(|&t| if hi > lo { 0.05 + 0.95 * (t - lo) / (hi - lo) } else { 1.0 })
        .collect();
    let pmax = p.iter().copied().fold(0.0, f64::max);
    let noise = random_real_gaussian(p.len(), cfg.noise_seed);
    let y: Vec<f64> = p
        .iter()
        .zip(&noise)
        .zip(&w)
        .map(|((p, z), w)| p + cfg.noise_level * pmax * z / w.sqrt())
        .collect();
    let reg = Regularizer::new(cfg.delta, cfg.strength)?;
    let problem = CtProblem::new(projector, y, DiagonalWeights::positive(w)?, reg)?;
    Ok(CtInstance { problem, truth })
}

/// Majorizer of `h = gamma A^T A` for an arm, with its `K` descriptor.
pub fn build_ct_majorizer(arm: CtArm, cfg: &CtConfig, h: &HermitianOperator) -> Result<(MajorizerSpec, String)> {
    let geometry = cfg.geometry()?;
    let design_cfg = DesignConfig {
        iters: cfg.design_iters,
        seed: cfg.design_seed,
        cert: cfg.cert,
        ..DesignConfig::default()
    };
    match arm {
        CtArm::Sqs => Ok((sqs_majorizer(h, true)?, "identity".to_string())),
        CtArm::Circ => {
            // Images are real, so only the real part of M acts; averaging d over
            // conjugate frequencies makes M real and certification real-valued.
            let k = LinearOperator::dft2(cfg.n, cfg.n)?;
            let p = DesignProblem::unweighted(h.clone(), k.clone())?;
            let raw = design(&p, &DesignConfig { cert: CertMode::None, ..design_cfg })?;
            let d = Dft::new_2d(cfg.n, cfg.n)?.conjugate_pair_average(raw.majorizer.d())?;
            let unscaled = MajorizerSpec::new(k, d, 1.0, Certification::uncertified())?;
            Ok((certify(&unscaled, h, &design_cfg)?, "dft2".to_string()))
        }
        CtArm::Down => {
            let k = downsampled_k(&geometry, cfg.view_factor, cfg.channel_factor, cfg.down_block_scale)?;
            let p = DesignProblem::unweighted(h.clone(), k)?;
            let desc = format!("stacked:{}*projector@ct_down_geometry.toml+identity", cfg.down_block_scale);
            Ok((design(&p, &design_cfg)?.majorizer, desc))
        }
    }
}

#[derive(Clone, Debug)]
pub struct CtArmResult {
    pub arm: CtArm,
    pub majorizer: MajorizerSpec,
    pub k_descriptor: String,
    pub reconstruction: Reconstruction,
}

#[derive(Clone, Debug)]
pub struct CtReport {
    pub config: CtConfig,
    pub instance: CtInstance,
    pub fbp: Vec<f64>,
    pub arms: Vec<CtArmResult>,
    pub reference: Option<Reconstruction>,
}

/// Builds the instance and runs every configured arm (concurrently).
pub fn run_ct_demo(cfg: &CtConfig) -> Result<CtReport> {
    if cfg.arms.is_empty() {
        return Err(Error::InvalidInput("ct demo needs at least one majorizer arm".into()));
    }
    let instance = build_instance(cfg)?;
    let prob = &instance.problem;
    let gamma = prob.gamma();
    let h = prob.split_hessian(gamma)?;
    let x0 = fbp(&prob.projector, &prob.y)?;
    let opts = AdmmOptions {
        outer_iters: cfg.outer_iters,
        cg_iters: cfg.cg_iters,
        x0: Some(x0.clone()),
        gamma: Some(gamma),
        verify: VerifyMode::Lanczos,
    };
    let results: Vec<Result<CtArmResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .arms
            .iter()
            .map(|&arm| {
                let (h, opts) = (&h, &opts);
                s.spawn(move || -> Result<CtArmResult> {
                    let (majorizer, k_descriptor) = build_ct_majorizer(arm, cfg, h)?;
                    log::info!("ct {}: alpha = {:.6e}", arm.name(), majorizer.alpha());
                    let reconstruction = ct_reconstruct(prob, &majorizer, opts)?;
                    Ok(CtArmResult {
                        arm,
                        majorizer,
                        k_descriptor,
                        reconstruction,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidInput("ct arm panicked".into()))))
            .collect()
    });
    let arms = results.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = if cfg.reference_factor > 0 {
        let long = AdmmOptions {
            outer_iters: cfg.reference_factor * cfg.outer_iters,
            ..opts
        };
        Some(ct_reconstruct(prob, &sqs_majorizer(&h, true)?, &long)?)
    } else {
        None
    };
    Ok(CtReport {
        config: cfg.clone(),
        instance,
        fbp: x0,
        arms,
        reference,
    })
}

/// Single-column CSV with a `rows,cols` header line, values in row-major order.
pub fn format_image_csv(rows: usize, cols: usize, values: &[f64]) -> String {
    let mut out = format!("{rows},{cols}\n");
    for v in values {
        let _ = writeln!(out, "{v:.17e}");
    }
    out
}

pub fn parse_image_csv(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty image file".into()))?;
    let (r, c) = header
        .split_once(',')
        .and_then(|(r, c)| Some((r.trim().parse::<usize>().ok()?, c.trim().parse::<usize>().ok()?)))
        .ok_or_else(|| Error::Parse("image header must be 'rows,cols'".into()))?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != r * c {
        return Err(Error::Parse(format!("image declares {r}x{c} but holds {} values", values.len())));
    }
    Ok((r, c, values))
}

impl CtReport {
    pub fn files(&self) -> Result<Vec<(PathBuf, String)>> {
        let cfg = &self.config;
        let g = cfg.geometry()?;
        let prob = &self.instance.problem;
        let mut files = vec![
            (PathBuf::from("ct_config.toml"), cfg.to_toml()?),
            (PathBuf::from("ct_phantom.csv"), format_image_csv(cfg.n, cfg.n, &self.instance.truth)),
            (PathBuf::from("ct_sinogram.csv"), format_image_csv(g.n_views, g.n_channels, &prob.y)),
            (PathBuf::from("ct_fbp.csv"), format_image_csv(cfg.n, cfg.n, &self.fbp)),
        ];
        let mut verification = String::from("arm,alpha,certification,ratio_estimate,min_eig,lambda_max_h,ritz_residual,holds\n");
        let mut summary = String::from("arm,final_iter,final_cost\n");
        for a in &self.arms {
            let name = a.arm.name();
            let rec = &a.reconstruction;
            let v = &rec.verification;
            let _ = writeln!(
                verification,
                "{},{:.17e},{},{},{:.17e},{:.17e},{:.3e},{}",
                name,
                a.majorizer.alpha(),
                a.majorizer.certification.method.tag(),
                a.majorizer.certification.ratio_estimate.map(|r| format!("{r:.17e}")).unwrap_or_default(),
                v.min_eig,
                v.lambda_max_h,
                v.residual,
                v.holds
            );
            let last = rec.trace.last().expect("trace has the initial record");
            let _ = writeln!(summary, "{},{},{:.17e}", name, last.iter, last.cost);
            files.push((PathBuf::from(format!("ct_{name}_trace.csv")), rec.trace.to_csv()));
            files.push((PathBuf::from(format!("ct_{name}_image.csv")), format_image_csv(cfg.n, cfg.n, &rec.image)));
            let mut sc = Sidecar::describe(&a.majorizer, &a.k_descriptor, &format!("ct_{name}_majorizer_d.mtx"));
            sc.seed = Some(cfg.design_seed);
            sc.iters = Some(cfg.design_iters);
            files.extend(majorizer_files(&a.majorizer, &sc, &format!("ct_{name}_majorizer"))?);
            if a.arm == CtArm::Down {
                let coarse = g.downsampled(cfg.view_factor, cfg.channel_factor)?;
                let text = toml::to_string(&coarse).map_err(|e| Error::Parse(e.to_string()))?;
                files.push((PathBuf::from("ct_down_geometry.toml"), text));
            }
        }
        if let Some(rec) = &self.reference {
            let last = rec.trace.last().expect("trace has the initial record");
            let _ = writeln!(summary, "reference,{},{:.17e}", last.iter, last.cost);
            files.push((PathBuf::from("ct_reference_image.csv"), format_image_csv(cfg.n, cfg.n, &rec.image)));
        }
        files.push((PathBuf::from("ct_verification.csv"), verification));
        files.push((PathBuf::from("ct_summary.csv"), summary));
        Ok(files)
    }
}

pub fn read_config(path: &Path) -> Result<CtConfig> {
    if !path.is_file() {
        return Err(Error::InvalidInput(format!("config '{}' does not exist", path.display())));
    }
    CtConfig::from_toml(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg = CtConfig::default();
        assert_eq!(CtConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        let partial = CtConfig::from_toml("n = 32\narms = [\"sqs\"]\n").unwrap();
        assert_eq!(partial.n, 32);
        assert_eq!(partial.outer_iters, 64);
        assert!(CtConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn image_csv_round_trip() {
        let text = format_image_csv(2, 3, &[1.0, -2.5, 0.0, 1e-300, 3.25, 7.0]);
        let (r, c, v) = parse_image_csv(&text).unwrap();
        assert_eq!((r, c), (2, 3));
        assert_eq!(v, vec![1.0, -2.5, 0.0, 1e-300, 3.25, 7.0]);
        assert!(parse_image_csv("2,2\n1\n").is_err());
    }

    #[test]
    fn instance_weights_in_range() {
        let cfg = CtConfig {
            n: 16,
            n_views: 12,
            n_channels: 16,
            ..CtConfig::default()
        };
        let inst = build_instance(&cfg).unwrap();
        let w = inst.problem.w.values();
        let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = w.iter().copied().fold(0.0, f64::max);
        assert!((lo - 0.05).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }
}
