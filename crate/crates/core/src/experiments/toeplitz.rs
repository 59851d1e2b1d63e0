//! MM on a weighted Toeplitz least-squares problem with five majorizers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::design::{design, CertMode, DesignConfig, DesignProblem};
use crate::error::{Error, Result};
use crate::majorizer::{
    best_circulant_approx, circulant_as_majorizer, lipschitz_majorizer, scale_to_majorize, sqs_majorizer,
    verify_majorization, MajorizerSpec, Verification, VerifyMode,
};
use crate::operator::{random_real_gaussian, real_vector, HermitianOperator, LinearOperator};
use crate::solvers::{majorized_spectrum, mm_quadratic, ConvergenceTrace, MmOptions, QuadraticProblem, SolveOptions};

use super::sources::{parse_k, toeplitz_hessian};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    Lipschitz,
    Sqs,
    DesignDiag,
    DesignCircDiag,
    Circ,
}

impl Arm {
    pub const ALL: [Arm; 5] = [Arm::Lipschitz, Arm::Sqs, Arm::DesignDiag, Arm::DesignCircDiag, Arm::Circ];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Lipschitz => "lipschitz",
            Arm::Sqs => "sqs",
            Arm::DesignDiag => "design-diag",
            Arm::DesignCircDiag => "design-circ-diag",
            Arm::Circ => "circ",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToeplitzConfig {
    pub n: usize,
    pub design_iters: usize,
    pub design_seed: u64,
    /// Certification of the designed arms.
    pub cert: CertMode,
    /// Seed of the random start `x0` and linear term `g`.
    pub seed: u64,
    pub mm_iters: usize,
    pub stop_relative: f64,
    pub record_every: usize,
    /// Safety inflation of power-iteration scalings.
    pub tol: f64,
}

impl Default for ToeplitzConfig {
    fn default() -> Self {
        Self {
            n: 128,
            design_iters: 128,
            design_seed: 1,
            cert: CertMode::Power,
            seed: 0,
            mm_iters: 60_000,
            stop_relative: 1e-6,
            record_every: 100,
            tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ArmResult {
    pub arm: Arm,
    pub majorizer: MajorizerSpec,
    pub verification: Verification,
    pub spectrum: Vec<f64>,
    pub trace: ConvergenceTrace,
}

#[derive(Clone, Debug)]
pub struct ToeplitzReport {
    pub config: ToeplitzConfig,
    pub arms: Vec<std::result::Result<ArmResult, String>>,
}

/// Builds the majorizer of one arm (before verification).
pub fn build_majorizer(arm: Arm, h: &HermitianOperator, cfg: &ToeplitzConfig) -> Result<MajorizerSpec> {
    let n = h.dim();
    let designed = |k: LinearOperator| -> Result<MajorizerSpec> {
        let p = DesignProblem::unweighted(h.clone(), k)?;
        let config = DesignConfig {
            iters: cfg.design_iters,
            seed: cfg.design_seed,
            cert: cfg.cert,
            tol: cfg.tol,
            ..DesignConfig::default()
        };
        Ok(design(&p, &config)?.majorizer)
    };
    match arm {
        Arm::Lipschitz => lipschitz_majorizer(h, cfg.tol, cfg.seed),
        Arm::Sqs => sqs_majorizer(h, true),
        Arm::DesignDiag => designed(LinearOperator::identity(n)?),
        Arm::DesignCircDiag => designed(parse_k("stacked:dft+identity", n, Path::new("."))?),
        Arm::Circ => {
            let approx = best_circulant_approx(&h.materialize()?)?;
            let LinearOperator::Circulant(c) = approx else {
                unreachable!("best_circulant_approx returns a circulant");
            };
            scale_to_majorize(&circulant_as_majorizer(&c)?, h, cfg.tol, cfg.seed)
        }
    }
}

fn run_arm(arm: Arm, q: &QuadraticProblem, x_star: &crate::operator::ComplexVector, cfg: &ToeplitzConfig) -> Result<ArmResult> {
    let majorizer = build_majorizer(arm, &q.h, cfg)?;
    let verification = verify_majorization(&majorizer, &q.h, VerifyMode::Dense)?;
    if !verification.holds {
        return Err(Error::MajorizationViolated(format!(
            "{} fails verification (min eigenvalue {:e})",
            arm.name(),
            verification.min_eig
        )));
    }
    let spectrum = majorized_spectrum(&majorizer, &q.h)?;
    let trace = mm_quadratic(
        q,
        &majorizer,
        Some(x_star),
        MmOptions {
            iters: cfg.mm_iters,
            stop_relative: Some(cfg.stop_relative),
            record_every: cfg.record_every,
            solve: SolveOptions {
                max_iters: 500,
                tol: 1e-12,
            },
        },
    )?;
    Ok(ArmResult {
        arm,
        majorizer,
        verification,
        spectrum,
        trace,
    })
}

/// Runs every arm; arms execute concurrently and a failing arm does not stop the others.
pub fn run_toeplitz(cfg: &ToeplitzConfig) -> Result<ToeplitzReport> {
    let h = toeplitz_hessian(cfg.n)?;
    let g = real_vector(&random_real_gaussian(cfg.n, cfg.seed));
    let x0 = real_vector(&random_real_gaussian(cfg.n, cfg.seed.wrapping_add(1)));
    let q = QuadraticProblem::new(h, g, x0)?;
    let x_star = q.dense_solution()?;
    let arms = std::thread::scope(|s| {
        let handles: Vec<_> = Arm::ALL
            .iter()
            .map(|&arm| {
                let (q, x_star) = (&q, &x_star);
                s.spawn(move || run_arm(arm, q, x_star, cfg).map_err(|e| format!("{}: {e}", arm.name())))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err("arm panicked".to_string())))
            .collect::<Vec<_>>()
    });
    for a in &arms {
        if let Err(msg) = a {
            log::error!("toeplitz arm aborted: {msg}");
        }
    }
    Ok(ToeplitzReport {
        config: cfg.clone(),
        arms,
    })
}

pub fn spectrum_csv(spectrum: &[f64]) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (i, v) in spectrum.iter().enumerate() {
        let _ = writeln!(out, "{i},{v:.17e}");
    }
    out
}

/// One summary line, computed only from an arm's trace and spectrum CSV text.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub arm: String,
    /// First recorded iteration with relative distance at or below the threshold.
    pub iterations_to_tol: Option<usize>,
    pub final_iter: usize,
    pub final_relative_distance: f64,
    pub spectrum_min: f64,
    pub spectrum_max: f64,
}

impl SummaryRow {
    pub fn spread(&self) -> f64 {
        self.spectrum_max - self.spectrum_min
    }

    /// Sort key for "converges faster": iterations to tolerance, then final distance.
    pub fn speed_key(&self) -> (usize, f64) {
        (self.iterations_to_tol.unwrap_or(usize::MAX), self.final_relative_distance)
    }
}

fn parse_csv_rows(text: &str, header: &str) -> Result<Vec<Vec<String>>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::Parse(format!("expected CSV header '{header}'")));
    }
    Ok(lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("bad number '{s}' in CSV")))
}

pub fn summarize(arm: &str, trace_csv: &str, spectrum_csv: &str, stop_relative: f64) -> Result<SummaryRow> {
    let rows = parse_csv_rows(trace_csv, "iter,distance,cost")?;
    let first = rows.first().ok_or_else(|| Error::Parse("empty trace".into()))?;
    let d0: f64 = num(&first[1])?;
    let mut iterations_to_tol = None;
    let mut last = (0usize, 1.0f64);
    for r in &rows {
        let iter: usize = num(&r[0])?;
        let rel = if d0 > 0.0 { num::<f64>(&r[1])? / d0 } else { 0.0 };
        if iterations_to_tol.is_none() && rel <= stop_relative {
            iterations_to_tol = Some(iter);
        }
        last = (iter, rel);
    }
    let spec = parse_csv_rows(spectrum_csv, "index,eigenvalue")?
        .iter()
        .map(|r| num::<f64>(&r[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(SummaryRow {
        arm: arm.to_string(),
        iterations_to_tol,
        final_iter: last.0,
        final_relative_distance: last.1,
        spectrum_min: spec.iter().copied().fold(f64::INFINITY, f64::min),
        spectrum_max: spec.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

impl ToeplitzReport {
    /// Output files (relative names and contents): per-arm traces and spectra,
    /// a verification report and the summary table derived from the CSVs.
    pub fn files(&self) -> Result<Vec<(PathBuf, String)>> {
        let mut files = Vec::new();
        let mut verification = String::from("arm,status,alpha,certification,min_eig,lambda_max_h\n");
        let mut summary = String::from(
            "arm,iterations_to_tol,final_iter,final_relative_distance,spectrum_min,spectrum_max,spread\n",
        );
        for (arm, res) in Arm::ALL.iter().zip(&self.arms) {
            match res {
                Ok(a) => {
                    let trace = a.trace.to_csv();
                    let spec = spectrum_csv(&a.spectrum);
                    let row = summarize(arm.name(), &trace, &spec, self.config.stop_relative)?;
                    let _ = writeln!(
                        verification,
                        "{},ok,{:.17e},{},{:.17e},{:.17e}",
                        arm.name(),
                        a.majorizer.alpha(),
                        a.majorizer.certification.method.tag(),
                        a.verification.min_eig,
                        a.verification.lambda_max_h
                    );
                    let _ = writeln!(
                        summary,
                        "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e}",
                        row.arm,
                        row.iterations_to_tol.map(|v| v.to_string()).unwrap_or_else(|| "none".into()),
                        row.final_iter,
                        row.final_relative_distance,
                        row.spectrum_min,
                        row.spectrum_max,
                        row.spread()
                    );
                    files.push((PathBuf::from(format!("toeplitz_{}_trace.csv", arm.name())), trace));
                    files.push((PathBuf::from(format!("toeplitz_{}_spectrum.csv", arm.name())), spec));
                }
                Err(msg) => {
                    let _ = writeln!(verification, "{},failed: {},,,,", arm.name(), msg.replace(',', ";"));
                }
            }
        }
        files.push((PathBuf::from("toeplitz_verification.csv"), verification));
        files.push((PathBuf::from("toeplitz_summary.csv"), summary));
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_reads_csvs() {
        let trace = "iter,distance,cost\n0,2.0e0,1\n10,1.0e-3,0\n17,1.5e-6,0\n";
        let spec = "index,eigenvalue\n0,0.25\n1,0.5\n2,0.999\n";
        let row = summarize("x", trace, spec, 1e-6).unwrap();
        assert_eq!(row.iterations_to_tol, Some(17));
        assert_eq!(row.final_iter, 17);
        assert!((row.spread() - 0.749).abs() < 1e-12);
        let row = summarize("x", trace, spec, 1e-9).unwrap();
        assert_eq!(row.iterations_to_tol, None);
        assert!(summarize("x", "bad\n", spec, 1e-6).is_err());
    }

    #[test]
    fn small_instance_runs_all_arms() {
        let cfg = ToeplitzConfig {
            n: 16,
            design_iters: 64,
            mm_iters: 20_000,
            record_every: 50,
            ..ToeplitzConfig::default()
        };
        let report = run_toeplitz(&cfg).unwrap();
        for (arm, r) in Arm::ALL.iter().zip(&report.arms) {
            let r = r.as_ref().unwrap_or_else(|e| panic!("{e}"));
            assert!(r.verification.holds, "{}", arm.name());
            assert!(r.spectrum.iter().all(|&l| l <= 1.0 + 1e-8), "{}", arm.name());
        }
        let files = report.files().unwrap();
        assert_eq!(files.len(), 2 * 5 + 2);
    }
}
