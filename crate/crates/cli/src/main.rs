use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mmdesign::design::{design, CertMode, DesignConfig, DesignProblem};
use mmdesign::experiments::ct_demo::{read_config, run_ct_demo, CtConfig};
use mmdesign::experiments::sidecar::{load_majorizer, majorizer_files, Sidecar};
use mmdesign::experiments::sources::{parse_k, parse_weights, HSource};
use mmdesign::experiments::toeplitz::{run_toeplitz, spectrum_csv, ToeplitzConfig};
use mmdesign::experiments::write_outputs;
use mmdesign::majorizer::{verify_majorization, VerifyMode};
use mmdesign::solvers::majorized_spectrum;
use mmdesign::Error;

/// Designs, certifies and exercises structured majorizers.
#[derive(Parser, Debug)]
#[command(name = "mmdesign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct OutDir {
    /// Output directory.
    #[arg(long = "out", env = "MMDESIGN_OUT", default_value = "mmdesign-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cert {
    Power,
    Factor3,
    None,
}

impl From<Cert> for CertMode {
    fn from(c: Cert) -> Self {
        match c {
            Cert::Power => CertMode::Power,
            Cert::Factor3 => CertMode::Factor3,
            Cert::None => CertMode::None,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Dense,
    Lanczos,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design a majorizer `alpha K^H diag(d) K` for a Hessian.
    Design {
        /// Matrix Market file or generator (`diag:1..8`, `toeplitz:N=128`).
        #[arg(long = "H")]
        h: String,
        /// `K` descriptor, e.g. `identity`, `dft`, `stacked:dft+identity`.
        #[arg(long = "K", default_value = "identity")]
        k: String,
        /// `uniform` or a weight vector file.
        #[arg(long = "W", default_value = "uniform")]
        w: String,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Cert::Factor3)]
        cert: Cert,
        /// Stem of the output files.
        #[arg(long, default_value = "majorizer")]
        name: String,
        #[command(flatten)]
        out: OutDir,
    },
    /// Check that a saved majorizer dominates a Hessian; exit status 0 iff it does.
    Verify {
        /// Majorizer sidecar (`.toml`).
        #[arg(long = "M")]
        m: PathBuf,
        #[arg(long = "H")]
        h: String,
        #[arg(long, value_enum, default_value_t = Mode::Dense)]
        mode: Mode,
    },
    /// Write the majorized spectrum `eig(M^-1/2 H M^-1/2)`.
    Spectrum {
        #[arg(long = "M")]
        m: PathBuf,
        #[arg(long = "H")]
        h: String,
        #[command(flatten)]
        out: OutDir,
    },
    /// MM on the weighted Toeplitz problem with five majorizers.
    Toeplitz {
        #[arg(long = "N", default_value_t = 128)]
        n: usize,
        /// Design iterations for the designed arms.
        #[arg(long, default_value_t = 128)]
        iters: usize,
        /// Seed of the MM start and linear term.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Cert::Power)]
        cert: Cert,
        #[arg(long, default_value_t = 60_000)]
        mm_iters: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// ADMM CT reconstruction with SQS, circulant and downsampled-Gram majorizers.
    CtDemo {
        /// TOML config; missing keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Outer ADMM iterations (overrides the config).
        #[arg(long)]
        iters: Option<usize>,
        /// Noise seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        cert: Option<Cert>,
        /// Also run SQS for this many times the iteration budget as a reference.
        #[arg(long)]
        reference: Option<usize>,
        #[command(flatten)]
        out: OutDir,
    },
}

fn verify_mode(mode: Mode) -> VerifyMode {
    match mode {
        Mode::Dense => VerifyMode::Dense,
        Mode::Lanczos => VerifyMode::Lanczos,
    }
}

fn cmd_design(
    h_desc: &str,
    k_desc: &str,
    w_desc: &str,
    iters: usize,
    seed: u64,
    cert: Cert,
    name: &str,
    out: &Path,
) -> Result<bool> {
    let h = HSource::parse(h_desc)?.load()?;
    let n = h.dim();
    let k = parse_k(k_desc, n, Path::new(".")).with_context(|| format!("parsing K descriptor '{k_desc}'"))?;
    let w = parse_weights(w_desc, k.rows())?;
    let problem = DesignProblem::new(h.clone(), k, w)?;
    let config = DesignConfig {
        iters,
        seed,
        cert: cert.into(),
        ..DesignConfig::default()
    };
    let result = design(&problem, &config)?;
    let m = &result.majorizer;
    if !matches!(cert, Cert::None) {
        let mode = if n <= 2048 { VerifyMode::Dense } else { VerifyMode::Lanczos };
        let v = verify_majorization(m, &h, mode)?;
        if !v.holds {
            eprintln!("certification failed: min eigenvalue of M - H is {:e}; nothing written", v.min_eig);
            return Ok(false);
        }
    }
    let mut sc = Sidecar::describe(m, k_desc, &format!("{name}_d.mtx"));
    sc.h = Some(h_desc.to_string());
    sc.seed = Some(seed);
    sc.iters = Some(iters);
    let mut files = majorizer_files(m, &sc, name)?;
    files.push((PathBuf::from(format!("{name}_trace.csv")), result.trace_csv()));
    write_outputs(out, &files)?;
    let last = result.trace.last().expect("trace starts with iteration 0");
    println!(
        "alpha {:.6e} ({}), dual value {:.6e}, grad norm {:.3e} after {} iterations ({:?})",
        m.alpha(),
        m.certification.method.tag(),
        last.dual_value,
        last.grad_norm,
        last.iter,
        result.stop
    );
    println!("wrote {}", out.join(format!("{name}.toml")).display());
    Ok(true)
}

fn cmd_verify(m_path: &Path, h_desc: &str, mode: Mode) -> Result<bool> {
    let (m, _) = load_majorizer(m_path)?;
    let h = HSource::parse(h_desc)?.load()?;
    let v = match verify_majorization(&m, &h, verify_mode(mode)) {
        Err(Error::MaterializeCap { rows, cols, .. }) => {
            bail!("a dense check of a {rows}x{cols} operator is too large; rerun with --mode lanczos")
        }
        other => other?,
    };
    println!("min_eig {}", v.min_eig);
    println!("lambda_max_h {}", v.lambda_max_h);
    if matches!(mode, Mode::Lanczos) {
        println!("ritz_residual {:e}", v.residual);
    }
    println!("{}", if v.holds { "majorization holds" } else { "majorization FAILS" });
    Ok(v.holds)
}

fn cmd_spectrum(m_path: &Path, h_desc: &str, out: &Path) -> Result<bool> {
    let (m, _) = load_majorizer(m_path)?;
    let h = HSource::parse(h_desc)?.load()?;
    let spec = match majorized_spectrum(&m, &h) {
        Err(Error::MaterializeCap { rows, cols, .. }) => {
            bail!("the majorized spectrum needs a dense {rows}x{cols} matrix, which exceeds the cap")
        }
        other => other?,
    };
    write_outputs(out, &[(PathBuf::from("spectrum.csv"), spectrum_csv(&spec))])?;
    println!(
        "min {:.6e} max {:.6e} ({} eigenvalues) -> {}",
        spec.first().copied().unwrap_or(f64::NAN),
        spec.last().copied().unwrap_or(f64::NAN),
        spec.len(),
        out.join("spectrum.csv").display()
    );
    Ok(true)
}

fn cmd_toeplitz(cfg: ToeplitzConfig, out: &Path) -> Result<bool> {
    let report = run_toeplitz(&cfg)?;
    let files = report.files()?;
    write_outputs(out, &files)?;
    let summary = &files.last().expect("summary is written last").1;
    print!("{summary}");
    let failed = report.arms.iter().filter(|a| a.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} arm(s) aborted; see toeplitz_verification.csv");
    }
    Ok(failed == 0)
}

fn cmd_ct_demo(cfg: CtConfig, out: &Path) -> Result<bool> {
    let report = run_ct_demo(&cfg)?;
    let files = report.files()?;
    write_outputs(out, &files)?;
    for a in &report.arms {
        let last = a.reconstruction.trace.last().expect("trace has the initial record");
        println!(
            "{:<5} alpha {:.4e}  cost after {} iterations {:.6e}",
            a.arm.name(),
            a.majorizer.alpha(),
            last.iter,
            last.cost
        );
    }
    if let Some(rec) = &report.reference {
        let last = rec.trace.last().expect("trace has the initial record");
        println!("reference cost after {} SQS iterations {:.6e}", last.iter, last.cost);
    }
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Design {
            h,
            k,
            w,
            iters,
            seed,
            cert,
            name,
            out,
        } => cmd_design(&h, &k, &w, iters, seed, cert, &name, &out.out),
        Command::Verify { m, h, mode } => cmd_verify(&m, &h, mode),
        Command::Spectrum { m, h, out } => cmd_spectrum(&m, &h, &out.out),
        Command::Toeplitz {
            n,
            iters,
            seed,
            cert,
            mm_iters,
            out,
        } => {
            let cfg = ToeplitzConfig {
                n,
                design_iters: iters,
                seed,
                cert: cert.into(),
                mm_iters,
                ..ToeplitzConfig::default()
            };
            cmd_toeplitz(cfg, &out.out)
        }
        Command::CtDemo {
            config,
            iters,
            seed,
            cert,
            reference,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => read_config(&path)?,
                None => CtConfig::default(),
            };
            if let Some(v) = iters {
                cfg.outer_iters = v;
            }
            if let Some(v) = seed {
                cfg.noise_seed = v;
            }
            if let Some(v) = cert {
                cfg.cert = v.into();
            }
            if let Some(v) = reference {
                cfg.reference_factor = v;
            }
            cmd_ct_demo(cfg, &out.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
