use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drphase::{Error, GridShape, Sector, Variant};
use drphase_experiments::csv::opt;
use drphase_experiments::image::{gen_image, parse_pair, support_rank, write_pgm_pair, ImageKind, TestImage};
use drphase_experiments::runners::{self, AlgoChoice, ExperimentConfig, InitChoice};

/// Douglas-Rachford phase retrieval experiments.
#[derive(Parser)]
#[command(name = "drphase", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a test object as a PGM pair plus range sidecar.
    GenImage(ImageArgs),
    /// Certify the spectral gap: λ2 by power iteration per trial.
    SpectralCert(RunArgs),
    /// Error curves of FDR and ODR started near the solution, next to λ2^k.
    LocalRate(RunArgs),
    /// Convergence curves from random and constant initializations.
    Global(RunArgs),
    /// Final error against noise-to-signal ratio.
    NoiseSweep(RunArgs),
    /// Mean final error of ODR against the extension ratio ñ/n.
    PaddingSweep(RunArgs),
}

#[derive(Args)]
struct ImageArgs {
    /// Grid shape, e.g. 16x16.
    #[arg(long, default_value = "16x16")]
    shape: String,
    /// rpp, rpp:ALPHA,BETA, tcb or file:PREFIX.
    #[arg(long, default_value = "rpp")]
    image: String,
    /// Zero rows/columns around the object.
    #[arg(long, default_value_t = 1)]
    margin: usize,
    /// Phase sector `a,b` meaning [-a pi, b pi]; also bounds plain `rpp` phases.
    #[arg(long)]
    sector: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path (prefix for gen-image, CSV file otherwise; stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    image: ImageArgs,
    /// one-mask, one-and-half, two-mask, multi:L or multi-coded:L.
    #[arg(long, default_value = "one-and-half")]
    variant: String,
    /// fdr or odr:RATIO (ñ = RATIO n).
    #[arg(long, default_value = "fdr")]
    algo: String,
    /// Comma-separated initializations: ri, ci, near:DELTA.
    #[arg(long, value_delimiter = ',')]
    init: Vec<String>,
    /// Comma-separated noise-to-signal ratios.
    #[arg(long, value_delimiter = ',')]
    nsr: Vec<f64>,
    /// Comma-separated ratios ñ/n.
    #[arg(long, value_delimiter = ',')]
    ntilde: Vec<f64>,
    /// Comma-separated iteration budgets for the noise sweep.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

/// Exit status classes.
enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_) | Error::Construction(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<String, Failure>;

fn sector_of(args: &ImageArgs) -> Result<Sector, Error> {
    match &args.sector {
        Some(s) => {
            let (a, b) = parse_pair(s)?;
            Sector::new(a, b)
        }
        None => Ok(Sector::inactive()),
    }
}

fn test_image(args: &ImageArgs) -> Result<TestImage, Error> {
    let shape: GridShape = args.shape.parse()?;
    let mut kind: ImageKind = args.image.parse()?;
    if let ImageKind::Rpp { alpha, beta, seed } = &mut kind {
        *seed = args.seed;
        if args.image == "rpp" && args.sector.is_some() {
            let s = sector_of(args)?;
            (*alpha, *beta) = (s.alpha, s.beta);
        }
    }
    Ok(TestImage::new(kind, shape, args.margin))
}

fn config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let variant: Variant = args.variant.parse()?;
    let mut cfg = ExperimentConfig::new(test_image(&args.image)?, variant);
    cfg.trials = args.trials;
    cfg.seed = args.image.seed;
    cfg.algorithm = args.algo.parse::<AlgoChoice>()?;
    cfg.sector = sector_of(&args.image)?;
    cfg.max_iters = args.max_iters;
    cfg.tol = args.tol;
    if !args.init.is_empty() {
        cfg.inits = args.init.iter().map(|s| s.parse::<InitChoice>()).collect::<Result<_, _>>()?;
    }
    if !args.nsr.is_empty() {
        cfg.nsr = args.nsr.clone();
    }
    if !args.ntilde.is_empty() {
        cfg.ntilde = args.ntilde.clone();
    }
    if !args.budgets.is_empty() {
        cfg.budgets = args.budgets.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn gen_image_cmd(args: &ImageArgs) -> Outcome {
    let img = test_image(args)?;
    let out = args
        .out
        .as_ref()
        .ok_or_else(|| Failure::Config("gen-image needs --out PREFIX".into()))?;
    let x = gen_image(&img)?;
    write_pgm_pair(out, &x, &img.shape)?;
    Ok(format!(
        "gen-image: {} {} written to {}.{{re.pgm,im.pgm,map}}, support rank {}",
        img.kind,
        img.shape,
        out.display(),
        support_rank(&x, &img.shape)
    ))
}

fn spectral_cert_cmd(args: &RunArgs) -> Outcome {
    let cfg = config(args)?;
    let rows = runners::run_spectral_cert(&cfg)?;
    runners::write_spectral_cert(&cfg, &rows, sink(&args.image.out)?)?;
    let worst = rows.iter().map(|r| r.report.lambda2).fold(0.0, f64::max);
    let failed = rows.iter().filter(|r| !r.report.converged).count();
    if failed > 0 {
        return Err(Failure::Numerical(format!(
            "power iteration did not converge in {failed} of {} trials",
            rows.len()
        )));
    }
    Ok(format!(
        "spectral-cert: {} trials, max λ2 = {worst:.9}, gap certified: {}",
        rows.len(),
        worst < 1.0 - 1e-6
    ))
}

fn local_rate_cmd(args: &RunArgs) -> Outcome {
    let cfg = config(args)?;
    let trials = runners::run_local_rate(&cfg)?;
    runners::write_local_rate(&cfg, &trials, sink(&args.image.out)?)?;
    let mut parts = Vec::new();
    for t in &trials {
        let rates: Vec<String> = t
            .curves
            .iter()
            .map(|c| format!("{}={}{}", c.algo, opt(c.rate), if c.geometric { "" } else { "(non-geometric)" }))
            .collect();
        let flag = if t.spectral_converged { "" } else { " (power iteration unconverged)" };
        parts.push(format!("trial {}: λ2={:.6}{flag} {}", t.trial, t.lambda2, rates.join(" ")));
    }
    Ok(format!("local-rate: {}", parts.join("; ")))
}

fn global_cmd(args: &RunArgs) -> Outcome {
    let cfg = config(args)?;
    let runs = runners::run_global(&cfg)?;
    runners::write_global(&cfg, &runs, sink(&args.image.out)?)?;
    let rates: Vec<String> = cfg
        .inits
        .iter()
        .map(|&i| {
            format!(
                "{i}: {:.0}% at 1e-4, {:.0}% at 1e-8",
                100.0 * runners::success_rate(&runs, i, runners::VISUAL_THRESHOLD),
                100.0 * runners::success_rate(&runs, i, runners::NUMERIC_THRESHOLD)
            )
        })
        .collect();
    Ok(format!("global: {} trials; {}", cfg.trials, rates.join("; ")))
}

fn noise_sweep_cmd(args: &RunArgs) -> Outcome {
    let cfg = config(args)?;
    let rep = runners::run_noise_sweep(&cfg)?;
    runners::write_noise_sweep(&cfg, &rep, sink(&args.image.out)?)?;
    Ok(format!(
        "noise-sweep: slope {} (large-scale reference {})",
        opt(rep.slope),
        runners::REFERENCE_NOISE_SLOPE
    ))
}

fn padding_sweep_cmd(args: &RunArgs) -> Outcome {
    let cfg = config(args)?;
    let (_, summary) = runners::run_padding_sweep(&cfg)?;
    runners::write_padding_sweep(&cfg, &summary, sink(&args.image.out)?)?;
    let parts: Vec<String> = summary
        .iter()
        .map(|s| format!("ñ/n={} mean={:.2e} success={:.2}", s.ratio, s.mean_error, s.success_rate))
        .collect();
    Ok(format!("padding-sweep: {}", parts.join("; ")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let (outcome, to_stdout) = match &cli.command {
        Command::GenImage(a) => (gen_image_cmd(a), true),
        Command::SpectralCert(a) => (spectral_cert_cmd(a), a.image.out.is_some()),
        Command::LocalRate(a) => (local_rate_cmd(a), a.image.out.is_some()),
        Command::Global(a) => (global_cmd(a), a.image.out.is_some()),
        Command::NoiseSweep(a) => (noise_sweep_cmd(a), a.image.out.is_some()),
        Command::PaddingSweep(a) => (padding_sweep_cmd(a), a.image.out.is_some()),
    };
    match outcome {
        Ok(summary) if to_stdout => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
