//! Seeded experiment runners. Trial `t` uses seed `base + t` for its mask,
//! image, initialization and noise; trials run in parallel and come back in
//! trial order, so every output is reproducible from the configuration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use drphase::model::{pattern_seed, synthesize_data};
use drphase::solvers::{Algorithm, Init, RecoveryResult};
use drphase::spectral::{lambda2_power, LinearizationPoint, SpectralReport};
use drphase::{Error, Operator, Result, Sector, Variant, C64};
use rayon::prelude::*;

use crate::csv::{opt, CsvWriter};
use crate::image::{gen_image, TestImage};

/// "Visually recovered".
pub const VISUAL_THRESHOLD: f64 = 1e-4;
/// "Numerically recovered".
pub const NUMERIC_THRESHOLD: f64 = 1e-8;
/// Reference slope of error versus noise level at large scale, reported for comparison.
pub const REFERENCE_NOISE_SLOPE: f64 = 2.2;
/// Aligned errors at or below this are treated as the numerical floor.
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitChoice {
    Random,
    Constant,
    Near(f64),
}

impl fmt::Display for InitChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitChoice::Random => f.write_str("ri"),
            InitChoice::Constant => f.write_str("ci"),
            InitChoice::Near(d) => write!(f, "near:{d}"),
        }
    }
}

impl FromStr for InitChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ri" => Ok(InitChoice::Random),
            "ci" => Ok(InitChoice::Constant),
            _ => {
                let delta = s
                    .strip_prefix("near:")
                    .and_then(|d| d.parse::<f64>().ok())
                    .filter(|d| *d >= 0.0)
                    .ok_or_else(|| Error::Parse(format!("unknown initialization {s:?}")))?;
                Ok(InitChoice::Near(delta))
            }
        }
    }
}

/// FDR, or ODR with `ñ = round(ratio n)` (clamped to `N`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlgoChoice {
    Fdr,
    Odr { ratio: f64 },
}

impl fmt::Display for AlgoChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgoChoice::Fdr => f.write_str("fdr"),
            AlgoChoice::Odr { ratio } => write!(f, "odr:{ratio}"),
        }
    }
}

impl FromStr for AlgoChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "fdr" {
            return Ok(AlgoChoice::Fdr);
        }
        s.strip_prefix("odr:")
            .and_then(|r| r.parse::<f64>().ok())
            .filter(|r| *r >= 1.0)
            .map(|ratio| AlgoChoice::Odr { ratio })
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?} (fdr or odr:RATIO)")))
    }
}

/// `ñ` for a ratio `ñ/n`, clamped to `[n, N]`.
pub fn ntilde_for(ratio: f64, op: &Operator) -> usize {
    let n = op.n();
    ((ratio * n as f64).round() as usize).clamp(n, op.num_measurements())
}

fn algorithm_for(choice: AlgoChoice, op: &Operator) -> Algorithm {
    match choice {
        AlgoChoice::Fdr => Algorithm::Fdr,
        AlgoChoice::Odr { ratio } => {
            let nt = ntilde_for(ratio, op);
            // At ñ = N the object-domain iteration is conjugate to FDR.
            if nt == op.num_measurements() {
                Algorithm::Fdr
            } else {
                Algorithm::Odr { ntilde: nt }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub image: TestImage,
    pub variant: Variant,
    pub trials: usize,
    pub seed: u64,
    pub algorithm: AlgoChoice,
    pub inits: Vec<InitChoice>,
    pub sector: Sector,
    pub max_iters: usize,
    pub tol: f64,
    /// Noise-to-signal ratios for the noise sweep.
    pub nsr: Vec<f64>,
    /// Iteration budgets at which the noise sweep reads off the error.
    pub budgets: Vec<usize>,
    /// Ratios `ñ/n` for the padding sweep (and the ODR run of the local-rate experiment).
    pub ntilde: Vec<f64>,
    pub power_tol: f64,
    pub power_iters: usize,
}

impl ExperimentConfig {
    pub fn new(image: TestImage, variant: Variant) -> Self {
        Self {
            image,
            variant,
            trials: 1,
            seed: 1,
            algorithm: AlgoChoice::Fdr,
            inits: vec![InitChoice::Random, InitChoice::Constant],
            sector: Sector::inactive(),
            max_iters: 2000,
            tol: 1e-10,
            nsr: vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2],
            budgets: vec![100, 200],
            ntilde: vec![4.0, 5.0, 6.0, 7.0, 8.0],
            power_tol: 1e-10,
            power_iters: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.max_iters == 0 || self.tol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("max-iters must be >= 1 and tol > 0");
        }
        if self.inits.is_empty() || self.nsr.is_empty() || self.ntilde.is_empty() || self.budgets.is_empty() {
            return bad("parameter grids must be nonempty");
        }
        if self.nsr.iter().any(|v| !(0.0..=0.5).contains(v)) {
            return bad("noise levels must lie in [0, 0.5]");
        }
        if self.ntilde.iter().any(|r| !(*r >= 1.0)) {
            return bad("ñ/n ratios must be >= 1");
        }
        if self.budgets.contains(&0) {
            return bad("iteration budgets must be positive");
        }
        Ok(())
    }

    /// One-line description written as the CSV comment.
    pub fn describe(&self, experiment: &str) -> String {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        let inits: Vec<String> = self.inits.iter().map(ToString::to_string).collect();
        let budgets: Vec<String> = self.budgets.iter().map(ToString::to_string).collect();
        let sector = if self.sector.active {
            format!("{},{}", self.sector.alpha, self.sector.beta)
        } else {
            "none".into()
        };
        format!(
            "experiment={experiment} image={} shape={} margin={} variant={} trials={} seed={} algo={} \
             init={} sector={sector} max_iters={} tol={:e} nsr={} budgets={} ntilde={} power_tol={:e}",
            self.image.kind,
            self.image.shape,
            self.image.margin,
            self.variant,
            self.trials,
            self.seed,
            self.algorithm,
            inits.join(";"),
            self.max_iters,
            self.tol,
            list(&self.nsr),
            budgets.join(";"),
            list(&self.ntilde),
            self.power_tol,
        )
    }

    fn trial_seed(&self, t: usize) -> u64 {
        self.seed.wrapping_add(t as u64)
    }

    fn init_for(&self, choice: InitChoice, trial_seed: u64) -> Init<f64> {
        match choice {
            InitChoice::Random => Init::Random {
                seed: pattern_seed(trial_seed, 2),
            },
            InitChoice::Constant => Init::Constant,
            InitChoice::Near(delta) => Init::NearSolution {
                delta,
                seed: pattern_seed(trial_seed, 4),
            },
        }
    }

    fn solver(&self, algo: Algorithm, init: Init<f64>, max_iters: usize) -> drphase::Config {
        drphase::Config::new(algo, init)
            .with_max_iters(max_iters)
            .with_tol(self.tol)
            .with_sector(self.sector)
    }
}

/// Object and operator of one trial.
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub x0: Vec<C64>,
    pub op: Operator,
}

pub fn setup_trial(cfg: &ExperimentConfig, index: usize) -> Result<Trial> {
    let seed = cfg.trial_seed(index);
    let x0 = gen_image(&cfg.image.with_seed(pattern_seed(seed, 1)))?;
    let op = Operator::new(cfg.variant, &cfg.image.shape, seed)?;
    Ok(Trial { index, seed, x0, op })
}

fn par_trials<R: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(Trial) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| f(setup_trial(cfg, t)?))
        .collect()
}

fn errors_of(res: &RecoveryResult<f64>) -> Vec<f64> {
    res.history.iter().filter_map(|h| h.rel_error).collect()
}

/// First iteration count (1-based) at which the error is at or below `threshold`.
pub fn iterations_to(errors: &[f64], threshold: f64) -> Option<usize> {
    errors.iter().position(|&e| e <= threshold).map(|k| k + 1)
}

/// Error after `budget` iterates; runs that stopped early keep their last value.
pub fn error_at(errors: &[f64], budget: usize) -> Option<f64> {
    errors.get(budget.min(errors.len()).checked_sub(1)?).copied()
}

/// Decay rate `exp(slope)` of a least-squares line through `ln e_k` over the
/// errors above `floor`; robust to the oscillation of rotating error modes.
pub fn fitted_rate(errors: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > floor)
        .map(|(k, &e)| (k as f64, e.ln()))
        .collect();
    least_squares_slope(&pts).map(f64::exp)
}

/// Slope of the ordinary least-squares line through `pts`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

// ---------------------------------------------------------------------------
// spectral-cert
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CertRow {
    pub seed: u64,
    pub n: usize,
    pub big_n: usize,
    pub report: SpectralReport<f64>,
}

pub fn run_spectral_cert(cfg: &ExperimentConfig) -> Result<Vec<CertRow>> {
    par_trials(cfg, |t| {
        let pt = LinearizationPoint::at_solution(&t.op, &t.x0)?;
        let report = lambda2_power(&pt, &t.op, cfg.power_tol, cfg.power_iters)?;
        Ok(CertRow {
            seed: t.seed,
            n: t.op.n(),
            big_n: t.op.num_measurements(),
            report,
        })
    })
}

pub fn write_spectral_cert<W: Write>(cfg: &ExperimentConfig, rows: &[CertRow], out: W) -> Result<W> {
    let header: Vec<&str> = SpectralReport::<f64>::CSV_HEADER.split(',').collect();
    let mut w = CsvWriter::new(out, &cfg.describe("spectral-cert"), &header)?;
    let variant = cfg.variant.to_string();
    for r in rows {
        let line = r.report.csv_row(r.seed, &variant, r.n, r.big_n);
        w.row(&line.split(',').collect::<Vec<_>>())?;
    }
    Ok(w.finish()?)
}

// ---------------------------------------------------------------------------
// local-rate
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct RateCurve {
    pub algo: String,
    pub errors: Vec<f64>,
    pub rate: Option<f64>,
    /// Reached the numerical floor with a contracting fit.
    pub geometric: bool,
}

#[derive(Clone, Debug)]
pub struct LocalRateTrial {
    pub trial: usize,
    pub seed: u64,
    pub lambda2: f64,
    pub spectral_converged: bool,
    pub curves: Vec<RateCurve>,
}

/// FDR and ODR from a start near the solution, next to `λ_2`.
///
/// The solver stops at the numerical floor; the perturbation size comes from
/// the first `near:δ` initialization (default `1e-3`).
pub fn run_local_rate(cfg: &ExperimentConfig) -> Result<Vec<LocalRateTrial>> {
    let delta = cfg
        .inits
        .iter()
        .find_map(|i| match i {
            InitChoice::Near(d) => Some(*d),
            _ => None,
        })
        .unwrap_or(1e-3);
    let odr_ratio = cfg.ntilde[0];
    par_trials(cfg, |t| {
        let pt = LinearizationPoint::at_solution(&t.op, &t.x0)?;
        let rep = lambda2_power(&pt, &t.op, cfg.power_tol, cfg.power_iters)?;
        let data = synthesize_data(&t.op, &t.x0, 0.0, 0)?;
        let init = cfg.init_for(InitChoice::Near(delta), t.seed);
        let mut curves = Vec::new();
        let algos = [
            ("fdr".to_string(), Algorithm::Fdr),
            (
                format!("odr:{odr_ratio}"),
                algorithm_for(AlgoChoice::Odr { ratio: odr_ratio }, &t.op),
            ),
        ];
        for (label, algo) in algos {
            let solver = cfg.solver(algo, init, cfg.max_iters).with_tol(ERROR_FLOOR);
            let res = drphase::run_solver(&solver, &t.op, &data.b, Some(&t.x0))?;
            let errors = errors_of(&res);
            let rate = fitted_rate(&errors, ERROR_FLOOR);
            let reached = errors.last().is_some_and(|&e| e <= 1e-10);
            curves.push(RateCurve {
                algo: label,
                rate,
                geometric: reached && rate.is_some_and(|r| r < 1.0),
                errors,
            });
        }
        Ok(LocalRateTrial {
            trial: t.index,
            seed: t.seed,
            lambda2: rep.lambda2,
            spectral_converged: rep.converged,
            curves,
        })
    })
}

pub fn write_local_rate<W: Write>(cfg: &ExperimentConfig, trials: &[LocalRateTrial], out: W) -> Result<W> {
    let mut w = CsvWriter::new(
        out,
        &cfg.describe("local-rate"),
        &["trial", "algo", "k", "error", "lambda2_ref"],
    )?;
    for t in trials {
        for c in &t.curves {
            for (i, e) in c.errors.iter().enumerate() {
                let k = i + 1;
                w.row(&[
                    t.trial.to_string(),
                    c.algo.clone(),
                    k.to_string(),
                    format!("{e:e}"),
                    format!("{:e}", t.lambda2.powi(k as i32)),
                ])?;
            }
        }
    }
    Ok(w.finish()?)
}

// ---------------------------------------------------------------------------
// global
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct GlobalRun {
    pub trial: usize,
    pub seed: u64,
    pub init: InitChoice,
    pub errors: Vec<f64>,
    pub final_error: f64,
    pub iterations: usize,
}

impl GlobalRun {
    pub fn reached(&self, threshold: f64) -> bool {
        self.final_error <= threshold || iterations_to(&self.errors, threshold).is_some()
    }
}

/// Every configured initialization on every trial.
pub fn run_global(cfg: &ExperimentConfig) -> Result<Vec<GlobalRun>> {
    let runs = par_trials(cfg, |t| {
        let data = synthesize_data(&t.op, &t.x0, 0.0, 0)?;
        let algo = algorithm_for(cfg.algorithm, &t.op);
        cfg.inits
            .iter()
            .map(|&choice| {
                let solver = cfg.solver(algo, cfg.init_for(choice, t.seed), cfg.max_iters);
                let res = drphase::run_solver(&solver, &t.op, &data.b, Some(&t.x0))?;
                Ok(GlobalRun {
                    trial: t.index,
                    seed: t.seed,
                    init: choice,
                    errors: errors_of(&res),
                    final_error: res.relative_error.unwrap_or(f64::NAN),
                    iterations: res.iterations,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(runs.into_iter().flatten().collect())
}

/// Fraction of runs with the given initialization that reach `threshold`.
pub fn success_rate(runs: &[GlobalRun], init: InitChoice, threshold: f64) -> f64 {
    let sel: Vec<_> = runs.iter().filter(|r| r.init == init).collect();
    if sel.is_empty() {
        return 0.0;
    }
    sel.iter().filter(|r| r.reached(threshold)).count() as f64 / sel.len() as f64
}

pub fn write_global<W: Write>(cfg: &ExperimentConfig, runs: &[GlobalRun], out: W) -> Result<W> {
    let mut comment = cfg.describe("global");
    for &init in &cfg.inits {
        comment.push_str(&format!(
            "\nsuccess init={init} rate_1e-4={} rate_1e-8={}",
            success_rate(runs, init, VISUAL_THRESHOLD),
            success_rate(runs, init, NUMERIC_THRESHOLD)
        ));
    }
    let mut w = CsvWriter::new(out, &comment, &["trial", "init", "k", "relative_error"])?;
    for r in runs {
        for (i, e) in r.errors.iter().enumerate() {
            w.row(&[r.trial.to_string(), r.init.to_string(), (i + 1).to_string(), format!("{e:e}")])?;
        }
    }
    Ok(w.finish()?)
}

// ---------------------------------------------------------------------------
// noise-sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct NoisePoint {
    pub trial: usize,
    pub nsr: f64,
    pub budget: usize,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct NoiseReport {
    pub points: Vec<NoisePoint>,
    /// `(nsr, budget, mean error)` per grid cell.
    pub means: Vec<(f64, usize, f64)>,
    /// Least-squares slope of mean error against NSR over `0 < NSR <= 0.2`
    /// at the largest budget.
    pub slope: Option<f64>,
}

pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<NoiseReport> {
    let longest = *cfg.budgets.iter().max().unwrap_or(&cfg.max_iters);
    let init = cfg.inits[0];
    let per_trial = par_trials(cfg, |t| {
        let algo = algorithm_for(cfg.algorithm, &t.op);
        let mut pts = Vec::new();
        for &nsr in &cfg.nsr {
            let data = synthesize_data(&t.op, &t.x0, nsr, pattern_seed(t.seed, 3))?;
            let solver = cfg.solver(algo, cfg.init_for(init, t.seed), longest);
            let res = drphase::run_solver(&solver, &t.op, &data.b, Some(&t.x0))?;
            let errors = errors_of(&res);
            for &budget in &cfg.budgets {
                pts.push(NoisePoint {
                    trial: t.index,
                    nsr,
                    budget,
                    error: error_at(&errors, budget).unwrap_or(f64::NAN),
                });
            }
        }
        Ok(pts)
    })?;
    let points: Vec<NoisePoint> = per_trial.into_iter().flatten().collect();
    let mut means = Vec::new();
    for &nsr in &cfg.nsr {
        for &budget in &cfg.budgets {
            let sel: Vec<f64> = points
                .iter()
                .filter(|p| p.nsr == nsr && p.budget == budget)
                .map(|p| p.error)
                .collect();
            means.push((nsr, budget, sel.iter().sum::<f64>() / sel.len() as f64));
        }
    }
    let fit: Vec<(f64, f64)> = means
        .iter()
        .filter(|(nsr, budget, _)| *nsr > 0.0 && *nsr <= 0.2 + 1e-12 && *budget == longest)
        .map(|&(nsr, _, e)| (nsr, e))
        .collect();
    Ok(NoiseReport {
        slope: least_squares_slope(&fit),
        points,
        means,
    })
}

pub fn write_noise_sweep<W: Write>(cfg: &ExperimentConfig, rep: &NoiseReport, out: W) -> Result<W> {
    let comment = format!(
        "{}\nslope={} reference_slope={REFERENCE_NOISE_SLOPE}",
        cfg.describe("noise-sweep"),
        opt(rep.slope)
    );
    let mut w = CsvWriter::new(out, &comment, &["trial", "nsr", "max_iters", "relative_error"])?;
    for p in &rep.points {
        w.row(&[p.trial.to_string(), p.nsr.to_string(), p.budget.to_string(), format!("{:e}", p.error)])?;
    }
    Ok(w.finish()?)
}

// ---------------------------------------------------------------------------
// padding-sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct PaddingRun {
    pub ratio: f64,
    pub ntilde: usize,
    pub trial: usize,
    pub errors: Vec<f64>,
    pub final_error: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct PaddingSummary {
    pub ratio: f64,
    pub ntilde: usize,
    pub mean_error: f64,
    pub success_rate: f64,
    pub mean_iterations: f64,
}

/// ODR for each `ñ/n` in the grid from the first configured initialization.
/// Ratios whose `ñ` reaches `N` run the conjugate FDR iteration.
pub fn run_padding_sweep(cfg: &ExperimentConfig) -> Result<(Vec<PaddingRun>, Vec<PaddingSummary>)> {
    let init = cfg.inits[0];
    let per_trial = par_trials(cfg, |t| {
        let data = synthesize_data(&t.op, &t.x0, 0.0, 0)?;
        cfg.ntilde
            .iter()
            .map(|&ratio| {
                let algo = algorithm_for(AlgoChoice::Odr { ratio }, &t.op);
                let solver = cfg.solver(algo, cfg.init_for(init, t.seed), cfg.max_iters);
                let res = drphase::run_solver(&solver, &t.op, &data.b, Some(&t.x0))?;
                Ok(PaddingRun {
                    ratio,
                    ntilde: ntilde_for(ratio, &t.op),
                    trial: t.index,
                    errors: errors_of(&res),
                    final_error: res.relative_error.unwrap_or(f64::NAN),
                    iterations: res.iterations,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let runs: Vec<PaddingRun> = per_trial.into_iter().flatten().collect();
    let summaries = cfg
        .ntilde
        .iter()
        .map(|&ratio| {
            let sel: Vec<&PaddingRun> = runs.iter().filter(|r| r.ratio == ratio).collect();
            let m = sel.len() as f64;
            PaddingSummary {
                ratio,
                ntilde: sel.first().map_or(0, |r| r.ntilde),
                mean_error: sel.iter().map(|r| r.final_error).sum::<f64>() / m,
                success_rate: sel.iter().filter(|r| r.final_error <= VISUAL_THRESHOLD).count() as f64 / m,
                mean_iterations: sel.iter().map(|r| r.iterations as f64).sum::<f64>() / m,
            }
        })
        .collect();
    Ok((runs, summaries))
}

pub fn write_padding_sweep<W: Write>(cfg: &ExperimentConfig, summaries: &[PaddingSummary], out: W) -> Result<W> {
    let mut w = CsvWriter::new(
        out,
        &cfg.describe("padding-sweep"),
        &["ntilde_over_n", "ntilde", "mean_error", "success_rate", "iters"],
    )?;
    for s in summaries {
        w.row(&[
            s.ratio.to_string(),
            s.ntilde.to_string(),
            format!("{:e}", s.mean_error),
            s.success_rate.to_string(),
            s.mean_iterations.to_string(),
        ])?;
    }
    Ok(w.finish()?)
}
