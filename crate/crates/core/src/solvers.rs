//! Projections, the Fourier-domain (FDR) and object-domain (ODR)
//! Douglas-Rachford iterations, and the driver that runs them.

use num_complex::Complex;

use crate::error::{check_len, Error, Result};
use crate::linalg::{all_finite, cdot, dist, embed, norm, GridShape};
use crate::model::{extend_op, gaussian_vector, ExtendedOp, PropagationOp};
use crate::scalar::{phase, Real};

/// Sector constraint `arg x(j) in [-alpha pi, beta pi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectorSpec<T> {
    pub alpha: T,
    pub beta: T,
    pub active: bool,
}

impl<T: Real> SectorSpec<T> {
    /// No constraint: the object set is all of `C^n`.
    pub fn inactive() -> Self {
        Self {
            alpha: T::one(),
            beta: T::one(),
            active: false,
        }
    }

    pub fn new(alpha: T, beta: T) -> Result<Self> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(alpha) || !unit(beta) {
            return Err(Error::InvalidArgument(format!(
                "sector bounds must lie in [0, 1], got ({alpha}, {beta})"
            )));
        }
        if alpha + beta >= T::lit(2.0) {
            return Err(Error::InvalidArgument(
                "sector must be a proper subset of the circle".into(),
            ));
        }
        Ok(Self {
            alpha,
            beta,
            active: true,
        })
    }

    /// Positivity: `alpha = beta = 0`.
    pub fn positive() -> Self {
        Self {
            alpha: T::zero(),
            beta: T::zero(),
            active: true,
        }
    }

    pub fn contains(&self, z: Complex<T>) -> bool {
        if !self.active || z.norm_sqr().is_zero() {
            return true;
        }
        let theta = principal_arg(z);
        theta >= -self.alpha * T::PI() && theta <= self.beta * T::PI()
    }
}

/// Argument in `(-pi, pi]`.
fn principal_arg<T: Real>(z: Complex<T>) -> T {
    let theta = z.im.atan2(z.re);
    if theta <= -T::PI() {
        T::PI()
    } else {
        theta
    }
}

fn project_component<T: Real>(z: Complex<T>, s: &SectorSpec<T>) -> Complex<T> {
    if s.contains(z) {
        return z;
    }
    // nearest point on the two boundary rays (the apex when both are behind z)
    let ray = |angle: T| {
        let dir = Complex::from_polar(T::one(), angle);
        let t = (z * dir.conj()).re.max(T::zero());
        dir * t
    };
    let upper = ray(s.beta * T::PI());
    let lower = ray(-s.alpha * T::PI());
    if (z - upper).norm_sqr() <= (z - lower).norm_sqr() {
        upper
    } else {
        lower
    }
}

/// Componentwise nearest point in the sector (identity when inactive).
pub fn sector_project<T: Real>(x: &[Complex<T>], s: &SectorSpec<T>) -> Vec<Complex<T>> {
    if !s.active {
        return x.to_vec();
    }
    x.iter().map(|&z| project_component(z, s)).collect()
}

/// `[u]_X` for `u` in `C^ñ`: sector projection of the first `n` coordinates,
/// zero beyond.
pub fn project_object<T: Real>(u: &[Complex<T>], n: usize, s: &SectorSpec<T>) -> Vec<Complex<T>> {
    let mut out = sector_project(&u[..n.min(u.len())], s);
    out.resize(u.len(), Complex::new(T::zero(), T::zero()));
    out
}

/// `P_1 y = A^* [A y]_X`.
pub fn proj_p1<T: Real>(
    y: &[Complex<T>],
    op: &PropagationOp<T>,
    s: &SectorSpec<T>,
) -> Result<Vec<Complex<T>>> {
    let x = op.apply_a(y)?;
    op.apply_astar(&sector_project(&x, s))
}

/// `P_2 y = b . y/|y|`, with phase 1 where `y(j) = 0`.
pub fn proj_p2<T: Real>(y: &[Complex<T>], b: &[T]) -> Result<Vec<Complex<T>>> {
    check_len(b.len(), y.len())?;
    Ok(y.iter().zip(b).map(|(&z, &m)| phase(z) * m).collect())
}

fn reflect_magnitude<T: Real>(y: &[Complex<T>], projected: &[Complex<T>]) -> Vec<Complex<T>> {
    projected
        .iter()
        .zip(y)
        .map(|(&p, &z)| p * T::lit(2.0) - z)
        .collect()
}

/// One FDR step `y + A^*[A(2 P_2 y - y)]_X - P_2 y`.
pub fn fdr_step<T: Real>(
    y: &[Complex<T>],
    op: &PropagationOp<T>,
    b: &[T],
    s: &SectorSpec<T>,
) -> Result<Vec<Complex<T>>> {
    check_len(op.num_measurements(), y.len())?;
    if !all_finite(y) {
        return Err(Error::NonFinite("FDR iterate"));
    }
    let p2 = proj_p2(y, b)?;
    let x = sector_project(&op.apply_a(&reflect_magnitude(y, &p2))?, s);
    let back = op.apply_astar(&x)?;
    Ok(y.iter()
        .zip(back)
        .zip(&p2)
        .map(|((&yi, bi), &pi)| yi + bi - pi)
        .collect())
}

/// One ODR step `x + [Ã(2 b . Ã^*x/|Ã^*x|) - x]_X - Ã(b . Ã^*x/|Ã^*x|)`.
///
/// With `ñ = N` in the one-pattern case this is HIO with parameter one.
pub fn odr_step<T: Real>(
    x: &[Complex<T>],
    ext: &ExtendedOp<T>,
    b: &[T],
    s: &SectorSpec<T>,
) -> Result<Vec<Complex<T>>> {
    check_len(ext.ntilde(), x.len())?;
    if !all_finite(x) {
        return Err(Error::NonFinite("ODR iterate"));
    }
    let fitted = proj_p2(&ext.apply_astar(x)?, b)?;
    let back = ext.apply_a(&fitted)?;
    let reflected: Vec<_> = back.iter().zip(x).map(|(&p, &xi)| p * T::lit(2.0) - xi).collect();
    let projected = project_object(&reflected, ext.n(), s);
    Ok(x.iter()
        .zip(projected)
        .zip(back)
        .map(|((&xi, pi), bi)| xi + pi - bi)
        .collect())
}

/// Optimal global phase `alpha` (unit modulus) minimising `||alpha x - x0||`,
/// and the resulting distance.
pub fn align_phase<T: Real>(x: &[Complex<T>], x0: &[Complex<T>]) -> Result<(Complex<T>, T)> {
    check_len(x0.len(), x.len())?;
    let z = cdot(x, x0);
    let alpha = phase(z);
    let err = x
        .iter()
        .zip(x0)
        .fold(T::zero(), |acc, (&a, &b)| acc + (alpha * a - b).norm_sqr())
        .sqrt();
    Ok((alpha, err))
}

/// Phase-aligned relative error `min_alpha ||alpha x - x0|| / ||x0||`.
pub fn relative_error<T: Real>(x: &[Complex<T>], x0: &[Complex<T>]) -> Result<T> {
    let (_, err) = align_phase(x, x0)?;
    let scale = norm(x0);
    if scale.is_zero() {
        return Err(Error::InvalidArgument("reference object is zero".into()));
    }
    Ok(err / scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Fdr,
    Odr { ntilde: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init<T> {
    /// i.i.d. standard complex Gaussian pixels.
    Random { seed: u64 },
    /// Every pixel equal to one.
    Constant,
    /// `A^* x0 + delta ||x0|| r` with `r` a seeded random unit vector in `C^N`; needs ground truth.
    NearSolution { delta: T, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    pub tol: T,
    pub init: Init<T>,
    pub sector: SectorSpec<T>,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(algorithm: Algorithm, init: Init<T>) -> Self {
        Self {
            algorithm,
            max_iters: 2000,
            tol: T::lit(1e-10),
            init,
            sector: SectorSpec::inactive(),
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_sector(mut self, sector: SectorSpec<T>) -> Self {
        self.sector = sector;
        self
    }

    pub fn validate(&self, op: &PropagationOp<T>) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if let Algorithm::Odr { ntilde } = self.algorithm {
            if ntilde < op.n() || ntilde > op.num_measurements() {
                return Err(Error::InvalidArgument(format!(
                    "ODR dimension {ntilde} outside [{}, {}]",
                    op.n(),
                    op.num_measurements()
                )));
            }
        }
        if let Init::NearSolution { delta, .. } = self.init {
            if !(delta >= T::zero()) {
                return Err(Error::InvalidArgument("delta must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryEntry<T> {
    pub k: usize,
    /// Phase-aligned relative error of the current estimate (when ground truth is known).
    pub rel_error: Option<T>,
    /// `||z^{k} - z^{k-1}|| / ||z^{k-1}||`; absent for the initial iterate.
    pub residual: Option<T>,
}

/// Iterate, counter and history of a running solver. The iterate lives in
/// `C^N` for FDR and in `C^ñ` for ODR.
#[derive(Clone, Debug)]
pub struct SolverState<T> {
    pub iterate: Vec<Complex<T>>,
    pub k: usize,
    pub history: Vec<HistoryEntry<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Relative change of the iterate fell below `tol`.
    Stagnated,
    /// Aligned relative error fell below `tol`.
    Recovered,
    MaxIters,
    Diverged,
}

#[derive(Clone, Debug)]
pub struct RecoveryResult<T> {
    pub x_hat: Vec<Complex<T>>,
    /// `min_alpha ||alpha x_hat - x0||`.
    pub aligned_error: Option<T>,
    pub relative_error: Option<T>,
    /// Number of iterates produced, counting the initial one.
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Geometric-mean ratio over the last [`RATE_WINDOW`] errors above [`RATE_FLOOR`].
    pub rate_estimate: Option<T>,
    pub history: Vec<HistoryEntry<T>>,
    pub diagnostic: Option<String>,
}

pub const RATE_WINDOW: usize = 20;
pub const RATE_FLOOR: f64 = 1e-12;

/// Geometric-mean decay ratio over the last `RATE_WINDOW` errors above `RATE_FLOOR`.
pub fn windowed_rate<T: Real>(errors: &[T]) -> Option<T> {
    let floor = T::lit(RATE_FLOOR);
    let kept: Vec<T> = errors.iter().copied().filter(|&e| e > floor).collect();
    let tail = &kept[kept.len().saturating_sub(RATE_WINDOW)..];
    if tail.len() < 2 {
        return None;
    }
    let steps = T::lit((tail.len() - 1) as f64);
    Some((tail[tail.len() - 1] / tail[0]).powf(T::one() / steps))
}

/// Initial object for the object-space initializations (`Random`, `Constant`).
/// `NearSolution` is defined in the measurement domain, see [`initial_fourier`].
pub fn initial_object<T: Real>(init: &Init<T>, n: usize) -> Result<Vec<Complex<T>>> {
    match *init {
        Init::Random { seed } => Ok(gaussian_vector(n, seed)),
        Init::Constant => Ok(vec![Complex::new(T::one(), T::zero()); n]),
        Init::NearSolution { .. } => Err(Error::InvalidArgument(
            "near-solution start has no object-space form".into(),
        )),
    }
}

/// Initial FDR iterate `y(1)`: `A^* x(1)` for object initializations, and
/// `y0 + delta ||y0|| r` (`r` a seeded random unit vector in `C^N`) for
/// `NearSolution`.
pub fn initial_fourier<T: Real>(
    init: &Init<T>,
    op: &PropagationOp<T>,
    x0: Option<&[Complex<T>]>,
) -> Result<Vec<Complex<T>>> {
    match *init {
        Init::NearSolution { delta, seed } => {
            let x0 = x0.ok_or_else(|| {
                Error::InvalidArgument("near-solution initialization needs the true object".into())
            })?;
            let y0 = op.apply_astar(x0)?;
            let r: Vec<Complex<T>> = gaussian_vector(y0.len(), seed);
            let scale = delta * norm(&y0) / norm(&r);
            Ok(y0.iter().zip(&r).map(|(&a, &b)| a + b * scale).collect())
        }
        _ => op.apply_astar(&initial_object(init, op.n())?),
    }
}

enum Domain<T: Real> {
    Fourier,
    Object(ExtendedOp<T>),
}

struct Driver<'a, T: Real> {
    op: &'a PropagationOp<T>,
    b: &'a [T],
    sector: SectorSpec<T>,
    domain: Domain<T>,
}

impl<T: Real> Driver<'_, T> {
    fn step(&self, z: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        match &self.domain {
            Domain::Fourier => fdr_step(z, self.op, self.b, &self.sector),
            Domain::Object(ext) => odr_step(z, ext, self.b, &self.sector),
        }
    }

    /// Object estimate carried by an iterate: `[A y]_n` (or `[x]_n`) without a
    /// sector constraint, and the projected reflection `[A(2 P_2 y - y)]_X`
    /// (or `[Ã(2 P_2 Ã^*x) - x]_X`) with one.
    fn estimate(&self, z: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.op.n();
        match (&self.domain, self.sector.active) {
            (Domain::Fourier, false) => self.op.apply_a(z),
            (Domain::Object(_), false) => Ok(z[..n].to_vec()),
            (Domain::Fourier, true) => {
                let p2 = proj_p2(z, self.b)?;
                let x = self.op.apply_a(&reflect_magnitude(z, &p2))?;
                Ok(sector_project(&x, &self.sector))
            }
            (Domain::Object(ext), true) => {
                let back = ext.apply_a(&proj_p2(&ext.apply_astar(z)?, self.b)?)?;
                let reflected: Vec<_> = back
                    .iter()
                    .zip(z)
                    .map(|(&p, &xi)| p * T::lit(2.0) - xi)
                    .collect();
                Ok(sector_project(&reflected[..n], &self.sector))
            }
        }
    }
}

/// Runs FDR or ODR from the configured initialization.
///
/// Stops when the relative change of the iterate or (with ground truth) the
/// aligned relative error drops to `tol`, or after `max_iters` iterates.
/// A non-finite iterate ends the run with `converged = false`.
pub fn run_solver<T: Real>(
    cfg: &SolverConfig<T>,
    op: &PropagationOp<T>,
    b: &[T],
    x0: Option<&[Complex<T>]>,
) -> Result<RecoveryResult<T>> {
    cfg.validate(op)?;
    check_len(op.num_measurements(), b.len())?;
    if let Some(x0) = x0 {
        check_len(op.n(), x0.len())?;
    }
    let (domain, iterate) = match cfg.algorithm {
        Algorithm::Fdr => (Domain::Fourier, initial_fourier(&cfg.init, op, x0)?),
        Algorithm::Odr { ntilde } => {
            let ext = extend_op(op, ntilde)?;
            let x = match cfg.init {
                Init::NearSolution { .. } => ext.apply_a(&initial_fourier(&cfg.init, op, x0)?)?,
                _ => embed(&initial_object(&cfg.init, op.n())?, ntilde)?,
            };
            (Domain::Object(ext), x)
        }
    };
    let driver = Driver {
        op,
        b,
        sector: cfg.sector,
        domain,
    };

    let score = |x: &[Complex<T>]| -> Result<Option<T>> {
        x0.map(|x0| relative_error(x, x0)).transpose()
    };

    let mut x_hat = driver.estimate(&iterate)?;
    let mut state = SolverState {
        iterate,
        k: 1,
        history: vec![HistoryEntry {
            k: 1,
            rel_error: score(&x_hat)?,
            residual: None,
        }],
    };
    let mut stop = StopReason::MaxIters;
    let mut diagnostic = None;
    if matches!(state.history[0].rel_error, Some(e) if e <= cfg.tol) {
        stop = StopReason::Recovered;
    }

    while stop == StopReason::MaxIters && state.k < cfg.max_iters {
        let next = driver.step(&state.iterate)?;
        if !all_finite(&next) {
            stop = StopReason::Diverged;
            diagnostic = Some(format!("non-finite iterate at k = {}", state.k + 1));
            break;
        }
        let prev_norm = norm(&state.iterate);
        let change = dist(&next, &state.iterate);
        let residual = if prev_norm > T::zero() {
            change / prev_norm
        } else {
            change
        };
        state.iterate = next;
        state.k += 1;
        x_hat = driver.estimate(&state.iterate)?;
        let rel_error = score(&x_hat)?;
        state.history.push(HistoryEntry {
            k: state.k,
            rel_error,
            residual: Some(residual),
        });
        if matches!(rel_error, Some(e) if e <= cfg.tol) {
            stop = StopReason::Recovered;
        } else if residual <= cfg.tol {
            stop = StopReason::Stagnated;
        }
    }

    let (aligned_error, relative_error) = match x0 {
        Some(x0) => {
            let (_, err) = align_phase(&x_hat, x0)?;
            (Some(err), Some(err / norm(x0)))
        }
        None => (None, None),
    };
    let errors: Vec<T> = state.history.iter().filter_map(|h| h.rel_error).collect();
    Ok(RecoveryResult {
        x_hat,
        aligned_error,
        relative_error,
        iterations: state.k,
        converged: matches!(stop, StopReason::Recovered | StopReason::Stagnated),
        stop,
        rate_estimate: windowed_rate(&errors),
        history: state.history,
        diagnostic,
    })
}

/// Convenience: the all-ones constant object on a grid.
pub fn constant_object<T: Real>(shape: &GridShape) -> Vec<Complex<T>> {
    vec![Complex::new(T::one(), T::zero()); shape.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{synthesize_data, Variant};
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn pos() -> SectorSpec<f64> {
        SectorSpec::positive()
    }

    #[test]
    fn sector_validation() {
        assert!(SectorSpec::new(0.0, 0.5).is_ok());
        assert!(SectorSpec::new(1.0, 1.0).is_err());
        assert!(SectorSpec::new(-0.1, 0.5).is_err());
        assert!(SectorSpec::new(0.0, 1.5).is_err());
    }

    #[test]
    fn positivity_projection_examples() {
        assert_eq!(sector_project(&[C::new(1.0, 1.0)], &pos()), vec![C::new(1.0, 0.0)]);
        assert_eq!(sector_project(&[C::new(-1.0, 1.0)], &pos()), vec![C::new(0.0, 0.0)]);
        let quarter = SectorSpec::new(0.0, 0.5).unwrap();
        let z = C::from_polar(1.0, 0.4 * PI);
        assert_eq!(sector_project(&[z], &quarter), vec![z]);
    }

    #[test]
    fn negative_real_axis_uses_principal_value() {
        // arg(-1 - 0i) is reported as -pi; the principal value is pi.
        let upper_half = SectorSpec::new(0.0, 1.0).unwrap();
        let z = C::new(-1.0, -0.0);
        assert_eq!(sector_project(&[z], &upper_half), vec![z]);
    }

    #[test]
    fn wide_sector_wraps_around() {
        let s = SectorSpec::new(0.2, 0.9).unwrap();
        // angle -0.95 pi is 0.15 pi past the upper edge (through pi), 0.75 pi
        // past the lower edge: nearest is the upper ray.
        let z = C::from_polar(2.0, -0.95 * PI);
        let p = sector_project(&[z], &s)[0];
        let want = C::from_polar(2.0 * (0.15 * PI).cos(), 0.9 * PI);
        assert!((p - want).norm() < 1e-12);
    }

    #[test]
    fn inactive_sector_is_identity() {
        let x = vec![C::new(-3.0, 0.5), C::new(0.0, -2.0)];
        assert_eq!(sector_project(&x, &SectorSpec::inactive()), x);
        let padded = project_object(&[C::new(1.0, 0.0), C::new(2.0, 0.0)], 1, &SectorSpec::inactive());
        assert_eq!(padded, vec![C::new(1.0, 0.0), C::new(0.0, 0.0)]);
    }

    #[test]
    fn p2_conventions() {
        let b = vec![1.0, 2.0, 0.5];
        let w = [C::from_polar(1.0, 0.3), C::from_polar(1.0, -2.0), C::new(0.0, 0.0)];
        let y: Vec<C> = w.iter().zip(&b).map(|(w, b)| w * (2.0 * b)).collect();
        let p = proj_p2(&y, &b).unwrap();
        assert!((p[0] - w[0] * 1.0).norm() < 1e-15);
        assert!((p[1] - w[1] * 2.0).norm() < 1e-15);
        assert_eq!(p[2], C::new(0.5, 0.0));
        assert!(proj_p2(&y, &b[..2]).is_err());
    }

    #[test]
    fn align_phase_examples() {
        let x0 = vec![C::new(1.0, 2.0), C::new(-0.5, 0.25)];
        let x: Vec<C> = x0.iter().map(|z| z * C::new(0.0, 1.0)).collect();
        let (alpha, err) = align_phase(&x, &x0).unwrap();
        assert!((alpha - C::new(0.0, -1.0)).norm() < 1e-15);
        assert!(err < 1e-15);
        let (alpha, err) = align_phase(&x0, &x0).unwrap();
        assert!((alpha - C::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(err, 0.0);
        // orthogonal inputs fall back to alpha = 1
        let (alpha, _) = align_phase(&[C::new(1.0, 0.0), C::new(0.0, 0.0)], &[C::new(0.0, 0.0), C::new(1.0, 0.0)]).unwrap();
        assert_eq!(alpha, C::new(1.0, 0.0));
    }

    #[test]
    fn config_validation() {
        let shape: GridShape = "3x3".parse().unwrap();
        let op = PropagationOp::<f64>::new(Variant::OneAndHalf, &shape, 1).unwrap();
        let b = vec![0.0; op.num_measurements()];
        let zero_iters = SolverConfig::new(Algorithm::Fdr, Init::Constant).with_max_iters(0);
        assert!(run_solver(&zero_iters, &op, &b, None).is_err());
        let bad_ntilde = SolverConfig::new(Algorithm::Odr { ntilde: 3 }, Init::Constant);
        assert!(run_solver(&bad_ntilde, &op, &b, None).is_err());
        let near = SolverConfig::new(Algorithm::Fdr, Init::NearSolution { delta: 1e-3, seed: 1 });
        assert!(run_solver(&near, &op, &b, None).is_err());
        let neg_tol = SolverConfig::new(Algorithm::Fdr, Init::Constant).with_tol(0.0);
        assert!(run_solver(&neg_tol, &op, &b, None).is_err());
    }

    #[test]
    fn single_iterate_reports_initial_metrics() {
        let shape: GridShape = "3x3".parse().unwrap();
        let op = PropagationOp::<f64>::new(Variant::OneAndHalf, &shape, 1).unwrap();
        let x0 = gaussian_vector::<f64>(9, 3);
        let data = synthesize_data(&op, &x0, 0.0, 0).unwrap();
        let cfg = SolverConfig::new(Algorithm::Fdr, Init::Constant).with_max_iters(1);
        let res = run_solver(&cfg, &op, &data.b, Some(&x0)).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.history.len(), 1);
        let ones = constant_object::<f64>(&shape);
        let want = relative_error(&ones, &x0).unwrap();
        assert!((res.relative_error.unwrap() - want).abs() < 1e-12);
        assert_eq!(res.stop, StopReason::MaxIters);
    }

    #[test]
    fn windowed_rate_of_geometric_sequence() {
        let errs: Vec<f64> = (0..60).map(|k| 0.9f64.powi(k)).collect();
        assert!((windowed_rate(&errs).unwrap() - 0.9).abs() < 1e-12);
        let floored: Vec<f64> = errs.iter().map(|&e| e.max(1e-14)).chain([1e-14; 5]).collect();
        assert!(windowed_rate(&[1.0]).is_none());
        assert!(windowed_rate(&floored).unwrap() < 1.0);
    }

    #[test]
    fn exact_start_recovers_immediately() {
        let shape: GridShape = "3x3".parse().unwrap();
        let op = PropagationOp::<f64>::new(Variant::TwoMask, &shape, 2).unwrap();
        let x0 = gaussian_vector::<f64>(9, 8);
        let data = synthesize_data(&op, &x0, 0.0, 0).unwrap();
        let cfg = SolverConfig::new(Algorithm::Fdr, Init::NearSolution { delta: 0.0, seed: 1 });
        let res = run_solver(&cfg, &op, &data.b, Some(&x0)).unwrap();
        assert_eq!(res.stop, StopReason::Recovered);
        assert_eq!(res.iterations, 1);
        assert!(res.converged);
    }
}
