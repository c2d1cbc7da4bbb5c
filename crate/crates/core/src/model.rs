//! Forward model: random phase masks, the isometric propagation operator
//! `A^*` in its one-mask, one-and-a-half-mask, two-mask and multi-mask forms,
//! its isometric extension `Ã^*`, and synthetic (optionally noisy) data.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dist, norm, GridDft, GridShape};
use crate::scalar::Real;

/// Seed of the `k`-th mask drawn for an operator seeded with `seed`.
pub fn pattern_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `len` i.i.d. standard complex Gaussians (unit variance per component).
pub fn gaussian_vector<T: Real>(len: usize, seed: u64) -> Vec<Complex<T>> {
    let mut rng = rng(seed);
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MaskKind {
    /// Phases i.i.d. uniform on `[0, 2 pi)`.
    UniformCircle,
    /// `mu = 1`: a plain (uncoded) pattern.
    Identity,
}

/// A unimodular mask `mu = exp(i phi)` over the object grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSpec<T> {
    pub phases: Vec<T>,
    pub kind: MaskKind,
    pub seed: u64,
}

impl<T: Real> MaskSpec<T> {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// The mask values `mu(j)`.
    pub fn values(&self) -> Vec<Complex<T>> {
        self.phases
            .iter()
            .map(|&p| Complex::from_polar(T::one(), p))
            .collect()
    }
}

pub fn make_mask<T: Real>(shape: &GridShape, kind: MaskKind, seed: u64) -> MaskSpec<T> {
    let n = shape.len();
    let phases = match kind {
        MaskKind::Identity => vec![T::zero(); n],
        MaskKind::UniformCircle => {
            let mut rng = rng(seed);
            (0..n).map(|_| T::lit(rng.random_range(0.0..TAU))).collect()
        }
    };
    MaskSpec { phases, kind, seed }
}

/// Measurement schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// One oversampled coded pattern.
    OneMask,
    /// One oversampled coded pattern plus one oversampled plain pattern.
    OneAndHalf,
    /// Two independently coded oversampled patterns.
    TwoMask,
    /// `patterns` unoversampled patterns; with `plain` the last one is uncoded.
    MultiMask { patterns: usize, plain: bool },
}

impl Variant {
    pub fn pattern_count(&self) -> usize {
        match *self {
            Variant::OneMask => 1,
            Variant::OneAndHalf | Variant::TwoMask => 2,
            Variant::MultiMask { patterns, .. } => patterns,
        }
    }

    pub fn is_oversampled(&self) -> bool {
        !matches!(self, Variant::MultiMask { .. })
    }

    pub fn mask_kinds(&self) -> Vec<MaskKind> {
        use MaskKind::*;
        match *self {
            Variant::OneMask => vec![UniformCircle],
            Variant::OneAndHalf => vec![UniformCircle, Identity],
            Variant::TwoMask => vec![UniformCircle, UniformCircle],
            Variant::MultiMask { patterns, plain } => (0..patterns)
                .map(|k| if plain && k + 1 == patterns { Identity } else { UniformCircle })
                .collect(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::OneMask => f.write_str("one-mask"),
            Variant::OneAndHalf => f.write_str("one-and-half"),
            Variant::TwoMask => f.write_str("two-mask"),
            Variant::MultiMask { patterns, plain: true } => write!(f, "multi:{patterns}"),
            Variant::MultiMask { patterns, plain: false } => write!(f, "multi-coded:{patterns}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown variant {s:?}"));
        match s {
            "one-mask" => Ok(Variant::OneMask),
            "one-and-half" => Ok(Variant::OneAndHalf),
            "two-mask" => Ok(Variant::TwoMask),
            _ => {
                let (tag, count) = s.split_once(':').ok_or_else(bad)?;
                let plain = match tag {
                    "multi" => true,
                    "multi-coded" => false,
                    _ => return Err(bad()),
                };
                let patterns: usize = count.parse().map_err(|_| bad())?;
                if patterns == 0 || (plain && patterns < 2) {
                    return Err(Error::Parse(format!(
                        "variant {s:?} needs at least {} patterns",
                        if plain { 2 } else { 1 }
                    )));
                }
                Ok(Variant::MultiMask { patterns, plain })
            }
        }
    }
}

/// The isometric measurement operator `A^* = c [Phi diag(mu_1); ...; Phi diag(mu_l)]`.
///
/// `Phi` is the oversampled DFT for the one-, one-and-a-half- and two-mask
/// variants and the standard DFT for the multi-mask variant. Each pattern
/// occupies a contiguous block of the measurement vector.
#[derive(Clone, Debug)]
pub struct PropagationOp<T: Real> {
    variant: Variant,
    shape: GridShape,
    masks: Vec<MaskSpec<T>>,
    mu: Vec<Vec<Complex<T>>>,
    dft: GridDft<T>,
    c: T,
}

impl<T: Real> PropagationOp<T> {
    /// Draws the variant's masks from `seed` (mask `k` uses [`pattern_seed`]).
    pub fn new(variant: Variant, shape: &GridShape, seed: u64) -> Result<Self> {
        let masks = variant
            .mask_kinds()
            .into_iter()
            .enumerate()
            .map(|(k, kind)| make_mask(shape, kind, pattern_seed(seed, k)))
            .collect();
        Self::with_masks(variant, shape, masks)
    }

    pub fn with_masks(variant: Variant, shape: &GridShape, masks: Vec<MaskSpec<T>>) -> Result<Self> {
        if masks.len() != variant.pattern_count() {
            return Err(Error::InvalidArgument(format!(
                "variant {variant} takes {} masks, got {}",
                variant.pattern_count(),
                masks.len()
            )));
        }
        for m in &masks {
            check_len(shape.len(), m.len())?;
        }
        let dft = if variant.is_oversampled() {
            GridDft::oversampled(shape)?
        } else {
            GridDft::standard(shape)?
        };
        let total = masks.len() * dft.freq_shape().len();
        let c = T::one() / T::lit(total as f64).sqrt();
        let mu = masks.iter().map(MaskSpec::values).collect();
        let op = Self {
            variant,
            shape: shape.clone(),
            masks,
            mu,
            dft,
            c,
        };
        op.verify_isometry()?;
        Ok(op)
    }

    fn verify_isometry(&self) -> Result<()> {
        let probe = gaussian_vector::<T>(self.n(), 0x5EED);
        let back = self.apply_a(&self.apply_astar(&probe)?)?;
        let defect = dist(&back, &probe) / norm(&probe);
        if !(defect <= T::check_tol()) {
            return Err(Error::Construction(format!(
                "A A^* deviates from the identity by {defect:e}"
            )));
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn masks(&self) -> &[MaskSpec<T>] {
        &self.masks
    }

    pub fn mask_values(&self, pattern: usize) -> &[Complex<T>] {
        &self.mu[pattern]
    }

    pub fn dft(&self) -> &GridDft<T> {
        &self.dft
    }

    /// Normalization constant `c`.
    pub fn c(&self) -> T {
        self.c
    }

    /// Object dimension `n`.
    pub fn n(&self) -> usize {
        self.shape.len()
    }

    /// Measurement dimension `N`.
    pub fn num_measurements(&self) -> usize {
        self.patterns() * self.pattern_len()
    }

    pub fn patterns(&self) -> usize {
        self.masks.len()
    }

    /// Length of a single diffraction pattern.
    pub fn pattern_len(&self) -> usize {
        self.dft.freq_shape().len()
    }

    /// `A^* x`.
    pub fn apply_astar(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.n(), x.len())?;
        let mut out = Vec::with_capacity(self.num_measurements());
        let mut masked = vec![Complex::new(T::zero(), T::zero()); self.n()];
        for mu in &self.mu {
            for ((m, &v), &w) in masked.iter_mut().zip(x).zip(mu) {
                *m = v * w;
            }
            let block = self.dft.forward(&masked)?;
            out.extend(block.into_iter().map(|z| z * self.c));
        }
        Ok(out)
    }

    /// `A y`, the adjoint of [`apply_astar`](Self::apply_astar).
    pub fn apply_a(&self, y: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.num_measurements(), y.len())?;
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.n()];
        for (block, mu) in y.chunks(self.pattern_len()).zip(&self.mu) {
            let back = self.dft.adjoint(block)?;
            for ((o, b), w) in out.iter_mut().zip(back).zip(mu) {
                *o += b * w.conj() * self.c;
            }
        }
        Ok(out)
    }
}

/// Isometric extension `Ã^* = [A^*, A_perp^*]` of a propagation operator to
/// `ñ` columns, `n <= ñ <= N`.
///
/// The columns come from a unitary `N x N` completion of `A^*`: for patterns
/// `p` and blocks `q` (both `0..l`) and frequency-grid point `g`,
/// column `(q, g)` has pattern block `p` equal to
/// `l^{-1/2} H[p][q] F diag(mu~_p) e_g`, where `F` is the unitary DFT on the
/// pattern grid, `mu~_p` is the mask extended by ones off the object support
/// and `H[p][q] = exp(-2 pi i p q / l)`. Block `q = 0` restricted to the
/// support is exactly `A^*`. Columns are taken in the order: support, the
/// remaining points of block 0 (the usual zero-padded object domain), then
/// blocks `1..l` in row-major order.
#[derive(Clone, Debug)]
pub struct ExtendedOp<T: Real> {
    base: PropagationOp<T>,
    ntilde: usize,
    mu_full: Vec<Vec<Complex<T>>>,
    layout: Vec<usize>,
    mix: Vec<Vec<Complex<T>>>,
    scale: T,
}

pub fn extend_op<T: Real>(op: &PropagationOp<T>, ntilde: usize) -> Result<ExtendedOp<T>> {
    ExtendedOp::new(op.clone(), ntilde)
}

impl<T: Real> ExtendedOp<T> {
    pub fn new(base: PropagationOp<T>, ntilde: usize) -> Result<Self> {
        let n = base.n();
        let big_n = base.num_measurements();
        if ntilde < n || ntilde > big_n {
            return Err(Error::InvalidArgument(format!(
                "extension dimension {ntilde} outside [{n}, {big_n}]"
            )));
        }
        let grid = base.pattern_len();
        let support = base.dft().support();
        let mut on_support = vec![false; grid];
        for &s in support {
            on_support[s] = true;
        }
        let mu_full = base
            .mu
            .iter()
            .map(|mu| {
                let mut full = vec![Complex::new(T::one(), T::zero()); grid];
                for (&s, &m) in support.iter().zip(mu) {
                    full[s] = m;
                }
                full
            })
            .collect();
        let mut layout: Vec<usize> = support.to_vec();
        layout.extend((0..grid).filter(|&g| !on_support[g]));
        layout.extend(grid..big_n);
        layout.truncate(ntilde);

        let l = base.patterns();
        let mix = (0..l)
            .map(|p| {
                (0..l)
                    .map(|q| {
                        let angle = -T::TAU() * T::lit(((p * q) % l) as f64) / T::lit(l as f64);
                        Complex::from_polar(T::one(), angle)
                    })
                    .collect()
            })
            .collect();
        let scale = T::one() / T::lit(big_n as f64).sqrt();
        Ok(Self {
            base,
            ntilde,
            mu_full,
            layout,
            mix,
            scale,
        })
    }

    pub fn base(&self) -> &PropagationOp<T> {
        &self.base
    }

    pub fn ntilde(&self) -> usize {
        self.ntilde
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn num_measurements(&self) -> usize {
        self.base.num_measurements()
    }

    /// `Ã^* x` for `x` in `C^ñ`.
    pub fn apply_astar(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.ntilde, x.len())?;
        let zero = Complex::new(T::zero(), T::zero());
        let grid = self.base.pattern_len();
        let l = self.base.patterns();
        let mut z = vec![zero; l * grid];
        for (&slot, &v) in self.layout.iter().zip(x) {
            z[slot] = v;
        }
        let active_blocks = self.active_blocks();
        let mut out = Vec::with_capacity(l * grid);
        let mut w = vec![zero; grid];
        for p in 0..l {
            w.copy_from_slice(&z[..grid]);
            for q in 1..active_blocks {
                let h = self.mix[p][q];
                for (a, &b) in w.iter_mut().zip(&z[q * grid..(q + 1) * grid]) {
                    *a += h * b;
                }
            }
            for (a, &m) in w.iter_mut().zip(&self.mu_full[p]) {
                *a *= m;
            }
            self.base.dft().forward_full(&mut w)?;
            out.extend(w.iter().map(|&v| v * self.scale));
        }
        Ok(out)
    }

    /// `Ã y` for `y` in `C^N`.
    pub fn apply_a(&self, y: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.num_measurements(), y.len())?;
        let zero = Complex::new(T::zero(), T::zero());
        let grid = self.base.pattern_len();
        let l = self.base.patterns();
        let active_blocks = self.active_blocks();
        let mut z = vec![zero; active_blocks * grid];
        let mut t = vec![zero; grid];
        for p in 0..l {
            t.copy_from_slice(&y[p * grid..(p + 1) * grid]);
            self.base.dft().adjoint_full(&mut t)?;
            for (a, &m) in t.iter_mut().zip(&self.mu_full[p]) {
                *a = *a * m.conj() * self.scale;
            }
            for q in 0..active_blocks {
                let h = self.mix[p][q].conj();
                for (a, &b) in z[q * grid..(q + 1) * grid].iter_mut().zip(&t) {
                    *a += h * b;
                }
            }
        }
        Ok(self.layout.iter().map(|&slot| z[slot]).collect())
    }

    fn active_blocks(&self) -> usize {
        let grid = self.base.pattern_len();
        self.layout.iter().map(|&s| s / grid + 1).max().unwrap_or(1)
    }
}

/// Magnitude data `b = |A^* x0| (+ noise)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasuredData<T> {
    pub b: Vec<T>,
    pub nsr: T,
    pub noise_seed: u64,
}

/// Seeded Gaussian perturbation of length `len` rescaled to norm `target_norm`.
pub fn magnitude_noise<T: Real>(len: usize, target_norm: T, seed: u64) -> Vec<T> {
    let mut rng = rng(seed);
    let raw: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let raw_norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if raw_norm > 0.0 {
        target_norm.to_f64_lossy() / raw_norm
    } else {
        0.0
    };
    raw.into_iter().map(|v| T::lit(v * scale)).collect()
}

/// Synthesizes `b = |A^* x0|`; with `nsr > 0` adds Gaussian noise `eps` with
/// `||eps|| / ||A^* x0|| = nsr` and clamps negative entries to zero.
pub fn synthesize_data<T: Real>(
    op: &PropagationOp<T>,
    x0: &[Complex<T>],
    nsr: T,
    noise_seed: u64,
) -> Result<MeasuredData<T>> {
    if !(nsr >= T::zero()) {
        return Err(Error::InvalidArgument(format!("nsr must be >= 0, got {nsr}")));
    }
    let y0 = op.apply_astar(x0)?;
    let mut b: Vec<T> = y0.iter().map(|z| z.norm()).collect();
    if nsr > T::zero() {
        let eps = magnitude_noise(b.len(), nsr * norm(&y0), noise_seed);
        for (v, e) in b.iter_mut().zip(eps) {
            *v = (*v + e).max(T::zero());
        }
    }
    Ok(MeasuredData { b, nsr, noise_seed })
}
