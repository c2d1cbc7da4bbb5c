//! Grid shapes, complex vector arithmetic, the oversampled multidimensional
//! DFT, realification and zero padding.
//!
//! Grids are vectorized row-major: the last axis varies fastest. Mask files,
//! image files and every operator in the crate share this ordering.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Extents of a d-dimensional grid, `(M_1 + 1, ..., M_d + 1)` for an object support.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GridShape {
    dims: Vec<usize>,
}

impl GridShape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidShape("grid needs at least one axis".into()));
        }
        if dims.iter().any(|&e| e == 0) {
            return Err(Error::InvalidShape(format!("zero extent in {dims:?}")));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `(2 M_j + 1)`-per-axis grid on which the diffraction pattern
    /// determines the autocorrelation.
    pub fn oversampled(&self) -> GridShape {
        GridShape {
            dims: self.dims.iter().map(|&e| 2 * e - 1).collect(),
        }
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for a in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.dims[a + 1];
        }
        strides
    }

    /// Multi-index of a flat row-major offset.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            idx[a] = flat % self.dims[a];
            flat /= self.dims[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &e)| acc * e + i)
    }

    /// True when `self` fits inside `outer` axis by axis.
    pub fn fits_in(&self, outer: &GridShape) -> bool {
        self.ndim() == outer.ndim() && self.dims.iter().zip(&outer.dims).all(|(a, b)| a <= b)
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

impl FromStr for GridShape {
    type Err = Error;

    /// Parses `RxC`, `AxBxC`, ... (a bare integer is a 1-D grid).
    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(['x', 'X'])
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad grid extent {p:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        GridShape::new(dims)
    }
}

// ---------------------------------------------------------------------------
// Vector arithmetic
// ---------------------------------------------------------------------------

/// Complex inner product `u* v`.
pub fn cdot<T: Real>(u: &[Complex<T>], v: &[Complex<T>]) -> Complex<T> {
    u.iter()
        .zip(v)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
}

/// Real inner product `Re(u* v) = G(u)^T G(v)`.
pub fn real_inner<T: Real>(u: &[Complex<T>], v: &[Complex<T>]) -> T {
    u.iter()
        .zip(v)
        .fold(T::zero(), |acc, (a, b)| acc + a.re * b.re + a.im * b.im)
}

pub fn norm_sq<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

pub fn norm<T: Real>(v: &[Complex<T>]) -> T {
    norm_sq(v).sqrt()
}

pub fn dist<T: Real>(u: &[Complex<T>], v: &[Complex<T>]) -> T {
    u.iter()
        .zip(v)
        .fold(T::zero(), |acc, (a, b)| acc + (a - b).norm_sqr())
        .sqrt()
}

pub fn real_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn real_dot<T: Real>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub fn all_finite<T: Real>(v: &[Complex<T>]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Lift a real vector into `C^N`.
pub fn complexify<T: Real>(v: &[T]) -> Vec<Complex<T>> {
    v.iter().map(|&x| Complex::new(x, T::zero())).collect()
}

// ---------------------------------------------------------------------------
// Realification
// ---------------------------------------------------------------------------

/// `G(v) = (Re v, Im v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPair<T> {
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Real> RealPair<T> {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// The stacked vector `[Re v; Im v]` in `R^{2N}`.
    pub fn stacked(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * self.re.len());
        out.extend_from_slice(&self.re);
        out.extend_from_slice(&self.im);
        out
    }

    pub fn from_stacked(v: &[T]) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "stacked real vector has odd length {}",
                v.len()
            )));
        }
        let (re, im) = v.split_at(v.len() / 2);
        Ok(Self {
            re: re.to_vec(),
            im: im.to_vec(),
        })
    }
}

pub fn realify<T: Real>(v: &[Complex<T>]) -> RealPair<T> {
    RealPair {
        re: v.iter().map(|z| z.re).collect(),
        im: v.iter().map(|z| z.im).collect(),
    }
}

pub fn unrealify<T: Real>(p: &RealPair<T>) -> Result<Vec<Complex<T>>> {
    check_len(p.re.len(), p.im.len())?;
    Ok(p.re
        .iter()
        .zip(&p.im)
        .map(|(&re, &im)| Complex::new(re, im))
        .collect())
}

/// `G(v)` as a single stacked vector.
pub fn stack<T: Real>(v: &[Complex<T>]) -> Vec<T> {
    realify(v).stacked()
}

/// `G^{-1}` of a stacked vector.
pub fn unstack<T: Real>(v: &[T]) -> Result<Vec<Complex<T>>> {
    unrealify(&RealPair::from_stacked(v)?)
}

// ---------------------------------------------------------------------------
// Zero padding
// ---------------------------------------------------------------------------

/// Canonical embedding `C^n -> C^target` (zeros appended).
pub fn embed<T: Real>(x: &[Complex<T>], target: usize) -> Result<Vec<Complex<T>>> {
    if target < x.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot embed length {} into {target}",
            x.len()
        )));
    }
    let mut out = x.to_vec();
    out.resize(target, Complex::new(T::zero(), T::zero()));
    Ok(out)
}

/// `[x]_n`: the first `n` coordinates.
pub fn restrict<T: Real>(x: &[Complex<T>], n: usize) -> Result<Vec<Complex<T>>> {
    if n > x.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot restrict length {} to {n}",
            x.len()
        )));
    }
    Ok(x[..n].to_vec())
}

// ---------------------------------------------------------------------------
// Oversampled DFT
// ---------------------------------------------------------------------------

/// Planned d-dimensional DFT from an object grid zero-padded into a
/// (larger or equal) frequency grid.
///
/// The forward map is the raw, unnormalized `Phi` with kernel
/// `exp(-2 pi i m . k / L)`; `adjoint` is its exact adjoint `Phi^*`.
#[derive(Clone)]
pub struct GridDft<T: Real> {
    object: GridShape,
    freq: GridShape,
    support: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<T>>>,
    inv: Vec<Arc<dyn Fft<T>>>,
    scratch_len: usize,
}

impl<T: Real> fmt::Debug for GridDft<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridDft")
            .field("object", &self.object)
            .field("freq", &self.freq)
            .finish()
    }
}

impl<T: Real> GridDft<T> {
    pub fn new(object: &GridShape, freq: &GridShape) -> Result<Self> {
        if !object.fits_in(freq) {
            return Err(Error::InvalidShape(format!(
                "object grid {object} does not fit in frequency grid {freq}"
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd: Vec<_> = freq.dims().iter().map(|&l| planner.plan_fft_forward(l)).collect();
        let inv: Vec<_> = freq.dims().iter().map(|&l| planner.plan_fft_inverse(l)).collect();
        let scratch_len = fwd
            .iter()
            .chain(&inv)
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let support = (0..object.len())
            .map(|i| freq.ravel(&object.unravel(i)))
            .collect();
        Ok(Self {
            object: object.clone(),
            freq: freq.clone(),
            support,
            fwd,
            inv,
            scratch_len,
        })
    }

    /// DFT on the `(2 M_j + 1)` grid.
    pub fn oversampled(object: &GridShape) -> Result<Self> {
        Self::new(object, &object.oversampled())
    }

    /// Standard (unoversampled) DFT on the object grid itself.
    pub fn standard(object: &GridShape) -> Result<Self> {
        Self::new(object, object)
    }

    pub fn object_shape(&self) -> &GridShape {
        &self.object
    }

    pub fn freq_shape(&self) -> &GridShape {
        &self.freq
    }

    /// Frequency-grid offsets of the object support, in object row-major order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `Phi x`.
    pub fn forward(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.object.len(), x.len())?;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.freq.len()];
        for (&s, &v) in self.support.iter().zip(x) {
            buf[s] = v;
        }
        self.forward_full(&mut buf)?;
        Ok(buf)
    }

    /// `Phi^* y`, restricted to the object support.
    pub fn adjoint(&self, y: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.freq.len(), y.len())?;
        let mut buf = y.to_vec();
        self.adjoint_full(&mut buf)?;
        Ok(self.support.iter().map(|&s| buf[s]).collect())
    }

    /// Unnormalized forward DFT over the whole frequency grid, in place.
    pub fn forward_full(&self, buf: &mut [Complex<T>]) -> Result<()> {
        check_len(self.freq.len(), buf.len())?;
        self.transform(buf, &self.fwd);
        Ok(())
    }

    /// Unnormalized inverse DFT (the adjoint) over the whole frequency grid, in place.
    pub fn adjoint_full(&self, buf: &mut [Complex<T>]) -> Result<()> {
        check_len(self.freq.len(), buf.len())?;
        self.transform(buf, &self.inv);
        Ok(())
    }

    fn transform(&self, buf: &mut [Complex<T>], plans: &[Arc<dyn Fft<T>>]) {
        let zero = Complex::new(T::zero(), T::zero());
        let dims = self.freq.dims();
        let strides = self.freq.strides();
        let longest = dims.iter().copied().max().unwrap_or(1);
        let mut scratch = vec![zero; self.scratch_len];
        let mut line = vec![zero; longest];
        for (axis, plan) in plans.iter().enumerate() {
            let len = dims[axis];
            if len == 1 {
                continue;
            }
            let stride = strides[axis];
            if stride == 1 {
                plan.process_with_scratch(buf, &mut scratch);
                continue;
            }
            let block = len * stride;
            for outer in (0..buf.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, slot) in line[..len].iter_mut().enumerate() {
                        *slot = buf[base + k * stride];
                    }
                    plan.process_with_scratch(&mut line[..len], &mut scratch);
                    for (k, v) in line[..len].iter().enumerate() {
                        buf[base + k * stride] = *v;
                    }
                }
            }
        }
    }
}

/// Raw oversampled DFT `Phi x` of an object on `shape` (length `prod(2 M_j + 1)`).
pub fn dft_oversampled<T: Real>(x: &[Complex<T>], shape: &GridShape) -> Result<Vec<Complex<T>>> {
    GridDft::oversampled(shape)?.forward(x)
}

/// Adjoint `Phi^* y` of [`dft_oversampled`], restricted to the object support.
pub fn idft_oversampled<T: Real>(y: &[Complex<T>], shape: &GridShape) -> Result<Vec<Complex<T>>> {
    GridDft::oversampled(shape)?.adjoint(y)
}
