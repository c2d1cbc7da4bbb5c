//! Dense reference implementations, built directly from the defining sums.
#![allow(dead_code)]

use std::f64::consts::PI;

use drphase::linalg::GridShape;
use drphase::model::{ExtendedOp, PropagationOp};
use drphase::solvers::SectorSpec;
use drphase::C64;
use nalgebra::DMatrix;

pub type CMat = DMatrix<C64>;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// `sum_m x(m) exp(-2 pi i sum_j k_j m_j / L_j)` over the object grid, for every
/// `k` on `freq`.
pub fn naive_dft(x: &[C64], object: &GridShape, freq: &GridShape) -> Vec<C64> {
    let mut out = vec![zero(); freq.len()];
    for (ki, o) in out.iter_mut().enumerate() {
        let k = freq.unravel(ki);
        for (mi, &xm) in x.iter().enumerate() {
            let m = object.unravel(mi);
            let angle: f64 = (0..k.len())
                .map(|j| -2.0 * PI * (k[j] * m[j]) as f64 / freq.dims()[j] as f64)
                .sum();
            *o += xm * C64::from_polar(1.0, angle);
        }
    }
    out
}

/// Dense `A^*` (`N x n`) from the explicit formula: row `(p, k)`, column `m`
/// holds `c exp(-2 pi i k.m / L) mu_p(m)`.
pub fn dense_astar(op: &PropagationOp<f64>) -> CMat {
    let object = op.shape().clone();
    let freq = if op.variant().is_oversampled() {
        object.oversampled()
    } else {
        object.clone()
    };
    let (n, l) = (object.len(), freq.len());
    let mut m = CMat::zeros(op.num_measurements(), n);
    for p in 0..op.patterns() {
        let mu = op.mask_values(p);
        for ki in 0..l {
            let k = freq.unravel(ki);
            for mi in 0..n {
                let pos = object.unravel(mi);
                let angle: f64 = (0..k.len())
                    .map(|j| -2.0 * PI * (k[j] * pos[j]) as f64 / freq.dims()[j] as f64)
                    .sum();
                m[(p * l + ki, mi)] = C64::from_polar(op.c(), angle) * mu[mi];
            }
        }
    }
    m
}

/// Dense `Ã^*` (`N x ñ`) assembled column by column from unit vectors.
pub fn dense_extended_astar(ext: &ExtendedOp<f64>) -> CMat {
    let mut m = CMat::zeros(ext.num_measurements(), ext.ntilde());
    let mut e = vec![zero(); ext.ntilde()];
    for j in 0..ext.ntilde() {
        e[j] = C64::new(1.0, 0.0);
        let col = ext.apply_astar(&e).unwrap();
        e[j] = zero();
        for (i, v) in col.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

pub fn mat_vec(m: &CMat, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), v.len());
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

pub fn adj_vec(m: &CMat, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.nrows(), v.len());
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].conj() * v[i]).sum())
        .collect()
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn p2(y: &[C64], b: &[f64]) -> Vec<C64> {
    y.iter()
        .zip(b)
        .map(|(&z, &bj)| {
            let r = z.norm();
            if r > 0.0 {
                z * (bj / r)
            } else {
                C64::new(bj, 0.0)
            }
        })
        .collect()
}

fn polar_search(z: C64, t: (f64, f64), r: (f64, f64), steps: usize, init: (C64, f64)) -> (C64, f64) {
    let mut best = init;
    for i in 0..=steps {
        let ti = t.0 + (t.1 - t.0) * i as f64 / steps as f64;
        for j in 0..=steps {
            let rj = r.0 + (r.1 - r.0) * j as f64 / steps as f64;
            let w = C64::from_polar(rj, ti);
            let d = (w - z).norm();
            if d < best.1 {
                best = (w, d);
            }
        }
    }
    best
}

/// Nearest point of the closed sector `{r e^{i t}: r >= 0, -alpha pi <= t <= beta pi}`
/// found by exhaustive search over a polar grid refined twice.
pub fn brute_sector_point(z: C64, alpha: f64, beta: f64) -> C64 {
    let (lo, hi) = (-alpha * PI, beta * PI);
    let rmax = 2.0 * z.norm() + 1.0;
    let mut best = polar_search(z, (lo, hi), (0.0, rmax), 400, (zero(), z.norm()));
    for width in [0.05, 0.002] {
        let t = if best.0.norm() == 0.0 { lo } else { best.0.arg() };
        let r = best.0.norm();
        best = polar_search(
            z,
            ((t - width).max(lo), (t + width).min(hi)),
            ((r - width * rmax).max(0.0), r + width * rmax),
            400,
            best,
        );
    }
    best.0
}

fn sector_component(z: C64, s: &SectorSpec<f64>) -> C64 {
    if !s.active {
        return z;
    }
    // Principal angle, then the explicit branch formula for convex sectors.
    let t = z.arg();
    let (a, b) = (s.alpha * PI, s.beta * PI);
    if t >= -a && t <= b {
        z
    } else if t > b && t <= b + PI / 2.0 {
        C64::from_polar(1.0, b) * (z * C64::from_polar(1.0, -b)).re
    } else if t < -a && t >= -a - PI / 2.0 {
        C64::from_polar(1.0, -a) * (z * C64::from_polar(1.0, a)).re
    } else {
        zero()
    }
}

pub fn dense_sector(x: &[C64], s: &SectorSpec<f64>) -> Vec<C64> {
    x.iter().map(|&z| sector_component(z, s)).collect()
}

/// `y + A^*[A(2 P_2 y - y)]_X - P_2 y` with dense `A^*`.
pub fn dense_fdr(astar: &CMat, y: &[C64], b: &[f64], s: &SectorSpec<f64>) -> Vec<C64> {
    let p = p2(y, b);
    let refl: Vec<C64> = p.iter().zip(y).map(|(&a, &v)| a * 2.0 - v).collect();
    let x = dense_sector(&adj_vec(astar, &refl), s);
    let back = mat_vec(astar, &x);
    (0..y.len()).map(|i| y[i] + back[i] - p[i]).collect()
}

/// `x + [Ã(2 P_2 Ã^*x) - x]_X - Ã P_2 Ã^*x` with dense `Ã^*`; components beyond
/// `n` of the bracket are zeroed.
pub fn dense_odr(ext_astar: &CMat, n: usize, x: &[C64], b: &[f64], s: &SectorSpec<f64>) -> Vec<C64> {
    let p = p2(&mat_vec(ext_astar, x), b);
    let ap = adj_vec(ext_astar, &p);
    let inner: Vec<C64> = ap.iter().zip(x).map(|(&a, &v)| a * 2.0 - v).collect();
    let mut proj = dense_sector(&inner[..n], s);
    proj.resize(x.len(), zero());
    (0..x.len()).map(|i| x[i] + proj[i] - ap[i]).collect()
}

/// Dense `B = A diag(omega)` (`n x N`).
pub fn dense_b(astar: &CMat, omega: &[C64]) -> CMat {
    let mut b = astar.adjoint();
    for j in 0..b.ncols() {
        for i in 0..b.nrows() {
            b[(i, j)] *= omega[j];
        }
    }
    b
}

/// Real form `[Re B; Im B]` (`2n x N`).
pub fn dense_real_form(b: &CMat) -> DMatrix<f64> {
    let (n, big) = (b.nrows(), b.ncols());
    DMatrix::from_fn(2 * n, big, |i, j| if i < n { b[(i, j)].re } else { b[(i - n, j)].im })
}
