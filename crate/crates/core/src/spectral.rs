//! Linearization of FDR at the true solution and its spectral analysis.
//!
//! At `y0 = A^* x0` with phase `omega0 = y0/|y0|` the local behaviour of FDR
//! is governed by `B = A diag(omega0)` and its real form
//! `ℬ = [Re B; Im B]` (`2n x N`). Its singular values pair up as
//! `λ_k^2 + λ_{2n+1-k}^2 = 1` with `λ_1 = 1` (left vector `G(x0)`,
//! right vector `|y0|`) and `λ_{2n} = 0`. The second singular value `λ_2`
//! bounds the local geometric rate of FDR.
//!
//! Everything here is matrix-free except [`svd_oracle`], which assembles
//! `ℬ` densely for desk-scale cross-checks.

use faer::Mat;
use num_complex::Complex;

use crate::error::{check_len, Error, Result};
use crate::linalg::{complexify, norm, real_dot, real_norm, stack, unstack};
use crate::model::PropagationOp;
use crate::scalar::{phase, Real};

/// Dense assembly is refused above this many entries of `ℬ`.
pub const DENSE_LIMIT: usize = 1_000_000;

/// Point at which FDR is linearized.
#[derive(Clone, Debug)]
pub struct LinearizationPoint<T> {
    /// `y` (for the solution, `y0 = A^* x0`).
    pub y: Vec<Complex<T>>,
    /// `omega = y/|y|`, 1 where `y(j) = 0`.
    pub omega: Vec<Complex<T>>,
    /// Data magnitudes `b`.
    pub b: Vec<T>,
    /// `A y` (equal to `x0` at the solution).
    pub x0: Vec<Complex<T>>,
    /// Set when some `|y(j)| = 0` and the phase convention had to be used.
    pub degenerate: bool,
}

impl<T: Real> LinearizationPoint<T> {
    /// The true solution `y0 = A^* x0`, `b = |y0|`.
    pub fn at_solution(op: &PropagationOp<T>, x0: &[Complex<T>]) -> Result<Self> {
        let y = op.apply_astar(x0)?;
        let b = y.iter().map(|z| z.norm()).collect();
        Self::at_iterate(op, y, b)
    }

    /// A general iterate `y` with data `b` (for the full Jacobian form).
    pub fn at_iterate(op: &PropagationOp<T>, y: Vec<Complex<T>>, b: Vec<T>) -> Result<Self> {
        check_len(op.num_measurements(), y.len())?;
        check_len(y.len(), b.len())?;
        let omega = y.iter().map(|&z| phase(z)).collect();
        let degenerate = y.iter().any(|z| z.norm_sqr().is_zero());
        let x0 = op.apply_a(&y)?;
        Ok(Self {
            y,
            omega,
            b,
            x0,
            degenerate,
        })
    }

    /// `|y|`, the leading right singular vector of `ℬ` at the solution (unnormalized).
    pub fn magnitudes(&self) -> Vec<T> {
        self.y.iter().map(|z| z.norm()).collect()
    }
}

/// `B v = A(omega . v)`.
pub fn apply_b<T: Real>(
    pt: &LinearizationPoint<T>,
    op: &PropagationOp<T>,
    v: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    check_len(pt.omega.len(), v.len())?;
    let w: Vec<_> = v.iter().zip(&pt.omega).map(|(&a, &w)| a * w).collect();
    op.apply_a(&w)
}

/// `B^* u = conj(omega) . A^* u`.
pub fn apply_bstar<T: Real>(
    pt: &LinearizationPoint<T>,
    op: &PropagationOp<T>,
    u: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let y = op.apply_astar(u)?;
    Ok(y.iter().zip(&pt.omega).map(|(&a, w)| a * w.conj()).collect())
}

/// `ℬ v = G(B v)` for real `v` in `R^N`.
pub fn apply_real_b<T: Real>(pt: &LinearizationPoint<T>, op: &PropagationOp<T>, v: &[T]) -> Result<Vec<T>> {
    Ok(stack(&apply_b(pt, op, &complexify(v))?))
}

/// `ℬ^T u = Re(B^* G^{-1}(u))` for `u` in `R^{2n}`.
pub fn apply_real_b_t<T: Real>(
    pt: &LinearizationPoint<T>,
    op: &PropagationOp<T>,
    u: &[T],
) -> Result<Vec<T>> {
    check_len(2 * op.n(), u.len())?;
    let w = unstack(u)?;
    Ok(apply_bstar(pt, op, &w)?.iter().map(|z| z.re).collect())
}

/// The FDR Jacobian `𝒮_loc` acting on `v = Ω^* η`.
///
/// With `at_solution` it uses `(I - B^*B) Re(v) + i B^*B Im(v)`, valid when
/// `|y| = b`; otherwise the general form
/// `(I - B^*B) v + i (2 B^*B - I) diag(b/|y|) Im(v)`, where zero entries of
/// `|y|` take ratio 1 (and `pt.degenerate` is set).
pub fn apply_sloc<T: Real>(
    pt: &LinearizationPoint<T>,
    op: &PropagationOp<T>,
    v: &[Complex<T>],
    at_solution: bool,
) -> Result<Vec<Complex<T>>> {
    check_len(pt.omega.len(), v.len())?;
    let i = Complex::new(T::zero(), T::one());
    if at_solution {
        let re: Vec<_> = v.iter().map(|z| Complex::new(z.re, T::zero())).collect();
        let im: Vec<_> = v.iter().map(|z| Complex::new(z.im, T::zero())).collect();
        let bb_re = apply_bstar(pt, op, &apply_b(pt, op, &re)?)?;
        let bb_im = apply_bstar(pt, op, &apply_b(pt, op, &im)?)?;
        Ok(re
            .iter()
            .zip(bb_re)
            .zip(bb_im)
            .map(|((&r, br), bi)| r - br + i * bi)
            .collect())
    } else {
        let scaled: Vec<_> = v
            .iter()
            .zip(&pt.y)
            .zip(&pt.b)
            .map(|((z, y), &b)| {
                let m = y.norm();
                let ratio = if m > T::zero() { b / m } else { T::one() };
                Complex::new(z.im * ratio, T::zero())
            })
            .collect();
        let bb_v = apply_bstar(pt, op, &apply_b(pt, op, v)?)?;
        let bb_s = apply_bstar(pt, op, &apply_b(pt, op, &scaled)?)?;
        let two = T::lit(2.0);
        Ok(v.iter()
            .zip(bb_v)
            .zip(bb_s.iter().zip(&scaled))
            .map(|((&vi, bv), (&bs, &s))| vi - bv + i * (bs * two - s))
            .collect())
    }
}

/// Full singular system of `ℬ`, sorted by decreasing singular value.
#[derive(Clone, Debug)]
pub struct SvdOracle {
    /// `λ_1 >= ... >= λ_{2n}`.
    pub values: Vec<f64>,
    /// Left singular vectors `u_k` in `R^{2n}`.
    pub left: Vec<Vec<f64>>,
    /// Right singular vectors `v_k` in `R^N`.
    pub right: Vec<Vec<f64>>,
}

/// Dense `ℬ` (`2n x N`) assembled row by row from `ℬ^T e_i`.
pub fn dense_real_b<T: Real>(pt: &LinearizationPoint<T>, op: &PropagationOp<T>) -> Result<Mat<f64>> {
    let rows = 2 * op.n();
    let cols = op.num_measurements();
    if rows * cols > DENSE_LIMIT {
        return Err(Error::SizeGuard {
            rows,
            cols,
            limit: DENSE_LIMIT,
        });
    }
    let mut m = Mat::<f64>::zeros(rows, cols);
    let mut e = vec![T::zero(); rows];
    for r in 0..rows {
        e[r] = T::one();
        let row = apply_real_b_t(pt, op, &e)?;
        e[r] = T::zero();
        for (c, v) in row.into_iter().enumerate() {
            m[(r, c)] = v.to_f64_lossy();
        }
    }
    Ok(m)
}

/// Dense SVD of `ℬ` (desk scale only, see [`DENSE_LIMIT`]).
pub fn svd_oracle<T: Real>(pt: &LinearizationPoint<T>, op: &PropagationOp<T>) -> Result<SvdOracle> {
    let m = dense_real_b(pt, op)?;
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Construction(format!("dense SVD failed: {e:?}")))?;
    let (s, u, v) = (svd.S(), svd.U(), svd.V());
    let mut order: Vec<usize> = (0..s.dim()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    Ok(SvdOracle {
        values: order.iter().map(|&k| s[k]).collect(),
        left: order.iter().map(|&k| (0..u.nrows()).map(|i| u[(i, k)]).collect()).collect(),
        right: order.iter().map(|&k| (0..v.nrows()).map(|i| v[(i, k)]).collect()).collect(),
    })
}

/// Result of [`lambda2_power`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport<T> {
    /// `||ℬ^T ξ_1||` with `ξ_1 = G(x0)/||x0||` (should be 1).
    pub lambda1: T,
    pub lambda2: T,
    /// `||ℬ^T G(-i x0)|| / ||x0||` (should be 0).
    pub lambda2n: T,
    /// `||ℬℬ^T u - λ_2^2 u||` at the returned vector.
    pub residual: T,
    /// Predicted local rate of FDR, `λ_2`.
    pub predicted_rate: T,
    /// `|λ_2^2 + ||ℬ^T G(-i G^{-1} u_2)||^2 - 1|`, the pairing identity at `u_2`.
    pub pairing_defect: T,
    pub power_iters: usize,
    pub converged: bool,
    /// Left singular vector estimate `u_2` in `R^{2n}`.
    pub vector: Vec<T>,
}

impl<T: Real> SpectralReport<T> {
    pub const CSV_HEADER: &'static str =
        "seed,variant,n,N,lambda1,lambda2,lambda2n,residual,power_iters,predicted_rate";

    pub fn csv_row(&self, seed: u64, variant: &str, n: usize, big_n: usize) -> String {
        format!(
            "{seed},{variant},{n},{big_n},{:.12},{:.12},{:.3e},{:.3e},{},{:.12}",
            self.lambda1, self.lambda2, self.lambda2n, self.residual, self.power_iters, self.predicted_rate
        )
    }
}

fn minus_i_stacked<T: Real>(u: &[T]) -> Result<Vec<T>> {
    let w = unstack(u)?;
    let rotated: Vec<_> = w.iter().map(|z| Complex::new(z.im, -z.re)).collect();
    Ok(stack(&rotated))
}

/// `λ_2` by power iteration on `ℬℬ^T`, deflating the known top left singular
/// vector `ξ_1 = G(x0)/||x0||` at every step.
///
/// Stops when the eigen-residual drops to `tol`; otherwise returns the last
/// estimate with `converged = false`.
pub fn lambda2_power<T: Real>(
    pt: &LinearizationPoint<T>,
    op: &PropagationOp<T>,
    tol: T,
    max_iters: usize,
) -> Result<SpectralReport<T>> {
    let scale = norm(&pt.x0);
    if scale.is_zero() {
        return Err(Error::InvalidArgument("linearization point has x0 = 0".into()));
    }
    let xi1: Vec<T> = stack(&pt.x0).into_iter().map(|v| v / scale).collect();
    let deflate = |w: &mut Vec<T>| {
        let c = real_dot(&xi1, w);
        for (a, &x) in w.iter_mut().zip(&xi1) {
            *a = *a - c * x;
        }
    };
    let normalize = |w: &mut Vec<T>| {
        let r = real_norm(w);
        for a in w.iter_mut() {
            *a = *a / r;
        }
    };

    let mut u: Vec<T> = stack(&crate::model::gaussian_vector::<T>(op.n(), 0xA11CE));
    deflate(&mut u);
    normalize(&mut u);

    let mut rq = T::zero();
    let mut residual = T::infinity();
    let mut iters = 0;
    let mut converged = false;
    while iters < max_iters {
        iters += 1;
        let mut w = apply_real_b(pt, op, &apply_real_b_t(pt, op, &u)?)?;
        deflate(&mut w);
        rq = real_dot(&u, &w);
        residual = w
            .iter()
            .zip(&u)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - rq * b) * (a - rq * b))
            .sqrt();
        if residual <= tol {
            converged = true;
            break;
        }
        if real_norm(&w).is_zero() {
            break;
        }
        u = w;
        normalize(&mut u);
    }

    let lambda2 = rq.max(T::zero()).sqrt();
    let lambda1 = real_norm(&apply_real_b_t(pt, op, &xi1)?);
    let lambda2n = real_norm(&apply_real_b_t(pt, op, &minus_i_stacked(&xi1)?)?);
    let partner = real_norm(&apply_real_b_t(pt, op, &minus_i_stacked(&u)?)?);
    let pairing_defect = num_traits::Float::abs(lambda2 * lambda2 + partner * partner - T::one());
    Ok(SpectralReport {
        lambda1,
        lambda2,
        lambda2n,
        residual,
        predicted_rate: lambda2,
        pairing_defect,
        power_iters: iters,
        converged,
        vector: u,
    })
}

/// Quantities behind the equality case of `||Im(B^* u)|| <= ||u||`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapDiagnostic<T> {
    /// `||Im(B^* u)||`.
    pub im_norm: T,
    /// `max_j |Re(a_j^* u) Re(a_j^* x0) + Im(a_j^* u) Im(a_j^* x0)|`.
    pub max_defect: T,
    /// Euclidean norm of the per-measurement defects.
    pub defect_norm: T,
}

/// Evaluates `||Im(B^* u)||` and the alignment defect for a unit vector `u`.
/// Equality `||Im(B^* u)|| = 1` holds exactly when every defect vanishes.
pub fn check_gap_condition<T: Real>(
    pt: &LinearizationPoint<T>,
    op: &PropagationOp<T>,
    u: &[Complex<T>],
) -> Result<GapDiagnostic<T>> {
    let bu = apply_bstar(pt, op, u)?;
    let im_norm = bu.iter().fold(T::zero(), |acc, z| acc + z.im * z.im).sqrt();
    let au = op.apply_astar(u)?;
    let mut max_defect = T::zero();
    let mut sq = T::zero();
    for (a, y) in au.iter().zip(&pt.y) {
        let d = num_traits::Float::abs(a.re * y.re + a.im * y.im);
        max_defect = max_defect.max(d);
        sq = sq + d * d;
    }
    Ok(GapDiagnostic {
        im_norm,
        max_defect,
        defect_norm: sq.sqrt(),
    })
}

/// Matrix of `𝒮_loc` on the invariant plane `{v_k, i v_{2n+1-k}}` (0-based `k`).
///
/// The partner vector is rebuilt as `v_{2n+1-k} = ℬ^T G(-i G^{-1} u_k) / λ_{2n+1-k}`
/// so that its sign matches `v_k`. Returns the 2x2 matrix (columns are the
/// images of the basis vectors) and the norm of the part of those images
/// that leaves the plane.
pub fn sloc_rotation_block<T: Real>(
    pt: &LinearizationPoint<T>,
    op: &PropagationOp<T>,
    svd: &SvdOracle,
    k: usize,
) -> Result<([[f64; 2]; 2], f64)> {
    let two_n = svd.values.len();
    if k >= two_n {
        return Err(Error::InvalidArgument(format!("block index {k} out of range")));
    }
    let partner_value = svd.values[two_n - 1 - k];
    if partner_value <= 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "partner singular value of block {k} vanishes"
        )));
    }
    let lit = |v: f64| T::lit(v);
    let uk: Vec<T> = svd.left[k].iter().map(|&v| lit(v)).collect();
    let partner: Vec<f64> = apply_real_b_t(pt, op, &minus_i_stacked(&uk)?)?
        .iter()
        .map(|v| v.to_f64_lossy() / partner_value)
        .collect();
    let vk = &svd.right[k];
    let basis0: Vec<Complex<f64>> = vk.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let basis1: Vec<Complex<f64>> = partner.iter().map(|&v| Complex::new(0.0, v)).collect();

    let to_t = |v: &[Complex<f64>]| -> Vec<Complex<T>> {
        v.iter().map(|z| Complex::new(lit(z.re), lit(z.im))).collect()
    };
    let mut matrix = [[0.0; 2]; 2];
    let mut leak = 0.0f64;
    for (col, basis) in [&basis0, &basis1].into_iter().enumerate() {
        let image: Vec<Complex<f64>> = apply_sloc(pt, op, &to_t(basis), true)?
            .iter()
            .map(|z| Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy()))
            .collect();
        let c0 = crate::linalg::real_inner(&basis0, &image);
        let c1 = crate::linalg::real_inner(&basis1, &image);
        matrix[0][col] = c0;
        matrix[1][col] = c1;
        let rest: f64 = image
            .iter()
            .zip(basis0.iter().zip(&basis1))
            .map(|(z, (a, b))| (z - a * c0 - b * c1).norm_sqr())
            .sum();
        leak = leak.max(rest.sqrt());
    }
    Ok((matrix, leak))
}
