//! Synthetic test objects and their PGM-pair file format.
//!
//! Two stand-ins are provided: a randomly phased phantom (smooth bump
//! magnitudes, i.i.d. phases in a sector) and a deterministic complex image
//! whose real part is a radial gradient and imaginary part a diagonal stripe
//! pattern. Both leave a zero margin around the object (loose support).
//!
//! On disk an object is three files sharing a prefix: `<prefix>.re.pgm` and
//! `<prefix>.im.pgm` (ASCII P2, maxval 65535) and `<prefix>.map`, which
//! records the linear range each PGM was quantized from.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use drphase::{Error, GridShape, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PGM_MAXVAL: u32 = 65535;

#[derive(Clone, Debug, PartialEq)]
pub enum ImageKind {
    /// Randomly phased phantom with phases uniform in `[-alpha pi, beta pi]`.
    Rpp { alpha: f64, beta: f64, seed: u64 },
    /// Deterministic gradient + stripes image.
    Tcb,
    /// PGM pair with the given prefix.
    File(PathBuf),
}

impl fmt::Display for ImageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageKind::Rpp { alpha, beta, .. } => write!(f, "rpp:{alpha},{beta}"),
            ImageKind::Tcb => f.write_str("tcb"),
            ImageKind::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Parses `rpp`, `rpp:alpha,beta`, `tcb` or `file:PREFIX`. The phantom seed
/// is filled in per trial.
impl FromStr for ImageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rpp" => Ok(ImageKind::Rpp { alpha: 1.0, beta: 1.0, seed: 0 }),
            "tcb" => Ok(ImageKind::Tcb),
            _ => {
                if let Some(path) = s.strip_prefix("file:") {
                    return Ok(ImageKind::File(path.into()));
                }
                let bounds = s
                    .strip_prefix("rpp:")
                    .ok_or_else(|| Error::Parse(format!("unknown image kind {s:?}")))?;
                let (alpha, beta) = parse_pair(bounds)?;
                Ok(ImageKind::Rpp { alpha, beta, seed: 0 })
            }
        }
    }
}

/// Parses `a,b` into two floats.
pub fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Parse(format!("expected two comma-separated numbers, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestImage {
    pub kind: ImageKind,
    pub shape: GridShape,
    pub margin: usize,
}

impl TestImage {
    pub fn new(kind: ImageKind, shape: GridShape, margin: usize) -> Self {
        Self { kind, shape, margin }
    }

    /// Same image description with the phantom reseeded.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        if let ImageKind::Rpp { seed: s, .. } = &mut out.kind {
            *s = seed;
        }
        out
    }
}

fn bump_magnitude(u: f64, v: f64) -> f64 {
    let r2 = (u - 0.5).powi(2) + (v - 0.5).powi(2);
    let blob = (u - 0.3).powi(2) / 0.02 + (v - 0.65).powi(2) / 0.05;
    0.25 + 0.75 * (-r2 / 0.3).exp() + 0.4 * (-blob).exp()
}

/// Interior coordinates scaled to `[0, 1]` (0.5 for a single-point axis).
fn unit_coords(idx: &[usize], shape: &GridShape, margin: usize) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(idx.len());
    for (&i, &len) in idx.iter().zip(shape.dims()) {
        if i < margin || i + margin >= len {
            return None;
        }
        let span = len - 2 * margin;
        out.push(if span > 1 {
            (i - margin) as f64 / (span - 1) as f64
        } else {
            0.5
        });
    }
    Some(out)
}

pub fn gen_image(spec: &TestImage) -> Result<Vec<C64>> {
    let shape = &spec.shape;
    if let ImageKind::File(prefix) = &spec.kind {
        let (img, file_shape) = read_pgm_pair(prefix)?;
        if &file_shape != shape {
            return Err(Error::InvalidShape(format!(
                "image file is {file_shape}, expected {shape}"
            )));
        }
        return Ok(img);
    }
    if shape.dims().iter().any(|&d| d < 2 * spec.margin + 1) {
        return Err(Error::InvalidShape(format!(
            "margin {} leaves no interior in {shape}",
            spec.margin
        )));
    }
    let mut rng = match spec.kind {
        ImageKind::Rpp { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut out = vec![C64::new(0.0, 0.0); shape.len()];
    for (flat, px) in out.iter_mut().enumerate() {
        let idx = shape.unravel(flat);
        let Some(uv) = unit_coords(&idx, shape, spec.margin) else {
            continue;
        };
        let (u, v) = (uv[0], uv.get(1).copied().unwrap_or(0.5));
        *px = match (&spec.kind, rng.as_mut()) {
            (ImageKind::Rpp { alpha, beta, .. }, Some(rng)) => {
                let t: f64 = rng.random();
                let angle = (-alpha + t * (alpha + beta)) * PI;
                C64::from_polar(bump_magnitude(u, v), angle)
            }
            _ => {
                let r = ((u - 0.5).powi(2) + (v - 0.5).powi(2)).sqrt() / 0.5f64.sqrt();
                let stripes = 0.5 + 0.5 * (2.0 * PI * (u + v) * 2.0).cos();
                C64::new(0.1 + 0.9 * (1.0 - r), 0.05 + 0.95 * stripes)
            }
        };
    }
    let interior_ok = shape.dims().iter().all(|&d| d >= 2 * spec.margin + 2);
    if interior_ok && shape.ndim() >= 2 && support_rank(&out, shape) < 2 {
        return Err(Error::Construction("generated image has a degenerate support".into()));
    }
    Ok(out)
}

/// Dimension of the affine hull of the support (nonzero pixels).
pub fn support_rank(x: &[C64], shape: &GridShape) -> usize {
    let points: Vec<Vec<f64>> = x
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm_sqr() > 0.0)
        .map(|(i, _)| shape.unravel(i).into_iter().map(|v| v as f64).collect())
        .collect();
    let Some(first) = points.first() else {
        return 0;
    };
    let mut rows: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(first).map(|(a, b)| a - b).collect())
        .collect();
    // Gaussian elimination with partial pivoting on the difference vectors.
    let dim = first.len();
    let mut rank = 0;
    for col in 0..dim {
        let pivot = (rank..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()));
        let Some(p) = pivot else { break };
        if rows[p][col].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, p);
        let head = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            let f = row[col] / head[col];
            row.iter_mut().zip(&head).for_each(|(a, h)| *a -= f * h);
        }
        rank += 1;
    }
    rank
}

fn pgm_paths(prefix: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".re.pgm"), with(".im.pgm"), with(".map"))
}

fn quantize(values: &[f64]) -> (Vec<u32>, f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let q = values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * PGM_MAXVAL as f64).round() as u32
            } else {
                0
            }
        })
        .collect();
    (q, lo, hi)
}

fn write_pgm(path: &Path, shape: &GridShape, q: &[u32]) -> Result<()> {
    let cols = shape.dims()[1];
    let mut text = format!("P2\n{} {}\n{PGM_MAXVAL}\n", cols, shape.dims()[0]);
    for row in q.chunks(cols) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn read_pgm(path: &Path) -> Result<(GridShape, Vec<u32>)> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let bad = |what: &str| Error::Parse(format!("{}: {what}", path.display()));
    if tokens.next() != Some("P2") {
        return Err(bad("not an ASCII PGM (P2)"));
    }
    let mut num = |what: &str| -> Result<u32> {
        tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad(what))
    };
    let cols = num("bad width")? as usize;
    let rows = num("bad height")? as usize;
    let maxval = num("bad maxval")?;
    if maxval != PGM_MAXVAL {
        return Err(bad("maxval must be 65535"));
    }
    let values = (0..rows * cols)
        .map(|_| num("truncated pixel data"))
        .collect::<Result<Vec<u32>>>()?;
    if values.iter().any(|&v| v > maxval) {
        return Err(bad("pixel above maxval"));
    }
    Ok((GridShape::new(vec![rows, cols])?, values))
}

/// Writes `<prefix>.re.pgm`, `<prefix>.im.pgm` and `<prefix>.map`.
pub fn write_pgm_pair(prefix: &Path, x: &[C64], shape: &GridShape) -> Result<()> {
    if shape.ndim() != 2 {
        return Err(Error::InvalidShape("PGM output needs a 2-D grid".into()));
    }
    if x.len() != shape.len() {
        return Err(Error::LengthMismatch {
            expected: shape.len(),
            actual: x.len(),
        });
    }
    let (re_path, im_path, map_path) = pgm_paths(prefix);
    let re: Vec<f64> = x.iter().map(|z| z.re).collect();
    let im: Vec<f64> = x.iter().map(|z| z.im).collect();
    let (qr, rlo, rhi) = quantize(&re);
    let (qi, ilo, ihi) = quantize(&im);
    write_pgm(&re_path, shape, &qr)?;
    write_pgm(&im_path, shape, &qi)?;
    fs::write(
        map_path,
        format!("# value = min + q / {PGM_MAXVAL} * (max - min)\nre {rlo:e} {rhi:e}\nim {ilo:e} {ihi:e}\n"),
    )?;
    Ok(())
}

/// Reads a PGM pair written by [`write_pgm_pair`].
pub fn read_pgm_pair(prefix: &Path) -> Result<(Vec<C64>, GridShape)> {
    let (re_path, im_path, map_path) = pgm_paths(prefix);
    let (shape, qr) = read_pgm(&re_path)?;
    let (shape_im, qi) = read_pgm(&im_path)?;
    if shape != shape_im {
        return Err(Error::InvalidShape(format!(
            "real part is {shape}, imaginary part is {shape_im}"
        )));
    }
    let map = fs::read_to_string(&map_path)?;
    let mut ranges = [None, None];
    for line in map.lines().filter(|l| !l.starts_with('#')) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if let [tag, lo, hi] = parts[..] {
            let slot = match tag {
                "re" => 0,
                "im" => 1,
                _ => continue,
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{}: bad range value {s:?}", map_path.display())))
            };
            ranges[slot] = Some((parse(lo)?, parse(hi)?));
        }
    }
    let missing = || Error::Parse(format!("{}: missing re/im range", map_path.display()));
    let (rlo, rhi) = ranges[0].ok_or_else(missing)?;
    let (ilo, ihi) = ranges[1].ok_or_else(missing)?;
    let scale = |q: u32, lo: f64, hi: f64| lo + q as f64 / PGM_MAXVAL as f64 * (hi - lo);
    let x = qr
        .iter()
        .zip(&qi)
        .map(|(&a, &b)| C64::new(scale(a, rlo, rhi), scale(b, ilo, ihi)))
        .collect();
    Ok((x, shape))
}
