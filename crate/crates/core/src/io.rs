//! Plain-text mask and data files.
//!
//! Mask: a `PHASES n` line followed by `n` phases in radians (row-major).
//! Data: a `B N` line followed by `N` nonnegative magnitudes.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::model::{MaskKind, MaskSpec};
use crate::scalar::Real;

fn write_values<T: Real, W: Write>(mut w: W, tag: &str, values: &[T]) -> Result<()> {
    writeln!(w, "{tag} {}", values.len())?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

fn read_values<T: Real, R: Read>(r: R, tag: &str) -> Result<Vec<T>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("empty file, expected {tag:?} header")))??;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(Error::Parse(format!("expected {tag:?} header, got {header:?}")));
    }
    let count: usize = parts
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad count in header {header:?}")))?;
    let mut values = Vec::with_capacity(count);
    for line in lines {
        let line = line?;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad number {tok:?}")))?;
            values.push(T::lit(v));
        }
    }
    if values.len() != count {
        return Err(Error::Parse(format!(
            "header announces {count} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn write_mask<T: Real, W: Write>(w: W, mask: &MaskSpec<T>) -> Result<()> {
    write_values(w, "PHASES", &mask.phases)
}

/// Reads a mask file. Kind and seed are not stored; an all-zero file reads
/// back as an identity mask, anything else as a uniform-circle mask with seed 0.
pub fn read_mask<T: Real, R: Read>(r: R) -> Result<MaskSpec<T>> {
    let phases: Vec<T> = read_values(r, "PHASES")?;
    let kind = if phases.iter().all(|p| p.is_zero()) {
        MaskKind::Identity
    } else {
        MaskKind::UniformCircle
    };
    Ok(MaskSpec { phases, kind, seed: 0 })
}

pub fn write_data<T: Real, W: Write>(w: W, b: &[T]) -> Result<()> {
    write_values(w, "B", b)
}

pub fn read_data<T: Real, R: Read>(r: R) -> Result<Vec<T>> {
    let b: Vec<T> = read_values(r, "B")?;
    if b.iter().any(|&v| !(v >= T::zero())) {
        return Err(Error::Parse("data magnitudes must be nonnegative".into()));
    }
    Ok(b)
}
