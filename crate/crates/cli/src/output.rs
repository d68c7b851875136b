//! File formats: PGM/PPM label images, raw 3D labels with JSON metadata, CSV traces, JSON
//! summaries. Images put the first grid axis on columns and the second on rows, with the
//! second axis increasing upward.

use crate::error::{CliError, Result};
use dirpart::solver::EnergyTrace;
use dirpart::{Partition, ScalarField};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Gray level used for nodes outside the domain.
pub const OUTSIDE_GRAY: u8 = 255;

/// Gray level of `label` on a ramp over `0..=254` that keeps distinct labels distinct.
pub fn label_gray(label: u32, k: usize) -> u8 {
    if label == Partition::OUTSIDE {
        return OUTSIDE_GRAY;
    }
    if k <= 1 {
        return 0;
    }
    ((label as f64) * 254.0 / (k - 1) as f64).round() as u8
}

fn image_index(n: usize, row: usize, col: usize) -> usize {
    col * n + (n - 1 - row)
}

fn require_2d(dim: usize, what: &str) -> Result<()> {
    if dim == 2 {
        Ok(())
    } else {
        Err(CliError::field("dim", format!("{what} needs a 2D grid")))
    }
}

/// Binary PGM (P5, maxval 255) of a 2D label field.
pub fn pgm_bytes(phi: &Partition) -> Result<Vec<u8>> {
    let spec = phi.spec();
    require_2d(spec.dim(), "a PGM image")?;
    let n = spec.n();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    for row in 0..n {
        for col in 0..n {
            out.push(label_gray(phi.labels()[image_index(n, row, col)], phi.k()));
        }
    }
    Ok(out)
}

/// Binary PGM of a scalar field, linearly mapped from its range onto `0..=255`.
pub fn field_pgm_bytes(f: &ScalarField) -> Result<Vec<u8>> {
    let spec = f.spec();
    require_2d(spec.dim(), "a PGM image")?;
    let n = spec.n();
    let (lo, hi) = f
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    for row in 0..n {
        for col in 0..n {
            let v = f.values()[image_index(n, row, col)];
            out.push(((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}

fn palette(label: u32) -> [u8; 3] {
    // Golden-angle hue steps keep neighbouring labels apart.
    let hue = (label as f64 * 137.507_764) % 360.0;
    let c = 0.75 * 0.6;
    let x = c * (1.0 - ((hue / 60.0) % 2.0 - 1.0).abs());
    let m = 0.75 - c;
    let (r, g, b) = match (hue / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r, g, b].map(|v| ((v + m) * 255.0).round() as u8)
}

/// Binary PPM (P6) with one color per region, white outside, and black on region boundaries.
pub fn overlay_ppm_bytes(phi: &Partition) -> Result<Vec<u8>> {
    let spec = phi.spec();
    require_2d(spec.dim(), "a PPM overlay")?;
    let n = spec.n();
    let labels = phi.labels();
    let at = |i: usize, j: usize| labels[(i % n) * n + (j % n)];
    let mut out = format!("P6\n{n} {n}\n255\n").into_bytes();
    for row in 0..n {
        for col in 0..n {
            let (i, j) = (col, n - 1 - row);
            let l = at(i, j);
            let rgb = if l == Partition::OUTSIDE {
                [255; 3]
            } else if [at(i + 1, j), at(i + n - 1, j), at(i, j + 1), at(i, j + n - 1)]
                .iter()
                .any(|&m| m != l)
            {
                [0; 3]
            } else {
                palette(l)
            };
            out.extend_from_slice(&rgb);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct RawMeta {
    dims: [usize; 3],
    dtype: &'static str,
    order: &'static str,
    endianness: &'static str,
    box_min: f64,
    box_max: f64,
    k: usize,
    outside: u8,
}

/// Row-major 8-bit labels of a 3D field (last axis fastest) and their JSON description.
pub fn raw_bytes(phi: &Partition) -> Result<(Vec<u8>, String)> {
    let spec = phi.spec();
    if spec.dim() != 3 {
        return Err(CliError::field("dim", "raw label volumes need a 3D grid"));
    }
    let raw = phi
        .labels()
        .iter()
        .map(|&l| if l == Partition::OUTSIDE { OUTSIDE_GRAY } else { l as u8 })
        .collect();
    let n = spec.n();
    let meta = RawMeta {
        dims: [n; 3],
        dtype: "uint8",
        order: "row-major, index = (i0 * n + i1) * n + i2, last axis fastest",
        endianness: "none (single-byte values)",
        box_min: -std::f64::consts::PI,
        box_max: std::f64::consts::PI,
        k: phi.k(),
        outside: OUTSIDE_GRAY,
    };
    Ok((raw, serde_json::to_string_pretty(&meta)? + "\n"))
}

/// CSV with header `iter,tau,energy,changed_cells,wall_ms`.
pub fn trace_csv(trace: &EnergyTrace) -> String {
    let mut out = String::from("iter,tau,energy,changed_cells,wall_ms\n");
    for r in &trace.records {
        writeln!(out, "{},{},{},{},{:.3}", r.iter, r.tau, r.energy, r.changed_cells, r.wall_ms)
            .expect("writing to a String cannot fail");
    }
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_file(path, text.as_bytes())
}
