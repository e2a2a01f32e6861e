//! Binary PPM (P6) heatmaps with a linear blue→white→red colormap.
//!
//! One pixel per grid cell, x increasing left to right, the second axis
//! (t or y) increasing bottom to top. Values are clamped to the color
//! range; the midpoint renders white, the maximum pure red (255, 0, 0),
//! the minimum pure blue.

use std::io::Write;
use std::path::Path;

use crate::pde::SolutionGrid;

use super::CliError;

fn color(value: f64, lo: f64, hi: f64) -> [u8; 3] {
    let clamped = value.clamp(lo, hi);
    // map to [-1, 1] around the range midpoint
    let u = if hi > lo {
        2.0 * (clamped - lo) / (hi - lo) - 1.0
    } else {
        0.0
    };
    if u >= 0.0 {
        let fade = ((1.0 - u) * 255.0).round() as u8;
        [255, fade, fade]
    } else {
        let fade = ((1.0 + u) * 255.0).round() as u8;
        [fade, fade, 255]
    }
}

/// Renders a width×height value matrix (row-major, row 0 at the BOTTOM)
/// into P6 bytes.
pub fn render_p6(values: &[f64], width: usize, height: usize, lo: f64, hi: f64) -> Vec<u8> {
    assert_eq!(values.len(), width * height);
    let mut out = Vec::with_capacity(32 + 3 * width * height);
    out.extend_from_slice(format!("P6\n{width} {height}\n255\n").as_bytes());
    for row in (0..height).rev() {
        for col in 0..width {
            out.extend_from_slice(&color(values[row * width + col], lo, hi));
        }
    }
    out
}

/// Renders a 2-axis slice of a grid. Grids with a time axis of length > 1
/// and three axes need `slice_time`; the slice must hit an axis value
/// exactly.
pub fn plot_grid(
    grid: &SolutionGrid,
    slice_time: Option<f64>,
    range: Option<(f64, f64)>,
    path: &Path,
) -> Result<(), CliError> {
    let (values, width, height) = extract_plane(grid, slice_time)?;
    let (lo, hi) = range.unwrap_or_else(|| {
        let max_abs = values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let m = if max_abs > 0.0 { max_abs } else { 1.0 };
        (-m, m)
    });
    if !(hi > lo) {
        return Err(CliError::Grid(format!("bad color range ({lo}, {hi})")));
    }
    let bytes = render_p6(&values, width, height, lo, hi);
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

/// Returns (values row-major with row 0 = smallest second coordinate,
/// width, height).
fn extract_plane(
    grid: &SolutionGrid,
    slice_time: Option<f64>,
) -> Result<(Vec<f64>, usize, usize), CliError> {
    let shape = grid.shape();
    match shape.len() {
        2 => {
            // axes (x, t): width = x, height = t; storage is x-major
            let (w, h) = (shape[0], shape[1]);
            let mut vals = vec![0.0; w * h];
            for xi in 0..w {
                for ti in 0..h {
                    vals[ti * w + xi] = grid.value_at(&[xi, ti]);
                }
            }
            Ok((vals, w, h))
        }
        3 => {
            let t = slice_time.ok_or_else(|| {
                CliError::Grid("3-axis grid needs --slice-time to pick a snapshot".into())
            })?;
            let taxis = &grid.axes()[2];
            let ti = taxis
                .iter()
                .position(|&v| (v - t).abs() <= 1e-12)
                .ok_or_else(|| {
                    CliError::Grid(format!("time {t} not in grid times {taxis:?}"))
                })?;
            let (w, h) = (shape[0], shape[1]);
            let mut vals = vec![0.0; w * h];
            for xi in 0..w {
                for yi in 0..h {
                    vals[yi * w + xi] = grid.value_at(&[xi, yi, ti]);
                }
            }
            Ok((vals, w, h))
        }
        other => Err(CliError::Grid(format!("cannot plot {other}-axis grid"))),
    }
}
