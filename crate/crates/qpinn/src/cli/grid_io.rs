//! CSV serialization of [`SolutionGrid`].
//!
//! Header `x[,y],t,u`, one row per grid point in storage order, floats
//! printed with 17 significant digits so the round trip is bit-exact.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::pde::SolutionGrid;

use super::CliError;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_grid_csv(grid: &SolutionGrid, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_grid_csv_to(grid, &mut w)
}

pub fn write_grid_csv_to(grid: &SolutionGrid, w: &mut impl Write) -> Result<(), CliError> {
    let n_axes = grid.axes().len();
    let header = match n_axes {
        2 => "x,t,u",
        3 => "x,y,t,u",
        other => {
            return Err(CliError::Grid(format!(
                "grids must have 2 or 3 axes, got {other}"
            )))
        }
    };
    writeln!(w, "{header}")?;
    for (point, &value) in grid.points().zip(grid.values().iter()) {
        let coords: Vec<String> = point.iter().map(|&c| fmt(c)).collect();
        writeln!(w, "{},{}", coords.join(","), fmt(value))?;
    }
    Ok(())
}

pub fn read_grid_csv(path: &Path) -> Result<SolutionGrid, CliError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Grid("empty CSV".into()))??;
    let n_coords = match header.trim() {
        "x,t,u" => 2,
        "x,y,t,u" => 3,
        other => return Err(CliError::Grid(format!("unrecognized CSV header `{other}`"))),
    };

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_coords + 1 {
            return Err(CliError::Grid(format!(
                "row {}: expected {} fields, got {}",
                lineno + 2,
                n_coords + 1,
                fields.len()
            )));
        }
        let mut nums = Vec::with_capacity(n_coords + 1);
        for f in &fields {
            nums.push(f.trim().parse::<f64>().map_err(|_| {
                CliError::Grid(format!("row {}: bad float `{f}`", lineno + 2))
            })?);
        }
        let value = nums.pop().unwrap();
        rows.push((nums, value));
    }

    // reconstruct axes from the unique coordinate values per column
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); n_coords];
    for (coords, _) in &rows {
        for (d, &c) in coords.iter().enumerate() {
            if !axes[d].iter().any(|&v| v == c) {
                axes[d].push(c);
            }
        }
    }
    for ax in &mut axes {
        ax.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let expected: usize = axes.iter().map(|a| a.len()).product();
    if rows.len() != expected {
        return Err(CliError::Grid(format!(
            "CSV is not a full tensor grid: {} rows, axes imply {expected}",
            rows.len()
        )));
    }
    let mut values = vec![f64::NAN; expected];
    for (coords, value) in rows {
        let mut flat = 0;
        for (d, &c) in coords.iter().enumerate() {
            let i = axes[d]
                .iter()
                .position(|&v| v == c)
                .expect("coordinate collected above");
            flat = flat * axes[d].len() + i;
        }
        if !values[flat].is_nan() {
            return Err(CliError::Grid("duplicate grid point in CSV".into()));
        }
        values[flat] = value;
    }
    Ok(SolutionGrid::new(axes, values).map_err(|e| CliError::Grid(e.to_string()))?)
}
