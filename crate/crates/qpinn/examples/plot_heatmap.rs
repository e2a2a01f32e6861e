//! Render the 1D reference solution as a PPM heatmap (x left to right,
//! t bottom to top, blue→white→red around zero).

use qpinn::cli::grid_io::write_grid_csv;
use qpinn::cli::ppm::plot_grid;
use qpinn::oracle::{rk45_solve, Rk45Config};
use qpinn::pde::linspace;
use qpinn::HeatProblem;

fn main() {
    let problem = HeatProblem::default_1d();
    let times: Vec<f64> = linspace(0.0, 1.0, 60)[1..].to_vec();
    let sol = rk45_solve(&problem, 101, &times, &Rk45Config::default()).unwrap();

    let dir = std::env::temp_dir();
    let csv = dir.join("heat1d.csv");
    let ppm = dir.join("heat1d.ppm");
    write_grid_csv(&sol.grid, &csv).unwrap();
    plot_grid(&sol.grid, None, None, &ppm).unwrap();

    println!("solution grid: {:?} (x by t)", sol.grid.shape());
    println!("csv: {}", csv.display());
    println!("ppm: {} (101x59 pixels)", ppm.display());
    println!("convert to PNG with e.g. `magick {} heat1d.png`", ppm.display());
}
