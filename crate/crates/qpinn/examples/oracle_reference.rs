//! Method-of-lines RK45 reference solutions: accuracy against the closed
//! form and the spatial convergence order, then a CSV written to disk.

use qpinn::cli::grid_io::write_grid_csv;
use qpinn::oracle::{analytic_solution, rk45_solve, Rk45Config};
use qpinn::HeatProblem;

fn max_error(problem: &HeatProblem, nx: usize, times: &[f64]) -> f64 {
    let sol = rk45_solve(problem, nx, times, &Rk45Config::default()).unwrap();
    sol.grid
        .points()
        .zip(sol.grid.values().iter())
        .map(|(p, &v)| (v - analytic_solution(problem, &p).unwrap()).abs())
        .fold(0.0f64, f64::max)
}

fn main() {
    let p1 = HeatProblem::default_1d();
    println!("1D heat, κ = 0.01/π, reference vs closed form:");
    for nx in [51, 101, 201] {
        println!("  nx = {nx:3}  max |error| = {:.3e}", max_error(&p1, nx, &[0.25, 0.5, 1.0]));
    }
    let ratio = max_error(&p1, 51, &[1.0]) / max_error(&p1, 101, &[1.0]);
    println!("  halving h shrinks the error {ratio:.2}x (second-order stencil)");

    let p2 = HeatProblem::default_2d();
    let times = [0.0, 0.039, 0.058, 0.097];
    let sol = rk45_solve(&p2, 50, &times, &Rk45Config::default()).unwrap();
    let e2 = sol
        .grid
        .points()
        .zip(sol.grid.values().iter())
        .map(|(p, &v)| (v - analytic_solution(&p2, &p).unwrap()).abs())
        .fold(0.0f64, f64::max);
    println!("\n2D heat, κ = 2/π, nx = 50: max |error| = {e2:.3e}");
    println!(
        "  accepted steps = {}, rejected = {}, worst accepted error norm = {:.3}",
        sol.accepted_steps, sol.rejected_steps, sol.max_accepted_err_norm
    );

    let out = std::env::temp_dir().join("heat2d_reference.csv");
    write_grid_csv(&sol.grid, &out).unwrap();
    println!("  snapshots written to {}", out.display());
}
