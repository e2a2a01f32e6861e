//! Reference solutions: separable closed forms where they exist, and a
//! method-of-lines Dormand-Prince 4(5) integrator for everything else.
//!
//! Space is discretized with second-order central differences on the uniform
//! grid; Dirichlet boundary nodes are excluded from the ODE state and held
//! at b(x, t). The embedded 4(5) pair controls the step through
//! err = sqrt(mean((e_i / (abs_tol + rel_tol·|u_i|))²)) ≤ 1, with the step
//! truncated to land exactly on each requested output time.

use crate::pde::{linspace, FieldFn, HeatProblem, PdeError, SolutionGrid};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("closed-form solution needs a sine-mode initial field with zero boundary, got `{0}`")]
    UnsupportedIc(String),
    #[error("sine-mode closed form needs sin(π·bound) = 0; bound {0} violates it")]
    IncompatibleBounds(f64),
    #[error("spatial grid needs at least 3 points per dimension, got {0}")]
    GridTooSmall(usize),
    #[error("output times must be sorted within [0, {t_max}]")]
    BadOutputTimes { t_max: f64 },
    #[error("step size underflow at t = {t}: dt = {dt}")]
    StepUnderflow { t: f64, dt: f64 },
    #[error(transparent)]
    Pde(#[from] PdeError),
}

/// Closed-form separable solution for sine-mode problems:
/// u = A·Π_d sin(π x_d) · exp(−dim·κπ²·t). `point` is `[x, (y,), t]`.
pub fn analytic_solution(problem: &HeatProblem, point: &[f64]) -> Result<f64, OracleError> {
    let amplitude = match &problem.ic {
        FieldFn::SineMode { amplitude } => *amplitude,
        other => return Err(OracleError::UnsupportedIc(format!("{other:?}"))),
    };
    if problem.bc != FieldFn::Zero {
        return Err(OracleError::UnsupportedIc("non-zero boundary".into()));
    }
    for &(lo, hi) in &problem.space_bounds {
        for b in [lo, hi] {
            if (std::f64::consts::PI * b).sin().abs() > 1e-9 {
                return Err(OracleError::IncompatibleBounds(b));
            }
        }
    }
    let dim = problem.dim;
    let t = point[dim];
    let spatial: f64 = point[..dim]
        .iter()
        .map(|&v| (std::f64::consts::PI * v).sin())
        .product();
    let rate = dim as f64 * problem.kappa * std::f64::consts::PI * std::f64::consts::PI;
    Ok(amplitude * spatial * (-rate * t).exp())
}

/// Spatial discretization: uniform grid, Dirichlet boundary excluded from
/// the ODE state.
pub struct MethodOfLines<'a> {
    problem: &'a HeatProblem,
    nx: usize,
    axes: Vec<Vec<f64>>,
    inv_h2: Vec<f64>,
}

impl<'a> MethodOfLines<'a> {
    pub fn new(problem: &'a HeatProblem, nx: usize) -> Result<Self, OracleError> {
        if nx < 3 {
            return Err(OracleError::GridTooSmall(nx));
        }
        problem.validate()?;
        let axes: Vec<Vec<f64>> = problem
            .space_bounds
            .iter()
            .map(|&(lo, hi)| linspace(lo, hi, nx))
            .collect();
        let inv_h2 = problem
            .space_bounds
            .iter()
            .map(|&(lo, hi)| {
                let h = (hi - lo) / (nx - 1) as f64;
                1.0 / (h * h)
            })
            .collect();
        Ok(MethodOfLines {
            problem,
            nx,
            axes,
            inv_h2,
        })
    }

    /// Interior points per dimension.
    pub fn interior_n(&self) -> usize {
        self.nx - 2
    }

    pub fn state_len(&self) -> usize {
        self.interior_n().pow(self.problem.dim as u32)
    }

    /// Initial ODE state: u₀ sampled at the interior points.
    pub fn initial_state(&self) -> Vec<f64> {
        let m = self.interior_n();
        let mut y = Vec::with_capacity(self.state_len());
        match self.problem.dim {
            1 => {
                for i in 0..m {
                    y.push(self.problem.ic_value(&[self.axes[0][i + 1]]));
                }
            }
            _ => {
                for i in 0..m {
                    for j in 0..m {
                        y.push(
                            self.problem
                                .ic_value(&[self.axes[0][i + 1], self.axes[1][j + 1]]),
                        );
                    }
                }
            }
        }
        y
    }

    /// du/dt = κ·Δu with the central second difference; boundary neighbors
    /// come from the Dirichlet data at time `t`.
    pub fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        let m = self.interior_n();
        let kappa = self.problem.kappa;
        match self.problem.dim {
            1 => {
                let bval = |i: usize| self.problem.bc_value(&[self.axes[0][i]], t);
                for i in 0..m {
                    let left = if i == 0 { bval(0) } else { y[i - 1] };
                    let right = if i == m - 1 { bval(self.nx - 1) } else { y[i + 1] };
                    dydt[i] = kappa * (left - 2.0 * y[i] + right) * self.inv_h2[0];
                }
            }
            _ => {
                for i in 0..m {
                    for j in 0..m {
                        let idx = i * m + j;
                        let xc = self.axes[0][i + 1];
                        let yc = self.axes[1][j + 1];
                        let left = if i == 0 {
                            self.problem.bc_value(&[self.axes[0][0], yc], t)
                        } else {
                            y[idx - m]
                        };
                        let right = if i == m - 1 {
                            self.problem.bc_value(&[self.axes[0][self.nx - 1], yc], t)
                        } else {
                            y[idx + m]
                        };
                        let down = if j == 0 {
                            self.problem.bc_value(&[xc, self.axes[1][0]], t)
                        } else {
                            y[idx - 1]
                        };
                        let up = if j == m - 1 {
                            self.problem.bc_value(&[xc, self.axes[1][self.nx - 1]], t)
                        } else {
                            y[idx + 1]
                        };
                        dydt[idx] = kappa
                            * ((left - 2.0 * y[idx] + right) * self.inv_h2[0]
                                + (down - 2.0 * y[idx] + up) * self.inv_h2[1]);
                    }
                }
            }
        }
    }

    /// Full-grid snapshot (boundary filled from the Dirichlet data).
    fn assemble(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let m = self.interior_n();
        let mut full = Vec::with_capacity(self.nx.pow(self.problem.dim as u32));
        match self.problem.dim {
            1 => {
                for i in 0..self.nx {
                    if i == 0 || i == self.nx - 1 {
                        full.push(self.problem.bc_value(&[self.axes[0][i]], t));
                    } else {
                        full.push(y[i - 1]);
                    }
                }
            }
            _ => {
                for i in 0..self.nx {
                    for j in 0..self.nx {
                        let on_bd = i == 0 || i == self.nx - 1 || j == 0 || j == self.nx - 1;
                        if on_bd {
                            full.push(
                                self.problem
                                    .bc_value(&[self.axes[0][i], self.axes[1][j]], t),
                            );
                        } else {
                            full.push(y[(i - 1) * m + (j - 1)]);
                        }
                    }
                }
            }
        }
        full
    }
}

/// Adaptive-step configuration for [`rk45_solve`].
#[derive(Clone, Debug)]
pub struct Rk45Config {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_dt: Option<f64>,
    pub max_dt: Option<f64>,
    pub safety: f64,
    pub min_scale: f64,
    pub max_scale: f64,
}

impl Default for Rk45Config {
    fn default() -> Self {
        Rk45Config {
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            initial_dt: None,
            max_dt: None,
            safety: 0.9,
            min_scale: 0.2,
            max_scale: 5.0,
        }
    }
}

/// Result of a solve: field snapshots plus the audited step trace.
pub struct Rk45Solution {
    pub grid: SolutionGrid,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest error norm among accepted steps; ≤ 1 by construction.
    pub max_accepted_err_norm: f64,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// 5th-order weights (the propagated solution; FSAL row of A).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Embedded 4th-order weights for the error estimate.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates the heat problem on an `nx`-per-dimension grid and returns
/// snapshots at `output_times` (sorted, within [0, t_max]).
pub fn rk45_solve(
    problem: &HeatProblem,
    nx: usize,
    output_times: &[f64],
    config: &Rk45Config,
) -> Result<Rk45Solution, OracleError> {
    if output_times.is_empty()
        || output_times.windows(2).any(|w| w[0] >= w[1])
        || output_times[0] < 0.0
        || *output_times.last().unwrap() > problem.t_max
    {
        return Err(OracleError::BadOutputTimes {
            t_max: problem.t_max,
        });
    }
    let mol = MethodOfLines::new(problem, nx)?;
    let n = mol.state_len();
    let t_end = *output_times.last().unwrap();

    let mut snapshots: Vec<Vec<f64>> = Vec::with_capacity(output_times.len());
    let mut t = 0.0;
    let mut y = mol.initial_state();
    let mut next_out = 0;
    if output_times[0] == 0.0 {
        snapshots.push(mol.assemble(0.0, &y));
        next_out = 1;
    }

    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut max_err = 0.0f64;

    let max_dt = config.max_dt.unwrap_or(problem.t_max);
    let mut dt = config
        .initial_dt
        .unwrap_or(problem.t_max * 1e-3)
        .min(max_dt);

    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut y_stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    // FSAL: k[0] holds f(t, y) across steps
    mol.rhs(t, &y, &mut k[0]);

    while next_out < output_times.len() {
        let target = output_times[next_out];
        let mut landing = false;
        if t + dt >= target {
            dt = target - t;
            landing = true;
        }
        if dt < 1e-14 * problem.t_max {
            return Err(OracleError::StepUnderflow { t, dt });
        }

        for stage in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (s, ks) in k.iter().enumerate().take(stage) {
                    let a = A[stage][s];
                    if a != 0.0 {
                        acc += a * ks[i];
                    }
                }
                y_stage[i] = y[i] + dt * acc;
            }
            let (head, tail) = k.split_at_mut(stage);
            let _ = head;
            mol.rhs(t + C[stage] * dt, &y_stage, &mut tail[0]);
        }
        for i in 0..n {
            let mut acc5 = 0.0;
            for (s, ks) in k.iter().enumerate() {
                if B5[s] != 0.0 {
                    acc5 += B5[s] * ks[i];
                }
            }
            y5[i] = y[i] + dt * acc5;
        }
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut acc4 = 0.0;
            for (s, ks) in k.iter().enumerate() {
                if B4[s] != 0.0 {
                    acc4 += B4[s] * ks[i];
                }
            }
            let y4 = y[i] + dt * acc4;
            let scale = config.abs_tol + config.rel_tol * y5[i].abs();
            let e = (y5[i] - y4) / scale;
            err_sq += e * e;
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            accepted += 1;
            max_err = max_err.max(err);
            t += dt;
            std::mem::swap(&mut y, &mut y5);
            // FSAL: stage 7 evaluated f(t+dt, y_new)
            k.swap(0, 6);
            if landing {
                snapshots.push(mol.assemble(t, &y));
                next_out += 1;
            }
        } else {
            rejected += 1;
        }

        let scale = if err == 0.0 {
            config.max_scale
        } else {
            (config.safety * err.powf(-0.2)).clamp(config.min_scale, config.max_scale)
        };
        dt = (dt * scale).min(max_dt);
        if t < t_end {
            dt = dt.min(t_end - t).max(1e-15 * problem.t_max);
        }
    }

    // interleave snapshots into a grid with time as the last (fastest) axis
    let spatial_len = nx.pow(problem.dim as u32);
    let mut values = Vec::with_capacity(spatial_len * output_times.len());
    for s in 0..spatial_len {
        for snap in &snapshots {
            values.push(snap[s]);
        }
    }
    let mut axes: Vec<Vec<f64>> = problem
        .space_bounds
        .iter()
        .map(|&(lo, hi)| linspace(lo, hi, nx))
        .collect();
    axes.push(output_times.to_vec());
    Ok(Rk45Solution {
        grid: SolutionGrid::new(axes, values)?,
        accepted_steps: accepted,
        rejected_steps: rejected,
        max_accepted_err_norm: max_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn analytic_values_1d() {
        let p = HeatProblem::default_1d();
        assert!(analytic_solution(&p, &[0.0, 0.7]).unwrap().abs() < 1e-15);
        assert!((analytic_solution(&p, &[-0.5, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let want = -(-0.01 * PI).exp(); // −e^{−κπ²·1} with κ = 0.01/π
        assert!((analytic_solution(&p, &[0.5, 1.0]).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn analytic_values_2d() {
        let p = HeatProblem::default_2d();
        assert!((analytic_solution(&p, &[0.5, 0.5, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(analytic_solution(&p, &[0.0, 0.3, 0.05]).unwrap().abs() < 1e-15);
        assert!(analytic_solution(&p, &[0.4, 1.0, 0.02]).unwrap().abs() < 1e-14);
        let want = (-0.4 * PI).exp(); // e^{−2κπ²·0.1} with κ = 2/π
        assert!((analytic_solution(&p, &[0.5, 0.5, 0.1]).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn analytic_rejects_unsupported_fields() {
        let mut p = HeatProblem::default_1d();
        p.ic = FieldFn::Zero;
        assert!(analytic_solution(&p, &[0.0, 0.0]).is_err());
        let mut p = HeatProblem::default_1d();
        p.space_bounds = vec![(-0.5, 0.5)];
        assert!(analytic_solution(&p, &[0.0, 0.0]).is_err());
    }

    fn linear_bc_problem() -> HeatProblem {
        // u = 2x + 1 boundary data on [0, 1] so a linear field is steady
        HeatProblem {
            dim: 1,
            kappa: 0.3,
            space_bounds: vec![(0.0, 1.0)],
            t_max: 1.0,
            ic: FieldFn::Zero,
            bc: FieldFn::CustomTable {
                axes: vec![vec![0.0, 1.0]],
                values: vec![1.0, 3.0],
            },
        }
    }

    #[test]
    fn mol_rhs_vanishes_on_linear_field() {
        let p = linear_bc_problem();
        let mol = MethodOfLines::new(&p, 11).unwrap();
        let xs = linspace(0.0, 1.0, 11);
        let y: Vec<f64> = xs[1..10].iter().map(|&x| 2.0 * x + 1.0).collect();
        let mut dydt = vec![0.0; y.len()];
        mol.rhs(0.0, &y, &mut dydt);
        for d in dydt {
            assert!(d.abs() < 1e-12, "linear field should be steady, got {d}");
        }
    }

    #[test]
    fn mol_rhs_is_exact_on_quadratics() {
        // u = x² with matching boundary data → du/dt = 2κ exactly
        let p = HeatProblem {
            bc: FieldFn::CustomTable {
                axes: vec![vec![0.0, 1.0]],
                values: vec![0.0, 1.0],
            },
            ..linear_bc_problem()
        };
        let mol = MethodOfLines::new(&p, 9).unwrap();
        let xs = linspace(0.0, 1.0, 9);
        let y: Vec<f64> = xs[1..8].iter().map(|&x| x * x).collect();
        let mut dydt = vec![0.0; y.len()];
        mol.rhs(0.0, &y, &mut dydt);
        for d in dydt {
            assert!((d - 2.0 * p.kappa).abs() < 1e-12);
        }
    }

    #[test]
    fn mol_rhs_second_order_on_sine() {
        let p = HeatProblem::default_1d();
        let err_at = |nx: usize| {
            let mol = MethodOfLines::new(&p, nx).unwrap();
            let xs = linspace(-1.0, 1.0, nx);
            let y: Vec<f64> = xs[1..nx - 1].iter().map(|&x| (PI * x).sin()).collect();
            let mut dydt = vec![0.0; y.len()];
            mol.rhs(0.0, &y, &mut dydt);
            xs[1..nx - 1]
                .iter()
                .zip(&dydt)
                .map(|(&x, &d)| (d - (-p.kappa * PI * PI * (PI * x).sin())).abs())
                .fold(0.0f64, f64::max)
        };
        let (e1, e2) = (err_at(41), err_at(81));
        let ratio = e1 / e2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x error reduction, got {ratio}"
        );
    }

    #[test]
    fn mol_rejects_tiny_grids() {
        let p = HeatProblem::default_1d();
        assert!(MethodOfLines::new(&p, 2).is_err());
    }

    #[test]
    fn rk45_matches_analytic_1d() {
        let p = HeatProblem::default_1d();
        let sol = rk45_solve(&p, 201, &[0.25, 0.5, 1.0], &Rk45Config::default()).unwrap();
        let mut max_err = 0.0f64;
        for (point, &value) in sol.grid.points().zip(sol.grid.values().iter()) {
            let exact = analytic_solution(&p, &point).unwrap();
            max_err = max_err.max((value - exact).abs());
        }
        assert!(max_err <= 1e-4, "max error {max_err}");
        assert!(sol.max_accepted_err_norm <= 1.0);
        assert!(sol.accepted_steps > 0);
    }

    #[test]
    fn rk45_spatial_convergence_is_second_order() {
        let p = HeatProblem::default_1d();
        let max_err = |nx: usize| {
            let sol = rk45_solve(&p, nx, &[1.0], &Rk45Config::default()).unwrap();
            sol.grid
                .points()
                .zip(sol.grid.values().iter())
                .map(|(pt, &v)| (v - analytic_solution(&p, &pt).unwrap()).abs())
                .fold(0.0f64, f64::max)
        };
        let ratio = max_err(51) / max_err(101);
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x from halving h, got {ratio}"
        );
    }

    #[test]
    fn rk45_zero_initial_field_stays_zero() {
        let p = HeatProblem {
            ic: FieldFn::Zero,
            ..HeatProblem::default_1d()
        };
        let sol = rk45_solve(&p, 21, &[0.5, 1.0], &Rk45Config::default()).unwrap();
        assert!(sol.grid.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rk45_respects_discrete_maximum_principle() {
        let p = HeatProblem::default_1d();
        let times = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let sol = rk45_solve(&p, 51, &times, &Rk45Config::default()).unwrap();
        let shape = sol.grid.shape();
        let mut prev = f64::INFINITY;
        for (ti, _) in times.iter().enumerate() {
            let mut max_abs = 0.0f64;
            for xi in 0..shape[0] {
                max_abs = max_abs.max(sol.grid.value_at(&[xi, ti]).abs());
            }
            assert!(
                max_abs <= prev + 1e-9,
                "max |u| grew from {prev} to {max_abs}"
            );
            prev = max_abs;
        }
    }

    #[test]
    fn rk45_2d_matches_product_closed_form() {
        let p = HeatProblem::default_2d();
        let sol = rk45_solve(&p, 50, &[0.05, 0.1], &Rk45Config::default()).unwrap();
        let mut max_err = 0.0f64;
        for (point, &value) in sol.grid.points().zip(sol.grid.values().iter()) {
            let exact = analytic_solution(&p, &point).unwrap();
            max_err = max_err.max((value - exact).abs());
        }
        assert!(max_err <= 2e-3, "max error {max_err}");
    }

    #[test]
    fn rk45_rejects_bad_output_times() {
        let p = HeatProblem::default_1d();
        let cfg = Rk45Config::default();
        assert!(rk45_solve(&p, 21, &[], &cfg).is_err());
        assert!(rk45_solve(&p, 21, &[0.5, 0.25], &cfg).is_err());
        assert!(rk45_solve(&p, 21, &[0.5, 2.0], &cfg).is_err());
    }
}
