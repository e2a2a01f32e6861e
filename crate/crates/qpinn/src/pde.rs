//! Heat-equation problems, residual graphs, and collocation grids.
//!
//! A [`HeatProblem`] is u_t = κ·Δu on a box with Dirichlet boundary data and
//! an initial field. Residuals are built as exprgraph nodes over a model's
//! output node, so they stay differentiable with respect to inputs and
//! parameters alike:
//!
//! * interior: R = u_t − κ·Σ_d u_{x_d x_d}
//! * boundary: R = u(x, t) − b(x, t)
//! * initial:  R = u(x, 0) − u₀(x)

use std::collections::HashMap;

use crate::exprgraph::{Graph, NodeId, VarId};

#[derive(Debug, thiserror::Error)]
pub enum PdeError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("expected {want} input variables (space dims + time), got {got}")]
    InputVarCount { got: usize, want: usize },
    #[error("point {0:?} does not lie on the spatial boundary with t > 0")]
    PointNotOnBoundary(Vec<f64>),
    #[error("point {0:?} does not have t = 0")]
    PointNotInitial(Vec<f64>),
    #[error("collocation grid needs nx >= 3 and nt >= 2, got nx={nx}, nt={nt}")]
    DegenerateGrid { nx: usize, nt: usize },
    #[error("grid expects {expected} values, got {got}")]
    GridShape { expected: usize, got: usize },
    #[error("grid axes must be strictly increasing and non-empty")]
    AxesNotIncreasing,
    #[error("field function `{0}` is not supported here")]
    UnsupportedField(String),
}

/// Scalar field over the spatial domain, used for initial and boundary data.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldFn {
    /// amplitude · Π_d sin(π x_d). Vanishes on integer-coordinate boundaries,
    /// so the heat equation has the closed-form separable solution.
    SineMode { amplitude: f64 },
    /// amplitude · exp(−Σ_d (x_d − center_d)² / (2 width²)).
    GaussianBump {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
    },
    /// Identically zero.
    Zero,
    /// Multilinear interpolation of samples on a tensor grid.
    CustomTable { axes: Vec<Vec<f64>>, values: Vec<f64> },
}

impl FieldFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FieldFn::SineMode { amplitude } => {
                amplitude * x.iter().map(|&v| (std::f64::consts::PI * v).sin()).product::<f64>()
            }
            FieldFn::GaussianBump {
                amplitude,
                width,
                center,
            } => {
                let d2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum();
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            FieldFn::Zero => 0.0,
            FieldFn::CustomTable { axes, values } => interp_multilinear(axes, values, x),
        }
    }
}

fn interp_multilinear(axes: &[Vec<f64>], values: &[f64], x: &[f64]) -> f64 {
    // clamp to the table hull, then blend the 2^d bracketing corners
    let dim = axes.len();
    let mut lo_idx = vec![0usize; dim];
    let mut w = vec![0.0f64; dim];
    for d in 0..dim {
        let ax = &axes[d];
        let v = x[d].clamp(ax[0], *ax.last().unwrap());
        let i = match ax.binary_search_by(|a| a.partial_cmp(&v).unwrap()) {
            Ok(i) => i.min(ax.len() - 2),
            Err(i) => i.saturating_sub(1).min(ax.len() - 2),
        };
        lo_idx[d] = i;
        w[d] = (v - ax[i]) / (ax[i + 1] - ax[i]);
    }
    let strides: Vec<usize> = (0..dim)
        .map(|d| axes[d + 1..].iter().map(|a| a.len()).product())
        .collect();
    let mut acc = 0.0;
    for corner in 0..(1usize << dim) {
        let mut idx = 0;
        let mut weight = 1.0;
        for d in 0..dim {
            let hi = corner >> d & 1 == 1;
            idx += (lo_idx[d] + hi as usize) * strides[d];
            weight *= if hi { w[d] } else { 1.0 - w[d] };
        }
        acc += weight * values[idx];
    }
    acc
}

/// Heat equation u_t = κ·Δu on a box, with Dirichlet boundary data `bc` and
/// initial field `ic`.
#[derive(Clone, Debug)]
pub struct HeatProblem {
    pub dim: usize,
    pub kappa: f64,
    pub space_bounds: Vec<(f64, f64)>,
    pub t_max: f64,
    pub ic: FieldFn,
    pub bc: FieldFn,
}

impl HeatProblem {
    /// 1D benchmark: κ = 0.01/π, x ∈ [−1, 1], t ∈ [0, 1],
    /// u₀(x) = −sin(πx), zero Dirichlet boundary.
    pub fn default_1d() -> Self {
        HeatProblem {
            dim: 1,
            kappa: 0.01 / std::f64::consts::PI,
            space_bounds: vec![(-1.0, 1.0)],
            t_max: 1.0,
            ic: FieldFn::SineMode { amplitude: -1.0 },
            bc: FieldFn::Zero,
        }
    }

    /// 2D benchmark: κ = 2/π, (x, y) ∈ [0, 1]², t ∈ [0, 0.1],
    /// u₀ = sin(πx)sin(πy), zero Dirichlet boundary.
    pub fn default_2d() -> Self {
        HeatProblem {
            dim: 2,
            kappa: 2.0 / std::f64::consts::PI,
            space_bounds: vec![(0.0, 1.0), (0.0, 1.0)],
            t_max: 0.1,
            ic: FieldFn::SineMode { amplitude: 1.0 },
            bc: FieldFn::Zero,
        }
    }

    pub fn validate(&self) -> Result<(), PdeError> {
        if self.dim != 1 && self.dim != 2 {
            return Err(PdeError::InvalidProblem(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        if !(self.kappa > 0.0) {
            return Err(PdeError::InvalidProblem(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.t_max > 0.0) {
            return Err(PdeError::InvalidProblem(format!("t_max must be > 0, got {}", self.t_max)));
        }
        if self.space_bounds.len() != self.dim {
            return Err(PdeError::InvalidProblem(format!(
                "need {} bound pairs, got {}",
                self.dim,
                self.space_bounds.len()
            )));
        }
        for &(lo, hi) in &self.space_bounds {
            if !(hi > lo) {
                return Err(PdeError::InvalidProblem(format!("bounds ({lo}, {hi}) not increasing")));
            }
        }
        Ok(())
    }

    pub fn ic_value(&self, x: &[f64]) -> f64 {
        self.ic.eval(x)
    }

    /// Dirichlet boundary value; current field tags are time-independent but
    /// the signature carries t for generality.
    pub fn bc_value(&self, x: &[f64], _t: f64) -> f64 {
        self.bc.eval(x)
    }

    fn on_spatial_boundary(&self, point: &[f64]) -> bool {
        (0..self.dim).any(|d| {
            let (lo, hi) = self.space_bounds[d];
            point[d] == lo || point[d] == hi
        })
    }
}

/// Interior/boundary/initial sample points; each point is `[x, (y,), t]`.
#[derive(Clone, Debug)]
pub struct CollocationSet {
    pub interior: Vec<Vec<f64>>,
    pub boundary: Vec<Vec<f64>>,
    pub initial: Vec<Vec<f64>>,
}

impl CollocationSet {
    pub fn total_len(&self) -> usize {
        self.interior.len() + self.boundary.len() + self.initial.len()
    }
}

/// Uniform tensor grid: nx points per space dimension, nt time levels with
/// t = 0 included. Initial = every spatial point at t = 0; boundary =
/// perimeter points at each t > 0; interior = strictly inside at each t > 0.
pub fn sample_collocation(
    problem: &HeatProblem,
    nx: usize,
    nt: usize,
) -> Result<CollocationSet, PdeError> {
    if nx < 3 || nt < 2 {
        return Err(PdeError::DegenerateGrid { nx, nt });
    }
    problem.validate()?;
    let axes: Vec<Vec<f64>> = problem
        .space_bounds
        .iter()
        .map(|&(lo, hi)| linspace(lo, hi, nx))
        .collect();
    let times = linspace(0.0, problem.t_max, nt);

    let mut set = CollocationSet {
        interior: Vec::new(),
        boundary: Vec::new(),
        initial: Vec::new(),
    };
    let mut idx = vec![0usize; problem.dim];
    loop {
        let spatial: Vec<f64> = (0..problem.dim).map(|d| axes[d][idx[d]]).collect();
        let on_boundary = (0..problem.dim).any(|d| idx[d] == 0 || idx[d] == nx - 1);
        let mut point = spatial.clone();
        point.push(0.0);
        set.initial.push(point);
        for &t in &times[1..] {
            let mut point = spatial.clone();
            point.push(t);
            if on_boundary {
                set.boundary.push(point);
            } else {
                set.interior.push(point);
            }
        }
        // odometer over spatial indices, last dimension fastest
        let mut d = problem.dim;
        loop {
            if d == 0 {
                return Ok(set);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < nx {
                break;
            }
            idx[d] = 0;
        }
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Sampled field over the Cartesian product of `axes` (row-major, first axis
/// slowest). Axes are ordered `[x, (y,), t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionGrid {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl SolutionGrid {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self, PdeError> {
        for ax in &axes {
            if ax.is_empty() || ax.windows(2).any(|w| w[0] >= w[1]) {
                return Err(PdeError::AxesNotIncreasing);
            }
        }
        let expected: usize = axes.iter().map(|a| a.len()).product();
        if values.len() != expected {
            return Err(PdeError::GridShape {
                expected,
                got: values.len(),
            });
        }
        Ok(SolutionGrid { axes, values })
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (d, &i) in idx.iter().enumerate() {
            flat = flat * self.axes[d].len() + i;
        }
        flat
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    /// Iterates points in storage order, yielding the coordinate vector.
    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let shape = self.shape();
        let total = self.values.len();
        (0..total).map(move |mut flat| {
            let mut coords = vec![0.0; shape.len()];
            for d in (0..shape.len()).rev() {
                coords[d] = self.axes[d][flat % shape[d]];
                flat /= shape[d];
            }
            coords
        })
    }
}

/// PDE residual graph R = u_t − κ·Σ_d u_{x_d x_d} over the model output
/// node. `input_vars` are `[x, (y,), t]` in order, t last.
pub fn residual_pde(
    graph: &mut Graph,
    u: NodeId,
    input_vars: &[VarId],
    problem: &HeatProblem,
) -> Result<NodeId, PdeError> {
    if input_vars.len() != problem.dim + 1 {
        return Err(PdeError::InputVarCount {
            got: input_vars.len(),
            want: problem.dim + 1,
        });
    }
    let t_var = input_vars[problem.dim];
    let u_t = graph.differentiate(u, t_var);
    let mut laplacian = graph.constant(0.0);
    for &x_var in &input_vars[..problem.dim] {
        let u_x = graph.differentiate(u, x_var);
        let u_xx = graph.differentiate(u_x, x_var);
        laplacian = graph.add(laplacian, u_xx);
    }
    let kappa = graph.constant(problem.kappa);
    let diffusion = graph.mul(kappa, laplacian);
    Ok(graph.sub(u_t, diffusion))
}

/// Dirichlet boundary residual at one boundary point: u(point) − b(point).
pub fn residual_bc(
    graph: &mut Graph,
    u: NodeId,
    input_vars: &[VarId],
    problem: &HeatProblem,
    point: &[f64],
) -> Result<NodeId, PdeError> {
    if input_vars.len() != problem.dim + 1 || point.len() != problem.dim + 1 {
        return Err(PdeError::InputVarCount {
            got: input_vars.len().min(point.len()),
            want: problem.dim + 1,
        });
    }
    let t = point[problem.dim];
    if !problem.on_spatial_boundary(point) || !(t > 0.0) {
        return Err(PdeError::PointNotOnBoundary(point.to_vec()));
    }
    let u_at = bind_point(graph, u, input_vars, point);
    let b = graph.constant(problem.bc_value(&point[..problem.dim], t));
    Ok(graph.sub(u_at, b))
}

/// Initial residual at one t = 0 point: u(x, 0) − u₀(x).
pub fn residual_ic(
    graph: &mut Graph,
    u: NodeId,
    input_vars: &[VarId],
    problem: &HeatProblem,
    point: &[f64],
) -> Result<NodeId, PdeError> {
    if input_vars.len() != problem.dim + 1 || point.len() != problem.dim + 1 {
        return Err(PdeError::InputVarCount {
            got: input_vars.len().min(point.len()),
            want: problem.dim + 1,
        });
    }
    if point[problem.dim] != 0.0 {
        return Err(PdeError::PointNotInitial(point.to_vec()));
    }
    let u_at = bind_point(graph, u, input_vars, point);
    let u0 = graph.constant(problem.ic_value(&point[..problem.dim]));
    Ok(graph.sub(u_at, u0))
}

fn bind_point(graph: &mut Graph, u: NodeId, input_vars: &[VarId], point: &[f64]) -> NodeId {
    let map: HashMap<VarId, NodeId> = input_vars
        .iter()
        .zip(point)
        .map(|(&v, &c)| (v, graph.constant(c)))
        .collect();
    graph.substitute(u, &map)
}

/// Point-parametric residual graphs for training: evaluate with per-point
/// bindings instead of materializing one graph per collocation point.
/// Boundary/initial data enter through the `bc_data` / `ic_data` variables.
pub struct ResidualForms {
    pub interior: NodeId,
    pub boundary: NodeId,
    pub initial: NodeId,
    pub bc_data: VarId,
    pub ic_data: VarId,
}

pub fn residual_forms(
    graph: &mut Graph,
    u: NodeId,
    input_vars: &[VarId],
    problem: &HeatProblem,
) -> Result<ResidualForms, PdeError> {
    let interior = residual_pde(graph, u, input_vars, problem)?;
    let (bc_node, bc_data) = graph.var_with_id("__bc_data");
    let boundary = graph.sub(u, bc_node);
    let zero = graph.constant(0.0);
    let mut at_t0 = HashMap::new();
    at_t0.insert(input_vars[problem.dim], zero);
    let u0 = graph.substitute(u, &at_t0);
    let (ic_node, ic_data) = graph.var_with_id("__ic_data");
    let initial = graph.sub(u0, ic_node);
    Ok(ResidualForms {
        interior,
        boundary,
        initial,
        bc_data,
        ic_data,
    })
}
