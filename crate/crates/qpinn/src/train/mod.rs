//! Model construction, physics-informed loss assembly, optimization, and
//! evaluation metrics.
//!
//! Three model kinds share one contract: the field prediction u(x[, y], t)
//! is a single graph node over input variables and parameter variables.
//! Training minimizes
//!
//! L = Σ R_PDE² + λ_BC Σ R_BC² + λ_IC Σ R_IC²
//!
//! over the collocation sets, jointly in all parameters. [`total_loss`]
//! materializes that sum as one graph node (fine for small sets and the
//! graph-level tests); the trainer itself evaluates the point-parametric
//! residual forms at each collocation point in parallel with a fixed
//! chunk/tree reduction, which computes the same value and gradient without
//! building a per-point graph (see [`objective`]).

mod adam;
mod lbfgs;
mod objective;

pub use adam::{adam_minimize, AdamOptions};
pub use lbfgs::{lbfgs_minimize, lbfgs_minimize_graph, LbfgsOptions, WolfeSample};
pub use objective::{
    CollocationObjective, GraphObjective, IterationRecord, LossPrep, LossValue, Objective,
    StopReason, TrainState,
};

use rand_chacha::ChaCha8Rng;

use crate::embeddings::{
    direct_forward, glorot_uniform, seeded_rng, AffineScaler, EmbeddingError, FnnEmbedding,
    ParamVar, QnnEmbedding,
};
use crate::exprgraph::{Bindings, Graph, GraphError, NodeId, VarId};
use crate::pde::{CollocationSet, HeatProblem, PdeError, SolutionGrid};
use crate::qmodel::{expectation_node, CircuitLayout, Entangler, Observable, QmodelError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("unknown model kind `{0}`")]
    UnknownKind(String),
    #[error("collocation set `{0}` is empty")]
    EmptyCollocation(&'static str),
    #[error("non-finite {what} encountered at iteration {iter}")]
    NonFinite { what: String, iter: usize },
    #[error("line search failed at iteration {iter} (steepest-descent fallback included)")]
    LineSearchFailed { iter: usize },
    #[error("evaluation axis {axis} value {value} is outside the problem domain")]
    AxisOutOfDomain { axis: usize, value: f64 },
    #[error("parameter vector has {got} entries, model has {want}")]
    ParamLen { got: usize, want: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Qmodel(#[from] QmodelError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

/// The three interchangeable field approximators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    /// Classical tanh MLP with linear scalar output.
    #[serde(rename = "pinn")]
    Pinn,
    /// Feed-forward network producing encoding angles for the quantum circuit.
    #[serde(rename = "fnn-te-qpinn")]
    FnnTeQpinn,
    /// Auxiliary quantum circuit producing the encoding angles.
    #[serde(rename = "qnn-te-qpinn")]
    QnnTeQpinn,
    /// Non-trainable affine embedding into the quantum circuit (ablation).
    #[serde(rename = "direct-qpinn")]
    DirectQpinn,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self, TrainError> {
        match s {
            "pinn" => Ok(ModelKind::Pinn),
            "fnn-te-qpinn" => Ok(ModelKind::FnnTeQpinn),
            "qnn-te-qpinn" => Ok(ModelKind::QnnTeQpinn),
            "direct-qpinn" => Ok(ModelKind::DirectQpinn),
            other => Err(TrainError::UnknownKind(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Pinn => "pinn",
            ModelKind::FnnTeQpinn => "fnn-te-qpinn",
            ModelKind::QnnTeQpinn => "qnn-te-qpinn",
            ModelKind::DirectQpinn => "direct-qpinn",
        }
    }

    pub fn is_quantum(&self) -> bool {
        !matches!(self, ModelKind::Pinn)
    }
}

/// Architecture settings for [`build_model`].
#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub entangler: Entangler,
    /// Hidden widths of the classical embedding network.
    pub fnn_hidden: Vec<usize>,
    /// Auxiliary circuit depth; defaults to the main circuit's layer count.
    pub aux_layers: Option<usize>,
    /// Hidden widths of the classical PINN baseline.
    pub mlp_hidden: Vec<usize>,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            n_qubits: 4,
            n_layers: 5,
            entangler: Entangler::Ring,
            fnn_hidden: vec![10, 10],
            aux_layers: None,
            mlp_hidden: vec![50, 50, 50, 50],
        }
    }

    pub fn layout(&self) -> CircuitLayout {
        CircuitLayout::new(self.n_qubits, self.n_layers, self.entangler)
    }

    pub fn aux_layout(&self) -> CircuitLayout {
        CircuitLayout::new(
            self.n_qubits,
            self.aux_layers.unwrap_or(self.n_layers),
            self.entangler,
        )
    }
}

/// A built model: the graph, the output node u, and the flattened parameter
/// list (variational angles first, then embedding/classical parameters).
pub struct Model {
    pub graph: Graph,
    pub output: NodeId,
    pub input_vars: Vec<VarId>,
    pub params: Vec<ParamVar>,
    pub kind: ModelKind,
    pub problem: HeatProblem,
    pub config: ModelConfig,
    /// Index range of θ_var inside `params` (empty for the classical PINN).
    pub var_param_range: std::ops::Range<usize>,
    /// Encoding angle nodes Γ feeding the circuit (empty for the PINN).
    pub angle_nodes: Vec<NodeId>,
}

impl Model {
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn param_vars(&self) -> Vec<VarId> {
        self.params.iter().map(|p| p.var).collect()
    }

    pub fn init_values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.init).collect()
    }

    pub fn bind_params(&self, bindings: &mut Bindings, values: &[f64]) -> Result<(), TrainError> {
        if values.len() != self.params.len() {
            return Err(TrainError::ParamLen {
                got: values.len(),
                want: self.params.len(),
            });
        }
        for (p, &v) in self.params.iter().zip(values) {
            bindings.set(p.var, v);
        }
        Ok(())
    }

    /// One-shot field evaluation at a point `[x, (y,), t]`.
    pub fn eval_at(&self, values: &[f64], point: &[f64]) -> Result<f64, TrainError> {
        let mut b = Bindings::new();
        self.bind_params(&mut b, values)?;
        for (&v, &c) in self.input_vars.iter().zip(point) {
            b.set(v, c);
        }
        Ok(self.graph.eval(self.output, &b)?)
    }

    /// Samples the field on the Cartesian grid of `axes` (`[x, (y,), t]`).
    pub fn eval_grid(&self, values: &[f64], axes: &[Vec<f64>]) -> Result<SolutionGrid, TrainError> {
        let template = SolutionGrid::new(axes.to_vec(), vec![0.0; axes.iter().map(|a| a.len()).product()])?;
        let plan = self.graph.plan(&[self.output]);
        let mut base = Bindings::new();
        self.bind_params(&mut base, values)?;
        let points: Vec<Vec<f64>> = template.points().collect();
        let values = objective::parallel_eval_points(
            &self.graph,
            &plan,
            &base,
            &self.input_vars,
            &points,
        )?;
        Ok(SolutionGrid::new(axes.to_vec(), values)?)
    }
}

/// Builds a model of the requested kind with seeded parameter
/// initialization: Glorot-uniform network weights, zero biases, quantum
/// angles uniform in (−π/4, π/4).
pub fn build_model(
    problem: &HeatProblem,
    config: &ModelConfig,
    seed: u64,
) -> Result<Model, TrainError> {
    problem.validate()?;
    let mut rng = seeded_rng(seed);
    let mut graph = Graph::new();
    let input_names: &[&str] = if problem.dim == 1 {
        &["x", "t"]
    } else {
        &["x", "y", "t"]
    };
    let mut input_vars = Vec::new();
    let mut input_nodes = Vec::new();
    for name in input_names {
        let (node, vid) = graph.var_with_id(name);
        input_nodes.push(node);
        input_vars.push(vid);
    }

    let mut params: Vec<ParamVar> = Vec::new();
    let mut var_param_range = 0..0;
    let mut angle_nodes = Vec::new();

    let output = match config.kind {
        ModelKind::Pinn => build_mlp(&mut graph, &mut params, config, &input_nodes, &mut rng),
        quantum_kind => {
            let layout = config.layout();
            let mut theta_nodes = Vec::with_capacity(layout.var_param_count());
            for layer in 0..layout.n_layers {
                for qubit in 0..layout.n_qubits {
                    let name = format!("var_t{layer}_{qubit}");
                    let (node, var) = graph.var_with_id(&name);
                    theta_nodes.push(node);
                    params.push(ParamVar {
                        name,
                        var,
                        node,
                        init: crate::embeddings::small_angle(&mut rng),
                    });
                }
            }
            var_param_range = 0..params.len();

            let angles = match quantum_kind {
                ModelKind::FnnTeQpinn => {
                    let emb = FnnEmbedding::new(
                        &mut graph,
                        "emb",
                        input_nodes.len(),
                        &config.fnn_hidden,
                        layout.n_qubits,
                        &mut rng,
                    );
                    let angles = emb.forward(&mut graph, &input_nodes)?;
                    params.extend(emb.params().iter().cloned());
                    angles
                }
                ModelKind::QnnTeQpinn => {
                    let emb = QnnEmbedding::new(
                        &mut graph,
                        "emb",
                        config.aux_layout(),
                        domain_scaler(problem)?,
                        &mut rng,
                    );
                    let angles = emb.forward(&mut graph, &input_nodes)?;
                    params.extend(emb.params().iter().cloned());
                    angles
                }
                ModelKind::DirectQpinn => direct_forward(
                    &domain_scaler(problem)?,
                    &mut graph,
                    &input_nodes,
                    layout.n_qubits,
                )?,
                ModelKind::Pinn => unreachable!(),
            };
            angle_nodes = angles.clone();
            expectation_node(&mut graph, &layout, Observable::ZAll, &angles, &theta_nodes)?
        }
    };

    Ok(Model {
        graph,
        output,
        input_vars,
        params,
        kind: config.kind,
        problem: problem.clone(),
        config: config.clone(),
        var_param_range,
        angle_nodes,
    })
}

fn domain_scaler(problem: &HeatProblem) -> Result<AffineScaler, EmbeddingError> {
    let mut bounds = problem.space_bounds.clone();
    bounds.push((0.0, problem.t_max));
    AffineScaler::new(bounds)
}

/// Classical PINN baseline: tanh hidden layers, linear scalar output.
fn build_mlp(
    graph: &mut Graph,
    params: &mut Vec<ParamVar>,
    config: &ModelConfig,
    inputs: &[NodeId],
    rng: &mut ChaCha8Rng,
) -> NodeId {
    let mut sizes = vec![inputs.len()];
    sizes.extend_from_slice(&config.mlp_hidden);
    sizes.push(1);
    let mut activations: Vec<NodeId> = inputs.to_vec();
    for layer in 0..sizes.len() - 1 {
        let (fan_in, fan_out) = (sizes[layer], sizes[layer + 1]);
        let last = layer == sizes.len() - 2;
        let mut next = Vec::with_capacity(fan_out);
        let mut weight_nodes = vec![Vec::with_capacity(fan_in); fan_out];
        for (out, row) in weight_nodes.iter_mut().enumerate() {
            for inp in 0..fan_in {
                let name = format!("mlp_w{layer}_{out}_{inp}");
                let (node, var) = graph.var_with_id(&name);
                params.push(ParamVar {
                    name,
                    var,
                    node,
                    init: glorot_uniform(rng, fan_in, fan_out),
                });
                row.push(node);
            }
        }
        for (out, row) in weight_nodes.iter().enumerate() {
            let name = format!("mlp_b{layer}_{out}");
            let (bias, var) = graph.var_with_id(&name);
            params.push(ParamVar {
                name,
                var,
                node: bias,
                init: 0.0,
            });
            let mut z = bias;
            for (inp, &a) in activations.iter().enumerate() {
                let wa = graph.mul(row[inp], a);
                z = graph.add(z, wa);
            }
            next.push(if last { z } else { graph.tanh(z) });
        }
        activations = next;
    }
    activations[0]
}

/// Weighting of the boundary and initial loss terms.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_bc: f64,
    pub lambda_ic: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_bc: 1.0,
            lambda_ic: 1.0,
        }
    }
}

/// Per-class reduction of squared residuals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Sum,
    Mean,
}

/// Materializes the composite loss as a single graph node over the model's
/// parameter variables. Intended for small collocation sets (tests, the
/// graph-level optimizer API); the trainer evaluates the same quantity
/// pointwise instead.
pub fn total_loss(
    model: &mut Model,
    collocation: &CollocationSet,
    weights: &LossWeights,
    reduction: Reduction,
) -> Result<NodeId, TrainError> {
    if collocation.total_len() == 0 {
        return Err(TrainError::EmptyCollocation("all"));
    }
    let problem = model.problem.clone();
    let g = &mut model.graph;
    let r_pde = crate::pde::residual_pde(g, model.output, &model.input_vars, &problem)?;

    // empty classes contribute zero, so partial sets (IC-only fits) work
    let sum_for = |g: &mut Graph,
                       residual_at: &mut dyn FnMut(&mut Graph, &[f64]) -> Result<NodeId, TrainError>,
                       points: &[Vec<f64>]|
     -> Result<NodeId, TrainError> {
        let mut acc = g.constant(0.0);
        for point in points {
            let r = residual_at(g, point)?;
            let sq = g.mul(r, r);
            acc = g.add(acc, sq);
        }
        if reduction == Reduction::Mean && !points.is_empty() {
            let inv = g.constant(1.0 / points.len() as f64);
            acc = g.mul(acc, inv);
        }
        Ok(acc)
    };

    let input_vars = model.input_vars.clone();
    let l_pde = sum_for(
        g,
        &mut |g, point| {
            let map: std::collections::HashMap<VarId, NodeId> = input_vars
                .iter()
                .zip(point)
                .map(|(&v, &c)| (v, g.constant(c)))
                .collect();
            Ok(g.substitute(r_pde, &map))
        },
        &collocation.interior,
    )?;
    let output = model.output;
    let l_bc = sum_for(
        g,
        &mut |g, point| {
            Ok(crate::pde::residual_bc(g, output, &input_vars, &problem, point)?)
        },
        &collocation.boundary,
    )?;
    let l_ic = sum_for(
        g,
        &mut |g, point| {
            Ok(crate::pde::residual_ic(g, output, &input_vars, &problem, point)?)
        },
        &collocation.initial,
    )?;

    let wbc = g.constant(weights.lambda_bc);
    let wic = g.constant(weights.lambda_ic);
    let bc_term = g.mul(wbc, l_bc);
    let ic_term = g.mul(wic, l_ic);
    let partial = g.add(l_pde, bc_term);
    Ok(g.add(partial, ic_term))
}

/// Grid-norm discrepancies between a prediction and a reference field.
#[derive(Clone, Debug)]
pub struct Metrics {
    pub l2_rel: f64,
    pub linf_rel: f64,
    pub abs_error_grid: SolutionGrid,
    /// Final training loss, when produced by a training run.
    pub loss: Option<LossValue>,
}

/// Evaluates the model on the reference grid's axes and computes relative
/// L2/L∞ errors plus the absolute-error field.
pub fn evaluate(
    model: &Model,
    values: &[f64],
    reference: &SolutionGrid,
) -> Result<Metrics, TrainError> {
    let axes = reference.axes();
    for (d, axis) in axes.iter().enumerate() {
        let (lo, hi) = if d < model.problem.dim {
            model.problem.space_bounds[d]
        } else {
            (0.0, model.problem.t_max)
        };
        for &v in axis {
            if v < lo || v > hi {
                return Err(TrainError::AxisOutOfDomain { axis: d, value: v });
            }
        }
    }
    let prediction = model.eval_grid(values, axes)?;
    Ok(compare_grids(&prediction, reference))
}

/// Norm comparison of two grids on identical axes.
pub fn compare_grids(prediction: &SolutionGrid, reference: &SolutionGrid) -> Metrics {
    let diff: Vec<f64> = prediction
        .values()
        .iter()
        .zip(reference.values())
        .map(|(p, r)| (p - r).abs())
        .collect();
    let l2_num = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    let l2_den = reference.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let linf_num = diff.iter().fold(0.0f64, |a, &b| a.max(b));
    let linf_den = reference.values().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let l2_rel = if l2_den > 0.0 { l2_num / l2_den } else { l2_num };
    let linf_rel = if linf_den > 0.0 {
        linf_num / linf_den
    } else {
        linf_num
    };
    let abs_error_grid = SolutionGrid::new(reference.axes().to_vec(), diff)
        .expect("axes already validated");
    Metrics {
        l2_rel,
        linf_rel,
        abs_error_grid,
        loss: None,
    }
}

#[cfg(test)]
mod tests;
