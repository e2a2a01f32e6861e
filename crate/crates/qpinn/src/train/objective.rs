//! Objective functions for the optimizers.
//!
//! [`GraphObjective`] minimizes an arbitrary scalar graph node (used by the
//! graph-level optimizer API and the optimizer test oracles).
//! [`CollocationObjective`] evaluates the physics-informed loss from the
//! point-parametric residual forms: the residual and its parameter partials
//! are one fixed graph evaluated per collocation point with per-point
//! bindings. Points are processed in fixed-size chunks, chunks in parallel,
//! and partial sums combined by pairwise-tree reduction in chunk order, so
//! the result is bit-identical no matter how many threads run.

use rayon::prelude::*;

use crate::exprgraph::{Bindings, EvalPlan, EvalScratch, Graph, NodeId, VarId};
use crate::pde::{residual_forms, CollocationSet, HeatProblem};

use super::{LossWeights, Model, Reduction, TrainError};

/// Points per work unit; fixed so the reduction shape does not depend on
/// the thread count.
const CHUNK: usize = 64;

/// Composite loss value with its components.
#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct LossValue {
    pub total: f64,
    pub pde: f64,
    pub bc: f64,
    pub ic: f64,
}

/// Anything the optimizers can minimize.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    /// Loss value and gradient at `params`; `grad` has length `dim()`.
    fn eval(&self, params: &[f64], grad: &mut [f64]) -> Result<LossValue, TrainError>;
}

/// Objective backed by a single graph node and its gradient nodes.
pub struct GraphObjective<'g> {
    graph: &'g Graph,
    plan: EvalPlan,
    param_vars: Vec<VarId>,
}

impl<'g> GraphObjective<'g> {
    /// `grad_nodes` must be `graph.gradient(loss, param_vars)`.
    pub fn new(
        graph: &'g Graph,
        loss: NodeId,
        grad_nodes: &[NodeId],
        param_vars: &[VarId],
    ) -> Self {
        let mut roots = Vec::with_capacity(1 + grad_nodes.len());
        roots.push(loss);
        roots.extend_from_slice(grad_nodes);
        GraphObjective {
            plan: graph.plan(&roots),
            graph,
            param_vars: param_vars.to_vec(),
        }
    }
}

impl Objective for GraphObjective<'_> {
    fn dim(&self) -> usize {
        self.param_vars.len()
    }

    fn eval(&self, params: &[f64], grad: &mut [f64]) -> Result<LossValue, TrainError> {
        let mut bindings = Bindings::new();
        for (&v, &x) in self.param_vars.iter().zip(params) {
            bindings.set(v, x);
        }
        let mut out = vec![0.0; 1 + grad.len()];
        let mut scratch = EvalScratch::new();
        self.graph
            .eval_plan(&self.plan, &bindings, &mut scratch, &mut out)?;
        grad.copy_from_slice(&out[1..]);
        Ok(LossValue {
            total: out[0],
            pde: out[0],
            bc: 0.0,
            ic: 0.0,
        })
    }
}

/// One collocation class: the residual/partials plan plus the point data.
struct ClassBlock {
    plan: EvalPlan,
    /// Row-major point coordinates, `width` values per point.
    coords: Vec<f64>,
    width: usize,
    n_points: usize,
    /// Per-point residual target data (boundary/initial value), if any.
    data: Option<(VarId, Vec<f64>)>,
}

/// Frozen evaluation state for the physics-informed loss. Building it
/// mutates the model graph (residual forms and their parameter partials);
/// afterwards the graph can be shared immutably across threads.
pub struct LossPrep {
    classes: [ClassBlock; 3],
    input_vars: Vec<VarId>,
    param_vars: Vec<VarId>,
    pub weights: LossWeights,
    pub reduction: Reduction,
}

impl LossPrep {
    pub fn build(
        model: &mut Model,
        collocation: &CollocationSet,
        weights: LossWeights,
        reduction: Reduction,
    ) -> Result<Self, TrainError> {
        if collocation.total_len() == 0 {
            return Err(TrainError::EmptyCollocation("all"));
        }
        let problem: HeatProblem = model.problem.clone();
        let param_vars = model.param_vars();
        let forms = residual_forms(
            &mut model.graph,
            model.output,
            &model.input_vars,
            &problem,
        )?;

        let plan_for = |g: &mut Graph, residual: NodeId| {
            let grads = g.gradient(residual, &param_vars);
            let mut roots = Vec::with_capacity(1 + grads.len());
            roots.push(residual);
            roots.extend_from_slice(&grads);
            g.plan(&roots)
        };
        let interior_plan = plan_for(&mut model.graph, forms.interior);
        let boundary_plan = plan_for(&mut model.graph, forms.boundary);
        let initial_plan = plan_for(&mut model.graph, forms.initial);

        let width = problem.dim + 1;
        let flat = |points: &[Vec<f64>]| -> Vec<f64> {
            points.iter().flat_map(|p| p.iter().copied()).collect()
        };
        let bc_values: Vec<f64> = collocation
            .boundary
            .iter()
            .map(|p| problem.bc_value(&p[..problem.dim], p[problem.dim]))
            .collect();
        let ic_values: Vec<f64> = collocation
            .initial
            .iter()
            .map(|p| problem.ic_value(&p[..problem.dim]))
            .collect();

        Ok(LossPrep {
            classes: [
                ClassBlock {
                    plan: interior_plan,
                    coords: flat(&collocation.interior),
                    width,
                    n_points: collocation.interior.len(),
                    data: None,
                },
                ClassBlock {
                    plan: boundary_plan,
                    coords: flat(&collocation.boundary),
                    width,
                    n_points: collocation.boundary.len(),
                    data: Some((forms.bc_data, bc_values)),
                },
                ClassBlock {
                    plan: initial_plan,
                    coords: flat(&collocation.initial),
                    width,
                    n_points: collocation.initial.len(),
                    data: Some((forms.ic_data, ic_values)),
                },
            ],
            input_vars: model.input_vars.clone(),
            param_vars,
            weights,
            reduction,
        })
    }
}

/// The trainer's objective: borrows the frozen graph plus [`LossPrep`].
pub struct CollocationObjective<'a> {
    pub graph: &'a Graph,
    pub prep: &'a LossPrep,
}

struct ChunkOut {
    sq_sum: f64,
    grad: Vec<f64>,
}

impl ChunkOut {
    fn absorb(&mut self, other: ChunkOut) {
        self.sq_sum += other.sq_sum;
        for (a, b) in self.grad.iter_mut().zip(other.grad) {
            *a += b;
        }
    }
}

/// Pairwise-tree reduction in index order; associativity order is fixed, so
/// the result does not depend on how chunks were scheduled.
fn tree_reduce(mut items: Vec<ChunkOut>) -> Option<ChunkOut> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.absorb(b);
            }
            next.push(a);
        }
        items = next;
    }
    items.pop()
}

impl LossPrep {
    /// Residual nodes `[interior, boundary, initial]`, e.g. for DOT dumps.
    pub fn residual_roots(&self) -> [NodeId; 3] {
        [
            self.classes[0].plan.roots()[0],
            self.classes[1].plan.roots()[0],
            self.classes[2].plan.roots()[0],
        ]
    }
}

impl CollocationObjective<'_> {
    fn eval_class(
        &self,
        class: &ClassBlock,
        base: &Bindings,
    ) -> Result<ChunkOut, TrainError> {
        let n_params = self.prep.param_vars.len();
        if class.n_points == 0 {
            return Ok(ChunkOut {
                sq_sum: 0.0,
                grad: vec![0.0; n_params],
            });
        }
        let n_chunks = class.n_points.div_ceil(CHUNK);
        let results: Result<Vec<ChunkOut>, TrainError> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let start = chunk * CHUNK;
                let end = (start + CHUNK).min(class.n_points);
                let mut bindings = base.clone();
                let mut scratch = EvalScratch::new();
                let mut out = vec![0.0; 1 + n_params];
                let mut acc = ChunkOut {
                    sq_sum: 0.0,
                    grad: vec![0.0; n_params],
                };
                for p in start..end {
                    let coords = &class.coords[p * class.width..(p + 1) * class.width];
                    for (&v, &c) in self.prep.input_vars.iter().zip(coords) {
                        bindings.set(v, c);
                    }
                    if let Some((var, values)) = &class.data {
                        bindings.set(*var, values[p]);
                    }
                    self.graph
                        .eval_plan(&class.plan, &bindings, &mut scratch, &mut out)?;
                    let r = out[0];
                    acc.sq_sum += r * r;
                    // d(r²)/dθ = 2 r ∂r/∂θ
                    for (g, &dr) in acc.grad.iter_mut().zip(&out[1..]) {
                        *g += 2.0 * r * dr;
                    }
                }
                Ok(acc)
            })
            .collect();
        Ok(tree_reduce(results?).expect("classes are non-empty"))
    }

    /// Loss components at `params` without the gradient (used for logging
    /// the initial state).
    pub fn loss_only(&self, params: &[f64]) -> Result<LossValue, TrainError> {
        let mut grad = vec![0.0; self.dim()];
        self.eval(params, &mut grad)
    }
}

impl Objective for CollocationObjective<'_> {
    fn dim(&self) -> usize {
        self.prep.param_vars.len()
    }

    fn eval(&self, params: &[f64], grad: &mut [f64]) -> Result<LossValue, TrainError> {
        let mut base = Bindings::new();
        for (&v, &x) in self.prep.param_vars.iter().zip(params) {
            base.set(v, x);
        }
        let mut components = [0.0f64; 3];
        let class_weights = [1.0, self.prep.weights.lambda_bc, self.prep.weights.lambda_ic];
        grad.fill(0.0);
        for (i, class) in self.prep.classes.iter().enumerate() {
            let mut out = self.eval_class(class, &base)?;
            let scale = match self.prep.reduction {
                Reduction::Sum => 1.0,
                Reduction::Mean if class.n_points > 0 => 1.0 / class.n_points as f64,
                Reduction::Mean => 0.0,
            };
            components[i] = out.sq_sum * scale;
            let w = class_weights[i] * scale;
            for (g, c) in grad.iter_mut().zip(out.grad.drain(..)) {
                *g += w * c;
            }
        }
        let [pde, bc, ic] = components;
        Ok(LossValue {
            total: pde + self.prep.weights.lambda_bc * bc + self.prep.weights.lambda_ic * ic,
            pde,
            bc,
            ic,
        })
    }
}

/// Evaluates one plan at many points in parallel with the same fixed
/// chunking; used for grid inference.
pub(crate) fn parallel_eval_points(
    graph: &Graph,
    plan: &EvalPlan,
    base: &Bindings,
    input_vars: &[VarId],
    points: &[Vec<f64>],
) -> Result<Vec<f64>, TrainError> {
    let chunks: Result<Vec<Vec<f64>>, TrainError> = points
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut bindings = base.clone();
            let mut scratch = EvalScratch::new();
            let mut out = [0.0];
            let mut vals = Vec::with_capacity(chunk.len());
            for point in chunk {
                for (&v, &c) in input_vars.iter().zip(point.iter()) {
                    bindings.set(v, c);
                }
                graph.eval_plan(plan, &bindings, &mut scratch, &mut out)?;
                vals.push(out[0]);
            }
            Ok(vals)
        })
        .collect();
    Ok(chunks?.into_iter().flatten().collect())
}

/// Why an optimizer run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIters,
    GradTolerance,
    LineSearchFailed,
}

/// One optimizer iteration, as logged to metrics.jsonl. Wall-clock timing is
/// tracked separately so the metrics stream stays byte-reproducible.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub loss_total: f64,
    pub loss_pde: f64,
    pub loss_bc: f64,
    pub loss_ic: f64,
    pub grad_norm: f64,
    pub step_len: f64,
}

/// Optimizer output: final parameters plus the append-only history.
pub struct TrainState {
    pub params: Vec<f64>,
    pub iter: usize,
    pub loss_history: Vec<f64>,
    pub records: Vec<IterationRecord>,
    /// Wall-clock milliseconds per recorded iteration.
    pub wall_ms: Vec<f64>,
    pub stop: StopReason,
    pub final_loss: LossValue,
    pub grad_norm: f64,
    /// Accepted line-search samples for the strong-Wolfe audit.
    pub wolfe: Vec<super::WolfeSample>,
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
