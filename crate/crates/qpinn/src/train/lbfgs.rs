//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion over the last `history` curvature pairs, initial
//! Hessian scaling γ = sᵀy/yᵀy, and a bracket/zoom line search with cubic
//! interpolation enforcing
//!
//!   φ(α) ≤ φ(0) + c₁ α φ′(0)   and   |φ′(α)| ≤ c₂ |φ′(0)|.
//!
//! A failed search falls back to steepest descent with Armijo backtracking
//! before the run is flagged as stopped.

use std::collections::VecDeque;
use std::time::Instant;

use super::objective::{l2_norm, IterationRecord, LossValue, Objective, StopReason, TrainState};
use super::TrainError;
use crate::exprgraph::{Graph, NodeId, VarId};

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    /// Stop when the gradient norm drops below this.
    pub tolerance: f64,
    pub history: usize,
    pub c1: f64,
    pub c2: f64,
    /// Total bracketing + zoom evaluations per search.
    pub max_ls_steps: usize,
    pub initial_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iters: 150,
            tolerance: 1e-9,
            history: 10,
            c1: 1e-4,
            c2: 0.9,
            max_ls_steps: 25,
            initial_step: 1.0,
        }
    }
}

/// Accepted line-search point, kept for the Wolfe-condition audit.
#[derive(Clone, Copy, Debug)]
pub struct WolfeSample {
    pub alpha: f64,
    pub phi0: f64,
    pub dphi0: f64,
    pub phi: f64,
    pub dphi: f64,
}

impl WolfeSample {
    pub fn sufficient_decrease(&self, c1: f64) -> bool {
        self.phi <= self.phi0 + c1 * self.alpha * self.dphi0
    }

    pub fn curvature(&self, c2: f64) -> bool {
        self.dphi.abs() <= c2 * self.dphi0.abs()
    }
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn two_loop(grad: &[f64], history: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = vec![0.0; history.len()];
    for (i, pair) in history.iter().enumerate().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        alphas[i] = a;
        for (qj, yj) in q.iter_mut().zip(&pair.y) {
            *qj -= a * yj;
        }
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
    }
    for (i, pair) in history.iter().enumerate() {
        let b = pair.rho * dot(&pair.y, &q);
        for (qj, sj) in q.iter_mut().zip(&pair.s) {
            *qj += (alphas[i] - b) * sj;
        }
    }
    for qj in q.iter_mut() {
        *qj = -*qj;
    }
    q
}

struct Trial {
    alpha: f64,
    phi: f64,
    dphi: f64,
    grad: Vec<f64>,
    loss: LossValue,
}

/// Evaluates φ(α) = f(x + α d); a non-finite trial is reported as +∞ so the
/// search backs off instead of aborting.
fn try_step<O: Objective>(
    obj: &O,
    x: &[f64],
    d: &[f64],
    alpha: f64,
    evals: &mut usize,
) -> Trial {
    *evals += 1;
    let trial_x: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
    let mut grad = vec![0.0; x.len()];
    match obj.eval(&trial_x, &mut grad) {
        Ok(loss) if loss.total.is_finite() => {
            let dphi = dot(&grad, d);
            Trial {
                alpha,
                phi: loss.total,
                dphi,
                grad,
                loss,
            }
        }
        _ => Trial {
            alpha,
            phi: f64::INFINITY,
            dphi: f64::NAN,
            grad,
            loss: LossValue::default(),
        },
    }
}

/// Minimizer of a cubic through (x1, f1, g1) and (x2, f2, g2), clamped to
/// the interval; falls back to bisection when ill-conditioned.
fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64) -> f64 {
    let (lo, hi) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    if !(f1.is_finite() && f2.is_finite() && g1.is_finite() && g2.is_finite()) {
        return 0.5 * (lo + hi);
    }
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= 0.0 {
        let d2 = d2_sq.sqrt();
        let candidate = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if candidate.is_finite() {
            return candidate.clamp(lo, hi);
        }
    }
    0.5 * (lo + hi)
}

fn strong_wolfe<O: Objective>(
    obj: &O,
    x: &[f64],
    d: &[f64],
    phi0: f64,
    g0: &[f64],
    opts: &LbfgsOptions,
) -> Option<Trial> {
    let dphi0 = dot(g0, d);
    if dphi0 >= 0.0 {
        return None;
    }
    let armijo = |t: &Trial| t.phi <= phi0 + opts.c1 * t.alpha * dphi0;
    let curvature = |t: &Trial| t.dphi.abs() <= -opts.c2 * dphi0;

    let mut evals = 0usize;
    let mut prev = Trial {
        alpha: 0.0,
        phi: phi0,
        dphi: dphi0,
        grad: g0.to_vec(),
        loss: LossValue::default(),
    };
    let mut alpha = opts.initial_step;
    let mut bracket: Option<(Trial, Trial)> = None;
    while evals < opts.max_ls_steps {
        let trial = try_step(obj, x, d, alpha, &mut evals);
        if !armijo(&trial) || (evals > 1 && trial.phi >= prev.phi) {
            bracket = Some((prev, trial));
            break;
        }
        if curvature(&trial) {
            return Some(trial);
        }
        if trial.dphi >= 0.0 {
            bracket = Some((trial, prev));
            break;
        }
        alpha = trial.alpha * 2.0;
        prev = trial;
    }
    // zoom: lo satisfies Armijo with the lower φ; the Wolfe point lies
    // between lo and hi
    let (mut lo, mut hi) = bracket?;
    while evals < opts.max_ls_steps {
        let span = (hi.alpha - lo.alpha).abs();
        if span < 1e-18 * lo.alpha.abs().max(1.0) {
            return None;
        }
        let mut alpha_j = cubic_interpolate(lo.alpha, lo.phi, lo.dphi, hi.alpha, hi.phi, hi.dphi);
        // keep strictly inside the bracket
        let margin = 0.1 * span;
        let (blo, bhi) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        if !alpha_j.is_finite() || alpha_j <= blo + 1e-12 * span || alpha_j >= bhi - 1e-12 * span {
            alpha_j = 0.5 * (blo + bhi);
        } else if (alpha_j - blo).min(bhi - alpha_j) < margin * 1e-3 {
            alpha_j = alpha_j.clamp(blo + margin * 1e-3, bhi - margin * 1e-3);
        }
        let trial = try_step(obj, x, d, alpha_j, &mut evals);
        if !armijo(&trial) || trial.phi >= lo.phi {
            hi = trial;
        } else {
            if curvature(&trial) {
                return Some(trial);
            }
            if trial.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = std::mem::replace(&mut lo, trial);
            } else {
                lo = trial;
            }
        }
    }
    None
}

/// Armijo backtracking along a given descent direction, the fallback when
/// the Wolfe search cannot bracket a point.
fn backtrack<O: Objective>(
    obj: &O,
    x: &[f64],
    d: &[f64],
    phi0: f64,
    dphi0: f64,
    opts: &LbfgsOptions,
) -> Option<Trial> {
    let mut alpha = opts.initial_step;
    let mut evals = 0;
    for _ in 0..30 {
        let trial = try_step(obj, x, d, alpha, &mut evals);
        if trial.phi <= phi0 + opts.c1 * alpha * dphi0 {
            return Some(trial);
        }
        alpha *= 0.5;
    }
    None
}

/// Minimizes `obj` from `init`. One outer iteration (an "epoch") is one
/// quasi-Newton step on the full objective. `on_iter` sees every recorded
/// iteration, including iteration 0 (the seeded initial point).
pub fn lbfgs_minimize<O: Objective>(
    obj: &O,
    init: &[f64],
    opts: &LbfgsOptions,
    mut on_iter: impl FnMut(&IterationRecord),
) -> Result<TrainState, TrainError> {
    let n = init.len();
    let mut x = init.to_vec();
    let mut grad = vec![0.0; n];
    let start = Instant::now();
    let mut loss = obj.eval(&x, &mut grad)?;
    check_finite(loss.total, &grad, 0)?;

    let mut state = TrainState {
        params: x.clone(),
        iter: 0,
        loss_history: Vec::new(),
        records: Vec::new(),
        wall_ms: Vec::new(),
        stop: StopReason::MaxIters,
        final_loss: loss,
        grad_norm: l2_norm(&grad),
        wolfe: Vec::new(),
    };
    let mut record = |state: &mut TrainState, iter, loss: LossValue, grad_norm, step_len, ms| {
        let rec = IterationRecord {
            iter,
            loss_total: loss.total,
            loss_pde: loss.pde,
            loss_bc: loss.bc,
            loss_ic: loss.ic,
            grad_norm,
            step_len,
        };
        state.loss_history.push(loss.total);
        state.records.push(rec);
        state.wall_ms.push(ms);
        on_iter(&rec);
    };
    record(
        &mut state,
        0,
        loss,
        l2_norm(&grad),
        0.0,
        start.elapsed().as_secs_f64() * 1e3,
    );

    let mut history: VecDeque<Pair> = VecDeque::with_capacity(opts.history);
    for iter in 1..=opts.max_iters {
        let iter_start = Instant::now();
        let grad_norm = l2_norm(&grad);
        if grad_norm <= opts.tolerance {
            state.stop = StopReason::GradTolerance;
            break;
        }

        let mut d = two_loop(&grad, &history);
        if dot(&d, &grad) >= 0.0 {
            history.clear();
            d = grad.iter().map(|v| -v).collect();
        }

        let dphi0 = dot(&grad, &d);
        let (accepted, dir, via_wolfe) = match strong_wolfe(obj, &x, &d, loss.total, &grad, opts) {
            Some(t) => (t, d, true),
            None => {
                let steepest: Vec<f64> = grad.iter().map(|v| -v).collect();
                let dphi_sd = -dot(&grad, &grad);
                match backtrack(obj, &x, &steepest, loss.total, dphi_sd, opts) {
                    Some(t) => {
                        history.clear();
                        (t, steepest, false)
                    }
                    None => {
                        state.stop = StopReason::LineSearchFailed;
                        break;
                    }
                }
            }
        };
        let s: Vec<f64> = dir.iter().map(|di| accepted.alpha * di).collect();
        let new_x: Vec<f64> = x.iter().zip(&s).map(|(xi, si)| xi + si).collect();
        let step_len = l2_norm(&s);
        let y: Vec<f64> = accepted.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * l2_norm(&s) * l2_norm(&y) {
            if history.len() == opts.history {
                history.pop_front();
            }
            history.push_back(Pair {
                rho: 1.0 / sy,
                s,
                y,
            });
        }
        if via_wolfe {
            state.wolfe.push(WolfeSample {
                alpha: accepted.alpha,
                phi0: loss.total,
                dphi0,
                phi: accepted.phi,
                dphi: accepted.dphi,
            });
        }
        x = new_x;
        grad = accepted.grad;
        loss = accepted.loss;
        check_finite(loss.total, &grad, iter)?;
        state.iter = iter;
        record(
            &mut state,
            iter,
            loss,
            l2_norm(&grad),
            step_len,
            iter_start.elapsed().as_secs_f64() * 1e3,
        );
    }

    state.params = x;
    state.final_loss = loss;
    state.grad_norm = l2_norm(&grad);
    Ok(state)
}

fn check_finite(loss: f64, grad: &[f64], iter: usize) -> Result<(), TrainError> {
    if !loss.is_finite() {
        return Err(TrainError::NonFinite {
            what: format!("loss {loss}"),
            iter,
        });
    }
    if let Some(bad) = grad.iter().find(|v| !v.is_finite()) {
        return Err(TrainError::NonFinite {
            what: format!("gradient component {bad}"),
            iter,
        });
    }
    Ok(())
}

/// Graph-level entry point: minimizes a scalar loss node with respect to
/// the given parameter variables.
pub fn lbfgs_minimize_graph(
    graph: &mut Graph,
    loss: NodeId,
    param_vars: &[VarId],
    init: &[f64],
    opts: &LbfgsOptions,
) -> Result<TrainState, TrainError> {
    let grads = graph.gradient(loss, param_vars);
    let obj = super::objective::GraphObjective::new(graph, loss, &grads, param_vars);
    lbfgs_minimize(&obj, init, opts, |_| {})
}
