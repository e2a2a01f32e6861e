//! Adam with bias-corrected moment estimates; the robust first-order
//! fallback to the quasi-Newton path.

use std::time::Instant;

use super::objective::{l2_norm, IterationRecord, Objective, StopReason, TrainState};
use super::TrainError;

#[derive(Clone, Debug)]
pub struct AdamOptions {
    pub max_iters: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub tolerance: f64,
}

impl Default for AdamOptions {
    fn default() -> Self {
        AdamOptions {
            max_iters: 1000,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            tolerance: 0.0,
        }
    }
}

pub fn adam_minimize<O: Objective>(
    obj: &O,
    init: &[f64],
    opts: &AdamOptions,
    mut on_iter: impl FnMut(&IterationRecord),
) -> Result<TrainState, TrainError> {
    let n = init.len();
    let mut x = init.to_vec();
    let mut grad = vec![0.0; n];
    let start = Instant::now();
    let mut loss = obj.eval(&x, &mut grad)?;

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
    let mut record = |state: &mut TrainState, iter, loss: super::LossValue, grad_norm, step_len, ms| {
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

    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    for iter in 1..=opts.max_iters {
        let iter_start = Instant::now();
        let grad_norm = l2_norm(&grad);
        if grad_norm <= opts.tolerance {
            state.stop = StopReason::GradTolerance;
            break;
        }
        let b1t = 1.0 - opts.beta1.powi(iter as i32);
        let b2t = 1.0 - opts.beta2.powi(iter as i32);
        let mut step_sq = 0.0;
        for i in 0..n {
            m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * grad[i];
            v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * grad[i] * grad[i];
            let m_hat = m[i] / b1t;
            let v_hat = v[i] / b2t;
            let delta = opts.lr * m_hat / (v_hat.sqrt() + opts.eps);
            x[i] -= delta;
            step_sq += delta * delta;
        }
        loss = obj.eval(&x, &mut grad)?;
        if !loss.total.is_finite() {
            return Err(TrainError::NonFinite {
                what: format!("loss {}", loss.total),
                iter,
            });
        }
        state.iter = iter;
        record(
            &mut state,
            iter,
            loss,
            l2_norm(&grad),
            step_sq.sqrt(),
            iter_start.elapsed().as_secs_f64() * 1e3,
        );
    }

    state.params = x;
    state.final_loss = loss;
    state.grad_norm = l2_norm(&grad);
    Ok(state)
}
