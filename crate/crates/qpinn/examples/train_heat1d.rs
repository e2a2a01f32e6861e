//! Train the hybrid quantum model on the 1D heat equation end to end,
//! in-process: build the model, assemble the physics-informed loss over a
//! collocation grid, run L-BFGS, and compare against the closed form.
//!
//! Kept small (4 qubits, 100 epochs, coarse grid) so it finishes in about a
//! minute;
//! the `qpinn train` binary runs the full-size configuration.

use qpinn::oracle::analytic_solution;
use qpinn::pde::{linspace, sample_collocation};
use qpinn::qmodel::Entangler;
use qpinn::train::{
    build_model, evaluate, lbfgs_minimize, CollocationObjective, LbfgsOptions, LossPrep,
    LossWeights, ModelConfig, ModelKind, Reduction,
};
use qpinn::{HeatProblem, SolutionGrid};

fn main() {
    let problem = HeatProblem::default_1d();
    let config = ModelConfig {
        n_qubits: 4,
        n_layers: 5,
        entangler: Entangler::Ring,
        ..ModelConfig::new(ModelKind::FnnTeQpinn)
    };
    let mut model = build_model(&problem, &config, 7).unwrap();
    println!(
        "model: {} with {} parameters",
        model.kind.as_str(),
        model.param_count()
    );

    let collocation = sample_collocation(&problem, 14, 14).unwrap();
    println!(
        "collocation: {} interior, {} boundary, {} initial",
        collocation.interior.len(),
        collocation.boundary.len(),
        collocation.initial.len()
    );

    let prep = LossPrep::build(&mut model, &collocation, LossWeights::default(), Reduction::Mean)
        .unwrap();
    let objective = CollocationObjective {
        graph: &model.graph,
        prep: &prep,
    };
    let opts = LbfgsOptions {
        max_iters: 100,
        tolerance: 1e-10,
        ..Default::default()
    };
    let state = lbfgs_minimize(&objective, &model.init_values(), &opts, |rec| {
        if rec.iter % 20 == 0 {
            println!(
                "  epoch {:3}  loss {:.3e}  (pde {:.1e}, bc {:.1e}, ic {:.1e})  |g| {:.2e}",
                rec.iter, rec.loss_total, rec.loss_pde, rec.loss_bc, rec.loss_ic, rec.grad_norm
            );
        }
    })
    .unwrap();
    println!("stopped after {} epochs: {:?}", state.iter, state.stop);

    // closed-form reference on an evaluation grid
    let axes = vec![linspace(-1.0, 1.0, 41), vec![0.25, 0.5, 1.0]];
    let n: usize = axes.iter().map(|a| a.len()).product();
    let template = SolutionGrid::new(axes.clone(), vec![0.0; n]).unwrap();
    let values: Vec<f64> = template
        .points()
        .map(|p| analytic_solution(&problem, &p).unwrap())
        .collect();
    let reference = SolutionGrid::new(axes, values).unwrap();
    let metrics = evaluate(&model, &state.params, &reference).unwrap();
    println!(
        "against the closed form: L2 rel = {:.3e}, L∞ rel = {:.3e}",
        metrics.l2_rel, metrics.linf_rel
    );
}
