//! Short training runs of all three model kinds on the same 1D problem,
//! tabulated side by side. Uses few epochs; the acceptance suite and the
//! CLI run the full-length version.

use qpinn::oracle::analytic_solution;
use qpinn::pde::{linspace, sample_collocation};
use qpinn::train::{
    build_model, evaluate, lbfgs_minimize, CollocationObjective, LbfgsOptions, LossPrep,
    LossWeights, ModelConfig, ModelKind, Reduction,
};
use qpinn::{HeatProblem, SolutionGrid};

fn main() {
    let problem = HeatProblem::default_1d();
    let collocation = sample_collocation(&problem, 10, 10).unwrap();
    let axes = vec![linspace(-1.0, 1.0, 31), vec![0.5, 1.0]];
    let n: usize = axes.iter().map(|a| a.len()).product();
    let template = SolutionGrid::new(axes.clone(), vec![0.0; n]).unwrap();
    let ref_values: Vec<f64> = template
        .points()
        .map(|p| analytic_solution(&problem, &p).unwrap())
        .collect();
    let reference = SolutionGrid::new(axes, ref_values).unwrap();

    println!(
        "{:<14} {:>8} {:>12} {:>12} {:>12}",
        "kind", "params", "final loss", "l2_rel", "linf_rel"
    );
    for kind in [ModelKind::Pinn, ModelKind::FnnTeQpinn, ModelKind::QnnTeQpinn] {
        let config = ModelConfig {
            n_qubits: 3,
            n_layers: 2,
            mlp_hidden: vec![20, 20],
            ..ModelConfig::new(kind)
        };
        let mut model = build_model(&problem, &config, 7).unwrap();
        let prep = LossPrep::build(
            &mut model,
            &collocation,
            LossWeights::default(),
            Reduction::Mean,
        )
        .unwrap();
        let objective = CollocationObjective {
            graph: &model.graph,
            prep: &prep,
        };
        let opts = LbfgsOptions {
            max_iters: 60,
            tolerance: 1e-10,
            ..Default::default()
        };
        let state = lbfgs_minimize(&objective, &model.init_values(), &opts, |_| {}).unwrap();
        let metrics = evaluate(&model, &state.params, &reference).unwrap();
        println!(
            "{:<14} {:>8} {:>12.3e} {:>12.3e} {:>12.3e}",
            kind.as_str(),
            model.param_count(),
            state.final_loss.total,
            metrics.l2_rel,
            metrics.linf_rel
        );
    }
    println!("\n(60 epochs each; rankings at this budget vary with the seed)");
}
