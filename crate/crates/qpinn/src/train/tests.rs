use std::f64::consts::PI;

use super::*;
use crate::exprgraph::Bindings;
use crate::pde::{linspace, sample_collocation};

fn analytic_model_1d() -> Model {
    let problem = HeatProblem::default_1d();
    let mut graph = Graph::new();
    let (x, xv) = graph.var_with_id("x");
    let (t, tv) = graph.var_with_id("t");
    let pi = graph.constant(PI);
    let px = graph.mul(pi, x);
    let s = graph.sin(px);
    let ns = graph.neg(s);
    let rate = graph.constant(-problem.kappa * PI * PI);
    let rt = graph.mul(rate, t);
    let decay = graph.exp(rt);
    let output = graph.mul(ns, decay);
    Model {
        graph,
        output,
        input_vars: vec![xv, tv],
        params: Vec::new(),
        kind: ModelKind::Pinn,
        problem,
        config: ModelConfig::new(ModelKind::Pinn),
        var_param_range: 0..0,
        angle_nodes: Vec::new(),
    }
}

fn micro_config(kind: ModelKind) -> ModelConfig {
    ModelConfig {
        kind,
        n_qubits: 2,
        n_layers: 1,
        entangler: Entangler::Ring,
        fnn_hidden: vec![4],
        aux_layers: None,
        mlp_hidden: vec![8, 8],
    }
}

#[test]
fn model_kind_strings_round_trip() {
    for kind in [
        ModelKind::Pinn,
        ModelKind::FnnTeQpinn,
        ModelKind::QnnTeQpinn,
        ModelKind::DirectQpinn,
    ] {
        assert_eq!(ModelKind::parse(kind.as_str()).unwrap(), kind);
    }
    assert!(ModelKind::parse("transformer").is_err());
}

#[test]
fn pinn_with_zero_weights_is_identically_zero() {
    let problem = HeatProblem::default_1d();
    let model = build_model(&problem, &micro_config(ModelKind::Pinn), 3).unwrap();
    let zeros = vec![0.0; model.param_count()];
    for point in [[0.0, 0.0], [0.5, 0.3], [-1.0, 1.0]] {
        assert_eq!(model.eval_at(&zeros, &point).unwrap(), 0.0);
    }
}

#[test]
fn fnn_te_with_zero_parameters_outputs_one() {
    let problem = HeatProblem::default_1d();
    let model = build_model(&problem, &micro_config(ModelKind::FnnTeQpinn), 3).unwrap();
    let zeros = vec![0.0; model.param_count()];
    for point in [[0.2, 0.1], [-0.7, 0.9]] {
        assert!((model.eval_at(&zeros, &point).unwrap() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn quantum_models_share_the_downstream_circuit() {
    // With Γ held fixed numerically, u must equal the bare circuit
    // expectation no matter which embedding produced Γ.
    let problem = HeatProblem::default_1d();
    let point = [0.31, 0.62];
    for kind in [ModelKind::FnnTeQpinn, ModelKind::QnnTeQpinn] {
        let model = build_model(&problem, &micro_config(kind), 11).unwrap();
        let values = model.init_values();
        let mut b = Bindings::new();
        model.bind_params(&mut b, &values).unwrap();
        for (&v, &c) in model.input_vars.iter().zip(&point) {
            b.set(v, c);
        }
        let gamma: Vec<f64> = model
            .angle_nodes
            .iter()
            .map(|&n| model.graph.eval(n, &b).unwrap())
            .collect();
        let theta = &values[model.var_param_range.clone()];
        let layout = model.config.layout();
        let direct = crate::qmodel::expectation(
            &layout,
            &crate::qmodel::AngleVector(gamma),
            &crate::qmodel::VarParams::from_flat(&layout, theta.to_vec()).unwrap(),
        )
        .unwrap();
        let through_model = model.eval_at(&values, &point).unwrap();
        assert!(
            (direct - through_model).abs() < 1e-13,
            "{kind:?}: {direct} vs {through_model}"
        );
    }
}

#[test]
fn total_loss_vanishes_for_the_analytic_solution() {
    let mut model = analytic_model_1d();
    let colloc = sample_collocation(&model.problem, 10, 10).unwrap();
    let loss = total_loss(&mut model, &colloc, &LossWeights::default(), Reduction::Sum).unwrap();
    let v = model.graph.eval(loss, &Bindings::new()).unwrap();
    assert!(v < 1e-16, "loss {v}");
}

#[test]
fn ic_only_loss_matches_brute_force_sum() {
    // zero model against u₀(x) = −sin(πx) on the uniform 50-point grid
    let problem = HeatProblem::default_1d();
    let mut graph = Graph::new();
    let (_, xv) = graph.var_with_id("x");
    let (_, tv) = graph.var_with_id("t");
    let output = graph.constant(0.0);
    let mut model = Model {
        graph,
        output,
        input_vars: vec![xv, tv],
        params: Vec::new(),
        kind: ModelKind::Pinn,
        problem: problem.clone(),
        config: ModelConfig::new(ModelKind::Pinn),
        var_param_range: 0..0,
        angle_nodes: Vec::new(),
    };
    let xs = linspace(-1.0, 1.0, 50);
    let colloc = crate::pde::CollocationSet {
        interior: Vec::new(),
        boundary: Vec::new(),
        initial: xs.iter().map(|&x| vec![x, 0.0]).collect(),
    };
    let loss = total_loss(&mut model, &colloc, &LossWeights::default(), Reduction::Sum).unwrap();
    let got = model.graph.eval(loss, &Bindings::new()).unwrap();
    let brute: f64 = xs.iter().map(|&x| (PI * x).sin().powi(2)).sum();
    assert!((got - brute).abs() < 1e-12);
    assert!((got - 24.5).abs() < 1e-9, "grid sum of sin² should be 24.5, got {got}");
}

#[test]
fn zero_weights_reduce_loss_to_pde_term() {
    let problem = HeatProblem::default_1d();
    let mut model = build_model(&problem, &micro_config(ModelKind::FnnTeQpinn), 5).unwrap();
    let colloc = sample_collocation(&problem, 4, 3).unwrap();
    let weights0 = LossWeights {
        lambda_bc: 0.0,
        lambda_ic: 0.0,
    };
    let prep = LossPrep::build(&mut model, &colloc, weights0, Reduction::Sum).unwrap();
    let obj = CollocationObjective {
        graph: &model.graph,
        prep: &prep,
    };
    let mut grad = vec![0.0; obj.dim()];
    let loss = obj.eval(&model.init_values(), &mut grad).unwrap();
    assert_eq!(loss.total, loss.pde);
    assert!(loss.bc > 0.0 || loss.ic > 0.0, "components still reported");
}

#[test]
fn materialized_and_pointwise_losses_agree() {
    let problem = HeatProblem::default_1d();
    let mut model = build_model(&problem, &micro_config(ModelKind::FnnTeQpinn), 7).unwrap();
    let colloc = sample_collocation(&problem, 4, 3).unwrap();
    let weights = LossWeights {
        lambda_bc: 0.7,
        lambda_ic: 1.3,
    };
    let values = model.init_values();
    let param_vars = model.param_vars();

    let prep = LossPrep::build(&mut model, &colloc, weights, Reduction::Sum).unwrap();
    let obj = CollocationObjective {
        graph: &model.graph,
        prep: &prep,
    };
    let mut grad_pw = vec![0.0; obj.dim()];
    let loss_pw = obj.eval(&values, &mut grad_pw).unwrap();

    let loss_node = total_loss(&mut model, &colloc, &weights, Reduction::Sum).unwrap();
    let grad_nodes = model.graph.gradient(loss_node, &param_vars);
    let mut b = Bindings::new();
    model.bind_params(&mut b, &values).unwrap();
    let loss_graph = model.graph.eval(loss_node, &b).unwrap();
    assert!(
        (loss_pw.total - loss_graph).abs() <= 1e-10 * loss_graph.abs().max(1.0),
        "{} vs {}",
        loss_pw.total,
        loss_graph
    );
    for (i, &gn) in grad_nodes.iter().enumerate() {
        let gg = model.graph.eval(gn, &b).unwrap();
        assert!(
            (grad_pw[i] - gg).abs() <= 1e-9 * gg.abs().max(1.0),
            "component {i}: {} vs {}",
            grad_pw[i],
            gg
        );
    }
}

#[test]
fn loss_gradients_match_finite_differences_for_all_kinds() {
    let problem = HeatProblem::default_1d();
    for kind in [ModelKind::Pinn, ModelKind::FnnTeQpinn, ModelKind::QnnTeQpinn] {
        let mut model = build_model(&problem, &micro_config(kind), 13).unwrap();
        let colloc = sample_collocation(&problem, 3, 2).unwrap();
        let prep =
            LossPrep::build(&mut model, &colloc, LossWeights::default(), Reduction::Sum).unwrap();
        let obj = CollocationObjective {
            graph: &model.graph,
            prep: &prep,
        };
        let values = model.init_values();
        let mut grad = vec![0.0; obj.dim()];
        let loss = obj.eval(&values, &mut grad).unwrap();
        let h = 1e-5;
        // central differences carry cancellation noise ~ε·|L|/h; give the
        // relative check an absolute floor at that scale
        let floor = 1e-9 * loss.total.abs().max(1.0);
        let mut scratch_grad = vec![0.0; obj.dim()];
        for i in (0..values.len()).step_by(values.len().div_ceil(8).max(1)) {
            let mut plus = values.clone();
            plus[i] += h;
            let mut minus = values.clone();
            minus[i] -= h;
            let fp = obj.eval(&plus, &mut scratch_grad).unwrap().total;
            let fm = obj.eval(&minus, &mut scratch_grad).unwrap().total;
            let fd = (fp - fm) / (2.0 * h);
            let tol = (1e-4 * fd.abs()).max(floor);
            assert!(
                (grad[i] - fd).abs() <= tol,
                "{kind:?} param {i}: grad {} vs fd {fd}",
                grad[i]
            );
        }
    }
}

#[test]
fn lbfgs_solves_rosenbrock_with_wolfe_steps() {
    let mut g = Graph::new();
    let (a, av) = g.var_with_id("a");
    let (b, bv) = g.var_with_id("b");
    let one = g.constant(1.0);
    let d1 = g.sub(one, a);
    let t1 = g.mul(d1, d1);
    let a2 = g.mul(a, a);
    let d2 = g.sub(b, a2);
    let d2sq = g.mul(d2, d2);
    let hundred = g.constant(100.0);
    let t2 = g.mul(hundred, d2sq);
    let f = g.add(t1, t2);
    let opts = LbfgsOptions {
        max_iters: 100,
        tolerance: 1e-12,
        ..Default::default()
    };
    let state = lbfgs_minimize_graph(&mut g, f, &[av, bv], &[-1.2, 1.0], &opts).unwrap();
    assert!(
        state.final_loss.total < 1e-8,
        "Rosenbrock final loss {} after {} iters",
        state.final_loss.total,
        state.iter
    );
    assert!((state.params[0] - 1.0).abs() < 1e-3);
    assert!((state.params[1] - 1.0).abs() < 1e-3);
    assert!(!state.wolfe.is_empty());
    for w in &state.wolfe {
        assert!(w.sufficient_decrease(opts.c1), "sufficient decrease at α={}", w.alpha);
        assert!(w.curvature(opts.c2), "curvature at α={}", w.alpha);
    }
    // accepted steps never increase the loss
    for pair in state.loss_history.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-15);
    }
}

#[test]
fn lbfgs_solves_convex_quadratic_immediately() {
    let mut g = Graph::new();
    let targets = [1.0, -2.0, 0.5];
    let mut f = g.constant(0.0);
    let mut vars = Vec::new();
    for (i, &t) in targets.iter().enumerate() {
        let (p, pv) = g.var_with_id(&format!("p{i}"));
        vars.push(pv);
        let tc = g.constant(t);
        let d = g.sub(p, tc);
        let sq = g.mul(d, d);
        f = g.add(f, sq);
    }
    let opts = LbfgsOptions {
        max_iters: 10,
        tolerance: 1e-13,
        ..Default::default()
    };
    let state = lbfgs_minimize_graph(&mut g, f, &vars, &[0.0, 0.0, 0.0], &opts).unwrap();
    assert!(state.final_loss.total < 1e-12);
    assert!(state.iter <= 3, "took {} iterations", state.iter);
}

#[test]
fn adam_decreases_quadratic_bowl_monotonically() {
    let mut g = Graph::new();
    let (p, pv) = g.var_with_id("p");
    let c = g.constant(3.0);
    let d = g.sub(p, c);
    let f = g.mul(d, d);
    let grads = g.gradient(f, &[pv]);
    let obj = GraphObjective::new(&g, f, &grads, &[pv]);
    let opts = AdamOptions {
        max_iters: 100,
        lr: 0.05,
        ..Default::default()
    };
    let state = adam_minimize(&obj, &[0.0], &opts, |_| {}).unwrap();
    for pair in state.loss_history.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12);
    }
    assert!(state.final_loss.total < state.loss_history[0]);
}

#[test]
fn adam_stays_put_at_zero_gradient() {
    let mut g = Graph::new();
    let (p, pv) = g.var_with_id("p");
    let f = g.mul(p, p);
    let grads = g.gradient(f, &[pv]);
    let obj = GraphObjective::new(&g, f, &grads, &[pv]);
    let state = adam_minimize(
        &obj,
        &[0.0],
        &AdamOptions {
            max_iters: 10,
            ..Default::default()
        },
        |_| {},
    )
    .unwrap();
    assert_eq!(state.params[0], 0.0);
}

#[test]
fn adam_two_step_hand_trace() {
    // f = p², p₀ = 1, lr = 0.1 → p ≈ 0.8004 after two bias-corrected steps
    let mut g = Graph::new();
    let (p, pv) = g.var_with_id("p");
    let f = g.mul(p, p);
    let grads = g.gradient(f, &[pv]);
    let obj = GraphObjective::new(&g, f, &grads, &[pv]);
    let state = adam_minimize(
        &obj,
        &[1.0],
        &AdamOptions {
            max_iters: 2,
            lr: 0.1,
            ..Default::default()
        },
        |_| {},
    )
    .unwrap();
    assert!(
        (state.params[0] - 0.8).abs() < 1e-3,
        "p after two steps: {}",
        state.params[0]
    );
}

#[test]
fn joint_training_moves_both_parameter_blocks() {
    let problem = HeatProblem::default_1d();
    for kind in [ModelKind::FnnTeQpinn, ModelKind::QnnTeQpinn] {
        let mut model = build_model(&problem, &micro_config(kind), 21).unwrap();
        let colloc = sample_collocation(&problem, 4, 3).unwrap();
        let prep =
            LossPrep::build(&mut model, &colloc, LossWeights::default(), Reduction::Sum).unwrap();
        let obj = CollocationObjective {
            graph: &model.graph,
            prep: &prep,
        };
        let init = model.init_values();
        let opts = LbfgsOptions {
            max_iters: 5,
            tolerance: 1e-14,
            ..Default::default()
        };
        let state = lbfgs_minimize(&obj, &init, &opts, |_| {}).unwrap();
        let var_range = model.var_param_range.clone();
        let var_moved = state.params[var_range.clone()]
            .iter()
            .zip(&init[var_range.clone()])
            .any(|(a, b)| a != b);
        let emb_moved = state.params[var_range.end..]
            .iter()
            .zip(&init[var_range.end..])
            .any(|(a, b)| a != b);
        assert!(var_moved, "{kind:?}: variational block frozen");
        assert!(emb_moved, "{kind:?}: embedding block frozen");
        // circuit output stays bounded after optimization
        let axes = vec![linspace(-1.0, 1.0, 7), linspace(0.0, 1.0, 5)];
        let grid = model.eval_grid(&state.params, &axes).unwrap();
        for &v in grid.values() {
            assert!(v.abs() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn evaluate_reports_zero_error_against_itself() {
    let model = analytic_model_1d();
    let axes = vec![linspace(-1.0, 1.0, 9), linspace(0.0, 1.0, 5)];
    let reference = model.eval_grid(&[], &axes).unwrap();
    let metrics = evaluate(&model, &[], &reference).unwrap();
    assert_eq!(metrics.l2_rel, 0.0);
    assert_eq!(metrics.linf_rel, 0.0);
    assert!(metrics.abs_error_grid.values().iter().all(|&v| v == 0.0));
}

#[test]
fn evaluate_rejects_out_of_domain_axes() {
    let model = analytic_model_1d();
    let axes = vec![vec![-1.0, 0.0, 2.0], vec![0.0, 1.0]];
    let reference = crate::pde::SolutionGrid::new(axes, vec![0.0; 6]).unwrap();
    assert!(matches!(
        evaluate(&model, &[], &reference),
        Err(TrainError::AxisOutOfDomain { .. })
    ));
}

#[test]
fn grid_comparison_matches_brute_force_norms() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
    let axes = vec![linspace(0.0, 1.0, 6), linspace(0.0, 1.0, 4)];
    let n: usize = axes.iter().map(|a| a.len()).product();
    let reference_values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let predicted_values: Vec<f64> = reference_values
        .iter()
        .map(|v| v + rng.gen_range(-0.1..0.1))
        .collect();
    let reference = crate::pde::SolutionGrid::new(axes.clone(), reference_values.clone()).unwrap();
    let predicted = crate::pde::SolutionGrid::new(axes, predicted_values.clone()).unwrap();
    let metrics = compare_grids(&predicted, &reference);
    let l2_num: f64 = predicted_values
        .iter()
        .zip(&reference_values)
        .map(|(p, r)| (p - r) * (p - r))
        .sum::<f64>()
        .sqrt();
    let l2_den: f64 = reference_values.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((metrics.l2_rel - l2_num / l2_den).abs() < 1e-12);
    let linf_num = predicted_values
        .iter()
        .zip(&reference_values)
        .map(|(p, r)| (p - r).abs())
        .fold(0.0f64, f64::max);
    let linf_den = reference_values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    assert!((metrics.linf_rel - linf_num / linf_den).abs() < 1e-12);
}

#[test]
fn constant_offset_gives_expected_linf() {
    let axes = vec![vec![0.0, 1.0]];
    let reference = crate::pde::SolutionGrid::new(axes.clone(), vec![1.0, 0.5]).unwrap();
    let predicted = crate::pde::SolutionGrid::new(axes, vec![1.1, 0.6]).unwrap();
    let metrics = compare_grids(&predicted, &reference);
    assert!((metrics.linf_rel - 0.1).abs() < 1e-12);
}
