//! Parameter-shift derivatives of a circuit expectation, compared against
//! finite differences, plus the graph-side version that nests to any order.

use qpinn::qmodel::{
    expectation, expectation_node, shift_first, shift_second, AngleAddress, AngleVector,
    CircuitLayout, Entangler, Observable, VarParams,
};
use qpinn::{Bindings, Graph};

fn main() {
    let layout = CircuitLayout::new(3, 2, Entangler::Ring);
    let gamma = AngleVector(vec![0.3, -0.7, 1.1]);
    let theta = VarParams::from_flat(&layout, vec![0.2, 0.5, -0.4, 0.9, -0.1, 0.6]).unwrap();

    let addr = AngleAddress::Encoding(1);
    let d1 = shift_first(&layout, &gamma, &theta, addr).unwrap();
    let d2 = shift_second(&layout, &gamma, &theta, addr).unwrap();

    let h = 1e-5;
    let eval_at = |delta: f64| {
        let mut g = gamma.clone();
        g.0[1] += delta;
        expectation(&layout, &g, &theta).unwrap()
    };
    let fd1 = (eval_at(h) - eval_at(-h)) / (2.0 * h);
    let h2 = 1e-3;
    let fd2 = (eval_at(h2) - 2.0 * eval_at(0.0) + eval_at(-h2)) / (h2 * h2);

    println!("∂E/∂φ₁   shift rule = {d1:.12}");
    println!("          finite diff = {fd1:.12}");
    println!("∂²E/∂φ₁² shift rule = {d2:.12}");
    println!("          finite diff = {fd2:.12}");

    // the same derivatives through the expression graph, nested symbolically
    let mut g = Graph::new();
    let mut gamma_nodes = Vec::new();
    let mut gamma_vars = Vec::new();
    for (k, &phi) in gamma.0.iter().enumerate() {
        let (node, var) = g.var_with_id(&format!("phi{k}"));
        gamma_nodes.push(node);
        gamma_vars.push((var, phi));
    }
    let mut theta_nodes = Vec::new();
    let mut theta_vars = Vec::new();
    for (i, &t) in theta.as_flat().iter().enumerate() {
        let (node, var) = g.var_with_id(&format!("th{i}"));
        theta_nodes.push(node);
        theta_vars.push((var, t));
    }
    let e = expectation_node(&mut g, &layout, Observable::ZAll, &gamma_nodes, &theta_nodes).unwrap();
    let de = g.differentiate(e, gamma_vars[1].0);
    let d2e = g.differentiate(de, gamma_vars[1].0);

    let mut b = Bindings::new();
    for &(v, x) in gamma_vars.iter().chain(&theta_vars) {
        b.set(v, x);
    }
    println!("graph ∂E/∂φ₁        = {:.12}", g.eval(de, &b).unwrap());
    println!("graph ∂²E/∂φ₁²      = {:.12}", g.eval(d2e, &b).unwrap());
    println!(
        "(each shifted expectation is itself a graph node: {} nodes total)",
        g.node_count()
    );
}
