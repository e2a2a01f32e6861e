//! The three input embeddings side by side: classical network, auxiliary
//! quantum circuit, and the plain affine scaler. Each maps (x, t) to the
//! encoding angles Γ and stays differentiable in both inputs and parameters.

use qpinn::embeddings::{direct_forward, seeded_rng, AffineScaler, FnnEmbedding, QnnEmbedding};
use qpinn::qmodel::{CircuitLayout, Entangler};
use qpinn::{Bindings, Graph};

fn main() {
    let n_qubits = 4;
    let mut rng = seeded_rng(7);
    let mut g = Graph::new();
    let (x, xv) = g.var_with_id("x");
    let (t, tv) = g.var_with_id("t");
    let scaler = AffineScaler::new(vec![(-1.0, 1.0), (0.0, 1.0)]).unwrap();

    let fnn = FnnEmbedding::new(&mut g, "fnn", 2, &[10, 10], n_qubits, &mut rng);
    let fnn_angles = fnn.forward(&mut g, &[x, t]).unwrap();

    let aux = CircuitLayout::new(n_qubits, 2, Entangler::Ring);
    let qnn = QnnEmbedding::new(&mut g, "qnn", aux, scaler.clone(), &mut rng);
    let qnn_angles = qnn.forward(&mut g, &[x, t]).unwrap();

    let direct_angles = direct_forward(&scaler, &mut g, &[x, t], n_qubits).unwrap();

    let mut b = Bindings::new();
    b.set(xv, 0.4);
    b.set(tv, 0.25);
    for p in fnn.params().iter().chain(qnn.params()) {
        b.set(p.var, p.init);
    }

    let show = |g: &Graph, name: &str, angles: &[qpinn::NodeId], b: &Bindings| {
        let vals: Vec<String> = angles
            .iter()
            .map(|&a| format!("{:+.4}", g.eval(a, b).unwrap()))
            .collect();
        println!("{name:8} Γ(0.4, 0.25) = [{}]", vals.join(", "));
    };
    show(&g, "fnn", &fnn_angles, &b);
    show(&g, "qnn", &qnn_angles, &b);
    show(&g, "direct", &direct_angles, &b);

    // the angles are graph nodes, so input derivatives come for free
    let dphi0_dx = g.differentiate(fnn_angles[0], xv);
    let d2phi0_dx2 = g.differentiate(dphi0_dx, xv);
    println!("\nfnn ∂φ₀/∂x   = {:+.6}", g.eval(dphi0_dx, &b).unwrap());
    println!("fnn ∂²φ₀/∂x² = {:+.6}", g.eval(d2phi0_dx2, &b).unwrap());
    println!(
        "\nparameter counts: fnn = {}, qnn = {}, direct = 0",
        fnn.params().len(),
        qnn.params().len()
    );
}
