//! Drive the statevector simulator directly: rotations, entanglers, and
//! Pauli-Z readout, checked against closed forms.

use qpinn::qmodel::{apply_ansatz, encode, expectation, AngleVector, CircuitLayout, Entangler, VarParams};
use qpinn::StateVector;
use std::f64::consts::PI;

fn main() {
    // single qubit: RY(θ) then ⟨Z⟩ = cos θ
    let mut s = StateVector::zero(1).unwrap();
    s.ry(0, 1.1).unwrap();
    println!("⟨Z⟩ after RY(1.1)        = {:.12} (cos 1.1 = {:.12})", s.expect_z(0).unwrap(), (1.1f64).cos());

    // Bell pair from RY(π/2) + CNOT: perfect ZZ correlation, zero locals
    let mut bell = StateVector::zero(2).unwrap();
    bell.ry(0, PI / 2.0).unwrap();
    bell.cnot(0, 1).unwrap();
    println!(
        "Bell state: ⟨Z⊗Z⟩ = {:.3}, ⟨Z₀⟩ = {:.3}, ⟨Z₁⟩ = {:.3}",
        bell.expect_z_all(),
        bell.expect_z(0).unwrap(),
        bell.expect_z(1).unwrap()
    );

    // a full model circuit: encode Γ, run the layered ansatz, measure
    let layout = CircuitLayout::new(4, 3, Entangler::Ring);
    let gamma = AngleVector(vec![0.4, -0.9, 1.3, 0.2]);
    let theta = VarParams::from_flat(
        &layout,
        (0..layout.var_param_count()).map(|i| 0.1 * i as f64).collect(),
    )
    .unwrap();
    let e = expectation(&layout, &gamma, &theta).unwrap();
    println!("4-qubit, 3-layer expectation = {e:.12} (bounded in [-1, 1])");

    // the same value assembled step by step
    let mut state = encode(&layout, &gamma).unwrap();
    apply_ansatz(&mut state, &layout, &theta).unwrap();
    println!("assembled state norm          = {:.15}", state.norm_sqr());
    println!("assembled expectation         = {:.12}", state.expect_z_all());
}
