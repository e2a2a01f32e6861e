//! Encoding circuit, layered hardware-efficient ansatz, Z-observable
//! readout, and the parameter-shift differentiable expectation primitive.
//!
//! Every trainable angle parameterizes exactly one RY gate, so the
//! expectation value is single-frequency in each angle:
//! E(a) = A + B·cos a + C·sin a. That gives exact derivative rules from
//! shifted evaluations:
//!
//! * first order: (E(a+π/2) − E(a−π/2)) / 2,
//! * second order: (E(a+π) − E(a)) / 2, since E(a+π) = 2A − E(a) implies
//!   E''(a) = −B·cos a − C·sin a = (E(a+π) − E(a)) / 2,
//! * mixed: the ±π/2 four-point rule applied per axis.
//!
//! [`expectation_node`] packages the expectation as an exprgraph primitive
//! whose derivative rule returns shifted copies of itself, so symbolic
//! differentiation of any order reduces to more circuit evaluations.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use crate::exprgraph::{Graph, NodeId, PrimitiveSpec};
use crate::qsim::{QsimError, StateVector};

#[derive(Debug, thiserror::Error)]
pub enum QmodelError {
    #[error("angle vector has {got} entries, layout wants {want}")]
    AngleCount { got: usize, want: usize },
    #[error("variational parameters have {got} entries, layout wants {want}")]
    ParamCount { got: usize, want: usize },
    #[error("state has {got} qubits, layout wants {want}")]
    QubitCount { got: usize, want: usize },
    #[error("invalid angle address {0:?}")]
    InvalidAddress(AngleAddress),
    #[error("mixed shift needs two distinct addresses, got {0:?} twice")]
    DuplicateAddress(AngleAddress),
    #[error(transparent)]
    Sim(#[from] QsimError),
}

/// Entangling pattern applied after each rotation layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entangler {
    /// CNOT(k, k+1 mod n); degenerates to one CNOT for n = 2, skipped for n = 1.
    Ring,
    /// CNOT(k, k+1) for k = 0..n−2.
    Linear,
}

/// Shape of a variational circuit: register size, layer count, entangler.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CircuitLayout {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub entangler: Entangler,
}

impl CircuitLayout {
    pub fn new(n_qubits: usize, n_layers: usize, entangler: Entangler) -> Self {
        CircuitLayout {
            n_qubits,
            n_layers,
            entangler,
        }
    }

    /// Number of variational angles: one RY per qubit per layer.
    pub fn var_param_count(&self) -> usize {
        self.n_qubits * self.n_layers
    }
}

/// Variational angles θ, stored layer-major: `theta[layer * n + qubit]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarParams {
    n_qubits: usize,
    theta: Vec<f64>,
}

impl VarParams {
    pub fn zeros(layout: &CircuitLayout) -> Self {
        VarParams {
            n_qubits: layout.n_qubits,
            theta: vec![0.0; layout.var_param_count()],
        }
    }

    pub fn from_flat(layout: &CircuitLayout, theta: Vec<f64>) -> Result<Self, QmodelError> {
        if theta.len() != layout.var_param_count() {
            return Err(QmodelError::ParamCount {
                got: theta.len(),
                want: layout.var_param_count(),
            });
        }
        Ok(VarParams {
            n_qubits: layout.n_qubits,
            theta,
        })
    }

    pub fn get(&self, layer: usize, qubit: usize) -> f64 {
        self.theta[layer * self.n_qubits + qubit]
    }

    pub fn set(&mut self, layer: usize, qubit: usize, value: f64) {
        self.theta[layer * self.n_qubits + qubit] = value;
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.theta
    }
}

/// Encoding angles Γ(x, t), one per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleVector(pub Vec<f64>);

impl AngleVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which Pauli-Z readout the circuit output uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    /// ⟨Z ⊗ … ⊗ Z⟩ over the full register.
    ZAll,
    /// ⟨Z⟩ on one qubit.
    ZQubit(usize),
}

/// Address of a single rotation angle inside the circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleAddress {
    Encoding(usize),
    Variational { layer: usize, qubit: usize },
}

fn check_shapes(
    layout: &CircuitLayout,
    gamma: &AngleVector,
    params: &VarParams,
) -> Result<(), QmodelError> {
    if gamma.len() != layout.n_qubits {
        return Err(QmodelError::AngleCount {
            got: gamma.len(),
            want: layout.n_qubits,
        });
    }
    if params.theta.len() != layout.var_param_count() {
        return Err(QmodelError::ParamCount {
            got: params.theta.len(),
            want: layout.var_param_count(),
        });
    }
    Ok(())
}

/// Prepares |0…0⟩ and applies the encoding rotations RY(γ_k) on qubit k.
pub fn encode(layout: &CircuitLayout, gamma: &AngleVector) -> Result<StateVector, QmodelError> {
    if gamma.len() != layout.n_qubits {
        return Err(QmodelError::AngleCount {
            got: gamma.len(),
            want: layout.n_qubits,
        });
    }
    let mut state = StateVector::zero(layout.n_qubits)?;
    for (k, &phi) in gamma.0.iter().enumerate() {
        state.ry(k, phi)?;
    }
    Ok(state)
}

/// Applies the layered ansatz in place: per layer, RY(θ[ℓ,k]) on every
/// qubit, then the fixed entangler.
pub fn apply_ansatz(
    state: &mut StateVector,
    layout: &CircuitLayout,
    params: &VarParams,
) -> Result<(), QmodelError> {
    if state.num_qubits() != layout.n_qubits {
        return Err(QmodelError::QubitCount {
            got: state.num_qubits(),
            want: layout.n_qubits,
        });
    }
    if params.theta.len() != layout.var_param_count() {
        return Err(QmodelError::ParamCount {
            got: params.theta.len(),
            want: layout.var_param_count(),
        });
    }
    let n = layout.n_qubits;
    for layer in 0..layout.n_layers {
        for qubit in 0..n {
            state.ry(qubit, params.get(layer, qubit))?;
        }
        if n < 2 {
            continue;
        }
        match layout.entangler {
            Entangler::Ring => {
                // n = 2 would repeat the same pair; a single CNOT suffices.
                let count = if n == 2 { 1 } else { n };
                for k in 0..count {
                    state.cnot(k, (k + 1) % n)?;
                }
            }
            Entangler::Linear => {
                for k in 0..n - 1 {
                    state.cnot(k, k + 1)?;
                }
            }
        }
    }
    Ok(())
}

fn measure(state: &StateVector, observable: Observable) -> Result<f64, QmodelError> {
    Ok(match observable {
        Observable::ZAll => state.expect_z_all(),
        Observable::ZQubit(q) => state.expect_z(q)?,
    })
}

/// Full model output ⟨Z⊗n⟩ after encoding and ansatz; always in [−1, 1].
pub fn expectation(
    layout: &CircuitLayout,
    gamma: &AngleVector,
    params: &VarParams,
) -> Result<f64, QmodelError> {
    expectation_of(layout, gamma, params, Observable::ZAll)
}

/// Expectation of an arbitrary Z observable after encoding and ansatz.
pub fn expectation_of(
    layout: &CircuitLayout,
    gamma: &AngleVector,
    params: &VarParams,
    observable: Observable,
) -> Result<f64, QmodelError> {
    check_shapes(layout, gamma, params)?;
    let mut state = encode(layout, gamma)?;
    apply_ansatz(&mut state, layout, params)?;
    measure(&state, observable)
}

fn eval_shifted(
    layout: &CircuitLayout,
    gamma: &AngleVector,
    params: &VarParams,
    which: AngleAddress,
    delta: f64,
) -> Result<f64, QmodelError> {
    let mut gamma = gamma.clone();
    let mut params = params.clone();
    match which {
        AngleAddress::Encoding(k) => {
            if k >= layout.n_qubits {
                return Err(QmodelError::InvalidAddress(which));
            }
            gamma.0[k] += delta;
        }
        AngleAddress::Variational { layer, qubit } => {
            if layer >= layout.n_layers || qubit >= layout.n_qubits {
                return Err(QmodelError::InvalidAddress(which));
            }
            let v = params.get(layer, qubit);
            params.set(layer, qubit, v + delta);
        }
    }
    expectation(layout, &gamma, &params)
}

/// Exact first partial derivative of [`expectation`] with respect to one
/// angle, from two shifted evaluations.
pub fn shift_first(
    layout: &CircuitLayout,
    gamma: &AngleVector,
    params: &VarParams,
    which: AngleAddress,
) -> Result<f64, QmodelError> {
    check_shapes(layout, gamma, params)?;
    let plus = eval_shifted(layout, gamma, params, which, FRAC_PI_2)?;
    let minus = eval_shifted(layout, gamma, params, which, -FRAC_PI_2)?;
    Ok((plus - minus) / 2.0)
}

/// Exact second partial, two-point form (E(a+π) − E(a)) / 2.
pub fn shift_second(
    layout: &CircuitLayout,
    gamma: &AngleVector,
    params: &VarParams,
    which: AngleAddress,
) -> Result<f64, QmodelError> {
    check_shapes(layout, gamma, params)?;
    let shifted = eval_shifted(layout, gamma, params, which, PI)?;
    let center = expectation(layout, gamma, params)?;
    Ok((shifted - center) / 2.0)
}

/// Second partial via the nested four-point rule
/// (E(a+π) − 2E(a) + E(a−π)) / 4; algebraically equal to [`shift_second`],
/// kept as the tested-equal cross-check.
pub fn shift_second_nested(
    layout: &CircuitLayout,
    gamma: &AngleVector,
    params: &VarParams,
    which: AngleAddress,
) -> Result<f64, QmodelError> {
    check_shapes(layout, gamma, params)?;
    let plus = eval_shifted(layout, gamma, params, which, PI)?;
    let minus = eval_shifted(layout, gamma, params, which, -PI)?;
    let center = expectation(layout, gamma, params)?;
    Ok((plus - 2.0 * center + minus) / 4.0)
}

/// Exact mixed partial ∂²E/∂a∂b from the four-point ±π/2 rule.
pub fn shift_mixed(
    layout: &CircuitLayout,
    gamma: &AngleVector,
    params: &VarParams,
    which_a: AngleAddress,
    which_b: AngleAddress,
) -> Result<f64, QmodelError> {
    if which_a == which_b {
        return Err(QmodelError::DuplicateAddress(which_a));
    }
    check_shapes(layout, gamma, params)?;
    let mut sum = 0.0;
    for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let mut gamma2 = gamma.clone();
        let mut params2 = params.clone();
        for (addr, s) in [(which_a, sa), (which_b, sb)] {
            match addr {
                AngleAddress::Encoding(k) => {
                    if k >= layout.n_qubits {
                        return Err(QmodelError::InvalidAddress(addr));
                    }
                    gamma2.0[k] += s * FRAC_PI_2;
                }
                AngleAddress::Variational { layer, qubit } => {
                    if layer >= layout.n_layers || qubit >= layout.n_qubits {
                        return Err(QmodelError::InvalidAddress(addr));
                    }
                    let v = params2.get(layer, qubit);
                    params2.set(layer, qubit, v + s * FRAC_PI_2);
                }
            }
        }
        sum += sa * sb * expectation(layout, &gamma2, &params2)?;
    }
    Ok(sum / 4.0)
}

thread_local! {
    // One simulator buffer per register size, reused across primitive
    // evaluations on the same thread.
    static SIM_SCRATCH: RefCell<Vec<Option<StateVector>>> = const { RefCell::new(Vec::new()) };
}

fn run_circuit_scratch(layout: &CircuitLayout, observable: Observable, args: &[f64]) -> f64 {
    let n = layout.n_qubits;
    SIM_SCRATCH.with(|cell| {
        let mut slots = cell.borrow_mut();
        if slots.len() <= n {
            slots.resize_with(n + 1, || None);
        }
        let state = slots[n].get_or_insert_with(|| {
            StateVector::zero(n).expect("layout qubit count validated at construction")
        });
        state.reset_zero();
        let (gamma, theta) = args.split_at(n);
        for (k, &phi) in gamma.iter().enumerate() {
            state.ry(k, phi).expect("qubit index in range");
        }
        for layer in 0..layout.n_layers {
            for qubit in 0..n {
                state.ry(qubit, theta[layer * n + qubit]).expect("qubit index in range");
            }
            if n < 2 {
                continue;
            }
            match layout.entangler {
                Entangler::Ring => {
                    let count = if n == 2 { 1 } else { n };
                    for k in 0..count {
                        state.cnot(k, (k + 1) % n).expect("qubit index in range");
                    }
                }
                Entangler::Linear => {
                    for k in 0..n - 1 {
                        state.cnot(k, k + 1).expect("qubit index in range");
                    }
                }
            }
        }
        match observable {
            Observable::ZAll => state.expect_z_all(),
            Observable::ZQubit(q) => state.expect_z(q).expect("qubit index in range"),
        }
    })
}

fn primitive_name(layout: &CircuitLayout, observable: Observable) -> String {
    let ent = match layout.entangler {
        Entangler::Ring => "ring",
        Entangler::Linear => "lin",
    };
    let obs = match observable {
        Observable::ZAll => "zall".to_string(),
        Observable::ZQubit(q) => format!("z{q}"),
    };
    format!("qexp(n{}l{}{ent}:{obs})", layout.n_qubits, layout.n_layers)
}

fn expectation_primitive(
    graph: &mut Graph,
    layout: CircuitLayout,
    observable: Observable,
) -> crate::exprgraph::PrimitiveId {
    let name = primitive_name(&layout, observable);
    if let Some(id) = graph.primitive_id(&name) {
        return id;
    }
    let arity = layout.n_qubits + layout.var_param_count();
    let value_layout = layout;
    let partial_layout = layout;
    graph.register_primitive(PrimitiveSpec {
        name,
        arity,
        value: Arc::new(move |args: &[f64]| run_circuit_scratch(&value_layout, observable, args)),
        partial: Arc::new(move |g: &mut Graph, idx: usize, children: &[NodeId]| {
            // Parameter-shift rule: each argument drives exactly one RY, so
            // the partial is (E(+π/2 on idx) − E(−π/2 on idx)) / 2, each term
            // again a differentiable expectation node.
            let half_pi = g.constant(FRAC_PI_2);
            let neg_half_pi = g.constant(-FRAC_PI_2);
            let prim = expectation_primitive(g, partial_layout, observable);
            let mut plus_args = children.to_vec();
            plus_args[idx] = g.add(children[idx], half_pi);
            let plus = g
                .custom(prim, &plus_args)
                .expect("shift keeps the arity unchanged");
            let mut minus_args = children.to_vec();
            minus_args[idx] = g.add(children[idx], neg_half_pi);
            let minus = g
                .custom(prim, &minus_args)
                .expect("shift keeps the arity unchanged");
            let diff = g.sub(plus, minus);
            let half = g.constant(0.5);
            g.mul(half, diff)
        }),
    })
}

/// Builds a graph node whose value is the circuit expectation over the given
/// encoding-angle and variational-angle nodes (theta layer-major). The node
/// differentiates to any order through the parameter-shift rule.
pub fn expectation_node(
    graph: &mut Graph,
    layout: &CircuitLayout,
    observable: Observable,
    gamma_nodes: &[NodeId],
    theta_nodes: &[NodeId],
) -> Result<NodeId, QmodelError> {
    if gamma_nodes.len() != layout.n_qubits {
        return Err(QmodelError::AngleCount {
            got: gamma_nodes.len(),
            want: layout.n_qubits,
        });
    }
    if theta_nodes.len() != layout.var_param_count() {
        return Err(QmodelError::ParamCount {
            got: theta_nodes.len(),
            want: layout.var_param_count(),
        });
    }
    let prim = expectation_primitive(graph, *layout, observable);
    let mut args = Vec::with_capacity(gamma_nodes.len() + theta_nodes.len());
    args.extend_from_slice(gamma_nodes);
    args.extend_from_slice(theta_nodes);
    Ok(graph
        .custom(prim, &args)
        .expect("arity checked just above"))
}
