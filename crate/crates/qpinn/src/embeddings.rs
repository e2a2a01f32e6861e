//! Trainable maps from (x[, y], t) to the encoding angle vector Γ.
//!
//! Three mechanisms produce the per-qubit rotation angles: a classical
//! feed-forward network (tanh throughout, output scaled by π so angles stay
//! in (−π, π)), an auxiliary quantum circuit read out qubit-by-qubit
//! (φ_k = π⟨Z_k⟩), and a non-trainable affine scaler used as an ablation
//! baseline. All three build exprgraph nodes, so input derivatives (for the
//! PDE residual) and parameter derivatives (for training) come from the same
//! machinery.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exprgraph::{Graph, NodeId, VarId};
use crate::qmodel::{expectation_node, CircuitLayout, Observable, QmodelError};

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("expected {want} input nodes, got {got}")]
    InputCount { got: usize, want: usize },
    #[error("domain bounds ({lo}, {hi}) are not increasing")]
    BadBounds { lo: f64, hi: f64 },
    #[error("direct embedding needs at least {want} qubits, got {got}")]
    TooFewQubits { got: usize, want: usize },
    #[error(transparent)]
    Qmodel(#[from] QmodelError),
}

/// A trainable scalar registered in the graph: variable plus its seeded
/// initial value.
#[derive(Clone, Debug)]
pub struct ParamVar {
    pub name: String,
    pub var: VarId,
    pub node: NodeId,
    pub init: f64,
}

/// Deterministic RNG for parameter initialization. ChaCha8 keeps the stream
/// stable across platforms and releases.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Glorot-uniform weight draw for a layer of the given fan-in/out.
pub fn glorot_uniform(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> f64 {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng.gen_range(-bound..bound)
}

/// Small-angle draw for quantum rotation parameters, uniform in (−π/4, π/4).
pub fn small_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-PI / 4.0..PI / 4.0)
}

/// Per-dimension affine map of a coordinate domain onto [−π, π].
#[derive(Clone, Debug)]
pub struct AffineScaler {
    bounds: Vec<(f64, f64)>,
}

impl AffineScaler {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, EmbeddingError> {
        for &(lo, hi) in &bounds {
            if !(hi > lo) {
                return Err(EmbeddingError::BadBounds { lo, hi });
            }
        }
        Ok(AffineScaler { bounds })
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn scale_value(&self, dim: usize, v: f64) -> f64 {
        let (lo, hi) = self.bounds[dim];
        PI * (2.0 * (v - lo) / (hi - lo) - 1.0)
    }

    /// Graph node for π·(2(v−lo)/(hi−lo) − 1).
    pub fn scale_node(&self, graph: &mut Graph, dim: usize, input: NodeId) -> NodeId {
        let (lo, hi) = self.bounds[dim];
        let a = 2.0 * PI / (hi - lo);
        let b = -PI * (2.0 * lo / (hi - lo) + 1.0);
        let an = graph.constant(a);
        let bn = graph.constant(b);
        let scaled = graph.mul(an, input);
        graph.add(scaled, bn)
    }
}

/// Classical feed-forward embedding: dense affine + tanh per layer, final
/// output scaled by π.
pub struct FnnEmbedding {
    layer_sizes: Vec<usize>,
    /// Per layer: weights (out-major, in-minor), then biases.
    params: Vec<ParamVar>,
}

impl FnnEmbedding {
    /// Creates the network's weight variables in `graph`, Glorot-initialized
    /// with zero biases.
    pub fn new(
        graph: &mut Graph,
        prefix: &str,
        d_in: usize,
        hidden: &[usize],
        n_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(d_in);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(n_out);

        let mut params = Vec::new();
        for layer in 0..layer_sizes.len() - 1 {
            let (fan_in, fan_out) = (layer_sizes[layer], layer_sizes[layer + 1]);
            for out in 0..fan_out {
                for inp in 0..fan_in {
                    let name = format!("{prefix}_w{layer}_{out}_{inp}");
                    let (node, var) = graph.var_with_id(&name);
                    params.push(ParamVar {
                        name,
                        var,
                        node,
                        init: glorot_uniform(rng, fan_in, fan_out),
                    });
                }
            }
            for out in 0..fan_out {
                let name = format!("{prefix}_b{layer}_{out}");
                let (node, var) = graph.var_with_id(&name);
                params.push(ParamVar {
                    name,
                    var,
                    node,
                    init: 0.0,
                });
            }
        }
        FnnEmbedding {
            layer_sizes,
            params,
        }
    }

    pub fn params(&self) -> &[ParamVar] {
        &self.params
    }

    pub fn d_in(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_out(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Angle nodes φ_k = π·tanh(z_k) for the given input nodes.
    pub fn forward(
        &self,
        graph: &mut Graph,
        inputs: &[NodeId],
    ) -> Result<Vec<NodeId>, EmbeddingError> {
        if inputs.len() != self.d_in() {
            return Err(EmbeddingError::InputCount {
                got: inputs.len(),
                want: self.d_in(),
            });
        }
        let mut activations: Vec<NodeId> = inputs.to_vec();
        let mut offset = 0;
        let n_layers = self.layer_sizes.len() - 1;
        for layer in 0..n_layers {
            let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
            let weights_at = |out: usize, inp: usize| offset + out * fan_in + inp;
            let bias_at = |out: usize| offset + fan_out * fan_in + out;
            let mut next = Vec::with_capacity(fan_out);
            for out in 0..fan_out {
                let mut z = self.params[bias_at(out)].node;
                for (inp, &a) in activations.iter().enumerate() {
                    let w = self.params[weights_at(out, inp)].node;
                    let wa = graph.mul(w, a);
                    z = graph.add(z, wa);
                }
                next.push(graph.tanh(z));
            }
            activations = next;
            offset += fan_out * fan_in + fan_out;
        }
        let pi = graph.constant(PI);
        Ok(activations.iter().map(|&a| graph.mul(pi, a)).collect())
    }
}

/// Fully quantum embedding: an auxiliary circuit whose per-qubit ⟨Z_k⟩
/// readouts become encoding angles, φ_k = π⟨Z_k⟩.
pub struct QnnEmbedding {
    aux_layout: CircuitLayout,
    input_map: AffineScaler,
    d_in: usize,
    /// θ_emb, layer-major like [`crate::qmodel::VarParams`].
    params: Vec<ParamVar>,
}

impl QnnEmbedding {
    pub fn new(
        graph: &mut Graph,
        prefix: &str,
        aux_layout: CircuitLayout,
        input_map: AffineScaler,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let d_in = input_map.dims();
        let mut params = Vec::with_capacity(aux_layout.var_param_count());
        for layer in 0..aux_layout.n_layers {
            for qubit in 0..aux_layout.n_qubits {
                let name = format!("{prefix}_t{layer}_{qubit}");
                let (node, var) = graph.var_with_id(&name);
                params.push(ParamVar {
                    name,
                    var,
                    node,
                    init: small_angle(rng),
                });
            }
        }
        QnnEmbedding {
            aux_layout,
            input_map,
            d_in,
            params,
        }
    }

    pub fn params(&self) -> &[ParamVar] {
        &self.params
    }

    pub fn aux_layout(&self) -> &CircuitLayout {
        &self.aux_layout
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn n_out(&self) -> usize {
        self.aux_layout.n_qubits
    }

    /// Angle nodes φ_k = π·⟨Z_k⟩ of the auxiliary circuit. Aux qubit j is
    /// encoded with the scaled coordinate j mod d_in.
    pub fn forward(
        &self,
        graph: &mut Graph,
        inputs: &[NodeId],
    ) -> Result<Vec<NodeId>, EmbeddingError> {
        if inputs.len() != self.d_in {
            return Err(EmbeddingError::InputCount {
                got: inputs.len(),
                want: self.d_in,
            });
        }
        let scaled: Vec<NodeId> = inputs
            .iter()
            .enumerate()
            .map(|(d, &node)| self.input_map.scale_node(graph, d, node))
            .collect();
        let gamma: Vec<NodeId> = (0..self.aux_layout.n_qubits)
            .map(|j| scaled[j % self.d_in])
            .collect();
        let theta: Vec<NodeId> = self.params.iter().map(|p| p.node).collect();
        let pi = graph.constant(PI);
        (0..self.aux_layout.n_qubits)
            .map(|k| {
                let z = expectation_node(
                    graph,
                    &self.aux_layout,
                    Observable::ZQubit(k),
                    &gamma,
                    &theta,
                )?;
                Ok(graph.mul(pi, z))
            })
            .collect()
    }
}

/// Non-trainable baseline: φ_k is the affinely scaled coordinate k mod d_in.
pub fn direct_forward(
    scaler: &AffineScaler,
    graph: &mut Graph,
    inputs: &[NodeId],
    n_qubits: usize,
) -> Result<Vec<NodeId>, EmbeddingError> {
    let d_in = scaler.dims();
    if inputs.len() != d_in {
        return Err(EmbeddingError::InputCount {
            got: inputs.len(),
            want: d_in,
        });
    }
    if n_qubits < d_in {
        return Err(EmbeddingError::TooFewQubits {
            got: n_qubits,
            want: d_in,
        });
    }
    let scaled: Vec<NodeId> = inputs
        .iter()
        .enumerate()
        .map(|(d, &node)| scaler.scale_node(graph, d, node))
        .collect();
    Ok((0..n_qubits).map(|k| scaled[k % d_in]).collect())
}
