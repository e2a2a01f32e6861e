//! Hybrid quantum-classical physics-informed solver for parabolic PDEs.
//!
//! The crate trains three interchangeable surrogate models for 1D/2D heat
//! equations by minimizing PDE/boundary/initial residuals at collocation
//! points:
//!
//! * `pinn` — a classical tanh MLP,
//! * `fnn-te-qpinn` — a feed-forward network feeding rotation angles into a
//!   variational quantum circuit,
//! * `qnn-te-qpinn` — an auxiliary quantum circuit producing those angles.
//!
//! Everything is built on a scalar computation graph ([`exprgraph`]) whose
//! derivatives are themselves graphs, so the second spatial derivatives in
//! the residual stay differentiable with respect to every model parameter.
//! Quantum expectation values enter the graph as custom primitives whose
//! derivative rule is the parameter-shift rule, evaluated on an exact
//! statevector simulator ([`qsim`]). A method-of-lines RK45 integrator
//! ([`oracle`]) provides reference solutions.
//!
//! See the crate examples for runnable entry points (`cargo run --example`),
//! or the `qpinn` binary for the file-driven workflow.

pub mod cli;
pub mod embeddings;
pub mod exprgraph;
pub mod oracle;
pub mod pde;
pub mod qmodel;
pub mod qsim;
pub mod train;

pub use exprgraph::{Bindings, Graph, GraphError, NodeId, VarId};
pub use pde::{CollocationSet, HeatProblem, SolutionGrid};
pub use qmodel::{AngleVector, CircuitLayout, Entangler, VarParams};
pub use qsim::StateVector;
pub use train::{Metrics, Model, ModelKind};
