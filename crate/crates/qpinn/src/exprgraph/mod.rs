//! Scalar computation graph with graph-to-graph differentiation.
//!
//! Nodes are interned (hash-consed) inside a [`Graph`] arena, so structurally
//! identical subexpressions are stored once. Differentiation produces new
//! nodes in the same graph rather than numeric values, which is what lets the
//! PDE residual take second input derivatives of a model and then take
//! parameter gradients of those derivatives: every derivative is again an
//! ordinary, differentiable node.
//!
//! Construction requires `&mut Graph`; a frozen graph can be evaluated from
//! many threads at once because evaluation keeps all its state in
//! caller-provided buffers.

mod diff;
mod dot;
mod eval;

pub use eval::{Bindings, EvalPlan, EvalScratch};

use std::collections::HashMap;
use std::sync::Arc;

/// Handle to a node stored in a [`Graph`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Interned variable identifier. Two variables with the same name are the
/// same variable.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct VarId(pub(crate) u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Handle to a registered custom primitive.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PrimitiveId(pub(crate) u32);

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("variable `{name}` is unbound")]
    UnboundVariable { name: String },
    #[error("non-finite value {value} produced at node {node:?}")]
    NonFinite { node: NodeId, value: f64 },
    #[error("primitive `{primitive}` expects {expected} arguments, got {got}")]
    ArityMismatch {
        primitive: String,
        expected: usize,
        got: usize,
    },
}

/// Node operation. `Const` stores the IEEE-754 bit pattern so the enum can
/// serve directly as the interning key.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) enum Op {
    Const(u64),
    Var(VarId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Recip(NodeId),
    Sin(NodeId),
    Cos(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    PowInt(NodeId, i32),
    Custom(PrimitiveId, Box<[NodeId]>),
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type PartialFn = dyn Fn(&mut Graph, usize, &[NodeId]) -> NodeId + Send + Sync;

/// A custom primitive: an opaque scalar function of `arity` node arguments
/// together with a rule producing the partial-derivative graph with respect
/// to one argument. Differentiation of any order works as long as the rule
/// itself returns differentiable graphs.
pub struct PrimitiveSpec {
    pub name: String,
    pub arity: usize,
    pub value: Arc<ValueFn>,
    pub partial: Arc<PartialFn>,
}

pub(crate) struct Primitive {
    pub(crate) name: String,
    pub(crate) arity: usize,
    pub(crate) value: Arc<ValueFn>,
    pub(crate) partial: Arc<PartialFn>,
}

/// Arena holding every node of an expression DAG plus the interning table
/// and primitive registry.
pub struct Graph {
    pub(crate) nodes: Vec<Op>,
    intern: HashMap<Op, NodeId>,
    var_names: Vec<String>,
    var_lookup: HashMap<String, VarId>,
    var_nodes: Vec<NodeId>,
    pub(crate) primitives: Vec<Arc<Primitive>>,
    prim_lookup: HashMap<String, PrimitiveId>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            intern: HashMap::new(),
            var_names: Vec::new(),
            var_lookup: HashMap::new(),
            var_nodes: Vec::new(),
            primitives: Vec::new(),
            prim_lookup: HashMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn var_count(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, var: VarId) -> &str {
        &self.var_names[var.index()]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_lookup.get(name).copied()
    }

    fn intern(&mut self, op: Op) -> NodeId {
        if let Some(&id) = self.intern.get(&op) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(op.clone());
        self.intern.insert(op, id);
        id
    }

    pub(crate) fn op(&self, node: NodeId) -> &Op {
        &self.nodes[node.index()]
    }

    /// Constant value of a node, if it is a constant.
    pub fn const_value(&self, node: NodeId) -> Option<f64> {
        match self.op(node) {
            Op::Const(bits) => Some(f64::from_bits(*bits)),
            _ => None,
        }
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.intern(Op::Const(value.to_bits()))
    }

    /// Variable node for `name`, creating the variable on first use.
    pub fn var(&mut self, name: &str) -> NodeId {
        if let Some(&v) = self.var_lookup.get(name) {
            return self.var_nodes[v.index()];
        }
        let v = VarId(self.var_names.len() as u32);
        self.var_names.push(name.to_string());
        self.var_lookup.insert(name.to_string(), v);
        let node = self.intern(Op::Var(v));
        self.var_nodes.push(node);
        node
    }

    /// Node of an existing variable.
    pub fn var_node(&self, var: VarId) -> NodeId {
        self.var_nodes[var.index()]
    }

    /// Like [`Graph::var`] but also returns the variable id.
    pub fn var_with_id(&mut self, name: &str) -> (NodeId, VarId) {
        let node = self.var(name);
        let vid = self.var_lookup[name];
        (node, vid)
    }

    /// Splits `node` into (base, additive constant). An `Add` whose second
    /// operand is a constant is the canonical shape produced by `add`.
    fn split_add_const(&self, node: NodeId) -> (Option<NodeId>, f64) {
        match self.op(node) {
            Op::Const(bits) => (None, f64::from_bits(*bits)),
            Op::Add(a, b) => match self.const_value(*b) {
                Some(c) => (Some(*a), c),
                None => (Some(node), 0.0),
            },
            _ => (Some(node), 0.0),
        }
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (base_a, ca) = self.split_add_const(a);
        let (base_b, cb) = self.split_add_const(b);
        let c = ca + cb;
        match (base_a, base_b) {
            (None, None) => self.constant(c),
            (Some(x), None) | (None, Some(x)) => {
                if c == 0.0 {
                    x
                } else {
                    let cn = self.constant(c);
                    self.intern(Op::Add(x, cn))
                }
            }
            (Some(x), Some(y)) => {
                let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                let inner = self.intern(Op::Add(lo, hi));
                if c == 0.0 {
                    inner
                } else {
                    let cn = self.constant(c);
                    self.intern(Op::Add(inner, cn))
                }
            }
        }
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let nb = self.neg(b);
        self.add(a, nb)
    }

    /// Splits `node` into (base, multiplicative constant), mirroring
    /// `split_add_const`.
    fn split_mul_const(&self, node: NodeId) -> (Option<NodeId>, f64) {
        match self.op(node) {
            Op::Const(bits) => (None, f64::from_bits(*bits)),
            Op::Mul(a, b) => match self.const_value(*b) {
                Some(c) => (Some(*a), c),
                None => (Some(node), 1.0),
            },
            _ => (Some(node), 1.0),
        }
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (base_a, ca) = self.split_mul_const(a);
        let (base_b, cb) = self.split_mul_const(b);
        let c = ca * cb;
        if c == 0.0 {
            return self.constant(0.0);
        }
        match (base_a, base_b) {
            (None, None) => self.constant(c),
            (Some(x), None) | (None, Some(x)) => self.scale(x, c),
            (Some(x), Some(y)) => {
                let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                let inner = self.intern(Op::Mul(lo, hi));
                self.scale(inner, c)
            }
        }
    }

    fn scale(&mut self, node: NodeId, c: f64) -> NodeId {
        if c == 1.0 {
            node
        } else if c == -1.0 {
            self.neg(node)
        } else {
            let cn = self.constant(c);
            self.intern(Op::Mul(node, cn))
        }
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let rb = self.recip(b);
        self.mul(a, rb)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        match *self.op(a) {
            Op::Const(bits) => self.constant(-f64::from_bits(bits)),
            Op::Neg(inner) => inner,
            _ => self.intern(Op::Neg(a)),
        }
    }

    pub fn recip(&mut self, a: NodeId) -> NodeId {
        match *self.op(a) {
            Op::Const(bits) => self.constant(1.0 / f64::from_bits(bits)),
            Op::Recip(inner) => inner,
            _ => self.intern(Op::Recip(a)),
        }
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        match self.const_value(a) {
            Some(c) => self.constant(c.sin()),
            None => self.intern(Op::Sin(a)),
        }
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        match self.const_value(a) {
            Some(c) => self.constant(c.cos()),
            None => self.intern(Op::Cos(a)),
        }
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        match self.const_value(a) {
            Some(c) => self.constant(c.tanh()),
            None => self.intern(Op::Tanh(a)),
        }
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        match self.const_value(a) {
            Some(c) => self.constant(c.exp()),
            None => self.intern(Op::Exp(a)),
        }
    }

    pub fn powi(&mut self, a: NodeId, k: i32) -> NodeId {
        if k == 0 {
            return self.constant(1.0);
        }
        if k == 1 {
            return a;
        }
        match self.const_value(a) {
            Some(c) => self.constant(c.powi(k)),
            None => self.intern(Op::PowInt(a, k)),
        }
    }

    /// Registers a primitive, or returns the existing id when a primitive of
    /// the same name was registered before.
    pub fn register_primitive(&mut self, spec: PrimitiveSpec) -> PrimitiveId {
        if let Some(&id) = self.prim_lookup.get(&spec.name) {
            return id;
        }
        let id = PrimitiveId(self.primitives.len() as u32);
        self.prim_lookup.insert(spec.name.clone(), id);
        self.primitives.push(Arc::new(Primitive {
            name: spec.name,
            arity: spec.arity,
            value: spec.value,
            partial: spec.partial,
        }));
        id
    }

    pub fn primitive_id(&self, name: &str) -> Option<PrimitiveId> {
        self.prim_lookup.get(name).copied()
    }

    /// Applies a registered primitive to argument nodes.
    pub fn custom(&mut self, prim: PrimitiveId, args: &[NodeId]) -> Result<NodeId, GraphError> {
        let p = &self.primitives[prim.0 as usize];
        if p.arity != args.len() {
            return Err(GraphError::ArityMismatch {
                primitive: p.name.clone(),
                expected: p.arity,
                got: args.len(),
            });
        }
        Ok(self.intern(Op::Custom(prim, args.to_vec().into_boxed_slice())))
    }

    /// Child node ids of `node`, in argument order.
    pub(crate) fn children(&self, node: NodeId, out: &mut Vec<NodeId>) {
        out.clear();
        match self.op(node) {
            Op::Const(_) | Op::Var(_) => {}
            Op::Add(a, b) | Op::Mul(a, b) => {
                out.push(*a);
                out.push(*b);
            }
            Op::Neg(a) | Op::Recip(a) | Op::Sin(a) | Op::Cos(a) | Op::Tanh(a) | Op::Exp(a) => {
                out.push(*a)
            }
            Op::PowInt(a, _) => out.push(*a),
            Op::Custom(_, args) => out.extend_from_slice(args),
        }
    }

    /// Topological order (children before parents) of the sub-DAG reachable
    /// from `roots`. Iterative so deeply nested derivative graphs cannot
    /// overflow the stack.
    pub(crate) fn topo_order(&self, roots: &[NodeId]) -> Vec<NodeId> {
        let mut state = vec![0u8; self.nodes.len()]; // 0 unseen, 1 on stack, 2 done
        let mut order = Vec::new();
        let mut stack: Vec<(NodeId, bool)> = Vec::new();
        let mut kids = Vec::new();
        for &root in roots {
            stack.push((root, false));
            while let Some((node, expanded)) = stack.pop() {
                let s = state[node.index()];
                if s == 2 {
                    continue;
                }
                if expanded {
                    state[node.index()] = 2;
                    order.push(node);
                    continue;
                }
                if s == 1 {
                    continue;
                }
                state[node.index()] = 1;
                stack.push((node, true));
                self.children(node, &mut kids);
                for &c in kids.iter() {
                    if state[c.index()] == 0 {
                        stack.push((c, false));
                    }
                }
            }
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_consing_dedups_structurally_equal_nodes() {
        let mut g = Graph::new();
        let x = g.var("x");
        let a = g.sin(x);
        let b = g.sin(x);
        assert_eq!(a, b);
        let m1 = g.mul(x, a);
        let m2 = g.mul(a, x);
        assert_eq!(m1, m2, "mul operands are canonically ordered");
    }

    #[test]
    fn zero_and_one_pruning() {
        let mut g = Graph::new();
        let x = g.var("x");
        let zero = g.constant(0.0);
        let one = g.constant(1.0);
        assert_eq!(g.add(x, zero), x);
        assert_eq!(g.mul(x, one), x);
        assert_eq!(g.mul(x, zero), zero);
        let n = g.neg(x);
        assert_eq!(g.neg(n), x);
    }

    #[test]
    fn constant_folding() {
        let mut g = Graph::new();
        let two = g.constant(2.0);
        let three = g.constant(3.0);
        let s = g.add(two, three);
        assert_eq!(g.const_value(s), Some(5.0));
        let p = g.mul(two, three);
        assert_eq!(g.const_value(p), Some(6.0));
        let z = g.constant(0.0);
        let t = g.tanh(z);
        assert_eq!(g.const_value(t), Some(0.0));
    }

    #[test]
    fn chained_constant_offsets_merge() {
        let mut g = Graph::new();
        let x = g.var("x");
        let h = g.constant(0.5);
        let a = g.add(x, h);
        let b = g.add(a, h);
        let direct = {
            let one = g.constant(1.0);
            g.add(x, one)
        };
        assert_eq!(b, direct, "x + 0.5 + 0.5 should intern as x + 1");
    }

    #[test]
    fn same_variable_name_is_same_node() {
        let mut g = Graph::new();
        assert_eq!(g.var("theta"), g.var("theta"));
        assert_ne!(g.var("theta"), g.var("phi"));
    }
}
