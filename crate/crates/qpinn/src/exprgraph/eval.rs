//! Graph evaluation: one-shot for convenience, planned for hot loops.
//!
//! A frozen graph evaluated repeatedly (training loops evaluate the same
//! residual graph at thousands of collocation points) should build an
//! [`EvalPlan`] once and reuse an [`EvalScratch`] buffer; this skips the
//! per-call topological sort and all allocation.

use super::{Graph, GraphError, NodeId, Op, VarId};

/// Values for the free variables of a graph. Indexed densely by [`VarId`].
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    values: Vec<Option<f64>>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings { values: Vec::new() }
    }

    pub fn set(&mut self, var: VarId, value: f64) {
        if self.values.len() <= var.index() {
            self.values.resize(var.index() + 1, None);
        }
        self.values[var.index()] = Some(value);
    }

    pub fn get(&self, var: VarId) -> Option<f64> {
        self.values.get(var.index()).copied().flatten()
    }
}

/// Precomputed evaluation order for a fixed set of root nodes.
pub struct EvalPlan {
    order: Vec<NodeId>,
    /// Dense slot per node id; u32::MAX for nodes outside the plan.
    slot: Vec<u32>,
    roots: Vec<NodeId>,
}

impl EvalPlan {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }
}

/// Reusable buffers for [`Graph::eval_plan`]. One per thread.
#[derive(Default)]
pub struct EvalScratch {
    values: Vec<f64>,
    args: Vec<f64>,
}

impl EvalScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Graph {
    /// Builds an evaluation plan covering `roots`.
    pub fn plan(&self, roots: &[NodeId]) -> EvalPlan {
        let order = self.topo_order(roots);
        let mut slot = vec![u32::MAX; self.nodes.len()];
        for (i, node) in order.iter().enumerate() {
            slot[node.index()] = i as u32;
        }
        EvalPlan {
            order,
            slot,
            roots: roots.to_vec(),
        }
    }

    /// Evaluates all plan roots, writing results into `out` (one value per
    /// root, in root order).
    pub fn eval_plan(
        &self,
        plan: &EvalPlan,
        bindings: &Bindings,
        scratch: &mut EvalScratch,
        out: &mut [f64],
    ) -> Result<(), GraphError> {
        assert_eq!(out.len(), plan.roots.len());
        let values = &mut scratch.values;
        values.clear();
        values.resize(plan.order.len(), 0.0);
        for (i, &node) in plan.order.iter().enumerate() {
            let v = match self.op(node) {
                Op::Const(bits) => f64::from_bits(*bits),
                Op::Var(vid) => match bindings.get(*vid) {
                    Some(v) => v,
                    None => {
                        return Err(GraphError::UnboundVariable {
                            name: self.var_name(*vid).to_string(),
                        })
                    }
                },
                Op::Add(a, b) => {
                    values[plan.slot[a.index()] as usize] + values[plan.slot[b.index()] as usize]
                }
                Op::Mul(a, b) => {
                    values[plan.slot[a.index()] as usize] * values[plan.slot[b.index()] as usize]
                }
                Op::Neg(a) => -values[plan.slot[a.index()] as usize],
                Op::Recip(a) => 1.0 / values[plan.slot[a.index()] as usize],
                Op::Sin(a) => values[plan.slot[a.index()] as usize].sin(),
                Op::Cos(a) => values[plan.slot[a.index()] as usize].cos(),
                Op::Tanh(a) => values[plan.slot[a.index()] as usize].tanh(),
                Op::Exp(a) => values[plan.slot[a.index()] as usize].exp(),
                Op::PowInt(a, k) => values[plan.slot[a.index()] as usize].powi(*k),
                Op::Custom(prim, args) => {
                    scratch.args.clear();
                    for a in args.iter() {
                        scratch.args.push(values[plan.slot[a.index()] as usize]);
                    }
                    (self.primitives[prim.0 as usize].value)(&scratch.args)
                }
            };
            if !v.is_finite() {
                return Err(GraphError::NonFinite { node, value: v });
            }
            values[i] = v;
        }
        for (o, root) in out.iter_mut().zip(plan.roots.iter()) {
            *o = values[plan.slot[root.index()] as usize];
        }
        Ok(())
    }

    /// One-shot evaluation of a single node. Plans internally; use
    /// [`Graph::plan`] + [`Graph::eval_plan`] in loops.
    pub fn eval(&self, node: NodeId, bindings: &Bindings) -> Result<f64, GraphError> {
        let plan = self.plan(&[node]);
        let mut scratch = EvalScratch::new();
        let mut out = [0.0];
        self.eval_plan(&plan, bindings, &mut scratch, &mut out)?;
        Ok(out[0])
    }

    /// One-shot evaluation of several nodes sharing one memo pass.
    pub fn eval_many(&self, nodes: &[NodeId], bindings: &Bindings) -> Result<Vec<f64>, GraphError> {
        let plan = self.plan(nodes);
        let mut scratch = EvalScratch::new();
        let mut out = vec![0.0; nodes.len()];
        self.eval_plan(&plan, bindings, &mut scratch, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_basic_arithmetic() {
        let mut g = Graph::new();
        let (x, xv) = g.var_with_id("x");
        let two = g.constant(2.0);
        let expr = g.mul(two, x);
        let mut b = Bindings::new();
        b.set(xv, 3.0);
        assert_eq!(g.eval(expr, &b).unwrap(), 6.0);
    }

    #[test]
    fn eval_sin_matches_std() {
        let mut g = Graph::new();
        let (x, xv) = g.var_with_id("x");
        let s = g.sin(x);
        let mut b = Bindings::new();
        b.set(xv, 0.5);
        let got = g.eval(s, &b).unwrap();
        assert_eq!(got, 0.5f64.sin());
        assert!((got - 0.479425538604203).abs() < 1e-15);
    }

    #[test]
    fn unbound_variable_is_reported_by_name() {
        let mut g = Graph::new();
        let x = g.var("pressure");
        let err = g.eval(x, &Bindings::new()).unwrap_err();
        match err {
            GraphError::UnboundVariable { name } => assert_eq!(name, "pressure"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_finite_is_reported_with_node() {
        let mut g = Graph::new();
        let (x, xv) = g.var_with_id("x");
        let r = g.recip(x);
        let mut b = Bindings::new();
        b.set(xv, 0.0);
        let err = g.eval(r, &b).unwrap_err();
        match err {
            GraphError::NonFinite { node, .. } => assert_eq!(node, r),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn eval_is_deterministic_bit_for_bit() {
        let mut g = Graph::new();
        let (x, xv) = g.var_with_id("x");
        let (y, yv) = g.var_with_id("y");
        let m = g.mul(x, y);
        let s = g.sin(m);
        let t = g.tanh(x);
        let e = g.add(s, t);
        let mut b = Bindings::new();
        b.set(xv, 0.7312);
        b.set(yv, -1.625);
        let v1 = g.eval(e, &b).unwrap();
        let v2 = g.eval(e, &b).unwrap();
        assert_eq!(v1.to_bits(), v2.to_bits());
    }
}
