//! Graphviz DOT rendering of a sub-DAG, used by the `--dump-graph` flag.

use std::fmt::Write;

use super::{Graph, NodeId, Op};

impl Graph {
    /// DOT-format text for the sub-DAG reachable from `roots`.
    pub fn to_dot(&self, roots: &[NodeId]) -> String {
        let order = self.topo_order(roots);
        let mut s = String::from("digraph exprgraph {\n  rankdir=BT;\n");
        let mut kids = Vec::new();
        for &n in &order {
            let label = match self.op(n) {
                Op::Const(bits) => format!("{}", f64::from_bits(*bits)),
                Op::Var(v) => self.var_name(*v).to_string(),
                Op::Add(_, _) => "+".into(),
                Op::Mul(_, _) => "*".into(),
                Op::Neg(_) => "neg".into(),
                Op::Recip(_) => "recip".into(),
                Op::Sin(_) => "sin".into(),
                Op::Cos(_) => "cos".into(),
                Op::Tanh(_) => "tanh".into(),
                Op::Exp(_) => "exp".into(),
                Op::PowInt(_, k) => format!("pow {k}"),
                Op::Custom(p, _) => self.primitives[p.0 as usize].name.clone(),
            };
            let _ = writeln!(s, "  n{} [label=\"{}\"];", n.0, label.replace('"', "'"));
            self.children(n, &mut kids);
            for c in &kids {
                let _ = writeln!(s, "  n{} -> n{};", c.0, n.0);
            }
        }
        for &r in roots {
            let _ = writeln!(s, "  n{} [shape=box];", r.0);
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_contains_labels_and_edges() {
        let mut g = Graph::new();
        let x = g.var("x");
        let s = g.sin(x);
        let dot = g.to_dot(&[s]);
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("label=\"x\""));
        assert!(dot.contains("label=\"sin\""));
        assert!(dot.contains("->"));
    }
}
