//! Symbolic differentiation: derivatives are new nodes in the same graph.

use std::collections::HashMap;

use super::{Graph, NodeId, Op, VarId};

impl Graph {
    /// Partial-derivative graph `∂node/∂wrt`. The result is an ordinary node
    /// and can be differentiated again; nesting composes to any order.
    pub fn differentiate(&mut self, node: NodeId, wrt: VarId) -> NodeId {
        let order = self.topo_order(&[node]);
        let zero = self.constant(0.0);
        let one = self.constant(1.0);
        let mut deriv: HashMap<NodeId, NodeId> = HashMap::with_capacity(order.len());
        for &n in &order {
            let op = self.op(n).clone();
            let d = match op {
                Op::Const(_) => zero,
                Op::Var(v) => {
                    if v == wrt {
                        one
                    } else {
                        zero
                    }
                }
                Op::Add(a, b) => {
                    let (da, db) = (deriv[&a], deriv[&b]);
                    self.add(da, db)
                }
                Op::Mul(a, b) => {
                    let (da, db) = (deriv[&a], deriv[&b]);
                    let ta = self.mul(da, b);
                    let tb = self.mul(a, db);
                    self.add(ta, tb)
                }
                Op::Neg(a) => {
                    let da = deriv[&a];
                    self.neg(da)
                }
                Op::Recip(a) => {
                    // d(1/a) = -da / a^2
                    let da = deriv[&a];
                    let p = self.powi(a, -2);
                    let t = self.mul(da, p);
                    self.neg(t)
                }
                Op::Sin(a) => {
                    let da = deriv[&a];
                    let c = self.cos(a);
                    self.mul(c, da)
                }
                Op::Cos(a) => {
                    let da = deriv[&a];
                    let s = self.sin(a);
                    let t = self.mul(s, da);
                    self.neg(t)
                }
                Op::Tanh(a) => {
                    // 1 - tanh^2, reusing the forward node n
                    let da = deriv[&a];
                    let sq = self.mul(n, n);
                    let one_minus = self.sub(one, sq);
                    self.mul(one_minus, da)
                }
                Op::Exp(a) => {
                    let da = deriv[&a];
                    self.mul(n, da)
                }
                Op::PowInt(a, k) => {
                    let da = deriv[&a];
                    let p = self.powi(a, k - 1);
                    let kc = self.constant(k as f64);
                    let t = self.mul(kc, p);
                    self.mul(t, da)
                }
                Op::Custom(prim_id, args) => {
                    let prim = self.primitives[prim_id.0 as usize].clone();
                    let mut acc = zero;
                    for (i, &arg) in args.iter().enumerate() {
                        let darg = deriv[&arg];
                        if darg == zero {
                            continue;
                        }
                        let partial = (prim.partial)(self, i, &args);
                        let term = self.mul(partial, darg);
                        acc = self.add(acc, term);
                    }
                    acc
                }
            };
            deriv.insert(n, d);
        }
        deriv[&node]
    }

    /// Derivative graphs of `node` with respect to each variable in `wrt`,
    /// produced by one reverse (adjoint) sweep so subgraphs are shared.
    pub fn gradient(&mut self, node: NodeId, wrt: &[VarId]) -> Vec<NodeId> {
        let order = self.topo_order(&[node]);
        let zero = self.constant(0.0);
        let one = self.constant(1.0);
        let n_nodes = self.nodes.len();

        // Only nodes whose subtree contains a requested variable need an
        // adjoint; partial rules for irrelevant children are never built.
        let mut relevant = vec![false; n_nodes];
        let mut kids = Vec::new();
        for &n in &order {
            let r = match self.op(n) {
                Op::Var(v) => wrt.contains(v),
                _ => {
                    self.children(n, &mut kids);
                    kids.iter().any(|c| relevant[c.index()])
                }
            };
            relevant[n.index()] = r;
        }

        let mut adjoint: Vec<Option<NodeId>> = vec![None; n_nodes];
        adjoint[node.index()] = Some(one);
        for &n in order.iter().rev() {
            let a = match adjoint[n.index()] {
                Some(a) if relevant[n.index()] => a,
                _ => continue,
            };
            let op = self.op(n).clone();
            let mut push = |g: &mut Graph, child: NodeId, contrib: NodeId| {
                if !relevant[child.index()] {
                    return;
                }
                let cur = adjoint[child.index()].unwrap_or(zero);
                adjoint[child.index()] = Some(g.add(cur, contrib));
            };
            match op {
                Op::Const(_) | Op::Var(_) => {}
                Op::Add(x, y) => {
                    push(self, x, a);
                    push(self, y, a);
                }
                Op::Mul(x, y) => {
                    let cx = self.mul(a, y);
                    push(self, x, cx);
                    let cy = self.mul(a, x);
                    push(self, y, cy);
                }
                Op::Neg(x) => {
                    let c = self.neg(a);
                    push(self, x, c);
                }
                Op::Recip(x) => {
                    let p = self.powi(x, -2);
                    let t = self.mul(a, p);
                    let c = self.neg(t);
                    push(self, x, c);
                }
                Op::Sin(x) => {
                    let cs = self.cos(x);
                    let c = self.mul(a, cs);
                    push(self, x, c);
                }
                Op::Cos(x) => {
                    let sn = self.sin(x);
                    let t = self.mul(a, sn);
                    let c = self.neg(t);
                    push(self, x, c);
                }
                Op::Tanh(x) => {
                    let sq = self.mul(n, n);
                    let om = self.sub(one, sq);
                    let c = self.mul(a, om);
                    push(self, x, c);
                }
                Op::Exp(x) => {
                    let c = self.mul(a, n);
                    push(self, x, c);
                }
                Op::PowInt(x, k) => {
                    let p = self.powi(x, k - 1);
                    let kc = self.constant(k as f64);
                    let t = self.mul(kc, p);
                    let c = self.mul(a, t);
                    push(self, x, c);
                }
                Op::Custom(prim_id, args) => {
                    let prim = self.primitives[prim_id.0 as usize].clone();
                    for (i, &arg) in args.iter().enumerate() {
                        if !relevant[arg.index()] {
                            continue;
                        }
                        let partial = (prim.partial)(self, i, &args);
                        let c = self.mul(a, partial);
                        push(self, arg, c);
                    }
                }
            }
        }

        wrt.iter()
            .map(|v| {
                let vn = self.var_node(*v);
                adjoint.get(vn.index()).copied().flatten().unwrap_or(zero)
            })
            .collect()
    }

    /// Rebuilds the sub-DAG under `node` with variables replaced according
    /// to `map`. Constant replacements fold through the smart constructors.
    pub fn substitute(&mut self, node: NodeId, map: &HashMap<VarId, NodeId>) -> NodeId {
        let order = self.topo_order(&[node]);
        let mut rebuilt: HashMap<NodeId, NodeId> = HashMap::with_capacity(order.len());
        for &n in &order {
            let op = self.op(n).clone();
            let r = match op {
                Op::Const(_) => n,
                Op::Var(v) => map.get(&v).copied().unwrap_or(n),
                Op::Add(a, b) => {
                    let (ra, rb) = (rebuilt[&a], rebuilt[&b]);
                    self.add(ra, rb)
                }
                Op::Mul(a, b) => {
                    let (ra, rb) = (rebuilt[&a], rebuilt[&b]);
                    self.mul(ra, rb)
                }
                Op::Neg(a) => {
                    let ra = rebuilt[&a];
                    self.neg(ra)
                }
                Op::Recip(a) => {
                    let ra = rebuilt[&a];
                    self.recip(ra)
                }
                Op::Sin(a) => {
                    let ra = rebuilt[&a];
                    self.sin(ra)
                }
                Op::Cos(a) => {
                    let ra = rebuilt[&a];
                    self.cos(ra)
                }
                Op::Tanh(a) => {
                    let ra = rebuilt[&a];
                    self.tanh(ra)
                }
                Op::Exp(a) => {
                    let ra = rebuilt[&a];
                    self.exp(ra)
                }
                Op::PowInt(a, k) => {
                    let ra = rebuilt[&a];
                    self.powi(ra, k)
                }
                Op::Custom(prim_id, args) => {
                    let new_args: Vec<NodeId> = args.iter().map(|a| rebuilt[a]).collect();
                    self.custom(prim_id, &new_args)
                        .expect("arity unchanged under substitution")
                }
            };
            rebuilt.insert(n, r);
        }
        rebuilt[&node]
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Bindings, PrimitiveSpec};
    use super::*;
    use std::sync::Arc;

    fn eval1(g: &Graph, n: NodeId, binds: &[(VarId, f64)]) -> f64 {
        let mut b = Bindings::new();
        for &(v, x) in binds {
            b.set(v, x);
        }
        g.eval(n, &b).unwrap()
    }

    #[test]
    fn derivative_of_square() {
        let mut g = Graph::new();
        let (x, xv) = g.var_with_id("x");
        let sq = g.mul(x, x);
        let d = g.differentiate(sq, xv);
        assert_eq!(eval1(&g, d, &[(xv, 3.0)]), 6.0);
    }

    #[test]
    fn derivative_of_constant_is_zero_constant() {
        let mut g = Graph::new();
        let (_, xv) = g.var_with_id("x");
        let c = g.constant(5.0);
        let d = g.differentiate(c, xv);
        assert_eq!(g.const_value(d), Some(0.0));
    }

    #[test]
    fn second_derivative_of_sin() {
        let mut g = Graph::new();
        let (x, xv) = g.var_with_id("x");
        let s = g.sin(x);
        let d1 = g.differentiate(s, xv);
        let d2 = g.differentiate(d1, xv);
        let got = eval1(&g, d2, &[(xv, 0.7)]);
        assert!((got - (-(0.7f64).sin())).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_bilinear() {
        let mut g = Graph::new();
        let (a, av) = g.var_with_id("a");
        let (b, bv) = g.var_with_id("b");
        let ab = g.mul(a, b);
        let f = g.add(ab, a);
        let grads = g.gradient(f, &[av, bv]);
        assert_eq!(eval1(&g, grads[0], &[(av, 2.0), (bv, 3.0)]), 4.0);
        assert_eq!(eval1(&g, grads[1], &[(av, 2.0), (bv, 3.0)]), 2.0);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let mut g = Graph::new();
        let (_, av) = g.var_with_id("a");
        let c = g.constant(1.0);
        let grads = g.gradient(c, &[av]);
        assert_eq!(g.const_value(grads[0]), Some(0.0));
    }

    #[test]
    fn gradient_of_tanh_product_matches_closed_form() {
        let mut g = Graph::new();
        let (a, av) = g.var_with_id("a");
        let (b, bv) = g.var_with_id("b");
        let ab = g.mul(a, b);
        let f = g.tanh(ab);
        let grads = g.gradient(f, &[av, bv]);
        let expected = 1.0 - 1.0f64.tanh().powi(2); // 0.41997...
        for grad in &grads {
            let got = eval1(&g, *grad, &[(av, 1.0), (bv, 1.0)]);
            assert!((got - expected).abs() < 1e-12, "got {got}, want {expected}");
        }
        // finite-difference cross-check, h = 1e-6
        let h = 1e-6;
        let fd = (eval1(&g, f, &[(av, 1.0 + h), (bv, 1.0)])
            - eval1(&g, f, &[(av, 1.0 - h), (bv, 1.0)]))
            / (2.0 * h);
        let got = eval1(&g, grads[0], &[(av, 1.0), (bv, 1.0)]);
        assert!((got - fd).abs() < 1e-8);
    }

    #[test]
    fn gradient_matches_differentiate() {
        let mut g = Graph::new();
        let (a, av) = g.var_with_id("a");
        let (b, bv) = g.var_with_id("b");
        let ab = g.mul(a, b);
        let s = g.sin(ab);
        let t = g.tanh(a);
        let e = g.exp(b);
        let st = g.mul(s, t);
        let f = g.add(st, e);
        let grads = g.gradient(f, &[av, bv]);
        let da = g.differentiate(f, av);
        let db = g.differentiate(f, bv);
        for &(x, y) in &[(0.3, -0.8), (1.2, 0.5), (-2.0, 1.7)] {
            let binds = [(av, x), (bv, y)];
            assert!((eval1(&g, grads[0], &binds) - eval1(&g, da, &binds)).abs() < 1e-12);
            assert!((eval1(&g, grads[1], &binds) - eval1(&g, db, &binds)).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_partials_commute() {
        let mut g = Graph::new();
        let (x, xv) = g.var_with_id("x");
        let (y, yv) = g.var_with_id("y");
        let xy = g.mul(x, y);
        let s = g.sin(xy);
        let p = g.powi(y, 3);
        let f = g.mul(s, p);
        let dxy = {
            let dx = g.differentiate(f, xv);
            g.differentiate(dx, yv)
        };
        let dyx = {
            let dy = g.differentiate(f, yv);
            g.differentiate(dy, xv)
        };
        for &(a, b) in &[(0.4, 1.1), (-0.9, 0.3), (2.0, -1.5)] {
            let binds = [(xv, a), (yv, b)];
            let v1 = eval1(&g, dxy, &binds);
            let v2 = eval1(&g, dyx, &binds);
            assert!((v1 - v2).abs() < 1e-8, "Schwarz symmetry: {v1} vs {v2}");
        }
    }

    #[test]
    fn custom_primitive_square_differentiates_twice() {
        let mut g = Graph::new();
        let prim = g.register_primitive(PrimitiveSpec {
            name: "square".into(),
            arity: 1,
            value: Arc::new(|args: &[f64]| args[0] * args[0]),
            partial: Arc::new(|g: &mut Graph, _idx, children: &[NodeId]| {
                let two = g.constant(2.0);
                g.mul(two, children[0])
            }),
        });
        let (a, av) = g.var_with_id("a");
        let f = g.custom(prim, &[a]).unwrap();
        let d1 = g.differentiate(f, av);
        let d2 = g.differentiate(d1, av);
        assert_eq!(eval1(&g, d1, &[(av, 5.0)]), 10.0);
        assert_eq!(eval1(&g, d2, &[(av, 5.0)]), 2.0);
    }

    #[test]
    fn custom_primitive_arity_mismatch_errors() {
        let mut g = Graph::new();
        let prim = g.register_primitive(PrimitiveSpec {
            name: "square".into(),
            arity: 1,
            value: Arc::new(|args: &[f64]| args[0] * args[0]),
            partial: Arc::new(|g: &mut Graph, _idx, children: &[NodeId]| {
                let two = g.constant(2.0);
                g.mul(two, children[0])
            }),
        });
        let a = g.var("a");
        let b = g.var("b");
        assert!(g.custom(prim, &[a, b]).is_err());
    }

    #[test]
    fn substitute_variables_with_constants_folds() {
        let mut g = Graph::new();
        let (x, xv) = g.var_with_id("x");
        let (y, yv) = g.var_with_id("y");
        let xy = g.mul(x, y);
        let f = g.sin(xy);
        let half = g.constant(0.5);
        let mut map = HashMap::new();
        map.insert(xv, half);
        let g1 = g.substitute(f, &map);
        // still depends on y
        assert_eq!(eval1(&g, g1, &[(yv, 2.0)]), 1.0f64.sin());
        let two = g.constant(2.0);
        let mut map2 = HashMap::new();
        map2.insert(yv, two);
        let g2 = g.substitute(g1, &map2);
        assert_eq!(g.const_value(g2), Some(1.0f64.sin()));
    }
}
