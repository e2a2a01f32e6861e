//! Build a scalar expression graph, evaluate it, and take nested symbolic
//! derivatives. Derivatives are graphs too, so they can be differentiated
//! again and again.

use qpinn::{Bindings, Graph};

fn main() {
    let mut g = Graph::new();
    let (x, xv) = g.var_with_id("x");
    let (y, yv) = g.var_with_id("y");

    // f(x, y) = tanh(x·y) + sin(x)
    let xy = g.mul(x, y);
    let th = g.tanh(xy);
    let sx = g.sin(x);
    let f = g.add(th, sx);

    let mut b = Bindings::new();
    b.set(xv, 0.8);
    b.set(yv, -0.3);
    println!("f(0.8, -0.3)      = {}", g.eval(f, &b).unwrap());

    // first and second derivatives in x, fully symbolic
    let fx = g.differentiate(f, xv);
    let fxx = g.differentiate(fx, xv);
    println!("∂f/∂x             = {}", g.eval(fx, &b).unwrap());
    println!("∂²f/∂x²           = {}", g.eval(fxx, &b).unwrap());

    // a gradient in one reverse sweep; entries agree with differentiate()
    let grads = g.gradient(f, &[xv, yv]);
    println!(
        "∇f                = [{}, {}]",
        g.eval(grads[0], &b).unwrap(),
        g.eval(grads[1], &b).unwrap()
    );

    // mixed third order: ∂³f/∂y∂x²
    let fxxy = g.differentiate(fxx, yv);
    println!("∂³f/∂y∂x²         = {}", g.eval(fxxy, &b).unwrap());

    println!("\ngraph nodes after all derivatives: {}", g.node_count());
    println!("\nDOT of the original expression:\n{}", g.to_dot(&[f]));
}
