//! Finite-difference checks of the structural ops' backward passes
//! (gather, softmax, interpolation) in isolation.

use pcsod_core::autodiff::Graph;
use pcsod_core::Rng;

fn fd_check<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], analytic: &[f64], h: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x0.len() {
        let mut xp = x0.to_vec();
        let mut xm = x0.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let fd = (f(&xp) - f(&xm)) / (2.0 * h);
        worst = worst.max((analytic[i] - fd).abs());
    }
    worst
}

#[test]
fn row_softmax_backward_fd() {
    let mut rng = Rng::new(9);
    let (m, c) = (5, 7);
    let x0: Vec<f64> = (0..m * c).map(|_| rng.range_f64(-2.0, 2.0)).collect();
    let w: Vec<f64> = (0..m * c).map(|_| rng.range_f64(0.5, 1.5)).collect();
    let eval = |x: &[f64]| -> f64 {
        let mut g: Graph<f64> = Graph::new();
        let xid = g.constant(m, c, x.to_vec());
        let y = g.row_softmax(xid);
        { let l = g.dot_const(y, &w).unwrap(); g.data(l)[0] }
    };
    let mut g: Graph<f64> = Graph::new();
    let xid = g.variable(m, c, x0.clone());
    let y = g.row_softmax(xid);
    let loss = g.dot_const(y, &w).unwrap();
    g.backward(loss).unwrap();
    let worst = fd_check(eval, &x0, g.grad(xid).unwrap(), 1e-6);
    println!("row_softmax worst abs err {worst:.3e}");
    assert!(worst < 1e-8);
}

#[test]
fn group_softmax_backward_fd() {
    let mut rng = Rng::new(10);
    let (m, k, c) = (3, 4, 2);
    let x0: Vec<f64> = (0..m * k * c).map(|_| rng.range_f64(-2.0, 2.0)).collect();
    let w: Vec<f64> = (0..m * k * c).map(|_| rng.range_f64(0.5, 1.5)).collect();
    let eval = |x: &[f64]| -> f64 {
        let mut g: Graph<f64> = Graph::new();
        let xid = g.constant(m * k, c, x.to_vec());
        let y = g.group_softmax(xid, k).unwrap();
        { let l = g.dot_const(y, &w).unwrap(); g.data(l)[0] }
    };
    let mut g: Graph<f64> = Graph::new();
    let xid = g.variable(m * k, c, x0.clone());
    let y = g.group_softmax(xid, k).unwrap();
    let loss = g.dot_const(y, &w).unwrap();
    g.backward(loss).unwrap();
    let worst = fd_check(eval, &x0, g.grad(xid).unwrap(), 1e-6);
    println!("group_softmax worst abs err {worst:.3e}");
    assert!(worst < 1e-8);
}

#[test]
fn interp_backward_fd() {
    let mut rng = Rng::new(11);
    let (m, c, n) = (6, 3, 10);
    let x0: Vec<f64> = (0..m * c).map(|_| rng.range_f64(-2.0, 2.0)).collect();
    let w: Vec<f64> = (0..n * c).map(|_| rng.range_f64(0.5, 1.5)).collect();
    let stencils: Vec<Vec<(u32, f64)>> = (0..n)
        .map(|i| vec![((i % m) as u32, 0.6), (((i + 1) % m) as u32, 0.4)])
        .collect();
    let eval = |x: &[f64]| -> f64 {
        let mut g: Graph<f64> = Graph::new();
        let xid = g.constant(m, c, x.to_vec());
        let y = g.interpolate(xid, &stencils);
        { let l = g.dot_const(y, &w).unwrap(); g.data(l)[0] }
    };
    let mut g: Graph<f64> = Graph::new();
    let xid = g.variable(m, c, x0.clone());
    let y = g.interpolate(xid, &stencils);
    let loss = g.dot_const(y, &w).unwrap();
    g.backward(loss).unwrap();
    let worst = fd_check(eval, &x0, g.grad(xid).unwrap(), 1e-6);
    println!("interp worst abs err {worst:.3e}");
    assert!(worst < 1e-8);
}
