use multiphoton::lindblad::*;
use ndarray::Array1;
use ndarray_linalg::Solve;
use num_complex::Complex64 as C64;

fn main() {
    let kappa = 0.5;
    let delta = 0.8 * kappa;
    let drive = 0.3 * kappa;
    let l = driven_cavity_liouvillian(kappa, drive, delta, 10).unwrap();
    let d = l.dim();
    let n = d * d;
    let mut m = l.matrix().clone();
    for col in 0..n {
        m[(0, col)] = C64::new(0.0, 0.0);
    }
    for i in 0..d {
        m[(0, i + d * i)] = C64::new(1.0, 0.0);
    }
    let mut b: Array1<C64> = Array1::zeros(n);
    b[0] = C64::new(1.0, 0.0);
    let x = m.solve(&b).unwrap();
    // residual of raw solution against original L
    let r = l.matrix().dot(&x);
    let rmax = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("raw residual = {rmax:.3e}");
    let rho = unvec_col(&x, d);
    let tr: C64 = rho.diag().iter().sum();
    println!("trace = {tr}");
    // Hermiticity defect of raw solution
    let defect = rho.iter().zip(rho.t().mapv(|z| z.conj()).iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("hermiticity defect = {defect:.3e}");
    // <a> of raw
    let mut mean_a = C64::new(0.0, 0.0);
    for nn in 1..d {
        mean_a += rho[(nn, nn - 1)] * C64::new((nn as f64).sqrt(), 0.0);
    }
    let alpha = C64::new(drive, 0.0) / C64::new(kappa, delta);
    println!("<a> raw = {mean_a}, analytic alpha = {alpha}");
}
