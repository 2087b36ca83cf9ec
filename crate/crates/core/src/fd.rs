//! Central finite differences.

use nalgebra::{DMatrix, DVector};

/// Default step for first derivatives at `x`: 1e-5 · max(1, ‖x‖).
pub fn default_step(x: &[f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    1e-5 * norm.max(1.0)
}

pub fn gradient<F>(f: F, x: &[f64], h: f64) -> DVector<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut y = x.to_vec();
    DVector::from_fn(x.len(), |i, _| {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        (fp - fm) / (2.0 * h)
    })
}

/// Jacobian of a vector map; column j holds ∂F/∂x_j.
pub fn jacobian<F>(f: F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let m = f(x).len();
    let mut out = DMatrix::zeros(m, x.len());
    let mut y = x.to_vec();
    for j in 0..x.len() {
        y[j] = x[j] + h;
        let fp = f(&y);
        y[j] = x[j] - h;
        let fm = f(&y);
        y[j] = x[j];
        out.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    out
}

pub fn hessian<F>(f: F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    let mut y = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                y[i] = x[i] + si * h;
                y[j] = x[j] + sj * h;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}
