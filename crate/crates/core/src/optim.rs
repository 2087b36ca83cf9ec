//! Small unconstrained minimizers used by the c-transform.

use nalgebra::{DMatrix, DVector};

/// Outcome of a minimization.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Newton with Armijo backtracking. Falls back to a gradient step
/// whenever the Hessian is not positive definite.
pub fn damped_newton<F, G, H>(
    f: F,
    grad: G,
    hess: H,
    x0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Minimum
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
    H: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = grad(&x);
    for it in 0..max_iter {
        let gn = g.amax();
        if gn <= tol {
            return Minimum { x, value: fx, grad_norm: gn, iterations: it, converged: true };
        }
        if !fx.is_finite() || !gn.is_finite() {
            break;
        }
        let dir = match hess(&x).cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -&g,
        };
        let slope = g.dot(&dir);
        let dir = if slope < 0.0 { dir } else { -&g };
        let slope = g.dot(&dir);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-16 {
            let cand = &x + t * &dir;
            let fc = f(&cand);
            if fc.is_finite() && fc <= fx + 1e-4 * t * slope {
                x = cand;
                fx = fc;
                g = grad(&x);
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // Stalled at rounding level; accept if the gradient is nearly zero.
            let gn = g.amax();
            return Minimum { x, value: fx, grad_norm: gn, iterations: it, converged: gn <= tol * 100.0 };
        }
    }
    let gn = g.amax();
    Minimum { x, value: fx, grad_norm: gn, iterations: max_iter, converged: gn <= tol }
}

/// Derivative-free Nelder–Mead simplex search.
pub fn nelder_mead<F>(f: F, x0: &DVector<f64>, step: f64, ftol: f64, max_iter: usize) -> (DVector<f64>, f64)
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x0.len();
    let mut pts: Vec<DVector<f64>> = vec![x0.clone()];
    for i in 0..n {
        let mut p = x0.clone();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(&f).collect();
    for _ in 0..max_iter {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= ftol * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid = pts[..n].iter().fold(DVector::zeros(n), |acc, p| acc + p) / n as f64;
        let reflect = &centroid + (&centroid - &pts[n]);
        let fr = f(&reflect);
        if fr < vals[0] {
            let expand = &centroid + 2.0 * (&centroid - &pts[n]);
            let fe = f(&expand);
            if fe < fr {
                pts[n] = expand;
                vals[n] = fe;
            } else {
                pts[n] = reflect;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = reflect;
            vals[n] = fr;
        } else {
            let contract = if fr < vals[n] {
                &centroid + 0.5 * (&reflect - &centroid)
            } else {
                &centroid + 0.5 * (&pts[n] - &centroid)
            };
            let fc = f(&contract);
            if fc < vals[n].min(fr) {
                pts[n] = contract;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    pts[i] = &pts[0] + 0.5 * (&pts[i] - &pts[0]);
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (pts[best].clone(), vals[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &DVector<f64>) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let (x, v) = nelder_mead(rosen, &DVector::from_vec(vec![-1.2, 1.0]), 0.5, 1e-15, 5000);
        assert!(v < 1e-10, "{v}");
        assert!((x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn newton_quadratic() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let m = damped_newton(
            |x| 0.5 * x.dot(&(&a * x)) - b.dot(x),
            |x| &a * x - &b,
            |_| a.clone(),
            DVector::zeros(2),
            1e-12,
            50,
        );
        assert!(m.converged && m.iterations <= 2);
    }
}
