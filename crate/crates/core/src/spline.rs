//! Piecewise cubic interpolation of sampled curves.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Vector-valued piecewise cubic on knots t_0 < … < t_m.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<DVector<f64>>,
    slopes: Vec<DVector<f64>>,
}

impl CubicSpline {
    /// Hermite cubic through given values and first derivatives.
    pub fn hermite(knots: &[f64], values: &[DVector<f64>], slopes: &[DVector<f64>]) -> Result<Self> {
        check_knots(knots, values.len())?;
        if slopes.len() != values.len() {
            return Err(Error::InvalidParameter("one slope per knot required".into()));
        }
        Ok(CubicSpline { knots: knots.to_vec(), values: values.to_vec(), slopes: slopes.to_vec() })
    }

    /// C² interpolating cubic with not-a-knot end conditions. Falls back to
    /// a quadratic/linear interpolant for fewer than four knots.
    pub fn not_a_knot(knots: &[f64], values: &[DVector<f64>]) -> Result<Self> {
        check_knots(knots, values.len())?;
        let m = knots.len();
        let d = values[0].len();
        if m < 4 {
            let slopes = (0..m).map(|i| low_order_slope(knots, values, i)).collect();
            return Ok(CubicSpline { knots: knots.to_vec(), values: values.to_vec(), slopes });
        }
        // Unknown slopes s_i; interior rows enforce C² continuity. The
        // not-a-knot end rows are reduced to tridiagonal form against their
        // neighbouring interior rows.
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let (mut sub, mut diag, mut sup) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 1..m - 1 {
            sub[i] = h[i];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i - 1];
        }
        let (h0, h1) = (h[0], h[1]);
        diag[0] = h1;
        sup[0] = h0 + h1;
        let (g0, g1) = (h[m - 3], h[m - 2]);
        sub[m - 1] = g0 + g1;
        diag[m - 1] = g0;
        let mut slopes = vec![DVector::zeros(d); m];
        for c in 0..d {
            let y: Vec<f64> = values.iter().map(|v| v[c]).collect();
            let del: Vec<f64> = (0..m - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
            let mut rhs = vec![0.0; m];
            for i in 1..m - 1 {
                rhs[i] = 3.0 * (h[i] * del[i - 1] + h[i - 1] * del[i]);
            }
            let r0 = 2.0 * (h1 * h1 * del[0] - h0 * h0 * del[1]);
            rhs[0] = (r0 + h0 * rhs[1]) / (h0 + h1);
            let rl = 2.0 * (g1 * g1 * del[m - 3] - g0 * g0 * del[m - 2]);
            rhs[m - 1] = (g1 * rhs[m - 2] - rl) / (g0 + g1);
            let s = solve_tridiagonal(&sub, &diag, &sup, rhs)?;
            for i in 0..m {
                slopes[i][c] = s[i];
            }
        }
        Ok(CubicSpline { knots: knots.to_vec(), values: values.to_vec(), slopes })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn locate(&self, t: f64) -> usize {
        let m = self.knots.len();
        match self.knots.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(j) => j.min(m - 2),
            Err(j) => j.saturating_sub(1).min(m - 2),
        }
    }

    /// Value, first and second derivative at t (extrapolates the end pieces).
    pub fn eval_all(&self, t: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let j = self.locate(t);
        let h = self.knots[j + 1] - self.knots[j];
        let s = (t - self.knots[j]) / h;
        let (y0, y1) = (&self.values[j], &self.values[j + 1]);
        let (m0, m1) = (&self.slopes[j] * h, &self.slopes[j + 1] * h);
        let (s2, s3) = (s * s, s * s * s);
        let val = y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + &m0 * (s3 - 2.0 * s2 + s)
            + y1 * (-2.0 * s3 + 3.0 * s2)
            + &m1 * (s3 - s2);
        let der = (y0 * (6.0 * s2 - 6.0 * s)
            + &m0 * (3.0 * s2 - 4.0 * s + 1.0)
            + y1 * (-6.0 * s2 + 6.0 * s)
            + &m1 * (3.0 * s2 - 2.0 * s))
            / h;
        let sec = (y0 * (12.0 * s - 6.0)
            + &m0 * (6.0 * s - 4.0)
            + y1 * (-12.0 * s + 6.0)
            + &m1 * (6.0 * s - 2.0))
            / (h * h);
        (val, der, sec)
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        self.eval_all(t).0
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        self.eval_all(t).1
    }
}

/// Thomas algorithm; `sub[0]` and `sup[m-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut b = diag[0];
    for i in 0..m {
        if i > 0 {
            b = diag[i] - sub[i] * c[i - 1];
            rhs[i] -= sub[i] * rhs[i - 1];
        }
        if b == 0.0 || !b.is_finite() {
            return Err(Error::Numerical("spline system is singular".into()));
        }
        c[i] = sup[i] / b;
        rhs[i] /= b;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(rhs)
}

fn check_knots(knots: &[f64], n_values: usize) -> Result<()> {
    if knots.len() < 2 || knots.len() != n_values {
        return Err(Error::InvalidParameter("spline needs at least two knots, one value each".into()));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("spline knots must increase".into()));
    }
    Ok(())
}

fn low_order_slope(knots: &[f64], values: &[DVector<f64>], i: usize) -> DVector<f64> {
    let m = knots.len();
    if m == 2 {
        return (&values[1] - &values[0]) / (knots[1] - knots[0]);
    }
    // Derivative of the quadratic through the three points.
    let (t0, t1, t2) = (knots[0], knots[1], knots[2]);
    let t = knots[i];
    let l0 = (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2));
    let l1 = (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2));
    let l2 = (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
    &values[0] * l0 + &values[1] * l1 + &values[2] * l2
}

/// Composite Simpson rule on an equispaced grid with an even number of intervals.
pub fn simpson(values: &[f64], step: f64) -> f64 {
    let m = values.len() - 1;
    debug_assert!(m % 2 == 0);
    let mut s = values[0] + values[m];
    for (i, v) in values.iter().enumerate().take(m).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * step / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics() {
        let f = |t: f64| DVector::from_vec(vec![t * t * t - 2.0 * t, (1.0 - t).powi(2)]);
        let df = |t: f64| DVector::from_vec(vec![3.0 * t * t - 2.0, -2.0 * (1.0 - t)]);
        let knots: Vec<f64> = (0..9).map(|i| (i as f64 / 8.0).powf(1.3)).collect();
        let vals: Vec<_> = knots.iter().map(|&t| f(t)).collect();
        let sp = CubicSpline::not_a_knot(&knots, &vals).unwrap();
        for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let (v, d, _) = sp.eval_all(t);
            assert!((v - f(t)).amax() < 1e-12);
            assert!((d - df(t)).amax() < 1e-11);
        }
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let vals: Vec<f64> = (0..=8).map(|i| (i as f64 / 8.0).powi(3)).collect();
        assert!((simpson(&vals, 1.0 / 8.0) - 0.25).abs() < 1e-15);
    }
}
