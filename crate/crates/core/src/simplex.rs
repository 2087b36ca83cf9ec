//! Points of the open simplex, exponential coordinates and the transport cost.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};

/// Smallest admissible simplex entry.
pub const MIN_ENTRY: f64 = 1e-300;
/// Largest deviation of the entry sum from one that is silently renormalized.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A strictly positive probability vector with at least two entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint(DVector<f64>);

impl SimplexPoint {
    /// Validates and (if needed) renormalizes a probability vector.
    pub fn new(p: impl Into<Vec<f64>>) -> Result<Self> {
        let p: Vec<f64> = p.into();
        if p.len() < 2 {
            return Err(Error::InvalidPoint(format!(
                "need at least 2 entries, got {}",
                p.len()
            )));
        }
        for (i, &x) in p.iter().enumerate() {
            if !x.is_finite() || x <= MIN_ENTRY {
                return Err(Error::InvalidPoint(format!(
                    "entry {} = {x} is not strictly positive",
                    i + 1
                )));
            }
        }
        let sum: f64 = p.iter().sum();
        let dev = (sum - 1.0).abs();
        if dev >= SUM_TOLERANCE {
            return Err(Error::InvalidPoint(format!(
                "entries sum to {sum}, off by {dev:e}"
            )));
        }
        let mut v = DVector::from_vec(p);
        // Leave already-normalized inputs bit-identical.
        if dev > v.len() as f64 * f64::EPSILON {
            v /= sum;
        }
        Ok(SimplexPoint(v))
    }

    /// Normalizes an arbitrary positive vector (e.g. capitalizations).
    pub fn from_positive(x: &[f64]) -> Result<Self> {
        if x.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::InvalidPoint("entries must be positive".into()));
        }
        let s: f64 = x.iter().sum();
        Self::new(x.iter().map(|v| v / s).collect::<Vec<_>>())
    }

    pub fn barycenter(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Number of entries n.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    /// Exponential coordinates θ_i = log(p_i / p_n).
    pub fn to_primal(&self) -> PrimalCoord {
        let n = self.dim();
        let ln = self.0[n - 1].ln();
        PrimalCoord(DVector::from_fn(n - 1, |i, _| self.0[i].ln() - ln))
    }

    pub fn from_primal(theta: &PrimalCoord) -> Result<Self> {
        let p = exp_family(theta.as_slice());
        for (i, &x) in p.iter().enumerate() {
            if x <= MIN_ENTRY {
                return Err(Error::InvalidPoint(format!(
                    "entry {} underflows for the given coordinates",
                    i + 1
                )));
            }
        }
        Ok(SimplexPoint(p))
    }

    /// Wraps a vector already known to be a valid interior point.
    pub(crate) fn from_vector_unchecked(v: DVector<f64>) -> Self {
        SimplexPoint(v)
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

macro_rules! coord_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(DVector<f64>);

        impl $name {
            pub fn new(x: impl Into<Vec<f64>>) -> Result<Self> {
                Self::from_vector(DVector::from_vec(x.into()))
            }

            pub fn from_vector(x: DVector<f64>) -> Result<Self> {
                if x.is_empty() {
                    return Err(Error::InvalidParameter("coordinate vector is empty".into()));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("coordinates must be finite".into()));
                }
                Ok($name(x))
            }

            pub fn zeros(len: usize) -> Self {
                $name(DVector::zeros(len))
            }

            /// Number of stored coordinates, n - 1.
            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            /// Dimension n of the simplex the coordinates describe.
            pub fn simplex_dim(&self) -> usize {
                self.0.len() + 1
            }

            pub fn as_slice(&self) -> &[f64] {
                self.0.as_slice()
            }

            pub fn vector(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn into_vector(self) -> DVector<f64> {
                self.0
            }

            /// The n-vector with the implicit trailing zero appended.
            pub fn extended(&self) -> DVector<f64> {
                extend(self.as_slice())
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

coord_type!(
    /// Exponential (primal) coordinates θ, with θ_n = 0 implicit.
    PrimalCoord
);
coord_type!(
    /// Dual coordinates φ, with φ_n = 0 implicit.
    DualCoord
);

/// Appends the implicit zero coordinate.
pub fn extend(x: &[f64]) -> DVector<f64> {
    DVector::from_fn(x.len() + 1, |i, _| if i < x.len() { x[i] } else { 0.0 })
}

/// log(1 + Σ e^{x_i}) via max-shifted log-sum-exp.
pub fn psi(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(0.0_f64, f64::max);
    let s: f64 = (-m).exp() + x.iter().map(|v| (v - m).exp()).sum::<f64>();
    m + s.ln()
}

/// Max-shifted log Σ e^{y_i} over an arbitrary slice.
pub fn log_sum_exp(y: &[f64]) -> f64 {
    let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + y.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// The n-vector (e^{x_i - ψ(x)}, e^{-ψ(x)}), i.e. the point with coordinates x.
pub fn exp_family(x: &[f64]) -> DVector<f64> {
    let m = x.iter().copied().fold(0.0_f64, f64::max);
    let mut v = DVector::from_fn(x.len() + 1, |i, _| {
        if i < x.len() {
            (x[i] - m).exp()
        } else {
            (-m).exp()
        }
    });
    let s = v.sum();
    v /= s;
    v
}

/// Transport cost value together with its normalized form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostValue {
    /// c(θ, φ) = ψ(θ - φ).
    pub c: f64,
    /// c - log n - Σ(θ_i - φ_i)/n, which is non-negative.
    pub normalized: f64,
}

pub fn cost(theta: &PrimalCoord, phi: &DualCoord) -> Result<CostValue> {
    cost_raw(theta.as_slice(), phi.as_slice())
}

pub(crate) fn cost_raw(theta: &[f64], phi: &[f64]) -> Result<CostValue> {
    check_dim(theta.len(), phi.len())?;
    let x: Vec<f64> = theta.iter().zip(phi).map(|(a, b)| a - b).collect();
    let c = psi(&x);
    let n = (x.len() + 1) as f64;
    let normalized = c - n.ln() - x.iter().sum::<f64>() / n;
    Ok(CostValue { c, normalized })
}
