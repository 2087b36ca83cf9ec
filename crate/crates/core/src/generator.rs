//! Exponentially concave generators, their portfolio maps and the dual map.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fd;
use crate::simplex::{exp_family, log_sum_exp, psi, DualCoord, PrimalCoord, SimplexPoint};

/// A function φ on the open simplex whose exponential e^φ is concave.
///
/// Only `log_gen` and `euclid_grad` are required. Everything else has a
/// finite-difference or compositional default; the built-in families
/// override them with closed forms.
pub trait Generator: Send + Sync {
    fn label(&self) -> String;

    /// Number of assets fixed by the parameters, if any.
    fn dim(&self) -> Option<usize> {
        None
    }

    /// φ(p).
    fn log_gen(&self, p: &SimplexPoint) -> f64;

    /// Euclidean gradient ∇φ(p) as an n-vector.
    fn euclid_grad(&self, p: &SimplexPoint) -> DVector<f64>;

    /// Euclidean Hessian of φ. Only its action on tangent vectors is meaningful.
    fn euclid_hess(&self, p: &SimplexPoint) -> DMatrix<f64> {
        let n = p.dim();
        let basis = tangent_basis(n);
        let h = 1e-5 * p.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        let mut hb = DMatrix::zeros(n, n - 1);
        for k in 0..n - 1 {
            let dir = basis.column(k);
            let plus = SimplexPoint::from_vector_unchecked(p.vector() + h * dir);
            let minus = SimplexPoint::from_vector_unchecked(p.vector() - h * dir);
            let col = (self.euclid_grad(&plus) - self.euclid_grad(&minus)) / (2.0 * h);
            hb.set_column(k, &col);
        }
        let block = basis.transpose() * &hb;
        let block = (&block + block.transpose()) * 0.5;
        &basis * block * basis.transpose()
    }

    /// Portfolio weights π_i = p_i (1 + ∇φ·(e_i − p)).
    fn portfolio(&self, p: &SimplexPoint) -> DVector<f64> {
        let g = self.euclid_grad(p);
        let gp = g.dot(p.vector());
        DVector::from_fn(p.dim(), |i, _| p[i] * (1.0 + g[i] - gp))
    }

    /// f(θ) = φ(p(θ)) + ψ(θ).
    fn f_primal(&self, theta: &[f64]) -> f64 {
        let p = SimplexPoint::from_vector_unchecked(exp_family(theta));
        self.log_gen(&p) + psi(theta)
    }

    /// π as a function of exponential coordinates (n entries).
    fn portfolio_primal(&self, theta: &[f64]) -> DVector<f64> {
        let p = SimplexPoint::from_vector_unchecked(exp_family(theta));
        self.portfolio(&p)
    }

    /// log(π_i/π_n) for i < n.
    fn log_portfolio_ratio(&self, theta: &[f64]) -> DVector<f64> {
        let pi = self.portfolio_primal(theta);
        let m = theta.len();
        let last = pi[m].ln();
        DVector::from_fn(m, |i, _| pi[i].ln() - last)
    }

    /// ∂π_i/∂θ_j for i, j < n, i.e. the Hessian of f.
    fn portfolio_jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let m = theta.len();
        let j = fd::jacobian(
            |x| self.portfolio_primal(x).rows(0, m).into_owned(),
            theta,
            fd::default_step(theta),
        );
        (&j + j.transpose()) * 0.5
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn label(&self) -> String {
        (**self).label()
    }
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }
    fn log_gen(&self, p: &SimplexPoint) -> f64 {
        (**self).log_gen(p)
    }
    fn euclid_grad(&self, p: &SimplexPoint) -> DVector<f64> {
        (**self).euclid_grad(p)
    }
    fn euclid_hess(&self, p: &SimplexPoint) -> DMatrix<f64> {
        (**self).euclid_hess(p)
    }
    fn portfolio(&self, p: &SimplexPoint) -> DVector<f64> {
        (**self).portfolio(p)
    }
    fn f_primal(&self, theta: &[f64]) -> f64 {
        (**self).f_primal(theta)
    }
    fn portfolio_primal(&self, theta: &[f64]) -> DVector<f64> {
        (**self).portfolio_primal(theta)
    }
    fn log_portfolio_ratio(&self, theta: &[f64]) -> DVector<f64> {
        (**self).log_portfolio_ratio(theta)
    }
    fn portfolio_jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        (**self).portfolio_jacobian(theta)
    }
}

/// Weighted component of a [`Builtin::Combination`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub coeff: f64,
    pub generator: Builtin,
}

/// The built-in generator families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum Builtin {
    /// φ ≡ 0; generates the market portfolio. Not regular.
    Market,
    /// φ(p) = Σ w_i log p_i.
    Constant { weights: Vec<f64> },
    /// φ(p) = (1/λ) log Σ p_j^λ.
    Diversity { lambda: f64 },
    /// φ(p) = (1/λ) log Σ w_j p_j^λ.
    GeneralizedDiversity { lambda: f64, weights: Vec<f64> },
    /// φ = Σ c_k φ_k with c on the simplex.
    Combination { components: Vec<Component> },
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )))
    }
}

impl Builtin {
    pub fn market() -> Self {
        Builtin::Market
    }

    pub fn constant_weighted(weights: &SimplexPoint) -> Self {
        Builtin::Constant {
            weights: weights.to_vec(),
        }
    }

    pub fn equal_weighted(n: usize) -> Result<Self> {
        Ok(Self::constant_weighted(&SimplexPoint::barycenter(n)?))
    }

    pub fn diversity(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Builtin::Diversity { lambda })
    }

    pub fn generalized_diversity(weights: Vec<f64>, lambda: f64) -> Result<Self> {
        let g = Builtin::GeneralizedDiversity { lambda, weights };
        g.validate()?;
        Ok(g)
    }

    pub fn combination(parts: Vec<(f64, Builtin)>) -> Result<Self> {
        let g = Builtin::Combination {
            components: parts
                .into_iter()
                .map(|(coeff, generator)| Component { coeff, generator })
                .collect(),
        };
        g.validate()?;
        Ok(g)
    }

    /// Parses and validates a JSON config document.
    pub fn from_json(s: &str) -> Result<Self> {
        let g: Builtin = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("generator config serializes")
    }

    /// Checks parameter constraints (needed after deserialization).
    pub fn validate(&self) -> Result<()> {
        match self {
            Builtin::Market => Ok(()),
            Builtin::Constant { weights } => SimplexPoint::new(weights.clone()).map(|_| ()),
            Builtin::Diversity { lambda } => check_lambda(*lambda),
            Builtin::GeneralizedDiversity { lambda, weights } => {
                check_lambda(*lambda)?;
                if weights.len() < 2 || weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                    return Err(Error::InvalidParameter(
                        "weights must be positive with at least 2 entries".into(),
                    ));
                }
                Ok(())
            }
            Builtin::Combination { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter("empty combination".into()));
                }
                if components.iter().any(|c| !(c.coeff >= 0.0) || !c.coeff.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "combination coefficients must be non-negative".into(),
                    ));
                }
                let s: f64 = components.iter().map(|c| c.coeff).sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "combination coefficients sum to {s}, not 1"
                    )));
                }
                let mut dim = None;
                for c in components {
                    c.generator.validate()?;
                    if let (Some(a), Some(b)) = (dim, c.generator.dim()) {
                        check_dim(a, b)?;
                    }
                    dim = dim.or(c.generator.dim());
                }
                Ok(())
            }
        }
    }
}

/// log Σ w_j p_j^λ and the normalized weights w_i p_i^λ / Σ.
fn power_mix(weights: Option<&[f64]>, lambda: f64, logp: &[f64]) -> (f64, DVector<f64>) {
    let y: Vec<f64> = logp
        .iter()
        .enumerate()
        .map(|(i, lp)| lambda * lp + weights.map_or(0.0, |w| w[i].ln()))
        .collect();
    let lse = log_sum_exp(&y);
    (lse, DVector::from_fn(y.len(), |i, _| (y[i] - lse).exp()))
}

impl Builtin {
    fn gd_parts(&self) -> Option<(f64, Option<&[f64]>)> {
        match self {
            Builtin::Diversity { lambda } => Some((*lambda, None)),
            Builtin::GeneralizedDiversity { lambda, weights } => Some((*lambda, Some(weights))),
            _ => None,
        }
    }
}

impl Generator for Builtin {
    fn label(&self) -> String {
        self.to_string()
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Builtin::Market | Builtin::Diversity { .. } => None,
            Builtin::Constant { weights } | Builtin::GeneralizedDiversity { weights, .. } => {
                Some(weights.len())
            }
            Builtin::Combination { components } => {
                components.iter().find_map(|c| c.generator.dim())
            }
        }
    }

    fn log_gen(&self, p: &SimplexPoint) -> f64 {
        match self {
            Builtin::Market => 0.0,
            Builtin::Constant { weights } => {
                weights.iter().zip(p.as_slice()).map(|(w, x)| w * x.ln()).sum()
            }
            Builtin::Combination { components } => components
                .iter()
                .map(|c| c.coeff * c.generator.log_gen(p))
                .sum(),
            _ => {
                let (lambda, w) = self.gd_parts().unwrap();
                let logp: Vec<f64> = p.as_slice().iter().map(|x| x.ln()).collect();
                power_mix(w, lambda, &logp).0 / lambda
            }
        }
    }

    fn euclid_grad(&self, p: &SimplexPoint) -> DVector<f64> {
        match self {
            Builtin::Market => DVector::zeros(p.dim()),
            Builtin::Constant { weights } => DVector::from_fn(p.dim(), |i, _| weights[i] / p[i]),
            Builtin::Combination { components } => components
                .iter()
                .fold(DVector::zeros(p.dim()), |acc, c| {
                    acc + c.coeff * c.generator.euclid_grad(p)
                }),
            _ => {
                // w_i p_i^{λ-1} / Σ w_j p_j^λ = π_i / p_i
                let pi = self.portfolio(p);
                DVector::from_fn(p.dim(), |i, _| pi[i] / p[i])
            }
        }
    }

    fn euclid_hess(&self, p: &SimplexPoint) -> DMatrix<f64> {
        let n = p.dim();
        match self {
            Builtin::Market => DMatrix::zeros(n, n),
            Builtin::Constant { weights } => {
                DMatrix::from_fn(n, n, |i, j| if i == j { -weights[i] / (p[i] * p[i]) } else { 0.0 })
            }
            Builtin::Combination { components } => components
                .iter()
                .fold(DMatrix::zeros(n, n), |acc, c| {
                    acc + c.coeff * c.generator.euclid_hess(p)
                }),
            _ => {
                let (lambda, _) = self.gd_parts().unwrap();
                let g = self.euclid_grad(p);
                DMatrix::from_fn(n, n, |i, j| {
                    let diag = if i == j { (lambda - 1.0) * g[i] / p[i] } else { 0.0 };
                    diag - lambda * g[i] * g[j]
                })
            }
        }
    }

    fn portfolio(&self, p: &SimplexPoint) -> DVector<f64> {
        match self {
            Builtin::Market => p.vector().clone(),
            Builtin::Constant { weights } => DVector::from_column_slice(weights),
            Builtin::Combination { components } => components
                .iter()
                .fold(DVector::zeros(p.dim()), |acc, c| {
                    acc + c.coeff * c.generator.portfolio(p)
                }),
            _ => {
                let (lambda, w) = self.gd_parts().unwrap();
                let logp: Vec<f64> = p.as_slice().iter().map(|x| x.ln()).collect();
                power_mix(w, lambda, &logp).1
            }
        }
    }

    fn f_primal(&self, theta: &[f64]) -> f64 {
        match self {
            Builtin::Market => psi(theta),
            Builtin::Constant { weights } => {
                weights.iter().zip(theta).map(|(w, t)| w * t).sum()
            }
            Builtin::Combination { components } => components
                .iter()
                .map(|c| c.coeff * c.generator.f_primal(theta))
                .sum(),
            _ => {
                let (lambda, w) = self.gd_parts().unwrap();
                let x: Vec<f64> = theta.iter().copied().chain([0.0]).collect();
                power_mix(w, lambda, &x).0 / lambda
            }
        }
    }

    fn portfolio_primal(&self, theta: &[f64]) -> DVector<f64> {
        match self {
            Builtin::Market => exp_family(theta),
            Builtin::Constant { weights } => DVector::from_column_slice(weights),
            Builtin::Combination { components } => components
                .iter()
                .fold(DVector::zeros(theta.len() + 1), |acc, c| {
                    acc + c.coeff * c.generator.portfolio_primal(theta)
                }),
            _ => {
                let (lambda, w) = self.gd_parts().unwrap();
                let x: Vec<f64> = theta.iter().copied().chain([0.0]).collect();
                power_mix(w, lambda, &x).1
            }
        }
    }

    fn log_portfolio_ratio(&self, theta: &[f64]) -> DVector<f64> {
        let m = theta.len();
        match self {
            Builtin::Market => DVector::from_column_slice(theta),
            Builtin::Constant { weights } => {
                DVector::from_fn(m, |i, _| weights[i].ln() - weights[m].ln())
            }
            Builtin::Diversity { lambda } => DVector::from_fn(m, |i, _| lambda * theta[i]),
            Builtin::GeneralizedDiversity { lambda, weights } => DVector::from_fn(m, |i, _| {
                weights[i].ln() - weights[m].ln() + lambda * theta[i]
            }),
            Builtin::Combination { .. } => {
                let pi = self.portfolio_primal(theta);
                DVector::from_fn(m, |i, _| pi[i].ln() - pi[m].ln())
            }
        }
    }

    fn portfolio_jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let m = theta.len();
        match self {
            Builtin::Constant { .. } => DMatrix::zeros(m, m),
            Builtin::Combination { components } => components
                .iter()
                .fold(DMatrix::zeros(m, m), |acc, c| {
                    acc + c.coeff * c.generator.portfolio_jacobian(theta)
                }),
            _ => {
                let scale = self.gd_parts().map_or(1.0, |(l, _)| l);
                let pi = self.portfolio_primal(theta);
                DMatrix::from_fn(m, m, |i, j| {
                    let d = if i == j { pi[i] } else { 0.0 };
                    scale * (d - pi[i] * pi[j])
                })
            }
        }
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Builtin {
    /// Writes the compact spec-string form accepted by `FromStr`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Market => write!(f, "market"),
            Builtin::Constant { weights } => write!(f, "cw:{}", fmt_list(weights)),
            Builtin::Diversity { lambda } => write!(f, "dw:{lambda}"),
            Builtin::GeneralizedDiversity { lambda, weights } => {
                write!(f, "gdw:{lambda}:{}", fmt_list(weights))
            }
            Builtin::Combination { components } => {
                write!(f, "mix:")?;
                for (k, c) in components.iter().enumerate() {
                    if k > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{}*{}", c.coeff, c.generator)?;
                }
                Ok(())
            }
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("not a number: {x:?}")))
        })
        .collect()
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("not a number: {s:?}")))
}

impl FromStr for Builtin {
    type Err = Error;

    /// Parses `market`, `eqN`, `cw:w1,..`, `dw:λ`, `gdw:λ:w1,..` and
    /// `mix:c1*spec1+c2*spec2` (no nested mixes).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "market" {
            return Ok(Builtin::Market);
        }
        if let Some(n) = s.strip_prefix("eq") {
            let n: usize = n
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad asset count in {s:?}")))?;
            return Builtin::equal_weighted(n);
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("unknown generator {s:?}")))?;
        let g = match kind {
            "cw" => Builtin::Constant {
                weights: SimplexPoint::new(parse_list(rest)?)?.to_vec(),
            },
            "dw" => Builtin::Diversity {
                lambda: parse_num(rest)?,
            },
            "gdw" => {
                let (l, w) = rest.split_once(':').ok_or_else(|| {
                    Error::InvalidParameter("gdw needs lambda:w1,...".into())
                })?;
                Builtin::GeneralizedDiversity {
                    lambda: parse_num(l)?,
                    weights: parse_list(w)?,
                }
            }
            "mix" => {
                let mut components = Vec::new();
                for part in rest.split('+') {
                    let (c, spec) = part.split_once('*').ok_or_else(|| {
                        Error::InvalidParameter(format!("mix term {part:?} needs c*spec"))
                    })?;
                    if spec.trim().starts_with("mix:") {
                        return Err(Error::InvalidParameter(
                            "nested mixes need a JSON config".into(),
                        ));
                    }
                    components.push(Component {
                        coeff: parse_num(c)?,
                        generator: spec.parse()?,
                    });
                }
                Builtin::Combination { components }
            }
            _ => return Err(Error::InvalidParameter(format!("unknown generator {s:?}"))),
        };
        g.validate()?;
        Ok(g)
    }
}

/// Shannon entropy H(p) = -Σ p_i log p_i. Used as a Bregman reference.
#[derive(Clone, Copy, Debug, Default)]
pub struct ShannonEntropy;

impl Generator for ShannonEntropy {
    fn label(&self) -> String {
        "shannon".into()
    }
    fn log_gen(&self, p: &SimplexPoint) -> f64 {
        -p.as_slice().iter().map(|x| x * x.ln()).sum::<f64>()
    }
    fn euclid_grad(&self, p: &SimplexPoint) -> DVector<f64> {
        DVector::from_fn(p.dim(), |i, _| -p[i].ln() - 1.0)
    }
    fn euclid_hess(&self, p: &SimplexPoint) -> DMatrix<f64> {
        DMatrix::from_fn(p.dim(), p.dim(), |i, j| if i == j { -1.0 / p[i] } else { 0.0 })
    }
}

/// Fails when the generator's fixed dimension differs from `n`.
pub fn ensure_dim<G: Generator + ?Sized>(gen: &G, n: usize) -> Result<()> {
    match gen.dim() {
        Some(d) => check_dim(d, n),
        None => Ok(()),
    }
}

/// Orthonormal basis of the hyperplane Σ u_i = 0 (Helmert columns, n × (n-1)).
pub fn tangent_basis(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n - 1, |i, k| {
        let k1 = (k + 1) as f64;
        let norm = (k1 * (k1 + 1.0)).sqrt();
        if i <= k {
            1.0 / norm
        } else if i == k + 1 {
            -k1 / norm
        } else {
            0.0
        }
    })
}

/// Hessian of Φ = e^φ restricted to the tangent hyperplane, in the
/// `tangent_basis` frame.
pub fn concavity_hessian<G: Generator + ?Sized>(gen: &G, p: &SimplexPoint) -> DMatrix<f64> {
    let b = tangent_basis(p.dim());
    let g = gen.euclid_grad(p);
    let h = gen.euclid_hess(p) + &g * g.transpose();
    let m = b.transpose() * h * &b * gen.log_gen(p).exp();
    (&m + m.transpose()) * 0.5
}

/// π(p) as a checked point; fails when a weight leaves (0, 1).
pub fn portfolio_point<G: Generator + ?Sized>(gen: &G, p: &SimplexPoint) -> Result<SimplexPoint> {
    ensure_dim(gen, p.dim())?;
    let w = gen.portfolio(p);
    if w.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NotRegular(format!(
            "{} has a non-positive portfolio weight",
            gen.label()
        )));
    }
    SimplexPoint::new(w.as_slice().to_vec())
}

/// φ_i = θ_i − log(π_i(θ)/π_n(θ)).
pub fn dual_coord<G: Generator + ?Sized>(gen: &G, theta: &PrimalCoord) -> Result<DualCoord> {
    ensure_dim(gen, theta.simplex_dim())?;
    let r = gen.log_portfolio_ratio(theta.as_slice());
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotRegular(format!(
            "{} has a portfolio weight on the boundary",
            gen.label()
        )));
    }
    DualCoord::from_vector(theta.vector() - r)
}

/// Dual Euclidean coordinates p* = p(−φ).
pub fn dual_euclidean<G: Generator + ?Sized>(gen: &G, p: &SimplexPoint) -> Result<SimplexPoint> {
    let phi = dual_coord(gen, &p.to_primal())?;
    SimplexPoint::from_primal(&PrimalCoord::from_vector(-phi.into_vector())?)
}

/// ∂φ/∂θ = I − ∂/∂θ log(π_i/π_n), from the analytic portfolio Jacobian.
pub fn jacobian_dual<G: Generator + ?Sized>(gen: &G, theta: &PrimalCoord) -> Result<DMatrix<f64>> {
    ensure_dim(gen, theta.simplex_dim())?;
    let x = theta.as_slice();
    let j = jacobian_from_parts(&gen.portfolio_primal(x), &gen.portfolio_jacobian(x));
    check_nonsingular(&j)?;
    Ok(j)
}

pub(crate) fn jacobian_from_parts(pi: &DVector<f64>, dpi: &DMatrix<f64>) -> DMatrix<f64> {
    let m = dpi.nrows();
    let pn = pi[m];
    DMatrix::from_fn(m, m, |i, j| {
        let col_sum: f64 = (0..m).map(|k| dpi[(k, j)]).sum();
        let d = if i == j { 1.0 } else { 0.0 };
        d - dpi[(i, j)] / pi[i] - col_sum / pn
    })
}

fn check_nonsingular(j: &DMatrix<f64>) -> Result<()> {
    let det = j.determinant();
    if !(det.abs() > 1e-14) || !det.is_finite() {
        return Err(Error::NotRegular(format!(
            "dual-map Jacobian is singular (det {det:e})"
        )));
    }
    Ok(())
}

/// Solves dual_coord(θ) = φ by damped Newton, optionally warm-started.
pub fn inverse_dual<G: Generator + ?Sized>(
    gen: &G,
    phi: &DualCoord,
    start: Option<&PrimalCoord>,
) -> Result<PrimalCoord> {
    ensure_dim(gen, phi.simplex_dim())?;
    let target = phi.vector();
    let scale = 1.0 + target.amax();
    let residual = |th: &DVector<f64>| -> DVector<f64> {
        th - gen.log_portfolio_ratio(th.as_slice()) - target
    };
    let mut theta = match start {
        Some(s) => {
            check_dim(phi.len(), s.len())?;
            s.vector().clone()
        }
        None => target + gen.log_portfolio_ratio(target.as_slice()),
    };
    let mut r = residual(&theta);
    let mut norm = r.amax();
    let tol = 1e-14 * scale;
    const MAX_ITER: usize = 200;
    for _ in 0..MAX_ITER {
        if !norm.is_finite() {
            break;
        }
        if norm <= tol {
            return PrimalCoord::from_vector(theta);
        }
        let x = theta.as_slice();
        let j = jacobian_from_parts(&gen.portfolio_primal(x), &gen.portfolio_jacobian(x));
        let Some(step) = j.lu().solve(&r) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand = &theta - t * &step;
            let rc = residual(&cand);
            let nc = rc.amax();
            if nc.is_finite() && nc < norm * (1.0 - 1e-4 * t) || (nc <= tol) {
                theta = cand;
                r = rc;
                norm = nc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Rounding floor reached.
            break;
        }
    }
    if norm <= 1e-11 * scale {
        return PrimalCoord::from_vector(theta);
    }
    Err(Error::NoConvergence {
        what: "inverse dual map",
        iterations: MAX_ITER,
        residual: norm,
    })
}

/// Weights (w_1, .., w_{n-1}, 1) with w_i = exp((1−λ)a_i − b_i).
pub fn weights_from_gaussian(a: &[f64], b: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_dim(a.len(), b.len())?;
    Ok(a.iter()
        .zip(b)
        .map(|(ai, bi)| ((1.0 - lambda) * ai - bi).exp())
        .chain([1.0])
        .collect())
}

/// A single point that failed the regularity check.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityFailure {
    pub index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub checked: usize,
    pub failures: Vec<RegularityFailure>,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Relative eigenvalue cut for strict negative definiteness.
pub const REGULARITY_THRESHOLD: f64 = 1e-10;

/// Checks strict concavity of e^φ on the tangent space and interiority of π.
pub fn check_regularity<G: Generator + ?Sized>(
    gen: &G,
    points: &[SimplexPoint],
) -> Result<RegularityReport> {
    let mut failures = Vec::new();
    for (index, p) in points.iter().enumerate() {
        ensure_dim(gen, p.dim())?;
        let h = concavity_hessian(gen, p);
        let eig = h.symmetric_eigen().eigenvalues;
        let scale = eig.amax();
        let top = eig.max();
        if !(top < -REGULARITY_THRESHOLD * scale) || scale == 0.0 {
            failures.push(RegularityFailure {
                index,
                reason: format!("tangent Hessian of e^phi not negative definite (max eigenvalue {top:e})"),
            });
            continue;
        }
        let w = gen.portfolio(p);
        if w.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            failures.push(RegularityFailure {
                index,
                reason: "portfolio weight outside (0, 1)".into(),
            });
        }
    }
    Ok(RegularityReport {
        checked: points.len(),
        failures,
    })
}
