//! L-divergence in its coordinate representations, Bregman divergence,
//! c-transform, c-divergence and the monotonicity checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::generator::{dual_coord, ensure_dim, inverse_dual, Generator};
use crate::optim::{damped_newton, nelder_mead};
use crate::simplex::{exp_family, log_sum_exp, psi, DualCoord, PrimalCoord, SimplexPoint};

/// Coordinate system a divergence value was computed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Euclidean,
    Primal,
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceValue {
    pub value: f64,
    pub rep: Representation,
}

fn check_points(n: usize, q: &SimplexPoint, p: &SimplexPoint) -> Result<()> {
    check_dim(n, q.dim())?;
    check_dim(n, p.dim())
}

/// T(q|p) = log(Σ π_i(p) q_i/p_i) − (φ(q) − φ(p)).
pub fn l_divergence<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    p: &SimplexPoint,
) -> Result<DivergenceValue> {
    check_points(p.dim(), q, p)?;
    ensure_dim(gen, p.dim())?;
    let pi = gen.portfolio(p);
    let growth: f64 = (0..p.dim()).map(|i| pi[i] * q[i] / p[i]).sum();
    if !(growth > 0.0) {
        return Err(Error::Numerical(format!(
            "portfolio growth {growth} is not positive"
        )));
    }
    Ok(DivergenceValue {
        value: growth.ln() - (gen.log_gen(q) - gen.log_gen(p)),
        rep: Representation::Euclidean,
    })
}

/// T(q|p) = log(1 + ∇φ(p)·(q − p)) − (φ(q) − φ(p)).
pub fn l_divergence_gradient_form<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    p: &SimplexPoint,
) -> Result<f64> {
    check_points(p.dim(), q, p)?;
    let g = gen.euclid_grad(p);
    let arg = 1.0 + g.dot(&(q.vector() - p.vector()));
    if !(arg > 0.0) {
        return Err(Error::Numerical(format!("log argument {arg} is not positive")));
    }
    Ok(arg.ln() - (gen.log_gen(q) - gen.log_gen(p)))
}

/// T in exponential coordinates: log Σ π_ℓ(θ′) e^{θ_ℓ−θ′_ℓ} − (f(θ) − f(θ′)).
pub fn l_divergence_primal<G: Generator + ?Sized>(
    gen: &G,
    theta: &PrimalCoord,
    theta_ref: &PrimalCoord,
) -> Result<DivergenceValue> {
    check_dim(theta.len(), theta_ref.len())?;
    ensure_dim(gen, theta.simplex_dim())?;
    let (x, y) = (theta.as_slice(), theta_ref.as_slice());
    let pi = gen.portfolio_primal(y);
    let terms: Vec<f64> = (0..=x.len())
        .map(|l| {
            let d = if l < x.len() { x[l] - y[l] } else { 0.0 };
            pi[l].ln() + d
        })
        .collect();
    Ok(DivergenceValue {
        value: log_sum_exp(&terms) - (gen.f_primal(x) - gen.f_primal(y)),
        rep: Representation::Primal,
    })
}

/// f*(φ) on the dual graph, together with θ = (dual map)^{-1}(φ).
pub fn f_star_on_graph<G: Generator + ?Sized>(
    gen: &G,
    phi: &DualCoord,
) -> Result<(f64, PrimalCoord)> {
    let theta = inverse_dual(gen, phi, None)?;
    let value = c_raw(theta.as_slice(), phi.as_slice()) - gen.f_primal(theta.as_slice());
    Ok((value, theta))
}

/// T in dual coordinates: log Σ π_ℓ(φ) e^{φ_ℓ−φ′_ℓ} − (f*(φ′) − f*(φ)).
pub fn l_divergence_dual<G: Generator + ?Sized>(
    gen: &G,
    phi: &DualCoord,
    phi_ref: &DualCoord,
) -> Result<DivergenceValue> {
    check_dim(phi.len(), phi_ref.len())?;
    let (fs, theta) = f_star_on_graph(gen, phi)?;
    let (fs_ref, _) = f_star_on_graph(gen, phi_ref)?;
    let pi = gen.portfolio_primal(theta.as_slice());
    let (x, y) = (phi.as_slice(), phi_ref.as_slice());
    let terms: Vec<f64> = (0..=x.len())
        .map(|l| {
            let d = if l < x.len() { x[l] - y[l] } else { 0.0 };
            pi[l].ln() + d
        })
        .collect();
    Ok(DivergenceValue {
        value: log_sum_exp(&terms) - (fs_ref - fs),
        rep: Representation::Dual,
    })
}

/// Bregman divergence ∇φ(p)·(q − p) − (φ(q) − φ(p)).
pub fn bregman<G: Generator + ?Sized>(gen: &G, q: &SimplexPoint, p: &SimplexPoint) -> Result<f64> {
    check_points(p.dim(), q, p)?;
    let g = gen.euclid_grad(p);
    Ok(g.dot(&(q.vector() - p.vector())) - (gen.log_gen(q) - gen.log_gen(p)))
}

/// f(θ) = φ(p(θ)) + ψ(θ).
pub fn f_value<G: Generator + ?Sized>(gen: &G, theta: &PrimalCoord) -> Result<f64> {
    ensure_dim(gen, theta.simplex_dim())?;
    Ok(gen.f_primal(theta.as_slice()))
}

fn c_raw(theta: &[f64], phi: &[f64]) -> f64 {
    let x: Vec<f64> = theta.iter().zip(phi).map(|(a, b)| a - b).collect();
    psi(&x)
}

/// Result of the c-transform minimization.
#[derive(Clone, Debug)]
pub struct CTransform {
    /// f*(φ) = inf_θ ψ(θ − φ) − f(θ).
    pub value: f64,
    /// The minimizing θ.
    pub argmin: PrimalCoord,
    pub iterations: usize,
}

/// Gradient tolerance of the c-transform minimization.
pub const C_TRANSFORM_TOL: f64 = 1e-10;
const C_TRANSFORM_MAX_ITER: usize = 200;

/// Numerical c-transform f*(φ) = inf_θ c(θ, φ) − f(θ).
pub fn c_transform<G: Generator + ?Sized>(gen: &G, phi: &DualCoord) -> Result<CTransform> {
    ensure_dim(gen, phi.simplex_dim())?;
    let m = phi.len();
    let ph = phi.vector().clone();
    let objective = |th: &DVector<f64>| c_raw(th.as_slice(), ph.as_slice()) - gen.f_primal(th.as_slice());
    let grad = |th: &DVector<f64>| {
        let s = exp_family((th - &ph).as_slice());
        let pi = gen.portfolio_primal(th.as_slice());
        DVector::from_fn(m, |i, _| s[i] - pi[i])
    };
    let hess = |th: &DVector<f64>| {
        let s = exp_family((th - &ph).as_slice());
        let h = DMatrix::from_fn(m, m, |i, j| if i == j { s[i] } else { 0.0 } - s[i] * s[j]);
        h - gen.portfolio_jacobian(th.as_slice())
    };

    let mut starts = vec![DVector::zeros(m)];
    if let Ok(th) = inverse_dual(gen, phi, None) {
        starts.insert(0, th.into_vector());
    }
    let x0 = starts
        .into_iter()
        .map(|s| {
            let v = objective(&s);
            (s, v)
        })
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(s, _)| s)
        .ok_or_else(|| Error::Numerical("c-transform objective is not finite".into()))?;

    let res = damped_newton(objective, grad, hess, x0.clone(), C_TRANSFORM_TOL, C_TRANSFORM_MAX_ITER);
    if res.converged {
        return Ok(CTransform {
            value: res.value,
            argmin: PrimalCoord::from_vector(res.x)?,
            iterations: res.iterations,
        });
    }
    // Derivative-free fallback, then a Newton polish from its result.
    let (x, _) = nelder_mead(objective, &x0, 1.0, 1e-15, 20 * C_TRANSFORM_MAX_ITER);
    let res2 = damped_newton(objective, grad, hess, x, C_TRANSFORM_TOL, C_TRANSFORM_MAX_ITER);
    if res2.converged {
        return Ok(CTransform {
            value: res2.value,
            argmin: PrimalCoord::from_vector(res2.x)?,
            iterations: res.iterations + res2.iterations,
        });
    }
    Err(Error::NoConvergence {
        what: "c-transform",
        iterations: C_TRANSFORM_MAX_ITER,
        residual: res2.grad_norm.min(res.grad_norm),
    })
}

/// c-divergence D(p|p′) = c(θ, φ′) − c(θ′, φ′) − (f(θ) − f(θ′)).
pub fn c_divergence<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    p_ref: &SimplexPoint,
) -> Result<f64> {
    check_points(p.dim(), p, p_ref)?;
    let (th, th_ref) = (p.to_primal(), p_ref.to_primal());
    let phi_ref = dual_coord(gen, &th_ref)?;
    Ok(c_raw(th.as_slice(), phi_ref.as_slice())
        - c_raw(th_ref.as_slice(), phi_ref.as_slice())
        - (gen.f_primal(th.as_slice()) - gen.f_primal(th_ref.as_slice())))
}

/// Dual c-divergence D*(p|p′) = c(θ′, φ) − c(θ′, φ′) − (f*(φ) − f*(φ′)),
/// with f* evaluated by [`c_transform`].
pub fn c_divergence_dual<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    p_ref: &SimplexPoint,
) -> Result<f64> {
    check_points(p.dim(), p, p_ref)?;
    let (th, th_ref) = (p.to_primal(), p_ref.to_primal());
    let phi = dual_coord(gen, &th)?;
    let phi_ref = dual_coord(gen, &th_ref)?;
    let fs = c_transform(gen, &phi)?.value;
    let fs_ref = c_transform(gen, &phi_ref)?.value;
    Ok(c_raw(th_ref.as_slice(), phi.as_slice())
        - c_raw(th_ref.as_slice(), phi_ref.as_slice())
        - (fs - fs_ref))
}

/// Self-dual form c(θ, φ′) − f(θ) − f*(φ′), with f* by [`c_transform`].
pub fn c_divergence_self_dual<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    p_ref: &SimplexPoint,
) -> Result<f64> {
    check_points(p.dim(), p, p_ref)?;
    let th = p.to_primal();
    let phi_ref = dual_coord(gen, &p_ref.to_primal())?;
    let fs = c_transform(gen, &phi_ref)?.value;
    Ok(c_raw(th.as_slice(), phi_ref.as_slice()) - gen.f_primal(th.as_slice()) - fs)
}

/// A finite set of (θ, φ) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSample {
    pairs: Vec<(DVector<f64>, DVector<f64>)>,
}

impl CouplingSample {
    pub fn new(pairs: Vec<(DVector<f64>, DVector<f64>)>) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::InvalidParameter("coupling sample is empty".into()))?;
        let m = first.0.len();
        for (a, b) in &pairs {
            check_dim(m, a.len())?;
            check_dim(m, b.len())?;
            if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite coupling entry".into()));
            }
        }
        Ok(CouplingSample { pairs })
    }

    /// Pairs (θ, dual_coord(θ)) on the graph of the dual map.
    pub fn from_graph<G: Generator + ?Sized>(gen: &G, thetas: &[PrimalCoord]) -> Result<Self> {
        let pairs = thetas
            .iter()
            .map(|t| Ok((t.vector().clone(), dual_coord(gen, t)?.into_vector())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[(DVector<f64>, DVector<f64>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Cost matrix C[j][k] = c(θ_j, φ_k).
    pub fn cost_matrix(&self) -> DMatrix<f64> {
        let n = self.pairs.len();
        DMatrix::from_fn(n, n, |j, k| c_raw(self.pairs[j].0.as_slice(), self.pairs[k].1.as_slice()))
    }
}

/// Σ_j c(θ_j, φ_j).
pub fn coupling_cost(sample: &CouplingSample) -> f64 {
    sample
        .pairs
        .iter()
        .map(|(t, p)| c_raw(t.as_slice(), p.as_slice()))
        .sum()
}

/// Largest subset size accepted by the exhaustive check.
pub const MAX_CYCLE: usize = 7;

/// Depth-first search for an assignment of `rows` to `cols` cheaper than `bound`.
fn cheaper_assignment(c: &DMatrix<f64>, rows: &[usize], cols: &mut Vec<usize>, acc: f64, bound: f64) -> bool {
    let depth = rows.len() - cols.len();
    if cols.is_empty() {
        return acc < bound;
    }
    let row = rows[depth];
    for k in 0..cols.len() {
        let col = cols.swap_remove(k);
        let next = acc + c[(row, col)];
        // Lower bound on the remaining rows.
        let rest: f64 = rows[depth + 1..]
            .iter()
            .map(|&r| cols.iter().map(|&cc| c[(r, cc)]).fold(f64::INFINITY, f64::min))
            .sum::<f64>();
        let rest = if cols.is_empty() { 0.0 } else { rest };
        let found = next + rest < bound && cheaper_assignment(c, rows, cols, next, bound);
        cols.push(col);
        let last = cols.len() - 1;
        cols.swap(k, last);
        if found {
            return true;
        }
    }
    false
}

fn for_each_subset(n: usize, size: usize, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == size {
            return f(cur);
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            let stop = rec(i + 1, n, size, cur, f);
            cur.pop();
            if stop {
                return true;
            }
        }
        false
    }
    rec(0, n, size, &mut Vec::with_capacity(size), f)
}

/// Exhaustive c-cyclical monotonicity test over all subsets of size at most
/// `m_max` and all their permutations (slack 1e-10).
pub fn is_c_cyclical_monotone(sample: &CouplingSample, m_max: usize) -> Result<bool> {
    if m_max > MAX_CYCLE {
        return Err(Error::InvalidParameter(format!(
            "m_max {m_max} exceeds {MAX_CYCLE}"
        )));
    }
    let c = sample.cost_matrix();
    let n = sample.len();
    // Permutations of a k-subset that fix points cover all smaller subsets.
    let size = m_max.min(n);
    if size < 2 {
        return Ok(true);
    }
    let violated = for_each_subset(n, size, &mut |rows| {
        let ident: f64 = rows.iter().map(|&j| c[(j, j)]).sum();
        let mut cols = rows.to_vec();
        cheaper_assignment(&c, rows, &mut cols, 0.0, ident - 1e-10)
    });
    Ok(!violated)
}

/// Π_t Σ_i π_i(μ(t)) μ_i(t+1)/μ_i(t) along a closed cycle.
pub fn mcm_product<F>(portfolio: F, cycle: &[SimplexPoint]) -> Result<f64>
where
    F: Fn(&SimplexPoint) -> DVector<f64>,
{
    if cycle.len() < 2 {
        return Err(Error::InvalidParameter("cycle needs at least two points".into()));
    }
    let (first, last) = (&cycle[0], &cycle[cycle.len() - 1]);
    check_dim(first.dim(), last.dim())?;
    if (first.vector() - last.vector()).amax() > 1e-12 {
        return Err(Error::InvalidParameter("cycle does not close".into()));
    }
    let mut log_prod = 0.0;
    for w in cycle.windows(2) {
        check_dim(w[0].dim(), w[1].dim())?;
        let pi = portfolio(&w[0]);
        let s: f64 = (0..w[0].dim()).map(|i| pi[i] * w[1][i] / w[0][i]).sum();
        log_prod += s.ln();
    }
    Ok(log_prod.exp())
}

/// Multiplicative cyclical monotonicity along one cycle (slack 1e-12).
pub fn is_mcm<F>(portfolio: F, cycle: &[SimplexPoint]) -> Result<bool>
where
    F: Fn(&SimplexPoint) -> DVector<f64>,
{
    Ok(mcm_product(portfolio, cycle)? >= 1.0 - 1e-12)
}

/// Cost change c(θ², φ¹) + c(θ³, φ²) − c(θ³, φ¹) − c(θ², φ²) from replacing
/// the graph coupling of (p, q, r) by its cyclic perturbation.
pub fn pyth_transport_gap<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    q: &SimplexPoint,
    r: &SimplexPoint,
) -> Result<f64> {
    check_points(p.dim(), q, p)?;
    check_dim(p.dim(), r.dim())?;
    let th2 = q.to_primal();
    let th3 = r.to_primal();
    let phi1 = dual_coord(gen, &p.to_primal())?;
    let phi2 = dual_coord(gen, &th2)?;
    Ok(c_raw(th2.as_slice(), phi1.as_slice()) + c_raw(th3.as_slice(), phi2.as_slice())
        - c_raw(th3.as_slice(), phi1.as_slice())
        - c_raw(th2.as_slice(), phi2.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{Builtin, ShannonEntropy};

    fn pt(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn excess_growth_example() {
        let g = Builtin::equal_weighted(2).unwrap();
        let t = l_divergence(&g, &pt(&[0.75, 0.25]), &pt(&[0.5, 0.5])).unwrap();
        assert!((t.value + 0.5 * 0.75f64.ln()).abs() < 1e-15);
        assert!((t.value - 0.143841).abs() < 1e-6);
        let p = pt(&[0.3, 0.7]);
        assert!(l_divergence(&g, &p, &p).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn representations_agree() {
        let g = Builtin::generalized_diversity(vec![0.7, 1.3, 1.0], 0.4).unwrap();
        let (q, p) = (pt(&[0.2, 0.5, 0.3]), pt(&[0.6, 0.1, 0.3]));
        let e = l_divergence(&g, &q, &p).unwrap().value;
        let gf = l_divergence_gradient_form(&g, &q, &p).unwrap();
        let pr = l_divergence_primal(&g, &q.to_primal(), &p.to_primal()).unwrap().value;
        let phq = dual_coord(&g, &q.to_primal()).unwrap();
        let php = dual_coord(&g, &p.to_primal()).unwrap();
        let du = l_divergence_dual(&g, &phq, &php).unwrap().value;
        assert!((e - gf).abs() < 1e-12 && (e - pr).abs() < 1e-12 && (e - du).abs() < 1e-12);
    }

    #[test]
    fn numeraire_and_translation_invariance() {
        let w = pt(&[0.2, 0.3, 0.5]);
        let g = Builtin::constant_weighted(&w);
        let (q, p) = (pt(&[0.2, 0.5, 0.3]), pt(&[0.6, 0.1, 0.3]));
        let scale = [2.0, 0.5, 1.5];
        let move_pt = |x: &SimplexPoint| {
            SimplexPoint::from_positive(&(0..3).map(|i| scale[i] * x[i]).collect::<Vec<_>>()).unwrap()
        };
        let a = l_divergence(&g, &q, &p).unwrap().value;
        let b = l_divergence(&g, &move_pt(&q), &move_pt(&p)).unwrap().value;
        assert!((a - b).abs() < 1e-14);
        let shift = |t: PrimalCoord| PrimalCoord::from_vector(t.vector().add_scalar(0.7)).unwrap();
        let c = l_divergence_primal(&g, &shift(q.to_primal()), &shift(p.to_primal())).unwrap().value;
        assert!((a - c).abs() < 1e-14);
    }

    #[test]
    fn bregman_of_entropy_is_relative_entropy() {
        let (q, p) = (pt(&[0.2, 0.5, 0.3]), pt(&[0.6, 0.1, 0.3]));
        let d = bregman(&ShannonEntropy, &q, &p).unwrap();
        let kl: f64 = (0..3).map(|i| q[i] * (q[i] / p[i]).ln()).sum();
        assert!((d - kl).abs() < 1e-14);
    }

    #[test]
    fn c_transform_examples() {
        let eq = Builtin::equal_weighted(4).unwrap();
        let v = c_transform(&eq, &DualCoord::zeros(3)).unwrap().value;
        assert!((v - 4f64.ln()).abs() < 1e-12);
        let w = pt(&[0.1, 0.2, 0.3, 0.4]);
        let cw = Builtin::constant_weighted(&w);
        let phi = DualCoord::new(vec![0.3, -0.4, 1.1]).unwrap();
        let ent: f64 = -w.as_slice().iter().map(|x| x * x.ln()).sum::<f64>();
        let expect = -(0..3).map(|i| w[i] * phi[i]).sum::<f64>() + ent;
        assert!((c_transform(&cw, &phi).unwrap().value - expect).abs() < 1e-12);
    }

    #[test]
    fn c_divergence_identities() {
        let g = Builtin::diversity(0.3).unwrap();
        let (p, pr) = (pt(&[0.2, 0.5, 0.3]), pt(&[0.6, 0.1, 0.3]));
        let t = l_divergence(&g, &p, &pr).unwrap().value;
        assert!((c_divergence(&g, &p, &pr).unwrap() - t).abs() < 1e-12);
        assert!((c_divergence_self_dual(&g, &p, &pr).unwrap() - t).abs() < 1e-12);
        assert!((c_divergence_dual(&g, &pr, &p).unwrap() - t).abs() < 1e-12);
    }

    #[test]
    fn cyclical_monotonicity_examples() {
        let g = Builtin::diversity(0.5).unwrap();
        let thetas: Vec<PrimalCoord> = [[0.1, 0.4], [-1.0, 0.3], [0.8, -0.6], [1.5, 1.2]]
            .iter()
            .map(|t| PrimalCoord::new(t.to_vec()).unwrap())
            .collect();
        let s = CouplingSample::from_graph(&g, &thetas).unwrap();
        assert!(is_c_cyclical_monotone(&s, 7).unwrap());
        let single = CouplingSample::new(vec![s.pairs()[0].clone()]).unwrap();
        assert!(is_c_cyclical_monotone(&single, 7).unwrap());
        let mut pairs = s.pairs().to_vec();
        let tmp = pairs[0].1.clone();
        pairs[0].1 = pairs[1].1.clone();
        pairs[1].1 = tmp;
        assert!(!is_c_cyclical_monotone(&CouplingSample::new(pairs).unwrap(), 7).unwrap());
    }

    #[test]
    fn mcm_examples() {
        let g = Builtin::diversity(0.5).unwrap();
        let a = pt(&[0.3, 0.3, 0.4]);
        assert!(is_mcm(|p| g.portfolio(p), &[a.clone(), a.clone()]).unwrap());
        let cyc = [a.clone(), pt(&[0.1, 0.6, 0.3]), pt(&[0.5, 0.2, 0.3]), a.clone()];
        assert!(is_mcm(|p| g.portfolio(p), &cyc).unwrap());
        // Momentum-style weights π ∝ p² are not generated.
        let sq = |p: &SimplexPoint| {
            let v = p.vector().map(|x| x * x);
            let s = v.sum();
            v / s
        };
        let cyc = [pt(&[0.5, 0.5]), pt(&[0.9, 0.1]), pt(&[0.5, 0.5])];
        assert!(!is_mcm(sq, &cyc).unwrap());
        assert!(mcm_product(sq, &[pt(&[0.5, 0.5]), pt(&[0.9, 0.1])]).is_err());
    }

    #[test]
    fn transport_gap_matches_divergences() {
        let g = Builtin::diversity(0.4).unwrap();
        let (p, q, r) = (pt(&[0.2, 0.5, 0.3]), pt(&[0.6, 0.1, 0.3]), pt(&[0.3, 0.3, 0.4]));
        let gap = pyth_transport_gap(&g, &p, &q, &r).unwrap();
        let t = |a: &SimplexPoint, b: &SimplexPoint| l_divergence(&g, a, b).unwrap().value;
        assert!((gap - (t(&q, &p) + t(&r, &q) - t(&r, &p))).abs() < 1e-12);
        assert!(pyth_transport_gap(&g, &p, &p, &r).unwrap().abs() < 1e-14);
    }
}
