//! Time-dependent transport: Lagrangian action, minimizing curves,
//! interpolation families, the Gaussian product example and a brute-force
//! assignment solver for small discrete problems.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::divergence::{is_c_cyclical_monotone, CouplingSample};
use crate::error::{check_dim, Error, Result};
use crate::generator::{dual_coord, weights_from_gaussian, Builtin, Generator};
use crate::geodesic::{CoordSystem, Curve, DEFAULT_GRID};
use crate::simplex::{exp_family, psi, DualCoord, PrimalCoord, SimplexPoint};
use crate::spline::{simpson, CubicSpline};

/// Value of the Lagrangian action of a curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionValue {
    /// Action in nats; +∞ when infeasible.
    pub value: f64,
    /// Whether 1/n + q̇_n stayed positive along the curve.
    pub feasible: bool,
}

fn primal_curve(curve: &Curve) -> Result<()> {
    if curve.coord() != CoordSystem::Primal {
        return Err(Error::InvalidParameter(format!(
            "action needs a curve in primal coordinates, got {}",
            curve.coord()
        )));
    }
    if curve.len() < 2 {
        return Err(Error::InvalidParameter("action needs at least two curve points".into()));
    }
    Ok(())
}

fn resample_grid(curve: &Curve) -> (Vec<f64>, f64) {
    let (t0, t1) = (curve.times()[0], curve.times()[curve.len() - 1]);
    let step = (t1 - t0) / (DEFAULT_GRID - 1) as f64;
    ((0..DEFAULT_GRID).map(|i| t0 + i as f64 * step).collect(), step)
}

fn integrate_lagrangian(n: usize, qn_dot: impl Iterator<Item = f64>, step: f64) -> ActionValue {
    let mut vals = Vec::with_capacity(DEFAULT_GRID);
    for d in qn_dot {
        let arg = 1.0 / n as f64 + d;
        if !(arg > 0.0) {
            return ActionValue { value: f64::INFINITY, feasible: false };
        }
        vals.push(-arg.ln());
    }
    ActionValue { value: simpson(&vals, step), feasible: true }
}

/// A(γ) = ∫ −log(1/n + q̇_n(t)) dt with q(t) = p(γ(0) − γ(t)).
///
/// The curve is interpolated by a cubic spline (Hermite when velocities are
/// stored) and the integral is taken by Simpson's rule on 129 points.
pub fn action(curve: &Curve) -> Result<ActionValue> {
    primal_curve(curve)?;
    let spline = match curve.velocities() {
        Some(v) => CubicSpline::hermite(curve.times(), curve.points(), v)?,
        None => CubicSpline::not_a_knot(curve.times(), curve.points())?,
    };
    let theta0 = curve.first().clone();
    let n = theta0.len() + 1;
    let (grid, step) = resample_grid(curve);
    let qn_dot = grid.iter().map(|&t| {
        let (g, dg, _) = spline.eval_all(t);
        let q = exp_family((&theta0 - g).as_slice());
        // q̇_n = q_n Σ_{i<n} q_i γ̇_i
        q[n - 1] * (0..n - 1).map(|i| q[i] * dg[i]).sum::<f64>()
    });
    Ok(integrate_lagrangian(n, qn_dot, step))
}

/// The same action with q̇_n obtained by differentiating a spline of
/// q_n(t) = exp(−ψ(γ(0) − γ(t))) through the curve's own samples.
pub fn action_alt(curve: &Curve) -> Result<ActionValue> {
    primal_curve(curve)?;
    let theta0 = curve.first().clone();
    let n = theta0.len() + 1;
    let qn: Vec<DVector<f64>> = curve
        .points()
        .iter()
        .map(|g| DVector::from_element(1, (-psi((&theta0 - g).as_slice())).exp()))
        .collect();
    let spline = CubicSpline::not_a_knot(curve.times(), &qn)?;
    let (grid, step) = resample_grid(curve);
    Ok(integrate_lagrangian(n, grid.iter().map(|&t| spline.derivative(t)[0]), step))
}

/// The action minimizer from θ to φ, whose induced q(t) is the straight line
/// from the barycenter to q(1) = p(θ − φ). Velocities are stored exactly.
pub fn minimizing_curve(theta: &PrimalCoord, phi: &DualCoord, grid: &[f64]) -> Result<Curve> {
    check_dim(theta.len(), phi.len())?;
    let m = theta.len();
    let n = (m + 1) as f64;
    let q1 = exp_family((theta.vector() - phi.vector()).as_slice());
    let mix = |t: f64, i: usize| (1.0 - t) / n + t * q1[i];
    let points = grid
        .iter()
        .map(|&t| DVector::from_fn(m, |i, _| theta[i] - (mix(t, i) / mix(t, m)).ln()))
        .collect();
    let vels = grid
        .iter()
        .map(|&t| {
            let dn = (q1[m] - 1.0 / n) / mix(t, m);
            DVector::from_fn(m, |i, _| -((q1[i] - 1.0 / n) / mix(t, i) - dn))
        })
        .collect();
    Curve::new(grid.to_vec(), points, CoordSystem::Primal, Some(vels))
}

/// Which interpolation a family performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpolationKind {
    /// π^(t) = (1−t)·equal-weighted + t·π.
    Displacement,
    /// π^(t) = (1−t)·π + t·market.
    Market,
}

/// A one-parameter family of generators φ^(t), t ∈ [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationFamily {
    kind: InterpolationKind,
    base: Builtin,
    n: usize,
}

/// The member of an interpolation family at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Interpolant {
    pub t: f64,
    pub generator: Builtin,
}

impl Interpolant {
    /// π^(t) as a function on the simplex.
    pub fn portfolio(&self, p: &SimplexPoint) -> DVector<f64> {
        self.generator.portfolio(p)
    }

    /// F^(t): θ ↦ φ^(t)(θ).
    pub fn dual_map(&self, theta: &PrimalCoord) -> Result<DualCoord> {
        dual_coord(&self.generator, theta)
    }
}

/// Displacement interpolation between the equal-weighted portfolio and `gen`.
pub fn displacement_family(gen: &Builtin, n: usize) -> Result<InterpolationFamily> {
    InterpolationFamily::new(InterpolationKind::Displacement, gen, n)
}

/// Linear interpolation between `gen` and the market portfolio.
pub fn market_interpolation(gen: &Builtin, n: usize) -> Result<InterpolationFamily> {
    InterpolationFamily::new(InterpolationKind::Market, gen, n)
}

impl InterpolationFamily {
    pub fn new(kind: InterpolationKind, gen: &Builtin, n: usize) -> Result<Self> {
        gen.validate()?;
        if n < 2 {
            return Err(Error::InvalidParameter("need at least two assets".into()));
        }
        if let Some(d) = gen.dim() {
            check_dim(n, d)?;
        }
        Ok(InterpolationFamily { kind, base: gen.clone(), n })
    }

    pub fn kind(&self) -> InterpolationKind {
        self.kind
    }

    pub fn base(&self) -> &Builtin {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn check_t(t: f64) -> Result<()> {
        if (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("t = {t} is outside [0, 1]")))
        }
    }

    pub fn at(&self, t: f64) -> Result<Interpolant> {
        Self::check_t(t)?;
        let (start, end) = match self.kind {
            InterpolationKind::Displacement => (Builtin::equal_weighted(self.n)?, self.base.clone()),
            InterpolationKind::Market => (self.base.clone(), Builtin::market()),
        };
        let generator = if t == 0.0 {
            start
        } else if t == 1.0 {
            end
        } else {
            Builtin::combination(vec![(1.0 - t, start), (t, end)])?
        };
        Ok(Interpolant { t, generator })
    }

    /// The blended portfolio weights, computed directly from the endpoints.
    pub fn blended_portfolio(&self, t: f64, p: &SimplexPoint) -> Result<DVector<f64>> {
        Self::check_t(t)?;
        check_dim(self.n, p.dim())?;
        let pi = self.base.portfolio(p);
        Ok(match self.kind {
            InterpolationKind::Displacement => {
                pi.map(|w| t * w + (1.0 - t) / self.n as f64)
            }
            InterpolationKind::Market => pi * (1.0 - t) + p.vector() * t,
        })
    }

    /// t ↦ φ^(t)(θ) on a grid, in dual coordinates.
    pub fn trajectory(&self, theta: &PrimalCoord, grid: &[f64]) -> Result<Curve> {
        check_dim(self.n - 1, theta.len())?;
        let points = grid
            .iter()
            .map(|&t| Ok(self.at(t)?.dual_map(theta)?.into_vector()))
            .collect::<Result<Vec<_>>>()?;
        Curve::new(grid.to_vec(), points, CoordSystem::Dual, None)
    }
}

/// Per-marginal statistics of the Gaussian example.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalReport {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub weight: f64,
    /// Coefficient of θ_i in the fitted affine map.
    pub scale: f64,
    /// Constant term of the affine map, −log(w_i/w_n).
    pub shift: f64,
    pub sample_mean: f64,
    /// 4σ_i/√N.
    pub mean_tolerance: f64,
    pub sample_variance: f64,
    /// (1−λ)σ_i², the variance of the target measure Q.
    pub target_variance: f64,
    /// (1−λ)²σ_i², the variance of the image of P under the affine map.
    pub map_variance: f64,
}

impl MarginalReport {
    pub fn mean_ok(&self) -> bool {
        (self.sample_mean - self.b).abs() <= self.mean_tolerance
    }

    /// Sample variance within 5% of the target (1−λ)σ_i².
    pub fn variance_ok(&self) -> bool {
        relative_gap(self.sample_variance, self.target_variance) <= 0.05
    }

    /// Sample variance within 5% of the affine image's variance.
    pub fn map_variance_ok(&self) -> bool {
        relative_gap(self.sample_variance, self.map_variance) <= 0.05
    }
}

fn relative_gap(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

/// Outcome of the Gaussian product example.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianReport {
    pub lambda: f64,
    pub sample_size: usize,
    pub seed: u64,
    pub marginals: Vec<MarginalReport>,
    /// max |F(θ) − ((1−λ)θ + shift)| over the samples.
    pub affinity_residual: f64,
    /// c-cyclical monotonicity of the graph on the first samples.
    pub graph_monotone: bool,
}

impl GaussianReport {
    pub fn affine(&self) -> bool {
        self.affinity_residual <= 1e-12
    }

    pub fn passed(&self) -> bool {
        self.affine()
            && self.graph_monotone
            && self.marginals.iter().all(|m| m.mean_ok() && m.variance_ok())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "marginal",
            "a",
            "b",
            "sigma",
            "lambda",
            "weight",
            "scale",
            "shift",
            "sample_mean",
            "mean_tolerance",
            "sample_variance",
            "target_variance",
            "map_variance",
            "affinity_residual",
        ])?;
        for (i, m) in self.marginals.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                m.a.to_string(),
                m.b.to_string(),
                m.sigma.to_string(),
                self.lambda.to_string(),
                m.weight.to_string(),
                m.scale.to_string(),
                m.shift.to_string(),
                m.sample_mean.to_string(),
                m.mean_tolerance.to_string(),
                m.sample_variance.to_string(),
                m.target_variance.to_string(),
                m.map_variance.to_string(),
                self.affinity_residual.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default seed of the Monte Carlo check.
pub const GAUSSIAN_SEED: u64 = 0x5EED;
/// Default Monte Carlo sample size.
pub const GAUSSIAN_SAMPLES: usize = 100_000;
const CHUNK: usize = 4096;
const MONOTONE_SAMPLES: usize = 10;

/// Pushes samples of ⊗N(a_i, σ_i²) through the dual map of the generalized
/// diversity-weighted portfolio built from `weights_from_gaussian`.
///
/// Sampling runs in fixed-size chunks, each with its own ChaCha stream, so
/// results do not depend on the number of threads.
pub fn gaussian_example_check(
    a: &[f64],
    b: &[f64],
    sigma: &[f64],
    lambda: f64,
    sample_size: usize,
    seed: u64,
) -> Result<GaussianReport> {
    let m = a.len();
    check_dim(m, b.len())?;
    check_dim(m, sigma.len())?;
    if m == 0 || sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter("sigma must be positive".into()));
    }
    if sample_size < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let w = weights_from_gaussian(a, b, lambda)?;
    let gen = Builtin::generalized_diversity(w.clone(), lambda)?;
    let shift: Vec<f64> = (0..m).map(|i| 0.0 - (w[i] / w[m]).ln()).collect();
    let normals: Vec<Normal<f64>> = (0..m)
        .map(|i| Normal::new(a[i], sigma[i]).map_err(|e| Error::InvalidParameter(e.to_string())))
        .collect::<Result<_>>()?;

    let chunks = sample_size.div_ceil(CHUNK);
    let mapped: Vec<Vec<(DVector<f64>, DVector<f64>)>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let len = CHUNK.min(sample_size - k * CHUNK);
            (0..len)
                .map(|_| {
                    let theta = DVector::from_fn(m, |i, _| normals[i].sample(&mut rng));
                    let phi = dual_coord(&gen, &PrimalCoord::from_vector(theta.clone())?)?;
                    Ok((theta, phi.into_vector()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = mapped.into_iter().flatten().collect();

    let mut affinity_residual: f64 = 0.0;
    for (theta, phi) in &pairs {
        for i in 0..m {
            let affine = (1.0 - lambda) * theta[i] + shift[i];
            affinity_residual = affinity_residual.max((phi[i] - affine).abs());
        }
    }
    // Fitted scale from two samples, reported per marginal.
    let (t0, f0) = &pairs[0];
    let (t1, f1) = &pairs[1];
    let nf = pairs.len() as f64;
    let marginals = (0..m)
        .map(|i| {
            let mean = pairs.iter().map(|(_, f)| f[i]).sum::<f64>() / nf;
            let var = pairs.iter().map(|(_, f)| (f[i] - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            MarginalReport {
                a: a[i],
                b: b[i],
                sigma: sigma[i],
                weight: w[i],
                scale: (f1[i] - f0[i]) / (t1[i] - t0[i]),
                shift: shift[i],
                sample_mean: mean,
                mean_tolerance: 4.0 * sigma[i] / nf.sqrt(),
                sample_variance: var,
                target_variance: (1.0 - lambda) * sigma[i] * sigma[i],
                map_variance: (1.0 - lambda).powi(2) * sigma[i] * sigma[i],
            }
        })
        .collect();
    let head = CouplingSample::new(pairs.iter().take(MONOTONE_SAMPLES).cloned().collect())?;
    let graph_monotone = is_c_cyclical_monotone(&head, 5)?;
    Ok(GaussianReport {
        lambda,
        sample_size: pairs.len(),
        seed,
        marginals,
        affinity_residual,
        graph_monotone,
    })
}

fn pair_cost(theta: &DVector<f64>, phi: &DVector<f64>) -> f64 {
    psi((theta - phi).as_slice())
}

/// An assignment of source atoms to target atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    /// `assignment[j]` is the target index matched with source j.
    pub assignment: Vec<usize>,
    /// Σ_j mass_j · c(θ_j, φ_assignment[j]).
    pub cost: f64,
}

/// Largest support handled by [`brute_force_optimal`].
pub const MAX_SUPPORT: usize = 8;

/// Exact optimal coupling of two equal-mass discrete measures by enumerating
/// permutations with branch-and-bound pruning.
pub fn brute_force_optimal(
    sources: &[DVector<f64>],
    targets: &[DVector<f64>],
    masses: &[f64],
) -> Result<Coupling> {
    let k = sources.len();
    if k == 0 {
        return Err(Error::InvalidParameter("empty support".into()));
    }
    if k > MAX_SUPPORT {
        return Err(Error::SupportTooLarge(k));
    }
    check_dim(k, targets.len())?;
    check_dim(k, masses.len())?;
    if masses.iter().any(|w| !(*w > 0.0) || (*w - masses[0]).abs() > 1e-12 * masses[0]) {
        return Err(Error::InvalidParameter("masses must be equal and positive".into()));
    }
    let d = sources[0].len();
    for x in sources.iter().chain(targets) {
        check_dim(d, x.len())?;
    }
    let c: Vec<Vec<f64>> = sources
        .iter()
        .map(|s| targets.iter().map(|t| pair_cost(s, t)).collect())
        .collect();
    let mut best = (f64::INFINITY, Vec::new());
    let mut used = vec![false; k];
    let mut cur = Vec::with_capacity(k);
    search(&c, &mut used, &mut cur, 0.0, &mut best);
    Ok(Coupling { assignment: best.1, cost: best.0 * masses[0] })
}

fn search(c: &[Vec<f64>], used: &mut [bool], cur: &mut Vec<usize>, acc: f64, best: &mut (f64, Vec<usize>)) {
    let row = cur.len();
    if row == c.len() {
        if acc < best.0 {
            *best = (acc, cur.clone());
        }
        return;
    }
    for col in 0..c.len() {
        if used[col] {
            continue;
        }
        let next = acc + c[row][col];
        if next >= best.0 {
            continue;
        }
        used[col] = true;
        cur.push(col);
        search(c, used, cur, next, best);
        cur.pop();
        used[col] = false;
    }
}

/// Cost of coupling `sources[j]` with `targets[perm[j]]` under equal unit masses.
pub fn assignment_cost(sources: &[DVector<f64>], targets: &[DVector<f64>], perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(j, &k)| pair_cost(&sources[j], &targets[k]))
        .sum()
}
