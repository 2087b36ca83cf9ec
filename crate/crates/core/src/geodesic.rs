//! Primal and dual geodesics, gradient flows, inverse exponential maps and
//! the generalized Pythagorean sign test.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DVector;

use crate::divergence::{c_transform, l_divergence, l_divergence_primal};
use crate::error::{check_dim, Error, Result};
use crate::generator::{dual_coord, ensure_dim, inverse_dual, Generator};
use crate::geometry::{gradient_dual_raw, gradient_primal_raw, Connection, LocalFrame};
use crate::simplex::{exp_family, extend, psi, DualCoord, PrimalCoord, SimplexPoint};

/// Default number of stored grid points.
pub const DEFAULT_GRID: usize = 129;

/// Coordinate system of the points stored in a [`Curve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoordSystem {
    Euclidean,
    Primal,
    Dual,
    DualEuclidean,
}

impl CoordSystem {
    pub fn tag(self) -> &'static str {
        match self {
            CoordSystem::Euclidean => "euclidean",
            CoordSystem::Primal => "primal",
            CoordSystem::Dual => "dual",
            CoordSystem::DualEuclidean => "dual_euclidean",
        }
    }
}

impl fmt::Display for CoordSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CoordSystem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "euclidean" => CoordSystem::Euclidean,
            "primal" => CoordSystem::Primal,
            "dual" => CoordSystem::Dual,
            "dual_euclidean" => CoordSystem::DualEuclidean,
            _ => return Err(Error::InvalidParameter(format!("unknown coordinate tag {s:?}"))),
        })
    }
}

/// Equispaced grid of `n` points on [0, 1].
pub fn uniform_grid(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// A sampled path in a declared coordinate system.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    times: Vec<f64>,
    points: Vec<DVector<f64>>,
    coord: CoordSystem,
    velocities: Option<Vec<DVector<f64>>>,
}

impl Curve {
    pub fn new(
        times: Vec<f64>,
        points: Vec<DVector<f64>>,
        coord: CoordSystem,
        velocities: Option<Vec<DVector<f64>>>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != points.len() {
            return Err(Error::InvalidParameter(
                "curve needs as many points as times".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("curve times must increase".into()));
        }
        let d = points[0].len();
        for p in &points {
            check_dim(d, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("curve point is not finite".into()));
            }
        }
        if let Some(v) = &velocities {
            check_dim(points.len(), v.len())?;
            for x in v {
                check_dim(d, x.len())?;
            }
        }
        Ok(Curve { times, points, coord, velocities })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn velocities(&self) -> Option<&[DVector<f64>]> {
        self.velocities.as_deref()
    }

    pub fn coord(&self) -> CoordSystem {
        self.coord
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> &DVector<f64> {
        &self.points[0]
    }

    pub fn last(&self) -> &DVector<f64> {
        &self.points[self.points.len() - 1]
    }

    /// Converts primal points to the simplex, and dual points to dual
    /// Euclidean coordinates p* = p(−φ).
    pub fn to_simplex(&self) -> Result<Curve> {
        let (coord, sign) = match self.coord {
            CoordSystem::Primal => (CoordSystem::Euclidean, 1.0),
            CoordSystem::Dual => (CoordSystem::DualEuclidean, -1.0),
            _ => return Ok(self.clone()),
        };
        let points = self
            .points
            .iter()
            .map(|x| exp_family((x * sign).as_slice()))
            .collect();
        Curve::new(self.times.clone(), points, coord, None)
    }

    /// Writes CSV with header `t,<tag>_1,..,<tag>_d`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.points[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("{}_{i}", self.coord.tag())));
        w.write_record(&header)?;
        for (t, p) in self.times.iter().zip(&self.points) {
            let mut rec = vec![t.to_string()];
            rec.extend(p.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Curve> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let first = header
            .get(1)
            .ok_or_else(|| Error::Parse { line: 1, message: "missing coordinate columns".into() })?;
        let tag = first
            .rsplit_once('_')
            .map(|(t, _)| t)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("bad column {first:?}") })?;
        let coord: CoordSystem = tag.parse()?;
        let (mut times, mut points) = (Vec::new(), Vec::new());
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: k + 2, message: e.to_string() })?;
            times.push(vals[0]);
            points.push(DVector::from_column_slice(&vals[1..]));
        }
        Curve::new(times, points, coord, None)
    }
}

/// Distance from `x` to the segment [a, b].
pub fn point_segment_distance(x: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let d = b - a;
    let dd = d.norm_squared();
    if dd == 0.0 {
        return (x - a).norm();
    }
    let s = ((x - a).dot(&d) / dd).clamp(0.0, 1.0);
    (x - (a + d * s)).norm()
}

/// Largest distance from the curve points to the straight segment joining
/// its endpoints.
pub fn collinearity_residual(points: &[DVector<f64>]) -> f64 {
    let (a, b) = (&points[0], &points[points.len() - 1]);
    points
        .iter()
        .map(|x| point_segment_distance(x, a, b))
        .fold(0.0, f64::max)
}

fn polyline_distance(x: &DVector<f64>, line: &[DVector<f64>]) -> f64 {
    if line.len() == 1 {
        return (x - &line[0]).norm();
    }
    line.windows(2)
        .map(|w| point_segment_distance(x, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric Hausdorff distance between two polylines.
pub fn hausdorff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let ab = a.iter().map(|x| polyline_distance(x, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|x| polyline_distance(x, a)).fold(0.0, f64::max);
    ab.max(ba)
}

/// Closed-form geodesic x_k(t) = ±log((1−h(t))a_k + h(t)b_k), with the time
/// change h tabulated on a fine grid.
#[derive(Clone, Debug)]
pub struct Geodesic {
    kind: Connection,
    a: DVector<f64>,
    b: DVector<f64>,
    tau: Vec<f64>,
    h: Vec<f64>,
    dh: Vec<f64>,
    d2h: Vec<f64>,
    total_time: f64,
}

/// Steps of the tabulation in h.
const H_STEPS: usize = 2048;
/// Nodes between Fenchel-equality checks on dual geodesics.
const RANGE_CHECK_EVERY: usize = 64;

fn g_term(pi: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>, h: f64) -> f64 {
    (0..a.len())
        .map(|l| {
            let e = (1.0 - h) * a[l] + h * b[l];
            pi[l] * (b[l] - a[l]) / e
        })
        .sum()
}

/// Nodes h_0 = 0 < … < h_m = 1 equidistributing h + Σ_k |log(E_k(h)/a_k)|,
/// interleaved with their midpoints (2m + 1 values).
fn graded_nodes(a: &DVector<f64>, b: &DVector<f64>, count: usize) -> Vec<f64> {
    let m = count / 2;
    let grade = |h: f64| -> f64 {
        h + (0..a.len())
            .map(|k| (((1.0 - h) * a[k] + h * b[k]) / a[k]).ln().abs())
            .sum::<f64>()
    };
    let total = grade(1.0);
    let mut main = vec![0.0; m + 1];
    main[m] = 1.0;
    for (j, node) in main.iter_mut().enumerate().take(m).skip(1) {
        let target = total * j as f64 / m as f64;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if grade(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        *node = 0.5 * (lo + hi);
    }
    let mut nodes = Vec::with_capacity(2 * m + 1);
    for w in main.windows(2) {
        nodes.push(w[0]);
        nodes.push(0.5 * (w[0] + w[1]));
    }
    nodes.push(1.0);
    nodes
}

impl Geodesic {
    fn build<F>(kind: Connection, a: DVector<f64>, b: DVector<f64>, mut pi_at: F) -> Result<Self>
    where
        F: FnMut(usize, f64) -> Result<DVector<f64>>,
    {
        // h is the independent variable: dL/dh = −2G(h), dt/dh = e^L, with
        // L = log(dt/dh) and h'(0) = 1 before rescaling. Nodes are graded so
        // each step covers a similar change of the coordinates.
        let m = H_STEPS;
        let nodes = graded_nodes(&a, &b, 2 * m);
        let mut g = Vec::with_capacity(2 * m + 1);
        for (k, &h) in nodes.iter().enumerate() {
            let pi = pi_at(k, h)?;
            let v = g_term(&pi, &a, &b, h);
            if !v.is_finite() {
                return Err(Error::Integration {
                    t: h,
                    reason: "time-change equation is not finite".into(),
                });
            }
            g.push(v);
        }
        let mut l = vec![0.0_f64; m + 1];
        let mut t = vec![0.0_f64; m + 1];
        for j in 0..m {
            let (g0, g1, g2) = (g[2 * j], g[2 * j + 1], g[2 * j + 2]);
            let step = nodes[2 * j + 2] - nodes[2 * j];
            let k1l = -2.0 * g0;
            let k1t = l[j].exp();
            let k2l = -2.0 * g1;
            let k2t = (l[j] + 0.5 * step * k1l).exp();
            let k3l = -2.0 * g1;
            let k3t = (l[j] + 0.5 * step * k2l).exp();
            let k4l = -2.0 * g2;
            let k4t = (l[j] + step * k3l).exp();
            l[j + 1] = l[j] + step / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
            t[j + 1] = t[j] + step / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
            if !l[j + 1].is_finite() || !t[j + 1].is_finite() {
                return Err(Error::Integration {
                    t: nodes[2 * j],
                    reason: "time-change integration overflowed".into(),
                });
            }
        }
        let total = t[m];
        let tau: Vec<f64> = t.iter().map(|x| x / total).collect();
        let h: Vec<f64> = (0..=m).map(|j| nodes[2 * j]).collect();
        let dh: Vec<f64> = l.iter().map(|lj| total * (-lj).exp()).collect();
        let d2h: Vec<f64> = (0..=m).map(|j| 2.0 * dh[j] * dh[j] * g[2 * j]).collect();
        Ok(Geodesic { kind, a, b, tau, h, dh, d2h, total_time: total })
    }

    /// Unscaled travel time when h'(0) = 1.
    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn kind(&self) -> Connection {
        self.kind
    }

    /// (h, h', h'') at normalized time t ∈ [0, 1] by quintic Hermite interpolation.
    pub fn time_change(&self, t: f64) -> (f64, f64, f64) {
        let t = t.clamp(0.0, 1.0);
        let j = match self.tau.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(j) => j.min(self.tau.len() - 2),
            Err(j) => j.saturating_sub(1).min(self.tau.len() - 2),
        };
        let d = self.tau[j + 1] - self.tau[j];
        let s = (t - self.tau[j]) / d;
        let (y0, y1) = (self.h[j], self.h[j + 1]);
        let (v0, v1) = (self.dh[j] * d, self.dh[j + 1] * d);
        let (a0, a1) = (self.d2h[j] * d * d, self.d2h[j + 1] * d * d);
        // Coefficients of the quintic in s.
        let c0 = y0;
        let c1 = v0;
        let c2 = 0.5 * a0;
        let c3 = 10.0 * (y1 - y0) - 6.0 * v0 - 4.0 * v1 - 1.5 * a0 + 0.5 * a1;
        let c4 = -15.0 * (y1 - y0) + 8.0 * v0 + 7.0 * v1 + 1.5 * a0 - a1;
        let c5 = 6.0 * (y1 - y0) - 3.0 * (v0 + v1) - 0.5 * a0 + 0.5 * a1;
        let val = c0 + s * (c1 + s * (c2 + s * (c3 + s * (c4 + s * c5))));
        let der = c1 + s * (2.0 * c2 + s * (3.0 * c3 + s * (4.0 * c4 + s * 5.0 * c5)));
        let sec = 2.0 * c2 + s * (6.0 * c3 + s * (12.0 * c4 + s * 20.0 * c5));
        (val, der / d, sec / (d * d))
    }

    fn sign(&self) -> f64 {
        match self.kind {
            Connection::Primal => 1.0,
            Connection::Dual => -1.0,
        }
    }

    fn coords_at_h(&self, h: f64) -> DVector<f64> {
        let m = self.a.len() - 1;
        DVector::from_fn(m, |k, _| self.sign() * ((1.0 - h) * self.a[k] + h * self.b[k]).ln())
    }

    /// Coordinates (θ for primal, φ for dual) at normalized time t.
    pub fn position(&self, t: f64) -> DVector<f64> {
        self.coords_at_h(self.time_change(t).0)
    }

    pub fn velocity(&self, t: f64) -> DVector<f64> {
        let (h, dh, _) = self.time_change(t);
        let m = self.a.len() - 1;
        DVector::from_fn(m, |k, _| {
            let e = (1.0 - h) * self.a[k] + h * self.b[k];
            self.sign() * dh * (self.b[k] - self.a[k]) / e
        })
    }

    pub fn sample(&self, grid: &[f64]) -> Result<Curve> {
        let coord = match self.kind {
            Connection::Primal => CoordSystem::Primal,
            Connection::Dual => CoordSystem::Dual,
        };
        Curve::new(
            grid.to_vec(),
            grid.iter().map(|&t| self.position(t)).collect(),
            coord,
            Some(grid.iter().map(|&t| self.velocity(t)).collect()),
        )
    }
}

fn exp_ext(x: &DVector<f64>, sign: f64) -> DVector<f64> {
    extend((x * sign).as_slice()).map(f64::exp)
}

/// Closed-form primal geodesic from q to r.
pub fn primal_geodesic_path<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    r: &SimplexPoint,
) -> Result<Geodesic> {
    check_dim(q.dim(), r.dim())?;
    ensure_dim(gen, q.dim())?;
    let a = exp_ext(q.to_primal().vector(), 1.0);
    let b = exp_ext(r.to_primal().vector(), 1.0);
    let (a2, b2) = (a.clone(), b.clone());
    Geodesic::build(Connection::Primal, a, b, move |_, h| {
        let theta: Vec<f64> = (0..a2.len() - 1)
            .map(|k| ((1.0 - h) * a2[k] + h * b2[k]).ln())
            .collect();
        Ok(gen.portfolio_primal(&theta))
    })
}

pub fn primal_geodesic<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    r: &SimplexPoint,
    grid: &[f64],
) -> Result<Curve> {
    primal_geodesic_path(gen, q, r)?.sample(grid)
}

/// Closed-form dual geodesic from q to p, guarded against leaving the dual range.
pub fn dual_geodesic_path<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    p: &SimplexPoint,
) -> Result<Geodesic> {
    check_dim(q.dim(), p.dim())?;
    ensure_dim(gen, q.dim())?;
    let tq = q.to_primal();
    let fq = dual_coord(gen, &tq)?;
    let fp = dual_coord(gen, &p.to_primal())?;
    let a = exp_ext(fq.vector(), -1.0);
    let b = exp_ext(fp.vector(), -1.0);
    let (a2, b2) = (a.clone(), b.clone());
    let mut warm = tq;
    Geodesic::build(Connection::Dual, a, b, move |k, h| {
        let phi = DualCoord::from_vector(DVector::from_fn(a2.len() - 1, |i, _| {
            -((1.0 - h) * a2[i] + h * b2[i]).ln()
        }))?;
        let theta = inverse_dual(gen, &phi, Some(&warm))
            .map_err(|_| Error::OutsideDualRange { t: h })?;
        if k % RANGE_CHECK_EVERY == 0 {
            let fs = c_transform(gen, &phi).map_err(|_| Error::OutsideDualRange { t: h })?;
            let gap = psi((theta.vector() - phi.vector()).as_slice())
                - gen.f_primal(theta.as_slice())
                - fs.value;
            if gap.abs() > 1e-6 {
                return Err(Error::OutsideDualRange { t: h });
            }
        }
        let pi = gen.portfolio_primal(theta.as_slice());
        warm = theta;
        Ok(pi)
    })
}

pub fn dual_geodesic<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    p: &SimplexPoint,
    grid: &[f64],
) -> Result<Curve> {
    dual_geodesic_path(gen, q, p)?.sample(grid)
}

/// RK4-integrated geodesic together with the squared metric speed per sample.
#[derive(Clone, Debug)]
pub struct IntegratedGeodesic {
    pub curve: Curve,
    pub energy: Vec<f64>,
}

/// Blow-up threshold on coordinates.
const BLOW_UP: f64 = 1e3;

struct PiTracker<'a, G: ?Sized> {
    gen: &'a G,
    which: Connection,
    warm: Option<PrimalCoord>,
}

impl<G: Generator + ?Sized> PiTracker<'_, G> {
    fn frame_pi(&mut self, x: &DVector<f64>) -> Result<(DVector<f64>, PrimalCoord)> {
        let theta = match self.which {
            Connection::Primal => PrimalCoord::from_vector(x.clone())?,
            Connection::Dual => {
                let phi = DualCoord::from_vector(x.clone())?;
                inverse_dual(self.gen, &phi, self.warm.as_ref())?
            }
        };
        self.warm = Some(theta.clone());
        Ok((self.gen.portfolio_primal(theta.as_slice()), theta))
    }
}

fn geodesic_accel(pi: &DVector<f64>, v: &DVector<f64>, which: Connection) -> DVector<f64> {
    let m = v.len();
    let s: f64 = (0..m).map(|l| pi[l] * v[l]).sum();
    let sign = match which {
        Connection::Primal => 1.0,
        Connection::Dual => -1.0,
    };
    // −Γ^k_ij v_i v_j with Γ from the closed forms.
    DVector::from_fn(m, |k, _| -sign * (v[k] * v[k] - 2.0 * v[k] * s))
}

/// Fixed-step RK4 on the geodesic equation x″_k + Γ^k_ij x′_i x′_j = 0 over t ∈ [0, 1].
pub fn integrate_geodesic<G: Generator + ?Sized>(
    gen: &G,
    start: &DVector<f64>,
    velocity: &DVector<f64>,
    which: Connection,
    steps: usize,
) -> Result<IntegratedGeodesic> {
    check_dim(start.len(), velocity.len())?;
    ensure_dim(gen, start.len() + 1)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let mut tracker = PiTracker { gen, which, warm: None };
    let dt = 1.0 / steps as f64;
    let (mut x, mut v) = (start.clone(), velocity.clone());
    let energy_at = |tracker: &mut PiTracker<'_, G>, x: &DVector<f64>, v: &DVector<f64>| -> Result<f64> {
        let (_, theta) = tracker.frame_pi(x)?;
        let frame = LocalFrame::from_primal(gen, &theta)?;
        let g = frame.metric(which);
        Ok(g.inner(v, v))
    };
    let mut times = vec![0.0];
    let mut points = vec![x.clone()];
    let mut vels = vec![v.clone()];
    let mut energy = vec![energy_at(&mut tracker, &x, &v)?];
    for step in 0..steps {
        let t = step as f64 * dt;
        let fail = |e: Error| match e {
            Error::Integration { .. } => e,
            other => Error::Integration { t, reason: other.to_string() },
        };
        let mut acc = |x: &DVector<f64>, v: &DVector<f64>| -> Result<DVector<f64>> {
            let (pi, _) = tracker.frame_pi(x)?;
            Ok(geodesic_accel(&pi, v, which))
        };
        let k1x = v.clone();
        let k1v = acc(&x, &v).map_err(fail)?;
        let x2 = &x + &k1x * (0.5 * dt);
        let v2 = &v + &k1v * (0.5 * dt);
        let k2v = acc(&x2, &v2).map_err(fail)?;
        let x3 = &x + &v2 * (0.5 * dt);
        let v3 = &v + &k2v * (0.5 * dt);
        let k3v = acc(&x3, &v3).map_err(fail)?;
        let x4 = &x + &v3 * dt;
        let v4 = &v + &k3v * dt;
        let k4v = acc(&x4, &v4).map_err(fail)?;
        x += (&k1x + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
        v += (&k1v + &k2v * 2.0 + &k3v * 2.0 + &k4v) * (dt / 6.0);
        if !(x.amax() <= BLOW_UP) || !(v.amax() <= BLOW_UP) {
            return Err(Error::Integration { t: t + dt, reason: "solution blew up".into() });
        }
        times.push(t + dt);
        points.push(x.clone());
        vels.push(v.clone());
        energy.push(energy_at(&mut tracker, &x, &v).map_err(fail)?);
    }
    let coord = match which {
        Connection::Primal => CoordSystem::Primal,
        Connection::Dual => CoordSystem::Dual,
    };
    Ok(IntegratedGeodesic {
        curve: Curve::new(times, points, coord, Some(vels))?,
        energy,
    })
}

/// −grad T(target|·)(q) (primal) or −grad T(·|target)(q) (dual), in the
/// chart of `which` and normalized to unit metric length. Zero if target = q.
pub fn inverse_exp<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    target: &SimplexPoint,
    which: Connection,
) -> Result<DVector<f64>> {
    check_dim(q.dim(), target.dim())?;
    let frame = LocalFrame::at(gen, q)?;
    let dir = match which {
        Connection::Primal => {
            let diff = target.to_primal().vector() - &frame.theta;
            -gradient_primal_raw(&frame.pi, &diff)
        }
        Connection::Dual => {
            let fp = dual_coord(gen, &target.to_primal())?;
            -gradient_dual_raw(&frame.pi, &(&frame.phi - fp.vector()))
        }
    };
    let norm = frame.metric(which).norm(&dir);
    if norm == 0.0 {
        return Ok(dir);
    }
    Ok(dir / norm)
}

/// Result of shooting a geodesic from q at a target.
#[derive(Clone, Debug)]
pub struct Shot {
    /// Initial velocity exp_q^{-1}(target).
    pub velocity: DVector<f64>,
    /// Scale applied to the unit direction.
    pub scale: f64,
    pub geodesic: IntegratedGeodesic,
    /// Distance from the endpoint to the target in Euclidean (primal) or
    /// dual Euclidean (dual) coordinates.
    pub miss: f64,
}

/// Finds exp_q^{-1}(target) by a 1-D search on the scale of [`inverse_exp`].
pub fn shoot<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    target: &SimplexPoint,
    which: Connection,
    steps: usize,
) -> Result<Shot> {
    let dir = inverse_exp(gen, q, target, which)?;
    let (start, sign, goal) = match which {
        Connection::Primal => (q.to_primal().into_vector(), 1.0, target.to_primal().into_vector()),
        Connection::Dual => (
            dual_coord(gen, &q.to_primal())?.into_vector(),
            -1.0,
            dual_coord(gen, &target.to_primal())?.into_vector(),
        ),
    };
    let a = exp_family((&start * sign).as_slice());
    let b = exp_family((&goal * sign).as_slice());
    let chord = &b - &a;
    let len2 = chord.norm_squared();
    // Fraction of the chord covered by the endpoint, or None on blow-up.
    let reach = |kappa: f64| -> Result<Option<(f64, IntegratedGeodesic)>> {
        match integrate_geodesic(gen, &start, &(&dir * kappa), which, steps) {
            Ok(run) => {
                let end = exp_family((run.curve.last() * sign).as_slice());
                Ok(Some(((&end - &a).dot(&chord) / len2, run)))
            }
            Err(Error::Integration { .. }) | Err(Error::NoConvergence { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    if len2 == 0.0 {
        let run = integrate_geodesic(gen, &start, &DVector::zeros(start.len()), which, steps)?;
        return Ok(Shot { velocity: DVector::zeros(start.len()), scale: 0.0, geodesic: run, miss: 0.0 });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut s_lo = 0.0;
    let mut best = None;
    loop {
        match reach(hi)? {
            Some((s, run)) if s < 1.0 => {
                lo = hi;
                s_lo = s;
                hi *= 2.0;
                best = Some(run);
            }
            Some((_, _)) | None => break,
        }
        if hi > 1e6 {
            return Err(Error::NoConvergence { what: "geodesic shooting", iterations: 20, residual: 1.0 - s_lo });
        }
    }
    let mut s_hi = f64::INFINITY;
    for _ in 0..200 {
        // Secant step when the upper end is finite, bisection otherwise.
        let mut k = if s_hi.is_finite() {
            lo + (1.0 - s_lo) * (hi - lo) / (s_hi - s_lo)
        } else {
            0.5 * (lo + hi)
        };
        if !(k > lo && k < hi) || (k - lo).min(hi - k) < 1e-3 * (hi - lo) {
            k = 0.5 * (lo + hi);
        }
        match reach(k)? {
            Some((s, run)) => {
                if (s - 1.0).abs() < 1e-13 || hi - lo < 1e-15 * hi {
                    best = Some(run);
                    lo = k;
                    break;
                }
                if s < 1.0 {
                    lo = k;
                    s_lo = s;
                } else {
                    hi = k;
                    s_hi = s;
                }
                best = Some(run);
            }
            None => {
                hi = k;
                s_hi = f64::INFINITY;
            }
        }
    }
    let run = match best {
        Some(r) => r,
        None => integrate_geodesic(gen, &start, &(&dir * lo), which, steps)?,
    };
    let end = exp_family((run.curve.last() * sign).as_slice());
    let scale = lo;
    Ok(Shot {
        velocity: &dir * scale,
        scale,
        miss: (&end - &b).norm(),
        geodesic: run,
    })
}

/// Rounding allowance when checking that T did not increase.
const FLOW_SLACK: f64 = 1e-14;

fn flow_tail(
    horizon: f64,
    steps: usize,
) -> Result<f64> {
    if !(horizon > 0.0) || steps == 0 {
        return Err(Error::InvalidParameter("horizon and steps must be positive".into()));
    }
    Ok(horizon / steps as f64)
}

/// RK4 step of an autonomous ODE with halving until `accept` holds.
fn guarded_rk4<F, A>(x: &DVector<f64>, dt: f64, rhs: &mut F, accept: &mut A) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    A: FnMut(&DVector<f64>) -> Result<bool>,
{
    let mut remaining = dt;
    let mut h = dt;
    let mut cur = x.clone();
    while remaining > 0.0 {
        let step = h.min(remaining);
        let k1 = rhs(&cur)?;
        let k2 = rhs(&(&cur + &k1 * (0.5 * step)))?;
        let k3 = rhs(&(&cur + &k2 * (0.5 * step)))?;
        let k4 = rhs(&(&cur + &k3 * step))?;
        let cand = &cur + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
        if cand.iter().all(|v| v.is_finite()) && accept(&cand)? {
            cur = cand;
            remaining -= step;
        } else {
            h *= 0.5;
            if h < dt * 1e-12 {
                return Err(Error::Integration { t: 0.0, reason: "flow step could not decrease the divergence".into() });
            }
        }
    }
    Ok(cur)
}

/// Primal gradient flow γ̇ = −grad T(r|·)(γ) from q, in primal coordinates.
pub fn primal_flow<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    r: &SimplexPoint,
    horizon: f64,
    steps: usize,
) -> Result<Curve> {
    check_dim(q.dim(), r.dim())?;
    ensure_dim(gen, q.dim())?;
    let dt = flow_tail(horizon, steps)?;
    let tr = r.to_primal();
    let divergence = |x: &DVector<f64>| -> Result<f64> {
        Ok(l_divergence_primal(gen, &tr, &PrimalCoord::from_vector(x.clone())?)?.value)
    };
    let mut rhs = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let pi = gen.portfolio_primal(x.as_slice());
        Ok(-gradient_primal_raw(&pi, &(tr.vector() - x)))
    };
    let mut x = q.to_primal().into_vector();
    let mut level = divergence(&x)?;
    let mut times = vec![0.0];
    let mut points = vec![x.clone()];
    let mut vels = vec![rhs(&x)?];
    for k in 0..steps {
        let mut accept = |c: &DVector<f64>| -> Result<bool> {
            Ok(divergence(c)? <= level + FLOW_SLACK)
        };
        x = guarded_rk4(&x, dt, &mut rhs, &mut accept).map_err(|e| with_time(e, k as f64 * dt))?;
        level = divergence(&x)?;
        times.push((k + 1) as f64 * dt);
        points.push(x.clone());
        vels.push(rhs(&x)?);
    }
    Curve::new(times, points, CoordSystem::Primal, Some(vels))
}

fn with_time(e: Error, t: f64) -> Error {
    match e {
        Error::Integration { reason, .. } => Error::Integration { t, reason },
        other => other,
    }
}

/// Dual gradient flow γ̇* = −grad T(·|p)(γ*) from q, in dual coordinates.
pub fn dual_flow<G: Generator + ?Sized>(
    gen: &G,
    q: &SimplexPoint,
    p: &SimplexPoint,
    horizon: f64,
    steps: usize,
) -> Result<Curve> {
    check_dim(q.dim(), p.dim())?;
    ensure_dim(gen, q.dim())?;
    let dt = flow_tail(horizon, steps)?;
    let tp = p.to_primal();
    let fp = dual_coord(gen, &tp)?;
    let warm = std::cell::RefCell::new(q.to_primal());
    let theta_of = |x: &DVector<f64>| -> Result<PrimalCoord> {
        let th = inverse_dual(gen, &DualCoord::from_vector(x.clone())?, Some(&warm.borrow()))?;
        *warm.borrow_mut() = th.clone();
        Ok(th)
    };
    let divergence = |x: &DVector<f64>| -> Result<f64> {
        Ok(l_divergence_primal(gen, &theta_of(x)?, &tp)?.value)
    };
    let mut rhs = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let th = theta_of(x)?;
        let pi = gen.portfolio_primal(th.as_slice());
        Ok(-gradient_dual_raw(&pi, &(x - fp.vector())))
    };
    let mut x = dual_coord(gen, &q.to_primal())?.into_vector();
    let mut level = divergence(&x)?;
    let mut times = vec![0.0];
    let mut points = vec![x.clone()];
    let mut vels = vec![rhs(&x)?];
    for k in 0..steps {
        let mut accept = |c: &DVector<f64>| -> Result<bool> {
            Ok(divergence(c)? <= level + FLOW_SLACK)
        };
        x = guarded_rk4(&x, dt, &mut rhs, &mut accept).map_err(|e| with_time(e, k as f64 * dt))?;
        level = divergence(&x)?;
        times.push((k + 1) as f64 * dt);
        points.push(x.clone());
        vels.push(rhs(&x)?);
    }
    Curve::new(times, points, CoordSystem::Dual, Some(vels))
}

/// Quantities of the generalized Pythagorean theorem at the vertex q.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PythResult {
    /// T(q|p) + T(r|q) − T(r|p).
    pub gap: f64,
    /// ⟨u, v⟩ at q with u = −grad T(·|p)(q) and v = −grad T(r|·)(q).
    pub inner: f64,
    /// 1 − Σ_k Π_k(q, p) Π_k(r, q) / π_k(q).
    pub sign_quantity: f64,
    /// Angle between u and v in degrees; None when either vanishes.
    pub angle_deg: Option<f64>,
}

impl PythResult {
    /// Whether the three signs agree (ignoring |inner| ≤ 1e-9).
    pub fn signs_agree(&self) -> bool {
        if self.inner.abs() <= 1e-9 {
            return true;
        }
        let s = self.inner.signum();
        self.gap.signum() == s && self.sign_quantity.signum() == s
    }
}

pub fn pythagorean_sign<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    q: &SimplexPoint,
    r: &SimplexPoint,
) -> Result<PythResult> {
    check_dim(p.dim(), q.dim())?;
    check_dim(p.dim(), r.dim())?;
    let t = |a: &SimplexPoint, b: &SimplexPoint| l_divergence(gen, a, b).map(|d| d.value);
    let gap = t(q, p)? + t(r, q)? - t(r, p)?;

    let frame = LocalFrame::at(gen, q)?;
    let (tp, tr) = (p.to_primal(), r.to_primal());
    let fp = dual_coord(gen, &tp)?;
    let u_dual = -gradient_dual_raw(&frame.pi, &(&frame.phi - fp.vector()));
    let u = frame.push_forward(&u_dual, Connection::Dual, Connection::Primal);
    let v = -gradient_primal_raw(&frame.pi, &(tr.vector() - &frame.theta));
    let g = frame.metric(Connection::Primal);
    let inner = g.inner(&u, &v);

    let pi_qp = tilt_weights(&gen.portfolio_primal(tp.as_slice()), &(&frame.theta - tp.vector()));
    let pi_rq = tilt_weights(&frame.pi, &(tr.vector() - &frame.theta));
    let sign_quantity = 1.0
        - (0..frame.pi.len())
            .map(|k| pi_qp[k] * pi_rq[k] / frame.pi[k])
            .sum::<f64>();

    let (nu, nv) = (g.norm(&u), g.norm(&v));
    let angle_deg = if nu > 0.0 && nv > 0.0 {
        Some((inner / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees())
    } else {
        None
    };
    Ok(PythResult { gap, inner, sign_quantity, angle_deg })
}

fn tilt_weights(pi: &DVector<f64>, diff: &DVector<f64>) -> DVector<f64> {
    let m = diff.len();
    let logs: Vec<f64> = (0..=m)
        .map(|l| pi[l].ln() + if l < m { diff[l] } else { 0.0 })
        .collect();
    let lse = crate::simplex::log_sum_exp(&logs);
    DVector::from_fn(m + 1, |l, _| (logs[l] - lse).exp())
}
