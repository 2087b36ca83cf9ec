//! The Riemannian metric, primal/dual connections and curvature induced by
//! the L-divergence.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::generator::{dual_coord, ensure_dim, inverse_dual, jacobian_from_parts, Generator};
use crate::simplex::{extend, DualCoord, PrimalCoord, SimplexPoint};

/// Selects the primal (exponential) or dual coordinate chart and connection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Connection {
    Primal,
    Dual,
}

/// Everything the closed forms need at one manifold point.
#[derive(Clone, Debug)]
pub struct LocalFrame {
    pub theta: DVector<f64>,
    pub phi: DVector<f64>,
    /// Portfolio weights, n entries.
    pub pi: DVector<f64>,
    /// ∂π_i/∂θ_j, i, j < n.
    pub dpi_dtheta: DMatrix<f64>,
    /// ∂φ/∂θ.
    pub dphi_dtheta: DMatrix<f64>,
    /// ∂θ/∂φ.
    pub dtheta_dphi: DMatrix<f64>,
}

impl LocalFrame {
    pub fn from_primal<G: Generator + ?Sized>(gen: &G, theta: &PrimalCoord) -> Result<Self> {
        let phi = dual_coord(gen, theta)?;
        Self::build(gen, theta.vector().clone(), phi.into_vector())
    }

    pub fn from_dual<G: Generator + ?Sized>(gen: &G, phi: &DualCoord) -> Result<Self> {
        Self::from_dual_near(gen, phi, None)
    }

    /// Like [`from_dual`](Self::from_dual) with a warm start for the inverse map.
    pub fn from_dual_near<G: Generator + ?Sized>(
        gen: &G,
        phi: &DualCoord,
        start: Option<&PrimalCoord>,
    ) -> Result<Self> {
        let theta = inverse_dual(gen, phi, start)?;
        Self::build(gen, theta.into_vector(), phi.vector().clone())
    }

    pub fn at<G: Generator + ?Sized>(gen: &G, p: &SimplexPoint) -> Result<Self> {
        Self::from_primal(gen, &p.to_primal())
    }

    fn build<G: Generator + ?Sized>(gen: &G, theta: DVector<f64>, phi: DVector<f64>) -> Result<Self> {
        ensure_dim(gen, theta.len() + 1)?;
        let x = theta.as_slice();
        let pi = gen.portfolio_primal(x);
        if pi.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::NotRegular(format!(
                "{} has a non-positive portfolio weight",
                gen.label()
            )));
        }
        let dpi = gen.portfolio_jacobian(x);
        let j = jacobian_from_parts(&pi, &dpi);
        let k = j.clone().try_inverse().ok_or_else(|| {
            Error::NotRegular("dual-map Jacobian is singular".into())
        })?;
        Ok(LocalFrame {
            theta,
            phi,
            pi,
            dpi_dtheta: dpi,
            dphi_dtheta: j,
            dtheta_dphi: k,
        })
    }

    /// n − 1.
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// ∂π_i/∂φ_j.
    pub fn dpi_dphi(&self) -> DMatrix<f64> {
        &self.dpi_dtheta * &self.dtheta_dphi
    }

    pub fn coords(&self, chart: Connection) -> &DVector<f64> {
        match chart {
            Connection::Primal => &self.theta,
            Connection::Dual => &self.phi,
        }
    }

    /// diag(π) − ππᵀ on the first n − 1 indices.
    fn base_form(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { self.pi[i] } else { 0.0 };
            d - self.pi[i] * self.pi[j]
        })
    }

    /// diag(1/π) + 11ᵀ/π_n, the inverse of diag(π)(I − 1πᵀ).
    fn base_form_inverse(&self) -> DMatrix<f64> {
        let m = self.dim();
        let pn = self.pi[m];
        DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { 1.0 / self.pi[i] } else { 0.0 };
            d + 1.0 / pn
        })
    }

    pub fn metric(&self, chart: Connection) -> MetricMatrix {
        let (entries, inverse) = match chart {
            Connection::Primal => (
                self.base_form() - &self.dpi_dtheta,
                &self.dtheta_dphi * self.base_form_inverse(),
            ),
            Connection::Dual => (
                self.base_form() + self.dpi_dphi(),
                &self.dphi_dtheta * self.base_form_inverse(),
            ),
        };
        MetricMatrix {
            entries: symmetrize(entries),
            inverse: symmetrize(inverse),
            coord: chart,
            base: self.coords(chart).clone(),
        }
    }

    /// Tangent vector components in `to` from components in `from`.
    pub fn push_forward(&self, v: &DVector<f64>, from: Connection, to: Connection) -> DVector<f64> {
        match (from, to) {
            (Connection::Primal, Connection::Dual) => &self.dphi_dtheta * v,
            (Connection::Dual, Connection::Primal) => &self.dtheta_dphi * v,
            _ => v.clone(),
        }
    }

    /// Covector components in `to` from components in `from`.
    pub fn pull_back(&self, w: &DVector<f64>, from: Connection, to: Connection) -> DVector<f64> {
        match (from, to) {
            // ω_θ = Jᵀ ω_φ
            (Connection::Dual, Connection::Primal) => self.dphi_dtheta.transpose() * w,
            (Connection::Primal, Connection::Dual) => self.dtheta_dphi.transpose() * w,
            _ => w.clone(),
        }
    }

    /// A (0,2) tensor's components in `to` from components in `from`.
    pub fn transform_form(&self, a: &DMatrix<f64>, from: Connection, to: Connection) -> DMatrix<f64> {
        let jac = match (from, to) {
            (Connection::Dual, Connection::Primal) => &self.dphi_dtheta,
            (Connection::Primal, Connection::Dual) => &self.dtheta_dphi,
            _ => return a.clone(),
        };
        jac.transpose() * a * jac
    }
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// The metric in primal or dual coordinates at a base point.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricMatrix {
    pub entries: DMatrix<f64>,
    /// Closed-form inverse (Sherman–Morrison structure).
    pub inverse: DMatrix<f64>,
    pub coord: Connection,
    pub base: DVector<f64>,
}

impl MetricMatrix {
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.entries * v))
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Raises a covector.
    pub fn raise(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.inverse * w
    }

    pub fn is_positive_definite(&self) -> bool {
        self.entries.clone().cholesky().is_some()
    }
}

fn checked(m: MetricMatrix) -> Result<MetricMatrix> {
    if m.is_positive_definite() {
        Ok(m)
    } else {
        Err(Error::NotRegular("metric is not positive definite".into()))
    }
}

/// g_ij(θ) = π_i(δ_ij − π_j) − ∂π_i/∂θ_j.
pub fn metric_primal<G: Generator + ?Sized>(gen: &G, theta: &PrimalCoord) -> Result<MetricMatrix> {
    checked(LocalFrame::from_primal(gen, theta)?.metric(Connection::Primal))
}

/// g*_ij(φ) = π_i(δ_ij − π_j) + ∂π_i/∂φ_j.
pub fn metric_dual<G: Generator + ?Sized>(gen: &G, phi: &DualCoord) -> Result<MetricMatrix> {
    checked(LocalFrame::from_dual(gen, phi)?.metric(Connection::Dual))
}

/// ⟨u, v⟩ = uᵀ(−Hess φ − ∇φ∇φᵀ)v for tangent vectors in Euclidean coordinates.
pub fn metric_euclidean<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    check_dim(p.dim(), u.len())?;
    check_dim(p.dim(), v.len())?;
    ensure_dim(gen, p.dim())?;
    for w in [u, v] {
        let s = w.sum();
        if s.abs() > 1e-10 {
            return Err(Error::NotTangent(s));
        }
    }
    let g = gen.euclid_grad(p);
    let a = -gen.euclid_hess(p) - &g * g.transpose();
    Ok(u.dot(&(a * v)))
}

/// Normalized tilts Π(ξ, ξ′).
#[derive(Clone, Debug, PartialEq)]
pub struct PiQuantities {
    pub weights: DVector<f64>,
}

fn tilt(pi: &DVector<f64>, diff: &DVector<f64>) -> DVector<f64> {
    let m = diff.len();
    let logs: Vec<f64> = (0..=m)
        .map(|l| pi[l].ln() + if l < m { diff[l] } else { 0.0 })
        .collect();
    let lse = crate::simplex::log_sum_exp(&logs);
    DVector::from_fn(m + 1, |l, _| (logs[l] - lse).exp())
}

/// Π_i(θ, θ′) = π_i(θ′)e^{θ_i−θ′_i} / Σ_ℓ π_ℓ(θ′)e^{θ_ℓ−θ′_ℓ}.
pub fn pi_quantities<G: Generator + ?Sized>(
    gen: &G,
    theta: &PrimalCoord,
    theta_ref: &PrimalCoord,
) -> Result<PiQuantities> {
    check_dim(theta.len(), theta_ref.len())?;
    ensure_dim(gen, theta.simplex_dim())?;
    let pi = gen.portfolio_primal(theta_ref.as_slice());
    Ok(PiQuantities {
        weights: tilt(&pi, &(theta.vector() - theta_ref.vector())),
    })
}

/// Π*_i(φ, φ′) = π_i(φ)e^{φ_i−φ′_i} / Σ_ℓ π_ℓ(φ)e^{φ_ℓ−φ′_ℓ}.
pub fn pi_quantities_dual<G: Generator + ?Sized>(
    gen: &G,
    phi: &DualCoord,
    phi_ref: &DualCoord,
) -> Result<PiQuantities> {
    check_dim(phi.len(), phi_ref.len())?;
    let theta = inverse_dual(gen, phi, None)?;
    let pi = gen.portfolio_primal(theta.as_slice());
    Ok(PiQuantities {
        weights: tilt(&pi, &(phi.vector() - phi_ref.vector())),
    })
}

/// Γ^k_ij stored as a dense (n−1)³ array.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelTensor {
    m: usize,
    data: Vec<f64>,
    pub coord: Connection,
    pub base: DVector<f64>,
}

impl ChristoffelTensor {
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Γ^k_ij.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.m + i) * self.m + j]
    }

    /// Γ_ijk = Σ_l Γ^l_ij g_lk, indexed as `[(i * m + j) * m + k]`.
    pub fn lowered(&self, g: &DMatrix<f64>) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    out[(i * m + j) * m + k] = (0..m).map(|l| self.get(l, i, j) * g[(l, k)]).sum();
                }
            }
        }
        out
    }

    /// Contracts with two vectors: (Γ(a, b))^k = Σ_ij Γ^k_ij a_i b_j.
    pub fn contract(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let m = self.m;
        DVector::from_fn(m, |k, _| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += self.get(k, i, j) * a[i] * b[j];
                }
            }
            s
        })
    }
}

fn christoffel_closed(pi: &DVector<f64>, sign: f64, coord: Connection, base: DVector<f64>) -> ChristoffelTensor {
    let m = base.len();
    let mut data = vec![0.0; m * m * m];
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let mut v = 0.0;
                if i == j && j == k {
                    v += 1.0;
                }
                if i == k {
                    v -= pi[j];
                }
                if j == k {
                    v -= pi[i];
                }
                data[(k * m + i) * m + j] = sign * v;
            }
        }
    }
    ChristoffelTensor { m, data, coord, base }
}

impl LocalFrame {
    pub fn christoffel(&self, which: Connection) -> ChristoffelTensor {
        match which {
            Connection::Primal => christoffel_closed(&self.pi, 1.0, which, self.theta.clone()),
            Connection::Dual => christoffel_closed(&self.pi, -1.0, which, self.phi.clone()),
        }
    }

    /// R^ℓ_ijk = δ_ℓj g_ik − δ_ℓi g_jk in the chart of `which`.
    pub fn curvature(&self, which: Connection) -> CurvatureTensor {
        let g = self.metric(which).entries;
        let m = self.dim();
        let mut data = vec![0.0; m * m * m * m];
        for l in 0..m {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let mut v = 0.0;
                        if l == j {
                            v += g[(i, k)];
                        }
                        if l == i {
                            v -= g[(j, k)];
                        }
                        data[((l * m + i) * m + j) * m + k] = v;
                    }
                }
            }
        }
        CurvatureTensor { m, data, coord: which }
    }
}

/// Γ^k_ij(θ) = δ_ijk − δ_ik π_j − δ_jk π_i.
pub fn christoffel_primal<G: Generator + ?Sized>(gen: &G, theta: &PrimalCoord) -> Result<ChristoffelTensor> {
    ensure_dim(gen, theta.simplex_dim())?;
    let pi = gen.portfolio_primal(theta.as_slice());
    Ok(christoffel_closed(&pi, 1.0, Connection::Primal, theta.vector().clone()))
}

/// Γ*^k_ij(φ) = −δ_ijk + δ_ik π_j(φ) + δ_jk π_i(φ).
pub fn christoffel_dual<G: Generator + ?Sized>(gen: &G, phi: &DualCoord) -> Result<ChristoffelTensor> {
    let theta = inverse_dual(gen, phi, None)?;
    let pi = gen.portfolio_primal(theta.as_slice());
    Ok(christoffel_closed(&pi, -1.0, Connection::Dual, phi.vector().clone()))
}

/// R^ℓ_ijk with R(∂_i, ∂_j)∂_k = Σ_ℓ R^ℓ_ijk ∂_ℓ.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureTensor {
    m: usize,
    data: Vec<f64>,
    pub coord: Connection,
}

impl CurvatureTensor {
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.data[((l * self.m + i) * self.m + j) * self.m + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// R(u, v)w.
    pub fn apply(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let m = self.m;
        DVector::from_fn(m, |l, _| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        s += self.get(l, i, j, k) * u[i] * v[j] * w[k];
                    }
                }
            }
            s
        })
    }

    /// Ricci tensor R_jk = Σ_ℓ R^ℓ_ℓjk.
    pub fn ricci(&self) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |j, k| (0..m).map(|l| self.get(l, l, j, k)).sum())
    }
}

/// Frame in the chart of `which` at the point p.
fn frame_for<G: Generator + ?Sized>(gen: &G, p: &SimplexPoint) -> Result<LocalFrame> {
    ensure_dim(gen, p.dim())?;
    LocalFrame::at(gen, p)
}

pub fn rc_curvature<G: Generator + ?Sized>(gen: &G, p: &SimplexPoint, which: Connection) -> Result<CurvatureTensor> {
    Ok(frame_for(gen, p)?.curvature(which))
}

/// ⟨R(u,v)v, u⟩ / (‖u‖²‖v‖² − ⟨u,v⟩²) for u, v given in the chart of `which`.
pub fn sectional_curvature<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    u: &DVector<f64>,
    v: &DVector<f64>,
    which: Connection,
) -> Result<f64> {
    let frame = frame_for(gen, p)?;
    check_dim(frame.dim(), u.len())?;
    check_dim(frame.dim(), v.len())?;
    sectional_curvature_at(&frame, u, v, which)
}

pub fn sectional_curvature_at(
    frame: &LocalFrame,
    u: &DVector<f64>,
    v: &DVector<f64>,
    which: Connection,
) -> Result<f64> {
    let g = frame.metric(which);
    let r = frame.curvature(which);
    let (uu, vv, uv) = (g.inner(u, u), g.inner(v, v), g.inner(u, v));
    let area = uu * vv - uv * uv;
    if area < 1e-14 * (uu * vv).max(f64::MIN_POSITIVE) || area <= 0.0 {
        return Err(Error::DegeneratePlane(area));
    }
    Ok(g.inner(&r.apply(u, v, v), u) / area)
}

pub fn ricci<G: Generator + ?Sized>(gen: &G, p: &SimplexPoint, which: Connection) -> Result<DMatrix<f64>> {
    Ok(rc_curvature(gen, p, which)?.ricci())
}

/// grad T(r|·)(q) in primal components at q:
/// (1 − e^{θ^r_i − θ^q_i}) / Σ_ℓ π_ℓ(q) e^{θ^r_ℓ − θ^q_ℓ}.
pub fn riem_gradient_primal<G: Generator + ?Sized>(
    gen: &G,
    r: &SimplexPoint,
    q: &SimplexPoint,
) -> Result<DVector<f64>> {
    check_dim(q.dim(), r.dim())?;
    ensure_dim(gen, q.dim())?;
    let (tr, tq) = (r.to_primal(), q.to_primal());
    Ok(gradient_primal_raw(&gen.portfolio_primal(tq.as_slice()), &(tr.vector() - tq.vector())))
}

pub(crate) fn gradient_primal_raw(pi_q: &DVector<f64>, diff: &DVector<f64>) -> DVector<f64> {
    // Scale by the largest exponent to keep the ratio finite.
    let ext = extend(diff.as_slice());
    let mx = ext.max();
    let s: f64 = (0..ext.len()).map(|l| pi_q[l] * (ext[l] - mx).exp()).sum();
    DVector::from_fn(diff.len(), |i, _| ((-mx).exp() - (diff[i] - mx).exp()) / s)
}

/// The same gradient via Π: −Π_i(θ^r, θ^q)/π_i(q) + Π_n(θ^r, θ^q)/π_n(q).
pub fn riem_gradient_primal_tilt<G: Generator + ?Sized>(
    gen: &G,
    r: &SimplexPoint,
    q: &SimplexPoint,
) -> Result<DVector<f64>> {
    let tq = q.to_primal();
    let big_pi = pi_quantities(gen, &r.to_primal(), &tq)?.weights;
    let pi = gen.portfolio_primal(tq.as_slice());
    let m = tq.len();
    Ok(DVector::from_fn(m, |i, _| -big_pi[i] / pi[i] + big_pi[m] / pi[m]))
}

/// grad T(·|p)(q) in dual components at q:
/// (e^{φ^q_i − φ^p_i} − 1) / Σ_ℓ π_ℓ(q) e^{φ^q_ℓ − φ^p_ℓ}.
pub fn riem_gradient_dual<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    q: &SimplexPoint,
) -> Result<DVector<f64>> {
    check_dim(q.dim(), p.dim())?;
    ensure_dim(gen, q.dim())?;
    let tq = q.to_primal();
    let fq = dual_coord(gen, &tq)?;
    let fp = dual_coord(gen, &p.to_primal())?;
    Ok(gradient_dual_raw(&gen.portfolio_primal(tq.as_slice()), &(fq.vector() - fp.vector())))
}

pub(crate) fn gradient_dual_raw(pi_q: &DVector<f64>, diff: &DVector<f64>) -> DVector<f64> {
    -gradient_primal_raw(pi_q, diff)
}

/// The same gradient via Π*: Π*_i(φ^q, φ^p)/π_i(q) − Π*_n(φ^q, φ^p)/π_n(q).
pub fn riem_gradient_dual_tilt<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    q: &SimplexPoint,
) -> Result<DVector<f64>> {
    let tq = q.to_primal();
    let fq = dual_coord(gen, &tq)?;
    let fp = dual_coord(gen, &p.to_primal())?;
    let pi = gen.portfolio_primal(tq.as_slice());
    let big_pi = tilt(&pi, &(fq.vector() - fp.vector()));
    let m = tq.len();
    Ok(DVector::from_fn(m, |i, _| big_pi[i] / pi[i] - big_pi[m] / pi[m]))
}
