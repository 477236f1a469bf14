//! The light-cone model of conformal geometry.
//!
//! Lorentz space `L^{N+2}` is stored in the pseudo-orthonormal basis
//! `(e0, e1, e2, ...)`; `<v, e0>` is therefore the `e1`-coordinate of `v`.

use serde::Serialize;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::{psi_jets, ChartMap, MapRef};
use crate::error::{Error, Result};
use crate::geometry::PointGeometry;
use crate::jets::{fundamental_data, leaf_mean_curvature_at, metric_orthonormal, ImmersionJet, JetSource};
use crate::linalg::{ScalarProduct, Tolerance};
use crate::taylor::Jet;

#[derive(Debug, Clone, PartialEq)]
pub struct LightConeModel {
    pub n: usize,
}

impl LightConeModel {
    pub fn new(n: usize) -> Self {
        LightConeModel { n }
    }

    pub fn ambient(&self) -> ScalarProduct {
        ScalarProduct::light_cone(self.n)
    }

    pub fn e0(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.n + 2);
        v[0] = 1.0;
        v
    }

    pub fn e1(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.n + 2);
        v[1] = 1.0;
        v
    }

    /// `Psi(x) = -|x|^2/2 e0 + e1 + sum x_i e_{i+1}`.
    pub fn psi(&self, x: &DVector<f64>) -> DVector<f64> {
        psi(x)
    }

    /// `dPsi_x(v) = -<x, v> e0 + v`.
    pub fn psi_push(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        psi_push(x, v)
    }
}

pub fn psi(x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.len() + 2);
    out[0] = -0.5 * x.norm_squared();
    out[1] = 1.0;
    out.rows_mut(2, x.len()).copy_from(x);
    out
}

pub fn psi_push(x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.len() + 2);
    out[0] = -x.dot(v);
    out.rows_mut(2, v.len()).copy_from(v);
    out
}

/// `<v, e0>` in light-cone coordinates.
pub fn pair_e0(v: &DVector<f64>) -> f64 {
    v[1]
}

/// Riemannian metric on the chart used as the reference for light-cone lifts.
#[derive(Debug, Clone)]
pub enum BaseMetric {
    /// The Euclidean metric of the chart coordinates.
    Euclidean,
    /// The metric induced by another immersion of the same chart.
    Induced(MapRef),
}

/// Isometric light-cone representative `I(f) = phi^{-1} Psi o f`, where
/// `metric(f) = phi^2 base`.
#[derive(Debug, Clone)]
pub struct IsometricRepresentative {
    pub inner: MapRef,
    pub base: BaseMetric,
}

impl IsometricRepresentative {
    /// Lift relative to the immersion's own metric, i.e. `Psi o f`.
    pub fn own(inner: MapRef) -> Self {
        IsometricRepresentative {
            base: BaseMetric::Induced(inner.clone()),
            inner,
        }
    }

    fn metric_jets(map: &dyn ChartMap, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        let jets = map.taylor(x, order + 1)?;
        let n = x.len();
        let g = map.ambient();
        let d1: Vec<Vec<Jet>> = (0..n)
            .map(|i| jets.iter().map(|c| c.derivative(i)).collect())
            .collect();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(crate::taylor::jet_dot(&d1[i], &d1[j], g.gram()));
            }
        }
        Ok(out)
    }

    /// Jet of the factor `phi` with `metric(inner) = phi^2 base`.
    pub fn factor_jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        let n = x.len();
        let gf = Self::metric_jets(self.inner.as_ref(), x, order)?;
        let proto = gf[0].constant_like(0.0);
        let (num, den) = match &self.base {
            BaseMetric::Euclidean => {
                let mut num = proto.clone();
                for i in 0..n {
                    num = num + &gf[i * n + i];
                }
                (num, proto.clone() + n as f64)
            }
            BaseMetric::Induced(b) => {
                let gb = Self::metric_jets(b.as_ref(), x, order)?;
                let mut num = proto.clone();
                let mut den = proto.clone();
                for k in 0..n * n {
                    num = num + &gf[k] * &gb[k];
                    den = den + &gb[k] * &gb[k];
                }
                (num, den)
            }
        };
        let phi2 = num / den;
        if phi2.value() <= 0.0 {
            return Err(Error::NotConformal {
                point: 0,
                residual: f64::INFINITY,
            });
        }
        Ok(phi2.sqrt())
    }
}

impl ChartMap for IsometricRepresentative {
    fn name(&self) -> String {
        format!("I({})", self.inner.name())
    }
    fn domain_dim(&self) -> usize {
        self.inner.domain_dim()
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::light_cone(self.inner.ambient().dim())
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        crate::chart::compose_via_taylor(self, args)
    }
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        if !self.inner.ambient().is_euclidean() {
            return Err(Error::InvalidInput("light-cone lift needs a Euclidean ambient".into()));
        }
        if let BaseMetric::Induced(b) = &self.base {
            if Arc::ptr_eq(b, &self.inner) {
                let y = self.inner.taylor(x, order)?;
                return Ok(psi_jets(&y));
            }
        }
        let y = self.inner.taylor(x, order)?;
        let inv = self.factor_jet(x, order)?.recip();
        Ok(psi_jets(&y).iter().map(|c| c * &inv).collect())
    }
}

/// `C(g)`: the point of `R^N` with `Psi(C(g)) = g / <g, e0>`.
#[derive(Debug, Clone)]
pub struct ConeProjection {
    pub inner: MapRef,
    pub threshold: f64,
}

impl ChartMap for ConeProjection {
    fn name(&self) -> String {
        format!("C({})", self.inner.name())
    }
    fn domain_dim(&self) -> usize {
        self.inner.domain_dim()
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::euclidean(self.inner.ambient().dim() - 2)
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        if self.inner.ambient().null_pair() != Some((0, 1)) {
            return Err(Error::InvalidInput("cone projection needs a light-cone ambient".into()));
        }
        let g = self.inner.apply(args)?;
        let s = &g[1];
        if !(s.value() > self.threshold) {
            return Err(Error::OnExceptionalRay {
                point: 0,
                value: s.value(),
            });
        }
        let inv = s.recip();
        Ok(g[2..].iter().map(|c| c * &inv).collect())
    }
}

fn rebuild(map: MapRef, like: &ImmersionJet) -> Result<ImmersionJet> {
    match like.source {
        JetSource::ClosedForm => ImmersionJet::closed_form(map, &like.grid),
        JetSource::FiniteDifference { step } => ImmersionJet::finite_difference(map, &like.grid, step),
    }
}

pub fn isometric_representative(f: &ImmersionJet, base: BaseMetric, tol: &Tolerance) -> Result<ImmersionJet> {
    let lift = IsometricRepresentative {
        inner: f.map().clone(),
        base,
    };
    // surface non-conformality as an error before building jets
    let threshold = tol.rel.sqrt().max(1e-8);
    for k in 0..f.len() {
        let x = f.grid.point(k);
        if let BaseMetric::Induced(b) = &lift.base {
            let gf = f.d1(k).transpose() * f.ambient.gram() * f.d1(k);
            let jb = b.taylor(&x, 1)?;
            let n = x.len();
            let db = DMatrix::from_fn(jb.len(), n, |c, i| jb[c].deriv(&[i]));
            let gb = db.transpose() * b.ambient().gram() * &db;
            let (_, res) = crate::jets::metric_ratio(&gb, &gf);
            if res > threshold {
                return Err(Error::NotConformal { point: k, residual: res });
            }
        } else {
            let gf = f.d1(k).transpose() * f.ambient.gram() * f.d1(k);
            let (_, res) = crate::jets::metric_ratio(&DMatrix::identity(x.len(), x.len()), &gf);
            if res > threshold {
                return Err(Error::NotConformal { point: k, residual: res });
            }
        }
    }
    rebuild(Arc::new(lift), f)
}

pub fn cone_projection(g: &ImmersionJet, tol: &Tolerance) -> Result<ImmersionJet> {
    for k in 0..g.len() {
        let v = pair_e0(&g.position(k));
        if !(v > tol.abs) {
            return Err(Error::OnExceptionalRay { point: k, value: v });
        }
    }
    let proj = ConeProjection {
        inner: g.map().clone(),
        threshold: tol.abs,
    };
    rebuild(Arc::new(proj), g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositionResiduals {
    /// `max |A_g + I|`.
    pub position: f64,
    /// `max |A_xi|` for the null vector (default `e0`).
    pub null_vector: f64,
}

/// Residuals of `A_g = -I` and `A_xi = 0` for a cone-valued immersion.
pub fn position_identities(g: &ImmersionJet, null: Option<&DVector<f64>>, tol: &Tolerance) -> Result<PositionResiduals> {
    if g.ambient.null_pair() != Some((0, 1)) {
        return Err(Error::InvalidInput("position identities need a light-cone ambient".into()));
    }
    let mut cone: f64 = 0.0;
    for k in 0..g.len() {
        let p = g.position(k);
        cone = cone.max(g.ambient.norm_sq(&p).abs() / p.norm_squared().max(1.0));
    }
    if cone > 1e-8 {
        return Err(Error::NotInLightCone { residual: cone });
    }
    let fd = fundamental_data(g, tol)?;
    let e0 = LightConeModel::new(g.ambient.dim() - 2).e0();
    let xi = null.cloned().unwrap_or(e0);
    let mut out = PositionResiduals {
        position: 0.0,
        null_vector: 0.0,
    };
    for pg in &fd.points {
        let n = pg.n();
        let a = pg.shape_operator(&pg.position) + DMatrix::identity(n, n);
        out.position = out.position.max(a.amax());
        out.null_vector = out.null_vector.max(pg.shape_operator(&xi).amax());
    }
    Ok(out)
}

/// How the Hessian of the conformal factor is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HessianSource {
    ClosedForm,
    FiniteDifference { step: f64 },
}

/// Both sides of the second fundamental form transfer at one point.
#[derive(Debug, Clone)]
pub struct SffTransferPoint {
    pub phi: f64,
    pub lambda: f64,
    pub xi: DVector<f64>,
    pub eta: DVector<f64>,
    pub eta_prime: DVector<f64>,
    /// `alpha^{f'}` versus `dPsi(phi alpha^f) - <,>' xi + phi^{-1} Hess phi f'`.
    pub sff_residual: f64,
    /// `beta^{f'}` versus `phi dPsi(beta^f) + phi^{-1}(Hess phi - lambda <,>') f'`.
    pub beta_residual: f64,
    /// Spread of `Hess phi(Z, Z) / <Z, Z>'` over unit directions of `Delta`.
    pub lambda_spread: f64,
    /// Deviation in the mean-curvature relation (diagnostic).
    pub eta_residual: f64,
    /// Non-umbilicity of `alpha^{f'}` on `Delta x Delta`.
    pub ruling_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SffTransferData {
    pub points: Vec<SffTransferPoint>,
}

impl SffTransferData {
    fn worst(&self, f: impl Fn(&SffTransferPoint) -> f64) -> f64 {
        self.points.iter().map(f).fold(0.0, f64::max)
    }
    pub fn max_sff_residual(&self) -> f64 {
        self.worst(|p| p.sff_residual)
    }
    pub fn max_beta_residual(&self) -> f64 {
        self.worst(|p| p.beta_residual)
    }
    pub fn max_lambda_spread(&self) -> f64 {
        self.worst(|p| p.lambda_spread)
    }
    pub fn max_eta_residual(&self) -> f64 {
        self.worst(|p| p.eta_residual)
    }
}

/// Hessian of a scalar function with respect to the metric of `pg`.
fn covariant_hessian(pg: &PointGeometry, grad: &[f64], second: &DMatrix<f64>) -> DMatrix<f64> {
    let n = pg.n();
    let gam = pg.christoffel();
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = second[(i, j)];
        for k in 0..n {
            v -= gam[k][(i, j)] * grad[k];
        }
        v
    })
}

/// Check the transfer formulas for `f' = I(f)` relative to `base`, along the
/// distribution with coordinate basis `delta(x)` (`n x d`).
pub fn sff_transfer_check(
    f: MapRef,
    base: BaseMetric,
    points: &[Vec<f64>],
    delta: &dyn Fn(&[f64]) -> DMatrix<f64>,
    hessian: HessianSource,
    tol: &Tolerance,
) -> Result<SffTransferData> {
    let lift = IsometricRepresentative {
        inner: f.clone(),
        base,
    };
    let mut out = Vec::with_capacity(points.len());
    for (k, x) in points.iter().enumerate() {
        let n = x.len();
        let pf = PointGeometry::at(f.as_ref(), x, 3, None, tol)?;
        let jl = lift.taylor(x, 3)?;
        let pl = PointGeometry::from_jets(x, &lift.ambient(), &jl, None, tol)?;
        let h = &pl.metric;
        // phi = <f', e0>
        let phi_jet = &jl[1];
        let phi = phi_jet.value();
        let dphi: Vec<f64> = (0..n).map(|i| phi_jet.deriv(&[i])).collect();
        let second = match hessian {
            HessianSource::ClosedForm => DMatrix::from_fn(n, n, |i, j| phi_jet.deriv(&[i, j])),
            HessianSource::FiniteDifference { step } => {
                let val = |y: &[f64]| -> Result<f64> { Ok(lift.eval(y)?[1]) };
                let mut m = DMatrix::zeros(n, n);
                let c = [(-2.0, -1.0 / 12.0), (-1.0, 16.0 / 12.0), (0.0, -30.0 / 12.0), (1.0, 16.0 / 12.0), (2.0, -1.0 / 12.0)];
                let d = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
                for i in 0..n {
                    let mut acc = 0.0;
                    for &(s, w) in &c {
                        let mut y = x.clone();
                        y[i] += s * step;
                        acc += w * val(&y)?;
                    }
                    m[(i, i)] = acc / (step * step);
                    for j in 0..i {
                        let mut acc = 0.0;
                        for &(si, wi) in &d {
                            for &(sj, wj) in &d {
                                let mut y = x.clone();
                                y[i] += si * step;
                                y[j] += sj * step;
                                acc += wi * wj * val(&y)?;
                            }
                        }
                        m[(i, j)] = acc / (step * step);
                        m[(j, i)] = m[(i, j)];
                    }
                }
                m
            }
        };
        let hess = covariant_hessian(&pl, &dphi, &second);
        let grad = &pl.metric_inv * DVector::from_vec(dphi.clone());
        let e0 = LightConeModel::new(pf.ambient.dim()).e0();
        let y = &pf.position;
        let dpsi = |v: &DVector<f64>| psi_push(y, v);
        let xi = &e0 / phi - dpsi(&(&pf.d1 * &grad));
        let fp = &pl.position;

        let mut sff_res: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let lhs = pl.alpha.get(i, j);
                let rhs = dpsi(&(pf.alpha.get(i, j) * phi)) - &xi * h[(i, j)] + fp * (hess[(i, j)] / phi);
                sff_res = sff_res.max((lhs - rhs).amax());
            }
        }

        let dbasis = delta(x);
        let zl = metric_orthonormal(&dbasis, h);
        // lambda by least squares over Delta x Delta, and its spread over unit directions
        let hz = zl.transpose() * &hess * &zl;
        let d = zl.ncols();
        let lambda = if d > 0 { hz.trace() / d as f64 } else { 0.0 };
        let mut spread: f64 = 0.0;
        for a in 0..d {
            spread = spread.max((hz[(a, a)] - lambda).abs());
            for b in 0..a {
                spread = spread.max(hz[(a, b)].abs());
            }
        }
        let eta_p = leaf_mean_curvature_at(&pl, &dbasis);
        let eta = leaf_mean_curvature_at(&pf, &dbasis);
        let mut ruling: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let za = zl.column(a).into_owned();
                let zb = zl.column(b).into_owned();
                let want = if a == b { eta_p.clone() } else { DVector::zeros(eta_p.len()) };
                ruling = ruling.max((pl.alpha_at(&za, &zb) - want).amax());
            }
        }
        if ruling > 1e-6 {
            return Err(Error::NotConformallyRuled { residual: ruling });
        }
        let eta_rhs = (dpsi(&eta) - &xi * phi + fp * lambda) / phi;
        let eta_res = (&eta_p - eta_rhs).amax();

        // beta forms
        let gf = &pf.metric;
        let mut beta_res: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let bp = pl.alpha.get(i, j) - &eta_p * h[(i, j)];
                let bf = pf.alpha.get(i, j) - &eta * gf[(i, j)];
                let rhs = dpsi(&bf) * phi + fp * ((hess[(i, j)] - lambda * h[(i, j)]) / phi);
                beta_res = beta_res.max((bp - rhs).amax());
            }
        }
        let _ = k;
        out.push(SffTransferPoint {
            phi,
            lambda,
            xi,
            eta,
            eta_prime: eta_p,
            sff_residual: sff_res,
            beta_residual: beta_res,
            lambda_spread: spread,
            eta_residual: eta_res,
            ruling_residual: ruling,
        });
    }
    Ok(SffTransferData { points: out })
}
