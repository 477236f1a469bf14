//! Immersions sampled on chart grids and the classical submanifold calculus
//! on them: induced metrics, fundamental data with aligned normal frames,
//! conformal factors, leaf mean curvature and bracket residuals.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::{ChartMap, Grid, MapRef};
use crate::error::{Error, Result};
use crate::geometry::PointGeometry;
use crate::linalg::{numerical_rank, ScalarProduct, Signature, Subspace, Tolerance};
use crate::taylor::Jet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetSource {
    ClosedForm,
    /// Central differences of point values; third derivatives use `10 * step`.
    FiniteDifference { step: f64 },
}

/// An immersion with position and derivatives up to order 3 at every grid point.
#[derive(Debug, Clone)]
pub struct ImmersionJet {
    pub grid: Grid,
    pub ambient: ScalarProduct,
    pub source: JetSource,
    jets: Vec<Vec<Jet>>,
    map: MapRef,
}

const FIRST: [(f64, f64); 4] = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
const SECOND: [(f64, f64); 5] = [
    (-2.0, -1.0 / 12.0),
    (-1.0, 16.0 / 12.0),
    (0.0, -30.0 / 12.0),
    (1.0, 16.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Second partials of `map` at `x` by 5-point stencils (`n * n` vectors).
fn fd_second(map: &dyn ChartMap, x: &[f64], h: f64) -> Result<Vec<DVector<f64>>> {
    let n = x.len();
    let m = map.ambient().dim();
    let mut out = vec![DVector::zeros(m); n * n];
    for i in 0..n {
        let mut acc = DVector::zeros(m);
        for &(s, w) in &SECOND {
            acc += map.eval(&shifted(x, &[(i, s * h)]))? * w;
        }
        out[i * n + i] = acc / (h * h);
        for j in 0..i {
            let mut acc = DVector::zeros(m);
            for &(si, wi) in &FIRST {
                for &(sj, wj) in &FIRST {
                    acc += map.eval(&shifted(x, &[(i, si * h), (j, sj * h)]))? * (wi * wj);
                }
            }
            let v = acc / (h * h);
            out[i * n + j] = v.clone();
            out[j * n + i] = v;
        }
    }
    Ok(out)
}

/// Finite-difference 3-jet of `map` at `x`.
pub fn fd_taylor(map: &dyn ChartMap, x: &[f64], h: f64) -> Result<Vec<Jet>> {
    let n = x.len();
    let m = map.ambient().dim();
    let value = map.eval(x)?;
    let mut grad = vec![DVector::zeros(m); n];
    for (i, g) in grad.iter_mut().enumerate() {
        for &(s, w) in &FIRST {
            *g += map.eval(&shifted(x, &[(i, s * h)]))? * w;
        }
        *g /= h;
    }
    let hess = fd_second(map, x, h)?;
    let h3 = 10.0 * h;
    let mut third = vec![DVector::zeros(m); n * n * n];
    for k in 0..n {
        let mut acc = vec![DVector::zeros(m); n * n];
        for &(s, w) in &FIRST {
            let sec = fd_second(map, &shifted(x, &[(k, s * h3)]), h3)?;
            for (a, v) in acc.iter_mut().zip(sec) {
                *a += v * w;
            }
        }
        for ij in 0..n * n {
            third[ij * n + k] = &acc[ij] / h3;
        }
    }
    // symmetrize over all index orders
    let mut sym = vec![DVector::zeros(m); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let perms = [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)];
                let mut s = DVector::zeros(m);
                for (a, b, c) in perms {
                    s += &third[(a * n + b) * n + c];
                }
                sym[(i * n + j) * n + k] = s / 6.0;
            }
        }
    }
    Ok((0..m)
        .map(|c| {
            let g: Vec<f64> = grad.iter().map(|v| v[c]).collect();
            let hh: Vec<f64> = hess.iter().map(|v| v[c]).collect();
            let t: Vec<f64> = sym.iter().map(|v| v[c]).collect();
            Jet::from_derivatives(n, 3, value[c], Some(&g), Some(&hh), Some(&t))
        })
        .collect())
}

impl ImmersionJet {
    pub fn closed_form(map: MapRef, grid: &Grid) -> Result<ImmersionJet> {
        Self::build(map, grid, JetSource::ClosedForm)
    }

    pub fn finite_difference(map: MapRef, grid: &Grid, step: f64) -> Result<ImmersionJet> {
        if !(step > 0.0) {
            return Err(Error::InvalidInput("finite-difference step must be positive".into()));
        }
        Self::build(map, grid, JetSource::FiniteDifference { step })
    }

    fn build(map: MapRef, grid: &Grid, source: JetSource) -> Result<ImmersionJet> {
        if grid.dim() != map.domain_dim() {
            return Err(Error::InvalidInput(format!(
                "grid dimension {} differs from chart dimension {} of {}",
                grid.dim(),
                map.domain_dim(),
                map.name()
            )));
        }
        let jets = grid
            .points()
            .iter()
            .map(|x| match source {
                JetSource::ClosedForm => map.taylor(x, 3),
                JetSource::FiniteDifference { step } => fd_taylor(map.as_ref(), x, step),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ImmersionJet {
            grid: grid.clone(),
            ambient: map.ambient(),
            source,
            jets,
            map,
        })
    }

    /// Jets at an arbitrary chart point, from the same source as the grid jets.
    pub fn jets_at(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        match self.source {
            JetSource::ClosedForm => self.map.taylor(x, order),
            JetSource::FiniteDifference { step } => {
                let jets = fd_taylor(self.map.as_ref(), x, step)?;
                Ok(if order < 3 { jets.iter().map(|j| j.truncate(order)).collect() } else { jets })
            }
        }
    }

    pub fn map(&self) -> &MapRef {
        &self.map
    }

    pub fn n(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.jets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }

    pub fn taylor(&self, k: usize) -> &[Jet] {
        &self.jets[k]
    }

    pub fn position(&self, k: usize) -> DVector<f64> {
        DVector::from_iterator(self.ambient.dim(), self.jets[k].iter().map(|j| j.value()))
    }

    pub fn d1(&self, k: usize) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(self.ambient.dim(), n, |c, i| self.jets[k][c].deriv(&[i]))
    }

    pub fn d2(&self, k: usize, i: usize, j: usize) -> DVector<f64> {
        DVector::from_iterator(self.ambient.dim(), self.jets[k].iter().map(|c| c.deriv(&[i, j])))
    }

    pub fn d3(&self, k: usize, i: usize, j: usize, l: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.ambient.dim(),
            self.jets[k].iter().map(|c| c.deriv(&[i, j, l])),
        )
    }
}

/// Gram matrices of the differential, checking the immersion condition.
pub fn induced_metric(j: &ImmersionJet, tol: &Tolerance) -> Result<Vec<DMatrix<f64>>> {
    (0..j.len())
        .map(|k| {
            let d1 = j.d1(k);
            let rank = numerical_rank(&d1, tol);
            if rank < j.n() {
                return Err(Error::NotImmersion {
                    point: k,
                    rank,
                    expected: j.n(),
                });
            }
            Ok(d1.transpose() * j.ambient.gram() * d1)
        })
        .collect()
}

/// Per-point geometry with normal frames aligned along a spanning tree of the grid.
#[derive(Debug, Clone)]
pub struct FundamentalData {
    pub points: Vec<PointGeometry>,
    pub max_alignment_residual: f64,
}

/// Frames whose alignment residual exceeds this are rejected.
pub const ALIGNMENT_THRESHOLD: f64 = 0.5;

/// Parent of a grid point in the sweep: step back along the last advanced axis.
pub fn sweep_parent(grid: &Grid, k: usize) -> Option<usize> {
    let mut idx = grid.multi_index(k);
    for a in (0..grid.dim()).rev() {
        if idx[a] > 0 {
            idx[a] -= 1;
            return Some(grid.flat_index(&idx));
        }
    }
    None
}

impl FundamentalData {
    pub fn points(&self) -> &[PointGeometry] {
        &self.points
    }

    pub fn metric(&self, k: usize) -> &DMatrix<f64> {
        &self.points[k].metric
    }

    pub fn normal_frame(&self, k: usize) -> &DMatrix<f64> {
        &self.points[k].normal_frame
    }

    pub fn shape_operators(&self, k: usize) -> Vec<DMatrix<f64>> {
        let pg = &self.points[k];
        pg.normal_frame
            .column_iter()
            .map(|c| pg.shape_operator(&c.into_owned()))
            .collect()
    }
}

pub fn fundamental_data(j: &ImmersionJet, tol: &Tolerance) -> Result<FundamentalData> {
    let mut points: Vec<PointGeometry> = Vec::with_capacity(j.len());
    let mut worst: f64 = 0.0;
    for k in 0..j.len() {
        let x = j.grid.point(k);
        // parent frame advanced to first order along the step
        let reference = sweep_parent(&j.grid, k).map(|p| {
            let parent: &PointGeometry = &points[p];
            let mut r = parent.normal_frame.clone();
            for (i, d) in parent.frame_derivs.iter().enumerate() {
                r += d * (x[i] - parent.x[i]);
            }
            r
        });
        let mut pg = PointGeometry::from_jets(&x, &j.ambient, j.taylor(k), reference.as_ref(), tol)
            .map_err(|e| match e {
                Error::NotImmersion { rank, expected, .. } => Error::NotImmersion {
                    point: k,
                    rank,
                    expected,
                },
                Error::FrameAlignmentFailure { residual, .. } => Error::FrameAlignmentFailure { point: k, residual },
                other => other,
            })?;
        if reference.is_none() {
            pg.alignment_residual = 0.0;
        }
        if pg.alignment_residual > ALIGNMENT_THRESHOLD {
            return Err(Error::FrameAlignmentFailure {
                point: k,
                residual: pg.alignment_residual,
            });
        }
        worst = worst.max(pg.alignment_residual);
        points.push(pg);
    }
    Ok(FundamentalData {
        points,
        max_alignment_residual: worst,
    })
}

/// Conformal factor `phi` with `metric(g) = phi^2 metric(f)` and the relative residual.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    pub phi: Vec<f64>,
    pub residual: Vec<f64>,
}

impl ConformalFactor {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().cloned().fold(0.0, f64::max)
    }
}

/// Least-squares factor between two Gram matrices and its relative residual.
pub fn metric_ratio(gf: &DMatrix<f64>, gg: &DMatrix<f64>) -> (f64, f64) {
    let denom = gf.dot(gf);
    let phi2 = gg.dot(gf) / denom;
    let res = (gg - gf * phi2).norm() / gg.norm().max(1e-300);
    (phi2, res)
}

pub fn conformal_factor(jf: &ImmersionJet, jg: &ImmersionJet, tol: &Tolerance) -> Result<ConformalFactor> {
    if jf.grid != jg.grid {
        return Err(Error::InvalidInput("conformal factor needs a shared grid".into()));
    }
    let mf = induced_metric(jf, tol)?;
    let mg = induced_metric(jg, tol)?;
    let threshold = tol.rel.sqrt().max(1e-8);
    let mut phi = Vec::with_capacity(mf.len());
    let mut residual = Vec::with_capacity(mf.len());
    for (k, (a, b)) in mf.iter().zip(&mg).enumerate() {
        let (phi2, res) = metric_ratio(a, b);
        if !(phi2 > 0.0) || res > threshold {
            return Err(Error::NotConformal { point: k, residual: res });
        }
        phi.push(phi2.sqrt());
        residual.push(res);
    }
    Ok(ConformalFactor { phi, residual })
}

type FrameFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A tangent distribution given by per-point coordinate bases (`n x d`).
#[derive(Clone)]
pub struct DistributionFrame {
    pub grid: Grid,
    pub bases: Vec<DMatrix<f64>>,
    generator: Option<Arc<FrameFn>>,
}

impl std::fmt::Debug for DistributionFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistributionFrame")
            .field("grid", &self.grid)
            .field("rank", &self.rank())
            .field("smooth", &self.generator.is_some())
            .finish()
    }
}

impl DistributionFrame {
    /// Span of the listed coordinate axes.
    pub fn coordinate(grid: &Grid, axes: &[usize]) -> DistributionFrame {
        let n = grid.dim();
        let axes = axes.to_vec();
        Self::from_fn(grid, move |_| {
            DMatrix::from_fn(n, axes.len(), |i, a| if i == axes[a] { 1.0 } else { 0.0 })
        })
    }

    /// Frame fields evaluable anywhere in the chart (brackets by differentiation).
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> DistributionFrame {
        let bases = grid.points().iter().map(|x| f(x)).collect();
        DistributionFrame {
            grid: grid.clone(),
            bases,
            generator: Some(Arc::new(f)),
        }
    }

    /// Frames known only at grid points (brackets by grid differences).
    pub fn from_bases(grid: &Grid, bases: Vec<DMatrix<f64>>) -> Result<DistributionFrame> {
        if bases.len() != grid.len() {
            return Err(Error::InvalidInput("one basis per grid point required".into()));
        }
        Ok(DistributionFrame {
            grid: grid.clone(),
            bases,
            generator: None,
        })
    }

    pub fn rank(&self) -> usize {
        self.bases.first().map(|b| b.ncols()).unwrap_or(0)
    }

    pub fn basis(&self, k: usize) -> &DMatrix<f64> {
        &self.bases[k]
    }

    pub fn eval(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.generator.as_ref().map(|g| g(x))
    }

    fn frame_derivative(&self, k: usize, axis: usize) -> Option<DMatrix<f64>> {
        if let Some(g) = &self.generator {
            let x = self.grid.point(k);
            let h = 1e-4 * (1.0 + x[axis].abs());
            let mut acc = DMatrix::zeros(self.grid.dim(), self.rank());
            for &(s, w) in &FIRST {
                acc += g(&shifted(&x, &[(axis, s * h)])) * w;
            }
            return Some(acc / h);
        }
        let idx = self.grid.multi_index(k);
        let c = self.grid.counts[axis];
        if c < 2 {
            return None;
        }
        let h = self.grid.spacing(axis);
        let at = |i: usize| {
            let mut j = idx.clone();
            j[axis] = i;
            &self.bases[self.grid.flat_index(&j)]
        };
        let i = idx[axis];
        Some(if i == 0 {
            (at(1) - at(0)) / h
        } else if i + 1 == c {
            (at(i) - at(i - 1)) / h
        } else {
            (at(i + 1) - at(i - 1)) / (2.0 * h)
        })
    }

    /// Per point, the largest component of `[X_a, X_b]` outside `D`, relative to `|X_a||X_b|`.
    pub fn bracket_residual(&self) -> Vec<f64> {
        let n = self.grid.dim();
        let d = self.rank();
        (0..self.grid.len())
            .map(|k| {
                let b = &self.bases[k];
                if d < 2 {
                    return 0.0;
                }
                let derivs: Vec<Option<DMatrix<f64>>> = (0..n).map(|ax| self.frame_derivative(k, ax)).collect();
                let dir = |v: &DVector<f64>, col: usize| -> DVector<f64> {
                    let mut out = DVector::zeros(n);
                    for (ax, dm) in derivs.iter().enumerate() {
                        if let Some(dm) = dm {
                            out += dm.column(col) * v[ax];
                        }
                    }
                    out
                };
                let span = Subspace::span(&ScalarProduct::euclidean(n), b, &Tolerance::default());
                let p = span.projector();
                let mut worst: f64 = 0.0;
                for a in 0..d {
                    for c in 0..a {
                        let xa = b.column(a).into_owned();
                        let xc = b.column(c).into_owned();
                        let br = dir(&xa, c) - dir(&xc, a);
                        let out = &br - &p * &br;
                        worst = worst.max(out.norm() / (xa.norm() * xc.norm()).max(1e-300));
                    }
                }
                worst
            })
            .collect()
    }
}

/// Orthonormalize the columns of `z` in the metric `g` (Gram-Schmidt).
pub fn metric_orthonormal(z: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for c in z.column_iter() {
        let mut v = c.into_owned();
        for u in &cols {
            let s = (u.transpose() * g * &v)[(0, 0)];
            v -= u * s;
        }
        let nn = (v.transpose() * g * &v)[(0, 0)];
        if nn > 1e-24 {
            cols.push(v / nn.sqrt());
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(z.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// `(1/d) trace_D alpha` over a metric-orthonormal basis of `D` (coordinate columns).
pub fn leaf_mean_curvature_at(pg: &PointGeometry, d_basis: &DMatrix<f64>) -> DVector<f64> {
    let z = metric_orthonormal(d_basis, &pg.metric);
    let mut eta = DVector::zeros(pg.ambient.dim());
    if z.ncols() == 0 {
        return eta;
    }
    for c in z.column_iter() {
        let c = c.into_owned();
        eta += pg.alpha_at(&c, &c);
    }
    eta / z.ncols() as f64
}

pub fn leaf_mean_curvature(fd: &FundamentalData, d: &DistributionFrame) -> Vec<DVector<f64>> {
    fd.points
        .iter()
        .zip(&d.bases)
        .map(|(pg, b)| leaf_mean_curvature_at(pg, b))
        .collect()
}

pub fn bracket_residual(d: &DistributionFrame) -> Vec<f64> {
    d.bracket_residual()
}

/// Per-point bases of a constant-rank subbundle, aligned across the grid.
#[derive(Debug, Clone)]
pub struct SubbundleFrame {
    pub grid: Grid,
    pub subspaces: Vec<Subspace>,
    /// Euclidean-orthonormal columns, rotated to follow the sweep parent.
    pub bases: Vec<DMatrix<f64>>,
    pub rank: usize,
}

impl SubbundleFrame {
    pub fn from_subspaces(grid: &Grid, subspaces: Vec<Subspace>, what: &str) -> Result<SubbundleFrame> {
        if subspaces.len() != grid.len() {
            return Err(Error::InvalidInput("one subspace per grid point required".into()));
        }
        let rank = subspaces.first().map(|s| s.rank()).unwrap_or(0);
        if let Some(s) = subspaces.iter().find(|s| s.rank() != rank) {
            return Err(Error::RankJump {
                what: what.to_string(),
                expected: rank,
                found: s.rank(),
            });
        }
        let mut bases: Vec<DMatrix<f64>> = Vec::with_capacity(subspaces.len());
        for (k, s) in subspaces.iter().enumerate() {
            let own = s.basis().clone();
            let aligned = match sweep_parent(grid, k) {
                Some(p) if rank > 0 => procrustes_align(&own, &bases[p]),
                _ => own,
            };
            bases.push(aligned);
        }
        Ok(SubbundleFrame {
            grid: grid.clone(),
            subspaces,
            bases,
            rank,
        })
    }

    pub fn signature(&self, k: usize) -> Signature {
        self.subspaces[k].signature()
    }
}

/// Rotate the orthonormal columns `own` within their span to best match `target`.
fn procrustes_align(own: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    let m = own.transpose() * target;
    let svd = m.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => own * (u * vt),
        _ => own.clone(),
    }
}
