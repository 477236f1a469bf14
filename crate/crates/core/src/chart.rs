//! Chart grids and parametrized maps evaluated as truncated Taylor jets.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::ScalarProduct;
use crate::taylor::Jet;

/// Regular box grid `prod_i [lo_i, hi_i]` with `counts_i` samples per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Grid> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
            return Err(Error::InvalidInput("grid axes disagree in length".into()));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidInput("grid axis with zero samples".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidInput("grid bounds must satisfy lo <= hi".into()));
        }
        let total: usize = counts.iter().product();
        if total > 10_000 {
            return Err(Error::InvalidInput(format!("grid has {total} points (limit 10000)")));
        }
        Ok(Grid { lo, hi, counts })
    }

    /// Cube `[c - half, c + half]^n` with `count` samples per axis.
    pub fn cube(center: &[f64], half: f64, count: usize) -> Grid {
        Grid::new(
            center.iter().map(|c| c - half).collect(),
            center.iter().map(|c| c + half).collect(),
            vec![count; center.len()],
        )
        .expect("valid cube grid")
    }

    pub fn single(point: &[f64]) -> Grid {
        Grid::new(point.to_vec(), point.to_vec(), vec![1; point.len()]).expect("valid point grid")
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if self.counts[axis] <= 1 {
            0.0
        } else {
            (self.hi[axis] - self.lo[axis]) / (self.counts[axis] - 1) as f64
        }
    }

    /// Smallest positive spacing, or the largest extent if all axes are degenerate.
    pub fn scale(&self) -> f64 {
        let s = (0..self.dim())
            .map(|a| self.spacing(a))
            .filter(|s| *s > 0.0)
            .fold(f64::INFINITY, f64::min);
        if s.is_finite() {
            s
        } else {
            1.0
        }
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = k % self.counts[a];
            k /= self.counts[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.multi_index(k)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lo[a] + self.spacing(a) * i as f64)
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Axis neighbours (2n-connectivity).
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        let idx = self.multi_index(k);
        let mut out = Vec::new();
        for a in 0..self.dim() {
            if idx[a] > 0 {
                let mut j = idx.clone();
                j[a] -= 1;
                out.push(self.flat_index(&j));
            }
            if idx[a] + 1 < self.counts[a] {
                let mut j = idx.clone();
                j[a] += 1;
                out.push(self.flat_index(&j));
            }
        }
        out
    }

    /// Index of the grid point closest to the box centre.
    pub fn central_index(&self) -> usize {
        let idx: Vec<usize> = self.counts.iter().map(|c| (c - 1) / 2).collect();
        self.flat_index(&idx)
    }
}

/// A smooth map from a chart of `R^n` into a flat space, evaluated on jets.
///
/// Pointwise maps implement [`ChartMap::apply`]; maps whose Taylor expansion
/// needs more than composition override [`ChartMap::taylor`] and route
/// `apply` through [`compose_via_taylor`].
pub trait ChartMap: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn domain_dim(&self) -> usize;
    fn ambient(&self) -> ScalarProduct;

    /// The map applied to jets in arbitrary variables.
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>>;

    /// Taylor expansion of every ambient coordinate at `x`.
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        check_point(self, x)?;
        self.apply(&Jet::seed(x, order))
    }

    fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        let jets = self.taylor(x, 0)?;
        Ok(DVector::from_iterator(jets.len(), jets.iter().map(|j| j.value())))
    }
}

pub type MapRef = Arc<dyn ChartMap>;

fn check_point<M: ChartMap + ?Sized>(map: &M, x: &[f64]) -> Result<()> {
    if x.len() != map.domain_dim() {
        return Err(Error::InvalidInput(format!(
            "{} expects {} coordinates, got {}",
            map.name(),
            map.domain_dim(),
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite chart point".into()));
    }
    Ok(())
}

/// Compose a map defined by its Taylor expansions with jets in other variables.
pub fn compose_via_taylor<M: ChartMap + ?Sized>(map: &M, args: &[Jet]) -> Result<Vec<Jet>> {
    if args.len() != map.domain_dim() {
        return Err(Error::InvalidInput(format!(
            "{} expects {} arguments, got {}",
            map.name(),
            map.domain_dim(),
            args.len()
        )));
    }
    let order = args.first().map(|a| a.order()).unwrap_or(0);
    let x: Vec<f64> = args.iter().map(|a| a.value()).collect();
    let jets = map.taylor(&x, order)?;
    Ok(jets.iter().map(|j| j.substitute(args)).collect())
}

fn arity(name: &str, args: &[Jet], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(Error::InvalidInput(format!(
            "{name} expects {n} arguments, got {}",
            args.len()
        )));
    }
    Ok(())
}

fn zero_like(args: &[Jet]) -> Jet {
    args[0].constant_like(0.0)
}

/// `x -> (x, 0, ..., 0)` in `R^{n+p}`.
#[derive(Debug, Clone)]
pub struct Plane {
    pub n: usize,
    pub codim: usize,
}

impl ChartMap for Plane {
    fn name(&self) -> String {
        format!("plane(n={}, p={})", self.n, self.codim)
    }
    fn domain_dim(&self) -> usize {
        self.n
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::euclidean(self.n + self.codim)
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("plane", args, self.n)?;
        let mut out = args.to_vec();
        out.extend((0..self.codim).map(|_| zero_like(args)));
        Ok(out)
    }
}

/// Round sphere of radius `r` in `R^{n+1}`, hyperspherical angles.
#[derive(Debug, Clone)]
pub struct Sphere {
    pub n: usize,
    pub radius: f64,
}

impl ChartMap for Sphere {
    fn name(&self) -> String {
        format!("sphere(n={}, r={})", self.n, self.radius)
    }
    fn domain_dim(&self) -> usize {
        self.n
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::euclidean(self.n + 1)
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("sphere", args, self.n)?;
        let mut out = Vec::with_capacity(self.n + 1);
        let mut prefix = args[0].constant_like(self.radius);
        for a in args {
            out.push(&prefix * &a.cos());
            prefix = &prefix * &a.sin();
        }
        out.push(prefix);
        Ok(out)
    }
}

/// `S^1(r) x R^{n-1}` in `R^{n+1}`, unit-speed along the circle.
#[derive(Debug, Clone)]
pub struct Cylinder {
    pub n: usize,
    pub radius: f64,
}

impl ChartMap for Cylinder {
    fn name(&self) -> String {
        format!("cylinder(n={}, r={})", self.n, self.radius)
    }
    fn domain_dim(&self) -> usize {
        self.n
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::euclidean(self.n + 1)
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("cylinder", args, self.n)?;
        let r = self.radius;
        let s = args[0].scale(1.0 / r);
        let mut out = vec![s.cos().scale(r), s.sin().scale(r)];
        out.extend(args[1..].iter().cloned());
        Ok(out)
    }
}

/// Cone `(t, y) -> t (rho sigma(y), sqrt(1 - rho^2))` over a sphere of radius
/// `rho < 1` in the unit sphere of `R^{n+1}`.
#[derive(Debug, Clone)]
pub struct ConeOverSphere {
    pub n: usize,
    pub rho: f64,
}

impl ChartMap for ConeOverSphere {
    fn name(&self) -> String {
        format!("cone-over-sphere(n={}, rho={})", self.n, self.rho)
    }
    fn domain_dim(&self) -> usize {
        self.n
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::euclidean(self.n + 1)
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("cone-over-sphere", args, self.n)?;
        if !(self.rho > 0.0 && self.rho < 1.0) || self.n < 2 {
            return Err(Error::InvalidInput("cone needs n >= 2 and 0 < rho < 1".into()));
        }
        let t = &args[0];
        let sigma = Sphere {
            n: self.n - 1,
            radius: self.rho,
        }
        .apply(&args[1..])?;
        let mut out: Vec<Jet> = sigma.iter().map(|s| t * s).collect();
        out.push(t.scale((1.0 - self.rho * self.rho).sqrt()));
        Ok(out)
    }
}

/// Torus of revolution in `R^3`: `((R + r cos v) cos u, (R + r cos v) sin u, r sin v)`.
#[derive(Debug, Clone)]
pub struct Torus {
    pub big: f64,
    pub small: f64,
}

impl ChartMap for Torus {
    fn name(&self) -> String {
        format!("torus(R={}, r={})", self.big, self.small)
    }
    fn domain_dim(&self) -> usize {
        2
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::euclidean(3)
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("torus", args, 2)?;
        let (u, v) = (&args[0], &args[1]);
        let rho = v.cos().scale(self.small) + self.big;
        Ok(vec![&rho * &u.cos(), &rho * &u.sin(), v.sin().scale(self.small)])
    }
}

/// Graph hypersurface `x -> (x, sum_i c_i x_i^2 / 2 + sum_i d_i x_i^3 / 6)`.
#[derive(Debug, Clone)]
pub struct Graph {
    pub quadratic: Vec<f64>,
    pub cubic: Vec<f64>,
}

impl ChartMap for Graph {
    fn name(&self) -> String {
        format!("graph(c={:?})", self.quadratic)
    }
    fn domain_dim(&self) -> usize {
        self.quadratic.len()
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::euclidean(self.quadratic.len() + 1)
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("graph", args, self.domain_dim())?;
        let mut h = zero_like(args);
        for (i, a) in args.iter().enumerate() {
            let sq = a * a;
            h = h + sq.scale(self.quadratic[i] / 2.0);
            let d = self.cubic.get(i).copied().unwrap_or(0.0);
            if d != 0.0 {
                h = h + (&sq * a).scale(d / 6.0);
            }
        }
        let mut out = args.to_vec();
        out.push(h);
        Ok(out)
    }
}

/// Product of planar circles `x -> (r_i cos(x_i / r_i), r_i sin(x_i / r_i))_i` in `R^{2n}`.
#[derive(Debug, Clone)]
pub struct CircleProduct {
    pub radii: Vec<f64>,
}

impl ChartMap for CircleProduct {
    fn name(&self) -> String {
        format!("circle-product(r={:?})", self.radii)
    }
    fn domain_dim(&self) -> usize {
        self.radii.len()
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::euclidean(2 * self.radii.len())
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("circle-product", args, self.domain_dim())?;
        let mut out = Vec::with_capacity(2 * args.len());
        for (a, &r) in args.iter().zip(&self.radii) {
            let s = a.scale(1.0 / r);
            out.push(s.cos().scale(r));
            out.push(s.sin().scale(r));
        }
        Ok(out)
    }
}

/// `(u, x) -> (r cos(x1/r), r sin(x1/r), x2, ..., xn, u + k x1)` in `R^{n+2}`.
#[derive(Debug, Clone)]
pub struct ShearedCylinder {
    pub n: usize,
    pub radius: f64,
    pub shear: f64,
}

impl ChartMap for ShearedCylinder {
    fn name(&self) -> String {
        format!("sheared-cylinder(n={}, r={}, k={})", self.n, self.radius, self.shear)
    }
    fn domain_dim(&self) -> usize {
        self.n + 1
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::euclidean(self.n + 2)
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("sheared-cylinder", args, self.n + 1)?;
        let mut out = Cylinder {
            n: self.n,
            radius: self.radius,
        }
        .apply(&args[1..])?;
        out.push(&args[0] + &args[1].scale(self.shear));
        Ok(out)
    }
}

/// Lorentz-space coordinates of `Psi(y) = -|y|^2/2 e0 + e1 + sum y_i e_{i+1}`.
pub fn psi_jets(y: &[Jet]) -> Vec<Jet> {
    let mut sq = y[0].constant_like(0.0);
    for c in y {
        sq = sq + c * c;
    }
    let mut out = vec![sq.scale(-0.5), y[0].constant_like(1.0)];
    out.extend(y.iter().cloned());
    out
}

/// `(u, x) -> Psi(x) + (u + k x1) w` in `L^{n+2+extra}`, `Psi(x)` padded with zeros.
#[derive(Debug, Clone)]
pub struct PsiLine {
    pub n: usize,
    pub extra: usize,
    pub direction: DVector<f64>,
    pub shear: f64,
}

impl PsiLine {
    pub fn new(n: usize, extra: usize, direction: DVector<f64>, shear: f64) -> Result<PsiLine> {
        if direction.len() != n + 2 + extra {
            return Err(Error::InvalidInput(format!(
                "direction must have {} components",
                n + 2 + extra
            )));
        }
        Ok(PsiLine {
            n,
            extra,
            direction,
            shear,
        })
    }
}

impl ChartMap for PsiLine {
    fn name(&self) -> String {
        format!("psi-line(n={}, extra={}, k={})", self.n, self.extra, self.shear)
    }
    fn domain_dim(&self) -> usize {
        self.n + 1
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::light_cone(self.n + self.extra)
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("psi-line", args, self.n + 1)?;
        let t = &args[0] + &args[1].scale(self.shear);
        let mut out = psi_jets(&args[1..]);
        out.extend((0..self.extra).map(|_| zero_like(args)));
        for (o, w) in out.iter_mut().zip(self.direction.iter()) {
            if *w != 0.0 {
                *o = &*o + &t.scale(*w);
            }
        }
        Ok(out)
    }
}

/// Inversion `y -> c + r^2 (y - c) / |y - c|^2` composed after `inner`.
#[derive(Debug, Clone)]
pub struct Inversion {
    pub inner: MapRef,
    pub center: DVector<f64>,
    pub radius: f64,
}

impl ChartMap for Inversion {
    fn name(&self) -> String {
        format!("inversion({})", self.inner.name())
    }
    fn domain_dim(&self) -> usize {
        self.inner.domain_dim()
    }
    fn ambient(&self) -> ScalarProduct {
        self.inner.ambient()
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        let amb = self.inner.ambient();
        if !amb.is_euclidean() {
            return Err(Error::InvalidInput("inversion needs a Euclidean ambient".into()));
        }
        let y = self.inner.apply(args)?;
        if self.center.len() != y.len() {
            return Err(Error::InvalidInput("inversion centre has wrong dimension".into()));
        }
        let d: Vec<Jet> = y.iter().zip(self.center.iter()).map(|(a, c)| a - *c).collect();
        let mut sq = zero_like(args);
        for c in &d {
            sq = sq + c * c;
        }
        if sq.value() <= 1e-24 {
            return Err(Error::InvalidInput("inversion centre lies on the image".into()));
        }
        let k = sq.recip().scale(self.radius * self.radius);
        Ok(d.iter()
            .zip(self.center.iter())
            .map(|(a, c)| a * &k + *c)
            .collect())
    }
}

/// `Psi o inner`, landing in the light cone of `L^{m+2}`.
#[derive(Debug, Clone)]
pub struct PsiLift {
    pub inner: MapRef,
}

impl ChartMap for PsiLift {
    fn name(&self) -> String {
        format!("psi({})", self.inner.name())
    }
    fn domain_dim(&self) -> usize {
        self.inner.domain_dim()
    }
    fn ambient(&self) -> ScalarProduct {
        ScalarProduct::light_cone(self.inner.ambient().dim())
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        if !self.inner.ambient().is_euclidean() {
            return Err(Error::InvalidInput("Psi-lift needs a Euclidean ambient".into()));
        }
        Ok(psi_jets(&self.inner.apply(args)?))
    }
}

/// Ambient affine motion `y -> A y + b` after `inner` (`A` need not be an isometry).
#[derive(Debug, Clone)]
pub struct AffineImage {
    pub inner: MapRef,
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub ambient: ScalarProduct,
}

impl AffineImage {
    pub fn scaled(inner: MapRef, k: f64) -> AffineImage {
        let m = inner.ambient().dim();
        AffineImage {
            ambient: inner.ambient(),
            inner,
            matrix: DMatrix::identity(m, m) * k,
            offset: DVector::zeros(m),
        }
    }

    /// Composition of plane rotations `(i, j, angle)` followed by a translation.
    pub fn rigid(inner: MapRef, rotations: &[(usize, usize, f64)], offset: DVector<f64>) -> Result<AffineImage> {
        let m = inner.ambient().dim();
        if offset.len() != m {
            return Err(Error::InvalidInput("translation has wrong dimension".into()));
        }
        if !inner.ambient().is_euclidean() {
            return Err(Error::InvalidInput("plane rotations need a Euclidean ambient".into()));
        }
        let mut a = DMatrix::identity(m, m);
        for &(i, j, t) in rotations {
            if i >= m || j >= m || i == j {
                return Err(Error::InvalidInput("rotation plane out of range".into()));
            }
            let mut g = DMatrix::identity(m, m);
            g[(i, i)] = t.cos();
            g[(j, j)] = t.cos();
            g[(i, j)] = -t.sin();
            g[(j, i)] = t.sin();
            a = g * a;
        }
        Ok(AffineImage {
            ambient: inner.ambient(),
            inner,
            matrix: a,
            offset,
        })
    }

    /// Append `extra` zero coordinates (inclusion `R^m -> R^{m+extra}`).
    pub fn embed(inner: MapRef, extra: usize) -> AffineImage {
        let m = inner.ambient().dim();
        let mut a = DMatrix::zeros(m + extra, m);
        a.view_mut((0, 0), (m, m)).copy_from(&DMatrix::identity(m, m));
        let amb = inner.ambient();
        let ambient = if amb.is_euclidean() {
            ScalarProduct::euclidean(m + extra)
        } else {
            amb.direct_sum(&ScalarProduct::euclidean(extra), false)
        };
        let ambient = match amb.null_pair() {
            Some(_) if amb.dim() >= 2 => ScalarProduct::light_cone(m + extra - 2),
            _ => ambient,
        };
        AffineImage {
            inner,
            matrix: a,
            offset: DVector::zeros(m + extra),
            ambient,
        }
    }
}

impl ChartMap for AffineImage {
    fn name(&self) -> String {
        format!("affine({})", self.inner.name())
    }
    fn domain_dim(&self) -> usize {
        self.inner.domain_dim()
    }
    fn ambient(&self) -> ScalarProduct {
        self.ambient.clone()
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        let y = self.inner.apply(args)?;
        if y.len() != self.matrix.ncols() {
            return Err(Error::InvalidInput("affine map has wrong input dimension".into()));
        }
        let mut out = Vec::with_capacity(self.matrix.nrows());
        for i in 0..self.matrix.nrows() {
            let mut acc = zero_like(args) + self.offset[i];
            for (j, yj) in y.iter().enumerate() {
                let a = self.matrix[(i, j)];
                if a != 0.0 {
                    acc = acc + yj.scale(a);
                }
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Restriction to an affine sub-chart `s -> inner(base + B s)`.
#[derive(Debug, Clone)]
pub struct Restrict {
    pub inner: MapRef,
    pub base: Vec<f64>,
    pub directions: DMatrix<f64>,
}

impl ChartMap for Restrict {
    fn name(&self) -> String {
        format!("restrict({})", self.inner.name())
    }
    fn domain_dim(&self) -> usize {
        self.directions.ncols()
    }
    fn ambient(&self) -> ScalarProduct {
        self.inner.ambient()
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity("restrict", args, self.directions.ncols())?;
        let mut x = Vec::with_capacity(self.base.len());
        for (i, b) in self.base.iter().enumerate() {
            let mut acc = zero_like(args) + *b;
            for (j, a) in args.iter().enumerate() {
                let c = self.directions[(i, j)];
                if c != 0.0 {
                    acc = acc + a.scale(c);
                }
            }
            x.push(acc);
        }
        self.inner.apply(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing_round_trips() {
        let g = Grid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![3, 5]).unwrap();
        assert_eq!(g.len(), 15);
        for k in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(k)), k);
        }
        assert_eq!(g.point(g.central_index()), vec![0.5, 0.0]);
        assert_eq!(g.neighbors(0).len(), 2);
    }

    #[test]
    fn psi_of_origin_is_e1() {
        let y = Jet::seed(&[0.0, 0.0], 0);
        let p: Vec<f64> = psi_jets(&y).iter().map(|j| j.value()).collect();
        assert_eq!(p, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn sphere_lies_on_sphere() {
        let s = Sphere { n: 3, radius: 2.0 };
        let v = s.eval(&[0.3, 1.1, -0.4]).unwrap();
        assert!((v.norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inversion_rejects_centre_on_image() {
        let inv = Inversion {
            inner: Arc::new(Plane { n: 2, codim: 1 }),
            center: DVector::zeros(3),
            radius: 1.0,
        };
        assert!(inv.eval(&[0.0, 0.0]).is_err());
        assert!(inv.eval(&[1.0, 0.0]).is_ok());
    }
}

/// A map known only through tabulated 3-jets at the nodes of a grid; off the
/// nodes it is the Taylor polynomial of the nearest node.
#[derive(Debug, Clone)]
pub struct TabulatedMap {
    pub label: String,
    pub grid: Grid,
    pub ambient: ScalarProduct,
    /// One jet per ambient coordinate at every node, in grid order.
    pub nodes: Vec<Vec<Jet>>,
}

impl TabulatedMap {
    pub fn new(label: &str, grid: Grid, ambient: ScalarProduct, nodes: Vec<Vec<Jet>>) -> Result<TabulatedMap> {
        if nodes.len() != grid.len() {
            return Err(Error::InvalidInput(format!("{} tabulated nodes for a grid of {}", nodes.len(), grid.len())));
        }
        for (k, jets) in nodes.iter().enumerate() {
            if jets.len() != ambient.dim() || jets.iter().any(|j| j.nvars() != grid.dim()) {
                return Err(Error::InvalidInput(format!("node {k}: jets do not match the ambient or chart dimension")));
            }
        }
        Ok(TabulatedMap {
            label: label.to_string(),
            grid,
            ambient,
            nodes,
        })
    }

    fn nearest(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.grid.dim())
            .map(|i| {
                let h = self.grid.spacing(i);
                let count = self.grid.counts[i];
                if h == 0.0 || count == 1 {
                    0
                } else {
                    ((x[i] - self.grid.lo[i]) / h).round().clamp(0.0, (count - 1) as f64) as usize
                }
            })
            .collect();
        self.grid.flat_index(&idx)
    }
}

impl ChartMap for TabulatedMap {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn domain_dim(&self) -> usize {
        self.grid.dim()
    }
    fn ambient(&self) -> ScalarProduct {
        self.ambient.clone()
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        arity(&self.label, args, self.grid.dim())?;
        let x: Vec<f64> = args.iter().map(|a| a.value()).collect();
        let k = self.nearest(&x);
        let x0 = self.grid.point(k);
        let deltas: Vec<Jet> = args.iter().zip(&x0).map(|(a, c)| a - &a.constant_like(*c)).collect();
        let node = &self.nodes[k];
        let layout = node[0].layout();
        // monomials of the node polynomial evaluated at the deltas
        let monomials: Vec<Jet> = layout
            .exponents()
            .iter()
            .map(|e| {
                let mut m = args[0].constant_like(1.0);
                for (d, &p) in deltas.iter().zip(e) {
                    for _ in 0..p {
                        m = &m * d;
                    }
                }
                m
            })
            .collect();
        Ok(node
            .iter()
            .map(|c| {
                let mut acc = args[0].constant_like(0.0);
                for (coef, m) in c.coeffs().iter().zip(&monomials) {
                    if *coef != 0.0 {
                        acc = &acc + &m.scale(*coef);
                    }
                }
                acc
            })
            .collect())
    }
}
