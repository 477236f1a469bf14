//! Ruled extensions of an isometric pair along `Delta = N(phi)`, and slices
//! of Lorentzian embeddings by the light cone that manufacture conformal pairs.
//!
//! The extension is `lambda -> f(pi(lambda)) + lambda` on the bundle `Lambda`
//! with `Delta = D (+) Lambda`. Tube jets are first order off the zero section
//! and second order on it: second-order jets off the zero section would need
//! second derivatives of the fiber frame, one more level of nested differences.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{compose_via_taylor, ChartMap, Grid, MapRef};
use crate::error::{Error, Result};
use crate::jets::{conformal_factor, ConformalFactor, ImmersionJet};
use crate::lightcone::{cone_projection, isometric_representative, BaseMetric};
use crate::linalg::{numerical_rank, projection_matrix, ScalarProduct, Subspace, Tolerance};
use crate::pair::{l_gradients, level1, FiberSource, Level1, LocalData, PairAnalysis, RankHints, Stencil, StencilLevel};
use crate::taylor::{jet_dot, Jet};

/// `phi` at one point, with `Delta = N(phi)` and its complement `Lambda` of `D`.
#[derive(Debug, Clone)]
pub struct PhiData {
    /// `phi(., e_i)` stacked over `i`, acting on `TM (+) L` coordinates `(Y, c)`;
    /// each block has the left ambient rows followed by the right ambient rows.
    pub form: DMatrix<f64>,
    /// Basis of `Delta` in `(Y, c)` coordinates.
    pub delta: DMatrix<f64>,
    /// `Lambda` as ambient vectors `f_* Y + xi` (left) and `f_hat_* Y + T xi` (right).
    pub lambda_left: DMatrix<f64>,
    pub lambda_right: DMatrix<f64>,
    /// Distance between `Delta ∩ TM` and `D` (infinite on a rank mismatch).
    pub inter_residual: f64,
    pub d: usize,
    pub ell: usize,
}

impl PhiData {
    pub fn r(&self) -> usize {
        self.lambda_left.ncols()
    }

    /// `max |phi(v, e_i)|` over the columns `v` of a `(Y, c)` matrix.
    pub fn residual_on(&self, v: &DMatrix<f64>) -> f64 {
        (&self.form * v).amax()
    }
}

fn kernel_rel(m: &DMatrix<f64>, tol: &Tolerance, dim: Option<usize>, scale: f64) -> DMatrix<f64> {
    let mut local = *tol;
    local.abs = tol.threshold(scale).max(tol.abs);
    crate::linalg::kernel(m, &local, dim)
}

fn phi_at(l1: &Level1, grads: &[[DMatrix<f64>; 2]], tol: &Tolerance, fd_tol: &Tolerance, dims: Option<(usize, usize)>) -> Result<PhiData> {
    let f = &l1.fiber;
    let (left, right) = (&f.joint.left, &f.joint.right);
    let n = f.n();
    let (m, mr) = (left.ambient.dim(), right.ambient.dim());
    let ell = l1.l.rank();
    let lb = l1.l.basis();
    let jlb = &f.split.j * lb;
    let pl = projection_matrix(&left.normal.orthogonal_within(&l1.l))?;
    let pr = projection_matrix(&right.normal.orthogonal_within(&l1.l_hat))?;
    let mut form = DMatrix::zeros(n * (m + mr), n + ell);
    for i in 0..n {
        let r0 = i * (m + mr);
        for a in 0..n {
            form.view_mut((r0, a), (m, 1)).copy_from(&(&pl * left.alpha.get(i, a)));
            form.view_mut((r0 + m, a), (mr, 1)).copy_from(&(&pr * right.alpha.get(i, a)));
        }
        if ell > 0 {
            form.view_mut((r0, n), (m, ell)).copy_from(&(&pl * &grads[i][0] * lb));
            form.view_mut((r0 + m, n), (mr, ell)).copy_from(&(&pr * &grads[i][1] * &jlb));
        }
    }
    let delta = kernel_rel(&form, fd_tol, dims.map(|d| d.0), f.alpha_scale());
    let top = delta.rows(0, n).into_owned();
    let bottom = delta.rows(n, ell).into_owned();

    // Delta ∩ TM against D
    let inter_residual = {
        let c = if ell == 0 {
            DMatrix::identity(delta.ncols(), delta.ncols())
        } else {
            kernel_rel(&bottom, tol, None, 1.0)
        };
        let meet = Subspace::span(&f.tangent, &(&top * c), tol);
        if meet.rank() != l1.d.rank() {
            f64::INFINITY
        } else {
            meet.distance(&l1.d)
        }
    };

    let e_delta = &left.d1 * &top + lb * &bottom;
    let dsub = Subspace::span_with_rank(&left.ambient, &e_delta, tol, Some(delta.ncols()));
    let fd = Subspace::span_with_rank(&left.ambient, &(&left.d1 * l1.d.basis()), tol, Some(l1.d.rank()));
    let r_dim = dims.map(|d| d.1);
    let lam = dsub.orthogonal_within_dim(&fd, r_dim);
    let (lambda_left, lambda_right) = transfer(left, right, &f.split.j, lam.basis());
    Ok(PhiData {
        form,
        delta,
        lambda_left,
        lambda_right,
        inter_residual,
        d: l1.d.rank(),
        ell,
    })
}

/// Split ambient vectors of `f_* TM (+) L` into tangent and normal parts and apply `I (+) J`.
fn transfer(left: &LocalData, right: &LocalData, j: &DMatrix<f64>, e: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let g = left.ambient.gram();
    let ginv = left.metric.clone().try_inverse().expect("immersion metric is invertible");
    let y = &ginv * left.d1.transpose() * g * e;
    let xi = e - &left.d1 * &y;
    (e.clone(), &right.d1 * &y + j * xi)
}

/// Phi data at an analysed grid point.
pub fn phi_obstruction(a: &PairAnalysis, k: usize) -> Result<PhiData> {
    let src = a.source(k);
    let pt = &a.points[k];
    let fiber = src.fiber_grid(k)?;
    let l1 = level1(src, fiber, &RankHints::default())?;
    let grads = match &pt.l_gradients {
        Some(g) => g.clone(),
        None => l_gradients(src, &l1)?,
    };
    phi_at(&l1, &grads, &src.opts.tol, &src.opts.fd_tol, None)
}

/// `Lambda` frame (left and right) at an arbitrary chart point.
fn lambda_at(src: &FiberSource, y: &[f64], hints: &RankHints, dims: (usize, usize)) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let fiber = src.fiber(y, hints)?;
    let l1 = level1(src, fiber, hints)?;
    let grads = l_gradients(src, &l1)?;
    let phi = phi_at(&l1, &grads, &src.opts.tol, &src.opts.fd_tol, Some(dims))?;
    Ok((phi.lambda_left, phi.lambda_right))
}

#[derive(Debug, Clone)]
pub struct ExtensionOptions {
    /// Fiber radius; defaults to a tenth of the grid scale.
    pub radius: Option<f64>,
    pub max_halvings: usize,
    /// Step for derivatives of the `Lambda` frame.
    pub h3: f64,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        ExtensionOptions {
            radius: None,
            max_halvings: 6,
            h3: StencilLevel::Three.default_step(),
        }
    }
}

/// Fiber frame of `Lambda` at a base point and its chart derivatives.
#[derive(Debug, Clone)]
pub struct FiberFrame {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub d_left: Vec<DMatrix<f64>>,
    pub d_right: Vec<DMatrix<f64>>,
}

/// Isometric ruled extensions `F`, `F_hat` sampled on `base grid x [-rho, rho]^r`.
#[derive(Debug, Clone)]
pub struct RuledExtension {
    pub base_grid: Grid,
    /// Trivial extensions reuse the base grid.
    pub grid: Grid,
    pub radius: f64,
    pub d: usize,
    pub r: usize,
    pub ell: usize,
    pub phi: Vec<PhiData>,
    pub frames: Vec<FiberFrame>,
    /// Jets of `F` and `F_hat` at every extended grid point.
    pub left: Vec<Vec<Jet>>,
    pub right: Vec<Vec<Jet>>,
    pub(crate) base_left: Vec<Vec<Jet>>,
    pub(crate) base_right: Vec<Vec<Jet>>,
    pub(crate) analysis: PairAnalysis,
}

fn check_constant<T: PartialEq + Copy + std::fmt::Debug>(vals: &[T], what: &str, rank: impl Fn(T) -> usize) -> Result<()> {
    if let Some(&first) = vals.first() {
        if let Some(&bad) = vals.iter().find(|&&v| v != first) {
            return Err(Error::RankJump {
                what: what.into(),
                expected: rank(first),
                found: rank(bad),
            });
        }
    }
    Ok(())
}

pub fn ruled_extension(a: &PairAnalysis, opts: &ExtensionOptions) -> Result<RuledExtension> {
    let grid = a.points.first().map(|p| a.source(p.k).left.jet.grid.clone()).ok_or_else(|| Error::InvalidInput("empty analysis".into()))?;
    check_constant(&a.points.iter().map(|p| p.degenerate).collect::<Vec<_>>(), "branch", |b| b as usize)?;
    let phi: Vec<PhiData> = (0..a.points.len()).into_par_iter().map(|k| phi_obstruction(a, k)).collect::<Result<_>>()?;
    let deltas: Vec<usize> = phi.iter().map(|p| p.delta.ncols()).collect();
    check_constant(&deltas, "Delta", |v| v)?;
    check_constant(&phi.iter().map(|p| p.d).collect::<Vec<_>>(), "D", |v| v)?;
    check_constant(&phi.iter().map(|p| p.ell).collect::<Vec<_>>(), "L", |v| v)?;
    let (d, ell) = (phi[0].d, phi[0].ell);
    let r = deltas[0] - d;

    let frames: Vec<FiberFrame> = (0..a.points.len())
        .into_par_iter()
        .map(|k| -> Result<FiberFrame> {
            let (left, right) = (phi[k].lambda_left.clone(), phi[k].lambda_right.clone());
            if r == 0 {
                return Ok(FiberFrame { left, right, d_left: vec![], d_right: vec![] });
            }
            let src = a.source(k);
            let pt = &a.points[k];
            let hints = RankHints {
                omega: Some(pt.profile.omega),
                theta: Some(pt.profile.theta),
                s: Some(pt.profile.s),
                s0: Some(pt.profile.s0),
                l: Some(pt.profile.l),
                d: Some(pt.profile.d),
            };
            // sections through the base frame: y -> Lambda(y) (E(y)^+ sigma(x))
            let grads = Stencil::new(opts.h3).gradients(&pt.x, &mut |y| {
                let (e, eh) = lambda_at(src, y, &hints, (deltas[0], r))?;
                let c = (e.transpose() * &e)
                    .try_inverse()
                    .ok_or_else(|| Error::RankJump { what: "Lambda".into(), expected: r, found: 0 })?
                    * e.transpose()
                    * &left;
                Ok(vec![&e * &c, &eh * &c])
            })?;
            Ok(FiberFrame {
                left,
                right,
                d_left: grads.iter().map(|g| g[0].clone()).collect(),
                d_right: grads.iter().map(|g| g[1].clone()).collect(),
            })
        })
        .collect::<Result<_>>()?;

    let base_left: Vec<Vec<Jet>> = (0..grid.len()).map(|k| a.source(k).left.jets_at_grid(k)).collect();
    let base_right: Vec<Vec<Jet>> = (0..grid.len()).map(|k| a.source(k).right.jets_at_grid(k)).collect();
    let mut ext = RuledExtension {
        base_grid: grid.clone(),
        grid: grid.clone(),
        radius: 0.0,
        d,
        r,
        ell,
        phi,
        frames,
        left: vec![],
        right: vec![],
        base_left,
        base_right,
        analysis: a.clone(),
    };
    let mut radius = opts.radius.unwrap_or(0.1 * grid.scale().max(1e-3));
    for _ in 0..=opts.max_halvings {
        match ext.assemble(radius) {
            Ok(()) => return Ok(ext),
            Err(Error::NotImmersionAtRadius { .. }) => radius *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NotImmersionAtRadius { radius })
}

/// Jet of `value + sum t_j column_j` with the given first and second derivatives.
fn tube_jets(base: &[Jet], frame: &DMatrix<f64>, dframe: &[DMatrix<f64>], t: &[f64], second: bool) -> Vec<Jet> {
    let n = dframe.len().max(base[0].nvars());
    let r = t.len();
    let nv = n + r;
    (0..base.len())
        .map(|row| {
            let mut value = base[row].value();
            for (j, tj) in t.iter().enumerate() {
                value += tj * frame[(row, j)];
            }
            let mut grad = vec![0.0; nv];
            for i in 0..n {
                grad[i] = base[row].deriv(&[i]);
                for (j, tj) in t.iter().enumerate() {
                    grad[i] += tj * dframe[i][(row, j)];
                }
            }
            for j in 0..r {
                grad[n + j] = frame[(row, j)];
            }
            if second {
                let mut hess = vec![0.0; nv * nv];
                for i in 0..n {
                    for l in 0..n {
                        hess[i * nv + l] = base[row].deriv(&[i, l]);
                    }
                    for j in 0..r {
                        let v = dframe[i][(row, j)];
                        hess[i * nv + n + j] = v;
                        hess[(n + j) * nv + i] = v;
                    }
                }
                Jet::from_derivatives(nv, 2, value, Some(&grad), Some(&hess), None)
            } else {
                Jet::from_derivatives(nv, 1, value, Some(&grad), None, None)
            }
        })
        .collect()
}

impl RuledExtension {
    pub fn is_trivial(&self) -> bool {
        self.r == 0
    }

    /// Base grid index and fiber coordinates of an extended grid point.
    pub fn split_index(&self, k: usize) -> (usize, Vec<f64>) {
        if self.is_trivial() {
            return (k, vec![]);
        }
        let n = self.base_grid.dim();
        let idx = self.grid.multi_index(k);
        let p = self.grid.point(k);
        (self.base_grid.flat_index(&idx[..n]), p[n..].to_vec())
    }

    fn assemble(&mut self, radius: f64) -> Result<()> {
        let n = self.base_grid.dim();
        let r = self.r;
        if r == 0 {
            self.left = self.base_left.iter().map(|j| j.iter().map(|c| c.truncate(2)).collect()).collect();
            self.right = self.base_right.iter().map(|j| j.iter().map(|c| c.truncate(2)).collect()).collect();
            self.radius = 0.0;
            return Ok(());
        }
        let b = &self.base_grid;
        let grid = Grid::new(
            b.lo.iter().copied().chain(std::iter::repeat(-radius).take(r)).collect(),
            b.hi.iter().copied().chain(std::iter::repeat(radius).take(r)).collect(),
            b.counts.iter().copied().chain(std::iter::repeat(3).take(r)).collect(),
        )?;
        self.grid = grid;
        let tol = Tolerance::default();
        let mut left = Vec::with_capacity(self.grid.len());
        let mut right = Vec::with_capacity(self.grid.len());
        for k in 0..self.grid.len() {
            let (base, t) = self.split_index(k);
            let zero = t.iter().all(|&v| v == 0.0);
            let fr = &self.frames[base];
            let jl = tube_jets(&self.base_left[base], &fr.left, &fr.d_left, &t, zero);
            let jr = tube_jets(&self.base_right[base], &fr.right, &fr.d_right, &t, zero);
            let dl = DMatrix::from_fn(jl.len(), n + r, |row, i| jl[row].deriv(&[i]));
            if numerical_rank(&dl, &tol) < n + r {
                return Err(Error::NotImmersionAtRadius { radius });
            }
            left.push(jl);
            right.push(jr);
        }
        self.left = left;
        self.right = right;
        self.radius = radius;
        Ok(())
    }

    /// Copy with the right fiber frame (and its derivatives) replaced by `map` of it.
    pub fn with_right_frames(&self, map: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Result<RuledExtension> {
        let mut out = self.clone();
        for fr in &mut out.frames {
            fr.right = map(&fr.right);
            fr.d_right = fr.d_right.iter().map(&map).collect();
        }
        out.assemble(self.radius)?;
        Ok(out)
    }

    /// `Delta` in the chart coordinates `(x, t)` of the tube at the zero section.
    pub fn delta_chart(&self, base: usize) -> DMatrix<f64> {
        let n = self.base_grid.dim();
        let d = &self.analysis.points[base].d;
        let mut m = DMatrix::zeros(n + self.r, self.d + self.r);
        m.view_mut((0, 0), (n, self.d)).copy_from(d.basis());
        for j in 0..self.r {
            m[(n + j, self.d + j)] = 1.0;
        }
        m
    }

    fn zero_index(&self, base: usize) -> usize {
        if self.is_trivial() {
            return base;
        }
        let mut idx = self.base_grid.multi_index(base);
        idx.extend(std::iter::repeat(1).take(self.r));
        self.grid.flat_index(&idx)
    }

    fn local(&self, k: usize) -> Result<(LocalData, LocalData)> {
        let src = self.analysis.source(0);
        let tol = Tolerance::default();
        Ok((
            LocalData::from_jets(&src.left.ambient(), &self.left[k], &tol)?,
            LocalData::from_jets(&src.right.ambient(), &self.right[k], &tol)?,
        ))
    }

    /// `max |<alpha^F(v, X), zeta>|, |<alpha^F_hat(v, X), zeta_hat>|` over `v` in the columns of
    /// `delta` (chart coordinates), `X` in `TN`, `zeta` in `L^perp`, `zeta_hat` in `L_hat^perp`.
    pub fn inc_residual_on(&self, base: usize, delta: &DMatrix<f64>) -> Result<f64> {
        let (fl, fr) = self.local(self.zero_index(base))?;
        let pt = &self.analysis.points[base];
        let js = &pt.fiber.joint;
        let lp = projection_matrix(&js.left.normal.orthogonal_within(&pt.l))?;
        let rp = projection_matrix(&js.right.normal.orthogonal_within(&pt.l_hat))?;
        let dim = fl.n();
        let mut worst: f64 = 0.0;
        for v in delta.column_iter() {
            let v = v.into_owned();
            for i in 0..dim {
                let e = DVector::from_fn(dim, |a, _| if a == i { 1.0 } else { 0.0 });
                worst = worst.max((&lp * fl.alpha.apply(&v, &e)).amax());
                worst = worst.max((&rp * fr.alpha.apply(&v, &e)).amax());
            }
        }
        Ok(worst)
    }
}

/// Checks of the extension at every base point (zero section) and tube point.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtensionReport {
    pub trivial: bool,
    pub r: usize,
    pub radius: f64,
    pub zero_section_exact: bool,
    /// Largest second difference of `F`, `F_hat` along fiber axes.
    pub straightness: f64,
    /// Largest relative difference of the induced metrics.
    pub metric: f64,
    /// `L^perp` stays normal to `F` (splitting of the normal bundle).
    pub split: f64,
    /// `Delta` lies in the nullities of `alpha^F_{L^perp}`, `alpha^F_hat_{L_hat^perp}`.
    pub inc: f64,
    /// Those nullities are no larger than `Delta`.
    pub inc_rank_ok: bool,
    /// `Delta ∩ TM = D`.
    pub inter: f64,
    /// `alpha^F_hat` on the transferred bundle against `T alpha^F`.
    pub transfer: f64,
    /// `<F, F> - <F_hat, F_hat>` (cone-valued pairs only).
    pub cone: Option<f64>,
}

pub fn verify_extension(ext: &RuledExtension) -> Result<ExtensionReport> {
    let mut rep = ExtensionReport {
        trivial: ext.is_trivial(),
        r: ext.r,
        radius: ext.radius,
        zero_section_exact: true,
        inc_rank_ok: true,
        ..Default::default()
    };
    let src = ext.analysis.source(0);
    let (amb_l, amb_r) = (src.left.ambient(), src.right.ambient());
    let cone = ext.analysis.points[0].degenerate;
    let tol = Tolerance::default();
    let n = ext.base_grid.dim();

    for k in 0..ext.grid.len() {
        let (base, t) = ext.split_index(k);
        let vl = DVector::from_iterator(ext.left[k].len(), ext.left[k].iter().map(|j| j.value()));
        let vr = DVector::from_iterator(ext.right[k].len(), ext.right[k].iter().map(|j| j.value()));
        if t.iter().all(|&v| v == 0.0) {
            let same = |a: &[Jet], b: &[Jet]| a.iter().zip(b).all(|(x, y)| x.value().to_bits() == y.value().to_bits());
            rep.zero_section_exact &= same(&ext.left[k], &ext.base_left[base]) && same(&ext.right[k], &ext.base_right[base]);
        }
        let dl = DMatrix::from_fn(vl.len(), n + ext.r, |row, i| ext.left[k][row].deriv(&[i]));
        let dr = DMatrix::from_fn(vr.len(), n + ext.r, |row, i| ext.right[k][row].deriv(&[i]));
        let gl = dl.transpose() * amb_l.gram() * &dl;
        let gr = dr.transpose() * amb_r.gram() * &dr;
        rep.metric = rep.metric.max((&gl - &gr).amax() / gl.amax().max(1.0));
        if cone {
            let c = (amb_l.norm_sq(&vl) - amb_r.norm_sq(&vr)).abs() / vl.norm_squared().max(1.0);
            rep.cone = Some(rep.cone.unwrap_or(0.0).max(c));
        }
    }
    // straightness: along each fiber axis, centre against both ends
    if !ext.is_trivial() {
        for k in 0..ext.grid.len() {
            let idx = ext.grid.multi_index(k);
            for j in 0..ext.r {
                if idx[n + j] != 1 {
                    continue;
                }
                let mut lo = idx.clone();
                lo[n + j] = 0;
                let mut hi = idx.clone();
                hi[n + j] = 2;
                let (a, b) = (ext.grid.flat_index(&lo), ext.grid.flat_index(&hi));
                for side in [&ext.left, &ext.right] {
                    for row in 0..side[k].len() {
                        let s = side[a][row].value() - 2.0 * side[k][row].value() + side[b][row].value();
                        rep.straightness = rep.straightness.max(s.abs());
                    }
                }
            }
        }
    }

    for base in 0..ext.base_grid.len() {
        rep.inter = rep.inter.max(ext.phi[base].inter_residual);
        let delta = ext.delta_chart(base);
        rep.inc = rep.inc.max(ext.inc_residual_on(base, &delta)?);
        let (fl, fr) = ext.local(ext.zero_index(base))?;
        let pt = &ext.analysis.points[base];
        let js = &pt.fiber.joint;
        let lperp = js.left.normal.orthogonal_within(&pt.l);
        let lhperp = js.right.normal.orthogonal_within(&pt.l_hat);
        for z in lperp.basis().column_iter() {
            rep.split = rep.split.max(fl.normal.residual(&z.into_owned()));
        }
        for z in lhperp.basis().column_iter() {
            rep.split = rep.split.max(fr.normal.residual(&z.into_owned()));
        }
        // nullities computed from the extension itself
        let lp_f = Subspace::span(&fl.ambient, lperp.basis(), &tol);
        let rp_f = Subspace::span(&fr.ambient, lhperp.basis(), &tol);
        let tn = fl.tangent_product()?;
        let fd_tol = &ext.analysis.options.fd_tol;
        let na = crate::linalg::nullity_space(&fl.alpha, &lp_f, &tn, fd_tol);
        let nb = crate::linalg::nullity_space(&fr.alpha, &rp_f, &tn, fd_tol);
        let meet = crate::linalg::intersect(&na, &nb);
        rep.inc_rank_ok &= meet.rank() == delta.ncols();
        // transferred bundle: normal to F inside L
        let cal_l = fl.normal.orthogonal_within(&lp_f);
        let cal_lh = fr.normal.orthogonal_within(&rp_f);
        if cal_l.rank() > 0 {
            let pl = projection_matrix(&cal_l)?;
            let ph = projection_matrix(&cal_lh)?;
            let j = &pt.fiber.split.j;
            let dim = fl.n();
            for i in 0..dim {
                for l in 0..dim {
                    let d = &ph * fr.alpha.get(i, l) - j * (&pl * fl.alpha.get(i, l));
                    rep.transfer = rep.transfer.max(d.amax());
                }
            }
        }
    }
    Ok(rep)
}

/// Which zero of `t -> <F_hat, F_hat>` along a chart line is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RootPick {
    Lowest,
    Highest,
    Nearest(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceOptions {
    /// Chart axis along which the level set is a graph.
    pub axis: usize,
    pub t_range: (f64, f64),
    /// Samples per line for sign-change bracketing.
    pub scan: usize,
    pub pick: RootPick,
    /// Smallest accepted `|d <F_hat, F_hat>|` on the slice.
    pub gradient_threshold: f64,
    pub isometry_tol: f64,
}

impl Default for SliceOptions {
    fn default() -> Self {
        SliceOptions {
            axis: 0,
            t_range: (-4.0, 4.0),
            scan: 64,
            pick: RootPick::Lowest,
            gradient_threshold: 1e-8,
            isometry_tol: 1e-7,
        }
    }
}

fn insert_axis(x: &[f64], axis: usize, t: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    p.insert(axis, t);
    p
}

fn cone_value(fhat: &dyn ChartMap, p: &[f64]) -> Result<f64> {
    let v = fhat.eval(p)?;
    Ok(fhat.ambient().norm_sq(&v))
}

/// Newton continuation from a known root `t0` at a nearby point. Accepts only
/// roots within one scan cell of `t0`, so the branch cannot change unnoticed.
fn track_root(fhat: &dyn ChartMap, x: &[f64], t0: f64, opts: &SliceOptions) -> Option<f64> {
    let (lo, hi) = opts.t_range;
    let cell = (hi - lo) / opts.scan.max(2) as f64;
    let mut t = t0;
    for _ in 0..30 {
        let (h, g) = cone_gradient(fhat, &insert_axis(x, opts.axis, t)).ok()?;
        let slope = g[opts.axis];
        if slope.abs() < opts.gradient_threshold {
            return None;
        }
        let step = h / slope;
        t -= step;
        if !t.is_finite() || (t - t0).abs() > cell {
            return None;
        }
        if step.abs() <= 1e-15 * t.abs().max(1.0) {
            return Some(t);
        }
    }
    None
}

/// `(<F_hat, F_hat>, its gradient)` at a chart point.
fn cone_gradient(fhat: &dyn ChartMap, p: &[f64]) -> Result<(f64, Vec<f64>)> {
    let jets = fhat.taylor(p, 1)?;
    let h = jet_dot(&jets, &jets, fhat.ambient().gram());
    Ok((h.value(), h.gradient()))
}

/// Zero of `<F_hat, F_hat>` on the line through `x` along the slicing axis.
pub fn locate_root(fhat: &dyn ChartMap, x: &[f64], opts: &SliceOptions) -> Result<f64> {
    let (lo, hi) = opts.t_range;
    let steps = opts.scan.max(2);
    let ts: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let amb = fhat.ambient();
    let mut hs = Vec::with_capacity(ts.len());
    let mut scale: f64 = 1.0;
    for &t in &ts {
        let v = fhat.eval(&insert_axis(x, opts.axis, t))?;
        hs.push(amb.norm_sq(&v));
        scale = scale.max(v.norm_squared());
    }
    if hs.iter().all(|h| h.abs() <= 1e-13 * scale) {
        return Err(Error::NotTransversal { point: 0, gradient: 0.0 });
    }
    let mut brackets = Vec::new();
    for i in 0..steps {
        if hs[i] == 0.0 {
            brackets.push((ts[i], ts[i]));
        } else if hs[i] * hs[i + 1] < 0.0 {
            brackets.push((ts[i], ts[i + 1]));
        }
    }
    if hs[steps] == 0.0 {
        brackets.push((ts[steps], ts[steps]));
    }
    let key = |b: &(f64, f64)| 0.5 * (b.0 + b.1);
    let chosen = match opts.pick {
        RootPick::Lowest => brackets.first().copied(),
        RootPick::Highest => brackets.last().copied(),
        RootPick::Nearest(t) => brackets
            .iter()
            .copied()
            .min_by(|a, b| (key(a) - t).abs().total_cmp(&(key(b) - t).abs())),
    };
    let (mut a, mut b) = chosen.ok_or(Error::NoIntersection)?;
    if a == b {
        return Ok(a);
    }
    let mut ha = cone_value(fhat, &insert_axis(x, opts.axis, a))?;
    // safeguarded Newton: fall back to bisection whenever a step leaves the bracket
    let mut t = 0.5 * (a + b);
    for _ in 0..200 {
        let (h, g) = cone_gradient(fhat, &insert_axis(x, opts.axis, t))?;
        if h == 0.0 {
            return Ok(t);
        }
        if h * ha < 0.0 {
            b = t;
        } else {
            a = t;
            ha = h;
        }
        let newton = t - h / g[opts.axis];
        let next = if g[opts.axis] != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - t).abs() <= 1e-14 * t.abs().max(1.0) || (b - a) <= 1e-14 * t.abs().max(1.0) {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// `x -> source(t(x), x)` where `t(x)` solves `<F_hat, F_hat> = 0` near the picked root.
#[derive(Debug, Clone)]
pub struct SliceMap {
    pub source: MapRef,
    pub level: MapRef,
    pub options: SliceOptions,
    /// Chart points with known roots; nearby evaluations continue from them.
    pub anchors: Vec<(Vec<f64>, f64)>,
}

impl SliceMap {
    fn root(&self, x: &[f64]) -> Result<f64> {
        let dist = |a: &[f64]| a.iter().zip(x).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        let nearest = self.anchors.iter().min_by(|a, b| dist(&a.0).total_cmp(&dist(&b.0)));
        if let Some(t) = nearest.and_then(|(_, t0)| track_root(self.level.as_ref(), x, *t0, &self.options)) {
            return Ok(t);
        }
        locate_root(self.level.as_ref(), x, &self.options)
    }
}

impl ChartMap for SliceMap {
    fn name(&self) -> String {
        format!("slice({} by {})", self.source.name(), self.level.name())
    }
    fn domain_dim(&self) -> usize {
        self.source.domain_dim() - 1
    }
    fn ambient(&self) -> ScalarProduct {
        self.source.ambient()
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        compose_via_taylor(self, args)
    }
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        let axis = self.options.axis;
        let t0 = self.root(x)?;
        let (_, g) = cone_gradient(self.level.as_ref(), &insert_axis(x, axis, t0))?;
        let slope = g[axis];
        if slope.abs() < self.options.gradient_threshold {
            return Err(Error::NotTransversal { point: 0, gradient: slope.abs() });
        }
        let seed = Jet::seed(x, order);
        let gram = self.level.ambient().gram().clone();
        let with_t = |t: &Jet| {
            let mut args = seed.clone();
            args.insert(axis, t.clone());
            args
        };
        // fixed-slope Newton on jets gains one order per step
        let mut t = seed[0].constant_like(t0);
        for _ in 0..=order {
            let h = jet_dot(&self.level.apply(&with_t(&t))?, &self.level.apply(&with_t(&t))?, &gram);
            t = &t - &h.scale(1.0 / slope);
        }
        self.source.apply(&with_t(&t))
    }
}

/// Per-point transversality of `F_hat` to the light cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transversality {
    pub gradient: f64,
    pub transversal: bool,
}

pub fn transversality_check(fhat: &dyn ChartMap, points: &[Vec<f64>], threshold: f64) -> Result<Vec<Transversality>> {
    points
        .iter()
        .map(|p| {
            let (_, g) = cone_gradient(fhat, p)?;
            let gradient = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(Transversality {
                gradient,
                transversal: gradient > threshold,
            })
        })
        .collect()
}

/// A conformal pair cut out of an isometric pair `{F', F_hat}` by the light cone.
#[derive(Debug, Clone)]
pub struct SliceData {
    pub grid: Grid,
    /// Root parameter per slice grid point.
    pub roots: Vec<f64>,
    pub transversality: Vec<Transversality>,
    /// `F' o i`.
    pub f: ImmersionJet,
    /// `F_hat o i`, inside the light cone.
    pub fhat: ImmersionJet,
    /// `C(F_hat o i)`.
    pub fbar: ImmersionJet,
    pub factor: ConformalFactor,
}

impl SliceData {
    /// `{f, I(f_bar)}` with the lift taken relative to the metric of `f`.
    pub fn isometric_pair(&self, tol: &Tolerance) -> Result<(ImmersionJet, ImmersionJet)> {
        let g = isometric_representative(&self.fbar, BaseMetric::Induced(self.f.map().clone()), tol)?;
        Ok((self.f.clone(), g))
    }
}

pub fn generate_conformal_pair(fp: &MapRef, fhat: &MapRef, grid: &Grid, opts: &SliceOptions, tol: &Tolerance) -> Result<SliceData> {
    if fp.domain_dim() != fhat.domain_dim() || grid.dim() + 1 != fp.domain_dim() {
        return Err(Error::InvalidInput("slice grid must have one dimension less than the common chart".into()));
    }
    if fhat.ambient().null_pair().is_none() {
        return Err(Error::InvalidInput("F_hat must take values in a light-cone model space".into()));
    }
    let pts = grid.points();
    let roots: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(k, x)| {
            locate_root(fhat.as_ref(), x, opts).map_err(|e| match e {
                Error::NotTransversal { gradient, .. } => Error::NotTransversal { point: k, gradient },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let full: Vec<Vec<f64>> = pts.iter().zip(&roots).map(|(x, &t)| insert_axis(x, opts.axis, t)).collect();
    let transversality = transversality_check(fhat.as_ref(), &full, opts.gradient_threshold)?;
    if let Some(k) = transversality.iter().position(|t| !t.transversal) {
        return Err(Error::NotTransversal {
            point: k,
            gradient: transversality[k].gradient,
        });
    }
    for p in &full {
        let a = fp.taylor(p, 1)?;
        let b = fhat.taylor(p, 1)?;
        let n = p.len();
        let metric = |jets: &[Jet], amb: &ScalarProduct| {
            let d = DMatrix::from_fn(jets.len(), n, |r, i| jets[r].deriv(&[i]));
            d.transpose() * amb.gram() * d
        };
        let residual = crate::pair::metric_mismatch(&metric(&a, &fp.ambient()), &metric(&b, &fhat.ambient()));
        if residual > opts.isometry_tol {
            return Err(Error::NotIsometricPair { residual });
        }
    }
    let slice = |source: &MapRef| -> MapRef {
        Arc::new(SliceMap {
            source: source.clone(),
            level: fhat.clone(),
            options: opts.clone(),
            anchors: pts.iter().cloned().zip(roots.iter().copied()).collect(),
        })
    };
    let f = ImmersionJet::closed_form(slice(fp), grid)?;
    let fhat_slice = ImmersionJet::closed_form(slice(fhat), grid)?;
    let fbar = cone_projection(&fhat_slice, tol)?;
    let factor = conformal_factor(&f, &fbar, tol)?;
    Ok(SliceData {
        grid: grid.clone(),
        roots,
        transversality,
        f,
        fhat: fhat_slice,
        fbar,
        factor,
    })
}
