use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use rayon::prelude::*;

use super::fiber::{construct_fiber, Fiber, RankHints};
use super::sections::{Stencil, StencilLevel};
use super::{at_point, build_joint, degeneracy_test, joint_at_grid, omega, Degeneracy, Side};
use crate::error::{Error, Result};
use crate::jets::{DistributionFrame, ImmersionJet, SubbundleFrame};
use crate::linalg::{
    intersect_with_dim, kernel, nullity_space_with_dim, projection_matrix, span_of_image, Signature, Subspace,
    Tolerance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchChoice {
    Auto,
    Nondegenerate,
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct PairOptions {
    /// Ranks of pointwise (second fundamental form) data.
    pub tol: Tolerance,
    /// Ranks of kernels assembled from section derivatives.
    pub fd_tol: Tolerance,
    /// Largest relative metric mismatch accepted for an isometric pair.
    pub isometry_tol: f64,
    pub h1: f64,
    pub h2: f64,
    pub branch: BranchChoice,
    /// Evaluate (C2) with second-level differences.
    pub second_level: bool,
    /// Raise `ClaimViolation` instead of only reporting failed claims.
    pub strict_claims: bool,
}

impl Default for PairOptions {
    fn default() -> Self {
        PairOptions {
            tol: Tolerance::default(),
            fd_tol: Tolerance { rel: 1e-6, abs: 1e-9 },
            isometry_tol: 1e-7,
            h1: StencilLevel::One.default_step(),
            h2: StencilLevel::Two.default_step(),
            branch: BranchChoice::Auto,
            second_level: true,
            strict_claims: true,
        }
    }
}

/// Builds fibers of a fixed pair at arbitrary chart points.
#[derive(Debug, Clone)]
pub(crate) struct FiberSource {
    pub left: Side,
    pub right: Side,
    pub augmented: bool,
    pub opts: PairOptions,
}

impl FiberSource {
    pub fn fiber(&self, x: &[f64], hints: &RankHints) -> Result<Fiber> {
        let l = self.left.at(x, &self.opts.tol)?;
        let r = self.right.at(x, &self.opts.tol)?;
        let joint = build_joint(l, r, self.opts.isometry_tol)?;
        construct_fiber(x, joint, self.augmented, hints, &self.opts.tol)
    }

    pub fn fiber_grid(&self, k: usize) -> Result<Fiber> {
        let x = self.left.jet.grid.point(k);
        let joint = joint_at_grid(&self.left, &self.right, k, self.opts.isometry_tol, &self.opts.tol)?;
        construct_fiber(&x, joint, self.augmented, &RankHints::default(), &self.opts.tol).map_err(|e| at_point(e, k))
    }
}

/// Data from first-level section derivatives at one point.
#[derive(Debug, Clone)]
pub(crate) struct Level1 {
    pub fiber: Fiber,
    /// `d_i P_S` and `d_i (J P_S)`.
    pub dps: Vec<DMatrix<f64>>,
    pub djps: Vec<DMatrix<f64>>,
    /// `K(d_i)` on `S`, in the coordinates of `S`'s basis.
    pub k_ops: Vec<DMatrix<f64>>,
    pub s0: Subspace,
    pub l: Subspace,
    pub l_hat: Subspace,
    pub d: Subspace,
}

impl Level1 {
    pub fn hints(&self) -> RankHints {
        RankHints {
            omega: Some(self.fiber.split.omega.rank()),
            theta: Some(self.fiber.theta.rank()),
            s: Some(self.fiber.s.rank()),
            s0: Some(self.s0.rank()),
            l: Some(self.l.rank()),
            d: Some(self.d.rank()),
        }
    }
}

fn stack_rows(blocks: &[DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for b in blocks {
        out.rows_mut(r, b.nrows()).copy_from(b);
        r += b.nrows();
    }
    out
}

fn kernel_scaled(m: &DMatrix<f64>, tol: &Tolerance, dim: Option<usize>, scale: f64) -> DMatrix<f64> {
    let mut local = *tol;
    local.abs = tol.threshold(scale).max(tol.abs);
    kernel(m, &local, dim)
}

pub(crate) fn level1(src: &FiberSource, fiber: Fiber, hints: &RankHints) -> Result<Level1> {
    let opts = &src.opts;
    let x = fiber.x.clone();
    let inner = RankHints {
        omega: Some(fiber.split.omega.rank()),
        theta: Some(fiber.theta.rank()),
        s: Some(fiber.s.rank()),
        s0: None,
        l: None,
        d: None,
    };
    let grads = Stencil::new(opts.h1).gradients(&x, &mut |y| {
        let f = src.fiber(y, &inner)?;
        let p = f.s.projector();
        let jp = &f.split.j * &p;
        Ok(vec![p, jp])
    })?;
    let dps: Vec<DMatrix<f64>> = grads.iter().map(|g| g[0].clone()).collect();
    let djps: Vec<DMatrix<f64>> = grads.iter().map(|g| g[1].clone()).collect();

    let proj_s = projection_matrix(&fiber.s)?;
    let proj_s_hat = projection_matrix(&fiber.s_hat)?;
    let nl = &fiber.joint.left.normal_projector;
    let nr = &fiber.joint.right.normal_projector;
    let sb = fiber.s.basis();
    let r = fiber.s.rank();
    let m = fiber.joint.left_dim();
    let j_inv = &fiber.split.j_inv;

    let k_ops: Vec<DMatrix<f64>> = (0..x.len())
        .map(|i| {
            let k = &proj_s * nl * &dps[i] - j_inv * (&proj_s_hat * nr * &djps[i]);
            sb.transpose() * k * sb
        })
        .collect();
    let scale = fiber.alpha_scale();
    let s0 = if r == 0 {
        fiber.s.clone()
    } else {
        let c = kernel_scaled(&stack_rows(&k_ops, r), &opts.fd_tol, hints.s0, scale);
        Subspace::span_with_rank(&fiber.joint.left.ambient, &(sb * c), &opts.tol, hints.s0)
    };

    // L: delta in S0 whose derivatives along Theta stay in S and S_hat
    let l = if s0.rank() == 0 {
        s0.clone()
    } else {
        let off_s = (DMatrix::identity(m, m) - &proj_s) * nl;
        let mr = fiber.joint.right.ambient.dim();
        let off_s_hat = (DMatrix::identity(mr, mr) - &proj_s_hat) * nr;
        let mut blocks = Vec::new();
        for y in fiber.theta.basis().column_iter() {
            let mut dp = DMatrix::zeros(m, m);
            let mut djp = DMatrix::zeros(mr, m);
            for i in 0..x.len() {
                dp += &dps[i] * y[i];
                djp += &djps[i] * y[i];
            }
            blocks.push(&off_s * dp * s0.basis());
            blocks.push(&off_s_hat * djp * s0.basis());
        }
        if blocks.is_empty() {
            s0.clone()
        } else {
            let c = kernel_scaled(&stack_rows(&blocks, s0.rank()), &opts.fd_tol, hints.l, scale);
            Subspace::span_with_rank(&fiber.joint.left.ambient, &(s0.basis() * c), &opts.tol, hints.l)
        }
    };
    let l_hat = fiber.hat(&l, &opts.tol);
    let lp = fiber.joint.left.normal.orthogonal_within(&l);
    let lhp = fiber.joint.right.normal.orthogonal_within(&l_hat);
    let a = nullity_space_with_dim(&fiber.joint.left.alpha, &lp, &fiber.tangent, &opts.fd_tol, None);
    let b = nullity_space_with_dim(&fiber.joint.right.alpha, &lhp, &fiber.tangent, &opts.fd_tol, None);
    let d = intersect_with_dim(&a, &b, hints.d);
    Ok(Level1 {
        fiber,
        dps,
        djps,
        k_ops,
        s0,
        l,
        l_hat,
        d,
    })
}

/// Residuals of the runtime checks at one point.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `alpha_hat_{Gamma_hat^perp} - J alpha_{Gamma^perp}`.
    pub star: f64,
    /// `<K(X) eta, zeta> + <eta, K(X) zeta>`.
    pub skew: f64,
    /// `alpha_hat_{L_hat} - T alpha_L`.
    pub c1_sff: f64,
    /// `(nabla_hat T xi)_{L_hat} - T (nabla xi)_L`.
    pub c1_parallel: f64,
    /// `(nabla_Z xi)_{L^perp}` and its hatted counterpart, `Z` in `D`.
    pub c2: Option<f64>,
    /// Distance between `Theta` and `N(alpha_{S^perp}) ∩ N(alpha_hat_{S_hat^perp})`.
    pub theta_identity: f64,
    /// `Omega` has null fibers.
    pub omega_null: f64,
}

impl ResidualReport {
    pub fn c1(&self) -> f64 {
        self.c1_sff.max(self.c1_parallel)
    }
}

fn level1_residuals(l1: &Level1, opts: &PairOptions) -> Result<ResidualReport> {
    let f = &l1.fiber;
    let g = f.joint.left.ambient.gram();
    let mut skew: f64 = 0.0;
    let sb = f.s.basis();
    let gs = sb.transpose() * g * sb;
    for k in &l1.k_ops {
        let m = &gs * k;
        skew = skew.max((&m + m.transpose()).amax());
    }
    let (mut c1_sff, mut c1_par) = (0.0f64, 0.0f64);
    if l1.l.rank() > 0 {
        let pl = projection_matrix(&l1.l)?;
        let plh = projection_matrix(&l1.l_hat)?;
        let j = &f.split.j;
        let n = f.n();
        for a in 0..n {
            for b in 0..n {
                let d = &plh * f.joint.right.alpha.get(a, b) - j * (&pl * f.joint.left.alpha.get(a, b));
                c1_sff = c1_sff.max(d.amax());
            }
        }
        let nl = &f.joint.left.normal_projector;
        let nr = &f.joint.right.normal_projector;
        for i in 0..n {
            let d = &plh * nr * &l1.djps[i] * l1.l.basis() - j * (&pl * nl * &l1.dps[i] * l1.l.basis());
            c1_par = c1_par.max(d.amax());
        }
    }
    Ok(ResidualReport {
        star: f.split.star_residual,
        skew,
        c1_sff,
        c1_parallel: c1_par,
        c2: None,
        theta_identity: f.theta_identity_residual(&opts.tol),
        omega_null: f.omega_null_residual(),
    })
}

/// Derivatives of the Euclidean projectors onto `L` and `L_hat`, per chart axis.
pub(crate) fn l_gradients(src: &FiberSource, l1: &Level1) -> Result<Vec<[DMatrix<f64>; 2]>> {
    let hints = l1.hints();
    let x = l1.fiber.x.clone();
    let grads = Stencil::new(src.opts.h2).gradients(&x, &mut |y| {
        let fy = src.fiber(y, &hints)?;
        let ly = level1(src, fy, &hints)?;
        Ok(vec![ly.l.projector(), ly.l_hat.projector()])
    })?;
    Ok(grads.into_iter().map(|g| [g[0].clone(), g[1].clone()]).collect())
}

/// `(C2)`: derivatives of sections of `L`, `L_hat` along `D` stay inside them.
fn c2_residual(l1: &Level1, grads: &[[DMatrix<f64>; 2]]) -> Result<f64> {
    if l1.l.rank() == 0 || l1.d.rank() == 0 {
        return Ok(0.0);
    }
    let f = &l1.fiber;
    let m = f.joint.left_dim();
    let mr = f.joint.right.ambient.dim();
    let off_l = (DMatrix::identity(m, m) - projection_matrix(&l1.l)?) * &f.joint.left.normal_projector;
    let off_lh = (DMatrix::identity(mr, mr) - projection_matrix(&l1.l_hat)?) * &f.joint.right.normal_projector;
    let mut worst: f64 = 0.0;
    for z in l1.d.basis().column_iter() {
        let mut dpl = DMatrix::zeros(m, m);
        let mut dplh = DMatrix::zeros(mr, mr);
        for (i, g) in grads.iter().enumerate() {
            dpl += &g[0] * z[i];
            dplh += &g[1] * z[i];
        }
        worst = worst.max((&off_l * dpl * l1.l.basis()).amax());
        worst = worst.max((&off_lh * dplh * l1.l_hat.basis()).amax());
    }
    Ok(worst)
}

/// Degenerate-branch claims at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimReport {
    /// `|J f' - f_hat|`.
    pub j_position: f64,
    /// `|J e0 - xi0|`, when a witness was found on the unlifted pair.
    pub j_e0: Option<f64>,
    pub s_signature: Signature,
    /// `max |K(Z)|` for `Z` in `Theta`.
    pub k_theta: f64,
    pub s0_signature: Signature,
    pub s1_signature: Signature,
    pub s1_rank: usize,
    pub gamma_rank: usize,
    pub d: usize,
    pub l_signature: Signature,
    /// Distance of `f'/|f'|` from `L`.
    pub position_in_l: f64,
    /// `max |<alpha'(Z, W), f'> + <Z, W>|` over `Theta`.
    pub th0: f64,
}

pub const CLAIM_TOL: f64 = 1e-6;

impl ClaimReport {
    pub fn claim1(&self) -> bool {
        self.s_signature.is_lorentzian()
    }

    pub fn claim2(&self) -> bool {
        self.k_theta <= CLAIM_TOL && self.s0_signature.is_lorentzian()
    }

    pub fn claim3(&self) -> bool {
        self.s1_rank == self.gamma_rank
    }

    pub fn claim4(&self) -> bool {
        self.d > 0 && self.l_signature.is_lorentzian() && self.position_in_l <= CLAIM_TOL
    }

    /// First failing claim with its residual.
    pub fn first_failure(&self) -> Option<(u8, f64)> {
        if !self.claim1() {
            return Some((1, self.s_signature.neg as f64));
        }
        if !self.claim2() {
            return Some((2, self.k_theta));
        }
        if !self.claim3() {
            return Some((3, self.s1_rank.abs_diff(self.gamma_rank) as f64));
        }
        if !self.claim4() {
            return Some((4, self.position_in_l));
        }
        if self.th0 > CLAIM_TOL {
            return Some((5, self.th0));
        }
        None
    }

    pub fn all_pass(&self) -> bool {
        self.first_failure().is_none()
    }
}

fn claims(l1: &Level1, xi0: Option<&DVector<f64>>, tol: &Tolerance) -> Result<ClaimReport> {
    let f = &l1.fiber;
    let pos = &f.joint.left.position;
    let j_position = (&f.split.j * pos - &f.joint.right.position).norm();
    let j_e0 = match (xi0, f.joint.left.ambient.e0()) {
        (Some(xi0), Some(e0)) => Some((&f.split.j * e0 - xi0).norm()),
        _ => None,
    };
    let mut k_theta: f64 = 0.0;
    for z in f.theta.basis().column_iter() {
        let mut k = DMatrix::zeros(f.s.rank(), f.s.rank());
        for (i, ki) in l1.k_ops.iter().enumerate() {
            k += ki * z[i];
        }
        k_theta = k_theta.max(k.amax());
    }
    let s1 = f.s.orthogonal_within(&l1.s0);
    let n = f.n();
    let gamma_rank = if s1.rank() == 0 || f.theta.rank() == 0 {
        0
    } else {
        let p1 = projection_matrix(&s1)?;
        let gamma = f
            .joint
            .left
            .alpha
            .restrict(f.theta.basis(), &DMatrix::identity(n, n))
            .map_target(&p1, &f.joint.left.ambient);
        span_of_image(&gamma, tol).rank()
    };
    let position_in_l = l1.l.residual(&(pos / pos.norm()));
    // polarized form of <alpha'(Z,Z), f'> = -|Z|^2
    let tb = f.theta.basis();
    let mut th0: f64 = 0.0;
    for a in 0..tb.ncols() {
        for b in a..tb.ncols() {
            let za = tb.column(a).into_owned();
            let zb = tb.column(b).into_owned();
            let lhs = f.joint.left.ambient.dot(&f.joint.left.alpha.apply(&za, &zb), pos);
            th0 = th0.max((lhs + f.tangent.dot(&za, &zb)).abs());
        }
    }
    Ok(ClaimReport {
        j_position,
        j_e0,
        s_signature: f.s.signature(),
        k_theta,
        s0_signature: l1.s0.signature(),
        s1_signature: s1.signature(),
        s1_rank: s1.rank(),
        gamma_rank,
        d: l1.d.rank(),
        l_signature: l1.l.signature(),
        position_in_l,
        th0,
    })
}

/// Ranks that define the regions of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RankProfile {
    pub degenerate: bool,
    pub omega: usize,
    pub gamma_perp: usize,
    pub theta: usize,
    pub s: usize,
    pub s0: usize,
    pub l: usize,
    pub d: usize,
}

/// Everything computed at one grid point.
#[derive(Debug, Clone)]
pub struct PointState {
    pub k: usize,
    pub x: Vec<f64>,
    pub degenerate: bool,
    /// Witness on the unlifted pair, normalized to `<f_hat, xi0> = 1`.
    pub xi0: Option<DVector<f64>>,
    pub fiber: Fiber,
    pub k_ops: Vec<DMatrix<f64>>,
    pub s0: Subspace,
    pub s1: Subspace,
    pub l: Subspace,
    pub l_hat: Subspace,
    pub d: Subspace,
    pub residuals: ResidualReport,
    pub claims: Option<ClaimReport>,
    pub profile: RankProfile,
    /// `d_i P_L`, `d_i P_L_hat` when second-level differences were taken.
    pub l_gradients: Option<Vec<[DMatrix<f64>; 2]>>,
}

impl PointState {
    pub fn ell(&self) -> usize {
        self.l.rank()
    }

    /// `T = J|_L` as a map `L -> L_hat` in the bases of `L` and `L_hat`.
    pub fn t_matrix(&self) -> DMatrix<f64> {
        self.l_hat.basis().transpose() * &self.fiber.split.j * self.l.basis()
    }
}

/// Maximal connected set of grid points with one rank profile.
#[derive(Debug, Clone)]
pub struct Region {
    pub id: usize,
    pub profile: RankProfile,
    pub points: Vec<usize>,
    /// Worst residuals over the region.
    pub residuals: ResidualReport,
    pub claims_pass: Option<bool>,
    /// `S` Riemannian at every point (relaxed index hypothesis).
    pub s_riemannian: bool,
}

#[derive(Debug, Clone)]
pub struct PairAnalysis {
    pub n: usize,
    /// Codimensions of the Euclidean-model immersions.
    pub p: usize,
    pub q: usize,
    /// Ambient indices.
    pub a: usize,
    pub b: usize,
    pub points: Vec<PointState>,
    pub regions: Vec<Region>,
    pub options: PairOptions,
    pub(crate) plain: FiberSource,
    pub(crate) lifted: FiberSource,
}

impl PairAnalysis {
    pub(crate) fn source(&self, k: usize) -> &FiberSource {
        if self.points[k].degenerate {
            &self.lifted
        } else {
            &self.plain
        }
    }

    /// The left immersion as given (before any lift).
    pub fn left_jet(&self) -> &ImmersionJet {
        &self.plain.left.jet
    }

    pub fn right_jet(&self) -> &ImmersionJet {
        &self.plain.right.jet
    }

    pub fn degenerate(&self) -> bool {
        self.points.iter().any(|p| p.degenerate)
    }

    pub fn region_of(&self, k: usize) -> Option<&Region> {
        self.regions.iter().find(|r| r.points.contains(&k))
    }

    /// Frame of `D` over the whole grid, when its rank is constant.
    pub fn d_frame(&self, f: &ImmersionJet) -> Result<DistributionFrame> {
        let bases: Vec<DMatrix<f64>> = self.points.iter().map(|p| p.d.basis().clone()).collect();
        check_constant(bases.iter().map(|b| b.ncols()), "D")?;
        DistributionFrame::from_bases(&f.grid, bases)
    }

    /// Frame of `L` over the whole grid, when its rank is constant.
    pub fn l_frame(&self, f: &ImmersionJet) -> Result<SubbundleFrame> {
        SubbundleFrame::from_subspaces(&f.grid, self.points.iter().map(|p| p.l.clone()).collect(), "L")
    }
}

fn check_constant(mut ranks: impl Iterator<Item = usize>, what: &str) -> Result<()> {
    if let Some(first) = ranks.next() {
        if let Some(found) = ranks.find(|&r| r != first) {
            return Err(Error::RankJump {
                what: what.into(),
                expected: first,
                found,
            });
        }
    }
    Ok(())
}

fn worst(a: &mut ResidualReport, b: &ResidualReport) {
    a.star = a.star.max(b.star);
    a.skew = a.skew.max(b.skew);
    a.c1_sff = a.c1_sff.max(b.c1_sff);
    a.c1_parallel = a.c1_parallel.max(b.c1_parallel);
    a.c2 = match (a.c2, b.c2) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    a.theta_identity = a.theta_identity.max(b.theta_identity);
    a.omega_null = a.omega_null.max(b.omega_null);
}

fn segment(grid: &crate::chart::Grid, points: &[PointState]) -> Vec<Region> {
    let mut label = vec![usize::MAX; points.len()];
    let mut regions = Vec::new();
    for start in 0..points.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = regions.len();
        let profile = points[start].profile;
        let mut stack = vec![start];
        let mut members = Vec::new();
        label[start] = id;
        while let Some(k) = stack.pop() {
            members.push(k);
            for nb in grid.neighbors(k) {
                if label[nb] == usize::MAX && points[nb].profile == profile {
                    label[nb] = id;
                    stack.push(nb);
                }
            }
        }
        members.sort_unstable();
        let mut residuals = points[members[0]].residuals.clone();
        let mut claims_pass = points[members[0]].claims.as_ref().map(|c| c.all_pass());
        let mut s_riemannian = true;
        for &k in &members {
            worst(&mut residuals, &points[k].residuals);
            if let Some(c) = &points[k].claims {
                claims_pass = Some(claims_pass.unwrap_or(true) && c.all_pass());
            }
            s_riemannian &= points[k].fiber.s.signature().is_riemannian();
        }
        regions.push(Region {
            id,
            profile,
            points: members,
            residuals,
            claims_pass,
            s_riemannian,
        });
    }
    regions
}

fn codim(j: &ImmersionJet) -> (usize, usize) {
    let amb = &j.ambient;
    if amb.null_pair().is_some() {
        // light-cone model: the Euclidean codimension drops by two
        (amb.dim() - j.n() - 2, 0)
    } else {
        (amb.dim() - j.n(), amb.index())
    }
}

/// Run the fiberwise construction on an isometric pair.
pub fn analyze_pair(f: &ImmersionJet, g: &ImmersionJet, opts: &PairOptions) -> Result<PairAnalysis> {
    if f.grid != g.grid {
        return Err(Error::InvalidInput("pair sides use different grids".into()));
    }
    let plain = FiberSource {
        left: Side::new(f.clone()),
        right: Side::new(g.clone()),
        augmented: false,
        opts: opts.clone(),
    };
    let lifted = FiberSource {
        left: plain.left.lifted(),
        augmented: true,
        ..plain.clone()
    };
    let degenerate_ok = f.ambient.is_euclidean() && g.ambient.null_pair().is_some();
    let (p, a) = codim(f);
    let (q, b) = codim(g);

    let points: Vec<PointState> = (0..f.len())
        .into_par_iter()
        .map(|k| -> Result<PointState> {
            let js = joint_at_grid(&plain.left, &plain.right, k, opts.isometry_tol, &opts.tol)?;
            let om = omega(&js, &opts.tol);
            let witness = match degeneracy_test(&js, &om, &opts.tol) {
                Degeneracy::Degenerate { xi0 } => Some(xi0),
                _ => None,
            };
            let degenerate = match opts.branch {
                BranchChoice::Auto => witness.is_some(),
                BranchChoice::Nondegenerate => false,
                BranchChoice::Degenerate => true,
            };
            if degenerate && !degenerate_ok {
                return Err(Error::HypothesisOutOfRange(
                    "degenerate branch needs a Euclidean f and a light-cone f_hat".into(),
                ));
            }
            let src = if degenerate { &lifted } else { &plain };
            let fiber = src.fiber_grid(k)?;
            let l1 = level1(src, fiber, &RankHints::default()).map_err(|e| at_point(e, k))?;
            let mut residuals = level1_residuals(&l1, opts)?;
            let l_grads = if opts.second_level {
                let g = l_gradients(src, &l1).map_err(|e| at_point(e, k))?;
                residuals.c2 = Some(c2_residual(&l1, &g)?);
                Some(g)
            } else {
                None
            };
            let claims = if degenerate {
                Some(claims(&l1, witness.as_ref(), &opts.tol)?)
            } else {
                None
            };
            let s1 = l1.fiber.s.orthogonal_within(&l1.s0);
            let profile = RankProfile {
                degenerate,
                omega: l1.fiber.split.omega.rank(),
                gamma_perp: l1.fiber.split.gamma_perp.rank(),
                theta: l1.fiber.theta.rank(),
                s: l1.fiber.s.rank(),
                s0: l1.s0.rank(),
                l: l1.l.rank(),
                d: l1.d.rank(),
            };
            Ok(PointState {
                k,
                x: l1.fiber.x.clone(),
                degenerate,
                xi0: witness,
                k_ops: l1.k_ops,
                s0: l1.s0,
                s1,
                l: l1.l,
                l_hat: l1.l_hat,
                d: l1.d,
                fiber: l1.fiber,
                residuals,
                claims,
                profile,
                l_gradients: l_grads,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if opts.strict_claims {
        for pt in &points {
            if let Some((claim, residual)) = pt.claims.as_ref().and_then(|c| c.first_failure()) {
                return Err(Error::ClaimViolation { claim, residual });
            }
        }
    }
    let regions = segment(&f.grid, &points);
    Ok(PairAnalysis {
        n: f.n(),
        p,
        q,
        a,
        b,
        points,
        regions,
        options: opts.clone(),
        plain,
        lifted,
    })
}
