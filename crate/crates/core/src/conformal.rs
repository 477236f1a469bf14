//! Conformal invariants of a single immersion: the umbilic-corrected second
//! fundamental form along a distribution, conformal ruledness, conformal
//! s-nullities and the nullity-based rigidity test.

use serde::Serialize;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PointGeometry;
use crate::jets::{
    fundamental_data, leaf_mean_curvature_at, metric_orthonormal, DistributionFrame, ImmersionJet, SubbundleFrame,
};
use crate::linalg::{span_of_image, BilinearSample, Subspace, Tolerance};

/// Brackets leaving `D` by more than this make `D` non-integrable.
pub const INTEGRABILITY_THRESHOLD: f64 = 1e-6;

/// `beta = alpha - <,> eta` along `D`, and the span `L` of `beta(D, TM)`.
#[derive(Debug, Clone)]
pub struct ConformalSff {
    pub d: DistributionFrame,
    pub eta: Vec<DVector<f64>>,
    /// Per point, on coordinate vectors.
    pub beta: Vec<BilinearSample>,
    pub l: SubbundleFrame,
    pub ell: usize,
}

fn check_grid(j: &ImmersionJet, d: &DistributionFrame) -> Result<()> {
    if j.grid != d.grid {
        return Err(Error::InvalidInput("distribution and immersion use different grids".into()));
    }
    Ok(())
}

fn umbilic_defect(pg: &PointGeometry, basis: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
    let z = metric_orthonormal(basis, &pg.metric);
    let mut worst: f64 = 0.0;
    for a in 0..z.ncols() {
        for b in 0..=a {
            let za = z.column(a).into_owned();
            let zb = z.column(b).into_owned();
            let mut v = pg.alpha_at(&za, &zb);
            if a == b {
                v -= eta;
            }
            worst = worst.max(v.amax());
        }
    }
    worst
}

pub fn conformal_sff(j: &ImmersionJet, d: &DistributionFrame, tol: &Tolerance) -> Result<ConformalSff> {
    check_grid(j, d)?;
    let br = d.bracket_residual().into_iter().fold(0.0, f64::max);
    if br > INTEGRABILITY_THRESHOLD {
        return Err(Error::InvalidInput(format!("distribution is not integrable (bracket residual {br:.3e})")));
    }
    let fd = fundamental_data(j, tol)?;
    let n = j.n();
    let mut eta = Vec::with_capacity(j.len());
    let mut beta = Vec::with_capacity(j.len());
    let mut spans = Vec::with_capacity(j.len());
    for (pg, basis) in fd.points.iter().zip(&d.bases) {
        let e = leaf_mean_curvature_at(pg, basis);
        let b = BilinearSample::from_fn(n, n, &j.ambient, true, |a, c| pg.alpha.get(a, c) - &e * pg.metric[(a, c)])?;
        let on_d = b.restrict(basis, &DMatrix::identity(n, n));
        spans.push(span_of_image(&on_d, tol));
        eta.push(e);
        beta.push(b);
    }
    let l = SubbundleFrame::from_subspaces(&j.grid, spans, "L^c_D")?;
    let ell = l.rank;
    Ok(ConformalSff {
        d: d.clone(),
        eta,
        beta,
        l,
        ell,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuledVerdict {
    pub ruled: bool,
    /// `max(umbilic, bracket)`.
    pub residual: f64,
    /// Largest `|alpha(Z_a, Z_b) - delta_ab eta|` over orthonormal bases of `D`.
    pub umbilic: f64,
    pub bracket: f64,
}

/// Leaves of `D` are umbilic in the ambient space and `D` is integrable.
pub fn is_conformally_ruled(j: &ImmersionJet, d: &DistributionFrame, tol: &Tolerance) -> Result<RuledVerdict> {
    check_grid(j, d)?;
    let fd = fundamental_data(j, tol)?;
    let mut umbilic: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (pg, basis) in fd.points.iter().zip(&d.bases) {
        let e = leaf_mean_curvature_at(pg, basis);
        umbilic = umbilic.max(umbilic_defect(pg, basis, &e));
        scale = scale.max(pg.alpha.max_norm());
    }
    let bracket = d.bracket_residual().into_iter().fold(0.0, f64::max);
    let threshold = (1e-7 * scale).max(tol.threshold(scale));
    Ok(RuledVerdict {
        ruled: umbilic <= threshold && bracket <= INTEGRABILITY_THRESHOLD,
        residual: umbilic.max(bracket),
        umbilic,
        bracket,
    })
}

/// Search controls for conformal nullities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullityOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Relative tolerance for coincident eigenvalues and kernels.
    pub eigen_tol: f64,
    pub max_iterations: usize,
}

impl Default for NullityOptions {
    fn default() -> Self {
        NullityOptions {
            restarts: 24,
            seed: 0x5eed,
            eigen_tol: 1e-7,
            max_iterations: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SearchStats {
    pub restarts: usize,
    pub evaluations: usize,
    /// Best surrogate value reached by each restart.
    pub trace: Vec<f64>,
}

/// Nullity of `alpha_V - <,> zeta` for shape operators given in orthonormal frames.
#[derive(Debug, Clone, PartialEq)]
pub struct NullityCore {
    pub value: usize,
    /// The search space was finite (`s = p`), so `value` is the maximum.
    pub exact: bool,
    /// `p x s`, orthonormal coefficients of `V` in the normal frame.
    pub v: DMatrix<f64>,
    /// Coefficients of `zeta` in the columns of `v`.
    pub zeta: DVector<f64>,
    /// Orthonormal basis (frame coordinates) of the nullity space.
    pub kernel: DMatrix<f64>,
    pub stats: SearchStats,
}

fn op_scale(ops: &[DMatrix<f64>]) -> f64 {
    ops.iter().map(|a| a.norm()).fold(1.0, f64::max)
}

fn combine(ops: &[DMatrix<f64>], coeffs: nalgebra::DVectorView<f64>) -> DMatrix<f64> {
    let n = ops[0].nrows();
    let mut out = DMatrix::zeros(n, n);
    for (a, c) in ops.iter().zip(coeffs.iter()) {
        out += a * *c;
    }
    out
}

/// Largest common eigenspace of symmetric operators, with its eigenvalues.
pub fn common_eigenspace(ops: &[DMatrix<f64>], eigen_tol: f64) -> (usize, Vec<f64>, DMatrix<f64>) {
    let n = ops.first().map(|a| a.nrows()).unwrap_or(0);
    let thr = eigen_tol * op_scale(ops);
    let mut best = (0usize, vec![0.0; ops.len()], DMatrix::zeros(n, 0));
    let mut cs = Vec::with_capacity(ops.len());
    rec_common(ops, 0, DMatrix::identity(n, n), &mut cs, thr, &mut best);
    best
}

fn rec_common(
    ops: &[DMatrix<f64>],
    idx: usize,
    u: DMatrix<f64>,
    cs: &mut Vec<f64>,
    thr: f64,
    best: &mut (usize, Vec<f64>, DMatrix<f64>),
) {
    let r = u.ncols();
    if r <= best.0 {
        return;
    }
    if idx == ops.len() {
        *best = (r, cs.clone(), u);
        return;
    }
    let a = &ops[idx];
    let b = u.transpose() * a * &u;
    let eig = SymmetricEigen::new((&b + b.transpose()) * 0.5);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    // cluster
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for v in vals {
        match clusters.last_mut() {
            Some(c) if v - c[c.len() - 1] <= thr => c.push(v),
            _ => clusters.push(vec![v]),
        }
    }
    clusters.sort_by_key(|c| std::cmp::Reverse(c.len()));
    let n = a.nrows();
    for c in clusters {
        if c.len() <= best.0 {
            continue;
        }
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        let m = (a - DMatrix::identity(n, n) * mean) * &u;
        let k = small_singular_space(&m, thr * (c.len() as f64).max(1.0));
        if k.ncols() <= best.0 {
            continue;
        }
        cs.push(mean);
        rec_common(ops, idx + 1, &u * k, cs, thr, best);
        cs.pop();
    }
}

/// Right singular vectors of `m` with singular value at most `thr`.
fn small_singular_space(m: &DMatrix<f64>, thr: f64) -> DMatrix<f64> {
    let mtm = m.transpose() * m;
    let eig = SymmetricEigen::new((&mtm + mtm.transpose()) * 0.5);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] <= thr * thr)
        .collect();
    DMatrix::from_fn(m.ncols(), keep.len(), |row, col| eig.eigenvectors[(row, keep[col])])
}

fn orthonormal_columns(w: &DMatrix<f64>) -> DMatrix<f64> {
    w.clone().qr().q()
}

/// Smooth surrogate: sum of the `k` smallest squared singular values of the
/// stacked operators `A_{eta_a} - c_a I`.
fn surrogate(ops: &[DMatrix<f64>], q: &DMatrix<f64>, c: &[f64], k: usize, scale: f64) -> f64 {
    let n = ops[0].nrows();
    let s = q.ncols();
    let mut m = DMatrix::zeros(s * n, n);
    for a in 0..s {
        let block = combine(ops, q.column(a)) - DMatrix::identity(n, n) * c[a];
        m.rows_mut(a * n, n).copy_from(&block);
    }
    let mut sv: Vec<f64> = m.singular_values().iter().cloned().collect();
    sv.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sv.iter().take(k).map(|v| v * v).sum::<f64>() / (scale * scale)
}

fn evaluate(ops: &[DMatrix<f64>], q: &DMatrix<f64>, eigen_tol: f64) -> (usize, Vec<f64>, DMatrix<f64>) {
    let vops: Vec<DMatrix<f64>> = (0..q.ncols()).map(|a| combine(ops, q.column(a))).collect();
    let thr_ops = op_scale(ops);
    // keep the threshold tied to the original operators
    let rel = eigen_tol * thr_ops / op_scale(&vops);
    common_eigenspace(&vops, rel)
}

fn subsets(p: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, p: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == s {
            out.push(cur.clone());
            return;
        }
        for i in start..p {
            cur.push(i);
            go(i + 1, p, s, cur, out);
            cur.pop();
        }
    }
    go(0, p, s, &mut cur, &mut out);
    out
}

/// `nu_s` from symmetric forms `ops[b] = <alpha(Z_i, Z_j), xi_b>` in orthonormal
/// tangent and normal frames.
pub fn nullity_from_forms(ops: &[DMatrix<f64>], s: usize, opts: &NullityOptions) -> Result<NullityCore> {
    let p = ops.len();
    if s == 0 || s > p {
        return Err(Error::InvalidInput(format!("nullity order {s} outside 1..={p}")));
    }
    let n = ops[0].nrows();
    let scale = op_scale(ops);
    let mut stats = SearchStats::default();
    let mut best: Option<(usize, DMatrix<f64>, Vec<f64>, DMatrix<f64>)> = None;
    let consider = |q: DMatrix<f64>, best: &mut Option<(usize, DMatrix<f64>, Vec<f64>, DMatrix<f64>)>| {
        let (dim, cs, ker) = evaluate(ops, &q, opts.eigen_tol);
        if best.as_ref().map(|b| dim > b.0).unwrap_or(true) {
            *best = Some((dim, q, cs, ker));
        }
    };
    // frame-aligned planes first
    for sub in subsets(p, s) {
        let q = DMatrix::from_fn(p, s, |i, a| if i == sub[a] { 1.0 } else { 0.0 });
        consider(q, &mut best);
        stats.evaluations += 1;
    }
    let exact = s == p;
    if !exact {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let found = best.as_ref().map(|b| b.0).unwrap_or(0);
        'targets: for k in ((found + 1)..=n).rev() {
            for _ in 0..opts.restarts {
                stats.restarts += 1;
                let w = DMatrix::from_fn(p, s, |_, _| rng.gen_range(-1.0..1.0));
                let q0 = orthonormal_columns(&w);
                // start c at eigenvalues of the projected operators
                let mut c: Vec<f64> = (0..s)
                    .map(|a| {
                        let e = SymmetricEigen::new(combine(ops, q0.column(a))).eigenvalues;
                        e[rng.gen_range(0..e.len())]
                    })
                    .collect();
                let mut params: Vec<f64> = w.iter().cloned().collect();
                let obj = |params: &[f64], c: &[f64]| {
                    let w = DMatrix::from_column_slice(p, s, params);
                    surrogate(ops, &orthonormal_columns(&w), c, k, scale)
                };
                let mut f = obj(&params, &c);
                let mut step = 0.25;
                let mut it = 0;
                while step > 1e-12 && it < opts.max_iterations && f > 1e-28 {
                    let mut improved = false;
                    for i in 0..params.len() + s {
                        for sign in [1.0, -1.0] {
                            let mut tp = params.clone();
                            let mut tc = c.clone();
                            if i < params.len() {
                                tp[i] += sign * step;
                            } else {
                                tc[i - params.len()] += sign * step * scale;
                            }
                            let g = obj(&tp, &tc);
                            stats.evaluations += 1;
                            if g < f {
                                f = g;
                                params = tp;
                                c = tc;
                                improved = true;
                            }
                        }
                    }
                    if !improved {
                        step *= 0.5;
                    }
                    it += 1;
                }
                stats.trace.push(f);
                let q = orthonormal_columns(&DMatrix::from_column_slice(p, s, &params));
                consider(q, &mut best);
                if best.as_ref().map(|b| b.0 >= k).unwrap_or(false) {
                    break 'targets;
                }
            }
        }
    }
    let (value, v, cs, kernel) = best.expect("at least one candidate plane");
    Ok(NullityCore {
        value,
        exact,
        v,
        zeta: DVector::from_vec(cs),
        kernel,
        stats,
    })
}

/// Exact nullity at a fixed normal plane `V` (columns of `q`, orthonormal coefficients).
pub fn nullity_at_plane(ops: &[DMatrix<f64>], q: &DMatrix<f64>, eigen_tol: f64) -> usize {
    evaluate(ops, q, eigen_tol).0
}

#[derive(Debug, Clone)]
pub struct NullityCertificate {
    /// The normal subspace `V`.
    pub v: Subspace,
    /// The vector `zeta` in `V`.
    pub zeta: DVector<f64>,
    /// Coordinate basis of the nullity space of `alpha_V - <,> zeta`.
    pub kernel: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct NullityReport {
    pub s: usize,
    /// Certified lower bound; the maximum when `exact`.
    pub value: usize,
    pub exact: bool,
    pub certificate: NullityCertificate,
    pub search_stats: SearchStats,
}

/// Forms `<alpha(Z_i, Z_j), xi_b>` in a metric-orthonormal frame `Z`.
pub fn shape_forms(pg: &PointGeometry) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let n = pg.n();
    let z = metric_orthonormal(&DMatrix::identity(n, n), &pg.metric);
    let ops = pg
        .normal_frame
        .column_iter()
        .map(|xi| {
            let xi = xi.into_owned();
            let a = z.transpose() * pg.second_form(&xi) * &z;
            (&a + a.transpose()) * 0.5
        })
        .collect();
    (z, ops)
}

pub fn conformal_s_nullity(
    j: &ImmersionJet,
    s: usize,
    point: usize,
    opts: &NullityOptions,
    tol: &Tolerance,
) -> Result<NullityReport> {
    if !j.ambient.is_euclidean() {
        return Err(Error::InvalidInput("conformal nullity needs a Euclidean ambient".into()));
    }
    if point >= j.len() {
        return Err(Error::InvalidInput(format!("point {point} outside the grid")));
    }
    let x = j.grid.point(point);
    let pg = PointGeometry::from_jets(&x, &j.ambient, j.taylor(point), None, tol)?;
    let (z, ops) = shape_forms(&pg);
    let mut local = *opts;
    local.seed ^= point as u64;
    let core = nullity_from_forms(&ops, s, &local)?;
    let vb = &pg.normal_frame * &core.v;
    let zeta = &vb * &core.zeta;
    Ok(NullityReport {
        s,
        value: core.value,
        exact: core.exact,
        certificate: NullityCertificate {
            v: Subspace::span(&j.ambient, &vb, tol),
            zeta,
            kernel: &z * &core.kernel,
        },
        search_stats: core.stats,
    })
}

/// Upper bound for `nu_s` (`p = 2`) from a Lipschitz-padded grid over the
/// normal circle and eigenvalue windows.
pub fn grid_nullity_bound_p2(ops: &[DMatrix<f64>], s: usize, resolution: usize, eigen_tol: f64) -> usize {
    assert_eq!(ops.len(), 2, "toy bound is for rank-2 normal bundles");
    let n = ops[0].nrows();
    let scale = op_scale(ops);
    let slack = eigen_tol * scale * n as f64;
    match s {
        1 => {
            let lip = (ops[0].norm_squared() + ops[1].norm_squared()).sqrt();
            let dtheta = std::f64::consts::PI / resolution as f64;
            let mut best = 0;
            for i in 0..resolution {
                let t = (i as f64 + 0.5) * dtheta;
                let a = &ops[0] * t.cos() + &ops[1] * t.sin();
                let mut e: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().cloned().collect();
                e.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let width = lip * dtheta + 2.0 * slack;
                for lo in 0..n {
                    let cnt = e[lo..].iter().take_while(|&&v| v - e[lo] <= width).count();
                    best = best.max(cnt);
                }
            }
            best
        }
        2 => {
            let r = scale;
            let h = 2.0 * r / resolution as f64;
            let pad = h / std::f64::consts::SQRT_2 + slack * 2.0;
            let mut best = 0;
            for i in 0..=resolution {
                for k in 0..=resolution {
                    let c = [-r + i as f64 * h, -r + k as f64 * h];
                    let mut m = DMatrix::zeros(2 * n, n);
                    for a in 0..2 {
                        m.rows_mut(a * n, n)
                            .copy_from(&(&ops[a] - DMatrix::identity(n, n) * c[a]));
                    }
                    let cnt = m.singular_values().iter().filter(|&&v| v <= pad).count();
                    best = best.max(cnt);
                }
            }
            best
        }
        _ => panic!("toy bound supports s = 1, 2"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundStatus {
    Satisfied,
    /// The computed nullity is a lower bound that satisfies the inequality.
    SatisfiedUpToSearch,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullityBound {
    pub s: usize,
    pub nullity: usize,
    pub exact: bool,
    pub bound: i64,
    pub status: BoundStatus,
}

impl NullityBound {
    fn new(s: usize, nullity: usize, exact: bool, bound: i64) -> Self {
        let status = if nullity as i64 > bound {
            BoundStatus::Violated
        } else if exact {
            BoundStatus::Satisfied
        } else {
            BoundStatus::SatisfiedUpToSearch
        };
        NullityBound {
            s,
            nullity,
            exact,
            bound,
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidityVerdict {
    pub point: usize,
    pub bounds: Vec<NullityBound>,
    /// The extra `nu_1` bound used when `q >= p + 5`.
    pub extra: Option<NullityBound>,
    pub holds: bool,
}

/// Check the nullity hypotheses of the rigidity criterion for a codimension-`q`
/// conformal deformation, pointwise.
pub fn rigidity_criterion(
    j: &ImmersionJet,
    q: usize,
    opts: &NullityOptions,
    tol: &Tolerance,
) -> Result<Vec<RigidityVerdict>> {
    let n = j.n();
    let p = j.ambient.dim() - n;
    if p > 5 || q < p || q + p + 3 > n {
        return Err(Error::HypothesisOutOfRange(format!(
            "need p <= 5 and p <= q <= n - p - 3 (n = {n}, p = {p}, q = {q})"
        )));
    }
    let (n_i, p_i, q_i) = (n as i64, p as i64, q as i64);
    let mut out = Vec::with_capacity(j.len());
    for k in 0..j.len() {
        let mut bounds = Vec::with_capacity(p);
        let mut nu1 = None;
        for s in 1..=p {
            let r = conformal_s_nullity(j, s, k, opts, tol)?;
            if s == 1 {
                nu1 = Some((r.value, r.exact));
            }
            bounds.push(NullityBound::new(s, r.value, r.exact, n_i + p_i - q_i - 2 * s as i64 - 1));
        }
        let extra = if q >= p + 5 {
            let (v, e) = nu1.expect("p >= 1");
            Some(NullityBound::new(1, v, e, n_i - 2 * (q_i - p_i) + 1))
        } else {
            None
        };
        let holds = bounds.iter().chain(extra.iter()).all(|b| b.status != BoundStatus::Violated);
        out.push(RigidityVerdict {
            point: k,
            bounds,
            extra,
            holds,
        });
    }
    Ok(out)
}
