use nalgebra::DMatrix;

use super::JointNormalSpace;
use crate::error::{Error, Result};
use crate::linalg::{
    intersect_with_dim, nullity_space_with_dim, numerical_rank, projection_matrix, radical, radical_with_dim,
    span_of_image, span_of_image_with_rank, ScalarProduct, Subspace, Tolerance,
};

/// Ranks imposed on a fiber built next to a reference point, so that
/// finite differences compare subspaces of equal dimension.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RankHints {
    pub omega: Option<usize>,
    pub theta: Option<usize>,
    pub s: Option<usize>,
    pub s0: Option<usize>,
    pub l: Option<usize>,
    pub d: Option<usize>,
}

/// Orthogonal splittings of the curvature spans and the isometry `J`.
#[derive(Debug, Clone)]
pub struct Splitting {
    pub omega: Subspace,
    /// `S(alpha)` (with `f'` adjoined in the degenerate branch).
    pub span_left: Subspace,
    pub span_right: Subspace,
    pub gamma: Subspace,
    pub gamma_perp: Subspace,
    pub gamma_hat: Subspace,
    pub gamma_hat_perp: Subspace,
    /// `J : Gamma^perp -> Gamma_hat^perp` as a map of ambient vectors (zero off `Gamma^perp`).
    pub j: DMatrix<f64>,
    /// `J^{-1} : Gamma_hat^perp -> Gamma^perp`.
    pub j_inv: DMatrix<f64>,
    /// `max |alpha_hat_{Gamma_hat^perp} - J alpha_{Gamma^perp}|`.
    pub star_residual: f64,
}

fn pinv_left(b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let gram = b.transpose() * b;
    gram.try_inverse().map(|inv| inv * b.transpose())
}

/// Split `S(alpha) = Gamma (+) Gamma^perp` and `S(alpha_hat) = Gamma_hat (+) Gamma_hat^perp`,
/// with `Omega` the graph of `J`. With `augmented`, `Omega` also contains
/// `(f', f_hat)` and the left span is `span{f'} (+) S(alpha')`.
pub fn gamma_splitting(js: &JointNormalSpace, augmented: bool, omega_rank: Option<usize>, tol: &Tolerance) -> Result<Splitting> {
    let span = js.span(tol);
    let core_dim = omega_rank.map(|r| if augmented { r.saturating_sub(1) } else { r });
    let rad = radical_with_dim(&span, core_dim);
    let curv_left = span_of_image(&js.left.alpha, tol);
    let curv_right = span_of_image(&js.right.alpha, tol);
    let (omega, span_left, span_right) = if augmented {
        let mut pos = js.embed_left(&js.left.position);
        pos += js.embed_right(&js.right.position);
        let omega = rad.sum(&Subspace::span(&js.metric, &DMatrix::from_column_slice(pos.len(), 1, pos.as_slice()), tol));
        let lp = Subspace::span(&js.left.ambient, &DMatrix::from_column_slice(js.left_dim(), 1, js.left.position.as_slice()), tol);
        let rp = Subspace::span(
            &js.right.ambient,
            &DMatrix::from_column_slice(js.right.ambient.dim(), 1, js.right.position.as_slice()),
            tol,
        );
        (omega, curv_left.sum(&lp), curv_right.sum(&rp))
    } else {
        (rad, curv_left.clone(), curv_right.clone())
    };
    let (b1, b2) = js.split_rows(omega.basis());
    let r = omega.rank();
    if numerical_rank(&b1, tol) < r || numerical_rank(&b2, tol) < r {
        return Err(Error::SplitFailure(format!(
            "Omega (rank {r}) is not a graph over both factors"
        )));
    }
    let gamma_perp = Subspace::span_with_rank(&js.left.ambient, &b1, tol, Some(r));
    let gamma_hat_perp = Subspace::span_with_rank(&js.right.ambient, &b2, tol, Some(r));
    for (name, sub) in [("Gamma^perp", &gamma_perp), ("Gamma_hat^perp", &gamma_hat_perp)] {
        let rad = radical(sub);
        if rad.rank() > 0 {
            return Err(Error::SplitFailure(format!("{name} is degenerate (radical {})", rad.rank())));
        }
    }
    let gamma = curv_left.orthogonal_within(&gamma_perp);
    let gamma_hat = curv_right.orthogonal_within(&gamma_hat_perp);
    for (name, g, gp, total) in [
        ("left", &gamma, &gamma_perp, &span_left),
        ("right", &gamma_hat, &gamma_hat_perp, &span_right),
    ] {
        if g.rank() + gp.rank() != total.rank() || gp.excess_over(total) > tol.rel.sqrt() {
            return Err(Error::SplitFailure(format!(
                "{name} span of rank {} does not split as {} + {}",
                total.rank(),
                g.rank(),
                gp.rank()
            )));
        }
    }
    let (j, j_inv) = match (pinv_left(&b1), pinv_left(&b2)) {
        (Some(p1), Some(p2)) => (&b2 * p1, &b1 * p2),
        _ => return Err(Error::SplitFailure("Omega projections are singular".into())),
    };
    let pl = projection_matrix(&gamma_perp)?;
    let pr = projection_matrix(&gamma_hat_perp)?;
    let n = js.left.n();
    let mut star: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            let d = &pr * js.right.alpha.get(i, k) - &j * (&pl * js.left.alpha.get(i, k));
            star = star.max(d.amax());
        }
    }
    Ok(Splitting {
        omega,
        span_left,
        span_right,
        gamma,
        gamma_perp,
        gamma_hat,
        gamma_hat_perp,
        j,
        j_inv,
        star_residual: star,
    })
}

/// Pointwise part of the construction: splitting, `Theta = N(beta)` and `S`.
#[derive(Debug, Clone)]
pub struct Fiber {
    pub x: Vec<f64>,
    pub joint: JointNormalSpace,
    pub split: Splitting,
    pub augmented: bool,
    pub tangent: ScalarProduct,
    pub theta: Subspace,
    pub s: Subspace,
    pub s_hat: Subspace,
}

impl Fiber {
    pub fn n(&self) -> usize {
        self.joint.left.n()
    }

    /// Image of a left subspace under `J`.
    pub fn hat(&self, sub: &Subspace, tol: &Tolerance) -> Subspace {
        Subspace::span_with_rank(&self.joint.right.ambient, &(&self.split.j * sub.basis()), tol, Some(sub.rank()))
    }

    /// `max |alpha(X, Y)|` over coordinate vectors, for scaling thresholds.
    pub fn alpha_scale(&self) -> f64 {
        self.joint.alpha_sum.max_norm().max(1.0)
    }

    /// Distance between `Theta` and `N(alpha_{S^perp}) ∩ N(alpha_hat_{S_hat^perp})`.
    pub fn theta_identity_residual(&self, tol: &Tolerance) -> f64 {
        let sp = self.joint.left.normal.orthogonal_within(&self.s);
        let shp = self.joint.right.normal.orthogonal_within(&self.s_hat);
        let a = nullity_space_with_dim(&self.joint.left.alpha, &sp, &self.tangent, tol, None);
        let b = nullity_space_with_dim(&self.joint.right.alpha, &shp, &self.tangent, tol, None);
        let other = intersect_with_dim(&a, &b, None);
        if other.rank() != self.theta.rank() {
            return f64::INFINITY;
        }
        other.distance(&self.theta)
    }

    /// `max |<<w, w'>>|` over a basis of `Omega` (null fibers).
    pub fn omega_null_residual(&self) -> f64 {
        self.split.omega.gram().amax()
    }
}

pub fn construct_fiber(x: &[f64], joint: JointNormalSpace, augmented: bool, hints: &RankHints, tol: &Tolerance) -> Result<Fiber> {
    let split = gamma_splitting(&joint, augmented, hints.omega, tol)?;
    let tangent = joint.left.tangent_product()?;
    let a = nullity_space_with_dim(&joint.left.alpha, &split.gamma, &tangent, tol, None);
    let b = nullity_space_with_dim(&joint.right.alpha, &split.gamma_hat, &tangent, tol, None);
    let theta = intersect_with_dim(&a, &b, hints.theta);
    let n = joint.left.n();
    let on_theta = joint.left.alpha.restrict(theta.basis(), &DMatrix::identity(n, n));
    let s = if augmented {
        let img = span_of_image(&on_theta, tol);
        let mut cols = img.vectors();
        cols.push(joint.left.position.clone());
        let m = crate::linalg::from_columns(joint.left_dim(), &cols);
        Subspace::span_with_rank(&joint.left.ambient, &m, tol, hints.s)
    } else {
        span_of_image_with_rank(&on_theta, tol, hints.s)
    };
    let s_hat = Subspace::span_with_rank(&joint.right.ambient, &(&split.j * s.basis()), tol, Some(s.rank()));
    Ok(Fiber {
        x: x.to_vec(),
        joint,
        split,
        augmented,
        tangent,
        theta,
        s,
        s_hat,
    })
}
