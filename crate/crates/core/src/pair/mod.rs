//! Fiberwise structure of an isometric pair of immersions: the null span
//! `Omega`, its splitting, and the pair `(T, D)` built from it.

mod bounds;
mod fiber;
mod pipeline;
mod sections;

pub use bounds::{check_dimension_bound, BoundInput, BoundKind, BoundVerdict};
pub use fiber::{construct_fiber, gamma_splitting, Fiber, RankHints, Splitting};
pub use pipeline::{
    CLAIM_TOL,
    analyze_pair, BranchChoice, ClaimReport, PairAnalysis, PairOptions, PointState, RankProfile, Region,
    ResidualReport,
};
pub use sections::{Stencil, StencilLevel};
pub(crate) use pipeline::{l_gradients, level1, FiberSource, Level1};

use nalgebra::{DMatrix, DVector};

use crate::chart::psi_jets;
use crate::error::{Error, Result};
use crate::jets::ImmersionJet;
use crate::linalg::{
    numerical_rank, radical, span_of_image, BilinearSample, ScalarProduct, Subspace, Tolerance,
};
use crate::taylor::Jet;

/// Whether a side of the pair is replaced by its light-cone lift `Psi o f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lift {
    None,
    Psi,
}

/// Second-order data of one immersion at one point.
#[derive(Debug, Clone)]
pub struct LocalData {
    pub ambient: ScalarProduct,
    pub position: DVector<f64>,
    /// `m x n`.
    pub d1: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub normal: Subspace,
    /// Ambient-orthogonal projector onto the normal space.
    pub normal_projector: DMatrix<f64>,
    pub alpha: BilinearSample,
}

impl LocalData {
    pub fn from_jets(ambient: &ScalarProduct, jets: &[Jet], tol: &Tolerance) -> Result<LocalData> {
        let m = ambient.dim();
        let n = jets.first().map(|j| j.nvars()).unwrap_or(0);
        if jets.len() != m {
            return Err(Error::InvalidInput("jet count differs from ambient dimension".into()));
        }
        if jets[0].order() < 2 {
            return Err(Error::InvalidInput("second-order jets required".into()));
        }
        let g = ambient.gram();
        let position = DVector::from_iterator(m, jets.iter().map(|j| j.value()));
        let d1 = DMatrix::from_fn(m, n, |k, i| jets[k].deriv(&[i]));
        let metric = d1.transpose() * g * &d1;
        let rank = numerical_rank(&metric, tol);
        if rank < n {
            return Err(Error::NotImmersion {
                point: 0,
                rank,
                expected: n,
            });
        }
        let metric_inv = metric
            .clone()
            .try_inverse()
            .ok_or(Error::NotImmersion { point: 0, rank, expected: n })?;
        let normal_projector = DMatrix::identity(m, m) - &d1 * metric_inv * d1.transpose() * g;
        let normal = Subspace::span_with_rank(ambient, &normal_projector, tol, Some(m - n));
        let alpha = BilinearSample::from_fn(n, n, ambient, true, |i, j| {
            let d2 = DVector::from_iterator(m, jets.iter().map(|c| c.deriv(&[i, j])));
            &normal_projector * d2
        })?;
        Ok(LocalData {
            ambient: ambient.clone(),
            position,
            d1,
            metric,
            normal,
            normal_projector,
            alpha,
        })
    }

    pub fn n(&self) -> usize {
        self.d1.ncols()
    }

    pub fn tangent_product(&self) -> Result<ScalarProduct> {
        ScalarProduct::from_gram((&self.metric + self.metric.transpose()) * 0.5)
    }
}

/// One side of a pair: an immersion, possibly lifted to the light cone.
#[derive(Debug, Clone)]
pub struct Side {
    pub jet: ImmersionJet,
    pub lift: Lift,
}

impl Side {
    pub fn new(jet: ImmersionJet) -> Side {
        Side { jet, lift: Lift::None }
    }

    pub fn lifted(&self) -> Side {
        Side {
            jet: self.jet.clone(),
            lift: Lift::Psi,
        }
    }

    pub fn ambient(&self) -> ScalarProduct {
        match self.lift {
            Lift::None => self.jet.ambient.clone(),
            Lift::Psi => ScalarProduct::light_cone(self.jet.ambient.dim()),
        }
    }

    fn lift_jets(&self, jets: Vec<Jet>) -> Vec<Jet> {
        match self.lift {
            Lift::None => jets,
            Lift::Psi => psi_jets(&jets),
        }
    }

    /// Raw (lifted) jets at grid point `k`.
    pub fn jets_at_grid(&self, k: usize) -> Vec<Jet> {
        self.lift_jets(self.jet.taylor(k).to_vec())
    }

    /// Data at grid point `k`.
    pub fn at_grid(&self, k: usize, tol: &Tolerance) -> Result<LocalData> {
        let jets = self.jets_at_grid(k);
        LocalData::from_jets(&self.ambient(), &jets, tol).map_err(|e| at_point(e, k))
    }

    /// Data at an arbitrary chart point.
    pub fn at(&self, x: &[f64], tol: &Tolerance) -> Result<LocalData> {
        let jets = self.lift_jets(self.jet.jets_at(x, 2)?);
        LocalData::from_jets(&self.ambient(), &jets, tol)
    }
}

pub(crate) fn at_point(e: Error, k: usize) -> Error {
    match e {
        Error::NotImmersion { rank, expected, .. } => Error::NotImmersion { point: k, rank, expected },
        other => other,
    }
}

/// `T^perp f (+) T^perp f_hat` with `<<,>> = <,> - <,>^`, and `alpha (+) alpha_hat`.
#[derive(Debug, Clone)]
pub struct JointNormalSpace {
    pub left: LocalData,
    pub right: LocalData,
    pub metric: ScalarProduct,
    pub alpha_sum: BilinearSample,
}

impl JointNormalSpace {
    pub fn left_dim(&self) -> usize {
        self.left.ambient.dim()
    }

    /// `(xi, 0)`.
    pub fn embed_left(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.metric.dim());
        out.rows_mut(0, v.len()).copy_from(v);
        out
    }

    /// `(0, xi)`.
    pub fn embed_right(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.metric.dim());
        out.rows_mut(self.left_dim(), v.len()).copy_from(v);
        out
    }

    /// Top and bottom blocks of a joint matrix.
    pub fn split_rows(&self, m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let a = self.left_dim();
        let b = self.metric.dim() - a;
        (m.rows(0, a).into_owned(), m.rows(a, b).into_owned())
    }

    /// `S(alpha (+) alpha_hat)`.
    pub fn span(&self, tol: &Tolerance) -> Subspace {
        span_of_image(&self.alpha_sum, tol)
    }
}

/// Relative disagreement of two induced metrics.
pub fn metric_mismatch(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

pub fn build_joint(left: LocalData, right: LocalData, isometry_tol: f64) -> Result<JointNormalSpace> {
    if left.n() != right.n() {
        return Err(Error::InvalidInput("pair sides have different dimensions".into()));
    }
    let residual = metric_mismatch(&left.metric, &right.metric);
    if residual > isometry_tol {
        return Err(Error::NotIsometricPair { residual });
    }
    let metric = left.ambient.direct_sum(&right.ambient, true);
    let n = left.n();
    let a = left.ambient.dim();
    let alpha_sum = BilinearSample::from_fn(n, n, &metric, true, |i, j| {
        let mut v = DVector::zeros(metric.dim());
        v.rows_mut(0, a).copy_from(left.alpha.get(i, j));
        v.rows_mut(a, right.ambient.dim()).copy_from(right.alpha.get(i, j));
        v
    })?;
    Ok(JointNormalSpace {
        left,
        right,
        metric,
        alpha_sum,
    })
}

/// Joint space of two immersions at grid point `k`.
pub fn joint_at_grid(f: &Side, g: &Side, k: usize, isometry_tol: f64, tol: &Tolerance) -> Result<JointNormalSpace> {
    if f.jet.grid != g.jet.grid {
        return Err(Error::InvalidInput("pair sides use different grids".into()));
    }
    build_joint(f.at_grid(k, tol)?, g.at_grid(k, tol)?, isometry_tol)
}

/// `Omega = S(alpha (+) alpha_hat) ∩ S(alpha (+) alpha_hat)^perp`.
pub fn omega(js: &JointNormalSpace, tol: &Tolerance) -> Subspace {
    radical(&js.span(tol))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Degeneracy {
    Nondegenerate,
    /// Some `(0, xi0)` lies in `Omega`; `xi0` is normalized to `<f_hat, xi0> = 1`
    /// when that pairing is nonzero.
    Degenerate { xi0: DVector<f64> },
    /// Some `(xi, 0)` lies in `Omega`.
    DegenerateLeft { xi: DVector<f64> },
}

/// Injectivity of the projections of `Omega` onto both factors.
pub fn degeneracy_test(js: &JointNormalSpace, omega: &Subspace, tol: &Tolerance) -> Degeneracy {
    let r = omega.rank();
    if r == 0 {
        return Degeneracy::Nondegenerate;
    }
    let (b1, b2) = js.split_rows(omega.basis());
    let witness = |proj: &DMatrix<f64>, other: &DMatrix<f64>| -> Option<DVector<f64>> {
        if numerical_rank(proj, tol) >= r {
            return None;
        }
        let svd = proj.clone().svd(false, true);
        let vt = svd.v_t.expect("requested");
        // right singular vector of the smallest singular value
        let (i, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("nonempty");
        let u = if vt.nrows() < r {
            crate::linalg::kernel(proj, tol, Some(1)).column(0).into_owned()
        } else {
            vt.row(i).transpose()
        };
        Some(other * u)
    };
    if let Some(xi0) = witness(&b1, &b2) {
        let pairing = js.right.ambient.dot(&js.right.position, &xi0);
        let xi0 = if pairing.abs() > tol.abs.max(1e-10) * xi0.norm() {
            xi0 / pairing
        } else {
            xi0
        };
        return Degeneracy::Degenerate { xi0 };
    }
    if let Some(xi) = witness(&b2, &b1) {
        return Degeneracy::DegenerateLeft { xi };
    }
    Degeneracy::Nondegenerate
}
