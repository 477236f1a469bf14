//! Linear algebra over finite-dimensional spaces carrying a nondegenerate,
//! possibly indefinite, scalar product.
//!
//! Subspaces are stored with a basis that is orthonormal for the auxiliary
//! Euclidean product of the reference coordinates. Every rank decision goes
//! through [`Tolerance`]: singular values below `max(rel * sigma_max, abs)`
//! count as zero.

use serde::Serialize;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-9,
            abs: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(rel: f64) -> Self {
        Tolerance {
            rel,
            abs: rel * 1e-3,
        }
    }

    pub fn threshold(&self, scale: f64) -> f64 {
        (self.rel * scale).max(self.abs)
    }
}

/// Flat scalar product on `R^m` given by its Gram matrix in the reference basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProduct {
    gram: DMatrix<f64>,
    index: usize,
    null_pair: Option<(usize, usize)>,
}

impl ScalarProduct {
    pub fn euclidean(dim: usize) -> Self {
        ScalarProduct {
            gram: DMatrix::identity(dim, dim),
            index: 0,
            null_pair: None,
        }
    }

    /// Diagonal product with the given `+1`/`-1` entries.
    pub fn with_signature(signs: &[i8]) -> Result<Self> {
        if signs.is_empty() || signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidInput(
                "signature entries must be +1 or -1".into(),
            ));
        }
        let m = signs.len();
        let gram = DMatrix::from_fn(m, m, |i, j| if i == j { signs[i] as f64 } else { 0.0 });
        Ok(ScalarProduct {
            gram,
            index: signs.iter().filter(|s| **s < 0).count(),
            null_pair: None,
        })
    }

    /// Lorentz space `L^{n+2}` in a pseudo-orthonormal basis `(e0, e1, e2, ...)`
    /// with `<e0,e0> = <e1,e1> = 0`, `<e0,e1> = 1`.
    pub fn light_cone(euclidean_dim: usize) -> Self {
        let m = euclidean_dim + 2;
        let mut gram = DMatrix::identity(m, m);
        gram[(0, 0)] = 0.0;
        gram[(1, 1)] = 0.0;
        gram[(0, 1)] = 1.0;
        gram[(1, 0)] = 1.0;
        ScalarProduct {
            gram,
            index: 1,
            null_pair: Some((0, 1)),
        }
    }

    pub fn from_gram(gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() || gram.nrows() == 0 {
            return Err(Error::InvalidInput("Gram matrix must be square".into()));
        }
        let asym = (&gram - gram.transpose()).abs().max();
        if asym > 1e-12 * gram.abs().max().max(1.0) {
            return Err(Error::InvalidInput("Gram matrix must be symmetric".into()));
        }
        let eig = SymmetricEigen::new(gram.clone());
        let scale = eig.eigenvalues.abs().max();
        if eig.eigenvalues.iter().any(|l| l.abs() <= 1e-12 * scale.max(1e-300)) {
            return Err(Error::InvalidInput("Gram matrix must be nondegenerate".into()));
        }
        let index = eig.eigenvalues.iter().filter(|l| **l < 0.0).count();
        Ok(ScalarProduct {
            gram,
            index,
            null_pair: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn null_pair(&self) -> Option<(usize, usize)> {
        self.null_pair
    }

    pub fn is_euclidean(&self) -> bool {
        self.index == 0 && self.gram == DMatrix::identity(self.dim(), self.dim())
    }

    pub fn dot(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.gram * v)[(0, 0)]
    }

    pub fn norm_sq(&self, u: &DVector<f64>) -> f64 {
        self.dot(u, u)
    }

    pub fn basis_vector(&self, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[i] = 1.0;
        v
    }

    /// The flagged null vector `e0`, if this is a light-cone model.
    pub fn e0(&self) -> Option<DVector<f64>> {
        self.null_pair.map(|(a, _)| self.basis_vector(a))
    }

    pub fn e1(&self) -> Option<DVector<f64>> {
        self.null_pair.map(|(_, b)| self.basis_vector(b))
    }

    /// Orthogonal direct sum `self (+) other`, with `other` negated when `negate_other`.
    pub fn direct_sum(&self, other: &ScalarProduct, negate_other: bool) -> ScalarProduct {
        let (m1, m2) = (self.dim(), other.dim());
        let mut gram = DMatrix::zeros(m1 + m2, m1 + m2);
        gram.view_mut((0, 0), (m1, m1)).copy_from(&self.gram);
        let sign = if negate_other { -1.0 } else { 1.0 };
        gram.view_mut((m1, m1), (m2, m2))
            .copy_from(&(other.gram.clone() * sign));
        let index = if negate_other {
            self.index + (m2 - other.index)
        } else {
            self.index + other.index
        };
        ScalarProduct {
            gram,
            index,
            null_pair: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Signature {
    pub pos: usize,
    pub neg: usize,
    pub null: usize,
    /// Eigenvalues that cleared the null threshold by less than a factor 1e3.
    pub flagged: usize,
}

impl Signature {
    pub fn rank(&self) -> usize {
        self.pos + self.neg + self.null
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.null == 0
    }

    pub fn is_riemannian(&self) -> bool {
        self.null == 0 && self.neg == 0
    }

    pub fn is_lorentzian(&self) -> bool {
        self.null == 0 && self.neg == 1
    }
}

/// Rank of a matrix at tolerance.
pub fn numerical_rank(mat: &DMatrix<f64>, tol: &Tolerance) -> usize {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return 0;
    }
    let sv = mat.clone().singular_values();
    let thr = tol.threshold(sv.max());
    sv.iter().filter(|s| **s > thr).count()
}

/// Orthonormal basis of the column space; `rank` forces the dimension.
pub fn column_space(mat: &DMatrix<f64>, tol: &Tolerance, rank: Option<usize>) -> DMatrix<f64> {
    let m = mat.nrows();
    if mat.ncols() == 0 || m == 0 {
        return DMatrix::zeros(m, 0);
    }
    let svd = mat.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|a, b| sv[*b].partial_cmp(&sv[*a]).unwrap());
    let thr = tol.threshold(sv.max());
    let k = rank.unwrap_or_else(|| sv.iter().filter(|s| **s > thr).count());
    let k = k.min(sv.len());
    let cols: Vec<DVector<f64>> = order[..k].iter().map(|&i| u.column(i).into_owned()).collect();
    from_columns(m, &cols)
}

/// Orthonormal basis of the kernel; `dim` forces the kernel dimension.
pub fn kernel(mat: &DMatrix<f64>, tol: &Tolerance, dim: Option<usize>) -> DMatrix<f64> {
    let c = mat.ncols();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if mat.nrows() == 0 {
        let k = dim.unwrap_or(c).min(c);
        return DMatrix::identity(c, c).columns(0, k).into_owned();
    }
    // pad so the thin SVD yields a full right basis
    let rows = mat.nrows().max(c);
    let mut padded = DMatrix::zeros(rows, c);
    padded.view_mut((0, 0), (mat.nrows(), c)).copy_from(mat);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|a, b| sv[*a].partial_cmp(&sv[*b]).unwrap());
    let thr = tol.threshold(sv.max());
    let k = dim.unwrap_or_else(|| sv.iter().filter(|s| **s <= thr).count());
    let k = k.min(c);
    let cols: Vec<DVector<f64>> = order[..k]
        .iter()
        .map(|&i| vt.row(i).transpose().into_owned())
        .collect();
    from_columns(c, &cols)
}

pub fn from_columns(nrows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    if cols.is_empty() {
        return DMatrix::zeros(nrows, 0);
    }
    DMatrix::from_columns(cols)
}

fn signature_of(gram: &DMatrix<f64>, tol: &Tolerance) -> Signature {
    let k = gram.nrows();
    if k == 0 {
        return Signature::default();
    }
    let sym = (gram + gram.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let thr = tol.threshold(eig.eigenvalues.abs().max());
    let mut s = Signature::default();
    for &l in eig.eigenvalues.iter() {
        if l.abs() <= thr {
            s.null += 1;
        } else {
            if l.abs() <= 1e3 * thr {
                s.flagged += 1;
            }
            if l > 0.0 {
                s.pos += 1;
            } else {
                s.neg += 1;
            }
        }
    }
    s
}

/// A linear subspace of an ambient space with a scalar product.
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient: ScalarProduct,
    basis: DMatrix<f64>,
    signature: Signature,
    tol: Tolerance,
}

impl Subspace {
    /// Span of the columns of `vectors` at tolerance.
    pub fn span(ambient: &ScalarProduct, vectors: &DMatrix<f64>, tol: &Tolerance) -> Subspace {
        Self::span_with_rank(ambient, vectors, tol, None)
    }

    pub fn span_with_rank(
        ambient: &ScalarProduct,
        vectors: &DMatrix<f64>,
        tol: &Tolerance,
        rank: Option<usize>,
    ) -> Subspace {
        assert_eq!(vectors.nrows(), ambient.dim(), "vector dimension mismatch");
        let basis = column_space(vectors, tol, rank);
        Self::from_orthonormal(ambient, basis, tol)
    }

    pub fn span_of(ambient: &ScalarProduct, vectors: &[DVector<f64>], tol: &Tolerance) -> Subspace {
        Self::span(ambient, &from_columns(ambient.dim(), vectors), tol)
    }

    pub(crate) fn from_orthonormal(
        ambient: &ScalarProduct,
        basis: DMatrix<f64>,
        tol: &Tolerance,
    ) -> Subspace {
        let gram = basis.transpose() * ambient.gram() * &basis;
        let signature = signature_of(&gram, tol);
        Subspace {
            ambient: ambient.clone(),
            basis,
            signature,
            tol: *tol,
        }
    }

    pub fn zero(ambient: &ScalarProduct) -> Subspace {
        Self::from_orthonormal(ambient, DMatrix::zeros(ambient.dim(), 0), &Tolerance::default())
    }

    pub fn full(ambient: &ScalarProduct) -> Subspace {
        let m = ambient.dim();
        Self::from_orthonormal(ambient, DMatrix::identity(m, m), &Tolerance::default())
    }

    pub fn ambient(&self) -> &ScalarProduct {
        &self.ambient
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn vectors(&self) -> Vec<DVector<f64>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.basis.transpose() * self.ambient.gram() * &self.basis
    }

    /// Re-express the same subspace in a new tolerance (rank is kept).
    pub fn with_tolerance(&self, tol: &Tolerance) -> Subspace {
        Self::from_orthonormal(&self.ambient, self.basis.clone(), tol)
    }

    /// Euclidean orthogonal projector onto the subspace (smooth in the subspace).
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Euclidean distance of `v` from the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - self.projector() * v).norm()
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        self.residual(v) <= tol * v.norm().max(1.0)
    }

    /// Largest Euclidean distance from a unit vector of `self` to `other`.
    pub fn excess_over(&self, other: &Subspace) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        let p = other.projector();
        let diff = &self.basis - &p * &self.basis;
        diff.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Projector-difference distance (symmetric, 0 iff equal).
    pub fn distance(&self, other: &Subspace) -> f64 {
        (self.projector() - other.projector()).norm()
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut cols = self.vectors();
        cols.extend(other.vectors());
        Subspace::span_of(&self.ambient, &cols, &self.tol)
    }

    /// `{ w in self : <w, u> = 0 for all u in other }`.
    pub fn orthogonal_within(&self, other: &Subspace) -> Subspace {
        self.orthogonal_within_dim(other, None)
    }

    pub fn orthogonal_within_dim(&self, other: &Subspace, dim: Option<usize>) -> Subspace {
        if self.rank() == 0 {
            return self.clone();
        }
        if other.rank() == 0 {
            return self.clone();
        }
        let m = other.basis.transpose() * self.ambient.gram() * &self.basis;
        let c = kernel(&m, &self.tol, dim);
        let basis = orthonormalize(&(&self.basis * c));
        Self::from_orthonormal(&self.ambient, basis, &self.tol)
    }

    /// Orthogonal complement in the whole ambient space.
    pub fn complement(&self) -> Subspace {
        Subspace::full(&self.ambient)
            .with_tolerance(&self.tol)
            .orthogonal_within(self)
    }

    /// Coordinates of `v` in this basis (least squares).
    pub fn coordinates(&self, v: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * v
    }
}

fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let qr = m.clone().qr();
    let q = qr.q();
    q.columns(0, m.ncols().min(m.nrows())).into_owned()
}

/// Sampled bilinear map `values[i][j] = beta(e_i, f_j)` into a target space.
#[derive(Debug, Clone)]
pub struct BilinearSample {
    left_dim: usize,
    right_dim: usize,
    target: ScalarProduct,
    values: Vec<DVector<f64>>,
    symmetric: bool,
}

impl BilinearSample {
    pub fn new(
        left_dim: usize,
        right_dim: usize,
        target: &ScalarProduct,
        values: Vec<DVector<f64>>,
        symmetric: bool,
    ) -> Result<Self> {
        if values.len() != left_dim * right_dim {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                left_dim * right_dim,
                values.len()
            )));
        }
        if values.iter().any(|v| v.len() != target.dim()) {
            return Err(Error::InvalidInput("value dimension mismatch".into()));
        }
        let s = BilinearSample {
            left_dim,
            right_dim,
            target: target.clone(),
            values,
            symmetric,
        };
        if symmetric {
            if left_dim != right_dim {
                return Err(Error::InvalidInput("symmetric form must be square".into()));
            }
            let scale = s.values.iter().map(|v| v.amax()).fold(0.0, f64::max);
            for i in 0..left_dim {
                for j in 0..i {
                    if (s.get(i, j) - s.get(j, i)).amax() > 1e-8 * scale.max(1.0) {
                        return Err(Error::InvalidInput("form is not symmetric".into()));
                    }
                }
            }
        }
        Ok(s)
    }

    pub fn from_fn(
        left_dim: usize,
        right_dim: usize,
        target: &ScalarProduct,
        symmetric: bool,
        f: impl Fn(usize, usize) -> DVector<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(left_dim * right_dim);
        for i in 0..left_dim {
            for j in 0..right_dim {
                values.push(f(i, j));
            }
        }
        Self::new(left_dim, right_dim, target, values, symmetric)
    }

    pub fn left_dim(&self) -> usize {
        self.left_dim
    }

    pub fn right_dim(&self) -> usize {
        self.right_dim
    }

    pub fn target(&self) -> &ScalarProduct {
        &self.target
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.values[i * self.right_dim + j]
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    /// `beta(x, y)` for coefficient vectors.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.target.dim());
        for i in 0..self.left_dim {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..self.right_dim {
                if y[j] != 0.0 {
                    out += self.get(i, j) * (x[i] * y[j]);
                }
            }
        }
        out
    }

    /// Restriction to `left_basis x right_basis` (columns are coefficient vectors).
    pub fn restrict(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> BilinearSample {
        let mut values = Vec::with_capacity(left.ncols() * right.ncols());
        for a in left.column_iter() {
            for b in right.column_iter() {
                values.push(self.apply(&a.into_owned(), &b.into_owned()));
            }
        }
        BilinearSample {
            left_dim: left.ncols(),
            right_dim: right.ncols(),
            target: self.target.clone(),
            values,
            symmetric: false,
        }
    }

    /// Composition with a linear map of the target (`m_out x m_in`).
    pub fn map_target(&self, map: &DMatrix<f64>, target: &ScalarProduct) -> BilinearSample {
        BilinearSample {
            left_dim: self.left_dim,
            right_dim: self.right_dim,
            target: target.clone(),
            values: self.values.iter().map(|v| map * v).collect(),
            symmetric: self.symmetric,
        }
    }

    fn stacked(&self) -> DMatrix<f64> {
        from_columns(self.target.dim(), &self.values)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.amax()).fold(0.0, f64::max)
    }
}

/// Span of the image of `beta`.
pub fn span_of_image(beta: &BilinearSample, tol: &Tolerance) -> Subspace {
    Subspace::span(&beta.target, &beta.stacked(), tol)
}

pub fn span_of_image_with_rank(beta: &BilinearSample, tol: &Tolerance, rank: Option<usize>) -> Subspace {
    Subspace::span_with_rank(&beta.target, &beta.stacked(), tol, rank)
}

/// `{X : <beta(X, Y), xi> = 0 for all Y and all xi in t}`, valid for degenerate `t`.
///
/// The result lives in the left space with the product `left`.
pub fn nullity_space(
    beta: &BilinearSample,
    t: &Subspace,
    left: &ScalarProduct,
    tol: &Tolerance,
) -> Subspace {
    nullity_space_with_dim(beta, t, left, tol, None)
}

pub fn nullity_space_with_dim(
    beta: &BilinearSample,
    t: &Subspace,
    left: &ScalarProduct,
    tol: &Tolerance,
    dim: Option<usize>,
) -> Subspace {
    assert_eq!(left.dim(), beta.left_dim, "left product dimension mismatch");
    let n = beta.left_dim;
    if t.rank() == 0 || beta.right_dim == 0 {
        return Subspace::full(left).with_tolerance(tol);
    }
    let g = beta.target.gram();
    let tg = t.basis().transpose() * g;
    let rows = beta.right_dim * t.rank();
    let mut m = DMatrix::zeros(rows, n);
    for i in 0..n {
        for j in 0..beta.right_dim {
            let c = &tg * beta.get(i, j);
            for k in 0..t.rank() {
                m[(j * t.rank() + k, i)] = c[k];
            }
        }
    }
    // scale the threshold by the form itself, not by what survives projection
    let scale = beta.max_norm() * t.basis().amax().max(1.0) * g.amax();
    let mut local = *tol;
    local.abs = tol.threshold(scale).max(tol.abs);
    let basis = kernel(&m, &local, dim);
    Subspace::from_orthonormal(left, basis, tol)
}

/// `U ∩ U^⊥`.
pub fn radical(u: &Subspace) -> Subspace {
    radical_with_dim(u, None)
}

pub fn radical_with_dim(u: &Subspace, dim: Option<usize>) -> Subspace {
    if u.rank() == 0 {
        return u.clone();
    }
    let gram = u.gram();
    let scale = u.ambient().gram().amax();
    let mut local = u.tol;
    local.abs = u.tol.threshold(scale);
    let c = kernel(&gram, &local, dim);
    let basis = orthonormalize(&(u.basis() * c));
    Subspace::from_orthonormal(u.ambient(), basis, &u.tol)
}

/// Orthogonal projection onto a nondegenerate subspace.
pub fn orthogonal_projection(t: &Subspace, v: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(projection_matrix(t)? * v)
}

/// Matrix of the orthogonal projection onto a nondegenerate subspace.
pub fn projection_matrix(t: &Subspace) -> Result<DMatrix<f64>> {
    let m = t.ambient().dim();
    if t.rank() == 0 {
        return Ok(DMatrix::zeros(m, m));
    }
    let rad = radical(t);
    if rad.rank() > 0 {
        return Err(Error::DegenerateSubspace {
            radical_dim: rad.rank(),
        });
    }
    let b = t.basis();
    let gram = t.gram();
    let inv = gram
        .try_inverse()
        .ok_or(Error::DegenerateSubspace { radical_dim: 1 })?;
    Ok(b * inv * b.transpose() * t.ambient().gram())
}

/// `U ∩ V` via the kernel of the stacked annihilator system.
pub fn intersect(u: &Subspace, v: &Subspace) -> Subspace {
    intersect_with_dim(u, v, None)
}

pub fn intersect_with_dim(u: &Subspace, v: &Subspace, dim: Option<usize>) -> Subspace {
    assert_eq!(u.ambient().dim(), v.ambient().dim(), "ambient mismatch");
    let m = u.ambient().dim();
    let ann_u = annihilator(u);
    let ann_v = annihilator(v);
    let rows = ann_u.ncols() + ann_v.ncols();
    let mut sys = DMatrix::zeros(rows, m);
    if ann_u.ncols() > 0 {
        sys.view_mut((0, 0), (ann_u.ncols(), m)).copy_from(&ann_u.transpose());
    }
    if ann_v.ncols() > 0 {
        sys.view_mut((ann_u.ncols(), 0), (ann_v.ncols(), m))
            .copy_from(&ann_v.transpose());
    }
    let mut local = u.tol;
    local.abs = u.tol.threshold(1.0);
    let basis = kernel(&sys, &local, dim);
    Subspace::from_orthonormal(u.ambient(), basis, &u.tol)
}

/// Euclidean orthonormal basis of the Euclidean complement.
fn annihilator(u: &Subspace) -> DMatrix<f64> {
    let m = u.ambient().dim();
    if u.rank() == 0 {
        return DMatrix::identity(m, m);
    }
    kernel(&u.basis().transpose(), &Tolerance::default(), Some(m - u.rank()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentz_plane() -> ScalarProduct {
        ScalarProduct::light_cone(0)
    }

    #[test]
    fn zero_form_spans_nothing() {
        let e = ScalarProduct::euclidean(3);
        let b = BilinearSample::from_fn(2, 2, &e, true, |_, _| DVector::zeros(3)).unwrap();
        assert_eq!(span_of_image(&b, &Tolerance::default()).rank(), 0);
    }

    #[test]
    fn metric_times_fixed_vector_is_rank_one() {
        let e = ScalarProduct::euclidean(4);
        let w = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let b = BilinearSample::from_fn(3, 3, &e, true, |i, j| {
            if i == j {
                w.clone()
            } else {
                DVector::zeros(4)
            }
        })
        .unwrap();
        let s = span_of_image(&b, &Tolerance::default());
        assert_eq!(s.rank(), 1);
        assert!(s.contains(&w, 1e-12));
    }

    #[test]
    fn nullity_trivial_cases() {
        let e = ScalarProduct::euclidean(2);
        let left = ScalarProduct::euclidean(3);
        let tol = Tolerance::default();
        let zero = BilinearSample::from_fn(3, 3, &e, true, |_, _| DVector::zeros(2)).unwrap();
        assert_eq!(nullity_space(&zero, &Subspace::full(&e), &left, &tol).rank(), 3);
        let b = BilinearSample::from_fn(3, 3, &e, true, |i, j| {
            DVector::from_vec(vec![(i + j) as f64, 1.0])
        })
        .unwrap();
        assert_eq!(nullity_space(&b, &Subspace::zero(&e), &left, &tol).rank(), 3);
    }

    #[test]
    fn nullity_with_degenerate_target_uses_no_projection() {
        // beta(x, y) = x0 y0 e0 in the Lorentz plane; T = span{e0} is null.
        let l = lorentz_plane();
        let left = ScalarProduct::euclidean(2);
        let e0 = l.e0().unwrap();
        let b = BilinearSample::from_fn(2, 2, &l, true, |i, j| {
            if i == 0 && j == 0 {
                e0.clone()
            } else {
                DVector::zeros(2)
            }
        })
        .unwrap();
        let t = Subspace::span_of(&l, &[e0.clone()], &Tolerance::default());
        // <e0, e0> = 0 so every X is in the nullity of beta_T
        assert_eq!(nullity_space(&b, &t, &left, &Tolerance::default()).rank(), 2);
        let t1 = Subspace::span_of(&l, &[l.e1().unwrap()], &Tolerance::default());
        assert_eq!(nullity_space(&b, &t1, &left, &Tolerance::default()).rank(), 1);
    }

    #[test]
    fn radical_examples() {
        let tol = Tolerance::default();
        let e = ScalarProduct::euclidean(3);
        let u = Subspace::span_of(&e, &[DVector::from_vec(vec![1.0, 1.0, 0.0])], &tol);
        assert_eq!(radical(&u).rank(), 0);
        let l = ScalarProduct::light_cone(1);
        let e0 = l.e0().unwrap();
        let null_line = Subspace::span_of(&l, &[e0.clone()], &tol);
        assert_eq!(radical(&null_line).rank(), 1);
        let plane = Subspace::span_of(&l, &[e0.clone(), l.basis_vector(2)], &tol);
        let r = radical(&plane);
        assert_eq!(r.rank(), 1);
        assert!(r.contains(&e0, 1e-12));
        assert_eq!(plane.signature(), Signature { pos: 1, neg: 0, null: 1, flagged: 0 });
    }

    #[test]
    fn projection_in_lorentz_plane() {
        let tol = Tolerance::default();
        let l = lorentz_plane();
        // timelike u = e0 - e1, <u,u> = -2
        let u = DVector::from_vec(vec![1.0, -1.0]);
        let t = Subspace::span_of(&l, &[u.clone()], &tol);
        let v = DVector::from_vec(vec![0.3, 1.7]);
        let p = orthogonal_projection(&t, &v).unwrap();
        assert!(l.dot(&(&v - &p), &u).abs() < 1e-14);
        assert!((orthogonal_projection(&t, &u).unwrap() - &u).norm() < 1e-14);
        let null = Subspace::span_of(&l, &[l.e0().unwrap()], &tol);
        assert!(matches!(
            orthogonal_projection(&null, &v),
            Err(Error::DegenerateSubspace { .. })
        ));
    }

    #[test]
    fn intersections() {
        let tol = Tolerance::default();
        let e = ScalarProduct::euclidean(4);
        let u = Subspace::span_of(&e, &[e.basis_vector(0), e.basis_vector(1)], &tol);
        let v = Subspace::span_of(&e, &[e.basis_vector(2), e.basis_vector(3)], &tol);
        assert_eq!(intersect(&u, &v).rank(), 0);
        assert_eq!(intersect(&u, &u).distance(&u) < 1e-12, true);
        let w = Subspace::span_of(
            &e,
            &[e.basis_vector(1), DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0])],
            &tol,
        );
        let i = intersect(&u, &w);
        assert_eq!(i.rank(), 1);
        assert!(i.contains(&e.basis_vector(1), 1e-12));
    }

    #[test]
    fn kernel_of_wide_matrix_is_complete() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = kernel(&m, &Tolerance::default(), None);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).amax() < 1e-14);
    }
}
