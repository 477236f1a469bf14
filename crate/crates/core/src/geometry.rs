//! Pointwise extrinsic geometry of an immersion computed from its Taylor jets.
//!
//! The normal frame is produced inside jet arithmetic (projection of fixed
//! reference vectors followed by Gram-Schmidt in the ambient product), so its
//! first derivatives, and hence the normal connection, are exact.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::chart::ChartMap;
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, BilinearSample, ScalarProduct, Subspace, Tolerance};
use crate::taylor::{jet_dot, Jet};

/// Solve `a y = b` for jet-valued square `a` (row-major) and jet columns `b`.
pub fn jet_solve(a: &[Vec<Jet>], b: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>> {
    let n = a.len();
    let mut m: Vec<Vec<Jet>> = a.to_vec();
    let mut rhs: Vec<Vec<Jet>> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                m[perm[i]][col]
                    .value()
                    .abs()
                    .partial_cmp(&m[perm[j]][col].value().abs())
                    .unwrap()
            })
            .unwrap();
        perm.swap(col, piv);
        let p = perm[col];
        let pv = m[p][col].clone();
        if pv.value().abs() < 1e-300 {
            return Err(Error::InvalidInput("singular jet system".into()));
        }
        let inv = pv.recip();
        for r in col + 1..n {
            let rr = perm[r];
            let f = &m[rr][col] * &inv;
            if f.coeffs().iter().all(|c| *c == 0.0) {
                continue;
            }
            for c in col..n {
                let t = &f * &m[p][c];
                m[rr][c] = &m[rr][c] - &t;
            }
            for k in 0..rhs.len() {
                let t = &f * &rhs[k][p];
                rhs[k][rr] = &rhs[k][rr] - &t;
            }
        }
    }
    let mut out = Vec::with_capacity(rhs.len());
    for col in rhs {
        let mut y: Vec<Option<Jet>> = vec![None; n];
        for i in (0..n).rev() {
            let p = perm[i];
            let mut acc = col[p].clone();
            for c in i + 1..n {
                acc = &acc - &(&m[p][c] * y[c].as_ref().unwrap());
            }
            y[i] = Some(&acc / &m[p][i]);
        }
        out.push(y.into_iter().map(|v| v.unwrap()).collect());
    }
    Ok(out)
}

fn values(v: &[Jet]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|j| j.value()))
}

/// Ambient-orthonormal basis of the complement of `tangent` (columns), ordered
/// positive directions first.
pub fn normal_basis(ambient: &ScalarProduct, tangent: &DMatrix<f64>, tol: &Tolerance) -> DMatrix<f64> {
    let t = Subspace::span(ambient, tangent, tol);
    let normal = t.complement();
    let b = normal.basis();
    if b.ncols() == 0 {
        return b.clone();
    }
    let gram = b.transpose() * ambient.gram() * b;
    let eig = SymmetricEigen::new((&gram + gram.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let cols: Vec<DVector<f64>> = order
        .iter()
        .map(|&i| b * eig.eigenvectors.column(i) / eig.eigenvalues[i].abs().sqrt())
        .collect();
    DMatrix::from_columns(&cols)
}

/// Everything about an immersion at one chart point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub x: Vec<f64>,
    pub ambient: ScalarProduct,
    pub position: DVector<f64>,
    /// `m x n`, columns `d f / d x_i`.
    pub d1: DMatrix<f64>,
    /// `d2[i * n + j] = d^2 f / dx_i dx_j`.
    pub d2: Vec<DVector<f64>>,
    /// `d3[(i * n + j) * n + k]`, when the jet order allows.
    pub d3: Option<Vec<DVector<f64>>>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    /// Metric entries as jets one order below the position jets.
    pub metric_jets: Vec<Jet>,
    /// Ambient-orthogonal projector onto the normal space.
    pub normal_projector: DMatrix<f64>,
    /// `m x p`, ambient-orthonormal.
    pub normal_frame: DMatrix<f64>,
    pub normal_signs: Vec<f64>,
    /// Per coordinate direction, derivatives of the frame vectors (`m x p`).
    pub frame_derivs: Vec<DMatrix<f64>>,
    /// `connection[i][(a, b)]`: `nabla^perp_i xi_a = sum_b connection[i][(a, b)] xi_b`.
    pub connection: Vec<DMatrix<f64>>,
    pub alpha: BilinearSample,
    /// Relative distance between the frame and the reference it was aligned to.
    pub alignment_residual: f64,
}

impl PointGeometry {
    /// Geometry of `map` at `x` from jets of order `order >= 2`. The normal frame
    /// follows `reference` (columns) when given.
    pub fn at(
        map: &dyn ChartMap,
        x: &[f64],
        order: usize,
        reference: Option<&DMatrix<f64>>,
        tol: &Tolerance,
    ) -> Result<PointGeometry> {
        let jets = map.taylor(x, order.max(2))?;
        Self::from_jets(x, &map.ambient(), &jets, reference, tol)
    }

    pub fn from_jets(
        x: &[f64],
        ambient: &ScalarProduct,
        jets: &[Jet],
        reference: Option<&DMatrix<f64>>,
        tol: &Tolerance,
    ) -> Result<PointGeometry> {
        let m = ambient.dim();
        if jets.len() != m {
            return Err(Error::InvalidInput("jet count differs from ambient dimension".into()));
        }
        let n = jets[0].nvars();
        let order = jets[0].order();
        if order < 2 {
            return Err(Error::InvalidInput("geometry needs jets of order >= 2".into()));
        }
        let g = ambient.gram();
        let position = values(jets);
        // d1[i][k]: jet of d f^k / d x_i
        let d1j: Vec<Vec<Jet>> = (0..n)
            .map(|i| jets.iter().map(|c| c.derivative(i)).collect())
            .collect();
        let d1 = DMatrix::from_fn(m, n, |k, i| d1j[i][k].value());
        if numerical_rank(&d1, tol) < n {
            return Err(Error::NotImmersion {
                point: 0,
                rank: numerical_rank(&d1, tol),
                expected: n,
            });
        }
        let mut metric_jets = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                metric_jets.push(jet_dot(&d1j[i], &d1j[j], g));
            }
        }
        let metric = DMatrix::from_fn(n, n, |i, j| metric_jets[i * n + j].value());
        let metric_inv = metric
            .clone()
            .try_inverse()
            .ok_or(Error::NotImmersion {
                point: 0,
                rank: n - 1,
                expected: n,
            })?;
        let tangent_proj = &d1 * &metric_inv * d1.transpose() * g;
        let normal_projector = DMatrix::identity(m, m) - tangent_proj;

        let p = m - n;
        let reference = match reference {
            Some(r) if r.ncols() == p && r.nrows() == m => r.clone(),
            _ => normal_basis(ambient, &d1, tol),
        };

        // project reference vectors in jet arithmetic: r - D g^{-1} D^T G r
        let gmat: Vec<Vec<Jet>> = (0..n)
            .map(|i| (0..n).map(|j| metric_jets[i * n + j].clone()).collect())
            .collect();
        let proto = metric_jets[0].constant_like(0.0);
        let rhs: Vec<Vec<Jet>> = (0..p)
            .map(|a| {
                let gr = g * reference.column(a);
                (0..n)
                    .map(|i| {
                        let mut acc = proto.clone();
                        for k in 0..m {
                            if gr[k] != 0.0 {
                                acc = acc + d1j[i][k].scale(gr[k]);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let ys = if p > 0 { jet_solve(&gmat, &rhs)? } else { Vec::new() };
        let mut frame: Vec<Vec<Jet>> = Vec::with_capacity(p);
        let mut signs = Vec::with_capacity(p);
        for a in 0..p {
            let mut v: Vec<Jet> = (0..m)
                .map(|k| {
                    let mut acc = proto.clone() + reference[(k, a)];
                    for i in 0..n {
                        acc = acc - &d1j[i][k] * &ys[a][i];
                    }
                    acc
                })
                .collect();
            for b in 0..a {
                let c = jet_dot(&v, &frame[b], g).scale(signs[b]);
                for k in 0..m {
                    v[k] = &v[k] - &(&c * &frame[b][k]);
                }
            }
            let s = jet_dot(&v, &v, g);
            if s.value().abs() < 1e-12 {
                return Err(Error::FrameAlignmentFailure {
                    point: 0,
                    residual: f64::INFINITY,
                });
            }
            let sign = s.value().signum();
            let inv = s.scale(sign).sqrt().recip();
            for c in v.iter_mut() {
                *c = &*c * &inv;
            }
            frame.push(v);
            signs.push(sign);
        }
        let normal_frame = DMatrix::from_fn(m, p, |k, a| frame[a][k].value());
        let alignment_residual = (&normal_frame - &reference).norm() / reference.norm().max(1.0);

        let frame_derivs: Vec<DMatrix<f64>> = (0..n)
            .map(|i| DMatrix::from_fn(m, p, |k, a| frame[a][k].deriv(&[i])))
            .collect();
        let connection: Vec<DMatrix<f64>> = frame_derivs
            .iter()
            .map(|dxi| {
                let c = dxi.transpose() * g * &normal_frame;
                DMatrix::from_fn(p, p, |a, b| c[(a, b)] * signs[b])
            })
            .collect();

        let d2: Vec<DVector<f64>> = (0..n * n)
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                DVector::from_iterator(m, jets.iter().map(|c| c.deriv(&[i, j])))
            })
            .collect();
        let d3 = if order >= 3 {
            Some(
                (0..n * n * n)
                    .map(|ijk| {
                        let (i, j, k) = (ijk / (n * n), (ijk / n) % n, ijk % n);
                        DVector::from_iterator(m, jets.iter().map(|c| c.deriv(&[i, j, k])))
                    })
                    .collect(),
            )
        } else {
            None
        };
        let alpha_vals: Vec<DVector<f64>> = d2.iter().map(|v| &normal_projector * v).collect();
        let alpha = BilinearSample::new(n, n, ambient, alpha_vals, false)?;

        Ok(PointGeometry {
            x: x.to_vec(),
            ambient: ambient.clone(),
            position,
            d1,
            d2,
            d3,
            metric,
            metric_inv,
            metric_jets,
            normal_projector,
            normal_frame,
            normal_signs: signs,
            frame_derivs,
            connection,
            alpha,
            alignment_residual,
        })
    }

    pub fn n(&self) -> usize {
        self.d1.ncols()
    }

    pub fn codim(&self) -> usize {
        self.normal_frame.ncols()
    }

    pub fn normal_space(&self, tol: &Tolerance) -> Subspace {
        Subspace::span(&self.ambient, &self.normal_frame, tol)
    }

    pub fn tangent_space(&self, tol: &Tolerance) -> Subspace {
        Subspace::span(&self.ambient, &self.d1, tol)
    }

    /// `alpha(X, Y)` for coordinate vectors.
    pub fn alpha_at(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.alpha.apply(x, y)
    }

    /// Matrix `<alpha(d_i, d_j), xi>`.
    pub fn second_form(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let g = self.ambient.gram();
        DMatrix::from_fn(n, n, |i, j| (self.alpha.get(i, j).transpose() * g * xi)[(0, 0)])
    }

    /// Shape operator `A_xi = g^{-1} <alpha, xi>` in coordinates.
    pub fn shape_operator(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        &self.metric_inv * self.second_form(xi)
    }

    /// `nabla^perp_{d_i} xi` for a constant-coefficient combination of the frame.
    pub fn normal_derivative(&self, i: usize, coeffs: &DVector<f64>) -> DVector<f64> {
        let c = self.connection[i].transpose() * coeffs;
        &self.normal_frame * c
    }

    /// Coordinates of a tangent vector in the coordinate basis.
    pub fn tangent_coords(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.metric_inv * self.d1.transpose() * self.ambient.gram() * v
    }

    /// Christoffel symbols `gamma[k][(i, j)]` of the induced metric.
    pub fn christoffel(&self) -> Vec<DMatrix<f64>> {
        let n = self.n();
        let dg = |i: usize, j: usize, k: usize| self.metric_jets[i * n + j].deriv(&[k]);
        let mut out = vec![DMatrix::zeros(n, n); n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += self.metric_inv[(k, l)] * (dg(l, i, j) + dg(l, j, i) - dg(i, j, l));
                    }
                    out[k][(i, j)] = 0.5 * s;
                }
            }
        }
        out
    }

    /// Covariant Riemann tensor `R_{ijkl}` of the induced metric, with the
    /// convention that `R_{ijji}` is positive on round spheres.
    pub fn riemann(&self) -> Result<Vec<f64>> {
        let n = self.n();
        if self.metric_jets[0].order() < 2 {
            return Err(Error::InvalidInput("curvature needs jets of order >= 3".into()));
        }
        let ddg = |i: usize, j: usize, a: usize, b: usize| self.metric_jets[i * n + j].deriv(&[a, b]);
        let gam = self.christoffel();
        let mut r = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = 0.5
                            * (ddg(i, l, j, k) + ddg(j, k, i, l) - ddg(i, k, j, l) - ddg(j, l, i, k));
                        for a in 0..n {
                            for b in 0..n {
                                v += self.metric[(a, b)]
                                    * (gam[a][(j, k)] * gam[b][(i, l)] - gam[a][(j, l)] * gam[b][(i, k)]);
                            }
                        }
                        r[((i * n + j) * n + k) * n + l] = -v;
                    }
                }
            }
        }
        Ok(r)
    }

    /// Max deviation in the Gauss equation `R_{ijkl} = <a_il, a_jk> - <a_ik, a_jl>`.
    pub fn gauss_residual(&self) -> Result<f64> {
        let n = self.n();
        let r = self.riemann()?;
        let amb = &self.ambient;
        let a = |i: usize, j: usize| self.alpha.get(i, j);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let rhs = amb.dot(a(i, l), a(j, k)) - amb.dot(a(i, k), a(j, l));
                        worst = worst.max((r[((i * n + j) * n + k) * n + l] - rhs).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}
