//! Derivatives of subbundle sections by finite differences of projectors.
//!
//! A vector `v` of a subbundle `E(x)` extends to the local section
//! `y -> P_E(y) v`, where `P_E` is the Euclidean projector. Every derivative
//! condition used by the construction is tensorial over such extensions, so
//! `d/dx_i (P_E(y) v) = (d_i P_E) v` is all that is needed.

use nalgebra::DMatrix;

use crate::error::Result;

const FIRST: [(f64, f64); 4] = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];

/// Nesting depth of a derivative: level 1 differentiates pointwise data,
/// level 2 differentiates data that already contains level-1 derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilLevel {
    One,
    Two,
    Three,
}

impl StencilLevel {
    /// Default steps balance truncation against the noise of the inner level.
    pub fn default_step(self) -> f64 {
        match self {
            StencilLevel::One => 1e-3,
            StencilLevel::Two => 1e-2,
            StencilLevel::Three => 3e-2,
        }
    }
}

/// Five-point central first derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub h: f64,
}

impl Stencil {
    pub fn new(h: f64) -> Stencil {
        Stencil { h }
    }

    pub fn points(&self, x: &[f64], axis: usize) -> Vec<(Vec<f64>, f64)> {
        FIRST
            .iter()
            .map(|&(s, w)| {
                let mut y = x.to_vec();
                y[axis] += s * self.h;
                (y, w / self.h)
            })
            .collect()
    }

    /// `d/dx_axis` of a matrix-valued function.
    pub fn derivative(
        &self,
        x: &[f64],
        axis: usize,
        eval: &mut dyn FnMut(&[f64]) -> Result<DMatrix<f64>>,
    ) -> Result<DMatrix<f64>> {
        let mut acc: Option<DMatrix<f64>> = None;
        for (y, w) in self.points(x, axis) {
            let v = eval(&y)? * w;
            acc = Some(match acc {
                Some(a) => a + v,
                None => v,
            });
        }
        Ok(acc.expect("stencil has points"))
    }

    /// All partials of several matrix-valued quantities from one set of evaluations.
    pub fn gradients(
        &self,
        x: &[f64],
        eval: &mut dyn FnMut(&[f64]) -> Result<Vec<DMatrix<f64>>>,
    ) -> Result<Vec<Vec<DMatrix<f64>>>> {
        let n = x.len();
        let mut out: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(n);
        for axis in 0..n {
            let mut acc: Option<Vec<DMatrix<f64>>> = None;
            for (y, w) in self.points(x, axis) {
                let vals = eval(&y)?;
                acc = Some(match acc {
                    Some(a) => a.into_iter().zip(vals).map(|(a, v)| a + v * w).collect(),
                    None => vals.into_iter().map(|v| v * w).collect(),
                });
            }
            out.push(acc.expect("stencil has points"));
        }
        Ok(out)
    }
}
