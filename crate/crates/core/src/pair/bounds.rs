use serde::Serialize;

use crate::error::{Error, Result};

/// Which dimension estimate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    /// Nondegenerate isometric pair in `R_a^{n+p}`, `R_b^{n+q}`: `d + r >= n - p - q + 3 ell`.
    Isometric,
    /// Degenerate pair `{f', f_hat}` into light cones: `s = d + r >= n - p - q + 3 ell - 4`, `2 <= r <= ell`.
    DegenerateLift,
    /// Conformal pair in Euclidean spaces: `d >= n - p - q + 3 ell`.
    Conformal,
}

/// Ranks and dimensions fed to a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundInput {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Ambient indices (zero for Euclidean targets).
    pub a: usize,
    pub b: usize,
    pub d: usize,
    /// Extra dimensions of the ruled extension.
    pub r: usize,
    pub ell: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub kind: BoundKind,
    pub lhs: i64,
    pub rhs: i64,
    pub slack: i64,
    /// `2 <= r <= ell` for the degenerate lift; `None` elsewhere.
    pub r_in_range: Option<bool>,
    pub holds: bool,
}

pub fn check_dimension_bound(kind: BoundKind, x: &BoundInput) -> Result<BoundVerdict> {
    let (n, p, q) = (x.n as i64, x.p as i64, x.q as i64);
    let ell = x.ell as i64;
    let base = n - p - q + 3 * ell;
    let out_of_range = |msg: String| Err(Error::HypothesisOutOfRange(msg));
    let (lhs, rhs, r_in_range) = match kind {
        BoundKind::Isometric => {
            if p + q > n - 1 {
                return out_of_range(format!("p + q = {} exceeds n - 1 = {}", p + q, n - 1));
            }
            let (a, b) = (x.a as i64, x.b as i64);
            let m = (p + b - a).min(q + a - b);
            if m > 6 {
                return out_of_range(format!("min{{p+b-a, q+a-b}} = {m} exceeds 6"));
            }
            let rhs = if m == 6 && ell == 0 { base - 1 } else { base };
            ((x.d + x.r) as i64, rhs, None)
        }
        BoundKind::DegenerateLift => {
            if p + q > n - 1 || p.min(q) > 5 {
                return out_of_range(format!("(p, q) = ({p}, {q}) violates p + q <= n - 1, min <= 5"));
            }
            ((x.d + x.r) as i64, base - 4, Some(2 <= x.r && x.r <= x.ell))
        }
        BoundKind::Conformal => {
            if p + q > n - 3 || p.min(q) > 5 {
                return out_of_range(format!("(p, q) = ({p}, {q}) violates p + q <= n - 3, min <= 5"));
            }
            (x.d as i64, base, None)
        }
    };
    let slack = lhs - rhs;
    Ok(BoundVerdict {
        kind,
        lhs,
        rhs,
        slack,
        r_in_range,
        holds: slack >= 0 && r_in_range.unwrap_or(true),
    })
}
