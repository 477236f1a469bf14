//! Exact rational linear algebra used as a reference for the floating-point
//! subspace routines.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Q = BigRational;

pub fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn to_q(m: &[Vec<i64>]) -> Vec<Vec<Q>> {
    m.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect()
}

pub fn to_f64(m: &[Vec<i64>]) -> DMatrix<f64> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    DMatrix::from_fn(rows, cols, |i, j| m[i][j] as f64)
}

/// Rank by fraction-exact Gaussian elimination.
pub fn rank(mut a: Vec<Vec<Q>>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        for i in r + 1..rows {
            if a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] / &a[r][c];
            for j in c..cols {
                let d = &f * &a[r][j];
                a[i][j] -= d;
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

/// (positive, negative, zero) inertia of a symmetric matrix by congruence.
pub fn inertia(mut a: Vec<Vec<Q>>) -> (usize, usize, usize) {
    let n = a.len();
    let (mut pos, mut neg) = (0, 0);
    for k in 0..n {
        if a[k][k].is_zero() {
            if let Some(j) = (k + 1..n).find(|&j| !a[j][j].is_zero()) {
                a.swap(k, j);
                for row in a.iter_mut() {
                    row.swap(k, j);
                }
            } else if let Some(j) = (k + 1..n).find(|&j| !a[k][j].is_zero()) {
                // row/col k += row/col j makes the pivot 2 a[k][j] != 0
                for c in 0..n {
                    let v = a[j][c].clone();
                    a[k][c] += v;
                }
                for r in 0..n {
                    let v = a[r][j].clone();
                    a[r][k] += v;
                }
            } else {
                continue;
            }
        }
        let pivot = a[k][k].clone();
        if pivot.is_positive() {
            pos += 1;
        } else {
            neg += 1;
        }
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &pivot;
            for c in k..n {
                let d = &f * &a[k][c];
                a[i][c] -= d;
            }
            // keep symmetry: column operation mirrors the row operation
            for r in k..n {
                let d = &f * &a[r][k];
                a[r][i] -= d;
            }
        }
    }
    (pos, neg, n - pos - neg)
}

pub fn transpose(a: &[Vec<Q>]) -> Vec<Vec<Q>> {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn mul(a: &[Vec<Q>], b: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|r| {
            (0..cols)
                .map(|j| (0..inner).fold(Q::zero(), |acc, k| acc + &r[k] * &b[k][j]))
                .collect()
        })
        .collect()
}

/// Columns side by side.
pub fn hcat(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().chain(y).copied().collect()).collect()
}

/// Exact (pos, neg, null) of the span of the columns of `v` under `g`,
/// where `null` is the dimension of the radical of the restricted form.
pub fn span_signature(g: &[Vec<i64>], v: &[Vec<i64>]) -> (usize, usize, usize) {
    let vq = to_q(v);
    let gram = mul(&mul(&transpose(&vq), &to_q(g)), &vq);
    let (pos, neg, _) = inertia(gram);
    let r = rank(vq);
    (pos, neg, r - pos - neg)
}

/// A random instance: a nondegenerate integer scalar product and two
/// families of integer columns with planted dependencies and null vectors.
#[derive(Debug, Clone)]
pub struct Instance {
    pub gram: Vec<Vec<i64>>,
    pub u: Vec<Vec<i64>>,
    pub v: Vec<Vec<i64>>,
}

fn random_gram(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<i64>> {
    let mut g = vec![vec![0; m]; m];
    if m >= 2 && rng.gen_bool(0.3) {
        // light-cone style: a hyperbolic pair plus a Euclidean block
        g[0][1] = 1;
        g[1][0] = 1;
        for i in 2..m {
            g[i][i] = 1;
        }
    } else {
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = if rng.gen_bool(0.35) { -1 } else { 1 };
        }
    }
    g
}

fn random_columns(rng: &mut ChaCha8Rng, g: &[Vec<i64>], k: usize) -> Vec<Vec<i64>> {
    let m = g.len();
    let mut cols: Vec<Vec<i64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let roll = rng.gen_range(0..10);
        let col: Vec<i64> = if roll < 3 && cols.len() >= 2 {
            // dependent column
            let a = rng.gen_range(-2..=2);
            let b = rng.gen_range(-2..=2);
            let i = rng.gen_range(0..cols.len());
            let j = rng.gen_range(0..cols.len());
            (0..m).map(|r| a * cols[i][r] + b * cols[j][r]).collect()
        } else if roll < 5 {
            null_vector(rng, g).unwrap_or_else(|| (0..m).map(|_| rng.gen_range(-3..=3)).collect())
        } else if roll < 6 {
            let mut e = vec![0; m];
            e[rng.gen_range(0..m)] = rng.gen_range(1..=3);
            e
        } else {
            (0..m).map(|_| rng.gen_range(-3..=3)).collect()
        };
        cols.push(col);
    }
    // column-major -> m x k
    (0..m).map(|r| cols.iter().map(|c| c[r]).collect()).collect()
}

/// An integer null vector of `g`, when the form is indefinite.
fn null_vector(rng: &mut ChaCha8Rng, g: &[Vec<i64>]) -> Option<Vec<i64>> {
    let m = g.len();
    if m >= 2 && g[0][1] == 1 {
        // in the hyperbolic pair: coordinates 0 or 1 alone, or (a, b, x) with 2ab + |x|^2 = 0
        let mut v = vec![0; m];
        v[rng.gen_range(0..2)] = rng.gen_range(1..=2);
        return Some(v);
    }
    let pos: Vec<usize> = (0..m).filter(|&i| g[i][i] > 0).collect();
    let neg: Vec<usize> = (0..m).filter(|&i| g[i][i] < 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut v = vec![0; m];
    let s = rng.gen_range(1..=2);
    v[pos[rng.gen_range(0..pos.len())]] = s;
    v[neg[rng.gen_range(0..neg.len())]] = if rng.gen_bool(0.5) { s } else { -s };
    Some(v)
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let m = rng.gen_range(1..=12);
    let gram = random_gram(rng, m);
    let ku = rng.gen_range(0..=m.min(8));
    let kv = rng.gen_range(0..=m.min(8));
    let u = random_columns(rng, &gram, ku);
    let v = random_columns(rng, &gram, kv);
    Instance { gram, u, v }
}
