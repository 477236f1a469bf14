//! Truncated multivariate Taylor polynomials ("jets") for forward-mode
//! differentiation to arbitrary order.
//!
//! A [`Jet`] in `n` variables truncated at order `K` stores the Taylor
//! coefficients `c_a = (d^a f)(x0) / a!` for every multi-index `a` with
//! `|a| <= K`. Arithmetic is exact polynomial arithmetic modulo terms of
//! degree `> K`, so derivatives obtained from a jet are exact up to
//! floating-point rounding.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

/// Monomial bookkeeping shared by all jets with the same `(nvars, order)`.
#[derive(Debug)]
pub struct Layout {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    mul: Vec<(u32, u32, u32)>,
    degree: Vec<usize>,
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        for deg in 0..=order {
            let mut cur = vec![0u8; nvars];
            gen_degree(nvars, deg, 0, &mut cur, &mut exps);
        }
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let degree: Vec<usize> = exps
            .iter()
            .map(|e| e.iter().map(|&v| v as usize).sum())
            .collect();
        let mut mul = Vec::new();
        let mut buf = vec![0u8; nvars];
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                for k in 0..nvars {
                    buf[k] = a[k] + b[k];
                }
                let k = index[&buf];
                mul.push((i as u32, j as u32, k as u32));
            }
        }
        Layout {
            nvars,
            order,
            exps,
            index,
            mul,
            degree,
        }
    }

    /// Shared layout for `nvars` variables truncated at `order`.
    pub fn get(nvars: usize, order: usize) -> &'static Layout {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static Layout>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Box::leak(Box::new(Layout::build(nvars, order))))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u8>] {
        &self.exps
    }

    pub fn index_of(&self, exp: &[u8]) -> Option<usize> {
        self.index.get(exp).copied()
    }
}

// Graded enumeration of exponents of total degree `deg`, first variable highest.
fn gen_degree(nvars: usize, deg: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if nvars == 0 {
        if deg == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == nvars - 1 {
        cur[pos] = deg as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for k in (0..=deg).rev() {
        cur[pos] = k as u8;
        gen_degree(nvars, deg - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, v| acc * v as f64)
}

/// Truncated Taylor polynomial around an implicit expansion point.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("value", &self.value())
            .finish()
    }
}

impl Jet {
    pub fn constant(layout: &'static Layout, value: f64) -> Jet {
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    pub fn zero(layout: &'static Layout) -> Jet {
        Jet::constant(layout, 0.0)
    }

    /// The coordinate function `x_i` expanded at a point where it equals `value`.
    pub fn variable(layout: &'static Layout, i: usize, value: f64) -> Jet {
        let mut j = Jet::constant(layout, value);
        if layout.order >= 1 {
            let mut e = vec![0u8; layout.nvars];
            e[i] = 1;
            j.coeffs[layout.index[&e]] = 1.0;
        }
        j
    }

    /// Seeded coordinate jets for expansion at `x`.
    pub fn seed(x: &[f64], order: usize) -> Vec<Jet> {
        let layout = Layout::get(x.len(), order);
        x.iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(layout, i, v))
            .collect()
    }

    pub fn from_coeffs(layout: &'static Layout, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), layout.len(), "coefficient count mismatch");
        Jet { layout, coeffs }
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn constant_like(&self, value: f64) -> Jet {
        Jet::constant(self.layout, value)
    }

    /// Mixed partial derivative `d^a f` for the multi-index `a`.
    pub fn partial(&self, exp: &[u8]) -> f64 {
        match self.layout.index.get(exp) {
            Some(&k) => {
                let scale: f64 = exp.iter().map(|&v| factorial(v as usize)).product();
                self.coeffs[k] * scale
            }
            None => 0.0,
        }
    }

    /// Partial derivative along the listed variables (repeats allowed).
    pub fn deriv(&self, vars: &[usize]) -> f64 {
        let mut e = vec![0u8; self.layout.nvars];
        for &v in vars {
            e[v] += 1;
        }
        self.partial(&e)
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars()).map(|i| self.deriv(&[i])).collect()
    }

    /// The jet of `d f / d x_i`, one order lower.
    pub fn derivative(&self, i: usize) -> Jet {
        assert!(self.layout.order >= 1, "cannot differentiate an order-0 jet");
        let lower = Layout::get(self.layout.nvars, self.layout.order - 1);
        let mut out = vec![0.0; lower.len()];
        let mut buf = vec![0u8; self.layout.nvars];
        for (k, e) in lower.exps.iter().enumerate() {
            buf.copy_from_slice(e);
            buf[i] += 1;
            let src = self.layout.index[&buf];
            out[k] = self.coeffs[src] * buf[i] as f64;
        }
        Jet {
            layout: lower,
            coeffs: out,
        }
    }

    /// Drop all terms above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.layout.order);
        let lower = Layout::get(self.layout.nvars, order);
        let coeffs = lower
            .exps
            .iter()
            .map(|e| self.coeffs[self.layout.index[e]])
            .collect();
        Jet {
            layout: lower,
            coeffs,
        }
    }

    fn same_layout(&self, other: &Jet) {
        assert!(
            std::ptr::eq(self.layout, other.layout),
            "jet layout mismatch: ({}, {}) vs ({}, {})",
            self.layout.nvars,
            self.layout.order,
            other.layout.nvars,
            other.layout.order
        );
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        self.same_layout(other);
        let mut out = vec![0.0; self.layout.len()];
        for &(i, j, k) in &self.layout.mul {
            out[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            layout: self.layout,
            coeffs: out,
        }
    }

    /// `sum_k derivs[k] / k! * h^k` where `h = self - value`.
    fn compose_series(&self, derivs: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = Jet::constant(self.layout, derivs[0]);
        let mut pow = Jet::constant(self.layout, 1.0);
        for (k, d) in derivs.iter().enumerate().skip(1) {
            pow = pow.mul_ref(&h);
            let c = d / factorial(k);
            if c != 0.0 {
                for (o, p) in out.coeffs.iter_mut().zip(&pow.coeffs) {
                    *o += c * p;
                }
            }
        }
        out
    }

    fn order_range(&self) -> usize {
        self.layout.order
    }

    pub fn powf(&self, r: f64) -> Jet {
        let a = self.value();
        let k = self.order_range();
        let mut d = Vec::with_capacity(k + 1);
        let mut coef = 1.0;
        for i in 0..=k {
            d.push(coef * a.powf(r - i as f64));
            coef *= r - i as f64;
        }
        self.compose_series(&d)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n == 0 {
            return self.constant_like(1.0);
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut out = self.clone();
        for _ in 1..n {
            out = out.mul_ref(self);
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let k = self.order_range();
        let mut d = Vec::with_capacity(k + 1);
        let mut coef = 1.0;
        for i in 0..=k {
            d.push(coef / a.powi(i as i32 + 1));
            coef *= -(i as f64 + 1.0);
        }
        self.compose_series(&d)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose_series(&vec![e; self.order_range() + 1])
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let k = self.order_range();
        let mut d = vec![a.ln()];
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * factorial(i - 1) / a.powi(i as i32));
        }
        self.compose_series(&d)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cyc = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.order_range()).map(|i| cyc[i % 4]).collect();
        self.compose_series(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cyc = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.order_range()).map(|i| cyc[i % 4]).collect();
        self.compose_series(&d)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            layout: self.layout,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Substitute jets (in some other variable set) for this polynomial's
    /// variables: returns `sum_a c_a * prod_i (args_i - args_i(0))^{a_i}`.
    pub fn substitute(&self, args: &[Jet]) -> Jet {
        assert_eq!(args.len(), self.nvars(), "substitution arity mismatch");
        let target = args
            .first()
            .map(|a| a.layout)
            .unwrap_or_else(|| Layout::get(0, 0));
        let k = self.layout.order.min(target.order);
        let deltas: Vec<Jet> = args
            .iter()
            .map(|a| {
                let mut d = a.clone();
                d.coeffs[0] = 0.0;
                d
            })
            .collect();
        // powers[i][p] = deltas[i]^p
        let powers: Vec<Vec<Jet>> = deltas
            .iter()
            .map(|d| {
                let mut v = vec![Jet::constant(target, 1.0)];
                for p in 1..=k {
                    let next = v[p - 1].mul_ref(d);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Jet::zero(target);
        for (idx, e) in self.layout.exps.iter().enumerate() {
            let c = self.coeffs[idx];
            if c == 0.0 || self.layout.degree[idx] > k {
                continue;
            }
            let mut term: Option<Jet> = None;
            for (i, &p) in e.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                term = Some(match term {
                    None => powers[i][p as usize].clone(),
                    Some(t) => t.mul_ref(&powers[i][p as usize]),
                });
            }
            match term {
                None => out.coeffs[0] += c,
                Some(t) => {
                    for (o, v) in out.coeffs.iter_mut().zip(&t.coeffs) {
                        *o += c * v;
                    }
                }
            }
        }
        out
    }

    /// Build an order-`derivs.len()-1`-compatible jet from explicit partial
    /// derivatives: `value`, gradient, Hessian (n x n, row-major) and third
    /// derivatives (n^3, row-major). Missing orders are left at zero.
    pub fn from_derivatives(
        nvars: usize,
        order: usize,
        value: f64,
        grad: Option<&[f64]>,
        hess: Option<&[f64]>,
        third: Option<&[f64]>,
    ) -> Jet {
        let layout = Layout::get(nvars, order);
        let mut coeffs = vec![0.0; layout.len()];
        for (k, e) in layout.exps.iter().enumerate() {
            let mut idx: Vec<usize> = Vec::new();
            for (v, &p) in e.iter().enumerate() {
                for _ in 0..p {
                    idx.push(v);
                }
            }
            let denom: f64 = e.iter().map(|&p| factorial(p as usize)).product();
            let d = match idx.len() {
                0 => Some(value),
                1 => grad.map(|g| g[idx[0]]),
                2 => hess.map(|h| h[idx[0] * nvars + idx[1]]),
                3 => third.map(|t| t[(idx[0] * nvars + idx[1]) * nvars + idx[2]]),
                _ => None,
            };
            coeffs[k] = d.unwrap_or(0.0) / denom;
        }
        Jet { layout, coeffs }
    }
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
        impl $trait<f64> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                self.$method(&self.constant_like(rhs))
            }
        }
        impl $trait<f64> for Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<&Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                rhs.constant_like(self).$method(rhs)
            }
        }
        impl $trait<Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| {
    a.same_layout(b);
    Jet {
        layout: a.layout,
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
    }
});
jet_binop!(Sub, sub, |a, b| {
    a.same_layout(b);
    Jet {
        layout: a.layout,
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
    }
});
jet_binop!(Mul, mul, |a, b| a.mul_ref(b));
jet_binop!(Div, div, |a, b| a.mul_ref(&b.recip()));

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Inner product `sum_ij a_i gram_ij b_j` of jet-valued vectors.
pub fn jet_dot(a: &[Jet], b: &[Jet], gram: &nalgebra::DMatrix<f64>) -> Jet {
    let layout = a[0].layout();
    let mut acc = Jet::zero(layout);
    for i in 0..a.len() {
        for j in 0..b.len() {
            let g = gram[(i, j)];
            if g != 0.0 {
                acc = acc + (&a[i] * &b[j]).scale(g);
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts_monomials() {
        // C(n + K, K)
        assert_eq!(Layout::get(3, 3).len(), 20);
        assert_eq!(Layout::get(8, 3).len(), 165);
        assert_eq!(Layout::get(2, 0).len(), 1);
    }

    #[test]
    fn product_rule_to_third_order() {
        let v = Jet::seed(&[0.3, -0.7], 3);
        let f = &v[0] * &v[0] * &v[1];
        assert!((f.value() - 0.3 * 0.3 * -0.7).abs() < 1e-15);
        assert!((f.deriv(&[0]) - 2.0 * 0.3 * -0.7).abs() < 1e-15);
        assert!((f.deriv(&[0, 0, 1]) - 2.0).abs() < 1e-15);
        assert!((f.deriv(&[0, 1]) - 0.6).abs() < 1e-15);
        assert_eq!(f.deriv(&[1, 1]), 0.0);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = &Jet::seed(&[0.4], 4)[0];
        let s = x.sin();
        assert!((s.deriv(&[0, 0, 0]) + 0.4f64.cos()).abs() < 1e-14);
        let e = x.exp();
        assert!((e.deriv(&[0, 0, 0, 0]) - 0.4f64.exp()).abs() < 1e-13);
        let l = x.ln();
        assert!((l.deriv(&[0, 0, 0]) - 2.0 / 0.4f64.powi(3)).abs() < 1e-10);
        let r = x.recip();
        assert!((r.deriv(&[0, 0]) - 2.0 / 0.4f64.powi(3)).abs() < 1e-10);
        let q = x.sqrt();
        assert!((q.deriv(&[0]) - 0.5 / 0.4f64.sqrt()).abs() < 1e-14);
        let d = (x * x) / (x + 1.0);
        // (x^2/(x+1))' = (x^2+2x)/(x+1)^2
        let expect = (0.16 + 0.8) / 1.96;
        assert!((d.deriv(&[0]) - expect).abs() < 1e-14);
    }

    #[test]
    fn derivative_and_truncate_commute_with_partials() {
        let v = Jet::seed(&[0.2, 0.5, -0.1], 3);
        let f = (&v[0] * &v[1]).sin() + &v[2] * &v[2] * &v[0];
        let dfdx1 = f.derivative(1);
        assert_eq!(dfdx1.order(), 2);
        assert!((dfdx1.deriv(&[0, 0]) - f.deriv(&[1, 0, 0])).abs() < 1e-13);
        let t = f.truncate(1);
        assert!((t.deriv(&[2]) - f.deriv(&[2])).abs() < 1e-15);
    }

    #[test]
    fn substitution_is_composition() {
        // f(u, v) = u^2 v expanded at (1, 2); substitute u = 1 + s, v = 2 + s^2.
        let uv = Jet::seed(&[1.0, 2.0], 3);
        let f = &uv[0] * &uv[0] * &uv[1];
        let s = &Jet::seed(&[0.0], 3)[0];
        let u = s + 1.0;
        let v = s * s + 2.0;
        let g = f.substitute(&[u.clone(), v.clone()]);
        let direct = &u * &u * &v;
        for (a, b) in g.coeffs().iter().zip(direct.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn from_derivatives_round_trips() {
        let v = Jet::seed(&[0.3, 0.2], 3);
        let f = (&v[0] * &v[1]).exp();
        let n = 2;
        let grad = f.gradient();
        let mut hess = vec![0.0; 4];
        let mut third = vec![0.0; 8];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = f.deriv(&[i, j]);
                for k in 0..n {
                    third[(i * n + j) * n + k] = f.deriv(&[i, j, k]);
                }
            }
        }
        let g = Jet::from_derivatives(n, 3, f.value(), Some(&grad), Some(&hess), Some(&third));
        for (a, b) in g.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
