//! A small closed-form expression language evaluated on jets.
//!
//! Grammar: `+ - * /`, `^` (right associative), unary minus, parentheses,
//! numbers, `pi`, variables `x1..xn`, and the functions `sin`, `cos`, `exp`,
//! `sqrt` and `norm(a, b, ...)` (Euclidean length of the arguments).

use crate::chart::ChartMap;
use crate::error::{Error, Result};
use crate::linalg::ScalarProduct;
use crate::taylor::Jet;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Norm,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number '{text}' at {start}")))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected '{c}' at {i}")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    nvars: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(usize::MAX)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Expression(format!("expected '{c}' at {}", self.offset())))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.offset();
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(k) = rest.parse::<usize>() {
                        if k == 0 || k > self.nvars {
                            return Err(Error::Expression(format!(
                                "variable {name} out of range 1..{} at {at}",
                                self.nvars
                            )));
                        }
                        return Ok(Expr::Var(k - 1));
                    }
                }
                let func = match name.as_str() {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    "norm" => Func::Norm,
                    _ => return Err(Error::Expression(format!("unknown name '{name}' at {at}"))),
                };
                self.expect('(')?;
                let mut args = vec![self.expr()?];
                while self.eat(',') {
                    args.push(self.expr()?);
                }
                self.expect(')')?;
                if func != Func::Norm && args.len() != 1 {
                    return Err(Error::Expression(format!("{name} takes one argument")));
                }
                Ok(Expr::Call(func, args))
            }
            Tok::Op(c) => Err(Error::Expression(format!("unexpected '{c}' at {at}"))),
        }
    }
}

impl Expr {
    pub fn parse(src: &str, nvars: usize) -> Result<Expr> {
        let mut p = Parser {
            toks: lex(src)?,
            pos: 0,
            nvars,
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expression(format!("trailing input at {}", p.offset())));
        }
        Ok(e)
    }

    pub fn eval(&self, vars: &[Jet]) -> Result<Jet> {
        let proto = &vars[0];
        Ok(match self {
            Expr::Num(v) => proto.constant_like(*v),
            Expr::Var(i) => vars[*i].clone(),
            Expr::Neg(a) => -a.eval(vars)?,
            Expr::Add(a, b) => a.eval(vars)? + b.eval(vars)?,
            Expr::Sub(a, b) => a.eval(vars)? - b.eval(vars)?,
            Expr::Mul(a, b) => a.eval(vars)? * b.eval(vars)?,
            Expr::Div(a, b) => {
                let d = b.eval(vars)?;
                if d.value() == 0.0 {
                    return Err(Error::Expression("division by zero".into()));
                }
                a.eval(vars)? / d
            }
            Expr::Pow(a, b) => {
                let base = a.eval(vars)?;
                match b.as_ref() {
                    Expr::Num(k) if k.fract() == 0.0 && k.abs() <= 64.0 => {
                        if *k < 0.0 && base.value() == 0.0 {
                            return Err(Error::Expression("zero to a negative power".into()));
                        }
                        base.powi(*k as i32)
                    }
                    Expr::Neg(inner) if matches!(inner.as_ref(), Expr::Num(k) if k.fract() == 0.0) => {
                        let Expr::Num(k) = inner.as_ref() else { unreachable!() };
                        if base.value() == 0.0 {
                            return Err(Error::Expression("zero to a negative power".into()));
                        }
                        base.powi(-(*k as i32))
                    }
                    _ => {
                        let e = b.eval(vars)?;
                        if base.value() <= 0.0 {
                            return Err(Error::Expression("non-integer power of a non-positive base".into()));
                        }
                        (base.ln() * e).exp()
                    }
                }
            }
            Expr::Call(f, args) => {
                let vals = args.iter().map(|a| a.eval(vars)).collect::<Result<Vec<_>>>()?;
                match f {
                    Func::Sin => vals[0].sin(),
                    Func::Cos => vals[0].cos(),
                    Func::Exp => vals[0].exp(),
                    Func::Sqrt => {
                        if vals[0].value() <= 0.0 {
                            return Err(Error::Expression("sqrt of a non-positive value".into()));
                        }
                        vals[0].sqrt()
                    }
                    Func::Norm => {
                        let mut s = proto.constant_like(0.0);
                        for v in &vals {
                            s = s + v * v;
                        }
                        if s.value() <= 0.0 {
                            return Err(Error::Expression("norm of a zero vector is not smooth".into()));
                        }
                        s.sqrt()
                    }
                }
            }
        })
    }
}

/// A chart map given by one expression per ambient coordinate.
#[derive(Debug, Clone)]
pub struct ExprMap {
    pub label: String,
    pub nvars: usize,
    pub components: Vec<Expr>,
    pub ambient: ScalarProduct,
}

impl ExprMap {
    pub fn new(label: &str, nvars: usize, sources: &[String], ambient: ScalarProduct) -> Result<ExprMap> {
        if sources.len() != ambient.dim() {
            return Err(Error::Expression(format!(
                "{} components for an ambient of dimension {}",
                sources.len(),
                ambient.dim()
            )));
        }
        if nvars == 0 {
            return Err(Error::Expression("expression maps need at least one variable".into()));
        }
        let components = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Expr::parse(s, nvars).map_err(|e| Error::Expression(format!("component {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExprMap {
            label: label.to_string(),
            nvars,
            components,
            ambient,
        })
    }
}

impl ChartMap for ExprMap {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn domain_dim(&self) -> usize {
        self.nvars
    }
    fn ambient(&self) -> ScalarProduct {
        self.ambient.clone()
    }
    fn apply(&self, args: &[Jet]) -> Result<Vec<Jet>> {
        if args.len() != self.nvars {
            return Err(Error::InvalidInput(format!(
                "{} expects {} arguments",
                self.label, self.nvars
            )));
        }
        self.components.iter().map(|c| c.eval(args)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn val(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src, x.len())
            .unwrap()
            .eval(&Jet::seed(x, 0))
            .unwrap()
            .value()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(val("1 + 2 * 3", &[0.0]), 7.0);
        assert!((val("2 ^ 3 ^ 2", &[0.0]) - 512.0).abs() < 1e-12);
        assert_eq!(val("-x1^2", &[3.0]), -9.0);
        assert_eq!(val("(1 - x1) / 2", &[5.0]), -2.0);
        assert!((val("norm(x1, x2)", &[3.0, 4.0]) - 5.0).abs() < 1e-15);
        assert!((val("1.5e-1 * 2", &[0.0]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn derivatives_flow_through() {
        let e = Expr::parse("sin(x1) * exp(x2)", 2).unwrap();
        let j = e.eval(&Jet::seed(&[0.4, 0.2], 2)).unwrap();
        assert!((j.deriv(&[0, 1]) - 0.4f64.cos() * 0.2f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(Expr::parse("x3", 2), Err(Error::Expression(_))));
        assert!(matches!(Expr::parse("1 +", 1), Err(Error::Expression(_))));
        assert!(matches!(Expr::parse("foo(x1)", 1), Err(Error::Expression(_))));
        assert!(matches!(Expr::parse("(x1", 1), Err(Error::Expression(_))));
    }
}
