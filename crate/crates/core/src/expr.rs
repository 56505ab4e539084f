//! Closed-form scalar functions with analytic differentials: polynomials in
//! the coordinates combined with `sin`, `cos`, `atan`, `exp`. This is the
//! function space the simulation commands accept, chosen so that `df` is
//! always available in closed form.

use crate::error::{CoreError, Result};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Atan(Box<Expr>),
    Exp(Box<Expr>),
}

/// Value together with its gradient; forward-mode evaluation.
#[derive(Clone, Debug)]
struct DualVec {
    v: f64,
    g: Vec<f64>,
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Neg(a) => -a.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k as i32),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Atan(a) => a.eval(x).atan(),
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }

    fn eval_dual(&self, x: &[f64]) -> DualVec {
        let n = x.len();
        match self {
            Expr::Const(c) => DualVec { v: *c, g: vec![0.0; n] },
            Expr::Var(i) => {
                let mut g = vec![0.0; n];
                g[*i] = 1.0;
                DualVec { v: x[*i], g }
            }
            Expr::Add(a, b) => {
                let (da, db) = (a.eval_dual(x), b.eval_dual(x));
                DualVec {
                    v: da.v + db.v,
                    g: da.g.iter().zip(&db.g).map(|(p, q)| p + q).collect(),
                }
            }
            Expr::Sub(a, b) => {
                let (da, db) = (a.eval_dual(x), b.eval_dual(x));
                DualVec {
                    v: da.v - db.v,
                    g: da.g.iter().zip(&db.g).map(|(p, q)| p - q).collect(),
                }
            }
            Expr::Mul(a, b) => {
                let (da, db) = (a.eval_dual(x), b.eval_dual(x));
                DualVec {
                    v: da.v * db.v,
                    g: da.g.iter().zip(&db.g).map(|(p, q)| p * db.v + da.v * q).collect(),
                }
            }
            Expr::Div(a, b) => {
                let (da, db) = (a.eval_dual(x), b.eval_dual(x));
                let inv = 1.0 / db.v;
                DualVec {
                    v: da.v * inv,
                    g: da.g
                        .iter()
                        .zip(&db.g)
                        .map(|(p, q)| (p * db.v - da.v * q) * inv * inv)
                        .collect(),
                }
            }
            Expr::Neg(a) => {
                let da = a.eval_dual(x);
                DualVec { v: -da.v, g: da.g.iter().map(|p| -p).collect() }
            }
            Expr::Pow(a, k) => {
                let da = a.eval_dual(x);
                let k = *k;
                let v = da.v.powi(k as i32);
                let dv = if k == 0 { 0.0 } else { k as f64 * da.v.powi(k as i32 - 1) };
                DualVec { v, g: da.g.iter().map(|p| p * dv).collect() }
            }
            Expr::Sin(a) => {
                let da = a.eval_dual(x);
                let c = da.v.cos();
                DualVec { v: da.v.sin(), g: da.g.iter().map(|p| p * c).collect() }
            }
            Expr::Cos(a) => {
                let da = a.eval_dual(x);
                let s = -da.v.sin();
                DualVec { v: da.v.cos(), g: da.g.iter().map(|p| p * s).collect() }
            }
            Expr::Atan(a) => {
                let da = a.eval_dual(x);
                let d = 1.0 / (1.0 + da.v * da.v);
                DualVec { v: da.v.atan(), g: da.g.iter().map(|p| p * d).collect() }
            }
            Expr::Exp(a) => {
                let da = a.eval_dual(x);
                let e = da.v.exp();
                DualVec { v: e, g: da.g.iter().map(|p| p * e).collect() }
            }
        }
    }
}

/// A scalar function on group coordinates with closed-form differential.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub dim: usize,
    pub source: String,
    expr: Expr,
}

impl TestFunction {
    pub fn new(dim: usize, expr: Expr, source: String) -> Self {
        TestFunction { dim, source, expr }
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        let expr = Parser::new(src, dim).parse()?;
        Ok(TestFunction { dim, source: src.to_string(), expr })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.expr.eval(x)
    }

    /// Value and coordinate gradient at `x`.
    pub fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.expr.eval_dual(x);
        (d.v, d.g)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        TestFunction { dim, source: format!("{c}"), expr: Expr::Const(c) }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)
    }
}

/// The shipped suite of bounded smooth test functions on a 3-coordinate
/// group, with bounded differentials.
pub fn bounded_suite_dim3() -> Vec<TestFunction> {
    ["sin(x)", "atan(z)", "cos(x)*sin(y)", "atan(x+z)", "sin(y)*atan(z)"]
        .iter()
        .map(|s| TestFunction::parse(s, 3).expect("builtin suite"))
        .collect()
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, dim: usize) -> Self {
        Parser { src, bytes: src.as_bytes(), pos: 0, dim }
    }

    fn error(&self, msg: impl Into<String>) -> CoreError {
        CoreError::InvalidArgument(format!(
            "expression error at byte {} of '{}': {}",
            self.pos,
            self.src,
            msg.into()
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Expr> {
        let e = self.parse_sum()?;
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return Err(self.error("trailing input"));
        }
        Ok(e)
    }

    fn parse_sum(&mut self) -> Result<Expr> {
        let mut acc = self.parse_product()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = Expr::Add(Box::new(acc), Box::new(self.parse_product()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = Expr::Sub(Box::new(acc), Box::new(self.parse_product()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_product(&mut self) -> Result<Expr> {
        let mut acc = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = Expr::Mul(Box::new(acc), Box::new(self.parse_unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc = Expr::Div(Box::new(acc), Box::new(self.parse_unary()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.parse_unary()?)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("expected integer exponent"));
            }
            let k: u32 = self.src[start..self.pos]
                .parse()
                .map_err(|_| self.error("bad exponent"))?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_digit()
                        || self.bytes[self.pos] == b'.'
                        || self.bytes[self.pos] == b'e'
                        || (self.pos > start
                            && (self.bytes[self.pos] == b'+' || self.bytes[self.pos] == b'-')
                            && self.bytes[self.pos - 1] == b'e'))
                {
                    self.pos += 1;
                }
                let v: f64 = self.src[start..self.pos]
                    .parse()
                    .map_err(|_| self.error("bad number"))?;
                Ok(Expr::Const(v))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let arg = self.parse_sum()?;
                    if self.peek() != Some(b')') {
                        return Err(self.error("expected ')'"));
                    }
                    self.pos += 1;
                    let arg = Box::new(arg);
                    return match name {
                        "sin" => Ok(Expr::Sin(arg)),
                        "cos" => Ok(Expr::Cos(arg)),
                        "atan" => Ok(Expr::Atan(arg)),
                        "exp" => Ok(Expr::Exp(arg)),
                        other => Err(self.error(format!("unknown function '{other}'"))),
                    };
                }
                let idx = match name {
                    "x" => 0,
                    "y" => 1,
                    "z" => 2,
                    "w" => 3,
                    _ => {
                        if let Some(num) = name.strip_prefix('x') {
                            num.parse::<usize>()
                                .ok()
                                .and_then(|i| i.checked_sub(1))
                                .ok_or_else(|| self.error(format!("unknown variable '{name}'")))?
                        } else {
                            return Err(self.error(format!("unknown variable '{name}'")));
                        }
                    }
                };
                if idx >= self.dim {
                    return Err(self.error(format!(
                        "variable '{name}' out of range for dimension {}",
                        self.dim
                    )));
                }
                Ok(Expr::Var(idx))
            }
            _ => Err(self.error("expected expression")),
        }
    }
}
