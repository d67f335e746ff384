//! Closed-form coefficient expressions in one real variable `x`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?            (right associative)
//! atom    := number | 'x' | 'i' | func '(' sum ')' | '(' sum ')'
//! ```
//!
//! Values are complex; `i` is the imaginary unit. Derivatives are taken
//! symbolically so that quantities like `A'(x)` carry no finite-difference
//! noise.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Exp, Func::Log, Func::Sin, Func::Cos, Func::Sqrt, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, z: Complex64) -> Complex64 {
        // Stay on the real line whenever possible so real specs keep exactly
        // zero imaginary parts.
        if z.im == 0.0 {
            let r = z.re;
            match self {
                Func::Exp => return Complex64::new(r.exp(), 0.0),
                Func::Sin => return Complex64::new(r.sin(), 0.0),
                Func::Cos => return Complex64::new(r.cos(), 0.0),
                Func::Abs => return Complex64::new(r.abs(), 0.0),
                Func::Log if r > 0.0 => return Complex64::new(r.ln(), 0.0),
                Func::Sqrt if r >= 0.0 => return Complex64::new(r.sqrt(), 0.0),
                _ => {}
            }
        }
        match self {
            Func::Exp => z.exp(),
            Func::Log => z.ln(),
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Sqrt => z.sqrt(),
            Func::Abs => Complex64::new(z.norm(), 0.0),
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// The independent variable `x`.
    Var,
    /// The imaginary unit `i`.
    Imag,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src,
        bytes: src.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    if p.pos >= p.bytes.len() {
        return Err(p.syntax("empty expression"));
    }
    let e = p.sum()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
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

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let b = self.bytes;
        let mut i = self.pos;
        while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
            i += 1;
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = &self.src[start..i];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = i;
                Ok(Expr::Num(v))
            }
            _ => Err(ExprError::Syntax {
                offset: start,
                message: format!("invalid number `{text}`"),
            }),
        }
    }

    fn identifier(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let b = self.bytes;
        let mut i = self.pos;
        while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
            i += 1;
        }
        let name = &self.src[start..i];
        self.pos = i;
        match name {
            "x" => return Ok(Expr::Var),
            "i" => return Ok(Expr::Imag),
            _ => {}
        }
        let Some(func) = Func::from_name(name) else {
            return Err(ExprError::UnknownIdentifier {
                name: name.to_string(),
                offset: start,
            });
        };
        if self.peek() != Some(b'(') {
            return Err(self.syntax(&format!("expected `(` after `{name}`")));
        }
        self.pos += 1;
        if self.peek() == Some(b')') {
            return Err(ExprError::Arity {
                name: name.to_string(),
                expected: 1,
                found: 0,
            });
        }
        let mut args = vec![self.sum()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            args.push(self.sum()?);
        }
        if self.peek() != Some(b')') {
            return Err(self.syntax("expected `)`"));
        }
        self.pos += 1;
        if args.len() != 1 {
            return Err(ExprError::Arity {
                name: name.to_string(),
                expected: 1,
                found: args.len(),
            });
        }
        Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

// Printing precedence levels: atoms bind tightest.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(_) | Expr::Var | Expr::Imag | Expr::Call(..) => PREC_ATOM,
            Expr::Neg(_) => PREC_UNARY,
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => PREC_SUM,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => PREC_PRODUCT,
            Expr::Bin(BinOp::Pow, ..) => PREC_POWER,
        }
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// True if the expression never references `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Imag => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Bin(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let z = match self {
            Expr::Num(v) => Complex64::new(*v, 0.0),
            Expr::Var => Complex64::new(x, 0.0),
            Expr::Imag => Complex64::i(),
            Expr::Neg(e) => -e.eval(x),
            Expr::Call(f, e) => f.apply(e.eval(x)),
            Expr::Bin(op, l, r) => {
                let a = l.eval(x);
                let b = r.eval(x);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => complex_pow(a, b),
                }
            }
        };
        // A negative zero imaginary part would select the lower side of the
        // branch cuts of log, sqrt and powers.
        if z.im == 0.0 {
            Complex64::new(z.re, 0.0)
        } else {
            z
        }
    }

    /// Symbolic derivative with respect to `x`.
    ///
    /// `abs(f)` differentiates as `f' * abs(f) / f`, which is exact for
    /// real-valued `f` away from its zeros.
    pub fn derivative(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Imag => Expr::Num(0.0),
            Expr::Var => Expr::Num(1.0),
            Expr::Neg(e) => neg(e.derivative()),
            Expr::Bin(op, l, r) => {
                let dl = l.derivative();
                let dr = r.derivative();
                let l = (**l).clone();
                let r = (**r).clone();
                match op {
                    BinOp::Add => add(dl, dr),
                    BinOp::Sub => sub(dl, dr),
                    BinOp::Mul => add(mul(dl, r), mul(l, dr)),
                    BinOp::Div => div(
                        sub(mul(dl, r.clone()), mul(l, dr)),
                        pow(r, Expr::Num(2.0)),
                    ),
                    BinOp::Pow => {
                        if r.is_constant() {
                            // d(f^c) = c f^(c-1) f'
                            let reduced = match r.as_num() {
                                Some(c) => Expr::Num(c - 1.0),
                                None => sub(r.clone(), Expr::Num(1.0)),
                            };
                            mul(mul(r, pow(l, reduced)), dl)
                        } else {
                            // d(f^g) = f^g (g' log f + g f'/f)
                            let whole = pow(l.clone(), r.clone());
                            let log_term = mul(dr, call(Func::Log, l.clone()));
                            let ratio = mul(r, div(dl, l));
                            mul(whole, add(log_term, ratio))
                        }
                    }
                }
            }
            Expr::Call(f, e) => {
                let de = e.derivative();
                let inner = (**e).clone();
                let outer = match f {
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(Expr::Num(1.0), inner),
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Sqrt => div(Expr::Num(0.5), call(Func::Sqrt, inner)),
                    Func::Abs => div(call(Func::Abs, inner.clone()), inner),
                };
                mul(outer, de)
            }
        }
    }
}

fn complex_pow(a: Complex64, b: Complex64) -> Complex64 {
    if b.im == 0.0 {
        let p = b.re;
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            return a.powi(p as i32);
        }
        if a.im == 0.0 && a.re >= 0.0 {
            return Complex64::new(a.re.powf(p), 0.0);
        }
        return a.powf(p);
    }
    if a == Complex64::new(0.0, 0.0) {
        return a;
    }
    a.powc(b)
}

// Smart constructors with light constant folding, so derivatives stay small.

pub fn neg(e: Expr) -> Expr {
    match e {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => Expr::Num(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => Expr::Num(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => Expr::Num(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), _) if x == 0.0 => Expr::Num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Bin(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match b.as_num() {
        Some(y) if y == 1.0 => a,
        Some(y) if y == 0.0 => Expr::Num(1.0),
        _ => Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b)),
    }
}

pub fn call(f: Func, e: Expr) -> Expr {
    Expr::Call(f, Box::new(e))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var => f.write_str("x"),
            Expr::Imag => f.write_str("i"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_child(f, e, e.precedence() < PREC_UNARY)
            }
            Expr::Call(func, e) => write!(f, "{}({})", func.name(), e),
            Expr::Bin(op, l, r) => {
                let p = self.precedence();
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                if *op == BinOp::Pow {
                    write_child(f, l, l.precedence() <= PREC_POWER)?;
                    f.write_str(sym)?;
                    write_child(f, r, r.precedence() < PREC_POWER)
                } else {
                    write_child(f, l, l.precedence() < p)?;
                    f.write_str(sym)?;
                    write_child(f, r, r.precedence() <= p)
                }
            }
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(src: &str, x: f64) -> Complex64 {
        parse(src).unwrap().eval(x)
    }

    /// exp(-1) from its Taylor series, independent of `f64::exp`.
    fn exp_neg_one_series() -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            term *= -1.0 / k as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn evaluates_basic_examples() {
        let e = at("exp(-x)", 1.0);
        assert!((e.re - exp_neg_one_series()).abs() < 1e-15);
        assert!((e.re - 0.3678794412).abs() < 1e-10);
        assert_eq!(at("x", 0.0), Complex64::new(0.0, 0.0));
        assert_eq!(at("1-x", 1.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(at("2^3^2", 0.0).re, 512.0);
        assert_eq!(at("-2^2", 0.0).re, -4.0);
        assert_eq!(at("1-2-3", 0.0).re, -4.0);
        assert_eq!(at("8/4/2", 0.0).re, 1.0);
        assert_eq!(at("2*-3", 0.0).re, -6.0);
        assert_eq!(at("2^-1", 0.0).re, 0.5);
        assert_eq!(at("1 + 2*3", 0.0).re, 7.0);
        assert_eq!(at("1.5e1 + 2E-1", 0.0).re, 15.2);
    }

    #[test]
    fn imaginary_unit() {
        assert_eq!(at("i*i", 0.0), Complex64::new(-1.0, 0.0));
        assert_eq!(at("2 + 3*i", 0.0), Complex64::new(2.0, 3.0));
    }

    #[test]
    fn errors_carry_offsets() {
        match parse("1 + $") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse("y + 1") {
            Err(ExprError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "y");
                assert_eq!(offset, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("sin(x, 2)"),
            Err(ExprError::Arity { found: 2, .. })
        ));
        assert!(matches!(parse("cos()"), Err(ExprError::Arity { found: 0, .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("(1 + x"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("1 2"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn derivatives_match_closed_forms() {
        let cases: &[(&str, fn(f64) -> f64)] = &[
            ("1 - x", |_| -1.0),
            ("x^3", |x| 3.0 * x * x),
            ("sin(2*x)", |x| 2.0 * (2.0 * x).cos()),
            ("exp(-x^2)", |x| -2.0 * x * (-x * x).exp()),
            ("log(1 + x)", |x| 1.0 / (1.0 + x)),
            ("sqrt(x + 1)", |x| 0.5 / (x + 1.0).sqrt()),
            ("x / (1 + x)", |x| 1.0 / ((1.0 + x) * (1.0 + x))),
            ("x^x", |x| x.powf(x) * (x.ln() + 1.0)),
            ("abs(x - 2)", |_| -1.0),
        ];
        for (src, exact) in cases {
            let d = parse(src).unwrap().derivative();
            for &x in &[0.3, 0.7, 1.1] {
                let got = d.eval(x);
                assert!(
                    (got.re - exact(x)).abs() < 1e-12 && got.im.abs() < 1e-12,
                    "{src} at {x}: {got} vs {}",
                    exact(x)
                );
            }
        }
    }

    #[test]
    fn printing_is_readable() {
        assert_eq!(parse("1 - (x - 2)").unwrap().to_string(), "1 - (x - 2)");
        assert_eq!(parse("(1 - x) - 2").unwrap().to_string(), "1 - x - 2");
        assert_eq!(parse("(2^3)^2").unwrap().to_string(), "(2^3)^2");
        assert_eq!(parse("-x^2").unwrap().to_string(), "-x^2");
        assert_eq!(parse("(-x)^2").unwrap().to_string(), "(-x)^2");
    }
}
