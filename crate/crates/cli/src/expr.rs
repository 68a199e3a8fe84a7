//! Tiny arithmetic expression language for user-defined fields.
//!
//! Grammar: `+ - * / ^` with standard precedence (`^` binds tightest and
//! associates right), unary minus, parentheses, numeric literals, the
//! constant `pi`, the functions `sin` and `cos`, and the declared state
//! variables. Nothing else — field functions stay smooth and auditable.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprError {
    Parse { position: usize, message: String },
    UnknownVariable { position: usize, name: String },
    DivisionByZero,
    NonFinite,
    BindingCount { expected: usize, got: usize },
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprError::Parse { position, message } => {
                write!(f, "parse error at byte {position}: {message}")
            }
            ExprError::UnknownVariable { position, name } => {
                write!(f, "unknown variable `{name}` at byte {position}")
            }
            ExprError::DivisionByZero => write!(f, "division by zero"),
            ExprError::NonFinite => write!(f, "expression evaluated to a non-finite value"),
            ExprError::BindingCount { expected, got } => {
                write!(f, "expected {expected} bindings, got {got}")
            }
        }
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((i, Token::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Token::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Token::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Token::Slash));
                i += 1;
            }
            '^' => {
                out.push((i, Token::Caret));
                i += 1;
            }
            '(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // Scientific notation suffix.
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ExprError::Parse {
                    position: start,
                    message: format!("bad number literal `{text}`"),
                })?;
                out.push((start, Token::Num(value)));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                out.push((start, Token::Ident(src[start..i].to_string())));
            }
            other => {
                return Err(ExprError::Parse {
                    position: i,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    vars: &'a [String],
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.src_len)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ExprError> {
        let position = self.here();
        match self.advance() {
            Some(t) if t == want => Ok(()),
            other => Err(ExprError::Parse {
                position,
                message: format!("expected {what}, found {other:?}"),
            }),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.advance();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.parse_term()?));
                }
                Some(Token::Minus) => {
                    self.advance();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.parse_term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.advance();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.parse_unary()?));
                }
                Some(Token::Slash) => {
                    self.advance();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.parse_unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Token::Minus) => {
                self.advance();
                Ok(Expr::Neg(Box::new(self.parse_unary()?)))
            }
            Some(Token::Plus) => {
                self.advance();
                self.parse_unary()
            }
            _ => self.parse_power(),
        }
    }

    fn parse_power(&mut self) -> Result<Expr, ExprError> {
        let base = self.parse_atom()?;
        if self.peek() == Some(&Token::Caret) {
            self.advance();
            // Right associative; the exponent may carry a unary sign.
            let exponent = self.parse_unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr, ExprError> {
        let position = self.here();
        match self.advance() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let inner = self.parse_expr()?;
                self.expect(Token::RParen, "closing parenthesis")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                if self.peek() == Some(&Token::LParen) {
                    self.advance();
                    let arg = self.parse_expr()?;
                    self.expect(Token::RParen, "closing parenthesis")?;
                    match name.as_str() {
                        "sin" => Ok(Expr::Sin(Box::new(arg))),
                        "cos" => Ok(Expr::Cos(Box::new(arg))),
                        other => Err(ExprError::Parse {
                            position,
                            message: format!(
                                "unknown function `{other}` (available: sin, cos)"
                            ),
                        }),
                    }
                } else if name == "pi" {
                    Ok(Expr::Const(std::f64::consts::PI))
                } else if let Some(idx) = self.vars.iter().position(|v| v == &name) {
                    Ok(Expr::Var(idx))
                } else {
                    Err(ExprError::UnknownVariable { position, name })
                }
            }
            other => Err(ExprError::Parse {
                position,
                message: format!("expected a value, found {other:?}"),
            }),
        }
    }
}

/// Parses an expression closed over the declared variables.
pub fn parse_expression(src: &str, vars: &[String]) -> Result<Expr, ExprError> {
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        vars,
        src_len: src.len(),
    };
    let expr = parser.parse_expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(ExprError::Parse {
            position: parser.here(),
            message: "trailing input".into(),
        });
    }
    Ok(expr)
}

fn eval_inner(e: &Expr, bindings: &[f64]) -> Result<f64, ExprError> {
    Ok(match e {
        Expr::Const(v) => *v,
        Expr::Var(i) => bindings[*i],
        Expr::Neg(a) => -eval_inner(a, bindings)?,
        Expr::Add(a, b) => eval_inner(a, bindings)? + eval_inner(b, bindings)?,
        Expr::Sub(a, b) => eval_inner(a, bindings)? - eval_inner(b, bindings)?,
        Expr::Mul(a, b) => eval_inner(a, bindings)? * eval_inner(b, bindings)?,
        Expr::Div(a, b) => {
            let denom = eval_inner(b, bindings)?;
            if denom == 0.0 {
                return Err(ExprError::DivisionByZero);
            }
            eval_inner(a, bindings)? / denom
        }
        Expr::Pow(a, b) => eval_inner(a, bindings)?.powf(eval_inner(b, bindings)?),
        Expr::Sin(a) => eval_inner(a, bindings)?.sin(),
        Expr::Cos(a) => eval_inner(a, bindings)?.cos(),
    })
}

fn max_var(e: &Expr) -> usize {
    match e {
        Expr::Const(_) => 0,
        Expr::Var(i) => i + 1,
        Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) => max_var(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
            max_var(a).max(max_var(b))
        }
    }
}

/// IEEE double evaluation; errors on a missing binding, division by zero, or
/// a non-finite result.
pub fn eval_expression(e: &Expr, bindings: &[f64]) -> Result<f64, ExprError> {
    let needed = max_var(e);
    if bindings.len() < needed {
        return Err(ExprError::BindingCount {
            expected: needed,
            got: bindings.len(),
        });
    }
    let v = eval_inner(e, bindings)?;
    if !v.is_finite() {
        return Err(ExprError::NonFinite);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn eval1(src: &str, var: &str, value: f64) -> f64 {
        let e = parse_expression(src, &vars(&[var])).unwrap();
        eval_expression(&e, &[value]).unwrap()
    }

    #[test]
    fn spec_examples() {
        assert!((eval1("sin(x)", "x", PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((eval1("1-cos(2*phi)", "phi", PI / 2.0) - 2.0).abs() < 1e-15);
        assert_eq!(eval1("4*(1-cos(2*phi))", "phi", 0.0), 0.0);
    }

    #[test]
    fn pendulum_field_expressions() {
        let names = vars(&["phi", "phidot"]);
        let e = parse_expression("-(sin(phi)+phidot)", &names).unwrap();
        for (phi, phidot) in [(0.0, 0.0), (1.0, -2.0), (-3.0, 0.5)] {
            let got = eval_expression(&e, &[phi, phidot]).unwrap();
            assert!((got - (-(phi.sin() + phidot))).abs() < 1e-15);
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expression("2+3*4", &[]).unwrap();
        assert_eq!(eval_expression(&e, &[]).unwrap(), 14.0);
        let e = parse_expression("2^3^2", &[]).unwrap();
        assert_eq!(eval_expression(&e, &[]).unwrap(), 512.0);
        let e = parse_expression("-2^2", &[]).unwrap();
        assert_eq!(eval_expression(&e, &[]).unwrap(), -4.0);
        let e = parse_expression("2^-1", &[]).unwrap();
        assert_eq!(eval_expression(&e, &[]).unwrap(), 0.5);
        let e = parse_expression("(2+3)*4", &[]).unwrap();
        assert_eq!(eval_expression(&e, &[]).unwrap(), 20.0);
    }

    #[test]
    fn scientific_literals_and_pi() {
        let e = parse_expression("1.5e-3 + pi", &[]).unwrap();
        assert!((eval_expression(&e, &[]).unwrap() - (0.0015 + PI)).abs() < 1e-15);
    }

    #[test]
    fn unknown_variable_is_a_parse_error() {
        let err = parse_expression("sin(thetaa)", &vars(&["theta"])).unwrap_err();
        assert!(matches!(err, ExprError::UnknownVariable { name, .. } if name == "thetaa"));
    }

    #[test]
    fn unknown_function_is_rejected() {
        let err = parse_expression("tan(x)", &vars(&["x"])).unwrap_err();
        assert!(matches!(err, ExprError::Parse { .. }));
    }

    #[test]
    fn division_by_zero_errors() {
        let e = parse_expression("1/x", &vars(&["x"])).unwrap();
        assert_eq!(eval_expression(&e, &[0.0]).unwrap_err(), ExprError::DivisionByZero);
        assert_eq!(eval_expression(&e, &[2.0]).unwrap(), 0.5);
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        assert!(parse_expression("1+2)", &[]).is_err());
        assert!(parse_expression("1 2", &[]).is_err());
        assert!(parse_expression("", &[]).is_err());
        assert!(parse_expression("1+", &[]).is_err());
    }
}
