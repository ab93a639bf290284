//! Expression language for source terms.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | primary
//! primary := number | 'u' | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `pow(e, c)`, `min(a, b)`, `max(a, b)`, `abs(e)`, `ln(e)`,
//! `exp(e)`, `sign(e)` and `odd_extend(e)`, which evaluates `e` at `|u|` and
//! multiplies by `sign(u)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Pow,
    Min,
    Max,
    Abs,
    Ln,
    Exp,
    Sign,
    OddExtend,
}

impl Function {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "pow" => Self::Pow,
            "min" => Self::Min,
            "max" => Self::Max,
            "abs" => Self::Abs,
            "ln" => Self::Ln,
            "exp" => Self::Exp,
            "sign" => Self::Sign,
            "odd_extend" => Self::OddExtend,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Self::Pow | Self::Min | Self::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var,
    Number(f64),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Expr {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Expr::Var => u,
            Expr::Number(c) => *c,
            Expr::Neg(e) => -e.eval(u),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(u), b.eval(u));
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                }
            }
            Expr::Call(func, args) => match func {
                Function::Pow => args[0].eval(u).powf(args[1].eval(u)),
                Function::Min => args[0].eval(u).min(args[1].eval(u)),
                Function::Max => args[0].eval(u).max(args[1].eval(u)),
                Function::Abs => args[0].eval(u).abs(),
                Function::Ln => args[0].eval(u).ln(),
                Function::Exp => args[0].eval(u).exp(),
                Function::Sign => sign(args[0].eval(u)),
                Function::OddExtend => {
                    let s = sign(u);
                    if s == 0.0 {
                        0.0
                    } else {
                        s * args[0].eval(u.abs())
                    }
                }
            },
        }
    }

    /// True when the expression is `odd_extend(..)` at the top level.
    pub fn is_odd_extension(&self) -> bool {
        matches!(self, Expr::Call(Function::OddExtend, _))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '/' => Some(Token::Slash),
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            ',' => Some(Token::Comma),
            _ => None,
        };
        if let Some(token) = simple {
            tokens.push(Spanned {
                token,
                line: tl,
                column: tc,
            });
            column += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal: String = chars[start..i].iter().collect();
            let value = literal
                .parse::<f64>()
                .map_err(|_| syntax(tl, tc, format!("malformed number `{literal}`")))?;
            tokens.push(Spanned {
                token: Token::Number(value),
                line: tl,
                column: tc,
            });
            column += i - start;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Spanned {
                token: Token::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            column += i - start;
            continue;
        }
        return Err(syntax(tl, tc, format!("unexpected character `{c}`")));
    }
    tokens.push(Spanned {
        token: Token::End,
        line,
        column,
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        let t = self.next();
        if t.token == want {
            Ok(())
        } else {
            Err(syntax(t.line, t.column, format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().token {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().token {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek().token {
            Token::Minus => {
                self.next();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Token::Plus => {
                self.next();
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.next();
        match t.token {
            Token::Number(v) => Ok(Expr::Number(v)),
            Token::LParen => {
                let e = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Token::Ident(name) if name == "u" => Ok(Expr::Var),
            Token::Ident(name) => {
                let func = Function::lookup(&name).ok_or_else(|| {
                    syntax(t.line, t.column, format!("unknown identifier `{name}`"))
                })?;
                self.expect(Token::LParen, &format!("`(` after `{name}`"))?;
                let mut args = vec![self.expr()?];
                while self.peek().token == Token::Comma {
                    self.next();
                    args.push(self.expr()?);
                }
                let close = self.peek().clone();
                self.expect(Token::RParen, "`)` or `,`")?;
                if args.len() != func.arity() {
                    return Err(syntax(
                        close.line,
                        close.column,
                        format!(
                            "`{name}` takes {} argument(s), got {}",
                            func.arity(),
                            args.len()
                        ),
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            Token::End => Err(syntax(t.line, t.column, "unexpected end of input")),
            other => Err(syntax(t.line, t.column, format!("unexpected token {other:?}"))),
        }
    }
}

/// Parses an expression in the variable `u`.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let e = parser.expr()?;
    let t = parser.peek();
    if t.token != Token::End {
        return Err(syntax(t.line, t.column, "trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, u: f64) -> f64 {
        parse_expr(text).unwrap().eval(u)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(eval("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(eval("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(eval("-u - -u", 3.0), 0.0);
        assert_eq!(eval("2.5e-1 * u", 4.0), 1.0);
        assert_eq!(eval(".5*u", 4.0), 2.0);
    }

    #[test]
    fn functions() {
        assert_eq!(eval("pow(abs(u),1.5)*sign(u)", -4.0), -8.0);
        assert_eq!(eval("min(u, 2)", 5.0), 2.0);
        assert_eq!(eval("max(u, 2)", 5.0), 5.0);
        assert_eq!(eval("sign(u)", 0.0), 0.0);
        assert!((eval("ln(exp(u))", 0.7) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn odd_extension() {
        let e = parse_expr("odd_extend(min(pow(u,2),pow(u,4)))").unwrap();
        assert!(e.is_odd_extension());
        assert_eq!(e.eval(0.5), 0.0625);
        assert_eq!(e.eval(-0.5), -0.0625);
        assert_eq!(e.eval(3.0), 9.0);
        assert_eq!(e.eval(-3.0), -9.0);
        assert_eq!(e.eval(0.0), 0.0);
    }

    #[test]
    fn errors_carry_positions() {
        match parse_expr("u +\n  * 2") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        match parse_expr("pow(u)") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (1, 6)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expr("sin(u)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("u $ 2"), Err(Error::Syntax { column: 3, .. })));
        assert!(matches!(parse_expr("(u"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("u u"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr(""), Err(Error::Syntax { .. })));
    }
}
