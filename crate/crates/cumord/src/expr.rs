//! A small recursive-descent parser for test-function expressions.
//!
//! Grammar: infix `+ - * / ^` (`^` binds tightest, right-associative),
//! unary minus, the variable `x`, the functions `exp`, `abs`, `min`, `max`,
//! `sqrt`, parentheses and real literals. Parse errors report the column and
//! the expected token set.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
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
    Exp,
    Abs,
    Min,
    Max,
    Sqrt,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "abs" => Some(Func::Abs),
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

impl Expr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Call(f, args) => match f {
                Func::Exp => args[0].eval(x).exp(),
                Func::Abs => args[0].eval(x).abs(),
                Func::Sqrt => args[0].eval(x).sqrt(),
                Func::Min => args[0].eval(x).min(args[1].eval(x)),
                Func::Max => args[0].eval(x).max(args[1].eval(x)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var,
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Token, usize)>> {
        let mut lex = Lexer { src: src.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        loop {
            lex.skip_ws();
            let start = lex.pos;
            let Some(&c) = lex.src.get(lex.pos) else {
                out.push((Token::End, start));
                return Ok(out);
            };
            let tok = match c {
                b'+' => Token::Plus,
                b'-' => Token::Minus,
                b'*' => Token::Star,
                b'/' => Token::Slash,
                b'^' => Token::Caret,
                b'(' => Token::LParen,
                b')' => Token::RParen,
                b',' => Token::Comma,
                b'0'..=b'9' | b'.' => {
                    let num = lex.number()?;
                    out.push((num, start));
                    continue;
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let ident = lex.ident();
                    out.push((ident, start));
                    continue;
                }
                _ => {
                    return Err(Error::Parse {
                        position: start,
                        expected: "a number, 'x', a function name, or an operator".into(),
                    })
                }
            };
            lex.pos += 1;
            out.push((tok, start));
        }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Result<Token> {
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || *c == b'.' || *c == b'e' || *c == b'E')
        {
            // allow a sign right after an exponent marker
            if matches!(self.src[self.pos], b'e' | b'E')
                && self.src.get(self.pos + 1).is_some_and(|c| *c == b'+' || *c == b'-')
            {
                self.pos += 1;
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map(Token::Num).map_err(|_| Error::Parse {
            position: start,
            expected: "a valid real literal".into(),
        })
    }

    fn ident(&mut self) -> Token {
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if text == "x" {
            Token::Var
        } else {
            Token::Ident(text.to_string())
        }
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn position(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token, expected: &str) -> Result<()> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            Err(Error::Parse { position: self.position(), expected: expected.into() })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Token::Plus => {
                    self.advance();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.advance();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Token::Star => {
                    self.advance();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Token::Slash => {
                    self.advance();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if *self.peek() == Token::Minus {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Token::Caret {
            self.advance();
            // right-associative; the exponent may carry a unary minus
            let exponent = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let position = self.position();
        match self.advance() {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Var => Ok(Expr::Var),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let func = Func::from_name(&name).ok_or_else(|| Error::Parse {
                    position,
                    expected: "one of exp, abs, min, max, sqrt".into(),
                })?;
                self.expect(Token::LParen, "'(' after function name")?;
                let mut args = vec![self.expr()?];
                while *self.peek() == Token::Comma {
                    self.advance();
                    args.push(self.expr()?);
                }
                self.expect(Token::RParen, "')' or ','")?;
                if args.len() != func.arity() {
                    return Err(Error::Parse {
                        position,
                        expected: format!("{} argument(s) for {name}", func.arity()),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            _ => Err(Error::Parse {
                position,
                expected: "a number, 'x', a function call, or '('".into(),
            }),
        }
    }
}

/// Parses an expression in the variable `x`.
pub fn parse(input: &str) -> Result<Expr> {
    let tokens = Lexer::tokenize(input)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    if *parser.peek() != Token::End {
        return Err(Error::Parse {
            position: parser.position(),
            expected: "an operator or end of input".into(),
        });
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x: f64) -> f64 {
        parse(src).unwrap().eval(x)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(eval("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", 0.0), 512.0);
        assert_eq!(eval("-x^2", 3.0), -9.0);
        assert_eq!(eval("x^-1", 4.0), 0.25);
        assert_eq!(eval("6 / 3 / 2", 0.0), 1.0);
    }

    #[test]
    fn functions() {
        assert_eq!(eval("abs(x - 2)", 0.5), 1.5);
        assert_eq!(eval("min(x, 3) + max(x, 3)", 5.0), 8.0);
        assert!((eval("exp(x / 2)", 2.0) - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(eval("sqrt(x^2)", -4.0), 4.0);
        assert_eq!(eval("1.5e2 + x", 1.0), 151.0);
    }

    #[test]
    fn error_positions() {
        match parse("x + ") {
            Err(crate::Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse("foo(x)") {
            Err(crate::Error::Parse { position, expected }) => {
                assert_eq!(position, 0);
                assert!(expected.contains("exp"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse("min(x)") {
            Err(crate::Error::Parse { expected, .. }) => assert!(expected.contains("2")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("x $ 2").is_err());
        assert!(parse("x 2").is_err());
    }
}
