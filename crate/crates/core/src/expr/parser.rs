//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `-x^2` parses as `-(x^2)` and `2^-1` is accepted. Positions in errors are
//! 1-based character columns.

use std::fmt;

use thiserror::Error;

use super::ast::{BinaryOp, Expression, Node, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    Syntax { expected: Vec<&'static str>, found: String },
    UnknownFunction(String),
    InvalidNumber(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Empty => write!(f, "empty expression"),
            ParseErrorKind::Syntax { expected, found } => write!(
                f,
                "syntax error at position {}: expected one of {{{}}}, found {}",
                self.position,
                expected.join(", "),
                found
            ),
            ParseErrorKind::UnknownFunction(name) => {
                write!(f, "unknown function '{name}' at position {}", self.position)
            }
            ParseErrorKind::InvalidNumber(text) => {
                write!(f, "invalid number '{text}' at position {}", self.position)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(name) => format!("identifier '{name}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(source: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
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
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ParseError {
                position: pos,
                kind: ParseErrorKind::InvalidNumber(text.clone()),
            })?;
            out.push((Tok::Num(value), pos));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            other => {
                return Err(ParseError {
                    position: pos,
                    kind: ParseErrorKind::Syntax {
                        expected: vec!["operator", "operand"],
                        found: format!("'{other}'"),
                    },
                })
            }
        };
        out.push((tok, pos));
        i += 1;
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

const OPERAND: [&str; 4] = ["number", "identifier", "'('", "'-'"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            position: self.pos(),
            kind: ParseErrorKind::Syntax {
                expected: expected.to_vec(),
                found: self.peek().describe(),
            },
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Node::unary(UnaryOp::Neg, self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Literal(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let op = UnaryOp::from_name(&name).ok_or(ParseError {
                        position: pos,
                        kind: ParseErrorKind::UnknownFunction(name.clone()),
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::unary(op, arg));
                }
                Ok(match name.as_str() {
                    "x" => Node::X,
                    "u" => Node::U,
                    _ => Node::Constant(name),
                })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(self.unexpected(&OPERAND)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&["')'", "operator"]))
        }
    }
}

/// Parses an integrand in `x`, `u` and named constants.
pub fn parse_expression(source: &str) -> Result<Expression, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError { position: 1, kind: ParseErrorKind::Empty });
    }
    let mut parser = Parser { toks: lex(source)?, at: 0 };
    let root = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.unexpected(&["operator", "end of input"]));
    }
    Ok(Expression::new(root))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHALLOW_LAKES: &str = "b^2*x^2 - 2*b*r*x^3/(x^2+1) + 2*b*x*u - c*x^2 \
        + r^2*x^4/(x^2+1)^2 - 2*r*x^2*u/(x^2+1) + u^2";

    #[test]
    fn sum_of_squares_tree() {
        let e = parse_expression("u^2 + x^2").unwrap();
        assert_eq!(e.to_sexpr(), "(+ (^ u 2) (^ x 2))");
    }

    #[test]
    fn shallow_lakes_integrand_parses() {
        let e = parse_expression(SHALLOW_LAKES).unwrap();
        assert_eq!(e.constant_names(), vec!["b", "c", "r"]);
    }

    #[test]
    fn doubled_caret_is_rejected_at_the_second_caret() {
        let err = parse_expression("u^^2").unwrap_err();
        assert_eq!(err.position, 3);
        assert!(matches!(err.kind, ParseErrorKind::Syntax { .. }));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expression("-x^2^3 * 2 - u / 4").unwrap();
        assert_eq!(e.to_sexpr(), "(- (* (neg (^ x (^ 2 3))) 2) (/ u 4))");
        let e = parse_expression("2^-1").unwrap();
        assert_eq!(e.to_sexpr(), "(^ 2 (neg 1))");
    }

    #[test]
    fn unknown_function_is_named() {
        let err = parse_expression("1 + foo(x)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownFunction("foo".into()));
        assert_eq!(err.position, 5);
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(parse_expression("  ").unwrap_err().kind, ParseErrorKind::Empty);
        assert!(parse_expression("(x + u").is_err());
        assert!(parse_expression("x u").is_err());
        assert!(parse_expression("x + $").is_err());
        assert!(parse_expression("1.2.3").is_err());
    }

    #[test]
    fn scientific_literals() {
        let e = parse_expression("1.5e-3*x + .5E2").unwrap();
        assert_eq!(e.to_sexpr(), "(+ (* 0.0015 x) 50)");
    }

    #[test]
    fn printing_round_trips() {
        for src in [SHALLOW_LAKES, "exp(x*u) - -u", "sqrt(x^2+1)/tanh(u+2)", "2^-x^u"] {
            let e = parse_expression(src).unwrap();
            let again = parse_expression(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src}");
        }
    }
}
