//! Recursive-descent parser for the surface formula grammar.
//!
//! ```text
//! formula := disj [ ("U" | "R") disj ]
//! disj    := conj { "||" conj }
//! conj    := unary { "&&" unary }
//! unary   := ("G" | "F" | "N" | "X") unary | "(" formula ")" | atom
//! atom    := expr ("<=" | "<" | "==" | "!=" | ">=" | ">") expr
//! expr    := number | f<k> | x | px | y | py | vx | vy | speed | accel
//!          | "dist" "(" ["p" ","] point ")"
//! point   := "(" number "," number ")" | number "," number
//! ```
//!
//! `a >= b` and `a > b` are read as `b <= a` and `b < a`.

use super::{Cmp, Formula, SurfaceFormula, Term};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Comma,
    AndAnd,
    OrOr,
    Cmp(Cmp, bool),
    Number(f64),
    Ident(String),
    Eof,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
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

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let mut push = |tok, width: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned {
                tok,
                line: start_line,
                column: start_col,
            });
            *i += width;
            *col += width;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            _ if two == "&&" => push(Tok::AndAnd, 2, &mut i, &mut col),
            _ if two == "||" => push(Tok::OrOr, 2, &mut i, &mut col),
            _ if two == "<=" => push(Tok::Cmp(Cmp::Le, false), 2, &mut i, &mut col),
            _ if two == ">=" => push(Tok::Cmp(Cmp::Le, true), 2, &mut i, &mut col),
            _ if two == "==" => push(Tok::Cmp(Cmp::Eq, false), 2, &mut i, &mut col),
            _ if two == "!=" => push(Tok::Cmp(Cmp::Ne, false), 2, &mut i, &mut col),
            '<' => push(Tok::Cmp(Cmp::Lt, false), 1, &mut i, &mut col),
            '>' => push(Tok::Cmp(Cmp::Lt, true), 1, &mut i, &mut col),
            c if c.is_ascii_digit()
                || c == '.'
                || (c == '-'
                    && chars
                        .get(i + 1)
                        .is_some_and(|n| n.is_ascii_digit() || *n == '.')) =>
            {
                let mut j = i + 1;
                while j < chars.len() {
                    let d = chars[j];
                    let exp_sign =
                        (d == '-' || d == '+') && matches!(chars[j - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let lexeme: String = chars[i..j].iter().collect();
                let value: f64 = lexeme
                    .parse()
                    .map_err(|_| syntax(line, col, format!("malformed number `{lexeme}`")))?;
                if !value.is_finite() {
                    return Err(syntax(line, col, format!("non-finite number `{lexeme}`")));
                }
                push(Tok::Number(value), j - i, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let name: String = chars[i..j].iter().collect();
                push(Tok::Ident(name), j - i, &mut i, &mut col);
            }
            other => return Err(syntax(line, col, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let t = &self.toks[self.pos];
        syntax(t.line, t.column, message)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn formula(&mut self) -> Result<SurfaceFormula> {
        let lhs = self.disjunction()?;
        match self.peek_ident() {
            Some("U") => {
                self.bump();
                Ok(lhs.until(self.disjunction()?))
            }
            Some("R") => {
                self.bump();
                Ok(lhs.release(self.disjunction()?))
            }
            _ => Ok(lhs),
        }
    }

    fn disjunction(&mut self) -> Result<SurfaceFormula> {
        let mut acc = self.conjunction()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            acc = acc.or(self.conjunction()?);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<SurfaceFormula> {
        let mut acc = self.unary()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            acc = acc.and(self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<SurfaceFormula> {
        match self.peek() {
            Tok::Ident(op) if matches!(op.as_str(), "G" | "F" | "N" | "X") => {
                let op = op.clone();
                self.bump();
                let inner = self.unary()?;
                Ok(match op.as_str() {
                    "G" => inner.always(),
                    "F" => inner.eventually(),
                    "N" => inner.strong_next(),
                    _ => inner.weak_next(),
                })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<SurfaceFormula> {
        let lhs = self.expr()?;
        let (op, swapped) = match self.peek() {
            Tok::Cmp(op, swapped) => (*op, *swapped),
            other => {
                return Err(self.error(format!(
                    "expected comparison operator, found {}",
                    describe(other)
                )))
            }
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(if swapped {
            Formula::atom(op, rhs, lhs)
        } else {
            Formula::atom(op, lhs, rhs)
        })
    }

    fn number(&mut self) -> Result<f64> {
        match self.peek() {
            Tok::Number(v) => {
                let v = *v;
                self.bump();
                Ok(v)
            }
            other => Err(self.error(format!("expected number, found {}", describe(other)))),
        }
    }

    fn expr(&mut self) -> Result<Term> {
        let name = match self.peek() {
            Tok::Number(v) => {
                let v = *v;
                self.bump();
                return Ok(Term::Const(v));
            }
            Tok::Ident(name) => name.clone(),
            other => {
                return Err(self.error(format!("expected operand, found {}", describe(other))))
            }
        };
        self.bump();
        let term = match name.as_str() {
            "x" | "px" => Term::X,
            "y" | "py" => Term::Y,
            "vx" => Term::Vx,
            "vy" => Term::Vy,
            "speed" => Term::Speed,
            "accel" => Term::Accel,
            "dist" => self.dist_args()?,
            _ => match name.strip_prefix('f').and_then(|k| k.parse::<usize>().ok()) {
                Some(k) => Term::Feature(k),
                None => return Err(Error::UnknownIdentifier(name)),
            },
        };
        Ok(term)
    }

    fn dist_args(&mut self) -> Result<Term> {
        self.expect(Tok::LParen, "`(` after dist")?;
        if self.peek_ident() == Some("p") {
            self.bump();
            self.expect(Tok::Comma, "`,` after p")?;
        }
        let parenthesised = *self.peek() == Tok::LParen;
        if parenthesised {
            self.bump();
        }
        let x = self.number()?;
        self.expect(Tok::Comma, "`,` between point coordinates")?;
        let y = self.number()?;
        if parenthesised {
            self.expect(Tok::RParen, "`)` closing the point")?;
        }
        self.expect(Tok::RParen, "`)` closing dist")?;
        Ok(Term::Dist(x, y))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::AndAnd => "`&&`".into(),
        Tok::OrOr => "`||`".into(),
        Tok::Cmp(op, false) => format!("`{}`", op.symbol()),
        Tok::Cmp(Cmp::Le, true) => "`>=`".into(),
        Tok::Cmp(_, true) => "`>`".into(),
        Tok::Number(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses surface text into a formula over [`Term`]s.
pub fn parse_surface(text: &str) -> Result<SurfaceFormula> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let formula = parser.formula()?;
    if *parser.peek() != Tok::Eof {
        return Err(parser.error(format!(
            "unexpected trailing {}",
            describe(parser.peek())
        )));
    }
    Ok(formula)
}
