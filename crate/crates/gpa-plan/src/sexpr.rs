//! S-expression reader for PPDDL text.
//!
//! Produces a tree of symbols and lists, each tagged with the line/column
//! where it started. Numbers are kept as symbols; the PPDDL layer decides
//! what is a probability, a name, or a keyword.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexpr {
    Sym(String, Pos),
    List(Vec<Sexpr>, Pos),
}

impl Sexpr {
    pub fn pos(&self) -> Pos {
        match self {
            Sexpr::Sym(_, p) | Sexpr::List(_, p) => *p,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Sexpr::Sym(s, _) => Some(s.as_str()),
            Sexpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items),
            Sexpr::Sym(..) => None,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SexprError {
    #[error("{pos}: unexpected closing parenthesis")]
    UnexpectedClose { pos: Pos },
    #[error("{pos}: unclosed parenthesis")]
    UnclosedParen { pos: Pos },
    #[error("{pos}: trailing input after expression")]
    TrailingInput { pos: Pos },
    #[error("empty input")]
    Empty,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    idx: usize,
    line: u32,
    col: u32,
}

#[derive(Debug)]
enum Token {
    Open(Pos),
    Close(Pos),
    Sym(String, Pos),
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, bytes: src.as_bytes(), idx: 0, line: 1, col: 1 }
    }

    fn bump(&mut self) {
        if self.bytes[self.idx] == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        self.idx += 1;
    }

    fn skip_ws(&mut self) {
        while self.idx < self.bytes.len() {
            match self.bytes[self.idx] {
                b';' => {
                    // comment to end of line
                    while self.idx < self.bytes.len() && self.bytes[self.idx] != b'\n' {
                        self.bump();
                    }
                }
                c if c.is_ascii_whitespace() => self.bump(),
                _ => break,
            }
        }
    }

    fn next(&mut self) -> Option<Token> {
        self.skip_ws();
        if self.idx >= self.bytes.len() {
            return None;
        }
        let pos = Pos { line: self.line, col: self.col };
        match self.bytes[self.idx] {
            b'(' => {
                self.bump();
                Some(Token::Open(pos))
            }
            b')' => {
                self.bump();
                Some(Token::Close(pos))
            }
            _ => {
                let start = self.idx;
                while self.idx < self.bytes.len() {
                    let c = self.bytes[self.idx];
                    if c == b'(' || c == b')' || c == b';' || c.is_ascii_whitespace() {
                        break;
                    }
                    self.bump();
                }
                // PPDDL identifiers are case-insensitive
                Some(Token::Sym(self.src[start..self.idx].to_ascii_lowercase(), pos))
            }
        }
    }
}

/// Parses a single s-expression; rejects trailing non-whitespace input.
pub fn parse_one(src: &str) -> Result<Sexpr, SexprError> {
    let mut lexer = Lexer::new(src);
    let expr = parse_expr(&mut lexer)?;
    lexer.skip_ws();
    if lexer.idx < lexer.bytes.len() {
        return Err(SexprError::TrailingInput { pos: Pos { line: lexer.line, col: lexer.col } });
    }
    Ok(expr)
}

fn parse_expr(lexer: &mut Lexer) -> Result<Sexpr, SexprError> {
    match lexer.next() {
        None => Err(SexprError::Empty),
        Some(Token::Sym(s, pos)) => Ok(Sexpr::Sym(s, pos)),
        Some(Token::Close(pos)) => Err(SexprError::UnexpectedClose { pos }),
        Some(Token::Open(open_pos)) => {
            let mut items = Vec::new();
            loop {
                let save = (lexer.idx, lexer.line, lexer.col);
                match lexer.next() {
                    None => return Err(SexprError::UnclosedParen { pos: open_pos }),
                    Some(Token::Close(_)) => return Ok(Sexpr::List(items, open_pos)),
                    Some(Token::Sym(s, pos)) => items.push(Sexpr::Sym(s, pos)),
                    Some(Token::Open(_)) => {
                        lexer.idx = save.0;
                        lexer.line = save.1;
                        lexer.col = save.2;
                        items.push(parse_expr(lexer)?);
                    }
                }
            }
        }
    }
}
