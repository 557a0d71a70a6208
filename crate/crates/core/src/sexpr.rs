//! S-expression reader shared by the domain/problem and trace parsers.

use std::fmt;

/// Source location attached to every parsed node and every parse error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub end_line: u32,
    pub end_column: u32,
}

impl SourceSpan {
    pub fn point(line: u32, column: u32) -> Self {
        SourceSpan { line, column, end_line: line, end_column: column }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone)]
pub enum Sexpr {
    Symbol(String, SourceSpan),
    List(Vec<Sexpr>, SourceSpan),
}

impl Sexpr {
    pub fn span(&self) -> SourceSpan {
        match self {
            Sexpr::Symbol(_, s) | Sexpr::List(_, s) => *s,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Sexpr::Symbol(s, _) => Some(s.as_str()),
            Sexpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items.as_slice()),
            Sexpr::Symbol(..) => None,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{span}: {message}")]
pub struct SexprError {
    pub message: String,
    pub span: SourceSpan,
}

struct Reader<'a> {
    input: &'a [u8],
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Reader<'a> {
    fn new(input: &'a str) -> Self {
        Reader { input: input.as_bytes(), pos: 0, line: 1, column: 1 }
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b';') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn read(&mut self) -> Result<Sexpr, SexprError> {
        self.skip_trivia();
        let start = SourceSpan::point(self.line, self.column);
        match self.peek() {
            None => Err(SexprError { message: "unexpected end of input".into(), span: start }),
            Some(b'(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => {
                            return Err(SexprError {
                                message: "unclosed parenthesis".into(),
                                span: start,
                            })
                        }
                        Some(b')') => {
                            self.bump();
                            let span = SourceSpan {
                                line: start.line,
                                column: start.column,
                                end_line: self.line,
                                end_column: self.column,
                            };
                            return Ok(Sexpr::List(items, span));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(b')') => {
                Err(SexprError { message: "unexpected `)`".into(), span: start })
            }
            Some(_) => {
                let mut sym = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_whitespace() || c == b'(' || c == b')' || c == b';' {
                        break;
                    }
                    sym.push(self.bump().unwrap() as char);
                }
                let span = SourceSpan {
                    line: start.line,
                    column: start.column,
                    end_line: self.line,
                    end_column: self.column,
                };
                Ok(Sexpr::Symbol(sym, span))
            }
        }
    }
}

/// Reads a single top-level s-expression.
pub fn parse_one(input: &str) -> Result<Sexpr, SexprError> {
    let mut reader = Reader::new(input);
    let expr = reader.read()?;
    reader.skip_trivia();
    if reader.peek().is_some() {
        return Err(SexprError {
            message: "trailing content after expression".into(),
            span: SourceSpan::point(reader.line, reader.column),
        });
    }
    Ok(expr)
}

/// Reads every top-level s-expression in the input.
pub fn parse_all(input: &str) -> Result<Vec<Sexpr>, SexprError> {
    let mut reader = Reader::new(input);
    let mut out = Vec::new();
    loop {
        reader.skip_trivia();
        if reader.peek().is_none() {
            return Ok(out);
        }
        out.push(reader.read()?);
    }
}
