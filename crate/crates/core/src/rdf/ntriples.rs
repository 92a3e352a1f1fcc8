//! Line-oriented N-Triples subset.
//!
//! Each non-empty line that is not a `#` comment holds one triple
//! terminated by `.`. Terms are `<iri>`, `"literal"` (with optional
//! `^^<datatype>` or `@lang`), or a compact bare token such as `t1`, which
//! is read as an IRI in [`LOCAL_NS`](super::LOCAL_NS). Blank nodes are
//! rejected.

use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use super::store::TripleStore;
use super::term::{is_bare_char, Iri, Literal, Term, Triple};

#[derive(Debug, Error)]
pub enum NtError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

impl NtError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        NtError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }
}

pub fn parse_ntriples(text: &str) -> Result<TripleStore, NtError> {
    read_ntriples(text.as_bytes())
}

pub fn read_ntriples<R: BufRead>(reader: R) -> Result<TripleStore, NtError> {
    let mut store = TripleStore::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(triple) = parse_line(&line, i + 1)? {
            store.insert(triple);
        }
    }
    Ok(store)
}

/// Writes triples in sorted order, one per line.
pub fn serialize_ntriples(store: &TripleStore) -> String {
    let mut out = String::new();
    for t in store.sorted() {
        let _ = writeln!(out, "{t}");
    }
    out
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
    text: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Cursor {
            chars: text.char_indices().collect(),
            pos: 0,
            line,
            text,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while self
            .peek()
            .is_some_and(|c| c == ' ' || c == '\t' || c == '\r')
        {
            self.pos += 1;
        }
    }

    fn err(&self, message: impl Into<String>) -> NtError {
        NtError::at(self.line, self.column(), message)
    }

    fn iri_ref(&mut self) -> Result<Iri, NtError> {
        let start_col = self.column();
        self.bump(); // '<'
        let mut iri = String::new();
        loop {
            match self.bump() {
                Some('>') => break,
                Some(c) if c == ' ' || c == '<' || c == '"' => {
                    return Err(self.err(format!("invalid character {c:?} in IRI")))
                }
                Some(c) => iri.push(c),
                None => return Err(NtError::at(self.line, start_col, "unterminated IRI")),
            }
        }
        Iri::new(iri).map_err(|e| NtError::at(self.line, start_col, e.to_string()))
    }

    fn bare(&mut self) -> Result<Iri, NtError> {
        let start = self.pos;
        while self.peek().is_some_and(is_bare_char) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a term"));
        }
        let byte_start = self.chars[start].0;
        let byte_end = self
            .chars
            .get(self.pos)
            .map_or(self.text.len(), |&(b, _)| b);
        Iri::local(&self.text[byte_start..byte_end]).map_err(|e| self.err(e.to_string()))
    }

    fn node(&mut self) -> Result<Iri, NtError> {
        match self.peek() {
            Some('<') => self.iri_ref(),
            Some('_') if self.chars.get(self.pos + 1).map(|&(_, c)| c) == Some(':') => {
                Err(self.err("blank nodes unsupported"))
            }
            Some('"') => Err(self.err("literal not allowed here")),
            _ => self.bare(),
        }
    }

    fn literal(&mut self) -> Result<Literal, NtError> {
        let start_col = self.column();
        self.bump(); // '"'
        let mut lexical = String::new();
        loop {
            match self.bump() {
                Some('"') => break,
                Some('\\') => {
                    let c = match self.bump() {
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('t') => '\t',
                        Some('"') => '"',
                        Some('\\') => '\\',
                        Some('\'') => '\'',
                        Some('u') => self.unicode_escape(4)?,
                        Some('U') => self.unicode_escape(8)?,
                        other => return Err(self.err(format!("invalid escape {other:?}"))),
                    };
                    lexical.push(c);
                }
                Some(c) => lexical.push(c),
                None => return Err(NtError::at(self.line, start_col, "unterminated literal")),
            }
        }
        match self.peek() {
            Some('^') => {
                self.bump();
                if self.bump() != Some('^') || self.peek() != Some('<') {
                    return Err(self.err("expected ^^<datatype>"));
                }
                let dt = self.iri_ref()?;
                Ok(Literal::new(lexical, Some(dt), None).expect("datatype only"))
            }
            Some('@') => {
                self.bump();
                let mut lang = String::new();
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == '-')
                {
                    lang.push(self.bump().unwrap());
                }
                if lang.is_empty() {
                    return Err(self.err("empty language tag"));
                }
                Ok(Literal::new(lexical, None, Some(lang)).expect("language only"))
            }
            _ => Ok(Literal::simple(lexical)),
        }
    }

    fn unicode_escape(&mut self, digits: usize) -> Result<char, NtError> {
        let mut code = 0u32;
        for _ in 0..digits {
            let d = self
                .bump()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.err("invalid unicode escape"))?;
            code = code * 16 + d;
        }
        char::from_u32(code).ok_or_else(|| self.err("invalid code point"))
    }

    fn object(&mut self) -> Result<Term, NtError> {
        match self.peek() {
            Some('"') => self.literal().map(Term::Literal),
            _ => self.node().map(Term::Iri),
        }
    }
}

fn parse_line(text: &str, line: usize) -> Result<Option<Triple>, NtError> {
    let mut cur = Cursor::new(text, line);
    cur.skip_ws();
    match cur.peek() {
        None | Some('#') => return Ok(None),
        _ => {}
    }
    let subject = cur.node()?;
    require_ws(&mut cur)?;
    let predicate = cur.node()?;
    require_ws(&mut cur)?;
    let object = cur.object()?;
    cur.skip_ws();
    if cur.peek() != Some('.') {
        return Err(cur.err("expected '.' at end of triple"));
    }
    cur.bump();
    cur.skip_ws();
    match cur.peek() {
        None | Some('#') => Ok(Some(Triple::new(subject, predicate, object))),
        Some(_) => Err(cur.err("unexpected content after '.'")),
    }
}

fn require_ws(cur: &mut Cursor<'_>) -> Result<(), NtError> {
    let before = cur.pos;
    cur.skip_ws();
    if cur.pos == before && !matches!(cur.peek(), Some('<') | Some('"')) {
        return Err(cur.err("expected whitespace between terms"));
    }
    Ok(())
}
