use std::collections::HashMap;

use super::QueryError;
use crate::rdf::{Iri, Literal};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    LBrace,
    RBrace,
    LParen,
    RParen,
    Dot,
    Star,
    Var(String),
    Iri(Iri),
    Literal(Literal),
    /// Bare word: a keyword, a number, or a compact local IRI.
    Word(String),
    /// `prefix:` declared in a PREFIX line, before resolution.
    PrefixDecl(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub offset: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Spanned>, QueryError> {
    let mut lexer = Lexer {
        text,
        chars: text.char_indices().collect(),
        pos: 0,
        prefixes: HashMap::new(),
    };
    lexer.run()
}

struct Lexer<'a> {
    text: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    prefixes: HashMap<String, String>,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

impl Lexer<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars
            .get(self.pos)
            .map_or(self.text.len(), |&(b, _)| b)
    }

    fn syntax(&self, at: usize, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            offset: at,
            message: message.into(),
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek().filter(|&c| f(c)) {
            out.push(c);
            self.pos += 1;
        }
        out
    }

    fn run(&mut self) -> Result<Vec<Spanned>, QueryError> {
        let mut out = Vec::new();
        let mut expect_prefix_decl = false;
        while let Some(c) = self.peek() {
            let offset = self.offset();
            if c.is_whitespace() {
                self.pos += 1;
                continue;
            }
            if c == '#' {
                self.take_while(|c| c != '\n');
                continue;
            }
            let tok = match c {
                '{' => {
                    self.pos += 1;
                    Tok::LBrace
                }
                '}' => {
                    self.pos += 1;
                    Tok::RBrace
                }
                '(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                ')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                '.' => {
                    self.pos += 1;
                    Tok::Dot
                }
                '*' => {
                    self.pos += 1;
                    Tok::Star
                }
                '?' | '$' => {
                    self.pos += 1;
                    let name = self.take_while(is_word_char);
                    if name.is_empty() {
                        return Err(self.syntax(offset, "empty variable name"));
                    }
                    Tok::Var(name)
                }
                '<' => Tok::Iri(self.iri_ref()?),
                '"' => Tok::Literal(self.literal()?),
                '_' if self.peek_at(1) == Some(':') => {
                    return Err(self.syntax(offset, "blank nodes unsupported"))
                }
                c if is_word_char(c) || c == ':' => {
                    let word = self.take_while(is_word_char);
                    if self.peek() == Some(':') {
                        self.pos += 1;
                        if expect_prefix_decl {
                            expect_prefix_decl = false;
                            Tok::PrefixDecl(word)
                        } else {
                            let local = self.take_while(is_word_char);
                            let ns = self.prefixes.get(&word).ok_or_else(|| {
                                self.syntax(offset, format!("undeclared prefix '{word}:'"))
                            })?;
                            let iri = Iri::new(format!("{ns}{local}"))
                                .map_err(|e| self.syntax(offset, e.to_string()))?;
                            Tok::Iri(iri)
                        }
                    } else {
                        Tok::Word(word)
                    }
                }
                other => return Err(self.syntax(offset, format!("unexpected character {other:?}"))),
            };
            // PREFIX p: <iri> is resolved during lexing so later prefixed
            // names expand immediately.
            if let Tok::Word(w) = &tok {
                if w.eq_ignore_ascii_case("PREFIX") {
                    expect_prefix_decl = true;
                }
            }
            if let (
                Tok::Iri(iri),
                Some(Spanned {
                    tok: Tok::PrefixDecl(p),
                    ..
                }),
            ) = (&tok, out.last())
            {
                self.prefixes.insert(p.clone(), iri.as_str().to_string());
            }
            out.push(Spanned { tok, offset });
        }
        Ok(out)
    }

    fn iri_ref(&mut self) -> Result<Iri, QueryError> {
        let start = self.offset();
        self.pos += 1;
        let mut iri = String::new();
        loop {
            match self.peek() {
                Some('>') => {
                    self.pos += 1;
                    break;
                }
                Some(c) if c.is_whitespace() || c == '<' || c == '"' => {
                    return Err(self.syntax(start, "malformed IRI"))
                }
                Some(c) => {
                    iri.push(c);
                    self.pos += 1;
                }
                None => return Err(self.syntax(start, "unterminated IRI")),
            }
        }
        Iri::new(iri).map_err(|e| self.syntax(start, e.to_string()))
    }

    fn literal(&mut self) -> Result<Literal, QueryError> {
        let start = self.offset();
        self.pos += 1;
        let mut lexical = String::new();
        loop {
            match self.peek() {
                Some('"') => {
                    self.pos += 1;
                    break;
                }
                Some('\\') => {
                    let esc = self.peek_at(1);
                    self.pos += 2;
                    lexical.push(match esc {
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('t') => '\t',
                        Some('"') => '"',
                        Some('\\') => '\\',
                        Some('\'') => '\'',
                        _ => return Err(self.syntax(start, "invalid escape in literal")),
                    });
                }
                Some(c) => {
                    lexical.push(c);
                    self.pos += 1;
                }
                None => return Err(self.syntax(start, "unterminated literal")),
            }
        }
        if self.peek() == Some('@') {
            self.pos += 1;
            let lang = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
            if lang.is_empty() {
                return Err(self.syntax(start, "empty language tag"));
            }
            return Ok(Literal::new(lexical, None, Some(lang)).expect("language only"));
        }
        if self.peek() == Some('^') && self.peek_at(1) == Some('^') {
            self.pos += 2;
            let dt = match self.peek() {
                Some('<') => self.iri_ref()?,
                _ => {
                    let at = self.offset();
                    let prefix = self.take_while(is_word_char);
                    if self.peek() != Some(':') {
                        return Err(self.syntax(at, "expected datatype IRI"));
                    }
                    self.pos += 1;
                    let local = self.take_while(is_word_char);
                    let ns = self
                        .prefixes
                        .get(&prefix)
                        .ok_or_else(|| self.syntax(at, format!("undeclared prefix '{prefix}:'")))?;
                    Iri::new(format!("{ns}{local}")).map_err(|e| self.syntax(at, e.to_string()))?
                }
            };
            return Ok(Literal::new(lexical, Some(dt), None).expect("datatype only"));
        }
        Ok(Literal::simple(lexical))
    }
}
