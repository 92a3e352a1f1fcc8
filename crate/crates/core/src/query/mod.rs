//! The query subset: `SELECT`/`CONSTRUCT WHERE` over unions of basic graph
//! patterns, with `DISTINCT`, `ORDER BY` and `LIMIT`.
//!
//! Bodies are normalized to a flat union of BGPs. Nested unions of pure
//! BGPs are flattened; a group that mixes triple patterns with a nested
//! `UNION` at the same level is rejected instead of being distributed.

mod lexer;

use std::fmt;

use thiserror::Error;

use crate::rdf::{Iri, PatternTerm, Term, TermError, TriplePattern, Variable};
use lexer::{tokenize, Spanned, Tok};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported operator {0}")]
    UnsupportedOperator(String),
    #[error("selector must be a single triple pattern")]
    SelectorArity,
    #[error("variable {0} is not bound by the query body")]
    UnboundVariable(String),
    #[error("{0}")]
    Term(#[from] TermError),
}

const UNSUPPORTED: &[&str] = &[
    "OPTIONAL", "FILTER", "SERVICE", "MINUS", "BIND", "VALUES", "GRAPH", "OFFSET", "GROUP",
    "HAVING", "DESC", "ASK", "DESCRIBE", "FROM", "REDUCED", "NOT", "EXISTS",
];

const KEYWORDS: &[&str] = &[
    "SELECT",
    "CONSTRUCT",
    "WHERE",
    "DISTINCT",
    "UNION",
    "ORDER",
    "BY",
    "LIMIT",
    "PREFIX",
    "ASC",
];

/// A non-empty conjunction of triple patterns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasicGraphPattern(Vec<TriplePattern>);

impl BasicGraphPattern {
    pub fn new(patterns: Vec<TriplePattern>) -> Option<Self> {
        (!patterns.is_empty()).then_some(BasicGraphPattern(patterns))
    }

    pub fn patterns(&self) -> &[TriplePattern] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn variables(&self) -> Vec<&Variable> {
        let mut out: Vec<&Variable> = Vec::new();
        for tp in &self.0 {
            for v in tp.variables() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for BasicGraphPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tp) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" . ")?;
            }
            write!(f, "{tp}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryForm {
    Select,
    Construct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Projection {
    All,
    Vars(Vec<Variable>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub form: QueryForm,
    pub distinct: bool,
    pub projection: Projection,
    pub body: Vec<BasicGraphPattern>,
    pub order_by: Vec<Variable>,
    pub limit: Option<u64>,
}

impl Query {
    /// Triple patterns of every branch, in order, duplicates included.
    pub fn triple_patterns(&self) -> impl Iterator<Item = &TriplePattern> {
        self.body.iter().flat_map(|b| b.patterns().iter())
    }

    /// Distinct triple patterns in order of first appearance.
    pub fn distinct_patterns(&self) -> Vec<&TriplePattern> {
        let mut out: Vec<&TriplePattern> = Vec::new();
        for tp in self.triple_patterns() {
            if !out.contains(&tp) {
                out.push(tp);
            }
        }
        out
    }

    /// Variables of the body in order of first appearance.
    pub fn body_variables(&self) -> Vec<&Variable> {
        let mut out: Vec<&Variable> = Vec::new();
        for b in &self.body {
            for v in b.variables() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Columns of the result tuples. `CONSTRUCT` reports the pattern's
    /// variables, like `SELECT *`.
    pub fn result_variables(&self) -> Vec<Variable> {
        match &self.projection {
            Projection::Vars(vars) => vars.clone(),
            Projection::All => self.body_variables().into_iter().cloned().collect(),
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.limit.is_some() && self.order_by.is_empty() {
            out.push("LIMIT without ORDER BY gives an order-dependent answer".to_string());
        }
        out
    }

    fn validate(&self) -> Result<(), QueryError> {
        let bound = self.body_variables();
        let projected = match &self.projection {
            Projection::Vars(v) => v.as_slice(),
            Projection::All => &[],
        };
        for v in projected.iter().chain(self.order_by.iter()) {
            if !bound.contains(&v) {
                return Err(QueryError::UnboundVariable(v.to_string()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.form {
            QueryForm::Select => {
                f.write_str("SELECT ")?;
                if self.distinct {
                    f.write_str("DISTINCT ")?;
                }
                match &self.projection {
                    Projection::All => f.write_str("*")?,
                    Projection::Vars(vars) => {
                        for (i, v) in vars.iter().enumerate() {
                            if i > 0 {
                                f.write_str(" ")?;
                            }
                            write!(f, "{v}")?;
                        }
                    }
                }
                f.write_str(" WHERE { ")?;
            }
            QueryForm::Construct => f.write_str("CONSTRUCT WHERE { ")?,
        }
        if self.body.len() == 1 {
            write!(f, "{}", self.body[0])?;
        } else {
            for (i, bgp) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(" UNION ")?;
                }
                write!(f, "{{ {bgp} }}")?;
            }
        }
        f.write_str(" }")?;
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY")?;
            for v in &self.order_by {
                write!(f, " {v}")?;
            }
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

/// A fragment selector: a `CONSTRUCT WHERE { tp }` with one triple pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Selector(pub TriplePattern);

impl Selector {
    pub fn pattern(&self) -> &TriplePattern {
        &self.0
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CONSTRUCT WHERE {{ {} }}", self.0)
    }
}

pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let mut p = Parser::new(text)?;
    let query = p.query()?;
    p.expect_end()?;
    query.validate()?;
    Ok(query)
}

pub fn parse_selector(text: &str) -> Result<Selector, QueryError> {
    let mut p = Parser::new(text)?;
    p.prologue()?;
    p.keyword("CONSTRUCT")?;
    p.keyword("WHERE")?;
    let body = p.group()?;
    p.expect_end()?;
    match body.as_slice() {
        [bgp] if bgp.len() == 1 => Ok(Selector(bgp.patterns()[0].clone())),
        _ => Err(QueryError::SelectorArity),
    }
}

/// Parses a single triple pattern such as `?x p1 ?y`.
pub fn parse_pattern(text: &str) -> Result<TriplePattern, QueryError> {
    let mut p = Parser::new(text)?;
    let tp = p.triple_pattern()?;
    if p.peek() == Some(&Tok::Dot) {
        p.pos += 1;
    }
    p.expect_end()?;
    Ok(tp)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, QueryError> {
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
            len: text.len(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |s| s.offset)
    }

    fn err(&self, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn peek_keyword(&self) -> Option<String> {
        match self.peek() {
            Some(Tok::Word(w)) => Some(w.to_ascii_uppercase()),
            _ => None,
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        self.peek_keyword().as_deref() == Some(kw)
    }

    fn check_unsupported(&self) -> Result<(), QueryError> {
        if let Some(kw) = self.peek_keyword() {
            if UNSUPPORTED.contains(&kw.as_str()) {
                return Err(QueryError::UnsupportedOperator(kw));
            }
        }
        Ok(())
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        self.check_unsupported()?;
        if self.is_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {kw}")))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), QueryError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.check_unsupported()?;
            Err(self.err(format!("expected {what}")))
        }
    }

    fn expect_end(&self) -> Result<(), QueryError> {
        self.check_unsupported()?;
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.err("unexpected trailing input")),
        }
    }

    fn prologue(&mut self) -> Result<(), QueryError> {
        while self.is_keyword("PREFIX") {
            self.pos += 1;
            match self.peek() {
                Some(Tok::PrefixDecl(_)) => self.pos += 1,
                _ => return Err(self.err("expected prefix name")),
            }
            match self.peek() {
                Some(Tok::Iri(_)) => self.pos += 1,
                _ => return Err(self.err("expected namespace IRI")),
            }
        }
        Ok(())
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        self.prologue()?;
        self.check_unsupported()?;
        let form = match self.peek_keyword().as_deref() {
            Some("SELECT") => QueryForm::Select,
            Some("CONSTRUCT") => QueryForm::Construct,
            _ => return Err(self.err("expected SELECT or CONSTRUCT")),
        };
        self.pos += 1;
        let mut distinct = false;
        let mut projection = Projection::All;
        match form {
            QueryForm::Select => {
                self.check_unsupported()?;
                if self.is_keyword("DISTINCT") {
                    distinct = true;
                    self.pos += 1;
                }
                if self.peek() == Some(&Tok::Star) {
                    self.pos += 1;
                } else {
                    let mut vars = Vec::new();
                    while let Some(Tok::Var(name)) = self.peek() {
                        vars.push(Variable::new(name.clone())?);
                        self.pos += 1;
                    }
                    if vars.is_empty() {
                        return Err(self.err("expected '*' or projected variables"));
                    }
                    projection = Projection::Vars(vars);
                }
                if self.is_keyword("WHERE") {
                    self.pos += 1;
                }
            }
            QueryForm::Construct => {
                if self.peek() == Some(&Tok::LBrace) {
                    return Err(
                        self.err("CONSTRUCT templates are not supported; use CONSTRUCT WHERE")
                    );
                }
                self.keyword("WHERE")?;
            }
        }
        let body = self.group()?;
        let mut order_by = Vec::new();
        if self.is_keyword("ORDER") {
            self.pos += 1;
            self.keyword("BY")?;
            loop {
                self.check_unsupported()?;
                match self.peek() {
                    Some(Tok::Var(name)) => {
                        order_by.push(Variable::new(name.clone())?);
                        self.pos += 1;
                    }
                    Some(Tok::Word(w)) if w.eq_ignore_ascii_case("ASC") => {
                        self.pos += 1;
                        self.expect(Tok::LParen, "'('")?;
                        match self.peek() {
                            Some(Tok::Var(name)) => order_by.push(Variable::new(name.clone())?),
                            _ => return Err(self.err("expected variable")),
                        }
                        self.pos += 1;
                        self.expect(Tok::RParen, "')'")?;
                    }
                    _ => break,
                }
            }
            if order_by.is_empty() {
                return Err(self.err("expected ORDER BY variables"));
            }
        }
        let mut limit = None;
        if self.is_keyword("LIMIT") {
            self.pos += 1;
            match self.peek() {
                Some(Tok::Word(w)) => {
                    let n = w
                        .parse::<u64>()
                        .map_err(|_| self.err("expected LIMIT count"))?;
                    limit = Some(n);
                    self.pos += 1;
                }
                _ => return Err(self.err("expected LIMIT count")),
            }
        }
        Ok(Query {
            form,
            distinct,
            projection,
            body,
            order_by,
            limit,
        })
    }

    /// `{ ... }` as a flat union of BGPs.
    fn group(&mut self) -> Result<Vec<BasicGraphPattern>, QueryError> {
        self.expect(Tok::LBrace, "'{'")?;
        self.check_unsupported()?;
        let out = if self.peek() == Some(&Tok::LBrace) {
            let mut branches = self.group()?;
            while self.is_keyword("UNION") {
                self.pos += 1;
                branches.extend(self.group()?);
            }
            self.check_unsupported()?;
            if self.peek() != Some(&Tok::RBrace) {
                return Err(self.err(
                    "groups mixing triple patterns and UNION at the same level are not supported",
                ));
            }
            branches
        } else {
            let mut patterns = Vec::new();
            loop {
                self.check_unsupported()?;
                match self.peek() {
                    Some(Tok::RBrace) => break,
                    Some(Tok::LBrace) => {
                        return Err(self.err(
                            "groups mixing triple patterns and UNION at the same level are not supported",
                        ))
                    }
                    _ => {}
                }
                patterns.push(self.triple_pattern()?);
                match self.peek() {
                    Some(Tok::Dot) => self.pos += 1,
                    Some(Tok::RBrace) => break,
                    _ => {
                        self.check_unsupported()?;
                        return Err(self.err("expected '.' or '}'"));
                    }
                }
            }
            match BasicGraphPattern::new(patterns) {
                Some(bgp) => vec![bgp],
                None => return Err(self.err("empty group pattern")),
            }
        };
        self.expect(Tok::RBrace, "'}'")?;
        Ok(out)
    }

    fn pattern_term(&mut self) -> Result<PatternTerm, QueryError> {
        self.check_unsupported()?;
        let term = match self.peek() {
            Some(Tok::Var(name)) => PatternTerm::Variable(Variable::new(name.clone())?),
            Some(Tok::Iri(iri)) => PatternTerm::Ground(Term::Iri(iri.clone())),
            Some(Tok::Literal(lit)) => PatternTerm::Ground(Term::Literal(lit.clone())),
            Some(Tok::Word(w)) if !KEYWORDS.contains(&w.to_ascii_uppercase().as_str()) => {
                PatternTerm::Ground(Term::Iri(Iri::local(w)?))
            }
            _ => return Err(self.err("expected a term")),
        };
        self.pos += 1;
        Ok(term)
    }

    fn triple_pattern(&mut self) -> Result<TriplePattern, QueryError> {
        let at = self.offset();
        let s = self.pattern_term()?;
        let p = self.pattern_term()?;
        let o = self.pattern_term()?;
        TriplePattern::new(s, p, o).map_err(|e| QueryError::Syntax {
            offset: at,
            message: e.to_string(),
        })
    }
}
