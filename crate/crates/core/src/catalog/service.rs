//! Endpoint service descriptions in a small Turtle subset.
//!
//! A description names its endpoint with `sd:endpoint` and lists fragments
//! as `dcterms:hasPart [ dc:description "<selector>" ; dcterms:source <iri> ]`.
//! Prefix labels are free; terms are matched on their expanded IRIs.

use std::collections::{BTreeSet, HashMap};

use super::{CatalogError, EndpointDescriptor, FragmentDef, Role};
use crate::query::parse_selector;

const SD_ENDPOINT: &str = "http://www.w3.org/ns/sparql-service-description#endpoint";
const DCTERMS_HAS_PART: &str = "http://purl.org/dc/terms/hasPart";
const DCTERMS_SOURCE: &str = "http://purl.org/dc/terms/source";
const DC_DESCRIPTION: &str = "http://purl.org/dc/elements/1.1/description";
const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDescription {
    pub endpoint: EndpointDescriptor,
    pub fragments: Vec<FragmentDef>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    PrefixDirective,
    PrefixNs(String),
    Iri(String),
    PName(String, String),
    Str(String),
    A,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Iri(String),
    Blank(usize),
    Literal(String),
}

fn err(line: usize, msg: impl std::fmt::Display) -> CatalogError {
    CatalogError::Description(format!("line {line}: {msg}"))
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, CatalogError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let word = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '-';
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '[' | ']' | ';' | ',' | '.' => {
                out.push((
                    match c {
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        ';' => Tok::Semi,
                        ',' => Tok::Comma,
                        _ => Tok::Dot,
                    },
                    line,
                ));
                i += 1;
            }
            '<' => {
                let start = i + 1;
                while i < chars.len() && chars[i] != '>' {
                    i += 1;
                }
                if i == chars.len() {
                    return Err(err(line, "unterminated IRI"));
                }
                out.push((Tok::Iri(chars[start..i].iter().collect()), line));
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(line, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some(&c) => s.push(c),
                                None => return Err(err(line, "unterminated string")),
                            }
                            i += 2;
                        }
                        Some(&c) => {
                            if c == '\n' {
                                line += 1;
                            }
                            s.push(c);
                            i += 1;
                        }
                    }
                }
                i += 1;
                out.push((Tok::Str(s), line));
            }
            '@' => {
                let start = i + 1;
                i += 1;
                while i < chars.len() && word(chars[i]) {
                    i += 1;
                }
                let kw: String = chars[start..i].iter().collect();
                if kw != "prefix" {
                    return Err(err(line, format!("unsupported directive @{kw}")));
                }
                out.push((Tok::PrefixDirective, line));
            }
            c if word(c) || c == ':' => {
                let start = i;
                while i < chars.len() && word(chars[i]) {
                    i += 1;
                }
                let head: String = chars[start..i].iter().collect();
                if chars.get(i) == Some(&':') {
                    i += 1;
                    let lstart = i;
                    while i < chars.len() && word(chars[i]) {
                        i += 1;
                    }
                    let local: String = chars[lstart..i].iter().collect();
                    if local.is_empty() {
                        out.push((Tok::PrefixNs(head), line));
                    } else {
                        out.push((Tok::PName(head, local), line));
                    }
                } else if head == "a" {
                    out.push((Tok::A, line));
                } else {
                    return Err(err(line, format!("unexpected token {head:?}")));
                }
            }
            other => return Err(err(line, format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    prefixes: HashMap<String, String>,
    blanks: usize,
    triples: Vec<(Node, String, Node)>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or(self.toks.last())
            .map_or(1, |(_, l)| *l)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expand(&self, prefix: &str, local: &str) -> Result<String, CatalogError> {
        self.prefixes
            .get(prefix)
            .map(|ns| format!("{ns}{local}"))
            .ok_or_else(|| err(self.line(), format!("undeclared prefix {prefix}:")))
    }

    fn document(&mut self) -> Result<(), CatalogError> {
        while let Some(tok) = self.peek().cloned() {
            match tok {
                Tok::PrefixDirective => {
                    self.pos += 1;
                    let Some(Tok::PrefixNs(p)) = self.next() else {
                        return Err(err(self.line(), "expected prefix label"));
                    };
                    let Some(Tok::Iri(ns)) = self.next() else {
                        return Err(err(self.line(), "expected namespace IRI"));
                    };
                    if self.next() != Some(Tok::Dot) {
                        return Err(err(self.line(), "expected '.' after @prefix"));
                    }
                    self.prefixes.insert(p, ns);
                }
                _ => {
                    let subject = self.subject()?;
                    self.predicate_objects(&subject, None)?;
                    if self.peek() == Some(&Tok::Dot) {
                        self.pos += 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn fresh_blank(&mut self) -> Node {
        self.blanks += 1;
        Node::Blank(self.blanks)
    }

    fn subject(&mut self) -> Result<Node, CatalogError> {
        match self.next() {
            Some(Tok::Iri(i)) => Ok(Node::Iri(i)),
            Some(Tok::PName(p, l)) => Ok(Node::Iri(self.expand(&p, &l)?)),
            Some(Tok::LBracket) => {
                let node = self.fresh_blank();
                if self.peek() == Some(&Tok::RBracket) {
                    self.pos += 1;
                } else {
                    self.predicate_objects(&node, Some(Tok::RBracket))?;
                    self.pos += 1;
                }
                Ok(node)
            }
            _ => Err(err(self.line(), "expected subject")),
        }
    }

    fn verb(&mut self) -> Result<String, CatalogError> {
        match self.next() {
            Some(Tok::Iri(i)) => Ok(i),
            Some(Tok::PName(p, l)) => self.expand(&p, &l),
            Some(Tok::A) => Ok(RDF_TYPE.to_string()),
            _ => Err(err(self.line(), "expected predicate")),
        }
    }

    fn object(&mut self) -> Result<Node, CatalogError> {
        match self.next() {
            Some(Tok::Iri(i)) => Ok(Node::Iri(i)),
            Some(Tok::PName(p, l)) => Ok(Node::Iri(self.expand(&p, &l)?)),
            Some(Tok::Str(s)) => Ok(Node::Literal(s)),
            Some(Tok::LBracket) => {
                let node = self.fresh_blank();
                if self.peek() != Some(&Tok::RBracket) {
                    self.predicate_objects(&node, Some(Tok::RBracket))?;
                }
                if self.next() != Some(Tok::RBracket) {
                    return Err(err(self.line(), "expected ']'"));
                }
                Ok(node)
            }
            _ => Err(err(self.line(), "expected object")),
        }
    }

    /// Reads `verb objects (; verb objects)*`, stopping before `until`, a
    /// '.' or the end of input.
    fn predicate_objects(
        &mut self,
        subject: &Node,
        until: Option<Tok>,
    ) -> Result<(), CatalogError> {
        loop {
            match self.peek() {
                None | Some(Tok::Dot) => return Ok(()),
                Some(t) if Some(t) == until.as_ref() => return Ok(()),
                _ => {}
            }
            let verb = self.verb()?;
            loop {
                let obj = self.object()?;
                self.triples.push((subject.clone(), verb.clone(), obj));
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            while self.peek() == Some(&Tok::Semi) {
                self.pos += 1;
            }
        }
    }
}

/// Parses a consumer endpoint description. Fragment ids are assigned as
/// `<endpoint>#frag<k>` in document order, starting at 1.
pub fn parse_service_description(text: &str) -> Result<ServiceDescription, CatalogError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        prefixes: HashMap::new(),
        blanks: 0,
        triples: Vec::new(),
    };
    p.document()?;
    let triples = p.triples;

    let endpoints: Vec<(&Node, &str)> = triples
        .iter()
        .filter(|(_, pred, _)| pred == SD_ENDPOINT)
        .map(|(s, _, o)| match o {
            Node::Iri(iri) => Ok((s, iri.as_str())),
            _ => Err(CatalogError::Description(
                "sd:endpoint must be an IRI".into(),
            )),
        })
        .collect::<Result<_, _>>()?;
    let (service, endpoint) = match endpoints.as_slice() {
        [one] => *one,
        [] => return Err(CatalogError::Description("missing sd:endpoint".into())),
        _ => {
            return Err(CatalogError::Description(
                "more than one sd:endpoint".into(),
            ))
        }
    };

    let value = |node: &Node, pred: &str| -> Option<&Node> {
        triples
            .iter()
            .find(|(s, p, _)| s == node && p == pred)
            .map(|(_, _, o)| o)
    };

    let mut fragments = Vec::new();
    for (s, pred, part) in &triples {
        if s != service || pred != DCTERMS_HAS_PART {
            continue;
        }
        let k = fragments.len() + 1;
        let description = match value(part, DC_DESCRIPTION) {
            Some(Node::Literal(d)) => d,
            _ => {
                return Err(CatalogError::Description(format!(
                    "fragment {k} lacks a dc:description literal"
                )))
            }
        };
        let source = match value(part, DCTERMS_SOURCE) {
            Some(Node::Iri(iri)) => iri.clone(),
            _ => {
                return Err(CatalogError::Description(format!(
                    "fragment {k} lacks a dcterms:source IRI"
                )))
            }
        };
        let id = format!("{endpoint}#frag{k}");
        let selector = parse_selector(description).map_err(|error| CatalogError::Selector {
            fragment: id.clone(),
            error,
        })?;
        fragments.push(FragmentDef {
            id,
            selector,
            source,
        });
    }

    Ok(ServiceDescription {
        endpoint: EndpointDescriptor {
            iri: endpoint.to_string(),
            role: Role::Consumer,
            fragments: fragments
                .iter()
                .map(|f| f.id.clone())
                .collect::<BTreeSet<_>>(),
        },
        fragments,
    })
}
