use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Namespace given to compact, unprefixed tokens such as `t1` or `p1`.
///
/// Such IRIs print back in their compact form, so fixtures can be written
/// the way the running example writes them.
pub const LOCAL_NS: &str = "urn:local:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("IRI must not be empty")]
    EmptyIri,
    #[error("variable name must not be empty")]
    EmptyVariable,
    #[error("literal cannot carry both a datatype and a language tag")]
    AnnotatedTwice,
    #[error("literal not allowed in {0} position")]
    LiteralPosition(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Iri(String);

impl Iri {
    pub fn new(iri: impl Into<String>) -> Result<Self, TermError> {
        let iri = iri.into();
        if iri.is_empty() {
            return Err(TermError::EmptyIri);
        }
        Ok(Iri(iri))
    }

    /// IRI for a compact token in [`LOCAL_NS`].
    pub fn local(name: &str) -> Result<Self, TermError> {
        if name.is_empty() {
            return Err(TermError::EmptyIri);
        }
        Ok(Iri(format!("{LOCAL_NS}{name}")))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The compact token, if this IRI lives in [`LOCAL_NS`] and the rest is
    /// a valid bare token.
    pub fn compact(&self) -> Option<&str> {
        self.0
            .strip_prefix(LOCAL_NS)
            .filter(|rest| is_bare_token(rest))
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.compact() {
            Some(name) => f.write_str(name),
            None => write!(f, "<{}>", self.0),
        }
    }
}

pub(crate) fn is_bare_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

pub(crate) fn is_bare_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_bare_char)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    lexical: String,
    datatype: Option<Iri>,
    language: Option<String>,
}

impl Literal {
    pub fn simple(lexical: impl Into<String>) -> Self {
        Literal {
            lexical: lexical.into(),
            datatype: None,
            language: None,
        }
    }

    pub fn new(
        lexical: impl Into<String>,
        datatype: Option<Iri>,
        language: Option<String>,
    ) -> Result<Self, TermError> {
        if datatype.is_some() && language.is_some() {
            return Err(TermError::AnnotatedTwice);
        }
        Ok(Literal {
            lexical: lexical.into(),
            datatype,
            language,
        })
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> Option<&Iri> {
        self.datatype.as_ref()
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("\"")?;
        for c in self.lexical.chars() {
            match c {
                '"' => f.write_str("\\\"")?,
                '\\' => f.write_str("\\\\")?,
                '\n' => f.write_str("\\n")?,
                '\r' => f.write_str("\\r")?,
                '\t' => f.write_str("\\t")?,
                c => write!(f, "{c}")?,
            }
        }
        f.write_str("\"")?;
        if let Some(dt) = &self.datatype {
            write!(f, "^^<{}>", dt.as_str())?;
        }
        if let Some(lang) = &self.language {
            write!(f, "@{lang}")?;
        }
        Ok(())
    }
}

/// A ground RDF term. Blank nodes do not exist in this model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(Iri),
    Literal(Literal),
}

impl Term {
    pub fn local(name: &str) -> Result<Self, TermError> {
        Iri::local(name).map(Term::Iri)
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Self {
        Term::Iri(iri)
    }
}

impl From<Literal> for Term {
    fn from(lit: Literal) -> Self {
        Term::Literal(lit)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => iri.fmt(f),
            Term::Literal(lit) => lit.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Result<Self, TermError> {
        let name = name.into();
        if name.is_empty() {
            return Err(TermError::EmptyVariable);
        }
        Ok(Variable(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternTerm {
    Ground(Term),
    Variable(Variable),
}

impl PatternTerm {
    pub fn var(name: &str) -> Result<Self, TermError> {
        Variable::new(name).map(PatternTerm::Variable)
    }

    pub fn as_variable(&self) -> Option<&Variable> {
        match self {
            PatternTerm::Variable(v) => Some(v),
            PatternTerm::Ground(_) => None,
        }
    }

    pub fn as_ground(&self) -> Option<&Term> {
        match self {
            PatternTerm::Ground(t) => Some(t),
            PatternTerm::Variable(_) => None,
        }
    }
}

impl From<Term> for PatternTerm {
    fn from(t: Term) -> Self {
        PatternTerm::Ground(t)
    }
}

impl From<Iri> for PatternTerm {
    fn from(iri: Iri) -> Self {
        PatternTerm::Ground(Term::Iri(iri))
    }
}

impl From<Variable> for PatternTerm {
    fn from(v: Variable) -> Self {
        PatternTerm::Variable(v)
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Ground(t) => t.fmt(f),
            PatternTerm::Variable(v) => v.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<Term>) -> Self {
        Triple {
            subject,
            predicate,
            object: object.into(),
        }
    }

    /// Shorthand for a triple of compact tokens, e.g. `Triple::local("t1", "p1", "c1")`.
    pub fn local(s: &str, p: &str, o: &str) -> Result<Self, TermError> {
        Ok(Triple::new(Iri::local(s)?, Iri::local(p)?, Iri::local(o)?))
    }

    fn position(&self, i: usize) -> Term {
        match i {
            0 => Term::Iri(self.subject.clone()),
            1 => Term::Iri(self.predicate.clone()),
            _ => self.object.clone(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// A triple pattern. Subject and predicate never hold a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriplePattern {
    subject: PatternTerm,
    predicate: PatternTerm,
    object: PatternTerm,
}

impl TriplePattern {
    pub fn new(
        subject: PatternTerm,
        predicate: PatternTerm,
        object: PatternTerm,
    ) -> Result<Self, TermError> {
        if matches!(&subject, PatternTerm::Ground(t) if t.is_literal()) {
            return Err(TermError::LiteralPosition("subject"));
        }
        if matches!(&predicate, PatternTerm::Ground(t) if t.is_literal()) {
            return Err(TermError::LiteralPosition("predicate"));
        }
        Ok(TriplePattern {
            subject,
            predicate,
            object,
        })
    }

    pub fn subject(&self) -> &PatternTerm {
        &self.subject
    }

    pub fn predicate(&self) -> &PatternTerm {
        &self.predicate
    }

    pub fn object(&self) -> &PatternTerm {
        &self.object
    }

    pub fn positions(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    /// Builds a pattern from three position terms, checking the
    /// literal-position invariant.
    pub fn from_positions(terms: [PatternTerm; 3]) -> Result<Self, TermError> {
        let [s, p, o] = terms;
        TriplePattern::new(s, p, o)
    }

    /// Distinct variables in order of first occurrence.
    pub fn variables(&self) -> Vec<&Variable> {
        let mut out: Vec<&Variable> = Vec::new();
        for v in self
            .positions()
            .into_iter()
            .filter_map(PatternTerm::as_variable)
        {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    pub fn is_ground(&self) -> bool {
        self.positions().iter().all(|t| t.as_ground().is_some())
    }

    /// Matches a ground triple, honoring repeated variables.
    pub fn match_triple(&self, triple: &Triple) -> Option<SolutionMapping> {
        let mut mapping = SolutionMapping::new();
        for (i, pt) in self.positions().into_iter().enumerate() {
            let value = triple.position(i);
            match pt {
                PatternTerm::Ground(t) => {
                    if *t != value {
                        return None;
                    }
                }
                PatternTerm::Variable(v) => match mapping.get(v) {
                    Some(bound) if *bound != value => return None,
                    Some(_) => {}
                    None => mapping.bind(v.clone(), value),
                },
            }
        }
        Some(mapping)
    }

    /// Replaces variables bound in `mapping` by their values.
    pub fn substitute(&self, mapping: &SolutionMapping) -> TriplePattern {
        let sub = |pt: &PatternTerm| match pt {
            PatternTerm::Variable(v) => match mapping.get(v) {
                Some(t) => PatternTerm::Ground(t.clone()),
                None => pt.clone(),
            },
            PatternTerm::Ground(_) => pt.clone(),
        };
        // A literal can only land in subject/predicate if the mapping came
        // from elsewhere; such a pattern can never match, so keep the
        // variable there instead of violating the invariant.
        let subject = match sub(&self.subject) {
            PatternTerm::Ground(Term::Literal(_)) => self.subject.clone(),
            other => other,
        };
        let predicate = match sub(&self.predicate) {
            PatternTerm::Ground(Term::Literal(_)) => self.predicate.clone(),
            other => other,
        };
        TriplePattern {
            subject,
            predicate,
            object: sub(&self.object),
        }
    }

    /// Whether a literal binding would be forced into subject/predicate.
    pub(crate) fn binds_literal_to_node(&self, mapping: &SolutionMapping) -> bool {
        [&self.subject, &self.predicate].into_iter().any(|pt| {
            pt.as_variable()
                .and_then(|v| mapping.get(v))
                .is_some_and(Term::is_literal)
        })
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// A partial map from variables to ground terms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SolutionMapping(BTreeMap<Variable, Term>);

impl SolutionMapping {
    pub fn new() -> Self {
        SolutionMapping(BTreeMap::new())
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn bind(&mut self, v: Variable, t: Term) {
        self.0.insert(v, t);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.0.iter()
    }

    /// Merges two mappings when they agree on shared variables.
    pub fn merge(&self, other: &SolutionMapping) -> Option<SolutionMapping> {
        let mut out = self.clone();
        for (v, t) in other.iter() {
            match out.0.get(v) {
                Some(existing) if existing != t => return None,
                Some(_) => {}
                None => {
                    out.0.insert(v.clone(), t.clone());
                }
            }
        }
        Some(out)
    }
}

impl FromIterator<(Variable, Term)> for SolutionMapping {
    fn from_iter<I: IntoIterator<Item = (Variable, Term)>>(iter: I) -> Self {
        SolutionMapping(iter.into_iter().collect())
    }
}

impl fmt::Display for SolutionMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}={}", v.name(), t)?;
        }
        f.write_str("}")
    }
}
