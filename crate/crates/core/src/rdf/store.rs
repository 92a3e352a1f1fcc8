use std::collections::{BTreeSet, HashMap, HashSet};

use super::term::{Iri, PatternTerm, SolutionMapping, Term, Triple, TriplePattern};

/// In-memory set of triples with subject, predicate and object indexes.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
    by_subject: HashMap<Iri, Vec<usize>>,
    by_predicate: HashMap<Iri, Vec<usize>>,
    by_object: HashMap<Term, Vec<usize>>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` when the triple was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        if self.seen.contains(&triple) {
            return false;
        }
        let idx = self.triples.len();
        self.by_subject
            .entry(triple.subject.clone())
            .or_default()
            .push(idx);
        self.by_predicate
            .entry(triple.predicate.clone())
            .or_default()
            .push(idx);
        self.by_object
            .entry(triple.object.clone())
            .or_default()
            .push(idx);
        self.seen.insert(triple.clone());
        self.triples.push(triple);
        true
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.seen.contains(triple)
    }

    /// Triples in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    /// Triples in sorted order.
    pub fn sorted(&self) -> Vec<&Triple> {
        let mut out: Vec<&Triple> = self.triples.iter().collect();
        out.sort();
        out
    }

    pub fn predicates(&self) -> BTreeSet<&Iri> {
        self.by_predicate.keys().collect()
    }

    fn candidates(&self, tp: &TriplePattern) -> Box<dyn Iterator<Item = &Triple> + '_> {
        let mut lists: Vec<Option<&Vec<usize>>> = Vec::with_capacity(3);
        if let PatternTerm::Ground(Term::Iri(iri)) = tp.subject() {
            lists.push(self.by_subject.get(iri));
        }
        if let PatternTerm::Ground(Term::Iri(iri)) = tp.predicate() {
            lists.push(self.by_predicate.get(iri));
        }
        if let PatternTerm::Ground(t) = tp.object() {
            lists.push(self.by_object.get(t));
        }
        // A bound position without an index entry means nothing matches.
        if lists.iter().any(Option::is_none) {
            return Box::new(std::iter::empty());
        }
        match lists.into_iter().flatten().min_by_key(|l| l.len()) {
            Some(list) => Box::new(list.iter().map(|&i| &self.triples[i])),
            None => Box::new(self.triples.iter()),
        }
    }

    /// Triples that match `tp`.
    pub fn matching_triples<'a>(
        &'a self,
        tp: &'a TriplePattern,
    ) -> impl Iterator<Item = &'a Triple> + 'a {
        self.candidates(tp)
            .filter(move |t| tp.match_triple(t).is_some())
    }

    /// All mappings μ over the variables of `tp` with μ(tp) in the store.
    pub fn match_pattern(&self, tp: &TriplePattern) -> BTreeSet<SolutionMapping> {
        self.candidates(tp)
            .filter_map(|t| tp.match_triple(t))
            .collect()
    }

    /// Whether at least one triple matches `tp`.
    pub fn ask(&self, tp: &TriplePattern) -> bool {
        self.candidates(tp).any(|t| tp.match_triple(t).is_some())
    }

    /// Triples matching `selector`, as a new store.
    pub fn select(&self, selector: &TriplePattern) -> TripleStore {
        let mut out = TripleStore::new();
        for t in self.matching_triples(selector) {
            out.insert(t.clone());
        }
        out
    }

    pub fn extend_from(&mut self, other: &TripleStore) {
        for t in other.iter() {
            self.insert(t.clone());
        }
    }
}

impl FromIterator<Triple> for TripleStore {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut store = TripleStore::new();
        for t in iter {
            store.insert(t);
        }
        store
    }
}

impl PartialEq for TripleStore {
    fn eq(&self, other: &Self) -> bool {
        self.seen == other.seen
    }
}

impl Eq for TripleStore {}
