use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::SelectionError;
use crate::catalog::endpoint_order;
use crate::rdf::TriplePattern;

/// One element `s_{i,j}`: the `j`-th endpoint set of the `i`-th triple
/// pattern of a BGP, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element {
    pub pattern: usize,
    pub group: usize,
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}_{}", self.pattern, self.group)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetCoverInstance {
    pub elements: BTreeSet<Element>,
    pub sets: BTreeMap<String, BTreeSet<Element>>,
    /// Endpoints of `sets` that are public; used for tie-breaking.
    pub public: BTreeSet<String>,
}

impl SetCoverInstance {
    pub fn is_cover(&self, chosen: &BTreeSet<String>) -> bool {
        let covered: BTreeSet<Element> = chosen
            .iter()
            .filter_map(|e| self.sets.get(e))
            .flatten()
            .copied()
            .collect();
        covered == self.elements
    }
}

fn braces<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let parts: Vec<String> = items.into_iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

impl fmt::Display for SetCoverInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "S = {}", braces(&self.elements))?;
        let sets: Vec<String> = self
            .sets
            .iter()
            .map(|(e, s)| format!("{e} -> {}", braces(s)))
            .collect();
        write!(f, "C = {{{}}}", sets.join(", "))
    }
}

/// Builds the covering instance of one BGP from its patterns' endpoint
/// sets. Patterns are numbered in the order given.
pub fn build_cover_instance(
    patterns: &[TriplePattern],
    groups: &BTreeMap<TriplePattern, Vec<BTreeSet<String>>>,
    is_public: impl Fn(&str) -> bool,
) -> SetCoverInstance {
    let mut instance = SetCoverInstance {
        elements: BTreeSet::new(),
        sets: BTreeMap::new(),
        public: BTreeSet::new(),
    };
    for (i, tp) in patterns.iter().enumerate() {
        let Some(sets) = groups.get(tp) else { continue };
        for (j, endpoints) in sets.iter().enumerate() {
            let el = Element {
                pattern: i + 1,
                group: j + 1,
            };
            instance.elements.insert(el);
            for e in endpoints {
                instance.sets.entry(e.clone()).or_default().insert(el);
                if is_public(e) {
                    instance.public.insert(e.clone());
                }
            }
        }
    }
    instance
}

/// Classic greedy cover: repeatedly takes the endpoint covering most
/// uncovered elements, preferring consumers, then the smaller IRI.
pub fn greedy_set_cover(instance: &SetCoverInstance) -> Result<BTreeSet<String>, SelectionError> {
    let reachable: BTreeSet<Element> = instance.sets.values().flatten().copied().collect();
    let missing: Vec<String> = instance
        .elements
        .difference(&reachable)
        .map(Element::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(SelectionError::Uncoverable(missing.join(", ")));
    }
    let mut uncovered = instance.elements.clone();
    let mut chosen = BTreeSet::new();
    while !uncovered.is_empty() {
        let best = instance
            .sets
            .iter()
            .map(|(e, s)| (e, s.intersection(&uncovered).count()))
            .filter(|(_, gain)| *gain > 0)
            .min_by(|(a, ga), (b, gb)| {
                gb.cmp(ga).then_with(|| {
                    endpoint_order(
                        instance.public.contains(*a),
                        a,
                        instance.public.contains(*b),
                        b,
                    )
                })
            })
            .map(|(e, _)| e)
            .expect("every uncovered element is reachable");
        for el in &instance.sets[best] {
            uncovered.remove(el);
        }
        chosen.insert(best.clone());
    }
    Ok(chosen)
}
