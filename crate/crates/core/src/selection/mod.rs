//! Source selection: fragment grouping, public-endpoint elimination,
//! per-BGP set covering and the final endpoint pick, plus an ASK-based
//! baseline that contacts every endpoint with matching data.

mod cover;
mod grouping;

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::catalog::{endpoint_order, FederationCatalog, FragmentDef};
use crate::containment::{ContainmentRelation, Probe, ProbeError};
use crate::query::Query;
use crate::rdf::TriplePattern;

pub use cover::{build_cover_instance, greedy_set_cover, Element, SetCoverInstance};
pub use grouping::{
    get_endpoints, group_fragments, render_groups, FragmentGroup, Grouping, GroupingStep,
    TraceEntry,
};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error("no relevant fragment for triple pattern {0}")]
    NoRelevantFragment(String),
    #[error("uncoverable instance: no endpoint covers {0}")]
    Uncoverable(String),
    #[error("cover left no endpoint for {0}")]
    EmptyAfterFilter(String),
}

/// What to do with a triple pattern no fragment is relevant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fallback {
    /// Ask every public endpoint and keep those with matching data.
    #[default]
    PublicAsk,
    Fail,
}

impl FromStr for Fallback {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "public-ask" => Ok(Fallback::PublicAsk),
            "fail" => Ok(Fallback::Fail),
            other => Err(format!(
                "unknown fallback '{other}' (expected public-ask or fail)"
            )),
        }
    }
}

impl fmt::Display for Fallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fallback::PublicAsk => "public-ask",
            Fallback::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SelectOptions {
    pub fallback: Fallback,
}

/// The map from triple patterns to the endpoints that evaluate them, in
/// order of first appearance in the query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectionMap {
    entries: Vec<(TriplePattern, BTreeSet<String>)>,
}

impl SelectionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tp: TriplePattern, endpoints: BTreeSet<String>) {
        match self.entries.iter_mut().find(|(t, _)| *t == tp) {
            Some((_, e)) => *e = endpoints,
            None => self.entries.push((tp, endpoints)),
        }
    }

    pub fn get(&self, tp: &TriplePattern) -> Option<&BTreeSet<String>> {
        self.entries.iter().find(|(t, _)| t == tp).map(|(_, e)| e)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TriplePattern, &BTreeSet<String>)> {
        self.entries.iter().map(|(t, e)| (t, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of selected sources, summed over triple patterns.
    pub fn nss(&self) -> usize {
        self.entries.iter().map(|(_, e)| e.len()).sum()
    }

    /// Number of selected public sources, summed over triple patterns.
    pub fn nsps(&self, catalog: &FederationCatalog) -> usize {
        self.entries
            .iter()
            .map(|(_, e)| e.iter().filter(|x| catalog.is_public(x)).count())
            .sum()
    }
}

impl fmt::Display for SelectionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (tp, e) in &self.entries {
            let names: Vec<&str> = e.iter().map(String::as_str).collect();
            writeln!(f, "  {tp} -> {{{}}}", names.join(", "))?;
        }
        Ok(())
    }
}

/// Caches ASK answers within one selection run and counts the requests
/// actually forwarded.
pub struct CachingProbe<'a> {
    inner: &'a dyn Probe,
    fragments: RefCell<HashMap<(String, String, TriplePattern), bool>>,
    endpoints: RefCell<HashMap<(String, TriplePattern), bool>>,
    issued: Cell<usize>,
}

impl<'a> CachingProbe<'a> {
    pub fn new(inner: &'a dyn Probe) -> Self {
        CachingProbe {
            inner,
            fragments: RefCell::default(),
            endpoints: RefCell::default(),
            issued: Cell::new(0),
        }
    }

    pub fn issued(&self) -> usize {
        self.issued.get()
    }
}

impl Probe for CachingProbe<'_> {
    fn ask_fragment(
        &self,
        endpoint: &str,
        fragment: &FragmentDef,
        pattern: &TriplePattern,
    ) -> Result<bool, ProbeError> {
        let key = (endpoint.to_string(), fragment.id.clone(), pattern.clone());
        if let Some(&hit) = self.fragments.borrow().get(&key) {
            return Ok(hit);
        }
        self.issued.set(self.issued.get() + 1);
        let answer = self.inner.ask_fragment(endpoint, fragment, pattern)?;
        self.fragments.borrow_mut().insert(key, answer);
        Ok(answer)
    }

    fn ask_endpoint(&self, endpoint: &str, pattern: &TriplePattern) -> Result<bool, ProbeError> {
        let key = (endpoint.to_string(), pattern.clone());
        if let Some(&hit) = self.endpoints.borrow().get(&key) {
            return Ok(hit);
        }
        self.issued.set(self.issued.get() + 1);
        let answer = self.inner.ask_endpoint(endpoint, pattern)?;
        self.endpoints.borrow_mut().insert(key, answer);
        Ok(answer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternReport {
    pub pattern: TriplePattern,
    pub trace: Vec<TraceEntry>,
    pub groups: Vec<FragmentGroup>,
    /// Endpoint sets after public elimination, before covering.
    pub endpoints: Vec<BTreeSet<String>>,
    /// Set when no fragment was relevant and public endpoints were asked.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgpReport {
    pub patterns: Vec<TriplePattern>,
    pub instance: SetCoverInstance,
    pub cover: BTreeSet<String>,
    /// Endpoint sets of each pattern once restricted to the cover.
    pub filtered: Vec<(TriplePattern, Vec<BTreeSet<String>>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Diagnostics {
    pub patterns: Vec<PatternReport>,
    pub bgps: Vec<BgpReport>,
    pub probes: usize,
}

impl Diagnostics {
    pub fn pattern(&self, tp: &TriplePattern) -> Option<&PatternReport> {
        self.patterns.iter().find(|p| &p.pattern == tp)
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub map: SelectionMap,
    pub diagnostics: Diagnostics,
}

impl Selection {
    /// Stable text rendering of the diagnostics and the final map.
    pub fn render(&self, catalog: &FederationCatalog) -> String {
        let mut out = String::new();
        let d = &self.diagnostics;
        for (i, p) in d.patterns.iter().enumerate() {
            let _ = writeln!(out, "pattern {}: {}", i + 1, p.pattern);
            for entry in &p.trace {
                let _ = writeln!(out, "  {entry}");
            }
            if p.fallback {
                let _ = writeln!(out, "  fallback: public endpoints asked");
            }
            let _ = writeln!(out, "  G = {}", render_sets(&p.endpoints));
        }
        for (i, b) in d.bgps.iter().enumerate() {
            let tps: Vec<String> = b.patterns.iter().map(|t| t.to_string()).collect();
            let _ = writeln!(out, "bgp {}: {}", i + 1, tps.join(" . "));
            for line in b.instance.to_string().lines() {
                let _ = writeln!(out, "  {line}");
            }
            let _ = writeln!(out, "  C' = {}", render_set(&b.cover));
            for (tp, sets) in &b.filtered {
                let _ = writeln!(out, "  G({tp}) = {}", render_sets(sets));
            }
        }
        let _ = writeln!(out, "D");
        out.push_str(&self.map.to_string());
        let _ = writeln!(
            out,
            "nss={} nsps={} probes={}",
            self.map.nss(),
            self.map.nsps(catalog),
            d.probes
        );
        out
    }
}

pub fn render_set(set: &BTreeSet<String>) -> String {
    let names: Vec<&str> = set.iter().map(String::as_str).collect();
    format!("{{{}}}", names.join(", "))
}

pub fn render_sets(sets: &[BTreeSet<String>]) -> String {
    if sets.is_empty() {
        return "{ }".to_string();
    }
    let parts: Vec<String> = sets.iter().map(render_set).collect();
    format!("{{ {} }}", parts.join(", "))
}

fn pick(set: &BTreeSet<String>, catalog: &FederationCatalog) -> String {
    set.iter()
        .min_by(|a, b| endpoint_order(catalog.is_public(a), a, catalog.is_public(b), b))
        .expect("endpoint sets are non-empty")
        .clone()
}

/// Runs the full selection for `query`.
pub fn fedra_select(
    query: &Query,
    catalog: &FederationCatalog,
    containment: &ContainmentRelation,
    probe: &dyn Probe,
    opts: &SelectOptions,
) -> Result<Selection, SelectionError> {
    let probe = CachingProbe::new(probe);
    let mut diagnostics = Diagnostics::default();
    let mut g: BTreeMap<TriplePattern, Vec<BTreeSet<String>>> = BTreeMap::new();

    for tp in query.distinct_patterns() {
        let grouping = group_fragments(tp, catalog, containment, &probe)?;
        let mut endpoints = get_endpoints(&grouping.groups, catalog);
        let mut fallback = false;
        if grouping.groups.is_empty() {
            match opts.fallback {
                Fallback::Fail => return Err(SelectionError::NoRelevantFragment(tp.to_string())),
                Fallback::PublicAsk => {
                    fallback = true;
                    for p in catalog.public_endpoints() {
                        if probe.ask_endpoint(&p.iri, tp)? {
                            endpoints.push([p.iri.clone()].into_iter().collect());
                        }
                    }
                }
            }
        }
        g.insert(tp.clone(), endpoints.clone());
        diagnostics.patterns.push(PatternReport {
            pattern: tp.clone(),
            trace: grouping.trace,
            groups: grouping.groups,
            endpoints,
            fallback,
        });
    }

    for bgp in &query.body {
        let mut patterns: Vec<TriplePattern> = Vec::new();
        for tp in bgp.patterns() {
            if !patterns.contains(tp) {
                patterns.push(tp.clone());
            }
        }
        let instance = build_cover_instance(&patterns, &g, |e| catalog.is_public(e));
        let cover = greedy_set_cover(&instance)?;
        let mut filtered = Vec::new();
        for tp in &patterns {
            let sets = g.get_mut(tp).expect("every pattern was grouped");
            for set in sets.iter_mut() {
                set.retain(|e| cover.contains(e));
                if set.is_empty() {
                    return Err(SelectionError::EmptyAfterFilter(tp.to_string()));
                }
            }
            filtered.push((tp.clone(), sets.clone()));
        }
        diagnostics.bgps.push(BgpReport {
            patterns,
            instance,
            cover,
            filtered,
        });
    }

    let mut map = SelectionMap::new();
    for tp in query.distinct_patterns() {
        let chosen = g[tp].iter().map(|set| pick(set, catalog)).collect();
        map.insert(tp.clone(), chosen);
    }
    diagnostics.probes = probe.issued();
    Ok(Selection { map, diagnostics })
}

/// Every endpoint whose data matches the pattern, for each pattern.
pub fn ask_baseline_select(
    query: &Query,
    catalog: &FederationCatalog,
    probe: &dyn Probe,
) -> Result<Selection, SelectionError> {
    let probe = CachingProbe::new(probe);
    let mut map = SelectionMap::new();
    for tp in query.distinct_patterns() {
        let mut chosen = BTreeSet::new();
        for e in catalog.ordered_endpoints() {
            if probe.ask_endpoint(&e.iri, tp)? {
                chosen.insert(e.iri.clone());
            }
        }
        map.insert(tp.clone(), chosen);
    }
    Ok(Selection {
        map,
        diagnostics: Diagnostics {
            probes: probe.issued(),
            ..Diagnostics::default()
        },
    })
}
