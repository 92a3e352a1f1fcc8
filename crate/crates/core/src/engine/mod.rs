//! In-process federation simulator and query executor.

mod eval;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::catalog::{endpoint_order, CatalogError, FederationCatalog, FragmentDef, Role};
use crate::containment::{Probe, ProbeError};
use crate::query::Query;
use crate::rdf::{read_ntriples, NtError, TriplePattern, TripleStore};
use crate::selection::SelectionMap;

pub use eval::{evaluate_bgp, finish, join, join_all, term_order, Answer, Relation};
pub use report::{
    read_rows, recall, run_query, select, write_rows, ExecutionReport, ReportRow, RunError,
    RunOptions, Status, Strategy, CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no dataset for public endpoint {0}, which is the source of exposed fragments")]
    MissingDataset(String),
    #[error("endpoint {0} is not part of the federation")]
    UnknownEndpoint(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Dataset { path: PathBuf, source: NtError },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// One endpoint's materialized data.
#[derive(Debug)]
pub struct SimulatedEndpoint {
    pub iri: String,
    pub role: Role,
    pub store: TripleStore,
    /// Data of each exposed fragment, keyed by fragment id.
    pub fragment_stores: BTreeMap<String, TripleStore>,
    transferred: AtomicU64,
}

impl SimulatedEndpoint {
    /// Mappings sent to the query engine so far.
    pub fn transferred(&self) -> u64 {
        self.transferred.load(Ordering::Relaxed)
    }
}

#[derive(Debug)]
pub struct Federation {
    endpoints: BTreeMap<String, SimulatedEndpoint>,
    union: TripleStore,
}

/// Builds every endpoint's store: public endpoints hold their dataset,
/// consumers the union of their fragments' data taken from each
/// fragment's source dataset.
pub fn materialize_federation(
    catalog: &FederationCatalog,
    datasets: &BTreeMap<String, TripleStore>,
) -> Result<Federation, EngineError> {
    let empty = TripleStore::new();
    let dataset = |iri: &str| {
        datasets
            .get(iri)
            .ok_or_else(|| EngineError::MissingDataset(iri.to_string()))
    };
    let mut endpoints = BTreeMap::new();
    let mut union = TripleStore::new();
    for e in catalog.endpoints() {
        let exposed = catalog.exposed(&e.iri);
        let mut fragment_stores = BTreeMap::new();
        for f in &exposed {
            let data = dataset(&f.source)?.select(f.selector.pattern());
            fragment_stores.insert(f.id.clone(), data);
        }
        let store = if e.is_public() {
            datasets.get(&e.iri).unwrap_or(&empty).clone()
        } else {
            let mut s = TripleStore::new();
            for data in fragment_stores.values() {
                s.extend_from(data);
            }
            s
        };
        union.extend_from(&store);
        endpoints.insert(
            e.iri.clone(),
            SimulatedEndpoint {
                iri: e.iri.clone(),
                role: e.role,
                store,
                fragment_stores,
                transferred: AtomicU64::new(0),
            },
        );
    }
    Ok(Federation { endpoints, union })
}

/// Loads a catalog file and the datasets it names. Relative dataset paths
/// are resolved against the catalog's directory.
pub fn load_federation(
    catalog_path: &Path,
    lenient_sources: bool,
) -> Result<(FederationCatalog, Federation, Vec<String>), EngineError> {
    let text = std::fs::read_to_string(catalog_path).map_err(|source| EngineError::Io {
        path: catalog_path.to_path_buf(),
        source,
    })?;
    let (catalog, warnings) =
        crate::catalog::load_catalog(&text, &crate::catalog::LoadOptions { lenient_sources })?;
    let base = catalog_path.parent().unwrap_or(Path::new("."));
    let datasets = read_datasets(base, catalog.datasets())?;
    let fed = materialize_federation(&catalog, &datasets)?;
    Ok((catalog, fed, warnings))
}

pub fn read_datasets(
    base: &Path,
    paths: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, TripleStore>, EngineError> {
    let mut out = BTreeMap::new();
    for (iri, rel) in paths {
        let path = base.join(rel);
        let file = std::fs::File::open(&path).map_err(|source| EngineError::Io {
            path: path.clone(),
            source,
        })?;
        let store = read_ntriples(std::io::BufReader::new(file))
            .map_err(|source| EngineError::Dataset { path, source })?;
        out.insert(iri.clone(), store);
    }
    Ok(out)
}

impl Federation {
    pub fn endpoint(&self, iri: &str) -> Option<&SimulatedEndpoint> {
        self.endpoints.get(iri)
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &SimulatedEndpoint> {
        self.endpoints.values()
    }

    /// All data held anywhere in the federation.
    pub fn union_store(&self) -> &TripleStore {
        &self.union
    }

    /// Sum of the endpoints' transfer counters.
    pub fn total_transferred(&self) -> u64 {
        self.endpoints
            .values()
            .map(SimulatedEndpoint::transferred)
            .sum()
    }
}

impl Probe for Federation {
    fn ask_fragment(
        &self,
        endpoint: &str,
        fragment: &FragmentDef,
        pattern: &TriplePattern,
    ) -> Result<bool, ProbeError> {
        let e = self.endpoints.get(endpoint).ok_or_else(|| ProbeError {
            endpoint: endpoint.to_string(),
            message: "not in federation".into(),
        })?;
        Ok(e.fragment_stores
            .get(&fragment.id)
            .is_some_and(|s| s.ask(pattern)))
    }

    fn ask_endpoint(&self, endpoint: &str, pattern: &TriplePattern) -> Result<bool, ProbeError> {
        let e = self.endpoints.get(endpoint).ok_or_else(|| ProbeError {
            endpoint: endpoint.to_string(),
            message: "not in federation".into(),
        })?;
        Ok(e.store.ask(pattern))
    }
}

/// Evaluates a conjunction at one endpoint and counts the mappings it
/// sends back.
pub fn endpoint_eval(endpoint: &SimulatedEndpoint, patterns: &[TriplePattern]) -> Relation {
    let rel = evaluate_bgp(&endpoint.store, patterns);
    endpoint
        .transferred
        .fetch_add(rel.len() as u64, Ordering::Relaxed);
    rel
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Mode {
    /// Patterns sharing their only endpoint are sent to it together.
    #[default]
    Delegated,
    /// Every pattern is sent to each of its endpoints on its own.
    PerTriple,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delegated" => Ok(Mode::Delegated),
            "per-triple" => Ok(Mode::PerTriple),
            other => Err(format!(
                "unknown mode '{other}' (expected delegated or per-triple)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Delegated => "delegated",
            Mode::PerTriple => "per-triple",
        })
    }
}

/// Answers plus the number of mappings transferred to produce them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub answers: Vec<Answer>,
    pub ir: u64,
}

/// Splits a BGP into units evaluated remotely: greedy groups of patterns
/// whose single selected endpoint is shared, then one unit per remaining
/// pattern with several endpoints.
pub fn delegation_plan(
    patterns: &[TriplePattern],
    map: &SelectionMap,
    is_public: impl Fn(&str) -> bool,
) -> Vec<(Vec<TriplePattern>, Vec<String>)> {
    let mut units = Vec::new();
    let mut single: Vec<(&TriplePattern, &str)> = Vec::new();
    for tp in patterns {
        match map.get(tp) {
            Some(endpoints) if endpoints.len() == 1 => {
                single.push((tp, endpoints.iter().next().expect("one endpoint")));
            }
            endpoints => units.push((
                vec![tp.clone()],
                endpoints.into_iter().flatten().cloned().collect(),
            )),
        }
    }
    let mut grouped = Vec::new();
    while !single.is_empty() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, e) in &single {
            *counts.entry(e).or_default() += 1;
        }
        let best = counts
            .iter()
            .min_by(|(a, ca), (b, cb)| {
                cb.cmp(ca)
                    .then_with(|| endpoint_order(is_public(a), a, is_public(b), b))
            })
            .map(|(e, _)| e.to_string())
            .expect("non-empty");
        let (mine, rest): (Vec<_>, Vec<_>) = single.into_iter().partition(|(_, e)| *e == best);
        grouped.push((
            mine.into_iter().map(|(tp, _)| tp.clone()).collect(),
            vec![best],
        ));
        single = rest;
    }
    grouped.extend(units);
    grouped
}

/// Executes `query` using the endpoints chosen in `map`.
pub fn execute(
    query: &Query,
    map: &SelectionMap,
    fed: &Federation,
    mode: Mode,
) -> Result<Execution, EngineError> {
    let mut ir = 0u64;
    let mut branches = Vec::new();
    for bgp in &query.body {
        let mut patterns: Vec<TriplePattern> = Vec::new();
        for tp in bgp.patterns() {
            if !patterns.contains(tp) {
                patterns.push(tp.clone());
            }
        }
        let units: Vec<(Vec<TriplePattern>, Vec<String>)> = match mode {
            Mode::Delegated => delegation_plan(&patterns, map, |e| {
                fed.endpoint(e).is_some_and(|x| x.role == Role::Public)
            }),
            Mode::PerTriple => patterns
                .iter()
                .map(|tp| {
                    let endpoints = map.get(tp).cloned().unwrap_or_default();
                    (vec![tp.clone()], endpoints.into_iter().collect())
                })
                .collect(),
        };
        let mut parts = Vec::new();
        for (tps, endpoints) in units {
            let mut rel = Relation::empty(eval::pattern_vars(&tps));
            for e in &endpoints {
                let ep = fed
                    .endpoint(e)
                    .ok_or_else(|| EngineError::UnknownEndpoint(e.clone()))?;
                let got = endpoint_eval(ep, &tps);
                ir += got.len() as u64;
                rel.union_with(got);
            }
            parts.push(rel);
        }
        branches.push(join_all(parts));
    }
    Ok(Execution {
        answers: finish(query, branches),
        ir,
    })
}

/// Evaluates `query` over all data in the federation at once.
pub fn oracle_execute(query: &Query, fed: &Federation) -> Vec<Answer> {
    let branches = query
        .body
        .iter()
        .map(|bgp| evaluate_bgp(&fed.union, bgp.patterns()))
        .collect();
    finish(query, branches)
}

/// Answers as a sorted set, for comparisons that ignore order.
pub fn answer_set(answers: &[Answer]) -> BTreeSet<Answer> {
    answers.iter().cloned().collect()
}
