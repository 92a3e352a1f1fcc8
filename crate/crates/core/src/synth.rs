//! Seeded generators for datasets, replicated federations and queries.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::{CatalogError, EndpointDescriptor, FederationCatalog, FragmentDef, Role};
use crate::query::{parse_query, parse_selector, Query};
use crate::rdf::{Iri, Term, Triple, TriplePattern, TripleStore};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("dataset for {0} has no predicates")]
    NoPredicates(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of a synthetic dataset. Entities `e<i>` link to each other
/// through `l<j>` and carry values `v<k>` through `a<j>`.
#[derive(Debug, Clone, Copy)]
pub struct DatasetSpec {
    pub entities: usize,
    pub link_predicates: usize,
    pub attribute_predicates: usize,
    /// Distinct values an attribute can take.
    pub values: usize,
    /// Maximum objects per (subject, predicate).
    pub fanout: usize,
    /// Chance that an entity has a given predicate at all.
    pub density: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            entities: 60,
            link_predicates: 3,
            attribute_predicates: 3,
            values: 6,
            fanout: 2,
            density: 0.6,
        }
    }
}

fn local(name: &str) -> Iri {
    Iri::local(name).expect("generated names are non-empty")
}

pub fn gen_dataset(spec: &DatasetSpec, rng: &mut impl Rng) -> TripleStore {
    let mut store = TripleStore::new();
    for i in 0..spec.entities {
        let s = local(&format!("e{i}"));
        for j in 0..spec.link_predicates {
            if !rng.gen_bool(spec.density) {
                continue;
            }
            let p = local(&format!("l{j}"));
            for _ in 0..rng.gen_range(1..=spec.fanout.max(1)) {
                let o = local(&format!("e{}", rng.gen_range(0..spec.entities)));
                store.insert(Triple::new(s.clone(), p.clone(), o));
            }
        }
        for j in 0..spec.attribute_predicates {
            if !rng.gen_bool(spec.density) {
                continue;
            }
            let p = local(&format!("a{j}"));
            for _ in 0..rng.gen_range(1..=spec.fanout.max(1)) {
                let o = local(&format!("v{}", rng.gen_range(0..spec.values.max(1))));
                store.insert(Triple::new(s.clone(), p.clone(), o));
            }
        }
    }
    store
}

/// Splits a dataset between `parts` public endpoints by subject.
pub fn split_by_subject(store: &TripleStore, parts: usize, rng: &mut impl Rng) -> Vec<TripleStore> {
    let mut owner: BTreeMap<&Iri, usize> = BTreeMap::new();
    let mut subjects: Vec<&Iri> = store
        .iter()
        .map(|t| &t.subject)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    subjects.shuffle(rng);
    for (i, s) in subjects.into_iter().enumerate() {
        owner.insert(s, i % parts.max(1));
    }
    let mut out = vec![TripleStore::new(); parts.max(1)];
    for t in store.sorted() {
        out[owner[&t.subject]].insert(t.clone());
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct FederationSpec {
    pub consumers: usize,
    pub fragments_per_consumer: usize,
    pub replication: usize,
    /// Constant-object fragments added on top of the per-predicate ones.
    pub specializations: usize,
}

#[derive(Debug, Clone)]
pub struct GeneratedFederation {
    pub catalog: FederationCatalog,
    /// Dataset of each public endpoint.
    pub datasets: BTreeMap<String, TripleStore>,
}

/// Builds a replicated federation over the given public datasets. Every
/// predicate of every public dataset gets a `?x p ?y` fragment; the
/// requested specializations pin the object to a value seen in the data.
/// Each fragment is copied onto `replication` distinct consumers, always
/// filling the least loaded one first. More consumers than requested are
/// created when the requested ones cannot hold every copy.
pub fn gen_federation(
    publics: &[(String, TripleStore)],
    spec: &FederationSpec,
    rng: &mut impl Rng,
) -> Result<GeneratedFederation, GenError> {
    if spec.fragments_per_consumer == 0 || spec.replication == 0 {
        return Err(GenError::Parameter(
            "fragments per consumer and replication must be positive".into(),
        ));
    }
    let mut fragments: Vec<FragmentDef> = Vec::new();
    let add = |selector: String, source: &str, fragments: &mut Vec<FragmentDef>| {
        let id = format!("f{}", fragments.len() + 1);
        let selector = parse_selector(&selector).expect("generated selectors parse");
        fragments.push(FragmentDef {
            id,
            selector,
            source: source.to_string(),
        });
    };
    for (iri, data) in publics {
        let predicates = data.predicates();
        if predicates.is_empty() {
            return Err(GenError::NoPredicates(iri.clone()));
        }
        for p in predicates {
            add(
                format!("CONSTRUCT WHERE {{ ?x {p} ?y }}"),
                iri,
                &mut fragments,
            );
        }
    }
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for _ in 0..spec.specializations {
        let (iri, data) = &publics[rng.gen_range(0..publics.len())];
        let triples = data.sorted();
        let Some(t) = triples.choose(rng) else {
            continue;
        };
        let sel = format!("CONSTRUCT WHERE {{ ?x {} {} }}", t.predicate, t.object);
        if seen.insert((iri.clone(), sel.clone())) {
            add(sel, iri, &mut fragments);
        }
    }

    let copies = fragments.len() * spec.replication;
    let n = spec
        .consumers
        .max(copies.div_ceil(spec.fragments_per_consumer))
        .max(spec.replication);
    let names: Vec<String> = (1..=n).map(|i| format!("C{i:02}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut held: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n];
    for f in &fragments {
        for _ in 0..spec.replication {
            let slot = order
                .iter()
                .copied()
                .filter(|&c| {
                    held[c].len() < spec.fragments_per_consumer && !held[c].contains(&f.id)
                })
                .min_by_key(|&c| held[c].len())
                .ok_or_else(|| {
                    GenError::Parameter(format!("no consumer left for a copy of {}", f.id))
                })?;
            held[slot].insert(f.id.clone());
        }
    }

    let mut endpoints: Vec<EndpointDescriptor> = publics
        .iter()
        .map(|(iri, _)| EndpointDescriptor {
            iri: iri.clone(),
            role: Role::Public,
            fragments: BTreeSet::new(),
        })
        .collect();
    for (name, frags) in names.iter().zip(held) {
        endpoints.push(EndpointDescriptor {
            iri: name.clone(),
            role: Role::Consumer,
            fragments: frags,
        });
    }
    let dataset_files = publics
        .iter()
        .map(|(iri, _)| (iri.clone(), format!("{iri}.nt")))
        .collect();
    let catalog = FederationCatalog::new(endpoints, fragments, dataset_files)?;
    Ok(GeneratedFederation {
        catalog,
        datasets: publics.iter().cloned().collect(),
    })
}

/// Random federation for property tests: one or two public endpoints
/// splitting a synthetic dataset, then 4 to 40 endpoints in total.
pub fn random_federation(
    rng: &mut impl Rng,
    data: &DatasetSpec,
) -> Result<GeneratedFederation, GenError> {
    let dataset = gen_dataset(data, rng);
    let n_public = rng.gen_range(1..=2);
    let parts = split_by_subject(&dataset, n_public, rng);
    let publics: Vec<(String, TripleStore)> = parts
        .into_iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(i, s)| (format!("P{}", i + 1), s))
        .collect();
    let mut spec = FederationSpec {
        consumers: rng.gen_range(3..=38),
        fragments_per_consumer: rng.gen_range(1..=2),
        replication: rng.gen_range(1..=3),
        specializations: rng.gen_range(0..=3),
    };
    // Keep the total at 40 endpoints or fewer: lower the replication until
    // the requested consumers can hold every copy.
    let defs: usize = publics
        .iter()
        .map(|(_, s)| s.predicates().len())
        .sum::<usize>()
        + spec.specializations;
    let slots = 40 - publics.len();
    while spec.replication > 1
        && (defs * spec.replication).div_ceil(spec.fragments_per_consumer) > slots
    {
        spec.replication -= 1;
    }
    spec.consumers = spec.consumers.min(slots).max(
        (defs * spec.replication)
            .div_ceil(spec.fragments_per_consumer)
            .min(slots),
    );
    gen_federation(&publics, &spec, rng)
}

fn pick<'a, T>(items: &'a [T], rng: &mut impl Rng) -> &'a T {
    items.choose(rng).expect("non-empty")
}

/// A star query `?s p1 ?o1 . ?s p2 ?o2 ...` around a subject drawn from the
/// data, with up to `max_patterns` distinct predicates. One object may be
/// fixed to the value it has in the data.
pub fn gen_star_query(
    store: &TripleStore,
    max_patterns: usize,
    rng: &mut impl Rng,
) -> Option<Query> {
    let triples = store.sorted();
    let seed = *triples.choose(rng)?;
    let mut by_pred: BTreeMap<&Iri, Vec<&Term>> = BTreeMap::new();
    for t in store.iter().filter(|t| t.subject == seed.subject) {
        by_pred.entry(&t.predicate).or_default().push(&t.object);
    }
    let mut preds: Vec<&Iri> = by_pred.keys().copied().collect();
    preds.shuffle(rng);
    preds.truncate(rng.gen_range(1..=max_patterns.max(1)));
    let fixed = if rng.gen_bool(0.3) {
        Some(rng.gen_range(0..preds.len()))
    } else {
        None
    };
    let mut parts = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        let object = match fixed {
            Some(k) if k == i => pick(&by_pred[p], rng).to_string(),
            _ => format!("?o{i}"),
        };
        parts.push(format!("?s {p} {object}"));
    }
    parse_query(&format!(
        "SELECT DISTINCT * WHERE {{ {} }}",
        parts.join(" . ")
    ))
    .ok()
}

/// A path query `?x0 p1 ?x1 . ?x1 p2 ?x2 ...` following links in the data.
pub fn gen_path_query(
    store: &TripleStore,
    max_patterns: usize,
    rng: &mut impl Rng,
) -> Option<Query> {
    let triples = store.sorted();
    let mut current = *triples.choose(rng)?;
    let mut parts = vec![format!("?x0 {} ?x1", current.predicate)];
    let len = rng.gen_range(1..=max_patterns.max(1));
    while parts.len() < len {
        let Term::Iri(next_subject) = &current.object else {
            break;
        };
        let next: Vec<&Triple> = store
            .iter()
            .filter(|t| &t.subject == next_subject)
            .collect();
        let Some(step) = next.choose(rng) else { break };
        let i = parts.len();
        parts.push(format!("?x{i} {} ?x{}", step.predicate, i + 1));
        current = step;
    }
    parse_query(&format!(
        "SELECT DISTINCT * WHERE {{ {} }}",
        parts.join(" . ")
    ))
    .ok()
}

/// Star or path query with one to `max_patterns` triple patterns.
pub fn gen_query(store: &TripleStore, max_patterns: usize, rng: &mut impl Rng) -> Option<Query> {
    if rng.gen_bool(0.5) {
        gen_star_query(store, max_patterns, rng)
    } else {
        gen_path_query(store, max_patterns, rng)
    }
}

/// Patterns of a query in a form convenient for tests.
pub fn patterns(query: &Query) -> Vec<TriplePattern> {
    query.distinct_patterns().into_iter().cloned().collect()
}
