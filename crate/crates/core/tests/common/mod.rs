#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use fedra::catalog::{FederationCatalog, Visibility};
use fedra::containment::build_containment;
use fedra::engine::{
    answer_set, execute, load_federation, materialize_federation, oracle_execute, Federation, Mode,
};
use fedra::query::{parse_pattern, parse_query, Query};
use fedra::rdf::{TriplePattern, TripleStore};
use fedra::selection::{fedra_select, Element, SelectOptions, Selection, SetCoverInstance};
use fedra::synth::{gen_query, random_federation, rng, DatasetSpec};
use rand::Rng;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/running_example")
}

pub fn running_example() -> (FederationCatalog, Federation) {
    let (catalog, fed, warnings) =
        load_federation(&fixture_dir().join("catalog.json"), false).expect("fixture catalog loads");
    assert!(warnings.is_empty());
    (catalog, fed)
}

pub fn fixture_query(name: &str) -> Query {
    let text = std::fs::read_to_string(fixture_dir().join(format!("{name}.rq"))).unwrap();
    parse_query(&text).unwrap()
}

pub fn tp(s: &str) -> TriplePattern {
    parse_pattern(s).unwrap()
}

pub fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn select_at(
    catalog: &FederationCatalog,
    fed: &Federation,
    query: &Query,
    fraction: f64,
    seed: u64,
) -> Selection {
    let catalog = catalog
        .clone()
        .with_visibility(Visibility { fraction, seed });
    let containment = build_containment(&catalog);
    fedra_select(
        query,
        &catalog,
        &containment,
        fed,
        &SelectOptions::default(),
    )
    .unwrap()
}

/// A random instance with 1..=`max_elements` elements, every one of which
/// is covered by at least one of up to six sets.
pub fn random_cover_instance(rng: &mut impl Rng, max_elements: usize) -> SetCoverInstance {
    let n = rng.gen_range(1..=max_elements);
    let elements: BTreeSet<Element> = (1..=n)
        .map(|i| Element {
            pattern: (i - 1) / 3 + 1,
            group: (i - 1) % 3 + 1,
        })
        .collect();
    let k = rng.gen_range(1..=6);
    let mut sets: BTreeMap<String, BTreeSet<Element>> = BTreeMap::new();
    for j in 0..k {
        let members = elements
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.4))
            .collect();
        sets.insert(format!("E{j}"), members);
    }
    for el in &elements {
        if !sets.values().any(|s| s.contains(el)) {
            let j = rng.gen_range(0..k);
            sets.get_mut(&format!("E{j}")).unwrap().insert(*el);
        }
    }
    sets.retain(|_, s| !s.is_empty());
    let public = sets.keys().filter(|_| rng.gen_bool(0.3)).cloned().collect();
    SetCoverInstance {
        elements,
        sets,
        public,
    }
}

/// Size of a smallest cover, by trying every subset of the sets.
pub fn optimal_cover_size(instance: &SetCoverInstance) -> usize {
    let names: Vec<&String> = instance.sets.keys().collect();
    (0u32..1 << names.len())
        .filter(|mask| {
            let chosen = names
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, n)| (*n).clone())
                .collect();
            instance.is_cover(&chosen)
        })
        .map(u32::count_ones)
        .min()
        .expect("the full collection covers") as usize
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

pub fn union_of(datasets: &BTreeMap<String, TripleStore>) -> TripleStore {
    let mut all = TripleStore::new();
    for d in datasets.values() {
        all.extend_from(d);
    }
    all
}

/// One seeded case: a random federation, a generated query, FEDRA
/// selection and delegated execution compared with the oracle. Returns the
/// endpoint count and pattern count, or a description of the mismatch.
pub fn recall_case(seed: u64) -> Result<(usize, usize), String> {
    let mut r = rng(seed);
    let spec = DatasetSpec {
        entities: 30,
        ..DatasetSpec::default()
    };
    let generated = random_federation(&mut r, &spec).map_err(|e| e.to_string())?;
    let catalog = generated.catalog;
    let fed = materialize_federation(&catalog, &generated.datasets).map_err(|e| e.to_string())?;
    let query = gen_query(&union_of(&generated.datasets), 4, &mut r).ok_or("no query")?;
    let containment = build_containment(&catalog);
    let selection = fedra_select(
        &query,
        &catalog,
        &containment,
        &fed,
        &SelectOptions::default(),
    )
    .map_err(|e| format!("seed {seed}: {e}"))?;
    let got = execute(&query, &selection.map, &fed, Mode::Delegated).map_err(|e| e.to_string())?;
    let oracle = oracle_execute(&query, &fed);
    if answer_set(&got.answers) != answer_set(&oracle) {
        return Err(format!(
            "seed {seed}: {} answers, oracle {} for {query}",
            got.answers.len(),
            oracle.len()
        ));
    }
    Ok((catalog.endpoints().count(), query.distinct_patterns().len()))
}
