mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use fedra::catalog::{EndpointDescriptor, FederationCatalog, FragmentDef, Role, Visibility};
use fedra::containment::{build_containment, contained_wrt, subsumes, unify, visible};
use fedra::engine::{
    answer_set, execute, materialize_federation, oracle_execute, read_rows, write_rows, Mode,
    ReportRow, Status,
};
use fedra::query::{parse_query, parse_selector};
use fedra::rdf::{parse_ntriples, serialize_ntriples, Triple, TriplePattern, TripleStore};
use fedra::selection::{ask_baseline_select, fedra_select, greedy_set_cover, SelectOptions};
use fedra::synth::{gen_dataset, gen_query, random_federation, rng, DatasetSpec};
use proptest::prelude::*;

const NODES: [&str; 3] = ["a", "b", "c"];
const PREDICATES: [&str; 2] = ["p", "q"];
const VARS: [&str; 3] = ["?x", "?y", "?z"];

fn node_or_var() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(&NODES[..]).prop_map(String::from),
        prop::sample::select(&VARS[..]).prop_map(String::from),
    ]
}

fn object() -> impl Strategy<Value = String> {
    prop_oneof![node_or_var(), Just("\"l\"".to_string())]
}

fn pattern() -> impl Strategy<Value = TriplePattern> {
    (
        node_or_var(),
        prop_oneof![
            prop::sample::select(&PREDICATES[..]).prop_map(String::from),
            prop::sample::select(&VARS[..]).prop_map(String::from),
        ],
        object(),
    )
        .prop_map(|(s, p, o)| tp(&format!("{s} {p} {o}")))
}

fn triple() -> impl Strategy<Value = Triple> {
    (
        prop::sample::select(&NODES[..]),
        prop::sample::select(&PREDICATES[..]),
        prop_oneof![
            prop::sample::select(&NODES[..]).prop_map(String::from),
            Just("\"l\"".to_string())
        ],
    )
        .prop_map(|(s, p, o)| {
            parse_ntriples(&format!("{s} {p} {o} ."))
                .unwrap()
                .iter()
                .next()
                .unwrap()
                .clone()
        })
}

fn store() -> impl Strategy<Value = TripleStore> {
    prop::collection::vec(triple(), 0..20).prop_map(|ts| ts.into_iter().collect())
}

fn matches(tp: &TriplePattern, t: &Triple) -> bool {
    tp.match_triple(t).is_some()
}

fn fragment(id: &str, selector: &TriplePattern) -> FragmentDef {
    FragmentDef {
        id: id.into(),
        selector: parse_selector(&format!("CONSTRUCT WHERE {{ {selector} }}")).unwrap(),
        source: "P".into(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn subsumption_is_a_preorder(a in pattern(), b in pattern(), c in pattern()) {
        prop_assert!(subsumes(&a, &a));
        if subsumes(&a, &b) && subsumes(&b, &c) {
            prop_assert!(subsumes(&a, &c));
        }
    }

    #[test]
    fn subsumption_is_sound_on_data(general in pattern(), specific in pattern(), data in store()) {
        if subsumes(&general, &specific) {
            for t in data.iter() {
                if matches(&specific, t) {
                    prop_assert!(matches(&general, t), "{general} vs {specific} on {t}");
                }
            }
        }
    }

    #[test]
    fn unifier_matches_exactly_the_common_triples(sel in pattern(), q in pattern(), t in triple()) {
        match unify(&sel, &q) {
            Some(m) => prop_assert_eq!(matches(&m, &t), matches(&sel, &t) && matches(&q, &t)),
            None => prop_assert!(!(matches(&sel, &t) && matches(&q, &t))),
        }
    }

    #[test]
    fn containment_wrt_pattern_holds_on_data(
        q in pattern(), s1 in pattern(), s2 in pattern(), data in store()
    ) {
        let (f1, f2) = (fragment("f1", &s1), fragment("f2", &s2));
        if contained_wrt(&q, &f1, &f2) {
            for t in data.iter() {
                if matches(&q, t) && matches(&s1, t) {
                    prop_assert!(matches(&s2, t), "{t} in f1 but not f2 for {q}");
                }
            }
        }
    }

    #[test]
    fn store_lookup_agrees_with_scanning(q in pattern(), data in store()) {
        let indexed = data.match_pattern(&q);
        let scanned: BTreeSet<_> = data.iter().filter_map(|t| q.match_triple(t)).collect();
        prop_assert_eq!(&indexed, &scanned);
        prop_assert_eq!(data.ask(&q), !scanned.is_empty());
    }

    #[test]
    fn ntriples_round_trip(data in store()) {
        let text = serialize_ntriples(&data);
        prop_assert_eq!(&parse_ntriples(&text).unwrap(), &data);
        prop_assert_eq!(serialize_ntriples(&parse_ntriples(&text).unwrap()), text);
    }

    #[test]
    fn query_print_parse_fixed_point(pats in prop::collection::vec(pattern(), 1..4), limit in 0u64..5) {
        let body: Vec<String> = pats.iter().map(ToString::to_string).collect();
        let text = format!("SELECT DISTINCT * WHERE {{ {} }} LIMIT {limit}", body.join(" . "));
        let q = parse_query(&text).unwrap();
        let printed = q.to_string();
        let again = parse_query(&printed).unwrap();
        prop_assert_eq!(&again, &q);
        prop_assert_eq!(again.to_string(), printed);
    }

    #[test]
    fn visibility_is_monotone(lo in 0.0f64..=1.0, hi in 0.0f64..=1.0, seed in any::<u64>(),
                              key in "[a-z]{1,6}") {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let at = |fraction| visible(Visibility { fraction, seed }, &["pair", &key, "k"]);
        if at(lo) {
            prop_assert!(at(hi));
        }
        prop_assert!(at(1.0));
        prop_assert!(!at(0.0));
    }

    #[test]
    fn csv_rows_round_trip(
        nss in proptest::option::of(0usize..100), ir in proptest::option::of(0u64..10_000),
        tet in 0.0f64..100.0, timeout in any::<bool>(), query in "[a-z][a-z0-9,\" ]{0,8}"
    ) {
        let mut row = ReportRow::failed(&query, Default::default(), 0.5,
            if timeout { Status::Timeout } else { Status::Ok }, tet);
        row.nss = nss;
        row.ir = ir;
        let mut buf = Vec::new();
        write_rows(&mut buf, &[row.clone(), row.clone()]).unwrap();
        prop_assert_eq!(read_rows(buf.as_slice()).unwrap(), vec![row.clone(), row]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn greedy_cover_is_within_the_harmonic_bound(seed in any::<u64>()) {
        let instance = random_cover_instance(&mut rng(seed), 8);
        let cover = greedy_set_cover(&instance).unwrap();
        prop_assert!(instance.is_cover(&cover));
        let opt = optimal_cover_size(&instance);
        prop_assert!(cover.len() as f64 <= harmonic(instance.elements.len()) * opt as f64 + 1e-9);
    }

    #[test]
    fn masking_only_adds_containment_with_more_visibility(seed in any::<u64>()) {
        let (catalog, _) = running_example();
        let at = |fraction| {
            build_containment(&catalog.clone().with_visibility(Visibility { fraction, seed }))
        };
        let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
        for w in levels.windows(2) {
            let (lo, hi) = (at(w[0]), at(w[1]));
            prop_assert!(lo.pairs().is_subset(&hi.pairs()));
            for c in lo.endpoint_classes().values().flatten() {
                let first = c.iter().next().unwrap();
                prop_assert!(hi.endpoint_classes().values().flatten()
                    .any(|d| d.contains(first) && c.is_subset(d)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fedra_recall_on_random_federations(seed in any::<u64>()) {
        if let Err(e) = recall_case(seed) {
            prop_assert!(e == "no query", "{}", e);
        }
    }

    #[test]
    fn execution_modes_agree_and_ir_is_accounted(seed in any::<u64>()) {
        let mut r = rng(seed);
        let generated = random_federation(&mut r, &DatasetSpec { entities: 25, ..Default::default() }).unwrap();
        let catalog = &generated.catalog;
        let query = match gen_query(&union_of(&generated.datasets), 4, &mut r) {
            Some(q) => q,
            None => return Ok(()),
        };
        let fed = materialize_federation(catalog, &generated.datasets).unwrap();
        let containment = build_containment(catalog);
        let selections = [
            fedra_select(&query, catalog, &containment, &fed, &SelectOptions::default()).unwrap(),
            ask_baseline_select(&query, catalog, &fed).unwrap(),
        ];
        for s in &selections {
            prop_assert!(s.map.nsps(catalog) <= s.map.nss());
            for tp in query.distinct_patterns() {
                prop_assert!(s.map.get(tp).is_some());
            }
            let fresh = materialize_federation(catalog, &generated.datasets).unwrap();
            let delegated = execute(&query, &s.map, &fresh, Mode::Delegated).unwrap();
            prop_assert_eq!(delegated.ir, fresh.total_transferred());
            let per_triple = execute(&query, &s.map, &fed, Mode::PerTriple).unwrap();
            prop_assert_eq!(answer_set(&delegated.answers), answer_set(&per_triple.answers));
        }
        let oracle = answer_set(&oracle_execute(&query, &fed));
        let ask = execute(&query, &selections[1].map, &fed, Mode::Delegated).unwrap();
        prop_assert_eq!(answer_set(&ask.answers), oracle);
    }

    #[test]
    fn replicas_change_the_baseline_but_not_fedra(seed in any::<u64>()) {
        let mut r = rng(seed);
        let generated = random_federation(&mut r, &DatasetSpec { entities: 25, ..Default::default() }).unwrap();
        let query = match gen_query(&union_of(&generated.datasets), 3, &mut r) {
            Some(q) => q,
            None => return Ok(()),
        };
        let doubled = with_replicas(&generated.catalog);
        let run = |catalog: &FederationCatalog| {
            let fed = materialize_federation(catalog, &generated.datasets).unwrap();
            let containment = build_containment(catalog);
            let f = fedra_select(&query, catalog, &containment, &fed, &SelectOptions::default()).unwrap();
            let a = ask_baseline_select(&query, catalog, &fed).unwrap();
            let answers = answer_set(&execute(&query, &f.map, &fed, Mode::Delegated).unwrap().answers);
            (f.map.nss(), a.map.nss() - a.map.nsps(catalog), answers)
        };
        let (f1, consumers1, answers1) = run(&generated.catalog);
        let (f2, consumers2, answers2) = run(&doubled);
        prop_assert_eq!(f1, f2);
        prop_assert_eq!(answers1, answers2);
        prop_assert_eq!(consumers2, 2 * consumers1);
    }
}

/// The catalog with a second copy `<iri>-r` of every consumer.
fn with_replicas(catalog: &FederationCatalog) -> FederationCatalog {
    let mut endpoints: Vec<EndpointDescriptor> = catalog.endpoints().cloned().collect();
    let copies: Vec<EndpointDescriptor> = endpoints
        .iter()
        .filter(|e| e.role == Role::Consumer)
        .map(|e| EndpointDescriptor {
            iri: format!("{}-r", e.iri),
            ..e.clone()
        })
        .collect();
    endpoints.extend(copies);
    let fragments = catalog.fragments().cloned().collect();
    FederationCatalog::new(endpoints, fragments, BTreeMap::new()).unwrap()
}

#[test]
fn datasets_are_seed_deterministic() {
    let spec = DatasetSpec::default();
    assert_eq!(
        gen_dataset(&spec, &mut rng(1)),
        gen_dataset(&spec, &mut rng(1))
    );
    assert_ne!(
        gen_dataset(&spec, &mut rng(1)),
        gen_dataset(&spec, &mut rng(2))
    );
}
