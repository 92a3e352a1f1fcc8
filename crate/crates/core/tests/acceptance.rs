//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails. Each criterion also returns its diagnostics and
//! CSV output so that the determinism check can compare two runs.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use common::*;
use fedra::bench::fill_ir_ratios;
use fedra::catalog::{EndpointDescriptor, FederationCatalog};
use fedra::containment::build_containment;
use fedra::engine::{
    materialize_federation, run_query, write_rows, ExecutionReport, Federation, Mode, ReportRow,
    RunOptions, Strategy,
};
use fedra::query::Query;
use fedra::rdf::TripleStore;
use fedra::selection::{ask_baseline_select, build_cover_instance, greedy_set_cover, Selection};
use fedra::synth::{
    gen_dataset, gen_federation, gen_query, gen_star_query, rng, DatasetSpec, FederationSpec,
};

const LIMIT_GOLDEN: Duration = Duration::from_secs(1);
const LIMIT_PUBLIC: Duration = Duration::from_secs(1);
const LIMIT_REPLICAS: Duration = Duration::from_secs(10);
const LIMIT_RECALL: Duration = Duration::from_secs(60);
const LIMIT_COVER: Duration = Duration::from_secs(10);
const LIMIT_SWEEP: Duration = Duration::from_secs(5);
const LIMIT_IR: Duration = Duration::from_secs(30);

const RECALL_CASES: usize = 100;
const COVER_INSTANCES: usize = 500;
const COVER_MAX_ELEMENTS: usize = 8;
const IR_FEDERATIONS: u64 = 20;
/// Lower bound on the baseline's per-triple IR growth from one to two
/// copies of the data.
const MIN_BASELINE_IR_RATIO: f64 = 2.0;
const HARMONIC_SLACK: f64 = 1e-9;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn csv(rows: &[ReportRow]) -> String {
    let masked: Vec<ReportRow> = rows.iter().map(ReportRow::without_timings).collect();
    let mut out = Vec::new();
    write_rows(&mut out, &masked).unwrap();
    String::from_utf8(out).unwrap()
}

fn run(
    id: &str,
    query: &Query,
    catalog: &FederationCatalog,
    fed: &Federation,
    strategy: Strategy,
    mode: Mode,
) -> ExecutionReport {
    let containment = build_containment(catalog);
    let opts = RunOptions {
        strategy,
        mode,
        ..RunOptions::default()
    };
    run_query(id, query, catalog, &containment, fed, opts).unwrap()
}

fn groups_of(s: &Selection, pattern: &str) -> Vec<BTreeSet<String>> {
    s.diagnostics
        .pattern(&tp(pattern))
        .unwrap()
        .endpoints
        .clone()
}

fn trace_of(s: &Selection, pattern: &str) -> Vec<String> {
    let report = s.diagnostics.pattern(&tp(pattern)).unwrap();
    report.trace.iter().map(ToString::to_string).collect()
}

fn golden_suite() -> Outcome {
    let (catalog, fed) = running_example();
    let q2 = select_at(&catalog, &fed, &fixture_query("q2"), 1.0, 0);
    let q3 = select_at(&catalog, &fed, &fixture_query("q3"), 1.0, 0);

    check(groups_of(&q3, "?x1 p1 ?x2") == [set(&["C1", "C3"])], || {
        format!("G(?x1 p1 ?x2) = {:?}", groups_of(&q3, "?x1 p1 ?x2"))
    })?;
    check(
        groups_of(&q2, "?x1 p7 ?x3") == [set(&["C3"]), set(&["C4"])],
        || format!("G(?x1 p7 ?x3) = {:?}", groups_of(&q2, "?x1 p7 ?x3")),
    )?;
    let bgp = &q2.diagnostics.bgps[0];
    let instance = bgp.instance.to_string();
    check(
        instance == "S = {s1_1, s2_1, s2_2}\nC = {C2 -> {s1_1}, C3 -> {s1_1, s2_1}, C4 -> {s2_2}}",
        || format!("instance {instance}"),
    )?;
    check(bgp.cover == set(&["C3", "C4"]), || {
        format!("C' = {:?}", bgp.cover)
    })?;
    let left = [
        "4 { }",
        "24 { { (f1, C1) } }",
        "11 { { (f1, C1), (f1, C3) } }",
        "11 { { (f1, C1), (f1, C3), (f1, P1) } }",
    ];
    check(trace_of(&q3, "?x1 p1 ?x2") == left, || {
        format!("Q3 tp1 trace {:?}", trace_of(&q3, "?x1 p1 ?x2"))
    })?;
    let right = [
        "4 { }",
        "24 { { (f7, C3) } }",
        "24 { { (f7, C3) }, { (f8, C4) } }",
        "11 { { (f7, C3), (f7, P2) }, { (f8, C4) } }",
        "11 { { (f7, C3), (f7, P2) }, { (f8, C4), (f8, P2) } }",
    ];
    check(trace_of(&q2, "?x1 p7 ?x3") == right, || {
        format!("Q2 tp2 trace {:?}", trace_of(&q2, "?x1 p7 ?x3"))
    })?;
    let d = [
        ("?x1 p1 ?x2", "C3"),
        ("?x2 p4 ?x3", "C3"),
        ("?x1 p2 ?x2", "C4"),
        ("?x2 p5 ?x3", "C4"),
        ("?x1 p3 ?x2", "C5"),
        ("?x2 p6 ?x3", "C5"),
    ];
    check(q3.map.len() == d.len(), || {
        format!("Q3 map has {} entries", q3.map.len())
    })?;
    for (pattern, endpoint) in d {
        check(q3.map.get(&tp(pattern)) == Some(&set(&[endpoint])), || {
            format!("D({pattern}) = {:?}", q3.map.get(&tp(pattern)))
        })?;
    }
    Ok(format!("{}{}", q2.render(&catalog), q3.render(&catalog)))
}

fn public_elimination() -> Outcome {
    let (catalog, fed) = running_example();
    let mut out = String::new();
    for q in ["q1", "q2", "q3"] {
        let query = fixture_query(q);
        let patterns = query.distinct_patterns().len();
        let fedra = select_at(&catalog, &fed, &query, 1.0, 0);
        let ask = ask_baseline_select(&query, &catalog, &fed).unwrap();
        let (f, a) = (fedra.map.nsps(&catalog), ask.map.nsps(&catalog));
        check(f == 0, || format!("{q}: fedra nsps {f}"))?;
        check(a == patterns, || {
            format!("{q}: ask nsps {a}, {patterns} patterns")
        })?;
        writeln!(out, "{q} fedra_nsps={f} ask_nsps={a}").unwrap();
    }
    Ok(out)
}

/// One public endpoint and, optionally, one consumer holding a copy of
/// every fragment.
fn replica_federations() -> (TripleStore, [FederationCatalog; 2]) {
    let spec = DatasetSpec {
        entities: 185,
        ..DatasetSpec::default()
    };
    let data = gen_dataset(&spec, &mut rng(2024));
    let predicates = data.predicates().len();
    let publics = vec![("P1".to_string(), data.clone())];
    let two = gen_federation(
        &publics,
        &FederationSpec {
            consumers: 1,
            fragments_per_consumer: predicates,
            replication: 1,
            specializations: 0,
        },
        &mut rng(2024),
    )
    .unwrap()
    .catalog;
    let only_public: Vec<EndpointDescriptor> =
        two.endpoints().filter(|e| e.is_public()).cloned().collect();
    let one = FederationCatalog::new(
        only_public,
        two.fragments().cloned().collect(),
        two.datasets().clone(),
    )
    .unwrap();
    (data, [one, two])
}

fn replication_degradation() -> Outcome {
    let (data, catalogs) = replica_federations();
    check((800..=1200).contains(&data.len()), || {
        format!("toy dataset has {} triples", data.len())
    })?;
    let datasets: BTreeMap<String, TripleStore> = [("P1".to_string(), data.clone())].into();
    let feds: Vec<Federation> = catalogs
        .iter()
        .map(|c| materialize_federation(c, &datasets).unwrap())
        .collect();
    let mut r = rng(7);
    let queries: Vec<Query> = (0..10)
        .filter_map(|_| gen_query(&data, 3, &mut r))
        .collect();
    check(queries.len() >= 5, || "too few queries generated".into())?;
    let mut rows = Vec::new();
    let (mut ir, mut ask_nss) = ([0u64; 2], [0usize; 2]);
    for (i, q) in queries.iter().enumerate() {
        let id = format!("g{i}");
        let mut fedra_reports = Vec::new();
        for k in 0..2 {
            let ask = run(
                &id,
                q,
                &catalogs[k],
                &feds[k],
                Strategy::Ask,
                Mode::PerTriple,
            );
            let fedra = run(
                &id,
                q,
                &catalogs[k],
                &feds[k],
                Strategy::Fedra,
                Mode::Delegated,
            );
            ir[k] += ask.ir;
            ask_nss[k] += ask.nss;
            check(fedra.recall == 1.0, || {
                format!("{id}: fedra recall {}", fedra.recall)
            })?;
            rows.push(ReportRow::from_report(&ask));
            rows.push(ReportRow::from_report(&fedra));
            fedra_reports.push(fedra);
        }
        let (a, b) = (&fedra_reports[0], &fedra_reports[1]);
        check(a.nss == b.nss, || {
            format!("{id}: fedra nss {} vs {}", a.nss, b.nss)
        })?;
        check(a.answers == b.answers, || {
            format!("{id}: fedra answers differ")
        })?;
    }
    check(ask_nss[1] == 2 * ask_nss[0], || {
        format!("ask nss {ask_nss:?}")
    })?;
    let ratio = ir[1] as f64 / ir[0].max(1) as f64;
    check(ratio >= MIN_BASELINE_IR_RATIO, || {
        format!("ask per-triple ir {ir:?}")
    })?;
    Ok(format!("ask_nss={ask_nss:?} ask_ir={ir:?}\n{}", csv(&rows)))
}

fn recall_suite() -> Outcome {
    let mut out = String::new();
    let mut done = 0;
    let mut seed = 0u64;
    while done < RECALL_CASES {
        check(seed < 4 * RECALL_CASES as u64, || {
            format!("only {done} usable seeds")
        })?;
        match recall_case(seed) {
            Ok((endpoints, patterns)) => {
                check((4..=40).contains(&endpoints), || {
                    format!("seed {seed}: {endpoints} endpoints")
                })?;
                check((1..=4).contains(&patterns), || {
                    format!("seed {seed}: {patterns} patterns")
                })?;
                writeln!(out, "{seed} endpoints={endpoints} patterns={patterns}").unwrap();
                done += 1;
            }
            Err(e) if e == "no query" => {}
            Err(e) => return Err(e),
        }
        seed += 1;
    }
    Ok(out)
}

fn cover_quality() -> Outcome {
    let mut r = rng(5);
    let mut out = String::new();
    for i in 0..COVER_INSTANCES {
        let instance = random_cover_instance(&mut r, COVER_MAX_ELEMENTS);
        let cover = greedy_set_cover(&instance).map_err(|e| e.to_string())?;
        check(instance.is_cover(&cover), || {
            format!("instance {i}: not a cover")
        })?;
        let opt = optimal_cover_size(&instance);
        let bound = harmonic(instance.elements.len()) * opt as f64 + HARMONIC_SLACK;
        check(cover.len() as f64 <= bound, || {
            format!("instance {i}: greedy {} opt {opt}", cover.len())
        })?;
        writeln!(out, "{i} greedy={} opt={opt}", cover.len()).unwrap();
    }
    let groups: BTreeMap<_, _> = [
        (tp("?x1 p4 ?x2"), vec![set(&["C2", "C3"])]),
        (tp("?x1 p7 ?x3"), vec![set(&["C3"]), set(&["C4"])]),
    ]
    .into();
    let patterns = [tp("?x1 p4 ?x2"), tp("?x1 p7 ?x3")];
    let instance = build_cover_instance(&patterns, &groups, |_| false);
    let greedy = greedy_set_cover(&instance)
        .map_err(|e| e.to_string())?
        .len();
    let opt = optimal_cover_size(&instance);
    check(greedy == 2 && opt == 2, || {
        format!("running example greedy {greedy} opt {opt}")
    })?;
    Ok(out)
}

fn visibility_sweep() -> Outcome {
    let (catalog, fed) = running_example();
    let mut out = String::new();
    for q in ["q1", "q2", "q3", "q4", "q5"] {
        let query = fixture_query(q);
        let patterns = query.distinct_patterns().len();
        let mut line = q.to_string();
        for fraction in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let nsps = select_at(&catalog, &fed, &query, fraction, 0)
                .map
                .nsps(&catalog);
            if fraction == 0.0 {
                check(nsps == patterns, || {
                    format!("{q} at 0: nsps {nsps}, {patterns} patterns")
                })?;
            }
            if fraction == 1.0 {
                check(nsps == 0, || format!("{q} at 1: nsps {nsps}"))?;
            }
            write!(line, " {fraction:.2}:{nsps}").unwrap();
        }
        writeln!(out, "{line}").unwrap();
    }
    Ok(out)
}

/// Whether every BGP of `query` was mapped to one and the same endpoint.
fn single_endpoint_bgps(query: &Query, s: &Selection) -> bool {
    query.body.iter().all(|bgp| {
        let targets: BTreeSet<_> = bgp.patterns().iter().map(|tp| s.map.get(tp)).collect();
        targets.len() == 1 && targets.iter().all(|t| t.is_some_and(|e| e.len() == 1))
    })
}

fn ir_rows(
    id: &str,
    query: &Query,
    catalog: &FederationCatalog,
    fed: &Federation,
) -> Result<Option<Vec<ReportRow>>, String> {
    let delegated = run(id, query, catalog, fed, Strategy::Fedra, Mode::Delegated);
    if !single_endpoint_bgps(query, &delegated.selection) {
        return Ok(None);
    }
    let per_triple = run(id, query, catalog, fed, Strategy::Fedra, Mode::PerTriple);
    check(delegated.nsps == 0, || {
        format!("{id}: public endpoint selected")
    })?;
    check(delegated.ir <= per_triple.ir, || {
        format!(
            "{id}: delegated ir {} > per-triple {}",
            delegated.ir, per_triple.ir
        )
    })?;
    Ok(Some(vec![
        ReportRow::from_report(&delegated),
        ReportRow::from_report(&per_triple),
    ]))
}

fn ir_reduction() -> Outcome {
    let (catalog, fed) = running_example();
    let mut rows = Vec::new();
    for q in ["q1", "q2", "q3", "q4", "q5"] {
        if let Some(r) = ir_rows(q, &fixture_query(q), &catalog, &fed)? {
            rows.extend(r);
        }
    }
    let fixture_rows = rows.len();
    check(fixture_rows >= 6, || {
        format!("only {fixture_rows} fixture rows")
    })?;
    let spec = DatasetSpec {
        entities: 40,
        fanout: 1,
        ..DatasetSpec::default()
    };
    let mut federations_with_stars = 0;
    for seed in 0..IR_FEDERATIONS {
        let mut r = rng(1000 + seed);
        let data = gen_dataset(&spec, &mut r);
        let generated = gen_federation(
            &[("P1".to_string(), data.clone())],
            &FederationSpec {
                consumers: 4,
                fragments_per_consumer: 3,
                replication: 2,
                specializations: 0,
            },
            &mut r,
        )
        .map_err(|e| e.to_string())?;
        let fed = materialize_federation(&generated.catalog, &generated.datasets)
            .map_err(|e| e.to_string())?;
        let before = rows.len();
        for i in 0..10 {
            let Some(query) = gen_star_query(&data, 3, &mut r) else {
                continue;
            };
            let id = format!("s{seed}_{i}");
            if let Some(r) = ir_rows(&id, &query, &generated.catalog, &fed)? {
                rows.extend(r);
            }
        }
        if rows.len() > before {
            federations_with_stars += 1;
        }
    }
    check(federations_with_stars >= IR_FEDERATIONS, || {
        format!("only {federations_with_stars} federations had a single-endpoint star")
    })?;
    fill_ir_ratios(&mut rows);
    Ok(csv(&rows))
}

struct Criterion {
    number: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 7] = [
    Criterion {
        number: 1,
        name: "running-example golden suite",
        limit: LIMIT_GOLDEN,
        run: golden_suite,
    },
    Criterion {
        number: 2,
        name: "public-endpoint elimination",
        limit: LIMIT_PUBLIC,
        run: public_elimination,
    },
    Criterion {
        number: 3,
        name: "replication degradation prevented",
        limit: LIMIT_REPLICAS,
        run: replication_degradation,
    },
    Criterion {
        number: 4,
        name: "recall on random federations",
        limit: LIMIT_RECALL,
        run: recall_suite,
    },
    Criterion {
        number: 5,
        name: "greedy cover quality",
        limit: LIMIT_COVER,
        run: cover_quality,
    },
    Criterion {
        number: 6,
        name: "containment visibility sweep",
        limit: LIMIT_SWEEP,
        run: visibility_sweep,
    },
    Criterion {
        number: 7,
        name: "intermediate results reduction",
        limit: LIMIT_IR,
        run: ir_reduction,
    },
];

fn run_all() -> (Vec<Result<String, String>>, Vec<Duration>) {
    let mut outcomes = Vec::new();
    let mut times = Vec::new();
    for c in &CRITERIA {
        let start = Instant::now();
        let outcome = (c.run)();
        times.push(start.elapsed());
        outcomes.push(outcome);
    }
    (outcomes, times)
}

#[test]
fn acceptance() {
    let (first, times) = run_all();
    let mut failed = Vec::new();
    for ((c, outcome), elapsed) in CRITERIA.iter().zip(&first).zip(&times) {
        let verdict = match outcome {
            Err(e) => Err(e.clone()),
            Ok(_) if *elapsed > c.limit => Err(format!("took {elapsed:.2?}, limit {:?}", c.limit)),
            Ok(_) => Ok(()),
        };
        match verdict {
            Ok(()) => println!(
                "PASS {} {} ({elapsed:.2?} < {:?})",
                c.number, c.name, c.limit
            ),
            Err(e) => {
                println!("FAIL {} {}: {e}", c.number, c.name);
                failed.push(c.number);
            }
        }
    }
    let (second, _) = run_all();
    let differing: Vec<u32> = CRITERIA
        .iter()
        .zip(first.iter().zip(&second))
        .filter(|(_, (a, b))| a != b)
        .map(|(c, _)| c.number)
        .collect();
    if differing.is_empty() {
        println!("PASS 8 determinism (criteria 1-7 repeated with identical output)");
    } else {
        println!("FAIL 8 determinism: criteria {differing:?} produced different output");
        failed.push(8);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
