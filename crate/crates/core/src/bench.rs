//! Benchmark suites: manifests, timed runs and CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

use crate::catalog::{FederationCatalog, Visibility};
use crate::containment::build_containment;
use crate::engine::{
    load_federation, run_query, EngineError, ExecutionReport, Federation, Mode, ReportRow,
    RunOptions, Status, Strategy,
};
use crate::query::{parse_query, Query, QueryError};
use crate::selection::Fallback;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("manifest: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Query { path: PathBuf, source: QueryError },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryEntry {
    pub id: String,
    pub file: String,
}

fn default_strategies() -> Vec<String> {
    vec!["fedra".into(), "ask".into()]
}

fn default_modes() -> Vec<String> {
    vec!["delegated".into()]
}

fn default_visibility() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn default_timeout() -> u64 {
    300
}

fn default_fallback() -> String {
    "public-ask".into()
}

/// A benchmark suite. Paths are relative to the manifest file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub catalog: String,
    /// Overrides the catalog's own dataset paths when given.
    #[serde(default)]
    pub datasets: Option<BTreeMap<String, String>>,
    pub queries: Vec<QueryEntry>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "default_modes")]
    pub modes: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_visibility")]
    pub visibility: Vec<f64>,
    #[serde(default = "default_timeout")]
    pub timeout: u64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default = "default_fallback")]
    pub fallback: String,
}

/// A manifest with its files loaded and its settings checked.
pub struct Suite {
    pub catalog: FederationCatalog,
    pub federation: Arc<Federation>,
    pub queries: Vec<(String, Arc<Query>)>,
    pub strategies: Vec<Strategy>,
    pub modes: Vec<Mode>,
    pub visibility: Vec<f64>,
    pub seed: u64,
    pub timeout: Duration,
    pub fallback: Fallback,
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_suite(manifest_path: &Path) -> Result<Suite, BenchError> {
    let manifest: SuiteManifest = serde_json::from_str(&read(manifest_path)?)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let (mut catalog, mut federation, _) = load_federation(&base.join(&manifest.catalog), false)?;
    if let Some(paths) = &manifest.datasets {
        let datasets = crate::engine::read_datasets(base, paths)?;
        federation = crate::engine::materialize_federation(&catalog, &datasets)?;
        catalog.set_datasets(paths.clone());
    }
    let mut queries = Vec::new();
    for q in &manifest.queries {
        let path = base.join(&q.file);
        let query =
            parse_query(&read(&path)?).map_err(|source| BenchError::Query { path, source })?;
        queries.push((q.id.clone(), Arc::new(query)));
    }
    let strategies = manifest
        .strategies
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, String>>()
        .map_err(BenchError::Invalid)?;
    let modes = manifest
        .modes
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, String>>()
        .map_err(BenchError::Invalid)?;
    if let Some(v) = manifest
        .visibility
        .iter()
        .find(|v| !(0.0..=1.0).contains(*v))
    {
        return Err(BenchError::Invalid(format!(
            "visibility {v} is outside [0, 1]"
        )));
    }
    Ok(Suite {
        catalog,
        federation: Arc::new(federation),
        queries,
        strategies,
        modes,
        visibility: manifest.visibility,
        seed: manifest.seed,
        timeout: Duration::from_secs(manifest.timeout),
        fallback: manifest.fallback.parse().map_err(BenchError::Invalid)?,
        out: manifest.out.map(|o| base.join(o)),
    })
}

/// Outcome of one run under a wall-clock limit.
pub enum Timed {
    Done(Box<ExecutionReport>),
    Failed(String, f64),
    TimedOut(f64),
}

/// Runs `job` on a worker thread and waits at most `timeout` for it.
/// A job that overruns is abandoned, not interrupted; a job that panics
/// yields `Disconnected`.
pub fn with_timeout<T: Send + 'static>(
    timeout: Duration,
    job: impl FnOnce() -> T + Send + 'static,
) -> Result<T, mpsc::RecvTimeoutError> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(job());
    });
    rx.recv_timeout(timeout)
}

/// Runs one query under a wall-clock limit.
pub fn run_with_timeout(
    id: &str,
    query: Arc<Query>,
    catalog: &FederationCatalog,
    federation: Arc<Federation>,
    opts: RunOptions,
    timeout: Duration,
) -> Timed {
    let id = id.to_string();
    let catalog = catalog.clone();
    let start = Instant::now();
    let outcome = with_timeout(timeout, move || {
        let containment = build_containment(&catalog);
        run_query(&id, &query, &catalog, &containment, &federation, opts).map_err(|e| e.to_string())
    });
    match outcome {
        Ok(Ok(report)) => Timed::Done(Box::new(report)),
        Ok(Err(msg)) => Timed::Failed(msg, start.elapsed().as_secs_f64()),
        Err(mpsc::RecvTimeoutError::Timeout) => Timed::TimedOut(timeout.as_secs_f64()),
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            Timed::Failed("run panicked".into(), start.elapsed().as_secs_f64())
        }
    }
}

/// Runs the cross product of queries, strategies, modes and visibility
/// levels, in that nesting order. Failures become rows; messages go to
/// `on_error`.
pub fn run_suite(suite: &Suite, mut on_error: impl FnMut(&str)) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for (id, query) in &suite.queries {
        for &strategy in &suite.strategies {
            for &mode in &suite.modes {
                for &fraction in &suite.visibility {
                    let catalog = suite.catalog.clone().with_visibility(Visibility {
                        fraction,
                        seed: suite.seed,
                    });
                    let opts = RunOptions {
                        strategy,
                        mode,
                        fallback: suite.fallback,
                    };
                    let row = match run_with_timeout(
                        id,
                        Arc::clone(query),
                        &catalog,
                        Arc::clone(&suite.federation),
                        opts,
                        suite.timeout,
                    ) {
                        Timed::Done(report) => ReportRow::from_report(&report),
                        Timed::Failed(msg, secs) => {
                            on_error(&format!("{id} {strategy} {mode} {fraction:.2}: {msg}"));
                            ReportRow::failed(id, opts, fraction, Status::Error, secs)
                        }
                        Timed::TimedOut(secs) => {
                            on_error(&format!("{id} {strategy} {mode} {fraction:.2}: timeout"));
                            ReportRow::failed(id, opts, fraction, Status::Timeout, secs)
                        }
                    };
                    rows.push(row);
                }
            }
        }
    }
    fill_ir_ratios(&mut rows);
    rows
}

/// Query, strategy and visibility of a row.
type RowKey = (String, String, String);

/// Sets `ir_ratio` to delegated IR over per-triple IR on rows whose query,
/// strategy and visibility were run in both modes. 0/0 counts as 1.
pub fn fill_ir_ratios(rows: &mut [ReportRow]) {
    let mut pairs: BTreeMap<RowKey, (Option<u64>, Option<u64>)> = BTreeMap::new();
    for r in rows.iter() {
        let key = (r.query.clone(), r.strategy.clone(), r.visibility.clone());
        let e = pairs.entry(key).or_default();
        match r.mode.as_str() {
            "delegated" => e.0 = r.ir,
            _ => e.1 = r.ir,
        }
    }
    for r in rows.iter_mut() {
        let key = (r.query.clone(), r.strategy.clone(), r.visibility.clone());
        if let Some((Some(d), Some(p))) = pairs.get(&key) {
            r.ir_ratio = match (d, p) {
                (0, 0) => format!("{:.4}", 1.0),
                (_, 0) => String::new(),
                _ => format!("{:.4}", *d as f64 / *p as f64),
            };
        }
    }
}

/// Per-strategy means over successful rows, plus NSS totals.
pub fn summarize(rows: &[ReportRow]) -> String {
    #[derive(Default)]
    struct Acc {
        n: usize,
        nss: usize,
        nsps: usize,
        ir: u64,
        tet: f64,
        recall: f64,
        failed: usize,
    }
    let mut by: BTreeMap<&str, Acc> = BTreeMap::new();
    for r in rows {
        let a = by.entry(r.strategy.as_str()).or_default();
        if r.status != Status::Ok {
            a.failed += 1;
            continue;
        }
        a.n += 1;
        a.nss += r.nss.unwrap_or(0);
        a.nsps += r.nsps.unwrap_or(0);
        a.ir += r.ir.unwrap_or(0);
        a.tet += r.tet.parse::<f64>().unwrap_or(0.0);
        a.recall += r.recall.parse::<f64>().unwrap_or(0.0);
    }
    let mut out = String::new();
    for (strategy, a) in by {
        let n = a.n.max(1) as f64;
        let _ = writeln!(
            out,
            "{strategy}: rows={} failed={} nss_total={} mean_nss={:.3} mean_nsps={:.3} mean_ir={:.3} mean_tet={:.3} mean_recall={:.4}",
            a.n,
            a.failed,
            a.nss,
            a.nss as f64 / n,
            a.nsps as f64 / n,
            a.ir as f64 / n,
            a.tet / n,
            a.recall / n
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(query: &str, mode: &str, ir: Option<u64>) -> ReportRow {
        let mut r = ReportRow::failed(query, RunOptions::default(), 1.0, Status::Ok, 0.0);
        r.mode = mode.into();
        r.ir = ir;
        r
    }

    #[test]
    fn ratios_pair_delegated_with_per_triple() {
        let mut rows = vec![
            row("a", "delegated", Some(2)),
            row("a", "per-triple", Some(8)),
            row("b", "delegated", Some(0)),
            row("b", "per-triple", Some(0)),
            row("c", "delegated", Some(3)),
        ];
        fill_ir_ratios(&mut rows);
        let ratios: Vec<&str> = rows.iter().map(|r| r.ir_ratio.as_str()).collect();
        assert_eq!(ratios, ["0.2500", "0.2500", "1.0000", "1.0000", ""]);
    }

    #[test]
    fn overrunning_job_times_out() {
        let slow = with_timeout(Duration::from_millis(20), || {
            std::thread::sleep(Duration::from_secs(2));
        });
        assert_eq!(slow, Err(mpsc::RecvTimeoutError::Timeout));
        assert_eq!(with_timeout(Duration::from_secs(5), || 7), Ok(7));
        let panicked = with_timeout(Duration::from_secs(5), || -> u8 { panic!("boom") });
        assert_eq!(panicked, Err(mpsc::RecvTimeoutError::Disconnected));
    }

    #[test]
    fn summary_totals_match_rows() {
        let mut a = row("a", "delegated", Some(2));
        a.nss = Some(3);
        let mut b = row("b", "delegated", Some(2));
        b.nss = Some(4);
        let failed = ReportRow::failed("c", RunOptions::default(), 1.0, Status::Timeout, 300.0);
        let text = summarize(&[a, b, failed]);
        assert!(
            text.starts_with("fedra: rows=2 failed=1 nss_total=7 mean_nss=3.500"),
            "{text}"
        );
    }
}
