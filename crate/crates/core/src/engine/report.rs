use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{execute, oracle_execute, Answer, EngineError, Federation, Mode};
use crate::catalog::FederationCatalog;
use crate::containment::ContainmentRelation;
use crate::query::Query;
use crate::selection::{
    ask_baseline_select, fedra_select, Fallback, SelectOptions, Selection, SelectionError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Strategy {
    #[default]
    Fedra,
    Ask,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fedra" => Ok(Strategy::Fedra),
            "ask" => Ok(Strategy::Ask),
            other => Err(format!(
                "unknown strategy '{other}' (expected fedra or ask)"
            )),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Fedra => "fedra",
            Strategy::Ask => "ask",
        })
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub strategy: Strategy,
    pub mode: Mode,
    pub fallback: Fallback,
}

#[derive(Debug, Clone)]
pub struct ExecutionReport {
    pub query: String,
    pub strategy: Strategy,
    pub mode: Mode,
    pub visibility: f64,
    pub selection: Selection,
    pub answers: Vec<Answer>,
    pub nss: usize,
    pub nsps: usize,
    pub ir: u64,
    pub probes: usize,
    /// Selection time in seconds.
    pub sst: f64,
    /// Selection plus execution time in seconds.
    pub tet: f64,
    pub recall: f64,
}

/// Share of the oracle's answers that were produced; 1.0 when the oracle
/// has none.
pub fn recall(answers: &[Answer], oracle: &[Answer]) -> f64 {
    if oracle.is_empty() {
        return 1.0;
    }
    let got: BTreeSet<&Answer> = answers.iter().collect();
    let hits = oracle.iter().filter(|a| got.contains(a)).count();
    hits as f64 / oracle.len() as f64
}

/// Runs the source selection named by `opts.strategy`.
pub fn select(
    query: &Query,
    catalog: &FederationCatalog,
    containment: &ContainmentRelation,
    fed: &Federation,
    opts: RunOptions,
) -> Result<Selection, SelectionError> {
    match opts.strategy {
        Strategy::Fedra => fedra_select(
            query,
            catalog,
            containment,
            fed,
            &SelectOptions {
                fallback: opts.fallback,
            },
        ),
        Strategy::Ask => ask_baseline_select(query, catalog, fed),
    }
}

/// Selects sources, executes and scores one query.
pub fn run_query(
    id: &str,
    query: &Query,
    catalog: &FederationCatalog,
    containment: &ContainmentRelation,
    fed: &Federation,
    opts: RunOptions,
) -> Result<ExecutionReport, RunError> {
    let start = Instant::now();
    let selection = select(query, catalog, containment, fed, opts)?;
    let sst = start.elapsed().as_secs_f64();
    let exec = execute(query, &selection.map, fed, opts.mode)?;
    let tet = start.elapsed().as_secs_f64();
    let oracle = oracle_execute(query, fed);
    Ok(ExecutionReport {
        query: id.to_string(),
        strategy: opts.strategy,
        mode: opts.mode,
        visibility: catalog.visibility.fraction,
        nss: selection.map.nss(),
        nsps: selection.map.nsps(catalog),
        probes: selection.diagnostics.probes,
        recall: recall(&exec.answers, &oracle),
        ir: exec.ir,
        answers: exec.answers,
        selection,
        sst,
        tet,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Timeout,
    Error,
}

/// One CSV line of a benchmark table. Numeric columns of failed rows are
/// left empty, except `tet`, which holds the time spent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub query: String,
    pub strategy: String,
    pub mode: String,
    pub visibility: String,
    pub nss: Option<usize>,
    pub nsps: Option<usize>,
    pub ir: Option<u64>,
    pub probes: Option<usize>,
    pub sst: String,
    pub tet: String,
    pub recall: String,
    pub answers: Option<usize>,
    /// Delegated IR over per-triple IR for the same query, strategy and
    /// visibility; filled in by the benchmark when both rows exist.
    pub ir_ratio: String,
    pub status: Status,
}

pub const CSV_HEADER: &str =
    "query,strategy,mode,visibility,nss,nsps,ir,probes,sst,tet,recall,answers,ir_ratio,status";

impl ReportRow {
    pub fn from_report(r: &ExecutionReport) -> Self {
        ReportRow {
            query: r.query.clone(),
            strategy: r.strategy.to_string(),
            mode: r.mode.to_string(),
            visibility: format!("{:.2}", r.visibility),
            nss: Some(r.nss),
            nsps: Some(r.nsps),
            ir: Some(r.ir),
            probes: Some(r.probes),
            sst: format!("{:.3}", r.sst),
            tet: format!("{:.3}", r.tet),
            recall: format!("{:.4}", r.recall),
            answers: Some(r.answers.len()),
            ir_ratio: String::new(),
            status: Status::Ok,
        }
    }

    pub fn failed(
        query: &str,
        opts: RunOptions,
        visibility: f64,
        status: Status,
        seconds: f64,
    ) -> Self {
        ReportRow {
            query: query.to_string(),
            strategy: opts.strategy.to_string(),
            mode: opts.mode.to_string(),
            visibility: format!("{visibility:.2}"),
            nss: None,
            nsps: None,
            ir: None,
            probes: None,
            sst: String::new(),
            tet: format!("{seconds:.3}"),
            recall: String::new(),
            answers: None,
            ir_ratio: String::new(),
            status,
        }
    }

    /// The row with its timing columns blanked, for run-to-run comparison.
    pub fn without_timings(&self) -> Self {
        ReportRow {
            sst: String::new(),
            tet: String::new(),
            ..self.clone()
        }
    }
}

/// Writes rows as CSV with a header line.
pub fn write_rows<W: std::io::Write>(out: W, rows: &[ReportRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<ReportRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}
