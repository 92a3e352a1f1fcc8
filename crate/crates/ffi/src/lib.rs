//! C ABI over the fedra library.
//!
//! Every function returns a [`FedraStatus`]. On failure the message is
//! available from [`fedra_last_error`] on the same thread. Strings handed
//! out by the library must be released with [`fedra_string_free`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fedra::catalog::{load_catalog, FederationCatalog, LoadOptions, Visibility};
use fedra::containment::build_containment;
use fedra::engine::{
    materialize_federation, run_query, select, write_rows, EngineError, Federation, Mode,
    ReportRow, RunError, RunOptions, Strategy,
};
use fedra::query::parse_query;
use fedra::rdf::parse_ntriples;
use fedra::selection::Fallback;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedraStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Catalog = 4,
    Selection = 5,
    Execution = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedraStrategy {
    Fedra = 0,
    Ask = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedraMode {
    Delegated = 0,
    PerTriple = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedraFallback {
    PublicAsk = 0,
    Fail = 1,
}

/// A loaded catalog with its materialized endpoints. Opaque to C.
pub struct FedraFederation {
    catalog: FederationCatalog,
    federation: Federation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(FedraStatus, String);

impl Failure {
    fn new(status: FedraStatus, message: impl ToString) -> Self {
        Failure(status, message.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Io { .. } => FedraStatus::Io,
            EngineError::Dataset { .. } => FedraStatus::Parse,
            EngineError::Catalog(_) | EngineError::MissingDataset(_) => FedraStatus::Catalog,
            EngineError::UnknownEndpoint(_) => FedraStatus::Execution,
        };
        Failure::new(status, e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Selection(s) => Failure::new(FedraStatus::Selection, s),
            RunError::Engine(e) => Failure::new(FedraStatus::Execution, e),
        }
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FedraStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            FedraStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FedraStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            FedraStatus::NullArgument,
            format!("{what} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(FedraStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn hand_out(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let c =
        CString::new(s).map_err(|_| Failure::new(FedraStatus::Execution, "output holds NUL"))?;
    // SAFETY: callers check `out` for null before producing output.
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn options(strategy: FedraStrategy, mode: FedraMode, fallback: FedraFallback) -> RunOptions {
    RunOptions {
        strategy: match strategy {
            FedraStrategy::Fedra => Strategy::Fedra,
            FedraStrategy::Ask => Strategy::Ask,
        },
        mode: match mode {
            FedraMode::Delegated => Mode::Delegated,
            FedraMode::PerTriple => Mode::PerTriple,
        },
        fallback: match fallback {
            FedraFallback::PublicAsk => Fallback::PublicAsk,
            FedraFallback::Fail => Fallback::Fail,
        },
    }
}

fn visibility(fraction: f64, seed: u64) -> Result<Visibility, Failure> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Failure::new(
            FedraStatus::Selection,
            format!("visibility {fraction} is outside [0, 1]"),
        ));
    }
    Ok(Visibility { fraction, seed })
}

/// Loads a catalog file and the datasets it names.
///
/// # Safety
/// `catalog_path` is a NUL-terminated string; `out` points to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fedra_federation_open(
    catalog_path: *const c_char,
    out: *mut *mut FedraFederation,
) -> FedraStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(FedraStatus::NullArgument, "out is null"));
        }
        let path = text(catalog_path, "catalog_path")?;
        let (catalog, federation, _) = fedra::engine::load_federation(Path::new(path), false)?;
        *out = Box::into_raw(Box::new(FedraFederation {
            catalog,
            federation,
        }));
        Ok(())
    })
}

/// Builds a federation from catalog JSON and in-memory N-Triples datasets,
/// `count` of them, keyed by public endpoint IRI.
///
/// # Safety
/// `catalog_json` is a NUL-terminated string; `iris` and `datasets` each
/// point to `count` NUL-terminated strings (or may be null when `count`
/// is 0); `out` points to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fedra_federation_new(
    catalog_json: *const c_char,
    iris: *const *const c_char,
    datasets: *const *const c_char,
    count: usize,
    out: *mut *mut FedraFederation,
) -> FedraStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(FedraStatus::NullArgument, "out is null"));
        }
        if count > 0 && (iris.is_null() || datasets.is_null()) {
            return Err(Failure::new(
                FedraStatus::NullArgument,
                "dataset arrays are null",
            ));
        }
        let json = text(catalog_json, "catalog_json")?;
        let (catalog, _) = load_catalog(json, &LoadOptions::default())
            .map_err(|e| Failure::new(FedraStatus::Catalog, e))?;
        let mut stores = BTreeMap::new();
        for i in 0..count {
            let iri = text(*iris.add(i), "dataset iri")?;
            let data = text(*datasets.add(i), "dataset")?;
            let store = parse_ntriples(data)
                .map_err(|e| Failure::new(FedraStatus::Parse, format!("{iri}: {e}")))?;
            stores.insert(iri.to_string(), store);
        }
        let federation = materialize_federation(&catalog, &stores)?;
        *out = Box::into_raw(Box::new(FedraFederation {
            catalog,
            federation,
        }));
        Ok(())
    })
}

/// # Safety
/// `federation` is null or came from this library and was not freed.
#[no_mangle]
pub unsafe extern "C" fn fedra_federation_free(federation: *mut FedraFederation) {
    if !federation.is_null() {
        drop(Box::from_raw(federation));
    }
}

/// Runs source selection and writes the diagnostics text to `out_text`.
///
/// # Safety
/// `federation` came from this library; `query` is a NUL-terminated
/// string; `out_text` points to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fedra_select(
    federation: *const FedraFederation,
    query: *const c_char,
    strategy: FedraStrategy,
    fallback: FedraFallback,
    visibility_fraction: f64,
    seed: u64,
    out_text: *mut *mut c_char,
) -> FedraStatus {
    guard(|| {
        if federation.is_null() || out_text.is_null() {
            return Err(Failure::new(
                FedraStatus::NullArgument,
                "federation or out_text is null",
            ));
        }
        let fed = &*federation;
        let query =
            parse_query(text(query, "query")?).map_err(|e| Failure::new(FedraStatus::Parse, e))?;
        let catalog = fed
            .catalog
            .clone()
            .with_visibility(visibility(visibility_fraction, seed)?);
        let containment = build_containment(&catalog);
        let opts = options(strategy, FedraMode::Delegated, fallback);
        let selection = select(&query, &catalog, &containment, &fed.federation, opts)
            .map_err(|e| Failure::new(FedraStatus::Selection, e))?;
        hand_out(selection.render(&catalog), out_text)
    })
}

/// Selects, executes and scores a query; writes a CSV header and one
/// report row to `out_csv`.
///
/// # Safety
/// `federation` came from this library; `query_id` and `query` are
/// NUL-terminated strings; `out_csv` points to writable storage for one
/// pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fedra_run(
    federation: *const FedraFederation,
    query_id: *const c_char,
    query: *const c_char,
    strategy: FedraStrategy,
    mode: FedraMode,
    fallback: FedraFallback,
    visibility_fraction: f64,
    seed: u64,
    out_csv: *mut *mut c_char,
) -> FedraStatus {
    guard(|| {
        if federation.is_null() || out_csv.is_null() {
            return Err(Failure::new(
                FedraStatus::NullArgument,
                "federation or out_csv is null",
            ));
        }
        let fed = &*federation;
        let id = text(query_id, "query_id")?;
        let query =
            parse_query(text(query, "query")?).map_err(|e| Failure::new(FedraStatus::Parse, e))?;
        let catalog = fed
            .catalog
            .clone()
            .with_visibility(visibility(visibility_fraction, seed)?);
        let containment = build_containment(&catalog);
        let opts = options(strategy, mode, fallback);
        let report = run_query(id, &query, &catalog, &containment, &fed.federation, opts)?;
        let mut csv = Vec::new();
        write_rows(&mut csv, &[ReportRow::from_report(&report)])
            .map_err(|e| Failure::new(FedraStatus::Io, e))?;
        let csv = String::from_utf8(csv).map_err(|e| Failure::new(FedraStatus::Io, e))?;
        hand_out(csv, out_csv)
    })
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn fedra_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fedra_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fedra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
