use std::error::Error;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};

use fedra::bench::{load_suite, run_suite, run_with_timeout, summarize, Timed};
use fedra::catalog::Visibility;
use fedra::containment::build_containment;
use fedra::engine::{
    load_federation, materialize_federation, select, write_rows, Mode, ReportRow, RunOptions,
    Status, Strategy,
};
use fedra::query::parse_query;
use fedra::rdf::{read_ntriples, serialize_ntriples, TripleStore};
use fedra::selection::Fallback;
use fedra::synth::{gen_dataset, gen_federation, rng, DatasetSpec, FederationSpec};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "fedra",
    version,
    about = "Source selection over replicated fragments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SelectArgs {
    /// Federation catalog (JSON).
    #[arg(long)]
    catalog: PathBuf,
    /// SPARQL query file.
    #[arg(long)]
    query: PathBuf,
    #[arg(long, default_value = "fedra", value_parser = parse_with::<Strategy>)]
    strategy: Strategy,
    /// Share of containment facts visible to selection.
    #[arg(long, default_value_t = 1.0, value_parser = parse_fraction)]
    visibility: f64,
    /// Seed deciding which containment facts are visible.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "public-ask", value_parser = parse_with::<Fallback>)]
    fallback: Fallback,
    /// Warn instead of failing on fragments whose source is undeclared.
    #[arg(long)]
    lenient: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print selection diagnostics and the source selection map.
    Select {
        #[command(flatten)]
        common: SelectArgs,
        /// Also print the visible containment relation.
        #[arg(long)]
        containment: bool,
    },
    /// Select, execute and print one CSV report row.
    Run {
        #[command(flatten)]
        common: SelectArgs,
        #[arg(long, default_value = "delegated", value_parser = parse_with::<Mode>)]
        mode: Mode,
        /// Wall-clock limit in seconds.
        #[arg(long, default_value_t = 300)]
        timeout: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the answers after the report.
        #[arg(long)]
        answers: bool,
    },
    /// Run a benchmark manifest and write a CSV table.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        /// Overrides the manifest's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a replicated federation over one or more public datasets.
    GenFederation {
        /// N-Triples dataset; repeat for several public endpoints P1, P2, ...
        #[arg(long = "dataset", required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long, default_value_t = 4)]
        consumers: usize,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=2))]
        fragments_per_consumer: u64,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
        replication: u64,
        /// Constant-object fragments added to the per-predicate ones.
        #[arg(long, default_value_t = 0)]
        specializations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic N-Triples dataset.
    GenDataset {
        #[arg(long, default_value_t = 60)]
        entities: usize,
        #[arg(long, default_value_t = 3)]
        links: usize,
        #[arg(long, default_value_t = 3)]
        attributes: usize,
        #[arg(long, default_value_t = 6)]
        values: usize,
        #[arg(long, default_value_t = 2)]
        fanout: usize,
        #[arg(long, default_value_t = 0.6, value_parser = parse_fraction)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_with<T: std::str::FromStr<Err = String>>(s: &str) -> std::result::Result<T, String> {
    s.parse()
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()).into())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()).into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Select {
            common,
            containment,
        } => cmd_select(&common, containment),
        Command::Run {
            common,
            mode,
            timeout,
            out,
            answers,
        } => cmd_run(&common, mode, timeout, out.as_deref(), answers),
        Command::Bench { manifest, out } => cmd_bench(&manifest, out),
        Command::GenFederation {
            datasets,
            consumers,
            fragments_per_consumer,
            replication,
            specializations,
            seed,
            out,
        } => cmd_gen_federation(
            &datasets,
            &FederationSpec {
                consumers,
                fragments_per_consumer: fragments_per_consumer as usize,
                replication: replication as usize,
                specializations,
            },
            seed,
            &out,
        ),
        Command::GenDataset {
            entities,
            links,
            attributes,
            values,
            fanout,
            density,
            seed,
            out,
        } => {
            let spec = DatasetSpec {
                entities,
                link_predicates: links,
                attribute_predicates: attributes,
                values,
                fanout,
                density,
            };
            let text = serialize_ntriples(&gen_dataset(&spec, &mut rng(seed)));
            match out {
                Some(path) => write_file(&path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn cmd_select(args: &SelectArgs, show_containment: bool) -> Result<()> {
    let (catalog, fed, warnings) = load_federation(&args.catalog, args.lenient)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let catalog = catalog.with_visibility(Visibility {
        fraction: args.visibility,
        seed: args.seed,
    });
    let query = parse_query(&read(&args.query)?)?;
    for w in query.warnings() {
        eprintln!("warning: {w}");
    }
    let containment = build_containment(&catalog);
    let opts = RunOptions {
        strategy: args.strategy,
        mode: Mode::default(),
        fallback: args.fallback,
    };
    let selection = select(&query, &catalog, &containment, &fed, opts)?;
    let mut stdout = std::io::stdout().lock();
    if show_containment {
        writeln!(stdout, "containment:")?;
        for line in containment.dump().lines() {
            writeln!(stdout, "  {line}")?;
        }
    }
    write!(stdout, "{}", selection.render(&catalog))?;
    Ok(())
}

fn cmd_run(
    args: &SelectArgs,
    mode: Mode,
    timeout: u64,
    out: Option<&Path>,
    show_answers: bool,
) -> Result<()> {
    let (catalog, fed, warnings) = load_federation(&args.catalog, args.lenient)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let catalog = catalog.with_visibility(Visibility {
        fraction: args.visibility,
        seed: args.seed,
    });
    let query = parse_query(&read(&args.query)?)?;
    let id = args
        .query
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let opts = RunOptions {
        strategy: args.strategy,
        mode,
        fallback: args.fallback,
    };
    let outcome = run_with_timeout(
        &id,
        Arc::new(query),
        &catalog,
        Arc::new(fed),
        opts,
        Duration::from_secs(timeout),
    );
    let (row, report, failure) = match outcome {
        Timed::Done(report) => (ReportRow::from_report(&report), Some(report), None),
        Timed::Failed(msg, secs) => (
            ReportRow::failed(&id, opts, args.visibility, Status::Error, secs),
            None,
            Some(msg),
        ),
        Timed::TimedOut(secs) => (
            ReportRow::failed(&id, opts, args.visibility, Status::Timeout, secs),
            None,
            None,
        ),
    };
    let mut csv = Vec::new();
    write_rows(&mut csv, &[row])?;
    match out {
        Some(path) => write_file(path, std::str::from_utf8(&csv)?)?,
        None => std::io::stdout().write_all(&csv)?,
    }
    if let Some(msg) = failure {
        return Err(msg.into());
    }
    if show_answers {
        if let Some(report) = report {
            let mut stdout = std::io::stdout().lock();
            for answer in &report.answers {
                let cells: Vec<String> = answer
                    .iter()
                    .map(|t| t.as_ref().map(ToString::to_string).unwrap_or_default())
                    .collect();
                writeln!(stdout, "{}", cells.join("\t"))?;
            }
        }
    }
    Ok(())
}

fn cmd_bench(manifest: &Path, out: Option<PathBuf>) -> Result<()> {
    let suite = load_suite(manifest)?;
    let rows = run_suite(&suite, |msg| eprintln!("row failed: {msg}"));
    let mut csv = Vec::new();
    write_rows(&mut csv, &rows)?;
    match out.or_else(|| suite.out.clone()) {
        Some(path) => write_file(&path, std::str::from_utf8(&csv)?)?,
        None => std::io::stdout().write_all(&csv)?,
    }
    eprint!("{}", summarize(&rows));
    Ok(())
}

fn cmd_gen_federation(
    datasets: &[PathBuf],
    spec: &FederationSpec,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let mut publics: Vec<(String, TripleStore)> = Vec::new();
    for (i, path) in datasets.iter().enumerate() {
        let file =
            fs::File::open(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let store = read_ntriples(std::io::BufReader::new(file))
            .map_err(|e| format!("{}: {e}", path.display()))?;
        publics.push((format!("P{}", i + 1), store));
    }
    let generated = gen_federation(&publics, spec, &mut rng(seed))?;
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    write_file(&out.join("catalog.json"), &generated.catalog.to_json())?;
    let fed = materialize_federation(&generated.catalog, &generated.datasets)?;
    for endpoint in fed.endpoints() {
        write_file(
            &out.join(format!("{}.nt", endpoint.iri)),
            &serialize_ntriples(&endpoint.store),
        )?;
    }
    eprintln!(
        "wrote {} endpoints and {} fragments to {}",
        generated.catalog.endpoints().count(),
        generated.catalog.fragments().count(),
        out.display()
    );
    Ok(())
}
