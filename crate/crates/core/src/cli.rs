//! The `mqm` command-line tool.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error.

use std::error::Error;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::Dataset;
use crate::dataset_io::{export_dataset, import_annotations, AnnotationStore, FlatTableAdapter};
use crate::iaa::{kappa_report, KappaColumn, KappaReport};
use crate::report::{
    kappa_table, ratio_report, render_all, scope_count_report, scope_significance_report, significance_report,
    ReportFormat, ReportTable,
};
use crate::scope::{
    scope_counts, scope_significance, scope_token_normalize, ScopeCountTable, DEFAULT_TOKENS_PER_ERROR,
};
use crate::service::{router, ServiceConfig, SessionService};
use crate::stats::{significance_matrix, CountTable, PairMode, SignificanceOptions, DEFAULT_MIN_EXPECTED};
use crate::taxonomy::{diff_taxonomies, parse_taxonomy, Taxonomy, BUILTIN_NAMES};

/// Environment variable naming the default dataset directory.
pub const DATA_DIR_ENV: &str = "MQM_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "mqm", version, about = "MQM error annotation analytics")]
pub struct Cli {
    /// Taxonomy file or built-in name (core, slavic) used to label rows of
    /// counts files.
    #[arg(long, global = true, value_name = "FILE|NAME")]
    pub taxonomy: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Markdown,
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Markdown => ReportFormat::Markdown,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairsArg {
    Adjacent,
    All,
}

impl From<PairsArg> for PairMode {
    fn from(p: PairsArg) -> Self {
        match p {
            PairsArg::Adjacent => PairMode::Adjacent,
            PairsArg::All => PairMode::All,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ByArg {
    /// One column per system plus the concatenation.
    System,
    /// The concatenation column only.
    Concat,
}

#[derive(Debug, Args)]
pub struct Input {
    /// Dataset directory (a store log next to it is replayed).
    #[arg(long, env = DATA_DIR_ENV)]
    pub dataset: Option<PathBuf>,
    /// Counts file; takes precedence over the dataset.
    #[arg(long)]
    pub counts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long, value_enum, default_value = "adjacent")]
    pub pairs: PairsArg,
    /// Withhold significance marks when an expected cell count is below
    /// this; 0 disables the check.
    #[arg(long, default_value_t = DEFAULT_MIN_EXPECTED)]
    pub min_expected: f64,
}

impl TestArgs {
    fn options(&self) -> SignificanceOptions {
        SignificanceOptions {
            min_expected: self.min_expected,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and check a taxonomy file.
    ValidateTaxonomy {
        file: PathBuf,
        /// Also print the differences against another taxonomy file or
        /// built-in.
        #[arg(long, value_name = "FILE|NAME")]
        against: Option<String>,
    },
    /// Add annotations from a delimited export to a dataset.
    Import {
        #[arg(long, env = DATA_DIR_ENV)]
        dataset: PathBuf,
        /// Delimited file with annotator, system, segment, category, start,
        /// end and optional scope columns.
        #[arg(long)]
        from: PathBuf,
        /// Write the result here instead of updating the dataset in place.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a dataset (with its store log applied) as a fresh file set.
    Export {
        #[arg(long, env = DATA_DIR_ENV)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inter-annotator agreement (Cohen's kappa).
    Iaa {
        #[arg(long, env = DATA_DIR_ENV)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "system")]
        by: ByArg,
        #[command(flatten)]
        output: Output,
    },
    /// Error ratios per category and system.
    Ratios {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
    },
    /// Pairwise chi-squared tests per category.
    Significance {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        tests: TestArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Agreement-scope counts and token-normalized significance.
    Scope {
        #[command(flatten)]
        input: Input,
        /// Error tokens charged per scoped agreement error.
        #[arg(long, default_value_t = DEFAULT_TOKENS_PER_ERROR)]
        factor: u64,
        #[command(flatten)]
        tests: TestArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Every analysis of a dataset in one document.
    Report {
        #[arg(long, env = DATA_DIR_ENV)]
        dataset: PathBuf,
        #[command(flatten)]
        tests: TestArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Run the annotation session service.
    Serve {
        /// Dataset directories; each is served under its manifest name.
        #[arg(long = "dataset", env = DATA_DIR_ENV, required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Static bearer token required on every request.
        #[arg(long, env = "MQM_TOKEN")]
        token: Option<String>,
    },
}

type AnyError = Box<dyn Error + Send + Sync>;

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl Error for UsageError {}

fn read(path: &Path) -> Result<String, AnyError> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_taxonomy(spec: &str) -> Result<Taxonomy, AnyError> {
    if BUILTIN_NAMES.contains(&spec) {
        return Ok(Taxonomy::builtin(spec)?);
    }
    Ok(parse_taxonomy(&read(Path::new(spec))?)?)
}

fn open_dataset(dir: &Path) -> Result<Dataset, AnyError> {
    Ok(AnnotationStore::open(dir)?.snapshot().clone())
}

enum Loaded {
    Dataset(Box<Dataset>),
    Counts(String),
}

fn load_input(input: &Input) -> Result<Loaded, AnyError> {
    match (&input.dataset, &input.counts) {
        (_, Some(c)) => Ok(Loaded::Counts(read(c)?)),
        (Some(d), None) => Ok(Loaded::Dataset(Box::new(open_dataset(d)?))),
        (None, None) => Err(Box::new(UsageError(format!(
            "give --dataset or --counts (or set {DATA_DIR_ENV})"
        )))),
    }
}

fn label_taxonomy(cli: &Cli) -> Result<Taxonomy, AnyError> {
    load_taxonomy(cli.taxonomy.as_deref().unwrap_or("slavic"))
}

fn count_table(cli: &Cli, input: &Input) -> Result<(CountTable, Taxonomy), AnyError> {
    Ok(match load_input(input)? {
        Loaded::Dataset(d) => (d.count_table()?, d.taxonomy().clone()),
        Loaded::Counts(text) => (CountTable::from_csv(&text)?, label_taxonomy(cli)?),
    })
}

fn concat_only(mut r: KappaReport) -> KappaReport {
    let keep = r
        .columns
        .iter()
        .position(|c| *c == KappaColumn::Concat)
        .expect("concat column");
    r.columns = vec![KappaColumn::Concat];
    for row in &mut r.rows {
        row.cells = vec![row.cells[keep]];
    }
    r
}

fn scope_tables(scope: ScopeCountTable, factor: u64, tests: &TestArgs) -> Result<Vec<ReportTable>, AnyError> {
    let normalized = scope_token_normalize(&scope, factor)?;
    let sig = scope_significance(&normalized, tests.pairs.into(), &tests.options());
    Ok(vec![scope_count_report(&scope), scope_significance_report(&sig)])
}

fn serve(datasets: &[PathBuf], bind: &str, token: Option<String>) -> Result<(), AnyError> {
    let service = Arc::new(SessionService::new());
    for dir in datasets {
        let store = AnnotationStore::open(dir)?;
        let id = store.snapshot().name().to_owned();
        log::info!("serving dataset {id} from {}", dir.display());
        service.add_dataset(id, store);
    }
    let app = router(service, ServiceConfig { token });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await
    })?;
    Ok(())
}

/// Runs a parsed command, writing documents to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), AnyError> {
    match &cli.command {
        Command::ValidateTaxonomy { file, against } => {
            let t = parse_taxonomy(&read(file)?)?;
            let selectable = t.categories().iter().filter(|c| c.selectable).count();
            writeln!(
                out,
                "ok: {}@{}, {} categories ({selectable} selectable), depth {}",
                t.name(),
                t.version(),
                t.len(),
                t.max_depth()
            )?;
            if let Some(other) = against {
                let base = load_taxonomy(other)?;
                let diff = diff_taxonomies(&base, &t);
                for id in &diff.removed {
                    writeln!(out, "removed {id}")?;
                }
                for id in &diff.added {
                    writeln!(out, "added {id}")?;
                }
                for m in &diff.moved {
                    writeln!(out, "moved {} -> {}", m.from, m.to)?;
                }
            }
        }
        Command::Import {
            dataset,
            from,
            out: dest,
        } => {
            let d = open_dataset(dataset)?;
            let adapter = match from.extension().and_then(|e| e.to_str()) {
                Some("tsv") | Some("tab") => FlatTableAdapter::TSV,
                _ => FlatTableAdapter::CSV,
            };
            let merged = import_annotations(&d, &adapter, &read(from)?)?;
            export_dataset(&merged, dest.as_deref().unwrap_or(dataset))?;
            writeln!(
                out,
                "imported {} annotations",
                merged.annotations().len() - d.annotations().len()
            )?;
        }
        Command::Export { dataset, out: dest } => {
            export_dataset(&open_dataset(dataset)?, dest)?;
            writeln!(out, "exported to {}", dest.display())?;
        }
        Command::Iaa { dataset, by, output } => {
            let d = open_dataset(dataset)?;
            let mut r = kappa_report(&d)?;
            if matches!(by, ByArg::Concat) {
                r = concat_only(r);
            }
            let t = kappa_table(&r, Some(d.taxonomy()));
            out.write_all(render_all(&[t], output.format.into()).as_bytes())?;
        }
        Command::Ratios { input, output } => {
            let (counts, tax) = count_table(cli, input)?;
            let t = ratio_report(&counts, Some(&tax));
            out.write_all(render_all(&[t], output.format.into()).as_bytes())?;
        }
        Command::Significance { input, tests, output } => {
            let (counts, tax) = count_table(cli, input)?;
            let m = significance_matrix(&counts, tests.pairs.into(), &tests.options())?;
            let t = significance_report(&m, Some(&tax));
            out.write_all(render_all(&[t], output.format.into()).as_bytes())?;
        }
        Command::Scope {
            input,
            factor,
            tests,
            output,
        } => {
            let scope = match load_input(input)? {
                Loaded::Dataset(d) => scope_counts(&d),
                Loaded::Counts(text) => ScopeCountTable::from_csv(&text)?,
            };
            let tables = scope_tables(scope, *factor, tests)?;
            out.write_all(render_all(&tables, output.format.into()).as_bytes())?;
        }
        Command::Report { dataset, tests, output } => {
            let d = open_dataset(dataset)?;
            let counts = d.count_table()?;
            let m = significance_matrix(&counts, tests.pairs.into(), &tests.options())?;
            let mut tables = vec![
                kappa_table(&kappa_report(&d)?, Some(d.taxonomy())),
                ratio_report(&counts, Some(d.taxonomy())),
                significance_report(&m, Some(d.taxonomy())),
            ];
            tables.extend(scope_tables(scope_counts(&d), DEFAULT_TOKENS_PER_ERROR, tests)?);
            out.write_all(render_all(&tables, output.format.into()).as_bytes())?;
        }
        Command::Serve { datasets, bind, token } => serve(datasets, bind, token.clone())?,
    }
    Ok(())
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is::<UsageError>() {
                2
            } else {
                1
            }
        }
    }
}
