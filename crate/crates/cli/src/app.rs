//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 privacy-parameter or domain
//! error, 3 I/O or input-format error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use cathist::ingest::{self, ColumnRef, ColumnSelector, HistogramFormat, Source};
use cathist::numerics::{self, derive_seed, seeded_rng};
use cathist::{
    cat_hist, fidelity_with, synthesize_records, CatHistConfig, DomainSampler, DomainSpec, FidelityVariant,
    PrivacyParams, TrialsConvention,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::sweep::{self, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDITY: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Differentially private categorical histograms over weakly constrained domains.
///
/// Each invocation spends its full epsilon; budgets are not tracked across runs.
#[derive(Debug, Parser)]
#[command(name = "cathist", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the noise threshold for a privacy setting and domain size.
    Tau(TauArgs),
    /// Release a noisy histogram of one column, optionally with synthetic records.
    Synth(SynthArgs),
    /// Run repeated releases over an epsilon x rho grid and report fidelity.
    Sweep(SweepArgs),
    /// Score a released histogram against the true one.
    Fidelity(FidelityArgs),
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML file of `flag-name = value` defaults; explicit flags win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TauArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub rho: f64,
    /// Domain size.
    #[arg(long)]
    pub n: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ColumnArgs {
    /// CSV file to read, or `-` for standard input.
    #[arg(long, value_name = "PATH")]
    pub input: String,
    /// Header name, or 0-based index, of the column to release.
    #[arg(long)]
    pub column: String,
    /// The input has no header row (select columns by index).
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    /// Skip `?` cells instead of treating them as a category.
    #[arg(long)]
    pub drop_missing: bool,
}

impl ColumnArgs {
    fn selector(&self) -> anyhow::Result<ColumnSelector> {
        if !self.delimiter.is_ascii() {
            return Err(usage(format!("delimiter must be a single ASCII character, got {:?}", self.delimiter)));
        }
        let mut sel = ColumnSelector::new(Source::parse(&self.input), ColumnRef::parse(&self.column));
        sel.has_header = !self.no_header;
        sel.delimiter = self.delimiter as u8;
        sel.drop_missing = self.drop_missing;
        Ok(sel)
    }
}

#[derive(Debug, Args)]
pub struct DomainArgs {
    #[command(flatten)]
    pub source: DomainSource,
    /// Label prefix for --domain-size; ignored otherwise.
    #[arg(long, default_value = "value")]
    pub domain_prefix: String,
}

#[derive(Debug, Args)]
#[group(id = "domain", required = true, multiple = false)]
pub struct DomainSource {
    /// Comma-separated list of every category in the domain.
    #[arg(long, value_delimiter = ',', group = "domain")]
    pub domain_list: Option<Vec<String>>,
    /// Domain is every word of this file (one per line).
    #[arg(long, value_name = "PATH", group = "domain")]
    pub wordlist: Option<PathBuf>,
    /// Domain is every ordered pair of words of this file, space-joined.
    #[arg(long, value_name = "PATH", group = "domain")]
    pub word_pairs: Option<PathBuf>,
    /// Domain known only by its size; injected labels are `<prefix>-<index>`.
    #[arg(long, value_name = "N", group = "domain")]
    pub domain_size: Option<u64>,
}

impl DomainArgs {
    fn spec(&self) -> anyhow::Result<DomainSpec> {
        let src = &self.source;
        Ok(if let Some(list) = &src.domain_list {
            DomainSpec::explicit(list.iter().map(|s| s.trim().to_string()))?
        } else if let Some(p) = &src.wordlist {
            DomainSpec::WordList(p.clone())
        } else if let Some(p) = &src.word_pairs {
            DomainSpec::WordPairs(p.clone())
        } else if let Some(n) = src.domain_size {
            DomainSpec::size_only(n, self.domain_prefix.clone())
        } else {
            return Err(usage("one of --domain-list, --wordlist, --word-pairs or --domain-size is required"));
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Trials {
    /// n trials (P(no injected bin) is exactly rho).
    Full,
    /// n minus the number of active categories.
    MinusActive,
}

impl From<Trials> for TrialsConvention {
    fn from(t: Trials) -> Self {
        match t {
            Trials::Full => TrialsConvention::FullN,
            Trials::MinusActive => TrialsConvention::NMinusActive,
        }
    }
}

#[derive(Debug, Args)]
pub struct MechanismArgs {
    #[arg(long, default_value = "full")]
    pub trials: Trials,
    /// Accept observed categories missing from the declared domain as members.
    #[arg(long)]
    pub allow_out_of_domain_active: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl From<Format> for HistogramFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => HistogramFormat::Csv,
            Format::Json => HistogramFormat::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub column: ColumnArgs,
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub mechanism: MechanismArgs,
    /// Where to write the noisy histogram (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Histogram format; defaults to the output extension, else JSON.
    #[arg(long)]
    pub format: Option<Format>,
    /// Number of synthetic records to draw from the release.
    #[arg(long, value_name = "M", requires = "records_output")]
    pub records: Option<usize>,
    /// One-column CSV receiving the synthetic records.
    #[arg(long, value_name = "PATH", requires = "records")]
    pub records_output: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub column: ColumnArgs,
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, value_delimiter = ',', default_values_t = sweep::DEFAULT_EPSILONS)]
    pub epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = sweep::DEFAULT_RHOS)]
    pub rhos: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub repetitions: u32,
    #[arg(long)]
    pub seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub mechanism: MechanismArgs,
    /// Sweep CSV destination (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Variant {
    /// (true mass on shared categories) x (synthetic mass on them).
    Intersection,
    /// Sum of p_true * p_synth over shared categories.
    Pointwise,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    /// True histogram file, or a raw CSV when --true-column is given.
    #[arg(long = "true", value_name = "PATH")]
    pub truth: PathBuf,
    /// Count this column of --true instead of reading it as a histogram.
    #[arg(long, value_name = "COLUMN")]
    pub true_column: Option<String>,
    /// Released histogram file (CSV or JSON).
    #[arg(long, value_name = "PATH")]
    pub synth: PathBuf,
    #[arg(long, default_value = "intersection")]
    pub variant: Variant,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Maps an error chain to the documented exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<cathist::Error>() {
            return match e {
                e if e.is_validity() => EXIT_VALIDITY,
                cathist::Error::Io { .. }
                | cathist::Error::Csv { .. }
                | cathist::Error::Format { .. }
                | cathist::Error::MissingColumn { .. } => EXIT_IO,
                _ => EXIT_USAGE,
            };
        }
        if cause.is::<io::Error>() || cause.is::<csv::Error>() || cause.is::<toml::de::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_USAGE
}

const SUBCOMMANDS: [&str; 4] = ["tau", "synth", "sweep", "fidelity"];

fn toml_value_args(key: &str, value: &toml::Value) -> anyhow::Result<Vec<OsString>> {
    let flag = OsString::from(format!("--{key}"));
    let scalar = |v: &toml::Value| -> anyhow::Result<String> {
        Ok(match v {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            other => return Err(usage(format!("config key {key:?}: unsupported value {other}"))),
        })
    };
    Ok(match value {
        toml::Value::Boolean(true) => vec![flag],
        toml::Value::Boolean(false) => vec![],
        toml::Value::Array(items) => {
            let joined = items.iter().map(scalar).collect::<anyhow::Result<Vec<_>>>()?.join(",");
            vec![flag, joined.into()]
        }
        v => vec![flag, scalar(v)?.into()],
    })
}

/// Splices `--config` file entries in right after the subcommand name so
/// that flags given on the command line override them.
pub fn expand_config(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut config_path: Option<PathBuf> = None;
    for (i, a) in args.iter().enumerate() {
        let Some(s) = a.to_str() else { continue };
        if s == "--config" {
            config_path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config_path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = config_path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;

    let Some(pos) = args.iter().position(|a| a.to_str().is_some_and(|s| SUBCOMMANDS.contains(&s))) else {
        return Ok(args);
    };
    let given = |key: &str| {
        let flag = format!("--{key}");
        args[pos + 1..].iter().filter_map(|a| a.to_str()).any(|a| {
            a == flag || a.strip_prefix(flag.as_str()).is_some_and(|rest| rest.starts_with('='))
        })
    };
    let mut injected = Vec::new();
    for (key, value) in &table {
        if key == "config" || given(key) {
            continue;
        }
        injected.extend(toml_value_args(key, value)?);
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{rendered}") } else { write!(stdout, "{rendered}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Tau(a) => cmd_tau(&a, stdout),
        Command::Synth(a) => cmd_synth(&a, stdout, stderr),
        Command::Sweep(a) => cmd_sweep(&a, stdout, stderr),
        Command::Fidelity(a) => cmd_fidelity(&a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            exit_code(&e)
        }
    }
}

fn params(epsilon: f64, rho: f64) -> anyhow::Result<PrivacyParams> {
    PrivacyParams::new(epsilon, rho).map_err(|e| usage(e.to_string()))
}

fn cmd_tau(a: &TauArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let p = params(a.epsilon, a.rho)?;
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let tau = p.tau(a.n)?;
    let incl = numerics::inclusion_prob(a.epsilon, tau)?;
    let rho_check = numerics::log_prob_zero(a.n, incl).exp();
    writeln!(out, "tau = {tau:?}")?;
    writeln!(out, "p = {incl:?}")?;
    writeln!(out, "expected injected bins = {:?}", a.n as f64 * incl)?;
    writeln!(out, "P(zero injected) = {rho_check:?} (rho = {:?})", a.rho)?;
    Ok(())
}

fn open_output<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> anyhow::Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(
            File::create(p).map_err(|e| cathist::Error::Io { path: p.to_path_buf(), source: e })?,
        )),
        _ => Box::new(stdout),
    })
}

// stream for record synthesis, distinct from the release streams
const RECORDS_STREAM: u64 = 3;

fn cmd_synth(a: &SynthArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let privacy = params(a.epsilon, a.rho)?;
    let column = ingest::read_histogram(&a.column.selector()?)?;
    report_skipped(&column, stderr)?;
    let domain = DomainSampler::load(a.domain.spec()?)?;
    let config = CatHistConfig::new(privacy, a.seed)
        .with_trials(a.mechanism.trials.into())
        .allow_out_of_domain_active(a.mechanism.allow_out_of_domain_active);
    let released = cat_hist(&config, &domain, &column.histogram)?;

    let meta = released.meta().expect("releases carry metadata");
    writeln!(
        stderr,
        "tau = {}; active bins: {} surviving, {} removed; injected bins: {}",
        meta.tau,
        released.active_count(),
        meta.removed,
        released.injected_count()
    )?;

    let format = a
        .format
        .map(HistogramFormat::from)
        .or_else(|| a.output.as_deref().filter(|p| *p != Path::new("-")).map(HistogramFormat::from_path))
        .unwrap_or(HistogramFormat::Json);
    {
        let mut out = open_output(a.output.as_deref(), stdout)?;
        ingest::write_noisy_histogram_to(&released, &mut out, format)?;
        out.flush()?;
    }

    if let (Some(m), Some(path)) = (a.records, a.records_output.as_deref()) {
        let header = column.column_name.clone().unwrap_or_else(|| "value".to_string());
        let records = if released.is_empty() {
            writeln!(stderr, "warning: the release is empty; writing no records")?;
            Vec::new()
        } else {
            let mut rng = seeded_rng(derive_seed(a.seed, &[RECORDS_STREAM]));
            synthesize_records(&mut rng, &released, m)?
        };
        let mut w = csv::Writer::from_writer(open_output(Some(path), stdout)?);
        w.write_record([header])?;
        for r in &records {
            w.write_record([r.as_str()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn report_skipped(column: &ingest::ColumnHistogram, stderr: &mut dyn Write) -> io::Result<()> {
    if column.skipped_empty > 0 {
        writeln!(stderr, "warning: skipped {} empty cells", column.skipped_empty)?;
    }
    if column.dropped_missing > 0 {
        writeln!(stderr, "note: dropped {} `?` cells", column.dropped_missing)?;
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    for &e in &a.epsilons {
        if !(e > 0.0 && e.is_finite()) {
            return Err(usage(format!("epsilon values must be positive, got {e}")));
        }
    }
    for &r in &a.rhos {
        if !(r > 0.0 && r < 1.0) {
            return Err(usage(format!("rho values must lie strictly between 0 and 1, got {r}")));
        }
    }
    if a.repetitions == 0 {
        return Err(usage("--repetitions must be at least 1"));
    }
    let column = ingest::read_histogram(&a.column.selector()?)?;
    report_skipped(&column, stderr)?;
    let domain = DomainSampler::load(a.domain.spec()?)?;
    let config = SweepConfig {
        epsilons: a.epsilons.clone(),
        rhos: a.rhos.clone(),
        repetitions: a.repetitions,
        base_seed: a.seed,
        trials: a.mechanism.trials.into(),
        allow_out_of_domain_active: a.mechanism.allow_out_of_domain_active,
        jobs: a.jobs,
    };
    if column.histogram.total() <= 0.0 {
        bail!(cathist::Error::EmptyDistribution);
    }
    let result = sweep::run_sweep(&config, &domain, &column.histogram)?;
    for row in result.invalid() {
        writeln!(
            stderr,
            "skipping epsilon = {}, rho = {}: {}",
            row.epsilon,
            row.rho,
            row.outcome.as_ref().err().map(String::as_str).unwrap_or("")
        )?;
    }
    let mut out = open_output(a.output.as_deref(), stdout)?;
    sweep::write_sweep_csv(&result, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_fidelity(a: &FidelityArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let truth = match &a.true_column {
        Some(col) => {
            let sel = ColumnSelector::new(Source::Path(a.truth.clone()), ColumnRef::parse(col));
            ingest::read_histogram(&sel)?.histogram
        }
        None => ingest::read_histogram_file(&a.truth)?,
    };
    let synth = ingest::read_noisy_histogram_file(&a.synth)?;
    let variant = match a.variant {
        Variant::Intersection => FidelityVariant::IntersectionMass,
        Variant::Pointwise => FidelityVariant::PointwiseProduct,
    };
    let score = fidelity_with(&truth, &synth, variant).map_err(|e| match e {
        cathist::Error::EmptyDistribution => anyhow!(cathist::Error::Format {
            location: a.truth.display().to_string(),
            message: "true histogram has zero total count".into(),
        }),
        e => e.into(),
    })?;
    writeln!(out, "F = {}", score.value)?;
    writeln!(out, "shared categories = {}", score.intersection_size)?;
    writeln!(out, "true mass in intersection = {}", score.true_mass_in_intersection)?;
    writeln!(out, "synthetic mass in intersection = {}", score.synth_mass_in_intersection)?;
    Ok(())
}
