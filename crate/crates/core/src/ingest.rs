//! CSV column ingestion and histogram file formats.
//!
//! Histogram files come in two shapes:
//!
//! * CSV with header `category,count,origin` (origin blank for plain
//!   histograms).
//! * JSON `{"bins": [{"label", "count", "origin"}], "meta": {...}}`, where
//!   `meta` records ε, ρ, n, τ and the seed of a release and is absent for
//!   plain histograms.
//!
//! Counts are written in shortest round-trip form, so a seeded release
//! serializes to the same bytes every time.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{Category, Histogram, NoisyBin, NoisyHistogram, Origin, ReleaseMeta};

/// Adult's marker for a missing value.
pub const MISSING_MARKER: &str = "?";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Path(PathBuf),
    Stdin,
}

impl Source {
    /// `-` means standard input.
    pub fn parse(s: &str) -> Self {
        if s == "-" {
            Source::Stdin
        } else {
            Source::Path(PathBuf::from(s))
        }
    }

    fn describe(&self) -> String {
        match self {
            Source::Path(p) => p.display().to_string(),
            Source::Stdin => "<stdin>".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// All-digit strings select by position, anything else by header name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSelector {
    pub source: Source,
    pub column: ColumnRef,
    pub has_header: bool,
    pub delimiter: u8,
    /// Skip cells equal to [`MISSING_MARKER`] instead of counting them.
    pub drop_missing: bool,
}

impl ColumnSelector {
    pub fn new(source: Source, column: ColumnRef) -> Self {
        ColumnSelector { source, column, has_header: true, delimiter: b',', drop_missing: false }
    }
}

/// Histogram of one column plus what was skipped on the way.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnHistogram {
    pub histogram: Histogram,
    /// Header name of the column, when there is a header.
    pub column_name: Option<String>,
    pub skipped_empty: usize,
    pub dropped_missing: usize,
}

fn csv_error(location: &str, e: csv::Error) -> Error {
    let location = match e.position() {
        Some(pos) => format!("{location}: line {}", pos.line()),
        None => location.to_string(),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: PathBuf::from(location), source },
        kind => Error::Csv { location, message: csv_kind_message(kind) },
    }
}

fn csv_kind_message(kind: csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields but found {len}")
        }
        csv::ErrorKind::Utf8 { err, .. } => format!("invalid UTF-8: {err}"),
        other => format!("{other:?}"),
    }
}

fn open_source(source: &Source) -> Result<Box<dyn Read>> {
    match source {
        Source::Path(p) => Ok(Box::new(File::open(p).map_err(|e| Error::io(p, e))?)),
        Source::Stdin => Ok(Box::new(io::stdin())),
    }
}

/// Counts the distinct trimmed values of one CSV column, in order of first
/// appearance. Empty cells are skipped and counted.
pub fn read_histogram(sel: &ColumnSelector) -> Result<ColumnHistogram> {
    read_histogram_from(sel, open_source(&sel.source)?)
}

pub fn read_histogram_from<R: Read>(sel: &ColumnSelector, input: R) -> Result<ColumnHistogram> {
    let location = sel.source.describe();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(sel.has_header)
        .delimiter(sel.delimiter)
        .trim(csv::Trim::All)
        .from_reader(input);

    let (column, column_name) = if sel.has_header {
        let headers = reader.headers().map_err(|e| csv_error(&location, e))?.clone();
        let available: Vec<String> = headers.iter().map(str::to_string).collect();
        let idx = match &sel.column {
            ColumnRef::Name(name) => headers.iter().position(|h| h == name),
            ColumnRef::Index(i) => (*i < headers.len()).then_some(*i),
        };
        // a header-only file with no header fields has nothing to select
        match idx {
            Some(i) => (Some(i), Some(available[i].clone())),
            None if available.is_empty() => (None, None),
            None => {
                let column = match &sel.column {
                    ColumnRef::Name(n) => n.clone(),
                    ColumnRef::Index(i) => i.to_string(),
                };
                return Err(Error::MissingColumn { column, available });
            }
        }
    } else {
        match &sel.column {
            ColumnRef::Index(i) => (Some(*i), None),
            ColumnRef::Name(n) => {
                return Err(Error::InvalidParameter(format!("column {n:?} selected by name but the input has no header")))
            }
        }
    };

    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut skipped_empty = 0;
    let mut dropped_missing = 0;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(|e| csv_error(&location, e))? {
        let Some(col) = column else {
            return Err(Error::Csv { location, message: "data rows present but the header is empty".into() });
        };
        let Some(cell) = record.get(col) else {
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            return Err(Error::MissingColumn {
                column: col.to_string(),
                available: vec![format!("{} fields on line {line}", record.len())],
            });
        };
        if cell.is_empty() {
            skipped_empty += 1;
            continue;
        }
        if sel.drop_missing && cell == MISSING_MARKER {
            dropped_missing += 1;
            continue;
        }
        match counts.get_mut(cell) {
            Some(n) => *n += 1,
            None => {
                counts.insert(cell.to_string(), 1);
                order.push(cell.to_string());
            }
        }
    }

    let histogram = Histogram::from_counts(order.into_iter().map(|l| {
        let n = counts[&l] as f64;
        (l, n)
    }))?;
    Ok(ColumnHistogram { histogram, column_name, skipped_empty, dropped_missing })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistogramFormat {
    Csv,
    Json,
}

impl HistogramFormat {
    /// `.json` means JSON; everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => HistogramFormat::Json,
            _ => HistogramFormat::Csv,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FileBin {
    label: Category,
    count: f64,
    origin: Option<Origin>,
}

#[derive(Serialize, Deserialize)]
struct FileDoc {
    bins: Vec<FileBin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<ReleaseMeta>,
}

const CSV_HEADER: [&str; 3] = ["category", "count", "origin"];

fn write_doc<W: Write>(doc: &FileDoc, out: W, format: HistogramFormat, location: &str) -> Result<()> {
    let io_err = |e| Error::io(location, e);
    match format {
        HistogramFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, doc).map_err(|e| io_err(e.into()))?;
            out.write_all(b"\n").map_err(io_err)?;
            out.flush().map_err(io_err)
        }
        HistogramFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER).map_err(|e| csv_error(location, e))?;
            for b in &doc.bins {
                let origin = b.origin.map(Origin::as_str).unwrap_or("");
                w.write_record([b.label.as_str(), &b.count.to_string(), origin])
                    .map_err(|e| csv_error(location, e))?;
            }
            w.flush().map_err(io_err)
        }
    }
}

fn plain_doc(h: &Histogram) -> FileDoc {
    FileDoc {
        bins: h.bins().iter().map(|(c, n)| FileBin { label: c.clone(), count: *n, origin: None }).collect(),
        meta: None,
    }
}

fn noisy_doc(nh: &NoisyHistogram) -> FileDoc {
    FileDoc {
        bins: nh
            .bins()
            .iter()
            .map(|b| FileBin { label: b.category.clone(), count: b.count, origin: Some(b.origin) })
            .collect(),
        meta: nh.meta().cloned(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_histogram(h: &Histogram, path: &Path, format: HistogramFormat) -> Result<()> {
    write_doc(&plain_doc(h), create(path)?, format, &path.display().to_string())
}

pub fn write_histogram_to<W: Write>(h: &Histogram, out: W, format: HistogramFormat) -> Result<()> {
    write_doc(&plain_doc(h), out, format, "<output>")
}

pub fn write_noisy_histogram(nh: &NoisyHistogram, path: &Path, format: HistogramFormat) -> Result<()> {
    write_doc(&noisy_doc(nh), create(path)?, format, &path.display().to_string())
}

pub fn write_noisy_histogram_to<W: Write>(nh: &NoisyHistogram, out: W, format: HistogramFormat) -> Result<()> {
    write_doc(&noisy_doc(nh), out, format, "<output>")
}

fn read_doc<R: Read>(input: R, format: HistogramFormat, location: &str) -> Result<FileDoc> {
    match format {
        HistogramFormat::Json => serde_json::from_reader(input).map_err(|e| {
            if e.is_io() {
                Error::io(location, e.into())
            } else {
                Error::Format { location: format!("{location}: line {}", e.line()), message: e.to_string() }
            }
        }),
        HistogramFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(input);
            let headers = reader.headers().map_err(|e| csv_error(location, e))?.clone();
            let find = |name: &str| headers.iter().position(|h| h == name);
            let (Some(ci), Some(ni)) = (find("category"), find("count")) else {
                return Err(Error::Format {
                    location: location.to_string(),
                    message: "histogram CSV needs `category` and `count` columns".into(),
                });
            };
            let oi = find("origin");
            let mut bins = Vec::new();
            for record in reader.records() {
                let record = record.map_err(|e| csv_error(location, e))?;
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                let bad = |message: String| Error::Format { location: format!("{location}: line {line}"), message };
                let label = Category::new(&record[ci]).map_err(|e| bad(e.to_string()))?;
                let count: f64 =
                    record[ni].trim().parse().map_err(|_| bad(format!("count {:?} is not a number", &record[ni])))?;
                let origin = match oi.map(|i| record[i].trim()) {
                    None | Some("") => None,
                    Some(o) => Some(o.parse::<Origin>().map_err(bad)?),
                };
                bins.push(FileBin { label, count, origin });
            }
            Ok(FileDoc { bins, meta: None })
        }
    }
}

fn open_file(path: &Path) -> Result<io::BufReader<File>> {
    Ok(io::BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

pub fn read_histogram_file(path: &Path) -> Result<Histogram> {
    let doc = read_doc(open_file(path)?, HistogramFormat::from_path(path), &path.display().to_string())?;
    Histogram::new(doc.bins.into_iter().map(|b| (b.label, b.count)).collect())
}

/// Reads a release. Bins without an origin are taken as active.
pub fn read_noisy_histogram_file(path: &Path) -> Result<NoisyHistogram> {
    read_noisy_histogram_from(open_file(path)?, HistogramFormat::from_path(path), &path.display().to_string())
}

pub fn read_noisy_histogram_from<R: Read>(input: R, format: HistogramFormat, location: &str) -> Result<NoisyHistogram> {
    let doc = read_doc(input, format, location)?;
    let bins = doc
        .bins
        .into_iter()
        .map(|b| NoisyBin { category: b.label, count: b.count, origin: b.origin.unwrap_or(Origin::Active) })
        .collect();
    let nh = NoisyHistogram::new(bins)?;
    Ok(match doc.meta {
        Some(meta) => nh.with_meta(meta),
        None => nh,
    })
}

pub fn read_histogram_from_reader<R: Read>(input: R, format: HistogramFormat) -> Result<Histogram> {
    let doc = read_doc(input, format, "<input>")?;
    Histogram::new(doc.bins.into_iter().map(|b| (b.label, b.count)).collect())
}
