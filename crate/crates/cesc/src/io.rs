//! Reading and writing feature tables, edge lists, label files and
//! embeddings. Every writer goes through a temporary file in the target
//! directory, so a failed run never leaves a partial output behind.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cesc_core::dense::DenseMatrix;
use cesc_core::{EdgeList, EdgeListBuilder, FeatureMatrix};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{path}: {source}")]
    Core { path: PathBuf, source: cesc_core::Error },

    #[error("{0}: file is empty")]
    Empty(PathBuf),
}

pub type IoResult<T> = Result<T, IoError>;

/// Which CSV column, if any, holds the class label. `Auto` picks the last
/// column when any of its data cells is not a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Auto,
    None,
    Last,
    Index(usize),
}

impl FromStr for LabelColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "auto" => Ok(LabelColumn::Auto),
            "none" | "" => Ok(LabelColumn::None),
            "last" => Ok(LabelColumn::Last),
            other => other
                .parse()
                .map(LabelColumn::Index)
                .map_err(|_| format!("label column must be `auto`, `none`, `last` or an index, got `{other}`")),
        }
    }
}

/// Whether the first CSV line is a header. `Auto` treats it as one when any
/// feature cell fails to parse as a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Header {
    #[default]
    Auto,
    Yes,
    No,
}

impl FromStr for Header {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "auto" => Ok(Header::Auto),
            "yes" | "true" => Ok(Header::Yes),
            "no" | "false" => Ok(Header::No),
            other => Err(format!("header must be `auto`, `yes` or `no`, got `{other}`")),
        }
    }
}

/// Feature table plus the original label strings, indexed by dense label id.
#[derive(Debug, Clone)]
pub struct LoadedFeatures {
    pub features: FeatureMatrix,
    pub label_names: Vec<String>,
}

fn open(path: &Path) -> IoResult<File> {
    File::open(path).map_err(|source| IoError::Io { path: path.into(), source })
}

pub fn load_features(path: &Path, header: Header, label_column: LabelColumn) -> IoResult<LoadedFeatures> {
    parse_features(open(path)?, path, header, label_column)
}

/// Parses comma-separated rows. Labels are arbitrary strings mapped to dense
/// ids in order of first appearance.
pub fn parse_features<R: Read>(
    reader: R,
    path: &Path,
    header: Header,
    label_column: LabelColumn,
) -> IoResult<LoadedFeatures> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text).map_err(|source| IoError::Io { path: path.into(), source })?;
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let line_of = |r: &csv::StringRecord| {
        let bytes = text.as_bytes();
        // the recorded offset may sit on blank lines skipped before the record
        let mut byte = r.position().map_or(0, |p| p.byte() as usize);
        while byte < bytes.len() && (bytes[byte] == b'\n' || bytes[byte] == b'\r') {
            byte += 1;
        }
        1 + text.as_bytes()[..byte.min(text.len())].iter().filter(|&&b| b == b'\n').count() as u64
    };
    let parse_err = |line: u64, message: String| IoError::Parse { path: path.into(), line, message };
    let mut records = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|source| IoError::Csv { path: path.into(), source })?;
        if !(record.len() == 1 && record[0].is_empty()) {
            records.push(record);
        }
    }
    let numeric = |cell: &str| cell.parse::<f64>().is_ok();
    let label_column = match label_column {
        LabelColumn::Auto => {
            let last_is_text = records
                .iter()
                .skip(1)
                .any(|r| r.get(r.len() - 1).is_some_and(|c| !numeric(c)));
            if last_is_text {
                LabelColumn::Last
            } else {
                LabelColumn::None
            }
        }
        other => other,
    };
    let label_of = |len: usize| match label_column {
        LabelColumn::Last => Some(len - 1),
        LabelColumn::Index(i) => Some(i),
        _ => None,
    };
    let has_header = match (header, records.first()) {
        (Header::Yes, _) => true,
        (Header::No, _) | (_, None) => false,
        (Header::Auto, Some(r)) => {
            let label_at = label_of(r.len());
            r.iter().enumerate().any(|(c, cell)| Some(c) != label_at && !numeric(cell))
        }
    };
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut label_names = Vec::new();
    let mut width = None;
    for record in records.iter().skip(usize::from(has_header)) {
        let line = line_of(record);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(line, format!("expected {w} cells, found {}", record.len())));
            }
            _ => {}
        }
        let label_at = label_of(record.len());
        if let Some(i) = label_at.filter(|&i| i >= record.len()) {
            return Err(parse_err(line, format!("label column {i} missing from a row of {} cells", record.len())));
        }
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_at {
                let next = label_names.len();
                let id = *label_ids.entry(cell.to_string()).or_insert_with(|| {
                    label_names.push(cell.to_string());
                    next
                });
                labels.push(id);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| parse_err(line, format!("column {}: `{cell}` is not a number", c + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: `{cell}` is not finite", c + 1)));
            }
            values.push(v);
        }
    }
    let Some(width) = width else {
        return Err(IoError::Empty(path.into()));
    };
    let labelled = label_column != LabelColumn::None;
    let d = width - usize::from(labelled);
    if d == 0 {
        return Err(parse_err(1, "no feature columns".into()));
    }
    let n = values.len() / d;
    let matrix = DenseMatrix::from_vec(n, d, values).map_err(|source| IoError::Core { path: path.into(), source })?;
    let labels = labelled.then_some(labels);
    let features = FeatureMatrix::new(matrix, labels).map_err(|source| IoError::Core { path: path.into(), source })?;
    Ok(LoadedFeatures { features, label_names })
}

pub fn load_edge_list(path: &Path) -> IoResult<EdgeList> {
    parse_edge_list(BufReader::new(open(path)?), path)
}

/// Parses `u v [w]` lines; `#` starts a comment.
pub fn parse_edge_list<R: BufRead>(reader: R, path: &Path) -> IoResult<EdgeList> {
    let mut builder = EdgeListBuilder::new();
    let parse_err = |line: u64, message: String| IoError::Parse { path: path.into(), line, message };
    for (i, text) in reader.lines().enumerate() {
        let line = i as u64 + 1;
        let text = text.map_err(|source| IoError::Io { path: path.into(), source })?;
        let body = text.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(line, format!("expected `u v [w]`, found {} fields", fields.len())));
        }
        let id = |s: &str| s.parse::<u64>().map_err(|_| parse_err(line, format!("`{s}` is not a non-negative node id")));
        let u = id(fields[0])?;
        let v = id(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => s.parse::<f64>().map_err(|_| parse_err(line, format!("`{s}` is not a weight")))?,
            None => 1.0,
        };
        builder.push(u, v, w).map_err(|e| parse_err(line, e.to_string()))?;
    }
    builder.finish().map_err(|e| match e {
        cesc_core::Error::EmptyInput => IoError::Empty(path.into()),
        source => IoError::Core { path: path.into(), source },
    })
}

/// Writes `out` atomically: the content lands in a sibling temporary file
/// that is renamed over `path` only once `write` succeeds.
pub fn write_atomic<F>(path: &Path, write: F) -> IoResult<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let wrap = |source| IoError::Io { path: path.into(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write(&mut out).map_err(wrap)?;
        out.flush().map_err(wrap)?;
    }
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

/// Writes to `path`, or to standard output when `path` is `-`.
pub fn write_output<F>(path: &Path, write: F) -> IoResult<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    if path == Path::new("-") {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        write(&mut lock).and_then(|_| lock.flush()).map_err(|source| IoError::Io { path: path.into(), source })
    } else {
        write_atomic(path, write)
    }
}

/// Edges as `u v w` with the original node ids.
pub fn write_edge_list(out: &mut dyn Write, e: &EdgeList) -> io::Result<()> {
    for edge in &e.edges {
        writeln!(out, "{} {} {}", e.external_ids[edge.u], e.external_ids[edge.v], edge.w)?;
    }
    Ok(())
}

/// One label per line; `-1` marks points without a cluster.
pub fn write_labels(out: &mut dyn Write, labels: &[i64]) -> io::Result<()> {
    for l in labels {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

pub fn read_labels(path: &Path) -> IoResult<Vec<i64>> {
    let reader = BufReader::new(open(path)?);
    let mut labels = Vec::new();
    for (i, text) in reader.lines().enumerate() {
        let text = text.map_err(|source| IoError::Io { path: path.into(), source })?;
        let t = text.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(t.parse().map_err(|_| IoError::Parse {
            path: path.into(),
            line: i as u64 + 1,
            message: format!("`{t}` is not an integer label"),
        })?);
    }
    Ok(labels)
}

/// Embedding rows as CSV with a `z0,z1,...` header.
pub fn write_embedding(out: &mut dyn Write, coords: &DenseMatrix) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..coords.cols()).map(|j| format!("z{j}")))?;
    for i in 0..coords.rows() {
        w.write_record(coords.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()
}
