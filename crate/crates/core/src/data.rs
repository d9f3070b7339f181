//! Labelled feature sets: file formats, splitting, target encoding and the
//! two quality metrics (top-1 accuracy and Pearson correlation).
//!
//! Two on-disk formats are supported:
//!
//! * **CSV** — a header row, an optional leading `id` column, real-valued
//!   feature columns and a trailing integer `label` column. Reals are
//!   written with shortest round-trip formatting.
//! * **FMX** — `b"FMX1"`, `u32` rows, `u32` cols (little-endian), then
//!   `rows·cols` little-endian `f64` in row-major order, a `u8` label flag
//!   and, when the flag is 1, `rows` little-endian `i32` labels.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{BlsError, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{stream, StreamKind};

pub const FMX_MAGIC: &[u8; 4] = b"FMX1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Fmx,
}

impl FileFormat {
    /// Guess from the file extension; anything but `.fmx` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("fmx") => FileFormat::Fmx,
            _ => FileFormat::Csv,
        }
    }
}

/// Feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub ids: Option<Vec<String>>,
}

impl LabeledFeatures {
    /// Validate and wrap. `classes` defaults to `max(label) + 1`.
    pub fn new(x: Matrix, labels: Vec<usize>, classes: Option<usize>) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(BlsError::dim(format!(
                "{} labels for {} samples",
                labels.len(),
                x.nrows()
            )));
        }
        linalg::ensure_finite(&x, "features")?;
        let inferred = labels.iter().max().map_or(0, |m| m + 1);
        let classes = classes.unwrap_or(inferred);
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(BlsError::value(format!("label {bad} is out of range for {classes} classes")));
        }
        if classes < 2 {
            return Err(BlsError::value("need at least 2 classes"));
        }
        Ok(Self {
            x,
            labels,
            classes,
            ids: None,
        })
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(BlsError::dim(format!("{} ids for {} samples", ids.len(), self.len())));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.x.ncols()
    }

    pub fn one_hot(&self) -> Matrix {
        // labels are validated on construction
        one_hot(&self.labels, self.classes).expect("validated labels")
    }

    /// Rows at `indices`, in the given order. Keeps the class count.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let x = Matrix::from_fn(indices.len(), self.dims(), |i, j| self.x[(indices[i], j)]);
        Self {
            x,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            ids: self
                .ids
                .as_ref()
                .map(|ids| indices.iter().map(|&i| ids[i].clone()).collect()),
        }
    }
}

/// Contents of a feature file whose label column may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub x: Matrix,
    pub labels: Option<Vec<usize>>,
    pub ids: Option<Vec<String>>,
}

impl FeatureFile {
    pub fn into_labeled(self, path: &Path) -> Result<LabeledFeatures> {
        let labels = self.labels.ok_or_else(|| {
            BlsError::value(format!("{} carries no labels", path.display()))
        })?;
        let data = LabeledFeatures::new(self.x, labels, None)?;
        match self.ids {
            Some(ids) => data.with_ids(ids),
            None => Ok(data),
        }
    }
}

/// Load a labelled feature file.
pub fn load_features(path: impl AsRef<Path>, format: FileFormat) -> Result<LabeledFeatures> {
    let path = path.as_ref();
    read_feature_file(path, format)?.into_labeled(path)
}

/// Load a feature file, labels optional.
pub fn read_feature_file(path: impl AsRef<Path>, format: FileFormat) -> Result<FeatureFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| BlsError::io(path, e))?;
    match format {
        FileFormat::Csv => parse_csv(path, &bytes),
        FileFormat::Fmx => parse_fmx(path, &bytes),
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> BlsError {
    BlsError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<FeatureFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse_err(path, 1, "missing header row"));
    }
    let has_id = headers.get(0) == Some("id");
    let has_label = headers.get(headers.len() - 1) == Some("label");
    let first = usize::from(has_id);
    let end = headers.len() - usize::from(has_label);
    if end <= first {
        return Err(parse_err(path, 1, "header names no feature columns"));
    }
    let dims = end - first;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let line = n + 2;
        let record = record.map_err(|e| parse_err(path, line, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        if has_id {
            ids.push(record[0].to_string());
        }
        for field in record.iter().take(end).skip(first) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(BlsError::value(format!(
                    "{}:{line}: non-finite feature value '{field}'",
                    path.display()
                )));
            }
            values.push(v);
        }
        if has_label {
            let field = &record[headers.len() - 1];
            let l: usize = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("label '{field}' is not a non-negative integer")))?;
            labels.push(l);
        }
    }
    let rows = values.len() / dims;
    if rows == 0 {
        return Err(parse_err(path, 2, "no data rows"));
    }
    Ok(FeatureFile {
        x: linalg::from_row_major(rows, dims, &values)?,
        labels: has_label.then_some(labels),
        ids: has_id.then_some(ids),
    })
}

fn parse_fmx(path: &Path, bytes: &[u8]) -> Result<FeatureFile> {
    let mut cur = ByteCursor { bytes, pos: 0, path };
    if cur.take(4)? != FMX_MAGIC {
        return Err(parse_err(path, 0, "bad magic, expected FMX1"));
    }
    let rows = cur.u32()? as usize;
    let cols = cur.u32()? as usize;
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        values.push(f64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(BlsError::value(format!("{}: non-finite feature value", path.display())));
    }
    let labels = match cur.take(1)?[0] {
        0 => None,
        1 => {
            let mut labels = Vec::with_capacity(rows);
            for _ in 0..rows {
                let l = i32::from_le_bytes(cur.take(4)?.try_into().unwrap());
                if l < 0 {
                    return Err(BlsError::value(format!("{}: negative label {l}", path.display())));
                }
                labels.push(l as usize);
            }
            Some(labels)
        }
        flag => return Err(parse_err(path, 0, format!("invalid label flag {flag}"))),
    };
    if cur.pos != bytes.len() {
        return Err(parse_err(path, 0, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(FeatureFile {
        x: linalg::from_row_major(rows, cols, &values)?,
        labels,
        ids: None,
    })
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(parse_err(self.path, 0, format!("truncated file at byte {}", self.pos)));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Encode features (and labels when given) in the requested format.
pub fn encode_features(x: &Matrix, labels: Option<&[usize]>, ids: Option<&[String]>, format: FileFormat) -> Result<Vec<u8>> {
    if let Some(l) = labels {
        if l.len() != x.nrows() {
            return Err(BlsError::dim(format!("{} labels for {} rows", l.len(), x.nrows())));
        }
    }
    match format {
        FileFormat::Fmx => {
            let rows = u32::try_from(x.nrows()).map_err(|_| BlsError::value("too many rows for FMX"))?;
            let cols = u32::try_from(x.ncols()).map_err(|_| BlsError::value("too many columns for FMX"))?;
            let mut out = Vec::with_capacity(13 + 8 * x.nrows() * x.ncols());
            out.extend_from_slice(FMX_MAGIC);
            out.extend_from_slice(&rows.to_le_bytes());
            out.extend_from_slice(&cols.to_le_bytes());
            for v in linalg::to_row_major(x) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            match labels {
                None => out.push(0),
                Some(l) => {
                    out.push(1);
                    for &label in l {
                        let label = i32::try_from(label).map_err(|_| BlsError::value("label exceeds i32"))?;
                        out.extend_from_slice(&label.to_le_bytes());
                    }
                }
            }
            Ok(out)
        }
        FileFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header: Vec<String> = Vec::new();
            if ids.is_some() {
                header.push("id".into());
            }
            header.extend((0..x.ncols()).map(|j| format!("f{j}")));
            if labels.is_some() {
                header.push("label".into());
            }
            let csv_err = |e: csv::Error| BlsError::value(format!("csv encoding failed: {e}"));
            w.write_record(&header).map_err(csv_err)?;
            for i in 0..x.nrows() {
                let mut row: Vec<String> = Vec::with_capacity(header.len());
                if let Some(ids) = ids {
                    row.push(ids[i].clone());
                }
                // `{}` on f64 is the shortest representation that round-trips
                row.extend((0..x.ncols()).map(|j| format!("{}", x[(i, j)])));
                if let Some(l) = labels {
                    row.push(l[i].to_string());
                }
                w.write_record(&row).map_err(csv_err)?;
            }
            w.into_inner()
                .map_err(|e| BlsError::value(format!("csv encoding failed: {e}")))
        }
    }
}

pub fn save_features(path: impl AsRef<Path>, data: &LabeledFeatures, format: FileFormat) -> Result<()> {
    let bytes = encode_features(&data.x, Some(&data.labels), data.ids.as_deref(), format)?;
    write_atomic(path.as_ref(), &bytes)
}

/// Write through a temporary file in the target directory and rename it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| BlsError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| BlsError::io(path, e))?;
    tmp.persist(path).map_err(|e| BlsError::io(path, e.error))?;
    Ok(())
}

/// Disjoint train/test index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle; the first `⌈fraction·n⌉` indices become the training
/// set.
pub fn split(n: usize, train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(BlsError::value(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, StreamKind::Split, 0));
    // tolerate float noise such as 0.8 * 10 = 8.000000000000002
    let cut = ((train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let test = idx.split_off(cut.min(n));
    Ok(SplitIndices {
        train: idx,
        test,
        seed,
    })
}

/// The 8:2 train/test split.
pub fn split_8_2(n: usize, seed: u64) -> Result<SplitIndices> {
    if n < 5 {
        return Err(BlsError::value(format!("need at least 5 samples to split, got {n}")));
    }
    split(n, 0.8, seed)
}

pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut y = Matrix::zeros(labels.len(), classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(BlsError::value(format!("label {l} is out of range for {classes} classes")));
        }
        y[(i, l)] = 1.0;
    }
    Ok(y)
}

/// Fraction of exact matches.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(BlsError::dim(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(BlsError::value("accuracy of an empty set is undefined"));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(BlsError::dim(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(BlsError::value("correlation needs at least 2 points"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(BlsError::value("correlation with a constant series is undefined"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between predicted and true class indices.
pub fn pearson_labels(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let p: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
    let t: Vec<f64> = truth.iter().map(|&v| v as f64).collect();
    pearson(&p, &t)
}
