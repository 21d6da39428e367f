//! Crash-record tables: schema, loading, validation, descriptive statistics
//! and train/test splitting.
//!
//! A [`CrashDataset`] is an ordered table. Row order is the observation
//! sequence used by the lagged regressions in [`crate::causality`]; it is the
//! file row order unless a timestamp column is named, in which case rows are
//! stably sorted by that column first.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default name of the severity column in CSV files.
pub const SEVERITY_COLUMN: &str = "severity";
/// Reserved column carrying the synthetic-row flag written by the balancer.
pub const SYNTHETIC_COLUMN: &str = "synthetic";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Binary,
    Continuous,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Binary => "binary",
            FeatureKind::Continuous => "continuous",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Some(FeatureKind::Binary),
            "continuous" => Some(FeatureKind::Continuous),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub units: String,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, kind: FeatureKind, units: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind,
            units: units.into(),
        }
    }
}

/// Ordered feature list. Position in the list is the column index used by
/// every downstream module.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    entries: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn new(entries: Vec<FeatureSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.name.trim().is_empty() {
                return Err(Error::Schema("feature names must be non-empty".into()));
            }
            if e.name == SEVERITY_COLUMN || e.name == SYNTHETIC_COLUMN {
                return Err(Error::Schema(format!("'{}' is a reserved column name", e.name)));
            }
            if !seen.insert(e.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name '{}'", e.name)));
            }
        }
        Ok(FeatureSchema { entries })
    }

    pub fn entries(&self) -> &[FeatureSpec] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.entries[idx].name
    }

    pub fn kind(&self, idx: usize) -> FeatureKind {
        self.entries[idx].kind
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    /// Sub-schema with the given columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        let entries = columns
            .iter()
            .map(|&c| {
                self.entries
                    .get(c)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("column {c} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureSchema::new(entries)
    }

    /// Reads a schema file: CSV with header `name,kind,units`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)?;
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let name = rec.get(0).unwrap_or("").to_string();
            let kind_raw = rec.get(1).unwrap_or("");
            let kind = FeatureKind::parse(kind_raw).ok_or_else(|| {
                Error::Schema(format!(
                    "schema line {}: unknown kind '{kind_raw}' (expected binary|continuous)",
                    i + 2
                ))
            })?;
            let units = rec.get(2).unwrap_or("").to_string();
            entries.push(FeatureSpec { name, kind, units });
        }
        FeatureSchema::new(entries)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["name", "kind", "units"])?;
        for e in &self.entries {
            w.write_record([e.name.as_str(), e.kind.as_str(), e.units.as_str()])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(())
    }
}

/// Three-level injury severity. Numeric codes are fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeverityClass {
    /// Property damage only.
    Pdo = 0,
    /// Non-severe and possible injury.
    Bc = 1,
    /// Fatal and severe injury.
    Ka = 2,
}

impl SeverityClass {
    pub const ALL: [SeverityClass; 3] = [SeverityClass::Pdo, SeverityClass::Bc, SeverityClass::Ka];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            SeverityClass::Pdo => "PDO",
            SeverityClass::Bc => "BC",
            SeverityClass::Ka => "KA",
        }
    }

    /// Accepts `0|1|2` or `PDO|BC|KA` (case-insensitive).
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        match s {
            "0" => Some(SeverityClass::Pdo),
            "1" => Some(SeverityClass::Bc),
            "2" => Some(SeverityClass::Ka),
            _ => match s.to_ascii_uppercase().as_str() {
                "PDO" => Some(SeverityClass::Pdo),
                "BC" => Some(SeverityClass::Bc),
                "KA" => Some(SeverityClass::Ka),
                _ => None,
            },
        }
    }
}

impl fmt::Display for SeverityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Where a dataset came from. Carried through every derivation so the
/// pipeline can prove the test split is only read by evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lineage {
    Loaded,
    Generated,
    TrainSplit,
    TestSplit,
    Balanced,
}

/// A column of a dataset addressable as a sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Column {
    Feature(usize),
    Severity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrashDataset {
    schema: FeatureSchema,
    x: Array2<f64>,
    y: Vec<SeverityClass>,
    order_key: Vec<u64>,
    synthetic: Vec<bool>,
    lineage: Lineage,
}

impl CrashDataset {
    /// Builds a dataset of original (non-synthetic) rows.
    pub fn new(
        schema: FeatureSchema,
        x: Array2<f64>,
        y: Vec<SeverityClass>,
        order_key: Vec<u64>,
    ) -> Result<Self> {
        let n = y.len();
        Self::with_flags(schema, x, y, order_key, vec![false; n], Lineage::Loaded)
    }

    pub fn with_flags(
        schema: FeatureSchema,
        x: Array2<f64>,
        y: Vec<SeverityClass>,
        order_key: Vec<u64>,
        synthetic: Vec<bool>,
        lineage: Lineage,
    ) -> Result<Self> {
        let ds = CrashDataset {
            schema,
            x,
            y,
            order_key,
            synthetic,
            lineage,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.x.nrows() != n || self.order_key.len() != n || self.synthetic.len() != n {
            return Err(Error::InvalidArgument(format!(
                "row count mismatch: x has {}, labels {}, order keys {}, flags {}",
                self.x.nrows(),
                n,
                self.order_key.len(),
                self.synthetic.len()
            )));
        }
        if self.x.ncols() != self.schema.len() {
            return Err(Error::Schema(format!(
                "matrix has {} columns but schema lists {}",
                self.x.ncols(),
                self.schema.len()
            )));
        }
        if self.order_key.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("order keys must be strictly increasing".into()));
        }
        for (r, row) in self.x.outer_iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Value {
                        row: r,
                        column: self.schema.name(c).to_string(),
                        message: format!("non-finite value {v}"),
                    });
                }
                if self.schema.kind(c) == FeatureKind::Binary {
                    let ok = if self.synthetic[r] {
                        (0.0..=1.0).contains(&v)
                    } else {
                        v == 0.0 || v == 1.0
                    };
                    if !ok {
                        return Err(Error::Value {
                            row: r,
                            column: self.schema.name(c).to_string(),
                            message: format!("binary column holds {v}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[SeverityClass] {
        &self.y
    }

    pub fn order_key(&self) -> &[u64] {
        &self.order_key
    }

    pub fn synthetic(&self) -> &[bool] {
        &self.synthetic
    }

    pub fn lineage(&self) -> Lineage {
        self.lineage
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.y.iter().map(|c| c.index()).collect()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for c in &self.y {
            counts[c.index()] += 1;
        }
        counts
    }

    pub fn n_synthetic(&self) -> usize {
        self.synthetic.iter().filter(|&&s| s).count()
    }

    /// The column as a real sequence in row order; severity as its ordinal code.
    pub fn series(&self, column: Column) -> Vec<f64> {
        match column {
            Column::Feature(j) => self.x.column(j).to_vec(),
            Column::Severity => self.y.iter().map(|c| c.index() as f64).collect(),
        }
    }

    pub(crate) fn relabel(mut self, lineage: Lineage) -> Self {
        self.lineage = lineage;
        self
    }

    /// Rows at the given positions (must be increasing to keep order keys monotone).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        CrashDataset::with_flags(
            self.schema.clone(),
            self.x.select(Axis(0), rows),
            rows.iter().map(|&r| self.y[r]).collect(),
            rows.iter().map(|&r| self.order_key[r]).collect(),
            rows.iter().map(|&r| self.synthetic[r]).collect(),
            self.lineage,
        )
    }

    /// Column projection keeping every row, labels and flags.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        let schema = self.schema.select(columns)?;
        Ok(CrashDataset {
            schema,
            x: self.x.select(Axis(1), columns),
            y: self.y.clone(),
            order_key: self.order_key.clone(),
            synthetic: self.synthetic.clone(),
            lineage: self.lineage,
        })
    }

    /// Column projection by feature name.
    pub fn select_features_by_name<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.schema
                    .index_of(n.as_ref())
                    .ok_or_else(|| Error::Schema(format!("missing column '{}'", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        self.select_features(&idx)
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub severity_column: String,
    /// Optional numeric column that overrides file order after a stable sort.
    pub timestamp_column: Option<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            severity_column: SEVERITY_COLUMN.to_string(),
            timestamp_column: None,
        }
    }
}

impl LoadOptions {
    pub fn with_severity(severity_column: impl Into<String>) -> Self {
        LoadOptions {
            severity_column: severity_column.into(),
            ..Default::default()
        }
    }
}

fn parse_number(raw: &str, row: usize, column: &str) -> Result<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: "missing value".into(),
        });
    }
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("'{s}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("'{s}' is not finite"),
        });
    }
    Ok(v)
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

/// Loads a crash table. Row numbers in errors are 1-based data rows.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema, opts: &LoadOptions) -> Result<CrashDataset> {
    let path = path.as_ref();
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);

    let feature_cols = schema
        .entries()
        .iter()
        .map(|e| find(&e.name).ok_or_else(|| Error::Schema(format!("missing column '{}'", e.name))))
        .collect::<Result<Vec<_>>>()?;
    let sev_col = find(&opts.severity_column)
        .ok_or_else(|| Error::Schema(format!("missing severity column '{}'", opts.severity_column)))?;
    let ts_col = match &opts.timestamp_column {
        Some(name) => Some(find(name).ok_or_else(|| Error::Schema(format!("missing timestamp column '{name}'")))?),
        None => None,
    };
    let syn_col = find(SYNTHETIC_COLUMN);

    let d = schema.len();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut stamps = Vec::new();
    let mut flags = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        for (j, &c) in feature_cols.iter().enumerate() {
            let name = &schema.entries()[j].name;
            let v = parse_number(rec.get(c).unwrap_or(""), row, name)?;
            values.push(v);
        }
        let raw = rec.get(sev_col).unwrap_or("");
        let cls = SeverityClass::parse(raw).ok_or_else(|| Error::Value {
            row,
            column: opts.severity_column.clone(),
            message: format!("unknown severity code '{}'", raw.trim()),
        })?;
        labels.push(cls);
        if let Some(c) = ts_col {
            stamps.push(parse_number(rec.get(c).unwrap_or(""), row, opts.timestamp_column.as_deref().unwrap_or(""))?);
        }
        flags.push(match syn_col {
            Some(c) => match rec.get(c).unwrap_or("").trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Value {
                        row,
                        column: SYNTHETIC_COLUMN.into(),
                        message: format!("flag must be 0 or 1, got '{other}'"),
                    })
                }
            },
            None => false,
        });
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut x = Array2::from_shape_vec((n, d), values).expect("row-major buffer matches shape");

    if ts_col.is_some() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| stamps[a].total_cmp(&stamps[b]));
        x = x.select(Axis(0), &order);
        labels = order.iter().map(|&r| labels[r]).collect();
        flags = order.iter().map(|&r| flags[r]).collect();
    }

    // Validation errors name data rows in file order; re-map through the
    // sort permutation only matters for timestamped files.
    CrashDataset::with_flags(
        schema.clone(),
        x,
        labels,
        (0..n as u64).collect(),
        flags,
        Lineage::Loaded,
    )
    .map_err(|e| match e {
        Error::Value { row, column, message } => Error::Value {
            row: row + 1,
            column,
            message,
        },
        other => other,
    })
}

/// Schema from a CSV header: every column except severity, timestamp and the
/// synthetic flag is a feature; columns holding only 0/1 are binary.
pub fn infer_schema(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<FeatureSchema> {
    let path = path.as_ref();
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let skip = |h: &str| {
        h == opts.severity_column || h == SYNTHETIC_COLUMN || Some(h) == opts.timestamp_column.as_deref()
    };
    let cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !skip(h.trim()))
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    let mut binary = vec![true; cols.len()];
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        rows += 1;
        for (k, (c, name)) in cols.iter().enumerate() {
            if binary[k] {
                let v = parse_number(rec.get(*c).unwrap_or(""), i + 1, name)?;
                binary[k] = v == 0.0 || v == 1.0;
            }
        }
    }
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    FeatureSchema::new(
        cols.into_iter()
            .zip(binary)
            .map(|((_, name), b)| {
                FeatureSpec::new(name, if b { FeatureKind::Binary } else { FeatureKind::Continuous }, "")
            })
            .collect(),
    )
}

/// Writes features, then severity code, then the synthetic flag when any row
/// is synthetic. Values use shortest round-trip formatting.
pub fn write_csv(ds: &CrashDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let with_flag = ds.synthetic.iter().any(|&s| s);
    let mut header: Vec<&str> = ds.schema.names();
    header.push(SEVERITY_COLUMN);
    if with_flag {
        header.push(SYNTHETIC_COLUMN);
    }
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (r, row) in ds.x.outer_iter().enumerate() {
        let mut line = String::new();
        for v in row.iter() {
            line.push_str(&format!("{v},"));
        }
        line.push_str(&ds.y[r].index().to_string());
        if with_flag {
            line.push_str(if ds.synthetic[r] { ",1" } else { ",0" });
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnStats {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Per-feature descriptive statistics followed by the three severity
/// indicator columns (KA, BC, PDO). Standard deviations use divisor n.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryStats {
    pub rows: usize,
    pub columns: Vec<ColumnStats>,
}

impl SummaryStats {
    pub fn get(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("variable,min,max,mean,sd\n");
        for c in &self.columns {
            s.push_str(&format!("{},{},{},{:.6},{:.6}\n", c.name, c.min, c.max, c.mean, c.sd));
        }
        s
    }
}

fn column_stats(name: &str, values: impl Iterator<Item = f64> + Clone) -> ColumnStats {
    let mut n = 0usize;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for v in values.clone() {
        n += 1;
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let mean = (sum / n as f64).clamp(min, max);
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    ColumnStats {
        name: name.to_string(),
        min,
        max,
        mean,
        sd: var.sqrt(),
    }
}

pub fn summarize(ds: &CrashDataset) -> Result<SummaryStats> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut columns: Vec<ColumnStats> = (0..ds.n_features())
        .map(|j| column_stats(ds.schema.name(j), ds.x.column(j).iter().copied()))
        .collect();
    for cls in [SeverityClass::Ka, SeverityClass::Bc, SeverityClass::Pdo] {
        columns.push(column_stats(
            cls.label(),
            ds.y.iter().map(move |&c| if c == cls { 1.0 } else { 0.0 }),
        ));
    }
    Ok(SummaryStats { rows: ds.n_rows(), columns })
}

#[derive(Clone, Debug)]
pub struct SplitPair {
    pub train: CrashDataset,
    pub test: CrashDataset,
    pub fraction: f64,
    pub seed: u64,
}

/// Number of training rows for a split: `round(fraction * n)`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    (fraction * n as f64).round() as usize
}

/// Uniform random partition without replacement. Both halves keep the
/// original row order.
pub fn split_train_test(ds: &CrashDataset, fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} outside (0,1)")));
    }
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::InsufficientData(format!("cannot split {n} rows")));
    }
    let n_train = train_size(n, fraction);
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} of {n} rows leaves an empty partition"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, n_train) {
        in_train[i] = true;
    }
    let (train_rows, test_rows): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_train[i]);
    Ok(SplitPair {
        train: ds.select_rows(&train_rows)?.relabel(Lineage::TrainSplit),
        test: ds.select_rows(&test_rows)?.relabel(Lineage::TestSplit),
        fraction,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(names: &[(&str, FeatureKind)]) -> FeatureSchema {
        FeatureSchema::new(names.iter().map(|(n, k)| FeatureSpec::new(*n, *k, "")).collect()).unwrap()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn tiny(n: usize) -> CrashDataset {
        let s = schema(&[("a", FeatureKind::Continuous)]);
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let y = (0..n).map(|i| SeverityClass::from_index(i % 3).unwrap()).collect();
        CrashDataset::new(s, x, y, (0..n as u64).collect()).unwrap()
    }

    #[test]
    fn loads_three_rows_with_labels() {
        let f = write_tmp("a,b,severity\n0,0,PDO\n0,0,BC\n0,0,KA\n");
        let s = schema(&[("a", FeatureKind::Binary), ("b", FeatureKind::Continuous)]);
        let ds = load_csv(f.path(), &s, &LoadOptions::default()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.labels(), vec![0, 1, 2]);
        assert_eq!(ds.order_key(), &[0, 1, 2]);
    }

    #[test]
    fn header_only_is_empty_error() {
        let f = write_tmp("a,severity\n");
        let s = schema(&[("a", FeatureKind::Binary)]);
        assert!(matches!(load_csv(f.path(), &s, &LoadOptions::default()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn binary_violation_names_cell() {
        let f = write_tmp("flag,severity\n0,0\n2,1\n");
        let s = schema(&[("flag", FeatureKind::Binary)]);
        match load_csv(f.path(), &s, &LoadOptions::default()) {
            Err(Error::Value { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "flag");
            }
            other => panic!("expected value error, got {other:?}"),
        }
    }

    #[test]
    fn load_errors() {
        let s = schema(&[("a", FeatureKind::Continuous)]);
        let f = write_tmp("b,severity\n1,0\n");
        assert!(matches!(load_csv(f.path(), &s, &LoadOptions::default()), Err(Error::Schema(_))));
        let f = write_tmp("a,severity\n1,0\nx,1\n");
        match load_csv(f.path(), &s, &LoadOptions::default()) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "a")),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("a,severity\n1,3\n");
        assert!(matches!(load_csv(f.path(), &s, &LoadOptions::default()), Err(Error::Value { .. })));
        let f = write_tmp("a,severity\n,1\n");
        assert!(matches!(load_csv(f.path(), &s, &LoadOptions::default()), Err(Error::Parse { .. })));
    }

    #[test]
    fn timestamp_column_reorders_stably() {
        let f = write_tmp("a,t,severity\n10,3,0\n20,1,1\n30,1,2\n");
        let s = schema(&[("a", FeatureKind::Continuous)]);
        let opts = LoadOptions {
            timestamp_column: Some("t".into()),
            ..Default::default()
        };
        let ds = load_csv(f.path(), &s, &opts).unwrap();
        assert_eq!(ds.series(Column::Feature(0)), vec![20.0, 30.0, 10.0]);
        assert_eq!(ds.labels(), vec![1, 2, 0]);
    }

    #[test]
    fn infer_schema_detects_binary() {
        let f = write_tmp("a,b,severity\n0,0.5,0\n1,2,1\n");
        let s = infer_schema(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(s.kind(0), FeatureKind::Binary);
        assert_eq!(s.kind(1), FeatureKind::Continuous);
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert!(FeatureSchema::new(vec![
            FeatureSpec::new("a", FeatureKind::Binary, ""),
            FeatureSpec::new("a", FeatureKind::Binary, "")
        ])
        .is_err());
        assert!(FeatureSchema::new(vec![FeatureSpec::new(" ", FeatureKind::Binary, "")]).is_err());
    }

    #[test]
    fn summarize_basic_columns() {
        let s = schema(&[("flag", FeatureKind::Binary), ("c", FeatureKind::Continuous)]);
        let x = ndarray::array![[0.0, 5.0], [1.0, 5.0], [1.0, 5.0], [0.0, 5.0]];
        let y = vec![SeverityClass::Pdo, SeverityClass::Pdo, SeverityClass::Bc, SeverityClass::Ka];
        let ds = CrashDataset::new(s, x, y, vec![0, 1, 2, 3]).unwrap();
        let st = summarize(&ds).unwrap();
        let flag = st.get("flag").unwrap();
        assert_eq!((flag.min, flag.max, flag.mean), (0.0, 1.0, 0.5));
        assert_eq!(st.get("c").unwrap().sd, 0.0);
        assert_eq!(st.get("PDO").unwrap().mean, 0.5);
        assert_eq!(st.get("KA").unwrap().mean, 0.25);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = tiny(10);
        let a = split_train_test(&ds, 0.8, 7).unwrap();
        assert_eq!((a.train.n_rows(), a.test.n_rows()), (8, 2));
        let b = split_train_test(&ds, 0.8, 7).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test.lineage(), Lineage::TestSplit);
        assert_eq!(train_size(156_166, 0.8), 124_933);
        assert!(split_train_test(&ds, 1.0, 7).is_err());
        assert!(split_train_test(&ds, 0.0, 7).is_err());
    }
}
