//! DMU records with role-tagged columns, CSV ingest/export, descriptive
//! statistics and group aggregation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("non-numeric cell at row {row}, column {column}: {value:?}")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("non-positive input/output at row {row}, column {column}: {value}")]
    NonPositiveInputOutput { row: usize, column: String, value: f64 },
    #[error("missing input/output values at rows {rows:?} ({columns:?})")]
    MissingInputOutput { rows: Vec<usize>, columns: Vec<String> },
    #[error("duplicate DMU name {name:?} at row {row}")]
    DuplicateDmuName { name: String, row: usize },
    #[error("empty DMU name at row {row}")]
    EmptyDmuName { row: usize },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("column {column:?} has {actual} values, expected {expected}")]
    LengthMismatch { column: String, expected: usize, actual: usize },
    #[error("dataset has no group column")]
    NoGroupColumn,
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableRole {
    Identifier,
    Input,
    Output,
    Explanatory,
    Group,
}

impl VariableRole {
    pub fn is_numeric(self) -> bool {
        matches!(self, VariableRole::Input | VariableRole::Output | VariableRole::Explanatory)
    }
}

/// Column name to role mapping. Columns absent from the schema are ignored
/// on ingest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: BTreeMap<String, VariableRole>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: &str, role: VariableRole) -> Self {
        self.columns.insert(column.to_string(), role);
        self
    }

    /// Reads a TOML schema file with a `[columns]` table, e.g.
    /// `HBP = "input"`.
    pub fn from_toml_file(path: &Path) -> Result<Self, DatasetError> {
        let text = read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, DatasetError> {
        toml::from_str(text).map_err(|e| DatasetError::SchemaMismatch(format!("invalid schema file: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let ids = self.columns.values().filter(|r| **r == VariableRole::Identifier).count();
        if ids != 1 {
            return Err(DatasetError::SchemaMismatch(format!("expected exactly one identifier column, found {ids}")));
        }
        let groups = self.columns.values().filter(|r| **r == VariableRole::Group).count();
        if groups > 1 {
            return Err(DatasetError::SchemaMismatch(format!("at most one group column allowed, found {groups}")));
        }
        Ok(())
    }
}

/// A numeric column. Missing explanatory values are stored as NaN; inputs
/// and outputs are always complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub role: VariableRole,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, role: VariableRole, values: Vec<f64>) -> Self {
        Self { name: name.into(), role, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupColumn {
    pub name: String,
    pub labels: Vec<String>,
}

/// Validated, immutable DMU table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    identifier: String,
    dmu_names: Vec<String>,
    columns: Vec<Column>,
    group: Option<GroupColumn>,
}

impl Dataset {
    pub fn new(
        identifier: impl Into<String>,
        dmu_names: Vec<String>,
        columns: Vec<Column>,
        group: Option<GroupColumn>,
    ) -> Result<Self, DatasetError> {
        let n = dmu_names.len();
        if n == 0 {
            return Err(DatasetError::EmptyDataset);
        }
        let mut seen = HashSet::new();
        for (row, name) in dmu_names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(DatasetError::EmptyDmuName { row: row + 1 });
            }
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::DuplicateDmuName { name: name.clone(), row: row + 1 });
            }
        }
        let mut names = HashSet::new();
        for col in &columns {
            if !col.role.is_numeric() {
                return Err(DatasetError::SchemaMismatch(format!(
                    "column {:?} has non-numeric role {:?}",
                    col.name, col.role
                )));
            }
            if !names.insert(col.name.as_str()) {
                return Err(DatasetError::SchemaMismatch(format!("duplicate column {:?}", col.name)));
            }
            if col.values.len() != n {
                return Err(DatasetError::LengthMismatch {
                    column: col.name.clone(),
                    expected: n,
                    actual: col.values.len(),
                });
            }
            if matches!(col.role, VariableRole::Input | VariableRole::Output) {
                let missing: Vec<usize> =
                    col.values.iter().enumerate().filter(|(_, v)| v.is_nan()).map(|(i, _)| i + 1).collect();
                if !missing.is_empty() {
                    return Err(DatasetError::MissingInputOutput { rows: missing, columns: vec![col.name.clone()] });
                }
                for (row, &v) in col.values.iter().enumerate() {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(DatasetError::NonPositiveInputOutput {
                            row: row + 1,
                            column: col.name.clone(),
                            value: v,
                        });
                    }
                }
            } else if let Some(row) = col.values.iter().position(|v| v.is_infinite()) {
                return Err(DatasetError::NonNumericCell {
                    row: row + 1,
                    column: col.name.clone(),
                    value: col.values[row].to_string(),
                });
            }
        }
        if let Some(g) = &group {
            if g.labels.len() != n {
                return Err(DatasetError::LengthMismatch { column: g.name.clone(), expected: n, actual: g.labels.len() });
            }
        }
        Ok(Self { identifier: identifier.into(), dmu_names, columns, group })
    }

    pub fn len(&self) -> usize {
        self.dmu_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dmu_names.is_empty()
    }

    pub fn identifier(&self) -> &str {
        &self.identifier
    }

    pub fn dmu_names(&self) -> &[String] {
        &self.dmu_names
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn group(&self) -> Option<&GroupColumn> {
        self.group.as_ref()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn columns_with_role(&self, role: VariableRole) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(move |c| c.role == role)
    }

    pub fn inputs(&self) -> Vec<&Column> {
        self.columns_with_role(VariableRole::Input).collect()
    }

    pub fn outputs(&self) -> Vec<&Column> {
        self.columns_with_role(VariableRole::Output).collect()
    }

    /// Returns a dataset restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, DatasetError> {
        let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        Self::new(
            self.identifier.clone(),
            rows.iter().map(|&r| self.dmu_names[r].clone()).collect(),
            self.columns.iter().map(|c| Column::new(c.name.clone(), c.role, pick(&c.values))).collect(),
            self.group.as_ref().map(|g| GroupColumn {
                name: g.name.clone(),
                labels: rows.iter().map(|&r| g.labels[r].clone()).collect(),
            }),
        )
    }

    /// Returns a copy with one column's values multiplied by `factor`.
    pub fn with_scaled_column(&self, name: &str, factor: f64) -> Result<Self, DatasetError> {
        let mut out = self.clone();
        let col = out
            .columns
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))?;
        for v in col.values.iter_mut() {
            *v *= factor;
        }
        Self::new(out.identifier, out.dmu_names, out.columns, out.group)
    }

    /// The schema this dataset would be read back with.
    pub fn schema(&self) -> Schema {
        let mut schema = Schema::new().with(&self.identifier, VariableRole::Identifier);
        for c in &self.columns {
            schema = schema.with(&c.name, c.role);
        }
        if let Some(g) = &self.group {
            schema = schema.with(&g.name, VariableRole::Group);
        }
        schema
    }

    /// Writes the dataset as CSV: identifier, numeric columns, group column.
    /// Missing values become empty cells.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.identifier.clone()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        if let Some(g) = &self.group {
            header.push(g.name.clone());
        }
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut rec = vec![self.dmu_names[i].clone()];
            for c in &self.columns {
                let v = c.values[i];
                rec.push(if v.is_nan() { String::new() } else { v.to_string() });
            }
            if let Some(g) = &self.group {
                rec.push(g.labels[i].clone());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| DatasetError::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<(), DatasetError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        self.write_csv(file)
    }
}

fn csv_err(e: csv::Error) -> DatasetError {
    DatasetError::Csv(e.to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> DatasetError {
    if e.kind() == std::io::ErrorKind::NotFound {
        DatasetError::FileNotFound(path.display().to_string())
    } else {
        DatasetError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

fn read_to_string(path: &Path) -> Result<String, DatasetError> {
    let mut s = String::new();
    File::open(path).map_err(|e| io_err(path, e))?.read_to_string(&mut s).map_err(|e| io_err(path, e))?;
    Ok(s)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "N/A" | "NaN" | "nan" | ".")
}

/// Reads a CSV file and validates it against `schema`.
pub fn parse_csv(path: &Path, schema: &Schema) -> Result<Dataset, DatasetError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_csv_reader(file, schema)
}

pub fn parse_csv_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset, DatasetError> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let missing: Vec<&str> =
        schema.columns.keys().filter(|k| !position.contains_key(k.as_str())).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(DatasetError::SchemaMismatch(format!("columns not in header: {}", missing.join(", "))));
    }

    // Header order, restricted to schema columns.
    let ordered: Vec<(usize, &str, VariableRole)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| schema.columns.get(h).map(|r| (i, h.as_str(), *r)))
        .collect();
    let id = ordered.iter().find(|c| c.2 == VariableRole::Identifier).expect("validated schema");
    let group = ordered.iter().find(|c| c.2 == VariableRole::Group);
    let numeric: Vec<_> = ordered.iter().filter(|c| c.2.is_numeric()).collect();

    let mut names = Vec::new();
    let mut labels = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); numeric.len()];
    let mut incomplete_rows = Vec::new();
    let mut incomplete_cols: Vec<String> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = r + 1;
        names.push(rec.get(id.0).unwrap_or("").to_string());
        if let Some(g) = group {
            labels.push(rec.get(g.0).unwrap_or("").to_string());
        }
        let mut row_incomplete = false;
        for (k, &&(i, name, role)) in numeric.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("");
            let v = if is_missing(cell) {
                if matches!(role, VariableRole::Input | VariableRole::Output) {
                    row_incomplete = true;
                    if !incomplete_cols.iter().any(|c| c == name) {
                        incomplete_cols.push(name.to_string());
                    }
                }
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| DatasetError::NonNumericCell {
                    row,
                    column: name.to_string(),
                    value: cell.to_string(),
                })?
            };
            values[k].push(v);
        }
        if row_incomplete {
            incomplete_rows.push(row);
        }
    }
    if !incomplete_rows.is_empty() {
        return Err(DatasetError::MissingInputOutput { rows: incomplete_rows, columns: incomplete_cols });
    }
    let columns = numeric.iter().zip(values).map(|(c, v)| Column::new(c.1, c.2, v)).collect();
    let group = group.map(|g| GroupColumn { name: g.1.to_string(), labels });
    Dataset::new(id.1, names, columns, group)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub role: VariableRole,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two values.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub columns: Vec<ColumnStats>,
}

impl DescriptiveStats {
    pub fn get(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Mean, sample SD (n - 1), min and max of every numeric column, skipping
/// missing entries.
pub fn describe(ds: &Dataset) -> Result<DescriptiveStats, DatasetError> {
    if ds.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut columns = Vec::with_capacity(ds.columns.len());
    for col in &ds.columns {
        let vals: Vec<f64> = col.values.iter().copied().filter(|v| !v.is_nan()).collect();
        if vals.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let count = vals.len();
        let mean = vals.iter().sum::<f64>() / count as f64;
        let sd = (count > 1).then(|| {
            let ss: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (count - 1) as f64).sqrt()
        });
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // summation rounding can push the mean a hair outside [min, max]
        let mean = mean.clamp(min, max);
        columns.push(ColumnStats { name: col.name.clone(), role: col.role, count, mean, sd, min, max });
    }
    Ok(DescriptiveStats { n: ds.len(), columns })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub label: String,
    pub count: usize,
    pub mean_score: f64,
    pub members: Vec<String>,
}

/// Mean score per group label, sorted by label.
pub fn group_summary(ds: &Dataset, scores: &[f64]) -> Result<Vec<GroupRow>, DatasetError> {
    let group = ds.group.as_ref().ok_or(DatasetError::NoGroupColumn)?;
    if scores.len() != ds.len() {
        return Err(DatasetError::LengthMismatch {
            column: "scores".to_string(),
            expected: ds.len(),
            actual: scores.len(),
        });
    }
    let mut acc: BTreeMap<&str, (f64, Vec<String>)> = BTreeMap::new();
    for (i, label) in group.labels.iter().enumerate() {
        let e = acc.entry(label.as_str()).or_default();
        e.0 += scores[i];
        e.1.push(ds.dmu_names[i].clone());
    }
    Ok(acc
        .into_iter()
        .map(|(label, (sum, members))| GroupRow {
            label: label.to_string(),
            count: members.len(),
            mean_score: sum / members.len() as f64,
            members,
        })
        .collect())
}
