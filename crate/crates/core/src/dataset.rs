//! Tabular datasets: CSV loading, multi-class reduction and temporal splits.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A binary-labelled table of numeric features.
///
/// Every row carries an identity (`ids`), the index of the row in the file it
/// was loaded from. Identities survive subsetting, which lets experiment rigs
/// audit which rows reached which stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    target: Vec<bool>,
    effort: Option<Vec<f64>>,
    version: Option<Vec<String>>,
    names: Vec<String>,
    ids: Vec<usize>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        target: Vec<bool>,
        effort: Option<Vec<f64>>,
        version: Option<Vec<String>>,
        names: Vec<String>,
    ) -> Result<Self> {
        let ids = (0..target.len()).collect();
        Self::with_ids(features, target, effort, version, names, ids)
    }

    pub fn with_ids(
        features: Matrix,
        target: Vec<bool>,
        effort: Option<Vec<f64>>,
        version: Option<Vec<String>>,
        names: Vec<String>,
        ids: Vec<usize>,
    ) -> Result<Self> {
        let n = features.rows();
        for len in [
            Some(target.len()),
            effort.as_ref().map(Vec::len),
            version.as_ref().map(Vec::len),
            Some(ids.len()),
        ]
        .into_iter()
        .flatten()
        {
            if len != n {
                return Err(Error::LengthMismatch { left: n, right: len });
            }
        }
        if names.len() != features.cols() {
            return Err(Error::LengthMismatch {
                left: features.cols(),
                right: names.len(),
            });
        }
        if let Some((row, col)) = (0..n)
            .flat_map(|i| (0..features.cols()).map(move |j| (i, j)))
            .find(|&(i, j)| !features.get(i, j).is_finite())
        {
            return Err(Error::MissingValue {
                row: row + 1,
                column: names[col].clone(),
            });
        }
        if !(target.iter().any(|&t| t) && target.iter().any(|&t| !t)) {
            return Err(Error::SingleClass);
        }
        if let Some(effort) = &effort {
            if let Some((row, &value)) = effort
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
            {
                return Err(Error::NegativeEffort { row: row + 1, value });
            }
        }
        Ok(Dataset {
            features,
            target,
            effort,
            version,
            names,
            ids,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn target(&self) -> &[bool] {
        &self.target
    }

    pub fn effort(&self) -> Option<&[f64]> {
        self.effort.as_deref()
    }

    pub fn version(&self) -> Option<&[String]> {
        self.version.as_deref()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.target.iter().filter(|&&t| t).count()
    }

    /// Selects rows by position. Fails if the selection loses a class.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::with_ids(
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.target[i]).collect(),
            self.effort
                .as_ref()
                .map(|e| indices.iter().map(|&i| e[i]).collect()),
            self.version
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i].clone()).collect()),
            self.names.clone(),
            indices.iter().map(|&i| self.ids[i]).collect(),
        )
    }

    /// Same rows and metadata, new feature values.
    pub(crate) fn with_features(&self, features: Matrix) -> Dataset {
        debug_assert_eq!(features.rows(), self.len());
        let names = if features.cols() == self.names.len() {
            self.names.clone()
        } else {
            (0..features.cols()).map(|j| format!("x{j}")).collect()
        };
        Dataset {
            features,
            names,
            ..self.clone()
        }
    }

    /// Appends rows that were synthesized from existing ones. Each new row
    /// inherits the identity of the row it was derived from.
    pub(crate) fn append_synthetic(
        &mut self,
        rows: Matrix,
        label: bool,
        parents: &[usize],
    ) -> Result<()> {
        debug_assert_eq!(rows.rows(), parents.len());
        for (k, &parent) in parents.iter().enumerate() {
            self.features.push_row(rows.row(k))?;
            self.target.push(label);
            if let Some(effort) = &mut self.effort {
                effort.push(effort[parent]);
            }
            if let Some(version) = &mut self.version {
                version.push(version[parent].clone());
            }
            self.ids.push(self.ids[parent]);
        }
        Ok(())
    }
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub target: String,
    #[serde(default)]
    pub effort: Option<String>,
    #[serde(default)]
    pub version: Option<String>,
    pub positive_label: String,
}

impl CsvSchema {
    pub fn new(target: impl Into<String>, positive_label: impl Into<String>) -> Self {
        CsvSchema {
            target: target.into(),
            effort: None,
            version: None,
            positive_label: positive_label.into(),
        }
    }

    pub fn effort(mut self, name: impl Into<String>) -> Self {
        self.effort = Some(name.into());
        self
    }

    pub fn version(mut self, name: impl Into<String>) -> Self {
        self.version = Some(name.into());
        self
    }

    /// The label written for negative rows by [`write_csv`].
    pub fn negative_label(&self) -> &'static str {
        if self.positive_label == "0" {
            "1"
        } else {
            "0"
        }
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    if cell.is_empty() {
        return Err(Error::MissingValue {
            row,
            column: column.to_string(),
        });
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_nan() => Err(Error::MissingValue {
            row,
            column: column.to_string(),
        }),
        Ok(v) => Ok(v),
        Err(_) => Err(Error::NonNumeric {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

fn non_empty<'a>(cell: &'a str, row: usize, column: &str) -> Result<&'a str> {
    if cell.is_empty() {
        Err(Error::MissingValue {
            row,
            column: column.to_string(),
        })
    } else {
        Ok(cell)
    }
}

/// Loads a binary dataset. Rows are numbered from 1 (the first data row) in
/// error messages. Every column not named in `schema` is a numeric feature.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = open(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let target_col = column_index(&headers, &schema.target)?;
    let effort_col = schema
        .effort
        .as_deref()
        .map(|n| column_index(&headers, n))
        .transpose()?;
    let version_col = schema
        .version
        .as_deref()
        .map(|n| column_index(&headers, n))
        .transpose()?;
    let reserved = [Some(target_col), effort_col, version_col];
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|c| !reserved.contains(&Some(*c)))
        .collect();
    let names: Vec<String> = feature_cols.iter().map(|&c| headers[c].to_string()).collect();

    let mut data = Vec::new();
    let mut target = Vec::new();
    let mut effort = effort_col.map(|_| Vec::new());
    let mut version = version_col.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != headers.len() {
            return Err(Error::Ragged {
                row,
                found: record.len(),
                expected: headers.len(),
            });
        }
        for &c in &feature_cols {
            data.push(parse_number(&record[c], row, &headers[c])?);
        }
        let label = non_empty(&record[target_col], row, &schema.target)?;
        target.push(label == schema.positive_label);
        if let (Some(c), Some(e)) = (effort_col, effort.as_mut()) {
            e.push(parse_number(&record[c], row, &headers[c])?);
        }
        if let (Some(c), Some(v)) = (version_col, version.as_mut()) {
            v.push(non_empty(&record[c], row, &headers[c])?.to_string());
        }
    }
    if target.is_empty() {
        return Err(Error::Empty("csv has no data rows"));
    }
    let features = Matrix::new(target.len(), feature_cols.len(), data)?;
    Dataset::new(features, target, effort, version, names)
}

/// Writes `data` so that [`load_csv`] with the same schema reads it back.
/// Columns are the features, then target, effort and version.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset, schema: &CsvSchema) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = data.names.iter().map(String::as_str).collect();
    header.push(&schema.target);
    if let (Some(name), Some(_)) = (&schema.effort, &data.effort) {
        header.push(name);
    }
    if let (Some(name), Some(_)) = (&schema.version, &data.version) {
        header.push(name);
    }
    writer.write_record(&header)?;
    for i in 0..data.len() {
        let mut record: Vec<String> = data.features.row(i).iter().map(|v| v.to_string()).collect();
        record.push(if data.target[i] {
            schema.positive_label.clone()
        } else {
            schema.negative_label().to_string()
        });
        if let (Some(_), Some(e)) = (&schema.effort, &data.effort) {
            record.push(e[i].to_string());
        }
        if let (Some(_), Some(v)) = (&schema.version, &data.version) {
            record.push(v[i].clone());
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Loads every column as a numeric feature, except those listed in `skip`.
pub fn load_features_csv(path: impl AsRef<Path>, skip: &[&str]) -> Result<(Matrix, Vec<String>)> {
    let mut reader = open(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let cols: Vec<usize> = (0..headers.len())
        .filter(|&c| !skip.contains(&&headers[c]))
        .collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        for &c in &cols {
            let cell = record.get(c).unwrap_or("");
            data.push(parse_number(cell, i + 1, &headers[c])?);
        }
        rows += 1;
    }
    let names = cols.iter().map(|&c| headers[c].to_string()).collect();
    Ok((Matrix::new(rows, cols.len(), data)?, names))
}

/// A table whose label column has two or more categories.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassTable {
    features: Matrix,
    labels: Vec<String>,
    names: Vec<String>,
    class_counts: BTreeMap<String, usize>,
}

impl MulticlassTable {
    pub fn new(features: Matrix, labels: Vec<String>, names: Vec<String>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::LengthMismatch {
                left: features.rows(),
                right: labels.len(),
            });
        }
        let mut class_counts = BTreeMap::new();
        for label in &labels {
            *class_counts.entry(label.clone()).or_insert(0) += 1;
        }
        if class_counts.len() < 2 {
            return Err(Error::SingleClass);
        }
        Ok(MulticlassTable {
            features,
            labels,
            names,
            class_counts,
        })
    }

    pub fn class_counts(&self) -> &BTreeMap<String, usize> {
        &self.class_counts
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    /// Keeps the rows of the most frequent and the rarest class; the rarest
    /// becomes the positive class.
    ///
    /// The rarest class is chosen first (lexicographically smallest label
    /// among the minimal counts), then the most frequent among the remaining
    /// labels (lexicographically smallest among the maximal counts).
    pub fn reduce_to_binary(&self) -> Result<Dataset> {
        let (rarest, _) = self
            .class_counts
            .iter()
            .min_by(|a, b| a.1.cmp(b.1).then_with(|| a.0.cmp(b.0)))
            .ok_or(Error::SingleClass)?;
        let (frequent, _) = self
            .class_counts
            .iter()
            .filter(|(label, _)| *label != rarest)
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .ok_or(Error::SingleClass)?;
        let keep: Vec<usize> = (0..self.labels.len())
            .filter(|&i| self.labels[i] == *rarest || self.labels[i] == *frequent)
            .collect();
        Dataset::with_ids(
            self.features.select_rows(&keep),
            keep.iter().map(|&i| self.labels[i] == *rarest).collect(),
            None,
            None,
            self.names.clone(),
            keep,
        )
    }
}

/// Loads a table with a categorical label column and numeric features.
pub fn load_multiclass_csv(path: impl AsRef<Path>, label_column: &str) -> Result<MulticlassTable> {
    let mut reader = open(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let label_col = column_index(&headers, label_column)?;
    let cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_col).collect();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        for &c in &cols {
            data.push(parse_number(record.get(c).unwrap_or(""), i + 1, &headers[c])?);
        }
        labels.push(non_empty(record.get(label_col).unwrap_or(""), i + 1, label_column)?.to_string());
    }
    let features = Matrix::new(labels.len(), cols.len(), data)?;
    let names = cols.iter().map(|&c| headers[c].to_string()).collect();
    MulticlassTable::new(features, labels, names)
}

/// Orders release tags: dotted components compare numerically when both
/// parse as numbers, lexically otherwise; a tag that is a prefix of another
/// sorts first.
pub fn compare_versions(a: &str, b: &str) -> Ordering {
    let mut left = a.split('.');
    let mut right = b.split('.');
    loop {
        match (left.next(), right.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) => {
                let ord = match (x.parse::<f64>(), y.parse::<f64>()) {
                    (Ok(p), Ok(q)) => p.partial_cmp(&q).unwrap_or(Ordering::Equal),
                    _ => x.cmp(y),
                };
                if ord != Ordering::Equal {
                    return ord;
                }
            }
        }
    }
}

/// Trains on every earlier release and tests on the latest one.
pub fn temporal_split(data: &Dataset) -> Result<(Dataset, Dataset)> {
    let version = data
        .version()
        .ok_or_else(|| Error::invalid("temporal split needs a version column"))?;
    let latest = version
        .iter()
        .max_by(|a, b| compare_versions(a, b))
        .ok_or(Error::Empty("dataset"))?;
    let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len())
        .partition(|&i| compare_versions(&version[i], latest) == Ordering::Equal);
    if train.is_empty() {
        return Err(Error::invalid(format!(
            "temporal split needs at least two versions, found only {latest:?}"
        )));
    }
    Ok((data.subset(&train)?, data.subset(&test)?))
}
