//! Dataset contract: labels, protected levels, per-model scores and optional
//! feature columns, plus CSV ingestion and subgroup partitioning.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column name used for instance weights produced by reweighting.
pub const WEIGHT_COLUMN: &str = "_weights_";

/// Row indices per protected level, ascending within each level.
pub type Partition = BTreeMap<String, Vec<usize>>;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl FeatureColumn {
    pub fn len(&self) -> usize {
        match self {
            FeatureColumn::Numeric(v) => v.len(),
            FeatureColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            FeatureColumn::Numeric(v) => Some(v),
            FeatureColumn::Categorical(_) => None,
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            FeatureColumn::Numeric(v) => v[row].to_string(),
            FeatureColumn::Categorical(v) => v[row].clone(),
        }
    }

    fn select(&self, rows: &[usize]) -> FeatureColumn {
        match self {
            FeatureColumn::Numeric(v) => FeatureColumn::Numeric(rows.iter().map(|&i| v[i]).collect()),
            FeatureColumn::Categorical(v) => {
                FeatureColumn::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub column: FeatureColumn,
}

/// Probability scores of one model, keyed by a unique label.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelScores {
    pub label: String,
    /// Source column name in tabular form.
    pub column: String,
    pub scores: Vec<f64>,
}

/// Validated audit input. All columns have the same length, labels are
/// binary (1 = favorable), scores lie in `[0, 1]` and the protected column
/// has at least two levels.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditDataset {
    label_column: String,
    protected_column: String,
    y_true: Vec<u8>,
    protected: Vec<String>,
    models: Vec<ModelScores>,
    features: Vec<Feature>,
    weights: Option<Vec<f64>>,
    /// Raw `[unfavorable, favorable]` label strings, when loaded from them.
    label_names: Option<[String; 2]>,
    /// Header order at load time, reused when writing.
    column_order: Vec<String>,
}

impl AuditDataset {
    pub fn new(y_true: Vec<u8>, protected: Vec<String>) -> Result<Self> {
        if y_true.is_empty() {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if y_true.len() != protected.len() {
            return Err(Error::InvalidData(format!(
                "label length {} differs from protected length {}",
                y_true.len(),
                protected.len()
            )));
        }
        if let Some(pos) = y_true.iter().position(|&y| y > 1) {
            return Err(Error::Row {
                row: pos + 1,
                column: "label".into(),
                message: format!("label {} is not 0 or 1", y_true[pos]),
            });
        }
        let levels: BTreeSet<&str> = protected.iter().map(String::as_str).collect();
        if levels.len() < 2 {
            return Err(Error::InvalidData(format!(
                "protected attribute needs >=2 levels, found {}",
                levels.len()
            )));
        }
        Ok(Self {
            label_column: "y".into(),
            protected_column: "protected".into(),
            y_true,
            protected,
            models: Vec::new(),
            features: Vec::new(),
            weights: None,
            label_names: None,
            column_order: Vec::new(),
        })
    }

    pub fn with_column_names(mut self, label: impl Into<String>, protected: impl Into<String>) -> Self {
        self.label_column = label.into();
        self.protected_column = protected.into();
        self
    }

    pub fn with_model(mut self, label: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        let label = label.into();
        let column = label.clone();
        self.add_model(label, column, scores)?;
        Ok(self)
    }

    pub fn with_feature(mut self, name: impl Into<String>, column: FeatureColumn) -> Result<Self> {
        self.add_feature(name, column)?;
        Ok(self)
    }

    pub fn add_model(&mut self, label: String, column: String, scores: Vec<f64>) -> Result<()> {
        if label.is_empty() {
            return Err(Error::InvalidData("model label must be non-empty".into()));
        }
        if self.models.iter().any(|m| m.label == label) {
            return Err(Error::InvalidData(format!("duplicate model label `{label}`")));
        }
        self.check_len(&column, scores.len())?;
        if let Some(pos) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Row {
                row: pos + 1,
                column,
                message: format!("score {} outside [0, 1]", scores[pos]),
            });
        }
        self.models.push(ModelScores {
            label,
            column,
            scores,
        });
        Ok(())
    }

    pub fn add_feature(&mut self, name: impl Into<String>, column: FeatureColumn) -> Result<()> {
        let name = name.into();
        self.check_len(&name, column.len())?;
        if self.features.iter().any(|f| f.name == name) {
            return Err(Error::InvalidData(format!("duplicate feature `{name}`")));
        }
        if let FeatureColumn::Numeric(v) = &column {
            if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::Row {
                    row: pos + 1,
                    column: name,
                    message: "non-finite value".into(),
                });
            }
        }
        self.features.push(Feature { name, column });
        Ok(())
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        self.check_len(WEIGHT_COLUMN, weights.len())?;
        if let Some(pos) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Row {
                row: pos + 1,
                column: WEIGHT_COLUMN.into(),
                message: format!("weight {} is not positive", weights[pos]),
            });
        }
        self.weights = Some(weights);
        Ok(())
    }

    fn check_len(&self, column: &str, len: usize) -> Result<()> {
        if len != self.row_count() {
            return Err(Error::InvalidData(format!(
                "column `{column}` has {len} rows, expected {}",
                self.row_count()
            )));
        }
        Ok(())
    }

    pub fn row_count(&self) -> usize {
        self.y_true.len()
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn protected_column(&self) -> &str {
        &self.protected_column
    }

    pub fn y_true(&self) -> &[u8] {
        &self.y_true
    }

    pub fn protected(&self) -> &[String] {
        &self.protected
    }

    pub fn models(&self) -> &[ModelScores] {
        &self.models
    }

    pub fn model(&self, label: &str) -> Result<&ModelScores> {
        self.models
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::UnknownModel(label.to_string()))
    }

    pub fn model_mut(&mut self, label: &str) -> Result<&mut ModelScores> {
        self.models
            .iter_mut()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::UnknownModel(label.to_string()))
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn feature_mut(&mut self, name: &str) -> Option<&mut Feature> {
        self.features.iter_mut().find(|f| f.name == name)
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Distinct protected levels, sorted.
    pub fn levels(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.protected.iter().collect();
        set.into_iter().cloned().collect()
    }

    /// Replaces the score column of `label`, validating the range.
    pub fn replace_scores(&mut self, label: &str, scores: Vec<f64>) -> Result<()> {
        self.check_len(label, scores.len())?;
        if let Some(pos) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Row {
                row: pos + 1,
                column: label.into(),
                message: format!("score {} outside [0, 1]", scores[pos]),
            });
        }
        self.model_mut(label)?.scores = scores;
        Ok(())
    }

    /// Materializes a row multiset (indices may repeat).
    pub fn select_rows(&self, rows: &[usize]) -> Result<AuditDataset> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.row_count()) {
            return Err(Error::InvalidParameter(format!("row index {bad} out of range")));
        }
        let y_true = rows.iter().map(|&i| self.y_true[i]).collect();
        let protected = rows.iter().map(|&i| self.protected[i].clone()).collect();
        let mut out = AuditDataset::new(y_true, protected)?
            .with_column_names(self.label_column.clone(), self.protected_column.clone());
        out.models = self
            .models
            .iter()
            .map(|m| ModelScores {
                label: m.label.clone(),
                column: m.column.clone(),
                scores: rows.iter().map(|&i| m.scores[i]).collect(),
            })
            .collect();
        out.features = self
            .features
            .iter()
            .map(|f| Feature {
                name: f.name.clone(),
                column: f.column.select(rows),
            })
            .collect();
        out.weights = self
            .weights
            .as_ref()
            .map(|w| rows.iter().map(|&i| w[i]).collect());
        out.label_names = self.label_names.clone();
        out.column_order = self.column_order.clone();
        Ok(out)
    }

    /// Schema that reloads this dataset from the output of [`write_csv`].
    pub fn schema(&self) -> Schema {
        Schema {
            label: self.label_column.clone(),
            protected: self.protected_column.clone(),
            scores: self
                .models
                .iter()
                .map(|m| (m.label.clone(), m.column.clone()))
                .collect(),
            favorable: self.label_names.as_ref().map(|n| n[1].clone()),
            unfavorable: self.label_names.as_ref().map(|n| n[0].clone()),
            features: Some(self.features.iter().map(|f| f.name.clone()).collect()),
        }
    }
}

/// Column roles for [`load_dataset`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub label: String,
    pub protected: String,
    /// `(model label, column name)` pairs.
    pub scores: Vec<(String, String)>,
    /// Raw label value mapped to 1. When unset, labels must be `0`/`1`.
    pub favorable: Option<String>,
    /// Raw label value mapped to 0. When unset with `favorable` set, any
    /// single other value is accepted.
    pub unfavorable: Option<String>,
    /// Feature columns to keep. `None` keeps every column without a role.
    pub features: Option<Vec<String>>,
}

impl Schema {
    pub fn new(label: impl Into<String>, protected: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            protected: protected.into(),
            ..Default::default()
        }
    }

    pub fn score(mut self, label: impl Into<String>, column: impl Into<String>) -> Self {
        self.scores.push((label.into(), column.into()));
        self
    }

    pub fn favorable(mut self, value: impl Into<String>) -> Self {
        self.favorable = Some(value.into());
        self
    }
}

/// Parses comma-delimited text with a header row into a validated dataset.
///
/// Row numbers in errors are 1-based data rows (the header is not counted).
pub fn load_dataset<R: Read>(source: R, schema: &Schema) -> Result<AuditDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let label_idx = find(&schema.label)?;
    let protected_idx = find(&schema.protected)?;
    let score_idx: Vec<usize> = schema
        .scores
        .iter()
        .map(|(_, col)| find(col))
        .collect::<Result<_>>()?;
    let weight_idx = header.iter().position(|h| h == WEIGHT_COLUMN);

    let mut reserved: BTreeSet<usize> = score_idx.iter().copied().collect();
    reserved.insert(label_idx);
    reserved.insert(protected_idx);
    if let Some(w) = weight_idx {
        reserved.insert(w);
    }
    let feature_idx: Vec<usize> = match &schema.features {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..header.len()).filter(|i| !reserved.contains(i)).collect(),
    };

    let mut raw_labels = Vec::new();
    let mut protected = Vec::new();
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); score_idx.len()];
    let mut raw_features: Vec<Vec<String>> = vec![Vec::new(); feature_idx.len()];
    let mut weights = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = |idx: usize| record.get(idx).unwrap_or("");
        let required = |idx: usize| -> Result<&str> {
            let v = cell(idx);
            if v.is_empty() {
                Err(Error::Row {
                    row,
                    column: header[idx].clone(),
                    message: "missing value".into(),
                })
            } else {
                Ok(v)
            }
        };
        raw_labels.push(required(label_idx)?.to_string());
        protected.push(required(protected_idx)?.to_string());
        for (k, &idx) in score_idx.iter().enumerate() {
            let raw = required(idx)?;
            let value: f64 = raw.parse().map_err(|_| Error::Row {
                row,
                column: header[idx].clone(),
                message: format!("score `{raw}` is not numeric"),
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Row {
                    row,
                    column: header[idx].clone(),
                    message: format!("score {value} outside [0, 1]"),
                });
            }
            scores[k].push(value);
        }
        if let Some(idx) = weight_idx {
            let raw = required(idx)?;
            let w: f64 = raw.parse().map_err(|_| Error::Row {
                row,
                column: WEIGHT_COLUMN.into(),
                message: format!("weight `{raw}` is not numeric"),
            })?;
            weights.push(w);
        }
        for (k, &idx) in feature_idx.iter().enumerate() {
            raw_features[k].push(cell(idx).to_string());
        }
    }

    if raw_labels.is_empty() {
        return Err(Error::InvalidData("dataset has no rows".into()));
    }

    let (y_true, label_names) = parse_labels(&raw_labels, schema, &header[label_idx])?;
    let mut dataset = AuditDataset::new(y_true, protected)?
        .with_column_names(schema.label.clone(), schema.protected.clone());
    dataset.label_names = label_names;
    dataset.column_order = header.clone();
    for ((label, column), values) in schema.scores.iter().zip(scores) {
        dataset.add_model(label.clone(), column.clone(), values)?;
    }
    for (&idx, values) in feature_idx.iter().zip(raw_features) {
        dataset.add_feature(header[idx].clone(), infer_feature(values))?;
    }
    if weight_idx.is_some() {
        dataset.set_weights(weights)?;
    }
    Ok(dataset)
}

type ParsedLabels = (Vec<u8>, Option<[String; 2]>);

fn parse_labels(raw: &[String], schema: &Schema, column: &str) -> Result<ParsedLabels> {
    let row_err = |row: usize, message: String| Error::Row {
        row: row + 1,
        column: column.to_string(),
        message,
    };
    match &schema.favorable {
        None => raw
            .iter()
            .enumerate()
            .map(|(i, v)| match v.as_str() {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(row_err(i, format!("label `{other}` is not 0 or 1"))),
            })
            .collect::<Result<_>>()
            .map(|y| (y, None)),
        Some(fav) => {
            let mut unfavorable = schema.unfavorable.clone();
            let y = raw
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if v == fav {
                        return Ok(1);
                    }
                    match &unfavorable {
                        Some(u) if u == v => Ok(0),
                        Some(u) => Err(row_err(
                            i,
                            format!("label `{v}` is neither `{fav}` nor `{u}`"),
                        )),
                        None => {
                            unfavorable = Some(v.clone());
                            Ok(0)
                        }
                    }
                })
                .collect::<Result<_>>()?;
            let unfavorable = unfavorable.unwrap_or_else(|| format!("not_{fav}"));
            Ok((y, Some([unfavorable, fav.clone()])))
        }
    }
}

fn infer_feature(values: Vec<String>) -> FeatureColumn {
    let parsed: Option<Vec<f64>> = values
        .iter()
        .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect();
    match parsed {
        Some(nums) => FeatureColumn::Numeric(nums),
        None => FeatureColumn::Categorical(values),
    }
}

/// Writes the dataset as CSV. Columns present at load time keep their
/// original order; new columns follow as label, protected, features,
/// weights, then one column per model. Labels loaded from strings are
/// written back as those strings.
pub fn write_csv<W: Write>(dataset: &AuditDataset, sink: W) -> Result<()> {
    type Cell<'a> = Box<dyn Fn(usize) -> String + 'a>;
    let mut columns: Vec<(String, Cell)> = Vec::new();
    let label_text = |y: u8| match &dataset.label_names {
        Some(names) => names[y as usize].clone(),
        None => y.to_string(),
    };
    columns.push((dataset.label_column.clone(), Box::new(move |r| label_text(dataset.y_true[r]))));
    columns.push((dataset.protected_column.clone(), Box::new(|r| dataset.protected[r].clone())));
    for f in &dataset.features {
        columns.push((f.name.clone(), Box::new(move |r| f.column.cell(r))));
    }
    if let Some(w) = &dataset.weights {
        columns.push((WEIGHT_COLUMN.to_string(), Box::new(move |r| w[r].to_string())));
    }
    for m in &dataset.models {
        columns.push((m.column.clone(), Box::new(move |r| m.scores[r].to_string())));
    }
    let rank = |name: &str| {
        dataset
            .column_order
            .iter()
            .position(|h| h == name)
            .unwrap_or(dataset.column_order.len())
    };
    // Stable sort keeps the default order among new columns.
    columns.sort_by_key(|(name, _)| rank(name));

    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(columns.iter().map(|(name, _)| name.as_str()))?;
    for row in 0..dataset.row_count() {
        writer.write_record(columns.iter().map(|(_, cell)| cell(row)))?;
    }
    writer.flush().map_err(|e| Error::io("<csv sink>", e))?;
    Ok(())
}

pub fn partition_subgroups(dataset: &AuditDataset) -> Partition {
    partition_levels(dataset.protected())
}

/// Groups row indices by level. Indices are pushed in row order, so each
/// list is ascending.
pub fn partition_levels(protected: &[String]) -> Partition {
    let mut out = Partition::new();
    for (i, level) in protected.iter().enumerate() {
        out.entry(level.clone()).or_default().push(i);
    }
    out
}

/// Privileged level plus the remaining levels in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectedSpec {
    pub privileged: String,
    pub unprivileged: Vec<String>,
}

impl ProtectedSpec {
    pub fn levels(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.privileged).chain(self.unprivileged.iter())
    }
}

pub fn validate_protected_spec(dataset: &AuditDataset, privileged: &str) -> Result<ProtectedSpec> {
    protected_spec_from_levels(&dataset.levels(), privileged)
}

pub fn protected_spec_from_levels(levels: &[String], privileged: &str) -> Result<ProtectedSpec> {
    if !levels.iter().any(|l| l == privileged) {
        return Err(Error::UnknownLevel {
            level: privileged.to_string(),
            available: levels.to_vec(),
        });
    }
    let mut unprivileged: Vec<String> = levels.iter().filter(|l| *l != privileged).cloned().collect();
    unprivileged.sort();
    unprivileged.dedup();
    Ok(ProtectedSpec {
        privileged: privileged.to_string(),
        unprivileged,
    })
}

/// Per-level classification cutoffs, each strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CutoffMap(BTreeMap<String, f64>);

impl CutoffMap {
    pub const DEFAULT: f64 = 0.5;

    pub fn uniform<'a>(levels: impl IntoIterator<Item = &'a String>, cutoff: f64) -> Result<Self> {
        check_cutoff(cutoff)?;
        Ok(Self(levels.into_iter().map(|l| (l.clone(), cutoff)).collect()))
    }

    pub fn for_dataset(dataset: &AuditDataset) -> Self {
        Self(
            dataset
                .levels()
                .into_iter()
                .map(|l| (l, Self::DEFAULT))
                .collect(),
        )
    }

    pub fn set(&mut self, level: &str, cutoff: f64) -> Result<()> {
        check_cutoff(cutoff)?;
        match self.0.get_mut(level) {
            Some(c) => {
                *c = cutoff;
                Ok(())
            }
            None => Err(Error::UnknownLevel {
                level: level.to_string(),
                available: self.0.keys().cloned().collect(),
            }),
        }
    }

    pub fn with(mut self, level: &str, cutoff: f64) -> Result<Self> {
        self.set(level, cutoff)?;
        Ok(self)
    }

    pub fn get(&self, level: &str) -> Option<f64> {
        self.0.get(level).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.0.iter()
    }

    /// True when not every level shares one cutoff.
    pub fn is_split(&self) -> bool {
        let mut values = self.0.values();
        match values.next() {
            Some(first) => values.any(|v| v != first),
            None => false,
        }
    }

    /// Checks that every dataset level has exactly one cutoff.
    pub fn covers(&self, levels: &[String]) -> Result<()> {
        for level in levels {
            if !self.0.contains_key(level) {
                return Err(Error::InvalidParameter(format!("no cutoff for level `{level}`")));
            }
        }
        if let Some(extra) = self.0.keys().find(|k| !levels.contains(k)) {
            return Err(Error::UnknownLevel {
                level: extra.clone(),
                available: levels.to_vec(),
            });
        }
        Ok(())
    }
}

fn check_cutoff(cutoff: f64) -> Result<()> {
    if cutoff > 0.0 && cutoff < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("cutoff {cutoff} must lie in (0, 1)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn loads_four_row_file() {
        let text = "y,sex,score_lm\n1,male,0.8\n0,female,0.3\n1,female,0.6\n0,male,0.1\n";
        let schema = Schema::new("y", "sex").score("lm", "score_lm");
        let d = load_dataset(text.as_bytes(), &schema).unwrap();
        assert_eq!(d.row_count(), 4);
        assert_eq!(d.models().len(), 1);
        assert_eq!(d.models()[0].label, "lm");
        assert_eq!(d.y_true(), &[1, 0, 1, 0]);
        assert!(d.features().is_empty());
    }

    #[test]
    fn score_out_of_range_cites_row() {
        let text = "y,sex,score_lm\n1,male,0.8\n0,female,1.2\n";
        let schema = Schema::new("y", "sex").score("lm", "score_lm");
        match load_dataset(text.as_bytes(), &schema) {
            Err(Error::Row { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "score_lm");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_level_rejected() {
        let text = "y,sex,s\n1,male,0.8\n0,male,0.3\n";
        let schema = Schema::new("y", "sex").score("m", "s");
        let err = load_dataset(text.as_bytes(), &schema).unwrap_err();
        assert!(err.to_string().contains("needs >=2 levels"), "{err}");
    }

    #[test]
    fn missing_column_named() {
        let schema = Schema::new("y", "race").score("m", "s");
        let err = load_dataset("y,sex,s\n1,a,0.5\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "race"));
    }

    #[test]
    fn empty_dataset_rejected() {
        let schema = Schema::new("y", "sex").score("m", "s");
        assert!(load_dataset("y,sex,s\n".as_bytes(), &schema).is_err());
    }

    #[test]
    fn non_numeric_score_and_bad_label() {
        let schema = Schema::new("y", "sex").score("m", "s");
        let err = load_dataset("y,sex,s\n1,a,x\n0,b,0.1\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Row { row: 1, .. }));
        let err = load_dataset("y,sex,s\n1,a,0.2\n2,b,0.1\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }));
    }

    #[test]
    fn missing_required_value_is_hard_error() {
        let schema = Schema::new("y", "sex").score("m", "s");
        let err = load_dataset("y,sex,s\n1,,0.2\n0,b,0.1\n".as_bytes(), &schema).unwrap_err();
        assert!(err.to_string().contains("missing value"));
    }

    #[test]
    fn favorable_string_mapping() {
        let text = "risk,sex,s\ngood,a,0.2\nbad,b,0.1\ngood,b,0.9\n";
        let schema = Schema::new("risk", "sex").score("m", "s").favorable("good");
        let d = load_dataset(text.as_bytes(), &schema).unwrap();
        assert_eq!(d.y_true(), &[1, 0, 1]);

        let text = "risk,sex,s\ngood,a,0.2\nbad,b,0.1\nugly,b,0.9\n";
        assert!(load_dataset(text.as_bytes(), &schema).is_err());
    }

    #[test]
    fn feature_types_inferred() {
        let text = "y,sex,age,job,s\n1,a,30,x,0.2\n0,b,41.5,y,0.1\n";
        let schema = Schema::new("y", "sex").score("m", "s");
        let d = load_dataset(text.as_bytes(), &schema).unwrap();
        assert_eq!(d.feature("age").unwrap().column, FeatureColumn::Numeric(vec![30.0, 41.5]));
        assert!(matches!(d.feature("job").unwrap().column, FeatureColumn::Categorical(_)));
    }

    #[test]
    fn partition_examples() {
        let p = partition_levels(&levels(&["a", "b", "a", "b"]));
        assert_eq!(p["a"], vec![0, 2]);
        assert_eq!(p["b"], vec![1, 3]);
        let p = partition_levels(&levels(&["a", "a", "b"]));
        assert_eq!(p["a"], vec![0, 1]);
        assert_eq!(p["b"], vec![2]);
        let p = partition_levels(&levels(&["a", "b", "c", "b"]));
        assert_eq!(p["a"], vec![0]);
        assert_eq!(p["b"], vec![1, 3]);
        assert_eq!(p["c"], vec![2]);
    }

    #[test]
    fn protected_spec_examples() {
        let s = protected_spec_from_levels(&levels(&["female", "male"]), "male").unwrap();
        assert_eq!(s.unprivileged, vec!["female"]);
        let s = protected_spec_from_levels(&levels(&["c", "a", "b"]), "b").unwrap();
        assert_eq!(s.unprivileged, vec!["a", "c"]);
        let err = protected_spec_from_levels(&levels(&["a", "b"]), "x").unwrap_err();
        assert!(err.to_string().contains("available: a, b"), "{err}");
    }

    #[test]
    fn cutoff_map_validation() {
        let lv = levels(&["a", "b"]);
        let m = CutoffMap::uniform(&lv, 0.5).unwrap();
        assert!(!m.is_split());
        assert!(m.clone().with("a", 1.0).is_err());
        assert!(m.clone().with("z", 0.3).is_err());
        assert!(m.clone().with("a", 0.3).unwrap().is_split());
        assert!(m.covers(&levels(&["a", "b", "c"])).is_err());
        assert!(CutoffMap::uniform(&lv, 0.0).is_err());
    }

    #[test]
    fn select_rows_repeats() {
        let d = AuditDataset::new(vec![1, 0, 1], levels(&["a", "b", "b"]))
            .unwrap()
            .with_model("m", vec![0.1, 0.2, 0.3])
            .unwrap();
        let s = d.select_rows(&[2, 2, 0]).unwrap();
        assert_eq!(s.y_true(), &[1, 1, 1]);
        assert_eq!(s.models()[0].scores, vec![0.3, 0.3, 0.1]);
        assert!(d.select_rows(&[3]).is_err());
    }
}
