//! Observed data and feature index sets.
//!
//! Feature indices are 1-based in every external format (CSV headers,
//! JSON exports, CLI output) and 0-based internally.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// CSV orientation for dataset files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvLayout {
    /// One row per sample, one column per feature, final `response` column.
    SamplesAsRows,
    /// One row per feature, one column per sample, final `response` row.
    FeaturesAsRows,
}

/// Format a value with 17 significant digits so the written text parses
/// back to the identical f64.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// A feature matrix (rows are features, columns are samples) together
/// with one response per sample. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    responses: Vec<f64>,
    feature_count: usize,
    sample_count: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, responses: Vec<f64>) -> Result<Self> {
        let feature_count = features.len();
        if feature_count == 0 {
            return Err(Error::data("dataset needs at least one feature"));
        }
        let sample_count = features[0].len();
        let mut flat = Vec::with_capacity(feature_count * sample_count);
        for (j, row) in features.iter().enumerate() {
            if row.len() != sample_count {
                return Err(Error::data(format!(
                    "feature row {} has {} samples, expected {}",
                    j + 1,
                    row.len(),
                    sample_count
                )));
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(flat, feature_count, sample_count, responses)
    }

    pub fn from_flat(
        features: Vec<f64>,
        feature_count: usize,
        sample_count: usize,
        responses: Vec<f64>,
    ) -> Result<Self> {
        if feature_count == 0 || sample_count == 0 {
            return Err(Error::data("dataset must have at least one feature and one sample"));
        }
        if features.len() != feature_count * sample_count {
            return Err(Error::dims(format!(
                "feature matrix has {} entries, expected {}",
                features.len(),
                feature_count * sample_count
            )));
        }
        if responses.len() != sample_count {
            return Err(Error::dims(format!(
                "responses length {} does not match sample count {}",
                responses.len(),
                sample_count
            )));
        }
        if features.iter().chain(responses.iter()).any(|v| !v.is_finite()) {
            return Err(Error::data("dataset contains a non-finite value"));
        }
        Ok(Dataset { features, responses, feature_count, sample_count })
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn feature_row(&self, index: usize) -> &[f64] {
        let n = self.sample_count;
        &self.features[index * n..(index + 1) * n]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// Feature rows for an active index set, in the set's order.
    pub fn rows_for(&self, active: &IndexSet) -> Vec<&[f64]> {
        active.indices().iter().map(|&j| self.feature_row(j)).collect()
    }

    /// Same features with replaced responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.features.clone(), self.feature_count, self.sample_count, responses)
    }

    /// Restriction to the given sample columns, in the given order.
    pub fn select_samples(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::data("sample selection is empty"));
        }
        if let Some(&bad) = keep.iter().find(|&&i| i >= self.sample_count) {
            return Err(Error::invalid(format!("sample index {bad} out of range")));
        }
        let mut features = Vec::with_capacity(self.feature_count * keep.len());
        for j in 0..self.feature_count {
            let row = self.feature_row(j);
            features.extend(keep.iter().map(|&i| row[i]));
        }
        let responses = keep.iter().map(|&i| self.responses[i]).collect();
        Self::from_flat(features, self.feature_count, keep.len(), responses)
    }

    pub fn read_csv(path: &Path, layout: CsvLayout) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(BufReader::new(file), layout)
    }

    pub fn from_reader<R: Read>(reader: R, layout: CsvLayout) -> Result<Self> {
        let rows = parse_csv(reader)?;
        match layout {
            CsvLayout::SamplesAsRows => Self::from_sample_rows(rows),
            CsvLayout::FeaturesAsRows => Self::from_feature_rows(rows),
        }
    }

    fn from_sample_rows(rows: Vec<Vec<String>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::data("empty CSV"));
        }
        let (response_col, data_rows) = if row_is_numeric(&rows[0]) {
            (rows[0].len() - 1, &rows[..])
        } else {
            let header = &rows[0];
            let pos = header
                .iter()
                .position(|h| h.eq_ignore_ascii_case("response"))
                .ok_or_else(|| Error::data("missing `response` column in CSV header"))?;
            (pos, &rows[1..])
        };
        if data_rows.is_empty() {
            return Err(Error::data("CSV has a header but no data rows"));
        }
        let width = data_rows[0].len();
        if width < 2 {
            return Err(Error::data("CSV needs at least one feature column and a response"));
        }
        let feature_count = width - 1;
        let sample_count = data_rows.len();
        let mut features = vec![0.0; feature_count * sample_count];
        let mut responses = vec![0.0; sample_count];
        for (i, row) in data_rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::data(format!(
                    "CSV row {} has {} fields, expected {width}",
                    i + 1,
                    row.len()
                )));
            }
            let mut jf = 0;
            for (c, field) in row.iter().enumerate() {
                let v = parse_field(field, i, c)?;
                if c == response_col {
                    responses[i] = v;
                } else {
                    features[jf * sample_count + i] = v;
                    jf += 1;
                }
            }
        }
        Self::from_flat(features, feature_count, sample_count, responses)
    }

    fn from_feature_rows(rows: Vec<Vec<String>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::data("transposed CSV needs feature rows plus a response row"));
        }
        // A non-numeric first field means the row carries a label.
        let labeled = rows[0].first().map(|f| f.parse::<f64>().is_err()).unwrap_or(false);
        let mut features = Vec::new();
        let mut responses: Option<Vec<f64>> = None;
        let mut sample_count = None;
        for (i, row) in rows.iter().enumerate() {
            let (label, fields) = if labeled {
                (Some(row[0].as_str()), &row[1..])
            } else {
                (None, &row[..])
            };
            let values: Vec<f64> = fields
                .iter()
                .enumerate()
                .map(|(c, f)| parse_field(f, i, c))
                .collect::<Result<_>>()?;
            if let Some(n) = sample_count {
                if values.len() != n {
                    return Err(Error::data(format!("transposed CSV row {} length mismatch", i + 1)));
                }
            } else {
                sample_count = Some(values.len());
            }
            let is_response = match label {
                Some(l) => l.eq_ignore_ascii_case("response"),
                None => i == rows.len() - 1,
            };
            if is_response {
                if responses.is_some() {
                    return Err(Error::data("transposed CSV has two response rows"));
                }
                responses = Some(values);
            } else {
                features.push(values);
            }
        }
        let responses = responses.ok_or_else(|| Error::data("missing `response` row in transposed CSV"))?;
        Self::new(features, responses)
    }

    pub fn write_csv(&self, path: &Path, layout: CsvLayout) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut out, layout)
    }

    pub fn write_to<W: Write>(&self, out: &mut W, layout: CsvLayout) -> Result<()> {
        match layout {
            CsvLayout::SamplesAsRows => {
                let header: Vec<String> = (1..=self.feature_count)
                    .map(|j| format!("f{j}"))
                    .chain(std::iter::once("response".to_string()))
                    .collect();
                writeln!(out, "{}", header.join(","))?;
                for i in 0..self.sample_count {
                    let mut fields: Vec<String> = (0..self.feature_count)
                        .map(|j| format_value(self.feature_row(j)[i]))
                        .collect();
                    fields.push(format_value(self.responses[i]));
                    writeln!(out, "{}", fields.join(","))?;
                }
            }
            CsvLayout::FeaturesAsRows => {
                for j in 0..self.feature_count {
                    let fields: Vec<String> =
                        self.feature_row(j).iter().map(|&v| format_value(v)).collect();
                    writeln!(out, "f{},{}", j + 1, fields.join(","))?;
                }
                let fields: Vec<String> =
                    self.responses.iter().map(|&v| format_value(v)).collect();
                writeln!(out, "response,{}", fields.join(","))?;
            }
        }
        Ok(())
    }
}

pub(crate) fn parse_csv<R: Read>(reader: R) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']).trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        rows.push(trimmed.split(',').map(|f| f.trim().to_string()).collect());
    }
    Ok(rows)
}

pub(crate) fn row_is_numeric(row: &[String]) -> bool {
    row.iter().all(|f| f.parse::<f64>().is_ok())
}

pub(crate) fn parse_field(field: &str, row: usize, col: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::data(format!("cannot parse `{field}` at row {} column {}", row + 1, col + 1))
    })
}

/// Ordered set of distinct feature indices (0-based internally).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet { indices: Vec::new() }
    }

    /// Build from 0-based indices, checking distinctness and range.
    pub fn new(indices: Vec<usize>, feature_count: usize) -> Result<Self> {
        let mut seen = vec![false; feature_count];
        for &i in &indices {
            if i >= feature_count {
                return Err(Error::invalid(format!(
                    "feature index {} out of range 1..={feature_count}",
                    i + 1
                )));
            }
            if seen[i] {
                return Err(Error::invalid(format!("duplicate feature index {}", i + 1)));
            }
            seen[i] = true;
        }
        Ok(IndexSet { indices })
    }

    pub fn from_one_based(indices: &[usize], feature_count: usize) -> Result<Self> {
        let zero_based: Vec<usize> = indices
            .iter()
            .map(|&i| {
                if i == 0 {
                    Err(Error::invalid("feature indices are 1-based; got 0"))
                } else {
                    Ok(i - 1)
                }
            })
            .collect::<Result<_>>()?;
        Self::new(zero_based, feature_count)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|&i| i + 1).collect()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.indices.iter().all(|i| other.contains(*i))
    }

    /// Order-insensitive set equality; the support-detection metric.
    pub fn same_set(&self, other: &IndexSet) -> bool {
        self.len() == other.len() && self.is_subset_of(other)
    }

    /// Union preserving this set's order, then the other's novel entries.
    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut indices = self.indices.clone();
        for &i in &other.indices {
            if !indices.contains(&i) {
                indices.push(i);
            }
        }
        IndexSet { indices }
    }

    /// Append one index; errors on duplicates.
    pub fn with_appended(&self, index: usize) -> Result<IndexSet> {
        if self.contains(index) {
            return Err(Error::invalid(format!("index {} already active", index + 1)));
        }
        let mut indices = self.indices.clone();
        indices.push(index);
        Ok(IndexSet { indices })
    }
}

impl FromIterator<usize> for IndexSet {
    /// Builds without range checking; duplicates are dropped.
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut set = IndexSet::empty();
        for i in iter {
            if !set.contains(i) {
                set.indices.push(i);
            }
        }
        set
    }
}
