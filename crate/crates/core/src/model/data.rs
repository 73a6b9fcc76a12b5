use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// A feature matrix with optional labels. Missing cells are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    column_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        column_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<f64>>,
    ) -> Result<Self> {
        let width = column_names.len();
        if let Some(r) = rows.iter().position(|row| row.len() != width) {
            return Err(Error::Data(format!(
                "row {r} has {} cells, expected {width}",
                rows[r].len()
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != rows.len() {
                return Err(Error::Data(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    rows.len()
                )));
            }
        }
        Ok(Self {
            column_names,
            rows,
            labels,
        })
    }

    /// Unlabelled dataset with generated column names `f0..`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        Self::new((0..width).map(|i| format!("f{i}")).collect(), rows, None)
    }

    pub fn with_labels(self, labels: Vec<f64>) -> Result<Self> {
        Self::new(self.column_names, self.rows, Some(labels))
    }

    /// Reads a CSV with a header row. Empty cells are missing values; the
    /// column named `label`, when given, becomes the label vector.
    pub fn from_csv<R: Read>(reader: R, label: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let label_idx = match label {
            Some(name) => Some(
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Data(format!("label column `{name}` not found")))?,
            ),
            None => None,
        };
        let mut rows = Vec::new();
        let mut labels = label_idx.map(|_| Vec::new());
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(header.len());
            for (c, cell) in record.iter().enumerate() {
                let value = if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| {
                        Error::Data(format!(
                            "row {}, column `{}`: `{cell}` is not a number",
                            r + 1,
                            header[c]
                        ))
                    })?
                };
                if Some(c) == label_idx {
                    if value.is_nan() {
                        return Err(Error::Data(format!("row {}: missing label", r + 1)));
                    }
                    labels.as_mut().unwrap().push(value);
                } else {
                    row.push(value);
                }
            }
            rows.push(row);
        }
        let names = header
            .into_iter()
            .enumerate()
            .filter(|(c, _)| Some(*c) != label_idx)
            .map(|(_, h)| h)
            .collect();
        Self::new(names, rows, labels)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, label: Option<&str>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
        Self::from_csv(file, label)
    }

    /// Writes the dataset as CSV; labels go in a trailing column named `label_name`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, label_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.column_names.clone();
        if self.labels.is_some() {
            header.push(label_name.to_owned());
        }
        w.write_record(&header)?;
        for (r, row) in self.rows.iter().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|v| fmt_cell(*v)).collect();
            if let Some(labels) = &self.labels {
                cells.push(fmt_cell(labels[r]));
            }
            w.write_record(&cells)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Removes a named column and returns its values.
    pub fn take_column(&mut self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .column_names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column `{name}` not found")))?;
        self.column_names.remove(c);
        Ok(self.rows.iter_mut().map(|row| row.remove(c)).collect())
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.column_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|row| row[c]).collect()
    }
}

pub(crate) fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}
