use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// One record: a feature row and an optional class label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record<'a> {
    pub features: &'a [f64],
    pub label: Option<u32>,
}

impl<'a> Record<'a> {
    pub fn unlabelled(features: &'a [f64]) -> Self {
        Record {
            features,
            label: None,
        }
    }

    pub fn labelled(features: &'a [f64], label: u32) -> Self {
        Record {
            features,
            label: Some(label),
        }
    }
}

/// Column sums used by the Gaussian full-data fast path.
#[derive(Clone, Debug)]
pub(crate) struct ColumnStats {
    pub mean: Vec<f64>,
    /// Mean of the squared row norms.
    pub mean_sq_norm: f64,
}

/// Immutable row-major table of `n` records with `p` features each.
#[derive(Clone, Debug)]
pub struct Dataset {
    width: usize,
    values: Vec<f64>,
    labels: Option<Vec<u32>>,
    stats: OnceLock<ColumnStats>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.values == other.values && self.labels == other.labels
    }
}

impl Dataset {
    pub fn new(width: usize, values: Vec<f64>, labels: Option<Vec<u32>>) -> Result<Self> {
        if width == 0 {
            return Err(Error::contract("dataset width must be >= 1"));
        }
        if values.is_empty() || values.len() % width != 0 {
            return Err(Error::contract(format!(
                "dataset needs n >= 1 rows of width {width}, got {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("dataset values must be finite"));
        }
        let n = values.len() / width;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::contract(format!("{} labels for {n} records", l.len())));
            }
        }
        Ok(Dataset {
            width,
            values,
            labels,
            stats: OnceLock::new(),
        })
    }

    /// Builds a dataset from equal-width rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], labels: Option<Vec<u32>>) -> Result<Self> {
        let width = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::contract("all dataset rows must have the same width"));
        }
        let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Dataset::new(width, values, labels)
    }

    /// One-dimensional dataset from scalars.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Dataset::new(1, xs.to_vec(), None)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn record(&self, i: usize) -> Record<'_> {
        Record {
            features: self.row(i),
            label: self.labels.as_ref().map(|l| l[i]),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-column sample mean x̄.
    pub fn column_means(&self) -> Vec<f64> {
        self.column_stats().mean.clone()
    }

    pub(crate) fn column_stats(&self) -> &ColumnStats {
        self.stats.get_or_init(|| {
            let n = self.len() as f64;
            let mut mean = vec![0.0; self.width];
            let mut sq = 0.0;
            for row in self.values.chunks_exact(self.width) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                    sq += v * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            ColumnStats {
                mean,
                mean_sq_norm: sq / n,
            }
        })
    }

    /// Writes `x0,...,x{p-1}[,label]` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.width).map(|j| format!("x{j}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.row(i).iter().map(|v| fmt_f64(*v)).collect();
            if let Some(l) = &self.labels {
                row.push(l[i].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let has_label = header.iter().last() == Some("label");
        let width = header.len() - usize::from(has_label);
        for (j, name) in header.iter().take(width).enumerate() {
            if name != format!("x{j}") {
                return Err(Error::Parse(format!("expected column x{j}, found `{name}`")));
            }
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            for field in rec.iter().take(width) {
                values.push(field.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("row {line}: bad value `{field}`: {e}"))
                })?);
            }
            if has_label {
                let field = &rec[width];
                labels.push(field.parse::<u32>().map_err(|e| {
                    Error::Parse(format!("row {line}: bad label `{field}`: {e}"))
                })?);
            }
        }
        Dataset::new(width, values, has_label.then_some(labels))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::read_csv(std::fs::File::open(path)?)
    }
}

/// Formats with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
