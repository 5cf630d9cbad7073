//! Batched traces and their on-disk formats.
//!
//! A trace batch is a real tensor of order at least 2: axis 0 is time,
//! axis 1 is the feature column, and any further axes index independent
//! traces evaluated together.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{RealTensor, Shape};

#[derive(Clone, Debug, PartialEq)]
pub struct TraceBatch {
    tensor: RealTensor,
}

impl TraceBatch {
    pub fn new(tensor: RealTensor) -> Result<Self> {
        if tensor.order() < 2 {
            return Err(Error::Shape(format!(
                "a trace needs time and feature axes, got dims {}",
                tensor.shape()
            )));
        }
        Ok(TraceBatch { tensor })
    }

    /// Single trace from per-step feature rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::Shape(format!(
                "row {bad} has {} features, expected {width}",
                rows[bad].len()
            )));
        }
        let elems = rows.iter().flatten().copied().collect();
        TraceBatch::new(RealTensor::new(vec![rows.len(), width], elems)?)
    }

    pub fn tensor(&self) -> &RealTensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> RealTensor {
        self.tensor
    }

    pub fn shape(&self) -> &Shape {
        self.tensor.shape()
    }

    /// Number of time steps, `d₀`.
    pub fn steps(&self) -> usize {
        self.tensor.dims()[0]
    }

    /// Number of feature columns, `d₁`.
    pub fn features(&self) -> usize {
        self.tensor.dims()[1]
    }

    /// Shape of one evaluation result, `(d₂, …)`.
    pub fn batch_shape(&self) -> Shape {
        self.tensor.shape().suffix(2)
    }

    pub fn batch_size(&self) -> usize {
        self.batch_shape().capacity()
    }

    /// Feature `feature` at step `t` across the batch.
    pub fn column(&self, t: usize, feature: usize) -> Result<RealTensor> {
        self.tensor.subt(&[t, feature])
    }

    /// The single trace at flat batch position `b`, as `(d₀, d₁)` rows.
    pub fn slice_rows(&self, b: usize) -> Vec<Vec<f64>> {
        let batch = self.batch_size();
        let elems = self.tensor.elems();
        (0..self.steps())
            .map(|t| {
                (0..self.features())
                    .map(|f| elems[(t * self.features() + f) * batch + b])
                    .collect()
            })
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        TraceBatch::new(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.tensor).expect("tensor serialises")
    }

    /// Order-2 trace from CSV: one row per step, one column per feature. A
    /// non-numeric first row is taken as a header.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(Error::Shape(format!("CSV row {}: {e}", i + 1)));
                }
            }
        }
        TraceBatch::from_rows(&rows)
    }

    /// Loads `.csv` files as CSV and anything else as tensor JSON.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let is_csv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            TraceBatch::from_csv_reader(std::fs::File::open(path)?)
        } else {
            TraceBatch::from_json_str(&std::fs::read_to_string(path)?)
        }
    }
}

impl TryFrom<RealTensor> for TraceBatch {
    type Error = Error;

    fn try_from(tensor: RealTensor) -> Result<Self> {
        TraceBatch::new(tensor)
    }
}
