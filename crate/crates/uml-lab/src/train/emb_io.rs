//! Embedding file format.
//!
//! Text format, one header line then one row per line:
//!
//! ```text
//! uml-emb v1 <n_rows> <dim> <has_labels:0|1>
//! <f64> <f64> ... <f64> [label]
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! files reload bitwise.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A feature matrix (rows are samples) with optional integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings {
    pub features: DMatrix<f64>,
    pub labels: Option<Vec<usize>>,
}

impl LabeledEmbeddings {
    pub fn new(features: DMatrix<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != features.nrows() {
                return Err(Error::invalid("label count does not match feature rows"));
            }
        }
        Ok(LabeledEmbeddings { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels_or_err(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::invalid("embeddings carry no labels"))
    }

    /// Largest label + 1, when labeled.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |&m| m + 1))
    }
}

/// Write embeddings in `uml-emb v1` format.
pub fn write_embeddings(path: &Path, data: &LabeledEmbeddings) -> Result<()> {
    let has_labels = data.labels.is_some();
    let mut out = String::new();
    out.push_str(&format!(
        "uml-emb v1 {} {} {}\n",
        data.len(),
        data.dim(),
        u8::from(has_labels)
    ));
    for i in 0..data.len() {
        let mut fields: Vec<String> = (0..data.dim())
            .map(|j| format!("{}", data.features[(i, j)]))
            .collect();
        if let Some(labels) = &data.labels {
            fields.push(labels[i].to_string());
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read an `uml-emb v1` file.
pub fn read_embeddings(path: &Path) -> Result<LabeledEmbeddings> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty embedding file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "uml-emb" || parts[1] != "v1" {
        return Err(Error::Format(format!("bad embedding header: {header:?}")));
    }
    let n_rows: usize = parts[2]
        .parse()
        .map_err(|_| Error::Format("bad row count in header".into()))?;
    let dim: usize = parts[3]
        .parse()
        .map_err(|_| Error::Format("bad dim in header".into()))?;
    let has_labels = match parts[4] {
        "0" => false,
        "1" => true,
        other => return Err(Error::Format(format!("bad label flag {other:?}"))),
    };
    let mut features = DMatrix::zeros(n_rows, dim);
    let mut labels = if has_labels {
        Some(Vec::with_capacity(n_rows))
    } else {
        None
    };
    let expected_fields = dim + usize::from(has_labels);
    let mut rows_seen = 0usize;
    for (i, line) in lines.enumerate() {
        if i >= n_rows {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::Format("more data rows than the header declares".into()));
        }
        rows_seen += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != expected_fields {
            return Err(Error::Format(format!(
                "row {i} has {} fields, expected {expected_fields}",
                fields.len()
            )));
        }
        for j in 0..dim {
            features[(i, j)] = fields[j]
                .parse()
                .map_err(|_| Error::Format(format!("row {i} field {j} is not a float")))?;
        }
        if let Some(l) = labels.as_mut() {
            let label: usize = fields[dim]
                .parse()
                .map_err(|_| Error::Format(format!("row {i} label is not an integer")))?;
            l.push(label);
        }
    }
    if rows_seen != n_rows {
        return Err(Error::Format("fewer data rows than the header declares".into()));
    }
    LabeledEmbeddings::new(features, labels)
}
