use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Response `y`, exposure `w` and the covariate columns of a varying-coefficient
/// regression `Y = beta(W)^T X + eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    y: Vec<f64>,
    w: Vec<f64>,
    columns: Vec<Vec<f64>>,
    names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, w: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if w.len() != n {
            return Err(Error::LengthMismatch {
                what: "exposure",
                got: w.len(),
                expected: n,
            });
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                what: "covariate",
                got: c.len(),
                expected: n,
            });
        }
        check_finite("response", &y)?;
        check_finite("exposure", &w)?;
        for (j, c) in columns.iter().enumerate() {
            check_finite(&format!("covariate {j}"), c)?;
        }
        Ok(Self {
            y,
            w,
            columns,
            names: None,
        })
    }

    pub fn from_matrix(y: Vec<f64>, w: Vec<f64>, x: &DMatrix<f64>) -> Result<Self> {
        let columns = x.column_iter().map(|c| c.iter().copied().collect()).collect();
        Self::new(y, w, columns)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.columns.len() {
            return Err(Error::LengthMismatch {
                what: "column names",
                got: names.len(),
                expected: self.columns.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn name(&self, j: usize) -> String {
        match &self.names {
            Some(n) => n[j].clone(),
            None => format!("X{}", j + 1),
        }
    }

    /// Rows `idx` of every field, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            y: pick(&self.y),
            w: pick(&self.w),
            columns: self.columns.iter().map(|c| pick(c)).collect(),
            names: self.names.clone(),
        }
    }

    /// Appends covariate columns (names are generated as `X{index}`).
    pub fn append_columns(&mut self, extra: Vec<Vec<f64>>) -> Result<()> {
        let n = self.n();
        if let Some(c) = extra.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                what: "covariate",
                got: c.len(),
                expected: n,
            });
        }
        let start = self.columns.len();
        if let Some(names) = &mut self.names {
            names.extend((start..start + extra.len()).map(|j| format!("X{}", j + 1)));
        }
        self.columns.extend(extra);
        Ok(())
    }

    /// Copy with each covariate centred and scaled to unit sample variance.
    /// Constant columns are only centred.
    pub fn standardized(&self) -> Self {
        let n = self.n() as f64;
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let mean = c.iter().sum::<f64>() / n;
                let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
                c.iter().map(|v| (v - mean) / sd).collect()
            })
            .collect();
        Self {
            columns,
            ..self.clone()
        }
    }
}

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(row) => Err(Error::NonFinite {
            what: what.to_string(),
            row,
        }),
        None => Ok(()),
    }
}

/// `(1/n) sum v_i^2`.
pub fn mean_square(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}
