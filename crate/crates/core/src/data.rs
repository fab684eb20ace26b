//! Datasets: a design matrix, a response vector and the task kind.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(invalid(format!("unknown task `{other}`"))),
        }
    }
}

/// Training sample `(X, y)`. Rows are observations, columns are features.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    task: Task,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, task: Task) -> Result<Self> {
        let (n, _) = x.dim();
        if n == 0 {
            return Err(Error::Data("dataset has no observations".into()));
        }
        if y.len() != n {
            return Err(mismatch(format!(
                "design has {n} rows but response has {} entries",
                y.len()
            )));
        }
        if let Some(((i, j), v)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite design entry {v} at row {}, column {}", i + 1, j + 1)));
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite response {v} at row {}", i + 1)));
        }
        if task == Task::Classification {
            if let Some((i, v)) = y.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
                return Err(Error::Data(format!(
                    "classification response must be 0 or 1, found {v} at row {}",
                    i + 1
                )));
            }
        }
        Ok(Dataset { x, y, task })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of features.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>, Task) {
        (self.x, self.y, self.task)
    }

    /// Sub-dataset with the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Dataset> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.p()) {
            return Err(invalid(format!("column index {c} out of range for {} features", self.p())));
        }
        Ok(Dataset {
            x: self.x.select(Axis(1), columns),
            y: self.y.clone(),
            task: self.task,
        })
    }

    /// Sub-dataset with the given rows; repeated indices are allowed.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::Data("row selection is empty".into()));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(invalid(format!("row index {r} out of range for {} observations", self.n())));
        }
        Ok(Dataset {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            task: self.task,
        })
    }

    /// Returns a copy with a standardized response and the transform that undoes it.
    /// Classification data is returned unchanged with the identity transform.
    pub fn standardize_response(&self) -> (Dataset, ResponseScale) {
        let scale = ResponseScale::fit(self);
        let y = self.y.mapv(|v| (v - scale.center) / scale.scale);
        (
            Dataset {
                x: self.x.clone(),
                y,
                task: self.task,
            },
            scale,
        )
    }
}

/// Affine map `y = center + scale * z` between a standardized and an original response.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseScale {
    pub center: f64,
    pub scale: f64,
}

impl ResponseScale {
    pub const IDENTITY: ResponseScale = ResponseScale {
        center: 0.0,
        scale: 1.0,
    };

    pub fn fit(data: &Dataset) -> ResponseScale {
        if data.task() == Task::Classification {
            return Self::IDENTITY;
        }
        let y = data.y();
        let n = y.len() as f64;
        let center = y.sum() / n;
        let var = y.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 && var.is_finite() { var.sqrt() } else { 1.0 };
        ResponseScale { center, scale }
    }

    pub fn restore(&self, z: f64) -> f64 {
        self.center + self.scale * z
    }
}
