//! CSV datasets and JSON model files.
//!
//! Feature indices are 1-based in every file; they are converted at this boundary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::nn::{NetworkArchitecture, NetworkParameters};
use crate::sim::GroundTruth;

pub const MODEL_FORMAT: &str = "enns-model";
pub const MODEL_VERSION: u32 = 1;

fn data_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}: {msg}", path.display()))
}

/// Parses a numeric CSV with a header row into `(header, rows)`.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let file = File::open(path).map_err(|e| data_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(data_err(path, "missing header row"));
    }
    let width = header.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => data_err(path, format!("line {}: {e}", pos.line())),
            None => data_err(path, e),
        })?;
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        if record.len() != width {
            return Err(data_err(path, format!("line {line}: expected {width} fields, found {}", record.len())));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                data_err(path, format!("line {line}, column {}: `{field}` is not a number", col + 1))
            })?;
            if !v.is_finite() {
                return Err(data_err(path, format!("line {line}, column {}: non-finite value", col + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(data_err(path, "no data rows"));
    }
    let x = Array2::from_shape_vec((rows, width), values).expect("row-major buffer");
    Ok((header, x))
}

/// Writes `x` with header `{prefix}1..{prefix}p` (or just `prefix` for one
/// column), 17 significant digits per value.
pub fn write_csv(path: &Path, x: &Array2<f64>, header: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in x.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn feature_header(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

pub fn write_design(path: &Path, x: &Array2<f64>) -> Result<()> {
    write_csv(path, x, &feature_header(x.ncols()))
}

pub fn write_response(path: &Path, y: &Array1<f64>) -> Result<()> {
    let col = y.clone().insert_axis(ndarray::Axis(1));
    write_csv(path, &col, &["y".to_string()])
}

pub fn read_design(path: &Path) -> Result<Array2<f64>> {
    read_csv(path).map(|(_, x)| x)
}

pub fn read_response(path: &Path) -> Result<Array1<f64>> {
    let (_, y) = read_csv(path)?;
    if y.ncols() != 1 {
        return Err(data_err(path, format!("expected one column, found {}", y.ncols())));
    }
    Ok(y.column(0).to_owned())
}

/// Loads `X.csv` and `y.csv` into a dataset.
pub fn load_dataset(x_path: &Path, y_path: &Path, task: Task) -> Result<Dataset> {
    let x = read_design(x_path)?;
    let y = read_response(y_path)?;
    if x.nrows() != y.len() {
        return Err(Error::Data(format!(
            "{} has {} rows but {} has {}",
            x_path.display(),
            x.nrows(),
            y_path.display(),
            y.len()
        )));
    }
    Dataset::new(x, y, task).map_err(|e| match e {
        Error::InvalidArgument(m) | Error::DimensionMismatch(m) => Error::Data(m),
        other => other,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    /// Row-major values.
    pub values: Vec<f64>,
}

impl MatrixJson {
    fn from_array(a: &Array2<f64>) -> Self {
        MatrixJson {
            rows: a.nrows(),
            cols: a.ncols(),
            values: a.iter().copied().collect(),
        }
    }

    fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.values.clone())
            .map_err(|_| Error::Data(format!("matrix {}×{} has {} values", self.rows, self.cols, self.values.len())))
    }
}

/// Network weights in a stable JSON layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametersJson {
    pub weights: Vec<MatrixJson>,
    pub hidden_intercepts: Vec<Vec<f64>>,
    pub output_intercept: f64,
}

impl ParametersJson {
    pub fn from_params(params: &NetworkParameters) -> Self {
        ParametersJson {
            weights: params.weights.iter().map(MatrixJson::from_array).collect(),
            hidden_intercepts: params.hidden_intercepts.iter().map(|b| b.to_vec()).collect(),
            output_intercept: params.output_intercept,
        }
    }

    pub fn to_params(&self, arch: &NetworkArchitecture) -> Result<NetworkParameters> {
        let params = NetworkParameters {
            weights: self.weights.iter().map(MatrixJson::to_array).collect::<Result<_>>()?,
            hidden_intercepts: self.hidden_intercepts.iter().map(|b| Array1::from(b.clone())).collect(),
            output_intercept: self.output_intercept,
        };
        params
            .check_shapes(arch)
            .map_err(|e| Error::Data(format!("parameters do not match the architecture: {e}")))?;
        Ok(params)
    }
}

/// Persisted model: architecture, the selected columns it reads (1-based) and its weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub architecture: NetworkArchitecture,
    pub selected: Vec<usize>,
    #[serde(flatten)]
    pub parameters: ParametersJson,
}

/// A model read back from disk. `selected` is 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredModel {
    pub architecture: NetworkArchitecture,
    pub selected: Vec<usize>,
    pub parameters: NetworkParameters,
}

pub fn save_model(path: &Path, model: &StoredModel) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        architecture: model.architecture.clone(),
        selected: model.selected.iter().map(|j| j + 1).collect(),
        parameters: ParametersJson::from_params(&model.parameters),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<StoredModel> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(path, e))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| data_err(path, e))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(data_err(
            path,
            format!("unsupported model format `{}` version {}", file.format, file.version),
        ));
    }
    file.architecture.validate().map_err(|e| data_err(path, e))?;
    if file.selected.len() != file.architecture.input_dim || file.selected.contains(&0) {
        return Err(data_err(path, "selected columns must be 1-based and match the input width"));
    }
    let parameters = file.parameters.to_params(&file.architecture).map_err(|e| data_err(path, e))?;
    Ok(StoredModel {
        architecture: file.architecture,
        selected: file.selected.iter().map(|j| j - 1).collect(),
        parameters,
    })
}

/// `truth.json` written next to generated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    /// 1-based true support.
    pub support: Vec<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generator_architecture: Option<NetworkArchitecture>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generator: Option<ParametersJson>,
}

impl TruthFile {
    pub fn from_truth(truth: &GroundTruth) -> Self {
        TruthFile {
            support: truth.support.iter().map(|j| j + 1).collect(),
            seed: truth.seed,
            coefficients: truth.coefficients.clone(),
            generator_architecture: truth.generator.as_ref().map(|(a, _)| a.clone()),
            generator: truth.generator.as_ref().map(|(_, p)| ParametersJson::from_params(p)),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
