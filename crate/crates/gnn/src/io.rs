//! JSON weight files.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::model::{GnnDims, GnnParams};
use crate::nn::DenseLayer;
use crate::GnnError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightFile {
    format_version: u32,
    dims: GnnDims,
    tensors: Vec<Tensor>,
}

pub fn params_to_json(p: &GnnParams) -> String {
    let mut tensors = Vec::new();
    for (name, layer) in p.layers() {
        tensors.push(Tensor {
            name: format!("{name}.weight"),
            shape: layer.weights.shape().to_vec(),
            data: layer.weights.iter().copied().collect(),
        });
        tensors.push(Tensor {
            name: format!("{name}.bias"),
            shape: vec![layer.biases.len()],
            data: layer.biases.to_vec(),
        });
    }
    let file = WeightFile {
        format_version: FORMAT_VERSION,
        dims: p.dims().clone(),
        tensors,
    };
    serde_json::to_string_pretty(&file).expect("weights serialize")
}

pub fn params_from_json(text: &str) -> Result<GnnParams, GnnError> {
    let corrupt = |e: &dyn std::fmt::Display| GnnError::CorruptFile(e.to_string());
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(&e))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| GnnError::CorruptFile("missing format_version".to_string()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(GnnError::FormatVersionMismatch {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let file: WeightFile = serde_json::from_value(value).map_err(|e| corrupt(&e))?;
    file.dims.validate().map_err(|e| corrupt(&e))?;
    if file.tensors.len() % 2 != 0 {
        return Err(GnnError::CorruptFile("unpaired weight tensor".to_string()));
    }
    let mut layers = Vec::new();
    for pair in file.tensors.chunks(2) {
        let (w, b) = (&pair[0], &pair[1]);
        if w.shape.len() != 2 || b.shape.len() != 1 {
            return Err(GnnError::CorruptFile(format!("bad tensor rank for {}", w.name)));
        }
        let weights = Array2::from_shape_vec((w.shape[0], w.shape[1]), w.data.clone()).map_err(|e| corrupt(&e))?;
        if b.data.len() != b.shape[0] {
            return Err(GnnError::CorruptFile(format!("bad length for {}", b.name)));
        }
        let layer = DenseLayer::new(weights, Array1::from(b.data.clone())).map_err(|e| corrupt(&e))?;
        layers.push(layer);
    }
    GnnParams::from_parts(file.dims, layers)
}

pub fn save_params(p: &GnnParams, path: &Path) -> Result<(), GnnError> {
    std::fs::write(path, params_to_json(p))?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<GnnParams, GnnError> {
    params_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = GnnParams::init(&GnnDims::default(), 42).unwrap();
        let q = params_from_json(&params_to_json(&p)).unwrap();
        assert_eq!(p, q);
        assert!(p.to_flat().iter().zip(q.to_flat()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn version_and_corruption_errors() {
        let text = params_to_json(&GnnParams::init(&GnnDims::default(), 1).unwrap());
        let wrong = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(
            params_from_json(&wrong),
            Err(GnnError::FormatVersionMismatch { expected: 1, found: 2 })
        ));
        let truncated = &text[..text.len() / 2];
        assert!(matches!(params_from_json(truncated), Err(GnnError::CorruptFile(_))));
        let reshaped = text.replacen("\"hidden\": 5", "\"hidden\": 4", 1);
        assert!(matches!(params_from_json(&reshaped), Err(GnnError::CorruptFile(_))));
    }
}
