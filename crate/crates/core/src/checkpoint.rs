//! Binary checkpoint container: little-endian u64 header length, a JSON
//! header (tensor names, shapes, dtype, byte order, free-form metadata), then
//! the raw little-endian f64 payload of every tensor in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

const FORMAT: &str = "codefusion-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dtype: String,
    byte_order: String,
    tensors: Vec<TensorEntry>,
    meta: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: Value,
    pub tensors: Vec<(TensorEntry, Vec<f64>)>,
}

impl Checkpoint {
    pub fn new(meta: Value) -> Self {
        Self {
            meta,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, shape: &[usize], data: &[f64]) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push((
            TensorEntry {
                name: name.to_string(),
                shape: shape.to_vec(),
            },
            data.to_vec(),
        ));
    }

    pub fn get(&self, name: &str) -> Result<&(TensorEntry, Vec<f64>)> {
        self.tensors
            .iter()
            .find(|(e, _)| e.name == name)
            .ok_or_else(|| Error::invalid(format!("checkpoint has no tensor {name}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            format: FORMAT.to_string(),
            version: 1,
            dtype: "f64".to_string(),
            byte_order: "little".to_string(),
            tensors: self.tensors.iter().map(|(e, _)| e.clone()).collect(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let payload: usize = self.tensors.iter().map(|(_, d)| d.len() * 8).sum();
        let mut out = Vec::with_capacity(8 + json.len() + payload);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, data) in &self.tensors {
            for x in data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::invalid(format!("checkpoint: {m}"));
        if bytes.len() < 8 {
            return Err(bad("truncated header length"));
        }
        let hlen = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let body = bytes
            .get(8..8 + hlen)
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| bad(&format!("header: {e}")))?;
        if header.format != FORMAT || header.dtype != "f64" || header.byte_order != "little" {
            return Err(bad("unsupported format, dtype or byte order"));
        }
        let mut pos = 8 + hlen;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            let n: usize = entry.shape.iter().product();
            let raw = bytes
                .get(pos..pos + 8 * n)
                .ok_or_else(|| bad(&format!("truncated payload for {}", entry.name)))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            pos += 8 * n;
            tensors.push((entry, data));
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Self {
            meta: header.meta,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bytes_round_trip(data in proptest::collection::vec(-1e6f64..1e6, 0..40), rows in 1usize..5) {
            let n = data.len() / rows * rows;
            let mut ck = Checkpoint::new(serde_json::json!({"k": "v"}));
            ck.push("w", &[rows, n / rows], &data[..n]);
            ck.push("b", &[2], &[0.5, -0.0]);
            let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
            prop_assert_eq!(back, ck);
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut ck = Checkpoint::new(Value::Null);
        ck.push("w", &[3], &[1.0, 2.0, 3.0]);
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
