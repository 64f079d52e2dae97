//! Binary checkpoint: `u64` LE header length, a JSON header, then every
//! tensor as little-endian `f64` in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::decoder::DecoderStrategy;
use super::model::{ModelDims, RecurrentModel};
use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "pandc-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Byte offset from the start of the payload section.
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub dims: ModelDims,
    pub strategy: DecoderStrategy,
    pub seed: u64,
    pub tensors: Vec<TensorEntry>,
    pub payload_bytes: usize,
}

pub fn encode_checkpoint<T: Scalar>(model: &RecurrentModel<T>, seed: u64) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut offset = 0;
    for t in model.named_tensors() {
        tensors.push(TensorEntry {
            name: t.name,
            shape: t.shape,
            offset,
            len: t.data.len(),
        });
        offset += 8 * t.data.len();
    }
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        dtype: "f64le".into(),
        dims: model.dims(),
        strategy: model.strategy(),
        seed,
        tensors,
        payload_bytes: offset,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(8 + json.len() + offset);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in model.tensors() {
        for v in t {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<(RecurrentModel<T>, CheckpointHeader)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(|| bad("truncated header length"))?.try_into().unwrap();
    let hlen = u64::from_le_bytes(len_bytes) as usize;
    let header_bytes = bytes.get(8..8 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(header_bytes)?;
    if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
        return Err(bad("unsupported checkpoint format or version"));
    }
    if header.dtype != "f64le" {
        return Err(bad("unsupported dtype"));
    }
    let payload = &bytes[8 + hlen..];
    if payload.len() != header.payload_bytes {
        return Err(bad("payload size does not match header"));
    }
    let mut model = RecurrentModel::<T>::init(header.dims, 0)?;
    let expected: Vec<(String, [usize; 2])> =
        model.named_tensors().into_iter().map(|t| (t.name, t.shape)).collect();
    if expected.len() != header.tensors.len() {
        return Err(bad("tensor count does not match dims"));
    }
    for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
        if *name != entry.name || *shape != entry.shape {
            return Err(Error::Checkpoint(format!(
                "tensor {} {:?} does not match expected {name} {shape:?}",
                entry.name, entry.shape
            )));
        }
    }
    for (dst, entry) in model.tensors_mut().into_iter().zip(&header.tensors) {
        let raw = payload
            .get(entry.offset..entry.offset + 8 * entry.len)
            .ok_or_else(|| bad("tensor outside payload"))?;
        for (d, chunk) in dst.iter_mut().zip(raw.chunks_exact(8)) {
            *d = T::lit(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
    }
    Ok((model, header))
}

pub fn save_checkpoint<T: Scalar>(model: &RecurrentModel<T>, seed: u64, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model, seed)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(RecurrentModel<T>, CheckpointHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dims = ModelDims::new(6, 3, 2, DecoderStrategy::FixedStates);
        let m = RecurrentModel::<f64>::init(dims, 9).unwrap();
        let bytes = encode_checkpoint(&m, 9).unwrap();
        let (back, header) = decode_checkpoint::<f64>(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(header.seed, 9);
        assert_eq!(header.strategy, DecoderStrategy::FixedStates);
        assert_eq!(encode_checkpoint(&back, 9).unwrap(), bytes);
    }

    #[test]
    fn header_offsets_cover_payload() {
        let dims = ModelDims::new(3, 2, 1, DecoderStrategy::FixedWeights);
        let m = RecurrentModel::<f64>::init(dims, 0).unwrap();
        let bytes = encode_checkpoint(&m, 0).unwrap();
        let hlen = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[8..8 + hlen]).unwrap();
        let last = header.tensors.last().unwrap();
        assert_eq!(last.offset + 8 * last.len, header.payload_bytes);
        assert_eq!(bytes.len(), 8 + hlen + header.payload_bytes);
        // first encoder weight, first element
        let first = f64::from_le_bytes(bytes[8 + hlen..16 + hlen].try_into().unwrap());
        assert_eq!(first, m.encoder.layers[0].forward.w_r.get(0, 0));
    }

    #[test]
    fn truncated_files_are_rejected() {
        let dims = ModelDims::new(3, 2, 1, DecoderStrategy::FixedWeights);
        let m = RecurrentModel::<f64>::init(dims, 0).unwrap();
        let bytes = encode_checkpoint(&m, 0).unwrap();
        assert!(decode_checkpoint::<f64>(&bytes[..bytes.len() - 8]).is_err());
        assert!(decode_checkpoint::<f64>(&bytes[..4]).is_err());
    }
}
