//! Parameter checkpoints: an 8-byte little-endian header length, a JSON
//! header listing each tensor's name, shape and byte offset, then the values
//! as little-endian `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::scalar::Real;

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dtype: String,
    tensors: Vec<Entry>,
}

pub fn encode<R: Real>(store: &ParamStore<R>) -> Vec<u8> {
    let mut offset = 0;
    let tensors = store
        .iter()
        .map(|(_, name, t)| {
            let e = Entry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset,
            };
            offset += t.numel() * 8;
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header {
        dtype: "f64le".into(),
        tensors,
    })
    .expect("header serializes");
    let mut out = Vec::with_capacity(8 + header.len() + offset);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, _, t) in store.iter() {
        for v in t.data() {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    out
}

pub fn decode<R: Real>(bytes: &[u8]) -> Result<ParamStore<R>> {
    let bad = |m: String| Error::Shape(format!("checkpoint: {m}"));
    let len_bytes: [u8; 8] = bytes
        .get(..8)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| bad("truncated header length".into()))?;
    let hlen = usize::try_from(u64::from_le_bytes(len_bytes))
        .map_err(|_| bad("header length overflow".into()))?;
    let hbytes = bytes
        .get(8..8 + hlen)
        .ok_or_else(|| bad("truncated header".into()))?;
    let header: Header = serde_json::from_slice(hbytes).map_err(|e| bad(e.to_string()))?;
    if header.dtype != "f64le" {
        return Err(bad(format!("unsupported dtype {}", header.dtype)));
    }
    let body = &bytes[8 + hlen..];
    let mut store = ParamStore::new();
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        let raw = body
            .get(e.offset..e.offset + n * 8)
            .ok_or_else(|| bad(format!("data for {} out of range", e.name)))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| R::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
            .collect();
        store.add(e.name, Tensor::new(e.shape, data)?)?;
    }
    Ok(store)
}

pub fn save<R: Real>(store: &ParamStore<R>, path: &Path) -> Result<()> {
    write_atomic(path, &encode(store))
}

pub fn load<R: Real>(path: &Path) -> Result<ParamStore<R>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::<f64>::new();
        store.add_uniform("a.weight", &[3, 5], 3, &mut rng).unwrap();
        store.add_zeros("a.bias", &[5]).unwrap();
        store.add_uniform("b", &[2, 2], 2, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.bin");
        save(&store, &path).unwrap();
        let back: ParamStore<f64> = load(&path).unwrap();
        let names: Vec<_> = back
            .iter()
            .map(|(_, n, t)| (n.to_string(), t.shape().to_vec()))
            .collect();
        let orig: Vec<_> = store
            .iter()
            .map(|(_, n, t)| (n.to_string(), t.shape().to_vec()))
            .collect();
        assert_eq!(names, orig);
        let (x, y) = (store.flat_values(), back.flat_values());
        assert!(x.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_input_is_rejected() {
        let mut store = ParamStore::<f64>::new();
        store.add_zeros("p", &[4]).unwrap();
        let bytes = encode(&store);
        assert!(decode::<f64>(&bytes[..bytes.len() - 3]).is_err());
        assert!(decode::<f64>(&bytes[..4]).is_err());
    }
}
