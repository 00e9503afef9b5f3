//! Flat weight archive: `manifest.json` lists `(name, shape, offset)` for
//! every tensor; `weights.bin` holds the values as little-endian `f32`.
//! Offsets are in bytes from the start of `weights.bin`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub dtype: String,
    pub byte_order: String,
    pub tensors: Vec<ManifestEntry>,
}

pub fn encode<T: Scalar>(store: &ParamStore<T>) -> (Manifest, Vec<u8>) {
    let mut bytes = Vec::with_capacity(store.numel() * 4);
    let mut tensors = Vec::with_capacity(store.len());
    for (_, name, t) in store.iter() {
        tensors.push(ManifestEntry { name: name.to_string(), shape: t.shape().to_vec(), offset: bytes.len() as u64 });
        for &x in t.data() {
            bytes.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
        }
    }
    (Manifest { dtype: "f32".into(), byte_order: "little".into(), tensors }, bytes)
}

pub fn decode<T: Scalar>(manifest: &Manifest, bytes: &[u8]) -> Result<ParamStore<T>> {
    if manifest.dtype != "f32" || manifest.byte_order != "little" {
        return Err(Error::Load {
            param: "<manifest>".into(),
            message: format!("unsupported encoding {} / {}", manifest.dtype, manifest.byte_order),
        });
    }
    let mut store = ParamStore::new();
    for e in &manifest.tensors {
        let n: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start + n * 4;
        let raw = bytes.get(start..end).ok_or_else(|| Error::Load {
            param: e.name.clone(),
            message: format!("byte range {start}..{end} outside weight file of {} bytes", bytes.len()),
        })?;
        let data = raw
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        store.insert(e.name.clone(), Tensor::from_vec(&e.shape, data))?;
    }
    Ok(store)
}

pub fn write<T: Scalar>(dir: impl AsRef<Path>, store: &ParamStore<T>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (manifest, bytes) = encode(store);
    let weights = dir.join(WEIGHTS_FILE);
    fs::write(&weights, bytes).map_err(|e| Error::io(weights, e))?;
    write_json(dir.join(MANIFEST_FILE), &manifest)
}

pub fn read<T: Scalar>(dir: impl AsRef<Path>) -> Result<ParamStore<T>> {
    let dir = dir.as_ref();
    let manifest: Manifest = read_json(dir.join(MANIFEST_FILE))?;
    let path = dir.join(WEIGHTS_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(path, e))?;
    decode(&manifest, &bytes)
}

pub fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<D> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
