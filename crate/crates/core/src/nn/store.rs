//! Named weight archives in the safetensors container (little-endian `f32`).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use safetensors::tensor::{Dtype, SafeTensors, TensorView};

use super::param::Param;
use crate::error::{Error, IoContext, Result};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Models expose their parameters under stable dotted names.
pub trait NamedParams {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param));

    fn param_count(&self) -> usize {
        let mut total = 0;
        self.visit_params(&mut |_, p| total += p.len());
        total
    }

    /// Copies parameter values (and optionally Adam moments) into `out` under `prefix`.
    fn export_params(
        &self,
        prefix: &str,
        with_moments: bool,
        out: &mut BTreeMap<String, StoredTensor>,
    ) {
        self.visit_params(&mut |name, p| {
            let key = format!("{prefix}{name}");
            out.insert(
                key.clone(),
                StoredTensor {
                    shape: p.shape().to_vec(),
                    data: p.value().to_vec(),
                },
            );
            let (m, v) = p.moments();
            if with_moments && !m.is_empty() {
                for (suffix, data) in [("adam_m", m), ("adam_v", v)] {
                    out.insert(
                        format!("{key}#{suffix}"),
                        StoredTensor {
                            shape: p.shape().to_vec(),
                            data: data.to_vec(),
                        },
                    );
                }
            }
        });
    }

    /// Restores every parameter from `tensors`; any missing or mis-shaped entry is an error.
    fn import_params(
        &mut self,
        prefix: &str,
        tensors: &BTreeMap<String, StoredTensor>,
    ) -> Result<()> {
        let mut failure = None;
        self.visit_params_mut(&mut |name, p| {
            if failure.is_some() {
                return;
            }
            let key = format!("{prefix}{name}");
            match tensors.get(&key) {
                Some(t) if t.shape == p.shape() => {
                    p.value_mut().copy_from_slice(&t.data);
                    let m = tensors.get(&format!("{key}#adam_m"));
                    let v = tensors.get(&format!("{key}#adam_v"));
                    if let (Some(m), Some(v)) = (m, v) {
                        p.set_moments(m.data.clone(), v.data.clone());
                    }
                }
                Some(t) => {
                    failure = Some(Error::Checkpoint(format!(
                        "tensor {key} has shape {:?}, model expects {:?}",
                        t.shape,
                        p.shape()
                    )))
                }
                None => failure = Some(Error::Checkpoint(format!("tensor {key} is missing"))),
            }
        });
        failure.map_or(Ok(()), Err)
    }
}

pub fn save_tensors(
    path: &Path,
    tensors: &BTreeMap<String, StoredTensor>,
    metadata: &BTreeMap<String, String>,
) -> Result<()> {
    let bytes: Vec<(String, Vec<u8>, Vec<usize>)> = tensors
        .iter()
        .map(|(name, t)| {
            let raw = t.data.iter().flat_map(|v| v.to_le_bytes()).collect();
            (name.clone(), raw, t.shape.clone())
        })
        .collect();
    let views = bytes
        .iter()
        .map(|(name, raw, shape)| {
            TensorView::new(Dtype::F32, shape.clone(), raw)
                .map(|v| (name.clone(), v))
                .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let info: HashMap<String, String> = metadata.clone().into_iter().collect();
    let encoded = safetensors::serialize(views, &Some(info))
        .map_err(|e| Error::Checkpoint(format!("serialising {}: {e}", path.display())))?;
    write_atomic(path, &encoded)
}

pub type LoadedTensors = (BTreeMap<String, StoredTensor>, BTreeMap<String, String>);

pub fn load_tensors(path: &Path) -> Result<LoadedTensors> {
    let bytes = std::fs::read(path).context(|| format!("reading {}", path.display()))?;
    let bad = |e: safetensors::SafeTensorError| {
        Error::Checkpoint(format!("{} is not a weights archive: {e}", path.display()))
    };
    let (_, meta) = SafeTensors::read_metadata(&bytes).map_err(bad)?;
    let metadata = meta
        .metadata()
        .clone()
        .unwrap_or_default()
        .into_iter()
        .collect();
    let archive = SafeTensors::deserialize(&bytes).map_err(bad)?;
    let mut tensors = BTreeMap::new();
    for (name, view) in archive.tensors() {
        if view.dtype() != Dtype::F32 {
            return Err(Error::Checkpoint(format!("tensor {name} is not f32")));
        }
        let data = view
            .data()
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.insert(
            name,
            StoredTensor {
                shape: view.shape().to_vec(),
                data,
            },
        );
    }
    Ok((tensors, metadata))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn archive_round_trip_keeps_values_and_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.weights");
        let mut tensors = BTreeMap::new();
        tensors.insert(
            "a.weight".to_string(),
            StoredTensor {
                shape: vec![2, 2],
                data: vec![1.0, -2.5, f32::MIN_POSITIVE, 3.0e7],
            },
        );
        let mut meta = BTreeMap::new();
        meta.insert("epoch".to_string(), "10".to_string());
        save_tensors(&path, &tensors, &meta).unwrap();
        let (t2, m2) = load_tensors(&path).unwrap();
        assert_eq!(t2, tensors);
        assert_eq!(m2, meta);
    }

    #[test]
    fn garbage_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.weights");
        std::fs::write(&path, b"not a weights file").unwrap();
        assert!(matches!(load_tensors(&path), Err(Error::Checkpoint(_))));
    }
}
