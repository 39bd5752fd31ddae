//! Checkpoint directories: `manifest.json` plus `params.bin`.
//!
//! `params.bin` is the concatenation of every parameter tensor as row-major
//! little-endian `f32`, in manifest order; each manifest entry records its
//! shape, dtype, byte offset, group and layer.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Group, ModelConfig, Param, ParameterSet, RecurrentUNet};

pub const CHECKPOINT_FORMAT: &str = "sarcrop-checkpoint/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";

/// The unit of transfer: a model config, its parameters and the input features they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointBundle {
    pub config: ModelConfig,
    pub params: ParameterSet,
    pub feature_names: Vec<String>,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamIndexEntry {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub byte_offset: u64,
    pub group: Group,
    pub layer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub config: ModelConfig,
    pub feature_names: Vec<String>,
    pub provenance: String,
    pub parameters: IndexMap<String, ParamIndexEntry>,
}

impl CheckpointBundle {
    pub fn new(
        config: ModelConfig,
        params: ParameterSet,
        feature_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let bundle = Self {
            config,
            params,
            feature_names,
            provenance: provenance.into(),
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_names.len() != self.config.in_channels {
            return Err(Error::Config(format!(
                "{} feature names for {} input channels",
                self.feature_names.len(),
                self.config.in_channels
            )));
        }
        RecurrentUNet::new(self.config.clone())?.check_params(&self.params)
    }

    pub fn manifest(&self) -> CheckpointManifest {
        let mut offset = 0u64;
        let parameters = self
            .params
            .iter()
            .map(|(path, p)| {
                let entry = ParamIndexEntry {
                    shape: p.shape.clone(),
                    dtype: "f32".into(),
                    byte_offset: offset,
                    group: p.group,
                    layer: p.layer,
                };
                offset += 4 * p.values.len() as u64;
                (path.to_string(), entry)
            })
            .collect();
        CheckpointManifest {
            format: CHECKPOINT_FORMAT.into(),
            config: self.config.clone(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
            parameters,
        }
    }
}

pub fn save_checkpoint(bundle: &CheckpointBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = serde_json::to_string_pretty(&bundle.manifest()).expect("manifest serializes");
    let mut bin = Vec::with_capacity(bundle.params.numel() * 4);
    for (_, p) in bundle.params.iter() {
        for v in &p.values {
            bin.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;
    let bpath = dir.join(PARAMS_FILE);
    fs::write(&bpath, bin).map_err(|e| Error::io(&bpath, e))?;
    Ok(())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<CheckpointBundle> {
    let dir = dir.as_ref();
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)
        .map_err(|e| Error::integrity(MANIFEST_FILE, format!("unparseable manifest: {e}")))?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::integrity(
            MANIFEST_FILE,
            format!("unknown format `{}`", manifest.format),
        ));
    }
    let bpath = dir.join(PARAMS_FILE);
    let bin = fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;

    // Reference layout derived from the config.
    let net = RecurrentUNet::new(manifest.config.clone())
        .map_err(|e| Error::integrity(MANIFEST_FILE, e.to_string()))?;
    let reference = net.init(0)?;

    // Entries are read in byte order, so a manifest with re-sorted keys still loads.
    let mut entries: Vec<_> = manifest.parameters.iter().collect();
    entries.sort_by_key(|(_, e)| e.byte_offset);
    let mut loaded = IndexMap::new();
    let mut offset = 0u64;
    for (path, entry) in entries {
        if entry.dtype != "f32" {
            return Err(Error::integrity(path, format!("dtype `{}`, expected f32", entry.dtype)));
        }
        let expected = reference
            .get(path)
            .ok_or_else(|| Error::integrity(path, "not part of the configured architecture"))?;
        if entry.shape != expected.shape {
            return Err(Error::integrity(
                path,
                format!("shape {:?}, config implies {:?}", entry.shape, expected.shape),
            ));
        }
        if entry.group != expected.group || entry.layer != expected.layer {
            return Err(Error::integrity(path, "group/layer tag disagrees with config"));
        }
        if entry.byte_offset != offset {
            return Err(Error::integrity(
                path,
                format!("byte_offset {}, expected {}", entry.byte_offset, offset),
            ));
        }
        let n: usize = entry.shape.iter().product();
        let end = offset + 4 * n as u64;
        if end > bin.len() as u64 {
            return Err(Error::integrity(
                path,
                format!("needs bytes up to {end}, {PARAMS_FILE} has {}", bin.len()),
            ));
        }
        let values = bin[offset as usize..end as usize]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        loaded.insert(
            path.clone(),
            Param {
                group: entry.group,
                layer: entry.layer,
                shape: entry.shape.clone(),
                values,
            },
        );
        offset = end;
    }
    if offset != bin.len() as u64 {
        return Err(Error::integrity(
            PARAMS_FILE,
            format!("{} trailing bytes after last parameter", bin.len() as u64 - offset),
        ));
    }
    if let Some(missing) = reference.paths().find(|p| !loaded.contains_key(*p)) {
        return Err(Error::integrity(missing, "missing from manifest"));
    }
    let mut params = ParameterSet::new();
    for path in reference.paths() {
        params.insert(path, loaded.swap_remove(path).expect("checked above"));
    }
    let bundle = CheckpointBundle {
        config: manifest.config,
        params,
        feature_names: manifest.feature_names,
        provenance: manifest.provenance,
    };
    bundle
        .validate()
        .map_err(|e| Error::integrity(MANIFEST_FILE, e.to_string()))?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;

    fn bundle() -> CheckpointBundle {
        let cfg = ModelConfig {
            patch_size: 16,
            base_channels: 2,
            ..ModelConfig::desk_scale()
        };
        CheckpointBundle::new(cfg.clone(), build_model(&cfg, 5).unwrap(), vec!["VH".into()], "unit").unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle();
        save_checkpoint(&b, dir.path()).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert!(back.params.bitwise_eq(&b.params));
        assert_eq!(back, b);
    }

    #[test]
    fn truncated_params_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&bundle(), dir.path()).unwrap();
        let p = dir.path().join(PARAMS_FILE);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        match load_checkpoint(dir.path()) {
            Err(Error::Integrity { entry, .. }) => assert_eq!(entry, "decoder.head.weight"),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn reordered_manifest_keys_still_load() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle();
        save_checkpoint(&b, dir.path()).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let mut m: CheckpointManifest = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        m.parameters.reverse();
        fs::write(&p, serde_json::to_string(&m).unwrap()).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert!(back.params.bitwise_eq(&b.params));
        assert_eq!(back.params.paths().collect::<Vec<_>>(), b.params.paths().collect::<Vec<_>>());
    }

    #[test]
    fn edited_shape_names_the_parameter() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&bundle(), dir.path()).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let mut m: CheckpointManifest = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        m.parameters.get_mut("encoder.1.conv2.weight").unwrap().shape = vec![4, 4, 3, 1];
        fs::write(&p, serde_json::to_string(&m).unwrap()).unwrap();
        match load_checkpoint(dir.path()) {
            Err(Error::Integrity { entry, .. }) => assert_eq!(entry, "encoder.1.conv2.weight"),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_dtype_names_the_parameter() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&bundle(), dir.path()).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let mut m: CheckpointManifest = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        m.parameters.get_mut("encoder.0.carry").unwrap().dtype = "f64".into();
        fs::write(&p, serde_json::to_string(&m).unwrap()).unwrap();
        match load_checkpoint(dir.path()) {
            Err(Error::Integrity { entry, .. }) => assert_eq!(entry, "encoder.0.carry"),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_lists_offsets_in_order() {
        let m = bundle().manifest();
        let mut expected = 0;
        for e in m.parameters.values() {
            assert_eq!(e.byte_offset, expected);
            expected += 4 * e.shape.iter().product::<usize>() as u64;
        }
        let first = m.parameters.keys().next().unwrap();
        assert_eq!(first, crate::model::FIRST_LAYER_WEIGHT);
    }
}
