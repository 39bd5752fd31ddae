//! Dataset directories: `manifest.json`, `patch_<id>.bin` (f32 LE `[T, C, H, W]`)
//! and `label_<id>.bin` (u8 `[H, W]`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sample::{Dims, FeatureStats, PatchDataset, PatchSample, SampleMeta, SplitTag};

pub const DATASET_FORMAT: &str = "sarcrop-dataset/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchIndexEntry {
    #[serde(flatten)]
    pub meta: SampleMeta,
    pub x_file: String,
    pub y_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub feature_names: Vec<String>,
    pub region: String,
    pub year: u32,
    pub crop: String,
    pub norm_stats: Vec<FeatureStats>,
    pub normalized: bool,
    pub split_tag: SplitTag,
    pub patches: Vec<PatchIndexEntry>,
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(Error::Data(format!("patch id `{id}` is not a safe file stem")));
    }
    Ok(())
}

pub fn save_dataset(dataset: &PatchDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    dataset.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut patches = Vec::with_capacity(dataset.len());
    for s in &dataset.samples {
        let id = &s.meta.patch_id;
        check_id(id)?;
        let x_file = format!("patch_{id}.bin");
        let y_file = format!("label_{id}.bin");
        let mut bytes = Vec::with_capacity(s.x.len() * 4);
        for v in &s.x {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let xp = dir.join(&x_file);
        fs::write(&xp, bytes).map_err(|e| Error::io(&xp, e))?;
        let yp = dir.join(&y_file);
        fs::write(&yp, &s.y).map_err(|e| Error::io(&yp, e))?;
        patches.push(PatchIndexEntry {
            meta: s.meta.clone(),
            x_file,
            y_file,
        });
    }
    let m = DatasetManifest {
        format: DATASET_FORMAT.into(),
        t: dataset.dims.t,
        c: dataset.dims.c,
        h: dataset.dims.h,
        w: dataset.dims.w,
        feature_names: dataset.feature_names.clone(),
        region: dataset.region.clone(),
        year: dataset.year,
        crop: dataset.crop.clone(),
        norm_stats: dataset.norm_stats.clone(),
        normalized: dataset.normalized,
        split_tag: dataset.split_tag,
        patches,
    };
    let mp = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    fs::write(&mp, text).map_err(|e| Error::io(&mp, e))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<PatchDataset> {
    let dir = dir.as_ref();
    let mp = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let m: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::integrity(MANIFEST_FILE, format!("unparseable manifest: {e}")))?;
    if m.format != DATASET_FORMAT {
        return Err(Error::integrity(MANIFEST_FILE, format!("unknown format `{}`", m.format)));
    }
    let dims = Dims {
        t: m.t,
        c: m.c,
        h: m.h,
        w: m.w,
    };
    if m.feature_names.len() != dims.c || m.norm_stats.len() != dims.c {
        return Err(Error::integrity(MANIFEST_FILE, "feature list or norm_stats disagree with C"));
    }
    let mut samples = Vec::with_capacity(m.patches.len());
    for entry in &m.patches {
        let id = &entry.meta.patch_id;
        check_id(id).map_err(|e| Error::integrity(id, e.to_string()))?;
        let xp = dir.join(&entry.x_file);
        let raw = fs::read(&xp).map_err(|e| Error::io(&xp, e))?;
        if raw.len() != dims.x_len() * 4 {
            return Err(Error::integrity(
                format!("patch {id}"),
                format!(
                    "{} has {} bytes, manifest [T={}, C={}, H={}, W={}] implies {}",
                    entry.x_file,
                    raw.len(),
                    dims.t,
                    dims.c,
                    dims.h,
                    dims.w,
                    dims.x_len() * 4
                ),
            ));
        }
        let x: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::integrity(format!("patch {id}"), "non-finite values"));
        }
        let yp = dir.join(&entry.y_file);
        let y = fs::read(&yp).map_err(|e| Error::io(&yp, e))?;
        if y.len() != dims.hw() {
            return Err(Error::integrity(
                format!("patch {id}"),
                format!("{} has {} bytes, expected {}", entry.y_file, y.len(), dims.hw()),
            ));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::integrity(format!("patch {id}"), "label values outside {0, 1}"));
        }
        samples.push(PatchSample {
            x,
            y,
            meta: entry.meta.clone(),
        });
    }
    let ds = PatchDataset {
        dims,
        feature_names: m.feature_names,
        region: m.region,
        year: m.year,
        crop: m.crop,
        samples,
        norm_stats: m.norm_stats,
        normalized: m.normalized,
        split_tag: m.split_tag,
    };
    ds.validate()
        .map_err(|e| Error::integrity(MANIFEST_FILE, e.to_string()))?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic_dataset, SynthSpec};

    fn tiny() -> PatchDataset {
        let spec = SynthSpec {
            n_patches: 3,
            patch_size: 16,
            field_size: (4, 8),
            ..SynthSpec::source_rice()
        };
        generate_synthetic_dataset(&spec, 0).unwrap()
    }

    #[test]
    fn round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let d = tiny();
        save_dataset(&d, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, d);
        for (a, b) in back.samples.iter().zip(&d.samples) {
            assert!(a.x.iter().zip(&b.x).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn short_label_file_names_patch() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        fs::write(dir.path().join("label_00001.bin"), [0u8; 10]).unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Integrity { entry, .. }) => assert_eq!(entry, "patch 00001"),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_t_mismatch_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        let mp = dir.path().join(MANIFEST_FILE);
        let mut m: DatasetManifest = serde_json::from_str(&fs::read_to_string(&mp).unwrap()).unwrap();
        m.t = 6;
        fs::write(&mp, serde_json::to_string(&m).unwrap()).unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Integrity { entry, .. }) => assert_eq!(entry, "patch 00000"),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_uses_upper_case_dims() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(v["T"], 8);
        assert_eq!(v["patches"][0]["patch_id"], "00000");
    }
}
