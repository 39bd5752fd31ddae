use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kernels::Real;

/// Which half of the network a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Encoder,
    Decoder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<R = f32> {
    pub group: Group,
    /// Position of the owning layer within its group, in forward order.
    pub layer: usize,
    pub shape: Vec<usize>,
    pub values: Vec<R>,
}

impl<R: Real> Param<R> {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Ordered parameter tensors of the network, keyed by path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params<R = f32> {
    entries: IndexMap<String, Param<R>>,
}

pub type ParameterSet = Params<f32>;

/// Path of the first encoder convolution kernel (the one widened by channel expansion).
pub const FIRST_LAYER_WEIGHT: &str = "encoder.0.conv1.weight";
pub const FIRST_LAYER_BIAS: &str = "encoder.0.conv1.bias";

impl<R: Real> Params<R> {
    pub fn new() -> Self {
        Self {
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, path: impl Into<String>, param: Param<R>) {
        self.entries.insert(path.into(), param);
    }

    pub fn get(&self, path: &str) -> Option<&Param<R>> {
        self.entries.get(path)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Param<R>> {
        self.entries.get_mut(path)
    }

    pub fn index_of(&self, path: &str) -> Option<usize> {
        self.entries.get_index_of(path)
    }

    pub fn at(&self, index: usize) -> &Param<R> {
        &self.entries[index]
    }

    pub fn at_mut(&mut self, index: usize) -> &mut Param<R> {
        &mut self.entries[index]
    }

    /// Mutable access to two distinct entries.
    pub fn pair_mut(&mut self, a: usize, b: usize) -> [&mut Param<R>; 2] {
        self.entries
            .get_disjoint_indices_mut([a, b])
            .expect("distinct in-range parameter indices")
            .map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<R>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<R>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn numel(&self) -> usize {
        self.entries.values().map(|p| p.values.len()).sum()
    }

    /// Same layout with every value set to zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        Param {
                            group: p.group,
                            layer: p.layer,
                            shape: p.shape.clone(),
                            values: vec![R::zero(); p.values.len()],
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn cast<S: Real>(&self) -> Params<S> {
        Params {
            entries: self
                .entries
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        Param {
                            group: p.group,
                            layer: p.layer,
                            shape: p.shape.clone(),
                            values: p.values.iter().map(|&v| S::c(v.to_f64().unwrap())).collect(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Element-wise `self += other * scale` over matching layouts.
    pub fn axpy(&mut self, scale: R, other: &Self) {
        for (a, b) in self.entries.values_mut().zip(other.entries.values()) {
            for (x, &y) in a.values.iter_mut().zip(&b.values) {
                *x = *x + scale * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .values()
            .all(|p| p.values.iter().all(|v| v.is_finite()))
    }
}

impl ParameterSet {
    /// SHA-256 over paths, shapes and little-endian value bytes.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (path, p) in &self.entries {
            h.update(path.as_bytes());
            for &d in &p.shape {
                h.update((d as u64).to_le_bytes());
            }
            for v in &p.values {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// True when every value is bit-identical to `other`'s.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|((ka, a), (kb, b))| {
                ka == kb
                    && a.shape == b.shape
                    && a.values.len() == b.values.len()
                    && a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}
