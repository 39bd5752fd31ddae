//! Synthetic SAR-phenology patches for desk-scale experiments.
//!
//! A patch is tiled into rectangular parcels by recursive guillotine cuts.
//! Each parcel interior is assigned a land-cover class; a one-pixel margin
//! around every parcel stays background. Pixel values follow the class's
//! per-feature temporal curve plus a per-parcel offset and per-pixel
//! Gaussian noise, clipped to `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sample::{Dims, FeatureStats, PatchDataset, PatchSample, SampleMeta, SplitTag};

/// Reference curves on eight 20-day steps, already on the normalized scale.
pub mod curves {
    /// Paddy rice VH: flooding dip at steps 1-2, canopy peak at steps 5-6.
    pub const RICE_VH: [f32; 8] = [0.30, 0.16, 0.22, 0.45, 0.70, 0.74, 0.58, 0.48];
    pub const RICE_VV: [f32; 8] = [0.42, 0.28, 0.34, 0.50, 0.64, 0.66, 0.58, 0.52];
    /// Late-transplanted rice: the dip arrives two steps later.
    pub const LATE_RICE_VH: [f32; 8] = [0.50, 0.46, 0.20, 0.14, 0.30, 0.52, 0.68, 0.70];
    pub const LATE_RICE_VV: [f32; 8] = [0.58, 0.55, 0.32, 0.26, 0.40, 0.56, 0.66, 0.68];
    pub const URBAN_VH: [f32; 8] = [0.62, 0.63, 0.62, 0.63, 0.62, 0.63, 0.62, 0.63];
    pub const URBAN_VV: [f32; 8] = [0.72, 0.72, 0.73, 0.72, 0.72, 0.73, 0.72, 0.72];
    pub const GRASS_VH: [f32; 8] = [0.44, 0.46, 0.49, 0.52, 0.52, 0.50, 0.48, 0.46];
    pub const GRASS_VV: [f32; 8] = [0.54, 0.55, 0.57, 0.58, 0.58, 0.57, 0.56, 0.55];
    pub const MAIZE_VH: [f32; 8] = [0.38, 0.38, 0.40, 0.46, 0.56, 0.64, 0.66, 0.58];
    pub const MAIZE_VV: [f32; 8] = [0.50, 0.49, 0.50, 0.54, 0.60, 0.64, 0.66, 0.62];
    pub const BARLEY_VH: [f32; 8] = [0.36, 0.42, 0.50, 0.56, 0.52, 0.44, 0.40, 0.40];
    pub const BARLEY_VV: [f32; 8] = [0.46, 0.52, 0.60, 0.64, 0.58, 0.50, 0.46, 0.46];
    /// Water-managed non-rice crop whose VH closely follows rice but whose VV stays high.
    pub const LOOKALIKE_VH: [f32; 8] = [0.31, 0.18, 0.23, 0.44, 0.68, 0.73, 0.58, 0.49];
    pub const LOOKALIKE_VV: [f32; 8] = [0.70, 0.66, 0.68, 0.74, 0.82, 0.84, 0.80, 0.76];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub name: String,
    /// One curve per feature, each of length `time_steps`.
    pub curves: Vec<Vec<f32>>,
    /// Relative frequency among classes of the same kind (target / non-target).
    pub weight: f64,
    /// Pixels of this class are labelled positive.
    pub target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_patches: usize,
    pub patch_size: usize,
    pub time_steps: usize,
    pub features: Vec<String>,
    /// Parcel side length range in pixels (before the margin).
    pub field_size: (usize, usize),
    pub classes: Vec<SynthClass>,
    /// Curves of margin / unassigned pixels.
    pub background: Vec<Vec<f32>>,
    /// Share of non-target parcels left as background.
    pub background_share: f64,
    pub noise_sigma: f32,
    /// Standard deviation of the per-parcel level offset.
    pub field_jitter: f32,
    /// Per-patch probability range of a parcel being a target class.
    pub target_fraction: (f64, f64),
    /// Adds a non-target class whose curve overlaps the first target class.
    pub confuser_class: bool,
    pub region: String,
    pub year: u32,
    pub crop: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::source_rice()
    }
}

fn resample(curve: &[f32], t: usize) -> Vec<f32> {
    if curve.len() == t {
        return curve.to_vec();
    }
    if t == 1 || curve.len() == 1 {
        let mean = curve.iter().sum::<f32>() / curve.len() as f32;
        return vec![mean; t];
    }
    (0..t)
        .map(|i| {
            let pos = i as f32 * (curve.len() - 1) as f32 / (t - 1) as f32;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(curve.len() - 1);
            let f = pos - lo as f32;
            curve[lo] * (1.0 - f) + curve[hi] * f
        })
        .collect()
}

fn class(name: &str, curves: &[&[f32]], weight: f64, target: bool) -> SynthClass {
    SynthClass {
        name: name.into(),
        curves: curves.iter().map(|c| c.to_vec()).collect(),
        weight,
        target,
    }
}

impl SynthSpec {
    /// Abundant-label source region: rice among grassland, maize and built-up land.
    pub fn source_rice() -> Self {
        use curves::*;
        Self {
            n_patches: 200,
            patch_size: 64,
            time_steps: 8,
            features: vec!["VH".into(), "VV".into()],
            field_size: (8, 24),
            classes: vec![
                class("rice", &[&RICE_VH, &RICE_VV], 1.0, true),
                class("grass", &[&GRASS_VH, &GRASS_VV], 1.0, false),
                class("maize", &[&MAIZE_VH, &MAIZE_VV], 1.0, false),
                class("urban", &[&URBAN_VH, &URBAN_VV], 0.5, false),
            ],
            background: vec![GRASS_VH.to_vec(), GRASS_VV.to_vec()],
            background_share: 0.2,
            noise_sigma: 0.10,
            field_jitter: 0.04,
            target_fraction: (0.2, 0.45),
            confuser_class: false,
            region: "source".into(),
            year: 2018,
            crop: "rice".into(),
        }
    }

    /// Label-scarce target region whose curves are shifted and rescaled relative to the source.
    pub fn target_shifted_rice() -> Self {
        let mut spec = Self::source_rice();
        for c in &mut spec.classes {
            for curve in &mut c.curves {
                for v in curve.iter_mut() {
                    *v = (0.85 * *v + 0.09).clamp(0.0, 1.0);
                }
            }
        }
        for curve in &mut spec.background {
            for v in curve.iter_mut() {
                *v = 0.85 * *v + 0.09;
            }
        }
        spec.n_patches = 20;
        spec.region = "target".into();
        spec.year = 2021;
        spec
    }

    /// The target region's conditions plus a second, late rice variant that is also labelled.
    pub fn two_variant_rice() -> Self {
        use curves::*;
        let mut spec = Self::target_shifted_rice();
        let mut late = class("late_rice", &[&LATE_RICE_VH, &LATE_RICE_VV], 1.0, true);
        for curve in &mut late.curves {
            for v in curve.iter_mut() {
                *v = (0.85 * *v + 0.09).clamp(0.0, 1.0);
            }
        }
        spec.classes.insert(1, late);
        spec.region = "target_two_variant".into();
        spec
    }

    /// Rice next to a look-alike crop that only the second feature separates.
    pub fn vv_discriminative() -> Self {
        use curves::*;
        let mut spec = Self::source_rice();
        spec.classes = vec![
            class("rice", &[&RICE_VH, &RICE_VV], 1.0, true),
            class("lookalike", &[&LOOKALIKE_VH, &LOOKALIKE_VV], 2.0, false),
            class("grass", &[&GRASS_VH, &GRASS_VV], 0.5, false),
            class("maize", &[&MAIZE_VH, &MAIZE_VV], 0.5, false),
        ];
        spec.n_patches = 20;
        spec.region = "target_vv".into();
        spec.year = 2020;
        spec
    }

    /// Barley-like hard case: a weak signature among look-alike summer crops.
    pub fn barley_like() -> Self {
        use curves::*;
        let mut spec = Self::source_rice();
        spec.classes = vec![
            class("barley", &[&BARLEY_VH, &BARLEY_VV], 1.0, true),
            class("maize", &[&MAIZE_VH, &MAIZE_VV], 1.0, false),
            class("grass", &[&GRASS_VH, &GRASS_VV], 1.0, false),
        ];
        spec.confuser_class = true;
        spec.target_fraction = (0.05, 0.15);
        spec.region = "barley".into();
        spec.crop = "summer_barley".into();
        spec
    }

    /// Keeps only the named features (in order) of every curve.
    pub fn with_features(mut self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.features
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Argument(format!("spec has no feature `{n}`")))
            })
            .collect::<Result<_>>()?;
        for c in &mut self.classes {
            c.curves = idx.iter().map(|&i| c.curves[i].clone()).collect();
        }
        self.background = idx.iter().map(|&i| self.background[i].clone()).collect();
        self.features = names.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.features.len();
        if self.n_patches == 0 || self.patch_size == 0 || self.time_steps == 0 || c == 0 {
            return Err(Error::Argument("synthetic spec needs patches, pixels, steps and features".into()));
        }
        let (lo, hi) = self.field_size;
        if lo < 3 || lo > hi {
            return Err(Error::Argument(format!("field size range {lo}..{hi} invalid (min 3)")));
        }
        if lo > self.patch_size {
            return Err(Error::Argument(format!(
                "fields of at least {lo} px do not fit a {} px patch",
                self.patch_size
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.field_jitter >= 0.0) {
            return Err(Error::Argument("noise parameters must be >= 0".into()));
        }
        let (flo, fhi) = self.target_fraction;
        if !(0.0..=1.0).contains(&flo) || !(0.0..=1.0).contains(&fhi) || flo > fhi {
            return Err(Error::Argument("target_fraction must be a sub-range of [0, 1]".into()));
        }
        if !self.classes.iter().any(|k| k.target) {
            return Err(Error::Argument("no target class".into()));
        }
        let curves = self.classes.iter().flat_map(|k| &k.curves).chain(&self.background);
        for (i, k) in self.classes.iter().enumerate() {
            if k.curves.len() != c || k.weight < 0.0 {
                return Err(Error::Argument(format!("class {i} (`{}`) malformed", k.name)));
            }
        }
        if self.background.len() != c {
            return Err(Error::Argument("background needs one curve per feature".into()));
        }
        for curve in curves {
            if curve.is_empty() || curve.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Argument("curve values must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    fn resolved_classes(&self) -> Vec<SynthClass> {
        let t = self.time_steps;
        let mut out: Vec<SynthClass> = self
            .classes
            .iter()
            .map(|k| SynthClass {
                curves: k.curves.iter().map(|c| resample(c, t)).collect(),
                ..k.clone()
            })
            .collect();
        if self.confuser_class {
            let base = out.iter().find(|k| k.target).expect("validated").clone();
            // Target curve lagged by one step and blended back onto itself.
            let curves = base
                .curves
                .iter()
                .map(|c| {
                    (0..t)
                        .map(|i| 0.6 * c[i] + 0.4 * c[i.saturating_sub(1)] + 0.03)
                        .map(|v| v.clamp(0.0, 1.0))
                        .collect()
                })
                .collect();
            out.push(SynthClass {
                name: format!("{}_confuser", base.name),
                curves,
                weight: 1.0,
                target: false,
            });
        }
        out
    }
}

/// Axis-aligned parcel interior `[x0, x1) x [y0, y1)` and its class index
/// (`None` for background parcels).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub class: Option<usize>,
}

/// One generated patch with its parcel layout.
#[derive(Debug, Clone)]
pub struct SynthPatch {
    pub sample: PatchSample,
    pub fields: Vec<FieldRect>,
    /// Class index per pixel (`None` = background).
    pub class_map: Vec<Option<usize>>,
}

fn partition(rng: &mut ChaCha8Rng, rect: (usize, usize, usize, usize), size: (usize, usize), out: &mut Vec<(usize, usize, usize, usize)>) {
    let (x0, y0, x1, y1) = rect;
    let (w, h) = (x1 - x0, y1 - y0);
    let (lo, hi) = size;
    let can_x = w >= 2 * lo;
    let can_y = h >= 2 * lo;
    let must = w > hi || h > hi;
    let want = must || ((can_x || can_y) && rng.gen_bool(0.35));
    if !want || !(can_x || can_y) {
        out.push(rect);
        return;
    }
    let split_x = if can_x && can_y { w >= h } else { can_x };
    if split_x {
        let cut = x0 + rng.gen_range(lo..=w - lo);
        partition(rng, (x0, y0, cut, y1), size, out);
        partition(rng, (cut, y0, x1, y1), size, out);
    } else {
        let cut = y0 + rng.gen_range(lo..=h - lo);
        partition(rng, (x0, y0, x1, cut), size, out);
        partition(rng, (x0, cut, x1, y1), size, out);
    }
}

fn pick_weighted(rng: &mut ChaCha8Rng, items: &[(usize, f64)]) -> Option<usize> {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return None;
    }
    let mut r = rng.gen_range(0.0..total);
    for &(i, w) in items {
        if r < w {
            return Some(i);
        }
        r -= w;
    }
    items.last().map(|&(i, _)| i)
}

/// Generates patch `index` of `spec` with its own RNG stream.
pub fn generate_patch(spec: &SynthSpec, classes: &[SynthClass], seed: u64, index: usize) -> SynthPatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let s = spec.patch_size;
    let t = spec.time_steps;
    let c = spec.features.len();
    let hw = s * s;

    let mut cells = Vec::new();
    partition(&mut rng, (0, 0, s, s), spec.field_size, &mut cells);

    let targets: Vec<(usize, f64)> = classes
        .iter()
        .enumerate()
        .filter(|(_, k)| k.target)
        .map(|(i, k)| (i, k.weight))
        .collect();
    let others: Vec<(usize, f64)> = classes
        .iter()
        .enumerate()
        .filter(|(_, k)| !k.target)
        .map(|(i, k)| (i, k.weight))
        .collect();
    let (flo, fhi) = spec.target_fraction;
    let frac = if fhi > flo { rng.gen_range(flo..=fhi) } else { flo };

    let mut class_map = vec![None; hw];
    let mut offsets = vec![vec![0.0f32; c]; hw];
    let mut fields = Vec::with_capacity(cells.len());
    let jitter = Normal::new(0.0f32, spec.field_jitter.max(1e-12)).expect("finite sigma");
    for (x0, y0, x1, y1) in cells {
        let class = if rng.gen_bool(frac) {
            pick_weighted(&mut rng, &targets)
        } else if rng.gen_bool(spec.background_share.clamp(0.0, 1.0)) {
            None
        } else {
            pick_weighted(&mut rng, &others)
        };
        let offset: Vec<f32> = (0..c)
            .map(|_| if spec.field_jitter > 0.0 { jitter.sample(&mut rng) } else { 0.0 })
            .collect();
        // One-pixel margin on the right/bottom edges separates adjacent parcels.
        let (ix1, iy1) = ((x1 - 1).max(x0 + 1), (y1 - 1).max(y0 + 1));
        for y in y0..iy1 {
            for x in x0..ix1 {
                class_map[y * s + x] = class;
                offsets[y * s + x].clone_from(&offset);
            }
        }
        fields.push(FieldRect {
            x0,
            y0,
            x1: ix1,
            y1: iy1,
            class,
        });
    }

    let background: Vec<Vec<f32>> = spec.background.iter().map(|b| resample(b, t)).collect();
    let noise = Normal::new(0.0f32, spec.noise_sigma.max(1e-12)).expect("finite sigma");
    let mut x = vec![0.0f32; t * c * hw];
    for ti in 0..t {
        for ci in 0..c {
            let plane = &mut x[(ti * c + ci) * hw..(ti * c + ci + 1) * hw];
            for (px, v) in plane.iter_mut().enumerate() {
                let base = match class_map[px] {
                    Some(k) => classes[k].curves[ci][ti] + offsets[px][ci],
                    None => background[ci][ti],
                };
                let n = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                *v = (base + n).clamp(0.0, 1.0);
            }
        }
    }
    let y = class_map
        .iter()
        .map(|k| u8::from(k.is_some_and(|k| classes[k].target)))
        .collect();
    SynthPatch {
        sample: PatchSample {
            x,
            y,
            meta: SampleMeta {
                patch_id: format!("{index:05}"),
                region: spec.region.clone(),
                year: spec.year,
                crop: spec.crop.clone(),
                filled_windows: Vec::new(),
            },
        },
        fields,
        class_map,
    }
}

/// Generates a normalized-scale dataset; stats are the identity range `[0, 1]`.
pub fn generate_synthetic_dataset(spec: &SynthSpec, seed: u64) -> Result<PatchDataset> {
    spec.validate()?;
    let classes = spec.resolved_classes();
    let samples = (0..spec.n_patches)
        .map(|i| generate_patch(spec, &classes, seed, i).sample)
        .collect();
    let c = spec.features.len();
    Ok(PatchDataset {
        dims: Dims {
            t: spec.time_steps,
            c,
            h: spec.patch_size,
            w: spec.patch_size,
        },
        feature_names: spec.features.clone(),
        region: spec.region.clone(),
        year: spec.year,
        crop: spec.crop.clone(),
        samples,
        norm_stats: vec![FeatureStats { min: 0.0, max: 1.0 }; c],
        normalized: true,
        split_tag: SplitTag::Unsplit,
    })
}

/// Every patch with its parcel layout, for diagnostics that need class identity.
pub fn generate_synthetic_patches(spec: &SynthSpec, seed: u64) -> Result<Vec<SynthPatch>> {
    spec.validate()?;
    let classes = spec.resolved_classes();
    Ok((0..spec.n_patches)
        .map(|i| generate_patch(spec, &classes, seed, i))
        .collect())
}

/// Class table after resampling and confuser insertion (indices match [`SynthPatch::class_map`]).
pub fn resolved_classes(spec: &SynthSpec) -> Vec<SynthClass> {
    spec.resolved_classes()
}
