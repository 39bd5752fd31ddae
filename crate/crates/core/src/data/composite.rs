use crate::error::{Error, Result};

/// Length of one compositing window in days.
pub const WINDOW_DAYS: f64 = 20.0;

/// One acquisition: day of year (or any day count) and a `[C, H, W]` raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub day: f64,
    pub raster: Vec<f32>,
}

/// `[T, C, H, W]` window means plus the windows that had no scene and were filled.
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub values: Vec<f32>,
    pub filled_windows: Vec<usize>,
}

/// Averages scenes into `t` consecutive 20-day windows starting at `season_start`.
///
/// Window `k` covers `[start + 20k, start + 20(k + 1))`. An empty window takes
/// the mean of the nearest non-empty windows before and after it (or the one
/// that exists, at the season edges).
pub fn composite_20day(scenes: &[Scene], raster_len: usize, season_start: f64, t: usize) -> Result<Composite> {
    if scenes.is_empty() {
        return Err(Error::Argument("no scenes to composite".into()));
    }
    if t == 0 {
        return Err(Error::Argument("season must have at least one window".into()));
    }
    let end = season_start + WINDOW_DAYS * t as f64;
    let mut sums = vec![0.0f64; t * raster_len];
    let mut counts = vec![0usize; t];
    for s in scenes {
        if s.raster.len() != raster_len {
            return Err(Error::Dimension(format!(
                "scene at day {} has {} values, expected {raster_len}",
                s.day,
                s.raster.len()
            )));
        }
        if !(season_start..end).contains(&s.day) {
            return Err(Error::Argument(format!(
                "scene day {} outside season [{season_start}, {end})",
                s.day
            )));
        }
        let k = (((s.day - season_start) / WINDOW_DAYS).floor() as usize).min(t - 1);
        counts[k] += 1;
        for (acc, &v) in sums[k * raster_len..(k + 1) * raster_len].iter_mut().zip(&s.raster) {
            *acc += v as f64;
        }
    }
    let mut values = vec![0.0f32; t * raster_len];
    for k in 0..t {
        if counts[k] > 0 {
            let n = counts[k] as f64;
            for (o, &s) in values[k * raster_len..(k + 1) * raster_len]
                .iter_mut()
                .zip(&sums[k * raster_len..(k + 1) * raster_len])
            {
                *o = (s / n) as f32;
            }
        }
    }
    let mut filled = Vec::new();
    for k in 0..t {
        if counts[k] > 0 {
            continue;
        }
        let before = (0..k).rev().find(|&j| counts[j] > 0);
        let after = (k + 1..t).find(|&j| counts[j] > 0);
        let (a, b) = match (before, after) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, a),
            (None, Some(b)) => (b, b),
            (None, None) => unreachable!("at least one scene"),
        };
        for i in 0..raster_len {
            let v = 0.5 * (values[a * raster_len + i] as f64 + values[b * raster_len + i] as f64);
            values[k * raster_len + i] = v as f32;
        }
        filled.push(k);
    }
    Ok(Composite {
        values,
        filled_windows: filled,
    })
}
