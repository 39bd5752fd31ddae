use crate::error::{Error, Result};

use super::kernels::Real;

/// Model input `[batch, T, C, H, W]`; steps at or after `valid_steps[b]` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTensor<R = f32> {
    values: Vec<R>,
    shape: [usize; 5],
    valid_steps: Vec<usize>,
}

impl<R: Real> BatchTensor<R> {
    /// Wraps `values` and zeroes every time step past each sample's `valid_steps`.
    pub fn new(mut values: Vec<R>, shape: [usize; 5], valid_steps: Vec<usize>) -> Result<Self> {
        let [b, t, c, h, w] = shape;
        if values.len() != b * t * c * h * w {
            return Err(Error::Dimension(format!(
                "batch buffer holds {} values, shape {:?} needs {}",
                values.len(),
                shape,
                b * t * c * h * w
            )));
        }
        if valid_steps.len() != b {
            return Err(Error::Dimension(format!(
                "{} valid_steps entries for batch of {}",
                valid_steps.len(),
                b
            )));
        }
        if let Some(&bad) = valid_steps.iter().find(|&&v| v > t) {
            return Err(Error::Argument(format!("valid_steps {bad} exceeds T = {t}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("batch contains non-finite values".into()));
        }
        let step = c * h * w;
        for (i, &valid) in valid_steps.iter().enumerate() {
            values[(i * t + valid) * step..(i + 1) * t * step].fill(R::zero());
        }
        Ok(Self {
            values,
            shape,
            valid_steps,
        })
    }

    /// Full-season batch (every step valid).
    pub fn full(values: Vec<R>, shape: [usize; 5]) -> Result<Self> {
        let steps = vec![shape[1]; shape[0]];
        Self::new(values, shape, steps)
    }

    pub fn shape(&self) -> [usize; 5] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn valid_steps(&self) -> &[usize] {
        &self.valid_steps
    }

    /// `[T, C, H, W]` slice of sample `i`.
    pub fn sample(&self, i: usize) -> &[R] {
        let n: usize = self.shape[1..].iter().product();
        &self.values[i * n..(i + 1) * n]
    }

    /// Copy with every step past `t_avail` zeroed.
    pub fn truncated(&self, t_avail: usize) -> Result<Self> {
        let t = self.shape[1];
        if t_avail == 0 || t_avail > t {
            return Err(Error::Argument(format!("t_avail {t_avail} outside 1..={t}")));
        }
        let steps = self.valid_steps.iter().map(|&v| v.min(t_avail)).collect();
        Self::new(self.values.clone(), self.shape, steps)
    }
}

/// Per-pixel probabilities `[batch, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap<R = f32> {
    pub shape: [usize; 3],
    pub values: Vec<R>,
}

impl<R: Real> ProbMap<R> {
    pub fn sample(&self, i: usize) -> &[R] {
        let n = self.shape[1] * self.shape[2];
        &self.values[i * n..(i + 1) * n]
    }
}
