use crate::model::ParameterSet;

/// Adaptive moment estimation over the parameters flagged trainable.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(params: &ParameterSet, lr: f64) -> Self {
        let zeros: Vec<Vec<f32>> = params.iter().map(|(_, p)| vec![0.0; p.values.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update; entries with `trainable[i] == false` are not touched.
    pub fn step(&mut self, params: &mut ParameterSet, grad: &ParameterSet, trainable: &[bool], grad_scale: f64) {
        self.step += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        let step_size = self.lr * bc2.sqrt() / bc1;
        for (i, &on) in trainable.iter().enumerate() {
            if !on {
                continue;
            }
            let p = &mut params.at_mut(i).values;
            let g = &grad.at(i).values;
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                let gj = g[j] as f64 * grad_scale;
                let mj = b1 * m[j] as f64 + (1.0 - b1) * gj;
                let vj = b2 * v[j] as f64 + (1.0 - b2) * gj * gj;
                m[j] = mj as f32;
                v[j] = vj as f32;
                p[j] = (p[j] as f64 - step_size * mj / (vj.sqrt() + self.eps)) as f32;
            }
        }
    }
}

/// Global L2 norm over the trainable gradient entries.
pub fn grad_norm(grad: &ParameterSet, trainable: &[bool]) -> f64 {
    let mut sq = 0.0f64;
    for (i, &on) in trainable.iter().enumerate() {
        if on {
            sq += grad.at(i).values.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>();
        }
    }
    sq.sqrt()
}
