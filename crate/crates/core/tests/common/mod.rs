//! Helpers shared by integration test targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarcrop::model::{BatchTensor, ModelConfig, Params, RecurrentUNet};

pub fn grad_check_config() -> ModelConfig {
    ModelConfig {
        in_channels: 1,
        time_steps: 4,
        depth: 2,
        base_channels: 4,
        patch_size: 16,
        ..ModelConfig::desk_scale()
    }
}

pub struct GradCheck {
    pub checked: usize,
    pub worst_relative_error: f64,
}

/// Central differences (h = 1e-5, f64) against the analytic gradient on
/// `samples` random parameter entries. `dropout_seed` fixes the dropout masks.
pub fn gradient_check(samples: usize, dropout_seed: Option<u64>) -> GradCheck {
    let cfg = grad_check_config();
    let net = RecurrentUNet::new(cfg.clone()).unwrap();
    let mut params: Params<f64> = net.init(3).unwrap().cast();
    // move biases, carries and the zero-initialised head off their constants
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (path, p) in params.iter_mut() {
        let spread = if path.starts_with("decoder.head") { 0.5 } else { 0.05 };
        for v in &mut p.values {
            *v += rng.gen_range(-spread..spread);
        }
    }
    let (t, hw) = (cfg.time_steps, cfg.patch_size * cfg.patch_size);
    let x: Vec<f64> = (0..2 * t * hw).map(|_| rng.gen_range(0.0..1.0)).collect();
    let batch = BatchTensor::full(x, [2, t, 1, cfg.patch_size, cfg.patch_size]).unwrap();
    let labels: Vec<u8> = (0..2 * hw).map(|_| rng.gen_range(0..2)).collect();
    let pw = 1.5;
    let (_, grad) = net.loss_and_grad(&params, &batch, &labels, pw, dropout_seed).unwrap();

    let mut worst = 0.0f64;
    let total = params.len();
    for trial in 0..samples {
        let pi = rng.gen_range(0..total);
        let ei = rng.gen_range(0..params.at(pi).values.len());
        let g = grad.at(pi).values[ei];
        let h = 1e-5;
        let orig = params.at(pi).values[ei];
        params.at_mut(pi).values[ei] = orig + h;
        let (lp, _) = net.loss_and_grad(&params, &batch, &labels, pw, dropout_seed).unwrap();
        params.at_mut(pi).values[ei] = orig - h;
        let (lm, _) = net.loss_and_grad(&params, &batch, &labels, pw, dropout_seed).unwrap();
        params.at_mut(pi).values[ei] = orig;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
        if rel > 1e-3 {
            eprintln!("trial {trial} param {pi} elem {ei}: analytic {g:e} fd {fd:e} rel {rel:e}");
        }
        worst = worst.max(rel);
    }
    GradCheck {
        checked: samples,
        worst_relative_error: worst,
    }
}
