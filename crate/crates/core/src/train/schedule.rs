use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One optimizer step's worth of samples and the number of time steps they expose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledBatch {
    pub indices: Vec<usize>,
    pub t_avail: usize,
}

fn phase_rng(seed: u64, phase: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(phase as u64);
    rng
}

fn shuffled_batches(n: usize, batch_size: usize, t_avail: usize, rng: &mut ChaCha8Rng, out: &mut Vec<ScheduledBatch>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    for chunk in idx.chunks(batch_size.max(1)) {
        out.push(ScheduledBatch {
            indices: chunk.to_vec(),
            t_avail,
        });
    }
}

/// One epoch of chronologically ordered batches: every sample once with only
/// step 1 visible, then once with steps 1..=2, ..., finally the full season.
pub fn make_curriculum_schedule(n_samples: usize, batch_size: usize, t: usize, seed: u64) -> Vec<ScheduledBatch> {
    let phases: Vec<usize> = (1..=t).collect();
    schedule_with_phases(n_samples, batch_size, &phases, seed)
}

/// Curriculum over an explicit set of visible-step counts, sorted ascending.
pub fn schedule_with_phases(n_samples: usize, batch_size: usize, phases: &[usize], seed: u64) -> Vec<ScheduledBatch> {
    let mut phases = phases.to_vec();
    phases.sort_unstable();
    phases.dedup();
    let mut out = Vec::new();
    for (p, &t_avail) in phases.iter().enumerate() {
        let mut rng = phase_rng(seed, p);
        shuffled_batches(n_samples, batch_size, t_avail, &mut rng, &mut out);
    }
    out
}

/// Ablation schedule: the same number of passes, all with the full season and
/// freshly shuffled.
pub fn shuffled_schedule(n_samples: usize, batch_size: usize, t: usize, passes: usize, seed: u64) -> Vec<ScheduledBatch> {
    let mut out = Vec::new();
    for p in 0..passes.max(1) {
        let mut rng = phase_rng(seed, p);
        shuffled_batches(n_samples, batch_size, t, &mut rng, &mut out);
    }
    out
}
