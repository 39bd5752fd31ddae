use std::path::{Path, PathBuf};

use serde::Serialize;

use sarcrop::data::synth::generate_synthetic_dataset;
use sarcrop::data::{load_dataset, save_dataset, split_train_test, PatchDataset};
use sarcrop::eval::{
    evaluate_scenario, predict_dataset, rf_predict, rf_train, score_masks, EvalEntry, EvalReport, Predictor,
};
use sarcrop::model::{BinaryMask, Group, ModelConfig, RecurrentUNet};
use sarcrop::scenario::ScenarioSpec;
use sarcrop::train::{train, TrainConfig};
use sarcrop::transfer::{
    apply_finetune_mode, expand_input_channels, load_checkpoint, save_checkpoint, verify_expansion, CheckpointBundle,
    FinetuneMode, TrainableMask,
};
use sarcrop::{Error, Result};

use crate::config::{require, synth_preset, RunConfig};
use crate::manifest::{create_dir, write_json, RunLog, RunManifest};
use crate::mosaic;

pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const MOSAIC_FILE: &str = "mosaic.png";

/// Tail-to-head loss ratio above which a run counts as stagnated.
const STAGNATION_RATIO: f64 = 0.95;

/// Feature subset of `data` matching `wanted`; a config error names the fix.
fn align_features(data: &PatchDataset, wanted: &[String]) -> Result<PatchDataset> {
    if data.feature_names == wanted {
        return Ok(data.clone());
    }
    if let Some(missing) = wanted.iter().find(|f| !data.feature_names.contains(f)) {
        return Err(Error::Config(format!(
            "dataset features {:?} lack `{missing}` required by the checkpoint",
            data.feature_names
        )));
    }
    data.select_features(wanted)
}

fn check_features(bundle: &CheckpointBundle, data: &PatchDataset) -> Result<()> {
    if bundle.feature_names != data.feature_names {
        return Err(Error::Config(format!(
            "checkpoint expects features {:?} but the dataset provides {:?}; run `adapt-channels` or pass --features",
            bundle.feature_names, data.feature_names
        )));
    }
    Ok(())
}

fn load_data(cfg: &RunConfig, path: &Option<PathBuf>, what: &str) -> Result<PatchDataset> {
    let data = load_dataset(require(path, what)?)?;
    match &cfg.features {
        Some(f) if *f != data.feature_names => data.select_features(f),
        _ => Ok(data),
    }
}

pub fn synth(cfg: &RunConfig, preset: Option<&str>) -> Result<()> {
    let out = cfg.out_dir()?;
    let mut manifest = RunManifest::new("synth", cfg);
    let mut spec = match (preset, &cfg.synth) {
        (Some(name), _) => synth_preset(name)?,
        (None, Some(src)) => src.resolve()?,
        (None, None) => synth_preset("source_rice")?,
    };
    if let Some(n) = cfg.n_patches {
        spec.n_patches = n;
    }
    if let Some(f) = &cfg.features {
        let names: Vec<&str> = f.iter().map(String::as_str).collect();
        spec = spec.with_features(&names)?;
    }
    manifest.stage("generate");
    let data = generate_synthetic_dataset(&spec, cfg.seed)?;
    save_dataset(&data, out)?;
    manifest.output(out.join("manifest.json"));
    println!(
        "wrote {} patches ({}x{}, T={}, features {}) to {}",
        data.len(),
        data.dims.h,
        data.dims.w,
        data.dims.t,
        data.feature_names.join("|"),
        out.display()
    );
    manifest.finish(out)?;
    Ok(())
}

pub fn split(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    let mut manifest = RunManifest::new("split", cfg);
    let data = load_data(cfg, &cfg.data, "dataset (--data)")?;
    let (train, test) = split_train_test(&data, cfg.ratio, cfg.seed);
    for (name, part) in [("train", &train), ("test", &test)] {
        let dir = out.join(name);
        save_dataset(part, &dir)?;
        manifest.output(dir.join("manifest.json"));
    }
    println!("split {} patches into {} train / {} test", data.len(), train.len(), test.len());
    manifest.finish(out)?;
    Ok(())
}

fn train_config(cfg: &RunConfig, fallback: TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.train.clone().unwrap_or(fallback)
    }
}

pub fn pretrain(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    create_dir(out)?;
    let mut manifest = RunManifest::new("pretrain", cfg);
    manifest.stage("load");
    let data = load_data(cfg, &cfg.data, "training dataset (--data)")?;
    let model = ModelConfig {
        in_channels: data.dims.c,
        time_steps: data.dims.t,
        patch_size: data.dims.h,
        ..cfg.model.clone()
    };
    if data.dims.h != data.dims.w {
        return Err(Error::Config("square patches required".into()));
    }
    let net = RecurrentUNet::new(model.clone())?;
    let init = net.init(cfg.seed)?;
    let tc = train_config(cfg, TrainConfig::default(), cfg.seed);
    let mut log = RunLog::to_file(&out.join("pretrain.log"))?;
    log.line(format!(
        "pretraining on {} patches ({} parameters, curriculum {})",
        data.len(),
        init.numel(),
        tc.curriculum
    ))?;
    manifest.stage("train");
    let (params, history) = train(&model, &init, &TrainableMask::all(&init, true), &data, &tc)?;
    let (head, tail) = history.head_tail_means(0.1);
    log.line(format!("loss {head:.4} -> {tail:.4} over {} steps", history.steps.len()))?;
    manifest.stage("save");
    let bundle = CheckpointBundle::new(
        model,
        params,
        data.feature_names.clone(),
        format!("pretrained on {} {} {} (seed {})", data.region, data.year, data.crop, cfg.seed),
    )?;
    let ck = out.join(CHECKPOINT_DIR);
    save_checkpoint(&bundle, &ck)?;
    history.write_jsonl(out.join(HISTORY_FILE))?;
    log.line(format!("checkpoint {} fingerprint {}", ck.display(), bundle.params.fingerprint()))?;
    manifest.output(ck.join("manifest.json"));
    manifest.output(out.join(HISTORY_FILE));
    manifest.output(out.join("pretrain.log"));
    manifest.finish(out)?;
    Ok(())
}

pub fn adapt_channels(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    create_dir(out)?;
    let mut manifest = RunManifest::new("adapt-channels", cfg);
    let bundle = load_checkpoint(require(&cfg.checkpoint, "input checkpoint (--checkpoint)")?)?;
    let features = require(&cfg.features, "target feature list (--features)")?;
    let expanded = expand_input_channels(&bundle, features)?;
    let check = verify_expansion(&bundle, &expanded, 2, cfg.seed, 1e-5)?;
    let ck = out.join(CHECKPOINT_DIR);
    save_checkpoint(&expanded, &ck)?;
    println!(
        "adapted {} -> {}; duplication identity max |diff| {:.3e}",
        bundle.feature_names.join("|"),
        expanded.feature_names.join("|"),
        check.max_abs_diff
    );
    manifest.output(ck.join("manifest.json"));
    manifest.finish(out)?;
    Ok(())
}

#[derive(Serialize)]
struct VerifySummary {
    checkpoint: PathBuf,
    fingerprint: String,
    features: Vec<String>,
    parameters: usize,
    expansion: Option<sarcrop::transfer::ExpansionCheck>,
}

pub fn verify_checkpoint(cfg: &RunConfig) -> Result<()> {
    let path = require(&cfg.checkpoint, "checkpoint (--checkpoint)")?;
    let bundle = load_checkpoint(path)?;
    let expansion = match &cfg.reference {
        Some(r) => Some(verify_expansion(&load_checkpoint(r)?, &bundle, 4, cfg.seed, 1e-5)?),
        None => None,
    };
    let summary = VerifySummary {
        checkpoint: path.clone(),
        fingerprint: bundle.params.fingerprint(),
        features: bundle.feature_names.clone(),
        parameters: bundle.params.numel(),
        expansion,
    };
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    if let Some(out) = &cfg.out {
        create_dir(out)?;
        write_json(&out.join("verify.json"), &summary)?;
    }
    if let Some(e) = &summary.expansion {
        if !e.passed {
            return Err(Error::integrity(
                path.display().to_string(),
                format!(
                    "duplication identity violated: max |diff| {:.3e} (tolerance {:.0e}), changed {:?}",
                    e.max_abs_diff, e.tolerance, e.changed
                ),
            ));
        }
        println!("duplication identity holds: max |diff| {:.3e}", e.max_abs_diff);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub mode: String,
    pub checkpoint: Option<PathBuf>,
    pub fingerprint: Option<String>,
    pub head_loss: Option<f64>,
    pub tail_loss: Option<f64>,
    pub stagnated: bool,
    pub diverged: bool,
    pub frozen_unchanged: bool,
}

fn frozen_unchanged(before: &sarcrop::model::ParameterSet, after: &sarcrop::model::ParameterSet, mask: &TrainableMask, group: Option<Group>) -> bool {
    before.iter().all(|(path, p)| {
        let frozen = !mask.get(path).unwrap_or(true);
        let in_group = group.is_none_or(|g| p.group == g);
        if !(frozen && in_group) {
            return true;
        }
        let q = after.get(path).expect("same layout");
        p.values.iter().map(|v| v.to_bits()).eq(q.values.iter().map(|v| v.to_bits()))
    })
}

pub fn finetune(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    create_dir(out)?;
    let mut manifest = RunManifest::new("finetune", cfg);
    let bundle = load_checkpoint(require(&cfg.checkpoint, "pretrained checkpoint (--checkpoint)")?)?;
    let data = load_data(cfg, &cfg.data, "fine-tune dataset (--data)")?;
    check_features(&bundle, &data)?;
    let mode = cfg.mode;
    let log_path = out.join("finetune.log");
    let mut log = RunLog::to_file(&log_path)?;
    manifest.output(&log_path);
    log.line(format!("fine-tuning mode {mode} on {} patches", data.len()))?;
    let mut outcomes = Vec::new();
    for seed in cfg.seed_list() {
        manifest.stage(&format!("seed_{seed}"));
        let dir = out.join(format!("seed_{seed}"));
        create_dir(&dir)?;
        let (start, mask) = apply_finetune_mode(&bundle, mode, seed)?;
        if mode == FinetuneMode::RandomInit {
            log.line(format!("seed {seed}: pretrained weights discarded; architecture re-initialised"))?;
        }
        log.line(format!(
            "seed {seed}: {} of {} parameter tensors trainable",
            mask.trainable_count(),
            start.len()
        ))?;
        let tc = train_config(cfg, TrainConfig::finetune(), seed);
        let tolerate = matches!(mode, FinetuneMode::Decoder | FinetuneMode::DecoderLast(_));
        let result = train(&bundle.config, &start, &mask, &data, &tc);
        let (params, history) = match result {
            Ok(r) => r,
            Err(Error::Divergence { step, loss }) if tolerate => {
                log.line(format!("seed {seed}: diverged at step {step} (loss {loss}); flagged, no checkpoint"))?;
                outcomes.push(SeedOutcome {
                    seed,
                    mode: mode.label(),
                    checkpoint: None,
                    fingerprint: None,
                    head_loss: None,
                    tail_loss: None,
                    stagnated: false,
                    diverged: true,
                    frozen_unchanged: true,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let frozen_ok = frozen_unchanged(&start, &params, &mask, None);
        match mode {
            FinetuneMode::Encoder => log.line(format!(
                "seed {seed}: decoder unchanged: {}",
                frozen_unchanged(&start, &params, &mask, Some(Group::Decoder))
            ))?,
            FinetuneMode::Decoder => log.line(format!(
                "seed {seed}: encoder unchanged: {}",
                frozen_unchanged(&start, &params, &mask, Some(Group::Encoder))
            ))?,
            FinetuneMode::DecoderLast(_) => log.line(format!("seed {seed}: frozen parameters unchanged: {frozen_ok}"))?,
            _ => {}
        }
        if !frozen_ok {
            return Err(Error::integrity("trainable mask", "a frozen parameter changed during fine-tuning"));
        }
        let (head, tail) = history.head_tail_means(0.1);
        let stagnated = history.steps.len() > 1 && tail > STAGNATION_RATIO * head;
        log.line(format!("seed {seed}: loss {head:.4} -> {tail:.4}{}", if stagnated { " (stagnated; flagged)" } else { "" }))?;
        let tuned = CheckpointBundle::new(
            bundle.config.clone(),
            params,
            bundle.feature_names.clone(),
            format!("{}; fine-tuned {mode} on {} {} (seed {seed})", bundle.provenance, data.region, data.year),
        )?;
        let ck = dir.join(CHECKPOINT_DIR);
        save_checkpoint(&tuned, &ck)?;
        history.write_jsonl(dir.join(HISTORY_FILE))?;
        manifest.output(ck.join("manifest.json"));
        manifest.output(dir.join(HISTORY_FILE));
        outcomes.push(SeedOutcome {
            seed,
            mode: mode.label(),
            checkpoint: Some(ck),
            fingerprint: Some(tuned.params.fingerprint()),
            head_loss: Some(head),
            tail_loss: Some(tail),
            stagnated,
            diverged: false,
            frozen_unchanged: frozen_ok,
        });
    }
    let summary = out.join("finetune_summary.json");
    write_json(&summary, &outcomes)?;
    manifest.output(summary);
    manifest.finish(out)?;
    Ok(())
}

fn write_masks(dir: &Path, data: &PatchDataset, mask: &BinaryMask) -> Result<()> {
    create_dir(dir)?;
    let hw = data.dims.hw();
    for (i, s) in data.samples.iter().enumerate() {
        let path = dir.join(format!("mask_{}.bin", s.meta.patch_id));
        std::fs::write(&path, &mask.values[i * hw..(i + 1) * hw]).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    create_dir(out)?;
    let mut manifest = RunManifest::new("predict", cfg);
    let bundle = load_checkpoint(require(&cfg.checkpoint, "checkpoint (--checkpoint)")?)?;
    let data = align_features(&load_dataset(require(&cfg.data, "dataset (--data)")?)?, &bundle.feature_names)?;
    let t_avail = cfg.t_avail.unwrap_or(data.dims.t);
    manifest.stage("predict");
    let mask = predict_dataset(&bundle, &data, t_avail, cfg.threshold)?;
    let dir = out.join("masks");
    write_masks(&dir, &data, &mask)?;
    let img = mosaic::render(&data, &[("prediction", &mask)], cfg.mosaic_patches)?;
    mosaic::save(&img, &out.join(MOSAIC_FILE))?;
    let (counts, metrics) = score_masks(&mask, &data, cfg.averaging)?;
    let summary = out.join("prediction.json");
    write_json(
        &summary,
        &serde_json::json!({ "t_avail": t_avail, "threshold": cfg.threshold, "counts": counts, "metrics": metrics }),
    )?;
    println!(
        "predicted {} patches at t_avail={t_avail}: {} positive pixels, IoU vs labels {:.3}",
        data.len(),
        mask.positives(),
        metrics.iou
    );
    manifest.output(dir);
    manifest.output(out.join(MOSAIC_FILE));
    manifest.output(summary);
    manifest.finish(out)?;
    Ok(())
}

/// `METHOD` or `METHOD@SEED`.
fn parse_model_key(key: &str) -> Result<(String, Option<u64>)> {
    match key.split_once('@') {
        None => Ok((key.to_string(), None)),
        Some((m, s)) => s
            .parse()
            .map(|seed| (m.to_string(), Some(seed)))
            .map_err(|_| Error::Config(format!("bad seed in model key `{key}`"))),
    }
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    create_dir(out)?;
    let mut manifest = RunManifest::new("evaluate", cfg);
    manifest.stage("load");
    let test = load_dataset(require(&cfg.test_data, "test dataset (--test-data)")?)?;
    if test.is_empty() {
        return Err(Error::Argument("test dataset is empty".into()));
    }
    if cfg.models.is_empty() && !cfg.rf {
        return Err(Error::Config("nothing to evaluate; pass --model METHOD=PATH and/or --rf".into()));
    }
    let features = cfg.features.clone().unwrap_or_else(|| test.feature_names.clone());
    let mut scenario = match cfg.scenario {
        Some(id) => ScenarioSpec::preset(id)?,
        None => ScenarioSpec {
            finetune_region: String::new(),
            test_region: test.region.clone(),
            crop: test.crop.clone(),
            features: features.clone(),
            ..ScenarioSpec::default()
        },
    };
    scenario.test_data = cfg.test_data.clone();
    scenario.finetune_data = cfg.data.clone();
    scenario.seeds = cfg.seed_list();
    let mut report = EvalReport::new(scenario, cfg.averaging, cfg.threshold);
    let mut shown: Vec<(String, BinaryMask)> = Vec::new();

    if cfg.rf {
        manifest.stage("rf");
        let train_data = load_dataset(require(&cfg.data, "RF training dataset (--data)")?)?;
        let train_data = align_features(&train_data, &features)?;
        let test_rf = align_features(&test, &features)?;
        if report.scenario.finetune_region.is_empty() {
            report.scenario.finetune_region = train_data.region.clone();
        }
        for &seed in &report.seeds.clone() {
            let model = rf_train(&train_data, &cfg.rf_hyper, seed)?;
            let mut e = evaluate_scenario("RF", &Predictor::Forest(&model), &test_rf, cfg.threshold, test.dims.t, cfg.averaging)?;
            e.seed = Some(seed);
            println!("RF seed {seed}: IoU {:.3}", e.metrics.iou);
            report.entries.push(e);
            if !shown.iter().any(|(m, _)| m == "RF") {
                shown.push(("RF".into(), rf_predict(&model, &test_rf)?));
            }
        }
    }

    manifest.stage("networks");
    for (key, path) in &cfg.models {
        let (method, seed) = parse_model_key(key)?;
        let bundle = load_checkpoint(path)?;
        let data = align_features(&test, &bundle.feature_names)?;
        let mut e = evaluate_scenario(&method, &Predictor::Network(&bundle), &data, cfg.threshold, data.dims.t, cfg.averaging)?;
        e.seed = seed;
        println!("{key} [{}]: IoU {:.3}", bundle.feature_names.join("|"), e.metrics.iou);
        report.entries.push(e);
        for &t in &cfg.early_steps {
            let mut e: EvalEntry =
                evaluate_scenario(&method, &Predictor::Network(&bundle), &data, cfg.threshold, t, cfg.averaging)?;
            e.seed = seed;
            report.early.push(e);
        }
        if !shown.iter().any(|(m, _)| *m == method) {
            shown.push((method.clone(), predict_dataset(&bundle, &data, data.dims.t, cfg.threshold)?));
        }
    }
    // without explicit seeds or RF runs, only the checkpoints' seeds count
    if cfg.seeds.is_none() && !cfg.rf && report.entries.iter().any(|e| e.seed.is_some()) {
        report.seeds.clear();
    }
    for s in report.entries.iter().filter_map(|e| e.seed).collect::<Vec<_>>() {
        if !report.seeds.contains(&s) {
            report.seeds.push(s);
        }
    }
    report.scenario.seeds = report.seeds.clone();
    report.summarize();
    for s in &report.summary {
        println!(
            "{} [{}] mean over seeds: IoU {:.3} recall {:.3} precision {:.3} F1 {:.3}",
            s.method,
            s.features.join("|"),
            s.metrics.iou,
            s.metrics.recall,
            s.metrics.precision,
            s.metrics.f1
        );
    }

    manifest.stage("write");
    let report_path = out.join(REPORT_FILE);
    write_json(&report_path, &report)?;
    let refs: Vec<(&str, &BinaryMask)> = shown.iter().map(|(m, b)| (m.as_str(), b)).collect();
    let img = mosaic::render(&test, &refs, cfg.mosaic_patches)?;
    mosaic::save(&img, &out.join(MOSAIC_FILE))?;
    for (method, mask) in &shown {
        write_masks(&out.join("masks").join(method), &test, mask)?;
    }
    manifest.output(report_path);
    manifest.output(out.join(MOSAIC_FILE));
    manifest.finish(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_keys() {
        assert_eq!(parse_model_key("FT_E").unwrap(), ("FT_E".into(), None));
        assert_eq!(parse_model_key("FT@2").unwrap(), ("FT".into(), Some(2)));
        assert!(parse_model_key("FT@x").is_err());
    }
}
