use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use actdet::harness::{run_experiment, ExperimentResult, ScenarioConfig, SeedOutcome};

use crate::error::CmdError;
use crate::formats::{fmt_float, write_csv, write_pretty_json, Manifest};

use super::{config_sha256, ensure_out_dir, load_config};

#[derive(Debug, Serialize)]
struct ExperimentManifest {
    config_sha256: String,
    seeds: Vec<u64>,
    stage_frame_map_mean: Vec<f64>,
    video_map_before_mean: f64,
    video_map_after_mean: f64,
    per_seed: Vec<SeedOutcome>,
    config: ScenarioConfig,
}

/// Runs the seed-averaged experiment and writes the stage table, the
/// refinement table, and a JSON manifest with every per-seed metric.
pub fn cmd_report(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    threads: Option<usize>,
) -> Result<(), CmdError> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result: ExperimentResult = run_experiment(&cfg, threads)?;

    ensure_out_dir(out)?;
    let rows: Vec<String> = result
        .stage_frame_map_mean
        .iter()
        .enumerate()
        .map(|(t, m)| format!("{t},{}", fmt_float(*m)))
        .collect();
    write_csv(&out.join("stages.csv"), "stage,frame_map", &rows)?;
    write_csv(
        &out.join("refine.csv"),
        "video_map_before,video_map_after,delta",
        &[format!(
            "{},{},{}",
            fmt_float(result.video_map_before_mean),
            fmt_float(result.video_map_after_mean),
            fmt_float(result.video_map_after_mean - result.video_map_before_mean)
        )],
    )?;

    let sha = config_sha256(&cfg)?;
    write_pretty_json(
        &out.join("experiment.json"),
        &ExperimentManifest {
            config_sha256: sha.clone(),
            seeds: result.seeds.clone(),
            stage_frame_map_mean: result.stage_frame_map_mean.clone(),
            video_map_before_mean: result.video_map_before_mean,
            video_map_after_mean: result.video_map_after_mean,
            per_seed: result.per_seed,
            config: cfg.clone(),
        },
    )?;
    let mut counts = BTreeMap::new();
    counts.insert("seeds".to_string(), result.seeds.len());
    counts.insert(
        "stages".to_string(),
        result.stage_frame_map_mean.len().saturating_sub(1),
    );
    write_pretty_json(
        &out.join("manifest.json"),
        &Manifest {
            kind: "report".into(),
            seed: cfg.seed,
            config_sha256: sha,
            counts,
            config: Some(cfg),
        },
    )?;
    Ok(())
}
