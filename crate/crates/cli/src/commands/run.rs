use std::collections::BTreeMap;
use std::path::Path;

use actdet::harness::{
    collect_actionness_samples, link_all_tubes, run_pipeline, stage_frame_map, tube_features,
    video_name, FeatureContext, FusionBank, PipelineOutput,
};
use actdet::refine::train_actionness;
use actdet::tubes::ActionTube;

use crate::error::CmdError;
use crate::formats::{
    fmt_float, write_csv, write_jsonl, write_pretty_json, DetectionRecord, Manifest, WeightsFile,
};

use super::{check_world_compatible, config_sha256, ensure_out_dir, load_config, load_world};

/// Runs the cooperation pipeline over a generated world: writes one combined
/// detections file per stage, a `stages.csv` metric table, and the actionness
/// weights trained on the leading train-split videos.
pub fn cmd_run(
    world_dir: &Path,
    config: Option<&Path>,
    stages: Option<usize>,
    delta: Option<f64>,
    out: &Path,
    threads: Option<usize>,
) -> Result<(), CmdError> {
    let world = load_world(world_dir)?;
    let mut cfg = world.config.clone();
    if let Some(path) = config {
        let override_cfg = load_config(path)?;
        check_world_compatible(&world.config, &override_cfg)?;
        cfg = override_cfg;
    }
    if let Some(t) = stages {
        cfg.cooperation.num_stages = t;
    }
    let delta = delta.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&delta) {
        return Err(CmdError::validation(format!(
            "delta must be in [0, 1], got {delta}"
        )));
    }

    let compute = || -> Result<_, CmdError> {
        let output = run_pipeline(&cfg, world.seed, &world.gt_index, &world.proposals)?;
        let all_videos: Vec<usize> = (0..cfg.num_videos).collect();
        let maps = stage_frame_map(&output, &world.gt_index, &all_videos, delta);

        // actionness training on the train split, from final-stage tubes
        let link = cfg.link.params();
        let tubes_per_video: Vec<Vec<ActionTube<f64>>> = (0..cfg.num_videos)
            .map(|v| link_all_tubes(&output.final_frames(v), cfg.num_classes, &link))
            .collect();
        let ctx = FeatureContext::new(&cfg, world.seed, &world.gt_index);
        let bank = FusionBank::new(&cfg)?;
        let feats_per_video: Vec<_> = (0..cfg.num_videos)
            .map(|v| {
                tube_features(
                    &ctx,
                    &world.gt_index,
                    v,
                    &tubes_per_video[v],
                    &bank,
                    cfg.cooperation.num_stages,
                )
            })
            .collect();
        let train: Vec<usize> = (0..cfg.train_video_count()).collect();
        let samples = collect_actionness_samples(
            &world.gt_index,
            cfg.num_classes,
            &train,
            &tubes_per_video,
            &feats_per_video,
        );
        let clf = train_actionness(
            &samples,
            cfg.refine.epochs,
            cfg.refine.learning_rate,
            world.seed,
        );
        Ok((output, maps, bank, clf))
    };
    let (output, maps, bank, clf): (PipelineOutput, Vec<f64>, _, _) = match threads {
        Some(n) => actdet_pool(n)?.install(compute),
        None => compute(),
    }?;

    ensure_out_dir(out)?;
    let mut counts = BTreeMap::new();
    for t in 0..=cfg.cooperation.num_stages {
        let mut records = Vec::new();
        for video in 0..cfg.num_videos {
            for (frame, dets) in output.combined[video][t].iter().enumerate() {
                for det in dets {
                    records.push(DetectionRecord::new(
                        video_name(video),
                        frame,
                        det,
                        None,
                        Some(t),
                    ));
                }
            }
        }
        counts.insert(format!("stage_{t}_detections"), records.len());
        write_jsonl(&out.join(format!("stage_{t}.jsonl")), &records)?;
    }

    let rows: Vec<String> = maps
        .iter()
        .enumerate()
        .map(|(t, m)| format!("{t},{}", fmt_float(*m)))
        .collect();
    write_csv(&out.join("stages.csv"), "stage,frame_map", &rows)?;

    let sha = config_sha256(&cfg)?;
    write_pretty_json(
        &out.join("weights.json"),
        &WeightsFile {
            config_sha256: sha.clone(),
            actionness: clf,
            fusion: bank,
        },
    )?;
    write_pretty_json(
        &out.join("manifest.json"),
        &Manifest {
            kind: "run".into(),
            seed: world.seed,
            config_sha256: sha,
            counts,
            config: Some(cfg),
        },
    )?;
    Ok(())
}

pub(crate) fn actdet_pool(threads: usize) -> Result<rayon::ThreadPool, CmdError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CmdError::Internal(e.to_string()))
}
