use std::collections::BTreeMap;
use std::path::Path;

use actdet::harness::{tube_features, video_index_of, FeatureContext, FusionBank, ScenarioConfig};
use actdet::tubes::{ActionTube, FrameDetections};

use crate::error::CmdError;
use crate::formats::{
    read_jsonl, write_jsonl, write_pretty_json, DetectionRecord, ElementFeatureRecord, Manifest,
    TubeFeatureRecord, TubeRecord,
};

use super::{check_world_compatible, config_sha256, ensure_out_dir, load_config, load_world};

/// Links per-frame detections into class-specific tubes. With a world
/// directory the per-element fused descriptors are computed as well and
/// written alongside, aligned line by line with the tube file.
pub fn cmd_link(
    dets_path: &Path,
    world_dir: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
) -> Result<(), CmdError> {
    let world = world_dir.map(load_world).transpose()?;
    let cfg: ScenarioConfig = match (config, &world) {
        (Some(path), Some(world)) => {
            let c = load_config(path)?;
            check_world_compatible(&world.config, &c)?;
            c
        }
        (Some(path), None) => load_config(path)?,
        (None, Some(world)) => world.config.clone(),
        (None, None) => {
            return Err(CmdError::validation(
                "link needs --config or --world to provide linking parameters",
            ))
        }
    };

    let records: Vec<DetectionRecord> = read_jsonl(dets_path)?;
    let mut by_video: BTreeMap<String, BTreeMap<usize, Vec<_>>> = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        let ctx = format!("{}:{}", dets_path.display(), i + 1);
        rec.validate(&ctx)?;
        if rec.class >= cfg.num_classes {
            return Err(CmdError::validation(format!(
                "{ctx}: class {} outside the configured {} classes",
                rec.class, cfg.num_classes
            )));
        }
        by_video
            .entry(rec.video_id.clone())
            .or_default()
            .entry(rec.frame)
            .or_default()
            .push(rec.scored_box());
    }

    let link = cfg.link.params();
    let mut tube_records = Vec::new();
    let mut linked: Vec<(String, ActionTube<f64>)> = Vec::new();
    for (video_id, frames) in &by_video {
        let frame_dets: Vec<FrameDetections<f64>> = frames
            .iter()
            .map(|(&frame_idx, dets)| FrameDetections {
                frame_idx,
                dets: dets.clone(),
            })
            .collect();
        for class_id in 0..cfg.num_classes {
            for tube in actdet::tubes::link_tubes(&frame_dets, class_id, &link) {
                tube_records.push(TubeRecord::from_tube(video_id.clone(), &tube));
                linked.push((video_id.clone(), tube));
            }
        }
    }

    let feature_records: Option<Vec<TubeFeatureRecord>> = match &world {
        None => None,
        Some(world) => {
            let ctx = FeatureContext::new(&cfg, world.seed, &world.gt_index);
            let bank = FusionBank::new(&cfg)?;
            let mut out_records = Vec::with_capacity(linked.len());
            for (video_id, tube) in &linked {
                let video = video_index_of(video_id)
                    .filter(|&v| v < cfg.num_videos)
                    .ok_or_else(|| {
                        CmdError::validation(format!("unknown video id {video_id} in detections"))
                    })?;
                let feats = tube_features(
                    &ctx,
                    &world.gt_index,
                    video,
                    std::slice::from_ref(tube),
                    &bank,
                    cfg.cooperation.num_stages,
                );
                out_records.push(TubeFeatureRecord {
                    video_id: video_id.clone(),
                    class: tube.class_id,
                    elements: tube
                        .elements
                        .iter()
                        .zip(&feats[0])
                        .map(|(el, feature)| ElementFeatureRecord {
                            frame: el.frame_idx,
                            feature: feature.clone(),
                        })
                        .collect(),
                });
            }
            Some(out_records)
        }
    };

    ensure_out_dir(out)?;
    write_jsonl(&out.join("tubes.jsonl"), &tube_records)?;
    let mut counts = BTreeMap::new();
    counts.insert("input_detections".to_string(), records.len());
    counts.insert("tubes".to_string(), tube_records.len());
    if let Some(feats) = &feature_records {
        write_jsonl(&out.join("features.jsonl"), feats)?;
        counts.insert("feature_tubes".to_string(), feats.len());
    }
    write_pretty_json(
        &out.join("manifest.json"),
        &Manifest {
            kind: "link".into(),
            seed: world.as_ref().map(|w| w.seed).unwrap_or(cfg.seed),
            config_sha256: config_sha256(&cfg)?,
            counts,
            config: None,
        },
    )?;
    Ok(())
}
