use std::collections::BTreeMap;
use std::path::Path;

use actdet::cooperation::StreamId;
use actdet::harness::{video_name, SyntheticWorld};

use crate::error::CmdError;
use crate::formats::{write_jsonl, write_pretty_json, DetectionRecord, Manifest, TubeRecord};

use super::{config_sha256, ensure_out_dir, load_config};

/// Writes a synthetic world: `gt.jsonl`, per-stream proposal files, and a
/// manifest embedding the effective config and seed.
pub fn cmd_generate(config: &Path, seed: Option<u64>, out: &Path) -> Result<(), CmdError> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let world = SyntheticWorld::generate(&cfg, cfg.seed)?;

    let gt_records: Vec<TubeRecord> = world.gt_tubes().iter().map(TubeRecord::from_gt).collect();

    let props = world.proposal_index();
    let stream_records = |stream: StreamId| -> Vec<DetectionRecord> {
        let mut records = Vec::new();
        for video in 0..cfg.num_videos {
            for frame in 0..cfg.frames_per_video {
                for det in props.at(stream, video, frame) {
                    records.push(DetectionRecord::new(
                        video_name(video),
                        frame,
                        det,
                        Some(stream.name().to_string()),
                        None,
                    ));
                }
            }
        }
        records
    };
    let rgb_records = stream_records(StreamId::Rgb);
    let flow_records = stream_records(StreamId::Flow);

    let mut counts = BTreeMap::new();
    counts.insert("videos".to_string(), cfg.num_videos);
    counts.insert("gt_tubes".to_string(), gt_records.len());
    counts.insert("proposals_rgb".to_string(), rgb_records.len());
    counts.insert("proposals_flow".to_string(), flow_records.len());
    let manifest = Manifest {
        kind: "world".into(),
        seed: cfg.seed,
        config_sha256: config_sha256(&cfg)?,
        counts,
        config: Some(cfg),
    };

    ensure_out_dir(out)?;
    write_jsonl(&out.join("gt.jsonl"), &gt_records)?;
    write_jsonl(&out.join("proposals_rgb.jsonl"), &rgb_records)?;
    write_jsonl(&out.join("proposals_flow.jsonl"), &flow_records)?;
    write_pretty_json(&out.join("manifest.json"), &manifest)?;
    Ok(())
}
