mod eval;
mod generate;
mod link;
mod refine;
mod report;
mod run;

pub use eval::{cmd_eval, EvalLevel};
pub use generate::cmd_generate;
pub use link::cmd_link;
pub use refine::cmd_refine;
pub use report::cmd_report;
pub use run::cmd_run;

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use actdet::cooperation::StreamId;
use actdet::eval::GroundTruthTube;
use actdet::harness::{video_index_of, GtIndex, ProposalIndex, ScenarioConfig};

use crate::error::CmdError;
use crate::formats::{read_jsonl, DetectionRecord, Manifest, TubeRecord};

/// Parses and validates a scenario config file; unknown keys are named in the
/// error.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::validation(format!("{}: {e}", path.display())))?;
    let cfg: ScenarioConfig = toml::from_str(&text)
        .map_err(|e| CmdError::validation(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Hash of the canonical JSON serialization of the effective config.
pub fn config_sha256(cfg: &ScenarioConfig) -> Result<String, CmdError> {
    let json = serde_json::to_string(cfg).map_err(|e| CmdError::Internal(e.to_string()))?;
    let digest = Sha256::digest(json.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn ensure_out_dir(path: &Path) -> Result<(), CmdError> {
    fs::create_dir_all(path)?;
    Ok(())
}

/// A parsed world directory: the generating config and seed, ground truth,
/// and per-stream base proposals.
pub struct WorldFiles {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub gt_tubes: Vec<GroundTruthTube<f64>>,
    pub gt_index: GtIndex,
    pub proposals: ProposalIndex,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CmdError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| CmdError::validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CmdError::validation(format!("{}: {e}", path.display())))
}

pub fn load_gt_tubes(path: &Path) -> Result<Vec<GroundTruthTube<f64>>, CmdError> {
    let records: Vec<TubeRecord> = read_jsonl(path)?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.validate(&format!("{}:{}", path.display(), i + 1))?;
            Ok(r.to_gt())
        })
        .collect()
}

/// Reads everything a pipeline run needs from a world directory.
pub fn load_world(dir: &Path) -> Result<WorldFiles, CmdError> {
    let manifest = read_manifest(dir)?;
    if manifest.kind != "world" {
        return Err(CmdError::validation(format!(
            "{}: expected a world manifest, found kind {:?}",
            dir.display(),
            manifest.kind
        )));
    }
    let config = manifest.config.ok_or_else(|| {
        CmdError::validation(format!("{}: world manifest has no config", dir.display()))
    })?;
    config.validate()?;
    let gt_tubes = load_gt_tubes(&dir.join("gt.jsonl"))?;
    let gt_index = GtIndex::from_tubes(
        &gt_tubes,
        config.num_videos,
        config.frames_per_video,
        video_index_of,
    )
    .map_err(|e| CmdError::validation(e.to_string()))?;

    let read_stream = |stream: StreamId| -> Result<Vec<Vec<Vec<_>>>, CmdError> {
        let path = dir.join(format!("proposals_{}.jsonl", stream.name()));
        let records: Vec<DetectionRecord> = read_jsonl(&path)?;
        let mut grid = vec![vec![Vec::new(); config.frames_per_video]; config.num_videos];
        for (i, rec) in records.iter().enumerate() {
            let ctx = format!("{}:{}", path.display(), i + 1);
            rec.validate(&ctx)?;
            let video = video_index_of(&rec.video_id)
                .filter(|&v| v < config.num_videos)
                .ok_or_else(|| {
                    CmdError::validation(format!("{ctx}: unknown video id {}", rec.video_id))
                })?;
            if rec.frame >= config.frames_per_video {
                return Err(CmdError::validation(format!(
                    "{ctx}: frame {} outside video of {} frames",
                    rec.frame, config.frames_per_video
                )));
            }
            if let Some(s) = &rec.stream {
                if s != stream.name() {
                    return Err(CmdError::validation(format!(
                        "{ctx}: stream {s:?} in the {} proposals file",
                        stream.name()
                    )));
                }
            }
            grid[video][rec.frame].push(rec.scored_box());
        }
        Ok(grid)
    };

    Ok(WorldFiles {
        seed: manifest.seed,
        gt_index,
        gt_tubes,
        proposals: ProposalIndex {
            rgb: read_stream(StreamId::Rgb)?,
            flow: read_stream(StreamId::Flow)?,
        },
        config,
    })
}

/// Checks that an override config describes the same world geometry as the
/// one the world was generated with.
pub fn check_world_compatible(
    world_cfg: &ScenarioConfig,
    override_cfg: &ScenarioConfig,
) -> Result<(), CmdError> {
    let mismatch = |name: &str| {
        Err(CmdError::validation(format!(
            "config override changes the world geometry field {name}"
        )))
    };
    if override_cfg.num_videos != world_cfg.num_videos {
        return mismatch("num_videos");
    }
    if override_cfg.frames_per_video != world_cfg.frames_per_video {
        return mismatch("frames_per_video");
    }
    if override_cfg.num_classes != world_cfg.num_classes {
        return mismatch("num_classes");
    }
    if override_cfg.frame_width != world_cfg.frame_width
        || override_cfg.frame_height != world_cfg.frame_height
    {
        return mismatch("frame dimensions");
    }
    Ok(())
}
