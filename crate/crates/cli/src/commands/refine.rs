use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use actdet::harness::ScenarioConfig;
use actdet::refine::refine_tube;

use crate::error::CmdError;
use crate::formats::{
    read_jsonl, write_jsonl, write_pretty_json, Manifest, TubeFeatureRecord, TubeRecord,
    WeightsFile,
};

use super::{config_sha256, ensure_out_dir, load_config};

/// Refines tube boundaries: scores every element with the class-specific
/// actionness classifier from the weights file, smooths, trims, and splits.
/// The feature file must align with the tube file line by line.
pub fn cmd_refine(
    tubes_path: &Path,
    features_path: &Path,
    weights_path: &Path,
    config: Option<&Path>,
    out: &Path,
) -> Result<(), CmdError> {
    let cfg: ScenarioConfig = match config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::default(),
    };
    let params = cfg.refine.params();

    let tube_records: Vec<TubeRecord> = read_jsonl(tubes_path)?;
    let feature_records: Vec<TubeFeatureRecord> = read_jsonl(features_path)?;
    let weights: WeightsFile = {
        let text = fs::read_to_string(weights_path)
            .map_err(|e| CmdError::validation(format!("{}: {e}", weights_path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CmdError::validation(format!("{}: {e}", weights_path.display())))?
    };

    if tube_records.len() != feature_records.len() {
        return Err(CmdError::validation(format!(
            "{} tubes but {} feature rows",
            tube_records.len(),
            feature_records.len()
        )));
    }
    for (i, (tube, feats)) in tube_records.iter().zip(&feature_records).enumerate() {
        let ctx = format!("tube {} ({})", i + 1, tube.video_id);
        tube.validate(&ctx)?;
        if feats.video_id != tube.video_id || feats.class != tube.class {
            return Err(CmdError::validation(format!(
                "{ctx}: feature row belongs to {} class {}",
                feats.video_id, feats.class
            )));
        }
        if feats.elements.len() != tube.elements.len() {
            return Err(CmdError::validation(format!(
                "{ctx}: {} elements but {} features",
                tube.elements.len(),
                feats.elements.len()
            )));
        }
        for (el, fe) in tube.elements.iter().zip(&feats.elements) {
            if el.frame != fe.frame {
                return Err(CmdError::validation(format!(
                    "{ctx}: feature frame {} does not match element frame {}",
                    fe.frame, el.frame
                )));
            }
        }
        if tube.class >= weights.actionness.num_classes() {
            return Err(CmdError::validation(format!(
                "{ctx}: class {} outside the classifier's {} classes",
                tube.class,
                weights.actionness.num_classes()
            )));
        }
    }

    let mut refined_records = Vec::new();
    for (tube_rec, feats) in tube_records.iter().zip(&feature_records) {
        let tube = tube_rec.to_tube();
        let features: Vec<Vec<f64>> = feats.elements.iter().map(|e| e.feature.clone()).collect();
        for refined in refine_tube(&tube, &weights.actionness, &features, &params) {
            refined_records.push(TubeRecord::from_tube(tube_rec.video_id.clone(), &refined));
        }
    }

    ensure_out_dir(out)?;
    write_jsonl(&out.join("refined.jsonl"), &refined_records)?;
    let mut counts = BTreeMap::new();
    counts.insert("input_tubes".to_string(), tube_records.len());
    counts.insert("output_tubes".to_string(), refined_records.len());
    write_pretty_json(
        &out.join("manifest.json"),
        &Manifest {
            kind: "refine".into(),
            seed: cfg.seed,
            config_sha256: config_sha256(&cfg)?,
            counts,
            config: None,
        },
    )?;
    Ok(())
}
