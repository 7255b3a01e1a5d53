//! JSONL interchange records and the shared file-writing conventions: stable
//! field order and floats rounded to 6 significant digits, so emissions are
//! byte-reproducible.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use actdet::eval::GroundTruthTube;
use actdet::geometry::{BBox, ScoredBox};
use actdet::harness::{FusionBank, ScenarioConfig};
use actdet::refine::ActionnessClassifier;
use actdet::tubes::{ActionTube, TubeElement};

use crate::error::CmdError;

/// Rounds to 6 significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap()
}

fn round_value(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round6(f)) {
                        *v = serde_json::Value::Number(r);
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_value),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Compact JSON with every float rounded to the emission format.
pub fn to_rounded_line<T: Serialize>(value: &T) -> Result<String, CmdError> {
    let mut v = serde_json::to_value(value).map_err(|e| CmdError::Internal(e.to_string()))?;
    round_value(&mut v);
    serde_json::to_string(&v).map_err(|e| CmdError::Internal(e.to_string()))
}

/// Pretty JSON with every float rounded to the emission format.
pub fn to_rounded_pretty<T: Serialize>(value: &T) -> Result<String, CmdError> {
    let mut v = serde_json::to_value(value).map_err(|e| CmdError::Internal(e.to_string()))?;
    round_value(&mut v);
    serde_json::to_string_pretty(&v).map_err(|e| CmdError::Internal(e.to_string()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CmdError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&to_rounded_line(item)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_pretty_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CmdError> {
    let mut text = to_rounded_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Parses a JSONL file, reporting the file and line of the first bad record.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CmdError> {
    let file = fs::File::open(path)
        .map_err(|e| CmdError::validation(format!("{}: {e}", path.display())))?;
    let mut items = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            CmdError::validation(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        items.push(item);
    }
    Ok(items)
}

/// One detection box on one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub video_id: String,
    pub frame: usize,
    pub class: usize,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
}

impl DetectionRecord {
    pub fn new(
        video_id: String,
        frame: usize,
        det: &ScoredBox<f64>,
        stream: Option<String>,
        stage: Option<usize>,
    ) -> Self {
        Self {
            video_id,
            frame,
            class: det.class_id,
            bbox: [
                round6(det.bbox.x1),
                round6(det.bbox.y1),
                round6(det.bbox.x2),
                round6(det.bbox.y2),
            ],
            score: round6(det.score),
            stream,
            stage,
        }
    }

    pub fn validate(&self, ctx: &str) -> Result<(), CmdError> {
        let [x1, y1, x2, y2] = self.bbox;
        if !(x1 <= x2 && y1 <= y2) || self.bbox.iter().any(|v| !v.is_finite()) {
            return Err(CmdError::validation(format!(
                "{ctx}: box {:?} violates the corner convention",
                self.bbox
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(CmdError::validation(format!(
                "{ctx}: score {} outside [0, 1]",
                self.score
            )));
        }
        Ok(())
    }

    pub fn scored_box(&self) -> ScoredBox<f64> {
        ScoredBox::new(
            BBox::new(self.bbox[0], self.bbox[1], self.bbox[2], self.bbox[3]),
            self.class,
            self.score,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeElementRecord {
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub score: f64,
}

/// One action tube (detected or ground truth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeRecord {
    pub video_id: String,
    pub class: usize,
    pub score: f64,
    pub elements: Vec<TubeElementRecord>,
}

impl TubeRecord {
    pub fn from_tube(video_id: String, tube: &ActionTube<f64>) -> Self {
        Self {
            video_id,
            class: tube.class_id,
            score: round6(tube.tube_score),
            elements: tube
                .elements
                .iter()
                .map(|e| TubeElementRecord {
                    frame: e.frame_idx,
                    bbox: [
                        round6(e.bbox.x1),
                        round6(e.bbox.y1),
                        round6(e.bbox.x2),
                        round6(e.bbox.y2),
                    ],
                    score: round6(e.score),
                })
                .collect(),
        }
    }

    pub fn from_gt(gt: &GroundTruthTube<f64>) -> Self {
        Self {
            video_id: gt.video.clone(),
            class: gt.class_id,
            score: 1.0,
            elements: gt
                .elements
                .iter()
                .map(|&(frame, b)| TubeElementRecord {
                    frame,
                    bbox: [round6(b.x1), round6(b.y1), round6(b.x2), round6(b.y2)],
                    score: 1.0,
                })
                .collect(),
        }
    }

    pub fn validate(&self, ctx: &str) -> Result<(), CmdError> {
        if self.elements.is_empty() {
            return Err(CmdError::validation(format!("{ctx}: tube has no elements")));
        }
        for w in self.elements.windows(2) {
            if w[0].frame >= w[1].frame {
                return Err(CmdError::validation(format!(
                    "{ctx}: frames must strictly increase ({} then {})",
                    w[0].frame, w[1].frame
                )));
            }
        }
        for e in &self.elements {
            let [x1, y1, x2, y2] = e.bbox;
            if !(x1 <= x2 && y1 <= y2) || e.bbox.iter().any(|v| !v.is_finite()) {
                return Err(CmdError::validation(format!(
                    "{ctx}: box {:?} violates the corner convention",
                    e.bbox
                )));
            }
        }
        Ok(())
    }

    pub fn to_tube(&self) -> ActionTube<f64> {
        ActionTube::new(
            self.class,
            self.elements
                .iter()
                .map(|e| TubeElement {
                    frame_idx: e.frame,
                    bbox: BBox::new(e.bbox[0], e.bbox[1], e.bbox[2], e.bbox[3]),
                    score: e.score,
                })
                .collect(),
        )
    }

    pub fn to_gt(&self) -> GroundTruthTube<f64> {
        GroundTruthTube {
            video: self.video_id.clone(),
            class_id: self.class,
            elements: self
                .elements
                .iter()
                .map(|e| (e.frame, BBox::new(e.bbox[0], e.bbox[1], e.bbox[2], e.bbox[3])))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementFeatureRecord {
    pub frame: usize,
    pub feature: Vec<f64>,
}

/// Per-element descriptors for one tube, aligned line by line with a tube
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeFeatureRecord {
    pub video_id: String,
    pub class: usize,
    pub elements: Vec<ElementFeatureRecord>,
}

/// Serialized model state: the actionness classifiers plus the message-module
/// parameters (row-major `w1`, `b1`, `w2`, `b2` per module).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub config_sha256: String,
    pub actionness: ActionnessClassifier<f64>,
    pub fusion: FusionBank,
}

/// Manifest written next to every command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub seed: u64,
    pub config_sha256: String,
    pub counts: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ScenarioConfig>,
}

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), CmdError> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{header}")?;
    for row in rows {
        writeln!(file, "{row}")?;
    }
    Ok(())
}

/// Canonical float formatting for CSV cells.
pub fn fmt_float(x: f64) -> String {
    format!("{}", round6(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round6_keeps_six_significant_digits() {
        assert_eq!(round6(1.0 / 3.0), 0.333333);
        assert_eq!(round6(123.4567890), 123.457);
        assert_eq!(round6(0.0), 0.0);
        assert_eq!(round6(-0.000123456789), -0.000123457);
    }

    #[test]
    fn detection_record_round_trips() {
        let rec = DetectionRecord::new(
            "v000".into(),
            3,
            &ScoredBox::new(BBox::new(1.0 / 3.0, 0.0, 10.0, 10.0), 2, 0.87654321),
            Some("rgb".into()),
            None,
        );
        let line = to_rounded_line(&rec).unwrap();
        let back: DetectionRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
        assert_eq!(to_rounded_line(&back).unwrap(), line);
        assert!(line.contains("\"box\""));
        assert!(!line.contains("stage"));
    }

    #[test]
    fn tube_record_validation_catches_disorder() {
        let mut rec = TubeRecord {
            video_id: "v000".into(),
            class: 0,
            score: 0.5,
            elements: vec![
                TubeElementRecord {
                    frame: 2,
                    bbox: [0.0, 0.0, 1.0, 1.0],
                    score: 0.5,
                },
                TubeElementRecord {
                    frame: 1,
                    bbox: [0.0, 0.0, 1.0, 1.0],
                    score: 0.5,
                },
            ],
        };
        assert!(rec.validate("t").is_err());
        rec.elements[1].frame = 3;
        assert!(rec.validate("t").is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let line = r#"{"video_id":"v0","frame":0,"class":0,"box":[0,0,1,1],"score":0.5,"bogus":1}"#;
        assert!(serde_json::from_str::<DetectionRecord>(line).is_err());
    }
}
