use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use actdet::eval::{frame_map, video_map, DetBox, EvalResult, GtBox, VideoTube};

use crate::error::CmdError;
use crate::formats::{
    fmt_float, read_jsonl, write_csv, write_pretty_json, DetectionRecord, TubeRecord,
};

use super::{ensure_out_dir, load_gt_tubes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalLevel {
    Frame,
    Video,
}

/// One `--delta` token: a single threshold or an averaged band like
/// `0.5:0.95` (step 0.05).
#[derive(Debug, Clone, Copy, PartialEq)]
enum Threshold {
    Single(f64),
    Band(f64, f64),
}

fn parse_thresholds(list: &str) -> Result<Vec<Threshold>, CmdError> {
    let parse_one = |token: &str| -> Result<f64, CmdError> {
        let v: f64 = token
            .trim()
            .parse()
            .map_err(|_| CmdError::validation(format!("bad threshold {token:?}")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(CmdError::validation(format!(
                "threshold {v} outside [0, 1]"
            )));
        }
        Ok(v)
    };
    list.split(',')
        .map(|token| {
            if let Some((a, b)) = token.split_once(':') {
                let (a, b) = (parse_one(a)?, parse_one(b)?);
                if b < a {
                    return Err(CmdError::validation(format!("empty band {token:?}")));
                }
                Ok(Threshold::Band(a, b))
            } else {
                Ok(Threshold::Single(parse_one(token)?))
            }
        })
        .collect()
}

fn band_points(a: f64, b: f64) -> Vec<f64> {
    let mut points = Vec::new();
    let mut i = 0usize;
    loop {
        let v = a + 0.05 * i as f64;
        if v > b + 1e-9 {
            break;
        }
        points.push((v * 100.0).round() / 100.0);
        i += 1;
    }
    points
}

#[derive(Debug, Serialize)]
struct ThresholdReport {
    threshold: String,
    map: f64,
    per_class: BTreeMap<usize, f64>,
    skipped_classes: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    level: String,
    results: Vec<ThresholdReport>,
}

/// Scores detections (frame level) or tubes (video level) against a
/// ground-truth tube file, writing `report.json` and `per_class.csv`.
pub fn cmd_eval(
    dets: Option<&Path>,
    tubes: Option<&Path>,
    gt_path: &Path,
    delta: &str,
    level: EvalLevel,
    out: &Path,
) -> Result<(), CmdError> {
    let thresholds = parse_thresholds(delta)?;
    let gt_tubes = load_gt_tubes(gt_path)?;

    let eval_at: Box<dyn Fn(f64) -> EvalResult<f64>> = match level {
        EvalLevel::Frame => {
            let path = dets.ok_or_else(|| {
                CmdError::validation("frame-level evaluation needs --dets")
            })?;
            if tubes.is_some() {
                return Err(CmdError::validation(
                    "frame-level evaluation takes --dets, not --tubes",
                ));
            }
            let records: Vec<DetectionRecord> = read_jsonl(path)?;
            let det_boxes: Vec<DetBox<f64>> = records
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    r.validate(&format!("{}:{}", path.display(), i + 1))?;
                    Ok(DetBox {
                        video: r.video_id.clone(),
                        frame: r.frame,
                        det: r.scored_box(),
                    })
                })
                .collect::<Result<_, CmdError>>()?;
            let gt_boxes: Vec<GtBox<f64>> = gt_tubes
                .iter()
                .flat_map(|t| {
                    t.elements.iter().map(|&(frame, bbox)| GtBox {
                        video: t.video.clone(),
                        frame,
                        class_id: t.class_id,
                        bbox,
                    })
                })
                .collect();
            Box::new(move |d| frame_map(&det_boxes, &gt_boxes, d))
        }
        EvalLevel::Video => {
            let path = tubes.ok_or_else(|| {
                CmdError::validation("video-level evaluation needs --tubes")
            })?;
            if dets.is_some() {
                return Err(CmdError::validation(
                    "video-level evaluation takes --tubes, not --dets",
                ));
            }
            let records: Vec<TubeRecord> = read_jsonl(path)?;
            let video_tubes: Vec<VideoTube<f64>> = records
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    r.validate(&format!("{}:{}", path.display(), i + 1))?;
                    Ok(VideoTube {
                        video: r.video_id.clone(),
                        tube: r.to_tube(),
                    })
                })
                .collect::<Result<_, CmdError>>()?;
            Box::new(move |d| video_map(&video_tubes, &gt_tubes, d))
        }
    };

    let mut results = Vec::new();
    let mut csv_rows = Vec::new();
    for t in &thresholds {
        match t {
            Threshold::Single(d) => {
                let r = eval_at(*d);
                for (c, ap) in &r.per_class_ap {
                    csv_rows.push(format!("{},{c},{}", fmt_float(*d), fmt_float(*ap)));
                }
                results.push(ThresholdReport {
                    threshold: fmt_float(*d),
                    map: r.map,
                    per_class: r.per_class_ap.into_iter().collect(),
                    skipped_classes: r.skipped_classes,
                });
            }
            Threshold::Band(a, b) => {
                let points = band_points(*a, *b);
                let rs: Vec<EvalResult<f64>> = points.iter().map(|&d| eval_at(d)).collect();
                let n = rs.len() as f64;
                let map = rs.iter().map(|r| r.map).sum::<f64>() / n;
                let mut per_class: BTreeMap<usize, f64> = BTreeMap::new();
                for r in &rs {
                    for (c, ap) in &r.per_class_ap {
                        *per_class.entry(*c).or_insert(0.0) += ap / n;
                    }
                }
                let label = format!("{}:{}", fmt_float(*a), fmt_float(*b));
                for (c, ap) in &per_class {
                    csv_rows.push(format!("{label},{c},{}", fmt_float(*ap)));
                }
                results.push(ThresholdReport {
                    threshold: label,
                    map,
                    per_class,
                    skipped_classes: rs
                        .first()
                        .map(|r| r.skipped_classes.clone())
                        .unwrap_or_default(),
                });
            }
        }
    }

    ensure_out_dir(out)?;
    write_pretty_json(
        &out.join("report.json"),
        &EvalReport {
            level: match level {
                EvalLevel::Frame => "frame".into(),
                EvalLevel::Video => "video".into(),
            },
            results,
        },
    )?;
    write_csv(&out.join("per_class.csv"), "threshold,class,ap", &csv_rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_specs_parse() {
        assert_eq!(
            parse_thresholds("0.5").unwrap(),
            vec![Threshold::Single(0.5)]
        );
        assert_eq!(
            parse_thresholds("0.2,0.5:0.95").unwrap(),
            vec![Threshold::Single(0.2), Threshold::Band(0.5, 0.95)]
        );
        assert!(parse_thresholds("1.5").is_err());
        assert!(parse_thresholds("nope").is_err());
        assert!(parse_thresholds("0.9:0.5").is_err());
    }

    #[test]
    fn band_covers_coco_points() {
        let points = band_points(0.5, 0.95);
        assert_eq!(points.len(), 10);
        assert_eq!(points[0], 0.5);
        assert_eq!(points[9], 0.95);
    }
}
