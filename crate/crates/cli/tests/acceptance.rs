//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one pass/fail line (`cargo test --test acceptance -- --nocapture`).

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use actdet::eval::{frame_ap, frame_map, video_map, DetBox, GtBox, VideoTube};
use actdet::fusion::{
    fuse, message_backward, message_forward, message_forward_cached, FeatureMap, MessageParams,
};
use actdet::geometry::{nms, BBox, ScoredBox};
use actdet::harness::{
    link_all_tubes, run_experiment, run_pipeline, video_name, HeadConfig, ScenarioConfig,
    StreamNoise, SyntheticWorld,
};
use actdet::refine::{refine_tube_with_scores, RefineParams};
use actdet_cli::{cmd_eval, cmd_generate, cmd_run, EvalLevel};

macro_rules! check {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

// ---------------------------------------------------------------------------
// pinned scenarios
// ---------------------------------------------------------------------------

/// Complementary-miss scenario: disjoint 30% per-stream misses, 2 px jitter,
/// 0.5 spurious boxes per frame.
fn cooperation_scenario() -> ScenarioConfig {
    let noise = StreamNoise {
        miss_prob: 0.3,
        jitter_sigma: 2.0,
        fp_rate: 0.5,
        boundary_pad: 0,
    };
    ScenarioConfig {
        num_seeds: 20,
        seed: 20260809,
        box_size_min: 6.0,
        box_size_max: 12.0,
        head: HeadConfig {
            regression_fraction: 0.3,
            jitter_sigma: 0.25,
            score_noise: 0.02,
        },
        rgb: noise,
        flow: noise,
        complementarity: 0.0,
        ..ScenarioConfig::default()
    }
}

/// Boundary-pad scenario: three false boundary frames per tube side, short
/// temporal extents so pre-refinement tube overlap straddles 0.5.
fn refinement_scenario() -> ScenarioConfig {
    let noise = StreamNoise {
        miss_prob: 0.0,
        jitter_sigma: 1.0,
        fp_rate: 0.25,
        boundary_pad: 3,
    };
    ScenarioConfig {
        num_seeds: 20,
        seed: 20260809,
        tube_len_min: 4,
        tube_len_max: 8,
        rgb: noise,
        flow: noise,
        ..ScenarioConfig::default()
    }
}

/// Noise-free world whose only corruption is the false boundary frames.
fn oracle_boundary_scenario() -> ScenarioConfig {
    let noise = StreamNoise {
        miss_prob: 0.0,
        jitter_sigma: 0.0,
        fp_rate: 0.0,
        boundary_pad: 3,
    };
    ScenarioConfig {
        num_videos: 6,
        tubes_per_video: 1,
        tube_len_min: 6,
        tube_len_max: 10,
        head: HeadConfig {
            regression_fraction: 0.5,
            jitter_sigma: 0.0,
            score_noise: 0.0,
        },
        rgb: noise,
        flow: noise,
        ..ScenarioConfig::default()
    }
}

// ---------------------------------------------------------------------------
// criterion 1: analytic gradients vs central finite differences
// ---------------------------------------------------------------------------

fn criterion_1_gradients() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let step = 1e-5;
    let tolerance = 1e-5;
    let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1.0);
    let mut instances = 0;
    let mut max_rel: f64 = 0.0;

    while instances < 50 {
        let channels = *[1usize, 2, 4][..].get(rng.random_range(0..3)).unwrap();
        let divisors: Vec<usize> = (1..=channels).filter(|r| channels % r == 0).collect();
        let reduction = divisors[rng.random_range(0..divisors.len())];
        let h = rng.random_range(1..=6);
        let w = rng.random_range(1..=6);

        let mut params = MessageParams::<f64>::zeros(channels, reduction)
            .map_err(|e| format!("params: {e}"))?;
        for v in params
            .w1
            .iter_mut()
            .chain(params.b1.iter_mut())
            .chain(params.w2.iter_mut())
            .chain(params.b2.iter_mut())
        {
            *v = rng.random_range(-1.0..1.0);
        }
        let src = FeatureMap::from_fn(channels, h, w, |_, _, _| rng.random_range(-1.0..1.0));
        let weights = FeatureMap::from_fn(channels, h, w, |_, _, _| rng.random_range(-1.0..1.0));

        let (_, cache) = message_forward_cached(&src, &params).map_err(|e| e.to_string())?;
        // keep every pre-activation clear of the relu kink at the probe step
        if cache
            .pre_activations()
            .iter()
            .any(|z| z.abs() < 1e-3)
        {
            continue;
        }
        instances += 1;

        let loss = |p: &MessageParams<f64>, s: &FeatureMap<f64>| -> f64 {
            let out = message_forward(s, p).unwrap();
            out.values()
                .iter()
                .zip(weights.values())
                .map(|(o, g)| o * g)
                .sum()
        };
        let (grad_src, grads) =
            message_backward(&weights, &cache, &params).map_err(|e| e.to_string())?;

        let mut probe_param = |select: &dyn Fn(&mut MessageParams<f64>) -> &mut Vec<f64>,
                               analytic: &[f64]|
         -> Result<(), String> {
            for i in 0..analytic.len() {
                let mut plus = params.clone();
                select(&mut plus)[i] += step;
                let mut minus = params.clone();
                select(&mut minus)[i] -= step;
                let fd = (loss(&plus, &src) - loss(&minus, &src)) / (2.0 * step);
                let r = rel(analytic[i], fd);
                max_rel = max_rel.max(r);
                check!(
                    r < tolerance,
                    "instance {instances}: param gradient {i} off by {r:.2e} ({} vs {fd})",
                    analytic[i]
                );
            }
            Ok(())
        };
        probe_param(&|p| &mut p.w1, &grads.w1)?;
        probe_param(&|p| &mut p.b1, &grads.b1)?;
        probe_param(&|p| &mut p.w2, &grads.w2)?;
        probe_param(&|p| &mut p.b2, &grads.b2)?;

        for i in 0..src.values().len() {
            let mut plus = src.clone();
            plus.values_mut()[i] += step;
            let mut minus = src.clone();
            minus.values_mut()[i] -= step;
            let fd = (loss(&params, &plus) - loss(&params, &minus)) / (2.0 * step);
            let r = rel(grad_src.values()[i], fd);
            max_rel = max_rel.max(r);
            check!(
                r < tolerance,
                "instance {instances}: source gradient {i} off by {r:.2e}"
            );
        }
    }
    let elapsed = start.elapsed();
    check!(
        elapsed.as_secs_f64() < 5.0,
        "gradient sweep took {elapsed:?} (budget 5 s)"
    );
    Ok(format!(
        "{instances} instances, max relative error {max_rel:.2e}, {elapsed:?}"
    ))
}

// ---------------------------------------------------------------------------
// criterion 2: zero-initialized fusion is exactly the identity
// ---------------------------------------------------------------------------

fn criterion_2_fusion_identity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for trial in 0..20 {
        let channels = rng.random_range(1..=6);
        let divisors: Vec<usize> = (1..=channels).filter(|r| channels % r == 0).collect();
        let reduction = divisors[rng.random_range(0..divisors.len())];
        let h = rng.random_range(1..=7);
        let w = rng.random_range(1..=7);
        let params = MessageParams::<f64>::init(channels, reduction, &mut rng)
            .map_err(|e| e.to_string())?;
        let target = FeatureMap::from_fn(channels, h, w, |_, _, _| rng.random_range(-5.0..5.0));
        let src = FeatureMap::from_fn(channels, h, w, |_, _, _| rng.random_range(-5.0..5.0));
        let fused = fuse(&target, &src, &params).map_err(|e| e.to_string())?;
        check!(
            fused == target,
            "trial {trial}: fusion with zero w2/b2 changed the target"
        );
    }
    Ok("20 random shapes, bit-exact identity".into())
}

// ---------------------------------------------------------------------------
// criterion 3: NMS vs brute-force greedy oracle
// ---------------------------------------------------------------------------

fn iou_oracle(a: BBox<f64>, b: BBox<f64>) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    let union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn nms_oracle(dets: &[ScoredBox<f64>], threshold: f64) -> Vec<ScoredBox<f64>> {
    let mut remaining: Vec<(usize, ScoredBox<f64>)> = dets.iter().copied().enumerate().collect();
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            if remaining[i].1.score > remaining[best].1.score
                || (remaining[i].1.score == remaining[best].1.score
                    && remaining[i].0 < remaining[best].0)
            {
                best = i;
            }
        }
        let (_, winner) = remaining.remove(best);
        kept.push(winner);
        remaining.retain(|(_, d)| {
            d.class_id != winner.class_id || iou_oracle(d.bbox, winner.bbox) <= threshold
        });
    }
    kept
}

fn random_box(rng: &mut ChaCha8Rng) -> BBox<f64> {
    let x: f64 = rng.random_range(0.0..20.0);
    let y: f64 = rng.random_range(0.0..20.0);
    BBox::new(
        x,
        y,
        x + rng.random_range(0.5..12.0),
        y + rng.random_range(0.5..12.0),
    )
}

fn criterion_3_nms_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for trial in 0..1000 {
        let n = rng.random_range(0..=8);
        let dets: Vec<ScoredBox<f64>> = (0..n)
            .map(|_| {
                ScoredBox::new(
                    random_box(&mut rng),
                    rng.random_range(0..2),
                    rng.random_range(0.0..=1.0),
                )
            })
            .collect();
        let threshold: f64 = rng.random_range(0.0..=1.0);
        check!(
            nms(&dets, threshold) == nms_oracle(&dets, threshold),
            "trial {trial}: greedy NMS diverged from the oracle at threshold {threshold}"
        );
    }
    Ok("1000 instances with <= 8 boxes, exact agreement".into())
}

// ---------------------------------------------------------------------------
// criterion 4: frame AP vs brute-force PR-curve oracle
// ---------------------------------------------------------------------------

fn frame_ap_oracle(
    dets: &[DetBox<f64>],
    gts: &[GtBox<f64>],
    class_id: usize,
    delta: f64,
) -> Option<f64> {
    let mut pool: Vec<(&GtBox<f64>, bool)> = gts
        .iter()
        .filter(|g| g.class_id == class_id)
        .map(|g| (g, false))
        .collect();
    if pool.is_empty() {
        return None;
    }
    let num_gt = pool.len();
    let mut ranked: Vec<(usize, &DetBox<f64>)> = dets
        .iter()
        .enumerate()
        .filter(|(_, d)| d.det.class_id == class_id)
        .collect();
    ranked.sort_by(|a, b| {
        b.1.det
            .score
            .partial_cmp(&a.1.det.score)
            .unwrap()
            .then(a.0.cmp(&b.0))
    });
    let mut tps = Vec::new();
    for (_, d) in &ranked {
        let mut best: Option<(usize, f64)> = None;
        for (i, (g, taken)) in pool.iter().enumerate() {
            if *taken || g.video != d.video || g.frame != d.frame {
                continue;
            }
            let ov = iou_oracle(d.det.bbox, g.bbox);
            if best.map(|(_, b)| ov > b).unwrap_or(true) {
                best = Some((i, ov));
            }
        }
        match best {
            Some((i, ov)) if ov > delta => {
                pool[i].1 = true;
                tps.push(true);
            }
            _ => tps.push(false),
        }
    }
    let points: Vec<(f64, f64)> = tps
        .iter()
        .scan(0usize, |tp, &is_tp| {
            if is_tp {
                *tp += 1;
            }
            Some(*tp)
        })
        .enumerate()
        .map(|(rank, tp)| (tp as f64 / num_gt as f64, tp as f64 / (rank + 1) as f64))
        .collect();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for i in 0..points.len() {
        if points[i].0 > prev {
            let env = points[i..]
                .iter()
                .map(|&(_, p)| p)
                .fold(f64::NEG_INFINITY, f64::max);
            ap += (points[i].0 - prev) * env;
            prev = points[i].0;
        }
    }
    Some(ap)
}

fn criterion_4_ap_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut max_err: f64 = 0.0;
    for trial in 0..500 {
        let nd = rng.random_range(0..=20);
        let ng = rng.random_range(1..=8);
        let dets: Vec<DetBox<f64>> = (0..nd)
            .map(|_| DetBox {
                video: "v".into(),
                frame: rng.random_range(0..3),
                det: ScoredBox::new(
                    random_box(&mut rng),
                    rng.random_range(0..2),
                    rng.random_range(0.0..=1.0),
                ),
            })
            .collect();
        let gts: Vec<GtBox<f64>> = (0..ng)
            .map(|_| GtBox {
                video: "v".into(),
                frame: rng.random_range(0..3),
                class_id: rng.random_range(0..2),
                bbox: random_box(&mut rng),
            })
            .collect();
        let delta: f64 = rng.random_range(0.05..0.95);
        for class_id in 0..2 {
            match (
                frame_ap(&dets, &gts, class_id, delta),
                frame_ap_oracle(&dets, &gts, class_id, delta),
            ) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    let err = (a - b).abs();
                    max_err = max_err.max(err);
                    check!(
                        err < 1e-12,
                        "trial {trial} class {class_id}: AP {a} vs oracle {b}"
                    );
                }
                other => check!(false, "trial {trial}: definedness mismatch {other:?}"),
            }
        }
    }
    Ok(format!(
        "500 instances with <= 20 detections, max |diff| {max_err:.2e}"
    ))
}

// ---------------------------------------------------------------------------
// criterion 5: mAP ordering across thresholds 0.2 / 0.5 / 0.75
// ---------------------------------------------------------------------------

fn criterion_5_threshold_monotonicity() -> Result<String, String> {
    // frame level on the cooperation fixture
    let cfg = cooperation_scenario();
    let world = SyntheticWorld::generate(&cfg, cfg.seed).map_err(|e| e.to_string())?;
    let gt = world.gt_index();
    let output =
        run_pipeline(&cfg, cfg.seed, &gt, &world.proposal_index()).map_err(|e| e.to_string())?;
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for v in 0..cfg.num_videos {
        for f in 0..cfg.frames_per_video {
            for &(bbox, class_id) in gt.at(v, f) {
                gts.push(GtBox {
                    video: video_name(v),
                    frame: f,
                    class_id,
                    bbox,
                });
            }
            for &det in &output.combined[v][cfg.cooperation.num_stages][f] {
                dets.push(DetBox {
                    video: video_name(v),
                    frame: f,
                    det,
                });
            }
        }
    }
    let frame_maps: Vec<f64> = [0.2, 0.5, 0.75]
        .iter()
        .map(|&d| frame_map(&dets, &gts, d).map)
        .collect();
    check!(
        frame_maps[0] >= frame_maps[1] && frame_maps[1] >= frame_maps[2],
        "frame-level ordering violated: {frame_maps:?}"
    );

    // video level on the refinement fixture
    let cfg = refinement_scenario();
    let world = SyntheticWorld::generate(&cfg, cfg.seed).map_err(|e| e.to_string())?;
    let gt = world.gt_index();
    let output =
        run_pipeline(&cfg, cfg.seed, &gt, &world.proposal_index()).map_err(|e| e.to_string())?;
    let link = cfg.link.params();
    let tubes: Vec<VideoTube<f64>> = (0..cfg.num_videos)
        .flat_map(|v| {
            link_all_tubes(&output.final_frames(v), cfg.num_classes, &link)
                .into_iter()
                .map(move |tube| VideoTube {
                    video: video_name(v),
                    tube,
                })
        })
        .collect();
    let gt_tubes = world.gt_tubes();
    let video_maps: Vec<f64> = [0.2, 0.5, 0.75]
        .iter()
        .map(|&d| video_map(&tubes, &gt_tubes, d).map)
        .collect();
    check!(
        video_maps[0] >= video_maps[1] && video_maps[1] >= video_maps[2],
        "video-level ordering violated: {video_maps:?}"
    );
    Ok(format!(
        "frame {frame_maps:?}, video {video_maps:?}"
    ))
}

// ---------------------------------------------------------------------------
// criterion 6: cooperation trend over stages
// ---------------------------------------------------------------------------

fn criterion_6_cooperation_trend() -> Result<String, String> {
    let start = Instant::now();
    let cfg = cooperation_scenario();
    let result = run_experiment(&cfg, Some(4)).map_err(|e| e.to_string())?;
    let means = &result.stage_frame_map_mean;
    check!(means.len() == 5, "expected stages 0..4, got {means:?}");
    for t in 1..means.len() {
        check!(
            means[t] >= means[t - 1] - 0.005,
            "stage {t} dropped beyond tolerance: {:?} -> {:?}",
            means[t - 1],
            means[t]
        );
    }
    let gain = means[4] - means[0];
    check!(
        gain >= 0.02,
        "stage 4 gain {gain:.4} below the 2-point requirement ({means:?})"
    );
    let elapsed = start.elapsed();
    check!(
        elapsed.as_secs_f64() < 180.0,
        "trend run took {elapsed:?} (budget 3 min)"
    );
    Ok(format!(
        "20 seeds, stage means {:?}, gain {:.1} points, {elapsed:?}",
        means
            .iter()
            .map(|m| (m * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>(),
        gain * 100.0
    ))
}

// ---------------------------------------------------------------------------
// criterion 7: refinement trend and oracle boundary recovery
// ---------------------------------------------------------------------------

fn criterion_7_refinement_trend() -> Result<String, String> {
    let cfg = refinement_scenario();
    let result = run_experiment(&cfg, Some(4)).map_err(|e| e.to_string())?;
    let delta = result.video_map_after_mean - result.video_map_before_mean;
    check!(
        delta >= 0.03,
        "refinement gain {delta:.4} below the 3-point requirement (before {:.4}, after {:.4})",
        result.video_map_before_mean,
        result.video_map_after_mean
    );

    // oracle actionness, window 1: recovered boundaries equal gt extents
    let cfg = oracle_boundary_scenario();
    let world = SyntheticWorld::generate(&cfg, 5).map_err(|e| e.to_string())?;
    let gt = world.gt_index();
    let output = run_pipeline(&cfg, 5, &gt, &world.proposal_index()).map_err(|e| e.to_string())?;
    let link = cfg.link.params();
    let params = RefineParams {
        window: 1,
        tau: 0.5,
        min_seg_len: 2,
    };
    let mut recovered = 0;
    for v in 0..cfg.num_videos {
        let track = &world.videos[v].tracks[0];
        let (lo, hi) = (track.start_frame, track.end_frame());
        let tubes = link_all_tubes(&output.final_frames(v), cfg.num_classes, &link);
        let tube = tubes
            .iter()
            .filter(|t| t.class_id == track.class_id)
            .max_by_key(|t| t.elements.len())
            .ok_or_else(|| format!("video {v}: no linked tube"))?;
        check!(
            tube.start_frame() < lo || tube.end_frame() > hi,
            "video {v}: linked tube has no false boundary frames to trim"
        );
        let scores: Vec<f64> = tube
            .elements
            .iter()
            .map(|e| {
                if e.frame_idx >= lo && e.frame_idx <= hi {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let refined = refine_tube_with_scores(tube, &scores, &params);
        check!(
            refined.len() == 1,
            "video {v}: oracle refinement split the tube into {}",
            refined.len()
        );
        check!(
            refined[0].start_frame() == lo && refined[0].end_frame() == hi,
            "video {v}: boundaries [{}, {}] differ from gt [{lo}, {hi}]",
            refined[0].start_frame(),
            refined[0].end_frame()
        );
        check!(
            refined[0].elements.len() == hi - lo + 1,
            "video {v}: refined tube has interior holes"
        );
        recovered += 1;
    }
    Ok(format!(
        "20 seeds, video mAP {:.3} -> {:.3} (+{:.1} points); oracle recovered {recovered}/{} boundaries exactly",
        result.video_map_before_mean,
        result.video_map_after_mean,
        delta * 100.0,
        cfg.num_videos
    ))
}

// ---------------------------------------------------------------------------
// criterion 8: byte-identical outputs across reruns and thread counts
// ---------------------------------------------------------------------------

fn collect_files(dir: &Path, into: &mut Vec<(String, Vec<u8>)>, base: &Path) -> Result<(), String> {
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(&path, into, base)?;
        } else {
            let rel = path
                .strip_prefix(base)
                .map_err(|e| e.to_string())?
                .to_string_lossy()
                .to_string();
            into.push((rel, fs::read(&path).map_err(|e| e.to_string())?));
        }
    }
    Ok(())
}

fn criterion_8_determinism() -> Result<String, String> {
    let scenario = r#"
num_videos = 6
seed = 42
tube_len_min = 4
tube_len_max = 8

[rgb]
miss_prob = 0.2
jitter_sigma = 1.5
fp_rate = 0.3
boundary_pad = 2

[flow]
miss_prob = 0.2
jitter_sigma = 1.5
fp_rate = 0.3
boundary_pad = 2
"#;
    let run_chain = |threads: usize| -> Result<Vec<(String, Vec<u8>)>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg_path = dir.path().join("scenario.toml");
        fs::write(&cfg_path, scenario).map_err(|e| e.to_string())?;
        let world = dir.path().join("world");
        let run = dir.path().join("run");
        let eval = dir.path().join("eval");
        cmd_generate(&cfg_path, None, &world).map_err(|e| e.to_string())?;
        cmd_run(&world, None, None, None, &run, Some(threads)).map_err(|e| e.to_string())?;
        cmd_eval(
            Some(&run.join("stage_4.jsonl")),
            None,
            &world.join("gt.jsonl"),
            "0.2,0.5,0.75,0.5:0.95",
            EvalLevel::Frame,
            &eval,
        )
        .map_err(|e| e.to_string())?;
        let mut files = Vec::new();
        for sub in [&world, &run, &eval] {
            collect_files(sub, &mut files, dir.path())?;
        }
        files.sort_by(|a, b| a.0.cmp(&b.0));
        check!(files.len() >= 12, "expected a full output tree");
        Ok(files)
    };
    let first = run_chain(1)?;
    let second = run_chain(1)?;
    let forked = run_chain(4)?;
    check!(
        first == second,
        "rerun with one thread produced different bytes"
    );
    check!(
        first == forked,
        "thread counts 1 and 4 produced different bytes"
    );
    Ok(format!(
        "{} files byte-identical across reruns and thread counts 1/4",
        first.len()
    ))
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance() {
    let suite_start = Instant::now();
    let criteria: Vec<(&str, fn() -> Result<String, String>)> = vec![
        ("1 gradient correctness", criterion_1_gradients),
        ("2 fusion identity", criterion_2_fusion_identity),
        ("3 nms oracle equivalence", criterion_3_nms_oracle),
        ("4 ap oracle equivalence", criterion_4_ap_oracle),
        ("5 threshold monotonicity", criterion_5_threshold_monotonicity),
        ("6 cooperation trend", criterion_6_cooperation_trend),
        ("7 refinement trend", criterion_7_refinement_trend),
        ("8 determinism", criterion_8_determinism),
    ];
    let mut results = Vec::new();
    for (name, body) in criteria {
        results.push((name, body()));
    }
    // criterion 9: the suite itself stays inside the runtime budget
    let elapsed = suite_start.elapsed();
    results.push((
        "9 suite runtime",
        if elapsed.as_secs_f64() < 300.0 {
            Ok(format!("criteria 1-8 in {elapsed:?} (budget 5 min)"))
        } else {
            Err(format!("criteria 1-8 took {elapsed:?} (budget 5 min)"))
        },
    ));

    let mut failures = Vec::new();
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("criterion {name}: PASS - {detail}"),
            Err(detail) => {
                println!("criterion {name}: FAIL - {detail}");
                failures.push(*name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
