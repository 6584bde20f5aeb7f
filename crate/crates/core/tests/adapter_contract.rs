//! Frames as an upstream extraction adapter writes them: camera-only
//! detections, a [3, 12, 20] embedding per frame and the raw scoreboard text.

use std::io::Cursor;

use serde_json::json;
use tatami_core::features::{build_features, lag_features, DctConfig, DctMode};
use tatami_core::interchange::{parse_frame_records, validate_sequence, Entity};
use tatami_core::timer::{parse_timer_string, TimerConfig, TimerSeries};

const SHAPE: [usize; 3] = [3, 12, 20];

fn embedding(seed: usize) -> Vec<f64> {
    (0..SHAPE.iter().product::<usize>())
        .map(|i| ((i * 31 + seed * 17) % 97) as f64 / 97.0 - 0.5)
        .collect()
}

fn adapter_line(i: usize, timer: Option<&str>) -> String {
    let mut v = json!({
        "video_id": "cam2",
        "mat_id": 2,
        "frame_index": i * 25,
        "timestamp_s": i as f64,
        "detections": [
            {"entity": "other", "x": 0.31, "y": 0.52, "w": 0.12, "h": 0.25, "confidence": 0.81},
            {"entity": "other", "x": 0.55, "y": 0.50, "w": 0.11, "h": 0.27, "confidence": 0.77},
        ],
        "embedding": {"shape": SHAPE, "data": embedding(i)},
    });
    if let Some(t) = timer {
        v["timer_raw"] = json!(t);
    }
    v.to_string()
}

fn stream(timers: &[Option<&str>]) -> String {
    timers
        .iter()
        .enumerate()
        .map(|(i, t)| adapter_line(i, *t) + "\n")
        .collect()
}

#[test]
fn adapter_frames_parse_and_validate_clean() {
    let text = stream(&[Some("3:42"), Some("3:41"), None, Some("3:39")]);
    let parsed = parse_frame_records(Cursor::new(text)).unwrap();
    assert!(parsed.warnings.is_empty(), "{:?}", parsed.warnings);
    assert_eq!(parsed.records.len(), 4);
    let r = &parsed.records[0];
    assert_eq!(r.mat_id, 2);
    assert!(r.scene_class.is_none());
    assert!(r.detections.iter().all(|d| d.entity == Entity::Other));
    let emb = r.embedding.as_ref().unwrap();
    assert_eq!(emb.len(), 720);

    let report = validate_sequence(&parsed.records);
    assert!(report.is_clean(), "{:?}", report.errors);
}

#[test]
fn adapter_timer_text_becomes_seconds_remaining() {
    assert_eq!(parse_timer_string("3:42"), Some(222));
    assert_eq!(parse_timer_string("0:05"), Some(5));
    assert_eq!(parse_timer_string("GS"), None);

    let text = stream(&[Some("3:42"), Some("3:41"), Some("??"), Some("3:39")]);
    let records = parse_frame_records(Cursor::new(text)).unwrap().records;
    let series = TimerSeries::from_records(&records, &TimerConfig::default());
    assert_eq!(series.values, vec![Some(222), Some(221), None, Some(219)]);
}

#[test]
fn adapter_embeddings_feed_every_feature_mode() {
    let text = stream(&[None; 6]);
    let records = parse_frame_records(Cursor::new(text)).unwrap().records;
    for (cfg, dim) in [
        (DctConfig::new(DctMode::None, 8), 720),
        (DctConfig::new(DctMode::Dct1d, 8), 8),
        (DctConfig::new(DctMode::Dctnd, 8), 8),
        (DctConfig::new(DctMode::Dct1d, 720), 720),
    ] {
        let m = build_features(&records, &cfg, None).unwrap();
        assert_eq!((m.len(), m.dim()), (6, Some(dim)), "{}", cfg.label());
        assert!(m.rows().iter().flatten().all(|v| v.is_finite()));
        let lagged = lag_features(&m, 2);
        assert_eq!((lagged.len(), lagged.dim()), (4, Some(3 * dim)));
    }
}

#[test]
fn malformed_adapter_frames_are_rejected() {
    let mut bad_shape: serde_json::Value = serde_json::from_str(&adapter_line(0, None)).unwrap();
    bad_shape["embedding"]["shape"] = json!([3, 12, 21]);
    assert!(parse_frame_records(Cursor::new(bad_shape.to_string())).is_err());

    let mut bad_box: serde_json::Value = serde_json::from_str(&adapter_line(0, None)).unwrap();
    bad_box["detections"][0]["w"] = json!(1.5);
    let outcome =
        parse_frame_records(Cursor::new(bad_box.to_string())).map(|p| validate_sequence(&p.records).is_clean());
    assert!(!matches!(outcome, Ok(true)));

    let backwards = adapter_line(1, None) + "\n" + &adapter_line(0, None) + "\n";
    let records = parse_frame_records(Cursor::new(backwards)).unwrap().records;
    assert!(!validate_sequence(&records).is_clean());
}
