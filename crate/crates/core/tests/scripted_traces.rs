//! Session behavior on scripted simulator traces.

use vgaze_core::calibration::TransformSource;
use vgaze_core::pipeline::{run, Corpus, RunOutput};
use vgaze_core::session::Note;
use vgaze_core::sim::{generate_scenario, simulate_rough_gaze, OffsetChange, ScenarioConfig, Segment, SegmentKind};
use vgaze_core::{Attention, Point, RunConfig};

fn scenario(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_json(text).unwrap()
}

fn execute(config: &ScenarioConfig, run_config: &RunConfig) -> RunOutput {
    let s = generate_scenario(config).unwrap();
    let trace = simulate_rough_gaze(&s.truth, config);
    run(&Corpus::from_scenario(&s, &trace), run_config, 1).unwrap()
}

fn opened(out: &RunOutput) -> Vec<(u64, TransformSource, Attention, usize, bool)> {
    out.notes
        .iter()
        .filter_map(|n| match *n {
            Note::WindowOpened {
                frame_index,
                source,
                attention,
                target_len,
                restarted,
            } => Some((frame_index, source, attention, target_len, restarted)),
            _ => None,
        })
        .collect()
}

fn frame_of(t_ms: f64) -> u64 {
    (t_ms * 30.0 / 1000.0).round() as u64
}

#[test]
fn pose_jump_opens_head_move_window_and_recalibrates() {
    let out = execute(
        &scenario(include_str!("../../../scenarios/pose_jump.json")),
        &RunConfig::default(),
    );
    assert!(out.notes.contains(&Note::HeadMove { t_ms: 2000.0 }));
    assert_eq!(
        opened(&out),
        vec![
            (0, TransformSource::Initial, Attention::BottomUp, 10, false),
            (60, TransformSource::HeadMove, Attention::TopDown, 10, false),
        ]
    );
    let sources: Vec<_> = out.transforms.iter().map(|t| (t.source, frame_of(t.computed_at_ms))).collect();
    // completion is checked when the frame after the tenth accepted one arrives
    assert_eq!(sources, vec![(TransformSource::Initial, 10), (TransformSource::HeadMove, 70)]);
    let vc = out.transforms[1].offset();
    assert!(vc.dist(Point::new(0.1, -0.05)) < 0.02, "{vc:?}");
}

#[test]
fn hard_cut_opens_bottom_up_window_of_five() {
    let out = execute(
        &scenario(include_str!("../../../scenarios/hard_cut.json")),
        &RunConfig::default(),
    );
    let cuts: Vec<_> = out
        .notes
        .iter()
        .filter_map(|n| match *n {
            Note::Cut { frame_index, distance } => Some((frame_index, distance)),
            _ => None,
        })
        .collect();
    assert_eq!(cuts.len(), 1);
    assert_eq!(cuts[0].0, 30);
    assert!(cuts[0].1 >= 20, "distance {}", cuts[0].1);
    assert!(opened(&out).contains(&(30, TransformSource::SceneCut, Attention::BottomUp, 5, false)));
    for s in &out.selections[30..35] {
        assert_eq!(s.attention, Attention::BottomUp, "frame {}", s.frame_index);
    }
    assert_eq!(out.selections[35].attention, Attention::TopDown);
    let cut_transform = out.transforms.iter().find(|t| t.source == TransformSource::SceneCut).unwrap();
    assert_eq!(frame_of(cut_transform.computed_at_ms), 35);
}

#[test]
fn head_move_inside_bottom_up_window_skips_next_cut() {
    let config = ScenarioConfig {
        seed: 21,
        segments: vec![
            Segment {
                kind: SegmentKind::SingleBlob,
                length_frames: 30,
                cut: false,
            },
            Segment {
                kind: SegmentKind::SingleBlob,
                length_frames: 3,
                cut: true,
            },
            Segment {
                kind: SegmentKind::SingleBlob,
                length_frames: 60,
                cut: true,
            },
        ],
        offsets: vec![
            OffsetChange {
                from_frame: 0,
                offset: Point::new(0.1, 0.0),
            },
            OffsetChange {
                from_frame: 31,
                offset: Point::new(-0.1, 0.0),
            },
        ],
        ..ScenarioConfig::default()
    };
    let out = execute(&config, &RunConfig::default());
    let windows = opened(&out);
    assert!(windows.contains(&(30, TransformSource::SceneCut, Attention::BottomUp, 5, false)));
    assert!(windows.contains(&(31, TransformSource::HeadMove, Attention::BottomUp, 10, true)));
    assert!(out.notes.iter().any(|n| matches!(n, Note::Cut { frame_index: 33, .. })));
    assert!(out.notes.contains(&Note::CutSkipped { frame_index: 33 }));
    let scene_cut_windows_after_head_move = windows
        .iter()
        .filter(|w| w.1 == TransformSource::SceneCut && w.0 >= 31 && w.0 < 36)
        .count();
    assert_eq!(scene_cut_windows_after_head_move, 0);
    assert_eq!(out.transforms.last().unwrap().source, TransformSource::HeadMove);
}

#[test]
fn mid_window_head_move_restarts_collection() {
    let mut config = scenario(include_str!("../../../scenarios/pose_jump.json"));
    config.pose_jumps = vec![vgaze_core::sim::PoseJump {
        frame: 64,
        magnitude: 0.05,
    }];
    let out = execute(&config, &RunConfig::default());
    let windows = opened(&out);
    assert!(windows.contains(&(60, TransformSource::HeadMove, Attention::TopDown, 10, false)));
    assert!(windows.contains(&(64, TransformSource::HeadMove, Attention::TopDown, 10, true)));
    let head_moves: Vec<_> = out
        .transforms
        .iter()
        .filter(|t| t.source == TransformSource::HeadMove)
        .map(|t| frame_of(t.computed_at_ms))
        .collect();
    assert_eq!(head_moves, vec![74]);
}

#[test]
fn single_offset_without_triggers_calibrates_once() {
    let out = execute(
        &scenario(include_str!("../../../scenarios/single_offset.json")),
        &RunConfig::default(),
    );
    assert_eq!(out.transforms.len(), 1);
    assert_eq!(out.transforms[0].source, TransformSource::Initial);
}

#[test]
fn three_pose_jumps_give_three_head_move_transforms() {
    let config = scenario(include_str!("../../../scenarios/three_jumps.json"));
    let out = execute(&config, &RunConfig::default());
    let n = out.transforms.iter().filter(|t| t.source == TransformSource::HeadMove).count();
    assert!(n >= 3, "{n} head-move transforms");

    let frozen = execute(
        &config,
        &RunConfig {
            recalibration: false,
            ..RunConfig::default()
        },
    );
    assert!(frozen.transforms.len() <= 1);
}

#[test]
fn content_without_salient_objects_abandons_and_reopens() {
    let config = ScenarioConfig {
        seed: 5,
        segments: vec![Segment {
            kind: SegmentKind::LargeRegion,
            length_frames: 100,
            cut: false,
        }],
        ..ScenarioConfig::default()
    };
    let out = execute(&config, &RunConfig::default());
    assert!(out.transforms.is_empty());
    let abandoned: Vec<u64> = out
        .notes
        .iter()
        .filter_map(|n| match *n {
            Note::WindowAbandoned { frame_index, .. } => Some(frame_index),
            _ => None,
        })
        .collect();
    // cap is 4 × 10 frames; a restarted window re-evaluates its attention
    assert_eq!(abandoned, vec![40, 80]);
    assert!(opened(&out).contains(&(40, TransformSource::Initial, Attention::TopDown, 10, true)));
    assert!(out.records.iter().all(|r| match r {
        vgaze_core::io::OutputRecord::Gaze { calibrated, .. } => !calibrated,
        _ => false,
    }));
}

#[test]
fn emission_is_ordered_and_uses_one_transform_at_a_time() {
    let config = scenario(include_str!("../../../scenarios/mixed.json"));
    let s = generate_scenario(&config).unwrap();
    let trace = simulate_rough_gaze(&s.truth, &config);
    let out = run(&Corpus::from_scenario(&s, &trace), &RunConfig::default(), 1).unwrap();
    let mut last_t = f64::NEG_INFINITY;
    let mut current: Option<[f64; 2]> = None;
    let mut raw = trace.samples.iter();
    for r in &out.records {
        match r {
            vgaze_core::io::OutputRecord::Transform { vc, .. } => current = Some(*vc),
            vgaze_core::io::OutputRecord::Gaze {
                t_ms, x, y, calibrated, ..
            } => {
                assert!(*t_ms >= last_t);
                last_t = *t_ms;
                let rough = raw.next().unwrap();
                assert_eq!(*t_ms, rough.timestamp_ms);
                assert_eq!(*calibrated, current.is_some());
                let [dx, dy] = current.unwrap_or([0.0, 0.0]);
                assert_eq!((*x, *y), (rough.position.x + dx, rough.position.y + dy));
            }
        }
    }
    assert!(raw.next().is_none());
}

#[test]
fn thread_count_does_not_change_output() {
    let config = scenario(include_str!("../../../scenarios/mixed.json"));
    let s = generate_scenario(&config).unwrap();
    let trace = simulate_rough_gaze(&s.truth, &config);
    let corpus = Corpus::from_scenario(&s, &trace);
    let one = run(&corpus, &RunConfig::default(), 1).unwrap();
    let four = run(&corpus, &RunConfig::default(), 4).unwrap();
    assert_eq!(one.records, four.records);
    assert_eq!(one.selections, four.selections);
}
