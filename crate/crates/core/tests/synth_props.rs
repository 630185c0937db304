use crackbench_core::dataset::{DatasetManifest, ImageRecord, Split};
use crackbench_core::metrics::{evaluate, iou, Averaging, EvalConfig};
use crackbench_core::synth::{
    corrupt_predictions, generate_dataset, ConfidenceRule, CorruptionSpec, Origin, SceneSpec, Span,
};
use crackbench_core::ClassMap;
use proptest::prelude::*;

fn scene_spec(seed: u64) -> SceneSpec {
    SceneSpec { width: 128, height: 96, horizon_row: 30, class_count: 3, seed, ..SceneSpec::default() }
}

fn manifest_of(spec: &SceneSpec, n: usize) -> DatasetManifest {
    let records = generate_dataset(spec, n)
        .unwrap()
        .into_iter()
        .map(|s| ImageRecord {
            annotation: s.annotation,
            image_path: String::new(),
            annotation_path: String::new(),
            split: Split::Test,
        })
        .collect();
    DatasetManifest::new(records, ClassMap::new(["a", "b", "c"]).unwrap()).unwrap()
}

#[test]
fn generation_is_deterministic() {
    let spec = scene_spec(77);
    assert_eq!(generate_dataset(&spec, 4).unwrap(), generate_dataset(&spec, 4).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn evaluated_counts_close_over_construction(
        seed in any::<u64>(),
        drop in 0usize..4,
        inject in 0usize..6,
        jitter in prop::sample::select(vec![0.0, 1.0, 3.0]),
    ) {
        let m = manifest_of(&SceneSpec { crack_count: Span::new(1, 3), ..scene_spec(seed) }, 6);
        let gt: Vec<_> = m.records().iter().map(|r| r.annotation.clone()).collect();
        let spec = CorruptionSpec {
            drop_count: drop,
            inject_count: inject,
            jitter,
            min_iou: 0.6,
            confidence: ConfidenceRule::Uniform { lo: 0.3, hi: 1.0 },
            class_count: 3,
            seed,
        };
        let c = corrupt_predictions(&gt, &spec).unwrap();

        // Precondition: each kept detection overlaps only its own source at the IoU threshold.
        let mut clean = true;
        for (d, o) in c.detections.iter().zip(&c.origins) {
            if let Origin::Kept { image_index, box_index } = *o {
                for (k, g) in gt[image_index].boxes.iter().enumerate() {
                    let hit = g.class_id == d.bbox.class_id && iou(&d.bbox, g) >= 0.5;
                    if hit != (k == box_index) {
                        clean = false;
                    }
                }
            }
        }
        prop_assume!(clean);

        let cfg = EvalConfig { averaging: Averaging::Micro, ..EvalConfig::default() };
        let report = evaluate(&c.detections, &m, Split::Test, &cfg).unwrap();
        prop_assert_eq!(report.counts, c.intended);
    }
}

#[test]
fn boxes_stay_below_horizon_over_many_seeds() {
    for seed in 0..500 {
        let spec = SceneSpec { width: 96, height: 80, horizon_row: 36, ..scene_spec(seed) };
        let scene = crackbench_core::synth::generate_indexed(&spec, 0).unwrap();
        for b in &scene.annotation.boxes {
            assert!(b.y_min >= 36.0, "seed {seed}: {b:?}");
        }
    }
}

fn ten_boxes() -> DatasetManifest {
    manifest_of(&SceneSpec { crack_count: Span::new(1, 1), ..scene_spec(11) }, 10)
}

#[test]
fn perfect_predictions_score_one() {
    let m = ten_boxes();
    let gt: Vec<_> = m.records().iter().map(|r| r.annotation.clone()).collect();
    let c = corrupt_predictions(&gt, &CorruptionSpec { class_count: 3, ..CorruptionSpec::default() }).unwrap();
    let r = evaluate(&c.detections, &m, Split::Test, &EvalConfig::default()).unwrap();
    assert_eq!((r.map, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
}

#[test]
fn drop_two_inject_three() {
    let m = ten_boxes();
    assert_eq!(m.total_boxes(), 10);
    let gt: Vec<_> = m.records().iter().map(|r| r.annotation.clone()).collect();
    let spec = CorruptionSpec { drop_count: 2, inject_count: 3, class_count: 3, seed: 5, ..CorruptionSpec::default() };
    let c = corrupt_predictions(&gt, &spec).unwrap();
    let cfg = EvalConfig { averaging: Averaging::Micro, ..EvalConfig::default() };
    let r = evaluate(&c.detections, &m, Split::Test, &cfg).unwrap();
    assert_eq!((r.counts.tp, r.counts.fp, r.counts.fn_), (8, 3, 2));
    assert_eq!(r.precision, 8.0 / 11.0);
    assert_eq!(r.recall, 0.8);
}
