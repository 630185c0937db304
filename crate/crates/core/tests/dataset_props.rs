use crackbench_core::annotation::{AnnotatedImage, BoundingBox, ClassMap};
use crackbench_core::dataset::{
    balance_test_split, class_histogram, merge_classes, split_dataset, split_histogram, DatasetManifest, ImageRecord,
    MergeRule, Split, SplitRatios,
};
use crackbench_core::SplitMix64;
use proptest::prelude::*;

const LABELS: [&str; 7] = ["D00", "D10", "D20", "D40", "D43", "D44", "D50"];

fn records(class_lists: &[Vec<usize>]) -> Vec<ImageRecord> {
    class_lists
        .iter()
        .enumerate()
        .map(|(i, classes)| {
            let boxes = classes
                .iter()
                .enumerate()
                .map(|(k, &c)| BoundingBox::new(k as f64, k as f64, k as f64 + 3.5, k as f64 + 2.0, c).unwrap())
                .collect();
            ImageRecord {
                annotation: AnnotatedImage::new(format!("img_{i:05}"), 64, 64).with_boxes(boxes),
                image_path: format!("images/img_{i:05}.jpg"),
                annotation_path: format!("annotations/img_{i:05}.xml"),
                split: Split::Unassigned,
            }
        })
        .collect()
}

fn manifest(class_lists: &[Vec<usize>]) -> DatasetManifest {
    DatasetManifest::new(records(class_lists), ClassMap::new(LABELS).unwrap()).unwrap()
}

fn arb_classes() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..7, 0..5), 1..80)
}

fn arb_ratios() -> impl Strategy<Value = SplitRatios> {
    (1u32..98, 1u32..98).prop_filter_map("ratios must leave room for test", |(a, b)| {
        (a + b < 100).then(|| {
            let (train, val) = (f64::from(a) / 100.0, f64::from(b) / 100.0);
            SplitRatios { train, val, test: 1.0 - train - val }
        })
    })
}

fn assignment(m: &DatasetManifest) -> Vec<(String, Split)> {
    m.records().iter().map(|r| (r.image_id().to_string(), r.split)).collect()
}

#[test]
fn rdd_scale_split_sizes() {
    let m = manifest(&vec![vec![]; 8535]);
    let s = split_dataset(&m, SplitRatios::SEVENTY_TWENTY_TEN, 42).unwrap();
    assert_eq!(s.split_sizes(), [5974, 1707, 854, 0]);
}

#[test]
fn different_seeds_give_different_permutations() {
    let m = manifest(&vec![vec![]; 100]);
    let a = split_dataset(&m, SplitRatios::SEVENTY_TWENTY_TEN, 1).unwrap();
    let b = split_dataset(&m, SplitRatios::SEVENTY_TWENTY_TEN, 2).unwrap();
    assert_ne!(assignment(&a), assignment(&b));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_partitions_exactly(classes in arb_classes(), ratios in arb_ratios(), seed in any::<u64>()) {
        let m = manifest(&classes);
        let s = split_dataset(&m, ratios, seed).unwrap();
        let n = m.len();
        let (train, val, test) = ratios.sizes(n);
        prop_assert_eq!(s.split_sizes(), [train, val, test, 0]);
        prop_assert_eq!(train, (ratios.train * n as f64 + 1e-9).floor() as usize);
        prop_assert_eq!(s.len(), n);
        // Geometry and ids untouched.
        for (a, b) in m.records().iter().zip(s.records()) {
            prop_assert_eq!(&a.annotation, &b.annotation);
        }
    }

    #[test]
    fn split_ignores_input_order(classes in arb_classes(), seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let mut shuffled = records(&classes);
        SplitMix64::new(shuffle_seed).shuffle(&mut shuffled);
        let a = split_dataset(&manifest(&classes), SplitRatios::SEVENTY_TWENTY_TEN, seed).unwrap();
        let b = split_dataset(
            &DatasetManifest::new(shuffled, ClassMap::new(LABELS).unwrap()).unwrap(),
            SplitRatios::SEVENTY_TWENTY_TEN,
            seed,
        )
        .unwrap();
        prop_assert_eq!(assignment(&a), assignment(&b));
    }

    #[test]
    fn merge_conserves_boxes_and_pushes_histogram_forward(
        classes in arb_classes(),
        targets in prop::collection::vec(0usize..3, 7),
    ) {
        let m = manifest(&classes);
        let names = ["cracks", "potholes", "other"];
        let pairs: Vec<(&str, &str)> = LABELS.iter().zip(&targets).map(|(l, &t)| (*l, names[t])).collect();
        let rule = MergeRule::from_pairs(m.classes(), pairs).unwrap();
        let merged = merge_classes(&m, &rule).unwrap();

        prop_assert_eq!(merged.total_boxes(), m.total_boxes());
        for (a, b) in m.records().iter().zip(merged.records()) {
            prop_assert_eq!(a.annotation.boxes.len(), b.annotation.boxes.len());
            for (x, y) in a.annotation.boxes.iter().zip(&b.annotation.boxes) {
                prop_assert_eq!((x.x_min, x.y_min, x.x_max, x.y_max), (y.x_min, y.y_min, y.x_max, y.y_max));
                prop_assert_eq!(rule.map(x.class_id), Some(y.class_id));
            }
        }

        let before = class_histogram(&m);
        let mut pushed = vec![0; rule.target().len()];
        for (src, &count) in before.counts.iter().enumerate() {
            pushed[rule.map(src).unwrap()] += count;
        }
        prop_assert_eq!(class_histogram(&merged).counts, pushed);
    }

    #[test]
    fn balanced_test_split_respects_cap(classes in arb_classes(), seed in any::<u64>()) {
        let s = split_dataset(&manifest(&classes), SplitRatios::SEVENTY_TWENTY_TEN, seed).unwrap();
        let before = split_histogram(&s, Split::Test);
        let b = balance_test_split(&s, seed);
        let after = split_histogram(&b, Split::Test);
        if let Some(cap) = before.counts.iter().copied().filter(|&c| c > 0).min() {
            prop_assert!(after.counts.iter().all(|&c| c <= cap));
        }
        // Only test images move, and only to unassigned.
        for (x, y) in s.records().iter().zip(b.records()) {
            prop_assert!(x.split == y.split || (x.split == Split::Test && y.split == Split::Unassigned));
        }
        prop_assert_eq!(assignment(&b), assignment(&balance_test_split(&s, seed)));
    }
}
