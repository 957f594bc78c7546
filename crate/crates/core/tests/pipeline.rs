use mars_core::pipeline::{detect_convergence, stratified_split, ConfusionMatrix, Dataset};
use mars_core::sigproc::{sensor_set, ChannelLayout, WindowedSample};
use proptest::prelude::*;

fn predictions() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..8).prop_flat_map(|k| (Just(k), prop::collection::vec((0..k, 0..k), 1..200)))
}

/// `(label, windows)` per sequence; the index is the sequence id.
fn sequences() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..4, 1usize..5), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn metrics_are_bounded_and_micro_f1_is_top1((k, pairs) in predictions()) {
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let cm = ConfusionMatrix::from_predictions(&truth, &pred, k).unwrap();
        prop_assert_eq!(cm.total(), truth.len() as u64);
        let m = cm.metrics().unwrap();
        for v in [m.accuracy, m.top1, m.precision, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((m.f1 - m.top1).abs() < 1e-12);
        prop_assert!(m.accuracy >= m.top1 - 1e-12);
        // Pooled one-vs-rest accuracy counts each error twice among k·n cells.
        let errors = truth.iter().zip(&pred).filter(|(a, b)| a != b).count() as f64;
        let n = truth.len() as f64;
        prop_assert!((m.accuracy - (1.0 - 2.0 * errors / (k as f64 * n))).abs() < 1e-12);
    }

    #[test]
    fn split_keeps_sequences_whole(seqs in sequences(), fraction in 0.0..0.9f64, seed in any::<u64>()) {
        let layout = ChannelLayout::new(&sensor_set("3").unwrap()).unwrap();
        let samples: Vec<WindowedSample> = seqs
            .iter()
            .enumerate()
            .flat_map(|(id, &(label, windows))| {
                (0..windows).map(move |w| WindowedSample {
                    values: vec![id as f64; 36 * 2],
                    label,
                    source_sequence: id,
                    start_frame: w,
                })
            })
            .collect();
        let data = Dataset::new(layout, 2, 4, samples).unwrap();
        let (train, test) = stratified_split(&data, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), data.len());
        let (a, b) = (train.sequence_ids(), test.sequence_ids());
        prop_assert!(a.iter().all(|id| !b.contains(id)));
        for label in 0..4 {
            let per_class = |d: &Dataset| d.samples.iter().filter(|s| s.label == label).count();
            if per_class(&data) > 0 {
                prop_assert!(per_class(&train) > 0, "class {label} lost from training");
            }
        }
        let again = stratified_split(&data, fraction, seed).unwrap();
        prop_assert_eq!(again.1.sequence_ids(), b);
    }

    #[test]
    fn convergence_index_starts_the_first_streak(
        curve in prop::collection::vec(0.9..1.0f64, 0..40),
        patience in 1usize..6,
    ) {
        let found = detect_convergence(&curve, 0.99, patience);
        let naive = (0..curve.len())
            .find(|&i| i + patience <= curve.len() && curve[i..i + patience].iter().all(|&v| v >= 0.99));
        prop_assert_eq!(found, naive);
    }
}
