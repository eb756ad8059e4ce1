use ndarray::Array2;
use proptest::prelude::*;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sherlock_core::eval::{bootstrap_f1, evaluate, percentile};
use sherlock_core::experiment::{prepare, ExperimentConfig};
use sherlock_core::features::paragraph::{cosine_similarity, train_pvdbow, ParagraphConfig};
use sherlock_core::synthetic::{generate_corpus, synthetic_word_table, SyntheticConfig};
use sherlock_core::trees::{
    feature_importances, gini, train_decision_tree, train_random_forest, ForestParams, NodeKind, TreeParams,
};
use sherlock_core::{Prediction, SemanticType, NUM_TYPES};

fn dataset() -> impl Strategy<Value = (Array2<f64>, Vec<usize>)> {
    (2usize..40, 1usize..4).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(0i32..5, n * p),
            prop::collection::vec(0usize..3, n),
        )
            .prop_map(move |(cells, labels)| {
                let x = Array2::from_shape_vec((n, p), cells.into_iter().map(f64::from).collect()).unwrap();
                (x, labels)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_split_raises_weighted_gini((x, y) in dataset(), seed in any::<u64>()) {
        let tree = train_decision_tree(x.view(), &y, 3, &TreeParams::default(), seed).unwrap();
        let mut lowered = false;
        for node in &tree.nodes {
            if let NodeKind::Split { left, right, .. } = node.kind {
                let (l, r) = (&tree.nodes[left], &tree.nodes[right]);
                let children = (l.n_samples * l.impurity + r.n_samples * r.impurity) / node.n_samples;
                prop_assert!(children <= node.impurity + 1e-12);
                lowered |= children < node.impurity - 1e-12;
                prop_assert_eq!(l.n_samples + r.n_samples, node.n_samples);
            }
        }
        let importances = feature_importances(&tree);
        prop_assert!(importances.iter().all(|&v| v >= 0.0));
        if lowered {
            prop_assert_eq!(importances.iter().cloned().fold(0.0, f64::max), 1.0);
        }
    }

    #[test]
    fn unrestricted_tree_recalls_distinct_training_rows((x, y) in dataset(), seed in any::<u64>()) {
        // Keep the first occurrence of each feature row so rows are distinct.
        let mut keep = Vec::new();
        for i in 0..x.nrows() {
            if !keep.iter().any(|&j: &usize| x.row(j) == x.row(i)) {
                keep.push(i);
            }
        }
        let xs = x.select(ndarray::Axis(0), &keep);
        let ys: Vec<usize> = keep.iter().map(|&i| y[i]).collect();
        let tree = train_decision_tree(xs.view(), &ys, 3, &TreeParams::default(), seed).unwrap();
        for (row, &label) in xs.rows().into_iter().zip(&ys) {
            prop_assert_eq!(tree.predict_class(row.as_slice().unwrap()).unwrap(), label);
        }
    }

    #[test]
    fn leaf_impurity_matches_class_counts((x, y) in dataset()) {
        let tree = train_decision_tree(x.view(), &y, 3, &TreeParams::default(), 0).unwrap();
        for node in &tree.nodes {
            if let NodeKind::Leaf { class_counts } = &node.kind {
                let n: f64 = class_counts.iter().sum();
                let by_hand = 1.0 - class_counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>();
                prop_assert!((gini(class_counts) - by_hand).abs() < 1e-12);
                prop_assert!((node.impurity - by_hand).abs() < 1e-12);
            }
        }
    }
}

fn labels() -> impl Strategy<Value = (Vec<Prediction>, Vec<SemanticType>)> {
    (1usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![8 => (0usize..5).prop_map(Some), 1 => Just(None)], n),
            prop::collection::vec(0usize..5, n),
        )
            .prop_map(|(preds, truths)| {
                let preds = preds
                    .into_iter()
                    .map(|p| p.map_or(Prediction::Abstain, |i| Prediction::Type(SemanticType::from_index(i).unwrap())))
                    .collect();
                let truths = truths.into_iter().map(|i| SemanticType::from_index(i).unwrap()).collect();
                (preds, truths)
            })
    })
}

/// Weighted F1 counted pair by pair, without the confusion matrix.
fn brute_force_weighted_f1(preds: &[Prediction], truths: &[SemanticType]) -> f64 {
    let mut total = 0.0;
    for c in 0..NUM_TYPES {
        let is = |p: &Prediction| matches!(p, Prediction::Type(t) if t.index() == c);
        let tp = preds.iter().zip(truths).filter(|(p, t)| is(p) && t.index() == c).count() as f64;
        let predicted = preds.iter().filter(|p| is(p)).count() as f64;
        let support = truths.iter().filter(|t| t.index() == c).count() as f64;
        let precision = if predicted == 0.0 { 0.0 } else { tp / predicted };
        let recall = if support == 0.0 { 0.0 } else { tp / support };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        total += support * f1;
    }
    total / truths.len() as f64
}

proptest! {
    #[test]
    fn weighted_f1_matches_brute_force((preds, truths) in labels()) {
        let report = evaluate(&preds, &truths).unwrap();
        prop_assert_eq!(report.weighted_f1, brute_force_weighted_f1(&preds, &truths));
        let total: u64 = report.confusion.iter().flatten().sum();
        prop_assert_eq!(total as usize, truths.len());
    }
}

#[test]
fn bootstrap_interval_contains_point_estimate() {
    let t = |i| SemanticType::from_index(i).unwrap();
    let truths: Vec<SemanticType> = (0..60).map(|i| t(i % 4)).collect();
    let preds: Vec<Prediction> = (0..60)
        .map(|i| Prediction::Type(t(if i % 7 == 0 { (i + 1) % 4 } else { i % 4 })))
        .collect();
    let point = evaluate(&preds, &truths).unwrap().weighted_f1;
    let interval = bootstrap_f1(&preds, &truths, 1000, 3).unwrap();
    assert!(interval.lower <= point && point <= interval.upper, "{interval:?} vs {point}");
    assert!(interval.lower < interval.upper);
}

#[test]
fn forest_is_at_least_as_accurate_as_a_tree() {
    let (mut tree_acc, mut forest_acc) = (0.0, 0.0);
    for seed in 0..5 {
        let corpus = generate_corpus(&SyntheticConfig {
            seed,
            ..SyntheticConfig::default()
        });
        let words = synthetic_word_table(seed);
        let mut config = ExperimentConfig::default().with_seed(seed);
        config.paragraph.epochs = 5;
        let prepared = prepare(&corpus, &words, &config).unwrap();
        let y = prepared.train.label_indices().unwrap();
        let truth = prepared.test.label_indices().unwrap();
        let tree = train_decision_tree(prepared.train.features.view(), &y, NUM_TYPES, &TreeParams::default(), seed).unwrap();
        let forest =
            train_random_forest(prepared.train.features.view(), &y, NUM_TYPES, &ForestParams::default(), seed).unwrap();
        let accuracy = |predict: &dyn Fn(&[f64]) -> usize| {
            let rows = prepared.test.features.rows();
            let hits = rows
                .into_iter()
                .zip(&truth)
                .filter(|(row, &t)| predict(row.as_slice().unwrap()) == t)
                .count();
            hits as f64 / truth.len() as f64
        };
        tree_acc += accuracy(&|r| tree.predict_class(r).unwrap()) / 5.0;
        forest_acc += accuracy(&|r| forest.predict_class(r).unwrap()) / 5.0;
    }
    assert!(forest_acc >= tree_acc, "forest {forest_acc} < tree {tree_acc}");
}

#[test]
fn inferring_a_training_column_lands_near_its_trained_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vocab: Vec<String> = (0..300).map(|i| format!("token{i}")).collect();
    let columns: Vec<Vec<String>> = (0..200)
        .map(|_| vocab.choose_multiple(&mut rng, 15).cloned().collect())
        .collect();
    let refs: Vec<&[String]> = columns.iter().map(Vec::as_slice).collect();
    let probes = [0usize, 17, 55, 101, 150, 199];
    let (mut own, mut p90) = (0.0, 0.0);
    for seed in 0..3 {
        let model = train_pvdbow(&refs, &ParagraphConfig { seed, ..ParagraphConfig::default() }).unwrap();
        for &i in &probes {
            let inferred = model.infer(&columns[i]);
            let mut others: Vec<f64> = (0..model.num_paragraphs())
                .filter(|&j| j != i)
                .map(|j| cosine_similarity(&inferred, model.paragraph(j)))
                .collect();
            others.sort_by(f64::total_cmp);
            let weight = 1.0 / (3.0 * probes.len() as f64);
            own += weight * cosine_similarity(&inferred, model.paragraph(i));
            p90 += weight * percentile(&others, 0.9);
        }
    }
    assert!(own > p90, "own {own} vs 90th percentile {p90}");
}
