use std::collections::BTreeMap;

use apexflow::eval::{evaluate_features, f_measure, metrics, train_linear_svm, Protocol, SvmModel, SvmParams};
use apexflow::{ConfusionMatrix, Dataset, FeatureVector, Frame, PipelineConfig, VideoSample};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn micro_f_equals_accuracy_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let m = rng.gen_range(2..8);
        let rows: Vec<Vec<u64>> = (0..m).map(|_| (0..m).map(|_| rng.gen_range(0..20)).collect()).collect();
        let cm = ConfusionMatrix::from_rows(&rows).unwrap();
        if cm.total() == 0 {
            continue;
        }
        let total: u64 = rows.iter().flatten().sum();
        let diag: u64 = (0..m).map(|i| rows[i][i]).sum();
        let accuracy = diag as f64 / total as f64;
        let (p, r, f) = f_measure(&cm).unwrap();
        assert!((f - accuracy).abs() <= 1e-12);
        assert!((p - accuracy).abs() <= 1e-12 && (r - accuracy).abs() <= 1e-12);
        assert_eq!(metrics(&cm).unwrap().accuracy, accuracy);
    }
}

#[test]
fn hand_example_is_exact() {
    let cm = ConfusionMatrix::from_rows(&[vec![3, 1], vec![2, 4]]).unwrap();
    assert_eq!(f_measure(&cm).unwrap(), (0.7, 0.7, 0.7));
}

fn rows(x: &[Vec<f64>]) -> Vec<&[f64]> {
    x.iter().map(|r| r.as_slice()).collect()
}

/// Counts votes exactly as stated: positive decision votes for the first
/// class of the pair, negative for the second, zero abstains; ties go to the
/// larger summed signed margin, then the lower id.
fn vote_oracle(model: &SvmModel, x: &[f64]) -> usize {
    let mut votes: BTreeMap<usize, (usize, f64)> = model.classes().iter().map(|&c| (c, (0, 0.0))).collect();
    for m in model.machines() {
        let f: f64 = m.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + m.bias;
        if f > 0.0 {
            votes.get_mut(&m.positive).unwrap().0 += 1;
        }
        if f < 0.0 {
            votes.get_mut(&m.negative).unwrap().0 += 1;
        }
        votes.get_mut(&m.positive).unwrap().1 += f;
        votes.get_mut(&m.negative).unwrap().1 -= f;
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for (&c, &(v, s)) in &votes {
        best = match best {
            Some((_, bv, bs)) if v < bv || (v == bv && s <= bs) => best,
            _ => Some((c, v, s)),
        };
    }
    best.unwrap().0
}

#[test]
fn prediction_matches_vote_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..30 {
        let classes = rng.gen_range(2..6);
        let dim = rng.gen_range(1..6);
        let n = rng.gen_range(classes * 2..40);
        let y: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let model = train_linear_svm(&rows(&x), &y, &SvmParams::default()).unwrap();
        for _ in 0..50 {
            let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert_eq!(model.predict(&q).unwrap(), vote_oracle(&model, &q));
        }
    }
}

#[test]
fn duplicating_samples_keeps_the_decision_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..20 {
        let c = i % 2;
        let centre = if c == 0 { 3.0 } else { -3.0 };
        x.push(vec![centre + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        y.push(c);
    }
    let params = SvmParams {
        c: 1e3,
        tolerance: 1e-10,
        max_epochs: 100_000,
    };
    let once = train_linear_svm(&rows(&x), &y, &params).unwrap();
    let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
    let y2: Vec<usize> = y.iter().chain(&y).copied().collect();
    let twice = train_linear_svm(&rows(&x2), &y2, &params).unwrap();
    for _ in 0..100 {
        let q = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let (a, b) = (once.machines()[0].decision(&q), twice.machines()[0].decision(&q));
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

fn toy_dataset(rng: &mut impl Rng) -> (Vec<VideoSample>, Vec<FeatureVector>) {
    let frame = Frame::filled(4, 4, 0.0).unwrap();
    let mut samples = Vec::new();
    let mut feats = Vec::new();
    for s in 0..6 {
        for v in 0..4 {
            let label = v % 3;
            samples.push(
                VideoSample::new(vec![frame.clone(); 2], 0, Some(1), 1, label, format!("s{s}"), format!("s{s}_v{v}")).unwrap(),
            );
            let mut f: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
            f[label] += 0.7;
            feats.push(FeatureVector::new(f).unwrap());
        }
    }
    (samples, feats)
}

#[test]
fn sample_order_changes_no_prediction() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let (samples, feats) = toy_dataset(&mut rng);
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let cfg = PipelineConfig::default();
    let collect = |samples: Vec<VideoSample>, feats: Vec<FeatureVector>| {
        let d = Dataset::new(samples, names.clone()).unwrap();
        let report = evaluate_features(&d, &[feats], &cfg, 1).unwrap();
        let mut out = BTreeMap::new();
        for fold in report.folds {
            for (id, p) in fold.test_ids.into_iter().zip(fold.predictions) {
                out.insert(id, p);
            }
        }
        out
    };
    let base = collect(samples.clone(), feats.clone());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let shuffled = collect(
        order.iter().map(|&i| samples[i].clone()).collect(),
        order.iter().map(|&i| feats[i].clone()).collect(),
    );
    assert_eq!(base, shuffled);
}

#[test]
fn loso_never_trains_on_the_test_subject() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let (samples, feats) = toy_dataset(&mut rng);
    let subject: BTreeMap<String, String> = samples.iter().map(|s| (s.video_id.clone(), s.subject_id.clone())).collect();
    let d = Dataset::new(samples, vec!["a".into(), "b".into(), "c".into()]).unwrap();
    let cfg = PipelineConfig { protocol: Protocol::Loso, ..PipelineConfig::default() };
    let report = evaluate_features(&d, &[feats], &cfg, 1).unwrap();
    assert_eq!(report.folds.len(), 6);
    for fold in &report.folds {
        assert!(fold.test_ids.iter().all(|id| subject[id] == fold.held_out));
    }
    let m = metrics(&ConfusionMatrix::from_rows(&report.confusion).unwrap()).unwrap();
    assert!((m.f_measure - report.f_measure).abs() <= 1e-12);
}
