mod common;

use std::collections::BTreeMap;

use emostage::fusion::{align, fuse, Aligner, FusionPolicy};
use emostage::interpretation::{EmotionEstimate, EmotionLabel, PlaneAngles, RuleSet, DEFAULT_NEUTRAL_RADIUS};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::rng;

const MODALITIES: [&str; 4] = ["body", "face", "voice", "skin"];

fn est(rules: &RuleSet, t: f64, m: &str, label: EmotionLabel, intensity: f64, confidence: f64) -> EmotionEstimate {
    EmotionEstimate {
        t_s: t,
        label,
        intensity,
        confidence,
        plane: rules.to_plane(label, intensity).unwrap(),
        modality: m.into(),
    }
}

fn random_group(r: &mut impl Rng, rules: &RuleSet, label: Option<EmotionLabel>, n: usize) -> Vec<EmotionEstimate> {
    MODALITIES[..n]
        .iter()
        .map(|m| {
            let l = label.unwrap_or_else(|| EmotionLabel::BASIC[r.gen_range(0..6)]);
            est(
                rules,
                r.gen_range(0.0..0.5),
                m,
                l,
                r.gen_range(0.0..=1.0),
                r.gen_range(0.0..=1.0),
            )
        })
        .collect()
}

#[test]
fn noisy_or_exact_value() {
    let rules = RuleSet::default_rules();
    let g = [
        est(&rules, 1.0, "body", EmotionLabel::Joy, 0.5, 0.6),
        est(&rules, 1.1, "face", EmotionLabel::Joy, 0.5, 0.8),
    ];
    let f = fuse(&g, &FusionPolicy::default(), &rules).unwrap();
    assert_eq!(f.estimate.confidence, 0.92);
    assert_eq!(f.estimate.label, EmotionLabel::Joy);
    assert_eq!(f.estimate.modality, "body+face");
    assert_eq!(f.estimate.t_s, 1.1);
}

#[test]
fn redundant_confidence_is_monotone() {
    let rules = RuleSet::default_rules();
    let policy = FusionPolicy::default();
    let mut r = rng(20);
    for _ in 0..10_000 {
        let label = EmotionLabel::BASIC[r.gen_range(0..6)];
        let n = r.gen_range(1..=3);
        let g = random_group(&mut r, &rules, Some(label), n + 1);
        let smaller = fuse(&g[..n], &policy, &rules).unwrap().estimate.confidence;
        let full = fuse(&g, &policy, &rules).unwrap();
        assert_eq!(full.estimate.label, label);
        // one more agreeing source never lowers confidence
        assert!(full.estimate.confidence >= smaller - 1e-12);
        assert!(full.estimate.confidence >= g.iter().map(|e| e.confidence).fold(0.0, f64::max) - 1e-12);
        // raising any single confidence never lowers it either
        let mut raised = g.clone();
        let k = r.gen_range(0..raised.len());
        raised[k].confidence = r.gen_range(raised[k].confidence..=1.0);
        let up = fuse(&raised, &policy, &rules).unwrap().estimate.confidence;
        assert!(up >= full.estimate.confidence - 1e-12);
    }
}

#[test]
fn fusion_is_permutation_invariant() {
    let rules = RuleSet::default_rules();
    let mut weights = BTreeMap::new();
    weights.insert("face".to_string(), 2.0);
    let policy = FusionPolicy {
        modality_weights: weights,
        ..FusionPolicy::default()
    };
    let mut r = rng(21);
    for _ in 0..2000 {
        let n = r.gen_range(1..=4);
        let mut g = random_group(&mut r, &rules, None, n);
        let base = fuse(&g, &policy, &rules).unwrap();
        g.shuffle(&mut r);
        assert_eq!(fuse(&g, &policy, &rules).unwrap(), base);
    }
}

#[test]
fn singleton_passes_through() {
    let rules = RuleSet::default_rules();
    let mut r = rng(22);
    for _ in 0..200 {
        let g = random_group(&mut r, &rules, None, 1);
        let f = fuse(&g, &FusionPolicy::default(), &rules).unwrap();
        assert_eq!(f.estimate, g[0]);
        assert_eq!(f.sources.len(), 1);
    }
}

#[test]
fn symmetric_opposites_cancel_to_neutral() {
    let mut angles: BTreeMap<EmotionLabel, f64> = PlaneAngles::default().iter().collect();
    angles.insert(EmotionLabel::Sadness, 225.0);
    let rules = RuleSet::new(
        RuleSet::default_rules().rules().to_vec(),
        PlaneAngles::new(angles).unwrap(),
        DEFAULT_NEUTRAL_RADIUS,
    )
    .unwrap();
    let g = [
        est(&rules, 1.0, "body", EmotionLabel::Joy, 0.8, 0.9),
        est(&rules, 1.0, "face", EmotionLabel::Sadness, 0.8, 0.9),
    ];
    let f = fuse(&g, &FusionPolicy::default(), &rules).unwrap();
    assert_eq!(f.estimate.label, EmotionLabel::Neutral);
    assert_eq!(f.estimate.intensity, 0.0);
    assert!(f.estimate.confidence < 1e-9);
}

fn arb_stream(m: &'static str) -> impl Strategy<Value = Vec<EmotionEstimate>> {
    proptest::collection::vec((0.01..0.6f64, 0..6usize), 0..12).prop_map(move |steps| {
        let rules = RuleSet::default_rules();
        let mut t = 0.0;
        steps
            .into_iter()
            .map(|(dt, l)| {
                t += dt;
                est(&rules, t, m, EmotionLabel::BASIC[l], 0.5, 0.5)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn streaming_aligner_matches_batch(a in arb_stream("body"), b in arb_stream("face"), c in arb_stream("voice")) {
        let policy = FusionPolicy::default();
        let streams = vec![a, b, c];
        let batch = align(&streams, &policy);
        let mut merged: Vec<(usize, &EmotionEstimate)> =
            streams.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |e| (i, e))).collect();
        merged.sort_by(|x, y| x.1.t_s.total_cmp(&y.1.t_s).then(x.0.cmp(&y.0)));
        let names: Vec<String> = ["body", "face", "voice"].iter().map(|s| s.to_string()).collect();
        let mut aligner = Aligner::new(&policy, &names);
        let mut streamed = Vec::new();
        for (_, e) in merged {
            streamed.extend(aligner.push(e.clone()));
        }
        streamed.extend(aligner.finish());
        prop_assert_eq!(streamed, batch);
    }
}
