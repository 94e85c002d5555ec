mod common;

use emostage::analysis::{analyze_clip, AnalysisConfig, Dimension, Level};
use emostage::geometry::Vec3;
use emostage::kinematics::JointNames;
use emostage::synth;

use common::{close, feature_values, random_clip, rng, scale_clip, whole_clip_features};

const NAMES: [&str; 12] = [
    "expansion",
    "arm_openness",
    "trunk_flexion",
    "trunk_lean",
    "qom",
    "velocity",
    "force",
    "directness",
    "vertical_dir",
    "sagittal_dir",
    "trunk_stretch_rate",
    "arm_opening_rate",
];

#[test]
fn features_are_scale_invariant() {
    let mut r = rng(10);
    for _ in 0..60 {
        let clip = random_clip(&mut r);
        let base = feature_values(&whole_clip_features(&clip));
        for s in [0.1, 1.0, 17.3] {
            let scaled = feature_values(&whole_clip_features(&scale_clip(&clip, s)));
            for k in 0..12 {
                assert!(
                    close(base[k], scaled[k], 1e-9),
                    "{} at s={s}: {} vs {}",
                    NAMES[k],
                    base[k],
                    scaled[k]
                );
            }
        }
    }
}

#[test]
fn features_are_translation_invariant() {
    let mut r = rng(11);
    for _ in 0..60 {
        let clip = random_clip(&mut r);
        let base = feature_values(&whole_clip_features(&clip));
        let mut moved = clip.clone();
        moved.translate_root(Vec3::new(r_f(&mut r), r_f(&mut r), r_f(&mut r)));
        let other = feature_values(&whole_clip_features(&moved));
        for k in 0..12 {
            assert!(
                close(base[k], other[k], 1e-9),
                "{}: {} vs {}",
                NAMES[k],
                base[k],
                other[k]
            );
        }
    }
}

fn r_f(r: &mut impl rand::Rng) -> f64 {
    r.gen_range(-1000.0..1000.0)
}

#[test]
fn time_reversal_sign_rules() {
    let mut r = rng(12);
    for _ in 0..60 {
        let clip = random_clip(&mut r);
        let fwd = feature_values(&whole_clip_features(&clip));
        let back = feature_values(&whole_clip_features(&synth::reversed(&clip)));
        for k in 0..12 {
            // direction and rate features flip, everything else is unchanged
            let expected = if k >= 8 { -fwd[k] } else { fwd[k] };
            assert!(
                close(back[k], expected, 1e-9),
                "{}: {} vs {}",
                NAMES[k],
                back[k],
                expected
            );
        }
    }
}

#[test]
fn reversed_joy_flips_arms_and_sagittal() {
    let names = JointNames::default();
    let cfg = AnalysisConfig::default();
    let fwd = analyze_clip(&synth::joy_clip(), &names, &cfg).unwrap();
    let back = analyze_clip(&synth::reversed(&synth::joy_clip()), &names, &cfg).unwrap();
    assert!(!fwd.is_empty() && fwd.len() == back.len());
    for (f, b) in fwd.iter().zip(&back) {
        for d in [Dimension::Arms, Dimension::Sagittal] {
            assert_eq!(f.profile.get(d), Level::High);
            assert_eq!(b.profile.get(d), Level::Low);
        }
        for d in [Dimension::Force, Dimension::Velocity, Dimension::Directness] {
            assert_eq!(f.profile.get(d), b.profile.get(d));
        }
    }
}

#[test]
fn still_clip_is_neutral() {
    let fvs = analyze_clip(
        &synth::still_clip(2.0),
        &JointNames::default(),
        &AnalysisConfig::default(),
    )
    .unwrap();
    assert!(!fvs.is_empty());
    for fv in fvs {
        assert_eq!(fv.profile.to_i8(), [0; 7]);
        assert_eq!(fv.dynamic_features.qom, 0.0);
    }
}
