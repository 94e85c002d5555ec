mod common;

use std::time::Instant;

use emostage::arch::{
    build_pipeline, run, ArchError, Component, ComponentId, EventKind, ModalityConfig, NodeId, Outbox, Payload,
    PipelineConfig, PipelineEvent, RoutingCase, RunInputs, RunLog, RunOptions,
};
use emostage::bvh::{MotionClip, ReplaySpeed};
use emostage::interpretation::{EmotionEstimate, EmotionLabel, RuleSet};
use emostage::script::{synth_modality, ModalityScript};
use emostage::synth;
use emostage::wire;

use common::{config, run_config};

fn face_script() -> Vec<EmotionEstimate> {
    let s = ModalityScript::parse(
        r#"[{"t": 0.9, "label": "joy", "intensity": 0.7, "confidence": 0.8},
            {"t": 1.2, "label": "surprise", "intensity": 0.6, "confidence": 0.5},
            {"t": 1.6, "label": "joy", "intensity": 0.9, "confidence": 0.9}]"#,
    )
    .unwrap();
    synth_modality(&s, "face", RuleSet::default_rules().angles()).unwrap()
}

/// Every (configuration, inputs) pair of the test corpus.
fn corpus() -> Vec<(String, PipelineConfig, RunInputs)> {
    let clips: Vec<(&str, MotionClip)> = vec![
        ("joy", synth::joy_clip()),
        ("surprise", synth::surprise_clip()),
        ("reversed", synth::reversed(&synth::joy_clip())),
        ("still", synth::still_clip(2.0)),
    ];
    let mut out = Vec::new();
    for case in RoutingCase::ALL {
        for (name, clip) in &clips {
            let cfg = config(case);
            out.push((
                format!("{name}/case{}", case.number()),
                cfg.clone(),
                RunInputs::new().with_clip("body", clip.clone()),
            ));

            let mut shared = cfg.clone();
            shared.modalities[0].shared = true;
            out.push((
                format!("{name}/shared/case{}", case.number()),
                shared,
                RunInputs::new().with_clip("body", clip.clone()),
            ));

            let mut fused = cfg.clone();
            fused.modalities.push(ModalityConfig::script("face"));
            out.push((
                format!("{name}/face/case{}", case.number()),
                fused,
                RunInputs::new()
                    .with_clip("body", clip.clone())
                    .with_script("face", face_script()),
            ));
        }
    }
    out
}

fn is_facet(s: &str, letter: char) -> bool {
    s.contains('/') && s.ends_with(&format!(".{letter}"))
}

#[test]
fn no_direct_presentation_abstraction_hops() {
    for (name, cfg, inputs) in corpus() {
        let log = run_config(&cfg, &inputs, true);
        for t in &log.trace {
            let pa = is_facet(&t.from, 'P') && is_facet(&t.to, 'A');
            let ap = is_facet(&t.from, 'A') && is_facet(&t.to, 'P');
            assert!(!pa && !ap, "{name}: {} -> {}", t.from, t.to);
        }
    }
}

#[test]
fn dialogue_controller_relays_through_facets() {
    let log = run_config(
        &config(RoutingCase::Case1FunctionalBranch),
        &RunInputs::new().with_clip("body", synth::joy_clip()),
        false,
    );
    let hops: Vec<(&str, &str)> = log
        .trace
        .iter()
        .filter(|t| t.from.starts_with("DialogueController/"))
        .map(|t| (t.from.as_str(), t.to.as_str()))
        .take(3)
        .collect();
    assert_eq!(
        hops,
        [
            ("DialogueController/root.A", "DialogueController/root.D"),
            ("DialogueController/root.D", "DialogueController/scene.D"),
            ("DialogueController/scene.D", "DialogueController/scene.P"),
        ]
    );
}

fn deliveries<'a>(log: &'a RunLog, from_prefix: &'a str) -> impl Iterator<Item = &'a emostage::arch::TraceEntry> + 'a {
    log.trace.iter().filter(move |t| t.from.starts_with(from_prefix))
}

#[test]
fn routing_isolation_per_case() {
    for (name, cfg, inputs) in corpus() {
        let log = run_config(&cfg, &inputs, false);
        let target = emostage::arch::route_emotion(cfg.case).as_str();
        // the emotion branch only ever talks to its own next stage or its case target
        for t in deliveries(&log, "Interpretation").chain(deliveries(&log, "Fusion")) {
            assert!(t.to == "Fusion" || t.to == target, "{name}: {} -> {}", t.from, t.to);
        }
        let kinds: Vec<EventKind> = log.events.iter().map(|e| e.kind()).collect();
        let reached_pi: Vec<EventKind> = log
            .trace
            .iter()
            .filter(|t| t.to == "PhysicalInteraction")
            .map(|t| t.kind)
            .collect();
        let to_fca = log.trace.iter().filter(|t| t.to == "FunctionalCoreAdapter").count();
        match cfg.case {
            RoutingCase::Case1FunctionalBranch => {
                assert!(
                    !kinds.contains(&EventKind::Task) && !kinds.contains(&EventKind::Modality),
                    "{name}"
                );
                assert!(to_fca > 0, "{name}");
                assert!(reached_pi.contains(&EventKind::Directive), "{name}");
            }
            RoutingCase::Case2DialogueController => {
                assert_eq!(to_fca, 0, "{name}");
                assert!(
                    !kinds.contains(&EventKind::Directive) && !kinds.contains(&EventKind::Modality),
                    "{name}"
                );
                assert!(reached_pi.contains(&EventKind::Task), "{name}");
            }
            RoutingCase::Case3InteractionBranch => {
                assert_eq!(to_fca, 0, "{name}");
                assert!(!log.trace.iter().any(|t| t.to == "DialogueController"), "{name}");
                assert!(
                    !kinds.contains(&EventKind::Directive) && !kinds.contains(&EventKind::Task),
                    "{name}"
                );
                assert!(reached_pi.contains(&EventKind::Modality), "{name}");
            }
        }
        // emotions never cross into the interaction branch
        for t in &log.trace {
            if t.to == "LogicalInteraction" || t.to == "PhysicalInteraction" {
                assert!(t.kind != EventKind::Emotion && t.kind != EventKind::Fused, "{name}");
            }
        }
    }
}

#[test]
fn shared_capture_feeds_identical_frames() {
    for (name, cfg, inputs) in corpus() {
        if !cfg.modalities[0].shared {
            continue;
        }
        let log = run_config(&cfg, &inputs, true);
        let to = |dst: &str| -> Vec<String> {
            log.trace
                .iter()
                .filter(|t| t.from == "Capture[body]" && t.to == dst)
                .map(|t| t.digest.clone())
                .collect()
        };
        let analysis = to("Analysis[body]");
        let physical = to("PhysicalInteraction");
        assert_eq!(analysis.len(), inputs.clips["body"].frame_count(), "{name}");
        assert_eq!(analysis, physical, "{name}");
        let p = build_pipeline(&cfg).unwrap();
        assert_eq!(p.count(ComponentId::Capture), 1);
        assert_eq!(p.out_degree(&NodeId::branch(ComponentId::Capture, "body")), 2);
    }
}

#[test]
fn logs_are_byte_identical_across_runs() {
    for (name, cfg, inputs) in corpus() {
        let a = run_config(&cfg, &inputs, true);
        let b = run_config(&cfg, &inputs, true);
        assert_eq!(a.to_jsonl(), b.to_jsonl(), "{name}");
        assert_eq!(a.trace_jsonl(), b.trace_jsonl(), "{name}");
        // a reused pipeline starts from a clean state
        let mut p = build_pipeline(&cfg).unwrap();
        let opts = RunOptions {
            include_frames: true,
            ..RunOptions::default()
        };
        let c = run(&mut p, &inputs, &opts).unwrap();
        let d = run(&mut p, &inputs, &opts).unwrap();
        assert_eq!(c.to_jsonl(), a.to_jsonl(), "{name}");
        assert_eq!(d.to_jsonl(), a.to_jsonl(), "{name}");
    }
}

#[test]
fn every_log_line_round_trips() {
    for (name, cfg, inputs) in corpus() {
        let log = run_config(&cfg, &inputs, true);
        for line in log.to_jsonl().lines() {
            let e = wire::parse_line(line).unwrap_or_else(|err| panic!("{name}: {err}: {line}"));
            assert_eq!(wire::to_line(&e), line, "{name}");
        }
    }
}

#[test]
fn fused_run_reports_sources() {
    let mut cfg = config(RoutingCase::Case1FunctionalBranch);
    cfg.modalities.push(ModalityConfig::script("face"));
    let inputs = RunInputs::new()
        .with_clip("body", synth::joy_clip())
        .with_script("face", face_script());
    let log = run_config(&cfg, &inputs, false);
    let fused: Vec<_> = log
        .events
        .iter()
        .filter_map(|e| match &e.payload {
            Payload::Fused(f) => Some(f),
            _ => None,
        })
        .collect();
    assert!(!fused.is_empty());
    assert!(fused
        .iter()
        .any(|f| f.sources.len() == 2 && f.estimate.modality == "body+face"));
    assert!(fused
        .iter()
        .all(|f| f.estimate.label == EmotionLabel::Joy || f.sources.len() == 1));
}

#[test]
fn case2_forwards_only_task_changes() {
    let log = run_config(
        &config(RoutingCase::Case2DialogueController),
        &RunInputs::new().with_clip("body", synth::joy_clip()),
        false,
    );
    let emitted = log.events.iter().filter(|e| e.kind() == EventKind::Task).count();
    let forwarded = log
        .trace
        .iter()
        .filter(|t| t.from == "DialogueController" && t.kind == EventKind::Task)
        .count();
    assert!(emitted > 1);
    assert_eq!(forwarded, 1);
    assert!(log.events.iter().any(|e| e.kind() == EventKind::Emotion));
}

struct Rogue;

impl Component for Rogue {
    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        out.emit(PipelineEvent::new(
            event.t_s,
            ComponentId::Analysis,
            Some("body"),
            Payload::Emotion(EmotionEstimate::neutral(event.t_s, "body")),
        ));
        Ok(())
    }
}

#[test]
fn mistyped_edge_is_rejected() {
    let mut p = build_pipeline(&config(RoutingCase::Case1FunctionalBranch)).unwrap();
    p.replace_component(&NodeId::branch(ComponentId::Analysis, "body"), Box::new(Rogue))
        .unwrap();
    let err = run(
        &mut p,
        &RunInputs::new().with_clip("body", synth::joy_clip()),
        &RunOptions::default(),
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            ArchError::EdgeTypeViolation {
                kind: EventKind::Emotion,
                ..
            }
        ),
        "{err:?}"
    );
}

#[test]
fn configuration_errors() {
    let mut cfg = PipelineConfig::default();
    assert!(matches!(build_pipeline(&cfg), Err(ArchError::ConfigError { ref key, .. }) if key == "rules"));
    cfg = config(RoutingCase::Case1FunctionalBranch);
    cfg.modalities = vec![ModalityConfig {
        shared: true,
        ..ModalityConfig::script("face")
    }];
    assert!(matches!(build_pipeline(&cfg), Err(ArchError::ConfigError { .. })));
    cfg = config(RoutingCase::Case1FunctionalBranch);
    cfg.modalities.push(ModalityConfig::bvh("body"));
    assert!(matches!(build_pipeline(&cfg), Err(ArchError::ConfigError { .. })));
    assert!(PipelineConfig::from_json(r#"{"case": 4}"#).is_err());
    assert!(PipelineConfig::from_json(r#"{"bogus": 1}"#).is_err());
    let p = build_pipeline(&config(RoutingCase::Case1FunctionalBranch)).unwrap();
    let mut p = p;
    assert_eq!(
        run(&mut p, &RunInputs::new(), &RunOptions::default()).unwrap_err(),
        ArchError::MissingInput("body".into())
    );
}

#[test]
fn realtime_pacing_follows_timestamps() {
    let mut cfg = config(RoutingCase::Case1FunctionalBranch);
    cfg.modalities = vec![ModalityConfig::script("face")];
    let mut p = build_pipeline(&cfg).unwrap();
    let inputs = RunInputs::new().with_script("face", face_script());
    let start = Instant::now();
    let log = run(
        &mut p,
        &inputs,
        &RunOptions {
            speed: ReplaySpeed::Realtime,
            include_frames: false,
        },
    )
    .unwrap();
    // script spans 0.9 s .. 1.6 s
    assert!(start.elapsed().as_secs_f64() >= 0.69);
    assert_eq!(log.to_jsonl(), run_config(&cfg, &inputs, false).to_jsonl());
}
