//! `emostage` command-line driver.
//!
//! Replays a BVH capture (plus optional scripted face and voice streams)
//! through the pipeline and writes the event log as JSON Lines.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use emostage::analysis::analyze_clip;
use emostage::arch::{
    build_pipeline_in, run_with_sink, ComponentId, EventKind, ModalityConfig, ModalitySource, Payload, PipelineConfig,
    PipelineEvent, RoutingCase, RunInputs, RunOptions, BUILTIN_RULES,
};
use emostage::bvh::{self, MotionClip, ReplaySpeed};
use emostage::kinematics::{skeleton_meta, world_positions};
use emostage::script::{synth_modality, ModalityScript};
use emostage::stage::AugmentationMode;
use emostage::wire;

#[derive(Parser)]
#[command(name = "emostage", version, about = "Emotion-aware stage augmentation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the event log.
    Run(RunArgs),
    /// Stop after movement analysis and write the feature vectors.
    Analyze(InputArgs),
    /// Check inputs, configuration and rules without running.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// BVH capture of the dancer.
    #[arg(long)]
    input: PathBuf,
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; `-` or absent for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Scripted face-modality stream (JSON).
    #[arg(long)]
    face: Option<PathBuf>,
    /// Scripted voice-modality stream (JSON).
    #[arg(long)]
    voice: Option<PathBuf>,
    /// Rule file (JSON); the built-in rules when absent.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Where the emotion branch connects.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    case: Option<u8>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_enum, default_value_t = Speed::Max)]
    speed: Speed,
    /// Also write the delivery trace (JSON Lines) to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Keep raw frame events in the log.
    #[arg(long)]
    include_frames: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Magnify,
    Contrast,
}

#[derive(Clone, Copy, ValueEnum)]
enum Speed {
    Real,
    Max,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_clip(path: &Path) -> Result<MotionClip> {
    let text = read(path)?;
    bvh::parse(&text).map_err(|e| anyhow!("{}: {}: {e}", path.display(), e.kind()))
}

/// The configuration with command-line overrides applied, and the directory
/// relative rule paths resolve against.
fn load_config(config: Option<&Path>, args: &PipelineArgs) -> Result<(PipelineConfig, Option<PathBuf>)> {
    let (mut cfg, base) = match config {
        Some(p) => {
            let cfg = PipelineConfig::from_json(&read(p)?).with_context(|| format!("in {}", p.display()))?;
            (cfg, p.parent().map(Path::to_path_buf))
        }
        None => (PipelineConfig::default(), None),
    };
    let mut base = base;
    if let Some(r) = &args.rules {
        cfg.rules = Some(r.display().to_string());
        base = None;
    }
    if cfg.rules.is_none() {
        cfg.rules = Some(BUILTIN_RULES.to_string());
    }
    if let Some(c) = args.case {
        cfg.case = RoutingCase::try_from(c).map_err(|e| anyhow!(e))?;
    }
    if let Some(m) = args.mode {
        cfg.stage.mode = match m {
            Mode::Magnify => AugmentationMode::Magnify,
            Mode::Contrast => AugmentationMode::Contrast,
        };
    }
    for (name, given) in [("face", &args.face), ("voice", &args.voice)] {
        if given.is_some() && !cfg.modalities.iter().any(|m| m.name == name) {
            cfg.modalities.push(ModalityConfig::script(name));
        }
    }
    Ok((cfg, base))
}

/// Clips and scripts for every configured modality. Captured modalities all
/// replay the `--input` clip.
fn load_inputs(
    cfg: &PipelineConfig,
    base: Option<&Path>,
    clip: Option<&MotionClip>,
    args: &PipelineArgs,
) -> Result<RunInputs> {
    let rules = cfg.load_rule_set(base)?;
    let mut inputs = RunInputs::new();
    for m in &cfg.modalities {
        match m.source {
            ModalitySource::Bvh => {
                let clip = clip.ok_or_else(|| anyhow!("modality {:?} needs --input", m.name))?;
                inputs.clips.insert(m.name.clone(), clip.clone());
            }
            ModalitySource::Script => {
                let path = match m.name.as_str() {
                    "face" => args.face.as_ref(),
                    "voice" => args.voice.as_ref(),
                    _ => None,
                }
                .ok_or_else(|| anyhow!("scripted modality {:?} has no script (use --face or --voice)", m.name))?;
                let script = ModalityScript::parse(&read(path)?).with_context(|| format!("in {}", path.display()))?;
                let stream = synth_modality(&script, &m.name, rules.angles())?;
                inputs.scripts.insert(m.name.clone(), stream);
            }
        }
    }
    Ok(inputs)
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let clip = load_clip(&args.input.input)?;
    let (cfg, base) = load_config(args.input.config.as_deref(), &args.pipeline)?;
    let inputs = load_inputs(&cfg, base.as_deref(), Some(&clip), &args.pipeline)?;
    let mut pipeline = build_pipeline_in(&cfg, base.as_deref())?;
    let options = RunOptions {
        speed: match args.speed {
            Speed::Real => ReplaySpeed::Realtime,
            Speed::Max => ReplaySpeed::Max,
        },
        include_frames: args.include_frames,
    };
    let realtime = options.speed == ReplaySpeed::Realtime;
    let mut out = open_out(args.input.out.as_deref())?;
    let mut write_err: Option<io::Error> = None;
    let mut sink = |e: &PipelineEvent| {
        if write_err.is_some() {
            return;
        }
        let mut r = writeln!(out, "{}", wire::to_line(e));
        if r.is_ok() && realtime && e.kind() == EventKind::Directive {
            r = out.flush();
        }
        if let Err(err) = r {
            write_err = Some(err);
        }
    };
    let log = run_with_sink(&mut pipeline, &inputs, &options, &mut sink)?;
    if let Some(e) = write_err {
        return Err(e).context("writing the event log");
    }
    out.flush().context("writing the event log")?;
    if let Some(path) = &args.trace {
        fs::write(path, log.trace_jsonl()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    log::info!("{} events, {} deliveries", log.events.len(), log.trace.len());
    Ok(())
}

fn cmd_analyze(args: &InputArgs) -> Result<()> {
    let clip = load_clip(&args.input)?;
    let (cfg, _) = load_config(args.config.as_deref(), &PipelineArgs::none())?;
    cfg.validate()?;
    let fvs = analyze_clip(&clip, &cfg.joints, &cfg.analysis)?;
    let mut out = open_out(args.out.as_deref())?;
    for fv in fvs {
        let e = PipelineEvent::new(fv.t_s, ComponentId::Analysis, Some("body"), Payload::Feature(fv));
        writeln!(out, "{}", wire::to_line(&e))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let (cfg, base) = load_config(args.config.as_deref(), &args.pipeline)?;
    let clip = match &args.input {
        Some(p) => {
            let clip = load_clip(p)?;
            // joint names must resolve on the first frame
            if let Some(row) = clip.frames.first() {
                let pose = world_positions(&clip.skeleton, row)?;
                skeleton_meta(&clip.skeleton, &pose, &cfg.joints)?;
            }
            Some(clip)
        }
        None => None,
    };
    let rules = cfg.load_rule_set(base.as_deref())?;
    build_pipeline_in(&cfg, base.as_deref())?;
    if clip.is_some() || args.pipeline.face.is_some() || args.pipeline.voice.is_some() {
        load_inputs(&cfg, base.as_deref(), clip.as_ref(), &args.pipeline)?;
    }
    let shadowed = rules.shadowed_rules();
    for r in &shadowed {
        eprintln!(
            "warning: rule {:?} never wins: every profile it matches is taken by a more specific rule",
            r.name
        );
    }
    println!(
        "ok: {} rules ({} shadowed), {} modalities, case {}",
        rules.len(),
        shadowed.len(),
        cfg.modalities.len(),
        cfg.case.number()
    );
    Ok(())
}

impl PipelineArgs {
    fn none() -> Self {
        Self {
            face: None,
            voice: None,
            rules: None,
            case: None,
            mode: None,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
