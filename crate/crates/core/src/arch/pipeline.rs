//! Pipeline configuration, graph construction and the reference
//! sequential scheduler.
//!
//! The scheduler merges all input streams by timestamp (ties in modality
//! order), hands each input to its source node and then drains a single FIFO
//! queue of deliveries before taking the next input. Every delivery is
//! checked against the edge typing table and recorded in the trace.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::event::{EventKind, ModalitySelection, Payload, PipelineEvent, TaskSignal};
use super::pac::{Delivery, Facet, FacetAddr, PacTree};
use super::{allowed_kinds, route_emotion, ArchError, ComponentId, RoutingCase};
use crate::analysis::{AnalysisConfig, Analyzer};
use crate::bvh::{replay, MotionClip, ReplaySpeed};
use crate::fusion::{fuse, Aligner, FusionPolicy};
use crate::interpretation::{interpret, load_rules, EmotionEstimate, EmotionLabel, RuleSet};
use crate::kinematics::JointNames;
use crate::stage::{StageConfig, StageCore};

/// `rules` value selecting the rule set shipped with the library.
pub const BUILTIN_RULES: &str = "builtin:default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalitySource {
    /// Motion capture replayed from a BVH clip.
    Bvh,
    /// A scripted stream of ready-made estimates.
    Script,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityConfig {
    pub name: String,
    pub source: ModalitySource,
    /// Also feed this capture to the Physical Interaction component.
    #[serde(default)]
    pub shared: bool,
}

impl ModalityConfig {
    pub fn bvh(name: &str) -> Self {
        Self {
            name: name.into(),
            source: ModalitySource::Bvh,
            shared: false,
        }
    }

    pub fn script(name: &str) -> Self {
        Self {
            name: name.into(),
            source: ModalitySource::Script,
            shared: false,
        }
    }
}

/// Label tables used when the emotion is routed to the Dialogue Controller
/// (tasks) or to the interaction branch (output modalities).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingTables {
    pub tasks: BTreeMap<EmotionLabel, String>,
    pub outputs: BTreeMap<EmotionLabel, String>,
}

impl Default for RoutingTables {
    fn default() -> Self {
        use EmotionLabel::*;
        let map = |pairs: [(EmotionLabel, &str); 7]| pairs.into_iter().map(|(l, s)| (l, s.to_string())).collect();
        Self {
            tasks: map([
                (Anger, "confront"),
                (Sadness, "lament"),
                (Fear, "retreat"),
                (Joy, "celebrate"),
                (Surprise, "reveal"),
                (Disgust, "reject"),
                (Neutral, "idle"),
            ]),
            outputs: map([
                (Anger, "projection"),
                (Sadness, "lighting"),
                (Fear, "sound"),
                (Joy, "projection"),
                (Surprise, "lighting"),
                (Disgust, "sound"),
                (Neutral, "none"),
            ]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub case: RoutingCase,
    pub analysis: AnalysisConfig,
    pub joints: JointNames,
    /// Path of the rule file, or [`BUILTIN_RULES`].
    pub rules: Option<String>,
    pub fusion: FusionPolicy,
    pub stage: StageConfig,
    pub modalities: Vec<ModalityConfig>,
    pub routing: RoutingTables,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            case: RoutingCase::default(),
            analysis: AnalysisConfig::default(),
            joints: JointNames::default(),
            rules: None,
            fusion: FusionPolicy::default(),
            stage: StageConfig::default(),
            modalities: vec![ModalityConfig::bvh("body")],
            routing: RoutingTables::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, ArchError> {
        serde_json::from_str(text).map_err(|e| ArchError::config("config", e.to_string()))
    }

    /// Loads the configured rule set. Relative paths are resolved against
    /// `base_dir` when given.
    pub fn load_rule_set(&self, base_dir: Option<&Path>) -> Result<RuleSet, ArchError> {
        let Some(path) = &self.rules else {
            return Err(ArchError::config("rules", "no rule file configured"));
        };
        if path == BUILTIN_RULES {
            return Ok(RuleSet::default_rules());
        }
        let p = match base_dir {
            Some(dir) if Path::new(path).is_relative() => dir.join(path),
            _ => Path::new(path).to_path_buf(),
        };
        let text =
            std::fs::read_to_string(&p).map_err(|e| ArchError::config("rules", format!("{}: {e}", p.display())))?;
        load_rules(&text).map_err(|e| ArchError::config("rules", e.to_string()))
    }

    /// Checks everything except the rule file.
    pub fn validate(&self) -> Result<(), ArchError> {
        self.analysis
            .validate()
            .map_err(|e| ArchError::config("analysis", e.to_string()))?;
        self.fusion
            .validate()
            .map_err(|e| ArchError::config("fusion", e.to_string()))?;
        StageCore::new(&self.stage).map_err(|e| ArchError::config("stage", e.to_string()))?;
        if self.modalities.is_empty() {
            return Err(ArchError::config("modalities", "at least one modality is required"));
        }
        let mut seen = HashSet::new();
        for (i, m) in self.modalities.iter().enumerate() {
            if m.name.is_empty() || m.name.contains('+') {
                return Err(ArchError::config(
                    format!("modalities[{i}].name"),
                    "modality names must be nonempty and must not contain '+'",
                ));
            }
            if !seen.insert(m.name.as_str()) {
                return Err(ArchError::config(
                    format!("modalities[{i}].name"),
                    format!("duplicate modality {:?}", m.name),
                ));
            }
            if m.shared && m.source != ModalitySource::Bvh {
                return Err(ArchError::config(
                    format!("modalities[{i}].shared"),
                    "only captured (bvh) modalities can be shared with the interaction branch",
                ));
            }
        }
        for label in EmotionLabel::ALL {
            if !self.routing.tasks.contains_key(&label) {
                return Err(ArchError::config(format!("routing.tasks.{label}"), "missing entry"));
            }
            if !self.routing.outputs.contains_key(&label) {
                return Err(ArchError::config(format!("routing.outputs.{label}"), "missing entry"));
            }
        }
        Ok(())
    }
}

/// A node of the pipeline graph: a component type, qualified by modality
/// inside the emotion branch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub component: ComponentId,
    pub modality: Option<String>,
}

impl NodeId {
    pub fn new(component: ComponentId) -> Self {
        Self {
            component,
            modality: None,
        }
    }

    pub fn branch(component: ComponentId, modality: &str) -> Self {
        Self {
            component,
            modality: Some(modality.to_string()),
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.modality {
            Some(m) => write!(f, "{}[{}]", self.component, m),
            None => write!(f, "{}", self.component),
        }
    }
}

enum Action {
    Emit(PipelineEvent),
    Record(PipelineEvent),
    Forward(PipelineEvent),
    Hop {
        from: String,
        to: String,
        event: PipelineEvent,
    },
}

/// What a component produced while handling one event, in order.
#[derive(Default)]
pub struct Outbox {
    actions: Vec<Action>,
}

impl Outbox {
    /// Logs `e` and delivers it on every outgoing edge.
    pub fn emit(&mut self, e: PipelineEvent) {
        self.actions.push(Action::Emit(e));
    }

    /// Logs `e` without delivering it.
    pub fn record(&mut self, e: PipelineEvent) {
        self.actions.push(Action::Record(e));
    }

    /// Delivers `e` on every outgoing edge without logging it again.
    pub fn forward(&mut self, e: PipelineEvent) {
        self.actions.push(Action::Forward(e));
    }

    /// Records an internal transfer (such as a PAC facet hop) in the trace.
    pub fn hop(&mut self, from: String, to: String, event: &PipelineEvent) {
        self.actions.push(Action::Hop {
            from,
            to,
            event: event.clone(),
        });
    }
}

/// A pipeline stage. Components share no state and communicate only
/// through the events they put in their [`Outbox`].
pub trait Component {
    /// Called once at the start of every run; resets run state.
    fn prepare(&mut self, _inputs: &RunInputs) -> Result<(), ArchError> {
        Ok(())
    }

    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError>;

    /// Called once after the last input.
    fn flush(&mut self, _out: &mut Outbox) -> Result<(), ArchError> {
        Ok(())
    }
}

/// Where the tail of the emotion branch sends its result.
#[derive(Clone)]
struct Tail {
    case: RoutingCase,
    routing: RoutingTables,
}

impl Tail {
    fn deliver(&self, out: &mut Outbox, ev: PipelineEvent, label: EmotionLabel) {
        let (t, origin, modality) = (ev.t_s, ev.origin, ev.modality.clone());
        match self.case {
            RoutingCase::Case1FunctionalBranch => out.emit(ev),
            RoutingCase::Case2DialogueController => {
                out.record(ev);
                let task = self.routing.tasks[&label].clone();
                out.emit(PipelineEvent {
                    t_s: t,
                    origin,
                    modality,
                    payload: Payload::Task(TaskSignal { t_s: t, task, label }),
                });
            }
            RoutingCase::Case3InteractionBranch => {
                out.record(ev);
                let output = self.routing.outputs[&label].clone();
                out.emit(PipelineEvent {
                    t_s: t,
                    origin,
                    modality,
                    payload: Payload::Modality(ModalitySelection { t_s: t, output, label }),
                });
            }
        }
    }
}

struct CaptureNode;

impl Component for CaptureNode {
    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        if let Payload::Frame(_) = event.payload {
            out.emit(event.clone());
        }
        Ok(())
    }
}

struct AnalysisNode {
    modality: String,
    names: JointNames,
    config: AnalysisConfig,
    analyzer: Option<Analyzer>,
}

impl Component for AnalysisNode {
    fn prepare(&mut self, inputs: &RunInputs) -> Result<(), ArchError> {
        let clip = inputs
            .clips
            .get(&self.modality)
            .ok_or_else(|| ArchError::MissingInput(self.modality.clone()))?;
        self.analyzer = Some(Analyzer::new(
            clip.skeleton.clone(),
            self.names.clone(),
            self.config.clone(),
        )?);
        Ok(())
    }

    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        let Payload::Frame(frame) = &event.payload else {
            return Ok(());
        };
        let analyzer = self
            .analyzer
            .as_mut()
            .ok_or_else(|| ArchError::MissingInput(self.modality.clone()))?;
        if let Some(fv) = analyzer.push(frame)? {
            out.emit(PipelineEvent::new(
                fv.t_s,
                ComponentId::Analysis,
                Some(&self.modality),
                Payload::Feature(fv),
            ));
        }
        Ok(())
    }
}

struct InterpretationNode {
    modality: String,
    rules: RuleSet,
    /// `None` when the node feeds the Fusion node.
    tail: Option<Tail>,
}

impl Component for InterpretationNode {
    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        let estimate = match &event.payload {
            Payload::Feature(fv) => interpret(fv, &self.rules, &self.modality),
            // scripted branches inject ready-made estimates
            Payload::Emotion(e) => e.clone(),
            _ => return Ok(()),
        };
        let label = estimate.label;
        let ev = PipelineEvent::new(
            estimate.t_s,
            ComponentId::Interpretation,
            Some(&self.modality),
            Payload::Emotion(estimate),
        );
        match &self.tail {
            None => out.emit(ev),
            Some(tail) => tail.deliver(out, ev, label),
        }
        Ok(())
    }
}

struct FusionNode {
    policy: FusionPolicy,
    rules: RuleSet,
    modalities: Vec<String>,
    aligner: Aligner,
    tail: Tail,
}

impl FusionNode {
    fn emit_groups(&self, groups: Vec<Vec<EmotionEstimate>>, out: &mut Outbox) -> Result<(), ArchError> {
        for g in groups {
            let fused = fuse(&g, &self.policy, &self.rules)?;
            let label = fused.estimate.label;
            let ev = PipelineEvent::new(
                fused.estimate.t_s,
                ComponentId::Fusion,
                Some(&fused.estimate.modality.clone()),
                Payload::Fused(fused),
            );
            self.tail.deliver(out, ev, label);
        }
        Ok(())
    }
}

impl Component for FusionNode {
    fn prepare(&mut self, _inputs: &RunInputs) -> Result<(), ArchError> {
        self.aligner = Aligner::new(&self.policy, &self.modalities);
        Ok(())
    }

    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        if let Payload::Emotion(e) = &event.payload {
            let groups = self.aligner.push(e.clone());
            self.emit_groups(groups, out)?;
        }
        Ok(())
    }

    fn flush(&mut self, out: &mut Outbox) -> Result<(), ArchError> {
        let groups = self.aligner.finish();
        self.emit_groups(groups, out)
    }
}

/// Translates emotion-branch output into the functional core's vocabulary.
struct AdapterNode;

impl Component for AdapterNode {
    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        let e = match &event.payload {
            Payload::Emotion(e) => e.clone(),
            Payload::Fused(f) => f.estimate.clone(),
            _ => return Ok(()),
        };
        out.forward(PipelineEvent::new(
            event.t_s,
            ComponentId::FunctionalCoreAdapter,
            event.modality.as_deref(),
            Payload::Emotion(e),
        ));
        Ok(())
    }
}

struct CoreNode {
    config: StageConfig,
    core: StageCore,
}

impl Component for CoreNode {
    fn prepare(&mut self, _inputs: &RunInputs) -> Result<(), ArchError> {
        self.core = StageCore::new(&self.config)?;
        Ok(())
    }

    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        if let Payload::Emotion(e) = &event.payload {
            if let Some(d) = self.core.process(e)? {
                out.emit(PipelineEvent::new(
                    d.t_s,
                    ComponentId::FunctionalCore,
                    None,
                    Payload::Directive(d),
                ));
            }
        }
        Ok(())
    }
}

/// Dialogue Controller: messages enter at the root agent's abstraction and
/// leave through the scene agent's presentation.
struct DialogueNode {
    tree: PacTree,
    task: Option<String>,
}

const ENTRY_AGENT: &str = "root";
const EXIT_AGENT: &str = "scene";

impl DialogueNode {
    fn relay(&self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        let hops = self.tree.send(
            &FacetAddr::new(ENTRY_AGENT, Facet::Abstraction),
            &FacetAddr::new(EXIT_AGENT, Facet::Presentation),
            Delivery::Relayed,
        )?;
        for h in hops {
            out.hop(
                format!("{}/{}", ComponentId::DialogueController, h.from),
                format!("{}/{}", ComponentId::DialogueController, h.to),
                event,
            );
        }
        out.forward(PipelineEvent {
            origin: ComponentId::DialogueController,
            ..event.clone()
        });
        Ok(())
    }
}

impl Component for DialogueNode {
    fn prepare(&mut self, _inputs: &RunInputs) -> Result<(), ArchError> {
        self.task = None;
        Ok(())
    }

    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        match &event.payload {
            Payload::Directive(_) => self.relay(event, out),
            Payload::Task(t) => {
                if self.task.as_deref() == Some(t.task.as_str()) {
                    return Ok(());
                }
                self.task = Some(t.task.clone());
                self.relay(event, out)
            }
            _ => Ok(()),
        }
    }
}

struct LogicalNode;

impl Component for LogicalNode {
    fn handle(&mut self, event: &PipelineEvent, out: &mut Outbox) -> Result<(), ArchError> {
        out.forward(PipelineEvent {
            origin: ComponentId::LogicalInteraction,
            ..event.clone()
        });
        Ok(())
    }
}

/// Physical Interaction: the sink; presentation to the renderer happens
/// through the run log.
struct PhysicalNode;

impl Component for PhysicalNode {
    fn handle(&mut self, _event: &PipelineEvent, _out: &mut Outbox) -> Result<(), ArchError> {
        Ok(())
    }
}

struct Node {
    id: NodeId,
    name: String,
    component: Box<dyn Component>,
}

/// A wired component graph.
pub struct Pipeline {
    config: PipelineConfig,
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    out_edges: Vec<Vec<usize>>,
}

impl Pipeline {
    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Nodes in scheduling (topological) order.
    pub fn nodes(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.nodes[a].id.clone(), self.nodes[b].id.clone()))
            .collect()
    }

    fn index(&self, id: &NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == *id)
    }

    pub fn out_degree(&self, id: &NodeId) -> usize {
        self.index(id).map_or(0, |i| self.out_edges[i].len())
    }

    /// Number of nodes of a component type.
    pub fn count(&self, component: ComponentId) -> usize {
        self.nodes.iter().filter(|n| n.id.component == component).count()
    }

    /// Swaps the implementation behind a node.
    pub fn replace_component(&mut self, id: &NodeId, component: Box<dyn Component>) -> Result<(), ArchError> {
        let i = self
            .index(id)
            .ok_or_else(|| ArchError::config("nodes", format!("no node {id}")))?;
        self.nodes[i].component = component;
        Ok(())
    }

    fn add_node(&mut self, id: NodeId, component: Box<dyn Component>) -> usize {
        self.nodes.push(Node {
            name: id.to_string(),
            id,
            component,
        });
        self.out_edges.push(Vec::new());
        self.nodes.len() - 1
    }

    fn connect(&mut self, a: usize, b: usize) {
        self.edges.push((a, b));
        self.out_edges[a].push(b);
    }

    fn find_kind(&self, component: ComponentId) -> usize {
        self.nodes
            .iter()
            .position(|n| n.id.component == component)
            .expect("arch components are always present")
    }
}

/// Validates `config`, loads its rules and wires the component graph.
///
/// Captured modalities get a Capture → Analysis → Interpretation chain;
/// scripted modalities a lone Interpretation node. With several modalities
/// their estimates meet in a Fusion node. The last node of the emotion
/// branch connects to the component chosen by the routing case.
pub fn build_pipeline(config: &PipelineConfig) -> Result<Pipeline, ArchError> {
    build_pipeline_in(config, None)
}

/// [`build_pipeline`] resolving a relative rule path against `base_dir`.
pub fn build_pipeline_in(config: &PipelineConfig, base_dir: Option<&Path>) -> Result<Pipeline, ArchError> {
    config.validate()?;
    let rules = config.load_rule_set(base_dir)?;
    let mut p = Pipeline {
        config: config.clone(),
        nodes: Vec::new(),
        edges: Vec::new(),
        out_edges: Vec::new(),
    };
    let tail = Tail {
        case: config.case,
        routing: config.routing.clone(),
    };
    let multi = config.modalities.len() > 1;

    let mut interp_nodes = Vec::new();
    let mut shared_captures = Vec::new();
    for m in &config.modalities {
        let interp = InterpretationNode {
            modality: m.name.clone(),
            rules: rules.clone(),
            tail: if multi { None } else { Some(tail.clone()) },
        };
        match m.source {
            ModalitySource::Bvh => {
                let c = p.add_node(NodeId::branch(ComponentId::Capture, &m.name), Box::new(CaptureNode));
                let a = p.add_node(
                    NodeId::branch(ComponentId::Analysis, &m.name),
                    Box::new(AnalysisNode {
                        modality: m.name.clone(),
                        names: config.joints.clone(),
                        config: config.analysis.clone(),
                        analyzer: None,
                    }),
                );
                let i = p.add_node(NodeId::branch(ComponentId::Interpretation, &m.name), Box::new(interp));
                p.connect(c, a);
                p.connect(a, i);
                if m.shared {
                    shared_captures.push(c);
                }
                interp_nodes.push(i);
            }
            ModalitySource::Script => {
                let i = p.add_node(NodeId::branch(ComponentId::Interpretation, &m.name), Box::new(interp));
                interp_nodes.push(i);
            }
        }
    }
    let branch_tail = if multi {
        let names: Vec<String> = config.modalities.iter().map(|m| m.name.clone()).collect();
        let f = p.add_node(
            NodeId::new(ComponentId::Fusion),
            Box::new(FusionNode {
                policy: config.fusion.clone(),
                rules: rules.clone(),
                aligner: Aligner::new(&config.fusion, &names),
                modalities: names,
                tail,
            }),
        );
        for &i in &interp_nodes {
            p.connect(i, f);
        }
        f
    } else {
        interp_nodes[0]
    };

    let core = StageCore::new(&config.stage)?;
    p.add_node(NodeId::new(ComponentId::FunctionalCoreAdapter), Box::new(AdapterNode));
    p.add_node(
        NodeId::new(ComponentId::FunctionalCore),
        Box::new(CoreNode {
            config: config.stage.clone(),
            core,
        }),
    );
    p.add_node(
        NodeId::new(ComponentId::DialogueController),
        Box::new(DialogueNode {
            tree: PacTree::stage(),
            task: None,
        }),
    );
    p.add_node(NodeId::new(ComponentId::LogicalInteraction), Box::new(LogicalNode));
    p.add_node(NodeId::new(ComponentId::PhysicalInteraction), Box::new(PhysicalNode));

    let fca = p.find_kind(ComponentId::FunctionalCoreAdapter);
    let fc = p.find_kind(ComponentId::FunctionalCore);
    let dc = p.find_kind(ComponentId::DialogueController);
    let li = p.find_kind(ComponentId::LogicalInteraction);
    let pi = p.find_kind(ComponentId::PhysicalInteraction);
    p.connect(fca, fc);
    p.connect(fc, dc);
    p.connect(dc, li);
    p.connect(li, pi);
    for c in shared_captures {
        p.connect(c, pi);
    }
    let target = p.find_kind(route_emotion(config.case));
    p.connect(branch_tail, target);
    Ok(p)
}

/// Input data for a run, by modality name.
#[derive(Debug, Clone, Default)]
pub struct RunInputs {
    pub clips: BTreeMap<String, MotionClip>,
    pub scripts: BTreeMap<String, Vec<EmotionEstimate>>,
}

impl RunInputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_clip(mut self, modality: &str, clip: MotionClip) -> Self {
        self.clips.insert(modality.to_string(), clip);
        self
    }

    pub fn with_script(mut self, modality: &str, estimates: Vec<EmotionEstimate>) -> Self {
        self.scripts.insert(modality.to_string(), estimates);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// `Realtime` paces inputs by their timestamps; `Max` runs unpaced.
    pub speed: ReplaySpeed,
    /// Keep frame events in the log.
    pub include_frames: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            speed: ReplaySpeed::Max,
            include_frames: false,
        }
    }
}

/// One delivery between components (or between PAC facets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub seq: u64,
    pub t_s: f64,
    pub from: String,
    pub to: String,
    pub kind: EventKind,
    pub digest: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    /// Events in production order.
    pub events: Vec<PipelineEvent>,
    pub trace: Vec<TraceEntry>,
}

impl RunLog {
    /// The events as JSON Lines.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&crate::wire::to_line(e));
            s.push('\n');
        }
        s
    }

    /// The trace as JSON Lines.
    pub fn trace_jsonl(&self) -> String {
        let mut s = String::new();
        for t in &self.trace {
            s.push_str(&crate::wire::trace_line(t));
            s.push('\n');
        }
        s
    }
}

struct Scheduler<'a> {
    log: RunLog,
    queue: VecDeque<(usize, PipelineEvent)>,
    include_frames: bool,
    sink: &'a mut dyn FnMut(&PipelineEvent),
}

impl Scheduler<'_> {
    fn trace(&mut self, t_s: f64, from: &str, to: &str, kind: EventKind, digest: String) {
        let seq = self.log.trace.len() as u64;
        self.log.trace.push(TraceEntry {
            seq,
            t_s,
            from: from.to_string(),
            to: to.to_string(),
            kind,
            digest,
        });
    }

    fn log(&mut self, e: PipelineEvent) {
        if e.kind() == EventKind::Frame && !self.include_frames {
            return;
        }
        (self.sink)(&e);
        self.log.events.push(e);
    }

    fn deliver(&mut self, p: &Pipeline, from: usize, e: PipelineEvent) -> Result<(), ArchError> {
        let targets = &p.out_edges[from];
        if targets.is_empty() {
            return Ok(());
        }
        let digest = e.digest();
        let kind = e.kind();
        for &to in targets {
            let (a, b) = (&p.nodes[from], &p.nodes[to]);
            if !allowed_kinds(a.id.component, b.id.component).contains(&kind) {
                return Err(ArchError::EdgeTypeViolation {
                    from: a.name.clone(),
                    to: b.name.clone(),
                    kind,
                });
            }
            self.trace(e.t_s, &a.name, &b.name, kind, digest.clone());
            self.queue.push_back((to, e.clone()));
        }
        Ok(())
    }

    fn apply(&mut self, p: &Pipeline, from: usize, out: Outbox) -> Result<(), ArchError> {
        for action in out.actions {
            match action {
                Action::Emit(e) => {
                    self.log(e.clone());
                    self.deliver(p, from, e)?;
                }
                Action::Record(e) => self.log(e),
                Action::Forward(e) => self.deliver(p, from, e)?,
                Action::Hop { from: a, to: b, event } => {
                    self.trace(event.t_s, &a, &b, event.kind(), event.digest());
                }
            }
        }
        Ok(())
    }

    fn drain(&mut self, p: &mut Pipeline) -> Result<(), ArchError> {
        while let Some((node, e)) = self.queue.pop_front() {
            let mut out = Outbox::default();
            p.nodes[node].component.handle(&e, &mut out)?;
            self.apply(p, node, out)?;
        }
        Ok(())
    }
}

/// Runs the pipeline over `inputs` to quiescence and returns the log.
pub fn run(pipeline: &mut Pipeline, inputs: &RunInputs, options: &RunOptions) -> Result<RunLog, ArchError> {
    run_with_sink(pipeline, inputs, options, &mut |_| {})
}

type Source<'a> = std::iter::Peekable<Box<dyn Iterator<Item = PipelineEvent> + 'a>>;

/// [`run`], also passing every logged event to `sink` as soon as it is
/// produced.
pub fn run_with_sink(
    pipeline: &mut Pipeline,
    inputs: &RunInputs,
    options: &RunOptions,
    sink: &mut dyn FnMut(&PipelineEvent),
) -> Result<RunLog, ArchError> {
    let mut sources: Vec<(usize, Source<'_>)> = Vec::new();
    for m in &pipeline.config.modalities {
        match m.source {
            ModalitySource::Bvh => {
                let clip = inputs
                    .clips
                    .get(&m.name)
                    .ok_or_else(|| ArchError::MissingInput(m.name.clone()))?;
                let node = pipeline
                    .index(&NodeId::branch(ComponentId::Capture, &m.name))
                    .expect("built with this config");
                let name = m.name.clone();
                let it: Box<dyn Iterator<Item = PipelineEvent>> = Box::new(
                    replay(clip, ReplaySpeed::Max)
                        .map(move |f| PipelineEvent::new(f.t_s, ComponentId::Capture, Some(&name), Payload::Frame(f))),
                );
                sources.push((node, it.peekable()));
            }
            ModalitySource::Script => {
                let script = inputs
                    .scripts
                    .get(&m.name)
                    .ok_or_else(|| ArchError::MissingInput(m.name.clone()))?;
                let node = pipeline
                    .index(&NodeId::branch(ComponentId::Interpretation, &m.name))
                    .expect("built with this config");
                let name = m.name.clone();
                let it: Box<dyn Iterator<Item = PipelineEvent>> = Box::new(script.iter().map(move |e| {
                    PipelineEvent::new(
                        e.t_s,
                        ComponentId::Interpretation,
                        Some(&name),
                        Payload::Emotion(e.clone()),
                    )
                }));
                sources.push((node, it.peekable()));
            }
        }
    }

    for n in &mut pipeline.nodes {
        n.component.prepare(inputs)?;
    }

    let mut sched = Scheduler {
        log: RunLog::default(),
        queue: VecDeque::new(),
        include_frames: options.include_frames,
        sink,
    };
    let wall_start = Instant::now();
    let mut t_first: Option<f64> = None;
    loop {
        // earliest head; ties go to the earlier modality
        let mut best: Option<(usize, f64)> = None;
        for (k, (_, it)) in sources.iter_mut().enumerate() {
            if let Some(e) = it.peek() {
                if best.is_none_or(|(_, t)| e.t_s < t) {
                    best = Some((k, e.t_s));
                }
            }
        }
        let Some((k, t)) = best else { break };
        if options.speed == ReplaySpeed::Realtime {
            let t0 = *t_first.get_or_insert(t);
            let due = wall_start + Duration::from_secs_f64((t - t0).max(0.0));
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let (node, it) = &mut sources[k];
        let node = *node;
        let e = it.next().expect("peeked");
        sched.queue.push_back((node, e));
        sched.drain(pipeline)?;
    }
    for i in 0..pipeline.nodes.len() {
        let mut out = Outbox::default();
        pipeline.nodes[i].component.flush(&mut out)?;
        sched.apply(pipeline, i, out)?;
        sched.drain(pipeline)?;
    }
    Ok(sched.log)
}
