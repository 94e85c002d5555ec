//! BVH (Biovision Hierarchy) capture: parsing, a round-trip writer and
//! timestamped frame replay.
//!
//! Accepted grammar:
//!
//! ```text
//! HIERARCHY
//! ROOT <name> { OFFSET x y z  CHANNELS n <ch>...  (JOINT ... | End Site { OFFSET x y z })* }
//! MOTION
//! Frames: N
//! Frame Time: t
//! <N rows of frame_width numbers>
//! ```
//!
//! Tokens may be separated by any mix of spaces, tabs, CR and LF; keywords are
//! case-sensitive. Rotation channels are in degrees and compose in the order
//! they are listed. The frame is right-handed with Y up.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::numfmt::fmt_sig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvhError {
    #[error("missing section: {0}")]
    MissingSection(&'static str),
    #[error("line {line}: expected {expected}, found {found:?}")]
    Syntax {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: bad number {token:?}")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: bad channel name {name:?}")]
    BadChannelName { line: usize, name: String },
    #[error("line {line}: channel {channel} listed twice for joint {joint:?}")]
    DuplicateChannel {
        line: usize,
        joint: String,
        channel: Channel,
    },
    #[error("line {line}: frame row has {found} values, skeleton expects {expected}")]
    ChannelMismatch { line: usize, expected: usize, found: usize },
    #[error("header declares {declared} frames but {found} rows are present")]
    FrameCountMismatch { declared: usize, found: usize },
    #[error("frame time must be a positive finite number of seconds, got {0}")]
    BadFrameTime(f64),
}

impl BvhError {
    /// The variant name, for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            BvhError::MissingSection(_) => "MissingSection",
            BvhError::Syntax { .. } => "Syntax",
            BvhError::BadNumber { .. } => "BadNumber",
            BvhError::BadChannelName { .. } => "BadChannelName",
            BvhError::DuplicateChannel { .. } => "DuplicateChannel",
            BvhError::ChannelMismatch { .. } => "ChannelMismatch",
            BvhError::FrameCountMismatch { .. } => "FrameCountMismatch",
            BvhError::BadFrameTime(_) => "BadFrameTime",
        }
    }
}

/// One motion channel of a joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Xposition,
        Channel::Yposition,
        Channel::Zposition,
        Channel::Xrotation,
        Channel::Yrotation,
        Channel::Zrotation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Channel::Xrotation | Channel::Yrotation | Channel::Zrotation)
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL.iter().copied().find(|c| c.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub offset: Vec3,
    pub channels: Vec<Channel>,
    pub parent: Option<usize>,
    pub is_end_site: bool,
}

/// Joint tree in depth-first document order. Parents always precede their
/// children, so a single forward pass visits every parent first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joints: Vec<Joint>,
    pub frame_width: usize,
    pub root_index: usize,
    channel_start: Vec<usize>,
}

impl Skeleton {
    /// Builds a skeleton from joints in depth-first order, checking the tree
    /// and channel invariants.
    pub fn new(joints: Vec<Joint>) -> Result<Self, String> {
        if joints.is_empty() {
            return Err("skeleton has no joints".into());
        }
        let mut roots = 0;
        let mut channel_start = Vec::with_capacity(joints.len());
        let mut width = 0;
        for (i, j) in joints.iter().enumerate() {
            match j.parent {
                None => roots += 1,
                Some(p) if p >= i => {
                    return Err(format!("joint {:?} precedes its parent", j.name));
                }
                Some(p) if joints[p].is_end_site => {
                    return Err(format!("joint {:?} is attached to an End Site", j.name));
                }
                Some(_) => {}
            }
            if j.channels.is_empty() != j.is_end_site {
                return Err(format!(
                    "joint {:?}: channels must be empty exactly for End Sites",
                    j.name
                ));
            }
            for (k, c) in j.channels.iter().enumerate() {
                if j.channels[..k].contains(c) {
                    return Err(format!("joint {:?}: channel {c} repeated", j.name));
                }
            }
            channel_start.push(width);
            width += j.channels.len();
        }
        if roots != 1 || joints[0].parent.is_some() {
            return Err("skeleton must have exactly one root, listed first".into());
        }
        Ok(Self {
            joints,
            frame_width: width,
            root_index: 0,
            channel_start,
        })
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Index of the first channel of joint `i` within a frame row.
    pub fn channel_start(&self, i: usize) -> usize {
        self.channel_start[i]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Scales every offset by `s`. Rotation channels are unaffected.
    pub fn scaled(&self, s: f64) -> Skeleton {
        let mut out = self.clone();
        for j in &mut out.joints {
            j.offset = j.offset * s;
        }
        out
    }
}

/// A parsed clip: the output of the Capture component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionClip {
    pub skeleton: Skeleton,
    pub frame_time_s: f64,
    pub frames: Vec<Vec<f64>>,
}

impl MotionClip {
    pub fn new(skeleton: Skeleton, frame_time_s: f64, frames: Vec<Vec<f64>>) -> Result<Self, BvhError> {
        if !(frame_time_s.is_finite() && frame_time_s > 0.0) {
            return Err(BvhError::BadFrameTime(frame_time_s));
        }
        for row in &frames {
            if row.len() != skeleton.frame_width {
                return Err(BvhError::ChannelMismatch {
                    line: 0,
                    expected: skeleton.frame_width,
                    found: row.len(),
                });
            }
        }
        Ok(Self {
            skeleton,
            frame_time_s,
            frames,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len().saturating_sub(1) as f64 * self.frame_time_s
    }

    /// Translates every frame's root position channels by `v`. Missing root
    /// position channels are left alone.
    pub fn translate_root(&mut self, v: Vec3) {
        let root = &self.skeleton.joints[self.skeleton.root_index];
        let start = self.skeleton.channel_start(self.skeleton.root_index);
        let shifts: Vec<(usize, f64)> = root
            .channels
            .iter()
            .enumerate()
            .filter_map(|(k, c)| match c {
                Channel::Xposition => Some((start + k, v.x)),
                Channel::Yposition => Some((start + k, v.y)),
                Channel::Zposition => Some((start + k, v.z)),
                _ => None,
            })
            .collect();
        for row in &mut self.frames {
            for &(col, d) in &shifts {
                row[col] += d;
            }
        }
    }
}

struct Token<'a> {
    text: &'a str,
    line: usize,
}

struct Tokens<'a> {
    toks: Vec<Token<'a>>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let toks = text
            .lines()
            .enumerate()
            .flat_map(|(n, l)| l.split_whitespace().map(move |t| Token { text: t, line: n + 1 }))
            .collect();
        Self { toks, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.toks.last().map_or(0, |t| t.line)
    }

    fn next(&mut self, expected: &str) -> Result<&Token<'a>, BvhError> {
        let line = self.last_line();
        let t = self.toks.get(self.pos).ok_or_else(|| BvhError::Syntax {
            line,
            expected: expected.to_string(),
            found: "end of input".into(),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, kw: &str) -> Result<usize, BvhError> {
        let t = self.next(kw)?;
        if t.text != kw {
            return Err(BvhError::Syntax {
                line: t.line,
                expected: kw.to_string(),
                found: t.text.to_string(),
            });
        }
        Ok(t.line)
    }

    fn number<T: FromStr>(&mut self, what: &str) -> Result<T, BvhError> {
        let t = self.next(what)?;
        t.text.parse().map_err(|_| BvhError::BadNumber {
            line: t.line,
            token: t.text.to_string(),
        })
    }
}

fn parse_f64(tok: &Token<'_>) -> Result<f64, BvhError> {
    match tok.text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(BvhError::BadNumber {
            line: tok.line,
            token: tok.text.to_string(),
        }),
    }
}

fn parse_offset(toks: &mut Tokens<'_>) -> Result<Vec3, BvhError> {
    toks.expect("OFFSET")?;
    let mut v = [0.0; 3];
    for c in &mut v {
        let t = toks.next("offset component")?;
        *c = parse_f64(t)?;
    }
    Ok(Vec3::from_array(v))
}

fn parse_channels(toks: &mut Tokens<'_>, joint: &str) -> Result<Vec<Channel>, BvhError> {
    let line = toks.expect("CHANNELS")?;
    let n: usize = toks.number("channel count")?;
    if n == 0 || n > 6 {
        return Err(BvhError::Syntax {
            line,
            expected: "a channel count between 1 and 6".into(),
            found: n.to_string(),
        });
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t = toks.next("channel name")?;
        let c: Channel = t.text.parse().map_err(|_| BvhError::BadChannelName {
            line: t.line,
            name: t.text.to_string(),
        })?;
        if out.contains(&c) {
            return Err(BvhError::DuplicateChannel {
                line: t.line,
                joint: joint.to_string(),
                channel: c,
            });
        }
        out.push(c);
    }
    Ok(out)
}

fn parse_joint(
    toks: &mut Tokens<'_>,
    name: String,
    parent: Option<usize>,
    joints: &mut Vec<Joint>,
) -> Result<(), BvhError> {
    toks.expect("{")?;
    let offset = parse_offset(toks)?;
    let channels = parse_channels(toks, &name)?;
    let me = joints.len();
    joints.push(Joint {
        name: name.clone(),
        offset,
        channels,
        parent,
        is_end_site: false,
    });
    loop {
        let t = toks.next("JOINT, End Site or }")?;
        match t.text {
            "}" => return Ok(()),
            "JOINT" => {
                let child = toks.next("joint name")?.text.to_string();
                parse_joint(toks, child, Some(me), joints)?;
            }
            "End" => {
                toks.expect("Site")?;
                toks.expect("{")?;
                let offset = parse_offset(toks)?;
                toks.expect("}")?;
                joints.push(Joint {
                    name: format!("{name}_End"),
                    offset,
                    channels: Vec::new(),
                    parent: Some(me),
                    is_end_site: true,
                });
            }
            other => {
                return Err(BvhError::Syntax {
                    line: t.line,
                    expected: "JOINT, End Site or }".into(),
                    found: other.to_string(),
                })
            }
        }
    }
}

/// Parses a complete BVH document.
pub fn parse(text: &str) -> Result<MotionClip, BvhError> {
    let mut toks = Tokens::new(text);
    if !toks.toks.iter().any(|t| t.text == "HIERARCHY") {
        return Err(BvhError::MissingSection("HIERARCHY"));
    }
    if !toks.toks.iter().any(|t| t.text == "MOTION") {
        return Err(BvhError::MissingSection("MOTION"));
    }

    toks.expect("HIERARCHY")?;
    toks.expect("ROOT")?;
    let root_name = toks.next("root name")?.text.to_string();
    let mut joints = Vec::new();
    parse_joint(&mut toks, root_name, None, &mut joints)?;
    let skeleton = Skeleton::new(joints).map_err(|msg| BvhError::Syntax {
        line: 0,
        expected: "a well-formed joint tree".into(),
        found: msg,
    })?;

    toks.expect("MOTION")?;
    toks.expect("Frames:")?;
    let declared: usize = toks.number("frame count")?;
    toks.expect("Frame")?;
    toks.expect("Time:")?;
    let ft_tok = toks.next("frame time")?;
    let frame_time_s = parse_f64(ft_tok)?;
    if frame_time_s <= 0.0 {
        return Err(BvhError::BadFrameTime(frame_time_s));
    }
    let header_line = ft_tok.line;

    // Remaining tokens are grouped into rows by source line.
    let mut frames: Vec<Vec<f64>> = Vec::with_capacity(declared);
    let mut current_line = header_line;
    let width = skeleton.frame_width;
    let rest = &toks.toks[toks.pos..];
    let mut i = 0;
    while i < rest.len() {
        let line = rest[i].line;
        if line == current_line {
            return Err(BvhError::Syntax {
                line,
                expected: "end of line after Frame Time".into(),
                found: rest[i].text.to_string(),
            });
        }
        let mut row = Vec::with_capacity(width);
        while i < rest.len() && rest[i].line == line {
            row.push(parse_f64(&rest[i])?);
            i += 1;
        }
        if row.len() != width {
            return Err(BvhError::ChannelMismatch {
                line,
                expected: width,
                found: row.len(),
            });
        }
        frames.push(row);
        current_line = line;
    }
    if frames.len() != declared {
        return Err(BvhError::FrameCountMismatch {
            declared,
            found: frames.len(),
        });
    }
    Ok(MotionClip {
        skeleton,
        frame_time_s,
        frames,
    })
}

/// Writes a clip back to BVH text, numbers at 9 significant digits.
pub fn write(clip: &MotionClip) -> String {
    let sk = &clip.skeleton;
    let mut out = String::from("HIERARCHY\n");
    let mut depth_of = vec![0usize; sk.len()];
    // Closing braces are emitted when the walk returns to a shallower depth.
    let mut open: Vec<usize> = Vec::new();
    for (i, j) in sk.joints.iter().enumerate() {
        let depth = j.parent.map_or(0, |p| depth_of[p] + 1);
        depth_of[i] = depth;
        while open.len() > depth {
            open.pop();
            let _ = writeln!(out, "{}}}", "\t".repeat(open.len()));
        }
        let pad = "\t".repeat(depth);
        let head = if j.is_end_site {
            "End Site".to_string()
        } else if j.parent.is_none() {
            format!("ROOT {}", j.name)
        } else {
            format!("JOINT {}", j.name)
        };
        let _ = writeln!(out, "{pad}{head}\n{pad}{{");
        let _ = writeln!(
            out,
            "{pad}\tOFFSET {} {} {}",
            fmt_sig(j.offset.x),
            fmt_sig(j.offset.y),
            fmt_sig(j.offset.z)
        );
        if !j.is_end_site {
            let names: Vec<&str> = j.channels.iter().map(|c| c.as_str()).collect();
            let _ = writeln!(out, "{pad}\tCHANNELS {} {}", names.len(), names.join(" "));
        }
        open.push(i);
    }
    while open.pop().is_some() {
        let _ = writeln!(out, "{}}}", "\t".repeat(open.len()));
    }
    let _ = writeln!(out, "MOTION\nFrames: {}", clip.frames.len());
    let _ = writeln!(out, "Frame Time: {}", fmt_sig(clip.frame_time_s));
    for row in &clip.frames {
        let line: Vec<String> = row.iter().map(|&v| fmt_sig(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// One frame of the capture stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFrameEvent {
    pub t_s: f64,
    pub frame_index: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplaySpeed {
    /// Sleep one frame time between events.
    Realtime,
    /// No pacing.
    Max,
}

/// Iterator over a clip's frames as timestamped events.
///
/// Timestamps are `frame_index * frame_time_s` regardless of pacing.
pub struct Replay<'a> {
    clip: &'a MotionClip,
    next: usize,
    speed: ReplaySpeed,
}

impl Iterator for Replay<'_> {
    type Item = RawFrameEvent;

    fn next(&mut self) -> Option<RawFrameEvent> {
        let row = self.clip.frames.get(self.next)?;
        if self.speed == ReplaySpeed::Realtime && self.next > 0 {
            thread::sleep(Duration::from_secs_f64(self.clip.frame_time_s));
        }
        let ev = frame_event(self.clip, self.next, row);
        self.next += 1;
        Some(ev)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.clip.frames.len() - self.next;
        (n, Some(n))
    }
}

fn frame_event(clip: &MotionClip, index: usize, row: &[f64]) -> RawFrameEvent {
    RawFrameEvent {
        t_s: index as f64 * clip.frame_time_s,
        frame_index: index,
        values: row.to_vec(),
    }
}

pub fn replay(clip: &MotionClip, speed: ReplaySpeed) -> Replay<'_> {
    Replay { clip, next: 0, speed }
}

/// Replays `clip` on a producer thread into a FIFO channel.
pub fn spawn_replay(clip: MotionClip, speed: ReplaySpeed) -> (thread::JoinHandle<()>, mpsc::Receiver<RawFrameEvent>) {
    let (tx, rx) = mpsc::channel();
    let handle = thread::spawn(move || {
        for ev in replay(&clip, speed) {
            if tx.send(ev).is_err() {
                break;
            }
        }
    });
    (handle, rx)
}
