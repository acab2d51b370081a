//! Episode logs and training-sample construction.
//!
//! A log holds one [`StepRecord`] per agent per decision tick plus the
//! rendered frame of every seeker step. Labels are realized future seeker
//! poses, normalized to `[-1, 1]` as `(x̂, ŷ, sin o, cos o)`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::WorldConfig;
use crate::geometry::Obstacle;
use crate::math::{cos, sin, Vec2};
use crate::observation::ObservationTensor;
use crate::world::{AgentId, Role};

pub const FORMAT_VERSION: u32 = 1;
/// Self plus up to three teammates.
pub const TEAM_SLOTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlSource {
    Heuristic,
    Human,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Timeout,
}

/// One agent at one decision tick. Poses are in meters and radians, taken
/// before the tick's movement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode_id: u64,
    pub tick: u64,
    /// Decision index (`tick / control_period`).
    pub decision: u64,
    pub agent_id: AgentId,
    pub role: Role,
    /// Frame key inside the episode directory, seekers only.
    pub obs_ref: Option<String>,
    pub x: f64,
    pub y: f64,
    pub o: f64,
    pub alive: bool,
    /// Waypoint handed to the world this tick.
    pub waypoint: Option<[f64; 2]>,
    pub control_source: ControlSource,
    pub n_seekers: usize,
    pub n_hiders: usize,
}

impl StepRecord {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

pub fn frame_key(decision: u64, agent: AgentId) -> String {
    alloc::format!("frames/{decision:06}_{agent}.bin")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub version: u32,
    pub episode_id: u64,
    pub seed: u64,
    pub config: WorldConfig,
    pub obstacles: Vec<Obstacle>,
    pub outcome: Option<Outcome>,
    /// Per hider, seconds.
    pub catch_times: Vec<Option<f64>>,
    pub duration: f64,
    pub n_decisions: u64,
    pub trajectory_hash: u64,
    /// Human-controlled seeker steps.
    pub human_steps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub meta: EpisodeMeta,
    pub steps: Vec<StepRecord>,
    pub frames: BTreeMap<String, Arc<ObservationTensor>>,
}

impl EpisodeLog {
    pub fn new(episode_id: u64) -> Self {
        EpisodeLog {
            meta: EpisodeMeta {
                version: FORMAT_VERSION,
                episode_id,
                seed: 0,
                config: WorldConfig::default(),
                obstacles: Vec::new(),
                outcome: None,
                catch_times: Vec::new(),
                duration: 0.0,
                n_decisions: 0,
                trajectory_hash: 0,
                human_steps: 0,
            },
            steps: Vec::new(),
            frames: BTreeMap::new(),
        }
    }

    pub fn seeker_steps(&self) -> impl Iterator<Item = &StepRecord> + '_ {
        self.steps.iter().filter(|s| s.role == Role::Seeker)
    }

    /// Training samples available at horizon 1 and below: one per seeker per
    /// decision tick.
    pub fn sample_count(&self) -> usize {
        self.seeker_steps().count()
    }

    fn index(&self) -> BTreeMap<(u64, AgentId), &StepRecord> {
        self.steps.iter().map(|s| ((s.decision, s.agent_id), s)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetError {
    MissingFrame { decision: u64, agent: AgentId, key: String },
    MissingStep { decision: u64, agent: AgentId },
    ZeroHorizon,
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::MissingFrame { decision, agent, key } => {
                write!(f, "step (decision {decision}, agent {agent}) references missing frame {key}")
            }
            DatasetError::MissingStep { decision, agent } => write!(f, "no record for decision {decision}, agent {agent}"),
            DatasetError::ZeroHorizon => f.write_str("horizon must be at least one decision step"),
        }
    }
}

impl core::error::Error for DatasetError {}

/// Map a pose to `(x̂, ŷ, sin o, cos o)`.
pub fn normalize_action(x: f64, y: f64, o: f64, arena_side: f64) -> [f64; 4] {
    [2.0 * x / arena_side - 1.0, 2.0 * y / arena_side - 1.0, sin(o), cos(o)]
}

/// Inverse of [`normalize_action`]; the angle comes from `atan2`.
pub fn denormalize_action(a: [f64; 4], arena_side: f64) -> (Vec2, f64) {
    let x = (a[0] + 1.0) * 0.5 * arena_side;
    let y = (a[1] + 1.0) * 0.5 * arena_side;
    (Vec2::new(x, y), crate::math::atan2(a[2], a[3]))
}

/// Teammate ids sorted by distance to `reference`, ties by ascending id.
pub fn teammate_order(reference: Vec2, teammates: &[(AgentId, Vec2)]) -> Vec<AgentId> {
    let mut v: Vec<(f64, AgentId)> = teammates.iter().map(|&(id, p)| (reference.dist_sq(p), id)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v.into_iter().map(|(_, id)| id).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SourceMode {
    /// A step is Human iff an intervention governed that very step.
    #[default]
    PerStep,
    /// Every step of an episode containing any Human step is Human.
    PerEpisode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub episode_id: u64,
    pub seeker: AgentId,
    pub decision: u64,
    pub horizon: u64,
    /// Oldest first; the earliest decisions repeat the first frame.
    pub frames: Vec<Arc<ObservationTensor>>,
    pub self_label: [f64; 4],
    /// Teammate labels in distance order at decision `t`; absent slots zero.
    pub team_labels: [[f64; 4]; TEAM_SLOTS - 1],
    pub presence: [bool; TEAM_SLOTS],
    pub teammates: Vec<AgentId>,
    pub source: ControlSource,
}

impl TrainingSample {
    /// Contiguous `N·156·156·4` bytes.
    pub fn stacked(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frames.len() * crate::observation::OBS_BYTES);
        for f in &self.frames {
            out.extend_from_slice(f.as_bytes());
        }
        out
    }
}

struct Labeler<'a> {
    log: &'a EpisodeLog,
    index: BTreeMap<(u64, AgentId), &'a StepRecord>,
    n: u64,
    stack: usize,
    side: f64,
    episode_human: bool,
}

impl<'a> Labeler<'a> {
    fn new(log: &'a EpisodeLog) -> Self {
        Labeler {
            log,
            index: log.index(),
            n: log.meta.n_decisions,
            stack: log.meta.config.frame_stack,
            side: log.meta.config.arena_side,
            episode_human: log.seeker_steps().any(|s| s.control_source == ControlSource::Human),
        }
    }

    fn step(&self, decision: u64, agent: AgentId) -> Result<&'a StepRecord, DatasetError> {
        self.index.get(&(decision, agent)).copied().ok_or(DatasetError::MissingStep { decision, agent })
    }

    fn frame(&self, decision: u64, agent: AgentId) -> Result<Arc<ObservationTensor>, DatasetError> {
        let rec = self.step(decision, agent)?;
        let key = rec.obs_ref.clone().unwrap_or_else(|| frame_key(decision, agent));
        self.log.frames.get(&key).cloned().ok_or(DatasetError::MissingFrame { decision, agent, key })
    }

    fn sample(&self, seeker: AgentId, t: u64, h: u64, mode: SourceMode) -> Result<Option<TrainingSample>, DatasetError> {
        if h == 0 {
            return Err(DatasetError::ZeroHorizon);
        }
        if t + h >= self.n {
            return Ok(None);
        }
        let now = self.step(t, seeker)?;
        let future = self.step(t + h, seeker)?;
        let mut frames = Vec::with_capacity(self.stack);
        for k in (0..self.stack as u64).rev() {
            frames.push(self.frame(t.saturating_sub(k), seeker)?);
        }
        let n_seekers = now.n_seekers;
        let mates: Vec<(AgentId, Vec2)> = (0..n_seekers)
            .filter(|&id| id != seeker)
            .map(|id| self.step(t, id).map(|r| (id, r.pos())))
            .collect::<Result<_, _>>()?;
        let order = teammate_order(now.pos(), &mates);
        let mut team_labels = [[0.0; 4]; TEAM_SLOTS - 1];
        let mut presence = [false; TEAM_SLOTS];
        presence[0] = true;
        for (slot, &id) in order.iter().take(TEAM_SLOTS - 1).enumerate() {
            let r = self.step(t + h, id)?;
            team_labels[slot] = normalize_action(r.x, r.y, r.o, self.side);
            presence[slot + 1] = true;
        }
        let source = match mode {
            SourceMode::PerStep => now.control_source,
            SourceMode::PerEpisode if self.episode_human => ControlSource::Human,
            SourceMode::PerEpisode => ControlSource::Heuristic,
        };
        Ok(Some(TrainingSample {
            episode_id: self.log.meta.episode_id,
            seeker,
            decision: t,
            horizon: h,
            frames,
            self_label: normalize_action(future.x, future.y, future.o, self.side),
            team_labels,
            presence,
            teammates: order,
            source,
        }))
    }
}

/// One sample per (seeker, decision `t`) with `t + h` inside the episode.
pub fn make_pairs(log: &EpisodeLog, horizon: u64) -> Result<Vec<TrainingSample>, DatasetError> {
    make_pairs_with(log, horizon, SourceMode::PerStep)
}

pub fn make_pairs_with(log: &EpisodeLog, horizon: u64, mode: SourceMode) -> Result<Vec<TrainingSample>, DatasetError> {
    let lab = Labeler::new(log);
    let mut out = Vec::new();
    for t in 0..lab.n {
        for seeker in 0..log.meta.config.n_seekers {
            if let Some(s) = lab.sample(seeker, t, horizon, mode)? {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Sample of `seeker` at decision `t`; `None` when `t + h` is past the end.
pub fn make_team_sample(log: &EpisodeLog, seeker: AgentId, t: u64, horizon: u64) -> Result<Option<TrainingSample>, DatasetError> {
    Labeler::new(log).sample(seeker, t, horizon, SourceMode::PerStep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchError {
    OddBatchSize(usize),
    /// One source class has no samples; sample uniformly instead.
    EmptyClass(ControlSource),
}

impl fmt::Display for BatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchError::OddBatchSize(n) => write!(f, "balanced batch size must be even, got {n}"),
            BatchError::EmptyClass(c) => {
                write!(f, "no {c:?} samples to balance against; use plain uniform sampling instead")
            }
        }
    }
}

impl core::error::Error for BatchError {}

/// Indices into `sources`: exactly half Human and half Heuristic, uniform
/// with replacement within each class.
pub fn sample_balanced_batch<R: Rng + ?Sized>(
    sources: &[ControlSource],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>, BatchError> {
    if batch_size % 2 != 0 {
        return Err(BatchError::OddBatchSize(batch_size));
    }
    let human: Vec<usize> = (0..sources.len()).filter(|&i| sources[i] == ControlSource::Human).collect();
    let heur: Vec<usize> = (0..sources.len()).filter(|&i| sources[i] == ControlSource::Heuristic).collect();
    if human.is_empty() {
        return Err(BatchError::EmptyClass(ControlSource::Human));
    }
    if heur.is_empty() {
        return Err(BatchError::EmptyClass(ControlSource::Heuristic));
    }
    let half = batch_size / 2;
    let mut out = Vec::with_capacity(batch_size);
    for _ in 0..half {
        out.push(human[rng.gen_range(0..human.len())]);
    }
    for _ in 0..half {
        out.push(heur[rng.gen_range(0..heur.len())]);
    }
    Ok(out)
}
