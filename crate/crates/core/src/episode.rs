//! Episode loop: map, spawn, then at every decision tick update seen grids,
//! query policies (or the operator's waypoint) and advance physics until
//! all hiders are caught or time runs out.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::config::WorldConfig;
use crate::dataset::{frame_key, ControlSource, EpisodeLog, Outcome, StepRecord};
use crate::grid::SeenGrid;
use crate::guidance::Guidance;
use crate::hash::Fnv64;
use crate::heuristics::{hider_heuristic, EscapeParams};
use crate::observation::{FrameStack, RenderError, RenderOptions, Renderer};
use crate::policy::{DecisionContext, PolicyError, Team};
use crate::world::{AgentId, Role, Status, StepError, Waypoint, WorldError, WorldState};

pub use crate::policy::heuristic_team;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EpisodeOptions {
    pub render: RenderOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    /// Per hider (in id order), seconds.
    pub catch_times: Vec<Option<f64>>,
    pub duration: f64,
    pub seed: u64,
    /// Running hash over every tick's dynamic state.
    pub trajectory_hash: u64,
    pub decisions: u64,
    pub human_steps: u64,
    pub interventions: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EpisodeError {
    World(WorldError),
    /// A policy failed; the episode is void and counts neither as success
    /// nor as timeout.
    Aborted { tick: u64, error: PolicyError },
    Step(StepError),
    Render(RenderError),
    TeamSize { expected: usize, got: usize },
}

impl fmt::Display for EpisodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpisodeError::World(e) => e.fmt(f),
            EpisodeError::Aborted { tick, error } => write!(f, "episode aborted at tick {tick}: {error}"),
            EpisodeError::Step(e) => e.fmt(f),
            EpisodeError::Render(e) => e.fmt(f),
            EpisodeError::TeamSize { expected, got } => write!(f, "team has {got} seeker policies, setting needs {expected}"),
        }
    }
}

impl core::error::Error for EpisodeError {}

impl From<WorldError> for EpisodeError {
    fn from(e: WorldError) -> Self {
        EpisodeError::World(e)
    }
}

impl EpisodeError {
    pub fn is_aborted(&self) -> bool {
        matches!(self, EpisodeError::Aborted { .. })
    }
}

/// Called at every decision tick before queued commands are applied; this
/// is where an operator stand-in issues commands.
pub trait DecisionHook {
    fn on_decision(&mut self, world: &WorldState, guidance: &mut Guidance);
}

/// Step-wise episode runner shared by headless runs and live sessions.
pub struct Episode {
    pub world: WorldState,
    pub seen: Vec<SeenGrid>,
    pub stacks: Vec<FrameStack>,
    pub guidance: Guidance,
    renderer: Option<Renderer>,
    options: EpisodeOptions,
    escape: EscapeParams,
    hash: Fnv64,
    decisions: u64,
    human_steps: u64,
}

impl Episode {
    pub fn new(config: &WorldConfig, seed: u64, options: EpisodeOptions) -> Result<Self, EpisodeError> {
        Ok(Self::from_world(WorldState::new(config, seed)?, options))
    }

    pub fn from_world(world: WorldState, options: EpisodeOptions) -> Self {
        let config = &world.config;
        let seen = (0..config.n_seekers).map(|_| SeenGrid::new(world.occupancy.geom)).collect();
        let stacks = (0..config.n_seekers).map(|_| FrameStack::new(config.frame_stack)).collect();
        let mut hash = Fnv64::new();
        world.hash_into(&mut hash);
        Episode {
            seen,
            stacks,
            guidance: Guidance::new(config),
            renderer: None,
            options,
            escape: EscapeParams::from_config(config),
            hash,
            decisions: 0,
            human_steps: 0,
            world,
        }
    }

    pub fn status(&self) -> Status {
        self.world.status()
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn trajectory_hash(&self) -> u64 {
        self.hash.finish()
    }

    /// Fill in the log header for this episode.
    pub fn begin_log(&self, log: &mut EpisodeLog) {
        let m = &mut log.meta;
        m.seed = self.world.seed;
        m.config = self.world.config.clone();
        m.obstacles = self.world.obstacles.clone();
    }

    /// Advance one physics tick, making decisions first when one is due.
    pub fn tick(
        &mut self,
        team: &mut Team,
        hook: Option<&mut dyn DecisionHook>,
        mut log: Option<&mut EpisodeLog>,
    ) -> Result<Status, EpisodeError> {
        let n_seekers = self.world.config.n_seekers;
        if team.seekers.len() != n_seekers {
            return Err(EpisodeError::TeamSize { expected: n_seekers, got: team.seekers.len() });
        }
        let status = self.status();
        if status != Status::Ongoing {
            return Ok(status);
        }
        let mut commands: Vec<(AgentId, Waypoint)> = Vec::new();
        if self.world.is_decision_tick() {
            if let Some(h) = hook {
                h.on_decision(&self.world, &mut self.guidance);
            }
            self.guidance.apply_pending(self.world.tick);
            self.decide(team, &mut commands, log.as_deref_mut())?;
            self.decisions += 1;
        }
        self.world.step(&commands).map_err(EpisodeError::Step)?;
        self.guidance.after_step(&self.world);
        self.world.hash_into(&mut self.hash);
        let status = self.status();
        if status != Status::Ongoing {
            if let Some(log) = log {
                self.finish_log(log);
            }
        }
        Ok(status)
    }

    fn decide(
        &mut self,
        team: &mut Team,
        commands: &mut Vec<(AgentId, Waypoint)>,
        mut log: Option<&mut EpisodeLog>,
    ) -> Result<(), EpisodeError> {
        let world = &self.world;
        let n_seekers = world.config.n_seekers;
        let decision = self.decisions;
        let ep_id = log.as_ref().map_or(0, |l| l.meta.episode_id);
        for id in 0..n_seekers {
            self.seen[id].update(world.agents[id].pos, &world.obstacles, world.config.seeker_range);
        }
        for id in 0..n_seekers {
            let policy = &mut team.seekers[id];
            let rendered = if log.is_some() || policy.needs_observation() {
                let renderer = self.renderer.get_or_insert_with(|| Renderer::new(world));
                let frame = renderer.render(world, id, &self.seen[id], self.options.render).map_err(EpisodeError::Render)?;
                let frame = Arc::new(frame);
                self.stacks[id].push(frame.clone());
                Some(frame)
            } else {
                None
            };
            let (wp, source) = match self.guidance.controls(id) {
                Some(p) => (Waypoint::at(p), ControlSource::Human),
                None => {
                    let ctx = DecisionContext {
                        world,
                        agent: id,
                        seen: &self.seen[id],
                        frames: policy.needs_observation().then_some(&self.stacks[id]),
                    };
                    let wp = policy.decide(&ctx).map_err(|error| EpisodeError::Aborted { tick: world.tick, error })?;
                    (wp, ControlSource::Heuristic)
                }
            };
            if source == ControlSource::Human {
                self.human_steps += 1;
            }
            commands.push((id, wp));
            if let Some(log) = log.as_deref_mut() {
                let key = frame_key(decision, id);
                if let Some(f) = rendered {
                    log.frames.insert(key.clone(), f);
                }
                log.steps.push(record(ep_id, world, id, decision, Some(key), Some(wp), source));
            }
        }
        for h in n_seekers..world.agents.len() {
            let me = &world.agents[h];
            if !me.alive {
                if let Some(log) = log.as_deref_mut() {
                    log.steps.push(record(ep_id, world, h, decision, None, None, ControlSource::Heuristic));
                }
                continue;
            }
            let seekers: Vec<_> = world.visible_opponents(h).into_iter().map(|s| s.pos).collect();
            let wp = hider_heuristic(me, &seekers, &world.obstacles, &self.escape);
            commands.push((h, wp));
            if let Some(log) = log.as_deref_mut() {
                log.steps.push(record(ep_id, world, h, decision, None, Some(wp), ControlSource::Heuristic));
            }
        }
        Ok(())
    }

    pub fn result(&self) -> EpisodeResult {
        let w = &self.world;
        let dt = w.config.physics_dt;
        EpisodeResult {
            outcome: if w.status() == Status::Success { Outcome::Success } else { Outcome::Timeout },
            catch_times: w.hiders().map(|h| h.caught_tick.map(|t| t as f64 * dt)).collect(),
            duration: w.time(),
            seed: w.seed,
            trajectory_hash: self.trajectory_hash(),
            decisions: self.decisions,
            human_steps: self.human_steps,
            interventions: self.guidance.interventions().len(),
        }
    }

    fn finish_log(&self, log: &mut EpisodeLog) {
        let r = self.result();
        let m = &mut log.meta;
        m.outcome = Some(r.outcome);
        m.catch_times = r.catch_times;
        m.duration = r.duration;
        m.n_decisions = r.decisions;
        m.trajectory_hash = r.trajectory_hash;
        m.human_steps = r.human_steps;
    }

    /// Run to completion.
    pub fn run(
        &mut self,
        team: &mut Team,
        mut hook: Option<&mut dyn DecisionHook>,
        mut log: Option<&mut EpisodeLog>,
    ) -> Result<EpisodeResult, EpisodeError> {
        if let Some(log) = log.as_deref_mut() {
            self.begin_log(log);
        }
        loop {
            let hook = hook.as_mut().map(|h| &mut **h as &mut dyn DecisionHook);
            if self.tick(team, hook, log.as_deref_mut())? != Status::Ongoing {
                return Ok(self.result());
            }
        }
    }
}

fn record(
    episode_id: u64,
    world: &WorldState,
    id: AgentId,
    decision: u64,
    obs_ref: Option<alloc::string::String>,
    wp: Option<Waypoint>,
    source: ControlSource,
) -> StepRecord {
    let a = &world.agents[id];
    StepRecord {
        episode_id,
        tick: world.tick,
        decision,
        agent_id: id,
        role: a.role,
        obs_ref: if a.role == Role::Seeker { obs_ref } else { None },
        x: a.pos.x,
        y: a.pos.y,
        o: a.heading,
        alive: a.alive,
        waypoint: wp.map(|w| [w.pos.x, w.pos.y]),
        control_source: source,
        n_seekers: world.config.n_seekers,
        n_hiders: world.config.n_hiders,
    }
}

/// Headless episode. With a log attached, every decision step of every agent
/// is recorded together with each seeker's rendered frame.
pub fn run_episode(
    config: &WorldConfig,
    seed: u64,
    team: &mut Team,
    options: &EpisodeOptions,
    log: Option<&mut EpisodeLog>,
) -> Result<EpisodeResult, EpisodeError> {
    let mut ep = Episode::new(config, seed, *options)?;
    ep.run(team, None, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Setting;

    #[test]
    fn short_episode_is_deterministic() {
        let config = WorldConfig::for_setting(Setting::new(2, 1)).with_max_time(15.0);
        let run = || {
            let mut team = heuristic_team(&config, 3);
            run_episode(&config, 3, &mut team, &EpisodeOptions::default(), None).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.duration <= 15.0 + 1e-9);
        assert_eq!(a.catch_times.len(), 1);
    }

    #[test]
    fn team_size_checked() {
        let config = WorldConfig::for_setting(Setting::new(2, 1));
        let mut team = heuristic_team(&WorldConfig::for_setting(Setting::new(1, 1)), 3);
        assert_eq!(
            run_episode(&config, 3, &mut team, &EpisodeOptions::default(), None),
            Err(EpisodeError::TeamSize { expected: 2, got: 1 })
        );
    }
}
