//! Ground-truth world state and the physics tick.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, WorldConfig};
use crate::geometry::{in_arena, visible, Obstacle};
use crate::grid::OccupancyGrid;
use crate::hash::Fnv64;
use crate::mapgen::{generate_map, spawn_agents_on, MapError};
use crate::math::Vec2;
use crate::planner::{plan_path, PlanError};

pub type AgentId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Seeker,
    Hider,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Seeker => "seeker",
            Role::Hider => "hider",
        })
    }
}

/// Navigation target. Without a heading the agent keeps facing its
/// direction of travel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub pos: Vec2,
    pub heading: Option<f64>,
}

impl Waypoint {
    pub fn at(pos: Vec2) -> Self {
        Waypoint { pos, heading: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub role: Role,
    pub pos: Vec2,
    /// Orientation (rad).
    pub heading: f64,
    pub speed: f64,
    pub alive: bool,
    pub waypoint: Option<Waypoint>,
    /// Remaining planned points towards `waypoint`.
    pub path: Vec<Vec2>,
    /// Displacement over the last tick divided by `physics_dt`.
    pub velocity: Vec2,
    /// Tick at which a hider was caught.
    pub caught_tick: Option<u64>,
}

impl AgentState {
    pub fn new(id: AgentId, role: Role, pos: Vec2, heading: f64, speed: f64) -> Self {
        AgentState {
            id,
            role,
            pos,
            heading,
            speed,
            alive: true,
            waypoint: None,
            path: Vec::new(),
            velocity: Vec2::ZERO,
            caught_tick: None,
        }
    }

    pub fn is_seeker(&self) -> bool {
        self.role == Role::Seeker
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ongoing,
    Success,
    Timeout,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorldError {
    Config(ConfigError),
    Map(MapError),
}

impl fmt::Display for WorldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorldError::Config(e) => write!(f, "invalid config: {e}"),
            WorldError::Map(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for WorldError {}

impl From<ConfigError> for WorldError {
    fn from(e: ConfigError) -> Self {
        WorldError::Config(e)
    }
}

impl From<MapError> for WorldError {
    fn from(e: MapError) -> Self {
        WorldError::Map(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepError {
    UnknownAgent(AgentId),
    DeadAgent(AgentId),
    OutsideArena { agent: AgentId, x: f64, y: f64 },
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::UnknownAgent(id) => write!(f, "command for unknown agent {id}"),
            StepError::DeadAgent(id) => write!(f, "command for caught agent {id}"),
            StepError::OutsideArena { agent, x, y } => {
                write!(f, "waypoint ({x}, {y}) for agent {agent} lies outside the arena")
            }
        }
    }
}

impl core::error::Error for StepError {}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub config: WorldConfig,
    pub obstacles: Vec<Obstacle>,
    pub occupancy: OccupancyGrid,
    pub agents: Vec<AgentState>,
    pub tick: u64,
    /// Episode seed; every random stream of the episode derives from it.
    pub seed: u64,
}

impl WorldState {
    /// Validate `config`, generate the map and spawn agents for `seed`.
    pub fn new(config: &WorldConfig, seed: u64) -> Result<Self, WorldError> {
        config.validate()?;
        let obstacles = generate_map(config, seed)?;
        let occupancy = OccupancyGrid::build(config.arena_side, config.grid_resolution, &obstacles, config.agent_radius);
        let agents = spawn_agents_on(&obstacles, &occupancy, config, seed)?;
        Ok(WorldState { config: config.clone(), obstacles, occupancy, agents, tick: 0, seed })
    }

    /// World with hand-placed obstacles and agents. Agents must be ordered
    /// seekers first, with ids equal to their index.
    pub fn from_parts(config: &WorldConfig, obstacles: Vec<Obstacle>, agents: Vec<AgentState>, seed: u64) -> Self {
        debug_assert!(agents.iter().enumerate().all(|(i, a)| a.id == i));
        let occupancy = OccupancyGrid::build(config.arena_side, config.grid_resolution, &obstacles, config.agent_radius);
        WorldState { config: config.clone(), obstacles, occupancy, agents, tick: 0, seed }
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.config.physics_dt
    }

    pub fn time_left(&self) -> f64 {
        (self.config.max_time - self.time()).max(0.0)
    }

    pub fn is_decision_tick(&self) -> bool {
        self.tick % self.config.control_period as u64 == 0
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentState> {
        self.agents.get(id)
    }

    pub fn seekers(&self) -> impl Iterator<Item = &AgentState> + '_ {
        self.agents.iter().filter(|a| a.role == Role::Seeker)
    }

    pub fn hiders(&self) -> impl Iterator<Item = &AgentState> + '_ {
        self.agents.iter().filter(|a| a.role == Role::Hider)
    }

    pub fn seeker_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.seekers().map(|a| a.id)
    }

    pub fn range_of(&self, role: Role) -> f64 {
        match role {
            Role::Seeker => self.config.seeker_range,
            Role::Hider => self.config.hider_range,
        }
    }

    /// Live agents of the opposite role that `observer` currently sees.
    pub fn visible_opponents(&self, observer: AgentId) -> Vec<&AgentState> {
        let me = &self.agents[observer];
        let range = self.range_of(me.role);
        self.agents
            .iter()
            .filter(|a| a.alive && a.role != me.role && visible(me.pos, a.pos, &self.obstacles, range))
            .collect()
    }

    fn check_command(&self, id: AgentId, wp: &Waypoint) -> Result<(), StepError> {
        let a = self.agents.get(id).ok_or(StepError::UnknownAgent(id))?;
        if !a.alive {
            return Err(StepError::DeadAgent(id));
        }
        if !wp.pos.is_finite() || !in_arena(wp.pos, self.config.arena_side) {
            return Err(StepError::OutsideArena { agent: id, x: wp.pos.x, y: wp.pos.y });
        }
        Ok(())
    }

    /// Give `id` a new target and plan the route to it. An unreachable goal
    /// is replaced by the nearest reachable cell.
    fn assign(&mut self, id: AgentId, wp: Waypoint) {
        let start = self.agents[id].pos;
        let path = if wp.pos == start {
            Vec::new()
        } else {
            match plan_path(start, wp.pos, &self.occupancy, &self.obstacles) {
                Ok(plan) => plan.waypoints,
                Err(PlanError::Unreachable { nearest }) => plan_path(start, nearest, &self.occupancy, &self.obstacles)
                    .map(|p| p.waypoints)
                    .unwrap_or_default(),
                Err(PlanError::NoFreeSpace) => Vec::new(),
            }
        };
        let a = &mut self.agents[id];
        a.waypoint = Some(wp);
        a.path = path;
    }

    /// Advance one physics tick. Commands are validated as a batch before
    /// anything changes; later entries for the same agent win. Returns the
    /// hiders caught during this tick.
    pub fn step(&mut self, commands: &[(AgentId, Waypoint)]) -> Result<Vec<AgentId>, StepError> {
        for (id, wp) in commands {
            self.check_command(*id, wp)?;
        }
        for &(id, wp) in commands {
            self.assign(id, wp);
        }
        let dt = self.config.physics_dt;
        for i in 0..self.agents.len() {
            if self.agents[i].alive {
                self.advance(i, dt);
            }
        }
        self.tick += 1;
        let catch2 = self.config.catch_radius * self.config.catch_radius;
        let mut caught = Vec::new();
        for h in 0..self.agents.len() {
            let hider = &self.agents[h];
            if hider.role != Role::Hider || !hider.alive {
                continue;
            }
            if self.seekers().any(|s| s.pos.dist_sq(hider.pos) <= catch2) {
                caught.push(h);
            }
        }
        for &h in &caught {
            let a = &mut self.agents[h];
            a.alive = false;
            a.caught_tick = Some(self.tick);
            a.velocity = Vec2::ZERO;
            a.path.clear();
            a.waypoint = None;
        }
        Ok(caught)
    }

    fn advance(&mut self, i: AgentId, dt: f64) {
        let side = self.config.arena_side;
        let obstacles = &self.obstacles;
        let a = &mut self.agents[i];
        let start = a.pos;
        let mut budget = a.speed * dt;
        let mut moved = false;
        while budget > 1e-12 {
            let Some(&target) = a.path.first() else { break };
            let d = a.pos.dist(target);
            let (next, reached) = if d <= budget { (target, true) } else { (a.pos + (target - a.pos) * (budget / d), false) };
            let next = Vec2::new(next.x.clamp(0.0, side), next.y.clamp(0.0, side));
            if obstacles.iter().any(|o| o.segment_intersects(a.pos, next)) {
                // The planner keeps clearance, so this only guards against
                // numerical corner grazing: stop rather than penetrate.
                a.path.clear();
                break;
            }
            budget -= a.pos.dist(next);
            if next != a.pos {
                a.heading = (next - a.pos).angle();
                moved = true;
            }
            a.pos = next;
            if reached {
                a.path.remove(0);
            }
        }
        if a.path.is_empty() {
            if let Some(h) = a.waypoint.and_then(|w| w.heading) {
                a.heading = h;
            }
        }
        a.velocity = if moved { (a.pos - start) * (1.0 / dt) } else { Vec2::ZERO };
    }

    pub fn status(&self) -> Status {
        if self.hiders().all(|h| !h.alive) {
            Status::Success
        } else if self.tick >= self.config.max_ticks() {
            Status::Timeout
        } else {
            Status::Ongoing
        }
    }

    /// Fingerprint of the dynamic state (tick, poses, liveness).
    pub fn state_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        self.hash_into(&mut h);
        h.finish()
    }

    pub fn hash_into(&self, h: &mut Fnv64) {
        h.u64(self.tick);
        for a in &self.agents {
            h.f64(a.pos.x);
            h.f64(a.pos.y);
            h.f64(a.heading);
            h.bool(a.alive);
        }
    }
}

pub fn check_termination(world: &WorldState) -> Status {
    world.status()
}
