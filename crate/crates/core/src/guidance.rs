//! Single-operator guidance: one human steers at most one seeker at a time by
//! clicking waypoints; every other seeker keeps its bound policy.
//!
//! Commands are validated on submission and queued; the queue is drained at
//! the next decision tick. An intervention ends when the seeker arrives
//! within `intervention_radius` of the click (or its planned route runs out),
//! when the operator releases it, or when a newer click replaces it.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::config::WorldConfig;
use crate::geometry::in_arena;
use crate::math::Vec2;
use crate::world::{AgentId, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterventionState {
    Active,
    Completed,
    /// Replaced by a newer click on the same seeker.
    Overridden,
    /// Released by the operator, or superseded by a click on another seeker.
    Released,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub seeker: AgentId,
    pub waypoint: Vec2,
    pub issue_tick: u64,
    pub end_tick: Option<u64>,
    pub state: InterventionState,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Command {
    Select { id: AgentId },
    Waypoint { x: f64, y: f64 },
    Release { id: AgentId },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CommandError {
    UnknownSeeker(AgentId),
    NoSelection,
    OutsideArena { x: f64, y: f64 },
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandError::UnknownSeeker(id) => write!(f, "no seeker with id {id}"),
            CommandError::NoSelection => f.write_str("waypoint given but no seeker is selected"),
            CommandError::OutsideArena { x, y } => write!(f, "waypoint ({x}, {y}) lies outside the arena"),
        }
    }
}

impl core::error::Error for CommandError {}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Pending {
    Waypoint { seeker: AgentId, pos: Vec2 },
    Release(AgentId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Guidance {
    n_seekers: usize,
    arena_side: f64,
    radius: f64,
    selected: Option<AgentId>,
    pending: VecDeque<Pending>,
    history: Vec<Intervention>,
    active: Option<usize>,
}

impl Guidance {
    pub fn new(config: &WorldConfig) -> Self {
        Guidance {
            n_seekers: config.n_seekers,
            arena_side: config.arena_side,
            radius: config.intervention_radius,
            selected: None,
            pending: VecDeque::new(),
            history: Vec::new(),
            active: None,
        }
    }

    pub fn selected(&self) -> Option<AgentId> {
        self.selected
    }

    /// Every intervention issued so far, in issue order.
    pub fn interventions(&self) -> &[Intervention] {
        &self.history
    }

    pub fn active(&self) -> Option<&Intervention> {
        self.active.map(|i| &self.history[i])
    }

    /// Human waypoint governing `seeker`, if any.
    pub fn controls(&self, seeker: AgentId) -> Option<Vec2> {
        self.active().filter(|a| a.seeker == seeker).map(|a| a.waypoint)
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Validate and queue a command. Selection changes immediately (it has
    /// no effect on the world); waypoints and releases bind to the seeker
    /// selected at submission and apply at the next decision tick.
    pub fn submit(&mut self, cmd: Command) -> Result<(), CommandError> {
        match cmd {
            Command::Select { id } => {
                self.check_seeker(id)?;
                self.selected = Some(id);
            }
            Command::Waypoint { x, y } => {
                let seeker = self.selected.ok_or(CommandError::NoSelection)?;
                let pos = Vec2::new(x, y);
                if !pos.is_finite() || !in_arena(pos, self.arena_side) {
                    return Err(CommandError::OutsideArena { x, y });
                }
                self.pending.push_back(Pending::Waypoint { seeker, pos });
            }
            Command::Release { id } => {
                self.check_seeker(id)?;
                self.pending.push_back(Pending::Release(id));
            }
        }
        Ok(())
    }

    fn check_seeker(&self, id: AgentId) -> Result<(), CommandError> {
        if id < self.n_seekers {
            Ok(())
        } else {
            Err(CommandError::UnknownSeeker(id))
        }
    }

    fn end_active(&mut self, state: InterventionState, tick: u64) {
        if let Some(i) = self.active.take() {
            self.history[i].state = state;
            self.history[i].end_tick = Some(tick);
        }
    }

    /// Drain queued commands; called at a decision tick before policies run.
    pub fn apply_pending(&mut self, tick: u64) {
        while let Some(p) = self.pending.pop_front() {
            match p {
                Pending::Waypoint { seeker, pos } => {
                    let same = self.active().is_some_and(|a| a.seeker == seeker);
                    let state = if same { InterventionState::Overridden } else { InterventionState::Released };
                    self.end_active(state, tick);
                    self.history.push(Intervention {
                        seeker,
                        waypoint: pos,
                        issue_tick: tick,
                        end_tick: None,
                        state: InterventionState::Active,
                    });
                    self.active = Some(self.history.len() - 1);
                }
                Pending::Release(id) => {
                    if self.active().is_some_and(|a| a.seeker == id) {
                        self.end_active(InterventionState::Released, tick);
                    }
                }
            }
        }
    }

    /// Expire the active intervention once its seeker has arrived or its
    /// route is exhausted; called after every physics tick.
    pub fn after_step(&mut self, world: &WorldState) {
        let Some(a) = self.active() else { return };
        let agent = &world.agents[a.seeker];
        if agent.pos.dist(a.waypoint) <= self.radius || agent.path.is_empty() {
            self.end_active(InterventionState::Completed, world.tick);
        }
    }
}
