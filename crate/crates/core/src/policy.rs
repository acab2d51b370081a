//! Seeker policy interface and team bindings.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::config::WorldConfig;
use crate::grid::SeenGrid;
use crate::heuristics::{SeekerHeuristic, Sighting};
use crate::observation::FrameStack;
use crate::world::{AgentId, Waypoint, WorldState};

/// Everything a seeker policy may look at when deciding.
pub struct DecisionContext<'a> {
    pub world: &'a WorldState,
    pub agent: AgentId,
    pub seen: &'a SeenGrid,
    /// Present when the policy asked for rendered observations.
    pub frames: Option<&'a FrameStack>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolicyError {
    Timeout { agent: AgentId, deadline_ms: u64 },
    Protocol { agent: AgentId, detail: String },
    Shape { agent: AgentId, detail: String },
    Connection { agent: AgentId, detail: String },
}

impl fmt::Display for PolicyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyError::Timeout { agent, deadline_ms } => {
                write!(f, "policy for agent {agent} missed its {deadline_ms} ms deadline")
            }
            PolicyError::Protocol { agent, detail } => write!(f, "protocol error for agent {agent}: {detail}"),
            PolicyError::Shape { agent, detail } => write!(f, "shape mismatch for agent {agent}: {detail}"),
            PolicyError::Connection { agent, detail } => write!(f, "connection error for agent {agent}: {detail}"),
        }
    }
}

impl core::error::Error for PolicyError {}

pub trait SeekerPolicy: Send {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Waypoint, PolicyError>;

    /// Whether `decide` needs the frame stack.
    fn needs_observation(&self) -> bool {
        false
    }

    /// Short name used in reports.
    fn name(&self) -> &str;
}

impl SeekerPolicy for SeekerHeuristic {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Waypoint, PolicyError> {
        let w = ctx.world;
        let me = &w.agents[ctx.agent];
        let sightings: Vec<Sighting> =
            w.visible_opponents(ctx.agent).into_iter().map(|h| Sighting { id: h.id, pos: h.pos }).collect();
        Ok(SeekerHeuristic::decide(self, me, &sightings, ctx.seen, &w.occupancy))
    }

    fn name(&self) -> &str {
        "heuristic"
    }
}

/// One policy per seeker, indexed by seeker id. Hiders always run the
/// built-in escape heuristic.
pub struct Team {
    pub seekers: Vec<Box<dyn SeekerPolicy>>,
}

impl Team {
    pub fn new(seekers: Vec<Box<dyn SeekerPolicy>>) -> Self {
        Team { seekers }
    }

    /// Policy names in seeker order.
    pub fn names(&self) -> Vec<String> {
        self.seekers.iter().map(|p| String::from(p.name())).collect()
    }
}

/// All seekers on the built-in heuristic; each gets its own random stream
/// derived from the episode seed.
pub fn heuristic_team(config: &WorldConfig, episode_seed: u64) -> Team {
    Team::new(
        (0..config.n_seekers)
            .map(|id| Box::new(SeekerHeuristic::new(id, episode_seed, config)) as Box<dyn SeekerPolicy>)
            .collect(),
    )
}
