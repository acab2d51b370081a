//! Scripted operator: with ground-truth access, sends the seeker closest to a
//! fleeing hider's escape corridor to the constant-bearing intercept point.
//!
//! The corridor is the hider's current velocity ray up to the first wall or
//! obstacle. A faster hider usually cannot be intercepted on the open ray;
//! then the click goes to the corridor's end, where the hider has to turn.
//! By default a click is only sent when a short ground-truth rollout says it
//! leads to a catch the built-in team would not make as soon on its own.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::WorldConfig;
use crate::episode::{DecisionHook, Episode, EpisodeError, EpisodeOptions, EpisodeResult};
use crate::dataset::EpisodeLog;
use crate::geometry::{obstacle_ray_distance, wall_distance};
use crate::guidance::{Command, Guidance};
use crate::math::{intercept_time, point_segment_dist, Vec2};
use crate::policy::{heuristic_team, Team};
use crate::world::{AgentId, Status, WorldState};

/// Minimum time between two interventions (s).
pub const MIN_SPACING: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plan {
    pub seeker: AgentId,
    pub hider: AgentId,
    pub point: Vec2,
    pub time: f64,
}

/// Intervention the scripted operator would issue now, if any.
///
/// Moving hiders are considered closest-threatened first. Seekers are tried
/// in order of distance to the corridor and the first that can intercept
/// inside it is chosen; failing that, the nearest goes to the corridor end.
pub fn plan_intervention(world: &WorldState) -> Option<Plan> {
    let cfg = &world.config;
    if cfg.n_seekers < 2 {
        return None;
    }
    let seekers: Vec<_> = world.seekers().collect();
    let mut hiders: Vec<(f64, AgentId)> = world
        .hiders()
        .filter(|h| h.alive && h.velocity.norm() > 1e-9)
        .map(|h| (seekers.iter().map(|s| s.pos.dist(h.pos)).fold(f64::INFINITY, f64::min), h.id))
        .collect();
    hiders.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, hid) in hiders {
        let h = &world.agents[hid];
        let dir = h.velocity.normalized();
        let wall = wall_distance(h.pos, dir, cfg.arena_side);
        let length = obstacle_ray_distance(h.pos, dir, &world.obstacles, 0.0, wall);
        let end = h.pos + dir * length;
        let mut order: Vec<(f64, AgentId)> =
            seekers.iter().map(|s| (point_segment_dist(s.pos, h.pos, end), s.id)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, sid) in &order {
            let s = &world.agents[sid];
            if let Some(t) = intercept_time(h.pos, h.velocity, s.pos, s.speed) {
                if t * h.speed <= length {
                    return Some(Plan { seeker: sid, hider: hid, point: h.pos + h.velocity * t, time: t });
                }
            }
        }
        if let Some(&(_, sid)) = order.first() {
            let point = h.pos + dir * (length - cfg.agent_radius).max(0.0);
            let time = world.agents[sid].pos.dist(point) / world.agents[sid].speed;
            return Some(Plan { seeker: sid, hider: hid, point, time });
        }
    }
    None
}

/// Default rollout length for the "is this click worth it" check (s).
pub const LOOKAHEAD: f64 = 15.0;

/// Catches within `ticks` from `world` under built-in policies, optionally
/// with `plan` clicked first. Returns (hiders caught, tick of the last catch).
pub fn rollout(world: &WorldState, plan: Option<&Plan>, ticks: u64) -> (usize, u64) {
    let mut ep = Episode::from_world(world.clone(), EpisodeOptions::default());
    if let Some(p) = plan {
        ep.guidance.submit(Command::Select { id: p.seeker }).expect("plan names a seeker");
        ep.guidance.submit(Command::Waypoint { x: p.point.x, y: p.point.y }).expect("plan is inside the arena");
    }
    let mut team = heuristic_team(&world.config, world.seed ^ world.tick);
    let alive = |w: &WorldState| w.hiders().filter(|h| h.alive).count();
    let before = alive(&ep.world);
    for _ in 0..ticks {
        match ep.tick(&mut team, None, None) {
            Ok(Status::Ongoing) => {}
            _ => break,
        }
    }
    (before - alive(&ep.world), ep.world.tick)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedIntervener {
    pub budget: usize,
    /// When set, a plan is only issued if a ground-truth rollout of this
    /// many seconds catches more hiders with the click than without, or the
    /// same number sooner.
    pub lookahead: Option<f64>,
    last_tick: Option<u64>,
    pub issued: Vec<(u64, Plan)>,
}

impl ScriptedIntervener {
    pub fn new(budget: usize) -> Self {
        ScriptedIntervener { budget, lookahead: Some(LOOKAHEAD), last_tick: None, issued: Vec::new() }
    }

    /// Clicks every plan, without the rollout check.
    pub fn ungated(budget: usize) -> Self {
        ScriptedIntervener { lookahead: None, ..Self::new(budget) }
    }

    fn worth_it(&self, world: &WorldState, plan: &Plan) -> bool {
        let Some(secs) = self.lookahead else { return true };
        let ticks = libm::ceil(secs / world.config.physics_dt) as u64;
        let (base_n, base_t) = rollout(world, None, ticks);
        let (with_n, with_t) = rollout(world, Some(plan), ticks);
        with_n > base_n || (with_n == base_n && with_n > 0 && with_t < base_t)
    }

    pub fn used(&self) -> usize {
        self.issued.len()
    }

    /// Commands for this decision tick (empty when idle, spaced out or out
    /// of budget).
    pub fn commands(&mut self, world: &WorldState) -> Vec<Command> {
        if self.issued.len() >= self.budget {
            return Vec::new();
        }
        if let Some(last) = self.last_tick {
            if (world.tick - last) as f64 * world.config.physics_dt < MIN_SPACING - 1e-9 {
                return Vec::new();
            }
        }
        let Some(plan) = plan_intervention(world) else { return Vec::new() };
        if !self.worth_it(world, &plan) {
            return Vec::new();
        }
        self.last_tick = Some(world.tick);
        self.issued.push((world.tick, plan));
        vec![Command::Select { id: plan.seeker }, Command::Waypoint { x: plan.point.x, y: plan.point.y }]
    }
}

impl DecisionHook for ScriptedIntervener {
    fn on_decision(&mut self, world: &WorldState, guidance: &mut Guidance) {
        for c in self.commands(world) {
            // Plans are inside the arena and name real seekers.
            guidance.submit(c).expect("scripted command is valid");
        }
    }
}

/// Headless episode with the scripted operator attached.
pub fn run_with_intervener(
    config: &WorldConfig,
    seed: u64,
    team: &mut Team,
    options: &EpisodeOptions,
    intervener: &mut ScriptedIntervener,
    log: Option<&mut EpisodeLog>,
) -> Result<EpisodeResult, EpisodeError> {
    let mut ep = Episode::new(config, seed, *options)?;
    ep.run(team, Some(intervener), log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{AgentState, Role};

    #[test]
    fn routes_far_seeker_to_intercept() {
        let config = WorldConfig { n_obstacles: 0, n_seekers: 2, n_hiders: 1, ..Default::default() };
        let mut hider = AgentState::new(2, Role::Hider, Vec2::new(20.0, 25.0), 0.0, 8.0);
        hider.velocity = Vec2::new(8.0, 0.0);
        let agents = vec![
            AgentState::new(0, Role::Seeker, Vec2::new(12.0, 25.0), 0.0, 5.0),
            AgentState::new(1, Role::Seeker, Vec2::new(40.0, 35.0), 0.0, 5.0),
            hider,
        ];
        let world = WorldState::from_parts(&config, Vec::new(), agents, 0);
        let plan = plan_intervention(&world).unwrap();
        assert_eq!(plan.seeker, 1);
        let t = intercept_time(Vec2::new(20.0, 25.0), Vec2::new(8.0, 0.0), Vec2::new(40.0, 35.0), 5.0).unwrap();
        assert!(plan.point.dist(Vec2::new(20.0 + 8.0 * t, 25.0)) < 1e-12);
    }

    #[test]
    fn unreachable_run_targets_corridor_end() {
        let config = WorldConfig { n_obstacles: 0, n_seekers: 2, n_hiders: 1, ..Default::default() };
        let mut hider = AgentState::new(2, Role::Hider, Vec2::new(20.0, 25.0), 0.0, 8.0);
        hider.velocity = Vec2::new(8.0, 0.0);
        let agents = vec![
            AgentState::new(0, Role::Seeker, Vec2::new(12.0, 25.0), 0.0, 5.0),
            AgentState::new(1, Role::Seeker, Vec2::new(10.0, 45.0), 0.0, 5.0),
            hider,
        ];
        let world = WorldState::from_parts(&config, Vec::new(), agents, 0);
        let plan = plan_intervention(&world).unwrap();
        assert_eq!(plan.seeker, 0);
        assert_eq!(plan.point, Vec2::new(49.5, 25.0));
    }

    #[test]
    fn zero_budget_is_silent() {
        let config = WorldConfig { n_obstacles: 0, n_seekers: 2, n_hiders: 1, ..Default::default() };
        let mut hider = AgentState::new(2, Role::Hider, Vec2::new(20.0, 25.0), 0.0, 8.0);
        hider.velocity = Vec2::new(8.0, 0.0);
        let agents = vec![
            AgentState::new(0, Role::Seeker, Vec2::new(12.0, 25.0), 0.0, 5.0),
            AgentState::new(1, Role::Seeker, Vec2::new(40.0, 35.0), 0.0, 5.0),
            hider,
        ];
        let world = WorldState::from_parts(&config, Vec::new(), agents, 0);
        assert!(ScriptedIntervener::ungated(0).commands(&world).is_empty());
        let mut one = ScriptedIntervener::ungated(3);
        assert_eq!(one.commands(&world).len(), 2);
        // Spacing: nothing again at the same tick.
        assert!(one.commands(&world).is_empty());
    }
}
