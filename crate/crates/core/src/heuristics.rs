//! Built-in seeker and hider policies.
//!
//! Seekers chase the nearest visible hider and otherwise explore the nearest
//! unseen free cell, falling back to random patrol once the map is fully
//! seen. Hiders idle until a seeker is within sight, then flee along the
//! sampled direction that maximises the time any visible seeker needs to
//! intercept them, discounted by nearby walls and obstacles.

use alloc::collections::VecDeque;
use alloc::vec;

use rand::Rng;

use crate::config::WorldConfig;
use crate::geometry::{obstacle_ray_distance, wall_distance, Obstacle};
use crate::grid::{OccupancyGrid, SeenGrid};
use crate::math::{intercept_time, Vec2, TAU};
use crate::rng::{stream, substream, SimRng};
use crate::world::{AgentId, AgentState, Waypoint};

const MIN_FREE: f64 = 1e-3;

/// Hider with position `pos`, for target selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sighting {
    pub id: AgentId,
    pub pos: Vec2,
}

/// Nearest sighting; exact distance ties go to the lower id.
pub fn nearest(from: Vec2, sightings: &[Sighting]) -> Option<Sighting> {
    sightings.iter().copied().min_by(|a, b| from.dist_sq(a.pos).total_cmp(&from.dist_sq(b.pos)).then(a.id.cmp(&b.id)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeekerMode {
    Chase(AgentId),
    Explore,
    Patrol,
}

/// Stateful seeker heuristic: remembers its exploration or patrol target
/// between decisions and owns its random stream.
#[derive(Clone, Debug)]
pub struct SeekerHeuristic {
    pub id: AgentId,
    rng: SimRng,
    target: Option<usize>,
    patrolling: bool,
    reach_tolerance: f64,
    pub mode: SeekerMode,
}

impl SeekerHeuristic {
    pub fn new(id: AgentId, episode_seed: u64, config: &WorldConfig) -> Self {
        SeekerHeuristic {
            id,
            rng: substream(episode_seed, &[stream::SEEKER_POLICY, id as u64]),
            target: None,
            patrolling: false,
            reach_tolerance: config.heuristics.reach_tolerance,
            mode: SeekerMode::Explore,
        }
    }

    pub fn target_cell(&self) -> Option<usize> {
        self.target
    }

    pub fn decide(&mut self, me: &AgentState, visible_hiders: &[Sighting], seen: &SeenGrid, occupancy: &OccupancyGrid) -> Waypoint {
        if let Some(h) = nearest(me.pos, visible_hiders) {
            // A sighting invalidates any search target.
            self.target = None;
            self.patrolling = false;
            self.mode = SeekerMode::Chase(h.id);
            return Waypoint::at(h.pos);
        }
        let g = occupancy.geom;
        if let Some(t) = self.target {
            let reached = me.pos.dist(g.center(t)) <= self.reach_tolerance;
            if reached || (!self.patrolling && seen.is_seen(t)) {
                self.target = None;
            }
        }
        if self.target.is_none() {
            match nearest_unseen_free(me.pos, seen, occupancy) {
                Some(c) => {
                    self.target = Some(c);
                    self.patrolling = false;
                }
                None => {
                    self.target = random_free_cell(occupancy, &mut self.rng);
                    self.patrolling = true;
                }
            }
        }
        self.mode = if self.patrolling { SeekerMode::Patrol } else { SeekerMode::Explore };
        match self.target {
            Some(t) => Waypoint::at(g.center(t)),
            None => Waypoint::at(me.pos),
        }
    }
}

/// Breadth-first search over free cells from the agent's cell; first unseen
/// free cell in BFS order.
pub fn nearest_unseen_free(from: Vec2, seen: &SeenGrid, occupancy: &OccupancyGrid) -> Option<usize> {
    let g = occupancy.geom;
    let start = occupancy.nearest_free(g.cell_of(from))?;
    let mut visited = vec![false; g.len()];
    let mut queue = VecDeque::new();
    visited[start] = true;
    queue.push_back(start);
    while let Some(i) = queue.pop_front() {
        if !seen.is_seen(i) {
            return Some(i);
        }
        for (n, _) in g.free_neighbors(i, occupancy.blocked()) {
            if !visited[n] {
                visited[n] = true;
                queue.push_back(n);
            }
        }
    }
    None
}

pub fn random_free_cell(occupancy: &OccupancyGrid, rng: &mut SimRng) -> Option<usize> {
    let free = occupancy.free_count();
    if free == 0 {
        return None;
    }
    let k = rng.gen_range(0..free);
    (0..occupancy.geom.len()).filter(|&i| !occupancy.is_blocked(i)).nth(k)
}

/// Constants of the escape score, in the units of the world.
#[derive(Clone, Debug, PartialEq)]
pub struct EscapeParams {
    pub hider_speed: f64,
    pub seeker_speed: f64,
    pub lambda_wall: f64,
    pub lambda_obs: f64,
    /// Free distances are capped at this value (the hider's sensing range).
    pub range_cap: f64,
    pub arena_side: f64,
    pub agent_radius: f64,
    pub lookahead: f64,
    pub n_directions: usize,
}

impl EscapeParams {
    pub fn from_config(config: &WorldConfig) -> Self {
        EscapeParams {
            hider_speed: config.hider_speed,
            seeker_speed: config.seeker_speed,
            lambda_wall: config.heuristics.lambda_wall,
            lambda_obs: config.heuristics.lambda_obs,
            range_cap: config.hider_range,
            arena_side: config.arena_side,
            agent_radius: config.agent_radius,
            lookahead: config.heuristics.lookahead,
            n_directions: config.heuristics.n_directions,
        }
    }
}

/// Constant-bearing intercept time of a seeker at `seeker` against a hider
/// running from `hider` along unit `dir`; infinite when the seeker cannot
/// intercept.
pub fn intercept_score(dir: Vec2, hider: Vec2, seeker: Vec2, p: &EscapeParams) -> f64 {
    intercept_time(hider, dir * p.hider_speed, seeker, p.seeker_speed).unwrap_or(f64::INFINITY)
}

/// Escape score of one direction.
///
/// `value` is the minimum intercept time over visible seekers minus the wall
/// and obstacle penalties; it stays infinite for runs no seeker can cut off.
/// Equal values (typically several safe directions) are ranked by the
/// smaller penalty, then by `away`: the smallest cosine between the run and
/// the line from a seeker to the hider.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeScore {
    pub value: f64,
    pub penalty: f64,
    pub away: f64,
}

impl EscapeScore {
    /// Strict "better than"; equal scores are not better.
    pub fn beats(&self, other: &EscapeScore) -> bool {
        let key = |s: &EscapeScore| (s.value, -s.penalty, s.away);
        let (a, b) = (key(self), key(other));
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)).is_gt()
    }
}

pub fn escape_score(dir: Vec2, hider: Vec2, seekers: &[Vec2], obstacles: &[Obstacle], p: &EscapeParams) -> EscapeScore {
    let t = seekers.iter().map(|&s| intercept_score(dir, hider, s, p)).fold(f64::INFINITY, f64::min);
    let d_wall = wall_distance(hider, dir, p.arena_side).min(p.range_cap).max(MIN_FREE);
    let d_obs = obstacle_ray_distance(hider, dir, obstacles, 0.0, p.range_cap).max(MIN_FREE);
    let penalty = p.lambda_wall / d_wall + p.lambda_obs / d_obs;
    let away = seekers.iter().map(|&s| dir.dot((hider - s).normalized())).fold(f64::INFINITY, f64::min);
    EscapeScore { value: t - penalty, penalty, away }
}

pub fn direction(index: usize, n: usize) -> Vec2 {
    Vec2::from_angle(TAU * index as f64 / n as f64)
}

/// Index of the best of `n_directions` uniformly spaced directions (angle 0
/// first, counter-clockwise); ties keep the smallest index.
pub fn best_direction(hider: Vec2, seekers: &[Vec2], obstacles: &[Obstacle], p: &EscapeParams) -> usize {
    let mut best: Option<(EscapeScore, usize)> = None;
    for k in 0..p.n_directions {
        let s = escape_score(direction(k, p.n_directions), hider, seekers, obstacles, p);
        if best.as_ref().is_none_or(|(b, _)| s.beats(b)) {
            best = Some((s, k));
        }
    }
    best.map_or(0, |b| b.1)
}

/// Point up to `lookahead` along unit `dir` that keeps `agent_radius` from
/// walls and obstacles.
pub fn project_free(from: Vec2, dir: Vec2, obstacles: &[Obstacle], p: &EscapeParams) -> Vec2 {
    let clearance = obstacles.iter().map(|o| o.distance(from)).fold(f64::INFINITY, f64::min);
    // Starting inside the inflation band would block every ray.
    let inflate = p.agent_radius.min(0.5 * clearance);
    let wall = wall_distance(from, dir, p.arena_side) - p.agent_radius;
    let obs = obstacle_ray_distance(from, dir, obstacles, inflate, p.lookahead);
    let step = p.lookahead.min(wall).min(obs).max(0.0);
    let q = from + dir * step;
    Vec2::new(q.x.clamp(0.0, p.arena_side), q.y.clamp(0.0, p.arena_side))
}

/// Hold position when no seeker is visible, otherwise flee along the best
/// escape direction.
pub fn hider_heuristic(me: &AgentState, visible_seekers: &[Vec2], obstacles: &[Obstacle], p: &EscapeParams) -> Waypoint {
    if visible_seekers.is_empty() {
        return Waypoint::at(me.pos);
    }
    let k = best_direction(me.pos, visible_seekers, obstacles, p);
    Waypoint::at(project_free(me.pos, direction(k, p.n_directions), obstacles, p))
}
