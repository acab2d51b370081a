//! Random obstacle layouts and boundary spawns.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::config::WorldConfig;
use crate::geometry::{Obstacle, ShapeKind, ShapeSize};
use crate::grid::OccupancyGrid;
use crate::math::{Vec2, TAU};
use crate::planner::point_clear;
use crate::rng::{stream, substream, SimRng};
use crate::world::{AgentState, Role};

pub const MAX_ATTEMPTS: u64 = 100;
const TRIES_PER_ITEM: usize = 200;

/// Bounding-box side range for crosses, L-shapes and rectangle lengths (m).
pub const BOX_RANGE: (f64, f64) = (4.0, 8.0);
/// Bar thickness range for crosses, L-shapes and rectangle widths (m).
pub const THICKNESS_RANGE: (f64, f64) = (1.0, 2.0);
pub const CYLINDER_RADIUS_RANGE: (f64, f64) = (1.5, 3.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapError {
    /// No layout satisfying clearances and connectivity within the attempt budget.
    UnsatisfiableMap { attempts: u64 },
    /// No spawn satisfying band, separation and free-space constraints.
    UnsatisfiableSpawn { attempts: u64 },
}

impl fmt::Display for MapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapError::UnsatisfiableMap { attempts } => {
                write!(f, "could not place obstacles after {attempts} attempts; config unsatisfiable")
            }
            MapError::UnsatisfiableSpawn { attempts } => {
                write!(f, "could not spawn agents after {attempts} attempts; config unsatisfiable")
            }
        }
    }
}

impl core::error::Error for MapError {}

fn sample_size(kind: ShapeKind, rng: &mut SimRng) -> ShapeSize {
    let mut u = |(lo, hi): (f64, f64)| rng.gen_range(lo..=hi);
    match kind {
        ShapeKind::Cylinder => ShapeSize::Cylinder { radius: u(CYLINDER_RADIUS_RANGE) },
        ShapeKind::Rectangle => ShapeSize::Rectangle { length: u(BOX_RANGE), width: u(THICKNESS_RANGE) },
        ShapeKind::Cross => ShapeSize::Cross { span: u(BOX_RANGE), thickness: u(THICKNESS_RANGE) },
        ShapeKind::LShape => ShapeSize::LShape { leg_x: u(BOX_RANGE), leg_y: u(BOX_RANGE), thickness: u(THICKNESS_RANGE) },
    }
}

fn try_layout(config: &WorldConfig, rng: &mut SimRng) -> Option<Vec<Obstacle>> {
    let side = config.arena_side;
    let wc = config.wall_clearance;
    let mut placed: Vec<Obstacle> = Vec::with_capacity(config.n_obstacles);
    for _ in 0..config.n_obstacles {
        let kind = config.obstacle_types[rng.gen_range(0..config.obstacle_types.len())];
        let size = sample_size(kind, rng);
        let yaw = rng.gen_range(0.0..TAU);
        let (lo, hi) = Obstacle::new(Vec2::ZERO, yaw, size).bounds();
        let (x0, x1) = (wc - lo.x, side - wc - hi.x);
        let (y0, y1) = (wc - lo.y, side - wc - hi.y);
        if x0 > x1 || y0 > y1 {
            return None;
        }
        let mut ok = None;
        for _ in 0..TRIES_PER_ITEM {
            let c = Vec2::new(rng.gen_range(x0..=x1), rng.gen_range(y0..=y1));
            let cand = Obstacle::new(c, yaw, size);
            if placed.iter().all(|o| o.obstacle_distance(&cand) >= config.obstacle_clearance) {
                ok = Some(cand);
                break;
            }
        }
        placed.push(ok?);
    }
    let grid = OccupancyGrid::build(side, config.grid_resolution, &placed, config.agent_radius);
    grid.is_connected().then_some(placed)
}

/// Place `config.n_obstacles` obstacles with wall and pairwise clearances
/// such that free space stays connected. Attempt `k` draws from substream
/// `k` of the map stream.
pub fn generate_map(config: &WorldConfig, seed: u64) -> Result<Vec<Obstacle>, MapError> {
    if config.n_obstacles == 0 {
        return Ok(Vec::new());
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = substream(seed, &[stream::MAP, attempt]);
        if let Some(layout) = try_layout(config, &mut rng) {
            return Ok(layout);
        }
    }
    Err(MapError::UnsatisfiableMap { attempts: MAX_ATTEMPTS })
}

fn in_band(p: Vec2, side: f64, band: f64) -> bool {
    p.x.min(p.y).min(side - p.x).min(side - p.y) <= band
}

fn try_spawn(obstacles: &[Obstacle], grid: &OccupancyGrid, config: &WorldConfig, rng: &mut SimRng) -> Option<Vec<AgentState>> {
    let side = config.arena_side;
    let margin = config.agent_radius;
    let band = config.spawn_band;
    let center = Vec2::new(side / 2.0, side / 2.0);
    let mut agents: Vec<AgentState> = Vec::with_capacity(config.n_agents());
    for id in 0..config.n_agents() {
        let role = if id < config.n_seekers { Role::Seeker } else { Role::Hider };
        let mut found = None;
        for _ in 0..TRIES_PER_ITEM {
            let p = Vec2::new(rng.gen_range(margin..=side - margin), rng.gen_range(margin..=side - margin));
            if !in_band(p, side, band) || !grid.is_free_point(p) || !point_clear(p, obstacles, config.agent_radius) {
                continue;
            }
            if agents.iter().any(|a| a.pos.dist(p) < config.min_spawn_separation) {
                continue;
            }
            found = Some(p);
            break;
        }
        let p = found?;
        let speed = match role {
            Role::Seeker => config.seeker_speed,
            Role::Hider => config.hider_speed,
        };
        agents.push(AgentState::new(id, role, p, (center - p).angle(), speed));
    }
    Some(agents)
}

/// Seekers get ids `0..n_seekers`, hiders the following ids.
pub fn spawn_agents(obstacles: &[Obstacle], config: &WorldConfig, seed: u64) -> Result<Vec<AgentState>, MapError> {
    let grid = OccupancyGrid::build(config.arena_side, config.grid_resolution, obstacles, config.agent_radius);
    spawn_agents_on(obstacles, &grid, config, seed)
}

pub fn spawn_agents_on(
    obstacles: &[Obstacle],
    grid: &OccupancyGrid,
    config: &WorldConfig,
    seed: u64,
) -> Result<Vec<AgentState>, MapError> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = substream(seed, &[stream::SPAWN, attempt]);
        if let Some(agents) = try_spawn(obstacles, grid, config, &mut rng) {
            return Ok(agents);
        }
    }
    Err(MapError::UnsatisfiableSpawn { attempts: MAX_ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_layout(config: &WorldConfig, obs: &[Obstacle]) {
        assert_eq!(obs.len(), config.n_obstacles);
        for (i, o) in obs.iter().enumerate() {
            let (lo, hi) = o.bounds();
            assert!(lo.x >= config.wall_clearance - 1e-9 && lo.y >= config.wall_clearance - 1e-9);
            assert!(hi.x <= config.arena_side - config.wall_clearance + 1e-9);
            assert!(hi.y <= config.arena_side - config.wall_clearance + 1e-9);
            for other in &obs[i + 1..] {
                assert!(o.obstacle_distance(other) >= config.obstacle_clearance - 1e-9);
            }
        }
    }

    #[test]
    fn default_map_seed_42() {
        let config = WorldConfig::default();
        let a = generate_map(&config, 42).unwrap();
        check_layout(&config, &a);
        let b = generate_map(&config, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn many_seeds_valid_and_connected() {
        let config = WorldConfig::default();
        for seed in 0..40 {
            let obs = generate_map(&config, seed).unwrap();
            check_layout(&config, &obs);
            let grid = OccupancyGrid::build(50.0, 0.5, &obs, 0.5);
            assert!(grid.is_connected());
        }
    }

    #[test]
    fn no_obstacles() {
        let config = WorldConfig { n_obstacles: 0, ..Default::default() };
        assert!(generate_map(&config, 9).unwrap().is_empty());
    }

    #[test]
    fn impossible_layout_errors() {
        let config = WorldConfig { n_obstacles: 60, ..Default::default() };
        assert_eq!(generate_map(&config, 1), Err(MapError::UnsatisfiableMap { attempts: MAX_ATTEMPTS }));
    }

    #[test]
    fn spawn_constraints() {
        for (ns, nh) in [(3, 3), (1, 1), (4, 4)] {
            let config = WorldConfig { n_seekers: ns, n_hiders: nh, ..Default::default() };
            for seed in 0..10 {
                let obs = generate_map(&config, seed).unwrap();
                let agents = spawn_agents(&obs, &config, seed).unwrap();
                assert_eq!(agents.len(), ns + nh);
                for (i, a) in agents.iter().enumerate() {
                    assert!(in_band(a.pos, 50.0, 5.0));
                    assert!(obs.iter().all(|o| !o.contains(a.pos)));
                    for b in &agents[i + 1..] {
                        assert!(a.pos.dist(b.pos) >= 10.0);
                    }
                }
                assert_eq!(agents, spawn_agents(&obs, &config, seed).unwrap());
            }
        }
    }

    #[test]
    fn tight_spawn_errors() {
        let config = WorldConfig { n_seekers: 4, n_hiders: 4, min_spawn_separation: 40.0, ..Default::default() };
        let obs = generate_map(&config, 3).unwrap();
        assert_eq!(spawn_agents(&obs, &config, 3), Err(MapError::UnsatisfiableSpawn { attempts: MAX_ATTEMPTS }));
    }
}
