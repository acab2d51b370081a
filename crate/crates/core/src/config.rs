//! World and heuristic configuration.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::ShapeKind;
use crate::math::round;

pub const MAX_SEEKERS: usize = 4;
pub const MAX_HIDERS: usize = 4;

/// Team sizes, written `<seekers>v<hiders>` (e.g. `3v3`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Setting {
    pub n_seekers: usize,
    pub n_hiders: usize,
}

impl Setting {
    pub const fn new(n_seekers: usize, n_hiders: usize) -> Self {
        Setting { n_seekers, n_hiders }
    }

    pub fn n_agents(&self) -> usize {
        self.n_seekers + self.n_hiders
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}v{}", self.n_seekers, self.n_hiders)
    }
}

impl FromStr for Setting {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::BadSetting(String::from(s));
        let (a, b) = s.trim().split_once(['v', 'V']).ok_or_else(bad)?;
        let n_seekers = a.trim().parse().map_err(|_| bad())?;
        let n_hiders = b.trim().parse().map_err(|_| bad())?;
        let setting = Setting { n_seekers, n_hiders };
        setting.check()?;
        Ok(setting)
    }
}

impl Setting {
    fn check(&self) -> Result<(), ConfigError> {
        if !(1..=MAX_SEEKERS).contains(&self.n_seekers) {
            return Err(ConfigError::SeekerCount(self.n_seekers));
        }
        if !(1..=MAX_HIDERS).contains(&self.n_hiders) {
            return Err(ConfigError::HiderCount(self.n_hiders));
        }
        Ok(())
    }
}

/// Constants of the heuristic seeker and hider policies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicParams {
    /// Candidate escape directions, uniformly spaced.
    pub n_directions: usize,
    /// Distance of the hider's waypoint along the chosen direction (m).
    pub lookahead: f64,
    pub lambda_wall: f64,
    pub lambda_obs: f64,
    /// A patrol or exploration target counts as reached within this distance (m).
    pub reach_tolerance: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams {
            n_directions: 32,
            lookahead: 5.0,
            lambda_wall: 2.0,
            lambda_obs: 2.0,
            reach_tolerance: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub arena_side: f64,
    pub n_obstacles: usize,
    pub obstacle_types: Vec<ShapeKind>,
    pub max_time: f64,
    pub seeker_speed: f64,
    pub hider_speed: f64,
    pub seeker_range: f64,
    pub hider_range: f64,
    pub n_seekers: usize,
    pub n_hiders: usize,
    pub physics_dt: f64,
    /// Physics ticks per decision.
    pub control_period: u32,
    pub catch_radius: f64,
    /// Base seed used by front ends that do not pass one explicitly.
    pub seed: u64,
    /// Obstacle inflation used by the occupancy grid and the planner (m).
    pub agent_radius: f64,
    pub grid_resolution: f64,
    pub wall_clearance: f64,
    pub obstacle_clearance: f64,
    /// Agents spawn within this distance of the arena boundary (m).
    pub spawn_band: f64,
    pub min_spawn_separation: f64,
    /// Frames per policy input stack.
    pub frame_stack: usize,
    /// A human waypoint completes within this distance (m).
    pub intervention_radius: f64,
    /// When false the hider-faster / seeker-sees-further ordering is not
    /// enforced (used for speed-override experiments).
    pub enforce_role_asymmetry: bool,
    pub heuristics: HeuristicParams,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            arena_side: 50.0,
            n_obstacles: 5,
            obstacle_types: vec![ShapeKind::Cross, ShapeKind::Rectangle, ShapeKind::LShape, ShapeKind::Cylinder],
            max_time: 120.0,
            seeker_speed: 5.0,
            hider_speed: 8.0,
            seeker_range: 16.0,
            hider_range: 10.0,
            n_seekers: 3,
            n_hiders: 3,
            physics_dt: 0.1,
            control_period: 5,
            catch_radius: 1.0,
            seed: 0,
            agent_radius: 0.5,
            grid_resolution: 0.5,
            wall_clearance: 1.0,
            obstacle_clearance: 4.0,
            spawn_band: 5.0,
            min_spawn_separation: 10.0,
            frame_stack: 5,
            intervention_radius: 0.5,
            enforce_role_asymmetry: true,
            heuristics: HeuristicParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    BadSetting(String),
    SeekerCount(usize),
    HiderCount(usize),
    NonPositive(&'static str),
    SpeedOrdering { seeker: f64, hider: f64 },
    RangeOrdering { seeker: f64, hider: f64 },
    NonIntegralHorizon { max_time: f64, dt: f64 },
    NoObstacleTypes,
    NoDirections,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::BadSetting(s) => write!(f, "invalid setting {s:?}, expected e.g. \"3v3\""),
            ConfigError::SeekerCount(n) => write!(f, "seeker count {n} outside 1..={MAX_SEEKERS}"),
            ConfigError::HiderCount(n) => write!(f, "hider count {n} outside 1..={MAX_HIDERS}"),
            ConfigError::NonPositive(field) => write!(f, "{field} must be positive"),
            ConfigError::SpeedOrdering { seeker, hider } => {
                write!(f, "hider speed {hider} must exceed seeker speed {seeker}")
            }
            ConfigError::RangeOrdering { seeker, hider } => {
                write!(f, "seeker range {seeker} must exceed hider range {hider}")
            }
            ConfigError::NonIntegralHorizon { max_time, dt } => {
                write!(f, "max_time {max_time} is not an integral number of {dt} s ticks")
            }
            ConfigError::NoObstacleTypes => write!(f, "obstacles requested but no obstacle types enabled"),
            ConfigError::NoDirections => write!(f, "heuristics.n_directions must be at least 1"),
        }
    }
}

impl core::error::Error for ConfigError {}

impl WorldConfig {
    pub fn for_setting(setting: Setting) -> Self {
        WorldConfig { n_seekers: setting.n_seekers, n_hiders: setting.n_hiders, ..Default::default() }
    }

    pub fn with_max_time(mut self, max_time: f64) -> Self {
        self.max_time = max_time;
        self
    }

    pub fn setting(&self) -> Setting {
        Setting::new(self.n_seekers, self.n_hiders)
    }

    pub fn n_agents(&self) -> usize {
        self.n_seekers + self.n_hiders
    }

    pub fn max_ticks(&self) -> u64 {
        round(self.max_time / self.physics_dt) as u64
    }

    /// Seconds between policy decisions.
    pub fn decision_dt(&self) -> f64 {
        self.physics_dt * self.control_period as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.setting().check()?;
        let positive = [
            ("arena_side", self.arena_side),
            ("max_time", self.max_time),
            ("seeker_speed", self.seeker_speed),
            ("hider_speed", self.hider_speed),
            ("seeker_range", self.seeker_range),
            ("hider_range", self.hider_range),
            ("physics_dt", self.physics_dt),
            ("catch_radius", self.catch_radius),
            ("agent_radius", self.agent_radius),
            ("grid_resolution", self.grid_resolution),
            ("heuristics.lookahead", self.heuristics.lookahead),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::NonPositive(name));
            }
        }
        if self.control_period == 0 {
            return Err(ConfigError::NonPositive("control_period"));
        }
        if self.frame_stack == 0 {
            return Err(ConfigError::NonPositive("frame_stack"));
        }
        if self.heuristics.n_directions == 0 {
            return Err(ConfigError::NoDirections);
        }
        if self.enforce_role_asymmetry {
            if !(self.hider_speed > self.seeker_speed) {
                return Err(ConfigError::SpeedOrdering { seeker: self.seeker_speed, hider: self.hider_speed });
            }
            if !(self.seeker_range > self.hider_range) {
                return Err(ConfigError::RangeOrdering { seeker: self.seeker_range, hider: self.hider_range });
            }
        }
        let ticks = self.max_time / self.physics_dt;
        if (ticks - round(ticks)).abs() > 1e-6 {
            return Err(ConfigError::NonIntegralHorizon { max_time: self.max_time, dt: self.physics_dt });
        }
        if self.n_obstacles > 0 && self.obstacle_types.is_empty() {
            return Err(ConfigError::NoObstacleTypes);
        }
        Ok(())
    }
}
