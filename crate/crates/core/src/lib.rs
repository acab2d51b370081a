//! Deterministic multi-agent hide-and-seek simulation.
//!
//! This crate holds everything that does not need an operating system:
//! exact 2D geometry and occlusion, grid planning, the world step, the
//! heuristic seeker and hider policies, observation rendering, training-label
//! construction and the single-operator guidance state machine. It is
//! `no_std` (with `alloc`); file formats, networking and the CLI live in the
//! `hideseek` crate.
//!
//! A full episode runs through [`episode::run_episode`]:
//!
//! ```
//! use hideseek_core::config::{Setting, WorldConfig};
//! use hideseek_core::episode::{run_episode, heuristic_team, EpisodeOptions};
//!
//! let config = WorldConfig::for_setting(Setting::new(2, 1)).with_max_time(20.0);
//! let mut team = heuristic_team(&config, 7);
//! let result = run_episode(&config, 7, &mut team, &EpisodeOptions::default(), None).unwrap();
//! assert!(result.duration <= 20.0 + config.physics_dt);
//! ```

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod config;
pub mod dataset;
pub mod episode;
pub mod geometry;
pub mod grid;
pub mod guidance;
pub mod hash;
pub mod heuristics;
pub mod intervener;
pub mod mapgen;
pub mod math;
pub mod observation;
pub mod planner;
pub mod policy;
pub mod rng;
pub mod world;

pub use config::{Setting, WorldConfig};
pub use math::Vec2;
pub use world::{AgentId, Role, WorldState};
