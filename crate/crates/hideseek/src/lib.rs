//! Operating-system side of the hide-and-seek workbench.
//!
//! [`hideseek_core`] owns the simulation. This crate adds what needs files,
//! sockets or threads: the TOML config format ([`config_file`]), the on-disk
//! dataset layout ([`store`]), the framed TCP policy protocol ([`bridge`]),
//! per-seeker policy assignment ([`binding`]), batch evaluation ([`eval`]) and
//! the live guidance server ([`guide`]).

pub mod binding;
pub mod bridge;
pub mod config_file;
pub mod eval;
pub mod guide;
pub mod store;

pub use hideseek_core as core;
