//! Per-seeker policy assignment.
//!
//! A team spec is either counts in agent-id order (`il-long:2,pe-t:1`) or
//! explicit per-seeker names (`seeker0=heuristic,seeker1=pe-t`). The name
//! `heuristic` is built in; every other name must be registered with an
//! endpoint. Hiders always run the built-in escape heuristic.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use hideseek_core::config::{Setting, WorldConfig};
use hideseek_core::heuristics::SeekerHeuristic;
use hideseek_core::policy::{SeekerPolicy, Team};
use hideseek_core::world::AgentId;

use crate::bridge::{Endpoint, RemoteSeeker};

pub const HEURISTIC: &str = "heuristic";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    HeuristicSeeker,
    HeuristicHider,
    Remote { endpoint: Endpoint },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyBinding {
    pub agent_id: AgentId,
    pub kind: PolicyKind,
    pub frame_stack_n: usize,
}

impl PolicyBinding {
    pub fn policy_name(&self) -> &str {
        match &self.kind {
            PolicyKind::HeuristicSeeker => HEURISTIC,
            PolicyKind::HeuristicHider => "escape",
            PolicyKind::Remote { endpoint } => &endpoint.policy,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BindError {
    #[error("team spec assigns {got} seekers, setting {setting} has {expected}")]
    CountMismatch { setting: String, expected: usize, got: usize },
    #[error("unknown policy {0:?}; register it with an endpoint")]
    UnknownPolicy(String),
    #[error("bad team spec entry {0:?}")]
    Syntax(String),
    #[error("seeker {0} is bound twice")]
    Duplicate(AgentId),
    #[error("seeker {0} is not bound")]
    Unbound(AgentId),
    #[error("bindings do not match the config: {0}")]
    Mismatch(String),
}

/// Policy name → endpoint.
pub type Registry = BTreeMap<String, Endpoint>;

fn seeker_kind(name: &str, registry: &Registry) -> Result<PolicyKind, BindError> {
    if name == HEURISTIC {
        return Ok(PolicyKind::HeuristicSeeker);
    }
    registry
        .get(name)
        .map(|e| PolicyKind::Remote { endpoint: e.clone() })
        .ok_or_else(|| BindError::UnknownPolicy(name.to_owned()))
}

pub fn bind_team(setting: Setting, spec: &str, registry: &Registry, frame_stack_n: usize) -> Result<Vec<PolicyBinding>, BindError> {
    let entries: Vec<&str> = spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let mut seekers: Vec<Option<PolicyKind>> = vec![None; setting.n_seekers];
    if entries.iter().any(|e| e.contains('=')) {
        for e in &entries {
            let (agent, name) = e.split_once('=').ok_or_else(|| BindError::Syntax((*e).to_owned()))?;
            let id: AgentId = agent
                .trim()
                .strip_prefix("seeker")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| BindError::Syntax((*e).to_owned()))?;
            if id >= setting.n_seekers {
                return Err(BindError::CountMismatch {
                    setting: setting.to_string(),
                    expected: setting.n_seekers,
                    got: id + 1,
                });
            }
            if seekers[id].is_some() {
                return Err(BindError::Duplicate(id));
            }
            seekers[id] = Some(seeker_kind(name.trim(), registry)?);
        }
        if let Some(id) = seekers.iter().position(Option::is_none) {
            return Err(BindError::Unbound(id));
        }
    } else {
        let mut next = 0usize;
        for e in &entries {
            let (name, count) = match e.rsplit_once(':') {
                Some((n, c)) => (n.trim(), c.trim().parse::<usize>().map_err(|_| BindError::Syntax((*e).to_owned()))?),
                None => (e.trim(), 1),
            };
            let kind = seeker_kind(name, registry)?;
            for _ in 0..count {
                if next < seekers.len() {
                    seekers[next] = Some(kind.clone());
                }
                next += 1;
            }
        }
        if next != setting.n_seekers {
            return Err(BindError::CountMismatch { setting: setting.to_string(), expected: setting.n_seekers, got: next });
        }
    }
    let mut out: Vec<PolicyBinding> = seekers
        .into_iter()
        .enumerate()
        .map(|(agent_id, k)| PolicyBinding { agent_id, kind: k.expect("all bound"), frame_stack_n })
        .collect();
    for h in 0..setting.n_hiders {
        out.push(PolicyBinding { agent_id: setting.n_seekers + h, kind: PolicyKind::HeuristicHider, frame_stack_n });
    }
    Ok(out)
}

/// All seekers heuristic.
pub fn heuristic_bindings(config: &WorldConfig) -> Vec<PolicyBinding> {
    bind_team(config.setting(), &format!("{HEURISTIC}:{}", config.n_seekers), &Registry::new(), config.frame_stack)
        .expect("heuristic team always binds")
}

/// Label for report rows, e.g. `il-long:2+pe-t:1`.
pub fn combination_label(bindings: &[PolicyBinding]) -> String {
    let mut parts: Vec<(String, usize)> = Vec::new();
    for b in bindings.iter().filter(|b| b.kind != PolicyKind::HeuristicHider) {
        match parts.last_mut() {
            Some((name, n)) if name == b.policy_name() => *n += 1,
            _ => parts.push((b.policy_name().to_owned(), 1)),
        }
    }
    parts.iter().map(|(n, c)| format!("{n}:{c}")).collect::<Vec<_>>().join("+")
}

/// Instantiate the seeker policies of `bindings` for one episode.
pub fn build_team(bindings: &[PolicyBinding], config: &WorldConfig, episode_seed: u64, deadline: Duration) -> Result<Team, BindError> {
    let mut seekers: Vec<Box<dyn SeekerPolicy>> = Vec::with_capacity(config.n_seekers);
    for id in 0..config.n_seekers {
        let b = bindings.iter().find(|b| b.agent_id == id).ok_or(BindError::Unbound(id))?;
        if b.frame_stack_n != config.frame_stack {
            return Err(BindError::Mismatch(format!(
                "seeker {id} expects {} frames, config stacks {}",
                b.frame_stack_n, config.frame_stack
            )));
        }
        seekers.push(match &b.kind {
            PolicyKind::HeuristicSeeker => Box::new(SeekerHeuristic::new(id, episode_seed, config)),
            PolicyKind::Remote { endpoint } => Box::new(RemoteSeeker::new(endpoint.clone(), id, deadline, config)),
            PolicyKind::HeuristicHider => return Err(BindError::Mismatch(format!("agent {id} is a seeker"))),
        });
    }
    for b in bindings.iter().filter(|b| b.agent_id >= config.n_seekers) {
        if b.kind != PolicyKind::HeuristicHider {
            return Err(BindError::Mismatch(format!("hider {} must run the escape heuristic", b.agent_id)));
        }
    }
    Ok(Team::new(seekers))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> Registry {
        let mut r = Registry::new();
        r.insert("il-long".into(), "127.0.0.1:7001/il-long".parse().unwrap());
        r.insert("pe-t".into(), "127.0.0.1:7002/pe-t".parse().unwrap());
        r
    }

    #[test]
    fn counts_in_id_order() {
        let b = bind_team(Setting::new(3, 3), "il-long:2,pe-t:1", &registry(), 5).unwrap();
        assert_eq!(b.len(), 6);
        let names: Vec<_> = b.iter().map(|b| b.policy_name()).collect();
        assert_eq!(names, ["il-long", "il-long", "pe-t", "escape", "escape", "escape"]);
        assert_eq!(combination_label(&b), "il-long:2+pe-t:1");
        let h = bind_team(Setting::new(3, 3), "heuristic:3", &Registry::new(), 5).unwrap();
        assert!(h[..3].iter().all(|b| b.kind == PolicyKind::HeuristicSeeker));
    }

    #[test]
    fn rejections() {
        let r = registry();
        assert!(matches!(bind_team(Setting::new(3, 3), "il-long:1", &r, 5), Err(BindError::CountMismatch { got: 1, .. })));
        assert!(matches!(bind_team(Setting::new(3, 3), "il-long:4", &r, 5), Err(BindError::CountMismatch { got: 4, .. })));
        assert_eq!(bind_team(Setting::new(1, 1), "pe-n:1", &r, 5), Err(BindError::UnknownPolicy("pe-n".into())));
        assert!(matches!(bind_team(Setting::new(1, 1), "pe-t:x", &r, 5), Err(BindError::Syntax(_))));
    }

    #[test]
    fn per_seeker_form() {
        let b = bind_team(Setting::new(2, 1), "seeker1=pe-t, seeker0=heuristic", &registry(), 5).unwrap();
        assert_eq!(b[0].kind, PolicyKind::HeuristicSeeker);
        assert_eq!(b[1].policy_name(), "pe-t");
        assert_eq!(bind_team(Setting::new(2, 1), "seeker0=heuristic", &registry(), 5), Err(BindError::Unbound(1)));
        assert_eq!(
            bind_team(Setting::new(2, 1), "seeker0=heuristic,seeker0=pe-t", &registry(), 5),
            Err(BindError::Duplicate(0))
        );
    }
}
