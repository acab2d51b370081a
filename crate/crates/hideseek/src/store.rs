//! On-disk dataset layout.
//!
//! ```text
//! root/manifest.json
//! root/ep_<id>/meta.json       EpisodeMeta
//! root/ep_<id>/steps.jsonl     one StepRecord per line, decision-major, agent id order
//! root/ep_<id>/frames/<decision:06>_<agent>.bin
//! ```
//!
//! A frame file holds one observation: 156 × 156 × 4 bytes, row-major from
//! the top-left pixel, channels R, G, B, self-mask. A step's `obs_ref` is the
//! frame path relative to its episode directory. Positions are meters,
//! orientations radians.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use hideseek_core::config::WorldConfig;
use hideseek_core::dataset::{EpisodeLog, EpisodeMeta, Outcome, StepRecord, FORMAT_VERSION};
use hideseek_core::observation::{ObservationTensor, HIDER, OBS_BYTES, SEEKER, SEEN_FREE, SEEN_OBSTACLE, UNKNOWN};
use hideseek_core::world::{AgentId, Role};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}{}: {source}", path.display(), line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Json { path: PathBuf, line: Option<usize>, source: serde_json::Error },
    #[error("{}: format version {found}, this build reads {expected}", path.display())]
    Version { path: PathBuf, found: u32, expected: u32 },
    #[error("decision {decision}, agent {agent}: frame {} is missing", path.display())]
    MissingFrame { decision: u64, agent: AgentId, path: PathBuf },
    #[error("decision {decision}, agent {agent}: frame {} has {len} bytes, expected {expected}", path.display())]
    TruncatedFrame { decision: u64, agent: AgentId, path: PathBuf, len: usize, expected: usize },
    #[error("decision {decision}, agent {agent}: frame {} is corrupt ({detail})", path.display())]
    CorruptFrame { decision: u64, agent: AgentId, path: PathBuf, detail: String },
    #[error("log has no record for decision {decision}, agent {agent}")]
    Incomplete { decision: u64, agent: AgentId },
    #[error("episode {0} is already stored")]
    DuplicateEpisode(u64),
    #[error("episode {0} is not in the manifest")]
    UnknownEpisode(u64),
    #[error("manifest disagrees with stored files: {0}")]
    ManifestMismatch(String),
}

type Result<T> = std::result::Result<T, StoreError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub episode_id: u64,
    pub setting: String,
    pub seed: u64,
    pub n_decisions: u64,
    /// Seeker decision steps, i.e. samples at horizon 1 and below.
    pub samples: usize,
    pub human_steps: u64,
    pub outcome: Option<Outcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: u32,
    pub settings: Vec<String>,
    pub episode_count: usize,
    pub total_samples: usize,
    /// Config of the first stored episode.
    pub config: Option<WorldConfig>,
    pub episodes: Vec<ManifestEntry>,
}

impl Manifest {
    fn new(name: &str) -> Self {
        Manifest {
            name: name.to_owned(),
            version: FORMAT_VERSION,
            settings: Vec::new(),
            episode_count: 0,
            total_samples: 0,
            config: None,
            episodes: Vec::new(),
        }
    }

    fn push(&mut self, entry: ManifestEntry, config: &WorldConfig) {
        if !self.settings.contains(&entry.setting) {
            self.settings.push(entry.setting.clone());
            self.settings.sort();
        }
        self.config.get_or_insert_with(|| config.clone());
        self.total_samples += entry.samples;
        self.episodes.push(entry);
        self.episode_count = self.episodes.len();
    }
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| StoreError::Io { path: path.to_owned(), source })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = io(path, fs::read(path))?;
    serde_json::from_slice(&bytes).map_err(|source| StoreError::Json { path: path.to_owned(), line: None, source })
}

/// Write via a temporary file and rename, so readers never see half a file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    io(&tmp, fs::write(&tmp, bytes))?;
    io(path, fs::rename(&tmp, path))
}

pub fn episode_dir(root: &Path, episode_id: u64) -> PathBuf {
    root.join(format!("ep_{episode_id}"))
}

/// Every (decision, seeker) pair has a step and a frame, every hider has a
/// step, and nothing else.
fn check_complete(log: &EpisodeLog) -> Result<()> {
    let n_agents = log.meta.config.n_agents();
    let have: BTreeSet<(u64, AgentId)> = log.steps.iter().map(|s| (s.decision, s.agent_id)).collect();
    for decision in 0..log.meta.n_decisions {
        for agent in 0..n_agents {
            if !have.contains(&(decision, agent)) {
                return Err(StoreError::Incomplete { decision, agent });
            }
        }
    }
    Ok(())
}

fn check_frame(rec: &StepRecord, path: &Path, bytes: &[u8]) -> Result<()> {
    let corrupt = |detail: String| StoreError::CorruptFrame {
        decision: rec.decision,
        agent: rec.agent_id,
        path: path.to_owned(),
        detail,
    };
    let palette = [UNKNOWN, SEEN_FREE, SEEN_OBSTACLE, SEEKER, HIDER];
    let mut mask = 0u32;
    for (i, px) in bytes.chunks_exact(4).enumerate() {
        if !palette.iter().any(|c| c[..] == px[..3]) {
            return Err(corrupt(format!("pixel {i} has color {:?}", &px[..3])));
        }
        if px[3] > 1 {
            return Err(corrupt(format!("pixel {i} has mask value {}", px[3])));
        }
        mask += px[3] as u32;
    }
    if mask != 9 {
        return Err(corrupt(format!("mask covers {mask} pixels, expected 9")));
    }
    Ok(())
}

/// A dataset directory and its manifest.
pub struct Dataset {
    root: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST);
        let manifest: Manifest = read_json(&path)?;
        if manifest.version != FORMAT_VERSION {
            return Err(StoreError::Version { path, found: manifest.version, expected: FORMAT_VERSION });
        }
        Ok(Dataset { root: root.to_owned(), manifest })
    }

    /// Open `root`, creating an empty dataset named `name` if there is none.
    pub fn open_or_create(root: &Path, name: &str) -> Result<Self> {
        if root.join(MANIFEST).exists() {
            return Self::open(root);
        }
        io(root, fs::create_dir_all(root))?;
        let ds = Dataset { root: root.to_owned(), manifest: Manifest::new(name) };
        ds.save_manifest()?;
        Ok(ds)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn save_manifest(&self) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(&self.root.join(MANIFEST), &bytes)
    }

    pub fn write_episode(&mut self, log: &EpisodeLog) -> Result<ManifestEntry> {
        let id = log.meta.episode_id;
        if self.manifest.episodes.iter().any(|e| e.episode_id == id) {
            return Err(StoreError::DuplicateEpisode(id));
        }
        check_complete(log)?;
        let dir = episode_dir(&self.root, id);
        let frames = dir.join("frames");
        io(&frames, fs::create_dir_all(&frames))?;

        for rec in log.seeker_steps() {
            let key = rec.obs_ref.as_deref().ok_or(StoreError::Incomplete { decision: rec.decision, agent: rec.agent_id })?;
            let path = dir.join(key);
            let frame = log.frames.get(key).ok_or_else(|| StoreError::MissingFrame {
                decision: rec.decision,
                agent: rec.agent_id,
                path: path.clone(),
            })?;
            io(&path, fs::write(&path, frame.as_bytes()))?;
        }

        let steps_path = dir.join("steps.jsonl");
        let mut out = Vec::new();
        for rec in &log.steps {
            serde_json::to_writer(&mut out, rec).expect("step serializes");
            out.push(b'\n');
        }
        write_atomic(&steps_path, &out)?;
        // meta.json last: its presence marks the episode as fully written.
        let meta = serde_json::to_vec_pretty(&log.meta).expect("meta serializes");
        write_atomic(&dir.join("meta.json"), &meta)?;

        let entry = ManifestEntry {
            episode_id: id,
            setting: log.meta.config.setting().to_string(),
            seed: log.meta.seed,
            n_decisions: log.meta.n_decisions,
            samples: log.sample_count(),
            human_steps: log.meta.human_steps,
            outcome: log.meta.outcome,
        };
        self.manifest.push(entry.clone(), &log.meta.config);
        self.save_manifest()?;
        Ok(entry)
    }

    pub fn read_episode(&self, episode_id: u64) -> Result<EpisodeLog> {
        if !self.manifest.episodes.iter().any(|e| e.episode_id == episode_id) {
            return Err(StoreError::UnknownEpisode(episode_id));
        }
        read_episode_dir(&episode_dir(&self.root, episode_id))
    }

    /// Check manifest counts against the stored episodes.
    pub fn verify(&self) -> Result<()> {
        let m = &self.manifest;
        if m.episode_count != m.episodes.len() {
            return Err(StoreError::ManifestMismatch(format!(
                "episode_count {} but {} entries",
                m.episode_count,
                m.episodes.len()
            )));
        }
        let mut total = 0;
        for e in &m.episodes {
            let log = self.read_episode(e.episode_id)?;
            if log.sample_count() != e.samples || log.meta.n_decisions != e.n_decisions {
                return Err(StoreError::ManifestMismatch(format!("episode {} counts differ", e.episode_id)));
            }
            total += e.samples;
        }
        if total != m.total_samples {
            return Err(StoreError::ManifestMismatch(format!("total_samples {} but episodes hold {total}", m.total_samples)));
        }
        Ok(())
    }
}

/// Read one `ep_<id>` directory.
pub fn read_episode_dir(dir: &Path) -> Result<EpisodeLog> {
    let meta_path = dir.join("meta.json");
    let meta: EpisodeMeta = read_json(&meta_path)?;
    if meta.version != FORMAT_VERSION {
        return Err(StoreError::Version { path: meta_path, found: meta.version, expected: FORMAT_VERSION });
    }
    let steps_path = dir.join("steps.jsonl");
    let file = io(&steps_path, fs::File::open(&steps_path))?;
    let mut steps = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = io(&steps_path, line)?;
        if line.is_empty() {
            continue;
        }
        let rec: StepRecord = serde_json::from_str(&line).map_err(|source| StoreError::Json {
            path: steps_path.clone(),
            line: Some(i + 1),
            source,
        })?;
        steps.push(rec);
    }
    let mut log = EpisodeLog { meta, steps, frames: Default::default() };
    for rec in log.steps.iter().filter(|s| s.role == Role::Seeker) {
        let Some(key) = rec.obs_ref.as_deref() else { continue };
        let path = dir.join(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::MissingFrame { decision: rec.decision, agent: rec.agent_id, path });
            }
            Err(source) => return Err(StoreError::Io { path, source }),
        };
        if bytes.len() != OBS_BYTES {
            return Err(StoreError::TruncatedFrame {
                decision: rec.decision,
                agent: rec.agent_id,
                path,
                len: bytes.len(),
                expected: OBS_BYTES,
            });
        }
        check_frame(rec, &path, &bytes)?;
        let tensor = ObservationTensor::from_bytes(bytes).expect("length checked");
        log.frames.insert(key.to_owned(), Arc::new(tensor));
    }
    check_complete(&log)?;
    Ok(log)
}

/// Store `log` under `root`, creating the dataset if needed.
pub fn write_episode(log: &EpisodeLog, root: &Path) -> Result<ManifestEntry> {
    let name = root.file_name().and_then(|n| n.to_str()).unwrap_or("dataset");
    Dataset::open_or_create(root, name)?.write_episode(log)
}

pub fn read_episode(root: &Path, episode_id: u64) -> Result<EpisodeLog> {
    Dataset::open(root)?.read_episode(episode_id)
}
