use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use hideseek::binding::{bind_team, heuristic_bindings, Registry};
use hideseek::bridge::{mock, Endpoint, Server, DEFAULT_DEADLINE};
use hideseek::config_file::load_config;
use hideseek::core::config::{Setting, WorldConfig};
use hideseek::core::dataset::EpisodeLog;
use hideseek::core::episode::{Episode, EpisodeOptions};
use hideseek::core::rng::episode_seed;
use hideseek::eval::{emit_report, report_markdown, run_eval, EvalOptions};
use hideseek::guide::{self, AppState, GuideOptions};
use hideseek::store::Dataset;

#[derive(Parser)]
#[command(name = "hideseek", version, about = "Hide-and-seek simulation workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Headless simulation.
    Sim {
        #[command(subcommand)]
        cmd: SimCmd,
    },
    /// Guidance server.
    Guide {
        #[command(subcommand)]
        cmd: GuideCmd,
    },
    /// Success-rate evaluation over settings and team bindings.
    Eval(EvalArgs),
    /// Policy bridge tools.
    Bridge {
        #[command(subcommand)]
        cmd: BridgeCmd,
    },
    /// Dataset tools.
    Dataset {
        #[command(subcommand)]
        cmd: DatasetCmd,
    },
}

#[derive(clap::Args)]
struct Common {
    /// TOML world config; unset fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Remote policy, `name=host:port/policy`. Repeatable.
    #[arg(long = "policy", value_name = "NAME=ENDPOINT")]
    policies: Vec<String>,
    /// Bridge response deadline in milliseconds.
    #[arg(long, default_value_t = DEFAULT_DEADLINE.as_millis() as u64)]
    deadline_ms: u64,
}

impl Common {
    fn config(&self) -> Result<WorldConfig> {
        match &self.config {
            Some(p) => Ok(load_config(p)?),
            None => Ok(WorldConfig::default()),
        }
    }

    fn registry(&self) -> Result<Registry> {
        let mut r = Registry::new();
        for p in &self.policies {
            let (name, ep) = p.split_once('=').with_context(|| format!("--policy {p:?}: expected NAME=ENDPOINT"))?;
            let ep: Endpoint = ep.parse().with_context(|| format!("--policy {p:?}"))?;
            r.insert(name.to_owned(), ep);
        }
        Ok(r)
    }
}

#[derive(Subcommand)]
enum SimCmd {
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "3v3")]
        setting: Setting,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        episodes: u64,
        /// Team spec, e.g. `heuristic:2,pe-t:1`.
        #[arg(long)]
        bind: Option<String>,
        /// Append recorded episodes to this dataset directory.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long)]
        max_time: Option<f64>,
    },
}

#[derive(Subcommand)]
enum GuideCmd {
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Record finished sessions into this dataset directory.
        #[arg(long)]
        record: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Repeatable.
    #[arg(long = "setting", default_value = "3v3")]
    settings: Vec<Setting>,
    /// Team spec; repeatable. Defaults to all-heuristic seekers.
    #[arg(long = "bind")]
    binds: Vec<String>,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = 150)]
    episodes: u64,
    #[arg(long)]
    mask_teammates: bool,
    #[arg(long)]
    intervener_budget: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "eval-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MockKind {
    Echo,
    Stall,
    Chase,
}

#[derive(Subcommand)]
enum BridgeCmd {
    /// Serve a mock policy.
    Serve {
        #[arg(long, value_enum, default_value = "echo")]
        mock: MockKind,
        #[arg(long, default_value_t = 7000)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Reply delay of the stall mock, in milliseconds.
        #[arg(long, default_value_t = 500)]
        stall_ms: u64,
        /// Arena side assumed by the chase mock.
        #[arg(long, default_value_t = 50.0)]
        arena_side: f64,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Read every episode and check counts against the manifest.
    Verify { dir: PathBuf },
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Sim { cmd: SimCmd::Run { common, setting, seed, episodes, bind, record, max_time } } => {
            let mut config = common.config()?;
            config.n_seekers = setting.n_seekers;
            config.n_hiders = setting.n_hiders;
            if let Some(t) = max_time {
                config.max_time = t;
            }
            config.validate()?;
            let bindings = match &bind {
                Some(spec) => bind_team(setting, spec, &common.registry()?, config.frame_stack)?,
                None => heuristic_bindings(&config),
            };
            let deadline = Duration::from_millis(common.deadline_ms);
            let mut dataset = record.as_deref().map(|d| Dataset::open_or_create(d, "sim")).transpose()?;
            let first_id = dataset.as_ref().and_then(|d| d.manifest().episodes.iter().map(|e| e.episode_id + 1).max()).unwrap_or(0);
            for i in 0..episodes {
                let ep_seed = episode_seed(seed, i);
                let mut team = hideseek::binding::build_team(&bindings, &config, ep_seed, deadline)?;
                let mut ep = Episode::new(&config, ep_seed, EpisodeOptions::default())?;
                let mut log = dataset.as_ref().map(|_| EpisodeLog::new(first_id + i));
                let result = ep.run(&mut team, None, log.as_mut())?;
                if let (Some(d), Some(log)) = (dataset.as_mut(), log.as_ref()) {
                    d.write_episode(log)?;
                }
                println!("{}", serde_json::to_string(&result)?);
            }
        }
        Cmd::Guide { cmd: GuideCmd::Serve { common, port, host, record } } => {
            let state = AppState::new(GuideOptions {
                record,
                registry: common.registry()?,
                deadline: Duration::from_millis(common.deadline_ms),
            })?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("guidance server on http://{}", listener.local_addr()?);
                guide::serve(listener, state).await
            })?;
        }
        Cmd::Eval(a) => {
            let base = a.common.config()?;
            let registry = a.common.registry()?;
            let opts = EvalOptions {
                first_seed: a.first_seed,
                n_seeds: a.seeds,
                episodes_per_seed: a.episodes,
                mask_teammates: a.mask_teammates,
                intervener_budget: a.intervener_budget,
                threads: a.threads,
                deadline: Duration::from_millis(a.common.deadline_ms),
            };
            if a.seeds == 0 || a.episodes == 0 {
                bail!("--seeds and --episodes must be positive");
            }
            let mut reports = Vec::new();
            for setting in &a.settings {
                let mut config = base.clone();
                config.n_seekers = setting.n_seekers;
                config.n_hiders = setting.n_hiders;
                config.validate()?;
                let binds: Vec<Option<&String>> = if a.binds.is_empty() { vec![None] } else { a.binds.iter().map(Some).collect() };
                for b in binds {
                    let bindings = match b {
                        Some(spec) => bind_team(*setting, spec, &registry, config.frame_stack)?,
                        None => heuristic_bindings(&config),
                    };
                    let r = run_eval(&config, &bindings, &opts)?;
                    eprintln!("{} {}: {:.1}% ± {:.1}", r.setting, r.combination, r.mean, r.std);
                    reports.push(r);
                }
            }
            let rows = emit_report(&reports, &a.out)?;
            print!("{}", report_markdown(&rows));
        }
        Cmd::Bridge { cmd: BridgeCmd::Serve { mock: kind, port, host, stall_ms, arena_side } } => {
            let handler = match kind {
                MockKind::Echo => mock::echo(),
                MockKind::Stall => mock::stall(Duration::from_millis(stall_ms)),
                MockKind::Chase => mock::chase(arena_side),
            };
            let server = Server::bind(&format!("{host}:{port}"), Arc::clone(&handler))?;
            eprintln!("bridge mock listening on {}", server.addr());
            server.join();
        }
        Cmd::Dataset { cmd: DatasetCmd::Verify { dir } } => {
            let d = Dataset::open(&dir)?;
            d.verify()?;
            let m = d.manifest();
            println!("ok: {} episodes, {} samples", m.episode_count, m.total_samples);
        }
    }
    Ok(())
}
