//! Batch evaluation: seeds × episodes, success rates, reports.
//!
//! Episode `i` of seed `s` runs with seed `episode_seed(s, i)`, so two arms
//! evaluated on the same seeds see the same maps and spawns. Episodes run
//! on a rayon pool; results are gathered in index order, so the thread count
//! never changes a report.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Binomial, DiscreteCDF};

use hideseek_core::config::WorldConfig;
use hideseek_core::dataset::Outcome;
use hideseek_core::episode::{Episode, EpisodeOptions, EpisodeResult};
use hideseek_core::intervener::ScriptedIntervener;
use hideseek_core::observation::RenderOptions;
use hideseek_core::rng::episode_seed;

use crate::binding::{build_team, combination_label, BindError, PolicyBinding};
use crate::bridge::DEFAULT_DEADLINE;

/// Above this aborted fraction a report is flagged unreliable.
pub const MAX_ABORTED_FRACTION: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error("episode {seed}: {detail}")]
    Episode { seed: u64, detail: String },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("report schema: {0}")]
    Schema(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    /// Evaluation seeds are `first_seed .. first_seed + n_seeds`.
    pub first_seed: u64,
    pub n_seeds: u64,
    pub episodes_per_seed: u64,
    pub mask_teammates: bool,
    /// Attach the scripted intervener with this budget.
    pub intervener_budget: Option<usize>,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    pub deadline: Duration,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            first_seed: 0,
            n_seeds: 3,
            episodes_per_seed: 150,
            mask_teammates: false,
            intervener_budget: None,
            threads: None,
            deadline: DEFAULT_DEADLINE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeOutcome {
    Success,
    Timeout,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub eval_seed: u64,
    pub index: u64,
    pub seed: u64,
    pub outcome: EpisodeOutcome,
    pub duration: f64,
    pub catch_times: Vec<Option<f64>>,
    pub trajectory_hash: u64,
    pub interventions: usize,
    pub human_steps: u64,
    pub error: Option<String>,
}

impl EpisodeRecord {
    fn from_result(eval_seed: u64, index: u64, r: &EpisodeResult) -> Self {
        EpisodeRecord {
            eval_seed,
            index,
            seed: r.seed,
            outcome: match r.outcome {
                Outcome::Success => EpisodeOutcome::Success,
                Outcome::Timeout => EpisodeOutcome::Timeout,
            },
            duration: r.duration,
            catch_times: r.catch_times.clone(),
            trajectory_hash: r.trajectory_hash,
            interventions: r.interventions,
            human_steps: r.human_steps,
            error: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: u64,
    pub successes: u64,
    pub timeouts: u64,
    pub aborted: u64,
    /// Percent of non-aborted episodes; `None` when all aborted.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub setting: String,
    pub combination: String,
    pub policies: Vec<String>,
    pub config_hash: String,
    pub mask_teammates: bool,
    pub intervener_budget: Option<usize>,
    pub seeds: Vec<SeedSummary>,
    /// Mean and sample std of the per-seed rates, in percent.
    pub mean: f64,
    pub std: f64,
    pub aborted: u64,
    pub aborted_fraction: f64,
    pub unreliable: bool,
    pub episodes: Vec<EpisodeRecord>,
}

pub fn config_hash(config: &WorldConfig) -> String {
    let digest = Sha256::digest(serde_json::to_vec(config).expect("config serializes"));
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_one(
    config: &WorldConfig,
    bindings: &[PolicyBinding],
    opts: &EvalOptions,
    eval_seed: u64,
    index: u64,
) -> Result<EpisodeRecord, EvalError> {
    let seed = episode_seed(eval_seed, index);
    let mut team = build_team(bindings, config, seed, opts.deadline)?;
    let options = EpisodeOptions { render: RenderOptions { mask_teammates: opts.mask_teammates } };
    let mut ep = Episode::new(config, seed, options).map_err(|e| EvalError::Episode { seed, detail: e.to_string() })?;
    let mut intervener = opts.intervener_budget.map(ScriptedIntervener::new);
    let hook = intervener.as_mut().map(|i| i as &mut dyn hideseek_core::episode::DecisionHook);
    match ep.run(&mut team, hook, None) {
        Ok(r) => Ok(EpisodeRecord::from_result(eval_seed, index, &r)),
        Err(e) if e.is_aborted() => {
            let r = ep.result();
            Ok(EpisodeRecord {
                outcome: EpisodeOutcome::Aborted,
                error: Some(e.to_string()),
                ..EpisodeRecord::from_result(eval_seed, index, &r)
            })
        }
        Err(e) => Err(EvalError::Episode { seed, detail: e.to_string() }),
    }
}

/// Run every (seed, episode) pair and return records in index order.
pub fn run_episodes(config: &WorldConfig, bindings: &[PolicyBinding], opts: &EvalOptions) -> Result<Vec<EpisodeRecord>, EvalError> {
    let jobs: Vec<(u64, u64)> = (opts.first_seed..opts.first_seed + opts.n_seeds)
        .flat_map(|s| (0..opts.episodes_per_seed).map(move |i| (s, i)))
        .collect();
    let work = || jobs.par_iter().map(|&(s, i)| run_one(config, bindings, opts, s, i)).collect::<Result<Vec<_>, _>>();
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work),
        None => work(),
    }
}

pub fn summarize(
    config: &WorldConfig,
    bindings: &[PolicyBinding],
    opts: &EvalOptions,
    episodes: Vec<EpisodeRecord>,
) -> SuccessReport {
    let mut seeds = Vec::new();
    for s in opts.first_seed..opts.first_seed + opts.n_seeds {
        let mine = episodes.iter().filter(|e| e.eval_seed == s);
        let mut sum = SeedSummary { seed: s, episodes: 0, successes: 0, timeouts: 0, aborted: 0, rate: None };
        for e in mine {
            sum.episodes += 1;
            match e.outcome {
                EpisodeOutcome::Success => sum.successes += 1,
                EpisodeOutcome::Timeout => sum.timeouts += 1,
                EpisodeOutcome::Aborted => sum.aborted += 1,
            }
        }
        let counted = sum.successes + sum.timeouts;
        sum.rate = (counted > 0).then(|| 100.0 * sum.successes as f64 / counted as f64);
        seeds.push(sum);
    }
    let rates: Vec<f64> = seeds.iter().filter_map(|s| s.rate).collect();
    let (mean, std) = mean_std(&rates);
    let aborted: u64 = seeds.iter().map(|s| s.aborted).sum();
    let total = episodes.len().max(1) as f64;
    let aborted_fraction = aborted as f64 / total;
    SuccessReport {
        setting: config.setting().to_string(),
        combination: combination_label(bindings),
        policies: bindings.iter().filter(|b| b.agent_id < config.n_seekers).map(|b| b.policy_name().to_owned()).collect(),
        config_hash: config_hash(config),
        mask_teammates: opts.mask_teammates,
        intervener_budget: opts.intervener_budget,
        seeds,
        mean,
        std,
        aborted,
        aborted_fraction,
        unreliable: aborted_fraction > MAX_ABORTED_FRACTION,
        episodes,
    }
}

pub fn run_eval(config: &WorldConfig, bindings: &[PolicyBinding], opts: &EvalOptions) -> Result<SuccessReport, EvalError> {
    let episodes = run_episodes(config, bindings, opts)?;
    Ok(summarize(config, bindings, opts, episodes))
}

/// One line of a report table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRow {
    pub setting: String,
    pub combination: String,
    pub policies: String,
    pub mask_teammates: bool,
    pub intervener_budget: Option<usize>,
    pub seeds: u64,
    pub episodes_per_seed: u64,
    pub mean: f64,
    pub std: f64,
    pub aborted: u64,
    pub unreliable: bool,
    pub config_hash: String,
}

impl From<&SuccessReport> for ReportRow {
    fn from(r: &SuccessReport) -> Self {
        ReportRow {
            setting: r.setting.clone(),
            combination: r.combination.clone(),
            policies: r.policies.join(" "),
            mask_teammates: r.mask_teammates,
            intervener_budget: r.intervener_budget,
            seeds: r.seeds.len() as u64,
            episodes_per_seed: r.seeds.first().map_or(0, |s| s.episodes),
            mean: r.mean,
            std: r.std,
            aborted: r.aborted,
            unreliable: r.unreliable,
            config_hash: r.config_hash.clone(),
        }
    }
}

/// Parse rows from JSON, rejecting missing or unknown fields.
pub fn rows_from_json(text: &str) -> Result<Vec<ReportRow>, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::Schema(e.to_string()))
}

const CSV_HEADER: &str =
    "setting,combination,policies,mask_teammates,intervener_budget,seeds,episodes_per_seed,mean,std,aborted,unreliable,config_hash";

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let budget = r.intervener_budget.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.2},{:.2},{},{},{}",
            r.setting,
            r.combination,
            r.policies,
            r.mask_teammates,
            budget,
            r.seeds,
            r.episodes_per_seed,
            r.mean,
            r.std,
            r.aborted,
            r.unreliable,
            r.config_hash
        );
    }
    out
}

/// Settings as columns, combinations as rows, cells `mean±std`.
pub fn report_markdown(rows: &[ReportRow]) -> String {
    let mut settings: Vec<&str> = rows.iter().map(|r| r.setting.as_str()).collect();
    settings.sort();
    settings.dedup();
    let mut combos: Vec<(&str, bool, Option<usize>)> = Vec::new();
    for r in rows {
        let key = (r.combination.as_str(), r.mask_teammates, r.intervener_budget);
        if !combos.contains(&key) {
            combos.push(key);
        }
    }
    let mut out = String::from("| Combination |");
    for s in &settings {
        let _ = write!(out, " {s} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(settings.len()));
    out.push('\n');
    for (combo, masked, budget) in &combos {
        let mut label = combo.to_string();
        if *masked {
            label.push_str(" (teammates masked)");
        }
        if let Some(b) = budget {
            let _ = write!(label, " (intervener {b})");
        }
        let _ = write!(out, "| {label} |");
        for s in &settings {
            let cell = rows
                .iter()
                .find(|r| r.setting == *s && r.combination == *combo && r.mask_teammates == *masked && r.intervener_budget == *budget)
                .map(|r| {
                    let flag = if r.unreliable { " ⚠" } else { "" };
                    format!("{:.1}±{:.1}{flag}", r.mean, r.std)
                })
                .unwrap_or_else(|| "n/a".to_owned());
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out.push_str("\nSuccess rates in percent over non-aborted episodes; ± is the sample std across seeds.\n");
    let aborted: Vec<String> = rows
        .iter()
        .filter(|r| r.aborted > 0)
        .map(|r| format!("{} {}: {} aborted{}", r.setting, r.combination, r.aborted, if r.unreliable { " (unreliable)" } else { "" }))
        .collect();
    if !aborted.is_empty() {
        let _ = writeln!(out, "Aborted episodes are excluded from the rates: {}.", aborted.join("; "));
    }
    let mut hashes: Vec<String> = rows.iter().map(|r| format!("{} {}", r.setting, r.config_hash)).collect();
    hashes.sort();
    hashes.dedup();
    let _ = writeln!(out, "Config hashes: {}.", hashes.join(", "));
    out
}

/// Write `report.csv`, `report.md` and `rows.json` plus one
/// `episodes_<n>.jsonl` per report into `dir`.
pub fn emit_report(reports: &[SuccessReport], dir: &Path) -> Result<Vec<ReportRow>, EvalError> {
    std::fs::create_dir_all(dir)?;
    let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from).collect();
    std::fs::write(dir.join("report.csv"), report_csv(&rows))?;
    std::fs::write(dir.join("report.md"), report_markdown(&rows))?;
    std::fs::write(dir.join("rows.json"), serde_json::to_vec_pretty(&rows).expect("rows serialize"))?;
    for (k, r) in reports.iter().enumerate() {
        let mut out = Vec::new();
        for e in &r.episodes {
            serde_json::to_writer(&mut out, e).expect("record serializes");
            out.push(b'\n');
        }
        std::fs::write(dir.join(format!("episodes_{k}.jsonl")), out)?;
    }
    Ok(rows)
}

/// Outcome of a two-arm comparison on shared seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub pairs: usize,
    pub base_successes: usize,
    pub treated_successes: usize,
    /// Treated succeeded where base did not.
    pub wins: usize,
    /// Base succeeded where treated did not.
    pub losses: usize,
    /// One-sided exact sign test on the discordant pairs.
    pub p_value: f64,
}

/// P(X ≥ wins) for X ~ Binomial(wins + losses, 1/2).
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if n == 0 || wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    1.0 - b.cdf(wins as u64 - 1)
}

/// Pair records by (eval seed, index); aborted pairs are dropped.
pub fn compare_paired(base: &[EpisodeRecord], treated: &[EpisodeRecord]) -> PairedComparison {
    let mut c = PairedComparison { pairs: 0, base_successes: 0, treated_successes: 0, wins: 0, losses: 0, p_value: 1.0 };
    for b in base {
        let Some(t) = treated.iter().find(|t| (t.eval_seed, t.index) == (b.eval_seed, b.index)) else { continue };
        if b.outcome == EpisodeOutcome::Aborted || t.outcome == EpisodeOutcome::Aborted {
            continue;
        }
        let (bs, ts) = (b.outcome == EpisodeOutcome::Success, t.outcome == EpisodeOutcome::Success);
        c.pairs += 1;
        c.base_successes += bs as usize;
        c.treated_successes += ts as usize;
        c.wins += (ts && !bs) as usize;
        c.losses += (bs && !ts) as usize;
    }
    c.p_value = sign_test(c.wins, c.losses);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_arithmetic() {
        assert_eq!(mean_std(&[100.0, 100.0, 100.0]), (100.0, 0.0));
        assert_eq!(mean_std(&[0.0; 3]), (0.0, 0.0));
        let (m, s) = mean_std(&[30.0, 40.0, 50.0]);
        assert!((m - 40.0).abs() < 1e-12 && (s - 10.0).abs() < 1e-12);
        assert_eq!(mean_std(&[42.0]), (42.0, 0.0));
    }

    #[test]
    fn sign_test_values() {
        // 5 of 5 discordant pairs: 1/32.
        assert!((sign_test(5, 0) - 1.0 / 32.0).abs() < 1e-12);
        // 3 of 4: (4 + 1) / 16.
        assert!((sign_test(3, 1) - 5.0 / 16.0).abs() < 1e-12);
        assert_eq!(sign_test(0, 7), 1.0);
        assert_eq!(sign_test(0, 0), 1.0);
    }

    #[test]
    fn missing_field_is_schema_error() {
        assert!(matches!(rows_from_json(r#"[{"setting":"3v3"}]"#), Err(EvalError::Schema(_))));
    }
}
