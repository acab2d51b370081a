use std::fs;
use std::path::Path;

use hideseek::binding::{bind_team, heuristic_bindings, Registry};
use hideseek::bridge::{mock, Server};
use hideseek::core::config::{Setting, WorldConfig};
use hideseek::core::rng::episode_seed;
use hideseek::eval::{config_hash, emit_report, rows_from_json, run_eval, EpisodeOutcome, EvalOptions, SuccessReport};

fn config(s: usize, h: usize) -> WorldConfig {
    WorldConfig { n_seekers: s, n_hiders: h, ..WorldConfig::default() }
}

fn heuristic(cfg: &WorldConfig, opts: &EvalOptions) -> SuccessReport {
    run_eval(cfg, &heuristic_bindings(cfg), opts).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn thread_count_does_not_change_reports() {
    let cfg = config(2, 2);
    let base = EvalOptions { n_seeds: 3, episodes_per_seed: 8, ..EvalOptions::default() };
    let one = heuristic(&cfg, &EvalOptions { threads: Some(1), ..base.clone() });
    let eight = heuristic(&cfg, &EvalOptions { threads: Some(8), ..base.clone() });
    assert_eq!(one, eight);
    let (d1, d8) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(std::slice::from_ref(&one), d1.path()).unwrap();
    emit_report(&[eight], d8.path()).unwrap();
    assert_eq!(files(d1.path()), files(d8.path()));

    // A re-run reproduces the same bytes.
    let again = heuristic(&cfg, &EvalOptions { threads: Some(3), ..base });
    let d = tempfile::tempdir().unwrap();
    emit_report(&[again], d.path()).unwrap();
    assert_eq!(files(d1.path()), files(d.path()));

    for (k, e) in one.episodes.iter().enumerate() {
        assert_eq!((e.eval_seed, e.index), (k as u64 / 8, k as u64 % 8));
        assert_eq!(e.seed, episode_seed(e.eval_seed, e.index));
    }
}

#[test]
fn all_timeouts_report_zero() {
    let cfg = WorldConfig { max_time: 0.5, ..config(1, 1) };
    let r = heuristic(&cfg, &EvalOptions { n_seeds: 3, episodes_per_seed: 4, ..EvalOptions::default() });
    assert!(r.episodes.iter().all(|e| e.outcome == EpisodeOutcome::Timeout));
    assert_eq!((r.mean, r.std), (0.0, 0.0));
    assert!(r.seeds.iter().all(|s| s.rate == Some(0.0)));
    assert!(!r.unreliable);
}

#[test]
fn single_episode_per_seed() {
    let cfg = config(3, 1);
    let r = heuristic(&cfg, &EvalOptions { n_seeds: 5, episodes_per_seed: 1, ..EvalOptions::default() });
    assert_eq!(r.episodes.len(), 5);
    for s in &r.seeds {
        assert_eq!(s.episodes, 1);
        assert!(matches!(s.rate, Some(x) if x == 0.0 || x == 100.0));
    }
    let mean = r.seeds.iter().map(|s| s.rate.unwrap()).sum::<f64>() / 5.0;
    assert!((r.mean - mean).abs() < 1e-9);
}

#[test]
fn settings_by_bindings_grid() {
    let server = Server::bind("127.0.0.1:0", mock::chase(50.0)).unwrap();
    let mut registry = Registry::new();
    registry.insert("chase".into(), server.endpoint("chase"));
    let opts = EvalOptions { n_seeds: 2, episodes_per_seed: 2, ..EvalOptions::default() };
    let mut reports = Vec::new();
    for setting in [Setting::new(1, 1), Setting::new(2, 1)] {
        let cfg = config(setting.n_seekers, setting.n_hiders);
        for spec in [format!("heuristic:{}", setting.n_seekers), format!("chase:{}", setting.n_seekers)] {
            let b = bind_team(setting, &spec, &registry, cfg.frame_stack).unwrap();
            reports.push(run_eval(&cfg, &b, &opts).unwrap());
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let rows = emit_report(&reports, dir.path()).unwrap();
    assert_eq!(rows.len(), 4);
    let parsed = rows_from_json(&fs::read_to_string(dir.path().join("rows.json")).unwrap()).unwrap();
    assert_eq!(parsed, rows);
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let md = fs::read_to_string(dir.path().join("report.md")).unwrap();
    for label in ["| 1v1 |", "| 2v1 |", "heuristic:2", "chase:1"] {
        assert!(md.contains(label), "{label} missing from\n{md}");
    }
    for k in 0..4 {
        let jsonl = fs::read_to_string(dir.path().join(format!("episodes_{k}.jsonl"))).unwrap();
        assert_eq!(jsonl.lines().count(), 4);
    }
    assert_ne!(rows[0].config_hash, rows[2].config_hash);
    assert_eq!(rows[0].config_hash, config_hash(&config(1, 1)));
}

#[test]
fn masking_teammates_leaves_heuristic_play_unchanged() {
    let cfg = config(3, 3);
    let base = EvalOptions { n_seeds: 2, episodes_per_seed: 4, ..EvalOptions::default() };
    let plain = heuristic(&cfg, &base);
    let masked = heuristic(&cfg, &EvalOptions { mask_teammates: true, ..base });
    assert!(masked.mask_teammates);
    let hashes = |r: &SuccessReport| r.episodes.iter().map(|e| e.trajectory_hash).collect::<Vec<_>>();
    assert_eq!(hashes(&plain), hashes(&masked));
    assert_eq!(plain.mean, masked.mean);
}
