use std::net::SocketAddr;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

use hideseek::core::config::WorldConfig;
use hideseek::core::episode::{run_episode, EpisodeOptions, EpisodeResult};
use hideseek::core::policy::heuristic_team;
use hideseek::guide::{self, AppState, GuideOptions, SessionResult};
use hideseek::store::Dataset;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn start(opts: GuideOptions) -> SocketAddr {
    let state = AppState::new(opts).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(guide::serve(listener, state));
    addr
}

async fn create(addr: SocketAddr, body: Value) -> reqwest::Response {
    reqwest::Client::new().post(format!("http://{addr}/sessions")).json(&body).send().await.unwrap()
}

async fn create_id(addr: SocketAddr, body: Value) -> u64 {
    let r = create(addr, body).await;
    assert_eq!(r.status(), 201);
    r.json::<Value>().await.unwrap()["id"].as_u64().unwrap()
}

async fn wait_result(addr: SocketAddr, id: u64) -> SessionResult {
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let r = reqwest::get(format!("http://{addr}/sessions/{id}/result")).await.unwrap();
        match r.status().as_u16() {
            200 => return r.json().await.unwrap(),
            202 => {}
            s => panic!("status {s}"),
        }
        assert!(Instant::now() < deadline, "session {id} never finished");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

async fn connect(addr: SocketAddr, id: u64) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{addr}/session/{id}")).await.unwrap().0
}

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        match tokio::time::timeout(Duration::from_secs(30), ws.next()).await.unwrap() {
            Some(Ok(Message::Text(t))) => return serde_json::from_str(t.as_str()).unwrap(),
            Some(Ok(_)) => continue,
            other => panic!("socket ended: {other:?}"),
        }
    }
}

/// Send a client message and return the matching ack or error, skipping
/// state pushes in between.
async fn command(ws: &mut Ws, msg: Value) -> Value {
    ws.send(Message::Text(msg.to_string().into())).await.unwrap();
    loop {
        let v = next_json(ws).await;
        if v["type"] == "ack" || v["type"] == "error" {
            return v;
        }
    }
}

fn headless(setting: (usize, usize), seed: u64) -> EpisodeResult {
    let cfg = WorldConfig { n_seekers: setting.0, n_hiders: setting.1, ..WorldConfig::default() };
    run_episode(&cfg, seed, &mut heuristic_team(&cfg, seed), &EpisodeOptions::default(), None).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn commandless_session_matches_headless() {
    let addr = start(GuideOptions::default()).await;
    for seed in [3u64, 17] {
        let id = create_id(addr, json!({ "setting": "2v2", "seed": seed, "pacing": 0 })).await;
        let r = wait_result(addr, id).await;
        let h = headless((2, 2), seed);
        assert_eq!(r.result, h);
        assert!(r.interventions.is_empty());
        assert!(r.error.is_none());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn realtime_pacing_pushes_two_states_per_second() {
    let addr = start(GuideOptions::default()).await;
    let id = create_id(addr, json!({ "setting": "3v3", "seed": 5, "paused": true })).await;
    let mut ws = connect(addr, id).await;
    let map = next_json(&mut ws).await;
    assert_eq!(map["type"], "map");
    assert_eq!(map["arena_side"], 50.0);
    assert!(!map["obstacles"].as_array().unwrap().is_empty());
    let first = next_json(&mut ws).await;
    assert_eq!((first["type"].as_str(), first["tick"].as_u64()), (Some("state"), Some(0)));
    assert_eq!(first["agents"].as_array().unwrap().len(), 6);
    assert_eq!(first["time_left"], 120.0);

    assert_eq!(command(&mut ws, json!({ "type": "resume" })).await["type"], "ack");
    let t0 = Instant::now();
    let mut ticks = Vec::new();
    loop {
        let v = next_json(&mut ws).await;
        if t0.elapsed() > Duration::from_millis(2600) {
            break;
        }
        if v["type"] == "state" && v["tick"].as_u64() > Some(0) {
            ticks.push(v["tick"].as_u64().unwrap());
        }
        if v["type"] == "end" {
            break;
        }
    }
    // 2.6 s of real time is 5 decision periods.
    assert!((4..=6).contains(&ticks.len()), "{} states: {ticks:?}", ticks.len());
    assert!(ticks.windows(2).all(|w| w[1] == w[0] + 5), "{ticks:?}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn guided_session_records_intervention() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start(GuideOptions { record: Some(dir.path().to_owned()), ..GuideOptions::default() }).await;
    let id = create_id(addr, json!({ "setting": "3v3", "seed": 9, "paused": true, "pacing": 0 })).await;
    let mut ws = connect(addr, id).await;
    assert_eq!(next_json(&mut ws).await["type"], "map");

    let e = command(&mut ws, json!({ "type": "waypoint", "x": 10.0, "y": 12.0 })).await;
    assert_eq!(e["type"], "error", "waypoint without a selection: {e}");
    let e = command(&mut ws, json!({ "type": "select", "id": 4 })).await;
    assert_eq!(e["type"], "error", "hiders cannot be selected: {e}");
    assert!(command(&mut ws, json!({ "type": "teleport" })).await["reason"].as_str().unwrap().contains("bad message"));

    assert_eq!(command(&mut ws, json!({ "type": "select", "id": 2 })).await, json!({ "type": "ack", "tick": 0 }));
    assert_eq!(command(&mut ws, json!({ "type": "waypoint", "x": 10.0, "y": 12.0 })).await["type"], "ack");
    assert_eq!(command(&mut ws, json!({ "type": "resume" })).await["type"], "ack");
    let end = loop {
        let v = next_json(&mut ws).await;
        if v["type"] == "end" {
            break v;
        }
        if v["type"] == "state" && v["tick"].as_u64().unwrap() > 0 {
            assert_eq!(v["selected"], 2);
        }
    };
    let r: SessionResult = serde_json::from_value(end["result"].clone()).unwrap();
    assert_eq!(r, wait_result(addr, id).await);
    assert_eq!(r.interventions.len(), 1);
    let iv = &r.interventions[0];
    assert_eq!((iv.seeker, iv.issue_tick), (2, 0));
    assert_eq!((iv.waypoint.x, iv.waypoint.y), (10.0, 12.0));
    assert!(r.result.human_steps > 0);
    assert_eq!(r.result.interventions, 1);
    assert_ne!(r.result.trajectory_hash, headless((3, 3), 9).trajectory_hash);

    let ds = Dataset::open(dir.path()).unwrap();
    ds.verify().unwrap();
    let log = ds.read_episode(id).unwrap();
    assert_eq!(log.meta.trajectory_hash, r.result.trajectory_hash);
    assert_eq!(log.meta.human_steps, r.result.human_steps);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn sessions_are_independent() {
    let addr = start(GuideOptions::default()).await;
    let a = create_id(addr, json!({ "setting": "2v1", "seed": 21, "paused": true, "pacing": 0 })).await;
    let b = create_id(addr, json!({ "setting": "2v1", "seed": 21, "pacing": 0 })).await;
    assert_ne!(a, b);
    let mut ws = connect(addr, a).await;
    assert_eq!(command(&mut ws, json!({ "type": "select", "id": 0 })).await["type"], "ack");
    assert_eq!(command(&mut ws, json!({ "type": "waypoint", "x": 1.0, "y": 1.0 })).await["type"], "ack");
    assert_eq!(command(&mut ws, json!({ "type": "resume" })).await["type"], "ack");
    let (ra, rb) = (wait_result(addr, a).await, wait_result(addr, b).await);
    assert_eq!(rb.result, headless((2, 1), 21));
    assert!(rb.interventions.is_empty());
    assert_eq!(ra.interventions.len(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_requests_are_rejected() {
    let addr = start(GuideOptions::default()).await;
    for body in [
        json!({ "setting": "0v3" }),
        json!({ "setting": "5v1" }),
        json!({ "setting": "3x3" }),
        json!({ "pacing": -1 }),
        json!({ "bind": "nobody:3" }),
        json!({ "config": { "max_time": 0.25 } }),
    ] {
        let r = create(addr, body.clone()).await;
        assert_eq!(r.status(), 400, "{body}");
        assert!(r.json::<Value>().await.unwrap()["error"].is_string());
    }
    let r = create(addr, json!({ "colour": "red" })).await;
    assert!(r.status().is_client_error());
    assert_eq!(reqwest::get(format!("http://{addr}/sessions/999/result")).await.unwrap().status(), 404);
    let id = create_id(addr, json!({ "paused": true })).await;
    assert_eq!(reqwest::get(format!("http://{addr}/sessions/{id}/result")).await.unwrap().status(), 202);
    assert!(tokio_tungstenite::connect_async(format!("ws://{addr}/session/999")).await.is_err());
}
