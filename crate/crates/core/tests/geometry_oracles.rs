mod support;

use hideseek_core::geometry::{segment_intersects_obstacle, visible, Obstacle, ShapeSize};
use hideseek_core::grid::{OccupancyGrid, SeenGrid};
use hideseek_core::math::{Vec2, PI};
use hideseek_core::planner::{astar, plan_path};

use support::{dijkstra, free_cell, point, rng, sampled_hit, scene};

#[test]
fn segment_intersection_matches_sampling() {
    let mut r = rng(11);
    let (mut agree, mut total) = (0usize, 0usize);
    for _ in 0..1000 {
        let obs = scene(&mut r, 30.0, 1);
        for _ in 0..5 {
            let (p, q) = (point(&mut r, 30.0), point(&mut r, 30.0));
            let exact = segment_intersects_obstacle(p, q, &obs[0]);
            agree += (exact == sampled_hit(p, q, &obs, 1000)) as usize;
            total += 1;
        }
    }
    assert!(agree as f64 >= 0.999 * total as f64, "{agree}/{total}");
}

#[test]
fn visibility_matches_sampling() {
    let mut r = rng(12);
    let (mut agree, mut total) = (0usize, 0usize);
    for _ in 0..1000 {
        let obs = scene(&mut r, 50.0, 5);
        for _ in 0..5 {
            let (p, q) = (point(&mut r, 50.0), point(&mut r, 50.0));
            let oracle = p.dist(q) <= 16.0 && !sampled_hit(p, q, &obs, 2000);
            agree += (visible(p, q, &obs, 16.0) == oracle) as usize;
            total += 1;
        }
    }
    assert!(agree as f64 >= 0.999 * total as f64, "{agree}/{total}");
}

#[test]
fn cylinder_examples() {
    let c = |x, y| Obstacle::new(Vec2::new(x, y), 0.0, ShapeSize::Cylinder { radius: 1.0 });
    assert!(segment_intersects_obstacle(Vec2::ZERO, Vec2::new(10.0, 0.0), &c(5.0, 0.0)));
    assert!(!segment_intersects_obstacle(Vec2::ZERO, Vec2::new(10.0, 0.0), &c(5.0, 5.0)));
}

#[test]
fn visibility_examples() {
    let a = Vec2::new(10.0, 10.0);
    assert!(!visible(a, Vec2::new(27.0, 10.0), &[], 16.0));
    assert!(visible(a, Vec2::new(20.0, 10.0), &[], 16.0));
    let wall = Obstacle::new(Vec2::new(15.0, 10.0), 0.0, ShapeSize::Rectangle { length: 1.0, width: 6.0 });
    assert!(!visible(a, Vec2::new(20.0, 10.0), &[wall], 16.0));
}

#[test]
fn seen_disk_area() {
    let mut seen = SeenGrid::new(OccupancyGrid::build(50.0, 0.5, &[], 0.5).geom);
    seen.update(Vec2::new(25.0, 25.0), &[], 16.0);
    let expected = PI * 16.0 * 16.0 / 0.25;
    let n = seen.count() as f64;
    assert!((n - expected).abs() <= 0.02 * expected, "{n} vs {expected}");
    let again = seen.clone();
    assert_eq!(seen.update(Vec2::new(25.0, 25.0), &[], 16.0), 0);
    assert_eq!(seen, again);
}

#[test]
fn shadow_matches_per_cell_oracle() {
    let wall = Obstacle::new(Vec2::new(25.0, 25.0), 0.0, ShapeSize::Rectangle { length: 1.0, width: 12.0 });
    let obs = [wall];
    let from = Vec2::new(20.0, 25.0);
    let mut seen = SeenGrid::new(OccupancyGrid::build(50.0, 0.5, &obs, 0.5).geom);
    seen.update(from, &obs, 16.0);
    let g = seen.geom;
    for i in 0..g.len() {
        assert_eq!(seen.is_seen(i), visible(from, g.center(i), &obs, 16.0), "cell {i}");
    }
    // Directly behind the wall stays dark.
    assert!(!seen.is_seen_point(Vec2::new(30.0, 25.0)));
}

#[test]
fn astar_cost_equals_dijkstra() {
    let mut r = rng(13);
    let mut reached = 0;
    for k in 0..100 {
        let side = if k % 2 == 0 { 50.0 } else { 20.0 };
        let obs = scene(&mut r, side, 4 + k % 8);
        let grid = OccupancyGrid::build(side, 0.5, &obs, 0.5);
        let (s, t) = (free_cell(&grid, &mut r), free_cell(&grid, &mut r));
        match (astar(&grid, s, t), dijkstra(&grid, s, t)) {
            (Ok(p), Some(c)) => {
                assert_eq!((p.straight as i64, p.diagonal as i64), (c.0, c.1), "scene {k}");
                assert_eq!(p.cells.len() as u32, p.straight + p.diagonal + 1);
                reached += 1;
            }
            (Err(_), None) => {}
            (a, b) => panic!("scene {k}: astar {:?} vs dijkstra {:?}", a.is_ok(), b),
        }
    }
    assert!(reached > 50);
}

/// Shortest path among axis-aligned rectangles via their corners; the raw
/// (uninflated) obstacles make it a lower bound on any clearance-keeping path.
fn visibility_graph_length(start: Vec2, goal: Vec2, obstacles: &[Obstacle], boxes: &[(Vec2, Vec2)]) -> f64 {
    let eps = 1e-6;
    let mut nodes = vec![start, goal];
    for &(lo, hi) in boxes {
        nodes.extend([
            Vec2::new(lo.x - eps, lo.y - eps),
            Vec2::new(hi.x + eps, lo.y - eps),
            Vec2::new(hi.x + eps, hi.y + eps),
            Vec2::new(lo.x - eps, hi.y + eps),
        ]);
    }
    let n = nodes.len();
    let clear = |a: Vec2, b: Vec2| !obstacles.iter().any(|o| o.segment_intersects(a, b));
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n).filter(|&i| !done[i]).min_by(|&a, &b| dist[a].total_cmp(&dist[b])) else { break };
        done[u] = true;
        for v in 0..n {
            if !done[v] && clear(nodes[u], nodes[v]) {
                dist[v] = dist[v].min(dist[u] + nodes[u].dist(nodes[v]));
            }
        }
    }
    dist[1]
}

#[test]
fn u_shape_path_near_visibility_graph() {
    // U opening to the left; start inside the cup, goal behind it.
    let bar = |x: f64, y: f64, l: f64, w: f64| Obstacle::new(Vec2::new(x, y), 0.0, ShapeSize::Rectangle { length: l, width: w });
    let obs = vec![bar(30.0, 25.0, 1.0, 12.0), bar(25.5, 31.5, 10.0, 1.0), bar(25.5, 18.5, 10.0, 1.0)];
    let boxes: Vec<(Vec2, Vec2)> = obs.iter().map(|o| o.bounds()).collect();
    let grid = OccupancyGrid::build(50.0, 0.5, &obs, 0.5);
    let start = Vec2::new(27.0, 25.0);
    let goal = Vec2::new(40.0, 25.0);
    let plan = plan_path(start, goal, &grid, &obs).unwrap();
    let length = plan.length_from(start);
    let oracle = visibility_graph_length(start, goal, &obs, &boxes);
    assert!(length >= oracle - 1e-9);
    assert!(length <= 1.2 * oracle, "{length} vs {oracle}");
    let mut prev = start;
    for &p in &plan.waypoints {
        assert!(!obs.iter().any(|o| o.segment_intersects(prev, p)));
        prev = p;
    }
}

#[test]
fn random_plans_are_collision_free() {
    let mut r = rng(14);
    for _ in 0..200 {
        let obs = scene(&mut r, 50.0, 6);
        let grid = OccupancyGrid::build(50.0, 0.5, &obs, 0.5);
        let s = grid.geom.center(free_cell(&grid, &mut r));
        let t = point(&mut r, 50.0);
        if let Ok(plan) = plan_path(s, t, &grid, &obs) {
            let mut prev = s;
            for &p in &plan.waypoints {
                assert!(!obs.iter().any(|o| o.segment_intersects(prev, p)), "{prev:?} -> {p:?}");
                prev = p;
            }
        }
    }
}
