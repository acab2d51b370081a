#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use hideseek_core::geometry::{Obstacle, ShapeSize};
use hideseek_core::grid::OccupancyGrid;
use hideseek_core::math::{Vec2, TAU};
use hideseek_core::rng::SimRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn point(rng: &mut SimRng, side: f64) -> Vec2 {
    Vec2::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side))
}

/// Any shape, any yaw, sizes a bit wider than the map generator's.
pub fn obstacle(rng: &mut SimRng, side: f64) -> Obstacle {
    let c = point(rng, side);
    let yaw = rng.gen_range(0.0..TAU);
    let size = match rng.gen_range(0..4) {
        0 => ShapeSize::Cylinder { radius: rng.gen_range(0.5..4.0) },
        1 => ShapeSize::Rectangle { length: rng.gen_range(1.0..10.0), width: rng.gen_range(0.5..3.0) },
        2 => ShapeSize::Cross { span: rng.gen_range(2.0..10.0), thickness: rng.gen_range(0.5..2.0) },
        _ => ShapeSize::LShape {
            leg_x: rng.gen_range(2.0..10.0),
            leg_y: rng.gen_range(2.0..10.0),
            thickness: rng.gen_range(0.5..2.0),
        },
    };
    Obstacle::new(c, yaw, size)
}

pub fn scene(rng: &mut SimRng, side: f64, n: usize) -> Vec<Obstacle> {
    (0..n).map(|_| obstacle(rng, side)).collect()
}

/// Does any of `samples + 1` evenly spaced points of `pq` lie inside?
pub fn sampled_hit(p: Vec2, q: Vec2, obstacles: &[Obstacle], samples: usize) -> bool {
    (0..=samples).any(|k| {
        let x = p.lerp(q, k as f64 / samples as f64);
        obstacles.iter().any(|o| o.contains(x))
    })
}

/// `a + b√2`, compared exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cost(pub i64, pub i64);

impl Ord for Cost {
    fn cmp(&self, o: &Self) -> Ordering {
        // sign of (a1 - a2) + (b1 - b2)√2
        let (x, y) = (self.0 - o.0, self.1 - o.1);
        match (x.signum(), y.signum()) {
            (0, 0) => Ordering::Equal,
            (sx, sy) if sx >= 0 && sy >= 0 => Ordering::Greater,
            (sx, sy) if sx <= 0 && sy <= 0 => Ordering::Less,
            (sx, _) => {
                let lhs = x * x;
                let rhs = 2 * y * y;
                if sx > 0 {
                    lhs.cmp(&rhs)
                } else {
                    rhs.cmp(&lhs)
                }
            }
        }
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Plain Dijkstra with exact costs and its own neighbor rule.
pub fn dijkstra(grid: &OccupancyGrid, start: usize, goal: usize) -> Option<Cost> {
    let g = grid.geom;
    let mut best: Vec<Option<Cost>> = vec![None; g.len()];
    let mut heap = BinaryHeap::new();
    best[start] = Some(Cost(0, 0));
    heap.push(std::cmp::Reverse((Cost(0, 0), start)));
    while let Some(std::cmp::Reverse((c, i))) = heap.pop() {
        if best[i] != Some(c) {
            continue;
        }
        if i == goal {
            return Some(c);
        }
        let (col, row) = g.col_row(i);
        for dc in -1i64..=1 {
            for dr in -1i64..=1 {
                if dc == 0 && dr == 0 {
                    continue;
                }
                let (nc, nr) = (col as i64 + dc, row as i64 + dr);
                if nc < 0 || nr < 0 || nc >= g.cols as i64 || nr >= g.rows as i64 {
                    continue;
                }
                let n = g.index(nc as usize, nr as usize);
                if grid.is_blocked(n) {
                    continue;
                }
                let diag = dc != 0 && dr != 0;
                if diag
                    && (grid.is_blocked(g.index(nc as usize, row)) || grid.is_blocked(g.index(col, nr as usize)))
                {
                    continue;
                }
                let nc = if diag { Cost(c.0, c.1 + 1) } else { Cost(c.0 + 1, c.1) };
                if best[n].is_none_or(|b| nc < b) {
                    best[n] = Some(nc);
                    heap.push(std::cmp::Reverse((nc, n)));
                }
            }
        }
    }
    None
}

pub fn free_cell(grid: &OccupancyGrid, r: &mut SimRng) -> usize {
    loop {
        let i = r.gen_range(0..grid.geom.len());
        if !grid.is_blocked(i) {
            return i;
        }
    }
}
