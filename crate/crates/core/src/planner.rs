//! Grid A* with line-of-sight smoothing.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::geometry::Obstacle;
use crate::grid::OccupancyGrid;
use crate::math::{sqrt, Vec2};

const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Cell path with its exact cost split into straight and diagonal steps, so
/// costs compare exactly as `straight + diagonal·√2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridPath {
    pub cells: Vec<usize>,
    pub straight: u32,
    pub diagonal: u32,
}

impl GridPath {
    pub fn cost(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT2
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (f, idx).
        other.f.total_cmp(&self.f).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected A* (no corner cutting) with a Euclidean heuristic; ties in
/// `f` pop the lower cell index first. Both endpoints must be free cells.
/// On failure returns the set of expanded cells' closest member to the goal.
pub fn astar(grid: &OccupancyGrid, start: usize, goal: usize) -> Result<GridPath, usize> {
    let g = &grid.geom;
    let n = g.len();
    let (gc, gr) = g.col_row(goal);
    let h = |i: usize| {
        let (c, r) = g.col_row(i);
        let dx = c as f64 - gc as f64;
        let dy = r as f64 - gr as f64;
        sqrt(dx * dx + dy * dy)
    };
    let mut cost = vec![f64::INFINITY; n];
    let mut steps = vec![(0u32, 0u32); n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    cost[start] = 0.0;
    heap.push(Open { f: h(start), idx: start });
    let mut nearest = (h(start), start);
    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        let hi = h(idx);
        if hi < nearest.0 || (hi == nearest.0 && idx < nearest.1) {
            nearest = (hi, idx);
        }
        if idx == goal {
            let mut cells = vec![goal];
            let mut cur = goal;
            while cur != start {
                cur = parent[cur];
                cells.push(cur);
            }
            cells.reverse();
            let (straight, diagonal) = steps[goal];
            return Ok(GridPath { cells, straight, diagonal });
        }
        for (nb, diag) in g.free_neighbors(idx, grid.blocked()) {
            if closed[nb] {
                continue;
            }
            let c = cost[idx] + if diag { SQRT2 } else { 1.0 };
            if c < cost[nb] {
                cost[nb] = c;
                parent[nb] = idx;
                let (s, d) = steps[idx];
                steps[nb] = if diag { (s, d + 1) } else { (s + 1, d) };
                heap.push(Open { f: c + h(nb), idx: nb });
            }
        }
    }
    Err(nearest.1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    /// Points to visit in order, excluding the start.
    pub waypoints: Vec<Vec2>,
    /// The goal was not free and the plan ends at the nearest free cell.
    pub goal_adjusted: bool,
}

impl Plan {
    pub fn end(&self) -> Option<Vec2> {
        self.waypoints.last().copied()
    }

    pub fn length_from(&self, start: Vec2) -> f64 {
        let mut prev = start;
        let mut total = 0.0;
        for &p in &self.waypoints {
            total += prev.dist(p);
            prev = p;
        }
        total
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlanError {
    /// No free path exists; carries the center of the reachable cell
    /// nearest the goal.
    Unreachable { nearest: Vec2 },
    /// The grid has no free cells at all.
    NoFreeSpace,
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::Unreachable { nearest } => {
                write!(f, "goal unreachable; nearest reachable cell at ({:.2}, {:.2})", nearest.x, nearest.y)
            }
            PlanError::NoFreeSpace => f.write_str("occupancy grid has no free cells"),
        }
    }
}

impl core::error::Error for PlanError {}

/// True when the segment stays farther than `clearance` from every obstacle.
pub fn segment_clear(p: Vec2, q: Vec2, obstacles: &[Obstacle], clearance: f64) -> bool {
    !obstacles.iter().any(|o| o.segment_intersects_inflated(p, q, clearance))
}

pub fn point_clear(p: Vec2, obstacles: &[Obstacle], clearance: f64) -> bool {
    obstacles.iter().all(|o| o.distance(p) > clearance)
}

/// Shortest grid path from `start` to the free cell nearest `goal`,
/// smoothed by greedy line-of-sight shortcutting. Shortcuts keep the grid's
/// inflation as clearance; unshortened steps join free cell centers.
pub fn plan_path(start: Vec2, goal: Vec2, grid: &OccupancyGrid, obstacles: &[Obstacle]) -> Result<Plan, PlanError> {
    let clearance = grid.inflation;
    let g = &grid.geom;
    let goal_free = point_clear(goal, obstacles, clearance);
    let start_free = point_clear(start, obstacles, clearance);
    if goal_free && start_free && segment_clear(start, goal, obstacles, clearance) {
        return Ok(Plan { waypoints: vec![goal], goal_adjusted: false });
    }
    let s_cell = grid.nearest_free(g.cell_of(start)).ok_or(PlanError::NoFreeSpace)?;
    let g_cell = grid.nearest_free(g.cell_of(goal)).ok_or(PlanError::NoFreeSpace)?;
    let target = if goal_free { goal } else { g.center(g_cell) };
    let path = astar(grid, s_cell, g_cell).map_err(|nearest| PlanError::Unreachable { nearest: g.center(nearest) })?;

    let mut raw = Vec::with_capacity(path.cells.len() + 2);
    raw.push(start);
    raw.extend(path.cells.iter().map(|&c| g.center(c)));
    if target != *raw.last().unwrap() {
        raw.push(target);
    }
    Ok(Plan { waypoints: smooth(&raw, obstacles, clearance), goal_adjusted: !goal_free })
}

/// Greedy shortcutting: from each anchor, advance while the straight segment
/// stays clear, keep the last clear point. Output excludes `raw[0]`.
pub fn smooth(raw: &[Vec2], obstacles: &[Obstacle], clearance: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    if raw.len() < 2 {
        return out;
    }
    let mut anchor = 0;
    while anchor < raw.len() - 1 {
        let mut next = anchor + 1;
        while next + 1 < raw.len() && segment_clear(raw[anchor], raw[next + 1], obstacles, clearance) {
            next += 1;
        }
        if raw[next] != raw[anchor] {
            out.push(raw[next]);
        }
        anchor = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ShapeSize;

    fn rect(x: f64, y: f64, l: f64, w: f64) -> Obstacle {
        Obstacle::new(Vec2::new(x, y), 0.0, ShapeSize::Rectangle { length: l, width: w })
    }

    #[test]
    fn open_field_is_one_segment() {
        let grid = OccupancyGrid::build(50.0, 0.5, &[], 0.5);
        let p = plan_path(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), &grid, &[]).unwrap();
        assert_eq!(p.waypoints, vec![Vec2::new(10.0, 0.0)]);
        assert!(!p.goal_adjusted);
    }

    #[test]
    fn goal_inside_obstacle_is_flagged() {
        let obs = [rect(25.0, 25.0, 6.0, 6.0)];
        let grid = OccupancyGrid::build(50.0, 0.5, &obs, 0.5);
        let p = plan_path(Vec2::new(5.0, 25.0), Vec2::new(25.0, 25.0), &grid, &obs).unwrap();
        assert!(p.goal_adjusted);
        let end = p.end().unwrap();
        assert!(!grid.is_blocked(grid.geom.cell_of(end)));
        // Goal cell center (25.25, 25.25) is nearer the +x face of the box.
        assert_eq!(end, Vec2::new(28.75, 25.25));
    }

    #[test]
    fn detour_around_wall_is_clear() {
        let obs = [rect(25.0, 25.0, 1.0, 20.0)];
        let grid = OccupancyGrid::build(50.0, 0.5, &obs, 0.5);
        let start = Vec2::new(15.0, 25.0);
        let p = plan_path(start, Vec2::new(35.0, 25.0), &grid, &obs).unwrap();
        assert!(p.waypoints.len() >= 2);
        let mut prev = start;
        for &w in &p.waypoints {
            assert!(!obs[0].segment_intersects(prev, w));
            prev = w;
        }
        // Around a 20 m wall: two legs of ~sqrt(10^2 + 10.5^2).
        let len = p.length_from(start);
        assert!(len < 2.0 * 14.6 * 1.05, "{len}");
    }

    #[test]
    fn unreachable_goal_reports_nearest() {
        let w = |x, y, l, wd| rect(x, y, l, wd);
        let obs = [w(10.0, 5.0, 10.0, 1.0), w(10.0, 15.0, 10.0, 1.0), w(5.0, 10.0, 1.0, 10.0), w(15.0, 10.0, 1.0, 10.0)];
        let grid = OccupancyGrid::build(50.0, 0.5, &obs, 0.5);
        match plan_path(Vec2::new(30.0, 30.0), Vec2::new(10.0, 10.0), &grid, &obs) {
            Err(PlanError::Unreachable { nearest }) => assert!(nearest.dist(Vec2::new(10.0, 10.0)) < 9.0),
            other => panic!("expected unreachable, got {other:?}"),
        }
    }

    #[test]
    fn astar_straight_line_cost() {
        let grid = OccupancyGrid::build(10.0, 0.5, &[], 0.5);
        let g = grid.geom;
        let p = astar(&grid, g.index(0, 0), g.index(5, 3)).unwrap();
        assert_eq!((p.straight, p.diagonal), (2, 3));
    }
}
