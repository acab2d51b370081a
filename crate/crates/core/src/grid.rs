//! Occupancy and accumulated-visibility grids over the arena.
//!
//! Cells are indexed row-major from the arena corner at the origin:
//! `index = row * cols + col`, with row growing along +y.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{visible, Obstacle};
use crate::math::{floor, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub cols: usize,
    pub rows: usize,
    pub resolution: f64,
    pub side: f64,
}

impl GridGeometry {
    pub fn new(side: f64, resolution: f64) -> Self {
        let n = libm::ceil(side / resolution - 1e-9).max(1.0) as usize;
        GridGeometry { cols: n, rows: n, resolution, side }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn col_row(&self, idx: usize) -> (usize, usize) {
        (idx % self.cols, idx / self.cols)
    }

    #[inline]
    pub fn center(&self, idx: usize) -> Vec2 {
        let (c, r) = self.col_row(idx);
        Vec2::new((c as f64 + 0.5) * self.resolution, (r as f64 + 0.5) * self.resolution)
    }

    /// Cell containing `p`, clamped to the grid.
    pub fn cell_of(&self, p: Vec2) -> usize {
        let c = (floor(p.x / self.resolution).max(0.0) as usize).min(self.cols - 1);
        let r = (floor(p.y / self.resolution).max(0.0) as usize).min(self.rows - 1);
        self.index(c, r)
    }

    /// 8-connected neighbors without corner cutting: a diagonal step needs
    /// both orthogonal cells free. Yields `(index, is_diagonal)`.
    pub fn free_neighbors<'a>(
        &'a self,
        idx: usize,
        blocked: &'a [bool],
    ) -> impl Iterator<Item = (usize, bool)> + 'a {
        let (c, r) = self.col_row(idx);
        let (c, r) = (c as isize, r as isize);
        const STEPS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        STEPS.iter().filter_map(move |&(dc, dr)| {
            let (nc, nr) = (c + dc, r + dr);
            if nc < 0 || nr < 0 || nc >= self.cols as isize || nr >= self.rows as isize {
                return None;
            }
            let n = self.index(nc as usize, nr as usize);
            if blocked[n] {
                return None;
            }
            let diagonal = dc != 0 && dr != 0;
            if diagonal {
                let a = self.index((c + dc) as usize, r as usize);
                let b = self.index(c as usize, (r + dr) as usize);
                if blocked[a] || blocked[b] {
                    return None;
                }
            }
            Some((n, diagonal))
        })
    }
}

/// Cell blocked iff its center lies within `inflation` of an obstacle.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub geom: GridGeometry,
    pub inflation: f64,
    blocked: Vec<bool>,
}

impl OccupancyGrid {
    pub fn build(side: f64, resolution: f64, obstacles: &[Obstacle], inflation: f64) -> Self {
        let geom = GridGeometry::new(side, resolution);
        let mut blocked = vec![false; geom.len()];
        for o in obstacles {
            let (lo, hi) = o.bounds();
            let c0 = (floor((lo.x - inflation) / resolution).max(0.0) as usize).min(geom.cols - 1);
            let c1 = (floor((hi.x + inflation) / resolution).max(0.0) as usize).min(geom.cols - 1);
            let r0 = (floor((lo.y - inflation) / resolution).max(0.0) as usize).min(geom.rows - 1);
            let r1 = (floor((hi.y + inflation) / resolution).max(0.0) as usize).min(geom.rows - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let i = geom.index(c, r);
                    if !blocked[i] && o.distance(geom.center(i)) <= inflation {
                        blocked[i] = true;
                    }
                }
            }
        }
        OccupancyGrid { geom, inflation, blocked }
    }

    #[inline]
    pub fn is_blocked(&self, idx: usize) -> bool {
        self.blocked[idx]
    }

    pub fn is_free_point(&self, p: Vec2) -> bool {
        !self.blocked[self.geom.cell_of(p)]
    }

    pub fn blocked(&self) -> &[bool] {
        &self.blocked
    }

    pub fn free_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    /// Free cell nearest to `idx` by breadth-first search over all cells
    /// (ties resolved by BFS order, which is deterministic).
    pub fn nearest_free(&self, idx: usize) -> Option<usize> {
        if !self.blocked[idx] {
            return Some(idx);
        }
        let mut best: Option<(f64, usize)> = None;
        let target = self.geom.center(idx);
        let mut seen = vec![false; self.geom.len()];
        let mut queue = VecDeque::new();
        seen[idx] = true;
        queue.push_back((idx, 0usize));
        let mut found_depth = usize::MAX;
        while let Some((i, depth)) = queue.pop_front() {
            if depth > found_depth {
                break;
            }
            if !self.blocked[i] {
                found_depth = depth;
                let d = self.geom.center(i).dist_sq(target);
                if best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                    best = Some((d, i));
                }
                continue;
            }
            let (c, r) = self.geom.col_row(i);
            for (dc, dr) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let (nc, nr) = (c as isize + dc, r as isize + dr);
                if nc < 0 || nr < 0 || nc >= self.geom.cols as isize || nr >= self.geom.rows as isize {
                    continue;
                }
                let n = self.geom.index(nc as usize, nr as usize);
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back((n, depth + 1));
                }
            }
        }
        best.map(|(_, i)| i)
    }

    /// Connected components of free space; returns the component label of
    /// every cell (`u32::MAX` for blocked) and the number of components.
    pub fn components(&self) -> (Vec<u32>, usize) {
        let mut label = vec![u32::MAX; self.geom.len()];
        let mut n = 0usize;
        let mut stack = Vec::new();
        for start in 0..self.geom.len() {
            if self.blocked[start] || label[start] != u32::MAX {
                continue;
            }
            label[start] = n as u32;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for (j, _) in self.geom.free_neighbors(i, &self.blocked) {
                    if label[j] == u32::MAX {
                        label[j] = n as u32;
                        stack.push(j);
                    }
                }
            }
            n += 1;
        }
        (label, n)
    }

    /// True when all free cells form a single connected region.
    pub fn is_connected(&self) -> bool {
        self.components().1 <= 1
    }
}

/// Per-seeker accumulated visibility. Monotone: cells only turn on.
#[derive(Clone, Debug, PartialEq)]
pub struct SeenGrid {
    pub geom: GridGeometry,
    seen: Vec<bool>,
    count: usize,
}

impl SeenGrid {
    pub fn new(geom: GridGeometry) -> Self {
        SeenGrid { geom, seen: vec![false; geom.len()], count: 0 }
    }

    #[inline]
    pub fn is_seen(&self, idx: usize) -> bool {
        self.seen[idx]
    }

    pub fn is_seen_point(&self, p: Vec2) -> bool {
        self.seen[self.geom.cell_of(p)]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn cells(&self) -> &[bool] {
        &self.seen
    }

    /// Mark every cell whose center is visible from `from` within `range`.
    /// Returns the number of newly seen cells.
    pub fn update(&mut self, from: Vec2, obstacles: &[Obstacle], range: f64) -> usize {
        let g = self.geom;
        let res = g.resolution;
        // Only obstacles that can reach into the sensing disk can occlude.
        let mut near: Vec<Obstacle> = Vec::new();
        for o in obstacles {
            if o.distance(from) <= range {
                near.push(o.clone());
            }
        }
        let c0 = (floor((from.x - range) / res).max(0.0) as usize).min(g.cols - 1);
        let c1 = (floor((from.x + range) / res).max(0.0) as usize).min(g.cols - 1);
        let r0 = (floor((from.y - range) / res).max(0.0) as usize).min(g.rows - 1);
        let r1 = (floor((from.y + range) / res).max(0.0) as usize).min(g.rows - 1);
        let mut added = 0;
        for r in r0..=r1 {
            for c in c0..=c1 {
                let i = g.index(c, r);
                if self.seen[i] {
                    continue;
                }
                if visible(from, g.center(i), &near, range) {
                    self.seen[i] = true;
                    added += 1;
                }
            }
        }
        self.count += added;
        added
    }

    /// Cell-wise union (used to check accumulation against per-pose masks).
    pub fn union_with(&mut self, other: &SeenGrid) {
        for (a, b) in self.seen.iter_mut().zip(&other.seen) {
            if *b && !*a {
                *a = true;
                self.count += 1;
            }
        }
    }
}

/// Free-function form of [`SeenGrid::update`].
pub fn update_seen(mut grid: SeenGrid, from: Vec2, obstacles: &[Obstacle], range: f64) -> SeenGrid {
    grid.update(from, obstacles, range);
    grid
}
