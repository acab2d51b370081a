//! Seeker observations: a full-arena top-down RGB image plus a self mask.
//!
//! Layout is row-major, channel-last, row 0 at the top of the arena (largest
//! y). Channels are R, G, B and the self mask (0 or 1).

use alloc::collections::VecDeque;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{visible, Obstacle};
use crate::grid::SeenGrid;
use crate::math::{cos, floor, round, sin};
use crate::world::{AgentId, Role, WorldState};

pub const OBS_SIZE: usize = 156;
pub const OBS_CHANNELS: usize = 4;
pub const OBS_BYTES: usize = OBS_SIZE * OBS_SIZE * OBS_CHANNELS;

pub const UNKNOWN: [u8; 3] = [0, 0, 0];
pub const SEEN_FREE: [u8; 3] = [128, 128, 128];
pub const SEEN_OBSTACLE: [u8; 3] = [255, 255, 255];
pub const SEEKER: [u8; 3] = [255, 0, 0];
pub const HIDER: [u8; 3] = [0, 255, 0];

/// Agent disk radius in pixels.
pub const DISK_RADIUS: i64 = 2;

#[derive(Clone, PartialEq, Eq)]
pub struct ObservationTensor {
    data: Vec<u8>,
}

impl fmt::Debug for ObservationTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObservationTensor({}x{}x{})", OBS_SIZE, OBS_SIZE, OBS_CHANNELS)
    }
}

impl Default for ObservationTensor {
    fn default() -> Self {
        ObservationTensor { data: vec![0; OBS_BYTES] }
    }
}

impl ObservationTensor {
    pub fn from_bytes(data: Vec<u8>) -> Option<Self> {
        (data.len() == OBS_BYTES).then_some(ObservationTensor { data })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(row: usize, col: usize) -> usize {
        (row * OBS_SIZE + col) * OBS_CHANNELS
    }

    pub fn rgb(&self, row: usize, col: usize) -> [u8; 3] {
        let o = Self::offset(row, col);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn mask(&self, row: usize, col: usize) -> u8 {
        self.data[Self::offset(row, col) + 3]
    }

    pub fn set_rgb(&mut self, row: usize, col: usize, c: [u8; 3]) {
        let o = Self::offset(row, col);
        self.data[o..o + 3].copy_from_slice(&c);
    }

    pub fn set_mask(&mut self, row: usize, col: usize, v: u8) {
        self.data[Self::offset(row, col) + 3] = v;
    }

    pub fn mask_sum(&self) -> u32 {
        self.data.chunks_exact(OBS_CHANNELS).map(|p| p[3] as u32).sum()
    }

    /// RGB planes only, `156·156·3` bytes.
    pub fn rgb_bytes(&self) -> Vec<u8> {
        self.data.chunks_exact(OBS_CHANNELS).flat_map(|p| [p[0], p[1], p[2]]).collect()
    }

    pub fn mask_bytes(&self) -> Vec<u8> {
        self.data.chunks_exact(OBS_CHANNELS).map(|p| p[3]).collect()
    }

    pub fn from_planes(rgb: &[u8], mask: &[u8]) -> Option<Self> {
        if rgb.len() != OBS_SIZE * OBS_SIZE * 3 || mask.len() != OBS_SIZE * OBS_SIZE {
            return None;
        }
        let mut data = Vec::with_capacity(OBS_BYTES);
        for (c, m) in rgb.chunks_exact(3).zip(mask) {
            data.extend_from_slice(c);
            data.push(*m);
        }
        Some(ObservationTensor { data })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderError {
    UnknownSeeker(AgentId),
    DeadSeeker(AgentId),
}

impl fmt::Display for RenderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenderError::UnknownSeeker(id) => write!(f, "agent {id} is not a seeker"),
            RenderError::DeadSeeker(id) => write!(f, "seeker {id} is not alive"),
        }
    }
}

impl core::error::Error for RenderError {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Omit teammate disks (self disk and mask are kept).
    pub mask_teammates: bool,
}

/// Per-map pixel lookup tables, built once per episode.
#[derive(Clone, Debug)]
pub struct Renderer {
    side: f64,
    /// Seen-grid cell under each pixel center.
    pixel_cell: Vec<u32>,
    /// Grid cells around obstacle pixels; such a pixel turns white once any
    /// of them is seen (obstacle interiors are never visible themselves).
    obstacle_cells: Vec<Option<[u32; 9]>>,
}

/// Pixel `(row, col)` holding world point `(x, y)`, clamped to the image.
pub fn pixel_of(x: f64, y: f64, side: f64) -> (usize, usize) {
    let scale = OBS_SIZE as f64 / side;
    let col = (floor(x * scale).max(0.0) as usize).min(OBS_SIZE - 1);
    let row_up = (floor(y * scale).max(0.0) as usize).min(OBS_SIZE - 1);
    (OBS_SIZE - 1 - row_up, col)
}

/// World coordinates of a pixel center.
pub fn pixel_center(row: usize, col: usize, side: f64) -> (f64, f64) {
    let s = side / OBS_SIZE as f64;
    ((col as f64 + 0.5) * s, side - (row as f64 + 0.5) * s)
}

impl Renderer {
    pub fn new(world: &WorldState) -> Self {
        let side = world.config.arena_side;
        let g = world.occupancy.geom;
        let mut pixel_cell = Vec::with_capacity(OBS_SIZE * OBS_SIZE);
        let mut obstacle_cells = Vec::with_capacity(OBS_SIZE * OBS_SIZE);
        for row in 0..OBS_SIZE {
            for col in 0..OBS_SIZE {
                let (x, y) = pixel_center(row, col, side);
                let p = crate::math::Vec2::new(x, y);
                let cell = g.cell_of(p);
                pixel_cell.push(cell as u32);
                let inside = world.obstacles.iter().any(|o: &Obstacle| o.contains(p));
                obstacle_cells.push(inside.then(|| {
                    let (c, r) = g.col_row(cell);
                    let mut n = [cell as u32; 9];
                    let mut k = 0;
                    for dr in -1i64..=1 {
                        for dc in -1i64..=1 {
                            let cc = (c as i64 + dc).clamp(0, g.cols as i64 - 1) as usize;
                            let rr = (r as i64 + dr).clamp(0, g.rows as i64 - 1) as usize;
                            n[k] = g.index(cc, rr) as u32;
                            k += 1;
                        }
                    }
                    n
                }));
            }
        }
        Renderer { side, pixel_cell, obstacle_cells }
    }

    pub fn render(
        &self,
        world: &WorldState,
        seeker: AgentId,
        seen: &SeenGrid,
        opts: RenderOptions,
    ) -> Result<ObservationTensor, RenderError> {
        let me = world.agent(seeker).filter(|a| a.role == Role::Seeker).ok_or(RenderError::UnknownSeeker(seeker))?;
        if !me.alive {
            return Err(RenderError::DeadSeeker(seeker));
        }
        let mut t = ObservationTensor::default();
        for (i, px) in t.data.chunks_exact_mut(OBS_CHANNELS).enumerate() {
            let color = match &self.obstacle_cells[i] {
                Some(cells) => {
                    if cells.iter().any(|&c| seen.is_seen(c as usize)) {
                        SEEN_OBSTACLE
                    } else {
                        UNKNOWN
                    }
                }
                None if seen.is_seen(self.pixel_cell[i] as usize) => SEEN_FREE,
                None => UNKNOWN,
            };
            px[..3].copy_from_slice(&color);
        }
        let range = world.config.seeker_range;
        for h in world.hiders() {
            if h.alive && visible(me.pos, h.pos, &world.obstacles, range) {
                self.disk(&mut t, h.pos.x, h.pos.y, HIDER);
            }
        }
        for s in world.seekers() {
            if s.id == seeker || !s.alive || opts.mask_teammates {
                continue;
            }
            self.seeker_glyph(&mut t, s.pos.x, s.pos.y, s.heading);
        }
        self.seeker_glyph(&mut t, me.pos.x, me.pos.y, me.heading);
        let (r, c) = pixel_of(me.pos.x, me.pos.y, self.side);
        let (r, c) = (r.clamp(1, OBS_SIZE - 2), c.clamp(1, OBS_SIZE - 2));
        for rr in r - 1..=r + 1 {
            for cc in c - 1..=c + 1 {
                t.set_mask(rr, cc, 1);
            }
        }
        Ok(t)
    }

    fn disk(&self, t: &mut ObservationTensor, x: f64, y: f64, color: [u8; 3]) {
        let (r, c) = pixel_of(x, y, self.side);
        for dr in -DISK_RADIUS..=DISK_RADIUS {
            for dc in -DISK_RADIUS..=DISK_RADIUS {
                if dr * dr + dc * dc > DISK_RADIUS * DISK_RADIUS {
                    continue;
                }
                let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                if (0..OBS_SIZE as i64).contains(&rr) && (0..OBS_SIZE as i64).contains(&cc) {
                    t.set_rgb(rr as usize, cc as usize, color);
                }
            }
        }
    }

    /// Disk plus a two-pixel orientation tick just outside it.
    fn seeker_glyph(&self, t: &mut ObservationTensor, x: f64, y: f64, heading: f64) {
        self.disk(t, x, y, SEEKER);
        let (r, c) = pixel_of(x, y, self.side);
        let (dx, dy) = (cos(heading), sin(heading));
        for k in [3.0, 4.0] {
            let rr = r as i64 - round(k * dy) as i64;
            let cc = c as i64 + round(k * dx) as i64;
            if (0..OBS_SIZE as i64).contains(&rr) && (0..OBS_SIZE as i64).contains(&cc) {
                t.set_rgb(rr as usize, cc as usize, SEEKER);
            }
        }
    }
}

/// One-shot rendering; episode runners keep a [`Renderer`] instead.
pub fn render_seeker_obs(world: &WorldState, seeker: AgentId, seen: &SeenGrid, opts: RenderOptions) -> Result<ObservationTensor, RenderError> {
    Renderer::new(world).render(world, seeker, seen, opts)
}

/// Last `n` frames of one seeker, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    n: usize,
    frames: VecDeque<Arc<ObservationTensor>>,
}

impl FrameStack {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "frame stack depth must be positive");
        FrameStack { n, frames: VecDeque::with_capacity(n) }
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The first frame fills the whole stack; later frames evict the oldest.
    pub fn push(&mut self, frame: Arc<ObservationTensor>) {
        if self.frames.is_empty() {
            for _ in 0..self.n {
                self.frames.push_back(frame.clone());
            }
            return;
        }
        self.frames.pop_front();
        self.frames.push_back(frame);
    }

    pub fn frames(&self) -> impl Iterator<Item = &Arc<ObservationTensor>> + '_ {
        self.frames.iter()
    }

    /// `[n, 156, 156, 4]`.
    pub fn shape(&self) -> [usize; 4] {
        [self.n, OBS_SIZE, OBS_SIZE, OBS_CHANNELS]
    }

    /// Contiguous `n·156·156·4` bytes, oldest frame first.
    pub fn stacked(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n * OBS_BYTES);
        for f in &self.frames {
            out.extend_from_slice(f.as_bytes());
        }
        out
    }
}

pub fn push_frame(mut stack: FrameStack, frame: Arc<ObservationTensor>) -> FrameStack {
    stack.push(frame);
    stack
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::WorldConfig;
    use crate::math::Vec2;
    use crate::world::AgentState;

    fn frame(v: u8) -> Arc<ObservationTensor> {
        let mut t = ObservationTensor::default();
        t.set_rgb(0, 0, [v, 0, 0]);
        Arc::new(t)
    }

    #[test]
    fn stack_fill_and_ring() {
        let mut s = FrameStack::new(5);
        s.push(frame(1));
        assert!(s.frames().all(|f| f.rgb(0, 0)[0] == 1));
        for v in 2..=6 {
            s.push(frame(v));
        }
        let order: Vec<u8> = s.frames().map(|f| f.rgb(0, 0)[0]).collect();
        assert_eq!(order, vec![2, 3, 4, 5, 6]);
        assert_eq!(s.stacked().len(), 5 * OBS_BYTES);
        assert_eq!(FrameStack::new(3).shape(), [3, 156, 156, 4]);
    }

    #[test]
    fn pixel_mapping_corners() {
        assert_eq!(pixel_of(0.0, 0.0, 50.0), (155, 0));
        assert_eq!(pixel_of(50.0, 50.0, 50.0), (0, 155));
        let (x, y) = pixel_center(0, 0, 50.0);
        assert_eq!(pixel_of(x, y, 50.0), (0, 0));
    }

    #[test]
    fn planes_round_trip() {
        let mut t = ObservationTensor::default();
        t.set_rgb(3, 4, [1, 2, 3]);
        t.set_mask(3, 4, 1);
        let back = ObservationTensor::from_planes(&t.rgb_bytes(), &t.mask_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn render_basics() {
        let config = WorldConfig { n_obstacles: 0, n_seekers: 2, n_hiders: 1, ..Default::default() };
        let agents = vec![
            AgentState::new(0, Role::Seeker, Vec2::new(2.0, 2.0), 0.0, 5.0),
            AgentState::new(1, Role::Seeker, Vec2::new(45.0, 45.0), 0.0, 5.0),
            AgentState::new(2, Role::Hider, Vec2::new(12.0, 2.0), 0.0, 8.0),
        ];
        let world = WorldState::from_parts(&config, Vec::new(), agents, 0);
        let mut seen = SeenGrid::new(world.occupancy.geom);
        seen.update(Vec2::new(2.0, 2.0), &[], 16.0);
        let t = render_seeker_obs(&world, 0, &seen, RenderOptions::default()).unwrap();
        assert_eq!(t.mask_sum(), 9);
        let (r, c) = pixel_of(12.0, 2.0, 50.0);
        assert_eq!(t.rgb(r, c), HIDER);
        let (r, c) = pixel_of(45.0, 45.0, 50.0);
        assert_eq!(t.rgb(r, c), SEEKER);
        let (r, c) = pixel_of(30.0, 30.0, 50.0);
        assert_eq!(t.rgb(r, c), UNKNOWN);
        let masked = render_seeker_obs(&world, 0, &seen, RenderOptions { mask_teammates: true }).unwrap();
        let (r, c) = pixel_of(45.0, 45.0, 50.0);
        assert_eq!(masked.rgb(r, c), UNKNOWN);
        assert_eq!(render_seeker_obs(&world, 2, &seen, RenderOptions::default()), Err(RenderError::UnknownSeeker(2)));
    }
}
