//! Static obstacle map: primitive shapes rasterized to an occupancy grid,
//! dilated by the robot radius, with the dilated region's exact boundary
//! available as closed contour polylines.
//!
//! All planner-facing queries run against the dilated grid, so "blocked"
//! always means "the robot center cannot be here". The contours trace cell
//! boundaries rather than cutting corners through cell midpoints; that
//! keeps the polyline region identical to the grid region, which the
//! segment query relies on: a segment is blocked exactly when an endpoint
//! is inside or the segment crosses a contour.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::geom::{segment_intersects, vec2, Segment2D, Vec2};
use thiserror::Error;

/// Grid resolution for obstacle rasterization.
pub const DEFAULT_CELL: f64 = 0.25;
/// Planner-side robot radius; obstacle dilation uses exactly this.
pub const ROBOT_RADIUS: f64 = 0.75;

#[derive(Debug, Error)]
pub enum StatMapError {
    #[error("obstacle file line {0}: {1}")]
    BadLine(usize, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Circle { center: Vec2, radius: f64 },
    Rect { min: Vec2, max: Vec2 },
}

impl Primitive {
    /// True when the primitive overlaps the axis-aligned cell with positive
    /// area; mere boundary contact does not rasterize.
    fn overlaps_cell(&self, lo: Vec2, hi: Vec2) -> bool {
        match *self {
            Primitive::Circle { center, radius } => {
                let cx = center.x.clamp(lo.x, hi.x);
                let cy = center.y.clamp(lo.y, hi.y);
                (vec2(cx, cy) - center).norm() < radius
            }
            Primitive::Rect { min, max } => {
                min.x < hi.x && max.x > lo.x && min.y < hi.y && max.y > lo.y
            }
        }
    }
}

/// Parse `circle cx cy r` / `rect xmin ymin xmax ymax` lines. Blank lines
/// and `#` comments allowed.
pub fn parse_obstacles(text: &str) -> Result<Vec<Primitive>, StatMapError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let kind = parts.next().unwrap();
        let nums: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let nums = nums.map_err(|e| StatMapError::BadLine(idx + 1, e.to_string()))?;
        match (kind, nums.as_slice()) {
            ("circle", &[cx, cy, r]) if r > 0.0 => out.push(Primitive::Circle {
                center: vec2(cx, cy),
                radius: r,
            }),
            ("rect", &[x0, y0, x1, y1]) if x0 < x1 && y0 < y1 => out.push(Primitive::Rect {
                min: vec2(x0, y0),
                max: vec2(x1, y1),
            }),
            ("circle", _) => {
                return Err(StatMapError::BadLine(
                    idx + 1,
                    "circle needs: cx cy r with r > 0".into(),
                ))
            }
            ("rect", _) => {
                return Err(StatMapError::BadLine(
                    idx + 1,
                    "rect needs: xmin ymin xmax ymax with min < max".into(),
                ))
            }
            _ => {
                return Err(StatMapError::BadLine(
                    idx + 1,
                    format!("unknown primitive {kind:?}"),
                ))
            }
        }
    }
    Ok(out)
}

pub fn obstacles_to_text(primitives: &[Primitive]) -> String {
    let mut out = String::new();
    for p in primitives {
        match *p {
            Primitive::Circle { center, radius } => {
                let _ = writeln!(out, "circle {} {} {}", center.x, center.y, radius);
            }
            Primitive::Rect { min, max } => {
                let _ = writeln!(out, "rect {} {} {} {}", min.x, min.y, max.x, max.y);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct StaticMap {
    origin: Vec2,
    cell: f64,
    rows: usize,
    cols: usize,
    occupied: Vec<bool>,
    dilated: Vec<bool>,
    dilation_radius: f64,
    contours: Vec<Vec<Vec2>>,
    /// Contour segments bucketed on a coarse grid for the segment query.
    seg_index: HashMap<(i32, i32), Vec<Segment2D>>,
    primitives: Vec<Primitive>,
}

const SEG_BUCKET: f64 = 4.0;

impl StaticMap {
    pub fn build(
        primitives: Vec<Primitive>,
        origin: Vec2,
        width: f64,
        height: f64,
        cell: f64,
        dilation_radius: f64,
    ) -> StaticMap {
        assert!(cell > 0.0 && width > 0.0 && height > 0.0 && dilation_radius >= 0.0);
        let cols = (width / cell).round() as usize;
        let rows = (height / cell).round() as usize;
        let mut occupied = vec![false; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let lo = origin + vec2(c as f64 * cell, r as f64 * cell);
                let hi = lo + vec2(cell, cell);
                if primitives.iter().any(|p| p.overlaps_cell(lo, hi)) {
                    occupied[r * cols + c] = true;
                }
            }
        }

        // Dilation: a cell is blocked when its center lies within the
        // radius of any occupied cell center.
        let reach = (dilation_radius / cell).floor() as i64;
        let mut offsets = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let d2 = ((dx * dx + dy * dy) as f64) * cell * cell;
                if d2 <= dilation_radius * dilation_radius + 1e-9 {
                    offsets.push((dx, dy));
                }
            }
        }
        let mut dilated = vec![false; rows * cols];
        for r in 0..rows as i64 {
            for c in 0..cols as i64 {
                if !occupied[r as usize * cols + c as usize] {
                    continue;
                }
                for &(dx, dy) in &offsets {
                    let (nr, nc) = (r + dy, c + dx);
                    if nr >= 0 && nr < rows as i64 && nc >= 0 && nc < cols as i64 {
                        dilated[nr as usize * cols + nc as usize] = true;
                    }
                }
            }
        }

        let contours = trace_contours(&dilated, rows, cols, origin, cell);
        let mut seg_index: HashMap<(i32, i32), Vec<Segment2D>> = HashMap::new();
        for poly in &contours {
            for w in poly.windows(2) {
                let seg = Segment2D { a: w[0], b: w[1] };
                let (bx0, bx1) = bucket_range(seg.a.x, seg.b.x);
                let (by0, by1) = bucket_range(seg.a.y, seg.b.y);
                for bx in bx0..=bx1 {
                    for by in by0..=by1 {
                        seg_index.entry((bx, by)).or_default().push(seg);
                    }
                }
            }
        }

        StaticMap {
            origin,
            cell,
            rows,
            cols,
            occupied,
            dilated,
            dilation_radius,
            contours,
            seg_index,
            primitives,
        }
    }

    pub fn from_text(
        text: &str,
        origin: Vec2,
        width: f64,
        height: f64,
    ) -> Result<StaticMap, StatMapError> {
        Ok(StaticMap::build(
            parse_obstacles(text)?,
            origin,
            width,
            height,
            DEFAULT_CELL,
            ROBOT_RADIUS,
        ))
    }

    pub fn load(path: &Path, origin: Vec2, width: f64, height: f64) -> Result<StaticMap, StatMapError> {
        StaticMap::from_text(&std::fs::read_to_string(path)?, origin, width, height)
    }

    pub fn save(&self, path: &Path) -> Result<(), StatMapError> {
        Ok(std::fs::write(path, obstacles_to_text(&self.primitives))?)
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn dilation_radius(&self) -> f64 {
        self.dilation_radius
    }

    /// Closed polylines (first point repeated last) bounding the dilated
    /// region exactly.
    pub fn contours(&self) -> &[Vec<Vec2>] {
        &self.contours
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let gx = ((p.x - self.origin.x) / self.cell).floor();
        let gy = ((p.y - self.origin.y) / self.cell).floor();
        if gx < 0.0 || gy < 0.0 || gx >= self.cols as f64 || gy >= self.rows as f64 {
            return None;
        }
        Some((gy as usize, gx as usize))
    }

    /// True when `p` is inside the dilated occupied region. Points outside
    /// the mapped extent are reported free.
    pub fn point_blocked(&self, p: Vec2) -> bool {
        match self.cell_of(p) {
            Some((r, c)) => self.dilated[r * self.cols + c],
            None => false,
        }
    }

    /// Occupancy before dilation, for tests and rendering.
    pub fn point_occupied_raw(&self, p: Vec2) -> bool {
        match self.cell_of(p) {
            Some((r, c)) => self.occupied[r * self.cols + c],
            None => false,
        }
    }

    /// True when the segment touches the dilated region: an endpoint
    /// inside, or any contour crossing.
    pub fn segment_blocked(&self, s: Segment2D) -> bool {
        if self.point_blocked(s.a) || self.point_blocked(s.b) {
            return true;
        }
        let (bx0, bx1) = bucket_range(s.a.x, s.b.x);
        let (by0, by1) = bucket_range(s.a.y, s.b.y);
        for bx in bx0..=bx1 {
            for by in by0..=by1 {
                if let Some(segs) = self.seg_index.get(&(bx, by)) {
                    if segs.iter().any(|c| segment_intersects(s, *c)) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Contour segments within `range` of `p`, nearest first. A segment
    /// spanning several buckets is reported once; ties order on raw
    /// endpoint coordinates so the result is reproducible.
    pub fn segments_near(&self, p: Vec2, range: f64) -> Vec<Segment2D> {
        let (bx0, bx1) = bucket_range(p.x - range, p.x + range);
        let (by0, by1) = bucket_range(p.y - range, p.y + range);
        let mut found: Vec<(f64, Segment2D)> = Vec::new();
        for bx in bx0..=bx1 {
            for by in by0..=by1 {
                if let Some(segs) = self.seg_index.get(&(bx, by)) {
                    for s in segs {
                        let d = s.dist_to_point(p);
                        if d <= range {
                            found.push((d, *s));
                        }
                    }
                }
            }
        }
        found.sort_by(|x, y| {
            x.0.total_cmp(&y.0)
                .then(x.1.a.x.total_cmp(&y.1.a.x))
                .then(x.1.a.y.total_cmp(&y.1.a.y))
                .then(x.1.b.x.total_cmp(&y.1.b.x))
                .then(x.1.b.y.total_cmp(&y.1.b.y))
        });
        found.dedup_by(|x, y| x.1.a == y.1.a && x.1.b == y.1.b);
        found.into_iter().map(|(_, s)| s).collect()
    }

    /// Sampled collision check for a path polyline: every consecutive
    /// sub-segment must be free.
    pub fn polyline_blocked(&self, points: &[Vec2]) -> bool {
        if points.len() == 1 {
            return self.point_blocked(points[0]);
        }
        points
            .windows(2)
            .any(|w| self.segment_blocked(Segment2D { a: w[0], b: w[1] }))
    }
}

fn bucket_range(a: f64, b: f64) -> (i32, i32) {
    let lo = (a.min(b) / SEG_BUCKET).floor() as i32;
    let hi = (a.max(b) / SEG_BUCKET).floor() as i32;
    (lo, hi)
}

/// Walk the boundary between blocked and free cells. Directed edges keep
/// the blocked region on the left, so outer contours come out
/// counterclockwise and holes clockwise; loops are closed by repeating the
/// first vertex. Corner-touching cells (checkerboard vertices) are split
/// by always taking the leftmost turn, which keeps each loop simple.
fn trace_contours(
    blocked: &[bool],
    rows: usize,
    cols: usize,
    origin: Vec2,
    cell: f64,
) -> Vec<Vec<Vec2>> {
    let at = |r: i64, c: i64| -> bool {
        r >= 0 && c >= 0 && r < rows as i64 && c < cols as i64 && blocked[r as usize * cols + c as usize]
    };
    // Directed edges on the corner lattice, interior on the left.
    let mut edges: Vec<((i64, i64), (i64, i64))> = Vec::new();
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            if !at(r, c) {
                continue;
            }
            if !at(r - 1, c) {
                edges.push(((c, r), (c + 1, r)));
            }
            if !at(r, c + 1) {
                edges.push(((c + 1, r), (c + 1, r + 1)));
            }
            if !at(r + 1, c) {
                edges.push(((c + 1, r + 1), (c, r + 1)));
            }
            if !at(r, c - 1) {
                edges.push(((c, r + 1), (c, r)));
            }
        }
    }
    let mut by_start: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        by_start.entry(e.0).or_default().push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut contours = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut loop_pts: Vec<(i64, i64)> = vec![edges[start].0];
        let mut cur = start;
        loop {
            used[cur] = true;
            let (from, to) = edges[cur];
            loop_pts.push(to);
            if to == edges[start].0 {
                break;
            }
            let din = (to.0 - from.0, to.1 - from.1);
            let candidates = &by_start[&to];
            // Leftmost available turn: cross(din, dout) descending, then
            // straight ahead beats right turns via the dot product.
            let next = candidates
                .iter()
                .copied()
                .filter(|&i| !used[i])
                .max_by_key(|&i| {
                    let e = edges[i];
                    let dout = (e.1 .0 - e.0 .0, e.1 .1 - e.0 .1);
                    let cross = din.0 * dout.1 - din.1 * dout.0;
                    let dot = din.0 * dout.0 + din.1 * dout.1;
                    2 * cross + dot
                })
                .expect("boundary walk hit a dead end; edge set is inconsistent");
            cur = next;
        }
        // Merge collinear runs; the loop is closed so wrap the comparison.
        let mut merged: Vec<(i64, i64)> = Vec::with_capacity(loop_pts.len());
        let n = loop_pts.len() - 1; // last repeats first
        for i in 0..n {
            let prev = loop_pts[(i + n - 1) % n];
            let here = loop_pts[i];
            let next = loop_pts[i + 1];
            let d0 = (here.0 - prev.0, here.1 - prev.1);
            let d1 = (next.0 - here.0, next.1 - here.1);
            if d0.0 * d1.1 - d0.1 * d1.0 != 0 || d0.0 * d1.0 + d0.1 * d1.1 <= 0 {
                merged.push(here);
            }
        }
        merged.push(merged[0]);
        contours.push(
            merged
                .into_iter()
                .map(|(ix, iy)| origin + vec2(ix as f64 * cell, iy as f64 * cell))
                .collect(),
        );
    }
    contours
}
