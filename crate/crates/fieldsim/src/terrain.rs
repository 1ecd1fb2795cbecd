//! Terrain elevation, the energy cost of motion, and battery accounting.
//!
//! Elevation lives on a regular grid with bilinear interpolation between
//! samples. Moving over it costs energy through a three-term grade model:
//! a flat-ground term per meter, an uphill term charged on positive grade
//! only, and a rolling term charged on grade magnitude in both directions.
//! The uphill term is what makes travel costs directional, which is the
//! reason mission planning solves an asymmetric tour later on.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::geom::Vec2;
use crate::rngutil;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("point ({0:.2}, {1:.2}) is outside the heightmap extent")]
    OutOfBounds(f64, f64),
    #[error("heightmap file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Regular elevation grid. Sample (r, c) sits at
/// `origin + (c * cell_size, r * cell_size)`; row index grows northward.
/// The on-disk format lists rows north to south, the usual grid-file order,
/// so the reader and writer flip row order at the boundary.
#[derive(Debug, Clone)]
pub struct Heightmap {
    pub origin: Vec2,
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows * cols` entries, row 0 southernmost.
    pub elevation: Vec<f64>,
}

impl Heightmap {
    pub fn new(origin: Vec2, cell_size: f64, rows: usize, cols: usize, elevation: Vec<f64>) -> Heightmap {
        assert!(cell_size > 0.0, "cell_size must be positive");
        assert!(rows >= 2 && cols >= 2, "need at least a 2x2 grid");
        assert_eq!(elevation.len(), rows * cols);
        assert!(
            elevation.iter().all(|e| e.is_finite()),
            "elevations must be finite"
        );
        Heightmap {
            origin,
            cell_size,
            rows,
            cols,
            elevation,
        }
    }

    /// A flat map at elevation zero covering `width x height` meters.
    pub fn flat(origin: Vec2, cell_size: f64, width: f64, height: f64) -> Heightmap {
        let cols = (width / cell_size).ceil() as usize + 1;
        let rows = (height / cell_size).ceil() as usize + 1;
        Heightmap::new(origin, cell_size, rows, cols, vec![0.0; rows * cols])
    }

    /// Smooth random terrain: two octaves of value noise, lattice values
    /// interpolated with a smoothstep ramp, scaled so the result stays
    /// within `amplitude` meters of zero.
    pub fn value_noise(
        origin: Vec2,
        cell_size: f64,
        rows: usize,
        cols: usize,
        amplitude: f64,
        seed: u64,
    ) -> Heightmap {
        let extent_x = (cols - 1) as f64 * cell_size;
        let extent_y = (rows - 1) as f64 * cell_size;
        // Octave lattice spacings relative to the extent; the second octave
        // carries half the weight of the first.
        let octaves = [
            (extent_x.max(extent_y) / 5.0, 2.0 / 3.0),
            (extent_x.max(extent_y) / 10.0, 1.0 / 3.0),
        ];
        let mut elevation = vec![0.0; rows * cols];
        for (oct, &(spacing, weight)) in octaves.iter().enumerate() {
            let nx = (extent_x / spacing).ceil() as usize + 2;
            let ny = (extent_y / spacing).ceil() as usize + 2;
            let mut rng = rngutil::stream(seed, &format!("terrain-octave-{oct}"));
            let lattice: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
            for r in 0..rows {
                for c in 0..cols {
                    let px = c as f64 * cell_size / spacing;
                    let py = r as f64 * cell_size / spacing;
                    let (ix, iy) = (px.floor() as usize, py.floor() as usize);
                    let (fx, fy) = (smooth(px - ix as f64), smooth(py - iy as f64));
                    let at = |x: usize, y: usize| lattice[y * nx + x];
                    let v = at(ix, iy) * (1.0 - fx) * (1.0 - fy)
                        + at(ix + 1, iy) * fx * (1.0 - fy)
                        + at(ix, iy + 1) * (1.0 - fx) * fy
                        + at(ix + 1, iy + 1) * fx * fy;
                    elevation[r * cols + c] += amplitude * weight * v;
                }
            }
        }
        Heightmap::new(origin, cell_size, rows, cols, elevation)
    }

    pub fn extent(&self) -> (Vec2, Vec2) {
        (
            self.origin,
            Vec2 {
                x: self.origin.x + (self.cols - 1) as f64 * self.cell_size,
                y: self.origin.y + (self.rows - 1) as f64 * self.cell_size,
            },
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (lo, hi) = self.extent();
        p.x >= lo.x - 1e-9 && p.x <= hi.x + 1e-9 && p.y >= lo.y - 1e-9 && p.y <= hi.y + 1e-9
    }

    /// Bilinear elevation. Errors outside the extent.
    pub fn elevation_at(&self, p: Vec2) -> Result<f64, TerrainError> {
        if !self.contains(p) {
            return Err(TerrainError::OutOfBounds(p.x, p.y));
        }
        let gx = ((p.x - self.origin.x) / self.cell_size).clamp(0.0, (self.cols - 1) as f64);
        let gy = ((p.y - self.origin.y) / self.cell_size).clamp(0.0, (self.rows - 1) as f64);
        let c = (gx.floor() as usize).min(self.cols - 2);
        let r = (gy.floor() as usize).min(self.rows - 2);
        let fx = gx - c as f64;
        let fy = gy - r as f64;
        let at = |rr: usize, cc: usize| self.elevation[rr * self.cols + cc];
        Ok(at(r, c) * (1.0 - fx) * (1.0 - fy)
            + at(r, c + 1) * fx * (1.0 - fy)
            + at(r + 1, c) * (1.0 - fx) * fy
            + at(r + 1, c + 1) * fx * fy)
    }

    /// Plain-text grid file: `ncols`, `nrows`, `xllcorner`, `yllcorner`,
    /// `cellsize` headers, then one line per row, north first.
    pub fn to_grid_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ncols {}", self.cols);
        let _ = writeln!(out, "nrows {}", self.rows);
        let _ = writeln!(out, "xllcorner {}", self.origin.x);
        let _ = writeln!(out, "yllcorner {}", self.origin.y);
        let _ = writeln!(out, "cellsize {}", self.cell_size);
        for r in (0..self.rows).rev() {
            let row: Vec<String> = (0..self.cols)
                .map(|c| format!("{}", self.elevation[r * self.cols + c]))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_grid_text(text: &str) -> Result<Heightmap, TerrainError> {
        let mut tokens = text.split_whitespace();
        let mut header = |name: &str| -> Result<f64, TerrainError> {
            let key = tokens
                .next()
                .ok_or_else(|| TerrainError::BadFile(format!("missing header {name}")))?;
            if !key.eq_ignore_ascii_case(name) {
                return Err(TerrainError::BadFile(format!(
                    "expected header {name}, found {key}"
                )));
            }
            tokens
                .next()
                .ok_or_else(|| TerrainError::BadFile(format!("missing value for {name}")))?
                .parse::<f64>()
                .map_err(|e| TerrainError::BadFile(format!("bad {name}: {e}")))
        };
        let cols = header("ncols")? as usize;
        let rows = header("nrows")? as usize;
        let x0 = header("xllcorner")?;
        let y0 = header("yllcorner")?;
        let cell = header("cellsize")?;
        if rows < 2 || cols < 2 {
            return Err(TerrainError::BadFile("grid smaller than 2x2".into()));
        }
        let mut elevation = vec![0.0; rows * cols];
        for r in (0..rows).rev() {
            for c in 0..cols {
                let tok = tokens.next().ok_or_else(|| {
                    TerrainError::BadFile(format!("short elevation data at row {r} col {c}"))
                })?;
                elevation[r * cols + c] = tok
                    .parse::<f64>()
                    .map_err(|e| TerrainError::BadFile(format!("bad elevation: {e}")))?;
            }
        }
        if tokens.next().is_some() {
            return Err(TerrainError::BadFile("trailing data after grid".into()));
        }
        Ok(Heightmap::new(
            Vec2 { x: x0, y: y0 },
            cell,
            rows,
            cols,
            elevation,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), TerrainError> {
        Ok(std::fs::write(path, self.to_grid_text())?)
    }

    pub fn load(path: &Path) -> Result<Heightmap, TerrainError> {
        Heightmap::from_grid_text(&std::fs::read_to_string(path)?)
    }
}

/// Energy cost of motion. `p_up` is charged per unit of positive grade
/// only; `p_roll` per unit of grade magnitude in both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    /// J per meter on flat ground.
    pub p_flat: f64,
    /// J per meter per unit uphill grade.
    pub p_up: f64,
    /// J per meter per unit grade magnitude.
    pub p_roll: f64,
    /// J.
    pub battery_capacity: f64,
    /// J per second while docked at the recharge station.
    pub recharge_rate: f64,
}

impl Default for EnergyModel {
    fn default() -> EnergyModel {
        EnergyModel {
            p_flat: 30.0,
            p_up: 400.0,
            p_roll: 60.0,
            battery_capacity: 250_000.0,
            recharge_rate: 500.0,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p_flat > 0.0) {
            return Err("p_flat must be positive".into());
        }
        for (name, v) in [
            ("p_up", self.p_up),
            ("p_roll", self.p_roll),
            ("battery_capacity", self.battery_capacity),
            ("recharge_rate", self.recharge_rate),
        ] {
            if !(v >= 0.0) {
                return Err(format!("{name} must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Energy to traverse `polyline` over `map`:
/// sum of `ds * (p_flat + p_up * max(0, grade) + p_roll * |grade|)` with
/// `grade` the elevation change per meter of horizontal travel.
pub fn edge_energy(
    model: &EnergyModel,
    map: &Heightmap,
    polyline: &[Vec2],
) -> Result<f64, TerrainError> {
    assert!(polyline.len() >= 2, "edge_energy needs at least two points");
    let mut total = 0.0;
    let mut prev = polyline[0];
    let mut prev_e = map.elevation_at(prev)?;
    for &p in &polyline[1..] {
        let e = map.elevation_at(p)?;
        let ds = prev.dist(p);
        if ds > 0.0 {
            let grade = (e - prev_e) / ds;
            total += ds * (model.p_flat + model.p_up * grade.max(0.0) + model.p_roll * grade.abs());
        }
        prev = p;
        prev_e = e;
    }
    Ok(total)
}

/// Charge state. Level stays in `[0, capacity]`; draining past empty is a
/// planner bug, not a runtime condition, so it panics.
#[derive(Debug, Clone, Copy)]
pub struct Battery {
    level: f64,
    capacity: f64,
}

impl Battery {
    pub fn full(capacity: f64) -> Battery {
        assert!(capacity > 0.0);
        Battery {
            level: capacity,
            capacity,
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn fraction(&self) -> f64 {
        self.level / self.capacity
    }

    pub fn drain(&mut self, joules: f64) {
        assert!(joules >= 0.0);
        assert!(
            self.level - joules > -1e-6,
            "battery drained below empty: level {} J, draw {} J",
            self.level,
            joules
        );
        self.level = (self.level - joules).max(0.0);
    }

    pub fn recharge(&mut self, joules: f64) {
        assert!(joules >= 0.0);
        self.level = (self.level + joules).min(self.capacity);
    }
}
