//! Road lattice: cell flags, the ASCII raster format, the synthetic street
//! generator and the spatial queries agents rely on.
//!
//! Raster characters: `.` non-road, `#` road, `+` intersection (implies road).
//! Lines starting with `!` are comments. The top row is `y = 0`.

use std::fmt;

use rand::Rng;
use thiserror::Error;

/// Minimum number of intersections a grid needs to host riders.
pub const MIN_INTERSECTIONS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid document contains no raster rows")]
    EmptyDocument,
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown character {ch:?} at row {row}, column {col}")]
    UnknownCharacter { row: usize, col: usize, ch: char },
    #[error("grid has {found} intersections, at least {MIN_INTERSECTIONS} are required")]
    TooFewIntersections { found: usize },
    #[error("street spacing must be at least 2, got {spacing}")]
    InvalidSpacing { spacing: usize },
    #[error("a {width}x{height} grid is too small for spacing {spacing} (need at least spacing + 1 per side)")]
    GridTooSmall {
        width: usize,
        height: usize,
        spacing: usize,
    },
    #[error("grid has no intersections")]
    NoIntersections,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellFlags {
    pub road: bool,
    pub intersection: bool,
}

impl CellFlags {
    const NONE: CellFlags = CellFlags {
        road: false,
        intersection: false,
    };
    const ROAD: CellFlags = CellFlags {
        road: true,
        intersection: false,
    };
    const INTERSECTION: CellFlags = CellFlags {
        road: true,
        intersection: true,
    };

    fn from_char(ch: char) -> Option<CellFlags> {
        match ch {
            '.' => Some(Self::NONE),
            '#' => Some(Self::ROAD),
            '+' => Some(Self::INTERSECTION),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match (self.road, self.intersection) {
            (_, true) => '+',
            (true, false) => '#',
            (false, false) => '.',
        }
    }
}

/// A continuous point in cell units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    /// Center point of cell `(cx, cy)`.
    pub fn cell_center(cx: usize, cy: usize) -> Self {
        Position::new(cx as f64 + 0.5, cy as f64 + 0.5)
    }

    pub fn cell(self) -> (i64, i64) {
        (self.x.floor() as i64, self.y.floor() as i64)
    }

    pub fn distance_sq(self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Position) -> f64 {
        self.distance_sq(other).sqrt()
    }

    /// Heading pointing from `self` towards `target`.
    pub fn bearing_to(self, target: Position) -> Heading {
        Heading::new((target.y - self.y).atan2(target.x - self.x).to_degrees())
    }

    pub fn advanced(self, heading: Heading, distance: f64) -> Position {
        let (dx, dy) = heading.unit();
        Position::new(self.x + dx * distance, self.y + dy * distance)
    }
}

/// Direction in degrees, `0` east, counter-clockwise, always in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Heading(f64);

impl Heading {
    pub fn new(degrees: f64) -> Self {
        let mut d = degrees.rem_euclid(360.0);
        // rem_euclid can return exactly 360.0 for tiny negative inputs
        if d >= 360.0 {
            d = 0.0;
        }
        Heading(d)
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn rotated(self, degrees: f64) -> Heading {
        Heading::new(self.0 + degrees)
    }

    pub fn unit(self) -> (f64, f64) {
        let r = self.0.to_radians();
        (r.cos(), r.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoadGrid {
    width: usize,
    height: usize,
    cells: Vec<CellFlags>,
    intersections: Vec<(usize, usize)>,
}

impl RoadGrid {
    fn from_cells(width: usize, height: usize, cells: Vec<CellFlags>) -> Self {
        debug_assert_eq!(cells.len(), width * height);
        let intersections = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.intersection)
            .map(|(i, _)| (i % width, i / width))
            .collect();
        RoadGrid {
            width,
            height,
            cells,
            intersections,
        }
    }

    /// Parses a raster document. Rejects grids with fewer than two
    /// intersections since riders need distinct origins and destinations.
    pub fn load(document: &str) -> Result<Self, GridError> {
        let grid = Self::parse_raster(document)?;
        if grid.intersections.len() < MIN_INTERSECTIONS {
            return Err(GridError::TooFewIntersections {
                found: grid.intersections.len(),
            });
        }
        Ok(grid)
    }

    /// Parses a raster without the simulation-readiness check.
    pub fn parse_raster(document: &str) -> Result<Self, GridError> {
        let mut width = None;
        let mut cells = Vec::new();
        let mut height = 0;
        let mut lines: Vec<&str> = document.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        for line in lines {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.starts_with('!') {
                continue;
            }
            let row = height;
            let mut count = 0;
            for (col, ch) in line.chars().enumerate() {
                let flags =
                    CellFlags::from_char(ch).ok_or(GridError::UnknownCharacter { row, col, ch })?;
                cells.push(flags);
                count += 1;
            }
            match width {
                None => width = Some(count),
                Some(expected) if expected != count => {
                    return Err(GridError::RaggedRows {
                        row,
                        expected,
                        found: count,
                    })
                }
                Some(_) => {}
            }
            height += 1;
        }
        match width {
            None | Some(0) => Err(GridError::EmptyDocument),
            Some(width) => Ok(Self::from_cells(width, height, cells)),
        }
    }

    /// Street lattice with roads on every row and column whose index is a
    /// multiple of `spacing`, intersections where they cross.
    pub fn street_grid(width: usize, height: usize, spacing: usize) -> Result<Self, GridError> {
        if spacing < 2 {
            return Err(GridError::InvalidSpacing { spacing });
        }
        if width < spacing + 1 || height < spacing + 1 {
            return Err(GridError::GridTooSmall {
                width,
                height,
                spacing,
            });
        }
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let on_col = x % spacing == 0;
                let on_row = y % spacing == 0;
                cells.push(match (on_col, on_row) {
                    (true, true) => CellFlags::INTERSECTION,
                    (true, false) | (false, true) => CellFlags::ROAD,
                    (false, false) => CellFlags::NONE,
                });
            }
        }
        Ok(Self::from_cells(width, height, cells))
    }

    /// Every cell a road, with an intersection wherever both coordinates are
    /// multiples of `spacing`. Handy for obstacle-free movement checks.
    pub fn open_field(width: usize, height: usize, spacing: usize) -> Self {
        let spacing = spacing.max(1);
        let cells = (0..width * height)
            .map(|i| {
                if (i % width).is_multiple_of(spacing) && (i / width).is_multiple_of(spacing) {
                    CellFlags::INTERSECTION
                } else {
                    CellFlags::ROAD
                }
            })
            .collect();
        Self::from_cells(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Intersection cells in row-major order.
    pub fn intersections(&self) -> &[(usize, usize)] {
        &self.intersections
    }

    pub fn road_cell_count(&self) -> usize {
        self.cells.iter().filter(|c| c.road).count()
    }

    pub fn flags(&self, x: i64, y: i64) -> Option<CellFlags> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return None;
        }
        Some(self.cells[y as usize * self.width + x as usize])
    }

    pub fn is_road(&self, x: i64, y: i64) -> bool {
        self.flags(x, y).is_some_and(|c| c.road)
    }

    pub fn is_intersection(&self, x: i64, y: i64) -> bool {
        self.flags(x, y).is_some_and(|c| c.intersection)
    }

    pub fn is_road_at(&self, pos: Position) -> bool {
        let (x, y) = pos.cell();
        self.is_road(x, y)
    }

    /// Whether the cell one cell-unit ahead along `heading` is an in-bounds
    /// road cell. The probe distance does not depend on step length.
    pub fn cell_ahead_is_road(&self, pos: Position, heading: Heading) -> bool {
        self.is_road_at(pos.advanced(heading, 1.0))
    }

    /// Center of a uniformly chosen intersection. Consumes one draw.
    pub fn random_intersection<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Position, GridError> {
        if self.intersections.is_empty() {
            return Err(GridError::NoIntersections);
        }
        let (x, y) = self.intersections[rng.random_range(0..self.intersections.len())];
        Ok(Position::cell_center(x, y))
    }

    /// Canonical raster: one line per row, `\n` terminated, no comments.
    pub fn to_document(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|c| c.to_char()));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for RoadGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_document())
    }
}

/// Candidate with the smallest Euclidean distance to `origin` that lies
/// within `radius`, ties going to the lowest id.
pub fn nearest_agent<I: Ord + Copy>(
    origin: Position,
    candidates: &[(I, Position)],
    radius: f64,
) -> Option<(I, Position)> {
    let limit = radius * radius;
    let mut best: Option<(f64, I, Position)> = None;
    for &(id, pos) in candidates {
        let d = origin.distance_sq(pos);
        if d > limit {
            continue;
        }
        let better = match best {
            None => true,
            Some((bd, bid, _)) => d < bd || (d == bd && id < bid),
        };
        if better {
            best = Some((d, id, pos));
        }
    }
    best.map(|(_, id, pos)| (id, pos))
}

/// Uniform-bucket index over a fixed point set. `nearest` returns exactly
/// what [`nearest_agent`] returns on the filtered candidate set.
#[derive(Debug, Clone)]
pub struct SpatialIndex<I> {
    bucket: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<(I, Position)>>,
}

impl<I: Ord + Copy> SpatialIndex<I> {
    pub fn new(width: usize, height: usize, bucket: f64, items: &[(I, Position)]) -> Self {
        let bucket = bucket.max(1.0);
        let cols = ((width as f64 / bucket).ceil() as usize).max(1);
        let rows = ((height as f64 / bucket).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); cols * rows];
        let mut index = SpatialIndex {
            bucket,
            cols,
            rows,
            buckets: Vec::new(),
        };
        for &(id, pos) in items {
            let (c, r) = index.bucket_of(pos);
            buckets[r * cols + c].push((id, pos));
        }
        index.buckets = buckets;
        index
    }

    fn bucket_of(&self, pos: Position) -> (usize, usize) {
        let c = ((pos.x / self.bucket).floor().max(0.0) as usize).min(self.cols - 1);
        let r = ((pos.y / self.bucket).floor().max(0.0) as usize).min(self.rows - 1);
        (c, r)
    }

    pub fn nearest(&self, origin: Position, radius: f64) -> Option<(I, Position)> {
        self.nearest_where(origin, radius, |_| true)
    }

    /// Nearest candidate accepted by `keep`.
    pub fn nearest_where<F>(&self, origin: Position, radius: f64, keep: F) -> Option<(I, Position)>
    where
        F: Fn(I) -> bool,
    {
        let limit = radius * radius;
        let lo_c = ((origin.x - radius) / self.bucket).floor().max(0.0) as usize;
        let lo_r = ((origin.y - radius) / self.bucket).floor().max(0.0) as usize;
        let hi_c = (((origin.x + radius) / self.bucket).floor().max(0.0) as usize).min(self.cols - 1);
        let hi_r = (((origin.y + radius) / self.bucket).floor().max(0.0) as usize).min(self.rows - 1);
        let mut best: Option<(f64, I, Position)> = None;
        for r in lo_r..=hi_r {
            for c in lo_c..=hi_c {
                for &(id, pos) in &self.buckets[r * self.cols + c] {
                    let d = origin.distance_sq(pos);
                    if d > limit || !keep(id) {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bd, bid, _)) => d < bd || (d == bd && id < bid),
                    };
                    if better {
                        best = Some((d, id, pos));
                    }
                }
            }
        }
        best.map(|(_, id, pos)| (id, pos))
    }
}
