//! Ground models the walker steps on.
//!
//! Terrain is queried at world coordinates for two things: the ground
//! height under a foothold and whether a foothold may land there at all
//! (stepping stones have gaps). Procedural terrain derives both from a
//! per-cell hash so episodes are reproducible from a single seed without
//! storing anything.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which family of ground an environment samples at each reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainKind {
    /// Height zero everywhere, every foothold admissible.
    Flat,
    /// Per-cell uniform heights, every foothold admissible.
    RandomHeight,
    /// Per-cell uniform heights with a fraction of cells removed.
    SteppingStones,
}

const FORMAT_HEADER: &str = "deepq-stepper-terrain";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TerrainFileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing or malformed header (expected '{FORMAT_HEADER} v{FORMAT_VERSION}')")]
    BadHeader,
    #[error("unsupported terrain format version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed field on line {line}: {what}")]
    BadField { line: usize, what: &'static str },
    #[error("expected {expected} cells, found {found}")]
    WrongCellCount { expected: usize, found: usize },
}

/// Hash-based procedural terrain: an infinite grid of square cells, each
/// with an independent uniform height in `[-height_range, height_range]`
/// and an independent admissibility draw against `stone_density`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProceduralTerrain {
    pub seed: u64,
    pub cell_size: f64,
    pub height_range: f64,
    /// Probability that a cell is admissible; 1.0 makes solid ground.
    pub stone_density: f64,
}

impl ProceduralTerrain {
    fn cell_hash(&self, x: f64, y: f64) -> u64 {
        let ix = (x / self.cell_size).floor() as i64 as u64;
        let iy = (y / self.cell_size).floor() as i64 as u64;
        let mut h = splitmix64(self.seed ^ 0x7465727261696e);
        h = splitmix64(h ^ ix);
        h = splitmix64(h ^ iy);
        h
    }

    fn height(&self, x: f64, y: f64) -> f64 {
        let u = to_unit(splitmix64(self.cell_hash(x, y) ^ 1));
        (2.0 * u - 1.0) * self.height_range
    }

    fn admissible(&self, x: f64, y: f64) -> bool {
        to_unit(splitmix64(self.cell_hash(x, y) ^ 2)) < self.stone_density
    }
}

/// Explicit rectangular height field loaded from a terrain file. Cells
/// outside the stored extent are flat ground at height zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTerrain {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `heights[j * nx + i]`; holes store height 0.
    pub heights: Vec<f64>,
    pub admissible: Vec<bool>,
}

impl GridTerrain {
    fn cell_index(&self, x: f64, y: f64) -> Option<usize> {
        let i = ((x - self.origin_x) / self.cell_size).floor();
        let j = ((y - self.origin_y) / self.cell_size).floor();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some(j as usize * self.nx + i as usize)
    }

    fn height(&self, x: f64, y: f64) -> f64 {
        self.cell_index(x, y).map_or(0.0, |k| self.heights[k])
    }

    fn is_admissible(&self, x: f64, y: f64) -> bool {
        self.cell_index(x, y).map_or(true, |k| self.admissible[k])
    }

    /// The same terrain reflected across the x-z plane (y negated), used to
    /// check that the stepping dynamics commute with mirroring.
    pub fn mirrored_y(&self) -> GridTerrain {
        let mut heights = vec![0.0; self.heights.len()];
        let mut admissible = vec![true; self.admissible.len()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let src = j * self.nx + i;
                let dst = (self.ny - 1 - j) * self.nx + i;
                heights[dst] = self.heights[src];
                admissible[dst] = self.admissible[src];
            }
        }
        GridTerrain {
            origin_x: self.origin_x,
            origin_y: -(self.origin_y + self.ny as f64 * self.cell_size),
            cell_size: self.cell_size,
            nx: self.nx,
            ny: self.ny,
            heights,
            admissible,
        }
    }

    /// Reads the versioned text format produced by [`GridTerrain::write`]:
    ///
    /// ```text
    /// deepq-stepper-terrain v1
    /// origin <x> <y>
    /// cell <size>
    /// dims <nx> <ny>
    /// <ny rows of nx tokens: a height in meters, or `_` for a hole>
    /// ```
    ///
    /// Rows run south to north (increasing y); `#`-prefixed lines and blank
    /// lines between rows are ignored.
    pub fn read(reader: impl BufRead) -> Result<GridTerrain, TerrainFileError> {
        let mut lines = reader
            .lines()
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .enumerate()
            .filter(|(_, l)| !(l.trim().is_empty() || l.trim_start().starts_with('#')));
        let (_, header) = lines.next().ok_or(TerrainFileError::BadHeader)?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(FORMAT_HEADER) {
            return Err(TerrainFileError::BadHeader);
        }
        let version = parts
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or(TerrainFileError::BadHeader)?;
        if version != FORMAT_VERSION {
            return Err(TerrainFileError::UnsupportedVersion(version));
        }
        let mut field = |name: &'static str| -> Result<(usize, Vec<String>), TerrainFileError> {
            let (lineno, line) = lines.next().ok_or(TerrainFileError::BadField {
                line: 0,
                what: name,
            })?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(TerrainFileError::BadField {
                    line: lineno + 1,
                    what: name,
                });
            }
            Ok((lineno + 1, parts.map(str::to_owned).collect()))
        };
        let parse_f64 = |s: &str, line: usize| {
            s.parse::<f64>().map_err(|_| TerrainFileError::BadField {
                line,
                what: "number",
            })
        };
        let (l, origin) = field("origin")?;
        if origin.len() != 2 {
            return Err(TerrainFileError::BadField { line: l, what: "origin" });
        }
        let origin_x = parse_f64(&origin[0], l)?;
        let origin_y = parse_f64(&origin[1], l)?;
        let (l, cell) = field("cell")?;
        if cell.len() != 1 {
            return Err(TerrainFileError::BadField { line: l, what: "cell" });
        }
        let cell_size = parse_f64(&cell[0], l)?;
        if !(cell_size > 0.0) {
            return Err(TerrainFileError::BadField { line: l, what: "cell" });
        }
        let (l, dims) = field("dims")?;
        if dims.len() != 2 {
            return Err(TerrainFileError::BadField { line: l, what: "dims" });
        }
        let nx = dims[0]
            .parse::<usize>()
            .map_err(|_| TerrainFileError::BadField { line: l, what: "dims" })?;
        let ny = dims[1]
            .parse::<usize>()
            .map_err(|_| TerrainFileError::BadField { line: l, what: "dims" })?;
        if nx == 0 || ny == 0 {
            return Err(TerrainFileError::BadField { line: l, what: "dims" });
        }
        let mut heights = Vec::with_capacity(nx * ny);
        let mut admissible = Vec::with_capacity(nx * ny);
        for (lineno, line) in lines {
            for tok in line.split_whitespace() {
                if tok == "_" {
                    heights.push(0.0);
                    admissible.push(false);
                } else {
                    heights.push(parse_f64(tok, lineno + 1)?);
                    admissible.push(true);
                }
            }
        }
        if heights.len() != nx * ny {
            return Err(TerrainFileError::WrongCellCount {
                expected: nx * ny,
                found: heights.len(),
            });
        }
        Ok(GridTerrain {
            origin_x,
            origin_y,
            cell_size,
            nx,
            ny,
            heights,
            admissible,
        })
    }

    pub fn write(&self, mut writer: impl Write) -> Result<(), TerrainFileError> {
        writeln!(writer, "{FORMAT_HEADER} v{FORMAT_VERSION}")?;
        writeln!(writer, "origin {} {}", self.origin_x, self.origin_y)?;
        writeln!(writer, "cell {}", self.cell_size)?;
        writeln!(writer, "dims {} {}", self.nx, self.ny)?;
        for j in 0..self.ny {
            let row: Vec<String> = (0..self.nx)
                .map(|i| {
                    let k = j * self.nx + i;
                    if self.admissible[k] {
                        format!("{}", self.heights[k])
                    } else {
                        "_".to_owned()
                    }
                })
                .collect();
            writeln!(writer, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Ground under the walker.
#[derive(Debug, Clone, PartialEq)]
pub enum Terrain {
    Flat,
    Procedural(ProceduralTerrain),
    Grid(GridTerrain),
}

impl Terrain {
    /// Ground height at a world position.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        match self {
            Terrain::Flat => 0.0,
            Terrain::Procedural(p) => p.height(x, y),
            Terrain::Grid(g) => g.height(x, y),
        }
    }

    /// Whether a foothold may land at a world position.
    pub fn admissible(&self, x: f64, y: f64) -> bool {
        match self {
            Terrain::Flat => true,
            Terrain::Procedural(p) => p.admissible(x, y),
            Terrain::Grid(g) => g.is_admissible(x, y),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) from the top 53 bits.
fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
