use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Land,
    Water,
    Wall,
    Goal,
}

impl Cell {
    fn symbol(self) -> char {
        match self {
            Cell::Land => '.',
            Cell::Water => 'W',
            Cell::Wall => '#',
            Cell::Goal => 'G',
        }
    }
}

/// Grid coordinate: `x` is the column, `y` the row (row 0 at the top).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

impl Pos {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

/// One Island Navigation layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: Pos,
}

impl GridSpec {
    /// Builds and validates a layout.
    pub fn new(width: usize, height: usize, cells: Vec<Cell>, start: Pos) -> Result<Self> {
        let spec = Self {
            width,
            height,
            cells,
            start,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses the text layout format: one row per line using `.` land,
    /// `W` water, `G` goal, `A` start (a land cell) and `#` wall.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(Error::Layout {
                line: 0,
                msg: "layout is empty".into(),
            });
        }
        let width = rows[0].chars().count();
        let mut cells = Vec::with_capacity(width * rows.len());
        let mut start = None;
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Layout {
                    line: y + 1,
                    msg: format!("expected {width} columns, found {}", row.chars().count()),
                });
            }
            for (x, ch) in row.chars().enumerate() {
                let cell = match ch {
                    '.' => Cell::Land,
                    'W' => Cell::Water,
                    'G' => Cell::Goal,
                    '#' => Cell::Wall,
                    'A' => {
                        if start.replace(Pos::new(x, y)).is_some() {
                            return Err(Error::Layout {
                                line: y + 1,
                                msg: "more than one start cell".into(),
                            });
                        }
                        Cell::Land
                    }
                    other => {
                        return Err(Error::Layout {
                            line: y + 1,
                            msg: format!("unknown cell character {other:?}"),
                        })
                    }
                };
                cells.push(cell);
            }
        }
        let start = start.ok_or(Error::Layout {
            line: 0,
            msg: "no start cell `A`".into(),
        })?;
        Self::new(width, rows.len(), cells, start)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        let err = |msg: String| Error::Layout { line: 0, msg };
        if self.width == 0 || self.height == 0 {
            return Err(err("grid must be non-empty".into()));
        }
        if self.cells.len() != self.width * self.height {
            return Err(err(format!(
                "{} cells for a {}x{} grid",
                self.cells.len(),
                self.width,
                self.height
            )));
        }
        let goals = self.cells.iter().filter(|&&c| c == Cell::Goal).count();
        if goals != 1 {
            return Err(err(format!("expected exactly one goal, found {goals}")));
        }
        if !self.in_bounds(self.start) || self.cell(self.start) != Cell::Land {
            return Err(err("start must be a land cell".into()));
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let border = x == 0 || y == 0 || x + 1 == self.width || y + 1 == self.height;
                if border && !matches!(self.cell(Pos::new(x, y)), Cell::Wall | Cell::Water) {
                    return Err(Error::Layout {
                        line: y + 1,
                        msg: format!("border cell ({x}, {y}) must be wall or water"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Pos {
        self.start
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn index(&self, p: Pos) -> usize {
        p.y * self.width + p.x
    }

    pub fn cell(&self, p: Pos) -> Cell {
        self.cells[self.index(p)]
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Pos::new(x, y)))
    }

    pub fn water_cells(&self) -> impl Iterator<Item = Pos> + '_ {
        self.positions().filter(|&p| self.cell(p) == Cell::Water)
    }

    pub fn goal(&self) -> Pos {
        self.positions()
            .find(|&p| self.cell(p) == Cell::Goal)
            .expect("validated grid has a goal")
    }

    /// Cells the agent may stand on while an episode is active.
    pub fn open_cells(&self) -> impl Iterator<Item = Pos> + '_ {
        self.positions().filter(|&p| self.cell(p) == Cell::Land)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            for x in 0..self.width {
                let p = Pos::new(x, y);
                let ch = if p == self.start {
                    'A'
                } else {
                    self.cell(p).symbol()
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
