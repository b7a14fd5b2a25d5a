//! Monotone upward path search over a [`PatchGrid`].
//!
//! From the start cell the walker may move up, up-left or up-right onto a
//! cell whose intensity is not greater than the current one (moving away
//! from the camera). Each visited cell is first tested with [`stop_check`];
//! the first cell that fires ends the path.
//!
//! Two implementations are provided:
//!
//! * [`enumerate_paths`] + [`select_best`]: a literal depth-first enumeration
//!   of every maximal path, exponential in the worst case and bounded to
//!   small grids. It serves as the reference.
//! * [`dp_search`]: forward reachability over the move DAG. Every move rises
//!   exactly one row, so a path's length is `start_row - end_row` and the
//!   winner can be chosen from reachable terminal cells alone. Runs in
//!   `O(rows * cols)`.
//!
//! Both pick the same path: longest first, then the smallest lateral
//! offset, then the smaller end column, then the move sequence that is
//! lexicographically least under `up < up-left < up-right`.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depth::PatchGrid;

/// Largest grid (in cells) [`enumerate_paths`] accepts by default.
pub const ORACLE_MAX_CELLS: usize = 16 * 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Target of `mv`, or `None` when it would leave the grid.
    fn step(self, mv: Move, cols: usize) -> Option<Cell> {
        let row = self.row.checked_sub(1)?;
        let col = match mv {
            Move::Up => self.col,
            Move::UpLeft => self.col.checked_sub(1)?,
            Move::UpRight => self.col + 1,
        };
        (col < cols).then_some(Cell { row, col })
    }
}

/// Upward moves, declared in exploration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Up,
    UpLeft,
    UpRight,
}

impl Move {
    pub const ORDER: [Move; 3] = [Move::Up, Move::UpLeft, Move::UpRight];

    fn between(from: Cell, to: Cell) -> Option<Move> {
        if to.row + 1 != from.row {
            return None;
        }
        match to.col as isize - from.col as isize {
            0 => Some(Move::Up),
            -1 => Some(Move::UpLeft),
            1 => Some(Move::UpRight),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The six-cell lookahead is darker than `dark_threshold` (far range).
    DarkHorizon,
    /// The current cell is brighter than the lookahead by more than `diff_threshold`.
    Discontinuity,
    /// Within `top_margin_rows` of the top edge.
    TopReached,
    /// No upward neighbor has an intensity at or below the current one.
    DeadEnd,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::DarkHorizon => "dark_horizon",
            StopReason::Discontinuity => "discontinuity",
            StopReason::TopReached => "top_reached",
            StopReason::DeadEnd => "dead_end",
        }
    }
}

impl core::fmt::Display for StopReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCheck {
    Continue,
    Stop(StopReason),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("grid is {rows}x{cols}; the search needs at least 2x2")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("grid is {rows}x{cols}; exhaustive enumeration is limited to {max_cells} cells")]
    GridTooLarge {
        rows: usize,
        cols: usize,
        max_cells: usize,
    },
    #[error("{name} threshold {value} is outside [0, 1]")]
    InvalidThreshold { name: &'static str, value: f64 },
    #[error("top margin must be at least 2 rows (got {0})")]
    TopMarginTooSmall(usize),
    #[error("start cell ({}, {}) is outside the grid", .0.row, .0.col)]
    StartOutOfBounds(Cell),
    #[error("no free path from the start cell ({stop_reason})")]
    NoFreePath { stop_reason: StopReason },
    #[error("no candidate paths to choose from")]
    EmptyPathSet,
}

/// Thresholds and start position for a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub dark_threshold: f64,
    pub diff_threshold: f64,
    pub top_margin_rows: usize,
    /// `None` starts at the bottom row, middle column (left of center for even widths).
    pub start: Option<Cell>,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            dark_threshold: 0.20,
            diff_threshold: 0.20,
            top_margin_rows: 2,
            start: None,
        }
    }
}

impl SearchParams {
    pub fn new(dark_threshold: f64, diff_threshold: f64) -> Self {
        Self {
            dark_threshold,
            diff_threshold,
            ..Self::default()
        }
    }

    pub fn with_start(mut self, start: Cell) -> Self {
        self.start = Some(start);
        self
    }

    pub fn default_start(grid: &PatchGrid) -> Cell {
        Cell::new(grid.rows() - 1, (grid.cols() - 1) / 2)
    }

    /// Checks the parameters against `grid` and returns the resolved start cell.
    pub fn validate(&self, grid: &PatchGrid) -> Result<Cell, SearchError> {
        if grid.rows() < 2 || grid.cols() < 2 {
            return Err(SearchError::GridTooSmall {
                rows: grid.rows(),
                cols: grid.cols(),
            });
        }
        for (name, value) in [("dark", self.dark_threshold), ("diff", self.diff_threshold)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SearchError::InvalidThreshold { name, value });
            }
        }
        if self.top_margin_rows < 2 {
            return Err(SearchError::TopMarginTooSmall(self.top_margin_rows));
        }
        let start = self.start.unwrap_or_else(|| Self::default_start(grid));
        if start.row >= grid.rows() || start.col >= grid.cols() {
            return Err(SearchError::StartOutOfBounds(start));
        }
        Ok(start)
    }
}

/// An upward path and the reason it ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavPath {
    pub cells: Vec<Cell>,
    pub stop_reason: StopReason,
}

impl NavPath {
    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn end(&self) -> Cell {
        self.cells[self.cells.len() - 1]
    }

    pub fn length_steps(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn moves(&self) -> impl Iterator<Item = Move> + '_ {
        self.cells
            .windows(2)
            .map(|w| Move::between(w[0], w[1]).expect("non-adjacent cells in path"))
    }

    /// Checks move shape, monotone intensities and that only the final cell
    /// stops. Returns a description of the first violation.
    pub fn check_invariants(
        &self,
        grid: &PatchGrid,
        params: &SearchParams,
    ) -> Result<(), &'static str> {
        if self.cells.is_empty() {
            return Err("empty path");
        }
        for w in self.cells.windows(2) {
            if Move::between(w[0], w[1]).is_none() {
                return Err("cells are not connected by an upward move");
            }
            if grid.get(w[1].row, w[1].col) > grid.get(w[0].row, w[0].col) {
                return Err("intensity increases along the path");
            }
        }
        let (last, interior) = self.cells.split_last().expect("non-empty");
        if interior
            .iter()
            .any(|&c| stop_check(grid, c, params) != StopCheck::Continue)
        {
            return Err("interior cell satisfies a stop condition");
        }
        if stop_check(grid, *last, params) != StopCheck::Stop(self.stop_reason) {
            return Err("final cell does not stop with the recorded reason");
        }
        if self.length_steps() != self.start().row - last.row {
            return Err("length differs from rows climbed");
        }
        Ok(())
    }
}

/// Ordered stop tests for `cell`: top margin, dark horizon, discontinuity,
/// dead end.
///
/// The lookahead average covers the in-bounds members of up-left,
/// up-up-left, up, up-up, up-right and up-up-right.
pub fn stop_check(grid: &PatchGrid, cell: Cell, params: &SearchParams) -> StopCheck {
    if cell.row < params.top_margin_rows {
        return StopCheck::Stop(StopReason::TopReached);
    }
    let here = grid.get(cell.row, cell.col);

    let lo = cell.col.saturating_sub(1);
    let hi = (cell.col + 1).min(grid.cols() - 1);
    let mut sum = 0.0;
    let mut n = 0u32;
    for col in lo..=hi {
        sum += grid.get(cell.row - 1, col) + grid.get(cell.row - 2, col);
        n += 2;
    }
    let avg = sum / f64::from(n);

    if avg < params.dark_threshold {
        return StopCheck::Stop(StopReason::DarkHorizon);
    }
    if here - avg > params.diff_threshold {
        return StopCheck::Stop(StopReason::Discontinuity);
    }
    if valid_moves(grid, cell).next().is_none() {
        return StopCheck::Stop(StopReason::DeadEnd);
    }
    StopCheck::Continue
}

fn valid_moves(grid: &PatchGrid, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
    let here = grid.get(cell.row, cell.col);
    Move::ORDER
        .into_iter()
        .filter_map(move |mv| cell.step(mv, grid.cols()))
        .filter(move |n| grid.get(n.row, n.col) <= here)
}

/// Every maximal path from the start, in depth-first order.
///
/// Rejects grids over [`ORACLE_MAX_CELLS`].
pub fn enumerate_paths(
    grid: &PatchGrid,
    params: &SearchParams,
) -> Result<Vec<NavPath>, SearchError> {
    enumerate_paths_bounded(grid, params, ORACLE_MAX_CELLS)
}

pub fn enumerate_paths_bounded(
    grid: &PatchGrid,
    params: &SearchParams,
    max_cells: usize,
) -> Result<Vec<NavPath>, SearchError> {
    if grid.rows() * grid.cols() > max_cells {
        return Err(SearchError::GridTooLarge {
            rows: grid.rows(),
            cols: grid.cols(),
            max_cells,
        });
    }
    let start = params.validate(grid)?;
    let mut results = Vec::new();
    let mut trail = Vec::with_capacity(start.row + 1);
    explore(grid, params, start, &mut trail, &mut results);
    Ok(results)
}

fn explore(
    grid: &PatchGrid,
    params: &SearchParams,
    cell: Cell,
    trail: &mut Vec<Cell>,
    results: &mut Vec<NavPath>,
) {
    trail.push(cell);
    match stop_check(grid, cell, params) {
        StopCheck::Stop(stop_reason) => results.push(NavPath {
            cells: trail.clone(),
            stop_reason,
        }),
        StopCheck::Continue => {
            for next in valid_moves(grid, cell) {
                explore(grid, params, next, trail, results);
            }
        }
    }
    trail.pop();
}

/// Ranking used by every selector: `Less` means `a` is preferred.
fn preference(a: &NavPath, b: &NavPath, start: Cell) -> Ordering {
    b.length_steps()
        .cmp(&a.length_steps())
        .then_with(|| {
            a.end()
                .col
                .abs_diff(start.col)
                .cmp(&b.end().col.abs_diff(start.col))
        })
        .then_with(|| a.end().col.cmp(&b.end().col))
        .then_with(|| a.moves().cmp(b.moves()))
}

/// Longest, then straightest path; see the module docs for the full order.
pub fn select_best(paths: &[NavPath], start: Cell) -> Result<&NavPath, SearchError> {
    paths
        .iter()
        .min_by(|a, b| preference(a, b, start))
        .ok_or(SearchError::EmptyPathSet)
}

const UNSEEN: u8 = 0;
const OPEN: u8 = 1;
const TERMINAL: u8 = 2;

/// Linear-time search returning the same path as
/// `select_best(enumerate_paths(..))`.
///
/// A zero-length winner (the start cell itself stops) is reported as
/// [`SearchError::NoFreePath`].
pub fn dp_search(grid: &PatchGrid, params: &SearchParams) -> Result<NavPath, SearchError> {
    let start = params.validate(grid)?;
    let cols = grid.cols();
    let idx = |c: Cell| c.row * cols + c.col;

    let mut state = vec![UNSEEN; grid.rows() * cols];
    let mut stops = vec![StopReason::DeadEnd; grid.rows() * cols];
    state[idx(start)] = OPEN;

    // Rows are visited bottom-up, so a terminal in a later row always beats
    // earlier ones; within a row the first hit under (|dcol|, col) wins.
    let mut best: Option<(Cell, StopReason)> = None;
    for row in (0..=start.row).rev() {
        let mut row_best: Option<Cell> = None;
        for col in 0..cols {
            let cell = Cell::new(row, col);
            if state[idx(cell)] == UNSEEN {
                continue;
            }
            match stop_check(grid, cell, params) {
                StopCheck::Stop(reason) => {
                    state[idx(cell)] = TERMINAL;
                    stops[idx(cell)] = reason;
                    let closer = row_best.map_or(true, |b| {
                        cell.col.abs_diff(start.col) < b.col.abs_diff(start.col)
                    });
                    if closer {
                        row_best = Some(cell);
                    }
                }
                StopCheck::Continue => {
                    for next in valid_moves(grid, cell) {
                        state[idx(next)] = OPEN;
                    }
                }
            }
        }
        if let Some(cell) = row_best {
            best = Some((cell, stops[idx(cell)]));
        }
    }

    let (end, stop_reason) = best.expect("row 0 is always terminal");
    if end == start {
        return Err(SearchError::NoFreePath { stop_reason });
    }

    // Cells that can still reach `end` through non-terminal cells.
    let mut leads = vec![false; grid.rows() * cols];
    leads[idx(end)] = true;
    for row in end.row + 1..=start.row {
        for col in 0..cols {
            let cell = Cell::new(row, col);
            if state[idx(cell)] == OPEN {
                leads[idx(cell)] = valid_moves(grid, cell).any(|n| leads[idx(n)]);
            }
        }
    }

    // Greedy in move order from the start yields the lexicographically least route.
    let mut cells = Vec::with_capacity(start.row - end.row + 1);
    let mut cur = start;
    cells.push(cur);
    while cur != end {
        cur = Move::ORDER
            .into_iter()
            .filter_map(|mv| cur.step(mv, cols))
            .find(|n| leads[idx(*n)] && grid.get(n.row, n.col) <= grid.get(cur.row, cur.col))
            .expect("reachable endpoint has a predecessor chain");
        cells.push(cur);
    }
    Ok(NavPath { cells, stop_reason })
}
