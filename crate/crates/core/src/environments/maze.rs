//! Crowd moving through a 2-D maze towards a goal cell.
//!
//! States are the free cells in row-major order. Actions are `0 = stay`,
//! `1 = up`, `2 = down`, `3 = left`, `4 = right`; a move into a wall or off
//! the grid leaves the player in place.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CrowdTerm, Dynamics, FiniteMFG, Kernel, Mode, TabularReward};

/// Two horizontal walls with gaps, on a 100 × 100 grid.
pub const DEFAULT_MASK: &str = include_str!("../../data/maze_default.txt");

const MOVES: [(i64, i64); 5] = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MazeParams {
    pub width: usize,
    pub height: usize,
    pub horizon: usize,
    /// `(row, column)`.
    pub goal: (usize, usize),
    pub source: (usize, usize),
    pub goal_reward: f64,
    pub distance_scale: f64,
    pub crowd_weight: f64,
    pub init_exponent: i32,
    /// Normalizing radius of the initial bump; `√(2·95²)` when absent.
    pub init_radius: Option<f64>,
    /// Rows of `.` (free) and `#` (wall). The bundled layout is used for a
    /// 100 × 100 grid when absent, an empty grid otherwise.
    pub mask: Option<String>,
    /// Path of a mask file; overrides `mask`.
    pub mask_file: Option<String>,
}

impl Default for MazeParams {
    fn default() -> Self {
        Self {
            width: 100,
            height: 100,
            horizon: 100,
            goal: (50, 50),
            source: (5, 5),
            goal_reward: 10.0,
            distance_scale: 100.0,
            crowd_weight: 0.5,
            init_exponent: 10,
            init_radius: None,
            mask: None,
            mask_file: None,
        }
    }
}

/// Parses a `.`/`#` grid into a wall flag per cell.
pub fn parse_mask(text: &str, width: usize, height: usize) -> Result<Vec<bool>> {
    let rows: Vec<&str> = text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty())
        .collect();
    if rows.len() != height {
        return Err(Error::InvalidParameter(format!(
            "mask has {} rows, expected {height}",
            rows.len()
        )));
    }
    let mut walls = Vec::with_capacity(width * height);
    for (i, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(Error::InvalidParameter(format!(
                "mask row {i} has {} cells, expected {width}",
                row.chars().count()
            )));
        }
        for (j, c) in row.chars().enumerate() {
            match c {
                '.' => walls.push(false),
                '#' => walls.push(true),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "mask cell ({i}, {j}) is {other:?}; use '.' or '#'"
                    )))
                }
            }
        }
    }
    Ok(walls)
}

/// A built maze: the game plus the cell of each state.
#[derive(Clone, Debug)]
pub struct Maze {
    pub model: FiniteMFG,
    pub cells: Vec<(usize, usize)>,
    pub params: MazeParams,
}

impl Maze {
    pub fn l1_to_goal(&self, state: usize) -> usize {
        let (i, j) = self.cells[state];
        i.abs_diff(self.params.goal.0) + j.abs_diff(self.params.goal.1)
    }
}

pub fn build_maze2d(params: &MazeParams) -> Result<FiniteMFG> {
    Ok(build_maze(params)?.model)
}

pub fn build_maze(params: &MazeParams) -> Result<Maze> {
    let (w, h) = (params.width, params.height);
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter("maze grid is empty".into()));
    }
    let walls = match (&params.mask_file, &params.mask) {
        (Some(path), _) => parse_mask(&std::fs::read_to_string(path)?, w, h)?,
        (None, Some(text)) => parse_mask(text, w, h)?,
        (None, None) if (w, h) == (100, 100) => parse_mask(DEFAULT_MASK, w, h)?,
        (None, None) => vec![false; w * h],
    };
    let (gi, gj) = params.goal;
    if gi >= h || gj >= w || walls[gi * w + gj] {
        return Err(Error::InvalidParameter(format!(
            "goal ({gi}, {gj}) is off the grid or on a wall"
        )));
    }
    let mut index = vec![usize::MAX; w * h];
    let mut cells = Vec::new();
    for i in 0..h {
        for j in 0..w {
            if !walls[i * w + j] {
                index[i * w + j] = cells.len();
                cells.push((i, j));
            }
        }
    }
    let ns = cells.len();
    let step = |s: usize, a: usize| -> usize {
        let (i, j) = cells[s];
        let (di, dj) = MOVES[a];
        let (ni, nj) = (i as i64 + di, j as i64 + dj);
        if ni < 0 || nj < 0 || ni >= h as i64 || nj >= w as i64 {
            return s;
        }
        let t = index[ni as usize * w + nj as usize];
        if t == usize::MAX {
            s
        } else {
            t
        }
    };
    let kernel = Kernel::from_fn(ns, 5, |s, a, row| row.push((step(s, a), 1.0)));

    let table: Vec<Vec<f64>> = cells
        .iter()
        .map(|&(i, j)| {
            let d = (i.abs_diff(gi) + j.abs_diff(gj)) as f64;
            vec![params.goal_reward * (1.0 - d / params.distance_scale); 5]
        })
        .collect();

    let radius = params.init_radius.unwrap_or((2.0 * 95.0f64 * 95.0).sqrt());
    let (si, sj) = params.source;
    let mut mu0: Vec<f64> = cells
        .iter()
        .map(|&(i, j)| {
            let d = ((i as f64 - si as f64).powi(2) + (j as f64 - sj as f64).powi(2)).sqrt();
            (1.0 - d / radius).max(0.0).powi(params.init_exponent)
        })
        .collect();
    let total: f64 = mu0.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("initial distribution has no mass".into()));
    }
    mu0.iter_mut().for_each(|m| *m /= total);

    // mass in a region the goal cannot reach is reported as a warning
    let goal_state = index[gi * w + gj];
    let mut seen = vec![false; ns];
    let mut queue = VecDeque::from([goal_state]);
    seen[goal_state] = true;
    while let Some(s) = queue.pop_front() {
        for a in 1..5 {
            let t = step(s, a);
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    let stranded: f64 = (0..ns).filter(|&s| !seen[s]).map(|s| mu0[s]).sum();

    let mut model = FiniteMFG::new(
        "maze2d",
        ns,
        5,
        Mode::Finite {
            horizon: params.horizon,
        },
        mu0,
        None,
        Dynamics::Fixed(vec![kernel]),
        Arc::new(TabularReward::new(
            table,
            CrowdTerm::NegLog {
                weight: params.crowd_weight,
            },
        )),
    );
    if stranded > 0.0 {
        model = model.with_note(format!(
            "free cells disconnected from the goal hold {stranded:.3e} of the initial mass"
        ));
    }
    Ok(Maze {
        model,
        cells,
        params: params.clone(),
    })
}
