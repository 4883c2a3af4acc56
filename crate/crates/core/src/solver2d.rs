//! Rectangular relay grids routed left-then-down.
//!
//! Packets travel along their row to the left-most column, then down that
//! column to the sink at the origin. Column links carry whole rows (width
//! `L`), row links carry one row's strip of height `(h_j + h_{j+1})/2`, so
//! each family reduces to the one-dimensional problem with a rescaled rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::RateFunction;
use crate::evaluate::qsup_of_placement;
use crate::solver1d::{solve, Placement, SolveError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Grid2DError {
    #[error("invalid grid input: {0}")]
    Domain(String),
    #[error("row links never outrun column links for N_L <= {n_l_max} (q_y = {q_y})")]
    NoFeasibleNL { n_l_max: usize, q_y: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Default cap on the column-count search.
pub const DEFAULT_NL_MAX: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    /// Column spacings `ℓ_1..ℓ_{N_L}` along x.
    pub x_spacings: Vec<f64>,
    /// Row spacings `h_1..h_{N_H}` along y.
    pub y_spacings: Vec<f64>,
    pub length: f64,
    pub height: f64,
}

impl Grid2D {
    pub fn new(
        x_spacings: Vec<f64>,
        y_spacings: Vec<f64>,
        length: f64,
        height: f64,
    ) -> Result<Self, Grid2DError> {
        Placement::with_length(x_spacings.clone(), length)?;
        Placement::with_length(y_spacings.clone(), height)?;
        Ok(Grid2D {
            x_spacings,
            y_spacings,
            length,
            height,
        })
    }

    /// Height of the widest row strip, `max_j (h_j + h_{j+1})/2` with the
    /// spacing past the last row taken as zero.
    pub fn strip_height(&self) -> f64 {
        strip_height(&self.y_spacings)
    }

    /// Relays in the grid, sink excluded.
    pub fn relay_count(&self) -> usize {
        (self.x_spacings.len() + 1) * (self.y_spacings.len() + 1) - 1
    }
}

pub fn strip_height(y_spacings: &[f64]) -> f64 {
    (0..y_spacings.len())
        .map(|j| 0.5 * (y_spacings[j] + y_spacings.get(j + 1).copied().unwrap_or(0.0)))
        .fold(0.0, f64::max)
}

/// Evenly spaced grid.
pub fn constant_grid(
    n_l: usize,
    n_h: usize,
    length: f64,
    height: f64,
) -> Result<Grid2D, Grid2DError> {
    if n_l == 0 || n_h == 0 {
        return Err(Grid2DError::Domain(
            "need at least one row and column".into(),
        ));
    }
    Grid2D::new(
        vec![length / n_l as f64; n_l],
        vec![height / n_h as f64; n_h],
        length,
        height,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLimit {
    /// Limit imposed by row (x-direction) links.
    pub q_x: f64,
    /// Limit imposed by column (y-direction) links.
    pub q_y: f64,
    pub q_sup: f64,
}

/// Stability limit (bit/s per m²) of an arbitrary grid.
pub fn grid_qsup(grid: &Grid2D, rate: &RateFunction) -> Result<GridLimit, Grid2DError> {
    let rows = Placement::with_length(grid.x_spacings.clone(), grid.length)?;
    let cols = Placement::with_length(grid.y_spacings.clone(), grid.height)?;
    let q_y = qsup_of_placement(&cols, &rate.scaled(1.0 / grid.length)).q_sup;
    let q_x = qsup_of_placement(&rows, &rate.scaled(1.0 / grid.strip_height())).q_sup;
    Ok(GridLimit {
        q_x,
        q_y,
        q_sup: q_x.min(q_y),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2DResult {
    pub grid: Grid2D,
    pub q_sup: f64,
    pub q_x: f64,
    pub q_y: f64,
    pub n_l: usize,
    pub total_nodes: usize,
    /// `q_x` for every column count tried, in order `N_L = 1, 2, ...`.
    pub q_x_sweep: Vec<f64>,
}

impl Grid2DResult {
    pub fn delta(&self) -> f64 {
        self.q_sup / self.total_nodes as f64
    }
}

fn check_area(length: f64, height: f64, n_h: usize) -> Result<(), Grid2DError> {
    if n_h == 0 {
        return Err(Grid2DError::Domain("need at least one row".into()));
    }
    for (name, v) in [("L", length), ("H", height)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Grid2DError::Domain(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    Ok(())
}

/// Optimal column spacings, then optimal row spacings against the widest strip.
fn stage_one(
    rate: &RateFunction,
    n_h: usize,
    length: f64,
    height: f64,
    tol_q: Option<f64>,
) -> Result<(Vec<f64>, f64, f64), Grid2DError> {
    let column = solve(&rate.scaled(1.0 / length), n_h, height, tol_q)?;
    let h = column.placement.distances().to_vec();
    let strip = strip_height(&h);
    Ok((h, column.q_sup, strip))
}

fn stage_two(
    rate: &RateFunction,
    strip: f64,
    n_l: usize,
    length: f64,
    tol_q: Option<f64>,
) -> Result<(Vec<f64>, f64), Grid2DError> {
    let row = solve(&rate.scaled(1.0 / strip), n_l, length, tol_q)?;
    Ok((row.placement.distances().to_vec(), row.q_sup))
}

/// Optimal grid with a fixed number of columns.
pub fn solve_2d_with_nl(
    rate: &RateFunction,
    n_h: usize,
    n_l: usize,
    length: f64,
    height: f64,
    tol_q: Option<f64>,
) -> Result<Grid2DResult, Grid2DError> {
    check_area(length, height, n_h)?;
    if n_l == 0 {
        return Err(Grid2DError::Domain("need at least one column".into()));
    }
    let (h, q_y, strip) = stage_one(rate, n_h, length, height, tol_q)?;
    let (l, q_x) = stage_two(rate, strip, n_l, length, tol_q)?;
    let grid = Grid2D::new(l, h, length, height)?;
    Ok(Grid2DResult {
        total_nodes: grid.relay_count(),
        grid,
        q_sup: q_x.min(q_y),
        q_x,
        q_y,
        n_l,
        q_x_sweep: vec![q_x],
    })
}

/// Optimal grid with the fewest columns for which column links remain the
/// bottleneck (`q_y < q_x`).
pub fn solve_2d(
    rate: &RateFunction,
    n_h: usize,
    length: f64,
    height: f64,
    tol_q: Option<f64>,
    n_l_max: usize,
) -> Result<Grid2DResult, Grid2DError> {
    check_area(length, height, n_h)?;
    let (h, q_y, strip) = stage_one(rate, n_h, length, height, tol_q)?;
    let sweep: Vec<(Vec<f64>, f64)> = (1..=n_l_max)
        .into_par_iter()
        .map(|n_l| stage_two(rate, strip, n_l, length, tol_q))
        .collect::<Result<_, _>>()?;
    let q_x_sweep: Vec<f64> = sweep.iter().map(|(_, q)| *q).collect();
    let Some(idx) = q_x_sweep.iter().position(|&q_x| q_y < q_x) else {
        return Err(Grid2DError::NoFeasibleNL { n_l_max, q_y });
    };
    let (l, q_x) = sweep[idx].clone();
    let grid = Grid2D::new(l, h, length, height)?;
    Ok(Grid2DResult {
        total_nodes: grid.relay_count(),
        grid,
        q_sup: q_y,
        q_x,
        q_y,
        n_l: idx + 1,
        q_x_sweep,
    })
}
