//! Rectangular space grids on `[−M, M]^N` (N ∈ {1, 2}) and values attached
//! to their nodes.

use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error("grid mismatch between function and grid")]
    Mismatch,
}

/// Uniform rectangular grid. Mesh widths are `2·extent/(nodes−1)` per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub extent: Vec<f64>,
    pub nodes: Vec<usize>,
    pub horizon: f64,
}

impl Grid {
    pub fn new(extent: Vec<f64>, nodes: Vec<usize>, horizon: f64) -> Result<Arc<Grid>, GridError> {
        let dim = extent.len();
        if dim == 0 || dim > 2 || nodes.len() != dim {
            return Err(GridError::DegenerateGrid(format!(
                "dimension {dim} not in {{1, 2}}"
            )));
        }
        if nodes.iter().any(|&n| n < 3) {
            return Err(GridError::DegenerateGrid(
                "need at least 3 nodes per axis".into(),
            ));
        }
        if extent.iter().any(|&m| !(m > 0.0)) || !(horizon > 0.0) {
            return Err(GridError::DegenerateGrid(
                "extents and horizon must be positive".into(),
            ));
        }
        Ok(Arc::new(Grid {
            dim,
            extent,
            nodes,
            horizon,
        }))
    }

    pub fn line(extent: f64, nodes: usize, horizon: f64) -> Result<Arc<Grid>, GridError> {
        Grid::new(vec![extent], vec![nodes], horizon)
    }

    pub fn mesh(&self, axis: usize) -> f64 {
        2.0 * self.extent[axis] / (self.nodes[axis] - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Multi-index of a flat node index (row-major, axis 0 fastest).
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat % self.nodes[0], flat / self.nodes[0]],
        }
    }

    pub fn flatten(&self, ix: usize, iy: usize) -> usize {
        match self.dim {
            1 => ix,
            _ => ix + self.nodes[0] * iy,
        }
    }

    pub fn coord(&self, axis: usize, index: usize) -> f64 {
        -self.extent[axis] + self.mesh(axis) * index as f64
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflatten(flat);
        (0..self.dim).map(|k| self.coord(k, idx[k])).collect()
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.unflatten(flat);
        (0..self.dim).any(|k| idx[k] == 0 || idx[k] == self.nodes[k] - 1)
    }
}

/// Values of a candidate solution on one time slice of a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GridFunction {
    pub fn from_fn(grid: Arc<Grid>, time: f64, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        let values = (0..grid.node_count()).map(|i| f(&grid.point(i))).collect();
        GridFunction { grid, values, time }
    }

    pub fn constant(grid: Arc<Grid>, time: f64, c: f64) -> GridFunction {
        let values = vec![c; grid.node_count()];
        GridFunction { grid, values, time }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Long-format CSV: `x1[,x2],t,value`, one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.grid.dim == 1 {
            out.push_str("x1,t,value\n");
        } else {
            out.push_str("x1,x2,t,value\n");
        }
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            if self.grid.dim == 1 {
                out.push_str(&format!("{},{},{}\n", p[0], self.time, v));
            } else {
                out.push_str(&format!("{},{},{},{}\n", p[0], p[1], self.time, v));
            }
        }
        out
    }
}
