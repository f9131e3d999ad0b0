//! Two-dimensional heterogeneous-media transport used to manufacture
//! depth-averaged ensemble data: log-normal permeability, Darcy flow, and
//! advection-diffusion of a passive scalar in a channel periodic in `x`.

pub mod darcy;
pub mod ensemble;
pub mod grf;
pub mod transport;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell layout shared by every field: index `j * nx + i`, `x_i = i dx`,
/// `y_j = (j + 1/2) dy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2d {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2d {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("domain {lx} x {ly} must be positive")));
        }
        if nx < 4 || nx % 2 != 0 || ny < 2 {
            return Err(Error::InvalidGrid(format!("need even nx >= 4 and ny >= 2, got {nx} x {ny}")));
        }
        Ok(Self { lx, ly, nx, ny })
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }
}

/// Uniform-weight average over `y` for each column `x_i`.
pub fn depth_average(grid: &Grid2d, field: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.nx];
    for row in field.chunks(grid.nx) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= grid.ny as f64);
    out
}

/// `sum c dx dy`.
pub fn total_mass(grid: &Grid2d, field: &[f64]) -> f64 {
    field.iter().sum::<f64>() * grid.dx() * grid.dy()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_average_cases() {
        let g = Grid2d::new(4.0, 1.0, 4, 4).unwrap();
        let uniform: Vec<f64> = (0..16).map(|k| (k % 4) as f64).collect();
        assert_eq!(depth_average(&g, &uniform), vec![0.0, 1.0, 2.0, 3.0]);
        let linear: Vec<f64> = (0..16).map(|k| g.y(k / 4)).collect();
        assert!(depth_average(&g, &linear).iter().all(|v| (v - 0.5).abs() < 1e-15));
        let checker: Vec<f64> = (0..16).map(|k| ((k % 4 + k / 4) % 2) as f64).collect();
        assert_eq!(depth_average(&g, &checker), vec![0.5; 4]);
    }
}
