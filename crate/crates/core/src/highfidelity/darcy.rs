//! Incompressible Darcy flow `u = -kappa grad p`, `div u = 0`, driven by a
//! mean pressure drop along the periodic `x` direction with impermeable
//! walls in `y`.
//!
//! Cell-centered finite volumes with harmonic-mean face permeabilities. The
//! pressure splits as `p = -G x + q` with `q` periodic; `q` solves a singular
//! symmetric system by Jacobi-preconditioned conjugate gradients. The flow is
//! linear in `G`, so one solve at `G = 1` is rescaled to hit the target mean
//! velocity.

use serde::{Deserialize, Serialize};

use super::Grid2d;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: Grid2d,
    /// Streamwise velocity on the face east of cell `(i, j)`.
    pub u_face: Vec<f64>,
    /// Transverse velocity on the face north of cell `(i, j)`; the top row is the wall.
    pub v_face: Vec<f64>,
    pub gradient: f64,
    pub iterations: usize,
}

impl VelocityField {
    pub fn uniform(grid: Grid2d, u_mean: f64) -> Self {
        Self {
            grid,
            u_face: vec![u_mean; grid.len()],
            v_face: vec![0.0; grid.len()],
            gradient: 0.0,
            iterations: 0,
        }
    }

    fn west(&self, i: usize, j: usize) -> f64 {
        let nx = self.grid.nx;
        self.u_face[j * nx + (i + nx - 1) % nx]
    }

    fn south(&self, i: usize, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.v_face[(j - 1) * self.grid.nx + i]
        }
    }

    /// Per-cell discrete divergence.
    pub fn divergence(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut div = vec![0.0; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = j * g.nx + i;
                div[c] = (self.u_face[c] - self.west(i, j)) / g.dx() + (self.v_face[c] - self.south(i, j)) / g.dy();
            }
        }
        div
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence().iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Mean of the streamwise face velocities.
    pub fn mean_u(&self) -> f64 {
        self.u_face.iter().sum::<f64>() / self.u_face.len() as f64
    }

    /// Cell-centered `(u, v)`.
    pub fn centered(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let mut u = vec![0.0; g.len()];
        let mut v = vec![0.0; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = j * g.nx + i;
                u[c] = 0.5 * (self.u_face[c] + self.west(i, j));
                v[c] = 0.5 * (self.v_face[c] + self.south(i, j));
            }
        }
        (u, v)
    }

    pub fn max_speed(&self) -> (f64, f64) {
        let mu = self.u_face.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mv = self.v_face.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (mu, mv)
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

pub fn solve_darcy(grid: Grid2d, kappa: &[f64], u_mean: f64, opts: &SolverOptions) -> Result<VelocityField> {
    if kappa.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            context: "permeability field",
            expected: grid.len(),
            got: kappa.len(),
        });
    }
    if let Some(k) = kappa.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(Error::InvalidParameter(format!("permeability must be positive, got {k}")));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let (dx, dy) = (grid.dx(), grid.dy());
    let east = |i: usize| (i + 1) % nx;

    let mut kx = vec![0.0; grid.len()];
    let mut ky = vec![0.0; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            kx[c] = harmonic(kappa[c], kappa[j * nx + east(i)]);
            if j + 1 < ny {
                ky[c] = harmonic(kappa[c], kappa[c + nx]);
            }
        }
    }
    let tx: Vec<f64> = kx.iter().map(|k| k * dy / dx).collect();
    let ty: Vec<f64> = ky.iter().map(|k| k * dx / dy).collect();

    let apply = |q: &[f64], out: &mut [f64]| {
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                let w = j * nx + (i + nx - 1) % nx;
                let e = j * nx + east(i);
                let mut s = tx[c] * (q[c] - q[e]) + tx[w] * (q[c] - q[w]);
                if j + 1 < ny {
                    s += ty[c] * (q[c] - q[c + nx]);
                }
                if j > 0 {
                    s += ty[c - nx] * (q[c] - q[c - nx]);
                }
                out[c] = s;
            }
        }
    };
    let diag: Vec<f64> = (0..grid.len())
        .map(|c| {
            let (i, j) = (c % nx, c / nx);
            let w = j * nx + (i + nx - 1) % nx;
            let mut d = tx[c] + tx[w];
            if j + 1 < ny {
                d += ty[c];
            }
            if j > 0 {
                d += ty[c - nx];
            }
            d
        })
        .collect();

    // Right-hand side at unit gradient.
    let b: Vec<f64> = (0..grid.len())
        .map(|c| {
            let (i, j) = (c % nx, c / nx);
            dy * (kx[j * nx + (i + nx - 1) % nx] - kx[c])
        })
        .collect();
    let (q, iterations) = pcg(&apply, &diag, &b, opts)?;

    let mut u_face = vec![0.0; grid.len()];
    let mut v_face = vec![0.0; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            u_face[c] = kx[c] * (1.0 - (q[j * nx + east(i)] - q[c]) / dx);
            if j + 1 < ny {
                v_face[c] = -ky[c] * (q[c + nx] - q[c]) / dy;
            }
        }
    }
    let mean = u_face.iter().sum::<f64>() / u_face.len() as f64;
    let scale = u_mean / mean;
    u_face.iter_mut().for_each(|v| *v *= scale);
    v_face.iter_mut().for_each(|v| *v *= scale);
    Ok(VelocityField {
        grid,
        u_face,
        v_face,
        gradient: scale,
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Conjugate gradients on the mean-free subspace of a singular SPD operator.
fn pcg<F: Fn(&[f64], &mut [f64])>(apply: &F, diag: &[f64], b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    remove_mean(&mut r);
    let b_norm = dot(&r, &r).sqrt();
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    remove_mean(&mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=opts.max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let res = dot(&r, &r).sqrt();
        if !res.is_finite() {
            return Err(Error::SolverDiverged { iterations: it, residual: res });
        }
        if res <= opts.rel_tol * b_norm {
            remove_mean(&mut x);
            return Ok((x, it));
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        remove_mean(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let mut res_vec = vec![0.0; n];
    apply(&x, &mut res_vec);
    let res = res_vec.iter().zip(b).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
    Err(Error::SolverDiverged {
        iterations: opts.max_iter,
        residual: res / b_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::highfidelity::grf::{GrfConfig, GrfSampler};

    #[test]
    fn uniform_medium_gives_uniform_flow() {
        let g = Grid2d::new(4.0, 1.0, 32, 8).unwrap();
        let v = solve_darcy(g, &vec![3.7; g.len()], 1.0, &SolverOptions::default()).unwrap();
        // Exact up to the rounding of the normalizing mean.
        assert!(v.u_face.iter().all(|u| (u - 1.0).abs() < 1e-13));
        assert!(v.v_face.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn layered_medium_matches_profile() {
        let g = Grid2d::new(4.0, 1.0, 32, 16).unwrap();
        let kappa: Vec<f64> = (0..g.len()).map(|c| 1.0 + 0.8 * (6.0 * g.y(c / g.nx)).sin()).collect();
        let v = solve_darcy(g, &kappa, 1.0, &SolverOptions::default()).unwrap();
        let mean_k = kappa.iter().sum::<f64>() / kappa.len() as f64;
        for (u, k) in v.u_face.iter().zip(&kappa) {
            assert!((u - k / mean_k).abs() < 1e-12);
        }
        assert!(v.v_face.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn random_medium_is_divergence_free_with_target_mean() {
        let g = Grid2d::new(4.0, 1.0, 64, 16).unwrap();
        let lk = GrfSampler::new(g, &GrfConfig::default()).unwrap().sample(5);
        let kappa: Vec<f64> = lk.iter().map(|v| v.exp()).collect();
        let v = solve_darcy(g, &kappa, 1.0, &SolverOptions::default()).unwrap();
        assert!(v.max_divergence() < 1e-8, "{}", v.max_divergence());
        assert!((v.mean_u() - 1.0).abs() < 1e-10);
        assert!(v.v_face.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn rejects_nonpositive_permeability() {
        let g = Grid2d::new(4.0, 1.0, 8, 4).unwrap();
        let mut k = vec![1.0; g.len()];
        k[3] = 0.0;
        assert!(solve_darcy(g, &k, 1.0, &SolverOptions::default()).is_err());
    }
}
