//! The random walk on the orthant cluster `C_0`.
//!
//! "Simple random walk on `C_0`" is taken to mean the walk on the directed
//! graph: each step picks uniformly among the `d` out-edges at the current
//! vertex (`+e_i` at a 1-site, `−e_i` at a 0-site). Every such walk stays in
//! `C_0`. The environment is the hashed site field, so revisits see the same
//! site and nothing needs to be stored.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::{derive_seed, Direction, SiteField, Vertex};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    pub env_seed: u64,
    pub walk_seed: u64,
    pub p: f64,
    pub positions: Vec<Vertex>,
}

impl WalkPath {
    /// Every step is an out-edge of the environment at its departure vertex.
    pub fn is_valid(&self) -> bool {
        let Some(first) = self.positions.first() else {
            return false;
        };
        let env = SiteField::new(self.env_seed, first.dim());
        *first == Vertex::origin(first.dim())
            && self.positions.windows(2).all(|w| {
                let up = env.sample_site(&w[0], self.p);
                (0..first.dim()).any(|i| {
                    let dir = if up {
                        Direction::positive(i)
                    } else {
                        Direction::negative(i)
                    };
                    w[0].step(dir) == w[1]
                })
            })
    }
}

#[inline]
fn step(env: &SiteField, p: f64, x: &Vertex, rng: &mut ChaCha8Rng) -> Vertex {
    let axis = rng.gen_range(0..env.dim());
    if env.sample_site(x, p) {
        x.step(Direction::positive(axis))
    } else {
        x.step(Direction::negative(axis))
    }
}

pub fn walk(env: &SiteField, p: f64, steps: u64, walk_seed: u64) -> WalkPath {
    assert!(steps >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(walk_seed);
    let mut x = Vertex::origin(env.dim());
    let mut positions = Vec::with_capacity(steps as usize + 1);
    positions.push(x);
    for _ in 0..steps {
        x = step(env, p, &x, &mut rng);
        positions.push(x);
    }
    WalkPath {
        env_seed: env.seed(),
        walk_seed,
        p,
        positions,
    }
}

/// `X_N` without storing the path.
pub fn walk_endpoint(env: &SiteField, p: f64, steps: u64, walk_seed: u64) -> Vertex {
    let mut rng = ChaCha8Rng::seed_from_u64(walk_seed);
    let mut x = Vertex::origin(env.dim());
    for _ in 0..steps {
        x = step(env, p, &x, &mut rng);
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkMode {
    /// A fresh environment per walk.
    Annealed,
    /// One environment shared by all walks.
    Quenched,
}

/// `(environment seed, walk seed)` of walk `w`.
pub fn walk_seeds(master: u64, mode: WalkMode, w: u64) -> (u64, u64) {
    let env = match mode {
        WalkMode::Annealed => derive_seed(master, &[w, 0]),
        WalkMode::Quenched => derive_seed(master, &[u64::MAX, 0]),
    };
    (env, derive_seed(master, &[w, 1]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub dim: usize,
    pub p: f64,
    pub steps: u64,
    pub walks: u64,
    pub mode: WalkMode,
    /// `E[X_N]/N`.
    pub velocity: Vec<f64>,
    pub velocity_stderr: Vec<f64>,
    /// `v̂·𝟏` and its standard error.
    pub drift: f64,
    pub drift_stderr: f64,
    /// `(i, j, v̂_i − v̂_j, stderr)` for `i < j`.
    pub speed_differences: Vec<(usize, usize, f64, f64)>,
    /// Covariance of `(X_N − N v̂)/√N`, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub covariance_stderr: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    /// First-order standard error of the smallest eigenvalue.
    pub min_eigenvalue_stderr: f64,
}

impl WalkStats {
    /// `λ_min − 3σ` clears a numerical-zero floor of `1e-9·λ_max`.
    pub fn min_eigenvalue_positive(&self) -> bool {
        let floor = 1e-9 * self.eigenvalues.iter().cloned().fold(0.0, f64::max);
        self.min_eigenvalue - 3.0 * self.min_eigenvalue_stderr > floor
    }
}

/// Speed and fluctuation statistics over `walks` walks of `steps` steps.
pub fn ballisticity_report(dim: usize, p: f64, steps: u64, walks: u64, master_seed: u64, mode: WalkMode) -> WalkStats {
    assert!(walks >= 30, "need at least 30 walks");
    let ends: Vec<Vertex> = (0..walks)
        .into_par_iter()
        .map(|w| {
            let (e, s) = walk_seeds(master_seed, mode, w);
            walk_endpoint(&SiteField::new(e, dim), p, steps, s)
        })
        .collect();
    stats_from_endpoints(dim, p, steps, mode, &ends)
}

pub fn stats_from_endpoints(dim: usize, p: f64, steps: u64, mode: WalkMode, ends: &[Vertex]) -> WalkStats {
    let w = ends.len() as f64;
    let n = steps as f64;
    let xs: Vec<Vec<f64>> = ends
        .iter()
        .map(|e| e.coords().iter().map(|&c| c as f64).collect())
        .collect();
    let per_walk_mean = |f: &dyn Fn(&[f64]) -> f64| -> (f64, f64) {
        let vals: Vec<f64> = xs.iter().map(|x| f(x)).collect();
        crate::estimate::mean_stderr(&vals)
    };
    let mut velocity = Vec::new();
    let mut velocity_stderr = Vec::new();
    for i in 0..dim {
        let (m, se) = per_walk_mean(&|x| x[i] / n);
        velocity.push(m);
        velocity_stderr.push(se);
    }
    let (drift, drift_stderr) = per_walk_mean(&|x| x.iter().sum::<f64>() / n);
    let mut speed_differences = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            let (m, se) = per_walk_mean(&|x| (x[i] - x[j]) / n);
            speed_differences.push((i, j, m, se));
        }
    }
    let zs: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| (0..dim).map(|i| (x[i] - n * velocity[i]) / n.sqrt()).collect())
        .collect();
    let mut covariance = vec![vec![0.0; dim]; dim];
    let mut covariance_stderr = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let prods: Vec<f64> = zs.iter().map(|z| z[i] * z[j]).collect();
            let (m, se) = crate::estimate::mean_stderr(&prods);
            covariance[i][j] = m * w / (w - 1.0);
            covariance_stderr[i][j] = se;
        }
    }
    let mat = DMatrix::from_fn(dim, dim, |i, j| covariance[i][j]);
    let eig = SymmetricEigen::new(mat);
    let (imin, &min_eigenvalue) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let e = eig.eigenvectors.column(imin);
    let proj: Vec<f64> = zs
        .iter()
        .map(|z| {
            let s: f64 = (0..dim).map(|i| z[i] * e[i]).sum();
            s * s
        })
        .collect();
    let (_, min_eigenvalue_stderr) = crate::estimate::mean_stderr(&proj);
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    WalkStats {
        dim,
        p,
        steps,
        walks: ends.len() as u64,
        mode,
        velocity,
        velocity_stderr,
        drift,
        drift_stderr,
        speed_differences,
        covariance,
        covariance_stderr,
        eigenvalues,
        min_eigenvalue,
        min_eigenvalue_stderr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_are_valid_and_reproducible() {
        let env = SiteField::new(12, 3);
        let a = walk(&env, 0.7, 500, 4);
        assert_eq!(a.positions.len(), 501);
        assert!(a.is_valid());
        assert_eq!(a, walk(&env, 0.7, 500, 4));
        assert_eq!(*a.positions.last().unwrap(), walk_endpoint(&env, 0.7, 500, 4));
        let mut broken = a.clone();
        broken.positions[10] = broken.positions[10].add(&Vertex::new(&[5, 0, 0]));
        assert!(!broken.is_valid());
    }

    #[test]
    fn endpoint_speeds() {
        for (p, sign) in [(1.0, 1.0), (0.0, -1.0)] {
            let s = ballisticity_report(2, p, 400, 400, 7, WalkMode::Annealed);
            for (v, se) in s.velocity.iter().zip(&s.velocity_stderr) {
                assert!((v - sign * 0.5).abs() < 4.0 * se.max(1e-12));
            }
            assert_eq!(s.drift, sign);
        }
    }

    #[test]
    fn multinomial_covariance_at_p_one() {
        let d = 3;
        let s = ballisticity_report(d, 1.0, 300, 3000, 2, WalkMode::Annealed);
        let q = 1.0 / d as f64;
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { q * (1.0 - q) } else { -q * q };
                assert!((s.covariance[i][j] - want).abs() < 4.0 * s.covariance_stderr[i][j]);
            }
        }
        // X_N·𝟏 = N exactly, so 𝟏 spans the kernel.
        assert!(s.min_eigenvalue.abs() < 1e-9);
        assert!(!s.min_eigenvalue_positive());
    }

    #[test]
    fn quenched_walks_share_one_environment() {
        let (e0, w0) = walk_seeds(5, WalkMode::Quenched, 0);
        let (e1, w1) = walk_seeds(5, WalkMode::Quenched, 1);
        assert_eq!(e0, e1);
        assert_ne!(w0, w1);
        let (a0, _) = walk_seeds(5, WalkMode::Annealed, 0);
        let (a1, _) = walk_seeds(5, WalkMode::Annealed, 1);
        assert_ne!(a0, a1);
    }

    #[test]
    fn covariance_is_positive_semidefinite_below_one() {
        let s = ballisticity_report(2, 0.8, 500, 200, 3, WalkMode::Annealed);
        assert!(s.eigenvalues.iter().all(|&l| l > -1e-9));
        assert!(s.min_eigenvalue_positive());
    }
}
