//! Monte Carlo estimators: `θ_n(p)` curves and their decay rate, finite-size
//! critical points, the shape function `γ` and its cluster cloud.
//!
//! Trial `t` of an experiment with master seed `m` always uses the field
//! `derive_seed(m, [t])`, shared by every `p`, `n` and window of that
//! experiment. Per-trial results are merged by integer addition, so worker
//! count and scheduling never change an estimate.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{containment_depth, Cone, Eta, Window};
use crate::error::EstimateError;
use crate::lattice::{derive_seed, ModelKind, SiteField, Sites, Vertex};
use crate::reach::{escapes_cone_with, fill_rays, forward_cluster, Searcher};

/// How the window radius follows `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowPolicy {
    Fixed(u32),
    /// `r = factor · n`.
    Scaled(u32),
}

impl WindowPolicy {
    pub fn window(self, n: i64) -> Window {
        match self {
            WindowPolicy::Fixed(r) => Window::new(r),
            WindowPolicy::Scaled(f) => Window::new(f * n.max(0) as u32),
        }
    }
}

pub fn trial_field(master: u64, dim: usize, trial: u64) -> SiteField {
    SiteField::new(derive_seed(master, &[trial]), dim)
}

/// Binomial counts for one `(p, n)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaCell {
    pub p: f64,
    pub n: i64,
    pub successes: u64,
    pub trials: u64,
    pub window: u32,
    /// Trials with `f_n = 0` whose search was cut by the window.
    pub truncated: u64,
}

impl ThetaCell {
    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn stderr(&self) -> f64 {
        let m = self.estimate();
        (m * (1.0 - m) / self.trials as f64).sqrt()
    }

    pub fn truncation_rate(&self) -> f64 {
        self.truncated as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaCurve {
    pub dim: usize,
    pub eta: Eta,
    pub policy: WindowPolicy,
    /// Row-major over `(p, n)` in the order given to [`estimate_theta`].
    pub cells: Vec<ThetaCell>,
}

impl ThetaCurve {
    pub fn cell(&self, p: f64, n: i64) -> Option<&ThetaCell> {
        self.cells.iter().find(|c| c.p == p && c.n == n)
    }

    /// Cells at level `p`, ordered by `n`.
    pub fn level(&self, p: f64) -> Vec<&ThetaCell> {
        let mut v: Vec<_> = self.cells.iter().filter(|c| c.p == p).collect();
        v.sort_by_key(|c| c.n);
        v
    }
}

/// `f_n` at every `(p, n)` on one field, `out[i][j]` for `p_grid[i]`,
/// `n_list[j]`, plus whether each non-escape was cut by the window.
pub fn theta_sample(
    field: &SiteField,
    p_grid: &[f64],
    n_list: &[i64],
    eta: Eta,
    policy: WindowPolicy,
) -> Vec<Vec<(bool, bool)>> {
    let dim = field.dim();
    match policy {
        WindowPolicy::Fixed(r) => {
            let mut s = Searcher::new(dim, Window::new(r));
            p_grid
                .iter()
                .map(|&p| {
                    let (depth, cut) = depth_and_cut(&mut s, &field.at(p), eta);
                    n_list.iter().map(|&n| (depth > n, depth <= n && cut)).collect()
                })
                .collect()
        }
        WindowPolicy::Scaled(_) => {
            let mut searchers: Vec<Searcher> = n_list.iter().map(|&n| Searcher::new(dim, policy.window(n))).collect();
            p_grid
                .iter()
                .map(|&p| {
                    let sites = field.at(p);
                    n_list
                        .iter()
                        .zip(searchers.iter_mut())
                        .map(|(&n, s)| escape_and_cut(s, &sites, n, eta))
                        .collect()
                })
                .collect()
        }
    }
}

fn depth_and_cut<S: Sites>(s: &mut Searcher, sites: &S, eta: Eta) -> (i64, bool) {
    let mut depth = 0;
    let out = s.run(ModelKind::HalfOrthant, sites, Vertex::origin(sites.dim()), |x| {
        depth = depth.max(containment_depth(eta, x));
        false
    });
    (depth, out.frontier_hit_window)
}

fn escape_and_cut<S: Sites>(s: &mut Searcher, sites: &S, n: i64, eta: Eta) -> (bool, bool) {
    let cone = Cone::new(eta, n);
    let out = s.run(ModelKind::HalfOrthant, sites, Vertex::origin(sites.dim()), |x| {
        !cone.contains(x)
    });
    (out.stopped, !out.stopped && out.frontier_hit_window)
}

/// Binomial estimates of `θ_n(p)` over `trials` coupled fields.
pub fn estimate_theta(
    dim: usize,
    master_seed: u64,
    p_grid: &[f64],
    n_list: &[i64],
    eta: Eta,
    policy: WindowPolicy,
    trials: u64,
) -> ThetaCurve {
    assert!(trials >= 1, "estimate_theta needs at least one trial");
    let cells = p_grid.len() * n_list.len();
    let zero = || vec![(0u64, 0u64); cells];
    let counts = (0..trials)
        .into_par_iter()
        .fold(zero, |mut acc, t| {
            let sample = theta_sample(&trial_field(master_seed, dim, t), p_grid, n_list, eta, policy);
            for (i, row) in sample.iter().enumerate() {
                for (j, &(f, cut)) in row.iter().enumerate() {
                    let a = &mut acc[i * n_list.len() + j];
                    a.0 += u64::from(f);
                    a.1 += u64::from(cut);
                }
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.0 += y.0;
                x.1 += y.1;
            }
            a
        });
    let mut out = Vec::with_capacity(cells);
    for (i, &p) in p_grid.iter().enumerate() {
        for (j, &n) in n_list.iter().enumerate() {
            let (successes, truncated) = counts[i * n_list.len() + j];
            out.push(ThetaCell {
                p,
                n,
                successes,
                trials,
                window: policy.window(n).radius,
                truncated,
            });
        }
    }
    ThetaCurve {
        dim,
        eta,
        policy,
        cells: out,
    }
}

/// Log-linear fit of `θ̂_n` against `n` at one level `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub p: f64,
    pub eta: Eta,
    pub n_range: (i64, i64),
    /// Fitted slope of `log θ̂_n`; `c_p = −slope`.
    pub slope: f64,
    pub c_p: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r2: f64,
    pub censored_levels: Vec<i64>,
    /// `(n, Σ θ̂_k over estimated levels k ≤ n)`.
    pub partial_sums: Vec<(i64, f64)>,
    /// `c_p > 3·stderr` and `r2 ≥ 0.9`.
    pub decaying: bool,
}

/// Weighted least squares of `log θ̂_n` on `n`, with delta-method weights
/// `successes / (1 − θ̂ + 1/trials)`. Levels with fewer than `min_successes`
/// successes are censored. The slope error is inflated by the reduced `χ²`
/// when the residuals exceed their nominal variance.
pub fn fit_decay(curve: &ThetaCurve, p: f64, min_successes: u64) -> Result<DecayFit, EstimateError> {
    let level = curve.level(p);
    if level.is_empty() {
        return Err(EstimateError::MissingLevel(p));
    }
    let min_successes = min_successes.max(1);
    let (used, censored): (Vec<&&ThetaCell>, Vec<&&ThetaCell>) =
        level.iter().partition(|c| c.successes >= min_successes);
    if used.len() < 3 {
        return Err(EstimateError::InsufficientData {
            usable: used.len(),
            min_successes,
        });
    }
    let pts: Vec<(f64, f64, f64)> = used
        .iter()
        .map(|c| {
            let th = c.estimate();
            let w = c.successes as f64 / (1.0 - th + 1.0 / c.trials as f64);
            (c.n as f64, th.ln(), w)
        })
        .collect();
    let sw: f64 = pts.iter().map(|q| q.2).sum();
    let xm = pts.iter().map(|q| q.2 * q.0).sum::<f64>() / sw;
    let ym = pts.iter().map(|q| q.2 * q.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|q| q.2 * (q.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|q| q.2 * (q.0 - xm) * (q.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|q| q.2 * (q.1 - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = pts.iter().map(|q| q.2 * (q.1 - intercept - slope * q.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let chi2 = rss / (pts.len() as f64 - 2.0);
    let stderr = (chi2.max(1.0) / sxx).sqrt();
    let c_p = -slope;
    let mut acc = 0.0;
    let partial_sums = level
        .iter()
        .map(|c| {
            acc += c.estimate();
            (c.n, acc)
        })
        .collect();
    Ok(DecayFit {
        p,
        eta: curve.eta,
        n_range: (used[0].n, used[used.len() - 1].n),
        slope,
        c_p,
        stderr,
        intercept,
        r2,
        censored_levels: censored.iter().map(|c| c.n).collect(),
        partial_sums,
        decaying: c_p > 3.0 * stderr && r2 >= 0.9,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalMethod {
    Bisection,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub eta: Option<Eta>,
    pub p_lo: f64,
    pub p_hi: f64,
    /// Statistic at `p_lo` (above the threshold) and `p_hi` (at or below).
    pub stat_lo: f64,
    pub stat_hi: f64,
    pub method: CriticalMethod,
    pub n: i64,
    pub window: u32,
    pub threshold: f64,
    pub trials: u64,
}

impl CriticalEstimate {
    pub fn width(&self) -> f64 {
        self.p_hi - self.p_lo
    }
}

/// Bisection on a nonincreasing statistic.
fn bisect(stat: impl Fn(f64) -> f64, threshold: f64, tol: f64) -> Result<(f64, f64, f64, f64), EstimateError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut s_lo, mut s_hi) = (stat(lo), stat(hi));
    if s_lo <= threshold || s_hi > threshold {
        return Err(EstimateError::BracketFailure {
            threshold,
            at_zero: s_lo,
            at_one: s_hi,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let s = stat(mid);
        if s > threshold {
            lo = mid;
            s_lo = s;
        } else {
            hi = mid;
            s_hi = s;
        }
    }
    Ok((lo, hi, s_lo, s_hi))
}

fn frequency(trials: u64, event: impl Fn(u64) -> bool + Sync) -> f64 {
    let hits: u64 = (0..trials).into_par_iter().map(|t| u64::from(event(t))).sum();
    hits as f64 / trials as f64
}

/// Finite-size proxy for `p̃_c(η)`: where `θ̂_n` crosses `threshold`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_ptilde(
    dim: usize,
    master_seed: u64,
    eta: Eta,
    n: i64,
    window: Window,
    trials: u64,
    tol: f64,
    threshold: f64,
) -> Result<CriticalEstimate, EstimateError> {
    let stat = |p: f64| {
        frequency(trials, |t| {
            let field = trial_field(master_seed, dim, t);
            escapes_cone_with(&mut Searcher::new(dim, window), &field.at(p), n, eta)
        })
    };
    let (p_lo, p_hi, stat_lo, stat_hi) = bisect(stat, threshold, tol)?;
    Ok(CriticalEstimate {
        eta: Some(eta),
        p_lo,
        p_hi,
        stat_lo,
        stat_hi,
        method: CriticalMethod::Bisection,
        n,
        window: window.radius,
        threshold,
        trials,
    })
}

/// Whether the half-orthant cluster of `0` reaches `k·e1` for some `k < −m`
/// inside the window, i.e. windowed `L*_0 < −m`.
pub fn leftmost_below<S: Sites>(s: &mut Searcher, sites: &S, m: i64) -> bool {
    s.run(ModelKind::HalfOrthant, sites, Vertex::origin(sites.dim()), |x| {
        (x.coord(0) as i64) < -m && x.coords()[1..].iter().all(|&c| c == 0)
    })
    .stopped
}

/// Finite-size proxy for `p_c`: where `P̂(L*_0 < −m)` crosses `threshold`.
/// `depth` defaults to half the window radius.
pub fn estimate_pc(
    dim: usize,
    master_seed: u64,
    window: Window,
    depth: Option<u32>,
    trials: u64,
    tol: f64,
    threshold: f64,
) -> Result<CriticalEstimate, EstimateError> {
    let m = depth.unwrap_or(window.radius / 2) as i64;
    let stat = |p: f64| {
        frequency(trials, |t| {
            let field = trial_field(master_seed, dim, t);
            leftmost_below(&mut Searcher::new(dim, window), &field.at(p), m)
        })
    };
    let (p_lo, p_hi, stat_lo, stat_hi) = bisect(stat, threshold, tol)?;
    Ok(CriticalEstimate {
        eta: None,
        p_lo,
        p_hi,
        stat_lo,
        stat_hi,
        method: CriticalMethod::Bisection,
        n: m,
        window: window.radius,
        threshold,
        trials,
    })
}

/// Every `k` for which `k𝟏 + n·u` lies in the window.
pub fn beta_range(u: &Vertex, n: i64, window: Window) -> RangeInclusive<i64> {
    let r = window.radius as i64;
    let lo = u.coords().iter().map(|&c| -r - n * c as i64).max().unwrap();
    let hi = u.coords().iter().map(|&c| r - n * c as i64).min().unwrap();
    lo..=hi
}

/// `β_n(u)` on one field.
pub fn beta_sample(field: &SiteField, p: f64, u: &Vertex, n: i64, window: Window) -> Option<i64> {
    let cluster = forward_cluster(ModelKind::Orthant, &field.at(p), Vertex::origin(field.dim()), window);
    cluster.beta(u, n, Some(beta_range(u, n, window))).value
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaLevel {
    pub n: i64,
    pub window: u32,
    /// Mean of `β_n(u)/n`.
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub u: Vertex,
    pub p: f64,
    pub levels: Vec<GammaLevel>,
    /// Estimate at the largest `n`.
    pub gamma_hat: f64,
    pub stderr: f64,
}

/// Per-trial `β_n(u)` for every `n`, one cluster per distinct window.
pub fn beta_samples(field: &SiteField, p: f64, u: &Vertex, n_list: &[i64], policy: WindowPolicy) -> Vec<Option<i64>> {
    let sites = field.at(p);
    let origin = Vertex::origin(field.dim());
    let mut cached: Option<(u32, crate::reach::ReachResult)> = None;
    n_list
        .iter()
        .map(|&n| {
            let w = policy.window(n);
            if cached.as_ref().map(|c| c.0) != Some(w.radius) {
                cached = Some((w.radius, forward_cluster(ModelKind::Orthant, &sites, origin, w)));
            }
            let cluster = &cached.as_ref().unwrap().1;
            cluster.beta(u, n, Some(beta_range(u, n, w))).value
        })
        .collect()
}

/// Averages `β_n(u)/n` over trials for each `n`.
pub fn estimate_gamma(
    master_seed: u64,
    p: f64,
    u: &Vertex,
    n_list: &[i64],
    policy: WindowPolicy,
    trials: u64,
) -> Result<ShapeEstimate, EstimateError> {
    assert!(trials >= 2 && !n_list.is_empty());
    let dim = u.dim();
    let samples: Vec<Vec<Option<i64>>> = (0..trials)
        .into_par_iter()
        .map(|t| beta_samples(&trial_field(master_seed, dim, t), p, u, n_list, policy))
        .collect();
    let missing = samples.iter().flatten().filter(|b| b.is_none()).count();
    if missing > 0 {
        return Err(EstimateError::TruncationDominated {
            missing,
            total: samples.len() * n_list.len(),
        });
    }
    let levels: Vec<GammaLevel> = n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let xs: Vec<f64> = samples.iter().map(|s| s[j].unwrap() as f64 / n as f64).collect();
            let (mean, stderr) = mean_stderr(&xs);
            GammaLevel {
                n,
                window: policy.window(n).radius,
                mean,
                stderr,
                samples: trials,
            }
        })
        .collect();
    let last = levels.iter().max_by_key(|l| l.n).unwrap();
    Ok(ShapeEstimate {
        u: *u,
        p,
        gamma_hat: last.mean,
        stderr: last.stderr,
        levels,
    })
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `(1/n)·(C_0 + e1·N_0) ∩ Λ_r` for one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeCloud {
    pub seed: u64,
    pub n: i64,
    pub window: u32,
    pub points: Vec<Vec<f64>>,
}

pub fn shape_cloud(field: &SiteField, p: f64, n: i64, window: Window) -> ShapeCloud {
    let cluster = forward_cluster(ModelKind::Orthant, &field.at(p), Vertex::origin(field.dim()), window);
    let filled = fill_rays(&cluster.reached, window);
    ShapeCloud {
        seed: field.seed(),
        n,
        window: window.radius,
        points: filled
            .iter()
            .map(|v| v.coords().iter().map(|&c| c as f64 / n as f64).collect())
            .collect(),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Hausdorff distance between two point sets (`∞` if exactly one is empty).
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let directed = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// `γ̂` extended to a point `x` by positive homogeneity from the fan
/// direction closest in angle; the largest value over the cloud measures
/// how far the cloud sticks out of `{γ̂ ≤ 0}`.
pub fn containment_excess(points: &[Vec<f64>], fan: &[(Vec<f64>, f64)]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    points
        .iter()
        .filter(|x| norm(x) > 0.0)
        .map(|x| {
            let nx = norm(x);
            let (dir, g) = fan
                .iter()
                .max_by(|a, b| {
                    let ca = cosine(x, &a.0);
                    let cb = cosine(x, &b.0);
                    ca.total_cmp(&cb)
                })
                .expect("nonempty fan");
            g * nx / norm(dir)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Orthant `L_v` against half-orthant `L*_v` on shared fields at one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeftmostCoupling {
    pub window: u32,
    pub samples: u64,
    /// Samples with both values defined.
    pub defined: u64,
    /// Samples with `L*_v ≤ L_v`.
    pub dominated: u64,
    /// Samples with `L*_v = L_v`.
    pub equal: u64,
    /// Samples where the orthant search was not cut by the window.
    pub uncut: u64,
}

impl LeftmostCoupling {
    pub fn equality_rate(&self) -> f64 {
        self.equal as f64 / self.samples as f64
    }
}

/// `L_v` and `L*_v` on one field; `None` when the line misses the window's
/// part of the cluster.
pub fn leftmost_pair(field: &SiteField, p: f64, v: &Vertex, window: Window) -> (Option<i64>, Option<i64>, bool) {
    let sites = field.at(p);
    let origin = Vertex::origin(field.dim());
    let range = Some(line_range(v, window));
    let orth = forward_cluster(ModelKind::Orthant, &sites, origin, window);
    let half = forward_cluster(ModelKind::HalfOrthant, &sites, origin, window);
    (
        orth.l_profile(v, range.clone()).value,
        half.l_profile(v, range).value,
        orth.frontier_hit_window,
    )
}

/// Every `k` for which `v + k·e1` could lie in the window.
fn line_range(v: &Vertex, window: Window) -> RangeInclusive<i64> {
    let r = window.radius as i64;
    (-r - v.coord(0) as i64)..=(r - v.coord(0) as i64)
}

pub fn leftmost_coupling(
    dim: usize,
    master_seed: u64,
    p: f64,
    v: &Vertex,
    window: Window,
    trials: u64,
) -> LeftmostCoupling {
    let rows: Vec<(bool, bool, bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (l, ls, cut) = leftmost_pair(&trial_field(master_seed, dim, t), p, v, window);
            match (l, ls) {
                (Some(l), Some(ls)) => (true, ls <= l, ls == l, !cut),
                // L_v undefined in the window while L*_v is: still dominated.
                (None, Some(_)) => (false, true, false, !cut),
                (None, None) => (false, true, true, !cut),
                (Some(_), None) => (false, false, false, !cut),
            }
        })
        .collect();
    let count = |f: fn(&(bool, bool, bool, bool)) -> bool| rows.iter().filter(|r| f(r)).count() as u64;
    LeftmostCoupling {
        window: window.radius,
        samples: trials,
        defined: count(|r| r.0),
        dominated: count(|r| r.1),
        equal: count(|r| r.2),
        uncut: count(|r| r.3),
    }
}
