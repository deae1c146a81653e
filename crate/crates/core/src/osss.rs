//! Influences, revealments, and the OSSS and Russo checks for the windowed
//! escape event `f_n`.
//!
//! Exact checks enumerate the window through [`crate::oracle`]; the Monte
//! Carlo estimators draw fresh fields per trial from a master seed.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{Eta, Grid, Window};
use crate::error::Error;
use crate::explore::{run_tree, TreeParams};
use crate::lattice::{derive_seed, SiteField, Sites, Vertex};
use crate::oracle::{
    exact_revealments, exact_revealments_by_tree, CountPolynomial, EscapeTable, RevealmentPolynomials, ThetaPolynomial,
};
use crate::reach::{escape_depth, escapes_cone_with, Searcher};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEstimate {
    pub v: Vertex,
    pub trials: u64,
    pub flips_changed: u64,
    pub estimate: f64,
    pub stderr: f64,
}

impl InfluenceEstimate {
    fn from_counts(v: Vertex, trials: u64, flips_changed: u64) -> Self {
        let (estimate, stderr) = binomial_mean(flips_changed, trials);
        Self {
            v,
            trials,
            flips_changed,
            estimate,
            stderr,
        }
    }
}

fn binomial_mean(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 0.0);
    }
    let m = successes as f64 / trials as f64;
    (m, (m * (1.0 - m) / trials as f64).sqrt())
}

/// Trial `t` of an experiment keyed by `master` gets its own field.
fn trial_field(master: u64, dim: usize, t: u64) -> SiteField {
    SiteField::new(derive_seed(master, &[t]), dim)
}

/// Vertices whose site the escape search read on `sites`. Flipping any other
/// site cannot change the windowed `f_n`.
fn read_sites<S: Sites>(searcher: &mut Searcher, sites: &S, n: i64, eta: Eta) -> (bool, Vec<Vertex>) {
    let f = escapes_cone_with(searcher, sites, n, eta);
    let w = searcher.window();
    let read = searcher
        .last_reached()
        .iter()
        .filter(|v| w.contains(v))
        .copied()
        .collect();
    (f, read)
}

/// Frequency over fresh fields that flipping `v` changes the windowed `f_n`.
#[allow(clippy::too_many_arguments)]
pub fn influence(
    dim: usize,
    master_seed: u64,
    p: f64,
    n: i64,
    eta: Eta,
    v: Vertex,
    window: Window,
    trials: u64,
) -> InfluenceEstimate {
    assert!(trials >= 1, "influence needs at least one trial");
    if !window.contains(&v) {
        return InfluenceEstimate::from_counts(v, trials, 0);
    }
    let changed = (0..trials)
        .into_par_iter()
        .map_init(
            || Searcher::new(dim, window),
            |s, t| {
                let field = trial_field(master_seed, dim, t);
                let a = escapes_cone_with(s, &field.at(p), n, eta);
                let b = escapes_cone_with(s, &field.flip(v).at(p), n, eta);
                u64::from(a != b)
            },
        )
        .sum();
    InfluenceEstimate::from_counts(v, trials, changed)
}

/// [`influence`] for every window site, sharing the fields across sites.
pub fn influences_mc(
    dim: usize,
    master_seed: u64,
    p: f64,
    n: i64,
    eta: Eta,
    window: Window,
    trials: u64,
) -> Vec<InfluenceEstimate> {
    assert!(trials >= 1, "influence needs at least one trial");
    let grid = Grid::new(dim, window.radius);
    let counts = (0..trials)
        .into_par_iter()
        .map_init(
            || Searcher::new(dim, window),
            |s, t| {
                let field = trial_field(master_seed, dim, t);
                let (f, read) = read_sites(s, &field.at(p), n, eta);
                let mut hits = Vec::new();
                for v in read {
                    if escapes_cone_with(s, &field.flip(v).at(p), n, eta) != f {
                        hits.push(grid.index(&v).unwrap());
                    }
                }
                hits
            },
        )
        .fold(
            || vec![0u64; grid.len()],
            |mut acc, hits| {
                for i in hits {
                    acc[i] += 1;
                }
                acc
            },
        )
        .reduce(|| vec![0u64; grid.len()], add_vecs);
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| InfluenceEstimate::from_counts(grid.vertex(i), trials, c))
        .collect()
}

fn add_vecs(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Monte Carlo revealments of `T_1, …, T_n` on the window sites, together
/// with `θ̂_0, …, θ̂_n` from the same fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealmentProfile {
    pub dim: usize,
    pub p: f64,
    pub n: i64,
    pub eta: Eta,
    pub window: Window,
    pub trials: u64,
    pub vertices: Vec<Vertex>,
    /// `counts[k - 1][i]`: fields on which `T_k` revealed `vertices[i]`.
    pub counts: Vec<Vec<u64>>,
    /// Per vertex, `Σ_trials (#k revealing it)^2`.
    pub summed_sq: Vec<u64>,
    /// `escapes[j]`: fields with `f_j = 1`, for `j = 0..=n`.
    pub escapes: Vec<u64>,
    /// `Σ_trials (#j with f_j = 1)^2`.
    pub escapes_sq: u64,
    /// `Σ_trials (1 + Σ_{k ≥ 1} f_k + 2d Σ_{k ≥ 0} f_k)^2`.
    pub derived_sq: u64,
}

impl RevealmentProfile {
    fn index(&self, v: &Vertex) -> Option<usize> {
        self.vertices.binary_search(v).ok()
    }

    /// `Rev_v(T_k)`; zero outside the window.
    pub fn revealment(&self, k: i64, v: &Vertex) -> f64 {
        match self.index(v) {
            Some(i) => self.counts[(k - 1) as usize][i] as f64 / self.trials as f64,
            None => 0.0,
        }
    }

    /// `Σ_k Rev_v(T_k)` and its standard error.
    pub fn summed(&self, v: &Vertex) -> (f64, f64) {
        let Some(i) = self.index(v) else {
            return (0.0, 0.0);
        };
        let s: u64 = self.counts.iter().map(|c| c[i]).sum();
        mean_and_stderr(s, self.summed_sq[i], self.trials)
    }

    pub fn theta_hat(&self, j: i64) -> f64 {
        self.escapes[j as usize] as f64 / self.trials as f64
    }

    /// `(2d + 1) Σ_{j ≤ n} θ̂_j` and its standard error.
    pub fn revealment_bound(&self) -> (f64, f64) {
        let s: u64 = self.escapes.iter().sum();
        let (m, se) = mean_and_stderr(s, self.escapes_sq, self.trials);
        let c = (2 * self.dim + 1) as f64;
        (c * m, c * se)
    }

    /// `1 + Σ_{1 ≤ k ≤ n} θ̂_k + 2d Σ_{k ≤ n} θ̂_k` and its standard error.
    ///
    /// This is what the union bound over `k` yields. Writing it as
    /// `(2d + 1) Σ_{k ≤ n} θ_k` needs `θ_0 = 1`, while `θ_0 = P(0 → K_η^c)`
    /// falls below one for `p > 0`; at high `p` the start vertex of a tree
    /// (revealment one) already exceeds [`Self::revealment_bound`].
    pub fn derived_revealment_bound(&self) -> (f64, f64) {
        let d2 = 2 * self.dim as u64;
        let rest: u64 = self.escapes[1..].iter().sum();
        let s = self.trials + rest + d2 * (rest + self.escapes[0]);
        mean_and_stderr(s, self.derived_sq, self.trials)
    }

    /// Largest `Σ_k Rev_v − bound` over the window against the derived
    /// bound, in units of the combined standard error (`−∞` when nothing
    /// was revealed).
    pub fn worst_bound_excess(&self) -> (Vertex, f64) {
        let (bound, bse) = self.derived_revealment_bound();
        self.vertices
            .iter()
            .map(|v| {
                let (m, se) = self.summed(v);
                let sigma = (se * se + bse * bse).sqrt();
                let z = if sigma > 0.0 {
                    (m - bound) / sigma
                } else if m > bound {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                };
                (*v, z)
            })
            .fold((Vertex::origin(self.dim), f64::NEG_INFINITY), |a, b| {
                if b.1 > a.1 {
                    b
                } else {
                    a
                }
            })
    }
}

fn mean_and_stderr(sum: u64, sum_sq: u64, trials: u64) -> (f64, f64) {
    let t = trials as f64;
    let m = sum as f64 / t;
    if trials < 2 {
        return (m, 0.0);
    }
    let var = ((sum_sq as f64 - t * m * m) / (t - 1.0)).max(0.0);
    (m, (var / t).sqrt())
}

#[derive(Clone)]
struct ProfileAcc {
    counts: Vec<Vec<u64>>,
    summed_sq: Vec<u64>,
    escapes: Vec<u64>,
    escapes_sq: u64,
    derived_sq: u64,
}

impl ProfileAcc {
    fn new(n: i64, len: usize) -> Self {
        Self {
            counts: vec![vec![0; len]; n as usize],
            summed_sq: vec![0; len],
            escapes: vec![0; n as usize + 1],
            escapes_sq: 0,
            derived_sq: 0,
        }
    }

    fn merge(mut self, o: Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(o.counts) {
            *a = add_vecs(std::mem::take(a), b);
        }
        self.summed_sq = add_vecs(self.summed_sq, o.summed_sq);
        self.escapes = add_vecs(self.escapes, o.escapes);
        self.escapes_sq += o.escapes_sq;
        self.derived_sq += o.derived_sq;
        self
    }
}

/// Runs `T_1, …, T_n` on `trials` fresh fields at level `p`.
pub fn revealment_profile(
    dim: usize,
    master_seed: u64,
    p: f64,
    n: i64,
    eta: Eta,
    window: Window,
    trials: u64,
) -> Result<RevealmentProfile, Error> {
    assert!(trials >= 1, "revealment profile needs at least one trial");
    let grid = Grid::new(dim, window.radius);
    let len = grid.len();
    let acc = (0..trials)
        .into_par_iter()
        .map_init(
            || Searcher::new(dim, window),
            |s, t| -> Result<ProfileAcc, Error> {
                let mut acc = ProfileAcc::new(n, len);
                let sites = trial_field(master_seed, dim, t).at(p);
                let mut per_vertex = vec![0u64; len];
                for k in 1..=n {
                    let trace = run_tree(&sites, TreeParams::new(dim, eta, n, k, window))?;
                    for r in &trace.revealed {
                        let i = grid.index(&r.vertex).expect("tree stays in the window");
                        acc.counts[(k - 1) as usize][i] += 1;
                        per_vertex[i] += 1;
                    }
                }
                for (sq, c) in acc.summed_sq.iter_mut().zip(per_vertex) {
                    *sq += c * c;
                }
                let depth = escape_depth(s, &sites, eta);
                let mut esc = 0;
                for j in 0..=n {
                    if depth > j {
                        acc.escapes[j as usize] += 1;
                        esc += 1;
                    }
                }
                acc.escapes_sq += esc * esc;
                let f0 = u64::from(depth > 0);
                let derived = 1 + (esc - f0) + 2 * dim as u64 * esc;
                acc.derived_sq += derived * derived;
                Ok(acc)
            },
        )
        .try_reduce(|| ProfileAcc::new(n, len), |a, b| Ok(a.merge(b)))?;
    Ok(RevealmentProfile {
        dim,
        p,
        n,
        eta,
        window,
        trials,
        vertices: (0..len).map(|i| grid.vertex(i)).collect(),
        counts: acc.counts,
        summed_sq: acc.summed_sq,
        escapes: acc.escapes,
        escapes_sq: acc.escapes_sq,
        derived_sq: acc.derived_sq,
    })
}

/// How exact revealments are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RevealmentMethod {
    /// Run the tree on every configuration.
    #[default]
    PerConfiguration,
    /// Walk the decision tree once, weighting leaves binomially.
    TreeWalk,
}

/// All exact polynomials for one window instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactInstance {
    pub dim: usize,
    pub n: i64,
    pub eta: Eta,
    pub window: Window,
    /// `θ_0, …, θ_n` on the window.
    pub theta: Vec<ThetaPolynomial>,
    pub influences: BTreeMap<Vertex, CountPolynomial>,
    /// `T_1, …, T_n`.
    pub revealments: Vec<RevealmentPolynomials>,
}

impl ExactInstance {
    pub fn build(
        dim: usize,
        n: i64,
        eta: Eta,
        window: Window,
        cap: u32,
        method: RevealmentMethod,
    ) -> Result<Self, Error> {
        let mut theta = Vec::with_capacity(n as usize + 1);
        for j in 0..n {
            theta.push(EscapeTable::build(dim, j, eta, window, cap)?.theta());
        }
        let table = EscapeTable::build(dim, n, eta, window, cap)?;
        theta.push(table.theta());
        let influences = table.influences();
        let revealments = (1..=n)
            .map(|k| match method {
                RevealmentMethod::PerConfiguration => exact_revealments(&table, k),
                RevealmentMethod::TreeWalk => exact_revealments_by_tree(dim, n, eta, window, k, cap),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            dim,
            n,
            eta,
            window,
            theta,
            influences,
            revealments,
        })
    }

    pub fn theta_n(&self) -> &ThetaPolynomial {
        &self.theta[self.n as usize]
    }

    /// Configurations on which some `T_k` disagreed with the direct event.
    pub fn tree_mismatches(&self) -> u64 {
        self.revealments.iter().map(|r| r.mismatches).sum()
    }

    pub fn osss_report(&self, p: f64) -> OsssReport {
        let theta = self.theta_n().eval(p);
        let variance = theta * (1.0 - theta);
        let sites: Vec<SiteTerm> = self
            .influences
            .iter()
            .map(|(v, inf)| SiteTerm {
                vertex: *v,
                influence: inf.eval(p),
                revealment: self.revealments.iter().map(|r| r.per_vertex[v].eval(p)).collect(),
            })
            .collect();
        let theta_j: Vec<f64> = self.theta.iter().map(|t| t.eval(p)).collect();
        OsssReport::assemble(p, self.dim, self.n, theta, variance, &theta_j, sites, true)
    }

    /// The single-tree and `k`-summed inequalities in exact arithmetic at a
    /// rational `p`.
    pub fn osss_holds_exact(&self, p: &BigRational) -> ExactOsss {
        let theta = self.theta_n().eval_exact(p);
        let var = &theta * (BigRational::from_integer(1.into()) - &theta);
        let infl: Vec<(Vertex, BigRational)> = self.influences.iter().map(|(v, i)| (*v, i.eval_exact(p))).collect();
        let mut per_k = Vec::new();
        let mut summed = BigRational::zero();
        for r in &self.revealments {
            let bound = infl.iter().fold(BigRational::zero(), |acc, (v, i)| {
                acc + i * r.per_vertex[v].eval_exact(p)
            });
            per_k.push(bound >= var);
            summed += bound;
        }
        let lhs = BigRational::from_integer(BigInt::from(self.n)) * &var;
        ExactOsss {
            per_tree: per_k,
            summed: summed >= lhs,
        }
    }

    /// `−θ_n′(p)` against `Σ_v Inf_v(p)` on a grid.
    pub fn russo_report(&self, p_grid: &[f64]) -> RussoReport {
        russo_report(self.n, self.eta, self.window, self.theta_n(), &self.influences, p_grid)
    }

    /// `−θ_n′(p) ≥ (1/(4d)) (n/S_n) θ_n(p)(1 − θ_n(p))` at `p = j/points−1`,
    /// in exact arithmetic.
    pub fn differential_check(&self, points: u32) -> DifferentialReport {
        assert!(points >= 2);
        let den = points as i64 - 1;
        let rows = (0..=den)
            .map(|j| {
                let p = BigRational::new(BigInt::from(j), BigInt::from(den));
                let theta = self.theta_n().eval_exact(&p);
                let lhs = -self.theta_n().derivative_exact(&p);
                let s_n = self
                    .theta
                    .iter()
                    .fold(BigRational::zero(), |acc, t| acc + t.eval_exact(&p));
                let one = BigRational::from_integer(1.into());
                let var = &theta * (&one - &theta);
                let rhs = if var.is_zero() {
                    BigRational::zero()
                } else {
                    BigRational::new(BigInt::from(self.n), BigInt::from(4 * self.dim as i64)) * var / &s_n
                };
                DifferentialRow {
                    p: format!("{j}/{den}"),
                    p_value: j as f64 / den as f64,
                    lhs: to_f64(&lhs),
                    rhs: to_f64(&rhs),
                    s_n: to_f64(&s_n),
                    holds: lhs >= rhs,
                }
            })
            .collect::<Vec<_>>();
        DifferentialReport {
            n: self.n,
            dim: self.dim,
            eta: self.eta,
            window: self.window,
            all_hold: rows.iter().all(|r| r.holds),
            rows,
        }
    }
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactOsss {
    pub per_tree: Vec<bool>,
    pub summed: bool,
}

impl ExactOsss {
    pub fn all(&self) -> bool {
        self.summed && self.per_tree.iter().all(|&b| b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteTerm {
    pub vertex: Vertex,
    pub influence: f64,
    /// `Rev_v(T_k)` for `k = 1..=n`.
    pub revealment: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeBound {
    pub k: i64,
    /// `Σ_v Inf_v Rev_v(T_k)`.
    pub bound: f64,
    /// `bound − Var(f_n)`.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsssReport {
    pub p: f64,
    pub n: i64,
    pub exact: bool,
    pub theta: f64,
    pub variance: f64,
    pub total_influence: f64,
    pub trees: Vec<TreeBound>,
    /// `n θ_n (1 − θ_n)`.
    pub summed_lhs: f64,
    /// `Σ_v Inf_v Σ_k Rev_v(T_k)`.
    pub summed_rhs: f64,
    pub summed_slack: f64,
    /// `max_v Σ_k Rev_v(T_k)`.
    pub max_revealment_sum: f64,
    /// `(2d + 1) Σ_{j ≤ n} θ_j`.
    pub revealment_bound: f64,
    /// `1 + Σ_{1 ≤ j ≤ n} θ_j + 2d Σ_{j ≤ n} θ_j`; see
    /// [`RevealmentProfile::derived_revealment_bound`].
    pub derived_revealment_bound: f64,
    pub sites: Vec<SiteTerm>,
}

impl OsssReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        p: f64,
        dim: usize,
        n: i64,
        theta: f64,
        variance: f64,
        theta_j: &[f64],
        sites: Vec<SiteTerm>,
        exact: bool,
    ) -> Self {
        let s_n: f64 = theta_j.iter().sum();
        let trees: Vec<TreeBound> = (0..n as usize)
            .map(|k| {
                let bound: f64 = sites.iter().map(|s| s.influence * s.revealment[k]).sum();
                TreeBound {
                    k: k as i64 + 1,
                    bound,
                    slack: bound - variance,
                }
            })
            .collect();
        let summed_rhs: f64 = trees.iter().map(|t| t.bound).sum();
        let summed_lhs = n as f64 * variance;
        Self {
            p,
            n,
            exact,
            theta,
            variance,
            total_influence: sites.iter().map(|s| s.influence).sum(),
            summed_lhs,
            summed_rhs,
            summed_slack: summed_rhs - summed_lhs,
            max_revealment_sum: sites
                .iter()
                .map(|s| s.revealment.iter().sum::<f64>())
                .fold(0.0, f64::max),
            revealment_bound: (2 * dim + 1) as f64 * s_n,
            derived_revealment_bound: 1.0 + (s_n - theta_j[0]) + 2.0 * dim as f64 * s_n,
            trees,
            sites,
        }
    }
}

/// Source of the terms in [`osss_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    Exact { cap: u32, method: RevealmentMethod },
    MonteCarlo { master_seed: u64, trials: u64 },
}

/// Single-tree and `k`-summed OSSS inequalities at level `p`.
pub fn osss_check(dim: usize, p: f64, n: i64, eta: Eta, window: Window, mode: CheckMode) -> Result<OsssReport, Error> {
    match mode {
        CheckMode::Exact { cap, method } => Ok(ExactInstance::build(dim, n, eta, window, cap, method)?.osss_report(p)),
        CheckMode::MonteCarlo { master_seed, trials } => {
            let profile = revealment_profile(dim, derive_seed(master_seed, &[0]), p, n, eta, window, trials)?;
            let infl = influences_mc(dim, derive_seed(master_seed, &[1]), p, n, eta, window, trials);
            let sites: Vec<SiteTerm> = infl
                .iter()
                .map(|e| SiteTerm {
                    vertex: e.v,
                    influence: e.estimate,
                    revealment: (1..=n).map(|k| profile.revealment(k, &e.v)).collect(),
                })
                .collect();
            let theta = profile.theta_hat(n);
            let theta_j: Vec<f64> = (0..=n).map(|j| profile.theta_hat(j)).collect();
            Ok(OsssReport::assemble(
                p,
                dim,
                n,
                theta,
                theta * (1.0 - theta),
                &theta_j,
                sites,
                false,
            ))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RussoRow {
    pub p: f64,
    pub minus_derivative: f64,
    pub total_influence: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RussoReport {
    pub n: i64,
    pub eta: Eta,
    pub window: Window,
    pub rows: Vec<RussoRow>,
    pub max_discrepancy: f64,
    pub identical_polynomials: bool,
}

/// Russo's formula on the window, both sides from enumeration.
pub fn russo_check(
    dim: usize,
    n: i64,
    eta: Eta,
    window: Window,
    p_grid: &[f64],
    cap: u32,
) -> Result<RussoReport, Error> {
    let table = EscapeTable::build(dim, n, eta, window, cap)?;
    Ok(russo_report(
        n,
        eta,
        window,
        &table.theta(),
        &table.influences(),
        p_grid,
    ))
}

fn russo_report(
    n: i64,
    eta: Eta,
    window: Window,
    theta: &ThetaPolynomial,
    influences: &BTreeMap<Vertex, CountPolynomial>,
    p_grid: &[f64],
) -> RussoReport {
    let rows: Vec<RussoRow> = p_grid
        .iter()
        .map(|&p| {
            let minus_derivative = -theta.derivative(p);
            let total_influence: f64 = influences.values().map(|i| i.eval(p)).sum();
            RussoRow {
                p,
                minus_derivative,
                total_influence,
                discrepancy: (minus_derivative - total_influence).abs(),
            }
        })
        .collect();
    let max_discrepancy = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    RussoReport {
        n,
        eta,
        window,
        rows,
        max_discrepancy,
        identical_polynomials: russo_identity_exact(theta, influences),
    }
}

/// Whether `Σ_v Inf_v` and `−θ_n′` agree as polynomials, checked at
/// `N + 3` distinct rational points (both have degree at most `N`).
fn russo_identity_exact(theta: &ThetaPolynomial, influences: &BTreeMap<Vertex, CountPolynomial>) -> bool {
    let m = theta.site_count as i64 + 2;
    (0..=m).all(|j| {
        let p = BigRational::new(BigInt::from(j), BigInt::from(m));
        let lhs = -theta.derivative_exact(&p);
        let rhs = influences
            .values()
            .fold(BigRational::zero(), |acc, i| acc + i.eval_exact(&p));
        lhs == rhs
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentialRow {
    pub p: String,
    pub p_value: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub s_n: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentialReport {
    pub n: i64,
    pub dim: usize,
    pub eta: Eta,
    pub window: Window,
    pub rows: Vec<DifferentialRow>,
    pub all_hold: bool,
}
