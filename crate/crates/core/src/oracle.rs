//! Brute-force ground truth on small windows.
//!
//! Every configuration of the `N = |Λ_r|` window sites is enumerated as a
//! bitmask (bit `i` is `ω` at the `i`-th window point in lexicographic
//! order). The windowed `f_n` is evaluated per configuration by a bit-parallel
//! search that shares no code with [`crate::reach`], and probabilities are
//! kept as count polynomials `Σ_j c_j p^j (1−p)^{N−j}`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{Cone, Eta, Grid, Window};
use crate::error::OracleError;
use crate::explore::{Explorer, Step, TreeParams};
use crate::lattice::{Direction, Sites, Vertex};

/// Default limit on enumerated window sites.
pub const DEFAULT_SITE_CAP: u32 = 26;

/// Absolute limit: the escape table holds `2^N` bits.
pub const MAX_SITE_CAP: u32 = 32;

/// `Σ_j counts[j] · p^j (1−p)^{N−j}` where `counts[j]` counts configurations
/// with `j` one-sites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountPolynomial {
    pub site_count: u32,
    pub counts: Vec<u64>,
}

/// `θ_n(p)` on a window.
pub type ThetaPolynomial = CountPolynomial;

impl CountPolynomial {
    pub fn zero(site_count: u32) -> Self {
        Self {
            site_count,
            counts: vec![0; site_count as usize + 1],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn eval(&self, p: f64) -> f64 {
        let n = self.site_count as i32;
        let q = 1.0 - p;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(j, &c)| c as f64 * p.powi(j as i32) * q.powi(n - j as i32))
            .sum()
    }

    /// `d/dp` of [`CountPolynomial::eval`].
    pub fn derivative(&self, p: f64) -> f64 {
        let n = self.site_count as i32;
        let q = 1.0 - p;
        let mut s = 0.0;
        for (j, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let j = j as i32;
            let c = c as f64;
            if j > 0 {
                s += c * j as f64 * p.powi(j - 1) * q.powi(n - j);
            }
            if j < n {
                s -= c * (n - j) as f64 * p.powi(j) * q.powi(n - j - 1);
            }
        }
        s
    }

    pub fn eval_exact(&self, p: &BigRational) -> BigRational {
        let n = self.site_count as usize;
        let q = BigRational::one() - p;
        let mut s = BigRational::zero();
        for (j, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            s += BigRational::from_integer(BigInt::from(c)) * pow(p, j) * pow(&q, n - j);
        }
        s
    }

    pub fn derivative_exact(&self, p: &BigRational) -> BigRational {
        let n = self.site_count as usize;
        let q = BigRational::one() - p;
        let mut s = BigRational::zero();
        for (j, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = BigRational::from_integer(BigInt::from(c));
            if j > 0 {
                s += &c * BigRational::from_integer(BigInt::from(j)) * pow(p, j - 1) * pow(&q, n - j);
            }
            if j < n {
                s -= &c * BigRational::from_integer(BigInt::from(n - j)) * pow(p, j) * pow(&q, n - j - 1);
            }
        }
        s
    }

    fn add_assign(&mut self, other: &CountPolynomial) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    num_traits::pow(x.clone(), e)
}

/// Binomial coefficients `C(n, k)` for `n ≤ 64`.
pub fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    let mut r = 1u128;
    for i in 0..k {
        r = r * (n as u128 - i as u128) / (i as u128 + 1);
    }
    r as u64
}

/// A window configuration given by a bitmask, for driving general code paths.
#[derive(Clone, Copy, Debug)]
pub struct WindowMask {
    pub grid: Grid,
    pub mask: u64,
    /// Value reported for sites outside the window (never read by windowed code).
    pub outside: bool,
}

impl Sites for WindowMask {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn is_one(&self, v: &Vertex) -> bool {
        match self.grid.index(v) {
            Some(i) => self.mask >> i & 1 == 1,
            None => self.outside,
        }
    }
}

/// Bit-parallel evaluator of the windowed half-orthant escape event.
#[derive(Clone, Debug)]
pub struct MaskEvaluator {
    grid: Grid,
    origin: u32,
    pos: Vec<u64>,
    neg: Vec<u64>,
    pos_escape: Vec<bool>,
    neg_escape: Vec<bool>,
}

impl MaskEvaluator {
    pub fn new(dim: usize, n: i64, eta: Eta, window: Window) -> Self {
        let grid = Grid::new(dim, window.radius);
        let cone = Cone::new(eta, n);
        let len = grid.len();
        assert!(len <= 64, "mask evaluator needs at most 64 sites");
        let mut pos = vec![0u64; len];
        let mut neg = vec![0u64; len];
        let mut pos_escape = vec![false; len];
        let mut neg_escape = vec![false; len];
        for i in 0..len {
            let v = grid.vertex(i);
            for dir in Direction::all(dim) {
                let w = v.step(dir);
                let (mask, esc) = if dir.is_positive() {
                    (&mut pos[i], &mut pos_escape[i])
                } else {
                    (&mut neg[i], &mut neg_escape[i])
                };
                if !cone.contains(&w) {
                    *esc = true;
                } else if let Some(j) = grid.index(&w) {
                    *mask |= 1 << j;
                }
            }
        }
        Self {
            grid,
            origin: grid.index(&Vertex::origin(dim)).unwrap() as u32,
            pos,
            neg,
            pos_escape,
            neg_escape,
        }
    }

    pub fn site_count(&self) -> u32 {
        self.grid.len() as u32
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn escapes(&self, mask: u64) -> bool {
        let mut reached = 1u64 << self.origin;
        let mut frontier = reached;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let one = mask >> v & 1 == 1;
            if self.pos_escape[v] || (!one && self.neg_escape[v]) {
                return true;
            }
            let out = if one { self.pos[v] } else { self.pos[v] | self.neg[v] };
            let new = out & !reached;
            reached |= new;
            frontier |= new;
        }
        false
    }
}

fn check_cap(dim: usize, window: Window, cap: u32) -> Result<u32, OracleError> {
    let sites = window.site_count(dim);
    let cap = cap.min(MAX_SITE_CAP);
    if sites > cap as u64 {
        return Err(OracleError::EnumerationTooLarge { sites, cap });
    }
    Ok(sites as u32)
}

/// `f_n` for every configuration of the window.
pub struct EscapeTable {
    pub dim: usize,
    pub n: i64,
    pub eta: Eta,
    pub window: Window,
    sites: u32,
    words: Vec<u64>,
}

impl EscapeTable {
    pub fn build(dim: usize, n: i64, eta: Eta, window: Window, cap: u32) -> Result<Self, OracleError> {
        let sites = check_cap(dim, window, cap)?;
        let eval = MaskEvaluator::new(dim, n, eta, window);
        let total = 1u64 << sites;
        let nwords = total.div_ceil(64) as usize;
        let mut words = vec![0u64; nwords];
        words.par_iter_mut().enumerate().for_each(|(wi, word)| {
            let base = wi as u64 * 64;
            let mut w = 0u64;
            for b in 0..64u64.min(total - base) {
                if eval.escapes(base + b) {
                    w |= 1 << b;
                }
            }
            *word = w;
        });
        Ok(Self {
            dim,
            n,
            eta,
            window,
            sites,
            words,
        })
    }

    pub fn site_count(&self) -> u32 {
        self.sites
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.dim, self.window.radius)
    }

    #[inline]
    pub fn get(&self, mask: u64) -> bool {
        self.words[(mask / 64) as usize] >> (mask % 64) & 1 == 1
    }

    pub fn configurations(&self) -> u64 {
        1u64 << self.sites
    }

    pub fn theta(&self) -> ThetaPolynomial {
        let n = self.sites;
        self.words
            .par_iter()
            .enumerate()
            .fold(
                || CountPolynomial::zero(n),
                |mut acc, (wi, &w)| {
                    let mut bits = w;
                    let hi = (wi as u64 * 64).count_ones();
                    while bits != 0 {
                        let b = bits.trailing_zeros();
                        bits &= bits - 1;
                        acc.counts[(hi + b.count_ones()) as usize] += 1;
                    }
                    acc
                },
            )
            .reduce(
                || CountPolynomial::zero(n),
                |mut a, b| {
                    a.add_assign(&b);
                    a
                },
            )
    }

    /// Count polynomial of `{ω : f(ω) ≠ f(ω^{⊕v})}` for every window site.
    pub fn influences(&self) -> BTreeMap<Vertex, CountPolynomial> {
        let n = self.sites as usize;
        let nwords = self.words.len();
        // positions (within a word) whose bit v is clear, for v < 6
        const LOW: [u64; 6] = [
            0x5555_5555_5555_5555,
            0x3333_3333_3333_3333,
            0x0f0f_0f0f_0f0f_0f0f,
            0x00ff_00ff_00ff_00ff,
            0x0000_ffff_0000_ffff,
            0x0000_0000_ffff_ffff,
        ];
        let per_site: Vec<CountPolynomial> = (0..n)
            .into_par_iter()
            .map(|v| {
                let mut acc = CountPolynomial::zero(self.sites);
                let mut bump = |mask: u64| {
                    let pc = mask.count_ones() as usize;
                    acc.counts[pc] += 1;
                    acc.counts[pc + 1] += 1;
                };
                for wi in 0..nwords {
                    let w = self.words[wi];
                    let diff = if v < 6 {
                        let s = 1u32 << v;
                        let valid = if n < 6 { (1u64 << (1u64 << n)) - 1 } else { u64::MAX };
                        (w ^ (w >> s)) & LOW[v] & valid
                    } else {
                        let stride = 1usize << (v - 6);
                        if wi & stride != 0 {
                            continue;
                        }
                        w ^ self.words[wi | stride]
                    };
                    let mut bits = diff;
                    while bits != 0 {
                        let b = bits.trailing_zeros() as u64;
                        bits &= bits - 1;
                        // mask with bit v clear; its partner has one more 1-site
                        bump(wi as u64 * 64 + b);
                    }
                }
                acc
            })
            .collect();
        let grid = self.grid();
        per_site
            .into_iter()
            .enumerate()
            .map(|(i, poly)| (grid.vertex(i), poly))
            .collect()
    }
}

/// `θ_n` on the window by full enumeration.
pub fn enumerate_theta(dim: usize, n: i64, eta: Eta, window: Window, cap: u32) -> Result<ThetaPolynomial, OracleError> {
    Ok(EscapeTable::build(dim, n, eta, window, cap)?.theta())
}

/// Exact influence polynomials of the windowed `f_n`.
pub fn exact_influences(
    dim: usize,
    n: i64,
    eta: Eta,
    window: Window,
    cap: u32,
) -> Result<BTreeMap<Vertex, CountPolynomial>, OracleError> {
    Ok(EscapeTable::build(dim, n, eta, window, cap)?.influences())
}

/// Exact revealment polynomials of one tree `T_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealmentPolynomials {
    pub k: i64,
    pub per_vertex: BTreeMap<Vertex, CountPolynomial>,
    /// Escape count polynomial implied by the tree's outcomes.
    pub escaped: CountPolynomial,
    /// Configurations where the tree's outcome disagreed with the table.
    pub mismatches: u64,
}

#[derive(Clone)]
struct RevealAcc {
    per_cell: Vec<CountPolynomial>,
    escaped: CountPolynomial,
    mismatches: u64,
}

impl RevealAcc {
    fn new(sites: u32) -> Self {
        Self {
            per_cell: vec![CountPolynomial::zero(sites); sites as usize],
            escaped: CountPolynomial::zero(sites),
            mismatches: 0,
        }
    }

    fn merge(mut self, other: RevealAcc) -> Self {
        for (a, b) in self.per_cell.iter_mut().zip(&other.per_cell) {
            a.add_assign(b);
        }
        self.escaped.add_assign(&other.escaped);
        self.mismatches += other.mismatches;
        self
    }

    fn finish(self, grid: Grid, k: i64) -> RevealmentPolynomials {
        RevealmentPolynomials {
            k,
            per_vertex: self
                .per_cell
                .into_iter()
                .enumerate()
                .map(|(i, p)| (grid.vertex(i), p))
                .collect(),
            escaped: self.escaped,
            mismatches: self.mismatches,
        }
    }
}

/// Runs `T_k` on every configuration of the window and counts, per site,
/// the configurations in which it is revealed.
pub fn exact_revealments(table: &EscapeTable, k: i64) -> Result<RevealmentPolynomials, crate::error::Error> {
    let params = TreeParams::new(table.dim, table.eta, table.n, k, table.window);
    let proto = Explorer::new(params)?;
    let grid = table.grid();
    let sites = table.site_count();
    const CHUNK: u64 = 1 << 12;
    let chunks = table.configurations().div_ceil(CHUNK);
    let acc = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<RevealAcc, crate::error::Error> {
            let mut acc = RevealAcc::new(sites);
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(table.configurations());
            for mask in lo..hi {
                let cfg = WindowMask {
                    grid,
                    mask,
                    outside: true,
                };
                let trace = proto.fresh().run(&cfg)?;
                let pc = mask.count_ones() as usize;
                for r in &trace.revealed {
                    let i = grid.index(&r.vertex).expect("tree stays in the window");
                    acc.per_cell[i].counts[pc] += 1;
                }
                let esc = trace.outcome.escaped();
                if esc {
                    acc.escaped.counts[pc] += 1;
                }
                if esc != table.get(mask) {
                    acc.mismatches += 1;
                }
            }
            Ok(acc)
        })
        .try_reduce(|| RevealAcc::new(sites), |a, b| Ok(a.merge(b)))?;
    Ok(acc.finish(grid, k))
}

/// Same quantity as [`exact_revealments`], obtained by walking the decision
/// tree itself: each leaf with `a` revealed ones and `z` revealed zeros
/// stands for `C(N − a − z, j − a)` configurations with `j` ones.
pub fn exact_revealments_by_tree(
    dim: usize,
    n: i64,
    eta: Eta,
    window: Window,
    k: i64,
    cap: u32,
) -> Result<RevealmentPolynomials, crate::error::Error> {
    let sites = check_cap(dim, window, cap)?;
    let params = TreeParams::new(dim, eta, n, k, window);
    let root = Explorer::new(params)?;
    let grid = Grid::new(dim, window.radius);
    let mut acc = RevealAcc::new(sites);
    let mut path: Vec<usize> = Vec::new();
    walk_tree(root, grid, sites, 0, &mut path, &mut acc)?;
    Ok(acc.finish(grid, k))
}

fn walk_tree(
    mut node: Explorer,
    grid: Grid,
    sites: u32,
    ones: u32,
    path: &mut Vec<usize>,
    acc: &mut RevealAcc,
) -> Result<(), crate::error::Error> {
    match node.next_step()? {
        Step::Done(outcome) => {
            let free = sites - path.len() as u32;
            for j in ones..=ones + free {
                let c = binomial(free, j - ones);
                for &i in path.iter() {
                    acc.per_cell[i].counts[j as usize] += c;
                }
                if outcome.escaped() {
                    acc.escaped.counts[j as usize] += c;
                }
            }
            Ok(())
        }
        Step::Query { vertex, .. } => {
            let i = grid.index(&vertex).expect("tree stays in the window");
            path.push(i);
            let mut other = node.clone();
            other.answer(false);
            walk_tree(other, grid, sites, ones, path, acc)?;
            node.answer(true);
            walk_tree(node, grid, sites, ones + 1, path, acc)?;
            path.pop();
            Ok(())
        }
    }
}
