//! The exploration decision tree `T_k` for the windowed escape event `f_n`.
//!
//! `T_k` first explores, inside the cone `−k𝟏 + K_η`, the vertices that can
//! reach the outer boundary `∂⁺(−k𝟏 + K_η)` (phase A), and then the forward
//! clusters of the outer-boundary vertices reached from `0` (phase B). Rounds
//! `i = n, n + 1, …` restrict both phases to `Λ_i`, and within a phase the
//! lexicographically smallest active vertex is revealed next.
//!
//! Everything is confined to the window `Λ_r`: the windowed `f_n` depends on
//! those sites only, so the tree never reveals anything else. Phase A is
//! seeded with every boundary vertex of the `k`-cone inside the window.
//!
//! Reachability through the revealed set `R` (`x →^R y`: a path whose edges
//! all start in `R`) is maintained incrementally. All three relations the
//! algorithm queries only grow as `R` grows:
//!
//! * `conn`: revealed `x` with `x →^R ∂⁺`, closed backwards over revealed edges;
//! * `reach0`: vertices `y` with `0 →^R y`;
//! * `reachx`: vertices reachable through `R` from some `x ∈ ∂⁺` with `0 →^R x`.
//!
//! `B` is `reachx` minus `R`. Phase-A additions are driven by vertices that
//! became `conn` since the last phase-A reveal; a vertex skipped because it
//! was in `R ∪ B` stays there until revealed, so this matches recomputing the
//! update rule from scratch.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cone::{Cone, Eta, Grid, Window};
use crate::error::ExploreError;
use crate::lattice::{Sites, Vertex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reveal {
    pub vertex: Vertex,
    pub bit: bool,
    pub phase: Phase,
    pub round: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Escaped,
    ExhaustedWindow,
}

impl Outcome {
    pub fn escaped(self) -> bool {
        self == Outcome::Escaped
    }
}

/// Where phase A is seeded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Seeding {
    /// `∂(−k𝟏 + K_η) ∩ Λ_r` for the window `Λ_r`.
    #[default]
    Window,
    /// `∂(−k𝟏 + K_η) ∩ Λ_n` only. Kept to demonstrate that this seeding
    /// misses escapes leaving the `k`-cone outside `Λ_n`.
    BallN,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeParams {
    pub dim: usize,
    pub eta: Eta,
    pub n: i64,
    pub k: i64,
    pub window: Window,
    /// Last round allowed to run; defaults to `max(n, r)`.
    pub round_cap: Option<u32>,
    pub seeding: Seeding,
}

impl TreeParams {
    pub fn new(dim: usize, eta: Eta, n: i64, k: i64, window: Window) -> Self {
        Self {
            dim,
            eta,
            n,
            k,
            window,
            round_cap: None,
            seeding: Seeding::Window,
        }
    }

    pub fn with_round_cap(mut self, cap: u32) -> Self {
        self.round_cap = Some(cap);
        self
    }

    pub fn with_seeding(mut self, seeding: Seeding) -> Self {
        self.seeding = seeding;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationTrace {
    pub k: i64,
    pub n: i64,
    pub eta: Eta,
    pub window: Window,
    pub revealed: Vec<Reveal>,
    pub outcome: Outcome,
    pub active_a: Vec<Vertex>,
    pub active_b: Vec<Vertex>,
}

impl ExplorationTrace {
    pub fn was_revealed(&self, v: &Vertex) -> bool {
        self.revealed.iter().any(|r| r.vertex == *v)
    }
}

const NONE: u32 = u32::MAX;

/// Static per-cell data over the window plus a one-cell halo.
#[derive(Debug)]
struct Geometry {
    dim: usize,
    window: Window,
    grid: Grid,
    nbr: Vec<[u32; 8]>,
    sup: Vec<u32>,
    in_window: Vec<bool>,
    in_k_cone: Vec<bool>,
    outer_k: Vec<bool>,
    outside_n: Vec<bool>,
    origin: u32,
    seeds: Vec<u32>,
    last_round: u32,
    round_cap: u32,
}

impl Geometry {
    fn new(p: &TreeParams) -> Result<Self, ExploreError> {
        if p.k < 1 || p.k > p.n {
            return Err(ExploreError::InvalidIndex { k: p.k, n: p.n });
        }
        let dim = p.dim;
        let grid = Grid::new(dim, p.window.radius + 1);
        let k_cone = Cone::new(p.eta, p.k);
        let n_cone = Cone::new(p.eta, p.n);
        let len = grid.len();
        let mut nbr = vec![[NONE; 8]; len];
        let mut sup = vec![0; len];
        let mut in_window = vec![false; len];
        let mut in_k_cone = vec![false; len];
        let mut outer_k = vec![false; len];
        let mut outside_n = vec![false; len];
        for i in 0..len {
            let v = grid.vertex(i);
            for (j, w) in v.neighbors().enumerate() {
                if let Some(iw) = grid.index(&w) {
                    nbr[i][j] = iw as u32;
                }
            }
            sup[i] = v.sup_norm();
            in_window[i] = p.window.contains(&v);
            in_k_cone[i] = k_cone.contains(&v);
            outer_k[i] = k_cone.is_outer_boundary(&v);
            outside_n[i] = !n_cone.contains(&v);
        }
        let seed_radius = match p.seeding {
            Seeding::Window => p.window.radius,
            Seeding::BallN => p.window.radius.min(p.n as u32),
        };
        let seeds = (0..len)
            .filter(|&i| {
                let v = grid.vertex(i);
                sup[i] <= seed_radius && k_cone.is_boundary(&v)
            })
            .map(|i| i as u32)
            .collect();
        let origin = grid.index(&Vertex::origin(dim)).unwrap() as u32;
        let last_round = (p.n as u32).max(p.window.radius);
        Ok(Self {
            dim,
            window: p.window,
            grid,
            nbr,
            sup,
            in_window,
            in_k_cone,
            outer_k,
            outside_n,
            origin,
            seeds,
            last_round,
            round_cap: p.round_cap.unwrap_or(last_round),
        })
    }

    #[inline]
    fn opposite(&self, j: usize) -> usize {
        (j + self.dim) % (2 * self.dim)
    }
}

/// Fixed-size bit set over grid cells; iteration order is lexicographic.
#[derive(Clone, Debug)]
struct CellSet(Vec<u64>);

impl CellSet {
    fn new(len: usize) -> Self {
        Self(vec![0; len.div_ceil(64)])
    }
    #[inline]
    fn insert(&mut self, i: u32) {
        self.0[i as usize / 64] |= 1 << (i % 64);
    }
    #[inline]
    fn remove(&mut self, i: u32) {
        self.0[i as usize / 64] &= !(1 << (i % 64));
    }
    #[inline]
    fn contains(&self, i: u32) -> bool {
        self.0[i as usize / 64] >> (i % 64) & 1 == 1
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
    fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                Some(wi as u32 * 64 + b)
            })
        })
    }
}

const REVEALED: u8 = 1;
const ONE: u8 = 2;
const CONN: u8 = 4;
const REACH0: u8 = 8;
const REACHX: u8 = 16;

/// What the tree asks for next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Query { vertex: Vertex, phase: Phase },
    Done(Outcome),
}

/// `T_k` as a step machine: [`Explorer::next_step`] yields the next site to
/// reveal, [`Explorer::answer`] feeds its value back. Cloning forks the tree.
#[derive(Clone, Debug)]
pub struct Explorer {
    geo: Arc<Geometry>,
    params: TreeParams,
    flags: Vec<u8>,
    a: CellSet,
    b: CellSet,
    pending: Vec<u32>,
    round: u32,
    phase: Phase,
    escaped: bool,
    awaiting: Option<(u32, Phase)>,
    revealed: Vec<Reveal>,
    scratch: Vec<u32>,
}

impl Explorer {
    pub fn new(params: TreeParams) -> Result<Self, ExploreError> {
        let geo = Arc::new(Geometry::new(&params)?);
        Ok(Self::with_geometry(geo, params))
    }

    fn with_geometry(geo: Arc<Geometry>, params: TreeParams) -> Self {
        let len = geo.grid.len();
        let mut flags = vec![0u8; len];
        flags[geo.origin as usize] |= REACH0;
        let mut a = CellSet::new(len);
        for &s in &geo.seeds {
            a.insert(s);
        }
        Self {
            round: params.n as u32,
            geo,
            params,
            flags,
            a,
            b: CellSet::new(len),
            pending: Vec::new(),
            phase: Phase::A,
            escaped: false,
            awaiting: None,
            revealed: Vec::new(),
            scratch: Vec::new(),
        }
    }

    /// A fresh tree sharing this one's precomputed geometry.
    pub fn fresh(&self) -> Self {
        Self::with_geometry(self.geo.clone(), self.params)
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn revealed(&self) -> &[Reveal] {
        &self.revealed
    }

    fn first_within(set: &CellSet, sup: &[u32], radius: u32) -> Option<u32> {
        set.iter().find(|&i| sup[i as usize] <= radius)
    }

    pub fn next_step(&mut self) -> Result<Step, ExploreError> {
        if let Some((i, phase)) = self.awaiting {
            return Ok(Step::Query {
                vertex: self.geo.grid.vertex(i as usize),
                phase,
            });
        }
        loop {
            if self.escaped {
                return Ok(Step::Done(Outcome::Escaped));
            }
            if self.a.is_empty() && self.b.is_empty() {
                return Ok(Step::Done(Outcome::ExhaustedWindow));
            }
            let radius = self.round.min(self.geo.window.radius);
            let set = match self.phase {
                Phase::A => &self.a,
                Phase::B => &self.b,
            };
            if let Some(i) = Self::first_within(set, &self.geo.sup, radius) {
                self.awaiting = Some((i, self.phase));
                return Ok(Step::Query {
                    vertex: self.geo.grid.vertex(i as usize),
                    phase: self.phase,
                });
            }
            match self.phase {
                Phase::A => self.phase = Phase::B,
                Phase::B => {
                    if self.round >= self.geo.last_round {
                        // Both sets are confined to the window, so they are
                        // empty here; kept for clarity.
                        return Ok(Step::Done(Outcome::ExhaustedWindow));
                    }
                    if self.round >= self.geo.round_cap {
                        return Err(ExploreError::RoundCapExceeded {
                            cap: self.geo.round_cap,
                        });
                    }
                    self.round += 1;
                    self.phase = Phase::A;
                }
            }
        }
    }

    /// Reveals the queried site with value `bit`.
    pub fn answer(&mut self, bit: bool) {
        let (i, phase) = self.awaiting.take().expect("answer without a pending query");
        self.reveal(i, bit, phase);
    }

    #[inline]
    fn has_edge(&self, cell: u32, j: usize) -> bool {
        j < self.geo.dim || self.flags[cell as usize] & ONE == 0
    }

    #[inline]
    fn is_revealed(&self, cell: u32) -> bool {
        self.flags[cell as usize] & REVEALED != 0
    }

    fn reveal(&mut self, i: u32, bit: bool, phase: Phase) {
        let geo = self.geo.clone();
        let dim2 = 2 * geo.dim;
        self.flags[i as usize] |= REVEALED | if bit { ONE } else { 0 };
        self.revealed.push(Reveal {
            vertex: geo.grid.vertex(i as usize),
            bit,
            phase,
            round: self.round,
        });
        self.a.remove(i);
        self.b.remove(i);

        // x →^R ∂⁺ for the new vertex, then backwards over revealed edges.
        let direct = geo.outer_k[i as usize]
            || (0..dim2).any(|j| {
                let y = geo.nbr[i as usize][j];
                self.has_edge(i, j) && y != NONE && (geo.outer_k[y as usize] || self.flags[y as usize] & CONN != 0)
            });
        if direct {
            self.mark_conn(i);
        }

        if self.flags[i as usize] & REACH0 != 0 {
            self.expand_reach0(i);
        }
        if self.flags[i as usize] & REACHX != 0 {
            self.expand_reachx(i);
        }

        if phase == Phase::A {
            let pending = std::mem::take(&mut self.pending);
            for &x in &pending {
                for j in 0..dim2 {
                    let w = geo.nbr[x as usize][j];
                    if w == NONE {
                        continue;
                    }
                    let wu = w as usize;
                    if geo.in_window[wu] && geo.in_k_cone[wu] && !self.is_revealed(w) && !self.b.contains(w) {
                        self.a.insert(w);
                    }
                }
            }
            self.pending = pending;
            self.pending.clear();
        }
    }

    fn mark_conn(&mut self, start: u32) {
        let geo = self.geo.clone();
        let dim2 = 2 * geo.dim;
        self.flags[start as usize] |= CONN;
        self.pending.push(start);
        let mut stack = std::mem::take(&mut self.scratch);
        stack.clear();
        stack.push(start);
        while let Some(y) = stack.pop() {
            for j in 0..dim2 {
                // predecessor x with edge x -> y in direction j
                let x = geo.nbr[y as usize][geo.opposite(j)];
                if x == NONE {
                    continue;
                }
                let xf = self.flags[x as usize];
                if xf & REVEALED != 0 && xf & CONN == 0 && self.has_edge(x, j) {
                    self.flags[x as usize] |= CONN;
                    self.pending.push(x);
                    stack.push(x);
                }
            }
        }
        self.scratch = stack;
    }

    fn expand_reach0(&mut self, start: u32) {
        let geo = self.geo.clone();
        let dim2 = 2 * geo.dim;
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for j in 0..dim2 {
                if !self.has_edge(x, j) {
                    continue;
                }
                let y = geo.nbr[x as usize][j];
                if y == NONE || self.flags[y as usize] & REACH0 != 0 {
                    continue;
                }
                self.flags[y as usize] |= REACH0;
                if geo.outside_n[y as usize] {
                    self.escaped = true;
                }
                if geo.outer_k[y as usize] {
                    self.mark_reachx(y);
                }
                if self.is_revealed(y) {
                    stack.push(y);
                }
            }
        }
    }

    fn mark_reachx(&mut self, start: u32) {
        if self.flags[start as usize] & REACHX != 0 {
            return;
        }
        self.flags[start as usize] |= REACHX;
        self.after_reachx(start);
    }

    fn expand_reachx(&mut self, start: u32) {
        self.after_reachx(start);
    }

    fn after_reachx(&mut self, start: u32) {
        let geo = self.geo.clone();
        let dim2 = 2 * geo.dim;
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            if !self.is_revealed(x) {
                if geo.in_window[x as usize] {
                    self.b.insert(x);
                    self.a.remove(x);
                }
                continue;
            }
            for j in 0..dim2 {
                if !self.has_edge(x, j) {
                    continue;
                }
                let y = geo.nbr[x as usize][j];
                if y == NONE || self.flags[y as usize] & REACHX != 0 {
                    continue;
                }
                self.flags[y as usize] |= REACHX;
                stack.push(y);
            }
        }
    }

    /// Final trace; only meaningful once [`Explorer::next_step`] returned `Done`.
    pub fn into_trace(self, outcome: Outcome) -> ExplorationTrace {
        let grid = self.geo.grid;
        ExplorationTrace {
            k: self.params.k,
            n: self.params.n,
            eta: self.params.eta,
            window: self.params.window,
            revealed: self.revealed,
            outcome,
            active_a: self.a.iter().map(|i| grid.vertex(i as usize)).collect(),
            active_b: self.b.iter().map(|i| grid.vertex(i as usize)).collect(),
        }
    }

    /// Drives the tree against `sites` until it resolves.
    pub fn run<S: Sites>(mut self, sites: &S) -> Result<ExplorationTrace, ExploreError> {
        loop {
            match self.next_step()? {
                Step::Query { vertex, .. } => {
                    let bit = sites.is_one(&vertex);
                    self.answer(bit);
                }
                Step::Done(outcome) => return Ok(self.into_trace(outcome)),
            }
        }
    }

    /// Recomputes the active-set characterisations from scratch and checks
    /// them against the incremental state: `B` equals the set of unrevealed
    /// window vertices reachable through `R` from an outer-boundary vertex
    /// that `0` reaches through `R`, and `A` is contained in the unrevealed
    /// seeds together with the in-cone neighbours of revealed vertices that
    /// reach `∂⁺` through `R`.
    pub fn check_invariants(&self) -> Result<(), String> {
        let geo = &self.geo;
        let len = geo.grid.len();
        let dim2 = 2 * geo.dim;
        let forward = |starts: &[u32]| -> Vec<bool> {
            let mut seen = vec![false; len];
            let mut stack: Vec<u32> = starts.to_vec();
            for &s in starts {
                seen[s as usize] = true;
            }
            while let Some(x) = stack.pop() {
                if !self.is_revealed(x) {
                    continue;
                }
                for j in 0..dim2 {
                    let y = geo.nbr[x as usize][j];
                    if self.has_edge(x, j) && y != NONE && !seen[y as usize] {
                        seen[y as usize] = true;
                        stack.push(y);
                    }
                }
            }
            seen
        };
        let from0 = forward(&[geo.origin]);
        let xs: Vec<u32> = (0..len as u32)
            .filter(|&i| from0[i as usize] && geo.outer_k[i as usize])
            .collect();
        let via = forward(&xs);
        for i in 0..len as u32 {
            let want_b = geo.in_window[i as usize] && !self.is_revealed(i) && via[i as usize];
            if want_b != self.b.contains(i) {
                return Err(format!("B mismatch at {:?}", geo.grid.vertex(i as usize)));
            }
            if self.a.contains(i) && (self.is_revealed(i) || self.b.contains(i)) {
                return Err(format!("A overlaps R ∪ B at {:?}", geo.grid.vertex(i as usize)));
            }
        }
        // conn from scratch: revealed x from which ∂⁺ is reachable through R
        let mut conn = vec![false; len];
        for i in 0..len as u32 {
            if self.is_revealed(i) {
                let seen = forward(&[i]);
                conn[i as usize] = (0..len).any(|y| seen[y] && geo.outer_k[y]);
            }
            if conn[i as usize] != (self.flags[i as usize] & CONN != 0) {
                return Err(format!("conn mismatch at {:?}", geo.grid.vertex(i as usize)));
            }
        }
        for i in self.a.iter() {
            let seeded = geo.seeds.contains(&i);
            let grown = geo.in_k_cone[i as usize]
                && (0..dim2).any(|j| {
                    let x = geo.nbr[i as usize][j];
                    x != NONE && self.is_revealed(x) && conn[x as usize]
                });
            if !seeded && !grown {
                return Err(format!("A contains {:?} without cause", geo.grid.vertex(i as usize)));
            }
        }
        Ok(())
    }
}

/// Runs `T_k` on `sites`.
pub fn run_tree<S: Sites>(sites: &S, params: TreeParams) -> Result<ExplorationTrace, ExploreError> {
    Explorer::new(params)?.run(sites)
}

/// Whether the revealed sites alone witness `0 → (−n𝟏 + K_η)^c`.
pub fn certifies_escape(trace: &ExplorationTrace) -> bool {
    let known: std::collections::HashMap<Vertex, bool> = trace.revealed.iter().map(|r| (r.vertex, r.bit)).collect();
    let Some(dim) = trace.revealed.first().map(|r| r.vertex.dim()) else {
        return false;
    };
    let cone = Cone::new(trace.eta, trace.n);
    let mut seen = std::collections::HashSet::new();
    let origin = Vertex::origin(dim);
    let mut stack = vec![origin];
    seen.insert(origin);
    while let Some(x) = stack.pop() {
        if !cone.contains(&x) {
            return true;
        }
        let Some(&bit) = known.get(&x) else { continue };
        for dir in crate::lattice::ModelKind::HalfOrthant.out_directions(dim, bit) {
            let y = x.step(dir);
            if seen.insert(y) {
                stack.push(y);
            }
        }
    }
    false
}
