//! Vertices of Z^d, edge semantics of the two models, and the per-site
//! randomness they are built on.
//!
//! Every site `v` carries a uniform variate `U_v` in `[0, 1)` that is a pure
//! function of `(seed, v)`. The configuration at level `p` is `ω_v = 1{U_v < p}`,
//! so a single field couples all values of `p` monotonically.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// Smallest supported lattice dimension.
pub const MIN_DIM: usize = 2;

/// Identity of the per-site generator, echoed into output headers.
pub const GENERATOR_ID: &str = "splitmix64-keyed-site-v1";

/// A point of Z^d with `2 <= d <= 4`.
///
/// Ordering is lexicographic in the coordinates; comparing vertices of
/// different dimension is not meaningful.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vertex {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl Vertex {
    pub fn new(coords: &[i32]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "vertex dimension {} out of range",
            coords.len()
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Self {
            coords: c,
            dim: coords.len() as u8,
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self::new(&vec![0; dim])
    }

    /// `r·𝟏`.
    pub fn diagonal(dim: usize, r: i32) -> Self {
        Self::new(&vec![r; dim])
    }

    /// The unit vector `e_axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = Self::origin(dim);
        v.coords[axis] = 1;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i32 {
        self.coords[axis]
    }

    #[inline]
    pub fn step(&self, dir: Direction) -> Self {
        let mut v = *self;
        v.coords[dir.axis as usize] += dir.sign as i32;
        v
    }

    pub fn add(&self, other: &Vertex) -> Self {
        let mut v = *self;
        for i in 0..self.dim() {
            v.coords[i] += other.coords[i];
        }
        v
    }

    pub fn scale(&self, r: i32) -> Self {
        let mut v = *self;
        for i in 0..self.dim() {
            v.coords[i] *= r;
        }
        v
    }

    /// Adds `r` to every coordinate.
    pub fn shift_diagonal(&self, r: i32) -> Self {
        let mut v = *self;
        for i in 0..self.dim() {
            v.coords[i] += r;
        }
        v
    }

    #[inline]
    pub fn sup_norm(&self) -> u32 {
        self.coords().iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    #[inline]
    pub fn l1_norm(&self) -> i64 {
        self.coords().iter().map(|&c| (c as i64).abs()).sum()
    }

    #[inline]
    pub fn coord_sum(&self) -> i64 {
        self.coords().iter().map(|&c| c as i64).sum()
    }

    /// The `2d` lattice neighbours in [`Direction::all`] order.
    pub fn neighbors(&self) -> impl Iterator<Item = Vertex> + '_ {
        Direction::all(self.dim()).map(move |d| self.step(d))
    }

    pub fn is_adjacent(&self, other: &Vertex) -> bool {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b).unsigned_abs())
            .sum::<u32>()
            == 1
    }
}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coords().cmp(other.coords()).then(self.dim.cmp(&other.dim))
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Vertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let coords = Vec::<i32>::deserialize(d)?;
        if !(1..=MAX_DIM).contains(&coords.len()) {
            return Err(serde::de::Error::custom("vertex dimension out of range"));
        }
        Ok(Vertex::new(&coords))
    }
}

/// One of the `2d` unit steps `±e_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Direction {
    pub axis: u8,
    pub sign: i8,
}

impl Direction {
    pub fn positive(axis: usize) -> Self {
        Self {
            axis: axis as u8,
            sign: 1,
        }
    }

    pub fn negative(axis: usize) -> Self {
        Self {
            axis: axis as u8,
            sign: -1,
        }
    }

    /// E_+ followed by E_−.
    pub fn all(dim: usize) -> impl Iterator<Item = Direction> {
        (0..dim)
            .map(Direction::positive)
            .chain((0..dim).map(Direction::negative))
    }

    pub fn is_positive(&self) -> bool {
        self.sign > 0
    }
}

/// Edge semantics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// `ω_v = 1` gives the `d` edges in E_+, `ω_v = 0` the `d` edges in E_−.
    Orthant,
    /// E_+ always present; E_− present iff `ω_v = 0`.
    HalfOrthant,
}

impl ModelKind {
    /// Whether the edge `v -> v + dir` exists when `ω_v = omega`.
    #[inline]
    pub fn has_edge(self, omega: bool, dir: Direction) -> bool {
        match self {
            ModelKind::Orthant => dir.is_positive() == omega,
            ModelKind::HalfOrthant => dir.is_positive() || !omega,
        }
    }

    pub fn out_directions(self, dim: usize, omega: bool) -> impl Iterator<Item = Direction> {
        Direction::all(dim).filter(move |&d| self.has_edge(omega, d))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Orthant => write!(f, "orthant"),
            ModelKind::HalfOrthant => write!(f, "half-orthant"),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "orthant" => Ok(ModelKind::Orthant),
            "half-orthant" | "half_orthant" => Ok(ModelKind::HalfOrthant),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

/// A realised site configuration ω.
pub trait Sites {
    fn dim(&self) -> usize;

    /// `ω_v`.
    fn is_one(&self, v: &Vertex) -> bool;
}

impl<S: Sites + ?Sized> Sites for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn is_one(&self, v: &Vertex) -> bool {
        (**self).is_one(v)
    }
}

/// Out-neighbours of `v` under `model` in configuration `sites`.
pub fn out_neighbors<S: Sites>(model: ModelKind, sites: &S, v: &Vertex) -> Vec<Vertex> {
    let omega = sites.is_one(v);
    model.out_directions(sites.dim(), omega).map(|d| v.step(d)).collect()
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Keyed 64-bit hash of a word sequence (SplitMix64 finaliser chained over
/// the words). Used for both per-site variates and seed derivation.
pub fn keyed_hash(key: u64, words: &[u64]) -> u64 {
    let mut h = mix64(key.wrapping_add(GOLDEN));
    for (i, &w) in words.iter().enumerate() {
        h = mix64(h ^ w.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 2)));
    }
    h
}

/// Derives an independent child seed from a master seed and an index path,
/// e.g. `(cell, trial)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    keyed_hash(master ^ 0x5eed_5eed_5eed_5eed, path)
}

/// The uniform field `U_v`, lazily evaluated on the infinite lattice.
///
/// Evaluation is a pure function of `(seed, v)`; there is no interior state,
/// so a field is `Copy` and can be shared freely between workers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SiteField {
    seed: u64,
    dim: u8,
}

impl SiteField {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(
            (MIN_DIM..=MAX_DIM).contains(&dim),
            "dimension {dim} outside {MIN_DIM}..={MAX_DIM}"
        );
        Self { seed, dim: dim as u8 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// `U_v ∈ [0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&self, v: &Vertex) -> f64 {
        debug_assert_eq!(v.dim(), self.dim());
        let mut words = [0u64; MAX_DIM];
        for (w, &c) in words.iter_mut().zip(v.coords()) {
            *w = c as u32 as u64;
        }
        let h = keyed_hash(self.seed, &words[..self.dim()]);
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `ω_v = 1{U_v < p}`.
    #[inline]
    pub fn sample_site(&self, v: &Vertex, p: f64) -> bool {
        self.uniform(v) < p
    }

    /// The configuration at level `p`.
    pub fn at(&self, p: f64) -> SiteView {
        SiteView { field: *self, p }
    }

    /// `ω^{⊕pivot}` over this field.
    pub fn flip(&self, pivot: Vertex) -> FlippedField {
        FlippedField { base: *self, pivot }
    }
}

/// A [`SiteField`] thresholded at a fixed `p`.
#[derive(Clone, Copy, Debug)]
pub struct SiteView {
    pub field: SiteField,
    pub p: f64,
}

impl Sites for SiteView {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    #[inline]
    fn is_one(&self, v: &Vertex) -> bool {
        self.field.sample_site(v, self.p)
    }
}

/// A field with the Boolean value at `pivot` negated.
#[derive(Clone, Copy, Debug)]
pub struct FlippedField {
    pub base: SiteField,
    pub pivot: Vertex,
}

impl FlippedField {
    pub fn sample_site(&self, v: &Vertex, p: f64) -> bool {
        let b = self.base.sample_site(v, p);
        if *v == self.pivot {
            !b
        } else {
            b
        }
    }

    pub fn at(&self, p: f64) -> FlippedView {
        FlippedView { field: *self, p }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FlippedView {
    pub field: FlippedField,
    pub p: f64,
}

impl Sites for FlippedView {
    fn dim(&self) -> usize {
        self.field.base.dim()
    }

    #[inline]
    fn is_one(&self, v: &Vertex) -> bool {
        self.field.sample_site(v, self.p)
    }
}

/// Constant configuration, mostly for tests and closed-form checks.
#[derive(Clone, Copy, Debug)]
pub struct ConstantSites {
    pub dim: usize,
    pub value: bool,
}

impl Sites for ConstantSites {
    fn dim(&self) -> usize {
        self.dim
    }

    fn is_one(&self, _v: &Vertex) -> bool {
        self.value
    }
}

/// Applies a fixed set of overrides on top of another configuration.
#[derive(Clone, Debug)]
pub struct OverrideSites<S> {
    pub base: S,
    pub overrides: std::collections::HashMap<Vertex, bool>,
}

impl<S: Sites> Sites for OverrideSites<S> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn is_one(&self, v: &Vertex) -> bool {
        match self.overrides.get(v) {
            Some(&b) => b,
            None => self.base.is_one(v),
        }
    }
}
