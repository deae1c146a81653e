//! Exact geometry: the cones `−k𝟏 + K_η`, sup-norm balls `Λ_r`, and slabs.
//!
//! `K_η = {x : x·𝟏 ≥ η‖x‖₁}`. All membership tests run in integer arithmetic
//! with `η` held as a reduced fraction, so boundary classification never
//! depends on rounding.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::lattice::Vertex;

/// A rational cone parameter `η = num/den ∈ [0, 1]`, kept reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Eta {
    num: i64,
    den: i64,
}

impl Eta {
    pub fn new(num: i64, den: i64) -> Result<Self, GeometryError> {
        if den == 0 {
            return Err(GeometryError::MalformedEta(format!("{num}/{den}")));
        }
        let r = Ratio::new(num, den);
        let (num, den) = (*r.numer(), *r.denom());
        if num < 0 || num > den {
            return Err(GeometryError::EtaOutOfRange(format!("{num}/{den}")));
        }
        Ok(Self { num, den })
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub fn numer(&self) -> i64 {
        self.num
    }

    pub fn denom(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn as_ratio(&self) -> Ratio<i64> {
        Ratio::new(self.num, self.den)
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Eta {
    type Err = GeometryError;

    /// Accepts `"a/b"` or a bare integer.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GeometryError::MalformedEta(s.to_string());
        let t = s.trim();
        let (num, den) = match t.split_once('/') {
            Some((a, b)) => (
                a.trim().parse::<i64>().map_err(|_| bad())?,
                b.trim().parse::<i64>().map_err(|_| bad())?,
            ),
            None => (t.parse::<i64>().map_err(|_| bad())?, 1),
        };
        if den <= 0 {
            return Err(bad());
        }
        Eta::new(num, den)
    }
}

impl Serialize for Eta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The shifted cone `−shift·𝟏 + K_η`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cone {
    pub eta: Eta,
    pub shift: i64,
}

impl Cone {
    pub fn new(eta: Eta, shift: i64) -> Self {
        Self { eta, shift }
    }

    /// `(x + k𝟏)·𝟏 ≥ η‖x + k𝟏‖₁`.
    #[inline]
    pub fn contains(&self, x: &Vertex) -> bool {
        let mut sum = 0i128;
        let mut l1 = 0i128;
        for &c in x.coords() {
            let y = c as i128 + self.shift as i128;
            sum += y;
            l1 += y.abs();
        }
        self.eta.den as i128 * sum >= self.eta.num as i128 * l1
    }

    /// `x` is in the cone and has a lattice neighbour outside it (∂).
    pub fn is_boundary(&self, x: &Vertex) -> bool {
        self.contains(x) && x.neighbors().any(|y| !self.contains(&y))
    }

    /// `x` is outside the cone and has a lattice neighbour inside it (∂⁺).
    pub fn is_outer_boundary(&self, x: &Vertex) -> bool {
        !self.contains(x) && x.neighbors().any(|y| self.contains(&y))
    }
}

/// Smallest `n ≥ 0` with `x ∈ −n𝟏 + K_η`.
///
/// Membership is monotone in `n` and always holds once `x + n𝟏` is in the
/// positive orthant, which bounds the search.
pub fn containment_depth(eta: Eta, x: &Vertex) -> i64 {
    let upper = x.coords().iter().map(|&c| -(c as i64)).max().unwrap_or(0).max(0);
    let (mut lo, mut hi) = (0i64, upper);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if Cone::new(eta, mid).contains(x) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// `cone ∩ Λ_r` points with a neighbour outside the cone, lexicographically sorted.
pub fn cone_boundary(cone: &Cone, window: Window, dim: usize) -> Vec<Vertex> {
    window.points(dim).filter(|x| cone.is_boundary(x)).collect()
}

/// `Λ_r` points outside the cone with a neighbour inside, lexicographically sorted.
pub fn cone_outer_boundary(cone: &Cone, window: Window, dim: usize) -> Vec<Vertex> {
    window.points(dim).filter(|x| cone.is_outer_boundary(x)).collect()
}

/// The sup-norm ball `Λ_r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub radius: u32,
}

impl Window {
    pub fn new(radius: u32) -> Self {
        Self { radius }
    }

    #[inline]
    pub fn contains(&self, v: &Vertex) -> bool {
        v.sup_norm() <= self.radius
    }

    pub fn site_count(&self, dim: usize) -> u64 {
        (2 * self.radius as u64 + 1).pow(dim as u32)
    }

    /// All points in lexicographic order.
    pub fn points(&self, dim: usize) -> impl Iterator<Item = Vertex> {
        let grid = Grid::new(dim, self.radius);
        (0..grid.len()).map(move |i| grid.vertex(i))
    }
}

/// Dense lexicographic indexing of the box `[−R, R]^d`.
///
/// Index order coincides with the lexicographic order on vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    radius: i32,
    side: usize,
}

impl Grid {
    pub fn new(dim: usize, radius: u32) -> Self {
        Self {
            dim,
            radius: radius as i32,
            side: 2 * radius as usize + 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> u32 {
        self.radius as u32
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, v: &Vertex) -> Option<usize> {
        let mut idx = 0usize;
        for &c in v.coords() {
            if c < -self.radius || c > self.radius {
                return None;
            }
            idx = idx * self.side + (c + self.radius) as usize;
        }
        Some(idx)
    }

    #[inline]
    pub fn vertex(&self, mut idx: usize) -> Vertex {
        let mut c = [0i32; crate::lattice::MAX_DIM];
        for i in (0..self.dim).rev() {
            c[i] = (idx % self.side) as i32 - self.radius;
            idx /= self.side;
        }
        Vertex::new(&c[..self.dim])
    }
}

/// Extended integer for slab bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    NegInf,
    Finite(i64),
    PosInf,
}

/// `Λ_{u,v}(m, n) = {z : m·(u·v) ≤ z·v < n·(u·v)}` with `u·v > 0` and `v·𝟏 = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slab {
    u: Vertex,
    // v = v_num / v_den, v_den > 0
    v_num: Vec<i128>,
    lower: Bound,
    upper: Bound,
}

impl Slab {
    pub fn new(u: Vertex, v: &[Ratio<i64>], m: Bound, n: Bound) -> Result<Self, GeometryError> {
        if v.len() != u.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: u.dim(),
                found: v.len(),
            });
        }
        let den = v.iter().fold(1i128, |acc, r| lcm(acc, *r.denom() as i128));
        let v_num: Vec<i128> = v
            .iter()
            .map(|r| *r.numer() as i128 * (den / *r.denom() as i128))
            .collect();
        if v_num.iter().sum::<i128>() != 0 {
            return Err(GeometryError::SlabNormalNotBalanced);
        }
        let uv: i128 = u.coords().iter().zip(&v_num).map(|(&a, &b)| a as i128 * b).sum();
        if uv <= 0 {
            return Err(GeometryError::SlabNotTransverse);
        }
        Ok(Self {
            u,
            v_num,
            lower: m,
            upper: n,
        })
    }

    fn dot(&self, z: &Vertex) -> i128 {
        z.coords().iter().zip(&self.v_num).map(|(&a, &b)| a as i128 * b).sum()
    }

    pub fn contains(&self, z: &Vertex) -> bool {
        let uv = self.dot(&self.u);
        let zv = self.dot(z);
        let lower_ok = match self.lower {
            Bound::NegInf => true,
            Bound::PosInf => false,
            Bound::Finite(m) => m as i128 * uv <= zv,
        };
        let upper_ok = match self.upper {
            Bound::NegInf => false,
            Bound::PosInf => true,
            Bound::Finite(n) => zv < n as i128 * uv,
        };
        lower_ok && upper_ok
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i128, b: i128) -> i128 {
    (a / gcd(a, b) * b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eta(s: &str) -> Eta {
        s.parse().unwrap()
    }

    #[test]
    fn parse_eta() {
        assert_eq!(eta("1/2"), Eta::new(1, 2).unwrap());
        assert_eq!(eta("2/4"), Eta::new(1, 2).unwrap());
        assert_eq!(eta("0"), Eta::zero());
        assert!(matches!("3/2".parse::<Eta>(), Err(GeometryError::EtaOutOfRange(_))));
        assert!(matches!("x/2".parse::<Eta>(), Err(GeometryError::MalformedEta(_))));
        assert!("1/0".parse::<Eta>().is_err());
        assert!("-1/3".parse::<Eta>().is_err());
    }

    #[test]
    fn membership_examples() {
        let v = |c: &[i32]| Vertex::new(c);
        assert!(Cone::new(eta("1"), 0).contains(&v(&[1, 1])));
        assert!(Cone::new(eta("0"), 0).contains(&v(&[1, -1])));
        assert!(!Cone::new(eta("1/2"), 0).contains(&v(&[1, -1])));
        assert!(Cone::new(eta("0"), 1).contains(&v(&[-2, 0])));
    }

    #[test]
    fn boundary_of_half_plane() {
        // Oracle: enumerate Λ_3 and test the four neighbours directly.
        let c = Cone::new(Eta::zero(), 0);
        let got = cone_boundary(&c, Window::new(3), 2);
        let mut want = Vec::new();
        for x in -3..=3 {
            for y in -3..=3 {
                let p = Vertex::new(&[x, y]);
                let inside = x + y >= 0;
                let nb_out = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(dx, dy)| x + dx + y + dy < 0);
                if inside && nb_out {
                    want.push(p);
                }
            }
        }
        assert_eq!(got, want);
        assert!(got.iter().all(|p| p.coord_sum() == 0));
        assert_eq!(got.len(), 7);

        let outer = cone_outer_boundary(&c, Window::new(3), 2);
        assert!(outer.iter().all(|p| p.coord_sum() == -1));
        assert!(got.iter().all(|p| !outer.contains(p)));
        for p in &got {
            assert!(c.contains(p));
            assert!(p.neighbors().any(|q| !c.contains(&q)));
        }
    }

    #[test]
    fn slab_examples() {
        let half = Ratio::new(1, 2);
        let u = Vertex::new(&[1, 0]);
        let v = [half, -half];
        let s = Slab::new(u, &v, Bound::Finite(0), Bound::Finite(1)).unwrap();
        assert!(s.contains(&Vertex::new(&[0, 0])));
        assert!(!s.contains(&u));
        let s2 = Slab::new(u, &v, Bound::Finite(0), Bound::Finite(2)).unwrap();
        // z·v = 1, 2·(u·v) = 1, strict upper bound fails.
        assert!(!s2.contains(&Vertex::new(&[3, 1])));
        assert!(s2.contains(&Vertex::new(&[2, 1])));
        let inf = Slab::new(u, &v, Bound::NegInf, Bound::PosInf).unwrap();
        assert!(inf.contains(&Vertex::new(&[-100, 40])));
    }

    #[test]
    fn slab_rejects_bad_normals() {
        let u = Vertex::new(&[1, 0]);
        assert_eq!(
            Slab::new(u, &[Ratio::new(1, 1), Ratio::new(1, 1)], Bound::NegInf, Bound::PosInf),
            Err(GeometryError::SlabNormalNotBalanced)
        );
        assert_eq!(
            Slab::new(u, &[Ratio::new(-1, 1), Ratio::new(1, 1)], Bound::NegInf, Bound::PosInf),
            Err(GeometryError::SlabNotTransverse)
        );
    }

    #[test]
    fn grid_index_is_lexicographic() {
        let g = Grid::new(3, 2);
        let pts: Vec<_> = (0..g.len()).map(|i| g.vertex(i)).collect();
        assert_eq!(pts.len(), 125);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(g.index(p), Some(i));
        }
        assert_eq!(g.index(&Vertex::new(&[3, 0, 0])), None);
        assert_eq!(Window::new(2).site_count(3), 125);
    }

    #[test]
    fn depth_examples() {
        let e = Eta::zero();
        assert_eq!(containment_depth(e, &Vertex::new(&[0, 0])), 0);
        assert_eq!(containment_depth(e, &Vertex::new(&[-3, 0])), 2);
        assert_eq!(containment_depth(e, &Vertex::new(&[-2, -1])), 2);
        assert_eq!(containment_depth(eta("1"), &Vertex::new(&[-2, 5])), 2);
    }

    fn arb_eta() -> impl Strategy<Value = Eta> {
        (1i64..12).prop_flat_map(|den| (0..=den).prop_map(move |num| Eta::new(num, den).unwrap()))
    }

    fn arb_vertex(dim: usize) -> impl Strategy<Value = Vertex> {
        proptest::collection::vec(-20i32..20, dim).prop_map(|c| Vertex::new(&c))
    }

    proptest! {
        #[test]
        fn shift_nesting(e in arb_eta(), k in -5i64..5, x in arb_vertex(3)) {
            if Cone::new(e, k).contains(&x) {
                prop_assert!(Cone::new(e, k + 1).contains(&x));
            }
        }

        #[test]
        fn diagonal_closure(e in arb_eta(), k in -5i64..5, x in arb_vertex(2)) {
            if Cone::new(e, k).contains(&x) {
                prop_assert!(Cone::new(e, k).contains(&x.shift_diagonal(1)));
            }
        }

        #[test]
        fn eta_nesting(a in arb_eta(), b in arb_eta(), x in arb_vertex(3)) {
            let (lo, hi) = if a.as_ratio() <= b.as_ratio() { (a, b) } else { (b, a) };
            if Cone::new(hi, 0).contains(&x) {
                prop_assert!(Cone::new(lo, 0).contains(&x));
            }
        }

        #[test]
        fn positive_orthant_inside(e in arb_eta(), c in proptest::collection::vec(0i32..50, 4)) {
            prop_assert!(Cone::new(e, 0).contains(&Vertex::new(&c)));
        }

        #[test]
        fn convex_midpoints(e in arb_eta(), x in arb_vertex(2), y in arb_vertex(2)) {
            // 2·mid = x + y; the cone is scale invariant, so test x + y.
            let c = Cone::new(e, 0);
            if c.contains(&x) && c.contains(&y) {
                prop_assert!(c.contains(&x.add(&y)));
            }
        }

        #[test]
        fn depth_is_minimal(e in arb_eta(), x in arb_vertex(3)) {
            let n = containment_depth(e, &x);
            prop_assert!(Cone::new(e, n).contains(&x));
            if n > 0 {
                prop_assert!(!Cone::new(e, n - 1).contains(&x));
            }
        }
    }
}
