//! Geometry of the cubic lattice Z^3.

use std::fmt;
use std::ops::{Add, Sub};

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UstError};

/// A vertex of Z^3.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

/// Unit steps in the fixed order +x, -x, +y, -y, +z, -z.
pub const DIRECTIONS: [LatticePoint; 6] = [
    LatticePoint::new(1, 0, 0),
    LatticePoint::new(-1, 0, 0),
    LatticePoint::new(0, 1, 0),
    LatticePoint::new(0, -1, 0),
    LatticePoint::new(0, 0, 1),
    LatticePoint::new(0, 0, -1),
];

/// Index of the direction opposite to `d` in [`DIRECTIONS`].
#[inline]
pub const fn opposite(d: usize) -> usize {
    d ^ 1
}

pub type PointSet = FxHashSet<LatticePoint>;

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint::new(0, 0, 0);

    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        LatticePoint { x, y, z }
    }

    /// Squared Euclidean norm. Exact for coordinates up to 2^31 in magnitude.
    #[inline]
    pub fn norm_sq(self) -> u64 {
        let (a, b, c) = (self.x.unsigned_abs(), self.y.unsigned_abs(), self.z.unsigned_abs());
        a * a + b * b + c * c
    }

    #[inline]
    pub fn norm_max(self) -> u64 {
        self.x
            .unsigned_abs()
            .max(self.y.unsigned_abs())
            .max(self.z.unsigned_abs())
    }

    #[inline]
    pub fn norm_l1(self) -> u64 {
        self.x.unsigned_abs() + self.y.unsigned_abs() + self.z.unsigned_abs()
    }

    #[inline]
    pub fn dist_sq(self, other: LatticePoint) -> u64 {
        (self - other).norm_sq()
    }

    /// Euclidean distance d_E.
    pub fn dist(self, other: LatticePoint) -> f64 {
        (self.dist_sq(other) as f64).sqrt()
    }

    #[inline]
    pub fn step(self, direction: usize) -> LatticePoint {
        self + DIRECTIONS[direction]
    }

    /// The six nearest neighbours in the order +x, -x, +y, -y, +z, -z.
    pub fn neighbors(self) -> [LatticePoint; 6] {
        DIRECTIONS.map(|d| self + d)
    }

    pub fn is_adjacent(self, other: LatticePoint) -> bool {
        (self - other).norm_l1() == 1
    }

    /// Direction index `d` with `self.step(d) == other`, if adjacent.
    pub fn direction_to(self, other: LatticePoint) -> Option<usize> {
        let diff = other - self;
        DIRECTIONS.iter().position(|&d| d == diff)
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    #[inline]
    fn add(self, o: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    #[inline]
    fn sub(self, o: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Free function form of [`LatticePoint::neighbors`].
pub fn neighbors(p: LatticePoint) -> [LatticePoint; 6] {
    p.neighbors()
}

/// A finite nearest-neighbour path `(θ_0, …, θ_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticePath {
    vertices: Vec<LatticePoint>,
}

impl LatticePath {
    pub fn new(vertices: Vec<LatticePoint>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(UstError::EmptyPath);
        }
        if let Some(index) = vertices.windows(2).position(|w| !w[0].is_adjacent(w[1])) {
            return Err(UstError::NotAdjacent { index });
        }
        Ok(LatticePath { vertices })
    }

    /// Caller guarantees the vertices are nonempty and consecutive ones adjacent.
    pub(crate) fn from_trusted(vertices: Vec<LatticePoint>) -> Self {
        debug_assert!(!vertices.is_empty());
        debug_assert!(vertices.windows(2).all(|w| w[0].is_adjacent(w[1])));
        LatticePath { vertices }
    }

    pub fn single(p: LatticePoint) -> Self {
        LatticePath { vertices: vec![p] }
    }

    pub fn vertices(&self) -> &[LatticePoint] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<LatticePoint> {
        self.vertices
    }

    /// Number of steps, `len(θ) = k`.
    pub fn length(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn first(&self) -> LatticePoint {
        self.vertices[0]
    }

    pub fn last(&self) -> LatticePoint {
        *self.vertices.last().expect("paths are nonempty")
    }

    /// True when no vertex repeats.
    pub fn is_simple(&self) -> bool {
        let mut seen = PointSet::default();
        self.vertices.iter().all(|&v| seen.insert(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Euclidean 2-norm, matching d_E.
    #[default]
    Euclidean,
    /// Max norm; gives the cubes [-n, n]^3.
    Max,
}

/// A lattice ball `{y : |y - center| <= radius}` in the chosen norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    pub center: LatticePoint,
    pub radius: u64,
    pub norm: Norm,
}

impl LatticeBox {
    pub fn euclidean(center: LatticePoint, radius: u64) -> Self {
        LatticeBox { center, radius, norm: Norm::Euclidean }
    }

    pub fn cube(center: LatticePoint, radius: u64) -> Self {
        LatticeBox { center, radius, norm: Norm::Max }
    }

    #[inline]
    pub fn contains(&self, p: LatticePoint) -> bool {
        let d = p - self.center;
        match self.norm {
            Norm::Euclidean => d.norm_sq() <= self.radius * self.radius,
            Norm::Max => d.norm_max() <= self.radius,
        }
    }

    /// Every vertex of the box, unordered.
    pub fn points(&self) -> Vec<LatticePoint> {
        let r = self.radius as i64;
        let mut out = Vec::new();
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    let p = self.center + LatticePoint::new(x, y, z);
                    if self.contains(p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    pub fn point_set(&self) -> PointSet {
        self.points().into_iter().collect()
    }
}

/// `{x ∈ A : some neighbour of x lies outside A}`, sorted.
pub fn inner_boundary(set: &PointSet) -> Vec<LatticePoint> {
    let mut out: Vec<_> = set
        .iter()
        .copied()
        .filter(|p| p.neighbors().iter().any(|q| !set.contains(q)))
        .collect();
    out.sort_unstable();
    out
}

/// `{x ∉ A : some neighbour of x lies in A}`, sorted.
pub fn outer_boundary(set: &PointSet) -> Vec<LatticePoint> {
    let mut shell = PointSet::default();
    for p in set {
        for q in p.neighbors() {
            if !set.contains(&q) {
                shell.insert(q);
            }
        }
    }
    let mut out: Vec<_> = shell.into_iter().collect();
    out.sort_unstable();
    out
}

/// Deterministic enumeration of a box: by Euclidean distance from the centre,
/// ties broken lexicographically.
pub fn spiral_order(region: &LatticeBox) -> Vec<LatticePoint> {
    let mut pts = region.points();
    let c = region.center;
    pts.sort_unstable_by_key(|&p| (p.dist_sq(c), p));
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: i64, y: i64, z: i64) -> LatticePoint {
        LatticePoint::new(x, y, z)
    }

    /// Brute-force boundary oracle: scan every point of a bounding cube.
    fn scan_outer(set: &PointSet) -> Vec<LatticePoint> {
        let r = set.iter().map(|q| q.norm_max()).max().unwrap_or(0) as i64 + 1;
        let mut out = Vec::new();
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    let q = p(x, y, z);
                    if !set.contains(&q) && set.iter().any(|a| a.dist_sq(q) == 1) {
                        out.push(q);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    #[test]
    fn neighbors_of_origin_in_documented_order() {
        assert_eq!(
            neighbors(LatticePoint::ORIGIN),
            [p(1, 0, 0), p(-1, 0, 0), p(0, 1, 0), p(0, -1, 0), p(0, 0, 1), p(0, 0, -1)]
        );
        let q = p(1, 2, 3);
        let n = neighbors(q);
        let distinct: PointSet = n.iter().copied().collect();
        assert_eq!(distinct.len(), 6);
        assert!(n.iter().all(|&m| m.dist_sq(q) == 1));
    }

    #[test]
    fn singleton_boundaries() {
        let a: PointSet = [LatticePoint::ORIGIN].into_iter().collect();
        assert_eq!(inner_boundary(&a), vec![LatticePoint::ORIGIN]);
        let mut expect = neighbors(LatticePoint::ORIGIN).to_vec();
        expect.sort_unstable();
        assert_eq!(outer_boundary(&a), expect);
    }

    #[test]
    fn cube_inner_boundary_is_26_shell_points() {
        let a = LatticeBox::cube(LatticePoint::ORIGIN, 1).point_set();
        assert_eq!(a.len(), 27);
        let ib = inner_boundary(&a);
        assert_eq!(ib.len(), 26);
        assert!(!ib.contains(&LatticePoint::ORIGIN));
    }

    #[test]
    fn ball_of_radius_two_inner_boundary() {
        let a = LatticeBox::euclidean(LatticePoint::ORIGIN, 2).point_set();
        let ib = inner_boundary(&a);
        let mut expect: Vec<_> = a
            .iter()
            .copied()
            .filter(|q| q.norm_sq() > 1 && q.norm_sq() <= 4)
            .collect();
        expect.sort_unstable();
        assert_eq!(ib, expect);
    }

    #[test]
    fn two_adjacent_points_have_ten_outer_points() {
        let a: PointSet = [LatticePoint::ORIGIN, p(1, 0, 0)].into_iter().collect();
        let ob = outer_boundary(&a);
        assert_eq!(ob.len(), 10);
        assert_eq!(ob, scan_outer(&a));
    }

    #[test]
    fn spiral_order_small_cases() {
        assert_eq!(spiral_order(&LatticeBox::euclidean(p(0, 0, 0), 0)), vec![p(0, 0, 0)]);
        let s = spiral_order(&LatticeBox::euclidean(p(0, 0, 0), 1));
        let mut nb = neighbors(p(0, 0, 0)).to_vec();
        nb.sort_unstable();
        let mut expect = vec![p(0, 0, 0)];
        expect.extend(nb);
        assert_eq!(s, expect);
        let c = p(5, -3, 2);
        assert_eq!(spiral_order(&LatticeBox::cube(c, 3))[0], c);
    }

    #[test]
    fn path_validation() {
        assert_eq!(LatticePath::new(vec![]), Err(UstError::EmptyPath));
        assert_eq!(
            LatticePath::new(vec![p(0, 0, 0), p(1, 1, 0)]),
            Err(UstError::NotAdjacent { index: 0 })
        );
        let path = LatticePath::new(vec![p(0, 0, 0), p(1, 0, 0), p(1, 1, 0)]).unwrap();
        assert_eq!(path.length(), 2);
        assert!(path.is_simple());
    }

    #[test]
    fn norm_does_not_overflow_at_extreme_coordinates() {
        let big = 1i64 << 31;
        let q = p(big, -big, big);
        assert_eq!(q.norm_sq(), 3 * (1u64 << 62));
        assert_eq!(q.neighbors()[0].x, big + 1);
    }

    #[test]
    fn enclosed_hole_is_outer_but_not_inner_after_filling() {
        let mut set: PointSet = LatticeBox::cube(p(0, 0, 0), 1).point_set();
        set.remove(&p(0, 0, 0));
        let ob = outer_boundary(&set);
        assert!(ob.contains(&p(0, 0, 0)));
        let mut grown = set.clone();
        grown.extend(ob.iter().copied());
        assert!(!inner_boundary(&grown).contains(&p(0, 0, 0)));
    }

    fn small_set() -> impl Strategy<Value = PointSet> {
        proptest::collection::vec((-3i64..=3, -3i64..=3, -3i64..=3), 1..25)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| p(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn adjacency_is_symmetric(x in -100i64..100, y in -100i64..100, z in -100i64..100, d in 0usize..6) {
            let a = p(x, y, z);
            let b = a.step(d);
            prop_assert!(b.neighbors().contains(&a));
            prop_assert_eq!(b.step(opposite(d)), a);
        }

        #[test]
        fn boundary_relations(set in small_set()) {
            let ib = inner_boundary(&set);
            let ob = outer_boundary(&set);
            prop_assert!(ib.iter().all(|q| set.contains(q)));
            prop_assert!(ob.iter().all(|q| !set.contains(q)));
            prop_assert_eq!(&ob, &scan_outer(&set));
            // The added part of the enlarged set's inner boundary is the outer shell,
            // minus shell points whose neighbours all lie in the enlarged set (filled holes).
            let mut grown = set.clone();
            grown.extend(ob.iter().copied());
            let added: Vec<_> = inner_boundary(&grown).into_iter().filter(|q| !set.contains(q)).collect();
            let exposed: Vec<_> = ob
                .iter()
                .copied()
                .filter(|q| q.neighbors().iter().any(|n| !grown.contains(n)))
                .collect();
            prop_assert_eq!(added, exposed);
        }

        #[test]
        fn spiral_order_is_a_bijection(r in 0u64..5, cx in -4i64..4, max in proptest::bool::ANY) {
            let b = if max { LatticeBox::cube(p(cx, 0, -cx), r) } else { LatticeBox::euclidean(p(cx, 1, 0), r) };
            let order = spiral_order(&b);
            let uniq: PointSet = order.iter().copied().collect();
            prop_assert_eq!(uniq.len(), order.len());
            prop_assert_eq!(uniq, b.point_set());
            prop_assert_eq!(order.clone(), spiral_order(&b));
        }
    }
}
