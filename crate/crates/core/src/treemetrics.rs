//! Intrinsic geometry of a sampled tree: unique paths, the tree metric d_U,
//! intrinsic balls, and the absorbing domains used by killed walks.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UstError};
use crate::lattice::{LatticeBox, LatticePath, LatticePoint};
use crate::wilson::{Parent, SpanningTree};

/// The unique self-avoiding tree path γ(x, y).
pub fn tree_path(tree: &SpanningTree, x: LatticePoint, y: LatticePoint) -> Result<LatticePath> {
    for v in [x, y] {
        if !tree.contains(v) {
            return Err(UstError::NotInTree(v));
        }
    }
    let mut up_x = vec![x];
    let mut index = FxHashMap::default();
    index.insert(x, 0usize);
    let mut cur = x;
    while let Some(Parent::Vertex(q)) = tree.parent(cur) {
        if !tree.contains(q) {
            return Err(UstError::Truncated(q));
        }
        index.insert(q, up_x.len());
        up_x.push(q);
        cur = q;
    }
    let mut up_y = Vec::new();
    let mut cur = y;
    loop {
        if let Some(&i) = index.get(&cur) {
            up_x.truncate(i + 1);
            up_x.extend(up_y.into_iter().rev());
            return Ok(LatticePath::new(up_x).expect("tree edges are lattice edges"));
        }
        up_y.push(cur);
        match tree.parent(cur) {
            Some(Parent::Vertex(q)) if tree.contains(q) => cur = q,
            Some(Parent::Vertex(q)) => return Err(UstError::Truncated(q)),
            _ => return Err(UstError::JoinedThroughBoundary(x, y)),
        }
    }
}

/// Intrinsic distance d_U(x, y).
pub fn tree_distance(tree: &SpanningTree, x: LatticePoint, y: LatticePoint) -> Result<usize> {
    tree_path(tree, x, y).map(|p| p.length())
}

/// A finite subtree on which walks are killed when they step off it.
///
/// Members are indexed in breadth-first order from the centre (index 0).
/// Each member carries its full tree degree; the tree neighbours that are not
/// members form the absorbing exit layer.
#[derive(Clone, Debug, PartialEq)]
pub struct KilledRegion {
    pub points: Vec<LatticePoint>,
    pub depth: Vec<u32>,
    /// Breadth-first parent; `u32::MAX` for the centre.
    pub parent: Vec<u32>,
    pub degree: Vec<u8>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    /// Exit vertices and the member each one hangs from.
    pub exits: Vec<(LatticePoint, u32)>,
}

pub const NO_PARENT: u32 = u32::MAX;

impl KilledRegion {
    /// Builds a region from explicit member adjacency. `adjacency[i]` lists
    /// member neighbours of member `i`; `degree[i]` is its full tree degree,
    /// the surplus being exits. Index 0 is the centre.
    pub fn from_adjacency(
        points: Vec<LatticePoint>,
        adjacency: Vec<Vec<u32>>,
        degree: Vec<u8>,
        exits: Vec<(LatticePoint, u32)>,
    ) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 || points.len() != n || degree.len() != n {
            return Err(UstError::NotATree("inconsistent region sizes".into()));
        }
        let edge_ends: usize = adjacency.iter().map(Vec::len).sum();
        if edge_ends != 2 * (n - 1) {
            return Err(UstError::NotATree(format!("{n} members but {} edges", edge_ends / 2)));
        }
        for (i, nb) in adjacency.iter().enumerate() {
            if nb.len() > degree[i] as usize {
                return Err(UstError::NotATree(format!("member {i} has more neighbours than its degree")));
            }
            if nb.iter().any(|&j| j as usize >= n || !adjacency[j as usize].contains(&(i as u32))) {
                return Err(UstError::NotATree(format!("asymmetric adjacency at member {i}")));
            }
        }
        // Re-index in breadth-first order from member 0.
        let mut order = Vec::with_capacity(n);
        let mut new_index = vec![NO_PARENT; n];
        let mut bfs_parent = vec![NO_PARENT; n];
        let mut depth = vec![0u32; n];
        new_index[0] = 0;
        order.push(0usize);
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in &adjacency[v] {
                let w = w as usize;
                if new_index[w] == NO_PARENT {
                    new_index[w] = order.len() as u32;
                    bfs_parent[w] = v as u32;
                    depth[w] = depth[v] + 1;
                    order.push(w);
                }
            }
        }
        if order.len() != n {
            return Err(UstError::NotATree("members are not connected".into()));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(2 * (n - 1));
        offsets.push(0);
        for &v in &order {
            targets.extend(adjacency[v].iter().map(|&w| new_index[w as usize]));
            offsets.push(targets.len() as u32);
        }
        Ok(KilledRegion {
            points: order.iter().map(|&v| points[v]).collect(),
            depth: order.iter().map(|&v| depth[v]).collect(),
            parent: order
                .iter()
                .map(|&v| if bfs_parent[v] == NO_PARENT { NO_PARENT } else { new_index[bfs_parent[v] as usize] })
                .collect(),
            degree: order.iter().map(|&v| degree[v]).collect(),
            offsets,
            targets,
            exits: exits.into_iter().map(|(p, o)| (p, new_index[o as usize])).collect(),
        })
    }

    /// A lone vertex of tree degree `degree`, every neighbour an exit.
    pub fn single(degree: u8) -> Self {
        let o = LatticePoint::ORIGIN;
        let exits = (0..degree as usize).map(|d| (o.step(d), 0)).collect();
        KilledRegion::from_adjacency(vec![o], vec![vec![]], vec![degree], exits).expect("valid region")
    }

    /// The segment {-k, .., k} of a bi-infinite line on the x axis, with exits at ±(k+1).
    pub fn line(k: i64) -> Self {
        let points: Vec<_> = (-k..=k).map(|x| LatticePoint::new(x, 0, 0)).collect();
        let n = points.len();
        let adjacency = (0..n)
            .map(|i| {
                let mut nb = Vec::new();
                if i > 0 {
                    nb.push(i as u32 - 1);
                }
                if i + 1 < n {
                    nb.push(i as u32 + 1);
                }
                nb
            })
            .collect();
        let exits = vec![(LatticePoint::new(-k - 1, 0, 0), 0), (LatticePoint::new(k + 1, 0, 0), n as u32 - 1)];
        let mut region = KilledRegion::from_adjacency(points, adjacency, vec![2; n], exits).expect("valid region");
        // Re-centre on the origin.
        let c = region.index_of(LatticePoint::ORIGIN).unwrap();
        if c != 0 {
            region = region.recentered(c);
        }
        region
    }

    /// The same region re-indexed breadth-first from member `c`.
    pub fn recentered(&self, c: usize) -> Self {
        let mut order = vec![c];
        order.extend((0..self.len()).filter(|&i| i != c));
        let pos: Vec<u32> = {
            let mut p = vec![0u32; self.len()];
            for (k, &i) in order.iter().enumerate() {
                p[i] = k as u32;
            }
            p
        };
        let adjacency = order.iter().map(|&i| self.neighbors(i).iter().map(|&j| pos[j as usize]).collect()).collect();
        KilledRegion::from_adjacency(
            order.iter().map(|&i| self.points[i]).collect(),
            adjacency,
            order.iter().map(|&i| self.degree[i]).collect(),
            self.exits.iter().map(|&(p, o)| (p, pos[o as usize])).collect(),
        )
        .expect("re-indexing preserves validity")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Member neighbours of member `i`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    /// Number of exits adjacent to member `i`.
    #[inline]
    pub fn exit_count(&self, i: usize) -> usize {
        self.degree[i] as usize - self.neighbors(i).len()
    }

    /// Children of member `i` in the breadth-first rooting at the centre.
    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.parent[i];
        self.neighbors(i).iter().filter(move |&&w| w != p).map(|&w| w as usize)
    }

    pub fn total_exits(&self) -> usize {
        (0..self.len()).map(|i| self.exit_count(i)).sum()
    }

    pub fn index_of(&self, p: LatticePoint) -> Option<usize> {
        self.points.iter().position(|&q| q == p)
    }

    pub fn max_degree(&self) -> u8 {
        self.degree.iter().copied().max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> u8 {
        self.degree.iter().copied().min().unwrap_or(0)
    }
}

/// Explores tree edges from `center`, admitting a neighbour when `admit`
/// accepts it at the given depth. Every member must have a final degree.
fn explore(tree: &SpanningTree, center: LatticePoint, admit: impl Fn(LatticePoint, u64) -> bool) -> Result<KilledRegion> {
    if !tree.contains(center) {
        return Err(UstError::NotInTree(center));
    }
    let mut points = vec![center];
    let mut index = FxHashMap::default();
    index.insert(center, 0u32);
    let mut depth = vec![0u64];
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new()];
    let mut degree = Vec::new();
    let mut exits = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let x = points[i];
        if let Some(q) = x.neighbors().into_iter().find(|q| !tree.contains(*q)) {
            return Err(UstError::Truncated(q));
        }
        degree.push(tree.degree(x).expect("member is stored"));
        for y in tree.tree_neighbors(x) {
            if let Some(&j) = index.get(&y) {
                if !adjacency[i].contains(&j) {
                    adjacency[i].push(j);
                    adjacency[j as usize].push(i as u32);
                }
                continue;
            }
            if admit(y, depth[i] + 1) {
                let j = points.len() as u32;
                points.push(y);
                index.insert(y, j);
                depth.push(depth[i] + 1);
                adjacency.push(vec![i as u32]);
                adjacency[i].push(j);
                queue.push_back(j as usize);
            } else {
                exits.push((y, i as u32));
            }
        }
    }
    KilledRegion::from_adjacency(points, adjacency, degree, exits)
}

/// B_U(x, r) with its absorbing layer at intrinsic distance r + 1.
#[derive(Clone, Debug, PartialEq)]
pub struct IntrinsicBall {
    pub center: LatticePoint,
    pub radius: u64,
    pub region: KilledRegion,
}

impl IntrinsicBall {
    pub fn members(&self) -> &[LatticePoint] {
        &self.region.points
    }
}

pub fn intrinsic_ball(tree: &SpanningTree, center: LatticePoint, r: u64) -> Result<IntrinsicBall> {
    let region = explore(tree, center, |_, d| d <= r)?;
    Ok(IntrinsicBall { center, radius: r, region })
}

/// U_r: the component of the tree inside the Euclidean ball B(0, r) that
/// contains the origin, with the tree neighbours outside it as exits.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeComponent {
    pub radius: u64,
    pub region: KilledRegion,
}

pub fn component_ur(tree: &SpanningTree, r: u64) -> Result<TreeComponent> {
    let ball = LatticeBox::euclidean(LatticePoint::ORIGIN, r);
    let region = explore(tree, LatticePoint::ORIGIN, |y, _| ball.contains(y))?;
    Ok(TreeComponent { radius: r, region })
}

/// Summary of one intrinsic ball, convenient for reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallStats {
    pub radius: u64,
    pub members: usize,
    pub exits: usize,
    pub max_euclidean: f64,
}

pub fn ball_stats(ball: &IntrinsicBall) -> BallStats {
    let max_euclidean = ball
        .region
        .points
        .iter()
        .map(|p| p.dist(ball.center))
        .fold(0.0, f64::max);
    BallStats {
        radius: ball.radius,
        members: ball.region.len(),
        exits: ball.region.total_exits(),
        max_euclidean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::wilson::{sample_ball_tree, wilson_infinity_approx, WilsonConfig};
    use proptest::prelude::*;

    /// BFS distance over tree edges, ignoring the wired root.
    fn bfs_distance(tree: &SpanningTree, x: LatticePoint, y: LatticePoint) -> Option<usize> {
        let mut dist = FxHashMap::default();
        dist.insert(x, 0usize);
        let mut q = VecDeque::from([x]);
        while let Some(v) = q.pop_front() {
            if v == y {
                return dist.get(&v).copied();
            }
            let d = dist[&v];
            for w in tree.tree_neighbors(v) {
                if tree.contains(w) && !dist.contains_key(&w) {
                    dist.insert(w, d + 1);
                    q.push_back(w);
                }
            }
        }
        None
    }

    fn small_tree(seed: u64) -> SpanningTree {
        wilson_infinity_approx(&WilsonConfig::with_region(4, 3.0), RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn trivial_paths() {
        let t = small_tree(1);
        let o = LatticePoint::ORIGIN;
        assert_eq!(tree_path(&t, o, o).unwrap().length(), 0);
        let pp = t.parent_point(o).unwrap();
        if t.contains(pp) {
            assert_eq!(tree_path(&t, o, pp).unwrap().vertices(), &[o, pp]);
        }
        let outside = LatticePoint::new(100, 0, 0);
        assert_eq!(tree_path(&t, o, outside), Err(UstError::NotInTree(outside)));
    }

    #[test]
    fn path_lengths_match_bfs() {
        let t = small_tree(2);
        let mut pts = t.sorted_vertices();
        let mut rng = RngStream::new(7, 7);
        let mut checked = 0;
        for _ in 0..1000 {
            let x = pts[rng.below(pts.len() as u32) as usize];
            let y = pts[rng.below(pts.len() as u32) as usize];
            if let Ok(path) = tree_path(&t, x, y) {
                assert_eq!(Some(path.length()), bfs_distance(&t, x, y));
            } else {
                assert_eq!(bfs_distance(&t, x, y), None);
            }
        }
        // Pairs inside one intrinsic ball are always joined inside the container.
        let t = sample_ball_tree(&WilsonConfig::default(), 12, RngStream::new(2, 0)).unwrap();
        pts = intrinsic_ball(&t, LatticePoint::ORIGIN, 12).unwrap().region.points;
        for _ in 0..1000 {
            let x = pts[rng.below(pts.len() as u32) as usize];
            let y = pts[rng.below(pts.len() as u32) as usize];
            match tree_path(&t, x, y) {
                Ok(path) => {
                    assert!(path.is_simple());
                    assert_eq!(Some(path.length()), bfs_distance(&t, x, y));
                    checked += 1;
                }
                Err(UstError::JoinedThroughBoundary(..)) => assert_eq!(bfs_distance(&t, x, y), None),
                Err(e) => panic!("{e}"),
            }
        }
        assert_eq!(checked, 1000);
    }

    #[test]
    fn radius_zero_ball() {
        let t = sample_ball_tree(&WilsonConfig::default(), 3, RngStream::new(3, 0)).unwrap();
        let b = intrinsic_ball(&t, LatticePoint::ORIGIN, 0).unwrap();
        assert_eq!(b.members(), &[LatticePoint::ORIGIN]);
        assert_eq!(b.region.total_exits(), t.degree(LatticePoint::ORIGIN).unwrap() as usize);
    }

    #[test]
    fn ball_membership_matches_path_filter_and_grows() {
        let t = sample_ball_tree(&WilsonConfig::default(), 8, RngStream::new(4, 0)).unwrap();
        let o = LatticePoint::ORIGIN;
        let mut last = 0;
        for r in 0..=8 {
            let b = intrinsic_ball(&t, o, r).unwrap();
            assert!(b.region.len() >= last);
            last = b.region.len();
            let mut members = b.members().to_vec();
            members.sort_unstable();
            let mut filtered: Vec<_> = t
                .vertices()
                .filter(|&v| tree_distance(&t, o, v).is_ok_and(|d| d as u64 <= r))
                .collect();
            filtered.sort_unstable();
            assert_eq!(members, filtered);
            for &(e, owner) in &b.region.exits {
                assert_eq!(b.region.depth[owner as usize] as u64, r);
                assert_eq!(tree_distance(&t, o, e).unwrap() as u64, r + 1);
            }
            assert!(b.members().iter().all(|m| m.norm_sq() <= r * r));
        }
    }

    #[test]
    fn unrevealed_ball_is_truncated() {
        let t = sample_ball_tree(&WilsonConfig::default(), 2, RngStream::new(5, 0)).unwrap();
        assert!(matches!(intrinsic_ball(&t, LatticePoint::ORIGIN, 30), Err(UstError::Truncated(_))));
    }

    #[test]
    fn component_contains_origin_and_stays_inside() {
        let cfg = WilsonConfig::with_region(7, 3.0);
        let t = wilson_infinity_approx(&cfg, RngStream::new(6, 0)).unwrap();
        let c = component_ur(&t, 5).unwrap();
        assert_eq!(c.region.points[0], LatticePoint::ORIGIN);
        assert!(c.region.points.iter().all(|p| p.norm_sq() <= 25));
        assert!(c.region.exits.iter().all(|(p, _)| p.norm_sq() > 25));
    }

    #[test]
    fn region_rejects_non_trees() {
        let pts = vec![LatticePoint::ORIGIN; 3];
        let cyc = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        assert!(KilledRegion::from_adjacency(pts.clone(), cyc, vec![2, 2, 2], vec![]).is_err());
        let disconnected = vec![vec![1], vec![0], vec![]];
        assert!(KilledRegion::from_adjacency(pts, disconnected, vec![1, 1, 1], vec![]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn tree_metric_properties(seed in 0u64..10_000) {
            let t = small_tree(seed);
            let pts = t.sorted_vertices();
            let mut rng = RngStream::new(seed, 1);
            for _ in 0..40 {
                let pick = |rng: &mut RngStream| pts[rng.below(pts.len() as u32) as usize];
                let (x, y, z) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
                let (Ok(dxy), Ok(dyz), Ok(dxz)) = (tree_distance(&t, x, y), tree_distance(&t, y, z), tree_distance(&t, x, z)) else {
                    continue;
                };
                prop_assert_eq!(dxy, tree_distance(&t, y, x).unwrap());
                prop_assert!(dxz <= dxy + dyz);
                prop_assert!(dxy as u64 >= (x - y).norm_l1());
                prop_assert!(dxy as f64 >= x.dist(y).floor());
            }
        }
    }
}
