//! Uniform spanning trees by Wilson's algorithm.
//!
//! Lattice trees live on a finite container whose exterior is wired into a
//! single root. Branches are added by loop-erased walks stopped on hitting the
//! current tree or leaving the container. The law of the result does not
//! depend on the order in which start vertices are chosen, even when the
//! order adapts to the tree built so far; the intrinsic-ball samplers use
//! this to reveal only the part of the tree an experiment looks at.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UstError};
use crate::graph::{enumerate_spanning_trees, spanning_tree_count, tree_key, Graph};
use crate::stats::chi_square_uniform;
use crate::lattice::{opposite, spiral_order, LatticeBox, LatticePoint, Norm, PointSet, DIRECTIONS};
use crate::rng::RngStream;
use crate::walk::{LoopEraser, DEFAULT_STEP_BUDGET};

/// First index of the path that lies in `set`.
pub fn hitting_time(path: &[LatticePoint], set: &PointSet) -> Option<usize> {
    path.iter().position(|p| set.contains(p))
}

/// Wilson's algorithm on a small explicit graph rooted at `root`, adding
/// branches from the vertices of `order` in turn. Returns the parent array.
pub fn wilson_graph(graph: &Graph, root: usize, order: &[usize], rng: &mut RngStream) -> Vec<Option<usize>> {
    let n = graph.len();
    let mut in_tree = vec![false; n];
    let mut parent = vec![None; n];
    in_tree[root] = true;
    let mut eraser = LoopEraser::new();
    for &start in order {
        if in_tree[start] {
            continue;
        }
        eraser.clear();
        let mut cur = start;
        eraser.push(cur);
        while !in_tree[cur] {
            cur = graph.random_neighbor(cur, rng);
            eraser.push(cur);
        }
        let branch = eraser.path();
        for w in branch.windows(2).rev() {
            parent[w[0]] = Some(w[1]);
            in_tree[w[0]] = true;
        }
    }
    parent
}

/// Tally of the trees drawn by [`wilson_graph`], indexed like [`enumerate_spanning_trees`].
pub fn tree_counts(graph: &Graph, root: usize, order: &[usize], samples: usize, rng: &RngStream) -> Vec<u64> {
    let trees = enumerate_spanning_trees(graph);
    let index: FxHashMap<Vec<(usize, usize)>, usize> = trees.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut counts = vec![0u64; index.len()];
    let mut rng = rng.clone();
    for _ in 0..samples {
        counts[index[&tree_key(&wilson_graph(graph, root, order, &mut rng))]] += 1;
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub samples: usize,
    /// Matrix-tree count of spanning trees.
    pub tree_count: u128,
    pub frequencies: Vec<f64>,
    /// Largest |frequency − 1/count|.
    pub max_deviation: f64,
    pub chi_square: f64,
    pub p_value: f64,
}

/// Samples `samples` trees of a small graph and tests them against the uniform law.
pub fn wilson_uniformity(graph: &Graph, samples: usize, rng: &RngStream) -> UniformityReport {
    let order: Vec<usize> = (1..graph.len()).collect();
    let counts = tree_counts(graph, 0, &order, samples, rng);
    let tree_count = spanning_tree_count(graph);
    let target = 1.0 / tree_count as f64;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    let max_deviation = frequencies.iter().map(|f| (f - target).abs()).fold(0.0, f64::max);
    let (chi_square, p_value) = chi_square_uniform(&counts);
    UniformityReport { samples, tree_count, frequencies, max_deviation, chi_square, p_value }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Node {
    parent_dir: u8,
    children: u8,
}

/// Where a tree edge out of a vertex toward the root leads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parent {
    Vertex(LatticePoint),
    /// The wired super-vertex standing for everything outside the container.
    Boundary,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeMeta {
    pub seed: u64,
    pub stream: u64,
    pub config: String,
    /// Free-form header lines, written as `# note ...`.
    #[serde(default)]
    pub notes: Vec<String>,
}

/// A (partially revealed) spanning tree of a wired lattice container.
///
/// Every stored vertex knows its parent. A vertex's degree is exact once all
/// six lattice neighbours are stored (see [`SpanningTree::is_closed`]).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningTree {
    container: LatticeBox,
    nodes: FxHashMap<LatticePoint, Node>,
    pub meta: TreeMeta,
}

impl SpanningTree {
    pub fn new(container: LatticeBox) -> Self {
        SpanningTree { container, nodes: FxHashMap::default(), meta: TreeMeta::default() }
    }

    pub fn container(&self) -> &LatticeBox {
        &self.container
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn contains(&self, p: LatticePoint) -> bool {
        self.nodes.contains_key(&p)
    }

    pub fn vertices(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        self.nodes.keys().copied()
    }

    pub fn sorted_vertices(&self) -> Vec<LatticePoint> {
        let mut v: Vec<_> = self.vertices().collect();
        v.sort_unstable();
        v
    }

    pub fn parent(&self, p: LatticePoint) -> Option<Parent> {
        let node = self.nodes.get(&p)?;
        let q = p.step(node.parent_dir as usize);
        Some(if self.container.contains(q) { Parent::Vertex(q) } else { Parent::Boundary })
    }

    /// Lattice neighbour the parent edge points to (outside the container for boundary edges).
    pub fn parent_point(&self, p: LatticePoint) -> Option<LatticePoint> {
        self.nodes.get(&p).map(|n| p.step(n.parent_dir as usize))
    }

    /// Known tree edges at `p`, counting the edge to the wired root.
    pub fn degree(&self, p: LatticePoint) -> Option<u8> {
        self.nodes.get(&p).map(|n| 1 + n.children.count_ones() as u8)
    }

    pub fn children(&self, p: LatticePoint) -> impl Iterator<Item = LatticePoint> {
        let mask = self.nodes.get(&p).map_or(0, |n| n.children);
        (0..6).filter(move |d| mask >> d & 1 == 1).map(move |d| p.step(d))
    }

    /// Tree neighbours inside the container (the wired root is omitted).
    pub fn tree_neighbors(&self, p: LatticePoint) -> Vec<LatticePoint> {
        let mut out = Vec::with_capacity(6);
        if let Some(Parent::Vertex(q)) = self.parent(p) {
            out.push(q);
        }
        out.extend(self.children(p));
        out
    }

    /// True when all six lattice neighbours are stored, so the degree is final.
    pub fn is_closed(&self, p: LatticePoint) -> bool {
        self.contains(p) && p.neighbors().iter().all(|q| self.contains(*q))
    }

    /// Number of tree edges, counting edges into the wired root.
    pub fn edge_count(&self) -> usize {
        self.nodes.len()
    }

    fn insert(&mut self, p: LatticePoint, parent_dir: usize) {
        debug_assert!(self.container.contains(p));
        self.nodes.insert(p, Node { parent_dir: parent_dir as u8, children: 0 });
        let q = p.step(parent_dir);
        if let Some(pn) = self.nodes.get_mut(&q) {
            pn.children |= 1 << opposite(parent_dir);
        }
    }

    /// Checks acyclicity and that parents are stored or wired.
    pub fn validate(&self) -> Result<()> {
        let mut state: FxHashMap<LatticePoint, u8> = FxHashMap::default();
        for start in self.sorted_vertices() {
            let mut chain = Vec::new();
            let mut cur = start;
            loop {
                match state.get(&cur) {
                    Some(2) => break,
                    Some(1) => return Err(UstError::NotATree(format!("cycle through {cur}"))),
                    _ => {}
                }
                state.insert(cur, 1);
                chain.push(cur);
                match self.parent(cur) {
                    Some(Parent::Boundary) => break,
                    Some(Parent::Vertex(q)) if self.contains(q) => cur = q,
                    _ => return Err(UstError::NotATree(format!("parent of {cur} is missing"))),
                }
            }
            for v in chain {
                state.insert(v, 2);
            }
        }
        for (&p, n) in &self.nodes {
            for d in 0..6 {
                let child = p.step(d);
                let is_child = self.nodes.get(&child).is_some_and(|c| c.parent_dir as usize == opposite(d));
                if is_child != (n.children >> d & 1 == 1) {
                    return Err(UstError::NotATree(format!("stale child record at {p}")));
                }
            }
        }
        Ok(())
    }

    /// Text serialization: a header, then one `x y z px py pz` line per vertex
    /// in lexicographic order. A parent outside the container is the wired root.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = self.container;
        let norm = match c.norm {
            Norm::Euclidean => "euclidean",
            Norm::Max => "max",
        };
        let _ = writeln!(s, "# ust-tree v1");
        let _ = writeln!(s, "# seed {} stream {}", self.meta.seed, self.meta.stream);
        let _ = writeln!(s, "# container {} {} {} {} {}", c.center.x, c.center.y, c.center.z, c.radius, norm);
        let _ = writeln!(s, "# config {}", self.meta.config.replace('\n', " "));
        for note in &self.meta.notes {
            let _ = writeln!(s, "# note {}", note.replace('\n', " "));
        }
        let _ = writeln!(s, "# vertices {}", self.len());
        for p in self.sorted_vertices() {
            let q = self.parent_point(p).expect("stored vertex");
            let _ = writeln!(s, "{} {} {} {} {} {}", p.x, p.y, p.z, q.x, q.y, q.z);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, reason: &str| UstError::Parse { line, reason: reason.to_string() };
        let mut lines = text.lines().enumerate();
        let mut header = |expect: &str| -> Result<(usize, String)> {
            let (i, l) = lines.next().ok_or_else(|| perr(0, "truncated header"))?;
            let rest = l
                .strip_prefix("# ")
                .and_then(|r| r.strip_prefix(expect))
                .ok_or_else(|| perr(i + 1, &format!("expected `# {expect}`")))?;
            Ok((i + 1, rest.trim_start_matches(' ').to_string()))
        };
        let (ln, magic) = header("ust-tree")?;
        if magic != "v1" {
            return Err(perr(ln, "unsupported version"));
        }
        let (ln, seeds) = header("seed")?;
        let parts: Vec<&str> = seeds.split(' ').collect();
        let (seed, stream) = match parts.as_slice() {
            [s, "stream", t] => (
                s.parse().map_err(|_| perr(ln, "bad seed"))?,
                t.parse().map_err(|_| perr(ln, "bad stream"))?,
            ),
            _ => return Err(perr(ln, "bad seed line")),
        };
        let (ln, cont) = header("container")?;
        let f: Vec<&str> = cont.split(' ').collect();
        if f.len() != 5 {
            return Err(perr(ln, "bad container line"));
        }
        let num = |s: &str| s.parse::<i64>().map_err(|_| perr(ln, "bad container number"));
        let center = LatticePoint::new(num(f[0])?, num(f[1])?, num(f[2])?);
        let radius = f[3].parse::<u64>().map_err(|_| perr(ln, "bad radius"))?;
        let norm = match f[4] {
            "euclidean" => Norm::Euclidean,
            "max" => Norm::Max,
            _ => return Err(perr(ln, "bad norm")),
        };
        let (_, config) = header("config")?;
        let mut notes = Vec::new();
        let (ln, count) = loop {
            let (i, l) = lines.next().ok_or_else(|| perr(0, "truncated header"))?;
            if let Some(note) = l.strip_prefix("# note ") {
                notes.push(note.to_string());
            } else if let Some(count) = l.strip_prefix("# vertices ") {
                break (i + 1, count.to_string());
            } else {
                return Err(perr(i + 1, "expected `# note` or `# vertices`"));
            }
        };
        let count: usize = count.parse().map_err(|_| perr(ln, "bad vertex count"))?;
        let mut tree = SpanningTree::new(LatticeBox { center, radius, norm });
        tree.meta = TreeMeta { seed, stream, config, notes };
        let mut edges = Vec::with_capacity(count);
        for (i, l) in lines {
            let v: Vec<i64> = l
                .split(' ')
                .map(|t| t.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| perr(i + 1, "bad coordinate"))?;
            if v.len() != 6 {
                return Err(perr(i + 1, "expected six coordinates"));
            }
            let p = LatticePoint::new(v[0], v[1], v[2]);
            let q = LatticePoint::new(v[3], v[4], v[5]);
            let d = p.direction_to(q).ok_or_else(|| perr(i + 1, "parent is not a lattice neighbour"))?;
            if !tree.container.contains(p) {
                return Err(perr(i + 1, "vertex outside the container"));
            }
            edges.push((p, d));
        }
        if edges.len() != count {
            return Err(perr(0, "vertex count mismatch"));
        }
        for &(p, d) in &edges {
            tree.nodes.insert(p, Node { parent_dir: d as u8, children: 0 });
        }
        for &(p, d) in &edges {
            if let Some(pn) = tree.nodes.get_mut(&p.step(d)) {
                pn.children |= 1 << opposite(d);
            }
        }
        tree.validate()?;
        Ok(tree)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Cube container [-R, R]^3 with its exterior wired to the root.
    Wired,
    /// Euclidean ball container; the first branch is the loop erasure of a
    /// walk from the origin to the container exit, standing in for the
    /// infinite loop-erased walk.
    #[default]
    InfinityApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VertexOrder {
    #[default]
    Spiral,
    Lexicographic,
    ReverseSpiral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilsonConfig {
    pub region_radius: u64,
    pub container_factor: f64,
    pub boundary_mode: BoundaryMode,
    pub order: VertexOrder,
    pub step_budget: u64,
}

impl Default for WilsonConfig {
    fn default() -> Self {
        WilsonConfig {
            region_radius: 4,
            container_factor: 4.0,
            boundary_mode: BoundaryMode::InfinityApprox,
            order: VertexOrder::Spiral,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

impl WilsonConfig {
    pub fn with_region(region_radius: u64, container_factor: f64) -> Self {
        WilsonConfig { region_radius, container_factor, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.container_factor >= 2.0) {
            return Err(UstError::InvalidConfig(format!(
                "container factor must be at least 2, got {}",
                self.container_factor
            )));
        }
        if self.container_radius() < self.region_radius + 2 {
            return Err(UstError::InvalidConfig(format!(
                "container radius {} must exceed region radius {} by at least 2",
                self.container_radius(),
                self.region_radius
            )));
        }
        Ok(())
    }

    pub fn container_radius(&self) -> u64 {
        (self.container_factor * self.region_radius as f64).ceil() as u64
    }

    pub fn container(&self) -> LatticeBox {
        let r = self.container_radius();
        match self.boundary_mode {
            BoundaryMode::Wired => LatticeBox::cube(LatticePoint::ORIGIN, r),
            BoundaryMode::InfinityApprox => LatticeBox::euclidean(LatticePoint::ORIGIN, r),
        }
    }

    pub fn region(&self) -> LatticeBox {
        LatticeBox::euclidean(LatticePoint::ORIGIN, self.region_radius)
    }
}

/// Incremental Wilson sampler on a wired container.
pub struct WilsonSampler {
    tree: SpanningTree,
    rng: RngStream,
    eraser: LoopEraser<LatticePoint>,
    budget: u64,
    steps: u64,
}

impl WilsonSampler {
    pub fn new(container: LatticeBox, rng: RngStream, budget: u64) -> Self {
        let mut tree = SpanningTree::new(container);
        tree.meta.seed = rng.seed();
        tree.meta.stream = rng.stream_index();
        WilsonSampler { tree, rng, eraser: LoopEraser::new(), budget, steps: 0 }
    }

    pub fn tree(&self) -> &SpanningTree {
        &self.tree
    }

    pub fn into_tree(self) -> SpanningTree {
        self.tree
    }

    /// Total walk steps consumed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Adds the loop-erased branch from `start`, unless it is already in the
    /// tree or outside the container.
    pub fn attach(&mut self, start: LatticePoint) -> Result<()> {
        let container = self.tree.container;
        if self.tree.contains(start) || !container.contains(start) {
            return Ok(());
        }
        self.eraser.clear();
        self.eraser.push(start);
        let mut cur = start;
        loop {
            if self.steps >= self.budget {
                return Err(UstError::StepBudget { budget: self.budget });
            }
            cur = cur.step(self.rng.below(6) as usize);
            self.steps += 1;
            self.eraser.push(cur);
            if !container.contains(cur) || self.tree.contains(cur) {
                break;
            }
        }
        let branch = self.eraser.take();
        for w in branch.windows(2).rev() {
            let d = w[0].direction_to(w[1]).expect("walk steps are unit steps");
            self.tree.insert(w[0], d);
        }
        Ok(())
    }

    /// Makes `p`'s degree final by attaching all of its lattice neighbours.
    pub fn close(&mut self, p: LatticePoint) -> Result<()> {
        for q in p.neighbors() {
            if !self.tree.container.contains(q) {
                return Err(UstError::Truncated(q));
            }
            self.attach(q)?;
        }
        Ok(())
    }

    /// Reveals B_U(center, r) with final degrees on all of its members.
    pub fn reveal_intrinsic_ball(&mut self, center: LatticePoint, r: u64) -> Result<()> {
        self.attach(center)?;
        let mut seen = PointSet::default();
        seen.insert(center);
        let mut queue = VecDeque::from([(center, 0u64)]);
        while let Some((x, d)) = queue.pop_front() {
            self.close(x)?;
            if d == r {
                continue;
            }
            for y in self.tree.tree_neighbors(x) {
                if seen.insert(y) {
                    queue.push_back((y, d + 1));
                }
            }
        }
        Ok(())
    }

    /// Reveals the component of the tree inside the Euclidean ball B(0, r)
    /// that contains the origin, with final degrees on its members.
    pub fn reveal_component(&mut self, r: u64) -> Result<()> {
        let origin = LatticePoint::ORIGIN;
        let inside = LatticeBox::euclidean(origin, r);
        self.attach(origin)?;
        let mut seen = PointSet::default();
        seen.insert(origin);
        let mut queue = VecDeque::from([origin]);
        while let Some(x) = queue.pop_front() {
            self.close(x)?;
            for y in self.tree.tree_neighbors(x) {
                if inside.contains(y) && seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        Ok(())
    }
}

/// Exact uniform spanning tree of `region` with its exterior wired to a root.
pub fn wilson_wired(region: &LatticeBox, rng: RngStream) -> Result<SpanningTree> {
    wilson_wired_ordered(region, &spiral_order(region), rng)
}

/// As [`wilson_wired`] with an explicit start order (a permutation of the region).
pub fn wilson_wired_ordered(region: &LatticeBox, order: &[LatticePoint], rng: RngStream) -> Result<SpanningTree> {
    let mut sampler = WilsonSampler::new(*region, rng, DEFAULT_STEP_BUDGET);
    for &p in order {
        sampler.attach(p)?;
    }
    Ok(sampler.into_tree())
}

fn ordered_region(config: &WilsonConfig) -> Vec<LatticePoint> {
    let region = config.region();
    match config.order {
        VertexOrder::Spiral => spiral_order(&region),
        VertexOrder::ReverseSpiral => {
            let mut v = spiral_order(&region);
            v.reverse();
            v
        }
        VertexOrder::Lexicographic => {
            let mut v = region.points();
            v.sort_unstable();
            v
        }
    }
}

fn sampler_for(config: &WilsonConfig, rng: RngStream) -> Result<WilsonSampler> {
    config.validate()?;
    let mut sampler = WilsonSampler::new(config.container(), rng, config.step_budget);
    sampler.tree.meta.config = format!(
        "region_radius={} container_factor={} boundary_mode={:?} order={:?}",
        config.region_radius, config.container_factor, config.boundary_mode, config.order
    );
    if config.boundary_mode == BoundaryMode::InfinityApprox {
        sampler.attach(LatticePoint::ORIGIN)?;
    }
    Ok(sampler)
}

/// Tree covering every vertex of B(0, region_radius), built by first running
/// the origin branch and then branches from region vertices in the configured order.
pub fn wilson_infinity_approx(config: &WilsonConfig, rng: RngStream) -> Result<SpanningTree> {
    let mut sampler = sampler_for(config, rng)?;
    for p in ordered_region(config) {
        sampler.attach(p)?;
    }
    Ok(sampler.into_tree())
}

/// Tree revealed just enough to contain B_U(0, r) with final degrees.
/// `config.region_radius` is ignored; the container is sized from `r + 1`.
pub fn sample_ball_tree(config: &WilsonConfig, r: u64, rng: RngStream) -> Result<SpanningTree> {
    let cfg = WilsonConfig { region_radius: r + 1, ..config.clone() };
    let mut sampler = sampler_for(&cfg, rng)?;
    sampler.reveal_intrinsic_ball(LatticePoint::ORIGIN, r)?;
    Ok(sampler.into_tree())
}

/// Tree revealed to contain both B_U(0, r) and the component U_r with final degrees.
pub fn sample_profile_tree(config: &WilsonConfig, r: u64, rng: RngStream) -> Result<SpanningTree> {
    let cfg = WilsonConfig { region_radius: r + 1, ..config.clone() };
    let mut sampler = sampler_for(&cfg, rng)?;
    sampler.reveal_intrinsic_ball(LatticePoint::ORIGIN, r)?;
    sampler.reveal_component(r)?;
    Ok(sampler.into_tree())
}

/// The edges of the tree among the seven vertices of B(0,1), as a bitmask over
/// [`DIRECTIONS`]: bit `d` is set when the origin is joined to `DIRECTIONS[d]`.
pub fn unit_star_pattern(tree: &SpanningTree) -> Option<u8> {
    let o = LatticePoint::ORIGIN;
    let mut mask = 0u8;
    for (d, &e) in DIRECTIONS.iter().enumerate() {
        let joined = tree.parent_point(o)? == e || tree.parent_point(e)? == o;
        if joined {
            mask |= 1 << d;
        }
    }
    Some(mask)
}

/// Samples the restriction of the tree to B(0,1) by attaching only those seven vertices.
pub fn sample_unit_star(config: &WilsonConfig, rng: RngStream) -> Result<u8> {
    let mut sampler = sampler_for(config, rng)?;
    sampler.attach(LatticePoint::ORIGIN)?;
    for d in DIRECTIONS {
        sampler.attach(d)?;
    }
    Ok(unit_star_pattern(sampler.tree()).expect("all seven vertices attached"))
}
