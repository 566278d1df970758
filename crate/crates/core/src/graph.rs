//! Small explicit graphs: unit-test fixtures for the samplers and the
//! matrix-tree validation oracle.

use std::collections::VecDeque;

use crate::rng::RngStream;

/// Simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { adj: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Graph::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert!(a != b, "self-loops are not supported");
        if !self.adj[a].contains(&b) {
            self.adj[a].push(b);
            self.adj[b].push(a);
        }
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::new(n);
        for a in 0..n {
            for b in a + 1..n {
                g.add_edge(a, b);
            }
        }
        g
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges)
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nb) in self.adj.iter().enumerate() {
            for &b in nb {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn random_neighbor(&self, v: usize, rng: &mut RngStream) -> usize {
        let nb = &self.adj[v];
        nb[rng.below(nb.len() as u32) as usize]
    }

    /// Vertices reachable from `sources` (all of them when `allowed` admits everything).
    pub fn reachable(&self, sources: &[usize], allowed: impl Fn(usize) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if !seen[w] && allowed(w) {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.reachable(&[0], |_| true).iter().all(|&b| b)
    }
}

/// Number of spanning trees by the matrix-tree theorem: the determinant of
/// the Laplacian with one row and column removed, in exact integer arithmetic
/// (fraction-free Bareiss elimination). Zero for disconnected graphs.
pub fn spanning_tree_count(graph: &Graph) -> u128 {
    let n = graph.len();
    if n <= 1 {
        return 1;
    }
    let m = n - 1;
    let mut a = vec![vec![0i128; m]; m];
    for v in 1..n {
        a[v - 1][v - 1] = graph.degree(v) as i128;
        for &w in graph.neighbors(v) {
            if w > 0 {
                a[v - 1][w - 1] -= 1;
            }
        }
    }
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..m {
        if a[k][k] == 0 {
            match (k + 1..m).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..m {
            for j in k + 1..m {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    let det = sign * a[m - 1][m - 1];
    det.max(0) as u128
}

/// Canonical key of a spanning tree given as a parent array: its sorted edge list.
pub fn tree_key(parent: &[Option<usize>]) -> Vec<(usize, usize)> {
    let mut edges: Vec<_> = parent
        .iter()
        .enumerate()
        .filter_map(|(v, p)| p.map(|p| (v.min(p), v.max(p))))
        .collect();
    edges.sort_unstable();
    edges
}

/// Every spanning tree of a small graph, by brute-force edge-subset enumeration.
pub fn enumerate_spanning_trees(graph: &Graph) -> Vec<Vec<(usize, usize)>> {
    let edges = graph.edges();
    let n = graph.len();
    assert!(edges.len() <= 20, "enumeration is only meant for tiny graphs");
    let mut out = Vec::new();
    for mask in 0u32..(1 << edges.len()) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let chosen: Vec<_> = (0..edges.len()).filter(|i| mask >> i & 1 == 1).map(|i| edges[i]).collect();
        if Graph::from_edges(n, &chosen).is_connected() {
            out.push(chosen);
        }
    }
    out
}
