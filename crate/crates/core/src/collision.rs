//! Two independent killed random walks on a sampled tree: collision counts,
//! their exact first and second moments, and the moment-bound experiment.

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UstError};
use crate::lattice::LatticePoint;
use crate::network::{green_diagonal_all, resistance_tree};
use crate::rng::RngStream;
use crate::stats::mean_se;
use crate::treemetrics::{intrinsic_ball, KilledRegion, NO_PARENT};
use crate::wilson::{sample_ball_tree, SpanningTree, WilsonConfig};

pub const DEFAULT_EXACT_CAP: usize = 200_000;
pub const DEFAULT_EPS_GRID: [f64; 5] = [0.5, 0.2, 0.1, 0.05, 0.02];
const NODES_PER_PANEL: usize = 20;

/// Position of a killed walk: a member index, or `None` for the cemetery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KilledWalkState {
    pub position: Option<u32>,
    pub step: u64,
}

impl KilledWalkState {
    pub fn start(member: u32) -> Self {
        KilledWalkState { position: Some(member), step: 0 }
    }

    pub fn is_alive(&self) -> bool {
        self.position.is_some()
    }
}

/// One step: a uniform choice among the μ_U tree neighbours; exits kill the walk.
#[inline]
pub fn step_killed_walk(state: KilledWalkState, region: &KilledRegion, rng: &mut RngStream) -> KilledWalkState {
    let Some(x) = state.position else {
        return state;
    };
    let nb = region.neighbors(x as usize);
    let k = rng.below(region.degree[x as usize] as u32) as usize;
    KilledWalkState { position: nb.get(k).copied(), step: state.step + 1 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionSample {
    pub z: u64,
    /// First time each walk is in the cemetery.
    pub lifetime_x: u64,
    pub lifetime_y: u64,
}

/// Runs both walks from the centre until both are dead, counting the times
/// at which they sit on the same live vertex.
pub fn sample_z(region: &KilledRegion, rng_x: &mut RngStream, rng_y: &mut RngStream) -> CollisionSample {
    let mut x = KilledWalkState::start(0);
    let mut y = KilledWalkState::start(0);
    let mut z = 0;
    let (mut lx, mut ly) = (None, None);
    loop {
        if x.is_alive() && x.position == y.position {
            z += 1;
        }
        if !x.is_alive() && lx.is_none() {
            lx = Some(x.step);
        }
        if !y.is_alive() && ly.is_none() {
            ly = Some(y.step);
        }
        if let (Some(lifetime_x), Some(lifetime_y)) = (lx, ly) {
            return CollisionSample { z, lifetime_x, lifetime_y };
        }
        x = step_killed_walk(x, region, rng_x);
        y = step_killed_walk(y, region, rng_y);
    }
}

/// Z counted only until the first death (after which no collision is
/// possible) or until it reaches `cap`.
pub fn count_collisions(region: &KilledRegion, rng_x: &mut RngStream, rng_y: &mut RngStream, cap: u64) -> u64 {
    let mut x = 0u32;
    let mut y = 0u32;
    let mut z = 1;
    while z < cap {
        let dx = region.degree[x as usize] as u32;
        let dy = region.degree[y as usize] as u32;
        let kx = rng_x.below(dx) as usize;
        let ky = rng_y.below(dy) as usize;
        let (nx, ny) = (region.neighbors(x as usize), region.neighbors(y as usize));
        match (nx.get(kx), ny.get(ky)) {
            (Some(&a), Some(&b)) => {
                x = a;
                y = b;
                z += (a == b) as u64;
            }
            _ => break,
        }
    }
    z
}

/// Streams of run `k` for the two walks.
pub fn run_streams(base: &RngStream, k: u64) -> (RngStream, RngStream) {
    (base.derive(2 * k), base.derive(2 * k + 1))
}

/// Collision counts of `runs` independent pairs, in run order.
pub fn collision_counts(region: &KilledRegion, runs: usize, base: &RngStream, cap: u64) -> Vec<u64> {
    (0..runs as u64)
        .into_par_iter()
        .map(|k| {
            let (mut rx, mut ry) = run_streams(base, k);
            count_collisions(region, &mut rx, &mut ry, cap)
        })
        .collect()
}

/// Exact moments of Z for walks started at the centre of a region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub ez: f64,
    pub ez2: f64,
    /// Σ_n P(X_{2n} = 0).
    pub even_return: f64,
    /// Largest expected exit time; its inverse bounds the spectral gap from below.
    pub max_exit_time: f64,
    pub quadrature_nodes: usize,
    /// V(0, x) = Σ_n P(X_n = x)² per member.
    #[serde(skip)]
    pub pair_visits: Vec<f64>,
    /// E_{x,x}(Z) per member.
    #[serde(skip)]
    pub restart_collisions: Vec<f64>,
}

/// Edge generating functions at `z`: `down[v]` = h(v → parent), `up[v]` = h(parent → v),
/// and the diagonal G_z(x, x).
struct EdgeFunctions {
    down: Vec<Complex64>,
    up: Vec<Complex64>,
    diag: Vec<Complex64>,
}

fn edge_functions(region: &KilledRegion, z: Complex64) -> EdgeFunctions {
    let n = region.len();
    let step: Vec<Complex64> = region.degree.iter().map(|&d| z / d as f64).collect();
    let mut into = vec![Complex64::new(0.0, 0.0); n];
    let mut down = vec![Complex64::new(0.0, 0.0); n];
    for v in (0..n).rev() {
        down[v] = step[v] / (1.0 - step[v] * into[v]);
        let p = region.parent[v];
        if p != NO_PARENT {
            into[p as usize] += down[v];
        }
    }
    let mut up = vec![Complex64::new(0.0, 0.0); n];
    let mut diag = vec![Complex64::new(0.0, 0.0); n];
    for p in 0..n {
        let total = into[p] + up[p];
        diag[p] = 1.0 / (1.0 - step[p] * total);
        for c in region.children(p) {
            up[c] = step[p] / (1.0 - step[p] * (total - down[c]));
        }
    }
    EdgeFunctions { down, up, diag }
}

/// Σ_y w(x→y) f(y) for every x, where w multiplies edge weights along the
/// tree path; `down_w[v]` weighs v → parent and `up_w[v]` parent → v.
fn path_sums(region: &KilledRegion, f: &[f64], down_w: &[f64], up_w: &[f64]) -> Vec<f64> {
    let n = region.len();
    let mut below = f.to_vec();
    for v in (1..n).rev() {
        let p = region.parent[v] as usize;
        below[p] += up_w[v] * below[v];
    }
    let mut above = vec![0.0; n];
    for v in 1..n {
        let p = region.parent[v] as usize;
        // Everything reachable from p without entering v's subtree.
        let from_p = above[p] + below[p] - up_w[v] * below[v];
        above[v] = down_w[v] * from_p;
    }
    below.iter().zip(&above).map(|(b, a)| b + a).collect()
}

/// Nodes and weights on [0, π/2], refined geometrically toward 0 where the
/// integrand has its peak of width ≳ `gap`.
fn quadrature(gap: f64, per_panel: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(per_panel).expect("valid degree");
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut edges = vec![0.0];
    let mut a = (gap / 2.0).min(half_pi);
    while a < half_pi {
        edges.push(a);
        a *= 2.0;
    }
    edges.push(half_pi);
    let mut out = Vec::with_capacity(per_panel * (edges.len() - 1));
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        for &(x, wt) in rule.as_node_weight_pairs() {
            out.push((mid + half * x, half * wt));
        }
    }
    out
}

/// Exact E Z and E Z² for two walks from the centre, by Parseval's identity
/// on the unit circle: V(0,x) = (1/2π)∫|G_z(0,x)|² dθ and
/// E_{x,x}Z = (1/2π)∫ Σ_y |G_z(x,y)|² dθ, with all G_z from tree recursions.
pub fn exact_moments(region: &KilledRegion, cap: usize) -> Result<ExactMoments> {
    exact_moments_with(region, cap, NODES_PER_PANEL)
}

fn exact_moments_with(region: &KilledRegion, cap: usize, per_panel: usize) -> Result<ExactMoments> {
    let n = region.len();
    if n > cap {
        return Err(UstError::CapExceeded { size: n, cap });
    }
    let one = Complex64::new(1.0, 0.0);
    let real = edge_functions(region, one);
    let down1: Vec<f64> = real.down.iter().map(|c| c.re).collect();
    let up1: Vec<f64> = real.up.iter().map(|c| c.re).collect();
    let diag1: Vec<f64> = real.diag.iter().map(|c| c.re).collect();
    let exit_times = path_sums(region, &diag1, &down1, &up1);
    let max_exit_time = exit_times.iter().copied().fold(0.0, f64::max);
    let neg = edge_functions(region, -one);
    let even_return = (real.diag[0].re + neg.diag[0].re) / 2.0;

    let nodes = quadrature(1.0 / max_exit_time, per_panel);
    let mut v_acc = vec![0.0; n];
    let mut h_acc = vec![0.0; n];
    let mut from_origin = vec![Complex64::new(0.0, 0.0); n];
    let mut diag_sq = vec![0.0; n];
    let mut down_sq = vec![0.0; n];
    let mut up_sq = vec![0.0; n];
    for &(theta, w) in &nodes {
        let e = edge_functions(region, Complex64::from_polar(1.0, theta));
        from_origin[0] = one;
        for v in 1..n {
            from_origin[v] = from_origin[region.parent[v] as usize] * e.up[v];
        }
        for v in 0..n {
            diag_sq[v] = e.diag[v].norm_sqr();
            down_sq[v] = e.down[v].norm_sqr();
            up_sq[v] = e.up[v].norm_sqr();
            v_acc[v] += w * (from_origin[v] * e.diag[v]).norm_sqr();
        }
        let q = path_sums(region, &diag_sq, &down_sq, &up_sq);
        for v in 0..n {
            h_acc[v] += w * q[v];
        }
    }
    // (1/2π)∫_0^{2π} = (2/π)∫_0^{π/2} by the symmetries θ ↦ −θ and θ ↦ π − θ.
    let scale = 2.0 / std::f64::consts::PI;
    v_acc.iter_mut().chain(h_acc.iter_mut()).for_each(|a| *a *= scale);
    let ez: f64 = v_acc.iter().sum();
    let cross: f64 = v_acc.iter().zip(&h_acc).map(|(v, h)| v * h).sum();
    Ok(ExactMoments {
        ez,
        ez2: 2.0 * cross - ez,
        even_return,
        max_exit_time,
        quadrature_nodes: nodes.len(),
        pair_visits: v_acc,
        restart_collisions: h_acc,
    })
}

/// Expected exit time from every member.
pub fn exit_times(region: &KilledRegion) -> Vec<f64> {
    let e = edge_functions(region, Complex64::new(1.0, 0.0));
    let re = |v: &[Complex64]| v.iter().map(|c| c.re).collect::<Vec<_>>();
    path_sums(region, &re(&e.diag), &re(&e.down), &re(&e.up))
}

/// Per-tree record of the moment experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub r: u64,
    pub tree_index: u64,
    pub ball_size: usize,
    pub degree_origin: u8,
    pub max_degree: u8,
    pub exact_ez: f64,
    pub exact_ez2: f64,
    pub even_return: f64,
    pub green_origin: f64,
    pub r_eff_origin: f64,
    pub max_green_diagonal: f64,
    /// Monte Carlo estimates; absent when no runs were requested.
    pub mc: Option<McEstimate>,
    pub verdicts: Verdicts,
    /// For each ε of the grid: MC estimate of P(εr ≤ Z ≤ 72ε⁻²r) and its standard error.
    pub window_probability: Vec<WindowEstimate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub runs: usize,
    pub ez: f64,
    pub ez_se: f64,
    pub ez2: f64,
    pub ez2_se: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    pub eps: f64,
    pub p: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    /// E Z ≤ 6(r+1).
    pub upper_first: bool,
    /// E Z² ≤ 144(r+1)² + 6(r+1).
    pub upper_second: bool,
    /// The same two bounds with r in place of r+1.
    pub upper_first_r: bool,
    pub upper_second_r: bool,
    /// ½G(0,0) ≤ E Z ≤ G(0,0).
    pub green_bracket: bool,
    /// G(0,0)·μ_min/μ(0) ≤ E Z ≤ G(0,0)·μ_max/μ(0), which holds for any degrees.
    pub degree_bracket: bool,
    /// E Z² ≤ G(0,0) + 2G(0,0)·max_x G(x,x).
    pub second_moment_display: bool,
    /// |MC mean − exact| ≤ 4 standard errors; absent without Monte Carlo.
    pub mc_agrees: Option<bool>,
    /// E Z ≥ εr for each ε of the grid.
    pub lower: Vec<(f64, bool)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentExperimentConfig {
    pub r: u64,
    pub trees: usize,
    pub mc_runs: usize,
    pub eps_grid: Vec<f64>,
    pub wilson: WilsonConfig,
    pub exact_cap: usize,
}

impl Default for MomentExperimentConfig {
    fn default() -> Self {
        MomentExperimentConfig {
            r: 25,
            trees: 200,
            mc_runs: 1000,
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
            wilson: WilsonConfig::default(),
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

/// Moment report for one ball. `mc_base` seeds the Monte Carlo runs.
pub fn moment_report(
    region: &KilledRegion,
    r: u64,
    tree_index: u64,
    eps_grid: &[f64],
    mc_runs: usize,
    mc_base: &RngStream,
    cap: usize,
) -> Result<MomentReport> {
    let exact = exact_moments(region, cap)?;
    let r_eff = resistance_tree(region, 0);
    let mu0 = region.degree[0] as f64;
    let g00 = mu0 * r_eff;
    let max_g = green_diagonal_all(region).into_iter().fold(0.0, f64::max);
    let counts = collision_counts(region, mc_runs, mc_base, u64::MAX);
    let mc = (mc_runs >= 2).then(|| {
        let (ez, ez_se) = mean_se(counts.iter().map(|&z| z as f64));
        let (ez2, ez2_se) = mean_se(counts.iter().map(|&z| (z as f64).powi(2)));
        McEstimate { runs: mc_runs, ez, ez_se, ez2, ez2_se }
    });
    let rf = r as f64;
    let r1 = rf + 1.0;
    let tol = 1e-9 * exact.ez.max(1.0);
    let (mu_min, mu_max) = (region.min_degree() as f64, region.max_degree() as f64);
    let window_probability = eps_grid
        .iter()
        .filter(|_| mc.is_some())
        .map(|&eps| {
            let (lo, hi) = (eps * rf, 72.0 * rf / (eps * eps));
            let (p, se) = mean_se(counts.iter().map(|&z| ((z as f64) >= lo && (z as f64) <= hi) as u8 as f64));
            WindowEstimate { eps, p, se }
        })
        .collect();
    let verdicts = Verdicts {
        upper_first: exact.ez <= 6.0 * r1 + tol,
        upper_second: exact.ez2 <= 144.0 * r1 * r1 + 6.0 * r1 + tol,
        upper_first_r: exact.ez <= 6.0 * rf + tol,
        upper_second_r: exact.ez2 <= 144.0 * rf * rf + 6.0 * rf + tol,
        green_bracket: 0.5 * g00 - tol <= exact.ez && exact.ez <= g00 + tol,
        degree_bracket: g00 * mu_min / mu0 - tol <= exact.ez && exact.ez <= g00 * mu_max / mu0 + tol,
        second_moment_display: exact.ez2 <= g00 + 2.0 * g00 * max_g + tol,
        mc_agrees: mc.map(|m| (m.ez - exact.ez).abs() <= 4.0 * m.ez_se || (m.ez - exact.ez).abs() <= tol),
        lower: eps_grid.iter().map(|&eps| (eps, exact.ez >= eps * rf)).collect(),
    };
    Ok(MomentReport {
        r,
        tree_index,
        ball_size: region.len(),
        degree_origin: region.degree[0],
        max_degree: region.max_degree(),
        exact_ez: exact.ez,
        exact_ez2: exact.ez2,
        even_return: exact.even_return,
        green_origin: g00,
        r_eff_origin: r_eff,
        max_green_diagonal: max_g,
        mc,
        verdicts,
        window_probability,
    })
}

/// Aggregate verdicts over all trees of one radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub r: u64,
    pub trees: usize,
    pub upper_first_violations: usize,
    pub upper_second_violations: usize,
    pub upper_first_r_violations: usize,
    pub upper_second_r_violations: usize,
    pub green_bracket_violations: usize,
    pub degree_bracket_violations: usize,
    pub mc_disagreements: usize,
    pub lower: Vec<LowerBoundRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub eps: f64,
    /// Trees with E Z < εr.
    pub failures: usize,
    pub failure_fraction: f64,
    /// Trees passing E Z ≥ εr.
    pub passing: usize,
    /// Passing trees whose MC window probability falls below ε²/12 − 2·SE.
    pub window_violations: usize,
    pub min_window_probability: Option<f64>,
    pub window_bound: f64,
}

pub fn summarize(r: u64, reports: &[MomentReport], eps_grid: &[f64]) -> MomentSummary {
    let count = |f: &dyn Fn(&MomentReport) -> bool| reports.iter().filter(|m| f(m)).count();
    let lower = eps_grid
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let failures = count(&|m| !m.verdicts.lower[k].1);
            let bound = eps * eps / 12.0;
            let passing: Vec<_> = reports.iter().filter(|m| m.verdicts.lower[k].1).collect();
            let window = |m: &MomentReport| m.window_probability.get(k).copied();
            LowerBoundRow {
                eps,
                failures,
                failure_fraction: if reports.is_empty() { 0.0 } else { failures as f64 / reports.len() as f64 },
                passing: passing.len(),
                window_violations: passing
                    .iter()
                    .filter(|m| window(m).is_some_and(|w| w.p < bound - 2.0 * w.se))
                    .count(),
                min_window_probability: passing
                    .iter()
                    .filter_map(|m| window(m).map(|w| w.p))
                    .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.min(p)))),
                window_bound: bound,
            }
        })
        .collect();
    MomentSummary {
        r,
        trees: reports.len(),
        upper_first_violations: count(&|m| !m.verdicts.upper_first),
        upper_second_violations: count(&|m| !m.verdicts.upper_second),
        upper_first_r_violations: count(&|m| !m.verdicts.upper_first_r),
        upper_second_r_violations: count(&|m| !m.verdicts.upper_second_r),
        green_bracket_violations: count(&|m| !m.verdicts.green_bracket),
        degree_bracket_violations: count(&|m| !m.verdicts.degree_bracket),
        mc_disagreements: count(&|m| m.verdicts.mc_agrees == Some(false)),
        lower,
    }
}

/// Tree `i` of an experiment uses `base.derive(i)`: sub-stream 0 samples the
/// tree, sub-stream 1 drives the Monte Carlo walks.
pub fn experiment_tree(config: &WilsonConfig, r: u64, base: &RngStream, i: u64) -> Result<SpanningTree> {
    sample_ball_tree(config, r, base.derive(i).derive(0))
}

pub fn moment_experiment(config: &MomentExperimentConfig, base: &RngStream) -> Result<(Vec<MomentReport>, MomentSummary)> {
    if config.r < 1 {
        return Err(UstError::InvalidConfig("r must be at least 1".into()));
    }
    let reports = (0..config.trees as u64)
        .into_par_iter()
        .map(|i| {
            let tree = experiment_tree(&config.wilson, config.r, base, i)?;
            let ball = intrinsic_ball(&tree, LatticePoint::ORIGIN, config.r)?;
            moment_report(
                &ball.region,
                config.r,
                i,
                &config.eps_grid,
                config.mc_runs,
                &base.derive(i).derive(1),
                config.exact_cap,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(config.r, &reports, &config.eps_grid);
    Ok((reports, summary))
}

/// P(Z_B ≥ N) for each threshold, from collision counts on one ball.
pub fn tail_profile(counts: &[u64], thresholds: &[u64]) -> Vec<(u64, f64)> {
    let n = counts.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&t| (t, counts.iter().filter(|&&z| z >= t).count() as f64 / n))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionCertificate {
    pub n: u64,
    pub radius: u64,
    pub p: f64,
    pub se: f64,
    pub bound: f64,
    pub holds: bool,
}

/// For each N, estimates P(Z_{B_U(0, ⌈N/ε⌉)} ≥ N) on one tree and compares it with ε²/12.
pub fn infinite_collision_demo(
    tree: &SpanningTree,
    eps: f64,
    thresholds: &[u64],
    runs: usize,
    base: &RngStream,
) -> Result<Vec<CollisionCertificate>> {
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(UstError::InvalidConfig("thresholds must be increasing".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(UstError::InvalidConfig(format!("eps must lie in (0, 1], got {eps}")));
    }
    let bound = eps * eps / 12.0;
    thresholds
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let radius = (n as f64 / eps).ceil() as u64;
            let ball = intrinsic_ball(tree, LatticePoint::ORIGIN, radius)?;
            let counts = collision_counts(&ball.region, runs, &base.derive(k as u64), n);
            let (p, se) = mean_se(counts.iter().map(|&z| (z >= n) as u8 as f64));
            Ok(CollisionCertificate { n, radius, p, se, bound, holds: p >= bound - 2.0 * se })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::green_diagonal;
    use crate::oracle::{collision_moments_series, even_return_series, exit_times_dense};
    use crate::wilson::sample_ball_tree;

    fn ball(seed: u64, r: u64) -> KilledRegion {
        let t = sample_ball_tree(&WilsonConfig::default(), r, RngStream::new(seed, 0)).unwrap();
        intrinsic_ball(&t, LatticePoint::ORIGIN, r).unwrap().region
    }

    #[test]
    fn cemetery_is_absorbing() {
        let region = KilledRegion::single(3);
        let mut rng = RngStream::new(1, 0);
        let dead = KilledWalkState { position: None, step: 4 };
        assert_eq!(step_killed_walk(dead, &region, &mut rng), dead);
        for _ in 0..100 {
            let s = step_killed_walk(KilledWalkState::start(0), &region, &mut rng);
            assert_eq!(s, KilledWalkState { position: None, step: 1 });
        }
    }

    #[test]
    fn one_step_distribution_is_uniform_at_degree_three() {
        // Centre of a three-armed star: member 0 with three member neighbours.
        let pts = vec![
            LatticePoint::ORIGIN,
            LatticePoint::new(1, 0, 0),
            LatticePoint::new(0, 1, 0),
            LatticePoint::new(0, 0, 1),
        ];
        let adj = vec![vec![1, 2, 3], vec![0], vec![0], vec![0]];
        let region = KilledRegion::from_adjacency(pts, adj, vec![3, 2, 2, 2], vec![]).unwrap();
        let mut rng = RngStream::new(2, 0);
        let draws = 1_000_000;
        let mut counts = [0u32; 4];
        for _ in 0..draws {
            let s = step_killed_walk(KilledWalkState::start(0), &region, &mut rng);
            counts[s.position.unwrap() as usize] += 1;
        }
        let p = 1.0 / 3.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts[1..] {
            assert!((c as f64 - draws as f64 * p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn lone_vertex_collides_once() {
        let region = KilledRegion::single(4);
        let mut rx = RngStream::new(3, 0);
        let mut ry = RngStream::new(3, 1);
        for _ in 0..50 {
            let s = sample_z(&region, &mut rx, &mut ry);
            assert_eq!(s, CollisionSample { z: 1, lifetime_x: 1, lifetime_y: 1 });
        }
        let m = exact_moments(&region, 10).unwrap();
        assert!((m.ez - 1.0).abs() < 1e-12 && (m.ez2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_tree_moments() {
        let line = KilledRegion::line(1);
        let m = exact_moments(&line, 10).unwrap();
        assert!((m.ez - 2.0).abs() < 1e-10, "{}", m.ez);
        assert!((m.even_return - 2.0).abs() < 1e-12);
        let (ez, ez2) = collision_moments_series(&line, 1e-15);
        assert!((m.ez2 - ez2).abs() < 1e-9, "{} {}", m.ez2, ez2);
        assert!((ez - 2.0).abs() < 1e-9);
        let counts = collision_counts(&line, 20_000, &RngStream::new(4, 0), u64::MAX);
        let (mean, se) = mean_se(counts.iter().map(|&z| z as f64));
        assert!((mean - 2.0).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn full_and_early_stopped_counts_agree_in_law() {
        let region = ball(5, 6);
        let base = RngStream::new(5, 9);
        for k in 0..500 {
            let (mut a, mut b) = run_streams(&base, k);
            let full = sample_z(&region, &mut a, &mut b);
            let (mut a, mut b) = run_streams(&base, k);
            let early = count_collisions(&region, &mut a, &mut b, u64::MAX);
            assert_eq!(full.z, early);
            assert!(full.z >= 1 && full.z <= full.lifetime_x.min(full.lifetime_y));
        }
    }

    #[test]
    fn exact_moments_match_series_oracle() {
        for seed in 0..12 {
            let region = ball(seed, 5);
            let m = exact_moments(&region, DEFAULT_EXACT_CAP).unwrap();
            let (ez, ez2) = collision_moments_series(&region, 1e-13);
            assert!((m.ez - ez).abs() <= 1e-8 * ez, "seed {seed}: {} vs {ez}", m.ez);
            assert!((m.ez2 - ez2).abs() <= 1e-8 * ez2, "seed {seed}: {} vs {ez2}", m.ez2);
            let even = even_return_series(&region, 0, 1e-13);
            assert!((m.even_return - even).abs() <= 1e-8 * even);
            // On a tree odd returns vanish, so the even series is the whole Green function.
            assert!((m.even_return - green_diagonal(&region, 0)).abs() <= 1e-9 * even);
            let dense = exit_times_dense(&region);
            let fast = exit_times(&region);
            for (a, b) in dense.iter().zip(&fast) {
                assert!((a - b).abs() <= 1e-9 * a);
            }
        }
    }

    #[test]
    fn quadrature_is_converged_on_larger_balls() {
        for seed in 0..4 {
            let region = ball(20 + seed, 30);
            let a = exact_moments(&region, DEFAULT_EXACT_CAP).unwrap();
            let b = exact_moments_with(&region, DEFAULT_EXACT_CAP, 40).unwrap();
            assert!((a.ez - b.ez).abs() <= 1e-10 * b.ez, "{} {}", a.ez, b.ez);
            assert!((a.ez2 - b.ez2).abs() <= 1e-10 * b.ez2, "{} {}", a.ez2, b.ez2);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let region = ball(6, 4);
        assert_eq!(
            exact_moments(&region, 1),
            Err(UstError::CapExceeded { size: region.len(), cap: 1 })
        );
    }

    #[test]
    fn swapping_streams_preserves_the_law() {
        let region = ball(7, 6);
        let base = RngStream::new(7, 0);
        let runs = 4000u64;
        let mut a_sum = 0.0;
        let mut b_sum = 0.0;
        let mut sq = 0.0;
        for k in 0..runs {
            let (mut x, mut y) = run_streams(&base, k);
            let z1 = count_collisions(&region, &mut x, &mut y, u64::MAX) as f64;
            let (x, y) = run_streams(&base, runs + k);
            let z2 = count_collisions(&region, &mut y.clone(), &mut x.clone(), u64::MAX) as f64;
            a_sum += z1;
            b_sum += z2;
            sq += z1 * z1 + z2 * z2;
        }
        let n = runs as f64;
        let var = sq / (2.0 * n) - ((a_sum + b_sum) / (2.0 * n)).powi(2);
        let se = (2.0 * var / n).sqrt();
        assert!((a_sum / n - b_sum / n).abs() < 4.0 * se);
    }

    #[test]
    fn tail_profile_is_monotone() {
        let region = ball(8, 8);
        let counts = collision_counts(&region, 2000, &RngStream::new(8, 0), u64::MAX);
        let tail = tail_profile(&counts, &[1, 2, 3, 5, 8, 13]);
        assert_eq!(tail[0].1, 1.0);
        assert!(tail.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn demo_gives_certificates() {
        let t = sample_ball_tree(&WilsonConfig::default(), 16, RngStream::new(9, 0)).unwrap();
        let rows = infinite_collision_demo(&t, 0.5, &[1, 2, 4, 8], 500, &RngStream::new(9, 1)).unwrap();
        assert_eq!(rows[0].p, 1.0);
        assert_eq!(rows.iter().map(|r| r.radius).collect::<Vec<_>>(), vec![2, 4, 8, 16]);
        assert!(infinite_collision_demo(&t, 0.5, &[4, 2], 10, &RngStream::new(9, 1)).is_err());
    }

    #[test]
    fn experiment_is_deterministic_and_upper_bounds_hold() {
        let cfg = MomentExperimentConfig { r: 6, trees: 6, mc_runs: 200, ..MomentExperimentConfig::default() };
        let base = RngStream::new(10, 0);
        let (a, sa) = moment_experiment(&cfg, &base).unwrap();
        let (b, _) = moment_experiment(&cfg, &base).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa.upper_first_violations, 0);
        assert_eq!(sa.upper_second_violations, 0);
        assert_eq!(sa.degree_bracket_violations, 0);
        for m in &a {
            assert!(m.exact_ez >= 1.0);
        }
    }
}
