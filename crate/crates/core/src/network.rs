//! Electrical networks with unit edge resistances: exact tree sweeps,
//! a conjugate-gradient Dirichlet solver for general graphs, and the Green
//! function of the killed walk.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UstError};
use crate::graph::Graph;
use crate::treemetrics::{component_ur, intrinsic_ball, IntrinsicBall, KilledRegion, NO_PARENT};
use rayon::prelude::*;

use crate::lattice::LatticePoint;
use crate::rng::RngStream;
use crate::stats::mean_se;
use crate::wilson::{sample_ball_tree, sample_profile_tree, SpanningTree, WilsonConfig};

pub const CG_TOLERANCE: f64 = 1e-12;

/// Conductance of `c` in series with one unit resistor.
#[inline]
fn series(c: f64) -> f64 {
    c / (1.0 + c)
}

/// Conductance to the exits looking away from the centre, for every member.
fn downward_conductance(region: &KilledRegion) -> Vec<f64> {
    let n = region.len();
    let mut down = vec![0.0; n];
    for i in (0..n).rev() {
        down[i] += region.exit_count(i) as f64;
        let p = region.parent[i];
        if p != NO_PARENT {
            down[p as usize] += series(down[i]);
        }
    }
    down
}

/// R(x ↔ exits) for a single member by one leaf-to-centre sweep.
pub fn resistance_tree(region: &KilledRegion, source: usize) -> f64 {
    let r = if source == 0 { region.clone() } else { region.recentered(source) };
    1.0 / downward_conductance(&r)[0]
}

/// R(x ↔ exits) for every member, by a downward sweep and a rerooting pass.
pub fn resistance_all(region: &KilledRegion) -> Vec<f64> {
    let n = region.len();
    let down = downward_conductance(region);
    // up[i]: conductance from i through its parent edge.
    let mut up = vec![0.0; n];
    for p in 0..n {
        let base = region.exit_count(p) as f64 + up[p];
        let kids: Vec<usize> = region.children(p).collect();
        for &c in &kids {
            let siblings: f64 = kids.iter().filter(|&&s| s != c).map(|&s| series(down[s])).sum();
            up[c] = series(base + siblings);
        }
    }
    (0..n).map(|i| 1.0 / (down[i] + up[i])).collect()
}

/// G(x, x) = μ(x) R(x ↔ exits) for member `x`.
pub fn green_diagonal(region: &KilledRegion, x: usize) -> f64 {
    region.degree[x] as f64 * resistance_tree(region, x)
}

pub fn green_diagonal_all(region: &KilledRegion) -> Vec<f64> {
    resistance_all(region)
        .into_iter()
        .zip(&region.degree)
        .map(|(r, &d)| r * d as f64)
        .collect()
}

/// The region as an explicit graph: members keep their indices and every
/// exit edge ends at its own extra vertex. Returns the graph and the exit vertices.
pub fn region_graph(region: &KilledRegion) -> (Graph, Vec<usize>) {
    let n = region.len();
    let mut g = Graph::new(n + region.total_exits());
    let mut exits = Vec::new();
    for i in 0..n {
        for &j in region.neighbors(i) {
            if (j as usize) > i {
                g.add_edge(i, j as usize);
            }
        }
        for _ in 0..region.exit_count(i) {
            let e = n + exits.len();
            g.add_edge(i, e);
            exits.push(e);
        }
    }
    (g, exits)
}

/// R(A ↔ B) on a general graph: potential 1 on A, 0 on B, harmonic elsewhere,
/// solved by Jacobi-preconditioned conjugate gradients; R = 1 / energy.
pub fn resistance_general(graph: &Graph, a: &[usize], b: &[usize]) -> Result<f64> {
    let n = graph.len();
    if a.is_empty() || b.is_empty() {
        return Err(UstError::InvalidConfig("both vertex sets must be nonempty".into()));
    }
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for &v in a {
        fixed[v] = Some(1.0);
    }
    for &v in b {
        if fixed[v].is_some() {
            return Err(UstError::InvalidConfig(format!("vertex {v} is in both sets")));
        }
        fixed[v] = Some(0.0);
    }
    let from_a = graph.reachable(a, |v| fixed[v].is_none() || b.contains(&v));
    if !b.iter().any(|&v| from_a[v]) {
        return Err(UstError::Disconnected);
    }
    // Unknowns: free vertices joined to some fixed vertex.
    let touched = graph.reachable(&a.iter().chain(b).copied().collect::<Vec<_>>(), |v| fixed[v].is_none());
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none() && touched[v]).collect();
    let mut index = vec![usize::MAX; n];
    for (k, &v) in free.iter().enumerate() {
        index[v] = k;
    }
    let m = free.len();
    let mut rhs = vec![0.0; m];
    for (k, &v) in free.iter().enumerate() {
        rhs[k] = graph.neighbors(v).iter().filter_map(|&w| fixed[w]).sum();
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for (k, &v) in free.iter().enumerate() {
            let mut s = graph.degree(v) as f64 * x[k];
            for &w in graph.neighbors(v) {
                if index[w] != usize::MAX {
                    s -= x[index[w]];
                }
            }
            out[k] = s;
        }
    };
    let inv_diag: Vec<f64> = free.iter().map(|&v| 1.0 / graph.degree(v) as f64).collect();
    let x = conjugate_gradient(apply, &rhs, &inv_diag, CG_TOLERANCE, 10 * m + 100);
    let potential = |v: usize| fixed[v].unwrap_or_else(|| if index[v] == usize::MAX { 0.0 } else { x[index[v]] });
    let energy: f64 = graph
        .edges()
        .into_iter()
        .filter(|&(p, q)| touched[p] || touched[q])
        .map(|(p, q)| (potential(p) - potential(q)).powi(2))
        .sum();
    Ok(1.0 / energy)
}

/// Preconditioned CG for a symmetric positive definite operator; stops at
/// relative residual `tol` or after `max_iter` iterations.
fn conjugate_gradient(apply: impl Fn(&[f64], &mut [f64]), b: &[f64], inv_diag: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let m = b.len();
    let mut x: Vec<f64> = b.iter().zip(inv_diag).map(|(b, d)| b * d).collect();
    let mut ax = vec![0.0; m];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; m];
    for _ in 0..max_iter {
        if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= tol * b_norm {
            break;
        }
        apply(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
    }
    x
}

/// R(x ↔ exits) of a region via the general solver.
pub fn resistance_region_general(region: &KilledRegion, source: usize) -> Result<f64> {
    let (g, exits) = region_graph(region);
    resistance_general(&g, &[source], &exits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResistanceReport {
    pub r: u64,
    /// R(0 ↔ B_U(0,r)^c), absorbing at intrinsic depth r + 1.
    pub r_eff_origin: f64,
    /// R(0 ↔ U \ U_r); absent when U_r was not computed.
    pub r_eff_ur: Option<f64>,
    /// G_{B_U(0,r)}(0, 0).
    pub green_origin: f64,
    pub degree_origin: u8,
    pub ball_size: usize,
    pub component_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub green_diagonal: Option<Vec<(LatticePoint, f64)>>,
}

/// Resistance summary for the intrinsic ball of radius r and, when `with_component`, for U_r.
pub fn resistance_profile(tree: &SpanningTree, r: u64, with_component: bool) -> Result<ResistanceReport> {
    let ball = intrinsic_ball(tree, LatticePoint::ORIGIN, r)?;
    let mut report = ball_resistance(&ball);
    if with_component {
        let comp = component_ur(tree, r)?;
        report.r_eff_ur = Some(resistance_tree(&comp.region, 0));
        report.component_size = Some(comp.region.len());
    }
    Ok(report)
}

pub fn ball_resistance(ball: &IntrinsicBall) -> ResistanceReport {
    let r_eff = resistance_tree(&ball.region, 0);
    let mu = ball.region.degree[0];
    ResistanceReport {
        r: ball.radius,
        r_eff_origin: r_eff,
        r_eff_ur: None,
        green_origin: mu as f64 * r_eff,
        degree_origin: mu,
        ball_size: ball.region.len(),
        component_size: None,
        green_diagonal: None,
    }
}

/// Attaches every member's Green diagonal to a report.
pub fn with_green_diagonal(mut report: ResistanceReport, ball: &IntrinsicBall) -> ResistanceReport {
    let g = green_diagonal_all(&ball.region);
    report.green_diagonal = Some(ball.region.points.iter().copied().zip(g).collect());
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResistanceSurveyConfig {
    pub r: u64,
    pub trees: usize,
    pub lambdas: Vec<f64>,
    /// Plug-in growth exponent for the threshold r^β / λ^(1+4β).
    pub beta: f64,
    pub wilson: WilsonConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeResistance {
    pub tree_index: u64,
    pub report: ResistanceReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceRow {
    pub r: u64,
    pub lambda: f64,
    pub threshold: f64,
    /// Fraction of trees with R(0 ↔ U \ U_r) ≥ threshold.
    pub frequency: f64,
    pub trees: usize,
}

pub fn exceedance_threshold(r: u64, lambda: f64, beta: f64) -> f64 {
    (r as f64).powf(beta) / lambda.powf(1.0 + 4.0 * beta)
}

/// Resistance profiles of `trees` independent trees; tree `i` uses `base.derive(i)`.
pub fn resistance_survey(config: &ResistanceSurveyConfig, base: &RngStream) -> Result<(Vec<TreeResistance>, Vec<ExceedanceRow>)> {
    let trees = (0..config.trees as u64)
        .into_par_iter()
        .map(|i| {
            let tree = sample_profile_tree(&config.wilson, config.r, base.derive(i))?;
            Ok(TreeResistance { tree_index: i, report: resistance_profile(&tree, config.r, true)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = config
        .lambdas
        .iter()
        .map(|&lambda| {
            let threshold = exceedance_threshold(config.r, lambda, config.beta);
            let hits = trees.iter().filter(|t| t.report.r_eff_ur.is_some_and(|v| v >= threshold)).count();
            ExceedanceRow {
                r: config.r,
                lambda,
                threshold,
                frequency: if trees.is_empty() { 0.0 } else { hits as f64 / trees.len() as f64 },
                trees: trees.len(),
            }
        })
        .collect();
    Ok((trees, rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub r: u64,
    pub container_factor: f64,
    pub trees: usize,
    pub mean_r_eff: f64,
    pub r_eff_se: f64,
    pub mean_ball_size: f64,
    pub ball_size_se: f64,
    pub mean_degree_origin: f64,
    pub degree_origin_se: f64,
}

/// Intrinsic-ball statistics at radius `r` for each container factor. Tree `i`
/// uses stream `base.derive(i)` under every factor.
pub fn container_sensitivity(wilson: &WilsonConfig, r: u64, factors: &[f64], trees: usize, base: &RngStream) -> Result<Vec<SensitivityRow>> {
    factors
        .iter()
        .map(|&f| {
            let cfg = WilsonConfig { container_factor: f, ..wilson.clone() };
            cfg.validate()?;
            let reports = (0..trees as u64)
                .into_par_iter()
                .map(|i| resistance_profile(&sample_ball_tree(&cfg, r, base.derive(i))?, r, false))
                .collect::<Result<Vec<_>>>()?;
            let (mean_r_eff, r_eff_se) = mean_se(reports.iter().map(|m| m.r_eff_origin));
            let (mean_ball_size, ball_size_se) = mean_se(reports.iter().map(|m| m.ball_size as f64));
            let (mean_degree_origin, degree_origin_se) = mean_se(reports.iter().map(|m| m.degree_origin as f64));
            Ok(SensitivityRow {
                r,
                container_factor: f,
                trees,
                mean_r_eff,
                r_eff_se,
                mean_ball_size,
                ball_size_se,
                mean_degree_origin,
                degree_origin_se,
            })
        })
        .collect()
}
