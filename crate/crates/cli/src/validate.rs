//! Oracle checks: each production algorithm against an independent
//! reference computation.

use serde::Serialize;
use ust_core::collision::{collision_counts, ExactMoments, DEFAULT_EXACT_CAP};
use ust_core::graph::{enumerate_spanning_trees, spanning_tree_count};
use ust_core::lattice::{PointSet, DIRECTIONS};
use ust_core::network::{region_graph, resistance_general};
use ust_core::oracle::{collision_moments_series, green_series, naive_hitting_time, naive_loop_erase};
use ust_core::stats::mean_se;
use ust_core::wilson::{hitting_time, sample_ball_tree, wilson_uniformity};
use ust_core::{intrinsic_ball, Graph, KilledRegion, LatticePath, LatticePoint, Result, RngStream, SpanningTree, WilsonConfig};

use crate::config::ValidateParams;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Number of cases examined.
    pub cases: u64,
    /// Number of failing cases.
    pub failures: u64,
    /// Worst observed error, where meaningful.
    pub worst: Option<f64>,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, cases: u64, failures: u64, worst: Option<f64>, detail: String) -> Self {
        CheckResult { name: name.to_string(), passed: failures == 0, cases, failures, worst, detail }
    }
}

/// The implementations under test; swapped out by negative-control tests.
#[derive(Clone, Copy)]
pub struct Implementations {
    pub loop_erase: fn(&LatticePath) -> LatticePath,
    pub resistance_tree: fn(&KilledRegion, usize) -> f64,
    pub green_diagonal: fn(&KilledRegion, usize) -> f64,
    pub exact_moments: fn(&KilledRegion, usize) -> Result<ExactMoments>,
}

impl Default for Implementations {
    fn default() -> Self {
        Implementations {
            loop_erase: ust_core::loop_erase,
            resistance_tree: ust_core::resistance_tree,
            green_diagonal: ust_core::green_diagonal,
            exact_moments: ust_core::exact_moments,
        }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_trace(rng: &mut RngStream, max_len: usize) -> LatticePath {
    let len = rng.below(max_len as u32 + 1) as usize;
    let mut v = Vec::with_capacity(len + 1);
    let mut cur = LatticePoint::ORIGIN;
    v.push(cur);
    for _ in 0..len {
        cur = cur.step(rng.below(6) as usize);
        v.push(cur);
    }
    LatticePath::new(v).expect("unit steps")
}

/// Production loop erasure against the last-visit recursion on random traces
/// and on every lattice path from the origin up to a given length.
pub fn check_loop_erase(p: &ValidateParams, base: &RngStream, imp: &Implementations) -> CheckResult {
    let mut cases = 0u64;
    let mut failures = 0u64;
    let mut first_bad = None;
    let mut compare = |path: LatticePath| {
        cases += 1;
        let got = (imp.loop_erase)(&path);
        if got.vertices() != naive_loop_erase(path.vertices()).as_slice() {
            failures += 1;
            first_bad.get_or_insert_with(|| path.vertices().to_vec());
        }
    };
    for k in 0..p.loop_erase_traces as u64 {
        compare(random_trace(&mut base.derive(k), p.max_trace_length));
    }
    // Exhaustive enumeration of direction sequences.
    for len in 0..=p.exhaustive_length as u32 {
        for code in 0..6u64.pow(len) {
            let mut v = vec![LatticePoint::ORIGIN];
            let mut c = code;
            for _ in 0..len {
                v.push(v.last().unwrap().step((c % 6) as usize));
                c /= 6;
            }
            compare(LatticePath::new(v).expect("unit steps"));
        }
    }
    let detail = match first_bad {
        Some(path) => format!("first mismatch on a trace of {} vertices", path.len()),
        None => format!("{} random traces of length <= {} and all paths of length <= {}", p.loop_erase_traces, p.max_trace_length, p.exhaustive_length),
    };
    CheckResult::new("loop_erase_naive", cases, failures, None, detail)
}

pub fn check_hitting_time(p: &ValidateParams, base: &RngStream) -> CheckResult {
    let mut failures = 0;
    for k in 0..p.hitting_pairs as u64 {
        let mut rng = base.derive(k);
        let path = random_trace(&mut rng, 40);
        let size = rng.below(8) as usize;
        let set: Vec<LatticePoint> = (0..size)
            .map(|_| LatticePoint::new(rng.below(7) as i64 - 3, rng.below(7) as i64 - 3, rng.below(7) as i64 - 3))
            .collect();
        let hash: PointSet = set.iter().copied().collect();
        if hitting_time(path.vertices(), &hash) != naive_hitting_time(path.vertices(), &set) {
            failures += 1;
        }
    }
    CheckResult::new("hitting_time_scan", p.hitting_pairs as u64, failures, None, "random paths and sets against a linear scan".into())
}

pub fn check_matrix_tree() -> CheckResult {
    let cases: [(&str, Graph, u128); 4] = [
        ("4-cycle", Graph::cycle(4), 4),
        ("K4", Graph::complete(4), 16),
        ("path", Graph::path(6), 1),
        ("K5", Graph::complete(5), 125),
    ];
    let mut failures = 0;
    let mut detail = Vec::new();
    for (name, g, expected) in &cases {
        let det = spanning_tree_count(g);
        let enumerated = enumerate_spanning_trees(g).len() as u128;
        if det != *expected || enumerated != *expected {
            failures += 1;
        }
        detail.push(format!("{name}: {det}"));
    }
    CheckResult::new("matrix_tree_counts", cases.len() as u64, failures, None, detail.join(", "))
}

pub fn check_uniformity(name: &str, graph: &Graph, samples: usize, base: &RngStream) -> CheckResult {
    let rep = wilson_uniformity(graph, samples, base);
    let ok = rep.max_deviation <= 0.01 && rep.p_value > 1e-3;
    CheckResult {
        name: name.to_string(),
        passed: ok,
        cases: samples as u64,
        failures: (!ok) as u64,
        worst: Some(rep.max_deviation),
        detail: format!(
            "{} trees, max |freq - 1/{}| = {:.5}, chi2 = {:.3}, p = {:.4}",
            rep.tree_count, rep.tree_count, rep.max_deviation, rep.chi_square, rep.p_value
        ),
    }
}

/// Radius of validation ball `k`: cycles through 1..=max.
pub fn ball_radius(k: u64, max: u64) -> u64 {
    1 + k % max.max(1)
}

pub fn validation_ball(wilson: &WilsonConfig, r: u64, base: &RngStream, k: u64) -> Result<(SpanningTree, KilledRegion)> {
    let tree = sample_ball_tree(wilson, r, base.derive(k))?;
    let region = intrinsic_ball(&tree, LatticePoint::ORIGIN, r)?.region;
    Ok((tree, region))
}

/// Tree sweep against the Laplacian solver (relative 1e-9) and μ·R against the
/// truncated Green series (relative 1e-6), on sampled intrinsic balls.
pub fn check_electrical(p: &ValidateParams, wilson: &WilsonConfig, base: &RngStream, imp: &Implementations) -> Result<Vec<CheckResult>> {
    let mut solver_fail = 0;
    let mut green_fail = 0;
    let mut worst_solver: f64 = 0.0;
    let mut worst_green: f64 = 0.0;
    for k in 0..p.electrical_balls as u64 {
        let r = ball_radius(k, p.electrical_max_radius);
        let (_, region) = validation_ball(wilson, r, base, k)?;
        let sweep = (imp.resistance_tree)(&region, 0);
        let (g, exits) = region_graph(&region);
        let solved = resistance_general(&g, &[0], &exits)?;
        let e = rel_err(sweep, solved);
        worst_solver = worst_solver.max(e);
        solver_fail += (e >= 1e-9) as u64;
        let green = (imp.green_diagonal)(&region, 0);
        let series = green_series(&region, 0, 0, p.series_tolerance);
        let e = rel_err(green, series);
        worst_green = worst_green.max(e);
        green_fail += (e >= 1e-6) as u64;
    }
    let n = p.electrical_balls as u64;
    Ok(vec![
        CheckResult::new(
            "resistance_sweep_vs_solver",
            n,
            solver_fail,
            Some(worst_solver),
            format!("balls of radius 1..={}, worst relative difference {worst_solver:.3e}", p.electrical_max_radius),
        ),
        CheckResult::new(
            "green_identity",
            n,
            green_fail,
            Some(worst_green),
            format!("mu(0) R(0) vs Green series truncated at mass {:e}, worst relative difference {worst_green:.3e}", p.series_tolerance),
        ),
    ])
}

/// Exact collision moments against the brute-force series on small balls.
pub fn check_moments(p: &ValidateParams, wilson: &WilsonConfig, base: &RngStream, imp: &Implementations) -> Result<CheckResult> {
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for k in 0..p.moment_balls as u64 {
        let r = ball_radius(k, p.moment_max_radius);
        let (_, region) = validation_ball(wilson, r, base, k)?;
        let m = (imp.exact_moments)(&region, DEFAULT_EXACT_CAP)?;
        let (ez, ez2) = collision_moments_series(&region, 1e-13);
        let e = rel_err(m.ez, ez).max(rel_err(m.ez2, ez2));
        worst = worst.max(e);
        failures += (e >= 1e-8) as u64;
    }
    Ok(CheckResult::new(
        "exact_moments_vs_series",
        p.moment_balls as u64,
        failures,
        Some(worst),
        format!("balls of radius 1..={}, worst relative difference {worst:.3e}", p.moment_max_radius),
    ))
}

/// The line segment {-1, 0, 1} with exits at ±2: E Z = Σ 2^-n = 2.
pub fn check_line_tree(p: &ValidateParams, base: &RngStream, imp: &Implementations) -> Result<CheckResult> {
    let line = KilledRegion::line(1);
    let m = (imp.exact_moments)(&line, DEFAULT_EXACT_CAP)?;
    let counts = collision_counts(&line, p.line_mc_runs, base, u64::MAX);
    let (mean, se) = mean_se(counts.iter().map(|&z| z as f64));
    let g = (imp.green_diagonal)(&line, 0);
    let exact_ok = (m.ez - 2.0).abs() < 1e-9 && (g - 2.0).abs() < 1e-12;
    let mc_ok = (mean - 2.0).abs() <= 3.0 * se;
    Ok(CheckResult::new(
        "line_tree_collisions",
        2,
        (!exact_ok) as u64 + (!mc_ok) as u64,
        Some((m.ez - 2.0).abs()),
        format!("exact E Z = {:.12}, G(0,0) = {g:.12}, Monte Carlo {mean:.4} +- {se:.4} over {} runs", m.ez, p.line_mc_runs),
    ))
}

pub fn check_tree_roundtrip(wilson: &WilsonConfig, base: &RngStream) -> Result<CheckResult> {
    let mut failures = 0;
    let cases = 5;
    for k in 0..cases {
        let (tree, _) = validation_ball(wilson, 3 + k, base, k)?;
        let text = tree.to_text();
        let back = SpanningTree::from_text(&text)?;
        if back != tree || back.to_text() != text {
            failures += 1;
        }
    }
    Ok(CheckResult::new("tree_file_roundtrip", cases, failures, None, "serialize, parse and re-serialize sampled trees".into()))
}

pub fn check_unit_star(samples: usize, wilson: &WilsonConfig, base: &RngStream) -> Result<CheckResult> {
    use ust_core::stats::total_variation;
    use ust_core::wilson::{sample_unit_star, unit_star_pattern, WilsonSampler};
    use ust_core::walk::DEFAULT_STEP_BUDGET;
    let small = WilsonConfig { region_radius: 1, container_factor: 3.0, ..wilson.clone() };
    let big = ust_core::LatticeBox::euclidean(LatticePoint::ORIGIN, 8);
    let mut a = vec![0u64; 64];
    let mut b = vec![0u64; 64];
    for k in 0..samples as u64 {
        a[sample_unit_star(&small, base.derive(2 * k))? as usize] += 1;
        let mut s = WilsonSampler::new(big, base.derive(2 * k + 1), DEFAULT_STEP_BUDGET);
        s.attach(LatticePoint::ORIGIN)?;
        for d in DIRECTIONS {
            s.attach(d)?;
        }
        b[unit_star_pattern(s.tree()).expect("attached") as usize] += 1;
    }
    let tv = total_variation(&a, &b);
    Ok(CheckResult::new(
        "unit_star_total_variation",
        samples as u64,
        (tv >= 0.05) as u64,
        Some(tv),
        format!("container radius 3 vs wired radius 8, TV = {tv:.4}"),
    ))
}

/// Every check, in a fixed order.
pub fn run_all(p: &ValidateParams, wilson: &WilsonConfig, seed: u64, imp: &Implementations) -> Result<Vec<CheckResult>> {
    let base = RngStream::new(seed, 0);
    let mut out = vec![
        check_loop_erase(p, &base.derive(0), imp),
        check_hitting_time(p, &base.derive(1)),
        check_matrix_tree(),
        check_uniformity("wilson_uniformity_4_cycle", &Graph::cycle(4), p.uniformity_samples, &base.derive(2)),
        check_uniformity("wilson_uniformity_k4", &Graph::complete(4), p.uniformity_samples, &base.derive(3)),
    ];
    out.extend(check_electrical(p, wilson, &base.derive(4), imp)?);
    out.push(check_moments(p, wilson, &base.derive(5), imp)?);
    out.push(check_line_tree(p, &base.derive(6), imp)?);
    out.push(check_tree_roundtrip(wilson, &base.derive(7))?);
    out.push(check_unit_star(p.uniformity_samples, wilson, &base.derive(8))?);
    Ok(out)
}
