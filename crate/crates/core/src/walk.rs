//! Simple random walk on Z^3, chronological loop erasure, and the growth
//! exponent of the loop-erased walk.

use std::hash::Hash;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UstError};
use crate::lattice::{LatticePath, LatticePoint};
use crate::rng::RngStream;
use crate::stats::ols;

pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000_000;

/// Numerical estimate of the three-dimensional growth exponent, reported next
/// to fitted slopes.
pub const BETA_REFERENCE: f64 = 1.624;

/// Online chronological loop erasure: feed vertices in walk order, and the
/// stack holds the loop erasure of everything fed so far.
#[derive(Clone, Debug)]
pub struct LoopEraser<V> {
    path: Vec<V>,
    index: FxHashMap<V, usize>,
}

impl<V: Copy + Eq + Hash> Default for LoopEraser<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V: Copy + Eq + Hash> LoopEraser<V> {
    pub fn new() -> Self {
        LoopEraser { path: Vec::new(), index: FxHashMap::default() }
    }

    pub fn clear(&mut self) {
        self.path.clear();
        self.index.clear();
    }

    #[inline]
    pub fn push(&mut self, v: V) {
        if let Some(&i) = self.index.get(&v) {
            for u in self.path.drain(i + 1..) {
                self.index.remove(&u);
            }
        } else {
            self.index.insert(v, self.path.len());
            self.path.push(v);
        }
    }

    pub fn path(&self) -> &[V] {
        &self.path
    }

    pub fn take(&mut self) -> Vec<V> {
        self.index.clear();
        std::mem::take(&mut self.path)
    }
}

/// Simple random walk from `start` until the first vertex where `stop` holds.
pub fn srw_until<F>(start: LatticePoint, stop: F, rng: &mut RngStream, budget: u64) -> Result<LatticePath>
where
    F: Fn(LatticePoint) -> bool,
{
    let mut trace = vec![start];
    let mut cur = start;
    let mut steps = 0u64;
    while !stop(cur) {
        if steps >= budget {
            return Err(UstError::StepBudget { budget });
        }
        cur = cur.step(rng.below(6) as usize);
        trace.push(cur);
        steps += 1;
    }
    Ok(LatticePath::from_trusted(trace))
}

/// Chronological loop erasure LE(θ).
pub fn loop_erase(path: &LatticePath) -> LatticePath {
    let mut eraser = LoopEraser::new();
    for &v in path.vertices() {
        eraser.push(v);
    }
    LatticePath::from_trusted(eraser.take())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LerwSample {
    pub n: u64,
    /// M_n, the number of steps of the loop erasure.
    pub length: u64,
    pub walk_steps: u64,
}

/// Loop-erased length of a walk from the origin run to its first exit from B(0, n).
pub fn lerw_length_sample(n: u64, rng: &mut RngStream) -> Result<LerwSample> {
    lerw_length_sample_with_budget(n, rng, DEFAULT_STEP_BUDGET)
}

pub fn lerw_length_sample_with_budget(n: u64, rng: &mut RngStream, budget: u64) -> Result<LerwSample> {
    if n == 0 {
        return Err(UstError::InvalidConfig("LERW radius must be at least 1".into()));
    }
    let r2 = n * n;
    let mut eraser = LoopEraser::new();
    let mut cur = LatticePoint::ORIGIN;
    eraser.push(cur);
    let mut steps = 0u64;
    while cur.norm_sq() <= r2 {
        if steps >= budget {
            return Err(UstError::StepBudget { budget });
        }
        cur = cur.step(rng.below(6) as usize);
        eraser.push(cur);
        steps += 1;
    }
    Ok(LerwSample { n, length: eraser.path().len() as u64 - 1, walk_steps: steps })
}

/// `count` samples of M_n; sample `k` uses stream `base.derive(k)`.
pub fn lerw_samples(n: u64, count: usize, base: &RngStream) -> Result<Vec<LerwSample>> {
    (0..count)
        .into_par_iter()
        .map(|k| lerw_length_sample(n, &mut base.derive(k as u64)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSummary {
    pub n: u64,
    pub samples: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_err: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub mean_walk_steps: f64,
}

impl RadiusSummary {
    pub fn from_lengths(n: u64, lengths: &[f64], walk_steps: &[f64]) -> Self {
        let k = lengths.len();
        let mean = lengths.iter().sum::<f64>() / k as f64;
        let var = if k > 1 {
            lengths.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        let std_err = std_dev / (k as f64).sqrt();
        let mean_walk_steps = if walk_steps.is_empty() {
            0.0
        } else {
            walk_steps.iter().sum::<f64>() / walk_steps.len() as f64
        };
        RadiusSummary {
            n,
            samples: k,
            mean,
            std_dev,
            std_err,
            ci95_low: mean - 1.96 * std_err,
            ci95_high: mean + 1.96 * std_err,
            mean_walk_steps,
        }
    }

    pub fn from_samples(n: u64, samples: &[LerwSample]) -> Self {
        let lengths: Vec<f64> = samples.iter().map(|s| s.length as f64).collect();
        let steps: Vec<f64> = samples.iter().map(|s| s.walk_steps as f64).collect();
        Self::from_lengths(n, &lengths, &steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error from the regression residuals.
    pub slope_se: f64,
    /// Standard error propagated from per-radius sampling error; shrinks like
    /// one over the square root of the sample count.
    pub slope_se_sampling: f64,
    pub reference: f64,
    pub per_radius: Vec<RadiusSummary>,
}

fn check_radii(radii: &[u64]) -> Result<()> {
    let mut distinct: Vec<u64> = radii.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(UstError::InvalidConfig(format!(
            "growth exponent needs at least 3 distinct radii, got {}",
            distinct.len()
        )));
    }
    let (lo, hi) = (distinct[0], *distinct.last().unwrap());
    if lo == 0 || hi < 4 * lo {
        return Err(UstError::InvalidConfig(format!(
            "radii {lo}..{hi} span less than two octaves"
        )));
    }
    Ok(())
}

/// Least-squares fit of log(mean M_n) against log n.
pub fn fit_power_law(per_radius: Vec<RadiusSummary>) -> Result<BetaEstimate> {
    let radii: Vec<u64> = per_radius.iter().map(|s| s.n).collect();
    check_radii(&radii)?;
    if per_radius.iter().any(|s| s.mean <= 0.0) {
        return Err(UstError::InvalidConfig("mean lengths must be positive".into()));
    }
    let xs: Vec<f64> = per_radius.iter().map(|s| (s.n as f64).ln()).collect();
    let ys: Vec<f64> = per_radius.iter().map(|s| s.mean.ln()).collect();
    let (intercept, slope, slope_se) = ols(&xs, &ys);
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let slope_se_sampling = xs
        .iter()
        .zip(&per_radius)
        .map(|(x, s)| ((x - xbar) / sxx).powi(2) * (s.std_err / s.mean).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(BetaEstimate { slope, intercept, slope_se, slope_se_sampling, reference: BETA_REFERENCE, per_radius })
}

/// Sample M_n at every radius and fit the growth exponent.
pub fn estimate_beta(radii: &[u64], samples_per_radius: usize, rng: &RngStream) -> Result<BetaEstimate> {
    check_radii(radii)?;
    if samples_per_radius < 100 {
        return Err(UstError::InvalidConfig(format!(
            "need at least 100 samples per radius, got {samples_per_radius}"
        )));
    }
    let mut per_radius = Vec::with_capacity(radii.len());
    for (i, &n) in radii.iter().enumerate() {
        let samples = lerw_samples(n, samples_per_radius, &rng.derive(i as u64))?;
        per_radius.push(RadiusSummary::from_samples(n, &samples));
    }
    fit_power_law(per_radius)
}

/// Empirical tail shape of M_n relative to its sample mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub kappas: Vec<f64>,
    /// Fraction of samples with M_n >= κ·mean.
    pub upper: Vec<f64>,
    /// Fraction of samples with M_n <= mean/κ.
    pub lower: Vec<f64>,
    /// Largest c with upper(κ) <= 2 exp(-c κ) at every κ with nonzero mass.
    pub c: f64,
}

pub fn fit_exponential_tail(lengths: &[u64]) -> TailFit {
    let k = lengths.len() as f64;
    let mean = lengths.iter().sum::<u64>() as f64 / k;
    let kappas: Vec<f64> = (0..=12).map(|i| 1.0 + 0.25 * i as f64).collect();
    let frac = |pred: &dyn Fn(f64) -> bool| lengths.iter().filter(|&&m| pred(m as f64)).count() as f64 / k;
    let upper: Vec<f64> = kappas.iter().map(|&kap| frac(&|m| m >= kap * mean)).collect();
    let lower: Vec<f64> = kappas.iter().map(|&kap| frac(&|m| m <= mean / kap)).collect();
    let c = kappas
        .iter()
        .zip(&upper)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&kap, &p)| -(p / 2.0).ln() / kap)
        .fold(f64::INFINITY, f64::min);
    TailFit { kappas, upper, lower, c }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::naive_loop_erase;
    use proptest::prelude::*;

    fn p(x: i64, y: i64, z: i64) -> LatticePoint {
        LatticePoint::new(x, y, z)
    }

    #[test]
    fn stop_at_start_gives_empty_walk() {
        let mut rng = RngStream::new(1, 0);
        let path = srw_until(p(0, 0, 0), |_| true, &mut rng, 10).unwrap();
        assert_eq!(path.length(), 0);
    }

    #[test]
    fn exit_of_unit_ball() {
        let mut rng = RngStream::new(2, 0);
        for _ in 0..200 {
            let path = srw_until(p(0, 0, 0), |q| q.norm_sq() > 1, &mut rng, 1_000_000).unwrap();
            let v = path.vertices();
            assert!(v.last().unwrap().norm_sq() > 1);
            assert!(v[..v.len() - 1].iter().all(|q| q.norm_sq() <= 1));
        }
    }

    #[test]
    fn step_budget_is_reported() {
        let mut rng = RngStream::new(3, 0);
        assert_eq!(
            srw_until(p(0, 0, 0), |_| false, &mut rng, 50),
            Err(UstError::StepBudget { budget: 50 })
        );
    }

    #[test]
    fn steps_are_uniform_over_six_directions() {
        let mut rng = RngStream::new(4, 0);
        let draws = 1_000_000u32;
        let mut counts = [0u32; 6];
        for _ in 0..draws {
            counts[rng.below(6) as usize] += 1;
        }
        let expect = draws as f64 / 6.0;
        let sigma = (draws as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn hand_evaluated_loop_erasure() {
        let theta = LatticePath::new(vec![p(0, 0, 0), p(1, 0, 0), p(0, 0, 0), p(1, 0, 0), p(1, 1, 0)]).unwrap();
        assert_eq!(loop_erase(&theta).vertices(), &[p(0, 0, 0), p(1, 0, 0), p(1, 1, 0)]);
    }

    #[test]
    fn simple_path_is_unchanged() {
        let theta = LatticePath::new(vec![p(0, 0, 0), p(0, 1, 0), p(0, 1, 1), p(1, 1, 1)]).unwrap();
        assert_eq!(loop_erase(&theta), theta);
    }

    #[test]
    fn unit_radius_lerw_has_two_steps() {
        // The last visit to the origin is followed by a neighbour and then the exit point.
        let mut rng = RngStream::new(5, 0);
        for _ in 0..500 {
            let s = lerw_length_sample(1, &mut rng).unwrap();
            assert_eq!(s.length, 2);
            assert!(s.length <= s.walk_steps);
        }
    }

    #[test]
    fn synthetic_power_laws_are_recovered() {
        for exponent in [1.0, 5.0 / 3.0] {
            let per_radius: Vec<_> = [8u64, 16, 32, 64]
                .iter()
                .map(|&n| RadiusSummary::from_lengths(n, &[(n as f64).powf(exponent)], &[]))
                .collect();
            let fit = fit_power_law(per_radius).unwrap();
            assert!((fit.slope - exponent).abs() < 1e-12);
            assert!(fit.slope_se < 1e-9);
        }
    }

    #[test]
    fn radius_configuration_errors() {
        let rng = RngStream::new(0, 0);
        assert!(matches!(estimate_beta(&[16], 100, &rng), Err(UstError::InvalidConfig(_))));
        assert!(matches!(estimate_beta(&[16, 20, 24], 100, &rng), Err(UstError::InvalidConfig(_))));
        assert!(matches!(estimate_beta(&[4, 8, 16], 10, &rng), Err(UstError::InvalidConfig(_))));
    }

    #[test]
    fn lerw_mean_grows_superlinearly() {
        let rng = RngStream::new(11, 0);
        let m32 = lerw_samples(32, 2000, &rng.derive(0)).unwrap();
        let m64 = lerw_samples(64, 2000, &rng.derive(1)).unwrap();
        let mean = |s: &[LerwSample]| s.iter().map(|x| x.length as f64).sum::<f64>() / s.len() as f64;
        assert!(mean(&m64) / mean(&m32) > 2.0);
        let tail = fit_exponential_tail(&m32.iter().map(|s| s.length).collect::<Vec<_>>());
        assert!(tail.c > 0.0, "{tail:?}");
    }

    fn walk_trace(seed: u64, steps: usize) -> LatticePath {
        let mut rng = RngStream::new(seed, 1);
        let mut v = vec![LatticePoint::ORIGIN];
        for _ in 0..steps {
            let last = *v.last().unwrap();
            v.push(last.step(rng.below(6) as usize));
        }
        LatticePath::new(v).unwrap()
    }

    proptest! {
        #[test]
        fn matches_naive_recursion_and_is_idempotent(seed in 0u64..1_000_000, steps in 0usize..200) {
            let trace = walk_trace(seed, steps);
            let le = loop_erase(&trace);
            let naive = naive_loop_erase(trace.vertices());
            prop_assert_eq!(le.vertices(), naive.as_slice());
            prop_assert!(le.is_simple());
            prop_assert_eq!(le.first(), trace.first());
            prop_assert_eq!(le.last(), trace.last());
            prop_assert_eq!(loop_erase(&le), le);
        }
    }
}
