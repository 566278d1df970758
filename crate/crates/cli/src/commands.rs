//! The experiment commands. Each writes its files into the output directory
//! and reports whether its hard checks held.

use std::path::PathBuf;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;
use ust_core::collision::{infinite_collision_demo, moment_experiment, MomentExperimentConfig, MomentSummary};
use ust_core::network::{container_sensitivity, resistance_survey, ExceedanceRow, ResistanceSurveyConfig, TreeResistance};
use ust_core::walk::{fit_exponential_tail, fit_power_law, lerw_samples, RadiusSummary};
use ust_core::wilson::sample_ball_tree;
use ust_core::{wilson_infinity_approx, wilson_wired, LatticeBox, LatticePoint, MomentReport, RngStream, SpanningTree, WilsonConfig};

use crate::config::{ExperimentConfig, SampleMode};
use crate::output::{Header, OutputDir};
use crate::plot::{line_chart, Series};
use crate::validate::{run_all, Implementations};
use crate::{Cli, Command};

/// Stream index of each command below the base seed.
const STREAM_VALIDATE: u64 = 0;
const STREAM_BETA: u64 = 1;
const STREAM_SAMPLE: u64 = 2;
const STREAM_COLLISIONS: u64 = 3;
const STREAM_RESISTANCE: u64 = 4;
const STREAM_DEMO: u64 = 5;
const STREAM_SENSITIVITY: u64 = 6;

#[derive(Debug, Default)]
pub struct Outcome {
    /// False when a hard check of the command failed.
    pub passed: bool,
    pub files: Vec<PathBuf>,
    /// Human-readable summary, one line each.
    pub summary: Vec<String>,
}

/// Resolves the configuration and runs the command on a pool of the configured size.
pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = crate::resolve(cli)?;
    let workers = cfg.resolved_workers()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    pool.install(|| execute(&cli.command, &cfg))
}

pub fn execute(command: &Command, cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let header = Header::new(command.name(), cfg.seed, cfg.to_json());
    match command {
        Command::Validate => cmd_validate(cfg, header, &Implementations::default()),
        Command::Beta { .. } => cmd_beta(cfg, header),
        Command::SampleUst { .. } => cmd_sample_ust(cfg, header),
        Command::Collisions { .. } => cmd_collisions(cfg, header),
        Command::Resistance { .. } => cmd_resistance(cfg, header),
    }
}

fn finish(out: OutputDir, passed: bool, summary: Vec<String>) -> Outcome {
    Outcome { passed, files: out.into_written(), summary }
}

pub fn cmd_validate(cfg: &ExperimentConfig, header: Header, imp: &Implementations) -> anyhow::Result<Outcome> {
    let checks = run_all(&cfg.validate, &cfg.wilson(), RngStream::new(cfg.seed, STREAM_VALIDATE).seed(), imp)?;
    let mut out = OutputDir::create(&cfg.out, header)?;
    out.jsonl("validate.jsonl", &checks)?;
    out.csv("validate.csv", &checks)?;
    let passed = checks.iter().all(|c| c.passed);
    let summary = checks
        .iter()
        .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    Ok(finish(out, passed, summary))
}

#[derive(Serialize)]
struct RadiusRow {
    n: u64,
    samples: usize,
    mean: f64,
    std_dev: f64,
    std_err: f64,
    ci95_low: f64,
    ci95_high: f64,
    mean_walk_steps: f64,
    tail_c: f64,
}

#[derive(Serialize)]
struct FitRow {
    slope: f64,
    intercept: f64,
    slope_se: f64,
    slope_se_sampling: f64,
    reference: f64,
    radii: usize,
    samples_per_radius: usize,
}

pub fn cmd_beta(cfg: &ExperimentConfig, header: Header) -> anyhow::Result<Outcome> {
    let p = &cfg.beta;
    if p.samples < 2 {
        bail!("beta needs at least 2 samples per radius");
    }
    let base = RngStream::new(cfg.seed, STREAM_BETA);
    let mut samples = Vec::new();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &n in &p.radii {
        let s = lerw_samples(n, p.samples, &base.derive(n))?;
        let summary = RadiusSummary::from_samples(n, &s);
        let lengths: Vec<u64> = s.iter().map(|x| x.length).collect();
        rows.push(RadiusRow {
            n,
            samples: summary.samples,
            mean: summary.mean,
            std_dev: summary.std_dev,
            std_err: summary.std_err,
            ci95_low: summary.ci95_low,
            ci95_high: summary.ci95_high,
            mean_walk_steps: summary.mean_walk_steps,
            tail_c: fit_exponential_tail(&lengths).c,
        });
        summaries.push(summary);
        samples.extend(s);
    }
    let fit = fit_power_law(summaries)?;
    let mut out = OutputDir::create(&cfg.out, header)?;
    out.jsonl("beta_samples.jsonl", &samples)?;
    out.csv("beta_radii.csv", &rows)?;
    out.csv(
        "beta_fit.csv",
        &[FitRow {
            slope: fit.slope,
            intercept: fit.intercept,
            slope_se: fit.slope_se,
            slope_se_sampling: fit.slope_se_sampling,
            reference: fit.reference,
            radii: p.radii.len(),
            samples_per_radius: p.samples,
        }],
    )?;
    if cfg.plot {
        let path = out.path("beta.svg");
        let data: Vec<_> = fit.per_radius.iter().map(|s| ((s.n as f64).ln(), s.mean.ln())).collect();
        let line = data.iter().map(|&(x, _)| (x, fit.intercept + fit.slope * x)).collect();
        line_chart(
            &path,
            "Loop-erased length against radius",
            "ln n",
            "ln mean M_n",
            &[Series::new("mean M_n", data), Series::new(format!("slope {:.4}", fit.slope), line)],
        )?;
        out.register(path);
    }
    let summary = vec![format!(
        "beta = {:.4} (regression SE {:.4}, sampling SE {:.4}; reference {})",
        fit.slope, fit.slope_se, fit.slope_se_sampling, fit.reference
    )];
    Ok(finish(out, true, summary))
}

#[derive(Serialize)]
struct TreeRecord {
    index: u64,
    file: String,
    mode: SampleMode,
    r: u64,
    vertices: usize,
    roundtrip: bool,
}

fn sample_tree(cfg: &ExperimentConfig, wilson: &WilsonConfig, rng: RngStream) -> anyhow::Result<SpanningTree> {
    let r = cfg.sample_ust.r;
    Ok(match cfg.sample_ust.mode {
        SampleMode::Ball => sample_ball_tree(wilson, r, rng)?,
        SampleMode::Region => wilson_infinity_approx(&WilsonConfig { region_radius: r, ..wilson.clone() }, rng)?,
        SampleMode::Wired => wilson_wired(&LatticeBox::cube(LatticePoint::ORIGIN, r), rng)?,
    })
}

pub fn cmd_sample_ust(cfg: &ExperimentConfig, header: Header) -> anyhow::Result<Outcome> {
    let p = &cfg.sample_ust;
    let wilson = cfg.wilson();
    wilson.validate()?;
    let base = RngStream::new(cfg.seed, STREAM_SAMPLE);
    let config_line = serde_json::to_string(&serde_json::json!({ "mode": p.mode, "r": p.r, "container_factor": cfg.container_factor }))?;
    let trees = (0..p.count as u64)
        .into_par_iter()
        .map(|k| {
            let mut tree = sample_tree(cfg, &wilson, base.derive(k))?;
            tree.meta.config = config_line.clone();
            tree.meta.notes = vec![
                format!("version {}", header.version),
                format!("timestamp {}", header.timestamp),
                format!("run seed {} index {k}", cfg.seed),
            ];
            Ok(tree)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut out = OutputDir::create(&cfg.out, header)?;
    let mut records = Vec::new();
    for (k, tree) in trees.iter().enumerate() {
        let name = format!("tree_{k:04}.txt");
        let text = tree.to_text();
        let path = out.raw(&name, &text)?;
        let back = std::fs::read_to_string(&path)?;
        let parsed = SpanningTree::from_text(&back).with_context(|| format!("re-reading {}", path.display()))?;
        let roundtrip = back == text && &parsed == tree && parsed.to_text() == text;
        records.push(TreeRecord { index: k as u64, file: name, mode: p.mode, r: p.r, vertices: tree.len(), roundtrip });
    }
    out.jsonl("sample_ust.jsonl", &records)?;
    let passed = records.iter().all(|r| r.roundtrip);
    let summary = vec![format!("{} trees written; round trip {}", records.len(), if passed { "exact" } else { "FAILED" })];
    Ok(finish(out, passed, summary))
}

#[derive(Serialize)]
struct CollisionTreeRow {
    r: u64,
    tree_seed: u64,
    ball_size: usize,
    degree_origin: u8,
    ez_exact: f64,
    ez2_exact: f64,
    g00: f64,
    reff: f64,
    even_return: f64,
    mc_ez: Option<f64>,
    mc_ez_se: Option<f64>,
    upper_first: bool,
    upper_second: bool,
    upper_first_r: bool,
    upper_second_r: bool,
    green_bracket: bool,
    degree_bracket: bool,
    second_moment_display: bool,
    mc_agrees: Option<bool>,
}

impl From<&MomentReport> for CollisionTreeRow {
    fn from(m: &MomentReport) -> Self {
        CollisionTreeRow {
            r: m.r,
            tree_seed: m.tree_index,
            ball_size: m.ball_size,
            degree_origin: m.degree_origin,
            ez_exact: m.exact_ez,
            ez2_exact: m.exact_ez2,
            g00: m.green_origin,
            reff: m.r_eff_origin,
            even_return: m.even_return,
            mc_ez: m.mc.map(|e| e.ez),
            mc_ez_se: m.mc.map(|e| e.ez_se),
            upper_first: m.verdicts.upper_first,
            upper_second: m.verdicts.upper_second,
            upper_first_r: m.verdicts.upper_first_r,
            upper_second_r: m.verdicts.upper_second_r,
            green_bracket: m.verdicts.green_bracket,
            degree_bracket: m.verdicts.degree_bracket,
            second_moment_display: m.verdicts.second_moment_display,
            mc_agrees: m.verdicts.mc_agrees,
        }
    }
}

#[derive(Serialize)]
struct SummaryRow {
    r: u64,
    trees: usize,
    upper_first_violations: usize,
    upper_second_violations: usize,
    upper_first_r_violations: usize,
    upper_second_r_violations: usize,
    green_bracket_violations: usize,
    degree_bracket_violations: usize,
    mc_disagreements: usize,
}

impl From<&MomentSummary> for SummaryRow {
    fn from(s: &MomentSummary) -> Self {
        SummaryRow {
            r: s.r,
            trees: s.trees,
            upper_first_violations: s.upper_first_violations,
            upper_second_violations: s.upper_second_violations,
            upper_first_r_violations: s.upper_first_r_violations,
            upper_second_r_violations: s.upper_second_r_violations,
            green_bracket_violations: s.green_bracket_violations,
            degree_bracket_violations: s.degree_bracket_violations,
            mc_disagreements: s.mc_disagreements,
        }
    }
}

#[derive(Serialize)]
struct LowerRow {
    r: u64,
    eps: f64,
    failures: usize,
    failure_fraction: f64,
    passing: usize,
    window_violations: usize,
    min_window_probability: Option<f64>,
    window_bound: f64,
}

pub fn cmd_collisions(cfg: &ExperimentConfig, header: Header) -> anyhow::Result<Outcome> {
    let p = &cfg.collisions;
    if p.trees == 0 {
        eprintln!("warning: collisions with zero trees; nothing to do");
        return Ok(Outcome { passed: true, files: Vec::new(), summary: vec!["no trees requested".into()] });
    }
    let wilson = cfg.wilson();
    let base = RngStream::new(cfg.seed, STREAM_COLLISIONS);
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    for &r in &p.radii {
        let experiment = MomentExperimentConfig {
            r,
            trees: p.trees,
            mc_runs: p.mc_runs,
            eps_grid: p.eps_grid.clone(),
            wilson: wilson.clone(),
            exact_cap: p.exact_cap,
        };
        let (rep, summary) = moment_experiment(&experiment, &base.derive(r))?;
        reports.extend(rep);
        summaries.push(summary);
    }
    let mut out = OutputDir::create(&cfg.out, header)?;
    out.jsonl("collisions.jsonl", &reports)?;
    out.csv("collisions_trees.csv", &reports.iter().map(CollisionTreeRow::from).collect::<Vec<_>>())?;
    out.csv("collisions_summary.csv", &summaries.iter().map(SummaryRow::from).collect::<Vec<_>>())?;
    let lower: Vec<LowerRow> = summaries
        .iter()
        .flat_map(|s| {
            s.lower.iter().map(|l| LowerRow {
                r: s.r,
                eps: l.eps,
                failures: l.failures,
                failure_fraction: l.failure_fraction,
                passing: l.passing,
                window_violations: l.window_violations,
                min_window_probability: l.min_window_probability,
                window_bound: l.window_bound,
            })
        })
        .collect();
    out.csv("collisions_lower.csv", &lower)?;
    let mut summary: Vec<String> = summaries
        .iter()
        .map(|s| {
            format!(
                "r = {}: {} trees, upper-bound violations {} / {}, Green bracket violations {}, degree bracket violations {}, MC disagreements {}",
                s.r,
                s.trees,
                s.upper_first_violations,
                s.upper_second_violations,
                s.green_bracket_violations,
                s.degree_bracket_violations,
                s.mc_disagreements
            )
        })
        .collect();
    if !p.demo_thresholds.is_empty() {
        let demo_base = RngStream::new(cfg.seed, STREAM_DEMO);
        let largest = *p.demo_thresholds.iter().max().unwrap();
        let radius = (largest as f64 / p.demo_eps).ceil() as u64;
        let tree = sample_ball_tree(&wilson, radius, demo_base.derive(0))?;
        let certs = infinite_collision_demo(&tree, p.demo_eps, &p.demo_thresholds, p.demo_runs, &demo_base.derive(1))?;
        for c in &certs {
            summary.push(format!("P(Z >= {}) on radius {} = {:.4} +- {:.4} (bound {:.2e})", c.n, c.radius, c.p, c.se, c.bound));
        }
        out.csv("collisions_demo.csv", &certs)?;
    }
    if cfg.plot {
        let path = out.path("collisions_eps.svg");
        let series: Vec<Series> = summaries
            .iter()
            .map(|s| Series::new(format!("r = {}", s.r), s.lower.iter().map(|l| (l.eps.ln(), l.failure_fraction)).collect()))
            .collect();
        line_chart(&path, "Trees with E Z < eps r", "ln eps", "fraction of trees", &series)?;
        out.register(path);
    }
    let passed = summaries.iter().all(|s| s.upper_first_violations == 0 && s.upper_second_violations == 0);
    Ok(finish(out, passed, summary))
}

#[derive(Serialize)]
struct ResistanceRow {
    r: u64,
    tree_index: u64,
    r_eff_origin: f64,
    r_eff_ur: Option<f64>,
    green_origin: f64,
    degree_origin: u8,
    ball_size: usize,
    component_size: Option<usize>,
}

impl From<&TreeResistance> for ResistanceRow {
    fn from(t: &TreeResistance) -> Self {
        let r = &t.report;
        ResistanceRow {
            r: r.r,
            tree_index: t.tree_index,
            r_eff_origin: r.r_eff_origin,
            r_eff_ur: r.r_eff_ur,
            green_origin: r.green_origin,
            degree_origin: r.degree_origin,
            ball_size: r.ball_size,
            component_size: r.component_size,
        }
    }
}

pub fn cmd_resistance(cfg: &ExperimentConfig, header: Header) -> anyhow::Result<Outcome> {
    let p = &cfg.resistance;
    let base = RngStream::new(cfg.seed, STREAM_RESISTANCE);
    let mut trees = Vec::new();
    let mut rows: Vec<ExceedanceRow> = Vec::new();
    for &r in &p.radii {
        let survey = ResistanceSurveyConfig { r, trees: p.trees, lambdas: p.lambda_grid.clone(), beta: p.beta, wilson: cfg.wilson() };
        let (t, e) = resistance_survey(&survey, &base.derive(r))?;
        trees.extend(t);
        rows.extend(e);
    }
    let mut sensitivity = Vec::new();
    if !p.sensitivity_factors.is_empty() {
        let sbase = RngStream::new(cfg.seed, STREAM_SENSITIVITY);
        for &r in &p.radii {
            sensitivity.extend(container_sensitivity(&cfg.wilson(), r, &p.sensitivity_factors, p.sensitivity_trees, &sbase.derive(r))?);
        }
    }
    let over: Vec<&TreeResistance> = trees.iter().filter(|t| t.report.r_eff_origin > t.report.r as f64 + 1.0 + 1e-9).collect();
    let mut out = OutputDir::create(&cfg.out, header)?;
    out.jsonl("resistance.jsonl", &trees)?;
    out.csv("resistance_trees.csv", &trees.iter().map(ResistanceRow::from).collect::<Vec<_>>())?;
    out.csv("resistance_summary.csv", &rows)?;
    if !sensitivity.is_empty() {
        out.csv("resistance_sensitivity.csv", &sensitivity)?;
    }
    if cfg.plot {
        let path = out.path("resistance_lambda.svg");
        let series: Vec<Series> = p
            .radii
            .iter()
            .map(|&r| Series::new(format!("r = {r}"), rows.iter().filter(|e| e.r == r).map(|e| (e.lambda.ln(), e.frequency)).collect()))
            .collect();
        line_chart(&path, "Exceedance frequency", "ln lambda", "fraction of trees", &series)?;
        out.register(path);
    }
    let mut summary: Vec<String> = rows
        .iter()
        .map(|e| format!("r = {}, lambda = {}: threshold {:.4}, frequency {:.3}", e.r, e.lambda, e.threshold, e.frequency))
        .collect();
    for s in &sensitivity {
        summary.push(format!(
            "r = {}, container factor {}: mean R = {:.4} +- {:.4}, mean ball size {:.1}",
            s.r, s.container_factor, s.mean_r_eff, s.r_eff_se, s.mean_ball_size
        ));
    }
    summary.push(format!("{} trees with R(0 <-> ball exit) above r + 1", over.len()));
    Ok(finish(out, over.is_empty(), summary))
}
