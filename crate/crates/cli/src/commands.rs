//! The six subcommands. Each writes into its own run directory.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use cmv_core::coeffs::Support;
use cmv_core::operator::walk::{evolve_with, support_radius, WalkSample};
use cmv_core::operator::SparseState;
use cmv_core::spectral::{
    full_circle_grid, holder_scan, lambda_r_profile_with, transfer_exponents, ExtendedEvaluator,
    HolderReport,
};
use cmv_core::tracemap::{
    cf_for_frequency, circle_sweep, default_k, gamma_constants, sample_spectrum_points,
    spectrum_levels, trace_orbit, AtlasRecord,
};
use cmv_core::verify::{run_all, VerifyOptions, VerifyReport};
use cmv_core::cis;

use crate::config::RunConfig;

/// Creates `<out>/<command>-<timestamp>` (with a numeric suffix on collision)
/// and writes the resolved configuration into it.
pub fn create_run_dir(config: &RunConfig, command: &str) -> Result<PathBuf> {
    fs::create_dir_all(&config.out)
        .with_context(|| format!("creating {}", config.out.display()))?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S").to_string();
    let base = config.out.join(format!("{command}-{stamp}"));
    let mut dir = base.clone();
    let mut k = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{k}", base.display()));
        k += 1;
    }
    fs::create_dir(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("config.json"), config)?;
    Ok(dir)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct CoefficientRow {
    n: i64,
    re_alpha: f64,
    im_alpha: f64,
    rho: f64,
    /// Sturmian indicator, empty for other models.
    letter: Option<u8>,
}

/// `coefficients.csv` for `n` in the configured window.
pub fn cmd_coeffs(config: &RunConfig, dir: &Path) -> Result<()> {
    let seq = config.sequence()?;
    let w = config.window as i64;
    let range = if seq.is_two_sided() { -w..=w } else { 0..=w };
    let rows = seq.records(range).into_iter().map(|r| CoefficientRow {
        n: r.n,
        re_alpha: r.re_alpha,
        im_alpha: r.im_alpha,
        rho: r.rho,
        letter: seq.indicator(r.n),
    });
    write_csv(&dir.join("coefficients.csv"), rows)
}

fn theta_grid(count: usize) -> Vec<f64> {
    (0..count).map(|k| TAU * k as f64 / count as f64).collect()
}

#[derive(Serialize)]
struct MaskRow {
    theta: f64,
    in_spectrum: bool,
}

#[derive(Serialize)]
struct SpectrumSummary {
    i_sup: f64,
    i_imag_max: f64,
    k: f64,
    levels: usize,
    /// Fraction of the grid inside each approximant.
    coverage: Vec<f64>,
}

/// Trace-map atlas, one mask file per level and the Hölder constants.
pub fn cmd_spectrum(config: &RunConfig, dir: &Path) -> Result<()> {
    let alphabet = config.trace_alphabet();
    let cf = cf_for_frequency(config.omega, config.depth)?;
    let grid = theta_grid(config.theta_count);
    let sweep = circle_sweep(alphabet, &cf, &grid)?;
    let k = default_k(sweep.i_sup);
    let levels = spectrum_levels(alphabet, &cf, &grid, config.depth, k)?;
    let mut atlas = Vec::with_capacity(grid.len() * config.depth);
    for (idx, &theta) in grid.iter().enumerate() {
        let orbit = trace_orbit(alphabet, &cf, cis(theta), config.depth)?;
        for r in &orbit.records {
            atlas.push(AtlasRecord {
                theta,
                n: r.n,
                q_n: r.q,
                abs_x: r.x.norm(),
                abs_z: r.z.norm(),
                re_i: r.invariant.re,
                im_i: r.invariant.im,
                in_spectrum: levels[r.n - 1][idx],
            });
        }
    }
    write_csv(&dir.join("atlas.csv"), atlas)?;
    for (m, mask) in levels.iter().enumerate() {
        let rows = grid.iter().zip(mask).map(|(&theta, &in_spectrum)| MaskRow { theta, in_spectrum });
        write_csv(&dir.join(format!("mask_level_{:02}.csv", m + 1)), rows)?;
    }
    let constants = gamma_constants(alphabet, &cf, sweep.i_sup, sweep.seed_norms)?;
    write_json(&dir.join("gamma_constants.json"), &constants)?;
    let coverage = levels
        .iter()
        .map(|m| m.iter().filter(|&&b| b).count() as f64 / m.len() as f64)
        .collect();
    write_json(
        &dir.join("spectrum_summary.json"),
        &SpectrumSummary {
            i_sup: sweep.i_sup,
            i_imag_max: sweep.i_imag_max,
            k,
            levels: config.depth,
            coverage,
        },
    )
}

fn extended_evaluator(config: &RunConfig) -> Result<ExtendedEvaluator> {
    if config.support != Support::TwoSided {
        bail!("this command works on the extended operator; set support = two-sided");
    }
    Ok(ExtendedEvaluator::new(&config.sequence()?)?)
}

#[derive(Serialize)]
struct ArcRow {
    r: f64,
    theta: f64,
    eps: f64,
    arc_mass: f64,
}

#[derive(Serialize)]
struct MeasureSummary {
    r: f64,
    total_mass: f64,
    min_density: f64,
    max_density: f64,
}

/// Density of `dLambda_r` and arc masses for each configured `r`.
pub fn cmd_measure(config: &RunConfig, dir: &Path) -> Result<()> {
    let ev = extended_evaluator(config)?;
    let grid = full_circle_grid(config.theta_count);
    let centers: Vec<f64> = theta_grid(16);
    let mut arcs = Vec::new();
    let mut summary = Vec::new();
    for &r in &config.r {
        let profile = lambda_r_profile_with(&ev, r, &grid)?;
        write_csv(&dir.join(format!("density_r{r}.csv")), profile.records())?;
        for &theta in &centers {
            for &eps in &config.eps {
                arcs.push(ArcRow {
                    r,
                    theta,
                    eps,
                    arc_mass: profile.arc_mass(theta, eps)?,
                });
            }
        }
        summary.push(MeasureSummary {
            r,
            total_mass: profile.total_mass(),
            min_density: profile.density.iter().cloned().fold(f64::INFINITY, f64::min),
            max_density: profile.density.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    write_csv(&dir.join("arc_mass.csv"), arcs)?;
    write_json(&dir.join("measure_summary.json"), &summary)
}

#[derive(Serialize)]
struct HolderArcRow {
    theta: f64,
    eps: f64,
    arc_mass: f64,
    log_eps: f64,
    log_mass: f64,
}

/// Angles for the Hölder command: configured, or refined spectrum points.
pub fn holder_angles(config: &RunConfig) -> Result<Vec<f64>> {
    if !config.holder_theta.is_empty() {
        return Ok(config.holder_theta.clone());
    }
    let depth = 20;
    let cf = cf_for_frequency(config.omega, depth)?;
    let points = sample_spectrum_points(config.trace_alphabet(), &cf, 1024, depth, config.holder_points)?;
    if points.is_empty() {
        bail!("no spectrum points found; set holder_theta explicitly");
    }
    Ok(points)
}

/// Hölder exponents with `r = 1 - eps` and the transfer-matrix prediction.
pub fn cmd_holder(config: &RunConfig, dir: &Path) -> Result<Vec<HolderReport>> {
    if config.eps.len() < 3 {
        bail!("the Hölder fit needs at least 3 eps values, got {}", config.eps.len());
    }
    let ev = extended_evaluator(config)?;
    let seq = config.sequence()?;
    let mut arcs = Vec::new();
    let mut reports = Vec::new();
    for theta in holder_angles(config)? {
        let fit = holder_scan(&ev, theta, &config.eps)?;
        let predicted = transfer_exponents(&seq, theta, config.l_max)?;
        for rec in fit.records() {
            arcs.push(HolderArcRow {
                theta,
                eps: rec.eps,
                arc_mass: rec.arc_mass,
                log_eps: rec.log_eps,
                log_mass: rec.log_mass,
            });
        }
        reports.push(HolderReport {
            theta,
            beta_hat: fit.beta_hat,
            envelope_beta: fit.envelope_beta,
            gamma_cross_check: predicted.beta,
        });
    }
    write_csv(&dir.join("arc_mass.csv"), arcs)?;
    write_json(&dir.join("holder.json"), &reports)?;
    Ok(reports)
}

#[derive(Serialize)]
struct SnapshotRow {
    step: usize,
    n: i64,
    re: f64,
    im: f64,
    abs2: f64,
}

#[derive(Serialize)]
struct WalkSummary {
    steps: usize,
    max_norm_drift: f64,
    final_radius: i64,
}

/// `|psi(n)|^2` snapshots of `E^k delta_0`.
pub fn cmd_walk(config: &RunConfig, dir: &Path) -> Result<()> {
    let seq = config.sequence()?;
    let mut samples = Vec::new();
    let mut snapshots = Vec::new();
    evolve_with(
        &seq,
        &SparseState::delta(0),
        config.steps,
        &mut |step, state| {
            samples.push(WalkSample {
                step,
                norm: state.norm(),
                radius: support_radius(state, 1e-20),
            });
            snapshots.extend(state.records().into_iter().map(|r| SnapshotRow {
                step,
                n: r.n,
                re: r.re,
                im: r.im,
                abs2: r.abs2,
            }));
        },
        config.snapshot_every,
    );
    let summary = WalkSummary {
        steps: config.steps,
        max_norm_drift: samples.iter().map(|s| (s.norm - 1.0).abs()).fold(0.0, f64::max),
        final_radius: samples.last().map_or(0, |s| s.radius),
    };
    write_csv(&dir.join("walk.csv"), &samples)?;
    write_csv(&dir.join("snapshots.csv"), snapshots)?;
    write_json(&dir.join("walk_summary.json"), &summary)
}

pub fn verify_options(config: &RunConfig) -> VerifyOptions {
    VerifyOptions {
        alphabet: config.trace_alphabet(),
        omega: config.omega,
        seed: config.seed,
        include_soft: config.soft,
        only: config.criteria.clone(),
    }
}

/// Runs the acceptance checks, printing one line per check.
pub fn cmd_verify(config: &RunConfig, dir: &Path) -> Result<VerifyReport> {
    let report = run_all(&verify_options(config), &mut |r| println!("{}", r.line()));
    println!("M_- convention: {}", report.convention);
    write_json(&dir.join("verify.json"), &report)?;
    Ok(report)
}
