//! End-to-end numerical checks with fixed tolerances.
//!
//! Every check is deterministic given [`VerifyOptions`]. Check 11 is soft: its
//! outcome is reported but does not affect [`VerifyReport::passed`].

use std::f64::consts::{SQRT_2, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::caratheodory::{
    jl_ratio, measure_oracle_f, mobius_grid_max, mobius_sup, solve_x_of_r, CaratheodoryValue,
    SchurEvaluator,
};
use crate::coeffs::{
    extend_two_sided, make_constant, make_explicit, make_sturmian, Support, VerblunskySequence,
    GOLDEN_FREQUENCY,
};
use crate::error::Result;
use crate::operator::walk::walk_profile;
use crate::operator::{build_finite_cmv, spectral_basis_reach, ResolventOracle, SparseState};
use crate::spectral::{
    build_gz_context, corner_trace, full_circle_grid, gz_entry, holder_scan, lambda_r_profile_with,
    transfer_exponents, ExtendedEvaluator, LeftConvention,
};
use crate::tracemap::{
    cf_for_frequency, circle_sweep, default_k, direct_product, gamma_constants,
    sample_spectrum_points, spectrum_levels, trace_orbit, ContinuedFractionData, ESCAPE_LIMIT,
};
use crate::{cis, C64};

/// Inputs shared by all checks.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyOptions {
    /// Sturmian alphabet used wherever a quasiperiodic model is called for.
    pub alphabet: (C64, C64),
    /// Frequency of the Sturmian model.
    pub omega: f64,
    /// Seed for the randomized checks.
    pub seed: u64,
    /// Run the soft Hölder cross-check (slow).
    pub include_soft: bool,
    /// Restrict the run to these ids; empty runs every check.
    pub only: Vec<u32>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            alphabet: (C64::new(0.5, 0.0), C64::new(-0.5, 0.0)),
            omega: GOLDEN_FREQUENCY,
            seed: 7,
            include_soft: true,
            only: Vec::new(),
        }
    }
}

impl VerifyOptions {
    fn sturmian(&self, support: Support) -> Result<VerblunskySequence> {
        make_sturmian(self.alphabet.0, self.alphabet.1, self.omega, support)
    }

    fn cf(&self, levels: usize) -> Result<ContinuedFractionData> {
        cf_for_frequency(self.omega, levels)
    }
}

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub soft: bool,
    /// Worst observed value of the checked quantity.
    pub measured: f64,
    /// Threshold the measured value is compared against.
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionReport {
    fn failed(id: u32, name: &str, soft: bool, err: impl std::fmt::Display) -> Self {
        Self {
            id,
            name: name.into(),
            passed: false,
            soft,
            measured: f64::NAN,
            tolerance: f64::NAN,
            detail: format!("error: {err}"),
            seconds: 0.0,
        }
    }

    /// One human-readable line.
    pub fn line(&self) -> String {
        let status = match (self.passed, self.soft) {
            (true, _) => "PASS",
            (false, true) => "SOFT-FAIL",
            (false, false) => "FAIL",
        };
        format!(
            "[{status}] {:>2} {:<34} measured {:.3e} (tol {:.1e}) {}",
            self.id, self.name, self.measured, self.tolerance, self.detail
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    /// The left-half convention resolved from the decaying solutions.
    pub convention: String,
    pub options: VerifyOptions,
    pub criteria: Vec<CriterionReport>,
    /// True when every non-soft check passed.
    pub passed: bool,
}

/// Check outcome before bookkeeping: `(passed, measured, tolerance, detail)`.
type Outcome = (bool, f64, f64, String);

struct Check {
    id: u32,
    name: &'static str,
    soft: bool,
    run: fn(&VerifyOptions) -> Result<Outcome>,
}

const CHECKS: [Check; 13] = [
    Check { id: 1, name: "unitarity", soft: false, run: unitarity },
    Check { id: 2, name: "resolvent formula vs oracle", soft: false, run: gz_vs_oracle },
    Check { id: 3, name: "corner trace identity", soft: false, run: corner_identity },
    Check { id: 4, name: "free case", soft: false, run: free_case },
    Check { id: 5, name: "Fricke invariant conservation", soft: false, run: fricke },
    Check { id: 6, name: "substitution vs direct product", soft: false, run: substitution },
    Check { id: 7, name: "Schur vs eigen oracle", soft: false, run: schur_vs_eigen },
    Check { id: 8, name: "Mobius closed form", soft: false, run: mobius },
    Check { id: 9, name: "upper power-law bound", soft: false, run: upper_bound },
    Check { id: 10, name: "Jitomirskaya-Last ratio", soft: false, run: jl_bounds },
    Check { id: 11, name: "Holder cross-check", soft: true, run: holder_cross_check },
    Check { id: 12, name: "spectral basis reconstruction", soft: false, run: spectral_basis },
    Check { id: 13, name: "walk sanity", soft: false, run: walk_sanity },
];

/// Ids of all checks in order.
pub fn criterion_ids() -> Vec<u32> {
    CHECKS.iter().map(|c| c.id).collect()
}

/// Runs a single check by id (1 ..= 13).
pub fn run_criterion(id: u32, opts: &VerifyOptions) -> Option<CriterionReport> {
    let check = CHECKS.iter().find(|c| c.id == id)?;
    let start = Instant::now();
    let mut report = match (check.run)(opts) {
        Ok((passed, measured, tolerance, detail)) => CriterionReport {
            id: check.id,
            name: check.name.into(),
            passed,
            soft: check.soft,
            measured,
            tolerance,
            detail,
            seconds: 0.0,
        },
        Err(e) => CriterionReport::failed(check.id, check.name, check.soft, e),
    };
    report.seconds = start.elapsed().as_secs_f64();
    Some(report)
}

/// Runs every check, calling `progress` after each one.
pub fn run_all(opts: &VerifyOptions, progress: &mut dyn FnMut(&CriterionReport)) -> VerifyReport {
    let mut criteria = Vec::new();
    for check in &CHECKS {
        if (check.soft && !opts.include_soft) || !(opts.only.is_empty() || opts.only.contains(&check.id)) {
            continue;
        }
        let report = run_criterion(check.id, opts).expect("known id");
        progress(&report);
        criteria.push(report);
    }
    VerifyReport {
        convention: LeftConvention::RESOLVED.to_string(),
        options: opts.clone(),
        passed: criteria.iter().all(|c| c.passed || c.soft),
        criteria,
    }
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

fn random_alpha(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    C64::from_polar(radius * rng.random::<f64>().sqrt(), rng.random_range(0.0..TAU))
}

fn random_two_sided(rng: &mut ChaCha8Rng, len: usize, radius: f64) -> Result<VerblunskySequence> {
    let mut half = || -> Result<VerblunskySequence> {
        make_explicit((0..len).map(|_| random_alpha(rng, radius)).collect())
    };
    let pos = half()?;
    let neg = half()?;
    extend_two_sided(pos, neg)
}

/// `{0.5, 0.9, 1.1} x 8` angles.
fn gz_points() -> Vec<C64> {
    let mut out = Vec::new();
    for r in [0.5, 0.9, 1.1] {
        for k in 0..8 {
            out.push(C64::from_polar(r, TAU * (k as f64 + 0.25) / 8.0));
        }
    }
    out
}

fn unitarity(opts: &VerifyOptions) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for s in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(s));
        let alpha: Vec<C64> = (0..49).map(|_| random_alpha(&mut rng, 0.95)).collect();
        let eta = cis(rng.random_range(0.0..TAU));
        let cmv = build_finite_cmv(&make_explicit(alpha)?, 50, eta)?;
        let (a, b) = cmv.unitarity_defect();
        worst = worst.max(a).max(b);
    }
    Ok((worst < 1e-12, worst, 1e-12, "10 seeds, 50 x 50".into()))
}

fn gz_vs_oracle(opts: &VerifyOptions) -> Result<Outcome> {
    // complex coefficients separate the conjugated and plain conventions
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6e2);
    let models = [opts.sturmian(Support::TwoSided)?, random_two_sided(&mut rng, 800, 0.8)?];
    let mut worst: f64 = 0.0;
    let mut conventions = Vec::new();
    for seq in &models {
        for z in gz_points() {
            let ctx = build_gz_context(seq, z, 400)?;
            conventions.push(ctx.convention);
            let oracle = ResolventOracle::new(seq, z, 400)?;
            let mut pairs = Vec::with_capacity(121);
            for y in -5..=5 {
                let col = oracle.column(y)?;
                for x in -5..=5 {
                    pairs.push((gz_entry(&ctx, x, y)?, col[(x + 400) as usize]));
                }
            }
            // entries below sqrt(eps) of the block maximum are structural zeros
            // (e.g. alpha = 0) and are compared against that scale instead
            let floor = f64::EPSILON.sqrt() * pairs.iter().fold(0.0f64, |m, (_, o)| m.max(o.norm()));
            for (g, o) in pairs {
                worst = worst.max((g - o).norm() / g.norm().max(o.norm()).max(floor));
            }
        }
    }
    let uniform = conventions.iter().all(|&c| c == LeftConvention::RESOLVED);
    Ok((
        worst < 1e-6 && uniform,
        worst,
        1e-6,
        format!(
            "Sturmian and random complex models, 24 z each, |x|,|y| <= 5; M_- convention: {}",
            LeftConvention::RESOLVED
        ),
    ))
}

fn corner_identity(opts: &VerifyOptions) -> Result<Outcome> {
    let seq = opts.sturmian(Support::TwoSided)?;
    let mut worst: f64 = 0.0;
    for z in gz_points() {
        let ctx = build_gz_context(&seq, z, 400)?;
        let sum = gz_entry(&ctx, 0, 0)? + gz_entry(&ctx, 1, 1)?;
        worst = worst.max(rel(sum, corner_trace(&ctx)?));
    }
    Ok((worst < 1e-9, worst, 1e-9, "24 z".into()))
}

fn free_case(_: &VerifyOptions) -> Result<Outcome> {
    let seq = make_constant(C64::default(), Support::TwoSided)?;
    let ev = ExtendedEvaluator::new(&seq)?;
    let mut f_err: f64 = 0.0;
    let mut corner_err: f64 = 0.0;
    for r in [0.1, 0.5, 0.9, 0.99] {
        for k in 0..16 {
            let z = C64::from_polar(r, TAU * k as f64 / 16.0);
            f_err = f_err.max((ev.f_extended(z)?.0 - 1.0).norm());
            corner_err = corner_err.max(ev.corner(z)?.norm());
        }
    }
    let mut density_err: f64 = 0.0;
    for r in [0.9, 0.99] {
        let p = lambda_r_profile_with(&ev, r, &full_circle_grid(256))?;
        for d in &p.density {
            density_err = density_err.max((d - 1.0 / TAU).abs());
        }
    }
    let eps = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];
    let beta = holder_scan(&ev, 1.3, &eps)?.beta_hat;
    let right = make_constant(C64::default(), Support::OneSided)?;
    let mut x_err: f64 = 0.0;
    for r in [0.9, 0.99] {
        let x = solve_x_of_r(&right, C64::new(1.0, 0.0), cis(0.7), r)?.x;
        x_err = x_err.max((x - (SQRT_2 / (1.0 - r) - 1.0)).abs());
    }
    let passed = f_err < 1e-10
        && corner_err < 1e-12
        && density_err < 1e-8
        && (beta - 1.0).abs() <= 0.02
        && x_err <= 1.0;
    Ok((
        passed,
        f_err.max(corner_err).max(density_err),
        1e-10,
        format!(
            "|F-1| {f_err:.1e}, |corner| {corner_err:.1e}, density {density_err:.1e}, beta {beta:.4}, x(r) error {x_err:.2e}"
        ),
    ))
}

fn fricke(opts: &VerifyOptions) -> Result<Outcome> {
    let cf = opts.cf(15)?;
    let mut worst: f64 = 0.0;
    let mut escaped = 0;
    for k in 0..64 {
        let orbit = trace_orbit(opts.alphabet, &cf, cis(TAU * (k as f64 + 0.5) / 64.0), 15)?;
        escaped += (orbit.overflow || orbit.escape_level(ESCAPE_LIMIT).is_some()) as usize;
        worst = worst.max(orbit.bounded_invariant_drift(ESCAPE_LIMIT));
    }
    Ok((
        worst < 1e-8,
        worst,
        1e-8,
        format!("64 points, levels <= 15, {escaped} flagged past |trace| {ESCAPE_LIMIT:.0e}"),
    ))
}

fn substitution(opts: &VerifyOptions) -> Result<Outcome> {
    let cf = opts.cf(20)?;
    let seq = opts.sturmian(Support::OneSided)?;
    let top = (1..cf.q.len()).take_while(|&n| cf.q[n] <= 500).last().unwrap_or(1);
    let mut worst: f64 = 0.0;
    for k in 0..16 {
        let z = cis(TAU * (k as f64 + 0.5) / 16.0);
        let orbit = trace_orbit(opts.alphabet, &cf, z, top)?;
        for n in 1..orbit.matrices.len() {
            let direct = direct_product(&seq, z, cf.q[n])?;
            worst = worst.max(orbit.matrices[n].rel_distance(&direct));
        }
    }
    Ok((
        worst < 1e-9,
        worst,
        1e-9,
        format!("16 circle points, q_n <= {}", cf.q[top]),
    ))
}

fn schur_vs_eigen(opts: &VerifyOptions) -> Result<Outcome> {
    let models = [
        opts.sturmian(Support::OneSided)?,
        make_constant(C64::new(0.5, 0.0), Support::OneSided)?,
    ];
    let mut worst: f64 = 0.0;
    for seq in &models {
        let schur = SchurEvaluator::new(seq);
        let mu = crate::operator::finite_spectral_measure(seq, 2000, C64::new(1.0, 0.0))?;
        for r in [0.2, 0.6, 0.85, 0.95] {
            for k in 0..16 {
                let z = C64::from_polar(r, TAU * (k as f64 + 0.3) / 16.0);
                let f = schur.eval(z)?.0;
                worst = worst.max((f - mu.caratheodory(z)).norm());
            }
        }
    }
    // the convenience wrapper agrees with the precomputed measure
    let z = C64::new(0.3, 0.4);
    let wrapped = measure_oracle_f(&models[1], z, 2000, C64::new(1.0, 0.0))?.0;
    worst = worst.max((wrapped - SchurEvaluator::new(&models[1]).eval(z)?.0).norm());
    Ok((worst < 1e-8, worst, 1e-8, "2 models x 64 points, N = 2000".into()))
}

fn mobius(opts: &VerifyOptions) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let w = random_alpha(&mut rng, 0.999);
        let f = CaratheodoryValue((1.0 + w) / (1.0 - w));
        let exact = mobius_sup(f);
        let grid = mobius_grid_max(f, 4096);
        worst = worst.max((exact - grid).abs() / exact);
    }
    Ok((worst < 1e-10, worst, 1e-10, "1000 random values".into()))
}

fn upper_bound(opts: &VerifyOptions) -> Result<Outcome> {
    let cf = opts.cf(10)?;
    let grid: Vec<f64> = (0..1024).map(|k| TAU * k as f64 / 1024.0).collect();
    let sweep = circle_sweep(opts.alphabet, &cf, &grid)?;
    let consts = gamma_constants(opts.alphabet, &cf, sweep.i_sup, sweep.seed_norms)?;
    let levels = spectrum_levels(opts.alphabet, &cf, &grid, 10, default_k(sweep.i_sup))?;
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut tested = 0;
    for (k, &theta) in grid.iter().enumerate() {
        if !levels[9][k] {
            continue;
        }
        tested += 1;
        let orbit = trace_orbit(opts.alphabet, &cf, cis(theta), 10)?;
        for m in 1..orbit.matrices.len() {
            let bound = consts.c_upper * (cf.q[m] as f64).powf(consts.gamma2);
            let ratio = orbit.matrices[m].norm() / bound;
            worst_ratio = worst_ratio.max(ratio);
            violations += (ratio > 1.0) as usize;
        }
    }
    Ok((
        violations == 0 && tested > 0,
        worst_ratio,
        1.0,
        format!("{tested} mask points, {violations} violations, gamma2 = {:.3}", consts.gamma2),
    ))
}

fn jl_bounds(opts: &VerifyOptions) -> Result<Outcome> {
    let seq = opts.sturmian(Support::OneSided)?;
    let points = sample_spectrum_points(opts.alphabet, &opts.cf(20)?, 1024, 20, 8)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &theta in &points {
        for k in 0..8 {
            let lambda = cis(TAU * k as f64 / 8.0);
            for r in [0.9, 0.99, 0.999] {
                let ratio = jl_ratio(&seq, lambda, cis(theta), r)?.ratio;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
    }
    let worst = hi.max(1.0 / lo);
    Ok((
        lo >= 0.1 && hi <= 10.0 && points.len() == 8,
        worst,
        10.0,
        format!("ratio in [{lo:.3}, {hi:.3}] over {} points", points.len()),
    ))
}

fn holder_cross_check(opts: &VerifyOptions) -> Result<Outcome> {
    let seq = opts.sturmian(Support::TwoSided)?;
    let ev = ExtendedEvaluator::new(&seq)?;
    let points = sample_spectrum_points(opts.alphabet, &opts.cf(20)?, 2048, 20, 4)?;
    let eps = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];
    let mut worst: f64 = 0.0;
    let mut above = 0;
    let mut parts = Vec::new();
    for &theta in &points {
        let beta = holder_scan(&ev, theta, &eps)?.beta_hat;
        let predicted = transfer_exponents(&seq, theta, 10_000)?.beta;
        worst = worst.max((beta - predicted).abs());
        above += (beta >= predicted) as usize;
        parts.push(format!("{theta:.3}: {beta:.3} vs {predicted:.3}"));
    }
    Ok((
        worst < 0.15 && points.len() == 4,
        worst,
        0.15,
        format!(
            "theta: beta_hat vs 2g1/(g1+g2): {}; beta_hat >= lower bound at {above}/{}",
            parts.join("; "),
            points.len()
        ),
    ))
}

fn spectral_basis(opts: &VerifyOptions) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for s in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(100 + s));
        let seq = random_two_sided(&mut rng, 32, 0.9)?;
        for n in [-2, 0, 3] {
            worst = worst.max(spectral_basis_reach(&seq, n)?.max_residual);
        }
    }
    Ok((worst < 1e-10, worst, 1e-10, "10 seeds, n in {-2, 0, 3}".into()))
}

fn walk_sanity(opts: &VerifyOptions) -> Result<Outcome> {
    let k = 10_000;
    let mut drift: f64 = 0.0;
    for seq in [
        opts.sturmian(Support::TwoSided)?,
        make_constant(C64::default(), Support::TwoSided)?,
    ] {
        for s in walk_profile(&seq, &SparseState::delta(0), k, 100, 1e-30) {
            drift = drift.max((s.norm - 1.0).abs());
        }
    }
    let free = make_constant(C64::default(), Support::TwoSided)?;
    let samples = walk_profile(&free, &SparseState::delta(0), 2000, 100, 1e-30);
    // radius / 2: the walk moves along one parity sublattice
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.step as f64, s.radius as f64 / 2.0))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    Ok((
        drift < 1e-10 && (0.9..=1.1).contains(&slope),
        drift,
        1e-10,
        format!("k <= {k}; free radius slope {slope:.4} sites/step"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_checks_pass() {
        let opts = VerifyOptions::default();
        for id in [1, 3, 5, 8, 12] {
            let r = run_criterion(id, &opts).unwrap();
            assert!(r.passed, "{}", r.line());
        }
        assert!(run_criterion(99, &opts).is_none());
    }
}
