//! Green's function of the extended operator, its Carathéodory function and
//! the boundary-value measures used for Hölder estimates.
//!
//! Splitting at the origin gives `F_+` (right half, Schur algorithm) and the
//! anti-Carathéodory `M_-` (left half through [`m_minus`]). With the solutions
//!
//! * `u = q + m p`, `q(0) = p(0) = z`, `q(1) = -(1 + a z) / r`, `p(1) = (1 - a z) / r`,
//! * `v = s + m w`, `s(0) = -1`, `w(0) = 1`, `s(1) = (z + conj a) / r`, `w(1) = (z - conj a) / r`,
//!
//! (`a = alpha(0)`, `r = rho(0)`), `u_+, v_+` use `m = F_+` and `u_-, v_-` use
//! `m = M_-`. The resolvent is
//!
//! ```text
//! G(x, y) = -1 / (2 z^2 (F_+ - M_-)) * u_-(x) v_+(y)   if x < y, or x = y even
//!         = -1 / (2 z^2 (F_+ - M_-)) * u_+(x) v_-(y)   if x > y, or x = y odd
//! ```
//!
//! and `F(z) = 1 + z (G_00 + G_11)` is the Carathéodory function of
//! `(mu_0 + mu_1) / 2`, the average of the spectral measures of `delta_0`, `delta_1`.

use std::f64::consts::TAU;
use std::fmt;

use serde::Serialize;

use crate::banded::{BandLu, PivotPolicy};
use crate::caratheodory::{m_minus, mobius_sup, CaratheodoryValue, SchurEvaluator};
use crate::coeffs::{rho_of, VerblunskySequence};
use crate::error::{CmvError, Result};
use crate::operator::{split_at_origin, ExtendedWindow};
use crate::transfer::{fit_power_law, norm_samples, FitResult, SolutionTrace};
use crate::{cis, C64};

/// Which coefficient enters `m_minus` as `alpha0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeftConvention {
    /// `alpha0 := conj(alpha(-1))`.
    ConjPrevious,
    /// `alpha0 := alpha(-1)`.
    Previous,
    /// `alpha0 := conj(alpha(0))`.
    ConjZero,
    /// `alpha0 := alpha(0)`.
    Zero,
}

impl LeftConvention {
    /// [`Self::RESOLVED`] first, so it wins ties on real coefficients.
    pub const ALL: [LeftConvention; 4] = [
        LeftConvention::Previous,
        LeftConvention::ConjPrevious,
        LeftConvention::ConjZero,
        LeftConvention::Zero,
    ];

    /// The convention that reproduces the decaying solutions.
    pub const RESOLVED: LeftConvention = LeftConvention::Previous;

    fn alpha0(self, a0: C64, a_prev: C64) -> C64 {
        match self {
            LeftConvention::ConjPrevious => a_prev.conj(),
            LeftConvention::Previous => a_prev,
            LeftConvention::ConjZero => a0.conj(),
            LeftConvention::Zero => a0,
        }
    }
}

impl fmt::Display for LeftConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LeftConvention::ConjPrevious => "alpha0 = conj(alpha(-1))",
            LeftConvention::Previous => "alpha0 = alpha(-1), F_- from beta(m) = conj(alpha(-2-m))",
            LeftConvention::ConjZero => "alpha0 = conj(alpha(0))",
            LeftConvention::Zero => "alpha0 = alpha(0)",
        };
        f.write_str(s)
    }
}

/// Values at `n = 0, 1` of `q, p` (for `u`) and `s, w` (for `v`).
#[derive(Clone, Copy, Debug)]
struct Fundamental {
    q: [C64; 2],
    p: [C64; 2],
    s: [C64; 2],
    w: [C64; 2],
}

impl Fundamental {
    fn new(z: C64, a0: C64, r0: f64) -> Self {
        Self {
            q: [z, -(1.0 + a0 * z) / r0],
            p: [z, (1.0 - a0 * z) / r0],
            s: [C64::new(-1.0, 0.0), (z + a0.conj()) / r0],
            w: [C64::new(1.0, 0.0), (z - a0.conj()) / r0],
        }
    }

    fn u(&self, m: C64, n: usize) -> C64 {
        self.q[n] + m * self.p[n]
    }

    fn v(&self, m: C64, n: usize) -> C64 {
        self.s[n] + m * self.w[n]
    }

    /// `m` with `x ~ q + m p` on `n = 0, 1`.
    fn m_from_u(&self, x: [C64; 2]) -> C64 {
        (self.q[1] * x[0] - x[1] * self.q[0]) / (x[1] * self.p[0] - self.p[1] * x[0])
    }

    fn m_from_v(&self, x: [C64; 2]) -> C64 {
        (self.s[1] * x[0] - x[1] * self.s[0]) / (x[1] * self.w[0] - self.w[1] * x[0])
    }
}

#[derive(Clone, Debug)]
struct Solutions {
    lo: i64,
    u_plus: Vec<C64>,
    u_minus: Vec<C64>,
    v_plus: Vec<C64>,
    v_minus: Vec<C64>,
}

/// Consistency measurements gathered while building a context.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GzDiagnostics {
    /// `|F_+ (Schur) - F_+ (solution)| / |F_+|`, from `u_+` and `v_+`.
    pub f_plus_defect: f64,
    /// Relative mismatch of `M_-` for every convention, from `u_-`.
    pub m_minus_defects: Vec<(LeftConvention, f64)>,
    /// Relative mismatch of `M_-` between `u_-` and `v_-`.
    pub left_consistency: f64,
    /// Largest relative residual of the four solution equations on the interior.
    pub residual: f64,
}

/// Everything needed to evaluate the Green's function at one `z`.
#[derive(Clone, Debug)]
pub struct GzContext {
    pub z: C64,
    pub f_plus: CaratheodoryValue,
    pub m_minus: CaratheodoryValue,
    pub alpha0: C64,
    pub rho0: f64,
    pub convention: LeftConvention,
    pub diagnostics: GzDiagnostics,
    fundamental: Fundamental,
    solutions: Option<Solutions>,
}

fn check_z(z: C64) -> Result<()> {
    if z.norm() == 0.0 {
        return Err(CmvError::InvalidParameter("z = 0 is excluded".into()));
    }
    if (z.norm() - 1.0).abs() < 1e-3 {
        return Err(CmvError::Disk(format!(
            "{z} is within 1e-3 of the unit circle; use the r-parameterized profile path"
        )));
    }
    Ok(())
}

/// Right and left Carathéodory functions of a two-sided sequence.
#[derive(Clone, Debug)]
pub struct ExtendedEvaluator {
    right: SchurEvaluator,
    left: SchurEvaluator,
    alpha0: C64,
    alpha_prev: C64,
    rho0: f64,
    convention: LeftConvention,
}

impl ExtendedEvaluator {
    pub fn new(seq: &VerblunskySequence) -> Result<Self> {
        Self::with_convention(seq, LeftConvention::RESOLVED)
    }

    pub fn with_convention(seq: &VerblunskySequence, convention: LeftConvention) -> Result<Self> {
        let (right, left) = split_at_origin(seq)?;
        let alpha0 = seq.alpha(0);
        Ok(Self {
            right: SchurEvaluator::new(&right),
            left: SchurEvaluator::new(&left),
            alpha0,
            alpha_prev: seq.alpha(-1),
            rho0: rho_of(alpha0),
            convention,
        })
    }

    pub fn convention(&self) -> LeftConvention {
        self.convention
    }

    pub fn f_plus(&self, z: C64) -> Result<CaratheodoryValue> {
        self.right.eval(z)
    }

    pub fn m_minus_with(&self, z: C64, convention: LeftConvention) -> Result<CaratheodoryValue> {
        let f_minus = self.left.eval(z)?;
        m_minus(f_minus, convention.alpha0(self.alpha0, self.alpha_prev))
    }

    pub fn m_minus(&self, z: C64) -> Result<CaratheodoryValue> {
        self.m_minus_with(z, self.convention)
    }

    /// Context without sampled solutions; enough for entries with `x, y` in `{0, 1}`.
    pub fn context(&self, z: C64) -> Result<GzContext> {
        if z.norm() == 0.0 {
            return Err(CmvError::InvalidParameter("z = 0 is excluded".into()));
        }
        Ok(GzContext {
            z,
            f_plus: self.f_plus(z)?,
            m_minus: self.m_minus(z)?,
            alpha0: self.alpha0,
            rho0: self.rho0,
            convention: self.convention,
            diagnostics: GzDiagnostics::default(),
            fundamental: Fundamental::new(z, self.alpha0, self.rho0),
            solutions: None,
        })
    }

    /// `G_00 + G_11` at `z`.
    pub fn corner(&self, z: C64) -> Result<C64> {
        corner_trace(&self.context(z)?)
    }

    /// `1 + z (G_00 + G_11)` for `|z| < 1`.
    pub fn f_extended(&self, z: C64) -> Result<CaratheodoryValue> {
        f_extended(&self.context(z)?)
    }
}

impl GzContext {
    fn prefactor(&self) -> Result<C64> {
        let diff = self.f_plus.0 - self.m_minus.0;
        if diff.norm() < 1e-13 {
            return Err(CmvError::Degenerate(diff.norm()));
        }
        Ok(-1.0 / (2.0 * self.z * self.z * diff))
    }

    /// Window `lo ..= hi` on which solutions are sampled, if any.
    pub fn sample_range(&self) -> Option<(i64, i64)> {
        self.solutions
            .as_ref()
            .map(|s| (s.lo, s.lo + s.u_plus.len() as i64 - 1))
    }

    fn sample(&self, which: Which, n: i64) -> Result<C64> {
        if n == 0 || n == 1 {
            let k = n as usize;
            let f = &self.fundamental;
            return Ok(match which {
                Which::UPlus => f.u(self.f_plus.0, k),
                Which::UMinus => f.u(self.m_minus.0, k),
                Which::VPlus => f.v(self.f_plus.0, k),
                Which::VMinus => f.v(self.m_minus.0, k),
            });
        }
        let sol = self.solutions.as_ref().ok_or_else(|| {
            CmvError::Window(format!("index {n} needs a context with sampled solutions"))
        })?;
        let k = n - sol.lo;
        if k < 0 || k as usize >= sol.u_plus.len() {
            return Err(CmvError::Window(format!("index {n} outside the sampled range")));
        }
        let k = k as usize;
        Ok(match which {
            Which::UPlus => sol.u_plus[k],
            Which::UMinus => sol.u_minus[k],
            Which::VPlus => sol.v_plus[k],
            Which::VMinus => sol.v_minus[k],
        })
    }

    pub fn u_plus(&self, n: i64) -> Result<C64> {
        self.sample(Which::UPlus, n)
    }

    pub fn u_minus(&self, n: i64) -> Result<C64> {
        self.sample(Which::UMinus, n)
    }

    pub fn v_plus(&self, n: i64) -> Result<C64> {
        self.sample(Which::VPlus, n)
    }

    pub fn v_minus(&self, n: i64) -> Result<C64> {
        self.sample(Which::VMinus, n)
    }
}

#[derive(Clone, Copy)]
enum Which {
    UPlus,
    UMinus,
    VPlus,
    VMinus,
}

/// Least-squares scale `c` with `c x(n) ~ target(n)` on `n = 0, 1`.
fn fit_scale(x: [C64; 2], target: [C64; 2]) -> C64 {
    let num = x[0].conj() * target[0] + x[1].conj() * target[1];
    let den = x[0].norm_sqr() + x[1].norm_sqr();
    num / den
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Builds a context with `u_+-`, `v_+-` sampled on `|n| <= half_width / 4`.
///
/// Each solution comes from one banded solve on the window `[-W, W]`: a unit
/// source at `-W/2` (for the `+` solutions) or `+W/2` (for the `-` solutions)
/// produces a vector that solves the homogeneous equation between the source
/// and the far edge, where it decays. Ratios at `n = 0, 1` give the empirical
/// `F_+` and `M_-`; the left-half convention is the one whose `M_-` matches.
pub fn build_gz_context(
    seq: &VerblunskySequence,
    z: C64,
    half_width: usize,
) -> Result<GzContext> {
    check_z(z)?;
    if half_width < 40 {
        return Err(CmvError::Window(format!("half-width {half_width} is too small")));
    }
    let ev = ExtendedEvaluator::new(seq)?;
    let w = half_width as i64;
    let window = ExtendedWindow::symmetric(seq, half_width)?;
    let mut band = window.bands().to_band();
    for k in 0..band.dim() {
        band.add(k, k, -z);
    }
    let band_t = band.transpose();
    let lu = BandLu::factor(&band, PivotPolicy::Strict)?;
    let lu_t = BandLu::factor(&band_t, PivotPolicy::Strict)?;
    let idx = |n: i64| (n + w) as usize;
    let source = |lu: &BandLu, at: i64| {
        let mut b = vec![C64::default(); band.dim()];
        b[idx(at)] = C64::new(1.0, 0.0);
        lu.solve_in_place(&mut b);
        b
    };
    let raw_u_plus = source(&lu, -w / 2);
    let raw_u_minus = source(&lu, w / 2);
    let raw_v_plus = source(&lu_t, -w / 2);
    let raw_v_minus = source(&lu_t, w / 2);
    let origin = |x: &[C64]| [x[idx(0)], x[idx(1)]];

    let fund = Fundamental::new(z, ev.alpha0, ev.rho0);
    let f_plus = ev.f_plus(z)?;
    let f_emp_u = fund.m_from_u(origin(&raw_u_plus));
    let f_emp_v = fund.m_from_v(origin(&raw_v_plus));
    let m_emp_u = fund.m_from_u(origin(&raw_u_minus));
    let m_emp_v = fund.m_from_v(origin(&raw_v_minus));

    let mut diagnostics = GzDiagnostics {
        f_plus_defect: rel(f_plus.0, f_emp_u).max(rel(f_plus.0, f_emp_v)),
        left_consistency: rel(m_emp_u, m_emp_v),
        ..GzDiagnostics::default()
    };
    let mut chosen: Option<(LeftConvention, CaratheodoryValue, f64)> = None;
    for conv in LeftConvention::ALL {
        let defect = match ev.m_minus_with(z, conv) {
            Ok(m) => {
                let d = rel(m.0, m_emp_u);
                if chosen.as_ref().is_none_or(|c| d < c.2) {
                    chosen = Some((conv, m, d));
                }
                d
            }
            Err(_) => f64::INFINITY,
        };
        diagnostics.m_minus_defects.push((conv, defect));
    }
    let tol = 1e-8;
    let (convention, m_minus_val) = match chosen {
        Some((conv, m, d)) if d < tol => (conv, m),
        _ => {
            return Err(CmvError::Convention(
                diagnostics.m_minus_defects.iter().map(|d| d.1).collect(),
            ))
        }
    };
    if diagnostics.f_plus_defect > tol {
        return Err(CmvError::Convention(vec![diagnostics.f_plus_defect]));
    }

    // scale to the origin normalizations and keep |n| <= W/4
    let keep = w / 4;
    let scaled = |raw: &[C64], target: [C64; 2]| -> Vec<C64> {
        let c = fit_scale(origin(raw), target);
        (-keep..=keep).map(|n| raw[idx(n)] * c).collect()
    };
    let (fp, mm) = (f_plus.0, m_minus_val.0);
    let u_plus = scaled(&raw_u_plus, [fund.u(fp, 0), fund.u(fp, 1)]);
    let u_minus = scaled(&raw_u_minus, [fund.u(mm, 0), fund.u(mm, 1)]);
    let v_plus = scaled(&raw_v_plus, [fund.v(fp, 0), fund.v(fp, 1)]);
    let v_minus = scaled(&raw_v_minus, [fund.v(mm, 0), fund.v(mm, 1)]);

    // residuals of (E - z) u = 0 and (E^T - z) v = 0 on the interior rows
    let interior = keep - 2;
    let bands = window.bands();
    let resid = |sol: &[C64], transpose: bool| -> f64 {
        let scale = sol.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1e-300);
        let at = |n: i64| {
            if n.abs() <= keep {
                sol[(n + keep) as usize]
            } else {
                C64::default()
            }
        };
        let mut worst: f64 = 0.0;
        for i in -interior..=interior {
            let mut acc = -z * at(i);
            for j in i - 3..=i + 3 {
                let e = if transpose { bands.entry(j, i) } else { bands.entry(i, j) };
                acc += e * at(j);
            }
            worst = worst.max(acc.norm() / scale);
        }
        worst
    };
    diagnostics.residual = resid(&u_plus, false)
        .max(resid(&u_minus, false))
        .max(resid(&v_plus, true))
        .max(resid(&v_minus, true));

    Ok(GzContext {
        z,
        f_plus,
        m_minus: m_minus_val,
        alpha0: ev.alpha0,
        rho0: ev.rho0,
        convention,
        diagnostics,
        fundamental: fund,
        solutions: Some(Solutions {
            lo: -keep,
            u_plus,
            u_minus,
            v_plus,
            v_minus,
        }),
    })
}

/// Green's function entry from the solution formula.
pub fn gz_entry(ctx: &GzContext, x: i64, y: i64) -> Result<C64> {
    let pre = ctx.prefactor()?;
    let left_branch = x < y || (x == y && x.rem_euclid(2) == 0);
    Ok(if left_branch {
        pre * ctx.u_minus(x)? * ctx.v_plus(y)?
    } else {
        pre * ctx.u_plus(x)? * ctx.v_minus(y)?
    })
}

/// Closed form of `G_00 + G_11`.
pub fn corner_trace(ctx: &GzContext) -> Result<C64> {
    let (f, m, z) = (ctx.f_plus.0, ctx.m_minus.0, ctx.z);
    let diff = f - m;
    if diff.norm() < 1e-13 {
        return Err(CmvError::Degenerate(diff.norm()));
    }
    let a = ctx.alpha0;
    let r2 = ctx.rho0 * ctx.rho0;
    let first = -(f - 1.0) * (1.0 + m) / (2.0 * diff);
    let second = (z + a.conj() + m * (z - a.conj())) * (-1.0 - a * z + f * (1.0 - a * z))
        / (2.0 * r2 * z * diff);
    Ok((first - second) / z)
}

/// `F(z) = 1 + z (G_00 + G_11)`, the Carathéodory function of `(mu_0 + mu_1) / 2`.
pub fn f_extended(ctx: &GzContext) -> Result<CaratheodoryValue> {
    if !(ctx.z.norm() < 1.0) {
        return Err(CmvError::Disk(ctx.z.to_string()));
    }
    Ok(CaratheodoryValue(1.0 + ctx.z * corner_trace(ctx)?))
}

/// `|G_00 + G_11| / mobius_sup(F_+)` at `z`, a diagnostic for the bound of the
/// corner trace by the Möbius supremum.
pub fn mobius_coupling(ev: &ExtendedEvaluator, z: C64) -> Result<f64> {
    let ctx = ev.context(z)?;
    Ok(corner_trace(&ctx)?.norm() / mobius_sup(ctx.f_plus))
}

/// `n + 1` equally spaced angles covering `[0, 2 pi]`, both ends included.
pub fn full_circle_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Density of `dLambda_r = Re F(r e^{i theta}) dtheta / 2 pi` on a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureProfile {
    pub r: f64,
    pub theta: Vec<f64>,
    pub density: Vec<f64>,
    /// Trapezoid integral of the density from `theta[0]` to `theta[k]`.
    pub cumulative: Vec<f64>,
}

impl MeasureProfile {
    pub fn from_density(r: f64, theta: Vec<f64>, density: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(theta.len());
        let mut acc = 0.0;
        for k in 0..theta.len() {
            if k > 0 {
                acc += 0.5 * (density[k] + density[k - 1]) * (theta[k] - theta[k - 1]);
            }
            cumulative.push(acc);
        }
        Self {
            r,
            theta,
            density,
            cumulative,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn cumulative_at(&self, t: f64) -> f64 {
        let th = &self.theta;
        if t <= th[0] {
            return 0.0;
        }
        if t >= th[th.len() - 1] {
            return self.total_mass();
        }
        let k = th.partition_point(|&x| x <= t) - 1;
        let h = th[k + 1] - th[k];
        let s = t - th[k];
        // exact integral of the linear interpolant of the density
        let slope = (self.density[k + 1] - self.density[k]) / h;
        self.cumulative[k] + self.density[k] * s + 0.5 * slope * s * s
    }

    /// Mass of `[center - eps, center + eps]`; the arc must lie inside the grid
    /// span, or the grid must cover the whole circle `[t0, t0 + 2 pi]`.
    pub fn arc_mass(&self, center: f64, eps: f64) -> Result<f64> {
        let (t0, t1) = (self.theta[0], self.theta[self.theta.len() - 1]);
        let full = (t1 - t0 - TAU).abs() < 1e-9;
        let (a, b) = (center - eps, center + eps);
        if full {
            if 2.0 * eps >= TAU {
                return Ok(self.total_mass());
            }
            let a = t0 + (a - t0).rem_euclid(TAU);
            let b = a + 2.0 * eps;
            let total = self.total_mass();
            return Ok(if b <= t1 {
                self.cumulative_at(b) - self.cumulative_at(a)
            } else {
                total - self.cumulative_at(a) + self.cumulative_at(b - TAU)
            });
        }
        if a < t0 - 1e-12 || b > t1 + 1e-12 {
            return Err(CmvError::Window(format!(
                "arc [{a}, {b}] leaves the profile grid [{t0}, {t1}]"
            )));
        }
        Ok(self.cumulative_at(b) - self.cumulative_at(a))
    }

    pub fn records(&self) -> Vec<DensityRecord> {
        self.theta
            .iter()
            .zip(&self.density)
            .map(|(&theta, &density)| DensityRecord {
                theta,
                r: self.r,
                density,
            })
            .collect()
    }
}

/// Profile of `dLambda_r` on `theta_grid`.
pub fn lambda_r_profile_with(
    ev: &ExtendedEvaluator,
    r: f64,
    theta_grid: &[f64],
) -> Result<MeasureProfile> {
    if !(r > 0.0 && r < 1.0) {
        return Err(CmvError::InvalidParameter(format!("r = {r} not in (0, 1)")));
    }
    let density = theta_grid
        .iter()
        .map(|&t| Ok(ev.f_extended(C64::from_polar(r, t))?.0.re / TAU))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MeasureProfile::from_density(r, theta_grid.to_vec(), density))
}

pub fn lambda_r_profile(
    seq: &VerblunskySequence,
    r: f64,
    theta_grid: &[f64],
) -> Result<MeasureProfile> {
    lambda_r_profile_with(&ExtendedEvaluator::new(seq)?, r, theta_grid)
}

/// Profile on `points + 1` angles spanning `[center - eps, center + eps]`.
pub fn local_profile(
    ev: &ExtendedEvaluator,
    r: f64,
    center: f64,
    eps: f64,
    points: usize,
) -> Result<MeasureProfile> {
    let grid: Vec<f64> = (0..=points)
        .map(|k| center - eps + 2.0 * eps * k as f64 / points as f64)
        .collect();
    lambda_r_profile_with(ev, r, &grid)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderFit {
    /// Least-squares slope of `log mass` against `log eps`.
    pub beta_hat: f64,
    /// Smallest slope between neighbouring `eps`.
    pub envelope_beta: f64,
    pub samples: Vec<(f64, f64)>,
}

impl HolderFit {
    pub fn records(&self) -> Vec<ArcRecord> {
        self.samples
            .iter()
            .map(|&(eps, m)| ArcRecord {
                eps,
                arc_mass: m,
                log_eps: eps.ln(),
                log_mass: m.ln(),
            })
            .collect()
    }
}

/// Fits `mass ~ eps^beta` from `(eps, mass)` samples.
pub fn holder_fit(samples: &[(f64, f64)]) -> Result<HolderFit> {
    if samples.len() < 3 {
        return Err(CmvError::InsufficientData(format!(
            "Hölder fit needs at least 3 arc sizes, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&(e, m)| !(e > 0.0 && m > 0.0)) {
        return Err(CmvError::InsufficientData("arc sizes and masses must be positive".into()));
    }
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|&(e, m)| (e.ln(), m.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CmvError::InsufficientData("arc sizes must differ".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let envelope = pts
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .fold(f64::INFINITY, f64::min);
    Ok(HolderFit {
        beta_hat: sxy / sxx,
        envelope_beta: envelope,
        samples: samples.to_vec(),
    })
}

/// Hölder fit from profiles paired with `eps` (profile `k` is used for `eps[k]`).
pub fn holder_exponent(profiles: &[MeasureProfile], theta: f64, eps: &[f64]) -> Result<HolderFit> {
    if profiles.len() != eps.len() {
        return Err(CmvError::InsufficientData(format!(
            "{} profiles for {} arc sizes",
            profiles.len(),
            eps.len()
        )));
    }
    let samples = profiles
        .iter()
        .zip(eps)
        .map(|(p, &e)| Ok((e, p.arc_mass(theta, e)?)))
        .collect::<Result<Vec<_>>>()?;
    holder_fit(&samples)
}

/// Arc masses with `r = 1 - eps`, refining the local grid until `beta_hat`
/// moves by less than 0.01.
pub fn holder_scan(ev: &ExtendedEvaluator, theta: f64, eps: &[f64]) -> Result<HolderFit> {
    let mut points = 64;
    let mut prev: Option<HolderFit> = None;
    loop {
        let samples = eps
            .iter()
            .map(|&e| {
                let p = local_profile(ev, 1.0 - e, theta, e, points)?;
                Ok((e, p.total_mass()))
            })
            .collect::<Result<Vec<_>>>()?;
        let fit = holder_fit(&samples)?;
        if let Some(p) = &prev {
            if (p.beta_hat - fit.beta_hat).abs() < 0.01 || points >= 4096 {
                return Ok(fit);
            }
        }
        prev = Some(fit);
        points *= 2;
    }
}

/// `(arc mass of [theta - eps, theta + eps] under dLambda_{1-eps}, 2 eps (Re F((1-eps) e^{i theta}) + 1))`.
pub fn arc_mass_bound(ev: &ExtendedEvaluator, theta: f64, eps: f64) -> Result<(f64, f64)> {
    let r = 1.0 - eps;
    let mass = local_profile(ev, r, theta, eps, 256)?.total_mass();
    let f = ev.f_extended(C64::from_polar(r, theta))?.0;
    Ok((mass, 2.0 * eps * (f.re + 1.0)))
}

/// Transfer-matrix exponents at `e^{i theta}` from the right half of `seq`:
/// `gamma_low` is the smallest and `gamma_high` the largest envelope exponent
/// over the solutions started at `(1, lambda)`, `lambda` in `{1, -1, i, -i}`.
pub fn transfer_exponents(seq: &VerblunskySequence, theta: f64, l_max: usize) -> Result<FitResult> {
    let right = seq.shifted(0)?;
    let z = cis(theta);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut c_low = f64::INFINITY;
    let mut c_high = f64::NEG_INFINITY;
    for lambda in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::i(), -C64::i()] {
        let trace = SolutionTrace::new(&right, z, (C64::new(1.0, 0.0), lambda), l_max)?;
        let samples = norm_samples(&trace, 10.0, l_max as f64, 24)?;
        let fit = fit_power_law(&samples)?;
        if fit.gamma_low < lo {
            lo = fit.gamma_low;
            c_low = fit.c_low;
        }
        if fit.gamma_high > hi {
            hi = fit.gamma_high;
            c_high = fit.c_high;
        }
    }
    Ok(FitResult {
        gamma_low: lo,
        gamma_high: hi,
        c_low,
        c_high,
        beta: 2.0 * lo / (lo + hi),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityRecord {
    pub theta: f64,
    pub r: f64,
    pub density: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArcRecord {
    pub eps: f64,
    pub arc_mass: f64,
    pub log_eps: f64,
    pub log_mass: f64,
}

/// JSON summary of a Hölder run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderReport {
    pub theta: f64,
    pub beta_hat: f64,
    pub envelope_beta: f64,
    pub gamma_cross_check: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::coeffs::{make_constant, make_explicit, extend_two_sided, make_sturmian, Support, GOLDEN_FREQUENCY};
    use crate::operator::ResolventOracle;
    use proptest::prelude::*;

    fn zero() -> VerblunskySequence {
        make_constant(c64(0.0, 0.0), Support::TwoSided).unwrap()
    }

    fn fibonacci() -> VerblunskySequence {
        make_sturmian(c64(0.5, 0.0), c64(-0.5, 0.0), GOLDEN_FREQUENCY, Support::TwoSided).unwrap()
    }

    fn random(seed: u64) -> VerblunskySequence {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Vec<C64> {
            (0..600)
                .map(|_| C64::from_polar(0.8 * rng.random::<f64>(), rng.random_range(0.0..6.3)))
                .collect()
        };
        extend_two_sided(make_explicit(draw()).unwrap(), make_explicit(draw()).unwrap()).unwrap()
    }

    #[test]
    fn free_context() {
        let ctx = build_gz_context(&zero(), c64(0.5, 0.0), 200).unwrap();
        assert_eq!(ctx.f_plus.0, c64(1.0, 0.0));
        assert!(ctx.diagnostics.residual < 1e-9, "{:?}", ctx.diagnostics);
        assert_eq!(corner_trace(&ctx).unwrap(), C64::default());
        assert_eq!(f_extended(&ctx).unwrap().0, c64(1.0, 0.0));
        // u_+ decays like |z|^{n/2} on even sites
        let r = (ctx.u_plus(20).unwrap() / ctx.u_plus(10).unwrap()).norm();
        assert!((r - 0.5f64.powi(5)).abs() < 1e-9, "{r}");
    }

    #[test]
    fn origin_normalizations() {
        let seq = fibonacci();
        let z = 0.9 * cis(0.4);
        let ctx = build_gz_context(&seq, z, 300).unwrap();
        let (f, m) = (ctx.f_plus.0, ctx.m_minus.0);
        assert!((ctx.u_plus(0).unwrap() - (z + z * f)).norm() < 1e-12);
        assert!((ctx.u_minus(0).unwrap() - (z + z * m)).norm() < 1e-12);
        assert!((ctx.v_plus(0).unwrap() - (f - 1.0)).norm() < 1e-12);
        assert!((ctx.v_minus(0).unwrap() - (m - 1.0)).norm() < 1e-12);
        assert_eq!(ctx.convention, LeftConvention::RESOLVED);
        assert!(ctx.m_minus.is_anti());
    }

    #[test]
    fn entries_match_the_oracle() {
        for (seq, z) in [
            (fibonacci(), 0.9 * cis(2.0)),
            (fibonacci(), 1.1 * cis(-0.7)),
            (random(4), 0.5 * cis(1.0)),
        ] {
            let ctx = build_gz_context(&seq, z, 300).unwrap();
            assert_eq!(ctx.convention, LeftConvention::RESOLVED);
            if z.norm() < 1.0 {
                let direct = ExtendedEvaluator::new(&seq).unwrap().corner(z).unwrap();
                assert!(rel(direct, corner_trace(&ctx).unwrap()) < 1e-9);
            }
            let oracle = ResolventOracle::new(&seq, z, 300).unwrap();
            for y in -4..=4 {
                let col = oracle.column(y).unwrap();
                for x in -4..=4 {
                    let g = gz_entry(&ctx, x, y).unwrap();
                    let o = col[(x + 300) as usize];
                    assert!(rel(g, o) < 1e-8, "z={z} ({x},{y}): {g} vs {o}");
                }
            }
        }
    }

    #[test]
    fn corner_identity_and_symmetry() {
        let seq = random(9);
        let z = 0.7 * cis(0.3);
        let ctx = build_gz_context(&seq, z, 300).unwrap();
        let sum = gz_entry(&ctx, 0, 0).unwrap() + gz_entry(&ctx, 1, 1).unwrap();
        assert!(rel(sum, corner_trace(&ctx).unwrap()) < 1e-9);
        // real coefficients and real z give a real corner trace
        let ctx = ExtendedEvaluator::new(&fibonacci()).unwrap().context(c64(0.6, 0.0)).unwrap();
        assert!(corner_trace(&ctx).unwrap().im.abs() < 1e-14);
    }

    #[test]
    fn near_circle_rejected() {
        assert!(matches!(build_gz_context(&zero(), cis(0.3), 100), Err(CmvError::Disk(_))));
        assert!(matches!(
            build_gz_context(&zero(), c64(0.0, 0.0), 100),
            Err(CmvError::InvalidParameter(_))
        ));
    }

    #[test]
    fn extended_f_is_caratheodory_of_average() {
        // Moments of (mu_0 + mu_1)/2 against the Taylor coefficients of F
        let seq = fibonacci();
        let ev = ExtendedEvaluator::new(&seq).unwrap();
        let f = ev.f_extended(c64(1e-9, 0.0)).unwrap().0;
        assert!((f - 1.0).norm() < 1e-7);
        let one = ev.f_extended(c64(0.0, 0.0).exp() * 1e-12).unwrap().0;
        assert!((one - 1.0).norm() < 1e-10);
        for r in [0.3, 0.9, 0.99] {
            for k in 0..32 {
                let z = C64::from_polar(r, TAU * k as f64 / 32.0);
                assert!(ev.f_extended(z).unwrap().0.re > 0.0);
            }
        }
    }

    #[test]
    fn free_profile_and_holder() {
        let ev = ExtendedEvaluator::new(&zero()).unwrap();
        let p = lambda_r_profile_with(&ev, 0.9, &full_circle_grid(64)).unwrap();
        for d in &p.density {
            assert!((d - 1.0 / TAU).abs() < 1e-12);
        }
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
        assert!((p.arc_mass(6.2, 0.2).unwrap() - 0.4 / TAU).abs() < 1e-12);
        let eps = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];
        let fit = holder_scan(&ev, 1.0, &eps).unwrap();
        assert!((fit.beta_hat - 1.0).abs() < 1e-9);
        let (m, b) = arc_mass_bound(&ev, 2.0, 0.01).unwrap();
        assert!(m <= b);
        assert!(holder_fit(&[(0.1, 0.1)]).is_err());
    }

    #[test]
    fn atom_gives_zero_exponent() {
        let mu = crate::operator::PointMeasure {
            angles: vec![1.0, 2.5],
            weights: vec![0.4, 0.6],
        };
        let samples: Vec<(f64, f64)> = [0.1, 0.03, 0.01, 0.003]
            .iter()
            .map(|&e| (e, mu.arc_mass(1.0, e)))
            .collect();
        assert!(holder_fit(&samples).unwrap().beta_hat.abs() < 1e-12);
    }

    #[test]
    fn fibonacci_profile_mass() {
        let ev = ExtendedEvaluator::new(&fibonacci()).unwrap();
        let p = lambda_r_profile_with(&ev, 0.99, &full_circle_grid(4096)).unwrap();
        assert!((p.total_mass() - 1.0).abs() < 1e-3, "{}", p.total_mass());
        assert!(p.density.iter().all(|&d| d >= -1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn corner_identity_random(seed in 0u64..500, r in 0.3..0.95f64, t in 0.0..std::f64::consts::TAU) {
            let seq = random(seed);
            let ctx = build_gz_context(&seq, C64::from_polar(r, t), 200).unwrap();
            let sum = gz_entry(&ctx, 0, 0).unwrap() + gz_entry(&ctx, 1, 1).unwrap();
            prop_assert!(rel(sum, corner_trace(&ctx).unwrap()) < 1e-9);
            prop_assert!(f_extended(&ctx).unwrap().is_caratheodory());
        }
    }
}
