//! Substitution dynamics of Sturmian transfer matrices.
//!
//! For a frequency `w = [0; a_1, a_2, ...]` the Sturmian word read from index 1
//! is the limit of `s_0 = beta`, `s_1 = beta^{a_1 - 1} alpha`,
//! `s_{n+1} = s_n^{a_{n+1}} s_{n-1}`, with lengths `q_0 = 1`, `q_1 = a_1`,
//! `q_{n+1} = a_{n+1} q_n + q_{n-1}`. Products of normalized one-letter matrices
//! follow `M_{n+1} = M_{n-1} M_n^{a_{n+1}}`; for `n >= 1`, `M_n` equals the direct
//! product over letters `1 ..= q_n`. The traces `x_n = tr M_n` and
//! `z_n = tr M_{n-1} M_n` conserve the Fricke invariant
//! `I = x_{n-1}^2 + x_n^2 + z_n^2 - x_{n-1} x_n z_n`. Traces are propagated by
//! the scalar trace map, which keeps the invariant to roundoff in the traces
//! themselves; the matrices are kept for norms and direct comparisons.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::coeffs::{make_sturmian, rho_of, Support, VerblunskySequence, GOLDEN_FREQUENCY};
use crate::error::{CmvError, Result};
use crate::transfer::{cocycle_range, normalize_sl2, one_step, Mat2};
use crate::{cis, C64};

/// Entries beyond this are treated as overflow.
pub const OVERFLOW_LIMIT: f64 = 1e150;

/// Trace size past which an orbit has certainly left the spectrum. Beyond it the
/// invariant is a cancellation of terms of size `|x|^2` and loses all digits.
pub const ESCAPE_LIMIT: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuedFractionData {
    /// Partial quotients `a_1, a_2, ...`.
    pub a: Vec<u64>,
    /// Lengths `q_0, q_1, ...`.
    pub q: Vec<u64>,
    /// Largest running average of `a_n` over the tail half of the range.
    pub density: f64,
    /// Growth base with `q_n <= B^n` for `n >= 1`.
    pub base: f64,
}

/// Continued-fraction data for `a_1 ..= a_{n_max}`.
pub fn cf_data(a: &[u64], n_max: usize) -> Result<ContinuedFractionData> {
    if n_max == 0 || a.len() < n_max {
        return Err(CmvError::InsufficientData(format!(
            "need {n_max} partial quotients, got {}",
            a.len()
        )));
    }
    let a = a[..n_max].to_vec();
    if a.contains(&0) {
        return Err(CmvError::InvalidParameter("partial quotients must be >= 1".into()));
    }
    let mut q: Vec<u64> = vec![1, a[0]];
    for n in 1..n_max {
        let next = a[n]
            .checked_mul(q[n])
            .and_then(|v| v.checked_add(q[n - 1]))
            .ok_or_else(|| CmvError::Overflow(q[n] as f64))?;
        q.push(next);
    }
    let mut running = 0.0;
    let mut density: f64 = 0.0;
    let tail_start = (n_max / 2).max(1);
    for (k, &v) in a.iter().enumerate() {
        running += v as f64;
        let count = k + 1;
        if count >= tail_start {
            density = density.max(running / count as f64);
        }
    }
    let base = q
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, &qn)| (qn as f64).powf(1.0 / n as f64))
        .fold(1.0, f64::max);
    Ok(ContinuedFractionData {
        a,
        q,
        density,
        base,
    })
}

impl ContinuedFractionData {
    /// Golden mean: `a_n = 1` and `B = (1 + sqrt 5) / 2`.
    pub fn golden(n_max: usize) -> Result<Self> {
        cf_data(&vec![1; n_max], n_max)?.with_base((1.0 + 5f64.sqrt()) / 2.0)
    }

    /// Replaces `B`, checking `q_n <= B^n` on the computed range.
    pub fn with_base(mut self, base: f64) -> Result<Self> {
        for (n, &qn) in self.q.iter().enumerate().skip(1) {
            if qn as f64 > base.powi(n as i32) * (1.0 + 1e-12) {
                return Err(CmvError::InvalidParameter(format!(
                    "q_{n} = {qn} exceeds B^{n} for B = {base}"
                )));
            }
        }
        self.base = base;
        Ok(self)
    }

    pub fn levels(&self) -> usize {
        self.a.len()
    }

    /// `[0; a_1, ..., a_n]`.
    pub fn frequency(&self) -> f64 {
        self.a.iter().rev().fold(0.0, |x, &v| 1.0 / (v as f64 + x))
    }

    /// The Sturmian sequence whose word this data describes (`v = 1` selects `alpha`).
    pub fn sturmian(&self, alpha: C64, beta: C64) -> Result<VerblunskySequence> {
        let golden = self.a.iter().all(|&v| v == 1);
        let omega = if golden {
            crate::coeffs::GOLDEN_FREQUENCY
        } else {
            self.frequency()
        };
        make_sturmian(alpha, beta, omega, Support::OneSided)
    }

    /// Substitution word `s_n` as indicators (1 for `alpha`).
    pub fn word(&self, n: usize) -> Vec<u8> {
        let mut prev = vec![0u8];
        if n == 0 {
            return prev;
        }
        let mut cur: Vec<u8> = std::iter::repeat_n(0u8, self.a[0] as usize - 1)
            .chain(std::iter::once(1))
            .collect();
        for k in 1..n {
            let mut next = Vec::with_capacity(cur.len() * self.a[k] as usize + prev.len());
            for _ in 0..self.a[k] {
                next.extend_from_slice(&cur);
            }
            next.extend_from_slice(&prev);
            prev = std::mem::replace(&mut cur, next);
        }
        cur
    }
}

/// `T / z^{1/2}` for a single coefficient.
pub fn one_letter(a: C64, z: C64) -> Result<Mat2> {
    let seq = crate::coeffs::make_constant(a, Support::OneSided)?;
    normalize_sl2(&one_step(&seq, z, 0)?, z, 1)
}

pub fn fricke_invariant(x_prev: C64, x_cur: C64, z_cur: C64) -> C64 {
    x_prev * x_prev + x_cur * x_cur + z_cur * z_cur - x_prev * x_cur * z_cur
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub n: usize,
    pub q: u64,
    pub x: C64,
    pub z: C64,
    pub invariant: C64,
}

#[derive(Clone, Debug)]
pub struct TraceOrbit {
    pub z: C64,
    pub alphabet: (C64, C64),
    /// Levels `1 ..= n` (fewer when overflow stopped the orbit).
    pub records: Vec<TraceRecord>,
    /// `M_0, M_1, ...` up to the last recorded level.
    pub matrices: Vec<Mat2>,
    pub overflow: bool,
}

impl TraceOrbit {
    /// `max_n |I_n - I_1| / (1 + |I_1|)`.
    pub fn invariant_drift(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        self.records
            .iter()
            .map(|r| (r.invariant - first.invariant).norm() / (1.0 + first.invariant.norm()))
            .fold(0.0, f64::max)
    }

    /// First level whose traces exceed `limit`.
    pub fn escape_level(&self, limit: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.x.norm().max(r.z.norm()) > limit)
            .map(|r| r.n)
    }

    /// [`Self::invariant_drift`] over the levels before [`Self::escape_level`].
    pub fn bounded_invariant_drift(&self, limit: f64) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        self.records
            .iter()
            .take_while(|r| r.x.norm().max(r.z.norm()) <= limit)
            .map(|r| (r.invariant - first.invariant).norm() / (1.0 + first.invariant.norm()))
            .fold(0.0, f64::max)
    }

    pub fn invariant(&self) -> Option<C64> {
        self.records.first().map(|r| r.invariant)
    }
}

fn overflowed(m: &Mat2) -> bool {
    !m.is_finite() || m.max_abs() > OVERFLOW_LIMIT
}

/// `(U_{a-2}(x), U_{a-1}(x), U_a(x))` for Chebyshev polynomials of the second
/// kind, `U_{-1} = 0`, `U_0 = 1`.
fn chebyshev_u(x: C64, a: u64) -> (C64, C64, C64) {
    let (mut u_prev, mut u) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let mut u_prev2 = C64::new(0.0, 0.0);
    for _ in 0..a {
        let next = x * u - u_prev;
        u_prev2 = u_prev;
        u_prev = u;
        u = next;
    }
    // after `a` steps: u = U_a, u_prev = U_{a-1}, u_prev2 = U_{a-2}
    (u_prev2, u_prev, u)
}

/// One step of the scalar trace map: from `(x_{n-1}, x_n, z_n)` to
/// `(x_n, x_{n+1}, z_{n+1})` with `M^a = U_{a-1}(x) M - U_{a-2}(x)` for
/// `M` in `SL(2)`.
pub fn trace_step(x_prev: C64, x: C64, z: C64, a: u64) -> (C64, C64, C64) {
    let (u_am2, u_am1, u_a) = chebyshev_u(x, a);
    (x, u_am1 * z - u_am2 * x_prev, u_a * z - u_am1 * x_prev)
}

/// Runs the substitution recursion up to level `n_max` at spectral parameter `z`.
pub fn trace_orbit(
    alphabet: (C64, C64),
    cf: &ContinuedFractionData,
    z: C64,
    n_max: usize,
) -> Result<TraceOrbit> {
    if z.norm() == 0.0 {
        return Err(CmvError::InvalidParameter("trace map needs z != 0".into()));
    }
    if n_max > cf.levels() {
        return Err(CmvError::InsufficientData(format!(
            "level {n_max} exceeds the {} available partial quotients",
            cf.levels()
        )));
    }
    let (alpha, beta) = alphabet;
    let la = one_letter(alpha, z)?;
    let lb = one_letter(beta, z)?;
    let m0 = lb;
    let m1 = la.mul(&lb.pow(cf.a[0] - 1));
    let mut matrices = vec![m0, m1];
    let mut records = Vec::with_capacity(n_max);
    let mut overflow = false;
    let (mut x_prev, mut x) = (m0.trace(), m1.trace());
    let mut zt = m0.mul(&m1).trace();
    for n in 1..=n_max {
        if n >= 2 {
            let a = cf.a[n - 1];
            let next = matrices[n - 2].mul(&matrices[n - 1].pow(a));
            if overflowed(&next) {
                overflow = true;
                break;
            }
            matrices.push(next);
            (x_prev, x, zt) = trace_step(x_prev, x, zt, a);
        }
        records.push(TraceRecord {
            n,
            q: cf.q[n],
            x,
            z: zt,
            invariant: fricke_invariant(x_prev, x, zt),
        });
    }
    Ok(TraceOrbit {
        z,
        alphabet,
        records,
        matrices,
        overflow,
    })
}

/// Direct normalized product over letters `1 ..= q_n` of the Sturmian word.
pub fn direct_product(seq: &VerblunskySequence, z: C64, q: u64) -> Result<Mat2> {
    let t = cocycle_range(seq, z, 1, q)?.to_mat()?;
    normalize_sl2(&t, z, q as i64)
}

/// `2 + sqrt(8 + I)` with `I` replaced by `|I|`.
pub fn default_k(i_sup: f64) -> f64 {
    2.0 + (8.0 + i_sup).sqrt()
}

/// Membership masks of the approximants `Sigma_1, ..., Sigma_n` on `theta_grid`.
///
/// `levels[m - 1][k]` is true when `|x_j| <= K` or `|z_j| <= K` for every `j <= m`
/// at `e^{i theta_k}`. An orbit that overflows before level `m` is excluded from
/// that level on.
pub fn spectrum_levels(
    alphabet: (C64, C64),
    cf: &ContinuedFractionData,
    theta_grid: &[f64],
    n: usize,
    k: f64,
) -> Result<Vec<Vec<bool>>> {
    if !(k > 2.0) {
        return Err(CmvError::InvalidParameter(format!("K = {k} must exceed 2")));
    }
    let mut levels = vec![vec![false; theta_grid.len()]; n];
    for (idx, &theta) in theta_grid.iter().enumerate() {
        let orbit = trace_orbit(alphabet, cf, cis(theta), n)?;
        let mut alive = true;
        for m in 1..=n {
            alive = alive
                && orbit
                    .records
                    .get(m - 1)
                    .is_some_and(|r| r.x.norm() <= k || r.z.norm() <= k);
            levels[m - 1][idx] = alive;
        }
    }
    Ok(levels)
}

/// Membership mask of `Sigma_n` on `theta_grid`.
pub fn spectrum_approx(
    alphabet: (C64, C64),
    cf: &ContinuedFractionData,
    theta_grid: &[f64],
    n: usize,
    k: f64,
) -> Result<Vec<bool>> {
    if n == 0 {
        return Ok(vec![true; theta_grid.len()]);
    }
    Ok(spectrum_levels(alphabet, cf, theta_grid, n, k)?.pop().unwrap_or_default())
}

/// Number of consecutive levels `1, 2, ...` (at most `n`) at which `e^{i theta}`
/// passes the `|x_j| <= K or |z_j| <= K` test.
pub fn alive_depth(
    alphabet: (C64, C64),
    cf: &ContinuedFractionData,
    theta: f64,
    n: usize,
    k: f64,
) -> Result<usize> {
    let orbit = trace_orbit(alphabet, cf, cis(theta), n)?;
    Ok(orbit
        .records
        .iter()
        .take_while(|r| r.x.norm() <= k || r.z.norm() <= k)
        .count())
}

/// Searches `[theta - width, theta + width]` for an angle in `Sigma_n` by
/// repeatedly zooming onto the run of scan points with the largest
/// [`alive_depth`] nearest the current point. Returns `None` when the depth
/// stops improving before reaching `n`.
pub fn refine_spectrum_point(
    alphabet: (C64, C64),
    cf: &ContinuedFractionData,
    theta: f64,
    width: f64,
    n: usize,
    k: f64,
) -> Result<Option<f64>> {
    const SCAN: usize = 128;
    const PATIENCE: usize = 8;
    let (mut lo, mut hi, mut center) = (theta - width, theta + width, theta);
    let (mut best_depth, mut stalled) = (0usize, 0usize);
    while stalled < PATIENCE && hi - lo > 1e-14 {
        let h = (hi - lo) / SCAN as f64;
        let depth = (0..=SCAN)
            .map(|j| alive_depth(alphabet, cf, lo + h * j as f64, n, k))
            .collect::<Result<Vec<usize>>>()?;
        let top = *depth.iter().max().expect("non-empty scan");
        if top == 0 {
            return Ok(None);
        }
        // runs of scan points at the top depth; keep the one nearest `center`
        let mut pick: Option<(usize, usize, f64)> = None;
        let mut j = 0;
        while j <= SCAN {
            if depth[j] != top {
                j += 1;
                continue;
            }
            let start = j;
            while j < SCAN && depth[j + 1] == top {
                j += 1;
            }
            let mid = lo + h * 0.5 * (start + j) as f64;
            if pick.is_none_or(|p| (mid - center).abs() < (p.2 - center).abs()) {
                pick = Some((start, j, mid));
            }
            j += 1;
        }
        let (s, e, mid) = pick.expect("top depth is attained");
        center = mid;
        if top >= n {
            return Ok(Some(center));
        }
        if top > best_depth {
            best_depth = top;
            stalled = 0;
        } else {
            stalled += 1;
        }
        (lo, hi) = (lo + h * (s as f64 - 1.0), lo + h * (e as f64 + 1.0));
    }
    Ok(None)
}

/// Up to `count` angles spread evenly over the true entries of a mask.
pub fn pick_mask_points(grid: &[f64], mask: &[bool], count: usize) -> Vec<f64> {
    let inside: Vec<f64> = grid.iter().zip(mask).filter(|(_, &m)| m).map(|(&t, _)| t).collect();
    if inside.is_empty() || count == 0 {
        return Vec::new();
    }
    (0..count)
        .map(|k| inside[(k * inside.len()) / count + inside.len() / (2 * count)])
        .collect()
}

/// Up to `count` angles in `Sigma_depth`, seeded from the level-10 mask (or the
/// `depth` mask if shallower) on a `grid_size`-point grid and refined with
/// [`refine_spectrum_point`].
pub fn sample_spectrum_points(
    alphabet: (C64, C64),
    cf: &ContinuedFractionData,
    grid_size: usize,
    depth: usize,
    count: usize,
) -> Result<Vec<f64>> {
    let seed_level = depth.min(10);
    let grid: Vec<f64> = (0..grid_size).map(|k| TAU * k as f64 / grid_size as f64).collect();
    let sweep = circle_sweep(alphabet, cf, &grid)?;
    let k = default_k(sweep.i_sup);
    let levels = spectrum_levels(alphabet, cf, &grid, seed_level, k)?;
    let mut found = Vec::new();
    for seed in pick_mask_points(&grid, &levels[seed_level - 1], 4 * count) {
        if let Some(t) = refine_spectrum_point(alphabet, cf, seed, 0.02, depth, k)? {
            found.push(t);
        }
    }
    if found.len() <= count {
        return Ok(found);
    }
    Ok((0..count)
        .map(|j| found[(j * found.len()) / count + found.len() / (2 * count)])
        .collect())
}

/// Partial quotients `a_1, a_2, ...` of `omega` in `(0, 1)`.
pub fn continued_fraction(omega: f64, count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut x = omega;
    for _ in 0..count {
        if x <= 1e-12 {
            break;
        }
        let inv = 1.0 / x;
        let a = inv.floor();
        out.push(a as u64);
        x = inv - a;
    }
    out
}

/// Continued-fraction data for the frequency `omega`, exact for the golden mean.
pub fn cf_for_frequency(omega: f64, levels: usize) -> Result<ContinuedFractionData> {
    if (omega - GOLDEN_FREQUENCY).abs() < 1e-15 {
        return ContinuedFractionData::golden(levels);
    }
    cf_data(&continued_fraction(omega, levels + 1), levels)
}

/// Circle-wide quantities feeding [`gamma_constants`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CircleSweep {
    /// `max |I|` over the grid.
    pub i_sup: f64,
    /// `max |Im I|`, a diagnostic for non-real invariants.
    pub i_imag_max: f64,
    /// `(max ||M_0||, max ||M_1||, max ||M_0 M_1||)`.
    pub seed_norms: (f64, f64, f64),
}

pub fn circle_sweep(
    alphabet: (C64, C64),
    cf: &ContinuedFractionData,
    theta_grid: &[f64],
) -> Result<CircleSweep> {
    let mut out = CircleSweep {
        i_sup: 0.0,
        i_imag_max: 0.0,
        seed_norms: (0.0, 0.0, 0.0),
    };
    for &theta in theta_grid {
        let orbit = trace_orbit(alphabet, cf, cis(theta), 1)?;
        let i = orbit.records[0].invariant;
        out.i_sup = out.i_sup.max(i.norm());
        out.i_imag_max = out.i_imag_max.max(i.im.abs());
        let (m0, m1) = (&orbit.matrices[0], &orbit.matrices[1]);
        out.seed_norms.0 = out.seed_norms.0.max(m0.norm());
        out.seed_norms.1 = out.seed_norms.1.max(m1.norm());
        out.seed_norms.2 = out.seed_norms.2.max(m0.mul(m1).norm());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaConstants {
    pub d: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub c_alphabeta: f64,
    /// Bound used for `sup |x_n|` and `sup |z_n|`.
    pub trace_bound: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub c_upper: f64,
    pub beta: f64,
}

/// Explicit Hölder constants. The trace supremum entering `L` is bounded by
/// `C(alpha, beta)`, which dominates `2 + sqrt(8 + I)`.
pub fn gamma_constants(
    alphabet: (C64, C64),
    cf: &ContinuedFractionData,
    i_sup: f64,
    seed_norms: (f64, f64, f64),
) -> Result<GammaConstants> {
    if 8.0 + i_sup < 0.0 {
        return Err(CmvError::Domain(format!("8 + I_sup = {} < 0", 8.0 + i_sup)));
    }
    let (ra, rb) = (rho_of(alphabet.0), rho_of(alphabet.1));
    let c = default_k(i_sup).max(4.0 / (ra * rb));
    let t = c.max(2.0);
    let (n0, n1, n01) = seed_norms;
    let l = (4.0 * t).max(4.0 * n1).max(4.0 * n0).max(4.0 * n01) * (4.0 + 2.0 * t);
    let d = cf.density;
    let gamma2 = 4.0 * d * l.log2();
    let gamma1 = (1.0 + 1.0 / (4.0 * c * c)).ln() / (16.0 * cf.base.ln());
    Ok(GammaConstants {
        d,
        b: cf.base,
        c_alphabeta: c,
        trace_bound: t,
        l,
        gamma1,
        gamma2,
        c_upper: l.powf(4.0 * d),
        beta: 2.0 * gamma1 / (gamma1 + gamma2),
    })
}

/// CSV row of a spectrum atlas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AtlasRecord {
    pub theta: f64,
    pub n: usize,
    pub q_n: u64,
    pub abs_x: f64,
    pub abs_z: f64,
    #[serde(rename = "re_I")]
    pub re_i: f64,
    #[serde(rename = "im_I")]
    pub im_i: f64,
    pub in_spectrum: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::coeffs::make_fibonacci;
    use proptest::prelude::*;

    #[test]
    fn fibonacci_denominators() {
        let cf = cf_data(&[1; 20], 20).unwrap();
        assert_eq!(&cf.q[..8], &[1, 1, 2, 3, 5, 8, 13, 21]);
        assert_eq!(cf.density, 1.0);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(cf.base <= phi);
        let golden = ContinuedFractionData::golden(20).unwrap();
        assert_eq!(golden.base, phi);
        assert!(golden.q[20] as f64 <= phi.powi(20));
        assert!(cf.clone().with_base(1.5).is_err());
        let alt = cf_data(&[1, 2, 1, 2, 1, 2, 1, 2], 8).unwrap();
        assert_eq!(alt.density, 1.5);
    }

    #[test]
    fn words_match_sturmian_prefixes() {
        let cf = ContinuedFractionData::golden(12).unwrap();
        let seq = cf.sturmian(c64(0.5, 0.0), c64(-0.5, 0.0)).unwrap();
        for n in 1..12 {
            let w = cf.word(n);
            assert_eq!(w.len() as u64, cf.q[n]);
            for (k, &v) in w.iter().enumerate() {
                assert_eq!(seq.indicator(k as i64 + 1), Some(v), "level {n}, letter {k}");
            }
        }
        let cf = cf_data(&[2, 1, 3, 1, 2, 2], 6).unwrap();
        let seq = cf.sturmian(c64(0.5, 0.0), c64(-0.5, 0.0)).unwrap();
        let w = cf.word(5);
        for (k, &v) in w.iter().enumerate() {
            assert_eq!(seq.indicator(k as i64 + 1), Some(v));
        }
    }

    #[test]
    fn fricke_examples() {
        let two = c64(2.0, 0.0);
        assert_eq!(fricke_invariant(two, two, two), c64(4.0, 0.0));
        assert_eq!(fricke_invariant(C64::default(), C64::default(), C64::default()), C64::default());
        let (a, b, c) = (c64(0.3, -1.2), c64(2.0, 0.5), c64(-0.7, 0.1));
        let direct = a.powi(2) + b.powi(2) + c.powi(2) - a * b * c;
        assert!((fricke_invariant(a, b, c) - direct).norm() < 1e-14);
    }

    #[test]
    fn free_orbit_is_trivial() {
        let cf = ContinuedFractionData::golden(10).unwrap();
        let orbit = trace_orbit((C64::default(), C64::default()), &cf, c64(1.0, 0.0), 10).unwrap();
        for r in &orbit.records {
            assert!((r.x - 2.0).norm() < 1e-14 && (r.z - 2.0).norm() < 1e-14);
            assert!((r.invariant - 4.0).norm() < 1e-13);
        }
    }

    #[test]
    fn recursion_matches_direct_product() {
        let alphabet = (c64(0.5, 0.0), c64(-0.5, 0.0));
        let cf = ContinuedFractionData::golden(14).unwrap();
        let seq = make_fibonacci(alphabet.0, alphabet.1, Support::OneSided).unwrap();
        let z = cis(1.0);
        let orbit = trace_orbit(alphabet, &cf, z, 13).unwrap();
        for n in 1..orbit.matrices.len() {
            let direct = direct_product(&seq, z, cf.q[n]).unwrap();
            assert!(orbit.matrices[n].rel_distance(&direct) < 1e-9, "level {n}");
        }
    }

    #[test]
    fn invariant_conserved() {
        let alphabet = (c64(0.5, 0.0), c64(-0.5, 0.0));
        let cf = ContinuedFractionData::golden(15).unwrap();
        let orbit = trace_orbit(alphabet, &cf, cis(1.0), 15).unwrap();
        assert!(orbit.invariant_drift() < 1e-8, "{}", orbit.invariant_drift());
    }

    #[test]
    fn scalar_traces_match_matrices() {
        let alphabet = (c64(0.3, 0.4), c64(-0.6, 0.1));
        let cf = cf_data(&[2, 3, 1, 2, 4, 1, 1], 7).unwrap();
        let orbit = trace_orbit(alphabet, &cf, cis(0.9), 7).unwrap();
        for r in &orbit.records {
            let (prev, cur) = (&orbit.matrices[r.n - 1], &orbit.matrices[r.n]);
            assert!((r.x - cur.trace()).norm() < 1e-9 * (1.0 + r.x.norm()));
            assert!((r.z - prev.mul(cur).trace()).norm() < 1e-9 * (1.0 + r.z.norm()));
        }
        assert!(orbit.escape_level(ESCAPE_LIMIT).is_some());
        assert!(orbit.bounded_invariant_drift(ESCAPE_LIMIT) < 1e-12);
    }

    #[test]
    fn escaping_orbit_is_cut() {
        let alphabet = (c64(0.5, 0.0), c64(-0.5, 0.0));
        let cf = ContinuedFractionData::golden(15).unwrap();
        let orbit = trace_orbit(alphabet, &cf, cis(TAU * 0.5 / 64.0), 15).unwrap();
        let level = orbit.escape_level(ESCAPE_LIMIT).unwrap();
        assert!(level > 2 && level < 15);
        assert!(orbit.invariant_drift() > 1.0);
        assert!(orbit.bounded_invariant_drift(ESCAPE_LIMIT) < 1e-8);
    }

    #[test]
    fn free_mask_is_full_and_gaps_open() {
        let cf = ContinuedFractionData::golden(10).unwrap();
        let grid: Vec<f64> = (0..256).map(|k| k as f64 * std::f64::consts::TAU / 256.0).collect();
        let free = spectrum_approx((C64::default(), C64::default()), &cf, &grid, 10, default_k(4.0)).unwrap();
        assert!(free.iter().all(|&b| b));
        let alphabet = (c64(0.8, 0.0), c64(-0.8, 0.0));
        let sweep = circle_sweep(alphabet, &cf, &grid).unwrap();
        let mask = spectrum_approx(alphabet, &cf, &grid, 10, default_k(sweep.i_sup)).unwrap();
        assert!(mask.iter().any(|&b| !b) && mask.iter().any(|&b| b));
    }

    #[test]
    fn refined_points_stay_in_the_spectrum() {
        let alphabet = (c64(0.5, 0.0), c64(-0.5, 0.0));
        let cf = ContinuedFractionData::golden(22).unwrap();
        let k = default_k(11.2);
        for theta in [0.4, 1.0, 3.0] {
            let t = refine_spectrum_point(alphabet, &cf, theta, 0.3, 22, k).unwrap().unwrap();
            assert_eq!(alive_depth(alphabet, &cf, t, 22, k).unwrap(), 22);
            // bounded transfer growth at a spectrum point
            let seq = cf.sturmian(alphabet.0, alphabet.1).unwrap();
            let m = direct_product(&seq, cis(t), cf.q[18]).unwrap();
            assert!(m.norm() < 1e6, "{t}: {}", m.norm());
        }
        // a wide gap holds no band
        assert_eq!(refine_spectrum_point(alphabet, &cf, 2.5, 0.3, 22, k).unwrap(), None);
    }

    #[test]
    fn golden_partial_quotients() {
        assert_eq!(continued_fraction(GOLDEN_FREQUENCY, 10), vec![1; 10]);
        assert_eq!(continued_fraction(0.5, 5), vec![2]);
    }

    #[test]
    fn mask_points_are_inside() {
        let grid: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let mask = [false, true, true, false, true, false, false, true, true, true];
        let pts = pick_mask_points(&grid, &mask, 3);
        assert_eq!(pts.len(), 3);
        for p in pts {
            assert!(mask[p as usize]);
        }
        assert!(pick_mask_points(&grid, &[false; 10], 3).is_empty());
        let silver = cf_for_frequency(2f64.sqrt() - 1.0, 12).unwrap();
        assert_eq!(silver.a, vec![2; 12]);
        assert!((silver.frequency() - (2f64.sqrt() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn gamma_constant_examples() {
        let cf = ContinuedFractionData::golden(10).unwrap();
        let g = gamma_constants((C64::default(), C64::default()), &cf, 4.0, (1.0, 1.0, 1.0)).unwrap();
        assert!((g.c_alphabeta - (2.0 + 12f64.sqrt())).abs() < 1e-14);
        assert!(g.beta > 0.0 && g.beta < 1.0 && g.gamma1 < g.gamma2);
        // gamma_1 formula at C = 2 and the golden base
        let b = (1.0 + 5f64.sqrt()) / 2.0;
        let gamma1 = (1.0f64 + 1.0 / 16.0).ln() / (16.0 * b.ln());
        assert!((gamma1 - 7.87e-3).abs() < 1e-5);
        assert!(matches!(
            gamma_constants((C64::default(), C64::default()), &cf, -9.0, (1.0, 1.0, 1.0)),
            Err(CmvError::Domain(_))
        ));
    }

    proptest! {
        #[test]
        fn masks_monotone(a in 0.05..0.9f64, b in -0.9..-0.05f64, k_extra in 0.0..3.0f64) {
            let cf = ContinuedFractionData::golden(8).unwrap();
            let grid: Vec<f64> = (0..48).map(|k| k as f64 * std::f64::consts::TAU / 48.0).collect();
            let alphabet = (c64(a, 0.0), c64(b, 0.0));
            let k = default_k(4.0);
            let levels = spectrum_levels(alphabet, &cf, &grid, 8, k).unwrap();
            for w in levels.windows(2) {
                for (&fine, &coarse) in w[1].iter().zip(&w[0]) {
                    prop_assert!(!fine || coarse);
                }
            }
            let wider = spectrum_approx(alphabet, &cf, &grid, 8, k + k_extra).unwrap();
            for j in 0..grid.len() {
                prop_assert!(!levels[7][j] || wider[j]);
            }
        }
    }
}
