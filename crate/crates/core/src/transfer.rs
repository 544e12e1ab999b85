//! Szegő transfer matrices, their products and solution norms.

use serde::Serialize;

use crate::coeffs::VerblunskySequence;
use crate::error::{CmvError, Result};
use crate::C64;

/// 2x2 complex matrix `[[a, b], [c, d]]` with a determinant carried alongside
/// the entries. Products multiply the cached determinants, so the cache records
/// the exact determinant of the ideal product independently of rounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
    det: C64,
}

impl Mat2 {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self {
            a,
            b,
            c,
            d,
            det: a * d - b * c,
        }
    }

    pub fn identity() -> Self {
        let (o, l) = (C64::default(), C64::new(1.0, 0.0));
        Self::new(l, o, o, l)
    }

    pub fn diag(p: C64, q: C64) -> Self {
        Self::new(p, C64::default(), C64::default(), q)
    }

    pub fn det(&self) -> C64 {
        self.det
    }

    pub fn det_recomputed(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// Relative mismatch between the recomputed and cached determinant.
    pub fn det_defect(&self) -> f64 {
        (self.det_recomputed() - self.det).norm() / self.det.norm().max(f64::MIN_POSITIVE)
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
            det: self.det * s * s,
        }
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
            det: self.det * o.det,
        }
    }

    pub fn pow(&self, k: u64) -> Mat2 {
        let mut out = Mat2::identity();
        let mut base = *self;
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        out
    }

    pub fn apply(&self, v: (C64, C64)) -> (C64, C64) {
        (self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }

    pub fn max_abs(&self) -> f64 {
        [self.a, self.b, self.c, self.d]
            .iter()
            .fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        (self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()).sqrt()
    }

    /// Spectral (operator 2-) norm.
    pub fn norm(&self) -> f64 {
        // largest eigenvalue of the Hermitian matrix M* M = [[p, q], [conj q, s]]
        let p = self.a.norm_sqr() + self.c.norm_sqr();
        let s = self.b.norm_sqr() + self.d.norm_sqr();
        let q = self.a.conj() * self.b + self.c.conj() * self.d;
        let half = 0.5 * (p - s);
        (0.5 * (p + s) + (half * half + q.norm_sqr()).sqrt()).sqrt()
    }

    /// Largest entrywise relative difference, scaled by the larger matrix.
    pub fn rel_distance(&self, o: &Mat2) -> f64 {
        let scale = self.max_abs().max(o.max_abs()).max(f64::MIN_POSITIVE);
        [
            self.a - o.a,
            self.b - o.b,
            self.c - o.c,
            self.d - o.d,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.norm()))
            / scale
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d]
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// `exp(log_scale) * mat`, renormalized periodically to avoid overflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledMat2 {
    pub mat: Mat2,
    pub log_scale: f64,
}

impl ScaledMat2 {
    pub fn identity() -> Self {
        Self {
            mat: Mat2::identity(),
            log_scale: 0.0,
        }
    }

    pub fn renormalize(&mut self) {
        let m = self.mat.max_abs();
        if m > 0.0 && m.is_finite() {
            self.mat = self.mat.scale(C64::new(1.0 / m, 0.0));
            self.log_scale += m.ln();
        }
    }

    /// Unscaled matrix; fails when the scale is not representable.
    pub fn to_mat(&self) -> Result<Mat2> {
        if self.log_scale > 700.0 {
            return Err(CmvError::Overflow(self.log_scale));
        }
        Ok(self.mat.scale(C64::new(self.log_scale.exp(), 0.0)))
    }

    pub fn log_norm(&self) -> f64 {
        self.mat.norm().ln() + self.log_scale
    }

    /// `det / (z^len)` evaluated in log space; equals 1 for an exact product.
    pub fn det_ratio(&self, z: C64, len: u64) -> C64 {
        let log_target = len as f64 * z.norm().ln() - 2.0 * self.log_scale;
        let target = C64::from_polar(log_target.exp(), len as f64 * z.arg());
        self.mat.det() / target
    }
}

/// `(1/rho(n)) [[z, -conj(alpha(n))], [-alpha(n) z, 1]]`.
pub fn one_step(seq: &VerblunskySequence, z: C64, n: i64) -> Result<Mat2> {
    let a = seq.alpha(n);
    let r = seq.rho(n);
    if r <= 0.0 {
        return Err(CmvError::DegenerateRho { index: n, rho: r });
    }
    let s = 1.0 / r;
    let mut m = Mat2::new(z * s, -a.conj() * s, -a * z * s, C64::new(s, 0.0));
    m.det = z;
    Ok(m)
}

/// `one_step(start + len - 1) ... one_step(start)` with periodic renormalization.
pub fn cocycle_range(
    seq: &VerblunskySequence,
    z: C64,
    start: i64,
    len: u64,
) -> Result<ScaledMat2> {
    let mut acc = ScaledMat2::identity();
    for k in 0..len {
        let step = one_step(seq, z, start + k as i64)?;
        acc.mat = step.mul(&acc.mat);
        if (k + 1) % 64 == 0 {
            acc.renormalize();
            if !acc.mat.is_finite() {
                return Err(CmvError::Overflow(acc.log_scale));
            }
        }
    }
    acc.renormalize();
    if !acc.mat.is_finite() || !acc.log_scale.is_finite() {
        return Err(CmvError::Overflow(acc.log_scale));
    }
    Ok(acc)
}

/// `T_L(z) = one_step(L-1) ... one_step(0)`.
pub fn cocycle_product(seq: &VerblunskySequence, z: C64, len: u64) -> Result<Mat2> {
    if len == 0 {
        return Ok(Mat2::identity());
    }
    cocycle_range(seq, z, 0, len)?.to_mat()
}

/// `z^{1/2}` with `arg z` taken in `[0, 2 pi)`.
pub fn sqrt_branch(z: C64) -> C64 {
    let theta = z.arg().rem_euclid(std::f64::consts::TAU);
    C64::from_polar(z.norm().sqrt(), theta / 2.0)
}

/// `(z^{1/2})^n` on the fixed branch.
pub fn half_power(z: C64, n: i64) -> C64 {
    let theta = z.arg().rem_euclid(std::f64::consts::TAU);
    C64::from_polar(z.norm().powf(n as f64 / 2.0), n as f64 * theta / 2.0)
}

/// `M_n = T_n / z^{n/2}`, which lies in `SL(2, C)`.
pub fn normalize_sl2(t: &Mat2, z: C64, n: i64) -> Result<Mat2> {
    if z.norm() == 0.0 {
        return Err(CmvError::InvalidParameter("normalization needs z != 0".into()));
    }
    Ok(t.scale(half_power(z, n).inv()))
}

/// Pairs `(eta_j, eta_j^*)` propagated by the cocycle, with cumulative
/// squared norms `sum_{i <= j} (|eta_i|^2 + |eta_i^*|^2) / 2`.
#[derive(Clone, Debug)]
pub struct SolutionTrace {
    pairs: Vec<(C64, C64)>,
    partial: Vec<f64>,
}

pub(crate) fn check_initial(initial: (C64, C64)) -> Result<()> {
    let s = initial.0.norm_sqr() + initial.1.norm_sqr();
    if (s - 2.0).abs() > 1e-10 {
        return Err(CmvError::Normalization(s));
    }
    Ok(())
}

impl SolutionTrace {
    /// Propagates from `initial` up to index `horizon`.
    pub fn new(
        seq: &VerblunskySequence,
        z: C64,
        initial: (C64, C64),
        horizon: usize,
    ) -> Result<Self> {
        check_initial(initial)?;
        let mut pairs = Vec::with_capacity(horizon + 1);
        let mut partial = Vec::with_capacity(horizon + 1);
        let mut cur = initial;
        let mut sum = 0.0;
        for j in 0..=horizon {
            sum += 0.5 * (cur.0.norm_sqr() + cur.1.norm_sqr());
            if !sum.is_finite() {
                return Err(CmvError::Overflow(sum));
            }
            pairs.push(cur);
            partial.push(sum);
            if j < horizon {
                cur = one_step(seq, z, j as i64)?.apply(cur);
            }
        }
        Ok(Self { pairs, partial })
    }

    pub fn horizon(&self) -> usize {
        self.pairs.len() - 1
    }

    pub fn pairs(&self) -> &[(C64, C64)] {
        &self.pairs
    }

    pub fn partial_sums(&self) -> &[f64] {
        &self.partial
    }

    /// `||eta||_L^2`, linear in `L` between integers.
    pub fn norm_sqr_at(&self, l: f64) -> Result<f64> {
        if !(l >= 0.0) {
            return Err(CmvError::InvalidParameter(format!("norm scale {l} < 0")));
        }
        let h = self.horizon();
        if l > h as f64 {
            return Err(CmvError::Horizon { horizon: h });
        }
        let k = l.floor() as usize;
        if k == h {
            return Ok(self.partial[h]);
        }
        let t = l - k as f64;
        Ok((1.0 - t) * self.partial[k] + t * self.partial[k + 1])
    }

    pub fn norm_at(&self, l: f64) -> Result<f64> {
        self.norm_sqr_at(l).map(f64::sqrt)
    }
}

/// `||eta||_L` for the solution starting from `initial`.
pub fn solution_norm(
    seq: &VerblunskySequence,
    z: C64,
    initial: (C64, C64),
    l: f64,
) -> Result<f64> {
    if !(l >= 0.0) {
        return Err(CmvError::InvalidParameter(format!("norm scale {l} < 0")));
    }
    SolutionTrace::new(seq, z, initial, l.ceil() as usize)?.norm_at(l)
}

/// Two-sided power-law envelope of sampled norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub gamma_low: f64,
    pub gamma_high: f64,
    pub c_low: f64,
    pub c_high: f64,
    pub beta: f64,
}

/// Envelope exponents from samples `(L, ||eta||_L)`.
///
/// Slopes of `log norm` against `log L` are taken over every pair of samples
/// whose `log L` gap is at least half of the sampled log range; the extreme
/// slopes give `gamma_low` and `gamma_high`. The constants are then the
/// tightest values for which `c_low L^gamma_low <= norm <= c_high L^gamma_high`
/// on every sample.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 8 {
        return Err(CmvError::InsufficientData(format!(
            "power-law fit needs at least 8 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&(l, v)| !(l > 0.0 && v > 0.0)) {
        return Err(CmvError::InsufficientData(
            "samples must have positive scale and norm".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = samples.iter().map(|&(l, v)| (l.ln(), v.ln())).collect();
    let (lmin, lmax) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(x, _)| {
            (a.min(x), b.max(x))
        });
    let span = lmax - lmin;
    if span <= 0.0 {
        return Err(CmvError::InsufficientData("samples share one scale".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, p) in logs.iter().enumerate() {
        for q in &logs[i + 1..] {
            let dx = q.0 - p.0;
            if dx.abs() >= 0.5 * span {
                let s = (q.1 - p.1) / dx;
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
    }
    let c_low = samples
        .iter()
        .map(|&(l, v)| v / l.powf(lo))
        .fold(f64::INFINITY, f64::min);
    let c_high = samples
        .iter()
        .map(|&(l, v)| v / l.powf(hi))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        gamma_low: lo,
        gamma_high: hi,
        c_low,
        c_high,
        beta: 2.0 * lo / (lo + hi),
    })
}

/// Norms at geometrically spaced scales `l_min * ratio^k <= l_max`.
pub fn norm_samples(trace: &SolutionTrace, l_min: f64, l_max: f64, count: usize) -> Result<Vec<(f64, f64)>> {
    if count < 2 || !(l_min > 0.0 && l_max > l_min) {
        return Err(CmvError::InvalidParameter("bad sampling range".into()));
    }
    let ratio = (l_max / l_min).powf(1.0 / (count - 1) as f64);
    (0..count)
        .map(|k| {
            let l = (l_min * ratio.powi(k as i32)).min(l_max);
            trace.norm_at(l).map(|v| (l, v))
        })
        .collect()
}

/// CSV row for norm growth plots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormRecord {
    #[serde(rename = "L")]
    pub l: f64,
    pub norm: f64,
    pub log_l: f64,
    pub log_norm: f64,
}

impl NormRecord {
    pub fn new(l: f64, norm: f64) -> Self {
        Self {
            l,
            norm,
            log_l: l.ln(),
            log_norm: norm.ln(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_constant, make_fibonacci, Support};
    use crate::{c64, cis};
    use proptest::prelude::*;

    fn zero() -> VerblunskySequence {
        make_constant(c64(0.0, 0.0), Support::OneSided).unwrap()
    }

    #[test]
    fn one_step_examples() {
        let z = c64(0.3, 0.7);
        let m = one_step(&zero(), z, 0).unwrap();
        assert_eq!(m, Mat2::diag(z, c64(1.0, 0.0)));
        let seq = make_constant(c64(0.6, 0.0), Support::OneSided).unwrap();
        let m = one_step(&seq, c64(1.0, 0.0), 3).unwrap();
        let s = 1.0 / 0.8;
        let e = Mat2::new(c64(s, 0.0), c64(-0.6 * s, 0.0), c64(-0.6 * s, 0.0), c64(s, 0.0));
        assert!(m.rel_distance(&e) < 1e-15);
    }

    #[test]
    fn products_and_determinants() {
        assert_eq!(cocycle_product(&zero(), c64(0.5, 0.5), 0).unwrap(), Mat2::identity());
        for l in [1, 10, 1000] {
            let t = cocycle_product(&zero(), cis(0.4), l).unwrap();
            assert!((t.norm() - 1.0).abs() < 1e-12);
        }
        let seq = make_fibonacci(c64(0.5, 0.0), c64(-0.5, 0.0), Support::OneSided).unwrap();
        let z = cis(1.0);
        let t = cocycle_range(&seq, z, 0, 100).unwrap();
        assert!((t.det_ratio(z, 100) - 1.0).norm() < 1e-10);
        let full = t.to_mat().unwrap();
        assert!(full.det_defect() < 1e-8);
    }

    #[test]
    fn split_products_compose() {
        let seq = make_fibonacci(c64(0.3, 0.2), c64(-0.5, 0.1), Support::OneSided).unwrap();
        let z = cis(2.1);
        let whole = cocycle_range(&seq, z, 0, 300).unwrap().to_mat().unwrap();
        let first = cocycle_range(&seq, z, 0, 120).unwrap().to_mat().unwrap();
        let second = cocycle_range(&seq, z, 120, 180).unwrap().to_mat().unwrap();
        assert!(second.mul(&first).rel_distance(&whole) < 1e-10);
    }

    #[test]
    fn sl2_normalization() {
        let z = cis(std::f64::consts::FRAC_PI_2);
        let t = one_step(&zero(), z, 0).unwrap();
        let m = normalize_sl2(&t, z, 1).unwrap();
        let e = Mat2::diag(cis(std::f64::consts::FRAC_PI_4), cis(-std::f64::consts::FRAC_PI_4));
        assert!(m.rel_distance(&e) < 1e-15);
        // branch: arg taken in [0, 2pi)
        assert!((sqrt_branch(cis(-0.5)) - cis(std::f64::consts::PI - 0.25)).norm() < 1e-15);
    }

    #[test]
    fn free_solution_norm() {
        let one = c64(1.0, 0.0);
        let z = cis(0.9);
        assert!((solution_norm(&zero(), z, (one, one), 8.0).unwrap() - 3.0).abs() < 1e-14);
        let tr = SolutionTrace::new(&zero(), z, (one, one), 10).unwrap();
        let mid = tr.norm_sqr_at(8.5).unwrap();
        let expect = 0.5 * (tr.norm_sqr_at(8.0).unwrap() + tr.norm_sqr_at(9.0).unwrap());
        assert!((mid - expect).abs() < 1e-14);
        assert!(matches!(tr.norm_at(11.0), Err(CmvError::Horizon { .. })));
        assert!(matches!(
            solution_norm(&zero(), z, (one, c64(0.0, 0.0)), 3.0),
            Err(CmvError::Normalization(_))
        ));
    }

    #[test]
    fn power_law_fits() {
        let samples: Vec<(f64, f64)> = (4..=14)
            .map(|k| {
                let l = 2f64.powi(k);
                (l, (l + 1.0).sqrt())
            })
            .collect();
        let f = fit_power_law(&samples).unwrap();
        assert!((f.gamma_low - 0.5).abs() < 0.01 && (f.gamma_high - 0.5).abs() < 0.01);
        assert!((f.beta - 1.0).abs() < 0.02);

        let samples: Vec<(f64, f64)> = (0..40)
            .map(|k| {
                let l = 10f64 * 1.25f64.powi(k);
                (l, l.powf(0.3) * (2.0 + l.ln().sin()))
            })
            .collect();
        let f = fit_power_law(&samples).unwrap();
        assert!(f.gamma_low > 0.0 && f.gamma_low <= 0.3 && f.gamma_high >= 0.3, "{f:?}");
        for &(l, v) in &samples {
            assert!(f.c_low * l.powf(f.gamma_low) <= v * (1.0 + 1e-12));
            assert!(f.c_high * l.powf(f.gamma_high) >= v * (1.0 - 1e-12));
        }
        assert!(matches!(
            fit_power_law(&[(1.0, 1.0)]),
            Err(CmvError::InsufficientData(_))
        ));
    }

    proptest! {
        #[test]
        fn one_step_det_is_z(re in -0.7..0.7f64, im in -0.7..0.7f64, zr in -2.0..2.0f64, zi in -2.0..2.0f64) {
            let seq = make_constant(c64(re, im), Support::OneSided).unwrap();
            let z = c64(zr, zi);
            let m = one_step(&seq, z, 0).unwrap();
            prop_assert!((m.det_recomputed() - z).norm() < 1e-14 * (1.0 + z.norm()) / seq.rho(0).powi(2));
        }

        #[test]
        fn normalized_det_is_one(theta in 0.0..std::f64::consts::TAU, r in 0.2..3.0f64, l in 1u64..40) {
            let seq = make_fibonacci(c64(0.4, 0.1), c64(-0.2, 0.5), Support::OneSided).unwrap();
            let z = C64::from_polar(r, theta);
            let t = cocycle_product(&seq, z, l).unwrap();
            let m = normalize_sl2(&t, z, l as i64).unwrap();
            prop_assert!((m.det() - 1.0).norm() < 1e-10);
            prop_assert!(m.det_defect() < 1e-6 * m.max_abs().powi(2).max(1.0));
        }

        #[test]
        fn unimodular_normalization_keeps_norm(theta in 0.0..std::f64::consts::TAU, l in 1u64..60) {
            let seq = make_fibonacci(c64(0.5, 0.0), c64(-0.5, 0.0), Support::OneSided).unwrap();
            let z = cis(theta);
            let t = cocycle_product(&seq, z, l).unwrap();
            let m = normalize_sl2(&t, z, l as i64).unwrap();
            prop_assert!((m.norm() - t.norm()).abs() < 1e-10 * t.norm());
            prop_assert!(m.norm() >= 1.0 - 1e-12);
        }

        #[test]
        fn norms_nondecreasing(theta in 0.0..std::f64::consts::TAU, phase in 0.0..std::f64::consts::TAU) {
            let seq = make_fibonacci(c64(0.5, 0.0), c64(-0.5, 0.0), Support::OneSided).unwrap();
            let init = (c64(1.0, 0.0), cis(phase));
            let tr = SolutionTrace::new(&seq, cis(theta), init, 50).unwrap();
            let mut prev = 0.0;
            for k in 0..=100 {
                let v = tr.norm_at(k as f64 * 0.5).unwrap();
                prop_assert!(v >= prev);
                prev = v;
            }
        }
    }
}
