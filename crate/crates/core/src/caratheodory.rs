//! Carathéodory functions and the quantities built from them: the Schur
//! algorithm, the left-half function `M_-`, Alexandrov solutions, the scale
//! `x(r)` and the Möbius supremum.

use serde::Serialize;

use crate::coeffs::VerblunskySequence;
use crate::error::{CmvError, Result};
use crate::operator::finite_spectral_measure;
use crate::transfer::SolutionTrace;
use crate::C64;

/// A value of a Carathéodory (`Re > 0`) or anti-Carathéodory (`Re < 0`) function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CaratheodoryValue(pub C64);

impl CaratheodoryValue {
    pub fn value(self) -> C64 {
        self.0
    }

    pub fn is_caratheodory(self) -> bool {
        self.0.re > 0.0
    }

    pub fn is_anti(self) -> bool {
        self.0.re < 0.0
    }
}

impl From<CaratheodoryValue> for C64 {
    fn from(v: CaratheodoryValue) -> C64 {
        v.0
    }
}

fn check_disk(z: C64) -> Result<()> {
    if !(z.norm() < 1.0) {
        return Err(CmvError::Disk(z.to_string()));
    }
    Ok(())
}

/// Schur function `f` at `z` from `alpha(0..depth)` with a zero tail.
fn schur_f(alpha: impl DoubleEndedIterator<Item = C64>, z: C64) -> C64 {
    alpha.rev().fold(C64::default(), |f, a| {
        let zf = z * f;
        (a + zf) / (1.0 + a.conj() * zf)
    })
}

fn f_to_caratheodory(f: C64, z: C64) -> C64 {
    let zf = z * f;
    (1.0 + zf) / (1.0 - zf)
}

/// `F(z)` from the Schur continued fraction of fixed depth.
pub fn schur_eval_f(seq: &VerblunskySequence, z: C64, depth: usize) -> Result<CaratheodoryValue> {
    check_disk(z)?;
    if depth == 0 {
        return Err(CmvError::Depth(depth));
    }
    let f = schur_f((0..depth as i64).map(|n| seq.alpha(n)), z);
    Ok(CaratheodoryValue(f_to_caratheodory(f, z)))
}

/// Adaptive Schur evaluation with a cached coefficient prefix.
///
/// The depth starts at the point where `|z|^depth` drops below the tolerance
/// and doubles until two successive depths agree. Outside the closed disk the
/// reflection `F(z) = -conj(F(1 / conj z))` is used.
#[derive(Clone, Debug)]
pub struct SchurEvaluator {
    seq: VerblunskySequence,
    cache: Vec<C64>,
    tol: f64,
    max_depth: usize,
}

impl SchurEvaluator {
    pub const DEFAULT_TOL: f64 = 1e-12;

    pub fn new(seq: &VerblunskySequence) -> Self {
        Self::with_cache(seq, 1 << 15)
    }

    pub fn with_cache(seq: &VerblunskySequence, cache_len: usize) -> Self {
        Self {
            seq: seq.clone(),
            cache: seq.prefix(cache_len),
            tol: Self::DEFAULT_TOL,
            max_depth: 1 << 24,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn sequence(&self) -> &VerblunskySequence {
        &self.seq
    }

    fn at_depth(&self, z: C64, depth: usize) -> C64 {
        let cached = depth.min(self.cache.len());
        let mut f = C64::default();
        for n in (cached..depth).rev() {
            let a = self.seq.alpha(n as i64);
            let zf = z * f;
            f = (a + zf) / (1.0 + a.conj() * zf);
        }
        for a in self.cache[..cached].iter().rev() {
            let zf = z * f;
            f = (a + zf) / (1.0 + a.conj() * zf);
        }
        f_to_caratheodory(f, z)
    }

    /// `F(z)` for `|z| < 1`, together with the depth used.
    pub fn eval_inside(&self, z: C64) -> Result<(C64, usize)> {
        check_disk(z)?;
        let r = z.norm();
        let mut depth = if r < 1e-3 {
            8
        } else {
            ((self.tol.ln() / r.ln()).ceil() as usize).clamp(8, self.max_depth)
        };
        let mut prev = self.at_depth(z, depth);
        loop {
            let next_depth = depth * 2;
            if next_depth > self.max_depth {
                return Err(CmvError::Depth(next_depth));
            }
            let next = self.at_depth(z, next_depth);
            if (next - prev).norm() <= self.tol * next.norm().max(1.0) {
                return Ok((next, next_depth));
            }
            prev = next;
            depth = next_depth;
        }
    }

    /// `F(z)` off the unit circle.
    pub fn eval(&self, z: C64) -> Result<CaratheodoryValue> {
        let r = z.norm();
        if r < 1.0 {
            return Ok(CaratheodoryValue(self.eval_inside(z)?.0));
        }
        if r > 1.0 {
            let w = 1.0 / z.conj();
            return Ok(CaratheodoryValue(-self.eval_inside(w)?.0.conj()));
        }
        Err(CmvError::Disk(format!("{z} lies on the unit circle")))
    }
}

/// `F(z)` from the spectral measure of the `N x N` truncation closed by `eta_b`.
pub fn measure_oracle_f(
    seq: &VerblunskySequence,
    z: C64,
    n: usize,
    eta_b: C64,
) -> Result<CaratheodoryValue> {
    check_disk(z)?;
    let mu = finite_spectral_measure(seq, n, eta_b)?;
    Ok(CaratheodoryValue(mu.caratheodory(z)))
}

/// `M_- = [Re(1 - a) - i Im(1 + a) F] / [i Im(1 - a) - Re(1 + a) F]` with
/// `a = conj(alpha0)`.
pub fn m_minus(f_minus: CaratheodoryValue, alpha0: C64) -> Result<CaratheodoryValue> {
    let a = alpha0.conj();
    let f = f_minus.0;
    let i = C64::i();
    let num = (1.0 - a).re - i * (1.0 + a).im * f;
    let den = i * (1.0 - a).im - (1.0 + a).re * f;
    if den.norm() <= 1e-14 * (1.0 + num.norm()) {
        return Err(CmvError::Pole(format!(
            "denominator vanishes for F = {f}, alpha0 = {alpha0}"
        )));
    }
    Ok(CaratheodoryValue(num / den))
}

/// Initial pairs of the Alexandrov solutions `phi^lambda` and `psi^lambda`.
pub fn alexandrov_initials(lambda: C64) -> ((C64, C64), (C64, C64)) {
    let one = C64::new(1.0, 0.0);
    ((one, lambda.conj()), (one, -lambda.conj()))
}

fn check_lambda(lambda: C64) -> Result<()> {
    if (lambda.norm() - 1.0).abs() > 1e-12 {
        return Err(CmvError::NotUnimodular(lambda.norm()));
    }
    Ok(())
}

/// Solution traces of `phi^lambda` and `psi^lambda` up to `horizon`.
pub fn alexandrov_traces(
    seq: &VerblunskySequence,
    lambda: C64,
    z: C64,
    horizon: usize,
) -> Result<(SolutionTrace, SolutionTrace)> {
    check_lambda(lambda)?;
    let (p, q) = alexandrov_initials(lambda);
    Ok((
        SolutionTrace::new(seq, z, p, horizon)?,
        SolutionTrace::new(seq, z, q, horizon)?,
    ))
}

/// `(||phi^lambda||_L, ||psi^lambda||_L)`.
pub fn alexandrov_norms(
    seq: &VerblunskySequence,
    lambda: C64,
    z: C64,
    l: f64,
) -> Result<(f64, f64)> {
    if !(l >= 0.0) {
        return Err(CmvError::InvalidParameter(format!("norm scale {l} < 0")));
    }
    let (p, q) = alexandrov_traces(seq, lambda, z, l.ceil() as usize)?;
    Ok((p.norm_at(l)?, q.norm_at(l)?))
}

/// Solution of `(1 - r) ||phi||_x ||psi||_x = sqrt 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XOfR {
    pub x: f64,
    pub phi_norm: f64,
    pub psi_norm: f64,
    /// Set when the product already exceeds `sqrt 2` at `x = 0`.
    pub clamped: bool,
    pub residual: f64,
}

/// `x(r)` from precomputed traces; errors with the horizon if it is too short.
pub fn x_of_r_from_traces(phi: &SolutionTrace, psi: &SolutionTrace, r: f64) -> Result<XOfR> {
    if !(r > 0.0 && r < 1.0) {
        return Err(CmvError::InvalidParameter(format!("r = {r} not in (0, 1)")));
    }
    let target = std::f64::consts::SQRT_2;
    let product = |x: f64| -> Result<f64> { Ok((1.0 - r) * phi.norm_at(x)? * psi.norm_at(x)?) };
    let p0 = product(0.0)?;
    if p0 >= target {
        return Ok(XOfR {
            x: 0.0,
            phi_norm: phi.norm_at(0.0)?,
            psi_norm: psi.norm_at(0.0)?,
            clamped: true,
            residual: p0 - target,
        });
    }
    let horizon = phi.horizon().min(psi.horizon());
    let (ps, qs) = (phi.partial_sums(), psi.partial_sums());
    let scale2 = (1.0 - r) * (1.0 - r);
    let k = (1..=horizon)
        .find(|&k| scale2 * ps[k] * qs[k] >= 2.0)
        .ok_or(CmvError::Horizon { horizon })?;
    let (mut a, mut b) = ((k - 1) as f64, k as f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if product(m)? < target {
            a = m;
        } else {
            b = m;
        }
    }
    let x = 0.5 * (a + b);
    Ok(XOfR {
        x,
        phi_norm: phi.norm_at(x)?,
        psi_norm: psi.norm_at(x)?,
        clamped: false,
        residual: product(x)? - target,
    })
}

/// `x(r)` with a fixed solution horizon.
pub fn solve_x_of_r_with_horizon(
    seq: &VerblunskySequence,
    lambda: C64,
    z: C64,
    r: f64,
    horizon: usize,
) -> Result<XOfR> {
    let (p, q) = alexandrov_traces(seq, lambda, z, horizon)?;
    x_of_r_from_traces(&p, &q, r)
}

/// `x(r)`, doubling the horizon until the root is bracketed.
pub fn solve_x_of_r(seq: &VerblunskySequence, lambda: C64, z: C64, r: f64) -> Result<XOfR> {
    if !(r > 0.0 && r < 1.0) {
        return Err(CmvError::InvalidParameter(format!("r = {r} not in (0, 1)")));
    }
    let mut horizon = ((4.0 / (1.0 - r)) as usize).max(64);
    loop {
        match solve_x_of_r_with_horizon(seq, lambda, z, r, horizon) {
            Err(CmvError::Horizon { .. }) if horizon < 1 << 24 => horizon *= 4,
            other => return other,
        }
    }
}

/// `|F^lambda(r z)| ||phi^lambda||_{x(r)} / ||psi^lambda||_{x(r)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JlRatio {
    pub ratio: f64,
    pub f_lambda: C64,
    pub x: XOfR,
}

pub fn jl_ratio(seq: &VerblunskySequence, lambda: C64, z: C64, r: f64) -> Result<JlRatio> {
    check_lambda(lambda)?;
    let x = solve_x_of_r(seq, lambda, z, r)?;
    let f = SchurEvaluator::new(&seq.rotated(lambda)?).eval(z * r)?.0;
    Ok(JlRatio {
        ratio: f.norm() * x.phi_norm / x.psi_norm,
        f_lambda: f,
        x,
    })
}

/// `sup_{|lambda| = 1} |((1 - lambda) + (1 + lambda) F) / ((1 + lambda) + (1 - lambda) F)|`
/// in closed form.
pub fn mobius_sup(f: CaratheodoryValue) -> f64 {
    let (p, m) = ((1.0 + f.0).norm(), (1.0 - f.0).norm());
    (p + m) / (p - m)
}

fn mobius_at(f: C64, t: f64) -> f64 {
    let l = crate::cis(t);
    (((1.0 - l) + (1.0 + l) * f) / ((1.0 + l) + (1.0 - l) * f)).norm()
}

/// The same supremum located on `n` equally spaced `lambda`, then refined by
/// golden-section search inside the neighbouring grid cells.
pub fn mobius_grid_max(f: CaratheodoryValue, n: usize) -> f64 {
    let h = std::f64::consts::TAU / n as f64;
    let (best, _) = (0..n)
        .map(|k| (k, mobius_at(f.0, k as f64 * h)))
        .fold((0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    let (mut a, mut b) = ((best as f64 - 1.0) * h, (best as f64 + 1.0) * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (mobius_at(f.0, c), mobius_at(f.0, d));
    for _ in 0..200 {
        if b - a < 1e-15 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = mobius_at(f.0, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = mobius_at(f.0, d);
        }
    }
    fc.max(fd).max(mobius_at(f.0, best as f64 * h))
}

/// CSV row of a boundary sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryRecord {
    pub r: f64,
    pub theta: f64,
    pub re_f: f64,
    pub im_f: f64,
    pub x_of_r: f64,
    pub jl_ratio: f64,
    pub mobius_sup: f64,
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
    fn free_and_origin_values() {
        for z in [c64(0.3, 0.4), c64(-0.9, 0.0), c64(0.0, 0.99)] {
            assert_eq!(schur_eval_f(&zero(), z, 20).unwrap().0, c64(1.0, 0.0));
        }
        let seq = make_fibonacci(c64(0.5, 0.3), c64(-0.2, 0.6), Support::OneSided).unwrap();
        assert_eq!(schur_eval_f(&seq, c64(0.0, 0.0), 50).unwrap().0, c64(1.0, 0.0));
        assert!(matches!(schur_eval_f(&seq, c64(1.0, 0.0), 5), Err(CmvError::Disk(_))));
        assert!(matches!(schur_eval_f(&seq, c64(0.1, 0.0), 0), Err(CmvError::Depth(0))));
    }

    #[test]
    fn constant_coefficients_fixed_point() {
        // For constant a the Schur function solves f = (a + z f) / (1 + conj(a) z f),
        // i.e. conj(a) z f^2 + (1 - z) f - a = 0; take the root with |f| < 1.
        let a = c64(0.5, 0.0);
        let z = c64(0.4, 0.0);
        let qa = a.conj() * z;
        let qb = 1.0 - z;
        let disc = (qb * qb + 4.0 * qa * a).sqrt();
        let roots = [(-qb + disc) / (2.0 * qa), (-qb - disc) / (2.0 * qa)];
        let f = *roots.iter().find(|r| r.norm() < 1.0).unwrap();
        let expect = (1.0 + z * f) / (1.0 - z * f);
        let seq = make_constant(a, Support::OneSided).unwrap();
        let got = SchurEvaluator::new(&seq).eval(z).unwrap().0;
        assert!((got - expect).norm() < 1e-10);
    }

    #[test]
    fn reflection_outside_disk() {
        let seq = make_fibonacci(c64(0.5, 0.0), c64(-0.5, 0.0), Support::OneSided).unwrap();
        let ev = SchurEvaluator::new(&seq);
        let z = 1.1 * cis(0.7);
        let inside = ev.eval(1.0 / z.conj()).unwrap().0;
        assert!((ev.eval(z).unwrap().0 + inside.conj()).norm() < 1e-14);
        assert!(ev.eval(cis(0.2)).is_err());
    }

    #[test]
    fn oracle_matches_schur_for_constant_model() {
        let seq = make_constant(c64(0.5, 0.0), Support::OneSided).unwrap();
        let ev = SchurEvaluator::new(&seq);
        for z in [c64(0.3, 0.2), 0.9 * cis(2.0)] {
            let a = measure_oracle_f(&seq, z, 400, c64(1.0, 0.0)).unwrap().0;
            let b = ev.eval(z).unwrap().0;
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn m_minus_examples() {
        let m = m_minus(CaratheodoryValue(c64(1.0, 0.0)), c64(0.0, 0.0)).unwrap();
        assert_eq!(m.0, c64(-1.0, 0.0));
        let m = m_minus(CaratheodoryValue(c64(2.0, 0.0)), c64(0.0, 0.0)).unwrap();
        assert_eq!(m.0, c64(-0.5, 0.0));
    }

    #[test]
    fn mobius_examples() {
        assert!((mobius_sup(CaratheodoryValue(c64(1.0, 0.0))) - 1.0).abs() < 1e-15);
        assert!((mobius_sup(CaratheodoryValue(c64(2.0, 0.0))) - 2.0).abs() < 1e-15);
        let f = CaratheodoryValue(c64(1.0, 1.0));
        assert!((mobius_sup(f) - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((mobius_grid_max(f, 4096) - mobius_sup(f)).abs() < 1e-6);
    }

    #[test]
    fn free_alexandrov_and_x_of_r() {
        let z = cis(1.3);
        for lambda in [c64(1.0, 0.0), cis(2.0)] {
            let (p, q) = alexandrov_norms(&zero(), lambda, z, 15.0).unwrap();
            assert!((p - 4.0).abs() < 1e-13 && (q - 4.0).abs() < 1e-13);
        }
        for r in [0.9, 0.99] {
            let x = solve_x_of_r(&zero(), c64(1.0, 0.0), z, r).unwrap();
            assert!((x.x - (2f64.sqrt() / (1.0 - r) - 1.0)).abs() < 1e-9);
            assert!(x.residual.abs() < 1e-10);
        }
        let jl = jl_ratio(&zero(), c64(1.0, 0.0), z, 0.9).unwrap();
        assert!((jl.ratio - 1.0).abs() < 1e-12);
        let small = solve_x_of_r_with_horizon(&zero(), c64(1.0, 0.0), z, 0.99, 20);
        assert!(matches!(small, Err(CmvError::Horizon { horizon: 20 })));
    }

    #[test]
    fn lambda_sign_swaps_families() {
        let seq = make_fibonacci(c64(0.5, 0.0), c64(-0.5, 0.0), Support::OneSided).unwrap();
        let z = cis(0.8);
        let (p1, q1) = alexandrov_norms(&seq, c64(1.0, 0.0), z, 30.5).unwrap();
        let (p2, q2) = alexandrov_norms(&seq, c64(-1.0, 0.0), z, 30.5).unwrap();
        assert_eq!(p1, q2);
        assert_eq!(q1, p2);
    }

    proptest! {
        #[test]
        fn schur_values_are_caratheodory(seed in 0u64..1000, r in 0.0..0.999f64, t in 0.0..std::f64::consts::TAU) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<C64> = (0..200)
                .map(|_| C64::from_polar(0.95 * rng.random::<f64>(), rng.random_range(0.0..6.3)))
                .collect();
            let seq = crate::coeffs::make_explicit(vals).unwrap();
            let f = schur_eval_f(&seq, C64::from_polar(r, t), 200).unwrap();
            prop_assert!(f.is_caratheodory());
        }

        #[test]
        fn m_minus_is_anti(fr in 1e-3..50.0f64, fi in -50.0..50.0f64, ar in 0.0..0.999f64, at in 0.0..std::f64::consts::TAU) {
            let m = m_minus(CaratheodoryValue(c64(fr, fi)), C64::from_polar(ar, at)).unwrap();
            prop_assert!(m.is_anti());
        }

        #[test]
        fn mobius_closed_form_matches_grid(fr in 1e-2..20.0f64, fi in -20.0..20.0f64) {
            let f = CaratheodoryValue(c64(fr, fi));
            let exact = mobius_sup(f);
            let grid = mobius_grid_max(f, 4096);
            prop_assert!((grid - exact).abs() <= 1e-10 * exact);
        }
    }
}
