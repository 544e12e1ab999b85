//! Verblunsky coefficient sequences.
//!
//! A [`VerblunskySequence`] is an immutable map `n -> alpha(n)` into the open
//! unit disk, either on `n >= 0` or on all of the integers. Sturmian sequences
//! use `alpha(n) = v(n) a + (1 - v(n)) b` with `v(n) = floor((n+1) w) - floor(n w)`.
//! For the golden-mean frequency the floors are evaluated in exact integer
//! arithmetic.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CmvError, Result};

/// `(sqrt(5) - 1) / 2`, the golden-mean frequency.
pub const GOLDEN_FREQUENCY: f64 = 0.618_033_988_749_894_8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerblunskyCoefficient(Complex64);

impl VerblunskyCoefficient {
    pub fn new(value: Complex64) -> Result<Self> {
        let modulus = value.norm();
        if !(modulus < 1.0) {
            return Err(CmvError::Modulus {
                value: value.to_string(),
                modulus,
            });
        }
        Ok(Self(value))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    pub fn rho(self) -> f64 {
        rho_of(self.0)
    }
}

/// `sqrt(1 - |a|^2)`, factored to keep precision near the circle.
#[inline]
pub fn rho_of(a: Complex64) -> f64 {
    let m = a.norm();
    ((1.0 - m) * (1.0 + m)).max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    OneSided,
    TwoSided,
}

#[derive(Clone, Debug)]
enum Kind {
    Constant(Complex64),
    Sturmian {
        alpha: Complex64,
        beta: Complex64,
        omega: f64,
        golden: bool,
    },
    /// Stored values on `0..values.len()`, zero beyond.
    Explicit(Arc<Vec<Complex64>>),
    Composite {
        positive: Arc<VerblunskySequence>,
        negative: Arc<VerblunskySequence>,
    },
    /// `conj(inner(-2 - m))`: the left block of the split operator in one-sided form.
    LeftHalf(Arc<VerblunskySequence>),
    /// `lambda * inner(n)`, the Alexandrov rotation.
    Rotated {
        inner: Arc<VerblunskySequence>,
        lambda: Complex64,
    },
    /// `inner(n + shift)` on `n >= 0`.
    Shifted {
        inner: Arc<VerblunskySequence>,
        shift: i64,
    },
}

#[derive(Clone, Debug)]
pub struct VerblunskySequence {
    kind: Kind,
    support: Support,
}

fn check_disk(a: Complex64) -> Result<Complex64> {
    VerblunskyCoefficient::new(a).map(VerblunskyCoefficient::value)
}

pub fn make_constant(a: Complex64, support: Support) -> Result<VerblunskySequence> {
    Ok(VerblunskySequence {
        kind: Kind::Constant(check_disk(a)?),
        support,
    })
}

pub fn make_sturmian(
    alpha: Complex64,
    beta: Complex64,
    omega: f64,
    support: Support,
) -> Result<VerblunskySequence> {
    let alpha = check_disk(alpha)?;
    let beta = check_disk(beta)?;
    if !(omega > 0.0 && omega < 1.0) {
        return Err(CmvError::FrequencyRange(omega));
    }
    Ok(VerblunskySequence {
        kind: Kind::Sturmian {
            alpha,
            beta,
            omega,
            golden: (omega - GOLDEN_FREQUENCY).abs() < 1e-15,
        },
        support,
    })
}

/// Golden-mean Sturmian sequence; `v = 1` selects `alpha`.
pub fn make_fibonacci(
    alpha: Complex64,
    beta: Complex64,
    support: Support,
) -> Result<VerblunskySequence> {
    make_sturmian(alpha, beta, GOLDEN_FREQUENCY, support)
}

/// One-sided sequence from a stored list; indices past the list are zero.
pub fn make_explicit(values: Vec<Complex64>) -> Result<VerblunskySequence> {
    for &v in &values {
        check_disk(v)?;
    }
    Ok(VerblunskySequence {
        kind: Kind::Explicit(Arc::new(values)),
        support: Support::OneSided,
    })
}

/// Glue two one-sided sequences: `positive` on `n >= 0`, `negative(m)` placed at `n = -1 - m`.
pub fn extend_two_sided(
    positive: VerblunskySequence,
    negative: VerblunskySequence,
) -> Result<VerblunskySequence> {
    if positive.support != Support::OneSided || negative.support != Support::OneSided {
        return Err(CmvError::Support(
            "extend_two_sided expects two one-sided halves".into(),
        ));
    }
    Ok(VerblunskySequence {
        kind: Kind::Composite {
            positive: Arc::new(positive),
            negative: Arc::new(negative),
        },
        support: Support::TwoSided,
    })
}

/// Sturmian right half with a constant-zero left half.
pub fn fibonacci_suffix_model(alpha: Complex64, beta: Complex64) -> Result<VerblunskySequence> {
    extend_two_sided(
        make_fibonacci(alpha, beta, Support::OneSided)?,
        make_constant(Complex64::new(0.0, 0.0), Support::OneSided)?,
    )
}

/// `floor(n * w)` for the golden-mean `w`, exact for |n| up to ~4e9.
pub fn golden_floor(n: i64) -> i64 {
    if n == 0 {
        return 0;
    }
    let m = n.unsigned_abs();
    // floor(m (sqrt5 - 1) / 2) = floor((isqrt(5 m^2) - m) / 2) since sqrt(5 m^2) is irrational
    let s = (5 * (m as u128) * (m as u128)).isqrt() as i128;
    let f = (s - m as i128).div_euclid(2) as i64;
    if n > 0 {
        f
    } else {
        -f - 1
    }
}

/// Sturmian indicator `v(n) = floor((n+1) w) - floor(n w)`.
pub fn sturmian_indicator(omega: f64, n: i64) -> u8 {
    let d = ((n + 1) as f64 * omega).floor() - (n as f64 * omega).floor();
    d as u8
}

/// Golden-mean indicator computed exactly.
pub fn golden_indicator(n: i64) -> u8 {
    (golden_floor(n + 1) - golden_floor(n)) as u8
}

impl VerblunskySequence {
    pub fn support(&self) -> Support {
        self.support
    }

    pub fn is_two_sided(&self) -> bool {
        self.support == Support::TwoSided
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= 0 || self.is_two_sided()
    }

    /// Coefficient at `n`.
    ///
    /// Panics when `n < 0` on a one-sided sequence, like slice indexing.
    pub fn alpha(&self, n: i64) -> Complex64 {
        assert!(
            self.contains(n),
            "index {n} outside the support of a one-sided sequence"
        );
        self.raw(n)
    }

    pub fn try_alpha(&self, n: i64) -> Option<Complex64> {
        self.contains(n).then(|| self.raw(n))
    }

    pub fn rho(&self, n: i64) -> f64 {
        rho_of(self.alpha(n))
    }

    fn raw(&self, n: i64) -> Complex64 {
        match &self.kind {
            Kind::Constant(a) => *a,
            Kind::Sturmian {
                alpha,
                beta,
                omega,
                golden,
            } => {
                let v = if *golden {
                    golden_indicator(n)
                } else {
                    sturmian_indicator(*omega, n)
                };
                if v == 1 {
                    *alpha
                } else {
                    *beta
                }
            }
            Kind::Explicit(values) => usize::try_from(n)
                .ok()
                .and_then(|i| values.get(i).copied())
                .unwrap_or_default(),
            Kind::Composite { positive, negative } => {
                if n >= 0 {
                    positive.raw(n)
                } else {
                    negative.raw(-1 - n)
                }
            }
            Kind::LeftHalf(inner) => inner.raw(-2 - n).conj(),
            Kind::Rotated { inner, lambda } => inner.raw(n) * lambda,
            Kind::Shifted { inner, shift } => inner.raw(n + shift),
        }
    }

    /// Sturmian indicator `v(n)` when this is a Sturmian sequence.
    pub fn indicator(&self, n: i64) -> Option<u8> {
        match &self.kind {
            Kind::Sturmian { omega, golden, .. } => Some(if *golden {
                golden_indicator(n)
            } else {
                sturmian_indicator(*omega, n)
            }),
            _ => None,
        }
    }

    /// `alpha(0..len)` collected.
    pub fn prefix(&self, len: usize) -> Vec<Complex64> {
        (0..len as i64).map(|n| self.raw(n)).collect()
    }

    /// Alexandrov family member with coefficients `lambda * alpha(n)`.
    pub fn rotated(&self, lambda: Complex64) -> Result<VerblunskySequence> {
        if (lambda.norm() - 1.0).abs() > 1e-12 {
            return Err(CmvError::NotUnimodular(lambda.norm()));
        }
        Ok(VerblunskySequence {
            kind: Kind::Rotated {
                inner: Arc::new(self.clone()),
                lambda,
            },
            support: self.support,
        })
    }

    /// One-sided tail `n -> alpha(n + shift)`.
    pub fn shifted(&self, shift: i64) -> Result<VerblunskySequence> {
        if !self.contains(shift) {
            return Err(CmvError::Support(format!(
                "shift {shift} leaves the support"
            )));
        }
        Ok(VerblunskySequence {
            kind: Kind::Shifted {
                inner: Arc::new(self.clone()),
                shift,
            },
            support: Support::OneSided,
        })
    }

    pub(crate) fn left_half(&self) -> VerblunskySequence {
        VerblunskySequence {
            kind: Kind::LeftHalf(Arc::new(self.clone())),
            support: Support::OneSided,
        }
    }

    pub fn records(&self, range: std::ops::RangeInclusive<i64>) -> Vec<CoefficientRecord> {
        range
            .filter(|&n| self.contains(n))
            .map(|n| {
                let a = self.raw(n);
                CoefficientRecord {
                    n,
                    re_alpha: a.re,
                    im_alpha: a.im,
                    rho: rho_of(a),
                }
            })
            .collect()
    }
}

/// One CSV row of a coefficient dump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoefficientRecord {
    pub n: i64,
    pub re_alpha: f64,
    pub im_alpha: f64,
    pub rho: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_sequences() {
        let zero = make_constant(c(0.0, 0.0), Support::TwoSided).unwrap();
        for n in -5..5 {
            assert_eq!(zero.alpha(n), c(0.0, 0.0));
            assert_eq!(zero.rho(n), 1.0);
        }
        let s = make_constant(c(0.6, 0.0), Support::OneSided).unwrap();
        assert!((s.rho(7) - 0.8).abs() < 1e-15);
        assert!(make_constant(c(0.0, 0.99), Support::OneSided).is_ok());
        assert!(matches!(
            make_constant(c(0.0, 1.0), Support::OneSided),
            Err(CmvError::Modulus { .. })
        ));
    }

    #[test]
    #[should_panic]
    fn one_sided_rejects_negative_index() {
        let s = make_constant(c(0.1, 0.0), Support::OneSided).unwrap();
        s.alpha(-1);
    }

    #[test]
    fn golden_prefix() {
        let (a, b) = (c(0.5, 0.0), c(-0.5, 0.0));
        let s = make_fibonacci(a, b, Support::OneSided).unwrap();
        let expected = [b, a, b, a, a];
        for (n, e) in expected.iter().enumerate() {
            assert_eq!(s.alpha(n as i64), *e);
        }
    }

    #[test]
    fn golden_floor_matches_float_for_small_n() {
        for n in -2000i64..2000 {
            let f = (n as f64 * GOLDEN_FREQUENCY).floor() as i64;
            assert_eq!(golden_floor(n), f, "n = {n}");
        }
    }

    #[test]
    fn degenerate_alphabet_is_constant() {
        let a = c(0.3, -0.2);
        let s = make_sturmian(a, a, 0.3819, Support::TwoSided).unwrap();
        for n in -50..50 {
            assert_eq!(s.alpha(n), a);
        }
    }

    #[test]
    fn frequency_range() {
        let a = c(0.1, 0.0);
        assert_eq!(
            make_sturmian(a, a, 1.0, Support::OneSided).unwrap_err(),
            CmvError::FrequencyRange(1.0)
        );
        assert!(make_sturmian(a, a, 0.0, Support::OneSided).is_err());
    }

    #[test]
    fn two_sided_boundary_indexing() {
        let pos = make_constant(c(0.25, 0.0), Support::OneSided).unwrap();
        let neg = make_constant(c(-0.75, 0.0), Support::OneSided).unwrap();
        let s = extend_two_sided(pos.clone(), neg.clone()).unwrap();
        assert_eq!(s.alpha(-1), c(-0.75, 0.0));
        assert_eq!(s.alpha(0), c(0.25, 0.0));
        let two = make_constant(c(0.0, 0.0), Support::TwoSided).unwrap();
        assert!(matches!(
            extend_two_sided(two, neg),
            Err(CmvError::Support(_))
        ));
    }

    #[test]
    fn explicit_pads_with_zero() {
        let s = make_explicit(vec![c(0.1, 0.0), c(0.2, 0.0)]).unwrap();
        assert_eq!(s.alpha(1), c(0.2, 0.0));
        assert_eq!(s.alpha(5), c(0.0, 0.0));
        assert!(make_explicit(vec![c(1.5, 0.0)]).is_err());
    }

    #[test]
    fn rotation_and_shift() {
        let s = make_fibonacci(c(0.5, 0.0), c(-0.5, 0.0), Support::OneSided).unwrap();
        let r = s.rotated(Complex64::i()).unwrap();
        assert_eq!(r.alpha(1), c(0.0, 0.5));
        let t = s.shifted(1).unwrap();
        assert_eq!(t.alpha(0), s.alpha(1));
        assert!(s.rotated(c(2.0, 0.0)).is_err());
    }
}
