//! Spectral measure of `delta_0` for a finite CMV matrix.
//!
//! Eigenvalues of the closed `N x N` matrix are the zeros of the
//! paraorthogonal polynomial `z Phi_{N-1} - conj(eta) Phi*_{N-1}`. On the circle
//! the Blaschke ratio `z Phi_n / Phi*_n = e^{i phi_n}` has a phase that is
//! strictly increasing in `theta` and gains `2 pi N` over one turn, so every
//! eigenvalue is bracketed and refined independently. Weights are `|v_0|^2` for
//! unit eigenvectors from inverse iteration. The Christoffel numbers
//! `1 / sum_k |phi_k(z_j)|^2` agree in the bulk but are ill-conditioned for
//! eigenvalues in gaps, where forward recursion picks up the growing solution.

use serde::Serialize;

use super::FiniteCmv;
use crate::banded::{BandLu, PivotPolicy};
use crate::coeffs::{rho_of, VerblunskySequence};
use crate::error::{CmvError, Result};
use crate::{cis, C64};

use std::f64::consts::TAU;

/// Finite atomic measure on the unit circle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointMeasure {
    pub angles: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PointMeasure {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_j w_j (e^{i t_j} + z) / (e^{i t_j} - z)`.
    pub fn caratheodory(&self, z: C64) -> C64 {
        self.angles
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| {
                let e = cis(t);
                w * (e + z) / (e - z)
            })
            .sum()
    }

    /// `sum_j w_j e^{i m t_j}`, i.e. `<delta_0, C^m delta_0>` for the matrix.
    pub fn moment(&self, m: i64) -> C64 {
        self.angles
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * cis(m as f64 * t))
            .sum()
    }

    /// Mass of the closed arc `[center - eps, center + eps]`.
    pub fn arc_mass(&self, center: f64, eps: f64) -> f64 {
        if eps >= std::f64::consts::PI {
            return self.total();
        }
        self.angles
            .iter()
            .zip(&self.weights)
            .filter(|(&t, _)| {
                let d = (t - center).rem_euclid(TAU);
                d.min(TAU - d) <= eps
            })
            .map(|(_, &w)| w)
            .sum()
    }
}

struct Phase<'a> {
    alpha: &'a [C64],
}

impl Phase<'_> {
    fn eval(&self, theta: f64) -> f64 {
        let mut phi = theta;
        for a in self.alpha {
            let w = 1.0 - a * cis(phi);
            phi = theta + phi - 2.0 * w.arg();
        }
        phi
    }
}

/// Eigenvalue angles in `[0, 2 pi)` of the matrix built from `alpha(0..N-1)` and `eta_b`.
pub fn eigenangles(alpha: &[C64], eta_b: C64) -> Vec<f64> {
    let n = alpha.len() + 1;
    let phase = Phase { alpha };
    let grid = 4 * n;
    let h = TAU / grid as f64;
    let values: Vec<f64> = (0..=grid).map(|g| phase.eval(g as f64 * h)).collect();
    let base = values[0];
    let offset = -eta_b.arg();
    // smallest target >= base
    let k0 = ((base - offset) / TAU).ceil();
    let mut roots = Vec::with_capacity(n);
    let mut cell = 0usize;
    for k in 0..n {
        let target = offset + TAU * (k0 + k as f64);
        if target >= base + TAU * n as f64 {
            break;
        }
        while cell + 1 < grid && values[cell + 1] < target {
            cell += 1;
        }
        let (mut a, mut b) = (cell as f64 * h, (cell + 1) as f64 * h);
        let (mut fa, mut fb) = (values[cell] - target, values[cell + 1] - target);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        let mut side = 0i8;
        for _ in 0..200 {
            if b - a <= 4.0 * f64::EPSILON * b.max(1.0) {
                break;
            }
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            let fc = phase.eval(c) - target;
            if fc == 0.0 {
                a = c;
                b = c;
                break;
            }
            if fc < 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

/// Christoffel weight `1 / sum_{k<N} |phi_k(z)|^2` at `z` on the circle.
pub fn christoffel_weight(alpha: &[C64], z: C64) -> f64 {
    let mut phi = C64::new(1.0, 0.0);
    let mut phi_star = C64::new(1.0, 0.0);
    let mut sum = 1.0;
    for &a in alpha {
        let r = rho_of(a);
        let next = (z * phi - a.conj() * phi_star) / r;
        phi_star = (phi_star - a * z * phi) / r;
        phi = next;
        sum += phi.norm_sqr();
    }
    1.0 / sum
}

/// Eigenvalues closer than this are orthogonalized against each other.
const CLUSTER_GAP: f64 = 1e-9;

/// Spectral measure of `delta_0` for the `N x N` matrix closed by `eta_b`.
pub fn finite_spectral_measure(
    seq: &VerblunskySequence,
    n: usize,
    eta_b: C64,
) -> Result<PointMeasure> {
    if n < 2 {
        return Err(CmvError::Size(format!("finite CMV needs N >= 2, got {n}")));
    }
    super::check_unimodular(eta_b)?;
    let alpha = seq.shifted(0)?.prefix(n - 1);
    let angles = eigenangles(&alpha, eta_b);
    if angles.len() != n {
        return Err(CmvError::Eigen(format!(
            "found {} eigenvalues, expected {n}",
            angles.len()
        )));
    }
    let cmv = super::build_finite_cmv(seq, n, eta_b)?;
    let mut weights = Vec::with_capacity(n);
    let mut cluster: Vec<Vec<C64>> = Vec::new();
    for (j, &t) in angles.iter().enumerate() {
        let mut v = eigenvector(&cmv, t, 2)?;
        if j > 0 && t - angles[j - 1] < CLUSTER_GAP {
            for u in &cluster {
                let dot: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
            }
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        } else {
            cluster.clear();
        }
        weights.push(v[0].norm_sqr());
        cluster.push(v);
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(CmvError::Eigen(format!("weights sum to {total}")));
    }
    Ok(PointMeasure { angles, weights })
}

/// Eigenvector for the eigenvalue `e^{i theta}` by inverse iteration.
pub fn eigenvector(cmv: &FiniteCmv, theta: f64, rounds: usize) -> Result<Vec<C64>> {
    let mut band = cmv.to_band();
    let lambda = cis(theta);
    for k in 0..band.dim() {
        band.add(k, k, -lambda);
    }
    let lu = BandLu::factor(&band, PivotPolicy::Perturb)?;
    let n = band.dim();
    let mut v: Vec<C64> = (0..n)
        .map(|k| C64::new(1.0, 0.3 * (k as f64).sin()))
        .collect();
    for _ in 0..rounds.max(1) {
        lu.solve_in_place(&mut v);
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(CmvError::Eigen("inverse iteration broke down".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(v)
}

/// `max |C v - e^{i theta} v|` for a unit vector `v`.
pub fn eigen_residual(cmv: &FiniteCmv, theta: f64, v: &[C64]) -> f64 {
    let lambda = cis(theta);
    cmv.matvec(v)
        .iter()
        .zip(v)
        .map(|(cv, x)| (cv - lambda * x).norm())
        .fold(0.0, f64::max)
}
