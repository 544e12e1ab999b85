//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes the Sturmian alphabet as four floats
//! `(re a, im a, re b, im b)` plus the rotation frequency `omega`.

use std::f64::consts::TAU;

use cmv_core::coeffs::{make_sturmian, Support, VerblunskySequence};
use cmv_core::operator::walk::evolve_walk;
use cmv_core::operator::SparseState;
use cmv_core::spectral::{full_circle_grid, lambda_r_profile_with, ExtendedEvaluator};
use cmv_core::tracemap::{cf_for_frequency, circle_sweep, default_k, spectrum_levels};
use cmv_core::C64;
use wasm_bindgen::prelude::*;

type Alphabet = (C64, C64);

fn alphabet(a_re: f64, a_im: f64, b_re: f64, b_im: f64) -> Alphabet {
    (C64::new(a_re, a_im), C64::new(b_re, b_im))
}

fn sequence(ab: Alphabet, omega: f64) -> Result<VerblunskySequence, String> {
    make_sturmian(ab.0, ab.1, omega, Support::TwoSided).map_err(|e| e.to_string())
}

/// Level-`level` approximant mask on `theta_count` equally spaced angles.
pub fn mask(ab: Alphabet, omega: f64, level: usize, theta_count: usize) -> Result<Vec<u8>, String> {
    if !(1..=30).contains(&level) || theta_count == 0 {
        return Err("level must lie in 1 ..= 30 and theta_count must be positive".into());
    }
    let cf = cf_for_frequency(omega, level).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..theta_count).map(|k| TAU * k as f64 / theta_count as f64).collect();
    let sweep = circle_sweep(ab, &cf, &grid).map_err(|e| e.to_string())?;
    let levels = spectrum_levels(ab, &cf, &grid, level, default_k(sweep.i_sup)).map_err(|e| e.to_string())?;
    Ok(levels[level - 1].iter().map(|&b| b as u8).collect())
}

/// Density of `dLambda_r` on `theta_count + 1` angles spanning `[0, 2 pi]`.
pub fn density(ab: Alphabet, omega: f64, r: f64, theta_count: usize) -> Result<Vec<f64>, String> {
    if theta_count == 0 {
        return Err("theta_count must be positive".into());
    }
    let ev = ExtendedEvaluator::new(&sequence(ab, omega)?).map_err(|e| e.to_string())?;
    let profile = lambda_r_profile_with(&ev, r, &full_circle_grid(theta_count)).map_err(|e| e.to_string())?;
    Ok(profile.density)
}

/// `|psi(n)|^2` for `n = -2 steps ..= 2 steps` after `steps` walk steps from `delta_0`.
pub fn walk(ab: Alphabet, omega: f64, steps: usize) -> Result<Vec<f64>, String> {
    if steps > 20_000 {
        return Err("at most 20000 steps".into());
    }
    let psi = evolve_walk(&sequence(ab, omega)?, &SparseState::delta(0), steps);
    let reach = 2 * steps as i64;
    Ok((-reach..=reach).map(|n| psi.get(n).norm_sqr()).collect())
}

#[wasm_bindgen]
pub fn spectrum_mask(
    a_re: f64,
    a_im: f64,
    b_re: f64,
    b_im: f64,
    omega: f64,
    level: usize,
    theta_count: usize,
) -> Result<Vec<u8>, JsError> {
    mask(alphabet(a_re, a_im, b_re, b_im), omega, level, theta_count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn measure_density(
    a_re: f64,
    a_im: f64,
    b_re: f64,
    b_im: f64,
    omega: f64,
    r: f64,
    theta_count: usize,
) -> Result<Vec<f64>, JsError> {
    density(alphabet(a_re, a_im, b_re, b_im), omega, r, theta_count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn walk_profile(
    a_re: f64,
    a_im: f64,
    b_re: f64,
    b_im: f64,
    omega: f64,
    steps: usize,
) -> Result<Vec<f64>, JsError> {
    walk(alphabet(a_re, a_im, b_re, b_im), omega, steps).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cmv_core::coeffs::GOLDEN_FREQUENCY;

    const AB: Alphabet = (C64::new(0.5, 0.0), C64::new(-0.5, 0.0));

    #[test]
    fn masks_shrink_with_level() {
        let coarse = mask(AB, GOLDEN_FREQUENCY, 3, 256).unwrap();
        let fine = mask(AB, GOLDEN_FREQUENCY, 8, 256).unwrap();
        assert_eq!(fine.len(), 256);
        assert!(fine.iter().zip(&coarse).all(|(&f, &c)| f <= c));
        assert!(fine.contains(&1));
        assert!(mask(AB, GOLDEN_FREQUENCY, 0, 256).is_err());
    }

    #[test]
    fn density_is_normalized() {
        let d = density(AB, GOLDEN_FREQUENCY, 0.7, 256).unwrap();
        let h = TAU / 256.0;
        let mass: f64 = d.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum();
        assert!((mass - 1.0).abs() < 1e-9, "{mass}");
        assert!(density(AB, GOLDEN_FREQUENCY, 1.0, 256).is_err());
    }

    #[test]
    fn walk_is_a_probability_vector() {
        let p = walk(AB, GOLDEN_FREQUENCY, 30).unwrap();
        assert_eq!(p.len(), 121);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
