//! Quantum-walk evolution `psi -> E^k psi`.

use serde::Serialize;

use super::{first_col, CoefTable, SparseState};
use crate::coeffs::{Support, VerblunskySequence};
use crate::C64;

/// Summary of one walk snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WalkSample {
    pub step: usize,
    pub norm: f64,
    pub radius: i64,
}

/// Returns `E^k psi0`.
pub fn evolve_walk(seq: &VerblunskySequence, psi0: &SparseState, k: usize) -> SparseState {
    let mut out = psi0.clone();
    evolve_with(seq, psi0, k, &mut |_, state| out = state.clone(), k);
    out
}

/// Evolves `psi0` for `k` steps and calls `visit(step, state)` every `every`
/// steps (and at step 0 and `k`).
pub fn evolve_with(
    seq: &VerblunskySequence,
    psi0: &SparseState,
    k: usize,
    visit: &mut dyn FnMut(usize, &SparseState),
    every: usize,
) {
    let every = every.max(1);
    visit(0, psi0);
    if k == 0 || psi0.amps.is_empty() {
        if k > 0 {
            visit(k, psi0);
        }
        return;
    }
    let reach = 2 * k as i64 + 2;
    let mut lo = psi0.start - reach;
    let hi = psi0.end() + reach;
    if seq.support() == Support::OneSided {
        lo = lo.max(0);
    }
    let table = CoefTable::from_seq(seq, lo - 2, hi + 1);
    let rows: Vec<[C64; 4]> = (lo..=hi).map(|i| table.row(i)).collect();
    let len = (hi - lo + 1) as usize;
    let mut cur = vec![C64::default(); len];
    let mut next = vec![C64::default(); len];
    let (mut s, mut e) = (i64::MAX, i64::MIN);
    for (j, v) in psi0.amps.iter().enumerate() {
        let n = psi0.start + j as i64;
        if n >= lo {
            cur[(n - lo) as usize] = *v;
            s = s.min(n);
            e = e.max(n);
        }
    }
    for step in 1..=k {
        let (ns, ne) = ((s - 2).max(lo), (e + 2).min(hi));
        for i in ns..=ne {
            let row = &rows[(i - lo) as usize];
            let c0 = first_col(i);
            let mut acc = C64::default();
            for (off, m) in row.iter().enumerate() {
                let j = c0 + off as i64;
                if j >= s && j <= e {
                    acc += m * cur[(j - lo) as usize];
                }
            }
            next[(i - lo) as usize] = acc;
        }
        for i in s..=e {
            if i < ns || i > ne {
                next[(i - lo) as usize] = C64::default();
            }
        }
        std::mem::swap(&mut cur, &mut next);
        s = ns;
        e = ne;
        if step % every == 0 || step == k {
            let state = SparseState {
                start: s,
                amps: cur[(s - lo) as usize..=(e - lo) as usize].to_vec(),
            };
            visit(step, &state);
        }
    }
}

/// Largest `|n|` with `|psi(n)|^2 > threshold`.
pub fn support_radius(psi: &SparseState, threshold: f64) -> i64 {
    psi.amps
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() > threshold)
        .map(|(j, _)| (psi.start + j as i64).abs())
        .max()
        .unwrap_or(0)
}

/// Norm and support radius at every `every` steps.
pub fn walk_profile(
    seq: &VerblunskySequence,
    psi0: &SparseState,
    k: usize,
    every: usize,
    threshold: f64,
) -> Vec<WalkSample> {
    let mut out = Vec::new();
    evolve_with(
        seq,
        psi0,
        k,
        &mut |step, state| {
            out.push(WalkSample {
                step,
                norm: state.norm(),
                radius: support_radius(state, threshold),
            })
        },
        every,
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_constant, make_fibonacci};
    use crate::operator::apply_extended;
    use crate::c64;

    #[test]
    fn zero_steps_is_identity() {
        let seq = make_constant(c64(0.3, 0.0), Support::TwoSided).unwrap();
        let psi = SparseState::from_pairs(&[(0, c64(0.6, 0.0)), (1, c64(0.0, 0.8))]);
        assert_eq!(evolve_walk(&seq, &psi, 0), psi);
    }

    #[test]
    fn free_walk_moves_odd_sites_right() {
        let seq = make_constant(c64(0.0, 0.0), Support::TwoSided).unwrap();
        let out = evolve_walk(&seq, &SparseState::delta(1), 1).trimmed();
        assert_eq!(out, SparseState::delta(3));
        let out = evolve_walk(&seq, &SparseState::delta(0), 5).trimmed();
        assert_eq!(out, SparseState::delta(-10));
    }

    #[test]
    fn agrees_with_repeated_application() {
        let seq = make_fibonacci(c64(0.5, 0.1), c64(-0.4, 0.3), Support::TwoSided).unwrap();
        let psi = SparseState::from_pairs(&[(-1, c64(0.6, 0.0)), (2, c64(0.0, 0.8))]);
        let mut direct = psi.clone();
        for _ in 0..7 {
            direct = apply_extended(&seq, &direct);
        }
        assert!(evolve_walk(&seq, &psi, 7).distance(&direct) < 1e-14);
    }

    #[test]
    fn one_sided_walk_stays_on_half_line() {
        let seq = make_fibonacci(c64(0.5, 0.0), c64(-0.5, 0.0), Support::OneSided).unwrap();
        let out = evolve_walk(&seq, &SparseState::delta(0), 40);
        assert!(out.start >= 0);
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }
}
