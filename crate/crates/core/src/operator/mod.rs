//! Five-diagonal CMV operators.
//!
//! Both the one-sided matrix and the extended (two-sided) matrix share one
//! entry rule, indexed from 0 with parity taken literally:
//!
//! * even row `i`, columns `i-1 ..= i+2`:
//!   `[conj(a_i) r_{i-1}, -conj(a_i) a_{i-1}, conj(a_{i+1}) r_i, r_{i+1} r_i]`
//! * odd row `i`, columns `i-2 ..= i+1`:
//!   `[r_{i-1} r_{i-2}, -r_{i-1} a_{i-2}, -conj(a_i) a_{i-1}, -r_i a_{i-1}]`
//!
//! The one-sided matrix is the special case `a_{-1} = -1`, `r_{-1} = 0`. Setting
//! any coefficient to a unimodular value (so `r = 0`) cuts the operator into two
//! decoupled unitary blocks; finite matrices and windows are closed this way.

pub mod eigen;
pub mod walk;

use serde::Serialize;

use crate::banded::{BandLu, BandMatrix, PivotPolicy};
use crate::coeffs::{rho_of, Support, VerblunskySequence};
use crate::error::{CmvError, Result};
use crate::C64;

pub use eigen::{finite_spectral_measure, PointMeasure};
pub use walk::{evolve_walk, support_radius};

/// First column touched by row `i`.
#[inline]
pub fn first_col(i: i64) -> i64 {
    if i.rem_euclid(2) == 0 {
        i - 1
    } else {
        i - 2
    }
}

/// Coefficients `(alpha, rho)` on a contiguous index range, with optional
/// unimodular overrides used to close windows.
#[derive(Clone, Debug)]
pub struct CoefTable {
    lo: i64,
    alpha: Vec<C64>,
    rho: Vec<f64>,
}

impl CoefTable {
    /// Tabulates `lo ..= hi`. For a one-sided sequence, index -1 is the fixed
    /// boundary `-1` and lower indices are never read by valid rows.
    pub fn from_seq(seq: &VerblunskySequence, lo: i64, hi: i64) -> Self {
        let len = (hi - lo + 1).max(0) as usize;
        let mut alpha = Vec::with_capacity(len);
        let mut rho = Vec::with_capacity(len);
        for n in lo..=hi {
            let (a, r) = match seq.try_alpha(n) {
                Some(a) => (a, rho_of(a)),
                None if n == -1 => (C64::new(-1.0, 0.0), 0.0),
                None => (C64::default(), 1.0),
            };
            alpha.push(a);
            rho.push(r);
        }
        Self { lo, alpha, rho }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.alpha.len() as i64 - 1
    }

    #[inline]
    pub fn alpha(&self, n: i64) -> C64 {
        self.alpha[(n - self.lo) as usize]
    }

    #[inline]
    pub fn rho(&self, n: i64) -> f64 {
        self.rho[(n - self.lo) as usize]
    }

    /// Replaces `alpha(n)` by a unimodular value, so `rho(n) = 0` exactly.
    pub fn close_at(&mut self, n: i64, eta: C64) -> Result<()> {
        check_unimodular(eta)?;
        let k = (n - self.lo) as usize;
        self.alpha[k] = eta;
        self.rho[k] = 0.0;
        Ok(())
    }

    /// The four nonzero candidates of row `i`, starting at [`first_col`].
    pub fn row(&self, i: i64) -> [C64; 4] {
        let a = |n| self.alpha(n);
        let r = |n| C64::new(self.rho(n), 0.0);
        if i.rem_euclid(2) == 0 {
            [
                a(i).conj() * r(i - 1),
                -a(i).conj() * a(i - 1),
                a(i + 1).conj() * r(i),
                r(i + 1) * r(i),
            ]
        } else {
            [
                r(i - 1) * r(i - 2),
                -r(i - 1) * a(i - 2),
                -a(i).conj() * a(i - 1),
                -r(i) * a(i - 1),
            ]
        }
    }

    /// Entry `(i, j)` of the operator generated by this table.
    pub fn entry(&self, i: i64, j: i64) -> C64 {
        let off = j - first_col(i);
        if (0..4).contains(&off) {
            self.row(i)[off as usize]
        } else {
            C64::default()
        }
    }
}

pub(crate) fn check_unimodular(eta: C64) -> Result<()> {
    if (eta.norm() - 1.0).abs() > 1e-12 {
        return Err(CmvError::NotUnimodular(eta.norm()));
    }
    Ok(())
}

/// Rows `lo ..= hi` of a CMV-type operator, stored four entries per row.
#[derive(Clone, Debug)]
pub struct Pentadiagonal {
    lo: i64,
    hi: i64,
    rows: Vec<[C64; 4]>,
}

impl Pentadiagonal {
    /// Needs `table` to cover `lo - 2 ..= hi + 1`.
    pub fn from_table(table: &CoefTable, lo: i64, hi: i64) -> Self {
        assert!(table.lo() <= lo - 2 && table.hi() > hi, "table too short");
        Self {
            lo,
            hi,
            rows: (lo..=hi).map(|i| table.row(i)).collect(),
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, i: i64, j: i64) -> C64 {
        if i < self.lo || i > self.hi {
            return C64::default();
        }
        let off = j - first_col(i);
        if (0..4).contains(&off) {
            self.rows[(i - self.lo) as usize][off as usize]
        } else {
            C64::default()
        }
    }

    /// Largest entry whose column falls outside `lo ..= hi`.
    pub fn leak(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in self.lo..=self.hi {
            for j in first_col(i)..first_col(i) + 4 {
                if j < self.lo || j > self.hi {
                    m = m.max(self.entry(i, j).norm());
                }
            }
        }
        m
    }

    /// Square banded matrix on `lo ..= hi`, dropping out-of-window columns.
    pub fn to_band(&self) -> BandMatrix {
        let n = self.dim();
        let mut b = BandMatrix::zeros(n, 2, 2);
        for i in self.lo..=self.hi {
            for j in first_col(i)..first_col(i) + 4 {
                if j >= self.lo && j <= self.hi {
                    b.set((i - self.lo) as usize, (j - self.lo) as usize, self.entry(i, j));
                }
            }
        }
        b
    }

    /// Matrix-vector product on the window (vector indexed from `lo`).
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.dim());
        let mut y = vec![C64::default(); x.len()];
        for (k, row) in self.rows.iter().enumerate() {
            let i = self.lo + k as i64;
            let c0 = first_col(i);
            let mut s = C64::default();
            for (off, e) in row.iter().enumerate() {
                let j = c0 + off as i64;
                if j >= self.lo && j <= self.hi {
                    s += e * x[(j - self.lo) as usize];
                }
            }
            y[k] = s;
        }
        y
    }

    /// `(max |C*C - I|, max |C C* - I|)` over the window.
    pub fn unitarity_defect(&self) -> (f64, f64) {
        let (lo, hi) = (self.lo, self.hi);
        let inside = |j: i64| j >= lo && j <= hi;
        let mut left: f64 = 0.0;
        let mut right: f64 = 0.0;
        for j in lo..=hi {
            for k in j.max(lo)..=(j + 4).min(hi) {
                // (C*C)(j,k) = sum_i conj(C(i,j)) C(i,k)
                let mut s = C64::default();
                for i in (j - 2).max(lo)..=(j + 2).min(hi) {
                    if inside(j) && inside(k) {
                        s += self.entry(i, j).conj() * self.entry(i, k);
                    }
                }
                let d = if j == k { s - 1.0 } else { s };
                left = left.max(d.norm());
                // (C C*)(j,k) = sum_i C(j,i) conj(C(k,i))
                let mut t = C64::default();
                for i in (j - 2).max(lo)..=(j + 2).min(hi) {
                    t += self.entry(j, i) * self.entry(k, i).conj();
                }
                let d = if j == k { t - 1.0 } else { t };
                right = right.max(d.norm());
            }
        }
        (left, right)
    }

    /// Band entries as CSV records.
    pub fn records(&self) -> Vec<BandEntry> {
        let mut out = Vec::new();
        for i in self.lo..=self.hi {
            for j in first_col(i)..first_col(i) + 4 {
                if j >= self.lo && j <= self.hi {
                    let v = self.entry(i, j);
                    out.push(BandEntry {
                        row: i,
                        col: j,
                        re: v.re,
                        im: v.im,
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandEntry {
    pub row: i64,
    pub col: i64,
    pub re: f64,
    pub im: f64,
}

/// `N x N` truncation of the one-sided matrix, closed by `alpha(N-1) := eta_b`.
#[derive(Clone, Debug)]
pub struct FiniteCmv {
    bands: Pentadiagonal,
    eta_b: C64,
}

pub fn build_finite_cmv(seq: &VerblunskySequence, n: usize, eta_b: C64) -> Result<FiniteCmv> {
    if n < 2 {
        return Err(CmvError::Size(format!("finite CMV needs N >= 2, got {n}")));
    }
    check_unimodular(eta_b)?;
    let last = n as i64 - 1;
    let mut table = CoefTable::from_seq(&seq.shifted(0)?, -2, last + 1);
    table.close_at(-1, C64::new(-1.0, 0.0))?;
    table.close_at(last, eta_b)?;
    Ok(FiniteCmv {
        bands: Pentadiagonal::from_table(&table, 0, last),
        eta_b,
    })
}

impl FiniteCmv {
    pub fn dim(&self) -> usize {
        self.bands.dim()
    }

    pub fn eta_b(&self) -> C64 {
        self.eta_b
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.bands.entry(i as i64, j as i64)
    }

    pub fn bands(&self) -> &Pentadiagonal {
        &self.bands
    }

    pub fn to_band(&self) -> BandMatrix {
        self.bands.to_band()
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        self.bands.matvec(x)
    }

    pub fn unitarity_defect(&self) -> (f64, f64) {
        self.bands.unitarity_defect()
    }
}

/// Window `lo ..= hi` of the extended matrix, closed at `lo - 1` and `hi`.
#[derive(Clone, Debug)]
pub struct ExtendedWindow {
    bands: Pentadiagonal,
}

impl ExtendedWindow {
    pub fn new(
        seq: &VerblunskySequence,
        lo: i64,
        hi: i64,
        eta_left: C64,
        eta_right: C64,
    ) -> Result<Self> {
        if !seq.is_two_sided() {
            return Err(CmvError::Support("extended window needs a two-sided sequence".into()));
        }
        if hi - lo < 3 {
            return Err(CmvError::Size(format!("window [{lo}, {hi}] is too small")));
        }
        let mut table = CoefTable::from_seq(seq, lo - 2, hi + 1);
        table.close_at(lo - 1, eta_left)?;
        table.close_at(hi, eta_right)?;
        Ok(Self {
            bands: Pentadiagonal::from_table(&table, lo, hi),
        })
    }

    /// Symmetric window `[-h, h]` closed with `eta = 1` on both sides.
    pub fn symmetric(seq: &VerblunskySequence, half_width: usize) -> Result<Self> {
        let h = half_width as i64;
        let one = C64::new(1.0, 0.0);
        Self::new(seq, -h, h, one, one)
    }

    pub fn bands(&self) -> &Pentadiagonal {
        &self.bands
    }

    pub fn lo(&self) -> i64 {
        self.bands.lo
    }

    pub fn hi(&self) -> i64 {
        self.bands.hi
    }
}

/// Finitely supported vector on the integers.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseState {
    pub start: i64,
    pub amps: Vec<C64>,
}

impl SparseState {
    pub fn delta(n: i64) -> Self {
        Self {
            start: n,
            amps: vec![C64::new(1.0, 0.0)],
        }
    }

    pub fn zero() -> Self {
        Self {
            start: 0,
            amps: Vec::new(),
        }
    }

    pub fn from_pairs(pairs: &[(i64, C64)]) -> Self {
        let mut s = Self::zero();
        for &(n, v) in pairs {
            s.add(n, v);
        }
        s
    }

    pub fn end(&self) -> i64 {
        self.start + self.amps.len() as i64 - 1
    }

    pub fn get(&self, n: i64) -> C64 {
        let k = n - self.start;
        if k >= 0 && (k as usize) < self.amps.len() {
            self.amps[k as usize]
        } else {
            C64::default()
        }
    }

    pub fn add(&mut self, n: i64, v: C64) {
        if self.amps.is_empty() {
            self.start = n;
            self.amps.push(v);
            return;
        }
        if n < self.start {
            let pad = (self.start - n) as usize;
            let mut amps = vec![C64::default(); pad];
            amps.append(&mut self.amps);
            self.amps = amps;
            self.start = n;
        }
        let k = (n - self.start) as usize;
        if k >= self.amps.len() {
            self.amps.resize(k + 1, C64::default());
        }
        self.amps[k] += v;
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            start: self.start,
            amps: self.amps.iter().map(|v| v * c).collect(),
        }
    }

    pub fn axpy(&mut self, c: C64, other: &SparseState) {
        for (k, v) in other.amps.iter().enumerate() {
            self.add(other.start + k as i64, c * v);
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Sup-norm distance to another state.
    pub fn distance(&self, other: &SparseState) -> f64 {
        if self.amps.is_empty() && other.amps.is_empty() {
            return 0.0;
        }
        let lo = self.start.min(other.start);
        let hi = self.end().max(other.end());
        (lo..=hi)
            .map(|n| (self.get(n) - other.get(n)).norm())
            .fold(0.0, f64::max)
    }

    /// Drops exactly-zero amplitudes at both ends.
    pub fn trimmed(mut self) -> Self {
        let zero = C64::default();
        while self.amps.last() == Some(&zero) {
            self.amps.pop();
        }
        let lead = self.amps.iter().take_while(|v| **v == zero).count();
        self.amps.drain(..lead);
        self.start += lead as i64;
        self
    }

    pub fn records(&self) -> Vec<StateRecord> {
        self.amps
            .iter()
            .enumerate()
            .map(|(k, v)| StateRecord {
                n: self.start + k as i64,
                re: v.re,
                im: v.im,
                abs2: v.norm_sqr(),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StateRecord {
    pub n: i64,
    pub re: f64,
    pub im: f64,
    pub abs2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Action {
    Direct,
    Adjoint,
    Transpose,
}

fn apply_generic(seq: &VerblunskySequence, v: &SparseState, action: Action) -> SparseState {
    if v.amps.is_empty() {
        return SparseState::zero();
    }
    let mut lo = v.start - 2;
    let hi = v.end() + 2;
    if seq.support() == Support::OneSided {
        lo = lo.max(0);
    }
    let table = CoefTable::from_seq(seq, lo - 4, hi + 3);
    let mut out = SparseState {
        start: lo,
        amps: vec![C64::default(); (hi - lo + 1) as usize],
    };
    match action {
        Action::Direct => {
            for i in lo..=hi {
                let row = table.row(i);
                let c0 = first_col(i);
                let s: C64 = (0..4).map(|k| row[k] * v.get(c0 + k as i64)).sum();
                out.amps[(i - lo) as usize] = s;
            }
        }
        Action::Adjoint | Action::Transpose => {
            // column j of the operator is read from rows j-2 ..= j+2
            for (k, x) in v.amps.iter().enumerate() {
                let row_index = v.start + k as i64;
                if *x == C64::default() {
                    continue;
                }
                if seq.support() == Support::OneSided && row_index < 0 {
                    continue;
                }
                let row = table.row(row_index);
                let c0 = first_col(row_index);
                for (off, e) in row.iter().enumerate() {
                    let j = c0 + off as i64;
                    if j < lo || j > hi {
                        continue;
                    }
                    let e = if action == Action::Adjoint { e.conj() } else { *e };
                    out.amps[(j - lo) as usize] += e * x;
                }
            }
        }
    }
    out
}

/// Exact product `E v`; for a one-sided sequence this is the one-sided matrix.
pub fn apply_extended(seq: &VerblunskySequence, v: &SparseState) -> SparseState {
    apply_generic(seq, v, Action::Direct)
}

/// Exact product `E* v`.
pub fn apply_adjoint(seq: &VerblunskySequence, v: &SparseState) -> SparseState {
    apply_generic(seq, v, Action::Adjoint)
}

/// Exact product `E^T v`.
pub fn apply_transpose(seq: &VerblunskySequence, v: &SparseState) -> SparseState {
    apply_generic(seq, v, Action::Transpose)
}

/// Halves produced by setting `alpha(-1) = -1`.
///
/// The right half is `alpha(n)`, `n >= 0`. The left block on `n <= -1` is
/// `D C(beta) D` with `m = -1 - n`, `D = diag((-1)^m)` and
/// `beta(m) = conj(alpha(-2 - m))`; the returned left half is `beta`.
pub fn split_at_origin(
    seq: &VerblunskySequence,
) -> Result<(VerblunskySequence, VerblunskySequence)> {
    if !seq.is_two_sided() {
        return Err(CmvError::Support("split needs a two-sided sequence".into()));
    }
    Ok((seq.shifted(0)?, seq.left_half()))
}

/// Largest entry coupling `n < 0` to `n >= 0` once `alpha(-1) := -1`,
/// scanned over rows `-reach ..= reach`.
pub fn split_coupling(seq: &VerblunskySequence, reach: i64) -> f64 {
    let mut table = CoefTable::from_seq(seq, -reach - 3, reach + 3);
    table
        .close_at(-1, C64::new(-1.0, 0.0))
        .expect("-1 is unimodular");
    let mut m: f64 = 0.0;
    for i in -reach..=reach {
        for j in first_col(i)..first_col(i) + 4 {
            if (i < 0) != (j < 0) {
                m = m.max(table.entry(i, j).norm());
            }
        }
    }
    m
}

/// Dense-truncation Green's function of the extended matrix on `[-h, h]`.
#[derive(Clone, Debug)]
pub struct ResolventOracle {
    half_width: i64,
    lu: BandLu,
    z: C64,
}

impl ResolventOracle {
    pub fn new(seq: &VerblunskySequence, z: C64, half_width: usize) -> Result<Self> {
        if z.norm() == 0.0 {
            return Err(CmvError::InvalidParameter(
                "the resolvent formula excludes z = 0".into(),
            ));
        }
        let window = ExtendedWindow::symmetric(seq, half_width)?;
        let mut band = window.bands.to_band();
        for k in 0..band.dim() {
            band.add(k, k, -z);
        }
        Ok(Self {
            half_width: half_width as i64,
            lu: BandLu::factor(&band, PivotPolicy::Strict)?,
            z,
        })
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    fn check(&self, n: i64) -> Result<()> {
        if 2 * n.abs() > self.half_width {
            return Err(CmvError::Window(format!(
                "index {n} outside the safe interior of half-width {}",
                self.half_width
            )));
        }
        Ok(())
    }

    /// Column `y` of `(E - z)^{-1}`, indexed from `-half_width`.
    pub fn column(&self, y: i64) -> Result<Vec<C64>> {
        self.check(y)?;
        let mut b = vec![C64::default(); self.lu.dim()];
        b[(y + self.half_width) as usize] = C64::new(1.0, 0.0);
        self.lu.solve_in_place(&mut b);
        Ok(b)
    }

    pub fn entry(&self, x: i64, y: i64) -> Result<C64> {
        self.check(x)?;
        Ok(self.column(y)?[(x + self.half_width) as usize])
    }
}

pub fn resolvent_oracle(
    seq: &VerblunskySequence,
    z: C64,
    half_width: usize,
    x: i64,
    y: i64,
) -> Result<C64> {
    ResolventOracle::new(seq, z, half_width)?.entry(x, y)
}

/// Residuals of the four reconstructions in the spectral-basis identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BasisReport {
    pub n: i64,
    /// Residuals for `delta(2n+2)`, `delta(2n+3)`, `delta(2n-1)`, `delta(2n-2)`.
    pub residuals: [f64; 4],
    pub max_residual: f64,
    pub min_rho: f64,
}

/// Rebuilds `delta(2n+2)`, `delta(2n+3)`, `delta(2n-1)`, `delta(2n-2)` from
/// `E` and `E*` applied to `delta(2n-1 ..= 2n+2)` and reports the residuals.
pub fn spectral_basis_reach(seq: &VerblunskySequence, n: i64) -> Result<BasisReport> {
    if !seq.is_two_sided() {
        return Err(CmvError::Support("spectral basis check needs a two-sided sequence".into()));
    }
    let (e0, e1) = (2 * n, 2 * n + 1);
    let mut min_rho = f64::INFINITY;
    for k in e0 - 2..=e0 + 2 {
        let r = seq.rho(k);
        min_rho = min_rho.min(r);
        if r < 1e-12 {
            return Err(CmvError::DegenerateRho { index: k, rho: r });
        }
    }
    let a = |k: i64| seq.alpha(k);
    let r = |k: i64| C64::new(seq.rho(k), 0.0);
    let d = SparseState::delta;
    let e = |v: &SparseState| apply_extended(seq, v);
    let es = |v: &SparseState| apply_adjoint(seq, v);

    // delta(2n+2) = E*[(r_{2n} d_{2n} - a_{2n} d_{2n+1}) / r_{2n+1}] - (a_{2n+1}/r_{2n+1}) d_{2n+1}
    let mut w = d(e0).scaled(r(e0) / r(e1));
    w.axpy(-a(e0) / r(e1), &d(e1));
    let mut rec_2 = es(&w);
    rec_2.axpy(-a(e1) / r(e1), &d(e1));

    // delta(2n+3) = [E(d_{2n+1} - (conj a_{2n+1}/r_{2n+1}) d_{2n+2})
    //               - (conj a_{2n+2}/r_{2n+1}) d_{2n+2}] r_{2n+1} / r_{2n+2}
    let mut w = d(e1);
    w.axpy(-a(e1).conj() / r(e1), &d(e0 + 2));
    let mut rec_3 = e(&w);
    rec_3.axpy(-a(e0 + 2).conj() / r(e1), &d(e0 + 2));
    let rec_3 = rec_3.scaled(r(e1) / r(e0 + 2));

    // delta(2n-1) = E*[(conj a_{2n} d_{2n} + r_{2n} d_{2n+1}) / r_{2n-1}] + (conj a_{2n-1}/r_{2n-1}) d_{2n}
    let mut w = d(e0).scaled(a(e0).conj() / r(e0 - 1));
    w.axpy(r(e0) / r(e0 - 1), &d(e1));
    let mut rec_m1 = es(&w);
    rec_m1.axpy(a(e0 - 1).conj() / r(e0 - 1), &d(e0));

    // delta(2n-2) = [a_{2n-1} E d_{2n-1} + r_{2n-1} E d_{2n} + a_{2n-2} d_{2n-1}] / r_{2n-2}
    let mut rec_m2 = e(&d(e0 - 1)).scaled(a(e0 - 1));
    rec_m2.axpy(r(e0 - 1), &e(&d(e0)));
    rec_m2.axpy(a(e0 - 2), &d(e0 - 1));
    let rec_m2 = rec_m2.scaled(1.0 / r(e0 - 2));

    let residuals = [
        rec_2.distance(&d(e0 + 2)),
        rec_3.distance(&d(e0 + 3)),
        rec_m1.distance(&d(e0 - 1)),
        rec_m2.distance(&d(e0 - 2)),
    ];
    Ok(BasisReport {
        n,
        residuals,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        min_rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{extend_two_sided, make_constant, make_explicit, make_fibonacci};
    use crate::{c64, cis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_two_sided() -> VerblunskySequence {
        make_constant(c64(0.0, 0.0), Support::TwoSided).unwrap()
    }

    fn random_two_sided(seed: u64, radius: f64, len: usize) -> VerblunskySequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Vec<C64> {
            (0..len)
                .map(|_| C64::from_polar(radius * rng.random::<f64>().sqrt(), rng.random_range(0.0..6.3)))
                .collect()
        };
        let pos = make_explicit(draw()).unwrap();
        let neg = make_explicit(draw()).unwrap();
        extend_two_sided(pos, neg).unwrap()
    }

    #[test]
    fn free_finite_cmv_maps_delta0_to_delta1() {
        let seq = make_constant(c64(0.0, 0.0), Support::OneSided).unwrap();
        let c = build_finite_cmv(&seq, 6, c64(1.0, 0.0)).unwrap();
        for i in 0..6 {
            let expect = if i == 1 { 1.0 } else { 0.0 };
            assert_eq!(c.entry(i, 0), c64(expect, 0.0));
        }
    }

    #[test]
    fn finite_cmv_validation() {
        let seq = make_constant(c64(0.1, 0.0), Support::OneSided).unwrap();
        assert!(matches!(
            build_finite_cmv(&seq, 10, c64(0.5, 0.0)),
            Err(CmvError::NotUnimodular(_))
        ));
        assert!(matches!(
            build_finite_cmv(&seq, 1, c64(1.0, 0.0)),
            Err(CmvError::Size(_))
        ));
    }

    #[test]
    fn finite_cmv_is_unitary() {
        let seq = make_fibonacci(c64(0.5, 0.2), c64(-0.3, 0.6), Support::OneSided).unwrap();
        for n in [2, 3, 7, 50] {
            let c = build_finite_cmv(&seq, n, cis(0.7)).unwrap();
            let (l, r) = c.unitarity_defect();
            assert!(l < 1e-13 && r < 1e-13, "n={n}: {l} {r}");
            assert_eq!(c.bands().leak(), 0.0);
        }
    }

    #[test]
    fn first_row_is_standard() {
        let seq = make_explicit(vec![c64(0.3, 0.1), c64(-0.2, 0.4), c64(0.1, 0.0)]).unwrap();
        let c = build_finite_cmv(&seq, 5, c64(1.0, 0.0)).unwrap();
        let (a0, a1) = (seq.alpha(0), seq.alpha(1));
        let (r0, r1) = (seq.rho(0), seq.rho(1));
        assert!((c.entry(0, 0) - a0.conj()).norm() < 1e-15);
        assert!((c.entry(0, 1) - a1.conj() * r0).norm() < 1e-15);
        assert!((c.entry(0, 2) - c64(r1 * r0, 0.0)).norm() < 1e-15);
        assert!((c.entry(1, 0) - c64(r0, 0.0)).norm() < 1e-15);
        assert!((c.entry(1, 1) + a1.conj() * a0).norm() < 1e-15);
        assert!((c.entry(1, 2) + a0 * r1).norm() < 1e-15);
    }

    #[test]
    fn free_extended_moves_deltas() {
        let seq = zero_two_sided();
        let out = apply_extended(&seq, &SparseState::delta(2)).trimmed();
        assert_eq!(out, SparseState::delta(0));
        let out = apply_extended(&seq, &SparseState::delta(1)).trimmed();
        assert_eq!(out, SparseState::delta(3));
        assert_eq!(apply_extended(&seq, &SparseState::zero()), SparseState::zero());
    }

    #[test]
    fn adjoint_inverts_and_transpose_matches_entries() {
        let seq = random_two_sided(3, 0.9, 40);
        let v = SparseState::from_pairs(&[(-3, c64(1.0, 2.0)), (0, c64(0.5, -1.0)), (4, c64(0.0, 1.0))]);
        let back = apply_adjoint(&seq, &apply_extended(&seq, &v));
        assert!(back.distance(&v) < 1e-14);
        let table = CoefTable::from_seq(&seq, -12, 12);
        for j in -5..5 {
            let col = apply_transpose(&seq, &SparseState::delta(j));
            for i in -8..8 {
                assert!((col.get(i) - table.entry(j, i)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn window_interior_matches_operator() {
        let seq = random_two_sided(5, 0.8, 60);
        let w = ExtendedWindow::new(&seq, -11, 12, cis(0.3), cis(-1.0)).unwrap();
        let (l, r) = w.bands().unitarity_defect();
        assert!(l < 1e-13 && r < 1e-13);
        assert_eq!(w.bands().leak(), 0.0);
        let table = CoefTable::from_seq(&seq, -20, 20);
        for i in -9..=10 {
            for j in i - 3..=i + 3 {
                assert_eq!(w.bands().entry(i, j), table.entry(i, j));
            }
        }
    }

    #[test]
    fn split_decouples_and_left_block_is_conjugated_cmv() {
        let seq = random_two_sided(11, 0.9, 30);
        assert_eq!(split_coupling(&seq, 20), 0.0);
        let (right, left) = split_at_origin(&seq).unwrap();
        assert_eq!(right.alpha(3), seq.alpha(3));
        let mut table = CoefTable::from_seq(&seq, -25, 5);
        table.close_at(-1, c64(-1.0, 0.0)).unwrap();
        let one_sided = CoefTable::from_seq(&left, -2, 25);
        for n in -18..=-1i64 {
            for k in -18..=-1i64 {
                let (m, p) = (-1 - n, -1 - k);
                let sign = if (m + p) % 2 == 0 { 1.0 } else { -1.0 };
                let expect = one_sided.entry(m, p) * sign;
                assert!((table.entry(n, k) - expect).norm() < 1e-15, "({n},{k})");
            }
        }
        let one = make_constant(c64(0.1, 0.0), Support::OneSided).unwrap();
        assert!(split_at_origin(&one).is_err());
    }

    #[test]
    fn oracle_residual_and_stability() {
        let seq = zero_two_sided();
        let z = c64(0.5, 0.0);
        let a = resolvent_oracle(&seq, z, 60, 1, -2).unwrap();
        let b = resolvent_oracle(&seq, z, 120, 1, -2).unwrap();
        assert!((a - b).norm() < 1e-8);
        assert!(matches!(
            resolvent_oracle(&seq, c64(0.0, 0.0), 60, 0, 0),
            Err(CmvError::InvalidParameter(_))
        ));
        assert!(matches!(
            resolvent_oracle(&seq, z, 60, 40, 0),
            Err(CmvError::Window(_))
        ));

        let seq = random_two_sided(2, 0.9, 200);
        let z = 0.9 * cis(1.1);
        let oracle = ResolventOracle::new(&seq, z, 80).unwrap();
        let window = ExtendedWindow::symmetric(&seq, 80).unwrap();
        for y in [-10, 0, 3] {
            let g = oracle.column(y).unwrap();
            let eg = window.bands().matvec(&g);
            for (k, v) in eg.iter().enumerate() {
                let i = k as i64 - 80;
                let expect = if i == y { 1.0 } else { 0.0 };
                assert!((v - z * g[k] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn spectral_basis_free_and_random() {
        let rep = spectral_basis_reach(&zero_two_sided(), 0).unwrap();
        assert!(rep.max_residual == 0.0);
        for seed in 0..4 {
            let seq = random_two_sided(seed, 0.9, 20);
            for n in [-2, 0, 3] {
                let rep = spectral_basis_reach(&seq, n).unwrap();
                assert!(rep.max_residual < 1e-10, "seed {seed} n {n}: {:?}", rep);
            }
        }
    }

    #[test]
    fn spectral_basis_small_rho() {
        let mut vals = vec![c64(0.2, 0.1); 6];
        vals[1] = c64(0.0, 0.999_999);
        let seq = extend_two_sided(
            make_explicit(vals).unwrap(),
            make_constant(c64(-0.3, 0.0), Support::OneSided).unwrap(),
        )
        .unwrap();
        let rep = spectral_basis_reach(&seq, 0).unwrap();
        assert!(rep.max_residual < 1e-8, "{:?}", rep);
    }
}
