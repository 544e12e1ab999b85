//! Banded complex matrices and an LU factorization with partial pivoting.
//!
//! Row `i` keeps the columns `i - kl ..= i + kl + ku`; the extra `kl` slots on
//! the right absorb fill-in produced by row exchanges.

use crate::error::{CmvError, Result};
use crate::C64;

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![C64::default(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (off >= 0 && (off as usize) < self.width && i < self.n && j < self.n)
            .then(|| i * self.width + off as usize)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j).map_or(C64::default(), |s| self.data[s])
    }

    /// Sets an entry inside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j).expect("band slot");
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// Columns of row `i` that may hold nonzeros.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn transpose(&self) -> BandMatrix {
        let mut t = BandMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.row_range(i) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }
}

/// How to treat a pivot whose modulus falls below the singularity threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotPolicy {
    /// Report [`CmvError::Singular`].
    Strict,
    /// Replace the pivot by a tiny nonzero value; used by inverse iteration.
    Perturb,
}

#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    u: BandMatrix,
    multipliers: Vec<C64>,
    perm: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &BandMatrix, policy: PivotPolicy) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut u = a.clone();
        let mut multipliers = vec![C64::default(); n * kl.max(1)];
        let mut perm = vec![0; n];
        let tiny = a.max_abs().max(f64::MIN_POSITIVE) * 1e-15;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = u.get(k, k).norm();
            for i in k + 1..=last_row {
                let v = u.get(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            perm[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (sk, sp) = (u.slot(k, j).unwrap(), u.slot(p, j).unwrap());
                    u.data.swap(sk, sp);
                }
            }
            let mut pivot = u.get(k, k);
            if pivot.norm() <= tiny {
                match policy {
                    PivotPolicy::Strict => return Err(CmvError::Singular(k)),
                    PivotPolicy::Perturb => {
                        pivot = C64::new(tiny, 0.0);
                        let s = u.slot(k, k).unwrap();
                        u.data[s] = pivot;
                    }
                }
            }
            for i in k + 1..=last_row {
                let l = u.get(i, k) / pivot;
                multipliers[k * kl + (i - k - 1)] = l;
                let s = u.slot(i, k).unwrap();
                u.data[s] = C64::default();
                if l == C64::default() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let ukj = u.data[u.slot(k, j).unwrap()];
                    let s = u.slot(i, j).unwrap();
                    u.data[s] -= l * ukj;
                }
            }
        }
        Ok(Self {
            n,
            kl,
            u,
            multipliers,
            perm,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, b: &mut [C64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, ku) = (self.n, self.kl, self.u.ku);
        for k in 0..n {
            b.swap(k, self.perm[k]);
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.multipliers[k * kl + (i - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.u.get(k, j) * b[j];
            }
            b[k] = s / self.u.get(k, k);
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
