//! Banded LU with partial pivoting (row interchanges inside the band, fill
//! confined to `kl` extra superdiagonals).

use num_complex::Complex64;

use super::dense::DenseMatrix;
use super::{EigError, LinearMap};
use crate::assembly::ComplexSparseMatrix;
use crate::C64;

const ZERO: C64 = Complex64::new(0.0, 0.0);

/// Band storage: row `i`, column `j` lives at `data[i*w + (j - i + kl)]` for
/// `i - kl <= j <= i + ku + kl`; the extra `kl` superdiagonals hold pivoting fill.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    data: Vec<C64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Self { n, kl, ku, w, data: vec![ZERO; n * w] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        i * self.w + (j + self.kl - i)
    }

    /// Adds `v` at `(i, j)`; the entry must lie inside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        let p = self.pos(i, j);
        self.data[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            return ZERO;
        }
        self.data[self.pos(i, j)]
    }

    pub fn from_sparse(a: &ComplexSparseMatrix, shift: C64) -> Self {
        let (kl, ku) = a.bandwidths();
        let mut b = Self::zeros(a.dim(), kl, ku);
        for i in 0..a.dim() {
            for (j, v) in a.row_entries(i) {
                b.add(i, j, v);
            }
            b.add(i, i, -shift);
        }
        b
    }

    pub fn from_dense(a: &DenseMatrix, shift: C64) -> Self {
        let n = a.n();
        let (mut kl, mut ku) = (0, 0);
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != ZERO {
                    if i > j {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                }
            }
        }
        let mut b = Self::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                b.add(i, j, a[(i, j)]);
            }
            b.add(i, i, -shift);
        }
        b
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n) {
                col[j] += self.get(i, j).norm();
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }
}

/// LU factors of a shifted banded matrix, ready for repeated solves.
#[derive(Clone, Debug)]
pub struct BandedLu {
    lu: BandedMatrix,
    /// Multipliers of column `k` at `lcol[k*kl..(k+1)*kl]`.
    lcol: Vec<C64>,
    piv: Vec<usize>,
    shift: C64,
    norm1: f64,
}

/// Relative pivot threshold below which the shifted matrix counts as singular.
pub const SINGULAR_RTOL: f64 = f64::EPSILON;

impl BandedLu {
    pub fn factor(mut a: BandedMatrix, shift: C64) -> Result<Self, EigError> {
        let n = a.n;
        let (kl, ku) = (a.kl, a.ku);
        let norm1 = a.one_norm();
        let tiny = SINGULAR_RTOL * norm1;
        let mut piv = vec![0usize; n];
        let mut lcol = vec![ZERO; n * kl];
        for k in 0..n {
            let rmax = (k + kl).min(n - 1);
            let jmax = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = a.data[a.pos(k, k)].norm();
            for r in k + 1..=rmax {
                let v = a.data[a.pos(r, k)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[k] = p;
            if best <= tiny || best == 0.0 {
                return Err(EigError::Singular { pivot: k });
            }
            if p != k {
                for j in k..=jmax {
                    let (pk, pp) = (a.pos(k, j), a.pos(p, j));
                    a.data.swap(pk, pp);
                }
            }
            let inv = Complex64::new(1.0, 0.0) / a.data[a.pos(k, k)];
            let len = jmax - k;
            for r in k + 1..=rmax {
                let prk = a.pos(r, k);
                let l = a.data[prk] * inv;
                a.data[prk] = l;
                lcol[k * kl + (r - k - 1)] = l;
                if l == ZERO || len == 0 {
                    continue;
                }
                let src = a.pos(k, k + 1);
                let dst = a.pos(r, k + 1);
                let (head, tail) = a.data.split_at_mut(dst);
                let srow = &head[src..src + len];
                let drow = &mut tail[..len];
                for (d, s) in drow.iter_mut().zip(srow) {
                    *d -= l * s;
                }
            }
        }
        Ok(Self { lu: a, lcol, piv, shift, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn shift(&self) -> C64 {
        self.shift
    }

    /// 1-norm of the shifted matrix that was factored.
    pub fn shifted_one_norm(&self) -> f64 {
        self.norm1
    }

    /// Solves `(A - z₀) x = b` in place.
    pub fn solve(&self, b: &mut [C64]) {
        let a = &self.lu;
        let n = a.n;
        assert_eq!(b.len(), n);
        let (kl, ku) = (a.kl, a.ku);
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            if bk == ZERO {
                continue;
            }
            let m = kl.min(n - 1 - k);
            let col = &self.lcol[k * kl..k * kl + m];
            for (x, l) in b[k + 1..k + 1 + m].iter_mut().zip(col) {
                *x -= l * bk;
            }
        }
        for i in (0..n).rev() {
            let jmax = (i + kl + ku).min(n - 1);
            let start = a.pos(i, i);
            let row = &a.data[start..start + (jmax - i) + 1];
            let mut acc = b[i];
            for (u, x) in row[1..].iter().zip(&b[i + 1..=jmax]) {
                acc -= u * x;
            }
            b[i] = acc / row[0];
        }
    }

    /// Solves `(A - z₀)ᴴ x = b` in place.
    pub fn solve_adjoint(&self, b: &mut [C64]) {
        let a = &self.lu;
        let n = a.n;
        assert_eq!(b.len(), n);
        let (kl, ku) = (a.kl, a.ku);
        for i in 0..n {
            let jmax = (i + kl + ku).min(n - 1);
            let start = a.pos(i, i);
            let row = &a.data[start..start + (jmax - i) + 1];
            let xi = b[i] / row[0].conj();
            b[i] = xi;
            if xi == ZERO {
                continue;
            }
            for (x, u) in b[i + 1..=jmax].iter_mut().zip(&row[1..]) {
                *x -= u.conj() * xi;
            }
        }
        for k in (0..n).rev() {
            let m = kl.min(n - 1 - k);
            let col = &self.lcol[k * kl..k * kl + m];
            let mut acc = ZERO;
            for (x, l) in b[k + 1..k + 1 + m].iter().zip(col) {
                acc += l.conj() * x;
            }
            b[k] -= acc;
            b.swap(k, self.piv[k]);
        }
    }
}

/// Factors `A - z₀ I` using the recorded bandwidth of `a`.
pub fn lu_banded(a: &ComplexSparseMatrix, z0: C64) -> Result<BandedLu, EigError> {
    BandedLu::factor(BandedMatrix::from_sparse(a, z0), z0)
}

/// `(A - z₀)⁻¹` as a linear map.
pub struct ShiftInvert<'a> {
    pub lu: &'a BandedLu,
}

impl LinearMap for ShiftInvert<'_> {
    fn dim(&self) -> usize {
        self.lu.dim()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.lu.solve(y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::dense::{dense_eigs, DenseLu};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_solves_are_exact() {
        let a = DenseMatrix::identity(7);
        let lu = BandedLu::factor(BandedMatrix::from_dense(&a, ZERO), ZERO).unwrap();
        let b: Vec<C64> = (0..7).map(|i| c(i as f64, -1.0)).collect();
        let mut x = b.clone();
        lu.solve(&mut x);
        assert_eq!(x, b);
    }

    #[test]
    fn toeplitz_matches_dense_lu() {
        let n = 10;
        let mut a = DenseMatrix::zeros(n);
        for i in 0..n {
            a[(i, i)] = c(2.0, 0.0);
            if i + 1 < n {
                a[(i, i + 1)] = c(-1.0, 0.0);
                a[(i + 1, i)] = c(-1.0, 0.0);
            }
        }
        let band = BandedMatrix::from_dense(&a, ZERO);
        assert_eq!(band.bandwidths(), (1, 1));
        let lu = BandedLu::factor(band, ZERO).unwrap();
        let dlu = DenseLu::new(&a, ZERO).unwrap();
        let b: Vec<C64> = (0..n).map(|i| c((i as f64).sin(), (i as f64).cos())).collect();
        let (mut x, mut y) = (b.clone(), b.clone());
        lu.solve(&mut x);
        dlu.solve(&mut y);
        for i in 0..n {
            assert!((x[i] - y[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_shift_is_reported() {
        let a = DenseMatrix::from_real_rows(&[vec![2.0, 1.0], vec![0.0, 3.0]]).unwrap();
        let ev = dense_eigs(&a).unwrap();
        for p in ev {
            let r = BandedLu::factor(BandedMatrix::from_dense(&a, p.value), p.value);
            assert!(matches!(r, Err(EigError::Singular { .. })), "{:?}", p.value);
        }
    }

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                // weak diagonal to force pivoting
                a[(i, j)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        a
    }

    #[test]
    fn pivoting_band_solves_and_adjoint_solves() {
        for (n, kl, ku, seed) in [(30, 3, 2, 1), (40, 1, 5, 2), (25, 6, 6, 3), (12, 11, 11, 4)] {
            let a = random_banded(n, kl, ku, seed);
            let z0 = c(0.1, -0.2);
            let lu = BandedLu::factor(BandedMatrix::from_dense(&a, z0), z0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let b: Vec<C64> = (0..n).map(|_| c(rng.gen(), rng.gen())).collect();
            let mut x = b.clone();
            lu.solve(&mut x);
            let mut ax = vec![ZERO; n];
            a.apply_into(&x, &mut ax);
            let err = (0..n).map(|i| (ax[i] - z0 * x[i] - b[i]).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "solve err {err}");
            let mut y = b.clone();
            lu.solve_adjoint(&mut y);
            let ah = a.adjoint();
            let mut ahy = vec![ZERO; n];
            ah.apply_into(&y, &mut ahy);
            let err = (0..n).map(|i| (ahy[i] - z0.conj() * y[i] - b[i]).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "adjoint err {err}");
        }
    }
}
