//! Dense complex eigensolver: Householder reduction to Hessenberg form, then
//! single-shift QR with Givens rotations to a complex Schur form.

use num_complex::Complex64;

use super::{EigError, EigenPair, LinearMap};
use crate::C64;

const ZERO: C64 = Complex64::new(0.0, 0.0);
const ONE: C64 = Complex64::new(1.0, 0.0);

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, EigError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(EigError::DimensionMismatch { expected: n, got: rows.iter().map(Vec::len).find(|&l| l != n).unwrap_or(0) });
        }
        Ok(Self { n, data: rows.concat() })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, EigError> {
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&v| C64::new(v, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, o: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut c = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let orow = o.row(k);
                let crow = &mut c.data[i * n..(i + 1) * n];
                for j in 0..n {
                    crow[j] += a * orow[j];
                }
            }
        }
        c
    }

    pub fn adjoint(&self) -> DenseMatrix {
        let mut c = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                c[(j, i)] = self[(i, j)].conj();
            }
        }
        c
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl LinearMap for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).fold(ZERO, |acc, (a, b)| acc + a * b);
        }
    }
}

#[inline]
fn cabs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Reduces `a` to upper Hessenberg form `H = Qᴴ A Q`; returns `(H, Q)`.
pub fn hessenberg(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let n = a.n;
    let mut h = a.clone();
    let mut q = DenseMatrix::identity(n);
    let mut v = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0 == ZERO { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in 0..n {
            v[i] = ZERO;
        }
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = h[(i, k)];
        }
        let vn = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for vi in v[k + 1..].iter_mut() {
            *vi /= vn;
        }
        // H <- (I - 2vvᴴ) H
        for j in 0..n {
            let s: C64 = (k + 1..n).map(|i| v[i].conj() * h[(i, j)]).sum();
            let s2 = s * 2.0;
            for i in k + 1..n {
                h[(i, j)] -= v[i] * s2;
            }
        }
        // H <- H (I - 2vvᴴ), Q <- Q (I - 2vvᴴ)
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let s: C64 = (k + 1..n).map(|j| m[(i, j)] * v[j]).sum();
                let s2 = s * 2.0;
                for j in k + 1..n {
                    m[(i, j)] -= s2 * v[j].conj();
                }
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

/// Complex Givens rotation `G = [c s; -s̄ c]` with `G·[a; b] = [r; 0]`.
#[inline]
fn givens(a: C64, b: C64) -> (f64, C64) {
    if b == ZERO {
        return (1.0, ZERO);
    }
    if a == ZERO {
        return (0.0, ONE);
    }
    let na = a.norm();
    let nrm = na.hypot(b.norm());
    (na / nrm, (a / na) * b.conj() / nrm)
}

/// A complex Schur decomposition `A = Z T Zᴴ` with `T` upper triangular.
#[derive(Clone, Debug)]
pub struct Schur {
    pub t: DenseMatrix,
    pub z: DenseMatrix,
    pub iterations: usize,
}

pub const QR_ITERATIONS_PER_EIGENVALUE: usize = 30;

/// Shifted QR on the Hessenberg form, accumulating the unitary factor.
pub fn schur(a: &DenseMatrix) -> Result<Schur, EigError> {
    let n = a.n;
    let (mut h, mut z) = hessenberg(a);
    if n <= 1 {
        return Ok(Schur { t: h, z, iterations: 0 });
    }
    let ulp = f64::EPSILON;
    let small = f64::MIN_POSITIVE * (n as f64 / ulp);
    let mut hi = n - 1;
    let mut total = 0usize;
    let mut its = 0usize;
    loop {
        // find the start of the active unreduced block
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)];
            let mut tst = cabs1(h[(lo - 1, lo - 1)]) + cabs1(h[(lo, lo)]);
            if tst == 0.0 {
                tst = (0..n).map(|i| cabs1(h[(i, lo)])).sum();
            }
            if cabs1(sub) <= (ulp * tst).max(small) {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            its = 0;
            if hi == 0 {
                break;
            }
            hi -= 1;
            continue;
        }
        if its >= QR_ITERATIONS_PER_EIGENVALUE * (hi - lo + 1).max(1) {
            return Err(EigError::NotConverged { found: n - 1 - hi, wanted: n });
        }
        its += 1;
        total += 1;
        let mu = if its % 10 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75 * cabs1(h[(hi, hi - 1)]), 0.0)
        } else {
            let a11 = h[(hi - 1, hi - 1)];
            let a12 = h[(hi - 1, hi)];
            let a21 = h[(hi, hi - 1)];
            let a22 = h[(hi, hi)];
            let half = (a11 - a22) * 0.5;
            let disc = (half * half + a12 * a21).sqrt();
            let m1 = a22 - a12 * a21 / (half + disc);
            let m2 = a22 - a12 * a21 / (half - disc);
            let pick = |m: C64| if m.is_finite() { (m - a22).norm() } else { f64::INFINITY };
            if pick(m1) <= pick(m2) && m1.is_finite() {
                m1
            } else if m2.is_finite() {
                m2
            } else {
                a22
            }
        };
        let mut x = h[(lo, lo)] - mu;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            if k > lo {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            // rows k, k+1 over all columns from max(k-1, 0) (full Schur form)
            let j0 = if k > lo { k - 1 } else { k };
            for j in j0..n {
                let t1 = h[(k, j)];
                let t2 = h[(k + 1, j)];
                h[(k, j)] = t1 * c + s * t2;
                h[(k + 1, j)] = -s.conj() * t1 + t2 * c;
            }
            if k > lo {
                h[(k + 1, k - 1)] = ZERO;
            }
            let i1 = (k + 2).min(hi);
            for i in 0..=i1 {
                let t1 = h[(i, k)];
                let t2 = h[(i, k + 1)];
                h[(i, k)] = t1 * c + t2 * s.conj();
                h[(i, k + 1)] = -t1 * s + t2 * c;
            }
            for i in 0..n {
                let t1 = z[(i, k)];
                let t2 = z[(i, k + 1)];
                z[(i, k)] = t1 * c + t2 * s.conj();
                z[(i, k + 1)] = -t1 * s + t2 * c;
            }
        }
    }
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = ZERO;
        }
    }
    Ok(Schur { t: h, z, iterations: total })
}

/// All eigenvalues, in the order they appear on the Schur diagonal.
pub fn dense_eigenvalues(a: &DenseMatrix) -> Result<Vec<C64>, EigError> {
    let s = schur(a)?;
    Ok((0..a.n).map(|i| s.t[(i, i)]).collect())
}

/// All eigenpairs. Eigenvectors come from inverse iteration on the triangular
/// factor (one back-substitution per eigenvalue, with a perturbed pivot when
/// the shift coincides with another diagonal entry), mapped back through `Z`.
/// Residuals are recomputed against `a`.
pub fn dense_eigs(a: &DenseMatrix) -> Result<Vec<EigenPair>, EigError> {
    let n = a.n;
    let s = schur(a)?;
    let t = &s.t;
    let tnorm = t.one_norm().max(f64::MIN_POSITIVE);
    let floor = f64::EPSILON * tnorm;
    let mut out = Vec::with_capacity(n);
    let mut v = vec![ZERO; n];
    let mut x = vec![ZERO; n];
    for k in 0..n {
        let lam = t[(k, k)];
        for e in v.iter_mut() {
            *e = ZERO;
        }
        v[k] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in i + 1..=k {
                acc += t[(i, j)] * v[j];
            }
            let mut d = t[(i, i)] - lam;
            if d.norm() < floor {
                d = C64::new(floor, 0.0);
            }
            v[i] = -acc / d;
            // rescale to avoid overflow in clustered spectra
            let big = v[i].norm();
            if big > 1e100 {
                for e in v[i..=k].iter_mut() {
                    *e /= big;
                }
            }
        }
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = s.z.row(i)[..=k].iter().zip(&v[..=k]).fold(ZERO, |acc, (zz, vv)| acc + zz * vv);
        }
        let nrm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let vec: Vec<C64> = x.iter().map(|c| c / nrm).collect();
        let residual = super::residual_norm(a, lam, &vec);
        out.push(EigenPair { value: lam, vector: vec, residual, iterations: s.iterations, converged: true });
    }
    Ok(out)
}

/// LU with partial pivoting for small dense systems.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: DenseMatrix,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn new(a: &DenseMatrix, shift: C64) -> Result<Self, EigError> {
        let n = a.n;
        let mut lu = a.clone();
        for i in 0..n {
            lu[(i, i)] -= shift;
        }
        let mut piv = vec![0; n];
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| cabs1(lu[(i, k)]).total_cmp(&cabs1(lu[(j, k)]))).unwrap();
            piv[k] = p;
            if lu[(p, k)] == ZERO {
                return Err(EigError::Singular { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
            }
            let inv = ONE / lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] * inv;
                lu[(i, k)] = l;
                if l != ZERO {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= l * u;
                    }
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn solve(&self, b: &mut [C64]) {
        let n = self.lu.n;
        // rows were swapped in full, so L is stored in the final row order
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for k in 0..n {
            let bk = b[k];
            for i in k + 1..n {
                b[i] -= self.lu[(i, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * b[j];
            }
            b[i] = acc / self.lu[(i, i)];
        }
    }
}
