//! Shift-invert Arnoldi with full reorthogonalization and thick restarts.
//!
//! The basis `W` and its image `Z = (A - z₀)⁻¹ W` are kept side by side, so
//! the projected matrix `G = Wᴴ Z` and restarted bases are formed without
//! extra solves. Convergence is judged on the true residual `‖Ax - λx‖`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::banded::{lu_banded, ShiftInvert};
use super::dense::{dense_eigs, DenseMatrix};
use super::{dot, norm2, residual_norm, EigError, EigenPair, LinearMap};
use crate::assembly::ComplexSparseMatrix;
use crate::C64;

const ZERO: C64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArnoldiOptions {
    pub k: usize,
    pub tol: f64,
    pub max_restarts: usize,
    /// Basis dimension; `None` means `2k + 20`.
    pub basis_dim: Option<usize>,
    pub seed: u64,
}

impl ArnoldiOptions {
    pub fn new(k: usize) -> Self {
        Self { k, tol: 1e-10, max_restarts: 20, basis_dim: None, seed: 0x5eed }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_restarts(mut self, r: usize) -> Self {
        self.max_restarts = r;
        self
    }

    pub fn with_basis_dim(mut self, m: usize) -> Self {
        self.basis_dim = Some(m);
        self
    }
}

#[derive(Clone, Debug)]
pub struct ArnoldiResult {
    /// The `k` Ritz pairs nearest the shift, ordered by distance to it.
    pub pairs: Vec<EigenPair>,
    pub shift: C64,
    pub all_converged: bool,
    pub restarts: usize,
    pub solves: usize,
    /// `‖A‖₁`, the scale used in the convergence test.
    pub a_norm: f64,
}

impl ArnoldiResult {
    pub fn converged(&self) -> impl Iterator<Item = &EigenPair> {
        self.pairs.iter().filter(|p| p.converged)
    }
}

/// Factors `A - z₀` and runs shift-invert Arnoldi for the `k` eigenvalues
/// nearest `z₀`.
pub fn shift_invert_arnoldi(a: &ComplexSparseMatrix, z0: C64, opts: &ArnoldiOptions) -> Result<ArnoldiResult, EigError> {
    let lu = lu_banded(a, z0)?;
    arnoldi_with_inverse(a, &ShiftInvert { lu: &lu }, z0, a.one_norm(), opts)
}

fn orthogonalize(basis: &[Vec<C64>], v: &mut [C64]) -> Vec<C64> {
    let mut coef = vec![ZERO; basis.len()];
    for _ in 0..2 {
        for (c, w) in coef.iter_mut().zip(basis) {
            let h = dot(w, v);
            *c += h;
            for (vi, wi) in v.iter_mut().zip(w) {
                *vi -= h * wi;
            }
        }
    }
    coef
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Orthonormal columns spanning the given small vectors (modified Gram-Schmidt, twice).
fn small_qr(cols: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(cols.len());
    for c in cols {
        let mut v = c.clone();
        let before = norm2(&v);
        orthogonalize(&out, &mut v);
        let nv = norm2(&v);
        if nv > 1e-10 * before.max(f64::MIN_POSITIVE) {
            v.iter_mut().for_each(|x| *x /= nv);
            out.push(v);
        }
    }
    out
}

fn combine(cols: &[Vec<C64>], coeffs: &[C64], n: usize) -> Vec<C64> {
    let mut x = vec![ZERO; n];
    for (col, &c) in cols.iter().zip(coeffs) {
        if c == ZERO {
            continue;
        }
        for (xi, wi) in x.iter_mut().zip(col) {
            *xi += c * wi;
        }
    }
    x
}

/// Arnoldi on an arbitrary inverse `op = (A - z₀)⁻¹`.
pub fn arnoldi_with_inverse<A: LinearMap + ?Sized, O: LinearMap + ?Sized>(
    a: &A,
    op: &O,
    z0: C64,
    a_norm: f64,
    opts: &ArnoldiOptions,
) -> Result<ArnoldiResult, EigError> {
    let n = a.dim();
    if op.dim() != n {
        return Err(EigError::DimensionMismatch { expected: n, got: op.dim() });
    }
    let k = opts.k;
    if k == 0 || k > n {
        return Err(EigError::InvalidArgument(format!("k = {k} must be in 1..={n}")));
    }
    let m = opts.basis_dim.unwrap_or(2 * k + 20).max(k + 2).min(n);
    let keep_target = (m / 2).max(k).min(m.saturating_sub(1)).max(1);
    let thresh = opts.tol * a_norm.max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut w: Vec<Vec<C64>> = vec![random_unit(n, &mut rng)];
    let mut z: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut solves = 0usize;
    let mut buf = vec![ZERO; n];
    let mut restarts = 0usize;
    loop {
        // complete Z for any new columns, then expand W up to m columns
        loop {
            while z.len() < w.len() {
                op.apply_into(&w[z.len()], &mut buf);
                solves += 1;
                z.push(buf.clone());
            }
            if w.len() >= m {
                break;
            }
            let mut c = z.last().unwrap().clone();
            let before = norm2(&c);
            orthogonalize(&w, &mut c);
            let mut nc = norm2(&c);
            if !(nc > 1e-12 * before) {
                // invariant subspace reached: continue from a fresh direction
                c = random_unit(n, &mut rng);
                orthogonalize(&w, &mut c);
                nc = norm2(&c);
                if !(nc > 1e-12) {
                    break;
                }
            }
            c.iter_mut().for_each(|x| *x /= nc);
            w.push(c);
        }
        let j = w.len();
        let mut g = DenseMatrix::zeros(j);
        for r in 0..j {
            for c in 0..j {
                g[(r, c)] = dot(&w[r], &z[c]);
            }
        }
        let mut ritz = dense_eigs(&g)?;
        ritz.retain(|p| p.value.norm() > 0.0);
        ritz.sort_by(|p, q| q.value.norm().total_cmp(&p.value.norm()));
        let mut pairs = Vec::with_capacity(k);
        for p in ritz.iter().take(k) {
            let lam = z0 + Complex64::new(1.0, 0.0) / p.value;
            let mut x = combine(&w, &p.vector, n);
            let nx = norm2(&x);
            x.iter_mut().for_each(|e| *e /= nx);
            let res = residual_norm(a, lam, &x);
            pairs.push(EigenPair { value: lam, vector: x, residual: res, iterations: restarts, converged: res <= thresh });
        }
        let done = pairs.len() == k && pairs.iter().all(|p| p.converged);
        if done || restarts >= opts.max_restarts || j == n {
            pairs.sort_by(|p, q| (p.value - z0).norm().total_cmp(&(q.value - z0).norm()).then(p.value.re.total_cmp(&q.value.re)));
            let all_converged = pairs.len() == k && pairs.iter().all(|p| p.converged);
            return Ok(ArnoldiResult { pairs, shift: z0, all_converged, restarts, solves, a_norm });
        }
        restarts += 1;
        // next Arnoldi direction, orthogonal to the whole current basis
        let mut f = z[j - 1].clone();
        let before = norm2(&f);
        orthogonalize(&w, &mut f);
        let mut nf = norm2(&f);
        if !(nf > 1e-12 * before) {
            f = random_unit(n, &mut rng);
            orthogonalize(&w, &mut f);
            nf = norm2(&f);
        }
        f.iter_mut().for_each(|x| *x /= nf);
        let keep = keep_target.min(ritz.len());
        let ys: Vec<Vec<C64>> = ritz.iter().take(keep).map(|p| p.vector.clone()).collect();
        let q = small_qr(&ys);
        let new_w: Vec<Vec<C64>> = q.iter().map(|qc| combine(&w, qc, n)).collect();
        let new_z: Vec<Vec<C64>> = q.iter().map(|qc| combine(&z, qc, n)).collect();
        w = new_w;
        z = new_z;
        // re-orthogonalize f against the rotated basis for safety
        orthogonalize(&w, &mut f);
        let nf = norm2(&f);
        f.iter_mut().for_each(|x| *x /= nf);
        w.push(f);
    }
}

/// `(A - z₀)⁻¹` from a dense LU, for oracle tests on small matrices.
pub struct DenseShiftInvert {
    lu: super::dense::DenseLu,
    n: usize,
}

impl DenseShiftInvert {
    pub fn new(a: &DenseMatrix, z0: C64) -> Result<Self, EigError> {
        Ok(Self { lu: super::dense::DenseLu::new(a, z0)?, n: a.n() })
    }
}

impl LinearMap for DenseShiftInvert {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.lu.solve(y);
    }
}
