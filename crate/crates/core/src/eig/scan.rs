//! All eigenvalues inside a rectangle of the complex plane, and resolvent norm probes.

use serde::{Deserialize, Serialize};

use super::arnoldi::{arnoldi_with_inverse, ArnoldiOptions};
use super::banded::{lu_banded, ShiftInvert};
use super::{dot, norm2, EigError, EigenPair};
use crate::assembly::ComplexSparseMatrix;
use crate::C64;

/// `[re_lo, re_hi] × [im_lo, im_hi]`, closed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl Rectangle {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Self {
        Self { re_lo, re_hi, im_lo, im_hi }
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_lo && z.re <= self.re_hi && z.im >= self.im_lo && z.im <= self.im_hi
    }

    /// Membership in the rectangle grown by `eps` on every side.
    pub fn contains_within(&self, z: C64, eps: f64) -> bool {
        z.re >= self.re_lo - eps && z.re <= self.re_hi + eps && z.im >= self.im_lo - eps && z.im <= self.im_hi + eps
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.re_lo + self.re_hi), 0.5 * (self.im_lo + self.im_hi))
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * (self.re_hi - self.re_lo).hypot(self.im_hi - self.im_lo)
    }

    fn split(&self) -> (Rectangle, Rectangle) {
        if self.re_hi - self.re_lo >= self.im_hi - self.im_lo {
            let mid = 0.5 * (self.re_lo + self.re_hi);
            (Rectangle { re_hi: mid, ..*self }, Rectangle { re_lo: mid, ..*self })
        } else {
            let mid = 0.5 * (self.im_lo + self.im_hi);
            (Rectangle { im_hi: mid, ..*self }, Rectangle { im_lo: mid, ..*self })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub k_initial: usize,
    pub k_max: usize,
    pub tol: f64,
    pub max_depth: usize,
    /// Arnoldi restarts per shift.
    pub max_restarts: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { k_initial: 12, k_max: 96, tol: 1e-10, max_depth: 6, max_restarts: 20 }
    }
}

#[derive(Clone, Debug)]
pub struct RectangleScan {
    pub pairs: Vec<EigenPair>,
    /// Shifts used, with the radius of the disc certified around each.
    pub discs: Vec<(C64, f64)>,
    /// True when the certified discs cover the whole rectangle.
    pub complete: bool,
}

/// Finds every eigenvalue of `a` inside `rect`, grown by `10·tol·‖A‖₁`.
///
/// Each shift certifies the disc out to its nearest unconverged Ritz value,
/// or out to the `k`-th eigenvalue when all `k` converged. A rectangle is
/// done once its circumscribed disc is certified. Otherwise `k` is doubled
/// up to `k_max` while everything converges, and the rectangle is halved
/// when it does not.
pub fn eigs_in_rectangle(a: &ComplexSparseMatrix, rect: Rectangle, opts: &ScanOptions) -> Result<RectangleScan, EigError> {
    let mut out = RectangleScan { pairs: vec![], discs: vec![], complete: true };
    let a_norm = a.one_norm();
    scan_rec(a, a_norm, rect, opts, 0, &mut out)?;
    // the same eigenpair may be found from two shifts
    let mut kept: Vec<EigenPair> = Vec::new();
    let scale = a.one_norm().max(1.0);
    for p in out.pairs.drain(..) {
        let dup = kept.iter().any(|q| {
            (q.value - p.value).norm() <= 1e-7 * scale && dot(&q.vector, &p.vector).norm() > 0.9
        });
        if !dup {
            kept.push(p);
        }
    }
    kept.sort_by(|p, q| p.value.re.total_cmp(&q.value.re).then(p.value.im.total_cmp(&q.value.im)));
    out.pairs = kept;
    Ok(out)
}

fn scan_rec(
    a: &ComplexSparseMatrix,
    a_norm: f64,
    rect: Rectangle,
    opts: &ScanOptions,
    depth: usize,
    out: &mut RectangleScan,
) -> Result<(), EigError> {
    // eigenvalues on the boundary come back with roundoff on either side
    let eps = 10.0 * opts.tol * a_norm;
    let need = rect.half_diagonal() + eps;
    let n = a.dim();
    let mut c = rect.center();
    let lu = match lu_banded(a, c) {
        Ok(lu) => lu,
        Err(EigError::Singular { .. }) => {
            // the center is an eigenvalue; nudge off it
            c += C64::new(1e-9 * need.max(1e-12), 1e-9 * need.max(1e-12));
            lu_banded(a, c)?
        }
        Err(e) => return Err(e),
    };
    let op = ShiftInvert { lu: &lu };
    let mut k = opts.k_initial.min(n).max(1);
    loop {
        let ao = ArnoldiOptions::new(k).with_tol(opts.tol).with_restarts(opts.max_restarts);
        let res = arnoldi_with_inverse(a, &op, c, a_norm, &ao)?;
        let radius = if res.all_converged {
            if k == n {
                f64::INFINITY
            } else {
                res.pairs.iter().map(|p| (p.value - c).norm()).fold(0.0, f64::max)
            }
        } else {
            res.pairs.iter().filter(|p| !p.converged).map(|p| (p.value - c).norm()).fold(f64::INFINITY, f64::min)
        };
        let strictly_inside = |p: &EigenPair| p.converged && (p.value - c).norm() < radius;
        if radius > need {
            out.discs.push((c, radius));
            out.pairs.extend(res.pairs.into_iter().filter(|p| strictly_inside(p) && rect.contains_within(p.value, eps)));
            return Ok(());
        }
        if res.all_converged && k < opts.k_max.min(n) {
            k = (2 * k).min(opts.k_max).min(n);
            continue;
        }
        if depth >= opts.max_depth {
            out.complete = false;
            out.discs.push((c, radius));
            out.pairs.extend(res.pairs.into_iter().filter(|p| p.converged && rect.contains_within(p.value, eps)));
            return Ok(());
        }
        let (r1, r2) = rect.split();
        scan_rec(a, a_norm, r1, opts, depth + 1, out)?;
        return scan_rec(a, a_norm, r2, opts, depth + 1, out);
    }
}

/// Estimate of `‖(A - z)⁻¹‖₂` by power iteration on `(A - z)⁻ᴴ(A - z)⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventProbe {
    pub z: C64,
    pub norm: f64,
    pub iterations: usize,
}

pub fn resolvent_norm_probe(a: &ComplexSparseMatrix, z: C64, max_iter: usize, rtol: f64) -> Result<ResolventProbe, EigError> {
    let lu = lu_banded(a, z)?;
    let n = a.dim();
    // deterministic, non-degenerate start
    let mut x: Vec<C64> = (0..n).map(|i| C64::new(1.0 + (i as f64 * 0.618).sin() * 0.5, (i as f64 * 0.37).cos() * 0.5)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|e| *e /= nx);
    let mut est = 0.0;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        lu.solve(&mut x);
        lu.solve_adjoint(&mut x);
        let nx = norm2(&x);
        let new = nx.sqrt();
        x.iter_mut().for_each(|e| *e /= nx);
        if (new - est).abs() <= rtol * new {
            est = new;
            break;
        }
        est = new;
    }
    Ok(ResolventProbe { z, norm: est, iterations: it })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::SymmetryTag;

    fn diag(vals: &[C64]) -> ComplexSparseMatrix {
        ComplexSparseMatrix::from_triplets(
            vals.len(),
            vals.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(),
            SymmetryTag::None,
        )
        .unwrap()
    }

    #[test]
    fn finds_exactly_the_eigenvalues_inside() {
        let vals: Vec<C64> = (0..200).map(|i| C64::new(0.01 * i as f64, -0.003 * (i % 7) as f64)).collect();
        let a = diag(&vals);
        let rect = Rectangle::new(0.3, 0.9, -0.01, 0.0);
        let opts = ScanOptions { k_initial: 4, k_max: 8, ..Default::default() };
        let s = eigs_in_rectangle(&a, rect, &opts).unwrap();
        let want = vals.iter().filter(|v| rect.contains(**v)).count();
        assert!(s.complete);
        assert_eq!(s.pairs.len(), want);
        assert!(s.discs.len() > 1);
    }

    #[test]
    fn resolvent_of_normal_matrix_is_inverse_distance() {
        let vals: Vec<C64> = (0..50).map(|i| C64::new(i as f64, 0.0)).collect();
        let a = diag(&vals);
        let p = resolvent_norm_probe(&a, C64::new(3.2, 0.1), 200, 1e-12).unwrap();
        let want = 1.0 / C64::new(0.2, 0.1).norm();
        assert!((p.norm - want).abs() < 1e-8 * want, "{} vs {}", p.norm, want);
    }
}
