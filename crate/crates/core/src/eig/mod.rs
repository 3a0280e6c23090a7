//! Eigenvalue machinery: a dense oracle, banded LU, Hermitian inertia counts,
//! shift-invert Arnoldi, spectrum matching and resolvent probes.

pub mod arnoldi;
pub mod banded;
pub mod dense;
pub mod inertia;
pub mod matching;
pub mod scan;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

pub use arnoldi::{shift_invert_arnoldi, ArnoldiOptions, ArnoldiResult};
pub use banded::{lu_banded, BandedLu};
pub use dense::{dense_eigenvalues, dense_eigs, DenseMatrix};
pub use inertia::{count_below, count_in_interval};
pub use matching::{cluster_by_real_part, match_spectra, Cluster, Matching};
pub use scan::{eigs_in_rectangle, resolvent_norm_probe, Rectangle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is singular to working precision (zero pivot at step {pivot})")]
    Singular { pivot: usize },
    #[error("iteration did not converge ({found} of {wanted} eigenvalues)")]
    NotConverged { found: usize, wanted: usize },
    #[error("dense solver refused N = {n} above cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("I/O error: {0}")]
    Io(String),
}

/// Anything that can be multiplied against a vector.
pub trait LinearMap {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
}

/// An eigenvalue with a unit eigenvector and a freshly recomputed residual
/// `‖Av − λv‖₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: C64,
    #[serde(skip)]
    pub vector: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    // xᴴ y
    x.iter().zip(y).fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
}

/// `‖A v − λ v‖₂` from a fresh matrix-vector product.
pub fn residual_norm<M: LinearMap + ?Sized>(a: &M, lambda: C64, v: &[C64]) -> f64 {
    let mut av = vec![C64::new(0.0, 0.0); v.len()];
    a.apply_into(v, &mut av);
    av.iter().zip(v).map(|(p, q)| (p - lambda * q).norm_sqr()).sum::<f64>().sqrt()
}

/// Default cap on the dimension accepted by the dense oracle.
pub const DENSE_CAP: usize = 2000;

pub fn dense_eigs_capped(a: &DenseMatrix, cap: usize) -> Result<Vec<EigenPair>, EigError> {
    if a.n() > cap {
        return Err(EigError::TooLarge { n: a.n(), cap });
    }
    dense_eigs(a)
}

/// Eigenpairs as CSV: `re,im,residual,flags`.
pub fn write_eigenpairs_csv<W: Write>(pairs: &[EigenPair], mut w: W) -> std::io::Result<()> {
    writeln!(w, "re,im,residual,flags")?;
    for p in pairs {
        let flags = if p.converged { "converged" } else { "unconverged" };
        writeln!(w, "{:.17e},{:.17e},{:.6e},{}", p.value.re, p.value.im, p.residual, flags)?;
    }
    Ok(())
}

pub const VECTOR_MAGIC: &[u8; 8] = b"MSEVEC01";

/// Binary vector dump: 8-byte magic, `N` as little-endian u64, then `N`
/// interleaved little-endian `f64` pairs `(re, im)`.
pub fn write_vector_binary<W: Write>(v: &[C64], mut w: W) -> std::io::Result<()> {
    w.write_all(VECTOR_MAGIC)?;
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for z in v {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_vector_binary<R: Read>(mut r: R) -> Result<Vec<C64>, EigError> {
    let io = |e: std::io::Error| EigError::Io(e.to_string());
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(io)?;
    if &head[..8] != VECTOR_MAGIC {
        return Err(EigError::Io("bad magic in vector file".into()));
    }
    let n = u64::from_le_bytes(head[8..].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; 16 * n];
    r.read_exact(&mut buf).map_err(io)?;
    Ok(buf
        .chunks_exact(16)
        .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_binary_round_trip() {
        let v = vec![C64::new(1.5, -2.0), C64::new(0.0, 1e-300), C64::new(-3.25, 7.0)];
        let mut buf = Vec::new();
        write_vector_binary(&v, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16 * v.len());
        assert_eq!(read_vector_binary(&buf[..]).unwrap(), v);
        buf[0] = b'X';
        assert!(read_vector_binary(&buf[..]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_pair() {
        let p = EigenPair { value: C64::new(1.0, -0.5), vector: vec![], residual: 1e-12, iterations: 3, converged: true };
        let mut buf = Vec::new();
        write_eigenpairs_csv(&[p.clone(), p], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.lines().nth(1).unwrap().ends_with("converged"));
    }

    #[test]
    fn dense_cap_is_enforced() {
        let a = DenseMatrix::identity(4);
        assert!(matches!(dense_eigs_capped(&a, 3), Err(EigError::TooLarge { .. })));
        assert_eq!(dense_eigs_capped(&a, 4).unwrap().len(), 4);
    }
}
