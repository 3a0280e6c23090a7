//! Finite-difference discretization on a truncated rectangle with Dirichlet
//! boundary, for both the self-adjoint operators and the distorted ones.
//!
//! Both kinds share one stencil routine fed by [`DistortedCoefficients`]; the
//! self-adjoint kind simply uses identity coefficients, which makes `Q_θ` at
//! `θ = 0` bit-identical to `P`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::DistortedCoefficients;
use crate::eig::dense::DenseMatrix;
use crate::eig::LinearMap;
use crate::potential::{HamiltonianParams, TotalPotential};
use crate::C64;

const ZERO: C64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("grid needs at least 3 interior points per direction, got {nx} x {ny}")]
    GridTooSmall { nx: usize, ny: usize },
    #[error("degenerate domain [{x_min}, {x_max}] x [{y_min}, {y_max}]")]
    DegenerateDomain { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
    #[error("coefficients tabulated on a {got_nx} x {got_ny} grid, operator grid is {nx} x {ny}")]
    GridMismatch { nx: usize, ny: usize, got_nx: usize, got_ny: usize },
    #[error("entry ({row}, {col}) outside an {n} x {n} matrix")]
    OutOfRange { row: usize, col: usize, n: usize },
    #[error("vector of length {got} applied to an {n} x {n} matrix")]
    DimensionMismatch { n: usize, got: usize },
    #[error("potential evaluation failed: {0}")]
    Potential(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Domain {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self { x_min, x_max, y_min, y_max }
    }
}

/// Interior nodes of a rectangle; node `(i, j)` has index `i + nx·j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

pub fn make_grid(domain: Domain, nx: usize, ny: usize) -> Result<Grid2D, AssemblyError> {
    if nx < 3 || ny < 3 {
        return Err(AssemblyError::GridTooSmall { nx, ny });
    }
    let Domain { x_min, x_max, y_min, y_max } = domain;
    if !(x_max > x_min && y_max > y_min) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
        return Err(AssemblyError::DegenerateDomain { x_min, x_max, y_min, y_max });
    }
    Ok(Grid2D { domain, nx, ny, dx: (x_max - x_min) / (nx + 1) as f64, dy: (y_max - y_min) / (ny + 1) as f64 })
}

impl Grid2D {
    /// Grid with spacing as close as possible to `d` in both directions.
    pub fn with_spacing(domain: Domain, d: f64) -> Result<Self, AssemblyError> {
        let nx = (((domain.x_max - domain.x_min) / d).round() as usize).saturating_sub(1);
        let ny = (((domain.y_max - domain.y_min) / d).round() as usize).saturating_sub(1);
        make_grid(domain, nx, ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    #[inline]
    pub fn coords_of(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.domain.x_min + (i + 1) as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.domain.y_min + (j + 1) as f64 * self.dy
    }

    /// Abscissa of the half node between `i - 1` and `i` (`i = 0..=nx`).
    #[inline]
    pub fn x_half(&self, i: usize) -> f64 {
        self.domain.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn abscissas(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ordinates(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryTag {
    HermitianExpected,
    ComplexSymmetricExpected,
    None,
}

/// Row-compressed complex matrix with recorded bandwidths.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    kl: usize,
    ku: usize,
    symmetry: SymmetryTag,
}

impl ComplexSparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, C64)>, symmetry: SymmetryTag) -> Result<Self, AssemblyError> {
        if let Some(&(row, col, _)) = t.iter().find(|e| e.0 >= n || e.1 >= n) {
            return Err(AssemblyError::OutOfRange { row, col, n });
        }
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for (i, j, v) in t {
            match rows[i].last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => rows[i].push((j, v)),
            }
        }
        Ok(Self::from_rows(rows, symmetry))
    }

    fn from_rows(rows: Vec<Vec<(usize, C64)>>, symmetry: SymmetryTag) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        let (mut kl, mut ku) = (0, 0);
        for (i, r) in rows.into_iter().enumerate() {
            for (j, v) in r {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals, kl, ku, symmetry }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn bandwidth(&self) -> usize {
        self.kl.max(self.ku)
    }

    pub fn symmetry(&self) -> SymmetryTag {
        self.symmetry
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => ZERO,
        }
    }

    /// `y = A x`, accumulating each row left to right.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>, AssemblyError> {
        if x.len() != self.n {
            return Err(AssemblyError::DimensionMismatch { n: self.n, got: x.len() });
        }
        let mut y = vec![ZERO; self.n];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for (j, v) in self.row_entries(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for (j, v) in self.cols.iter().zip(&self.vals) {
            col[*j] += v.norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row_entries(i) {
                worst = worst.max((v - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `max |A_ij - A_ji|`.
    pub fn symmetric_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row_entries(i) {
                worst = worst.max((v - self.get(j, i)).norm());
            }
        }
        worst
    }

    pub fn pattern_is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.row_entries(i).all(|(j, _)| {
                let r = self.row_ptr[j]..self.row_ptr[j + 1];
                self.cols[r].binary_search(&i).is_ok()
            })
        })
    }

    /// Plain-text coordinate dump: a header line, then `row col re im` per entry (0-based).
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# n={} nnz={} symmetry={:?}", self.n, self.nnz(), self.symmetry)?;
        for i in 0..self.n {
            for (j, v) in self.row_entries(i) {
                writeln!(w, "{} {} {:.17e} {:.17e}", i, j, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

impl LinearMap for ComplexSparseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            let mut acc = ZERO;
            for (j, v) in self.cols[r.clone()].iter().zip(&self.vals[r]) {
                acc += v * x[*j];
            }
            *yi = acc;
        }
    }
}

pub enum OperatorKind<'a> {
    /// `P` or `P^int` from a real total potential.
    SelfAdjoint(&'a dyn TotalPotential),
    /// `Q_θ` or `Q^ext_θ` from coefficients tabulated on the same grid.
    Distorted(&'a DistortedCoefficients),
}

/// Assembles `½(h m D_x + By)² + ½h²(D_y - n D_x)² + W` with second-order
/// differences; `m = 1`, `n = 0`, `W = U` for the self-adjoint kind.
pub fn assemble_operator(
    kind: OperatorKind<'_>,
    grid: &Grid2D,
    params: &HamiltonianParams,
) -> Result<ComplexSparseMatrix, AssemblyError> {
    let owned;
    let (coef, hermitian) = match kind {
        OperatorKind::SelfAdjoint(u) => {
            owned = DistortedCoefficients::undistorted(grid, u);
            (&owned, true)
        }
        OperatorKind::Distorted(c) => {
            if c.nx != grid.nx || c.ny != grid.ny {
                return Err(AssemblyError::GridMismatch { nx: grid.nx, ny: grid.ny, got_nx: c.nx, got_ny: c.ny });
            }
            (c, false)
        }
    };
    let rows = stencil_rows(coef, grid, params);
    let mut a = ComplexSparseMatrix::from_rows(rows, SymmetryTag::None);
    a.symmetry = if hermitian {
        SymmetryTag::HermitianExpected
    } else if a.symmetric_defect() == 0.0 {
        SymmetryTag::ComplexSymmetricExpected
    } else {
        SymmetryTag::None
    };
    Ok(a)
}

fn stencil_rows(c: &DistortedCoefficients, g: &Grid2D, p: &HamiltonianParams) -> Vec<Vec<(usize, C64)>> {
    let (nx, ny) = (g.nx, g.ny);
    let h = p.h;
    let kin_x = 0.5 * h * h / (g.dx * g.dx);
    let kin_y = 0.5 * h * h / (g.dy * g.dy);
    let mixed = 0.5 * h * h / (4.0 * g.dx * g.dy);
    // corner couplings between rows j and j+1 are emitted in both directions
    // whenever any n that either row reads is nonzero, keeping the pattern symmetric
    let nz_row: Vec<bool> = (0..ny).map(|j| (0..nx).any(|i| c.n[i + nx * j] != ZERO)).collect();
    let pair: Vec<bool> = (0..ny)
        .map(|j| (j.saturating_sub(1)..=(j + 2).min(ny - 1)).any(|jj| nz_row[jj]))
        .collect();
    (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            let y = g.y(j);
            let mag = p.b_field * y * h / (2.0 * g.dx);
            let m = c.m[k];
            let n = c.n[k];
            let mp = c.m_half[(i + 1) + (nx + 1) * j];
            let mm = c.m_half[i + (nx + 1) * j];
            let np = c.n_half[(i + 1) + (nx + 1) * j];
            let nm = c.n_half[i + (nx + 1) * j];
            let ip = m * mp + n * np;
            let im_ = m * mm + n * nm;
            let east = -(ip * kin_x) - C64::new(0.0, mag) * m;
            let west = -(im_ * kin_x) + C64::new(0.0, mag) * m;
            let mut w = c.w[k];
            if w.im == 0.0 {
                w.im = 0.0;
            }
            let diag = (ip + im_) * kin_x + 2.0 * kin_y + 0.5 * p.b_field * p.b_field * y * y + w;
            let mut row: Vec<(usize, C64)> = Vec::with_capacity(9);
            let north = j + 1 < ny && pair[j];
            let south = j > 0 && pair[j - 1];
            let nn = if north { c.n[i + nx * (j + 1)] + n } else { ZERO };
            let ns = if south { c.n[i + nx * (j - 1)] + n } else { ZERO };
            if j > 0 {
                if south && i > 0 {
                    row.push((k - nx - 1, ns * mixed));
                }
                row.push((k - nx, C64::new(-kin_y, 0.0)));
                if south && i + 1 < nx {
                    row.push((k - nx + 1, -(ns * mixed)));
                }
            }
            if i > 0 {
                row.push((k - 1, west));
            }
            row.push((k, diag));
            if i + 1 < nx {
                row.push((k + 1, east));
            }
            if j + 1 < ny {
                if north && i > 0 {
                    row.push((k + nx - 1, -(nn * mixed)));
                }
                row.push((k + nx, C64::new(-kin_y, 0.0)));
                if north && i + 1 < nx {
                    row.push((k + nx + 1, nn * mixed));
                }
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;

    #[test]
    fn grid_examples() {
        let g = make_grid(Domain::new(0.0, 1.0, 0.0, 1.0), 3, 3).unwrap();
        assert_eq!((g.dx, g.dy, g.len()), (0.25, 0.25, 9));
        let g = make_grid(Domain::new(0.0, 2.0, 0.0, 1.0), 7, 3).unwrap();
        assert_eq!((g.dx, g.dy), (0.25, 0.25));
        for k in 0..g.len() {
            let (i, j) = g.coords_of(k);
            assert_eq!(g.index(i, j), k);
        }
        assert!(make_grid(Domain::new(0.0, 1.0, 0.0, 1.0), 2, 3).is_err());
        assert!(make_grid(Domain::new(1.0, 1.0, 0.0, 1.0), 3, 3).is_err());
    }

    #[test]
    fn five_point_example() {
        let g = make_grid(Domain::new(0.0, 1.0, 0.0, 1.0), 3, 3).unwrap();
        let p = HamiltonianParams::new(0.0, 1.0).unwrap();
        let a = assemble_operator(OperatorKind::SelfAdjoint(&PotentialSpec::zero()), &g, &p).unwrap();
        for k in 0..9 {
            let (i, j) = g.coords_of(k);
            // ½(2/dx² + 2/dy²) = 32 at d = 1/4
            assert_eq!(a.get(k, k), C64::new(32.0 + g.x(i), 0.0));
            if i + 1 < 3 {
                assert_eq!(a.get(k, k + 1), C64::new(-8.0, 0.0));
            }
            if j + 1 < 3 {
                assert_eq!(a.get(k, k + 3), C64::new(-8.0, 0.0));
            }
            assert!(a.row_nnz(k) <= 5);
        }
        assert_eq!(a.symmetry(), SymmetryTag::HermitianExpected);
        assert_eq!(a.hermitian_defect(), 0.0);
        assert!(a.bandwidth() <= g.nx + 1);
    }

    #[test]
    fn magnetic_self_adjoint_is_exactly_hermitian() {
        let g = make_grid(Domain::new(-1.0, 1.5, -1.2, 0.9), 11, 9).unwrap();
        let p = HamiltonianParams::new(1.7, 0.3).unwrap();
        let spec = PotentialSpec::new(vec![crate::potential::Term::GaussianBump {
            amplitude: 0.4,
            x0: 0.1,
            y0: -0.2,
            sigma: 0.5,
        }])
        .unwrap();
        let a = assemble_operator(OperatorKind::SelfAdjoint(&spec), &g, &p).unwrap();
        assert_eq!(a.hermitian_defect(), 0.0);
        assert!(a.pattern_is_symmetric());
    }

    #[test]
    fn apply_matches_dense_and_basis_columns() {
        let g = make_grid(Domain::new(-1.0, 1.0, -1.0, 1.0), 5, 4).unwrap();
        let p = HamiltonianParams::new(1.0, 0.2).unwrap();
        let a = assemble_operator(OperatorKind::SelfAdjoint(&PotentialSpec::zero()), &g, &p).unwrap();
        let d = a.to_dense();
        let n = a.dim();
        let x: Vec<C64> = (0..n).map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())).collect();
        let y = a.apply(&x).unwrap();
        let mut yd = vec![ZERO; n];
        d.apply_into(&x, &mut yd);
        for i in 0..n {
            assert!((y[i] - yd[i]).norm() <= 1e-14 * (1.0 + yd[i].norm()));
        }
        for k in [0, 7, n - 1] {
            let mut e = vec![ZERO; n];
            e[k] = C64::new(1.0, 0.0);
            let col = a.apply(&e).unwrap();
            for i in 0..n {
                assert_eq!(col[i], a.get(i, k));
            }
        }
        let id = ComplexSparseMatrix::from_triplets(4, (0..4).map(|i| (i, i, C64::new(1.0, 0.0))).collect(), SymmetryTag::HermitianExpected).unwrap();
        let v = vec![C64::new(1.0, 2.0); 4];
        assert_eq!(id.apply(&v).unwrap(), v);
        assert!(id.apply(&v[..3]).is_err());
    }

    #[test]
    fn coordinate_dump_lists_every_entry() {
        let a = ComplexSparseMatrix::from_triplets(
            2,
            vec![(0, 0, C64::new(1.0, 0.0)), (1, 0, C64::new(0.0, -2.0)), (1, 0, C64::new(0.5, 0.0))],
            SymmetryTag::None,
        )
        .unwrap();
        let mut buf = Vec::new();
        a.write_coordinate(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.lines().nth(2).unwrap().starts_with("1 0 5.0"));
    }
}
