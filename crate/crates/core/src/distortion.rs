//! Exterior complex translation `x -> φ(x, y) = x + θ(1 - χ₀(x, y))` and the
//! coefficient fields of the distorted operator
//!
//! `Q_θ = ½(h m D_x + By)² + ½h²(D_y - n D_x)² + φ + V(φ, y)`,
//! `m = 1/∂ₓφ`, `n = ∂ᵧφ/∂ₓφ`.
//!
//! `Q_θ` is the translated operator conjugated by the square root of the
//! Jacobian, so it has the same eigenvalues.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{assemble_operator, Grid2D, OperatorKind};
use crate::eig::arnoldi::{shift_invert_arnoldi, ArnoldiOptions};
use crate::eig::matching::match_spectra;
use crate::eig::EigError;
use crate::potential::{HamiltonianParams, PotentialError, TotalPotential};
use crate::C64;

const ZERO: C64 = Complex64::new(0.0, 0.0);
const ONE: C64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistortionError {
    #[error("invalid distortion parameter: {0}")]
    InvalidParameter(String),
    #[error("|θ ∂χ₀| = {value} >= 1 makes the translated map singular")]
    SingularMap { value: f64 },
    #[error("Im θ = {0} > 0 is on the wrong side for outgoing resonances")]
    WrongSide(f64),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("assembly failed: {0}")]
    Assembly(String),
    #[error(transparent)]
    Eig(#[from] EigError),
}

fn bump(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

fn bump_derivative(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp() / (s * s)
    } else {
        0.0
    }
}

/// C^∞ step: exactly 1 for `t <= 0`, exactly 0 for `t >= 1`, decreasing between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let a = bump(1.0 - t);
    a / (a + bump(t))
}

pub fn smooth_step_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let (a, b) = (bump(1.0 - t), bump(t));
    let (da, db) = (-bump_derivative(1.0 - t), bump_derivative(t));
    (da * b - a * db) / ((a + b) * (a + b))
}

/// `max |d/dt smooth_step|`, sampled once.
pub fn smooth_step_max_slope() -> f64 {
    static SLOPE: OnceLock<f64> = OnceLock::new();
    *SLOPE.get_or_init(|| (1..20000).map(|k| smooth_step_derivative(k as f64 / 20000.0).abs()).fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffGeometry {
    /// `χ₀` depends on `|x - cx|` only.
    Strip,
    /// `χ₀` depends on the distance to `(cx, cy)`.
    #[default]
    Disc,
}

/// `χ₀ = smooth_step((ρ - plateau)/width)` with `ρ` the strip or disc distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub plateau: f64,
    pub width: f64,
    pub geometry: CutoffGeometry,
    pub center: (f64, f64),
}

pub fn build_cutoff(r0: f64, w: f64, geometry: CutoffGeometry, center: (f64, f64)) -> Result<CutoffProfile, DistortionError> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(DistortionError::InvalidParameter(format!("R0 must be > 0, got {r0}")));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(DistortionError::InvalidParameter(format!("ramp width must be > 0, got {w}")));
    }
    Ok(CutoffProfile { plateau: r0 + 1.0, width: w, geometry, center })
}

impl CutoffProfile {
    fn rho(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        match self.geometry {
            CutoffGeometry::Strip => (dx.abs(), dx.signum(), 0.0),
            CutoffGeometry::Disc => {
                let r = dx.hypot(dy);
                if r > 0.0 {
                    (r, dx / r, dy / r)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        }
    }

    pub fn chi(&self, x: f64, y: f64) -> f64 {
        smooth_step((self.rho(x, y).0 - self.plateau) / self.width)
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        let (r, ux, uy) = self.rho(x, y);
        let s = smooth_step_derivative((r - self.plateau) / self.width) / self.width;
        if s == 0.0 {
            return (0.0, 0.0);
        }
        (s * ux, s * uy)
    }

    pub fn max_gradient(&self) -> f64 {
        smooth_step_max_slope() / self.width
    }

    /// Largest `ρ` where `χ₀ > 0`.
    pub fn outer_radius(&self) -> f64 {
        self.plateau + self.width
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaMode {
    #[default]
    Fixed,
    /// `θ = -i M̃ h log(1/h)`.
    HLogH,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionParams {
    #[serde(rename = "R0")]
    pub r0: f64,
    pub ramp_width: f64,
    #[serde(default)]
    pub theta_re: f64,
    #[serde(default)]
    pub theta_im: f64,
    #[serde(default)]
    pub mode: ThetaMode,
    #[serde(default)]
    pub geometry: CutoffGeometry,
    #[serde(default)]
    pub center: (f64, f64),
    /// `M̃` for the `h-log-h` mode.
    #[serde(default)]
    pub m_tilde: f64,
}

impl DistortionParams {
    pub fn fixed(r0: f64, ramp_width: f64, theta: C64, geometry: CutoffGeometry) -> Self {
        Self {
            r0,
            ramp_width,
            theta_re: theta.re,
            theta_im: theta.im,
            mode: ThetaMode::Fixed,
            geometry,
            center: (0.0, 0.0),
            m_tilde: 0.0,
        }
    }

    pub fn cutoff(&self) -> Result<CutoffProfile, DistortionError> {
        build_cutoff(self.r0, self.ramp_width, self.geometry, self.center)
    }

    /// The translation `θ` used at semiclassical parameter `h`.
    pub fn theta(&self, h: f64) -> C64 {
        match self.mode {
            ThetaMode::Fixed => C64::new(self.theta_re, self.theta_im),
            ThetaMode::HLogH => C64::new(0.0, -self.m_tilde * h * (1.0 / h).ln()),
        }
    }

    /// Checks the cutoff, the sign of `Im θ` and `|θ ∂χ₀| < 1`.
    pub fn validate(&self, h: f64) -> Result<CutoffProfile, DistortionError> {
        let cut = self.cutoff()?;
        let theta = self.theta(h);
        if !(theta.re.is_finite() && theta.im.is_finite()) {
            return Err(DistortionError::InvalidParameter("θ must be finite".into()));
        }
        if theta.im > 0.0 {
            return Err(DistortionError::WrongSide(theta.im));
        }
        if self.mode == ThetaMode::HLogH && !(self.m_tilde > 0.0) {
            return Err(DistortionError::InvalidParameter("h-log-h mode needs m_tilde > 0".into()));
        }
        let worst = theta.norm() * cut.max_gradient();
        if worst >= 1.0 {
            return Err(DistortionError::SingularMap { value: worst });
        }
        Ok(cut)
    }
}

/// `φ` and its partial derivatives at a real point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phi {
    pub phi: C64,
    pub phi_x: C64,
    pub phi_y: C64,
}

pub fn phi_theta(cut: &CutoffProfile, theta: C64, x: f64, y: f64) -> Result<Phi, DistortionError> {
    let chi = cut.chi(x, y);
    let (gx, gy) = cut.grad(x, y);
    if theta == ZERO || (chi == 1.0 && gx == 0.0 && gy == 0.0) {
        return Ok(Phi { phi: C64::new(x, 0.0), phi_x: ONE, phi_y: ZERO });
    }
    let phi_x = ONE - theta * gx;
    if (theta * gx).norm() >= 1.0 {
        return Err(DistortionError::SingularMap { value: (theta * gx).norm() });
    }
    Ok(Phi { phi: x + theta * (1.0 - chi), phi_x, phi_y: -(theta * gy) })
}

/// Coefficients of the discretized distorted operator on one grid.
///
/// `m_half` and `n_half` hold values at `x_{i-1/2}` for `i = 0..=nx` in each row.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortedCoefficients {
    pub nx: usize,
    pub ny: usize,
    pub theta: C64,
    pub phi: Vec<C64>,
    pub m: Vec<C64>,
    pub n: Vec<C64>,
    pub m_half: Vec<C64>,
    pub n_half: Vec<C64>,
    /// `φ + V(φ, y)` at the nodes.
    pub w: Vec<C64>,
}

fn mn(p: &Phi) -> (C64, C64) {
    let m = if p.phi_x == ONE { ONE } else { p.phi_x.inv() };
    let n = if p.phi_y == ZERO { ZERO } else { p.phi_y * m };
    (m, n)
}

impl DistortedCoefficients {
    /// Identity coefficients with a real potential: the self-adjoint operator.
    pub fn undistorted(grid: &Grid2D, u: &dyn TotalPotential) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let w: Vec<C64> = (0..nx * ny)
            .into_par_iter()
            .map(|k| C64::new(u.eval_real(grid.x(k % nx), grid.y(k / nx)), 0.0))
            .collect();
        Self {
            nx,
            ny,
            theta: ZERO,
            phi: (0..nx * ny).map(|k| C64::new(grid.x(k % nx), 0.0)).collect(),
            m: vec![ONE; nx * ny],
            n: vec![ZERO; nx * ny],
            m_half: vec![ONE; (nx + 1) * ny],
            n_half: vec![ZERO; (nx + 1) * ny],
            w,
        }
    }

    pub fn has_cross_terms(&self) -> bool {
        self.n.iter().any(|v| *v != ZERO)
    }
}

/// Tabulates `m`, `n`, `φ` and `W_θ = φ + V(φ, y)` on the grid.
pub fn distorted_coefficients(
    params: &DistortionParams,
    h: f64,
    potential: &dyn TotalPotential,
    grid: &Grid2D,
) -> Result<DistortedCoefficients, DistortionError> {
    let cut = params.validate(h)?;
    let theta = params.theta(h);
    let (nx, ny) = (grid.nx, grid.ny);
    let nodes: Vec<(Phi, C64)> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let (x, y) = (grid.x(k % nx), grid.y(k / nx));
            let p = phi_theta(&cut, theta, x, y)?;
            let w = potential.eval_complex(p.phi, y)?;
            Ok((p, w))
        })
        .collect::<Result<_, DistortionError>>()?;
    let halves: Vec<Phi> = (0..(nx + 1) * ny)
        .into_par_iter()
        .map(|k| phi_theta(&cut, theta, grid.x_half(k % (nx + 1)), grid.y(k / (nx + 1))))
        .collect::<Result<_, _>>()?;
    let (m, n): (Vec<C64>, Vec<C64>) = nodes.iter().map(|(p, _)| mn(p)).unzip();
    let (m_half, n_half): (Vec<C64>, Vec<C64>) = halves.iter().map(mn).unzip();
    Ok(DistortedCoefficients {
        nx,
        ny,
        theta,
        phi: nodes.iter().map(|(p, _)| p.phi).collect(),
        m,
        n,
        m_half,
        n_half,
        w: nodes.into_iter().map(|(_, w)| w).collect(),
    })
}

/// Per-grid comparison of `Q_θ` (real `θ`) against `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityLevel {
    pub spacing: f64,
    pub p_eigs: Vec<f64>,
    pub q_eigs: Vec<C64>,
    pub diffs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub theta: f64,
    pub levels: Vec<SimilarityLevel>,
    /// `log(diff_coarse/diff_fine)/log(d_coarse/d_fine)` per level, between consecutive grids.
    pub orders: Vec<Vec<f64>>,
}

/// Compares the `k` eigenvalues nearest `shift` of `Q_θ` (real `θ`) and of
/// `P` on each grid, and the order at which their difference decays.
pub fn validate_real_theta_similarity(
    grids: &[Grid2D],
    params: &DistortionParams,
    hp: &HamiltonianParams,
    potential: &dyn TotalPotential,
    k: usize,
    shift: f64,
) -> Result<SimilarityReport, DistortionError> {
    let theta = params.theta(hp.h);
    if theta.im != 0.0 {
        return Err(DistortionError::InvalidParameter("similarity check needs a real θ".into()));
    }
    let opts = ArnoldiOptions::new(k).with_tol(1e-12);
    let mut levels = Vec::new();
    for g in grids {
        let p = assemble_operator(OperatorKind::SelfAdjoint(potential), g, hp).map_err(|e| DistortionError::Assembly(e.to_string()))?;
        let coef = distorted_coefficients(params, hp.h, potential, g)?;
        let q = assemble_operator(OperatorKind::Distorted(&coef), g, hp).map_err(|e| DistortionError::Assembly(e.to_string()))?;
        let z0 = C64::new(shift, 0.0);
        let mut pe: Vec<C64> = shift_invert_arnoldi(&p, z0, &opts)?.pairs.iter().map(|e| e.value).collect();
        let qe: Vec<C64> = shift_invert_arnoldi(&q, z0, &opts)?.pairs.iter().map(|e| e.value).collect();
        pe.sort_by(|a, b| a.re.total_cmp(&b.re));
        let mt = match_spectra(&pe, &qe);
        let mut q_sorted = vec![C64::new(f64::NAN, f64::NAN); pe.len()];
        let mut diffs = vec![f64::NAN; pe.len()];
        for &(i, j, d) in &mt.pairs {
            q_sorted[i] = qe[j];
            diffs[i] = d;
        }
        levels.push(SimilarityLevel { spacing: g.dx.max(g.dy), p_eigs: pe.iter().map(|z| z.re).collect(), q_eigs: q_sorted, diffs });
    }
    let orders = levels
        .windows(2)
        .map(|w| {
            w[0].diffs
                .iter()
                .zip(&w[1].diffs)
                .map(|(a, b)| (a / b).ln() / (w[0].spacing / w[1].spacing).ln())
                .collect()
        })
        .collect();
    Ok(SimilarityReport { theta: theta.re, levels, orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{make_grid, Domain};
    use crate::potential::{PotentialSpec, Term};
    use proptest::prelude::*;

    #[test]
    fn cutoff_examples() {
        let c = build_cutoff(1.0, 0.5, CutoffGeometry::Strip, (0.0, 0.0)).unwrap();
        assert_eq!(c.chi(0.0, 3.0), 1.0);
        assert_eq!(c.chi(2.5, 0.0), 0.0);
        assert_eq!(c.chi(-2.5, 7.0), 0.0);
        let mid = c.chi(2.25, 0.0);
        assert!(mid > 0.0 && mid < 1.0);
        let mut last = 1.0;
        for k in 0..=100 {
            let v = c.chi(2.0 + 0.5 * k as f64 / 100.0, 0.0);
            assert!(v <= last);
            last = v;
        }
        assert!(build_cutoff(0.0, 1.0, CutoffGeometry::Disc, (0.0, 0.0)).is_err());
        assert!(build_cutoff(1.0, -1.0, CutoffGeometry::Disc, (0.0, 0.0)).is_err());
    }

    #[test]
    fn step_slope_peaks_at_two() {
        // at t = 1/2 the slope is -f'(1/2)/(2 f(1/2)) = -2
        assert!((smooth_step_derivative(0.5) + 2.0).abs() < 1e-12);
        assert!((smooth_step_max_slope() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn phi_examples() {
        let c = build_cutoff(1.0, 1.0, CutoffGeometry::Strip, (0.0, 0.0)).unwrap();
        for x in [-5.0, -1.0, 0.3, 2.5, 4.0] {
            assert_eq!(phi_theta(&c, ZERO, x, 0.0).unwrap().phi, C64::new(x, 0.0));
        }
        let th = C64::new(0.0, -0.1);
        for x in [-2.0, 0.0, 1.9] {
            let p = phi_theta(&c, th, x, 0.4).unwrap();
            assert_eq!((p.phi, p.phi_x, p.phi_y), (C64::new(x, 0.0), ONE, ZERO));
        }
        let p = phi_theta(&c, th, 3.5, 0.0).unwrap();
        assert_eq!(p.phi, C64::new(3.5, -0.1));
        assert_eq!(p.phi_x, ONE);
    }

    #[test]
    fn singular_map_rejected() {
        let p = DistortionParams::fixed(1.0, 0.3, C64::new(0.0, -0.2), CutoffGeometry::Disc);
        assert!(matches!(p.validate(0.1), Err(DistortionError::SingularMap { .. })));
        let p = DistortionParams::fixed(1.0, 1.0, C64::new(0.0, 0.2), CutoffGeometry::Disc);
        assert!(matches!(p.validate(0.1), Err(DistortionError::WrongSide(_))));
    }

    #[test]
    fn h_log_h_mode() {
        let mut p = DistortionParams::fixed(1.0, 1.0, ZERO, CutoffGeometry::Disc);
        p.mode = ThetaMode::HLogH;
        p.m_tilde = 2.0;
        let th = p.theta(0.1);
        assert_eq!(th.re, 0.0);
        assert!((th.im + 2.0 * 0.1 * 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tail_potential_has_imaginary_part_theta() {
        let g = make_grid(Domain::new(-4.0, 4.0, -1.0, 1.0), 31, 5).unwrap();
        let p = DistortionParams::fixed(0.5, 1.0, C64::new(0.0, -0.1), CutoffGeometry::Strip);
        let c = distorted_coefficients(&p, 0.1, &PotentialSpec::zero(), &g).unwrap();
        for k in 0..g.len() {
            let x = g.x(k % g.nx);
            if x.abs() >= 2.5 {
                assert_eq!(c.w[k], C64::new(x, -0.1));
            }
            if x.abs() <= 1.5 {
                assert_eq!(c.w[k], C64::new(x, 0.0));
                assert_eq!(c.m[k], ONE);
            }
            assert!(c.w[k].im <= 0.0);
        }
        assert!(!c.has_cross_terms());
    }

    #[test]
    fn ramp_potential_matches_extended_precision() {
        // GaussianBump A=1, σ=1 at the origin; strip cutoff R0=0.5, w=1; θ=-0.05i.
        // Reference values of φ + V(φ, y) at (2.0, 0.3) from mpmath at 30 digits:
        // χ₀(2) = 0.5, φ = 2 - 0.025i.
        let spec = PotentialSpec::new(vec![Term::GaussianBump { amplitude: 1.0, x0: 0.0, y0: 0.0, sigma: 1.0 }]).unwrap();
        let cut = build_cutoff(0.5, 1.0, CutoffGeometry::Strip, (0.0, 0.0)).unwrap();
        let p = phi_theta(&cut, C64::new(0.0, -0.05), 2.0, 0.3).unwrap();
        assert!((p.phi - C64::new(2.0, -0.025)).norm() < 1e-15);
        let w = spec.eval_complex(p.phi, 0.3).unwrap();
        let want = C64::new(2.016666020122522, -0.023327820336037237);
        assert!((w - want).norm() < 1e-14, "{w}");
    }

    #[test]
    fn tail_coefficients_are_degree_two_in_theta() {
        // For V = 0 in the tail: φ = x + θ, m = 1, so W is affine in θ and
        // second differences in θ vanish.
        let cut = build_cutoff(0.5, 1.0, CutoffGeometry::Disc, (0.0, 0.0)).unwrap();
        let z = PotentialSpec::zero();
        let at = |t: f64| {
            let p = phi_theta(&cut, C64::new(0.0, -t), 3.0, 1.0).unwrap();
            z.eval_complex(p.phi, 1.0).unwrap()
        };
        let (a, b, c) = (at(0.1), at(0.2), at(0.3));
        assert!((a - b * 2.0 + c).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn imaginary_part_of_w_is_nonpositive(x in -6.0..6.0f64, y in -6.0..6.0f64, t in 0.0..0.4f64) {
            let cut = build_cutoff(0.5, 1.0, CutoffGeometry::Disc, (0.0, 0.0)).unwrap();
            let p = phi_theta(&cut, C64::new(0.0, -t), x, y).unwrap();
            let w = PotentialSpec::zero().eval_complex(p.phi, y).unwrap();
            prop_assert!(w.im <= 0.0);
            if x.hypot(y) <= 1.5 { prop_assert_eq!(w.im, 0.0); }
        }

        #[test]
        fn chi_stays_in_unit_interval(x in -6.0..6.0f64, y in -6.0..6.0f64) {
            let cut = build_cutoff(0.7, 0.8, CutoffGeometry::Disc, (0.2, -0.1)).unwrap();
            let c = cut.chi(x, y);
            prop_assert!((0.0..=1.0).contains(&c));
            let (gx, gy) = cut.grad(x, y);
            prop_assert!(gx.hypot(gy) <= cut.max_gradient() * (1.0 + 1e-6));
        }
    }
}
