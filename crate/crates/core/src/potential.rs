//! Scalar potentials `V`, the total potential `U = x + V`, the classical
//! symbol `p`, and Newton search for nondegenerate well bottoms.
//!
//! Only closed-form families are supported. Every family is entire in `x`,
//! so the complex translation `x -> x + θ(1 - χ₀)` can be evaluated anywhere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("|Im x| = {im} is outside the analyticity strip of width {strip}")]
    StripViolation { im: f64, strip: f64 },
    #[error("potential is not analytic at ({x}, {y}); complex evaluation rejected")]
    NotAnalytic { x: C64, y: f64 },
    #[error("invalid potential parameter: {0}")]
    InvalidParameter(String),
    #[error("Newton search did not converge after {iterations} iterations (|grad U| = {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("singular Hessian during Newton search at ({x}, {y})")]
    SingularHessian { x: f64, y: f64 },
}

/// One closed-form term of `V`. Keys follow the scenario file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Term {
    Zero,
    /// `A exp(-((x-x0)² + (y-y0)²)/σ²)`
    GaussianBump {
        #[serde(rename = "A")]
        amplitude: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        y0: f64,
        sigma: f64,
    },
    /// `(A + ½λ₁x̃² + ½λ₂ỹ² - x̃) exp(-(x̃² + ỹ²)/L²)` with `x̃ = x - x0`, `ỹ = y - y0`.
    ///
    /// The `-x̃` cancels the Stark slope at the center, so `U = x + V` has a
    /// critical point at `(x0, y0)` with `Hess V = diag(λ₁, λ₂)` exactly when
    /// `A = 0`, and within `O(A/L²)` otherwise.
    EnvelopedQuadraticWell {
        #[serde(rename = "A", default)]
        offset: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        y0: f64,
        #[serde(rename = "L")]
        envelope: f64,
        lambda1: f64,
        lambda2: f64,
    },
}

/// A declarative potential: the sum of its terms (an empty list is `V ≡ 0`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub terms: Vec<Term>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianParams {
    #[serde(rename = "B")]
    pub b_field: f64,
    pub h: f64,
}

impl HamiltonianParams {
    pub fn new(b_field: f64, h: f64) -> Result<Self, PotentialError> {
        // B = 0 is accepted as a degenerate comparison case.
        if !(b_field >= 0.0 && b_field.is_finite()) {
            return Err(PotentialError::InvalidParameter(format!("B must be >= 0, got {b_field}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(PotentialError::InvalidParameter(format!("h must be > 0, got {h}")));
        }
        Ok(Self { b_field, h })
    }
}

/// A phase-space point `(x, y, ξ, η)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x: f64,
    pub y: f64,
    pub xi: f64,
    pub eta: f64,
}

impl ClassicalState {
    pub fn new(x: f64, y: f64, xi: f64, eta: f64) -> Self {
        Self { x, y, xi, eta }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.xi, self.eta]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Gradient and Hessian of a real function of `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl std::ops::Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            value: self.value + o.value,
            grad: [self.grad[0] + o.grad[0], self.grad[1] + o.grad[1]],
            hess: [
                [self.hess[0][0] + o.hess[0][0], self.hess[0][1] + o.hess[0][1]],
                [self.hess[1][0] + o.hess[1][0], self.hess[1][1] + o.hess[1][1]],
            ],
        }
    }
}

impl Jet2 {
    fn zero() -> Self {
        Jet2 { value: 0.0, grad: [0.0; 2], hess: [[0.0; 2]; 2] }
    }
}

/// Anything that can act as the total potential `U(x, y)` of an assembled operator.
///
/// Real evaluation must always succeed; complex-`x` evaluation may be refused
/// where the function is not analytic.
pub trait TotalPotential: Send + Sync {
    fn eval_complex(&self, x: C64, y: f64) -> Result<C64, PotentialError>;

    fn eval_real(&self, x: f64, y: f64) -> f64 {
        self.eval_complex(Complex64::new(x, 0.0), y)
            .expect("real evaluation of a total potential cannot fail")
            .re
    }
}

impl Term {
    fn validate(&self) -> Result<(), PotentialError> {
        let bad = |m: String| Err(PotentialError::InvalidParameter(m));
        match *self {
            Term::Zero => Ok(()),
            Term::GaussianBump { amplitude, sigma, .. } => {
                if !(sigma > 0.0) {
                    return bad(format!("gaussian_bump sigma must be > 0, got {sigma}"));
                }
                if !amplitude.is_finite() {
                    return bad("gaussian_bump amplitude must be finite".into());
                }
                Ok(())
            }
            Term::EnvelopedQuadraticWell { envelope, lambda1, lambda2, offset, .. } => {
                if !(envelope > 0.0) {
                    return bad(format!("enveloped_quadratic_well L must be > 0, got {envelope}"));
                }
                if !(lambda1 > 0.0 && lambda2 > 0.0) {
                    return bad(format!(
                        "enveloped_quadratic_well needs lambda1, lambda2 > 0, got ({lambda1}, {lambda2})"
                    ));
                }
                if !offset.is_finite() {
                    return bad("enveloped_quadratic_well offset must be finite".into());
                }
                Ok(())
            }
        }
    }

    /// `V` at complex `x`. Only real divisors are used so that a real input
    /// reproduces real arithmetic bit for bit.
    fn value(&self, x: C64, y: f64) -> C64 {
        match *self {
            Term::Zero => C64::new(0.0, 0.0),
            Term::GaussianBump { amplitude, x0, y0, sigma } => {
                let dx = x - x0;
                let dy = y - y0;
                let r2 = dx * dx + dy * dy;
                (-r2 / (sigma * sigma)).exp() * amplitude
            }
            Term::EnvelopedQuadraticWell { offset, x0, y0, envelope, lambda1, lambda2 } => {
                let dx = x - x0;
                let dy = y - y0;
                let poly = dx * dx * (0.5 * lambda1) + dy * dy * (0.5 * lambda2) - dx + offset;
                let r2 = dx * dx + dy * dy;
                poly * (-r2 / (envelope * envelope)).exp()
            }
        }
    }

    fn jet(&self, x: f64, y: f64) -> Jet2 {
        match *self {
            Term::Zero => Jet2::zero(),
            Term::GaussianBump { amplitude, x0, y0, sigma } => {
                let (dx, dy) = (x - x0, y - y0);
                let s2 = sigma * sigma;
                let g = amplitude * (-(dx * dx + dy * dy) / s2).exp();
                let gx = -2.0 * dx / s2 * g;
                let gy = -2.0 * dy / s2 * g;
                let gxx = (-2.0 / s2 + 4.0 * dx * dx / (s2 * s2)) * g;
                let gyy = (-2.0 / s2 + 4.0 * dy * dy / (s2 * s2)) * g;
                let gxy = 4.0 * dx * dy / (s2 * s2) * g;
                Jet2 { value: g, grad: [gx, gy], hess: [[gxx, gxy], [gxy, gyy]] }
            }
            Term::EnvelopedQuadraticWell { offset, x0, y0, envelope, lambda1, lambda2 } => {
                let (dx, dy) = (x - x0, y - y0);
                let l2 = envelope * envelope;
                let g = (-(dx * dx + dy * dy) / l2).exp();
                let gx = -2.0 * dx / l2 * g;
                let gy = -2.0 * dy / l2 * g;
                let gxx = (-2.0 / l2 + 4.0 * dx * dx / (l2 * l2)) * g;
                let gyy = (-2.0 / l2 + 4.0 * dy * dy / (l2 * l2)) * g;
                let gxy = 4.0 * dx * dy / (l2 * l2) * g;
                let p = offset + 0.5 * lambda1 * dx * dx + 0.5 * lambda2 * dy * dy - dx;
                let px = lambda1 * dx - 1.0;
                let py = lambda2 * dy;
                let (pxx, pyy) = (lambda1, lambda2);
                let vxx = pxx * g + 2.0 * px * gx + p * gxx;
                let vyy = pyy * g + 2.0 * py * gy + p * gyy;
                let vxy = px * gy + py * gx + p * gxy;
                Jet2 {
                    value: p * g,
                    grad: [px * g + p * gx, py * g + p * gy],
                    hess: [[vxx, vxy], [vxy, vyy]],
                }
            }
        }
    }
}

impl PotentialSpec {
    pub fn new(terms: Vec<Term>) -> Result<Self, PotentialError> {
        let spec = Self { terms };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero() -> Self {
        Self { terms: vec![Term::Zero] }
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        self.terms.iter().try_for_each(Term::validate)
    }

    /// Half-width of the strip `|Im x| < δ₀` where `V` is analytic.
    ///
    /// All built-in families are entire in `x`, so this is `+∞`; the usable
    /// `|Im θ|` is bounded by the distortion parameters instead.
    pub fn strip_width(&self) -> f64 {
        f64::INFINITY
    }

    /// `V(x, y)` for complex `x` (no strip check).
    pub fn v(&self, x: C64, y: f64) -> C64 {
        self.terms.iter().fold(C64::new(0.0, 0.0), |acc, t| acc + t.value(x, y))
    }

    /// Value, gradient and Hessian of `V` at a real point.
    pub fn v_jet(&self, x: f64, y: f64) -> Jet2 {
        self.terms.iter().fold(Jet2::zero(), |acc, t| acc + t.jet(x, y))
    }
}

impl TotalPotential for PotentialSpec {
    fn eval_complex(&self, x: C64, y: f64) -> Result<C64, PotentialError> {
        eval_total_potential(self, x, y)
    }
}

/// `U(x, y) = x + V(x, y)` for complex `x` inside the analyticity strip.
pub fn eval_total_potential(spec: &PotentialSpec, x: C64, y: f64) -> Result<C64, PotentialError> {
    let strip = spec.strip_width();
    if x.im != 0.0 && !(x.im.abs() < strip) {
        return Err(PotentialError::StripViolation { im: x.im.abs(), strip });
    }
    Ok(x + spec.v(x, y))
}

/// Gradient and Hessian of `U = x + V` at a real point. The Hessian is
/// symmetric by construction.
pub fn grad_hess(spec: &PotentialSpec, x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let j = spec.v_jet(x, y);
    ([1.0 + j.grad[0], j.grad[1]], j.hess)
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(m: [[f64; 2]; 2]) -> (f64, f64) {
    let (a, b, d) = (m[0][0], m[0][1], m[1][1]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean - rad, mean + rad)
}

/// A critical point of `U` with the data needed by the harmonic model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub y: f64,
    pub energy: f64,
    /// `Hess V` at the point; equal to `Hess U` since the Stark term is linear.
    pub hessian: [[f64; 2]; 2],
    pub lambda1: f64,
    pub lambda2: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// True when both Hessian eigenvalues are positive (a well bottom).
    pub nondegenerate: bool,
}

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

/// Newton iteration on `∇U = 0` from `seed`.
pub fn find_well_bottom(
    spec: &PotentialSpec,
    seed: (f64, f64),
    tol: f64,
) -> Result<CriticalPoint, PotentialError> {
    let (mut x, mut y) = seed;
    for it in 0..=NEWTON_MAX_ITER {
        let (g, hs) = grad_hess(spec, x, y);
        let gn = g[0].hypot(g[1]);
        if !gn.is_finite() {
            break;
        }
        if gn <= tol {
            let (l1, l2) = sym2_eigenvalues(hs);
            return Ok(CriticalPoint {
                x,
                y,
                energy: x + spec.v_jet(x, y).value,
                hessian: hs,
                lambda1: l1,
                lambda2: l2,
                grad_norm: gn,
                iterations: it,
                converged: true,
                nondegenerate: l1 > 0.0 && l2 > 0.0,
            });
        }
        if it == NEWTON_MAX_ITER {
            return Err(PotentialError::NoConvergence { iterations: it, grad_norm: gn });
        }
        let det = hs[0][0] * hs[1][1] - hs[0][1] * hs[1][0];
        let scale = hs[0][0].abs().max(hs[1][1].abs()).max(hs[0][1].abs());
        if det.abs() <= 1e-300 || det.abs() <= 1e-14 * scale * scale {
            return Err(PotentialError::SingularHessian { x, y });
        }
        let sx = (hs[1][1] * g[0] - hs[0][1] * g[1]) / det;
        let sy = (-hs[1][0] * g[0] + hs[0][0] * g[1]) / det;
        x -= sx;
        y -= sy;
    }
    let (g, _) = grad_hess(spec, x, y);
    Err(PotentialError::NoConvergence { iterations: NEWTON_MAX_ITER, grad_norm: g[0].hypot(g[1]) })
}

/// The classical symbol `p = ½(ξ + By)² + ½η² + x + V(x, y)`.
pub fn eval_symbol(params: &HamiltonianParams, spec: &PotentialSpec, s: &ClassicalState) -> f64 {
    kinetic(params, s) + s.x + spec.v_jet(s.x, s.y).value
}

/// The kinetic part `½(ξ + By)² + ½η²`.
pub fn kinetic(params: &HamiltonianParams, s: &ClassicalState) -> f64 {
    let u = s.xi + params.b_field * s.y;
    0.5 * u * u + 0.5 * s.eta * s.eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump(a: f64) -> PotentialSpec {
        PotentialSpec::new(vec![Term::GaussianBump { amplitude: a, x0: 0.0, y0: 0.0, sigma: 1.0 }]).unwrap()
    }

    fn enveloped(l1: f64, l2: f64, l: f64) -> PotentialSpec {
        PotentialSpec::new(vec![Term::EnvelopedQuadraticWell {
            offset: 0.0,
            x0: 0.0,
            y0: 0.0,
            envelope: l,
            lambda1: l1,
            lambda2: l2,
        }])
        .unwrap()
    }

    #[test]
    fn total_potential_examples() {
        let z = PotentialSpec::zero();
        assert_eq!(eval_total_potential(&z, C64::new(2.0, 0.0), 5.0).unwrap(), C64::new(2.0, 0.0));
        let b = bump(3.0);
        assert_eq!(eval_total_potential(&b, C64::new(0.0, 0.0), 0.0).unwrap().re, 3.0);
        // 0.1 + (0.005 + 0.02 - 0.1) exp(-0.05/64), mpmath at 30 digits
        let w = enveloped(1.0, 1.0, 8.0);
        let u = eval_total_potential(&w, C64::new(0.1, 0.0), 0.2).unwrap();
        let expected = 0.025058570867775707_f64;
        assert!((u.re - expected).abs() < 1e-15, "{} vs {}", u.re, expected);
        assert_eq!(u.im, 0.0);
    }

    #[test]
    fn strip_violation_is_rejected_only_outside_strip() {
        let w = enveloped(1.0, 1.0, 8.0);
        assert!(eval_total_potential(&w, C64::new(1.0, -0.3), 0.0).is_ok());
        let err = eval_total_potential(&w, C64::new(1.0, f64::INFINITY), 0.0).unwrap_err();
        assert!(matches!(err, PotentialError::StripViolation { .. }));
    }

    #[test]
    fn grad_hess_examples() {
        let (g, h) = grad_hess(&PotentialSpec::zero(), 3.0, -2.0);
        assert_eq!(g, [1.0, 0.0]);
        assert_eq!(h, [[0.0; 2]; 2]);
        let (g, h) = grad_hess(&bump(3.0), 0.0, 0.0);
        assert_eq!(g, [1.0, 0.0]);
        assert_eq!(h, [[-6.0, 0.0], [0.0, -6.0]]);
    }

    #[test]
    fn find_well_bottom_examples() {
        let w = PotentialSpec::new(vec![Term::EnvelopedQuadraticWell {
            offset: 0.0,
            x0: 0.0,
            y0: 0.0,
            envelope: 50.0,
            lambda1: 1.0,
            lambda2: 4.0,
        }])
        .unwrap();
        let cp = find_well_bottom(&w, (0.05, -0.03), NEWTON_TOL).unwrap();
        assert!(cp.converged && cp.nondegenerate);
        assert!(cp.x.abs() < 1.0 / 2500.0 && cp.y.abs() < 1.0 / 2500.0);
        assert!((cp.lambda1 - 1.0).abs() < 1.0 / 2500.0);
        assert!((cp.lambda2 - 4.0).abs() < 1.0 / 2500.0);
        // dense grid search agrees on the minimizer
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -100..=100 {
            for j in -100..=100 {
                let (x, y) = (i as f64 * 0.002, j as f64 * 0.002);
                let u = w.eval_real(x, y);
                if u < best.0 {
                    best = (u, x, y);
                }
            }
        }
        assert!((best.1 - cp.x).abs() <= 0.002 && (best.2 - cp.y).abs() <= 0.002);
        assert!(cp.energy <= best.0 + 1e-12);

        assert!(find_well_bottom(&PotentialSpec::zero(), (0.3, 0.4), NEWTON_TOL).is_err());

        // U = x + 3 exp(-x²-y²) on y = 0: x e^{-x²} = 1/6 has two roots, both non-minima.
        for seed in [(0.2, 0.0), (1.5, 0.0)] {
            let cp = find_well_bottom(&bump(3.0), seed, NEWTON_TOL).unwrap();
            assert!(!cp.nondegenerate, "{cp:?}");
            assert!(cp.lambda1 < 0.0);
        }
    }

    #[test]
    fn symbol_examples() {
        let z = PotentialSpec::zero();
        let p1 = HamiltonianParams::new(1.0, 0.1).unwrap();
        let p2 = HamiltonianParams::new(2.0, 0.1).unwrap();
        assert_eq!(eval_symbol(&p1, &z, &ClassicalState::default()), 0.0);
        assert_eq!(eval_symbol(&p2, &z, &ClassicalState::new(1.0, 3.0, -6.0, 0.0)), 1.0);
        assert_eq!(eval_symbol(&p1, &bump(3.0), &ClassicalState::new(0.0, 0.0, 1.0, 1.0)), 4.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(PotentialSpec::new(vec![Term::EnvelopedQuadraticWell {
            offset: 0.0,
            x0: 0.0,
            y0: 0.0,
            envelope: 2.0,
            lambda1: -1.0,
            lambda2: 1.0
        }])
        .is_err());
        assert!(HamiltonianParams::new(1.0, 0.0).is_err());
        assert!(HamiltonianParams::new(-1.0, 0.1).is_err());
    }

    #[test]
    fn term_records_use_explicit_keys() {
        let text = r#"
            [[terms]]
            kind = "enveloped_quadratic_well"
            A = 0.0
            x0 = 0.0
            y0 = 0.0
            L = 2.5
            lambda1 = 1.0
            lambda2 = 1.0

            [[terms]]
            kind = "gaussian_bump"
            A = -0.5
            x0 = 1.0
            sigma = 0.7
        "#;
        let spec: PotentialSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.terms.len(), 2);
        let bad = "[[terms]]\nkind = \"gaussian_bump\"\nA = 1.0\nsigma = 1.0\nwidth = 2.0\n";
        assert!(toml::from_str::<PotentialSpec>(bad).is_err());
    }

    fn mixed_spec(seed: [f64; 6]) -> PotentialSpec {
        PotentialSpec::new(vec![
            Term::EnvelopedQuadraticWell {
                offset: seed[0],
                x0: seed[1],
                y0: 0.3,
                envelope: 1.5 + seed[2].abs(),
                lambda1: 0.5 + seed[3].abs(),
                lambda2: 1.0 + seed[4].abs(),
            },
            Term::GaussianBump { amplitude: seed[5], x0: -0.4, y0: 0.2, sigma: 0.9 },
        ])
        .unwrap()
    }

    proptest! {
        #[test]
        fn real_points_give_real_values(x in -6.0..6.0f64, y in -6.0..6.0f64,
                                        s in proptest::array::uniform6(-1.0..1.0f64)) {
            let spec = mixed_spec(s);
            let u = eval_total_potential(&spec, C64::new(x, 0.0), y).unwrap();
            prop_assert_eq!(u.im, 0.0);
        }

        #[test]
        fn grad_hess_matches_finite_differences(x in -3.0..3.0f64, y in -3.0..3.0f64,
                                                s in proptest::array::uniform6(-1.0..1.0f64)) {
            let spec = mixed_spec(s);
            let e = 1e-5;
            let u = |x: f64, y: f64| spec.eval_real(x, y);
            let (g, hs) = grad_hess(&spec, x, y);
            let fd_g = [(u(x + e, y) - u(x - e, y)) / (2.0 * e), (u(x, y + e) - u(x, y - e)) / (2.0 * e)];
            let gx = |x: f64, y: f64| grad_hess(&spec, x, y).0;
            let fd_h = [
                [(gx(x + e, y)[0] - gx(x - e, y)[0]) / (2.0 * e), (gx(x, y + e)[0] - gx(x, y - e)[0]) / (2.0 * e)],
                [(gx(x + e, y)[1] - gx(x - e, y)[1]) / (2.0 * e), (gx(x, y + e)[1] - gx(x, y - e)[1]) / (2.0 * e)],
            ];
            for k in 0..2 {
                prop_assert!((g[k] - fd_g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()));
                for l in 0..2 {
                    prop_assert!((hs[k][l] - fd_h[k][l]).abs() <= 1e-6 * (1.0 + hs[k][l].abs()));
                }
            }
            prop_assert_eq!(hs[0][1], hs[1][0]);
        }

        #[test]
        fn newton_output_satisfies_tolerance(l1 in 0.3..3.0f64, l2 in 0.3..3.0f64, big in 4.0..20.0f64) {
            let spec = enveloped(l1, l2, big);
            let cp = find_well_bottom(&spec, (0.1, 0.1), NEWTON_TOL).unwrap();
            prop_assert!(cp.grad_norm <= NEWTON_TOL);
            let (a, b) = sym2_eigenvalues(cp.hessian);
            prop_assert_eq!((a, b), (cp.lambda1, cp.lambda2));
            prop_assert!((cp.lambda1 * cp.lambda2 - (cp.hessian[0][0] * cp.hessian[1][1] - cp.hessian[0][1] * cp.hessian[1][0])).abs()
                <= 1e-12 * (1.0 + cp.lambda1.abs() * cp.lambda2.abs()));
        }

        #[test]
        fn kinetic_part_is_gauge_shift_invariant(x in -3.0..3.0f64, y in -3.0..3.0f64, xi in -3.0..3.0f64,
                                                 eta in -3.0..3.0f64, c in -4.0..4.0f64, b in 0.0..3.0f64) {
            let p = HamiltonianParams::new(b, 0.1).unwrap();
            let s = ClassicalState::new(x, y, xi, eta);
            let t = ClassicalState::new(x, y + c, xi - b * c, eta);
            let (k0, k1) = (kinetic(&p, &s), kinetic(&p, &t));
            prop_assert!((k0 - k1).abs() <= 1e-12 * (1.0 + k0));
        }
    }
}
