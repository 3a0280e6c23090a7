//! Well surgery (filling the well, flattening the exterior), the harmonic
//! frequencies at a well bottom, harmonic level prediction and Weyl counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::smooth_step;
use crate::potential::{PotentialError, PotentialSpec, TotalPotential};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WellOpsError {
    #[error("invalid surgery parameter: {0}")]
    InvalidParameter(String),
    #[error("region does not contain the sublevel set {{U <= {b}}}: U = {value} at ({x}, {y}) on its boundary")]
    NotContained { b: f64, x: f64, y: f64, value: f64 },
    #[error("harmonic frequencies need lambda1, lambda2 > 0, got ({0}, {1})")]
    NonPositiveHessian(f64, f64),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Well region. The blend runs from its boundary out to distance `ramp`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Disc { cx: f64, cy: f64, radius: f64 },
    Rect { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
}

impl Region {
    /// Euclidean distance to the region, 0 inside.
    pub fn distance_outside(&self, x: f64, y: f64) -> f64 {
        match *self {
            Region::Disc { cx, cy, radius } => ((x - cx).hypot(y - cy) - radius).max(0.0),
            Region::Rect { x_min, x_max, y_min, y_max } => {
                let dx = (x_min - x).max(x - x_max).max(0.0);
                let dy = (y_min - y).max(y - y_max).max(0.0);
                dx.hypot(dy)
            }
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.distance_outside(x, y) == 0.0
    }

    fn validate(&self) -> Result<(), WellOpsError> {
        let ok = match *self {
            Region::Disc { cx, cy, radius } => cx.is_finite() && cy.is_finite() && radius > 0.0 && radius.is_finite(),
            Region::Rect { x_min, x_max, y_min, y_max } => x_min < x_max && y_min < y_max,
        };
        if ok {
            Ok(())
        } else {
            Err(WellOpsError::InvalidParameter(format!("degenerate region {self:?}")))
        }
    }

    /// `count` points on the boundary.
    pub fn boundary_points(&self, count: usize) -> Vec<(f64, f64)> {
        match *self {
            Region::Disc { cx, cy, radius } => (0..count)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                    (cx + radius * t.cos(), cy + radius * t.sin())
                })
                .collect(),
            Region::Rect { x_min, x_max, y_min, y_max } => {
                let per = (count / 4).max(1);
                let mut out = Vec::with_capacity(4 * per);
                for k in 0..per {
                    let s = k as f64 / per as f64;
                    out.push((x_min + s * (x_max - x_min), y_min));
                    out.push((x_max, y_min + s * (y_max - y_min)));
                    out.push((x_max - s * (x_max - x_min), y_max));
                    out.push((x_min, y_max - s * (y_max - y_min)));
                }
                out
            }
        }
    }

    /// Bounding rectangle `(x_min, x_max, y_min, y_max)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Region::Disc { cx, cy, radius } => (cx - radius, cx + radius, cy - radius, cy + radius),
            Region::Rect { x_min, x_max, y_min, y_max } => (x_min, x_max, y_min, y_max),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurgeryMode {
    /// Raise the well to `level`: the non-trapping comparison potential.
    FillWell,
    /// Keep the well, set the exterior to `level`: the reference potential.
    FlattenExterior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellSurgerySpec {
    pub base: PotentialSpec,
    pub region: Region,
    pub level: f64,
    pub ramp: f64,
    pub mode: SurgeryMode,
}

/// Number of boundary samples in the containment check.
pub const CONTAINMENT_SAMPLES: usize = 1440;

/// Checks `U > b` on the region boundary, so the part of `{U <= b}` that
/// meets the region lies inside it.
pub fn check_containment(spec: &dyn TotalPotential, region: &Region, b: f64) -> Result<(), WellOpsError> {
    for (x, y) in region.boundary_points(CONTAINMENT_SAMPLES) {
        let u = spec.eval_real(x, y);
        if !(u > b) {
            return Err(WellOpsError::NotContained { b, x, y, value: u });
        }
    }
    Ok(())
}

/// `U` blended with a constant level through the region's smooth ramp.
#[derive(Clone, Debug, PartialEq)]
pub struct SurgeredPotential {
    pub spec: WellSurgerySpec,
}

impl SurgeredPotential {
    /// Weight of the region core: 1 inside the region, 0 beyond the ramp.
    pub fn core_weight(&self, x: f64, y: f64) -> f64 {
        smooth_step(self.spec.region.distance_outside(x, y) / self.spec.ramp)
    }
}

impl TotalPotential for SurgeredPotential {
    fn eval_complex(&self, x: C64, y: f64) -> Result<C64, PotentialError> {
        let w = self.core_weight(x.re, y);
        let level = C64::new(self.spec.level, 0.0);
        let (core, outside): (bool, bool) = (w == 1.0, w == 0.0);
        match self.spec.mode {
            SurgeryMode::FlattenExterior => {
                if core {
                    return self.spec.base.eval_complex(x, y);
                }
                if outside {
                    return Ok(level);
                }
            }
            SurgeryMode::FillWell => {
                if core {
                    return Ok(level);
                }
                if outside {
                    return self.spec.base.eval_complex(x, y);
                }
            }
        }
        if x.im != 0.0 {
            return Err(PotentialError::NotAnalytic { x, y });
        }
        let u = self.spec.base.eval_complex(x, y)?.re;
        let v = match self.spec.mode {
            SurgeryMode::FlattenExterior => w * u + (1.0 - w) * self.spec.level,
            SurgeryMode::FillWell => w * self.spec.level + (1.0 - w) * u,
        };
        Ok(C64::new(v, 0.0))
    }
}

fn surgery(
    spec: &PotentialSpec,
    region: Region,
    level: f64,
    ramp: f64,
    b: f64,
    mode: SurgeryMode,
) -> Result<SurgeredPotential, WellOpsError> {
    spec.validate()?;
    region.validate()?;
    if !(ramp > 0.0 && ramp.is_finite()) {
        return Err(WellOpsError::InvalidParameter(format!("ramp must be > 0, got {ramp}")));
    }
    if !(level > b) {
        return Err(WellOpsError::InvalidParameter(format!("level {level} must exceed the window top {b}")));
    }
    check_containment(spec, &region, b)?;
    Ok(SurgeredPotential { spec: WellSurgerySpec { base: spec.clone(), region, level, ramp, mode } })
}

/// `U^ext`: equal to `level` on the region, `U` beyond the ramp.
pub fn fill_well(spec: &PotentialSpec, region: Region, level: f64, ramp: f64, b: f64) -> Result<SurgeredPotential, WellOpsError> {
    surgery(spec, region, level, ramp, b, SurgeryMode::FillWell)
}

/// `U^int`: equal to `U` on the region, `level` beyond the ramp.
pub fn flatten_exterior(spec: &PotentialSpec, region: Region, level: f64, ramp: f64, b: f64) -> Result<SurgeredPotential, WellOpsError> {
    surgery(spec, region, level, ramp, b, SurgeryMode::FlattenExterior)
}

/// `U = E + ½λ₁(x - x0)² + ½λ₂(y - y0)²`, the idealized quadratic well.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticWell {
    pub e: f64,
    pub x0: f64,
    pub y0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl TotalPotential for QuadraticWell {
    fn eval_complex(&self, x: C64, y: f64) -> Result<C64, PotentialError> {
        let dx = x - self.x0;
        let dy = y - self.y0;
        Ok(dx * dx * (0.5 * self.lambda1) + 0.5 * self.lambda2 * dy * dy + self.e)
    }
}

/// Sorted `(α₁, α₂)`: the square roots of the eigenvalues of the harmonic
/// part of the symbol at a well bottom with Hessian `diag(λ₁, λ₂)`.
pub fn harmonic_frequencies(b: f64, lambda1: f64, lambda2: f64) -> Result<(f64, f64), WellOpsError> {
    if !(lambda1 > 0.0 && lambda2 > 0.0 && lambda1.is_finite() && lambda2.is_finite()) {
        return Err(WellOpsError::NonPositiveHessian(lambda1, lambda2));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(WellOpsError::InvalidParameter(format!("B must be >= 0, got {b}")));
    }
    if b == 0.0 {
        let (s1, s2) = (lambda1.sqrt(), lambda2.sqrt());
        return Ok((s1.min(s2), s1.max(s2)));
    }
    let b2 = b * b;
    let s = b2 + lambda1 + lambda2;
    // s² - 4λ₁λ₂ written without cancellation
    let d = ((lambda1 - lambda2).powi(2) + b2 * b2 + 2.0 * b2 * (lambda1 + lambda2)).sqrt();
    let a2sq = 0.5 * (s + d);
    let a1sq = lambda1 * lambda2 / a2sq;
    Ok((a1sq.sqrt(), a2sq.sqrt()))
}

/// Largest denominator tried when testing `α₁/α₂` for rationality.
pub const RATIONAL_DENOMINATOR_MAX: u64 = 50;
pub const RATIONAL_TOL: f64 = 1e-9;

/// Best rational approximation `p/q` of `r` with `q <= qmax` from the
/// continued fraction convergents.
pub fn best_rational(r: f64, qmax: u64) -> (u64, u64) {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut x = r;
    loop {
        let a = x.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > qmax {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = x - a as f64;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    if q1 == 0 {
        (p0, q0)
    } else {
        (p1, q1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicModel {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// False when `α₁/α₂` is within `RATIONAL_TOL` of a fraction with small denominator.
    pub z_independent_hint: bool,
    pub nearest_rational: (u64, u64),
}

impl HarmonicModel {
    pub fn new(e: f64, b: f64, lambda1: f64, lambda2: f64) -> Result<Self, WellOpsError> {
        let (alpha1, alpha2) = harmonic_frequencies(b, lambda1, lambda2)?;
        let r = alpha1 / alpha2;
        let (p, q) = best_rational(r, RATIONAL_DENOMINATOR_MAX);
        let hint = (r - p as f64 / q as f64).abs() > RATIONAL_TOL;
        Ok(Self { e, b, lambda1, lambda2, alpha1, alpha2, z_independent_hint: hint, nearest_rational: (p, q) })
    }

    pub fn levels(&self, h: f64, ceiling: f64) -> Vec<PredictedLevel> {
        predicted_levels(self.e, self.alpha1, self.alpha2, h, ceiling)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedLevel {
    pub k1: u32,
    pub k2: u32,
    pub value: f64,
}

/// Relative tolerance under which two predicted levels count as equal.
pub const LEVEL_TIE_RTOL: f64 = 1e-12;

/// `E + α₁(k₁+½)h + α₂(k₂+½)h` for all lattice points up to `ceiling`,
/// ascending. Equal values are ordered by `k₂`, then `k₁`.
pub fn predicted_levels(e: f64, alpha1: f64, alpha2: f64, h: f64, ceiling: f64) -> Vec<PredictedLevel> {
    let tol = |v: f64| LEVEL_TIE_RTOL * v.abs().max(1.0);
    let mut out = Vec::new();
    if !(h > 0.0 && alpha1 > 0.0 && alpha2 > 0.0) {
        return out;
    }
    let mut k2 = 0u32;
    loop {
        let base = e + alpha2 * (k2 as f64 + 0.5) * h;
        if base + alpha1 * 0.5 * h > ceiling + tol(ceiling) {
            break;
        }
        let mut k1 = 0u32;
        loop {
            let v = base + alpha1 * (k1 as f64 + 0.5) * h;
            if v > ceiling + tol(ceiling) {
                break;
            }
            out.push(PredictedLevel { k1, k2, value: v });
            k1 += 1;
        }
        k2 += 1;
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut start = 0;
    while start < out.len() {
        let mut end = start + 1;
        while end < out.len() && out[end].value - out[end - 1].value <= tol(out[end].value) {
            end += 1;
        }
        out[start..end].sort_by_key(|l| (l.k2, l.k1));
        start = end;
    }
    out
}

/// `vol / (2πh)²`.
pub fn weyl_count_prediction(vol: f64, h: f64) -> f64 {
    vol / (2.0 * std::f64::consts::PI * h).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Term;
    use proptest::prelude::*;

    fn well(l: f64) -> PotentialSpec {
        PotentialSpec::new(vec![Term::EnvelopedQuadraticWell {
            offset: 0.0,
            x0: 0.0,
            y0: 0.0,
            envelope: l,
            lambda1: 1.0,
            lambda2: 1.0,
        }])
        .unwrap()
    }

    const DISC: Region = Region::Disc { cx: 0.0, cy: 0.0, radius: 1.0 };

    #[test]
    fn frequency_examples() {
        assert_eq!(harmonic_frequencies(0.0, 1.0, 4.0).unwrap(), (1.0, 2.0));
        let (a1, a2) = harmonic_frequencies(1.0, 1.0, 1.0).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((a1 - (golden - 1.0)).abs() < 1e-15 && (a2 - golden).abs() < 1e-15);
        assert!((a1 * a2 - 1.0).abs() < 1e-15);
        let (a1, a2) = harmonic_frequencies(3.0, 2.0, 5.0).unwrap();
        // mpmath at 30 digits: 0.80717456082960500, 3.9177122441993534
        assert!((a1 - 0.807174560829605).abs() < 1e-14 && (a2 - 3.9177122441993534).abs() < 1e-14, "{a1} {a2}");
        assert!((a1 * a2 - 10f64.sqrt()).abs() < 1e-6);
        assert!(harmonic_frequencies(1.0, 0.0, 1.0).is_err());
        assert!(harmonic_frequencies(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn level_examples() {
        let l = predicted_levels(0.0, 1.0, 2.0, 0.1, 0.4);
        let got: Vec<(u32, u32)> = l.iter().map(|p| (p.k1, p.k2)).collect();
        assert_eq!(got, vec![(0, 0), (1, 0), (2, 0), (0, 1)]);
        let want = [0.15, 0.25, 0.35, 0.35];
        for (p, w) in l.iter().zip(want) {
            assert!((p.value - w).abs() < 1e-15);
        }
        let l = predicted_levels(0.0, 0.6180339887, 1.6180339887, 0.1, 0.2);
        assert_eq!(l.len(), 2);
        assert!((l[0].value - 0.1118034).abs() < 1e-7 && (l[1].value - 0.1736068).abs() < 1e-7);
        assert_eq!((l[1].k1, l[1].k2), (1, 0));
        assert!(predicted_levels(0.0, 1.0, 2.0, 0.1, 0.149).is_empty());
    }

    #[test]
    fn weyl_examples() {
        let vol = 2.0 * std::f64::consts::PI.powi(2);
        assert!((weyl_count_prediction(vol, 0.1) - 50.0).abs() < 1e-12);
        assert_eq!(weyl_count_prediction(0.0, 0.3), 0.0);
    }

    #[test]
    fn harmonic_lattice_count_tracks_weyl() {
        // counting lattice points under α₁τ₁ + α₂τ₂ <= b gives b²/(2 α₁ α₂ h²) to leading order
        let (a1, a2) = harmonic_frequencies(1.0, 1.0, 1.0).unwrap();
        let vol = 2.0 * std::f64::consts::PI.powi(2);
        for h in [0.02, 0.01] {
            let n = predicted_levels(0.0, a1, a2, h, 1.0).len() as f64;
            let w = weyl_count_prediction(vol, h);
            assert!((n / w - 1.0).abs() < 3.0 * h, "h={h}: {n} vs {w}");
        }
    }

    #[test]
    fn rationality_hint() {
        let golden = HarmonicModel::new(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(golden.z_independent_hint);
        let resonant = HarmonicModel::new(0.0, 0.0, 1.0, 4.0).unwrap();
        assert!(!resonant.z_independent_hint);
        assert_eq!(resonant.nearest_rational, (1, 2));
        assert_eq!(best_rational(std::f64::consts::PI - 3.0, 50), (1, 7));
    }

    #[test]
    fn surgery_examples() {
        let spec = well(2.5);
        let flat = flatten_exterior(&spec, DISC, 0.3, 0.5, 0.25).unwrap();
        assert_eq!(flat.eval_real(0.0, 0.0), spec.eval_real(0.0, 0.0));
        assert_eq!(flat.eval_real(0.0, 0.0), 0.0);
        assert_eq!(flat.eval_real(5.0, 1.0), 0.3);
        let fill = fill_well(&spec, DISC, 0.3, 0.5, 0.25).unwrap();
        assert_eq!(fill.eval_real(0.0, 0.0), 0.3);
        assert_eq!(fill.eval_real(5.0, 1.0), spec.eval_real(5.0, 1.0));
        // a region that cuts through the well
        let small = Region::Disc { cx: 0.0, cy: 0.0, radius: 0.3 };
        assert!(matches!(flatten_exterior(&spec, small, 0.3, 0.5, 0.25), Err(WellOpsError::NotContained { .. })));
        assert!(fill_well(&spec, DISC, 0.2, 0.5, 0.25).is_err());
    }

    #[test]
    fn surgery_bounds_on_dense_grid() {
        let spec = well(2.5);
        let (level, b) = (0.3, 0.25);
        let flat = flatten_exterior(&spec, DISC, level, 0.5, b).unwrap();
        let fill = fill_well(&spec, DISC, level, 0.5, b).unwrap();
        let mut inf_outside = f64::INFINITY;
        let mut min_fill = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let (x, y) = (-3.0 + 0.03 * i as f64, -3.0 + 0.03 * j as f64);
                assert!(flat.eval_real(x, y) >= 0.0f64.min(level));
                min_fill = min_fill.min(fill.eval_real(x, y));
                if !DISC.contains(x, y) {
                    inf_outside = inf_outside.min(spec.eval_real(x, y));
                }
            }
        }
        assert!(min_fill >= level.min(inf_outside));
    }

    #[test]
    fn complex_evaluation_only_where_analytic() {
        let spec = well(2.5);
        let flat = flatten_exterior(&spec, DISC, 0.3, 0.5, 0.25).unwrap();
        assert_eq!(flat.eval_complex(C64::new(4.0, -0.2), 0.0).unwrap(), C64::new(0.3, 0.0));
        assert!(matches!(flat.eval_complex(C64::new(1.2, -0.2), 0.0), Err(PotentialError::NotAnalytic { .. })));
        let z = C64::new(0.2, -0.1);
        assert_eq!(flat.eval_complex(z, 0.1).unwrap(), spec.eval_complex(z, 0.1).unwrap());
    }

    #[test]
    fn rect_region_distance() {
        let r = Region::Rect { x_min: -1.0, x_max: 1.0, y_min: -2.0, y_max: 2.0 };
        assert_eq!(r.distance_outside(0.0, 0.0), 0.0);
        assert_eq!(r.distance_outside(4.0, 6.0), 5.0);
        assert_eq!(r.boundary_points(40).len(), 40);
    }

    proptest! {
        #[test]
        fn alpha_identities(b in 0.0..5.0f64, l1 in 0.01..10.0f64, l2 in 0.01..10.0f64) {
            let (a1, a2) = harmonic_frequencies(b, l1, l2).unwrap();
            prop_assert!(0.0 < a1 && a1 <= a2);
            prop_assert!((a1 * a2 - (l1 * l2).sqrt()).abs() <= 1e-12 * (l1 * l2).sqrt());
            let s = b * b + l1 + l2;
            prop_assert!((a1 * a1 + a2 * a2 - s).abs() <= 1e-12 * s);
        }

        #[test]
        fn alpha_monotone_in_b(b in 0.0..4.0f64, db in 0.0..1.0f64, l1 in 0.1..5.0f64, l2 in 0.1..5.0f64) {
            let (a1, a2) = harmonic_frequencies(b, l1, l2).unwrap();
            let (c1, c2) = harmonic_frequencies(b + db, l1, l2).unwrap();
            prop_assert!(c2 >= a2 * (1.0 - 1e-14));
            prop_assert!(c1 <= a1 * (1.0 + 1e-14));
        }

        #[test]
        fn surgery_keeps_base_on_keep_zone(x in -6.0..6.0f64, y in -6.0..6.0f64) {
            let spec = well(2.5);
            let flat = flatten_exterior(&spec, DISC, 0.3, 0.5, 0.25).unwrap();
            let fill = fill_well(&spec, DISC, 0.3, 0.5, 0.25).unwrap();
            let r = x.hypot(y);
            if r <= 1.0 { prop_assert_eq!(flat.eval_real(x, y), spec.eval_real(x, y)); }
            if r >= 1.5 { prop_assert_eq!(fill.eval_real(x, y), spec.eval_real(x, y)); }
        }

        #[test]
        fn levels_sorted_and_below_ceiling(a1 in 0.1..3.0f64, a2 in 0.1..3.0f64, h in 0.01..0.3f64, c in 0.0..2.0f64) {
            let l = predicted_levels(0.0, a1.min(a2), a1.max(a2), h, c);
            prop_assert!(l.windows(2).all(|w| w[0].value <= w[1].value + 1e-12));
            prop_assert!(l.iter().all(|p| p.value <= c + 1e-12));
        }
    }
}
