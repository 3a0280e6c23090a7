//! Hamilton flow of `p = ½(ξ + By)² + ½η² + x + V`, trapped/escaping
//! classification and the phase-space volume of the trapped set.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{eval_symbol, ClassicalState, HamiltonianParams, PotentialSpec, TotalPotential};

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassicalError {
    #[error("step size underflow at t = {t} (step {step:e})")]
    StepUnderflow { t: f64, step: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{b} is not below U = {value} at ({x}, {y}) on the region boundary")]
    NotContained { b: f64, x: f64, y: f64, value: f64 },
}

/// `(∂p/∂ξ, ∂p/∂η, -∂p/∂x, -∂p/∂y)`.
pub fn hamilton_rhs(params: &HamiltonianParams, spec: &PotentialSpec, s: &ClassicalState) -> [f64; 4] {
    let b = params.b_field;
    let g = spec.v_jet(s.x, s.y).grad;
    let k = s.xi + b * s.y;
    [k, s.eta, -1.0 - g[0], -b * k - g[1]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub tol: f64,
    /// Escape once `|(x, y)| > r_esc` while moving outward.
    pub r_esc: f64,
    /// Escape once `x < -x_esc`.
    pub x_esc: Option<f64>,
    pub max_steps: usize,
}

impl FlowOptions {
    pub fn new(r_esc: f64) -> Self {
        Self { tol: 1e-10, r_esc, x_esc: None, max_steps: 2_000_000 }
    }
}

/// Fifty cyclotron periods `2π/B`.
pub fn default_t_max(b: f64) -> f64 {
    50.0 * 2.0 * std::f64::consts::PI / b
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Trapped { t_max: f64 },
    Escaped { exit_time: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryVerdict {
    pub verdict: Verdict,
    pub max_radius: f64,
    pub energy_drift: f64,
    pub steps: usize,
}

impl TrajectoryVerdict {
    pub fn escaped(&self) -> bool {
        matches!(self.verdict, Verdict::Escaped { .. })
    }
}

// Dormand-Prince 5(4)
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Stepper<'a> {
    params: &'a HamiltonianParams,
    spec: &'a PotentialSpec,
    tol: f64,
}

impl Stepper<'_> {
    fn f(&self, y: [f64; 4]) -> [f64; 4] {
        hamilton_rhs(self.params, self.spec, &ClassicalState::from_array(y))
    }

    /// One attempted step; returns the 5th order solution and the scaled error.
    fn attempt(&self, y: [f64; 4], k0: [f64; 4], h: f64) -> ([f64; 4], [f64; 4], f64) {
        let mut k = [[0.0; 4]; 7];
        k[0] = k0;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                for c in 0..4 {
                    ys[c] += h * A[s][j] * kj[c];
                }
            }
            k[s] = self.f(ys);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for c in 0..4 {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][c];
                d4 += B4[s] * k[s][c];
            }
            y5[c] += h * d5;
            let scale = self.tol * (1.0 + y[c].abs().max(y5[c].abs()));
            err = err.max((h * (d5 - d4)).abs() / scale);
        }
        // FSAL: k[6] is f(y5)
        (y5, k[6], err)
    }
}

/// Adaptive integration from `t = 0` to `t_end` (either sign). `stop` is
/// checked after every accepted step and ends the run early when true.
fn integrate<F: FnMut(f64, &[f64; 4]) -> bool>(
    params: &HamiltonianParams,
    spec: &PotentialSpec,
    s0: ClassicalState,
    t_end: f64,
    tol: f64,
    max_steps: usize,
    mut stop: F,
) -> Result<(ClassicalState, f64, usize), ClassicalError> {
    if !(tol > 0.0) {
        return Err(ClassicalError::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    let st = Stepper { params, spec, tol };
    let dir = t_end.signum();
    let mut y = s0.to_array();
    let mut t = 0.0f64;
    let mut k0 = st.f(y);
    let mut h = dir * (t_end.abs() * 1e-3).clamp(1e-8, 1e-2);
    let mut steps = 0;
    while (t_end - t) * dir > 0.0 {
        if steps >= max_steps {
            return Err(ClassicalError::TooManySteps(max_steps));
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let (y5, k_next, err) = st.attempt(y, k0, h);
        if !err.is_finite() || y5.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
        } else if err <= 1.0 {
            t += h;
            y = y5;
            k0 = k_next;
            steps += 1;
            if stop(t, &y) {
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(ClassicalError::StepUnderflow { t, step: h.abs() });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ClassicalError::NonFinite(t));
    }
    Ok((ClassicalState::from_array(y), t, steps))
}

/// The flow map at time `t` (either sign), without escape detection.
pub fn flow_to(
    params: &HamiltonianParams,
    spec: &PotentialSpec,
    s0: ClassicalState,
    t: f64,
    tol: f64,
) -> Result<ClassicalState, ClassicalError> {
    if t == 0.0 {
        return Ok(s0);
    }
    integrate(params, spec, s0, t, tol, 10_000_000, |_, _| false).map(|r| r.0)
}

/// Integrates up to `t_max`, stopping early on escape.
pub fn integrate_flow(
    params: &HamiltonianParams,
    spec: &PotentialSpec,
    s0: ClassicalState,
    t_max: f64,
    opts: &FlowOptions,
) -> Result<(ClassicalState, TrajectoryVerdict), ClassicalError> {
    if !(t_max > 0.0) {
        return Err(ClassicalError::InvalidArgument(format!("t_max must be > 0, got {t_max}")));
    }
    let b = params.b_field;
    let mut max_r = s0.x.hypot(s0.y);
    let mut exit: Option<(f64, bool)> = None;
    let mut prev = (0.0, s0.to_array());
    let (s, t, steps) = integrate(params, spec, s0, t_max, opts.tol, opts.max_steps, |t, y| {
        let r = y[0].hypot(y[1]);
        max_r = max_r.max(r);
        let vx = y[2] + b * y[1];
        let outward = y[0] * vx + y[1] * y[3] > 0.0;
        let far = opts.x_esc.is_some_and(|xe| y[0] < -xe);
        if r > opts.r_esc && outward {
            exit = Some((t, true));
            return true;
        }
        if far {
            exit = Some((t, false));
            return true;
        }
        prev = (t, *y);
        false
    })?;
    let exit = exit.map(|(t, radial)| {
        // bisect the crossing inside the last accepted step
        let g = |y: &[f64; 4]| if radial { y[0].hypot(y[1]) - opts.r_esc } else { -opts.x_esc.unwrap_or(0.0) - y[0] };
        let (t0, y0) = prev;
        if g(&y0) > 0.0 {
            return t;
        }
        let st = Stepper { params, spec, tol: opts.tol };
        let k0 = st.f(y0);
        let (mut lo, mut hi) = (0.0, t - t0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if g(&st.attempt(y0, k0, mid).0) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        t0 + hi
    });
    let drift = (eval_symbol(params, spec, &s) - eval_symbol(params, spec, &s0)).abs();
    let verdict = match exit {
        Some(t) => Verdict::Escaped { exit_time: t },
        None => Verdict::Trapped { t_max: t },
    };
    Ok((s, TrajectoryVerdict { verdict, max_radius: max_r, energy_drift: drift, steps }))
}

/// Phase-space sampling: an `nx × ny` grid of positions in a rectangle, and
/// at each position `n_energy` energies in `[max(a, U), b]` times `n_angle`
/// directions of the kinetic momentum `(ξ + By, η)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPlan {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub n_energy: usize,
    pub n_angle: usize,
}

impl SamplingPlan {
    pub fn states(&self, params: &HamiltonianParams, u: &dyn TotalPotential, a: f64, b: f64) -> Vec<(ClassicalState, f64)> {
        let mut out = Vec::new();
        let coord = |lo: f64, hi: f64, n: usize, i: usize| {
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        for j in 0..self.ny {
            let y = coord(self.y_min, self.y_max, self.ny, j);
            for i in 0..self.nx {
                let x = coord(self.x_min, self.x_max, self.nx, i);
                let u0 = u.eval_real(x, y);
                let lo = a.max(u0);
                if lo > b {
                    continue;
                }
                for e in 0..self.n_energy {
                    let en = lo + (b - lo) * (e as f64 + 0.5) / self.n_energy as f64;
                    let rho = (2.0 * (en - u0)).max(0.0).sqrt();
                    for m in 0..self.n_angle {
                        let ang = 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / self.n_angle as f64;
                        let xi = rho * ang.cos() - params.b_field * y;
                        out.push((ClassicalState::new(x, y, xi, rho * ang.sin()), en));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub state: ClassicalState,
    pub energy: f64,
    pub verdict: Option<TrajectoryVerdict>,
    pub error: Option<ClassicalError>,
}

/// Integrates every sampled state with `a <= p <= b`.
pub fn classify_trapped_grid(
    params: &HamiltonianParams,
    spec: &PotentialSpec,
    a: f64,
    b: f64,
    plan: &SamplingPlan,
    t_max: f64,
    opts: &FlowOptions,
) -> Result<Vec<SampleVerdict>, ClassicalError> {
    if !(a < b) {
        return Err(ClassicalError::InvalidArgument(format!("need a < b, got [{a}, {b}]")));
    }
    let states = plan.states(params, spec, a, b);
    Ok(states
        .into_par_iter()
        .map(|(s, en)| match integrate_flow(params, spec, s, t_max, opts) {
            Ok((_, v)) => SampleVerdict { state: s, energy: en, verdict: Some(v), error: None },
            Err(e) => SampleVerdict { state: s, energy: en, verdict: None, error: Some(e) },
        })
        .collect())
}

pub fn write_verdicts_csv<W: Write>(rows: &[SampleVerdict], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x,y,xi,eta,energy,verdict,exit_time,energy_drift")?;
    for r in rows {
        let s = r.state;
        let (kind, t, drift) = match (&r.verdict, &r.error) {
            (Some(v), _) => match v.verdict {
                Verdict::Trapped { .. } => ("trapped", String::new(), v.energy_drift),
                Verdict::Escaped { exit_time } => ("escaped", format!("{exit_time:.17e}"), v.energy_drift),
            },
            _ => ("failed", String::new(), f64::NAN),
        };
        writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{kind},{t},{drift:.6e}", s.x, s.y, s.xi, s.eta, r.energy)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    /// `None` when no samples were drawn.
    pub std_error: Option<f64>,
    pub method: VolumeMethod,
    pub samples: usize,
    pub seed: Option<u64>,
}

/// Rectangle in the position plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl WellBox {
    fn check(&self, u: &dyn TotalPotential, b: f64) -> Result<(), ClassicalError> {
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(ClassicalError::InvalidArgument(format!("degenerate well box {self:?}")));
        }
        let n = 400;
        for k in 0..=n {
            let s = k as f64 / n as f64;
            let x = self.x_min + s * (self.x_max - self.x_min);
            let y = self.y_min + s * (self.y_max - self.y_min);
            for (px, py) in [(x, self.y_min), (x, self.y_max), (self.x_min, y), (self.x_max, y)] {
                let v = u.eval_real(px, py);
                if !(v > b) {
                    return Err(ClassicalError::NotContained { b, x: px, y: py, value: v });
                }
            }
        }
        Ok(())
    }
}

/// `2π ∬ (b - max(a, U))₊ dx dy` over the box by the `n × n` midpoint rule.
///
/// For fixed `(x, y)` the momentum fiber of `a <= p <= b` is an annulus of
/// area `2π(b - max(a, U))₊` whatever `B` is.
pub fn trapped_volume_closed_form(u: &dyn TotalPotential, a: f64, b: f64, bx: &WellBox, n: usize) -> Result<VolumeEstimate, ClassicalError> {
    if n == 0 {
        return Err(ClassicalError::InvalidArgument("quadrature resolution must be >= 1".into()));
    }
    bx.check(u, b)?;
    let (dx, dy) = ((bx.x_max - bx.x_min) / n as f64, (bx.y_max - bx.y_min) / n as f64);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = bx.y_min + (j as f64 + 0.5) * dy;
            (0..n)
                .map(|i| {
                    let x = bx.x_min + (i as f64 + 0.5) * dx;
                    (b - a.max(u.eval_real(x, y))).max(0.0)
                })
                .sum::<f64>()
        })
        .collect();
    let value = 2.0 * std::f64::consts::PI * rows.iter().sum::<f64>() * dx * dy;
    Ok(VolumeEstimate { value, std_error: Some(0.0), method: VolumeMethod::ClosedForm, samples: n * n, seed: None })
}

/// A box in `(x, y, ξ, η)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub xi: (f64, f64),
    pub eta: (f64, f64),
}

impl PhaseBox {
    /// Covers `{a <= p <= b}` above the well box when `U >= u_min` there.
    pub fn around(bx: &WellBox, b_field: f64, u_min: f64, b: f64) -> Self {
        let rho = (2.0 * (b - u_min)).max(0.0).sqrt() * 1.001;
        let ymax = bx.y_min.abs().max(bx.y_max.abs());
        let xi = rho + b_field * ymax;
        Self { x: (bx.x_min, bx.x_max), y: (bx.y_min, bx.y_max), xi: (-xi, xi), eta: (-rho, rho) }
    }

    pub fn volume(&self) -> f64 {
        (self.x.1 - self.x.0) * (self.y.1 - self.y.0) * (self.xi.1 - self.xi.0) * (self.eta.1 - self.eta.0)
    }
}

/// Samples per independent random stream.
pub const MC_CHUNK: usize = 1 << 16;

/// Hit-or-miss estimate of the volume of `{a <= p <= b}` inside the box.
/// Chunk `c` draws from stream `c` of a ChaCha generator seeded with
/// `seed`, so the result does not depend on the thread count.
pub fn trapped_volume_monte_carlo(
    params: &HamiltonianParams,
    u: &dyn TotalPotential,
    a: f64,
    b: f64,
    bx: &PhaseBox,
    n: usize,
    seed: u64,
) -> VolumeEstimate {
    if n == 0 {
        return VolumeEstimate { value: 0.0, std_error: None, method: VolumeMethod::MonteCarlo, samples: 0, seed: Some(seed) };
    }
    let chunks = n.div_ceil(MC_CHUNK);
    let bf = params.b_field;
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut h = 0u64;
            for _ in 0..count {
                let x = rng.gen_range(bx.x.0..bx.x.1);
                let y = rng.gen_range(bx.y.0..bx.y.1);
                let xi = rng.gen_range(bx.xi.0..bx.xi.1);
                let eta = rng.gen_range(bx.eta.0..bx.eta.1);
                let k = xi + bf * y;
                let p = 0.5 * (k * k + eta * eta) + u.eval_real(x, y);
                if a <= p && p <= b {
                    h += 1;
                }
            }
            h
        })
        .sum();
    let frac = hits as f64 / n as f64;
    let vol = bx.volume();
    VolumeEstimate {
        value: vol * frac,
        std_error: Some(vol * (frac * (1.0 - frac) / n as f64).sqrt()),
        method: VolumeMethod::MonteCarlo,
        samples: n,
        seed: Some(seed),
    }
}
