//! Scenario files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::assembly::{Domain, Grid2D};
use crate::classical::SamplingPlan;
use crate::distortion::DistortionParams;
use crate::potential::{HamiltonianParams, PotentialSpec};
use crate::wellops::{check_containment, Region};

/// A number given once for the whole sweep, or once per `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerH {
    One(f64),
    Many(Vec<f64>),
}

impl PerH {
    pub fn at(&self, i: usize) -> f64 {
        match self {
            PerH::One(v) => *v,
            PerH::Many(v) => v[i],
        }
    }

    fn len_ok(&self, n: usize) -> bool {
        match self {
            PerH::One(_) => true,
            PerH::Many(v) => v.len() == n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(rename = "B")]
    pub b_field: f64,
    /// Semiclassical parameters of the sweep, descending.
    pub h: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurgerySection {
    pub region: Region,
    pub ramp: f64,
    /// Defaults to `b + 2δ`.
    #[serde(default)]
    pub level: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: PerH,
    pub x_max: PerH,
    pub y_min: PerH,
    pub y_max: PerH,
    pub spacing: PerH,
    #[serde(default = "default_max_unknowns")]
    pub max_unknowns: usize,
}

fn default_max_unknowns() -> usize {
    120_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub a: f64,
    pub b: f64,
    /// Defaults to `0.05·(barrier - b)` with the barrier taken as the least
    /// value of `U` on the surgery region boundary.
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottomKnobs {
    /// Compare the lowest `levels` eigenvalues; otherwise everything in `[a, b]`.
    #[serde(default)]
    pub levels: Option<usize>,
    /// Newton seed for the well bottom; defaults to the surgery region center.
    #[serde(default)]
    pub well_seed: Option<(f64, f64)>,
    #[serde(default)]
    pub refine: bool,
    #[serde(default = "default_refine_ratio")]
    pub refine_ratio: f64,
    /// Stop refining once the error estimate is below `refine_target·h²`.
    #[serde(default = "one")]
    pub refine_target: f64,
    /// Also compute the eigenvalues of `Q_θ` in the window.
    #[serde(default)]
    pub resonances: bool,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_cluster_gap")]
    pub cluster_gap: f64,
    #[serde(default = "default_c_max")]
    pub c_max: f64,
    /// Allowed ratio of the matched distance to the discretization error estimate.
    #[serde(default = "default_disc_factor")]
    pub disc_factor: f64,
}

impl Default for BottomKnobs {
    fn default() -> Self {
        Self {
            levels: None,
            well_seed: None,
            refine: false,
            refine_ratio: default_refine_ratio(),
            refine_target: 1.0,
            resonances: false,
            gamma: default_gamma(),
            cluster_gap: default_cluster_gap(),
            c_max: default_c_max(),
            disc_factor: default_disc_factor(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylKnobs {
    #[serde(default = "default_max_rel_dev")]
    pub max_rel_dev: f64,
    /// Also count `Q_θ` eigenvalues with `Re z ∈ [a, b]` and `|Im z| <= im_threshold`.
    #[serde(default)]
    pub im_threshold: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl Default for WeylKnobs {
    fn default() -> Self {
        Self { max_rel_dev: default_max_rel_dev(), im_threshold: None, gamma: default_gamma() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapKnobs {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// `ε` is this multiple of the calibrated width scale.
    #[serde(default = "default_eps_safety")]
    pub eps_safety: f64,
    /// Fixes `ε` instead of calibrating it.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl Default for GapKnobs {
    fn default() -> Self {
        Self { gamma: default_gamma(), eps_safety: default_eps_safety(), epsilon: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NontrapKnobs {
    /// `θ = -i·m_tilde·h·log(1/h)` replaces the configured translation.
    #[serde(default)]
    pub m_tilde: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Probe points along the real axis of the window.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Probe depth below the real axis, as a fraction of `γ`.
    #[serde(default)]
    pub probe_depth: f64,
    /// Added to the exponent measured at the largest `h`.
    #[serde(default = "default_c_margin")]
    pub c_margin: f64,
    /// Fixes `C` instead of fitting it.
    #[serde(default)]
    pub c_fixed: Option<f64>,
    /// Also count the eigenvalues of the undistorted operator in the window.
    #[serde(default = "yes")]
    pub control: bool,
}

impl Default for NontrapKnobs {
    fn default() -> Self {
        Self {
            m_tilde: None,
            gamma: default_gamma(),
            probes: default_probes(),
            probe_depth: 0.0,
            c_margin: default_c_margin(),
            c_fixed: None,
            control: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeKnobs {
    /// Midpoint rule resolution per side.
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
    #[serde(default)]
    pub mc_samples: usize,
    #[serde(default = "default_sigmas")]
    pub mc_sigmas: f64,
}

impl Default for VolumeKnobs {
    fn default() -> Self {
        Self { quadrature: default_quadrature(), mc_samples: 0, mc_sigmas: default_sigmas() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalKnobs {
    /// Sample positions; those inside the surgery region are skipped.
    pub plan: SamplingPlan,
    pub escape_radius: f64,
    #[serde(default)]
    pub escape_x: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_flow_tol")]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    #[serde(default = "default_eig_tol")]
    pub eig_tol: f64,
    #[serde(default)]
    pub bottom: BottomKnobs,
    #[serde(default)]
    pub weyl: WeylKnobs,
    #[serde(default)]
    pub gap: GapKnobs,
    #[serde(default)]
    pub nontrap: NontrapKnobs,
    #[serde(default)]
    pub volume: VolumeKnobs,
    #[serde(default)]
    pub classical: Option<ClassicalKnobs>,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_refine_ratio() -> f64 {
    std::f64::consts::SQRT_2
}
fn default_gamma() -> f64 {
    0.1
}
fn default_cluster_gap() -> f64 {
    1e-3
}
fn default_c_max() -> f64 {
    5.0
}
fn default_disc_factor() -> f64 {
    10.0
}
fn default_max_rel_dev() -> f64 {
    0.15
}
fn default_eps_safety() -> f64 {
    10.0
}
fn default_probes() -> usize {
    3
}
fn default_c_margin() -> f64 {
    0.5
}
fn default_quadrature() -> usize {
    2000
}
fn default_sigmas() -> f64 {
    3.0
}
fn default_flow_tol() -> f64 {
    1e-9
}
fn default_eig_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub potential: PotentialSpec,
    pub params: ParamsSection,
    #[serde(default)]
    pub distortion: Option<DistortionParams>,
    #[serde(default)]
    pub surgery: Option<SurgerySection>,
    pub grid: GridSection,
    pub window: WindowSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: Option<String>,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let c: ScenarioConfig = toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let s = std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.potential.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let hs = &self.params.h;
        if hs.is_empty() {
            return bad("params.h must list at least one value".into());
        }
        if !hs.iter().all(|h| *h > 0.0 && h.is_finite()) {
            return bad(format!("params.h must be positive, got {hs:?}"));
        }
        if !hs.windows(2).all(|w| w[0] > w[1]) {
            return bad(format!("params.h must be strictly descending, got {hs:?}"));
        }
        HamiltonianParams::new(self.params.b_field, hs[0]).map_err(|e| HarnessError::Config(e.to_string()))?;
        let g = &self.grid;
        for (name, v) in [("x_min", &g.x_min), ("x_max", &g.x_max), ("y_min", &g.y_min), ("y_max", &g.y_max), ("spacing", &g.spacing)] {
            if !v.len_ok(hs.len()) {
                return bad(format!("grid.{name} must be one number or one per h ({} values)", hs.len()));
            }
        }
        let (a, b) = (self.window.a, self.window.b);
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return bad(format!("window needs a <= b, got [{a}, {b}]"));
        }
        let delta = self.delta()?;
        if !(delta > 0.0) {
            return bad(format!("window delta must be > 0, got {delta}"));
        }
        if let Some(s) = &self.surgery {
            let level = self.surgery_level()?;
            if !(level > b) {
                return bad(format!("surgery level {level} must lie above b = {b}"));
            }
            if !(s.ramp > 0.0) {
                return bad(format!("surgery ramp must be > 0, got {}", s.ramp));
            }
        }
        if let Some(d) = &self.distortion {
            for &h in hs {
                let dd = self.distortion_for(d, None);
                dd.validate(h).map_err(|e| HarnessError::Config(format!("distortion at h = {h}: {e}")))?;
            }
        }
        Ok(())
    }

    fn distortion_for(&self, d: &DistortionParams, m_tilde: Option<f64>) -> DistortionParams {
        let mut d = *d;
        if let Some(m) = m_tilde {
            d.mode = crate::distortion::ThetaMode::HLogH;
            d.m_tilde = m;
        }
        d
    }

    /// The configured distortion, switched to `h-log-h` when `m_tilde` is given.
    pub fn distortion_params(&self, m_tilde: Option<f64>) -> Option<DistortionParams> {
        self.distortion.as_ref().map(|d| self.distortion_for(d, m_tilde))
    }

    pub fn hamiltonian(&self, h: f64) -> HamiltonianParams {
        HamiltonianParams { b_field: self.params.b_field, h }
    }

    /// Least value of `U` on the surgery region boundary.
    pub fn barrier_estimate(&self) -> Option<f64> {
        self.surgery.as_ref().map(|s| {
            s.region
                .boundary_points(crate::wellops::CONTAINMENT_SAMPLES)
                .into_iter()
                .map(|(x, y)| crate::TotalPotential::eval_real(&self.potential, x, y))
                .fold(f64::INFINITY, f64::min)
        })
    }

    pub fn delta(&self) -> Result<f64, HarnessError> {
        if let Some(d) = self.window.delta {
            return Ok(d);
        }
        match self.barrier_estimate() {
            Some(top) if top > self.window.b => Ok(0.05 * (top - self.window.b)),
            Some(top) => Err(HarnessError::Config(format!(
                "U = {top} on the surgery region boundary does not exceed b = {}; set window.delta or enlarge the region",
                self.window.b
            ))),
            None => Err(HarnessError::Config("window.delta is required without a surgery section".into())),
        }
    }

    pub fn surgery_level(&self) -> Result<f64, HarnessError> {
        match &self.surgery {
            Some(SurgerySection { level: Some(l), .. }) => Ok(*l),
            _ => Ok(self.window.b + 2.0 * self.delta()?),
        }
    }

    /// Checks that the surgery region contains the well part of `{U <= b}`.
    pub fn check_surgery_region(&self) -> Result<(), HarnessError> {
        if let Some(s) = &self.surgery {
            check_containment(&self.potential, &s.region, self.window.b).map_err(HarnessError::from)?;
        }
        Ok(())
    }

    pub fn domain(&self, i: usize) -> Domain {
        let g = &self.grid;
        Domain::new(g.x_min.at(i), g.x_max.at(i), g.y_min.at(i), g.y_max.at(i))
    }

    /// Grid for the `i`-th `h` at spacing `d`.
    pub fn grid_at(&self, i: usize, d: f64) -> Result<Grid2D, HarnessError> {
        let g = Grid2D::with_spacing(self.domain(i), d).map_err(|e| HarnessError::Config(e.to_string()))?;
        if g.len() > self.grid.max_unknowns {
            return Err(HarnessError::Budget { unknowns: g.len(), max: self.grid.max_unknowns });
        }
        Ok(g)
    }
}
