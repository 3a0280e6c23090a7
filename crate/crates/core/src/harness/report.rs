//! Experiment reports and their JSON, CSV and SVG renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::svg;
use super::HarnessError;
use crate::classical::VolumeEstimate;
use crate::wellops::PredictedLevel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Volume,
    Bottom,
    Weyl,
    Gap,
    Nontrap,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Volume => "volume",
            ExperimentKind::Bottom => "bottom",
            ExperimentKind::Weyl => "weyl",
            ExperimentKind::Gap => "gap",
            ExperimentKind::Nontrap => "nontrap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(HarnessError::Config(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl From<&crate::Grid2D> for GridRecord {
    fn from(g: &crate::Grid2D) -> Self {
        let d = g.domain;
        Self { x_min: d.x_min, x_max: d.x_max, y_min: d.y_min, y_max: d.y_max, nx: g.nx, ny: g.ny, dx: g.dx, dy: g.dy }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub seed: u64,
    pub eig_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellRecord {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub z_independent_hint: bool,
}

/// One reference level with its prediction and, when computed, its resonance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub k1: u32,
    pub k2: u32,
    pub prediction: f64,
    pub reference: f64,
    pub resonance_re: Option<f64>,
    pub resonance_im: Option<f64>,
    /// `|reference - prediction| / h²`.
    pub scaled_error: f64,
    /// `C·h² + discretization error`.
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRecord {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub reference: f64,
    pub re: f64,
    pub im: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub lo: f64,
    pub hi: f64,
    pub n_reference: usize,
    pub n_resonances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub pairs: Vec<PairRecord>,
    pub unmatched_reference: Vec<f64>,
    pub unmatched_resonances: Vec<ResonanceRecord>,
    pub clusters: Vec<ClusterRecord>,
    pub cluster_gap: f64,
}

impl Correspondence {
    pub fn max_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.distance).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub a: f64,
    pub b: f64,
    pub reference: usize,
    pub resonances: Option<usize>,
    pub volume: f64,
    pub prediction: f64,
    pub rel_dev: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub re: f64,
    pub im: f64,
    pub norm: f64,
    /// `log‖R‖ / log(1/h)`.
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSummary {
    pub samples: usize,
    pub trapped: usize,
    pub escaped: usize,
    pub failed: usize,
}

/// Everything computed at one `h`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HRecord {
    pub h: f64,
    pub grid: Option<GridRecord>,
    pub theta: Option<(f64, f64)>,
    /// Richardson estimate from the next coarser grid.
    pub disc_error: Option<f64>,
    pub coarse_grid: Option<GridRecord>,
    pub reference: Vec<f64>,
    pub resonances: Vec<ResonanceRecord>,
    pub predictions: Vec<PredictedLevel>,
    pub levels: Vec<LevelRow>,
    pub unmatched_predictions: Vec<f64>,
    pub correspondence: Option<Correspondence>,
    pub count: Option<CountRecord>,
    pub clusters: Vec<ClusterRecord>,
    pub band_count: Option<usize>,
    pub probes: Vec<ProbeRecord>,
    pub control_count: Option<usize>,
    pub scan_complete: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub name: String,
    pub value: f64,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance, detail: detail.into() }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value: if passed { 1.0 } else { 0.0 }, tolerance: 1.0, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub scenario: Option<ScenarioConfig>,
    pub provenance: Provenance,
    pub notes: Vec<String>,
    pub well: Option<WellRecord>,
    pub classical: Option<ClassicalSummary>,
    pub volumes: Vec<VolumeEstimate>,
    pub sweep: Vec<HRecord>,
    pub calibration: Vec<Calibration>,
    pub verdicts: Vec<Check>,
}

impl ExperimentReport {
    pub fn empty(experiment: ExperimentKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            scenario: None,
            provenance: Provenance { crate_version: env!("CARGO_PKG_VERSION").into(), seed: 0, eig_tol: 0.0 },
            notes: vec![],
            well: None,
            classical: None,
            volumes: vec![],
            sweep: vec![],
            calibration: vec![],
            verdicts: vec![],
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.verdicts.iter().find(|c| c.name == name)
    }

    pub fn calibration(&self, name: &str) -> Option<f64> {
        self.calibration.iter().find(|c| c.name == name).map(|c| c.value)
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        serde_json::to_string_pretty(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Flat tables: `(file stem, header, rows)`.
    pub fn tables(&self) -> Vec<(String, String, Vec<String>)> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut levels = vec![];
        let mut counts = vec![];
        let mut res = vec![];
        let mut clusters = vec![];
        let mut probes = vec![];
        for r in &self.sweep {
            let h = r.h;
            for l in &r.levels {
                levels.push(format!(
                    "{h},{},{},{},{},{},{},{},{}",
                    l.k1,
                    l.k2,
                    l.prediction,
                    l.reference,
                    opt(l.resonance_re),
                    opt(l.resonance_im),
                    l.scaled_error,
                    l.tolerance
                ));
            }
            if let Some(c) = &r.count {
                counts.push(format!(
                    "{h},{},{},{},{},{},{},{},{}",
                    c.a,
                    c.b,
                    c.reference,
                    c.resonances.map(|v| v.to_string()).unwrap_or_default(),
                    c.volume,
                    c.prediction,
                    c.rel_dev,
                    c.tolerance
                ));
            }
            for z in &r.resonances {
                res.push(format!("{h},{},{},{}", z.re, z.im, z.residual));
            }
            for c in &r.clusters {
                clusters.push(format!("{h},{},{},{},{}", c.lo, c.hi, c.n_reference, c.n_resonances));
            }
            for p in &r.probes {
                probes.push(format!("{h},{},{},{},{}", p.re, p.im, p.norm, p.exponent));
            }
        }
        let volumes = self
            .volumes
            .iter()
            .map(|v| {
                format!(
                    "{},{},{},{},{}",
                    serde_json::to_value(v.method).ok().and_then(|m| m.as_str().map(String::from)).unwrap_or_default(),
                    v.value,
                    opt(v.std_error),
                    v.samples,
                    v.seed.map(|s| s.to_string()).unwrap_or_default()
                )
            })
            .collect();
        let verdicts = self
            .verdicts
            .iter()
            .map(|c| format!("{},{},{},{}", c.name, c.passed, c.value, c.tolerance))
            .collect();
        let mut out = vec![
            ("levels".into(), "h,k1,k2,prediction,reference,resonance_re,resonance_im,scaled_error,tolerance".into(), levels),
            ("counts".into(), "h,a,b,reference,resonances,volume,prediction,rel_dev,tolerance".into(), counts),
            ("resonances".into(), "h,re,im,residual".into(), res),
            ("clusters".into(), "h,lo,hi,n_reference,n_resonances".into(), clusters),
            ("probes".into(), "h,re,im,norm,exponent".into(), probes),
            ("volumes".into(), "method,value,std_error,samples,seed".into(), volumes),
            ("verdicts".into(), "name,passed,value,tolerance".into(), verdicts),
        ];
        out.retain(|t| !t.2.is_empty() || t.0 == "verdicts");
        out
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), HarnessError> {
    fs::write(path, body).map_err(|e| HarnessError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Writes `<experiment>.json`, `<experiment>_<table>.csv` and
/// `<experiment>.svg` into `dir`; returns the paths written.
pub fn emit_report(report: &ExperimentReport, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io { path: dir.display().to_string(), message: e.to_string() })?;
    let stem = report.experiment.name();
    let mut written = vec![];
    for f in formats {
        match f {
            Format::Json => {
                let p = dir.join(format!("{stem}.json"));
                let mut body = report.to_json()?;
                body.push('\n');
                write_file(&p, &body)?;
                written.push(p);
            }
            Format::Csv => {
                for (name, header, rows) in report.tables() {
                    let p = dir.join(format!("{stem}_{name}.csv"));
                    let mut body = String::new();
                    let _ = writeln!(body, "{header}");
                    for r in rows {
                        let _ = writeln!(body, "{r}");
                    }
                    write_file(&p, &body)?;
                    written.push(p);
                }
            }
            Format::Svg => {
                let p = dir.join(format!("{stem}.svg"));
                write_file(&p, &svg::render(report))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}
