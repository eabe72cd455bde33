//! Serializable experiment reports.
//!
//! JSON reports carry the full witnesses; CSV companions expose the plot
//! columns in a fixed order. Struct field order is the serialization order,
//! and timings are `null` unless explicitly requested, so identical inputs
//! produce byte-identical reports.

use crate::circle_map::CircleMap;
use crate::cocycle::RoofFunction;
use crate::genericity::{ConstantsCheck, JacSurvey, ProofConstants, ScanRow, WitnessGroup};
use serde::{Deserialize, Serialize};

pub const CAPTIVITY_SCHEMA: &str = "captivity-report/v1";
pub const SCAN_SCHEMA: &str = "scan-report/v1";
pub const CONSTANTS_SCHEMA: &str = "constants-report/v1";
pub const DISTORTION_SCHEMA: &str = "distortion-report/v1";
pub const COBOUNDARY_SCHEMA: &str = "coboundary-report/v1";
pub const APPENDIX_A_SCHEMA: &str = "ntilde-report/v1";
pub const WITNESS_SCHEMA: &str = "witness-report/v1";
pub const JAC_SCHEMA: &str = "jac-report/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapMeta {
    pub degree: usize,
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub upper_lambda: f64,
}

impl MapMeta {
    pub fn of(map: &CircleMap) -> Self {
        let (lambda, upper_lambda) = map.expansion_bounds();
        MapMeta {
            degree: map.degree(),
            sin: map.perturbation().sin.clone(),
            cos: map.perturbation().cos.clone(),
            lambda,
            upper_lambda,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauMeta {
    Trig { constant: f64, sin: Vec<f64>, cos: Vec<f64>, sup_deriv: f64 },
    Coboundary { phi_sin: Vec<f64>, phi_cos: Vec<f64>, c: f64, sup_deriv: f64 },
}

impl TauMeta {
    pub fn of(tau: &RoofFunction) -> Self {
        if let Some(p) = tau.as_trig() {
            TauMeta::Trig {
                constant: p.constant,
                sin: p.sin.clone(),
                cos: p.cos.clone(),
                sup_deriv: tau.sup_deriv(),
            }
        } else {
            let (phi, c) = tau.as_coboundary().expect("roof is trig or coboundary");
            TauMeta::Coboundary {
                phi_sin: phi.sin.clone(),
                phi_cos: phi.cos.clone(),
                c,
                sup_deriv: tau.sup_deriv(),
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptivityMeta {
    pub map: MapMeta,
    pub tau: TauMeta,
    pub r: f64,
    pub theta_tau: f64,
    pub theta_r: f64,
    pub strategy: String,
    pub seed: Option<u64>,
    pub truncated_grid: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptivityRecord {
    pub n: usize,
    pub ncal: u64,
    pub root: f64,
    pub witness_x: f64,
    pub witness_slope: f64,
    pub witness_words: Vec<Vec<u8>>,
    pub weighted_m: Option<f64>,
    pub weighted_n: Option<f64>,
    pub chi: Option<f64>,
    pub marginal: bool,
    pub wall_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptivityReport {
    pub schema: String,
    pub meta: CaptivityMeta,
    pub records: Vec<CaptivityRecord>,
    /// Advisory Fekete flags: doubling pairs whose roots increased beyond
    /// the exact-sup slack.
    pub fekete_advisories: Vec<(usize, usize)>,
}

impl CaptivityReport {
    pub fn any_marginal(&self) -> bool {
        self.records.iter().any(|r| r.marginal)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Fixed column order: `n, ncal, root, m, n_weighted, chi`.
pub fn captivity_csv(report: &CaptivityReport) -> String {
    let mut out = String::from("n,ncal,root,m,n_weighted,chi\n");
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n,
            r.ncal,
            r.root,
            fmt_opt(r.weighted_m),
            fmt_opt(r.weighted_n),
            fmt_opt(r.chi),
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub schema: String,
    pub map: MapMeta,
    pub tau: TauMeta,
    pub family_dim: usize,
    pub basis_max_freq: usize,
    pub basis_scale: f64,
    pub r: f64,
    pub rho: f64,
    pub grid_points: usize,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<ScanRow>,
}

pub fn scan_csv(report: &ScanReport) -> String {
    let mut out = String::from("n,hits,fraction\n");
    for row in &report.rows {
        out.push_str(&format!("{},{},{}\n", row.n, row.hits, row.fraction));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub schema: String,
    pub rho: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub upper_lambda: f64,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub q: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub epsilon: f64,
    pub intervals: Vec<(f64, f64)>,
    pub checks: ConstantsCheck,
    pub checks_pass: bool,
}

impl ConstantsReport {
    pub fn of(constants: &ProofConstants) -> Self {
        let checks = constants.check();
        ConstantsReport {
            schema: CONSTANTS_SCHEMA.to_string(),
            rho: constants.rho,
            lambda: constants.lambda,
            upper_lambda: constants.upper_lambda,
            big_n: constants.big_n,
            q: constants.q,
            j: constants.j(),
            epsilon: constants.epsilon,
            intervals: constants.intervals.clone(),
            checks,
            checks_pass: checks.all(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionRecord {
    pub x: f64,
    pub n: usize,
    pub sum: f64,
    /// `(b, count)` pairs for the small-derivative counts.
    pub small_counts: Vec<(f64, u64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionReport {
    pub schema: String,
    pub map: MapMeta,
    pub records: Vec<DistortionRecord>,
    pub max_sum: f64,
    pub min_sum: f64,
    pub max_over_min: f64,
}

pub fn distortion_csv(report: &DistortionReport) -> String {
    let mut out = String::from("x,n,sum\n");
    for r in &report.records {
        out.push_str(&format!("{},{},{}\n", r.x, r.n, r.sum));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoboundaryReport {
    pub schema: String,
    pub map: MapMeta,
    pub tau: TauMeta,
    pub x: f64,
    pub n: usize,
    pub spread: f64,
    pub max_period: usize,
    pub birkhoff_spread: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NtildeRecord {
    pub n: usize,
    pub r_tilde: f64,
    pub lower: u64,
    pub upper: u64,
    pub ncal: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NtildeReport {
    pub schema: String,
    pub map: MapMeta,
    pub tau: TauMeta,
    pub r: f64,
    pub strategy: String,
    pub records: Vec<NtildeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessReport {
    pub schema: String,
    pub map: MapMeta,
    pub tau: TauMeta,
    pub r: f64,
    pub n: usize,
    pub constants: ConstantsReport,
    pub found: bool,
    pub x: Option<f64>,
    pub slope: Option<f64>,
    pub class_index: Option<usize>,
    pub group_size_floor: Option<f64>,
    pub groups: Vec<WitnessGroupReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessGroupReport {
    pub prefix: Vec<u8>,
    pub size: usize,
    pub members: Vec<Vec<u8>>,
}

impl WitnessGroupReport {
    pub fn of(group: &WitnessGroup) -> Self {
        WitnessGroupReport {
            prefix: group.prefix.symbols().to_vec(),
            size: group.members.len(),
            members: group.members.iter().map(|w| w.symbols().to_vec()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacReport {
    pub schema: String,
    pub map: MapMeta,
    pub family_dim: usize,
    pub n: usize,
    pub q: usize,
    pub rows: usize,
    pub trials: usize,
    pub min_jac: f64,
    pub required_scale: Option<f64>,
}

impl JacReport {
    pub fn of(map: &CircleMap, family_dim: usize, n: usize, q: usize, survey: &JacSurvey) -> Self {
        JacReport {
            schema: JAC_SCHEMA.to_string(),
            map: MapMeta::of(map),
            family_dim,
            n,
            q,
            rows: survey.rows,
            trials: survey.trials,
            min_jac: survey.min_jac,
            required_scale: survey.required_scale,
        }
    }
}

/// Canonical JSON rendering: pretty-printed with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}
