//! Machine-readable reports. Field order is fixed by the struct layout and
//! floats are written in shortest round-trip form, so equal inputs give
//! byte-identical output.

use cgdare::numerics::{Matrix, TolerancePolicy};
use cgdare::spectral::C64;
use cgdare::Subspace;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1";

pub type Rows = Vec<Vec<f64>>;
/// `[re, im]`
pub type Complex = [f64; 2];

pub fn rows(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn complex_list(values: &[C64]) -> Vec<Complex> {
    values.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    pub n: usize,
    pub m: Option<usize>,
    pub tolerance: ToleranceReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<CandidateReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stein: Option<SteinSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabilize: Option<StabilizeSection>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(command: &str, n: usize, m: Option<usize>, tol: &TolerancePolicy) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            n,
            m,
            tolerance: ToleranceReport::from(tol),
            solve: None,
            candidates: None,
            stein: None,
            spectral: None,
            stabilize: None,
            checks: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, pass: bool, value: Option<f64>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            value,
        });
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut text = String::new();
        write_value(&value, 0, &mut text);
        text.push('\n');
        text
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

/// Two-space indented JSON with arrays of scalars kept on one line, so each
/// matrix row reads as a row.
fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize, out: &mut String| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(item, depth, out);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(depth + 1, out);
                write_value(item, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (key, item)) in map.iter().enumerate() {
                pad(depth + 1, out);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(item, depth + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push('}');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceReport {
    pub rank_rel: f64,
    pub conv_rel: f64,
    pub psd_clip: f64,
    pub max_iter: usize,
}

impl From<&TolerancePolicy> for ToleranceReport {
    fn from(t: &TolerancePolicy) -> Self {
        Self {
            rank_rel: t.rank_rel,
            conv_rel: t.conv_rel,
            psd_clip: t.psd_clip,
            max_iter: t.max_iter,
        }
    }
}

/// One named invariant with its verdict and, when meaningful, the measured
/// quantity behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceReport {
    pub dim: usize,
    /// Orthonormal basis, one column per direction.
    pub basis: Rows,
}

impl From<&Subspace> for SubspaceReport {
    fn from(s: &Subspace) -> Self {
        Self {
            dim: s.dim(),
            basis: rows(s.basis()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSection {
    pub status: String,
    pub iterations: usize,
    pub kernel_stationary_at: usize,
    pub monotone: bool,
    pub kernel_chain_monotone: bool,
    pub x_bar: Rows,
    pub classification: Option<String>,
    pub analysis: Option<SolutionAnalysis>,
}

/// Quantities attached to a converged minimal solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionAnalysis {
    pub residual_norm: f64,
    pub k_x: Rows,
    pub g_x: Rows,
    pub r_x: Rows,
    pub a_x: Rows,
    pub ker_x_bar: SubspaceReport,
    pub v_star: SubspaceReport,
    pub r0: SubspaceReport,
    pub fixed_spectrum: Vec<Complex>,
    pub off_r0_spectrum: Vec<Complex>,
    pub optimal_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub index: usize,
    pub x: Rows,
    pub classification: String,
    pub residual_norm: f64,
    pub drlmi_holds: bool,
    pub kernel_condition: bool,
    pub kernel_identity: bool,
    pub ker_r_x_dim: usize,
    pub ker_xb_and_r_dim: usize,
    pub ker_x: SubspaceReport,
    pub ker_x_output_nulling: bool,
    pub k_x_is_friend: bool,
    pub r0_dim: usize,
    /// `‖X · basis(R₀)‖_F`
    pub x_r0_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinSection {
    pub unmixed: bool,
    pub consistent: bool,
    pub unique: bool,
    pub residual: f64,
    pub particular: Option<Rows>,
    pub homogeneous_basis: Vec<Rows>,
    pub members: Vec<SteinMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinMember {
    pub coefficients: Vec<f64>,
    pub x: Rows,
    pub residual: f64,
    pub ker_x_dim: usize,
    pub a_invariant: bool,
    pub contained_in_ker_q: bool,
    pub equals_unobservable: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSection {
    pub samples: usize,
    pub seed: u64,
    pub points: Vec<Complex>,
    pub normal_rank: usize,
    pub normal_rank_doubled: usize,
    pub solutions: Vec<SpectralSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSolution {
    /// `"x_bar"` or `"candidate <i>"`.
    pub source: String,
    pub classification: String,
    pub rank_r_x: usize,
    /// Rank equality with the normal rank for DARE/CGDARE solutions, `≤` for
    /// DRLMI-only ones; absent for other candidates.
    pub consistent: Option<bool>,
    pub max_pi_x_identity_residual: Option<f64>,
    pub max_spectral_factor_residual: Option<f64>,
    pub max_t_inverse_residual: Option<f64>,
    pub max_factorized_residual: Option<f64>,
    /// Sample points skipped because they fall near a pole of `A_X`.
    pub skipped_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizeSection {
    pub requested_poles: Vec<Complex>,
    pub r0_dim: usize,
    pub l: Rows,
    pub a_cl: Rows,
    pub b_g_l: Rows,
    pub placed_poles: Vec<Complex>,
    pub fixed_poles: Vec<Complex>,
    pub fixed_poles_removed: bool,
    pub off_r0_spectrum: Vec<Complex>,
    pub cost: Option<CostReport>,
    pub cost_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub x0: Vec<f64>,
    pub simulated: f64,
    pub optimal: f64,
    pub residual: f64,
    pub horizon: usize,
}
