//! Problem files: JSON with row-major matrices.

use std::fmt;
use std::path::Path;

use cgdare::numerics::{ensure_symmetric, Matrix, TolerancePolicy};
use cgdare::PopovTriple;
use nalgebra::DVector;
use serde::Deserialize;

use crate::CliError;

type Rows = Vec<Vec<f64>>;

/// Optional tolerance overrides inside a problem file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub rank_rel: Option<f64>,
    pub conv_rel: Option<f64>,
    pub psd_clip: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    n: usize,
    m: Option<usize>,
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B")]
    b: Option<Rows>,
    #[serde(rename = "Q")]
    q: Rows,
    #[serde(rename = "R")]
    r: Option<Rows>,
    #[serde(rename = "S")]
    s: Option<Rows>,
    #[serde(rename = "C")]
    c: Option<Rows>,
    #[serde(rename = "D")]
    d: Option<Rows>,
    #[serde(rename = "X_candidates")]
    x_candidates: Option<Vec<Rows>>,
    x0: Option<Vec<f64>>,
    tol: Option<ToleranceOverrides>,
}

/// A parsed problem file whose matrices have the declared shapes.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub n: usize,
    pub m: Option<usize>,
    pub a: Matrix,
    pub b: Option<Matrix>,
    pub q: Matrix,
    pub r: Option<Matrix>,
    pub s: Option<Matrix>,
    pub factor: Option<(Matrix, Matrix)>,
    pub x_candidates: Vec<Matrix>,
    pub x0: Option<DVector<f64>>,
    pub tol: ToleranceOverrides,
}

/// Where in the file a validation problem sits.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.message)
    }
}

fn field_error(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Field(FieldError {
        field: field.into(),
        message: message.into(),
    })
}

fn to_matrix(field: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<Matrix, CliError> {
    if rows.len() != nrows {
        return Err(field_error(
            field,
            format!("expected {nrows} rows, found {}", rows.len()),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(field_error(
                format!("{field}[{i}]"),
                format!("expected {ncols} entries, found {}", row.len()),
            ));
        }
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn require<'a, T>(value: &'a Option<T>, field: &str, command: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| field_error(field, format!("required by `{command}`")))
}

impl ProblemFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawProblem = serde_json::from_str(text).map_err(|e| CliError::Syntax(e.to_string()))?;
        let n = raw.n;
        if n == 0 {
            return Err(field_error("n", "state dimension must be at least 1"));
        }
        if raw.m == Some(0) {
            return Err(field_error("m", "input dimension must be at least 1"));
        }
        let a = to_matrix("A", &raw.a, n, n)?;
        let q = to_matrix("Q", &raw.q, n, n)?;
        let for_m =
            |field: &str, rows: &Option<Rows>, r: usize, c: Option<usize>| -> Result<Option<Matrix>, CliError> {
                match rows {
                    None => Ok(None),
                    Some(rows) => {
                        let c = c.ok_or_else(|| field_error("m", format!("required when `{field}` is given")))?;
                        to_matrix(field, rows, r, c).map(Some)
                    }
                }
            };
        let b = for_m("B", &raw.b, n, raw.m)?;
        let r = match (&raw.r, raw.m) {
            (Some(rows), Some(m)) => Some(to_matrix("R", rows, m, m)?),
            (Some(_), None) => return Err(field_error("m", "required when `R` is given")),
            (None, _) => None,
        };
        let s = for_m("S", &raw.s, n, raw.m)?;
        let factor = match (&raw.c, &raw.d) {
            (None, None) => None,
            (Some(_), None) => return Err(field_error("D", "required when `C` is given")),
            (None, Some(_)) => return Err(field_error("C", "required when `D` is given")),
            (Some(c), Some(d)) => {
                let p = c.len();
                let c = to_matrix("C", c, p, n)?;
                let m = raw.m.ok_or_else(|| field_error("m", "required when `D` is given"))?;
                let d = to_matrix("D", d, p, m)?;
                Some((c, d))
            }
        };
        let x_candidates = raw
            .x_candidates
            .unwrap_or_default()
            .iter()
            .enumerate()
            .map(|(i, rows)| to_matrix(&format!("X_candidates[{i}]"), rows, n, n))
            .collect::<Result<Vec<_>, _>>()?;
        let x0 = match raw.x0 {
            None => None,
            Some(v) if v.len() == n => Some(DVector::from_vec(v)),
            Some(v) => return Err(field_error("x0", format!("expected {n} entries, found {}", v.len()))),
        };
        Ok(Self {
            n,
            m: raw.m,
            a,
            b,
            q,
            r,
            s,
            factor,
            x_candidates,
            x0,
            tol: raw.tol.unwrap_or_default(),
        })
    }

    /// Policy from the defaults, then the file, then the command line.
    pub fn tolerance(&self, cli_tol: Option<f64>, cli_max_iter: Option<usize>) -> Result<TolerancePolicy, CliError> {
        let mut policy = TolerancePolicy::default();
        let o = &self.tol;
        policy.rank_rel = o.rank_rel.unwrap_or(policy.rank_rel);
        policy.conv_rel = o.conv_rel.unwrap_or(policy.conv_rel);
        policy.psd_clip = o.psd_clip.unwrap_or(policy.psd_clip);
        policy.max_iter = o.max_iter.unwrap_or(policy.max_iter);
        if let Some(t) = cli_tol {
            policy.rank_rel = t;
            policy.conv_rel = t;
            policy.psd_clip = t;
        }
        if let Some(k) = cli_max_iter {
            policy.max_iter = k;
        }
        policy.validate().map_err(|e| field_error("tol", e.to_string()))?;
        Ok(policy)
    }

    pub fn triple(&self, command: &str, tol: &TolerancePolicy) -> Result<PopovTriple, CliError> {
        require(&self.m, "m", command)?;
        let b = require(&self.b, "B", command)?.clone();
        let r = require(&self.r, "R", command)?.clone();
        let s = require(&self.s, "S", command)?.clone();
        let (a, q) = (self.a.clone(), self.q.clone());
        let built = match &self.factor {
            None => PopovTriple::new(a, b, q, r, s, tol),
            Some((c, d)) => PopovTriple::with_factor(a, b, q, r, s, c.clone(), d.clone(), tol),
        };
        built.map_err(CliError::Invalid)
    }

    /// Candidates checked for symmetry.
    pub fn candidates(&self, tol: &TolerancePolicy) -> Result<&[Matrix], CliError> {
        for (i, x) in self.x_candidates.iter().enumerate() {
            ensure_symmetric(x, "X", tol).map_err(|e| field_error(format!("X_candidates[{i}]"), e.to_string()))?;
        }
        Ok(&self.x_candidates)
    }
}
