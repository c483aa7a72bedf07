//! JSON problem files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bolza::{BolzaSpec, SolveOptions};
use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::linalg::{Matrix, Vector};
use crate::sets::{CompactConvexSet, Region};
use crate::setmap::{MapClass, SetMap};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub meta: Meta,
    pub dynamics: Dynamics,
    pub cost: Cost,
    #[serde(default)]
    pub constraints: Constraints,
    pub localization: Localization,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub x0: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassName {
    AffineControl,
    SmoothInverse,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    pub class: ClassName,
    #[serde(default)]
    pub g1: Vec<String>,
    #[serde(rename = "M", default)]
    pub m: Vec<Vec<String>>,
    #[serde(default)]
    pub control_set: Option<SetLiteral>,
    /// `ψ` in the variables `v1..vn`, for the smooth-inverse class
    #[serde(default)]
    pub psi: Vec<String>,
    pub domain_box: DomainBox,
    #[serde(default)]
    pub rosl_l: f64,
    #[serde(rename = "m_F", default)]
    pub m_f: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cost {
    pub phi0: String,
    pub f: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct Constraints {
    #[serde(default)]
    pub ineq: Vec<String>,
    #[serde(default)]
    pub eq: Vec<String>,
    #[serde(default)]
    pub omega: OmegaLiteral,
    #[serde(rename = "L", default)]
    pub lipschitz: Option<f64>,
}


#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaLiteral {
    /// `"whole_space"`
    Keyword(String),
    Set(SetLiteral),
}

impl Default for OmegaLiteral {
    fn default() -> Self {
        OmegaLiteral::Keyword("whole_space".into())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Localization {
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub smoothing: bool,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_seeds() -> usize {
    8
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: default_tol(),
            seeds: default_seeds(),
            smoothing: false,
        }
    }
}

/// Set literals, e.g. `{"box": {"lo": [-1], "hi": [1]}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetLiteral {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polytope { vertices: Vec<Vec<f64>> },
    Segment { a: Vec<f64>, b: Vec<f64> },
    Point(Vec<f64>),
    AffineImage {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        base: Box<SetLiteral>,
    },
}

fn vector(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

impl SetLiteral {
    pub fn build(&self) -> Result<CompactConvexSet> {
        Ok(match self {
            SetLiteral::Box { lo, hi } => CompactConvexSet::new_box(vector(lo), vector(hi))?,
            SetLiteral::Ball { center, radius } => CompactConvexSet::ball(vector(center), *radius)?,
            SetLiteral::Polytope { vertices } => CompactConvexSet::polytope(vertices.iter().map(|v| vector(v)).collect())?,
            SetLiteral::Segment { a, b } => CompactConvexSet::segment(vector(a), vector(b))?,
            SetLiteral::Point(p) => CompactConvexSet::point(vector(p)),
            SetLiteral::AffineImage { matrix, offset, base } => {
                let rows = matrix.len();
                let cols = matrix.first().map_or(0, Vec::len);
                if matrix.iter().any(|r| r.len() != cols) {
                    return Err(Error::Config("ragged matrix in affine_image".into()));
                }
                let m = Matrix::from_fn(rows, cols, |i, j| matrix[i][j]);
                CompactConvexSet::affine_image(m, vector(offset), base.build()?)?
            }
        })
    }
}

fn parse_all(texts: &[String]) -> Result<Vec<Expr>> {
    texts.iter().map(|t| parse_expression(t)).collect()
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("problem file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn set_map(&self) -> Result<SetMap> {
        let d = &self.dynamics;
        let n = self.meta.n;
        if d.domain_box.lo.len() != n || d.domain_box.hi.len() != n {
            return Err(Error::Config(format!("domain_box must have dimension {n}")));
        }
        let class = match d.class {
            ClassName::AffineControl => {
                if !d.psi.is_empty() {
                    return Err(Error::Config("psi is only valid for smooth_inverse".into()));
                }
                let controls = d
                    .control_set
                    .as_ref()
                    .ok_or_else(|| Error::Config("affine_control needs a control_set".into()))?
                    .build()?;
                MapClass::AffineControl {
                    g1: parse_all(&d.g1)?,
                    m: d.m.iter().map(|row| parse_all(row)).collect::<Result<_>>()?,
                    controls,
                }
            }
            ClassName::SmoothInverse => {
                if !d.g1.is_empty() || !d.m.is_empty() || d.control_set.is_some() {
                    return Err(Error::Config("smooth_inverse takes psi only".into()));
                }
                MapClass::SmoothInverse { psi: parse_all(&d.psi)? }
            }
        };
        let map = SetMap::new(class, vector(&d.domain_box.lo), vector(&d.domain_box.hi))?
            .with_rosl(d.rosl_l)
            .with_horizon(self.meta.horizon);
        Ok(match d.m_f {
            Some(m) => map.with_bound(m),
            None => map,
        })
    }

    pub fn spec(&self) -> Result<BolzaSpec> {
        let c = &self.constraints;
        let omega = match &c.omega {
            OmegaLiteral::Keyword(k) if k == "whole_space" => Region::WholeSpace,
            OmegaLiteral::Keyword(k) => {
                return Err(Error::Config(format!("unknown omega keyword {k:?}")));
            }
            OmegaLiteral::Set(s) => Region::Set(s.build()?),
        };
        let has_endpoint = !c.ineq.is_empty() || !c.eq.is_empty();
        let lipschitz = match c.lipschitz {
            Some(l) => l,
            None if has_endpoint => {
                return Err(Error::Config("constraints.L is required with endpoint constraints".into()));
            }
            None => 1.0,
        };
        let spec = BolzaSpec::new(
            self.set_map()?,
            vector(&self.meta.x0),
            parse_expression(&self.cost.phi0)?,
            parse_expression(&self.cost.f)?,
            self.localization.eps,
        )?;
        spec.with_constraints(parse_all(&c.ineq)?, parse_all(&c.eq)?, lipschitz)?
            .with_omega(omega)
    }

    pub fn solve_options(&self, seed: u64) -> SolveOptions {
        SolveOptions {
            tol: self.solver.tol,
            starts: self.solver.seeds,
            seed,
            smoothing: self.solver.smoothing,
            ..SolveOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{
        "meta": {"n": 1, "T": 1.0, "x0": [0.0]},
        "dynamics": {"class": "affine_control", "g1": ["0"], "M": [["1"]],
                     "control_set": {"box": {"lo": [-1], "hi": [1]}},
                     "domain_box": {"lo": [-5], "hi": [5]}, "rosl_l": 0.0, "m_F": 1.0},
        "cost": {"phi0": "x1", "f": "0"},
        "constraints": {"ineq": [], "eq": ["x1 + 1"], "omega": "whole_space", "L": 1.0},
        "localization": {"eps": 10.0},
        "solver": {"tol": 1e-8, "seeds": 4, "smoothing": false}
    }"#;

    #[test]
    fn parses_scalar_problem() {
        let file = ProblemFile::from_json(SCALAR).unwrap();
        let spec = file.spec().unwrap();
        assert_eq!(spec.r(), 1);
        assert_eq!(spec.dynamics.m_f, 1.0);
        assert_eq!(file.solve_options(3).starts, 4);
        let again = ProblemFile::from_json(&file.to_json()).unwrap();
        assert_eq!(again.to_json(), file.to_json());
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = SCALAR.replace("\"eps\": 10.0", "\"eps\": 10.0, \"radius\": 2");
        assert!(matches!(ProblemFile::from_json(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_expressions_and_missing_l() {
        let bad = SCALAR.replace("\"phi0\": \"x1\"", "\"phi0\": \"x1 +\"");
        assert!(matches!(
            ProblemFile::from_json(&bad).unwrap().spec(),
            Err(Error::Syntax { .. })
        ));
        let bad = SCALAR.replace(", \"L\": 1.0", "");
        assert!(matches!(
            ProblemFile::from_json(&bad).unwrap().spec(),
            Err(Error::Config(_))
        ));
        let bad = SCALAR.replace("\"f\": \"0\"", "\"f\": \"u1\"");
        assert!(ProblemFile::from_json(&bad).unwrap().spec().is_err());
    }

    #[test]
    fn omega_set_literal() {
        let text = SCALAR.replace("\"omega\": \"whole_space\"", "\"omega\": {\"ball\": {\"center\": [-1], \"radius\": 0.5}}");
        let spec = ProblemFile::from_json(&text).unwrap().spec().unwrap();
        assert!(matches!(spec.omega, Region::Set(_)));
        let text = SCALAR.replace("\"omega\": \"whole_space\"", "\"omega\": \"everywhere\"");
        assert!(ProblemFile::from_json(&text).unwrap().spec().is_err());
    }

    #[test]
    fn smooth_inverse_class() {
        let text = r#"{
            "meta": {"n": 1, "T": 1.0, "x0": [0.0]},
            "dynamics": {"class": "smooth_inverse", "psi": ["v1^3 + v1"],
                         "domain_box": {"lo": [-2], "hi": [2]}},
            "cost": {"phi0": "x1", "f": "0"},
            "localization": {"eps": 1.0}
        }"#;
        let map = ProblemFile::from_json(text).unwrap().set_map().unwrap();
        assert!(!map.is_affine_control());
    }
}
