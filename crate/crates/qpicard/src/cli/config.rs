//! TOML run configuration.
//!
//! ```toml
//! [equation]
//! q_re = 3.0
//! q_im = 0.0
//! mode = "T1"
//! a = ["0.05", "0.15/z"]   # a_1, a_2, …
//! b = ["1/z"]              # b_1, …
//!
//! [domain]                 # optional; defaults depend on the mode
//! rho = 3.0
//!
//! [grid]                   # optional; defaults to 256 points on the patch
//! count = 256
//!
//! [tolerances]             # optional
//! stop_tol = 1e-12
//!
//! scaling_rule = "complex" # or "modulus"
//!
//! [output]                 # optional; solve writes here
//! csv = "solution.csv"
//! json = "report.json"
//! ```
//!
//! Unknown keys are rejected. Complex quantities are given as separate
//! real/imaginary keys, never parsed from strings.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

use crate::domain::{grid_on_patch, DomainSpec, Patch};
use crate::expr::{parse_expr, Expression, ParseError};
use crate::operator::{ScalingRule, TheoremMode};
use crate::series::{CoefficientSet, SeriesError};
use crate::solver::{ProblemSpec, SolverError, Tolerances};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub equation: EquationConfig,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub tolerances: Option<TolerancesConfig>,
    #[serde(default)]
    pub scaling_rule: Option<ScalingRule>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationConfig {
    pub q_re: f64,
    pub q_im: f64,
    pub mode: TheoremMode,
    /// Numerator coefficient expressions `a_1 … a_p`; `a[0]` is always `a_1`.
    pub a: Vec<String>,
    /// Denominator coefficient expressions `b_1 … b_t`.
    #[serde(default)]
    pub b: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub rho: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub count: Option<usize>,
    pub re_min: Option<f64>,
    pub re_max: Option<f64>,
    pub im_min: Option<f64>,
    pub im_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesConfig {
    pub stop_tol: Option<f64>,
    pub tail_tol: Option<f64>,
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    // toml's Display already carries line/column context
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("in expression for {which}: {source}")]
    Expr { which: String, source: ParseError },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Grid(String),
}

/// Everything a command needs from one configuration file.
pub struct LoadedProblem {
    pub problem: ProblemSpec,
    pub grid: Vec<Complex64>,
    pub output: OutputConfig,
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(toml::from_str(&text)?)
}

impl RunConfig {
    pub fn build(&self) -> Result<LoadedProblem, ConfigError> {
        let eq = &self.equation;
        let q = Complex64::new(eq.q_re, eq.q_im);
        let parse_all = |texts: &[String], prefix: &str| -> Result<Vec<Expression>, ConfigError> {
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    parse_expr(t).map_err(|source| ConfigError::Expr {
                        which: format!("{}_{}", prefix, i + 1),
                        source,
                    })
                })
                .collect()
        };
        let a = parse_all(&eq.a, "a")?;
        let b = parse_all(&eq.b, "b")?;
        let coeffs = Arc::new(CoefficientSet::new(eq.mode, a, b)?);

        let mut problem = ProblemSpec::new(q, eq.mode, coeffs)?;
        if let Some(dc) = self.domain {
            let domain = match problem.domain {
                DomainSpec::HalfPlanes { rho } => {
                    if dc.sigma.is_some() {
                        return Err(ConfigError::Grid(
                            "sigma only applies to the rectangle modes T3/T4".into(),
                        ));
                    }
                    DomainSpec::HalfPlanes {
                        rho: dc.rho.unwrap_or(rho),
                    }
                }
                DomainSpec::Rectangle { rho, sigma } => DomainSpec::Rectangle {
                    rho: dc.rho.unwrap_or(rho),
                    sigma: dc.sigma.unwrap_or(sigma),
                },
            };
            problem = problem.with_domain(domain)?;
        }
        if let Some(tc) = self.tolerances {
            let d = Tolerances::default();
            problem = problem.with_tolerances(Tolerances {
                stop_tol: tc.stop_tol.unwrap_or(d.stop_tol),
                tail_tol: tc.tail_tol.unwrap_or(d.tail_tol),
                residual_tol: tc.residual_tol.unwrap_or(d.residual_tol),
            });
        }
        if let Some(rule) = self.scaling_rule {
            problem = problem.with_rule(rule);
        }

        let default_patch = problem.domain.default_patch();
        let gc = self.grid.unwrap_or_default();
        let patch = Patch {
            re_min: gc.re_min.unwrap_or(default_patch.re_min),
            re_max: gc.re_max.unwrap_or(default_patch.re_max),
            im_min: gc.im_min.unwrap_or(default_patch.im_min),
            im_max: gc.im_max.unwrap_or(default_patch.im_max),
        };
        let count = gc.count.unwrap_or(256);
        if count == 0 {
            return Err(ConfigError::Grid("grid count must be positive".into()));
        }
        let grid = grid_on_patch(&patch, count);
        if let Some(bad) = grid.iter().find(|z| !problem.domain.contains(**z)) {
            return Err(ConfigError::Grid(format!(
                "grid point {} lies outside the construction domain",
                bad
            )));
        }
        Ok(LoadedProblem {
            problem,
            grid,
            output: self.output.clone().unwrap_or_default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[equation]
q_re = 3.0
q_im = 0.0
mode = "T1"
a = ["0.05", "0.15/z"]
b = ["1/z"]
"#;

    #[test]
    fn minimal_config_builds_with_defaults() {
        let cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        let loaded = cfg.build().unwrap();
        assert_eq!(loaded.grid.len(), 256);
        assert_eq!(loaded.problem.domain, DomainSpec::HalfPlanes { rho: 3.0 });
        assert_eq!(loaded.problem.tol.stop_tol, 1e-12);
        assert_eq!(loaded.problem.rule, ScalingRule::Complex);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{}\nturbo = true\n", MINIMAL);
        let err = toml::from_str::<RunConfig>(&bad).unwrap_err();
        assert!(err.to_string().contains("turbo"), "{}", err);
    }

    #[test]
    fn unknown_section_keys_rejected() {
        let bad = MINIMAL.replace("q_re = 3.0", "q_re = 3.0\nq_abs = 3.0");
        assert!(toml::from_str::<RunConfig>(&bad).is_err());
    }

    #[test]
    fn expression_errors_name_the_coefficient() {
        let bad = MINIMAL.replace("\"1/z\"", "\"1/w\"");
        let cfg: RunConfig = toml::from_str(&bad).unwrap();
        match cfg.build() {
            Err(ConfigError::Expr { which, .. }) => assert_eq!(which, "b_1"),
            other => panic!("expected expression error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn sigma_rejected_for_half_plane_modes() {
        let bad = format!("{}\n[domain]\nsigma = 2.0\n", MINIMAL);
        let cfg: RunConfig = toml::from_str(&bad).unwrap();
        assert!(matches!(cfg.build(), Err(ConfigError::Grid(_))));
    }

    #[test]
    fn grid_override_must_stay_in_domain() {
        let bad = format!("{}\n[grid]\nre_min = 0.0\n", MINIMAL);
        let cfg: RunConfig = toml::from_str(&bad).unwrap();
        assert!(matches!(cfg.build(), Err(ConfigError::Grid(_))));
    }

    #[test]
    fn toml_errors_carry_position() {
        let err = toml::from_str::<RunConfig>("[equation\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{}", msg);
    }
}
