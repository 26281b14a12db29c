//! Hypothesis gates, residual audit, and the auxiliary numeric inequalities.
//!
//! Hypothesis checking is sampled, not symbolic: the report states the grid
//! it used and is evidence, not proof — modulus bounds like
//! `|a_j(z)| ≤ |q|^{|z|}` over a region are undecidable for the expression
//! grammar. A violated verdict always carries at least one witness point.
//!
//! The residual audit closes the loop on a converged field: it reads
//! `y(qz)` back through the continuation machinery and measures
//! `|y(qz) - R(z, y(z))|` across the grid.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::extend::Continuator;
use crate::operator::TheoremMode;
use crate::series::SeriesError;
use crate::solver::{ProblemSpec, SolutionField};

/// Tolerance for the pointwise `|a_1| = max_j |a_j|` equality and for
/// float-noise slack on the modulus bounds.
pub const HYPOTHESIS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VerifyError {
    #[error("coefficient {which} has a pole at grid point {point}")]
    PoleOnGrid { point: Complex64, which: String },
}

impl From<SeriesError> for VerifyError {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::PoleInCoefficient { z, which } => {
                VerifyError::PoleOnGrid { point: z, which }
            }
            other => panic!("unexpected series error during verification: {other}"),
        }
    }
}

/// One violated bound with its witness.
#[derive(Debug, Clone, Serialize)]
pub struct BoundFailure {
    pub which: String,
    pub witness: Option<Complex64>,
    pub measured: f64,
    pub allowed: f64,
}

/// Verdict for one theorem regime against one instance and grid.
#[derive(Debug, Clone, Serialize)]
pub struct ModeCheck {
    pub mode: TheoremMode,
    /// The instance's domain shape matches what the regime needs.
    pub domain_compatible: bool,
    pub q_threshold_ok: bool,
    pub applicable: bool,
    pub failures: Vec<BoundFailure>,
}

/// Sampled hypothesis verification for all four regimes.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub grid_points: usize,
    pub checks: Vec<ModeCheck>,
}

impl HypothesisReport {
    pub fn check_for(&self, mode: TheoremMode) -> &ModeCheck {
        self.checks
            .iter()
            .find(|c| c.mode == mode)
            .expect("all four modes are always present")
    }

    pub fn any_applicable(&self) -> bool {
        self.checks.iter().any(|c| c.applicable)
    }
}

/// Check every regime's modulus bounds over the grid.
///
/// The instance's own mode is checked on equal footing with the other three;
/// regimes whose domain shape differs from the instance's are marked
/// incompatible rather than evaluated.
pub fn check_hypotheses(
    p: &ProblemSpec,
    grid: &[Complex64],
) -> Result<HypothesisReport, VerifyError> {
    let qn = p.q.norm();
    let lambda = p.coeffs.lambda().norm();
    let instance_half_plane = matches!(p.domain, crate::domain::DomainSpec::HalfPlanes { .. });
    let mut checks = Vec::with_capacity(4);
    for mode in [
        TheoremMode::T1,
        TheoremMode::T2,
        TheoremMode::T3,
        TheoremMode::T4,
    ] {
        let domain_compatible = mode.uses_half_plane() == instance_half_plane;
        let q_threshold_ok = qn >= mode.min_q_modulus();
        let mut failures = Vec::new();
        if !q_threshold_ok {
            failures.push(BoundFailure {
                which: format!("|q| >= {}", mode.min_q_modulus()),
                witness: None,
                measured: qn,
                allowed: mode.min_q_modulus(),
            });
        }
        if mode.zero_lambda() && lambda != 0.0 {
            failures.push(BoundFailure {
                which: "a_1 == 0".into(),
                witness: None,
                measured: lambda,
                allowed: 0.0,
            });
        }
        if matches!(mode, TheoremMode::T3) && lambda > 1.0 / qn + HYPOTHESIS_TOL {
            failures.push(BoundFailure {
                which: "|a_1| <= 1/|q|".into(),
                witness: None,
                measured: lambda,
                allowed: 1.0 / qn,
            });
        }
        if domain_compatible {
            check_modulus_bounds(p, mode, grid, &mut failures)?;
        }
        let applicable = domain_compatible && q_threshold_ok && failures.is_empty();
        checks.push(ModeCheck {
            mode,
            domain_compatible,
            q_threshold_ok,
            applicable,
            failures,
        });
    }
    Ok(HypothesisReport {
        grid_points: grid.len(),
        checks,
    })
}

fn check_modulus_bounds(
    p: &ProblemSpec,
    mode: TheoremMode,
    grid: &[Complex64],
    failures: &mut Vec<BoundFailure>,
) -> Result<(), VerifyError> {
    let qn = p.q.norm();
    let cs = p.coeffs.as_ref();
    for &z in grid {
        let zn = z.norm();
        let a: Vec<f64> = (1..=cs.p())
            .map(|j| cs.eval_a(j, z).map(|v| v.norm()))
            .collect::<Result<_, _>>()
            .map_err(VerifyError::from)?;
        let b: Vec<f64> = (1..=cs.t())
            .map(|k| cs.eval_b(k, z).map(|v| v.norm()))
            .collect::<Result<_, _>>()
            .map_err(VerifyError::from)?;
        match mode {
            TheoremMode::T1 | TheoremMode::T2 => {
                let allowed = 1.0 / zn;
                let slack = allowed * (1.0 + HYPOTHESIS_TOL);
                for (j, &av) in a.iter().enumerate() {
                    // in the a_1 ≡ 0 regime the first slot is exempt only
                    // because it is zero; check it like the rest
                    if av > slack {
                        failures.push(BoundFailure {
                            which: format!("|a_{}(z)| <= 1/|z|", j + 1),
                            witness: Some(z),
                            measured: av,
                            allowed,
                        });
                    }
                }
                for (k, &bv) in b.iter().enumerate() {
                    if bv > slack {
                        failures.push(BoundFailure {
                            which: format!("|b_{}(z)| <= 1/|z|", k + 1),
                            witness: Some(z),
                            measured: bv,
                            allowed,
                        });
                    }
                }
                if matches!(mode, TheoremMode::T1) {
                    let max_a = a.iter().copied().fold(0.0, f64::max);
                    if a[0] < max_a - HYPOTHESIS_TOL {
                        failures.push(BoundFailure {
                            which: "|a_1(z)| = max_j |a_j(z)|".into(),
                            witness: Some(z),
                            measured: a[0],
                            allowed: max_a,
                        });
                    }
                }
            }
            TheoremMode::T3 | TheoremMode::T4 => {
                let allowed = qn.powf(zn);
                let slack = allowed * (1.0 + HYPOTHESIS_TOL);
                for (j, &av) in a.iter().enumerate() {
                    if j == 0 {
                        continue; // a_1 handled by the constant-λ checks
                    }
                    if av > slack {
                        failures.push(BoundFailure {
                            which: format!("|a_{}(z)| <= |q|^|z|", j + 1),
                            witness: Some(z),
                            measured: av,
                            allowed,
                        });
                    }
                }
                for (k, &bv) in b.iter().enumerate() {
                    if bv > slack {
                        failures.push(BoundFailure {
                            which: format!("|b_{}(z)| <= |q|^|z|", k + 1),
                            witness: Some(z),
                            measured: bv,
                            allowed,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Functional-equation residual of a field.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub worst_point: Option<Complex64>,
    /// Points where both `y(qz)` and `R(z, y(z))` were computable.
    pub evaluated: usize,
    /// Points skipped because `qz` was unreachable or a pole interfered.
    pub skipped: usize,
}

/// Max of `|y(qz) - R(z, y(z))|` over the grid; `y(qz)` is read back through
/// the continuation engine (stored value if `qz` is a grid point, exact
/// pointwise evaluation otherwise). Reporting only — unreachable points are
/// counted, not errored.
pub fn residual_on_grid(field: &SolutionField, p: &ProblemSpec) -> ResidualReport {
    let cont = match Continuator::new(field, p) {
        Ok(c) => c,
        Err(_) => {
            return ResidualReport {
                max_residual: 0.0,
                worst_point: None,
                evaluated: 0,
                skipped: field.grid.len(),
            }
        }
    };
    let mut max_residual = 0.0f64;
    let mut worst_point = None;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for (i, &z) in field.grid.iter().enumerate() {
        let y_here = field.values[i];
        let rhs = match p.coeffs.rational_parts(z, y_here) {
            Ok((num, den)) if den.norm() >= crate::extend::FORWARD_POLE_EPS => num / den,
            _ => {
                skipped += 1;
                continue;
            }
        };
        match cont.evaluate(p.q * z, 16) {
            crate::extend::ContinuationResult::Value { value, .. } => {
                let r = (value - rhs).norm();
                evaluated += 1;
                if r > max_residual {
                    max_residual = r;
                    worst_point = Some(z);
                }
            }
            _ => skipped += 1,
        }
    }
    ResidualReport {
        max_residual,
        worst_point,
        evaluated,
        skipped,
    }
}

/// One evaluated inequality instance.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaCase {
    pub lemma: &'static str,
    pub q: f64,
    pub j: Option<u32>,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Outcome of sampling the three standalone inequalities and the series
/// identity over their validity ranges.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub cases: Vec<LemmaCase>,
    pub max_series_identity_error: f64,
    pub all_pass: bool,
}

/// Evaluate over `q_values` (all ≥ 2) and `j_range`:
///
/// 1. `1/(q^j - 1) ≤ 2/q^j` for `q ≥ 2, j ≥ 2`;
/// 2. `4/(q⁴ - 2q²) ≤ 1/q` for `q ≥ 2`;
/// 3. `q^{j+1}/(q^{j+1} - 1) < (q/4)^j` for `q ≥ 6`;
/// 4. the closed form `Σ_{j≥2} j (2/q²)^{j-1} (2/q) = (2/q)(4q²-4)/(q²-2)²`
///    against 1000-term partial sums, to `1e-12` relative.
pub fn check_numeric_lemmas(
    q_values: &[f64],
    j_range: std::ops::RangeInclusive<u32>,
) -> LemmaReport {
    let mut cases = Vec::new();
    let mut max_rel = 0.0f64;
    for &q in q_values {
        debug_assert!(q >= 2.0, "lemma ranges start at |q| = 2");
        for j in j_range.clone() {
            let ji = j as i32;
            let lhs = 1.0 / (q.powi(ji) - 1.0);
            let rhs = 2.0 / q.powi(ji);
            cases.push(LemmaCase {
                lemma: "geometric_sum_bound",
                q,
                j: Some(j),
                lhs,
                rhs,
                pass: lhs <= rhs,
            });
            if q >= 6.0 {
                let lhs = q.powi(ji + 1) / (q.powi(ji + 1) - 1.0);
                let rhs = (q / 4.0).powi(ji);
                cases.push(LemmaCase {
                    lemma: "telescoped_ratio_bound",
                    q,
                    j: Some(j),
                    lhs,
                    rhs,
                    pass: lhs < rhs,
                });
            }
        }
        let lhs = 4.0 / (q.powi(4) - 2.0 * q.powi(2));
        let rhs = 1.0 / q;
        cases.push(LemmaCase {
            lemma: "ball_radius_bound",
            q,
            j: None,
            lhs,
            rhs,
            pass: lhs <= rhs,
        });

        // series identity
        let x = 2.0 / (q * q);
        let mut partial = 0.0f64;
        for j in 2..=1001u32 {
            partial += (j as f64) * x.powi(j as i32 - 1) * (2.0 / q);
        }
        let closed = (2.0 / q) * (4.0 * q * q - 4.0) / ((q * q - 2.0) * (q * q - 2.0));
        let rel = (partial - closed).abs() / closed.abs();
        max_rel = max_rel.max(rel);
        cases.push(LemmaCase {
            lemma: "contraction_series_identity",
            q,
            j: None,
            lhs: partial,
            rhs: closed,
            pass: rel <= 1e-12,
        });
    }
    let all_pass = cases.iter().all(|c| c.pass);
    LemmaReport {
        cases,
        max_series_identity_error: max_rel,
        all_pass,
    }
}

/// The ranges the acceptance audit samples: `q ∈ {2, 2.5, …, 12}`,
/// `j ∈ {2, …, 12}`.
pub fn default_lemma_ranges() -> (Vec<f64>, std::ops::RangeInclusive<u32>) {
    let q_values: Vec<f64> = (0..=20).map(|k| 2.0 + 0.5 * k as f64).collect();
    (q_values, 2..=12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::series::CoefficientSet;
    use crate::solver::{picard_solve, Start};
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn problem(mode: TheoremMode, q: Complex64, a: &[&str], b: &[&str]) -> ProblemSpec {
        let cs = CoefficientSet::new(
            mode,
            a.iter().map(|s| parse_expr(s).unwrap()).collect(),
            b.iter().map(|s| parse_expr(s).unwrap()).collect(),
        )
        .unwrap();
        ProblemSpec::new(q, mode, Arc::new(cs)).unwrap()
    }

    fn bundled_t1() -> ProblemSpec {
        problem(TheoremMode::T1, c(3.0, 0.0), &["0.05", "0.15/z"], &["1/z"])
    }

    #[test]
    fn bundled_instance_is_t1_applicable() {
        let p = bundled_t1();
        let grid = p.default_grid();
        let report = check_hypotheses(&p, &grid).unwrap();
        let t1 = report.check_for(TheoremMode::T1);
        assert!(t1.applicable, "failures: {:?}", t1.failures);
        // T2 fails because a_1 is a nonzero constant
        assert!(!report.check_for(TheoremMode::T2).applicable);
        // rectangle modes are incompatible with a half-plane instance
        assert!(!report.check_for(TheoremMode::T3).domain_compatible);
    }

    #[test]
    fn constant_overshoot_is_reported_with_witness() {
        // a_1 = 0.1 with a_2 = 1/z cannot satisfy the strict T1 pattern on
        // the default patch: near |z| = 3 the max condition picks a_2, far
        // out 0.1 > 1/|z|. The gate reports it honestly.
        let p = problem(TheoremMode::T1, c(3.0, 0.0), &["0.1", "1/z"], &["1/z"]);
        let grid = p.default_grid();
        let report = check_hypotheses(&p, &grid).unwrap();
        let t1 = report.check_for(TheoremMode::T1);
        assert!(!t1.applicable);
        assert!(!t1.failures.is_empty());
        assert!(t1.failures.iter().all(|f| f.witness.is_some() || f.allowed != 0.0));
    }

    #[test]
    fn subthreshold_q_rules_out_every_mode() {
        let cs = CoefficientSet::new(
            TheoremMode::T1,
            vec![parse_expr("0.05").unwrap()],
            vec![],
        )
        .unwrap();
        let p = ProblemSpec::new(c(2.0, 0.0), TheoremMode::T1, Arc::new(cs)).unwrap();
        let grid = p.default_grid();
        let report = check_hypotheses(&p, &grid).unwrap();
        assert!(!report.any_applicable());
        for check in &report.checks {
            assert!(!check.q_threshold_ok);
        }
    }

    #[test]
    fn growing_b1_violates_t1_with_witness() {
        let p = problem(TheoremMode::T1, c(3.0, 0.0), &["0.05", "0"], &["z"]);
        let grid = p.default_grid();
        let report = check_hypotheses(&p, &grid).unwrap();
        let t1 = report.check_for(TheoremMode::T1);
        assert!(!t1.applicable);
        let witness = t1
            .failures
            .iter()
            .find(|f| f.which.starts_with("|b_1"))
            .expect("b_1 bound failure");
        let z = witness.witness.unwrap();
        assert!(z.norm() > 1.0 / z.norm());
    }

    #[test]
    fn rectangle_instance_applicable_in_its_modes() {
        let p = problem(TheoremMode::T3, c(6.0, 0.0), &["0.1", "z"], &["exp(z)"]);
        let grid = p.default_grid();
        let report = check_hypotheses(&p, &grid).unwrap();
        assert!(report.check_for(TheoremMode::T3).applicable);
        // T4 needs a_1 ≡ 0
        assert!(!report.check_for(TheoremMode::T4).applicable);
        assert!(!report.check_for(TheoremMode::T1).domain_compatible);
    }

    #[test]
    fn pole_on_grid_surfaces() {
        let p = problem(TheoremMode::T2, c(4.0, 0.0), &["0", "1/(z-2)"], &[]);
        // the default T2 patch starts at rho = 2, where a_2 blows up
        let err = check_hypotheses(&p, &[c(2.0, 0.0)]).unwrap_err();
        assert!(matches!(err, VerifyError::PoleOnGrid { .. }));
    }

    #[test]
    fn zero_field_residual_is_exactly_zero() {
        let p = bundled_t1();
        let grid = p.default_grid();
        let (field, _) = picard_solve(&p, &grid, Start::Zero).unwrap();
        let report = residual_on_grid(&field, &p);
        assert_eq!(report.max_residual, 0.0);
        assert_eq!(report.skipped, 0);
    }

    #[test]
    fn converged_residual_below_tolerance() {
        let p = bundled_t1();
        let grid = p.default_grid();
        let (field, _) = picard_solve(&p, &grid, Start::HalfBall).unwrap();
        let report = residual_on_grid(&field, &p);
        assert!(report.evaluated > 0);
        assert!(report.max_residual <= p.tol.residual_tol);
    }

    #[test]
    fn perturbed_field_flags_the_preimage() {
        let p = bundled_t1();
        let mut grid = p.default_grid();
        let z0 = grid[0];
        let w = p.q * z0;
        assert!(p.domain.contains(w));
        grid.push(w);
        let (mut field, _) = picard_solve(&p, &grid, Start::HalfBall).unwrap();
        let w_idx = grid.len() - 1;
        field.values[w_idx] += c(0.01, 0.0);
        let report = residual_on_grid(&field, &p);
        assert!(report.max_residual > 0.001, "residual {}", report.max_residual);
        assert_eq!(report.worst_point, Some(z0));
    }

    #[test]
    fn lemma_point_examples() {
        let report = check_numeric_lemmas(&[2.0], 2..=2);
        let geo = report
            .cases
            .iter()
            .find(|c| c.lemma == "geometric_sum_bound")
            .unwrap();
        assert!((geo.lhs - 1.0 / 3.0).abs() < 1e-15);
        assert!((geo.rhs - 0.5).abs() < 1e-15);
        assert!(geo.pass);

        let ball = report
            .cases
            .iter()
            .find(|c| c.lemma == "ball_radius_bound")
            .unwrap();
        // equality at q = 2: 4/(16-8) = 0.5 = 1/2
        assert_eq!(ball.lhs, 0.5);
        assert_eq!(ball.rhs, 0.5);
        assert!(ball.pass);

        let report = check_numeric_lemmas(&[6.0], 2..=2);
        let tel = report
            .cases
            .iter()
            .find(|c| c.lemma == "telescoped_ratio_bound")
            .unwrap();
        assert!((tel.lhs - 216.0 / 215.0).abs() < 1e-12);
        assert!((tel.rhs - 2.25).abs() < 1e-15);
        assert!(tel.pass);
    }

    #[test]
    fn lemmas_hold_on_default_ranges() {
        let (q_values, j_range) = default_lemma_ranges();
        let report = check_numeric_lemmas(&q_values, j_range);
        assert!(report.all_pass);
        assert!(report.max_series_identity_error <= 1e-12);
    }
}
