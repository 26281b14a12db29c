//! The four contraction operators.
//!
//! Each theorem regime turns the functional equation into a fixed-point
//! problem `y = T[y]` on the ball `‖y‖ ≤ 1/|q|`:
//!
//! ```text
//! T1/T3:  T[y](z) = Σ_{j≥2} Σ_{m≥0} λ^m c_j(z/q^{m+1}) y(z/q^{m+1})^j
//! T2/T4:  T[y](z) = Σ_{j≥2}         c_j(z/q)       y(z/q)^j
//! ```
//!
//! The inner reads `y(z/q^{m+1})` are replaced through the scaling relation
//! by multiples of `y(z)` — `q^{-(m+1)} y(z)` (complex rule, default) or
//! `|q|^{-(m+1)} y(z)` (modulus rule) — which makes `T` a pointwise map: the
//! value at `z` depends on `y` only through `y(z)`, so grid points iterate
//! independently.
//!
//! Truncating the sums at `(J, M)` drops a mass that is controlled by
//! geometric majorants:
//!
//! ```text
//! T1: |term(j,m)| ≤ 2^{j-1} |q|^{-j(m+2)}            T2: ≤ (2/|q|²)^j
//! T3: |term(j,m)| ≤ (2/|q|)^j |q|^{-m(j+1)} / (2|q|)  T4: ≤ (2/|q|)^j / (2|q|)
//! ```
//!
//! [`tail_bound`] sums the majorants over the dropped index set (closed-form
//! geometric sums in `m`, numeric summation of the fast-decaying `j` tail)
//! and [`choose_truncation`] inverts it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{SeriesCoefficients, SeriesError};

/// Slack added to the ball radius `1/|q|` in membership checks.
pub const BALL_EPS: f64 = 1e-12;

/// Hard cap on the retained power of `y`; keeps the audit enumeration budget
/// at `2^{J-1} ≤ 4096`.
pub const ORDER_CAP: u32 = 13;

/// Which theorem regime the operator implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremMode {
    /// `|q| ≥ 3`, half-plane domain, constant `λ = a_1`, telescoped double sum.
    T1,
    /// `|q| ≥ 3`, half-plane domain, `a_1 ≡ 0`, single sum.
    T2,
    /// `|q| ≥ 6`, rectangle domain, constant `λ = a_1`, telescoped double sum.
    T3,
    /// `|q| ≥ 6`, rectangle domain, `a_1 ≡ 0`, single sum.
    T4,
}

impl TheoremMode {
    /// Hypothesis threshold on `|q|`.
    pub fn min_q_modulus(self) -> f64 {
        match self {
            TheoremMode::T1 | TheoremMode::T2 => 3.0,
            TheoremMode::T3 | TheoremMode::T4 => 6.0,
        }
    }

    /// Half-plane construction domain (T1/T2) vs rectangle (T3/T4).
    pub fn uses_half_plane(self) -> bool {
        matches!(self, TheoremMode::T1 | TheoremMode::T2)
    }

    /// Double sum over the telescoping index `m` (T1/T3).
    pub fn telescoped(self) -> bool {
        matches!(self, TheoremMode::T1 | TheoremMode::T3)
    }

    /// Modes requiring `a_1 ≡ 0`.
    pub fn zero_lambda(self) -> bool {
        matches!(self, TheoremMode::T2 | TheoremMode::T4)
    }
}

/// How far the double sum is carried.
///
/// `m_max` is meaningful in the telescoped modes only. The invariant
/// `tail_bound(mode, q, policy) ≤ tail_tol` is established by
/// [`choose_truncation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub j_max: u32,
    pub m_max: u32,
    pub tail_tol: f64,
}

/// Substitution used for the inner reads `y(z/q^{m+1})`.
///
/// The relations in the source regime are stated with the modulus factor
/// `|q|^{-m}`, which is incompatible with analyticity of a nonzero solution;
/// the complex variant `q^{-m}` is therefore the default, the modulus variant
/// is kept for literal reproduction of the bound arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingRule {
    #[default]
    Complex,
    Modulus,
}

impl ScalingRule {
    /// The per-step factor: `1/q` or `1/|q|`.
    pub fn step_factor(self, q: Complex64) -> Complex64 {
        match self {
            ScalingRule::Complex => Complex64::new(1.0, 0.0) / q,
            ScalingRule::Modulus => Complex64::new(1.0 / q.norm(), 0.0),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OperatorError {
    #[error("|y(z)| = {y_modulus} exceeds the ball radius {limit} at z = {z}")]
    BallViolation {
        z: Complex64,
        y_modulus: f64,
        limit: f64,
    },
    #[error("z = {z} lies outside the construction domain")]
    DomainViolation { z: Complex64 },
    #[error("coefficient {which} has a pole at evaluation point {point}")]
    PoleOnRay { point: Complex64, which: String },
    #[error("{mode:?} requires |q| >= {required}, got {q_modulus}")]
    UnsupportedModulus {
        mode: TheoremMode,
        q_modulus: f64,
        required: f64,
    },
    #[error("tolerance {tol} is unreachable under the order cap (best dropped mass {best})")]
    Unreachable { tol: f64, best: f64 },
}

impl From<SeriesError> for OperatorError {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::PoleInCoefficient { z, which } => {
                OperatorError::PoleOnRay { point: z, which }
            }
            other => panic!("unexpected series error in operator: {other}"),
        }
    }
}

fn require_modulus(mode: TheoremMode, q_modulus: f64) -> Result<(), OperatorError> {
    let required = mode.min_q_modulus();
    if q_modulus < required {
        return Err(OperatorError::UnsupportedModulus {
            mode,
            q_modulus,
            required,
        });
    }
    Ok(())
}

/// Apply the truncated operator at one point.
///
/// Requires `|y_at_z| ≤ 1/|q| + BALL_EPS` and coefficients evaluable along
/// the ray `z/q^{m+1}`; membership of `z` in the construction domain is the
/// caller's concern (the solver checks its grid, [`crate::extend`] checks
/// continuation targets).
#[allow(clippy::too_many_arguments)]
pub fn apply_t(
    mode: TheoremMode,
    sc: &SeriesCoefficients,
    q: Complex64,
    lambda: Complex64,
    z: Complex64,
    y_at_z: Complex64,
    policy: &TruncationPolicy,
    rule: ScalingRule,
) -> Result<Complex64, OperatorError> {
    let qn = q.norm();
    require_modulus(mode, qn)?;
    let limit = 1.0 / qn + BALL_EPS;
    if y_at_z.norm() > limit {
        return Err(OperatorError::BallViolation {
            z,
            y_modulus: y_at_z.norm(),
            limit,
        });
    }
    let j_max = policy.j_max.min(sc.j_max());
    let s = rule.step_factor(q);
    let m_last = if mode.telescoped() { policy.m_max } else { 0 };

    let mut acc = Complex64::ZERO;
    let mut lam_pow = Complex64::new(1.0, 0.0);
    let mut inner = z;
    let mut scaled_y = y_at_z;
    for _m in 0..=m_last {
        // iterated multiplication; once λ^m underflows the remaining terms
        // cannot contribute at double precision
        if lam_pow.norm() < 1e-300 {
            break;
        }
        inner /= q;
        scaled_y *= s;
        let cj = sc.eval(inner)?;
        let mut sum_j = Complex64::ZERO;
        let mut ypow = scaled_y * scaled_y;
        for j in 2..=j_max {
            sum_j += cj[j as usize - 1] * ypow;
            ypow *= scaled_y;
        }
        acc += lam_pow * sum_j;
        lam_pow *= lambda;
    }
    Ok(acc)
}

// Per-j majorant mass summed over all m, written as products of quantities
// below 1 so large j underflows to zero instead of overflowing.
//
//   T1: Σ_m 2^{j-1} |q|^{-j(m+2)} = ½ (2/|q|²)^j / (1 - u),  u = |q|^{-j}
//   T2:                              (2/|q|²)^j
//   T3: Σ_m (2/|q|)^j v^m / (2|q|) = (2/|q|)^j / (2|q|(1-v)), v = |q|^{-(j+1)}
//   T4:                              (2/|q|)^j / (2|q|)
fn majorant_m_sum_full(mode: TheoremMode, qn: f64, j: u32) -> f64 {
    let ji = j as i32;
    match mode {
        TheoremMode::T1 => {
            let u = qn.powi(-ji);
            0.5 * (2.0 / (qn * qn)).powi(ji) / (1.0 - u)
        }
        TheoremMode::T2 => (2.0 / (qn * qn)).powi(ji),
        TheoremMode::T3 => {
            let v = qn.powi(-(ji + 1));
            (2.0 / qn).powi(ji) / (2.0 * qn) / (1.0 - v)
        }
        TheoremMode::T4 => (2.0 / qn).powi(ji) / (2.0 * qn),
    }
}

// Mass left in the m tail beyond m_max: the full per-j mass shrunk by the
// geometric head, full_j · u^{m_max+1}.
fn majorant_m_sum_dropped(mode: TheoremMode, qn: f64, j: u32, m_max: u32) -> f64 {
    let ji = j as i32;
    match mode {
        TheoremMode::T1 => {
            let u = qn.powi(-ji);
            majorant_m_sum_full(mode, qn, j) * u.powi(m_max as i32 + 1)
        }
        TheoremMode::T3 => {
            let v = qn.powi(-(ji + 1));
            majorant_m_sum_full(mode, qn, j) * v.powi(m_max as i32 + 1)
        }
        // single-sum modes have no m tail
        TheoremMode::T2 | TheoremMode::T4 => 0.0,
    }
}

// Σ over j > j_from of the full per-j majorant mass. The terms decay at
// least geometrically with ratio ≤ 2/|q|, so the loop hits exact zero fast.
fn j_tail(mode: TheoremMode, qn: f64, j_from: u32) -> f64 {
    let mut acc = 0.0;
    let mut j = j_from + 1;
    loop {
        let term = majorant_m_sum_full(mode, qn, j);
        acc += term;
        if term == 0.0 || j > 4000 {
            return acc;
        }
        j += 1;
    }
}

/// Total majorant mass of the untruncated double (or single) sum.
pub fn majorant_total(mode: TheoremMode, q_modulus: f64) -> Result<f64, OperatorError> {
    require_modulus(mode, q_modulus)?;
    Ok(j_tail(mode, q_modulus, 1))
}

/// Upper bound on the mass dropped by a `(j_max, m_max)` truncation.
///
/// The bound is exact summation of the per-term majorants over the dropped
/// index set, so it converges to 0 as the policy grows.
pub fn tail_bound(
    mode: TheoremMode,
    q_modulus: f64,
    j_max: u32,
    m_max: u32,
) -> Result<f64, OperatorError> {
    require_modulus(mode, q_modulus)?;
    let mut acc = j_tail(mode, q_modulus, j_max);
    if mode.telescoped() {
        for j in 2..=j_max {
            acc += majorant_m_sum_dropped(mode, q_modulus, j, m_max);
        }
    }
    Ok(acc)
}

/// Smallest `(j_max, m_max)` whose dropped mass is at most `tol`,
/// lexicographic in `(j_max, m_max)`, subject to `j_max ≤ ORDER_CAP`.
pub fn choose_truncation(
    mode: TheoremMode,
    q_modulus: f64,
    tol: f64,
) -> Result<TruncationPolicy, OperatorError> {
    require_modulus(mode, q_modulus)?;
    // the j tail beyond the cap is the floor no m_max can push under
    let best = j_tail(mode, q_modulus, ORDER_CAP);
    if tol <= 0.0 {
        return Err(OperatorError::Unreachable { tol, best });
    }
    for j_max in 2..=ORDER_CAP {
        let jt = j_tail(mode, q_modulus, j_max);
        if jt > tol {
            continue;
        }
        if !mode.telescoped() {
            return Ok(TruncationPolicy { j_max, m_max: 0, tail_tol: tol });
        }
        for m_max in 0..=100_000u32 {
            let dropped = tail_bound(mode, q_modulus, j_max, m_max)?;
            if dropped <= tol {
                return Ok(TruncationPolicy { j_max, m_max, tail_tol: tol });
            }
        }
    }
    Err(OperatorError::Unreachable { tol, best })
}

/// The Lipschitz constant of the contraction estimate for each regime:
/// `2/3` (T1), `1/ρ` (T2, equal to `2/|q|` at the default `ρ = |q|/2`),
/// `3/4` (T3), `1/4` (T4).
pub fn theoretical_contraction(mode: TheoremMode, _q_modulus: f64, rho: f64) -> f64 {
    match mode {
        TheoremMode::T1 => 2.0 / 3.0,
        TheoremMode::T2 => 1.0 / rho,
        TheoremMode::T3 => 3.0 / 4.0,
        TheoremMode::T4 => 1.0 / 4.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::series::CoefficientSet;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn series(mode: TheoremMode, a: &[&str], b: &[&str], j_max: u32) -> SeriesCoefficients {
        let cs = CoefficientSet::new(
            mode,
            a.iter().map(|s| parse_expr(s).unwrap()).collect(),
            b.iter().map(|s| parse_expr(s).unwrap()).collect(),
        )
        .unwrap();
        SeriesCoefficients::expand(Arc::new(cs), j_max).unwrap()
    }

    #[test]
    fn t_fixes_zero_in_all_modes() {
        let policy = TruncationPolicy { j_max: 6, m_max: 8, tail_tol: 1.0 };
        for (mode, q, a) in [
            (TheoremMode::T1, c(3.0, 0.0), ["0.05", "0.15/z"]),
            (TheoremMode::T2, c(4.0, 0.0), ["0", "1/z"]),
            (TheoremMode::T3, c(6.0, 0.0), ["0.1", "z"]),
            (TheoremMode::T4, c(6.0, 0.0), ["0", "z"]),
        ] {
            let sc = series(mode, &a, &["1/z"], 6);
            let lambda = sc.coefficient_set().lambda();
            for rule in [ScalingRule::Complex, ScalingRule::Modulus] {
                let v = apply_t(
                    mode, &sc, q, lambda,
                    c(7.0, 1.0), Complex64::ZERO, &policy, rule,
                )
                .unwrap();
                assert_eq!(v, Complex64::ZERO, "mode {:?}", mode);
            }
        }
    }

    #[test]
    fn t2_single_term_formula() {
        // c_2 ≡ 1, q = 4: T[y](z) = c_2(z/q) (y/q)^2 = (0.1/4)^2
        let sc = series(TheoremMode::T2, &["0", "1"], &[], 4);
        let policy = TruncationPolicy { j_max: 4, m_max: 0, tail_tol: 1.0 };
        let v = apply_t(
            TheoremMode::T2,
            &sc,
            c(4.0, 0.0),
            Complex64::ZERO,
            c(5.0, 0.0),
            c(0.1, 0.0),
            &policy,
            ScalingRule::Complex,
        )
        .unwrap();
        assert!((v - c(6.25e-4, 0.0)).norm() < 1e-18);
    }

    #[test]
    fn scaling_rules_differ_for_rotating_q() {
        let sc = series(TheoremMode::T2, &["0", "1"], &[], 4);
        let policy = TruncationPolicy { j_max: 4, m_max: 0, tail_tol: 1.0 };
        let q = c(0.0, 4.0);
        let y = c(0.1, 0.0);
        let complex = apply_t(
            TheoremMode::T2, &sc, q, Complex64::ZERO, c(5.0, 0.0), y, &policy,
            ScalingRule::Complex,
        )
        .unwrap();
        let modulus = apply_t(
            TheoremMode::T2, &sc, q, Complex64::ZERO, c(5.0, 0.0), y, &policy,
            ScalingRule::Modulus,
        )
        .unwrap();
        // (y/(4i))^2 = -y²/16 vs (y/4)^2 = y²/16
        assert!((complex + modulus).norm() < 1e-18);
        assert!((modulus - c(6.25e-4, 0.0)).norm() < 1e-18);
    }

    #[test]
    fn ball_violation_detected() {
        let sc = series(TheoremMode::T1, &["0.05", "0.15/z"], &["1/z"], 4);
        let policy = TruncationPolicy { j_max: 4, m_max: 4, tail_tol: 1.0 };
        let err = apply_t(
            TheoremMode::T1,
            &sc,
            c(3.0, 0.0),
            c(0.05, 0.0),
            c(4.0, 0.0),
            c(0.4, 0.0),
            &policy,
            ScalingRule::Complex,
        )
        .unwrap_err();
        assert!(matches!(err, OperatorError::BallViolation { .. }));
    }

    #[test]
    fn pole_on_evaluation_ray_detected() {
        // b_1 = 1/(z-1) has a pole at 1 = 3/3, the first inner point for z = 3
        let sc = series(TheoremMode::T1, &["0.05", "0"], &["1/(z-1)"], 4);
        let policy = TruncationPolicy { j_max: 4, m_max: 4, tail_tol: 1.0 };
        let err = apply_t(
            TheoremMode::T1,
            &sc,
            c(3.0, 0.0),
            c(0.05, 0.0),
            c(3.0, 0.0),
            c(0.1, 0.0),
            &policy,
            ScalingRule::Complex,
        )
        .unwrap_err();
        match err {
            OperatorError::PoleOnRay { point, which } => {
                assert!((point - c(1.0, 0.0)).norm() < 1e-12);
                assert_eq!(which, "b_1");
            }
            other => panic!("expected pole on ray, got {:?}", other),
        }
    }

    #[test]
    fn unsupported_modulus_rejected() {
        assert!(matches!(
            tail_bound(TheoremMode::T1, 2.0, 4, 4),
            Err(OperatorError::UnsupportedModulus { .. })
        ));
        assert!(matches!(
            tail_bound(TheoremMode::T4, 5.9, 4, 4),
            Err(OperatorError::UnsupportedModulus { .. })
        ));
    }

    #[test]
    fn nothing_dropped_means_zero_tail() {
        // large enough that even the slowest ratio (1/3 per j for T3/T4)
        // underflows past the subnormal range
        for (mode, q) in [
            (TheoremMode::T1, 3.0),
            (TheoremMode::T2, 3.0),
            (TheoremMode::T3, 6.0),
            (TheoremMode::T4, 6.0),
        ] {
            let tail = tail_bound(mode, q, 2000, 600_000).unwrap();
            assert_eq!(tail, 0.0, "mode {:?}", mode);
        }
    }

    #[test]
    fn t1_tail_matches_brute_force_sum() {
        // oracle: sum the explicit majorant grid directly and subtract the
        // retained (j=2, m=0) cell
        let qn = 3.0f64;
        let mut full = 0.0;
        for j in 2..400i32 {
            for m in 0..1200i32 {
                full += 2f64.powi(j - 1) * qn.powi(-j * (m + 2));
            }
        }
        let retained = 2.0 * qn.powi(-4);
        let expected = full - retained;
        let tail = tail_bound(TheoremMode::T1, qn, 2, 0).unwrap();
        assert!(
            (tail - expected).abs() <= 1e-12 * expected,
            "tail {} vs brute force {}",
            tail,
            expected
        );
        // and the retained cell is the value the derivation quotes
        assert!((retained - 0.024691358024691357).abs() < 1e-15);
    }

    #[test]
    fn t1_full_majorant_within_ball_bound() {
        let total = majorant_total(TheoremMode::T1, 3.0).unwrap();
        assert!(total <= 1.0 / 3.0, "total {}", total);
        // the same holds for the other regimes at their thresholds
        assert!(majorant_total(TheoremMode::T2, 3.0).unwrap() <= 1.0 / 3.0);
        assert!(majorant_total(TheoremMode::T3, 6.0).unwrap() <= 1.0 / 6.0);
        assert!(majorant_total(TheoremMode::T4, 6.0).unwrap() <= 1.0 / 6.0);
    }

    #[test]
    fn rectangle_mode_majorant_respects_quarter_bound() {
        // the T3 chain ends at 1/(4|q|)
        let total = majorant_total(TheoremMode::T3, 6.0).unwrap();
        assert!(total <= 1.0 / 24.0, "total {}", total);
    }

    #[test]
    fn choose_truncation_minimal_at_loose_tolerance() {
        let policy = choose_truncation(TheoremMode::T1, 3.0, 1.0 / 3.0).unwrap();
        assert_eq!((policy.j_max, policy.m_max), (2, 0));
        let tail = tail_bound(TheoremMode::T1, 3.0, policy.j_max, policy.m_max).unwrap();
        assert!(tail <= 1.0 / 3.0);
    }

    #[test]
    fn choose_truncation_zero_tolerance_unreachable() {
        assert!(matches!(
            choose_truncation(TheoremMode::T1, 3.0, 0.0),
            Err(OperatorError::Unreachable { .. })
        ));
    }

    #[test]
    fn choose_truncation_respects_order_cap() {
        // at |q| = 6 the T4 majorant tail beyond the cap is ≈ 2.6e-8, so
        // 1e-14 is honestly unreachable under j_max ≤ 13 …
        match choose_truncation(TheoremMode::T4, 6.0, 1e-14) {
            Err(OperatorError::Unreachable { best, .. }) => {
                assert!(best > 1e-14 && best < 1e-7, "best {}", best);
            }
            other => panic!("expected unreachable, got {:?}", other),
        }
        // … while 1e-7 is reachable and verified
        let policy = choose_truncation(TheoremMode::T4, 6.0, 1e-7).unwrap();
        assert!(policy.j_max <= 13);
        let tail = tail_bound(TheoremMode::T4, 6.0, policy.j_max, policy.m_max).unwrap();
        assert!(tail <= 1e-7);
    }

    #[test]
    fn theoretical_constants() {
        assert_eq!(theoretical_contraction(TheoremMode::T1, 3.0, 3.0), 2.0 / 3.0);
        assert_eq!(theoretical_contraction(TheoremMode::T1, 9.0, 9.0), 2.0 / 3.0);
        assert_eq!(theoretical_contraction(TheoremMode::T2, 4.0, 2.0), 0.5);
        assert_eq!(theoretical_contraction(TheoremMode::T3, 6.0, 3.0), 0.75);
        assert_eq!(theoretical_contraction(TheoremMode::T4, 6.0, 3.0), 0.25);
    }

    #[test]
    fn enlarging_policy_moves_value_by_at_most_tail_difference() {
        let sc = series(TheoremMode::T1, &["0.05", "0.15/z"], &["1/z"], 10);
        let q = c(3.0, 0.0);
        let lambda = c(0.05, 0.0);
        let small = TruncationPolicy { j_max: 3, m_max: 1, tail_tol: 1.0 };
        let large = TruncationPolicy { j_max: 10, m_max: 30, tail_tol: 1.0 };
        let z = c(4.0, 2.0);
        let y = c(0.2, 0.1);
        assert!(y.norm() <= 1.0 / 3.0);
        let v_small = apply_t(TheoremMode::T1, &sc, q, lambda, z, y, &small, ScalingRule::Complex).unwrap();
        let v_large = apply_t(TheoremMode::T1, &sc, q, lambda, z, y, &large, ScalingRule::Complex).unwrap();
        let allowance = tail_bound(TheoremMode::T1, 3.0, small.j_max, small.m_max).unwrap()
            - tail_bound(TheoremMode::T1, 3.0, large.j_max, large.m_max).unwrap();
        assert!(
            (v_large - v_small).norm() <= allowance + 1e-15,
            "moved {} allowance {}",
            (v_large - v_small).norm(),
            allowance
        );
    }
}
