//! Evaluating the solution beyond the construction domain.
//!
//! Three ways to reach a target `w`:
//!
//! * **Direct** — `w` lies in the construction domain: use the stored grid
//!   value when `w` is (numerically) a grid point, otherwise run the
//!   pointwise iteration at `w` itself. No interpolation.
//! * **Scaled(m)** — `q^m w` lies in the domain: pull the value back through
//!   the scaling relation, `y(w) = s^m · y(q^m w)` with `s = 1/q` (complex
//!   rule) or `1/|q|` (modulus rule).
//! * **Forward(k)** — unwind the functional equation itself,
//!   `y(w) = R(w/q, y(w/q))`, `k` times from a resolvable base point. This is
//!   how values outside a rectangle domain are reached. A vanishing
//!   denominator along the way is a pole of the continued solution — data,
//!   not a failure — and is reported with the step index and the denominator
//!   modulus.
//!
//! Preference is Direct, then Scaled, then Forward, shortest path first;
//! every returned value carries its derivation path, and [`replay`] reruns a
//! recorded path without searching.
//!
//! The module also houses the two classical ingredients of the continuation
//! picture: the Cayley transform pair between `{Re z < -ρ}` and the unit
//! disk, and the Laurent series `f(z) = Σ q^{-n²} z^{2n}` satisfying
//! `f(qz) = q z² f(z)` with an essential singularity at 0 — the standing
//! witness that a local solution need not extend on its own.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::expr::POLE_THRESHOLD;
use crate::solver::{default_start, PointSolver, ProblemSpec, SolutionField, SolverError};

/// Relative snap tolerance for treating `w` as a grid point.
pub const GRID_SNAP_EPS: f64 = 1e-9;

/// Denominator modulus below which a forward step is declared a pole.
pub const FORWARD_POLE_EPS: f64 = 1e-12;

/// One step of a derivation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Direct,
    Scaled { m: u32 },
    Forward { k: u32 },
}

/// Outcome of a continuation query.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ContinuationResult {
    Value {
        value: Complex64,
        path: Vec<Step>,
    },
    /// The continued solution is infinite at `point`. `denominator_modulus`
    /// is present when a vanishing `1 + Σ b_k y^k` caused it, absent when a
    /// coefficient pole did.
    Pole {
        point: Complex64,
        step_index: u32,
        denominator_modulus: Option<f64>,
    },
    OutOfReach {
        reason: String,
    },
}

impl ContinuationResult {
    pub fn value(&self) -> Option<Complex64> {
        match self {
            ContinuationResult::Value { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Continuation engine bound to one converged field.
pub struct Continuator<'a> {
    field: &'a SolutionField,
    problem: &'a ProblemSpec,
    solver: PointSolver,
}

impl<'a> Continuator<'a> {
    pub fn new(field: &'a SolutionField, problem: &'a ProblemSpec) -> Result<Self, SolverError> {
        let solver = PointSolver::new(problem)?;
        Ok(Continuator { field, problem, solver })
    }

    /// Evaluate the solution at `w`, spending at most `max_steps` scaling or
    /// forward steps.
    pub fn evaluate(&self, w: Complex64, max_steps: u32) -> ContinuationResult {
        if self.problem.domain.contains(w) {
            return match self.direct(w) {
                Ok(v) => ContinuationResult::Value { value: v, path: vec![Step::Direct] },
                Err(reason) => ContinuationResult::OutOfReach { reason },
            };
        }
        if let Some(m) = self.scaled_exponent(w, max_steps) {
            return match self.scaled_value(w, m) {
                Ok(value) => ContinuationResult::Value {
                    value,
                    path: vec![Step::Scaled { m }, Step::Direct],
                },
                Err(reason) => ContinuationResult::OutOfReach { reason },
            };
        }
        // forward: find the smallest k whose base point resolves
        let q = self.problem.q;
        let mut base = w;
        for k in 1..=max_steps {
            base /= q;
            let tail: Option<Vec<Step>> = if self.problem.domain.contains(base) {
                Some(vec![Step::Direct])
            } else {
                self.scaled_exponent(base, max_steps - k)
                    .map(|m| vec![Step::Scaled { m }, Step::Direct])
            };
            if let Some(tail_path) = tail {
                let base_value = match tail_path[0] {
                    Step::Direct => self.direct(base),
                    Step::Scaled { m } => self.scaled_value(base, m),
                    Step::Forward { .. } => unreachable!(),
                };
                let base_value = match base_value {
                    Ok(v) => v,
                    Err(reason) => return ContinuationResult::OutOfReach { reason },
                };
                let mut path = vec![Step::Forward { k }];
                path.extend_from_slice(&tail_path);
                return match self.unwind_forward(w, k, base_value) {
                    Ok(value) => ContinuationResult::Value { value, path },
                    Err(pole) => pole,
                };
            }
        }
        ContinuationResult::OutOfReach {
            reason: format!(
                "no direct, scaled, or forward path lands in the domain within {} steps",
                max_steps
            ),
        }
    }

    /// Re-run a recorded path. Fails (with a message) if the path does not
    /// resolve from `w`.
    pub fn replay(&self, w: Complex64, path: &[Step]) -> Result<Complex64, String> {
        match path.split_first() {
            Some((Step::Direct, [])) => self.direct(w),
            Some((Step::Scaled { m }, [Step::Direct])) => self.scaled_value(w, *m),
            Some((Step::Forward { k }, rest)) if !rest.is_empty() => {
                let base = w / self.problem.q.powu(*k);
                let base_value = self.replay(base, rest)?;
                match self.unwind_forward(w, *k, base_value) {
                    Ok(v) => Ok(v),
                    Err(p) => Err(format!("forward replay hit a pole: {:?}", p)),
                }
            }
            _ => Err(format!("malformed path {:?}", path)),
        }
    }

    // value at an in-domain point: stored grid value if w snaps to the grid,
    // else a fresh pointwise solve at exactly w from the field's own start
    fn direct(&self, w: Complex64) -> Result<Complex64, String> {
        if let Some((i, d)) = self.field.nearest_index(w) {
            if d <= GRID_SNAP_EPS * (1.0 + w.norm()) {
                return Ok(self.field.values[i]);
            }
        }
        self.solver
            .solve_point(w, self.field.start)
            .map(|(v, _)| v)
            .map_err(|e| format!("pointwise solve at {} failed: {}", w, e))
    }

    // smallest m in 1..=max with q^m w inside the domain
    fn scaled_exponent(&self, w: Complex64, max: u32) -> Option<u32> {
        let q = self.problem.q;
        let mut t = w;
        for m in 1..=max {
            t *= q;
            if self.problem.domain.contains(t) {
                return Some(m);
            }
        }
        None
    }

    // pull the value back from the in-domain point q^m w
    fn scaled_value(&self, w: Complex64, m: u32) -> Result<Complex64, String> {
        let target = w * self.problem.q.powu(m);
        let v = self.direct(target)?;
        let factor = self.problem.rule.step_factor(self.problem.q).powu(m);
        Ok(factor * v)
    }

    // apply y(q u) = R(u, y(u)) k times starting from y(w/q^k) = base_value
    fn unwind_forward(
        &self,
        w: Complex64,
        k: u32,
        base_value: Complex64,
    ) -> Result<Complex64, ContinuationResult> {
        let q = self.problem.q;
        let coeffs = self.problem.coeffs.as_ref();
        let mut y = base_value;
        for step in 1..=k {
            // the point whose value this step produces is w / q^{k-step}
            let u = w / q.powu(k - step + 1);
            let out_point = w / q.powu(k - step);
            let (num, den) = match coeffs.rational_parts(u, y) {
                Ok(pair) => pair,
                Err(_) => {
                    return Err(ContinuationResult::Pole {
                        point: out_point,
                        step_index: step,
                        denominator_modulus: None,
                    })
                }
            };
            if den.norm() < FORWARD_POLE_EPS {
                return Err(ContinuationResult::Pole {
                    point: out_point,
                    step_index: step,
                    denominator_modulus: Some(den.norm()),
                });
            }
            y = num / den;
        }
        Ok(y)
    }
}

/// One-shot continuation query; builds a [`Continuator`] internally.
pub fn evaluate_at(
    field: &SolutionField,
    p: &ProblemSpec,
    w: Complex64,
    max_steps: u32,
) -> ContinuationResult {
    match Continuator::new(field, p) {
        Ok(c) => c.evaluate(w, max_steps),
        Err(e) => ContinuationResult::OutOfReach {
            reason: format!("continuation setup failed: {}", e),
        },
    }
}

/// Pole of a Cayley map at its excluded point.
#[derive(Debug, Clone, Copy, Error, PartialEq)]
#[error("Cayley map pole at {point}")]
pub struct CayleyPole {
    pub point: Complex64,
}

/// `φ(z) = (z+ρ+1)/(z+ρ-1)`, mapping `{Re z < -ρ}` into the open unit disk.
pub fn cayley_forward(z: Complex64, rho: f64) -> Result<Complex64, CayleyPole> {
    let den = z + rho - 1.0;
    if den.norm() < POLE_THRESHOLD {
        return Err(CayleyPole { point: z });
    }
    Ok((z + rho + 1.0) / den)
}

/// `ψ(w) = (ρ(1-w)+1+w)/(w-1)`, the two-sided inverse of [`cayley_forward`].
pub fn cayley_inverse(w: Complex64, rho: f64) -> Result<Complex64, CayleyPole> {
    let den = w - 1.0;
    if den.norm() < POLE_THRESHOLD {
        return Err(CayleyPole { point: w });
    }
    Ok((rho * (Complex64::new(1.0, 0.0) - w) + 1.0 + w) / den)
}

/// Truncated Laurent sum `f_N(z) = Σ_{n=-N}^{N} q^{-n²} z^{2n}`.
///
/// For `|q| > 1` the full series is analytic for all `z ≠ 0`, has an
/// essential singularity at 0, and satisfies `f(qz) = q z² f(z)` termwise.
pub fn poincare_f(z: Complex64, q: Complex64, n: u32) -> Complex64 {
    assert!(q.norm() > 1.0, "requires |q| > 1");
    assert!(z.norm() > 0.0, "z = 0 is the essential singularity");
    let n = n as i32;
    let mut acc = Complex64::ZERO;
    for k in -n..=n {
        acc += q.powi(-(k * k)) * z.powi(2 * k);
    }
    acc
}

/// `|f_N(qz) - q z² f_N(z)|`, assembled per power of `z` so the termwise
/// cancellation survives floating point and only the two uncancelled
/// boundary terms (plus rounding dust) remain.
pub fn poincare_residual(z: Complex64, q: Complex64, n: u32) -> f64 {
    assert!(q.norm() > 1.0, "requires |q| > 1");
    assert!(z.norm() > 0.0, "z = 0 is the essential singularity");
    let n = n as i32;
    let mut acc = Complex64::ZERO;
    for k in -n..=(n + 1) {
        // z^{2k} coefficient of f(qz): q^{-k²} q^{2k}, |k| ≤ N
        let alpha = if k <= n {
            q.powi(-(k * k)) * q.powi(2 * k)
        } else {
            Complex64::ZERO
        };
        // z^{2k} coefficient of q z² f(z): q · q^{-(k-1)²}, -N+1 ≤ k ≤ N+1
        let beta = if k >= -n + 1 {
            q * q.powi(-((k - 1) * (k - 1)))
        } else {
            Complex64::ZERO
        };
        acc += (alpha - beta) * z.powi(2 * k);
    }
    acc.norm()
}
