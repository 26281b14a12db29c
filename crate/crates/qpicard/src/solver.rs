//! Picard iteration to the fixed point, with a-posteriori error control.
//!
//! Because the operator is pointwise, every grid point carries its own
//! scalar iteration `y_{n+1}(z) = T(z, y_n(z))`; points are independent and
//! run in parallel. Convergence is judged on the sup-change over the whole
//! grid, matching the sup-norm of the underlying Banach space, and the
//! standard contraction estimate `L^n/(1-L) · d01` gives the distance to the
//! fixed point after the fact.
//!
//! The default start is the half-ball constant `1/(2|q|)`: zero is itself a
//! fixed point of every operator here, so starting there proves nothing.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::domain::DomainSpec;
use crate::operator::{
    apply_t, choose_truncation, theoretical_contraction, OperatorError, ScalingRule,
    TheoremMode, TruncationPolicy, BALL_EPS,
};
use crate::series::{CoefficientSet, SeriesCoefficients, SeriesError};

/// Stopping and audit tolerances of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Sup-change threshold that ends the iteration.
    pub stop_tol: f64,
    /// Bound required of the truncation tail ([`choose_truncation`]).
    pub tail_tol: f64,
    /// Acceptable functional-equation residual of a converged field.
    pub residual_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            stop_tol: 1e-12,
            tail_tol: 1e-7,
            residual_tol: 1e-8,
        }
    }
}

/// A full equation instance: dilation factor, regime, coefficients, domain,
/// scaling rule, and tolerances.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub q: Complex64,
    pub mode: TheoremMode,
    pub coeffs: Arc<CoefficientSet>,
    pub domain: DomainSpec,
    pub rule: ScalingRule,
    pub tol: Tolerances,
}

/// Initial iterate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Start {
    /// `y_0 ≡ 1/(2|q|)`.
    #[default]
    HalfBall,
    /// `y_0 ≡ 0` (already a fixed point; useful as a control).
    Zero,
    Constant(Complex64),
}

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("no convergence within {max_iter} iterations (last sup-change {last_change:e}); hypothesis violation likely")]
    NonConvergence { max_iter: u32, last_change: f64 },
    #[error("iterate escaped the ball at grid point {point} on iteration {iteration}")]
    BallEscape { point: Complex64, iteration: u32 },
    #[error("grid point {point} lies outside the construction domain")]
    GridOutsideDomain { point: Complex64 },
    #[error("start modulus {modulus} exceeds the ball radius {radius}")]
    StartOutsideBall { modulus: f64, radius: f64 },
    #[error("empty grid")]
    EmptyGrid,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

impl ProblemSpec {
    /// Instance with the regime's default domain and tolerances.
    pub fn new(
        q: Complex64,
        mode: TheoremMode,
        coeffs: Arc<CoefficientSet>,
    ) -> Result<Self, SolverError> {
        let spec = ProblemSpec {
            q,
            mode,
            coeffs,
            domain: default_domain(mode, q),
            rule: ScalingRule::Complex,
            tol: Tolerances::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_domain(mut self, domain: DomainSpec) -> Result<Self, SolverError> {
        self.domain = domain;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rule(mut self, rule: ScalingRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// `1/|q|`, the sup-norm ball radius.
    pub fn ball_radius(&self) -> f64 {
        1.0 / self.q.norm()
    }

    /// The regime's Lipschitz constant for this instance.
    pub fn lipschitz(&self) -> f64 {
        theoretical_contraction(self.mode, self.q.norm(), self.domain.rho())
    }

    /// Structural consistency: domain shape and coefficient-set mode.
    ///
    /// The `|q|` threshold is deliberately not enforced here — sub-threshold
    /// instances must be representable so the hypothesis gate can report
    /// them; solving enforces the threshold via the truncation machinery.
    pub fn validate(&self) -> Result<(), SolverError> {
        let qn = self.q.norm();
        if self.coeffs.mode() != self.mode {
            return Err(SolverError::InvalidProblem(format!(
                "coefficient set was built for {:?}, problem is {:?}",
                self.coeffs.mode(),
                self.mode
            )));
        }
        match (self.mode.uses_half_plane(), self.domain) {
            (true, DomainSpec::HalfPlanes { rho }) => {
                if rho <= 0.0 {
                    return Err(SolverError::InvalidProblem("rho must be positive".into()));
                }
                if matches!(self.mode, TheoremMode::T2) && rho <= 1.0 {
                    return Err(SolverError::InvalidProblem(
                        "T2 contraction needs rho > 1 (default rho = |q|/2)".into(),
                    ));
                }
            }
            (false, DomainSpec::Rectangle { rho, sigma }) => {
                if rho <= 0.0 || sigma <= 0.0 {
                    return Err(SolverError::InvalidProblem(
                        "rho and sigma must be positive".into(),
                    ));
                }
                if rho * rho + sigma * sigma > qn * qn * (1.0 + 1e-12) {
                    return Err(SolverError::InvalidProblem(format!(
                        "rectangle requires rho^2 + sigma^2 <= |q|^2, got {} > {}",
                        rho * rho + sigma * sigma,
                        qn * qn
                    )));
                }
            }
            (true, _) => {
                return Err(SolverError::InvalidProblem(
                    "half-plane modes need a half-plane domain".into(),
                ))
            }
            (false, _) => {
                return Err(SolverError::InvalidProblem(
                    "rectangle modes need a rectangle domain".into(),
                ))
            }
        }
        Ok(())
    }

    /// Default grid: 256 points on the domain's audit patch.
    pub fn default_grid(&self) -> Vec<Complex64> {
        crate::domain::grid_on_patch(&self.domain.default_patch(), 256)
    }
}

/// Per-regime default construction domain: `D(|q|)` for T1, `D(|q|/2)` for
/// T2, the square `ρ = σ = |q|/2` for T3/T4.
pub fn default_domain(mode: TheoremMode, q: Complex64) -> DomainSpec {
    let qn = q.norm();
    match mode {
        TheoremMode::T1 => DomainSpec::HalfPlanes { rho: qn },
        TheoremMode::T2 => DomainSpec::HalfPlanes { rho: qn / 2.0 },
        TheoremMode::T3 | TheoremMode::T4 => DomainSpec::Rectangle {
            rho: qn / 2.0,
            sigma: qn / 2.0,
        },
    }
}

/// Default start value `1/(2|q|)`.
pub fn default_start(q: Complex64) -> Complex64 {
    Complex64::new(0.5 / q.norm(), 0.0)
}

/// Single-point iteration engine shared by the grid solver and the
/// continuation evaluator. Cheap to clone conceptually — hold it by
/// reference or rebuild from the [`ProblemSpec`]; the coefficient memo is
/// per-instance.
pub struct PointSolver {
    mode: TheoremMode,
    q: Complex64,
    lambda: Complex64,
    rule: ScalingRule,
    policy: TruncationPolicy,
    sc: Arc<SeriesCoefficients>,
    stop_tol: f64,
    l_theoretical: f64,
    ball_radius: f64,
}

impl PointSolver {
    pub fn new(p: &ProblemSpec) -> Result<Self, SolverError> {
        p.validate()?;
        let policy = choose_truncation(p.mode, p.q.norm(), p.tol.tail_tol)?;
        let sc = Arc::new(SeriesCoefficients::expand(p.coeffs.clone(), policy.j_max)?);
        Ok(PointSolver {
            mode: p.mode,
            q: p.q,
            lambda: p.coeffs.lambda(),
            rule: p.rule,
            policy,
            sc,
            stop_tol: p.tol.stop_tol,
            l_theoretical: p.lipschitz(),
            ball_radius: p.ball_radius(),
        })
    }

    pub fn policy(&self) -> TruncationPolicy {
        self.policy
    }

    pub fn series(&self) -> &Arc<SeriesCoefficients> {
        &self.sc
    }

    pub fn lipschitz(&self) -> f64 {
        self.l_theoretical
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    /// One application of the truncated operator at `z`.
    pub fn apply(&self, z: Complex64, y: Complex64) -> Result<Complex64, OperatorError> {
        apply_t(
            self.mode, &self.sc, self.q, self.lambda, z, y, &self.policy, self.rule,
        )
    }

    /// Iterate a single point to its fixed point. Returns the value and the
    /// iteration count under the same counting rule as the grid solver.
    pub fn solve_point(&self, z: Complex64, y0: Complex64) -> Result<(Complex64, u32), SolverError> {
        let mut y = y0;
        let mut budget = 64u32;
        let mut sweep = 0u32;
        let mut last_nonzero = 0u32;
        loop {
            sweep += 1;
            let next = self.apply(z, y)?;
            if next.norm() > self.ball_radius + BALL_EPS {
                return Err(SolverError::BallEscape { point: z, iteration: sweep });
            }
            let change = (next - y).norm();
            y = next;
            if change > 0.0 {
                last_nonzero = sweep;
            }
            if sweep == 1 && change >= self.stop_tol {
                budget = iteration_budget(self.stop_tol, self.l_theoretical, change);
            }
            if change < self.stop_tol {
                let iters = if change == 0.0 { last_nonzero } else { sweep };
                return Ok((y, iters));
            }
            if sweep >= budget {
                return Err(SolverError::NonConvergence {
                    max_iter: budget,
                    last_change: change,
                });
            }
        }
    }
}

// contraction gives an exact iteration budget: L^n d01/(1-L) < stop_tol
fn iteration_budget(stop_tol: f64, l: f64, d01: f64) -> u32 {
    let arg = stop_tol * (1.0 - l) / d01;
    let n = (arg.ln() / l.ln()).ceil();
    let n = if n.is_finite() && n > 0.0 { n as u32 } else { 1 };
    n + 10
}

/// Converged solution values over a sample grid.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub grid: Vec<Complex64>,
    pub values: Vec<Complex64>,
    pub iterations: Vec<u32>,
    pub policy: TruncationPolicy,
    /// The start value the iteration used; off-grid continuation evaluations
    /// restart from it so they land in the same basin, exactly.
    pub start: Complex64,
}

impl SolutionField {
    pub fn sup_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Index and distance of the grid point nearest to `w` (first minimal
    /// index on ties).
    pub fn nearest_index(&self, w: Complex64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &g) in self.grid.iter().enumerate() {
            let d = (g - w).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }
}

/// Convergence telemetry of one grid solve.
#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub l_theoretical: f64,
    pub l_empirical: f64,
    pub iterations: u32,
    pub d01: f64,
    pub aposteriori_bound: f64,
    pub max_residual: f64,
    pub grid_points: usize,
    pub policy: TruncationPolicy,
}

/// Iterate `y_{n+1} = T[y_n]` over the grid until the sup-change drops below
/// `stop_tol`.
///
/// Points iterate independently (and in parallel); the sup-change reduction
/// uses the exact maximum, so the outcome is bit-identical for any worker
/// count. The reported `max_residual` is the functional-equation residual
/// audit of the converged field.
pub fn picard_solve(
    p: &ProblemSpec,
    grid: &[Complex64],
    start: Start,
) -> Result<(SolutionField, IterationReport), SolverError> {
    if grid.is_empty() {
        return Err(SolverError::EmptyGrid);
    }
    for &z in grid {
        if !p.domain.contains(z) {
            return Err(SolverError::GridOutsideDomain { point: z });
        }
    }
    let ps = PointSolver::new(p)?;
    let radius = p.ball_radius();
    let y0 = match start {
        Start::HalfBall => default_start(p.q),
        Start::Zero => Complex64::ZERO,
        Start::Constant(c) => c,
    };
    if y0.norm() > radius + BALL_EPS {
        return Err(SolverError::StartOutsideBall {
            modulus: y0.norm(),
            radius,
        });
    }

    let l = ps.l_theoretical;
    let stop = p.tol.stop_tol;
    let mut y = vec![y0; grid.len()];
    let mut d01 = 0.0f64;
    let mut l_empirical = 0.0f64;
    let mut prev_change: Option<f64> = None;
    let mut budget = u32::MAX;
    let mut sweep = 0u32;
    let mut last_nonzero = 0u32;

    let (values, iterations) = loop {
        sweep += 1;
        let stepped: Vec<Result<Complex64, OperatorError>> = grid
            .par_iter()
            .zip(y.par_iter())
            .map(|(&z, &yz)| ps.apply(z, yz))
            .collect();
        // sequential scans keep error selection and the max reduction
        // independent of the worker count
        let mut next = Vec::with_capacity(y.len());
        for (i, r) in stepped.into_iter().enumerate() {
            let v = r.map_err(SolverError::Operator)?;
            if v.norm() > radius + BALL_EPS {
                return Err(SolverError::BallEscape {
                    point: grid[i],
                    iteration: sweep,
                });
            }
            next.push(v);
        }
        let change = next
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        y = next;
        if sweep == 1 {
            d01 = change;
            budget = if change < stop {
                sweep
            } else {
                iteration_budget(stop, l, d01)
            };
        }
        if change > 0.0 {
            last_nonzero = sweep;
        }
        if let Some(pc) = prev_change {
            if pc >= stop && change >= stop {
                l_empirical = l_empirical.max(change / pc);
            }
        }
        prev_change = Some(change);
        if change < stop {
            let iters = if change == 0.0 { last_nonzero } else { sweep };
            break (y, iters);
        }
        if sweep >= budget {
            return Err(SolverError::NonConvergence {
                max_iter: budget,
                last_change: change,
            });
        }
    };

    let field = SolutionField {
        grid: grid.to_vec(),
        values,
        iterations: vec![iterations; grid.len()],
        policy: ps.policy,
        start: y0,
    };
    let aposteriori_bound = l.powi(iterations as i32) / (1.0 - l) * d01;
    let residual = crate::verify::residual_on_grid(&field, p);
    let report = IterationReport {
        l_theoretical: l,
        l_empirical,
        iterations,
        d01,
        aposteriori_bound,
        max_residual: residual.max_residual,
        grid_points: grid.len(),
        policy: ps.policy,
    };
    Ok((field, report))
}

/// Max per-point Lipschitz ratio of the operator over `samples` random
/// ball-valued pairs at random admissible points. Seeded, deterministic.
pub fn empirical_contraction(p: &ProblemSpec, samples: usize) -> Result<f64, SolverError> {
    use rand::Rng;
    use rand::SeedableRng;
    assert!(samples >= 2, "need at least two samples");
    let ps = PointSolver::new(p)?;
    let radius = p.ball_radius();
    let patch = p.domain.default_patch();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x51c0_4d17);
    let mut worst = 0.0f64;
    let mut done = 0usize;
    while done < samples {
        let z = Complex64::new(
            rng.random_range(patch.re_min..=patch.re_max),
            rng.random_range(patch.im_min..=patch.im_max),
        );
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let r = radius * rng.random_range(0.0f64..=1.0).sqrt();
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            Complex64::from_polar(r, th)
        };
        let y1 = draw(&mut rng);
        let y2 = draw(&mut rng);
        if (y1 - y2).norm() < 1e-9 {
            continue;
        }
        let t1 = ps.apply(z, y1)?;
        let t2 = ps.apply(z, y2)?;
        worst = worst.max((t1 - t2).norm() / (y1 - y2).norm());
        done += 1;
    }
    Ok(worst)
}

/// True iff every field value sits inside the closed ball `1/|q|` (with
/// `1e-12` slack).
pub fn ball_membership(f: &SolutionField, q: Complex64) -> bool {
    f.sup_modulus() <= 1.0 / q.norm() + 1e-12
}
