//! qpicard — a contraction-mapping solver and verification toolkit for
//! first-order q-difference equations
//!
//! ```text
//! y(qz) = R(z, y(z)) = (a_1(z) y + a_2(z) y² + … + a_p(z) y^p)
//!                    / (1 + b_1(z) y + … + b_t(z) y^t)
//! ```
//!
//! with meromorphic coefficients and `R(z, 0) = 0`. Four hypothesis regimes
//! (half-plane or rectangle domain, `a_1` constant or identically zero) each
//! yield an operator `T` that is a contraction on the sup-norm ball
//! `‖y‖ ≤ 1/|q|`; the toolkit expands `R` into its series coefficients,
//! iterates `T` to the unique fixed point with a-posteriori error bounds,
//! continues the local solution by scaling and by the functional equation
//! itself, and audits every hypothesis and residual numerically.
//!
//! Module map:
//!
//! * [`expr`] — the coefficient expression language (parse, evaluate, poles);
//! * [`series`] — expansion coefficients `c_j`, two independent computation
//!   paths, modulus-bound checks;
//! * [`operator`] — the four operators, truncation policies, tail bounds;
//! * [`domain`] — construction domains and sample grids;
//! * [`solver`] — Picard iteration over a grid, convergence telemetry;
//! * [`extend`] — continuation beyond the domain, Cayley maps, the
//!   `Σ q^{-n²} z^{2n}` counterexample;
//! * [`verify`] — hypothesis gates, residual audit, numeric inequalities;
//! * [`cli`] — the `qpicard` command-line front end.
//!
//! ```
//! use num_complex::Complex64;
//! use qpicard::expr::parse_expr;
//! use qpicard::operator::TheoremMode;
//! use qpicard::series::CoefficientSet;
//! use qpicard::solver::{picard_solve, ProblemSpec, Start};
//! use std::sync::Arc;
//!
//! let coeffs = CoefficientSet::new(
//!     TheoremMode::T1,
//!     vec![parse_expr("0.05").unwrap(), parse_expr("0.15/z").unwrap()],
//!     vec![parse_expr("1/z").unwrap()],
//! ).unwrap();
//! let p = ProblemSpec::new(Complex64::new(3.0, 0.0), TheoremMode::T1, Arc::new(coeffs)).unwrap();
//! let grid = p.default_grid();
//! let (field, report) = picard_solve(&p, &grid, Start::HalfBall).unwrap();
//! assert!(report.max_residual <= 1e-8);
//! assert!(qpicard::solver::ball_membership(&field, p.q));
//! ```

pub mod cli;
pub mod domain;
pub mod expr;
pub mod extend;
pub mod operator;
pub mod series;
pub mod solver;
pub mod verify;

pub use num_complex::Complex64;
