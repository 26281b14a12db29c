//! Expansion coefficients of the rational dilation map.
//!
//! Writing the right-hand side of `y(qz) = R(z, y(z))` as a Taylor series in
//! `y` around the fixed point 0 gives
//!
//! ```text
//! y(qz) - λ y(z) = Σ_{j≥2} c_j(z) y(z)^j,        λ = a_1(z) (constant)
//! ```
//!
//! Two independent ways of computing the `c_j` are kept permanently:
//!
//! * **division path** (default): evaluate all `a_j(z)`, `b_k(z)` and divide
//!   the numerator polynomial by `1 + Σ b_k y^k` as truncated power series;
//! * **enumeration path** (audit): expand each `c_j` as a signed sum of
//!   monomials `± n!/(j_1!…j_t!) · a_{j'} b_1^{j_1} ⋯ b_t^{j_t}` indexed by
//!   multi-indices, which makes the term structure inspectable.
//!
//! The first terms collapse to
//!
//! ```text
//! c_2 = a_2 - a_1 b_1
//! c_3 = a_3 - a_2 b_1 - a_1 b_2 + a_1 b_1^2
//! c_4 = a_4 - a_3 b_1 + a_2 b_1^2 - a_2 b_2 - a_1 b_1^3 + 2 a_1 b_1 b_2 - a_1 b_3
//! ```
//!
//! and, counting a multiplicity-n monomial as n unit terms, `c_j` consists of
//! exactly `2^{j-1}` terms of which the single degree-`j` one is
//! `± a_1 b_1^{j-1}`.

use std::sync::Arc;

use dashmap::DashMap;
use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{EvalResult, Expression};
use crate::operator::TheoremMode;

/// Truncation orders above this are rejected by [`SeriesCoefficients::expand`];
/// it keeps the unit-term budget `2^{J-1} ≤ 4096`.
pub const DEFAULT_ORDER_CAP: u32 = 13;

/// Exponent tuple `(j_1, …, j_t)` indexing the monomial `b_1^{j_1} ⋯ b_t^{j_t}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    /// `d(τ) = j_1 + j_2 + … + j_t`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `w(τ) = j_1 + 2 j_2 + … + t j_t`.
    pub fn weight(&self) -> u32 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &j)| (i as u32 + 1) * j)
            .sum()
    }
}

/// Degree of a multi-index.
pub fn degree(tau: &MultiIndex) -> u32 {
    tau.degree()
}

/// Weight of a multi-index.
pub fn weight(tau: &MultiIndex) -> u32 {
    tau.weight()
}

/// Errors from coefficient-set construction and series expansion.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SeriesError {
    #[error("coefficient {which} has a pole at z = {z}")]
    PoleInCoefficient { z: Complex64, which: String },
    #[error("truncation order {requested} exceeds the enumeration budget (cap {cap})")]
    OrderTooLarge { requested: u32, cap: u32 },
    #[error("truncation order must be at least 2, got {requested}")]
    OrderTooSmall { requested: u32 },
    #[error("{mode:?} requires a constant a_1; `{expr}` depends on z")]
    NonConstantA1 { mode: TheoremMode, expr: String },
    #[error("{mode:?} requires a_1 = 0; got `{expr}`")]
    NonzeroA1 { mode: TheoremMode, expr: String },
    #[error("at least one numerator coefficient is required")]
    EmptyNumerator,
}

/// The coefficient data of one equation instance: numerator coefficients
/// `a_1 … a_p`, denominator coefficients `b_1 … b_t`, and the constant
/// `λ = a_1` (zero in the `a_1 ≡ 0` modes).
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    mode: TheoremMode,
    a: Vec<Expression>,
    b: Vec<Expression>,
    lambda: Complex64,
}

impl CoefficientSet {
    /// Build a validated coefficient set.
    ///
    /// `a[0]` is always `a_1`. Modes T1/T3 require it to be a constant
    /// expression (its value becomes `λ`); modes T2/T4 require it to be the
    /// constant zero. Non-constant `a_1` is unsupported.
    pub fn new(
        mode: TheoremMode,
        a: Vec<Expression>,
        b: Vec<Expression>,
    ) -> Result<Self, SeriesError> {
        if a.is_empty() {
            return Err(SeriesError::EmptyNumerator);
        }
        if !a[0].is_constant() {
            return Err(SeriesError::NonConstantA1 {
                mode,
                expr: a[0].to_text(),
            });
        }
        let probe = Complex64::new(1.0, 0.0);
        let lambda = match a[0].eval(probe) {
            EvalResult::Value(v) => v,
            EvalResult::Pole { .. } => {
                return Err(SeriesError::PoleInCoefficient {
                    z: probe,
                    which: "a_1".into(),
                })
            }
        };
        if matches!(mode, TheoremMode::T2 | TheoremMode::T4) && lambda != Complex64::ZERO {
            return Err(SeriesError::NonzeroA1 {
                mode,
                expr: a[0].to_text(),
            });
        }
        Ok(CoefficientSet { mode, a, b, lambda })
    }

    pub fn mode(&self) -> TheoremMode {
        self.mode
    }

    /// Numerator degree `p`.
    pub fn p(&self) -> usize {
        self.a.len()
    }

    /// Denominator degree `t`.
    pub fn t(&self) -> usize {
        self.b.len()
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn a_exprs(&self) -> &[Expression] {
        &self.a
    }

    pub fn b_exprs(&self) -> &[Expression] {
        &self.b
    }

    /// Evaluate `a_j(z)`, 1-based.
    pub fn eval_a(&self, j: usize, z: Complex64) -> Result<Complex64, SeriesError> {
        match self.a[j - 1].eval(z) {
            EvalResult::Value(v) => Ok(v),
            EvalResult::Pole { .. } => Err(SeriesError::PoleInCoefficient {
                z,
                which: format!("a_{}", j),
            }),
        }
    }

    /// Evaluate `b_k(z)`, 1-based.
    pub fn eval_b(&self, k: usize, z: Complex64) -> Result<Complex64, SeriesError> {
        match self.b[k - 1].eval(z) {
            EvalResult::Value(v) => Ok(v),
            EvalResult::Pole { .. } => Err(SeriesError::PoleInCoefficient {
                z,
                which: format!("b_{}", k),
            }),
        }
    }

    /// Numerator and denominator of `R(z, y)` at a concrete `(z, y)`.
    pub fn rational_parts(
        &self,
        z: Complex64,
        y: Complex64,
    ) -> Result<(Complex64, Complex64), SeriesError> {
        let mut num = Complex64::ZERO;
        let mut ypow = Complex64::new(1.0, 0.0);
        for j in 1..=self.p() {
            ypow *= y;
            num += self.eval_a(j, z)? * ypow;
        }
        let mut den = Complex64::new(1.0, 0.0);
        let mut ypow = Complex64::new(1.0, 0.0);
        for k in 1..=self.t() {
            ypow *= y;
            den += self.eval_b(k, z)? * ypow;
        }
        Ok((num, den))
    }
}

/// Taylor coefficients of `R(z, ·)` at `y = 0` up to order `j_max`, computed
/// by truncated power-series division of the evaluated numerator by the
/// evaluated denominator. Entry `j-1` is the `y^j` coefficient; the constant
/// term is identically zero (`R(z, 0) = 0`) and omitted.
///
/// This is the independent oracle for the enumeration path.
pub fn oracle_r_taylor(
    cs: &CoefficientSet,
    z: Complex64,
    j_max: u32,
) -> Result<Vec<Complex64>, SeriesError> {
    let j_max = j_max as usize;
    let mut num = vec![Complex64::ZERO; j_max + 1];
    for j in 1..=self_min(cs.p(), j_max) {
        num[j] = cs.eval_a(j, z)?;
    }
    let mut den = vec![Complex64::ZERO; j_max + 1];
    den[0] = Complex64::new(1.0, 0.0);
    for k in 1..=self_min(cs.t(), j_max) {
        den[k] = cs.eval_b(k, z)?;
    }
    // c_n = num_n - Σ_{k=1..n} den_k c_{n-k}, with c_0 = 0
    let mut c = vec![Complex64::ZERO; j_max + 1];
    for n in 1..=j_max {
        let mut acc = num[n];
        for k in 1..n {
            acc -= den[k] * c[n - k];
        }
        c[n] = acc;
    }
    Ok(c[1..].to_vec())
}

fn self_min(a: usize, b: usize) -> usize {
    a.min(b)
}

/// One signed monomial of the enumeration path: `coeff · a_{a_index} ·
/// b_1^{j_1} ⋯ b_t^{j_t}` where `coeff = (-1)^{d(τ)} d(τ)!/(j_1!…j_t!)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: i64,
    pub a_index: u32,
    pub b_powers: MultiIndex,
}

impl Monomial {
    /// Human-readable form, e.g. `-a1*b1`, `+2*a1*b1*b2`, `+a2`.
    pub fn term_string(&self) -> String {
        let mut s = String::new();
        s.push(if self.coeff < 0 { '-' } else { '+' });
        let mag = self.coeff.unsigned_abs();
        if mag != 1 {
            s.push_str(&format!("{}*", mag));
        }
        s.push_str(&format!("a{}", self.a_index));
        for (i, &e) in self.b_powers.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            s.push_str(&format!("*b{}", i + 1));
            if e > 1 {
                s.push_str(&format!("^{}", e));
            }
        }
        s
    }

    /// Total number of coefficient-function factors, `1 + d(τ)`.
    pub fn factor_degree(&self) -> u32 {
        1 + self.b_powers.degree()
    }
}

/// All monomials of `c_j` for numerator degree `p` and denominator degree
/// `t`, in deterministic order (descending `a` index as in the displayed
/// formulas, then slot-wise ascending exponents).
pub fn enumerate_monomials(j: u32, p: u32, t: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for a_index in (1..=p.min(j)).rev() {
        let target = j - a_index;
        let mut slots = vec![0u32; t as usize];
        collect_weighted(&mut slots, 1, target, t, &mut |tau| {
            let d = tau.iter().sum::<u32>();
            let coeff = multinomial(d, tau) * if d % 2 == 0 { 1 } else { -1 };
            out.push(Monomial {
                coeff,
                a_index,
                b_powers: MultiIndex(tau.to_vec()),
            });
        });
    }
    out
}

// enumerate all (j_1..j_t) with Σ k·j_k = remaining, slot-by-slot
fn collect_weighted(
    slots: &mut Vec<u32>,
    k: u32,
    remaining: u32,
    t: u32,
    f: &mut impl FnMut(&[u32]),
) {
    if k > t {
        if remaining == 0 {
            f(slots);
        }
        return;
    }
    if remaining == 0 {
        for s in slots[(k as usize - 1)..].iter_mut() {
            *s = 0;
        }
        f(slots);
        return;
    }
    for jk in 0..=(remaining / k) {
        slots[k as usize - 1] = jk;
        collect_weighted(slots, k + 1, remaining - k * jk, t, f);
    }
    slots[k as usize - 1] = 0;
}

fn multinomial(d: u32, parts: &[u32]) -> i64 {
    let mut num: i64 = 1;
    for x in 2..=d as i64 {
        num *= x;
    }
    let mut den: i64 = 1;
    for &p in parts {
        for x in 2..=p as i64 {
            den *= x;
        }
    }
    num / den
}

/// Total number of unit terms (multiplicities expanded) across a monomial
/// list; equals `2^{j-1}` for `c_j` when `p, t ≥ j`.
pub fn unit_term_count(monomials: &[Monomial]) -> u64 {
    monomials.iter().map(|m| m.coeff.unsigned_abs()).sum()
}

/// Evaluators for `c_1 … c_J` of one equation instance.
///
/// `eval` is the division path and memoizes per evaluation point (the
/// contraction operator revisits the same geometric point sequences every
/// iteration); the memo fill is idempotent, so concurrent first-writes are
/// safe. `eval_enumerated` is the audit path over the stored monomials.
#[derive(Debug)]
pub struct SeriesCoefficients {
    coeffs: Arc<CoefficientSet>,
    j_max: u32,
    monomials: Vec<Vec<Monomial>>,
    memo: DashMap<(u64, u64), Arc<Vec<Complex64>>>,
}

impl SeriesCoefficients {
    /// Expand to order `j_max` under the default enumeration budget.
    pub fn expand(coeffs: Arc<CoefficientSet>, j_max: u32) -> Result<Self, SeriesError> {
        Self::expand_with_cap(coeffs, j_max, DEFAULT_ORDER_CAP)
    }

    /// Expand with an explicit budget cap.
    pub fn expand_with_cap(
        coeffs: Arc<CoefficientSet>,
        j_max: u32,
        cap: u32,
    ) -> Result<Self, SeriesError> {
        if j_max < 2 {
            return Err(SeriesError::OrderTooSmall { requested: j_max });
        }
        if j_max > cap {
            return Err(SeriesError::OrderTooLarge {
                requested: j_max,
                cap,
            });
        }
        let p = coeffs.p() as u32;
        let t = coeffs.t() as u32;
        let monomials = (1..=j_max)
            .map(|j| enumerate_monomials(j, p, t))
            .collect();
        Ok(SeriesCoefficients {
            coeffs,
            j_max,
            monomials,
            memo: DashMap::new(),
        })
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    pub fn coefficient_set(&self) -> &Arc<CoefficientSet> {
        &self.coeffs
    }

    /// Monomials of `c_j` (1-based, `j ≤ j_max`).
    pub fn monomials(&self, j: u32) -> &[Monomial] {
        &self.monomials[j as usize - 1]
    }

    /// `c_1(z) … c_J(z)` via truncated series division, memoized per point.
    /// Entry `j-1` is `c_j(z)`.
    pub fn eval(&self, z: Complex64) -> Result<Arc<Vec<Complex64>>, SeriesError> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let values = Arc::new(oracle_r_taylor(&self.coeffs, z, self.j_max)?);
        let entry = self.memo.entry(key).or_insert(values);
        Ok(entry.clone())
    }

    /// `c_j(z)` for one `j` via the division path.
    pub fn eval_cj(&self, j: u32, z: Complex64) -> Result<Complex64, SeriesError> {
        Ok(self.eval(z)?[j as usize - 1])
    }

    /// `c_1(z) … c_J(z)` via the monomial enumeration (audit path).
    pub fn eval_enumerated(&self, z: Complex64) -> Result<Vec<Complex64>, SeriesError> {
        let a: Vec<Complex64> = (1..=self.coeffs.p())
            .map(|j| self.coeffs.eval_a(j, z))
            .collect::<Result<_, _>>()?;
        let b: Vec<Complex64> = (1..=self.coeffs.t())
            .map(|k| self.coeffs.eval_b(k, z))
            .collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(self.j_max as usize);
        for list in &self.monomials {
            let mut acc = Complex64::ZERO;
            for m in list {
                let mut term = a[m.a_index as usize - 1] * (m.coeff as f64);
                for (i, &e) in m.b_powers.0.iter().enumerate() {
                    if e > 0 {
                        term *= b[i].powi(e as i32);
                    }
                }
                acc += term;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// `c_1(z)`; must equal `λ` (and does, structurally) in the constant-`a_1`
    /// modes.
    pub fn c1(&self, z: Complex64) -> Result<Complex64, SeriesError> {
        Ok(self.eval(z)?[0])
    }
}

/// One bound violation of the `|c_j|` majorant check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundViolation {
    pub j: u32,
    pub z_re: f64,
    pub z_im: f64,
    pub measured: f64,
    pub allowed: f64,
}

/// Result of checking the per-mode `|c_j|` majorants over a grid. The bounds
/// hold under the theorem hypotheses but may fail for arbitrary user
/// coefficients; this is a report, not a gate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundReport {
    pub mode: TheoremMode,
    pub checked: usize,
    pub worst_ratio: f64,
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check `|c_j(z)| < 2^{j-1}/|z|` (half-plane modes) or
/// `|c_j(z)| < 2^{j-1} |q|^{|z|(j-1)}` (rectangle modes) for `2 ≤ j ≤ J`
/// over a grid.
pub fn check_cj_bounds(
    sc: &SeriesCoefficients,
    grid: &[Complex64],
    mode: TheoremMode,
    q: Complex64,
) -> Result<BoundReport, SeriesError> {
    let qn = q.norm();
    let mut worst = 0.0f64;
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for &z in grid {
        let cj = sc.eval(z)?;
        for j in 2..=sc.j_max {
            let measured = cj[j as usize - 1].norm();
            let allowed = match mode {
                TheoremMode::T1 | TheoremMode::T2 => {
                    2f64.powi(j as i32 - 1) / z.norm()
                }
                TheoremMode::T3 | TheoremMode::T4 => {
                    2f64.powi(j as i32 - 1) * qn.powf(z.norm() * (j as f64 - 1.0))
                }
            };
            let ratio = measured / allowed;
            worst = worst.max(ratio);
            if measured >= allowed {
                violations.push(BoundViolation {
                    j,
                    z_re: z.re,
                    z_im: z.im,
                    measured,
                    allowed,
                });
            }
            checked += 1;
        }
    }
    Ok(BoundReport {
        mode,
        checked,
        worst_ratio: worst,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn exprs(texts: &[&str]) -> Vec<Expression> {
        texts.iter().map(|t| parse_expr(t).unwrap()).collect()
    }

    fn constants_set(mode: TheoremMode, a: &[f64], b: &[f64]) -> CoefficientSet {
        let a: Vec<String> = a.iter().map(|v| format!("{}", v)).collect();
        let b: Vec<String> = b.iter().map(|v| format!("{}", v)).collect();
        CoefficientSet::new(
            mode,
            a.iter().map(|s| parse_expr(s).unwrap()).collect(),
            b.iter().map(|s| parse_expr(s).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn degree_and_weight_examples() {
        let tau = MultiIndex(vec![1, 0, 2]);
        assert_eq!(degree(&tau), 3);
        assert_eq!(weight(&tau), 7);

        let zero = MultiIndex(vec![0, 0, 0]);
        assert_eq!(degree(&zero), 0);
        assert_eq!(weight(&zero), 0);

        let single = MultiIndex(vec![2]);
        assert_eq!(degree(&single), 2);
        assert_eq!(weight(&single), 2);
    }

    #[test]
    fn oracle_identity_map() {
        let cs = constants_set(TheoremMode::T1, &[1.0], &[]);
        let taylor = oracle_r_taylor(&cs, c(0.7, 0.3), 5).unwrap();
        assert_eq!(taylor[0], c(1.0, 0.0));
        for k in 1..5 {
            assert_eq!(taylor[k], Complex64::ZERO);
        }
    }

    #[test]
    fn oracle_geometric_expansion() {
        // y/(1+y) = y - y^2 + y^3 - …
        let cs = constants_set(TheoremMode::T1, &[1.0], &[1.0]);
        let taylor = oracle_r_taylor(&cs, c(2.0, 0.0), 6).unwrap();
        for (k, &v) in taylor.iter().enumerate() {
            let expected = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - c(expected, 0.0)).norm() < 1e-15, "k={} v={}", k, v);
        }
    }

    #[test]
    fn rational_value_at_zero_is_zero() {
        let cs = constants_set(TheoremMode::T1, &[0.3, -0.2, 0.1], &[0.5, 0.25]);
        let (num, den) = cs.rational_parts(c(1.0, 1.0), Complex64::ZERO).unwrap();
        assert_eq!(num, Complex64::ZERO);
        assert_eq!(den, c(1.0, 0.0));
    }

    #[test]
    fn c2_from_constants() {
        // c_2 = a_2 - a_1 b_1 with a_1 = 0.1, a_2 = 0.2, b_1 = 0.3
        let cs = constants_set(TheoremMode::T1, &[0.1, 0.2], &[0.3]);
        let sc = SeriesCoefficients::expand(Arc::new(cs), 4).unwrap();
        let c2 = sc.eval_cj(2, c(5.0, 0.0)).unwrap();
        assert!((c2 - c(0.17, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn c3_from_constants() {
        // a_1 = 1, a_2 = a_3 = 0, b_1 = 1, b_2 = 0:
        // c_3 = a_3 - a_2 b_1 - a_1 b_2 + a_1 b_1^2 = 1
        let cs = constants_set(TheoremMode::T1, &[1.0, 0.0, 0.0], &[1.0, 0.0]);
        let sc = SeriesCoefficients::expand(Arc::new(cs), 4).unwrap();
        let c3 = sc.eval_cj(3, c(4.0, 0.0)).unwrap();
        assert!((c3 - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn no_denominator_means_cj_equals_aj() {
        let cs = CoefficientSet::new(
            TheoremMode::T1,
            exprs(&["0.1", "1/z", "2/z"]),
            exprs(&["0", "0"]),
        )
        .unwrap();
        let sc = SeriesCoefficients::expand(Arc::new(cs), 6).unwrap();
        let z = c(3.0, 1.0);
        let cj = sc.eval(z).unwrap();
        assert!((cj[1] - c(1.0, 0.0) / z).norm() < 1e-15);
        assert!((cj[2] - c(2.0, 0.0) / z).norm() < 1e-15);
        for j in 4..=6usize {
            assert_eq!(cj[j - 1], Complex64::ZERO);
        }
    }

    #[test]
    fn c2_monomials_match_displayed_formula() {
        let monomials = enumerate_monomials(2, 6, 6);
        let terms: Vec<String> = monomials.iter().map(|m| m.term_string()).collect();
        assert_eq!(terms, vec!["+a2".to_string(), "-a1*b1".to_string()]);
    }

    #[test]
    fn c3_monomials_match_displayed_formula() {
        let monomials = enumerate_monomials(3, 6, 6);
        let mut terms: Vec<String> = monomials.iter().map(|m| m.term_string()).collect();
        terms.sort();
        let mut expected = vec![
            "+a3".to_string(),
            "-a2*b1".to_string(),
            "-a1*b2".to_string(),
            "+a1*b1^2".to_string(),
        ];
        expected.sort();
        assert_eq!(terms, expected);
    }

    #[test]
    fn c4_duplicated_term_resolves_to_coefficient_two() {
        // The displayed c_4 lists a_1 b_1 b_2 twice; the expansion carries it
        // once with multiplicity 2. Pinned against the division oracle below.
        let monomials = enumerate_monomials(4, 6, 6);
        let cross = monomials
            .iter()
            .find(|m| m.a_index == 1 && m.b_powers.0[0] == 1 && m.b_powers.0[1] == 1)
            .expect("a1*b1*b2 monomial present");
        assert_eq!(cross.coeff, 2);

        let mut terms: Vec<String> = monomials.iter().map(|m| m.term_string()).collect();
        terms.sort();
        let mut expected = vec![
            "+a4".to_string(),
            "-a3*b1".to_string(),
            "+a2*b1^2".to_string(),
            "-a2*b2".to_string(),
            "-a1*b1^3".to_string(),
            "+2*a1*b1*b2".to_string(),
            "-a1*b3".to_string(),
        ];
        expected.sort();
        assert_eq!(terms, expected);
    }

    #[test]
    fn unit_term_count_is_two_to_j_minus_one() {
        for j in 2..=6u32 {
            let monomials = enumerate_monomials(j, 6, 6);
            assert_eq!(unit_term_count(&monomials), 1u64 << (j - 1), "j = {}", j);
        }
    }

    #[test]
    fn unique_top_degree_monomial_is_a1_b1_power() {
        for j in 2..=6u32 {
            let monomials = enumerate_monomials(j, 6, 6);
            let top: Vec<&Monomial> = monomials
                .iter()
                .filter(|m| m.factor_degree() == j)
                .collect();
            assert_eq!(top.len(), 1, "j = {}", j);
            let m = top[0];
            assert_eq!(m.a_index, 1);
            assert_eq!(m.b_powers.0[0], j - 1);
            assert!(m.b_powers.0[1..].iter().all(|&e| e == 0));
            assert_eq!(m.coeff, if j % 2 == 0 { -1 } else { 1 });
        }
    }

    #[test]
    fn enumeration_agrees_with_division_oracle() {
        let cs = CoefficientSet::new(
            TheoremMode::T1,
            exprs(&["0.1", "1/z", "0.3", "2/(z+1)"]),
            exprs(&["1/z", "0.2", "1/(z-1)"]),
        )
        .unwrap();
        let sc = SeriesCoefficients::expand(Arc::new(cs), 8).unwrap();
        for &z in &[c(3.0, 0.0), c(4.0, -2.0), c(-5.0, 1.5), c(7.0, 7.0)] {
            let division = sc.eval(z).unwrap();
            let enumerated = sc.eval_enumerated(z).unwrap();
            for j in 1..=8usize {
                let d = division[j - 1];
                let e = enumerated[j - 1];
                let scale = d.norm().max(1.0);
                assert!(
                    (d - e).norm() <= 1e-10 * scale,
                    "j={} z={} division={} enumerated={}",
                    j,
                    z,
                    d,
                    e
                );
            }
        }
    }

    #[test]
    fn memoized_eval_returns_shared_values() {
        let cs = constants_set(TheoremMode::T1, &[0.1, 0.2], &[0.3]);
        let sc = SeriesCoefficients::expand(Arc::new(cs), 4).unwrap();
        let z = c(3.0, 1.0);
        let a = sc.eval(z).unwrap();
        let b = sc.eval(z).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn order_budget_enforced() {
        let cs = constants_set(TheoremMode::T1, &[0.1], &[]);
        let err = SeriesCoefficients::expand(Arc::new(cs), 14).unwrap_err();
        assert!(matches!(err, SeriesError::OrderTooLarge { .. }));
    }

    #[test]
    fn c1_equals_lambda_for_constant_a1() {
        let cs = CoefficientSet::new(
            TheoremMode::T1,
            exprs(&["0.25", "1/z"]),
            exprs(&["1/z"]),
        )
        .unwrap();
        assert_eq!(cs.lambda(), c(0.25, 0.0));
        let sc = SeriesCoefficients::expand(Arc::new(cs), 4).unwrap();
        let c1 = sc.c1(c(6.0, 2.0)).unwrap();
        assert!((c1 - c(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn non_constant_a1_rejected() {
        let err = CoefficientSet::new(TheoremMode::T1, exprs(&["1/z"]), vec![]).unwrap_err();
        assert!(matches!(err, SeriesError::NonConstantA1 { .. }));
    }

    #[test]
    fn nonzero_a1_rejected_in_zero_lambda_modes() {
        let err = CoefficientSet::new(TheoremMode::T2, exprs(&["0.1", "1/z"]), vec![]).unwrap_err();
        assert!(matches!(err, SeriesError::NonzeroA1 { .. }));
        assert!(CoefficientSet::new(TheoremMode::T2, exprs(&["0", "1/z"]), vec![]).is_ok());
    }

    #[test]
    fn zero_coefficients_pass_bounds() {
        let cs = constants_set(TheoremMode::T2, &[0.0, 0.0], &[0.0]);
        let sc = SeriesCoefficients::expand(Arc::new(cs), 6).unwrap();
        let grid: Vec<Complex64> = (0..10).map(|k| c(3.0 + k as f64, 1.0)).collect();
        let report = check_cj_bounds(&sc, &grid, TheoremMode::T2, c(3.0, 0.0)).unwrap();
        assert!(report.all_pass());
        assert_eq!(report.worst_ratio, 0.0);
    }

    #[test]
    fn linear_b1_violates_half_plane_bound() {
        // with a_1 = 0.1 and b_1 = z, c_2 = -0.1 z and |c_2| = 0.1|z| beats
        // 2/|z| once |z| exceeds sqrt(20)
        let cs = CoefficientSet::new(
            TheoremMode::T1,
            exprs(&["0.1", "0"]),
            exprs(&["z"]),
        )
        .unwrap();
        let sc = SeriesCoefficients::expand(Arc::new(cs), 4).unwrap();
        let grid: Vec<Complex64> = (0..20).map(|k| c(3.0 + k as f64, 0.0)).collect();
        let report = check_cj_bounds(&sc, &grid, TheoremMode::T1, c(3.0, 0.0)).unwrap();
        assert!(!report.all_pass());
        assert!(report.worst_ratio > 1.0);
        // witness for j = 2 shows up exactly where 0.1|z| >= 2/|z|
        assert!(report
            .violations
            .iter()
            .any(|v| v.j == 2 && c(v.z_re, v.z_im).norm() >= 20f64.sqrt() - 1e-9));
    }

    #[test]
    fn reciprocal_family_passes_half_plane_bound() {
        let cs = CoefficientSet::new(
            TheoremMode::T2,
            exprs(&["0", "1/z"]),
            exprs(&["1/z"]),
        )
        .unwrap();
        let sc = SeriesCoefficients::expand(Arc::new(cs), 6).unwrap();
        let mut grid = Vec::new();
        for r in 0..10 {
            for s in 0..10 {
                grid.push(c(3.0 + r as f64, -4.5 + s as f64));
            }
        }
        let report = check_cj_bounds(&sc, &grid, TheoremMode::T2, c(3.0, 0.0)).unwrap();
        assert!(report.all_pass(), "worst ratio {}", report.worst_ratio);
    }
}
