//! Construction domains and sample grids.
//!
//! The half-plane modes work on `D(ρ) = { z : |Re z| ≥ ρ }`, the rectangle
//! modes on `D(ρ, σ) = { z : |Re z| ≤ ρ, |Im z| ≤ σ }`. Both domains are
//! closed; membership is an exact inclusive comparison. Since `D(ρ)` is
//! unbounded, any finite audit needs a declared patch — the default is the
//! strip `ρ ≤ Re z ≤ 4ρ`, `|Im z| ≤ 4ρ` of the right component.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// The region a solution field is constructed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// `{ z : |Re z| ≥ ρ }`, both components.
    HalfPlanes { rho: f64 },
    /// `{ z : |Re z| ≤ ρ, |Im z| ≤ σ }`.
    Rectangle { rho: f64, sigma: f64 },
}

impl DomainSpec {
    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            DomainSpec::HalfPlanes { rho } => z.re.abs() >= rho,
            DomainSpec::Rectangle { rho, sigma } => z.re.abs() <= rho && z.im.abs() <= sigma,
        }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            DomainSpec::HalfPlanes { rho } => rho,
            DomainSpec::Rectangle { rho, .. } => rho,
        }
    }

    /// Bounded rectangle used for grids and sampled checks.
    pub fn default_patch(&self) -> Patch {
        match *self {
            DomainSpec::HalfPlanes { rho } => Patch {
                re_min: rho,
                re_max: 4.0 * rho,
                im_min: -4.0 * rho,
                im_max: 4.0 * rho,
            },
            DomainSpec::Rectangle { rho, sigma } => Patch {
                re_min: -rho,
                re_max: rho,
                im_min: -sigma,
                im_max: sigma,
            },
        }
    }
}

/// Axis-aligned sampling rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Patch {
    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }
}

/// `count` points on a uniform rows-by-columns lattice over the patch, row
/// major, deterministic. The lattice side is `ceil(sqrt(count))`; the first
/// `count` points are returned.
pub fn grid_on_patch(patch: &Patch, count: usize) -> Vec<Complex64> {
    assert!(count > 0, "grid count must be positive");
    let side = (count as f64).sqrt().ceil() as usize;
    let step = |lo: f64, hi: f64, k: usize| {
        if side == 1 {
            (lo + hi) / 2.0
        } else {
            lo + (hi - lo) * (k as f64) / ((side - 1) as f64)
        }
    };
    let mut out = Vec::with_capacity(count);
    'rows: for r in 0..side {
        for cidx in 0..side {
            if out.len() == count {
                break 'rows;
            }
            out.push(Complex64::new(
                step(patch.re_min, patch.re_max, cidx),
                step(patch.im_min, patch.im_max, r),
            ));
        }
    }
    out
}
