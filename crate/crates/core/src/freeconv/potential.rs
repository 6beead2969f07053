//! Logarithmic potential `Φ(u) = int log|λ - u| mu_t(dλ)`.
//!
//! The primary route is exact in terms of the subordination point
//! `ω = u + t m_t(u + i0)`:
//!
//! `Φ(u) = int log|λ - ω| mu_D(dλ) + t Re(m_t(u)^2) / 2`.
//!
//! Both sides vanish like `log|u|` at infinity and have the same
//! `u`-derivative `-Re m_t(u)`. A quadrature route on a gridded density is
//! kept as an independent check.

use num_complex::Complex64;

use super::FreeConvolution;
use crate::error::Result;
use crate::measures::{DiscreteMeasure, GriddedDensity};

impl FreeConvolution {
    /// `Φ(u)` through the subordination identity; any real `u`.
    pub fn log_potential(&self, u: f64) -> Result<f64> {
        let m = self.boundary(u)?;
        Ok(self.log_potential_from(u, m))
    }

    /// `Φ(u)` given an already computed boundary value `m = m_t(u + i0)`.
    pub fn log_potential_from(&self, u: f64, m: Complex64) -> f64 {
        let t = self.variance();
        let omega = u + t * m;
        let sum: f64 = self
            .base()
            .iter()
            .map(|(a, w)| w * 0.5 * ((a - omega.re).powi(2) + omega.im * omega.im).ln())
            .sum();
        sum + 0.5 * t * (m * m).re
    }
}

/// `int log|λ - u| mu_t(dλ)` for `mu_t = rho_sc(t) ⊞ mu`.
pub fn log_potential(mu: &DiscreteMeasure, t: f64, u: f64) -> Result<f64> {
    FreeConvolution::new(mu, t)?.log_potential(u)
}

/// `int log|λ - u| rho(λ) dλ` for a gridded density, integrating the
/// piecewise-linear interpolant of `rho` against the logarithm exactly on
/// every cell. The log singularity at `u` needs no special treatment.
pub fn log_potential_quadrature(density: &GriddedDensity, u: f64) -> f64 {
    // antiderivatives in s = λ - u
    fn f0(s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            s * s.abs().ln() - s
        }
    }
    fn f1(s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            0.5 * s * s * s.abs().ln() - 0.25 * s * s
        }
    }
    let h = density.step();
    let values = density.values();
    let mut total = 0.0;
    for (i, pair) in values.windows(2).enumerate() {
        if pair[0] == 0.0 && pair[1] == 0.0 {
            continue;
        }
        let s0 = density.node(i) - u;
        let s1 = s0 + h;
        // rho = a + b s on the cell
        let b = (pair[1] - pair[0]) / h;
        let a = pair[0] - b * s0;
        total += a * (f0(s1) - f0(s0)) + b * (f1(s1) - f1(s0));
    }
    total
}
