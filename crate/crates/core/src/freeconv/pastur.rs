//! Pastur fixed-point solver for the Stieltjes transform of the free
//! convolution of an atomic measure with a semicircle of variance `t`:
//!
//! `m = sum_i w_i / (a_i - z - t m)`, `Im m > 0` for `Im z > 0`.

use num_complex::Complex64;

use crate::error::{AtlasError, Result};
use crate::measures::DiscreteMeasure;

/// Tuning for the damped fixed-point iteration and its continuation in
/// `eta = Im z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Weight of the new iterate in the damped update.
    pub damping: f64,
    /// Target residual `|m - T(m)|`.
    pub tolerance: f64,
    /// Budget for the damped iteration at a single `z`.
    pub max_iterations: usize,
    /// Geometric ratio between consecutive rungs of the `eta` ladder.
    pub ladder_ratio: f64,
    /// Smallest `eta` on the ladder, relative to the spectral scale, before
    /// the final solve on the real axis.
    pub eta_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            damping: 0.5,
            tolerance: 1e-13,
            max_iterations: 200_000,
            ladder_ratio: 0.25,
            eta_floor: 1e-10,
        }
    }
}

pub(crate) struct Pastur<'a> {
    pub mu: &'a DiscreteMeasure,
    pub t: f64,
    pub config: SolverConfig,
}

impl<'a> Pastur<'a> {
    /// Returns `(m - T(m), T'(m))` where `T(m) = sum w / (a - z - t m)`.
    fn residual(&self, z: Complex64, m: Complex64) -> (Complex64, Complex64) {
        let mut s = Complex64::new(0.0, 0.0);
        let mut ds = Complex64::new(0.0, 0.0);
        for (a, w) in self.mu.iter() {
            let inv = 1.0 / (a - z - self.t * m);
            s += w * inv;
            ds += w * inv * inv;
        }
        (m - s, self.t * ds)
    }

    pub fn residual_norm(&self, z: Complex64, m: Complex64) -> f64 {
        self.residual(z, m).0.norm()
    }

    /// Spectral scale used to size the ladder.
    pub fn scale(&self) -> f64 {
        1.0f64.max(self.mu.diameter() + 4.0 * self.t.sqrt())
    }

    /// Newton from `m0`; `None` if it leaves the closed upper half-plane or
    /// fails to converge.
    fn newton(&self, z: Complex64, m0: Complex64, require_upper: bool) -> Option<Complex64> {
        let mut m = m0;
        for _ in 0..80 {
            let (g, dt) = self.residual(z, m);
            if !g.re.is_finite() || !g.im.is_finite() {
                return None;
            }
            if g.norm() < self.config.tolerance {
                return Some(m);
            }
            let step = g / (1.0 - dt);
            if !step.re.is_finite() || !step.im.is_finite() {
                return None;
            }
            m -= step;
            if require_upper && m.im <= 0.0 {
                return None;
            }
        }
        let (g, _) = self.residual(z, m);
        (g.norm() < self.config.tolerance).then_some(m)
    }

    /// Damped fixed-point iteration; every iterate stays in the upper
    /// half-plane when `Im z > 0`.
    fn damped(&self, z: Complex64, m0: Complex64) -> Result<Complex64> {
        let omega = self.config.damping;
        let mut m = m0;
        let mut residual = f64::INFINITY;
        for k in 0..self.config.max_iterations {
            let (g, _) = self.residual(z, m);
            residual = g.norm();
            if residual < self.config.tolerance {
                return Ok(m);
            }
            // m - g = T(m)
            m = (1.0 - omega) * m + omega * (m - g);
            if k % 64 == 63 {
                if let Some(polished) = self.newton(z, m, true) {
                    return Ok(polished);
                }
            }
        }
        Err(AtlasError::NonConvergence {
            what: format!("Pastur fixed point at z = {z}"),
            iterations: self.config.max_iterations,
            residual,
            history: vec![residual],
        })
    }

    /// Solves at `z` (Im z > 0) starting from a converged solution `m_prev`
    /// at `z_prev`, subdividing the step when Newton does not stay on the
    /// physical branch.
    fn continue_to(&self, z_prev: Complex64, m_prev: Complex64, z: Complex64, depth: u32) -> Result<Complex64> {
        if let Some(m) = self.newton(z, m_prev, true) {
            return Ok(m);
        }
        if depth < 12 {
            let mid = Complex64::new(z.re, (z_prev.im * z.im).sqrt());
            let m_mid = self.continue_to(z_prev, m_prev, mid, depth + 1)?;
            return self.continue_to(mid, m_mid, z, depth + 1);
        }
        self.damped(z, m_prev)
    }

    /// Stieltjes transform at `z` with `Im z > 0`, reached by continuation
    /// down an `eta` ladder from a height where the map is contractive.
    pub fn solve(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(AtlasError::invalid(format!("z = {z} is not in the upper half-plane")));
        }
        let top = z.im.max(4.0 * self.t.sqrt()).max(1.0);
        let mut z_cur = Complex64::new(z.re, top);
        let m_start = Complex64::new(0.0, 1.0) / top;
        let mut m = self.damped(z_cur, m_start)?;
        while z_cur.im > z.im {
            let next = (z_cur.im * self.config.ladder_ratio).max(z.im);
            let z_next = Complex64::new(z.re, next);
            m = self.continue_to(z_cur, m, z_next, 0)?;
            z_cur = z_next;
        }
        let residual = self.residual_norm(z, m);
        if residual >= 1e-12 || m.im <= 0.0 {
            return Err(AtlasError::NonConvergence {
                what: format!("Pastur solve at z = {z}"),
                iterations: 0,
                residual,
                history: vec![residual],
            });
        }
        Ok(m)
    }

    /// Boundary value `m(x + i0)` for real `x` inside the convex hull of the
    /// support: ladder down to the floor, then Newton on the real axis. If
    /// the real-axis Newton fails, Richardson extrapolation of the two
    /// lowest rungs is returned instead.
    pub fn solve_interior(&self, x: f64) -> Result<Complex64> {
        let h = self.config.eta_floor * self.scale();
        let m_h = self.solve(Complex64::new(x, h))?;
        let real = Complex64::new(x, 0.0);
        if let Some(m) = self.newton(real, m_h, false) {
            let on_branch = if m.im.abs() <= 1e-12 {
                // real root: must be the increasing branch of the subordination map
                let omega = x + self.t * m.re;
                self.t * self.mu.resolvent_moment(omega, 2) < 1.0
            } else {
                m.im > 0.0
            };
            if on_branch {
                return Ok(Complex64::new(m.re, m.im.max(0.0)));
            }
        }
        let m_2h = self.solve(Complex64::new(x, 2.0 * h))?;
        let m = 2.0 * m_h - m_2h;
        Ok(Complex64::new(m.re, m.im.max(0.0)))
    }
}
