//! Free convolution of an atomic measure with the semicircle law.
//!
//! For `mu_t = rho_sc(t) ⊞ mu_D` the Stieltjes transform solves Pastur's
//! relation `m = int mu_D(dλ) / (λ - z - t m)`. Writing `ω = z + t m` for the
//! subordination point, every real-axis quantity used downstream (edges,
//! gaps, boundary values outside the support, the logarithmic potential)
//! reduces to scalar equations in `ω`.

mod edge;
mod pastur;
mod potential;

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AtlasError, Result};
use crate::measures::{DiscreteMeasure, GriddedDensity};
use crate::numerics::bisect;

pub use edge::{edge_exponent, left_edge, right_edge, EdgeReport, ExponentFit, Side};
pub use pastur::SolverConfig;
pub use potential::{log_potential, log_potential_quadrature};

use edge::Gap;
use pastur::Pastur;

/// Uniform evaluation grid `min, min + h, ..., max` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl GridSpec {
    pub const DEFAULT_NODES: usize = 4096;

    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        let g = GridSpec { min, max, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(AtlasError::invalid(format!(
                "grid bounds [{}, {}] are not an interval",
                self.min, self.max
            )));
        }
        if self.n < 2 {
            return Err(AtlasError::invalid("grid needs at least two nodes"));
        }
        Ok(())
    }

    /// `[left - 10% W, right + 10% W]` with `n` nodes, `W = right - left`.
    pub fn around(left: f64, right: f64, n: usize) -> Self {
        let w = (right - left).max(1e-12);
        GridSpec { min: left - 0.1 * w, max: right + 0.1 * w, n }
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.min + self.step() * i as f64
    }
}

/// Extremal-edge data of a free convolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeData {
    pub left_edge: f64,
    pub right_edge: f64,
    pub w_left: f64,
    pub w_right: f64,
    pub m_at_left_edge: f64,
    pub m_at_right_edge: f64,
}

/// A solved semicircle free convolution `rho_sc(t) ⊞ mu_D`.
#[derive(Debug)]
pub struct FreeConvolution {
    base: DiscreteMeasure,
    variance: f64,
    config: SolverConfig,
    edges: EdgeData,
    gaps: OnceLock<Vec<Gap>>,
    density: Option<GriddedDensity>,
    stieltjes_cache: RwLock<HashMap<(u64, u64), Complex64>>,
}

impl FreeConvolution {
    pub fn new(base: &DiscreteMeasure, t: f64) -> Result<Self> {
        Self::with_config(base, t, SolverConfig::default())
    }

    pub fn with_config(base: &DiscreteMeasure, t: f64, config: SolverConfig) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(AtlasError::invalid(format!("variance t = {t} must be positive")));
        }
        let left = edge::locate_edge(base, t, Side::Left)?;
        let right = edge::locate_edge(base, t, Side::Right)?;
        Ok(FreeConvolution {
            base: base.clone(),
            variance: t,
            config,
            edges: EdgeData {
                left_edge: left.edge,
                right_edge: right.edge,
                w_left: left.w,
                w_right: right.w,
                m_at_left_edge: left.m_edge,
                m_at_right_edge: right.m_edge,
            },
            gaps: OnceLock::new(),
            density: None,
            stieltjes_cache: RwLock::new(HashMap::new()),
        })
    }

    /// Computes and stores the density on `grid`.
    pub fn with_density(mut self, grid: GridSpec) -> Result<Self> {
        self.density = Some(self.compute_density(grid)?);
        Ok(self)
    }

    pub fn base(&self) -> &DiscreteMeasure {
        &self.base
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn edges(&self) -> &EdgeData {
        &self.edges
    }

    pub fn left_edge(&self) -> f64 {
        self.edges.left_edge
    }

    pub fn right_edge(&self) -> f64 {
        self.edges.right_edge
    }

    /// The stored density, if one was computed with [`with_density`](Self::with_density).
    pub fn density(&self) -> Option<&GriddedDensity> {
        self.density.as_ref()
    }

    /// Default grid: the support plus 10% margins, 4096 nodes.
    pub fn default_grid(&self) -> GridSpec {
        GridSpec::around(self.left_edge(), self.right_edge(), GridSpec::DEFAULT_NODES)
    }

    /// Open gaps `(lo, hi)` inside `[left_edge, right_edge]` where the density vanishes.
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        self.gap_list().iter().map(|g| (g.lo, g.hi)).collect()
    }

    fn gap_list(&self) -> &[Gap] {
        self.gaps
            .get_or_init(|| edge::locate_gaps(&self.base, self.variance))
    }

    fn solver(&self) -> Pastur<'_> {
        Pastur { mu: &self.base, t: self.variance, config: self.config }
    }

    /// `m_t(z)` for `Im z > 0`, memoized per `z`.
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(m) = self.stieltjes_cache.read().expect("cache poisoned").get(&key) {
            return Ok(*m);
        }
        let m = self.solver().solve(z)?;
        self.stieltjes_cache
            .write()
            .expect("cache poisoned")
            .entry(key)
            .or_insert(m);
        Ok(m)
    }

    pub fn cached_points(&self) -> usize {
        self.stieltjes_cache.read().expect("cache poisoned").len()
    }

    /// Pastur residual of a candidate value `m` at `z`.
    pub fn residual(&self, z: Complex64, m: Complex64) -> f64 {
        self.solver().residual_norm(z, m)
    }

    /// Subordination map `h(ω) = ω - t m_D(ω)` on the real line.
    fn h(&self, omega: f64) -> f64 {
        omega - self.variance * self.base.resolvent_moment(omega, 1)
    }

    /// Boundary value `m_t(x + i0)` for real `x`. Outside the support the
    /// value is real and comes from inverting the subordination map on its
    /// increasing branch.
    pub fn boundary(&self, x: f64) -> Result<Complex64> {
        if !x.is_finite() {
            return Err(AtlasError::invalid("boundary value at a non-finite point"));
        }
        let e = &self.edges;
        let real_branch = |lo: f64, hi: f64| -> Result<Complex64> {
            let omega = bisect(|w| self.h(w) - x, lo, hi)?;
            Ok(Complex64::new(self.base.resolvent_moment(omega, 1), 0.0))
        };
        if x <= e.left_edge {
            if x == e.left_edge {
                return Ok(Complex64::new(e.m_at_left_edge, 0.0));
            }
            return real_branch(x, e.w_left);
        }
        if x >= e.right_edge {
            if x == e.right_edge {
                return Ok(Complex64::new(e.m_at_right_edge, 0.0));
            }
            return real_branch(e.w_right, x);
        }
        if let Some(g) = self.gap_list().iter().find(|g| g.lo <= x && x <= g.hi) {
            return real_branch(g.w_lo, g.w_hi);
        }
        self.solver().solve_interior(x)
    }

    /// Subordination point `ω(x) = x + t m_t(x + i0)`.
    pub fn subordination(&self, x: f64) -> Result<Complex64> {
        Ok(x + self.variance * self.boundary(x)?)
    }

    /// Density at a single real point.
    pub fn density_at(&self, x: f64) -> Result<f64> {
        if x <= self.left_edge() || x >= self.right_edge() {
            return Ok(0.0);
        }
        if self.gap_list().iter().any(|g| g.lo <= x && x <= g.hi) {
            return Ok(0.0);
        }
        let m = self.solver().solve_interior(x).map_err(|e| match e {
            AtlasError::NonConvergence { what, iterations, residual, history } => {
                AtlasError::NonConvergence {
                    what: format!("{what} (density at x = {x})"),
                    iterations,
                    residual,
                    history,
                }
            }
            other => other,
        })?;
        let v = m.im / std::f64::consts::PI;
        Ok(if v < 1e-10 { 0.0 } else { v })
    }

    fn compute_density(&self, grid: GridSpec) -> Result<GriddedDensity> {
        grid.validate()?;
        // make sure gaps are located once, not per worker
        let _ = self.gap_list();
        let values = (0..grid.n)
            .into_par_iter()
            .map(|i| self.density_at(grid.node(i)))
            .collect::<Result<Vec<f64>>>()?;
        let d = GriddedDensity::new(grid.min, grid.max, values, self.left_edge(), self.right_edge())?;
        d.check_mass(1e-3)?;
        Ok(d)
    }
}

/// `m_t(z)` for `Im z > 0` with the default solver settings.
pub fn pastur_stieltjes(mu: &DiscreteMeasure, t: f64, z: Complex64) -> Result<Complex64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(AtlasError::invalid(format!("variance t = {t} must be positive")));
    }
    Pastur { mu, t, config: SolverConfig::default() }.solve(z)
}

/// Density of `rho_sc(t) ⊞ mu` on `grid`; zero outside the support.
pub fn density(mu: &DiscreteMeasure, t: f64, grid: GridSpec) -> Result<GriddedDensity> {
    FreeConvolution::new(mu, t)?.compute_density(grid)
}

/// Density on the default grid (support plus 10% margins, 4096 nodes).
pub fn density_default(mu: &DiscreteMeasure, t: f64) -> Result<GriddedDensity> {
    let fc = FreeConvolution::new(mu, t)?;
    fc.compute_density(fc.default_grid())
}

/// Outcome of [`characteristic_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicCheck {
    pub u_t: f64,
    pub defect: f64,
}

/// Checks the conserved quantity along the characteristic through the
/// origin: `u_t = -t int λ^{-1} mu_D` must satisfy `m_t(u_t) = -u_t / t`.
pub fn characteristic_check(mu: &DiscreteMeasure, t: f64) -> Result<CharacteristicCheck> {
    if mu.min_atom() <= 0.0 {
        return Err(AtlasError::invalid("characteristic check needs a positive support"));
    }
    let t_c = 1.0 / mu.resolvent_moment(0.0, 2);
    if !(t > 0.0) || t >= t_c {
        return Err(AtlasError::invalid(format!(
            "t = {t} must lie in (0, t_c) with t_c = {t_c}"
        )));
    }
    let u_t = -t * mu.resolvent_moment(0.0, 1);
    let fc = FreeConvolution::new(mu, t)?;
    let m = fc.boundary(u_t)?;
    Ok(CharacteristicCheck { u_t, defect: (m + u_t / t).norm() })
}
