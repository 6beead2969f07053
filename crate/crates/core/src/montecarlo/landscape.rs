//! Two-dimensional Gaussian landscapes `V(x) + <x, D x> / 2` on a grid.
//!
//! `V` is isotropic with covariance `N B(|x - y|^2 / (2N))` at `N = 2`, drawn
//! through a Cholesky factor of the grid covariance. The factor depends only
//! on the correlator and the grid, so it is computed once per sampler.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{stream, Gaussian};
use crate::error::{AtlasError, Result};

/// Dimension of the sampled landscape.
pub const LANDSCAPE_DIM: usize = 2;

/// Largest grid side accepted.
pub const MAX_GRID: usize = 64;

/// `B(x) = c0 + sum_j a_j exp(-s_j^2 x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSpec {
    #[serde(default)]
    pub c0: f64,
    /// `(a_j, s_j)` pairs.
    pub terms: Vec<(f64, f64)>,
}

impl CorrelatorSpec {
    pub fn new(c0: f64, terms: Vec<(f64, f64)>) -> Result<Self> {
        let spec = CorrelatorSpec { c0, terms };
        spec.validate()?;
        Ok(spec)
    }

    /// `B(r) = exp(-rate r)`.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(0.0, vec![(1.0, rate.sqrt())])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 >= 0.0) {
            return Err(AtlasError::invalid("c0 must be nonnegative"));
        }
        if self.terms.iter().any(|&(a, s)| !(a >= 0.0) || !(s > 0.0) || !a.is_finite() || !s.is_finite()) {
            return Err(AtlasError::invalid("correlator terms need a >= 0 and s > 0"));
        }
        if !(self.value(0.0) > 0.0 && self.derivative(0.0) < 0.0 && self.second_derivative(0.0) > 0.0) {
            return Err(AtlasError::invalid(
                "correlator must have B(0) > 0, B'(0) < 0 and B''(0) > 0",
            ));
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        self.c0 + self.terms.iter().map(|&(a, s)| a * (-s * s * x).exp()).sum::<f64>()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        -self.terms.iter().map(|&(a, s)| a * s * s * (-s * s * x).exp()).sum::<f64>()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(a, s)| a * s.powi(4) * (-s * s * x).exp()).sum::<f64>()
    }
}

/// Cholesky-factored grid sampler on `[-half_width, half_width]^2`.
#[derive(Debug, Clone)]
pub struct LandscapeSampler {
    grid_n: usize,
    half_width: f64,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl LandscapeSampler {
    pub fn new(correlator: &CorrelatorSpec, half_width: f64, grid_n: usize) -> Result<Self> {
        correlator.validate()?;
        if !(3..=MAX_GRID).contains(&grid_n) {
            return Err(AtlasError::invalid(format!("grid side must be in 3..={MAX_GRID}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(AtlasError::invalid("box half-width must be positive"));
        }
        let pts = grid_points(grid_n, half_width);
        let np = pts.len();
        let n = LANDSCAPE_DIM as f64;
        let cov = DMatrix::from_fn(np, np, |i, j| {
            let d2 = (pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2);
            n * correlator.value(d2 / (2.0 * n))
        });
        // round-off makes smooth kernels numerically indefinite; add the
        // smallest diagonal jitter, starting at 1e-10, that lets Cholesky through
        let mut jitter = 0.0;
        loop {
            let mut k = cov.clone();
            for i in 0..np {
                k[(i, i)] += jitter;
            }
            if let Some(ch) = k.cholesky() {
                return Ok(LandscapeSampler { grid_n, half_width, factor: ch.unpack(), jitter });
            }
            jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
            if jitter > 1e-2 * cov[(0, 0)] {
                return Err(AtlasError::NonConvergence {
                    what: "covariance factorization".into(),
                    iterations: 0,
                    residual: jitter,
                    history: vec![],
                });
            }
        }
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    /// Diagonal jitter that was needed (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        grid_points(self.grid_n, self.half_width)
    }

    /// The field `V` at the grid points (row-major in `y`, then `x`).
    pub fn sample_field(&self, seed: u64) -> Vec<f64> {
        let np = self.factor.nrows();
        let mut rng = stream(seed, 0);
        let mut g = Gaussian::new();
        let z = nalgebra::DVector::from_fn(np, |_, _| g.sample(&mut rng));
        (&self.factor * z).iter().copied().collect()
    }

    /// `V + <x, D x> / 2`.
    pub fn landscape(&self, field: &[f64], d: &[[f64; 2]; 2]) -> Vec<f64> {
        self.points()
            .iter()
            .zip(field)
            .map(|(&(x, y), v)| v + 0.5 * (d[0][0] * x * x + 2.0 * d[0][1] * x * y + d[1][1] * y * y))
            .collect()
    }

    /// Strict interior local minima under 8-neighbour comparison.
    pub fn count_minima(&self, values: &[f64]) -> usize {
        let n = self.grid_n;
        let mut count = 0;
        for r in 1..n - 1 {
            for c in 1..n - 1 {
                let v = values[r * n + c];
                let is_min = (-1i64..=1).all(|dr| {
                    (-1i64..=1).all(|dc| {
                        (dr == 0 && dc == 0) || v < values[((r as i64 + dr) as usize) * n + (c as i64 + dc) as usize]
                    })
                });
                if is_min {
                    count += 1;
                }
            }
        }
        count
    }
}

fn grid_points(n: usize, half_width: f64) -> Vec<(f64, f64)> {
    let coord = |i: usize| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64;
    let mut pts = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            pts.push((coord(c), coord(r)));
        }
    }
    pts
}

fn check_confinement(d: &[[f64; 2]; 2]) -> Result<()> {
    let sym = (d[0][1] - d[1][0]).abs() <= 1e-12 * (d[0][1].abs() + 1.0);
    let psd = d[0][0] >= 0.0 && d[1][1] >= 0.0 && d[0][0] * d[1][1] - d[0][1] * d[1][0] >= -1e-12;
    if !sym || !psd {
        return Err(AtlasError::invalid("D must be symmetric positive semidefinite"));
    }
    Ok(())
}

/// Strict-minima count of one sampled landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimaCount {
    pub count: usize,
    /// Diagonal jitter used for the covariance factor.
    pub jitter: f64,
}

pub fn landscape_minima_count(
    correlator: &CorrelatorSpec,
    d: &[[f64; 2]; 2],
    half_width: f64,
    grid_n: usize,
    seed: u64,
) -> Result<MinimaCount> {
    check_confinement(d)?;
    let s = LandscapeSampler::new(correlator, half_width, grid_n)?;
    let v = s.landscape(&s.sample_field(seed), d);
    Ok(MinimaCount { count: s.count_minima(&v), jitter: s.jitter() })
}

/// Minima counts for a family of confinements `scale * D`, sharing the
/// sampled fields across scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeDemo {
    pub scales: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `counts[i][s]`: scale `i`, seed `s`.
    pub counts: Vec<Vec<usize>>,
    pub means: Vec<f64>,
    pub non_increasing: bool,
    pub jitter: f64,
}

pub fn landscape_demo(
    correlator: &CorrelatorSpec,
    d_base: &[[f64; 2]; 2],
    scales: &[f64],
    half_width: f64,
    grid_n: usize,
    seeds: &[u64],
) -> Result<LandscapeDemo> {
    check_confinement(d_base)?;
    if scales.iter().any(|s| !(*s >= 0.0)) {
        return Err(AtlasError::invalid("confinement scales must be nonnegative"));
    }
    let sampler = LandscapeSampler::new(correlator, half_width, grid_n)?;
    let fields: Vec<Vec<f64>> = seeds.par_iter().map(|&s| sampler.sample_field(s)).collect();
    let counts: Vec<Vec<usize>> = scales
        .iter()
        .map(|&k| {
            let d = [[k * d_base[0][0], k * d_base[0][1]], [k * d_base[1][0], k * d_base[1][1]]];
            fields.iter().map(|f| sampler.count_minima(&sampler.landscape(f, &d))).collect()
        })
        .collect();
    let means: Vec<f64> = counts
        .iter()
        .map(|c| c.iter().sum::<usize>() as f64 / c.len().max(1) as f64)
        .collect();
    let non_increasing = means.windows(2).all(|w| w[1] <= w[0]);
    Ok(LandscapeDemo {
        scales: scales.to_vec(),
        seeds: seeds.to_vec(),
        counts,
        means,
        non_increasing,
        jitter: sampler.jitter(),
    })
}
