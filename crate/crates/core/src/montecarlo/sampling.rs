//! Block random matrices `H_N(u) = a(u) ⊗ I_N + ⊕_i X_i` and soft-spin
//! Hessians `sqrt(t) GOE + u + D_N`.
//!
//! GOE blocks have `E[X_jk^2] = J^2 (1 + δ_jk) / N`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{stream, Gaussian};
use crate::error::{AtlasError, Result};
use crate::mde::{log_potential_at_zero, mu_infinity, MdeModel};
use crate::measures::{wasserstein1, DiscreteMeasure, GriddedDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Block size `N`.
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(n: usize, samples: usize, seed: u64) -> Result<Self> {
        let cfg = SamplerConfig { n, samples, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(AtlasError::invalid("block size N must be at least 2"));
        }
        if self.samples < 1 {
            return Err(AtlasError::invalid("need at least one sample"));
        }
        Ok(())
    }
}

/// Adds `scale` times a GOE matrix (off-diagonal variance `1/N`, diagonal
/// variance `2/N`) to the `n x n` block of `h` starting at `offset`.
fn add_goe<R: Rng>(h: &mut DMatrix<f64>, offset: usize, n: usize, scale: f64, rng: &mut R, g: &mut Gaussian) {
    let sd = scale / (n as f64).sqrt();
    for i in 0..n {
        h[(offset + i, offset + i)] += sd * std::f64::consts::SQRT_2 * g.sample(rng);
        for k in (i + 1)..n {
            let x = sd * g.sample(rng);
            h[(offset + i, offset + k)] += x;
            h[(offset + k, offset + i)] += x;
        }
    }
}

/// Job `index` of the run: one draw of `H_N(u)`, sites-major ordering
/// (row `i N + k` is copy `k` of site `i`).
pub fn sample_block_matrix(model: &MdeModel, u: &[f64], cfg: &SamplerConfig, index: u64) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let a = model.a_matrix(u)?;
    let sites = model.sites();
    let n = cfg.n;
    let mut h = DMatrix::zeros(sites * n, sites * n);
    for i in 0..sites {
        for j in 0..sites {
            let aij = a[(i, j)];
            if aij != 0.0 {
                for k in 0..n {
                    h[(i * n + k, j * n + k)] = aij;
                }
            }
        }
    }
    if model.j > 0.0 {
        let mut rng = stream(cfg.seed, index);
        let mut g = Gaussian::new();
        for i in 0..sites {
            add_goe(&mut h, i * n, n, model.j, &mut rng, &mut g);
        }
    }
    Ok(h)
}

fn sorted_eigenvalues(h: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Sorted eigenvalues of job `index`.
pub fn sample_block_eigenvalues(model: &MdeModel, u: &[f64], cfg: &SamplerConfig, index: u64) -> Result<Vec<f64>> {
    Ok(sorted_eigenvalues(sample_block_matrix(model, u, cfg, index)?))
}

/// Empirical spectral distribution of one draw (job 0) of `H_N(u)`.
pub fn sample_block_spectrum(model: &MdeModel, u: &[f64], cfg: &SamplerConfig) -> Result<DiscreteMeasure> {
    DiscreteMeasure::uniform(sample_block_eigenvalues(model, u, cfg, 0)?)
}

/// Eigenvalues of jobs `0..samples`, in job order. A draw with an exactly
/// zero eigenvalue is redrawn from a fresh stream; the count of redraws is
/// returned alongside.
pub fn block_spectra(model: &MdeModel, u: &[f64], cfg: &SamplerConfig) -> Result<(Vec<Vec<f64>>, usize)> {
    cfg.validate()?;
    let out = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|s| -> Result<(Vec<f64>, usize)> {
            let mut attempt = 0u64;
            loop {
                let ev = sample_block_eigenvalues(model, u, cfg, s | (attempt << 40))?;
                if model.j == 0.0 || ev.iter().all(|&x| x != 0.0) || attempt >= 16 {
                    return Ok((ev, attempt as usize));
                }
                attempt += 1;
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let resampled = out.iter().map(|(_, r)| r).sum();
    Ok((out.into_iter().map(|(e, _)| e).collect(), resampled))
}

/// `(1 / (N n)) log|det H|`, accumulated in log space.
fn log_abs_det_rate(ev: &[f64]) -> f64 {
    ev.iter().map(|x| x.abs().ln()).sum::<f64>() / ev.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogdetReport {
    /// Sample mean of `(1 / (N n)) log|det H_N(u)|`.
    pub rate: f64,
    /// `int log|λ| mu_inf(u, dλ)`.
    pub theory: f64,
    pub gap: f64,
    pub resampled: usize,
    /// Fraction of samples with a positive smallest eigenvalue.
    pub positive_fraction: f64,
    /// Mean rate over the positive-definite samples (NaN if there are none).
    pub restricted_rate: f64,
    pub per_sample: Vec<f64>,
}

fn logdet_from(spectra: &[Vec<f64>], resampled: usize, theory: f64) -> LogdetReport {
    let per_sample: Vec<f64> = spectra.iter().map(|ev| log_abs_det_rate(ev)).collect();
    let rate = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    let positive: Vec<f64> = spectra
        .iter()
        .zip(&per_sample)
        .filter(|(ev, _)| ev[0] > 0.0)
        .map(|(_, r)| *r)
        .collect();
    let restricted_rate = if positive.is_empty() {
        f64::NAN
    } else {
        positive.iter().sum::<f64>() / positive.len() as f64
    };
    LogdetReport {
        rate,
        theory,
        gap: (rate - theory).abs(),
        resampled,
        positive_fraction: positive.len() as f64 / spectra.len() as f64,
        restricted_rate,
        per_sample,
    }
}

/// Exponential-scale determinant rate against its deterministic limit.
pub fn logdet_rate(model: &MdeModel, u: &[f64], cfg: &SamplerConfig) -> Result<LogdetReport> {
    if cfg.samples < 20 {
        return Err(AtlasError::invalid("the determinant rate needs at least 20 samples"));
    }
    let (spectra, resampled) = block_spectra(model, u, cfg)?;
    Ok(logdet_from(&spectra, resampled, log_potential_at_zero(model, u)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierReport {
    /// `max_s (λ_max - r(mu_inf))`.
    pub max_exceed_right: f64,
    /// `max_s (ℓ(mu_inf) - λ_min)`.
    pub max_exceed_left: f64,
    pub per_sample_right: Vec<f64>,
    pub per_sample_left: Vec<f64>,
    pub left_edge: f64,
    pub right_edge: f64,
}

fn support_edges(model: &MdeModel, u: &[f64], density: Option<&GriddedDensity>) -> Result<(f64, f64)> {
    if model.j == 0.0 {
        let ev = model.a_matrix(u)?.symmetric_eigenvalues();
        return Ok((ev.min(), ev.max()));
    }
    match density {
        Some(d) => Ok((d.left_edge(), d.right_edge())),
        None => {
            let d = mu_infinity(model, u, None)?;
            Ok((d.left_edge(), d.right_edge()))
        }
    }
}

fn outliers_from(spectra: &[Vec<f64>], left: f64, right: f64) -> OutlierReport {
    let per_sample_right: Vec<f64> = spectra.iter().map(|ev| ev[ev.len() - 1] - right).collect();
    let per_sample_left: Vec<f64> = spectra.iter().map(|ev| left - ev[0]).collect();
    OutlierReport {
        max_exceed_right: per_sample_right.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_exceed_left: per_sample_left.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        per_sample_right,
        per_sample_left,
        left_edge: left,
        right_edge: right,
    }
}

/// How far the extreme eigenvalues stick out of the support of `mu_inf(u)`.
pub fn outlier_check(model: &MdeModel, u: &[f64], cfg: &SamplerConfig) -> Result<OutlierReport> {
    let (spectra, _) = block_spectra(model, u, cfg)?;
    let (l, r) = support_edges(model, u, None)?;
    Ok(outliers_from(&spectra, l, r))
}

/// All three block-model checks from one set of samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockValidation {
    pub w1_max: f64,
    pub w1_mean: f64,
    pub w1_per_sample: Vec<f64>,
    pub logdet: LogdetReport,
    pub outliers: OutlierReport,
}

/// W1 distances to `mu_inf(u)`, determinant rate and exceedances. Needs `J > 0`.
pub fn validate_block_model(model: &MdeModel, u: &[f64], cfg: &SamplerConfig) -> Result<BlockValidation> {
    let density = mu_infinity(model, u, None)?;
    let (spectra, resampled) = block_spectra(model, u, cfg)?;
    let w1: Vec<f64> = spectra
        .iter()
        .map(|ev| DiscreteMeasure::uniform(ev.clone()).map(|esd| wasserstein1(&esd, &density)))
        .collect::<Result<_>>()?;
    let logdet = logdet_from(&spectra, resampled, log_potential_at_zero(model, u)?);
    let (l, r) = support_edges(model, u, Some(&density))?;
    Ok(BlockValidation {
        w1_max: w1.iter().copied().fold(0.0, f64::max),
        w1_mean: w1.iter().sum::<f64>() / w1.len() as f64,
        w1_per_sample: w1,
        logdet,
        outliers: outliers_from(&spectra, l, r),
    })
}

/// Diagonal part `D_N` of a soft-spin Hessian.
#[derive(Debug, Clone, PartialEq)]
pub enum DiagonalSpec {
    /// The `N` diagonal entries.
    Explicit(Vec<f64>),
    /// Entries drawn i.i.d. from the measure.
    Sampled(DiscreteMeasure),
}

/// ESD of `sqrt(t) GOE + u I + D_N` for one draw (job 0).
pub fn sample_softspin_hessian(diag: &DiagonalSpec, t: f64, u: f64, cfg: &SamplerConfig) -> Result<DiscreteMeasure> {
    cfg.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(AtlasError::invalid(format!("t = {t} must be nonnegative")));
    }
    let n = cfg.n;
    let mut rng = stream(cfg.seed, 0);
    let d: Vec<f64> = match diag {
        DiagonalSpec::Explicit(v) => {
            if v.len() != n {
                return Err(AtlasError::invalid(format!("{} diagonal entries for N = {n}", v.len())));
            }
            v.clone()
        }
        DiagonalSpec::Sampled(mu) => {
            let cdf: Vec<f64> = mu
                .weights()
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect();
            (0..n)
                .map(|_| {
                    let x: f64 = rng.random();
                    let k = cdf.partition_point(|&c| c <= x).min(mu.len() - 1);
                    mu.atoms()[k]
                })
                .collect()
        }
    };
    if t == 0.0 {
        // already diagonal; skip the eigensolver and its round-off
        return DiscreteMeasure::uniform(d.iter().map(|di| di + u).collect());
    }
    let mut h = DMatrix::zeros(n, n);
    for (i, di) in d.iter().enumerate() {
        h[(i, i)] = di + u;
    }
    add_goe(&mut h, 0, n, t.sqrt(), &mut rng, &mut Gaussian::new());
    DiscreteMeasure::uniform(sorted_eigenvalues(h))
}
