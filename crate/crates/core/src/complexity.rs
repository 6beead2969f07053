//! Annealed complexity of soft spins in an anisotropic well and of the
//! elastic manifold.
//!
//! With `F(u, t) = -int log λ mu_D(dλ) + Φ_t(u) - u^2 / (2t)` and
//! `Φ_t` the log potential of `rho_sc(t) ⊞ mu_D`,
//!
//! * `Σ^tot = sup_u F(u, t)`,
//! * `Σ^min = sup_{u <= ℓ_t} F(u, t)`.
//!
//! The elastic manifold is the special case `mu_D = spectrum(mu0 - t0 Δ)`,
//! `t = b`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AtlasError, Result};
use crate::freeconv::FreeConvolution;
use crate::measures::{laplacian_spectrum, log_moment, power_moment, DiscreteMeasure, LatticeSpec};
use crate::numerics::{bisect, golden_section_max, linear_fit};

/// Values with `|Σ|` below this are reported as zero (simple phase).
pub const PHASE_TOLERANCE: f64 = 1e-8;

/// Tolerance in `u` of the golden-section search.
pub const OPTIMIZER_TOLERANCE: f64 = 1e-9;

/// Largest allowed gap between the closed-form and variational values.
pub const PATH_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftSpinModel {
    mu_d: DiscreteMeasure,
    t: f64,
}

impl SoftSpinModel {
    pub fn new(mu_d: DiscreteMeasure, t: f64) -> Result<Self> {
        if mu_d.min_atom() <= 0.0 {
            return Err(AtlasError::invalid(format!(
                "confinement spectrum must be positive, smallest atom is {}",
                mu_d.min_atom()
            )));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(AtlasError::invalid(format!("t = {t} must be positive")));
        }
        Ok(SoftSpinModel { mu_d, t })
    }

    pub fn mu_d(&self) -> &DiscreteMeasure {
        &self.mu_d
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticManifoldModel {
    pub lattice: LatticeSpec,
    pub b: f64,
}

impl ElasticManifoldModel {
    pub fn new(lattice: LatticeSpec, b: f64) -> Result<Self> {
        lattice.validate()?;
        if !(b > 0.0) || !b.is_finite() {
            return Err(AtlasError::invalid(format!("b = {b} must be positive")));
        }
        Ok(ElasticManifoldModel { lattice, b })
    }

    /// The equivalent soft-spin model: `mu_D = spectrum(mu0 - t0 Δ)`, `t = b`.
    pub fn soft_spins(&self) -> Result<SoftSpinModel> {
        SoftSpinModel::new(laplacian_spectrum(&self.lattice, true)?, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Simple,
    Glassy,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Simple => "simple",
            Phase::Glassy => "glassy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Variational,
}

/// Supercritical auxiliary data: `c`, the optimizer `v` and `y_t = sqrt(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aux {
    pub c: f64,
    pub v: f64,
    pub y_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityResult {
    pub sigma_tot: f64,
    pub sigma_min: f64,
    pub u_star_tot: f64,
    pub u_star_min: f64,
    pub phase: Phase,
    /// `t_c` for soft spins, the Larkin mass for the elastic manifold.
    pub threshold: f64,
    pub aux: Option<Aux>,
}

/// `t_c = (int λ^{-2} mu_D)^{-1}`.
pub fn t_critical(mu: &DiscreteMeasure) -> Result<f64> {
    Ok(1.0 / power_moment(mu, -2)?)
}

/// Larkin mass: the `mu > 0` with `int spectrum(-t0 Δ)(dλ) / (mu + λ)^2 = 1/b`.
/// `mu0` of the lattice is ignored.
pub fn larkin_mass(lattice: &LatticeSpec, b: f64) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(AtlasError::invalid(format!("b = {b} must be positive")));
    }
    let spec = laplacian_spectrum(lattice, false)?;
    let f = |mu: f64| spec.resolvent_moment(-mu, 2) - 1.0 / b;
    // the zero mode alone gives (L^d mu^2)^{-1}; every term is below mu^{-2}
    let lo = 0.5 * (b / lattice.sites() as f64).sqrt();
    let mu_c = bisect(f, lo, b.sqrt())?;
    let residual = f(mu_c).abs() * b;
    if residual > 1e-12 {
        return Err(AtlasError::NonConvergence {
            what: "Larkin mass bisection".into(),
            iterations: 0,
            residual,
            history: vec![residual],
        });
    }
    Ok(mu_c)
}

/// Critical noise `b_c = (int spectrum(-t0 Δ)(dλ) / (mu0 + λ)^2)^{-1}`.
pub fn b_critical(lattice: &LatticeSpec) -> Result<f64> {
    if !(lattice.mu0 > 0.0) {
        return Err(AtlasError::invalid("b_c needs mu0 > 0"));
    }
    t_critical(&laplacian_spectrum(lattice, true)?)
}

/// Solves `1/t = int mu_D(dλ) / (λ^2 + t^2 c)` for `c > 0` and sets
/// `v = -t int λ mu_D(dλ) / (λ^2 + t^2 c)`.
pub fn c_and_v(mu: &DiscreteMeasure, t: f64) -> Result<Aux> {
    let t_c = t_critical(mu)?;
    if !(t > t_c) {
        return Err(AtlasError::invalid(format!(
            "c and v exist only above t_c = {t_c}, got t = {t}"
        )));
    }
    let f = |c: f64| mu.iter().map(|(a, w)| w / (a * a + t * t * c)).sum::<f64>() - 1.0 / t;
    let c = bisect(f, 0.0, 1.0 / t)?;
    let v = -t * mu.iter().map(|(a, w)| w * a / (a * a + t * t * c)).sum::<f64>();
    Ok(Aux { c, v, y_t: c.sqrt() })
}

/// `F(u, t)` for a model whose free convolution is already built.
pub fn objective(fc: &FreeConvolution, log_moment: f64, u: f64) -> Result<f64> {
    let t = fc.variance();
    Ok(-log_moment + fc.log_potential(u)? - u * u / (2.0 * t))
}

/// `F(u, t)` from scratch.
pub fn objective_at(model: &SoftSpinModel, u: f64) -> Result<f64> {
    let fc = FreeConvolution::new(&model.mu_d, model.t)?;
    objective(&fc, log_moment(&model.mu_d)?, u)
}

/// `u_t = -t int λ^{-1} mu_D`, the optimizer in the simple phase.
pub fn simple_phase_optimizer(model: &SoftSpinModel) -> f64 {
    -model.t * model.mu_d.resolvent_moment(0.0, 1)
}

struct Raw {
    tot: f64,
    min: f64,
    u_tot: f64,
    u_min: f64,
    aux: Option<Aux>,
}

fn closed_form_raw(model: &SoftSpinModel, fc: &FreeConvolution, lm: f64) -> Result<Raw> {
    let t = model.t;
    let t_c = t_critical(&model.mu_d)?;
    if t <= t_c {
        let u_t = simple_phase_optimizer(model);
        return Ok(Raw { tot: 0.0, min: 0.0, u_tot: u_t, u_min: u_t, aux: None });
    }
    let aux = c_and_v(&model.mu_d, t)?;
    // at v the boundary value is m = -v/t + i sqrt(c), so ω = i t sqrt(c)
    let m_v = Complex64::new(-aux.v / t, aux.y_t);
    let tot = -lm + fc.log_potential_from(aux.v, m_v) - aux.v * aux.v / (2.0 * t);
    let l = fc.left_edge();
    let m_l = Complex64::new(fc.edges().m_at_left_edge, 0.0);
    let min = -lm + fc.log_potential_from(l, m_l) - l * l / (2.0 * t);
    Ok(Raw { tot, min, u_tot: aux.v, u_min: l, aux: Some(aux) })
}

fn variational_raw(model: &SoftSpinModel, fc: &FreeConvolution, lm: f64) -> Result<Raw> {
    let t = model.t;
    let (l, r) = (fc.left_edge(), fc.right_edge());
    let diam = r - l + 2.0 * t.sqrt();
    let u_t = simple_phase_optimizer(model);
    let lo = (l - 4.0 * diam).min(u_t - diam);
    let f = |u: f64| objective(fc, lm, u);
    let (u_tot, tot) = golden_section_max(f, lo, r, OPTIMIZER_TOLERANCE)?;
    let (u_min, min) = golden_section_max(f, lo, l, OPTIMIZER_TOLERANCE)?;
    let aux = if t > t_critical(&model.mu_d)? { Some(c_and_v(&model.mu_d, t)?) } else { None };
    Ok(Raw { tot, min, u_tot, u_min, aux })
}

fn finish(raw: Raw, threshold: f64) -> ComplexityResult {
    let snap = |x: f64| if x.abs() < PHASE_TOLERANCE { 0.0 } else { x };
    let (sigma_tot, sigma_min) = (snap(raw.tot), snap(raw.min));
    let phase = if sigma_tot == 0.0 { Phase::Simple } else { Phase::Glassy };
    ComplexityResult {
        sigma_tot,
        sigma_min,
        u_star_tot: raw.u_tot,
        u_star_min: raw.u_min,
        phase,
        threshold,
        aux: if phase == Phase::Glassy { raw.aux } else { None },
    }
}

/// `Σ^tot` and `Σ^min` of a soft-spin model.
pub fn sigma_soft_spins(model: &SoftSpinModel, method: Method) -> Result<ComplexityResult> {
    let fc = FreeConvolution::new(&model.mu_d, model.t)?;
    let lm = log_moment(&model.mu_d)?;
    let raw = match method {
        Method::ClosedForm => closed_form_raw(model, &fc, lm)?,
        Method::Variational => variational_raw(model, &fc, lm)?,
    };
    Ok(finish(raw, t_critical(&model.mu_d)?))
}

/// Runs both paths; fails with [`AtlasError::PathDisagreement`] when they
/// differ by more than [`PATH_TOLERANCE`]. Returns the closed-form result.
pub fn cross_check(model: &SoftSpinModel) -> Result<(ComplexityResult, ComplexityResult)> {
    let a = sigma_soft_spins(model, Method::ClosedForm)?;
    let b = sigma_soft_spins(model, Method::Variational)?;
    let tot = (a.sigma_tot - b.sigma_tot).abs();
    let min = (a.sigma_min - b.sigma_min).abs();
    if tot > PATH_TOLERANCE || min > PATH_TOLERANCE {
        return Err(AtlasError::PathDisagreement { tot, min });
    }
    Ok((a, b))
}

/// `Σ` and `Σ_st` of the elastic manifold; `threshold` is the Larkin mass.
pub fn sigma_elastic(model: &ElasticManifoldModel, method: Method) -> Result<ComplexityResult> {
    let mut result = sigma_soft_spins(&model.soft_spins()?, method)?;
    result.threshold = larkin_mass(&model.lattice, model.b)?;
    Ok(result)
}

/// Locates by bisection the `mu0` in `[lo, hi]` where the elastic-manifold
/// complexity switches from positive (small mass) to zero.
pub fn mass_transition(lattice: &LatticeSpec, b: f64, lo: f64, hi: f64) -> Result<f64> {
    let glassy = |mu0: f64| -> Result<bool> {
        let model = ElasticManifoldModel::new(lattice.with_mu0(mu0), b)?;
        Ok(sigma_elastic(&model, Method::ClosedForm)?.phase == Phase::Glassy)
    };
    if !glassy(lo)? || glassy(hi)? {
        return Err(AtlasError::BracketFailure(format!(
            "no phase change for mu0 in [{lo}, {hi}]"
        )));
    }
    let (mut a, mut z) = (lo, hi);
    while z - a > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (a + z);
        if glassy(mid)? {
            a = mid;
        } else {
            z = mid;
        }
    }
    Ok(0.5 * (a + z))
}

/// Constants of the near-critical expansion
/// `Σ^tot ~ c_tot (t - t_c)^2`, `Σ^min ~ c_min (t - t_c)^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NearCriticalConstants {
    pub c_tot: f64,
    pub c_min: f64,
}

pub fn near_critical_constants(mu: &DiscreteMeasure) -> Result<NearCriticalConstants> {
    let m2 = power_moment(mu, -2)?;
    let m3 = power_moment(mu, -3)?;
    let m4 = power_moment(mu, -4)?;
    Ok(NearCriticalConstants {
        c_tot: m2.powi(4) / (4.0 * m4),
        c_min: m2.powi(6) / (24.0 * m3 * m3),
    })
}

/// Power-law fit of `Σ` just above `t_c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearCriticalFit {
    pub t_c: f64,
    pub epsilons: Vec<f64>,
    pub sigma_tot: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub exponent_tot: f64,
    pub prefactor_tot: f64,
    pub exponent_min: f64,
    pub prefactor_min: f64,
}

pub const DEFAULT_EPSILONS: [f64; 4] = [0.02, 0.04, 0.08, 0.16];

/// Fits `log Σ` against `log(t - t_c)` at `t = t_c (1 + ε)`. The exponent is
/// the free slope. The prefactor is read off after dividing by the nearest
/// integer power and extrapolating the remaining linear trend to `t = t_c`,
/// which removes the first correction term from the estimate.
pub fn near_critical_fit(mu: &DiscreteMeasure, epsilons: &[f64]) -> Result<NearCriticalFit> {
    if epsilons.len() < 2 || epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(AtlasError::invalid("need at least two positive epsilons"));
    }
    let t_c = t_critical(mu)?;
    let lm = log_moment(mu)?;
    let mut tot = Vec::with_capacity(epsilons.len());
    let mut min = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let t = t_c * (1.0 + eps);
        let model = SoftSpinModel::new(mu.clone(), t)?;
        let fc = FreeConvolution::new(mu, t)?;
        let raw = closed_form_raw(&model, &fc, lm)?;
        if !(raw.tot > 0.0) || !(raw.min > 0.0) {
            return Err(AtlasError::Resolution(format!(
                "non-positive complexity ({}, {}) at t = {t} in the supercritical window",
                raw.tot, raw.min
            )));
        }
        tot.push(raw.tot);
        min.push(raw.min);
    }
    let dts: Vec<f64> = epsilons.iter().map(|e| t_c * e).collect();
    let log_dt: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let fit = |sig: &[f64]| -> (f64, f64) {
        let log_s: Vec<f64> = sig.iter().map(|s| s.ln()).collect();
        let (slope, _) = linear_fit(&log_dt, &log_s);
        let k = slope.round();
        let reduced: Vec<f64> = sig.iter().zip(&dts).map(|(s, d)| (s / d.powf(k)).ln()).collect();
        let (_, intercept) = linear_fit(&dts, &reduced);
        (slope, intercept.exp())
    };
    let (exponent_tot, prefactor_tot) = fit(&tot);
    let (exponent_min, prefactor_min) = fit(&min);
    Ok(NearCriticalFit {
        t_c,
        epsilons: epsilons.to_vec(),
        sigma_tot: tot,
        sigma_min: min,
        exponent_tot,
        prefactor_tot,
        exponent_min,
        prefactor_min,
    })
}
