//! Vector Matrix Dyson Equation of the elastic-manifold block model.
//!
//! For `u ∈ R^n`, `n = L^d`, with `a(u) = -t0 Δ + diag(u) + mu0`, the vector
//! `m(u, z)` is the solution with `Im m > 0` of
//!
//! `m = diag[(a(u) - J^2 diag(m) - z)^{-1}]`.
//!
//! `mu_inf(u)` is the measure whose Stieltjes transform is `mean(m)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{AtlasError, Result};
use crate::freeconv::{GridSpec, SolverConfig};
use crate::measures::{GriddedDensity, LatticeSpec};
use crate::montecarlo::rng::{stream, Gaussian};
use crate::numerics::golden_section_max;

/// Largest lattice the dense solver accepts.
pub const MAX_SITES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MdeModel {
    pub lattice: LatticeSpec,
    pub j: f64,
}

impl MdeModel {
    /// `j = 0` is allowed and gives the plain resolvent.
    pub fn new(lattice: LatticeSpec, j: f64) -> Result<Self> {
        lattice.validate()?;
        if !(j >= 0.0) || !j.is_finite() {
            return Err(AtlasError::invalid(format!("J = {j} must be finite and nonnegative")));
        }
        if lattice.sites() > MAX_SITES {
            return Err(AtlasError::invalid(format!(
                "{} sites exceed the dense-solver cap of {MAX_SITES}",
                lattice.sites()
            )));
        }
        Ok(MdeModel { lattice, j })
    }

    /// The model with noise `b = J^2`.
    pub fn from_b(lattice: LatticeSpec, b: f64) -> Result<Self> {
        Self::new(lattice, b.sqrt())
    }

    pub fn sites(&self) -> usize {
        self.lattice.sites()
    }

    /// Neighbours of site `i` along each axis, `(minus, plus)` per axis.
    fn neighbours(&self, i: usize) -> Vec<(usize, usize)> {
        let l = self.lattice.l;
        let mut out = Vec::with_capacity(self.lattice.d);
        let mut stride = 1;
        for _ in 0..self.lattice.d {
            let coord = (i / stride) % l;
            let base = i - coord * stride;
            let plus = base + ((coord + 1) % l) * stride;
            let minus = base + ((coord + l - 1) % l) * stride;
            out.push((minus, plus));
            stride *= l;
        }
        out
    }

    /// `-t0 Δ` on the periodic lattice.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.sites();
        let t0 = self.lattice.t0;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for (minus, plus) in self.neighbours(i) {
                a[(i, i)] += 2.0 * t0;
                a[(i, minus)] -= t0;
                a[(i, plus)] -= t0;
            }
        }
        a
    }

    /// `a(u) = -t0 Δ + diag(u) + mu0`.
    pub fn a_matrix(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check_u(u)?;
        let mut a = self.laplacian();
        for (i, ui) in u.iter().enumerate() {
            a[(i, i)] += ui + self.lattice.mu0;
        }
        Ok(a)
    }

    fn check_u(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.sites() {
            return Err(AtlasError::invalid(format!(
                "u has length {}, the lattice has {} sites",
                u.len(),
                self.sites()
            )));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(AtlasError::invalid("u has non-finite entries"));
        }
        Ok(())
    }

    /// Image of `u` under the lattice translation by `shift` (one entry per axis).
    pub fn translate(&self, u: &[f64], shift: &[usize]) -> Vec<f64> {
        let l = self.lattice.l;
        let n = self.sites();
        let mut out = vec![0.0; n];
        for (i, x) in u.iter().enumerate() {
            let mut j = 0;
            let mut stride = 1;
            for axis in 0..self.lattice.d {
                let coord = (i / stride) % l;
                let s = shift.get(axis).copied().unwrap_or(0);
                j += ((coord + s) % l) * stride;
                stride *= l;
            }
            out[j] = *x;
        }
        out
    }
}

struct Solver {
    a: DMatrix<f64>,
    j2: f64,
    config: SolverConfig,
}

type CVec = Vec<Complex64>;

impl Solver {
    fn new(model: &MdeModel, u: &[f64]) -> Result<Self> {
        Ok(Solver { a: model.a_matrix(u)?, j2: model.j * model.j, config: SolverConfig::default() })
    }

    fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `(a - J^2 diag(m) - z)^{-1}`.
    fn resolvent(&self, z: Complex64, m: &[Complex64]) -> Option<DMatrix<Complex64>> {
        let n = self.n();
        let mut h = self.a.map(|x| Complex64::new(x, 0.0));
        for i in 0..n {
            h[(i, i)] -= self.j2 * m[i] + z;
        }
        h.try_inverse()
    }

    /// Max-norm residual `|m - diag(M(m))|`.
    fn residual(&self, z: Complex64, m: &[Complex64]) -> f64 {
        match self.resolvent(z, m) {
            Some(g) => m.iter().enumerate().map(|(i, mi)| (mi - g[(i, i)]).norm()).fold(0.0, f64::max),
            None => f64::INFINITY,
        }
    }

    fn newton(&self, z: Complex64, m0: &[Complex64], require_upper: bool) -> Option<CVec> {
        let n = self.n();
        let mut m = m0.to_vec();
        for _ in 0..60 {
            let g = self.resolvent(z, &m)?;
            let f = DVector::from_iterator(n, (0..n).map(|i| m[i] - g[(i, i)]));
            let res = f.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if !res.is_finite() {
                return None;
            }
            if res < self.config.tolerance {
                return Some(m);
            }
            let jac = DMatrix::from_fn(n, n, |i, k| {
                let d = if i == k { 1.0 } else { 0.0 };
                d - self.j2 * g[(i, k)] * g[(i, k)]
            });
            let step = jac.lu().solve(&f)?;
            for i in 0..n {
                m[i] -= step[i];
            }
            if require_upper && m.iter().any(|x| x.im <= 0.0) {
                return None;
            }
        }
        (self.residual(z, &m) < self.config.tolerance).then_some(m)
    }

    fn damped(&self, z: Complex64, m0: &[Complex64]) -> Result<CVec> {
        let omega = self.config.damping;
        let mut m = m0.to_vec();
        let mut history = Vec::new();
        for k in 0..self.config.max_iterations / 100 {
            let g = self.resolvent(z, &m).ok_or_else(|| AtlasError::invalid("singular MDE resolvent"))?;
            let res = m.iter().enumerate().map(|(i, mi)| (mi - g[(i, i)]).norm()).fold(0.0, f64::max);
            if k % 16 == 0 {
                history.push(res);
            }
            if res < self.config.tolerance {
                return Ok(m);
            }
            for (i, mi) in m.iter_mut().enumerate() {
                *mi = (1.0 - omega) * *mi + omega * g[(i, i)];
            }
            if k % 32 == 31 {
                if let Some(p) = self.newton(z, &m, true) {
                    return Ok(p);
                }
            }
        }
        let residual = history.last().copied().unwrap_or(f64::INFINITY);
        Err(AtlasError::NonConvergence {
            what: format!("MDE fixed point at z = {z}"),
            iterations: self.config.max_iterations / 100,
            residual,
            history,
        })
    }

    fn continue_to(&self, z_prev: Complex64, m_prev: &[Complex64], z: Complex64, depth: u32) -> Result<CVec> {
        if let Some(m) = self.newton(z, m_prev, true) {
            return Ok(m);
        }
        if depth < 12 {
            let mid = Complex64::new(z.re, (z_prev.im * z.im).sqrt());
            let m_mid = self.continue_to(z_prev, m_prev, mid, depth + 1)?;
            return self.continue_to(mid, &m_mid, z, depth + 1);
        }
        self.damped(z, m_prev)
    }

    fn scale(&self) -> f64 {
        let norm = self.a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        1.0f64.max(norm + 4.0 * self.j2.sqrt())
    }

    fn solve(&self, z: Complex64) -> Result<CVec> {
        if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(AtlasError::invalid(format!("z = {z} is not in the upper half-plane")));
        }
        let top = z.im.max(4.0 * self.j2.sqrt()).max(1.0);
        let mut z_cur = Complex64::new(z.re, top);
        let start = vec![Complex64::new(0.0, 1.0) / top; self.n()];
        let mut m = self.damped(z_cur, &start)?;
        while z_cur.im > z.im {
            let next = (z_cur.im * self.config.ladder_ratio).max(z.im);
            let z_next = Complex64::new(z.re, next);
            m = self.continue_to(z_cur, &m, z_next, 0)?;
            z_cur = z_next;
        }
        let residual = self.residual(z, &m);
        if residual >= 1e-10 || m.iter().any(|x| x.im <= 0.0) {
            return Err(AtlasError::NonConvergence {
                what: format!("MDE solve at z = {z}"),
                iterations: 0,
                residual,
                history: vec![residual],
            });
        }
        Ok(m)
    }

    /// `m(E + i0)`: ladder to the floor, then Newton on the real axis; a
    /// real solution is accepted only on the stable branch, where
    /// `I - J^2 R` is positive definite. Richardson extrapolation of the
    /// two lowest rungs otherwise.
    fn boundary(&self, e: f64) -> Result<CVec> {
        let h = self.config.eta_floor * self.scale();
        let m_h = self.solve(Complex64::new(e, h))?;
        let real = Complex64::new(e, 0.0);
        if let Some(m) = self.newton(real, &m_h, false) {
            let max_im = m.iter().fold(0.0f64, |a, x| a.max(x.im));
            let min_im = m.iter().fold(f64::INFINITY, |a, x| a.min(x.im));
            let accept = if max_im <= 1e-12 {
                self.stable_real(real, &m)
            } else {
                min_im > -1e-14
            };
            if accept {
                return Ok(m.into_iter().map(|x| Complex64::new(x.re, x.im.max(0.0))).collect());
            }
        }
        let m_2h = self.solve(Complex64::new(e, 2.0 * h))?;
        Ok(m_h
            .iter()
            .zip(&m_2h)
            .map(|(a, b)| {
                let x = 2.0 * a - b;
                Complex64::new(x.re, x.im.max(0.0))
            })
            .collect())
    }

    fn stable_real(&self, z: Complex64, m: &[Complex64]) -> bool {
        let Some(g) = self.resolvent(z, m) else { return false };
        let n = self.n();
        let s = DMatrix::from_fn(n, n, |i, k| {
            let d = if i == k { 1.0 } else { 0.0 };
            d - self.j2 * (g[(i, k)] * g[(i, k)]).re
        });
        let s = (&s + s.transpose()) * 0.5;
        s.symmetric_eigenvalues().iter().all(|&x| x > 0.0)
    }
}

/// `m(u, z)` for `Im z > 0`; residual below 1e-10, `Im m > 0` componentwise.
pub fn solve_mde(model: &MdeModel, u: &[f64], z: Complex64) -> Result<Vec<Complex64>> {
    Solver::new(model, u)?.solve(z)
}

/// Boundary value `m(u, E + i0)` at real `E`.
pub fn solve_mde_boundary(model: &MdeModel, u: &[f64], e: f64) -> Result<Vec<Complex64>> {
    if model.j == 0.0 {
        return Err(AtlasError::invalid("boundary values need J > 0"));
    }
    Solver::new(model, u)?.boundary(e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdeSolution {
    pub u: Vec<f64>,
    pub z_grid: Vec<Complex64>,
    pub m: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
}

/// Solves at every point of `z_grid`.
pub fn solve_mde_grid(model: &MdeModel, u: &[f64], z_grid: &[Complex64]) -> Result<MdeSolution> {
    let solver = Solver::new(model, u)?;
    let m = z_grid
        .par_iter()
        .map(|&z| solver.solve(z))
        .collect::<Result<Vec<_>>>()?;
    let residuals = z_grid.iter().zip(&m).map(|(&z, mi)| solver.residual(z, mi)).collect();
    Ok(MdeSolution { u: u.to_vec(), z_grid: z_grid.to_vec(), m, residuals })
}

/// `[λ_min(a) - 2J, λ_max(a) + 2J]` plus 10% margins, 4096 nodes.
pub fn default_grid(model: &MdeModel, u: &[f64]) -> Result<GridSpec> {
    let ev = model.a_matrix(u)?.symmetric_eigenvalues();
    let lo = ev.min() - 2.0 * model.j;
    let hi = ev.max() + 2.0 * model.j;
    Ok(GridSpec::around(lo, hi, GridSpec::DEFAULT_NODES))
}

/// Density of `mu_inf(u)` on `grid` (the default grid when `None`).
pub fn mu_infinity(model: &MdeModel, u: &[f64], grid: Option<GridSpec>) -> Result<GriddedDensity> {
    if !(model.j > 0.0) {
        return Err(AtlasError::invalid("mu_inf has a density only for J > 0"));
    }
    let grid = match grid {
        Some(g) => g,
        None => default_grid(model, u)?,
    };
    grid.validate()?;
    let solver = Solver::new(model, u)?;
    let n = solver.n() as f64;
    let value = |x: f64| -> Result<f64> {
        let m = solver.boundary(x)?;
        let v = m.iter().map(|c| c.im).sum::<f64>() / (n * std::f64::consts::PI);
        Ok(if v < 1e-10 { 0.0 } else { v })
    };
    let values = (0..grid.n)
        .into_par_iter()
        .map(|i| value(grid.node(i)))
        .collect::<Result<Vec<f64>>>()?;
    let first = values.iter().position(|&v| v > 0.0);
    let last = values.iter().rposition(|&v| v > 0.0);
    let (Some(first), Some(last)) = (first, last) else {
        return Err(AtlasError::Resolution("density vanishes on the whole grid".into()));
    };
    if first == 0 || last == grid.n - 1 {
        return Err(AtlasError::Resolution("support reaches the end of the grid".into()));
    }
    // refine each edge between the last zero node and the first positive one
    let refine = |mut zero: f64, mut pos: f64| -> Result<f64> {
        for _ in 0..60 {
            let mid = 0.5 * (zero + pos);
            if value(mid)? > 0.0 {
                pos = mid;
            } else {
                zero = mid;
            }
        }
        Ok(0.5 * (zero + pos))
    };
    let left = refine(grid.node(first - 1), grid.node(first))?;
    let right = refine(grid.node(last + 1), grid.node(last))?;
    let d = GriddedDensity::new(grid.min, grid.max, values, left, right)?;
    d.check_mass(1e-3)?;
    let bound = n.sqrt() / (model.j * std::f64::consts::PI);
    if d.sup() > bound * (1.0 + 1e-3) {
        return Err(AtlasError::Resolution(format!(
            "density sup {} exceeds the bound {bound}",
            d.sup()
        )));
    }
    Ok(d)
}

/// `int log|λ| mu_inf(u, dλ)` through the determinant identity
/// `Re (1/n) log det(a(u) - J^2 diag(m)) + (J^2 / 2n) Re sum m_j^2`,
/// with `m = m(u, i0)`.
pub fn log_potential_at_zero(model: &MdeModel, u: &[f64]) -> Result<f64> {
    let solver = Solver::new(model, u)?;
    if model.j == 0.0 {
        let ev = solver.a.symmetric_eigenvalues();
        return Ok(ev.iter().map(|x| x.abs().ln()).sum::<f64>() / ev.len() as f64);
    }
    let m = solver.boundary(0.0)?;
    Ok(log_potential_from(&solver, &m))
}

fn log_potential_from(solver: &Solver, m: &[Complex64]) -> f64 {
    let n = solver.n();
    let mut h = solver.a.map(|x| Complex64::new(x, 0.0));
    for i in 0..n {
        h[(i, i)] -= solver.j2 * m[i];
    }
    let lu = h.lu();
    let log_abs_det: f64 = lu.u().diagonal().iter().map(|x| x.norm().ln()).sum();
    let sq: f64 = m.iter().map(|x| (x * x).re).sum();
    log_abs_det / n as f64 + solver.j2 * sq / (2.0 * n as f64)
}

/// `S[u] = int log|λ| mu_inf(u, dλ) - |u|^2 / (2 J^2 n)`.
pub fn surface_value(model: &MdeModel, u: &[f64]) -> Result<f64> {
    if !(model.j > 0.0) {
        return Err(AtlasError::invalid("S[u] needs J > 0"));
    }
    let n = model.sites() as f64;
    let norm2: f64 = u.iter().map(|x| x * x).sum();
    Ok(log_potential_at_zero(model, u)? - norm2 / (2.0 * model.j * model.j * n))
}

/// Gradient of `S`: `(Re m_k(u, i0) - u_k / J^2) / n`.
pub fn surface_gradient(model: &MdeModel, u: &[f64]) -> Result<Vec<f64>> {
    let solver = Solver::new(model, u)?;
    let m = solver.boundary(0.0)?;
    let n = model.sites() as f64;
    let j2 = model.j * model.j;
    Ok(m.iter().zip(u).map(|(mk, uk)| (mk.re - uk / j2) / n).collect())
}

/// Hessian of `S`: `-(1 / (J^2 n)) Re (I - J^2 R)^{-1}` with `R = M∘M` at `z = i0`.
pub fn surface_hessian(model: &MdeModel, u: &[f64]) -> Result<DMatrix<f64>> {
    let solver = Solver::new(model, u)?;
    let m = solver.boundary(0.0)?;
    let g = solver
        .resolvent(Complex64::new(0.0, 0.0), &m)
        .ok_or_else(|| AtlasError::invalid("singular resolvent at z = 0"))?;
    let n = solver.n();
    let j2 = solver.j2;
    let s = DMatrix::from_fn(n, n, |i, k| {
        let d = if i == k { 1.0 } else { 0.0 };
        Complex64::new(d, 0.0) - j2 * g[(i, k)] * g[(i, k)]
    });
    let inv = s
        .try_inverse()
        .ok_or_else(|| AtlasError::invalid("stability operator is singular"))?;
    Ok(inv.map(|x| -x.re / (j2 * n as f64)))
}

/// Outcome of [`stability_form_min`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Minimum of `Re <v, (I - J^2 R) v>` over the sampled unit vectors.
    pub min: f64,
    /// `2 J^2 (min_j Im M_jj)^2`, a lower bound for the form on unit vectors.
    pub lower_bound: f64,
}

/// Samples `Re <v, (I - J^2 R(u, z)) v>` over `trials` vectors drawn
/// uniformly from the complex unit sphere.
pub fn stability_form_min(
    model: &MdeModel,
    u: &[f64],
    z: Complex64,
    trials: usize,
    seed: u64,
) -> Result<StabilityReport> {
    let solver = Solver::new(model, u)?;
    let m = solver.solve(z)?;
    let g = solver
        .resolvent(z, &m)
        .ok_or_else(|| AtlasError::invalid("singular resolvent"))?;
    let n = solver.n();
    let j2 = solver.j2;
    let op = DMatrix::from_fn(n, n, |i, k| {
        let d = if i == k { 1.0 } else { 0.0 };
        Complex64::new(d, 0.0) - j2 * g[(i, k)] * g[(i, k)]
    });
    let mut rng = stream(seed, 0);
    let mut gauss = Gaussian::new();
    let mut min = f64::INFINITY;
    for _ in 0..trials.max(1) {
        let mut v = DVector::from_fn(n, |_, _| Complex64::new(gauss.sample(&mut rng), gauss.sample(&mut rng)));
        let norm = v.norm();
        v /= Complex64::new(norm, 0.0);
        let form = v.dotc(&(&op * &v)).re;
        min = min.min(form);
    }
    let min_im = (0..n).map(|i| g[(i, i)].im).fold(f64::INFINITY, f64::min);
    Ok(StabilityReport { min, lower_bound: 2.0 * j2 * min_im * min_im })
}

/// Outcome of [`diagonal_maximizer_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalCheck {
    pub best_u: Vec<f64>,
    pub best_value: f64,
    /// `max_i |u_i - mean(u)|` of the best maximizer.
    pub max_offdiagonal_spread: f64,
    /// Largest distance between maximizers found from different starts.
    pub start_disagreement: f64,
}

/// Maximizes `S` by cyclic coordinate golden-section ascent from `starts`
/// points drawn uniformly in `[-2J, 2J]^n` and reports how far the best
/// maximizer is from the diagonal.
pub fn diagonal_maximizer_check(model: &MdeModel, starts: usize, seed: u64) -> Result<DiagonalCheck> {
    let n = model.sites();
    if n > 8 {
        return Err(AtlasError::invalid("the maximizer check is meant for at most 8 sites"));
    }
    if !(model.j > 0.0) {
        return Err(AtlasError::invalid("S[u] needs J > 0"));
    }
    let radius = 2.0 * model.j;
    // S decays like -|u|^2 / (2 J^2 n); the maximizer sits well inside this box
    let bound = 4.0 * model.j + 4.0 * model.j * model.j + model.lattice.mu0 + 4.0 * model.lattice.t0 * model.lattice.d as f64;
    let mut results = Vec::with_capacity(starts);
    for s in 0..starts.max(1) {
        let mut rng = stream(seed, s as u64);
        let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..radius)).collect();
        let mut value = surface_value(model, &u)?;
        let mut sweeps = 0;
        loop {
            let mut moved = 0.0f64;
            for k in 0..n {
                let center = u[k];
                let f = |x: f64| {
                    let mut v = u.clone();
                    v[k] = x;
                    surface_value(model, &v)
                };
                let (x, fx) = golden_section_max(f, center - bound, center + bound, 1e-10)?;
                if fx >= value {
                    moved = moved.max((x - u[k]).abs());
                    u[k] = x;
                    value = fx;
                }
            }
            sweeps += 1;
            if moved < 1e-9 {
                break;
            }
            if sweeps > 500 {
                return Err(AtlasError::NonConvergence {
                    what: format!("coordinate ascent stalled at u = {u:?}"),
                    iterations: sweeps,
                    residual: moved,
                    history: vec![value],
                });
            }
        }
        results.push((u, value));
    }
    let (best_u, best_value) = results
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .expect("at least one start");
    let mean = best_u.iter().sum::<f64>() / n as f64;
    let spread = best_u.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    let disagreement = results
        .iter()
        .map(|(u, _)| u.iter().zip(&best_u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    Ok(DiagonalCheck { best_u, best_value, max_offdiagonal_spread: spread, start_disagreement: disagreement })
}
