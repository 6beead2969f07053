//! Extremal edges, interior gaps and edge-exponent fits.
//!
//! On the real line away from the support the subordination point `ω` is
//! real and `x = h(ω) = ω - t m_D(ω)`. The support ends where `h'(ω) = 0`,
//! i.e. `t int mu_D(dλ) / (λ - ω)^2 = 1`.

use serde::Serialize;

use super::FreeConvolution;
use crate::error::{AtlasError, Result};
use crate::measures::DiscreteMeasure;
use crate::numerics::{bisect, linear_fit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Location of an extremal edge and the subordination data there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeReport {
    pub edge: f64,
    /// Subordination point `edge + t m_t(edge)`.
    pub w: f64,
    pub m_edge: f64,
    /// Fitted decay exponent of the density at this edge, when resolvable.
    pub exponent_fit: Option<f64>,
    pub fit_window: Option<(f64, f64)>,
    /// Max residual of the two defining equations.
    pub residual: f64,
}

/// Least-squares fit of `log rho(edge ± s)` against `log s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub alpha: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// A gap `(lo, hi)` in the support with the subordination points at its ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Gap {
    pub lo: f64,
    pub hi: f64,
    pub w_lo: f64,
    pub w_hi: f64,
}

fn left_edge_raw(mu: &DiscreteMeasure, t: f64) -> Result<EdgeReport> {
    let a = mu.min_atom();
    // the left-hand side is at most 1/(4t) at a - 2 sqrt(t) and blows up at a
    let w = bisect(|w| mu.resolvent_moment(w, 2) - 1.0 / t, a - 2.0 * t.sqrt(), a)?;
    let m_edge = mu.resolvent_moment(w, 1);
    let edge = w - t * m_edge;
    let residual = (mu.resolvent_moment(w, 2) * t - 1.0).abs() / t;
    Ok(EdgeReport { edge, w, m_edge, exponent_fit: None, fit_window: None, residual })
}

/// Edge data without the exponent fit.
pub(crate) fn locate_edge(mu: &DiscreteMeasure, t: f64, side: Side) -> Result<EdgeReport> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(AtlasError::invalid(format!("variance t = {t} must be positive")));
    }
    match side {
        Side::Left => left_edge_raw(mu, t),
        Side::Right => {
            let r = left_edge_raw(&mu.reflected(), t)?;
            Ok(EdgeReport { edge: -r.edge, w: -r.w, m_edge: -r.m_edge, ..r })
        }
    }
}

fn report_with_fit(mu: &DiscreteMeasure, t: f64, side: Side) -> Result<EdgeReport> {
    let fc = FreeConvolution::new(mu, t)?;
    let mut report = locate_edge(mu, t, side)?;
    if let Ok(fit) = fit_exponent(&fc, side) {
        report.exponent_fit = Some(fit.alpha);
        report.fit_window = Some(fit.window);
    }
    Ok(report)
}

/// Left edge of `rho_sc(t) ⊞ mu`, with the density exponent fit when the
/// default grid resolves it.
pub fn left_edge(mu: &DiscreteMeasure, t: f64) -> Result<EdgeReport> {
    report_with_fit(mu, t, Side::Left)
}

/// Mirror of [`left_edge`].
pub fn right_edge(mu: &DiscreteMeasure, t: f64) -> Result<EdgeReport> {
    report_with_fit(mu, t, Side::Right)
}

/// Gaps between consecutive atoms. Between two atoms `g(ω) = t m_D'(ω)` is
/// convex and blows up at both ends; a gap opens iff its minimum is below 1.
pub(crate) fn locate_gaps(mu: &DiscreteMeasure, t: f64) -> Vec<Gap> {
    let atoms = mu.atoms();
    let g = |w: f64| t * mu.resolvent_moment(w, 2);
    let h = |w: f64| w - t * mu.resolvent_moment(w, 1);
    let mut gaps = Vec::new();
    let weights = mu.weights();
    for k in 0..atoms.len().saturating_sub(1) {
        let (a, b) = (atoms[k], atoms[k + 1]);
        let eps = (b - a) * 1e-9;
        let (lo, hi) = (a + eps, b - eps);
        // quick rejection: the two neighbouring atoms alone already give g >= 1
        let (wa, wb) = (weights[k], weights[k + 1]);
        // min over ω of wa/(ω-a)^2 + wb/(b-ω)^2 is (wa^{1/3} + wb^{1/3})^3 / (b-a)^2
        let floor = t * (wa.cbrt() + wb.cbrt()).powi(3) / (b - a).powi(2);
        if floor >= 1.0 {
            continue;
        }
        let Ok(w_star) = bisect(|w| mu.resolvent_moment(w, 3), lo, hi) else {
            continue;
        };
        if g(w_star) >= 1.0 {
            continue;
        }
        let (Ok(w_lo), Ok(w_hi)) = (
            bisect(|w| g(w) - 1.0, lo, w_star),
            bisect(|w| g(w) - 1.0, w_star, hi),
        ) else {
            continue;
        };
        gaps.push(Gap { lo: h(w_lo), hi: h(w_hi), w_lo, w_hi });
    }
    gaps
}

/// Fits the density decay exponent over distances `s ∈ [10 h, 0.05 W]`
/// from the edge, where `h` is the default-grid step and `W` the support
/// width. Needs at least eight points with positive density.
pub(crate) fn fit_exponent(fc: &FreeConvolution, side: Side) -> Result<ExponentFit> {
    let grid = fc.default_grid();
    let h = grid.step();
    let (l, r) = (fc.left_edge(), fc.right_edge());
    let width = r - l;
    let window = (10.0 * h, 0.05 * width);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..grid.n {
        let x = grid.node(i);
        let s = match side {
            Side::Left => x - l,
            Side::Right => r - x,
        };
        if s < window.0 || s > window.1 {
            continue;
        }
        let rho = fc.density_at(x)?;
        if rho > 0.0 {
            xs.push(s.ln());
            ys.push(rho.ln());
        }
    }
    if xs.len() < 8 {
        return Err(AtlasError::Resolution(format!(
            "edge-exponent window [{:.3e}, {:.3e}] holds only {} usable points",
            window.0,
            window.1,
            xs.len()
        )));
    }
    let (alpha, _) = linear_fit(&xs, &ys);
    Ok(ExponentFit { alpha, window, points: xs.len() })
}

/// Decay exponent of the density of `rho_sc(t) ⊞ mu` at an extremal edge.
pub fn edge_exponent(mu: &DiscreteMeasure, t: f64, side: Side) -> Result<ExponentFit> {
    fit_exponent(&FreeConvolution::new(mu, t)?, side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freeconv::{density, GridSpec};

    #[test]
    fn delta_edges() {
        for (mu, t) in [(0.0, 1.0), (2.5, 0.3), (-1.0, 4.0)] {
            let d = DiscreteMeasure::delta(mu).unwrap();
            let l = locate_edge(&d, t, Side::Left).unwrap();
            assert!((l.w - (mu - t.sqrt())).abs() < 1e-12);
            assert!((l.edge - (mu - 2.0 * t.sqrt())).abs() < 1e-12);
            assert!(l.residual < 1e-10);
            let r = locate_edge(&d, t, Side::Right).unwrap();
            assert!((r.edge - (mu + 2.0 * t.sqrt())).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_symmetry() {
        let mu = DiscreteMeasure::new(vec![0.3, 1.0, 2.2], vec![0.2, 0.5, 0.3]).unwrap();
        let r = locate_edge(&mu, 0.7, Side::Right).unwrap();
        let l = locate_edge(&mu.reflected(), 0.7, Side::Left).unwrap();
        assert_eq!(r.edge, -l.edge);
    }

    #[test]
    fn two_atom_edge_matches_density_support() {
        let mu = DiscreteMeasure::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let l = locate_edge(&mu, 0.25, Side::Left).unwrap();
        let grid = GridSpec::new(-0.5, 3.5, 4001).unwrap();
        let d = density(&mu, 0.25, grid).unwrap();
        let first = d.values().iter().position(|&v| v > 1e-4).unwrap();
        assert!((grid.node(first) - l.edge).abs() <= 2.0 * grid.step());
    }

    #[test]
    fn semicircle_exponent_is_one_half() {
        let fit = edge_exponent(&DiscreteMeasure::delta(0.0).unwrap(), 1.0, Side::Left).unwrap();
        assert!((0.45..=0.55).contains(&fit.alpha), "{fit:?}");
        let mu = DiscreteMeasure::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let fit = edge_exponent(&mu, 0.04, Side::Left).unwrap();
        assert!(fit.alpha >= 0.45, "{fit:?}");
    }

    #[test]
    fn report_carries_fit() {
        let rep = left_edge(&DiscreteMeasure::delta(0.0).unwrap(), 1.0).unwrap();
        assert!((rep.edge + 2.0).abs() < 1e-12);
        assert!(rep.exponent_fit.is_some());
        let rep = right_edge(&DiscreteMeasure::delta(0.0).unwrap(), 1.0).unwrap();
        assert!((rep.edge - 2.0).abs() < 1e-12);
    }
}
