//! Compactly supported probability measures on the real line.
//!
//! Two representations cover everything the toolkit needs: atomic measures
//! ([`DiscreteMeasure`]) for spectra and signal measures, and densities
//! sampled on a uniform grid ([`GriddedDensity`]) for free convolutions and
//! Dyson-equation outputs. Both are immutable; transforms return new values.

use serde::{Deserialize, Serialize};

use crate::error::{AtlasError, Result};

/// Relative tolerance (w.r.t. the largest |atom|) under which atoms merge.
pub const MERGE_TOLERANCE: f64 = 1e-9;

/// Number of equal-mass atoms used to discretize a semicircle input.
pub const SEMICIRCLE_ATOMS: usize = 512;

/// An atomic probability measure with sorted, distinct atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from atoms and weights. Atoms are sorted, atoms closer
    /// than [`MERGE_TOLERANCE`] (relative) are merged, and zero-weight atoms
    /// are dropped. Weights must be nonnegative and sum to one within 1e-12.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(AtlasError::invalid(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(AtlasError::invalid("measure has no atoms"));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(AtlasError::invalid("non-finite atom"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(AtlasError::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(AtlasError::invalid(format!(
                "weights sum to {total}, expected 1"
            )));
        }

        let mut pairs: Vec<(f64, f64)> = atoms
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if pairs.is_empty() {
            return Err(AtlasError::invalid("all weights are zero"));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let scale = pairs.iter().fold(0.0f64, |s, p| s.max(p.0.abs()));
        let tol = MERGE_TOLERANCE * scale;

        let mut merged_atoms = Vec::with_capacity(pairs.len());
        let mut merged_weights = Vec::with_capacity(pairs.len());
        let mut i = 0;
        while i < pairs.len() {
            let mut weight = pairs[i].1;
            let mut moment = pairs[i].0 * pairs[i].1;
            let mut last = pairs[i].0;
            let mut j = i + 1;
            while j < pairs.len() && pairs[j].0 - last <= tol {
                weight += pairs[j].1;
                moment += pairs[j].0 * pairs[j].1;
                last = pairs[j].0;
                j += 1;
            }
            // identical atoms keep their exact location
            merged_atoms.push(if last == pairs[i].0 { last } else { moment / weight });
            merged_weights.push(weight);
            i = j;
        }
        Ok(DiscreteMeasure {
            atoms: merged_atoms,
            weights: merged_weights,
        })
    }

    /// Equal weights on the given locations.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(AtlasError::invalid("measure has no atoms"));
        }
        let n = atoms.len();
        // Equal weights 1/n may miss 1 by a few ulps; the merge step keeps the sum.
        let w = 1.0 / n as f64;
        let mut weights = vec![w; n];
        let total: f64 = weights.iter().sum();
        weights[0] += 1.0 - total;
        Self::new(atoms, weights)
    }

    pub fn delta(mu: f64) -> Result<Self> {
        Self::new(vec![mu], vec![1.0])
    }

    /// Semicircle law of the given mean and variance, discretized to
    /// [`SEMICIRCLE_ATOMS`] equal-mass atoms at the midpoint quantiles.
    pub fn semicircle(mean: f64, variance: f64) -> Result<Self> {
        Self::semicircle_with(mean, variance, SEMICIRCLE_ATOMS)
    }

    pub fn semicircle_with(mean: f64, variance: f64, n: usize) -> Result<Self> {
        if !(variance > 0.0) || !mean.is_finite() || n == 0 {
            return Err(AtlasError::invalid(
                "semicircle needs finite mean, positive variance and at least one atom",
            ));
        }
        let radius = 2.0 * variance.sqrt();
        let atoms = (0..n)
            .map(|i| {
                let q = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (-1.0f64, 1.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid == lo || mid == hi {
                        break;
                    }
                    if semicircle_unit_cdf(mid) < q {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                mean + radius * 0.5 * (lo + hi)
            })
            .collect();
        Self::uniform(atoms)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    /// Smallest atom (the left edge of the support).
    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    /// Largest atom (the right edge of the support).
    pub fn max_atom(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    pub fn diameter(&self) -> f64 {
        self.max_atom() - self.min_atom()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, w)| a * w).sum()
    }

    pub fn shifted(&self, c: f64) -> DiscreteMeasure {
        DiscreteMeasure {
            atoms: self.atoms.iter().map(|a| a + c).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Push-forward under `x -> -x`.
    pub fn reflected(&self) -> DiscreteMeasure {
        DiscreteMeasure {
            atoms: self.atoms.iter().rev().map(|a| -a).collect(),
            weights: self.weights.iter().rev().copied().collect(),
        }
    }

    /// Push-forward under `x -> s x` for `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<DiscreteMeasure> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(AtlasError::invalid("scale factor must be positive"));
        }
        Ok(DiscreteMeasure {
            atoms: self.atoms.iter().map(|a| a * s).collect(),
            weights: self.weights.clone(),
        })
    }

    /// `sum_i w_i / (a_i - x)^p` for real `x` off the support.
    pub(crate) fn resolvent_moment(&self, x: f64, p: i32) -> f64 {
        self.iter().map(|(a, w)| w / (a - x).powi(p)).sum()
    }
}

fn semicircle_unit_cdf(y: f64) -> f64 {
    let y = y.clamp(-1.0, 1.0);
    0.5 + (y * (1.0 - y * y).sqrt() + y.asin()) / std::f64::consts::PI
}

/// `sum_i w_i a_i^p`. Negative powers need a strictly positive support.
pub fn power_moment(mu: &DiscreteMeasure, p: i32) -> Result<f64> {
    if p < 0 && mu.min_atom() <= 0.0 {
        return Err(AtlasError::invalid(format!(
            "negative power {p} of a measure with atom {} <= 0",
            mu.min_atom()
        )));
    }
    Ok(mu.iter().map(|(a, w)| w * a.powi(p)).sum())
}

/// `sum_i w_i log a_i`; a nonpositive atom means the confinement is not
/// positive definite and is rejected.
pub fn log_moment(mu: &DiscreteMeasure) -> Result<f64> {
    if mu.min_atom() <= 0.0 {
        return Err(AtlasError::invalid(format!(
            "log moment of a measure with atom {} <= 0",
            mu.min_atom()
        )));
    }
    Ok(mu.iter().map(|(a, w)| w * a.ln()).sum())
}

/// A density sampled at the nodes of a uniform grid, with recorded support
/// edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GriddedDensity {
    grid_min: f64,
    grid_max: f64,
    values: Vec<f64>,
    left_edge: f64,
    right_edge: f64,
}

impl GriddedDensity {
    pub fn new(
        grid_min: f64,
        grid_max: f64,
        values: Vec<f64>,
        left_edge: f64,
        right_edge: f64,
    ) -> Result<Self> {
        if values.len() < 2 {
            return Err(AtlasError::invalid("a gridded density needs at least two nodes"));
        }
        if !(grid_min < grid_max) {
            return Err(AtlasError::invalid("grid_min must be below grid_max"));
        }
        if !(left_edge <= right_edge) {
            return Err(AtlasError::invalid("left edge exceeds right edge"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AtlasError::invalid("density values must be finite and nonnegative"));
        }
        Ok(GriddedDensity {
            grid_min,
            grid_max,
            values,
            left_edge,
            right_edge,
        })
    }

    pub fn grid_min(&self) -> f64 {
        self.grid_min
    }

    pub fn grid_max(&self) -> f64 {
        self.grid_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_edge(&self) -> f64 {
        self.left_edge
    }

    pub fn right_edge(&self) -> f64 {
        self.right_edge
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        (self.grid_max - self.grid_min) / (self.values.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.grid_min + i as f64 * self.step()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..self.values.len()).map(move |i| self.grid_min + i as f64 * h)
    }

    /// Trapezoid-rule total mass.
    pub fn mass(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        self.step() * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        if x < self.grid_min || x > self.grid_max {
            return 0.0;
        }
        let pos = (x - self.grid_min) / self.step();
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Cumulative trapezoid integral at the nodes, normalized to end at one.
    pub fn cdf_nodes(&self) -> Vec<f64> {
        let h = self.step();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for pair in self.values.windows(2) {
            acc += 0.5 * h * (pair[0] + pair[1]);
            out.push(acc);
        }
        if acc > 0.0 {
            out.iter_mut().for_each(|v| *v /= acc);
        }
        out
    }

    /// The same density moved right by `c`.
    pub fn translated(&self, c: f64) -> GriddedDensity {
        GriddedDensity {
            grid_min: self.grid_min + c,
            grid_max: self.grid_max + c,
            values: self.values.clone(),
            left_edge: self.left_edge + c,
            right_edge: self.right_edge + c,
        }
    }

    /// Fails when the trapezoid mass is farther than `tol` from one.
    pub fn check_mass(&self, tol: f64) -> Result<()> {
        let mass = self.mass();
        if (mass - 1.0).abs() > tol {
            return Err(AtlasError::Resolution(format!(
                "density mass {mass} differs from 1 by more than {tol}"
            )));
        }
        Ok(())
    }
}

/// Parameters of the periodic lattice `[[1, L]]^d` used by the elastic manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
    pub t0: f64,
    #[serde(default)]
    pub mu0: f64,
}

impl LatticeSpec {
    pub fn new(l: usize, d: usize, t0: f64, mu0: f64) -> Result<Self> {
        let spec = LatticeSpec { l, d, t0, mu0 };
        spec.validate()?;
        Ok(spec)
    }

    /// `t0 = 0` and `mu0 = 0` are accepted: both appear as limiting cases.
    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(AtlasError::invalid(format!("lattice side L = {} < 2", self.l)));
        }
        if self.d < 1 {
            return Err(AtlasError::invalid("lattice dimension d must be at least 1"));
        }
        if !(self.t0 >= 0.0) || !self.t0.is_finite() {
            return Err(AtlasError::invalid("t0 must be finite and nonnegative"));
        }
        if !(self.mu0 >= 0.0) || !self.mu0.is_finite() {
            return Err(AtlasError::invalid("mu0 must be finite and nonnegative"));
        }
        let sites = (self.l as f64).powi(self.d as i32);
        if sites > 1e7 {
            return Err(AtlasError::invalid("lattice has too many sites"));
        }
        Ok(())
    }

    /// Number of lattice sites `L^d`.
    pub fn sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    pub fn with_mu0(&self, mu0: f64) -> LatticeSpec {
        LatticeSpec { mu0, ..*self }
    }
}

/// Empirical spectral measure of `-t0 * Laplacian` (plus `mu0` if
/// `include_mass`) on the periodic lattice.
pub fn laplacian_spectrum(spec: &LatticeSpec, include_mass: bool) -> Result<DiscreteMeasure> {
    spec.validate()?;
    let shift = if include_mass { spec.mu0 } else { 0.0 };
    let one_dim: Vec<f64> = (0..spec.l)
        .map(|k| 1.0 - (2.0 * std::f64::consts::PI * k as f64 / spec.l as f64).cos())
        .collect();
    let n = spec.sites();
    let mut atoms = Vec::with_capacity(n);
    let mut index = vec![0usize; spec.d];
    for _ in 0..n {
        let sum: f64 = index.iter().map(|&k| one_dim[k]).sum();
        atoms.push(shift + 2.0 * spec.t0 * sum);
        for slot in index.iter_mut() {
            *slot += 1;
            if *slot < spec.l {
                break;
            }
            *slot = 0;
        }
    }
    // k = 0 gives exactly `shift`; cos(2 pi k / L) round-off may push an atom a hair below.
    for a in atoms.iter_mut() {
        if *a < shift {
            *a = shift;
        }
    }
    DiscreteMeasure::uniform(atoms)
}

/// Either measure representation, for distance computations.
#[derive(Debug, Clone, Copy)]
pub enum MeasureView<'a> {
    Discrete(&'a DiscreteMeasure),
    Gridded(&'a GriddedDensity),
}

impl<'a> From<&'a DiscreteMeasure> for MeasureView<'a> {
    fn from(m: &'a DiscreteMeasure) -> Self {
        MeasureView::Discrete(m)
    }
}

impl<'a> From<&'a GriddedDensity> for MeasureView<'a> {
    fn from(m: &'a GriddedDensity) -> Self {
        MeasureView::Gridded(m)
    }
}

/// Piecewise-linear CDF between consecutive breakpoints.
struct PiecewiseCdf<'a> {
    view: MeasureView<'a>,
    cumulative: Vec<f64>,
}

impl<'a> PiecewiseCdf<'a> {
    fn new(view: MeasureView<'a>) -> Self {
        let cumulative = match view {
            MeasureView::Discrete(m) => {
                let mut acc = 0.0;
                m.weights()
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect()
            }
            MeasureView::Gridded(g) => g.cdf_nodes(),
        };
        PiecewiseCdf { view, cumulative }
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        match self.view {
            MeasureView::Discrete(m) => out.extend_from_slice(m.atoms()),
            MeasureView::Gridded(g) => out.extend(g.nodes()),
        }
    }

    /// CDF values at the two ends of an interval `[a, b]` that contains no
    /// breakpoint in its interior: (F(a+), F(b-)).
    fn on_interval(&self, a: f64, b: f64) -> (f64, f64) {
        match self.view {
            MeasureView::Discrete(m) => {
                let k = m.atoms().partition_point(|&x| x <= a);
                let v = if k == 0 { 0.0 } else { self.cumulative[k - 1] };
                (v, v)
            }
            MeasureView::Gridded(g) => (self.eval_gridded(g, a), self.eval_gridded(g, b)),
        }
    }

    fn eval_gridded(&self, g: &GriddedDensity, x: f64) -> f64 {
        if x <= g.grid_min() {
            return 0.0;
        }
        if x >= g.grid_max() {
            return 1.0;
        }
        let pos = (x - g.grid_min()) / g.step();
        let i = (pos.floor() as usize).min(g.len() - 2);
        let frac = pos - i as f64;
        self.cumulative[i] * (1.0 - frac) + self.cumulative[i + 1] * frac
    }
}

/// Wasserstein-1 distance `int |F_a - F_b| dx`, computed exactly for the
/// piecewise CDFs on the merged breakpoint grid. Gridded CDFs come from
/// trapezoid accumulation normalized to unit mass.
pub fn wasserstein1<'a, 'b>(a: impl Into<MeasureView<'a>>, b: impl Into<MeasureView<'b>>) -> f64 {
    let ca = PiecewiseCdf::new(a.into());
    let cb = PiecewiseCdf::new(b.into());
    let mut points = Vec::new();
    ca.breakpoints(&mut points);
    cb.breakpoints(&mut points);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut total = 0.0;
    for pair in points.windows(2) {
        let (x0, x1) = (pair[0], pair[1]);
        let h = x1 - x0;
        if h <= 0.0 {
            continue;
        }
        let (a0, a1) = ca.on_interval(x0, x1);
        let (b0, b1) = cb.on_interval(x0, x1);
        let (d0, d1) = (a0 - b0, a1 - b1);
        total += if d0 * d1 >= 0.0 {
            0.5 * h * (d0.abs() + d1.abs())
        } else {
            0.5 * h * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
        };
    }
    total
}

/// JSON description of an input measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MeasureSpec {
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
    Delta { mu: f64 },
    Semicircle { mean: f64, variance: f64 },
    Lattice {
        #[serde(rename = "L")]
        l: usize,
        d: usize,
        t0: f64,
        mu0: f64,
    },
}

impl MeasureSpec {
    /// Materializes the description; semicircles are discretized and lattice
    /// specs become the spectrum of `mu0 - t0 * Laplacian`.
    pub fn to_discrete(&self) -> Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Discrete { atoms, weights } => {
                DiscreteMeasure::new(atoms.clone(), weights.clone())
            }
            MeasureSpec::Delta { mu } => DiscreteMeasure::delta(*mu),
            MeasureSpec::Semicircle { mean, variance } => {
                DiscreteMeasure::semicircle(*mean, *variance)
            }
            MeasureSpec::Lattice { l, d, t0, mu0 } => {
                laplacian_spectrum(&LatticeSpec::new(*l, *d, *t0, *mu0)?, true)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_point() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![2.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn construction_sorts_and_merges() {
        let m = DiscreteMeasure::new(vec![3.0, 1.0, 3.0 + 1e-12], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert_eq!(m.min_atom(), 1.0);
        assert_abs_diff_eq!(m.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn construction_rejects_bad_weights() {
        assert!(DiscreteMeasure::new(vec![1.0], vec![0.9]).is_err());
        assert!(DiscreteMeasure::new(vec![1.0, 2.0], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![], vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn power_moments() {
        let d = DiscreteMeasure::delta(2.0).unwrap();
        assert_abs_diff_eq!(power_moment(&d, -2).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(power_moment(&two_point(), -2).unwrap(), 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(power_moment(&two_point(), 0).unwrap(), 1.0, epsilon = 1e-15);
        let signed = DiscreteMeasure::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(power_moment(&signed, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(power_moment(&signed, -1).is_err());
    }

    #[test]
    fn log_moments() {
        assert_abs_diff_eq!(log_moment(&DiscreteMeasure::delta(1.0).unwrap()).unwrap(), 0.0);
        let e = DiscreteMeasure::delta(std::f64::consts::E).unwrap();
        assert_abs_diff_eq!(log_moment(&e).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(log_moment(&two_point()).unwrap(), 0.3465736, epsilon = 1e-7);
        assert!(log_moment(&DiscreteMeasure::delta(0.0).unwrap()).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        let d0 = DiscreteMeasure::delta(0.0).unwrap();
        let d1 = DiscreteMeasure::delta(1.0).unwrap();
        let half = DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(wasserstein1(&d0, &d0), 0.0);
        assert_abs_diff_eq!(wasserstein1(&d0, &d1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wasserstein1(&half, &d0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(wasserstein1(&d0, &half), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn wasserstein_gridded_against_discrete() {
        // Uniform density on [0, 1] vs delta at 1/2: W1 = 1/4.
        let n = 2001;
        let g = GriddedDensity::new(0.0, 1.0, vec![1.0; n], 0.0, 1.0).unwrap();
        let d = DiscreteMeasure::delta(0.5).unwrap();
        assert_abs_diff_eq!(wasserstein1(&g, &d), 0.25, epsilon = 1e-6);
        assert_abs_diff_eq!(wasserstein1(&g, &g.translated(0.3)), 0.3, epsilon = 1e-9);
    }

    #[test]
    fn lattice_spectrum_examples() {
        let m = laplacian_spectrum(&LatticeSpec::new(2, 1, 1.0, 0.0).unwrap(), false).unwrap();
        assert_eq!(m.atoms(), &[0.0, 4.0]);
        assert_eq!(m.weights(), &[0.5, 0.5]);

        let m = laplacian_spectrum(&LatticeSpec::new(3, 1, 1.0, 0.0).unwrap(), false).unwrap();
        assert_eq!(m.len(), 2);
        assert_abs_diff_eq!(m.atoms()[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.weights()[1], 2.0 / 3.0, epsilon = 1e-15);

        let m = laplacian_spectrum(&LatticeSpec::new(2, 1, 0.5, 1.0).unwrap(), true).unwrap();
        assert_eq!(m.atoms(), &[1.0, 3.0]);
    }

    #[test]
    fn lattice_rejects_degenerate() {
        assert!(LatticeSpec::new(1, 1, 1.0, 1.0).is_err());
        assert!(LatticeSpec::new(2, 0, 1.0, 1.0).is_err());
        assert!(LatticeSpec::new(2, 1, -1.0, 1.0).is_err());
    }

    #[test]
    fn semicircle_discretization_moments() {
        let m = DiscreteMeasure::semicircle(5.0, 1.0).unwrap();
        assert_eq!(m.len(), SEMICIRCLE_ATOMS);
        assert_abs_diff_eq!(m.mean(), 5.0, epsilon = 1e-12);
        let var: f64 = m.iter().map(|(a, w)| w * (a - 5.0).powi(2)).sum();
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-4);
        assert!(m.min_atom() > 3.0 && m.max_atom() < 7.0);
    }

    #[test]
    fn measure_spec_json() {
        let spec: MeasureSpec = serde_json::from_str(r#"{"type":"delta","mu":2.0}"#).unwrap();
        assert_eq!(spec.to_discrete().unwrap().atoms(), &[2.0]);
        let spec: MeasureSpec =
            serde_json::from_str(r#"{"type":"lattice","L":2,"d":1,"t0":0.5,"mu0":1}"#).unwrap();
        assert_eq!(spec.to_discrete().unwrap().atoms(), &[1.0, 3.0]);
        let spec: MeasureSpec =
            serde_json::from_str(r#"{"type":"discrete","atoms":[1,2],"weights":[0.5,0.5]}"#)
                .unwrap();
        assert_eq!(spec.to_discrete().unwrap().len(), 2);
        assert!(serde_json::from_str::<MeasureSpec>(r#"{"type":"cauchy"}"#).is_err());
    }
}
