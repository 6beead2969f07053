//! Property-based invariants across the measures, freeconv, mde,
//! complexity and montecarlo modules.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use atlas_core::complexity::{
    objective_at, sigma_soft_spins, t_critical, Method, Phase, SoftSpinModel,
};
use atlas_core::freeconv::{log_potential, FreeConvolution};
use atlas_core::mde::{mu_infinity, solve_mde, MdeModel};
use atlas_core::measures::{laplacian_spectrum, power_moment, wasserstein1};
use atlas_core::montecarlo::{sample_block_spectrum, LandscapeSampler, CorrelatorSpec, SamplerConfig};
use atlas_core::{DiscreteMeasure, LatticeSpec};

/// Up to four atoms in `[lo, hi]` with random weights.
fn measure(lo: f64, hi: f64) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((lo..hi, 0.1f64..1.0), 1..=4).prop_map(|pairs| {
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let atoms = pairs.iter().map(|p| p.0).collect();
        let mut weights: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
        let s: f64 = weights.iter().sum();
        weights[0] += 1.0 - s;
        DiscreteMeasure::new(atoms, weights).unwrap()
    })
}

fn lattice() -> impl Strategy<Value = LatticeSpec> {
    (2usize..=6, 1usize..=3, 0.0f64..3.0, 0.0f64..2.0)
        .prop_map(|(l, d, t0, mu0)| LatticeSpec::new(l, d, t0, mu0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lattice_spectrum_is_normalized(spec in lattice()) {
        let mu = laplacian_spectrum(&spec, true).unwrap();
        let total: f64 = mu.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert_eq!(mu.min_atom(), spec.mu0);
        // every atom carries an integer multiplicity out of L^d
        let sites = spec.sites() as f64;
        for w in mu.weights() {
            prop_assert!((w * sites - (w * sites).round()).abs() < 1e-8);
        }
    }

    #[test]
    fn wasserstein_triangle(a in measure(-3.0, 3.0), b in measure(-3.0, 3.0), c in measure(-3.0, 3.0)) {
        let (ab, bc, ac) = (wasserstein1(&a, &b), wasserstein1(&b, &c), wasserstein1(&a, &c));
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(wasserstein1(&a, &a).abs() < 1e-15);
        prop_assert!((ab - wasserstein1(&b, &a)).abs() < 1e-14);
    }

    #[test]
    fn inverse_square_moment_decreases_under_shift(mu in measure(0.2, 4.0), c in 1e-3f64..2.0) {
        prop_assert!(power_moment(&mu.shifted(c), -2).unwrap() < power_moment(&mu, -2).unwrap());
    }

    #[test]
    fn stieltjes_bounds(mu in measure(-3.0, 3.0), t in 0.05f64..4.0, x in -8.0f64..8.0, y in 1e-3f64..3.0) {
        let fc = FreeConvolution::new(&mu, t).unwrap();
        let z = Complex64::new(x, y);
        let m = fc.stieltjes(z).unwrap();
        prop_assert!(m.im > 0.0);
        prop_assert!(fc.residual(z, m) < 1e-12);
        prop_assert!(m.norm() <= 1.0 / t.sqrt() * (1.0 + 1e-9));
    }

    #[test]
    fn subordination_at_edges(mu in measure(-3.0, 3.0), t in 0.01f64..10.0) {
        let e = *FreeConvolution::new(&mu, t).unwrap().edges();
        prop_assert!(e.left_edge + t * e.m_at_left_edge <= mu.min_atom() + 1e-8);
        prop_assert!(e.right_edge + t * e.m_at_right_edge >= mu.max_atom() - 1e-8);
    }

    #[test]
    fn log_potential_time_derivative_outside(mu in measure(-2.0, 2.0), t in 0.1f64..2.0, off in 0.2f64..3.0, left in any::<bool>()) {
        let h = 1e-4;
        let fc = FreeConvolution::new(&mu, t).unwrap();
        let u = if left { fc.left_edge() - off } else { fc.right_edge() + off };
        let fd = (log_potential(&mu, t + h, u).unwrap() - log_potential(&mu, t - h, u).unwrap()) / (2.0 * h);
        let m = fc.boundary(u).unwrap();
        prop_assert!(m.im.abs() < 1e-12);
        prop_assert!((fd + 0.5 * m.re * m.re).abs() < 1e-4, "{} vs {}", fd, -0.5 * m.re * m.re);
    }

    #[test]
    fn left_edge_moves_with_minus_m(mu in measure(-2.0, 2.0), t in 0.1f64..4.0) {
        let h = 1e-4;
        let lp = FreeConvolution::new(&mu, t + h).unwrap().left_edge();
        let lm = FreeConvolution::new(&mu, t - h).unwrap().left_edge();
        let m = FreeConvolution::new(&mu, t).unwrap().edges().m_at_left_edge;
        prop_assert!(((lp - lm) / (2.0 * h) + m).abs() < 1e-4);
    }

    #[test]
    fn log_potential_is_continuous_in_atoms(mu in measure(-2.0, 2.0), t in 0.2f64..2.0, u in -4.0f64..4.0) {
        let delta = 1e-6;
        let moved = DiscreteMeasure::new(mu.atoms().iter().map(|a| a + delta).collect(), mu.weights().to_vec()).unwrap();
        let a = log_potential(&mu, t, u).unwrap();
        let b = log_potential(&moved, t, u).unwrap();
        prop_assert!((a - b).abs() <= 10.0 * delta.sqrt());
    }

    #[test]
    fn glassy_phase_ordering(mu in measure(0.5, 3.0), stretch in 1.05f64..3.0) {
        let t = t_critical(&mu).unwrap() * stretch;
        let model = SoftSpinModel::new(mu.clone(), t).unwrap();
        let cf = sigma_soft_spins(&model, Method::ClosedForm).unwrap();
        let var = sigma_soft_spins(&model, Method::Variational).unwrap();
        prop_assert_eq!(cf.phase, Phase::Glassy);
        prop_assert!(cf.sigma_tot > cf.sigma_min && cf.sigma_min > 0.0);
        prop_assert!((cf.sigma_tot - var.sigma_tot).abs() < 1e-5);
        prop_assert!((cf.sigma_min - var.sigma_min).abs() < 1e-5);
        let ell = FreeConvolution::new(&mu, t).unwrap().left_edge();
        prop_assert!(var.u_star_tot >= ell - 1e-6);
        prop_assert!((var.u_star_min - ell).abs() < 1e-6);
    }

    #[test]
    fn subcritical_stationarity(mu in measure(0.5, 3.0), frac in 0.05f64..0.95) {
        let t = t_critical(&mu).unwrap() * frac;
        let u_t = -t * mu.iter().map(|(a, w)| w / a).sum::<f64>();
        let m = FreeConvolution::new(&mu, t).unwrap().boundary(u_t).unwrap();
        prop_assert!((-u_t / t - m.re).abs() < 1e-8 && m.im.abs() < 1e-8);
        let model = SoftSpinModel::new(mu, t).unwrap();
        prop_assert!(objective_at(&model, u_t).unwrap().abs() < 1e-8);
    }

    #[test]
    fn edge_minus_characteristic_is_convex(mu in measure(0.5, 3.0)) {
        let t_c = t_critical(&mu).unwrap();
        let inv = mu.iter().map(|(a, w)| w / a).sum::<f64>();
        let g = |t: f64| FreeConvolution::new(&mu, t).unwrap().left_edge() + t * inv;
        let ts: Vec<f64> = (1..=12).map(|k| t_c * k as f64 / 12.0).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
        for w in vals.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9, "{:?}", w);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mde_solutions_are_fixed_points(
        t0 in 0.0f64..2.0, mu0 in 0.0f64..2.0, j in 0.2f64..3.0,
        u in prop::collection::vec(-2.0f64..2.0, 3), x in -6.0f64..6.0, y in 1e-3f64..2.0,
    ) {
        let model = MdeModel::new(LatticeSpec::new(3, 1, t0, mu0).unwrap(), j).unwrap();
        let z = Complex64::new(x, y);
        let m = solve_mde(&model, &u, z).unwrap();
        let a = model.a_matrix(&u).unwrap();
        let h = DMatrix::from_fn(3, 3, |i, k| {
            let mut e = Complex64::new(a[(i, k)], 0.0);
            if i == k {
                e -= z + j * j * m[i];
            }
            e
        });
        let g = h.try_inverse().unwrap();
        for i in 0..3 {
            prop_assert!(m[i].im > 0.0);
            prop_assert!((g[(i, i)] - m[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn mu_infinity_sup_and_shift(j in 0.5f64..3.0, u in prop::collection::vec(-1.5f64..1.5, 2), shift in -1.0f64..1.0) {
        let model = MdeModel::new(LatticeSpec::new(2, 1, 1.0, 1.0).unwrap(), j).unwrap();
        let d = mu_infinity(&model, &u, None).unwrap();
        prop_assert!(d.sup() <= 2f64.sqrt() / (j * std::f64::consts::PI) + 1e-3);
        let moved: Vec<f64> = u.iter().map(|x| x + shift).collect();
        let ds = mu_infinity(&model, &moved, None).unwrap();
        prop_assert!(wasserstein1(&ds, &d.translated(shift)) <= 2.0 * d.step());
    }
}

#[test]
fn edge_objective_increases_above_threshold() {
    for mu in [DiscreteMeasure::delta(1.0).unwrap(), DiscreteMeasure::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap()] {
        let t_c = t_critical(&mu).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 1..=10 {
            let t = t_c * (1.0 + 0.2 * k as f64);
            let model = SoftSpinModel::new(mu.clone(), t).unwrap();
            let ell = FreeConvolution::new(&mu, t).unwrap().left_edge();
            let f = objective_at(&model, ell).unwrap();
            assert!(f > last, "F(l_t, t) not increasing at t = {t}");
            last = f;
        }
    }
}

#[test]
fn block_spectra_are_seed_deterministic() {
    let model = MdeModel::new(LatticeSpec::new(2, 1, 1.0, 1.0).unwrap(), 2.0).unwrap();
    let cfg = SamplerConfig::new(60, 1, 99).unwrap();
    let a = sample_block_spectrum(&model, &[0.3, -0.2], &cfg).unwrap();
    let b = sample_block_spectrum(&model, &[0.3, -0.2], &cfg).unwrap();
    let bits = |m: &DiscreteMeasure| m.atoms().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let c = sample_block_spectrum(&model, &[0.3, -0.2], &SamplerConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn esd_distance_shrinks_with_block_size() {
    let model = MdeModel::new(LatticeSpec::new(2, 1, 1.0, 1.0).unwrap(), 2.0).unwrap();
    let limit = mu_infinity(&model, &[0.0, 0.0], None).unwrap();
    let median = |n: usize| {
        let mut w: Vec<f64> = (0..20)
            .map(|s| {
                let cfg = SamplerConfig::new(n, 1, s).unwrap();
                wasserstein1(&sample_block_spectrum(&model, &[0.0, 0.0], &cfg).unwrap(), &limit)
            })
            .collect();
        w.sort_by(f64::total_cmp);
        0.5 * (w[9] + w[10])
    };
    let (small, large) = (median(100), median(400));
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn landscape_variance_matches_correlator() {
    // stationarity lets every grid node contribute to the estimate
    let b = CorrelatorSpec::exponential(80.0).unwrap();
    let s = LandscapeSampler::new(&b, 1.0, 9).unwrap();
    let seeds = 200;
    let mut sum = 0.0;
    let mut count = 0;
    for seed in 0..seeds {
        for v in s.sample_field(seed) {
            sum += v * v;
            count += 1;
        }
    }
    let var = sum / count as f64;
    assert!((var / (2.0 * b.value(0.0)) - 1.0).abs() < 0.05, "{var}");
}
