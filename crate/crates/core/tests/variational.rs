mod common;

use common::{rel, torus};
use gibbs_core::ground_state::{solve_ground_state, SolverOptions};
use gibbs_core::rng::StreamFamily;
use gibbs_core::spectral::{Convention, SpectralGrid};
use gibbs_core::stats::Estimate;
use gibbs_core::variational::{
    build_soliton_drift, expected_l2_error, objective_breakdown, ou_variance, simulate_y, simulate_zm,
    verify_approx_rates, AmplitudeRule,
};
use gibbs_core::{Gns, Profile};

fn profile(p: f64) -> Profile {
    let params = Gns::new(1, 1.0, p).unwrap();
    let g = SpectralGrid::new(1, 384, 64.0, Convention::TwoPi).unwrap();
    solve_ground_state(&params, &SolverOptions::default(), &g).unwrap()
}

#[test]
fn brownian_marginals_and_endpoint() {
    let g = torus(1, 4, Convention::Plain);
    let fam = StreamFamily::named(1, "wiener");
    let paths: Vec<_> = (0..10_000).map(|i| simulate_y(&g, 1.0, 8, &mut fam.stream(i)).unwrap()).collect();
    let mut mass = Vec::new();
    for idx in (0..g.len()).filter(|&i| i != g.zero_index()) {
        let sq: Vec<f64> = paths.iter().map(|p| p.brownian(idx, 8).norm_sqr()).collect();
        let est = Estimate::from_samples(&sq);
        assert!(est.within(1.0, 3.0), "{est:?}");
        let cross: Vec<f64> = paths
            .iter()
            .map(|p| (p.brownian(idx, 4) * (p.brownian(idx, 8) - p.brownian(idx, 4)).conj()).re)
            .collect();
        assert!(Estimate::from_samples(&cross).within(0.0, 4.0));
    }
    for p in &paths {
        let y = p.endpoint();
        for idx in (0..g.len()).filter(|&i| i != g.zero_index()) {
            let n = g.mode(idx)[0].abs() as f64;
            assert!((y.coeffs()[idx] - p.brownian(idx, 8) / n).norm() < 1e-14);
        }
        mass.push(y.l2_norm_sq());
    }
    let oracle: f64 = 2.0 * (1..=4).map(|n| 1.0 / (n * n) as f64).sum::<f64>();
    assert!(Estimate::from_samples(&mass).within(oracle, 3.0));
}

#[test]
fn ito_isometry_at_every_mesh_time() {
    let g = torus(1, 8, Convention::Plain);
    let steps = 16;
    let fam = StreamFamily::named(2, "ito");
    let trajs: Vec<_> = (0..4000)
        .map(|i| simulate_zm(&simulate_y(&g, 1.0, steps, &mut fam.stream(i)).unwrap(), 8).unwrap())
        .collect();
    let first = &trajs[0];
    for (a, &idx) in first.active().iter().enumerate() {
        let n = g.mode(idx)[0].abs() as f64;
        let rate = first.rate(a);
        assert!(rel(rate, 8f64.sqrt() / n) < 1e-14);
        for k in 0..=steps {
            let sq: Vec<f64> = trajs.iter().map(|t| t.x_path(a)[k].norm_sqr()).collect();
            let exact = ou_variance(1.0 / n, rate, k as f64 / steps as f64);
            let est = Estimate::from_samples(&sq);
            assert!(est.within(exact, 3.0), "n={n} t={k}: {est:?} vs {exact}");
        }
    }
}

#[test]
fn smoother_error_decreases_with_m() {
    let g = torus(1, 64, Convention::Plain);
    let fam = StreamFamily::named(3, "mono");
    let ms = [8, 16, 32, 64];
    let mut sums = [0.0; 4];
    for i in 0..400 {
        let path = simulate_y(&g, 1.0, 32, &mut fam.stream(i)).unwrap();
        for (j, &m) in ms.iter().enumerate() {
            sums[j] += simulate_zm(&path, m).unwrap().residual_end().coeff(&[3]).norm_sqr();
        }
    }
    assert!(sums.windows(2).all(|w| w[1] < w[0]), "{sums:?}");
    let exact: Vec<f64> = ms.iter().map(|&m| expected_l2_error(&g, 1.0, m)).collect();
    assert!(exact.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn rate_report_agrees_with_closed_forms() {
    let g = torus(1, 64, Convention::Plain);
    let rep = verify_approx_rates(&g, 1.0, &[4, 8, 16, 32], 200, 64, &StreamFamily::named(4, "rates")).unwrap();
    for (est, exact) in rep.l2_error.iter().zip(&rep.l2_error_exact) {
        assert!(est.within(*exact, 3.0));
    }
    for (est, exact) in rep.derivative_cost.iter().zip(&rep.derivative_cost_exact) {
        assert!(est.within(*exact, 3.0));
    }
    assert_eq!((rep.l2_target, rep.derivative_target), (-0.5, 0.5));
    assert!(rep.l2_fit.slope < 0.0 && rep.derivative_fit.slope > 0.0);
    let short = verify_approx_rates(&g, 1.0, &[8, 16, 32], 10, 8, &StreamFamily::named(4, "rates"));
    assert!(short.is_err());
}

#[test]
fn rate_targets_select_branches() {
    let g = torus(1, 16, Convention::Plain);
    let fam = StreamFamily::named(5, "branch");
    let hi = verify_approx_rates(&g, 3.0, &[2, 4, 8, 16], 4, 8, &fam).unwrap();
    assert_eq!((hi.l2_target, hi.derivative_target), (-0.5, 0.5));
    let lo = verify_approx_rates(&g, 0.75, &[2, 4, 8, 16], 4, 8, &fam).unwrap();
    assert_eq!((lo.l2_target, lo.derivative_target), (-0.25, 0.75));
}

#[test]
fn soliton_properties_and_identities() {
    let q = profile(6.0);
    let g = torus(1, 64, Convention::TwoPi);
    let k = 1.5 * q.l2_norm;
    let drift = build_soliton_drift(&q, &g, k, 1.0 / 16.0, 0.05, k / 10.0, AmplitudeRule::MassMargin).unwrap();
    let props = drift.properties;
    assert!(props.mass <= (k - k / 10.0) * (1.0 + 1e-12));
    assert!(props.hamiltonian < 0.0 && props.a1 > 0.0);
    let br = objective_breakdown(&drift, 16, 100, 32, &StreamFamily::named(6, "drift")).unwrap();
    assert!(rel(br.a, props.hamiltonian) < 1e-12);
    let sum = br.a + br.b + br.c.mean + br.d.mean + br.e.mean;
    assert_eq!(br.total.mean, sum);
    assert!(br.cost_bound_holds());
    assert!(br.e_kinetic.within(br.e_kinetic_exact, 3.0));
    let again = objective_breakdown(&drift, 16, 100, 32, &StreamFamily::named(6, "drift")).unwrap();
    assert_eq!(br, again);
}

#[test]
fn under_resolved_soliton_is_rejected() {
    let q = profile(8.0);
    let g = torus(1, 16, Convention::TwoPi);
    let r = build_soliton_drift(&q, &g, 1.0, 1.0 / 64.0, 0.05, 0.1, AmplitudeRule::MassMargin);
    assert!(r.is_err());
}

#[test]
fn null_drift_reduces_to_smoothing_cost() {
    let q = profile(8.0);
    let g = torus(1, 64, Convention::TwoPi);
    let drift = build_soliton_drift(&q, &g, 1.0, 1.0 / 16.0, 0.05, 0.1, AmplitudeRule::Fixed(0.0)).unwrap();
    let br = objective_breakdown(&drift, 64, 200, 32, &StreamFamily::named(7, "null")).unwrap();
    assert_eq!((br.a, br.b, br.d.mean), (0.0, 0.0, 0.0));
    assert!(br.e.mean > 0.0);
    assert!(br.c.mean.abs() < 0.1 * br.e.mean, "C = {:?}, E = {:?}", br.c, br.e);
    assert!(br.e_cross.mean == 0.0);
}

#[test]
fn mass_event_probability_falls_with_m() {
    let q = profile(6.0);
    let g = torus(1, 256, Convention::Plain);
    let k = 1.5 * q.critical_mass(Convention::Plain);
    let drift = build_soliton_drift(&q, &g, k, 1.0 / 8.0, 0.05, k / 10.0, AmplitudeRule::MassMargin).unwrap();
    let probs: Vec<f64> = [2, 4, 8, 16, 32]
        .iter()
        .map(|&m| {
            objective_breakdown(&drift, m, 200, 32, &StreamFamily::named(8, "event"))
                .unwrap()
                .d_event_probability
                .mean
        })
        .collect();
    assert!(probs.windows(2).all(|w| w[1] <= w[0]), "{probs:?}");
    assert!(probs[0] > probs[4], "{probs:?}");
}
