mod common;

use common::{cubic_soliton, quintic_soliton, rel, sech, simpson_pieces};
use gibbs_core::ground_state::{
    best_fit_error, elliptic_residual, sharp_constant, solve_from, solve_ground_state, weinstein_functional,
    SolverOptions,
};
use gibbs_core::spectral::{Convention, SpectralField, SpectralGrid};
use gibbs_core::{Gns, Profile};

fn box_grid() -> SpectralGrid<f64> {
    SpectralGrid::new(1, 384, 64.0, Convention::TwoPi).unwrap()
}

fn solve(p: f64) -> Profile {
    let params = Gns::new(1, 1.0, p).unwrap();
    solve_ground_state(&params, &SolverOptions::default(), &box_grid()).unwrap()
}

fn line_integral(f: &dyn Fn(f64) -> f64) -> f64 {
    simpson_pieces(f, -30.0, 30.0, 120, 1e-14)
}

#[test]
fn quintic_profile_matches_closed_form() {
    let q = solve(6.0);
    assert!(q.converged);
    let (_, _, err) = best_fit_error(&q, |x| quintic_soliton(x[0]));
    assert!(err < 1e-3, "profile error {err}");
    assert!(q.residual < 1e-6);
    let mass = line_integral(&|x| quintic_soliton(x).powi(2)).sqrt();
    assert!(rel(q.l2_norm, mass) < 1e-3);
    assert!(rel(sharp_constant(&q), 3.0 * mass.powi(-4)) < 1e-3);
}

#[test]
fn cubic_profile_matches_closed_form() {
    let q = solve(4.0);
    let (_, _, err) = best_fit_error(&q, |x| cubic_soliton(x[0]));
    assert!(err < 1e-3, "profile error {err}");
    assert!(q.residual < 1e-6);
}

#[test]
fn normalisation_identities() {
    let q = solve(6.0);
    let params = q.params;
    let f = &q.field;
    let h = f.sobolev_norm_sq(1.0);
    assert!(rel(f.l2_norm_sq(), h) < 1e-8);
    assert!(rel(h, 2.0 / 6.0 * f.lp_integral(6.0).unwrap()) < 1e-8);
    let hamiltonian = 0.5 * h - f.lp_integral(6.0).unwrap() / 6.0;
    assert!(hamiltonian.abs() < 1e-8 * h);
    let j = weinstein_functional(f, &params).unwrap();
    assert!((sharp_constant(&q) * j - 1.0).abs() < 1e-8);
}

#[test]
fn functional_of_closed_form_matches_quadrature() {
    let params = Gns::new(1, 1.0, 6.0).unwrap();
    let u = SpectralField::from_real_fn(box_grid(), |x| sech(2.0 * x[0]).sqrt());
    let got = weinstein_functional(&u, &params).unwrap();
    // d/dx sech^{1/2}(2x) = -sech^{1/2}(2x) tanh(2x); with the 2π|ξ| symbol
    // the Ḣ¹ seminorm is the plain derivative norm.
    let kin = line_integral(&|x| sech(2.0 * x) * (2.0 * x).tanh().powi(2));
    let mass = line_integral(&|x| sech(2.0 * x));
    let pot = line_integral(&|x| sech(2.0 * x).powi(3));
    let oracle = kin * mass * mass / pot;
    assert!(rel(got, oracle) < 1e-6, "{got} vs {oracle}");
}

#[test]
fn restart_from_fixed_point() {
    let q = solve(6.0);
    let again = solve_from(&q.field, &q.params, &SolverOptions::default()).unwrap();
    assert!(again.iterations <= 2, "{} iterations", again.iterations);
    assert!(rel(again.l2_norm, q.l2_norm) < 1e-10);
    assert!(rel(again.hs_norm, q.hs_norm) < 1e-10);
}

#[test]
fn residual_detects_perturbation_and_ignores_translation() {
    let q = solve(6.0);
    let params = q.params;
    let bump = SpectralField::from_real_fn(*q.field.grid(), |x| (-(x[0] - 1.0).powi(2)).exp());
    let perturbed = q.field.add(&bump.scale(0.1)).unwrap();
    assert!(elliptic_residual(&perturbed, &params).is_err());
    let renormalised = Profile::from_field(&perturbed, &params).unwrap();
    assert!(renormalised.residual > 1e-2, "{}", renormalised.residual);
    let r0 = elliptic_residual(&q.field, &params).unwrap();
    let moved = elliptic_residual(&q.field.translate(&[3.7]), &params).unwrap();
    assert!((moved - r0).abs() < 1e-10);
}

#[test]
fn near_quadratic_power_is_self_consistent() {
    let q = solve(2.1);
    assert!(rel(sharp_constant(&q), 1.05 * q.l2_norm.powf(-0.1)) < 1e-12);
    let j = weinstein_functional(&q.field, &q.params).unwrap();
    assert!((sharp_constant(&q) * j - 1.0).abs() < 1e-6);
}

#[test]
fn localized_fields_obey_the_sharp_inequality() {
    use rand::{Rng, SeedableRng};
    let q = solve(6.0);
    let c = sharp_constant(&q);
    let mut rng = rand::rngs::StdRng::seed_from_u64(17);
    let g = box_grid();
    for _ in 0..200 {
        let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-6.0..6.0),
                    rng.random_range(0.5..3.0),
                    rng.random_range(0.0..2.0),
                )
            })
            .collect();
        let u = SpectralField::from_real_fn(g, |x| {
            bumps
                .iter()
                .map(|(a, c, w, k)| a * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp() * (k * x[0]).cos())
                .sum()
        });
        let j = weinstein_functional(&u, &q.params).unwrap();
        assert!(c * j >= 1.0 - 1e-6, "C·J = {}", c * j);
    }
}
