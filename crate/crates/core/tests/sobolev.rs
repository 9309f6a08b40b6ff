mod common;

use common::{c_k_line, random_field, rel, stencil, torus};
use gibbs_core::ground_state::{solve_ground_state, SolverOptions};
use gibbs_core::sobolev::{
    c_k_constant, difference_norm, fit_c_delta, forward_difference, restriction_comparison, torus_constant,
    verify_torus_gns, DifferenceNormSpec,
};
use gibbs_core::spectral::{Convention, SpectralField, SpectralGrid};
use gibbs_core::{Complex, Gns};

#[test]
fn spectral_difference_matches_stencil() {
    let g = SpectralGrid::new(1, 10, 2.0, Convention::TwoPi).unwrap();
    let u = random_field(g, 10, 0.5, false, 31);
    let y = [0.137];
    let v = forward_difference(&u, &y, 2).unwrap();
    for j in 0..40 {
        let x = [-1.0 + j as f64 * 0.05];
        let a = common::direct_eval(&v, &x);
        let b = stencil(&u, &x, &y, 2);
        assert!((a - b).norm() < 1e-10, "{a} vs {b}");
    }
    let g2 = torus(2, 5, Convention::Plain);
    let w = random_field(g2, 5, 0.0, true, 32);
    let y2 = [0.3, -0.7];
    let dw = forward_difference(&w, &y2, 3).unwrap();
    for x in [[0.1, 0.2], [-2.0, 1.3], [0.77, -0.41]] {
        assert!((common::direct_eval(&dw, &x) - stencil(&w, &x, &y2, 3)).norm() < 1e-10);
    }
}

#[test]
fn first_order_constant_at_half() {
    let c = c_k_constant(1, 0.5, &DifferenceNormSpec::new(1, 1e3)).unwrap();
    let exact = 4.0 * std::f64::consts::PI.powi(2);
    assert!(rel(c.value, exact) < 1e-4, "{}", c.value);
}

#[test]
fn line_constants_match_gamma_formula() {
    for (k, s) in [(1, 0.3), (1, 0.75), (2, 1.2), (2, 1.5)] {
        let c = c_k_constant(1, s, &DifferenceNormSpec::new(k, 1e3)).unwrap();
        let exact = c_k_line(k, s);
        assert!(rel(c.value, exact) < 1e-4, "k={k} s={s}: {} vs {exact}", c.value);
    }
}

#[test]
fn first_order_constant_increases_with_s() {
    let spec = DifferenceNormSpec::new(1, 1e3);
    let v: Vec<f64> = [0.4, 0.5, 0.6]
        .iter()
        .map(|&s| c_k_constant(1, s, &spec).unwrap().value)
        .collect();
    let refined: Vec<f64> = [0.4, 0.5, 0.6]
        .iter()
        .map(|&s| c_k_constant(1, s, &spec.refined()).unwrap().value)
        .collect();
    assert!(v[0] < v[1] && v[1] < v[2]);
    assert!(refined[0] < refined[1] && refined[1] < refined[2]);
    for s in [0.4, 0.6] {
        assert!(rel(c_k_constant(1, s, &spec).unwrap().value, c_k_line(1, s)) < 1e-4);
    }
}

#[test]
fn second_order_constant_self_converges() {
    let spec = DifferenceNormSpec::new(2, 1e3);
    let a = c_k_constant(1, 1.5, &spec).unwrap().value;
    let b = c_k_constant(1, 1.5, &spec.refined()).unwrap().value;
    assert!(rel(a, b) < 1e-5);
}

#[test]
fn single_mode_difference_norm() {
    let g = torus(1, 4, Convention::Plain);
    let a = Complex::new(0.6, -0.3);
    let u = SpectralField::from_modes(g, false, |n| if n[0] == 1 { a } else { Complex::new(0.0, 0.0) });
    let dn = difference_norm(&u, 0.75, &DifferenceNormSpec::new(1, 1e3)).unwrap();
    assert!(rel(dn.value, a.norm_sqr()) < 1e-3, "{}", dn.value);
    let c = SpectralField::from_modes(g, true, |n| {
        if n[0] == 0 {
            Complex::new(2.0, 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    assert_eq!(difference_norm(&c, 0.75, &DifferenceNormSpec::new(1, 1e3)).unwrap().value, 0.0);
}

#[test]
fn random_fields_match_fourier_norm() {
    for (k, s, seed) in [(1, 0.75, 41), (2, 1.2, 42)] {
        for conv in [Convention::Plain, Convention::TwoPi] {
            let u = random_field(torus(1, 12, conv), 12, 1.0, true, seed);
            let exact = u.sobolev_norm_sq(s);
            let dn = difference_norm(&u, s, &DifferenceNormSpec::new(k, 1e3)).unwrap();
            assert!(rel(dn.value, exact) < 1e-2, "k={k} s={s}");
        }
    }
}

#[test]
fn refinement_shrinks_the_gap() {
    for (k, s, seed) in [(1, 0.75, 41), (2, 1.2, 42)] {
        let u = random_field(torus(1, 12, Convention::Plain), 12, 1.0, true, seed);
        let exact = u.sobolev_norm_sq(s);
        let coarse = DifferenceNormSpec {
            nodes: 3,
            panels_per_decade: 1,
            ..DifferenceNormSpec::new(k, 1e3)
        };
        let gaps: Vec<f64> = [coarse, coarse.refined(), coarse.refined().refined()]
            .iter()
            .map(|sp| rel(difference_norm(&u, s, sp).unwrap().value, exact))
            .collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "k={k} s={s}: {gaps:?}");
    }
}

#[test]
fn two_dimensional_difference_norm() {
    let u = random_field(torus(2, 4, Convention::Plain), 4, 1.0, true, 43);
    let dn = difference_norm(&u, 0.6, &DifferenceNormSpec::new(1, 50.0)).unwrap();
    assert!(rel(dn.value, u.sobolev_norm_sq(0.6)) < 1e-2);
}

#[test]
fn torus_gns_on_constants_and_random_fields() {
    let params = Gns::new(1, 1.0, 6.0).unwrap();
    let q = solve_ground_state(&params, &SolverOptions::default(), &SpectralGrid::new(1, 384, 64.0, Convention::TwoPi).unwrap())
        .unwrap();
    let g = torus(1, 16, Convention::Plain);
    let c_gns = torus_constant(&q, &g);
    let constant = SpectralField::from_modes(g, true, |n| {
        if n[0] == 0 {
            Complex::new(1.3, 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    let rep = verify_torus_gns(&constant, &params, c_gns, 0.05, 1.0).unwrap();
    assert!(rel(rep.lhs, 1.3f64.powi(6)) < 1e-12);
    assert!(rep.margin >= -1e-12 * rep.lhs);

    let corpus: Vec<_> = (0..1000).map(|i| random_field(g, 16, 1.0, true, 1000 + i)).collect();
    let (fit, test) = corpus.split_at(500);
    let c_delta = fit_c_delta(fit, &params, c_gns, 0.05).unwrap();
    let all = fit_c_delta(&corpus, &params, c_gns, 0.05).unwrap();
    assert!(c_delta >= 1.0 && all >= c_delta);
    for u in test.iter().chain(fit) {
        let rep = verify_torus_gns(u, &params, c_gns, 0.05, all).unwrap();
        assert!(rep.margin >= -1e-9 * rep.lhs.max(1.0));
    }
}

#[test]
fn periodised_soliton_nearly_saturates() {
    let params = Gns::new(1, 1.0, 6.0).unwrap();
    let q = solve_ground_state(&params, &SolverOptions::default(), &SpectralGrid::new(1, 384, 64.0, Convention::TwoPi).unwrap())
        .unwrap();
    let rho = 0.05;
    let g = torus(1, 2048, Convention::Plain);
    let c_gns = torus_constant(&q, &g);
    // The minimiser for |ξ| is x ↦ Q(2πx) when Q minimises for 2π|ξ|.
    let scale = 2.0 * std::f64::consts::PI / rho;
    let u = SpectralField::from_real_fn(g, |x| {
        (-1..=1)
            .map(|j| q.value_at(&[(x[0] + j as f64) * scale]))
            .sum::<f64>()
            * rho.powf(-0.5)
    });
    let rep = verify_torus_gns(&u, &params, c_gns, 0.05, 1.0).unwrap();
    assert!(rep.margin >= 0.0);
    assert!(rep.margin < 0.1 * rep.lhs, "margin {} lhs {}", rep.margin, rep.lhs);
}

#[test]
fn restriction_of_gaussian_bump() {
    let g = SpectralGrid::new(1, 256, 8.0, Convention::Plain).unwrap();
    let u = SpectralField::from_real_fn(g, |x: &[f64]| (-x[0] * x[0] / 0.5).exp());
    let cmp = restriction_comparison(&u, 1.0, 0.0).unwrap();
    assert!(cmp.torus_norm < cmp.line_norm);
    assert!(cmp.torus_le_line);
}

#[test]
fn restriction_of_cell_supported_bump() {
    let g = SpectralGrid::new(1, 2048, 2.0, Convention::TwoPi).unwrap();
    let bump = |t: f64| if t.abs() < 1.0 { (-1.0f64 / (1.0 - t * t)).exp() } else { 0.0 };
    let u = SpectralField::from_real_fn(g, |x| bump(x[0] / 0.1));
    let cmp = restriction_comparison(&u, 1.0, 1e-6).unwrap();
    assert!(rel(cmp.torus_norm, cmp.line_norm) < 1e-6, "{cmp:?}");
    let zero = SpectralField::zeros(g);
    let z = restriction_comparison(&zero, 1.0, 0.0).unwrap();
    assert_eq!((z.torus_norm, z.line_norm), (0.0, 0.0));
}
