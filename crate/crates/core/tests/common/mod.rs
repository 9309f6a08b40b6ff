//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use gibbs_core::spectral::{Convention, SpectralField, SpectralGrid};
use gibbs_core::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::function::gamma::gamma;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Simpson over `[a, b]` split into `pieces` equal panels.
pub fn simpson_pieces(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| simpson(f, a + i as f64 * h, a + (i + 1) as f64 * h, tol / pieces as f64))
        .sum()
}

/// `∫_0^∞ (1 - cos(a y)) y^{-1-2s} dy` for `0 < s < 1`, continued analytically.
fn one_minus_cos(a: f64, s: f64) -> f64 {
    a.powf(2.0 * s) * PI / (2.0 * gamma(1.0 + 2.0 * s) * (PI * s).sin())
}

/// `∫_R |e^{2πiy} - 1|^{2k} |y|^{-1-2s} dy` in one dimension, `k ∈ {1, 2}`.
pub fn c_k_line(k: u32, s: f64) -> f64 {
    let tau = 2.0 * PI;
    match k {
        // |e^{iθ} - 1|² = 2(1 - cos θ)
        1 => 4.0 * one_minus_cos(tau, s),
        // |e^{iθ} - 1|⁴ = 8(1 - cos θ) - 2(1 - cos 2θ)
        2 => 2.0 * (8.0 * one_minus_cos(tau, s) - 2.0 * one_minus_cos(2.0 * tau, s)),
        _ => panic!("only k = 1, 2"),
    }
}

/// Monte Carlo `P(Σ_{0<|n|≤N} |n|^{-2s} |g_n|² ≤ K²)` for a 1-d Plain
/// torus, using `|g|² ~ Exp(1)` for a standard complex Gaussian.
pub fn chi_square_cutoff(modes: usize, s: f64, k: f64, draws: usize, seed: u64) -> (f64, f64) {
    let weights: Vec<f64> = (1..=modes).map(|n| (n as f64).powf(-2.0 * s)).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let k2 = k * k;
    let mut hits = 0usize;
    for _ in 0..draws {
        let mut sum = 0.0;
        for w in &weights {
            for _ in 0..2 {
                let u: f64 = rng.random();
                sum += w * -(1.0 - u).ln();
            }
            if sum > k2 {
                break;
            }
        }
        if sum <= k2 {
            hits += 1;
        }
    }
    let p = hits as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

pub fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Ground state of `Q'' - Q + Q^5 = 0`.
pub fn quintic_soliton(x: f64) -> f64 {
    3f64.powf(0.25) * sech(2.0 * x).sqrt()
}

/// Ground state of `Q'' - Q + Q^3 = 0`.
pub fn cubic_soliton(x: f64) -> f64 {
    2f64.sqrt() * sech(x)
}

/// Direct trigonometric sum `Σ û(n) e^{i c n·x / L}`.
pub fn direct_eval(u: &SpectralField<f64>, x: &[f64]) -> Complex<f64> {
    let g = u.grid();
    let c = 2.0 * PI / g.box_side();
    (0..g.len())
        .map(|i| {
            let n = g.mode(i);
            let phase: f64 = (0..g.dim()).map(|k| n[k] as f64 * x[k]).sum::<f64>() * c;
            u.coeffs()[i] * Complex::from_polar(1.0, phase)
        })
        .sum()
}

/// Real-space stencil `Σ_j (-1)^{k-j} C(k, j) u(x + j y)`.
pub fn stencil(u: &SpectralField<f64>, x: &[f64], y: &[f64], k: u32) -> Complex<f64> {
    let mut binom = 1.0;
    let mut acc = Complex::new(0.0, 0.0);
    for j in 0..=k {
        if j > 0 {
            binom = binom * (k - j + 1) as f64 / j as f64;
        }
        let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
        let pt: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + j as f64 * b).collect();
        acc += direct_eval(u, &pt) * (sign * binom);
    }
    acc
}

/// Field with independent coefficients on `|n|_∞ ≤ band` decaying like
/// `(1 + |n|)^{-decay}`.
pub fn random_field(grid: SpectralGrid<f64>, band: usize, decay: f64, real: bool, seed: u64) -> SpectralField<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let b = band as i64;
    let mut u = SpectralField::from_modes(grid, real, |n| {
        let (re, im): (f64, f64) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        if n.iter().all(|v| v.abs() <= b) {
            let r = n.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
            Complex::new(re, im) * (1.0 + r).powf(-decay)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    if real {
        u.enforce_real();
    }
    u
}

pub fn torus(d: usize, n: usize, c: Convention) -> SpectralGrid<f64> {
    SpectralGrid::torus(d, n, c).unwrap()
}
