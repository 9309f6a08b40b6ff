//! Difference-quotient form of `Ḣ^s` and the torus GNS inequality.
//!
//! For `k > s`,
//!
//! ```text
//! ‖u‖²_{Ḣ^s} = c_k(d,s)^{-1} ∫∫ |Δ_y^k u(x)|² / |y|^{d+2s} dx dy,
//! c_k(d,s)   = ∫ |e^{2πi x₁} - 1|^{2k} / |x|^{d+2s} dx,
//! ```
//!
//! where `Δ_y u(x) = u(x+y) - u(x)`. On the torus the `x`-integral is done
//! exactly in Fourier space; the `y`-integral uses radial Gauss–Legendre
//! panels, a closed-form correction near `y = 0` and a tail term beyond
//! `|y| = R`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ground_state::{GnsParameters, GroundStateProfile};
use crate::quadrature::gauss_legendre_on;
use crate::spectral::{Convention, SpectralField, SpectralGrid};
use crate::{Error, Real, Result};

/// `Δ_y^k u`, i.e. `û(n) ↦ (e^{2πi n·y/L} - 1)^k û(n)`.
pub fn forward_difference<R: Real>(u: &SpectralField<R>, y: &[R], k: u32) -> Result<SpectralField<R>> {
    if k == 0 {
        return Err(Error::param("k", "difference order must be at least 1"));
    }
    let grid = u.grid();
    let tau = R::TAU() / grid.box_side();
    let one = Complex::new(R::one(), R::zero());
    Ok(SpectralField::from_modes(*grid, u.is_real(), |n| {
        let phase = (0..grid.dim()).fold(R::zero(), |acc, j| acc + R::lit(n[j] as f64) * y[j]);
        let factor = (Complex::from_polar(R::one(), tau * phase) - one).powu(k);
        u.coeff(&n) * factor
    }))
}

/// Quadrature for the `y`-integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferenceNormSpec {
    pub k: u32,
    /// Outer radius `R`.
    pub radius: f64,
    /// Gauss–Legendre nodes per radial panel.
    pub nodes: usize,
    /// Below this radius the integrand is replaced by its leading term.
    pub inner_radius: f64,
    /// Log-spaced panels per decade between `inner_radius` and the first
    /// oscillation scale.
    pub panels_per_decade: usize,
}

impl DifferenceNormSpec {
    pub fn new(k: u32, radius: f64) -> Self {
        DifferenceNormSpec {
            k,
            radius,
            nodes: 16,
            inner_radius: 1e-6,
            panels_per_decade: 2,
        }
    }

    /// Doubles the nodes and halves the panel widths.
    pub fn refined(&self) -> Self {
        DifferenceNormSpec {
            nodes: self.nodes * 2,
            panels_per_decade: self.panels_per_decade * 2,
            ..*self
        }
    }

    fn validate(&self, s: f64) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k", "difference order must be at least 1"));
        }
        if !(s > 0.0) || !(s < self.k as f64) {
            return Err(Error::param("s", format!("need 0 < s < k = {}, got {s}", self.k)));
        }
        if !(self.radius > self.inner_radius) || !(self.inner_radius > 0.0) {
            return Err(Error::param("R", "need 0 < inner radius < R"));
        }
        if self.nodes == 0 || self.panels_per_decade == 0 {
            return Err(Error::param("nodes", "quadrature needs nodes and panels"));
        }
        Ok(())
    }
}

/// Surface area of `S^{d-1}`.
pub fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("dimension {d} unsupported"),
    }
}

/// `∫_{S^{d-1}} ω₁^{2k} dω`.
fn sphere_moment(d: usize, k: u32) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => {
            let ratio = (1..=k).fold(1.0, |acc, j| acc * (2 * j - 1) as f64 / (2 * j) as f64);
            2.0 * PI * ratio
        }
        3 => 4.0 * PI / (2 * k + 1) as f64,
        _ => panic!("dimension {d} unsupported"),
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * (n - k + j) as f64 / j as f64)
}

/// Radial nodes `(r, w)` on `[inner, R]`: log-spaced panels up to `scale`,
/// then panels of width `scale`.
fn radial_nodes(spec: &DifferenceNormSpec, scale: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let first = scale.min(spec.radius);
    let decades = (first / spec.inner_radius).log10().max(0.0);
    let log_panels = ((decades * spec.panels_per_decade as f64).ceil() as usize).max(1);
    let ratio = (first / spec.inner_radius).powf(1.0 / log_panels as f64);
    let mut a = spec.inner_radius;
    for _ in 0..log_panels {
        let b = a * ratio;
        out.extend(gauss_legendre_on(spec.nodes, a, b.min(first)));
        a = b;
    }
    // Two panels per oscillation at the default density.
    let width = 2.0 * scale / spec.panels_per_decade as f64;
    let mut a = first;
    while a < spec.radius {
        let b = (a + width).min(spec.radius);
        out.extend(gauss_legendre_on(spec.nodes, a, b));
        a = b;
    }
    out
}

/// Directions `ω` with weights, resolving `e^{2πi freq ω·e}` on the sphere.
/// Azimuths use the trapezoidal rule, which is spectrally accurate for
/// periodic integrands; polar cosines use Gauss–Legendre.
fn angular_nodes(d: usize, freq: f64, base: usize) -> Vec<([f64; 3], f64)> {
    use std::f64::consts::TAU;
    let count = (TAU * freq).ceil() as usize + base;
    let azimuths = |n: usize| (0..n).map(move |j| (TAU * j as f64 / n as f64, TAU / n as f64));
    match d {
        1 => vec![([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)],
        2 => azimuths(count).map(|(t, w)| ([t.cos(), t.sin(), 0.0], w)).collect(),
        3 => {
            let mut out = Vec::new();
            for (z, wz) in gauss_legendre_on(count, -1.0, 1.0) {
                let rho = (1.0 - z * z).sqrt();
                for (phi, wp) in azimuths(count) {
                    out.push(([rho * phi.cos(), rho * phi.sin(), z], wz * wp));
                }
            }
            out
        }
        _ => panic!("dimension {d} unsupported"),
    }
}

/// Nodes for `∫_{S^{d-1}} f(ω₁) dω`. In three dimensions `ω₁` is uniform on
/// `[-1, 1]` with density `2π`.
fn first_coordinate_nodes(d: usize, freq: f64, base: usize) -> Vec<(f64, f64)> {
    match d {
        3 => {
            let n = (std::f64::consts::TAU * freq).ceil() as usize + base;
            gauss_legendre_on(n, -1.0, 1.0)
                .into_iter()
                .map(|(t, w)| (t, std::f64::consts::TAU * w))
                .collect()
        }
        _ => angular_nodes(d, freq, base).into_iter().map(|(om, w)| (om[0], w)).collect(),
    }
}

/// `c_k(d, s)` with its tail accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CkValue {
    /// Quadrature on `[inner, R]` plus small-`r` term plus tail estimate.
    pub value: f64,
    /// Mean-value estimate of the part beyond `R`, included in `value`.
    pub tail_estimate: f64,
    /// Rigorous bound on the part beyond `R` from `|e^{iθ} - 1| ≤ 2`.
    pub tail_bound: f64,
}

/// `c_k(d,s) = ∫_{R^d} |e^{2πi x₁} - 1|^{2k} / |x|^{d+2s} dx`.
pub fn c_k_constant(d: usize, s: f64, spec: &DifferenceNormSpec) -> Result<CkValue> {
    if !(1..=3).contains(&d) {
        return Err(Error::param("d", format!("dimension must be 1, 2 or 3, got {d}")));
    }
    spec.validate(s)?;
    let k = spec.k;
    let radial = radial_nodes(spec, 1.0 / k as f64);
    let body: f64 = radial
        .par_iter()
        .map(|&(r, w)| {
            let ang: f64 = first_coordinate_nodes(d, r * k as f64, 16)
                .iter()
                .map(|(x1, wa)| wa * (4.0 * (std::f64::consts::PI * r * x1).sin().powi(2)).powi(k as i32))
                .sum();
            w * ang * r.powf(-1.0 - 2.0 * s)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let tau = std::f64::consts::TAU;
    let small = tau.powi(2 * k as i32) * sphere_moment(d, k) * spec.inner_radius.powf(2.0 * (k as f64 - s))
        / (2.0 * (k as f64 - s));
    let tail_scale = sphere_area(d) * spec.radius.powf(-2.0 * s) / (2.0 * s);
    let tail_estimate = binomial(2 * k, k) * tail_scale;
    Ok(CkValue {
        value: body + small + tail_estimate,
        tail_estimate,
        tail_bound: 4f64.powi(k as i32) * tail_scale,
    })
}

/// Difference-quotient seminorm squared, split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferenceNorm {
    /// Total: quadrature part plus tail estimate, divided by `c_k`.
    pub value: f64,
    pub tail_estimate: f64,
    pub tail_bound: f64,
    pub c_k: f64,
}

/// `c_k^{-1} ∫∫ |Δ_y^k u|² / |y|^{d+2s} dx dy` on the torus.
///
/// The integral equals `Σ |n|^{2s} |û(n)|²`; on a [`Convention::TwoPi`]
/// grid the result is multiplied by `(2π)^{2s}` so that it is directly
/// comparable with [`SpectralField::sobolev_norm_sq`] under the grid's own
/// convention.
pub fn difference_norm<R: Real>(u: &SpectralField<R>, s: f64, spec: &DifferenceNormSpec) -> Result<DifferenceNorm> {
    spec.validate(s)?;
    let grid = u.grid();
    if grid.box_side() != R::one() {
        return Err(Error::GridMismatch("difference norm is defined on the unit torus".into()));
    }
    let d = grid.dim();
    let ck = c_k_constant(d, s, spec)?;
    let k = spec.k;
    let live: Vec<([f64; 3], f64)> = (0..grid.len())
        .filter(|&i| i != grid.zero_index())
        .filter_map(|i| {
            let w = u.coeffs()[i].norm_sqr().as_f64();
            let n = grid.mode(i);
            (w > 0.0).then_some(([n[0] as f64, n[1] as f64, n[2] as f64], w))
        })
        .collect();
    let mass: f64 = live.iter().map(|(_, w)| w).sum();
    let top = live
        .iter()
        .map(|(n, _)| n.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(DifferenceNorm {
            value: 0.0,
            tail_estimate: 0.0,
            tail_bound: 0.0,
            c_k: ck.value,
        });
    }
    let radial = radial_nodes(spec, 1.0 / (k as f64 * top));
    let pi = std::f64::consts::PI;
    let body: f64 = radial
        .par_iter()
        .map(|&(r, w)| {
            let ang: f64 = angular_nodes(d, r * k as f64 * top, 16)
                .iter()
                .map(|(om, wa)| {
                    let x: f64 = live
                        .iter()
                        .map(|(n, c)| {
                            let dot = n[0] * om[0] + n[1] * om[1] + n[2] * om[2];
                            c * (4.0 * (pi * r * dot).sin().powi(2)).powi(k as i32)
                        })
                        .sum();
                    wa * x
                })
                .sum();
            w * ang * r.powf(-1.0 - 2.0 * s)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let small: f64 = {
        let moment = sphere_moment(d, k);
        let sum: f64 = live
            .iter()
            .map(|(n, c)| c * n.iter().map(|v| v * v).sum::<f64>().powi(k as i32))
            .sum();
        // Leading term (2π r n·ω)^{2k}; the angular average of (n·ω)^{2k}
        // equals |n|^{2k} times that of ω₁^{2k}.
        std::f64::consts::TAU.powi(2 * k as i32) * moment * sum * spec.inner_radius.powf(2.0 * (k as f64 - s))
            / (2.0 * (k as f64 - s))
    };
    let tail_scale = sphere_area(d) * spec.radius.powf(-2.0 * s) / (2.0 * s) * mass;
    let tail_estimate = binomial(2 * k, k) * tail_scale;
    let tail_bound = 4f64.powi(k as i32) * tail_scale;
    let factor = match grid.convention() {
        Convention::TwoPi => std::f64::consts::TAU.powf(2.0 * s),
        Convention::Plain => 1.0,
    };
    let scale = factor / ck.value;
    Ok(DifferenceNorm {
        value: (body + small + tail_estimate) * scale,
        tail_estimate: tail_estimate * scale,
        tail_bound: tail_bound * scale,
        c_k: ck.value,
    })
}

/// One evaluation of the torus GNS inequality
/// `‖u‖^p_{L^p} ≤ (C_GNS + δ)‖u‖^a_{Ḣ^s}‖u‖^b_{L²} + C(δ)‖u‖^p_{L²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGnsReport {
    pub lhs: f64,
    /// `‖u‖^a_{Ḣ^s}‖u‖^b_{L²}`.
    pub middle: f64,
    /// `‖u‖^p_{L²}`.
    pub mass_term: f64,
    pub rhs: f64,
    pub margin: f64,
    pub c_gns: f64,
    pub delta: f64,
    pub c_delta: f64,
}

fn gns_parts<R: Real>(u: &SpectralField<R>, params: &GnsParameters<R>) -> Result<(f64, f64, f64)> {
    let p = params.p();
    let lhs = u.lp_integral(p)?.as_f64();
    let middle = (u.sobolev_norm(params.s()).powf(params.a()) * u.l2_norm().powf(params.b())).as_f64();
    let mass_term = u.l2_norm().powf(p).as_f64();
    Ok((lhs, middle, mass_term))
}

/// `C_GNS` of `profile` converted to the convention of `grid`.
pub fn torus_constant<R: Real>(profile: &GroundStateProfile<R>, grid: &SpectralGrid<R>) -> f64 {
    profile.sharp_constant_in(grid.convention()).as_f64()
}

pub fn verify_torus_gns<R: Real>(
    u: &SpectralField<R>,
    params: &GnsParameters<R>,
    c_gns: f64,
    delta: f64,
    c_delta: f64,
) -> Result<TorusGnsReport> {
    if !(delta > 0.0) {
        return Err(Error::param("gns.delta", "need δ > 0"));
    }
    let (lhs, middle, mass_term) = gns_parts(u, params)?;
    let rhs = (c_gns + delta) * middle + c_delta * mass_term;
    Ok(TorusGnsReport {
        lhs,
        middle,
        mass_term,
        rhs,
        margin: rhs - lhs,
        c_gns,
        delta,
        c_delta,
    })
}

/// `max (LHS - (C_GNS + δ)·middle) / ‖u‖^p_{L²}` over a corpus, floored at 1.
pub fn fit_c_delta<R: Real>(
    corpus: &[SpectralField<R>],
    params: &GnsParameters<R>,
    c_gns: f64,
    delta: f64,
) -> Result<f64> {
    let mut best: f64 = 1.0;
    for u in corpus {
        let (lhs, middle, mass_term) = gns_parts(u, params)?;
        if mass_term > 0.0 {
            best = best.max((lhs - (c_gns + delta) * middle) / mass_term);
        }
    }
    Ok(best)
}

/// Torus and whole-space `Ḣ^s` norms of a box field and its periodisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictionComparison {
    pub torus_norm: f64,
    pub line_norm: f64,
    pub torus_le_line: bool,
}

/// Compares `‖Σ_j u(·+j)‖_{Ḣ^s(T^d)}` with `‖u‖_{Ḣ^s(R^d)}` for a field on
/// a box of integer side `L`; both use the grid's symbol convention. The
/// periodisation has coefficients `L^d û(nL)`.
pub fn restriction_comparison<R: Real>(u: &SpectralField<R>, s: R, rel_tol: f64) -> Result<RestrictionComparison> {
    let grid = u.grid();
    let l = grid.box_side().as_f64();
    if l.fract() != 0.0 || l < 1.0 {
        return Err(Error::param("L", format!("box side must be a positive integer, got {l}")));
    }
    let li = l as i64;
    let line = u.sobolev_norm(s).as_f64();
    let factor = grid.convention().factor::<R>().as_f64();
    let vol = l.powi(grid.dim() as i32);
    let s = s.as_f64();
    let torus_sq: f64 = (0..grid.len())
        .filter(|&i| i != grid.zero_index())
        .filter_map(|i| {
            let n = grid.mode(i);
            n.iter().all(|v| v % li == 0).then(|| {
                let n_t: f64 = n.iter().map(|v| ((v / li) as f64).powi(2)).sum::<f64>().sqrt();
                (factor * n_t).powf(2.0 * s) * u.coeffs()[i].norm_sqr().as_f64() * vol * vol
            })
        })
        .sum();
    let torus = torus_sq.sqrt();
    Ok(RestrictionComparison {
        torus_norm: torus,
        line_norm: line,
        torus_le_line: torus <= line * (1.0 + rel_tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_period_shift_negates_single_mode() {
        let g = SpectralGrid::<f64>::torus(1, 3, Convention::TwoPi).unwrap();
        let u = SpectralField::from_modes(g, false, |n| {
            if n[0] == 1 {
                Complex::new(1.0, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        let v = forward_difference(&u, &[0.5], 1).unwrap();
        assert!((v.coeff(&[1]) - Complex::new(-2.0, 0.0)).norm() < 1e-15);
        assert!(forward_difference(&u, &[0.5], 0).is_err());
    }

    #[test]
    fn constant_differences_vanish() {
        let g = SpectralGrid::<f64>::torus(2, 3, Convention::Plain).unwrap();
        let u = SpectralField::from_modes(g, true, |n| {
            if n == [0, 0, 0] {
                Complex::new(2.0, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        for k in 1..4 {
            let v = forward_difference(&u, &[0.3, 0.1], k).unwrap();
            assert!(v.l2_norm() == 0.0);
        }
        let r = difference_norm(&u, 0.5, &DifferenceNormSpec::new(1, 10.0)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn bad_orders_rejected() {
        assert!(c_k_constant(1, 1.0, &DifferenceNormSpec::new(1, 10.0)).is_err());
        assert!(c_k_constant(1, 0.0, &DifferenceNormSpec::new(1, 10.0)).is_err());
        assert!(c_k_constant(1, 1.5, &DifferenceNormSpec::new(2, 10.0)).is_ok());
    }

    #[test]
    fn sphere_moments() {
        assert!((sphere_moment(2, 1) - std::f64::consts::PI).abs() < 1e-15);
        assert!((sphere_moment(3, 1) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-15);
        assert_eq!(binomial(4, 2), 6.0);
    }

    #[test]
    fn constant_field_satisfies_torus_gns() {
        let g = SpectralGrid::<f64>::torus(1, 4, Convention::Plain).unwrap();
        let params = GnsParameters::new(1, 1.0, 6.0).unwrap();
        let u = SpectralField::from_modes(g, true, |n| {
            if n[0] == 0 {
                Complex::new(1.7, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        let r = verify_torus_gns(&u, &params, 16.0, 0.05, 1.0).unwrap();
        assert_eq!(r.middle, 0.0);
        assert!((r.lhs - r.mass_term).abs() < 1e-12 * r.lhs);
        assert!(r.margin >= -1e-12 * r.lhs);
    }

    #[test]
    fn zero_field_restriction() {
        let g = SpectralGrid::<f64>::new(1, 16, 4.0, Convention::TwoPi).unwrap();
        let r = restriction_comparison(&SpectralField::zeros(g), 1.0, 1e-9).unwrap();
        assert_eq!((r.torus_norm, r.line_norm), (0.0, 0.0));
        let bad = SpectralGrid::<f64>::new(1, 16, 4.5, Convention::TwoPi).unwrap();
        assert!(restriction_comparison(&SpectralField::zeros(bad), 1.0, 1e-9).is_err());
    }
}
