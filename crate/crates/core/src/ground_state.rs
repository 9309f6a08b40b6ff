//! Weinstein functional, its minimiser and the sharp GNS constant.
//!
//! For admissible `(d, s, p)`
//!
//! ```text
//! J(u) = ‖u‖_{Ḣ^s}^a ‖u‖_{L²}^b / ‖u‖_{L^p}^p,
//! a = (p-2)d/(2s),   b = 2 + (p-2)(2s-d)/(2s),
//! ```
//!
//! and `C_GNS = 1 / min J`. Minimisers are normalised so that
//! `‖Q‖_{L²} = ‖Q‖_{Ḣ^s}` and `‖Q‖²_{Ḣ^s} = (2/p)‖Q‖^p_{L^p}`, which makes
//! `C_GNS = (p/2)‖Q‖^{2-p}_{L²}`.
//!
//! Profiles live on a large periodic box with the [`Convention::TwoPi`]
//! symbol. The box side is not fixed: dilations `u(x) ↦ u(bx)` are
//! performed exactly by keeping the coefficients and dividing `L` by `b`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::spectral::{Convention, SpectralField, SpectralGrid};
use crate::{Error, Real, Result};

/// Exponents `(d, s, p)` of the GNS inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnsParameters<R> {
    dim: usize,
    s: R,
    p: R,
}

impl<R: Real> GnsParameters<R> {
    /// Requires `p > 2`, and `p ≤ 2d/(d-2s)` when `d > 2s`.
    pub fn new(dim: usize, s: R, p: R) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::param("d", format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if !(s > R::zero()) || !s.is_finite() {
            return Err(Error::param("s", format!("need s > 0, got {s}")));
        }
        if !(p > R::lit(2.0)) || !p.is_finite() {
            return Err(Error::param("p", format!("need p > 2, got {p}")));
        }
        let d = R::count(dim);
        if d > s + s {
            let endpoint = d + d / (d - s - s);
            if p > endpoint {
                return Err(Error::param(
                    "p",
                    format!("need p <= 2d/(d-2s) = {endpoint} when d > 2s, got {p}"),
                ));
            }
        }
        Ok(GnsParameters { dim, s, p })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> R {
        self.s
    }

    pub fn p(&self) -> R {
        self.p
    }

    /// Exponent of `‖u‖_{Ḣ^s}` in `J`.
    pub fn a(&self) -> R {
        (self.p - R::lit(2.0)) * R::count(self.dim) / (self.s + self.s)
    }

    /// Exponent of `‖u‖_{L²}` in `J`.
    pub fn b(&self) -> R {
        let d = R::count(self.dim);
        R::lit(2.0) + (self.p - R::lit(2.0)) * (self.s + self.s - d) / (self.s + self.s)
    }

    /// `4s/d + 2`.
    pub fn critical_p(&self) -> R {
        R::lit(4.0) * self.s / R::count(self.dim) + R::lit(2.0)
    }

    pub fn is_critical(&self) -> bool {
        (self.p - self.critical_p()).abs() <= R::lit(1e-12) * self.p
    }
}

fn check_grid<R: Real>(grid: &SpectralGrid<R>, dim: usize) -> Result<()> {
    if grid.dim() != dim {
        return Err(Error::GridMismatch(format!(
            "grid has dimension {}, parameters {}",
            grid.dim(),
            dim
        )));
    }
    Ok(())
}

/// The three integrals entering `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Norms<R> {
    /// `‖u‖²_{Ḣ^s}`.
    h: R,
    /// `‖u‖²_{L²}`.
    m: R,
    /// `∫|u|^p`.
    pint: R,
}

fn norms<R: Real>(u: &SpectralField<R>, params: &GnsParameters<R>) -> Norms<R> {
    Norms {
        h: u.sobolev_norm_sq(params.s),
        m: u.l2_norm_sq(),
        pint: u.lp_integral(params.p).expect("p > 2"),
    }
}

fn log_j<R: Real>(n: &Norms<R>, params: &GnsParameters<R>) -> R {
    let half = R::lit(0.5);
    params.a() * half * n.h.ln() + params.b() * half * n.m.ln() - n.pint.ln()
}

/// `J(u)`; rejects the zero field and fields with vanishing `Ḣ^s` part.
pub fn weinstein_functional<R: Real>(u: &SpectralField<R>, params: &GnsParameters<R>) -> Result<R> {
    check_grid(u.grid(), params.dim)?;
    let n = norms(u, params);
    if n.m == R::zero() || n.pint == R::zero() {
        return Err(Error::param("u", "the Weinstein functional is undefined at u = 0"));
    }
    Ok(log_j(&n, params).exp())
}

/// Coefficients of `|u|^{p-2}u` on the lattice, dealiased for integer `p`.
fn nonlinearity<R: Real>(u: &SpectralField<R>, p: R) -> SpectralField<R> {
    let points = u.grid().quadrature_points(p.as_f64());
    let exp = (p - R::lit(2.0)) / R::lit(2.0);
    let samples: Vec<Complex<R>> = u
        .to_samples(points)
        .into_iter()
        .map(|v| {
            let sq = v.norm_sqr();
            if sq == R::zero() {
                v
            } else {
                v * sq.powf(exp)
            }
        })
        .collect();
    let mut out = SpectralField::from_samples(*u.grid(), samples, points).expect("oversampled grid");
    if u.is_real() {
        out.enforce_real();
    }
    out
}

/// `∇ log J` in the `L²` pairing:
/// `a D^{2s}u/H + b u/M - p|u|^{p-2}u/P`.
fn gradient<R: Real>(u: &SpectralField<R>, n: &Norms<R>, params: &GnsParameters<R>) -> SpectralField<R> {
    let grid = *u.grid();
    let nl = nonlinearity(u, params.p);
    let two_s = params.s + params.s;
    let (ka, kb, kp) = (params.a() / n.h, params.b() / n.m, params.p / n.pint);
    let z = grid.zero_index();
    let coeffs = u
        .coeffs()
        .iter()
        .zip(nl.coeffs())
        .enumerate()
        .map(|(i, (c, w))| {
            let sym = if i == z { R::zero() } else { grid.multiplier(i).powf(two_s) };
            *c * (ka * sym + kb) - *w * kp
        })
        .collect();
    SpectralField::from_coeffs(grid, coeffs, u.is_real()).expect("same lattice")
}

fn inner<R: Real>(a: &SpectralField<R>, b: &SpectralField<R>) -> R {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .fold(R::zero(), |acc, (x, y)| acc + x.re * y.re + x.im * y.im)
        * a.grid().volume()
}

fn axpy<R: Real>(u: &SpectralField<R>, t: R, d: &SpectralField<R>) -> SpectralField<R> {
    let coeffs = u.coeffs().iter().zip(d.coeffs()).map(|(a, b)| *a + *b * t).collect();
    SpectralField::from_coeffs(*u.grid(), coeffs, u.is_real() && d.is_real()).expect("same lattice")
}

fn precondition<R: Real>(g: &SpectralField<R>, s: R) -> SpectralField<R> {
    let grid = *g.grid();
    let two_s = s + s;
    let coeffs = g
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| *c / (R::one() + grid.multiplier(i).powf(two_s)))
        .collect();
    SpectralField::from_coeffs(grid, coeffs, g.is_real()).expect("same lattice")
}

/// Dilates so that `‖u‖_{Ḣ^s} = ‖u‖_{L²}`, then scales to unit mass.
fn unit_balanced<R: Real>(u: &SpectralField<R>, s: R) -> Result<SpectralField<R>> {
    let (h, m) = (u.sobolev_norm_sq(s), u.l2_norm_sq());
    let b = (m / h).powf(R::one() / (s + s));
    let v = u.with_box_side(u.grid().box_side() / b)?;
    Ok(v.scale(v.l2_norm().recip()))
}

/// Scales a candidate to unit `Ḣ^s`/`L²` balance and the minimiser mass.
fn normalized_minimiser<R: Real>(u: &SpectralField<R>, params: &GnsParameters<R>) -> Result<SpectralField<R>> {
    let v = unit_balanced(u, params.s)?;
    let n = norms(&v, params);
    let c = (params.p / R::lit(2.0) * n.m / n.pint).powf(R::one() / (params.p - R::lit(2.0)));
    let mut w = v.scale(c);
    // Sign alignment: the largest value is made positive.
    let peak = w
        .to_samples(w.grid().quadrature_points(2.0))
        .into_iter()
        .fold(Complex::new(R::zero(), R::zero()), |best, v| if v.norm() > best.norm() { v } else { best });
    if peak.re < R::zero() {
        w = w.scale(-R::one());
    }
    Ok(w)
}

/// Checks `‖Q‖_{L²} = ‖Q‖_{Ḣ^s}` and `‖Q‖²_{Ḣ^s} = (2/p)‖Q‖^p_{L^p}` to `1e-8`.
pub fn check_normalized<R: Real>(q: &SpectralField<R>, params: &GnsParameters<R>) -> Result<()> {
    let n = norms(q, params);
    let tol = R::lit(1e-8);
    let e1 = (n.m - n.h).abs() / n.h;
    let e2 = (n.h - R::lit(2.0) / params.p * n.pint).abs() / n.h;
    if !(e1 <= tol && e2 <= tol) || n.h == R::zero() {
        return Err(Error::NotNormalized(format!(
            "relative defects {} (L² vs Ḣ^s) and {} (Ḣ^s vs L^p)",
            e1, e2
        )));
    }
    Ok(())
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Threshold on `‖∇ log J‖_{L²}` at unit mass, i.e. gradient relative to `J`.
    pub gradient_tol: f64,
    pub residual_tol: f64,
    /// First trial step of the line search.
    pub flow_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 5000,
            gradient_tol: 1e-9,
            residual_tol: 1e-6,
            flow_step: 1.0,
        }
    }
}

/// Normalised minimiser with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateProfile<R> {
    pub field: SpectralField<R>,
    pub params: GnsParameters<R>,
    /// `‖Q‖_{L²}`.
    pub l2_norm: R,
    /// `‖Q‖_{Ḣ^s}`.
    pub hs_norm: R,
    /// `‖Q‖_{L^p}`.
    pub lp_norm: R,
    pub c_gns: R,
    pub residual: R,
    pub gradient_norm: R,
    pub iterations: usize,
    pub converged: bool,
}

impl<R: Real> GroundStateProfile<R> {
    /// Normalises an arbitrary nonzero field and records its diagnostics;
    /// `converged` is left `false`.
    pub fn from_field(field: &SpectralField<R>, params: &GnsParameters<R>) -> Result<Self> {
        check_grid(field.grid(), params.dim)?;
        if field.l2_norm() == R::zero() {
            return Err(Error::param("u", "cannot normalise the zero field"));
        }
        let mut q = field.clone();
        q.enforce_real();
        let q = normalized_minimiser(&q, params)?;
        Ok(Self::assemble(q, params, 0, false))
    }

    fn assemble(q: SpectralField<R>, params: &GnsParameters<R>, iterations: usize, converged: bool) -> Self {
        let n = norms(&q, params);
        let unit = unit_balanced(&q, params.s).expect("nonzero profile");
        let un = norms(&unit, params);
        let gradient_norm = gradient(&unit, &un, params).l2_norm();
        let residual = elliptic_residual(&q, params).unwrap_or(R::infinity());
        let l2 = n.m.sqrt();
        GroundStateProfile {
            l2_norm: l2,
            hs_norm: n.h.sqrt(),
            lp_norm: n.pint.powf(params.p.recip()),
            c_gns: params.p / R::lit(2.0) * l2.powf(R::lit(2.0) - params.p),
            residual,
            gradient_norm,
            iterations,
            converged,
            field: q,
            params: *params,
        }
    }

    /// `‖Q‖_{L²}` under another symbol convention: `Q(x) ↦ Q(2πx)` maps
    /// the normalised minimiser for `2π|ξ|` to the one for `|ξ|`.
    pub fn critical_mass(&self, convention: Convention) -> R {
        match convention {
            Convention::TwoPi => self.l2_norm,
            Convention::Plain => self.l2_norm * R::TAU().powf(-R::count(self.params.dim) / R::lit(2.0)),
        }
    }

    /// `C_GNS` under another symbol convention.
    pub fn sharp_constant_in(&self, convention: Convention) -> R {
        let q = self.critical_mass(convention);
        self.params.p / R::lit(2.0) * q.powf(R::lit(2.0) - self.params.p)
    }

    /// `Q` at an arbitrary point; zero outside the box.
    pub fn value_at(&self, x: &[R]) -> R {
        let half = self.field.grid().box_side() / R::lit(2.0);
        if x.iter().any(|v| v.abs() >= half) {
            return R::zero();
        }
        self.field.evaluate(x).re
    }
}

/// `C_GNS = (p/2)‖Q‖^{2-p}_{L²}`.
pub fn sharp_constant<R: Real>(profile: &GroundStateProfile<R>) -> R {
    profile.c_gns
}

/// `‖(p-2)d D^{2s}Q + (4s + (p-2)(2s-d))Q - 4s|Q|^{p-2}Q‖_{L²} / ‖Q‖_{L²}`,
/// with the nonlinearity projected on the lattice.
pub fn elliptic_residual<R: Real>(q: &SpectralField<R>, params: &GnsParameters<R>) -> Result<R> {
    check_grid(q.grid(), params.dim)?;
    check_normalized(q, params)?;
    let grid = *q.grid();
    let d = R::count(params.dim);
    let two = R::lit(2.0);
    let four_s = R::lit(4.0) * params.s;
    let c_kin = (params.p - two) * d;
    let c_lin = four_s + (params.p - two) * (params.s + params.s - d);
    let nl = nonlinearity(q, params.p);
    let two_s = params.s + params.s;
    let z = grid.zero_index();
    let sum = q
        .coeffs()
        .iter()
        .zip(nl.coeffs())
        .enumerate()
        .fold(R::zero(), |acc, (i, (c, w))| {
            let sym = if i == z { R::zero() } else { grid.multiplier(i).powf(two_s) };
            acc + (*c * (c_kin * sym + c_lin) - *w * four_s).norm_sqr()
        });
    Ok((sum * grid.volume()).sqrt() / q.l2_norm())
}

/// Minimises `J` from a Gaussian bump `exp(-|x|²/2)` centred in the box.
pub fn solve_ground_state<R: Real>(
    params: &GnsParameters<R>,
    options: &SolverOptions,
    grid: &SpectralGrid<R>,
) -> Result<GroundStateProfile<R>> {
    check_grid(grid, params.dim)?;
    let half = R::lit(0.5);
    let start = SpectralField::from_real_fn(*grid, |x| (-half * x.iter().fold(R::zero(), |a, v| a + *v * *v)).exp());
    solve_from(&start, params, options)
}

/// Minimises `J` by preconditioned nonlinear conjugate gradients on
/// `log J`, renormalising scale and mass after every step.
pub fn solve_from<R: Real>(
    start: &SpectralField<R>,
    params: &GnsParameters<R>,
    options: &SolverOptions,
) -> Result<GroundStateProfile<R>> {
    check_grid(start.grid(), params.dim)?;
    if start.grid().convention() != Convention::TwoPi {
        return Err(Error::param(
            "convention",
            "ground states are computed with the 2π|ξ| symbol; convert afterwards",
        ));
    }
    if start.l2_norm() == R::zero() {
        return Err(Error::param("u", "cannot start from the zero field"));
    }
    let s = params.s;
    let mut u = start.clone();
    u.enforce_real();
    let mut u = unit_balanced(&u, s)?;
    let mut n = norms(&u, params);
    let mut f = log_j(&n, params);
    let mut g = gradient(&u, &n, params);
    let mut z = precondition(&g, s);
    let mut dir = z.scale(-R::one());
    let mut step = R::lit(options.flow_step);
    let grad_tol = R::lit(options.gradient_tol);
    let res_tol = R::lit(options.residual_tol);
    let mut iterations = 0;
    let mut converged = false;
    let roundoff = R::epsilon() * R::lit(64.0);

    loop {
        let gnorm = g.l2_norm();
        if gnorm < grad_tol {
            let q = normalized_minimiser(&u, params)?;
            if elliptic_residual(&q, params)? < res_tol {
                converged = true;
                break;
            }
        }
        if iterations >= options.max_iter {
            break;
        }
        iterations += 1;

        // Remove the radial component; J is constant along it.
        let radial = inner(&dir, &u) / inner(&u, &u);
        dir = axpy(&dir, -radial, &u);
        let mut slope = inner(&g, &dir);
        if !(slope < R::zero()) {
            dir = z.scale(-R::one());
            let radial = inner(&dir, &u) / inner(&u, &u);
            dir = axpy(&dir, -radial, &u);
            slope = inner(&g, &dir);
        }

        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = axpy(&u, t, &dir);
            let tn = norms(&trial, params);
            let tf = log_j(&tn, params);
            let predicted = -slope * t;
            let ok = if predicted > roundoff * f.abs().max(R::one()) {
                tf <= f + R::lit(1e-4) * slope * t
            } else {
                // Below roundoff in J: accept when the gradient shrinks.
                gradient(&trial, &tn, params).l2_norm() < gnorm
            };
            if ok && tf.is_finite() {
                accepted = Some(trial);
                break;
            }
            t = t * half_r();
        }
        let Some(trial) = accepted else {
            break;
        };
        step = (t * R::lit(2.0)).min(R::lit(options.flow_step) * R::lit(16.0));

        let mut next = unit_balanced(&trial, s)?;
        next.enforce_real();
        let nn = norms(&next, params);
        let ng = gradient(&next, &nn, params);
        let nz = precondition(&ng, s);
        // Polak–Ribière with restart.
        let denom = inner(&g, &z);
        let beta = if denom > R::zero() {
            ((inner(&ng, &nz) - inner(&g, &nz)) / denom).max(R::zero())
        } else {
            R::zero()
        };
        let scale = next.l2_norm() / trial.l2_norm();
        let carried = SpectralField::from_coeffs(*next.grid(), dir.coeffs().to_vec(), dir.is_real())?.scale(scale);
        dir = axpy(&nz.scale(-R::one()), beta, &carried);
        u = next;
        n = nn;
        f = log_j(&n, params);
        g = ng;
        z = nz;
    }

    let q = normalized_minimiser(&u, params)?;
    Ok(GroundStateProfile::assemble(q, params, iterations, converged))
}

fn half_r<R: Real>() -> R {
    R::lit(0.5)
}

/// Best agreement of a profile with `c·f(b x)` after centring on the
/// profile's peak: returns `(c, b, ‖Q - c f(b·)‖/‖Q‖)` on the quadrature grid.
pub fn best_fit_error(profile: &GroundStateProfile<f64>, reference: impl Fn(&[f64]) -> f64) -> (f64, f64, f64) {
    let q = &profile.field;
    let grid = q.grid();
    let dim = grid.dim();
    let points = grid.quadrature_points(4.0);
    let axis = grid.axis_points(points);
    let samples = q.to_samples(points);
    let (imax, _) = samples
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v.re > acc.1 { (i, v.re) } else { acc });
    let mut center = vec![0.0; dim];
    let mut rest = imax;
    for k in (0..dim).rev() {
        center[k] = axis[rest % points];
        rest /= points;
    }
    refine_peak(q, &mut center);

    let coords: Vec<Vec<f64>> = (0..samples.len())
        .map(|flat| {
            let mut x = vec![0.0; dim];
            let mut rest = flat;
            for k in (0..dim).rev() {
                x[k] = axis[rest % points] - center[k];
                rest /= points;
            }
            x
        })
        .collect();
    let qv: Vec<f64> = samples.iter().map(|v| v.re).collect();
    let qq: f64 = qv.iter().map(|v| v * v).sum();
    let fit = |log_b: f64| -> (f64, f64) {
        let b = log_b.exp();
        let fv: Vec<f64> = coords
            .iter()
            .map(|x| {
                let bx: Vec<f64> = x.iter().map(|v| v * b).collect();
                reference(&bx)
            })
            .collect();
        let qf: f64 = qv.iter().zip(&fv).map(|(a, b)| a * b).sum();
        let ff: f64 = fv.iter().map(|v| v * v).sum();
        let c = qf / ff;
        let err2 = (qq - 2.0 * c * qf + c * c * ff).max(0.0);
        (c, (err2 / qq).sqrt())
    };
    // Golden-section search on log b.
    let (mut lo, mut hi) = (-1.5f64, 1.5f64);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = fit(x1).1;
    let mut f2 = fit(x2).1;
    for _ in 0..120 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = fit(x1).1;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = fit(x2).1;
        }
    }
    let log_b = 0.5 * (lo + hi);
    let (c, err) = fit(log_b);
    (c, log_b.exp(), err)
}

/// Newton iterations on `∂_k Q = 0`, one axis at a time.
fn refine_peak(q: &SpectralField<f64>, center: &mut [f64]) {
    let grid = q.grid();
    let tau = std::f64::consts::TAU / grid.box_side();
    for _ in 0..20 {
        for k in 0..grid.dim() {
            let d1 = SpectralField::from_modes(*grid, false, |n| q.coeff(&n) * Complex::new(0.0, tau * n[k] as f64));
            let d2 = SpectralField::from_modes(*grid, false, |n| q.coeff(&n) * (-(tau * n[k] as f64).powi(2)));
            let g = d1.evaluate(center).re;
            let h = d2.evaluate(center).re;
            if h < 0.0 {
                center[k] -= g / h;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_grid(n: usize, l: f64) -> SpectralGrid<f64> {
        SpectralGrid::new(1, n, l, Convention::TwoPi).unwrap()
    }

    #[test]
    fn admissibility() {
        assert!(GnsParameters::<f64>::new(1, 1.0, 6.0).is_ok());
        assert!(GnsParameters::<f64>::new(1, 1.0, 2.0).is_err());
        assert!(GnsParameters::<f64>::new(3, 1.0, 6.0).is_ok());
        assert!(GnsParameters::<f64>::new(3, 1.0, 6.5).is_err());
        assert!(GnsParameters::<f64>::new(2, 1.0, 40.0).is_ok());
        let g = GnsParameters::<f64>::new(1, 1.0, 6.0).unwrap();
        assert!(g.is_critical());
        assert!((g.a() + g.b() - g.p()).abs() < 1e-15_f64);
    }

    #[test]
    fn functional_is_homogeneous_and_dilation_invariant() {
        let params = GnsParameters::new(1, 0.8, 5.0).unwrap();
        let u = SpectralField::from_real_fn(box_grid(96, 30.0), |x| (-x[0] * x[0] / 2.0).exp() * (1.0 + 0.3 * x[0]));
        let j = weinstein_functional(&u, &params).unwrap();
        for c in [0.5, 2.0] {
            let jc = weinstein_functional(&u.scale(c), &params).unwrap();
            assert!((jc - j).abs() < 1e-10 * j);
        }
        for b in [0.5, 2.0] {
            let v = u.with_box_side(30.0 / b).unwrap();
            let jb = weinstein_functional(&v, &params).unwrap();
            assert!((jb - j).abs() < 1e-6 * j);
        }
        assert!(weinstein_functional(&SpectralField::zeros(box_grid(8, 1.0)), &params).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let params = GnsParameters::new(1, 1.0, 4.0).unwrap();
        let u = SpectralField::from_real_fn(box_grid(32, 12.0), |x| (-x[0] * x[0] / 2.0).exp());
        let n = norms(&u, &params);
        let g = gradient(&u, &n, &params);
        let v = SpectralField::from_real_fn(box_grid(32, 12.0), |x| x[0] * (-x[0] * x[0]).exp() + 0.1 * (-x[0] * x[0] / 3.0).exp());
        let h = 1e-6;
        let fp = log_j(&norms(&axpy(&u, h, &v), &params), &params);
        let fm = log_j(&norms(&axpy(&u, -h, &v), &params), &params);
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - inner(&g, &v)).abs() < 1e-7);
    }

    #[test]
    fn unnormalized_profile_rejected() {
        let params = GnsParameters::new(1, 1.0, 6.0).unwrap();
        let u = SpectralField::from_real_fn(box_grid(64, 20.0), |x| (-x[0] * x[0]).exp());
        assert!(matches!(elliptic_residual(&u, &params), Err(Error::NotNormalized(_))));
        let p = GroundStateProfile::from_field(&u, &params).unwrap();
        assert!(check_normalized(&p.field, &params).is_ok());
        assert!(p.residual > 1e-2);
    }

    #[test]
    fn plain_grids_rejected() {
        let params = GnsParameters::new(1, 1.0, 6.0).unwrap();
        let g = SpectralGrid::new(1, 16, 10.0, Convention::Plain).unwrap();
        assert!(solve_ground_state(&params, &SolverOptions::default(), &g).is_err());
    }
}
