//! The Ornstein–Uhlenbeck smoother, soliton drifts and the drift objective.
//!
//! `Y_s(t) = Σ σ(n)^{-1} B_n(t) e_n` is simulated exactly on a uniform time
//! mesh. The smoother `Z_M` solves `dẐ_M = λ_n (Ŷ_s − Ẑ_M) dt` with
//! `λ_n = σ(n)^{-1} M^{d/2}` for `0 < |n| ≤ M`, so `X_n = Ŷ_s − Ẑ_M` is an OU
//! process driven by the same Brownian motion. Each mesh step draws the
//! Brownian increment and the stochastic integral jointly, which keeps the
//! recursion free of discretisation bias.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ground_state::GroundStateProfile;
use crate::partition::potential_energy;
use crate::quadrature::gauss_legendre_on;
use crate::rng::{shell_order, GaussianStream, StreamFamily};
use crate::spectral::{Convention, ModeSelector, SpectralField, SpectralGrid};
use crate::stats::{linear_fit, Estimate, LinearFit};
use crate::{Error, Real, Result};

/// Exact simulation of `Y_s` on the mesh `t_k = k/steps`.
#[derive(Debug, Clone)]
pub struct WienerPath<R> {
    grid: SpectralGrid<R>,
    s: R,
    steps: usize,
    amplitude: Vec<R>,
    /// `B_n(t_{k+1}) − B_n(t_k)` at `idx * steps + k`.
    increments: Vec<Complex<R>>,
    /// Standard complex Gaussians used for the sub-mesh part of the OU
    /// integral, same layout.
    innovations: Vec<Complex<R>>,
}

impl<R: Real> WienerPath<R> {
    pub fn grid(&self) -> &SpectralGrid<R> {
        &self.grid
    }

    pub fn s(&self) -> R {
        self.s
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> R {
        R::one() / R::count(self.steps)
    }

    /// `σ(n)^{-1}` on storage index `idx`.
    pub fn amplitude(&self, idx: usize) -> R {
        self.amplitude[idx]
    }

    pub fn increment(&self, idx: usize, step: usize) -> Complex<R> {
        self.increments[idx * self.steps + step]
    }

    /// `B_n(t_k)`.
    pub fn brownian(&self, idx: usize, k: usize) -> Complex<R> {
        self.increments[idx * self.steps..idx * self.steps + k]
            .iter()
            .fold(Complex::new(R::zero(), R::zero()), |a, b| a + b)
    }

    /// `Y_s(t_k)`.
    pub fn y_at(&self, k: usize) -> SpectralField<R> {
        assert!(k <= self.steps, "mesh index out of range");
        let coeffs = (0..self.grid.len()).map(|i| self.brownian(i, k) * self.amplitude[i]).collect();
        SpectralField::from_coeffs(self.grid, coeffs, false).expect("lattice-sized coefficients")
    }

    pub fn endpoint(&self) -> SpectralField<R> {
        self.y_at(self.steps)
    }
}

fn validate_regularity<R: Real>(grid: &SpectralGrid<R>, s: R) -> Result<()> {
    if !(s > R::count(grid.dim()) / R::lit(2.0)) {
        return Err(Error::param("s", format!("requires s > d/2 = {}, got {s}", grid.dim() as f64 / 2.0)));
    }
    Ok(())
}

/// Simulates `Y_s` with complex Brownian motions, `E|B_n(1)|² = 1`.
///
/// Modes are read in shell order, two complex draws per mode and step, so
/// paths on nested grids share their low modes.
pub fn simulate_y<R: Real>(grid: &SpectralGrid<R>, s: R, steps: usize, stream: &mut GaussianStream) -> Result<WienerPath<R>> {
    validate_regularity(grid, s)?;
    if steps == 0 {
        return Err(Error::param("time_steps", "need at least one step"));
    }
    let len = grid.len();
    let sqrt_dt = (1.0 / steps as f64).sqrt();
    let zero = Complex::new(R::zero(), R::zero());
    let mut increments = vec![zero; len * steps];
    let mut innovations = vec![zero; len * steps];
    for (_, idx) in shell_order(grid) {
        for k in 0..steps {
            let g = stream.complex_normal() * sqrt_dt;
            let z = stream.complex_normal();
            increments[idx * steps + k] = Complex::new(R::lit(g.re), R::lit(g.im));
            innovations[idx * steps + k] = Complex::new(R::lit(z.re), R::lit(z.im));
        }
    }
    let amplitude = (0..len)
        .map(|i| {
            if i == grid.zero_index() {
                R::zero()
            } else {
                grid.multiplier(i).powf(-s)
            }
        })
        .collect();
    Ok(WienerPath {
        grid: *grid,
        s,
        steps,
        amplitude,
        increments,
        innovations,
    })
}

/// `(1 − e^{−2x})/(2x) − (1 − e^{−x})²/x²`, the conditional variance factor
/// of the OU integral given the Brownian increment.
fn residual_factor(x: f64) -> f64 {
    if x < 1e-3 {
        x * x / 12.0 - x * x * x / 12.0 + 17.0 * x.powi(4) / 360.0
    } else {
        let v = -(-2.0 * x).exp_m1() / (2.0 * x);
        let b = -(-x).exp_m1() / x;
        (v - b * b).max(0.0)
    }
}

fn is_dyadic(m: usize) -> bool {
    m >= 1 && m.is_power_of_two()
}

fn euclidean_norm(n: &[i64; 3]) -> f64 {
    n.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt()
}

/// Modes `0 < |n| ≤ M` the smoother acts on.
fn active_modes<R: Real>(grid: &SpectralGrid<R>, m: usize) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| {
            let r = euclidean_norm(&grid.mode(i));
            r > 0.0 && r <= m as f64
        })
        .collect()
}

/// `Z_M` on the path mesh.
#[derive(Debug, Clone)]
pub struct OuTrajectory<R> {
    m: usize,
    steps: usize,
    active: Vec<usize>,
    rates: Vec<R>,
    /// `X_n(t_k)` at `a * (steps + 1) + k` for the `a`-th active mode.
    x: Vec<Complex<R>>,
    z_end: SpectralField<R>,
    residual_end: SpectralField<R>,
}

impl<R: Real> OuTrajectory<R> {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Storage indices of the active modes.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// `λ_n` of the `a`-th active mode.
    pub fn rate(&self, a: usize) -> R {
        self.rates[a]
    }

    /// `X_n(t_k)`, `k = 0..=steps`, of the `a`-th active mode.
    pub fn x_path(&self, a: usize) -> &[Complex<R>] {
        &self.x[a * (self.steps + 1)..(a + 1) * (self.steps + 1)]
    }

    /// `Z_M(1)`.
    pub fn z_end(&self) -> &SpectralField<R> {
        &self.z_end
    }

    /// `Y_s(1) − Z_M(1)`.
    pub fn residual_end(&self) -> &SpectralField<R> {
        &self.residual_end
    }

    /// `(d/dt) Z_M(t_k) = λ_n X_n(t_k)` on the active modes.
    pub fn derivative_at(&self, k: usize) -> SpectralField<R> {
        let grid = *self.z_end.grid();
        let mut coeffs = vec![Complex::new(R::zero(), R::zero()); grid.len()];
        for (a, &idx) in self.active.iter().enumerate() {
            coeffs[idx] = self.x_path(a)[k] * self.rates[a];
        }
        SpectralField::from_coeffs(grid, coeffs, false).expect("lattice-sized coefficients")
    }

    /// `∫₀¹ ‖D^s (d/dt) Z_M‖²_{L²} dt` by the trapezoidal rule on the mesh.
    pub fn derivative_cost(&self, s: R) -> f64 {
        let grid = self.z_end.grid();
        let w = trapezoid_weights(self.steps);
        let total: f64 = self
            .active
            .iter()
            .enumerate()
            .map(|(a, &idx)| {
                let weight = (grid.multiplier(idx).powf(s + s) * self.rates[a] * self.rates[a]).as_f64();
                weight * self.x_path(a).iter().zip(&w).map(|(x, wk)| wk * x.norm_sqr().as_f64()).sum::<f64>()
            })
            .sum();
        total * grid.volume().as_f64()
    }
}

fn trapezoid_weights(steps: usize) -> Vec<f64> {
    let h = 1.0 / steps as f64;
    (0..=steps)
        .map(|k| if k == 0 || k == steps { h / 2.0 } else { h })
        .collect()
}

/// Runs the smoother along `path`. Modes with `n = 0` or `|n| > M` stay at 0.
pub fn simulate_zm<R: Real>(path: &WienerPath<R>, m: usize) -> Result<OuTrajectory<R>> {
    let grid = path.grid;
    if !is_dyadic(m) {
        return Err(Error::param("M", format!("must be a power of two, got {m}")));
    }
    if m > grid.modes() {
        return Err(Error::param("M", format!("M = {m} exceeds the grid truncation {}", grid.modes())));
    }
    let steps = path.steps;
    let dt = 1.0 / steps as f64;
    let active = active_modes(&grid, m);
    let scale = (m as f64).powf(grid.dim() as f64 / 2.0);
    let mut rates = Vec::with_capacity(active.len());
    let mut x = Vec::with_capacity(active.len() * (steps + 1));
    let y_end = path.endpoint();
    let mut z = vec![Complex::new(R::zero(), R::zero()); grid.len()];
    for &idx in &active {
        let amp = path.amplitude[idx].as_f64();
        let lambda = amp * scale;
        let xdt = lambda * dt;
        let decay = (-xdt).exp();
        let beta_over_dt = -(-xdt).exp_m1() / xdt;
        let sub = (dt * residual_factor(xdt)).sqrt();
        let mut state = Complex::new(0.0, 0.0);
        x.push(Complex::new(R::zero(), R::zero()));
        for k in 0..steps {
            let db = path.increments[idx * steps + k];
            let zeta = path.innovations[idx * steps + k];
            let db = Complex::new(db.re.as_f64(), db.im.as_f64());
            let zeta = Complex::new(zeta.re.as_f64(), zeta.im.as_f64());
            state = state * decay + (db * beta_over_dt + zeta * sub) * amp;
            x.push(Complex::new(R::lit(state.re), R::lit(state.im)));
        }
        rates.push(R::lit(lambda));
        z[idx] = y_end.coeffs()[idx] - Complex::new(R::lit(state.re), R::lit(state.im));
    }
    let z_end = SpectralField::from_coeffs(grid, z, false)?;
    let residual_end = y_end.sub(&z_end)?;
    Ok(OuTrajectory {
        m,
        steps,
        active,
        rates,
        x,
        z_end,
        residual_end,
    })
}

/// `E|X_n(t)|² = σ^{-2} (1 − e^{−2λt})/(2λ)`.
pub fn ou_variance(amplitude: f64, rate: f64, t: f64) -> f64 {
    amplitude * amplitude * -(-2.0 * rate * t).exp_m1() / (2.0 * rate)
}

/// `E‖Y_s(1) − Z_M(1)‖²_{L²}` over the lattice of `grid`.
pub fn expected_l2_error<R: Real>(grid: &SpectralGrid<R>, s: R, m: usize) -> f64 {
    let scale = (m as f64).powf(grid.dim() as f64 / 2.0);
    let total: f64 = (0..grid.len())
        .filter(|&i| i != grid.zero_index())
        .map(|i| {
            let amp = grid.multiplier(i).powf(-s).as_f64();
            if euclidean_norm(&grid.mode(i)) <= m as f64 {
                ou_variance(amp, amp * scale, 1.0)
            } else {
                amp * amp
            }
        })
        .sum();
    total * grid.volume().as_f64()
}

/// `∫₀¹ E‖D^s (d/dt) Z_M‖²_{L²} dt`.
pub fn expected_derivative_cost<R: Real>(grid: &SpectralGrid<R>, s: R, m: usize) -> f64 {
    let scale = (m as f64).powf(grid.dim() as f64 / 2.0);
    let total: f64 = active_modes(grid, m)
        .into_iter()
        .map(|i| {
            let mult = grid.multiplier(i).as_f64();
            let sf = s.as_f64();
            let amp = mult.powf(-sf);
            let lambda = amp * scale;
            let time_avg = 1.0 + (-2.0 * lambda).exp_m1() / (2.0 * lambda);
            mult.powf(2.0 * sf) * lambda * lambda * amp * amp / (2.0 * lambda) * time_avg
        })
        .sum();
    total * grid.volume().as_f64()
}

/// Regression of the smoother's error and cost against `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub m_ladder: Vec<usize>,
    pub l2_error: Vec<Estimate>,
    pub derivative_cost: Vec<Estimate>,
    pub l2_error_exact: Vec<f64>,
    pub derivative_cost_exact: Vec<f64>,
    pub l2_fit: LinearFit,
    pub derivative_fit: LinearFit,
    /// `−min(s − d/2, d/2)`.
    pub l2_target: f64,
    /// `max(3d/2 − s, d/2)`.
    pub derivative_target: f64,
}

/// Simulates `samples` paths on `grid` and fits `log E‖Z_M(1) − Y_s(1)‖²`
/// and `log ∫ E‖D^s Ż_M‖² dt` against `log M`. All `M` share each path.
pub fn verify_approx_rates<R: Real>(
    grid: &SpectralGrid<R>,
    s: R,
    m_ladder: &[usize],
    samples: usize,
    steps: usize,
    family: &StreamFamily,
) -> Result<RateReport> {
    validate_regularity(grid, s)?;
    if m_ladder.len() < 4 {
        return Err(Error::param("M", format!("need at least 4 ladder levels, got {}", m_ladder.len())));
    }
    if m_ladder.iter().any(|m| !is_dyadic(*m) || *m > grid.modes()) {
        return Err(Error::param("M", format!("ladder must be powers of two up to {}", grid.modes())));
    }
    if samples < 2 {
        return Err(Error::param("samples", "need at least 2 samples"));
    }
    let rows: Vec<Result<Vec<(f64, f64)>>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_y(grid, s, steps, &mut family.stream(i))?;
            m_ladder
                .iter()
                .map(|&m| {
                    let t = simulate_zm(&path, m)?;
                    Ok((t.residual_end().l2_norm_sq().as_f64(), t.derivative_cost(s)))
                })
                .collect()
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let column = |j: usize, pick: fn(&(f64, f64)) -> f64| -> Estimate {
        Estimate::from_samples(&rows.iter().map(|r| pick(&r[j])).collect::<Vec<_>>())
    };
    let l2_error: Vec<Estimate> = (0..m_ladder.len()).map(|j| column(j, |v| v.0)).collect();
    let derivative_cost: Vec<Estimate> = (0..m_ladder.len()).map(|j| column(j, |v| v.1)).collect();
    let logm: Vec<f64> = m_ladder.iter().map(|m| (*m as f64).ln()).collect();
    let log_of = |v: &[Estimate]| v.iter().map(|e| e.mean.ln()).collect::<Vec<_>>();
    let d = grid.dim() as f64;
    let sf = s.as_f64();
    Ok(RateReport {
        m_ladder: m_ladder.to_vec(),
        l2_fit: linear_fit(&logm, &log_of(&l2_error)),
        derivative_fit: linear_fit(&logm, &log_of(&derivative_cost)),
        l2_error_exact: m_ladder.iter().map(|&m| expected_l2_error(grid, s, m)).collect(),
        derivative_cost_exact: m_ladder.iter().map(|&m| expected_derivative_cost(grid, s, m)).collect(),
        l2_error,
        derivative_cost,
        l2_target: -(sf - d / 2.0).min(d / 2.0),
        derivative_target: (1.5 * d - sf).max(d / 2.0),
    })
}

/// `∫_{-∞}^{u} ψ(t) dt` for the normalised bump `ψ ∝ exp(−1/(1 − 4t²))` on
/// `(−½, ½)`.
fn bump_cdf(u: f64) -> f64 {
    fn bump(t: f64) -> f64 {
        let r = 1.0 - 4.0 * t * t;
        if r <= 0.0 { 0.0 } else { (-1.0 / r).exp() }
    }
    fn integral(a: f64, b: f64) -> f64 {
        gauss_legendre_on(48, a, b).into_iter().map(|(t, w)| w * bump(t)).sum()
    }
    thread_local! {
        static TOTAL: f64 = integral(-0.5, 0.0) * 2.0;
    }
    if u <= -0.5 {
        0.0
    } else if u >= 0.5 {
        1.0
    } else if u <= 0.0 {
        TOTAL.with(|t| integral(-0.5, u) / t)
    } else {
        1.0 - TOTAL.with(|t| integral(u, 0.5) / t)
    }
}

/// One-dimensional cutoff: the indicator of `[−½ + 2δ, ½ − 2δ]` mollified by
/// a bump of diameter `δ`. Equal to 1 on `[−½ + 3δ, ½ − 3δ]` and 0 outside
/// `[−½ + δ, ½ − δ]`.
pub fn cutoff(x: f64, delta: f64) -> f64 {
    let a = -0.5 + 2.0 * delta;
    let b = 0.5 - 2.0 * delta;
    bump_cdf((x - a) / delta) - bump_cdf((x - b) / delta)
}

/// `φ_δ(x) = Π_i cutoff(x_i)`.
pub fn cutoff_nd(x: &[f64], delta: f64) -> f64 {
    x.iter().map(|v| cutoff(*v, delta)).product()
}

/// How the soliton amplitude `α` is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum AmplitudeRule {
    /// `α ‖Q‖_{L²} = K − η`.
    MassMargin,
    /// `α = min(cap, (K − η)/‖Q‖_{L²})`.
    Capped(f64),
    /// Given `α`, which must still respect the mass margin.
    Fixed(f64),
}

/// Measured constants of the soliton family at one `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonProperties {
    /// `H(W_ρ) = ½‖W_ρ‖²_{Ḣ^s} − R_p(W_ρ)`.
    pub hamiltonian: f64,
    /// `−H(W_ρ) ρ^{dp/2 − d}`.
    pub a1: f64,
    /// `‖W_ρ‖^p_{L^p}`.
    pub lp_power: f64,
    /// `‖W_ρ‖^p_{L^p} ρ^{dp/2 − d}`.
    pub a2: f64,
    pub mass: f64,
    /// `K − η`.
    pub mass_bound: f64,
    /// `|P₀ W_ρ|`.
    pub mean_mode: f64,
    /// Lattice points across the region where `Q ≥ Q(0)/2`.
    pub core_points: f64,
}

/// `W_ρ(x) = α ρ^{−d/2} φ_δ(x) Q(x/ρ)` on the unit torus.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonDrift<R> {
    pub field: SpectralField<R>,
    pub s: R,
    pub p: R,
    pub k: R,
    pub eta: R,
    pub rho: R,
    pub alpha: R,
    pub delta: R,
    pub properties: SolitonProperties,
}

/// Minimum lattice points across the soliton core.
pub const MIN_CORE_POINTS: f64 = 8.0;

/// Half-width of `{Q ≥ Q(0)/2}` along the first axis, in profile units.
fn core_half_width<R: Real>(profile: &GroundStateProfile<R>) -> f64 {
    let dim = profile.params.dim();
    let at = |r: f64| {
        let mut x = vec![R::zero(); dim];
        x[0] = R::lit(r);
        profile.value_at(&x).as_f64()
    };
    let peak = at(0.0);
    let (mut lo, mut hi) = (0.0, profile.field.grid().box_side().as_f64() / 2.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if at(mid) >= peak / 2.0 { lo = mid } else { hi = mid }
    }
    0.5 * (lo + hi)
}

/// Builds `W_ρ` on the unit torus `grid` from a ground state computed with the
/// 2π symbol. On a grid with the plain symbol the profile is rescaled to
/// `Q(2πx)`, the ground state of that convention.
#[allow(clippy::too_many_arguments)]
pub fn build_soliton_drift<R: Real>(
    profile: &GroundStateProfile<R>,
    grid: &SpectralGrid<R>,
    k: R,
    rho: R,
    delta: R,
    eta: R,
    rule: AmplitudeRule,
) -> Result<SolitonDrift<R>> {
    let params = &profile.params;
    if grid.box_side() != R::one() {
        return Err(Error::GridMismatch("soliton drifts live on the unit torus".into()));
    }
    if grid.dim() != params.dim() {
        return Err(Error::GridMismatch("profile and grid dimensions differ".into()));
    }
    validate_regularity(grid, params.s())?;
    let q_mass = profile.critical_mass(grid.convention());
    let critical = params.is_critical();
    if !critical && params.p() < params.critical_p() {
        return Err(Error::param("p", "soliton drifts need critical or supercritical p"));
    }
    if critical && !(k > q_mass) {
        return Err(Error::param("K", format!("critical p needs K > ‖Q‖ = {q_mass}, got {k}")));
    }
    if !(k > R::zero()) || !(eta > R::zero()) || !(eta < k) {
        return Err(Error::param("eta", "need 0 < η < K"));
    }
    if !(rho > R::zero()) || !(rho < R::one()) {
        return Err(Error::param("rho", format!("need 0 < ρ < 1, got {rho}")));
    }
    if !(delta > R::zero()) || !(delta < R::one() / R::lit(6.0)) {
        return Err(Error::param("delta", format!("need 0 < δ < 1/6, got {delta}")));
    }
    let margin = (k - eta) / q_mass;
    let alpha = match rule {
        AmplitudeRule::MassMargin => margin,
        AmplitudeRule::Capped(cap) => R::lit(cap).min(margin),
        AmplitudeRule::Fixed(a) => {
            if !(a >= 0.0) || R::lit(a) > margin {
                return Err(Error::param("alpha", format!("need 0 ≤ α ≤ (K − η)/‖Q‖ = {margin}, got {a}")));
            }
            R::lit(a)
        }
    };
    if critical && rule == AmplitudeRule::MassMargin && !(alpha > R::one()) {
        return Err(Error::param("eta", "critical p needs α = (K − η)/‖Q‖ > 1"));
    }
    let to_profile = R::TAU() / grid.convention().factor::<R>();
    let core = 2.0 * core_half_width(profile) * (rho / to_profile).as_f64() * grid.side() as f64;
    if core < MIN_CORE_POINTS {
        return Err(Error::param(
            "rho",
            format!("soliton core spans {core:.2} lattice points, need at least {MIN_CORE_POINTS}"),
        ));
    }
    let d = params.dim();
    let amp = alpha * rho.powf(-R::count(d) / R::lit(2.0));
    let deltaf = delta.as_f64();
    let field = SpectralField::from_real_fn(*grid, |x| {
        let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        let phi = cutoff_nd(&xf, deltaf);
        if phi == 0.0 {
            return R::zero();
        }
        let y: Vec<R> = x.iter().map(|v| *v * to_profile / rho).collect();
        amp * R::lit(phi) * profile.value_at(&y)
    });
    let p = params.p();
    let rp = potential_energy(&field, p)?.as_f64();
    let hamiltonian = 0.5 * field.sobolev_norm_sq(params.s()).as_f64() - rp;
    let scale = rho.as_f64().powf(d as f64 * p.as_f64() / 2.0 - d as f64);
    let lp_power = rp * p.as_f64();
    let properties = SolitonProperties {
        hamiltonian,
        a1: -hamiltonian * scale,
        lp_power,
        a2: lp_power * scale,
        mass: field.l2_norm().as_f64(),
        mass_bound: (k - eta).as_f64(),
        mean_mode: field.mean().norm().as_f64(),
        core_points: core,
    };
    Ok(SolitonDrift {
        field,
        s: params.s(),
        p,
        k,
        eta,
        rho,
        alpha,
        delta,
        properties,
    })
}

/// Terms of the drift objective at one `(ρ, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftObjectiveBreakdown {
    pub rho: f64,
    pub m: usize,
    pub dim: usize,
    pub p: f64,
    pub samples: usize,
    /// `½‖W‖²_{Ḣ^s} − R_p(W)`.
    pub a: f64,
    /// `R_p(W) − R_p(P_{≠0}W)`.
    pub b: f64,
    pub c: Estimate,
    pub d: Estimate,
    /// `e_kinetic + e_cross`.
    pub e: Estimate,
    /// `½∫ ‖Ż_M‖²_{Ḣ^s} dt`.
    pub e_kinetic: Estimate,
    /// `−∫ ⟨Ż_M, W⟩_{Ḣ^s} dt`, mean zero.
    pub e_cross: Estimate,
    /// Closed form of `E[e_kinetic]`.
    pub e_kinetic_exact: f64,
    /// `A + B + C + D + E`; the standard error is that of the per-sample sum.
    pub total: Estimate,
    /// Probability of `‖Y_s(1) − Z_M(1) + P_{≠0}W‖_{L²} > K`.
    pub d_event_probability: Estimate,
    /// Largest `(lhs − rhs)/rhs` of `‖I_s(θ)(1)‖²_{Ḣ^s} ≤ ∫‖θ‖²_{L²} dt`.
    pub cost_bound_violation: f64,
}

/// Tolerance for the pathwise cost bound.
pub const COST_BOUND_TOLERANCE: f64 = 1e-6;

impl DriftObjectiveBreakdown {
    pub fn cost_bound_holds(&self) -> bool {
        self.cost_bound_violation <= COST_BOUND_TOLERANCE
    }
}

struct SampleTerms {
    c: f64,
    d: f64,
    kinetic: f64,
    cross: f64,
    outside: bool,
    violation: f64,
}

/// Monte Carlo evaluation of `A + B + C + D + E` for the drift
/// `θ = −D^s Ż_M + D^s W_ρ`, with all time integrals on the path mesh.
pub fn objective_breakdown<R: Real>(
    drift: &SolitonDrift<R>,
    m: usize,
    samples: usize,
    steps: usize,
    family: &StreamFamily,
) -> Result<DriftObjectiveBreakdown> {
    if samples < 2 {
        return Err(Error::param("samples", "need at least 2 samples"));
    }
    let w = &drift.field;
    let grid = *w.grid();
    let (s, p) = (drift.s, drift.p);
    let kf = drift.k.as_f64();
    let w_nz = w.project(ModeSelector::NonZeroModes)?;
    let rp_w = potential_energy(w, p)?.as_f64();
    let rp_nz = potential_energy(&w_nz, p)?.as_f64();
    let a = 0.5 * w.sobolev_norm_sq(s).as_f64() - rp_w;
    let b = rp_w - rp_nz;
    let vol = grid.volume().as_f64();
    let weights = trapezoid_weights(steps);
    let sobolev_weight: Vec<f64> = (0..grid.len())
        .map(|i| {
            if i == grid.zero_index() {
                0.0
            } else {
                grid.multiplier(i).powf(s + s).as_f64()
            }
        })
        .collect();
    let wc: Vec<Complex<f64>> = w.coeffs().iter().map(|c| Complex::new(c.re.as_f64(), c.im.as_f64())).collect();
    let rows: Vec<Result<SampleTerms>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_y(&grid, s, steps, &mut family.stream(i))?;
            let traj = simulate_zm(&path, m)?;
            let v = traj.residual_end().add(&w_nz)?;
            let outside = v.l2_norm_sq().as_f64() > kf * kf;
            let (c, d) = if outside {
                (0.0, rp_nz)
            } else {
                (rp_nz - potential_energy(&v, p)?.as_f64(), 0.0)
            };
            let mut kinetic = 0.0;
            let mut cross = 0.0;
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            let mut active = vec![false; grid.len()];
            for (ai, &idx) in traj.active().iter().enumerate() {
                active[idx] = true;
                let lambda = traj.rate(ai).as_f64();
                let sw = sobolev_weight[idx];
                let mut mean_f = Complex::new(0.0, 0.0);
                let mut mean_sq = 0.0;
                for (x, wk) in traj.x_path(ai).iter().zip(&weights) {
                    let dz = Complex::new(x.re.as_f64(), x.im.as_f64()) * lambda;
                    kinetic += wk * sw * dz.norm_sqr();
                    cross += wk * sw * (dz * wc[idx].conj()).re;
                    let f = wc[idx] - dz;
                    mean_f += f * wk;
                    mean_sq += wk * f.norm_sqr();
                }
                lhs += sw * mean_f.norm_sqr();
                rhs += sw * mean_sq;
            }
            for idx in (0..grid.len()).filter(|i| !active[*i]) {
                let fixed = sobolev_weight[idx] * wc[idx].norm_sqr();
                lhs += fixed;
                rhs += fixed;
            }
            let violation = if rhs > 0.0 { (lhs - rhs) / rhs } else { 0.0 };
            Ok(SampleTerms {
                c,
                d,
                kinetic: 0.5 * vol * kinetic,
                cross: -vol * cross,
                outside,
                violation,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&SampleTerms) -> f64| Estimate::from_samples(&rows.iter().map(f).collect::<Vec<_>>());
    let c = pick(|r| r.c);
    let d = pick(|r| r.d);
    let e = pick(|r| r.kinetic + r.cross);
    let per_sample_total: Vec<f64> = rows.iter().map(|r| a + b + r.c + r.d + r.kinetic + r.cross).collect();
    let total = Estimate {
        mean: a + b + c.mean + d.mean + e.mean,
        se: Estimate::from_samples(&per_sample_total).se,
    };
    let outside = rows.iter().filter(|r| r.outside).count() as f64 / samples as f64;
    Ok(DriftObjectiveBreakdown {
        rho: drift.rho.as_f64(),
        m,
        dim: grid.dim(),
        p: p.as_f64(),
        samples,
        a,
        b,
        c,
        d,
        e,
        e_kinetic: pick(|r| r.kinetic),
        e_cross: pick(|r| r.cross),
        e_kinetic_exact: 0.5 * expected_derivative_cost(&grid, s, m),
        total,
        d_event_probability: Estimate {
            mean: outside,
            se: (outside * (1.0 - outside) / samples as f64).sqrt(),
        },
        cost_bound_violation: rows.iter().map(|r| r.violation).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Fitted growth of `−(A + B + C + D + E)` in `1/ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceFit {
    pub rhos: Vec<f64>,
    pub totals: Vec<f64>,
    pub fit: LinearFit,
    /// `dp/2 − d`.
    pub target: f64,
}

impl DivergenceFit {
    pub fn relative_error(&self) -> f64 {
        (self.fit.slope - self.target).abs() / self.target
    }
}

/// Slope of `log(−total)` against `log(1/ρ)`.
pub fn fit_divergence_rate(rhos: &[f64], totals: &[f64], target: f64) -> Result<DivergenceFit> {
    if rhos.len() != totals.len() || rhos.len() < 4 {
        return Err(Error::param("rho", "need at least 4 ladder levels with one total each"));
    }
    if rhos.iter().any(|r| {
        let inv = 1.0 / r;
        !(*r > 0.0) || (inv - inv.round()).abs() > 1e-9 || !(inv.round() as u64).is_power_of_two()
    }) {
        return Err(Error::param("rho", "ladder must consist of dyadic ρ = 2^{-j}"));
    }
    let bad: Vec<String> = rhos
        .iter()
        .zip(totals)
        .filter(|(_, t)| !(**t < 0.0))
        .map(|(r, t)| format!("ρ = {r}: total {t}"))
        .collect();
    if !bad.is_empty() {
        return Err(Error::FitRefused(format!("totals must be negative; {}", bad.join(", "))));
    }
    let x: Vec<f64> = rhos.iter().map(|r| -r.ln()).collect();
    let y: Vec<f64> = totals.iter().map(|t| (-t).ln()).collect();
    Ok(DivergenceFit {
        rhos: rhos.to_vec(),
        totals: totals.to_vec(),
        fit: linear_fit(&x, &y),
        target,
    })
}

/// [`fit_divergence_rate`] over a ladder of breakdowns sharing `(d, p)`.
pub fn divergence_rate_fit(breakdowns: &[DriftObjectiveBreakdown]) -> Result<DivergenceFit> {
    let first = breakdowns
        .first()
        .ok_or_else(|| Error::param("rho", "empty ladder"))?;
    if breakdowns.iter().any(|b| b.p != first.p || b.dim != first.dim) {
        return Err(Error::param("rho", "ladder mixes exponents or dimensions"));
    }
    let d = first.dim as f64;
    let rhos: Vec<f64> = breakdowns.iter().map(|b| b.rho).collect();
    let totals: Vec<f64> = breakdowns.iter().map(|b| b.total.mean).collect();
    fit_divergence_rate(&rhos, &totals, d * first.p / 2.0 - d)
}

/// The symbol convention the drift objective is evaluated in must match the
/// one the ground state was rescaled to.
pub fn drift_convention<R: Real>(drift: &SolitonDrift<R>) -> Convention {
    drift.field.grid().convention()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> SpectralGrid<f64> {
        SpectralGrid::torus(1, n, Convention::Plain).unwrap()
    }

    #[test]
    fn residual_factor_is_continuous() {
        let lo = residual_factor(1e-3 * (1.0 - 1e-12));
        let hi = residual_factor(1e-3 * (1.0 + 1e-12));
        assert!((lo - hi).abs() < 1e-7 * lo);
        assert!(residual_factor(10.0) > 0.0);
    }

    #[test]
    fn zero_path_gives_zero_smoother() {
        let g = grid(8);
        let mut path = simulate_y(&g, 1.0, 16, &mut StreamFamily::new(0, 0).stream(0)).unwrap();
        for v in path.increments.iter_mut().chain(path.innovations.iter_mut()) {
            *v = Complex::new(0.0, 0.0);
        }
        let t = simulate_zm(&path, 4).unwrap();
        assert!(t.z_end().coeffs().iter().all(|c| c.norm() == 0.0));
        assert_eq!(t.derivative_cost(1.0), 0.0);
    }

    #[test]
    fn brownian_endpoint_is_sum_of_increments() {
        let g = grid(4);
        let path = simulate_y(&g, 1.0, 8, &mut StreamFamily::new(1, 1).stream(0)).unwrap();
        let idx = g.index_of(&[2]).unwrap();
        let y = path.endpoint();
        assert!((y.coeffs()[idx] - path.brownian(idx, 8) * 0.5).norm() < 1e-15);
        assert_eq!(y.mean().norm(), 0.0);
    }

    #[test]
    fn smoother_rejects_bad_m() {
        let g = grid(8);
        let path = simulate_y(&g, 1.0, 4, &mut StreamFamily::new(0, 0).stream(0)).unwrap();
        assert!(simulate_zm(&path, 16).is_err());
        assert!(simulate_zm(&path, 3).is_err());
        assert!(simulate_y(&g, 0.5, 4, &mut StreamFamily::new(0, 0).stream(0)).is_err());
    }

    #[test]
    fn cutoff_shape() {
        let delta = 0.05;
        assert_eq!(cutoff(0.0, delta), 1.0);
        assert!((cutoff(0.5 - 3.0 * delta, delta) - 1.0).abs() < 1e-14);
        assert_eq!(cutoff(0.5 - delta, delta), 0.0);
        assert_eq!(cutoff(-0.5 + 0.9 * delta, delta), 0.0);
        let mid = cutoff(0.5 - 2.0 * delta, delta);
        assert!((mid - 0.5).abs() < 1e-12);
        let xs: Vec<f64> = (0..200).map(|i| 0.5 - 3.0 * delta + i as f64 * 2.0 * delta / 199.0).collect();
        assert!(xs.windows(2).all(|w| cutoff(w[1], delta) <= cutoff(w[0], delta) + 1e-15));
    }

    #[test]
    fn synthetic_power_law_fit() {
        let rhos = [0.125, 0.0625, 0.03125, 0.015625];
        let totals: Vec<f64> = rhos.iter().map(|r: &f64| -r.powi(-3)).collect();
        let f = fit_divergence_rate(&rhos, &totals, 3.0).unwrap();
        assert!((f.fit.slope - 3.0).abs() < 1e-10);
        let mut bad = totals.clone();
        bad[2] = 0.5;
        assert!(matches!(fit_divergence_rate(&rhos, &bad, 3.0), Err(Error::FitRefused(_))));
    }

    #[test]
    fn closed_forms_limit() {
        let g = grid(64);
        let small = expected_l2_error(&g, 1.0, 8);
        let large = expected_l2_error(&g, 1.0, 64);
        assert!(large < small);
        assert!(expected_derivative_cost(&g, 1.0, 64) > expected_derivative_cost(&g, 1.0, 8));
    }
}
