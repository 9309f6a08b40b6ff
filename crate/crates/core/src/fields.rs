//! Fractional Gaussian free fields on `T^d`.
//!
//! A sample is `û(n) = g_n / σ(n)` with independent standard complex
//! Gaussians `g_n` (`E|g_n|² = 1`). The massless laws use `σ(n) = m(n)^s`
//! and have no mean mode; the massive law uses `σ(n) = (1 + m(n)²)^{s/2}`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{shell_order, GaussianStream, StreamFamily};
use crate::spectral::{Mode, ModeSelector, SpectralField, SpectralGrid};
use crate::stats::{Estimate, Summary};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawVariant {
    MasslessComplex,
    MassiveComplex,
    /// Massless with `g_{-n} = conj(g_n)`, so samples are real-valued.
    MasslessReal,
}

impl std::str::FromStr for LawVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "massless_complex" => Ok(LawVariant::MasslessComplex),
            "massive_complex" => Ok(LawVariant::MassiveComplex),
            "massless_real" => Ok(LawVariant::MasslessReal),
            other => Err(Error::param(
                "law.variant",
                format!("expected massless_complex, massive_complex or massless_real, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldLaw<R> {
    pub s: R,
    pub variant: LawVariant,
}

impl<R: Real> FieldLaw<R> {
    pub fn new(s: R, variant: LawVariant) -> Result<Self> {
        if !(s > R::zero()) || !s.is_finite() {
            return Err(Error::param("s", format!("regularity must be positive, got {s}")));
        }
        Ok(FieldLaw { s, variant })
    }

    pub fn massless(s: R) -> Result<Self> {
        Self::new(s, LawVariant::MasslessComplex)
    }

    /// Samples are functions only when `s > d/2`.
    pub fn in_function_regime(&self, dim: usize) -> bool {
        self.s > R::count(dim) / R::lit(2.0)
    }

    fn is_massless(&self) -> bool {
        self.variant != LawVariant::MassiveComplex
    }

    /// `σ(n)^{-1}`, zero on the mean mode of the massless laws.
    pub fn amplitude(&self, grid: &SpectralGrid<R>, idx: usize) -> R {
        if self.is_massless() {
            if idx == grid.zero_index() {
                R::zero()
            } else {
                grid.multiplier(idx).powf(-self.s)
            }
        } else {
            let m = grid.multiplier(idx);
            (R::one() + m * m).powf(-self.s / R::lit(2.0))
        }
    }

    /// `E|û(n)|² = σ(n)^{-2}`.
    pub fn variance(&self, grid: &SpectralGrid<R>, idx: usize) -> R {
        let a = self.amplitude(grid, idx);
        a * a
    }

    /// `E‖u‖²_{L²} = L^d Σ σ(n)^{-2}` over the lattice.
    pub fn expected_mass(&self, grid: &SpectralGrid<R>) -> R {
        (0..grid.len()).fold(R::zero(), |acc, i| acc + self.variance(grid, i)) * grid.volume()
    }
}

/// Draws one sample from the stream, reading modes in shell order.
pub fn sample_field<R: Real>(law: &FieldLaw<R>, grid: &SpectralGrid<R>, stream: &mut GaussianStream) -> SpectralField<R> {
    let mut coeffs = vec![Complex::new(R::zero(), R::zero()); grid.len()];
    let real = law.variant == LawVariant::MasslessReal;
    let mut filled = vec![false; grid.len()];
    for (_, idx) in shell_order(grid) {
        let g = stream.complex_normal();
        if real && filled[grid.mirror_index(idx)] {
            coeffs[idx] = coeffs[grid.mirror_index(idx)].conj();
        } else {
            let a = law.amplitude(grid, idx);
            coeffs[idx] = Complex::new(R::lit(g.re) * a, R::lit(g.im) * a);
        }
        filled[idx] = true;
    }
    SpectralField::from_coeffs(*grid, coeffs, real).expect("lattice-sized coefficients")
}

/// Samples `first..first + count`, each on its own stream.
pub fn sample_batch<R: Real>(
    law: &FieldLaw<R>,
    grid: &SpectralGrid<R>,
    family: &StreamFamily,
    first: u64,
    count: usize,
) -> Vec<SpectralField<R>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_field(law, grid, &mut family.stream(first + i)))
        .collect()
}

/// Evaluates `f` on every sample in parallel; results are in sample order.
pub fn map_samples<R: Real, T: Send>(
    law: &FieldLaw<R>,
    grid: &SpectralGrid<R>,
    family: &StreamFamily,
    samples: usize,
    f: impl Fn(&SpectralField<R>) -> T + Sync,
) -> Vec<T> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| f(&sample_field(law, grid, &mut family.stream(i))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCovariance {
    pub mode: Mode,
    pub empirical: f64,
    pub target: f64,
    pub se: f64,
    pub count: usize,
}

impl ModeCovariance {
    pub fn z_score(&self) -> f64 {
        Estimate {
            mean: self.empirical,
            se: self.se,
        }
        .z_distance(&Estimate::exact(self.target))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub rows: Vec<ModeCovariance>,
    /// Largest `|E[û(n) conj û(m)]| / SE` over distinct reported modes,
    /// real and imaginary parts taken separately.
    pub max_cross_z: f64,
    pub samples: usize,
}

impl CovarianceReport {
    pub fn max_variance_z(&self) -> f64 {
        self.rows.iter().map(ModeCovariance::z_score).fold(0.0, f64::max)
    }
}

/// Empirical second moments of the modes `|n|_∞ ≤ max_mode`.
pub fn covariance_report<R: Real>(
    law: &FieldLaw<R>,
    grid: &SpectralGrid<R>,
    max_mode: usize,
    samples: usize,
    family: &StreamFamily,
) -> Result<CovarianceReport> {
    if samples < 100 {
        return Err(Error::param("mc.samples", "covariance needs at least 100 samples"));
    }
    if max_mode > grid.modes() {
        return Err(Error::param("max_mode", "reported modes must lie on the grid"));
    }
    let picked: Vec<usize> = (0..grid.len()).filter(|&i| grid.sup_norm(i) <= max_mode).collect();
    let draws: Vec<Vec<Complex<f64>>> = map_samples(law, grid, family, samples, |u| {
        picked
            .iter()
            .map(|&i| {
                let c = u.coeffs()[i];
                Complex::new(c.re.as_f64(), c.im.as_f64())
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(picked.len());
    for (k, &idx) in picked.iter().enumerate() {
        let sq: Vec<f64> = draws.iter().map(|d| d[k].norm_sqr()).collect();
        let est = Estimate::from_samples(&sq);
        rows.push(ModeCovariance {
            mode: grid.mode(idx),
            empirical: est.mean,
            target: law.variance(grid, idx).as_f64(),
            se: est.se,
            count: samples,
        });
    }
    let mut max_cross_z: f64 = 0.0;
    for a in 0..picked.len() {
        for b in (a + 1)..picked.len() {
            let prod: Vec<Complex<f64>> = draws.iter().map(|d| d[a] * d[b].conj()).collect();
            for part in [
                prod.iter().map(|c| c.re).collect::<Vec<_>>(),
                prod.iter().map(|c| c.im).collect::<Vec<_>>(),
            ] {
                let est = Estimate::from_samples(&part);
                if est.se > 0.0 {
                    max_cross_z = max_cross_z.max(est.mean.abs() / est.se);
                }
            }
        }
    }
    Ok(CovarianceReport {
        rows,
        max_cross_z,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub summary: Summary,
    /// Set when `s ≤ d/2`, where the truncated moments grow with `N`.
    pub divergent_regime: bool,
}

/// Empirical `E‖u‖^p_{L^q}`; `q` may be infinite.
pub fn moment_statistics<R: Real>(
    law: &FieldLaw<R>,
    grid: &SpectralGrid<R>,
    q: R,
    p: R,
    samples: usize,
    family: &StreamFamily,
) -> Result<MomentReport> {
    if !(q >= R::one()) {
        return Err(Error::param("q", format!("need q >= 1, got {q}")));
    }
    let divergent_regime = !law.in_function_regime(grid.dim());
    let values: Vec<f64> = if p == R::zero() {
        vec![1.0; samples]
    } else {
        map_samples(law, grid, family, samples, |u| {
            u.lp_norm(q).expect("q validated").powf(p).as_f64()
        })
    };
    Ok(MomentReport {
        summary: Summary::from_samples(&values),
        divergent_regime,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationReport {
    pub coarse_modes: usize,
    pub coarse: Summary,
    pub fine: Summary,
    pub z: f64,
    pub converged: bool,
}

/// Compares the moment at `N` with the one at `2N` on nested samples;
/// converged when they differ by less than two combined standard errors.
pub fn stabilization_check<R: Real>(
    law: &FieldLaw<R>,
    grid: &SpectralGrid<R>,
    q: R,
    p: R,
    samples: usize,
    family: &StreamFamily,
) -> Result<StabilizationReport> {
    let fine_grid = grid.with_modes(2 * grid.modes())?;
    let coarse = moment_statistics(law, grid, q, p, samples, family)?.summary;
    let fine = moment_statistics(law, &fine_grid, q, p, samples, family)?.summary;
    let z = Estimate {
        mean: coarse.mean,
        se: coarse.se,
    }
    .z_distance(&Estimate {
        mean: fine.mean,
        se: fine.se,
    });
    Ok(StabilizationReport {
        coarse_modes: grid.modes(),
        coarse,
        fine,
        z,
        converged: z < 2.0,
    })
}

/// Fraction of samples with `‖u‖_{L²} ≤ K`, with binomial standard error.
pub fn mass_cutoff_probability<R: Real>(
    law: &FieldLaw<R>,
    grid: &SpectralGrid<R>,
    k: R,
    samples: usize,
    family: &StreamFamily,
) -> Result<Estimate> {
    if !(k >= R::zero()) {
        return Err(Error::param("K", format!("cutoff must be nonnegative, got {k}")));
    }
    let k2 = k * k;
    let hits = map_samples(law, grid, family, samples, |u| u.l2_norm_sq() <= k2)
        .into_iter()
        .filter(|h| *h)
        .count();
    let n = samples as f64;
    let p = hits as f64 / n;
    Ok(Estimate {
        mean: p,
        se: (p * (1.0 - p) / n).sqrt(),
    })
}

/// `‖P_{≤N'} u‖_{L²}` for `N' = 1..=N`.
pub fn truncated_masses<R: Real>(u: &SpectralField<R>) -> Vec<R> {
    (1..=u.grid().modes())
        .map(|cut| u.project(ModeSelector::LowPass(cut)).expect("cut within grid").l2_norm())
        .collect()
}
