//! Monte Carlo estimation of the mass-cutoff partition function
//! `Z_{s,p,K} = E[exp(R_p(u)) 1{‖u‖_{L²} ≤ K}]` along truncation ladders.
//!
//! Every sample is drawn once at the top truncation. Because streams read
//! modes in shell order, its projection to a lower truncation is exactly the
//! sample that level would have drawn, so all levels and all cutoffs share
//! common random numbers.

use serde::{Deserialize, Serialize};

use crate::fields::{map_samples, FieldLaw};
use crate::ground_state::{GnsParameters, GroundStateProfile};
use crate::rng::StreamFamily;
use crate::spectral::{SpectralField, SpectralGrid};
use crate::stats::{jackknife_log_mean, Estimate};
use crate::{Error, Real, Result};

/// `R_p(u) = (1/p) ∫ |u|^p dx`.
pub fn potential_energy<R: Real>(u: &SpectralField<R>, p: R) -> Result<R> {
    if !(p > R::lit(2.0)) {
        return Err(Error::param("p", format!("requires p > 2, got {p}")));
    }
    Ok(u.lp_integral(p)? / p)
}

/// Weight attached to an accepted sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `exp(R_p(u))`.
    Potential,
    /// `1`: the estimate reduces to the acceptance probability.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub modes: usize,
    pub p: f64,
    pub k: f64,
    pub samples: usize,
    /// Log of the sample mean of the weights; `-∞` when nothing is accepted.
    pub log_estimate: f64,
    pub jackknife_se: f64,
    pub acceptance_rate: f64,
    /// Largest single weight over the sum of all weights.
    pub max_weight_share: f64,
}

impl PartitionEstimate {
    pub fn as_estimate(&self) -> Estimate {
        Estimate {
            mean: self.log_estimate,
            se: self.jackknife_se,
        }
    }
}

/// Per-sample data at one truncation level.
#[derive(Debug, Clone, Copy)]
struct LevelSample {
    mass_sq: f64,
    potential: f64,
}

fn validate(p: f64, ks: &[f64], levels: &[usize], samples: usize, top: usize) -> Result<()> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::param("p", format!("requires p > 2, got {p}")));
    }
    if ks.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
        return Err(Error::param("K", "cutoffs must be positive and finite"));
    }
    if levels.is_empty() || levels.iter().any(|n| *n == 0 || *n > top) {
        return Err(Error::param("N", format!("truncations must lie in 1..={top}")));
    }
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    Ok(())
}

fn summarize(level: &[LevelSample], modes: usize, p: f64, k: f64, weighting: Weighting) -> PartitionEstimate {
    let k2 = k * k;
    let logs: Vec<f64> = level
        .iter()
        .map(|v| {
            if v.mass_sq <= k2 {
                match weighting {
                    Weighting::Potential => v.potential,
                    Weighting::Unit => 0.0,
                }
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let jk = jackknife_log_mean(&logs);
    PartitionEstimate {
        modes,
        p,
        k,
        samples: level.len(),
        log_estimate: jk.log_mean,
        jackknife_se: jk.se,
        acceptance_rate: jk.nonzero as f64 / level.len() as f64,
        max_weight_share: jk.max_share,
    }
}

/// Estimates for every `(K, N)` pair from one set of samples.
///
/// `grid` is the top truncation; the result is indexed `[k][level]`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_ladder<R: Real>(
    law: &FieldLaw<R>,
    grid: &SpectralGrid<R>,
    p: R,
    ks: &[R],
    levels: &[usize],
    samples: usize,
    family: &StreamFamily,
    weighting: Weighting,
) -> Result<Vec<Vec<PartitionEstimate>>> {
    let pf = p.as_f64();
    let kf: Vec<f64> = ks.iter().map(|k| k.as_f64()).collect();
    validate(pf, &kf, levels, samples, grid.modes())?;
    let per_sample: Vec<Vec<LevelSample>> = map_samples(law, grid, family, samples, |u| {
        levels
            .iter()
            .map(|&n| {
                let v = if n == grid.modes() { u.clone() } else { u.resample(n) };
                LevelSample {
                    mass_sq: v.l2_norm_sq().as_f64(),
                    potential: match weighting {
                        Weighting::Potential => (v.lp_integral(p).expect("p validated") / p).as_f64(),
                        Weighting::Unit => 0.0,
                    },
                }
            })
            .collect()
    });
    let columns: Vec<Vec<LevelSample>> = (0..levels.len())
        .map(|j| per_sample.iter().map(|row| row[j]).collect())
        .collect();
    Ok(kf
        .iter()
        .map(|&k| {
            levels
                .iter()
                .zip(&columns)
                .map(|(&n, col)| summarize(col, n, pf, k, weighting))
                .collect()
        })
        .collect())
}

/// Single-level estimate of `Z_{s,p,K}` at truncation `grid.modes()`.
pub fn estimate_partition<R: Real>(
    law: &FieldLaw<R>,
    grid: &SpectralGrid<R>,
    p: R,
    k: R,
    samples: usize,
    family: &StreamFamily,
    weighting: Weighting,
) -> Result<PartitionEstimate> {
    let ladder = estimate_ladder(law, grid, p, &[k], &[grid.modes()], samples, family, weighting)?;
    Ok(ladder[0][0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Convergent,
    Divergent,
    Inconclusive,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Convergent => "convergent",
            Classification::Divergent => "divergent",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

/// Decision thresholds of [`divergence_diagnostic`].
pub const PLATEAU_SE: f64 = 2.0;
pub const PLATEAU_MAX_SHARE: f64 = 0.5;
pub const GROWTH_SE: f64 = 4.0;
pub const DOMINATED_SHARE: f64 = 0.9;

/// Classifies a ladder ordered by increasing truncation.
///
/// Convergent: the top two levels agree within two combined standard errors
/// and no single sample holds half the top-level mass. Divergent: the top
/// three levels rise monotonically by more than four combined standard
/// errors, or one sample holds more than 90% of the top-level mass.
pub fn divergence_diagnostic(ladder: &[PartitionEstimate]) -> Result<Classification> {
    if ladder.len() < 3 {
        return Err(Error::param("ladder", format!("need at least 3 levels, got {}", ladder.len())));
    }
    let first = ladder[0];
    if ladder.iter().any(|e| e.p != first.p || e.k != first.k) {
        return Err(Error::param("ladder", "levels must share p and K"));
    }
    if ladder.windows(2).any(|w| w[1].modes <= w[0].modes) {
        return Err(Error::param("ladder", "truncations must increase"));
    }
    let n = ladder.len();
    let (a, b, c) = (ladder[n - 3], ladder[n - 2], ladder[n - 1]);
    if [a, b, c].iter().any(|e| !e.log_estimate.is_finite()) {
        return Ok(Classification::Inconclusive);
    }
    if b.as_estimate().z_distance(&c.as_estimate()) <= PLATEAU_SE && c.max_weight_share < PLATEAU_MAX_SHARE {
        return Ok(Classification::Convergent);
    }
    let monotone = a.log_estimate < b.log_estimate && b.log_estimate < c.log_estimate;
    let rise = c.log_estimate - a.log_estimate;
    if (monotone && rise > GROWTH_SE * a.jackknife_se.hypot(c.jackknife_se)) || c.max_weight_share > DOMINATED_SHARE {
        return Ok(Classification::Divergent);
    }
    Ok(Classification::Inconclusive)
}

/// Location of the convergent/divergent transition on a cutoff grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bracket {
    /// Largest convergent cutoff below the smallest divergent one.
    Bracketed { lower: f64, upper: f64 },
    /// No divergent cutoff: the transition lies above the grid.
    AboveGrid,
    /// No convergent cutoff: the transition lies below the grid.
    BelowGrid,
    /// A divergent cutoff lies below a convergent one.
    Inconsistent { lower: f64, upper: f64 },
}

impl Bracket {
    pub fn from_classes(ks: &[f64], classes: &[Classification]) -> Self {
        let lower = ks
            .iter()
            .zip(classes)
            .filter(|(_, c)| **c == Classification::Convergent)
            .map(|(k, _)| *k)
            .fold(f64::NEG_INFINITY, f64::max);
        let upper = ks
            .iter()
            .zip(classes)
            .filter(|(_, c)| **c == Classification::Divergent)
            .map(|(k, _)| *k)
            .fold(f64::INFINITY, f64::min);
        match (lower.is_finite(), upper.is_finite()) {
            (_, false) => Bracket::AboveGrid,
            (false, true) => Bracket::BelowGrid,
            (true, true) if lower < upper => Bracket::Bracketed { lower, upper },
            _ => Bracket::Inconsistent { lower, upper },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub k_grid: Vec<f64>,
    pub classifications: Vec<Classification>,
    /// `[k][level]`.
    pub ladders: Vec<Vec<PartitionEstimate>>,
    pub bracket: Bracket,
    /// `‖Q‖_{L²}` under the scan's convention.
    pub reference_mass: f64,
}

/// Runs a ladder per cutoff at the critical exponent and brackets the
/// transition. `grid` is the top truncation of the ladder.
#[allow(clippy::too_many_arguments)]
pub fn threshold_scan<R: Real>(
    profile: &GroundStateProfile<R>,
    law: &FieldLaw<R>,
    grid: &SpectralGrid<R>,
    k_grid: &[R],
    levels: &[usize],
    samples: usize,
    family: &StreamFamily,
) -> Result<TransitionReport> {
    let params: &GnsParameters<R> = &profile.params;
    if !params.is_critical() {
        return Err(Error::param(
            "p",
            format!("threshold scan needs the critical exponent {}, got {}", params.critical_p(), params.p()),
        ));
    }
    if params.dim() != grid.dim() || (params.s() - law.s).abs() > R::epsilon() * R::lit(16.0) {
        return Err(Error::GridMismatch("profile, law and grid disagree on d or s".into()));
    }
    if k_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("K", "cutoff grid must be strictly increasing"));
    }
    if levels.len() < 3 {
        return Err(Error::param("N", "threshold scan needs at least 3 ladder levels"));
    }
    let ladders = estimate_ladder(law, grid, params.p(), k_grid, levels, samples, family, Weighting::Potential)?;
    let classifications = ladders
        .iter()
        .map(|l| divergence_diagnostic(l))
        .collect::<Result<Vec<_>>>()?;
    let ks: Vec<f64> = k_grid.iter().map(|k| k.as_f64()).collect();
    Ok(TransitionReport {
        bracket: Bracket::from_classes(&ks, &classifications),
        k_grid: ks,
        classifications,
        ladders,
        reference_mass: profile.critical_mass(grid.convention()).as_f64(),
    })
}
