//! Flat `key = value` experiment configuration.
//!
//! Keys carry a section prefix (`model.p`, `mc.samples`); there is no
//! nesting. `#` starts a comment. Every key the chosen experiment reads has a
//! default, and the resolved value of each one is recorded together with
//! where it came from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use gibbs_core::fields::LawVariant;
use gibbs_core::spectral::Convention;
use gibbs_core::variational::AmplitudeRule;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    GroundState,
    GnsVerify,
    Covariance,
    PartitionLadder,
    ThresholdScan,
    OuRates,
    DriftDivergence,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::GroundState,
        ExperimentKind::GnsVerify,
        ExperimentKind::Covariance,
        ExperimentKind::PartitionLadder,
        ExperimentKind::ThresholdScan,
        ExperimentKind::OuRates,
        ExperimentKind::DriftDivergence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::GroundState => "ground_state",
            ExperimentKind::GnsVerify => "gns_verify",
            ExperimentKind::Covariance => "covariance",
            ExperimentKind::PartitionLadder => "partition_ladder",
            ExperimentKind::ThresholdScan => "threshold_scan",
            ExperimentKind::OuRates => "ou_rates",
            ExperimentKind::DriftDivergence => "drift_divergence",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// A configuration problem, located by key and, for file entries, line.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.key, self.reason),
            None => write!(f, "`{}`: {}", self.key, self.reason),
        }
    }
}

fn err(key: &str, line: Option<usize>, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    File,
    Flag,
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Setting {
    pub value: String,
    pub source: Source,
    #[serde(skip)]
    pub line: Option<usize>,
}

/// Raw entries of a config file before the experiment is known.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Setting>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| err(body, Some(line), "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(err(key, Some(line), "malformed key"));
            }
            if value.is_empty() {
                return Err(err(key, Some(line), "missing value"));
            }
            if !KEYS.iter().any(|k| k.name == key) {
                return Err(err(key, Some(line), "unknown key"));
            }
            let setting = Setting {
                value: value.to_string(),
                source: Source::File,
                line: Some(line),
            };
            if let Some(prev) = entries.insert(key.to_string(), setting) {
                return Err(err(
                    key,
                    Some(line),
                    format!("duplicate key, first set on line {}", prev.line.unwrap_or(0)),
                ));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn read(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("--config", None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets a key from a command-line flag, replacing any file value.
    pub fn set_flag(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(
            key.to_string(),
            Setting {
                value: value.into(),
                source: Source::Flag,
                line: None,
            },
        );
    }

    pub fn experiment(&self) -> Option<&Setting> {
        self.entries.get("experiment")
    }
}

struct KeySpec {
    name: &'static str,
    kinds: &'static [ExperimentKind],
    default: fn(ExperimentKind) -> &'static str,
}

use ExperimentKind::*;

const EVERY: &[ExperimentKind] = &ExperimentKind::ALL;
const SAMPLED: &[ExperimentKind] = &[Covariance, PartitionLadder, ThresholdScan, OuRates, DriftDivergence];
const PROFILED: &[ExperimentKind] = &[GroundState, GnsVerify, ThresholdScan, DriftDivergence];
const TORUS: &[ExperimentKind] = &[GnsVerify, Covariance, OuRates, DriftDivergence];

const KEYS: &[KeySpec] = &[
    KeySpec { name: "experiment", kinds: EVERY, default: |k| k.as_str() },
    KeySpec { name: "run.seed", kinds: EVERY, default: |_| "1" },
    KeySpec { name: "run.workers", kinds: EVERY, default: |_| "0" },
    KeySpec { name: "run.output_dir", kinds: EVERY, default: |_| "" },
    KeySpec {
        name: "run.convention",
        kinds: &[GnsVerify, Covariance, PartitionLadder, ThresholdScan, OuRates, DriftDivergence],
        default: |k| match k {
            GnsVerify | PartitionLadder | OuRates => "plain",
            _ => "twopi",
        },
    },
    KeySpec { name: "model.d", kinds: EVERY, default: |_| "1" },
    KeySpec { name: "model.s", kinds: EVERY, default: |_| "1" },
    KeySpec {
        name: "model.p",
        kinds: &[GroundState, GnsVerify, PartitionLadder, ThresholdScan, DriftDivergence],
        default: |k| match k {
            PartitionLadder => "4",
            DriftDivergence => "8",
            _ => "6",
        },
    },
    KeySpec { name: "law.variant", kinds: &[Covariance], default: |_| "massless_complex" },
    KeySpec {
        name: "grid.n",
        kinds: TORUS,
        default: |k| match k {
            GnsVerify => "16",
            Covariance => "16",
            OuRates => "512",
            _ => "256",
        },
    },
    KeySpec { name: "box.n", kinds: PROFILED, default: |_| "384" },
    KeySpec { name: "box.side", kinds: PROFILED, default: |_| "64" },
    KeySpec { name: "solver.max_iter", kinds: PROFILED, default: |_| "5000" },
    KeySpec { name: "solver.gradient_tol", kinds: PROFILED, default: |_| "1e-9" },
    KeySpec { name: "solver.residual_tol", kinds: PROFILED, default: |_| "1e-6" },
    KeySpec { name: "solver.flow_step", kinds: PROFILED, default: |_| "1" },
    KeySpec {
        name: "mc.samples",
        kinds: SAMPLED,
        default: |k| match k {
            Covariance => "10000",
            PartitionLadder | ThresholdScan => "100000",
            _ => "1000",
        },
    },
    KeySpec { name: "covariance.max_mode", kinds: &[Covariance], default: |_| "8" },
    KeySpec { name: "partition.k", kinds: &[PartitionLadder], default: |_| "1" },
    KeySpec { name: "partition.ladder", kinds: &[PartitionLadder, ThresholdScan], default: |_| "16,32,64,128" },
    KeySpec { name: "scan.k_factors", kinds: &[ThresholdScan], default: |_| "0.5,0.75,1,1.25,1.5" },
    KeySpec { name: "gns.delta", kinds: &[GnsVerify], default: |_| "0.05" },
    KeySpec { name: "gns.corpus", kinds: &[GnsVerify], default: |_| "1000" },
    KeySpec { name: "gns.band", kinds: &[GnsVerify], default: |_| "8" },
    KeySpec { name: "gns.slack", kinds: &[GnsVerify], default: |_| "1e-6" },
    KeySpec { name: "gns.soliton_rho", kinds: &[GnsVerify], default: |_| "0.05" },
    KeySpec { name: "gns.soliton_n", kinds: &[GnsVerify], default: |_| "2048" },
    KeySpec { name: "sobolev.s", kinds: &[GnsVerify], default: |_| "0.75,1.2" },
    KeySpec { name: "sobolev.radius", kinds: &[GnsVerify], default: |_| "1000" },
    KeySpec { name: "sobolev.band", kinds: &[GnsVerify], default: |_| "12" },
    KeySpec { name: "sobolev.nodes", kinds: &[GnsVerify], default: |_| "3" },
    KeySpec { name: "sobolev.panels_per_decade", kinds: &[GnsVerify], default: |_| "1" },
    KeySpec { name: "rates.m_ladder", kinds: &[OuRates], default: |_| "16,32,64,128,256" },
    KeySpec { name: "rates.steps", kinds: &[OuRates], default: |_| "256" },
    KeySpec { name: "drift.rho", kinds: &[DriftDivergence], default: |_| "1/8,1/16,1/32,1/64" },
    KeySpec { name: "drift.delta", kinds: &[DriftDivergence], default: |_| "0.05" },
    KeySpec { name: "drift.k_factor", kinds: &[DriftDivergence], default: |_| "1.5" },
    KeySpec { name: "drift.eta_fraction", kinds: &[DriftDivergence], default: |_| "0.1" },
    KeySpec { name: "drift.amplitude", kinds: &[DriftDivergence], default: |_| "mass_margin" },
    KeySpec { name: "drift.steps", kinds: &[DriftDivergence], default: |_| "256" },
];

/// Validated configuration of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    pub convention: Convention,
    pub d: usize,
    pub s: f64,
    pub p: f64,
    pub variant: LawVariant,
    pub n: usize,
    pub box_n: usize,
    pub box_side: f64,
    pub solver: gibbs_core::ground_state::SolverOptions,
    pub samples: usize,
    pub max_mode: usize,
    pub k: Vec<f64>,
    pub ladder: Vec<usize>,
    pub k_factors: Vec<f64>,
    pub gns_delta: f64,
    pub gns_corpus: usize,
    pub gns_band: usize,
    pub gns_slack: f64,
    pub soliton_rho: f64,
    pub soliton_n: usize,
    pub sobolev_s: Vec<f64>,
    pub sobolev_radius: f64,
    pub sobolev_band: usize,
    pub sobolev_nodes: usize,
    pub sobolev_panels: usize,
    pub m_ladder: Vec<usize>,
    pub steps: usize,
    pub rho: Vec<f64>,
    pub delta: f64,
    pub k_factor: f64,
    pub eta_fraction: f64,
    pub amplitude: AmplitudeRule,
    /// Every key the experiment reads, with its value and origin.
    pub resolved: BTreeMap<String, Setting>,
}

/// Reads a scalar or an `a/b` fraction.
fn parse_real(text: &str) -> Result<f64, String> {
    let v = match text.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (
                a.trim().parse().map_err(|_| format!("`{text}` is not a number"))?,
                b.trim().parse().map_err(|_| format!("`{text}` is not a number"))?,
            );
            a / b
        }
        None => text.parse().map_err(|_| format!("`{text}` is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{text}` is not finite"))
    }
}

fn parse_list<T>(text: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    text.split(',').map(|t| item(t.trim())).collect()
}

fn parse_count(text: &str) -> Result<usize, String> {
    text.parse().map_err(|_| format!("`{text}` is not a nonnegative integer"))
}

fn parse_amplitude(text: &str) -> Result<AmplitudeRule, String> {
    match text.split_once(':') {
        None if text == "mass_margin" => Ok(AmplitudeRule::MassMargin),
        Some(("capped", v)) => Ok(AmplitudeRule::Capped(parse_real(v)?)),
        Some(("fixed", v)) => Ok(AmplitudeRule::Fixed(parse_real(v)?)),
        _ => Err(format!("expected mass_margin, capped:<alpha> or fixed:<alpha>, got `{text}`")),
    }
}

fn is_dyadic(n: usize) -> bool {
    n.is_power_of_two()
}

struct Resolver<'a> {
    kind: ExperimentKind,
    raw: &'a RawConfig,
    resolved: BTreeMap<String, Setting>,
}

impl Resolver<'_> {
    fn setting(&mut self, key: &'static str) -> Setting {
        let spec = KEYS.iter().find(|k| k.name == key).expect("registered key");
        let s = self.raw.entries.get(key).cloned().unwrap_or_else(|| Setting {
            value: (spec.default)(self.kind).to_string(),
            source: Source::Default,
            line: None,
        });
        self.resolved.insert(key.to_string(), s.clone());
        s
    }

    fn get<T>(&mut self, key: &'static str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        let s = self.setting(key);
        parse(&s.value).map_err(|r| err(key, s.line, r))
    }

    /// Fails with the location of `key` when `ok` is false.
    fn check(&self, key: &'static str, ok: bool, reason: impl Into<String>) -> Result<(), ConfigError> {
        if ok {
            return Ok(());
        }
        let line = self.resolved.get(key).and_then(|s| s.line);
        Err(err(key, line, reason))
    }
}

impl ExperimentConfig {
    /// Resolves and validates `raw` for `kind`; keys that `kind` does not
    /// read are rejected.
    pub fn resolve(kind: ExperimentKind, raw: &RawConfig) -> Result<Self, ConfigError> {
        if let Some(e) = raw.experiment() {
            let named: ExperimentKind = e.value.parse().map_err(|r: String| err("experiment", e.line, r))?;
            if named != kind {
                return Err(err(
                    "experiment",
                    e.line,
                    format!("config is for `{named}` but `{kind}` was requested"),
                ));
            }
        }
        for (key, s) in &raw.entries {
            let spec = KEYS.iter().find(|k| k.name == key).expect("parsed keys are registered");
            if !spec.kinds.contains(&kind) {
                return Err(err(key, s.line, format!("not used by experiment `{kind}`")));
            }
        }
        let mut r = Resolver {
            kind,
            raw,
            resolved: BTreeMap::new(),
        };
        let applies = |key: &str| KEYS.iter().any(|k| k.name == key && k.kinds.contains(&kind));

        r.setting("experiment");
        let seed = r.get("run.seed", |t| t.parse::<u64>().map_err(|_| format!("`{t}` is not a u64")))?;
        let workers = r.get("run.workers", parse_count)?;
        let output_dir = r.get("run.output_dir", |t| Ok((!t.is_empty()).then(|| PathBuf::from(t))))?;
        let convention = if applies("run.convention") {
            r.get("run.convention", |t| t.parse::<Convention>().map_err(|e| e.to_string()))?
        } else {
            Convention::TwoPi
        };
        let d = r.get("model.d", parse_count)?;
        r.check("model.d", (1..=3).contains(&d), format!("dimension must be 1, 2 or 3, got {d}"))?;
        let s = r.get("model.s", parse_real)?;
        r.check("model.s", s > 0.0, format!("need s > 0, got {s}"))?;
        let p = if applies("model.p") {
            let p = r.get("model.p", parse_real)?;
            r.check("model.p", p > 2.0, format!("need p > 2, got {p}"))?;
            if 2.0 * s < d as f64 {
                let top = 2.0 * d as f64 / (d as f64 - 2.0 * s);
                r.check("model.p", p <= top, format!("need p <= 2d/(d-2s) = {top}, got {p}"))?;
            }
            p
        } else {
            0.0
        };
        if matches!(kind, OuRates | DriftDivergence | PartitionLadder | ThresholdScan) {
            r.check("model.s", 2.0 * s > d as f64, format!("sampled fields need s > d/2 = {}", d as f64 / 2.0))?;
        }
        if kind == ThresholdScan {
            let critical = 4.0 * s / d as f64 + 2.0;
            r.check(
                "model.p",
                (p - critical).abs() <= 1e-12 * p,
                format!("threshold_scan needs the critical exponent p = 4s/d + 2 = {critical}, got {p}"),
            )?;
        }
        let variant = if applies("law.variant") {
            r.get("law.variant", |t| t.parse::<LawVariant>().map_err(|e| e.to_string()))?
        } else {
            LawVariant::MasslessComplex
        };
        let n = if applies("grid.n") {
            let n = r.get("grid.n", parse_count)?;
            r.check("grid.n", n >= 1, "need at least one mode")?;
            n
        } else {
            0
        };
        let (box_n, box_side, solver) = if applies("box.n") {
            let box_n = r.get("box.n", parse_count)?;
            r.check("box.n", box_n >= 8, "the profile box needs at least 8 modes")?;
            let box_side = r.get("box.side", parse_real)?;
            r.check("box.side", box_side > 0.0, "box side must be positive")?;
            let solver = gibbs_core::ground_state::SolverOptions {
                max_iter: r.get("solver.max_iter", parse_count)?,
                gradient_tol: r.get("solver.gradient_tol", parse_real)?,
                residual_tol: r.get("solver.residual_tol", parse_real)?,
                flow_step: r.get("solver.flow_step", parse_real)?,
            };
            r.check("solver.flow_step", solver.flow_step > 0.0, "step must be positive")?;
            (box_n, box_side, solver)
        } else {
            (0, 0.0, Default::default())
        };
        let samples = if applies("mc.samples") {
            let samples = r.get("mc.samples", parse_count)?;
            let least = if kind == Covariance { 100 } else { 2 };
            r.check("mc.samples", samples >= least, format!("need at least {least} samples"))?;
            samples
        } else {
            0
        };
        let max_mode = if applies("covariance.max_mode") {
            let m = r.get("covariance.max_mode", parse_count)?;
            r.check("covariance.max_mode", m <= n, format!("reported modes must lie on the grid (N = {n})"))?;
            m
        } else {
            0
        };
        let k = if applies("partition.k") {
            let k = r.get("partition.k", |t| parse_list(t, parse_real))?;
            r.check("partition.k", k.iter().all(|v| *v > 0.0), "cutoffs must be positive")?;
            k
        } else {
            vec![]
        };
        let ladder = if applies("partition.ladder") {
            let l = r.get("partition.ladder", |t| parse_list(t, parse_count))?;
            r.check("partition.ladder", l.len() >= 3, "need at least 3 ladder levels")?;
            r.check(
                "partition.ladder",
                l[0] >= 1 && l.windows(2).all(|w| w[0] < w[1]),
                "truncations must be positive and strictly increasing",
            )?;
            l
        } else {
            vec![]
        };
        let k_factors = if applies("scan.k_factors") {
            let f = r.get("scan.k_factors", |t| parse_list(t, parse_real))?;
            r.check(
                "scan.k_factors",
                f[0] > 0.0 && f.windows(2).all(|w| w[0] < w[1]),
                "factors must be positive and strictly increasing",
            )?;
            f
        } else {
            vec![]
        };
        let mut cfg = ExperimentConfig {
            kind,
            seed,
            workers,
            output_dir,
            convention,
            d,
            s,
            p,
            variant,
            n,
            box_n,
            box_side,
            solver,
            samples,
            max_mode,
            k,
            ladder,
            k_factors,
            gns_delta: 0.0,
            gns_corpus: 0,
            gns_band: 0,
            gns_slack: 0.0,
            soliton_rho: 0.0,
            soliton_n: 0,
            sobolev_s: vec![],
            sobolev_radius: 0.0,
            sobolev_band: 0,
            sobolev_nodes: 0,
            sobolev_panels: 0,
            m_ladder: vec![],
            steps: 0,
            rho: vec![],
            delta: 0.0,
            k_factor: 0.0,
            eta_fraction: 0.0,
            amplitude: AmplitudeRule::MassMargin,
            resolved: BTreeMap::new(),
        };
        if kind == GnsVerify {
            cfg.gns_delta = r.get("gns.delta", parse_real)?;
            r.check("gns.delta", cfg.gns_delta > 0.0, "need δ > 0")?;
            cfg.gns_corpus = r.get("gns.corpus", parse_count)?;
            r.check("gns.corpus", cfg.gns_corpus >= 2, "need at least 2 fields")?;
            cfg.gns_band = r.get("gns.band", parse_count)?;
            r.check("gns.band", (1..=n).contains(&cfg.gns_band), format!("band must lie in 1..={n}"))?;
            cfg.gns_slack = r.get("gns.slack", parse_real)?;
            r.check("gns.slack", cfg.gns_slack >= 0.0, "slack must be nonnegative")?;
            cfg.soliton_rho = r.get("gns.soliton_rho", parse_real)?;
            r.check("gns.soliton_rho", cfg.soliton_rho > 0.0 && cfg.soliton_rho < 1.0, "need 0 < ρ < 1")?;
            cfg.soliton_n = r.get("gns.soliton_n", parse_count)?;
            r.check("gns.soliton_n", cfg.soliton_n >= 1, "need at least one mode")?;
            cfg.sobolev_s = r.get("sobolev.s", |t| parse_list(t, parse_real))?;
            r.check("sobolev.s", cfg.sobolev_s.iter().all(|v| *v > 0.0), "need s > 0")?;
            cfg.sobolev_radius = r.get("sobolev.radius", parse_real)?;
            r.check("sobolev.radius", cfg.sobolev_radius > 1.0, "need R > 1")?;
            cfg.sobolev_band = r.get("sobolev.band", parse_count)?;
            r.check("sobolev.band", cfg.sobolev_band >= 1, "need a nonempty band")?;
            cfg.sobolev_nodes = r.get("sobolev.nodes", parse_count)?;
            r.check("sobolev.nodes", cfg.sobolev_nodes >= 1, "need at least one node")?;
            cfg.sobolev_panels = r.get("sobolev.panels_per_decade", parse_count)?;
            r.check("sobolev.panels_per_decade", cfg.sobolev_panels >= 1, "need at least one panel")?;
        }
        if kind == OuRates {
            cfg.m_ladder = r.get("rates.m_ladder", |t| parse_list(t, parse_count))?;
            r.check("rates.m_ladder", cfg.m_ladder.len() >= 4, "need at least 4 ladder levels")?;
            r.check(
                "rates.m_ladder",
                cfg.m_ladder.iter().all(|m| is_dyadic(*m) && *m <= n),
                format!("ladder must be powers of two up to grid.n = {n}"),
            )?;
            cfg.steps = r.get("rates.steps", parse_count)?;
            r.check("rates.steps", cfg.steps >= 1, "need at least one time step")?;
        }
        if kind == DriftDivergence {
            cfg.rho = r.get("drift.rho", |t| parse_list(t, parse_real))?;
            r.check("drift.rho", cfg.rho.len() >= 4, "need at least 4 scales")?;
            r.check(
                "drift.rho",
                cfg.rho.iter().all(|v| *v > 0.0 && *v < 1.0 && is_dyadic((1.0 / v).round() as usize) && (1.0 / v).fract() == 0.0),
                "scales must be 1/2^j with j >= 1",
            )?;
            r.check(
                "drift.rho",
                cfg.rho.iter().all(|v| (1.0 / v).round() as usize <= n),
                format!("smoother cutoff M = 1/ρ must not exceed grid.n = {n}"),
            )?;
            cfg.delta = r.get("drift.delta", parse_real)?;
            r.check("drift.delta", cfg.delta > 0.0 && cfg.delta < 1.0 / 6.0, "need 0 < δ < 1/6")?;
            cfg.k_factor = r.get("drift.k_factor", parse_real)?;
            r.check("drift.k_factor", cfg.k_factor > 0.0, "need K > 0")?;
            cfg.eta_fraction = r.get("drift.eta_fraction", parse_real)?;
            r.check(
                "drift.eta_fraction",
                cfg.eta_fraction > 0.0 && cfg.eta_fraction < 1.0,
                "need 0 < η/K < 1",
            )?;
            cfg.amplitude = r.get("drift.amplitude", parse_amplitude)?;
            cfg.steps = r.get("drift.steps", parse_count)?;
            r.check("drift.steps", cfg.steps >= 1, "need at least one time step")?;
        }
        cfg.resolved = r.resolved;
        Ok(cfg)
    }

    /// Resolved keys as `key = value` lines, sorted; loads back unchanged.
    pub fn to_text(&self) -> String {
        self.resolved
            .iter()
            .filter(|(k, _)| k.as_str() != "run.output_dir" || !self.resolved[*k].value.is_empty())
            .map(|(k, s)| format!("{k} = {}\n", s.value))
            .collect()
    }

    /// SHA-256 of the keys that determine numeric output; the worker count
    /// and output location are excluded.
    pub fn hash(&self) -> String {
        let canonical: String = self
            .resolved
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "run.workers" | "run.output_dir"))
            .map(|(k, s)| format!("{k} = {}\n", s.value))
            .collect();
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}
