//! Flat `key = value` experiment configuration. Lists repeat their key or
//! separate values with commas; `#` starts a comment.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gaussrobust::distributions::SphericalProfile;
use gaussrobust::orderstats::ConcentrationDist;
use gaussrobust::TunedParams;
use serde::Serialize;

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Mean,
    Cov,
    Concentration,
    Sweep,
}

impl FromStr for Scenario {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "mean" => Ok(Self::Mean),
            "cov" => Ok(Self::Cov),
            "concentration" => Ok(Self::Concentration),
            "sweep" => Ok(Self::Sweep),
            other => Err(BenchError::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Cov => "cov",
            Self::Concentration => "concentration",
            Self::Sweep => "sweep",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Smoothmed,
    SampleMean,
    CoordMedian,
    GeometricMedian,
    TrimmedMean,
    Smoothcov,
    SampleCov,
    TrimmedCov,
}

impl Estimator {
    pub const ALL: [Estimator; 8] = [
        Self::Smoothmed,
        Self::SampleMean,
        Self::CoordMedian,
        Self::GeometricMedian,
        Self::TrimmedMean,
        Self::Smoothcov,
        Self::SampleCov,
        Self::TrimmedCov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Smoothmed => "smoothmed",
            Self::SampleMean => "sample_mean",
            Self::CoordMedian => "coord_median",
            Self::GeometricMedian => "geometric_median",
            Self::TrimmedMean => "trimmed_mean",
            Self::Smoothcov => "smoothcov",
            Self::SampleCov => "sample_cov",
            Self::TrimmedCov => "trimmed_cov",
        }
    }

    pub fn is_covariance(self) -> bool {
        matches!(self, Self::Smoothcov | Self::SampleCov | Self::TrimmedCov)
    }
}

impl FromStr for Estimator {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown estimator `{s}`")))
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Covariance of the clean model.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CovModel {
    Identity,
    /// `diag(1, s, …, s)` with the effective rank taken from `grid.rank`.
    EffectiveRank,
    Diag(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryChoice {
    None,
    Huber,
    Shift,
    Cluster,
    MedianTilt,
}

impl FromStr for AdversaryChoice {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "none" => Ok(Self::None),
            "huber" => Ok(Self::Huber),
            "shift" => Ok(Self::Shift),
            "cluster" => Ok(Self::Cluster),
            "median_tilt" => Ok(Self::MedianTilt),
            other => Err(BenchError::Config(format!("unknown adversary `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub profile: SphericalProfile,
    pub cov: CovModel,
    /// Every coordinate of the clean mean (mean scenarios only).
    pub mean_offset: f64,
    pub adversary: AdversaryChoice,
    /// Cluster norm, shift length, Huber offset or tilt offset.
    pub magnitude: f64,
    /// Spread of Huber outliers.
    pub huber_scale: f64,
    pub grid_n: Vec<usize>,
    pub grid_eps: Vec<f64>,
    pub grid_d: Vec<usize>,
    /// Effective ranks; only read with `cov = effective_rank`.
    pub grid_rank: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub delta: f64,
    /// Net size for `d = 2` (evenly spaced directions).
    pub net_directions: Option<usize>,
    /// Net resolution for any `d`; ignored when `net_directions` applies.
    pub net_resolution: Option<f64>,
    pub mc_draws: usize,
    pub cov_draws: usize,
    pub cov_iterations: usize,
    pub cov_restarts: usize,
    pub c_const: f64,
    /// Tuned covariance parameters loaded from JSON, bypassing auto-tuning.
    #[serde(skip)]
    pub tuned: Option<TunedParams>,
    pub concentration_dist: ConcentrationDist,
    pub timing: bool,
    pub csv_name: String,
    pub svg_name: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Mean,
            profile: SphericalProfile::Gaussian,
            cov: CovModel::Identity,
            mean_offset: 0.0,
            adversary: AdversaryChoice::None,
            magnitude: 1e6,
            huber_scale: 1.0,
            grid_n: vec![500],
            grid_eps: vec![0.0],
            grid_d: vec![2],
            grid_rank: vec![1.0],
            trials: 5,
            seed: 0,
            estimators: vec![Estimator::Smoothmed, Estimator::SampleMean],
            delta: 0.05,
            net_directions: None,
            net_resolution: None,
            mc_draws: 200,
            cov_draws: 100,
            cov_iterations: 2000,
            cov_restarts: 5,
            c_const: 3.0,
            tuned: None,
            concentration_dist: ConcentrationDist::Gaussian,
            timing: false,
            csv_name: "results.csv".into(),
            svg_name: Some("results.svg".into()),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, BenchError> {
    value.parse().map_err(|_| BenchError::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, BenchError> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, BenchError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(BenchError::Config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

impl ExperimentConfig {
    pub fn defaults_for(scenario: Scenario) -> Self {
        let mut cfg = Self { scenario, ..Self::default() };
        match scenario {
            Scenario::Cov => {
                cfg.grid_n = vec![2000];
                cfg.estimators = vec![Estimator::Smoothcov, Estimator::SampleCov, Estimator::TrimmedCov];
            }
            Scenario::Concentration => {
                cfg.grid_n = vec![1001];
                cfg.trials = 2000;
                cfg.estimators = Vec::new();
            }
            Scenario::Sweep => {
                cfg.grid_n = vec![250, 1000];
                cfg.grid_eps = vec![0.0, 0.1];
            }
            Scenario::Mean => {}
        }
        cfg
    }

    /// Parses `text` on top of the defaults for its scenario. Grid and
    /// estimator keys replace the defaults the first time they appear and
    /// accumulate afterwards.
    pub fn parse_str(text: &str, base_dir: Option<&Path>) -> Result<Self, BenchError> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        let scenario = match entries.iter().rev().find(|(k, _)| k == "scenario") {
            Some((k, v)) => parse(k, v)?,
            None => Scenario::Mean,
        };
        let mut cfg = Self::defaults_for(scenario);
        let mut seen_lists: Vec<&str> = Vec::new();
        let mut first = |key: &'static str| {
            let fresh = !seen_lists.contains(&key);
            if fresh {
                seen_lists.push(key);
            }
            fresh
        };
        let mut diag: Option<Vec<f64>> = None;
        let mut cov_kind: Option<String> = None;
        for (k, v) in &entries {
            let (k, v) = (k.as_str(), v.as_str());
            match k {
                "scenario" => {}
                "model" => cfg.profile = parse(k, v)?,
                "cov" => cov_kind = Some(v.to_string()),
                "cov.diag" => diag = Some(parse_list(k, v)?),
                "mean" => cfg.mean_offset = parse(k, v)?,
                "adversary" => cfg.adversary = parse(k, v)?,
                "adversary.magnitude" => cfg.magnitude = parse(k, v)?,
                "adversary.scale" => cfg.huber_scale = parse(k, v)?,
                "grid.n" => {
                    if first("grid.n") {
                        cfg.grid_n.clear();
                    }
                    cfg.grid_n.extend(parse_list::<usize>(k, v)?);
                }
                "grid.eps" => {
                    if first("grid.eps") {
                        cfg.grid_eps.clear();
                    }
                    cfg.grid_eps.extend(parse_list::<f64>(k, v)?);
                }
                "grid.d" => {
                    if first("grid.d") {
                        cfg.grid_d.clear();
                    }
                    cfg.grid_d.extend(parse_list::<usize>(k, v)?);
                }
                "grid.rank" => {
                    if first("grid.rank") {
                        cfg.grid_rank.clear();
                    }
                    cfg.grid_rank.extend(parse_list::<f64>(k, v)?);
                }
                "estimators" | "estimator" => {
                    if first("estimators") {
                        cfg.estimators.clear();
                    }
                    cfg.estimators.extend(parse_list::<Estimator>(k, v)?);
                }
                "trials" => cfg.trials = parse(k, v)?,
                "seed" => cfg.seed = parse(k, v)?,
                "delta" => cfg.delta = parse(k, v)?,
                "net.directions" => cfg.net_directions = Some(parse(k, v)?),
                "net.resolution" => cfg.net_resolution = Some(parse(k, v)?),
                "mc_draws" => cfg.mc_draws = parse(k, v)?,
                "cov.draws" => cfg.cov_draws = parse(k, v)?,
                "cov.iterations" => cfg.cov_iterations = parse(k, v)?,
                "cov.restarts" => cfg.cov_restarts = parse(k, v)?,
                "cov.c_const" => cfg.c_const = parse(k, v)?,
                "cov.tuned" => {
                    let path = match base_dir {
                        Some(dir) => dir.join(v),
                        None => PathBuf::from(v),
                    };
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| BenchError::Config(format!("`{k}`: cannot read {}: {e}", path.display())))?;
                    let tuned: TunedParams = serde_json::from_str(&text)
                        .map_err(|e| BenchError::Config(format!("`{k}`: invalid tuned parameters in {}: {e}", path.display())))?;
                    cfg.tuned = Some(tuned);
                }
                "concentration.dist" => {
                    cfg.concentration_dist = v.parse().map_err(|e: gaussrobust::Error| BenchError::Config(e.to_string()))?
                }
                "timing" => cfg.timing = parse_bool(k, v)?,
                "out.csv" => cfg.csv_name = v.to_string(),
                "out.svg" => cfg.svg_name = if v == "none" { None } else { Some(v.to_string()) },
                other => return Err(BenchError::Config(format!("unknown key `{other}`"))),
            }
        }
        cfg.cov = match cov_kind.as_deref() {
            None | Some("identity") => {
                if diag.is_some() {
                    CovModel::Diag(diag.take().unwrap_or_default())
                } else {
                    CovModel::Identity
                }
            }
            Some("effective_rank") => CovModel::EffectiveRank,
            Some("diag") => CovModel::Diag(
                diag.ok_or_else(|| BenchError::Config("`cov = diag` needs `cov.diag`".into()))?,
            ),
            Some(other) => return Err(BenchError::Config(format!("unknown covariance model `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text, path.parent())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.grid_n.is_empty() || self.grid_eps.is_empty() || self.grid_d.is_empty() || self.grid_rank.is_empty() {
            return bad("every grid needs at least one value".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.grid_n.contains(&0) || self.grid_d.contains(&0) {
            return bad("grid values of N and d must be positive".into());
        }
        if let Some(e) = self.grid_eps.iter().find(|e| !(0.0..0.5).contains(*e)) {
            return bad(format!("eps {e} outside [0, 0.5)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0, 1)", self.delta));
        }
        if self.mc_draws == 0 || self.cov_draws == 0 || self.cov_restarts == 0 {
            return bad("draw and restart counts must be positive".into());
        }
        if let CovModel::Diag(values) = &self.cov {
            if let Some(&d) = self.grid_d.iter().find(|&&d| d != values.len()) {
                return bad(format!("cov.diag has {} entries but the grid asks for d = {d}", values.len()));
            }
            if values.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return bad("cov.diag entries must be finite and non-negative".into());
            }
        }
        match self.scenario {
            Scenario::Concentration => {}
            Scenario::Mean | Scenario::Cov | Scenario::Sweep if self.estimators.is_empty() => {
                return bad("no estimators selected".into());
            }
            Scenario::Mean => {
                if let Some(e) = self.estimators.iter().find(|e| e.is_covariance()) {
                    return bad(format!("`{e}` is a covariance estimator; the mean scenario takes mean estimators"));
                }
            }
            Scenario::Cov => {
                if let Some(e) = self.estimators.iter().find(|e| !e.is_covariance()) {
                    return bad(format!("`{e}` is a mean estimator; the cov scenario takes covariance estimators"));
                }
            }
            Scenario::Sweep => {}
        }
        let wants_cov = self.scenario == Scenario::Cov || self.estimators.iter().any(|e| e.is_covariance());
        if wants_cov && self.profile != SphericalProfile::Gaussian {
            return bad("covariance estimators need `model = gaussian`".into());
        }
        if wants_cov && self.mean_offset != 0.0 {
            return bad("covariance estimators assume a zero-mean model; drop `mean`".into());
        }
        if let Some(t) = &self.tuned {
            if let Some(&d) = self.grid_d.iter().find(|&&d| d != t.g.dim()) {
                return bad(format!("cov.tuned is {}-dimensional but the grid asks for d = {d}", t.g.dim()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_comments() {
        let cfg = ExperimentConfig::parse_str(
            "scenario = mean\n# comment\ngrid.n = 100\ngrid.n = 200, 400\ngrid.eps = 0.1\nestimators = sample_mean\nseed = 7 # trailing\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.grid_n, vec![100, 200, 400]);
        assert_eq!(cfg.grid_eps, vec![0.1]);
        assert_eq!(cfg.estimators, vec![Estimator::SampleMean]);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "frobnicate = 1",
            "trials = 0",
            "grid.eps = 0.7",
            "estimators = smoothcov",
            "scenario = cov\nestimators = smoothmed",
            "cov = diag\ncov.diag = 1, 2, 3",
            "no equals sign",
        ] {
            assert!(matches!(ExperimentConfig::parse_str(text, None), Err(BenchError::Config(_))), "{text}");
        }
    }

    #[test]
    fn diag_model() {
        let cfg = ExperimentConfig::parse_str("scenario = cov\ncov = diag\ncov.diag = 2, 1\n", None).unwrap();
        assert_eq!(cfg.cov, CovModel::Diag(vec![2.0, 1.0]));
    }
}
