use std::time::Instant;

use gaussrobust::baselines;
use gaussrobust::contamination::contaminate;
use gaussrobust::cov_estimator::estimate_covariance;
use gaussrobust::distributions::{cov_with_effective_rank, sample_gaussian, sample_spherical, SphericalProfile};
use gaussrobust::linalg::norm;
use gaussrobust::mean_estimator::{build_sphere_net, default_net, estimate_mean};
use gaussrobust::orderstats::{quantile_concentration_experiment, TailFitReport};
use gaussrobust::{
    AdversaryKind, AdversarySpec, CovOptions, CovParams, GaussianModel, Matrix, MeanOptions, RngStream, Sample, SphereNet,
    SpdMatrix,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AdversaryChoice, CovModel, Estimator, ExperimentConfig, Scenario};
use crate::BenchError;

/// One estimator run on one trial of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub estimator: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    /// Effective rank of the clean covariance.
    pub rank: f64,
    pub trial: usize,
    /// `ℓ₂` error for means, operator-norm error for covariances, absolute
    /// deviation for quantiles; `NaN` when the estimator failed.
    pub error: f64,
    pub runtime_ms: f64,
    pub seed: u64,
    /// `ok`, or the failure message.
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.scenario
            .cmp(&other.scenario)
            .then_with(|| self.estimator.cmp(&other.estimator))
            .then(self.n.cmp(&other.n))
            .then(self.d.cmp(&other.d))
            .then(self.eps.total_cmp(&other.eps))
            .then(self.rank.total_cmp(&other.rank))
            .then(self.trial.cmp(&other.trial))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub tail_reports: Vec<TailFitReport>,
}

impl ExperimentOutput {
    /// True when there were trials and none of them succeeded.
    pub fn all_failed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| !r.is_ok())
    }
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    n: usize,
    eps: f64,
    d: usize,
    rank: f64,
}

fn grid(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &d in &cfg.grid_d {
        let ranks: Vec<f64> = match cfg.cov {
            CovModel::EffectiveRank => cfg.grid_rank.clone(),
            _ => vec![f64::NAN],
        };
        for &rank in &ranks {
            for &n in &cfg.grid_n {
                for &eps in &cfg.grid_eps {
                    out.push(GridPoint { n, eps, d, rank });
                }
            }
        }
    }
    out
}

fn covariance(cfg: &ExperimentConfig, p: &GridPoint) -> Result<SpdMatrix, BenchError> {
    Ok(match &cfg.cov {
        CovModel::Identity => SpdMatrix::identity(p.d),
        CovModel::EffectiveRank => cov_with_effective_rank(p.d, p.rank)?,
        CovModel::Diag(values) => SpdMatrix::diag(values)?,
    })
}

fn build_net(cfg: &ExperimentConfig, d: usize) -> Result<SphereNet, BenchError> {
    let stream = RngStream::new(cfg.seed, 1).child(d as u64);
    let net = match (cfg.net_directions, cfg.net_resolution) {
        (Some(k), _) if d == 2 => {
            if k < 4 || k % 2 == 1 {
                return Err(BenchError::Config(format!("net.directions = {k} must be even and at least 4")));
            }
            build_sphere_net(2, 2.0 * std::f64::consts::PI / k as f64, stream)
        }
        (_, Some(res)) => build_sphere_net(d, res, stream),
        _ => default_net(d, stream),
    };
    net.map_err(|e| BenchError::Config(format!("cannot build a net for d = {d}: {e}")))
}

fn unit_axis(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

fn adversary(cfg: &ExperimentConfig, mu: &[f64], eps: f64) -> AdversarySpec {
    let d = mu.len();
    let e1 = unit_axis(d);
    let far: Vec<f64> = mu.iter().zip(&e1).map(|(m, e)| m + cfg.magnitude * e).collect();
    let kind = match cfg.adversary {
        AdversaryChoice::None => return AdversarySpec::none(),
        AdversaryChoice::Cluster => AdversaryKind::Cluster { center: far },
        AdversaryChoice::Shift => AdversaryKind::Shift { base: mu.to_vec(), direction: e1, magnitude: cfg.magnitude },
        AdversaryChoice::Huber => AdversaryKind::Huber { center: far, scale: cfg.huber_scale },
        AdversaryChoice::MedianTilt => AdversaryKind::MedianTilt { direction: e1, offset: cfg.magnitude },
    };
    AdversarySpec::new(kind, eps)
}

/// Stream of trial `trial` at grid point `point`.
fn trial_stream(seed: u64, point: usize, trial: usize) -> RngStream {
    RngStream::new(seed, 0).child(point as u64).child(trial as u64)
}

fn estimator_index(e: Estimator) -> u64 {
    Estimator::ALL.iter().position(|&x| x == e).expect("listed") as u64
}

enum Truth {
    Mean(Vec<f64>),
    Cov(Matrix),
}

fn run_estimator(
    cfg: &ExperimentConfig,
    e: Estimator,
    x: &Sample,
    eps: f64,
    net: &SphereNet,
    stream: RngStream,
    truth: &Truth,
) -> gaussrobust::Result<f64> {
    match (e, truth) {
        (Estimator::Smoothmed, Truth::Mean(mu)) => {
            let opts = MeanOptions { mc_draws: cfg.mc_draws, net: Some(net.clone()), seed: stream, ..Default::default() };
            estimate_mean(x, eps, cfg.delta, &opts).map(|(m, _)| dist(&m, mu))
        }
        (Estimator::SampleMean, Truth::Mean(mu)) => baselines::sample_mean(x).map(|m| dist(&m, mu)),
        (Estimator::CoordMedian, Truth::Mean(mu)) => baselines::coord_median(x).map(|m| dist(&m, mu)),
        (Estimator::GeometricMedian, Truth::Mean(mu)) => baselines::geometric_median(x).map(|m| dist(&m, mu)),
        (Estimator::TrimmedMean, Truth::Mean(mu)) => baselines::trimmed_mean_net(x, eps, net).map(|m| dist(&m, mu)),
        (Estimator::Smoothcov, Truth::Cov(sigma)) => {
            let params = cfg.tuned.clone().map(CovParams::from).unwrap_or_default();
            let opts = CovOptions {
                params,
                net: Some(net.clone()),
                draws_per_direction: cfg.cov_draws,
                restarts: cfg.cov_restarts,
                iterations: cfg.cov_iterations,
                c_const: cfg.c_const,
                seed: stream,
                ..Default::default()
            };
            estimate_covariance(x, eps, cfg.delta, &opts).map(|(s, _)| op_dist(s.matrix(), sigma))
        }
        (Estimator::SampleCov, Truth::Cov(sigma)) => baselines::sample_cov(x).map(|s| op_dist(s.matrix(), sigma)),
        (Estimator::TrimmedCov, Truth::Cov(sigma)) => baselines::trimmed_cov(x, eps).map(|s| op_dist(s.matrix(), sigma)),
        _ => unreachable!("truth kind follows the estimator kind"),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff)
}

fn op_dist(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).sym_op_norm()
}

fn run_trial(
    cfg: &ExperimentConfig,
    index: usize,
    p: &GridPoint,
    trial: usize,
    net: &SphereNet,
) -> Result<Vec<ResultRow>, BenchError> {
    let stream = trial_stream(cfg.seed, index, trial);
    let sigma = covariance(cfg, p)?;
    let rank = sigma.effective_rank();
    let mu = vec![cfg.mean_offset; p.d];
    let clean = match cfg.profile {
        SphericalProfile::Gaussian => sample_gaussian(&GaussianModel::from_spd(mu.clone(), sigma.clone())?, p.n, stream.child(0))?,
        profile => sample_spherical(profile, &sigma, p.n, stream.child(0))?.translated(&mu),
    };
    let x = contaminate(&clean, &adversary(cfg, &mu, p.eps), stream.child(1))?;
    let scenario = cfg.scenario.to_string();
    let mut rows = Vec::with_capacity(cfg.estimators.len());
    for &e in &cfg.estimators {
        let truth = if e.is_covariance() { Truth::Cov(sigma.matrix().clone()) } else { Truth::Mean(mu.clone()) };
        let started = Instant::now();
        let outcome = run_estimator(cfg, e, &x, p.eps, net, stream.child(2).child(estimator_index(e)), &truth);
        let runtime_ms = if cfg.timing { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        let (error, status) = match outcome {
            Ok(err) => (err, "ok".to_string()),
            Err(err) => (f64::NAN, err.to_string()),
        };
        rows.push(ResultRow {
            scenario: scenario.clone(),
            estimator: e.name().to_string(),
            n: p.n,
            d: p.d,
            eps: p.eps,
            rank,
            trial,
            error,
            runtime_ms,
            seed: cfg.seed,
            status,
        });
    }
    Ok(rows)
}

fn run_concentration(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    let mut out = ExperimentOutput::default();
    let name = match cfg.concentration_dist {
        gaussrobust::orderstats::ConcentrationDist::Gaussian => "quantile_gaussian",
        gaussrobust::orderstats::ConcentrationDist::HalfNormal => "quantile_half_normal",
        gaussrobust::orderstats::ConcentrationDist::Chi2_1 => "quantile_chi2_1",
    };
    let mut index = 0;
    for &n in &cfg.grid_n {
        for &eps in &cfg.grid_eps {
            let stream = RngStream::new(cfg.seed, 0).child(index as u64);
            index += 1;
            let started = Instant::now();
            let report = quantile_concentration_experiment(cfg.concentration_dist, eps, n, cfg.trials, stream)?;
            let runtime_ms = if cfg.timing { started.elapsed().as_secs_f64() * 1e3 / cfg.trials as f64 } else { 0.0 };
            out.rows.extend(report.deviations.iter().enumerate().map(|(trial, dev)| ResultRow {
                scenario: cfg.scenario.to_string(),
                estimator: name.to_string(),
                n,
                d: 1,
                eps,
                rank: 1.0,
                trial,
                error: dev.abs(),
                runtime_ms,
                seed: cfg.seed,
                status: "ok".into(),
            }));
            out.tail_reports.push(report);
        }
    }
    out.rows.sort_by(ResultRow::key_cmp);
    Ok(out)
}

/// Runs every trial of every grid point in parallel. Estimator failures
/// become rows with `error = NaN`; rows come back sorted by their key, so the
/// output does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    cfg.validate()?;
    if cfg.scenario == Scenario::Concentration {
        return run_concentration(cfg);
    }
    let points = grid(cfg);
    for p in &points {
        covariance(cfg, p).map_err(|e| BenchError::Config(e.to_string()))?;
    }
    let mut nets = std::collections::BTreeMap::new();
    for p in &points {
        if !nets.contains_key(&p.d) {
            nets.insert(p.d, build_net(cfg, p.d)?);
        }
    }
    let jobs: Vec<(usize, usize)> =
        (0..points.len()).flat_map(|i| (0..cfg.trials).map(move |t| (i, t))).collect();
    let chunks = jobs
        .par_iter()
        .map(|&(i, t)| run_trial(cfg, i, &points[i], t, &nets[&points[i].d]))
        .collect::<Result<Vec<_>, BenchError>>()?;
    let mut rows: Vec<ResultRow> = chunks.into_iter().flatten().collect();
    rows.sort_by(ResultRow::key_cmp);
    Ok(ExperimentOutput { rows, tail_reports: Vec::new() })
}
