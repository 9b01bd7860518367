//! Covariance estimator for zero-mean Gaussian data under contamination.
//!
//! The estimate minimises, over the feasible set built from `(H, α, G, ω)`,
//! the worst direction's mean gap between `Med |⟨X, θ⟩|` and
//! `Φ⁻¹(3/4)·√(θᵀΓθ)` for truncated-posterior draws `θ` around each net
//! direction. The min-max problem is solved by projected subgradient descent
//! from several starts.

mod feasible;
mod objective;
mod posterior;

pub use feasible::{project_feasible, slack, FeasibleSetH, Residuals, DEFAULT_C_CONST, MAX_SWEEPS, MEMBERSHIP_TOL, PROJECTION_TOL};
pub use objective::{cov_objective, FrozenObjective};
pub use posterior::{
    centered_second_moment, estimate_h, estimate_h_with_rate, sample_posterior, sample_posterior_framed, PosteriorDraws, TruncatedPosteriorParams,
    MIN_ACCEPTANCE, PROPOSALS_PER_DRAW,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::mean_estimator::{default_net, SphereNet, MAX_EPS, MIN_TUNING_SAMPLES};
use crate::report::{EstimatorReport, ReportDetails, RestartSummary};
use crate::rng::{std_normal, RngStream};
use crate::sample::Sample;
use crate::scalar::Real;
use crate::tuning;

pub const DEFAULT_DRAWS_PER_DIRECTION: usize = 100;
pub const DEFAULT_H_DRAWS: usize = 20_000;
pub const DEFAULT_RESTARTS: usize = 5;
pub const DEFAULT_ITERATIONS: usize = 2000;

/// Tuning inputs; each `None` is estimated from the sample.
#[derive(Debug, Clone, Default)]
pub struct CovParams<T: Real> {
    pub beta: Option<u32>,
    pub omega: Option<T>,
    pub g: Option<SpdMatrix<T>>,
    pub alpha: Option<T>,
    pub tau: Option<T>,
}

impl<T: Real> From<tuning::TunedParams<T>> for CovParams<T> {
    fn from(t: tuning::TunedParams<T>) -> Self {
        Self { beta: Some(t.beta), omega: Some(t.omega), g: Some(t.g), alpha: t.alpha, tau: Some(t.tau) }
    }
}

#[derive(Debug, Clone)]
pub struct CovOptions<T: Real> {
    pub params: CovParams<T>,
    pub net: Option<SphereNet<T>>,
    pub draws_per_direction: usize,
    pub h_draws: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub c_const: T,
    pub seed: RngStream,
    /// Orthonormal frame applied to the posterior proposals and the restart
    /// perturbations.
    pub draw_frame: Option<Matrix<T>>,
}

impl<T: Real> Default for CovOptions<T> {
    fn default() -> Self {
        Self {
            params: CovParams::default(),
            net: None,
            draws_per_direction: DEFAULT_DRAWS_PER_DIRECTION,
            h_draws: DEFAULT_H_DRAWS,
            restarts: DEFAULT_RESTARTS,
            iterations: DEFAULT_ITERATIONS,
            c_const: T::lit(DEFAULT_C_CONST),
            seed: RngStream::new(0, 0),
            draw_frame: None,
        }
    }
}

// Sub-stream indices under the run seed.
const STREAM_NET: u64 = 0;
const STREAM_H: u64 = 1;
const STREAM_DRAWS: u64 = 2;
const STREAM_RESTARTS: u64 = 3;

/// Everything the optimiser needs, fixed before the first iteration.
pub struct CovProblem<T: Real> {
    pub net: SphereNet<T>,
    pub posterior: TruncatedPosteriorParams<T>,
    pub tau: T,
    pub acceptance_rate: T,
    pub set: FeasibleSetH<T>,
    pub objective: FrozenObjective<T>,
    pub init: SpdMatrix<T>,
}

fn check_inputs<T: Real>(sample: &Sample<T>, eps: T, delta: T) -> Result<()> {
    if !(eps >= T::zero() && eps < T::lit(MAX_EPS)) {
        return Err(Error::Domain(format!("eps {eps} outside [0, {MAX_EPS})")));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::Domain(format!("delta {delta} outside (0, 1)")));
    }
    if sample.n() < MIN_TUNING_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_TUNING_SAMPLES, got: sample.n() });
    }
    Ok(())
}

impl<T: Real> CovProblem<T> {
    /// Resolves tuning parameters, samples `H` and the frozen draws, and
    /// builds the feasible set and the initial point.
    pub fn build(sample: &Sample<T>, eps: T, delta: T, opts: &CovOptions<T>) -> Result<Self> {
        check_inputs(sample, eps, delta)?;
        let d = sample.d();
        if opts.draws_per_direction == 0 || opts.h_draws == 0 {
            return Err(Error::Domain("draw counts must be positive".into()));
        }
        let net = match &opts.net {
            Some(net) if net.dim() != d => return Err(Error::Dimension { expected: d, got: net.dim() }),
            Some(net) => net.clone(),
            None => default_net(d, opts.seed.child(STREAM_NET))?,
        };
        let p = &opts.params;
        let g = match &p.g {
            Some(g) if g.dim() != d => return Err(Error::Dimension { expected: d, got: g.dim() }),
            Some(g) => g.clone(),
            None => tuning::construct_g(sample, eps)?,
        };
        let tau = match p.tau {
            Some(t) => t,
            None => tuning::robust_trace(sample, eps)?,
        };
        let omega = match p.omega {
            Some(w) => w,
            None => tuning::robust_opnorm(sample, &net)?,
        };
        let beta = match p.beta {
            Some(b) => b,
            None => {
                if !(omega > T::zero()) {
                    return Err(Error::RankDegenerate(format!("omega {omega}")));
                }
                (tau / omega).round().max(T::one()).to_u32().unwrap_or(u32::MAX)
            }
        };
        let mut e1 = vec![T::zero(); d];
        e1[0] = T::one();
        let posterior = TruncatedPosteriorParams::new(beta, g.clone(), omega, e1, tau)?;
        let frame = opts.draw_frame.as_ref();
        if let Some(f) = frame {
            if f.rows() != d || f.cols() != d {
                return Err(Error::Dimension { expected: d, got: f.rows() });
            }
        }
        let (h, acceptance_rate) = estimate_h_with_rate(&posterior, opts.h_draws, opts.seed.child(STREAM_H), frame)?;
        let alpha = match p.alpha {
            Some(a) => a,
            None => tuning::estimate_alpha(sample, h.matrix())?,
        };
        let s = slack(opts.c_const, &g, delta, sample.n(), eps);
        let set = FeasibleSetH::new(h, alpha, g, omega, s)?;

        let draw_stream = opts.seed.child(STREAM_DRAWS);
        let draws = (0..net.len())
            .into_par_iter()
            .map(|i| {
                let pv = posterior.with_center(net.get(i))?;
                Ok(sample_posterior_framed(&pv, opts.draws_per_direction, draw_stream.child(i as u64), frame)?.draws)
            })
            .collect::<Result<Vec<_>>>()?;
        let objective = FrozenObjective::new(sample, &draws);
        let trimmed = tuning::trimmed_second_moment(sample, eps)?;
        let init = set.project(trimmed.matrix())?;
        Ok(Self { net, posterior, tau, acceptance_rate, set, objective, init })
    }
}

#[derive(Debug, Clone)]
pub struct RestartResult<T: Real> {
    pub estimate: SpdMatrix<T>,
    pub initial_objective: T,
    pub objective: T,
    /// Best objective so far after each iteration.
    pub trace: Vec<T>,
    pub iterations: usize,
}

/// Projected subgradient descent with normalised steps `η₀/√k`, keeping the
/// best iterate seen.
pub fn projected_subgradient<T: Real>(
    problem: &CovProblem<T>,
    start: SpdMatrix<T>,
    eta0: T,
    iterations: usize,
) -> Result<RestartResult<T>> {
    let obj = &problem.objective;
    let (f0, mut grad) = obj.value_and_subgradient(start.matrix());
    let mut best = (f0, start.clone());
    let mut x = start;
    let mut trace = Vec::with_capacity(iterations);
    let mut done = 0;
    for k in 1..=iterations {
        let gn = grad.frobenius();
        if !(gn > T::zero()) {
            break;
        }
        let step = eta0 / T::from_count(k).sqrt() / gn;
        x = problem.set.project(&x.matrix().axpy(-step, &grad))?;
        let (f, g) = obj.value_and_subgradient(x.matrix());
        grad = g;
        if f < best.0 {
            best = (f, x.clone());
        }
        trace.push(best.0);
        done = k;
    }
    Ok(RestartResult { estimate: best.1, initial_objective: f0, objective: best.0, trace, iterations: done })
}

/// Restart `0` starts from the projected trimmed second moment; the others
/// from projected perturbations of it of relative size 1/2.
pub fn restart_points<T: Real>(
    problem: &CovProblem<T>,
    restarts: usize,
    seed: RngStream,
    frame: Option<&Matrix<T>>,
) -> Result<Vec<SpdMatrix<T>>> {
    let init = &problem.init;
    let d = init.dim();
    let size = init.matrix().frobenius().max(init.op_norm()) * T::lit(0.5);
    let mut out = Vec::with_capacity(restarts);
    for r in 0..restarts {
        if r == 0 {
            out.push(init.clone());
            continue;
        }
        let mut rng = seed.child(r as u64).generator();
        let mut w = Matrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let z: T = std_normal(&mut rng);
                w[(i, j)] = z;
                w[(j, i)] = z;
            }
        }
        if let Some(f) = frame {
            w = f.matmul(&w)?.matmul(&f.transpose())?.symmetrized();
        }
        let wn = w.frobenius();
        let raw = if wn > T::zero() { init.matrix().axpy(size / wn, &w) } else { init.matrix().clone() };
        out.push(problem.set.project(&raw)?);
    }
    Ok(out)
}

pub fn estimate_covariance<T: Real>(
    contaminated: &Sample<T>,
    eps: T,
    delta: T,
    opts: &CovOptions<T>,
) -> Result<(SpdMatrix<T>, EstimatorReport<T>)> {
    if opts.restarts == 0 {
        return Err(Error::Domain("at least one restart is required".into()));
    }
    let problem = CovProblem::build(contaminated, eps, delta, opts)?;
    let starts = restart_points(&problem, opts.restarts, opts.seed.child(STREAM_RESTARTS), opts.draw_frame.as_ref())?;
    let eta0 = problem.init.op_norm() / T::lit(10.0);
    let runs = starts
        .into_par_iter()
        .map(|s| projected_subgradient(&problem, s, eta0, opts.iterations))
        .collect::<Result<Vec<_>>>()?;
    let mut winner = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.objective < runs[winner].objective {
            winner = i;
        }
    }
    let restarts: Vec<RestartSummary<T>> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| RestartSummary {
            restart: i,
            initial_objective: r.initial_objective,
            final_objective: r.objective,
            iterations: r.iterations,
        })
        .collect();
    let total_iterations = runs.iter().map(|r| r.iterations).sum();
    let best = runs.into_iter().nth(winner).expect("at least one restart");
    let report = EstimatorReport {
        objective: best.objective,
        iterations: total_iterations,
        mc_draws: opts.draws_per_direction,
        seed: opts.seed,
        beta: problem.posterior.beta,
        net_size: problem.net.len(),
        details: ReportDetails::TruncatedPosterior {
            estimate: best.estimate.clone(),
            omega: problem.set.omega,
            alpha: problem.set.alpha,
            tau_hat: problem.tau,
            acceptance_rate: problem.acceptance_rate,
            slack: problem.set.slack,
            objective_trace: best.trace,
            restarts,
        },
    };
    Ok((best.estimate, report))
}
