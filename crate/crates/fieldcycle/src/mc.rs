//! Monte Carlo path sampling used to check the analytic results.
//!
//! Agent paths follow the Langevin dynamics implied by the Gaussian
//! statistical weights, integrated with Euler–Maruyama steps. Every ensemble
//! is reproducible from its seed. Paths are grouped in chunks of
//! [`CHUNK_SIZE`]; chunk `k` draws from a ChaCha12 generator seeded with
//! `seed_from_u64(seed)` and switched to stream `k`. The endpoints therefore
//! do not depend on the number of worker threads.
//!
//! Paths whose capital becomes negative are kept and flagged. Production and
//! marginal product are taken as zero while `K ≤ 0`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{self, Convention};
use crate::model::AgentState;
use crate::params::ModelParams;
use crate::phase::PhaseSolution;

/// Number of paths sharing one random stream.
pub const CHUNK_SIZE: usize = 256;

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Euler,
}

/// Mapping from a weight `exp(−∫(ẋ−μ)²/w² dt)` to a diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    /// Diffusion `w/√2` (variance rate `w²/2`).
    WeightHalf,
    /// Diffusion `√2·w` (variance rate `2w²`), the rate of the covariance system.
    #[default]
    Operator,
}

/// Drift used for the capital and consumption equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftModel {
    /// `dC = (AF′(K)+r_c)(C−C̄_ι)dt`, `dK = (AF(K) − C − δK)dt`.
    #[default]
    Production,
    /// The right-hand side of the average-path equations.
    AveragePath,
}

/// Sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Pair each path with its mirror image `−dW`.
    pub antithetic: bool,
    pub noise: NoiseConvention,
    pub drift: DriftModel,
    /// Multiplies every diffusion coefficient; zero gives deterministic paths.
    pub noise_scale: f64,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 1e-3,
            seed: 0,
            scheme: Scheme::Euler,
            antithetic: false,
            noise: NoiseConvention::Operator,
            drift: DriftModel::Production,
            noise_scale: 1.0,
        }
    }
}

impl MCConfig {
    fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::Parameter("n_paths must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Parameter("noise_scale must be >= 0".into()));
        }
        Ok(())
    }

    /// Number of steps covering `t`; `t` must be an integral multiple of `dt`.
    pub fn n_steps(&self, t: f64) -> Result<usize> {
        let n = (t / self.dt).round();
        if n < 1.0 || ((n * self.dt - t).abs() > 1e-9 * t.abs().max(self.dt)) {
            return Err(Error::Parameter(format!(
                "horizon {t} is not a positive multiple of dt = {}",
                self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// Sample mean, variance and covariance of the endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: [f64; 3],
    pub variance: [f64; 3],
    pub covariance: [[f64; 3]; 3],
}

impl Moments {
    /// Moments of a non-empty sample, accumulated in index order.
    pub fn from_states(states: &[AgentState]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Parameter("empty ensemble".into()));
        }
        let n = states.len() as f64;
        let mut mean = [0.0; 3];
        for s in states {
            let x = s.to_array();
            for i in 0..3 {
                mean[i] += x[i];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut cov = [[0.0; 3]; 3];
        for s in states {
            let x = s.to_array();
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]);
                }
            }
        }
        let denom = (n - 1.0).max(1.0);
        for row in &mut cov {
            for v in row.iter_mut() {
                *v /= denom;
            }
        }
        Ok(Self {
            mean,
            variance: [cov[0][0], cov[1][1], cov[2][2]],
            covariance: cov,
        })
    }
}

/// Endpoints of a sampled ensemble with their moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub initial: AgentState,
    pub t: f64,
    pub endpoints: Vec<AgentState>,
    /// Paths whose capital went negative at some step.
    pub negative_k: Vec<bool>,
    pub moments: Moments,
    pub seed: u64,
    pub n_steps: usize,
    pub config: MCConfig,
}

impl PathEnsemble {
    pub fn negative_k_count(&self) -> usize {
        self.negative_k.iter().filter(|f| **f).count()
    }

    /// Writes the endpoints as CSV `path_id,C,K,A`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["path_id", "C", "K", "A"])?;
        for (i, s) in self.endpoints.iter().enumerate() {
            w.write_record([
                i.to_string(),
                crate::params::fmt_num(s.C),
                crate::params::fmt_num(s.K),
                crate::params::fmt_num(s.A),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Diffusion coefficients of (C, K, A) under a convention.
pub fn diffusion(params: &ModelParams, noise: NoiseConvention) -> [f64; 3] {
    let w = [params.varpi, params.nu, 1.0 / params.lambda()];
    let f = match noise {
        NoiseConvention::WeightHalf => std::f64::consts::FRAC_1_SQRT_2,
        NoiseConvention::Operator => std::f64::consts::SQRT_2,
    };
    w.map(|v| v * f)
}

struct Dynamics {
    params: ModelParams,
    c_bar: f64,
    a_bar: f64,
    k_e: f64,
    model: DriftModel,
    sigma: [f64; 3],
}

impl Dynamics {
    fn new(params: &ModelParams, solution: &PhaseSolution, mc: &MCConfig) -> Result<Self> {
        let k_e = match mc.drift {
            DriftModel::AveragePath => green::equilibrium(params, solution)?.K,
            DriftModel::Production => 0.0,
        };
        Ok(Self {
            params: *params,
            c_bar: solution.C_bar_phase,
            a_bar: solution.A_bar_phase,
            k_e,
            model: mc.drift,
            sigma: diffusion(params, mc.noise).map(|s| s * mc.noise_scale),
        })
    }

    fn drift(&self, x: &[f64; 3]) -> [f64; 3] {
        let p = &self.params;
        let [c, k, a] = *x;
        let (f, fp) = if k > 0.0 {
            (k.powf(p.epsilon), p.f_prime(k))
        } else {
            (0.0, 0.0)
        };
        let da = -(a - self.a_bar) / (2.0 * p.lambda_sq);
        match self.model {
            DriftModel::Production => [
                (a * fp + p.r_c) * (c - self.c_bar),
                a * f - c - p.delta * k,
                da,
            ],
            DriftModel::AveragePath => [
                (a * fp + p.r_c - p.delta) * (c - self.c_bar),
                (a * fp - p.delta) * (k - self.k_e) - (c - self.c_bar),
                da,
            ],
        }
    }
}

/// Simulates paths `first..first+count` of chunk `chunk`, calling `observe`
/// after every step with the path index, step index, old and new state.
#[allow(clippy::too_many_arguments)]
fn simulate_chunk<O>(
    dynamics: &Dynamics,
    initial: AgentState,
    n_steps: usize,
    dt: f64,
    mc: &MCConfig,
    chunk: usize,
    count: usize,
    observe: &mut O,
) -> Vec<(AgentState, bool)>
where
    O: FnMut(usize, usize, &[f64; 3], &[f64; 3]),
{
    let mut rng = ChaCha12Rng::seed_from_u64(mc.seed);
    rng.set_stream(chunk as u64);
    let sq = dt.sqrt();
    let mut out = Vec::with_capacity(count);
    let mut i = 0;
    while i < count {
        let pair = mc.antithetic && i + 1 < count;
        let width = if pair { 2 } else { 1 };
        let mut xs = [initial.to_array(); 2];
        let mut neg = [false; 2];
        for step in 0..n_steps {
            let z: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            for (m, x) in xs.iter_mut().enumerate().take(width) {
                let sign = if m == 0 { 1.0 } else { -1.0 };
                let d = dynamics.drift(x);
                let old = *x;
                for j in 0..3 {
                    x[j] += d[j] * dt + dynamics.sigma[j] * sq * sign * z[j];
                }
                if x[1] < 0.0 {
                    neg[m] = true;
                }
                observe(i + m, step, &old, x);
            }
        }
        for m in 0..width {
            out.push((AgentState::from_array(xs[m]), neg[m]));
        }
        i += width;
    }
    out
}

fn chunk_bounds(n_paths: usize) -> Vec<(usize, usize)> {
    (0..n_paths.div_ceil(CHUNK_SIZE))
        .map(|k| (k, CHUNK_SIZE.min(n_paths - k * CHUNK_SIZE)))
        .collect()
}

/// Samples `mc.n_paths` endpoints at horizon `t` starting from `initial`.
pub fn sample_paths(
    initial: AgentState,
    t: f64,
    solution: &PhaseSolution,
    params: &ModelParams,
    mc: &MCConfig,
) -> Result<PathEnsemble> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be > 0")));
    }
    mc.validate()?;
    if !initial.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite initial state {initial:?}"
        )));
    }
    let n_steps = mc.n_steps(t)?;
    let dt = t / n_steps as f64;
    let dynamics = Dynamics::new(params, solution, mc)?;
    let chunks: Vec<Vec<(AgentState, bool)>> = chunk_bounds(mc.n_paths)
        .into_par_iter()
        .map(|(k, count)| {
            simulate_chunk(
                &dynamics,
                initial,
                n_steps,
                dt,
                mc,
                k,
                count,
                &mut |_, _, _, _| {},
            )
        })
        .collect();
    let (endpoints, negative_k): (Vec<_>, Vec<_>) = chunks.into_iter().flatten().unzip();
    let moments = Moments::from_states(&endpoints)?;
    Ok(PathEnsemble {
        initial,
        t,
        endpoints,
        negative_k,
        moments,
        seed: mc.seed,
        n_steps,
        config: *mc,
    })
}

/// Draws an ensemble directly from independent Gaussians with the given
/// per-coordinate means and variances.
pub fn sample_gaussian(
    mean: [f64; 3],
    variance: [f64; 3],
    n: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if n < 1 {
        return Err(Error::Parameter("n must be >= 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let endpoints: Vec<AgentState> = (0..n)
        .map(|_| {
            AgentState::from_array(std::array::from_fn(|i| {
                mean[i] + variance[i].sqrt() * rng.sample::<f64, _>(StandardNormal)
            }))
        })
        .collect();
    let moments = Moments::from_states(&endpoints)?;
    Ok(PathEnsemble {
        initial: AgentState::from_array(mean),
        t: 0.0,
        negative_k: vec![false; n],
        endpoints,
        moments,
        seed,
        n_steps: 0,
        config: MCConfig {
            n_paths: n,
            seed,
            ..MCConfig::default()
        },
    })
}

/// One-sample Kolmogorov–Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `Q(x) = 2Σ(−1)^{k−1}e^{−2k²x²}`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// KS test of `sample` against `N(mean, variance)`.
pub fn ks_normal(sample: &[f64], mean: f64, variance: f64) -> KsResult {
    let mut xs: Vec<f64> = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let sd = variance.sqrt();
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = crate::phase::normal_cdf((x - mean) / sd);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    KsResult {
        statistic: d,
        p_value: kolmogorov_q((sn + 0.12 + 0.11 / sn) * d),
    }
}

/// Agreement of an ensemble with the analytic density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub analytic_mean: [f64; 3],
    pub analytic_variance: [f64; 3],
    pub sample_mean: [f64; 3],
    pub sample_variance: [f64; 3],
    pub z_mean: [f64; 3],
    pub z_variance: [f64; 3],
    pub ks: [KsResult; 3],
    pub z_threshold: f64,
    pub ks_threshold: f64,
    pub negative_k_paths: usize,
    pub pass: bool,
}

/// Gaussian with the given moments, used as the analytic reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub mean: [f64; 3],
    pub variance: [f64; 3],
}

/// Mean and variances of the analytic density from `from` at horizon `t`,
/// with coefficients evaluated at its most likely endpoint.
pub fn analytic_reference(
    from: AgentState,
    t: f64,
    solution: &PhaseSolution,
    params: &ModelParams,
    convention: Convention,
) -> Result<Reference> {
    let to = green::argmax(from, t, solution, params, convention)?;
    let d = green::transition_density(from, to, t, solution, params, convention)?;
    Ok(Reference {
        mean: d.mean.to_array(),
        variance: d.variances,
    })
}

/// Mean and variance z-scores and KS statistics of `ensemble` against `reference`.
pub fn compare_to_green(
    ensemble: &PathEnsemble,
    reference: &Reference,
) -> Result<ComparisonReport> {
    let n = ensemble.endpoints.len();
    if n < 2 {
        return Err(Error::Parameter("ensemble needs at least 2 paths".into()));
    }
    let nf = n as f64;
    let m = &ensemble.moments;
    let z_threshold = 4.0;
    let ks_threshold = 1e-3;
    let mut z_mean = [0.0; 3];
    let mut z_var = [0.0; 3];
    let mut ks = [KsResult {
        statistic: 0.0,
        p_value: 1.0,
    }; 3];
    for i in 0..3 {
        let v = reference.variance[i];
        if !(v > 0.0) {
            return Err(Error::Domain(format!("reference variance {v} must be > 0")));
        }
        z_mean[i] = (m.mean[i] - reference.mean[i]) / (v / nf).sqrt();
        z_var[i] = (m.variance[i] - v) / (v * (2.0 / (nf - 1.0)).sqrt());
        let col: Vec<f64> = ensemble.endpoints.iter().map(|s| s.to_array()[i]).collect();
        ks[i] = ks_normal(&col, reference.mean[i], v);
    }
    let pass = z_mean.iter().chain(&z_var).all(|z| z.abs() <= z_threshold)
        && ks.iter().all(|k| k.p_value > ks_threshold);
    Ok(ComparisonReport {
        analytic_mean: reference.mean,
        analytic_variance: reference.variance,
        sample_mean: m.mean,
        sample_variance: m.variance,
        z_mean,
        z_variance: z_var,
        ks,
        z_threshold,
        ks_threshold,
        negative_k_paths: ensemble.negative_k_count(),
        pass,
    })
}

/// Statistics of the discrete budget-constrained consumption process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub horizon: usize,
    pub n_paths: usize,
    /// Variance of `Ĉ(t) − Ĉ(t+1) + Ŷ(t+1)/T`.
    pub increment_variance: f64,
    /// Lag-1 autocorrelation of consecutive, overlapping increments.
    pub increment_lag1: f64,
    /// Lag-1 autocorrelation of disjoint increments (odd t only).
    pub disjoint_increment_lag1: f64,
    /// Lag-1 autocorrelation of the underlying Gaussian variables X(t).
    pub x_lag1: f64,
    /// Mean of `|ΣŶ − ΣĈ|` at the horizon.
    pub residual_mean_abs: f64,
    /// Standard deviation of the terminal residual.
    pub residual_std: f64,
    /// `σ̄/√2`, the residual spread implied by the soft constraint.
    pub expected_residual_std: f64,
    pub pass: bool,
}

fn lag1(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let cov: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    cov / var
}

/// Simulates the discrete consumption process with a soft terminal
/// constraint of width `params.sigma_sq` over `horizon` periods.
///
/// X(t) are independent standard Gaussians, Ŷ(t) independent standard
/// Gaussian production shocks, and `Ĉ(t) = X(t) + (ΣŶ − Σ_{s<t}Ĉ)/T`. The
/// last period absorbs the budget so that the residual `ΣŶ − ΣĈ` equals
/// `−X_T` with `X_T ~ N(0, σ̄²/2)`.
pub fn budget_brownian_check(
    params: &ModelParams,
    horizon: usize,
    mc: &MCConfig,
) -> Result<BudgetReport> {
    if horizon < 10 {
        return Err(Error::Parameter(format!("horizon {horizon} must be >= 10")));
    }
    mc.validate()?;
    let tf = horizon as f64;
    let sigma_bar = params.sigma_sq.sqrt();
    struct PathOut {
        inc: Vec<f64>,
        x: Vec<f64>,
        residual: f64,
    }
    let paths: Vec<PathOut> = (0..mc.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha12Rng::seed_from_u64(mc.seed);
            rng.set_stream(p as u64);
            let mut x = Vec::with_capacity(horizon);
            let mut c = Vec::with_capacity(horizon);
            let mut y = Vec::with_capacity(horizon);
            let (mut sum_y, mut sum_c) = (0.0, 0.0);
            for t in 0..horizon {
                let yt: f64 = rng.sample(StandardNormal);
                let z: f64 = rng.sample(StandardNormal);
                sum_y += yt;
                let ct = if t + 1 < horizon {
                    x.push(z);
                    z + (sum_y - sum_c) / tf
                } else {
                    let xt = z * sigma_bar / std::f64::consts::SQRT_2;
                    x.push(xt);
                    sum_y - sum_c + xt
                };
                sum_c += ct;
                c.push(ct);
                y.push(yt);
            }
            let inc: Vec<f64> = (0..horizon - 2)
                .map(|t| c[t] - c[t + 1] + y[t + 1] / tf)
                .collect();
            x.pop();
            PathOut {
                inc,
                x,
                residual: sum_y - sum_c,
            }
        })
        .collect();
    let all_inc: Vec<f64> = paths.iter().flat_map(|p| p.inc.iter().copied()).collect();
    let n = all_inc.len() as f64;
    let mean = all_inc.iter().sum::<f64>() / n;
    let var = all_inc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let avg = |f: &dyn Fn(&PathOut) -> f64| paths.iter().map(f).sum::<f64>() / paths.len() as f64;
    let increment_lag1 = avg(&|p| lag1(&p.inc));
    let disjoint_increment_lag1 = avg(&|p| {
        let d: Vec<f64> = p.inc.iter().step_by(2).copied().collect();
        lag1(&d)
    });
    let x_lag1 = avg(&|p| lag1(&p.x));
    let residual_mean_abs = avg(&|p| p.residual.abs());
    let residual_std = (avg(&|p| p.residual * p.residual)).sqrt();
    let expected_residual_std = sigma_bar / std::f64::consts::SQRT_2;
    let pass =
        (var - 2.0).abs() <= 0.1 && disjoint_increment_lag1.abs() <= 0.02 && x_lag1.abs() <= 0.02;
    Ok(BudgetReport {
        horizon,
        n_paths: mc.n_paths,
        increment_variance: var,
        increment_lag1,
        disjoint_increment_lag1,
        x_lag1,
        residual_mean_abs,
        residual_std,
        expected_residual_std,
        pass,
    })
}

/// Relative size of the discounted budget term against the consumption weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegligibilityReport {
    pub r: f64,
    /// `r/(1 − e^{−rT})`, or `1/T` at `r = 0`.
    pub r_bar: f64,
    pub horizon: f64,
    /// Mean of `(2r̄/ν²)(Σ ΔK e^{−r t})²`.
    pub constraint_term: f64,
    /// Mean of `Σ (ΔC − r(C − C̄_ι)dt)²/(ϖ² dt)`.
    pub consumption_term: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Estimates the size of the intertemporal budget term relative to the
/// consumption weight along sampled paths started at `initial`.
pub fn appendix5_negligibility(
    initial: AgentState,
    horizon: f64,
    r: f64,
    solution: &PhaseSolution,
    params: &ModelParams,
    mc: &MCConfig,
) -> Result<NegligibilityReport> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon {horizon} must be > 0")));
    }
    mc.validate()?;
    let n_steps = mc.n_steps(horizon)?;
    let dt = horizon / n_steps as f64;
    let dynamics = Dynamics::new(params, solution, mc)?;
    let c_bar = solution.C_bar_phase;
    let w2 = params.varpi * params.varpi;
    let r_bar = if r == 0.0 {
        1.0 / horizon
    } else {
        r / (-(-r * horizon).exp_m1())
    };
    let per_chunk: Vec<(f64, f64)> = chunk_bounds(mc.n_paths)
        .into_par_iter()
        .map(|(k, count)| {
            let mut disc = vec![0.0; count];
            let mut weight = vec![0.0; count];
            simulate_chunk(
                &dynamics,
                initial,
                n_steps,
                dt,
                mc,
                k,
                count,
                &mut |i, step, old, new| {
                    let t = step as f64 * dt;
                    disc[i] += (new[1] - old[1]) * (-r * t).exp();
                    weight[i] += (new[0] - old[0] - r * (old[0] - c_bar) * dt).powi(2) / (w2 * dt);
                },
            );
            let num: f64 = disc
                .iter()
                .map(|d| 2.0 * r_bar / (params.nu * params.nu) * d * d)
                .sum();
            let den: f64 = weight.iter().sum();
            (num, den)
        })
        .collect();
    let n = mc.n_paths as f64;
    let constraint_term = per_chunk.iter().map(|p| p.0).sum::<f64>() / n;
    let consumption_term = per_chunk.iter().map(|p| p.1).sum::<f64>() / n;
    let ratio = constraint_term / consumption_term;
    Ok(NegligibilityReport {
        r,
        r_bar,
        horizon,
        constraint_term,
        consumption_term,
        ratio,
        pass: ratio < 0.1,
    })
}
