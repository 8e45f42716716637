//! Agent states, discretized paths and the log statistical weights of paths.
//!
//! Time integrals are left-endpoint Riemann sums and time derivatives are
//! forward differences, so a path with `n` states contributes `n − 1`
//! intervals of length `dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// One agent's point in (consumption, capital, technology) space.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub C: f64,
    pub K: f64,
    pub A: f64,
}

impl AgentState {
    #[allow(non_snake_case)]
    pub fn new(C: f64, K: f64, A: f64) -> Self {
        Self { C, K, A }
    }

    /// Components as `[C, K, A]`.
    pub fn to_array(self) -> [f64; 3] {
        [self.C, self.K, self.A]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    pub fn is_finite(&self) -> bool {
        self.C.is_finite() && self.K.is_finite() && self.A.is_finite()
    }

    /// Rejects non-finite or negative components.
    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::Domain(format!("non-finite state {self:?}")));
        }
        if self.C < 0.0 || self.K < 0.0 || self.A < 0.0 {
            return Err(Error::Domain(format!(
                "negative component in state {self:?}"
            )));
        }
        Ok(())
    }
}

/// A path sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPath {
    pub states: Vec<AgentState>,
    pub dt: f64,
    pub t0: f64,
}

impl AgentPath {
    /// Builds a path, rejecting fewer than two states, `dt ≤ 0` and non-finite values.
    pub fn new(states: Vec<AgentState>, dt: f64, t0: f64) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Shape(format!(
                "a path needs at least 2 states, got {}",
                states.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() {
            return Err(Error::Parameter(format!(
                "invalid time grid dt={dt}, t0={t0}"
            )));
        }
        if let Some(s) = states.iter().find(|s| !s.is_finite()) {
            return Err(Error::Domain(format!("non-finite state {s:?}")));
        }
        Ok(Self { states, dt, t0 })
    }

    /// Builds a path without validation; used for partial trajectories.
    pub(crate) fn unchecked(states: Vec<AgentState>, dt: f64, t0: f64) -> Self {
        Self { states, dt, t0 }
    }

    /// Total horizon `(n − 1)·dt`.
    pub fn horizon(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> AgentState {
        *self.states.last().expect("non-empty path")
    }

    /// Time stamp of state `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Reads a CSV with header `t,C,K,A`.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["t", "C", "K", "A"];
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(Error::Parse(format!(
                "expected header t,C,K,A, got {headers:?}"
            )));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number {f:?}")))
                })
                .collect::<Result<_>>()?;
            times.push(v[0]);
            states.push(AgentState::new(v[1], v[2], v[3]));
        }
        if times.len() < 2 {
            return Err(Error::Shape("a path needs at least 2 rows".into()));
        }
        let dt = times[1] - times[0];
        let uniform = times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0));
        if !uniform {
            return Err(Error::Shape("time column is not uniformly spaced".into()));
        }
        Self::new(states, dt, times[0])
    }

    /// Writes a CSV with header `t,C,K,A`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "C", "K", "A"])?;
        for (i, s) in self.states.iter().enumerate() {
            w.write_record([
                crate::params::fmt_num(self.time(i)),
                crate::params::fmt_num(s.C),
                crate::params::fmt_num(s.K),
                crate::params::fmt_num(s.A),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How the production function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ProductionMode {
    /// A·K^ε.
    #[default]
    Exact,
    /// Second-order expansion of A·K^ε around K̄.
    Taylor,
}

/// Quadratic utility −(θ/2)(c − C̃)² + 1/(2θ) with C̃ = Ĉ + 1/θ.
pub fn utility_quadratic(c: f64, theta: f64, c_hat: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Parameter(format!(
            "risk aversion theta must be > 0, got {theta}"
        )));
    }
    let c_tilde = c_hat + 1.0 / theta;
    Ok(-0.5 * theta * (c - c_tilde).powi(2) + 0.5 / theta)
}

/// Output A·F(K) in the requested mode.
#[allow(non_snake_case)]
pub fn production(K: f64, A: f64, params: &ModelParams, mode: ProductionMode) -> Result<f64> {
    if !(K > 0.0) {
        return Err(Error::Domain(format!("production needs K > 0, got {K}")));
    }
    if A < 0.0 {
        return Err(Error::Domain(format!("production needs A >= 0, got {A}")));
    }
    let eps = params.epsilon;
    Ok(match mode {
        ProductionMode::Exact => A * K.powf(eps),
        ProductionMode::Taylor => {
            let u = (K - params.K_bar) / params.K_bar;
            A * params.k_bar_eps() * (1.0 + eps * u - 0.5 * eps * (1.0 - eps) * u * u)
        }
    })
}

/// Marginal product F′(K) in the requested mode.
#[allow(non_snake_case)]
pub fn marginal_product(K: f64, params: &ModelParams, mode: ProductionMode) -> Result<f64> {
    if !(K > 0.0) {
        return Err(Error::Domain(format!(
            "marginal product needs K > 0, got {K}"
        )));
    }
    let eps = params.epsilon;
    Ok(match mode {
        ProductionMode::Exact => params.f_prime(K),
        ProductionMode::Taylor => {
            let u = (K - params.K_bar) / params.K_bar;
            params.k_bar_eps() * (eps - eps * (1.0 - eps) * u) / params.K_bar
        }
    })
}

/// Consumption weight −Σ dt (Ċ − r(C − C̄))²/ϖ² + C₀T with r = AF′(K) + r_c.
pub fn log_weight_consumption(path: &AgentPath, params: &ModelParams) -> Result<f64> {
    let dt = path.dt;
    let mut sum = 0.0;
    for w in path.states.windows(2) {
        let (s, n) = (w[0], w[1]);
        let r = s.A * marginal_product(s.K, params, ProductionMode::Exact)? + params.r_c;
        let c_dot = (n.C - s.C) / dt;
        sum += dt * (c_dot - r * (s.C - params.C_bar)).powi(2);
    }
    Ok(-sum / params.varpi.powi(2) + params.C0 * path.horizon())
}

/// Capital weight −Σ dt (K̇ − (AF(K) − C − δK))²/ν².
pub fn log_weight_capital(
    path: &AgentPath,
    params: &ModelParams,
    mode: ProductionMode,
) -> Result<f64> {
    let dt = path.dt;
    let mut sum = 0.0;
    for w in path.states.windows(2) {
        let (s, n) = (w[0], w[1]);
        let drift = if s.A == 0.0 && s.K == 0.0 {
            -s.C
        } else {
            production(s.K, s.A, params, mode)? - s.C - params.delta * s.K
        };
        let k_dot = (n.K - s.K) / dt;
        sum += dt * (k_dot - drift).powi(2);
    }
    Ok(-sum / params.nu.powi(2))
}

/// Consumption penalty −Σ dt ς²(C − C̄)².
pub fn log_weight_consumption_penalty(path: &AgentPath, params: &ModelParams) -> f64 {
    let n = path.len() - 1;
    let sum: f64 = path.states[..n]
        .iter()
        .map(|s| (s.C - params.C_bar).powi(2))
        .sum();
    -params.varsigma.powi(2) * path.dt * sum
}

/// Intrinsic technology weight −Σ dt [(Ȧ − gA)²/λ² + (A − Ā)²] of one agent.
pub fn log_weight_technology(path: &AgentPath, params: &ModelParams, a_bar: f64) -> f64 {
    let dt = path.dt;
    let mut sum = 0.0;
    for w in path.states.windows(2) {
        let (s, n) = (w[0], w[1]);
        let a_dot = (n.A - s.A) / dt;
        sum += dt * ((a_dot - params.g * s.A).powi(2) / params.lambda_sq + (s.A - a_bar).powi(2));
    }
    -sum
}

fn check_same_grid(p1: &AgentPath, p2: &AgentPath) -> Result<()> {
    if p1.len() != p2.len() || (p1.dt - p2.dt).abs() > 1e-15 * p1.dt.abs() {
        return Err(Error::Shape(format!(
            "paths differ in grid: ({}, {}) vs ({}, {})",
            p1.len(),
            p1.dt,
            p2.len(),
            p2.dt
        )));
    }
    Ok(())
}

/// Cross term −γ ΣΣ dt² A_i(t_i) K_j(t_j) for one ordered pair (i, j).
fn cross_term(pi: &AgentPath, pj: &AgentPath, gamma: f64) -> f64 {
    let n = pi.len() - 1;
    let sum_a: f64 = pi.states[..n].iter().map(|s| s.A).sum();
    let sum_k: f64 = pj.states[..n].iter().map(|s| s.K).sum();
    -gamma * pi.dt * pi.dt * sum_a * sum_k
}

/// Technology weight of a pair of agents, including the interaction in both orderings.
pub fn log_weight_technology_pair(
    p1: &AgentPath,
    p2: &AgentPath,
    params: &ModelParams,
    a_bar: f64,
) -> Result<f64> {
    check_same_grid(p1, p2)?;
    let own = log_weight_technology(p1, params, a_bar) + log_weight_technology(p2, params, a_bar);
    let cross = cross_term(p1, p2, params.gamma) + cross_term(p2, p1, params.gamma);
    Ok(own + cross)
}

/// Overall log weight of an ensemble of agents on a common grid.
///
/// Sums consumption, capital, consumption-penalty and intrinsic technology
/// weights of every agent plus the interaction term over all ordered pairs.
/// The intertemporal budget constraint is not part of this total.
pub fn log_weight_total(
    paths: &[AgentPath],
    params: &ModelParams,
    a_bar: f64,
    mode: ProductionMode,
) -> Result<f64> {
    let Some(first) = paths.first() else {
        return Err(Error::Shape("empty ensemble".into()));
    };
    for p in paths {
        check_same_grid(first, p)?;
    }
    let mut total = 0.0;
    for p in paths {
        total += log_weight_consumption(p, params)?
            + log_weight_capital(p, params, mode)?
            + log_weight_consumption_penalty(p, params)
            + log_weight_technology(p, params, a_bar);
    }
    for (i, pi) in paths.iter().enumerate() {
        for (j, pj) in paths.iter().enumerate() {
            if i != j {
                total += cross_term(pi, pj, params.gamma);
            }
        }
    }
    Ok(total)
}

/// Intertemporal constraint −(Σ dt Ŷ − Σ dt C)²/θ².
///
/// The revenue sequence defaults to A·K^ε along the path.
pub fn log_weight_intertemporal_constraint(
    path: &AgentPath,
    revenue: Option<&[f64]>,
    params: &ModelParams,
) -> Result<f64> {
    let n = path.len() - 1;
    let income: f64 = match revenue {
        Some(r) => {
            if r.len() < n {
                return Err(Error::Shape(format!(
                    "revenue has {} entries, path needs {n}",
                    r.len()
                )));
            }
            r[..n].iter().sum::<f64>() * path.dt
        }
        None => {
            let mut s = 0.0;
            for st in &path.states[..n] {
                s += production(st.K, st.A, params, ProductionMode::Exact)?;
            }
            s * path.dt
        }
    };
    let spending: f64 = path.states[..n].iter().map(|s| s.C).sum::<f64>() * path.dt;
    Ok(-(income - spending).powi(2) / params.theta_sq)
}
