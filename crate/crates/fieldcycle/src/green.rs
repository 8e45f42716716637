//! Single-agent transition densities within a phase.
//!
//! Covers the covariance/drift system `(H, J)` (numerically and in closed
//! form), the small-time Gaussian transition density with its phase mass,
//! the Laplace-domain propagator, the average path, the equilibrium and the
//! linearized eigenvalues around it.
//!
//! Conventions. A density `G(to | from, t)` describes a move from the initial
//! state `from` (the primed variables) to the final state `to`. The
//! coefficients α and β are evaluated at the midpoint of the two states.
//! [`Convention::Appendix`] uses `β = 2AF′ + r_c − δ`, the drift factor
//! `1 + (α+β)t`, covariance `diag(2ϖ², b, 2/λ²)·t` and the phase consumption
//! level `C̄ + √(2/π)ϖ` for the trivial phase. [`Convention::MainText`] uses
//! `β = AF′ + r_c − δ`, covariance `diag(ϖ², b/2, 1/λ²)·t` and `C̄ + 2ϖ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentPath, AgentState};
use crate::params::ModelParams;
use crate::phase::{Phase, PhaseSolution};

/// Normalization and drift convention of the transition density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Appendix,
    MainText,
}

/// Coefficients of the transition density between two states.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenCoefficients {
    /// Drift spread α = δ − A_m F′(K_m).
    pub alpha: f64,
    /// Return spread β.
    pub beta: f64,
    /// Mixed variance Ω².
    pub Omega_sq: f64,
    /// Capital variance rate b.
    pub b_coef: f64,
    /// Technology variance rate c = 2/λ².
    pub c_coef: f64,
    /// Phase mass m_ι.
    pub mass: f64,
    /// Phase technology level Ā_ι.
    pub A_bar: f64,
    /// Phase consumption level C̄_ι.
    pub C_bar: f64,
    pub convention: Convention,
}

fn check_nonzero(value: f64, name: &str) -> Result<()> {
    if value == 0.0 || !value.is_finite() {
        Err(Error::Singularity(name.to_string()))
    } else {
        Ok(())
    }
}

/// Midpoint coefficients of the density from `from` to `to`.
pub fn coefficients(
    params: &ModelParams,
    solution: &PhaseSolution,
    from: AgentState,
    to: AgentState,
    convention: Convention,
) -> Result<GreenCoefficients> {
    from.validate()?;
    to.validate()?;
    let a_m = 0.5 * (from.A + to.A);
    let k_m = 0.5 * (from.K + to.K);
    if k_m <= 0.0 {
        return Err(Error::Domain(format!("midpoint capital {k_m} must be > 0")));
    }
    let afp = a_m * params.f_prime(k_m);
    let alpha = params.delta - afp;
    let beta = match convention {
        Convention::Appendix => 2.0 * afp + params.r_c - params.delta,
        Convention::MainText => afp + params.r_c - params.delta,
    };
    check_nonzero(alpha, "α")?;
    check_nonzero(beta, "β")?;
    let lsq = params.lambda_sq;
    let k2e = params.K_bar.powf(2.0 * params.epsilon);
    let two_a_b = 2.0 * alpha + beta;
    check_nonzero(two_a_b, "2α+β")?;
    let bsq_asq = beta * beta - alpha * alpha;
    check_nonzero(bsq_asq, "β²−α²")?;
    let nu2 = params.nu * params.nu;
    let w2 = params.varpi * params.varpi;
    let omega_sq =
        (w2 / lsq) * (nu2 + 2.0 * k2e / (lsq * alpha * alpha) + 3.0 * w2 / (2.0 * bsq_asq));
    let b_coef =
        2.0 * (nu2 + 2.0 * k2e / (lsq * alpha * alpha) + 3.0 * w2 / (2.0 * two_a_b * beta));
    let c_bar = match (convention, solution.phase) {
        (Convention::MainText, Phase::Trivial) => params.C_bar + 2.0 * params.varpi,
        _ => solution.C_bar_phase,
    };
    Ok(GreenCoefficients {
        alpha,
        beta,
        Omega_sq: omega_sq,
        b_coef,
        c_coef: 2.0 / lsq,
        mass: solution.mass,
        A_bar: solution.A_bar_phase,
        C_bar: c_bar,
        convention,
    })
}

/// Covariance matrix `H(s)` and drift vector `J(s)`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceState {
    pub H: [[f64; 3]; 3],
    pub J: [f64; 3],
    pub s: f64,
}

impl CovarianceState {
    /// Entries `(a, b, c, d, e, f)` of the symmetric matrix H.
    pub fn entries(&self) -> [f64; 6] {
        let h = &self.H;
        [h[0][0], h[0][1], h[0][2], h[1][1], h[1][2], h[2][2]]
    }

    fn from_entries(v: [f64; 6], j: [f64; 3], s: f64) -> Self {
        let [a, b, c, d, e, f] = v;
        Self {
            H: [[a, b, c], [b, d, e], [c, e, f]],
            J: j,
            s,
        }
    }

    /// Smallest eigenvalue of H.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = nalgebra::Matrix3::from_fn(|i, j| self.H[i][j]);
        m.symmetric_eigenvalues().min()
    }
}

/// Rates of the covariance system: κ = r_c + q, ρ = δ − q with q = Ā_ι ε K̄^{ε−1}.
struct Rates {
    kappa: f64,
    rho: f64,
    kbe: f64,
    w2: f64,
    nu2: f64,
    lsq: f64,
}

fn rates(coeffs: &GreenCoefficients, params: &ModelParams) -> Rates {
    let q = coeffs.A_bar * params.epsilon * params.K_bar.powf(params.epsilon - 1.0);
    Rates {
        kappa: params.r_c + q,
        rho: params.delta - q,
        kbe: params.k_bar_eps(),
        w2: params.varpi * params.varpi,
        nu2: params.nu * params.nu,
        lsq: params.lambda_sq,
    }
}

fn initial_drift(coeffs: &GreenCoefficients, params: &ModelParams, to: AgentState) -> [f64; 3] {
    [to.C - coeffs.C_bar, to.K - params.K_bar, to.A]
}

fn ode_rhs(r: &Rates, h: &[f64; 6], j: &[f64; 3]) -> ([f64; 6], [f64; 3]) {
    let [a, b, c, d, e, f] = *h;
    let _ = f;
    let dh = [
        4.0 * r.kappa * a + 2.0 * r.w2,
        2.0 * (r.kappa + r.rho) * b + 2.0 * a - 2.0 * r.kbe * c,
        2.0 * r.kappa * c,
        4.0 * r.rho * d + 4.0 * b - 4.0 * r.kbe * e + 2.0 * r.nu2,
        2.0 * c + 2.0 * r.rho * e - 2.0 * r.kbe * f,
        2.0 / r.lsq,
    ];
    let dj = [r.kappa * j[0], j[0] + r.rho * j[1] - r.kbe * j[2], 0.0];
    (dh, dj)
}

/// Integrates `dH/ds = 2Ω̂ − NH − HNᵀ`, `dJ/ds = −NJ/2` from `H(0) = 0`,
/// `J(0) = (C′−C̄_ι, K′−K̄, A′)` with `n_steps` classical Runge–Kutta steps.
pub fn covariance_ode(
    coeffs: &GreenCoefficients,
    params: &ModelParams,
    to: AgentState,
    s: f64,
    n_steps: usize,
) -> Result<CovarianceState> {
    if n_steps < 1 {
        return Err(Error::Parameter("n_steps must be >= 1".into()));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("s = {s} must be >= 0")));
    }
    let r = rates(coeffs, params);
    let mut h = [0.0; 6];
    let mut j = initial_drift(coeffs, params, to);
    let dt = s / n_steps as f64;
    let axpy6 = |x: &[f64; 6], k: &[f64; 6], w: f64| std::array::from_fn(|i| x[i] + w * k[i]);
    let axpy3 = |x: &[f64; 3], k: &[f64; 3], w: f64| std::array::from_fn(|i| x[i] + w * k[i]);
    for _ in 0..n_steps {
        let (k1h, k1j) = ode_rhs(&r, &h, &j);
        let (k2h, k2j) = ode_rhs(&r, &axpy6(&h, &k1h, dt / 2.0), &axpy3(&j, &k1j, dt / 2.0));
        let (k3h, k3j) = ode_rhs(&r, &axpy6(&h, &k2h, dt / 2.0), &axpy3(&j, &k2j, dt / 2.0));
        let (k4h, k4j) = ode_rhs(&r, &axpy6(&h, &k3h, dt), &axpy3(&j, &k3j, dt));
        for i in 0..6 {
            h[i] += dt / 6.0 * (k1h[i] + 2.0 * k2h[i] + 2.0 * k3h[i] + k4h[i]);
        }
        for i in 0..3 {
            j[i] += dt / 6.0 * (k1j[i] + 2.0 * k2j[i] + 2.0 * k3j[i] + k4j[i]);
        }
    }
    Ok(CovarianceState::from_entries(h, j, s))
}

/// Which coefficients of the closed-form `d(s)` entry to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormVariant {
    /// Coefficients that solve the covariance system exactly.
    #[default]
    Corrected,
    /// The published coefficients: `−ϖ²/(2μ²σ)` on `e^{2σs}` and
    /// `K̄^{2ε}/(2λ²ρ³)` as constant, with `a₄` fixed by `d(0) = 0`.
    AsPrinted,
}

/// Closed-form solution of the covariance and drift system.
pub fn covariance_closed_form(
    coeffs: &GreenCoefficients,
    params: &ModelParams,
    to: AgentState,
    s: f64,
    variant: ClosedFormVariant,
) -> Result<CovarianceState> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("s = {s} must be >= 0")));
    }
    let r = rates(coeffs, params);
    let (kappa, rho) = (r.kappa, r.rho);
    let sigma = params.r_c + params.delta;
    let mu = kappa - rho;
    check_nonzero(kappa, "r_c+K̄^(ε−1)Ā_ιε")?;
    check_nonzero(sigma, "δ+r_c")?;
    check_nonzero(rho, "δ−K̄^(ε−1)Ā_ιε")?;
    check_nonzero(mu, "r_c−δ+2K̄^(ε−1)Ā_ιε")?;
    let (w2, nu2, lsq, kbe) = (r.w2, r.nu2, r.lsq, r.kbe);
    let e4k = (4.0 * kappa * s).exp();
    let e2s = (2.0 * sigma * s).exp();
    let e2r = (2.0 * rho * s).exp();
    let e4r = (4.0 * rho * s).exp();

    let a = w2 * (4.0 * kappa * s).exp_m1() / (2.0 * kappa);
    let b1 = w2 / (2.0 * kappa * mu);
    let b2 = -w2 / (mu * sigma);
    let b0 = w2 / (2.0 * kappa * sigma);
    let b = b1 * e4k + b2 * e2s + b0;
    let e_1 = -kbe / (lsq * rho * rho);
    let e_0 = kbe / (lsq * rho * rho);
    let e_s = 2.0 * kbe / (lsq * rho);
    let e = e_1 * e2r + e_0 + e_s * s;
    let f = 2.0 * s / lsq;

    let d1 = b1 / mu;
    let d3 = 2.0 * kbe * e_1 / rho;
    let p = kbe * e_s / rho;
    let (d2, q) = match variant {
        ClosedFormVariant::Corrected => (
            2.0 * b2 / mu,
            (p - 4.0 * b0 + 4.0 * kbe * e_0 - 2.0 * nu2) / (4.0 * rho),
        ),
        ClosedFormVariant::AsPrinted => (
            -w2 / (2.0 * mu * mu * sigma),
            -nu2 / (2.0 * rho) + kbe * kbe / (2.0 * lsq * rho.powi(3))
                - w2 / (2.0 * rho * sigma * kappa),
        ),
    };
    let d4 = -(d1 + d2 + d3 + q);
    let d = d1 * e4k + d2 * e2s + d3 * e2r + p * s + q + d4 * e4r;

    let j0 = initial_drift(coeffs, params, to);
    let ek = (kappa * s).exp();
    let er = (rho * s).exp();
    let j2 = j0[1] * er + j0[0] * (ek - er) / mu - kbe * j0[2] * (rho * s).exp_m1() / rho;
    let j = [j0[0] * ek, j2, j0[2]];
    Ok(CovarianceState::from_entries([a, b, 0.0, d, e, f], j, s))
}

/// Linear-in-s covariance `diag(2ϖ², b, 2/λ²)·s`.
pub fn covariance_small_s(
    coeffs: &GreenCoefficients,
    params: &ModelParams,
    s: f64,
) -> [[f64; 3]; 3] {
    let v = variance_rates(coeffs, params);
    [
        [v[0] * s, 0.0, 0.0],
        [0.0, v[1] * s, 0.0],
        [0.0, 0.0, v[2] * s],
    ]
}

/// Covariance matrix at `s`: the linear small-s form while
/// `s·max(|α|,|β|)` stays below `params.small_s_switch`, the closed form beyond.
pub fn covariance(
    coeffs: &GreenCoefficients,
    params: &ModelParams,
    to: AgentState,
    s: f64,
) -> Result<[[f64; 3]; 3]> {
    if s * coeffs.alpha.abs().max(coeffs.beta.abs()) <= params.small_s_switch {
        Ok(covariance_small_s(coeffs, params, s))
    } else {
        Ok(covariance_closed_form(coeffs, params, to, s, ClosedFormVariant::Corrected)?.H)
    }
}

/// Per-unit-time variances of (C, K, A) under the coefficient convention.
pub fn variance_rates(coeffs: &GreenCoefficients, params: &ModelParams) -> [f64; 3] {
    let w2 = params.varpi * params.varpi;
    match coeffs.convention {
        Convention::Appendix => [2.0 * w2, coeffs.b_coef, coeffs.c_coef],
        Convention::MainText => [w2, 0.5 * coeffs.b_coef, 0.5 * coeffs.c_coef],
    }
}

/// Mean of the final state given the initial state `from` over a horizon `t`.
pub fn conditional_mean(
    coeffs: &GreenCoefficients,
    params: &ModelParams,
    from: AgentState,
    t: f64,
) -> AgentState {
    let dc = from.C - coeffs.C_bar;
    let c_rate = coeffs.alpha + coeffs.beta;
    let mean_c = coeffs.C_bar + dc * (1.0 + c_rate * t);
    let mean_k = from.K
        - t * (coeffs.alpha * (from.K - params.K_bar) + params.delta * params.K_bar + coeffs.C_bar)
        - dc * t
        + from.A * params.k_bar_eps() * t;
    AgentState::new(mean_c, mean_k, from.A)
}

/// Value of the transition density with its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityValue {
    pub density: f64,
    pub log_density: f64,
    /// Log of the normalized Gaussian factor alone.
    pub log_gaussian: f64,
    /// Technology potential term `((A+A′)/2 − Ā_ι)²t/2`.
    pub potential: f64,
    pub mean: AgentState,
    pub variances: [f64; 3],
    pub coefficients: GreenCoefficients,
}

/// Small-time transition density from `from` to `to` over horizon `t`.
pub fn transition_density(
    from: AgentState,
    to: AgentState,
    t: f64,
    solution: &PhaseSolution,
    params: &ModelParams,
    convention: Convention,
) -> Result<DensityValue> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be > 0")));
    }
    let coeffs = coefficients(params, solution, from, to, convention)?;
    let rates = variance_rates(&coeffs, params);
    if rates.iter().any(|v| *v <= 0.0) {
        return Err(Error::Domain(format!(
            "non-positive variance rate {rates:?}"
        )));
    }
    let mean = conditional_mean(&coeffs, params, from, t);
    let x = [to.C - mean.C, to.K - mean.K, to.A - mean.A];
    let mut log_gaussian = 0.0;
    let mut variances = [0.0; 3];
    for i in 0..3 {
        let v = rates[i] * t;
        variances[i] = v;
        log_gaussian += -0.5 * x[i] * x[i] / v - 0.5 * (2.0 * PI * v).ln();
    }
    let potential = (0.5 * (from.A + to.A) - coeffs.A_bar).powi(2) * t / 2.0;
    let log_density = log_gaussian - potential - coeffs.mass * t;
    Ok(DensityValue {
        density: log_density.exp(),
        log_density,
        log_gaussian,
        potential,
        mean,
        variances,
        coefficients: coeffs,
    })
}

/// Most likely final state: the fixed point `to = mean(from, to)` of the
/// zero-exponent relations, with the coefficients at the midpoint.
pub fn argmax(
    from: AgentState,
    t: f64,
    solution: &PhaseSolution,
    params: &ModelParams,
    convention: Convention,
) -> Result<AgentState> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be > 0")));
    }
    let mut to = from;
    let max_iter = 200;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let coeffs = coefficients(params, solution, from, to, convention)?;
        let next = conditional_mean(&coeffs, params, from, t);
        residual = (next.C - to.C)
            .abs()
            .max((next.K - to.K).abs())
            .max((next.A - to.A).abs());
        to = next;
        if residual <= 1e-15 * (1.0 + to.K.abs().max(to.C.abs())) {
            return Ok(to);
        }
    }
    if residual < 1e-12 {
        return Ok(to);
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
    })
}

/// Residuals of the zero-exponent relations at a candidate final state.
pub fn zero_exponent_residuals(
    from: AgentState,
    to: AgentState,
    t: f64,
    solution: &PhaseSolution,
    params: &ModelParams,
    convention: Convention,
) -> Result<[f64; 3]> {
    let coeffs = coefficients(params, solution, from, to, convention)?;
    let a = coeffs.alpha;
    let shift = (params.delta * params.K_bar + coeffs.C_bar) / a;
    let rc = (to.C - coeffs.C_bar) - (from.C - coeffs.C_bar) * (1.0 + (a + coeffs.beta) * t);
    let rk = (to.K - params.K_bar + shift)
        - ((from.K - params.K_bar + shift) * (1.0 - a * t) - (from.C - coeffs.C_bar) * t
            + from.A * params.k_bar_eps() * t);
    let ra = params.lambda_sq * (to.A - from.A).powi(2) / (2.0 * t);
    Ok([rc, rk, ra])
}

/// Laplace-domain propagator between two states.
///
/// With `X = to − from`, drift `Y` and `H = diag(variance rates)`, returns
/// `exp(−√(2m+YᵀH⁻¹Y)·√(XᵀH⁻¹X) + XᵀH⁻¹Y)/√(2m+YᵀH⁻¹Y)`, which equals
/// [`laplace_kernel`] integrated against `e^{−mt}` over `t > 0`.
pub fn laplace_propagator(
    from: AgentState,
    to: AgentState,
    solution: &PhaseSolution,
    params: &ModelParams,
    convention: Convention,
) -> Result<f64> {
    let (x, y, h, m) = laplace_parts(from, to, solution, params, convention)?;
    let quad = |u: &[f64; 3], v: &[f64; 3]| (0..3).map(|i| u[i] * v[i] / h[i]).sum::<f64>();
    let radicand = 2.0 * m + quad(&y, &y);
    if !(radicand > 0.0) {
        return Err(Error::Domain(format!(
            "2m + YᵀH⁻¹Y = {radicand} must be > 0"
        )));
    }
    let root = radicand.sqrt();
    Ok((-root * quad(&x, &x).sqrt() + quad(&x, &y)).exp() / root)
}

/// Time-domain integrand whose Laplace transform at the phase mass is
/// [`laplace_propagator`]: `exp(−(X−tY)ᵀH⁻¹(X−tY)/(2t))/√(2πt)`.
pub fn laplace_kernel(
    from: AgentState,
    to: AgentState,
    t: f64,
    solution: &PhaseSolution,
    params: &ModelParams,
    convention: Convention,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be > 0")));
    }
    let (x, y, h, _) = laplace_parts(from, to, solution, params, convention)?;
    let q: f64 = (0..3).map(|i| (x[i] - t * y[i]).powi(2) / h[i]).sum();
    Ok((-q / (2.0 * t)).exp() / (2.0 * PI * t).sqrt())
}

type LaplaceParts = ([f64; 3], [f64; 3], [f64; 3], f64);

fn laplace_parts(
    from: AgentState,
    to: AgentState,
    solution: &PhaseSolution,
    params: &ModelParams,
    convention: Convention,
) -> Result<LaplaceParts> {
    let coeffs = coefficients(params, solution, from, to, convention)?;
    let h = variance_rates(&coeffs, params);
    if h.iter().any(|v| *v <= 0.0) {
        return Err(Error::Domain(format!("non-positive variance rate {h:?}")));
    }
    let x = [to.C - from.C, to.K - from.K, to.A - from.A];
    let dc = from.C - coeffs.C_bar;
    let y = [
        (coeffs.alpha + coeffs.beta) * dc,
        -(coeffs.alpha * (from.K - params.K_bar) + params.delta * params.K_bar + coeffs.C_bar) - dc
            + from.A * params.k_bar_eps(),
        0.0,
    ];
    Ok((x, y, h, coeffs.mass))
}

/// Equilibrium `(C̄_ι, K_e, Ā_ι)` of the average dynamics.
pub fn equilibrium(params: &ModelParams, solution: &PhaseSolution) -> Result<AgentState> {
    let a = solution.A_bar_phase;
    let c = solution.C_bar_phase;
    let denom = params.delta - params.K_bar.powf(params.epsilon - 1.0) * a * params.epsilon;
    check_nonzero(denom, "δ−K̄^(ε−1)Ā_ιε")?;
    let k_e = ((1.0 - params.epsilon) * a * params.k_bar_eps() - c) / denom;
    Ok(AgentState::new(c, k_e, a))
}

/// Right-hand side of the average-path dynamics at `state`.
pub fn average_path_rhs(
    state: AgentState,
    params: &ModelParams,
    solution: &PhaseSolution,
    k_e: f64,
) -> Result<[f64; 3]> {
    if state.K <= 0.0 {
        return Err(Error::Domain(format!("capital {} must be > 0", state.K)));
    }
    let afp = state.A * params.f_prime(state.K);
    let dc = state.C - solution.C_bar_phase;
    Ok([
        dc * (afp + params.r_c - params.delta),
        (afp - params.delta) * (state.K - k_e) - dc,
        -(state.A - solution.A_bar_phase) / (2.0 * params.lambda_sq),
    ])
}

/// Integrates the average-path dynamics from `initial` over `[0, t]` with
/// `n_steps` classical Runge–Kutta steps.
pub fn average_path(
    initial: AgentState,
    t: f64,
    solution: &PhaseSolution,
    params: &ModelParams,
    n_steps: usize,
) -> Result<AgentPath> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be >= 0")));
    }
    if n_steps < 1 {
        return Err(Error::Parameter("n_steps must be >= 1".into()));
    }
    initial.validate()?;
    let k_e = equilibrium(params, solution)?.K;
    let dt = t / n_steps as f64;
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(initial);
    let shift = |s: AgentState, k: [f64; 3], w: f64| {
        AgentState::new(s.C + w * k[0], s.K + w * k[1], s.A + w * k[2])
    };
    let mut cur = initial;
    for i in 0..n_steps {
        let step = (|| -> Result<AgentState> {
            let k1 = average_path_rhs(cur, params, solution, k_e)?;
            let k2 = average_path_rhs(shift(cur, k1, dt / 2.0), params, solution, k_e)?;
            let k3 = average_path_rhs(shift(cur, k2, dt / 2.0), params, solution, k_e)?;
            let k4 = average_path_rhs(shift(cur, k3, dt), params, solution, k_e)?;
            let k = std::array::from_fn(|j| (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0);
            Ok(shift(cur, k, dt))
        })();
        match step {
            Ok(next) if next.K > 0.0 && next.is_finite() => {
                cur = next;
                states.push(cur);
            }
            _ => {
                let dt_path = if dt > 0.0 { dt } else { 1.0 };
                return Err(Error::TrajectoryTerminated {
                    time: i as f64 * dt,
                    reason: "capital reached zero".into(),
                    partial: Box::new(AgentPath::unchecked(states, dt_path, 0.0)),
                });
            }
        }
    }
    if states.len() == 1 {
        states.push(initial);
    }
    AgentPath::new(states, if dt > 0.0 { dt } else { f64::MIN_POSITIVE }, 0.0)
}

/// A complex number as `(re, im)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

/// Eigenvalues of the linearized average dynamics at equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub equilibrium: AgentState,
    /// `½r_c − δ ± ½√(r_c² − 4Ā_ι) + Ā_ι ε F′(K_e) K_e`.
    pub printed: [Complex; 2],
    /// Eigenvalues of the (C, K) Jacobian, ordered by real part.
    pub jacobian: [Complex; 2],
    /// Decoupled technology eigenvalue `−1/(2λ²)`.
    pub technology: f64,
    /// Largest distance between the two pairs.
    pub discrepancy: f64,
}

fn roots_of_quadratic(trace: f64, det: f64) -> [Complex; 2] {
    let disc = trace * trace - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [
            Complex {
                re: 0.5 * (trace - s),
                im: 0.0,
            },
            Complex {
                re: 0.5 * (trace + s),
                im: 0.0,
            },
        ]
    } else {
        let s = (-disc).sqrt();
        [
            Complex {
                re: 0.5 * trace,
                im: -0.5 * s,
            },
            Complex {
                re: 0.5 * trace,
                im: 0.5 * s,
            },
        ]
    }
}

/// Jacobian of the (C, K) average dynamics at `state`.
pub fn jacobian_ck(
    state: AgentState,
    params: &ModelParams,
    solution: &PhaseSolution,
    k_e: f64,
) -> [[f64; 2]; 2] {
    let fp = params.f_prime(state.K);
    let fpp = (params.epsilon - 1.0) * fp / state.K;
    let dc = state.C - solution.C_bar_phase;
    [
        [state.A * fp + params.r_c - params.delta, dc * state.A * fpp],
        [
            -1.0,
            state.A * fpp * (state.K - k_e) + state.A * fp - params.delta,
        ],
    ]
}

/// Both the published eigenvalue expression and the Jacobian eigenvalues.
pub fn linearized_eigenvalues(
    params: &ModelParams,
    solution: &PhaseSolution,
) -> Result<EigenReport> {
    let eq = equilibrium(params, solution)?;
    if eq.K <= 0.0 {
        return Err(Error::Domain(format!(
            "equilibrium capital {} must be > 0",
            eq.K
        )));
    }
    let a = solution.A_bar_phase;
    let j = jacobian_ck(eq, params, solution, eq.K);
    let jacobian = roots_of_quadratic(j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0]);
    let shift = 0.5 * params.r_c - params.delta + a * params.epsilon * params.f_prime(eq.K) * eq.K;
    let disc = params.r_c * params.r_c - 4.0 * a;
    let printed = if disc >= 0.0 {
        let s = 0.5 * disc.sqrt();
        [
            Complex {
                re: shift - s,
                im: 0.0,
            },
            Complex {
                re: shift + s,
                im: 0.0,
            },
        ]
    } else {
        let s = 0.5 * (-disc).sqrt();
        [Complex { re: shift, im: -s }, Complex { re: shift, im: s }]
    };
    let discrepancy = (0..2)
        .map(|i| {
            ((printed[i].re - jacobian[i].re).powi(2) + (printed[i].im - jacobian[i].im).powi(2))
                .sqrt()
        })
        .fold(0.0, f64::max);
    Ok(EigenReport {
        equilibrium: eq,
        printed,
        jacobian,
        technology: -1.0 / (2.0 * params.lambda_sq),
        discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{solve_nontrivial, solve_trivial};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn base() -> (ModelParams, PhaseSolution) {
        let p = ModelParams::default();
        let s = solve_trivial(&p).unwrap();
        (p, s)
    }

    fn near_bar(p: &ModelParams, s: &PhaseSolution) -> AgentState {
        AgentState::new(s.C_bar_phase + 0.1, p.K_bar, s.A_bar_phase)
    }

    #[test]
    fn coefficient_substitution() {
        let (mut p, s) = base();
        p.r_c = p.delta;
        let x = AgentState::new(1.0, 5.0, 3.0);
        let c = coefficients(&p, &s, x, x, Convention::Appendix).unwrap();
        let afp = 3.0 * p.f_prime(5.0);
        assert_relative_eq!(c.beta, 2.0 * afp, max_relative = 1e-14);
        assert_relative_eq!(c.alpha + c.beta, afp + p.r_c, max_relative = 1e-14);
        assert_eq!(c.mass, 0.0);
    }

    #[test]
    fn omega_sq_hand_value() {
        let (p, s) = base();
        let x = AgentState::new(1.0, 10.0, 10.0);
        let c = coefficients(&p, &s, x, x, Convention::Appendix).unwrap();
        let afp = 10.0 * 0.3 * 10f64.powf(-0.7);
        let (al, be) = (0.05 - afp, 2.0 * afp);
        let k2e = 10f64.powf(0.6);
        let expect = (0.01 / 400.0)
            * (0.01 + 2.0 * k2e / (400.0 * al * al) + 3.0 * 0.01 / (2.0 * (be * be - al * al)));
        assert_relative_eq!(c.Omega_sq, expect, max_relative = 1e-12);
    }

    #[test]
    fn zero_alpha_is_singular() {
        let (p, s) = base();
        let mut q = p;
        q.epsilon = 0.5;
        q.delta = 0.25;
        let x = AgentState::new(1.0, 4.0, 1.0);
        assert!(matches!(
            coefficients(&q, &s, x, x, Convention::Appendix),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn covariance_starts_at_zero() {
        let (p, s) = base();
        let x = near_bar(&p, &s);
        let c = coefficients(&p, &s, x, x, Convention::Appendix).unwrap();
        let h = covariance_ode(&c, &p, x, 0.0, 10).unwrap();
        assert!(h.entries().iter().all(|v| *v == 0.0));
        assert_eq!(h.J, [x.C - c.C_bar, x.K - p.K_bar, x.A]);
        let cf = covariance_closed_form(&c, &p, x, 0.0, ClosedFormVariant::Corrected).unwrap();
        assert!(cf.entries().iter().all(|v| v.abs() <= 1e-12));
        assert!(covariance_ode(&c, &p, x, 0.1, 0).is_err());
    }

    #[test]
    fn small_s_slopes() {
        let (p, s) = base();
        let x = near_bar(&p, &s);
        let c = coefficients(&p, &s, x, x, Convention::Appendix).unwrap();
        let h = covariance_closed_form(&c, &p, x, 1e-7, ClosedFormVariant::Corrected).unwrap();
        assert_relative_eq!(
            h.H[0][0] / 1e-7,
            2.0 * p.varpi * p.varpi,
            max_relative = 1e-5
        );
        assert_relative_eq!(h.H[2][2] / 1e-7, 2.0 / p.lambda_sq, max_relative = 1e-12);
        assert_relative_eq!(h.H[1][1] / 1e-7, 2.0 * p.nu * p.nu, max_relative = 1e-5);
    }

    #[test]
    fn ode_matches_closed_form() {
        let (p, s) = base();
        let x = near_bar(&p, &s);
        let c = coefficients(&p, &s, x, x, Convention::Appendix).unwrap();
        for &t in &[0.05, 0.1, 0.3, 0.5] {
            let ode = covariance_ode(&c, &p, x, t, 1000).unwrap();
            let cf = covariance_closed_form(&c, &p, x, t, ClosedFormVariant::Corrected).unwrap();
            let scale = cf.entries().iter().fold(1e-12f64, |m, v| m.max(v.abs()));
            for (u, v) in ode.entries().iter().zip(cf.entries()) {
                assert!((u - v).abs() / scale <= 1e-6, "s={t}: {u} vs {v}");
            }
            for i in 0..3 {
                assert_relative_eq!(ode.J[i], cf.J[i], max_relative = 1e-9, epsilon = 1e-12);
            }
            assert!(ode.min_eigenvalue() >= -1e-12);
        }
    }

    #[test]
    fn printed_d_coefficients_disagree_with_ode() {
        let (p, s) = base();
        let x = near_bar(&p, &s);
        let c = coefficients(&p, &s, x, x, Convention::Appendix).unwrap();
        let ode = covariance_ode(&c, &p, x, 0.5, 1000).unwrap();
        let printed = covariance_closed_form(&c, &p, x, 0.5, ClosedFormVariant::AsPrinted).unwrap();
        assert!((ode.H[1][1] - printed.H[1][1]).abs() > 1e-6 * ode.H[1][1].abs());
        let corrected =
            covariance_closed_form(&c, &p, x, 0.5, ClosedFormVariant::Corrected).unwrap();
        assert_eq!(printed.H[0][0], corrected.H[0][0]);
        assert_eq!(printed.H[1][2], corrected.H[1][2]);
    }

    #[test]
    fn density_peak_and_residuals() {
        let (p, s) = base();
        let from = near_bar(&p, &s);
        let t = 0.1;
        let to = argmax(from, t, &s, &p, Convention::Appendix).unwrap();
        let r = zero_exponent_residuals(from, to, t, &s, &p, Convention::Appendix).unwrap();
        assert!(
            r[0].abs() <= 1e-8 && r[1].abs() <= 1e-8 && r[2].abs() <= 1e-8,
            "{r:?}"
        );
        let d = transition_density(from, to, t, &s, &p, Convention::Appendix).unwrap();
        let log_norm: f64 = d.variances.iter().map(|v| -0.5 * (2.0 * PI * v).ln()).sum();
        assert_relative_eq!(d.log_gaussian, log_norm, max_relative = 1e-12);
        assert_relative_eq!(
            d.log_density,
            log_norm - d.potential - s.mass * t,
            max_relative = 1e-12
        );
    }

    #[test]
    fn density_peak_grows_like_three_halves_log() {
        let (p, s) = base();
        let from = near_bar(&p, &s);
        let l = |t: f64| {
            let to = argmax(from, t, &s, &p, Convention::Appendix).unwrap();
            transition_density(from, to, t, &s, &p, Convention::Appendix)
                .unwrap()
                .log_density
        };
        let slope = (l(1e-6) - l(1e-5)) / (10f64).ln();
        assert_relative_eq!(slope, 1.5, max_relative = 1e-3);
    }

    #[test]
    fn density_rejects_nonpositive_time() {
        let (p, s) = base();
        let x = near_bar(&p, &s);
        assert!(matches!(
            transition_density(x, x, 0.0, &s, &p, Convention::Appendix),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gaussian_factor_normalizes() {
        let (p, s) = base();
        let from = AgentState::new(s.C_bar_phase + 0.05, p.K_bar, s.A_bar_phase);
        let t = 0.01;
        let centre = argmax(from, t, &s, &p, Convention::Appendix).unwrap();
        let d0 = transition_density(from, centre, t, &s, &p, Convention::Appendix).unwrap();
        let sd: Vec<f64> = d0.variances.iter().map(|v| v.sqrt()).collect();
        let n = 41;
        let h: Vec<f64> = sd.iter().map(|s| 14.0 * s / (n - 1) as f64).collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let to = AgentState::new(
                        centre.C - 7.0 * sd[0] + i as f64 * h[0],
                        centre.K - 7.0 * sd[1] + j as f64 * h[1],
                        centre.A - 7.0 * sd[2] + k as f64 * h[2],
                    );
                    let d = transition_density(from, to, t, &s, &p, Convention::Appendix).unwrap();
                    total += d.log_gaussian.exp();
                }
            }
        }
        total *= h[0] * h[1] * h[2];
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn maintext_convention_halves_variances() {
        let (p, s) = base();
        let x = near_bar(&p, &s);
        let a = transition_density(x, x, 0.1, &s, &p, Convention::Appendix).unwrap();
        let m = transition_density(x, x, 0.1, &s, &p, Convention::MainText).unwrap();
        assert_relative_eq!(m.variances[0] * 2.0, a.variances[0], max_relative = 1e-14);
        assert_relative_eq!(m.variances[2] * 2.0, a.variances[2], max_relative = 1e-14);
        assert_relative_eq!(m.coefficients.C_bar, p.C_bar + 2.0 * p.varpi);
    }

    #[test]
    fn chapman_kolmogorov_consumption_marginal() {
        // The C marginal is affine in the start point with constant rate k when
        // K and A sit at their own starting values, so two half steps compose exactly.
        let (p, s) = base();
        let from = near_bar(&p, &s);
        let c = coefficients(&p, &s, from, from, Convention::Appendix).unwrap();
        let k = c.alpha + c.beta;
        let v = variance_rates(&c, &p)[0];
        let dc0 = from.C - c.C_bar;
        let err = |t: f64| {
            let one_mean = dc0 * (1.0 + k * t);
            let one_var = v * t;
            let half = 1.0 + k * t / 2.0;
            let two_mean = dc0 * half * half;
            let two_var = v * t / 2.0 * half * half + v * t / 2.0;
            ((one_mean - two_mean).abs() / dc0.abs()).max((one_var - two_var).abs() / one_var)
        };
        let order = (err(0.02) / err(0.01)).log2();
        assert!(order >= 1.0, "{order}");
    }

    #[test]
    fn nontrivial_peak_is_damped_by_mass() {
        let p = ModelParams::default();
        let s1 = solve_nontrivial(&p).unwrap();
        let from = AgentState::new(s1.C_bar_phase + 0.05, p.K_bar, s1.A_bar_phase);
        let t = 0.1;
        let to = argmax(from, t, &s1, &p, Convention::Appendix).unwrap();
        let d = transition_density(from, to, t, &s1, &p, Convention::Appendix).unwrap();
        assert!(s1.mass > 0.0);
        assert_relative_eq!(
            (d.log_density - d.log_gaussian + d.potential).exp(),
            (-s1.mass * t).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn laplace_at_rest_point() {
        let p = ModelParams::default();
        let mut s1 = solve_nontrivial(&p).unwrap();
        // With C̄_ι = Ā_ιK̄^ε − δK̄ the drift vanishes at (C̄_ι, K̄, Ā_ι).
        s1.C_bar_phase = s1.A_bar_phase * p.k_bar_eps() - p.delta * p.K_bar;
        let x = AgentState::new(s1.C_bar_phase, p.K_bar, s1.A_bar_phase);
        let v = laplace_propagator(x, x, &s1, &p, Convention::Appendix).unwrap();
        assert_relative_eq!(v, 1.0 / (2.0 * s1.mass).sqrt(), max_relative = 1e-12);
        let mut st = solve_trivial(&p).unwrap();
        st.C_bar_phase = st.A_bar_phase * p.k_bar_eps() - p.delta * p.K_bar;
        let y = AgentState::new(st.C_bar_phase, p.K_bar, st.A_bar_phase);
        assert!(matches!(
            laplace_propagator(y, y, &st, &p, Convention::Appendix),
            Err(Error::Domain(_))
        ));
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn laplace_matches_time_quadrature() {
        let p = ModelParams::default();
        let s1 = solve_nontrivial(&p).unwrap();
        let from = AgentState::new(s1.C_bar_phase + 0.02, p.K_bar, s1.A_bar_phase);
        let to = AgentState::new(from.C + 0.01, from.K + 0.05, from.A + 0.01);
        let closed = laplace_propagator(from, to, &s1, &p, Convention::Appendix).unwrap();
        // Substituting t = u² removes the 1/√t endpoint behaviour.
        let f = |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            let t = u * u;
            2.0 * u
                * (-s1.mass * t).exp()
                * laplace_kernel(from, to, t, &s1, &p, Convention::Appendix).unwrap()
        };
        let upper = (60.0 / s1.mass.max(1e-3)).sqrt().min(200.0);
        let numeric = simpson(f, 0.0, upper, 200_000);
        assert!(
            ((numeric - closed) / closed).abs() < 0.02,
            "{numeric} vs {closed}"
        );
    }

    #[test]
    fn laplace_decays_along_axes() {
        let p = ModelParams::default();
        let s1 = solve_nontrivial(&p).unwrap();
        let from = AgentState::new(s1.C_bar_phase, p.K_bar, s1.A_bar_phase);
        let base_to = AgentState::new(from.C, from.K, from.A);
        for axis in 0..3 {
            let mut last = f64::INFINITY;
            for step in 1..6 {
                let mut v = base_to.to_array();
                v[axis] += 0.2 * step as f64 * if axis == 1 { -1.0 } else { 1.0 };
                let to = AgentState::from_array(v);
                let val = laplace_propagator(from, to, &s1, &p, Convention::Appendix).unwrap();
                assert!(val < last, "axis {axis} step {step}");
                last = val;
            }
        }
    }

    #[test]
    fn average_path_fixed_point_and_technology_decay() {
        let (p, s) = base();
        let eq = equilibrium(&p, &s).unwrap();
        if eq.K > 0.0 {
            let path = average_path(eq, 1.0, &s, &p, 100).unwrap();
            let last = path.last();
            assert_relative_eq!(last.K, eq.K, max_relative = 1e-12);
            assert_relative_eq!(last.C, eq.C, max_relative = 1e-12);
        }
        let start = AgentState::new(s.C_bar_phase, p.K_bar, s.A_bar_phase + 1.0);
        let path = average_path(start, 2.0, &s, &p, 200).unwrap();
        assert_relative_eq!(
            path.last().A - s.A_bar_phase,
            (-2.0 / (2.0 * p.lambda_sq)).exp(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn average_path_terminates_at_zero_capital() {
        let (p, s) = base();
        let start = AgentState::new(s.C_bar_phase + 50.0, 0.5, s.A_bar_phase);
        match average_path(start, 20.0, &s, &p, 2000) {
            Err(Error::TrajectoryTerminated { partial, .. }) => assert!(!partial.states.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn average_path_matches_argmax_to_second_order() {
        let (p, s) = base();
        let from = AgentState::new(s.C_bar_phase, p.K_bar, s.A_bar_phase);
        let ts = [0.2, 0.1, 0.05, 0.025];
        let errs: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let a = argmax(from, t, &s, &p, Convention::Appendix).unwrap();
                let b = average_path(from, t, &s, &p, 200).unwrap().last();
                (a.C - b.C)
                    .abs()
                    .max((a.K - b.K).abs())
                    .max((a.A - b.A).abs())
            })
            .collect();
        let order = fitted_order(&ts, &errs);
        assert!(order >= 1.9, "{order} {errs:?}");
    }

    fn fitted_order(x: &[f64], y: &[f64]) -> f64 {
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let n = x.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
        num / den
    }

    #[test]
    fn equilibrium_zero_capital_and_rhs() {
        let (mut p, mut s) = base();
        s.C_bar_phase = (1.0 - p.epsilon) * s.A_bar_phase * p.k_bar_eps();
        assert_eq!(equilibrium(&p, &s).unwrap().K, 0.0);
        p.r_c = p.delta;
        let s = solve_trivial(&p).unwrap();
        let eq = equilibrium(&p, &s).unwrap();
        assert_eq!(eq.A, s.A_bar_phase);
        if eq.K > 0.0 {
            let r = average_path_rhs(eq, &p, &s, eq.K).unwrap();
            assert!(r.iter().all(|v| v.abs() <= 1e-12));
        }
    }

    #[test]
    fn jacobian_eigenvalues_match_characteristic_polynomial() {
        let mut p = ModelParams::default();
        p.r_c = p.delta;
        p.A0 = 0.8;
        p.kappa = 0.0;
        p.K_bar = 1.0;
        p.C_bar = 3.0;
        let s = solve_trivial(&p).unwrap();
        let rep = linearized_eigenvalues(&p, &s).unwrap();
        assert!(rep.jacobian[0].re < 0.0 && rep.jacobian[1].re > 0.0);
        let j = jacobian_ck(rep.equilibrium, &p, &s, rep.equilibrium.K);
        for ev in rep.jacobian {
            let tr = j[0][0] + j[1][1];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            assert!((ev.re * ev.re - tr * ev.re + det).abs() < 1e-12);
        }
        assert_eq!(rep.technology, -1.0 / (2.0 * p.lambda_sq));
    }

    proptest! {
        #[test]
        fn density_positive(dc in -0.5f64..0.5, dk in -2.0f64..2.0, da in -0.5f64..0.5, t in 0.01f64..1.0) {
            let (p, s) = base();
            let from = near_bar(&p, &s);
            let to = AgentState::new(from.C + dc, from.K + dk, from.A + da);
            let d = transition_density(from, to, t, &s, &p, Convention::Appendix).unwrap();
            prop_assert!(d.density >= 0.0 && d.log_density.is_finite());
        }

        #[test]
        fn closed_form_symmetric_psd_small_s(s in 0.0f64..0.05) {
            let (p, sol) = base();
            let x = near_bar(&p, &sol);
            let c = coefficients(&p, &sol, x, x, Convention::Appendix).unwrap();
            let h = covariance_closed_form(&c, &p, x, s, ClosedFormVariant::Corrected).unwrap();
            for i in 0..3 { for j in 0..3 { prop_assert_eq!(h.H[i][j], h.H[j][i]); } }
            prop_assert!(h.min_eigenvalue() >= -1e-12);
        }
    }
}
