//! Saddle-point phases of the field action.
//!
//! The trivial phase has a vanishing vacuum and γη = 0. The non-trivial
//! phase has γη > 0, fixed by the compatibility condition of the saddle-point
//! equation. For each phase this module solves the self-consistent technology
//! average Γ₃, the truncation shifts (C₁, K₁′, A₁), the phase averages of
//! (A, C, K, Y), the mass m_ι and the existence and stability diagnostics.
//!
//! Throughout, `Y` denotes the signed coefficient δ − Γ₃εK̄^{ε−1}, negative
//! whenever marginal productivity exceeds depreciation.

use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Phase label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Trivial,
    Nontrivial,
}

impl Phase {
    /// Phase from its numeric index (0 trivial, 1 non-trivial).
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Phase::Trivial),
            1 => Ok(Phase::Nontrivial),
            _ => Err(Error::Parameter(format!("phase must be 0 or 1, got {i}"))),
        }
    }
}

/// Truncation shifts of the saddle-point Gaussian.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shifts {
    /// Consumption cut-off shift C₁.
    pub C1: f64,
    /// Capital upper-bound shift K₁′ in the selected form.
    pub K1p: f64,
    /// Technology cut-off shift A₁.
    pub A1: f64,
}

/// All variants of the shifts, for reporting.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub C1: f64,
    pub C1_simplified: f64,
    pub C1_erf: f64,
    pub A1: f64,
    pub A1_estimate: f64,
    pub K1p: f64,
    pub K1p_exact: f64,
    pub K1p_paper_approx: f64,
    pub K1p_simplified: f64,
}

/// Phase averages of technology, consumption, capital and production.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAverages {
    pub A: f64,
    pub C: f64,
    pub K: f64,
    pub Y: f64,
}

/// Solved phase.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSolution {
    pub phase: Phase,
    pub gamma_eta: f64,
    /// (Γ₁, Γ₂, Γ₃) = (⟨C⟩, ⟨K′⟩, ⟨A⟩) at the saddle point.
    pub Gamma: [f64; 3],
    pub shifts: Shifts,
    pub A_bar_phase: f64,
    pub C_bar_phase: f64,
    pub mass: f64,
    pub averages: PhaseAverages,
    pub feasible: bool,
    pub stable: bool,
    pub Y_coef: f64,
    /// Non-fatal diagnostics such as sign inconsistencies.
    pub warnings: Vec<String>,
}

/// Signed coefficient δ − Γ₃εK̄^{ε−1}.
pub fn y_coef(params: &ModelParams, gamma3: f64) -> f64 {
    params.delta - gamma3 * params.epsilon * params.K_bar.powf(params.epsilon - 1.0)
}

/// K̄^ε(1−ε).
fn kf(params: &ModelParams) -> f64 {
    params.k_bar_eps() * (1.0 - params.epsilon)
}

/// Consumption variance factor ς²ϖ² + (ĀF′(K̄) + r_c)².
fn c_denominator(params: &ModelParams, a: f64) -> f64 {
    params.varsigma.powi(2) * params.varpi.powi(2)
        + (a * params.f_prime(params.K_bar) + params.r_c).powi(2)
}

/// Inverse Mills ratio φ(u)/Φ(u) of the standard normal.
pub fn inverse_mills(u: f64) -> f64 {
    if u > -35.0 {
        let phi = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
        let cdf = 0.5 * erfc(-u / SQRT_2);
        phi / cdf
    } else {
        let v = 1.0 / (u * u);
        let series =
            1.0 - v + 3.0 * v * v - 15.0 * v.powi(3) + 105.0 * v.powi(4) - 945.0 * v.powi(5);
        -u / series
    }
}

/// Consumption cut-off shift, simplified form √(2/π)ϖ.
pub fn c1_simplified(params: &ModelParams) -> f64 {
    FRAC_2_PI.sqrt() * params.varpi
}

/// Consumption cut-off shift, full truncated-Gaussian form.
pub fn c1_erf(params: &ModelParams) -> f64 {
    let u = params.C_bar / params.varpi;
    params.varpi * inverse_mills(u)
}

/// Technology cut-off shift A₁ at Γ₃.
pub fn a1_shift(params: &ModelParams, gamma3: f64) -> f64 {
    let lam = params.lambda();
    let u = lam.sqrt() * gamma3;
    // (2/√(πλ)) e^{−u²/2}/(1+erf(u/√2)) written through the Mills ratio.
    2.0 / (PI * lam).sqrt() * inverse_mills(u) * (2.0 * PI).sqrt() / 2.0
}

/// Negligibility estimate (2/√λ)exp(−λ(A₀/(1−ϰ))²/2).
pub fn a1_estimate(params: &ModelParams) -> f64 {
    let lam = params.lambda();
    2.0 / lam.sqrt() * (-0.5 * lam * params.a_bar0().powi(2)).exp()
}

/// Offset z = C̄ + C₁ − Γ₃K̄^ε(1−ε) of the capital bound.
fn k1_offset(params: &ModelParams, c1: f64, gamma3: f64) -> f64 {
    params.C_bar + c1 - gamma3 * kf(params)
}

/// Exact capital upper-bound shift −σφ(z/σ)/Φ(z/σ), σ = √|Y|ν.
pub fn k1p_exact(params: &ModelParams, c1: f64, gamma3: f64) -> f64 {
    let sigma = y_coef(params, gamma3).abs().sqrt() * params.nu;
    let z = k1_offset(params, c1, gamma3);
    -sigma * inverse_mills(z / sigma)
}

/// Rational-exponential surrogate for K₁′.
pub fn k1p_paper_approx(params: &ModelParams, c1: f64, gamma3: f64) -> f64 {
    let var = params.nu.powi(2) * y_coef(params, gamma3).abs();
    let z = k1_offset(params, c1, gamma3);
    let tail = (-1.9 * (z.abs() / (2.0 * var).sqrt()).powf(1.3)).exp();
    -2.0 * var * (-z * z / (2.0 * var)).exp() / (2.0 - tail)
}

/// Simplified K₁′ = −(2/π)|C̄ + √(2/π)ϖ − ĀK̄^ε(1−ε)| − √(2|Y|/π)ν.
pub fn k1p_simplified(params: &ModelParams, gamma3: f64) -> f64 {
    let y = y_coef(params, gamma3);
    -FRAC_2_PI * (params.C_bar + c1_simplified(params) - params.a_bar0() * kf(params)).abs()
        - (2.0 * y.abs() / PI).sqrt() * params.nu
}

/// Selected shifts at Γ₃.
pub fn shifts_at(params: &ModelParams, gamma3: f64) -> Shifts {
    let c1 = if params.c1_erf {
        c1_erf(params)
    } else {
        c1_simplified(params)
    };
    let k1p = if params.paper_k1_approx {
        k1p_paper_approx(params, c1, gamma3)
    } else {
        k1p_exact(params, c1, gamma3)
    };
    Shifts {
        C1: c1,
        K1p: k1p,
        A1: a1_shift(params, gamma3),
    }
}

/// All shift variants at Γ₃.
pub fn boundary_shifts(params: &ModelParams, gamma3: f64) -> ShiftReport {
    let s = shifts_at(params, gamma3);
    ShiftReport {
        C1: s.C1,
        C1_simplified: c1_simplified(params),
        C1_erf: c1_erf(params),
        A1: s.A1,
        A1_estimate: a1_estimate(params),
        K1p: s.K1p,
        K1p_exact: k1p_exact(params, s.C1, gamma3),
        K1p_paper_approx: k1p_paper_approx(params, s.C1, gamma3),
        K1p_simplified: k1p_simplified(params, gamma3),
    }
}

/// Right-hand side of the Γ₃ saddle-point equation evaluated at `gamma3`.
pub fn gamma3_rhs(params: &ModelParams, gamma_eta: f64, gamma3: f64) -> Result<f64> {
    let y = y_coef(params, gamma3);
    let s = shifts_at(params, gamma3);
    let a1 = if params.include_a1 { s.A1 } else { 0.0 };
    let ab = params.varpi.powi(2) / c_denominator(params, gamma3) + params.nu.powi(2);
    let k = params.kappa;
    let p = (1.0 - k) * params.A0 + (2.0 - k) * k * gamma3 + a1;
    let q = params.C_bar + s.C1 - s.K1p;
    let num = 2.0 * (2.0 * p * y * y + q * gamma_eta * y);
    let den = 4.0 * y * y - ab * gamma_eta * gamma_eta * y + 2.0 * gamma_eta * kf(params);
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Singularity("denominator of the Γ₃ equation".into()));
    }
    Ok(num / den)
}

/// Converged Γ₃ together with its final residual and iteration count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub gamma3: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Damped fixed-point iteration of the Γ₃ equation started at A₀/(1−ϰ).
pub fn gamma3_fixed_point(params: &ModelParams, gamma_eta: f64) -> Result<FixedPoint> {
    if !(gamma_eta >= 0.0) {
        return Err(Error::Domain(format!(
            "gamma_eta must be >= 0, got {gamma_eta}"
        )));
    }
    let damping = params.fp_damping;
    let max_iter = params.fp_max_iter as usize;
    let mut g = params.a_bar0();
    let mut residual = f64::INFINITY;
    let mut best = (g, f64::INFINITY, 0);
    for it in 0..max_iter {
        let next = gamma3_rhs(params, gamma_eta, g)?;
        residual = (next - g).abs();
        if residual < best.1 {
            best = (g, residual, it);
        }
        if residual <= 1e-12 * g.abs().max(1.0) {
            break;
        }
        g = (1.0 - damping) * g + damping * next;
        if !g.is_finite() {
            break;
        }
    }
    if best.1 <= 1e-10 {
        return Ok(FixedPoint {
            gamma3: best.0,
            residual: best.1,
            iterations: best.2,
        });
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
    })
}

/// First-order solution in γη of the Γ₃ equation.
pub fn gamma3_first_order(params: &ModelParams, gamma_eta: f64) -> Result<f64> {
    let a_bar = params.a_bar0();
    let y0 = y_coef(params, a_bar);
    if y0 == 0.0 {
        return Err(Error::Singularity("δ − A₀εK̄^{ε−1}/(1−ϰ)".into()));
    }
    let s = shifts_at(params, a_bar);
    let q = params.C_bar + s.C1 - s.K1p;
    Ok(a_bar - first_order_a_slope(params, q, y0) * gamma_eta)
}

/// Slope ½[K̄^εA₀(1−ε) − qY(1−ϰ)]/(Y²(1−ϰ)³) of the technology average.
fn first_order_a_slope(params: &ModelParams, q: f64, y: f64) -> f64 {
    let k1 = 1.0 - params.kappa;
    0.5 * (kf(params) * params.A0 - q * y * k1) / (y * y * k1.powi(3))
}

/// Γ₁ and Γ₂ at first order in γη, evaluated at the solved Γ₃.
pub fn gamma12(params: &ModelParams, gamma_eta: f64, gamma3: f64) -> Result<(f64, f64)> {
    let y = y_coef(params, gamma3);
    if y == 0.0 {
        return Err(Error::Singularity("δ − Γ₃εK̄^{ε−1}".into()));
    }
    let s = shifts_at(params, gamma3);
    let g1 = params.C_bar + s.C1
        - params.varpi.powi(2) * gamma3 / (2.0 * c_denominator(params, gamma3) * y.abs())
            * gamma_eta;
    let g2 = s.K1p
        - (params.nu.powi(2) * gamma3 * y + kf(params) * (1.0 - y) * s.K1p) / (2.0 * y * y)
            * gamma_eta;
    Ok((g1, g2))
}

/// Phase averages of (A, C, K) and the production average.
pub fn phase_averages(params: &ModelParams, phase: Phase, gamma_eta: f64) -> Result<PhaseAverages> {
    let a_bar = params.a_bar0();
    let y = y_coef(params, a_bar);
    if y == 0.0 {
        return Err(Error::Singularity("δ − A₀εK̄^{ε−1}/(1−ϰ)".into()));
    }
    let s = shifts_at(params, a_bar);
    let c0 = params.C_bar + c1_simplified(params);
    let x = c0 - s.K1p;
    let kfv = kf(params);
    let k0 = -((c0 - a_bar * kfv) - s.K1p) / y;
    let ge = match phase {
        Phase::Trivial => 0.0,
        Phase::Nontrivial => gamma_eta,
    };
    let cden = c_denominator(params, a_bar);
    let k1 = 1.0 - params.kappa;
    let eps = params.epsilon;
    let kb = params.K_bar;
    let kbe = params.k_bar_eps();
    let a = a_bar - first_order_a_slope(params, x, y) * ge;
    let c = c0 - params.varpi.powi(2) * a_bar / (2.0 * cden * y.abs()) * ge;
    let k = k0
        - 0.5
            * kbe
            * (kbe * params.A0 * (1.0 - eps) - y * k1 * x)
            * (eps * x - kb * params.delta * (1.0 - eps))
            / (y.powi(4) * kb * k1.powi(3))
            * ge
        - kfv * (1.0 - y) * s.K1p / (2.0 * y.powi(3)) * ge
        - params.nu.powi(2) * a_bar / (2.0 * y * y) * ge
        - params.varpi.powi(2) * a_bar / (2.0 * cden * y * y) * ge;
    let prod = production_average(params, ge)?;
    let y_avg = match phase {
        Phase::Trivial => prod.Y0,
        Phase::Nontrivial => prod.Y1_bound,
    };
    Ok(PhaseAverages {
        A: a,
        C: c,
        K: k,
        Y: y_avg,
    })
}

/// Comparison of average production between the phases.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductionReport {
    pub Y0: f64,
    pub Y1_bound: f64,
    pub r_bar: f64,
    pub coefficient: f64,
    pub ordered: bool,
}

/// ⟨Y⟩₀ = Ā⟨K⟩₀^ε and the first-order bound on ⟨Y⟩₁.
pub fn production_average(params: &ModelParams, gamma_eta: f64) -> Result<ProductionReport> {
    let a_bar = params.a_bar0();
    let y = y_coef(params, a_bar);
    if y == 0.0 {
        return Err(Error::Singularity("δ − A₀εK̄^{ε−1}/(1−ϰ)".into()));
    }
    let s = shifts_at(params, a_bar);
    let c0 = params.C_bar + c1_simplified(params);
    let x = c0 - s.K1p;
    let kfv = kf(params);
    let base = ((c0 - a_bar * kfv) - s.K1p) / y.abs();
    if !(base > 0.0) {
        return Err(Error::Domain(format!(
            "average capital {base} is not positive, production average undefined"
        )));
    }
    let eps = params.epsilon;
    let k1 = 1.0 - params.kappa;
    let r_bar = eps * params.k_bar_eps() * params.A0 / k1;
    if r_bar == 0.0 {
        return Err(Error::Singularity("r̄".into()));
    }
    let coefficient = 1.0 - eps * (1.0 + params.delta / r_bar);
    let y0 = a_bar * base.powf(eps);
    let y1 = y0
        - (params.k_bar_eps() * params.A0 * (1.0 - eps) - y * x * k1) / (2.0 * y * y * k1.powi(3))
            * coefficient
            * base.powf(eps)
            * gamma_eta;
    Ok(ProductionReport {
        Y0: y0,
        Y1_bound: y1,
        r_bar,
        coefficient,
        ordered: gamma_eta == 0.0 || y1 < y0,
    })
}

/// Existence conditions of the non-trivial phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub gamma_positive: bool,
    pub a0_bound: bool,
    pub a0_bound_refined: bool,
    pub lambda_large: bool,
    pub spread: f64,
    pub spread_ok: bool,
    pub c0_window: (f64, f64),
    pub c0_in_window: bool,
    pub feasible: bool,
    pub reasons: Vec<String>,
}

/// Width U of the C₀ window.
pub fn window_width(params: &ModelParams) -> f64 {
    let k = params.kappa;
    let eps = params.epsilon;
    let kb = params.K_bar;
    let kbe = params.k_bar_eps();
    let d = params.delta;
    let y0 = y_coef(params, params.a_bar0());
    let q = d * kb.powf(1.0 - eps) / eps;
    let first =
        -(1.0 - k) * kb * k * y0 * ((2.0 - k) * params.A0 + (3.0 - k) * k * q) / (eps * kbe);
    let p = (1.0 - k) * (params.A0 + k * q) + k * q;
    first + (p * p - 2.0 * params.C_bar * p - params.C_bar.powi(2)) / ((1.0 - eps) * kbe)
}

/// Lower end α + √(ς²ϖ² + r_c²ϖ²) + 1/λ of the C₀ window.
pub fn window_floor(params: &ModelParams) -> f64 {
    params.alpha_laplace
        + (params.varsigma.powi(2) * params.varpi.powi(2)
            + params.r_c.powi(2) * params.varpi.powi(2))
        .sqrt()
        + 1.0 / params.lambda()
}

/// Evaluates every existence condition of the non-trivial phase.
pub fn phase_existence(params: &ModelParams) -> ExistenceReport {
    let mut reasons = Vec::new();
    let gamma_positive = params.gamma > 0.0;
    if !gamma_positive {
        reasons.push("γ<0".to_string());
    }
    let bound = (1.0 + SQRT_2) * params.C_bar;
    let a0_bound = params.A0 > bound;
    if !a0_bound {
        reasons.push("A₀ <= (1+√2)C̄".to_string());
    }
    let k = params.kappa;
    let refined = (bound
        - (2.0 - k) * k * params.delta * params.K_bar.powf(1.0 - params.epsilon) / params.epsilon)
        / (1.0 - k);
    let a0_bound_refined = params.A0 > refined;
    let lambda_large = params.lambda() >= params.lambda_min;
    if !lambda_large {
        reasons.push(format!("λ < {}", params.lambda_min));
    }
    let spread = -y_coef(params, params.a_bar0());
    let spread_ok = spread > 0.0 && spread < params.spread_max;
    if !spread_ok {
        reasons.push(format!(
            "marginal-product spread {spread} outside (0, {})",
            params.spread_max
        ));
    }
    let lo = window_floor(params);
    let hi = lo + window_width(params);
    let c0_in_window = params.C0 > lo && params.C0 < hi;
    if !c0_in_window {
        reasons.push(format!("C₀ = {} outside ]{lo}, {hi}[", params.C0));
    }
    ExistenceReport {
        gamma_positive,
        a0_bound,
        a0_bound_refined,
        lambda_large,
        spread,
        spread_ok,
        c0_window: (lo, hi),
        c0_in_window,
        feasible: gamma_positive && a0_bound && lambda_large && spread_ok && c0_in_window,
        reasons,
    }
}

/// Root of the compatibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityRoot {
    pub gamma_eta: f64,
    pub x: f64,
    pub d: f64,
    pub upper_bound: f64,
}

/// Constant D of the compatibility condition with r̂ → 0 and the A-bracket at zero.
pub fn compatibility_d(params: &ModelParams) -> f64 {
    let y0 = y_coef(params, params.a_bar0());
    kf(params)
        * (params.alpha_laplace - params.C0
            + (params.varsigma.powi(2) * params.varpi.powi(2) + params.r_c.powi(2)).sqrt()
            + 1.0 / params.lambda()
            + y0.abs())
}

/// Left-hand side x(2(x+4)ĀC̄ + (x+3)C̄² − (x+4)Ā²)/(x+2)² of the reduced condition.
pub fn compatibility_lhs(params: &ModelParams, x: f64) -> f64 {
    let a = params.a_bar0();
    let c = params.C_bar;
    x * (2.0 * (x + 4.0) * a * c + (x + 3.0) * c * c - (x + 4.0) * a * a) / (x + 2.0).powi(2)
}

/// Solves the compatibility condition for γη on the small-|x| branch.
pub fn compatibility_root(params: &ModelParams) -> Result<CompatibilityRoot> {
    let a = params.a_bar0();
    let c = params.C_bar;
    let d = compatibility_d(params);
    let y0 = y_coef(params, a);
    let kfv = kf(params);
    let upper_bound = 8.0 * y0.abs() * window_width(params) / kfv;
    if d < 0.0 {
        return Err(Error::Infeasible(format!(
            "compatibility constant D = {d} is negative"
        )));
    }
    if y0 == 0.0 {
        return Err(Error::Singularity("δ − A₀εK̄^{ε−1}/(1−ϰ)".into()));
    }
    let qa = c * c + 2.0 * c * a - a * a - d;
    let qb = 3.0 * c * c + 8.0 * c * a - 4.0 * a * a - 4.0 * d;
    let qc = -4.0 * d;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(Error::Infeasible(
            "compatibility condition has no real root".into(),
        ));
    }
    let x = if d == 0.0 {
        0.0
    } else {
        2.0 * qc / (-qb + disc.sqrt())
    };
    if !x.is_finite() {
        return Err(Error::Infeasible("compatibility root is not finite".into()));
    }
    let gamma_eta = x * y0 / kfv;
    if d > 0.0 && !(gamma_eta > 0.0 && gamma_eta < upper_bound) {
        return Err(Error::Infeasible(format!(
            "γη = {gamma_eta} outside the window ]0, {upper_bound}["
        )));
    }
    Ok(CompatibilityRoot {
        gamma_eta,
        x,
        d,
        upper_bound,
    })
}

/// Stability diagnostics of the non-trivial saddle point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub product_positive: bool,
    pub brackets: [f64; 3],
    pub brackets_positive: bool,
    pub stable: bool,
}

/// Positivity of ⟨K⟩⟨A⟩γ and of the three second-variation brackets.
pub fn stability_check(params: &ModelParams, solution: &PhaseSolution) -> StabilityReport {
    let ge = solution.gamma_eta;
    let y = solution.Y_coef.abs();
    let lam = params.lambda();
    let r = (params.varsigma.powi(2) * params.varpi.powi(2) + params.r_c.powi(2)).sqrt();
    let inv_sqrt_lr = if r > 0.0 {
        1.0 / (lam * r).sqrt()
    } else {
        f64::INFINITY
    };
    let b1 = 2.0 * r
        - if ge == 0.0 {
            0.0
        } else {
            ge * params.varpi * inv_sqrt_lr
        };
    let b2 = 2.0 * y - ge * y.sqrt() * params.nu / lam.sqrt();
    let b3 = 1.0 / lam
        - if ge == 0.0 {
            0.0
        } else {
            ge * (y.sqrt() * params.nu / (2.0 * lam.sqrt())
                + params.varpi * inv_sqrt_lr / 2.0
                + 2.0 * kf(params) / (lam * y))
        };
    let product_positive = solution.averages.K * solution.averages.A * params.gamma > 0.0;
    let brackets_positive = b1 > 0.0 && b2 > 0.0 && b3 > 0.0;
    StabilityReport {
        product_positive,
        brackets: [b1, b2, b3],
        brackets_positive,
        stable: product_positive && brackets_positive,
    }
}

/// Mass m₁ of the non-trivial phase.
pub fn mass_nontrivial(params: &ModelParams, a_avg1: f64, gamma3: f64, c_bar1: f64) -> f64 {
    let k = params.kappa;
    let a1 = params.A0 + k * a_avg1;
    let g = (1.0 - k) * a1 + k * gamma3;
    a1 * a1 - g * g
        + (g * g - 2.0 * params.C_bar * ((1.0 - k) * a1 + k * a1) - c_bar1 * c_bar1) / kf(params)
}

fn assemble(params: &ModelParams, phase: Phase, gamma_eta: f64) -> Result<PhaseSolution> {
    let fp = gamma3_fixed_point(params, gamma_eta)?;
    let gamma3 = fp.gamma3;
    let y = y_coef(params, gamma3);
    if y == 0.0 {
        return Err(Error::Singularity("δ − Γ₃εK̄^{ε−1}".into()));
    }
    let shifts = shifts_at(params, gamma3);
    let (g1, g2) = gamma12(params, gamma_eta, gamma3)?;
    let averages = phase_averages(params, phase, gamma_eta)?;
    let mut warnings = Vec::new();
    if y > 0.0 {
        warnings.push(format!(
            "δ − Γ₃εK̄^(ε−1) = {y} is positive although the solution assumes it negative"
        ));
    }
    let (a_bar_phase, c_bar_phase, mass) = match phase {
        Phase::Trivial => (params.a_bar0(), params.C_bar + c1_simplified(params), 0.0),
        Phase::Nontrivial => {
            let a1 = params.A0 + params.kappa * averages.A;
            (a1, g1, mass_nontrivial(params, averages.A, gamma3, g1))
        }
    };
    Ok(PhaseSolution {
        phase,
        gamma_eta,
        Gamma: [g1, g2, gamma3],
        shifts,
        A_bar_phase: a_bar_phase,
        C_bar_phase: c_bar_phase,
        mass,
        averages,
        feasible: true,
        stable: true,
        Y_coef: y,
        warnings,
    })
}

/// Trivial-phase solution (γη = 0, m₀ = 0).
pub fn solve_trivial(params: &ModelParams) -> Result<PhaseSolution> {
    let mut sol = assemble(params, Phase::Trivial, 0.0)?;
    let report = stability_check(params, &sol);
    sol.stable = report.brackets_positive;
    Ok(sol)
}

/// Non-trivial phase at an explicit γη, bypassing the compatibility root.
pub fn solve_nontrivial_at(params: &ModelParams, gamma_eta: f64) -> Result<PhaseSolution> {
    let mut sol = assemble(params, Phase::Nontrivial, gamma_eta)?;
    let existence = phase_existence(params);
    sol.feasible = existence.feasible;
    sol.stable = stability_check(params, &sol).stable;
    Ok(sol)
}

/// Non-trivial phase with γη fixed by the compatibility condition.
pub fn solve_nontrivial(params: &ModelParams) -> Result<PhaseSolution> {
    let existence = phase_existence(params);
    if !existence.gamma_positive {
        return Err(Error::Infeasible("γ<0".into()));
    }
    let root = compatibility_root(params)?;
    let mut sol = solve_nontrivial_at(params, root.gamma_eta)?;
    if !existence.feasible {
        sol.warnings.extend(existence.reasons);
    }
    Ok(sol)
}

/// Solution of the requested phase.
pub fn solve(params: &ModelParams, phase: Phase) -> Result<PhaseSolution> {
    match phase {
        Phase::Trivial => solve_trivial(params),
        Phase::Nontrivial => solve_nontrivial(params),
    }
}

/// Standard normal CDF through erf, exposed for tests of the shift forms.
pub fn normal_cdf(u: f64) -> f64 {
    0.5 * (1.0 + erf(u / SQRT_2))
}
