//! First-order corrections in the interaction strength γ.
//!
//! The single-agent correction potential `V` multiplies the transition
//! density by `exp(−γV)` with the raw coupling γ. The trajectory deviations,
//! their elasticities and the two-agent corrections are written with the
//! dimensionless coupling obtained by replacing γ with `γ/(Ā²K̄^ε)`; the
//! factors `1/Ā²` appearing in those formulas carry that rescaling, and the
//! field `gamma` of [`ModelParams`] is then read as the dimensionless value.
//! All corrections use the zeroth-order α and β, and read `K^ε` as `K̄^ε`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{self, Convention, DensityValue, GreenCoefficients};
use crate::model::AgentState;
use crate::params::ModelParams;
use crate::phase::PhaseSolution;

/// Coefficients at the phase reference point `(C̄_ι, K̄, Ā_ι)`, i.e. with
/// α and β at their zeroth-order values.
pub fn zeroth_order_coefficients(
    params: &ModelParams,
    solution: &PhaseSolution,
) -> Result<GreenCoefficients> {
    let x = AgentState::new(solution.C_bar_phase, params.K_bar, solution.A_bar_phase);
    green::coefficients(params, solution, x, x, Convention::Appendix)
}

/// Correction potential `V(to, from, t)` with `(C, K, A) = to` and
/// `(C′, K′, A′) = from`. Its last term carries one explicit factor of γ.
pub fn correction_potential(from: AgentState, to: AgentState, t: f64, params: &ModelParams) -> f64 {
    let kbe = params.k_bar_eps();
    let (k, a) = (to.K, to.A);
    let (dc, dk, da) = (to.C - from.C, to.K - from.K, to.A - from.A);
    let t2 = t * t;
    let t3 = t2 * t;
    2.0 * t2 * a * k + t3 / 12.0 * da * dc + t3 / 2.0 * da * dk - kbe * t3 * da * da / 12.0
        + a * (t3 * dc / 3.0 + t2 * dk - kbe * t3 * da / 3.0)
        + params.gamma * t2 * da * k
}

/// Density corrected at first order: `G·exp(−γV)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedDensity {
    pub density: f64,
    pub log_density: f64,
    pub potential: f64,
    pub uncorrected: DensityValue,
}

/// Transition density multiplied by `exp(−γV)`.
pub fn corrected_density(
    from: AgentState,
    to: AgentState,
    t: f64,
    solution: &PhaseSolution,
    params: &ModelParams,
    convention: Convention,
) -> Result<CorrectedDensity> {
    let g = green::transition_density(from, to, t, solution, params, convention)?;
    let v = correction_potential(from, to, t, params);
    let log_density = g.log_density - params.gamma * v;
    Ok(CorrectedDensity {
        density: log_density.exp(),
        log_density,
        potential: v,
        uncorrected: g,
    })
}

/// Initial state, initial velocity and horizon of a deviation query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationQuery {
    pub initial_state: AgentState,
    /// `(Ċ(0), K̇(0), Ȧ(0))`.
    pub initial_velocity: [f64; 3],
    pub t: f64,
}

/// Coefficients of δK and δA on the six initial conditions, without γ.
/// Rows: δK, δA. Columns: C(0), K(0), A(0), Ċ(0), K̇(0), Ȧ(0).
fn deviation_matrix(t: f64, coeffs: &GreenCoefficients, params: &ModelParams) -> [[f64; 6]; 2] {
    let (b, c) = (coeffs.b_coef, coeffs.c_coef);
    let a2 = coeffs.A_bar * coeffs.A_bar;
    let kbe = params.k_bar_eps();
    let p = |n: i32| t.powi(n);
    [
        [
            7.0 * c * p(5) / (720.0 * a2),
            c * p(4) / (48.0 * a2),
            b * p(3) / (6.0 * kbe * a2) + kbe * c * p(5) / 90.0,
            -7.0 * c * p(6) / (1440.0 * a2),
            c * p(5) / (60.0 * a2),
            b * p(4) / (24.0 * kbe * a2) + 3.0 * kbe * c * p(6) / (160.0 * a2),
        ],
        [
            0.0,
            c * p(3) / (6.0 * kbe * a2),
            0.0,
            0.0,
            c * p(4) / 24.0,
            t,
        ],
    ]
}

/// Deviations `(δC, δK, δA)` from the average path at horizon `t`.
pub fn path_deviation(
    query: &DeviationQuery,
    coeffs: &GreenCoefficients,
    params: &ModelParams,
) -> Result<[f64; 3]> {
    if !(query.t >= 0.0 && query.t.is_finite()) {
        return Err(Error::Domain(format!("t = {} must be >= 0", query.t)));
    }
    let x = query.initial_state;
    let v = query.initial_velocity;
    let inputs = [x.C, x.K, x.A, v[0], v[1], v[2]];
    let m = deviation_matrix(query.t, coeffs, params);
    let dot = |row: &[f64; 6]| row.iter().zip(&inputs).map(|(a, b)| a * b).sum::<f64>();
    Ok([0.0, params.gamma * dot(&m[0]), params.gamma * dot(&m[1])])
}

/// One partial derivative of the deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elasticity {
    /// `∂(δK)/∂K(0)` style label.
    pub name: String,
    /// Value of the published expression, with γ where it is printed.
    pub printed: f64,
    /// Exact partial of [`path_deviation`] (γ times the coefficient).
    pub derived: f64,
    /// Central-difference estimate from [`path_deviation`].
    pub finite_difference: f64,
    /// Published sign: +1 or −1.
    pub expected_sign: i8,
    pub sign_ok: bool,
}

/// Partials of δK and δA with respect to initial positions and velocities.
pub fn elasticity_table(
    t: f64,
    coeffs: &GreenCoefficients,
    params: &ModelParams,
) -> Result<Vec<Elasticity>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be > 0")));
    }
    let m = deviation_matrix(t, coeffs, params);
    let g = params.gamma;
    let base = DeviationQuery {
        initial_state: AgentState::new(coeffs.C_bar, params.K_bar, coeffs.A_bar),
        initial_velocity: [0.0; 3],
        t,
    };
    // (label, output row, input column, printed value, printed sign)
    let (b, c) = (coeffs.b_coef, coeffs.c_coef);
    let kbe = params.k_bar_eps();
    let a2 = coeffs.A_bar * coeffs.A_bar;
    let entries: [(&str, usize, usize, f64, i8); 9] = [
        ("dK/dK0", 0, 1, c * t.powi(4) / (48.0 * a2), 1),
        (
            "dK/dA0",
            0,
            2,
            b * t.powi(3) / (6.0 * kbe * a2) + kbe * c * t.powi(5) / 90.0,
            1,
        ),
        ("dA/dK0", 1, 1, c * t.powi(3) / (6.0 * kbe * a2), 1),
        ("dK/dKdot0", 0, 4, g * c * t.powi(5) / (60.0 * a2), 1),
        (
            "dK/dAdot0",
            0,
            5,
            g * b * t.powi(4) / (24.0 * kbe * a2) + 3.0 * kbe * c * t.powi(6) / (160.0 * a2),
            1,
        ),
        ("dA/dAdot0", 1, 5, g * t, 1),
        ("dA/dKdot0", 1, 4, g * c * t.powi(4) / 24.0, 1),
        ("dK/dC0", 0, 0, g * 7.0 * c * t.powi(5) / (720.0 * a2), 1),
        (
            "dK/dCdot0",
            0,
            3,
            -g * 7.0 * c * t.powi(6) / (1440.0 * a2),
            -1,
        ),
    ];
    let mut out = Vec::with_capacity(entries.len());
    for (name, row, col, printed, sign) in entries {
        let derived = g * m[row][col];
        let fd = central_difference(&base, row, col, coeffs, params)?;
        out.push(Elasticity {
            name: name.to_string(),
            printed,
            derived,
            finite_difference: fd,
            expected_sign: sign,
            sign_ok: derived * sign as f64 > 0.0,
        });
    }
    Ok(out)
}

fn central_difference(
    base: &DeviationQuery,
    row: usize,
    col: usize,
    coeffs: &GreenCoefficients,
    params: &ModelParams,
) -> Result<f64> {
    let shifted = |h: f64| -> Result<f64> {
        let mut q = *base;
        let mut s = q.initial_state.to_array();
        if col < 3 {
            s[col] += h;
            q.initial_state = AgentState::from_array(s);
        } else {
            q.initial_velocity[col - 3] += h;
        }
        Ok(path_deviation(&q, coeffs, params)?[row + 1])
    };
    let x = if col < 3 {
        base.initial_state.to_array()[col]
    } else {
        base.initial_velocity[col - 3]
    };
    let h = x.abs().max(1.0) * 0.25;
    Ok((shifted(h)? - shifted(-h)?) / (2.0 * h))
}

type Mat = [[f64; 3]; 3];

fn to_array(m: &Matrix3<f64>) -> Mat {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Matrices of the first-order corrected Gaussian weight.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModifiedMatrices {
    pub M: Mat,
    pub H: Mat,
    pub R1: Mat,
    pub R2: Mat,
    pub R3: Mat,
    /// `(1 − γHR₁)(M + γHR₂)`.
    pub M_bar: Mat,
    /// `H − γHR₁H`.
    pub H_bar: Mat,
    /// The published `H̄`, whose (3,1) entry is zero while (1,3) is not.
    pub H_bar_printed: Mat,
    /// `R₃ − Mᵀ(2R₂ − R₁)`.
    pub source: Mat,
    pub gamma: f64,
}

impl ModifiedMatrices {
    /// Zero-order source term `γ X(0)ᵀ(R₃ − Mᵀ(2R₂ − R₁))X(0)`.
    pub fn source_form(&self, x0: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += x0[i] * self.source[i][j] * x0[j];
            }
        }
        self.gamma * s
    }
}

/// Builds `M̄`, `H̄` and the source matrix at interaction time `s`.
pub fn modified_matrices(
    params: &ModelParams,
    coeffs: &GreenCoefficients,
    s: f64,
) -> Result<ModifiedMatrices> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("s = {s} must be >= 0")));
    }
    let g = params.gamma;
    let kbe = params.k_bar_eps();
    let [a, b, c] = green::variance_rates(coeffs, params);
    let (s2, s3) = (s * s, s * s * s);
    let m = Matrix3::new(
        coeffs.alpha + coeffs.beta,
        0.0,
        0.0,
        1.0,
        coeffs.alpha,
        -kbe,
        0.0,
        0.0,
        0.0,
    );
    let h = Matrix3::from_diagonal(&nalgebra::Vector3::new(a * s, b * s, c * s));
    let r1 = Matrix3::new(
        0.0,
        0.0,
        s3 / 24.0,
        0.0,
        0.0,
        s2 / 4.0,
        s3 / 24.0,
        s2 / 4.0,
        -kbe * s3 / 12.0,
    );
    let r2 = Matrix3::new(
        0.0,
        0.0,
        s3 / 6.0,
        0.0,
        0.0,
        s2 / 2.0,
        0.0,
        s2 / 2.0,
        -kbe * s3 / 6.0,
    );
    let r3 = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, s2, 0.0, s2, 0.0);
    let id = Matrix3::identity();
    let m_bar = (id - g * h * r1) * (m + g * h * r2);
    let h_bar = h - g * h * r1 * h;
    let s4 = s2 * s2;
    let s5 = s4 * s;
    let h_bar_printed = [
        [a * s, 0.0, -a * c * s5 * g / 24.0],
        [0.0, b * s, -b * c * s4 * g / 8.0],
        [
            0.0,
            -b * c * s4 * g / 8.0,
            c * s + kbe * c * c * s5 * g / 24.0,
        ],
    ];
    let source = r3 - m.transpose() * (2.0 * r2 - r1);
    Ok(ModifiedMatrices {
        M: to_array(&m),
        H: to_array(&h),
        R1: to_array(&r1),
        R2: to_array(&r2),
        R3: to_array(&r3),
        M_bar: to_array(&m_bar),
        H_bar: to_array(&h_bar),
        H_bar_printed: h_bar_printed,
        source: to_array(&source),
        gamma: g,
    })
}

/// Initial and final states of two agents over a common horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoAgentQuery {
    /// `(initial, final)` of agent 1.
    pub agent1: (AgentState, AgentState),
    /// `(initial, final)` of agent 2.
    pub agent2: (AgentState, AgentState),
    pub t: f64,
}

/// Capital and technology deviation of one agent caused by the other.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossDeviation {
    pub K: f64,
    pub A: f64,
}

/// Entangled two-agent correction.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoAgentCorrection {
    pub V_I: f64,
    /// Deviation of agent 1 caused by agent 2.
    pub d21: CrossDeviation,
    /// Deviation of agent 2 caused by agent 1.
    pub d12: CrossDeviation,
    /// `∂(δA₁)/∂ΔA₂ = −cK̄^εt³/12` implied by the `ΔA₂/2` form.
    pub dA1_dDeltaA2: f64,
}

fn cross(
    other_mid: AgentState,
    other_delta: AgentState,
    t: f64,
    g: f64,
    b: f64,
    c: f64,
    kbe: f64,
) -> CrossDeviation {
    CrossDeviation {
        K: g * b * t * other_mid.A,
        A: g * (c * other_delta.C / 12.0 - c * kbe * other_delta.A / 12.0) * t.powi(3)
            + g * c * t * other_mid.K,
    }
}

/// Interaction potential `V_I` and the two cross deviations.
pub fn two_agent_correction(
    query: &TwoAgentQuery,
    coeffs: &GreenCoefficients,
    params: &ModelParams,
) -> Result<TwoAgentCorrection> {
    let t = query.t;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be > 0")));
    }
    let mid = |p: (AgentState, AgentState)| {
        AgentState::new(
            0.5 * (p.0.C + p.1.C),
            0.5 * (p.0.K + p.1.K),
            0.5 * (p.0.A + p.1.A),
        )
    };
    let delta =
        |p: (AgentState, AgentState)| AgentState::new(p.1.C - p.0.C, p.1.K - p.0.K, p.1.A - p.0.A);
    let (m1, m2) = (mid(query.agent1), mid(query.agent2));
    let (d1, d2) = (delta(query.agent1), delta(query.agent2));
    let g = params.gamma;
    let kbe = params.k_bar_eps();
    let (b, c) = (coeffs.b_coef, coeffs.c_coef);
    let v_i = g * t * t * (m1.A * m2.K + m1.K * m2.A)
        + g * t.powi(3) / 24.0 * (m1.A * d2.C + d1.C * m2.A - kbe * (m1.A * d2.A + d1.A * m2.A));
    Ok(TwoAgentCorrection {
        V_I: v_i,
        d21: cross(m2, d2, t, g, b, c, kbe),
        d12: cross(m1, d1, t, g, b, c, kbe),
        dA1_dDeltaA2: -g * c * kbe * t.powi(3) / 12.0,
    })
}
