//! Model parameters and their flat `key = value` configuration format.
//!
//! Every economic and statistical constant of the model lives in
//! [`ModelParams`], together with the handful of numerical controls used by
//! the solvers. The configuration format is one `key = value` pair per line;
//! `#` starts a comment and unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All parameters of the agent model plus numerical controls.
///
/// `lambda_sq` is the technology stiffness λ²; wherever a bare λ is needed it
/// is taken as `lambda_sq.sqrt()`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Consumption volatility ϖ.
    pub varpi: f64,
    /// Capital shock standard deviation ν.
    pub nu: f64,
    /// Technology stiffness λ².
    pub lambda_sq: f64,
    /// Consumption penalty ς.
    pub varsigma: f64,
    /// Depreciation rate δ.
    pub delta: f64,
    /// Exogenous interest rate.
    pub r_c: f64,
    /// Cobb–Douglas exponent ε.
    pub epsilon: f64,
    /// Reference capital K̄.
    pub K_bar: f64,
    /// Consumption target C̄.
    pub C_bar: f64,
    /// Exogenous technology A₀.
    pub A0: f64,
    /// Social technology feedback ϰ.
    pub kappa: f64,
    /// Capital–technology interaction strength γ.
    pub gamma: f64,
    /// Inverse mean lifespan α used by the Laplace-domain propagator.
    pub alpha_laplace: f64,
    /// Cumulated risk-aversion constant C₀.
    pub C0: f64,
    /// Technology drift g.
    pub g: f64,
    /// Intertemporal-constraint variance θ².
    pub theta_sq: f64,
    /// Generic action variance σ².
    pub sigma_sq: f64,
    /// Instantaneous-constraint variance η².
    pub eta_sq: f64,
    /// Smallest λ for which "λ ≫ 1" is considered satisfied.
    pub lambda_min: f64,
    /// Upper bound standing in for "≪ 1" in the marginal-product spread condition.
    pub spread_max: f64,
    /// Value of s·max(|α|,|β|) above which the closed-form covariance is used.
    pub small_s_switch: f64,
    /// Runge–Kutta steps per unit time for the covariance ODE.
    pub ode_steps_per_unit: f64,
    /// Damping of the Γ₃ fixed-point iteration.
    pub fp_damping: f64,
    /// Maximum number of Γ₃ fixed-point sweeps.
    pub fp_max_iter: f64,
    /// Use the rational-exponential surrogate for K₁′ instead of the exact form.
    pub paper_k1_approx: bool,
    /// Keep the technology cut-off shift A₁ inside the Γ₃ equation.
    pub include_a1: bool,
    /// Use the full erf ratio for C₁ instead of √(2/π)ϖ.
    pub c1_erf: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            varpi: 0.1,
            nu: 0.1,
            lambda_sq: 400.0,
            varsigma: 0.05,
            delta: 0.05,
            r_c: 0.05,
            epsilon: 0.3,
            K_bar: 10.0,
            C_bar: 1.0,
            A0: 8.0,
            kappa: 0.2,
            gamma: 1.0,
            alpha_laplace: 0.1,
            C0: 0.7487,
            g: 0.0,
            theta_sq: 1.0,
            sigma_sq: 0.01,
            eta_sq: 1.0,
            lambda_min: 10.0,
            spread_max: 1.0,
            small_s_switch: 0.05,
            ode_steps_per_unit: 1000.0,
            fp_damping: 0.5,
            fp_max_iter: 1000.0,
            paper_k1_approx: false,
            include_a1: false,
            c1_erf: false,
        }
    }
}

/// Configuration keys in declaration order.
pub const KEYS: [&str; 27] = [
    "varpi",
    "nu",
    "lambda_sq",
    "varsigma",
    "delta",
    "r_c",
    "epsilon",
    "K_bar",
    "C_bar",
    "A0",
    "kappa",
    "gamma",
    "alpha_laplace",
    "C0",
    "g",
    "theta_sq",
    "sigma_sq",
    "eta_sq",
    "lambda_min",
    "spread_max",
    "small_s_switch",
    "ode_steps_per_unit",
    "fp_damping",
    "fp_max_iter",
    "paper_k1_approx",
    "include_a1",
    "c1_erf",
];

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::Parse(format!(
            "{key}: expected a boolean, got {value:?}"
        ))),
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{key}: expected a number, got {value:?}")))
}

impl ModelParams {
    /// Technology stiffness λ = √(λ²).
    pub fn lambda(&self) -> f64 {
        self.lambda_sq.sqrt()
    }

    /// K̄^ε.
    pub fn k_bar_eps(&self) -> f64 {
        self.K_bar.powf(self.epsilon)
    }

    /// Zeroth-order phase technology A₀/(1−ϰ).
    pub fn a_bar0(&self) -> f64 {
        self.A0 / (1.0 - self.kappa)
    }

    /// Cobb–Douglas marginal product F′(K) = εK^{ε−1}.
    pub fn f_prime(&self, k: f64) -> f64 {
        self.epsilon * k.powf(self.epsilon - 1.0)
    }

    /// Assigns one configuration key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "paper_k1_approx" => self.paper_k1_approx = parse_bool(key, value)?,
            "include_a1" => self.include_a1 = parse_bool(key, value)?,
            "c1_erf" => self.c1_erf = parse_bool(key, value)?,
            _ => {
                let v = parse_f64(key, value)?;
                *self.slot_mut(key)? = v;
            }
        }
        Ok(())
    }

    /// Reads one numeric key.
    pub fn get(&self, key: &str) -> Result<f64> {
        let mut copy = *self;
        match key {
            "paper_k1_approx" => Ok(f64::from(u8::from(self.paper_k1_approx))),
            "include_a1" => Ok(f64::from(u8::from(self.include_a1))),
            "c1_erf" => Ok(f64::from(u8::from(self.c1_erf))),
            _ => Ok(*copy.slot_mut(key)?),
        }
    }

    /// Textual value of a key as written by [`ModelParams::to_config`].
    pub fn get_text(&self, key: &str) -> Result<String> {
        match key {
            "paper_k1_approx" => Ok(self.paper_k1_approx.to_string()),
            "include_a1" => Ok(self.include_a1.to_string()),
            "c1_erf" => Ok(self.c1_erf.to_string()),
            _ => Ok(fmt_num(self.get(key)?)),
        }
    }

    fn slot_mut(&mut self, key: &str) -> Result<&mut f64> {
        Ok(match key {
            "varpi" => &mut self.varpi,
            "nu" => &mut self.nu,
            "lambda_sq" => &mut self.lambda_sq,
            "varsigma" => &mut self.varsigma,
            "delta" => &mut self.delta,
            "r_c" => &mut self.r_c,
            "epsilon" => &mut self.epsilon,
            "K_bar" => &mut self.K_bar,
            "C_bar" => &mut self.C_bar,
            "A0" => &mut self.A0,
            "kappa" => &mut self.kappa,
            "gamma" => &mut self.gamma,
            "alpha_laplace" => &mut self.alpha_laplace,
            "C0" => &mut self.C0,
            "g" => &mut self.g,
            "theta_sq" => &mut self.theta_sq,
            "sigma_sq" => &mut self.sigma_sq,
            "eta_sq" => &mut self.eta_sq,
            "lambda_min" => &mut self.lambda_min,
            "spread_max" => &mut self.spread_max,
            "small_s_switch" => &mut self.small_s_switch,
            "ode_steps_per_unit" => &mut self.ode_steps_per_unit,
            "fp_damping" => &mut self.fp_damping,
            "fp_max_iter" => &mut self.fp_max_iter,
            _ => return Err(Error::Parse(format!("unknown parameter key {key:?}"))),
        })
    }

    /// Parses a `key = value` configuration on top of the defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut params = Self::default();
        params.apply_config_str(text)?;
        Ok(params)
    }

    /// Applies a `key = value` configuration to `self`.
    pub fn apply_config_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        self.validate()
    }

    /// Loads a configuration file.
    pub fn from_config_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    /// Serializes every key in declaration order.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.get_text(key).expect("declared key");
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    /// Checks the admissible ranges of all parameters.
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("varpi", self.varpi),
            ("nu", self.nu),
            ("lambda_sq", self.lambda_sq),
            ("varsigma", self.varsigma),
            ("delta", self.delta),
            ("r_c", self.r_c),
            ("epsilon", self.epsilon),
            ("K_bar", self.K_bar),
            ("C_bar", self.C_bar),
            ("A0", self.A0),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("alpha_laplace", self.alpha_laplace),
            ("C0", self.C0),
            ("g", self.g),
            ("theta_sq", self.theta_sq),
            ("sigma_sq", self.sigma_sq),
            ("eta_sq", self.eta_sq),
        ];
        if let Some((name, _)) = all.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parameter(format!("{name} must be finite")));
        }
        let positive = [
            ("varpi", self.varpi),
            ("nu", self.nu),
            ("lambda_sq", self.lambda_sq),
            ("K_bar", self.K_bar),
            ("C_bar", self.C_bar),
            ("A0", self.A0),
            ("alpha_laplace", self.alpha_laplace),
            ("theta_sq", self.theta_sq),
            ("sigma_sq", self.sigma_sq),
            ("eta_sq", self.eta_sq),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v <= 0.0) {
            return Err(Error::Parameter(format!("{name} must be > 0")));
        }
        if self.varsigma < 0.0 {
            return Err(Error::Parameter("varsigma must be >= 0".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter("delta must lie in (0,1)".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Parameter("epsilon must lie in (0,1)".into()));
        }
        if !(self.kappa >= 0.0 && self.kappa < 1.0) {
            return Err(Error::Parameter("kappa must lie in [0,1)".into()));
        }
        if !(self.fp_damping > 0.0 && self.fp_damping <= 1.0) {
            return Err(Error::Parameter("fp_damping must lie in (0,1]".into()));
        }
        if !(self.fp_max_iter >= 1.0 && self.ode_steps_per_unit >= 1.0) {
            return Err(Error::Parameter(
                "fp_max_iter and ode_steps_per_unit must be >= 1".into(),
            ));
        }
        if !(self.small_s_switch >= 0.0 && self.lambda_min > 0.0 && self.spread_max > 0.0) {
            return Err(Error::Parameter(
                "small_s_switch must be >= 0, lambda_min and spread_max > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Formats a number with 17 significant digits in scientific notation.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}
