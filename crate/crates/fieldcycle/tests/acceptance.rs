//! Acceptance suite: one PASS/FAIL line per criterion, with wall-clock
//! budgets where a criterion has one. Exits non-zero if any criterion fails.

#![allow(clippy::field_reassign_with_default)]

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use fieldcycle::corrections::{self, DeviationQuery, TwoAgentQuery};
use fieldcycle::green::{self, ClosedFormVariant, Convention};
use fieldcycle::io::{self, GridSpec};
use fieldcycle::mc::{self, MCConfig};
use fieldcycle::phase::{self, Phase};
use fieldcycle::{AgentState, ModelParams, PhaseSolution};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
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

/// A feasible parameter draw with both phases solved.
#[derive(Clone)]
struct Draw {
    params: ModelParams,
    trivial: PhaseSolution,
    nontrivial: PhaseSolution,
}

/// Parameters drawn around the baseline, with C₀ placed inside the window
/// where the compatibility root exists.
fn random_params(rng: &mut ChaCha12Rng) -> ModelParams {
    let mut p = ModelParams::default();
    p.epsilon = rng.random_range(0.25..0.35);
    p.delta = rng.random_range(0.03..0.07);
    p.r_c = rng.random_range(0.03..0.07);
    p.K_bar = rng.random_range(8.0..12.0);
    p.C_bar = rng.random_range(0.8..1.2);
    p.A0 = rng.random_range(6.0..10.0);
    p.kappa = rng.random_range(0.1..0.3);
    p.varpi = rng.random_range(0.05..0.15);
    p.nu = rng.random_range(0.05..0.15);
    p.lambda_sq = rng.random_range(300.0..500.0);
    p.varsigma = rng.random_range(0.03..0.07);
    p.gamma = rng.random_range(0.5..2.0);
    let y0 = phase::y_coef(&p, p.a_bar0()).abs();
    let r_full = (p.varsigma.powi(2) * p.varpi.powi(2) + p.r_c.powi(2)).sqrt();
    let r_window = (p.varsigma.powi(2) * p.varpi.powi(2) + p.r_c.powi(2) * p.varpi.powi(2)).sqrt();
    let reach = phase::window_width(&p).min(y0 + r_full - r_window);
    p.C0 = phase::window_floor(&p) + rng.random_range(0.05..0.95) * reach;
    p
}

fn feasible_draws(n: usize, seed: u64) -> (Vec<Draw>, usize) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 100 * n {
        attempts += 1;
        let p = random_params(&mut rng);
        if p.validate().is_err() || !phase::phase_existence(&p).feasible {
            continue;
        }
        let (Ok(t), Ok(nt)) = (phase::solve_trivial(&p), phase::solve_nontrivial(&p)) else {
            continue;
        };
        if nt.feasible {
            out.push(Draw {
                params: p,
                trivial: t,
                nontrivial: nt,
            });
        }
    }
    (out, attempts)
}

fn criterion_1(draws: &[Draw], attempts: usize) -> Outcome {
    if draws.len() < 100 {
        return outcome(
            false,
            format!("only {} feasible draws in {attempts} attempts", draws.len()),
        );
    }
    let mut worst_residual: f64 = 0.0;
    let mut worst_order = f64::INFINITY;
    let ges = [1e-3, 5e-4, 2.5e-4, 1.25e-4];
    for d in draws {
        let p = &d.params;
        let ge = d.nontrivial.gamma_eta;
        match phase::gamma3_fixed_point(p, ge) {
            Ok(fp) => {
                let back = phase::gamma3_rhs(p, ge, fp.gamma3).unwrap_or(f64::INFINITY);
                worst_residual = worst_residual.max((back - fp.gamma3).abs());
            }
            Err(e) => return outcome(false, format!("fixed point failed: {e}")),
        }
        let errs: Vec<f64> = ges
            .iter()
            .map(|&g| {
                let fp = phase::gamma3_fixed_point(p, g)
                    .map(|f| f.gamma3)
                    .unwrap_or(f64::NAN);
                let fo = phase::gamma3_first_order(p, g).unwrap_or(f64::NAN);
                (fp - fo).abs()
            })
            .collect();
        worst_order = worst_order.min(fitted_order(&ges, &errs));
    }
    outcome(
        worst_residual < 1e-10 && worst_order >= 1.9,
        format!(
            "{} draws ({attempts} attempts), max residual {worst_residual:.2e}, min fitted order {worst_order:.3}",
            draws.len()
        ),
    )
}

fn criterion_2(draws: &[Draw]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut mass_zero = true;
    let mut params: Vec<ModelParams> = draws.iter().map(|d| d.params).collect();
    params.push(ModelParams::default());
    for p in &params {
        let g3 = match phase::gamma3_fixed_point(p, 0.0) {
            Ok(fp) => fp.gamma3,
            Err(e) => return outcome(false, format!("fixed point failed: {e}")),
        };
        worst = worst.max((g3 - p.A0 / (1.0 - p.kappa)).abs());
        let t = phase::solve_trivial(p).expect("trivial phase");
        mass_zero &= t.mass == 0.0;
    }
    outcome(
        worst <= 1e-12 && mass_zero,
        format!(
            "max |Γ₃ − A₀/(1−ϰ)| = {worst:.2e}, m₀ = 0 in all {} cases: {mass_zero}",
            params.len()
        ),
    )
}

fn criterion_3(draws: &[Draw]) -> Outcome {
    let mut bad = Vec::new();
    for (i, d) in draws.iter().enumerate() {
        let (t, n) = (&d.trivial.averages, &d.nontrivial.averages);
        if !(n.C < t.C && n.A < t.A && n.Y < t.Y && d.nontrivial.mass > 0.0) {
            bad.push(i);
        }
    }
    outcome(
        bad.is_empty() && !draws.is_empty(),
        format!(
            "{} of {} draws ordered with m₁ > 0; violations at {bad:?}",
            draws.len() - bad.len(),
            draws.len()
        ),
    )
}

fn criterion_4(draws: &[Draw]) -> Outcome {
    let mut worst: f64 = 0.0;
    let n_draws = draws.len().min(50);
    for d in &draws[..n_draws] {
        let (p, s) = (&d.params, &d.trivial);
        let x = AgentState::new(s.C_bar_phase + 0.1, p.K_bar, s.A_bar_phase);
        let c = match green::coefficients(p, s, x, x, Convention::Appendix) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("coefficients: {e}")),
        };
        for k in 0..10 {
            let sv = 0.05 + 0.05 * k as f64;
            let ode = green::covariance_ode(&c, p, x, sv, 1000).expect("ode");
            let cf = green::covariance_closed_form(&c, p, x, sv, ClosedFormVariant::Corrected)
                .expect("closed form");
            let scale = cf.entries().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (u, v) in ode.entries().iter().zip(cf.entries()) {
                worst = worst.max((u - v).abs() / scale);
            }
        }
    }
    outcome(
        worst <= 1e-6 && n_draws == 50,
        format!("{n_draws} draws, 10 horizons each, relative sup error {worst:.2e}"),
    )
}

fn criterion_5(draws: &[Draw]) -> Outcome {
    let mut worst: f64 = 0.0;
    let n = 61;
    let width = 7.0;
    let t = 0.01;
    for d in draws.iter().take(5) {
        let (p, s) = (&d.params, &d.trivial);
        let from = AgentState::new(s.C_bar_phase + 0.05, p.K_bar, s.A_bar_phase);
        let centre = green::argmax(from, t, s, p, Convention::Appendix).expect("argmax");
        let d0 = green::transition_density(from, centre, t, s, p, Convention::Appendix)
            .expect("density");
        let sd: Vec<f64> = d0.variances.iter().map(|v| v.sqrt()).collect();
        let h: Vec<f64> = sd
            .iter()
            .map(|s| 2.0 * width * s / (n - 1) as f64)
            .collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let to = AgentState::new(
                        centre.C - width * sd[0] + i as f64 * h[0],
                        centre.K - width * sd[1] + j as f64 * h[1],
                        centre.A - width * sd[2] + k as f64 * h[2],
                    );
                    let g = green::transition_density(from, to, t, s, p, Convention::Appendix)
                        .expect("density");
                    total += g.log_gaussian.exp();
                }
            }
        }
        total *= h[0] * h[1] * h[2];
        worst = worst.max((total - 1.0).abs());
    }
    outcome(
        worst <= 1e-3,
        format!("5 draws on a {n}³ grid, max |∫G − 1| = {worst:.2e}"),
    )
}

fn criterion_6(draws: &[Draw]) -> Outcome {
    let ts = [0.2, 0.1, 0.05, 0.025];
    let mut worst_res: f64 = 0.0;
    let mut worst_order = f64::INFINITY;
    let mut worst_local = f64::INFINITY;
    let mut cases = 0;
    for d in draws.iter().take(5) {
        for s in [&d.trivial, &d.nontrivial] {
            let p = &d.params;
            let from = AgentState::new(s.C_bar_phase, p.K_bar, s.A_bar_phase);
            let mut errs = Vec::new();
            for &t in &ts {
                let a = match green::argmax(from, t, s, p, Convention::Appendix) {
                    Ok(a) => a,
                    Err(e) => return outcome(false, format!("argmax: {e}")),
                };
                let r = green::zero_exponent_residuals(from, a, t, s, p, Convention::Appendix)
                    .expect("residuals");
                worst_res = r.iter().fold(worst_res, |m, v| m.max(v.abs()));
                let b = match green::average_path(from, t, s, p, 200) {
                    Ok(path) => path.last(),
                    Err(e) => return outcome(false, format!("average path: {e}")),
                };
                errs.push(
                    (a.C - b.C)
                        .abs()
                        .max((a.K - b.K).abs())
                        .max((a.A - b.A).abs()),
                );
            }
            worst_order = worst_order.min(fitted_order(&ts, &errs));
            worst_local = worst_local.min((errs[2] / errs[3]).log2());
            cases += 1;
        }
    }
    outcome(
        worst_res <= 1e-8 && worst_order >= 1.9,
        format!(
            "{cases} cases, max residual {worst_res:.2e}, min fitted order {worst_order:.3}, min local order between the two smallest t {worst_local:.3}"
        ),
    )
}

fn criterion_7(draws: &[Draw]) -> Outcome {
    let mut tested = 0;
    let mut positive_k = 0;
    let mut saddles = 0;
    let mut worst_rhs: f64 = 0.0;
    for d in draws {
        let mut p = d.params;
        p.r_c = p.delta;
        for phase_kind in [Phase::Trivial, Phase::Nontrivial] {
            let Ok(s) = phase::solve(&p, phase_kind) else {
                continue;
            };
            if !s.feasible {
                continue;
            }
            tested += 1;
            let Ok(rep) = green::linearized_eigenvalues(&p, &s) else {
                continue;
            };
            let eq = rep.equilibrium;
            if eq.K <= 0.0 {
                continue;
            }
            positive_k += 1;
            let rhs = green::average_path_rhs(eq, &p, &s, eq.K).expect("rhs");
            worst_rhs = rhs.iter().fold(worst_rhs, |m, v| m.max(v.abs()));
            let (a, b) = (rep.jacobian[0].re, rep.jacobian[1].re);
            if a.min(b) < 0.0 && a.max(b) > 0.0 {
                saddles += 1;
            }
        }
    }
    outcome(
        tested > 0 && positive_k == tested && saddles == tested && worst_rhs <= 1e-12,
        format!(
            "{tested} feasible phases with r_c = δ; equilibrium capital positive in {positive_k}, saddle in {saddles}, max |rhs| {worst_rhs:.2e}"
        ),
    )
}

fn criterion_8(draws: &[Draw]) -> Outcome {
    let mut worst_rel: f64 = 0.0;
    let mut signs_ok = true;
    let mut printed_ok = true;
    let mut dc_zero = true;
    let mut cdot_negative = true;
    let mut sets: Vec<(ModelParams, PhaseSolution)> = vec![{
        let p = ModelParams::default();
        let s = phase::solve_trivial(&p).unwrap();
        (p, s)
    }];
    sets.extend(draws.iter().take(10).map(|d| {
        let mut p = d.params;
        p.gamma = 1.0;
        (p, phase::solve_trivial(&p).unwrap())
    }));
    for (p, s) in &sets {
        let c = corrections::zeroth_order_coefficients(p, s).expect("coefficients");
        for t in [0.5, 1.0, 2.0] {
            let table = corrections::elasticity_table(t, &c, p).expect("elasticities");
            for e in &table {
                worst_rel = worst_rel.max(((e.finite_difference - e.derived) / e.derived).abs());
                signs_ok &= e.sign_ok;
                printed_ok &= ((e.printed - e.derived) / e.derived).abs() <= 1e-12;
                if e.name == "dK/dCdot0" {
                    cdot_negative &= e.derived < 0.0;
                }
            }
            let q = DeviationQuery {
                initial_state: AgentState::new(1.3, 9.0, 10.0),
                initial_velocity: [0.2, -0.1, 0.3],
                t,
            };
            dc_zero &= corrections::path_deviation(&q, &c, p).expect("deviation")[0] == 0.0;
        }
    }
    outcome(
        worst_rel <= 1e-8 && signs_ok && printed_ok && dc_zero && cdot_negative,
        format!(
            "{} parameter sets × 3 horizons: max rel. difference {worst_rel:.2e}, signs {signs_ok}, printed forms {printed_ok}, δC ≡ 0 {dc_zero}, ∂δK/∂Ċ(0) < 0 {cdot_negative}",
            sets.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut p = ModelParams::default();
    let s = phase::solve_trivial(&p).unwrap();
    let c = corrections::zeroth_order_coefficients(&p, &s).unwrap();
    let q = TwoAgentQuery {
        agent1: (
            AgentState::new(1.0, 9.0, 10.0),
            AgentState::new(1.1, 9.5, 10.2),
        ),
        agent2: (
            AgentState::new(0.8, 11.0, 9.0),
            AgentState::new(0.9, 10.5, 9.4),
        ),
        t: 0.7,
    };
    let swapped = TwoAgentQuery {
        agent1: q.agent2,
        agent2: q.agent1,
        t: q.t,
    };
    let a = corrections::two_agent_correction(&q, &c, &p).unwrap();
    let b = corrections::two_agent_correction(&swapped, &c, &p).unwrap();
    let symmetric = a.V_I == b.V_I && a.d21 == b.d12 && a.d12 == b.d21;

    let mut r = q;
    r.agent2 = (
        AgentState::new(0.8, 11.0, 9.0),
        AgentState::new(0.8, 12.0, 9.0),
    );
    let red = corrections::two_agent_correction(&r, &c, &p).unwrap();
    let reduction = red.d21.A == p.gamma * c.c_coef * r.t * 11.5;

    let mut worst: f64 = 0.0;
    for g in [0.1, 0.5, 1.0, 3.0] {
        p.gamma = g;
        let v1 = corrections::two_agent_correction(&q, &c, &p).unwrap().V_I;
        p.gamma = 2.0 * g;
        let v2 = corrections::two_agent_correction(&q, &c, &p).unwrap().V_I;
        worst = worst.max((v2 - 2.0 * v1).abs() / v2.abs());
    }
    outcome(
        symmetric && reduction && worst <= 1e-12,
        format!("swap symmetry {symmetric}, reduction {reduction}, linearity error {worst:.2e}"),
    )
}

fn oracle_regime() -> (ModelParams, PhaseSolution, AgentState) {
    let mut p = ModelParams::default();
    p.A0 = 1.0;
    p.kappa = 0.0;
    p.K_bar = 1.0;
    p.epsilon = 0.3;
    p.delta = 0.35;
    p.r_c = -0.29;
    p.varpi = 1e-5;
    p.C_bar = 0.65 - (2.0 / PI).sqrt() * p.varpi;
    p.nu = 0.1;
    p.lambda_sq = 1e9;
    p.gamma = 0.0;
    let s = phase::solve_trivial(&p).unwrap();
    let x = AgentState::new(s.C_bar_phase, 1.0, s.A_bar_phase);
    (p, s, x)
}

fn criterion_10() -> Outcome {
    let (p, s, x) = oracle_regime();
    let mc_cfg = MCConfig {
        n_paths: 100_000,
        dt: 1e-3,
        seed: 20_240_101,
        ..MCConfig::default()
    };
    let ensemble = mc::sample_paths(x, 0.1, &s, &p, &mc_cfg).expect("ensemble");
    let reference =
        mc::analytic_reference(x, 0.1, &s, &p, Convention::Appendix).expect("reference");
    let report = mc::compare_to_green(&ensemble, &reference).expect("comparison");
    let z_ok = report
        .z_mean
        .iter()
        .chain(&report.z_variance)
        .all(|z| z.abs() <= 4.0);
    let budget = mc::budget_brownian_check(
        &ModelParams::default(),
        10_000,
        &MCConfig {
            n_paths: 10,
            ..mc_cfg
        },
    )
    .expect("budget");
    let budget_ok = (budget.increment_variance - 2.0).abs() <= 0.1;
    let mut ratios = Vec::new();
    for r in [0.0, 0.05] {
        let rep = mc::appendix5_negligibility(
            x,
            10.0,
            r,
            &s,
            &p,
            &MCConfig {
                n_paths: 2000,
                dt: 0.01,
                ..mc_cfg
            },
        )
        .expect("negligibility");
        ratios.push(rep.ratio);
    }
    let ratio_ok = ratios.iter().all(|r| *r < 0.1);
    let zmax = report
        .z_mean
        .iter()
        .chain(&report.z_variance)
        .fold(0.0f64, |m, z| m.max(z.abs()));
    outcome(
        z_ok && budget_ok && ratio_ok,
        format!(
            "max |z| {zmax:.2} (KS p-values {:.3}/{:.3}/{:.3}), increment variance {:.4}, budget ratios {:.2e}/{:.2e}",
            report.ks[0].p_value,
            report.ks[1].p_value,
            report.ks[2].p_value,
            budget.increment_variance,
            ratios[0],
            ratios[1]
        ),
    )
}

/// Every CSV and JSON artifact the suite can produce, as bytes.
fn artifacts(seed: u64) -> Vec<(String, Vec<u8>)> {
    let p = ModelParams::default();
    let mut out = Vec::new();
    let grid = GridSpec::parse("gamma=-0.5:1.5:9").unwrap();
    let rows = io::phase_scan(&p, &grid, Phase::Nontrivial).unwrap();
    let mut csv = Vec::new();
    io::write_scan_csv(&rows, &mut csv).unwrap();
    out.push(("phase_scan.csv".into(), csv));
    out.push((
        "phase_scan.json".into(),
        io::to_json_string(&rows).unwrap().into_bytes(),
    ));
    let t = phase::solve_trivial(&p).unwrap();
    let n = phase::solve_nontrivial(&p).unwrap();
    out.push((
        "phases.json".into(),
        io::to_json_string(&(t.clone(), n)).unwrap().into_bytes(),
    ));
    let from = AgentState::new(t.C_bar_phase + 0.05, p.K_bar, t.A_bar_phase);
    let to = AgentState::new(t.C_bar_phase, p.K_bar + 0.5, t.A_bar_phase);
    let d = green::transition_density(from, to, 0.1, &t, &p, Convention::Appendix).unwrap();
    out.push((
        "transit.json".into(),
        io::to_json_string(&d).unwrap().into_bytes(),
    ));
    let path = green::average_path(from, 0.5, &t, &p, 100).unwrap();
    let mut csv = Vec::new();
    path.write_csv(&mut csv).unwrap();
    out.push(("path.csv".into(), csv));
    let (op, os, ox) = oracle_regime();
    let cfg = MCConfig {
        n_paths: 3000,
        dt: 1e-3,
        seed,
        ..MCConfig::default()
    };
    let ens = mc::sample_paths(ox, 0.05, &os, &op, &cfg).unwrap();
    let mut csv = Vec::new();
    ens.write_csv(&mut csv).unwrap();
    out.push(("ensemble.csv".into(), csv));
    let reference = mc::analytic_reference(ox, 0.05, &os, &op, Convention::Appendix).unwrap();
    let rep = mc::compare_to_green(&ens, &reference).unwrap();
    out.push((
        "mc_report.json".into(),
        io::to_json_string(&rep).unwrap().into_bytes(),
    ));
    let b = mc::budget_brownian_check(&p, 1000, &MCConfig { n_paths: 8, ..cfg }).unwrap();
    out.push((
        "budget.json".into(),
        io::to_json_string(&b).unwrap().into_bytes(),
    ));
    out
}

fn criterion_11() -> Outcome {
    let pool = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    let a = pool(1).install(|| artifacts(7));
    let b = pool(4).install(|| artifacts(7));
    let c = artifacts(8);
    let identical = a == b;
    let differs = a.iter().zip(&c).any(|(x, y)| x.1 != y.1);
    let bytes: usize = a.iter().map(|x| x.1.len()).sum();
    outcome(
        identical && differs,
        format!(
            "{} artifacts ({bytes} bytes) byte-identical across runs with 1 and 4 threads: {identical}; another seed changes them: {differs}",
            a.len()
        ),
    )
}

fn main() {
    let suite_start = Instant::now();
    let (draws, attempts) = feasible_draws(100, 1);
    let draw_time = suite_start.elapsed();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Option<Duration>, Check)> = vec![
        (
            "1 Γ fixed point",
            Some(Duration::from_secs(5)),
            Box::new(|| criterion_1(&draws, attempts)),
        ),
        (
            "2 trivial-phase closed forms",
            None,
            Box::new(|| criterion_2(&draws)),
        ),
        ("3 phase ordering", None, Box::new(|| criterion_3(&draws))),
        (
            "4 covariance agreement",
            Some(Duration::from_secs(10)),
            Box::new(|| criterion_4(&draws)),
        ),
        (
            "5 density normalization",
            Some(Duration::from_secs(30)),
            Box::new(|| criterion_5(&draws)),
        ),
        ("6 most-likely path", None, Box::new(|| criterion_6(&draws))),
        (
            "7 equilibrium saddle",
            None,
            Box::new(|| criterion_7(&draws)),
        ),
        ("8 corrections", None, Box::new(|| criterion_8(&draws))),
        ("9 two-agent correction", None, Box::new(criterion_9)),
        (
            "10 Monte Carlo oracle",
            Some(Duration::from_secs(60)),
            Box::new(criterion_10),
        ),
        ("11 determinism", None, Box::new(criterion_11)),
    ];
    let mut failed = 0;
    for (name, budget, check) in &criteria {
        let start = Instant::now();
        let mut o = check();
        let mut elapsed = start.elapsed();
        if name.starts_with("1 ") {
            elapsed += draw_time;
        }
        if let Some(b) = budget {
            if elapsed > *b {
                o.pass = false;
                o.detail
                    .push_str(&format!("; runtime {elapsed:.2?} exceeds {b:?}"));
            }
        }
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{elapsed:.2?}]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.2?}",
        criteria.len() - failed,
        suite_start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
