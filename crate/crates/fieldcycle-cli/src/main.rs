//! Command-line front end for the fieldcycle library.
//!
//! Parameters come from an optional `key = value` configuration file and
//! `--set key=value` overrides, applied in that order. Results go to stdout
//! or to `--output` as JSON or CSV with 17 significant digits.
//!
//! Exit codes: 0 success, 2 bad usage or domain error, 3 infeasible phase,
//! 4 numerical failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fieldcycle::corrections::{self, DeviationQuery, Elasticity, TwoAgentQuery};
use fieldcycle::green::{self, Convention};
use fieldcycle::io::{self, GridSpec};
use fieldcycle::mc::{self, KsResult, MCConfig, NoiseConvention};
use fieldcycle::{phase, AgentState, Error, ModelParams, Phase, PhaseSolution};

#[derive(Parser, Debug)]
#[command(
    name = "fieldcycle",
    version,
    about = "Phases, transition densities and path sampling for the agent field model"
)]
struct Cli {
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Use the rational-exponential surrogate for K₁′.
    #[arg(long, global = true)]
    paper_k1_approx: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseArg {
    Operator,
    WeightHalf,
}

#[derive(Args, Debug)]
struct PhaseArg {
    /// Phase index: 0 trivial, 1 non-trivial.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    phase: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve both phases.
    Phases,
    /// Solve one phase over a grid of one parameter.
    PhaseScan {
        /// `key=start:stop:n` or `key=value`.
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        phase: PhaseScanArg,
    },
    /// Transition density between two states.
    Transit {
        #[arg(long, value_parser = parse_state)]
        from: AgentState,
        #[arg(long, value_parser = parse_state)]
        to: AgentState,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        phase: PhaseArg,
        /// Use the main-text normalization instead of the appendix one.
        #[arg(long)]
        maintext_convention: bool,
    },
    /// Average path from an initial state.
    Path {
        #[arg(long, value_parser = parse_state)]
        from: AgentState,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[command(flatten)]
        phase: PhaseArg,
    },
    /// First-order deviations from the average path and their partials.
    Deviations {
        #[arg(long, value_parser = parse_state)]
        x0: AgentState,
        #[arg(long, value_parser = parse_triple)]
        v0: [f64; 3],
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        phase: PhaseArg,
    },
    /// Interaction correction between two agents.
    TwoAgent {
        /// Initial states of agents 1 and 2, in that order.
        #[arg(long, value_parser = parse_state, num_args = 1)]
        from: Vec<AgentState>,
        /// Final states of agents 1 and 2, in that order.
        #[arg(long, value_parser = parse_state, num_args = 1)]
        to: Vec<AgentState>,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        phase: PhaseArg,
    },
    /// Compare a sampled ensemble with the transition density.
    McValidate {
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Initial state; defaults to (C̄ of the phase, K̄, Ā of the phase).
        #[arg(long, value_parser = parse_state)]
        from: Option<AgentState>,
        #[arg(long, value_enum, default_value_t = NoiseArg::Operator)]
        noise: NoiseArg,
        #[arg(long)]
        antithetic: bool,
        /// Also write the ensemble endpoints as CSV to this file.
        #[arg(long)]
        export: Option<PathBuf>,
        #[command(flatten)]
        phase: PhaseArg,
    },
}

#[derive(Args, Debug)]
struct PhaseScanArg {
    /// Phase index: 0 trivial, 1 non-trivial.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    phase: u8,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("bad number {p:?}"))?;
    }
    Ok(out)
}

fn parse_state(s: &str) -> Result<AgentState, String> {
    parse_triple(s).map(AgentState::from_array)
}

/// Failure class of a command, mapped to the process exit code.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Infeasible(_) => 3,
                e if e.is_usage() => 2,
                _ => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    2
}

fn load_params(cli: &Cli) -> anyhow::Result<ModelParams> {
    let mut params = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(Error::from)
                .with_context(|| format!("reading config {}", path.display()))?;
            ModelParams::from_config_str(&text)?
        }
        None => ModelParams::default(),
    };
    for item in &cli.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("--set {item:?}: expected KEY=VALUE")))?;
        params.set(k.trim(), v)?;
    }
    if cli.paper_k1_approx {
        params.paper_k1_approx = true;
    }
    params.validate()?;
    Ok(params)
}

fn solve(params: &ModelParams, index: u8) -> anyhow::Result<PhaseSolution> {
    Ok(phase::solve(params, Phase::from_index(index)?)?)
}

#[derive(Serialize)]
struct PhasesOutput {
    trivial: PhaseSolution,
    nontrivial: PhaseSolution,
}

#[allow(non_snake_case)]
#[derive(Serialize)]
struct DeviationsOutput {
    dC: f64,
    dK: f64,
    dA: f64,
    elasticities: Vec<Elasticity>,
}

#[derive(Serialize)]
struct ZScores {
    mean: [f64; 3],
    variance: [f64; 3],
}

#[derive(Serialize)]
struct McOutput {
    from: AgentState,
    t: f64,
    n: usize,
    dt: f64,
    seed: u64,
    analytic_mean: [f64; 3],
    analytic_variance: [f64; 3],
    sample_mean: [f64; 3],
    sample_variance: [f64; 3],
    zscores: ZScores,
    ks: [KsResult; 3],
    negative_k_paths: usize,
    pass: bool,
}

enum Output {
    Json(String),
    Csv(Vec<u8>),
}

fn require_format(
    requested: Option<Format>,
    allowed: &[Format],
    default: Format,
) -> anyhow::Result<Format> {
    let f = requested.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(Error::Parameter(format!("format {f:?} is not available for this subcommand")).into())
    }
}

fn execute(cli: &Cli) -> anyhow::Result<Output> {
    let params = load_params(cli)?;
    let json_only = |v: &dyn erased::Json| -> anyhow::Result<Output> {
        require_format(cli.format, &[Format::Json], Format::Json)?;
        Ok(Output::Json(v.to_json()?))
    };
    match &cli.command {
        Command::Phases => {
            let out = PhasesOutput {
                trivial: phase::solve_trivial(&params)?,
                nontrivial: phase::solve_nontrivial(&params)?,
            };
            json_only(&out)
        }
        Command::PhaseScan { grid, phase } => {
            let grid = GridSpec::parse(grid)?;
            let rows = io::phase_scan(&params, &grid, Phase::from_index(phase.phase)?)?;
            match require_format(cli.format, &[Format::Csv, Format::Json], Format::Csv)? {
                Format::Csv => {
                    let mut buf = Vec::new();
                    io::write_scan_csv(&rows, &mut buf)?;
                    Ok(Output::Csv(buf))
                }
                Format::Json => Ok(Output::Json(io::to_json_string(&rows)?)),
            }
        }
        Command::Transit {
            from,
            to,
            t,
            phase,
            maintext_convention,
        } => {
            let solution = solve(&params, phase.phase)?;
            let convention = if *maintext_convention {
                Convention::MainText
            } else {
                Convention::Appendix
            };
            let d = green::transition_density(*from, *to, *t, &solution, &params, convention)?;
            json_only(&d)
        }
        Command::Path {
            from,
            t,
            steps,
            phase,
        } => {
            let solution = solve(&params, phase.phase)?;
            let path = green::average_path(*from, *t, &solution, &params, *steps)?;
            match require_format(cli.format, &[Format::Csv, Format::Json], Format::Csv)? {
                Format::Csv => {
                    let mut buf = Vec::new();
                    path.write_csv(&mut buf)?;
                    Ok(Output::Csv(buf))
                }
                Format::Json => Ok(Output::Json(io::to_json_string(&path)?)),
            }
        }
        Command::Deviations { x0, v0, t, phase } => {
            let solution = solve(&params, phase.phase)?;
            let coeffs = corrections::zeroth_order_coefficients(&params, &solution)?;
            let query = DeviationQuery {
                initial_state: *x0,
                initial_velocity: *v0,
                t: *t,
            };
            let d = corrections::path_deviation(&query, &coeffs, &params)?;
            let elasticities = corrections::elasticity_table(*t, &coeffs, &params)?;
            json_only(&DeviationsOutput {
                dC: d[0],
                dK: d[1],
                dA: d[2],
                elasticities,
            })
        }
        Command::TwoAgent { from, to, t, phase } => {
            if from.len() != 2 || to.len() != 2 {
                return Err(Error::Parameter(
                    "two-agent needs exactly two --from and two --to states".into(),
                )
                .into());
            }
            let solution = solve(&params, phase.phase)?;
            let coeffs = corrections::zeroth_order_coefficients(&params, &solution)?;
            let query = TwoAgentQuery {
                agent1: (from[0], to[0]),
                agent2: (from[1], to[1]),
                t: *t,
            };
            json_only(&corrections::two_agent_correction(
                &query, &coeffs, &params,
            )?)
        }
        Command::McValidate {
            t,
            n,
            dt,
            from,
            noise,
            antithetic,
            export,
            phase,
        } => {
            let solution = solve(&params, phase.phase)?;
            let from = from.unwrap_or(AgentState::new(
                solution.C_bar_phase,
                params.K_bar,
                solution.A_bar_phase,
            ));
            let config = MCConfig {
                n_paths: *n,
                dt: *dt,
                seed: cli.seed,
                antithetic: *antithetic,
                noise: match noise {
                    NoiseArg::Operator => NoiseConvention::Operator,
                    NoiseArg::WeightHalf => NoiseConvention::WeightHalf,
                },
                ..MCConfig::default()
            };
            let ensemble = mc::sample_paths(from, *t, &solution, &params, &config)?;
            let reference =
                mc::analytic_reference(from, *t, &solution, &params, Convention::Appendix)?;
            let report = mc::compare_to_green(&ensemble, &reference)?;
            if let Some(path) = export {
                let file = std::fs::File::create(path)
                    .map_err(Error::from)
                    .with_context(|| format!("creating {}", path.display()))?;
                ensemble.write_csv(std::io::BufWriter::new(file))?;
            }
            json_only(&McOutput {
                from,
                t: *t,
                n: *n,
                dt: *dt,
                seed: cli.seed,
                analytic_mean: report.analytic_mean,
                analytic_variance: report.analytic_variance,
                sample_mean: report.sample_mean,
                sample_variance: report.sample_variance,
                zscores: ZScores {
                    mean: report.z_mean,
                    variance: report.z_variance,
                },
                ks: report.ks,
                negative_k_paths: report.negative_k_paths,
                pass: report.pass,
            })
        }
    }
}

mod erased {
    /// Object-safe JSON serialization.
    pub trait Json {
        fn to_json(&self) -> fieldcycle::Result<String>;
    }

    impl<T: serde::Serialize> Json for T {
        fn to_json(&self) -> fieldcycle::Result<String> {
            fieldcycle::io::to_json_string(self)
        }
    }
}

fn emit(cli: &Cli, output: Output) -> anyhow::Result<()> {
    let bytes = match output {
        Output::Json(s) => s.into_bytes(),
        Output::Csv(b) => b,
    };
    match &cli.output {
        Some(path) => std::fs::write(path, bytes)
            .map_err(Error::from)
            .with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli).and_then(|out| emit(&cli, out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::anyhow;

    #[test]
    fn triples_parse() {
        assert_eq!(parse_triple("1, 2,3").unwrap(), [1.0, 2.0, 3.0]);
        assert!(parse_triple("1,2").is_err());
        assert!(parse_triple("1,x,2").is_err());
    }

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&Error::Infeasible("x".into()).into()), 3);
        assert_eq!(exit_code(&Error::Domain("x".into()).into()), 2);
        assert_eq!(exit_code(&Error::Singularity("x".into()).into()), 4);
        let wrapped = anyhow::Error::from(Error::Convergence {
            iterations: 1,
            residual: 1.0,
        })
        .context("solving");
        assert_eq!(exit_code(&wrapped), 4);
        assert_eq!(exit_code(&anyhow!("plain")), 2);
    }
}
