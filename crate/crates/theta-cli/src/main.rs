use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use theta_selftest::bell::{exclusivity_graph, reference_realization, witness, Realization, ScenarioName};
use theta_selftest::graph::{fractional_packing, independence_number, mobius_ladder, GraphJson, WeightedGraph};
use theta_selftest::selftest::candidates::{padded, perturbed, rotated, seeded_rng, with_ancilla};
use theta_selftest::selftest::{self_test, verify_selftest_claim};
use theta_selftest::theta::{
    chained_dual_certificate, chsh_dual_certificate, dual_nondegenerate, lovasz_theta, numeric_uniqueness,
    verify_dual_certificate, ThetaDualCertificate,
};
use theta_selftest::Error;

const DEFAULT_TOL: f64 = 1e-7;
const TOL_ENV: &str = "THETA_SELFTEST_TOL";

#[derive(Parser)]
#[command(
    name = "theta-selftest",
    version,
    about = "Lovász theta certificates and Bell self-testing"
)]
struct Cli {
    /// Print JSON instead of the human summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// α, θ and α* of a scenario's exclusivity graph or a graph file.
    Theta {
        #[arg(long, conflicts_with = "graph")]
        scenario: Option<ScenarioName>,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Verify the closed-form dual certificate (chsh or chained:N).
    Certify {
        #[arg(long)]
        scenario: ScenarioName,
    },
    /// Dual nondegeneracy test for uniqueness of the theta optimizer.
    Uniqueness {
        #[arg(long, conflicts_with = "graph")]
        scenario: Option<ScenarioName>,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Run the self-testing pipeline on a candidate realization.
    Selftest {
        #[arg(long)]
        scenario: ScenarioName,
        /// Candidate realization JSON; the reference is used when omitted.
        #[arg(long)]
        candidate: Option<PathBuf>,
        /// Verification tolerance (default 1e-7, or THETA_SELFTEST_TOL).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Print a scenario's witness and a reference or derived realization.
    Scenario {
        #[arg(long)]
        name: ScenarioName,
        #[arg(long, value_enum, default_value = "reference")]
        candidate: CandidateKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rotation angle for `perturbed`.
        #[arg(long, default_value_t = 0.05)]
        angle: f64,
    },
    /// Write the witness and exclusivity graph as JSON or Graphviz DOT.
    Export {
        #[arg(long)]
        scenario: ScenarioName,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CandidateKind {
    Reference,
    Rotated,
    Padded,
    Ancilla,
    Perturbed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Input(_) | Error::Dimension(_) => 1,
            Error::Resource(_)
            | Error::NoConvergence { .. }
            | Error::NotPsd(_)
            | Error::CertificateMalformed { .. } => 2,
            Error::Precondition(_) | Error::NotAnOptimizer(_) => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type CmdResult = Result<(Value, String, u8), Failure>;

/// Rounds to six significant digits for display.
fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let r: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    if (1e-4..1e6).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input_error(format!("{} is not valid JSON: {e}", path.display())))
}

fn load_graph(scenario: Option<ScenarioName>, graph: Option<&Path>) -> Result<(WeightedGraph, String), Failure> {
    match (scenario, graph) {
        (Some(s), None) => Ok((exclusivity_graph(&witness(s)?), s.to_string())),
        (None, Some(p)) => {
            let j: GraphJson = serde_json::from_value(read_json(p)?)
                .map_err(|e| input_error(format!("bad graph file {}: {e}", p.display())))?;
            Ok((WeightedGraph::from_json(&j)?, p.display().to_string()))
        }
        _ => Err(input_error("give exactly one of --scenario or --graph")),
    }
}

fn cmd_theta(scenario: Option<ScenarioName>, graph: Option<&Path>) -> CmdResult {
    let (g, input) = load_graph(scenario, graph)?;
    let (alpha, _) = independence_number(&g)?;
    let (theta, _) = lovasz_theta(&g)?;
    let astar = fractional_packing(&g)?;
    let sandwich = alpha <= theta + 1e-6 && theta <= astar + 1e-6;
    let v = json!({
        "input": input,
        "vertices": g.n(),
        "alpha": alpha,
        "theta": theta,
        "alpha_star": astar,
        "sandwich": sandwich,
    });
    let text = format!(
        "input: {input}\nalpha: {}\ntheta: {}\nalpha*: {}\nsandwich: {}\n",
        sig(alpha),
        sig(theta),
        sig(astar),
        if sandwich { "ok" } else { "VIOLATED" }
    );
    Ok((v, text, if sandwich { 0 } else { 2 }))
}

fn closed_form(scenario: ScenarioName) -> Result<(WeightedGraph, ThetaDualCertificate), Failure> {
    match scenario {
        ScenarioName::Chsh => Ok((theta_selftest::graph::circulant(8, &[1, 4])?, chsh_dual_certificate())),
        ScenarioName::Chained(n) => Ok((mobius_ladder(n)?, chained_dual_certificate(n)?)),
        other => Err(input_error(format!(
            "no closed-form certificate for {other}; use chsh or chained:N"
        ))),
    }
}

fn cmd_certify(scenario: ScenarioName) -> CmdResult {
    let (g, cert) = closed_form(scenario)?;
    let min = cert.matrix.min_eigenvalue();
    let bound = verify_dual_certificate(&g, &cert)?;
    let v = json!({
        "scenario": scenario.to_string(),
        "bound": bound,
        "min_eigenvalue": min,
        "verified": true,
        "certificate": cert.to_json(),
    });
    let text = format!(
        "scenario: {scenario}\ncertified bound: {}\nmin eigenvalue: {}\nverified: yes\n",
        sig(bound),
        sig(min)
    );
    Ok((v, text, 0))
}

fn cmd_uniqueness(scenario: Option<ScenarioName>, graph: Option<&Path>) -> CmdResult {
    let (source, verdict) = match scenario.map(closed_form) {
        Some(Ok((g, cert))) => ("closed-form", dual_nondegenerate(&g, &cert.matrix)?),
        _ => {
            let (g, _) = load_graph(scenario, graph)?;
            ("numerical", numeric_uniqueness(&g)?.1)
        }
    };
    let input = scenario.map_or_else(
        || graph.map(|p| p.display().to_string()).unwrap_or_default(),
        |s| s.to_string(),
    );
    let v = json!({
        "input": input,
        "dual": source,
        "nondegenerate": verdict.nondegenerate,
        "nullspace_dim": verdict.nullspace_dim,
        "smallest_singular_value": verdict.residual,
    });
    let text = format!(
        "input: {input}\ndual: {source}\nverdict: {}\nnull-space dimension: {}\n",
        if verdict.nondegenerate {
            "nondegenerate (unique optimizer)"
        } else {
            "degenerate"
        },
        verdict.nullspace_dim
    );
    Ok((v, text, if verdict.nondegenerate { 0 } else { 3 }))
}

fn tolerance(flag: Option<f64>) -> Result<f64, Failure> {
    let tol = match flag {
        Some(t) => t,
        None => match std::env::var(TOL_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| input_error(format!("{TOL_ENV} is not a number: {s:?}")))?,
            Err(_) => DEFAULT_TOL,
        },
    };
    if !(tol > 0.0) {
        return Err(input_error("tolerance must be positive"));
    }
    Ok(tol)
}

fn cmd_selftest(scenario: ScenarioName, candidate: Option<&Path>, tol: Option<f64>) -> CmdResult {
    let tol = tolerance(tol)?;
    let wit = witness(scenario)?;
    let reference = reference_realization(scenario)?;
    let cand = match candidate {
        Some(p) => Realization::from_json(&read_json(p)?)?,
        None => reference.clone(),
    };
    let report = self_test(&wit, &reference, &cand)?;
    let verified = verify_selftest_claim(&reference, &cand, &wit, &report, tol);
    let v = json!({
        "scenario": scenario.to_string(),
        "tolerance": tol,
        "verified": verified,
        "report": report.to_json(),
    });
    let mut text = format!(
        "scenario: {scenario}\npipeline: {}\njunk dimensions: {:?}\nstate residual: {}\nmax event residual: {}\n",
        report.pipeline,
        report.junk_dims,
        sig(report.state_residual),
        sig(report.max_vector_residual())
    );
    for (x, v) in report.isometries.iter().enumerate() {
        text.push_str(&format!("party {x}: isometry {}x{}\n", v.nrows(), v.ncols()));
    }
    text.push_str(&format!(
        "verified at tol {}: {}\n",
        sig(tol),
        if verified { "yes" } else { "no" }
    ));
    Ok((v, text, if verified { 0 } else { 3 }))
}

fn cmd_scenario(name: ScenarioName, kind: CandidateKind, seed: u64, angle: f64) -> CmdResult {
    let wit = witness(name)?;
    let r = reference_realization(name)?;
    let mut rng = seeded_rng(seed);
    let real = match kind {
        CandidateKind::Reference => r,
        CandidateKind::Rotated => rotated(&r, &mut rng)?.0,
        CandidateKind::Padded => {
            let dims: Vec<usize> = r.dims().iter().map(|d| d + 1).collect();
            padded(&r, &dims, &mut rng)?.0
        }
        CandidateKind::Ancilla => {
            let k = vec![2; r.parties.len()];
            let n = 1usize << r.parties.len();
            let mut junk = nalgebra::DVector::zeros(n);
            junk[0] = 0.6;
            junk[n - 1] = 0.8;
            with_ancilla(&r, &k, &junk)?
        }
        CandidateKind::Perturbed => perturbed(&r, 0, 1, angle)?,
    };
    let v = json!({
        "scenario": name.to_string(),
        "witness": wit.to_json(),
        "realization": real.to_json(),
    });
    let text = serde_json::to_string_pretty(&v).expect("json serializes") + "\n";
    Ok((v, text, 0))
}

fn cmd_export(scenario: ScenarioName, format: Format, output: Option<&Path>) -> CmdResult {
    let wit = witness(scenario)?;
    let g = exclusivity_graph(&wit);
    let body = match format {
        Format::Json => {
            let v = json!({
                "scenario": scenario.to_string(),
                "witness": wit.to_json(),
                "graph": g.to_json(),
            });
            serde_json::to_string_pretty(&v).expect("json serializes") + "\n"
        }
        Format::Dot => g.to_dot(&format!("\"{scenario}\"")),
    };
    match output {
        Some(p) => {
            std::fs::write(p, &body).map_err(|e| input_error(format!("cannot write {}: {e}", p.display())))?;
            let v =
                json!({ "scenario": scenario.to_string(), "written": p.display().to_string(), "bytes": body.len() });
            Ok((v, format!("wrote {} bytes to {}\n", body.len(), p.display()), 0))
        }
        None => {
            let v = match format {
                Format::Json => serde_json::from_str(&body).expect("own output parses"),
                Format::Dot => Value::String(body.clone()),
            };
            Ok((v, body, 0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Theta { scenario, graph } => cmd_theta(*scenario, graph.as_deref()),
        Command::Certify { scenario } => cmd_certify(*scenario),
        Command::Uniqueness { scenario, graph } => cmd_uniqueness(*scenario, graph.as_deref()),
        Command::Selftest {
            scenario,
            candidate,
            tol,
        } => cmd_selftest(*scenario, candidate.as_deref(), *tol),
        Command::Scenario {
            name,
            candidate,
            seed,
            angle,
        } => cmd_scenario(*name, *candidate, *seed, *angle),
        Command::Export {
            scenario,
            format,
            output,
        } => cmd_export(*scenario, *format, output.as_deref()),
    };
    match result {
        Ok((v, text, code)) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&v).expect("json serializes"));
            } else {
                print!("{text}");
            }
            ExitCode::from(code)
        }
        Err(f) => {
            if cli.json {
                println!("{}", json!({ "error": f.message, "exit_code": f.code }));
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
