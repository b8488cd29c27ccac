//! Command-line driver: evaluates the cocycles on explicit inputs and runs
//! the verification suites.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use shintani_core::cyclotomic::set_conductor_cap;
use shintani_core::harness::{
    compare_main, fraction_json, suite_coboundary, suite_cone, suite_equivariance, suite_reciprocity, suite_refinement,
    HarnessError, SignConvention, VerificationReport,
};
use shintani_core::milnor::{dlog_chain, phi_st};
use shintani_core::qlinalg::{int, parse_rational, QMatrix, Rational};
use shintani_core::schwartz::{fourier, TestFunction};
use shintani_core::solomon_hu::{phi_nsh, phi_sh};

#[derive(Parser)]
#[command(name = "shintani", about = "Exact Shintani, Solomon-Hu and Stevens cocycle evaluation and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Total degree through which series are compared or printed.
    #[arg(long, global = true, default_value_t = 8)]
    degree: usize,
    /// Dimension for suites and for shorthand test functions.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Largest cyclotomic conductor allowed in intermediate values.
    #[arg(long, global = true)]
    conductor_cap: Option<u64>,
    /// Emit JSON.
    #[arg(long, global = true, conflicts_with = "text")]
    json: bool,
    /// Emit plain text (the default).
    #[arg(long, global = true)]
    text: bool,
}

#[derive(Args)]
struct Inputs {
    /// Matrices: a JSON list of matrices, or one matrix when n = 1.
    #[arg(short = 'g', long = "gammas")]
    gammas: String,
    /// Test function: JSON (grid, coset sum or single coset) or `chi [a] [d]`.
    #[arg(short = 'f', long = "function")]
    function: String,
}

#[derive(Args)]
struct Trials {
    /// Number of random instances.
    #[arg(long, default_value_t = 10)]
    trials: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Pairing with the open cone on the first columns.
    EvalNsh(Inputs),
    /// Pairing with the perturbed cone function.
    EvalSh(Inputs),
    /// The symbol-valued cochain as a chain of symbols.
    EvalSt(Inputs),
    /// Logarithmic derivative of the symbol-valued cochain.
    EvalStDlog(Inputs),
    /// Fourier transform of a test function.
    Fourier {
        #[arg(short = 'f', long = "function")]
        function: String,
    },
    /// Symbol side against the pairing side on the Fourier image.
    CompareMain {
        #[command(flatten)]
        inputs: Inputs,
        /// Include the factor `sign det(first columns)`.
        #[arg(long)]
        det_twist: bool,
    },
    SuiteEquivariance(Trials),
    SuiteCone,
    SuiteReciprocity(Trials),
    SuiteCoboundary(Trials),
    SuiteRefinement(Trials),
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn entry(v: &Value) -> Result<Rational, CliError> {
    match v {
        Value::Number(k) => k.as_i64().map(int).ok_or_else(|| input(format!("non-integer entry {k}"))),
        Value::String(s) => parse_rational(s).map_err(input),
        _ => Err(input(format!("bad matrix entry {v}"))),
    }
}

fn matrix(v: &Value) -> Result<QMatrix, CliError> {
    let rows = v.as_array().ok_or_else(|| input("matrix must be a list of rows"))?;
    let rows = rows
        .iter()
        .map(|r| r.as_array().ok_or_else(|| input("row must be a list")).and_then(|r| r.iter().map(entry).collect()))
        .collect::<Result<Vec<Vec<Rational>>, _>>()?;
    QMatrix::from_rows(rows).map_err(input)
}

fn parse_gammas(s: &str) -> Result<Vec<QMatrix>, CliError> {
    let v: Value = serde_json::from_str(s).map_err(input)?;
    let is_matrix = v.as_array().and_then(|r| r.first()).and_then(|r| r.as_array()).and_then(|r| r.first()).is_some_and(|x| !x.is_array());
    if is_matrix {
        return Ok(vec![matrix(&v)?]);
    }
    v.as_array().ok_or_else(|| input("expected a list of matrices"))?.iter().map(matrix).collect()
}

/// `chi Z`, `chi a d` or `chi a1,..,an d`, else JSON.
fn parse_function(s: &str, n: Option<usize>) -> Result<TestFunction, CliError> {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("chi") {
        let parts: Vec<&str> = rest.split_whitespace().collect();
        let dim = n.unwrap_or(1);
        let (a, d) = match parts.as_slice() {
            ["Z"] | [] => (vec![int(0); dim], int(1)),
            [a] | [a, _] => {
                let a: Vec<Rational> = a.split(',').map(parse_rational).collect::<Result<_, _>>().map_err(input)?;
                let d = match parts.get(1) {
                    Some(d) => parse_rational(d).map_err(input)?,
                    None => int(1),
                };
                let a = if a.len() == 1 && dim > 1 { vec![a[0].clone(); dim] } else { a };
                (a, d)
            }
            _ => return Err(input("expected `chi Z` or `chi a d`")),
        };
        return TestFunction::chi(&a, &d).map_err(input);
    }
    let mut v: Value = serde_json::from_str(t).map_err(input)?;
    if v.get("base").is_some() {
        v = json!({"terms": [v]});
    }
    TestFunction::from_json(&v).map_err(input)
}

enum Output {
    Report(VerificationReport),
    Value { json: Value, text: String },
}

fn fraction_output(x: &shintani_core::series::FormalFraction) -> Output {
    Output::Value { json: json!({"value": fraction_json(x)}), text: x.to_string() }
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    let c = &cli.common;
    let deg = c.degree;
    let n = c.n.unwrap_or(2);
    let load = |i: &Inputs| -> Result<(Vec<QMatrix>, TestFunction), CliError> {
        let gs = parse_gammas(&i.gammas)?;
        let f = parse_function(&i.function, c.n.or(Some(gs.len())))?;
        if gs.len() != f.dim() {
            return Err(input(format!("{} matrices for a function of dimension {}", gs.len(), f.dim())));
        }
        Ok((gs, f))
    };
    let harness = |e: shintani_core::solomon_hu::PairingError| CliError::Harness(e.into());
    let milnor = |e: shintani_core::milnor::MilnorError| CliError::Harness(e.into());
    Ok(match &cli.command {
        Command::EvalNsh(i) => {
            let (gs, f) = load(i)?;
            fraction_output(&phi_nsh(&gs, &f, deg).map_err(harness)?)
        }
        Command::EvalSh(i) => {
            let (gs, f) = load(i)?;
            fraction_output(&phi_sh(&gs, &f, deg).map_err(harness)?)
        }
        Command::EvalSt(i) => {
            let (gs, f) = load(i)?;
            let chain = phi_st(&gs, &f).map_err(milnor)?.to_json();
            let text = serde_json::to_string_pretty(&chain).expect("json");
            Output::Value { json: json!({"chain": chain}), text }
        }
        Command::EvalStDlog(i) => {
            let (gs, f) = load(i)?;
            let form = dlog_chain(&phi_st(&gs, &f).map_err(milnor)?, f.dim(), deg).map_err(milnor)?;
            let wedge: Vec<String> = (1..=f.dim()).map(|j| format!("dT{j}")).collect();
            let wedge = wedge.join(" ^ ");
            Output::Value {
                json: json!({"coefficient": fraction_json(&form.coeff), "form": wedge}),
                text: format!("({}) {wedge}", form.coeff),
            }
        }
        Command::Fourier { function } => {
            let f = parse_function(function, c.n)?;
            let g = fourier(&f).map_err(|e| CliError::Harness(e.into()))?;
            let text: String = g
                .points()
                .iter()
                .map(|(p, v)| format!("({}) -> {v}\n", p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")))
                .collect();
            Output::Value { json: g.to_json(), text: format!("period {}, support denominator {}\n{text}", g.period(), g.support_denominator()) }
        }
        Command::CompareMain { inputs, det_twist } => {
            let (gs, f) = load(inputs)?;
            let conv = if *det_twist { SignConvention::DetTwisted } else { SignConvention::Literal };
            Output::Report(compare_main(&gs, &f, deg, conv)?)
        }
        Command::SuiteEquivariance(t) => Output::Report(suite_equivariance(c.seed, n, t.trials, deg)),
        Command::SuiteCone => Output::Report(suite_cone(n)),
        Command::SuiteReciprocity(t) => Output::Report(suite_reciprocity(c.seed, n, t.trials, deg)),
        Command::SuiteCoboundary(t) => Output::Report(suite_coboundary(c.seed, n, t.trials, deg)),
        Command::SuiteRefinement(t) => Output::Report(suite_refinement(c.seed, n, t.trials, deg)),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(cap) = cli.common.conductor_cap {
        set_conductor_cap(cap);
    }
    let as_json = cli.common.json;
    match run(&cli) {
        Ok(Output::Report(r)) => {
            if as_json {
                println!("{}", serde_json::to_string_pretty(&r.to_json()).expect("json"));
            } else {
                print!("{}", r.to_text());
            }
            eprintln!("runtime: {:.3} s", r.runtime.as_secs_f64());
            if r.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Ok(Output::Value { json, text }) => {
            if as_json {
                println!("{}", serde_json::to_string_pretty(&json).expect("json"));
            } else {
                println!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
