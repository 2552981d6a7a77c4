use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use realshare::engine::{AlphaChoice, Session, SessionConfig};
use realshare::experiment::{run_grid, ExperimentSpec};
use realshare::privacy_cost::{leakage_breakdown, CostModel, LeakageScenario};
use realshare::sharing::{grid_alphas, reconstruct};
use realshare::solver::{Method, Protocol};
use realshare::Error;

#[derive(Parser)]
#[command(name = "realshare", version, about = "Secure PAC-Bayes linear regression over real-number secret shares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alphas {
    Random,
    Grid,
}

#[derive(Subcommand)]
enum Command {
    /// Run the regression grid over λ, (σ_r², σ_β²) and solver methods.
    Regress {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        parties: usize,
        #[arg(long, default_value_t = 3)]
        threshold: usize,
        /// Repeatable.
        #[arg(long = "lambda", default_values_t = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0])]
        lambdas: Vec<f64>,
        /// Mask variance σ_r²; repeatable, paired with --sigma-beta2.
        #[arg(long = "sigma-r2", default_values_t = [1e4])]
        sigma_r2: Vec<f64>,
        /// Interpolation variance σ_β²; repeatable.
        #[arg(long = "sigma-beta2", default_values_t = [1e5])]
        sigma_beta2: Vec<f64>,
        /// secure-gauss, secure-inverse, insecure-gauss, insecure-inverse; repeatable (default: all).
        #[arg(long = "method")]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0.8)]
        train_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Fit min-max statistics on each repeat's training rows only.
        #[arg(long)]
        normalize_on_train: bool,
        #[arg(long, value_enum, default_value_t = Alphas::Random)]
        alphas: Alphas,
    },
    /// Closed-form opening counts for a d × d system.
    Cost {
        #[arg(long)]
        dim: u64,
        /// inverse or gauss.
        #[arg(long)]
        method: Protocol,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Leakage upper bound in nats.
    Leak {
        #[arg(long, conflicts_with_all = ["dim", "method"])]
        openings: Option<u64>,
        #[arg(long, requires = "method")]
        dim: Option<u64>,
        #[arg(long, requires = "dim")]
        method: Option<Protocol>,
        #[arg(long, default_value_t = 3)]
        threshold: usize,
        /// Comma-separated party evaluation points (default: 0.2·i − 0.1 for t + 2 parties).
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Comma-separated one-based adversary party indices (default: 2..=t+1).
        #[arg(long, value_delimiter = ',')]
        adversary: Option<Vec<usize>>,
        #[arg(long = "sigma-r2", default_value_t = 1e4)]
        sigma_r2: f64,
        #[arg(long = "sigma-beta2", default_value_t = 1e5)]
        sigma_beta2: f64,
        #[arg(long = "sigma-x2", default_value_t = 4.0)]
        sigma_x2: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Share, reconstruct and multiply the numbers read from stdin.
    Demo {
        #[arg(long, default_value_t = 5)]
        parties: usize,
        #[arg(long, default_value_t = 3)]
        threshold: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Data(_) | Error::EmptyDataset => 2,
        Error::NearSingularMask(_)
        | Error::SingularMaskMatrix(_)
        | Error::DegeneratePivot { .. }
        | Error::NotPositiveDefinite
        | Error::NumericalBreakdown(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Regress {
            data,
            parties,
            threshold,
            lambdas,
            sigma_r2,
            sigma_beta2,
            methods,
            repeats,
            train_frac,
            seed,
            out,
            format,
            normalize_on_train,
            alphas,
        } => {
            if sigma_r2.len() != sigma_beta2.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} --sigma-r2 values but {} --sigma-beta2 values",
                    sigma_r2.len(),
                    sigma_beta2.len()
                )));
            }
            let spec = ExperimentSpec {
                data,
                parties,
                threshold,
                lambdas,
                sigmas: sigma_r2.into_iter().zip(sigma_beta2).collect(),
                methods: if methods.is_empty() { Method::ALL.to_vec() } else { methods },
                repeats,
                train_frac,
                seed,
                normalize_on_train,
                alphas: match alphas {
                    Alphas::Random => AlphaChoice::Random,
                    Alphas::Grid => AlphaChoice::Grid,
                },
            };
            let report = run_grid(&spec)?;
            let body = match format {
                Format::Csv => report.to_csv(),
                Format::Json | Format::Text => report.to_json() + "\n",
            };
            emit(out, &body)
        }
        Command::Cost { dim, method, format } => {
            let b = CostModel::new(dim)?.breakdown(method);
            match format {
                Format::Json => println!(
                    "{}",
                    json!({
                        "dim": dim,
                        "method": method.to_string(),
                        "multiplications": b.multiplications,
                        "inversions": b.inversions,
                        "direct_openings": b.direct_openings,
                        "total_openings": b.total_openings,
                    })
                ),
                Format::Csv => {
                    println!("dim,method,multiplications,inversions,direct_openings,total_openings");
                    println!(
                        "{dim},{method},{},{},{},{}",
                        b.multiplications, b.inversions, b.direct_openings, b.total_openings
                    );
                }
                Format::Text => {
                    println!("dim: {dim}");
                    println!("method: {method}");
                    println!("multiplications: {}", b.multiplications);
                    println!("inversions: {}", b.inversions);
                    println!("direct openings: {}", b.direct_openings);
                    println!("total openings: {}", b.total_openings);
                }
            }
            Ok(())
        }
        Command::Leak {
            openings,
            dim,
            method,
            threshold,
            alphas,
            adversary,
            sigma_r2,
            sigma_beta2,
            sigma_x2,
            format,
        } => {
            let openings = match (openings, dim, method) {
                (Some(o), _, _) => o,
                (None, Some(d), Some(m)) => CostModel::new(d)?.total_openings(m),
                _ => return Err(Error::InvalidArgument("give --openings or both --dim and --method".into())),
            };
            let t = threshold;
            if t == 0 {
                return Err(Error::InvalidArgument("threshold must be at least 1".into()));
            }
            let alphas = alphas.unwrap_or_else(|| grid_alphas(t + 2));
            let adversary = adversary.unwrap_or_else(|| (2..=t + 1).collect());
            if adversary.contains(&0) {
                return Err(Error::InvalidArgument("adversary indices are one-based".into()));
            }
            let adversary0: Vec<usize> = adversary.iter().map(|i| i - 1).collect();
            let basis: Vec<usize> = (0..t).collect();
            let scenario =
                LeakageScenario::from_parties(openings, &alphas, &basis, &adversary0, sigma_r2, sigma_beta2, sigma_x2)?;
            let b = leakage_breakdown(&scenario)?;
            match format {
                Format::Json => println!(
                    "{}",
                    json!({
                        "openings": openings,
                        "threshold": t,
                        "alphas": alphas,
                        "basis_nodes": scenario.basis_nodes,
                        "adversary": adversary,
                        "adversary_alphas": scenario.adversary_alphas,
                        "sigma_r2": sigma_r2,
                        "sigma_beta2": sigma_beta2,
                        "sigma_x2": sigma_x2,
                        "sigma_convention": "variances",
                        "gamma": b.gamma,
                        "opening_term": b.opening_term,
                        "share_term": b.share_term,
                        "leakage_nats": b.total,
                    })
                ),
                Format::Csv => {
                    println!("openings,threshold,sigma_r2,sigma_beta2,sigma_x2,gamma,leakage_nats");
                    println!("{openings},{t},{sigma_r2},{sigma_beta2},{sigma_x2},{},{}", b.gamma, b.total);
                }
                Format::Text => {
                    println!("openings: {openings}");
                    println!("threshold: {t}");
                    println!("basis nodes: {:?}", scenario.basis_nodes);
                    println!("adversary: {adversary:?} at {:?}", scenario.adversary_alphas);
                    println!("sigma_r2: {sigma_r2}  sigma_beta2: {sigma_beta2}  sigma_x2: {sigma_x2} (variances)");
                    println!("gamma: {}", b.gamma);
                    println!("leakage bound: {:.4} nats", b.total);
                }
            }
            Ok(())
        }
        Command::Demo { parties, threshold, seed } => demo(parties, threshold, seed),
    }
}

fn emit(out: Option<PathBuf>, body: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(&path, body).map_err(|e| Error::Data(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(body.as_bytes()).map_err(|e| Error::Data(e.to_string())),
    }
}

fn demo(parties: usize, threshold: usize, seed: u64) -> Result<(), Error> {
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).map_err(|e| Error::Data(e.to_string()))?;
    let values = input
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|_| Error::Data(format!("not a number: {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut session = Session::new(&SessionConfig::new(parties, threshold, seed).alphas(AlphaChoice::Grid))?;
    let policy = session.policy().clone();
    println!("parties: {parties}, threshold: {threshold}");
    println!("evaluation points: {:?}", policy.alphas());
    println!("basis parties: {:?}", session.scheme().subset().iter().map(|i| i + 1).collect::<Vec<_>>());
    let first: Vec<usize> = (0..=threshold).collect();
    let mut shared = Vec::new();
    for v in values {
        let s = session.share(v);
        let from_first = reconstruct(&s.pairs(&first), &policy)?;
        println!("secret {v}");
        for (i, share) in s.shares().iter().enumerate() {
            println!("  party {}: {share:.6}", i + 1);
        }
        println!("  reconstructed from parties 1..={}: {from_first:.9}", threshold + 1);
        shared.push((v, s));
    }
    if let [(x, sx), (y, sy), ..] = shared.as_slice() {
        let sum = sx.add(sy)?;
        println!("{x} + {y} = {:.9} (local)", session.open(&sum));
        let prod = session.beaver_multiply(sx, sy)?;
        println!("{x} * {y} = {:.9} (Beaver)", session.open(&prod));
        if *y != 0.0 {
            let inv = session.secure_invert(sy)?;
            let quot = session.beaver_multiply(sx, &inv)?;
            println!("{x} / {y} = {:.9} (masked inversion)", session.open(&quot));
        }
    }
    let l = session.ledger();
    println!(
        "ledger: {} openings, {} multiplications, {} inversions, {} direct openings",
        l.openings, l.multiplications, l.inversions, l.direct_openings
    );
    Ok(())
}
