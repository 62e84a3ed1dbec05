use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use blurchain::engine::{
    forward_filter, forward_predict, parse_symbols, Budget, ObservationPattern, Target,
};
use blurchain::json::{nullable, to_report_string};
use blurchain::model::{
    binary_symmetric_channel, random_model, validate_kernel, ModelFile, RandomModelSpec,
    ValidationReport,
};
use blurchain::quantities::{
    compute_alpha, compute_gamma, compute_r, compute_rho, quantity_report, Witnessed,
};
use blurchain::simulate::{mc_vs_exact, random_queries, sample_path, McQuery};
use blurchain::verify::{run_suite, BoundCheck};
use blurchain::{Error, Model};

const OK: u8 = 0;
const FAILED: u8 = 1;
const USAGE: u8 = 2;
const OVER_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(
    name = "blurchain",
    version,
    about = "Exact inference and bound checks for coupled pair chains"
)]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest number of cylinders one enumeration query may visit.
    #[arg(long, global = true, default_value_t = Budget::DEFAULT_MAX_CYLINDERS)]
    budget: u128,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and report whether rho < 1 and alpha > 0.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Report rho, alpha, beta, gamma and R with witnesses.
    Quantities {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        j: usize,
        #[arg(long)]
        k: usize,
    },
    /// Run every comparison check up to a depth; exit 1 on any violation.
    Verify {
        #[arg(long, required_unless_present = "corpus", conflicts_with = "corpus")]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        max_depth: usize,
        /// Run over the random corpus models with seeds 0..N instead.
        #[arg(long)]
        corpus: Option<u64>,
    },
    /// Predict X0 and Y0 from an observed Y history such as "0,1,1".
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        history: String,
        /// Use only the last K symbols of the history.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Compare empirical conditionals on a sampled path with exact values.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// One pattern per line, optionally followed by "=> x|y|xy".
        /// Without it, 20 random patterns of depth at most 4 are drawn.
        #[arg(long)]
        patterns: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export a sampled trajectory as "x y" lines.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a model file: a corpus model with --seed, else a binary channel.
    GenModel {
        #[arg(long, conflicts_with_all = ["stay", "flip"])]
        seed: Option<u64>,
        /// Probability that X repeats its previous symbol.
        #[arg(long, default_value_t = 0.7)]
        stay: f64,
        /// Probability that Y differs from X.
        #[arg(long, default_value_t = 0.1)]
        flip: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(USAGE);
        }
    }
    let budget = Budget {
        max_cylinders: cli.budget,
        ..Budget::default()
    };
    match run(&cli, &budget) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Cost { .. } => OVER_BUDGET,
                _ => USAGE,
            })
        }
    }
}

fn run(cli: &Cli, budget: &Budget) -> Result<u8, Error> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Validate { model } => validate(model, budget, out),
        Command::Quantities { model, j, k } => {
            let model = load(model)?;
            emit(&quantity_report(&model, *j, *k, budget)?, out)?;
            Ok(OK)
        }
        Command::Verify {
            model: Some(path),
            max_depth,
            ..
        } => {
            let report = run_suite(&load(path)?, *max_depth, budget)?;
            emit(&report, out)?;
            for c in report.violations() {
                eprintln!("violated: {} {}", c.name, params_str(c));
            }
            Ok(if report.passed { OK } else { FAILED })
        }
        Command::Verify {
            model: None,
            max_depth,
            corpus,
        } => verify_corpus(corpus.unwrap_or(0), *max_depth, budget, out),
        Command::Predict { model, history, k } => predict(model, history, *k, budget, out),
        Command::Simulate {
            model,
            patterns,
            n,
            seed,
        } => {
            let model = load(model)?;
            let queries = match patterns {
                Some(p) => McQuery::parse_many(&std::fs::read_to_string(p)?)?,
                None => random_queries(model.alphabet(), 20, 4, *seed),
            };
            let report = mc_vs_exact(&model, &queries, *n, *seed, budget)?;
            emit(&report, out)?;
            Ok(if report.exceeds { FAILED } else { OK })
        }
        Command::Sample { model, n, seed } => {
            let file = ModelFile::read(model)?;
            let path = sample_path(&Model::new(file.kernel()?)?, *n, *seed)?;
            match out {
                Some(p) => path.export(
                    &file.hash(),
                    std::io::BufWriter::new(std::fs::File::create(p)?),
                )?,
                None => path.export(&file.hash(), std::io::stdout().lock())?,
            }
            Ok(OK)
        }
        Command::GenModel { seed, stay, flip } => {
            let kernel = match seed {
                Some(s) => random_model::<f64>(&RandomModelSpec::corpus(*s))?,
                None => binary_symmetric_channel(*stay, *flip)?,
            };
            write_text(&ModelFile::from_kernel(&kernel).to_json()?, out)?;
            Ok(OK)
        }
    }
}

fn load(path: &Path) -> Result<Model, Error> {
    Model::new(ModelFile::read(path)?.kernel()?)
}

fn write_text(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    write_text(&to_report_string(value)?, out)
}

fn params_str(c: &BoundCheck) -> String {
    match (c.params.j, c.params.k) {
        (Some(j), Some(k)) => format!("j={j} k={k}"),
        (Some(j), None) => format!("j={j}"),
        (None, Some(k)) => format!("k={k}"),
        (None, None) => String::new(),
    }
}

#[derive(Serialize)]
struct Hypothesis {
    holds: bool,
    #[serde(with = "nullable")]
    value: f64,
    witness: Option<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct ValidateReport {
    model_hash: String,
    validation: ValidationReport,
    /// `rho < 1`.
    blurring: Hypothesis,
    /// `alpha > 0`.
    non_nullness: Hypothesis,
}

fn hypothesis(r: Result<Witnessed, Error>, holds: impl Fn(f64) -> bool) -> Hypothesis {
    match r {
        Ok(w) => Hypothesis {
            holds: holds(w.value),
            value: w.value,
            witness: Some(w.witness),
            error: None,
        },
        Err(e) => Hypothesis {
            holds: false,
            value: f64::NAN,
            witness: None,
            error: Some(e.to_string()),
        },
    }
}

fn validate(path: &Path, budget: &Budget, out: Option<&Path>) -> Result<u8, Error> {
    let file = ModelFile::read(path)?;
    let kernel = file.kernel()?;
    let validation = validate_kernel(&kernel);
    for w in &validation.warnings {
        eprintln!("warning: {w}");
    }
    if !validation.is_valid() {
        emit(&validation, out)?;
        eprintln!("error: rows are not probability distributions");
        return Ok(USAGE);
    }
    let (blurring, non_nullness) = match Model::new(kernel) {
        Ok(model) => {
            let witnessed = |e: blurchain::quantities::Extremum<f64>| Witnessed {
                value: e.value,
                witness: e.witness,
            };
            (
                hypothesis(compute_rho(&model, budget).map(witnessed), |v| v < 1.0),
                hypothesis(compute_alpha(&model, budget).map(witnessed), |v| v > 0.0),
            )
        }
        Err(e) => {
            let failed = || hypothesis(Err(Error::Structural(e.to_string())), |_| false);
            (failed(), failed())
        }
    };
    let code = if blurring.holds && non_nullness.holds {
        OK
    } else {
        FAILED
    };
    emit(
        &ValidateReport {
            model_hash: file.hash(),
            validation,
            blurring,
            non_nullness,
        },
        out,
    )?;
    Ok(code)
}

#[derive(Serialize)]
struct PredictReport {
    history: Vec<usize>,
    k: usize,
    history_probability: f64,
    /// `P(X0 = a | Y history)` for each `a`.
    x_given_history: Vec<f64>,
    /// `P(Y0 = a | Y history)` for each `a`.
    y_given_history: Vec<f64>,
    rho: f64,
    alpha: f64,
    #[serde(with = "nullable")]
    r: f64,
    /// Additive bound on `|P(X0 = a | ..) - P(Y0 = a | ..)|`.
    bound: f64,
    /// Multiplicative band on the ratio, when `rho * R < alpha`.
    ratio_band: Option<[f64; 2]>,
}

fn predict(
    path: &Path,
    history: &str,
    k: Option<usize>,
    budget: &Budget,
    out: Option<&Path>,
) -> Result<u8, Error> {
    let model = load(path)?;
    let mut symbols = parse_symbols(history)?;
    if let Some(k) = k {
        symbols.drain(..symbols.len().saturating_sub(k));
    }
    let k = symbols.len();
    let x = forward_filter(&model, &symbols)?;
    let z = forward_predict(&model, &ObservationPattern::y_history(&symbols))?;
    let y = z.marginal(model.alphabet(), Target::Y);
    let rho = compute_rho(&model, budget)?.value;
    let alpha = compute_alpha(&model, budget)?.value;
    let r = compute_gamma(&model, k, k, budget)
        .and_then(|g| compute_r(alpha, rho, g))
        .unwrap_or(f64::NAN);
    let ratio_band = (rho * r < alpha).then(|| {
        let c = rho / (alpha - rho * r);
        [1.0 - c, 1.0 + c]
    });
    emit(
        &PredictReport {
            history: symbols,
            k,
            history_probability: z.event_mass,
            x_given_history: x.probabilities,
            y_given_history: y.probabilities,
            rho,
            alpha,
            r,
            bound: rho,
            ratio_band,
        },
        out,
    )?;
    Ok(OK)
}

#[derive(Serialize)]
struct CorpusEntry {
    seed: u64,
    rho: f64,
    alpha: f64,
    complete: bool,
    passed: bool,
    failures: usize,
    violations: Vec<BoundCheck>,
    errors: Vec<String>,
}

#[derive(Serialize)]
struct CorpusReport {
    models: u64,
    max_depth: usize,
    passed: bool,
    failing_models: usize,
    failures: usize,
    entries: Vec<CorpusEntry>,
}

fn verify_corpus(
    count: u64,
    max_depth: usize,
    budget: &Budget,
    out: Option<&Path>,
) -> Result<u8, Error> {
    let mut entries = Vec::new();
    for seed in 0..count {
        let model = Model::new(random_model(&RandomModelSpec::corpus(seed))?)?;
        let report = run_suite(&model, max_depth, budget)?;
        entries.push(CorpusEntry {
            seed,
            rho: report.rho,
            alpha: report.alpha,
            complete: report.complete,
            passed: report.passed,
            failures: report.failures,
            violations: report.violations().cloned().collect(),
            errors: report.errors,
        });
    }
    let failing_models = entries.iter().filter(|e| !e.passed).count();
    let report = CorpusReport {
        models: count,
        max_depth,
        passed: failing_models == 0,
        failing_models,
        failures: entries.iter().map(|e| e.failures).sum(),
        entries,
    };
    emit(&report, out)?;
    Ok(if report.passed { OK } else { FAILED })
}
