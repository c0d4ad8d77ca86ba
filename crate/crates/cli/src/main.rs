//! Command-line front end: validate instances, run the solvers and oracles,
//! apply transforms, evaluate iteration bounds, and generate seeded
//! instance families.
//!
//! Exit codes: 0 ok, 1 invalid instance, 2 usage/parse error, 3 certificate
//! violation, 4 hypothesis violation, 5 enumeration overflow.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polyiter_core::error::Error;
use polyiter_core::game::{self, GameInstance, MaxPolicy, MinPolicy, PayoffMode};
use polyiter_core::generate::{generate, FamilyKind, GeneratorSpec};
use polyiter_core::oracle;
use polyiter_core::perron::{self, HullMode, PerronConfig};
use polyiter_core::policy_iteration::{
    self, bound_report, certify_mean_trace, certify_trace, BoundReport, Provenance, SolveConfig,
};
use polyiter_core::transforms::{self, TransformKind, TransformRecord};

const EXIT_INVALID: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CERTIFICATE: u8 = 3;
const EXIT_HYPOTHESIS: u8 = 4;
const EXIT_OVERFLOW: u8 = 5;

#[derive(Parser)]
#[command(
    name = "polyiter",
    version,
    about = "Policy iteration for zero-sum stochastic games"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check an instance file against every structural invariant.
    Validate { file: PathBuf },
    /// Solve an instance by nested policy iteration.
    Solve {
        file: PathBuf,
        /// Renewal/normalization state (1-based); required for mean payoff.
        #[arg(long)]
        renewal_state: Option<usize>,
        /// "first" or a JSON file {"min": [...], "max": [[...]]} (0-based indices).
        #[arg(long, default_value = "first")]
        start_policy: String,
        /// Write the full iteration trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Run the runtime certificate suite; any violation exits 3.
        #[arg(long)]
        certify: bool,
    },
    /// Print the iteration-bound report for an instance.
    Bound {
        file: PathBuf,
        /// Use this contraction factor directly.
        #[arg(long)]
        lambda: Option<f64>,
        /// Derive the factor from the hull spectral radius.
        #[arg(long)]
        spectral: bool,
        /// Derive the factor from worst-case return times to this state (1-based).
        #[arg(long)]
        return_times: Option<usize>,
    },
    /// Emit a transformed instance plus its sidecar record.
    Transform {
        file: PathBuf,
        /// Scale by the Collatz-Wielandt vector certifying this factor.
        #[arg(long)]
        scale_auto: Option<f64>,
        /// Scale by an explicit phi vector (JSON array file).
        #[arg(long)]
        scale_phi: Option<PathBuf>,
        /// Reduce a mean-payoff instance at this renewal state (1-based).
        #[arg(long)]
        mean: Option<usize>,
        /// Output instance path.
        #[arg(short, long)]
        output: PathBuf,
        /// Sidecar path (defaults to the output path plus ".sidecar.json").
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Brute-force reference answer (same schema as solve, minus policies).
    Oracle {
        file: PathBuf,
        #[arg(long)]
        renewal_state: Option<usize>,
    },
    /// Generate a seeded random instance.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    a_max: usize,
    #[arg(long, default_value_t = 2)]
    b_max: usize,
    #[arg(long)]
    seed: u64,
    /// substochastic | state-discount | renewal-mean
    #[arg(long)]
    family: String,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho_cap: Option<f64>,
    /// Renewal state for renewal-mean (1-based).
    #[arg(long)]
    renewal_state: Option<usize>,
    #[arg(long)]
    p_min: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::CombinatorialOverflow { .. } => EXIT_OVERFLOW,
        Error::NotContracting { .. }
        | Error::NoRenewalState { .. }
        | Error::MultichainDetected
        | Error::RadiusNotDominated { .. }
        | Error::PhiCertificateViolated { .. }
        | Error::Inconclusive { .. } => EXIT_HYPOTHESIS,
        Error::InvalidInstance(_) => EXIT_INVALID,
        _ => EXIT_USAGE,
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(err))
}

fn read_to_string(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::DomainError(format!("{}: {e}", path.display())))
}

fn write_string(path: &Path, content: &str) -> Result<(), Error> {
    std::fs::write(path, content)
        .map_err(|e| Error::DomainError(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<GameInstance, Error> {
    GameInstance::from_json_str(&read_to_string(path)?)
}

fn load_valid_instance(path: &Path) -> Result<GameInstance, Error> {
    let inst = load_instance(path)?;
    let report = inst.validate();
    if !report.is_valid() {
        return Err(Error::InvalidInstance(report.to_string()));
    }
    Ok(inst)
}

fn enum_cap() -> u128 {
    std::env::var("POLYITER_ENUM_CAP")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(game::DEFAULT_ENUM_CAP)
}

/// 1-based user-facing state index to internal 0-based.
fn internal_state(c: usize, n: usize, what: &str) -> Result<usize, Error> {
    if c == 0 || c > n {
        return Err(Error::DomainError(format!("{what} {c} outside 1..={n}")));
    }
    Ok(c - 1)
}

fn parse_start_policy(
    inst: &GameInstance,
    arg: &str,
) -> Result<(Option<MinPolicy>, Option<MaxPolicy>), Error> {
    if arg == "first" {
        return Ok((None, None));
    }
    let text = read_to_string(Path::new(arg))?;
    let parsed: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::DomainError(format!("start policy: {e}")))?;
    let min = match parsed.get("min") {
        Some(v) => Some(MinPolicy(
            serde_json::from_value(v.clone())
                .map_err(|e| Error::DomainError(format!("start policy min: {e}")))?,
        )),
        None => None,
    };
    let max = match parsed.get("max") {
        Some(v) => Some(MaxPolicy(
            serde_json::from_value(v.clone())
                .map_err(|e| Error::DomainError(format!("start policy max: {e}")))?,
        )),
        None => None,
    };
    if let Some(p) = &min {
        if p.0.len() != inst.n || p.0.iter().enumerate().any(|(i, &a)| a >= inst.a_count(i)) {
            return Err(Error::DomainError("start min policy out of range".into()));
        }
    }
    if let Some(p) = &max {
        let ok = p.0.len() == inst.n
            && (0..inst.n).all(|i| {
                p.0[i].len() == inst.a_count(i) && p.0[i].iter().all(|&b| b < inst.b_count(i))
            });
        if !ok {
            return Err(Error::DomainError("start max policy out of range".into()));
        }
    }
    Ok((min, max))
}

/// Contraction factor and provenance for a discounted instance: the row-sum
/// cap when uniformly substochastic, otherwise the hull spectral radius.
fn discounted_lambda(inst: &GameInstance) -> Result<(f64, Provenance), Error> {
    let cap = inst.max_row_sum();
    if cap < 1.0 {
        return Ok((cap.max(1e-15), Provenance::GivenLambda));
    }
    let family = perron::family_from_instance(inst);
    let omega =
        perron::hull_spectral_radius(&family, HullMode::BinarySearch, &PerronConfig::default())?;
    if omega >= 1.0 {
        return Err(Error::NotContracting { max_row_sum: omega });
    }
    Ok((omega, Provenance::SpectralOmega))
}

fn cmd_validate(file: &Path) -> ExitCode {
    let inst = match load_instance(file) {
        Ok(inst) => inst,
        Err(err) => return fail(&err),
    };
    let report = inst.validate();
    println!("{report}");
    if report.is_valid() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INVALID)
    }
}

fn cmd_solve(
    file: &Path,
    renewal_state: Option<usize>,
    start_policy: &str,
    trace_out: Option<&Path>,
    certify: bool,
) -> Result<ExitCode, Error> {
    let inst = load_valid_instance(file)?;
    let (start_min, start_max) = parse_start_policy(&inst, start_policy)?;
    let cfg = SolveConfig {
        start_min,
        start_max,
        ..Default::default()
    };

    match inst.payoff {
        PayoffMode::Discounted => {
            let (lambda, provenance) = discounted_lambda(&inst)?;
            let cfg = SolveConfig {
                force: provenance == Provenance::SpectralOmega,
                ..cfg
            };
            let (value, sigma, delta, trace) = policy_iteration::solve_discounted(&inst, &cfg)?;
            let bound = bound_report(&inst, lambda, provenance, None)?;
            let out = serde_json::json!({
                "value": value,
                "min_policy": sigma,
                "max_policy": delta,
                "outer_iterations": trace.outer_iterations(),
                "bound": bound.k_max,
                "lambda": lambda,
                "provenance": provenance,
            });
            println!("{out}");
            if let Some(path) = trace_out {
                write_string(path, &trace.to_json_string())?;
            }
            if certify {
                let report = certify_trace(&inst, &trace, lambda, &value);
                eprintln!("{report}");
                if !report.passed() {
                    return Ok(ExitCode::from(EXIT_CERTIFICATE));
                }
            }
        }
        PayoffMode::MeanPayoff => {
            let c = match renewal_state {
                Some(c) => internal_state(c, inst.n, "renewal state")?,
                None => {
                    eprintln!("error: --renewal-state is required for mean-payoff instances");
                    return Ok(ExitCode::from(EXIT_USAGE));
                }
            };
            let (pair, sigma, delta, trace) = policy_iteration::solve_mean(&inst, c, &cfg)?;
            let family = perron::family_from_instance(&inst);
            let rt = perron::mean_return_times(&family, c)?;
            let bound = bound_report(
                &inst,
                rt.lambda.max(1e-15),
                Provenance::ReturnTimeK,
                Some(rt.k_max),
            )?;
            let out = serde_json::json!({
                "eta": pair.eta,
                "bias": pair.bias,
                "min_policy": sigma,
                "max_policy": delta,
                "outer_iterations": trace.outer_iterations(),
                "bound": bound.k_max,
                "lambda": rt.lambda,
                "provenance": Provenance::ReturnTimeK,
            });
            println!("{out}");
            if let Some(path) = trace_out {
                write_string(path, &trace.to_json_string())?;
            }
            if certify {
                let (report, _) = certify_mean_trace(&inst, &trace, c)?;
                eprintln!("{report}");
                if !report.passed() {
                    return Ok(ExitCode::from(EXIT_CERTIFICATE));
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bound(
    file: &Path,
    lambda: Option<f64>,
    spectral: bool,
    return_times: Option<usize>,
) -> Result<BoundReport, Error> {
    let inst = load_valid_instance(file)?;
    if let Some(lambda) = lambda {
        return bound_report(&inst, lambda, Provenance::GivenLambda, None);
    }
    if spectral {
        let family = perron::family_from_instance(&inst);
        let omega = perron::hull_spectral_radius(
            &family,
            HullMode::BinarySearch,
            &PerronConfig::default(),
        )?;
        if omega >= 1.0 {
            return Err(Error::NotContracting { max_row_sum: omega });
        }
        return bound_report(&inst, omega, Provenance::SpectralOmega, None);
    }
    if let Some(c) = return_times {
        let c = internal_state(c, inst.n, "renewal state")?;
        let family = perron::family_from_instance(&inst);
        let rt = perron::mean_return_times(&family, c)?;
        return bound_report(
            &inst,
            rt.lambda.max(1e-15),
            Provenance::ReturnTimeK,
            Some(rt.k_max),
        );
    }
    // default: behave like solve's lambda selection
    let (lambda, provenance) = discounted_lambda(&inst)?;
    bound_report(&inst, lambda, provenance, None)
}

fn cmd_transform(
    file: &Path,
    scale_auto: Option<f64>,
    scale_phi: Option<&Path>,
    mean: Option<usize>,
    output: &Path,
    sidecar: Option<&Path>,
) -> Result<(), Error> {
    let inst = load_valid_instance(file)?;
    let picked = [scale_auto.is_some(), scale_phi.is_some(), mean.is_some()]
        .iter()
        .filter(|&&x| x)
        .count();
    if picked != 1 {
        return Err(Error::DomainError(
            "exactly one of --scale-auto, --scale-phi, --mean must be given".into(),
        ));
    }

    let (out, record) = if let Some(lambda) = scale_auto {
        let family = perron::family_from_instance(&inst);
        let omega = perron::hull_spectral_radius(
            &family,
            HullMode::BinarySearch,
            &PerronConfig::default(),
        )?;
        if lambda <= omega {
            return Err(Error::RadiusNotDominated { lambda });
        }
        let phi = perron::collatz_wielandt_vector(&family, lambda, &PerronConfig::default())?;
        let out = transforms::scale_instance(&inst, &phi)?;
        let record = TransformRecord {
            kind: TransformKind::Scaling,
            phi,
            c: None,
            lambda_certified: lambda,
        };
        (out, record)
    } else if let Some(path) = scale_phi {
        let phi: Vec<f64> = serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::DomainError(format!("phi file: {e}")))?;
        if phi.len() != inst.n {
            return Err(Error::DomainError(format!(
                "phi has length {}, expected {}",
                phi.len(),
                inst.n
            )));
        }
        let out = transforms::scale_instance(&inst, &phi)?;
        let lambda = out.max_row_sum();
        let record = TransformRecord {
            kind: TransformKind::Scaling,
            phi,
            c: None,
            lambda_certified: lambda,
        };
        (out, record)
    } else {
        let c = internal_state(mean.unwrap(), inst.n, "renewal state")?;
        if inst.payoff != PayoffMode::MeanPayoff {
            return Err(Error::DomainError(
                "--mean applies to mean-payoff instances".into(),
            ));
        }
        let family = perron::family_from_instance(&inst);
        let rt = perron::mean_return_times(&family, c)?;
        let out = transforms::mean_to_discounted(&inst, c, &rt.phi)?;
        let check = transforms::verify_contraction(&out, rt.lambda);
        if !check.pass {
            return Err(Error::DomainError(format!(
                "reduced instance misses its contraction certificate: worst row sum {}",
                check.worst_sum
            )));
        }
        let record = TransformRecord {
            kind: TransformKind::MeanReduction,
            phi: rt.phi,
            c: Some(c),
            lambda_certified: rt.lambda,
        };
        (out, record)
    };

    write_string(output, &out.to_json_string())?;
    let sidecar_path = match sidecar {
        Some(p) => p.to_path_buf(),
        None => {
            let mut os = output.as_os_str().to_owned();
            os.push(".sidecar.json");
            PathBuf::from(os)
        }
    };
    write_string(&sidecar_path, &record.to_sidecar_string())?;
    println!(
        "wrote {} and {} (lambda = {})",
        output.display(),
        sidecar_path.display(),
        record.lambda_certified
    );
    Ok(())
}

fn cmd_oracle(file: &Path, renewal_state: Option<usize>) -> Result<ExitCode, Error> {
    let inst = load_valid_instance(file)?;
    let cap = enum_cap();
    match inst.payoff {
        PayoffMode::Discounted => {
            let value = oracle::brute_force_discounted(&inst, cap)?;
            println!("{}", serde_json::json!({ "value": value }));
        }
        PayoffMode::MeanPayoff => {
            let c = match renewal_state {
                Some(c) => internal_state(c, inst.n, "renewal state")?,
                None => {
                    eprintln!("error: --renewal-state is required for mean-payoff instances");
                    return Ok(ExitCode::from(EXIT_USAGE));
                }
            };
            let pair = oracle::brute_force_mean(&inst, c, cap)?;
            println!(
                "{}",
                serde_json::json!({ "eta": pair.eta, "bias": pair.bias })
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Error> {
    let family = match args.family.as_str() {
        "substochastic" => FamilyKind::SubstochasticCap {
            lambda: args
                .lambda
                .ok_or_else(|| Error::DomainError("--lambda required for substochastic".into()))?,
        },
        "state-discount" => FamilyKind::StateDependentDiscount {
            rho_cap: args.rho_cap.ok_or_else(|| {
                Error::DomainError("--rho-cap required for state-discount".into())
            })?,
        },
        "renewal-mean" => {
            let c = args.renewal_state.ok_or_else(|| {
                Error::DomainError("--renewal-state required for renewal-mean".into())
            })?;
            let c = internal_state(c, args.n, "renewal state")?;
            let p_min = args
                .p_min
                .ok_or_else(|| Error::DomainError("--p-min required for renewal-mean".into()))?;
            FamilyKind::RenewalMean { c, p_min }
        }
        other => return Err(Error::DomainError(format!("unknown family {other:?}"))),
    };
    let spec = GeneratorSpec {
        n: args.n,
        a_max: args.a_max,
        b_max: args.b_max,
        seed: args.seed,
        family,
    };
    let inst = generate(&spec)?;
    write_string(&args.output, &inst.to_json_string())?;
    println!("wrote {}", args.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Validate { file } => cmd_validate(&file),
        Cmd::Solve {
            file,
            renewal_state,
            start_policy,
            trace,
            certify,
        } => {
            match cmd_solve(
                &file,
                renewal_state,
                &start_policy,
                trace.as_deref(),
                certify,
            ) {
                Ok(code) => code,
                Err(err) => fail(&err),
            }
        }
        Cmd::Bound {
            file,
            lambda,
            spectral,
            return_times,
        } => match cmd_bound(&file, lambda, spectral, return_times) {
            Ok(report) => {
                println!("{}", game::to_json_17(&report));
                ExitCode::SUCCESS
            }
            Err(err) => fail(&err),
        },
        Cmd::Transform {
            file,
            scale_auto,
            scale_phi,
            mean,
            output,
            sidecar,
        } => {
            match cmd_transform(
                &file,
                scale_auto,
                scale_phi.as_deref(),
                mean,
                &output,
                sidecar.as_deref(),
            ) {
                Ok(()) => ExitCode::SUCCESS,
                Err(err) => fail(&err),
            }
        }
        Cmd::Oracle {
            file,
            renewal_state,
        } => match cmd_oracle(&file, renewal_state) {
            Ok(code) => code,
            Err(err) => fail(&err),
        },
        Cmd::Generate(args) => match cmd_generate(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(err) => fail(&err),
        },
    }
}
