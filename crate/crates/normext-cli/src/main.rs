//! Command-line driver: instance ingestion, command dispatch, report
//! serialization.
//!
//! Exit codes: 0 = all checks pass (mathematically negative verdicts such
//! as a divergent series are still 0), 1 = parse/validation failure,
//! 2 = oracle disagreement beyond tolerance, 3 = usage error (bad flags,
//! unreadable paths).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use normext::instance::{
    self, canonical_json, to_file, InstanceError, LoadedInstance, ToleranceOverrides,
};
use normext::oracle;
use normext::report::{
    self, checks_csv, instance_digest, series_csv, spectrum_csv, validation_csv, CheckOut,
    Payload, Report, VerifyOut,
};
use normext::schatten::{self, SchattenError};
use normext::spectrum;
use normext::tol::Tolerances;
use normext::{Block, Instance};

const EXIT_OK: u8 = 0;
const EXIT_INVALID: u8 = 1;
const EXIT_ORACLE: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "normext",
    version,
    about = "Spectra, Schatten-series diagnostics and numerical oracles for block-diagonal first-order operators with unitary endpoint coupling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleKind {
    /// Characteristic-equation oracle only.
    Char,
    /// Finite-difference oracle only.
    Fd,
    /// Both oracles.
    Both,
}

#[derive(Args)]
struct CommonArgs {
    /// Instance file (JSON, format version 1).
    instance: PathBuf,
    /// Tolerance override KEY=VALUE; repeatable. Keys: validation,
    /// cluster_rel, residual, oracle_set, char_residual, gram_offdiag,
    /// boundary.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tol: Vec<String>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Measure every block against the normal-extension hypotheses.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Closed-form spectrum of the assembled operator.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Fourier truncation: enumerate |k| <= k_max.
        #[arg(long = "k-max", default_value_t = 16)]
        k_max: u32,
    },
    /// Singular-value series, membership verdict, resolvent diagnostics.
    Schatten {
        #[command(flatten)]
        common: CommonArgs,
        /// Schatten exponent (p >= 1).
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long = "k-max", default_value_t = 16)]
        k_max: u32,
        /// Resolvent probe "re" or "re,im"; must satisfy re < 1.
        #[arg(long, default_value = "0,0")]
        probe: String,
    },
    /// Cross-check the closed form against the oracles.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = OracleKind::Char)]
        oracle: OracleKind,
        /// Grid steps for the finite-difference oracle.
        #[arg(long, default_value_t = 2000)]
        grid: usize,
        #[arg(long = "k-max", default_value_t = 16)]
        k_max: u32,
    },
    /// Bundle of validate + spectrum + schatten + verify (JSON only).
    Report {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long = "k-max", default_value_t = 16)]
        k_max: u32,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value = "0,0")]
        probe: String,
        #[arg(long, value_enum, default_value_t = OracleKind::Char)]
        oracle: OracleKind,
        #[arg(long, default_value_t = 2000)]
        grid: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<InstanceError> for Failure {
    fn from(e: InstanceError) -> Self {
        match &e {
            InstanceError::Io { .. } => Failure::usage(e.to_string()),
            InstanceError::Validation { reports } => {
                let detail = serde_json::to_string_pretty(reports).unwrap_or_default();
                Failure::input(format!("{e}\n{detail}"))
            }
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<spectrum::SpectrumError> for Failure {
    fn from(e: spectrum::SpectrumError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<SchattenError> for Failure {
    fn from(e: SchattenError) -> Self {
        match e {
            SchattenError::ProbeInSpectrum { .. } | SchattenError::BadExponent { .. } => {
                Failure::usage(e.to_string())
            }
            other => Failure::input(other.to_string()),
        }
    }
}

impl From<oracle::OracleError> for Failure {
    fn from(e: oracle::OracleError) -> Self {
        match e {
            oracle::OracleError::BadGrid { .. } | oracle::OracleError::CountTooLarge { .. } => {
                Failure::usage(e.to_string())
            }
            other => Failure::input(other.to_string()),
        }
    }
}

fn parse_tol_overrides(pairs: &[String]) -> Result<ToleranceOverrides, Failure> {
    let mut overrides = ToleranceOverrides::default();
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--tol expects KEY=VALUE, got `{pair}`")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Failure::usage(format!("--tol {key}: `{value}` is not a number")))?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(Failure::usage(format!(
                "--tol {key}: tolerance must be a positive finite number"
            )));
        }
        overrides.set(key, value).map_err(Failure::usage)?;
    }
    Ok(overrides)
}

fn parse_probe(text: &str) -> Result<Complex64, Failure> {
    let mut parts = text.split(',');
    let re: f64 = parts
        .next()
        .unwrap_or("")
        .trim()
        .parse()
        .map_err(|_| Failure::usage(format!("--probe: cannot parse `{text}`")))?;
    let im: f64 = match parts.next() {
        Some(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("--probe: cannot parse `{text}`")))?,
        None => 0.0,
    };
    if parts.next().is_some() {
        return Err(Failure::usage("--probe expects `re` or `re,im`"));
    }
    if re >= 1.0 {
        return Err(Failure::usage(
            "--probe must have real part < 1 to stay off the spectrum",
        ));
    }
    Ok(Complex64::new(re, im))
}

struct LoadedRun {
    loaded: LoadedInstance,
    digest: String,
}

fn load_validated(path: &Path, overrides: &ToleranceOverrides) -> Result<LoadedRun, Failure> {
    let file = instance::read_file(path)?;
    let loaded = instance::realize(&file, Tolerances::from_env(), Some(overrides))?;
    let digest = instance_digest(&canonical_json(&to_file(
        &loaded.instance,
        loaded.growth_model.as_ref(),
    )));
    Ok(LoadedRun { loaded, digest })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write `{}`: {e}", path.display()))),
    }
}

fn finish_report(
    command: String,
    digest: String,
    payload: Payload,
    started: Instant,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let report = Report {
        command,
        instance_digest: digest,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        payload,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    emit(out, &report.to_json())
}

fn cmd_validate(common: &CommonArgs) -> Result<u8, Failure> {
    let started = Instant::now();
    let overrides = parse_tol_overrides(&common.tol)?;
    let file = instance::read_file(&common.instance)?;
    let loaded = instance::load_blocks(&file, Tolerances::from_env(), Some(&overrides))?;
    let reports = instance::validate_all(&loaded);
    let all_valid = reports.iter().all(|r| r.report.is_valid());
    let blocks: Vec<report::BlockValidationOut> = reports
        .into_iter()
        .map(|v| report::BlockValidationOut {
            block: v.block_index,
            report: v.report,
        })
        .collect();

    // The digest hashes the canonical serialization even when validation
    // fails, so failure reports are still attributable.
    let digest = instance_digest(&canonical_json(&file));

    match common.format {
        Format::Csv => emit(common.out.as_deref(), &validation_csv(&blocks))?,
        Format::Json => finish_report(
            "validate".into(),
            digest,
            Payload::Validate { blocks, all_valid },
            started,
            common.out.as_deref(),
        )?,
    }
    Ok(if all_valid { EXIT_OK } else { EXIT_INVALID })
}

fn cmd_spectrum(common: &CommonArgs, k_max: u32) -> Result<u8, Failure> {
    let started = Instant::now();
    let overrides = parse_tol_overrides(&common.tol)?;
    let run = load_validated(&common.instance, &overrides)?;
    let slice = spectrum::operator_spectrum(&run.loaded.instance, k_max, &run.loaded.tolerances)?;
    let payload = report::spectrum_payload(&slice);
    match common.format {
        Format::Csv => emit(common.out.as_deref(), &spectrum_csv(&payload))?,
        Format::Json => finish_report(
            format!("spectrum --k-max {k_max}"),
            run.digest,
            Payload::Spectrum { spectrum: payload },
            started,
            common.out.as_deref(),
        )?,
    }
    Ok(EXIT_OK)
}

fn cmd_schatten(common: &CommonArgs, p: f64, k_max: u32, probe: &str) -> Result<u8, Failure> {
    let started = Instant::now();
    if p < 1.0 {
        return Err(Failure::usage(format!(
            "--p must be at least 1, got {p}"
        )));
    }
    let probe = parse_probe(probe)?;
    let overrides = parse_tol_overrides(&common.tol)?;
    let run = load_validated(&common.instance, &overrides)?;
    let loaded = &run.loaded;
    let tol = &loaded.tolerances;

    let slice = spectrum::operator_spectrum(&loaded.instance, k_max, tol)?;
    let series = schatten::singular_value_series(&slice, p)?;
    let membership =
        schatten::schatten_membership(&loaded.instance, p, k_max, loaded.growth_model.as_ref(), tol)?;
    let resolvent = Some(schatten::discrete_spectrum_check(
        &loaded.instance,
        loaded.growth_model.as_ref(),
        probe,
        tol,
    )?);

    let series_out = report::series_payload(&series);
    match common.format {
        Format::Csv => emit(common.out.as_deref(), &series_csv(&series_out))?,
        Format::Json => finish_report(
            format!("schatten --p {p} --k-max {k_max} --probe {},{}", probe.re, probe.im),
            run.digest,
            Payload::Schatten {
                series: series_out,
                membership,
                resolvent,
            },
            started,
            common.out.as_deref(),
        )?,
    }
    Ok(EXIT_OK)
}

fn run_verify(
    instance: &Instance,
    tol: &Tolerances,
    oracle_kind: OracleKind,
    grid: usize,
    k_max: u32,
) -> Result<VerifyOut, Failure> {
    let mut checks = Vec::new();
    let mut max_set_distance = 0.0f64;
    let with_char = matches!(oracle_kind, OracleKind::Char | OracleKind::Both);
    let with_fd = matches!(oracle_kind, OracleKind::Fd | OracleKind::Both);
    let mut all_records = Vec::new();

    for (idx, block) in instance.blocks().iter().enumerate() {
        let n = idx + 1;
        let modes = normext::extension::simultaneous_eigenbasis(block, tol)
            .map_err(|e| Failure::input(e.to_string()))?;
        let records = spectrum::block_eigenvalues(block, &modes, k_max, n);
        all_records.extend(records.iter().copied());
        let formula: Vec<Complex64> = records.iter().map(|r| r.lambda).collect();

        if with_char {
            // The formula and the oracle enumerate k with opposite sign
            // conventions, so the |k| <= K windows differ by one element at
            // each edge; compare each K-set against the other's (K+1)-set.
            let formula_wide: Vec<Complex64> =
                spectrum::block_eigenvalues(block, &modes, k_max + 1, n)
                    .iter()
                    .map(|r| r.lambda)
                    .collect();
            let char_set = oracle::characteristic_eigenvalues(block, k_max, tol)?;
            let char_wide = oracle::characteristic_eigenvalues(block, k_max + 1, tol)?;
            let d = spectrum::directed_distance(&formula, &char_wide)
                .max(spectrum::directed_distance(&char_set, &formula_wide));
            max_set_distance = max_set_distance.max(d);
            checks.push(CheckOut {
                name: format!("block{n}_char_set_distance"),
                pass: d <= tol.oracle_set,
                value: d,
                threshold: tol.oracle_set,
            });

            let worst_residual = formula
                .iter()
                .map(|&l| oracle::characteristic_residual(block, l))
                .fold(0.0, f64::max);
            checks.push(CheckOut {
                name: format!("block{n}_char_residual"),
                pass: worst_residual <= tol.char_residual,
                value: worst_residual,
                threshold: tol.char_residual,
            });

            let dim = block.dim();
            let u0: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(1.0 / (dim as f64).sqrt(), 0.0))
                .collect();
            let scaled = oracle::boundary_cancellation(block, &u0)
                / block.coeff().op_norm().max(1.0);
            checks.push(CheckOut {
                name: format!("block{n}_boundary_cancellation"),
                pass: scaled <= tol.boundary,
                value: scaled,
                threshold: tol.boundary,
            });

            let gram_records: Vec<_> = records
                .iter()
                .filter(|r| r.fourier_index.unsigned_abs() <= 2)
                .copied()
                .collect();
            let gram = oracle::eigenfunction_gram(block, &gram_records, 4096, tol)?;
            let mut offdiag = 0.0f64;
            for i in 0..gram_records.len() {
                for j in 0..gram_records.len() {
                    if i != j {
                        offdiag = offdiag.max(gram.get(i, j).norm());
                    }
                }
            }
            checks.push(CheckOut {
                name: format!("block{n}_gram_offdiag"),
                pass: offdiag <= tol.gram_offdiag,
                value: offdiag,
                threshold: tol.gram_offdiag,
            });
        }

        if with_fd {
            let count = (3 * block.dim()).min(block.dim() * grid);
            let fd = oracle::fd_eigenvalues(block, grid, count)?;
            let cap = oracle::fd_im_cap(block, grid);
            let matched = oracle::match_eigenvalues(&fd, &formula, cap);
            let worst = matched.iter().map(|(_, _, d)| *d).fold(0.0, f64::max);
            // Trapezoid error scales like h²; anchor the threshold at the
            // N = 2000 acceptance level.
            let threshold = 5e-3 * (2000.0 / grid as f64).powi(2).max(1.0);
            checks.push(CheckOut {
                name: format!("block{n}_fd_match"),
                pass: !matched.is_empty() && worst <= threshold,
                value: worst,
                threshold,
            });
            if !with_char {
                max_set_distance = max_set_distance.max(worst);
            }
        }
    }

    // Structural self-check of the assembled slice: real parts, arithmetic
    // progressions of imaginary parts, injective indexing.
    let slice = spectrum::SpectrumSlice {
        records: all_records,
        m_max: instance.blocks().iter().map(Block::dim).max().unwrap_or(0),
        k_max,
        complete_modes: true,
        block_lengths: instance
            .blocks()
            .iter()
            .map(|b| b.interval().length())
            .collect(),
    };
    let structure = spectrum::verify_normal_spectrum_structure(&slice, 1e-9);
    checks.push(CheckOut {
        name: "spectrum_structure".into(),
        pass: structure.pass,
        value: structure.violations.len() as f64,
        threshold: 0.0,
    });

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyOut {
        checks,
        max_set_distance,
        pass,
    })
}

fn cmd_verify(
    common: &CommonArgs,
    oracle_kind: OracleKind,
    grid: usize,
    k_max: u32,
) -> Result<u8, Failure> {
    let started = Instant::now();
    let overrides = parse_tol_overrides(&common.tol)?;
    let run = load_validated(&common.instance, &overrides)?;
    let verify = run_verify(
        &run.loaded.instance,
        &run.loaded.tolerances,
        oracle_kind,
        grid,
        k_max,
    )?;
    let pass = verify.pass;
    match common.format {
        Format::Csv => emit(common.out.as_deref(), &checks_csv(&verify.checks))?,
        Format::Json => finish_report(
            format!("verify --oracle {} --grid {grid} --k-max {k_max}", oracle_name(oracle_kind)),
            run.digest,
            Payload::Verify { verify },
            started,
            common.out.as_deref(),
        )?,
    }
    Ok(if pass { EXIT_OK } else { EXIT_ORACLE })
}

fn oracle_name(kind: OracleKind) -> &'static str {
    match kind {
        OracleKind::Char => "char",
        OracleKind::Fd => "fd",
        OracleKind::Both => "both",
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_report(
    common: &CommonArgs,
    k_max: u32,
    p: f64,
    probe: &str,
    oracle_kind: OracleKind,
    grid: usize,
) -> Result<u8, Failure> {
    let started = Instant::now();
    if common.format == Format::Csv {
        return Err(Failure::usage(
            "`report` bundles heterogeneous payloads and emits JSON only",
        ));
    }
    if p < 1.0 {
        return Err(Failure::usage(format!("--p must be at least 1, got {p}")));
    }
    let probe = parse_probe(probe)?;
    let overrides = parse_tol_overrides(&common.tol)?;
    let run = load_validated(&common.instance, &overrides)?;
    let loaded = &run.loaded;
    let tol = &loaded.tolerances;

    let file = to_file(&loaded.instance, loaded.growth_model.as_ref());
    let block_reports = instance::validate_all(&instance::load_blocks(
        &file,
        *tol,
        None,
    )?);
    let blocks: Vec<report::BlockValidationOut> = block_reports
        .into_iter()
        .map(|v| report::BlockValidationOut {
            block: v.block_index,
            report: v.report,
        })
        .collect();

    let slice = spectrum::operator_spectrum(&loaded.instance, k_max, tol)?;
    let spectrum_out = report::spectrum_payload(&slice);
    let series = schatten::singular_value_series(&slice, p)?;
    let membership =
        schatten::schatten_membership(&loaded.instance, p, k_max, loaded.growth_model.as_ref(), tol)?;
    let resolvent = Some(schatten::discrete_spectrum_check(
        &loaded.instance,
        loaded.growth_model.as_ref(),
        probe,
        tol,
    )?);
    let verify = run_verify(&loaded.instance, tol, oracle_kind, grid, k_max)?;
    let pass = verify.pass;

    finish_report(
        format!(
            "report --k-max {k_max} --p {p} --probe {},{} --oracle {} --grid {grid}",
            probe.re,
            probe.im,
            oracle_name(oracle_kind)
        ),
        run.digest,
        Payload::Bundle {
            blocks,
            spectrum: spectrum_out,
            series: report::series_payload(&series),
            membership,
            resolvent,
            verify,
        },
        started,
        common.out.as_deref(),
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_ORACLE })
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Validate { common } => cmd_validate(common),
        Command::Spectrum { common, k_max } => cmd_spectrum(common, *k_max),
        Command::Schatten {
            common,
            p,
            k_max,
            probe,
        } => cmd_schatten(common, *p, *k_max, probe),
        Command::Verify {
            common,
            oracle,
            grid,
            k_max,
        } => cmd_verify(common, *oracle, *grid, *k_max),
        Command::Report {
            common,
            k_max,
            p,
            probe,
            oracle,
            grid,
        } => cmd_report(common, *k_max, *p, probe, *oracle, *grid),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
