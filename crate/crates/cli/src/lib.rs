//! The `dissipator` command line: argument parsing, config merging,
//! validation and exit codes.
//!
//! Exit codes: 0 success, 1 certificate failure, 2 usage or precondition
//! error, 3 resolution or timeout refusal.

use std::ffi::OsString;
use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use dissipator::bench::{self, fmt_float, ReportFormat, SweepConfig, SweepRequest};
use dissipator::geometry::{self, Order};
use dissipator::semigroup;
use dissipator::spectral::{self, MAX_MODES};
use dissipator::{EvolutionOperator, OperatorDisc, ProfileMode, ProfileSpec, ShearProfile, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

pub const THREADS_ENV: &str = "DISSIPATOR_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dissipator::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                dissipator::Error::Resolution { .. } | dissipator::Error::Timeout { .. } => EXIT_REFUSED,
                _ => EXIT_USAGE,
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "dissipator", version, about = "Resolvent-based decay certificates for shear flows")]
pub struct Cli {
    /// JSON config file with the same keys as the flags (snake_case); flags override it [path]
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads [count]; falls back to DISSIPATOR_THREADS, then the config, then all logical cores
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Write the report here instead of standard output [path]
    #[arg(long, short = 'o', global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Report format [csv|json]; default json for psi, csv otherwise
    #[arg(long, global = true, value_name = "FORMAT")]
    pub format: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coefficients of a lacunary shear profile
    Profile(ProfileCmd),
    /// Window functional ω₀ or ω₁ and its spectral lower bound
    Omega(OmegaCmd),
    /// Ψ₀ and Ψ₁ of the truncated operator for the profile scale·u
    Psi(PsiCmd),
    /// Propagator norms ‖e^(-tR)‖ on a time grid, with the decay bound
    Decay(DecayCmd),
    /// Sweep over viscosities with scaling-law fits
    Sweep(SweepCmd),
    /// Check ‖e^(-tR)‖ ≤ e^(-t·rate+π/2) on a time grid (exit 1 on failure)
    CertifyGp(DecayCmd),
    /// Check ω₁(3^-m·π) ≥ (9π/8000)·3^(-3m)·a_m² (exit 1 on failure)
    CertifyLemma52(LemmaCmd),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Profile(_) => "profile",
            Command::Omega(_) => "omega",
            Command::Psi(_) => "psi",
            Command::Decay(_) => "decay",
            Command::Sweep(_) => "sweep",
            Command::CertifyGp(_) => "certify-gp",
            Command::CertifyLemma52(_) => "certify-lemma52",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProfileArgs {
    /// Coefficient family [power|log|explicit]; default power
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,
    /// Roughness exponent α [dimensionless]: (0,1) for power, (1,2) for log; default 0.5
    #[arg(long, value_name = "ALPHA")]
    pub alpha: Option<f64>,
    /// Number of lacunary terms N [count]; default 4
    #[arg(long, value_name = "N")]
    pub terms: Option<usize>,
    /// Explicit coefficients a₁,a₂,… for frequencies 3,9,… [velocity units, comma-separated]
    #[arg(long, value_name = "A,..", value_delimiter = ',', num_args = 1..)]
    pub coeffs: Option<Vec<f64>>,
    /// Mean velocity c₀ [velocity units]; default 0
    #[arg(long, value_name = "C", allow_negative_numbers = true)]
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileCmd {
    #[command(flatten)]
    pub profile: ProfileArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OmegaCmd {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Window half-width δ [length, radians of y]
    #[arg(long, value_name = "DELTA")]
    pub delta: Option<f64>,
    /// Several half-widths δ [length, comma-separated]; one row each
    #[arg(long, value_name = "D,..", value_delimiter = ',', num_args = 1..)]
    pub delta_grid: Option<Vec<f64>>,
    /// Fit order [0 = constants, 1 = affine]; default 1
    #[arg(long, value_name = "0|1")]
    pub order: Option<u8>,
}

#[derive(Debug, Clone, Args)]
pub struct PsiCmd {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Multiplier applied to the profile, e.g. k/ν [dimensionless]; default 1
    #[arg(long, value_name = "S", allow_negative_numbers = true)]
    pub scale: Option<f64>,
    /// Fourier truncation |m| ≤ M [count]; default 4·3^N, at least 2·3^N
    #[arg(long, value_name = "M")]
    pub modes: Option<usize>,
    /// Compute Ψ₀, Ψ₁ from the truncated operator [flag]; the default
    #[arg(long, conflicts_with = "lower")]
    pub direct: bool,
    /// Report only the window lower bounds over the δ grid [flag]
    #[arg(long)]
    pub lower: bool,
    /// Half-widths δ for --lower [length, comma-separated]; default π·3^(-j/4), j = 0..4(N+1)
    #[arg(long, value_name = "D,..", value_delimiter = ',', num_args = 1..)]
    pub delta_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct DecayCmd {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Viscosity ν [dimensionless, > 0]; default 1e-3
    #[arg(long, value_name = "NU")]
    pub nu: Option<f64>,
    /// Streamwise wavenumber k [integer, ≠ 0]; default 1
    #[arg(long, value_name = "K", allow_negative_numbers = true)]
    pub k: Option<i64>,
    /// Fourier truncation |m| ≤ M [count]; default 4·3^N
    #[arg(long, value_name = "M")]
    pub modes: Option<usize>,
    /// Final time [time units]; default 5·(π/2+1)/rate
    #[arg(long = "tmax", alias = "t-max", value_name = "T")]
    pub t_max: Option<f64>,
    /// Geometric time samples after t = 0 [count]; default 50
    #[arg(long, value_name = "S")]
    pub samples: Option<usize>,
    /// Operator [R = iku − ν∂², L = R + νk²]; default R
    #[arg(long, value_name = "R|L")]
    pub variant: Option<String>,
    /// Norm level defining the dissipation time [dimensionless, (0,1)]; default e^-1
    #[arg(long, value_name = "THR")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepCmd {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Streamwise wavenumber k [integer, ≠ 0]; default 1
    #[arg(long, value_name = "K", allow_negative_numbers = true)]
    pub k: Option<i64>,
    /// Viscosities ν [dimensionless, comma-separated]; default 12 log-spaced in [1e-12,1e-3] (power) or [1e-14,1e-3] (log)
    #[arg(long, value_name = "NU,..", value_delimiter = ',', num_args = 1..)]
    pub nu_grid: Option<Vec<f64>>,
    /// Also compute Ψ₁ directly where the truncation fits [flag]
    #[arg(long)]
    pub direct: bool,
    /// Largest truncation used for direct values [count]; default 4096
    #[arg(long, value_name = "M")]
    pub max_direct_modes: Option<usize>,
    /// δ-grid points per factor of 3 [count]; default 8
    #[arg(long, value_name = "S")]
    pub delta_steps: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct LemmaCmd {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Levels m to check [count, comma-separated]; default 1..min(5,N)
    #[arg(long, value_name = "M,..", value_delimiter = ',', num_args = 1..)]
    pub m: Option<Vec<usize>>,
}

/// Every setting a run can take, as read from a config file or flags.
/// Unset keys fall through to the next source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<String>,
    pub mode: Option<ProfileMode>,
    pub alpha: Option<f64>,
    pub terms: Option<usize>,
    pub coeffs: Option<Vec<f64>>,
    pub mean: Option<f64>,
    pub delta: Option<f64>,
    pub delta_grid: Option<Vec<f64>>,
    pub order: Option<u8>,
    pub nu: Option<f64>,
    pub nu_grid: Option<Vec<f64>>,
    pub k: Option<i64>,
    pub modes: Option<usize>,
    pub scale: Option<f64>,
    pub t_max: Option<f64>,
    pub samples: Option<usize>,
    pub threshold: Option<f64>,
    pub variant: Option<Variant>,
    pub m: Option<Vec<usize>>,
    pub use_direct: Option<bool>,
    pub max_direct_modes: Option<usize>,
    pub delta_steps: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<ReportFormat>,
    pub threads: Option<usize>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        RunConfig { $($f: $hi.$f.or($lo.$f),)* }
    };
}

impl RunConfig {
    /// `self` wins wherever it is set.
    pub fn over(self, lower: RunConfig) -> RunConfig {
        overlay!(
            self, lower, subcommand, mode, alpha, terms, coeffs, mean, delta, delta_grid, order, nu,
            nu_grid, k, modes, scale, t_max, samples, threshold, variant, m, use_direct,
            max_direct_modes, delta_steps, output, format, threads
        )
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

fn parse_mode(s: &Option<String>) -> Result<Option<ProfileMode>> {
    s.as_deref().map(str::parse).transpose().map_err(|e: dissipator::Error| CliError::Usage(e.to_string()))
}

fn profile_flags(p: &ProfileArgs) -> Result<RunConfig> {
    Ok(RunConfig {
        mode: parse_mode(&p.mode)?,
        alpha: p.alpha,
        terms: p.terms,
        coeffs: p.coeffs.clone(),
        mean: p.mean,
        ..RunConfig::default()
    })
}

/// The settings given on the command line.
pub fn flag_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.command {
        Command::Profile(a) => profile_flags(&a.profile)?,
        Command::Omega(a) => RunConfig {
            delta: a.delta,
            delta_grid: a.delta_grid.clone(),
            order: a.order,
            ..profile_flags(&a.profile)?
        },
        Command::Psi(a) => RunConfig {
            scale: a.scale,
            modes: a.modes,
            delta_grid: a.delta_grid.clone(),
            use_direct: if a.lower {
                Some(false)
            } else {
                a.direct.then_some(true)
            },
            ..profile_flags(&a.profile)?
        },
        Command::Decay(a) | Command::CertifyGp(a) => RunConfig {
            nu: a.nu,
            k: a.k,
            modes: a.modes,
            t_max: a.t_max,
            samples: a.samples,
            threshold: a.threshold,
            variant: a
                .variant
                .as_deref()
                .map(str::parse)
                .transpose()
                .map_err(|e: dissipator::Error| CliError::Usage(e.to_string()))?,
            ..profile_flags(&a.profile)?
        },
        Command::Sweep(a) => RunConfig {
            k: a.k,
            nu_grid: a.nu_grid.clone(),
            use_direct: a.direct.then_some(true),
            max_direct_modes: a.max_direct_modes,
            delta_steps: a.delta_steps,
            ..profile_flags(&a.profile)?
        },
        Command::CertifyLemma52(a) => RunConfig {
            m: a.m.clone(),
            ..profile_flags(&a.profile)?
        },
    };
    c.output = cli.output.clone();
    c.format = cli
        .format
        .as_deref()
        .map(str::parse)
        .transpose()
        .map_err(|e: dissipator::Error| CliError::Usage(e.to_string()))?;
    c.threads = cli.threads;
    Ok(c)
}

/// Flags over `DISSIPATOR_THREADS` over the config file; defaults are applied later.
pub fn resolve(cli: &Cli, env: &dyn Fn(&str) -> Option<String>) -> Result<RunConfig> {
    let flags = flag_config(cli)?;
    let file = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &file.subcommand {
        if s != cli.command.name() {
            return usage(format!(
                "config is for subcommand '{s}', not '{}'",
                cli.command.name()
            ));
        }
    }
    let env_threads = match env(THREADS_ENV) {
        Some(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("{THREADS_ENV}='{v}' is not a thread count")))?,
        ),
        None => None,
    };
    let env_cfg = RunConfig {
        threads: env_threads,
        ..RunConfig::default()
    };
    Ok(flags.over(env_cfg).over(file))
}

/// A parsed profile with its defaults applied.
pub fn build_profile(c: &RunConfig) -> Result<ShearProfile> {
    let mode = c.mode.unwrap_or(if c.coeffs.is_some() {
        ProfileMode::Explicit
    } else {
        ProfileMode::Power
    });
    if mode != ProfileMode::Explicit && c.coeffs.is_some() {
        return usage("--coeffs requires --mode explicit");
    }
    let spec = ProfileSpec {
        mode,
        alpha: c.alpha.unwrap_or(if mode == ProfileMode::Log { 1.5 } else { 0.5 }),
        terms: c.terms.unwrap_or(4),
        coeffs: c.coeffs.clone().unwrap_or_default(),
        mean: c.mean.unwrap_or(0.0),
    };
    if mode == ProfileMode::Explicit && spec.coeffs.is_empty() && c.coeffs.is_none() {
        return usage("explicit profiles need --coeffs");
    }
    Ok(spec.build()?)
}

fn check_modes(p: &ShearProfile, given: Option<usize>) -> Result<usize> {
    let required = OperatorDisc::required_modes(p);
    match given {
        Some(m) if m < required.max(1) => usage(format!(
            "--modes {m} is below the required 2·3^N = {required}"
        )),
        Some(m) => Ok(m),
        None => Ok(OperatorDisc::recommended_modes(p)),
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        usage(format!("--{name} must be positive and finite, got {v}"))
    }
}

/// What a subcommand produced.
pub struct Outcome {
    pub body: String,
    pub notes: Vec<String>,
    pub exit: i32,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Outcome {
            body,
            notes: Vec::new(),
            exit: EXIT_OK,
        }
    }
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn run_profile(c: &RunConfig, format: ReportFormat) -> Result<Outcome> {
    let p = build_profile(c)?;
    Ok(Outcome::ok(match format {
        ReportFormat::Csv => {
            let rows: Vec<Vec<String>> = p
                .modes()
                .enumerate()
                .map(|(i, (w, a))| vec![(i + 1).to_string(), fmt_float(w), fmt_float(a)])
                .collect();
            csv(&["n", "frequency", "coefficient"], &rows)
        }
        ReportFormat::Json => json(&serde_json::json!({
            "profile": p.spec(),
            "validate_ratio": p.validate_ratio(),
            "amplitude_bound": p.amplitude_bound(),
        })),
    }))
}

fn run_omega(c: &RunConfig, format: ReportFormat) -> Result<Outcome> {
    let p = build_profile(c)?;
    let order = match c.order.unwrap_or(1) {
        0 => Order::Constant,
        1 => Order::Affine,
        o => return usage(format!("--order must be 0 or 1, got {o}")),
    };
    if order == Order::Constant && p.mean() != 0.0 {
        return usage("--order 0 requires a mean-zero profile");
    }
    let deltas = match (&c.delta_grid, c.delta) {
        (Some(g), _) if !g.is_empty() => g.clone(),
        (_, Some(d)) => vec![d],
        _ => return usage("omega needs --delta or --delta-grid"),
    };
    for &d in &deltas {
        positive("delta", d)?;
    }
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for &d in &deltas {
        let fit = geometry::omega(&p, d, order)?;
        let b = geometry::bound_from_omega(d, fit.value)?;
        rows.push(vec![
            fmt_float(d),
            order.index().to_string(),
            fmt_float(fit.x_star),
            fmt_float(fit.c1),
            fmt_float(fit.c2),
            fmt_float(fit.value),
        ]);
        out.push(serde_json::json!({ "fit": fit, "bound": b }));
    }
    let mut o = Outcome::ok(match format {
        ReportFormat::Csv => csv(
            &["delta", "order", "x_star", "c1", "c2", "value"],
            &rows,
        ),
        ReportFormat::Json => json(&out),
    });
    for &d in deltas.iter().filter(|&&d| !p.resolves(d)) {
        o.notes.push(format!("truncation warning: δ = {} is below the resolution of {} terms", fmt_float(d), p.terms()));
    }
    Ok(o)
}

#[derive(Serialize)]
struct PsiSummary {
    psi0: Option<f64>,
    psi1: f64,
    lambda_star: Option<f64>,
    modes_used: Option<usize>,
    converged: Option<bool>,
    gap: Option<f64>,
    psi1_check: Option<f64>,
    delta_star: Option<f64>,
}

fn run_psi(c: &RunConfig, format: ReportFormat) -> Result<Outcome> {
    let p = build_profile(c)?;
    let scale = c.scale.unwrap_or(1.0);
    if !scale.is_finite() || scale == 0.0 {
        return usage("--scale must be finite and non-zero");
    }
    let summary = if c.use_direct.unwrap_or(true) {
        if c.delta_grid.is_some() {
            return usage("--delta-grid applies only with --lower");
        }
        let modes = check_modes(&p, c.modes)?;
        let d = OperatorDisc::assemble_scaled(&p, scale, modes)?;
        let r = spectral::psi1_direct(&d)?;
        PsiSummary {
            psi0: Some(r.psi0),
            psi1: r.psi1,
            lambda_star: Some(r.lambda_star),
            modes_used: Some(modes),
            converged: Some(r.converged),
            gap: Some(r.gap),
            psi1_check: r.psi1_check,
            delta_star: None,
        }
    } else {
        let grid = match &c.delta_grid {
            Some(g) if !g.is_empty() => g.clone(),
            Some(_) => return usage("--delta-grid is empty"),
            None => (0..=4 * (p.terms() + 1))
                .map(|j| std::f64::consts::PI * 3f64.powf(-(j as f64) / 4.0))
                .collect(),
        };
        for &d in &grid {
            positive("delta-grid", d)?;
        }
        let q = p.scaled(scale);
        let b1 = geometry::best_lower_bound(&q, &grid, Order::Affine)?;
        let b0 = if q.mean() == 0.0 {
            Some(geometry::best_lower_bound(&q, &grid, Order::Constant)?.bound)
        } else {
            None
        };
        PsiSummary {
            psi0: b0,
            psi1: b1.bound,
            lambda_star: None,
            modes_used: None,
            converged: None,
            gap: None,
            psi1_check: None,
            delta_star: Some(b1.delta),
        }
    };
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    let mut o = Outcome::ok(match format {
        ReportFormat::Csv => csv(
            &["psi0", "psi1", "lambda_star", "modes_used", "converged", "gap", "psi1_check", "delta_star"],
            &[vec![
                opt(summary.psi0),
                fmt_float(summary.psi1),
                opt(summary.lambda_star),
                summary.modes_used.map(|m| m.to_string()).unwrap_or_default(),
                summary.converged.map(|b| b.to_string()).unwrap_or_default(),
                opt(summary.gap),
                opt(summary.psi1_check),
                opt(summary.delta_star),
            ]],
        ),
        ReportFormat::Json => json(&summary),
    });
    if summary.converged == Some(false) {
        o.notes.push("Ψ₁ not converged at this truncation; increase --modes".into());
    }
    Ok(o)
}

struct DecaySetup {
    e: EvolutionOperator,
    rate: f64,
    t_max: f64,
    samples: usize,
    modes: usize,
}

fn decay_setup(c: &RunConfig) -> Result<DecaySetup> {
    let p = build_profile(c)?;
    let nu = positive("nu", c.nu.unwrap_or(1e-3))?;
    let k = c.k.unwrap_or(1);
    if k == 0 {
        return usage("--k must be non-zero");
    }
    let samples = c.samples.unwrap_or(50);
    if samples < 2 {
        return usage("--samples must be at least 2");
    }
    if let Some(t) = c.t_max {
        positive("tmax", t)?;
    }
    if let Some(thr) = c.threshold {
        if !(thr > 0.0 && thr < 1.0) {
            return usage(format!("--threshold must lie in (0, 1), got {thr}"));
        }
    }
    let modes = check_modes(&p, c.modes)?;
    if modes > MAX_MODES {
        return Err(dissipator::Error::Resolution {
            reason: "mode count exceeds the supported maximum",
            required: modes,
            given: MAX_MODES,
        }
        .into());
    }
    let e = EvolutionOperator::shear(&p, nu, k, modes, c.variant.unwrap_or(Variant::R))?;
    let rate = e.certificate_rate()?;
    let t_max = match c.t_max {
        Some(t) => t,
        None if rate > 0.0 => 5.0 * (FRAC_PI_2 + 1.0) / rate,
        None => return usage("zero decay rate; pass --tmax"),
    };
    Ok(DecaySetup {
        e,
        rate,
        t_max,
        samples,
        modes,
    })
}

#[derive(Serialize)]
struct DecaySummary {
    tau: f64,
    psi: f64,
    pass: bool,
    margin: f64,
    threshold: f64,
    modes: usize,
    t_max: f64,
}

fn run_decay(c: &RunConfig, format: ReportFormat) -> Result<Outcome> {
    let s = decay_setup(c)?;
    let curve = semigroup::decay_curve(&s.e, s.t_max, s.samples)?;
    let threshold = c.threshold.unwrap_or(semigroup::DEFAULT_THRESHOLD);
    let tau = semigroup::dissipation_time(&s.e, threshold)?;
    let (pass, margin) = semigroup::gp_certificate(&curve);
    let summary = DecaySummary {
        tau,
        psi: curve.psi,
        pass,
        margin,
        threshold,
        modes: s.modes,
        t_max: s.t_max,
    };
    let body = match format {
        ReportFormat::Csv => {
            let rows: Vec<Vec<String>> = (0..curve.times.len())
                .map(|i| {
                    vec![
                        fmt_float(curve.times[i]),
                        fmt_float(curve.norms[i]),
                        fmt_float(curve.gp_bound[i]),
                    ]
                })
                .collect();
            csv(&["t", "norm", "gp_bound"], &rows)
        }
        ReportFormat::Json => json(&serde_json::json!({ "summary": summary, "curve": curve })),
    };
    let mut o = Outcome::ok(body);
    if format == ReportFormat::Csv {
        // Compact JSON: one line.
        o.notes.push(format!("summary {}", serde_json::to_string(&summary).expect("serializable")));
    }
    Ok(o)
}

fn run_certify_gp(c: &RunConfig, format: ReportFormat) -> Result<Outcome> {
    let s = decay_setup(c)?;
    let curve = semigroup::decay_curve(&s.e, s.t_max, s.samples)?;
    let (pass, margin) = semigroup::gp_certificate(&curve);
    let nu = s.e.nu();
    let k = s.e.k();
    let body = match format {
        ReportFormat::Csv => csv(
            &["nu", "k", "modes", "rate", "t_max", "samples", "margin", "pass", "converged"],
            &[vec![
                fmt_float(nu),
                k.to_string(),
                s.modes.to_string(),
                fmt_float(s.rate),
                fmt_float(s.t_max),
                s.samples.to_string(),
                fmt_float(margin),
                pass.to_string(),
                curve.converged.map(|b| b.to_string()).unwrap_or_default(),
            ]],
        ),
        ReportFormat::Json => json(&serde_json::json!({
            "nu": nu,
            "k": k,
            "modes": s.modes,
            "rate": s.rate,
            "t_max": s.t_max,
            "pass": pass,
            "margin": margin,
            "curve": curve,
        })),
    };
    let mut o = Outcome::ok(body);
    if curve.converged == Some(false) {
        o.notes.push("Ψ₁ not converged at this truncation".into());
    }
    if !pass {
        o.notes.push(format!("certificate failed: margin {}", fmt_float(margin)));
        o.exit = EXIT_CERTIFICATE;
    }
    Ok(o)
}

fn default_nu_grid(mode: ProfileMode) -> Vec<f64> {
    let lo = if mode == ProfileMode::Log { -14.0 } else { -12.0 };
    (0..12)
        .map(|i| 10f64.powf(lo + (-3.0 - lo) * i as f64 / 11.0))
        .collect()
}

fn run_sweep(c: &RunConfig, format: ReportFormat) -> Result<Outcome> {
    let mode = c.mode.unwrap_or(ProfileMode::Power);
    if mode == ProfileMode::Explicit {
        return usage("sweep needs --mode power or log");
    }
    let mut config = SweepConfig::default();
    if let Some(m) = c.max_direct_modes {
        config.max_direct_modes = m;
    }
    if let Some(s) = c.delta_steps {
        if s == 0 {
            return usage("--delta-steps must be positive");
        }
        config.delta_steps_per_level = s;
    }
    let req = SweepRequest {
        mode,
        alpha: c.alpha.unwrap_or(if mode == ProfileMode::Log { 1.5 } else { 0.5 }),
        k: c.k.unwrap_or(1),
        nu: c.nu_grid.clone().unwrap_or_else(|| default_nu_grid(mode)),
        use_direct: c.use_direct.unwrap_or(false),
        config,
    };
    let sweep = bench::sweep_detailed(&req)?;
    let report = bench::Report::new(req, sweep)?;
    let mut o = Outcome::ok(bench::render_report(&report, format));
    let predicted = report.derived.predicted_exponent;
    if let Some(f) = &report.fits.lower {
        o.notes.push(format!("lower-bound fit: {}", bench::describe_fit(f, predicted)));
    }
    if let Some(f) = &report.fits.direct {
        o.notes.push(format!("direct fit: {}", bench::describe_fit(f, predicted)));
    }
    Ok(o)
}

fn run_lemma52(c: &RunConfig, format: ReportFormat) -> Result<Outcome> {
    let p = build_profile(c)?;
    let ms = c
        .m
        .clone()
        .unwrap_or_else(|| (1..=p.terms().min(5)).collect());
    for &m in &ms {
        if m == 0 || m > p.terms() {
            return usage(format!("--m {m} must lie in 1..={}", p.terms()));
        }
    }
    let checks = ms
        .iter()
        .map(|&m| geometry::lemma52_certificate(&p, m))
        .collect::<dissipator::Result<Vec<_>>>()?;
    let all = checks.iter().all(|c| c.pass);
    let body = match format {
        ReportFormat::Csv => {
            let rows: Vec<Vec<String>> = checks
                .iter()
                .map(|c| {
                    vec![
                        c.m.to_string(),
                        fmt_float(c.lhs),
                        fmt_float(c.rhs),
                        c.pass.to_string(),
                    ]
                })
                .collect();
            csv(&["m", "lhs", "rhs", "pass"], &rows)
        }
        ReportFormat::Json => json(&checks),
    };
    let mut o = Outcome::ok(body);
    if !all {
        o.exit = EXIT_CERTIFICATE;
        o.notes.push("certificate failed for some m".into());
    }
    Ok(o)
}

fn dispatch(cli: &Cli, c: &RunConfig) -> Result<Outcome> {
    let format = c.format.unwrap_or(match cli.command {
        Command::Psi(_) => ReportFormat::Json,
        _ => ReportFormat::Csv,
    });
    match &cli.command {
        Command::Profile(_) => run_profile(c, format),
        Command::Omega(_) => run_omega(c, format),
        Command::Psi(_) => run_psi(c, format),
        Command::Decay(_) => run_decay(c, format),
        Command::Sweep(_) => run_sweep(c, format),
        Command::CertifyGp(_) => run_certify_gp(c, format),
        Command::CertifyLemma52(_) => run_lemma52(c, format),
    }
}

fn single_line(s: &str) -> String {
    s.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(
    args: I,
    env: &dyn Fn(&str) -> Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                // Bare invocation prints help on the error stream.
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
                    let _ = writeln!(err, "dissipator: {}", first.trim().trim_start_matches("error: "));
                    EXIT_USAGE
                }
            };
        }
    };
    let result = resolve(&cli, env).and_then(|c| {
        let threads = c.threads.unwrap_or(0);
        if threads > 0 {
            dissipator::par::set_threads(threads);
        }
        let outcome = dispatch(&cli, &c)?;
        Ok((c, outcome))
    });
    match result {
        Ok((c, o)) => {
            let written = match &c.output {
                Some(path) => std::fs::write(path, &o.body)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => out.write_all(o.body.as_bytes()).map_err(|e| e.to_string()),
            };
            for n in &o.notes {
                let _ = writeln!(err, "dissipator: {}", single_line(n));
            }
            if let Err(m) = written {
                let _ = writeln!(err, "dissipator: {m}");
                return EXIT_USAGE;
            }
            o.exit
        }
        Err(e) => {
            let _ = writeln!(err, "dissipator: {}", single_line(&e.to_string()));
            e.exit_code()
        }
    }
}
