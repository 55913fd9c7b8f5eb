//! Parameter sweeps over ν for a fixed shear, scaling-law fits and reports.
//!
//! Every record rescales the profile to `(k/ν)·u`. Window functionals are
//! homogeneous of degree two, so ω₁ is computed once for `u` and multiplied
//! by `(k/ν)²`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Order, LEMMA52_CONSTANT};
use crate::par;
use crate::profile::{ProfileMode, ShearProfile};
use crate::spectral::{self, OperatorDisc, MAX_MODES};

/// Column order of the CSV report.
pub const CSV_COLUMNS: [&str; 13] = [
    "nu",
    "k",
    "alpha",
    "mode",
    "delta_star",
    "omega1",
    "psi1_lower",
    "psi1_direct",
    "rate_lower",
    "rate_direct",
    "lambda_tilde",
    "ratio",
    "converged",
];

pub const SCHEMA_ID: &str = "sweep.v1";

/// Tuning knobs of a sweep that are not part of the physical problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// δ-grid points per factor of 3; the grid is `δ_nom·3^{j/steps}`.
    pub delta_steps_per_level: usize,
    /// Grid points below `δ_nom`; the grid runs upward to π.
    pub delta_steps_below: usize,
    /// Truncation for `psi1_direct`; `None` picks `4·3^N`.
    pub direct_modes: Option<usize>,
    /// Records needing more modes than this skip `psi1_direct`.
    pub max_direct_modes: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            delta_steps_per_level: 8,
            delta_steps_below: 4,
            direct_modes: None,
            max_direct_modes: MAX_MODES,
        }
    }
}

/// A full sweep request: shear family, wavenumber and ν values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    pub mode: ProfileMode,
    pub alpha: f64,
    pub k: i64,
    pub nu: Vec<f64>,
    #[serde(default)]
    pub use_direct: bool,
    #[serde(default)]
    pub config: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub nu: f64,
    pub k: i64,
    pub alpha: f64,
    pub mode: ProfileMode,
    pub delta_star: f64,
    /// ω₁(δ*, ku/ν).
    pub omega1: f64,
    pub psi1_lower: f64,
    pub psi1_direct: Option<f64>,
    pub rate_lower: f64,
    pub rate_direct: Option<f64>,
    pub lambda_tilde: f64,
    pub ratio: f64,
    /// Truncation check of `psi1_direct`; absent without a direct value.
    pub converged: Option<bool>,
}

/// Per-record quantities that are reported in JSON only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDiagnostics {
    pub nu: f64,
    pub delta_nominal: f64,
    /// ω₁(δ_nom, ku/ν).
    pub omega1_nominal: f64,
    /// δ_nom·ω₁(δ_nom, ku/ν).
    pub c1_effective: f64,
    /// Lower bound on Ψ₁ at δ_nom alone.
    pub psi1_nominal: f64,
    pub terms: usize,
    pub delta_grid_points: usize,
    pub direct_modes: Option<usize>,
    pub direct_gap: Option<f64>,
    /// Why `psi1_direct` is absent, when it was requested.
    pub direct_skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub records: Vec<SweepRecord>,
    pub diagnostics: Vec<SweepDiagnostics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Argument(format!(
                "unknown report format '{other}' (expected csv|json)"
            ))),
        }
    }
}

/// The predicted rate λ̃ for this family.
pub fn lambda_tilde(mode: ProfileMode, alpha: f64, nu: f64, k: i64) -> Result<f64> {
    let k = k.unsigned_abs() as f64;
    match mode {
        ProfileMode::Power => Ok(nu.powf(alpha / (alpha + 2.0)) * k.powf(2.0 / (alpha + 2.0))),
        ProfileMode::Log => Ok(k * (k / nu).ln().powf(-alpha)),
        ProfileMode::Explicit => Err(Error::Argument(
            "sweeps need a power or log profile".into(),
        )),
    }
}

/// The window half-width balancing ω₁ against the heat scale.
pub fn nominal_delta(mode: ProfileMode, alpha: f64, nu: f64, k: i64) -> Result<f64> {
    let r = nu / k.unsigned_abs() as f64;
    match mode {
        ProfileMode::Power => Ok(r.powf(1.0 / (alpha + 2.0))),
        ProfileMode::Log => Ok(r.sqrt() * (1.0 / r).ln().powf(alpha / 2.0)),
        ProfileMode::Explicit => Err(Error::Argument(
            "sweeps need a power or log profile".into(),
        )),
    }
}

/// `δ_nom·3^{j/s}` for `j ≥ -below`, stopping at π.
pub fn delta_grid(delta_nominal: f64, config: &SweepConfig) -> Vec<f64> {
    let s = config.delta_steps_per_level.max(1) as f64;
    let mut out = Vec::new();
    let mut j = -(config.delta_steps_below as i64);
    loop {
        let d = delta_nominal * 3f64.powf(j as f64 / s);
        if d > std::f64::consts::PI {
            break;
        }
        out.push(d);
        j += 1;
    }
    if out.is_empty() {
        out.push(delta_nominal.min(std::f64::consts::PI));
    }
    out
}

fn validate(req: &SweepRequest) -> Result<()> {
    if req.nu.is_empty() {
        return Err(Error::Argument("nu list is empty".into()));
    }
    if req.k == 0 {
        return Err(Error::Argument("k must be nonzero".into()));
    }
    if req.mode == ProfileMode::Explicit {
        return Err(Error::Argument("sweeps need a power or log profile".into()));
    }
    // Validates α for the family.
    ShearProfile::from_mode(req.mode, req.alpha, 1)?;
    let k = req.k.unsigned_abs() as f64;
    for &nu in &req.nu {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::domain("nu", nu, "(0, ∞)"));
        }
        if nu / k > 0.5 {
            return Err(Error::Argument(format!(
                "nu/|k| = {} exceeds 1/2",
                nu / k
            )));
        }
    }
    if req.config.delta_steps_per_level == 0 {
        return Err(Error::Argument("delta_steps_per_level must be positive".into()));
    }
    Ok(())
}

/// Records only; see [`sweep_detailed`].
pub fn sweep(req: &SweepRequest) -> Result<Vec<SweepRecord>> {
    Ok(sweep_detailed(req)?.records)
}

/// Runs the sweep, one record per ν in input order.
pub fn sweep_detailed(req: &SweepRequest) -> Result<Sweep> {
    validate(req)?;
    let rows = par::map_indices(req.nu.len(), |i| record(req, req.nu[i]));
    let mut records = Vec::with_capacity(rows.len());
    let mut diagnostics = Vec::with_capacity(rows.len());
    for row in rows {
        let (r, d) = row?;
        records.push(r);
        diagnostics.push(d);
    }
    Ok(Sweep {
        records,
        diagnostics,
    })
}

fn record(req: &SweepRequest, nu: f64) -> Result<(SweepRecord, SweepDiagnostics)> {
    let (mode, alpha, k) = (req.mode, req.alpha, req.k);
    let dp = nominal_delta(mode, alpha, nu, k)?;
    let grid = delta_grid(dp, &req.config);
    let terms = ShearProfile::terms_required(grid[0]);
    let p = ShearProfile::from_mode(mode, alpha, terms)?;
    let scale = k as f64 / nu;
    let s2 = scale * scale;

    let fits = par::map_indices(grid.len(), |i| geometry::omega(&p, grid[i], Order::Affine));
    let mut best: Option<geometry::PhiBound> = None;
    let mut nominal: Option<geometry::PhiBound> = None;
    let nominal_index = req.config.delta_steps_below.min(grid.len() - 1);
    for (i, fit) in fits.into_iter().enumerate() {
        let fit = fit?;
        let b = geometry::bound_from_omega(grid[i], fit.value * s2)?;
        if i == nominal_index {
            nominal = Some(b);
        }
        if best.is_none_or(|cur| b.bound > cur.bound) {
            best = Some(b);
        }
    }
    let best = best.expect("grid is non-empty");
    let nominal = nominal.expect("nominal δ is on the grid");

    let mut diag = SweepDiagnostics {
        nu,
        delta_nominal: dp,
        omega1_nominal: nominal.omega,
        c1_effective: nominal.phi_arg,
        psi1_nominal: nominal.bound,
        terms,
        delta_grid_points: grid.len(),
        direct_modes: None,
        direct_gap: None,
        direct_skipped: None,
    };

    let (mut psi1_direct, mut converged) = (None, None);
    if req.use_direct {
        let modes = req
            .config
            .direct_modes
            .unwrap_or_else(|| OperatorDisc::recommended_modes(&p));
        let required = OperatorDisc::required_modes(&p);
        if modes > req.config.max_direct_modes.min(MAX_MODES) {
            diag.direct_skipped = Some(format!(
                "needs {modes} modes, limit is {}",
                req.config.max_direct_modes.min(MAX_MODES)
            ));
        } else if modes < required {
            diag.direct_skipped = Some(format!("{modes} modes is below the required {required}"));
        } else {
            match OperatorDisc::assemble_scaled(&p, scale, modes).and_then(|d| spectral::psi1_direct(&d)) {
                Ok(res) => {
                    psi1_direct = Some(res.psi1);
                    converged = Some(res.converged);
                    diag.direct_modes = Some(modes);
                    diag.direct_gap = Some(res.gap);
                }
                Err(e @ Error::Resolution { .. }) => diag.direct_skipped = Some(e.to_string()),
                Err(e) => return Err(e),
            }
        }
    }

    let lt = lambda_tilde(mode, alpha, nu, k)?;
    let rate_lower = nu * best.bound;
    Ok((
        SweepRecord {
            nu,
            k,
            alpha,
            mode,
            delta_star: best.delta,
            omega1: best.omega,
            psi1_lower: best.bound,
            psi1_direct,
            rate_lower,
            rate_direct: psi1_direct.map(|p| nu * p),
            lambda_tilde: lt,
            ratio: rate_lower / lt,
            converged,
        },
        diag,
    ))
}

/// Least-squares line through `(x, y)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::Fit("x and y lengths differ".into()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {n}")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 1e-24 * (1.0 + mx * mx) * nf) {
        return Err(Error::Fit("degenerate spread in the abscissa".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        exponent: slope,
        intercept: my - slope * mx,
        r_squared,
        n_points: n,
    })
}

fn check_family(records: &[SweepRecord], mode: ProfileMode) -> Result<()> {
    let first = records
        .first()
        .ok_or_else(|| Error::Fit("no records".into()))?;
    for r in records {
        if r.mode != mode {
            return Err(Error::Fit(format!("expected {} records", mode.as_str())));
        }
        if r.k != first.k || r.alpha != first.alpha {
            return Err(Error::Fit("records mix k or alpha".into()));
        }
    }
    Ok(())
}

/// Slope of `ln rate` against `ln ν` for power-mode records.
pub fn fit_power(records: &[SweepRecord]) -> Result<FitResult> {
    fit_power_by(records, |r| Some(r.rate_lower))
}

/// Slope of `ln(rate/|k|)` against `ln ln(|k|/ν)` for log-mode records.
pub fn fit_log(records: &[SweepRecord]) -> Result<FitResult> {
    fit_log_by(records, |r| Some(r.rate_lower))
}

/// [`fit_power`] on a chosen rate; records where `rate` is `None` are skipped.
pub fn fit_power_by(
    records: &[SweepRecord],
    rate: impl Fn(&SweepRecord) -> Option<f64>,
) -> Result<FitResult> {
    check_family(records, ProfileMode::Power)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| rate(r).map(|v| (r.nu.ln(), v.ln())))
        .unzip();
    fit_line(&xs, &ys)
}

/// [`fit_log`] on a chosen rate; records where `rate` is `None` are skipped.
pub fn fit_log_by(
    records: &[SweepRecord],
    rate: impl Fn(&SweepRecord) -> Option<f64>,
) -> Result<FitResult> {
    check_family(records, ProfileMode::Log)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| {
            let k = r.k.unsigned_abs() as f64;
            rate(r).map(|v| ((k / r.nu).ln().ln(), (v / k).ln()))
        })
        .unzip();
    fit_line(&xs, &ys)
}

/// The scaling-law fit appropriate for the records' mode.
pub fn fit_records(
    records: &[SweepRecord],
    rate: impl Fn(&SweepRecord) -> Option<f64>,
) -> Result<FitResult> {
    match records.first().map(|r| r.mode) {
        Some(ProfileMode::Log) => fit_log_by(records, rate),
        Some(_) => fit_power_by(records, rate),
        None => Err(Error::Fit("no records".into())),
    }
}

/// The exponent λ̃ predicts for [`fit_records`].
pub fn predicted_exponent(mode: ProfileMode, alpha: f64) -> f64 {
    match mode {
        ProfileMode::Log => -alpha,
        _ => alpha / (alpha + 2.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// Constants that enter the bounds but are derived rather than chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// min over records of δ_nom·ω₁(δ_nom, ku/ν).
    pub c1_effective: Option<f64>,
    /// `(φ⁻¹(c1_effective))²`, the guaranteed floor of `ratio`.
    pub epsilon: Option<f64>,
    pub predicted_exponent: f64,
    pub lemma52_constant: f64,
    pub lambda_tilde: String,
    pub delta_nominal: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fits {
    pub lower: Option<FitResult>,
    pub direct: Option<FitResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub tool: ToolInfo,
    pub request: SweepRequest,
    pub derived: DerivedConstants,
    pub fits: Fits,
    pub records: Vec<SweepRecord>,
    pub diagnostics: Vec<SweepDiagnostics>,
}

impl Report {
    /// Assembles a report; fits that cannot be formed (too few points) are omitted.
    pub fn new(request: SweepRequest, sweep: Sweep) -> Result<Self> {
        let c1 = sweep
            .diagnostics
            .iter()
            .map(|d| d.c1_effective)
            .min_by(f64::total_cmp);
        let epsilon = c1.map(|c| geometry::phi_inv(c).map(|x| x * x)).transpose()?;
        let (lt, dp) = match request.mode {
            ProfileMode::Log => ("|k|·ln(|k|/ν)^(-α)", "(ν/|k|)^(1/2)·ln(|k|/ν)^(α/2)"),
            _ => ("ν^(α/(α+2))·|k|^(2/(α+2))", "(ν/|k|)^(1/(α+2))"),
        };
        let fits = Fits {
            lower: fit_records(&sweep.records, |r| Some(r.rate_lower)).ok(),
            direct: fit_records(&sweep.records, |r| r.rate_direct).ok(),
        };
        Ok(Report {
            schema: SCHEMA_ID.into(),
            tool: ToolInfo::default(),
            derived: DerivedConstants {
                c1_effective: c1,
                epsilon,
                predicted_exponent: predicted_exponent(request.mode, request.alpha),
                lemma52_constant: LEMMA52_CONSTANT,
                lambda_tilde: lt.into(),
                delta_nominal: dp.into(),
            },
            request,
            fits,
            records: sweep.records,
            diagnostics: sweep.diagnostics,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// CSV text for `records`; floats carry 17 significant digits.
pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in records {
        w.write_record([
            fmt_float(r.nu),
            r.k.to_string(),
            fmt_float(r.alpha),
            r.mode.as_str().to_string(),
            fmt_float(r.delta_star),
            fmt_float(r.omega1),
            fmt_float(r.psi1_lower),
            opt_float(r.psi1_direct),
            fmt_float(r.rate_lower),
            opt_float(r.rate_direct),
            fmt_float(r.lambda_tilde),
            fmt_float(r.ratio),
            r.converged.map(|c| c.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Parses CSV produced by [`records_to_csv`].
pub fn records_from_csv(text: &str, path: &Path) -> Result<Vec<SweepRecord>> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(CSV_COLUMNS) {
        return Err(bad(format!(
            "unexpected header '{}'",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| bad(format!("row {}: bad {} '{}'", line + 1, CSV_COLUMNS[i], field(i))))
        };
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let k = field(1)
            .parse()
            .map_err(|_| bad(format!("row {}: bad k '{}'", line + 1, field(1))))?;
        let mode = field(3).parse().map_err(|e: Error| bad(e.to_string()))?;
        let converged = match field(12) {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return Err(bad(format!("row {}: bad converged '{other}'", line + 1))),
        };
        out.push(SweepRecord {
            nu: num(0)?,
            k,
            alpha: num(2)?,
            mode,
            delta_star: num(4)?,
            omega1: num(5)?,
            psi1_lower: num(6)?,
            psi1_direct: opt_num(7)?,
            rate_lower: num(8)?,
            rate_direct: opt_num(9)?,
            lambda_tilde: num(10)?,
            ratio: num(11)?,
            converged,
        });
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    records_from_csv(&text, path)
}

pub fn read_json(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Report text in the requested format.
pub fn render_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => records_to_csv(&report.records),
        ReportFormat::Json => report.to_json(),
    }
}

/// Writes the report to `path`.
pub fn emit_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    let text = render_report(report, format);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// One-line human summary of a fit against its prediction.
pub fn describe_fit(fit: &FitResult, predicted: f64) -> String {
    format!(
        "exponent {:.4} (predicted {:.4}), r² {:.5}, {} points",
        fit.exponent, predicted, fit.r_squared, fit.n_points
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_delta_arithmetic() {
        let d = nominal_delta(ProfileMode::Power, 0.5, 1e-4, 1).unwrap();
        assert!((d - 1e-4f64.powf(0.4)).abs() < 1e-16);
        assert!((d - 0.0251).abs() < 1e-4);
    }

    #[test]
    fn grid_contains_nominal_delta_and_stops_at_pi() {
        let cfg = SweepConfig::default();
        let g = delta_grid(0.01, &cfg);
        assert_eq!(g[cfg.delta_steps_below], 0.01);
        assert!(*g.last().unwrap() <= std::f64::consts::PI);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exact_laws_fit_exactly() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
        assert!(fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_line(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
