use std::path::PathBuf;

use clap::{CommandFactory, Parser};
use dissipator::bench::ReportFormat;
use dissipator::{ProfileMode, Variant};
use dissipator_cli::{resolve, run, Cli, CliError, RunConfig, EXIT_OK, EXIT_REFUSED, EXIT_USAGE, THREADS_ENV};

fn no_env(_: &str) -> Option<String> {
    None
}

fn run_capture(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("dissipator").chain(args.iter().copied());
    let code = run(argv, &no_env, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("run.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn resolved(args: &[&str], config: Option<&str>, env: Option<&str>) -> RunConfig {
    let dir = tempfile::tempdir().unwrap();
    let mut argv: Vec<String> = vec!["dissipator".into()];
    argv.extend(args.iter().map(|s| s.to_string()));
    if let Some(body) = config {
        argv.push("--config".into());
        argv.push(write_config(&dir, body).display().to_string());
    }
    let cli = Cli::try_parse_from(&argv).unwrap();
    let env_value = env.map(str::to_string);
    let lookup = move |k: &str| if k == THREADS_ENV { env_value.clone() } else { None };
    resolve(&cli, &lookup).unwrap()
}

#[test]
fn precedence_matrix() {
    // (flag args, config key/value, flag value, config value)
    type Case = (&'static [&'static str], &'static str, fn(&RunConfig) -> Option<String>, &'static str, &'static str);
    let cases: Vec<Case> = vec![
        (&["--alpha", "0.3"], r#""alpha": 0.7"#, |c| c.alpha.map(|v| v.to_string()), "0.3", "0.7"),
        (&["--terms", "3"], r#""terms": 5"#, |c| c.terms.map(|v| v.to_string()), "3", "5"),
        (&["--mean", "-1.5"], r#""mean": 2.0"#, |c| c.mean.map(|v| v.to_string()), "-1.5", "2"),
        (&["--nu", "0.01"], r#""nu": 0.002"#, |c| c.nu.map(|v| v.to_string()), "0.01", "0.002"),
        (&["--k", "-2"], r#""k": 3"#, |c| c.k.map(|v| v.to_string()), "-2", "3"),
        (&["--modes", "200"], r#""modes": 300"#, |c| c.modes.map(|v| v.to_string()), "200", "300"),
        (&["--tmax", "7"], r#""t_max": 9"#, |c| c.t_max.map(|v| v.to_string()), "7", "9"),
        (&["--samples", "6"], r#""samples": 8"#, |c| c.samples.map(|v| v.to_string()), "6", "8"),
        (&["--threshold", "0.5"], r#""threshold": 0.25"#, |c| c.threshold.map(|v| v.to_string()), "0.5", "0.25"),
        (&["--variant", "L"], r#""variant": "R""#, |c| c.variant.map(|v| format!("{v:?}")), "L", "R"),
        (&["--mode", "log"], r#""mode": "power""#, |c| c.mode.map(|v| format!("{v:?}")), "Log", "Power"),
        (&["--format", "json"], r#""format": "csv""#, |c| c.format.map(|v| format!("{v:?}")), "Json", "Csv"),
        (&["-o", "a.csv"], r#""output": "b.csv""#, |c| c.output.as_ref().map(|p| p.display().to_string()), "a.csv", "b.csv"),
        (&["--threads", "3"], r#""threads": 5"#, |c| c.threads.map(|v| v.to_string()), "3", "5"),
    ];
    for (flags, key, get, flag_value, config_value) in cases {
        let mut args = vec!["decay"];
        args.extend_from_slice(flags);
        let cfg = format!("{{{key}}}");
        // flag and config: flag wins
        assert_eq!(get(&resolved(&args, Some(&cfg), None)).as_deref(), Some(flag_value), "{key}");
        // config only
        assert_eq!(get(&resolved(&["decay"], Some(&cfg), None)).as_deref(), Some(config_value), "{key}");
        // flag only
        assert_eq!(get(&resolved(&args, None, None)).as_deref(), Some(flag_value), "{key}");
        // neither: left to built-in defaults
        assert_eq!(get(&resolved(&["decay"], None, None)), None, "{key}");
    }
}

#[test]
fn list_valued_keys_follow_precedence() {
    let c = resolved(&["sweep", "--nu-grid", "1e-3,1e-4,1e-5"], Some(r#"{"nu_grid": [0.1]}"#), None);
    assert_eq!(c.nu_grid, Some(vec![1e-3, 1e-4, 1e-5]));
    let c = resolved(&["sweep"], Some(r#"{"nu_grid": [0.1], "use_direct": true}"#), None);
    assert_eq!(c.nu_grid, Some(vec![0.1]));
    assert_eq!(c.use_direct, Some(true));
    let c = resolved(&["omega", "--delta-grid", "0.1,0.2"], Some(r#"{"delta_grid": [0.3]}"#), None);
    assert_eq!(c.delta_grid, Some(vec![0.1, 0.2]));
    let c = resolved(&["profile", "--mode", "explicit", "--coeffs", "1,2"], Some(r#"{"coeffs": [5]}"#), None);
    assert_eq!(c.coeffs, Some(vec![1.0, 2.0]));
    assert_eq!(c.mode, Some(ProfileMode::Explicit));
    let c = resolved(&["certify-lemma52", "--m", "2,3"], Some(r#"{"m": [1]}"#), None);
    assert_eq!(c.m, Some(vec![2, 3]));
}

#[test]
fn thread_precedence() {
    assert_eq!(resolved(&["profile", "--threads", "2"], Some(r#"{"threads": 4}"#), Some("3")).threads, Some(2));
    assert_eq!(resolved(&["profile"], Some(r#"{"threads": 4}"#), Some("3")).threads, Some(3));
    assert_eq!(resolved(&["profile"], Some(r#"{"threads": 4}"#), None).threads, Some(4));
    assert_eq!(resolved(&["profile"], None, None).threads, None);
}

#[test]
fn overlay_is_field_wise() {
    let hi = RunConfig {
        alpha: Some(0.2),
        variant: Some(Variant::L),
        ..RunConfig::default()
    };
    let lo = RunConfig {
        alpha: Some(0.9),
        terms: Some(2),
        format: Some(ReportFormat::Json),
        ..RunConfig::default()
    };
    let c = hi.over(lo);
    assert_eq!(c.alpha, Some(0.2));
    assert_eq!(c.terms, Some(2));
    assert_eq!(c.variant, Some(Variant::L));
    assert_eq!(c.format, Some(ReportFormat::Json));
}

#[test]
fn config_values_reach_the_computation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, r#"{"subcommand": "profile", "mode": "explicit", "coeffs": [2.0, 0.5], "format": "csv"}"#);
    let (code, out, err) = run_capture(&["profile", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n,frequency,coefficient");
    assert_eq!(lines[1], "1,3.0000000000000000e0,2.0000000000000000e0");
    assert_eq!(lines[2], "2,9.0000000000000000e0,5.0000000000000000e-1");

    let (code, out, _) = run_capture(&["profile", "--config", cfg.to_str().unwrap(), "--coeffs", "7"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 2);
    assert!(out.contains("7.0000000000000000e0"));
}

#[test]
fn bad_configs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        r#"{"alpah": 0.5}"#,
        r#"{"subcommand": "omega"}"#,
        r#"{"mode": "cubic"}"#,
        "not json",
    ] {
        let cfg = write_config(&dir, body);
        let (code, out, err) = run_capture(&["profile", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE, "{body}");
        assert!(out.is_empty());
        assert_eq!(err.lines().count(), 1, "{err}");
    }
    let (code, _, err) = run_capture(&["profile", "--config", "/nonexistent/x.json"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("/nonexistent/x.json"));
}

#[test]
fn exit_codes() {
    let cases: &[(&[&str], i32)] = &[
        (&["omega", "--alpha", "0.5", "--terms", "6", "--delta", "0.1", "--order", "1"], EXIT_OK),
        (&["psi", "--alpha", "0.5", "--terms", "6", "--scale", "1000", "--modes", "8"], EXIT_USAGE),
        (&["psi", "--terms", "7"], EXIT_REFUSED),
        (&["psi", "--terms", "2", "--modes", "5000"], EXIT_REFUSED),
        (&["omega", "--delta", "-1"], EXIT_USAGE),
        (&["omega", "--delta", "0.1", "--order", "2"], EXIT_USAGE),
        (&["omega", "--delta", "0.1", "--order", "0", "--mean", "1"], EXIT_USAGE),
        (&["omega"], EXIT_USAGE),
        (&["profile", "--alpha", "1.5"], EXIT_USAGE),
        (&["profile", "--mode", "log", "--alpha", "0.5"], EXIT_USAGE),
        (&["profile", "--coeffs", "1,2", "--mode", "power"], EXIT_USAGE),
        (&["decay", "--nu", "0"], EXIT_USAGE),
        (&["decay", "--k", "0"], EXIT_USAGE),
        (&["decay", "--threshold", "1.5"], EXIT_USAGE),
        (&["decay", "--variant", "Q"], EXIT_USAGE),
        (&["sweep", "--nu-grid", "0.9"], EXIT_USAGE),
        (&["sweep", "--mode", "explicit"], EXIT_USAGE),
        (&["certify-lemma52", "--terms", "3", "--m", "4"], EXIT_USAGE),
        (&["certify-lemma52", "--terms", "3"], EXIT_OK),
        (&["--format", "xml", "profile"], EXIT_USAGE),
        (&["nonsense"], EXIT_USAGE),
        (&["profile", "--bogus"], EXIT_USAGE),
    ];
    for (args, want) in cases {
        let (code, _, err) = run_capture(args);
        assert_eq!(code, *want, "{args:?}: {err}");
        if *want != EXIT_OK {
            assert_eq!(err.lines().count(), 1, "{args:?}: diagnostic must be one line: {err}");
            assert!(err.starts_with("dissipator: "));
        }
    }
}

#[test]
fn core_errors_map_to_exit_codes() {
    let refused: CliError = dissipator::Error::Resolution {
        reason: "r",
        required: 2,
        given: 1,
    }
    .into();
    assert_eq!(refused.exit_code(), EXIT_REFUSED);
    assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
}

#[test]
fn every_flag_help_carries_units() {
    let mut cmd = Cli::command();
    cmd.build();
    let mut checked = 0;
    for sub in cmd.get_subcommands().filter(|s| s.get_name() != "help") {
        for arg in sub.get_arguments() {
            let id = arg.get_id().as_str();
            if id == "help" || id == "version" {
                continue;
            }
            let help = arg.get_help().map(|h| h.to_string()).unwrap_or_default();
            assert!(
                help.contains('[') && help.contains(']'),
                "{} --{id}: help lacks units: {help:?}",
                sub.get_name()
            );
            checked += 1;
        }
        let (code, out, _) = run_capture(&[sub.get_name(), "--help"]);
        assert_eq!(code, EXIT_OK);
        for arg in sub.get_arguments().filter_map(|a| a.get_long()) {
            assert!(out.contains(&format!("--{arg}")), "{} --help misses --{arg}", sub.get_name());
        }
    }
    assert!(checked > 40);
}

#[test]
fn reports_use_seventeen_significant_digits() {
    let (code, out, _) = run_capture(&["omega", "--alpha", "0.5", "--terms", "6", "--delta", "0.1"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "delta,order,x_star,c1,c2,value");
    for field in lines[1].split(',').filter(|f| f.contains('e')) {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
        let back: f64 = field.parse().unwrap();
        assert_eq!(dissipator::bench::fmt_float(back), field);
    }
}

#[test]
fn psi_modes() {
    let (code, out, err) = run_capture(&["psi", "--terms", "2", "--scale", "20"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    for key in ["psi0", "psi1", "lambda_star", "modes_used", "converged"] {
        assert!(!v[key].is_null(), "{key}");
    }
    let direct = v["psi1"].as_f64().unwrap();

    let (code, out, _) = run_capture(&["psi", "--terms", "2", "--scale", "20", "--lower"]);
    assert_eq!(code, EXIT_OK);
    let w: serde_json::Value = serde_json::from_str(&out).unwrap();
    let lower = w["psi1"].as_f64().unwrap();
    assert!(lower > 0.0 && lower <= direct, "{lower} vs {direct}");
    assert!(w["modes_used"].is_null());

    let (code, _, _) = run_capture(&["psi", "--terms", "2", "--delta-grid", "0.1"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn decay_emits_curve_and_summary() {
    let (code, out, err) = run_capture(&["decay", "--terms", "2", "--nu", "0.01", "--samples", "5"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.lines().next().unwrap(), "t,norm,gp_bound");
    assert_eq!(out.lines().count(), 7);
    let summary = err.lines().find_map(|l| l.strip_prefix("dissipator: summary ")).unwrap();
    let v: serde_json::Value = serde_json::from_str(summary).unwrap();
    assert_eq!(v["pass"], serde_json::json!(true));
    assert!(v["tau"].as_f64().unwrap() > 0.0);

    let (code, out, _) = run_capture(&["decay", "--terms", "2", "--nu", "0.01", "--samples", "5", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["summary"]["margin"].as_f64().unwrap() >= 1.0);
    assert_eq!(v["curve"]["times"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    let (code, out, err) = run_capture(&[
        "sweep", "--alpha", "0.5", "--nu-grid", "1e-3,1e-5,1e-7,1e-9", "--format", "json", "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.is_empty());
    let report = dissipator::bench::read_json(&path).unwrap();
    assert_eq!(report.records.len(), 4);
    assert!(err.contains("lower-bound fit"));

    let csv_path = dir.path().join("sweep.csv");
    let (code, _, _) = run_capture(&["sweep", "--nu-grid", "1e-3,1e-5,1e-7", "-o", csv_path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(dissipator::bench::read_csv(&csv_path).unwrap().len(), 3);
}
