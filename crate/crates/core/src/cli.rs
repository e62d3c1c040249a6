//! Command-line front end: `list`, `show` and `verify` over the corpus.

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

use crate::corpus::{build_example, build_example_with, Example, KEYS};
use crate::error::GeomError;
use crate::manifold::{SamplePlan, DEFAULT_COUNT, DEFAULT_SEED};
use crate::report::{to_json, CheckReport};

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "SASAKI_LAB_THREADS";

/// Everything matched its declared outcome.
pub const EXIT_OK: i32 = 0;
/// Some check produced an outcome other than the declared one.
pub const EXIT_UNEXPECTED: i32 = 1;
/// Unknown key, check, parameter or flag.
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "sasaki-lab", version, about = "Sampled verification of contact, Sasakian and Kähler structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List corpus entries.
    List,
    /// Print an entry in its text form.
    Show {
        key: String,
        /// Parameter override, `name=expr`.
        #[arg(long = "param", value_name = "NAME=EXPR")]
        params: Vec<String>,
    },
    /// Run the declared checks of one entry or of `all`.
    Verify {
        key: String,
        /// Comma-separated subset of checks.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        #[arg(long, default_value_t = DEFAULT_COUNT)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Override every declared tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Write the reports as a JSON array (`-` for stdout).
        #[arg(long, value_name = "PATH")]
        json: Option<String>,
        #[arg(long = "param", value_name = "NAME=EXPR")]
        params: Vec<String>,
    },
}

#[derive(Debug)]
struct Usage(String);

impl From<GeomError> for Usage {
    fn from(e: GeomError) -> Self {
        Usage(e.to_string())
    }
}

fn split_params(raw: &[String]) -> Result<Vec<(String, String)>, Usage> {
    raw.iter()
        .map(|p| match p.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => Err(Usage(format!("parameter `{p}` is not of the form name=expr"))),
        })
        .collect()
}

/// The entries selected by `key`; parameters go to whichever entries take
/// them, and each must be taken by at least one.
fn examples(key: &str, params: &[(String, String)]) -> Result<Vec<Example>, Usage> {
    if key != "all" {
        return Ok(vec![build_example_with(key, params)?]);
    }
    let mut out = Vec::new();
    let mut used = vec![false; params.len()];
    for k in KEYS {
        let probe = build_example(k)?;
        let mine: Vec<(String, String)> = params
            .iter()
            .enumerate()
            .filter(|(_, (n, _))| probe.params.contains_key(n))
            .map(|(i, p)| {
                used[i] = true;
                p.clone()
            })
            .collect();
        out.push(if mine.is_empty() { probe } else { build_example_with(k, &mine)? });
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(Usage(format!("no entry takes parameter `{}`", params[i].0)));
    }
    Ok(out)
}

fn row(r: &CheckReport) -> String {
    let expected = r.expected.map_or("-", |v| v.as_str());
    let flag = if r.matched() { "ok" } else { "UNEXPECTED" };
    format!(
        "{:<18} {:<28} {:<13} {:<9} {:>11.3e} {:>9.1e}  {flag}",
        r.example,
        r.check,
        r.verdict.as_str(),
        expected,
        r.max_residual,
        r.tolerance
    )
}

#[allow(clippy::too_many_arguments)]
fn verify(
    key: &str,
    checks: Option<Vec<String>>,
    samples: usize,
    seed: u64,
    tol: Option<f64>,
    json: Option<String>,
    params: &[String],
    out: &mut dyn Write,
) -> Result<i32, Usage> {
    if samples == 0 {
        return Err(Usage("--samples must be positive".into()));
    }
    if tol.is_some_and(|t| !(t >= 0.0)) {
        return Err(Usage("--tol must be a non-negative number".into()));
    }
    let params = split_params(params)?;
    let exs = examples(key, &params)?;
    let only: Option<Vec<String>> = checks.map(|c| c.into_iter().map(|s| s.trim().to_string()).collect());
    if let Some(names) = &only {
        if let Some(n) = names.iter().find(|n| !exs.iter().any(|e| e.find_check(n).is_some())) {
            return Err(Usage(format!("no check `{n}` in `{key}`")));
        }
    }
    let plan = SamplePlan::new(seed, samples);
    let mut reports = Vec::new();
    for ex in &exs {
        let selected: Option<Vec<String>> = only
            .as_ref()
            .map(|names| names.iter().filter(|n| ex.find_check(n).is_some()).cloned().collect());
        if selected.as_ref().is_some_and(|s| s.is_empty()) {
            continue;
        }
        reports.extend(ex.run(&plan, tol, selected.as_deref())?);
    }
    if json.as_deref() != Some("-") {
        let _ = writeln!(
            out,
            "{:<18} {:<28} {:<13} {:<9} {:>11} {:>9}",
            "example", "check", "verdict", "expected", "residual", "tol"
        );
        for r in &reports {
            let _ = writeln!(out, "{}", row(r));
        }
    }
    let bad = reports.iter().filter(|r| !r.matched()).count();
    match json.as_deref() {
        Some("-") => {
            let _ = writeln!(out, "{}", to_json(&reports));
        }
        Some(path) => std::fs::write(path, to_json(&reports) + "\n")
            .map_err(|e| Usage(format!("cannot write `{path}`: {e}")))?,
        None => {}
    }
    if json.as_deref() != Some("-") {
        let _ = writeln!(out, "{} checks, {} as declared, {bad} unexpected", reports.len(), reports.len() - bad);
    }
    Ok(if bad == 0 { EXIT_OK } else { EXIT_UNEXPECTED })
}

/// Sizes the global pool from `SASAKI_LAB_THREADS` once; later calls and
/// unparsable values leave rayon's default.
fn init_pool() {
    if let Some(n) = std::env::var(THREADS_VAR).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    init_pool();
    let result = match cli.command {
        Command::List => {
            for k in KEYS {
                match build_example(k) {
                    Ok(ex) => {
                        let _ = writeln!(out, "{k:<18} {:>3} checks  {}", ex.checks.len(), ex.summary);
                    }
                    Err(e) => return report_usage(err, e.into()),
                }
            }
            Ok(EXIT_OK)
        }
        Command::Show { key, params } => split_params(&params)
            .and_then(|p| Ok(build_example_with(&key, &p)?))
            .map(|ex| {
                let _ = write!(out, "{}", ex.to_text());
                EXIT_OK
            }),
        Command::Verify { key, checks, samples, seed, tol, json, params } => {
            verify(&key, checks, samples, seed, tol, json, &params, out)
        }
    };
    result.unwrap_or_else(|u| report_usage(err, u))
}

fn report_usage(err: &mut dyn Write, u: Usage) -> i32 {
    let _ = writeln!(err, "error: {}", u.0);
    EXIT_USAGE
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let mut full = vec!["sasaki-lab"];
        full.extend_from_slice(args);
        let code = run(full, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&["verify", "no-such-key"]).0, EXIT_USAGE);
        assert_eq!(call(&["verify", "darboux-1", "--frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["verify", "darboux-1", "--checks", "nope"]).0, EXIT_USAGE);
        assert_eq!(call(&["verify", "darboux-1", "--param", "a=1"]).0, EXIT_USAGE);
        assert_eq!(call(&["verify", "main1-family", "--param", "a=q"]).0, EXIT_USAGE);
        assert_eq!(call(&["show", "nothing"]).0, EXIT_USAGE);
        assert_eq!(call(&[]).0, EXIT_USAGE);
    }

    #[test]
    fn list_names_every_key() {
        let (code, out, _) = call(&["list"]);
        assert_eq!(code, EXIT_OK);
        for k in KEYS {
            assert!(out.contains(k));
        }
    }

    #[test]
    fn expected_fail_counts_as_success() {
        let (code, out, _) = call(&["verify", "product-darboux", "--checks", "weighted_endomorphism,reeb_sum"]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert!(out.contains("fail"));
    }

    #[test]
    fn tolerance_override_can_make_outcomes_unexpected() {
        let (code, _, _) = call(&["verify", "mobius-band", "--checks", "fields_consistency", "--tol", "0"]);
        assert_eq!(code, EXIT_UNEXPECTED);
    }

    #[test]
    fn json_to_stdout_is_an_array() {
        let (code, out, _) = call(&["verify", "darboux-1", "--checks", "reeb,pin", "--samples", "4", "--json", "-"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let a = v.as_array().unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0]["check"], "reeb");
        assert_eq!(a[1]["plan"]["count"], 4);
    }

    #[test]
    fn param_reaches_main1_family_under_all() {
        let (code, out, _) =
            call(&["verify", "all", "--checks", "integrability", "--samples", "4", "--param", "a=0.3"]);
        assert_eq!(code, EXIT_OK, "{out}");
        let (code, _, _) = call(&["verify", "all", "--checks", "integrability", "--param", "b=1"]);
        assert_eq!(code, EXIT_USAGE);
    }
}
