//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{chi_square, modulated_mass, scan_ansatz, EventSummary, Histogram, ModulationEstimate};
use crate::error::{Error, Result};
use crate::io::{self, Format, Summary};
use crate::models::TWO_PI;
use crate::quantum;
use crate::sampling::{run_pipeline, run_pipeline_into, Pipeline};
use crate::verify::{self, VerifyConfig};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pwkn",
    version,
    about = "Monte Carlo and quadrature checks of annihilation-photon Compton scattering models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate events and write them as CSV or JSON.
    Sample(RunArgs),
    /// Histogram the photon-2 azimuth with analytic curves and modulation estimates.
    Marginals(RunArgs),
    /// Estimate the modulation of an event or histogram file.
    Fit(FitArgs),
    /// Run the invariant suite; exit status 1 on the first failure.
    Verify(VerifyArgs),
    /// Map the non-negative region of the ansatz family.
    ScanAnsatz(ScanArgs),
    /// Check the polarization-algebra identities.
    QuantumCheck,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Pipeline name; repeat for several.
    #[arg(long = "model", required = true, value_parser = parse_model_name)]
    pub models: Vec<String>,
    /// B_FF of the ansatz family.
    #[arg(long = "bff", allow_hyphen_values = true)]
    pub b_ff: Option<f64>,
    /// B_GG of the ansatz family.
    #[arg(long = "bgg", allow_hyphen_values = true)]
    pub b_gg: Option<f64>,
}

impl ModelArgs {
    pub fn pipelines(&self) -> Result<Vec<Pipeline>> {
        self.models
            .iter()
            .map(|m| Pipeline::from_name(m, self.b_ff, self.b_gg))
            .collect()
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, env = "PWKN_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Output file; several models get the model name inserted before the
    /// extension. Standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Event file written by `sample` or histogram file written by `marginals`.
    #[arg(long)]
    pub input: PathBuf,
    /// Model whose photon-2 curve is tested against the data.
    #[arg(long, value_parser = parse_model_name)]
    pub model: Option<String>,
    #[arg(long = "bff", allow_hyphen_values = true)]
    pub b_ff: Option<f64>,
    #[arg(long = "bgg", allow_hyphen_values = true)]
    pub b_gg: Option<f64>,
    /// Bins used when the input holds events.
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Relax quadrature tolerances to 1e-6 and shrink sample sizes.
    #[arg(long)]
    pub fast: bool,
    #[arg(long, env = "PWKN_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[arg(long = "bff-range", default_value = "-0.01:0.01", value_parser = parse_range, allow_hyphen_values = true)]
    pub b_ff_range: (f64, f64),
    #[arg(long = "bgg-range", default_value = "-0.04:0.04", value_parser = parse_range, allow_hyphen_values = true)]
    pub b_gg_range: (f64, f64),
    #[arg(long, default_value_t = 41)]
    pub res: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: Format,
}

fn parse_model_name(s: &str) -> std::result::Result<String, String> {
    if Pipeline::ALL_NAMED.contains(&s) {
        Ok(s.to_string())
    } else {
        Err(format!("expected one of {}", Pipeline::ALL_NAMED.join(", ")))
    }
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `lo:hi` with finite `lo <= hi`.
pub fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("`{s}` is not of the form lo:hi"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("`{lo}` is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("`{hi}` is not a number"))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("`{s}` must be finite with lo <= hi"));
    }
    Ok((lo, hi))
}

/// `out.csv` → `out.<tag>.csv`.
pub fn tagged_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

/// Where one of several outputs goes.
fn output_path(out: &Option<PathBuf>, tag: &str, several: bool) -> Option<PathBuf> {
    out.as_ref()
        .map(|p| if several { tagged_path(p, tag) } else { p.clone() })
}

fn emit(path: Option<&Path>, contents: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => io::write_file(p, contents),
        None => stdout
            .write_all(contents.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn validate_run(args: &RunArgs) -> Result<()> {
    if args.samples == 0 {
        return Err(Error::Precondition("--samples must be at least 1".into()));
    }
    if args.bins < 2 {
        return Err(Error::Precondition("--bins must be at least 2".into()));
    }
    if args.workers == 0 {
        return Err(Error::Precondition("--workers must be at least 1".into()));
    }
    Ok(())
}

fn run_summary(p: Pipeline, args: &RunArgs) -> Summary {
    let mut s = Summary::new()
        .text("model", p.name())
        .int("seed", args.seed)
        .int("samples", args.samples)
        .int("workers", args.workers as u64);
    if let Pipeline::Ansatz { b_ff, b_gg } = p {
        s = s.real("b_ff", b_ff).real("b_gg", b_gg);
    }
    s
}

fn add_estimate(s: Summary, suffix: &str, e: &ModulationEstimate) -> Summary {
    s.real(&format!("k_hat{suffix}"), e.k_hat)
        .real(&format!("std_err{suffix}"), e.std_err)
}

fn cmd_sample(args: &RunArgs, stdout: &mut dyn Write) -> Result<()> {
    validate_run(args)?;
    let pipelines = args.model.pipelines()?;
    let several = pipelines.len() > 1;
    for p in pipelines {
        let events = run_pipeline(p, args.samples, args.seed, args.workers)?;
        let summary = run_summary(p, args);
        let text = match args.format {
            Format::Csv => io::events_to_csv(&events, &summary),
            Format::Json => io::events_to_json(&events, &summary),
        };
        emit(output_path(&args.out, p.name(), several).as_deref(), &text, stdout)?;
    }
    Ok(())
}

fn cmd_marginals(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    validate_run(args)?;
    let pipelines = args.model.pipelines()?;
    let several = pipelines.len() > 1;
    for p in pipelines {
        let mut acc = run_pipeline_into(p, args.samples, args.seed, args.workers, || {
            EventSummary::new(args.bins).expect("bins validated")
        })?;
        acc.attach_analytic(p);
        let k1 = acc.phi1_moments.estimate()?;
        let k2 = acc.phi2_moments.estimate()?;
        let rel = acc.relative_moments.estimate()?;
        let fixed = acc.fixed_relative_moments.estimate()?;
        let mut s = run_summary(p, args).int("bins", args.bins as u64).int("n", k2.n);
        s = add_estimate(s, "", &k2);
        s = add_estimate(s, "_1", &k1);
        s = add_estimate(s, "_2", &k2);
        s = s
            .real(
                "analytic_k",
                crate::analysis::analytic_marginal(p, crate::sampling::Photon::Second),
            )
            .real("correlation", rel.correlation())
            .real("correlation_err", rel.std_err)
            .real("fixed_correlation", fixed.correlation())
            .real("fixed_correlation_err", fixed.std_err);
        match chi_square(&acc.phi2) {
            Ok(r) => s = s.real("chi2_reduced", r.reduced()).real("p_value", r.p_value),
            Err(e) => log::warn!("{p}: no goodness of fit: {e}"),
        }
        writeln!(
            stderr,
            "{p}: k_hat_1 = {:.5} ± {:.5}, k_hat_2 = {:.5} ± {:.5}",
            k1.k_hat, k1.std_err, k2.k_hat, k2.std_err
        )
        .ok();
        let text = io::histogram_to_string(&acc.phi2, &s, args.format);
        emit(output_path(&args.out, p.name(), several).as_deref(), &text, stdout)?;
    }
    Ok(())
}

/// Weighted least-squares `k` of `(1/2π)(1 − k cos 2φ)` binned over `[0, 2π)`;
/// the bin masses are linear in `k`.
pub fn fit_histogram(h: &Histogram) -> Result<ModulationEstimate> {
    let n = h.total();
    if n < 2 {
        return Err(Error::Precondition("histogram holds fewer than 2 entries".into()));
    }
    let nf = n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &c) in h.counts().iter().enumerate() {
        let (lo, hi) = h.bin(i);
        let base = modulated_mass(0.0, lo, hi);
        let x = modulated_mass(1.0, lo, hi) - base;
        let y = c as f64 / nf - base;
        let w = nf * nf / (c.max(1) as f64);
        sxy += w * x * y;
        sxx += w * x * x;
    }
    if sxx <= 0.0 {
        return Err(Error::Precondition("binning carries no cos 2φ information".into()));
    }
    Ok(ModulationEstimate {
        k_hat: sxy / sxx,
        std_err: sxx.sqrt().recip(),
        n,
    })
}

fn cmd_fit(args: &FitArgs, stdout: &mut dyn Write) -> Result<()> {
    if args.bins < 2 {
        return Err(Error::Precondition("--bins must be at least 2".into()));
    }
    let text = io::read_file(&args.input)?;
    let pipeline = args
        .model
        .as_deref()
        .map(|m| Pipeline::from_name(m, args.b_ff, args.b_gg))
        .transpose()?;
    let is_json = text.trim_start().starts_with('{');
    let is_events = text.lines().any(|l| l.trim() == io::EVENT_HEADER) || (is_json && text.contains("\"events\""));

    let mut out = Summary::new().text("input", &args.input.display().to_string());
    let mut hist = if is_events {
        let (events, _) = if is_json {
            io::events_from_json(&text)?
        } else {
            io::events_from_csv(&text)?
        };
        let phis1: Vec<f64> = events.iter().map(|e| e.photon1.phi).collect();
        let phis2: Vec<f64> = events.iter().map(|e| e.photon2.phi).collect();
        let k1 = crate::analysis::estimate_modulation(&phis1)?;
        let k2 = crate::analysis::estimate_modulation(&phis2)?;
        out = out.text("method", "moments").int("n", k2.n);
        out = add_estimate(out, "_1", &k1);
        out = add_estimate(out, "_2", &k2);
        crate::analysis::histogram_phi(&events, crate::analysis::AzimuthSelector::Photon2, args.bins, None)?
    } else {
        let (h, _) = if is_json {
            io::histogram_from_json(&text)?
        } else {
            io::histogram_from_csv(&text)?
        };
        let e = fit_histogram(&h)?;
        out = out.text("method", "binned-least-squares").int("n", e.n);
        out = add_estimate(out, "_2", &e);
        h
    };
    if let Some(p) = pipeline {
        let k = crate::analysis::analytic_marginal(p, crate::sampling::Photon::Second);
        hist.set_analytic(|lo, hi| modulated_mass(k, lo, hi));
        let r = chi_square(&hist)?;
        out = out
            .text("model", p.name())
            .real("analytic_k", k)
            .real("chi2", r.chi2)
            .int("dof", r.dof as u64)
            .real("p_value", r.p_value);
    }
    let mut report = String::new();
    for (k, v) in &out.0 {
        let v = match v {
            io::SummaryValue::Real(x) => format!("{x:.6e}"),
            io::SummaryValue::Int(x) => x.to_string(),
            io::SummaryValue::Text(t) => t.clone(),
        };
        report.push_str(&format!("{k}={v}\n"));
    }
    emit(None, &report, stdout)
}

fn cmd_verify(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<bool> {
    if args.workers == 0 {
        return Err(Error::Precondition("--workers must be at least 1".into()));
    }
    let cfg = VerifyConfig {
        fast: args.fast,
        seed: args.seed,
        workers: args.workers,
        ..VerifyConfig::default()
    };
    let report = verify::run(&cfg);
    let text = match args.format {
        Format::Csv => report.to_text(),
        Format::Json => report.to_json(),
    };
    if let Some(p) = &args.out {
        io::write_file(p, &text)?;
    }
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))?;
    Ok(report.all_passed())
}

fn cmd_scan(args: &ScanArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let map = scan_ansatz(args.b_ff_range, args.b_gg_range, args.res)?;
    writeln!(
        stderr,
        "{} of {} points feasible; feasible set {} the window border",
        map.feasible_count(),
        map.b_ff.len() * map.b_gg.len(),
        if map.feasible_set_is_interior() {
            "stays inside"
        } else {
            "touches"
        }
    )
    .ok();
    let text = match args.format {
        Format::Csv => io::feasibility_to_csv(&map),
        Format::Json => io::feasibility_to_json(&map),
    };
    emit(args.out.as_deref(), &text, stdout)
}

fn cmd_quantum(stdout: &mut dyn Write) -> Result<bool> {
    let c = verify::check_quantum(&VerifyConfig::default());
    let avg = (0..=8)
        .map(|k| {
            let t = TWO_PI * k as f64 / 9.0;
            quantum::averaging_identity(t.cos(), t, -t.sin(), 2.0 * t)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let avg_ok = avg < 1e-10;
    let text = format!(
        "{c}\n{} averaging-identity: max residual {avg:.1e}\n",
        if avg_ok { "PASS" } else { "FAIL" }
    );
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))?;
    Ok(c.passed && avg_ok)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Precondition(_) | Error::UnsupportedModel(_) | Error::Parse(_) | Error::Domain { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_SUCCESS };
            let rendered = e.render().to_string();
            if code == EXIT_SUCCESS {
                stdout.write_all(rendered.as_bytes()).ok();
            } else {
                stderr.write_all(rendered.as_bytes()).ok();
            }
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Sample(a) => cmd_sample(a, stdout).map(|_| true),
        Command::Marginals(a) => cmd_marginals(a, stdout, stderr).map(|_| true),
        Command::Fit(a) => cmd_fit(a, stdout).map(|_| true),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::ScanAnsatz(a) => cmd_scan(a, stdout, stderr).map(|_| true),
        Command::QuantumCheck => cmd_quantum(stdout),
    };
    match outcome {
        Ok(true) => EXIT_SUCCESS,
        Ok(false) => EXIT_FAILURE,
        Err(e) => {
            writeln!(stderr, "error: {e}").ok();
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("pwkn").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-1:1").unwrap(), (-1.0, 1.0));
        assert!(parse_range("1:-1").is_err());
        assert!(parse_range("1").is_err());
        assert!(parse_range("a:1").is_err());
    }

    #[test]
    fn tagging() {
        assert_eq!(
            tagged_path(Path::new("/tmp/out.csv"), "recommended"),
            PathBuf::from("/tmp/out.recommended.csv")
        );
        assert_eq!(tagged_path(Path::new("out"), "pw-joint"), PathBuf::from("out.pw-joint"));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_capture(&["marginals", "--model", "bogus"]).0, EXIT_USAGE);
        assert_eq!(
            run_capture(&["marginals", "--model", "ansatz", "--samples", "10"]).0,
            EXIT_USAGE
        );
        assert_eq!(
            run_capture(&["marginals", "--model", "recommended", "--bins", "1"]).0,
            EXIT_USAGE
        );
        assert_eq!(run_capture(&["scan-ansatz", "--bff-range", "1:0"]).0, EXIT_USAGE);
        assert_eq!(
            run_capture(&["sample", "--model", "recommended", "--samples", "0"]).0,
            EXIT_USAGE
        );
    }

    #[test]
    fn scan_small_grid() {
        let (code, out, _) = run_capture(&[
            "scan-ansatz",
            "--bff-range",
            "-1:1",
            "--bgg-range",
            "-1:1",
            "--res",
            "3",
        ]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 10);
        assert!(out.contains("0e0,0e0,"));
        let origin = out.lines().find(|l| l.starts_with("0e0,0e0,")).unwrap();
        assert!(origin.ends_with(",true"), "{origin}");
    }

    #[test]
    fn histogram_fit_recovers_k() {
        let mut h = Histogram::uniform(0.0, TWO_PI, 32).unwrap();
        let n = 1_000_000f64;
        let counts: Vec<u64> = (0..32)
            .map(|i| {
                let (lo, hi) = h.bin(i);
                (modulated_mass(0.25, lo, hi) * n).round() as u64
            })
            .collect();
        h = Histogram::new(h.edges().to_vec(), counts, None).unwrap();
        let e = fit_histogram(&h).unwrap();
        assert!((e.k_hat - 0.25).abs() < 1e-4, "{e:?}");
    }
}
