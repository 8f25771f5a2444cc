//! `chainbell`: quantum predictions, hidden-variable bounds, simulated and
//! recorded chained Bell experiments, and the nonsignaling LP explorer.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use chainbell::chained::{asymptotic_in, gamma_constant, quantum_in, scan_minimum, MinimumScan};
use chainbell::experiment::{
    calibrate_visibility, crosstalk_for, estimate_in, estimate_seed, load_counts, reported_minimum,
    run_table1_protocol, CountFormat, CountRecord, ErrorMethod, Estimate, EstimateOptions, NoiseModel,
    ProtocolConfig, SpectrumShape, SpiralSpectrum, SubspaceSelection, CROSSTALK_BASE,
};
use chainbell::hidden_variable::{
    bell_bound_analytic, bell_bound_bruteforce, leggett_bound, strategy_count, violation_margin, BoundReport,
    LeggettConfig, LeggettModel, ENUMERATION_GUARD,
};
use chainbell::polytope::{lp_max_delta, BoxShape, LpProblem, LP_VARIABLE_GUARD};

const D_MAX: usize = 16;
const N_MAX: usize = 64;

#[derive(Parser)]
#[command(name = "chainbell", version, about = "Chained Bell correlations and the limits of predictive power")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact quantum I_N for the maximally entangled state, with its 2 gamma / N asymptote.
    Predict {
        #[arg(long, value_parser = parse_d)]
        d: usize,
        /// A single N or an inclusive range `a..b`.
        #[arg(long, value_parser = parse_n_range)]
        n: NRange,
        #[command(flatten)]
        out: Output,
    },
    /// Lower bounds on I_N from Bell and Leggett models.
    Bounds {
        #[arg(long, value_parser = parse_d)]
        d: usize,
        #[arg(long, value_parser = parse_n)]
        n: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Simulate the counting experiment for every N and summarize the minimum.
    Simulate(SimulateArgs),
    /// Estimate I_N from recorded count files and summarize the minimum.
    Analyze(AnalyzeArgs),
    /// Largest predictive advantage allowed by nonsignaling boxes under a cap on I_N.
    Polytope {
        #[arg(long, value_parser = parse_d)]
        d: usize,
        #[arg(long, value_parser = parse_n)]
        n: usize,
        /// Size of the extra party's output alphabet.
        #[arg(long, default_value_t = 1)]
        z: usize,
        /// Comma-separated caps on I_N.
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1,1.25,1.5,1.75,2")]
        cap: Vec<f64>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ErrorBars {
    #[arg(long, value_enum, default_value_t = Method::Bootstrap)]
    method: Method,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_d)]
    d: usize,
    #[arg(long, value_parser = parse_n_range, default_value = "1..12")]
    n: NRange,
    /// Visibility of the ideal state against white noise.
    #[arg(long, conflicts_with = "calibrate")]
    visibility: Option<f64>,
    /// Fit the visibility so the noiseless-count minimum matches the measured one (d = 2..6).
    #[arg(long)]
    calibrate: bool,
    /// Expected coincidences per setting pair before filtering losses.
    #[arg(long, default_value_t = 1e7)]
    rate: f64,
    /// Accidental coincidences per setting pair.
    #[arg(long, default_value_t = 0.0)]
    dark: f64,
    /// Neighbour leakage at unit mode spacing.
    #[arg(long, default_value_t = CROSSTALK_BASE)]
    crosstalk_base: f64,
    #[arg(long, value_enum, default_value_t = Shape::Exponential)]
    spectrum: Shape,
    #[arg(long, default_value_t = 6)]
    half_width: u32,
    #[arg(long, default_value_t = 3.0)]
    decay: f64,
    #[command(flatten)]
    errors: ErrorBars,
    /// Format of the count files.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Directory for count files, `summary.json` and `scan.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Count files (`.csv` or `.json`), one per N.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Override format detection from the file extension.
    #[arg(long, value_enum)]
    input_format: Option<Format>,
    #[command(flatten)]
    errors: ErrorBars,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn counts(self) -> CountFormat {
        match self {
            Format::Csv => CountFormat::Csv,
            Format::Json => CountFormat::Json,
        }
    }

    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Bootstrap,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Exponential,
    Lorentzian,
}

#[derive(Clone, Debug)]
struct NRange(Vec<usize>);

fn parse_bounded(s: &str, what: &str, lo: usize, hi: usize) -> Result<usize, String> {
    let v: usize = s.trim().parse().map_err(|_| format!("`{s}` is not a nonnegative integer"))?;
    if v < lo || v > hi {
        return Err(format!("{what} = {v} outside {lo}..={hi}"));
    }
    Ok(v)
}

fn parse_d(s: &str) -> Result<usize, String> {
    parse_bounded(s, "d", 2, D_MAX)
}

fn parse_n(s: &str) -> Result<usize, String> {
    parse_bounded(s, "N", 1, N_MAX)
}

fn parse_n_range(s: &str) -> Result<NRange, String> {
    let Some((a, b)) = s.split_once("..") else {
        return Ok(NRange(vec![parse_n(s)?]));
    };
    let (a, b) = (parse_n(a)?, parse_n(b.strip_prefix('=').unwrap_or(b))?);
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(NRange((a..=b).collect()))
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<chainbell::Error> for Failure {
    fn from(e: chainbell::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Predict { d, n, out } => predict(d, &n.0, &out),
        Command::Bounds { d, n, out } => bounds(d, n, &out),
        Command::Simulate(args) => simulate(&args),
        Command::Analyze(args) => analyze(&args),
        Command::Polytope { d, n, z, cap, out } => polytope(d, n, z, &cap, &out),
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

#[derive(Serialize)]
struct PredictRow {
    #[serde(rename = "N")]
    n: usize,
    exact: f64,
    asymptotic: f64,
}

fn predict(d: usize, ns: &[usize], out: &Output) -> Result<(), Failure> {
    let gamma = gamma_constant(d)?;
    let rows = ns
        .iter()
        .map(|&n| {
            Ok(PredictRow {
                n,
                exact: quantum_in(d, n)?.value,
                asymptotic: asymptotic_in(d, n)?,
            })
        })
        .collect::<chainbell::Result<Vec<_>>>()?;
    let text = match out.format {
        Format::Json => to_json(&serde_json::json!({ "d": d, "gamma": gamma, "rows": rows }))?,
        Format::Csv => {
            let mut s = format!("# d={d} gamma={gamma}\nN,exact,asymptotic\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{}", r.n, r.exact, r.asymptotic);
            }
            s
        }
    };
    emit(out.out.as_deref(), &text)?;
    Ok(())
}

#[derive(Serialize)]
struct BoundRow {
    model: &'static str,
    kind: &'static str,
    #[serde(rename = "N")]
    n: Option<usize>,
    bound: f64,
}

fn bound_row(model: &'static str, r: &BoundReport) -> BoundRow {
    BoundRow {
        model,
        kind: match r.kind {
            chainbell::hidden_variable::BoundKind::Analytic => "analytic",
            chainbell::hidden_variable::BoundKind::BruteForce => "brute-force",
        },
        n: r.n_settings,
        bound: r.bound,
    }
}

fn bruteforce_within_guard(d: usize, n: usize) -> bool {
    strategy_count(d, n).is_some_and(|c| c <= ENUMERATION_GUARD)
}

fn bounds(d: usize, n: usize, out: &Output) -> Result<(), Failure> {
    let mut rows = vec![bound_row("bell", &bell_bound_analytic(d)?)];
    if bruteforce_within_guard(d, n) {
        rows.push(bound_row("bell", &bell_bound_bruteforce(d, n)?));
    } else {
        eprintln!("note: brute-force Bell bound skipped: d^(2N) exceeds {ENUMERATION_GUARD} strategies");
    }
    if d == 2 {
        for (name, model) in [
            ("leggett-uniform-sphere", LeggettModel::UniformSphere),
            ("leggett-fixed-in-plane", LeggettModel::FixedInPlane),
        ] {
            rows.push(bound_row(name, &leggett_bound(LeggettConfig { n_settings: n, model })?));
        }
    }
    let text = match out.format {
        Format::Json => to_json(&serde_json::json!({ "d": d, "N": n, "bounds": rows }))?,
        Format::Csv => {
            let mut s = String::from("model,kind,N,bound\n");
            for r in &rows {
                let n = r.n.map(|n| n.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{},{},{},{}", r.model, r.kind, n, r.bound);
            }
            s
        }
    };
    emit(out.out.as_deref(), &text)?;
    Ok(())
}

#[derive(Serialize)]
struct ScanRow {
    #[serde(rename = "N")]
    n: usize,
    value: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct Margins {
    bm_analytic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bm_bruteforce: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lm: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    d: usize,
    scans: Vec<ScanRow>,
    i_star: f64,
    argmin_n: usize,
    stderr: f64,
    method: &'static str,
    margins: Margins,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<SimulationInfo>,
}

#[derive(Serialize)]
struct SimulationInfo {
    seed: u64,
    visibility: f64,
    efficiency: f64,
    rate: f64,
    modes: Vec<i32>,
}

fn margin(scan: &MinimumScan, bound: &BoundReport) -> Option<f64> {
    violation_margin(scan.i_star, scan.stderr_at_min(), bound).ok()
}

fn summarize(d: usize, scan: &MinimumScan, method: Method) -> chainbell::Result<Summary> {
    let bm_bruteforce = if bruteforce_within_guard(d, scan.argmin_n) {
        margin(scan, &bell_bound_bruteforce(d, scan.argmin_n)?)
    } else {
        None
    };
    let lm = if d == 2 {
        margin(
            scan,
            &leggett_bound(LeggettConfig {
                n_settings: scan.argmin_n,
                model: LeggettModel::UniformSphere,
            })?,
        )
    } else {
        None
    };
    Ok(Summary {
        d,
        scans: scan
            .scanned
            .iter()
            .map(|(&n, &(value, stderr))| ScanRow { n, value, stderr })
            .collect(),
        i_star: scan.i_star,
        argmin_n: scan.argmin_n,
        stderr: scan.stderr_at_min(),
        method: match method {
            Method::Bootstrap => "bootstrap",
            Method::Gaussian => "gaussian",
        },
        margins: Margins {
            bm_analytic: margin(scan, &bell_bound_analytic(d)?),
            bm_bruteforce,
            lm,
        },
        simulation: None,
    })
}

/// Plot-ready columns: measured points, the quantum curve and the model bounds.
fn scan_csv(d: usize, scan: &MinimumScan) -> chainbell::Result<String> {
    let bm = bell_bound_analytic(d)?.bound;
    let lm = if d == 2 { "0.5".to_string() } else { String::new() };
    let mut s = String::from("N,value,stderr,quantum,bm_analytic,lm\n");
    for (&n, &(v, e)) in &scan.scanned {
        let q = quantum_in(d, n)?.value;
        let _ = writeln!(s, "{n},{v},{e},{q},{bm},{lm}");
    }
    Ok(s)
}

fn options(e: &ErrorBars) -> EstimateOptions {
    EstimateOptions {
        method: match e.method {
            Method::Bootstrap => ErrorMethod::Bootstrap,
            Method::Gaussian => ErrorMethod::Gaussian,
        },
        resamples: e.resamples,
        seed: e.seed,
    }
}

fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let d = a.d;
    let subspace = SubspaceSelection::default_for(d)?;
    let crosstalk = crosstalk_for(&subspace, a.crosstalk_base).map_err(|e| Failure::Usage(e.to_string()))?;
    let visibility = if a.calibrate {
        let target = reported_minimum(d)
            .ok_or_else(|| Failure::Usage(format!("no measured minimum to calibrate against for d={d}")))?;
        let noise = NoiseModel {
            visibility: 1.0,
            crosstalk: crosstalk.clone(),
            rate_scale: a.rate,
            dark_rate: a.dark,
        };
        calibrate_visibility(d, &noise, &a.n.0, target.value)?.visibility
    } else {
        a.visibility.unwrap_or(1.0)
    };
    let cfg = ProtocolConfig {
        d,
        spectrum: SpiralSpectrum {
            half_width: a.half_width,
            shape: match a.spectrum {
                Shape::Exponential => SpectrumShape::Exponential,
                Shape::Lorentzian => SpectrumShape::Lorentzian,
            },
            decay: a.decay,
        },
        subspace,
        noise: NoiseModel {
            visibility,
            crosstalk,
            rate_scale: a.rate,
            dark_rate: a.dark,
        },
        n_range: a.n.0.clone(),
        estimate: options(&a.errors),
        seed: a.errors.seed,
    };
    cfg.noise.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let run = run_table1_protocol(&cfg)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (n, rec) in &run.records {
        let rec = rec.clone().with_meta(format!(
            "simulated d={d} N={n} seed={} visibility={visibility} rate={}",
            a.errors.seed, a.rate
        ));
        let path = a.out.join(format!("counts_N{n:02}.{}", a.format.ext()));
        rec.save(&path, a.format.counts())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let mut summary = summarize(d, &run.scan, a.errors.method)?;
    summary.simulation = Some(SimulationInfo {
        seed: a.errors.seed,
        visibility,
        efficiency: run.efficiency,
        rate: a.rate,
        modes: cfg.subspace.modes().to_vec(),
    });
    let json = to_json(&summary)?;
    emit(Some(&a.out.join("summary.json")), &json)?;
    emit(Some(&a.out.join("scan.csv")), &scan_csv(d, &run.scan)?)?;
    print!("{json}");
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    let mut records: BTreeMap<usize, (PathBuf, CountRecord)> = BTreeMap::new();
    for path in &a.files {
        let format = match a.input_format {
            Some(f) => f.counts(),
            None => CountFormat::from_path(path).ok_or_else(|| {
                Failure::Usage(format!("{}: cannot tell the format; use --input-format", path.display()))
            })?,
        };
        let rec = load_counts(path, format).with_context(|| format!("reading {}", path.display()))?;
        let n = rec.n_settings();
        if let Some((prev, _)) = records.get(&n) {
            return Err(anyhow::anyhow!("{} and {} both hold N={n}", prev.display(), path.display()).into());
        }
        records.insert(n, (path.clone(), rec));
    }
    let d = records.values().next().map(|(_, r)| r.dim()).unwrap_or(0);
    if let Some((p, r)) = records.values().find(|(_, r)| r.dim() != d) {
        return Err(anyhow::anyhow!("{}: d={} differs from d={d} in the other files", p.display(), r.dim()).into());
    }

    let base = options(&a.errors);
    let mut estimates: BTreeMap<usize, Estimate> = BTreeMap::new();
    for (&n, (path, rec)) in &records {
        let opts = EstimateOptions {
            seed: estimate_seed(base.seed, n),
            ..base
        };
        let e = estimate_in(rec, &opts).with_context(|| format!("estimating I_N from {}", path.display()))?;
        estimates.insert(n, e);
    }
    let scan = scan_minimum(d, estimates.iter().map(|(&n, e)| (n, (e.value, e.stderr))).collect())?;
    let text = match a.format {
        Format::Json => to_json(&summarize(d, &scan, a.errors.method)?)?,
        Format::Csv => scan_csv(d, &scan)?,
    };
    emit(a.out.as_deref(), &text)?;
    Ok(())
}

#[derive(Serialize)]
struct CurveRow {
    i_cap: f64,
    max_delta: f64,
    bound: f64,
    duality_gap: f64,
}

fn polytope(d: usize, n: usize, z: usize, caps: &[f64], out: &Output) -> Result<(), Failure> {
    if z == 0 {
        return Err(Failure::Usage("z must be at least 1".into()));
    }
    let vars = d * d * z * n * n;
    if vars > LP_VARIABLE_GUARD {
        return Err(Failure::Usage(format!(
            "LP would have {vars} variables; the limit is {LP_VARIABLE_GUARD}"
        )));
    }
    if let Some(c) = caps.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Failure::Usage(format!("cap {c} must be finite and nonnegative")));
    }
    BoxShape::new(d, z, n, 1)?;
    let mut rows = Vec::with_capacity(caps.len());
    for &i_cap in caps {
        let report = lp_max_delta(&LpProblem::new(d, n, z, i_cap)?).map_err(|e| match e {
            chainbell::Error::TooLarge { .. } => Failure::Usage(e.to_string()),
            other => other.into(),
        })?;
        if report.max_delta > report.bound + 1e-7 {
            return Err(anyhow::anyhow!(
                "LP optimum {} exceeds the bound {} at cap {i_cap}",
                report.max_delta,
                report.bound
            )
            .into());
        }
        rows.push(CurveRow {
            i_cap,
            max_delta: report.max_delta,
            bound: report.bound,
            duality_gap: report.max_duality_gap,
        });
    }
    let text = match out.format {
        Format::Json => to_json(&serde_json::json!({ "d": d, "N": n, "z": z, "points": rows }))?,
        Format::Csv => {
            let mut s = format!("# d={d} N={n} z={z}\ni_cap,max_delta,bound\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{}", r.i_cap, r.max_delta, r.bound);
            }
            s
        }
    };
    emit(out.out.as_deref(), &text)?;
    Ok(())
}
