//! The `vcnis` command line: CSV or simulated input, JSON or CSV reports.
//!
//! Every report carries `version`, `seed` and an echo of the parsed
//! configuration. Exit codes: 0 success, 2 usage, 3 input/schema, 4 numeric.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::group_scad::{LambdaGrid, ScadConfig, ScadModel};
use crate::inis::{run_inis, InisConfig, InisResult, Variant};
use crate::marginal_screen::{
    correlation_scores, minimum_model_size, rank_descending, screen_all, ScreenMethod, ScreenReport,
};
use crate::permutation::{conditional_screen, ConditionalScreen, PermutationConfig};
use crate::simgen::{self, generate, median, metrics, robust_sd, Example, SimData, SimSpec};
use crate::spline_basis::SplineBasis;

pub const REPORT_VERSION: &str = "1";
pub const WORKERS_ENV: &str = "VCNIS_WORKERS";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser, Serialize)]
#[command(name = "vcnis", version, about = "Nonparametric independence screening for varying-coefficient models")]
pub struct Cli {
    /// Worker threads (defaults to $VCNIS_WORKERS, then all cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Marginal screening of every covariate.
    Screen(ScreenArgs),
    /// Conditional or greedy iterative screening with group-SCAD selection.
    Inis(InisArgs),
    /// Replicated simulation with per-replicate metrics and summary rows.
    Simulate(SimulateArgs),
    /// Times marginal screening on a simulated design.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimName {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long, conflicts_with = "sim", required_unless_present = "sim")]
    pub input: Option<PathBuf>,
    /// Response column name.
    #[arg(long, default_value = "Y")]
    pub response: String,
    /// Exposure column name.
    #[arg(long, default_value = "W")]
    pub exposure: String,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimArgs {
    /// Simulation design (used in place of --input).
    #[arg(long, value_enum)]
    pub sim: Option<SimName>,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub p: usize,
    /// Number of true covariates (ex1).
    #[arg(long, default_value_t = 4)]
    pub s: usize,
    #[arg(long, default_value_t = 0.0)]
    pub t1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t2: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BasisArgs {
    #[arg(long = "basis-size", default_value_t = 7)]
    pub basis_size: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Include wall-clock timings (makes reports non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Select covariates with utility at least this value (accepts -inf).
    #[arg(long, allow_negative_numbers = true, allow_hyphen_values = true, group = "rule")]
    pub threshold: Option<f64>,
    /// Select the top-k covariates.
    #[arg(long = "top-k", group = "rule")]
    pub top_k: Option<usize>,
    /// Threshold by (conditional, when K > 0) permutation.
    #[arg(long, group = "rule")]
    pub permutation: bool,
    #[arg(long = "K", default_value_t = 0)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long = "num-permutations", default_value_t = 1)]
    pub num_permutations: usize,
    /// Scale each covariate to zero mean and unit variance first.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MethodArgs {
    #[arg(long, default_value = "conditional")]
    pub variant: String,
    #[arg(long = "K", default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value_t = 1)]
    pub p0: usize,
    #[arg(long = "num-permutations", default_value_t = 1)]
    pub num_permutations: usize,
    /// Cap on the selected set (default floor(n / (L log n))).
    #[arg(long)]
    pub zeta: Option<usize>,
    #[arg(long = "max-iter", default_value_t = 20)]
    pub max_iter: usize,
    /// Comma-separated lambda values (default: automatic 30-point grid).
    #[arg(long = "lambda-grid", value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3.7)]
    pub a: f64,
}

impl MethodArgs {
    pub fn to_config(&self, seed: u64) -> Result<InisConfig> {
        let variant: Variant = self.variant.parse()?;
        let lambda_grid = match &self.lambda_grid {
            Some(g) => LambdaGrid::Explicit(g.clone()),
            None => LambdaGrid::default(),
        };
        let cfg = InisConfig {
            variant,
            k: self.k,
            p0: self.p0,
            q: self.q,
            num_permutations: self.num_permutations,
            zeta: self.zeta,
            max_iter: self.max_iter,
            seed,
            scad: ScadConfig {
                a: self.a,
                lambda_grid,
                ..ScadConfig::default()
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InisArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// Run the iterative method chosen by --variant.
    Select,
    /// Minimum model sizes of marginal spline screening and correlation screening.
    Mms,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, value_enum, default_value_t = SimMode::Select)]
    pub mode: SimMode,
    /// Number of replicates (20 at desk scale; 200 reproduces the full protocol).
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the training sample of replicate 0 as CSV.
    #[arg(long = "dump-train")]
    pub dump_train: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub p: usize,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code. Diagnostics go to stderr.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidSpec(_) => EXIT_USAGE,
        Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_)
        | Error::Schema(_)
        | Error::MissingColumns(_)
        | Error::NonFinite { .. }
        | Error::LengthMismatch { .. } => EXIT_INPUT,
        Error::IterationFailed { source, .. } => exit_code(source),
        _ => EXIT_NUMERIC,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let workers = cli.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Screen(a) => cmd_screen(a, cli),
        Command::Inis(a) => cmd_inis(a, cli),
        Command::Simulate(a) => cmd_simulate(a, cli),
        Command::Bench(a) => cmd_bench(a),
    })
}

/// Reads a headered numeric CSV and assigns column roles.
pub fn read_dataset(
    path: &Path,
    response: &str,
    exposure: &str,
    covariates: Option<&[String]>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in {}", path.display())))
    };
    let yi = find(response)?;
    let wi = find(exposure)?;
    let xi: Vec<usize> = match covariates {
        Some(names) => names.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != yi && i != wi).collect(),
    };
    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut cols = vec![Vec::new(); xi.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            let field = rec.get(i).unwrap_or("");
            field.parse::<f64>().map_err(|_| {
                Error::Schema(format!(
                    "row {}, column '{}': cannot parse '{field}' as a number",
                    r + 2,
                    headers[i]
                ))
            })
        };
        y.push(get(yi)?);
        w.push(get(wi)?);
        for (c, &i) in cols.iter_mut().zip(&xi) {
            c.push(get(i)?);
        }
    }
    let names = xi.iter().map(|&i| headers[i].clone()).collect();
    Dataset::new(y, w, cols)?.with_names(names)
}

pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["Y".to_string(), "W".to_string()];
    header.extend((0..data.p()).map(|j| data.name(j)));
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![fmt_num(data.y()[i]), fmt_num(data.w()[i])];
        row.extend((0..data.p()).map(|j| fmt_num(data.column(j)[i])));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

impl SimArgs {
    pub fn example(&self) -> Option<Example> {
        self.sim.map(|s| match s {
            SimName::Ex1 => Example::Ex1 { s: self.s },
            SimName::Ex2 => Example::Ex2 { t1: self.t1, t2: self.t2 },
            SimName::Ex3 => Example::Ex3 { t1: self.t1, t2: self.t2 },
            SimName::Ex4 => Example::Ex4 { t1: self.t1, t2: self.t2 },
        })
    }
}

enum Input {
    File(Dataset),
    Sim(SimData),
}

impl Input {
    fn train(&self) -> &Dataset {
        match self {
            Input::File(d) => d,
            Input::Sim(s) => &s.train,
        }
    }
}

fn load_input(data: &DataArgs, seed: u64) -> Result<Input> {
    match (&data.input, data.sim.example()) {
        (Some(path), _) => Ok(Input::File(read_dataset(
            path,
            &data.response,
            &data.exposure,
            data.covariates.as_deref(),
        )?)),
        (None, Some(ex)) => Ok(Input::Sim(generate(&SimSpec::new(ex, data.sim.n, data.sim.p, seed))?)),
        (None, None) => Err(Error::InvalidConfig("either --input or --sim is required".into())),
    }
}

fn envelope(command: &str, seed: u64, cli: &Cli, result: Value) -> Result<Value> {
    Ok(json!({
        "version": REPORT_VERSION,
        "command": command,
        "seed": seed,
        "config": serde_json::to_value(cli)?,
        "result": result,
    }))
}

fn emit(out: &OutputArgs, body: &[u8]) -> Result<()> {
    match &out.out {
        Some(p) => {
            let mut f = File::create(p)?;
            f.write_all(body)?;
        }
        None => {
            let mut s = io::stdout().lock();
            s.write_all(body)?;
        }
    }
    Ok(())
}

fn emit_json(out: &OutputArgs, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    emit(out, s.as_bytes())
}

fn name(data: &Dataset, j: usize) -> String {
    data.name(j)
}

pub fn cmd_screen(args: &ScreenArgs, cli: &Cli) -> Result<()> {
    let started = Instant::now();
    let input = load_input(&args.data, args.seed)?;
    let data = if args.standardize {
        input.train().standardized()
    } else {
        input.train().clone()
    };
    let basis = SplineBasis::build(data.w(), args.basis.basis_size, args.basis.degree)?;
    let mut report = screen_all(&data, &basis)?;
    let mut conditional: Option<ConditionalScreen> = None;
    if let Some(tau) = args.threshold {
        report.apply_threshold(tau, ScreenMethod::FixedThreshold, None);
    } else if let Some(k) = args.top_k {
        report.apply_top_k(k);
    } else if args.permutation {
        let cfg = PermutationConfig {
            q: args.q,
            num_permutations: args.num_permutations,
            seed: args.seed,
            k: args.k,
        };
        let cs = conditional_screen(&data, &basis, &cfg)?;
        report.threshold = Some(cs.threshold.tau);
        report.selected = cs.selected.clone();
        report.seed = Some(args.seed);
        report.method = if args.k == 0 {
            ScreenMethod::Permutation
        } else {
            ScreenMethod::ConditionalPermutation
        };
        conditional = Some(cs);
    }
    let elapsed = started.elapsed();

    match args.output.format {
        Format::Json => {
            let mut result = screen_json(&data, &report);
            if let Some(cs) = &conditional {
                result["conditioning"] = json!(cs.conditioning);
                result["conditional_scores"] = cs
                    .threshold
                    .candidates
                    .iter()
                    .zip(&cs.threshold.scores)
                    .map(|(&j, &s)| json!({"index": j, "u_star": s}))
                    .collect();
            }
            if args.output.timing {
                result["timing_ms"] = json!(elapsed.as_secs_f64() * 1e3);
            }
            emit_json(&args.output, &envelope("screen", args.seed, cli, result)?)
        }
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(["index", "name", "u_hat", "v_hat", "rank", "selected", "flagged"])?;
            let mut rank = vec![0; report.p()];
            for (r, &j) in report.ranking.iter().enumerate() {
                rank[j] = r + 1;
            }
            for j in 0..report.p() {
                wtr.write_record([
                    j.to_string(),
                    name(&data, j),
                    fmt_num(report.scores[j]),
                    fmt_num(report.rss[j]),
                    rank[j].to_string(),
                    report.selected.contains(&j).to_string(),
                    report.flagged.contains(&j).to_string(),
                ])?;
            }
            let body = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            emit(&args.output, &body)
        }
    }
}

fn screen_json(data: &Dataset, report: &ScreenReport) -> Value {
    let mut rank = vec![0; report.p()];
    for (r, &j) in report.ranking.iter().enumerate() {
        rank[j] = r + 1;
    }
    let covariates: Vec<Value> = (0..report.p())
        .map(|j| {
            json!({
                "index": j,
                "name": name(data, j),
                "u_hat": report.scores[j],
                "v_hat": report.rss[j],
                "rank": rank[j],
                "flagged": report.flagged.contains(&j),
            })
        })
        .collect();
    json!({
        "n": data.n(),
        "p": data.p(),
        "method": report.method,
        "threshold": report.threshold,
        "ranking": report.ranking,
        "selected": report.selected,
        "selected_names": report.selected.iter().map(|&j| name(data, j)).collect::<Vec<_>>(),
        "flagged": report.flagged,
        "covariates": covariates,
    })
}

fn model_json(data: &Dataset, model: &ScadModel) -> Value {
    json!({
        "lambda_star": model.lambda_star,
        "bic": model.bic,
        "sigma2_hat": model.sigma2_hat,
        "overparameterized": model.overparameterized,
        "path": model.path,
        "gamma0": model.gamma0,
        "groups": model.gammas.iter().map(|(&j, g)| json!({"index": j, "name": name(data, j), "gamma": g})).collect::<Vec<_>>(),
    })
}

pub fn cmd_inis(args: &InisArgs, cli: &Cli) -> Result<()> {
    let cfg = args.method.to_config(args.seed)?;
    let started = Instant::now();
    let input = load_input(&args.data, args.seed)?;
    let data = input.train();
    let basis = SplineBasis::build(data.w(), args.basis.basis_size, args.basis.degree)?;
    let res = run_inis(data, &basis, &cfg)?;
    let elapsed = started.elapsed();

    let mut result = json!({
        "n": data.n(),
        "p": data.p(),
        "variant": cfg.variant,
        "selected": res.selected,
        "selected_names": res.selected.iter().map(|&j| name(data, j)).collect::<Vec<_>>(),
        "model": model_json(data, &res.model),
        "trace": res.trace,
    });
    if let Input::Sim(sim) = &input {
        let m = metrics(&res.selected, &sim.true_support, &res.model, &basis, &sim.test);
        result["evaluation"] = json!({
            "true_support": sim.true_support,
            "tp": m.tp,
            "fp": m.fp,
            "pe": m.pe,
            "snr": sim.snr,
        });
    }
    if args.output.timing {
        result["timing_ms"] = json!(elapsed.as_secs_f64() * 1e3);
    }
    emit_json(&args.output, &envelope("inis", args.seed, cli, result)?)
}

/// One row of a simulation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub rep: usize,
    pub seed: u64,
    pub tp: Option<usize>,
    pub fp: Option<usize>,
    pub pe: Option<f64>,
    pub size: Option<usize>,
    pub iterations: Option<usize>,
    pub mms_nis: Option<usize>,
    pub mms_sis: Option<usize>,
}

/// Runs one replicate of `spec` under `mode`.
pub fn simulate_replicate(
    spec: &SimSpec,
    rep: usize,
    basis_args: &BasisArgs,
    mode: SimMode,
    cfg: &InisConfig,
) -> Result<ReplicateRow> {
    let spec = spec.replicate(rep as u64);
    let sim = generate(&spec)?;
    let basis = SplineBasis::build(sim.train.w(), basis_args.basis_size, basis_args.degree)?;
    let mut row = ReplicateRow {
        rep,
        seed: spec.seed,
        tp: None,
        fp: None,
        pe: None,
        size: None,
        iterations: None,
        mms_nis: None,
        mms_sis: None,
    };
    match mode {
        SimMode::Select => {
            let cfg = InisConfig {
                seed: spec.seed,
                ..cfg.clone()
            };
            let res: InisResult = run_inis(&sim.train, &basis, &cfg)?;
            let m = metrics(&res.selected, &sim.true_support, &res.model, &basis, &sim.test);
            row.tp = Some(m.tp);
            row.fp = Some(m.fp);
            row.pe = Some(m.pe);
            row.size = Some(res.selected.len());
            row.iterations = Some(res.trace.iterations.len());
        }
        SimMode::Mms => {
            if sim.true_support.is_empty() {
                return Err(Error::InvalidSpec("minimum model size needs a nonempty true support".into()));
            }
            let r = screen_all(&sim.train, &basis)?;
            row.mms_nis = Some(minimum_model_size(&r.ranking, &sim.true_support)?);
            let sis = rank_descending(&correlation_scores(&sim.train));
            row.mms_sis = Some(minimum_model_size(&sis, &sim.true_support)?);
        }
    }
    Ok(row)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub stat: &'static str,
    pub tp: Option<f64>,
    pub fp: Option<f64>,
    pub pe: Option<f64>,
    pub size: Option<f64>,
    pub iterations: Option<f64>,
    pub mms_nis: Option<f64>,
    pub mms_sis: Option<f64>,
}

/// Median and robust standard deviation of each column (the latter only
/// with two or more replicates).
pub fn summarize(rows: &[ReplicateRow]) -> Vec<SummaryRow> {
    fn col(rows: &[ReplicateRow], f: impl Fn(&ReplicateRow) -> Option<f64>) -> Option<Vec<f64>> {
        rows.iter().map(f).collect()
    }
    let cols = [
        col(rows, |r| r.tp.map(|v| v as f64)),
        col(rows, |r| r.fp.map(|v| v as f64)),
        col(rows, |r| r.pe),
        col(rows, |r| r.size.map(|v| v as f64)),
        col(rows, |r| r.iterations.map(|v| v as f64)),
        col(rows, |r| r.mms_nis.map(|v| v as f64)),
        col(rows, |r| r.mms_sis.map(|v| v as f64)),
    ];
    let stat = |name: &'static str, f: &dyn Fn(&[f64]) -> Option<f64>| {
        let v: Vec<Option<f64>> = cols.iter().map(|c| c.as_deref().and_then(f)).collect();
        SummaryRow {
            stat: name,
            tp: v[0],
            fp: v[1],
            pe: v[2],
            size: v[3],
            iterations: v[4],
            mms_nis: v[5],
            mms_sis: v[6],
        }
    };
    vec![
        stat("median", &|c| (!c.is_empty()).then(|| median(c))),
        stat("robust_sd", &|c| robust_sd(c).ok()),
    ]
}

pub fn cmd_simulate(args: &SimulateArgs, cli: &Cli) -> Result<()> {
    let ex = args
        .sim
        .example()
        .ok_or_else(|| Error::InvalidConfig("simulate needs --sim".into()))?;
    if args.reps == 0 {
        return Err(Error::InvalidConfig("--reps must be at least 1".into()));
    }
    let cfg = args.method.to_config(args.seed)?;
    let spec = SimSpec::new(ex, args.sim.n, args.sim.p, args.seed);
    spec.validate()?;
    if let Some(path) = &args.dump_train {
        let sim = generate(&spec.replicate(0))?;
        write_dataset_csv(&sim.train, path)?;
    }
    let rows: Vec<ReplicateRow> = (0..args.reps)
        .into_par_iter()
        .map(|rep| simulate_replicate(&spec, rep, &args.basis, args.mode, &cfg))
        .collect::<Result<_>>()?;
    let summary = summarize(&rows);
    let snr = simgen::snr(&ex, 100_000, crate::rng::substream(args.seed, u64::MAX));

    match args.output.format {
        Format::Json => {
            let result = json!({
                "example": ex,
                "snr": snr,
                "replicates": rows,
                "summary": summary,
            });
            emit_json(&args.output, &envelope("simulate", args.seed, cli, result)?)
        }
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
            wtr.write_record(["row", "seed", "tp", "fp", "pe", "size", "iterations", "mms_nis", "mms_sis"])?;
            for r in &rows {
                wtr.write_record([
                    r.rep.to_string(),
                    r.seed.to_string(),
                    opt(r.tp.map(|v| v as f64)),
                    opt(r.fp.map(|v| v as f64)),
                    opt(r.pe),
                    opt(r.size.map(|v| v as f64)),
                    opt(r.iterations.map(|v| v as f64)),
                    opt(r.mms_nis.map(|v| v as f64)),
                    opt(r.mms_sis.map(|v| v as f64)),
                ])?;
            }
            for s in &summary {
                wtr.write_record([
                    s.stat.to_string(),
                    String::new(),
                    opt(s.tp),
                    opt(s.fp),
                    opt(s.pe),
                    opt(s.size),
                    opt(s.iterations),
                    opt(s.mms_nis),
                    opt(s.mms_sis),
                ])?;
            }
            let body = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            emit(&args.output, &body)
        }
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let spec = SimSpec::new(Example::Ex3 { t1: 0.0, t2: 0.0 }, args.n, args.p.max(4), args.seed);
    let sim = generate(&spec)?;
    let basis = SplineBasis::build(sim.train.w(), args.basis.basis_size, args.basis.degree)?;
    let mut times = Vec::with_capacity(args.repeats.max(1));
    for _ in 0..args.repeats.max(1) {
        let t = Instant::now();
        let r = screen_all(&sim.train, &basis)?;
        times.push(t.elapsed().as_secs_f64());
        std::hint::black_box(r);
    }
    let t = Instant::now();
    let cfg = InisConfig {
        seed: args.seed,
        ..InisConfig::default()
    };
    let res = run_inis(&sim.train, &basis, &cfg)?;
    let inis_secs = t.elapsed().as_secs_f64();
    let v = json!({
        "version": REPORT_VERSION,
        "command": "bench",
        "n": args.n,
        "p": spec.p,
        "workers": rayon::current_num_threads(),
        "screen_seconds": times,
        "screen_seconds_median": median(&times),
        "inis_seconds": inis_secs,
        "inis_selected": res.selected,
    });
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_defaults() {
        let cli = Cli::try_parse_from(["vcnis", "inis", "--sim", "ex3"]).unwrap();
        let Command::Inis(a) = &cli.command else { panic!() };
        assert_eq!(a.basis.basis_size, 7);
        assert_eq!(a.basis.degree, 3);
        assert_eq!(a.method.k, 5);
        assert_eq!(a.method.q, 1);
        assert_eq!(a.method.p0, 1);
        assert_eq!(a.method.a, 3.7);
        let cfg = a.method.to_config(0).unwrap();
        assert_eq!(cfg.variant, Variant::Conditional);
    }

    #[test]
    fn input_and_sim_are_exclusive() {
        assert!(Cli::try_parse_from(["vcnis", "screen", "--sim", "ex3", "--input", "a.csv"]).is_err());
        assert!(Cli::try_parse_from(["vcnis", "screen"]).is_err());
    }

    #[test]
    fn negative_infinite_threshold_parses() {
        let cli = Cli::try_parse_from(["vcnis", "screen", "--sim", "ex3", "--threshold=-inf"]).unwrap();
        let Command::Screen(a) = &cli.command else { panic!() };
        assert_eq!(a.threshold, Some(f64::NEG_INFINITY));
    }

    #[test]
    fn bad_variant_is_usage_error() {
        let cli = Cli::try_parse_from(["vcnis", "inis", "--sim", "ex3", "--variant", "lasso"]).unwrap();
        let Command::Inis(a) = &cli.command else { panic!() };
        let err = a.method.to_config(0).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
    }

    #[test]
    fn summary_of_one_replicate_is_that_replicate() {
        let row = ReplicateRow {
            rep: 0,
            seed: 1,
            tp: Some(4),
            fp: Some(1),
            pe: Some(1.25),
            size: Some(5),
            iterations: Some(2),
            mms_nis: None,
            mms_sis: None,
        };
        let s = summarize(std::slice::from_ref(&row));
        assert_eq!(s[0].tp, Some(4.0));
        assert_eq!(s[0].pe, Some(1.25));
        assert_eq!(s[0].size, Some(5.0));
        assert_eq!(s[0].mms_nis, None);
        assert_eq!(s[1].pe, None);
    }
}
