use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use psbo::bench::{self, BenchSpec, Method};
use psbo::config::SearchConfig;
use psbo::dataset::{load_dataset, Dataset, Format, LoadOptions};
use psbo::engine::{self, trace, TraceRecord};
use psbo::learnzoo::meter::ClockMode;
use psbo::learnzoo::model::TrainedModel;

#[derive(Parser)]
#[command(name = "psbo", version, about = "Joint algorithm, feature-selection and hyper-parameter search for classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search one dataset and write the report, trace and final model.
    Search(SearchArgs),
    /// Compare the search against random search and ablations on held-out data.
    Bench(BenchArgs),
    /// Predict labels for a CSV or ARFF file with a saved model.
    Predict(PredictArgs),
    /// Summarize or filter a trace file.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Wall,
    Virtual,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file with search settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    clock: Option<ClockArg>,
    /// Total cost allowed for the search.
    #[arg(long)]
    budget: Option<f64>,
    /// Switch a technique off (1-8); repeatable.
    #[arg(long = "technique-off", value_name = "N")]
    technique_off: Vec<u8>,
    /// Restrict the search to these algorithm ids (comma separated).
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<String>,
    /// Read these CSV columns as categorical; repeatable.
    #[arg(long)]
    categorical: Vec<String>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset files; repeatable. All share `--target`.
    #[arg(long)]
    data: Vec<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    /// Built-in generated datasets: car, yeast, credit, planted; repeatable.
    #[arg(long)]
    synthetic: Vec<String>,
    /// Number of seeds, 1..=N.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Methods to run: psbo, random-search, without-tN; repeatable.
    #[arg(long = "method")]
    methods: Vec<String>,
    #[arg(long, default_value = "psbo-bench")]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write predictions here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// A `trace.jsonl` file.
    #[arg(long)]
    trace: PathBuf,
    /// Print matching records as JSON lines instead of a summary.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    round: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search(a) => cmd_search(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Trace(a) => cmd_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.chain().any(|c| c.downcast_ref::<psbo::Error>().is_some_and(psbo::Error::is_usage))
                || e.downcast_ref::<UsageError>().is_some();
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn build_config(common: &Common) -> Result<SearchConfig> {
    let mut cfg = match &common.config {
        Some(p) => SearchConfig::load(p)?,
        None => SearchConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(c) = common.clock {
        cfg.clock = match c {
            ClockArg::Wall => ClockMode::Wall,
            ClockArg::Virtual => ClockMode::Virtual,
        };
    }
    if common.budget.is_some() {
        cfg.budget = common.budget;
    }
    for &t in &common.technique_off {
        if !cfg.technique_off.contains(&t) {
            cfg.technique_off.push(t);
        }
    }
    if !common.algorithms.is_empty() {
        cfg.algorithms = Some(common.algorithms.clone());
    }
    cfg.categorical.extend(common.categorical.iter().cloned());
    cfg.validate()?;
    Ok(cfg)
}

fn load(path: &Path, target: &str, categorical: &[String]) -> Result<Dataset> {
    let opts = LoadOptions { categorical: categorical.to_vec() };
    Ok(load_dataset(path, Format::from_path(path), target, &opts)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let mut cfg = build_config(&a.common)?;
    if a.data.is_some() {
        cfg.data = a.data;
    }
    if a.target.is_some() {
        cfg.target = a.target;
    }
    if a.out.is_some() {
        cfg.out = a.out;
    }
    let data = cfg.data.clone().ok_or_else(|| usage("missing --data"))?;
    let target = cfg.target.clone().ok_or_else(|| usage("missing --target"))?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("psbo-out"));
    let d = load(&data, &target, &cfg.categorical)?;
    let outcome = engine::run_search(&d, &cfg)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("report.json"), &outcome.report.to_json()?)?;
    write(&out.join("trace.jsonl"), &trace::to_jsonl(&outcome.trace)?)?;
    write(&out.join("model.json"), &outcome.model.to_json()?)?;
    let r = &outcome.report;
    println!("dataset      {} ({} rows, {} features, {} classes)", r.dataset.name, r.dataset.n, r.dataset.p, r.dataset.n_classes);
    println!("champion     {} [{}] via {}", r.champion.algorithm, r.champion.family, r.champion.method);
    match r.champion.cv_mean {
        Some(cv) => println!("cv error     {cv:.4} (previous estimate {:.4})", r.champion.prev_estimate),
        None => println!("estimate     {:.4}", r.champion.prev_estimate),
    }
    println!("tested       {} distinct combinations, {} tests", r.distinct_combinations, r.evaluations);
    println!("cost         {:.1}{}", r.total_cost, if r.truncated { " (budget reached)" } else { "" });
    println!("output       {}", out.display());
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let cfg = build_config(&a.common)?;
    let mut datasets = Vec::new();
    if !a.data.is_empty() {
        let target = a.target.clone().ok_or_else(|| usage("--data needs --target"))?;
        for p in &a.data {
            datasets.push(load(p, &target, &cfg.categorical)?);
        }
    }
    for s in &a.synthetic {
        datasets.push(match s.as_str() {
            "car" => psbo::synth::car_like(),
            "yeast" => psbo::synth::yeast_like(1484, 1),
            "credit" => psbo::synth::credit_like(1000, 1),
            "planted" => psbo::synth::planted_tree(900, 5, 0.05, 1),
            other => return Err(usage(format!("unknown synthetic dataset `{other}`; choose car, yeast, credit or planted"))),
        });
    }
    if datasets.is_empty() {
        return Err(usage("bench needs --data or --synthetic"));
    }
    if a.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let methods = if a.methods.is_empty() {
        vec![Method::Psbo, Method::RandomSearch]
    } else {
        a.methods.iter().map(|m| m.parse()).collect::<psbo::Result<Vec<Method>>>()?
    };
    let spec = BenchSpec { methods, seeds: (1..=a.seeds).collect(), base: cfg, ..BenchSpec::default() };
    let report = bench::run_bench(&datasets, &spec, |c| {
        eprintln!("{:<14} {:<14} seed {:<3} error {:.4} cost {:.1}", c.dataset, c.method.to_string(), c.seed, c.test_error, c.cost)
    })?;
    let traces = a.out.join("traces");
    std::fs::create_dir_all(&traces).with_context(|| format!("creating {}", traces.display()))?;
    for c in &report.cells {
        write(&traces.join(format!("{}-{}-{}.jsonl", c.dataset, c.method, c.seed)), &trace::to_jsonl(&c.trace)?)?;
    }
    write(&a.out.join("bench.json"), &serde_json::to_string_pretty(&report)?)?;
    write(&a.out.join("cells.csv"), &bench::cells_csv(&report.cells))?;
    println!("{}", bench::render_table(&report.summaries));
    println!("{}", report.baseline);
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let model = TrainedModel::from_json(&text)?;
    let labels = match Format::from_path(&a.data) {
        Format::Csv => {
            let input = std::fs::read_to_string(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
            model.predict_csv(&input)?
        }
        Format::Arff => model.predict_dataset(&load(&a.data, &model.target, &[])?)?,
    };
    let mut out = labels.join("\n");
    out.push('\n');
    match a.out {
        Some(p) => write(&p, &out)?,
        None => print!("{out}"),
    }
    Ok(())
}

fn cmd_trace(a: TraceArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
    let records = trace::from_jsonl(&text)?;
    let round_of = |r: &TraceRecord| -> Option<usize> { serde_json::to_value(r).ok()?.get("round")?.as_u64().map(|x| x as usize) };
    let selected: Vec<&TraceRecord> = records
        .iter()
        .filter(|r| a.round.map_or(true, |n| round_of(r) == Some(n)))
        .filter(|r| a.kind.as_deref().map_or(true, |k| r.kind() == k))
        .collect();
    if a.kind.is_some() {
        for r in selected {
            println!("{}", serde_json::to_string(r)?);
        }
        return Ok(());
    }
    if records.is_empty() {
        bail!("{} holds no trace records", a.trace.display());
    }
    let mut counts: std::collections::BTreeMap<(usize, &str), usize> = std::collections::BTreeMap::new();
    for r in &selected {
        *counts.entry((round_of(r).unwrap_or(0), r.kind())).or_default() += 1;
    }
    println!("{:<6} {:<12} {:>8}", "round", "kind", "records");
    for ((round, kind), n) in counts {
        println!("{round:<6} {kind:<12} {n:>8}");
    }
    println!("cost {:.1}, distinct {}", bench::trace_cost(&records), bench::trace_distinct(&records));
    Ok(())
}
