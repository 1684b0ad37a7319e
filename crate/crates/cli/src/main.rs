use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bilex_core::experiments::{
    active_node_stats, benchmark, benchmark_csv, condition_report, outcomes_csv, parse_stimuli, run_batch,
    BatchOptions, EngineChoice, RecordDefaults, StimulusRecord,
};
use bilex_core::fitting::{fit_inhibition, SearchConfig};
use bilex_core::reference::{prune_candidates, DenseOptions};
use bilex_core::{DuplicatePolicy, Error, Lexicon, LexiconOptions, Network, Parameters, Task, TraceMode};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser, Debug)]
#[command(name = "bilex", version, about = "Bilingual interactive-activation lexicon simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Run a stimulus list and write one outcome row per stimulus.
    Simulate(SimulateArgs),
    /// Translate a single word and print the response.
    Translate(TranslateArgs),
    /// Grid-search the inhibition parameters against reaction times.
    Fit(FitArgs),
    /// Mean active-node counts by pool over a sweep of inhibition values.
    Stats(StatsArgs),
    /// Time the active-set and dense engines on a stimulus list.
    Bench(BenchArgs),
    /// Write the constructed network as JSON or an edge list.
    DumpNetwork(DumpArgs),
    /// Count connections kept by a similarity threshold.
    Prune(PruneArgs),
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    /// Lexicon CSV (eight columns per translation pair).
    #[arg(long)]
    lexicon: PathBuf,
    /// Parameter file, one `NAME = VALUE` per line.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Override one parameter, e.g. `--set OO_gamma=-0.0001`. Repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    /// Tag of the first language in the lexicon.
    #[arg(long, default_value = "NL")]
    lang_a: String,
    /// Tag of the second language in the lexicon.
    #[arg(long, default_value = "EN")]
    lang_b: String,
    /// Keep repeated forms within a language as separate nodes.
    #[arg(long)]
    allow_duplicates: bool,
    /// Divide second-language frequencies by four.
    #[arg(long)]
    scale_l2: bool,
}

#[derive(Args, Debug, Serialize)]
struct StimulusArgs {
    /// Stimulus CSV: `stimulus,source_lang,target_lang,task,condition,rt_ms`.
    #[arg(long)]
    stimuli: PathBuf,
    /// Task for rows that leave it empty (LD, NAME or WT).
    #[arg(long)]
    task: Option<Task>,
    /// Source language for rows that leave it empty.
    #[arg(long)]
    source: Option<String>,
    /// Target language for rows that leave it empty.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct RunArgs {
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    #[serde(skip)]
    jobs: usize,
    /// Output file (standard output when absent).
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    stimuli: StimulusArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Write per-cycle activations of each trial to this CSV.
    #[arg(long)]
    #[serde(skip)]
    trace: Option<PathBuf>,
    /// Nodes per trial in the trace (0 traces every node above rest).
    #[arg(long, default_value_t = 6)]
    trace_top_k: usize,
    /// Write a per-condition report to this CSV.
    #[arg(long)]
    #[serde(skip)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct TranslateArgs {
    word: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "NL")]
    source: String,
    #[arg(long, default_value = "EN")]
    target: String,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    stimuli: StimulusArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Search domain as `LO:HI`.
    #[arg(long, default_value = "-1:0", allow_hyphen_values = true)]
    domain: String,
    /// Points per window.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Minimum improvement needed to keep narrowing.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Fit OO_gamma alone, holding PP_gamma at `--fixed-pp`.
    #[arg(long)]
    untied: bool,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    fixed_pp: f64,
    /// Write the summary JSON here instead of standard error.
    #[arg(long)]
    #[serde(skip)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct StatsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    stimuli: StimulusArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated inhibition values.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,-0.0001,-0.001,-0.01,-0.1,-0.2,-0.3,-0.4,-0.5"
    )]
    gammas: Vec<f64>,
    /// Write the per-cycle curves to this CSV.
    #[arg(long)]
    #[serde(skip)]
    curve: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    stimuli: StimulusArgs,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    /// `final`, `dense` or `both`.
    #[arg(long, default_value = "both")]
    engine: String,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Largest lexicon the dense engine accepts.
    #[arg(long)]
    dense_limit: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct DumpArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `json` or `csv` (edge list).
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PruneArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated similarity thresholds.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75")]
    thresholds: Vec<f64>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct InputFile {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a Command,
    parameters: &'a Parameters,
    lexicon: InputFile,
    stimuli: Option<InputFile>,
    deterministic: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Loaded {
    lexicon: Lexicon,
    lexicon_file: InputFile,
    params: Parameters,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(m: &ModelArgs) -> Result<Loaded> {
    let mut params = Parameters::default();
    if let Some(path) = &m.params {
        params.apply_file(&read(path)?).with_context(|| format!("in {}", path.display()))?;
    }
    for assignment in &m.set {
        params.apply_assignment(assignment)?;
    }
    params.validate()?;
    let text = read(&m.lexicon)?;
    let options = LexiconOptions {
        duplicates: if m.allow_duplicates { DuplicatePolicy::Allow } else { DuplicatePolicy::Reject },
        scale_l2: m.scale_l2,
        max_opb: None,
        language_a: m.lang_a.clone(),
        language_b: m.lang_b.clone(),
    };
    let lexicon = Lexicon::parse(&text, &options).with_context(|| format!("in {}", m.lexicon.display()))?;
    let lexicon_file = InputFile { path: m.lexicon.display().to_string(), sha256: sha256_hex(text.as_bytes()) };
    Ok(Loaded { lexicon, lexicon_file, params })
}

/// `fallback_task` fills rows for commands that ignore the task column.
fn load_stimuli(s: &StimulusArgs, fallback_task: Option<Task>) -> Result<(Vec<StimulusRecord>, InputFile)> {
    let text = read(&s.stimuli)?;
    let defaults =
        RecordDefaults { task: s.task.or(fallback_task), source_lang: s.source.clone(), target_lang: s.target.clone() };
    let records = parse_stimuli(&text, &defaults).with_context(|| format!("in {}", s.stimuli.display()))?;
    Ok((records, InputFile { path: s.stimuli.display().to_string(), sha256: sha256_hex(text.as_bytes()) }))
}

/// Output sink that prefixes every file with the manifest hash.
struct Output {
    hash: String,
    manifest_json: String,
}

impl Output {
    fn new(command: &Command, loaded: &Loaded, stimuli: Option<InputFile>, deterministic: bool) -> Self {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            parameters: &loaded.params,
            lexicon: InputFile { path: loaded.lexicon_file.path.clone(), sha256: loaded.lexicon_file.sha256.clone() },
            stimuli,
            deterministic,
        };
        let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        Self { hash: sha256_hex(manifest_json.as_bytes()), manifest_json }
    }

    fn write(&self, path: Option<&Path>, body: &str) -> Result<()> {
        let text = format!("# manifest sha256={}\n{body}", self.hash);
        match path {
            Some(path) => {
                fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
                let mut manifest_path = path.as_os_str().to_owned();
                manifest_path.push(".manifest.json");
                let json = format!("{}\n", self.manifest_json);
                fs::write(&manifest_path, json)
                    .with_context(|| format!("writing {}", Path::new(&manifest_path).display()))?;
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
            }
        }
        Ok(())
    }
}

fn parse_domain(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(':').context("domain must look like LO:HI")?;
    Ok((lo.trim().parse().context("domain lower bound")?, hi.trim().parse().context("domain upper bound")?))
}

fn simulate(cmd: &Command, a: &SimulateArgs) -> Result<()> {
    let loaded = load_model(&a.model)?;
    let (records, stim_file) = load_stimuli(&a.stimuli, None)?;
    let network = Network::build(&loaded.lexicon, &loaded.params)?;
    let trace = match (&a.trace, a.trace_top_k) {
        (None, _) => TraceMode::Off,
        (Some(_), 0) => TraceMode::AboveRest,
        (Some(_), k) => TraceMode::TopK(k),
    };
    let rows = run_batch(&network, &records, &loaded.params, &BatchOptions { jobs: a.run.jobs.max(1), trace });
    let out = Output::new(cmd, &loaded, Some(stim_file), true);
    out.write(a.run.out.as_deref(), &outcomes_csv(&records, &rows))?;
    if let Some(path) = &a.trace {
        let mut body = String::from("trial,stimulus,");
        let mut header_done = false;
        for (i, (rec, row)) in records.iter().zip(&rows).enumerate() {
            let Ok(run) = &row.result else { continue };
            let csv = run.trace.to_csv(&network);
            let mut lines = csv.lines();
            let header = lines.next().unwrap_or_default();
            if !header_done {
                body.push_str(header);
                body.push('\n');
                header_done = true;
            }
            for line in lines {
                body.push_str(&format!("{},{},{line}\n", i + 1, rec.stimulus));
            }
        }
        if !header_done {
            body.push_str("cycle,node_id,pool,language,symbol,activation\n");
        }
        out.write(Some(path), &body)?;
    }
    if let Some(path) = &a.report {
        out.write(Some(path), &condition_report(&records, &rows)?.to_csv())?;
    }
    Ok(())
}

fn translate(cmd: &Command, a: &TranslateArgs) -> Result<()> {
    let loaded = load_model(&a.model)?;
    let network = Network::build(&loaded.lexicon, &loaded.params)?;
    let record = StimulusRecord {
        stimulus: a.word.clone(),
        source_lang: a.source.clone(),
        target_lang: Some(a.target.clone()),
        task: Task::WordTranslation,
        condition: None,
        rt_ms: None,
    };
    let mut rows = run_batch(&network, std::slice::from_ref(&record), &loaded.params, &BatchOptions::default());
    let run = rows.remove(0).result?;
    let o = &run.outcome;
    let mut body = format!(
        "response: {}\nsymbol: {}\ncycles: {}\nrt_pred: {}\n",
        o.response.kind(),
        o.response.symbol().unwrap_or("-"),
        o.cycle,
        o.rt_pred
    );
    for r in &o.diagnostics.rejected {
        body.push_str(&format!("rejected: {} at cycle {} ({:?})\n", r.symbol, r.cycle, r.reason));
    }
    Output::new(cmd, &loaded, None, true).write(None, &body)
}

fn fit(cmd: &Command, a: &FitArgs) -> Result<()> {
    let loaded = load_model(&a.model)?;
    let (records, stim_file) = load_stimuli(&a.stimuli, None)?;
    let network = Network::build(&loaded.lexicon, &loaded.params)?;
    let (lower, upper) = parse_domain(&a.domain)?;
    let config = SearchConfig {
        lower,
        upper,
        n_points: a.n,
        epsilon: a.epsilon,
        tied: !a.untied,
        fixed_pp: a.fixed_pp,
        jobs: a.run.jobs.max(1),
        ..SearchConfig::default()
    };
    let result = fit_inhibition(&network, &records, &loaded.params, &config)?;
    let out = Output::new(cmd, &loaded, Some(stim_file), true);
    out.write(a.run.out.as_deref(), &result.log_csv())?;
    let summary = format!("{}\n", result.summary_json());
    match &a.summary {
        Some(path) => out.write(Some(path), &summary)?,
        None => eprint!("{summary}"),
    }
    Ok(())
}

fn stats(cmd: &Command, a: &StatsArgs) -> Result<()> {
    let loaded = load_model(&a.model)?;
    let (records, stim_file) = load_stimuli(&a.stimuli, Some(Task::LexicalDecision))?;
    let network = Network::build(&loaded.lexicon, &loaded.params)?;
    let stats = active_node_stats(&network, &records, &a.gammas, &loaded.params, a.run.jobs.max(1))?;
    let out = Output::new(cmd, &loaded, Some(stim_file), true);
    out.write(a.run.out.as_deref(), &stats.summary_csv())?;
    if let Some(path) = &a.curve {
        out.write(Some(path), &stats.curve_csv())?;
    }
    Ok(())
}

fn bench(cmd: &Command, a: &BenchArgs) -> Result<()> {
    let loaded = load_model(&a.model)?;
    let (records, stim_file) = load_stimuli(&a.stimuli, None)?;
    let engines = match a.engine.as_str() {
        "both" => vec![EngineChoice::Final, EngineChoice::Dense],
        other => vec![other.parse::<EngineChoice>()?],
    };
    let dense = DenseOptions { max_entries: a.dense_limit, ..DenseOptions::default() };
    let rows = engines
        .into_iter()
        .map(|e| benchmark(&loaded.lexicon, &records, e, &loaded.params, a.repeats, dense))
        .collect::<Result<Vec<_>, _>>()?;
    // Wall-clock columns make benchmark output the one non-reproducible file.
    Output::new(cmd, &loaded, Some(stim_file), false).write(a.out.as_deref(), &benchmark_csv(&rows))
}

fn dump_network(cmd: &Command, a: &DumpArgs) -> Result<()> {
    let loaded = load_model(&a.model)?;
    let network = Network::build(&loaded.lexicon, &loaded.params)?;
    let body = match a.format.as_str() {
        "json" => format!("{}\n", network.to_json()),
        "csv" => network.to_edge_csv(),
        other => bail!(Error::Config(format!("unknown format {other:?} (expected json or csv)"))),
    };
    Output::new(cmd, &loaded, None, true).write(a.out.as_deref(), &body)
}

fn prune(cmd: &Command, a: &PruneArgs) -> Result<()> {
    let loaded = load_model(&a.model)?;
    let report = prune_candidates(&loaded.lexicon, &a.thresholds, &loaded.params)?;
    Output::new(cmd, &loaded, None, true).write(a.out.as_deref(), &report.to_csv())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cmd = &cli.command;
    match cmd {
        Command::Simulate(a) => simulate(cmd, a),
        Command::Translate(a) => translate(cmd, a),
        Command::Fit(a) => fit(cmd, a),
        Command::Stats(a) => stats(cmd, a),
        Command::Bench(a) => bench(cmd, a),
        Command::DumpNetwork(a) => dump_network(cmd, a),
        Command::Prune(a) => prune(cmd, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let internal = err.chain().any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_internal));
            ExitCode::from(if internal { 2 } else { 1 })
        }
    }
}
