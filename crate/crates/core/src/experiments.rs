//! Batch simulation over stimulus lists, condition reports, active-node
//! statistics, benchmarks and synthetic lexicons.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ordered_sum, run_engine, ActiveSetEngine, Engine, PoolCounts, RunOutput, TraceMode};
use crate::error::{Error, Result};
use crate::fitting::pearson;
use crate::lexicon::{Lexicon, LexiconEntry, LexiconOptions};
use crate::network::Network;
use crate::params::Parameters;
use crate::reference::{DenseEngine, DenseNetwork, DenseOptions};
use crate::tasks::{monitor_for, NeverDecide, Task};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StimulusRecord {
    pub stimulus: String,
    pub source_lang: String,
    pub target_lang: Option<String>,
    pub task: Task,
    pub condition: Option<String>,
    pub rt_ms: Option<f64>,
}

/// Values used for columns a stimulus file leaves empty or omits.
#[derive(Debug, Clone, Default)]
pub struct RecordDefaults {
    pub task: Option<Task>,
    pub source_lang: Option<String>,
    pub target_lang: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    stimulus: String,
    #[serde(default)]
    source_lang: Option<String>,
    #[serde(default)]
    target_lang: Option<String>,
    #[serde(default)]
    task: Option<String>,
    #[serde(default)]
    condition: Option<String>,
    #[serde(default)]
    rt_ms: Option<String>,
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|s| !s.is_empty())
}

/// Parses a stimulus CSV with header
/// `stimulus,source_lang,target_lang,task,condition,rt_ms`. Every column
/// but `stimulus` may be omitted or left empty.
pub fn parse_stimuli(text: &str, defaults: &RecordDefaults) -> Result<Vec<StimulusRecord>> {
    read_stimuli(text.as_bytes(), defaults)
}

pub fn read_stimuli<R: Read>(reader: R, defaults: &RecordDefaults) -> Result<Vec<StimulusRecord>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = csv.headers()?.clone();
    if !headers.iter().any(|h| h == "stimulus") {
        return Err(Error::Parse { line: 1, message: "header must name a `stimulus` column".into() });
    }
    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err = |message: String| Error::Parse { line, message };
        let raw: RawRecord = row.deserialize(Some(&headers)).map_err(|e| parse_err(e.to_string()))?;
        if raw.stimulus.is_empty() {
            return Err(parse_err("empty stimulus".into()));
        }
        let task = match non_empty(raw.task) {
            Some(t) => t.parse::<Task>().map_err(|e| parse_err(e.to_string()))?,
            None => defaults.task.ok_or_else(|| parse_err("no task given and no default task".into()))?,
        };
        let source_lang = non_empty(raw.source_lang)
            .or_else(|| defaults.source_lang.clone())
            .ok_or_else(|| parse_err("no source language given and no default".into()))?;
        let target_lang = non_empty(raw.target_lang).or_else(|| defaults.target_lang.clone());
        let rt_ms = match non_empty(raw.rt_ms) {
            Some(s) => {
                let v: f64 = s.parse().map_err(|_| parse_err(format!("rt_ms {s:?} is not a number")))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(parse_err(format!("rt_ms must be positive, got {v}")));
                }
                Some(v)
            }
            None => None,
        };
        out.push(StimulusRecord {
            stimulus: raw.stimulus,
            source_lang,
            target_lang,
            task,
            condition: non_empty(raw.condition),
            rt_ms,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub jobs: usize,
    pub trace: TraceMode,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { jobs: 1, trace: TraceMode::Off }
    }
}

#[derive(Debug)]
pub struct BatchRow {
    pub result: Result<RunOutput>,
}

fn run_record<E: Engine + ?Sized>(
    engine: &E,
    record: &StimulusRecord,
    params: &Parameters,
    trace: TraceMode,
) -> Result<RunOutput> {
    let mut monitor = monitor_for(record.task, engine.network(), &record.source_lang, record.target_lang.as_deref())?;
    run_engine(engine, &record.stimulus, monitor.as_mut(), params, trace)
}

fn map_rows<T, F>(jobs: usize, records: &[StimulusRecord], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&StimulusRecord) -> T + Sync,
{
    if jobs <= 1 {
        return records.iter().map(&f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| records.par_iter().map(&f).collect()),
        Err(_) => records.iter().map(&f).collect(),
    }
}

/// One outcome per record in input order. Row failures are kept in place.
pub fn run_batch_with<E: Engine + Sync + ?Sized>(
    engine: &E,
    records: &[StimulusRecord],
    params: &Parameters,
    options: &BatchOptions,
) -> Vec<BatchRow> {
    map_rows(options.jobs, records, |r| BatchRow { result: run_record(engine, r, params, options.trace) })
}

pub fn run_batch(
    network: &Network,
    records: &[StimulusRecord],
    params: &Parameters,
    options: &BatchOptions,
) -> Vec<BatchRow> {
    run_batch_with(&ActiveSetEngine::new(network), records, params, options)
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `stimulus,task,source_lang,target_lang,condition,response_kind,response_symbol,cycles,rt_pred,n_rejected,error`
pub fn outcomes_csv(records: &[StimulusRecord], rows: &[BatchRow]) -> String {
    let header = [
        "stimulus",
        "task",
        "source_lang",
        "target_lang",
        "condition",
        "response_kind",
        "response_symbol",
        "cycles",
        "rt_pred",
        "n_rejected",
        "error",
    ];
    csv_string(
        &header,
        records.iter().zip(rows).map(|(rec, row)| {
            let mut cells = vec![
                rec.stimulus.clone(),
                rec.task.code().to_string(),
                rec.source_lang.clone(),
                opt(rec.target_lang.as_ref()),
                opt(rec.condition.as_ref()),
            ];
            match &row.result {
                Ok(out) => {
                    let o = &out.outcome;
                    cells.extend([
                        o.response.kind().to_string(),
                        opt(o.response.symbol()),
                        o.cycle.to_string(),
                        o.rt_pred.to_string(),
                        o.diagnostics.rejected.len().to_string(),
                        String::new(),
                    ]);
                }
                Err(e) => {
                    cells.extend([
                        "ERROR".to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        e.to_string(),
                    ]);
                }
            }
            cells
        }),
    )
}

/// Mean active-set sizes by pool.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PoolMeans {
    pub ortho: f64,
    pub phono: f64,
    pub sem: f64,
    pub lang: f64,
}

impl PoolMeans {
    pub fn total(&self) -> f64 {
        self.ortho + self.phono + self.sem + self.lang
    }

    fn mean(counts: &[PoolCounts]) -> Self {
        if counts.is_empty() {
            return Self::default();
        }
        let n = counts.len() as f64;
        let avg = |f: fn(&PoolCounts) -> u32| counts.iter().map(|c| f64::from(f(c))).sum::<f64>() / n;
        Self { ortho: avg(|c| c.ortho), phono: avg(|c| c.phono), sem: avg(|c| c.sem), lang: avg(|c| c.lang) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaStats {
    pub gamma: f64,
    /// Means at the final cycle.
    pub final_cycle: PoolMeans,
    /// Means after each cycle, `1..=max_cycles`.
    pub curve: Vec<PoolMeans>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveStats {
    pub stimuli: usize,
    pub rows: Vec<GammaStats>,
}

impl ActiveStats {
    /// `gamma,ortho,phono,sem,lang,total`
    pub fn summary_csv(&self) -> String {
        csv_string(
            &["gamma", "ortho", "phono", "sem", "lang", "total"],
            self.rows.iter().map(|r| means_cells(vec![r.gamma.to_string()], &r.final_cycle)),
        )
    }

    /// `gamma,cycle,ortho,phono,sem,lang,total`
    pub fn curve_csv(&self) -> String {
        csv_string(
            &["gamma", "cycle", "ortho", "phono", "sem", "lang", "total"],
            self.rows.iter().flat_map(|r| {
                r.curve
                    .iter()
                    .enumerate()
                    .map(move |(i, m)| means_cells(vec![r.gamma.to_string(), (i + 1).to_string()], m))
            }),
        )
    }
}

fn means_cells(mut prefix: Vec<String>, m: &PoolMeans) -> Vec<String> {
    prefix.extend([m.ortho, m.phono, m.sem, m.lang, m.total()].iter().map(f64::to_string));
    prefix
}

/// Runs every stimulus to `max_cycles` without a decision for each gamma
/// (applied to OO_gamma and PP_gamma) and averages active-set sizes.
pub fn active_node_stats(
    network: &Network,
    records: &[StimulusRecord],
    gammas: &[f64],
    params: &Parameters,
    jobs: usize,
) -> Result<ActiveStats> {
    if let Some(g) = gammas.iter().find(|g| g.is_nan() || **g > 0.0) {
        return Err(Error::Domain(format!("inhibition gammas must be <= 0, got {g}")));
    }
    let engine = ActiveSetEngine::new(network);
    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let p = params.clone().with_inhibition(gamma);
        p.validate()?;
        let runs = map_rows(jobs, records, |r| run_engine(&engine, &r.stimulus, &mut NeverDecide, &p, TraceMode::Off));
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let cycles = p.max_cycles as usize;
        let curve: Vec<PoolMeans> = (0..cycles)
            .map(|c| {
                let at: Vec<PoolCounts> = runs.iter().map(|r| r.active_counts[c]).collect();
                PoolMeans::mean(&at)
            })
            .collect();
        let final_cycle = curve.last().copied().unwrap_or_default();
        rows.push(GammaStats { gamma, final_cycle, curve });
    }
    Ok(ActiveStats { stimuli: records.len(), rows })
}

/// Active-node updates (active-set size summed over cycles) across the
/// records, each run for the full `max_cycles` without a decision.
pub fn active_node_updates(
    network: &Network,
    records: &[StimulusRecord],
    params: &Parameters,
    jobs: usize,
) -> Result<u64> {
    let engine = ActiveSetEngine::new(network);
    let runs = map_rows(jobs, records, |r| run_engine(&engine, &r.stimulus, &mut NeverDecide, params, TraceMode::Off));
    runs.into_iter().map(|r| r.map(|o| active_updates(&o))).sum()
}

/// Active-set size summed over the cycles of one run.
pub fn active_updates(run: &RunOutput) -> u64 {
    run.active_counts.iter().map(|c| u64::from(c.total())).sum()
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    Some(ordered_sum(&mut v) / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub condition: String,
    /// Responded trials.
    pub n: usize,
    pub n_timeout: usize,
    pub mean_rt: Option<f64>,
    pub mean_cycles: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub conditions: Vec<ConditionRow>,
    /// Correlation over all responded items with an RT.
    pub by_item: ConditionRow,
    /// Correlation over the per-condition means.
    pub by_condition: ConditionRow,
}

impl ConditionReport {
    /// `condition,n,n_timeout,mean_rt,mean_cycles,r`
    pub fn to_csv(&self) -> String {
        let rows = self.conditions.iter().chain([&self.by_item, &self.by_condition]);
        csv_string(
            &["condition", "n", "n_timeout", "mean_rt", "mean_cycles", "r"],
            rows.map(|r| {
                vec![
                    r.condition.clone(),
                    r.n.to_string(),
                    r.n_timeout.to_string(),
                    opt(r.mean_rt),
                    opt(r.mean_cycles),
                    opt(r.r),
                ]
            }),
        )
    }
}

/// Label used for records without a condition.
pub const NO_CONDITION: &str = "-";

#[derive(Default)]
struct Cell {
    n: usize,
    n_timeout: usize,
    cycles: Vec<f64>,
    rts: Vec<f64>,
    pairs: Vec<(f64, f64)>,
}

impl Cell {
    fn row(&self, condition: &str) -> ConditionRow {
        let mut pairs = self.pairs.clone();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        ConditionRow {
            condition: condition.to_string(),
            n: self.n,
            n_timeout: self.n_timeout,
            mean_rt: mean(&self.rts),
            mean_cycles: mean(&self.cycles),
            r: pearson(&xs, &ys).ok(),
        }
    }
}

/// Groups outcomes by condition. Non-responses and failed rows count as
/// timeouts and are left out of means and correlations.
pub fn condition_report(records: &[StimulusRecord], rows: &[BatchRow]) -> Result<ConditionReport> {
    if records.len() != rows.len() {
        return Err(Error::Validation(format!("{} records but {} outcomes", records.len(), rows.len())));
    }
    let mut cells: BTreeMap<&str, Cell> = BTreeMap::new();
    let mut all = Cell::default();
    for (rec, row) in records.iter().zip(rows) {
        let cell = cells.entry(rec.condition.as_deref().unwrap_or(NO_CONDITION)).or_default();
        match &row.result {
            Ok(out) if out.outcome.responded() => {
                let cycles = f64::from(out.outcome.cycle);
                for c in [&mut *cell, &mut all] {
                    c.n += 1;
                    c.cycles.push(cycles);
                    if let Some(rt) = rec.rt_ms {
                        c.rts.push(rt);
                        c.pairs.push((cycles, rt));
                    }
                }
            }
            _ => {
                cell.n_timeout += 1;
                all.n_timeout += 1;
            }
        }
    }
    let conditions: Vec<ConditionRow> = cells.iter().map(|(k, c)| c.row(k)).collect();
    let by_item = all.row("overall_by_item");
    let (xs, ys): (Vec<f64>, Vec<f64>) = conditions.iter().filter_map(|c| Some((c.mean_cycles?, c.mean_rt?))).unzip();
    let by_condition = ConditionRow {
        condition: "overall_by_condition".into(),
        n: xs.len(),
        n_timeout: 0,
        mean_rt: mean(&ys),
        mean_cycles: mean(&xs),
        r: pearson(&xs, &ys).ok(),
    };
    Ok(ConditionReport { conditions, by_item, by_condition })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    /// Active-set engine.
    Final,
    /// Dense all-pairs reference engine.
    Dense,
}

impl std::str::FromStr for EngineChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "final" => Ok(Self::Final),
            "dense" => Ok(Self::Dense),
            other => Err(Error::Config(format!("unknown engine {other:?} (expected final or dense)"))),
        }
    }
}

impl EngineChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::Final => "final",
            Self::Dense => "dense",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub engine: EngineChoice,
    pub stimuli: usize,
    pub repeats: usize,
    pub build_ms: f64,
    pub null_ms: f64,
    pub batch_mean_ms: f64,
    pub batch_min_ms: f64,
    pub batch_max_ms: f64,
    /// Mean batch time minus the null-input time, per stimulus.
    pub per_stimulus_ms: f64,
    /// Active-node updates summed over the batch (deterministic).
    pub active_updates: u64,
    /// Connection traversals, inhibition terms and node updates summed over
    /// the batch (deterministic).
    pub work: u64,
}

impl BenchmarkRow {
    pub const CSV_HEADER: [&'static str; 11] = [
        "engine",
        "stimuli",
        "repeats",
        "build_ms",
        "null_ms",
        "batch_mean_ms",
        "batch_min_ms",
        "batch_max_ms",
        "per_stimulus_ms",
        "active_updates",
        "work",
    ];

    pub fn cells(&self) -> Vec<String> {
        vec![
            self.engine.name().to_string(),
            self.stimuli.to_string(),
            self.repeats.to_string(),
            format!("{:.3}", self.build_ms),
            format!("{:.3}", self.null_ms),
            format!("{:.3}", self.batch_mean_ms),
            format!("{:.3}", self.batch_min_ms),
            format!("{:.3}", self.batch_max_ms),
            format!("{:.4}", self.per_stimulus_ms),
            self.active_updates.to_string(),
            self.work.to_string(),
        ]
    }
}

pub fn benchmark_csv(rows: &[BenchmarkRow]) -> String {
    csv_string(&BenchmarkRow::CSV_HEADER, rows.iter().map(BenchmarkRow::cells))
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn timed_batch<E: Engine + Sync + ?Sized>(
    engine: &E,
    records: &[StimulusRecord],
    params: &Parameters,
) -> Result<(f64, u64, u64)> {
    let start = Instant::now();
    let rows = run_batch_with(engine, records, params, &BatchOptions::default());
    let ms = millis(start);
    let (mut active, mut work) = (0, 0);
    for row in rows {
        let run = row.result?;
        active += active_updates(&run);
        work += run.work;
    }
    Ok((ms, active, work))
}

/// Times model construction, a null batch and the full batch, single
/// threaded. Wall-clock figures are machine-dependent.
pub fn benchmark(
    lexicon: &Lexicon,
    records: &[StimulusRecord],
    engine: EngineChoice,
    params: &Parameters,
    repeats: usize,
    dense_options: DenseOptions,
) -> Result<BenchmarkRow> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    params.validate()?;
    let (mut build, mut null, mut batch) = (Vec::new(), Vec::new(), Vec::new());
    let (mut active, mut work) = (0, 0);
    for _ in 0..repeats {
        let start = Instant::now();
        let (null_ms, (ms, a, w)) = match engine {
            EngineChoice::Final => {
                let net = Network::build(lexicon, params)?;
                build.push(millis(start));
                let e = ActiveSetEngine::new(&net);
                (timed_batch(&e, &[], params)?.0, timed_batch(&e, records, params)?)
            }
            EngineChoice::Dense => {
                let dense = DenseNetwork::build(lexicon, params, dense_options)?;
                build.push(millis(start));
                let e = DenseEngine::new(&dense);
                (timed_batch(&e, &[], params)?.0, timed_batch(&e, records, params)?)
            }
        };
        null.push(null_ms);
        batch.push(ms);
        active = a;
        work = w;
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let batch_mean = avg(&batch);
    let null_mean = avg(&null);
    let per_stimulus = if records.is_empty() { 0.0 } else { (batch_mean - null_mean) / records.len() as f64 };
    Ok(BenchmarkRow {
        engine,
        stimuli: records.len(),
        repeats,
        build_ms: avg(&build),
        null_ms: null_mean,
        batch_mean_ms: batch_mean,
        batch_min_ms: batch.iter().copied().fold(f64::INFINITY, f64::min),
        batch_max_ms: batch.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        per_stimulus_ms: per_stimulus,
        active_updates: active,
        work,
    })
}

const ONSETS: &[&str] = &["B", "D", "F", "G", "K", "L", "M", "N", "P", "R", "S", "T", "V", "W", "Z", "ST", "TR", "BR"];
const VOWELS: &[&str] = &["A", "E", "I", "O", "U", "EE", "OO", "AU"];

fn random_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(1..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
    }
    if rng.gen_bool(0.5) {
        w.push_str(ONSETS[rng.gen_range(0..12)]);
    }
    w
}

fn phonology(ortho: &str) -> String {
    ortho.to_lowercase().replace("ee", "e").replace("oo", "o").replace("au", "W")
}

/// Seeded random lexicon of `pairs` translation pairs. About a fifth of
/// the pairs are cognates differing in one letter; frequencies are
/// log-uniform on [1, 1000].
pub fn synthetic_lexicon(pairs: usize, seed: u64) -> Result<Lexicon> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut seen_a, mut seen_b) = (HashSet::new(), HashSet::new());
    let mut entries = Vec::with_capacity(pairs);
    while entries.len() < pairs {
        let a = random_word(&mut rng);
        let b = if rng.gen_bool(0.2) {
            let mut chars: Vec<char> = a.chars().collect();
            let i = rng.gen_range(0..chars.len());
            chars[i] = (b'A' + rng.gen_range(0..26u8)) as char;
            chars.into_iter().collect()
        } else {
            random_word(&mut rng)
        };
        if seen_a.contains(&a) || seen_b.contains(&b) {
            continue;
        }
        let freq = |rng: &mut ChaCha8Rng| (10f64.powf(rng.gen_range(0.0..3.0)) * 100.0).round() / 100.0;
        let (freq_a, freq_b) = (freq(&mut rng), freq(&mut rng));
        seen_a.insert(a.clone());
        seen_b.insert(b.clone());
        entries.push(LexiconEntry {
            phono_a: phonology(&a),
            ortho_a: a,
            freq_a,
            phono_b: phonology(&b),
            ortho_b: b,
            freq_b,
        });
    }
    Lexicon::from_entries(entries, &LexiconOptions::default())
}
