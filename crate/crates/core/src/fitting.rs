//! Pearson fitness and the window-halving grid search used to fit the
//! lateral-inhibition parameters against reaction times.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{run_batch, BatchOptions, StimulusRecord};
use crate::network::Network;
use crate::params::Parameters;

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::UndefinedCorrelation(format!("series lengths differ ({} vs {})", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("need at least 2 pairs, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub lower: f64,
    pub upper: f64,
    pub n_points: usize,
    /// Minimum improvement over the incumbent needed to keep iterating.
    pub epsilon: f64,
    /// Fit OO_gamma and PP_gamma as one value; otherwise PP_gamma is held
    /// at `fixed_pp` and only OO_gamma moves.
    pub tied: bool,
    pub fixed_pp: f64,
    pub max_iterations: usize,
    /// Worker threads for objective evaluations within an iteration.
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            lower: -1.0,
            upper: 0.0,
            n_points: 20,
            epsilon: 1e-4,
            tied: true,
            fixed_pp: 0.0,
            max_iterations: 64,
            jobs: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lower.is_finite() || !self.upper.is_finite() || self.lower >= self.upper {
            return Err(Error::Config(format!("domain [{}, {}] is empty", self.lower, self.upper)));
        }
        if self.n_points < 2 {
            return Err(Error::Config("n_points must be at least 2".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.max_iterations == 0 || self.jobs == 0 {
            return Err(Error::Config("max_iterations and jobs must be at least 1".into()));
        }
        if self.fixed_pp > 0.0 {
            return Err(Error::Config("fixed PP_gamma must be <= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub point: f64,
    /// `None` when the objective was undefined there (worst fitness).
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Iteration {
    pub window_lo: f64,
    pub window_hi: f64,
    pub samples: Vec<Sample>,
}

impl Iteration {
    fn best(&self) -> Option<Sample> {
        let mut best: Option<Sample> = None;
        for s in &self.samples {
            if let Some(f) = s.fitness {
                if best.and_then(|b| b.fitness).is_none_or(|bf| f > bf) {
                    best = Some(*s);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub best_value: f64,
    /// `None` only if the objective was undefined everywhere.
    pub best_fitness: Option<f64>,
    /// Index into `iterations` of the iteration that found the best point.
    pub best_iteration: usize,
    pub iterations: Vec<Iteration>,
}

impl FitResult {
    /// `iteration,window_lo,window_hi,point,fitness`
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iteration,window_lo,window_hi,point,fitness\n");
        for (i, it) in self.iterations.iter().enumerate() {
            for s in &it.samples {
                let fitness = s.fitness.map(|f| f.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{},{},{},{},{fitness}", i + 1, it.window_lo, it.window_hi, s.point);
            }
        }
        out
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary {
            best_value: f64,
            best_fitness: Option<f64>,
            best_iteration: usize,
            best_window: (f64, f64),
            iterations: usize,
            evaluations: usize,
        }
        let w = &self.iterations[self.best_iteration];
        serde_json::to_string_pretty(&Summary {
            best_value: self.best_value,
            best_fitness: self.best_fitness,
            best_iteration: self.best_iteration + 1,
            best_window: (w.window_lo, w.window_hi),
            iterations: self.iterations.len(),
            evaluations: self.iterations.iter().map(|i| i.samples.len()).sum(),
        })
        .expect("summary serializes")
    }
}

/// `n` equidistant points from `lo` in steps of `(hi - lo) / n`; `hi` itself
/// is not sampled.
pub fn window_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    (0..n).map(|k| lo + k as f64 * step).collect()
}

/// Half-width window centred on `centre`, moved back inside the domain
/// without shrinking it further.
fn next_window(centre: f64, width: f64, lower: f64, upper: f64) -> (f64, f64) {
    let half = width / 2.0;
    let mut lo = centre - half / 2.0;
    let mut hi = centre + half / 2.0;
    if lo < lower {
        hi += lower - lo;
        lo = lower;
    }
    if hi > upper {
        lo -= hi - upper;
        hi = upper;
    }
    (lo.max(lower), hi)
}

/// Maximizes `objective` over `[lower, upper]` by iterated window halving.
/// Non-finite objective values count as undefined (worst).
pub fn grid_search<F>(config: &SearchConfig, objective: F) -> Result<FitResult>
where
    F: Fn(f64) -> Option<f64> + Sync,
{
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let (mut lo, mut hi) = (config.lower, config.upper);
    let mut iterations: Vec<Iteration> = Vec::new();
    let mut incumbent: Option<(Sample, usize)> = None;

    for index in 0..config.max_iterations {
        let points = window_points(lo, hi, config.n_points);
        let samples: Vec<Sample> = pool.install(|| {
            points
                .par_iter()
                .map(|&point| Sample { point, fitness: objective(point).filter(|f| f.is_finite()) })
                .collect()
        });
        let it = Iteration { window_lo: lo, window_hi: hi, samples };
        let best = it.best();
        iterations.push(it);

        let improvement = match (best.and_then(|b| b.fitness), incumbent.and_then(|(s, _)| s.fitness)) {
            (Some(new), Some(old)) => new - old,
            (Some(_), None) => f64::INFINITY,
            (None, _) => f64::NEG_INFINITY,
        };
        if improvement > 0.0 || incumbent.is_none() {
            incumbent = Some((best.unwrap_or(iterations[index].samples[0]), index));
        }
        if index > 0 && improvement <= config.epsilon {
            break;
        }
        let centre = best.map(|b| b.point).unwrap_or((lo + hi) / 2.0);
        (lo, hi) = next_window(centre, hi - lo, config.lower, config.upper);
    }

    let (best, best_iteration) = incumbent.expect("at least one iteration runs");
    Ok(FitResult { best_value: best.point, best_fitness: best.fitness, best_iteration, iterations })
}

/// Parameters with the inhibition value `x` applied per the search mode.
pub fn inhibition_params(base: &Parameters, config: &SearchConfig, x: f64) -> Parameters {
    let mut p = base.clone();
    p.oo_gamma = x;
    p.pp_gamma = if config.tied { x } else { config.fixed_pp };
    p
}

/// Fitness of one parameter set: Pearson r between predicted and observed
/// RTs over records that have an RT and produced a response.
pub fn rt_fitness(network: &Network, records: &[StimulusRecord], params: &Parameters) -> Option<f64> {
    let rows = run_batch(network, records, params, &BatchOptions::default());
    let (mut predicted, mut observed) = (Vec::new(), Vec::new());
    for (record, row) in records.iter().zip(&rows) {
        if let (Some(rt), Ok(out)) = (record.rt_ms, &row.result) {
            if out.outcome.responded() {
                predicted.push(out.outcome.rt_pred);
                observed.push(rt);
            }
        }
    }
    pearson(&predicted, &observed).ok()
}

/// Grid-searches OO_gamma (and PP_gamma when tied) for the best RT fit.
pub fn fit_inhibition(
    network: &Network,
    records: &[StimulusRecord],
    params: &Parameters,
    config: &SearchConfig,
) -> Result<FitResult> {
    if config.upper > 0.0 {
        return Err(Error::Config("inhibition domain must lie at or below 0".into()));
    }
    if !records.iter().any(|r| r.rt_ms.is_some()) {
        return Err(Error::Validation("stimulus file has no rt_ms values to fit".into()));
    }
    params.validate()?;
    grid_search(config, |x| rt_fitness(network, records, &inhibition_params(params, config, x)))
}
