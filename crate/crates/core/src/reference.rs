//! Slow oracles: a dense engine with every lateral-inhibition link
//! materialized as a connection, and the co-activation pruning heuristic.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::dynamics::{run_engine, update_activation, Engine, Monitor, RunOutput, SimulationState, TraceMode};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::network::{input_weight, ConceptId, ConnectionKind, Network, NodeId, Pool};
use crate::params::Parameters;

/// Largest lexicon the dense engine accepts unless told otherwise.
pub const DENSE_MAX_ENTRIES: usize = 500;

#[derive(Debug, Clone, Copy)]
pub struct DenseOptions {
    /// `None` lifts the size guard.
    pub max_entries: Option<usize>,
    /// Adds a self-connection to every inhibited node.
    pub self_connections: bool,
}

impl Default for DenseOptions {
    fn default() -> Self {
        Self { max_entries: Some(DENSE_MAX_ENTRIES), self_connections: false }
    }
}

/// Incoming edges in compressed rows: `sources[offsets[i]..offsets[i + 1]]`.
#[derive(Debug, Clone, Default)]
struct Incoming {
    offsets: Vec<usize>,
    sources: Vec<u32>,
    weights: Vec<f64>,
}

impl Incoming {
    fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.sources[r.clone()], &self.weights[r])
    }

    fn len(&self) -> usize {
        self.sources.len()
    }
}

/// A network plus fully materialized O-O, P-P and S-S inhibitory
/// connections weighted by the build-time gammas.
#[derive(Debug, Clone)]
pub struct DenseNetwork {
    network: Network,
    excitatory: Incoming,
    inhibitory: Incoming,
}

impl DenseNetwork {
    pub fn build(lexicon: &Lexicon, params: &Parameters, options: DenseOptions) -> Result<Self> {
        if let Some(limit) = options.max_entries {
            if lexicon.len() > limit {
                return Err(Error::Refused(format!(
                    "dense engine refuses {} entries (limit {limit}); lift the guard to force it",
                    lexicon.len()
                )));
            }
        }
        let network = Network::build(lexicon, params)?;
        let n = network.len();

        let mut exc_rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for c in network.connections() {
            exc_rows[c.to.index()].push((c.from.0, c.weight));
        }
        let excitatory = compress(exc_rows.iter().map(Vec::as_slice), n);

        let mut inhibitory = Incoming { offsets: Vec::with_capacity(n + 1), ..Default::default() };
        inhibitory.offsets.push(0);
        for node in network.nodes() {
            let gamma = match node.pool {
                Pool::Ortho => Some(params.oo_gamma),
                Pool::Phono => Some(params.pp_gamma),
                Pool::Sem => Some(params.ss_gamma),
                Pool::Input | Pool::Lang => None,
            };
            if let Some(gamma) = gamma {
                for &other in network.pool(node.pool) {
                    if other != node.id || options.self_connections {
                        inhibitory.sources.push(other.0);
                        inhibitory.weights.push(gamma);
                    }
                }
            }
            inhibitory.offsets.push(inhibitory.sources.len());
        }
        Ok(Self { network, excitatory, inhibitory })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn inhibitory_count(&self) -> usize {
        self.inhibitory.len()
    }

    /// Materialized inhibitory sources of `node`.
    pub fn inhibitory_sources(&self, node: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        let (src, w) = self.inhibitory.row(node.index());
        src.iter().zip(w).map(|(&s, &w)| (NodeId(s), w))
    }

    /// Kind of the materialized link between two same-pool nodes.
    pub fn inhibitory_kind(pool: Pool) -> Option<ConnectionKind> {
        match pool {
            Pool::Ortho => Some(ConnectionKind::OO),
            Pool::Phono => Some(ConnectionKind::PP),
            Pool::Sem => Some(ConnectionKind::SS),
            _ => None,
        }
    }
}

fn compress<'a>(rows: impl Iterator<Item = &'a [(u32, f64)]>, n: usize) -> Incoming {
    let mut out = Incoming { offsets: Vec::with_capacity(n + 1), ..Default::default() };
    out.offsets.push(0);
    for row in rows {
        for &(s, w) in row {
            out.sources.push(s);
            out.weights.push(w);
        }
        out.offsets.push(out.sources.len());
    }
    out
}

/// Pull-based engine over [`DenseNetwork`]: every node reads every incoming
/// connection each cycle, inhibition included.
#[derive(Debug, Clone, Copy)]
pub struct DenseEngine<'n> {
    dense: &'n DenseNetwork,
}

impl<'n> DenseEngine<'n> {
    pub fn new(dense: &'n DenseNetwork) -> Self {
        Self { dense }
    }
}

impl Engine for DenseEngine<'_> {
    fn network(&self) -> &Network {
        &self.dense.network
    }

    fn step(&self, state: &mut SimulationState, params: &Parameters) {
        let network = &self.dense.network;
        let prev = state.activations();
        let mut next = prev.to_vec();
        let mut exc = Vec::new();
        let mut inh = Vec::new();
        let mut work = 0u64;
        for node in network.nodes() {
            if node.pool == Pool::Input {
                continue;
            }
            let i = node.id.index();
            exc.clear();
            inh.clear();
            for (terms, rows) in [(&mut exc, &self.dense.excitatory), (&mut inh, &self.dense.inhibitory)] {
                let (sources, weights) = rows.row(i);
                work += sources.len() as u64;
                for (&s, &w) in sources.iter().zip(weights) {
                    let a = prev[s as usize];
                    if a > 0.0 {
                        terms.push(w * a);
                    }
                }
                terms.sort_unstable_by(f64::total_cmp);
            }
            let net = exc.iter().fold(0.0, |acc, &t| acc + t) + state.input_weight(node.id) * params.i_rest;
            let total = net + inh.iter().fold(0.0, |acc, &t| acc + t);
            next[i] = update_activation(prev[i], total, node.rest, params);
            work += 1;
        }
        state.commit(network, &next);
        state.add_work(work);
    }
}

/// Builds the dense network and runs one trial on it.
pub fn dense_run<M: Monitor + ?Sized>(
    lexicon: &Lexicon,
    stimulus: &str,
    monitor: &mut M,
    params: &Parameters,
    trace: TraceMode,
    options: DenseOptions,
) -> Result<RunOutput> {
    let dense = DenseNetwork::build(lexicon, params, options)?;
    run_engine(&DenseEngine::new(&dense), stimulus, monitor, params, trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneRow {
    pub pool: Pool,
    pub threshold: f64,
    pub kept: u64,
    pub dropped: u64,
}

/// Kept/dropped counts of unordered same-pool pairs under the pruning
/// heuristic, one row per pool and threshold.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PruneReport {
    pub rows: Vec<PruneRow>,
}

impl PruneReport {
    /// `pool,threshold,kept,dropped`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pool,threshold,kept,dropped\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.pool, r.threshold, r.kept, r.dropped);
        }
        out
    }
}

struct Word<'a> {
    symbol: &'a str,
    concept: ConceptId,
}

/// Concepts that share a word form in the same pool.
fn linked_concepts(words: &[Word<'_>]) -> HashSet<(ConceptId, ConceptId)> {
    let mut by_form: HashMap<&str, Vec<ConceptId>> = HashMap::new();
    for w in words {
        by_form.entry(w.symbol).or_default().push(w.concept);
    }
    let mut links = HashSet::new();
    for concepts in by_form.values() {
        for &a in concepts {
            for &b in concepts {
                if a != b {
                    links.insert((a, b));
                }
            }
        }
    }
    links
}

/// Whether the heuristic keeps the inhibitory link between two words.
pub fn keeps_pair(a: &str, b: &str, related: bool, threshold: f64, params: &Parameters) -> Result<bool> {
    Ok(related || input_weight(a, b, params)? >= threshold)
}

/// Applies the co-activation heuristic to every unordered pair of
/// orthographic and of phonological nodes: a pair is kept when its
/// form-based input weight reaches `threshold` or the two words are
/// semantically linked (same concept, or concepts sharing a form).
pub fn prune_candidates(lexicon: &Lexicon, thresholds: &[f64], params: &Parameters) -> Result<PruneReport> {
    if let Some(t) = thresholds.iter().find(|t| t.is_nan() || **t < 0.0) {
        return Err(Error::Domain(format!("pruning threshold must be >= 0, got {t}")));
    }
    let mut report = PruneReport::default();
    for pool in [Pool::Ortho, Pool::Phono] {
        let words: Vec<Word<'_>> = lexicon
            .entries()
            .iter()
            .enumerate()
            .flat_map(|(c, e)| {
                let c = c as ConceptId;
                match pool {
                    Pool::Ortho => [Word { symbol: &e.ortho_a, concept: c }, Word { symbol: &e.ortho_b, concept: c }],
                    _ => [Word { symbol: &e.phono_a, concept: c }, Word { symbol: &e.phono_b, concept: c }],
                }
            })
            .collect();
        let links = linked_concepts(&words);
        let mut weights = Vec::with_capacity(words.len() * words.len().saturating_sub(1) / 2);
        for (i, a) in words.iter().enumerate() {
            for b in &words[i + 1..] {
                let related = a.concept == b.concept || links.contains(&(a.concept, b.concept));
                let w = if related { f64::INFINITY } else { input_weight(a.symbol, b.symbol, params)? };
                weights.push(w);
            }
        }
        for &threshold in thresholds {
            let kept = weights.iter().filter(|&&w| w >= threshold).count() as u64;
            report.rows.push(PruneRow { pool, threshold, kept, dropped: weights.len() as u64 - kept });
        }
    }
    Ok(report)
}
