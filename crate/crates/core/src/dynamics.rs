//! The cycle engine.
//!
//! Every cycle runs three phases over a snapshot of the previous cycle's
//! activations: excitatory net input from active sources, lateral inhibition
//! from the active members of the node's own pool, and the activation update.
//! Only nodes with activation strictly above zero send activation.
//!
//! Each node's input terms are summed in ascending value order
//! (`f64::total_cmp`). The result then depends only on the multiset of terms,
//! never on node ids or iteration order. The dense reference engine uses the
//! same rule, which is what makes the two bit-identical.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{Network, NodeId, Pool};
use crate::tasks::TaskOutcome;

pub use crate::params::Parameters;

const ABSENT: u32 = u32::MAX;

/// Node ids with activation above zero, one set per pool. Insert and remove
/// are constant time (swap-remove with a position index).
#[derive(Debug, Clone)]
pub struct ActiveSet {
    position: Vec<u32>,
    members: [Vec<NodeId>; 5],
}

impl ActiveSet {
    fn new(len: usize) -> Self {
        Self { position: vec![ABSENT; len], members: Default::default() }
    }

    #[inline]
    pub fn contains(&self, id: NodeId) -> bool {
        self.position[id.index()] != ABSENT
    }

    fn insert(&mut self, id: NodeId, pool: Pool) {
        if self.contains(id) {
            return;
        }
        let list = &mut self.members[pool.index()];
        self.position[id.index()] = list.len() as u32;
        list.push(id);
    }

    fn remove(&mut self, id: NodeId, pool: Pool) {
        let pos = self.position[id.index()];
        if pos == ABSENT {
            return;
        }
        let list = &mut self.members[pool.index()];
        list.swap_remove(pos as usize);
        if let Some(&moved) = list.get(pos as usize) {
            self.position[moved.index()] = pos;
        }
        self.position[id.index()] = ABSENT;
    }

    /// Active nodes of one pool, in no particular order.
    pub fn members(&self, pool: Pool) -> &[NodeId] {
        &self.members[pool.index()]
    }

    pub fn len(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Active-node counts by pool at the end of one cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PoolCounts {
    pub ortho: u32,
    pub phono: u32,
    pub sem: u32,
    pub lang: u32,
}

impl PoolCounts {
    pub fn total(&self) -> u32 {
        self.ortho + self.phono + self.sem + self.lang
    }
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    stimulus: String,
    activation: Vec<f64>,
    previous: Vec<f64>,
    input_weights: Vec<f64>,
    active: ActiveSet,
    cycle: u32,
    work: u64,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    contributions: Vec<(u32, f64)>,
    net: Vec<f64>,
    inhibition: Vec<f64>,
    terms: Vec<f64>,
}

impl SimulationState {
    /// Fresh state for `stimulus`: every node at rest, input weights set.
    pub fn new(network: &Network, stimulus: &str, params: &Parameters) -> Result<Self> {
        let input_weights = network.input_weights(stimulus, params)?;
        let activation: Vec<f64> = network.nodes().iter().map(|n| n.rest).collect();
        let mut active = ActiveSet::new(network.len());
        for n in network.nodes() {
            if n.pool != Pool::Input && activation[n.id.index()] > 0.0 {
                active.insert(n.id, n.pool);
            }
        }
        Ok(Self {
            stimulus: stimulus.to_uppercase(),
            previous: activation.clone(),
            activation,
            input_weights,
            active,
            cycle: 0,
            work: 0,
            scratch: Scratch::default(),
        })
    }

    pub fn stimulus(&self) -> &str {
        &self.stimulus
    }

    #[inline]
    pub fn activation(&self, id: NodeId) -> f64 {
        self.activation[id.index()]
    }

    pub fn activations(&self) -> &[f64] {
        &self.activation
    }

    /// Activations as they were before the most recent cycle.
    pub fn previous(&self) -> &[f64] {
        &self.previous
    }

    pub fn input_weights(&self) -> &[f64] {
        &self.input_weights
    }

    pub fn input_weight(&self, id: NodeId) -> f64 {
        self.input_weights[id.index()]
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn cycle(&self) -> u32 {
        self.cycle
    }

    /// Deterministic work counter: connection traversals, inhibition terms
    /// and node updates accumulated so far.
    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn pool_counts(&self) -> PoolCounts {
        PoolCounts {
            ortho: self.active.members(Pool::Ortho).len() as u32,
            phono: self.active.members(Pool::Phono).len() as u32,
            sem: self.active.members(Pool::Sem).len() as u32,
            lang: self.active.members(Pool::Lang).len() as u32,
        }
    }

    /// Recomputes the active set from scratch and compares.
    pub fn check_invariants(&self, network: &Network, params: &Parameters) -> Result<()> {
        for n in network.nodes() {
            if n.pool == Pool::Input {
                continue;
            }
            let a = self.activation[n.id.index()];
            if !(params.min_act..=params.max_act).contains(&a) {
                return Err(Error::Invariant(format!("node {} activation {a} out of range", n.id)));
            }
            if (a > 0.0) != self.active.contains(n.id) {
                return Err(Error::Invariant(format!("active set disagrees at node {}", n.id)));
            }
        }
        let counted = self.active.len();
        let expected =
            network.nodes().iter().filter(|n| n.pool != Pool::Input && self.activation[n.id.index()] > 0.0).count();
        if counted != expected {
            return Err(Error::Invariant("active set holds stale members".into()));
        }
        Ok(())
    }

    /// Installs a new activation vector (previous values are kept in the
    /// snapshot) and brings the active set up to date by the crossing rule.
    pub(crate) fn commit(&mut self, network: &Network, next: &[f64]) {
        std::mem::swap(&mut self.previous, &mut self.activation);
        self.activation.copy_from_slice(next);
        self.cycle += 1;
        for n in network.nodes() {
            let i = n.id.index();
            let was = self.previous[i] > 0.0;
            let now = self.activation[i] > 0.0;
            if n.pool == Pool::Input || was == now {
                continue;
            }
            if now {
                self.active.insert(n.id, n.pool);
            } else {
                self.active.remove(n.id, n.pool);
            }
        }
    }

    pub(crate) fn add_work(&mut self, amount: u64) {
        self.work += amount;
    }
}

/// Sums terms in ascending value order.
pub fn ordered_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().fold(0.0, |acc, &t| acc + t)
}

/// Excitatory net input to `node` from the snapshot in `state.activations()`:
/// every source above zero contributes `weight * activation`; orthographic
/// nodes add `input_weight * I_rest`.
pub fn net_input(node: NodeId, state: &SimulationState, network: &Network, params: &Parameters) -> f64 {
    let a = state.activations();
    let mut terms: Vec<f64> = network
        .connections()
        .filter(|c| c.to == node && a[c.from.index()] > 0.0)
        .map(|c| c.weight * a[c.from.index()])
        .collect();
    ordered_sum(&mut terms) + state.input_weight(node) * params.i_rest
}

/// Inhibitory input to a node: `gamma` times each other active same-pool
/// activation, summed. `others` must already exclude the node itself.
pub fn apply_lateral_inhibition(others: &[f64], gamma: f64) -> f64 {
    let mut terms: Vec<f64> = others.iter().map(|&a| gamma * a).collect();
    ordered_sum(&mut terms)
}

/// Interactive-activation update with decay toward `rest`, clamped to
/// `[MIN_ACT, MAX_ACT]`.
#[inline]
pub fn update_activation(a: f64, net: f64, rest: f64, params: &Parameters) -> f64 {
    let driven = if net > 0.0 { net * (params.max_act - a) } else { net * (a - params.min_act) };
    (a + driven - params.decay_rate * (a - rest)).clamp(params.min_act, params.max_act)
}

/// Inhibition parameter per pool; language nodes have none.
pub fn pool_gamma(pool: Pool, params: &Parameters) -> Option<f64> {
    match pool {
        Pool::Ortho => Some(params.oo_gamma),
        Pool::Phono => Some(params.pp_gamma),
        Pool::Sem => Some(params.ss_gamma),
        Pool::Input | Pool::Lang => None,
    }
}

pub const INHIBITED_POOLS: [Pool; 3] = [Pool::Ortho, Pool::Phono, Pool::Sem];

/// A cycle engine over some network representation.
pub trait Engine {
    fn network(&self) -> &Network;

    fn start(&self, stimulus: &str, params: &Parameters) -> Result<SimulationState> {
        SimulationState::new(self.network(), stimulus, params)
    }

    fn step(&self, state: &mut SimulationState, params: &Parameters);
}

/// The production engine: sparse excitatory connections plus an ad-hoc
/// inhibition step over the active set.
#[derive(Debug, Clone, Copy)]
pub struct ActiveSetEngine<'n> {
    network: &'n Network,
    self_inhibition: bool,
}

impl<'n> ActiveSetEngine<'n> {
    pub fn new(network: &'n Network) -> Self {
        Self { network, self_inhibition: false }
    }

    /// Lets a node's own activation count toward its inhibition.
    pub fn with_self_inhibition(mut self, on: bool) -> Self {
        self.self_inhibition = on;
        self
    }
}

impl Engine for ActiveSetEngine<'_> {
    fn network(&self) -> &Network {
        self.network
    }

    fn step(&self, state: &mut SimulationState, params: &Parameters) {
        step(state, self.network, params, self.self_inhibition);
    }
}

/// Advances `state` by one cycle.
pub fn step(state: &mut SimulationState, network: &Network, params: &Parameters, self_inhibition: bool) {
    let n = network.len();
    let mut scratch = std::mem::take(&mut state.scratch);
    let prev = &state.activation;
    let mut work: u64 = 0;

    // Phase 1: push activation along outgoing connections of active sources.
    scratch.contributions.clear();
    for pool in [Pool::Ortho, Pool::Phono, Pool::Sem, Pool::Lang] {
        for &src in state.active.members(pool) {
            let a = prev[src.index()];
            for c in network.outgoing(src) {
                scratch.contributions.push((c.to.0, c.weight * a));
            }
        }
    }
    work += scratch.contributions.len() as u64;
    scratch.contributions.sort_unstable_by(|x, y| x.0.cmp(&y.0).then_with(|| x.1.total_cmp(&y.1)));
    scratch.net.clear();
    scratch.net.resize(n, 0.0);
    for &(to, term) in &scratch.contributions {
        scratch.net[to as usize] += term;
    }
    for (i, net) in scratch.net.iter_mut().enumerate() {
        *net += state.input_weights[i] * params.i_rest;
    }

    // Phase 2: lateral inhibition from the same pool's active members.
    scratch.inhibition.clear();
    scratch.inhibition.resize(n, 0.0);
    for pool in INHIBITED_POOLS {
        let gamma = pool_gamma(pool, params).unwrap_or(0.0);
        let members = state.active.members(pool);
        if gamma == 0.0 || members.is_empty() {
            continue;
        }
        scratch.terms.clear();
        scratch.terms.extend(members.iter().map(|&m| gamma * prev[m.index()]));
        scratch.terms.sort_unstable_by(f64::total_cmp);
        let full = scratch.terms.iter().fold(0.0, |acc, &t| acc + t);
        let pool_nodes = network.pool(pool);
        work += scratch.terms.len() as u64 + pool_nodes.len() as u64;
        for &id in pool_nodes {
            scratch.inhibition[id.index()] = full;
        }
        if !self_inhibition {
            for &id in members {
                let own = gamma * prev[id.index()];
                let mut skipped = false;
                let mut sum = 0.0;
                for &t in &scratch.terms {
                    if !skipped && t.to_bits() == own.to_bits() {
                        skipped = true;
                        continue;
                    }
                    sum += t;
                }
                scratch.inhibition[id.index()] = sum;
                work += scratch.terms.len() as u64;
            }
        }
    }

    // Phase 3: update every non-input node.
    let mut next = std::mem::take(&mut scratch.terms);
    next.clear();
    next.extend_from_slice(prev);
    for node in network.nodes() {
        if node.pool == Pool::Input {
            continue;
        }
        let i = node.id.index();
        let total = scratch.net[i] + scratch.inhibition[i];
        next[i] = update_activation(prev[i], total, node.rest, params);
        work += 1;
    }
    state.commit(network, &next);
    scratch.terms = next;
    state.scratch = scratch;
    state.add_work(work);

    #[cfg(debug_assertions)]
    if let Err(e) = state.check_invariants(network, params) {
        panic!("{e}");
    }
}

/// A task/decision hook consulted after every cycle.
pub trait Monitor {
    /// Returns an outcome once the task has decided.
    fn observe(
        &mut self,
        network: &Network,
        state: &SimulationState,
        params: &Parameters,
    ) -> Result<Option<TaskOutcome>>;

    /// Outcome when `max_cycles` elapse without a decision.
    fn timeout(&mut self, network: &Network, state: &SimulationState, params: &Parameters) -> TaskOutcome;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMode {
    #[default]
    Off,
    /// Every non-input node.
    Full,
    /// Nodes whose activation exceeded their resting level at some cycle.
    AboveRest,
    /// The `k` nodes of [`TraceMode::AboveRest`] with the highest peak.
    TopK(usize),
}

/// Per-cycle activations of a fixed node sample, cycles `1..=cycles`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub nodes: Vec<NodeId>,
    pub cycles: u32,
    /// Row-major: `values[(cycle - 1) * nodes.len() + i]`.
    pub values: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (u32, NodeId, f64)> + '_ {
        let width = self.nodes.len().max(1);
        self.values.iter().enumerate().map(move |(k, &v)| ((k / width) as u32 + 1, self.nodes[k % width], v))
    }

    /// `cycle,node_id,pool,language,symbol,activation`
    pub fn to_csv(&self, network: &Network) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("cycle,node_id,pool,language,symbol,activation\n");
        for (cycle, id, v) in self.samples() {
            let node = network.node(id);
            let _ = writeln!(out, "{cycle},{id},{},{},{},{v}", node.pool, network.describe_language(node), node.name);
        }
        out
    }

    fn from_history(network: &Network, history: &[Vec<f64>], mode: TraceMode) -> Self {
        let candidates = network.nodes().iter().filter(|n| n.pool != Pool::Input);
        let above = |id: NodeId| {
            let rest = network.node(id).rest;
            history.iter().any(|snap| snap[id.index()] > rest)
        };
        let mut nodes: Vec<NodeId> = match mode {
            TraceMode::Off => return Self::default(),
            TraceMode::Full => candidates.map(|n| n.id).collect(),
            TraceMode::AboveRest => candidates.map(|n| n.id).filter(|&id| above(id)).collect(),
            TraceMode::TopK(k) => {
                let peak = |id: NodeId| history.iter().map(|s| s[id.index()]).fold(f64::NEG_INFINITY, f64::max);
                let mut ranked: Vec<(f64, NodeId)> =
                    candidates.map(|n| n.id).filter(|&id| above(id)).map(|id| (peak(id), id)).collect();
                ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                ranked.into_iter().take(k).map(|(_, id)| id).collect()
            }
        };
        nodes.sort();
        let mut values = Vec::with_capacity(nodes.len() * history.len());
        for snap in history {
            values.extend(nodes.iter().map(|id| snap[id.index()]));
        }
        Self { nodes, cycles: history.len() as u32, values }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outcome: TaskOutcome,
    pub trace: Trace,
    /// Active-node counts after each cycle.
    pub active_counts: Vec<PoolCounts>,
    pub work: u64,
}

/// Presents `stimulus`, steps up to `max_cycles`, consulting `monitor` after
/// each cycle, and stops at the first decision.
pub fn run_engine<E: Engine + ?Sized, M: Monitor + ?Sized>(
    engine: &E,
    stimulus: &str,
    monitor: &mut M,
    params: &Parameters,
    trace: TraceMode,
) -> Result<RunOutput> {
    params.validate()?;
    let network = engine.network();
    let mut state = engine.start(stimulus, params)?;
    let mut history = Vec::new();
    let mut counts = Vec::with_capacity(params.max_cycles as usize);
    let mut outcome = None;
    while state.cycle() < params.max_cycles {
        engine.step(&mut state, params);
        counts.push(state.pool_counts());
        if trace != TraceMode::Off {
            history.push(state.activations().to_vec());
        }
        if let Some(decided) = monitor.observe(network, &state, params)? {
            outcome = Some(decided);
            break;
        }
    }
    let outcome = match outcome {
        Some(o) => o,
        None => monitor.timeout(network, &state, params),
    };
    Ok(RunOutput {
        outcome,
        trace: Trace::from_history(network, &history, trace),
        active_counts: counts,
        work: state.work(),
    })
}

/// [`run_engine`] with the active-set engine.
pub fn run<M: Monitor + ?Sized>(
    network: &Network,
    stimulus: &str,
    monitor: &mut M,
    params: &Parameters,
    trace: TraceMode,
) -> Result<RunOutput> {
    run_engine(&ActiveSetEngine::new(network), stimulus, monitor, params, trace)
}

/// Orders candidates by activation (descending), then node id.
pub fn by_activation_then_id(state: &SimulationState) -> impl Fn(&NodeId, &NodeId) -> Ordering + '_ {
    move |a, b| state.activation(*b).total_cmp(&state.activation(*a)).then_with(|| a.cmp(b))
}
