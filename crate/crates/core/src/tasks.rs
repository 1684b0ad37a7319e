//! Task/decision systems layered on the network: lexical decision, naming,
//! and word translation with input/output shortlists and a semantic check.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dynamics::{by_activation_then_id, Monitor, SimulationState};
use crate::error::{Error, Result};
use crate::network::{ConceptId, LangId, Network, NodeId, Pool};
use crate::params::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Task {
    #[serde(rename = "LD")]
    LexicalDecision,
    #[serde(rename = "NAME")]
    Naming,
    #[serde(rename = "WT")]
    WordTranslation,
}

impl Task {
    pub fn code(self) -> &'static str {
        match self {
            Task::LexicalDecision => "LD",
            Task::Naming => "NAME",
            Task::WordTranslation => "WT",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LD" => Ok(Task::LexicalDecision),
            "NAME" => Ok(Task::Naming),
            "WT" => Ok(Task::WordTranslation),
            other => Err(Error::Config(format!("unknown task {other:?}; expected LD, NAME or WT"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Response {
    Yes,
    No,
    Symbol(String),
    /// No response within the cycle limit.
    None,
}

impl Response {
    pub fn kind(&self) -> &'static str {
        match self {
            Response::Yes => "YES",
            Response::No => "NO",
            Response::Symbol(_) => "SYMBOL",
            Response::None => "NONE",
        }
    }

    pub fn symbol(&self) -> Option<&str> {
        match self {
            Response::Symbol(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RejectReason {
    WrongLanguage,
    WrongConcept,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub node: NodeId,
    pub symbol: String,
    pub cycle: u32,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Failure {
    Timeout,
    /// Word translation never found a source-language input node.
    NoInputIdentified,
    /// An input node was found but no output candidate was accepted.
    NoOutputAccepted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub responding_node: Option<NodeId>,
    pub input_node: Option<NodeId>,
    /// Output candidates rejected by language or semantics.
    pub rejected: Vec<Rejection>,
    /// Input shortlist entries passed over for being in the wrong language.
    pub input_rejected: Vec<Rejection>,
    pub failure: Option<Failure>,
    pub input_shortlist_size: usize,
    pub output_shortlist: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskOutcome {
    pub response: Response,
    /// Cycle at which the decision was made (`max_cycles` on timeout).
    pub cycle: u32,
    pub rt_pred: f64,
    pub diagnostics: Diagnostics,
}

impl TaskOutcome {
    pub fn new(response: Response, cycle: u32, params: &Parameters, diagnostics: Diagnostics) -> Self {
        Self { response, cycle, rt_pred: params.predicted_rt(cycle), diagnostics }
    }

    /// Whether the trial produced a positive response (YES or a symbol).
    pub fn responded(&self) -> bool {
        matches!(self.response, Response::Yes | Response::Symbol(_))
    }
}

/// A monitor that never decides; used to run the full cycle budget.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverDecide;

impl Monitor for NeverDecide {
    fn observe(&mut self, _: &Network, _: &SimulationState, _: &Parameters) -> Result<Option<TaskOutcome>> {
        Ok(None)
    }

    fn timeout(&mut self, _: &Network, state: &SimulationState, params: &Parameters) -> TaskOutcome {
        TaskOutcome::new(Response::None, state.cycle(), params, Diagnostics::default())
    }
}

/// Best node of `pool` in `language` at or above `threshold`, if any.
fn best_over(
    network: &Network,
    state: &SimulationState,
    pool: Pool,
    language: LangId,
    threshold: f64,
) -> Option<NodeId> {
    state
        .active()
        .members(pool)
        .iter()
        .copied()
        .filter(|&id| network.node(id).language == Some(language) && state.activation(id) >= threshold)
        .min_by(by_activation_then_id(state))
}

/// YES once any orthographic node of the target language reaches the
/// criterion; NO at the cycle limit.
#[derive(Debug, Clone)]
pub struct LexicalDecision {
    target: LangId,
}

impl LexicalDecision {
    pub fn new(network: &Network, target_language: &str) -> Result<Self> {
        Ok(Self { target: network.language_id(target_language)? })
    }
}

impl Monitor for LexicalDecision {
    fn observe(
        &mut self,
        network: &Network,
        state: &SimulationState,
        params: &Parameters,
    ) -> Result<Option<TaskOutcome>> {
        Ok(best_over(network, state, Pool::Ortho, self.target, params.criterion_value).map(|id| {
            let diagnostics = Diagnostics { responding_node: Some(id), ..Default::default() };
            TaskOutcome::new(Response::Yes, state.cycle(), params, diagnostics)
        }))
    }

    fn timeout(&mut self, _: &Network, state: &SimulationState, params: &Parameters) -> TaskOutcome {
        let diagnostics = Diagnostics { failure: Some(Failure::Timeout), ..Default::default() };
        TaskOutcome::new(Response::No, state.cycle(), params, diagnostics)
    }
}

/// Returns the symbol of the first phonological node of the target
/// language to reach the criterion.
#[derive(Debug, Clone)]
pub struct Naming {
    target: LangId,
}

impl Naming {
    pub fn new(network: &Network, target_language: &str) -> Result<Self> {
        Ok(Self { target: network.language_id(target_language)? })
    }
}

impl Monitor for Naming {
    fn observe(
        &mut self,
        network: &Network,
        state: &SimulationState,
        params: &Parameters,
    ) -> Result<Option<TaskOutcome>> {
        Ok(best_over(network, state, Pool::Phono, self.target, params.criterion_value).map(|id| {
            let diagnostics = Diagnostics { responding_node: Some(id), ..Default::default() };
            let symbol = network.node(id).symbol.clone();
            TaskOutcome::new(Response::Symbol(symbol), state.cycle(), params, diagnostics)
        }))
    }

    fn timeout(&mut self, _: &Network, state: &SimulationState, params: &Parameters) -> TaskOutcome {
        let diagnostics = Diagnostics { failure: Some(Failure::Timeout), ..Default::default() };
        TaskOutcome::new(Response::None, state.cycle(), params, diagnostics)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CandidateStatus {
    Pending,
    Rejected,
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub node: NodeId,
    pub entry_activation: f64,
    pub entry_cycle: u32,
    pub status: CandidateStatus,
}

/// Waiting room of candidates that crossed an entry threshold. A rejected
/// candidate stays listed (as rejected) and can never be re-admitted.
#[derive(Debug, Clone, Default)]
pub struct Shortlist {
    candidates: Vec<Candidate>,
}

impl Shortlist {
    /// Admits every node of `pool` at or above `threshold` not yet listed.
    pub fn admit(&mut self, state: &SimulationState, pool: Pool, threshold: f64) {
        let mut fresh: Vec<NodeId> = state
            .active()
            .members(pool)
            .iter()
            .copied()
            .filter(|&id| state.activation(id) >= threshold && !self.contains(id))
            .collect();
        fresh.sort_by(by_activation_then_id(state));
        for node in fresh {
            self.candidates.push(Candidate {
                node,
                entry_activation: state.activation(node),
                entry_cycle: state.cycle(),
                status: CandidateStatus::Pending,
            });
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.candidates.iter().any(|c| c.node == id)
    }

    /// Pending candidates ordered by current activation (descending), then id.
    pub fn pending(&self, state: &SimulationState) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> =
            self.candidates.iter().filter(|c| c.status == CandidateStatus::Pending).map(|c| c.node).collect();
        ids.sort_by(by_activation_then_id(state));
        ids
    }

    fn set_status(&mut self, id: NodeId, status: CandidateStatus) {
        if let Some(c) = self.candidates.iter_mut().find(|c| c.node == id) {
            c.status = status;
        }
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }
}

/// Two-stage translation: identify a source-language input node from the
/// orthographic shortlist, then accept the first phonological candidate at
/// criterion that has the target language and the input's concept.
#[derive(Debug, Clone)]
pub struct WordTranslation {
    source: LangId,
    target: LangId,
    semantic_check: bool,
    input: Option<(NodeId, ConceptId)>,
    input_rejected: Vec<Rejection>,
    input_shortlist_size: usize,
    output: Shortlist,
    rejected: Vec<Rejection>,
}

impl WordTranslation {
    pub fn new(network: &Network, source_language: &str, target_language: &str) -> Result<Self> {
        let source = network.language_id(source_language)?;
        let target = network.language_id(target_language)?;
        if source == target {
            return Err(Error::Config("word translation needs distinct source and target languages".into()));
        }
        Ok(Self {
            source,
            target,
            semantic_check: true,
            input: None,
            input_rejected: Vec::new(),
            input_shortlist_size: 0,
            output: Shortlist::default(),
            rejected: Vec::new(),
        })
    }

    /// Disables the concept comparison (language check only).
    pub fn without_semantic_check(mut self) -> Self {
        self.semantic_check = false;
        self
    }

    fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            responding_node: None,
            input_node: self.input.map(|(id, _)| id),
            rejected: self.rejected.clone(),
            input_rejected: self.input_rejected.clone(),
            failure: None,
            input_shortlist_size: self.input_shortlist_size,
            output_shortlist: self.output.candidates().to_vec(),
        }
    }

    fn identify_input(&mut self, network: &Network, state: &SimulationState, params: &Parameters) {
        let mut shortlist: Vec<NodeId> = state
            .active()
            .members(Pool::Ortho)
            .iter()
            .copied()
            .filter(|&id| state.activation(id) >= params.shortlist_input_threshold)
            .collect();
        shortlist.sort_by(by_activation_then_id(state));
        self.input_shortlist_size = self.input_shortlist_size.max(shortlist.len());
        for id in shortlist {
            let node = network.node(id);
            if node.language == Some(self.source) {
                if let Some(concept) = node.concept {
                    self.input = Some((id, concept));
                    return;
                }
            } else if !self.input_rejected.iter().any(|r| r.node == id) {
                self.input_rejected.push(Rejection {
                    node: id,
                    symbol: node.symbol.clone(),
                    cycle: state.cycle(),
                    reason: RejectReason::WrongLanguage,
                });
            }
        }
    }
}

impl Monitor for WordTranslation {
    fn observe(
        &mut self,
        network: &Network,
        state: &SimulationState,
        params: &Parameters,
    ) -> Result<Option<TaskOutcome>> {
        if self.input.is_none() {
            self.identify_input(network, state, params);
        }
        self.output.admit(state, Pool::Phono, params.shortlist_output_threshold);
        let Some((_, concept)) = self.input else {
            return Ok(None);
        };
        for id in self.output.pending(state) {
            if state.activation(id) < params.criterion_value {
                // Pending list is sorted by activation; nothing further qualifies.
                break;
            }
            let node = network.node(id);
            let reason = if node.language != Some(self.target) {
                Some(RejectReason::WrongLanguage)
            } else if self.semantic_check && node.concept != Some(concept) {
                Some(RejectReason::WrongConcept)
            } else {
                None
            };
            match reason {
                Some(reason) => {
                    self.output.set_status(id, CandidateStatus::Rejected);
                    self.rejected.push(Rejection {
                        node: id,
                        symbol: node.symbol.clone(),
                        cycle: state.cycle(),
                        reason,
                    });
                }
                None => {
                    self.output.set_status(id, CandidateStatus::Accepted);
                    let mut diagnostics = self.diagnostics();
                    diagnostics.responding_node = Some(id);
                    return Ok(Some(TaskOutcome::new(
                        Response::Symbol(node.symbol.clone()),
                        state.cycle(),
                        params,
                        diagnostics,
                    )));
                }
            }
        }
        Ok(None)
    }

    fn timeout(&mut self, _: &Network, state: &SimulationState, params: &Parameters) -> TaskOutcome {
        let mut diagnostics = self.diagnostics();
        diagnostics.failure =
            Some(if self.input.is_none() { Failure::NoInputIdentified } else { Failure::NoOutputAccepted });
        TaskOutcome::new(Response::None, state.cycle(), params, diagnostics)
    }
}

/// Builds the monitor for `task`. Lexical decision and naming watch
/// `target` when given, else `source`.
pub fn monitor_for(
    task: Task,
    network: &Network,
    source: &str,
    target: Option<&str>,
) -> Result<Box<dyn Monitor + Send>> {
    Ok(match task {
        Task::LexicalDecision => Box::new(LexicalDecision::new(network, target.unwrap_or(source))?),
        Task::Naming => Box::new(Naming::new(network, target.unwrap_or(source))?),
        Task::WordTranslation => {
            let target = target.ok_or_else(|| Error::Config("word translation needs a target language".into()))?;
            Box::new(WordTranslation::new(network, source, target)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run, TraceMode};
    use crate::lexicon::{Lexicon, LexiconOptions};

    const BASE: &str = include_str!("../../../fixtures/base.csv");
    const HOMOGRAPHS: &str = include_str!("../../../fixtures/homographs.csv");
    const PUBLISHED: &str = include_str!("../../../fixtures/published.params");

    /// Decision cycle for AARDE (NL lexical decision) under default parameters.
    const GOLDEN_AARDE_LD: u32 = 13;

    fn extended() -> String {
        let rows: String = HOMOGRAPHS.lines().skip(1).map(|l| format!("{l}\n")).collect();
        format!("{BASE}{rows}")
    }

    fn network(text: &str, params: &Parameters) -> Network {
        let lex = Lexicon::parse(text, &LexiconOptions::default()).unwrap();
        Network::build(&lex, params).unwrap()
    }

    #[test]
    fn task_codes_parse() {
        assert_eq!("ld".parse::<Task>().unwrap(), Task::LexicalDecision);
        assert_eq!("NAME".parse::<Task>().unwrap(), Task::Naming);
        assert_eq!("WT".parse::<Task>().unwrap(), Task::WordTranslation);
        assert!("XX".parse::<Task>().is_err());
    }

    #[test]
    fn unknown_language_is_a_configuration_error() {
        let p = Parameters::default();
        let net = network(BASE, &p);
        assert!(matches!(LexicalDecision::new(&net, "FR"), Err(Error::Config(_))));
        assert!(matches!(Naming::new(&net, "FR"), Err(Error::Config(_))));
        assert!(matches!(WordTranslation::new(&net, "NL", "NL"), Err(Error::Config(_))));
        assert!(monitor_for(Task::WordTranslation, &net, "NL", None).is_err());
    }

    #[test]
    fn lexical_decision_on_fixture() {
        let p = Parameters::default();
        let net = network(BASE, &p);
        let mut ld = LexicalDecision::new(&net, "NL").unwrap();
        let out = run(&net, "AARDE", &mut ld, &p, TraceMode::Off).unwrap();
        assert_eq!(out.outcome.response, Response::Yes);
        assert_eq!(out.outcome.cycle, GOLDEN_AARDE_LD);
        assert_eq!(out.outcome.rt_pred, GOLDEN_AARDE_LD as f64);
        let node = out.outcome.diagnostics.responding_node.unwrap();
        assert_eq!(net.node(node).symbol, "AARDE");

        let mut ld = LexicalDecision::new(&net, "NL").unwrap();
        let out = run(&net, "XQZWV", &mut ld, &p, TraceMode::Off).unwrap();
        assert_eq!(out.outcome.response, Response::No);
        assert!(!out.outcome.responded());
        assert_eq!(out.outcome.cycle, 40);
    }

    #[test]
    fn zero_criterion_decides_on_first_cycle() {
        let p = Parameters { criterion_value: 0.0, ..Parameters::default() };
        let net = network(BASE, &p);
        let mut ld = LexicalDecision::new(&net, "NL").unwrap();
        let out = run(&net, "AARDE", &mut ld, &p, TraceMode::Off).unwrap();
        assert_eq!(out.outcome.response, Response::Yes);
        assert_eq!(out.outcome.cycle, 1);
    }

    #[test]
    fn naming_on_fixture() {
        let p = Parameters::default();
        let net = network(BASE, &p);
        let mut naming = Naming::new(&net, "NL").unwrap();
        let out = run(&net, "AAP", &mut naming, &p, TraceMode::Off).unwrap();
        assert_eq!(out.outcome.response, Response::Symbol("ap".into()));

        let mut naming = Naming::new(&net, "NL").unwrap();
        let out = run(&net, "XQZWV", &mut naming, &p, TraceMode::Off).unwrap();
        assert_eq!(out.outcome.response, Response::None);
        assert_eq!(out.outcome.cycle, 40);
    }

    #[test]
    fn translation_rejects_the_source_reading() {
        let p = Parameters::default();
        let net = network(&extended(), &p);
        let mut wt = WordTranslation::new(&net, "NL", "EN").unwrap();
        let out = run(&net, "ROOM", &mut wt, &p, TraceMode::Off).unwrap();
        assert_eq!(out.outcome.response, Response::Symbol("krim".into()));
        let d = &out.outcome.diagnostics;
        assert!(d.rejected.iter().any(|r| r.symbol == "rom" && r.reason == RejectReason::WrongLanguage));
        let input = d.input_node.unwrap();
        assert_eq!(net.node(input).symbol, "ROOM");
        assert_eq!(net.describe_language(net.node(input)), "NL");
    }

    #[test]
    fn semantic_check_rejects_a_wrong_concept() {
        let p = Parameters::default();
        let net = network(BASE, &p);
        let mut wt = WordTranslation::new(&net, "NL", "EN").unwrap();
        let out = run(&net, "AARD", &mut wt, &p, TraceMode::Off).unwrap();
        let d = &out.outcome.diagnostics;
        assert!(d.rejected.iter().any(|r| r.symbol == "3T" && r.reason == RejectReason::WrongConcept));
        if out.outcome.response == Response::None {
            assert_eq!(d.failure, Some(Failure::NoOutputAccepted));
        }

        let mut wt = WordTranslation::new(&net, "NL", "EN").unwrap().without_semantic_check();
        let out = run(&net, "AARD", &mut wt, &p, TraceMode::Off).unwrap();
        assert_eq!(out.outcome.response, Response::Symbol("3T".into()));
    }

    #[test]
    fn translation_of_unknown_word_reports_missing_input() {
        let p = Parameters::default();
        let net = network(BASE, &p);
        let mut wt = WordTranslation::new(&net, "NL", "EN").unwrap();
        let out = run(&net, "XQZWV", &mut wt, &p, TraceMode::Off).unwrap();
        assert_eq!(out.outcome.response, Response::None);
        assert_eq!(out.outcome.diagnostics.failure, Some(Failure::NoInputIdentified));
        assert_eq!(out.outcome.diagnostics.input_shortlist_size, 0);
    }

    #[test]
    fn every_fixture_word_translates_to_its_pair_under_published_parameters() {
        let p = Parameters::from_file_text(PUBLISHED).unwrap();
        let text = extended();
        let lex = Lexicon::parse(&text, &LexiconOptions::default()).unwrap();
        let net = Network::build(&lex, &p).unwrap();
        for e in lex.entries() {
            let mut wt = WordTranslation::new(&net, "NL", "EN").unwrap();
            let out = run(&net, &e.ortho_a, &mut wt, &p, TraceMode::Off).unwrap();
            assert_eq!(out.outcome.response, Response::Symbol(e.phono_b.clone()), "{}", e.ortho_a);
        }
    }

    #[test]
    fn accepted_output_always_matches_source_concept() {
        let p = Parameters::default();
        let text = extended();
        let lex = Lexicon::parse(&text, &LexiconOptions::default()).unwrap();
        let net = Network::build(&lex, &p).unwrap();
        for (src, dst, word) in lex.entries().iter().flat_map(|e| [("NL", "EN", &e.ortho_a), ("EN", "NL", &e.ortho_b)])
        {
            let mut wt = WordTranslation::new(&net, src, dst).unwrap();
            let out = run(&net, word, &mut wt, &p, TraceMode::Off).unwrap();
            let d = &out.outcome.diagnostics;
            if let Some(id) = d.responding_node {
                let input = d.input_node.unwrap();
                assert_eq!(net.node(id).concept, net.node(input).concept, "{word}");
                assert_eq!(net.describe_language(net.node(id)), dst);
                assert_eq!(net.describe_language(net.node(input)), src);
            }
        }
    }

    #[test]
    fn rejected_candidates_never_return() {
        let p = Parameters::default();
        let net = network(BASE, &p);
        let mut wt = WordTranslation::new(&net, "NL", "EN").unwrap();
        let out = run(&net, "AARD", &mut wt, &p, TraceMode::Off).unwrap();
        let list = &out.outcome.diagnostics.output_shortlist;
        let mut seen = std::collections::HashSet::new();
        for c in list {
            assert!(seen.insert(c.node), "candidate listed twice");
            assert!(c.entry_activation >= p.shortlist_output_threshold);
        }
        assert!(list.iter().filter(|c| c.status == CandidateStatus::Accepted).count() <= 1);
        for r in &out.outcome.diagnostics.rejected {
            let c = list.iter().find(|c| c.node == r.node).unwrap();
            assert_eq!(c.status, CandidateStatus::Rejected);
        }
    }

    #[test]
    fn outcomes_are_deterministic() {
        let p = Parameters::default();
        let net = network(&extended(), &p);
        let go = || {
            let mut wt = WordTranslation::new(&net, "NL", "EN").unwrap();
            run(&net, "ROOM", &mut wt, &p, TraceMode::Full).unwrap()
        };
        let (a, b) = (go(), go());
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.trace, b.trace);
    }
}
