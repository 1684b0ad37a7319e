//! The lexical network: node pools, sparse excitatory connections and the
//! stimulus-dependent input weights onto orthographic nodes.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::params::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a translation pair; shared by its O, P and S nodes.
pub type ConceptId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Pool {
    Input,
    Ortho,
    Phono,
    Sem,
    Lang,
}

impl Pool {
    pub const ALL: [Pool; 5] = [Pool::Input, Pool::Ortho, Pool::Phono, Pool::Sem, Pool::Lang];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Pool::Input => "INPUT",
            Pool::Ortho => "ORTHO",
            Pool::Phono => "PHONO",
            Pool::Sem => "SEM",
            Pool::Lang => "LANG",
        }
    }
}

impl fmt::Display for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Language slot of the lexicon: 0 for the first language, 1 for the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct LangId(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ConnectionKind {
    OP,
    PO,
    OS,
    SO,
    PS,
    SP,
    OL,
    LO,
    PL,
    LP,
    /// Materialized lateral inhibition; only the dense reference engine
    /// builds these.
    OO,
    PP,
    SS,
}

impl ConnectionKind {
    pub fn is_inhibitory(self) -> bool {
        matches!(self, ConnectionKind::OO | ConnectionKind::PP | ConnectionKind::SS)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Node {
    pub id: NodeId,
    pub pool: Pool,
    /// Form used for similarity; graphemes are upper-case, SAMPA verbatim.
    pub symbol: String,
    /// Display name, unique within pool and language.
    pub name: String,
    pub language: Option<LangId>,
    pub rest: f64,
    pub concept: Option<ConceptId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Connection {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
    pub kind: ConnectionKind,
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    pools: [Vec<NodeId>; 5],
    /// Outgoing excitatory connections, indexed by origin node id.
    outgoing: Vec<Vec<Connection>>,
    languages: [String; 2],
    params: Parameters,
    by_form: HashMap<(Pool, Option<LangId>, String), Vec<NodeId>>,
}

/// Unit-cost insert/delete/substitute edit distance over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - LD(a, b) / max(|a|, |b|)`, in `[0, 1]`.
pub fn levenshtein_similarity(a: &str, b: &str) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("similarity is undefined for empty symbols".into()));
    }
    let longest = a.chars().count().max(b.chars().count());
    Ok(1.0 - levenshtein(a, b) as f64 / longest as f64)
}

/// Strength of the input node's link to an orthographic node:
/// `IO_multiplier * score^3` for a positive similarity score, else 0.
pub fn input_weight(stimulus: &str, ortho_symbol: &str, params: &Parameters) -> Result<f64> {
    let score = levenshtein_similarity(stimulus, ortho_symbol)?;
    Ok(if score > 0.0 { params.io_multiplier * score.powi(3) } else { 0.0 })
}

struct Builder {
    nodes: Vec<Node>,
    outgoing: Vec<Vec<Connection>>,
    pairs: HashSet<(NodeId, NodeId)>,
}

impl Builder {
    fn node(
        &mut self,
        pool: Pool,
        symbol: String,
        language: Option<LangId>,
        rest: f64,
        concept: Option<ConceptId>,
    ) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node { id, pool, name: symbol.clone(), symbol, language, rest, concept });
        self.outgoing.push(Vec::new());
        id
    }

    fn connect(&mut self, from: NodeId, to: NodeId, weight: f64, kind: ConnectionKind) -> Result<()> {
        if !self.pairs.insert((from, to)) {
            return Err(Error::Invariant(format!("duplicate connection {from} -> {to}")));
        }
        self.outgoing[from.index()].push(Connection { from, to, weight, kind });
        Ok(())
    }

    fn pair(
        &mut self,
        a: NodeId,
        b: NodeId,
        forward: (f64, ConnectionKind),
        backward: (f64, ConnectionKind),
    ) -> Result<()> {
        self.connect(a, b, forward.0, forward.1)?;
        self.connect(b, a, backward.0, backward.1)
    }
}

impl Network {
    /// Builds the network. Node ids: input = 0, language nodes 1 and 2, then
    /// per entry `O_a, P_a, O_b, P_b, S` in lexicon order.
    pub fn build(lexicon: &Lexicon, params: &Parameters) -> Result<Self> {
        params.validate()?;
        use ConnectionKind::*;
        let mut b =
            Builder { nodes: Vec::with_capacity(3 + 5 * lexicon.len()), outgoing: Vec::new(), pairs: HashSet::new() };
        b.node(Pool::Input, String::new(), None, params.i_rest, None);
        let lang = [
            b.node(Pool::Lang, lexicon.language_a().to_string(), None, params.l_rest, None),
            b.node(Pool::Lang, lexicon.language_b().to_string(), None, params.l_rest, None),
        ];

        for (idx, e) in lexicon.entries().iter().enumerate() {
            let concept = Some(idx as ConceptId);
            let mut words = Vec::with_capacity(2);
            for (side, ortho, phono, freq) in
                [(0u8, &e.ortho_a, &e.phono_a, e.freq_a), (1u8, &e.ortho_b, &e.phono_b, e.freq_b)]
            {
                let rest = lexicon.rest_for(freq, params)?;
                let language = Some(LangId(side));
                let o = b.node(Pool::Ortho, ortho.clone(), language, rest, concept);
                let p = b.node(Pool::Phono, phono.clone(), language, rest, concept);
                words.push((o, p, lang[side as usize]));
            }
            let s = b.node(Pool::Sem, e.ortho_b.clone(), None, params.s_rest, concept);
            for (o, p, l) in words {
                b.pair(o, p, (params.op_alpha, OP), (params.po_alpha, PO))?;
                b.pair(o, s, (params.os_alpha, OS), (params.so_alpha, SO))?;
                b.pair(p, s, (params.ps_alpha, PS), (params.sp_alpha, SP))?;
                b.pair(o, l, (params.ol_alpha, OL), (params.lo_alpha, LO))?;
                b.pair(p, l, (params.pl_alpha, PL), (params.lp_alpha, LP))?;
            }
        }

        let mut pools: [Vec<NodeId>; 5] = Default::default();
        let mut by_form: HashMap<_, Vec<NodeId>> = HashMap::new();
        for n in &b.nodes {
            pools[n.pool.index()].push(n.id);
            by_form.entry((n.pool, n.language, n.symbol.clone())).or_default().push(n.id);
        }
        // Repeated forms within one language get a concept suffix.
        for ids in by_form.values() {
            if ids.len() > 1 {
                for id in ids {
                    let n = &mut b.nodes[id.index()];
                    if let Some(c) = n.concept {
                        n.name = format!("{}#{c}", n.symbol);
                    }
                }
            }
        }

        Ok(Self {
            nodes: b.nodes,
            pools,
            outgoing: b.outgoing,
            languages: [lexicon.language_a().to_string(), lexicon.language_b().to_string()],
            params: params.clone(),
            by_form,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn pool(&self, pool: Pool) -> &[NodeId] {
        &self.pools[pool.index()]
    }

    pub fn input_node(&self) -> NodeId {
        NodeId(0)
    }

    #[inline]
    pub fn outgoing(&self, id: NodeId) -> &[Connection] {
        &self.outgoing[id.index()]
    }

    pub fn connections(&self) -> impl Iterator<Item = &Connection> {
        self.outgoing.iter().flatten()
    }

    /// Build-time parameters (connection weights and resting levels).
    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn language_tag(&self, lang: LangId) -> &str {
        &self.languages[lang.0 as usize]
    }

    pub fn language_id(&self, tag: &str) -> Result<LangId> {
        self.languages.iter().position(|l| l == tag).map(|i| LangId(i as u8)).ok_or_else(|| {
            Error::Config(format!(
                "unknown language {tag:?}; this lexicon has {} and {}",
                self.languages[0], self.languages[1]
            ))
        })
    }

    /// Nodes of `pool` in `language` whose form is exactly `symbol`.
    pub fn find(&self, pool: Pool, language: Option<LangId>, symbol: &str) -> &[NodeId] {
        self.by_form.get(&(pool, language, symbol.to_string())).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Input weight for every node (zero outside the orthographic pool).
    pub fn input_weights(&self, stimulus: &str, params: &Parameters) -> Result<Vec<f64>> {
        if stimulus.is_empty() {
            return Err(Error::Domain("stimulus must be non-empty".into()));
        }
        let stimulus = stimulus.to_uppercase();
        let mut weights = vec![0.0; self.nodes.len()];
        for &id in self.pool(Pool::Ortho) {
            weights[id.index()] = input_weight(&stimulus, &self.node(id).symbol, params)?;
        }
        Ok(weights)
    }

    pub fn describe_language(&self, node: &Node) -> &str {
        node.language.map(|l| self.language_tag(l)).unwrap_or("")
    }

    /// JSON dump of nodes and connections, for debugging.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            languages: &'a [String; 2],
            nodes: &'a [Node],
            connections: Vec<&'a Connection>,
        }
        serde_json::to_string_pretty(&Dump {
            languages: &self.languages,
            nodes: &self.nodes,
            connections: self.connections().collect(),
        })
        .expect("network dump serializes")
    }

    /// CSV edge list: `from,to,kind,weight,from_name,to_name`.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("from,to,kind,weight,from_name,to_name\n");
        for c in self.connections() {
            let _ = writeln!(
                out,
                "{},{},{:?},{},{},{}",
                c.from,
                c.to,
                c.kind,
                c.weight,
                self.node(c.from).name,
                self.node(c.to).name
            );
        }
        out
    }
}
