//! Bilingual interactive-activation lexicon simulator.
//!
//! A lexicon of translation pairs becomes a network of orthographic,
//! phonological, semantic and language nodes. Stimuli are presented to the
//! orthographic pool, activation spreads for a number of cycles, and a task
//! monitor (lexical decision, naming or word translation) decides when and
//! how the model responds.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fitting;
pub mod lexicon;
pub mod network;
pub mod params;
pub mod reference;
pub mod tasks;

pub use dynamics::{run, run_engine, ActiveSetEngine, Engine, Monitor, RunOutput, SimulationState, Trace, TraceMode};
pub use error::{Error, Result};
pub use lexicon::{DuplicatePolicy, Lexicon, LexiconEntry, LexiconOptions};
pub use network::{Network, NodeId, Pool};
pub use params::Parameters;
pub use tasks::{Response, Task, TaskOutcome};
