//! Tooling for turning per-frame detector and scoreboard-OCR output from
//! fixed-angle judo tournament footage into combat-phase labels, match
//! segments and time-motion statistics.
//!
//! The pipeline is file based. Extraction produces `.frames.jsonl` streams
//! ([`interchange`]); the scoreboard timer is cleaned and differentiated
//! ([`timer`]); rule-based pre-annotators draft entity and phase labels
//! ([`preannotate`]); detector embeddings are compressed into features
//! ([`features`]) and fed to per-target logistic regressions ([`model`]);
//! scene classes and phase triples are turned into matches and statistics
//! ([`segment`]). [`synth`] generates deterministic synthetic tournaments
//! used as a test oracle for all of the above.

pub mod error;
pub mod features;
pub mod interchange;
pub mod model;
pub mod phase;
pub mod preannotate;
pub mod rng;
pub mod segment;
pub mod synth;
pub mod timer;

pub use error::{Error, Result};
pub use phase::{PhaseState, PhaseTriple};
