//! Prompt analysis and reprompting toolkit.
//!
//! The crate scores linguistic properties of a prompt, injects `[PAUSE]` tokens at clause
//! boundaries, filters and ranks paraphrase candidates, selects the most comprehensible
//! prompt using word attributions and topic similarity, and checks generated text against
//! retrieved evidence with an entailment model.

pub mod text;
pub mod pause;
pub mod provider;
pub mod cache;
pub mod nli;
pub mod gate;
pub mod attribution;
pub mod topic;
pub mod selector;
pub mod hallucination;
pub mod pipeline;
