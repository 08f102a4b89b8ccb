//! Learn an ASR error channel from word confusion networks and use it to
//! inject realistic recognition errors, with corrective labels, into clean
//! dialogue text. Also groups knowledge-base FAQ titles into topic clusters.
//!
//! The pipeline:
//!
//! 1. [`cn`] parses N-best lists and confusion networks and aligns N-best
//!    lists into confusion networks.
//! 2. [`edit_model`] mines word confusion pairs, aligns them letter to letter
//!    and estimates the position-dependent rewrite model.
//! 3. [`simulator`] samples erroneous words and corrupts utterances;
//!    [`corpus`] applies that to whole dialogue datasets.
//! 4. [`kb`] clusters knowledge titles and emits title-body pair datasets.

pub mod align;
pub mod cn;
pub mod corpus;
pub mod edit_model;
pub mod kb;
pub mod simulator;
