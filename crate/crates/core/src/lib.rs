//! Automatic wrapper adaptation for web data extraction.
//!
//! A wrapper is an XPath that extracts elements from a page. When the
//! page changes and the XPath stops matching, the structure of the
//! originally extracted elements (kept in a [`Signature`]) is compared
//! against every candidate subtree of the new page with simple or
//! clustered tree matching, and a fresh XPath is induced for the best
//! match.

pub mod adapt;
pub mod dom;
pub mod error;
pub mod eval;
pub mod html;
pub mod label;
pub mod oracle;
pub mod ratio;
pub mod signature;
pub mod tree_match;
pub mod xpath;

pub use adapt::{adapt, enumerate_candidates, AdaptOptions, AdaptStatus, AdaptationReport, MatchResult};
pub use dom::{DomNode, DomTree, NodeId, TreeBuilder};
pub use error::{Error, Result};
pub use eval::{mutate, run_corpus, score_run, EvalCounts, MutationSpec};
pub use html::{parse_html, parse_html_with, to_html, ParseOptions};
pub use label::{labels_match, Algorithm, AttrKey, MatchOptions, NodeLabel, Threshold};
pub use oracle::oracle_max_mapping;
pub use signature::{load_signature, save_signature, sign, Signature, SignatureMode};
pub use tree_match::{
    clustered_tree_match, explain_match, normalized_simple_similarity, simple_tree_match, MatchTrace, ScoreKind,
    SimilarityScore,
};
pub use xpath::{eval_xpath, generalize_xpaths, induce_xpath, parse_xpath, Generalized, XPathExpr};
