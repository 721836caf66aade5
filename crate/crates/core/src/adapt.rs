//! Wrapper adaptation: when a signature's XPath no longer matches, find the
//! subtrees of the new page most similar to the stored snapshots and
//! induce fresh XPaths for them.

use std::cmp::Ordering;

use log::{debug, info};
use serde::Serialize;

use crate::dom::{DomNode, DomTree};
use crate::error::Result;
use crate::label::{labels_match, Algorithm, AttrKey, MatchOptions, TagClass, Threshold};
use crate::ratio;
use crate::signature::{Signature, SignatureMode};
use crate::tree_match::{explain_match, similarity, MatchTrace, SimilarityScore};
use crate::xpath::{eval_xpath, generalize_xpaths, induce_xpath, Generalized, XPathExpr};

/// Adaptation-time overrides of the options stored in a signature.
#[derive(Clone, Debug, Default)]
pub struct AdaptOptions {
    pub threshold: Option<Threshold>,
    pub algorithm: Option<Algorithm>,
    pub attr_keys: Option<Vec<AttrKey>>,
    pub tag_classes: Option<Vec<TagClass>>,
    /// Skip candidates whose size differs from every snapshot by more
    /// than this factor.
    pub max_size_ratio: Option<f64>,
    /// In multi mode, keep only the higher-scoring node of any accepted
    /// ancestor/descendant pair.
    pub prune_nested: bool,
    /// Keep the matrix traces of accepted matches.
    pub explain: bool,
}

impl AdaptOptions {
    /// Signature options with the overrides applied.
    pub fn effective(&self, sig: &Signature) -> MatchOptions {
        let mut opts = sig.options.clone();
        if let Some(t) = &self.threshold {
            opts.threshold = t.clone();
        }
        if let Some(a) = self.algorithm {
            opts.algorithm = a;
        }
        if let Some(keys) = &self.attr_keys {
            opts.attr_keys = keys.clone();
        }
        if let Some(classes) = &self.tag_classes {
            opts.tag_classes = classes.clone();
        }
        opts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptStatus {
    XpathStillValid,
    Adapted,
    NoMatch,
}

#[derive(Clone, Debug)]
pub struct MatchResult<'a> {
    pub node: DomNode<'a>,
    pub score: SimilarityScore,
    pub matched_snapshot: usize,
    pub induced_xpath: XPathExpr,
}

#[derive(Clone, Debug)]
pub struct AdaptationReport<'a> {
    pub status: AdaptStatus,
    pub original_xpath: XPathExpr,
    /// Accepted matches, in document order.
    pub results: Vec<MatchResult<'a>>,
    /// Nodes the original XPath still selects (`XpathStillValid` only).
    pub still_valid: Vec<DomNode<'a>>,
    pub generalized: Option<Generalized>,
    pub candidates_scored: usize,
    pub threshold_used: Threshold,
    pub algorithm: Algorithm,
    /// Best-scoring rejected candidates, to help tune the threshold.
    pub near_misses: Vec<MatchResult<'a>>,
    pub traces: Vec<MatchTrace>,
}

const NEAR_MISSES: usize = 3;

impl<'a> AdaptationReport<'a> {
    /// The nodes the repaired wrapper extracts.
    pub fn nodes(&self) -> Vec<DomNode<'a>> {
        match self.status {
            AdaptStatus::XpathStillValid => self.still_valid.clone(),
            _ => self.results.iter().map(|r| r.node).collect(),
        }
    }

    pub fn to_document(&self) -> ReportDocument {
        let entry = |r: &MatchResult<'_>| ResultEntry {
            xpath: r.induced_xpath.to_string(),
            score: r.score.to_f64(),
            score_fraction: ratio::fraction_string(&r.score.value),
            snapshot_index: r.matched_snapshot,
        };
        ReportDocument {
            status: self.status,
            algorithm: self.algorithm,
            original_xpath: self.original_xpath.to_string(),
            threshold: ThresholdEntry {
                decimal: self.threshold_used.to_f64(),
                fraction: ratio::fraction_string(self.threshold_used.value()),
            },
            candidates_scored: self.candidates_scored,
            still_valid_xpaths: self
                .still_valid
                .iter()
                .filter_map(|&n| induce_xpath(n.tree(), n).ok())
                .map(|x| x.to_string())
                .collect(),
            results: self.results.iter().map(entry).collect(),
            generalized_xpath: self.generalized.as_ref().map(|g| GeneralizedEntry {
                xpaths: g.xpaths().iter().map(|x| x.to_string()).collect(),
                over_selects: g.over_selects(),
            }),
            near_misses: self.near_misses.iter().map(entry).collect(),
            explain: self.traces.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&self.to_document())?;
        text.push('\n');
        Ok(text)
    }
}

/// Serialized form of an [`AdaptationReport`].
#[derive(Clone, Debug, Serialize)]
pub struct ReportDocument {
    pub status: AdaptStatus,
    pub algorithm: Algorithm,
    pub original_xpath: String,
    pub threshold: ThresholdEntry,
    pub candidates_scored: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub still_valid_xpaths: Vec<String>,
    pub results: Vec<ResultEntry>,
    pub generalized_xpath: Option<GeneralizedEntry>,
    pub near_misses: Vec<ResultEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub explain: Vec<MatchTrace>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdEntry {
    pub decimal: f64,
    pub fraction: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultEntry {
    pub xpath: String,
    pub score: f64,
    pub score_fraction: String,
    pub snapshot_index: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeneralizedEntry {
    pub xpaths: Vec<String>,
    pub over_selects: bool,
}

/// Page nodes, in document order, whose label matches the root of some
/// snapshot. With `max_size_ratio`, nodes whose size is off by more than
/// that factor from every such snapshot are dropped.
pub fn enumerate_candidates<'a>(
    page: &'a DomTree,
    sig: &Signature,
    opts: &MatchOptions,
    max_size_ratio: Option<f64>,
) -> Vec<DomNode<'a>> {
    page.nodes()
        .filter(|node| {
            sig.snapshots.iter().any(|snap| {
                let root = snap.root();
                labels_match(root.label(), node.label(), opts)
                    && max_size_ratio.is_none_or(|r| {
                        let (x, y) = (node.node_count() as f64, root.node_count() as f64);
                        x.max(y) / x.min(y) <= r
                    })
            })
        })
        .collect()
}

struct Scored<'a> {
    node: DomNode<'a>,
    score: SimilarityScore,
    snapshot: usize,
}

fn by_score_desc(a: &Scored<'_>, b: &Scored<'_>) -> Ordering {
    b.score.value.cmp(&a.score.value).then(a.node.id().cmp(&b.node.id()))
}

/// Repairs the wrapper described by `sig` against `page`.
pub fn adapt<'a>(page: &'a DomTree, sig: &Signature, overrides: &AdaptOptions) -> Result<AdaptationReport<'a>> {
    let opts = overrides.effective(sig);
    opts.validate()?;
    let mut report = AdaptationReport {
        status: AdaptStatus::NoMatch,
        original_xpath: sig.original_xpath.clone(),
        results: Vec::new(),
        still_valid: Vec::new(),
        generalized: None,
        candidates_scored: 0,
        threshold_used: opts.threshold.clone(),
        algorithm: opts.algorithm,
        near_misses: Vec::new(),
        traces: Vec::new(),
    };

    let current = eval_xpath(page, &sig.original_xpath);
    if !current.is_empty() {
        debug!("{} still selects {} node(s)", sig.original_xpath, current.len());
        report.status = AdaptStatus::XpathStillValid;
        report.still_valid = current;
        return Ok(report);
    }

    let candidates = enumerate_candidates(page, sig, &opts, overrides.max_size_ratio);
    report.candidates_scored = candidates.len();
    let mut scored: Vec<Scored<'a>> = candidates
        .into_iter()
        .map(|node| {
            let mut best: Option<Scored<'a>> = None;
            for (i, snap) in sig.snapshots.iter().enumerate() {
                let score = similarity(snap.root(), node, &opts, opts.algorithm);
                if best.as_ref().is_none_or(|b| score.value > b.score.value) {
                    best = Some(Scored { node, score, snapshot: i });
                }
            }
            best.expect("signature has at least one snapshot")
        })
        .collect();

    let threshold = opts.threshold.value();
    let (mut accepted, mut rejected): (Vec<_>, Vec<_>) = scored.drain(..).partition(|s| &s.score.value >= threshold);

    rejected.sort_by(by_score_desc);
    for miss in rejected.iter().take(NEAR_MISSES) {
        info!(
            "near miss: {} scored {} (threshold {})",
            miss.node.id(),
            ratio::fraction_string(&miss.score.value),
            opts.threshold
        );
    }

    match sig.mode {
        SignatureMode::Single => {
            accepted.sort_by(|a, b| {
                b.score.value.cmp(&a.score.value).then_with(|| {
                    let da = induce_xpath(page, a.node).map(|x| x.step_distance(&sig.original_xpath));
                    let db = induce_xpath(page, b.node).map(|x| x.step_distance(&sig.original_xpath));
                    da.unwrap_or(usize::MAX)
                        .cmp(&db.unwrap_or(usize::MAX))
                        .then(a.node.id().cmp(&b.node.id()))
                })
            });
            accepted.truncate(1);
        }
        SignatureMode::Multi if overrides.prune_nested => {
            accepted.sort_by(by_score_desc);
            let mut kept: Vec<Scored<'a>> = Vec::new();
            for s in accepted {
                if !kept.iter().any(|k| k.node.is_ancestor_of(s.node) || s.node.is_ancestor_of(k.node)) {
                    kept.push(s);
                }
            }
            kept.sort_by_key(|s| s.node.id());
            accepted = kept;
        }
        SignatureMode::Multi => {}
    }

    let to_result = |s: Scored<'a>| -> Result<MatchResult<'a>> {
        Ok(MatchResult {
            induced_xpath: induce_xpath(page, s.node)?,
            node: s.node,
            score: s.score,
            matched_snapshot: s.snapshot,
        })
    };
    report.near_misses = rejected
        .into_iter()
        .take(NEAR_MISSES)
        .filter(|s| !s.node.label().is_text())
        .map(to_result)
        .collect::<Result<_>>()?;
    report.results = accepted.into_iter().map(to_result).collect::<Result<_>>()?;

    if report.results.is_empty() {
        return Ok(report);
    }
    report.status = AdaptStatus::Adapted;
    if sig.mode == SignatureMode::Multi {
        let nodes: Vec<_> = report.results.iter().map(|r| r.node).collect();
        report.generalized = Some(generalize_xpaths(page, &nodes)?);
    }
    if overrides.explain {
        report.traces = report
            .results
            .iter()
            .map(|r| explain_match(sig.snapshots[r.matched_snapshot].root(), r.node, &opts, opts.algorithm))
            .collect();
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::parse_html;
    use crate::signature::sign;
    use crate::xpath::parse_xpath;
    use num_traits::One;

    const FIG1: &str = "<html><head></head><body><table>\
        <tr><td><b></b><i></i></td></tr>\
        <tr><td></td><td></td><td></td></tr>\
        <tr><td></td><td></td></tr></table></body></html>";

    const MOVED: &str = "<html><head></head><body><table>\
        <tr></tr>\
        <tr><td><b></b><i></i></td><td></td><td></td></tr>\
        <tr><td></td><td></td></tr></table></body></html>";

    fn fig1_signature(xpath: &str) -> Signature {
        let page = parse_html(FIG1.as_bytes()).unwrap();
        sign(&page, &parse_xpath(xpath).unwrap(), &MatchOptions::default()).unwrap()
    }

    #[test]
    fn unchanged_page_short_circuits() {
        let sig = fig1_signature("/html[1]/body[1]/table[1]/tr[1]/td[1]");
        let page = parse_html(FIG1.as_bytes()).unwrap();
        let report = adapt(&page, &sig, &AdaptOptions::default()).unwrap();
        assert_eq!(report.status, AdaptStatus::XpathStillValid);
        assert_eq!(report.candidates_scored, 0);
        assert_eq!(report.nodes(), eval_xpath(&page, &sig.original_xpath));
    }

    #[test]
    fn moved_element_is_found() {
        let sig = fig1_signature("/html[1]/body[1]/table[1]/tr[1]/td[1]");
        let page = parse_html(MOVED.as_bytes()).unwrap();
        let report = adapt(&page, &sig, &AdaptOptions::default()).unwrap();
        assert_eq!(report.status, AdaptStatus::Adapted);
        assert_eq!(report.results.len(), 1);
        let r = &report.results[0];
        assert_eq!(r.induced_xpath.to_string(), "/html[1]/body[1]/table[1]/tr[2]/td[1]");
        assert!(r.score.value.is_one());
        assert_eq!(eval_xpath(&page, &r.induced_xpath), vec![r.node]);
        assert!(report.candidates_scored > 1);
    }

    #[test]
    fn below_threshold_is_no_match() {
        let sig = fig1_signature("/html[1]/body[1]/table[1]/tr[1]/td[1]");
        let page = parse_html(b"<html><head></head><body><div><td></td></div><ul><li>x</li></ul></body></html>").unwrap();
        let report = adapt(
            &page,
            &sig,
            &AdaptOptions {
                threshold: Some("0.9".parse().unwrap()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(report.status, AdaptStatus::NoMatch);
        assert!(report.results.is_empty());
    }

    #[test]
    fn candidates_by_tag_and_class() {
        let page = parse_html(FIG1.as_bytes()).unwrap();
        let sig = fig1_signature("/html[1]/body[1]/table[1]/tr[1]/td[1]");
        let tds = enumerate_candidates(&page, &sig, &sig.options, None);
        assert_eq!(tds.len(), 6);

        let table_sig = fig1_signature("/html[1]/body[1]/table[1]");
        let divs = parse_html(b"<body><div><ul><li></li></ul></div><ol></ol><p></p></body>").unwrap();
        assert!(enumerate_candidates(&divs, &table_sig, &table_sig.options, None).is_empty());
        let with_classes = table_sig.options.clone().with_comparable_tags();
        let found = enumerate_candidates(&divs, &table_sig, &with_classes, None);
        let tags: Vec<_> = found.iter().map(|n| n.tag()).collect();
        assert_eq!(tags, ["div", "ul", "ol"]);
    }

    #[test]
    fn size_ratio_pruning() {
        let page = parse_html(FIG1.as_bytes()).unwrap();
        let sig = fig1_signature("/html[1]/body[1]/table[1]/tr[1]/td[1]");
        // the snapshot has 3 nodes; bare tds have 1
        assert_eq!(enumerate_candidates(&page, &sig, &sig.options, Some(2.0)).len(), 1);
        assert_eq!(enumerate_candidates(&page, &sig, &sig.options, Some(3.0)).len(), 6);
    }

    #[test]
    fn multi_mode_returns_all_matches_with_generalized_path() {
        let sig = fig1_signature("/html[1]/body[1]/table[1]/tr[2]/td");
        let page = parse_html(
            b"<html><head></head><body><div><table><tr><td></td></tr><tr><td></td><td></td><td></td></tr></table></div></body></html>",
        )
        .unwrap();
        let report = adapt(&page, &sig, &AdaptOptions::default()).unwrap();
        assert_eq!(report.status, AdaptStatus::Adapted);
        assert_eq!(report.results.len(), 4);
        let g = report.generalized.as_ref().unwrap();
        assert_eq!(g.xpaths().len(), 4);
        let doc = report.to_json().unwrap();
        assert!(doc.contains("\"status\": \"adapted\""));
        assert!(doc.contains("\"score_fraction\": \"1\""));
    }

    #[test]
    fn tie_break_prefers_the_closest_path() {
        // two identical candidates; the one nearer the original location wins
        let page = parse_html(FIG1.as_bytes()).unwrap();
        let sig = sign(&page, &parse_xpath("/html[1]/body[1]/table[1]/tr[3]/td[2]").unwrap(), &MatchOptions::default()).unwrap();
        let changed = parse_html(
            b"<html><head></head><body><table><tr><td></td></tr><tr><td></td></tr><tr><td></td></tr></table></body></html>",
        )
        .unwrap();
        let report = adapt(&changed, &sig, &AdaptOptions::default()).unwrap();
        assert_eq!(report.results[0].induced_xpath.to_string(), "/html[1]/body[1]/table[1]/tr[3]/td[1]");
    }

    #[test]
    fn nested_candidates_and_pruning() {
        let page = parse_html(b"<html><head></head><body><div><div></div></div></body></html>").unwrap();
        let sig = sign(&page, &parse_xpath("/html[1]/body[1]/div").unwrap(), &MatchOptions::default()).unwrap();
        let changed = parse_html(b"<html><head></head><body><section><div><div></div></div></section></body></html>").unwrap();
        let low = AdaptOptions {
            threshold: Some("0.5".parse().unwrap()),
            ..Default::default()
        };
        let both = adapt(&changed, &sig, &low).unwrap();
        assert_eq!(both.results.len(), 2);
        let pruned = adapt(&changed, &sig, &AdaptOptions { prune_nested: true, ..low }).unwrap();
        assert_eq!(pruned.results.len(), 1);
        assert!(pruned.results[0].score.value.is_one());
    }

    #[test]
    fn explain_keeps_traces() {
        let sig = fig1_signature("/html[1]/body[1]/table[1]/tr[1]/td[1]");
        let page = parse_html(MOVED.as_bytes()).unwrap();
        let report = adapt(&page, &sig, &AdaptOptions { explain: true, ..Default::default() }).unwrap();
        assert_eq!(report.traces.len(), 1);
        assert!(report.to_json().unwrap().contains("\"explain\""));
    }
}
