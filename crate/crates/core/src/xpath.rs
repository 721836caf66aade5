//! Absolute child-axis XPaths with optional 1-based positional predicates,
//! e.g. `/html[1]/body[1]/table[1]/tr[2]/td`.
//!
//! A step `tag[k]` selects the `k`-th child among same-tag siblings. Only
//! the final step may omit its index, in which case it selects every
//! child with that tag.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dom::{DomNode, DomTree};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    pub tag: String,
    pub index: Option<NonZeroUsize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct XPathExpr {
    steps: Vec<Step>,
}

impl XPathExpr {
    /// Builds an expression, enforcing that it is non-empty and that only
    /// the last step lacks an index.
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("an XPath needs at least one step".into()));
        }
        if let Some(step) = steps[..steps.len() - 1].iter().find(|s| s.index.is_none()) {
            return Err(Error::UnsupportedXPath {
                token: step.tag.clone(),
                reason: "only the final step may omit its index".into(),
            });
        }
        Ok(XPathExpr { steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// True when the final step has no index.
    pub fn is_multi_select(&self) -> bool {
        self.steps.last().is_some_and(|s| s.index.is_none())
    }

    /// Number of positions at which the two paths differ, comparing from
    /// the root; extra trailing steps count as differences.
    pub fn step_distance(&self, other: &XPathExpr) -> usize {
        let common = self.steps.iter().zip(&other.steps).filter(|(a, b)| a != b).count();
        common + self.steps.len().abs_diff(other.steps.len())
    }
}

impl fmt::Display for XPathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            write!(f, "/{}", step.tag)?;
            if let Some(k) = step.index {
                write!(f, "[{k}]")?;
            }
        }
        Ok(())
    }
}

impl FromStr for XPathExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_xpath(s)
    }
}

impl Serialize for XPathExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for XPathExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_xpath(&text).map_err(serde::de::Error::custom)
    }
}

fn unsupported(token: &str, reason: &str) -> Error {
    Error::UnsupportedXPath {
        token: token.to_string(),
        reason: reason.to_string(),
    }
}

fn is_name(tag: &str) -> bool {
    let mut chars = tag.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Parses `"/" step ("/" step)*` with `step = tag ("[" int "]")?`.
pub fn parse_xpath(text: &str) -> Result<XPathExpr> {
    let text = text.trim();
    if text.contains("//") {
        return Err(unsupported("//", "descendant axis is not supported"));
    }
    let Some(body) = text.strip_prefix('/') else {
        let token = text.split('/').next().unwrap_or(text);
        return Err(unsupported(token, "paths must be absolute"));
    };
    let mut steps = Vec::new();
    for raw in body.split('/') {
        if raw.is_empty() {
            return Err(unsupported(text, "empty step"));
        }
        if raw.contains("::") {
            return Err(unsupported(raw, "axes are not supported"));
        }
        let (tag, index) = match raw.find('[') {
            None => (raw, None),
            Some(open) => {
                let inner = raw[open + 1..]
                    .strip_suffix(']')
                    .ok_or_else(|| unsupported(raw, "malformed predicate"))?;
                if inner.is_empty() || !inner.chars().all(|c| c.is_ascii_digit()) {
                    return Err(unsupported(&format!("[{inner}]"), "only positional predicates are supported"));
                }
                let k: usize = inner.parse().map_err(|_| unsupported(inner, "index out of range"))?;
                let k = NonZeroUsize::new(k).ok_or_else(|| unsupported("[0]", "positions start at 1"))?;
                (&raw[..open], Some(k))
            }
        };
        if !is_name(tag) {
            return Err(unsupported(tag, "not an element name"));
        }
        steps.push(Step {
            tag: tag.to_ascii_lowercase(),
            index,
        });
    }
    XPathExpr::new(steps)
}

/// Children of `node` with tag `tag`, in document order.
fn same_tag_children<'a, 't>(node: DomNode<'a>, tag: &'t str) -> impl Iterator<Item = DomNode<'a>> + use<'a, 't> {
    node.children().filter(move |c| c.tag() == tag)
}

/// Evaluates `expr`; an empty result means the wrapper no longer matches.
pub fn eval_xpath<'a>(tree: &'a DomTree, expr: &XPathExpr) -> Vec<DomNode<'a>> {
    let (first, rest) = expr.steps.split_first().expect("expression has a step");
    let root = tree.root();
    if root.tag() != first.tag || first.index.is_some_and(|k| k.get() != 1) {
        return Vec::new();
    }
    let mut current = vec![root];
    for step in rest {
        let Some(&node) = current.first() else {
            return Vec::new();
        };
        current = match step.index {
            Some(k) => same_tag_children(node, &step.tag).nth(k.get() - 1).into_iter().collect(),
            None => same_tag_children(node, &step.tag).collect(),
        };
    }
    current
}

/// Fully indexed absolute path from the root to `node`.
pub fn induce_xpath(tree: &DomTree, node: DomNode<'_>) -> Result<XPathExpr> {
    if !std::ptr::eq(tree, node.tree()) {
        return Err(Error::InvalidArgument(format!("node {} does not belong to this tree", node.id())));
    }
    let mut steps = Vec::new();
    let mut cur = Some(node);
    while let Some(n) = cur {
        if n.label().is_text() {
            return Err(Error::InvalidArgument("text nodes cannot be addressed".into()));
        }
        let k = match n.parent() {
            Some(p) => same_tag_children(p, n.tag()).position(|c| c == n).expect("node is a child of its parent") + 1,
            None => 1,
        };
        steps.push(Step {
            tag: n.tag().to_string(),
            index: NonZeroUsize::new(k),
        });
        cur = n.parent();
    }
    steps.reverse();
    XPathExpr::new(steps)
}

/// Addressing for a set of selected nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generalized {
    /// One expression with an unindexed final step. `over_selects` is set
    /// when it evaluates to more nodes than were given.
    Common { expr: XPathExpr, over_selects: bool },
    /// One indexed path per node.
    Individual(Vec<XPathExpr>),
}

impl Generalized {
    pub fn xpaths(&self) -> Vec<&XPathExpr> {
        match self {
            Generalized::Common { expr, .. } => vec![expr],
            Generalized::Individual(list) => list.iter().collect(),
        }
    }

    pub fn over_selects(&self) -> bool {
        matches!(self, Generalized::Common { over_selects: true, .. })
    }
}

/// Collapses sibling nodes with a common tag into one multi-select path;
/// otherwise returns their individual paths.
pub fn generalize_xpaths(tree: &DomTree, nodes: &[DomNode<'_>]) -> Result<Generalized> {
    let (first, _) = nodes
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("cannot generalize an empty node set".into()))?;
    let paths = nodes.iter().map(|&n| induce_xpath(tree, n)).collect::<Result<Vec<_>>>()?;
    let mut distinct: Vec<DomNode<'_>> = nodes.to_vec();
    distinct.sort_by_key(|n| n.id());
    distinct.dedup();
    let shared = distinct.len() > 1
        && first.parent().is_some()
        && distinct.iter().all(|n| n.parent() == first.parent() && n.tag() == first.tag());
    if !shared {
        return Ok(Generalized::Individual(paths));
    }
    let mut steps = paths[0].steps().to_vec();
    steps.last_mut().expect("non-empty path").index = None;
    let expr = XPathExpr::new(steps)?;
    let over_selects = eval_xpath(tree, &expr).len() > distinct.len();
    Ok(Generalized::Common { expr, over_selects })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::parse_html;

    const FIG1: &[u8] = b"<html><head></head><body><table><tr><td></td></tr><tr><td></td><td></td><td></td></tr>\
        <tr><td></td><td></td></tr></table></body></html>";

    #[test]
    fn parse_indexed_and_multi_select() {
        let a = parse_xpath("/html[1]/body[1]/table[1]/tr[1]/td[1]").unwrap();
        assert_eq!(a.steps().len(), 5);
        assert!(a.steps().iter().all(|s| s.index.is_some()));
        let b = parse_xpath("/html[1]/body[1]/table[1]/tr[2]/td").unwrap();
        assert!(b.is_multi_select());
        assert_eq!(b.to_string(), "/html[1]/body[1]/table[1]/tr[2]/td");
    }

    #[test]
    fn rejects_other_dialects() {
        for (text, token) in [
            ("//td", "//"),
            ("/html[1]/body[@id='x']", "[@id='x']"),
            ("/html[1]/child::body[1]", "child::body[1]"),
            ("/html[1]/*", "*"),
            ("html[1]", "html[1]"),
            ("/html[0]", "[0]"),
        ] {
            match parse_xpath(text) {
                Err(Error::UnsupportedXPath { token: t, .. }) => assert_eq!(t, token, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(parse_xpath("/html/body[1]").is_err());
        assert!(parse_xpath("/").is_err());
    }

    #[test]
    fn eval_figure_paths() {
        let t = parse_html(FIG1).unwrap();
        let a = eval_xpath(&t, &parse_xpath("/html[1]/body[1]/table[1]/tr[1]/td[1]").unwrap());
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].parent().unwrap().position(), 0);
        let b = eval_xpath(&t, &parse_xpath("/html[1]/body[1]/table[1]/tr[2]/td").unwrap());
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|n| n.parent() == b[0].parent()));
        assert!(eval_xpath(&t, &parse_xpath("/nosuchtag[1]").unwrap()).is_empty());
        assert!(eval_xpath(&t, &parse_xpath("/html[2]").unwrap()).is_empty());
        assert!(eval_xpath(&t, &parse_xpath("/html[1]/body[1]/table[1]/tr[9]/td").unwrap()).is_empty());
    }

    #[test]
    fn index_counts_same_tag_siblings_only() {
        let t = parse_html(b"<body><p></p><div></div><p id=x></p></body>").unwrap();
        let hit = eval_xpath(&t, &parse_xpath("/html[1]/body[1]/p[2]").unwrap());
        assert_eq!(hit[0].label().attr("id"), Some("x"));
        assert_eq!(induce_xpath(&t, hit[0]).unwrap().to_string(), "/html[1]/body[1]/p[2]");
    }

    #[test]
    fn induce_paths() {
        let t = parse_html(FIG1).unwrap();
        assert_eq!(induce_xpath(&t, t.root()).unwrap().to_string(), "/html[1]");
        let second_row = eval_xpath(&t, &parse_xpath("/html[1]/body[1]/table[1]/tr[2]/td").unwrap());
        let p = induce_xpath(&t, second_row[1]).unwrap();
        assert_eq!(p.to_string(), "/html[1]/body[1]/table[1]/tr[2]/td[2]");
        assert_eq!(eval_xpath(&t, &p), vec![second_row[1]]);
        let other = parse_html(FIG1).unwrap();
        assert!(induce_xpath(&other, t.root()).is_err());
    }

    #[test]
    fn generalization() {
        let t = parse_html(FIG1).unwrap();
        let row = eval_xpath(&t, &parse_xpath("/html[1]/body[1]/table[1]/tr[2]/td").unwrap());
        match generalize_xpaths(&t, &row).unwrap() {
            Generalized::Common { expr, over_selects } => {
                assert_eq!(expr.to_string(), "/html[1]/body[1]/table[1]/tr[2]/td");
                assert!(!over_selects);
            }
            other => panic!("{other:?}"),
        }
        let partial = generalize_xpaths(&t, &row[..2]).unwrap();
        assert!(partial.over_selects());

        let single = generalize_xpaths(&t, &row[..1]).unwrap();
        assert_eq!(single, Generalized::Individual(vec![induce_xpath(&t, row[0]).unwrap()]));

        let first = eval_xpath(&t, &parse_xpath("/html[1]/body[1]/table[1]/tr[1]/td[1]").unwrap())[0];
        let mixed = generalize_xpaths(&t, &[first, row[0]]).unwrap();
        assert_eq!(mixed.xpaths().len(), 2);
        assert!(generalize_xpaths(&t, &[]).is_err());
    }

    #[test]
    fn step_distance() {
        let a = parse_xpath("/html[1]/body[1]/table[1]/tr[1]/td[1]").unwrap();
        let b = parse_xpath("/html[1]/body[1]/table[1]/tr[2]/td[1]").unwrap();
        let c = parse_xpath("/html[1]/body[1]/div[1]/table[1]/tr[1]/td[1]").unwrap();
        assert_eq!(a.step_distance(&a), 0);
        assert_eq!(a.step_distance(&b), 1);
        assert_eq!(a.step_distance(&c), 4);
    }
}
