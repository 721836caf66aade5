//! Deterministic page mutations that mimic layout drift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dom::{DomTree, TreeBuilder};
use crate::error::{Error, Result};
use crate::html::ORACLE_ATTR;
use crate::label::{MatchOptions, NodeLabel, RETAINED_ATTRS};
use crate::xpath::{eval_xpath, XPathExpr};

/// Nodes an operation applies to: one node chosen by the seeded generator
/// among the matches, or all of them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "LocusRepr", into = "LocusRepr")]
pub struct Locus {
    pub xpath: XPathExpr,
    pub all: bool,
}

impl Locus {
    pub fn one(xpath: XPathExpr) -> Self {
        Locus { xpath, all: false }
    }

    pub fn all(xpath: XPathExpr) -> Self {
        Locus { xpath, all: true }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LocusRepr {
    Path(XPathExpr),
    Full {
        xpath: XPathExpr,
        #[serde(default)]
        all: bool,
    },
}

impl From<LocusRepr> for Locus {
    fn from(r: LocusRepr) -> Self {
        match r {
            LocusRepr::Path(xpath) => Locus { xpath, all: false },
            LocusRepr::Full { xpath, all } => Locus { xpath, all },
        }
    }
}

impl From<Locus> for LocusRepr {
    fn from(l: Locus) -> Self {
        if l.all {
            LocusRepr::Full {
                xpath: l.xpath,
                all: true,
            }
        } else {
            LocusRepr::Path(l.xpath)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mutation {
    /// Inserts a new sibling next to the locus: the given outline, or a
    /// copy of the locus subtree. Copies carry derived oracle markers only
    /// when `mark_copy` is set.
    InsertSibling {
        locus: Locus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outline: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        after: Option<bool>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        mark_copy: bool,
    },
    DeleteLeaf {
        locus: Locus,
    },
    DeleteBranch {
        locus: Locus,
    },
    /// Changes the tag to another member of a comparable-tag class.
    RelabelWithinClass {
        locus: Locus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<String>,
    },
    /// Inserts a new parent element around the locus.
    WrapElement {
        locus: Locus,
        tag: String,
    },
    /// Sets (or, without a value, removes) a retained attribute.
    AttributeChange {
        locus: Locus,
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<String>,
    },
    /// Re-parents the locus subtree under the node selected by `target`.
    MoveSubtree {
        locus: Locus,
        target: XPathExpr,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
}

impl Mutation {
    pub fn kind(&self) -> &'static str {
        match self {
            Mutation::InsertSibling { .. } => "insert_sibling",
            Mutation::DeleteLeaf { .. } => "delete_leaf",
            Mutation::DeleteBranch { .. } => "delete_branch",
            Mutation::RelabelWithinClass { .. } => "relabel_within_class",
            Mutation::WrapElement { .. } => "wrap_element",
            Mutation::AttributeChange { .. } => "attribute_change",
            Mutation::MoveSubtree { .. } => "move_subtree",
        }
    }

    fn locus(&self) -> &Locus {
        match self {
            Mutation::InsertSibling { locus, .. }
            | Mutation::DeleteLeaf { locus }
            | Mutation::DeleteBranch { locus }
            | Mutation::RelabelWithinClass { locus, .. }
            | Mutation::WrapElement { locus, .. }
            | Mutation::AttributeChange { locus, .. }
            | Mutation::MoveSubtree { locus, .. } => locus,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub operations: Vec<Mutation>,
}

impl MutationSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MutationSpec(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Mutated page plus the oracle markers that deletions removed.
#[derive(Clone, Debug)]
pub struct MutationOutcome {
    pub tree: DomTree,
    pub removed_markers: Vec<String>,
}

pub fn mutate(page: &DomTree, spec: &MutationSpec) -> Result<DomTree> {
    mutate_with_outcome(page, spec).map(|o| o.tree)
}

/// Applies the operations in order; each locus is resolved against the
/// tree produced by the previous operation.
pub fn mutate_with_outcome(page: &DomTree, spec: &MutationSpec) -> Result<MutationOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tree = page.clone();
    let mut removed = Vec::new();
    let mut copies = 0usize;
    for (k, op) in spec.operations.iter().enumerate() {
        let locus = op.locus();
        let matches: Vec<usize> = eval_xpath(&tree, &locus.xpath).iter().map(|n| n.id().index()).collect();
        if matches.is_empty() {
            return Err(Error::MutationSpec(format!(
                "operation {k} ({}): locus {} resolves to nothing",
                op.kind(),
                locus.xpath
            )));
        }
        let targets = if locus.all {
            matches
        } else {
            vec![matches[rng.random_range(0..matches.len())]]
        };
        let mut builder = tree.to_builder();
        for &node in targets.iter().rev() {
            apply(&mut builder, &tree, node, op, &mut rng, &mut removed, &mut copies)
                .map_err(|e| Error::MutationSpec(format!("operation {k} ({}): {e}", op.kind())))?;
        }
        tree = builder.build();
    }
    Ok(MutationOutcome {
        tree,
        removed_markers: removed,
    })
}

fn parent_of(b: &TreeBuilder, node: usize) -> std::result::Result<(usize, usize), String> {
    let parent = b.parent(node).ok_or("the root cannot be moved, wrapped or deleted")?;
    let pos = b.children(parent).iter().position(|&c| c == node).expect("listed child");
    Ok((parent, pos))
}

fn subtree_markers(b: &TreeBuilder, node: usize, out: &mut Vec<String>) {
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if let Some(m) = b.marker(n) {
            out.push(m.to_string());
        }
        stack.extend(b.children(n).iter().rev());
    }
}

fn apply(
    b: &mut TreeBuilder,
    tree: &DomTree,
    node: usize,
    op: &Mutation,
    rng: &mut ChaCha8Rng,
    removed: &mut Vec<String>,
    copies: &mut usize,
) -> std::result::Result<(), String> {
    match op {
        Mutation::InsertSibling {
            outline,
            after,
            mark_copy,
            ..
        } => {
            let (parent, pos) = parent_of(b, node)?;
            let after = after.unwrap_or_else(|| rng.random_bool(0.5));
            let index = if after { pos + 1 } else { pos };
            match outline {
                Some(outline) => {
                    let fresh = DomTree::from_outline(outline).map_err(|e| e.to_string())?;
                    b.copy_subtree(fresh.root(), parent, index, false);
                }
                None => {
                    let src = tree.nodes().nth(node).expect("node id in range");
                    let top = b.copy_subtree(src, parent, index, false);
                    if *mark_copy {
                        *copies += 1;
                        let mut stack = vec![(src, top)];
                        while let Some((s, d)) = stack.pop() {
                            if let Some(m) = s.marker() {
                                b.set_marker(d, Some(format!("{m}~{copies}")));
                            }
                            stack.extend(s.children().zip(b.children(d).to_vec()));
                        }
                    }
                }
            }
        }
        Mutation::DeleteLeaf { .. } => {
            if !b.children(node).is_empty() {
                return Err(format!("node <{}> is not a leaf", b.label(node).tag()));
            }
            parent_of(b, node)?;
            subtree_markers(b, node, removed);
            b.detach(node);
        }
        Mutation::DeleteBranch { .. } => {
            parent_of(b, node)?;
            subtree_markers(b, node, removed);
            b.detach(node);
        }
        Mutation::RelabelWithinClass { to, .. } => {
            let tag = b.label(node).tag().to_string();
            let classes = MatchOptions::default_tag_classes();
            let peers: Vec<String> = classes
                .iter()
                .filter(|c| c.contains(&tag))
                .flat_map(|c| c.iter().cloned())
                .filter(|t| *t != tag)
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let new_tag = match to {
                Some(t) if peers.contains(&t.to_ascii_lowercase()) => t.to_ascii_lowercase(),
                Some(t) => return Err(format!("<{tag}> and <{t}> share no comparable-tag class")),
                None if peers.is_empty() => return Err(format!("<{tag}> belongs to no comparable-tag class")),
                None => peers[rng.random_range(0..peers.len())].clone(),
            };
            b.label_mut(node).set_tag(&new_tag).map_err(|e| e.to_string())?;
        }
        Mutation::WrapElement { tag, .. } => {
            let (parent, pos) = parent_of(b, node)?;
            let label = NodeLabel::new(tag).map_err(|e| e.to_string())?;
            b.detach(node);
            let wrapper = b.insert_child(parent, pos, label);
            b.attach(node, wrapper, 0);
        }
        Mutation::AttributeChange { name, value, .. } => {
            let name = name.to_ascii_lowercase();
            if name == ORACLE_ATTR || !RETAINED_ATTRS.contains(&name.as_str()) {
                return Err(format!("attribute `{name}` is not part of the structural model"));
            }
            match value {
                Some(v) => b.label_mut(node).set_attr(&name, v),
                None => b.label_mut(node).remove_attr(&name),
            }
        }
        Mutation::MoveSubtree { target, index, .. } => {
            let dests: Vec<usize> = eval_xpath(tree, target).iter().map(|n| n.id().index()).collect();
            let dest = match dests.as_slice() {
                [] => return Err(format!("target {target} resolves to nothing")),
                [one] => *one,
                many => many[rng.random_range(0..many.len())],
            };
            if dest == node || b.is_ancestor(node, dest) {
                return Err("cannot move a subtree into itself".into());
            }
            parent_of(b, node)?;
            b.detach(node);
            let len = b.children(dest).len();
            let index = index.unwrap_or_else(|| rng.random_range(0..=len));
            b.attach(node, dest, index);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::{parse_html, to_html};
    use crate::xpath::parse_xpath;

    const FIG1: &[u8] = b"<html><head></head><body><table><tr><td data-oracle=\"a\"></td></tr><tr><td></td><td></td><td></td></tr>\
        <tr><td></td><td></td></tr></table></body></html>";

    fn x(s: &str) -> XPathExpr {
        parse_xpath(s).unwrap()
    }

    fn spec(ops: Vec<Mutation>) -> MutationSpec {
        MutationSpec { seed: 7, operations: ops }
    }

    #[test]
    fn empty_spec_is_identity() {
        let page = parse_html(FIG1).unwrap();
        let out = mutate(&page, &MutationSpec::default()).unwrap();
        assert_eq!(out, page);
        assert_eq!(to_html(&out), to_html(&page));
    }

    #[test]
    fn relabel_table_to_div_keeps_shape() {
        let page = parse_html(FIG1).unwrap();
        let out = mutate(
            &page,
            &spec(vec![Mutation::RelabelWithinClass {
                locus: Locus::one(x("/html[1]/body[1]/table[1]")),
                to: Some("div".into()),
            }]),
        )
        .unwrap();
        assert_eq!(out.to_outline(), "html(head,body(div(tr(td),tr(td,td,td),tr(td,td))))");
        let err = mutate(
            &page,
            &spec(vec![Mutation::RelabelWithinClass {
                locus: Locus::one(x("/html[1]/body[1]/table[1]")),
                to: Some("li".into()),
            }]),
        );
        assert!(err.is_err());
    }

    #[test]
    fn wrap_inserts_a_parent() {
        let page = parse_html(FIG1).unwrap();
        let out = mutate(
            &page,
            &spec(vec![Mutation::WrapElement {
                locus: Locus::one(x("/html[1]/body[1]/table[1]")),
                tag: "div".into(),
            }]),
        )
        .unwrap();
        assert_eq!(out.to_outline(), "html(head,body(div(table(tr(td),tr(td,td,td),tr(td,td)))))");
        assert_eq!(out.markers(), ["a"]);
    }

    #[test]
    fn inserted_row_shifts_positions() {
        let page = parse_html(FIG1).unwrap();
        let out = mutate(
            &page,
            &spec(vec![Mutation::InsertSibling {
                locus: Locus::one(x("/html[1]/body[1]/table[1]/tr[1]")),
                outline: Some("tr(td,td)".into()),
                after: Some(true),
                mark_copy: false,
            }]),
        )
        .unwrap();
        let table = eval_xpath(&out, &x("/html[1]/body[1]/table[1]"))[0];
        assert_eq!(table.degree(), 4);
        // the old multi-select path now lands on the inserted two-cell row
        assert_eq!(eval_xpath(&out, &x("/html[1]/body[1]/table[1]/tr[2]/td")).len(), 2);
    }

    #[test]
    fn copies_and_markers() {
        let page = parse_html(FIG1).unwrap();
        let out = mutate(
            &page,
            &spec(vec![Mutation::InsertSibling {
                locus: Locus::one(x("/html[1]/body[1]/table[1]/tr[1]")),
                outline: None,
                after: Some(false),
                mark_copy: true,
            }]),
        )
        .unwrap();
        assert_eq!(out.markers(), ["a~1", "a"]);
        let unmarked = mutate(
            &page,
            &spec(vec![Mutation::InsertSibling {
                locus: Locus::one(x("/html[1]/body[1]/table[1]/tr[1]")),
                outline: None,
                after: Some(false),
                mark_copy: false,
            }]),
        )
        .unwrap();
        assert_eq!(unmarked.markers(), ["a"]);
    }

    #[test]
    fn deletions_record_missing_markers() {
        let page = parse_html(FIG1).unwrap();
        let out = mutate_with_outcome(
            &page,
            &spec(vec![Mutation::DeleteBranch {
                locus: Locus::one(x("/html[1]/body[1]/table[1]/tr[1]")),
            }]),
        )
        .unwrap();
        assert_eq!(out.removed_markers, ["a"]);
        assert!(out.tree.markers().is_empty());
        let leaf = mutate_with_outcome(
            &page,
            &spec(vec![Mutation::DeleteLeaf {
                locus: Locus::all(x("/html[1]/body[1]/table[1]/tr[2]/td")),
            }]),
        )
        .unwrap();
        assert_eq!(leaf.tree.to_outline(), "html(head,body(table(tr(td),tr,tr(td,td))))");
        let not_leaf = mutate(
            &page,
            &spec(vec![Mutation::DeleteLeaf {
                locus: Locus::one(x("/html[1]/body[1]/table[1]")),
            }]),
        );
        assert!(not_leaf.is_err());
    }

    #[test]
    fn move_and_attributes() {
        let page = parse_html(FIG1).unwrap();
        let out = mutate(
            &page,
            &spec(vec![
                Mutation::MoveSubtree {
                    locus: Locus::one(x("/html[1]/body[1]/table[1]/tr[1]/td[1]")),
                    target: x("/html[1]/body[1]/table[1]/tr[3]"),
                    index: Some(2),
                },
                Mutation::AttributeChange {
                    locus: Locus::one(x("/html[1]/body[1]/table[1]")),
                    name: "class".into(),
                    value: Some("grid".into()),
                },
            ]),
        )
        .unwrap();
        assert_eq!(out.to_outline(), "html(head,body(table(tr,tr(td,td,td),tr(td,td,td))))");
        assert_eq!(out.find_marker("a").unwrap().position(), 2);
        let table = eval_xpath(&out, &x("/html[1]/body[1]/table[1]"))[0];
        assert_eq!(table.label().attr("class"), Some("grid"));
        let cycle = mutate(
            &page,
            &spec(vec![Mutation::MoveSubtree {
                locus: Locus::one(x("/html[1]/body[1]/table[1]")),
                target: x("/html[1]/body[1]/table[1]/tr[1]"),
                index: None,
            }]),
        );
        assert!(cycle.is_err());
    }

    #[test]
    fn unresolved_locus_is_an_error() {
        let page = parse_html(FIG1).unwrap();
        let err = mutate(
            &page,
            &spec(vec![Mutation::DeleteBranch {
                locus: Locus::one(x("/html[1]/body[1]/ul[1]")),
            }]),
        );
        assert!(matches!(err, Err(Error::MutationSpec(m)) if m.contains("resolves to nothing")));
    }

    #[test]
    fn seeded_choices_are_deterministic() {
        let page = parse_html(FIG1).unwrap();
        let s = MutationSpec {
            seed: 99,
            operations: vec![Mutation::InsertSibling {
                locus: Locus::one(x("/html[1]/body[1]/table[1]/tr")),
                outline: Some("tr(td)".into()),
                after: None,
                mark_copy: false,
            }],
        };
        let a = to_html(&mutate(&page, &s).unwrap());
        let b = to_html(&mutate(&page, &s).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn spec_json_forms() {
        let text = r#"{"seed": 3, "operations": [
            {"kind": "wrap_element", "locus": "/html[1]/body[1]/table[1]", "tag": "section"},
            {"kind": "delete_leaf", "locus": {"xpath": "/html[1]/body[1]/table[1]/tr[2]/td", "all": true}}
        ]}"#;
        let s = MutationSpec::from_json(text).unwrap();
        assert_eq!(s.operations.len(), 2);
        assert_eq!(MutationSpec::from_json(&s.to_json().unwrap()).unwrap(), s);
        assert!(MutationSpec::from_json(r#"{"operations": [{"kind": "explode", "locus": "/html[1]"}]}"#).is_err());
        assert!(MutationSpec::from_json(r#"{"seed": 1, "bogus": []}"#).is_err());
    }
}
