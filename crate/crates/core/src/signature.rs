//! Wrapper signatures: the original XPath, structural snapshots of the
//! elements it extracted, and the matching options.
//!
//! Signatures are stored as JSON. The `version` field is checked before
//! anything else and unknown fields are rejected.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dom::{DomNode, DomTree, TreeBuilder};
use crate::error::{Error, Result};
use crate::label::{MatchOptions, NodeLabel, RETAINED_ATTRS, TEXT_TAG};
use crate::xpath::{eval_xpath, parse_xpath, XPathExpr};

pub const SIGNATURE_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignatureMode {
    Single,
    Multi,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub original_xpath: XPathExpr,
    pub mode: SignatureMode,
    /// One standalone tree per originally extracted element.
    pub snapshots: Vec<DomTree>,
    pub options: MatchOptions,
    pub created_from: Option<String>,
}

/// Snapshots the nodes selected by `xpath` on `page`.
///
/// The signature is in multi mode when the path is multi-select or
/// matches more than one node.
pub fn sign(page: &DomTree, xpath: &XPathExpr, opts: &MatchOptions) -> Result<Signature> {
    opts.validate()?;
    let nodes = eval_xpath(page, xpath);
    if nodes.is_empty() {
        return Err(Error::CannotSign(xpath.to_string()));
    }
    let mode = if xpath.is_multi_select() || nodes.len() > 1 {
        SignatureMode::Multi
    } else {
        SignatureMode::Single
    };
    Ok(Signature {
        original_xpath: xpath.clone(),
        mode,
        snapshots: nodes.into_iter().map(DomTree::subtree).collect(),
        options: opts.clone(),
        created_from: None,
    })
}

impl Signature {
    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.created_from = Some(source.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SignatureFile {
            version: SIGNATURE_VERSION,
            original_xpath: self.original_xpath.to_string(),
            mode: self.mode,
            snapshots: self.snapshots.iter().map(|t| SnapshotNode::from_node(t.root())).collect(),
            options: self.options.clone(),
            created_from: self.created_from.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Signature> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::SignatureLoad(format!("malformed document: {e}")))?;
        let version = value
            .get("version")
            .ok_or_else(|| Error::SignatureLoad("missing field `version`".into()))?
            .as_u64()
            .ok_or_else(|| Error::SignatureLoad("`version` must be a non-negative integer".into()))?;
        if version != SIGNATURE_VERSION {
            return Err(Error::UnknownVersion(version));
        }
        let file: SignatureFile = serde_json::from_value(value).map_err(|e| Error::SignatureLoad(e.to_string()))?;
        file.into_signature()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Signature> {
        let text = std::fs::read_to_string(path)?;
        Signature::from_json(&text)
    }
}

pub fn save_signature(sig: &Signature, mut out: impl Write) -> Result<()> {
    out.write_all(sig.to_json()?.as_bytes())?;
    Ok(())
}

pub fn load_signature(mut input: impl Read) -> Result<Signature> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::SignatureLoad(format!("unreadable input: {e}")))?;
    Signature::from_json(&text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignatureFile {
    version: u64,
    original_xpath: String,
    mode: SignatureMode,
    snapshots: Vec<SnapshotNode>,
    options: MatchOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    created_from: Option<String>,
}

impl SignatureFile {
    fn into_signature(self) -> Result<Signature> {
        let fail = |msg: String| Error::SignatureLoad(msg);
        let original_xpath =
            parse_xpath(&self.original_xpath).map_err(|e| fail(format!("`original_xpath`: {e}")))?;
        if self.snapshots.is_empty() {
            return Err(fail("`snapshots` must not be empty".into()));
        }
        if self.mode == SignatureMode::Single && self.snapshots.len() != 1 {
            return Err(fail(format!(
                "single-mode signature must hold exactly one snapshot, found {}",
                self.snapshots.len()
            )));
        }
        self.options.validate().map_err(|e| fail(format!("`options`: {e}")))?;
        let snapshots = self
            .snapshots
            .iter()
            .enumerate()
            .map(|(i, s)| s.to_tree().map_err(|e| fail(format!("snapshot {i}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Signature {
            original_xpath,
            mode: self.mode,
            snapshots,
            options: self.options,
            created_from: self.created_from,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotNode {
    tag: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attrs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<SnapshotNode>,
}

impl SnapshotNode {
    fn from_node(node: DomNode<'_>) -> SnapshotNode {
        SnapshotNode {
            tag: node.tag().to_string(),
            attrs: node.label().attrs().clone(),
            children: node.children().map(SnapshotNode::from_node).collect(),
        }
    }

    fn label(&self) -> Result<NodeLabel> {
        if self.tag.is_empty() || self.tag.to_ascii_lowercase() != self.tag {
            return Err(Error::InvalidArgument(format!("tag `{}` must be non-empty lowercase", self.tag)));
        }
        let mut label = if self.tag == TEXT_TAG {
            NodeLabel::text()
        } else {
            NodeLabel::new(&self.tag)?
        };
        for (k, v) in &self.attrs {
            if !RETAINED_ATTRS.contains(&k.as_str()) {
                return Err(Error::InvalidArgument(format!("attribute `{k}` is not retained")));
            }
            label.set_attr(k, v);
        }
        Ok(label)
    }

    fn to_tree(&self) -> Result<DomTree> {
        let mut builder = TreeBuilder::new(self.label()?);
        let mut stack = vec![(self, builder.root())];
        while let Some((node, id)) = stack.pop() {
            for child in &node.children {
                let cid = builder.push_child(id, child.label()?);
                stack.push((child, cid));
            }
        }
        Ok(builder.build())
    }
}
