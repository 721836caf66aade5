//! Node labels, matching options and the label equality predicate used by
//! every tree matcher.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ratio;

/// Tag used for text nodes when they are kept in the tree.
pub const TEXT_TAG: &str = "#text";

/// Attributes kept on a label; all others are dropped at ingestion.
pub const RETAINED_ATTRS: [&str; 5] = ["id", "class", "name", "href", "src"];

/// Tag name plus the retained attributes of an element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeLabel {
    tag: String,
    attrs: BTreeMap<String, String>,
}

impl NodeLabel {
    /// Builds a label, lowercasing the tag. Fails on an empty tag.
    pub fn new(tag: &str) -> Result<Self> {
        let tag = tag.trim();
        if tag.is_empty() {
            return Err(Error::InvalidArgument("empty tag name".into()));
        }
        Ok(NodeLabel {
            tag: tag.to_ascii_lowercase(),
            attrs: BTreeMap::new(),
        })
    }

    pub fn text() -> Self {
        NodeLabel {
            tag: TEXT_TAG.to_string(),
            attrs: BTreeMap::new(),
        }
    }

    /// Sets an attribute if it is one of [`RETAINED_ATTRS`]; other names are ignored.
    pub fn set_attr(&mut self, name: &str, value: &str) {
        let name = name.to_ascii_lowercase();
        if RETAINED_ATTRS.contains(&name.as_str()) {
            self.attrs.insert(name, value.to_string());
        }
    }

    pub fn with_attr(mut self, name: &str, value: &str) -> Self {
        self.set_attr(name, value);
        self
    }

    pub fn remove_attr(&mut self, name: &str) {
        self.attrs.remove(&name.to_ascii_lowercase());
    }

    pub fn set_tag(&mut self, tag: &str) -> Result<()> {
        *self = NodeLabel {
            attrs: std::mem::take(&mut self.attrs),
            ..NodeLabel::new(tag)?
        };
        Ok(())
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn attrs(&self) -> &BTreeMap<String, String> {
        &self.attrs
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).map(String::as_str)
    }

    pub fn is_text(&self) -> bool {
        self.tag == TEXT_TAG
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag)?;
        for (k, v) in &self.attrs {
            write!(f, " {k}=\"{v}\"")?;
        }
        Ok(())
    }
}

/// Attributes that may be folded into label equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrKey {
    Id,
    Class,
    Name,
}

impl AttrKey {
    pub fn as_str(self) -> &'static str {
        match self {
            AttrKey::Id => "id",
            AttrKey::Class => "class",
            AttrKey::Name => "name",
        }
    }
}

impl FromStr for AttrKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "id" => Ok(AttrKey::Id),
            "class" => Ok(AttrKey::Class),
            "name" => Ok(AttrKey::Name),
            other => Err(Error::InvalidArgument(format!(
                "attribute `{other}` cannot be part of a label (use id, class or name)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Simple,
    #[default]
    Clustered,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Simple => "simple",
            Algorithm::Clustered => "clustered",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "simple" => Ok(Algorithm::Simple),
            "clustered" => Ok(Algorithm::Clustered),
            other => Err(Error::InvalidArgument(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Minimum similarity a candidate must reach; an exact rational in [0, 1].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Threshold(BigRational);

impl Threshold {
    pub fn new(value: BigRational) -> Result<Self> {
        if value < BigRational::zero() || value > BigRational::one() {
            return Err(Error::Threshold(ratio::fraction_string(&value)));
        }
        Ok(Threshold(value))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        ratio::to_f64(&self.0)
    }
}

impl Default for Threshold {
    /// 0.85
    fn default() -> Self {
        Threshold(BigRational::new(17.into(), 20.into()))
    }
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let value = ratio::parse_ratio(s).ok_or_else(|| Error::Threshold(s.to_string()))?;
        Threshold::new(value).map_err(|_| Error::Threshold(s.to_string()))
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&ratio::exact_string(&self.0))
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Groups of tags that may stand in for each other.
pub type TagClass = BTreeSet<String>;

/// Options controlling label equality, the scoring algorithm and the
/// acceptance threshold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchOptions {
    #[serde(default)]
    pub attr_keys: Vec<AttrKey>,
    #[serde(default)]
    pub tag_classes: Vec<TagClass>,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub threshold: Threshold,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            attr_keys: Vec::new(),
            tag_classes: Vec::new(),
            algorithm: Algorithm::Clustered,
            threshold: Threshold::default(),
        }
    }
}

impl MatchOptions {
    /// The comparable-tag classes enabled by `--comparable-tags`.
    pub fn default_tag_classes() -> Vec<TagClass> {
        [
            &["table", "div", "ul", "ol"][..],
            &["tr", "li", "div"][..],
            &["td", "span", "div"][..],
        ]
        .iter()
        .map(|class| class.iter().map(|t| t.to_string()).collect())
        .collect()
    }

    pub fn with_comparable_tags(mut self) -> Self {
        self.tag_classes = Self::default_tag_classes();
        self
    }

    pub fn with_attr_keys(mut self, keys: Vec<AttrKey>) -> Self {
        self.attr_keys = keys;
        self
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_threshold(mut self, threshold: Threshold) -> Self {
        self.threshold = threshold;
        self
    }

    /// Checks that tag classes hold only lowercase, non-empty names and
    /// that attribute keys are not repeated.
    pub fn validate(&self) -> Result<()> {
        for class in &self.tag_classes {
            for tag in class {
                if tag.is_empty() || tag.to_ascii_lowercase() != *tag {
                    return Err(Error::InvalidArgument(format!(
                        "tag class member `{tag}` must be a non-empty lowercase name"
                    )));
                }
            }
        }
        let distinct: BTreeSet<_> = self.attr_keys.iter().collect();
        if distinct.len() != self.attr_keys.len() {
            return Err(Error::InvalidArgument("duplicate attribute key".into()));
        }
        Ok(())
    }

    fn tags_comparable(&self, a: &str, b: &str) -> bool {
        a == b
            || self
                .tag_classes
                .iter()
                .any(|class| class.contains(a) && class.contains(b))
    }
}

fn class_tokens(value: &str) -> BTreeSet<&str> {
    value.split_ascii_whitespace().collect()
}

/// Label equality under `opts`.
///
/// Tags must be equal or share a configured tag class. Each selected
/// attribute key present on both labels must agree: `id` and `name`
/// exactly, `class` by overlapping token sets. A key missing on either
/// side (or a class attribute with no tokens) does not veto the match.
pub fn labels_match(a: &NodeLabel, b: &NodeLabel, opts: &MatchOptions) -> bool {
    if !opts.tags_comparable(a.tag(), b.tag()) {
        return false;
    }
    opts.attr_keys.iter().all(|key| {
        let (Some(x), Some(y)) = (a.attr(key.as_str()), b.attr(key.as_str())) else {
            return true;
        };
        match key {
            AttrKey::Class => {
                let (xs, ys) = (class_tokens(x), class_tokens(y));
                xs.is_empty() || ys.is_empty() || !xs.is_disjoint(&ys)
            }
            AttrKey::Id | AttrKey::Name => x == y,
        }
    })
}
