//! HTML ingestion into [`DomTree`] and structural re-serialization.

use scraper::{Html, Node};

use crate::dom::{DomNode, DomTree, TreeBuilder};
use crate::error::{Error, Result};
use crate::label::NodeLabel;

/// Attribute carrying ground-truth identity in evaluation corpora. It is
/// read into the node marker and never becomes part of a label.
pub const ORACLE_ATTR: &str = "data-oracle";

const VOID_ELEMENTS: [&str; 14] = [
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source", "track", "wbr",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Keep non-whitespace text as `#text` nodes.
    pub include_text_nodes: bool,
}

pub fn parse_html(bytes: &[u8]) -> Result<DomTree> {
    parse_html_with(bytes, &ParseOptions::default())
}

/// Parses HTML with browser-grade error recovery and returns the tree
/// rooted at `html`.
///
/// Comments, doctypes and the contents of `script` and `style` are
/// skipped. A `head` or `tbody` that the parser synthesized (the source
/// never spells the start tag) is removed or flattened so paths match
/// the markup as written.
pub fn parse_html_with(bytes: &[u8], opts: &ParseOptions) -> Result<DomTree> {
    let source = decode(bytes)?;
    if source.trim().is_empty() {
        return Err(Error::Ingest("empty document".into()));
    }
    let explicit_head = has_start_tag(&source, "head");
    let explicit_tbody = has_start_tag(&source, "tbody");
    let doc = Html::parse_document(&source);
    let root = doc.root_element();

    let mut builder = TreeBuilder::new(element_label(root.value()));
    let mut stack: Vec<(ego_tree::NodeRef<'_, Node>, usize)> =
        root.children().rev().map(|c| (c, builder.root())).collect();

    while let Some((node, parent)) = stack.pop() {
        match node.value() {
            Node::Element(el) => {
                let tag = el.name().to_ascii_lowercase();
                if tag == "tbody" && !explicit_tbody {
                    stack.extend(node.children().rev().map(|c| (c, parent)));
                    continue;
                }
                if tag == "head" && !explicit_head && !node.children().any(|c| c.value().is_element()) {
                    continue;
                }
                let id = builder.push_child(parent, element_label(el));
                builder.set_marker(id, el.attr(ORACLE_ATTR).map(str::to_string));
                if tag != "script" && tag != "style" {
                    stack.extend(node.children().rev().map(|c| (c, id)));
                }
            }
            Node::Text(text) if opts.include_text_nodes => {
                let text: &str = text;
                if !text.trim().is_empty() {
                    let id = builder.push_child(parent, NodeLabel::text());
                    builder.set_text(id, Some(text.to_string()));
                }
            }
            _ => {}
        }
    }
    Ok(builder.build())
}

fn element_label(el: &scraper::node::Element) -> NodeLabel {
    let mut label = NodeLabel::new(el.name()).unwrap_or_else(|_| NodeLabel::text());
    for (name, value) in el.attrs() {
        label.set_attr(name, value);
    }
    label
}

fn decode(bytes: &[u8]) -> Result<String> {
    if let Some(rest) = bytes.strip_prefix(&[0xEF, 0xBB, 0xBF]) {
        return String::from_utf8(rest.to_vec()).map_err(|e| Error::Ingest(format!("invalid UTF-8: {e}")));
    }
    let utf16 = |rest: &[u8], le: bool| -> Result<String> {
        if !rest.len().is_multiple_of(2) {
            return Err(Error::Ingest("truncated UTF-16 input".into()));
        }
        let units = rest.chunks_exact(2).map(|c| {
            if le {
                u16::from_le_bytes([c[0], c[1]])
            } else {
                u16::from_be_bytes([c[0], c[1]])
            }
        });
        char::decode_utf16(units)
            .collect::<std::result::Result<String, _>>()
            .map_err(|e| Error::Ingest(format!("invalid UTF-16: {e}")))
    };
    if let Some(rest) = bytes.strip_prefix(&[0xFF, 0xFE]) {
        return utf16(rest, true);
    }
    if let Some(rest) = bytes.strip_prefix(&[0xFE, 0xFF]) {
        return utf16(rest, false);
    }
    match std::str::from_utf8(bytes) {
        Ok(s) => Ok(s.to_string()),
        // Latin-1 maps every byte to the code point of the same value.
        Err(_) => Ok(bytes.iter().map(|&b| b as char).collect()),
    }
}

fn has_start_tag(source: &str, tag: &str) -> bool {
    let hay = source.as_bytes();
    let needle = format!("<{tag}");
    let n = needle.len();
    hay.windows(n + 1).any(|w| {
        w[..n].eq_ignore_ascii_case(needle.as_bytes()) && matches!(w[n], b'>' | b'/' | b' ' | b'\t' | b'\n' | b'\r' | b'\x0c')
    })
}

fn escape(text: &str, out: &mut String, attr: bool) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
}

/// Serializes the tree as HTML: tags, retained attributes, oracle markers
/// and kept text. Output is deterministic for a given tree.
pub fn to_html(tree: &DomTree) -> String {
    enum Step<'a> {
        Open(DomNode<'a>),
        Close(&'a str),
    }
    let mut out = String::from("<!DOCTYPE html>\n");
    let mut stack = vec![Step::Open(tree.root())];
    while let Some(step) = stack.pop() {
        match step {
            Step::Close(tag) => {
                out.push_str("</");
                out.push_str(tag);
                out.push('>');
            }
            Step::Open(node) if node.label().is_text() => {
                escape(node.text().unwrap_or(""), &mut out, false);
            }
            Step::Open(node) => {
                out.push('<');
                out.push_str(node.tag());
                for (k, v) in node.label().attrs() {
                    out.push(' ');
                    out.push_str(k);
                    out.push_str("=\"");
                    escape(v, &mut out, true);
                    out.push('"');
                }
                if let Some(marker) = node.marker() {
                    out.push_str(&format!(" {ORACLE_ATTR}=\""));
                    escape(marker, &mut out, true);
                    out.push('"');
                }
                out.push('>');
                if VOID_ELEMENTS.contains(&node.tag()) {
                    continue;
                }
                stack.push(Step::Close(node.tag()));
                stack.extend(node.children().rev().map(Step::Open));
            }
        }
    }
    out.push('\n');
    out
}
