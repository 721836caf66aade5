//! Labeled rooted ordered trees.
//!
//! A [`DomTree`] is an immutable arena whose node ids follow document
//! (pre-)order, so the subtree of a node occupies a contiguous id range.
//! Trees are assembled or edited through [`TreeBuilder`].

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::label::NodeLabel;

/// Identifier of a node within one tree; equals its document-order position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct NodeData {
    label: NodeLabel,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    // one past the last descendant id
    end: usize,
    marker: Option<String>,
    text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<NodeData>,
}

impl DomTree {
    pub fn root(&self) -> DomNode<'_> {
        DomNode {
            tree: self,
            id: NodeId(0),
        }
    }

    pub fn node(&self, id: NodeId) -> Option<DomNode<'_>> {
        (id.0 < self.nodes.len()).then_some(DomNode { tree: self, id })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// All nodes in document order.
    pub fn nodes(&self) -> impl Iterator<Item = DomNode<'_>> + '_ {
        (0..self.nodes.len()).map(move |i| DomNode {
            tree: self,
            id: NodeId(i),
        })
    }

    pub fn find_marker(&self, marker: &str) -> Option<DomNode<'_>> {
        self.nodes().find(|n| n.marker() == Some(marker))
    }

    /// Oracle markers present in the tree, in document order.
    pub fn markers(&self) -> Vec<&str> {
        self.nodes.iter().filter_map(|n| n.marker.as_deref()).collect()
    }

    /// Copies the subtree rooted at `node` into a standalone tree.
    /// Oracle markers are dropped.
    pub fn subtree(node: DomNode<'_>) -> DomTree {
        let mut builder = TreeBuilder::new(node.label().clone());
        if let Some(text) = node.text() {
            builder.set_text(0, Some(text.to_string()));
        }
        for child in node.children() {
            builder.copy_subtree(child, 0, usize::MAX, false);
        }
        builder.build()
    }

    pub fn to_builder(&self) -> TreeBuilder {
        TreeBuilder {
            nodes: self
                .nodes
                .iter()
                .map(|n| BuilderNode {
                    label: n.label.clone(),
                    parent: n.parent.map(|p| p.0),
                    children: n.children.iter().map(|c| c.0).collect(),
                    marker: n.marker.clone(),
                    text: n.text.clone(),
                })
                .collect(),
        }
    }

    /// Parses a compact outline such as `a(b(d,e),c(f))`.
    pub fn from_outline(text: &str) -> Result<DomTree> {
        let bad = |msg: &str| Error::InvalidArgument(format!("outline `{text}`: {msg}"));
        let mut builder: Option<TreeBuilder> = None;
        let mut stack: Vec<usize> = Vec::new();
        let mut last: Option<usize> = None;
        let mut chars = text.char_indices().peekable();
        while let Some(&(start, c)) = chars.peek() {
            match c {
                '(' => {
                    chars.next();
                    stack.push(last.take().ok_or_else(|| bad("`(` without a tag"))?);
                }
                ')' => {
                    chars.next();
                    stack.pop().ok_or_else(|| bad("unbalanced `)`"))?;
                    last = None;
                }
                ',' => {
                    chars.next();
                    last = None;
                }
                c if c.is_whitespace() => {
                    chars.next();
                }
                _ => {
                    let mut end = start;
                    while let Some(&(i, c)) = chars.peek() {
                        if c == '(' || c == ')' || c == ',' || c.is_whitespace() {
                            break;
                        }
                        end = i + c.len_utf8();
                        chars.next();
                    }
                    let label = NodeLabel::new(&text[start..end])?;
                    let id = match (&mut builder, stack.last()) {
                        (None, _) => {
                            builder = Some(TreeBuilder::new(label));
                            0
                        }
                        (Some(b), Some(&parent)) => b.push_child(parent, label),
                        (Some(_), None) => return Err(bad("more than one root")),
                    };
                    last = Some(id);
                }
            }
        }
        if !stack.is_empty() {
            return Err(bad("unbalanced `(`"));
        }
        builder.map(TreeBuilder::build).ok_or_else(|| bad("empty"))
    }

    pub fn to_outline(&self) -> String {
        self.root().to_outline()
    }
}

/// A borrowed handle to one node of a [`DomTree`].
#[derive(Clone, Copy)]
pub struct DomNode<'a> {
    tree: &'a DomTree,
    id: NodeId,
}

impl PartialEq for DomNode<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.tree, other.tree) && self.id == other.id
    }
}

impl Eq for DomNode<'_> {}

impl fmt::Debug for DomNode<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}<{}>", self.id, self.label())
    }
}

impl<'a> DomNode<'a> {
    fn data(&self) -> &'a NodeData {
        &self.tree.nodes[self.id.0]
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn tree(&self) -> &'a DomTree {
        self.tree
    }

    pub fn label(&self) -> &'a NodeLabel {
        &self.data().label
    }

    pub fn tag(&self) -> &'a str {
        self.data().label.tag()
    }

    pub fn marker(&self) -> Option<&'a str> {
        self.data().marker.as_deref()
    }

    pub fn text(&self) -> Option<&'a str> {
        self.data().text.as_deref()
    }

    /// Number of direct children.
    pub fn degree(&self) -> usize {
        self.data().children.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.degree() == 0
    }

    pub fn child(&self, i: usize) -> Option<DomNode<'a>> {
        self.data().children.get(i).map(|&id| DomNode {
            tree: self.tree,
            id,
        })
    }

    pub fn children(&self) -> impl ExactSizeIterator<Item = DomNode<'a>> + DoubleEndedIterator + 'a {
        let tree = self.tree;
        self.data()
            .children
            .iter()
            .map(move |&id| DomNode { tree, id })
    }

    pub fn parent(&self) -> Option<DomNode<'a>> {
        self.data().parent.map(|id| DomNode {
            tree: self.tree,
            id,
        })
    }

    /// Number of siblings including the node itself; 1 for the root.
    pub fn sibling_count(&self) -> usize {
        self.parent().map_or(1, |p| p.degree())
    }

    /// Zero-based position among all siblings.
    pub fn position(&self) -> usize {
        match self.parent() {
            Some(p) => p
                .data()
                .children
                .iter()
                .position(|&c| c == self.id)
                .expect("child listed by its parent"),
            None => 0,
        }
    }

    /// Size of the subtree rooted here.
    pub fn node_count(&self) -> usize {
        self.data().end - self.id.0
    }

    /// The subtree rooted here, in document order (self first).
    pub fn descendants(&self) -> impl Iterator<Item = DomNode<'a>> + 'a {
        let tree = self.tree;
        (self.id.0..self.data().end).map(move |i| DomNode { tree, id: NodeId(i) })
    }

    /// True when `other` lies strictly below this node in the same tree.
    pub fn is_ancestor_of(&self, other: DomNode<'_>) -> bool {
        std::ptr::eq(self.tree, other.tree) && self.id.0 < other.id.0 && other.id.0 < self.data().end
    }

    pub fn depth(&self) -> usize {
        std::iter::successors(self.parent(), |p| p.parent()).count()
    }

    pub fn to_outline(&self) -> String {
        enum Step<'a> {
            Enter(DomNode<'a>, bool),
            Close,
        }
        let mut out = String::new();
        let mut stack = vec![Step::Enter(*self, true)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Close => out.push(')'),
                Step::Enter(node, first) => {
                    if !first {
                        out.push(',');
                    }
                    out.push_str(node.tag());
                    if !node.is_leaf() {
                        out.push('(');
                        stack.push(Step::Close);
                        for (i, c) in node.children().enumerate().collect::<Vec<_>>().into_iter().rev() {
                            stack.push(Step::Enter(c, i == 0));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
struct BuilderNode {
    label: NodeLabel,
    parent: Option<usize>,
    children: Vec<usize>,
    marker: Option<String>,
    text: Option<String>,
}

/// Mutable tree under construction. Nodes detached from the root are
/// discarded by [`TreeBuilder::build`].
#[derive(Clone, Debug)]
pub struct TreeBuilder {
    nodes: Vec<BuilderNode>,
}

impl TreeBuilder {
    pub fn new(root: NodeLabel) -> Self {
        TreeBuilder {
            nodes: vec![BuilderNode {
                label: root,
                parent: None,
                children: Vec::new(),
                marker: None,
                text: None,
            }],
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn push_child(&mut self, parent: usize, label: NodeLabel) -> usize {
        self.insert_child(parent, usize::MAX, label)
    }

    /// Inserts a new node at `index` among the children of `parent`
    /// (clamped to the end).
    pub fn insert_child(&mut self, parent: usize, index: usize, label: NodeLabel) -> usize {
        let id = self.nodes.len();
        self.nodes.push(BuilderNode {
            label,
            parent: None,
            children: Vec::new(),
            marker: None,
            text: None,
        });
        self.attach(id, parent, index);
        id
    }

    pub fn label(&self, node: usize) -> &NodeLabel {
        &self.nodes[node].label
    }

    pub fn label_mut(&mut self, node: usize) -> &mut NodeLabel {
        &mut self.nodes[node].label
    }

    pub fn marker(&self, node: usize) -> Option<&str> {
        self.nodes[node].marker.as_deref()
    }

    pub fn set_marker(&mut self, node: usize, marker: Option<String>) {
        self.nodes[node].marker = marker;
    }

    pub fn set_text(&mut self, node: usize, text: Option<String>) {
        self.nodes[node].text = text;
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.nodes[node].parent
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.nodes[node].children
    }

    /// Unlinks `node` from its parent. The root cannot be detached.
    pub fn detach(&mut self, node: usize) {
        if let Some(parent) = self.nodes[node].parent.take() {
            self.nodes[parent].children.retain(|&c| c != node);
        }
    }

    /// Links a detached `node` under `parent` at `index` (clamped).
    pub fn attach(&mut self, node: usize, parent: usize, index: usize) {
        debug_assert!(self.nodes[node].parent.is_none());
        let children = &mut self.nodes[parent].children;
        let index = index.min(children.len());
        children.insert(index, node);
        self.nodes[node].parent = Some(parent);
    }

    pub fn is_ancestor(&self, ancestor: usize, node: usize) -> bool {
        let mut cur = self.nodes[node].parent;
        while let Some(p) = cur {
            if p == ancestor {
                return true;
            }
            cur = self.nodes[p].parent;
        }
        false
    }

    /// Nodes reachable from the root, in document order.
    pub fn reachable(&self) -> Vec<usize> {
        let mut order = Vec::new();
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            order.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        order
    }

    /// Copies the subtree of `src` (possibly from another tree) under
    /// `parent` at `index`. Returns the new subtree root.
    pub fn copy_subtree(&mut self, src: DomNode<'_>, parent: usize, index: usize, keep_markers: bool) -> usize {
        let top = self.insert_child(parent, index, src.label().clone());
        let mut stack = vec![(src, top)];
        while let Some((s, dst)) = stack.pop() {
            if keep_markers {
                self.nodes[dst].marker = s.marker().map(str::to_string);
            }
            self.nodes[dst].text = s.text().map(str::to_string);
            for child in s.children() {
                let id = self.push_child(dst, child.label().clone());
                stack.push((child, id));
            }
        }
        top
    }

    pub fn build(self) -> DomTree {
        let order = self.reachable();
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (i, &old) in order.iter().enumerate() {
            new_id[old] = i;
        }
        let mut src: Vec<Option<BuilderNode>> = self.nodes.into_iter().map(Some).collect();
        let mut nodes: Vec<NodeData> = order
            .iter()
            .map(|&old| {
                let n = src[old].take().expect("each node visited once");
                NodeData {
                    label: n.label,
                    parent: n.parent.map(|p| NodeId(new_id[p])),
                    children: n.children.iter().map(|&c| NodeId(new_id[c])).collect(),
                    end: 0,
                    marker: n.marker,
                    text: n.text,
                }
            })
            .collect();
        let mut sizes = vec![1usize; nodes.len()];
        for i in (0..nodes.len()).rev() {
            nodes[i].end = i + sizes[i];
            if let Some(p) = nodes[i].parent {
                sizes[p.0] += sizes[i];
            }
        }
        DomTree { nodes }
    }
}
