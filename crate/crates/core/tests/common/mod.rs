#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use wrapfix_core::{DomTree, NodeLabel, TreeBuilder};

pub const LABELS: [&str; 4] = ["a", "b", "c", "d"];
/// Tags without special HTML parsing rules, for trees that go through the
/// parser.
pub const PAGE_LABELS: [&str; 4] = ["w", "x", "y", "z"];

/// Random recursive tree: node i (i >= 1) hangs under a uniformly chosen
/// earlier node.
pub fn tree_from(parents: &[usize], labels: &[usize]) -> DomTree {
    tree_with(parents, labels, &LABELS)
}

pub fn tree_with(parents: &[usize], labels: &[usize], table: &[&str]) -> DomTree {
    let label = |i: usize| NodeLabel::new(table[labels[i] % table.len()]).unwrap();
    let mut b = TreeBuilder::new(label(0));
    let mut ids = vec![b.root()];
    for i in 1..labels.len() {
        let parent = ids[parents[i - 1] % i];
        ids.push(b.push_child(parent, label(i)));
    }
    b.build()
}

pub fn random_tree(rng: &mut impl Rng, max_nodes: usize, n_labels: usize) -> DomTree {
    let n = rng.random_range(1..=max_nodes);
    let parents: Vec<usize> = (1..n).map(|i| rng.random_range(0..i)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_labels)).collect();
    tree_from(&parents, &labels)
}

pub fn arb_tree(max_nodes: usize, n_labels: usize) -> impl Strategy<Value = DomTree> {
    arb_tree_with(max_nodes, n_labels, &LABELS)
}

fn arb_tree_with(max_nodes: usize, n_labels: usize, table: &'static [&'static str]) -> impl Strategy<Value = DomTree> {
    (1..=max_nodes).prop_flat_map(move |n| {
        (
            proptest::collection::vec(any::<usize>(), n - 1),
            proptest::collection::vec(0..n_labels, n),
        )
            .prop_map(move |(parents, labels)| tree_with(&parents, &labels, table))
    })
}

/// Random page: html(body(...)) with a random body subtree.
pub fn arb_page(max_nodes: usize) -> impl Strategy<Value = DomTree> {
    arb_tree_with(max_nodes, 4, &PAGE_LABELS).prop_map(|t| {
        let mut b = TreeBuilder::new(NodeLabel::new("html").unwrap());
        let body = b.push_child(b.root(), NodeLabel::new("body").unwrap());
        b.copy_subtree(t.root(), body, 0, false);
        b.build()
    })
}

pub fn fixture(name: &str) -> Vec<u8> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub const FIG2_A: &str = "a(b(d,e),c(f),b(e,d),c(g(h,i,j)))";
pub const FIG2_B: &str = "a(b(d,e),c(g(h),f))";

pub fn random_page(rng: &mut impl Rng, max_nodes: usize) -> DomTree {
    let n = rng.random_range(1..=max_nodes);
    let parents: Vec<usize> = (1..n).map(|i| rng.random_range(0..i)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..PAGE_LABELS.len())).collect();
    let t = tree_with(&parents, &labels, &PAGE_LABELS);
    let mut b = TreeBuilder::new(NodeLabel::new("html").unwrap());
    let body = b.push_child(b.root(), NodeLabel::new("body").unwrap());
    b.copy_subtree(t.root(), body, 0, false);
    b.build()
}

/// Workspace-level bundled corpus.
pub fn bundled_corpus() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/drift")
}

pub const CORPUS_SEED: u64 = 2010;
pub const CORPUS_ROUNDS: usize = 1;
