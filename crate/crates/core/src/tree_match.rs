//! Simple and clustered tree matching.
//!
//! Both algorithms fill, for every pair of matching nodes, a matrix `M`
//! over their child sequences where
//! `M[i][j] = max(M[i][j-1], M[i-1][j], M[i-1][j-1] + W[i][j])` and
//! `W[i][j]` is the score of the `i`-th child of one node against the
//! `j`-th child of the other. They differ only in what a matched pair
//! returns:
//!
//! * simple: `M[m][n] + 1`, the size of the largest top-down,
//!   order-preserving mapping;
//! * clustered: with `k = max(t(a), t(b))` the larger sibling count,
//!   `M[m][n] / k` when both nodes have children and `M[m][n] + 1/k`
//!   otherwise. The compared roots count as having no siblings, so the
//!   result lies in [0, 1].
//!
//! Recursion is unrolled onto an explicit stack, so arbitrarily deep
//! documents are safe. Every pair of nodes is reached through exactly one
//! pair of parents, hence each subproblem is solved once per call.

use std::fmt::Write as _;
use std::marker::PhantomData;
use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::dom::{DomNode, NodeId};
use crate::label::{labels_match, Algorithm, MatchOptions};
use crate::ratio;

/// Score arithmetic used by the matchers.
pub trait Weight: Clone + PartialOrd + Add<Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
}

/// Weights that can express `1/k`.
pub trait Fractional: Weight + Mul<Output = Self> {
    fn unit_fraction(k: usize) -> Self;
}

impl Weight for u64 {
    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
}

impl Fractional for f64 {
    fn unit_fraction(k: usize) -> Self {
        1.0 / k as f64
    }
}

impl Weight for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
}

impl Fractional for BigRational {
    fn unit_fraction(k: usize) -> Self {
        BigRational::new(BigInt::one(), BigInt::from(k))
    }
}

/// Degree and sibling count of a compared node.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub degree: usize,
    pub siblings: usize,
}

/// Value returned by a matched pair once its child matrix is complete.
pub trait ReturnRule {
    type Value: Weight;
    fn finish(&self, m_final: Self::Value, a: Shape, b: Shape) -> Self::Value;
}

pub struct SimpleRule<V>(PhantomData<V>);

impl<V> Default for SimpleRule<V> {
    fn default() -> Self {
        SimpleRule(PhantomData)
    }
}

impl<V: Weight> ReturnRule for SimpleRule<V> {
    type Value = V;
    fn finish(&self, m_final: V, _: Shape, _: Shape) -> V {
        m_final + V::one()
    }
}

pub struct ClusteredRule<V>(PhantomData<V>);

impl<V> Default for ClusteredRule<V> {
    fn default() -> Self {
        ClusteredRule(PhantomData)
    }
}

impl<V: Fractional> ReturnRule for ClusteredRule<V> {
    type Value = V;
    fn finish(&self, m_final: V, a: Shape, b: Shape) -> V {
        let weight = V::unit_fraction(a.siblings.max(b.siblings));
        if a.degree > 0 && b.degree > 0 {
            m_final * weight
        } else {
            m_final + weight
        }
    }
}

struct Frame<'a, 'b, V> {
    a: DomNode<'a>,
    b: DomNode<'b>,
    shape_a: Shape,
    shape_b: Shape,
    m: Vec<V>,
    w: Vec<V>,
    cell: usize,
    slot: usize,
}

impl<'a, 'b, V: Weight> Frame<'a, 'b, V> {
    fn new(a: DomNode<'a>, b: DomNode<'b>, siblings_a: usize, siblings_b: usize, slot: usize) -> Self {
        let (rows, cols) = (a.degree(), b.degree());
        Frame {
            a,
            b,
            shape_a: Shape {
                degree: rows,
                siblings: siblings_a,
            },
            shape_b: Shape {
                degree: cols,
                siblings: siblings_b,
            },
            m: vec![V::zero(); (rows + 1) * (cols + 1)],
            w: vec![V::zero(); rows * cols],
            cell: 0,
            slot,
        }
    }

    fn rows(&self) -> usize {
        self.shape_a.degree
    }

    fn cols(&self) -> usize {
        self.shape_b.degree
    }

    fn pending(&self) -> Option<(usize, usize)> {
        (self.cell < self.rows() * self.cols()).then(|| (self.cell / self.cols(), self.cell % self.cols()))
    }

    fn record(&mut self, w: V) {
        let cols = self.cols();
        let (i, j) = (self.cell / cols, self.cell % cols);
        let at = |r: usize, c: usize| r * (cols + 1) + c;
        let diagonal = self.m[at(i, j)].clone() + w.clone();
        let mut best = self.m[at(i + 1, j)].clone();
        if self.m[at(i, j + 1)] > best {
            best = self.m[at(i, j + 1)].clone();
        }
        if diagonal > best {
            best = diagonal;
        }
        self.m[at(i + 1, j + 1)] = best;
        self.w[i * cols + j] = w;
        self.cell += 1;
    }
}

pub(crate) struct RawCall<V> {
    a: NodeId,
    b: NodeId,
    parent: Option<usize>,
    rows: usize,
    cols: usize,
    w: Vec<V>,
    m: Vec<V>,
    value: V,
}

/// Runs the matching DP from the pair `(a, b)`, treating both as roots.
pub(crate) fn run<R: ReturnRule>(
    a: DomNode<'_>,
    b: DomNode<'_>,
    opts: &MatchOptions,
    rule: &R,
    mut trace: Option<&mut Vec<RawCall<R::Value>>>,
) -> R::Value {
    if !labels_match(a.label(), b.label(), opts) {
        return R::Value::zero();
    }
    let open_slot = |trace: &mut Option<&mut Vec<RawCall<R::Value>>>, a: DomNode<'_>, b: DomNode<'_>, parent| {
        trace.as_mut().map_or(usize::MAX, |t| {
            t.push(RawCall {
                a: a.id(),
                b: b.id(),
                parent,
                rows: 0,
                cols: 0,
                w: Vec::new(),
                m: Vec::new(),
                value: R::Value::zero(),
            });
            t.len() - 1
        })
    };
    let slot = open_slot(&mut trace, a, b, None);
    let mut stack = vec![Frame::<R::Value>::new(a, b, 1, 1, slot)];
    loop {
        let frame = stack.last_mut().expect("stack holds the root frame until return");
        if let Some((i, j)) = frame.pending() {
            let ca = frame.a.child(i).expect("row index within degree");
            let cb = frame.b.child(j).expect("column index within degree");
            if labels_match(ca.label(), cb.label(), opts) {
                let (sa, sb, parent) = (frame.rows(), frame.cols(), frame.slot);
                let slot = open_slot(&mut trace, ca, cb, Some(parent));
                stack.push(Frame::new(ca, cb, sa, sb, slot));
            } else {
                frame.record(R::Value::zero());
            }
            continue;
        }
        let done = stack.pop().expect("non-empty");
        let m_final = done.m.last().expect("matrix has at least one cell").clone();
        let value = rule.finish(m_final, done.shape_a, done.shape_b);
        if let Some(t) = trace.as_mut() {
            let call = &mut t[done.slot];
            call.rows = done.rows();
            call.cols = done.cols();
            call.value = value.clone();
            call.w = done.w;
            call.m = done.m;
        }
        match stack.last_mut() {
            Some(parent) => parent.record(value),
            None => return value,
        }
    }
}

/// Size of the maximum top-down order-preserving mapping between the
/// subtrees rooted at `a` and `b`.
pub fn simple_tree_match(a: DomNode<'_>, b: DomNode<'_>, opts: &MatchOptions) -> u64 {
    run(a, b, opts, &SimpleRule::<u64>::default(), None)
}

/// Clustered similarity in [0, 1], computed exactly.
pub fn clustered_tree_match(a: DomNode<'_>, b: DomNode<'_>, opts: &MatchOptions) -> BigRational {
    run(a, b, opts, &ClusteredRule::<BigRational>::default(), None)
}

/// Floating-point variant of [`clustered_tree_match`].
pub fn clustered_tree_match_f64(a: DomNode<'_>, b: DomNode<'_>, opts: &MatchOptions) -> f64 {
    run(a, b, opts, &ClusteredRule::<f64>::default(), None)
}

/// Simple matching score divided by the size of the larger subtree.
pub fn normalized_simple_similarity(a: DomNode<'_>, b: DomNode<'_>, opts: &MatchOptions) -> BigRational {
    let mapped = simple_tree_match(a, b, opts);
    let size = a.node_count().max(b.node_count());
    BigRational::new(BigInt::from(mapped), BigInt::from(size))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Simple,
    Clustered,
    SimpleNormalized,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimilarityScore {
    pub value: BigRational,
    pub kind: ScoreKind,
}

impl SimilarityScore {
    pub fn to_f64(&self) -> f64 {
        ratio::to_f64(&self.value)
    }
}

/// Similarity on the [0, 1] scale used for thresholds: clustered matching,
/// or normalized simple matching.
pub fn similarity(a: DomNode<'_>, b: DomNode<'_>, opts: &MatchOptions, algorithm: Algorithm) -> SimilarityScore {
    match algorithm {
        Algorithm::Clustered => SimilarityScore {
            value: clustered_tree_match(a, b, opts),
            kind: ScoreKind::Clustered,
        },
        Algorithm::Simple => SimilarityScore {
            value: normalized_simple_similarity(a, b, opts),
            kind: ScoreKind::SimpleNormalized,
        },
    }
}

/// One invocation of the matcher on a pair of nodes with matching labels.
#[derive(Clone, Debug, Serialize)]
pub struct TraceCall {
    pub a: NodeId,
    pub b: NodeId,
    pub a_tag: String,
    pub b_tag: String,
    /// Index of the invoking call, `None` for the top-level pair.
    pub parent: Option<usize>,
    pub a_children: Vec<NodeId>,
    pub b_children: Vec<NodeId>,
    /// `W`, one row per child of `a`.
    #[serde(serialize_with = "serialize_matrix")]
    pub w: Vec<Vec<BigRational>>,
    /// `M`, with the leading zero row and column.
    #[serde(serialize_with = "serialize_matrix")]
    pub m: Vec<Vec<BigRational>>,
    #[serde(serialize_with = "serialize_fraction")]
    pub value: BigRational,
}

impl TraceCall {
    /// `W` entry for a pair of children, looked up by node id.
    pub fn w_for(&self, a_child: NodeId, b_child: NodeId) -> Option<&BigRational> {
        let i = self.a_children.iter().position(|&c| c == a_child)?;
        let j = self.b_children.iter().position(|&c| c == b_child)?;
        Some(&self.w[i][j])
    }

    pub fn m_final(&self) -> &BigRational {
        self.m.last().and_then(|row| row.last()).expect("M has at least one cell")
    }
}

fn serialize_fraction<S: serde::Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&ratio::fraction_string(r))
}

fn serialize_matrix<S: serde::Serializer>(m: &[Vec<BigRational>], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.len()))?;
    for row in m {
        let row: Vec<String> = row.iter().map(ratio::fraction_string).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Full recursion trace of a match: the `W` and `M` matrices of every
/// invocation whose labels matched, in invocation order.
#[derive(Clone, Debug, Serialize)]
pub struct MatchTrace {
    pub algorithm: Algorithm,
    #[serde(serialize_with = "serialize_fraction")]
    pub value: BigRational,
    pub calls: Vec<TraceCall>,
}

impl MatchTrace {
    pub fn root(&self) -> Option<&TraceCall> {
        self.calls.first()
    }

    pub fn find(&self, a: NodeId, b: NodeId) -> Option<&TraceCall> {
        self.calls.iter().find(|c| c.a == a && c.b == b)
    }

    /// Plain-text dump: one `W` and one `M` table per call.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} tree matching: {}", self.algorithm, ratio::fraction_string(&self.value));
        for (k, call) in self.calls.iter().enumerate() {
            let _ = writeln!(
                out,
                "\ncall {k}: {}:{} x {}:{} -> {}",
                call.a,
                call.a_tag,
                call.b,
                call.b_tag,
                ratio::fraction_string(&call.value)
            );
            if call.a_children.is_empty() || call.b_children.is_empty() {
                let _ = writeln!(out, "  (leaf rule, M[m][n] = {})", ratio::fraction_string(call.m_final()));
                continue;
            }
            let mut header = vec!["W".to_string()];
            header.extend(call.b_children.iter().map(|c| c.to_string()));
            let mut rows = vec![header];
            for (i, row) in call.w.iter().enumerate() {
                let mut r = vec![call.a_children[i].to_string()];
                r.extend(row.iter().map(ratio::fraction_string));
                rows.push(r);
            }
            write_table(&mut out, &rows);
            let mut header = vec!["M".to_string(), "0".to_string()];
            header.extend(call.b_children.iter().map(|c| c.to_string()));
            let mut rows = vec![header];
            for (i, row) in call.m.iter().enumerate() {
                let name = if i == 0 { "0".to_string() } else { call.a_children[i - 1].to_string() };
                let mut r = vec![name];
                r.extend(row.iter().map(ratio::fraction_string));
                rows.push(r);
            }
            write_table(&mut out, &rows);
        }
        out
    }
}

fn write_table(out: &mut String, rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    for row in rows {
        out.push(' ');
        for (c, cell) in row.iter().enumerate() {
            let _ = write!(out, " {:>width$}", cell, width = widths[c]);
        }
        out.push('\n');
    }
}

/// Runs `algorithm` (raw simple counts or clustered weights) and keeps every
/// intermediate matrix.
pub fn explain_match(a: DomNode<'_>, b: DomNode<'_>, opts: &MatchOptions, algorithm: Algorithm) -> MatchTrace {
    let mut raw: Vec<RawCall<BigRational>> = Vec::new();
    let value = match algorithm {
        Algorithm::Simple => run(a, b, opts, &SimpleRule::<BigRational>::default(), Some(&mut raw)),
        Algorithm::Clustered => run(a, b, opts, &ClusteredRule::<BigRational>::default(), Some(&mut raw)),
    };
    let (tree_a, tree_b) = (a.tree(), b.tree());
    let calls = raw
        .into_iter()
        .map(|call| {
            let na = tree_a.node(call.a).expect("traced node exists");
            let nb = tree_b.node(call.b).expect("traced node exists");
            let mut m_iter = call.m.into_iter();
            let m = (0..=call.rows).map(|_| m_iter.by_ref().take(call.cols + 1).collect()).collect();
            let mut w_iter = call.w.into_iter();
            let w = (0..call.rows).map(|_| w_iter.by_ref().take(call.cols).collect()).collect();
            TraceCall {
                a: call.a,
                b: call.b,
                a_tag: na.tag().to_string(),
                b_tag: nb.tag().to_string(),
                parent: call.parent,
                a_children: na.children().map(|c| c.id()).collect(),
                b_children: nb.children().map(|c| c.id()).collect(),
                w,
                m,
                value: call.value,
            }
        })
        .collect();
    MatchTrace { algorithm, value, calls }
}
