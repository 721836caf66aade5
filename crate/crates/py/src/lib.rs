//! Python bindings. Nodes hold a reference to their tree plus an index, so
//! they stay valid as long as Python keeps either alive.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use wrapfix_core as core;
use wrapfix_core::{Algorithm, AttrKey, MatchOptions, NodeId, Threshold};

create_exception!(wrapfix, WrapfixError, PyValueError);

fn err(e: core::Error) -> PyErr {
    WrapfixError::new_err(e.to_string())
}

fn fraction<'py>(py: Python<'py>, r: &BigRational) -> PyResult<Bound<'py, PyAny>> {
    let (n, d): (BigInt, BigInt) = (r.numer().clone(), r.denom().clone());
    py.import("fractions")?.getattr("Fraction")?.call1((n, d))
}

fn parse_threshold(value: Option<&Bound<'_, PyAny>>) -> PyResult<Option<Threshold>> {
    let Some(v) = value else { return Ok(None) };
    // str() keeps Fraction("3/8") and decimal text exact
    let text: String = v.str()?.extract()?;
    text.parse().map(Some).map_err(err)
}

fn parse_algorithm(name: Option<&str>) -> PyResult<Option<Algorithm>> {
    name.map(|n| n.parse().map_err(err)).transpose()
}

fn match_options(attr_keys: Option<Vec<String>>, comparable_tags: bool) -> PyResult<MatchOptions> {
    let keys = attr_keys
        .unwrap_or_default()
        .iter()
        .map(|k| k.parse::<AttrKey>())
        .collect::<core::Result<Vec<_>>>()
        .map_err(err)?;
    let mut opts = MatchOptions::default().with_attr_keys(keys);
    if comparable_tags {
        opts = opts.with_comparable_tags();
    }
    Ok(opts)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.getattr("loads")?.call1((text,))
}

#[pyclass(name = "DomTree", module = "wrapfix", frozen)]
struct PyDomTree {
    inner: core::DomTree,
}

#[pymethods]
impl PyDomTree {
    #[staticmethod]
    fn parse_html(text: &str) -> PyResult<Self> {
        core::parse_html(text.as_bytes()).map(|inner| PyDomTree { inner }).map_err(err)
    }

    /// Builds a tree from `a(b, c(d))` notation.
    #[staticmethod]
    fn from_outline(text: &str) -> PyResult<Self> {
        core::DomTree::from_outline(text).map(|inner| PyDomTree { inner }).map_err(err)
    }

    fn to_outline(&self) -> String {
        self.inner.to_outline()
    }

    fn to_html(&self) -> String {
        core::to_html(&self.inner)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn root(slf: &Bound<'_, Self>) -> PyNode {
        PyNode::new(slf, slf.get().inner.root().id())
    }

    fn select(slf: &Bound<'_, Self>, xpath: &str) -> PyResult<Vec<PyNode>> {
        let x = core::parse_xpath(xpath).map_err(err)?;
        Ok(core::eval_xpath(&slf.get().inner, &x)
            .into_iter()
            .map(|n| PyNode::new(slf, n.id()))
            .collect())
    }

    fn find_marker(slf: &Bound<'_, Self>, marker: &str) -> Option<PyNode> {
        slf.get().inner.find_marker(marker).map(|n| PyNode::new(slf, n.id()))
    }

    fn markers(&self) -> Vec<String> {
        self.inner.markers().into_iter().map(String::from).collect()
    }

    /// Applies a JSON mutation spec and returns the new tree.
    fn mutate(&self, spec: &str) -> PyResult<Self> {
        let spec = core::MutationSpec::from_json(spec).map_err(err)?;
        core::mutate(&self.inner, &spec).map(|inner| PyDomTree { inner }).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!("DomTree({} nodes)", self.inner.node_count())
    }
}

#[pyclass(name = "Node", module = "wrapfix", frozen)]
struct PyNode {
    tree: Py<PyDomTree>,
    id: NodeId,
}

impl PyNode {
    fn new(tree: &Bound<'_, PyDomTree>, id: NodeId) -> Self {
        PyNode { tree: tree.clone().unbind(), id }
    }

    fn node(&self) -> core::DomNode<'_> {
        self.tree.get().inner.node(self.id).expect("node id from the same tree")
    }

    fn sibling(&self, id: NodeId, py: Python<'_>) -> PyNode {
        PyNode { tree: self.tree.clone_ref(py), id }
    }
}

#[pymethods]
impl PyNode {
    #[getter]
    fn tag(&self) -> &str {
        self.node().tag()
    }

    #[getter]
    fn attrs(&self) -> BTreeMap<String, String> {
        self.node().label().attrs().clone()
    }

    #[getter]
    fn marker(&self) -> Option<&str> {
        self.node().marker()
    }

    #[getter]
    fn text(&self) -> Option<&str> {
        self.node().text()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.node().degree()
    }

    #[getter]
    fn tree(&self, py: Python<'_>) -> Py<PyDomTree> {
        self.tree.clone_ref(py)
    }

    #[getter]
    fn parent(&self, py: Python<'_>) -> Option<PyNode> {
        self.node().parent().map(|p| self.sibling(p.id(), py))
    }

    fn children(&self, py: Python<'_>) -> Vec<PyNode> {
        self.node().children().map(|c| self.sibling(c.id(), py)).collect()
    }

    /// Canonical absolute XPath of this node.
    fn xpath(&self) -> PyResult<String> {
        let node = self.node();
        core::induce_xpath(node.tree(), node).map(|x| x.to_string()).map_err(err)
    }

    fn to_outline(&self) -> String {
        self.node().to_outline()
    }

    /// Copy of the subtree rooted here as a standalone tree.
    fn subtree(&self) -> PyDomTree {
        PyDomTree {
            inner: core::DomTree::subtree(self.node()),
        }
    }

    fn __eq__(&self, other: &PyNode) -> bool {
        self.tree.is(&other.tree) && self.id == other.id
    }

    fn __hash__(&self) -> u64 {
        self.id.index() as u64
    }

    fn __repr__(&self) -> String {
        match self.xpath() {
            Ok(x) => format!("Node({x})"),
            Err(_) => format!("Node(<{}>)", self.tag()),
        }
    }
}

#[pyfunction]
fn parse_html(text: &str) -> PyResult<PyDomTree> {
    PyDomTree::parse_html(text)
}

/// Canonical form of an XPath in the supported dialect.
#[pyfunction]
fn parse_xpath(text: &str) -> PyResult<String> {
    core::parse_xpath(text).map(|x| x.to_string()).map_err(err)
}

/// Smallest set of XPaths, in the supported dialect, covering `nodes`.
/// Returns the paths and whether they select extra nodes.
#[pyfunction]
fn generalize_xpaths(nodes: Vec<PyRef<'_, PyNode>>) -> PyResult<(Vec<String>, bool)> {
    let Some(first) = nodes.first() else {
        return Err(WrapfixError::new_err("no nodes to generalize"));
    };
    if nodes.iter().any(|n| !n.tree.is(&first.tree)) {
        return Err(WrapfixError::new_err("nodes come from different trees"));
    }
    let tree = &first.tree.get().inner;
    let dom: Vec<_> = nodes.iter().map(|n| n.node()).collect();
    let g = core::generalize_xpaths(tree, &dom).map_err(err)?;
    Ok((g.xpaths().iter().map(|x| x.to_string()).collect(), g.over_selects()))
}

#[pyfunction]
#[pyo3(signature = (a, b, attr_keys=None, comparable_tags=false))]
fn simple_tree_match(a: &PyNode, b: &PyNode, attr_keys: Option<Vec<String>>, comparable_tags: bool) -> PyResult<u64> {
    let opts = match_options(attr_keys, comparable_tags)?;
    Ok(core::simple_tree_match(a.node(), b.node(), &opts))
}

/// Clustered similarity as a `fractions.Fraction`.
#[pyfunction]
#[pyo3(signature = (a, b, attr_keys=None, comparable_tags=false))]
fn clustered_tree_match<'py>(
    py: Python<'py>,
    a: &PyNode,
    b: &PyNode,
    attr_keys: Option<Vec<String>>,
    comparable_tags: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = match_options(attr_keys, comparable_tags)?;
    fraction(py, &core::clustered_tree_match(a.node(), b.node(), &opts))
}

#[pyfunction]
#[pyo3(signature = (a, b, attr_keys=None, comparable_tags=false))]
fn normalized_simple_similarity<'py>(
    py: Python<'py>,
    a: &PyNode,
    b: &PyNode,
    attr_keys: Option<Vec<String>>,
    comparable_tags: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = match_options(attr_keys, comparable_tags)?;
    fraction(py, &core::normalized_simple_similarity(a.node(), b.node(), &opts))
}

/// Brute-force maximum mapping; small trees only.
#[pyfunction]
fn oracle_max_mapping(a: &PyNode, b: &PyNode) -> PyResult<u64> {
    core::oracle_max_mapping(a.node(), b.node(), &MatchOptions::default()).map_err(err)
}

/// Text dump of every W and M matrix computed while matching `a` and `b`.
#[pyfunction]
#[pyo3(signature = (a, b, algorithm="clustered"))]
fn explain_match(a: &PyNode, b: &PyNode, algorithm: &str) -> PyResult<String> {
    let alg = algorithm.parse().map_err(err)?;
    Ok(core::explain_match(a.node(), b.node(), &MatchOptions::default(), alg).to_text())
}

#[pyclass(name = "Signature", module = "wrapfix", frozen)]
struct PySignature {
    inner: core::Signature,
}

#[pymethods]
impl PySignature {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        core::Signature::from_json(text).map(|inner| PySignature { inner }).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn original_xpath(&self) -> String {
        self.inner.original_xpath.to_string()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode {
            core::SignatureMode::Single => "single",
            core::SignatureMode::Multi => "multi",
        }
    }

    #[getter]
    fn snapshots(&self) -> Vec<PyDomTree> {
        self.inner.snapshots.iter().map(|t| PyDomTree { inner: t.clone() }).collect()
    }

    #[getter]
    fn threshold<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, self.inner.options.threshold.value())
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.options.algorithm.as_str()
    }

    fn __repr__(&self) -> String {
        format!("Signature({}, {} snapshot(s))", self.inner.original_xpath, self.inner.snapshots.len())
    }
}

#[pyfunction]
#[pyo3(signature = (page, xpath, threshold=None, algorithm=None, attr_keys=None, comparable_tags=false))]
fn sign(
    page: &PyDomTree,
    xpath: &str,
    threshold: Option<&Bound<'_, PyAny>>,
    algorithm: Option<&str>,
    attr_keys: Option<Vec<String>>,
    comparable_tags: bool,
) -> PyResult<PySignature> {
    let mut opts = match_options(attr_keys, comparable_tags)?;
    if let Some(t) = parse_threshold(threshold)? {
        opts = opts.with_threshold(t);
    }
    if let Some(a) = parse_algorithm(algorithm)? {
        opts = opts.with_algorithm(a);
    }
    let x = core::parse_xpath(xpath).map_err(err)?;
    core::sign(&page.inner, &x, &opts).map(|inner| PySignature { inner }).map_err(err)
}

/// Repairs the signature's XPath against `page`. Returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (page, signature, threshold=None, algorithm=None, max_size_ratio=None, prune_nested=false, explain=false))]
#[allow(clippy::too_many_arguments)]
fn adapt<'py>(
    py: Python<'py>,
    page: &PyDomTree,
    signature: &PySignature,
    threshold: Option<&Bound<'_, PyAny>>,
    algorithm: Option<&str>,
    max_size_ratio: Option<f64>,
    prune_nested: bool,
    explain: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = core::AdaptOptions {
        threshold: parse_threshold(threshold)?,
        algorithm: parse_algorithm(algorithm)?,
        max_size_ratio,
        prune_nested,
        explain,
        ..Default::default()
    };
    let report = core::adapt(&page.inner, &signature.inner, &opts).map_err(err)?;
    json_to_py(py, &report.to_json().map_err(err)?)
}

#[pyclass(name = "EvalCounts", module = "wrapfix", frozen)]
struct PyEvalCounts {
    inner: core::EvalCounts,
}

#[pymethods]
impl PyEvalCounts {
    #[new]
    fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        PyEvalCounts {
            inner: core::EvalCounts::new(tp, fp, fn_),
        }
    }

    #[getter]
    fn tp(&self) -> u64 {
        self.inner.tp
    }

    #[getter]
    fn fp(&self) -> u64 {
        self.inner.fp
    }

    #[getter(r#fn)]
    fn fn_(&self) -> u64 {
        self.inner.fn_
    }

    fn precision<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyAny>>> {
        self.inner.precision().map(|r| fraction(py, &r)).transpose()
    }

    fn recall<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyAny>>> {
        self.inner.recall().map(|r| fraction(py, &r)).transpose()
    }

    /// Geometric mean of precision and recall.
    fn f_measure(&self) -> Option<f64> {
        self.inner.f_measure()
    }

    /// Harmonic mean of precision and recall.
    fn f1<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyAny>>> {
        self.inner.f1().map(|r| fraction(py, &r)).transpose()
    }

    /// Precision, recall and F-measure as percentages to two places.
    fn percents(&self) -> (Option<String>, Option<String>, Option<String>) {
        (
            self.inner.precision_percent(),
            self.inner.recall_percent(),
            self.inner.f_measure_percent(),
        )
    }

    fn __repr__(&self) -> String {
        format!("EvalCounts(tp={}, fp={}, fn={})", self.inner.tp, self.inner.fp, self.inner.fn_)
    }
}

#[pyfunction]
fn score_run(expected: BTreeSet<String>, extracted: BTreeSet<String>) -> PyEvalCounts {
    PyEvalCounts {
        inner: core::score_run(&expected, &extracted),
    }
}

/// Evaluates a corpus directory; returns `(table, report)` with the report as a dict.
#[pyfunction]
#[pyo3(signature = (corpus, algorithms=vec!["simple".to_string(), "clustered".to_string()]))]
fn run_corpus<'py>(py: Python<'py>, corpus: &str, algorithms: Vec<String>) -> PyResult<(String, Bound<'py, PyAny>)> {
    let algs = algorithms
        .iter()
        .map(|a| a.parse())
        .collect::<core::Result<Vec<Algorithm>>>()
        .map_err(err)?;
    let report = core::run_corpus(corpus, &algs).map_err(err)?;
    let json = report.to_json().map_err(err)?;
    Ok((report.to_table(), json_to_py(py, &json)?))
}

#[pymodule]
fn wrapfix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WrapfixError", m.py().get_type::<WrapfixError>())?;
    m.add_class::<PyDomTree>()?;
    m.add_class::<PyNode>()?;
    m.add_class::<PySignature>()?;
    m.add_class::<PyEvalCounts>()?;
    m.add_function(wrap_pyfunction!(parse_html, m)?)?;
    m.add_function(wrap_pyfunction!(parse_xpath, m)?)?;
    m.add_function(wrap_pyfunction!(generalize_xpaths, m)?)?;
    m.add_function(wrap_pyfunction!(simple_tree_match, m)?)?;
    m.add_function(wrap_pyfunction!(clustered_tree_match, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_simple_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_max_mapping, m)?)?;
    m.add_function(wrap_pyfunction!(explain_match, m)?)?;
    m.add_function(wrap_pyfunction!(sign, m)?)?;
    m.add_function(wrap_pyfunction!(adapt, m)?)?;
    m.add_function(wrap_pyfunction!(score_run, m)?)?;
    m.add_function(wrap_pyfunction!(run_corpus, m)?)?;
    Ok(())
}
