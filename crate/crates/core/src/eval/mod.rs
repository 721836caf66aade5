//! Evaluation: precision/recall bookkeeping, page mutation and the
//! drift-corpus runner.

mod corpus;
mod mutate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::adapt::{adapt, AdaptOptions, AdaptStatus};
use crate::error::{Error, Result};
use crate::html::parse_html;
use crate::label::Algorithm;
use crate::ratio;
use crate::signature::Signature;

pub use corpus::{build_corpus, generate_corpus, CorpusCase, CASE_FILES};
pub use mutate::{mutate, mutate_with_outcome, Locus, Mutation, MutationOutcome, MutationSpec};

/// Extraction outcome counts. Precision and recall are undefined when
/// their denominators are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio_of(num: u64, den: u64) -> Option<BigRational> {
    (den != 0).then(|| BigRational::new(BigInt::from(num), BigInt::from(den)))
}

impl EvalCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        EvalCounts { tp, fp, fn_ }
    }

    pub fn precision(&self) -> Option<BigRational> {
        ratio_of(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<BigRational> {
        ratio_of(self.tp, self.tp + self.fn_)
    }

    /// P·R; the reported F-Measure is its square root (the geometric mean
    /// of precision and recall).
    pub fn f_measure_squared(&self) -> Option<BigRational> {
        Some(self.precision()? * self.recall()?)
    }

    pub fn f_measure(&self) -> Option<f64> {
        self.f_measure_squared().map(|q| ratio::to_f64(&q).sqrt())
    }

    /// Harmonic mean 2PR/(P+R); zero when both are zero.
    pub fn f1(&self) -> Option<BigRational> {
        let (p, r) = (self.precision()?, self.recall()?);
        let sum = &p + &r;
        if sum.is_zero() {
            return Some(BigRational::zero());
        }
        Some(BigRational::from_integer(BigInt::from(2)) * p * r / sum)
    }

    pub fn precision_percent(&self) -> Option<String> {
        self.precision().map(|p| percent(&p))
    }

    pub fn recall_percent(&self) -> Option<String> {
        self.recall().map(|r| percent(&r))
    }

    /// F-Measure as a percentage rounded half-up to two decimals, computed
    /// exactly (no floating point near the rounding boundary).
    pub fn f_measure_percent(&self) -> Option<String> {
        self.f_measure_squared().map(|q| sqrt_percent(&q))
    }

    pub fn f1_percent(&self) -> Option<String> {
        self.f1().map(|f| percent(&f))
    }

    pub fn add(&mut self, other: EvalCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

impl std::iter::Sum for EvalCounts {
    fn sum<I: Iterator<Item = EvalCounts>>(iter: I) -> Self {
        let mut total = EvalCounts::default();
        iter.for_each(|c| total.add(c));
        total
    }
}

fn percent(r: &BigRational) -> String {
    ratio::round_half_up(&(r * BigRational::from_integer(BigInt::from(100))), 2) + "%"
}

/// Rounds 100·√q to two decimals: the largest k with (k − ½)² ≤ 10⁸·q.
fn sqrt_percent(q: &BigRational) -> String {
    let target = q * BigRational::from_integer(BigInt::from(400_000_000u64));
    let ok = |k: &BigInt| -> bool {
        if k.is_zero() {
            return true;
        }
        let two_k_minus_1 = BigInt::from(2) * k - 1;
        BigRational::from_integer(&two_k_minus_1 * &two_k_minus_1) <= target
    };
    let est = (ratio::to_f64(q).sqrt() * 10_000.0 + 0.5).floor().max(0.0);
    let mut k = BigInt::from(est.to_u64().unwrap_or(0));
    while !ok(&k) {
        k -= 1;
    }
    while ok(&(&k + 1)) {
        k += 1;
    }
    ratio::fixed_point(&k, 2) + "%"
}

/// Compares extracted items against the expected ones.
pub fn score_run<S: Ord>(expected: &BTreeSet<S>, actual: &BTreeSet<S>) -> EvalCounts {
    let tp = actual.intersection(expected).count() as u64;
    EvalCounts {
        tp,
        fp: actual.len() as u64 - tp,
        fn_: expected.len() as u64 - tp,
    }
}

/// Per-case ground truth stored next to the pages.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    /// Oracle markers of the nodes a correct wrapper extracts.
    pub expected: Vec<String>,
    pub category: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgorithmOutcome {
    pub status: AdaptStatus,
    pub counts: EvalCounts,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub category: String,
    pub threshold: String,
    pub outcomes: BTreeMap<Algorithm, AlgorithmOutcome>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SkippedCase {
    pub name: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusReport {
    pub algorithms: Vec<Algorithm>,
    pub cases: Vec<CaseResult>,
    pub skipped: Vec<SkippedCase>,
}

impl CorpusReport {
    pub fn totals(&self, algorithm: Algorithm) -> EvalCounts {
        self.totals_where(algorithm, |_| true)
    }

    pub fn category_totals(&self, algorithm: Algorithm, category: &str) -> EvalCounts {
        self.totals_where(algorithm, |c| c.category == category)
    }

    fn totals_where(&self, algorithm: Algorithm, keep: impl Fn(&CaseResult) -> bool) -> EvalCounts {
        self.cases
            .iter()
            .filter(|c| keep(c))
            .filter_map(|c| c.outcomes.get(&algorithm))
            .map(|o| o.counts)
            .sum()
    }

    pub fn categories(&self) -> Vec<String> {
        self.cases
            .iter()
            .map(|c| c.category.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Tab-separated summary with one row per algorithm, overall and per
    /// category.
    pub fn to_table(&self) -> String {
        let mut out = String::from("Algorithm\tSubset\tCases\tTP\tFP\tFN\tPrecision\tRecall\tF-Measure\n");
        let dash = || "-".to_string();
        let mut subsets = vec![None];
        subsets.extend(self.categories().into_iter().map(Some));
        for &alg in &self.algorithms {
            for subset in &subsets {
                let (name, counts, n) = match subset {
                    None => ("all", self.totals(alg), self.cases.len()),
                    Some(cat) => (
                        cat.as_str(),
                        self.category_totals(alg, cat),
                        self.cases.iter().filter(|c| &c.category == cat).count(),
                    ),
                };
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    display_name(alg),
                    name,
                    n,
                    counts.tp,
                    counts.fp,
                    counts.fn_,
                    counts.precision_percent().unwrap_or_else(dash),
                    counts.recall_percent().unwrap_or_else(dash),
                    counts.f_measure_percent().unwrap_or_else(dash),
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary {
            algorithm: Algorithm,
            counts: EvalCounts,
            precision: Option<String>,
            recall: Option<String>,
            f_measure: Option<String>,
            f1: Option<String>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            summary: Vec<Summary>,
            cases: &'a [CaseResult],
            skipped: &'a [SkippedCase],
        }
        let summary = self
            .algorithms
            .iter()
            .map(|&a| {
                let c = self.totals(a);
                Summary {
                    algorithm: a,
                    counts: c,
                    precision: c.precision_percent(),
                    recall: c.recall_percent(),
                    f_measure: c.f_measure_percent(),
                    f1: c.f1_percent(),
                }
            })
            .collect();
        let doc = Doc {
            summary,
            cases: &self.cases,
            skipped: &self.skipped,
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }
}

fn display_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Simple => "Simple Tree Matching",
        Algorithm::Clustered => "Clustered Tree Matching",
    }
}

struct LoadedCase {
    signature: Signature,
    mutated: Vec<u8>,
    truth: Truth,
}

fn load_case(dir: &Path) -> Result<LoadedCase> {
    let read = |name: &str| fs::read(dir.join(name)).map_err(|e| Error::Corpus(format!("{name}: {e}")));
    let signature = Signature::from_json(
        &String::from_utf8(read("signature.json")?).map_err(|e| Error::Corpus(format!("signature.json: {e}")))?,
    )?;
    let truth: Truth =
        serde_json::from_slice(&read("truth.json")?).map_err(|e| Error::Corpus(format!("truth.json: {e}")))?;
    Ok(LoadedCase {
        signature,
        mutated: read("mutated.html")?,
        truth,
    })
}

fn run_case(case: &LoadedCase, algorithms: &[Algorithm]) -> Result<BTreeMap<Algorithm, AlgorithmOutcome>> {
    let page = parse_html(&case.mutated)?;
    let expected: BTreeSet<String> = case.truth.expected.iter().cloned().collect();
    let mut outcomes = BTreeMap::new();
    for &algorithm in algorithms {
        let overrides = AdaptOptions {
            algorithm: Some(algorithm),
            ..AdaptOptions::default()
        };
        let report = adapt(&page, &case.signature, &overrides)?;
        let actual: BTreeSet<String> = report
            .nodes()
            .iter()
            .map(|n| match n.marker() {
                Some(m) => m.to_string(),
                None => format!("unmarked:{}", n.id()),
            })
            .collect();
        outcomes.insert(
            algorithm,
            AlgorithmOutcome {
                status: report.status,
                counts: score_run(&expected, &actual),
            },
        );
    }
    Ok(outcomes)
}

/// Runs every case directory under `dir` with each algorithm. Cases that
/// fail to load are skipped and listed in the report.
pub fn run_corpus(dir: impl AsRef<Path>, algorithms: &[Algorithm]) -> Result<CorpusReport> {
    let dir = dir.as_ref();
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::Corpus(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Corpus(format!("no cases found in {}", dir.display())));
    }
    let mut report = CorpusReport {
        algorithms: algorithms.to_vec(),
        cases: Vec::new(),
        skipped: Vec::new(),
    };
    for name in names {
        let path = dir.join(&name);
        let result = load_case(&path).and_then(|case| {
            let outcomes = run_case(&case, algorithms)?;
            Ok(CaseResult {
                name: name.clone(),
                category: case.truth.category.clone(),
                threshold: case.signature.options.threshold.to_string(),
                outcomes,
            })
        });
        match result {
            Ok(case) => {
                info!("case {name}: {:?}", case.outcomes);
                report.cases.push(case);
            }
            Err(e) => {
                warn!("skipping case {name}: {e}");
                report.skipped.push(SkippedCase {
                    name,
                    reason: e.to_string(),
                });
            }
        }
    }
    if report.cases.is_empty() {
        return Err(Error::Corpus(format!(
            "no usable cases in {} ({} skipped)",
            dir.display(),
            report.skipped.len()
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rows() {
        let clustered = EvalCounts::new(1454, 12, 42);
        assert_eq!(clustered.precision_percent().unwrap(), "99.18%");
        assert_eq!(clustered.recall_percent().unwrap(), "97.19%");
        assert_eq!(clustered.f_measure_percent().unwrap(), "98.18%");
        let simple = EvalCounts::new(1356, 92, 140);
        assert_eq!(simple.precision_percent().unwrap(), "93.65%");
        assert_eq!(simple.recall_percent().unwrap(), "90.64%");
        assert_eq!(simple.f_measure_percent().unwrap(), "92.13%");
        assert_eq!(simple.f1_percent().unwrap(), "92.12%");
    }

    #[test]
    fn sqrt_rounding_is_exact() {
        // 0.25 -> 50.00%, 1 -> 100.00%, 0 -> 0.00%
        assert_eq!(sqrt_percent(&BigRational::new(1.into(), 4.into())), "50.00%");
        assert_eq!(sqrt_percent(&BigRational::from_integer(1.into())), "100.00%");
        assert_eq!(sqrt_percent(&BigRational::zero()), "0.00%");
        // √0.81 = 0.9 exactly
        assert_eq!(sqrt_percent(&BigRational::new(81.into(), 100.into())), "90.00%");
        // (0.12345)² lies exactly on a rounding boundary: 12.345% -> 12.35%
        let q = BigRational::new(12345.into(), 100000.into());
        assert_eq!(sqrt_percent(&(&q * &q)), "12.35%");
    }

    #[test]
    fn score_run_counts() {
        let e: BTreeSet<&str> = ["a", "b", "c"].into();
        let a: BTreeSet<&str> = ["b", "c", "x"].into();
        assert_eq!(score_run(&e, &a), EvalCounts::new(2, 1, 1));
        let none: BTreeSet<&str> = BTreeSet::new();
        let c = score_run(&e, &none);
        assert_eq!(c, EvalCounts::new(0, 0, 3));
        assert_eq!(c.precision(), None);
        assert_eq!(c.f_measure(), None);
    }

    #[test]
    fn f1_and_geometric_mean_differ() {
        let c = EvalCounts::new(1, 1, 0);
        assert_eq!(c.f1_percent().unwrap(), "66.67%");
        assert_eq!(c.f_measure_percent().unwrap(), "70.71%");
        assert_eq!(EvalCounts::new(0, 2, 2).f1_percent().unwrap(), "0.00%");
    }
}
