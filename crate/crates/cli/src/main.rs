use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::warn;
use num_rational::BigRational;
use wrapfix_core::eval::{generate_corpus, mutate_with_outcome, run_corpus, MutationSpec};
use wrapfix_core::ratio::{exact_string, fraction_string, to_f64};
use wrapfix_core::tree_match::clustered_tree_match;
use wrapfix_core::{
    adapt, eval_xpath, parse_html, parse_xpath, sign, simple_tree_match, to_html, AdaptOptions, AdaptStatus,
    Algorithm, AttrKey, DomTree, Error, MatchOptions, Signature, Threshold,
};

#[derive(Parser, Debug)]
#[command(name = "wrapfix", version, about = "Sign, adapt and evaluate XPath wrappers with tree matching")]
struct Cli {
    /// Log more (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Store the structure of the elements an XPath selects
    Sign(SignArgs),
    /// Repair a signature's XPath against a changed page
    Adapt(AdaptArgs),
    /// Score two subtrees against each other
    Match(MatchArgs),
    /// Apply a mutation spec to a page
    Mutate(MutateArgs),
    /// Run both algorithms over a drift corpus
    Eval(EvalArgs),
    /// Write the synthetic drift corpus
    GenCorpus(GenCorpusArgs),
}

#[derive(clap::Args, Debug)]
struct SignArgs {
    #[arg(long)]
    page: PathBuf,
    #[arg(long)]
    xpath: String,
    #[arg(long)]
    out: PathBuf,
    /// Similarity threshold, e.g. 0.85, 17/20 or 85%
    #[arg(long, env = "WRAPFIX_THRESHOLD")]
    threshold: Option<Threshold>,
    /// Attributes that take part in label matching (id,class,name)
    #[arg(long, value_delimiter = ',')]
    attrs: Vec<AttrKey>,
    /// Let comparable tags (table/div/ul/ol, tr/li/div, td/span/div) match
    #[arg(long)]
    comparable_tags: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    Simple,
    Clustered,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Simple => Algorithm::Simple,
            AlgorithmArg::Clustered => Algorithm::Clustered,
        }
    }
}

#[derive(clap::Args, Debug)]
struct AdaptArgs {
    #[arg(long)]
    page: PathBuf,
    #[arg(long)]
    signature: PathBuf,
    /// Overrides the threshold stored in the signature
    #[arg(long)]
    threshold: Option<Threshold>,
    /// Overrides the algorithm stored in the signature
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    /// Include W/M matrix traces of the accepted matches
    #[arg(long)]
    explain: bool,
    /// Report file (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Skip candidates whose size differs from every snapshot by more than this factor
    #[arg(long)]
    max_size_ratio: Option<f64>,
    /// Keep only the better of two nested accepted candidates
    #[arg(long)]
    prune_nested: bool,
}

#[derive(clap::Args, Debug)]
struct MatchArgs {
    #[arg(long)]
    page_a: PathBuf,
    #[arg(long)]
    xpath_a: String,
    #[arg(long)]
    page_b: PathBuf,
    #[arg(long)]
    xpath_b: String,
    #[arg(long, value_enum, default_value = "clustered")]
    algorithm: AlgorithmArg,
}

#[derive(clap::Args, Debug)]
struct MutateArgs {
    #[arg(long)]
    page: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the seed in the spec
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvalAlgorithm {
    Simple,
    Clustered,
    Both,
}

#[derive(clap::Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    algorithm: EvalAlgorithm,
    /// Per-case report file (JSON)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct GenCorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2010)]
    seed: u64,
    /// Passes over every site template and recipe
    #[arg(long, default_value_t = 1)]
    rounds: usize,
}

/// Successful runs that still report "nothing found".
enum Outcome {
    Done,
    Empty,
}

fn read_page(path: &Path) -> Result<DomTree> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_html(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_sign(args: SignArgs) -> Result<Outcome> {
    let page = read_page(&args.page)?;
    let xpath = parse_xpath(&args.xpath)?;
    let mut opts = MatchOptions::default().with_attr_keys(args.attrs);
    if let Some(t) = args.threshold {
        opts = opts.with_threshold(t);
    }
    if args.comparable_tags {
        opts = opts.with_comparable_tags();
    }
    let sig = match sign(&page, &xpath, &opts) {
        Ok(sig) => sig,
        Err(e @ Error::CannotSign(_)) => {
            eprintln!("{e}");
            return Ok(Outcome::Empty);
        }
        Err(e) => return Err(e.into()),
    };
    let sig = sig.with_source(args.page.display().to_string());
    write(&args.out, sig.to_json()?)?;
    println!(
        "signed {} ({:?} mode, {} snapshot(s), threshold {})",
        sig.original_xpath,
        sig.mode,
        sig.snapshots.len(),
        sig.options.threshold
    );
    Ok(Outcome::Done)
}

fn cmd_adapt(args: AdaptArgs) -> Result<Outcome> {
    let page = read_page(&args.page)?;
    let sig = Signature::load(&args.signature).with_context(|| format!("loading {}", args.signature.display()))?;
    let overrides = AdaptOptions {
        threshold: args.threshold,
        algorithm: args.algorithm.map(Into::into),
        max_size_ratio: args.max_size_ratio,
        prune_nested: args.prune_nested,
        explain: args.explain,
        ..AdaptOptions::default()
    };
    let report = adapt(&page, &sig, &overrides)?;
    write(&args.out, report.to_json()?)?;
    let doc = report.to_document();
    println!("status: {}", status_name(report.status));
    match report.status {
        AdaptStatus::XpathStillValid => {
            println!("{} still selects {} node(s)", report.original_xpath, report.still_valid.len());
        }
        AdaptStatus::Adapted => {
            for r in &doc.results {
                println!("{}\t{} ({:.4})", r.xpath, r.score_fraction, r.score);
            }
            if let Some(g) = &doc.generalized_xpath {
                let note = if g.over_selects { " (over-selects)" } else { "" };
                println!("generalized: {}{note}", g.xpaths.join(" | "));
            }
        }
        AdaptStatus::NoMatch => {
            println!("no candidate reached threshold {}", report.threshold_used);
            for r in &doc.near_misses {
                println!("near miss: {}\t{} ({:.4})", r.xpath, r.score_fraction, r.score);
            }
        }
    }
    if args.explain {
        for trace in &report.traces {
            println!("{}", trace.to_text());
        }
    }
    Ok(match report.status {
        AdaptStatus::NoMatch => Outcome::Empty,
        _ => Outcome::Done,
    })
}

fn status_name(status: AdaptStatus) -> &'static str {
    match status {
        AdaptStatus::XpathStillValid => "xpath_still_valid",
        AdaptStatus::Adapted => "adapted",
        AdaptStatus::NoMatch => "no_match",
    }
}

fn cmd_match(args: MatchArgs) -> Result<Outcome> {
    let (page_a, page_b) = (read_page(&args.page_a)?, read_page(&args.page_b)?);
    let (xa, xb) = (parse_xpath(&args.xpath_a)?, parse_xpath(&args.xpath_b)?);
    let (sel_a, sel_b) = (eval_xpath(&page_a, &xa), eval_xpath(&page_b, &xb));
    let (Some(&a), Some(&b)) = (sel_a.first(), sel_b.first()) else {
        eprintln!("an XPath selects nothing");
        return Ok(Outcome::Empty);
    };
    if sel_a.len() > 1 || sel_b.len() > 1 {
        warn!("XPath selects several nodes; comparing the first of each");
    }
    let opts = MatchOptions::default();
    match args.algorithm {
        AlgorithmArg::Simple => println!("{}", simple_tree_match(a, b, &opts)),
        AlgorithmArg::Clustered => {
            let score = clustered_tree_match(a, b, &opts);
            if score.is_integer() {
                println!("{}", fraction_string(&score));
            } else {
                println!("{} ({})", fraction_string(&score), decimal(&score));
            }
        }
    }
    Ok(Outcome::Done)
}

/// Exact decimal when it terminates, otherwise a rounded one.
fn decimal(r: &BigRational) -> String {
    let exact = exact_string(r);
    if exact.contains('/') {
        format!("{:.6}", to_f64(r))
    } else {
        exact
    }
}

fn cmd_mutate(args: MutateArgs) -> Result<Outcome> {
    let page = read_page(&args.page)?;
    let text = fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let mut spec = MutationSpec::from_json(&text)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let outcome = mutate_with_outcome(&page, &spec)?;
    write(&args.out, to_html(&outcome.tree))?;
    println!(
        "applied {} operation(s); {} node(s)",
        spec.operations.len(),
        outcome.tree.node_count()
    );
    if !outcome.removed_markers.is_empty() {
        println!("removed markers: {}", outcome.removed_markers.join(", "));
    }
    Ok(Outcome::Done)
}

fn cmd_eval(args: EvalArgs) -> Result<Outcome> {
    let algorithms = match args.algorithm {
        EvalAlgorithm::Simple => vec![Algorithm::Simple],
        EvalAlgorithm::Clustered => vec![Algorithm::Clustered],
        EvalAlgorithm::Both => vec![Algorithm::Simple, Algorithm::Clustered],
    };
    let report = run_corpus(&args.corpus, &algorithms)?;
    print!("{}", report.to_table());
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.name, s.reason);
    }
    if let Some(out) = &args.out {
        write(out, report.to_json()?)?;
    }
    Ok(Outcome::Done)
}

fn cmd_gen_corpus(args: GenCorpusArgs) -> Result<Outcome> {
    if args.rounds == 0 {
        bail!("--rounds must be at least 1");
    }
    let names = generate_corpus(&args.out, args.seed, args.rounds)?;
    println!("wrote {} cases to {}", names.len(), args.out.display());
    Ok(Outcome::Done)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Sign(a) => cmd_sign(a),
        Command::Adapt(a) => cmd_adapt(a),
        Command::Match(a) => cmd_match(a),
        Command::Mutate(a) => cmd_mutate(a),
        Command::Eval(a) => cmd_eval(a),
        Command::GenCorpus(a) => cmd_gen_corpus(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Empty) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
