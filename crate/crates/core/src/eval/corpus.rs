//! Synthetic drift corpus: template pages for a few kinds of sites, each
//! put through a recipe of mutations that breaks the signed XPath.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mutate::{mutate, Locus, Mutation, MutationSpec};
use super::Truth;
use crate::dom::{DomTree, TreeBuilder};
use crate::error::{Error, Result};
use crate::html::{parse_html, to_html};
use crate::label::{MatchOptions, NodeLabel, Threshold};
use crate::signature::{sign, Signature};
use crate::xpath::{eval_xpath, parse_xpath, XPathExpr};

pub const CASE_FILES: [&str; 5] = [
    "original.html",
    "signature.json",
    "mutated.html",
    "truth.json",
    "mutation.json",
];

const MINOR_THRESHOLD: &str = "0.85";
const DEEP_THRESHOLD: &str = "0.6";

#[derive(Clone, Debug)]
pub struct CorpusCase {
    pub name: String,
    pub truth: Truth,
    pub original: DomTree,
    pub mutated: DomTree,
    pub signature: Signature,
    pub spec: MutationSpec,
}

impl CorpusCase {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref().join(&self.name);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("original.html"), to_html(&self.original))?;
        fs::write(dir.join("signature.json"), self.signature.to_json()?)?;
        fs::write(dir.join("mutated.html"), to_html(&self.mutated))?;
        fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&self.truth)? + "\n")?;
        fs::write(dir.join("mutation.json"), self.spec.to_json()?)?;
        Ok(())
    }
}

/// Page builder with a compact `tag#id.class` element syntax.
struct Page {
    b: TreeBuilder,
}

impl Page {
    fn new() -> Self {
        Page {
            b: TreeBuilder::new(NodeLabel::new("html").expect("valid tag")),
        }
    }

    fn el(&mut self, parent: usize, spec: &str) -> usize {
        let (rest, class) = match spec.split_once('.') {
            Some((r, c)) => (r, Some(c)),
            None => (spec, None),
        };
        let (tag, id) = match rest.split_once('#') {
            Some((t, i)) => (t, Some(i)),
            None => (rest, None),
        };
        let mut label = NodeLabel::new(tag).expect("valid tag");
        if let Some(id) = id {
            label.set_attr("id", id);
        }
        if let Some(class) = class {
            label.set_attr("class", class);
        }
        self.b.push_child(parent, label)
    }

    /// Element with leaf children.
    fn with(&mut self, parent: usize, spec: &str, kids: &[&str]) -> usize {
        let n = self.el(parent, spec);
        for k in kids {
            self.el(n, k);
        }
        n
    }

    fn head_body(&mut self) -> usize {
        let root = self.b.root();
        self.with(root, "head", &["title", "meta"]);
        self.el(root, "body")
    }

    fn mark(&mut self, node: usize, marker: String) {
        self.b.set_marker(node, Some(marker));
    }
}

/// A template page plus the paths the recipes work with.
struct Site {
    name: &'static str,
    tree: DomTree,
    signed: String,
    multi: bool,
    /// Body-level block holding the items, and a same-tag banner to insert
    /// before it.
    top_block: String,
    banner: &'static str,
    /// The element that directly holds the items.
    container: String,
    move_target: String,
    items: Vec<String>,
    /// Leaf inside the item's deepest block, relative to the item.
    slot_leaf: &'static str,
    /// Relative path and wrapper tag for restyling.
    restyle: (&'static str, &'static str),
    /// Relabel operations turning the block into another comparable layout.
    convert: Vec<(String, bool, &'static str)>,
    /// Something to delete in the drop recipe when items are single.
    drop_other: Option<String>,
}

fn news(rng: &mut ChaCha8Rng) -> Site {
    let mut p = Page::new();
    let body = p.head_body();
    let header = p.el(body, "div#header");
    p.el(header, "h1");
    let nav = p.el(header, "ul.nav");
    for _ in 0..5 {
        let li = p.el(nav, "li");
        p.el(li, "a");
    }
    let main = p.el(body, "div#main");
    let n = rng.random_range(4..=8);
    for k in 0..n {
        let story = p.el(main, "div.story");
        p.mark(story, format!("story-{k}"));
        let h2 = p.el(story, "h2");
        p.el(h2, "a");
        p.with(story, "div.source", &["span.name", "span.time"]);
        p.el(story, "p");
        if rng.random_bool(0.5) {
            p.el(story, "img");
        }
    }
    let side = p.el(body, "div#sidebar");
    p.el(side, "h3");
    let ul = p.el(side, "ul");
    for _ in 0..6 {
        let li = p.el(ul, "li");
        p.el(li, "a");
    }
    let footer = p.el(body, "div#footer");
    p.with(footer, "p", &["a", "a"]);
    let c = "/html[1]/body[1]/div[2]".to_string();
    Site {
        name: "news",
        tree: p.b.build(),
        signed: format!("{c}/div"),
        multi: true,
        top_block: c.clone(),
        banner: "div(p,a)",
        container: c.clone(),
        move_target: "/html[1]/body[1]/div[4]".into(),
        items: (1..=n).map(|k| format!("{c}/div[{k}]")).collect(),
        slot_leaf: "div[1]/span[1]",
        restyle: ("h2[1]", "div"),
        convert: (1..=n).rev()
            .map(|k| (format!("{c}/div[{k}]"), false, "li"))
            .chain([(c.clone(), false, "ul")])
            .collect(),
        drop_other: None,
    }
}

fn search(rng: &mut ChaCha8Rng) -> Site {
    let mut p = Page::new();
    let body = p.head_body();
    let top = p.el(body, "div#top");
    p.with(top, "form", &["input", "input", "input"]);
    let res = p.el(body, "div#res");
    let ol = p.el(res, "ol");
    let n = rng.random_range(5..=9);
    for k in 0..n {
        let li = p.el(ol, "li.g");
        p.mark(li, format!("result-{k}"));
        let h3 = p.el(li, "h3");
        p.el(h3, "a");
        let s = p.el(li, "div.s");
        p.el(s, "cite");
        let st = p.el(s, "span.st");
        if rng.random_bool(0.4) {
            p.el(st, "b");
        }
        if rng.random_bool(0.3) {
            p.with(li, "div.rel", &["a", "a"]);
        }
    }
    let foot = p.el(body, "div#foot");
    let table = p.el(foot, "table");
    let tr = p.el(table, "tr");
    for _ in 0..6 {
        let td = p.el(tr, "td");
        p.el(td, "a");
    }
    let c = "/html[1]/body[1]/div[2]/ol[1]".to_string();
    Site {
        name: "search",
        tree: p.b.build(),
        signed: format!("{c}/li"),
        multi: true,
        top_block: "/html[1]/body[1]/div[2]".into(),
        banner: "div(p,a)",
        container: c.clone(),
        move_target: "/html[1]/body[1]/div[3]".into(),
        items: (1..=n).map(|k| format!("{c}/li[{k}]")).collect(),
        slot_leaf: "div[1]/cite[1]",
        restyle: ("h3[1]", "div"),
        convert: (1..=n).rev()
            .map(|k| (format!("{c}/li[{k}]"), false, "div"))
            .chain([(c.clone(), false, "div")])
            .collect(),
        drop_other: None,
    }
}

fn shop(rng: &mut ChaCha8Rng) -> Site {
    let mut p = Page::new();
    let body = p.head_body();
    let hdr = p.el(body, "div#hdr");
    let logo = p.el(hdr, "a");
    p.el(logo, "img");
    p.with(hdr, "form", &["input", "input"]);
    let table = p.el(body, "table#items");
    let n = rng.random_range(4..=8);
    for k in 0..n {
        let tr = p.el(table, "tr");
        p.mark(tr, format!("offer-{k}"));
        p.with(tr, "td", &["img"]);
        p.with(tr, "td", &["a", "br", "span"]);
        let price = p.with(tr, "td", &["span.price"]);
        if rng.random_bool(0.5) {
            p.el(price, "span.ship");
        }
    }
    p.with(body, "div#pager", &["a", "a", "a", "a", "a"]);
    let c = "/html[1]/body[1]/table[1]".to_string();
    let mut convert = Vec::new();
    for k in 1..=n {
        convert.push((format!("{c}/tr[{k}]/td"), true, "div"));
    }
    convert.push((format!("{c}/tr"), true, "div"));
    convert.push((c.clone(), false, "div"));
    Site {
        name: "shop",
        tree: p.b.build(),
        signed: format!("{c}/tr"),
        multi: true,
        top_block: c.clone(),
        banner: "table(caption)",
        container: c.clone(),
        move_target: "/html[1]/body[1]/div[2]".into(),
        items: (1..=n).map(|k| format!("{c}/tr[{k}]")).collect(),
        slot_leaf: "td[2]/a[1]",
        restyle: ("td[1]/img[1]", "a"),
        convert,
        drop_other: None,
    }
}

fn social(rng: &mut ChaCha8Rng) -> Site {
    let mut p = Page::new();
    let body = p.head_body();
    let bar = p.el(body, "div#bar");
    let ul = p.el(bar, "ul");
    for _ in 0..4 {
        let li = p.el(ul, "li");
        p.el(li, "a");
    }
    let content = p.el(body, "div#content");
    p.el(content, "h2");
    let friends = p.el(content, "ul.friends");
    let n = rng.random_range(5..=9);
    for k in 0..n {
        let li = p.el(friends, "li");
        p.mark(li, format!("friend-{k}"));
        p.with(li, "a", &["img"]);
        let info = p.with(li, "div.info", &["a", "span"]);
        if rng.random_bool(0.5) {
            p.el(info, "span");
        }
    }
    let ads = p.el(body, "div#ads");
    for _ in 0..3 {
        let ad = p.el(ads, "div.ad");
        p.with(ad, "a", &["img"]);
        p.el(ad, "p");
    }
    let c = "/html[1]/body[1]/div[2]/ul[1]".to_string();
    Site {
        name: "social",
        tree: p.b.build(),
        signed: format!("{c}/li"),
        multi: true,
        top_block: "/html[1]/body[1]/div[2]".into(),
        banner: "div(p,a)",
        container: c.clone(),
        move_target: "/html[1]/body[1]/div[3]".into(),
        items: (1..=n).map(|k| format!("{c}/li[{k}]")).collect(),
        slot_leaf: "div[1]/a[1]",
        restyle: ("a[1]", "div"),
        convert: (1..=n).rev()
            .map(|k| (format!("{c}/li[{k}]"), false, "div"))
            .chain([(c.clone(), false, "div")])
            .collect(),
        drop_other: None,
    }
}

fn blog(rng: &mut ChaCha8Rng) -> Site {
    let mut p = Page::new();
    let body = p.head_body();
    let page = p.el(body, "div#page");
    let header = p.el(page, "div#header");
    let h1 = p.el(header, "h1");
    p.el(h1, "a");
    p.el(header, "p");
    let content = p.el(page, "div#content");
    for _ in 0..rng.random_range(3..=6) {
        let post = p.el(content, "div.post");
        let h2 = p.el(post, "h2");
        p.el(h2, "a");
        p.with(post, "div.meta", &["span", "a"]);
        let entry = p.with(post, "div.entry", &["p", "p"]);
        if rng.random_bool(0.5) {
            p.el(entry, "p");
        }
        p.with(post, "p.tags", &["a", "a"]);
    }
    let side = p.el(page, "div#sidebar");
    let about = p.el(side, "div.about");
    p.mark(about, "about".into());
    p.el(about, "img");
    p.el(about, "h3");
    p.with(about, "div.bio", &["p", "p"]);
    p.el(about, "a");
    for _ in 0..3 {
        let w = p.el(side, "div.widget");
        p.el(w, "h3");
        let ul = p.el(w, "ul");
        for _ in 0..rng.random_range(2..=5) {
            let li = p.el(ul, "li");
            p.el(li, "a");
        }
    }
    let c = "/html[1]/body[1]/div[1]/div[3]".to_string();
    let about_path = format!("{c}/div[1]");
    Site {
        name: "blog",
        tree: p.b.build(),
        signed: about_path.clone(),
        multi: false,
        top_block: "/html[1]/body[1]/div[1]".into(),
        banner: "div(p,a)",
        container: c.clone(),
        move_target: "/html[1]/body[1]/div[1]/div[1]".into(),
        items: vec![about_path.clone()],
        slot_leaf: "div[1]/p[1]",
        restyle: ("img[1]", "a"),
        convert: (1..=4).rev()
            .map(|k| (format!("{c}/div[{k}]"), false, "li"))
            .chain([(c.clone(), false, "ul")])
            .collect(),
        drop_other: Some(format!("{c}/div[3]")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Recipe {
    Wrap,
    Banner,
    Move,
    DeepBranch,
    MissingLeaf,
    AddedLeaf,
    Attribute,
    NewItems,
    DropItem,
    Convert,
    Restyle,
}

const RECIPES: [Recipe; 11] = [
    Recipe::Wrap,
    Recipe::Banner,
    Recipe::Move,
    Recipe::DeepBranch,
    Recipe::MissingLeaf,
    Recipe::AddedLeaf,
    Recipe::Attribute,
    Recipe::NewItems,
    Recipe::DropItem,
    Recipe::Convert,
    Recipe::Restyle,
];

impl Recipe {
    fn name(self) -> &'static str {
        match self {
            Recipe::Wrap => "wrap",
            Recipe::Banner => "banner",
            Recipe::Move => "move",
            Recipe::DeepBranch => "deep-branch",
            Recipe::MissingLeaf => "missing-leaf",
            Recipe::AddedLeaf => "added-leaf",
            Recipe::Attribute => "attribute",
            Recipe::NewItems => "new-items",
            Recipe::DropItem => "drop-item",
            Recipe::Convert => "convert",
            Recipe::Restyle => "restyle",
        }
    }

    fn deep(self) -> bool {
        matches!(self, Recipe::Convert | Recipe::Restyle)
    }

    fn description(self) -> &'static str {
        match self {
            Recipe::Wrap => "item block wrapped in a new parent element",
            Recipe::Banner => "banner inserted before the item block, shifting sibling positions",
            Recipe::Move => "item block moved to another part of the page",
            Recipe::DeepBranch => "small branches added deep inside some items; banner inserted",
            Recipe::MissingLeaf => "a leaf removed from some items; block wrapped",
            Recipe::AddedLeaf => "a leaf added to every item; block moved",
            Recipe::Attribute => "class attributes renamed; banner inserted",
            Recipe::NewItems => "new items inserted; block wrapped",
            Recipe::DropItem => "one element removed; banner inserted",
            Recipe::Convert => "layout converted between comparable tags",
            Recipe::Restyle => "every item restyled: element wrapped, branch added, leaf removed; banner inserted",
        }
    }
}

fn x(path: &str) -> XPathExpr {
    parse_xpath(path).expect("generated xpath is valid")
}

fn pick_some(rng: &mut ChaCha8Rng, items: &[String]) -> Vec<String> {
    let mut chosen: Vec<String> = items.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
    if chosen.is_empty() {
        chosen.push(items[rng.random_range(0..items.len())].clone());
    }
    chosen
}

fn recipe_ops(site: &Site, recipe: Recipe, rng: &mut ChaCha8Rng) -> Vec<Mutation> {
    let wrap = || Mutation::WrapElement {
        locus: Locus::one(x(&site.container)),
        tag: "section".into(),
    };
    let banner = || Mutation::InsertSibling {
        locus: Locus::one(x(&site.top_block)),
        outline: Some(site.banner.into()),
        after: Some(false),
        mark_copy: false,
    };
    let mv = || Mutation::MoveSubtree {
        locus: Locus::one(x(&site.container)),
        target: x(&site.move_target),
        index: Some(0),
    };
    let leaf = |item: &str| x(&format!("{item}/{}", site.slot_leaf));
    let mut ops = Vec::new();
    match recipe {
        Recipe::Wrap => ops.push(wrap()),
        Recipe::Banner => ops.push(banner()),
        Recipe::Move => ops.push(mv()),
        Recipe::DeepBranch => {
            for item in pick_some(rng, &site.items) {
                ops.push(Mutation::InsertSibling {
                    locus: Locus::one(leaf(&item)),
                    outline: Some("span(a(img))".into()),
                    after: Some(true),
                    mark_copy: false,
                });
            }
            ops.push(banner());
        }
        Recipe::MissingLeaf => {
            for item in pick_some(rng, &site.items) {
                ops.push(Mutation::DeleteLeaf {
                    locus: Locus::one(leaf(&item)),
                });
            }
            ops.push(wrap());
        }
        Recipe::AddedLeaf => {
            for item in &site.items {
                ops.push(Mutation::InsertSibling {
                    locus: Locus::one(leaf(item)),
                    outline: Some("em".into()),
                    after: Some(true),
                    mark_copy: false,
                });
            }
            ops.push(mv());
        }
        Recipe::Attribute => {
            ops.push(Mutation::AttributeChange {
                locus: Locus::one(x(&site.container)),
                name: "class".into(),
                value: Some("v2".into()),
            });
            ops.push(Mutation::AttributeChange {
                locus: Locus::all(x(&site.signed)),
                name: "class".into(),
                value: Some("entry-v2".into()),
            });
            ops.push(banner());
        }
        Recipe::NewItems => {
            let copies = if site.multi { 2 } else { 1 };
            for _ in 0..copies {
                ops.push(Mutation::InsertSibling {
                    locus: Locus::one(x(&site.items[rng.random_range(0..site.items.len())])),
                    outline: None,
                    after: Some(true),
                    mark_copy: site.multi,
                });
            }
            ops.push(wrap());
        }
        Recipe::DropItem => {
            let target = match &site.drop_other {
                Some(other) => other.clone(),
                None => site.items[rng.random_range(0..site.items.len())].clone(),
            };
            ops.push(Mutation::DeleteBranch {
                locus: Locus::one(x(&target)),
            });
            ops.push(banner());
        }
        Recipe::Convert => {
            for (path, all, to) in &site.convert {
                ops.push(Mutation::RelabelWithinClass {
                    locus: Locus {
                        xpath: x(path),
                        all: *all,
                    },
                    to: Some((*to).into()),
                });
            }
        }
        Recipe::Restyle => {
            let (rel, tag) = site.restyle;
            for item in &site.items {
                ops.push(Mutation::InsertSibling {
                    locus: Locus::one(leaf(item)),
                    outline: Some("span(b,i)".into()),
                    after: Some(true),
                    mark_copy: false,
                });
                ops.push(Mutation::DeleteLeaf {
                    locus: Locus::one(leaf(item)),
                });
                ops.push(Mutation::WrapElement {
                    locus: Locus::one(x(&format!("{item}/{rel}"))),
                    tag: tag.into(),
                });
            }
            ops.push(banner());
        }
    }
    ops
}

fn reparse(tree: &DomTree, what: &str) -> Result<DomTree> {
    let page = parse_html(to_html(tree).as_bytes())?;
    if page.to_outline() != tree.to_outline() {
        return Err(Error::Corpus(format!("{what} does not survive an HTML round trip")));
    }
    Ok(page)
}

fn build_case(index: usize, site: &Site, recipe: Recipe, rng: &mut ChaCha8Rng) -> Result<CorpusCase> {
    let name = format!("{index:02}-{}-{}", site.name, recipe.name());
    let original = reparse(&site.tree, &name)?;
    let (category, threshold) = if recipe.deep() {
        ("deep", DEEP_THRESHOLD)
    } else {
        ("minor", MINOR_THRESHOLD)
    };
    let mut opts = MatchOptions::default().with_threshold(threshold.parse::<Threshold>()?);
    if recipe.deep() {
        opts = opts.with_comparable_tags();
    }
    let signed = x(&site.signed);
    let signature = sign(&original, &signed, &opts)?.with_source("original.html");
    let spec = MutationSpec {
        seed: rng.random(),
        operations: recipe_ops(site, recipe, rng),
    };
    let mutated = reparse(&mutate(&original, &spec)?, &name)?;
    if !eval_xpath(&mutated, &signed).is_empty() {
        return Err(Error::Corpus(format!("{name}: mutation leaves the signed XPath working")));
    }
    let truth = Truth {
        expected: mutated.markers().iter().map(|m| m.to_string()).collect(),
        category: category.into(),
        description: recipe.description().into(),
    };
    Ok(CorpusCase {
        name,
        truth,
        original,
        mutated,
        signature,
        spec,
    })
}

/// Builds the corpus in memory: every recipe applied to every site
/// template, `rounds` times with fresh page variations.
pub fn build_corpus(seed: u64, rounds: usize) -> Result<Vec<CorpusCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let makers: [fn(&mut ChaCha8Rng) -> Site; 5] = [news, search, shop, social, blog];
    let mut cases = Vec::new();
    for _ in 0..rounds {
        for make in makers {
            let site = make(&mut rng);
            for recipe in RECIPES {
                let case = build_case(cases.len() + 1, &site, recipe, &mut rng)?;
                cases.push(case);
            }
        }
    }
    Ok(cases)
}

/// Writes a generated corpus to `dir`, one sub-directory per case, and
/// returns the case names.
pub fn generate_corpus(dir: impl AsRef<Path>, seed: u64, rounds: usize) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let cases = build_corpus(seed, rounds)?;
    for case in &cases {
        case.write(dir)?;
    }
    Ok(cases.into_iter().map(|c| c.name).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_covers_every_kind() {
        let a = build_corpus(5, 1).unwrap();
        let b = build_corpus(5, 1).unwrap();
        assert_eq!(a.len(), 55);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.name, y.name);
            assert_eq!(to_html(&x.mutated), to_html(&y.mutated));
        }
        let kinds: std::collections::BTreeSet<&str> = a
            .iter()
            .flat_map(|c| c.spec.operations.iter().map(|o| o.kind()))
            .collect();
        assert_eq!(kinds.len(), 7, "{kinds:?}");
        assert!(a.iter().any(|c| c.truth.category == "deep"));
    }
}
