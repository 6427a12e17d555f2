//! Case-law guides to labelled query/judgment pairs.
//!
//! Every leaf heading of a guide becomes a query (its heading path joined by a
//! delimiter). Pinpoint citations in the leaf's section text (`Case v. State,
//! 2018, §§ 12-14, 20`) name the judgment and the relevant paragraphs; all
//! paragraphs cited for one judgment under one leaf form that pair's relevant
//! set. Citations that cannot be used are recorded in a drop report.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize, Serializer};

use crate::corpus_model::{validate_pair, Corpus, DatasetRecord, PairViolation, QueryRecord};
use crate::error::{Error, Result};
use crate::io::{read_jsonl, stable_hash};

pub const DEFAULT_DELIMITER: &str = " > ";

/// One line of `guide.outline.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineEntry {
    pub guide_id: String,
    pub level: u32,
    pub title: String,
    #[serde(default)]
    pub section_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuideNode {
    pub title: String,
    pub level: u32,
    pub section_text: String,
    pub children: Vec<GuideNode>,
}

impl GuideNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Depth-first walk yielding each node with its title path from the root.
    pub fn walk(&self) -> Vec<(Vec<String>, &GuideNode)> {
        fn go<'a>(node: &'a GuideNode, path: &mut Vec<String>, out: &mut Vec<(Vec<String>, &'a GuideNode)>) {
            path.push(node.title.clone());
            out.push((path.clone(), node));
            for child in &node.children {
                go(child, path, out);
            }
            path.pop();
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn leaves(&self) -> Vec<(Vec<String>, &GuideNode)> {
        self.walk().into_iter().filter(|(_, n)| n.is_leaf()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guide {
    pub guide_id: String,
    pub root: GuideNode,
}

/// Builds the heading tree of one guide from its outline entries.
pub fn parse_guide_structure(entries: &[OutlineEntry]) -> Result<Guide> {
    let guide_id = entries
        .first()
        .map(|e| e.guide_id.clone())
        .ok_or_else(|| Error::MalformedOutline {
            guide_id: String::new(),
            reason: "outline is empty".into(),
        })?;
    let malformed = |reason: String| Error::MalformedOutline {
        guide_id: guide_id.clone(),
        reason,
    };

    // Open nodes from the root down to the most recent entry.
    let mut open: Vec<GuideNode> = Vec::new();
    let mut root: Option<GuideNode> = None;
    for (i, e) in entries.iter().enumerate() {
        if e.guide_id != guide_id {
            return Err(malformed(format!("entry {i} belongs to guide {}", e.guide_id)));
        }
        if e.title.trim().is_empty() {
            return Err(malformed(format!("entry {i} has an empty title")));
        }
        if i == 0 && e.level != 0 {
            return Err(malformed(format!("first entry has level {}, expected 0", e.level)));
        }
        if i > 0 && e.level == 0 {
            return Err(malformed(format!("entry {i} is a second level-0 heading")));
        }
        let depth = e.level as usize;
        if depth > open.len() {
            return Err(malformed(format!(
                "entry {i} ({:?}) jumps from level {} to {}",
                e.title,
                open.len().saturating_sub(1),
                e.level
            )));
        }
        close_to(&mut open, depth, &mut root);
        open.push(GuideNode {
            title: e.title.trim().to_string(),
            level: e.level,
            section_text: e.section_text.clone(),
            children: Vec::new(),
        });
    }
    close_to(&mut open, 0, &mut root);
    Ok(Guide {
        guide_id,
        root: root.expect("non-empty outline has a root"),
    })
}

fn close_to(open: &mut Vec<GuideNode>, depth: usize, root: &mut Option<GuideNode>) {
    while open.len() > depth {
        let node = open.pop().expect("len > depth");
        match open.last_mut() {
            Some(parent) => parent.children.push(node),
            None => *root = Some(node),
        }
    }
}

/// Reads every `*.jsonl` outline file in `dir` (sorted by name) and parses one
/// guide per distinct `guide_id`, in order of first appearance.
pub fn load_outlines(dir: &Path) -> Result<Vec<Guide>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<OutlineEntry>> = HashMap::new();
    for file in files {
        for entry in read_jsonl::<OutlineEntry>(&file)? {
            if !grouped.contains_key(&entry.guide_id) {
                order.push(entry.guide_id.clone());
            }
            grouped.entry(entry.guide_id.clone()).or_default().push(entry);
        }
    }
    order
        .iter()
        .map(|id| parse_guide_structure(&grouped[id]))
        .collect()
}

pub fn build_query(path: &[String], delimiter: &str) -> String {
    path.join(delimiter)
}

/// Stable identifier for a heading path within a guide.
pub fn query_id(guide_id: &str, path: &[String]) -> String {
    let mut parts = vec![guide_id];
    parts.extend(path.iter().map(String::as_str));
    format!("q{}", &stable_hash(&parts)[..16])
}

pub fn query_record(guide_id: &str, path: &[String], delimiter: &str) -> QueryRecord {
    QueryRecord {
        query_id: query_id(guide_id, path),
        guide_id: guide_id.to_string(),
        path: path.to_vec(),
        query_text: build_query(path, delimiter),
    }
}

// ---------------------------------------------------------------------------
// Pinpoint citations

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationRef {
    pub case_label: String,
    pub paragraph_nums: BTreeSet<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_judgment_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedCitation {
    pub case_label: String,
    pub fragment: String,
    pub reason: String,
}

/// Everything found in one section's text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CitationScan {
    /// Pinpointed citations, merged per case label, in order of first mention.
    pub refs: Vec<CitationRef>,
    /// Case labels cited without any paragraph reference.
    pub unpinned: Vec<String>,
    /// `ibid.` / `op. cit.` pinpoints that name no case.
    pub unresolvable: Vec<String>,
    pub malformed: Vec<MalformedCitation>,
}

static CASE_ANCHOR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|\s)v\.\s+").unwrap());
static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^,\s*(\d{4})\b").unwrap());
static APPLICATION_NO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^,\s*nos?\.\s*\d+/\d+(?:\s*(?:,|and)\s*\d+/\d+)*").unwrap());
static CITED_ABOVE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:,\s*|\s*\()cited above\)?").unwrap());
static PINPOINT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^,?\s*§§?\s*").unwrap());
static BACK_REFERENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(ibid|op\.\s*cit)\.?\s*,?\s*§§?\s*\d+").unwrap());

const CONNECTORS: &[&str] = &[
    "and", "of", "the", "de", "del", "della", "di", "da", "do", "dos", "van", "von", "der", "den",
    "du", "la", "le", "les", "des", "y", "e", "for", "in",
];

const LEAD_INS: &[&str] = &[
    "See", "In", "Cf.", "Cf", "Also", "Compare", "As", "Unlike", "Contrast", "And", "But", "Thus",
    "Similarly", "Moreover", "However", "Further", "Furthermore", "Likewise", "Following",
    "Applying", "Accordingly", "Hence", "Recently", "Notably",
];

/// Extracts pinpoint citations of the form `<case label>, §§? <list>`.
///
/// `<list>` holds comma (or `and`) separated items, each `n` or `a-b` with
/// `a < b`; ranges expand inclusively. Mentions of one label are merged. A
/// descending range makes that citation malformed; scanning continues.
pub fn parse_pinpoint_citations(text: &str) -> CitationScan {
    let mut scan = CitationScan::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut unpinned: Vec<String> = Vec::new();

    for m in CASE_ANCHOR.find_iter(text) {
        let anchor_start = m.start() + (m.as_str().len() - m.as_str().trim_start().len());
        let Some(left) = left_party(&text[..anchor_start]) else {
            continue;
        };
        let after = &text[m.end()..];
        let Some((right, consumed)) = right_party(after) else {
            continue;
        };
        let mut label = format!("{left} v. {right}");
        let mut rest = &after[consumed..];
        if let Some(c) = YEAR.captures(rest) {
            label.push_str(", ");
            label.push_str(&c[1]);
            rest = &rest[c.get(0).unwrap().end()..];
        }
        if let Some(n) = APPLICATION_NO.find(rest) {
            rest = &rest[n.end()..];
        }
        if let Some(n) = CITED_ABOVE.find(rest) {
            rest = &rest[n.end()..];
        }
        let Some(p) = PINPOINT.find(rest) else {
            unpinned.push(label);
            continue;
        };
        match parse_pinpoint_list(&rest[p.end()..]) {
            Ok(nums) if nums.is_empty() => unpinned.push(label),
            Ok(nums) => match index.get(&label) {
                Some(&i) => scan.refs[i].paragraph_nums.extend(nums),
                None => {
                    index.insert(label.clone(), scan.refs.len());
                    scan.refs.push(CitationRef {
                        case_label: label,
                        paragraph_nums: nums,
                        resolved_judgment_id: None,
                    });
                }
            },
            Err((fragment, reason)) => scan.malformed.push(MalformedCitation {
                case_label: label,
                fragment,
                reason,
            }),
        }
    }

    for label in unpinned {
        if !index.contains_key(&label) && !scan.unpinned.contains(&label) {
            scan.unpinned.push(label);
        }
    }
    scan.unresolvable = BACK_REFERENCE
        .find_iter(text)
        .map(|m| m.as_str().to_string())
        .collect();
    scan
}

/// Walks back from a `v.` anchor over capitalised words and name connectors.
fn left_party(before: &str) -> Option<String> {
    let mut tokens: Vec<&str> = Vec::new();
    for (i, raw) in before.split_whitespace().rev().enumerate() {
        if i > 0 && raw.ends_with(['.', ',', ';', ':', ')', ']']) && !is_initials(raw) {
            break;
        }
        let opens = raw.starts_with(['(', '[', '“', '"', '‘']);
        let tok = raw.trim_start_matches(['(', '[', '“', '"', '‘']);
        let starts_upper = tok.chars().next().is_some_and(char::is_uppercase);
        if !(starts_upper || CONNECTORS.contains(&tok)) {
            break;
        }
        tokens.push(tok);
        if opens {
            break;
        }
    }
    tokens.reverse();
    while let Some(first) = tokens.first() {
        if LEAD_INS.contains(first) || CONNECTORS.contains(first) {
            tokens.remove(0);
        } else {
            break;
        }
    }
    (!tokens.is_empty()).then(|| tokens.join(" "))
}

fn is_initials(tok: &str) -> bool {
    // "S.A.", "A.B." and similar, which end with a period but sit inside a name.
    let letters = tok.chars().filter(|c| c.is_alphabetic()).count();
    letters > 0 && letters <= 3 && tok.chars().all(|c| c.is_alphabetic() || c == '.')
}

/// Reads the respondent side up to the first comma, semicolon, unmatched
/// closing bracket, pinpoint sign or sentence end. Bracketed suffixes such as
/// `(no. 2)` and `[GC]` stay in the label.
fn right_party(after: &str) -> Option<(String, usize)> {
    let mut depth = 0i32;
    let mut end = after.len();
    let mut iter = after.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' if depth > 0 => depth -= 1,
            ')' | ']' | ',' | ';' | '§' if depth == 0 => {
                end = i;
                break;
            }
            '.' if depth == 0 => {
                let next = iter.peek().map(|&(_, n)| n);
                if next.is_none_or(char::is_whitespace) {
                    end = i;
                    break;
                }
            }
            _ => {}
        }
    }
    let right = after[..end].trim();
    if right.is_empty() || !right.chars().next().is_some_and(|c| c.is_alphanumeric()) {
        return None;
    }
    let right = right.split_whitespace().collect::<Vec<_>>().join(" ");
    Some((right, end))
}

static ITEM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{1,5})(?:\s*[-–—]\s*(\d{1,5}))?").unwrap());
static SEPARATOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\s*,\s*(?:and\s+)?|\s+and\s+|\s*&\s*)").unwrap());

/// Parses `12-14, 20 and 25` into a number set. Stops at the first token that
/// is not a list item, and rejects a trailing item that is followed by a word
/// (`§ 54, 21 October 2010` yields only 54).
fn parse_pinpoint_list(s: &str) -> std::result::Result<BTreeSet<u32>, (String, String)> {
    let mut nums = BTreeSet::new();
    let mut rest = s;
    let mut first = true;
    while let Some(c) = ITEM.captures(rest) {
        let whole = c.get(0).unwrap();
        let tail = &rest[whole.end()..];
        if !first && continues_with_word(tail) {
            break;
        }
        let a: u32 = c[1].parse().unwrap();
        match c.get(2) {
            Some(b) => {
                let b: u32 = b.as_str().parse().unwrap();
                if a >= b {
                    return Err((whole.as_str().to_string(), format!("descending range {a}-{b}")));
                }
                nums.extend(a..=b);
            }
            None => {
                nums.insert(a);
            }
        }
        first = false;
        match SEPARATOR.find(tail) {
            Some(sep) if ITEM.is_match(&tail[sep.end()..]) => rest = &tail[sep.end()..],
            _ => break,
        }
    }
    nums.remove(&0);
    Ok(nums)
}

fn continues_with_word(tail: &str) -> bool {
    let trimmed = tail.trim_start();
    trimmed.len() < tail.len()
        && trimmed.chars().next().is_some_and(char::is_alphabetic)
        && !trimmed.starts_with("and ")
}

/// Renders a citation in the grammar accepted by [`parse_pinpoint_citations`],
/// compressing consecutive numbers into ranges.
pub fn format_citation(c: &CitationRef) -> String {
    let mut items: Vec<String> = Vec::new();
    let nums: Vec<u32> = c.paragraph_nums.iter().copied().collect();
    let mut i = 0;
    while i < nums.len() {
        let mut j = i;
        while j + 1 < nums.len() && nums[j + 1] == nums[j] + 1 {
            j += 1;
        }
        if j > i {
            items.push(format!("{}-{}", nums[i], nums[j]));
        } else {
            items.push(nums[i].to_string());
        }
        i = j + 1;
    }
    let sign = if nums.len() > 1 { "§§" } else { "§" };
    format!("{}, {sign} {}", c.case_label, items.join(", "))
}

// ---------------------------------------------------------------------------
// Resolution and pair assembly

pub trait CaseResolver {
    fn resolve(&self, case_label: &str) -> Option<String>;
}

/// Exact-match alias table, `case_label \t judgment_id` per line.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    aliases: HashMap<String, String>,
}

static TRAILING_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r",\s*\d{4}$").unwrap());

impl AliasTable {
    pub fn new<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        AliasTable {
            aliases: pairs
                .into_iter()
                .map(|(k, v)| (normalize_label(k.as_ref()), v.into()))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut aliases = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, id) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(path, i + 1, "expected case_label<TAB>judgment_id"))?;
            aliases.insert(normalize_label(label), id.trim().to_string());
        }
        Ok(AliasTable { aliases })
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }
}

impl CaseResolver for AliasTable {
    /// Exact label first, then the label without its trailing year.
    fn resolve(&self, case_label: &str) -> Option<String> {
        let label = normalize_label(case_label);
        self.aliases
            .get(&label)
            .or_else(|| self.aliases.get(TRAILING_YEAR.replace(&label, "").as_ref()))
            .cloned()
    }
}

impl<F: Fn(&str) -> Option<String>> CaseResolver for F {
    fn resolve(&self, case_label: &str) -> Option<String> {
        self(case_label)
    }
}

fn normalize_label(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    MissingParagraphReference,
    UnmappedJudgment,
    UnresolvableLabel,
    MalformedCitation,
    UnknownParagraph(u32),
    RelevantCoversJudgment,
    NonLeafSection,
}

impl DropReason {
    /// Reason without per-instance detail, used for counting.
    pub fn category(&self) -> &'static str {
        match self {
            DropReason::MissingParagraphReference => "missing paragraph-level reference",
            DropReason::UnmappedJudgment => "unmapped judgment",
            DropReason::UnresolvableLabel => "unresolvable label",
            DropReason::MalformedCitation => "malformed citation",
            DropReason::UnknownParagraph(_) => "unknown paragraph",
            DropReason::RelevantCoversJudgment => "relevant set equals paragraph set",
            DropReason::NonLeafSection => "non-leaf section",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::UnknownParagraph(n) => write!(f, "unknown paragraph {n}"),
            other => f.write_str(other.category()),
        }
    }
}

impl Serialize for DropReason {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// One line of `drops.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DropRecord {
    pub query_id: String,
    pub case_label: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default)]
pub struct Assembly {
    pub queries: Vec<QueryRecord>,
    pub records: Vec<DatasetRecord>,
    pub drops: Vec<DropRecord>,
}

impl Assembly {
    pub fn drop_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.drops {
            *counts.entry(d.reason.category()).or_insert(0) += 1;
        }
        counts
    }
}

/// Turns one guide into queries and labelled pairs.
///
/// Text under a non-leaf heading belongs to that heading, which is not a
/// query; its citations are recorded as `non-leaf section` drops. Cited
/// paragraph numbers that do not exist in the judgment are removed and
/// reported; pairs left empty, or covering every paragraph, are dropped.
pub fn assemble_pairs(
    guide: &Guide,
    resolver: &dyn CaseResolver,
    corpus: &Corpus,
    delimiter: &str,
) -> Assembly {
    let mut out = Assembly::default();
    for (path, node) in guide.root.walk() {
        let query = query_record(&guide.guide_id, &path, delimiter);
        let scan = parse_pinpoint_citations(&node.section_text);
        let drop = |out: &mut Assembly, label: &str, reason: DropReason| {
            out.drops.push(DropRecord {
                query_id: query.query_id.clone(),
                case_label: label.to_string(),
                reason,
            })
        };

        if !node.is_leaf() {
            for label in scan
                .refs
                .iter()
                .map(|r| r.case_label.as_str())
                .chain(scan.unpinned.iter().map(String::as_str))
            {
                drop(&mut out, label, DropReason::NonLeafSection);
            }
            continue;
        }

        for m in &scan.malformed {
            drop(&mut out, &m.case_label, DropReason::MalformedCitation);
        }
        for frag in &scan.unresolvable {
            drop(&mut out, frag, DropReason::UnresolvableLabel);
        }

        let mut order: Vec<String> = Vec::new();
        let mut relevant: HashMap<String, (String, BTreeSet<u32>)> = HashMap::new();
        for r in &scan.refs {
            match resolver.resolve(&r.case_label).filter(|id| corpus.contains(id)) {
                Some(id) => {
                    let entry = relevant.entry(id.clone()).or_insert_with(|| {
                        order.push(id.clone());
                        (r.case_label.clone(), BTreeSet::new())
                    });
                    entry.1.extend(r.paragraph_nums.iter().copied());
                }
                None => drop(&mut out, &r.case_label, DropReason::UnmappedJudgment),
            }
        }
        for label in &scan.unpinned {
            let covered = resolver
                .resolve(label)
                .is_some_and(|id| relevant.contains_key(&id));
            if !covered {
                drop(&mut out, label, DropReason::MissingParagraphReference);
            }
        }

        for id in order {
            let (label, nums) = relevant.remove(&id).expect("ordered ids are present");
            let judgment = corpus.get(&id).expect("filtered to corpus members");
            let mut record = DatasetRecord::new(&query, id, nums);
            let report = validate_pair(&record.pair(), judgment).expect("ids match");
            for v in &report {
                if let PairViolation::UnknownParagraph(n) = v {
                    record.relevant.remove(n);
                    drop(&mut out, &label, DropReason::UnknownParagraph(*n));
                }
            }
            let report = validate_pair(&record.pair(), judgment).expect("ids match");
            if report.is_empty() {
                out.records.push(record);
            } else if report.contains(&PairViolation::RelevantCoversJudgment) {
                drop(&mut out, &label, DropReason::RelevantCoversJudgment);
            }
        }
        out.queries.push(query);
    }
    out
}

/// Assembles several guides. Pairs with the same query and judgment (only
/// possible when a guide repeats a heading path) are merged.
pub fn build_dataset(
    guides: &[Guide],
    resolver: &dyn CaseResolver,
    corpus: &Corpus,
    delimiter: &str,
) -> Assembly {
    let mut out = Assembly::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for guide in guides {
        let part = assemble_pairs(guide, resolver, corpus, delimiter);
        out.queries.extend(part.queries);
        out.drops.extend(part.drops);
        for record in part.records {
            match seen.get(&record.pair_id()) {
                Some(&i) => out.records[i].relevant.extend(record.relevant),
                None => {
                    seen.insert(record.pair_id(), out.records.len());
                    out.records.push(record);
                }
            }
        }
    }
    out
}
