//! Raw judgment HTML to [`Judgment`] values.
//!
//! The HTML is reduced to a flat list of text blocks (one per block-level
//! element, inline markup flattened, whitespace collapsed). A block opens a new
//! paragraph only if it is not a quotation, its text starts with `N.` followed
//! by whitespace, and `N` is exactly one more than the last accepted number.
//! Everything else is appended to the paragraph in progress. Blocks preceding
//! the first accepted paragraph (title, composition of the court) are front
//! matter and are not part of any paragraph.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus_model::{Judgment, Paragraph};
use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::par::Execution;

/// Document type of English-language judgments in the source database.
pub const ENGLISH_JUDGMENT: &str = "HEJUD";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDoc {
    pub judgment_id: String,
    pub title: String,
    pub html: String,
    pub doc_type: String,
    pub language: String,
}

/// One line of `metadata.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMetadata {
    pub judgment_id: String,
    pub doc_type: String,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub title: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentOptions {
    /// Number the first paragraph must carry.
    pub start_num: u32,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions { start_num: 1 }
    }
}

/// Keeps English judgments, preserving order.
pub fn filter_corpus(docs: Vec<RawDoc>) -> Vec<RawDoc> {
    docs.into_iter()
        .filter(|d| d.doc_type == ENGLISH_JUDGMENT)
        .collect()
}

/// A flattened block of text from the HTML body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub text: String,
    /// Inside quotation markup (`<blockquote>` or a quote-classed element).
    pub quoted: bool,
}

const BLOCK_TAGS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "caption", "center", "dd", "div", "dl",
    "dt", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header",
    "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section", "table", "tbody", "td",
    "tfoot", "th", "thead", "tr", "ul",
];

const SKIP_TAGS: &[&str] = &["head", "script", "style", "title", "noscript"];

struct OpenBlock {
    name: String,
    quoted: bool,
}

/// Splits HTML into text blocks at block-level element boundaries.
pub fn extract_blocks(html: &str) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut stack: Vec<OpenBlock> = Vec::new();
    let mut buf = String::new();
    let mut rest = html;

    let flush = |buf: &mut String, stack: &[OpenBlock], blocks: &mut Vec<Block>| {
        let decoded = html_escape::decode_html_entities(buf.as_str()).into_owned();
        let text = collapse_whitespace(&decoded);
        if !text.is_empty() {
            blocks.push(Block {
                text,
                quoted: stack.iter().any(|b| b.quoted),
            });
        }
        buf.clear();
    };

    while let Some(lt) = rest.find('<') {
        buf.push_str(&rest[..lt]);
        rest = &rest[lt..];
        if let Some(after) = rest.strip_prefix("<!--") {
            rest = after.find("-->").map_or("", |i| &after[i + 3..]);
            continue;
        }
        let Some(tag) = parse_tag(rest) else {
            // A stray '<' is text.
            buf.push('<');
            rest = &rest[1..];
            continue;
        };
        rest = &rest[tag.len..];
        let name = tag.name.as_str();
        if !tag.closing && SKIP_TAGS.contains(&name) {
            let close = format!("</{name}");
            rest = find_ci(rest, &close)
                .map(|i| {
                    let r = &rest[i..];
                    r.find('>').map_or("", |j| &r[j + 1..])
                })
                .unwrap_or("");
            continue;
        }
        if !BLOCK_TAGS.contains(&name) {
            if name == "br" {
                buf.push(' ');
            }
            continue;
        }
        flush(&mut buf, &stack, &mut blocks);
        if tag.closing {
            if let Some(pos) = stack.iter().rposition(|b| b.name == name) {
                stack.truncate(pos);
            }
        } else if !tag.self_closing && name != "hr" {
            let quoted = name == "blockquote"
                || tag
                    .class
                    .as_deref()
                    .is_some_and(|c| c.to_ascii_lowercase().contains("quot"));
            stack.push(OpenBlock {
                name: name.to_string(),
                quoted,
            });
        }
    }
    buf.push_str(rest);
    flush(&mut buf, &stack, &mut blocks);
    blocks
}

struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
    class: Option<String>,
    len: usize,
}

/// Parses a tag at the start of `s` (which begins with '<').
fn parse_tag(s: &str) -> Option<Tag> {
    let bytes = s.as_bytes();
    let mut i = 1;
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    if matches!(bytes.get(i), Some(b'!') | Some(b'?')) {
        let end = s.find('>')?;
        return Some(Tag {
            name: String::new(),
            closing: false,
            self_closing: true,
            class: None,
            len: end + 1,
        });
    }
    let name_start = i;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b':') {
        i += 1;
    }
    if i == name_start {
        return None;
    }
    let name = s[name_start..i].to_ascii_lowercase();
    let attrs_start = i;
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let c = bytes[i];
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == b'"' || c == b'\'' => quote = Some(c),
            None if c == b'>' => break,
            None => {}
        }
        i += 1;
    }
    if i >= bytes.len() {
        return None;
    }
    let attrs = &s[attrs_start..i];
    Some(Tag {
        name,
        closing,
        self_closing: attrs.trim_end().ends_with('/'),
        class: attribute(attrs, "class"),
        len: i + 1,
    })
}

fn attribute(attrs: &str, key: &str) -> Option<String> {
    let lower = attrs.to_ascii_lowercase();
    let mut from = 0;
    while let Some(pos) = lower[from..].find(key) {
        let at = from + pos;
        from = at + key.len();
        let boundary = at == 0 || lower.as_bytes()[at - 1].is_ascii_whitespace();
        let rest = lower[from..].trim_start();
        if !boundary || !rest.starts_with('=') {
            continue;
        }
        let value_start = attrs.len() - rest.len() + 1;
        let value = attrs[value_start..].trim_start();
        return Some(match value.chars().next() {
            Some(q @ ('"' | '\'')) => value[1..].split(q).next().unwrap_or("").to_string(),
            _ => value.split_whitespace().next().unwrap_or("").to_string(),
        });
    }
    None
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    haystack.to_ascii_lowercase().find(&needle.to_ascii_lowercase())
}

/// Collapses whitespace runs (including no-break spaces) to single spaces and trims.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Number of a paragraph marker `^(\d{1,4})\.\s` at the start of `text`.
pub fn paragraph_marker(text: &str) -> Option<u32> {
    let t = text.trim_start();
    let digits = t.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || digits > 4 {
        return None;
    }
    let mut tail = t[digits..].chars();
    if tail.next() != Some('.') || !tail.next().is_some_and(char::is_whitespace) {
        return None;
    }
    t[..digits].parse().ok()
}

fn opens_with_quote(text: &str) -> bool {
    matches!(
        text.trim_start().chars().next(),
        Some('"' | '\'' | '\u{201C}' | '\u{201D}' | '\u{2018}' | '\u{201E}' | '\u{00AB}')
    )
}

/// Segments one raw document into numbered paragraphs.
pub fn segment_paragraphs(raw: &RawDoc, opts: SegmentOptions) -> Result<Judgment> {
    let unparseable = |reason: String| Error::UnparseableJudgment {
        judgment_id: raw.judgment_id.clone(),
        reason,
    };
    if raw.html.trim().is_empty() {
        return Err(unparseable("empty html".into()));
    }

    let mut any_marker = false;
    let mut expected = opts.start_num.max(1);
    let mut paragraphs: Vec<Paragraph> = Vec::new();
    for block in extract_blocks(&raw.html) {
        let marker = paragraph_marker(&block.text);
        any_marker |= marker.is_some();
        let quoted = block.quoted || opens_with_quote(&block.text);
        if !quoted && marker == Some(expected) {
            paragraphs.push(Paragraph {
                num: expected,
                text: block.text,
            });
            expected += 1;
        } else if let Some(current) = paragraphs.last_mut() {
            current.text.push('\n');
            current.text.push_str(&block.text);
        }
    }

    if !any_marker {
        return Err(unparseable("no block carries a paragraph number".into()));
    }
    if paragraphs.is_empty() {
        return Err(unparseable(format!(
            "no paragraph numbered {} opens the sequence",
            opts.start_num.max(1)
        )));
    }
    Ok(Judgment {
        judgment_id: raw.judgment_id.clone(),
        title: raw.title.clone(),
        paragraphs,
    })
}

/// Result of ingesting a directory of HTML files.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub judgments: Vec<Judgment>,
    /// Documents dropped by the language/type filter.
    pub filtered: usize,
    /// Metadata rows whose HTML file does not exist.
    pub missing_html: Vec<String>,
    /// Documents that could not be segmented, with the reason.
    pub unparseable: Vec<(String, String)>,
}

/// Reads `metadata.jsonl` plus `<judgment_id>.html` files and segments the
/// English judgments. Unparseable documents are reported, not fatal.
pub fn ingest_dir(
    html_dir: &Path,
    metadata: &Path,
    opts: SegmentOptions,
    exec: Execution,
) -> Result<IngestReport> {
    let rows: Vec<DocMetadata> = read_jsonl(metadata)?;
    let total = rows.len();
    let mut seen = HashMap::new();
    let mut report = IngestReport::default();
    let mut docs = Vec::new();
    for row in rows {
        if seen.insert(row.judgment_id.clone(), ()).is_some() {
            return Err(Error::format(
                metadata,
                0,
                format!("duplicate judgment_id {}", row.judgment_id),
            ));
        }
        docs.push(row);
    }
    let english: Vec<DocMetadata> = docs
        .into_iter()
        .filter(|d| d.doc_type == ENGLISH_JUDGMENT)
        .collect();
    report.filtered = total - english.len();

    let mut raws = Vec::new();
    for meta in english {
        let path = html_dir.join(format!("{}.html", meta.judgment_id));
        match std::fs::read_to_string(&path) {
            Ok(html) => raws.push(RawDoc {
                judgment_id: meta.judgment_id,
                title: meta.title,
                html,
                doc_type: meta.doc_type,
                language: meta.language,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                report.missing_html.push(meta.judgment_id)
            }
            Err(e) => return Err(Error::io(path, e)),
        }
    }

    for (raw, result) in raws
        .iter()
        .zip(exec.map(&raws, |raw| segment_paragraphs(raw, opts)))
    {
        match result {
            Ok(j) => report.judgments.push(j),
            Err(e) => report.unparseable.push((raw.judgment_id.clone(), e.to_string())),
        }
    }
    Ok(report)
}
