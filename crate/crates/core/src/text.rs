//! Tokenization, token spans and corpus records.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon;

/// Default truncation limits for articles and summaries.
pub const MAX_ARTICLE_TOKENS: usize = 400;
pub const MAX_SUMMARY_TOKENS: usize = 90;

/// A lowercased token with its UTF-8 byte range in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    /// Original-case surface of this token in `source`.
    pub fn surface<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

/// A source text together with its tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedText {
    pub source: String,
    pub tokens: Vec<Token>,
}

impl TokenizedText {
    pub fn new(source: impl Into<String>) -> Self {
        let source = source.into();
        let tokens = tokenize(&source);
        Self { source, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Keep the first `max` tokens. The source is cut after the last kept token.
    pub fn truncate(&mut self, max: usize) {
        if self.tokens.len() > max {
            self.tokens.truncate(max);
            let end = self.tokens.last().map_or(0, |t| t.end);
            self.source.truncate(end);
        }
    }
}

/// An (article, summary) pair, the unit of corpus ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRecord {
    pub id: String,
    pub article: TokenizedText,
    pub summary: TokenizedText,
}

impl CorpusRecord {
    pub fn new(id: impl Into<String>, article: &str, summary: &str) -> Self {
        Self {
            id: id.into(),
            article: TokenizedText::new(article),
            summary: TokenizedText::new(summary),
        }
    }

    pub fn truncated(mut self, max_article: usize, max_summary: usize) -> Self {
        self.article.truncate(max_article);
        self.summary.truncate(max_summary);
        self
    }
}

/// Keep the first `max_article` / `max_summary` tokens of a record.
pub fn truncate(record: &CorpusRecord, max_article: usize, max_summary: usize) -> CorpusRecord {
    record.clone().truncated(max_article.max(1), max_summary.max(1))
}

fn is_currency(c: char) -> bool {
    lexicon::CURRENCY_SYMBOLS.contains(&c)
}

fn is_numeral_component(s: &str) -> bool {
    (!s.is_empty() && s.chars().all(|c| c.is_ascii_digit() || matches!(c, ',' | '.' | ':')))
        || lexicon::is_number_word(&s.to_lowercase())
}

/// Split `text` into lowercased tokens.
///
/// Tokens break on whitespace and on every punctuation character, except that
/// `,` `.` `:` between two digits are kept ("5,000", "5.7", "18:40"), a currency
/// symbol directly before a digit starts the token ("£5,000"), and a hyphen is
/// kept when the part before it is a numeral ("three-van", "6-year-old").
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let digit_at = |i: usize| chars.get(i).is_some_and(|&(_, c)| c.is_ascii_digit());
    let alnum_at = |i: usize| chars.get(i).is_some_and(|&(_, c)| c.is_alphanumeric());

    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if is_currency(c) && digit_at(i + 1) {
            i += 1;
        } else if !c.is_alphanumeric() {
            i += 1;
            tokens.push(make_token(text, byte_at(start), byte_at(i)));
            continue;
        }
        // Alphanumeric run with numeric and compound glue.
        let mut component_start = i;
        let mut first_component: Option<(usize, usize)> = None;
        loop {
            while alnum_at(i) {
                i += 1;
            }
            let Some(&(_, next)) = chars.get(i) else { break };
            if matches!(next, ',' | '.' | ':') && i > 0 && digit_at(i - 1) && digit_at(i + 1) {
                i += 1;
                continue;
            }
            if next == '-' && alnum_at(i + 1) {
                let first = *first_component.get_or_insert((component_start, i));
                let first_text = &text[byte_at(first.0)..byte_at(first.1)];
                let first_text = first_text.trim_start_matches(is_currency);
                if is_numeral_component(first_text) {
                    i += 1;
                    component_start = i;
                    continue;
                }
            }
            break;
        }
        tokens.push(make_token(text, byte_at(start), byte_at(i)));
    }
    tokens
}

fn make_token(text: &str, start: usize, end: usize) -> Token {
    Token { text: text[start..end].to_lowercase(), start, end }
}

/// One line of a corpus JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLine {
    pub id: String,
    pub article: String,
    pub summary: String,
}

impl From<&CorpusRecord> for CorpusLine {
    fn from(r: &CorpusRecord) -> Self {
        Self {
            id: r.id.clone(),
            article: r.article.source.clone(),
            summary: r.summary.source.clone(),
        }
    }
}

/// Key used for the provenance header line written at the top of every JSONL artifact.
pub const META_KEY: &str = "_meta";

/// Read non-empty JSONL lines, skipping a leading `_meta` header.
pub fn read_jsonl<T, R>(reader: R) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if idx == 0 && is_meta_line(trimmed) {
            continue;
        }
        let value = serde_json::from_str(trimmed)
            .map_err(|e| Error::Line { line: idx + 1, message: e.to_string() })?;
        out.push(value);
    }
    Ok(out)
}

fn is_meta_line(line: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.as_object().map(|o| o.contains_key(META_KEY)))
        .unwrap_or(false)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a corpus JSONL file into tokenized, truncated records.
pub fn read_corpus<R: BufRead>(
    reader: R,
    max_article: usize,
    max_summary: usize,
) -> Result<Vec<CorpusRecord>> {
    let lines: Vec<CorpusLine> = read_jsonl(reader)?;
    Ok(lines
        .into_iter()
        .map(|l| CorpusRecord::new(l.id, &l.article, &l.summary).truncated(max_article, max_summary))
        .collect())
}
