//! Monolingual document indexing: whitespace normalization, paragraph map and
//! sentence boundaries. All offsets are character (not byte) offsets into the
//! normalized text.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, BufRead};
use std::path::Path;
use std::sync::Mutex;

use base64::Engine;

use crate::record::Span;

/// Paragraph index for every offset of a normalized text.
///
/// Stored as the start offset of each paragraph; the single space joining two
/// paragraphs belongs to the earlier one.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParagraphMap {
    starts: Vec<usize>,
    len: usize,
}

impl ParagraphMap {
    pub fn paragraph_of(&self, offset: usize) -> Option<usize> {
        if offset >= self.len {
            return None;
        }
        Some(self.starts.partition_point(|&s| s <= offset) - 1)
    }

    pub fn paragraph_count(&self) -> usize {
        self.starts.len()
    }

    /// Number of offsets covered (the normalized text's char length).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }
}

/// Collapse every maximal run of Unicode whitespace to one U+0020 and trim
/// both ends. A whitespace run spanning a blank line (two or more line feeds,
/// or a U+2029 paragraph separator) starts a new paragraph.
pub fn normalize_whitespace(raw: &str) -> (String, ParagraphMap) {
    let mut out = String::with_capacity(raw.len());
    let mut starts = Vec::new();
    let mut n = 0usize;
    let mut in_ws = false;
    let mut newlines = 0usize;
    let mut hard_break = false;

    for c in raw.chars() {
        if c.is_whitespace() {
            in_ws = true;
            match c {
                '\n' => newlines += 1,
                '\u{2029}' => hard_break = true,
                _ => {}
            }
            continue;
        }
        if n == 0 {
            starts.push(0);
        } else if in_ws {
            out.push(' ');
            n += 1;
            if newlines >= 2 || hard_break {
                starts.push(n);
            }
        }
        in_ws = false;
        newlines = 0;
        hard_break = false;
        out.push(c);
        n += 1;
    }
    (out, ParagraphMap { starts, len: n })
}

/// A rule set of abbreviations that do not end a sentence when followed by a
/// period, in the Moses `nonbreaking_prefix` file format.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrefixList {
    always: HashSet<String>,
    numeric_only: HashSet<String>,
}

impl PrefixList {
    /// Parse one-prefix-per-line text. `#` starts a comment; a trailing
    /// `#NUMERIC_ONLY#` restricts the prefix to positions before a digit.
    pub fn parse(text: &str) -> Self {
        let mut list = PrefixList::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, rest) = match line.split_once(char::is_whitespace) {
                Some((w, r)) => (w, r.trim()),
                None => (line, ""),
            };
            if rest.starts_with("#NUMERIC_ONLY#") {
                list.numeric_only.insert(word.to_string());
            } else {
                list.always.insert(word.to_string());
            }
        }
        list
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn insert(&mut self, prefix: &str) {
        self.always.insert(prefix.to_string());
    }

    pub fn len(&self) -> usize {
        self.always.len() + self.numeric_only.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub trait SentenceSplitter: Send + Sync {
    /// Inclusive spans of each sentence in an already-normalized text. Spans
    /// never include the single space between sentences.
    fn split(&self, norm_text: &str, lang: &str) -> Vec<Span>;
}

const BUILTIN_PREFIXES: [(&str, &str); 7] = [
    ("en", include_str!("../prefixes/en.txt")),
    ("de", include_str!("../prefixes/de.txt")),
    ("fr", include_str!("../prefixes/fr.txt")),
    ("es", include_str!("../prefixes/es.txt")),
    ("it", include_str!("../prefixes/it.txt")),
    ("pl", include_str!("../prefixes/pl.txt")),
    ("pt", include_str!("../prefixes/pt.txt")),
];

/// Deterministic punctuation-driven splitter.
///
/// A sentence ends at `.`, `!` or `?` (optionally followed by closing quotes
/// or brackets) when the next token starts, after optional opening quotes,
/// with an uppercase letter. After a period a digit also starts a sentence.
/// Periods after a listed prefix or an acronym like `U.S.` do not split.
#[derive(Debug, Default)]
pub struct RuleSplitter {
    prefixes: HashMap<String, PrefixList>,
    warned: Mutex<HashSet<String>>,
}

impl RuleSplitter {
    /// Splitter with no prefix lists; every language uses neutral rules.
    pub fn new() -> Self {
        Self::default()
    }

    /// Splitter preloaded with the bundled lists for de, en, es, fr, it, pl, pt.
    pub fn with_builtin_prefixes() -> Self {
        let mut s = Self::new();
        for (lang, text) in BUILTIN_PREFIXES {
            s.prefixes.insert(lang.to_string(), PrefixList::parse(text));
        }
        s
    }

    pub fn set_prefixes(&mut self, lang: &str, list: PrefixList) {
        self.prefixes.insert(lang.to_string(), list);
    }

    /// Load every `<lang>.txt` (or `nonbreaking_prefix.<lang>`) file in a
    /// directory, replacing bundled lists of the same language.
    pub fn load_prefix_dir(&mut self, dir: &Path) -> io::Result<usize> {
        let mut loaded = 0;
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let name = match path.file_name().and_then(|n| n.to_str()) {
                Some(n) => n.to_string(),
                None => continue,
            };
            let lang = if let Some(l) = name.strip_prefix("nonbreaking_prefix.") {
                l.to_string()
            } else if let Some(l) = name.strip_suffix(".txt") {
                l.to_string()
            } else {
                continue;
            };
            self.set_prefixes(&lang, PrefixList::load(&path)?);
            loaded += 1;
        }
        Ok(loaded)
    }

    fn prefixes_for(&self, lang: &str) -> Option<&PrefixList> {
        let found = self.prefixes.get(lang);
        if found.is_none() {
            let mut warned = self.warned.lock().unwrap_or_else(|e| e.into_inner());
            if warned.insert(lang.to_string()) {
                log::warn!("no non-breaking prefixes for language {lang:?}; using language-neutral rules");
            }
        }
        found
    }
}

fn is_opener(c: char) -> bool {
    matches!(
        c,
        '"' | '\'' | '(' | '[' | '¿' | '¡' | '«' | '“' | '‘' | '„' | '‹' | '‚'
    )
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '»' | '”' | '’' | '›')
}

fn is_acronym(word: &str) -> bool {
    // "U.S." / "E.-U.": a period followed by uppercase letters or hyphens, ending in periods
    let body = word.trim_end_matches('.');
    if body.len() == word.len() {
        return false;
    }
    match body.rfind('.') {
        Some(i) => {
            let tail = &body[i + 1..];
            !tail.is_empty() && tail.chars().all(|c| c.is_uppercase() || c == '-')
        }
        None => false,
    }
}

fn ends_sentence(word: &str, next: &str, prefixes: Option<&PrefixList>) -> bool {
    let core = word.trim_end_matches(is_closer);
    let had_closers = core.len() != word.len();
    let last = match core.chars().last() {
        Some(c) => c,
        None => return false,
    };
    let first = match next.trim_start_matches(is_opener).chars().next() {
        Some(c) => c,
        None => return false,
    };
    match last {
        '!' | '?' => first.is_uppercase(),
        '.' => {
            if !(first.is_uppercase() || first.is_numeric()) {
                return false;
            }
            if had_closers {
                return true;
            }
            let stem = core.trim_end_matches('.').trim_start_matches(is_opener);
            if let Some(p) = prefixes {
                if p.always.contains(stem) {
                    return false;
                }
                if first.is_numeric() && p.numeric_only.contains(stem) {
                    return false;
                }
            }
            !is_acronym(core)
        }
        _ => false,
    }
}

impl SentenceSplitter for RuleSplitter {
    fn split(&self, norm_text: &str, lang: &str) -> Vec<Span> {
        let prefixes = self.prefixes_for(lang);
        let mut spans = Vec::new();
        let mut tokens = norm_text.split(' ').filter(|t| !t.is_empty()).peekable();
        let mut offset = 0usize;
        let mut sent_start = 0usize;
        while let Some(tok) = tokens.next() {
            let tok_len = tok.chars().count();
            let tok_end = offset + tok_len - 1;
            match tokens.peek() {
                Some(next) => {
                    if ends_sentence(tok, next, prefixes) {
                        spans.push(Span::new(sent_start, tok_end));
                        sent_start = tok_end + 2;
                    }
                }
                None => spans.push(Span::new(sent_start, tok_end)),
            }
            offset = tok_end + 2;
        }
        spans
    }
}

/// An indexed monolingual document.
#[derive(Debug, Clone)]
pub struct MonoDocument {
    pub doc_id: String,
    pub lang: String,
    pub raw_text: String,
    pub norm_text: String,
    pub paragraphs: ParagraphMap,
    pub sentence_spans: Vec<Span>,
    /// Byte offset of each char (plus one past the end); empty for ASCII text.
    byte_of_char: Vec<usize>,
}

impl MonoDocument {
    pub fn index(
        doc_id: impl Into<String>,
        lang: impl Into<String>,
        raw_text: impl Into<String>,
        splitter: &dyn SentenceSplitter,
    ) -> Self {
        let raw_text = raw_text.into();
        let lang = lang.into();
        let (norm_text, paragraphs) = normalize_whitespace(&raw_text);
        let sentence_spans = splitter.split(&norm_text, &lang);
        let byte_of_char = if norm_text.is_ascii() {
            Vec::new()
        } else {
            norm_text
                .char_indices()
                .map(|(b, _)| b)
                .chain(std::iter::once(norm_text.len()))
                .collect()
        };
        MonoDocument {
            doc_id: doc_id.into(),
            lang,
            raw_text,
            norm_text,
            paragraphs,
            sentence_spans,
            byte_of_char,
        }
    }

    /// Char length of the normalized text.
    pub fn char_len(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn byte_offset(&self, char_offset: usize) -> usize {
        if self.byte_of_char.is_empty() {
            char_offset
        } else {
            self.byte_of_char[char_offset]
        }
    }

    pub fn char_offset(&self, byte_offset: usize) -> usize {
        if self.byte_of_char.is_empty() {
            byte_offset
        } else {
            self.byte_of_char.partition_point(|&b| b < byte_offset)
        }
    }

    pub fn slice(&self, span: Span) -> &str {
        &self.norm_text[self.byte_offset(span.start_char)..self.byte_offset(span.end_char + 1)]
    }

    pub fn sentence_index_at(&self, offset: usize) -> Option<usize> {
        let i = self.sentence_spans.partition_point(|s| s.end_char < offset);
        self.sentence_spans
            .get(i)
            .filter(|s| s.contains(offset))
            .map(|_| i)
    }

    pub fn paragraph_index_at(&self, offset: usize) -> Option<usize> {
        self.paragraphs.paragraph_of(offset)
    }
}

/// Raw monolingual documents keyed by document id.
#[derive(Debug, Clone, Default)]
pub struct MonoStore {
    docs: HashMap<String, String>,
}

impl MonoStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, raw: impl Into<String>) {
        self.docs.insert(doc_id.into(), raw.into());
    }

    pub fn get(&self, doc_id: &str) -> Option<&str> {
        self.docs.get(doc_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Read a two-column `doc_id<TAB>base64(raw text)` stream.
    pub fn read_tsv<R: BufRead>(reader: R) -> io::Result<Self> {
        let engine = base64::engine::general_purpose::STANDARD;
        let mut store = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let invalid = |msg: String| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {msg}", i + 1));
            let (id, payload) = line
                .split_once('\t')
                .ok_or_else(|| invalid("expected doc_id<TAB>base64 text".into()))?;
            let bytes = engine
                .decode(payload.trim_end())
                .map_err(|e| invalid(format!("bad base64: {e}")))?;
            let text = String::from_utf8(bytes).map_err(|e| invalid(format!("text is not UTF-8: {e}")))?;
            store.insert(id, text);
        }
        Ok(store)
    }

    /// One document per file; the file name (minus a `.txt` extension) is the
    /// document id.
    pub fn read_dir(dir: &Path) -> io::Result<Self> {
        let mut store = Self::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if !path.is_file() {
                continue;
            }
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let id = name.strip_suffix(".txt").unwrap_or(name).to_string();
            store.insert(id, fs::read_to_string(&path)?);
        }
        Ok(store)
    }

    /// Load from a directory or a base64 TSV file.
    pub fn open(path: &Path) -> io::Result<Self> {
        if path.is_dir() {
            Self::read_dir(path)
        } else {
            Self::read_tsv(io::BufReader::new(fs::File::open(path)?))
        }
    }

    /// Encode one store entry as a TSV line.
    pub fn encode_line(doc_id: &str, raw: &str) -> String {
        format!(
            "{doc_id}\t{}",
            base64::engine::general_purpose::STANDARD.encode(raw.as_bytes())
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(v: &[(usize, usize)]) -> Vec<Span> {
        v.iter().map(|&(a, b)| Span::new(a, b)).collect()
    }

    #[test]
    fn normalizes_and_maps_paragraphs() {
        let (norm, map) = normalize_whitespace("a\n\nb\tc");
        assert_eq!(norm, "a b c");
        assert_eq!(map.paragraph_of(0), Some(0));
        assert_eq!(map.paragraph_of(2), Some(1));
        assert_eq!(map.paragraph_of(4), Some(1));
        assert_eq!(map.paragraph_of(5), None);
        assert_eq!(map.paragraph_count(), 2);
    }

    #[test]
    fn single_char_and_empty() {
        let (norm, map) = normalize_whitespace("x");
        assert_eq!(norm, "x");
        assert_eq!(map.paragraph_of(0), Some(0));
        let (norm, map) = normalize_whitespace("");
        assert_eq!(norm, "");
        assert!(map.is_empty());
        assert_eq!(map.paragraph_count(), 0);
        let (norm, _) = normalize_whitespace(" \n\t ");
        assert_eq!(norm, "");
    }

    #[test]
    fn blank_line_with_spaces_and_crlf_breaks_paragraph() {
        let (norm, map) = normalize_whitespace("  one\r\n  \r\ntwo\nthree\u{2029}four ");
        assert_eq!(norm, "one two three four");
        assert_eq!(map.starts(), &[0, 4, 14]);
        // single newline keeps the paragraph
        assert_eq!(map.paragraph_of(8), Some(1));
    }

    #[test]
    fn unicode_whitespace_collapses() {
        let (norm, _) = normalize_whitespace("a\u{00A0}\u{2003}b\u{3000}c");
        assert_eq!(norm, "a b c");
    }

    #[test]
    fn splits_on_terminal_punctuation() {
        let s = RuleSplitter::with_builtin_prefixes();
        assert_eq!(s.split("Hello world. How are you?", "en"), spans(&[(0, 11), (13, 24)]));
        assert_eq!(s.split("No terminal punctuation", "en"), spans(&[(0, 22)]));
        assert_eq!(s.split("", "en"), vec![]);
    }

    #[test]
    fn prefix_list_blocks_split() {
        let mut s = RuleSplitter::new();
        let mut list = PrefixList::default();
        list.insert("Mr");
        s.set_prefixes("en", list);
        assert_eq!(s.split("Mr. Smith left.", "en"), spans(&[(0, 14)]));
        // without the list the period after "Mr" splits
        assert_eq!(RuleSplitter::new().split("Mr. Smith left.", "xx").len(), 2);
    }

    #[test]
    fn numeric_only_prefix() {
        let mut s = RuleSplitter::new();
        s.set_prefixes("en", PrefixList::parse("No #NUMERIC_ONLY#\n"));
        assert_eq!(s.split("See No. 5 here.", "en").len(), 1);
        assert_eq!(s.split("I said No. Then left.", "en").len(), 2);
    }

    #[test]
    fn lowercase_continuation_and_acronyms_do_not_split() {
        let s = RuleSplitter::new();
        assert_eq!(s.split("It costs 3.5 dollars. ok fine", "en").len(), 1);
        assert_eq!(s.split("The U.S. Army came.", "en").len(), 1);
        assert_eq!(s.split("He said \"Go.\" Then left!", "en").len(), 2);
        assert_eq!(s.split("Wirklich? ¿Qué pasa?", "es").len(), 2);
    }

    #[test]
    fn index_maps_offsets() {
        let s = RuleSplitter::new();
        let doc = MonoDocument::index("d", "de", "Grüße aus Köln.\n\nDas ist schön.", &s);
        assert_eq!(doc.norm_text, "Grüße aus Köln. Das ist schön.");
        assert_eq!(doc.char_len(), 30);
        assert_eq!(doc.sentence_spans, spans(&[(0, 14), (16, 29)]));
        assert_eq!(doc.slice(Span::new(16, 29)), "Das ist schön.");
        assert_eq!(doc.sentence_index_at(15), None);
        assert_eq!(doc.sentence_index_at(16), Some(1));
        assert_eq!(doc.paragraph_index_at(20), Some(1));
        let b = doc.byte_offset(16);
        assert_eq!(doc.char_offset(b), 16);
    }

    #[test]
    fn store_tsv_round_trip() {
        let line = MonoStore::encode_line("doc-1", "Zeile eins\n\nZeile zwei");
        let store = MonoStore::read_tsv(io::Cursor::new(format!("{line}\n"))).unwrap();
        assert_eq!(store.get("doc-1"), Some("Zeile eins\n\nZeile zwei"));
        assert!(MonoStore::read_tsv(io::Cursor::new("no-tab-here\n")).is_err());
    }
}
