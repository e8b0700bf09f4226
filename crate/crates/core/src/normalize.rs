//! Text cleanup, paragraph segmentation and tokenization.
//!
//! Raw extracted text goes through three pure steps before alignment:
//! format-control stripping, blank-line paragraph splitting, and a
//! whitespace tokenizer that case-folds and trims punctuation. Tokens carry
//! their letter count, which the hit-rate computation sums later.

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

/// Characters removed by [`strip_format_controls`].
const FORMAT_CONTROLS: &[char] = &[
    '\u{00AD}', // soft hyphen
    '\u{061C}', // arabic letter mark
    '\u{180E}', // mongolian vowel separator
    '\u{200B}', // zero width space
    '\u{200C}', // zero width non-joiner
    '\u{200D}', // zero width joiner
    '\u{200E}', // left-to-right mark
    '\u{200F}', // right-to-left mark
    '\u{202A}', '\u{202B}', '\u{202C}', '\u{202D}', '\u{202E}', // embeddings / overrides
    '\u{2060}', // word joiner
    '\u{2066}', '\u{2067}', '\u{2068}', '\u{2069}', // isolates
    '\u{FEFF}', // byte order mark / zero width no-break space
];

#[inline]
pub fn is_format_control(c: char) -> bool {
    FORMAT_CONTROLS.contains(&c)
}

/// Removes zero-width characters, directional marks, soft hyphens and the
/// byte-order mark. Every other character is kept in order.
pub fn strip_format_controls(raw: &str) -> String {
    raw.chars().filter(|&c| !is_format_control(c)).collect()
}

/// Splits on blank lines (two or more consecutive newlines, optionally
/// with whitespace-only lines between them). Pieces are trimmed and empty
/// pieces dropped.
pub fn split_paragraphs(text: &str) -> Vec<String> {
    raw_paragraphs(text)
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

/// Blank-line separated, non-blank chunks, untrimmed. Their ordinals are the
/// "original" paragraph indices kept in [`Document::source_index`].
fn raw_paragraphs(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut blank_run = false;
    let mut para_end = 0usize;
    let mut pos = 0usize;
    for line in text.split_inclusive('\n') {
        let is_blank = line.trim().is_empty();
        if is_blank {
            if !blank_run {
                para_end = pos;
                blank_run = true;
            }
        } else if blank_run {
            out.push(&text[start..para_end]);
            start = pos;
            blank_run = false;
        }
        pos += line.len();
    }
    out.push(if blank_run { &text[start..para_end] } else { &text[start..] });
    out.retain(|chunk| !chunk.trim().is_empty());
    out
}

/// One normalized word with its letter count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub letters: u32,
}

#[inline]
pub fn is_letter(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::UppercaseLetter
            | GeneralCategory::LowercaseLetter
            | GeneralCategory::TitlecaseLetter
            | GeneralCategory::ModifierLetter
            | GeneralCategory::OtherLetter
    )
}

/// Number of letter-category characters in `s`.
pub fn letter_count(s: &str) -> u32 {
    s.chars().filter(|&c| is_letter(c)).count() as u32
}

/// Whitespace split, lowercase, trim leading/trailing punctuation and
/// symbols, drop pieces without letters.
pub fn tokenize(paragraph_text: &str) -> Vec<Token> {
    paragraph_text
        .split_whitespace()
        .filter_map(|piece| {
            let folded = piece.to_lowercase();
            let surface = folded.trim_matches(|c: char| !c.is_alphanumeric());
            let letters = letter_count(surface);
            (letters > 0).then(|| Token {
                surface: surface.to_string(),
                letters,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Paragraph {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Paragraph {
            index,
            text,
            tokens,
        }
    }

    pub fn letters(&self) -> u64 {
        self.tokens.iter().map(|t| t.letters as u64).sum()
    }
}

/// One language version of one record, split into paragraphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub symbol: String,
    pub lang: String,
    pub paragraphs: Vec<Paragraph>,
    /// `source_index[i]` is the ordinal of paragraph `i` among the blank-line
    /// separated chunks of the raw text, counting chunks that only held
    /// format controls and were dropped.
    pub source_index: Vec<usize>,
}

impl Document {
    /// Normalizes raw extracted text into a document. Chunks that are empty
    /// once format controls are removed are dropped and indices re-densified.
    pub fn from_raw(symbol: impl Into<String>, lang: impl Into<String>, raw: &str) -> Self {
        let unified = raw.replace("\r\n", "\n");
        let mut paragraphs = Vec::new();
        let mut source_index = Vec::new();
        for (ordinal, chunk) in raw_paragraphs(&unified).into_iter().enumerate() {
            let cleaned = strip_format_controls(chunk);
            let trimmed = cleaned.trim();
            if trimmed.is_empty() {
                continue;
            }
            paragraphs.push(Paragraph::new(paragraphs.len(), trimmed));
            source_index.push(ordinal);
        }
        Document {
            symbol: symbol.into(),
            lang: lang.into(),
            paragraphs,
            source_index,
        }
    }

    /// Builds a document from already segmented paragraphs, keeping them 1:1.
    /// Each paragraph is stripped of format controls and trimmed but never
    /// dropped, so index `i` always corresponds to input `i`.
    pub fn from_paragraphs<S: AsRef<str>>(
        symbol: impl Into<String>,
        lang: impl Into<String>,
        paragraphs: &[S],
    ) -> Self {
        let paragraphs: Vec<Paragraph> = paragraphs
            .iter()
            .enumerate()
            .map(|(i, p)| Paragraph::new(i, strip_format_controls(p.as_ref()).trim()))
            .collect();
        let source_index = (0..paragraphs.len()).collect();
        Document {
            symbol: symbol.into(),
            lang: lang.into(),
            paragraphs,
            source_index,
        }
    }

    pub fn len(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paragraphs.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.paragraphs.iter().map(|p| p.text.as_str()).collect()
    }

    pub fn token_count(&self) -> usize {
        self.paragraphs.iter().map(|p| p.tokens.len()).sum()
    }
}
