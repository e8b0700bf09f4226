//! Record formats for the three corpus granularities and their JSONL I/O.
//!
//! Field names are our own:
//!
//! * file level: `{"symbol": .., "ar": .., "de": .., "en": .., "es": .., "fr": .., "ru": .., "zh": ..}`
//!   with `""` for a language the record lacks;
//! * bilingual: [`BilingualPairRecord`], one aligned group of one language
//!   against English, with half-open paragraph ranges on both sides;
//! * blocks: [`BlockRecord`], one all-language block keyed by its English
//!   paragraph range.
//!
//! Paths ending in `.gz` are read and written gzip-compressed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_script::{Script, UnicodeScript};

use crate::gapa::{AlignmentResult, MERGE_SEPARATOR};

/// Languages every file-level record carries.
pub const LANGUAGES: [&str; 7] = ["ar", "zh", "en", "fr", "ru", "es", "de"];

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "FileLevelWire")]
pub struct FileLevelRecord {
    pub symbol: String,
    #[serde(flatten)]
    pub texts: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct FileLevelWire {
    symbol: String,
    #[serde(flatten)]
    texts: BTreeMap<String, String>,
}

impl From<FileLevelWire> for FileLevelRecord {
    fn from(w: FileLevelWire) -> Self {
        let mut rec = FileLevelRecord {
            symbol: w.symbol,
            texts: w.texts,
        };
        rec.fill_gaps();
        rec
    }
}

impl FileLevelRecord {
    pub fn new(symbol: impl Into<String>) -> Self {
        let mut rec = FileLevelRecord {
            symbol: symbol.into(),
            texts: BTreeMap::new(),
        };
        rec.fill_gaps();
        rec
    }

    pub fn with_text(mut self, lang: &str, text: impl Into<String>) -> Self {
        self.texts.insert(lang.to_string(), text.into());
        self
    }

    fn fill_gaps(&mut self) {
        for lang in LANGUAGES {
            self.texts.entry(lang.to_string()).or_default();
        }
    }

    pub fn text(&self, lang: &str) -> &str {
        self.texts.get(lang).map_or("", String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilingualPairRecord {
    pub symbol: String,
    pub src_lang: String,
    pub src_text: String,
    pub en_text: String,
    pub hit_rate_src: f64,
    pub hit_rate_en: f64,
    pub src_start: usize,
    pub src_end: usize,
    pub en_start: usize,
    pub en_end: usize,
}

impl BilingualPairRecord {
    /// Stable identifier, unique within a corpus of bilingual outputs.
    pub fn pair_id(&self) -> String {
        format!(
            "{}/{}/{}-{}/{}-{}",
            self.symbol, self.src_lang, self.src_start, self.src_end, self.en_start, self.en_end
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub symbol: String,
    pub en_start: usize,
    pub en_end: usize,
    /// Merged text per language, English included.
    pub texts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMeta {
    pub symbol: String,
    pub src_lang: String,
}

/// One record per aligned group. `result` should already carry the original
/// source texts (see [`AlignmentResult::with_source_texts`]).
pub fn write_bilingual(result: &AlignmentResult, meta: &PairMeta) -> Vec<BilingualPairRecord> {
    result
        .groups
        .iter()
        .map(|g| BilingualPairRecord {
            symbol: meta.symbol.clone(),
            src_lang: meta.src_lang.clone(),
            src_text: g.merged_src_text.clone(),
            en_text: g.merged_tgt_text.clone(),
            hit_rate_src: g.min_hit_rate_src,
            hit_rate_en: g.min_hit_rate_tgt,
            src_start: g.src_range.start,
            src_end: g.src_range.end,
            en_start: g.tgt_range.start,
            en_end: g.tgt_range.end,
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockAggregation {
    pub blocks: Vec<BlockRecord>,
    pub diagnostics: Vec<String>,
}

/// Joins the bilingual alignments of one symbol into all-language blocks.
///
/// Group intervals over English paragraphs are unioned whenever they overlap.
/// A block is emitted only if every participating language tiles it exactly
/// with its own groups.
pub fn aggregate_blocks(
    symbol: &str,
    per_lang: &BTreeMap<String, Vec<BilingualPairRecord>>,
) -> BlockAggregation {
    let mut diagnostics = Vec::new();
    let mut langs: Vec<(&str, Vec<&BilingualPairRecord>)> = Vec::new();
    for (lang, records) in per_lang {
        if records.is_empty() {
            diagnostics.push(format!("{symbol}: no aligned groups for {lang}, excluded from blocks"));
            continue;
        }
        let mut sorted: Vec<&BilingualPairRecord> = records.iter().collect();
        sorted.sort_by_key(|r| (r.en_start, r.en_end));
        langs.push((lang, sorted));
    }

    let mut intervals: Vec<(usize, usize)> = langs
        .iter()
        .flat_map(|(_, recs)| recs.iter().map(|r| (r.en_start, r.en_end)))
        .collect();
    intervals.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in intervals {
        match merged.last_mut() {
            Some(last) if s < last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }

    let mut blocks = Vec::new();
    'block: for (start, end) in merged {
        let mut texts = BTreeMap::new();
        for (lang, recs) in &langs {
            let members: Vec<&&BilingualPairRecord> = recs
                .iter()
                .filter(|r| r.en_start >= start && r.en_end <= end)
                .collect();
            let mut cursor = start;
            for r in &members {
                if r.en_start != cursor {
                    break;
                }
                cursor = r.en_end;
            }
            if cursor != end {
                diagnostics.push(format!(
                    "{symbol}: block en[{start}..{end}) not covered by {lang}, skipped"
                ));
                continue 'block;
            }
            texts
                .entry("en".to_string())
                .or_insert_with(|| join(members.iter().map(|r| r.en_text.as_str())));
            texts.insert(lang.to_string(), join(members.iter().map(|r| r.src_text.as_str())));
        }
        if !texts.is_empty() {
            blocks.push(BlockRecord {
                symbol: symbol.to_string(),
                en_start: start,
                en_end: end,
                texts,
            });
        }
    }
    BlockAggregation { blocks, diagnostics }
}

fn join<'a>(parts: impl Iterator<Item = &'a str>) -> String {
    parts.collect::<Vec<_>>().join(MERGE_SEPARATOR)
}

/// Records that expose per-language text for statistics.
pub trait LanguageTexts {
    fn language_texts(&self) -> Vec<(&str, &str)>;
}

impl LanguageTexts for FileLevelRecord {
    fn language_texts(&self) -> Vec<(&str, &str)> {
        self.texts.iter().map(|(l, t)| (l.as_str(), t.as_str())).collect()
    }
}

impl LanguageTexts for BilingualPairRecord {
    fn language_texts(&self) -> Vec<(&str, &str)> {
        vec![(self.src_lang.as_str(), self.src_text.as_str()), ("en", self.en_text.as_str())]
    }
}

impl LanguageTexts for BlockRecord {
    fn language_texts(&self) -> Vec<(&str, &str)> {
        self.texts.iter().map(|(l, t)| (l.as_str(), t.as_str())).collect()
    }
}

/// Whitespace-separated tokens. For `zh`, every Han character is a token of
/// its own and each maximal non-Han run inside a whitespace token counts once.
pub fn count_tokens(lang: &str, text: &str) -> u64 {
    if lang != "zh" {
        return text.split_whitespace().count() as u64;
    }
    let mut n = 0u64;
    for piece in text.split_whitespace() {
        let mut in_run = false;
        for c in piece.chars() {
            if c.script() == Script::Han {
                n += 1;
                in_run = false;
            } else if !in_run {
                n += 1;
                in_run = true;
            }
        }
    }
    n
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageStats {
    /// Records whose text in this language is non-empty.
    pub files: u64,
    pub tokens: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: u64,
    pub languages: BTreeMap<String, LanguageStats>,
}

impl CorpusStats {
    /// Zero counts for the seven corpus languages.
    pub fn new() -> Self {
        CorpusStats {
            records: 0,
            languages: LANGUAGES
                .iter()
                .map(|l| (l.to_string(), LanguageStats::default()))
                .collect(),
        }
    }

    pub fn add<R: LanguageTexts + ?Sized>(&mut self, record: &R) {
        self.records += 1;
        for (lang, text) in record.language_texts() {
            let entry = self.languages.entry(lang.to_string()).or_default();
            if !text.trim().is_empty() {
                entry.files += 1;
                entry.tokens += count_tokens(lang, text);
            }
        }
    }
}

pub fn corpus_stats<'a, R, I>(records: I) -> CorpusStats
where
    R: LanguageTexts + 'a,
    I: IntoIterator<Item = &'a R>,
{
    let mut stats = CorpusStats::new();
    for rec in records {
        stats.add(rec);
    }
    stats
}

pub fn is_gzip_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn open_reader(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    Ok(if is_gzip_path(path) {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    })
}

/// Iterator over the records of a JSONL stream. Blank lines are ignored. In
/// lenient mode malformed lines are logged and skipped.
pub struct JsonlReader<R, T> {
    inner: R,
    line_no: usize,
    lenient: bool,
    skipped: usize,
    buf: String,
    _marker: PhantomData<T>,
}

impl<R: BufRead, T: DeserializeOwned> JsonlReader<R, T> {
    pub fn new(inner: R) -> Self {
        JsonlReader {
            inner,
            line_no: 0,
            lenient: false,
            skipped: 0,
            buf: String::new(),
            _marker: PhantomData,
        }
    }

    pub fn lenient(mut self, lenient: bool) -> Self {
        self.lenient = lenient;
        self
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl<R: BufRead, T: DeserializeOwned> Iterator for JsonlReader<R, T> {
    type Item = Result<T, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) if e.kind() == io::ErrorKind::InvalidData && self.lenient => {
                    self.line_no += 1;
                    self.skipped += 1;
                    log::warn!("line {}: not valid UTF-8, skipped", self.line_no);
                    continue;
                }
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(rec) => return Some(Ok(rec)),
                Err(e) if self.lenient => {
                    self.skipped += 1;
                    log::warn!("line {}: {e}, skipped", self.line_no);
                }
                Err(e) => {
                    return Some(Err(RecordError::Malformed {
                        line: self.line_no,
                        message: e.to_string(),
                    }))
                }
            }
        }
    }
}

pub fn read_records<T: DeserializeOwned>(path: &Path, lenient: bool) -> Result<Vec<T>, RecordError> {
    JsonlReader::new(open_reader(path)?).lenient(lenient).collect()
}

enum Sink {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
}

/// Streaming JSONL writer. Call [`JsonlWriter::finish`] to flush and, for
/// gzip output, write the trailer.
pub struct JsonlWriter {
    sink: Sink,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        Self::create_with(path, is_gzip_path(path))
    }

    pub fn create_with(path: &Path, gzip: bool) -> io::Result<Self> {
        let file = BufWriter::new(File::create(path)?);
        let sink = if gzip {
            Sink::Gzip(GzEncoder::new(file, Compression::default()))
        } else {
            Sink::Plain(file)
        };
        Ok(JsonlWriter { sink })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        let w: &mut dyn Write = match &mut self.sink {
            Sink::Plain(w) => w,
            Sink::Gzip(w) => w,
        };
        serde_json::to_writer(&mut *w, record)?;
        w.write_all(b"\n")
    }

    pub fn finish(self) -> io::Result<()> {
        match self.sink {
            Sink::Plain(mut w) => w.flush(),
            Sink::Gzip(w) => w.finish()?.flush(),
        }
    }
}

pub fn write_records<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> io::Result<()> {
    let mut w = JsonlWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

pub fn read_file_level(path: &Path) -> Result<Vec<FileLevelRecord>, RecordError> {
    read_records(path, false)
}

pub fn write_file_level(path: &Path, records: &[FileLevelRecord]) -> io::Result<()> {
    write_records(path, records)
}

pub fn read_bilingual(path: &Path) -> Result<Vec<BilingualPairRecord>, RecordError> {
    read_records(path, false)
}

pub fn write_bilingual_records(path: &Path, records: &[BilingualPairRecord]) -> io::Result<()> {
    write_records(path, records)
}

pub fn read_blocks(path: &Path) -> Result<Vec<BlockRecord>, RecordError> {
    read_records(path, false)
}

pub fn write_blocks(path: &Path, records: &[BlockRecord]) -> io::Result<()> {
    write_records(path, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gapa::align_documents;
    use crate::normalize::Document;
    use std::io::Cursor;

    fn pair(lang: &str, en: (usize, usize), text: &str) -> BilingualPairRecord {
        BilingualPairRecord {
            symbol: "S/1".into(),
            src_lang: lang.into(),
            src_text: text.into(),
            en_text: format!("en{}-{}", en.0, en.1),
            hit_rate_src: 1.0,
            hit_rate_en: 1.0,
            src_start: en.0,
            src_end: en.1,
            en_start: en.0,
            en_end: en.1,
        }
    }

    fn spans(agg: &BlockAggregation) -> Vec<(usize, usize)> {
        agg.blocks.iter().map(|b| (b.en_start, b.en_end)).collect()
    }

    #[test]
    fn missing_language_is_empty_string() {
        let line = r#"{"symbol":"A/1","en":"Hello","fr":"Bonjour"}"#;
        let recs: Vec<FileLevelRecord> = JsonlReader::new(Cursor::new(line)).collect::<Result<_, _>>().unwrap();
        assert_eq!(recs[0].text("de"), "");
        assert_eq!(recs[0].texts.len(), 7);
        assert_eq!(recs[0].text("fr"), "Bonjour");
    }

    #[test]
    fn empty_stream() {
        let recs: Vec<FileLevelRecord> = JsonlReader::new(Cursor::new("")).collect::<Result<_, _>>().unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn malformed_line_reports_number() {
        let input = "{\"symbol\":\"a\"}\n\nnot json\n";
        let res: Result<Vec<FileLevelRecord>, _> = JsonlReader::new(Cursor::new(input)).collect();
        assert!(matches!(res, Err(RecordError::Malformed { line: 3, .. })));
        let mut reader = JsonlReader::<_, FileLevelRecord>::new(Cursor::new(input)).lenient(true);
        assert_eq!(reader.by_ref().filter_map(Result::ok).count(), 1);
        assert_eq!(reader.skipped(), 1);
    }

    #[test]
    fn gzip_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl.gz");
        let recs = vec![
            FileLevelRecord::new("A/1").with_text("en", "Hello").with_text("zh", "你好"),
            FileLevelRecord::new("A/2"),
        ];
        write_file_level(&path, &recs).unwrap();
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(&raw[..2], &[0x1f, 0x8b]);
        assert_eq!(read_file_level(&path).unwrap(), recs);
    }

    #[test]
    fn bilingual_records_follow_groups() {
        let src = Document::from_raw("S/1", "fr", "alpha beta\n\ngamma delta\n\nepsilon zeta");
        let tgt = Document::from_raw("S/1", "en", "alpha beta\n\ngamma delta\n\nepsilon zeta");
        let res = align_documents(&src, &tgt, 0.3).unwrap();
        let meta = PairMeta {
            symbol: "S/1".into(),
            src_lang: "fr".into(),
        };
        let recs = write_bilingual(&res, &meta);
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].src_text, "gamma delta");
        assert_eq!((recs[2].en_start, recs[2].en_end), (2, 3));
    }

    #[test]
    fn dropped_paragraphs_emit_nothing() {
        let src = Document::from_raw("S/1", "fr", "alpha beta\n\nqwzx vbnm");
        let tgt = Document::from_raw("S/1", "en", "alpha beta");
        let res = align_documents(&src, &tgt, 0.3).unwrap();
        let recs = write_bilingual(&res, &PairMeta { symbol: "S/1".into(), src_lang: "fr".into() });
        assert_eq!(recs.len(), 1);
        assert_eq!(res.dropped_src, vec![1]);
    }

    #[test]
    fn record_hit_rate_is_group_minimum() {
        // src[0] matches 8 of its 13 letters, src[1] all of them.
        let src = Document::from_raw("S/1", "fr", "aa bb cc dd xyzzy\n\nff gg");
        let tgt = Document::from_raw("S/1", "en", "aa bb cc dd ff gg");
        let res = align_documents(&src, &tgt, 0.0).unwrap();
        let recs = write_bilingual(&res, &PairMeta { symbol: "S/1".into(), src_lang: "fr".into() });
        assert_eq!(recs.len(), 1);
        let expected = 8.0f64 / 13.0;
        assert!((recs[0].hit_rate_src - expected).abs() < 1e-12);
        assert!((recs[0].hit_rate_en - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_groups_give_identical_blocks() {
        let mut per = BTreeMap::new();
        per.insert("fr".to_string(), vec![pair("fr", (0, 1), "a"), pair("fr", (1, 2), "b")]);
        per.insert("es".to_string(), vec![pair("es", (0, 1), "c"), pair("es", (1, 2), "d")]);
        let agg = aggregate_blocks("S/1", &per);
        assert_eq!(spans(&agg), vec![(0, 1), (1, 2)]);
        assert_eq!(agg.blocks[1].texts["es"], "d");
        assert_eq!(agg.blocks[1].texts["en"], "en1-2");
    }

    #[test]
    fn overlapping_groups_union() {
        let mut per = BTreeMap::new();
        per.insert("fr".to_string(), vec![pair("fr", (0, 2), "a"), pair("fr", (2, 3), "b")]);
        per.insert("es".to_string(), vec![pair("es", (0, 1), "c"), pair("es", (1, 3), "d")]);
        let agg = aggregate_blocks("S/1", &per);
        assert_eq!(spans(&agg), vec![(0, 3)]);
        assert_eq!(agg.blocks[0].texts["fr"], "a\nb");
        assert_eq!(agg.blocks[0].texts["es"], "c\nd");
        assert_eq!(agg.blocks[0].texts["en"], "en0-1\nen1-3");
    }

    #[test]
    fn uncovered_block_skipped_and_empty_language_excluded() {
        let mut per = BTreeMap::new();
        per.insert("fr".to_string(), vec![pair("fr", (0, 1), "a"), pair("fr", (1, 2), "b")]);
        per.insert("es".to_string(), vec![pair("es", (1, 2), "d")]);
        per.insert("ru".to_string(), vec![]);
        let agg = aggregate_blocks("S/1", &per);
        assert_eq!(spans(&agg), vec![(1, 2)]);
        assert!(!agg.blocks[0].texts.contains_key("ru"));
        assert_eq!(agg.diagnostics.len(), 2);
    }

    fn tiling(n: usize, cuts: &[bool]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..n {
            if cuts[i % cuts.len()] {
                out.push((start, i));
                start = i;
            }
        }
        out.push((start, n));
        out
    }

    proptest::proptest! {
        #[test]
        fn blocks_partition_group_intervals(
            n in 1usize..30,
            cuts in proptest::collection::vec(proptest::collection::vec(proptest::bool::ANY, 1..30), 1..4),
        ) {
            let mut per = BTreeMap::new();
            for (k, c) in cuts.iter().enumerate() {
                let lang = LANGUAGES[k].to_string();
                let recs = tiling(n, c).into_iter().map(|iv| pair(&lang, iv, "x")).collect();
                per.insert(lang, recs);
            }
            let agg = aggregate_blocks("S/1", &per);
            let blocks = spans(&agg);
            proptest::prop_assert!(blocks.windows(2).all(|w| w[0].1 <= w[1].0));
            proptest::prop_assert_eq!(blocks.first().map(|b| b.0), Some(0));
            proptest::prop_assert_eq!(blocks.last().map(|b| b.1), Some(n));
            for recs in per.values() {
                for r in recs {
                    let containing = blocks.iter().filter(|b| b.0 <= r.en_start && r.en_end <= b.1).count();
                    proptest::prop_assert_eq!(containing, 1);
                }
            }
        }
    }

    #[test]
    fn token_rule() {
        assert_eq!(count_tokens("en", "a b c"), 3);
        assert_eq!(count_tokens("zh", "联合国 大会"), 5);
        assert_eq!(count_tokens("zh", "第70/1号决议"), 5);
        assert_eq!(count_tokens("zh", "A/RES/70/1"), 1);
    }

    #[test]
    fn stats() {
        let empty: Vec<FileLevelRecord> = vec![];
        let s = corpus_stats(&empty);
        assert_eq!(s.records, 0);
        assert!(s.languages.values().all(|l| *l == LanguageStats::default()));

        let recs = vec![
            FileLevelRecord::new("A").with_text("en", "a b c").with_text("zh", "联合国"),
            FileLevelRecord::new("B").with_text("en", "d e"),
        ];
        let s = corpus_stats(&recs);
        assert_eq!(s.languages["en"], LanguageStats { files: 2, tokens: 5 });
        assert_eq!(s.languages["zh"], LanguageStats { files: 1, tokens: 3 });
        assert_eq!(s.languages["de"].files, 0);
    }
}
