//! Machine translation boundary.
//!
//! Alignment only needs the source document in English, paragraph for
//! paragraph. Any engine can sit behind [`Translator`]; this module ships an
//! identity adapter, a word dictionary adapter, and an adapter that talks to
//! an external process over framed records on stdin/stdout.
//!
//! # Wire protocol
//!
//! Each record is a 4-digit, zero-padded decimal byte length, the UTF-8 JSON
//! payload, and a newline: `0042{"lang":"fr","paragraphs":["Bonjour."]}\n`.
//! Requests carry `lang` and `paragraphs`; the process answers every request
//! with one `{"paragraphs": [...]}` record of the same length, in order.
//! Payloads larger than 9999 bytes cannot be framed, so requests are split
//! into several records when needed.
//!
//! # Cache layout
//!
//! `<cache_dir>/<lang>/<h[0..2]>/<h>.txt` holds the translation of the
//! paragraph whose UTF-8 SHA-256 hex digest is `h`.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::normalize::Document;

pub const FRAME_PREFIX_LEN: usize = 4;
pub const MAX_FRAME_PAYLOAD: usize = 9999;

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("translator unavailable: {0}")]
    AdapterUnavailable(String),
    #[error("translator returned {got} paragraphs for a request of {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("record of {len} bytes does not fit a {FRAME_PREFIX_LEN}-digit frame")]
    FrameTooLarge { len: usize },
    #[error("invalid translation request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub lang: String,
    pub paragraphs: Vec<String>,
}

impl TranslationRequest {
    pub fn new(lang: impl Into<String>, paragraphs: Vec<String>) -> Result<Self, TranslateError> {
        if paragraphs.is_empty() {
            return Err(TranslateError::InvalidRequest("no paragraphs".into()));
        }
        if let Some(i) = paragraphs.iter().position(|p| p.trim().is_empty()) {
            return Err(TranslateError::InvalidRequest(format!("paragraph {i} is empty")));
        }
        Ok(TranslationRequest {
            lang: lang.into(),
            paragraphs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationResponse {
    pub paragraphs: Vec<String>,
}

/// Paragraph-preserving translation into English. Implementations must be
/// deterministic for a fixed configuration.
pub trait Translator: Send {
    fn translate(&mut self, req: &TranslationRequest) -> Result<TranslationResponse, TranslateError>;
}

/// Calls `translator` and enforces the 1:1 paragraph contract.
pub fn translate_checked(
    translator: &mut dyn Translator,
    req: &TranslationRequest,
) -> Result<TranslationResponse, TranslateError> {
    let resp = translator.translate(req)?;
    if resp.paragraphs.len() != req.paragraphs.len() {
        return Err(TranslateError::LengthMismatch {
            expected: req.paragraphs.len(),
            got: resp.paragraphs.len(),
        });
    }
    Ok(resp)
}

/// Translates every paragraph of `original` into an English document with
/// the same paragraph indices.
pub fn translate_document(
    translator: &mut dyn Translator,
    original: &Document,
) -> Result<Document, TranslateError> {
    if original.is_empty() {
        return Ok(Document {
            lang: "en".into(),
            ..original.clone()
        });
    }
    let req = TranslationRequest::new(
        original.lang.clone(),
        original.paragraphs.iter().map(|p| p.text.clone()).collect(),
    )?;
    let resp = translate_checked(translator, &req)?;
    let mut doc = Document::from_paragraphs(original.symbol.clone(), "en", &resp.paragraphs);
    doc.source_index = original.source_index.clone();
    Ok(doc)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn translate(&mut self, req: &TranslationRequest) -> Result<TranslationResponse, TranslateError> {
        Ok(TranslationResponse {
            paragraphs: req.paragraphs.clone(),
        })
    }
}

/// Word-for-word lookup. Keys are matched case-insensitively on the word
/// stripped of surrounding punctuation; unknown words pass through.
#[derive(Debug, Clone, Default)]
pub struct DictionaryTranslator {
    entries: HashMap<String, String>,
}

impl DictionaryTranslator {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        DictionaryTranslator {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.as_ref().to_lowercase(), v.into()))
                .collect(),
        }
    }

    /// Reads tab-separated `source<TAB>translation` lines. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn from_tsv(path: &Path) -> Result<Self, TranslateError> {
        let text = fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('\t').ok_or_else(|| {
                TranslateError::InvalidRequest(format!("{}:{}: expected a tab", path.display(), n + 1))
            })?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self::new(entries))
    }

    fn translate_word(&self, word: &str) -> String {
        let start = word.find(|c: char| c.is_alphanumeric());
        let end = word.rfind(|c: char| c.is_alphanumeric());
        let (Some(start), Some(end)) = (start, end) else {
            return word.to_string();
        };
        let end = end + word[end..].chars().next().map_or(0, char::len_utf8);
        let core = &word[start..end];
        match self.entries.get(&core.to_lowercase()) {
            Some(t) => format!("{}{}{}", &word[..start], t, &word[end..]),
            None => word.to_string(),
        }
    }
}

impl Translator for DictionaryTranslator {
    fn translate(&mut self, req: &TranslationRequest) -> Result<TranslationResponse, TranslateError> {
        Ok(TranslationResponse {
            paragraphs: req
                .paragraphs
                .iter()
                .map(|p| {
                    p.split_whitespace()
                        .map(|w| self.translate_word(w))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect(),
        })
    }
}

/// Writes one framed record.
pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<(), TranslateError> {
    if payload.len() > MAX_FRAME_PAYLOAD {
        return Err(TranslateError::FrameTooLarge { len: payload.len() });
    }
    write!(w, "{:04}", payload.len())?;
    w.write_all(payload)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Reads one framed record; `None` on a clean end of stream.
pub fn read_frame<R: BufRead>(r: &mut R) -> Result<Option<Vec<u8>>, TranslateError> {
    let mut prefix = [0u8; FRAME_PREFIX_LEN];
    let mut filled = 0;
    while filled < FRAME_PREFIX_LEN {
        match r.read(&mut prefix[filled..])? {
            0 if filled == 0 => return Ok(None),
            0 => return Err(TranslateError::ProtocolError("truncated length prefix".into())),
            n => filled += n,
        }
    }
    if !prefix.iter().all(u8::is_ascii_digit) {
        return Err(TranslateError::ProtocolError(format!(
            "bad length prefix {:?}",
            String::from_utf8_lossy(&prefix)
        )));
    }
    let len: usize = std::str::from_utf8(&prefix).unwrap().parse().unwrap();
    let mut payload = vec![0u8; len + 1];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => TranslateError::ProtocolError("truncated payload".into()),
        _ => e.into(),
    })?;
    if payload.pop() != Some(b'\n') {
        return Err(TranslateError::ProtocolError("record not terminated by a newline".into()));
    }
    Ok(Some(payload))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// On-disk translation cache keyed by language and paragraph hash.
#[derive(Debug, Clone)]
pub struct TranslationCache {
    root: PathBuf,
}

impl TranslationCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        TranslationCache { root: root.into() }
    }

    pub fn path_for(&self, lang: &str, text: &str) -> PathBuf {
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        self.root
            .join(lang)
            .join(&digest[..2])
            .join(format!("{digest}.txt"))
    }

    pub fn get(&self, lang: &str, text: &str) -> Option<String> {
        fs::read_to_string(self.path_for(lang, text)).ok()
    }

    pub fn put(&self, lang: &str, text: &str, translation: &str) -> io::Result<()> {
        let path = self.path_for(lang, text);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.{}-{}.tmp",
            path.file_name().unwrap().to_string_lossy(),
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        fs::write(&tmp, translation)?;
        fs::rename(tmp, path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalConfig {
    pub program: String,
    pub args: Vec<String>,
    pub cache_dir: Option<PathBuf>,
}

impl ExternalConfig {
    /// Splits a command line on whitespace into program and arguments.
    pub fn from_command_line(cmd: &str, cache_dir: Option<PathBuf>) -> Result<Self, TranslateError> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| TranslateError::AdapterUnavailable("empty command".into()))?;
        Ok(ExternalConfig {
            program,
            args: parts.collect(),
            cache_dir,
        })
    }
}

struct ChildIo {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    lang: &'a str,
    paragraphs: &'a [&'a str],
}

#[derive(Deserialize)]
struct WireResponse {
    paragraphs: Vec<String>,
}

/// Adapter for a translation engine running as a child process. The process
/// is started on first use and kept alive for later requests.
pub struct ExternalProcessTranslator {
    config: ExternalConfig,
    cache: Option<TranslationCache>,
    io: Option<ChildIo>,
    records_sent: usize,
}

impl ExternalProcessTranslator {
    pub fn new(config: ExternalConfig) -> Self {
        let cache = config.cache_dir.clone().map(TranslationCache::new);
        ExternalProcessTranslator {
            config,
            cache,
            io: None,
            records_sent: 0,
        }
    }

    /// Number of request records written to the process so far.
    pub fn records_sent(&self) -> usize {
        self.records_sent
    }

    fn spawn(&mut self) -> Result<&mut ChildIo, TranslateError> {
        if self.io.is_none() {
            let mut child = Command::new(&self.config.program)
                .args(&self.config.args)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| {
                    TranslateError::AdapterUnavailable(format!("cannot start {}: {e}", self.config.program))
                })?;
            let stdin = child.stdin.take();
            let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
            self.io = Some(ChildIo { child, stdin, stdout });
        }
        Ok(self.io.as_mut().unwrap())
    }

    /// Turns a broken stream into `AdapterUnavailable` when the process
    /// exited unsuccessfully, `ProtocolError` otherwise.
    fn stream_failure(&mut self, what: &str) -> TranslateError {
        let Some(mut io) = self.io.take() else {
            return TranslateError::ProtocolError(what.into());
        };
        drop(io.stdin.take());
        match io.child.wait() {
            Ok(status) if !status.success() => {
                TranslateError::AdapterUnavailable(format!("{} exited with {status}", self.config.program))
            }
            Ok(_) => TranslateError::ProtocolError(format!("{what}: process exited")),
            Err(e) => TranslateError::Io(e),
        }
    }

    fn exchange(&mut self, lang: &str, chunk: &[&str]) -> Result<Vec<String>, TranslateError> {
        let payload = serde_json::to_vec(&WireRequest { lang, paragraphs: chunk })
            .map_err(|e| TranslateError::ProtocolError(e.to_string()))?;
        let io = self.spawn()?;
        let stdin = io.stdin.as_mut().expect("stdin open while running");
        let sent = write_frame(stdin, &payload).and_then(|_| Ok(stdin.flush()?));
        self.records_sent += 1;
        if let Err(e) = sent {
            return Err(match e {
                TranslateError::Io(_) => self.stream_failure("writing request"),
                other => other,
            });
        }
        let frame = match read_frame(&mut self.io.as_mut().unwrap().stdout) {
            Ok(Some(frame)) => frame,
            Ok(None) => return Err(self.stream_failure("reading response")),
            Err(TranslateError::Io(_)) => return Err(self.stream_failure("reading response")),
            Err(e) => return Err(e),
        };
        let resp: WireResponse = serde_json::from_slice(&frame)
            .map_err(|e| TranslateError::ProtocolError(format!("malformed response: {e}")))?;
        if resp.paragraphs.len() != chunk.len() {
            return Err(TranslateError::LengthMismatch {
                expected: chunk.len(),
                got: resp.paragraphs.len(),
            });
        }
        Ok(resp.paragraphs)
    }
}

/// Splits `items` into consecutive runs whose request payload fits a frame.
fn frame_chunks<'a>(lang: &str, items: &[&'a str]) -> Result<Vec<Vec<&'a str>>, TranslateError> {
    let overhead = serde_json::to_vec(&WireRequest { lang, paragraphs: &[] })
        .map(|v| v.len())
        .unwrap_or(0);
    let mut chunks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut size = overhead;
    for &item in items {
        let item_len = serde_json::to_string(item).map(|s| s.len()).unwrap_or(usize::MAX) + 1;
        if overhead + item_len > MAX_FRAME_PAYLOAD {
            return Err(TranslateError::FrameTooLarge {
                len: overhead + item_len,
            });
        }
        if size + item_len > MAX_FRAME_PAYLOAD {
            chunks.push(std::mem::take(&mut current));
            size = overhead;
        }
        current.push(item);
        size += item_len;
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    Ok(chunks)
}

impl Translator for ExternalProcessTranslator {
    fn translate(&mut self, req: &TranslationRequest) -> Result<TranslationResponse, TranslateError> {
        let mut out: Vec<Option<String>> = req
            .paragraphs
            .iter()
            .map(|p| self.cache.as_ref().and_then(|c| c.get(&req.lang, p)))
            .collect();
        let pending: Vec<usize> = (0..out.len()).filter(|&i| out[i].is_none()).collect();
        if !pending.is_empty() {
            let texts: Vec<&str> = pending.iter().map(|&i| req.paragraphs[i].as_str()).collect();
            let mut cursor = 0;
            for chunk in frame_chunks(&req.lang, &texts)? {
                let translated = self.exchange(&req.lang, &chunk)?;
                for t in translated {
                    let i = pending[cursor];
                    if let Some(cache) = &self.cache {
                        cache.put(&req.lang, &req.paragraphs[i], &t)?;
                    }
                    out[i] = Some(t);
                    cursor += 1;
                }
            }
        }
        Ok(TranslationResponse {
            paragraphs: out.into_iter().map(|p| p.expect("every paragraph filled")).collect(),
        })
    }
}

impl Drop for ExternalProcessTranslator {
    fn drop(&mut self) {
        if let Some(mut io) = self.io.take() {
            drop(io.stdin.take());
            let _ = io.child.wait();
        }
    }
}
