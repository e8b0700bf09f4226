//! One document pair through the whole pipeline, and output helpers.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use anyhow::{Context, Result};
use serde::Serialize;
use uprprc_core::corpus_io::{is_gzip_path, write_bilingual, BilingualPairRecord, JsonlWriter, PairMeta};
use uprprc_core::gapa::{align_documents, AlignmentResult, Side};
use uprprc_core::normalize::Document;
use uprprc_core::tables::flatten_recursive;
use uprprc_core::translate::{translate_document, Translator};

use crate::config::AlignSettings;

pub struct PairOutput {
    pub records: Vec<BilingualPairRecord>,
    pub result: AlignmentResult,
}

/// Flattens tables, normalizes, translates the source side and aligns it
/// against English.
pub fn align_texts(
    symbol: &str,
    lang: &str,
    src_raw: &str,
    en_raw: &str,
    settings: &AlignSettings,
    translator: &mut dyn Translator,
) -> Result<PairOutput> {
    let prepare = |raw: &str| -> Result<String> {
        if settings.flatten_tables {
            Ok(flatten_recursive(raw)?)
        } else {
            Ok(raw.to_string())
        }
    };
    let original = Document::from_raw(symbol, lang, &prepare(src_raw)?);
    let english = Document::from_raw(symbol, "en", &prepare(en_raw)?);
    let translated = translate_document(translator, &original).context("translation failed")?;
    let result = align_documents(&translated, &english, settings.drop_threshold)?.with_source_texts(&original)?;
    let records = write_bilingual(
        &result,
        &PairMeta {
            symbol: symbol.to_string(),
            src_lang: lang.to_string(),
        },
    );
    Ok(PairOutput { records, result })
}

pub fn summary_line(symbol: &str, lang: &str, result: &AlignmentResult) -> String {
    let m = result.hit_rates.src.len();
    let n = result.hit_rates.tgt.len();
    format!(
        "{symbol} {lang}->en: {} groups, dropped {}/{} {lang} and {}/{} en paragraphs, mean hit rate {:.3} / {:.3}",
        result.groups.len(),
        result.dropped_src.len(),
        m,
        result.dropped_tgt.len(),
        n,
        result.mean_hit_rate(Side::Source),
        result.mean_hit_rate(Side::Target),
    )
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(
        ".{name}.{}-{}.tmp",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

/// Writes JSONL to a temporary sibling and renames it into place.
pub fn write_jsonl_atomic<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    ensure_parent(path)?;
    let tmp = temp_path(path);
    let write = || -> std::io::Result<()> {
        let mut w = JsonlWriter::create_with(&tmp, is_gzip_path(path))?;
        for r in records {
            w.write(r)?;
        }
        w.finish()
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&tmp);
        return Err(e).with_context(|| format!("cannot write {}", path.display()));
    }
    fs::rename(&tmp, path).with_context(|| format!("cannot move output into {}", path.display()))
}

pub fn write_string_atomic(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    let tmp = temp_path(path);
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move output into {}", path.display()))
}

/// JSONL files directly inside `dir` or given explicitly, in sorted order.
pub fn collect_jsonl(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut stack = vec![input.clone()];
            while let Some(dir) = stack.pop() {
                for entry in fs::read_dir(&dir).with_context(|| format!("cannot list {}", dir.display()))? {
                    let path = entry?.path();
                    if path.is_dir() {
                        stack.push(path);
                    } else if is_jsonl(&path) {
                        out.push(path);
                    }
                }
            }
        } else {
            out.push(input.clone());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn is_jsonl(path: &Path) -> bool {
    let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    !name.starts_with('.') && (name.ends_with(".jsonl") || name.ends_with(".jsonl.gz"))
}
