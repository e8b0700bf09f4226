//! `batch-align`: every `<corpus>/<symbol>/<lang>.txt` against the
//! `en.txt` next to it, on a local worker pool.
//!
//! Outputs go to `<out>/<symbol>/<lang>2en.jsonl` with a
//! `<lang>2en.jsonl.sha256` sidecar holding the hash of everything that
//! determined the output, followed by the hash of the output itself. A rerun
//! skips pairs whose sidecar still matches both, so an interrupted run can
//! simply be restarted.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::AlignSettings;
use crate::pipeline::{align_texts, write_jsonl_atomic, write_string_atomic};

#[derive(Debug, Clone)]
pub struct Job {
    pub symbol: String,
    pub lang: String,
    pub src: PathBuf,
    pub en: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JobStatus {
    Aligned { groups: usize },
    Skipped,
    Failed(String),
}

pub fn discover(corpus: &Path, langs: &[String], out: &Path) -> Result<Vec<Job>> {
    let mut symbols: Vec<PathBuf> = fs::read_dir(corpus)
        .with_context(|| format!("cannot list {}", corpus.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    symbols.sort();
    let mut jobs = Vec::new();
    for dir in symbols {
        let symbol = dir.file_name().unwrap().to_string_lossy().into_owned();
        let en = dir.join("en.txt");
        if !en.is_file() {
            log::warn!("{symbol}: no en.txt, skipped");
            continue;
        }
        for lang in langs.iter().filter(|l| *l != "en") {
            let src = dir.join(format!("{lang}.txt"));
            if src.is_file() {
                jobs.push(Job {
                    out: out.join(&symbol).join(format!("{lang}2en.jsonl")),
                    symbol: symbol.clone(),
                    lang: lang.clone(),
                    src,
                    en: en.clone(),
                });
            }
        }
    }
    Ok(jobs)
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap().to_os_string();
    name.push(".sha256");
    out.with_file_name(name)
}

/// Hash of the inputs and every setting that affects the output.
pub fn input_hash(job: &Job, src: &[u8], en: &[u8], settings: &AlignSettings) -> String {
    let mut h = Sha256::new();
    let mut field = |bytes: &[u8]| {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    field(env!("CARGO_PKG_VERSION").as_bytes());
    field(job.symbol.as_bytes());
    field(job.lang.as_bytes());
    field(&settings.drop_threshold.to_le_bytes());
    field(settings.translator.to_string().as_bytes());
    field(&[settings.flatten_tables as u8]);
    field(src);
    field(en);
    hex::encode(h.finalize())
}

fn up_to_date(out: &Path, stamp: &Path, hash: &str) -> bool {
    let Ok(stamp) = fs::read_to_string(stamp) else {
        return false;
    };
    let mut fields = stamp.split_whitespace();
    if fields.next() != Some(hash) {
        return false;
    }
    match (fields.next(), fs::read(out)) {
        (Some(expected), Ok(bytes)) => hex::encode(Sha256::digest(&bytes)) == expected,
        _ => false,
    }
}

fn run_job(job: &Job, settings: &AlignSettings, translator: &mut Option<Box<dyn uprprc_core::Translator>>) -> Result<JobStatus> {
    let src = fs::read(&job.src).with_context(|| format!("cannot read {}", job.src.display()))?;
    let en = fs::read(&job.en).with_context(|| format!("cannot read {}", job.en.display()))?;
    let hash = input_hash(job, &src, &en, settings);
    let stamp = sidecar(&job.out);
    if up_to_date(&job.out, &stamp, &hash) {
        return Ok(JobStatus::Skipped);
    }
    let src = String::from_utf8(src).with_context(|| format!("{} is not UTF-8", job.src.display()))?;
    let en = String::from_utf8(en).with_context(|| format!("{} is not UTF-8", job.en.display()))?;
    if translator.is_none() {
        *translator = Some(settings.build_translator()?);
    }
    let out = align_texts(&job.symbol, &job.lang, &src, &en, settings, translator.as_deref_mut().unwrap())?;
    for d in &out.result.diagnostics {
        log::warn!("{d}");
    }
    write_jsonl_atomic(&job.out, &out.records)?;
    let written = fs::read(&job.out).with_context(|| format!("cannot read back {}", job.out.display()))?;
    write_string_atomic(&stamp, &format!("{hash} {}\n", hex::encode(Sha256::digest(&written))))?;
    Ok(JobStatus::Aligned {
        groups: out.records.len(),
    })
}

/// Runs all jobs on `workers` threads. Each worker keeps its own translator.
pub fn run(jobs: &[Job], settings: &AlignSettings, workers: usize) -> Result<Vec<JobStatus>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("cannot start worker pool")?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map_init(
                || None,
                |translator, job| match run_job(job, settings, translator) {
                    Ok(status) => status,
                    Err(e) => {
                        // A broken translator process is not reused.
                        *translator = None;
                        JobStatus::Failed(format!("{e:#}"))
                    }
                },
            )
            .collect()
    }))
}
