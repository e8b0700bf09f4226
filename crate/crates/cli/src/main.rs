mod batch;
mod config;
mod pipeline;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use uprprc_core::corpus_io::{
    aggregate_blocks, open_reader, BilingualPairRecord, BlockRecord, CorpusStats, FileLevelRecord, JsonlReader,
    LanguageTexts,
};
use uprprc_core::eval::{
    confusion_counts, document_accuracy, ground_truth_from, sample_pairs, EvalError, LabeledPair, SampleSpec,
};
use uprprc_core::tables::{detect_tables_with_diagnostics, flatten_recursive};
use uprprc_core::translate::{read_frame, write_frame, DictionaryTranslator, TranslationRequest, Translator};

use config::{usage, AlignSettings, FileConfig, UsageError};

#[derive(Parser)]
#[command(name = "uprprc", version, about = "Paragraph alignment pipeline for multilingual parallel corpora")]
struct Cli {
    /// TOML file with defaults for drop_threshold, translator, cache_dir,
    /// jobs, seed and flatten_tables
    #[arg(long, global = true, env = "UPRPRC_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct AlignOpts {
    /// Paragraphs with a hit rate below this are dropped before grouping
    #[arg(long, env = "UPRPRC_DROP_THRESHOLD")]
    drop_threshold: Option<f64>,
    /// identity, dict:<tsv file> or external:<command>
    #[arg(long, env = "UPRPRC_TRANSLATOR")]
    translator: Option<String>,
    /// Translation cache for the external translator
    #[arg(long, env = "UPRPRC_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Do not flatten plain-text tables before aligning
    #[arg(long)]
    no_flatten: bool,
}

impl AlignOpts {
    fn resolve(self, file: &FileConfig) -> Result<AlignSettings> {
        AlignSettings::resolve(self.drop_threshold, self.translator, self.cache_dir, self.no_flatten, file)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RecordKind {
    FileLevel,
    Bilingual,
    Blocks,
}

#[derive(Subcommand)]
enum Command {
    /// Flatten plain-text tables in a file, or in every file of a directory
    Flatten { input: PathBuf, output: PathBuf },
    /// Align one document against its English version
    Align {
        src: PathBuf,
        en: PathBuf,
        /// Language code of SRC
        #[arg(long)]
        lang: String,
        /// Record id; defaults to the file stem of SRC
        #[arg(long)]
        symbol: Option<String>,
        #[command(flatten)]
        opts: AlignOpts,
        /// Bilingual JSONL output (`.gz` compresses); stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align every <corpus>/<symbol>/<lang>.txt against en.txt
    BatchAlign {
        corpus: PathBuf,
        /// Comma-separated source languages
        #[arg(long, value_delimiter = ',', default_value = "ar,zh,fr,ru,es,de")]
        langs: Vec<String>,
        /// Worker threads; defaults to the number of CPUs
        #[arg(long, env = "UPRPRC_JOBS")]
        jobs: Option<usize>,
        #[command(flatten)]
        opts: AlignOpts,
        /// Output root; gets <symbol>/<lang>2en.jsonl
        #[arg(long)]
        out: PathBuf,
    },
    /// Build all-language blocks from batch-align outputs
    Blocks {
        /// A batch-align output root
        bilingual_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-language file and token counts
    Stats {
        /// JSONL files or directories of them
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "file-level")]
        kind: RecordKind,
        /// Also write the counts as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the evaluation sample from bilingual records, per language
    Sample {
        /// Bilingual JSONL files or directories of them
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "UPRPRC_SEED")]
        seed: Option<u64>,
        /// Only sample this source language
        #[arg(long)]
        lang: Option<String>,
        #[arg(long, default_value_t = 32)]
        min_chars: usize,
        #[arg(long, default_value_t = 5)]
        min_words: usize,
        #[arg(long, default_value_t = 100)]
        n_longest: usize,
        #[arg(long, default_value_t = 100)]
        n_shortest: usize,
        #[arg(long, default_value_t = 1800)]
        n_uniform: usize,
    },
    /// Document accuracy per judge model, and confusion counts against
    /// human labels
    Score {
        /// JSONL of {symbol, pair_id, model, verdict}
        labels: PathBuf,
        /// Human labels in the same format, for FP/FN counts
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Only score this model
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the external translator protocol from a TSV dictionary
    #[command(hide = true)]
    ServeDict { dictionary: PathBuf },
}

/// Whether every unit of work succeeded.
#[derive(Debug, PartialEq, Eq)]
enum Status {
    Ok,
    Partial,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Flatten { input, output } => flatten(&input, &output),
        Command::Align {
            src,
            en,
            lang,
            symbol,
            opts,
            out,
        } => align(&src, &en, &lang, symbol, opts.resolve(&file)?, out.as_deref()),
        Command::BatchAlign {
            corpus,
            langs,
            jobs,
            opts,
            out,
        } => {
            let settings = opts.resolve(&file)?;
            let jobs = jobs.or(file.jobs).unwrap_or_else(rayon::current_num_threads);
            if jobs == 0 {
                return Err(usage("--jobs must be at least 1"));
            }
            batch_align(&corpus, &langs, jobs, &settings, &out)
        }
        Command::Blocks { bilingual_dir, out } => blocks(&bilingual_dir, &out),
        Command::Stats { inputs, kind, out } => stats(&inputs, kind, out.as_deref()),
        Command::Sample {
            inputs,
            out,
            seed,
            lang,
            min_chars,
            min_words,
            n_longest,
            n_shortest,
            n_uniform,
        } => {
            let spec = SampleSpec {
                min_chars,
                min_words,
                n_longest,
                n_shortest,
                n_uniform,
                seed: seed.or(file.seed).unwrap_or(0),
            };
            sample(&inputs, lang.as_deref(), &spec, &out)
        }
        Command::Score {
            labels,
            ground_truth,
            model,
            out,
        } => score(&labels, ground_truth.as_deref(), model.as_deref(), out.as_deref()),
        Command::ServeDict { dictionary } => serve_dict(&dictionary),
    }
}

fn read_all<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = open_reader(path).with_context(|| format!("cannot open {}", path.display()))?;
    JsonlReader::new(reader)
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("in {}", path.display()))
}

fn flatten_one(input: &Path, output: &Path) -> Result<usize> {
    let text = fs::read_to_string(input).with_context(|| format!("cannot read {}", input.display()))?;
    let lines: Vec<&str> = text.split('\n').collect();
    let detection = detect_tables_with_diagnostics(&lines);
    for d in &detection.diagnostics {
        eprintln!("{}:{}: {}", input.display(), d.line + 1, d.message);
    }
    let flat = flatten_recursive(&text).with_context(|| format!("in {}", input.display()))?;
    pipeline::write_string_atomic(output, &flat)?;
    Ok(detection.blocks.len())
}

fn flatten(input: &Path, output: &Path) -> Result<Status> {
    if !input.is_dir() {
        let tables = flatten_one(input, output)?;
        eprintln!("{}: {tables} tables flattened", input.display());
        return Ok(Status::Ok);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("cannot list {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut status = Status::Ok;
    for f in files {
        let target = output.join(f.file_name().unwrap());
        match flatten_one(&f, &target) {
            Ok(tables) => eprintln!("{}: {tables} tables flattened", f.display()),
            Err(e) => {
                eprintln!("{}: {e:#}", f.display());
                status = Status::Partial;
            }
        }
    }
    Ok(status)
}

fn align(
    src: &Path,
    en: &Path,
    lang: &str,
    symbol: Option<String>,
    settings: AlignSettings,
    out: Option<&Path>,
) -> Result<Status> {
    let symbol = symbol.unwrap_or_else(|| src.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    let src_text = fs::read_to_string(src).with_context(|| format!("cannot read {}", src.display()))?;
    let en_text = fs::read_to_string(en).with_context(|| format!("cannot read {}", en.display()))?;
    let mut translator = settings.build_translator()?;
    let output = pipeline::align_texts(&symbol, lang, &src_text, &en_text, &settings, translator.as_mut())?;
    for d in &output.result.diagnostics {
        log::warn!("{d}");
    }
    let summary = pipeline::summary_line(&symbol, lang, &output.result);
    match out {
        Some(path) => {
            pipeline::write_jsonl_atomic(path, &output.records)?;
            println!("{summary}");
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            for r in &output.records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            eprintln!("{summary}");
        }
    }
    Ok(Status::Ok)
}

fn batch_align(corpus: &Path, langs: &[String], jobs: usize, settings: &AlignSettings, out: &Path) -> Result<Status> {
    if !corpus.is_dir() {
        return Err(usage(format!("{} is not a directory", corpus.display())));
    }
    // Fail early on a translator that cannot even be configured.
    if !matches!(settings.translator, config::TranslatorSpec::External(_)) {
        settings.build_translator()?;
    }
    let work = batch::discover(corpus, langs, out)?;
    let results = batch::run(&work, settings, jobs)?;
    let (mut aligned, mut skipped, mut failed) = (0, 0, 0);
    for (job, status) in work.iter().zip(&results) {
        match status {
            batch::JobStatus::Aligned { groups } => {
                aligned += 1;
                log::info!("{} {}: {groups} groups", job.symbol, job.lang);
            }
            batch::JobStatus::Skipped => skipped += 1,
            batch::JobStatus::Failed(why) => {
                failed += 1;
                eprintln!("{} {}: {why}", job.symbol, job.lang);
            }
        }
    }
    println!("{} pairs: {aligned} aligned, {skipped} up to date, {failed} failed", work.len());
    Ok(if failed > 0 { Status::Partial } else { Status::Ok })
}

/// `<lang>` from a `<lang>2en.jsonl[.gz]` file name.
fn bilingual_lang(path: &Path) -> Option<String> {
    let name = path.file_name()?.to_string_lossy();
    let stem = name.strip_suffix(".jsonl.gz").or_else(|| name.strip_suffix(".jsonl"))?;
    stem.strip_suffix("2en").filter(|l| !l.is_empty()).map(str::to_string)
}

fn blocks(dir: &Path, out: &Path) -> Result<Status> {
    let mut symbols: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    symbols.sort();
    let mut all: Vec<BlockRecord> = Vec::new();
    let mut status = Status::Ok;
    for sym_dir in symbols {
        let symbol = sym_dir.file_name().unwrap().to_string_lossy().into_owned();
        let mut per_lang: BTreeMap<String, Vec<BilingualPairRecord>> = BTreeMap::new();
        let mut files: Vec<PathBuf> = fs::read_dir(&sym_dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        files.sort();
        for f in files {
            let Some(lang) = bilingual_lang(&f) else { continue };
            match read_all::<BilingualPairRecord>(&f) {
                Ok(recs) => {
                    per_lang.insert(lang, recs);
                }
                Err(e) => {
                    eprintln!("{e:#}");
                    status = Status::Partial;
                }
            }
        }
        if per_lang.is_empty() {
            continue;
        }
        let agg = aggregate_blocks(&symbol, &per_lang);
        for d in &agg.diagnostics {
            log::warn!("{d}");
        }
        all.extend(agg.blocks);
    }
    pipeline::write_jsonl_atomic(out, &all)?;
    println!("{} blocks written to {}", all.len(), out.display());
    Ok(status)
}

fn accumulate<T: serde::de::DeserializeOwned + LanguageTexts>(path: &Path, stats: &mut CorpusStats) -> Result<()> {
    let reader = open_reader(path).with_context(|| format!("cannot open {}", path.display()))?;
    for rec in JsonlReader::<_, T>::new(reader) {
        stats.add(&rec.with_context(|| format!("in {}", path.display()))?);
    }
    Ok(())
}

fn stats(inputs: &[PathBuf], kind: RecordKind, out: Option<&Path>) -> Result<Status> {
    let mut stats = CorpusStats::new();
    for path in pipeline::collect_jsonl(inputs)? {
        match kind {
            RecordKind::FileLevel => accumulate::<FileLevelRecord>(&path, &mut stats)?,
            RecordKind::Bilingual => accumulate::<BilingualPairRecord>(&path, &mut stats)?,
            RecordKind::Blocks => accumulate::<BlockRecord>(&path, &mut stats)?,
        }
    }
    println!("{:<6}{:>12}{:>16}", "lang", "files", "tokens");
    for (lang, s) in &stats.languages {
        println!("{lang:<6}{:>12}{:>16}", s.files, s.tokens);
    }
    println!("{} records", stats.records);
    if let Some(path) = out {
        pipeline::write_string_atomic(path, &(serde_json::to_string_pretty(&stats)? + "\n"))?;
    }
    Ok(Status::Ok)
}

fn sample(inputs: &[PathBuf], only: Option<&str>, spec: &SampleSpec, out: &Path) -> Result<Status> {
    let mut by_lang: BTreeMap<String, Vec<BilingualPairRecord>> = BTreeMap::new();
    for path in pipeline::collect_jsonl(inputs)? {
        for rec in read_all::<BilingualPairRecord>(&path)? {
            if only.is_none_or(|l| l == rec.src_lang) {
                by_lang.entry(rec.src_lang.clone()).or_default().push(rec);
            }
        }
    }
    let mut sampled = Vec::new();
    let mut status = Status::Ok;
    println!("{:<6}{:>10}{:>10}{:>10}", "lang", "pairs", "kept", "sampled");
    for (lang, pool) in &by_lang {
        let kept = pool.iter().filter(|p| spec.keeps(&p.en_text)).count();
        match sample_pairs(pool, spec) {
            Ok(s) => {
                println!("{lang:<6}{:>10}{kept:>10}{:>10}", pool.len(), s.len());
                sampled.extend(s);
            }
            Err(e @ EvalError::PoolTooSmall { .. }) => {
                println!("{lang:<6}{:>10}{kept:>10}{:>10}", pool.len(), "-");
                eprintln!("{lang}: {e}");
                status = Status::Partial;
            }
            Err(e) => return Err(e.into()),
        }
    }
    pipeline::write_jsonl_atomic(out, &sampled)?;
    Ok(status)
}

#[derive(Serialize)]
struct ScoreRecord {
    model: String,
    documents: usize,
    accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    false_positives: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    false_negatives: Option<usize>,
}

fn score(labels: &Path, ground_truth: Option<&Path>, model: Option<&str>, out: Option<&Path>) -> Result<Status> {
    let labels: Vec<LabeledPair> = read_all(labels)?;
    let truth = ground_truth
        .map(|p| read_all::<LabeledPair>(p).map(|l| ground_truth_from(&l)))
        .transpose()?;
    let mut models: Vec<String> = match model {
        Some(m) => vec![m.to_string()],
        None => labels.iter().map(|l| l.model.clone()).collect(),
    };
    models.sort();
    models.dedup();
    let mut records = Vec::new();
    for m in models {
        let mine: Vec<LabeledPair> = labels.iter().filter(|l| l.model == m).cloned().collect();
        let accuracy = document_accuracy(&labels, &m)?;
        let mut docs: Vec<&str> = mine.iter().map(|l| l.symbol.as_str()).collect();
        docs.sort_unstable();
        docs.dedup();
        let counts = truth.as_ref().map(|t| confusion_counts(&mine, t)).transpose()?;
        records.push(ScoreRecord {
            documents: docs.len(),
            accuracy,
            false_positives: counts.map(|c| c.0),
            false_negatives: counts.map(|c| c.1),
            model: m,
        });
    }
    println!("{:<20}{:>10}{:>10}{:>6}{:>6}", "model", "documents", "accuracy", "FP", "FN");
    for r in &records {
        let show = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        println!(
            "{:<20}{:>10}{:>10.4}{:>6}{:>6}",
            r.model,
            r.documents,
            r.accuracy,
            show(r.false_positives),
            show(r.false_negatives)
        );
    }
    if let Some(path) = out {
        pipeline::write_jsonl_atomic(path, &records)?;
    }
    Ok(Status::Ok)
}

fn serve_dict(dictionary: &Path) -> Result<Status> {
    let mut translator = DictionaryTranslator::from_tsv(dictionary)
        .map_err(|e| usage(format!("cannot load dictionary {}: {e}", dictionary.display())))?;
    let mut input = BufReader::new(io::stdin().lock());
    let mut output = io::stdout().lock();
    while let Some(frame) = read_frame(&mut input)? {
        let req: TranslationRequest = serde_json::from_slice(&frame).context("malformed request")?;
        let resp = translator.translate(&req)?;
        write_frame(&mut output, &serde_json::to_vec(&resp)?)?;
        output.flush()?;
    }
    Ok(Status::Ok)
}
