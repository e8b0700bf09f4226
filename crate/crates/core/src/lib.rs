//! Paragraph alignment for multilingual parallel corpora.
//!
//! The pipeline for one document pair is: flatten plain-text tables
//! ([`tables`]), normalize and split into paragraphs ([`normalize`]),
//! translate the source side into English ([`translate`]), run a sparse LCS
//! over the token streams ([`lcs`]) and group paragraphs through the link
//! graph ([`gapa`]). [`corpus_io`] reads and writes the resulting records and
//! [`eval`] samples and scores them.

pub mod corpus_io;
pub mod eval;
pub mod gapa;
pub mod lcs;
pub mod normalize;
pub mod tables;
pub mod translate;
pub mod union_find;

pub use corpus_io::{
    aggregate_blocks, corpus_stats, write_bilingual, BilingualPairRecord, BlockRecord, CorpusStats,
    FileLevelRecord, PairMeta, RecordError, LANGUAGES,
};
pub use eval::{
    confusion_counts, document_accuracy, sample_pairs, EvalError, LabeledPair, SampleSpec, SampledPair,
    Stratum,
};
pub use gapa::{align_documents, AlignError, AlignmentGroup, AlignmentResult, DEFAULT_DROP_THRESHOLD};
pub use lcs::{lcs_dp_oracle, lcs_hunt_szymanski, LcsError, LcsOutcome, LcsStats, MatchPair};
pub use normalize::{Document, Paragraph, Token};
pub use tables::{detect_tables, flatten_recursive, flatten_table, TableBlock, TableError, TableKind};
pub use translate::{
    translate_document, DictionaryTranslator, ExternalConfig, ExternalProcessTranslator, IdentityTranslator,
    TranslateError, TranslationRequest, TranslationResponse, Translator,
};
