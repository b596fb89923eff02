//! Parsed-corpus ingestion: CoNLL-U reading, dependency-path extraction
//! between compound constituents, per-compound path stores, and rewriting
//! of compound bigrams into single tokens.

mod conllu;
mod path;
mod rewrite;
mod store;

pub use conllu::{ConlluReader, CorpusStats, ParsedSentence, Token, MAX_SENTENCE_TOKENS};
pub use path::{
    extract_path, extract_paths, DependencyPath, Direction, ExtractOptions, PathError, PathNode, X_PLACEHOLDER,
    Y_PLACEHOLDER,
};
pub use rewrite::NcRewriter;
pub use store::{build_path_store, NcKey, PathCollector, PathStore, StoreOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("invalid path `{text}`: {reason}")]
    BadPath { text: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;
