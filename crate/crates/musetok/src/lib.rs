//! Symbolic-music subword tokenization and its objective evaluation suite.
//!
//! The pipeline turns Standard MIDI Files into musical token sequences (REMI
//! or MIDI-like), maps tokens to unicode symbols so every song is one string,
//! trains BPE or Unigram subword vocabularies over the symbol corpus, and
//! measures both representations: token-efficiency statistics and musical
//! structure metrics (pitch class entropy, groove similarity, and
//! scape-plot structureness indicators). Every stage is lossless and
//! deterministic; the decode path reverses each step exactly.

pub mod bpe;
pub mod error;
#[cfg(feature = "test-oracles")]
pub mod oracles;
pub mod quality;
pub mod smf;
pub mod stats;
pub mod structure;
pub mod symbol;
pub mod synth;
pub mod token;
pub mod unigram;

pub use bpe::{bpe_decode, bpe_encode, train_bpe, BpeModel, PieceId, SubwordSequence};
pub use error::{Error, Result};
pub use quality::{
    groove_similarity, groove_vector, groove_vectors, pitch_class_entropy, pitch_class_histogram,
    GrooveVector, PitchClassHistogram,
};
pub use smf::{
    parse_midi, ticks_to_seconds, write_midi, NoteEvent, Score, TempoChange, TimeSignature,
};
pub use stats::{
    avg_tokens_per_song, expansion_ratio, paired_stats, same_inference_equivalent, stats_table,
    CorpusStats, SubwordEncode, TokenCount,
};
pub use structure::{
    compute_ssm, feature_sequence, fitness_scape_plot, render_scape_plot, scape_plot_csv,
    scape_plot_ppm, structureness_indicator, FeatureMatrix, ScapePlot, SiBand, SimilarityMatrix,
    DEFAULT_FRAME_HOP_S, DEFAULT_MAX_FRAMES,
};
pub use symbol::{
    decode_symbols, encode_corpus, encode_symbols, Alphabet, SymbolString, CODEPOINT_BASE,
};
pub use token::{
    detokenize_midilike, detokenize_remi, quantize, read_corpus, read_token_text,
    tokenize_midilike, tokenize_remi, write_corpus, MusicToken, RecoveryMode, Scheme,
    TokenSequence, TokenizerConfig,
};
pub use unigram::{
    corpus_log_likelihood, em_step, prune_vocabulary, seed_vocabulary, train_unigram,
    unigram_decode, viterbi_encode, UnigramModel, UnigramPiece, UnigramTrainConfig,
};
