//! Token-efficiency statistics: tokens per song and the expansion ratio
//! between subword pieces and the base musical tokens they decode to.

use serde::Serialize;

use crate::bpe::{self, BpeModel, SubwordSequence};
use crate::error::{Error, Result};
use crate::symbol::SymbolString;
use crate::token::TokenSequence;
use crate::unigram::{self, UnigramModel};

/// Per-representation corpus statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_songs: usize,
    pub total_base_tokens: u64,
    pub total_encoded_pieces: u64,
    pub avg_base_per_song: f64,
    pub avg_pieces_per_song: f64,
    /// Base tokens represented per encoded piece; 1.0 for the identity
    /// encoding.
    pub expansion_ratio: f64,
}

/// Anything that has a per-song token count.
pub trait TokenCount {
    fn token_count(&self) -> usize;
}

impl TokenCount for TokenSequence {
    fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

impl TokenCount for SubwordSequence {
    fn token_count(&self) -> usize {
        self.pieces.len()
    }
}

impl TokenCount for SymbolString {
    fn token_count(&self) -> usize {
        self.symbols.len()
    }
}

/// A subword model that can encode symbol strings into pieces.
pub trait SubwordEncode {
    fn encode_pieces(&self, s: &SymbolString) -> Result<SubwordSequence>;
    fn decoded_len(&self, seq: &SubwordSequence) -> Result<usize>;
}

impl SubwordEncode for BpeModel {
    fn encode_pieces(&self, s: &SymbolString) -> Result<SubwordSequence> {
        bpe::bpe_encode(s, self)
    }

    fn decoded_len(&self, seq: &SubwordSequence) -> Result<usize> {
        Ok(bpe::bpe_decode(seq, self)?.len())
    }
}

impl SubwordEncode for UnigramModel {
    fn encode_pieces(&self, s: &SymbolString) -> Result<SubwordSequence> {
        unigram::viterbi_encode(s, self)
    }

    fn decoded_len(&self, seq: &SubwordSequence) -> Result<usize> {
        Ok(unigram::unigram_decode(seq, self)?.len())
    }
}

fn stats_from_lengths(base: &[usize], encoded: &[usize]) -> Result<CorpusStats> {
    if base.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if base.len() != encoded.len() {
        return Err(Error::InvalidConfig(format!(
            "paired corpora differ in song count: {} vs {}",
            base.len(),
            encoded.len()
        )));
    }
    let n = base.len();
    let total_base: u64 = base.iter().map(|&l| l as u64).sum();
    let total_enc: u64 = encoded.iter().map(|&l| l as u64).sum();
    Ok(CorpusStats {
        n_songs: n,
        total_base_tokens: total_base,
        total_encoded_pieces: total_enc,
        avg_base_per_song: total_base as f64 / n as f64,
        avg_pieces_per_song: total_enc as f64 / n as f64,
        expansion_ratio: if total_enc == 0 {
            1.0
        } else {
            total_base as f64 / total_enc as f64
        },
    })
}

/// Average tokens per song for one representation (base and encoded counts
/// coincide; the expansion ratio is 1).
pub fn avg_tokens_per_song<T: TokenCount>(corpus: &[T]) -> Result<CorpusStats> {
    let lengths: Vec<usize> = corpus.iter().map(TokenCount::token_count).collect();
    stats_from_lengths(&lengths, &lengths)
}

/// Statistics for a base corpus against its subword encoding, song by song.
pub fn paired_stats<B: TokenCount, E: TokenCount>(
    base: &[B],
    encoded: &[E],
) -> Result<CorpusStats> {
    let b: Vec<usize> = base.iter().map(TokenCount::token_count).collect();
    let e: Vec<usize> = encoded.iter().map(TokenCount::token_count).collect();
    stats_from_lengths(&b, &e)
}

/// Base symbols represented per encoded piece over a corpus: a model that
/// emits K pieces yields on average `ratio * K` base musical tokens.
pub fn expansion_ratio<M: SubwordEncode>(model: &M, corpus: &[SymbolString]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut symbols = 0u64;
    let mut pieces = 0u64;
    for song in corpus {
        let enc = model.encode_pieces(song)?;
        symbols += song.len() as u64;
        pieces += enc.pieces.len() as u64;
    }
    Ok(if pieces == 0 {
        1.0
    } else {
        symbols as f64 / pieces as f64
    })
}

/// Base-token budget equivalent to generating `n_pieces` subword pieces.
pub fn same_inference_equivalent<M: SubwordEncode>(
    n_pieces: u64,
    model: &M,
    corpus: &[SymbolString],
) -> Result<u64> {
    let ratio = expansion_ratio(model, corpus)?;
    Ok((n_pieces as f64 * ratio).round() as u64)
}

/// Plain-text table of per-representation statistics.
pub fn stats_table(rows: &[(&str, &CorpusStats)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>7} {:>14} {:>14} {:>10}\n",
        "representation", "songs", "total_tokens", "avg_per_song", "expansion"
    ));
    for (name, s) in rows {
        out.push_str(&format!(
            "{:<16} {:>7} {:>14} {:>14.2} {:>10.3}\n",
            name, s.n_songs, s.total_encoded_pieces, s.avg_pieces_per_song, s.expansion_ratio
        ));
    }
    out
}
