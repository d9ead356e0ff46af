//! Unigram language-model subword vocabulary.
//!
//! Training starts from a large seed vocabulary of frequent substrings,
//! alternates EM probability estimation (forward-backward over each song's
//! segmentation lattice) with likelihood-loss pruning, and stops at the
//! target size. Segmentation is Viterbi; single symbols are always kept so
//! every string over the base alphabet stays segmentable.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bpe::{PieceId, SubwordSequence};
use crate::error::{Error, Result};
use crate::symbol::{Alphabet, SymbolString};

/// Expected-count floor that keeps log-probabilities finite for pieces the
/// EM posterior never touches.
const COUNT_FLOOR: f64 = 1e-300;

/// One vocabulary entry: a surface form over base symbols and its
/// log-probability under the unigram model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnigramPiece {
    pub surface: String,
    pub log_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnigramTrainConfig {
    pub max_piece_len: usize,
    /// Seed vocabulary budget as a multiple of the target size.
    pub seed_size_factor: usize,
    pub em_iters_per_round: usize,
    pub shrink_factor: f64,
}

impl Default for UnigramTrainConfig {
    fn default() -> Self {
        UnigramTrainConfig {
            max_piece_len: 8,
            seed_size_factor: 8,
            em_iters_per_round: 2,
            shrink_factor: 0.75,
        }
    }
}

/// Trained unigram vocabulary. Pieces are stored singles-first (alphabet
/// order), then multi-symbol pieces sorted by surface.
#[derive(Debug, Clone)]
pub struct UnigramModel {
    pieces: Vec<UnigramPiece>,
    alphabet: Alphabet,
    target_vocab: usize,
    config: Option<UnigramTrainConfig>,
    index: HashMap<Box<[char]>, usize>,
    max_len: usize,
}

#[derive(Serialize, Deserialize)]
struct UnigramModelFile {
    pieces: Vec<UnigramPiece>,
    base_alphabet: Alphabet,
    target_vocab: usize,
    config: Option<UnigramTrainConfig>,
}

impl UnigramModel {
    /// Build a model from explicit pieces. Every alphabet symbol must appear
    /// as a single-symbol piece; probabilities are renormalized to sum to 1.
    pub fn new(
        alphabet: Alphabet,
        pieces: Vec<UnigramPiece>,
        target_vocab: usize,
    ) -> Result<UnigramModel> {
        let mut singles: Vec<Option<f64>> = vec![None; alphabet.len()];
        let mut multis: Vec<(String, f64)> = Vec::new();
        for p in pieces {
            let chars: Vec<char> = p.surface.chars().collect();
            match chars.as_slice() {
                [c] => {
                    let idx = alphabet
                        .index_of_symbol(*c)
                        .ok_or(Error::UnknownSymbol(*c as u32))?;
                    singles[idx] = Some(p.log_prob);
                }
                [] => {
                    return Err(Error::ModelFormat("empty piece surface".into()));
                }
                _ => multis.push((p.surface, p.log_prob)),
            }
        }
        for (i, s) in singles.iter().enumerate() {
            if s.is_none() {
                return Err(Error::ModelFormat(format!(
                    "single-symbol piece missing for alphabet entry {i}"
                )));
            }
        }
        multis.sort_by(|a, b| a.0.cmp(&b.0));

        let mut ordered: Vec<UnigramPiece> = singles
            .into_iter()
            .enumerate()
            .map(|(i, lp)| UnigramPiece {
                surface: alphabet.symbol(i).expect("alphabet index").to_string(),
                log_prob: lp.unwrap(),
            })
            .collect();
        ordered.extend(
            multis
                .into_iter()
                .map(|(surface, log_prob)| UnigramPiece { surface, log_prob }),
        );

        let weights: Vec<f64> = ordered.iter().map(|p| p.log_prob.exp()).collect();
        let normalized = normalize(&weights);
        for (p, lp) in ordered.iter_mut().zip(normalized) {
            p.log_prob = lp;
        }
        Ok(UnigramModel::assemble(
            alphabet,
            ordered,
            target_vocab,
            None,
        ))
    }

    fn assemble(
        alphabet: Alphabet,
        pieces: Vec<UnigramPiece>,
        target_vocab: usize,
        config: Option<UnigramTrainConfig>,
    ) -> UnigramModel {
        let mut index = HashMap::with_capacity(pieces.len());
        let mut max_len = 1;
        for (i, p) in pieces.iter().enumerate() {
            let chars: Box<[char]> = p.surface.chars().collect();
            max_len = max_len.max(chars.len());
            index.insert(chars, i);
        }
        UnigramModel {
            pieces,
            alphabet,
            target_vocab,
            config,
            index,
            max_len,
        }
    }

    pub fn pieces(&self) -> &[UnigramPiece] {
        &self.pieces
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn target_vocab(&self) -> usize {
        self.target_vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.pieces.len()
    }

    pub fn surface(&self, id: PieceId) -> Option<&str> {
        self.pieces.get(id as usize).map(|p| p.surface.as_str())
    }

    pub fn piece_id(&self, surface: &str) -> Option<PieceId> {
        let chars: Vec<char> = surface.chars().collect();
        self.index.get(chars.as_slice()).map(|&i| i as PieceId)
    }

    /// Sum of piece probabilities; 1 within 1e-9 for any trained model.
    pub fn total_probability(&self) -> f64 {
        self.pieces.iter().map(|p| p.log_prob.exp()).sum()
    }

    pub fn to_json(&self) -> String {
        let file = UnigramModelFile {
            pieces: self.pieces.clone(),
            base_alphabet: self.alphabet.clone(),
            target_vocab: self.target_vocab,
            config: self.config,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    /// Load a model preserving piece order and log-probability bits exactly,
    /// so piece ids and encodings match the model that was saved.
    pub fn from_json(json: &str) -> Result<UnigramModel> {
        let file: UnigramModelFile =
            serde_json::from_str(json).map_err(|e| Error::ModelFormat(e.to_string()))?;
        check_totality(&file.base_alphabet, &file.pieces)?;
        let total: f64 = file.pieces.iter().map(|p| p.log_prob.exp()).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::ModelFormat(format!(
                "piece probabilities sum to {total}, expected 1"
            )));
        }
        Ok(UnigramModel::assemble(
            file.base_alphabet,
            file.pieces,
            file.target_vocab,
            file.config,
        ))
    }
}

fn normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| (w / total).ln()).collect()
}

fn check_totality(alphabet: &Alphabet, pieces: &[UnigramPiece]) -> Result<()> {
    let mut seen = vec![false; alphabet.len()];
    for p in pieces {
        let mut chars = p.surface.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if let Some(idx) = alphabet.index_of_symbol(c) {
                seen[idx] = true;
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(Error::ModelFormat(format!(
            "single-symbol piece missing for alphabet entry {i}"
        ))),
        None => Ok(()),
    }
}

fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Segmentation lattice of one song: for each start position, the pieces
/// whose surface matches there.
struct Lattice {
    n: usize,
    by_start: Vec<Vec<(u32, PieceId)>>, // (length, piece)
}

fn build_lattice(symbols: &[char], model: &UnigramModel) -> Result<Lattice> {
    let n = symbols.len();
    let mut by_start = Vec::with_capacity(n);
    for i in 0..n {
        if model.alphabet.index_of_symbol(symbols[i]).is_none() {
            return Err(Error::UnknownSymbol(symbols[i] as u32));
        }
        let mut edges = Vec::new();
        for len in 1..=model.max_len.min(n - i) {
            if let Some(&piece) = model.index.get(&symbols[i..i + len]) {
                edges.push((len as u32, piece as PieceId));
            }
        }
        by_start.push(edges);
    }
    Ok(Lattice { n, by_start })
}

fn forward(lat: &Lattice, lps: &[f64]) -> Vec<f64> {
    let mut alpha = vec![f64::NEG_INFINITY; lat.n + 1];
    alpha[0] = 0.0;
    for i in 0..lat.n {
        if alpha[i] == f64::NEG_INFINITY {
            continue;
        }
        for &(len, piece) in &lat.by_start[i] {
            let end = i + len as usize;
            alpha[end] = lse2(alpha[end], alpha[i] + lps[piece as usize]);
        }
    }
    alpha
}

fn backward(lat: &Lattice, lps: &[f64]) -> Vec<f64> {
    let mut beta = vec![f64::NEG_INFINITY; lat.n + 1];
    beta[lat.n] = 0.0;
    for i in (0..lat.n).rev() {
        let mut b = f64::NEG_INFINITY;
        for &(len, piece) in &lat.by_start[i] {
            b = lse2(b, lps[piece as usize] + beta[i + len as usize]);
        }
        beta[i] = b;
    }
    beta
}

/// Viterbi log-likelihood with an optional piece removed and a per-piece
/// score adjustment (the renormalization constant when pruning).
fn viterbi_ll(lat: &Lattice, lps: &[f64], skip: Option<usize>, adjust: f64) -> f64 {
    let mut best = vec![f64::NEG_INFINITY; lat.n + 1];
    best[lat.n] = 0.0;
    for i in (0..lat.n).rev() {
        let mut b = f64::NEG_INFINITY;
        for &(len, piece) in &lat.by_start[i] {
            if skip == Some(piece as usize) {
                continue;
            }
            let v = lps[piece as usize] + adjust + best[i + len as usize];
            if v > b {
                b = v;
            }
        }
        best[i] = b;
    }
    best[0]
}

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

/// Seed vocabulary: all substrings of length <= `max_piece_len` occurring at
/// least twice, ranked by count x length and kept within `seed_size`, plus
/// every single symbol. Initial probabilities follow relative counts.
pub fn seed_vocabulary(
    corpus: &[SymbolString],
    alphabet: &Alphabet,
    max_piece_len: usize,
    seed_size: usize,
) -> Result<UnigramModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: HashMap<Box<[char]>, u64> = HashMap::new();
    for song in corpus {
        let n = song.symbols.len();
        for start in 0..n {
            if alphabet.index_of_symbol(song.symbols[start]).is_none() {
                return Err(Error::UnknownSymbol(song.symbols[start] as u32));
            }
            for len in 1..=max_piece_len.min(n - start) {
                *counts
                    .entry(song.symbols[start..start + len].into())
                    .or_insert(0) += 1;
            }
        }
    }

    // Singles are unconditional; a symbol absent from the corpus still gets
    // a count of one so its probability stays positive.
    let mut pieces: Vec<(String, f64)> = (0..alphabet.len())
        .map(|i| {
            let c = alphabet.symbol(i).expect("alphabet index");
            let count = counts.get([c].as_slice()).copied().unwrap_or(0).max(1);
            (c.to_string(), count as f64)
        })
        .collect();

    let multi_budget = seed_size.saturating_sub(pieces.len());
    let mut candidates: Vec<(&Box<[char]>, u64)> = counts
        .iter()
        .filter(|(s, &c)| s.len() >= 2 && c >= 2)
        .map(|(s, &c)| (s, c))
        .collect();
    // Rank by count x length, breaking ties by surface for determinism.
    candidates.sort_by(|a, b| {
        let score_a = a.1 * a.0.len() as u64;
        let score_b = b.1 * b.0.len() as u64;
        score_b.cmp(&score_a).then_with(|| a.0.cmp(b.0))
    });
    candidates.truncate(multi_budget);
    for (surface, count) in candidates {
        pieces.push((surface.iter().collect(), count as f64));
    }

    let weights: Vec<f64> = pieces.iter().map(|(_, c)| *c).collect();
    let lps = normalize(&weights);
    let pieces = pieces
        .into_iter()
        .zip(lps)
        .map(|((surface, _), log_prob)| UnigramPiece { surface, log_prob })
        .collect();
    UnigramModel::new(alphabet.clone(), pieces, alphabet.len())
}

// ---------------------------------------------------------------------------
// EM
// ---------------------------------------------------------------------------

/// Marginal corpus log-likelihood under the model.
pub fn corpus_log_likelihood(corpus: &[SymbolString], model: &UnigramModel) -> Result<f64> {
    let lps: Vec<f64> = model.pieces.iter().map(|p| p.log_prob).collect();
    let mut total = 0.0;
    for song in corpus {
        let lat = build_lattice(&song.symbols, model)?;
        let alpha = forward(&lat, &lps);
        let log_z = alpha[lat.n];
        if !log_z.is_finite() {
            return Err(Error::NumericalUnderflow(song.song_id.clone()));
        }
        total += log_z;
    }
    Ok(total)
}

/// One EM iteration: expected piece counts from forward-backward posteriors,
/// then probabilities re-estimated from the expectations. Corpus likelihood
/// never decreases.
pub fn em_step(corpus: &[SymbolString], model: &UnigramModel) -> Result<UnigramModel> {
    let lps: Vec<f64> = model.pieces.iter().map(|p| p.log_prob).collect();
    let n_pieces = model.pieces.len();

    let per_song: Vec<Result<Vec<f64>>> = corpus
        .par_iter()
        .map(|song| {
            let lat = build_lattice(&song.symbols, model)?;
            let alpha = forward(&lat, &lps);
            let log_z = alpha[lat.n];
            if !log_z.is_finite() {
                return Err(Error::NumericalUnderflow(song.song_id.clone()));
            }
            let beta = backward(&lat, &lps);
            let mut expected = vec![0.0f64; n_pieces];
            for (i, edges) in lat.by_start.iter().enumerate() {
                if alpha[i] == f64::NEG_INFINITY {
                    continue;
                }
                for &(len, piece) in edges {
                    let end = i + len as usize;
                    let post = (alpha[i] + lps[piece as usize] + beta[end] - log_z).exp();
                    expected[piece as usize] += post;
                }
            }
            Ok(expected)
        })
        .collect();

    // Merge in song order so results do not depend on scheduling.
    let mut expected = vec![0.0f64; n_pieces];
    for song_counts in per_song {
        let song_counts = song_counts?;
        for (total, c) in expected.iter_mut().zip(song_counts) {
            *total += c;
        }
    }
    for e in &mut expected {
        if *e < COUNT_FLOOR {
            *e = COUNT_FLOOR;
        }
    }

    let lps = normalize(&expected);
    let pieces = model
        .pieces
        .iter()
        .zip(lps)
        .map(|(p, log_prob)| UnigramPiece {
            surface: p.surface.clone(),
            log_prob,
        })
        .collect();
    Ok(UnigramModel::assemble(
        model.alphabet.clone(),
        pieces,
        model.target_vocab,
        model.config,
    ))
}

// ---------------------------------------------------------------------------
// Pruning
// ---------------------------------------------------------------------------

/// Drop the least harmful multi-symbol pieces so `ceil(shrink_factor * n)`
/// pieces remain. Harm is the exact Viterbi corpus-likelihood loss of
/// removing the piece with the remainder renormalized; single symbols are
/// never dropped.
pub fn prune_vocabulary(
    corpus: &[SymbolString],
    model: &UnigramModel,
    shrink_factor: f64,
) -> Result<UnigramModel> {
    let keep = (shrink_factor * model.pieces.len() as f64).ceil() as usize;
    prune_to(corpus, model, keep)
}

fn prune_to(corpus: &[SymbolString], model: &UnigramModel, keep: usize) -> Result<UnigramModel> {
    let n = model.pieces.len();
    let keep = keep.min(n).max(model.alphabet.len());
    if keep >= n {
        return Ok(model.clone());
    }
    let lps: Vec<f64> = model.pieces.iter().map(|p| p.log_prob).collect();
    let lattices: Vec<Lattice> = corpus
        .iter()
        .map(|song| build_lattice(&song.symbols, model))
        .collect::<Result<_>>()?;

    let base_ll: f64 = lattices
        .iter()
        .map(|lat| viterbi_ll(lat, &lps, None, 0.0))
        .sum();

    let multi_ids: Vec<usize> = (model.alphabet.len()..n).collect();
    let probs: Vec<f64> = lps.iter().map(|lp| lp.exp()).collect();
    let losses: Vec<f64> = multi_ids
        .par_iter()
        .map(|&id| {
            // Survivors are rescaled to sum to 1. Summing them directly
            // avoids the cancellation in 1 - p when p is close to 1.
            let survivor_mass: f64 = probs
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != id)
                .map(|(_, p)| p)
                .sum();
            if survivor_mass <= 0.0 {
                return f64::INFINITY; // nothing left to carry the corpus
            }
            let adjust = -survivor_mass.ln();
            let minus_ll: f64 = lattices
                .iter()
                .map(|lat| viterbi_ll(lat, &lps, Some(id), adjust))
                .sum();
            base_ll - minus_ll
        })
        .collect();

    let mut ranked: Vec<(usize, f64)> = multi_ids.iter().copied().zip(losses).collect();
    ranked.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap()
            .then_with(|| model.pieces[a.0].surface.cmp(&model.pieces[b.0].surface))
    });

    let n_drop = n - keep;
    let dropped: std::collections::HashSet<usize> =
        ranked.iter().take(n_drop).map(|(id, _)| *id).collect();
    let survivors: Vec<UnigramPiece> = model
        .pieces
        .iter()
        .enumerate()
        .filter(|(id, _)| !dropped.contains(id))
        .map(|(_, p)| p.clone())
        .collect();

    let weights: Vec<f64> = survivors.iter().map(|p| p.log_prob.exp()).collect();
    let lps = normalize(&weights);
    let pieces = survivors
        .into_iter()
        .zip(lps)
        .map(|(p, log_prob)| UnigramPiece {
            surface: p.surface,
            log_prob,
        })
        .collect();
    Ok(UnigramModel::assemble(
        model.alphabet.clone(),
        pieces,
        model.target_vocab,
        model.config,
    ))
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Full training loop: seed, then alternate EM and pruning until the
/// vocabulary fits the target, with a final EM polish.
pub fn train_unigram(
    corpus: &[SymbolString],
    alphabet: &Alphabet,
    target_vocab: usize,
    cfg: &UnigramTrainConfig,
) -> Result<UnigramModel> {
    if target_vocab < alphabet.len() {
        return Err(Error::TargetBelowBase {
            target: target_vocab,
            base: alphabet.len(),
        });
    }
    let seed_size = cfg.seed_size_factor.saturating_mul(target_vocab);
    let mut model = seed_vocabulary(corpus, alphabet, cfg.max_piece_len, seed_size)?;
    model.target_vocab = target_vocab;
    model.config = Some(*cfg);

    while model.pieces.len() > target_vocab {
        for _ in 0..cfg.em_iters_per_round {
            model = em_step(corpus, &model)?;
        }
        let n = model.pieces.len();
        // The shrink ceiling stalls for tiny vocabularies (ceil(0.75 * 3) = 3);
        // force progress toward the target.
        let shrunk = ((cfg.shrink_factor * n as f64).ceil() as usize).min(n - 1);
        let keep = shrunk.max(target_vocab);
        let pruned = prune_to(corpus, &model, keep)?;
        if pruned.pieces.len() == model.pieces.len() {
            break; // nothing left to drop (singles only)
        }
        model = pruned;
    }
    for _ in 0..cfg.em_iters_per_round {
        model = em_step(corpus, &model)?;
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

/// Maximum-likelihood segmentation. Ties prefer fewer pieces, then a longer
/// first piece.
pub fn viterbi_encode(s: &SymbolString, model: &UnigramModel) -> Result<SubwordSequence> {
    // (log-prob, piece count, chosen edge) per suffix position.
    type Suffix = (f64, u32, Option<(u32, PieceId)>);
    let lat = build_lattice(&s.symbols, model)?;
    let n = lat.n;
    let mut best: Vec<Suffix> = vec![(f64::NEG_INFINITY, 0, None); n + 1];
    best[n] = (0.0, 0, None);
    for i in (0..n).rev() {
        for &(len, piece) in &lat.by_start[i] {
            let (next_lp, next_count, _) = best[i + len as usize];
            if next_lp == f64::NEG_INFINITY {
                continue;
            }
            let cand = (
                next_lp + model.pieces[piece as usize].log_prob,
                next_count + 1,
                len,
            );
            let cur = &best[i];
            let take = cand.0 > cur.0
                || (cand.0 == cur.0
                    && (cur.2.is_none()
                        || cand.1 < cur.1
                        || (cand.1 == cur.1 && len > cur.2.unwrap().0)));
            if take {
                best[i] = (cand.0, cand.1, Some((len, piece)));
            }
        }
    }
    if n > 0 && best[0].0 == f64::NEG_INFINITY {
        return Err(Error::NumericalUnderflow(s.song_id.clone()));
    }

    let mut pieces = Vec::new();
    let mut i = 0;
    while i < n {
        let (len, piece) = best[i].2.expect("totality guarantees a path");
        pieces.push(piece);
        i += len as usize;
    }
    Ok(SubwordSequence {
        pieces,
        song_id: s.song_id.clone(),
    })
}

/// Concatenate piece surfaces; exact inverse of any encoding by this model.
pub fn unigram_decode(seq: &SubwordSequence, model: &UnigramModel) -> Result<SymbolString> {
    let mut symbols = Vec::new();
    for &id in &seq.pieces {
        let surface = model.surface(id).ok_or(Error::UnknownPiece(id as usize))?;
        symbols.extend(surface.chars());
    }
    Ok(SymbolString {
        symbols,
        song_id: seq.song_id.clone(),
    })
}
