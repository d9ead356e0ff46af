//! Byte-pair encoding over symbol strings.
//!
//! Training greedily merges the most frequent adjacent piece pair, recounting
//! after every merge. Pairs are never counted across song boundaries, a merge
//! needs at least two occurrences, and ties break deterministically: highest
//! count, then earliest first occurrence in corpus scan order, then
//! lexicographic surface order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbol::{Alphabet, SymbolString};

/// Piece index into a model's vocabulary. Ids `0..alphabet.len()` are the
/// single symbols in alphabet order; merged pieces follow in training order.
pub type PieceId = u32;

/// An encoded song: ordered piece ids whose surfaces concatenate back to the
/// source symbol string.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordSequence {
    pub pieces: Vec<PieceId>,
    pub song_id: String,
}

/// Trained BPE vocabulary: a base alphabet plus an ordered merge list.
#[derive(Debug, Clone)]
pub struct BpeModel {
    alphabet: Alphabet,
    merges: Vec<(PieceId, PieceId)>,
    surfaces: Vec<String>,
    surface_ids: HashMap<String, PieceId>,
    target_vocab: usize,
}

#[derive(Serialize, Deserialize)]
struct BpeModelFile {
    base_alphabet: Alphabet,
    merges: Vec<(String, String)>,
    target_vocab: usize,
}

impl BpeModel {
    fn with_merges(
        alphabet: Alphabet,
        merges: Vec<(PieceId, PieceId)>,
        target_vocab: usize,
    ) -> BpeModel {
        let mut surfaces: Vec<String> = (0..alphabet.len())
            .map(|i| alphabet.symbol(i).expect("alphabet index").to_string())
            .collect();
        for &(l, r) in &merges {
            let merged = format!("{}{}", surfaces[l as usize], surfaces[r as usize]);
            surfaces.push(merged);
        }
        let surface_ids = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as PieceId))
            .collect();
        BpeModel {
            alphabet,
            merges,
            surfaces,
            surface_ids,
            target_vocab,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Total vocabulary size: base symbols plus merges.
    pub fn vocab_size(&self) -> usize {
        self.surfaces.len()
    }

    pub fn merges(&self) -> &[(PieceId, PieceId)] {
        &self.merges
    }

    pub fn target_vocab(&self) -> usize {
        self.target_vocab
    }

    /// Surface form (symbol string) of a piece.
    pub fn surface(&self, id: PieceId) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn piece_id(&self, surface: &str) -> Option<PieceId> {
        self.surface_ids.get(surface).copied()
    }

    pub fn to_json(&self) -> String {
        let file = BpeModelFile {
            base_alphabet: self.alphabet.clone(),
            merges: self
                .merges
                .iter()
                .map(|&(l, r)| {
                    (
                        self.surfaces[l as usize].clone(),
                        self.surfaces[r as usize].clone(),
                    )
                })
                .collect(),
            target_vocab: self.target_vocab,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    /// Load a model, re-deriving piece ids from the ordered merge list. Each
    /// merge may reference only the alphabet or earlier merges.
    pub fn from_json(json: &str) -> Result<BpeModel> {
        let file: BpeModelFile =
            serde_json::from_str(json).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let base = file.base_alphabet.len();
        let mut surfaces: Vec<String> = (0..base)
            .map(|i| {
                file.base_alphabet
                    .symbol(i)
                    .expect("alphabet index")
                    .to_string()
            })
            .collect();
        let mut ids: HashMap<String, PieceId> = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as PieceId))
            .collect();
        let mut merges = Vec::with_capacity(file.merges.len());
        for (i, (l, r)) in file.merges.iter().enumerate() {
            let lid = *ids
                .get(l)
                .ok_or_else(|| Error::ModelFormat(format!("merge {i}: unknown left piece")))?;
            let rid = *ids
                .get(r)
                .ok_or_else(|| Error::ModelFormat(format!("merge {i}: unknown right piece")))?;
            let merged = format!("{l}{r}");
            let id = surfaces.len() as PieceId;
            ids.entry(merged.clone()).or_insert(id);
            surfaces.push(merged);
            merges.push((lid, rid));
        }
        Ok(BpeModel::with_merges(
            file.base_alphabet,
            merges,
            file.target_vocab,
        ))
    }
}

fn symbols_to_ids(s: &SymbolString, alphabet: &Alphabet) -> Result<Vec<PieceId>> {
    s.symbols
        .iter()
        .map(|&c| {
            alphabet
                .index_of_symbol(c)
                .map(|i| i as PieceId)
                .ok_or(Error::UnknownSymbol(c as u32))
        })
        .collect()
}

/// Replace every adjacent `(left, right)` with `merged`, scanning left to
/// right so overlapping occurrences consume greedily.
fn apply_merge(song: &mut Vec<PieceId>, left: PieceId, right: PieceId, merged: PieceId) {
    let mut write = 0;
    let mut read = 0;
    while read < song.len() {
        if read + 1 < song.len() && song[read] == left && song[read + 1] == right {
            song[write] = merged;
            read += 2;
        } else {
            song[write] = song[read];
            read += 1;
        }
        write += 1;
    }
    song.truncate(write);
}

/// Train a BPE model by greedy pair merging until the vocabulary reaches
/// `target_vocab` or no pair occurs at least twice.
pub fn train_bpe(
    corpus: &[SymbolString],
    alphabet: &Alphabet,
    target_vocab: usize,
) -> Result<BpeModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if target_vocab < alphabet.len() {
        return Err(Error::TargetBelowBase {
            target: target_vocab,
            base: alphabet.len(),
        });
    }

    let mut songs: Vec<Vec<PieceId>> = corpus
        .iter()
        .map(|s| symbols_to_ids(s, alphabet))
        .collect::<Result<_>>()?;
    let mut surfaces: Vec<String> = (0..alphabet.len())
        .map(|i| alphabet.symbol(i).expect("alphabet index").to_string())
        .collect();
    let mut merges: Vec<(PieceId, PieceId)> = Vec::new();

    while surfaces.len() < target_vocab {
        // Full recount of adjacent pairs, tracking each pair's first
        // occurrence position for the tie-break.
        let mut counts: HashMap<(PieceId, PieceId), (u64, (usize, usize))> = HashMap::new();
        for (song_idx, song) in songs.iter().enumerate() {
            for pos in 0..song.len().saturating_sub(1) {
                let pair = (song[pos], song[pos + 1]);
                counts
                    .entry(pair)
                    .and_modify(|(c, _)| *c += 1)
                    .or_insert((1, (song_idx, pos)));
            }
        }

        let best = counts.iter().fold(None, |best, (&pair, &(count, first))| {
            let candidate = (count, first, pair);
            match best {
                None => Some(candidate),
                Some((bc, bf, bp)) => {
                    let better = count > bc
                        || (count == bc && first < bf)
                        || (count == bc
                            && first == bf
                            && (
                                surfaces[pair.0 as usize].as_str(),
                                surfaces[pair.1 as usize].as_str(),
                            ) < (
                                surfaces[bp.0 as usize].as_str(),
                                surfaces[bp.1 as usize].as_str(),
                            ));
                    if better {
                        Some(candidate)
                    } else {
                        Some((bc, bf, bp))
                    }
                }
            }
        });

        let Some((count, _, (left, right))) = best else {
            break;
        };
        if count < 2 {
            break;
        }

        let merged = surfaces.len() as PieceId;
        surfaces.push(format!(
            "{}{}",
            surfaces[left as usize], surfaces[right as usize]
        ));
        merges.push((left, right));
        for song in &mut songs {
            apply_merge(song, left, right, merged);
        }
    }

    Ok(BpeModel::with_merges(
        alphabet.clone(),
        merges,
        target_vocab,
    ))
}

/// Encode a symbol string by replaying the model's merges in training order.
pub fn bpe_encode(s: &SymbolString, model: &BpeModel) -> Result<SubwordSequence> {
    let mut pieces = symbols_to_ids(s, model.alphabet())?;
    let base = model.alphabet().len() as PieceId;
    for (i, &(left, right)) in model.merges.iter().enumerate() {
        apply_merge(&mut pieces, left, right, base + i as PieceId);
    }
    Ok(SubwordSequence {
        pieces,
        song_id: s.song_id.clone(),
    })
}

/// Concatenate piece surfaces back into the original symbol string.
pub fn bpe_decode(seq: &SubwordSequence, model: &BpeModel) -> Result<SymbolString> {
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
