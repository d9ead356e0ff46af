//! Bijective mapping from musical tokens to single unicode symbols.
//!
//! Distinct token texts are collected, sorted, and assigned consecutive
//! codepoints starting at U+4E00, so a whole song becomes one string with one
//! character per token. The assigned block contains no whitespace or control
//! characters, which keeps one-song-per-line corpus files intact.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::token::{MusicToken, Scheme, TokenSequence};

/// First codepoint handed out.
pub const CODEPOINT_BASE: u32 = 0x4E00;
/// Maximum number of distinct base tokens.
pub const MAX_ALPHABET: usize = 20_000;

/// Ordered token-text -> codepoint table, sorted by token text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    entries: Vec<String>,
    scheme_tag: String,
}

impl Alphabet {
    /// Collect the distinct token texts of a corpus and assign codepoints
    /// `U+4E00 + i` in lexicographic text order. Deterministic under any
    /// permutation of the corpus.
    pub fn build(corpus: &[TokenSequence]) -> Result<Alphabet> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut texts: Vec<String> = corpus
            .iter()
            .flat_map(|song| song.tokens.iter().map(|t| t.to_string()))
            .collect();
        texts.sort();
        texts.dedup();
        if texts.len() > MAX_ALPHABET {
            return Err(Error::AlphabetOverflow(texts.len()));
        }
        let scheme_tag = corpus[0].scheme.to_string();
        Ok(Alphabet {
            entries: texts,
            scheme_tag,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scheme_tag(&self) -> &str {
        &self.scheme_tag
    }

    /// Token text for a symbol index.
    pub fn token_text(&self, index: usize) -> Option<&str> {
        self.entries.get(index).map(String::as_str)
    }

    pub fn symbol(&self, index: usize) -> Option<char> {
        if index < self.entries.len() {
            char::from_u32(CODEPOINT_BASE + index as u32)
        } else {
            None
        }
    }

    pub fn index_of_token(&self, text: &str) -> Option<usize> {
        self.entries.binary_search_by(|e| e.as_str().cmp(text)).ok()
    }

    pub fn index_of_symbol(&self, symbol: char) -> Option<usize> {
        let cp = symbol as u32;
        if cp < CODEPOINT_BASE {
            return None;
        }
        let idx = (cp - CODEPOINT_BASE) as usize;
        (idx < self.entries.len()).then_some(idx)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    /// Alphabet file: one `token_text<TAB>U+XXXX` line per entry, sorted.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (i, text) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{text}\tU+{:04X}", CODEPOINT_BASE + i as u32);
        }
        out
    }

    pub fn from_file_string(text: &str) -> Result<Alphabet> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (token, cp) = line.split_once('\t').ok_or_else(|| {
                Error::ModelFormat(format!("alphabet line {} has no tab", lineno + 1))
            })?;
            let expected = format!("U+{:04X}", CODEPOINT_BASE + entries.len() as u32);
            if cp != expected {
                return Err(Error::ModelFormat(format!(
                    "alphabet line {}: codepoint {} out of order (expected {})",
                    lineno + 1,
                    cp,
                    expected
                )));
            }
            entries.push(token.to_string());
        }
        if entries.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if !entries.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::ModelFormat("alphabet entries not sorted".into()));
        }
        Ok(Alphabet {
            entries,
            scheme_tag: String::new(),
        })
    }
}

/// One song rendered as unicode symbols, one codepoint per base token.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolString {
    pub symbols: Vec<char>,
    pub song_id: String,
}

impl SymbolString {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn as_string(&self) -> String {
        self.symbols.iter().collect()
    }
}

/// Encode one song's tokens as symbols. Fails with the song id and token
/// index when a token is missing from the alphabet.
pub fn encode_symbols(
    seq: &TokenSequence,
    alphabet: &Alphabet,
    song_id: &str,
) -> Result<SymbolString> {
    let mut symbols = Vec::with_capacity(seq.tokens.len());
    for (index, token) in seq.tokens.iter().enumerate() {
        let text = token.to_string();
        let idx = alphabet
            .index_of_token(&text)
            .ok_or_else(|| Error::UnknownToken {
                token: text.clone(),
                song_id: song_id.to_string(),
                index,
            })?;
        symbols.push(alphabet.symbol(idx).expect("index within alphabet"));
    }
    Ok(SymbolString {
        symbols,
        song_id: song_id.to_string(),
    })
}

/// Decode a symbol string back to the token sequence it came from.
pub fn decode_symbols(s: &SymbolString, alphabet: &Alphabet) -> Result<TokenSequence> {
    let scheme = match alphabet.scheme_tag() {
        "remi" => Scheme::Remi,
        "midilike" => Scheme::MidiLike,
        _ => Scheme::ExternalText,
    };
    let mut seq = TokenSequence::new(scheme);
    for &symbol in &s.symbols {
        let idx = alphabet
            .index_of_symbol(symbol)
            .ok_or(Error::UnknownSymbol(symbol as u32))?;
        let text = alphabet.token_text(idx).expect("index within alphabet");
        let token = match scheme {
            Scheme::ExternalText => MusicToken::External(text.to_string()),
            _ => MusicToken::parse_musical(text)
                .unwrap_or_else(|| MusicToken::External(text.to_string())),
        };
        seq.tokens.push(token);
    }
    Ok(seq)
}

/// Encode a whole corpus, assigning `song-NNNNNN` ids in input order unless
/// ids are supplied.
pub fn encode_corpus(
    corpus: &[TokenSequence],
    alphabet: &Alphabet,
    ids: Option<&[String]>,
) -> Result<Vec<SymbolString>> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, seq)| {
            let id = match ids {
                Some(ids) => ids[i].clone(),
                None => format!("song-{i:06}"),
            };
            encode_symbols(seq, alphabet, &id)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn external(words: &[&str]) -> TokenSequence {
        TokenSequence {
            scheme: Scheme::ExternalText,
            tokens: words
                .iter()
                .map(|w| MusicToken::External((*w).to_string()))
                .collect(),
        }
    }

    #[test]
    fn build_sorts_then_assigns() {
        let corpus = vec![external(&["b", "a"])];
        let a = Alphabet::build(&corpus).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.token_text(0), Some("a"));
        assert_eq!(a.symbol(0), Some('\u{4E00}'));
        assert_eq!(a.token_text(1), Some("b"));
        assert_eq!(a.symbol(1), Some('\u{4E01}'));
    }

    #[test]
    fn build_is_order_invariant() {
        let c1 = vec![external(&["x", "y"]), external(&["z"])];
        let c2 = vec![external(&["z"]), external(&["x", "y"])];
        assert_eq!(Alphabet::build(&c1).unwrap(), Alphabet::build(&c2).unwrap());
    }

    #[test]
    fn single_token_alphabet() {
        let a = Alphabet::build(&[external(&["only"])]).unwrap();
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn encode_decode_examples() {
        let corpus = vec![external(&["b", "a"])];
        let a = Alphabet::build(&corpus).unwrap();
        let s = encode_symbols(&external(&["a", "b", "a"]), &a, "s1").unwrap();
        assert_eq!(s.symbols, vec!['\u{4E00}', '\u{4E01}', '\u{4E00}']);
        let back = decode_symbols(&s, &a).unwrap();
        assert_eq!(back, external(&["a", "b", "a"]));

        let empty = encode_symbols(&external(&[]), &a, "s2").unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn decode_single_symbol() {
        let corpus = vec![external(&["b", "a"])];
        let a = Alphabet::build(&corpus).unwrap();
        let s = SymbolString {
            symbols: vec!['\u{4E01}'],
            song_id: "x".into(),
        };
        assert_eq!(decode_symbols(&s, &a).unwrap(), external(&["b"]));
    }

    #[test]
    fn unknown_token_carries_location() {
        let a = Alphabet::build(&[external(&["a"])]).unwrap();
        let err = encode_symbols(&external(&["a", "zz"]), &a, "song-7").unwrap_err();
        match err {
            Error::UnknownToken {
                token,
                song_id,
                index,
            } => {
                assert_eq!(token, "zz");
                assert_eq!(song_id, "song-7");
                assert_eq!(index, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_symbol_rejected() {
        let a = Alphabet::build(&[external(&["a"])]).unwrap();
        let s = SymbolString {
            symbols: vec!['\u{4E05}'],
            song_id: "x".into(),
        };
        assert!(matches!(
            decode_symbols(&s, &a),
            Err(Error::UnknownSymbol(_))
        ));
    }

    #[test]
    fn symbols_contain_no_whitespace_or_controls() {
        for i in 0..MAX_ALPHABET as u32 {
            let c = char::from_u32(CODEPOINT_BASE + i).expect("valid codepoint");
            assert!(!c.is_whitespace() && !c.is_control());
        }
    }

    #[test]
    fn full_bin_remi_alphabet_magnitude() {
        // A corpus exercising every default bin: one Bar marker, 16
        // positions, 128 pitches, 32 velocity bins, 64 duration bins.
        let mut tokens = vec![MusicToken::Bar];
        tokens.extend((1..=16).map(MusicToken::Position));
        tokens.extend((0..=127).map(MusicToken::Pitch));
        tokens.extend((0..32).map(MusicToken::Velocity));
        tokens.extend((1..=64).map(MusicToken::Duration));
        let corpus = vec![TokenSequence {
            scheme: Scheme::Remi,
            tokens,
        }];
        let a = Alphabet::build(&corpus).unwrap();
        assert_eq!(a.len(), 241);
    }

    #[test]
    fn alphabet_file_round_trip() {
        let corpus = vec![external(&["Pitch_60", "Bar", "Velocity_16"])];
        let a = Alphabet::build(&corpus).unwrap();
        let text = a.to_file_string();
        assert!(text.starts_with("Bar\tU+4E00\n"));
        let back = Alphabet::from_file_string(&text).unwrap();
        assert_eq!(back.entries, a.entries);
    }
}
