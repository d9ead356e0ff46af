//! Musical quality metrics: pitch class entropy and groove pattern
//! similarity.
//!
//! Both metrics follow their direct definitions: entropy over the normalized
//! 12-class onset histogram (percussion excluded), and mean pairwise
//! `1 - normalized Hamming distance` between per-bar onset-position vectors.

use crate::error::{Error, Result};
use crate::smf::Score;

/// Normalized 12-dimensional pitch class histogram (C..B).
#[derive(Debug, Clone, PartialEq)]
pub struct PitchClassHistogram {
    weights: [f64; 12],
}

impl PitchClassHistogram {
    pub fn weights(&self) -> &[f64; 12] {
        &self.weights
    }

    pub fn from_weights(weights: [f64; 12]) -> PitchClassHistogram {
        PitchClassHistogram { weights }
    }
}

/// Onset-count histogram over pitch classes; notes on the percussion channel
/// are excluded.
pub fn pitch_class_histogram(score: &Score) -> Result<PitchClassHistogram> {
    let mut counts = [0u64; 12];
    let mut total = 0u64;
    for note in score.pitched_notes() {
        counts[usize::from(note.pitch % 12)] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::NoPitchedNotes);
    }
    let mut weights = [0.0; 12];
    for (w, c) in weights.iter_mut().zip(counts) {
        *w = c as f64 / total as f64;
    }
    Ok(PitchClassHistogram { weights })
}

/// Shannon entropy (base 2) of the histogram; ranges over [0, log2 12].
pub fn pitch_class_entropy(h: &PitchClassHistogram) -> f64 {
    h.weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.log2())
        .sum()
}

/// Onset-position pattern of one bar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrooveVector {
    pub bits: Vec<bool>,
    pub bar_index: usize,
}

/// Bar spans `(start_tick, length_ticks)` from the time-signature map,
/// defaulting to 4/4, covering tick 0 through `up_to` inclusive.
fn bar_spans(score: &Score, up_to: u64) -> Vec<(u64, u64)> {
    let div = u64::from(score.division);
    let bar_len =
        |num: u8, den: u8| -> u64 { (u64::from(num) * 4 * div / u64::from(den.max(1))).max(1) };
    let mut spans = Vec::new();
    let mut cursor = 0u64;
    let mut sig_iter = score.time_signatures.iter().peekable();
    let mut current = (4u8, 4u8);
    while let Some(sig) = sig_iter.peek() {
        if sig.tick == 0 {
            current = (sig.numerator, sig.denominator);
            sig_iter.next();
        } else {
            break;
        }
    }
    loop {
        let mut len = bar_len(current.0, current.1);
        // A mid-bar signature change truncates the bar and starts a new one.
        if let Some(sig) = sig_iter.peek() {
            if sig.tick > cursor && sig.tick < cursor + len {
                len = sig.tick - cursor;
            }
        }
        spans.push((cursor, len));
        cursor += len;
        while let Some(sig) = sig_iter.peek() {
            if sig.tick <= cursor {
                current = (sig.numerator, sig.denominator);
                sig_iter.next();
            } else {
                break;
            }
        }
        if cursor > up_to {
            break;
        }
    }
    spans
}

fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor().max(0.0) as u64
}

/// Groove vectors for every bar from the first bar through the bar holding
/// the last (grid-snapped) onset. Bit `p` is set when at least one onset
/// snaps into position cell `p`.
pub fn groove_vectors(score: &Score, positions: u32) -> Vec<GrooveVector> {
    if score.notes.is_empty() || positions == 0 {
        return Vec::new();
    }
    let last_onset = score.notes.iter().map(|n| n.onset_tick).max().unwrap();
    let spans = bar_spans(score, last_onset);

    // (bar, cell) per onset, snapping to the nearest gridline; an onset that
    // rounds to the end of its bar belongs to the next bar's downbeat.
    let mut hits: Vec<(usize, usize)> = Vec::with_capacity(score.notes.len());
    let mut max_bar = 0usize;
    for note in &score.notes {
        let bar = match spans.binary_search_by(|&(start, len)| {
            if note.onset_tick < start {
                std::cmp::Ordering::Greater
            } else if note.onset_tick >= start + len {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        }) {
            Ok(i) => i,
            Err(_) => continue, // past the covered range; cannot happen
        };
        let (start, len) = spans[bar];
        let cell_width = len as f64 / f64::from(positions);
        let cell = round_half_up((note.onset_tick - start) as f64 / cell_width) as usize;
        let (bar, cell) = if cell >= positions as usize {
            (bar + 1, 0)
        } else {
            (bar, cell)
        };
        max_bar = max_bar.max(bar);
        hits.push((bar, cell));
    }

    let mut vectors: Vec<GrooveVector> = (0..=max_bar)
        .map(|bar_index| GrooveVector {
            bits: vec![false; positions as usize],
            bar_index,
        })
        .collect();
    for (bar, cell) in hits {
        vectors[bar].bits[cell] = true;
    }
    vectors
}

/// Groove vector of one bar.
pub fn groove_vector(score: &Score, bar_index: usize, positions: u32) -> Result<GrooveVector> {
    let vectors = groove_vectors(score, positions);
    let bars = vectors.len();
    vectors
        .into_iter()
        .nth(bar_index)
        .ok_or(Error::BarOutOfRange {
            bar: bar_index,
            bars,
        })
}

/// Mean over all unordered bar pairs of `1 - hamming / positions`; 1.0 when
/// every bar shares the same onset pattern.
pub fn groove_similarity(score: &Score, positions: u32) -> Result<f64> {
    let vectors = groove_vectors(score, positions);
    if vectors.len() < 2 {
        return Err(Error::TooFewBars(vectors.len()));
    }
    let mut total = 0.0;
    let mut pairs = 0u64;
    for a in 0..vectors.len() {
        for b in a + 1..vectors.len() {
            let hamming = vectors[a]
                .bits
                .iter()
                .zip(&vectors[b].bits)
                .filter(|(x, y)| x != y)
                .count();
            total += 1.0 - hamming as f64 / f64::from(positions);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
