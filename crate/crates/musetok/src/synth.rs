//! Seeded synthetic corpora for tests, benchmarks, and demos.
//!
//! Everything here is deterministic in the seed: the same seed produces the
//! same scores on every platform and thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::smf::{NoteEvent, Score, TimeSignature};
use crate::token::TokenizerConfig;

const DIVISION: u16 = 480;

/// A random already-quantized score: onsets on the position grid, durations
/// on the duration-bin table, velocities at bin centers. Voices occupy
/// disjoint pitch ranges so no pitch ever overlaps itself, which keeps
/// SMF round-trips unambiguous.
pub fn random_quantized_score(seed: u64, cfg: &TokenizerConfig) -> Score {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = (u64::from(DIVISION) * 4) / u64::from(cfg.positions_per_bar);
    let bin_ticks = cfg.duration_bin_ticks(DIVISION);

    let mut score = Score::new(DIVISION);
    score.time_signatures = vec![TimeSignature {
        tick: 0,
        numerator: 4,
        denominator: 4,
    }];
    let n_voices = rng.random_range(1..=3usize);
    let ranges = [(60u8, 84u8), (44, 59), (85, 100)];
    for &(lo, hi) in ranges.iter().take(n_voices) {
        let n_notes = rng.random_range(4..=24);
        let mut pos = rng.random_range(0..4u64);
        for _ in 0..n_notes {
            let bin = rng.random_range(0..16.min(bin_ticks.len()));
            let duration = bin_ticks[bin];
            let pitch = rng.random_range(lo..=hi);
            let vel_bin = rng.random_range(0..cfg.velocity_bins);
            score.notes.push(NoteEvent {
                pitch,
                velocity: cfg.velocity_center(vel_bin),
                onset_tick: pos * grid,
                duration_tick: duration,
                channel: 0,
                track: 0,
            });
            // Step far enough that this voice never overlaps itself.
            let min_step = duration.div_ceil(grid).max(1);
            pos += min_step + rng.random_range(0..3u64);
        }
    }
    score.normalize();
    score
}

/// An unquantized random score (free onsets and durations) for parser and
/// metric fuzzing. Same non-overlap guarantee per pitch range.
pub fn random_score(seed: u64) -> Score {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut score = Score::new(DIVISION);
    let n_voices = rng.random_range(1..=3usize);
    let ranges = [(60u8, 84u8), (40, 59), (85, 108)];
    for &(lo, hi) in ranges.iter().take(n_voices) {
        let n_notes = rng.random_range(3..=40);
        let mut tick = rng.random_range(0..960u64);
        for _ in 0..n_notes {
            let duration = rng.random_range(30..1200u64);
            score.notes.push(NoteEvent {
                pitch: rng.random_range(lo..=hi),
                velocity: rng.random_range(1..=127),
                onset_tick: tick,
                duration_tick: duration,
                channel: 0,
                track: 0,
            });
            tick += duration + rng.random_range(0..480u64);
        }
    }
    score.normalize();
    score
}

/// Melody built from a handful of short motifs arranged with heavy exact
/// repetition (verse/chorus-like), the repetition profile subword
/// vocabularies feed on.
pub fn folk_song(seed: u64) -> Score {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = TokenizerConfig::default();
    let grid = (u64::from(DIVISION) * 4) / u64::from(cfg.positions_per_bar);

    // Pentatonic-ish scale rooted in a random key keeps melodies plausible.
    let root = rng.random_range(48u8..=60);
    let scale = [0u8, 2, 4, 7, 9, 12, 14, 16];

    // Each motif is one bar: up to four (cell, pitch, duration-cells) notes.
    let n_motifs = rng.random_range(2..=3usize);
    let motifs: Vec<Vec<(u64, u8, u64)>> = (0..n_motifs)
        .map(|_| {
            let n_notes = rng.random_range(3..=5);
            let mut cells: Vec<u64> = (0..16u64).collect();
            let mut motif = Vec::new();
            for _ in 0..n_notes {
                let at = rng.random_range(0..cells.len());
                let cell = cells.remove(at);
                let pitch = root + scale[rng.random_range(0..scale.len())];
                let dur_cells = rng.random_range(1..=4u64);
                motif.push((cell, pitch, dur_cells));
            }
            motif.sort();
            motif
        })
        .collect();

    // AABA-like arrangement repeated a few times.
    let section: Vec<usize> = vec![0, 0, 1 % n_motifs, 0];
    let repeats = rng.random_range(2..=4usize);
    let mut arrangement = Vec::new();
    for _ in 0..repeats {
        arrangement.extend_from_slice(&section);
        if n_motifs > 2 {
            arrangement.push(2);
        }
    }

    let velocity = cfg.velocity_center(rng.random_range(12..=20));
    let mut score = Score::new(DIVISION);
    score.time_signatures = vec![TimeSignature {
        tick: 0,
        numerator: 4,
        denominator: 4,
    }];
    for (bar, &motif_idx) in arrangement.iter().enumerate() {
        let bar_start = bar as u64 * u64::from(DIVISION) * 4;
        for &(cell, pitch, dur_cells) in &motifs[motif_idx] {
            score.notes.push(NoteEvent {
                pitch,
                velocity,
                onset_tick: bar_start + cell * grid,
                duration_tick: dur_cells * grid,
                channel: 0,
                track: 0,
            });
        }
    }
    score.normalize();
    score
}

/// A corpus of seeded folk-like melodies.
pub fn folk_corpus(seed: u64, n_songs: usize) -> Vec<Score> {
    (0..n_songs)
        .map(|i| folk_song(seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9)))
        .collect()
}

/// A motif of `motif_beats` quarter notes with distinct pitches, repeated
/// exactly `repeats` times. At the default tempo one beat is half a second.
pub fn repeated_motif_score(seed: u64, repeats: usize, motif_beats: usize) -> Score {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pitches: Vec<u8> = (60..60 + motif_beats as u8).collect();
    for i in (1..pitches.len()).rev() {
        let j = rng.random_range(0..=i);
        pitches.swap(i, j);
    }
    let mut score = Score::new(DIVISION);
    for rep in 0..repeats {
        for (beat, &pitch) in pitches.iter().enumerate() {
            let onset = (rep * motif_beats + beat) as u64 * u64::from(DIVISION);
            score.notes.push(NoteEvent {
                pitch,
                velocity: 80,
                onset_tick: onset,
                duration_tick: u64::from(DIVISION),
                channel: 0,
                track: 0,
            });
        }
    }
    score.normalize();
    score
}

/// Seeded Fisher-Yates permutation of `0..n`.
pub fn seeded_permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::quantize;

    #[test]
    fn quantized_scores_are_fixed_points_of_quantize() {
        let cfg = TokenizerConfig::default();
        for seed in 0..20 {
            let s = random_quantized_score(seed, &cfg);
            let q = quantize(&s, &cfg).unwrap();
            assert_eq!(s, q, "seed {seed}");
        }
    }

    #[test]
    fn same_seed_same_score() {
        let cfg = TokenizerConfig::default();
        assert_eq!(
            random_quantized_score(7, &cfg),
            random_quantized_score(7, &cfg)
        );
        assert_eq!(folk_song(7), folk_song(7));
    }

    #[test]
    fn no_same_pitch_overlap() {
        let cfg = TokenizerConfig::default();
        for seed in 0..20 {
            for score in [random_quantized_score(seed, &cfg), random_score(seed)] {
                let mut by_pitch: std::collections::HashMap<u8, Vec<(u64, u64)>> =
                    std::collections::HashMap::new();
                for n in &score.notes {
                    by_pitch
                        .entry(n.pitch)
                        .or_default()
                        .push((n.onset_tick, n.onset_tick + n.duration_tick));
                }
                for spans in by_pitch.values_mut() {
                    spans.sort();
                    for w in spans.windows(2) {
                        assert!(w[0].1 <= w[1].0, "seed {seed}: overlapping same pitch");
                    }
                }
            }
        }
    }

    #[test]
    fn folk_songs_have_repetition() {
        let corpus = folk_corpus(1, 8);
        for s in &corpus {
            assert!(s.notes.len() >= 12);
        }
    }

    #[test]
    fn motif_score_spans_expected_beats() {
        let s = repeated_motif_score(3, 4, 10);
        assert_eq!(s.notes.len(), 40);
        assert_eq!(s.end_tick(), 40 * u64::from(DIVISION));
    }
}
