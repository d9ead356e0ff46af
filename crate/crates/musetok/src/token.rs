//! Musical token schemes: REMI, MIDI-like, and external token text.
//!
//! REMI renders a quantized score bar by bar (`Bar`, `Position_p`, then
//! `Pitch`/`Velocity`/`Duration` per note). MIDI-like renders an event stream
//! of `NoteOn`/`NoteOff`/`Velocity`/`TimeShift` tokens on a 10 ms clock.
//! External text passes through pre-tokenized corpora one song per line.

use std::fmt;

use crate::error::{Error, Result};
use crate::smf::{ticks_to_seconds, NoteEvent, Score, TempoChange};

/// Division used for scores reconstructed from token streams.
pub const DETOKENIZED_DIVISION: u16 = 480;
/// Division for MIDI-like reconstruction: 1 tick == 1 ms at the default tempo.
pub const MIDILIKE_DIVISION: u16 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Remi,
    MidiLike,
    ExternalText,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Remi => write!(f, "remi"),
            Scheme::MidiLike => write!(f, "midilike"),
            Scheme::ExternalText => write!(f, "text"),
        }
    }
}

/// One musical token. The canonical text form (via `Display`) and the
/// (kind, value) pair are bijective within a scheme.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MusicToken {
    Bar,
    /// 1-based position within the bar.
    Position(u32),
    Pitch(u8),
    /// Velocity bin index (0-based).
    Velocity(u32),
    /// 1-based index into the duration bin table.
    Duration(u32),
    /// Time shift in milliseconds.
    TimeShift(u32),
    NoteOn(u8),
    NoteOff(u8),
    /// Microseconds per quarter note.
    Tempo(u32),
    External(String),
}

impl fmt::Display for MusicToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MusicToken::Bar => write!(f, "Bar"),
            MusicToken::Position(p) => write!(f, "Position_{p}"),
            MusicToken::Pitch(p) => write!(f, "Pitch_{p}"),
            MusicToken::Velocity(v) => write!(f, "Velocity_{v}"),
            MusicToken::Duration(d) => write!(f, "Duration_{d}"),
            MusicToken::TimeShift(t) => write!(f, "TimeShift_{t}"),
            MusicToken::NoteOn(p) => write!(f, "NoteOn_{p}"),
            MusicToken::NoteOff(p) => write!(f, "NoteOff_{p}"),
            MusicToken::Tempo(t) => write!(f, "Tempo_{t}"),
            MusicToken::External(s) => write!(f, "{s}"),
        }
    }
}

impl MusicToken {
    /// Parse the canonical text form of a musical (REMI / MIDI-like) token.
    /// Only canonical digit strings are accepted, so parsing and rendering
    /// are exact inverses.
    pub fn parse_musical(text: &str) -> Option<MusicToken> {
        if text == "Bar" {
            return Some(MusicToken::Bar);
        }
        let (prefix, value) = text.split_once('_')?;
        match prefix {
            "Position" => parse_canonical(value).map(MusicToken::Position),
            "Pitch" => parse_u7(value).map(MusicToken::Pitch),
            "Velocity" => parse_canonical(value).map(MusicToken::Velocity),
            "Duration" => parse_canonical(value)
                .filter(|d| *d >= 1)
                .map(MusicToken::Duration),
            "TimeShift" => parse_canonical(value).map(MusicToken::TimeShift),
            "NoteOn" => parse_u7(value).map(MusicToken::NoteOn),
            "NoteOff" => parse_u7(value).map(MusicToken::NoteOff),
            "Tempo" => parse_canonical(value)
                .filter(|t| *t > 0)
                .map(MusicToken::Tempo),
            _ => None,
        }
    }
}

/// Digits only, no leading zeros (except "0" itself), no sign.
fn parse_canonical(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if s.len() > 1 && s.starts_with('0') {
        return None;
    }
    s.parse().ok()
}

fn parse_u7(s: &str) -> Option<u8> {
    parse_canonical(s)?
        .try_into()
        .ok()
        .filter(|p: &u8| *p <= 127)
}

/// An ordered token rendering of one song.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub scheme: Scheme,
    pub tokens: Vec<MusicToken>,
}

impl TokenSequence {
    pub fn new(scheme: Scheme) -> Self {
        TokenSequence {
            scheme,
            tokens: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Grid and bin settings shared by both musical schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerConfig {
    pub positions_per_bar: u32,
    pub velocity_bins: u32,
    /// Duration bins as thirty-second-note multiples, strictly increasing.
    pub duration_bins: Vec<u32>,
    /// MIDI-like time shifts in milliseconds, strictly increasing.
    pub timeshift_ms_bins: Vec<u32>,
    /// Optional tempo bins (microseconds per quarter note) for `Tempo` tokens.
    pub tempo_bins: Option<Vec<u32>>,
    /// Emit `Tempo` tokens in REMI sequences at tempo changes.
    pub emit_tempo: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            positions_per_bar: 16,
            velocity_bins: 32,
            duration_bins: (1..=64).collect(),
            timeshift_ms_bins: (1..=100).map(|k| k * 10).collect(),
            tempo_bins: None,
            emit_tempo: false,
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        fn increasing(bins: &[u32]) -> bool {
            !bins.is_empty() && bins.windows(2).all(|w| w[0] < w[1])
        }
        if self.positions_per_bar == 0 {
            return Err(Error::InvalidConfig("positions_per_bar must be > 0".into()));
        }
        if self.velocity_bins == 0 || self.velocity_bins > 128 {
            return Err(Error::InvalidConfig(
                "velocity_bins must be in 1..=128".into(),
            ));
        }
        if !increasing(&self.duration_bins) {
            return Err(Error::InvalidConfig(
                "duration_bins must be non-empty and strictly increasing".into(),
            ));
        }
        if !increasing(&self.timeshift_ms_bins) {
            return Err(Error::InvalidConfig(
                "timeshift_ms_bins must be non-empty and strictly increasing".into(),
            ));
        }
        if let Some(bins) = &self.tempo_bins {
            if !increasing(bins) {
                return Err(Error::InvalidConfig(
                    "tempo_bins must be non-empty and strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// Position grid step in ticks for a given division.
    pub fn grid_ticks(&self, division: u16) -> f64 {
        f64::from(division) * 4.0 / f64::from(self.positions_per_bar)
    }

    /// Duration bin values in ticks for a given division.
    pub fn duration_bin_ticks(&self, division: u16) -> Vec<u64> {
        self.duration_bins
            .iter()
            .map(|&k| (u64::from(k) * u64::from(division) + 4) / 8)
            .map(|t| t.max(1))
            .collect()
    }

    pub fn velocity_bin(&self, velocity: u8) -> u32 {
        (u32::from(velocity) * self.velocity_bins / 128).min(self.velocity_bins - 1)
    }

    /// Representative MIDI velocity for a bin; always maps back to `bin`.
    pub fn velocity_center(&self, bin: u32) -> u8 {
        let bin = bin.min(self.velocity_bins - 1);
        let center = (2 * bin + 1) * 64 / self.velocity_bins;
        let lowest = (bin * 128).div_ceil(self.velocity_bins);
        center.max(lowest).clamp(1, 127) as u8
    }

    /// Nearest duration bin (1-based index), ties toward the longer bin.
    pub fn nearest_duration_bin(&self, duration_tick: u64, division: u16) -> u32 {
        let ticks = self.duration_bin_ticks(division);
        let mut best = 0usize;
        let mut best_dist = u64::MAX;
        for (i, &t) in ticks.iter().enumerate() {
            let dist = t.abs_diff(duration_tick);
            // Strict improvement, or an equal distance from a longer bin;
            // equal values keep the first (canonical) index.
            if dist < best_dist || (dist == best_dist && t > ticks[best]) {
                best = i;
                best_dist = dist;
            }
        }
        best as u32 + 1
    }
}

fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor().max(0.0) as u64
}

/// Behavior on malformed token sequences during detokenization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecoveryMode {
    /// Return `MalformedSequence` on the first broken token.
    #[default]
    Strict,
    /// Skip broken notes and decode the remainder.
    Skip,
}

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

/// Snap onsets to the position grid, durations to the nearest duration bin,
/// and velocities to bin centers. Idempotent: quantizing twice is a no-op.
pub fn quantize(score: &Score, cfg: &TokenizerConfig) -> Result<Score> {
    cfg.validate()?;
    let step = cfg.grid_ticks(score.division);
    let bin_ticks = cfg.duration_bin_ticks(score.division);
    let mut out = score.clone();
    for note in &mut out.notes {
        let pos = round_half_up(note.onset_tick as f64 / step);
        note.onset_tick = round_half_up(pos as f64 * step);
        let bin = cfg.nearest_duration_bin(note.duration_tick, score.division);
        note.duration_tick = bin_ticks[bin as usize - 1];
        note.velocity = cfg.velocity_center(cfg.velocity_bin(note.velocity));
    }
    out.normalize();
    Ok(out)
}

// ---------------------------------------------------------------------------
// REMI
// ---------------------------------------------------------------------------

/// Render a quantized score as a REMI token sequence.
///
/// Bars are fixed at four quarter notes; within each bar, onset positions are
/// visited in order and simultaneous notes are emitted in ascending pitch.
pub fn tokenize_remi(score: &Score, cfg: &TokenizerConfig) -> Result<TokenSequence> {
    cfg.validate()?;
    let step = cfg.grid_ticks(score.division);
    let ppb = u64::from(cfg.positions_per_bar);

    // (global position, pitch, velocity bin, duration bin)
    let mut placed: Vec<(u64, u8, u32, u32)> = Vec::with_capacity(score.notes.len());
    for note in &score.notes {
        let pos = round_half_up(note.onset_tick as f64 / step);
        if round_half_up(pos as f64 * step) != note.onset_tick {
            return Err(Error::UnquantizedInput {
                tick: note.onset_tick,
                grid_ticks: step,
            });
        }
        placed.push((
            pos,
            note.pitch,
            cfg.velocity_bin(note.velocity),
            cfg.nearest_duration_bin(note.duration_tick, score.division),
        ));
    }
    placed.sort();

    let mut tempo_events: Vec<(u64, u32)> = Vec::new();
    if cfg.emit_tempo {
        for change in &score.tempo_map {
            let pos = round_half_up(change.tick as f64 / step);
            let us = match &cfg.tempo_bins {
                Some(bins) => *bins
                    .iter()
                    .min_by_key(|&&b| (b as i64 - change.microseconds_per_quarter as i64).abs())
                    .unwrap(),
                None => change.microseconds_per_quarter,
            };
            tempo_events.push((pos, us));
        }
    }

    let mut seq = TokenSequence::new(Scheme::Remi);
    if placed.is_empty() && tempo_events.is_empty() {
        return Ok(seq);
    }
    let last_pos = placed
        .iter()
        .map(|p| p.0)
        .chain(tempo_events.iter().map(|t| t.0))
        .max()
        .unwrap();
    let n_bars = last_pos / ppb + 1;

    let mut note_i = 0;
    let mut tempo_i = 0;
    for bar in 0..n_bars {
        seq.tokens.push(MusicToken::Bar);
        for pos_in_bar in 0..ppb {
            let gpos = bar * ppb + pos_in_bar;
            let mut emitted_position = false;
            while tempo_i < tempo_events.len() && tempo_events[tempo_i].0 == gpos {
                if !emitted_position {
                    seq.tokens.push(MusicToken::Position(pos_in_bar as u32 + 1));
                    emitted_position = true;
                }
                seq.tokens.push(MusicToken::Tempo(tempo_events[tempo_i].1));
                tempo_i += 1;
            }
            while note_i < placed.len() && placed[note_i].0 == gpos {
                let (_, pitch, vel, dur) = placed[note_i];
                if !emitted_position {
                    seq.tokens.push(MusicToken::Position(pos_in_bar as u32 + 1));
                    emitted_position = true;
                }
                seq.tokens.push(MusicToken::Pitch(pitch));
                seq.tokens.push(MusicToken::Velocity(vel));
                seq.tokens.push(MusicToken::Duration(dur));
                note_i += 1;
            }
        }
    }
    Ok(seq)
}

/// Reconstruct a score from a REMI token sequence (division 480, one track).
pub fn detokenize_remi(
    seq: &TokenSequence,
    cfg: &TokenizerConfig,
    mode: RecoveryMode,
) -> Result<Score> {
    cfg.validate()?;
    let division = DETOKENIZED_DIVISION;
    let bar_len = u64::from(division) * 4;
    let step = cfg.grid_ticks(division);
    let bin_ticks = cfg.duration_bin_ticks(division);
    let mut score = Score::new(division);

    let malformed = |index: usize, reason: &str| -> Error {
        Error::MalformedSequence {
            index,
            reason: reason.to_string(),
        }
    };

    let mut bar: Option<u64> = None;
    let mut position: Option<u64> = None; // 0-based within bar
    let mut pending: Option<(u8, Option<u32>)> = None; // (pitch, velocity bin)

    for (i, token) in seq.tokens.iter().enumerate() {
        // Everything except Velocity/Duration closes any half-built note.
        if pending.is_some() && !matches!(token, MusicToken::Velocity(_) | MusicToken::Duration(_))
        {
            match mode {
                RecoveryMode::Strict => {
                    return Err(malformed(i, "note interrupted before its Duration token"))
                }
                RecoveryMode::Skip => pending = None,
            }
        }
        match token {
            MusicToken::Bar => {
                bar = Some(bar.map_or(0, |b| b + 1));
                position = None;
            }
            MusicToken::Position(p) => {
                if bar.is_none() || *p < 1 || u64::from(*p) > u64::from(cfg.positions_per_bar) {
                    match mode {
                        RecoveryMode::Strict => {
                            return Err(malformed(i, "Position outside a bar or out of range"))
                        }
                        RecoveryMode::Skip => continue,
                    }
                }
                position = Some(u64::from(*p) - 1);
            }
            MusicToken::Pitch(p) => {
                if position.is_none() {
                    match mode {
                        RecoveryMode::Strict => {
                            return Err(malformed(i, "Pitch without a preceding Position"))
                        }
                        RecoveryMode::Skip => continue,
                    }
                }
                pending = Some((*p, None));
            }
            MusicToken::Velocity(v) => match pending {
                Some((pitch, None)) => pending = Some((pitch, Some(*v))),
                _ => match mode {
                    RecoveryMode::Strict => {
                        return Err(malformed(i, "Velocity without a preceding Pitch"))
                    }
                    RecoveryMode::Skip => pending = None,
                },
            },
            MusicToken::Duration(d) => match pending.take() {
                Some((pitch, Some(vel))) => {
                    let (bar_idx, pos) = (bar.unwrap(), position.unwrap());
                    if *d as usize > bin_ticks.len() {
                        match mode {
                            RecoveryMode::Strict => {
                                return Err(malformed(i, "Duration bin out of range"))
                            }
                            RecoveryMode::Skip => continue,
                        }
                    }
                    score.notes.push(NoteEvent {
                        pitch,
                        velocity: cfg.velocity_center(vel),
                        onset_tick: bar_idx * bar_len + round_half_up(pos as f64 * step),
                        duration_tick: bin_ticks[*d as usize - 1],
                        channel: 0,
                        track: 0,
                    });
                }
                _ => match mode {
                    RecoveryMode::Strict => {
                        return Err(malformed(i, "Duration without Pitch and Velocity"))
                    }
                    RecoveryMode::Skip => {}
                },
            },
            MusicToken::Tempo(us) => {
                let tick = match (bar, position) {
                    (Some(b), Some(p)) => b * bar_len + round_half_up(p as f64 * step),
                    (Some(b), None) => b * bar_len,
                    (None, _) => 0,
                };
                score.tempo_map.push(TempoChange {
                    tick,
                    microseconds_per_quarter: *us,
                });
            }
            other => match mode {
                RecoveryMode::Strict => {
                    return Err(malformed(i, &format!("token {other} is not part of REMI")))
                }
                RecoveryMode::Skip => {}
            },
        }
    }
    if pending.is_some() && mode == RecoveryMode::Strict {
        return Err(malformed(
            seq.tokens.len(),
            "sequence ends with an unfinished note",
        ));
    }
    score.normalize();
    Ok(score)
}

// ---------------------------------------------------------------------------
// MIDI-like
// ---------------------------------------------------------------------------

/// Render a score as a MIDI-like event stream on a 10 ms clock.
///
/// Velocity tokens are emitted only when the bin changes; gaps longer than
/// the largest time-shift bin are split greedily into repeated shifts.
pub fn tokenize_midilike(score: &Score, cfg: &TokenizerConfig) -> Result<TokenSequence> {
    cfg.validate()?;
    let step_ms = u64::from(cfg.timeshift_ms_bins[0]);

    // (slot, class 0=on / 1=off, pitch, velocity bin)
    let mut events: Vec<(u64, u8, u8, u32)> = Vec::new();
    for note in &score.notes {
        let on_ms = ticks_to_seconds(score, note.onset_tick) * 1000.0;
        let off_ms = ticks_to_seconds(score, note.onset_tick + note.duration_tick) * 1000.0;
        let on_slot = round_half_up(on_ms / step_ms as f64);
        let off_slot = round_half_up(off_ms / step_ms as f64);
        events.push((on_slot, 0, note.pitch, cfg.velocity_bin(note.velocity)));
        events.push((off_slot, 1, note.pitch, 0));
    }
    events.sort();

    let mut seq = TokenSequence::new(Scheme::MidiLike);
    let mut cur_slot = 0u64;
    let mut cur_vel: Option<u32> = None;
    for (slot, class, pitch, vel) in events {
        let mut gap_ms = (slot - cur_slot) * step_ms;
        while gap_ms > 0 {
            let shift = cfg
                .timeshift_ms_bins
                .iter()
                .rev()
                .find(|&&b| u64::from(b) <= gap_ms)
                .copied()
                .unwrap_or(cfg.timeshift_ms_bins[0]);
            seq.tokens.push(MusicToken::TimeShift(shift));
            gap_ms = gap_ms.saturating_sub(u64::from(shift));
        }
        cur_slot = slot;
        if class == 0 {
            if cur_vel != Some(vel) {
                seq.tokens.push(MusicToken::Velocity(vel));
                cur_vel = Some(vel);
            }
            seq.tokens.push(MusicToken::NoteOn(pitch));
        } else {
            seq.tokens.push(MusicToken::NoteOff(pitch));
        }
    }
    Ok(seq)
}

/// Reconstruct a score from a MIDI-like sequence.
///
/// The result uses division 500 at the default tempo so one tick is exactly
/// one millisecond. Notes left open are closed at the end of the stream.
pub fn detokenize_midilike(
    seq: &TokenSequence,
    cfg: &TokenizerConfig,
    mode: RecoveryMode,
) -> Result<Score> {
    cfg.validate()?;
    let mut score = Score::new(MIDILIKE_DIVISION);
    let mut cur_ms = 0u64;
    let mut cur_vel = cfg.velocity_bin(64);
    let mut open: Vec<(u8, u64, u32)> = Vec::new(); // (pitch, onset ms, velocity bin)

    for (i, token) in seq.tokens.iter().enumerate() {
        match token {
            MusicToken::TimeShift(ms) => cur_ms += u64::from(*ms),
            MusicToken::Velocity(v) => cur_vel = *v,
            MusicToken::NoteOn(p) => open.push((*p, cur_ms, cur_vel)),
            MusicToken::NoteOff(p) => match open.iter().position(|(pitch, _, _)| pitch == p) {
                Some(idx) => {
                    let (pitch, onset, vel) = open.remove(idx);
                    score.notes.push(NoteEvent {
                        pitch,
                        velocity: cfg.velocity_center(vel),
                        onset_tick: onset,
                        duration_tick: (cur_ms - onset).max(1),
                        channel: 0,
                        track: 0,
                    });
                }
                None => match mode {
                    RecoveryMode::Strict => {
                        return Err(Error::MalformedSequence {
                            index: i,
                            reason: format!("NoteOff_{p} without an open note"),
                        })
                    }
                    RecoveryMode::Skip => {}
                },
            },
            other => match mode {
                RecoveryMode::Strict => {
                    return Err(Error::MalformedSequence {
                        index: i,
                        reason: format!("token {other} is not part of MIDI-like"),
                    })
                }
                RecoveryMode::Skip => {}
            },
        }
    }
    for (pitch, onset, vel) in open {
        score.notes.push(NoteEvent {
            pitch,
            velocity: cfg.velocity_center(vel),
            onset_tick: onset,
            duration_tick: (cur_ms - onset).max(1),
            channel: 0,
            track: 0,
        });
    }
    score.normalize();
    Ok(score)
}

// ---------------------------------------------------------------------------
// Token text corpora
// ---------------------------------------------------------------------------

/// Read a pre-tokenized corpus: one song per line, whitespace-separated.
pub fn read_token_text(text: &str) -> Result<Vec<TokenSequence>> {
    read_corpus(text, Scheme::ExternalText)
}

/// Read a corpus file under a given scheme, one song per non-blank line.
pub fn read_corpus(text: &str, scheme: Scheme) -> Result<Vec<TokenSequence>> {
    let mut songs = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let mut seq = TokenSequence::new(scheme);
        for (index, word) in line.split_whitespace().enumerate() {
            let token = match scheme {
                Scheme::ExternalText => MusicToken::External(word.to_string()),
                Scheme::Remi | Scheme::MidiLike => {
                    MusicToken::parse_musical(word).ok_or_else(|| Error::MalformedSequence {
                        index,
                        reason: format!("unrecognized token {word:?}"),
                    })?
                }
            };
            seq.tokens.push(token);
        }
        songs.push(seq);
    }
    if songs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(songs)
}

/// Write a corpus in canonical form: one song per line, single-space joined.
pub fn write_corpus(songs: &[TokenSequence]) -> String {
    let mut out = String::new();
    for song in songs {
        let line: Vec<String> = song.tokens.iter().map(|t| t.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smf::TimeSignature;

    fn note(pitch: u8, velocity: u8, onset: u64, dur: u64) -> NoteEvent {
        NoteEvent {
            pitch,
            velocity,
            onset_tick: onset,
            duration_tick: dur,
            channel: 0,
            track: 0,
        }
    }

    fn score_with(notes: Vec<NoteEvent>) -> Score {
        let mut s = Score::new(480);
        s.notes = notes;
        s.normalize();
        s
    }

    #[test]
    fn quantize_snaps_to_nearest_grid() {
        let cfg = TokenizerConfig::default();
        // grid = 480 * 4 / 16 = 120 ticks
        let s = score_with(vec![note(60, 64, 7, 240)]);
        let q = quantize(&s, &cfg).unwrap();
        assert_eq!(q.notes[0].onset_tick, 0);
    }

    #[test]
    fn quantize_ties_round_up() {
        let cfg = TokenizerConfig::default();
        let s = score_with(vec![note(60, 64, 60, 240)]);
        let q = quantize(&s, &cfg).unwrap();
        assert_eq!(q.notes[0].onset_tick, 120);
    }

    #[test]
    fn quantize_is_idempotent() {
        let cfg = TokenizerConfig::default();
        let s = score_with(vec![
            note(60, 63, 7, 123),
            note(72, 100, 65, 481),
            note(48, 1, 1899, 47),
        ]);
        let q1 = quantize(&s, &cfg).unwrap();
        let q2 = quantize(&q1, &cfg).unwrap();
        assert_eq!(q1, q2);
    }

    #[test]
    fn remi_emission_order_single_note() {
        // positions_per_bar = 32 makes one position an exact 32nd note, so a
        // four-position note is also four duration bins long.
        let cfg = TokenizerConfig {
            positions_per_bar: 32,
            ..TokenizerConfig::default()
        };
        let s = score_with(vec![note(60, cfg.velocity_center(16), 0, 240)]);
        let seq = tokenize_remi(&s, &cfg).unwrap();
        assert_eq!(
            seq.tokens,
            vec![
                MusicToken::Bar,
                MusicToken::Position(1),
                MusicToken::Pitch(60),
                MusicToken::Velocity(16),
                MusicToken::Duration(4),
            ]
        );
    }

    #[test]
    fn remi_empty_score() {
        let cfg = TokenizerConfig::default();
        let seq = tokenize_remi(&Score::new(480), &cfg).unwrap();
        assert!(seq.is_empty());
    }

    #[test]
    fn remi_same_onset_sorted_by_pitch() {
        let cfg = TokenizerConfig::default();
        let s = score_with(vec![note(64, 66, 0, 120), note(60, 66, 0, 120)]);
        let seq = tokenize_remi(&s, &cfg).unwrap();
        let pitches: Vec<u8> = seq
            .tokens
            .iter()
            .filter_map(|t| match t {
                MusicToken::Pitch(p) => Some(*p),
                _ => None,
            })
            .collect();
        assert_eq!(pitches, vec![60, 64]);
        let positions = seq
            .tokens
            .iter()
            .filter(|t| matches!(t, MusicToken::Position(_)))
            .count();
        assert_eq!(positions, 1);
    }

    #[test]
    fn remi_rejects_off_grid_onset() {
        let cfg = TokenizerConfig::default();
        let s = score_with(vec![note(60, 64, 7, 120)]);
        assert!(matches!(
            tokenize_remi(&s, &cfg),
            Err(Error::UnquantizedInput { tick: 7, .. })
        ));
    }

    #[test]
    fn remi_round_trip_exact() {
        let cfg = TokenizerConfig::default();
        let s = score_with(vec![
            note(60, 64, 0, 480),
            note(64, 90, 480, 240),
            note(60, 64, 1920 * 3, 60), // empty bars in between
        ]);
        let q = quantize(&s, &cfg).unwrap();
        let seq = tokenize_remi(&q, &cfg).unwrap();
        let back = detokenize_remi(&seq, &cfg, RecoveryMode::Strict).unwrap();
        assert_eq!(back.notes, q.notes);
    }

    #[test]
    fn remi_detokenize_example() {
        let cfg = TokenizerConfig::default();
        let seq = TokenSequence {
            scheme: Scheme::Remi,
            tokens: vec![
                MusicToken::Bar,
                MusicToken::Position(1),
                MusicToken::Pitch(60),
                MusicToken::Velocity(16),
                MusicToken::Duration(4),
            ],
        };
        let score = detokenize_remi(&seq, &cfg, RecoveryMode::Strict).unwrap();
        assert_eq!(score.notes.len(), 1);
        assert_eq!(score.notes[0].pitch, 60);
        assert_eq!(score.notes[0].onset_tick, 0);
        assert_eq!(score.notes[0].duration_tick, 240); // 4 thirty-seconds at 480
        assert_eq!(score.notes[0].velocity, cfg.velocity_center(16));
    }

    #[test]
    fn remi_empty_sequence_decodes_to_empty_score() {
        let cfg = TokenizerConfig::default();
        let seq = TokenSequence::new(Scheme::Remi);
        let score = detokenize_remi(&seq, &cfg, RecoveryMode::Strict).unwrap();
        assert!(score.notes.is_empty());
    }

    #[test]
    fn remi_dangling_pitch_strict_vs_recovery() {
        let cfg = TokenizerConfig::default();
        let seq = TokenSequence {
            scheme: Scheme::Remi,
            tokens: vec![
                MusicToken::Bar,
                MusicToken::Position(1),
                MusicToken::Pitch(60),
                MusicToken::Velocity(16),
                MusicToken::Duration(4),
                MusicToken::Pitch(72), // dangling
            ],
        };
        assert!(matches!(
            detokenize_remi(&seq, &cfg, RecoveryMode::Strict),
            Err(Error::MalformedSequence { .. })
        ));
        let score = detokenize_remi(&seq, &cfg, RecoveryMode::Skip).unwrap();
        assert_eq!(score.notes.len(), 1);
        assert_eq!(score.notes[0].pitch, 60);
    }

    #[test]
    fn midilike_single_note_emission() {
        let cfg = TokenizerConfig::default();
        // 480 ticks at the default tempo is exactly 500 ms.
        let s = score_with(vec![note(60, 64, 0, 480)]);
        let seq = tokenize_midilike(&s, &cfg).unwrap();
        assert_eq!(
            seq.tokens,
            vec![
                MusicToken::Velocity(cfg.velocity_bin(64)),
                MusicToken::NoteOn(60),
                MusicToken::TimeShift(500),
                MusicToken::NoteOff(60),
            ]
        );
    }

    #[test]
    fn midilike_long_rest_splits_into_capped_shifts() {
        let cfg = TokenizerConfig::default();
        // First note 0..500 ms, second note starts at 3000 ms: rest of 2500.
        let s = score_with(vec![note(60, 64, 0, 480), note(62, 64, 2880, 480)]);
        let seq = tokenize_midilike(&s, &cfg).unwrap();
        let shifts: Vec<u32> = seq
            .tokens
            .iter()
            .filter_map(|t| match t {
                MusicToken::TimeShift(ms) => Some(*ms),
                _ => None,
            })
            .collect();
        assert_eq!(shifts, vec![500, 1000, 1000, 500, 500]);
    }

    #[test]
    fn midilike_round_trip_timing() {
        let cfg = TokenizerConfig::default();
        let s = score_with(vec![note(60, 64, 0, 480)]);
        let seq = tokenize_midilike(&s, &cfg).unwrap();
        let back = detokenize_midilike(&seq, &cfg, RecoveryMode::Strict).unwrap();
        assert_eq!(back.notes.len(), 1);
        // 1 tick == 1 ms in the reconstructed score.
        assert_eq!(back.notes[0].onset_tick, 0);
        assert_eq!(back.notes[0].duration_tick, 500);
    }

    #[test]
    fn midilike_unclosed_note_extends_to_stream_end() {
        let cfg = TokenizerConfig::default();
        let seq = TokenSequence {
            scheme: Scheme::MidiLike,
            tokens: vec![
                MusicToken::Velocity(16),
                MusicToken::NoteOn(60),
                MusicToken::TimeShift(1000),
                MusicToken::TimeShift(200),
            ],
        };
        let score = detokenize_midilike(&seq, &cfg, RecoveryMode::Strict).unwrap();
        assert_eq!(score.notes[0].duration_tick, 1200);
    }

    #[test]
    fn midilike_lone_noteoff() {
        let cfg = TokenizerConfig::default();
        let seq = TokenSequence {
            scheme: Scheme::MidiLike,
            tokens: vec![MusicToken::NoteOff(60)],
        };
        assert!(matches!(
            detokenize_midilike(&seq, &cfg, RecoveryMode::Strict),
            Err(Error::MalformedSequence { .. })
        ));
        let score = detokenize_midilike(&seq, &cfg, RecoveryMode::Skip).unwrap();
        assert!(score.notes.is_empty());
    }

    #[test]
    fn token_text_reading() {
        let songs = read_token_text("a b c\n").unwrap();
        assert_eq!(songs.len(), 1);
        assert_eq!(songs[0].tokens.len(), 3);

        let songs = read_token_text("a b\nc d\n").unwrap();
        assert_eq!(songs.len(), 2);

        let spaced = read_token_text("a   b \t c\n").unwrap();
        let single = read_token_text("a b c\n").unwrap();
        assert_eq!(spaced, single);

        assert!(matches!(read_token_text("\n  \n"), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn canonical_text_round_trip() {
        let tokens = vec![
            MusicToken::Bar,
            MusicToken::Position(3),
            MusicToken::Pitch(60),
            MusicToken::Velocity(16),
            MusicToken::Duration(4),
            MusicToken::TimeShift(500),
            MusicToken::NoteOn(72),
            MusicToken::NoteOff(72),
            MusicToken::Tempo(500_000),
        ];
        for t in tokens {
            let text = t.to_string();
            assert_eq!(MusicToken::parse_musical(&text), Some(t));
        }
    }

    #[test]
    fn non_canonical_token_text_rejected() {
        for text in [
            "Pitch_060",
            "Pitch_+60",
            "Pitch_",
            "Velocity_01",
            "Pitch_300",
        ] {
            assert_eq!(MusicToken::parse_musical(text), None, "{text}");
        }
        assert_eq!(
            MusicToken::parse_musical("Position_0"),
            Some(MusicToken::Position(0))
        );
    }

    #[test]
    fn tempo_tokens_when_enabled() {
        let cfg = TokenizerConfig {
            emit_tempo: true,
            ..TokenizerConfig::default()
        };
        let mut s = score_with(vec![note(60, 64, 0, 480)]);
        s.tempo_map = vec![TempoChange {
            tick: 0,
            microseconds_per_quarter: 400_000,
        }];
        s.time_signatures = vec![TimeSignature {
            tick: 0,
            numerator: 4,
            denominator: 4,
        }];
        let seq = tokenize_remi(&s, &cfg).unwrap();
        assert!(seq.tokens.contains(&MusicToken::Tempo(400_000)));
        let back = detokenize_remi(&seq, &cfg, RecoveryMode::Strict).unwrap();
        assert_eq!(back.tempo_map[0].microseconds_per_quarter, 400_000);
    }

    #[test]
    fn tokenization_ignores_note_list_order() {
        let cfg = TokenizerConfig::default();
        let sorted = score_with(vec![note(60, 66, 0, 240), note(72, 66, 480, 240)]);
        let mut reversed = sorted.clone();
        reversed.notes.reverse();
        assert_eq!(
            tokenize_remi(&sorted, &cfg).unwrap(),
            tokenize_remi(&reversed, &cfg).unwrap()
        );
        assert_eq!(
            tokenize_midilike(&sorted, &cfg).unwrap(),
            tokenize_midilike(&reversed, &cfg).unwrap()
        );
    }

    #[test]
    fn velocity_bins_round_trip_through_centers() {
        let cfg = TokenizerConfig::default();
        for bin in 0..cfg.velocity_bins {
            let center = cfg.velocity_center(bin);
            assert_eq!(cfg.velocity_bin(center), bin, "bin {bin} center {center}");
        }
    }
}
