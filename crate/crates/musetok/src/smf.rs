//! Standard MIDI File (format 0/1) parsing and writing.
//!
//! Files are decoded into a [`Score`]: a flat, sorted list of note events with
//! a tempo map and time-signature list. Note-ons are paired with note-offs in
//! FIFO order when the same pitch is re-struck before release.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A single note with tick timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoteEvent {
    pub pitch: u8,
    pub velocity: u8,
    pub onset_tick: u64,
    pub duration_tick: u64,
    pub channel: u8,
    pub track: u32,
}

/// Tempo change: microseconds per quarter note, effective from `tick`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TempoChange {
    pub tick: u64,
    pub microseconds_per_quarter: u32,
}

/// Time signature change at `tick`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSignature {
    pub tick: u64,
    pub numerator: u8,
    pub denominator: u8,
}

pub const DEFAULT_TEMPO: u32 = 500_000;
pub const PERCUSSION_CHANNEL: u8 = 9;

/// Parsed musical ground truth: tick-timed notes plus tempo/meter maps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Score {
    /// Ticks per quarter note; always > 0 for a parsed score.
    pub division: u16,
    /// Sorted by (onset, pitch, duration, velocity, channel, track).
    pub notes: Vec<NoteEvent>,
    /// Sorted by tick. Empty map means the default 500000 us/qn throughout.
    pub tempo_map: Vec<TempoChange>,
    pub time_signatures: Vec<TimeSignature>,
}

fn note_sort_key(n: &NoteEvent) -> (u64, u8, u64, u8, u8, u32) {
    (
        n.onset_tick,
        n.pitch,
        n.duration_tick,
        n.velocity,
        n.channel,
        n.track,
    )
}

impl Score {
    pub fn new(division: u16) -> Self {
        Score {
            division,
            ..Score::default()
        }
    }

    /// Restore the sortedness invariants after direct mutation.
    pub fn normalize(&mut self) {
        self.notes.sort_by_key(note_sort_key);
        self.tempo_map.sort_by_key(|t| t.tick);
        self.time_signatures.sort_by_key(|t| t.tick);
    }

    /// Tick of the last note release, 0 for an empty score.
    pub fn end_tick(&self) -> u64 {
        self.notes
            .iter()
            .map(|n| n.onset_tick + n.duration_tick)
            .max()
            .unwrap_or(0)
    }

    /// Notes outside the percussion channel.
    pub fn pitched_notes(&self) -> impl Iterator<Item = &NoteEvent> {
        self.notes
            .iter()
            .filter(|n| n.channel != PERCUSSION_CHANNEL)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn truncated(&self, reason: &str) -> Error {
        Error::TruncatedChunk {
            offset: self.pos,
            reason: reason.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.truncated(&format!("expected {n} more bytes")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most 4 bytes per the SMF spec.
    fn vlq(&mut self) -> Result<u32> {
        let mut value: u32 = 0;
        for i in 0..4 {
            let byte = self.u8()?;
            value = (value << 7) | u32::from(byte & 0x7F);
            if byte & 0x80 == 0 {
                return Ok(value);
            }
            if i == 3 {
                break;
            }
        }
        Err(self.truncated("variable-length quantity longer than 4 bytes"))
    }
}

/// Key for an open (sounding) note awaiting its note-off.
type OpenKey = (u8, u8); // (channel, pitch)

/// Parse a Standard MIDI File (format 0 or 1) into a [`Score`].
///
/// Note-ons with velocity 0 act as note-offs. Unterminated notes are closed
/// at the end of their track. Zero-length notes are clamped to one tick.
pub fn parse_midi(bytes: &[u8]) -> Result<Score> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4).map_err(|_| Error::MalformedHeader {
        offset: 0,
        reason: "file shorter than a header chunk".into(),
    })?;
    if magic != b"MThd" {
        return Err(Error::MalformedHeader {
            offset: 0,
            reason: format!("bad magic {magic:?}, expected MThd"),
        });
    }
    let header_len = r.u32()?;
    if header_len < 6 {
        return Err(Error::MalformedHeader {
            offset: 4,
            reason: format!("header length {header_len} < 6"),
        });
    }
    let format = r.u16()?;
    let ntrks = r.u16()?;
    let division_raw = r.u16()?;
    // Skip any extension bytes the header declares.
    r.take(header_len as usize - 6)?;

    match format {
        0 | 1 => {}
        2 => return Err(Error::UnsupportedFormat("SMF format 2".into())),
        other => {
            return Err(Error::MalformedHeader {
                offset: 8,
                reason: format!("unknown format {other}"),
            })
        }
    }
    if division_raw & 0x8000 != 0 {
        return Err(Error::UnsupportedFormat("SMPTE time division".into()));
    }
    if division_raw == 0 {
        return Err(Error::MalformedHeader {
            offset: 12,
            reason: "division is zero".into(),
        });
    }

    let mut score = Score::new(division_raw);
    let mut track_index: u32 = 0;
    while track_index < u32::from(ntrks) && r.remaining() > 0 {
        let chunk_type = r.take(4)?;
        let chunk_len = r.u32()? as usize;
        let data = r.take(chunk_len)?;
        if chunk_type == b"MTrk" {
            parse_track(data, r.pos - chunk_len, track_index, &mut score)?;
            track_index += 1;
        }
        // Alien chunk types are skipped per the SMF spec.
    }
    if track_index < u32::from(ntrks) {
        return Err(Error::TruncatedChunk {
            offset: r.pos,
            reason: format!("header declares {ntrks} tracks, found {track_index}"),
        });
    }

    score.normalize();
    Ok(score)
}

fn parse_track(data: &[u8], base_offset: usize, track: u32, score: &mut Score) -> Result<()> {
    let mut r = Reader::new(data);
    let mut tick: u64 = 0;
    let mut running_status: Option<u8> = None;
    let mut open: Vec<(OpenKey, VecDeque<(u64, u8)>)> = Vec::new();

    let open_queue = |key: OpenKey, open: &mut Vec<(OpenKey, VecDeque<(u64, u8)>)>| -> usize {
        match open.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                open.push((key, VecDeque::new()));
                open.len() - 1
            }
        }
    };

    let close_note = |key: OpenKey,
                      tick: u64,
                      open: &mut Vec<(OpenKey, VecDeque<(u64, u8)>)>,
                      notes: &mut Vec<NoteEvent>| {
        if let Some((_, queue)) = open.iter_mut().find(|(k, _)| *k == key) {
            if let Some((onset, velocity)) = queue.pop_front() {
                notes.push(NoteEvent {
                    pitch: key.1,
                    velocity,
                    onset_tick: onset,
                    duration_tick: (tick.saturating_sub(onset)).max(1),
                    channel: key.0,
                    track,
                });
            }
        }
    };

    loop {
        if r.remaining() == 0 {
            break; // tolerate tracks missing the end-of-track meta
        }
        let delta = r.vlq()?;
        tick += u64::from(delta);

        let first = r.u8()?;
        let status = if first & 0x80 != 0 {
            if first < 0xF0 {
                running_status = Some(first);
            }
            first
        } else {
            // Running status: re-use the previous channel status byte.
            r.pos -= 1;
            running_status.ok_or_else(|| Error::TruncatedChunk {
                offset: base_offset + r.pos,
                reason: "data byte with no running status".into(),
            })?
        };

        match status & 0xF0 {
            0x80 => {
                let pitch = r.u8()? & 0x7F;
                let _release = r.u8()?;
                close_note((status & 0x0F, pitch), tick, &mut open, &mut score.notes);
            }
            0x90 => {
                let pitch = r.u8()? & 0x7F;
                let velocity = r.u8()? & 0x7F;
                let key = (status & 0x0F, pitch);
                if velocity == 0 {
                    close_note(key, tick, &mut open, &mut score.notes);
                } else {
                    let idx = open_queue(key, &mut open);
                    open[idx].1.push_back((tick, velocity));
                }
            }
            0xA0 | 0xB0 | 0xE0 => {
                r.take(2)?;
            }
            0xC0 | 0xD0 => {
                r.take(1)?;
            }
            0xF0 => match status {
                0xFF => {
                    let meta_type = r.u8()?;
                    let len = r.vlq()? as usize;
                    let payload = r.take(len)?;
                    match meta_type {
                        0x51 if len >= 3 => {
                            let us = u32::from(payload[0]) << 16
                                | u32::from(payload[1]) << 8
                                | u32::from(payload[2]);
                            if us > 0 {
                                score.tempo_map.push(TempoChange {
                                    tick,
                                    microseconds_per_quarter: us,
                                });
                            }
                        }
                        0x58 if len >= 2 => {
                            score.time_signatures.push(TimeSignature {
                                tick,
                                numerator: payload[0],
                                denominator: 1u8 << payload[1].min(7),
                            });
                        }
                        0x2F => {
                            // End of track: close anything still sounding.
                            for (key, queue) in open.iter_mut() {
                                while let Some((onset, velocity)) = queue.pop_front() {
                                    score.notes.push(NoteEvent {
                                        pitch: key.1,
                                        velocity,
                                        onset_tick: onset,
                                        duration_tick: (tick.saturating_sub(onset)).max(1),
                                        channel: key.0,
                                        track,
                                    });
                                }
                            }
                            return Ok(());
                        }
                        _ => {}
                    }
                }
                0xF0 | 0xF7 => {
                    let len = r.vlq()? as usize;
                    r.take(len)?;
                }
                other => {
                    return Err(Error::TruncatedChunk {
                        offset: base_offset + r.pos,
                        reason: format!("unexpected status byte 0x{other:02X}"),
                    })
                }
            },
            _ => unreachable!("status byte always has the high bit set"),
        }
    }

    // Track ended without the end-of-track meta; close open notes at the
    // last event tick.
    for (key, queue) in open.iter_mut() {
        while let Some((onset, velocity)) = queue.pop_front() {
            score.notes.push(NoteEvent {
                pitch: key.1,
                velocity,
                onset_tick: onset,
                duration_tick: (tick.saturating_sub(onset)).max(1),
                channel: key.0,
                track,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Tempo(u32),
    TimeSig(u8, u8),
    NoteOff {
        channel: u8,
        pitch: u8,
    },
    NoteOn {
        channel: u8,
        pitch: u8,
        velocity: u8,
    },
}

fn push_vlq(out: &mut Vec<u8>, mut value: u64) {
    let mut stack = [0u8; 10];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7F) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let mut byte = stack[i];
        if i > 0 {
            byte |= 0x80;
        }
        out.push(byte);
    }
}

/// Serialize a [`Score`] as an SMF format-1 byte stream.
///
/// Tempo and time-signature meta events are written into the first track.
/// `parse_midi(write_midi(s))` reproduces the notes, tempo map, and time
/// signatures of any score whose same-pitch overlaps release in FIFO order.
pub fn write_midi(score: &Score) -> Vec<u8> {
    let n_tracks = score
        .notes
        .iter()
        .map(|n| n.track + 1)
        .max()
        .unwrap_or(1)
        .max(1);

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(n_tracks as u16).to_be_bytes());
    out.extend_from_slice(&score.division.to_be_bytes());

    for track in 0..n_tracks {
        let mut events: Vec<(u64, u8, EventKind)> = Vec::new();
        if track == 0 {
            for t in &score.tempo_map {
                events.push((t.tick, 0, EventKind::Tempo(t.microseconds_per_quarter)));
            }
            for ts in &score.time_signatures {
                events.push((ts.tick, 0, EventKind::TimeSig(ts.numerator, ts.denominator)));
            }
        }
        for n in score.notes.iter().filter(|n| n.track == track) {
            events.push((
                n.onset_tick,
                2,
                EventKind::NoteOn {
                    channel: n.channel,
                    pitch: n.pitch,
                    velocity: n.velocity.max(1),
                },
            ));
            events.push((
                n.onset_tick + n.duration_tick,
                1,
                EventKind::NoteOff {
                    channel: n.channel,
                    pitch: n.pitch,
                },
            ));
        }
        // Meta first, then note-offs, then note-ons at equal ticks.
        events.sort_by_key(|(tick, class, kind)| (*tick, *class, *kind));

        let mut data = Vec::new();
        let mut cursor = 0u64;
        for (tick, _, kind) in &events {
            push_vlq(&mut data, tick - cursor);
            cursor = *tick;
            match kind {
                EventKind::Tempo(us) => {
                    data.extend_from_slice(&[0xFF, 0x51, 0x03]);
                    data.extend_from_slice(&us.to_be_bytes()[1..]);
                }
                EventKind::TimeSig(num, den) => {
                    let log_den = den.trailing_zeros() as u8;
                    data.extend_from_slice(&[0xFF, 0x58, 0x04, *num, log_den, 24, 8]);
                }
                EventKind::NoteOff { channel, pitch } => {
                    data.extend_from_slice(&[0x80 | channel, *pitch, 0x40]);
                }
                EventKind::NoteOn {
                    channel,
                    pitch,
                    velocity,
                } => {
                    data.extend_from_slice(&[0x90 | channel, *pitch, *velocity]);
                }
            }
        }
        push_vlq(&mut data, 0);
        data.extend_from_slice(&[0xFF, 0x2F, 0x00]);

        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(data.len() as u32).to_be_bytes());
        out.extend_from_slice(&data);
    }
    out
}

// ---------------------------------------------------------------------------
// Tempo map
// ---------------------------------------------------------------------------

/// Convert a tick to seconds by piecewise-linear accumulation over the tempo
/// map. An empty map (or a map starting after tick 0) uses the 500000 us/qn
/// default up to the first change.
pub fn ticks_to_seconds(score: &Score, tick: u64) -> f64 {
    let mut seconds = 0.0;
    let mut cur_tick = 0u64;
    let mut cur_tempo = DEFAULT_TEMPO;
    let div = f64::from(score.division);
    for change in &score.tempo_map {
        if change.tick >= tick {
            break;
        }
        seconds += (change.tick - cur_tick) as f64 * f64::from(cur_tempo) / (div * 1e6);
        cur_tick = change.tick;
        cur_tempo = change.microseconds_per_quarter;
    }
    seconds + (tick - cur_tick) as f64 * f64::from(cur_tempo) / (div * 1e6)
}
