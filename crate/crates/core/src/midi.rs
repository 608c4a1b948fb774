//! Standard MIDI File (format 0/1) reader producing monophonic pitch lines.
//!
//! Only what is needed to recover note pitches and their timing is
//! decoded. Channel messages other than note on/off are skipped, as are
//! sysex and meta events (apart from End of Track).

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

pub const MAX_PITCH: i32 = 127;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MidiError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated {0}")]
    TruncatedChunk(String),
    #[error("unsupported SMF format {0} (only formats 0 and 1 are read)")]
    UnsupportedFormat(u16),
    #[error("malformed track {track} at byte {offset}: {reason}")]
    MalformedTrack { track: usize, offset: usize, reason: String },
    #[error("sequence has {0} note(s); at least 2 are required")]
    EmptySequence(usize),
    #[error("pitch {0} outside 0..=127")]
    PitchOutOfRange(i32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset_tick: u64,
    pub duration_tick: u64,
}

impl NoteEvent {
    pub fn new(pitch: u8, onset_tick: u64, duration_tick: u64) -> Self {
        debug_assert!(pitch <= 127 && duration_tick >= 1);
        Self { pitch, onset_tick, duration_tick }
    }
}

/// Ordered monophonic MIDI pitches of one piece.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PitchSequence {
    pitches: Vec<i32>,
    source_id: String,
}

impl PitchSequence {
    pub fn new(pitches: Vec<i32>, source_id: impl Into<String>) -> Result<Self, MidiError> {
        if pitches.len() < 2 {
            return Err(MidiError::EmptySequence(pitches.len()));
        }
        if let Some(&p) = pitches.iter().find(|&&p| !(0..=MAX_PITCH).contains(&p)) {
            return Err(MidiError::PitchOutOfRange(p));
        }
        Ok(Self { pitches, source_id: source_id.into() })
    }

    pub fn pitches(&self) -> &[i32] {
        &self.pitches
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.pitches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitches.is_empty()
    }

    pub fn min_pitch(&self) -> i32 {
        *self.pitches.iter().min().expect("non-empty")
    }

    pub fn max_pitch(&self) -> i32 {
        *self.pitches.iter().max().expect("non-empty")
    }
}

impl fmt::Display for PitchSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} notes", self.source_id, self.pitches.len())
    }
}

/// Result of collapsing a note list to a single melodic line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monophonic {
    pub sequence: PitchSequence,
    /// Notes discarded because they shared an onset with a higher note.
    pub dropped: usize,
}

impl Monophonic {
    pub fn had_chords(&self) -> bool {
        self.dropped > 0
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.remaining() < n {
            return None;
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity: at most four bytes, seven bits each, MSB first.
    fn vlq(&mut self) -> Result<u32, &'static str> {
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8().ok_or("variable-length quantity runs past end of track")?;
            value = (value << 7) | u32::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err("variable-length quantity longer than 4 bytes")
    }
}

/// Parses an SMF byte stream into per-track note lists.
///
/// Every `MTrk` chunk yields one entry, in file order, even when it holds
/// no notes. Notes within a track are sorted by onset, then pitch.
pub fn parse_smf(bytes: &[u8]) -> Result<Vec<Vec<NoteEvent>>, MidiError> {
    let mut r = Reader { bytes, pos: 0 };
    match r.take(4) {
        Some(b"MThd") => {}
        Some(_) => return Err(MidiError::MalformedHeader("missing MThd chunk id".into())),
        None => return Err(MidiError::MalformedHeader("file shorter than a chunk id".into())),
    }
    let header_len = r.u32().ok_or_else(|| MidiError::TruncatedChunk("header chunk length".into()))? as usize;
    if header_len < 6 {
        return Err(MidiError::MalformedHeader(format!("header length {header_len}, expected 6")));
    }
    let header = r.take(header_len).ok_or_else(|| MidiError::TruncatedChunk("header chunk".into()))?;
    let format = u16::from_be_bytes([header[0], header[1]]);
    let ntracks = u16::from_be_bytes([header[2], header[3]]) as usize;
    match format {
        0 | 1 => {}
        2 => return Err(MidiError::UnsupportedFormat(2)),
        other => return Err(MidiError::MalformedHeader(format!("unknown format {other}"))),
    }
    if format == 0 && ntracks != 1 {
        return Err(MidiError::MalformedHeader(format!("format 0 declares {ntracks} tracks, expected 1")));
    }

    let mut tracks = Vec::with_capacity(ntracks);
    while tracks.len() < ntracks {
        if r.remaining() == 0 {
            return Err(MidiError::TruncatedChunk(format!("file: {} of {ntracks} tracks present", tracks.len())));
        }
        let id = r.take(4).ok_or_else(|| MidiError::TruncatedChunk("chunk id".into()))?;
        let len = r.u32().ok_or_else(|| MidiError::TruncatedChunk("chunk length".into()))? as usize;
        let start = r.pos;
        let body = r.take(len).ok_or_else(|| {
            MidiError::TruncatedChunk(format!(
                "chunk at byte {}: declares {len} bytes, {} available",
                start - 8,
                bytes.len() - start
            ))
        })?;
        if id != b"MTrk" {
            // Unknown chunk types are skipped per the file format.
            continue;
        }
        tracks.push(parse_track(body, tracks.len(), start)?);
    }
    Ok(tracks)
}

fn parse_track(body: &[u8], track: usize, base: usize) -> Result<Vec<NoteEvent>, MidiError> {
    let mut r = Reader { bytes: body, pos: 0 };
    let err =
        |pos: usize, reason: &str| MidiError::MalformedTrack { track, offset: base + pos, reason: reason.to_string() };

    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    let mut open: HashMap<(u8, u8), VecDeque<u64>> = HashMap::new();
    let mut notes = Vec::new();

    let close = |open: &mut HashMap<(u8, u8), VecDeque<u64>>, notes: &mut Vec<NoteEvent>, key: (u8, u8), tick: u64| {
        if let Some(onset) = open.get_mut(&key).and_then(VecDeque::pop_front) {
            // Zero-length notes carry no melodic content.
            if tick > onset {
                notes.push(NoteEvent::new(key.1, onset, tick - onset));
            }
        }
    };

    while r.remaining() > 0 {
        let at = r.pos;
        tick += u64::from(r.vlq().map_err(|e| err(at, e))?);
        let at = r.pos;
        let first = r.u8().ok_or_else(|| err(at, "missing event after delta time"))?;

        let (status, first_data) = if first & 0x80 != 0 {
            (first, None)
        } else {
            let status = running.ok_or_else(|| err(at, "data byte without running status"))?;
            (status, Some(first))
        };

        match status {
            0x80..=0xEF => {
                running = Some(status);
                let kind = status & 0xF0;
                let channel = status & 0x0F;
                let needed = if kind == 0xC0 || kind == 0xD0 { 1 } else { 2 };
                let mut data = [0u8; 2];
                let mut got = 0;
                if let Some(d) = first_data {
                    data[0] = d;
                    got = 1;
                }
                while got < needed {
                    let p = r.pos;
                    data[got] = r.u8().ok_or_else(|| err(p, "channel message truncated"))?;
                    got += 1;
                }
                if data[..needed].iter().any(|b| b & 0x80 != 0) {
                    return Err(err(at, "status byte where a data byte was expected"));
                }
                match kind {
                    0x90 if data[1] > 0 => {
                        open.entry((channel, data[0])).or_default().push_back(tick);
                    }
                    0x80 | 0x90 => close(&mut open, &mut notes, (channel, data[0]), tick),
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let p = r.pos;
                let len = r.vlq().map_err(|e| err(p, e))? as usize;
                r.take(len).ok_or_else(|| err(p, "sysex data runs past end of track"))?;
            }
            0xFF => {
                running = None;
                let p = r.pos;
                let kind = r.u8().ok_or_else(|| err(p, "meta event truncated"))?;
                let p = r.pos;
                let len = r.vlq().map_err(|e| err(p, e))? as usize;
                r.take(len).ok_or_else(|| err(p, "meta data runs past end of track"))?;
                if kind == 0x2F {
                    break;
                }
            }
            _ => return Err(err(at, "system real-time/common status inside a file")),
        }
    }

    // Notes still sounding at End of Track end there.
    let mut pending: Vec<_> = open.into_iter().collect();
    pending.sort();
    for ((_, pitch), onsets) in pending {
        for onset in onsets {
            if tick > onset {
                notes.push(NoteEvent::new(pitch, onset, tick - onset));
            }
        }
    }
    notes.sort_by_key(|n| (n.onset_tick, n.pitch, n.duration_tick));
    Ok(notes)
}

/// Collapses a note list to one line: ordered by onset, keeping the
/// highest pitch among notes that start together.
pub fn to_monophonic(events: &[NoteEvent], source_id: impl Into<String>) -> Result<Monophonic, MidiError> {
    let mut sorted = events.to_vec();
    sorted.sort_by(|a, b| a.onset_tick.cmp(&b.onset_tick).then(b.pitch.cmp(&a.pitch)));
    let mut pitches = Vec::with_capacity(sorted.len());
    let mut dropped = 0;
    let mut last_onset = None;
    for e in &sorted {
        if last_onset == Some(e.onset_tick) {
            dropped += 1;
            continue;
        }
        last_onset = Some(e.onset_tick);
        pitches.push(i32::from(e.pitch));
    }
    let sequence = PitchSequence::new(pitches, source_id)?;
    Ok(Monophonic { sequence, dropped })
}

/// One melody per note-bearing track. Tracks without notes (tempo or
/// metadata tracks) are skipped; tracks with a single note yield an error
/// entry so callers can report them.
pub fn melodies_from_smf(bytes: &[u8], source_id: &str) -> Result<Vec<Result<Monophonic, MidiError>>, MidiError> {
    let tracks = parse_smf(bytes)?;
    let note_tracks: Vec<_> = tracks.iter().enumerate().filter(|(_, t)| !t.is_empty()).collect();
    let single = note_tracks.len() == 1;
    Ok(note_tracks
        .into_iter()
        .map(|(i, t)| {
            let id = if single { source_id.to_string() } else { format!("{source_id}#{i}") };
            to_monophonic(t, id)
        })
        .collect())
}
