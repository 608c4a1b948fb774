//! Writes the synthetic fixture corpus to `fixtures/midi/` at the workspace root.
//!
//! `cargo run -p music-embed --example make_fixtures`
//!
//! Output is deterministic; the files are committed and regenerated only
//! when this program changes.

use std::path::{Path, PathBuf};

use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUARTER: u32 = 480;

fn on(delta: u32, key: u8, vel: u8) -> TrackEvent<'static> {
    TrackEvent {
        delta: u28::new(delta),
        kind: TrackEventKind::Midi {
            channel: u4::new(0),
            message: MidiMessage::NoteOn { key: u7::new(key), vel: u7::new(vel) },
        },
    }
}

fn off(delta: u32, key: u8) -> TrackEvent<'static> {
    TrackEvent {
        delta: u28::new(delta),
        kind: TrackEventKind::Midi {
            channel: u4::new(0),
            message: MidiMessage::NoteOff { key: u7::new(key), vel: u7::new(64) },
        },
    }
}

fn end() -> TrackEvent<'static> {
    TrackEvent { delta: u28::new(0), kind: TrackEventKind::Meta(MetaMessage::EndOfTrack) }
}

/// A melody as (pitch, length in eighths). Alternates NoteOff and
/// velocity-0 NoteOn endings so both conventions appear in the corpus.
fn melody_track(notes: &[(u8, u32)]) -> Vec<TrackEvent<'static>> {
    let mut track = Vec::new();
    for (i, &(pitch, eighths)) in notes.iter().enumerate() {
        track.push(on(0, pitch, 80));
        let len = eighths * QUARTER / 2;
        track.push(if i % 2 == 0 { off(len, pitch) } else { on(len, pitch, 0) });
    }
    track.push(end());
    track
}

fn chord_track(chords: &[&[u8]]) -> Vec<TrackEvent<'static>> {
    let mut track = Vec::new();
    for chord in chords {
        for &p in *chord {
            track.push(on(0, p, 70));
        }
        for (i, &p) in chord.iter().enumerate() {
            track.push(off(if i == 0 { QUARTER } else { 0 }, p));
        }
    }
    track.push(end());
    track
}

fn tempo_track() -> Vec<TrackEvent<'static>> {
    vec![
        TrackEvent { delta: u28::new(0), kind: TrackEventKind::Meta(MetaMessage::Tempo(u24::new(500_000))) },
        TrackEvent { delta: u28::new(0), kind: TrackEventKind::Meta(MetaMessage::TrackName(b"tempo")) },
        end(),
    ]
}

fn quarters(pitches: &[u8]) -> Vec<(u8, u32)> {
    pitches.iter().map(|&p| (p, 2)).collect()
}

/// Random walk biased toward steps and small leaps, inside `lo..=hi`.
fn random_walk(rng: &mut ChaCha8Rng, len: usize, start: u8, lo: u8, hi: u8) -> Vec<(u8, u32)> {
    const STEPS: [i32; 15] = [-7, -5, -4, -3, -2, -2, -1, 0, 1, 2, 2, 3, 4, 5, 7];
    let mut pitch = start as i32;
    (0..len)
        .map(|_| {
            let step = STEPS[rng.random_range(0..STEPS.len())];
            let next = pitch + step;
            pitch = if next < lo as i32 || next > hi as i32 { pitch - step } else { next };
            (pitch as u8, rng.random_range(1..=4))
        })
        .collect()
}

fn write(dir: &Path, name: &str, format: Format, tracks: Vec<Vec<TrackEvent<'static>>>) {
    let mut smf = Smf::new(Header::new(format, Timing::Metrical(u15::new(QUARTER as u16))));
    smf.tracks = tracks;
    smf.save(dir.join(name)).expect("write fixture");
}

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/midi");
    std::fs::create_dir_all(&dir).unwrap();
    let single = Format::SingleTrack;

    // (C5, D5, G5, F5) under the MIDI-hardware octave numbering.
    write(&dir, "00_interval_example.mid", single, vec![melody_track(&quarters(&[60, 62, 67, 65]))]);
    write(
        &dir,
        "01_ode.mid",
        single,
        vec![melody_track(&quarters(&[
            64, 64, 65, 67, 67, 65, 64, 62, 60, 60, 62, 64, 64, 62, 62, 64, 64, 65, 67, 67, 65, 64, 62, 60, 60, 62, 64,
            62, 60, 60,
        ]))],
    );
    write(
        &dir,
        "02_twinkle.mid",
        single,
        vec![melody_track(&quarters(&[
            60, 60, 67, 67, 69, 69, 67, 65, 65, 64, 64, 62, 62, 60, 67, 67, 65, 65, 64, 64, 62, 67, 67, 65, 65, 64, 64,
            62,
        ]))],
    );
    write(
        &dir,
        "03_frere.mid",
        single,
        vec![melody_track(&quarters(&[
            65, 67, 69, 65, 65, 67, 69, 65, 69, 70, 72, 69, 70, 72, 72, 74, 72, 70, 69, 65, 72, 74, 72, 70, 69, 65, 65,
            60, 65, 65, 60, 65,
        ]))],
    );
    write(
        &dir,
        "04_chromatic.mid",
        single,
        vec![melody_track(&quarters(&(48..=72).chain((48..72).rev()).collect::<Vec<u8>>()))],
    );
    write(
        &dir,
        "05_low_register.mid",
        single,
        vec![melody_track(&quarters(&[
            24, 28, 31, 36, 31, 28, 26, 29, 33, 38, 33, 29, 31, 35, 38, 43, 38, 35, 36, 24,
        ]))],
    );
    write(
        &dir,
        "06_high_register.mid",
        single,
        vec![melody_track(&quarters(&[
            100, 103, 107, 108, 112, 115, 119, 120, 119, 115, 112, 108, 106, 110, 113, 118, 121, 118, 113, 110,
        ]))],
    );
    // Block chords: only the top voice should survive ingestion.
    write(
        &dir,
        "07_chorale.mid",
        single,
        vec![chord_track(&[
            &[48, 55, 64, 72],
            &[53, 57, 65, 72],
            &[55, 59, 67, 74],
            &[48, 55, 64, 76],
            &[57, 60, 64, 77],
            &[53, 60, 65, 77],
            &[55, 62, 67, 74],
            &[48, 55, 64, 72],
        ])],
    );
    // Format 1: tempo track, melody, bass line.
    write(
        &dir,
        "08_duet.mid",
        Format::Parallel,
        vec![
            tempo_track(),
            melody_track(&quarters(&[72, 74, 76, 77, 79, 77, 76, 74, 72, 71, 72, 74, 71, 67, 72])),
            melody_track(&[(48, 4), (53, 4), (55, 4), (48, 4), (43, 4), (48, 8)]),
        ],
    );

    let mut rng = ChaCha8Rng::seed_from_u64(2018);
    for i in 0..12 {
        let (lo, hi) = match i % 3 {
            0 => (48u8, 84u8),
            1 => (36, 72),
            _ => (60, 96),
        };
        let start = rng.random_range(lo + 6..=hi - 6);
        let len = rng.random_range(24..=64);
        let notes = random_walk(&mut rng, len, start, lo, hi);
        write(&dir, &format!("{:02}_walk.mid", 10 + i), single, vec![melody_track(&notes)]);
    }
    println!("wrote fixtures to {}", dir.display());
}
