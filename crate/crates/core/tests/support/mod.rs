//! Helpers shared by the integration tests: independent oracles and
//! fixture access. Also compiled into the CLI acceptance suite.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;

use midly::{MidiMessage, Smf, TrackEventKind};
use music_embed::matrix::Matrix;
use music_embed::midi::melodies_from_smf;
use music_embed::seqmodel::{init_parameters, loss, loss_and_gradients, Model};
use music_embed::Vocabulary;
use music_embed::{NoteEvent, PitchSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use twofloat::TwoFloat;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/midi")
}

pub fn fixture_paths() -> Vec<PathBuf> {
    let mut paths: Vec<_> = std::fs::read_dir(fixture_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
}

/// Every melody in the fixture corpus, in file order.
pub fn fixture_pieces() -> Vec<PitchSequence> {
    fixture_paths()
        .iter()
        .flat_map(|p| {
            let bytes = std::fs::read(p).unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            melodies_from_smf(&bytes, &name).unwrap()
        })
        .map(|m| m.unwrap().sequence)
        .collect()
}

/// Minimal SMF container around raw track bodies, 480 ticks per quarter.
pub fn smf(format: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
    let mut out = b"MThd".to_vec();
    out.extend(6u32.to_be_bytes());
    out.extend(format.to_be_bytes());
    out.extend((tracks.len() as u16).to_be_bytes());
    out.extend(480u16.to_be_bytes());
    for t in tracks {
        out.extend(b"MTrk");
        out.extend((t.len() as u32).to_be_bytes());
        out.extend(t);
    }
    out
}

pub fn with_eot(mut events: Vec<u8>) -> Vec<u8> {
    events.extend([0x00, 0xFF, 0x2F, 0x00]);
    events
}

/// Format 0: running status throughout, velocity-0 and explicit note-offs.
pub fn running_status_file() -> (Vec<u8>, Vec<Vec<NoteEvent>>) {
    let bytes = smf(
        0,
        &[with_eot(vec![
            0x00, 0x90, 60, 64, // on C
            0x83, 0x60, 60, 0, // running status, velocity 0 ends C at 480
            0x00, 62, 70, // running status on D
            0x83, 0x60, 0x80, 62, 0, // explicit off at 960
            0x00, 0x90, 64, 80, // on E
            0x60, 64, 0, // running status off after 96 ticks
        ])],
    );
    let expected = vec![vec![NoteEvent::new(60, 0, 480), NoteEvent::new(62, 480, 480), NoteEvent::new(64, 960, 96)]];
    (bytes, expected)
}

/// Format 1: tempo track, a melody on channel 0, a two-voice line on channel 1.
pub fn multi_track_file() -> (Vec<u8>, Vec<Vec<NoteEvent>>) {
    let tempo = with_eot(vec![0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20]);
    let melody = with_eot(vec![
        0x00, 0xC0, 0x00, // program change, one data byte
        0x00, 0x90, 72, 90, 0x81, 0x70, 0x80, 72, 64, // 240 ticks
        0x00, 0x90, 74, 90, 0x81, 0x70, 74, 0, // vel-0 off
        0x00, 0xB0, 64, 127, // controller between notes
        0x00, 0x90, 76, 90, 0x83, 0x60, 0x80, 76, 0,
    ]);
    let bass = with_eot(vec![
        0x00, 0x91, 48, 80, 0x00, 55, 80, // two voices on channel 1
        0x87, 0x40, 48, 0, 0x00, 55, 0, // both end at 960
        0x00, 0x91, 43, 80, 0x87, 0x40, 0x81, 43, 0,
    ]);
    let expected = vec![
        vec![],
        vec![NoteEvent::new(72, 0, 240), NoteEvent::new(74, 240, 240), NoteEvent::new(76, 480, 480)],
        vec![NoteEvent::new(48, 0, 960), NoteEvent::new(55, 0, 960), NoteEvent::new(43, 960, 960)],
    ];
    (smf(1, &[tempo, melody, bass]), expected)
}

/// Notes as midly sees them, paired first-in first-out per channel and key.
pub fn midly_notes(bytes: &[u8]) -> Vec<Vec<NoteEvent>> {
    let smf = Smf::parse(bytes).expect("midly accepts the file");
    smf.tracks
        .iter()
        .map(|track| {
            let mut open: HashMap<(u8, u8), VecDeque<u64>> = HashMap::new();
            let mut notes = Vec::new();
            let mut now = 0u64;
            let close = |notes: &mut Vec<NoteEvent>, key: u8, onset: u64, end: u64| {
                if end > onset {
                    notes.push(NoteEvent::new(key, onset, end - onset));
                }
            };
            for ev in track {
                now += u64::from(ev.delta.as_int());
                if let TrackEventKind::Midi { channel, message } = ev.kind {
                    let ch = channel.as_int();
                    match message {
                        MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                            open.entry((ch, key.as_int())).or_default().push_back(now)
                        }
                        MidiMessage::NoteOn { key, .. } | MidiMessage::NoteOff { key, .. } => {
                            if let Some(onset) = open.get_mut(&(ch, key.as_int())).and_then(|q| q.pop_front()) {
                                close(&mut notes, key.as_int(), onset, now);
                            }
                        }
                        _ => {}
                    }
                }
            }
            for ((_, key), onsets) in open {
                for onset in onsets {
                    close(&mut notes, key, onset, now);
                }
            }
            notes.sort_by_key(|n| (n.onset_tick, n.pitch, n.duration_tick));
            notes
        })
        .collect()
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| normal.sample(&mut rng)).collect())
}

pub fn tf(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

/// Squared distance accumulated in double-double from the f64 coordinates.
pub fn oracle_sq_dist(a: &[f64], b: &[f64]) -> TwoFloat {
    a.iter().zip(b).fold(tf(0.0), |acc, (&x, &y)| {
        let d = tf(x) - tf(y);
        acc + d * d
    })
}

/// `p(j|i)` over one row at precision `beta`, and its entropy in bits.
pub fn oracle_row(dist: &[TwoFloat], beta: TwoFloat) -> (Vec<TwoFloat>, TwoFloat) {
    let w: Vec<TwoFloat> = dist.iter().map(|&d| (-(d * beta)).exp()).collect();
    let sum = w.iter().fold(tf(0.0), |a, &b| a + b);
    let p: Vec<TwoFloat> = w.iter().map(|&x| x / sum).collect();
    let h = p.iter().filter(|&&x| x > tf(0.0)).fold(tf(0.0), |a, &x| a - x * x.log2());
    (p, h)
}

/// Plain bisection on β in double-double, run to exhaustion.
pub fn oracle_beta(dist: &[TwoFloat], perplexity: f64) -> TwoFloat {
    let target = tf(perplexity).log2();
    let (mut lo, mut hi) = (tf(0.0), tf(1.0));
    while oracle_row(dist, hi).1 > target {
        lo = hi;
        hi *= tf(2.0);
    }
    for _ in 0..120 {
        let mid = (lo + hi) / tf(2.0);
        if oracle_row(dist, mid).1 > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / tf(2.0)
}

/// Joint affinities straight from the definition, in double-double.
pub fn oracle_affinities(x: &Matrix<f64>, perplexity: f64) -> Vec<Vec<TwoFloat>> {
    let n = x.rows();
    let mut cond = vec![vec![tf(0.0); n]; n];
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let dist: Vec<TwoFloat> = others.iter().map(|&j| oracle_sq_dist(x.row(i), x.row(j))).collect();
        let (p, _) = oracle_row(&dist, oracle_beta(&dist, perplexity));
        for (&j, v) in others.iter().zip(p) {
            cond[i][j] = v;
        }
    }
    let denom = tf(2.0 * n as f64);
    (0..n).map(|i| (0..n).map(|j| (cond[i][j] + cond[j][i]) / denom).collect()).collect()
}

/// Three well separated Gaussian blobs of 15 points in 16 dimensions.
pub fn clusters(seed: u64) -> (Matrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let centres: Vec<Vec<f64>> = (0..3).map(|_| (0..16).map(|_| 8.0 * normal.sample(&mut rng)).collect()).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..15 {
            rows.push(centre.iter().map(|m| m + normal.sample(&mut rng)).collect::<Vec<_>>());
            labels.push(c);
        }
    }
    (Matrix::from_rows(&rows), labels)
}

/// Fraction of each point's k nearest map neighbours that share its label.
pub fn knn_purity(y: &Matrix<f64>, labels: &[usize], k: usize) -> f64 {
    let n = y.rows();
    let mut agree = 0;
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let dist = |j: usize| y.row(i).iter().zip(y.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        others.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)));
        agree += others[..k].iter().filter(|&&j| labels[j] == labels[i]).count();
    }
    agree as f64 / (n * k) as f64
}

pub const GRADIENT_STEP: f64 = 1e-5;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
/// Below this magnitude both derivatives count as zero; the finite
/// difference cannot resolve anything smaller than its rounding noise.
const ZERO_FLOOR: f64 = 1e-9;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < ZERO_FLOOR {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Model with every tensor, biases included, drawn from a wide range so
/// that no gate sits in a degenerate regime.
pub fn random_model(vocab: usize, dim: usize, hidden: usize, seed: u64) -> Model<f64> {
    let mut model: Model<f64> = init_parameters(&Vocabulary::from_tokens(0..vocab as i32), dim, hidden, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    for tensor in model.tensors_mut() {
        tensor.iter_mut().for_each(|w| *w = rng.random_range(-0.8..0.8));
    }
    model
}

pub fn worst_gradient_error(model: &Model<f64>, seq: &[usize]) -> (f64, String) {
    let (_, grads) = loss_and_gradients(model, seq).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|(n, g)| (n, g.to_vec())).collect();
    let mut worst = (0.0, String::new());
    let mut probe = model.clone();
    for (k, (name, g)) in analytic.iter().enumerate() {
        for i in 0..g.len() {
            let original = probe.tensors_mut()[k][i];
            probe.tensors_mut()[k][i] = original + GRADIENT_STEP;
            let plus = loss(&probe, seq).unwrap();
            probe.tensors_mut()[k][i] = original - GRADIENT_STEP;
            let minus = loss(&probe, seq).unwrap();
            probe.tensors_mut()[k][i] = original;
            let numeric = (plus - minus) / (2.0 * GRADIENT_STEP);
            let err = relative_error(g[i], numeric);
            if err > worst.0 {
                worst = (err, format!("{name}[{i}]: analytic {} numeric {numeric}", g[i]));
            }
        }
    }
    worst
}
