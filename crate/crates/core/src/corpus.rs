//! The three dataset variants and their vocabularies.
//!
//! * `control`: one token per note, the pitch itself.
//! * `db12`: every piece plus its transpositions up 1..=11 semitones.
//! * `interval`: signed semitone steps between consecutive notes.
//!
//! A sequence doubles as its own `(x, y)` pair array: the target for
//! position `i` is the token at `i + 1`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::midi::{MidiError, PitchSequence, MAX_PITCH};

/// A pitch (0..=127) or a signed interval (-127..=127), depending on the variant.
pub type Token = i32;

/// Number of transpositions per piece in the augmented variant, original included.
pub const TONALITIES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("corpus has no pieces")]
    EmptyCorpus,
    #[error("piece {source_id} spans {span} semitones and cannot be shifted by {shift} within 0..=127")]
    UntransposablePiece { source_id: String, shift: i32, span: i32 },
    #[error("shift {0} outside -127..=127")]
    ShiftOutOfRange(i32),
    #[error("pitch {0} outside 0..=127")]
    PitchOutOfRange(i32),
    #[error("token {token} not valid for {variant} corpus")]
    TokenOutOfRange { token: Token, variant: Variant },
    #[error("sequence must contain at least {min} tokens, found {len}")]
    EmptySequence { min: usize, len: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Midi(#[from] MidiError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Control,
    Db12,
    Interval,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Control, Variant::Db12, Variant::Interval];

    /// Whether tokens are absolute pitches (as opposed to intervals).
    pub fn is_note(self) -> bool {
        !matches!(self, Variant::Interval)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Control => "control",
            Variant::Db12 => "db12",
            Variant::Interval => "interval",
        }
    }

    fn token_range(self) -> std::ops::RangeInclusive<Token> {
        if self.is_note() {
            0..=MAX_PITCH
        } else {
            -MAX_PITCH..=MAX_PITCH
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected control, db12 or interval)"))
    }
}

/// Bijection between observed tokens and contiguous indices, sorted by token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    index_of: HashMap<Token, usize>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: impl IntoIterator<Item = Token>) -> Self {
        let tokens: Vec<Token> = tokens.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index_of = tokens.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        Self { tokens, index_of }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: Token) -> Option<usize> {
        self.index_of.get(&token).copied()
    }

    pub fn token(&self, index: usize) -> Token {
        self.tokens[index]
    }

    pub fn contains(&self, token: Token) -> bool {
        self.index_of.contains_key(&token)
    }

    pub fn is_superset_of(&self, other: &Vocabulary) -> bool {
        other.tokens.iter().all(|t| self.contains(*t))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingCorpus {
    variant: Variant,
    sequences: Vec<Vec<usize>>,
    vocabulary: Vocabulary,
}

impl TrainingCorpus {
    /// Indexes raw token sequences through a vocabulary of the observed tokens.
    ///
    /// Note variants need two tokens per sequence. Interval sequences may
    /// hold a single step (a two-note piece); such sequences contribute to
    /// the vocabulary but yield no training pair.
    pub fn from_token_sequences(variant: Variant, token_sequences: Vec<Vec<Token>>) -> Result<Self, CorpusError> {
        if token_sequences.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let min = if variant.is_note() { 2 } else { 1 };
        let range = variant.token_range();
        for seq in &token_sequences {
            if seq.len() < min {
                return Err(CorpusError::EmptySequence { min, len: seq.len() });
            }
            if let Some(&token) = seq.iter().find(|t| !range.contains(t)) {
                return Err(CorpusError::TokenOutOfRange { token, variant });
            }
        }
        let vocabulary = Vocabulary::from_tokens(token_sequences.iter().flatten().copied());
        let sequences = token_sequences.iter().map(|s| s.iter().map(|&t| vocabulary.index_of[&t]).collect()).collect();
        Ok(Self { variant, sequences, vocabulary })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn sequences(&self) -> &[Vec<usize>] {
        &self.sequences
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn token_sequences(&self) -> Vec<Vec<Token>> {
        self.sequences.iter().map(|s| s.iter().map(|&i| self.vocabulary.token(i)).collect()).collect()
    }

    pub fn token_count(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    /// Line-oriented text form: a `#variant=<name>` header, then one
    /// sequence per line as space-separated token values.
    pub fn to_text(&self) -> String {
        let mut out = format!("#variant={}\n", self.variant);
        for seq in self.token_sequences() {
            let line: Vec<String> = seq.iter().map(Token::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(CorpusError::Parse { line: 1, message: "empty file, expected `#variant=` header".into() })?;
        let variant = header
            .strip_prefix("#variant=")
            .ok_or_else(|| CorpusError::Parse {
                line: 1,
                message: format!("expected `#variant=<control|db12|interval>`, found `{header}`"),
            })?
            .parse::<Variant>()
            .map_err(|message| CorpusError::Parse { line: 1, message })?;
        let mut seqs = Vec::new();
        for (i, line) in lines {
            let seq = line
                .split(' ')
                .map(|tok| {
                    tok.parse::<Token>()
                        .map_err(|e| CorpusError::Parse { line: i + 1, message: format!("bad token `{tok}`: {e}") })
                })
                .collect::<Result<Vec<_>, _>>()?;
            seqs.push(seq);
        }
        Self::from_token_sequences(variant, seqs)
    }

    /// Recovers the pitch pieces stored in a control corpus.
    pub fn pieces(&self) -> Result<Vec<PitchSequence>, CorpusError> {
        if self.variant != Variant::Control {
            return Err(CorpusError::Parse {
                line: 1,
                message: format!("expected a control corpus of pieces, found {}", self.variant),
            });
        }
        self.token_sequences()
            .into_iter()
            .enumerate()
            .map(|(i, p)| PitchSequence::new(p, format!("piece{i}")).map_err(Into::into))
            .collect()
    }
}

pub fn build_control(pieces: &[PitchSequence]) -> Result<TrainingCorpus, CorpusError> {
    TrainingCorpus::from_token_sequences(Variant::Control, pieces.iter().map(|p| p.pitches().to_vec()).collect())
}

/// Shifts every pitch by `shift` semitones, folding the shift by an octave
/// when the result would leave the MIDI range.
pub fn transpose(piece: &PitchSequence, shift: i32) -> Result<PitchSequence, CorpusError> {
    if !(-MAX_PITCH..=MAX_PITCH).contains(&shift) {
        return Err(CorpusError::ShiftOutOfRange(shift));
    }
    let (lo, hi) = (piece.min_pitch(), piece.max_pitch());
    let effective = if hi + shift > MAX_PITCH {
        shift - 12
    } else if lo + shift < 0 {
        shift + 12
    } else {
        shift
    };
    if hi + effective > MAX_PITCH || lo + effective < 0 {
        return Err(CorpusError::UntransposablePiece {
            source_id: piece.source_id().to_string(),
            shift,
            span: hi - lo,
        });
    }
    let pitches = piece.pitches().iter().map(|p| p + effective).collect();
    Ok(PitchSequence::new(pitches, piece.source_id())?)
}

/// All twelve transpositions of a piece (shift 0 first), or the first failure.
pub fn all_tonalities(piece: &PitchSequence) -> Result<Vec<PitchSequence>, CorpusError> {
    (0..TONALITIES as i32).map(|s| transpose(piece, s)).collect()
}

/// Augmented variant: each piece followed by its eleven upward
/// transpositions. Pieces that cannot be moved to every tonality are
/// left out entirely so the corpus stays exactly twelve times the
/// transposable piece count.
pub fn build_db12(pieces: &[PitchSequence]) -> Result<TrainingCorpus, CorpusError> {
    if pieces.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let seqs: Vec<Vec<Token>> =
        pieces.iter().filter_map(|p| all_tonalities(p).ok()).flatten().map(|p| p.pitches().to_vec()).collect();
    TrainingCorpus::from_token_sequences(Variant::Db12, seqs)
}

pub fn to_intervals(piece: &[i32]) -> Result<Vec<Token>, CorpusError> {
    if piece.len() < 2 {
        return Err(CorpusError::EmptySequence { min: 2, len: piece.len() });
    }
    Ok(piece.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Inverse of [`to_intervals`]. An empty interval list yields `[start]`.
pub fn from_intervals(intervals: &[Token], start: i32) -> Result<Vec<i32>, CorpusError> {
    if !(0..=MAX_PITCH).contains(&start) {
        return Err(CorpusError::PitchOutOfRange(start));
    }
    let mut out = Vec::with_capacity(intervals.len() + 1);
    out.push(start);
    let mut pitch = start;
    for &step in intervals {
        pitch += step;
        if !(0..=MAX_PITCH).contains(&pitch) {
            return Err(CorpusError::PitchOutOfRange(pitch));
        }
        out.push(pitch);
    }
    Ok(out)
}

pub fn build_interval(pieces: &[PitchSequence]) -> Result<TrainingCorpus, CorpusError> {
    let seqs = pieces.iter().map(|p| to_intervals(p.pitches())).collect::<Result<Vec<_>, _>>()?;
    TrainingCorpus::from_token_sequences(Variant::Interval, seqs)
}

pub fn build(variant: Variant, pieces: &[PitchSequence]) -> Result<TrainingCorpus, CorpusError> {
    match variant {
        Variant::Control => build_control(pieces),
        Variant::Db12 => build_db12(pieces),
        Variant::Interval => build_interval(pieces),
    }
}
