use crate::corpus::{Token, Variant};
use crate::midi::MAX_PITCH;

use super::AnalysisError;

/// Pitch classes spelled with sharps only.
pub const NOTE_NAMES: [&str; 12] = ["C", "C♯", "D", "D♯", "E", "F", "F♯", "G", "G♯", "A", "A♯", "B"];

/// Octave numbering of MIDI hardware: notes 0–11 are octave 0, so 60 is "C5".
pub fn note_name(pitch: i32) -> Result<String, AnalysisError> {
    if !(0..=MAX_PITCH).contains(&pitch) {
        return Err(AnalysisError::PitchOutOfRange(pitch));
    }
    Ok(format!("{}{}", NOTE_NAMES[(pitch % 12) as usize], pitch / 12))
}

/// Inverse of [`note_name`]. Accepts `#` for `♯`; flats are not accepted.
pub fn parse_note_name(name: &str) -> Result<i32, AnalysisError> {
    let bad = || AnalysisError::BadQuery {
        input: name.to_string(),
        kind: "a note name",
        hint: format!(
            "expected a pitch class ({}) followed by an octave 0-10, from C0 (0) to G10 (127)",
            NOTE_NAMES.join(" ")
        ),
    };
    let normalized = name.trim().replace('#', "♯");
    let split = normalized.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
    let (class, octave) = normalized.split_at(split);
    let class_index = NOTE_NAMES.iter().position(|n| n.eq_ignore_ascii_case(class)).ok_or_else(bad)? as i32;
    let octave: i32 = octave.parse().map_err(|_| bad())?;
    let pitch = octave.checked_mul(12).and_then(|p| p.checked_add(class_index)).ok_or_else(bad)?;
    if !(0..=MAX_PITCH).contains(&pitch) {
        return Err(bad());
    }
    Ok(pitch)
}

/// Display label of a token: a note name for note variants, a signed
/// integer for intervals.
pub fn token_label(token: Token, variant: Variant) -> String {
    if variant.is_note() {
        note_name(token).unwrap_or_else(|_| token.to_string())
    } else {
        token.to_string()
    }
}

/// Resolves a user query. Note variants take a note name or a raw pitch
/// number; the interval variant takes a signed integer.
pub fn parse_query(input: &str, variant: Variant) -> Result<Token, AnalysisError> {
    let trimmed = input.trim();
    if let Ok(value) = trimmed.parse::<i32>() {
        if variant.is_note() && !(0..=MAX_PITCH).contains(&value) {
            return Err(AnalysisError::PitchOutOfRange(value));
        }
        return Ok(value);
    }
    if variant.is_note() {
        parse_note_name(trimmed)
    } else {
        Err(AnalysisError::BadQuery {
            input: input.to_string(),
            kind: "an interval",
            hint: "expected a signed semitone count such as 3 or -2".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn reference_names() {
        assert_eq!(note_name(60).unwrap(), "C5");
        assert_eq!(note_name(0).unwrap(), "C0");
        assert_eq!(note_name(127).unwrap(), "G10");
        assert_eq!(note_name(70).unwrap(), "A♯5");
        assert_eq!(note_name(121).unwrap(), "C♯10");
        assert_eq!(note_name(128), Err(AnalysisError::PitchOutOfRange(128)));
        assert_eq!(note_name(-1), Err(AnalysisError::PitchOutOfRange(-1)));
    }

    #[test]
    fn naming_is_a_bijection() {
        let names: HashSet<String> = (0..=127).map(|p| note_name(p).unwrap()).collect();
        assert_eq!(names.len(), 128);
        for p in 0..=127 {
            assert_eq!(parse_note_name(&note_name(p).unwrap()).unwrap(), p);
        }
        assert!(names.iter().all(|n| !n.contains('b') && !n.contains('♭')));
    }

    #[test]
    fn parse_accepts_ascii_sharp() {
        assert_eq!(parse_note_name("C#5").unwrap(), 61);
        assert_eq!(parse_note_name("a♯9").unwrap(), 118);
    }

    #[test]
    fn parse_rejects_unknown_names() {
        for bad in ["H9", "C", "Db5", "G11", "", "5"] {
            let err = parse_note_name(bad).unwrap_err();
            assert!(matches!(err, AnalysisError::BadQuery { .. }), "{bad}");
        }
        let msg = parse_note_name("H9").unwrap_err().to_string();
        assert!(msg.contains("C♯") && msg.contains("G10"));
    }

    #[test]
    fn queries() {
        assert_eq!(parse_query("C5", Variant::Control).unwrap(), 60);
        assert_eq!(parse_query("60", Variant::Db12).unwrap(), 60);
        assert_eq!(parse_query("3", Variant::Interval).unwrap(), 3);
        assert_eq!(parse_query("-2", Variant::Interval).unwrap(), -2);
        assert!(parse_query("C5", Variant::Interval).is_err());
        assert_eq!(parse_query("200", Variant::Control), Err(AnalysisError::PitchOutOfRange(200)));
        assert_eq!(token_label(60, Variant::Control), "C5");
        assert_eq!(token_label(-2, Variant::Interval), "-2");
    }
}
