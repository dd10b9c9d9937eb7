//! Phoneme scripts: one `symbol duration_ms` pair per line.

use singsynth_core::features::{control_from_segments, Alphabet, ControlTrack, HOP_SECONDS};
use singsynth_core::{Error, Result};

/// Parses a script into `(phoneme id, frames)` segments. Blank lines and
/// `#` comments are skipped; durations round to the nearest frame.
pub fn parse_script(text: &str, alphabet: &Alphabet) -> Result<Vec<(usize, usize)>> {
    let hop_ms = HOP_SECONDS * 1000.0;
    let mut segments = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Config(format!("script line {}: {m}", i + 1));
        let mut parts = line.split_whitespace();
        let (Some(symbol), Some(ms), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected 'symbol duration_ms'"));
        };
        let id = alphabet.index_of(symbol)?;
        let ms: f64 = ms.parse().map_err(|_| bad("duration is not a number"))?;
        if !(ms.is_finite() && ms > 0.0) {
            return Err(bad("duration must be positive"));
        }
        let frames = (ms / hop_ms).round() as usize;
        if frames == 0 {
            return Err(bad("duration shorter than half a frame"));
        }
        segments.push((id, frames));
    }
    if segments.is_empty() {
        return Err(Error::Config("script has no phonemes".into()));
    }
    Ok(segments)
}

pub fn script_control(text: &str, alphabet: &Alphabet) -> Result<ControlTrack> {
    let segments = parse_script(text, alphabet)?;
    let edge = alphabet.silence_id().unwrap_or(0);
    Ok(control_from_segments(&segments, edge, alphabet.len())?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabet() -> Alphabet {
        Alphabet::new(["sil", "a", "b"].map(String::from).to_vec()).unwrap()
    }

    #[test]
    fn frames_from_durations() {
        let text = "sil 100\na 52\n# comment\n\nb 48 # trailing\na 50\nsil 100\n";
        let segs = parse_script(text, &alphabet()).unwrap();
        assert_eq!(segs, vec![(0, 20), (1, 10), (2, 10), (1, 10), (0, 20)]);
        let control = script_control(text, &alphabet()).unwrap();
        assert_eq!(control.len(), 70);
        assert_eq!(control.current_phoneme(25), 1);
        assert_eq!(control.current_phoneme(69), 0);
    }

    #[test]
    fn rejects_bad_lines() {
        let a = alphabet();
        assert!(matches!(parse_script("x 10", &a), Err(Error::UnknownSymbol(_))));
        for text in ["a", "a ten", "a -5", "a 2", "", "a 10 extra"] {
            assert!(parse_script(text, &a).unwrap_err().is_config(), "{text}");
        }
    }
}
