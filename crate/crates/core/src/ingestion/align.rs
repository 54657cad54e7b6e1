//! Word-to-note alignment.

use super::lyrics::LyricWord;
use super::{RejectReason, Rejection};
use crate::representation::{AlignedSong, Note, TICKS_PER_BAR};

/// Index of the note whose onset is closest to `tick`; ties go to the earlier note.
fn nearest_note(notes: &[Note], tick: u32) -> usize {
    let i = notes.partition_point(|n| n.onset() < tick);
    if i == 0 {
        return 0;
    }
    if i == notes.len() {
        return i - 1;
    }
    if tick - notes[i - 1].onset() <= notes[i].onset() - tick {
        i - 1
    } else {
        i
    }
}

/// Anchors each word at its nearest note and gives every following note to
/// the word anchored before it.
///
/// When several words share a nearest note only the first is kept. Notes
/// before the first anchor carry no lyric and are dropped; the song is then
/// shifted left by whole bars so it starts in bar 0.
pub fn align_lyrics_melody(words: &[LyricWord], notes: &[Note]) -> Result<AlignedSong, Rejection> {
    if words.is_empty() || notes.is_empty() {
        return Err(Rejection::new(RejectReason::DegenerateAlignment, "no words or no notes to align"));
    }
    let mut anchors: Vec<(usize, usize)> = Vec::new();
    for (wi, w) in words.iter().enumerate() {
        let ni = nearest_note(notes, w.tick);
        if anchors.last().is_some_and(|&(_, last)| ni <= last) {
            continue;
        }
        anchors.push((wi, ni));
    }
    if words.len() > 1 && anchors.len() == 1 {
        return Err(Rejection::new(
            RejectReason::DegenerateAlignment,
            format!("all {} words collapse onto one note", words.len()),
        ));
    }
    let first_note = anchors[0].1;
    let shift = notes[first_note].bar as u32 * TICKS_PER_BAR;
    let kept_notes: Vec<Note> = notes[first_note..]
        .iter()
        .map(|n| Note::at(n.onset() - shift, n.pitch, n.duration, n.tempo))
        .collect();
    let mut word_of_note = Vec::with_capacity(kept_notes.len());
    for (k, &(_, start)) in anchors.iter().enumerate() {
        let end = anchors.get(k + 1).map_or(notes.len(), |a| a.1);
        word_of_note.extend(std::iter::repeat_n(k, end - start));
    }
    let kept_words = anchors.iter().map(|&(wi, _)| words[wi].word.clone()).collect();
    AlignedSong::new(kept_words, kept_notes, word_of_note)
        .map_err(|e| Rejection::new(RejectReason::Capacity, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Stress;
    use crate::representation::{TempoClass, Word};

    fn lw(text: &str, tick: u32) -> LyricWord {
        LyricWord { word: Word::new(text, vec![Stress::Primary]), tick }
    }

    fn notes(onsets: &[u32]) -> Vec<Note> {
        onsets.iter().map(|&t| Note::at(t, 60, 240, TempoClass::Andante)).collect()
    }

    #[test]
    fn one_to_many() {
        let song = align_lyrics_melody(&[lw("a", 0), lw("b", 960)], &notes(&[0, 480, 960, 1440])).unwrap();
        assert_eq!(song.word_of_note, vec![0, 0, 1, 1]);
    }

    #[test]
    fn single_pair() {
        let song = align_lyrics_melody(&[lw("a", 0)], &notes(&[0])).unwrap();
        assert_eq!(song.word_of_note, vec![0]);
    }

    #[test]
    fn collapse_is_degenerate() {
        let err = align_lyrics_melody(&[lw("a", 0), lw("b", 30)], &notes(&[0])).unwrap_err();
        assert_eq!(err.reason, RejectReason::DegenerateAlignment);
    }

    #[test]
    fn later_word_on_same_note_dropped() {
        let song = align_lyrics_melody(&[lw("a", 0), lw("b", 100), lw("c", 480)], &notes(&[0, 480])).unwrap();
        let texts: Vec<&str> = song.words.iter().map(|w| w.text.as_str()).collect();
        assert_eq!(texts, vec!["a", "c"]);
    }

    #[test]
    fn nearest_ties_prefer_earlier() {
        let ns = notes(&[0, 480]);
        assert_eq!(nearest_note(&ns, 240), 0);
        assert_eq!(nearest_note(&ns, 241), 1);
        assert_eq!(nearest_note(&ns, 9999), 1);
    }

    #[test]
    fn leading_notes_dropped_and_shifted() {
        let song = align_lyrics_melody(&[lw("a", 1920 * 2), lw("b", 1920 * 2 + 480)], &notes(&[0, 480, 3840, 4320])).unwrap();
        assert_eq!(song.notes.len(), 2);
        assert_eq!(song.notes[0].onset(), 0);
        assert_eq!(song.word_of_note, vec![0, 1]);
    }
}
