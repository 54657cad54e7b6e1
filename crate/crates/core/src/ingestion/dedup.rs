//! Corpus de-duplication by note-sequence and lyric-sequence hashes.

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::representation::AlignedSong;

pub type SongKey = ([u8; 32], [u8; 32]);

pub fn note_hash(song: &AlignedSong) -> [u8; 32] {
    let mut h = Sha256::new();
    for n in &song.notes {
        h.update(n.onset().to_le_bytes());
        h.update([n.pitch]);
        h.update(n.duration.to_le_bytes());
        h.update([n.tempo.index() as u8]);
    }
    h.finalize().into()
}

pub fn lyric_hash(song: &AlignedSong) -> [u8; 32] {
    let mut h = Sha256::new();
    for w in &song.words {
        h.update(w.text.as_bytes());
        h.update([0]);
    }
    h.finalize().into()
}

pub fn song_key(song: &AlignedSong) -> SongKey {
    (note_hash(song), lyric_hash(song))
}

/// Indices of the first occurrence of each distinct key, in input order.
pub fn first_occurrences(keys: impl IntoIterator<Item = SongKey>) -> Vec<usize> {
    let mut seen = HashSet::new();
    keys.into_iter()
        .enumerate()
        .filter_map(|(i, k)| seen.insert(k).then_some(i))
        .collect()
}

/// Keeps the first song for every distinct (notes, lyrics) hash pair.
pub fn dedup_corpus(songs: Vec<AlignedSong>) -> Vec<AlignedSong> {
    let keep: HashSet<usize> = first_occurrences(songs.iter().map(song_key)).into_iter().collect();
    songs
        .into_iter()
        .enumerate()
        .filter_map(|(i, s)| keep.contains(&i).then_some(s))
        .collect()
}
