//! Seeded generators for synthetic songs and toy MIDI files.

use std::ops::RangeInclusive;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusSong;
use crate::features::{syllable_stress, PronouncingDictionary};
use crate::ingestion::midi::{LyricEvent, RawNote, RawSong, TempoEvent, TimeSignature};
use crate::ingestion::{write_midi, WriteOptions};
use crate::phrase::{segment_song, PhraseConfig};
use crate::representation::{tempo_class, AlignedSong, Note, Word};

/// A small pronouncing dictionary in CMU format.
pub const TOY_DICTIONARY: &str = ";;; toy pronouncing dictionary
A  AH0
AFTERNOON  AE2 F T ER0 N UW1 N
APPLE  AE1 P AH0 L
BANANA  B AH0 N AE1 N AH0
BEAUTIFUL  B Y UW1 T AH0 F AH0 L
BUTTERFLY  B AH1 T ER0 F L AY2
CAROLINA  K EH2 R AH0 L AY1 N AH0
CELEBRATE  S EH1 L AH0 B R EY2 T
DANCING  D AE1 N S IH0 NG
DON'T  D OW1 N T
DREAM  D R IY1 M
ELEPHANT  EH1 L AH0 F AH0 N T
EVERYBODY  EH1 V R IY0 B AA2 D IY0
FOREVER  F ER0 EH1 V ER0
GENTLE  JH EH1 N T AH0 L
GOLDEN  G OW1 L D AH0 N
HAPPY  HH AE1 P IY0
HAVE  HH AE1 V
HEART  HH AA1 R T
HELLO  HH AH0 L OW1
HOLIDAY  HH AA1 L AH0 D EY2
HOME  HH OW1 M
IN  IH0 N
LA  L AA1
LIGHT  L AY1 T
LOVE  L AH1 V
MEMORY  M EH1 M ER0 IY0
MORNING  M AO1 R N IH0 NG
MOUNTAIN  M AW1 N T AH0 N
MUSIC  M Y UW1 Z IH0 K
MY  M AY1
NIGHT  N AY1 T
OCEAN  OW1 SH AH0 N
ORANGE  AO1 R AH0 N JH
RAIN  R EY1 N
READ  R IY1 D
READ(1)  R EH1 D
REMEMBER  R IH0 M EH1 M B ER0
RIVER  R IH1 V ER0
ROAD  R OW1 D
SHADOW  SH AE1 D OW0
SINGING  S IH1 NG IH0 NG
SKY  S K AY1
SLOWLY  S L OW1 L IY0
STARS  S T AA1 R Z
SUMMER  S AH1 M ER0
SUNSHINE  S AH1 N SH AY2 N
THE  DH AH0
TIME  T AY1 M
TOGETHER  T AH0 G EH1 DH ER0
TOMORROW  T AH0 M AA1 R OW2
UNDERSTAND  AH2 N D ER0 S T AE1 N D
WALK  W AO1 K
WATERMELON  W AO1 T ER0 M EH2 L AH0 N
WE  W IY1
WINDOW  W IH1 N D OW0
WONDER  W AH1 N D ER0
WORLD  W ER1 L D
YESTERDAY  Y EH1 S T ER0 D EY2
";

pub fn toy_dictionary() -> &'static PronouncingDictionary {
    static DICT: OnceLock<PronouncingDictionary> = OnceLock::new();
    DICT.get_or_init(|| PronouncingDictionary::parse(TOY_DICTIONARY.as_bytes()).expect("toy dictionary parses"))
}

/// Dictionary words used for generated lyrics, with their stress.
fn word_pool() -> &'static [Word] {
    static POOL: OnceLock<Vec<Word>> = OnceLock::new();
    POOL.get_or_init(|| {
        TOY_DICTIONARY
            .lines()
            .filter(|l| !l.starts_with(";;;") && !l.trim().is_empty())
            .map(|l| l.split_whitespace().next().unwrap().to_lowercase())
            .filter(|w| !w.contains('(') && w != "la")
            .map(|w| {
                let stress = syllable_stress(&w, toy_dictionary()).unwrap();
                Word::new(w, stress.0)
            })
            .collect()
    })
}

const MARKS: [&str; 5] = [",", ".", "!", "?", ";"];
const DURATIONS: [u16; 10] = [120, 160, 240, 240, 320, 360, 480, 480, 720, 960];
const BPMS: [f64; 7] = [56.0, 63.0, 70.0, 96.0, 112.0, 132.0, 176.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SongShape {
    pub words: RangeInclusive<usize>,
    /// Chance that a word spans 2 or 3 notes.
    pub multi_note_prob: f64,
    /// Chance that a word carries trailing punctuation.
    pub punct_prob: f64,
    /// Chance of a rest after a note.
    pub rest_prob: f64,
    /// Draw lyrics without replacement from the word pool while possible.
    pub distinct_words: bool,
}

impl Default for SongShape {
    fn default() -> Self {
        SongShape {
            words: 12..=60,
            multi_note_prob: 0.2,
            punct_prob: 0.12,
            rest_prob: 0.1,
            distinct_words: false,
        }
    }
}

/// A random valid song with phrase IDs from the default recognizer.
pub fn random_song<R: Rng>(rng: &mut R, shape: &SongShape) -> AlignedSong {
    random_corpus_song(rng, shape).song
}

pub fn random_corpus_song<R: Rng>(rng: &mut R, shape: &SongShape) -> CorpusSong {
    let bpm = BPMS[rng.random_range(0..BPMS.len())];
    let tempo = tempo_class(bpm).unwrap();
    let n_words = rng.random_range(shape.words.clone());
    let pool = word_pool();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);

    let mut words = Vec::with_capacity(n_words);
    let mut notes = Vec::new();
    let mut word_of_note = Vec::new();
    let mut t = 0u32;
    let mut pitch: i32 = rng.random_range(55..66);
    for w in 0..n_words {
        let base = if shape.distinct_words {
            &pool[order[w % order.len()]]
        } else {
            &pool[rng.random_range(0..pool.len())]
        };
        let mut word = base.clone();
        if rng.random_bool(shape.punct_prob) {
            word.marks = MARKS[rng.random_range(0..MARKS.len())].to_string();
        }
        words.push(word);
        let k = if rng.random_bool(shape.multi_note_prob) { rng.random_range(2..=3) } else { 1 };
        for _ in 0..k {
            pitch = (pitch + rng.random_range(-4..=4)).clamp(50, 70);
            let d = DURATIONS[rng.random_range(0..DURATIONS.len())];
            notes.push(Note::at(t, pitch as u8, d, tempo));
            word_of_note.push(w);
            t += d as u32;
            if rng.random_bool(shape.rest_prob) {
                t += if rng.random_bool(0.5) { 240 } else { 480 };
            }
        }
    }
    let song = AlignedSong::new(words, notes, word_of_note).expect("generated song is valid");
    let (song, _) = segment_song(&song, &PhraseConfig::default()).expect("phrase count within cap");
    CorpusSong { id: String::new(), bpm, song }
}

/// Lyric events for a song: one per word, or a hyphenated pair of
/// fragments when the word spans several notes.
pub fn lyric_events(song: &AlignedSong) -> Vec<LyricEvent> {
    let mut events = Vec::new();
    for (w, r) in song.word_note_ranges().into_iter().enumerate() {
        let word = &song.words[w];
        let text = format!("{}{}", word.text, word.marks);
        let split = word.text.len() / 2;
        if r.len() >= 2 && split > 0 {
            events.push(LyricEvent { tick: song.notes[r.start].onset(), text: format!("{}-", &text[..split]) });
            events.push(LyricEvent { tick: song.notes[r.start + 1].onset(), text: format!("{} ", &text[split..]) });
        } else {
            events.push(LyricEvent { tick: song.notes[r.start].onset(), text: format!("{text} ") });
        }
    }
    events
}

pub fn song_to_raw(song: &AlignedSong, bpm: f64) -> RawSong {
    RawSong {
        tracks: vec![song
            .notes
            .iter()
            .map(|n| RawNote { onset: n.onset(), pitch: n.pitch, duration: n.duration as u32, velocity: 96 })
            .collect()],
        tempos: vec![TempoEvent { tick: 0, micros_per_quarter: (60_000_000.0 / bpm).round() as u32 }],
        time_signatures: vec![TimeSignature { tick: 0, numerator: 4, denominator: 4 }],
        lyrics: lyric_events(song),
        lyric_track: Some(0),
        warnings: Vec::new(),
    }
}

/// Shape of the generated toy files.
pub fn toy_shape() -> SongShape {
    SongShape {
        words: 36..=52,
        distinct_words: true,
        ..SongShape::default()
    }
}

/// Fifty named MIDI files: 44 clean songs, two exact duplicates, and one
/// file each for the too-short, 3/4, tempo-change and repeated-lyric rules.
pub fn toy_midi_corpus(seed: u64) -> Vec<(String, Vec<u8>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let divisions = [480u16, 96, 384, 240];
    let mut files = Vec::with_capacity(50);
    for i in 0..44 {
        let cs = random_corpus_song(&mut rng, &toy_shape());
        let opts = WriteOptions { division: divisions[i % 4], running_status: i % 2 == 1 };
        files.push((format!("song_{i:03}.mid"), write_midi(&song_to_raw(&cs.song, cs.bpm), opts)));
    }
    files.push(("song_044.mid".into(), files[3].1.clone()));
    files.push(("song_045.mid".into(), files[17].1.clone()));

    let short = random_corpus_song(&mut rng, &SongShape { words: 8..=10, multi_note_prob: 0.0, rest_prob: 0.0, ..toy_shape() });
    let mut raw = song_to_raw(&short.song, short.bpm);
    raw.tracks[0].retain(|n| n.onset < 7 * 1920);
    raw.lyrics.retain(|l| l.tick < 7 * 1920);
    files.push(("short_046.mid".into(), write_midi(&raw, WriteOptions::default())));

    let cs = random_corpus_song(&mut rng, &toy_shape());
    let mut raw = song_to_raw(&cs.song, cs.bpm);
    raw.time_signatures[0].numerator = 3;
    files.push(("waltz_047.mid".into(), write_midi(&raw, WriteOptions::default())));

    let cs = random_corpus_song(&mut rng, &toy_shape());
    let mut raw = song_to_raw(&cs.song, cs.bpm);
    raw.tempos.push(TempoEvent { tick: 4 * 1920, micros_per_quarter: raw.tempos[0].micros_per_quarter / 2 });
    files.push(("tempo_048.mid".into(), write_midi(&raw, WriteOptions::default())));

    let cs = random_corpus_song(&mut rng, &toy_shape());
    let mut raw = song_to_raw(&cs.song, cs.bpm);
    for l in &mut raw.lyrics {
        l.text = "la ".into();
    }
    files.push(("la_049.mid".into(), write_midi(&raw, WriteOptions::default())));
    files
}
