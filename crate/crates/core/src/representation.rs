//! Compound-token representation of aligned lyric/melody pairs.
//!
//! Every token carries nine attributes: bar, position, pitch, duration,
//! tempo, text, word ID, phrase ID and token type. Word tokens only fill
//! text, note tokens only fill the five musical attributes, and special
//! tokens carry their own symbol in every slot. Time is measured in ticks
//! at 480 per quarter note, so a 4/4 bar spans 1920 ticks.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Stress;

pub const TICKS_PER_QUARTER: u32 = 480;
pub const TICKS_PER_BAR: u32 = 4 * TICKS_PER_QUARTER;

pub const MAX_BARS: usize = 128;
pub const MAX_WORDS: usize = 256;
pub const MAX_PHRASES: usize = 128;
pub const PITCH_COUNT: usize = 128;

/// In-bar onset offsets: multiples of 30 and of 40 below one bar.
pub fn position_values() -> &'static [u16] {
    static VALUES: OnceLock<Vec<u16>> = OnceLock::new();
    VALUES.get_or_init(|| {
        let mut v: Vec<u16> = (0..TICKS_PER_BAR as u16)
            .filter(|t| t % 30 == 0 || t % 40 == 0)
            .collect();
        v.dedup();
        v
    })
}

/// Note lengths: multiples of 30 up to a whole note plus the five triplet lengths.
pub fn duration_values() -> &'static [u16] {
    static VALUES: OnceLock<Vec<u16>> = OnceLock::new();
    VALUES.get_or_init(|| {
        let mut v: Vec<u16> = (1..=64).map(|k| k * 30).collect();
        v.extend_from_slice(&[40, 80, 160, 320, 640]);
        v.sort_unstable();
        v.dedup();
        v
    })
}

pub fn position_index(position: u16) -> Option<usize> {
    position_values().binary_search(&position).ok()
}

pub fn duration_index(duration: u16) -> Option<usize> {
    duration_values().binary_search(&duration).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TempoClass {
    Large,
    Larghetto,
    Adagio,
    Andante,
    Moderato,
    Allegro,
    Presto,
}

impl TempoClass {
    pub const ALL: [TempoClass; 7] = [
        TempoClass::Large,
        TempoClass::Larghetto,
        TempoClass::Adagio,
        TempoClass::Andante,
        TempoClass::Moderato,
        TempoClass::Allegro,
        TempoClass::Presto,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TempoClass::Large => "Large",
            TempoClass::Larghetto => "Larghetto",
            TempoClass::Adagio => "Adagio",
            TempoClass::Andante => "Andante",
            TempoClass::Moderato => "Moderato",
            TempoClass::Allegro => "Allegro",
            TempoClass::Presto => "Presto",
        }
    }
}

/// Maps beats per minute onto the seven half-open tempo bands.
pub fn tempo_class(bpm: f64) -> Result<TempoClass> {
    if !bpm.is_finite() || bpm <= 0.0 {
        return Err(Error::invalid(format!("tempo must be a positive number of bpm, got {bpm}")));
    }
    Ok(match bpm {
        b if b < 60.0 => TempoClass::Large,
        b if b < 66.0 => TempoClass::Larghetto,
        b if b < 76.0 => TempoClass::Adagio,
        b if b < 108.0 => TempoClass::Andante,
        b if b < 120.0 => TempoClass::Moderato,
        b if b < 168.0 => TempoClass::Allegro,
        _ => TempoClass::Presto,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpecialKind {
    Bos,
    Eos,
    Mask,
    Pad,
    Sep,
}

impl SpecialKind {
    pub const ALL: [SpecialKind; 5] = [
        SpecialKind::Bos,
        SpecialKind::Eos,
        SpecialKind::Mask,
        SpecialKind::Pad,
        SpecialKind::Sep,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            SpecialKind::Bos => "<BOS>",
            SpecialKind::Eos => "<EOS>",
            SpecialKind::Mask => "<MASK>",
            SpecialKind::Pad => "<PAD>",
            SpecialKind::Sep => "<SEP>",
        }
    }

    fn offset(self) -> u32 {
        self as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenType {
    Word,
    Note,
    Special,
}

/// The nine token attributes, in serialized field order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attribute {
    Bar,
    Position,
    Pitch,
    Duration,
    Tempo,
    Text,
    WordId,
    PhraseId,
    TokenType,
}

impl Attribute {
    pub const ALL: [Attribute; 9] = [
        Attribute::Bar,
        Attribute::Position,
        Attribute::Pitch,
        Attribute::Duration,
        Attribute::Tempo,
        Attribute::Text,
        Attribute::WordId,
        Attribute::PhraseId,
        Attribute::TokenType,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Bar => "bar",
            Attribute::Position => "position",
            Attribute::Pitch => "pitch",
            Attribute::Duration => "duration",
            Attribute::Tempo => "tempo",
            Attribute::Text => "text",
            Attribute::WordId => "word_id",
            Attribute::PhraseId => "phrase_id",
            Attribute::TokenType => "token_type",
        }
    }

    /// Fixed vocabulary size, or `None` for text, whose vocabulary is built per corpus.
    pub fn vocab_size(self) -> Option<usize> {
        match self {
            Attribute::Bar => Some(MAX_BARS),
            Attribute::Position => Some(position_values().len()),
            Attribute::Pitch => Some(PITCH_COUNT),
            Attribute::Duration => Some(duration_values().len()),
            Attribute::Tempo => Some(TempoClass::ALL.len()),
            Attribute::Text => None,
            Attribute::WordId => Some(MAX_WORDS),
            Attribute::PhraseId => Some(MAX_PHRASES),
            Attribute::TokenType => Some(2),
        }
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown attribute {s:?}")))
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Vocabulary cardinality of a named attribute.
///
/// Text has no fixed cardinality; ask a [`TextVocab`] instead.
pub fn attribute_vocab_size(name: &str) -> Result<usize> {
    let attr: Attribute = name.parse()?;
    attr.vocab_size().ok_or_else(|| {
        Error::invalid("the text vocabulary is corpus-dependent; use TextVocab::len")
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    /// Lowercase dictionary form.
    pub text: String,
    /// Punctuation marks that were attached to the word in the lyrics.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub marks: String,
    pub syllables: Vec<Stress>,
}

impl Word {
    pub fn new(text: impl Into<String>, syllables: Vec<Stress>) -> Self {
        Word {
            text: text.into(),
            marks: String::new(),
            syllables,
        }
    }

    pub fn with_marks(mut self, marks: impl Into<String>) -> Self {
        self.marks = marks.into();
        self
    }

    pub fn has_punctuation(&self) -> bool {
        !self.marks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Note {
    pub bar: u8,
    pub position: u16,
    pub pitch: u8,
    pub duration: u16,
    pub tempo: TempoClass,
}

impl Note {
    /// Absolute onset in ticks.
    pub fn onset(&self) -> u32 {
        self.bar as u32 * TICKS_PER_BAR + self.position as u32
    }

    pub fn end(&self) -> u32 {
        self.onset() + self.duration as u32
    }

    /// Builds a note from an absolute onset tick.
    pub fn at(onset: u32, pitch: u8, duration: u16, tempo: TempoClass) -> Self {
        Note {
            bar: (onset / TICKS_PER_BAR) as u8,
            position: (onset % TICKS_PER_BAR) as u16,
            pitch,
            duration,
            tempo,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.bar as usize >= MAX_BARS {
            return Err(Error::Capacity {
                what: "bar index",
                got: self.bar as usize,
                limit: MAX_BARS - 1,
            });
        }
        if self.pitch as usize >= PITCH_COUNT {
            return Err(Error::invalid(format!("pitch {} out of range", self.pitch)));
        }
        if position_index(self.position).is_none() {
            return Err(Error::invalid(format!("position {} is off the grid", self.position)));
        }
        if duration_index(self.duration).is_none() {
            return Err(Error::invalid(format!("duration {} is off the grid", self.duration)));
        }
        Ok(())
    }
}

/// Word-level and phrase-level alignment IDs of a token position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AlignmentIds {
    pub word_id: u8,
    pub phrase_id: u8,
}

impl AlignmentIds {
    pub fn new(word_id: usize, phrase_id: usize) -> Self {
        AlignmentIds {
            word_id: word_id as u8,
            phrase_id: phrase_id as u8,
        }
    }
}

/// A lyric word sequence paired with a monophonic melody.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlignedSong {
    pub words: Vec<Word>,
    pub notes: Vec<Note>,
    /// Word index of every note; non-decreasing and covering every word.
    pub word_of_note: Vec<usize>,
    pub word_phrase: Vec<usize>,
    pub note_phrase: Vec<usize>,
}

impl AlignedSong {
    /// Builds a song with every element in phrase 0.
    pub fn new(words: Vec<Word>, notes: Vec<Note>, word_of_note: Vec<usize>) -> Result<Self> {
        let song = AlignedSong {
            word_phrase: vec![0; words.len()],
            note_phrase: vec![0; notes.len()],
            words,
            notes,
            word_of_note,
        };
        song.validate()?;
        Ok(song)
    }

    pub fn validate(&self) -> Result<()> {
        if self.words.is_empty() || self.notes.is_empty() {
            return Err(Error::invalid("a song needs at least one word and one note"));
        }
        if self.words.len() > MAX_WORDS {
            return Err(Error::Capacity {
                what: "word count",
                got: self.words.len(),
                limit: MAX_WORDS,
            });
        }
        if self.word_of_note.len() != self.notes.len()
            || self.note_phrase.len() != self.notes.len()
            || self.word_phrase.len() != self.words.len()
        {
            return Err(Error::invalid("alignment maps do not match sequence lengths"));
        }
        for note in &self.notes {
            note.check()?;
        }
        for pair in self.notes.windows(2) {
            if pair[1].onset() <= pair[0].onset() {
                return Err(Error::invalid("note onsets must be strictly increasing"));
            }
        }
        let mut expected = 0usize;
        for &w in &self.word_of_note {
            if w == expected {
                expected += 1;
            } else if w + 1 != expected {
                return Err(Error::invalid(
                    "word_of_note must be non-decreasing and cover every word",
                ));
            }
        }
        if expected != self.words.len() {
            return Err(Error::invalid("some words have no aligned note"));
        }
        let phrases = self.phrase_count();
        if phrases > MAX_PHRASES {
            return Err(Error::Capacity {
                what: "phrase count",
                got: phrases,
                limit: MAX_PHRASES,
            });
        }
        let mut seen = vec![false; phrases];
        for &p in self.note_phrase.iter().chain(&self.word_phrase) {
            seen[p] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("phrase indices must be contiguous from 0"));
        }
        Ok(())
    }

    pub fn phrase_count(&self) -> usize {
        self.note_phrase
            .iter()
            .chain(&self.word_phrase)
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Half-open note-index range of every word.
    pub fn word_note_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut ranges = vec![0..0; self.words.len()];
        for (i, &w) in self.word_of_note.iter().enumerate() {
            if ranges[w].is_empty() {
                ranges[w] = i..i + 1;
            } else {
                ranges[w].end = i + 1;
            }
        }
        ranges
    }

    pub fn note_ids(&self, note: usize) -> AlignmentIds {
        AlignmentIds::new(self.word_of_note[note], self.note_phrase[note])
    }

    pub fn word_ids(&self, word: usize) -> AlignmentIds {
        AlignmentIds::new(word, self.word_phrase[word])
    }

    /// Number of bars spanned by the melody.
    pub fn bar_count(&self) -> usize {
        self.notes.last().map_or(0, |n| n.bar as usize + 1)
    }

    pub fn word_token(&self, word: usize) -> Token {
        Token::Word {
            word: self.words[word].clone(),
            ids: self.word_ids(word),
        }
    }

    pub fn note_token(&self, note: usize) -> Token {
        Token::Note {
            note: self.notes[note],
            ids: self.note_ids(note),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Token {
    Word { word: Word, ids: AlignmentIds },
    Note { note: Note, ids: AlignmentIds },
    Special(SpecialKind),
}

/// The value one token holds for one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrValue<'a> {
    Value(u32),
    Text(&'a str),
    None,
    Special(SpecialKind),
}

impl Token {
    pub fn token_type(&self) -> TokenType {
        match self {
            Token::Word { .. } => TokenType::Word,
            Token::Note { .. } => TokenType::Note,
            Token::Special(_) => TokenType::Special,
        }
    }

    pub fn ids(&self) -> Option<AlignmentIds> {
        match self {
            Token::Word { ids, .. } | Token::Note { ids, .. } => Some(*ids),
            Token::Special(_) => None,
        }
    }

    pub fn attribute(&self, attr: Attribute) -> AttrValue<'_> {
        use AttrValue as V;
        match self {
            Token::Special(kind) => V::Special(*kind),
            Token::Word { word, ids } => match attr {
                Attribute::Text => V::Text(&word.text),
                Attribute::WordId => V::Value(ids.word_id as u32),
                Attribute::PhraseId => V::Value(ids.phrase_id as u32),
                Attribute::TokenType => V::Value(0),
                _ => V::None,
            },
            Token::Note { note, ids } => match attr {
                Attribute::Bar => V::Value(note.bar as u32),
                Attribute::Position => V::Value(note.position as u32),
                Attribute::Pitch => V::Value(note.pitch as u32),
                Attribute::Duration => V::Value(note.duration as u32),
                Attribute::Tempo => V::Value(note.tempo.index() as u32),
                Attribute::Text => V::None,
                Attribute::WordId => V::Value(ids.word_id as u32),
                Attribute::PhraseId => V::Value(ids.phrase_id as u32),
                Attribute::TokenType => V::Value(1),
            },
        }
    }

    /// Fixed-width index record: per attribute, values take `0..size`, `size`
    /// is the None sentinel and `size + 1 ..= size + 5` are the special symbols.
    pub fn record(&self, vocab: &TextVocab) -> Result<TokenRecord> {
        let mut out = [0u32; 9];
        for (slot, attr) in out.iter_mut().zip(Attribute::ALL) {
            let size = vocab.size_of(attr) as u32;
            *slot = match self.attribute(attr) {
                AttrValue::None => size,
                AttrValue::Special(kind) => size + 1 + kind.offset(),
                AttrValue::Text(t) => vocab
                    .index_of(t)
                    .ok_or_else(|| Error::invalid(format!("word {t:?} missing from text vocabulary")))?
                    as u32,
                AttrValue::Value(v) => match attr {
                    Attribute::Position => position_index(v as u16).expect("checked note") as u32,
                    Attribute::Duration => duration_index(v as u16).expect("checked note") as u32,
                    _ => v,
                },
            };
        }
        Ok(TokenRecord(out))
    }

    /// Inverse of [`Token::record`]. Word tokens come back without
    /// punctuation marks or stress, which the record does not carry.
    pub fn from_record(record: &TokenRecord, vocab: &TextVocab) -> Result<Token> {
        let fields = record.0;
        let type_size = vocab.size_of(Attribute::TokenType) as u32;
        let kind_of = |v: u32, size: u32| -> Option<SpecialKind> {
            v.checked_sub(size + 1)
                .and_then(|o| SpecialKind::ALL.get(o as usize).copied())
        };
        if let Some(kind) = kind_of(fields[8], type_size) {
            for (v, attr) in fields.iter().zip(Attribute::ALL) {
                if kind_of(*v, vocab.size_of(attr) as u32) != Some(kind) {
                    return Err(Error::invalid("special token with mixed attribute symbols"));
                }
            }
            return Ok(Token::Special(kind));
        }
        let get = |attr: Attribute| -> Result<u32> {
            let v = fields[attr_slot(attr)];
            if v >= vocab.size_of(attr) as u32 {
                return Err(Error::invalid(format!("{attr} index {v} is not a value")));
            }
            Ok(v)
        };
        let ids = AlignmentIds {
            word_id: get(Attribute::WordId)? as u8,
            phrase_id: get(Attribute::PhraseId)? as u8,
        };
        match fields[8] {
            0 => {
                let text = vocab.words[get(Attribute::Text)? as usize].clone();
                Ok(Token::Word {
                    word: Word::new(text, Vec::new()),
                    ids,
                })
            }
            1 => Ok(Token::Note {
                note: Note {
                    bar: get(Attribute::Bar)? as u8,
                    position: position_values()[get(Attribute::Position)? as usize],
                    pitch: get(Attribute::Pitch)? as u8,
                    duration: duration_values()[get(Attribute::Duration)? as usize],
                    tempo: TempoClass::from_index(get(Attribute::Tempo)? as usize)
                        .expect("bounded by vocab size"),
                },
                ids,
            }),
            other => Err(Error::invalid(format!("bad token type index {other}"))),
        }
    }
}

fn attr_slot(attr: Attribute) -> usize {
    Attribute::ALL.iter().position(|a| *a == attr).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenRecord(pub [u32; 9]);

/// Emits all word tokens followed by all note tokens.
pub fn encode_song(song: &AlignedSong) -> Result<Vec<Token>> {
    song.validate()?;
    let mut tokens = Vec::with_capacity(song.words.len() + song.notes.len());
    tokens.extend((0..song.words.len()).map(|i| song.word_token(i)));
    tokens.extend((0..song.notes.len()).map(|i| song.note_token(i)));
    Ok(tokens)
}

/// Rebuilds a song from the word-then-note layout produced by [`encode_song`].
pub fn decode_song(tokens: &[Token]) -> Result<AlignedSong> {
    let mut words = Vec::new();
    let mut word_phrase = Vec::new();
    let mut notes = Vec::new();
    let mut word_of_note = Vec::new();
    let mut note_phrase = Vec::new();
    for (index, token) in tokens.iter().enumerate() {
        let bad = |msg: String| Error::Decode { index, msg };
        match token {
            Token::Word { word, ids } => {
                if !notes.is_empty() {
                    return Err(bad("word token after the first note token".into()));
                }
                if ids.word_id as usize != words.len() {
                    return Err(bad(format!(
                        "word token carries word_id {} at word position {}",
                        ids.word_id,
                        words.len()
                    )));
                }
                words.push(word.clone());
                word_phrase.push(ids.phrase_id as usize);
            }
            Token::Note { note, ids } => {
                let w = ids.word_id as usize;
                if w >= words.len() {
                    return Err(bad(format!(
                        "note refers to word {w} but only {} words precede it",
                        words.len()
                    )));
                }
                if word_of_note.last().is_some_and(|&prev| w < prev) {
                    return Err(bad("note word_ids must be non-decreasing".into()));
                }
                notes.push(*note);
                word_of_note.push(w);
                note_phrase.push(ids.phrase_id as usize);
            }
            Token::Special(kind) => {
                return Err(bad(format!("unexpected {} in a song layout", kind.symbol())));
            }
        }
    }
    let song = AlignedSong {
        words,
        notes,
        word_of_note,
        word_phrase,
        note_phrase,
    };
    song.validate().map_err(|e| Error::Decode {
        index: tokens.len(),
        msg: e.to_string(),
    })?;
    Ok(song)
}

/// Corpus text vocabulary, most frequent word first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextVocab {
    pub words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TextVocab {
    pub fn from_songs<'a>(songs: impl IntoIterator<Item = &'a AlignedSong>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for song in songs {
            for w in &song.words {
                *counts.entry(w.text.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_words(ranked.into_iter().map(|(w, _)| w.to_string()).collect())
    }

    pub fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        TextVocab { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn size_of(&self, attr: Attribute) -> usize {
        attr.vocab_size().unwrap_or(self.words.len())
    }

    /// Sidecar vocabulary document listing every attribute's index table.
    pub fn tables_json(&self) -> serde_json::Value {
        use serde_json::json;
        let specials = |size: usize| -> serde_json::Value {
            SpecialKind::ALL
                .iter()
                .map(|k| (k.symbol().to_string(), json!(size + 1 + k.offset() as usize)))
                .collect::<serde_json::Map<_, _>>()
                .into()
        };
        let mut tables = serde_json::Map::new();
        for attr in Attribute::ALL {
            let size = self.size_of(attr);
            let values: serde_json::Value = match attr {
                Attribute::Position => json!(position_values()),
                Attribute::Duration => json!(duration_values()),
                Attribute::Tempo => json!(TempoClass::ALL.iter().map(|t| t.name()).collect::<Vec<_>>()),
                Attribute::Text => json!(self.words),
                Attribute::TokenType => json!(["Word", "Note"]),
                _ => json!((0..size).collect::<Vec<_>>()),
            };
            tables.insert(
                attr.name().to_string(),
                json!({ "size": size, "none": size, "specials": specials(size), "values": values }),
            );
        }
        json!({
            "format": "lyrmel-vocab",
            "version": 1,
            "field_order": Attribute::ALL.iter().map(|a| a.name()).collect::<Vec<_>>(),
            "attributes": tables,
        })
    }
}

const TOKEN_FILE_HEADER: &str =
    "# lyrmel-tokens v1: bar position pitch duration tempo text word_id phrase_id token_type";

/// Writes one tab-separated nine-field record per line.
pub fn write_token_file<W: Write>(mut out: W, records: &[TokenRecord]) -> Result<()> {
    writeln!(out, "{TOKEN_FILE_HEADER}")?;
    for r in records {
        let fields: Vec<String> = r.0.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", fields.join("\t"))?;
    }
    Ok(())
}

pub fn read_token_file<R: BufRead>(input: R) -> Result<Vec<TokenRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Format {
            what: "token",
            line: i + 1,
            msg,
        };
        let values: Vec<u32> = line
            .split('\t')
            .map(|f| f.parse::<u32>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_>>()?;
        let fields: [u32; 9] = values
            .try_into()
            .map_err(|v: Vec<u32>| bad(format!("expected 9 fields, found {}", v.len())))?;
        out.push(TokenRecord(fields));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Stress::*;

    fn note(onset: u32, pitch: u8) -> Note {
        Note::at(onset, pitch, 480, TempoClass::Andante)
    }

    fn small_song() -> AlignedSong {
        AlignedSong::new(
            vec![Word::new("have", vec![Primary]), Word::new("banana", vec![Unstressed, Primary, Unstressed])],
            vec![note(0, 60), note(480, 62), note(960, 64)],
            vec![0, 0, 1],
        )
        .unwrap()
    }

    #[test]
    fn tempo_bands() {
        assert_eq!(tempo_class(59.0).unwrap(), TempoClass::Large);
        assert_eq!(tempo_class(60.0).unwrap(), TempoClass::Larghetto);
        assert_eq!(tempo_class(76.0).unwrap(), TempoClass::Andante);
        assert_eq!(tempo_class(107.99).unwrap(), TempoClass::Andante);
        assert_eq!(tempo_class(120.0).unwrap(), TempoClass::Allegro);
        assert_eq!(tempo_class(168.0).unwrap(), TempoClass::Presto);
        assert!(tempo_class(0.0).is_err());
        assert!(tempo_class(-3.0).is_err());
        assert!(tempo_class(f64::NAN).is_err());
    }

    #[test]
    fn grid_sizes() {
        // 64 multiples of 30 + 48 multiples of 40 - 16 shared multiples of 120
        assert_eq!(position_values().len(), 64 + 48 - 16);
        assert_eq!(attribute_vocab_size("position").unwrap(), 96);
        assert_eq!(attribute_vocab_size("duration").unwrap(), 69);
        assert_eq!(attribute_vocab_size("token type").unwrap(), 2);
        assert!(attribute_vocab_size("loudness").is_err());
        assert!(attribute_vocab_size("text").is_err());
        assert_eq!(*position_values().last().unwrap(), 1890);
        assert_eq!(*duration_values().last().unwrap(), 1920);
    }

    #[test]
    fn encode_assigns_word_ids() {
        let tokens = encode_song(&small_song()).unwrap();
        let ids: Vec<u8> = tokens.iter().map(|t| t.ids().unwrap().word_id).collect();
        assert_eq!(ids, vec![0, 1, 0, 0, 1]);
        assert_eq!(tokens[0].token_type(), TokenType::Word);
        assert_eq!(tokens[2].token_type(), TokenType::Note);
        assert_eq!(decode_song(&tokens).unwrap(), small_song());
    }

    #[test]
    fn none_fill_rule() {
        let tokens = encode_song(&small_song()).unwrap();
        assert_eq!(tokens[0].attribute(Attribute::Pitch), AttrValue::None);
        assert_eq!(tokens[0].attribute(Attribute::Text), AttrValue::Text("have"));
        assert_eq!(tokens[2].attribute(Attribute::Text), AttrValue::None);
        assert_eq!(tokens[2].attribute(Attribute::Pitch), AttrValue::Value(60));
        let sep = Token::Special(SpecialKind::Sep);
        for attr in Attribute::ALL {
            assert_eq!(sep.attribute(attr), AttrValue::Special(SpecialKind::Sep));
        }
    }

    #[test]
    fn empty_song_rejected() {
        let err = AlignedSong::new(vec![], vec![], vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn decode_rejects_bad_layouts() {
        let mut tokens = encode_song(&small_song()).unwrap();
        if let Token::Note { ids, .. } = &mut tokens[4] {
            ids.word_id = 7;
        }
        assert!(matches!(decode_song(&tokens), Err(Error::Decode { index: 4, .. })));

        let mut tokens = encode_song(&small_song()).unwrap();
        tokens.swap(1, 2);
        assert!(matches!(decode_song(&tokens), Err(Error::Decode { .. })));
    }

    #[test]
    fn single_word_single_note() {
        let tokens = vec![
            Token::Word { word: Word::new("la", vec![Primary]), ids: AlignmentIds::new(0, 0) },
            Token::Note { note: note(0, 60), ids: AlignmentIds::new(0, 0) },
        ];
        let song = decode_song(&tokens).unwrap();
        assert_eq!(song.words.len(), 1);
        assert_eq!(song.word_of_note, vec![0]);
    }

    #[test]
    fn capacity_errors() {
        let words: Vec<Word> = (0..257).map(|i| Word::new(format!("w{i}"), vec![Primary])).collect();
        let notes: Vec<Note> = (0..257).map(|i| note(i * 480, 60)).collect();
        let err = AlignedSong::new(words, notes, (0..257).collect()).unwrap_err();
        assert!(matches!(err, Error::Capacity { what: "word count", .. }));
    }

    #[test]
    fn record_round_trip() {
        let song = small_song();
        let vocab = TextVocab::from_songs([&song]);
        let tokens = encode_song(&song).unwrap();
        let mut records: Vec<TokenRecord> = tokens.iter().map(|t| t.record(&vocab).unwrap()).collect();
        records.push(Token::Special(SpecialKind::Mask).record(&vocab).unwrap());
        assert_eq!(records[0].0[0], 128, "word token bar is the None sentinel");
        assert_eq!(records.last().unwrap().0[0], 128 + 1 + 2);

        let mut buf = Vec::new();
        write_token_file(&mut buf, &records).unwrap();
        let back = read_token_file(buf.as_slice()).unwrap();
        assert_eq!(back, records);
        for r in &records {
            let t = Token::from_record(r, &vocab).unwrap();
            assert_eq!(t.record(&vocab).unwrap(), *r);
        }
    }

    #[test]
    fn vocab_orders_by_frequency() {
        let mut song = small_song();
        song.words[1].text = "have".into();
        let other = small_song();
        let vocab = TextVocab::from_songs([&song, &other]);
        assert_eq!(vocab.words, vec!["have", "banana"]);
    }
}
