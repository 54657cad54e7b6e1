//! Corpus files: one JSON object per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::AlignedSong;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSong {
    pub id: String,
    pub bpm: f64,
    pub song: AlignedSong,
}

pub fn write_corpus<W: Write>(mut out: W, songs: &[CorpusSong]) -> Result<()> {
    for s in songs {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<CorpusSong>> {
    let mut songs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let song: CorpusSong = serde_json::from_str(&line).map_err(|e| Error::Format {
            what: "corpus",
            line: i + 1,
            msg: e.to_string(),
        })?;
        song.song.validate().map_err(|e| Error::Format {
            what: "corpus",
            line: i + 1,
            msg: e.to_string(),
        })?;
        songs.push(song);
    }
    Ok(songs)
}

pub fn read_corpus_path(path: impl AsRef<std::path::Path>) -> Result<Vec<CorpusSong>> {
    read_corpus(std::io::BufReader::new(std::fs::File::open(path)?))
}
