//! Standard MIDI File reading and writing.
//!
//! Only what the corpus pipeline needs is decoded: notes, tempo, time
//! signatures and lyric/text meta events. Ticks are rescaled to 480 per
//! quarter note on the way in.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::TICKS_PER_QUARTER;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNote {
    pub onset: u32,
    pub pitch: u8,
    pub duration: u32,
    pub velocity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempoEvent {
    pub tick: u32,
    pub micros_per_quarter: u32,
}

impl TempoEvent {
    pub fn bpm(&self) -> f64 {
        60_000_000.0 / self.micros_per_quarter as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSignature {
    pub tick: u32,
    pub numerator: u8,
    pub denominator: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LyricEvent {
    pub tick: u32,
    pub text: String,
}

/// Decoded contents of one MIDI file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawSong {
    /// Notes of each track, sorted by onset.
    pub tracks: Vec<Vec<RawNote>>,
    pub tempos: Vec<TempoEvent>,
    pub time_signatures: Vec<TimeSignature>,
    pub lyrics: Vec<LyricEvent>,
    /// Track that carried the lyric events.
    pub lyric_track: Option<usize>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl RawSong {
    /// Notes of the lyric-bearing track, or of the first track with notes
    /// when the lyrics live in a track of their own.
    pub fn melody(&self) -> &[RawNote] {
        if let Some(t) = self.lyric_track {
            if !self.tracks[t].is_empty() {
                return &self.tracks[t];
            }
        }
        self.tracks
            .iter()
            .find(|t| !t.is_empty())
            .map_or(&[], Vec::as_slice)
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Midi {
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(self.err(format!("unexpected end of data, wanted {n} bytes")));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn varlen(&mut self) -> Result<u32> {
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(self.err("variable-length quantity longer than 4 bytes"))
    }
}

fn rescale(tick: u64, division: u64) -> u32 {
    ((tick * TICKS_PER_QUARTER as u64 + division / 2) / division) as u32
}

#[derive(Default)]
struct TrackEvents {
    notes: Vec<RawNote>,
    lyrics: Vec<LyricEvent>,
    texts: Vec<LyricEvent>,
}

/// Parses an SMF type 0 or type 1 file.
pub fn parse_midi(bytes: &[u8]) -> Result<RawSong> {
    let mut cur = Cursor { data: bytes, pos: 0 };
    if cur.take(4)? != b"MThd" {
        return Err(Error::Midi { offset: 0, msg: "missing MThd header".into() });
    }
    let header_len = cur.u32()? as usize;
    if header_len < 6 {
        return Err(cur.err("header chunk shorter than 6 bytes"));
    }
    let format = cur.u16()?;
    let ntracks = cur.u16()?;
    let division = cur.u16()?;
    cur.take(header_len - 6)?;
    if format > 1 {
        return Err(Error::Midi { offset: 8, msg: format!("unsupported SMF format {format}") });
    }
    if division & 0x8000 != 0 || division == 0 {
        return Err(Error::Midi { offset: 12, msg: "SMPTE or zero time division is not supported".into() });
    }

    let mut song = RawSong::default();
    let mut per_track = Vec::new();
    while per_track.len() < ntracks as usize {
        let start = cur.pos;
        let kind = cur.take(4)?;
        let len = cur.u32()? as usize;
        let body_start = cur.pos;
        let body = cur.take(len)?;
        if kind != b"MTrk" {
            continue;
        }
        let events = parse_track(body, body_start, division as u64, &mut song)
            .map_err(|e| match e {
                Error::Midi { offset, msg } => Error::Midi { offset, msg: format!("track at {start}: {msg}") },
                other => other,
            })?;
        per_track.push(events);
    }

    let use_lyric_meta = per_track.iter().any(|t| !t.lyrics.is_empty());
    for (i, t) in per_track.into_iter().enumerate() {
        let lyr = if use_lyric_meta { t.lyrics } else { t.texts };
        if !lyr.is_empty() && song.lyric_track.is_none() {
            song.lyric_track = Some(i);
        }
        song.lyrics.extend(lyr);
        song.tracks.push(t.notes);
    }
    song.lyrics.sort_by_key(|l| l.tick);
    song.tempos.sort_by_key(|t| t.tick);
    song.time_signatures.sort_by_key(|t| t.tick);
    Ok(song)
}

fn parse_track(body: &[u8], base: usize, division: u64, song: &mut RawSong) -> Result<TrackEvents> {
    let mut cur = Cursor { data: body, pos: 0 };
    let mut out = TrackEvents::default();
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    // open notes per (channel, pitch): (start tick, velocity), oldest first
    let mut open: Vec<Vec<(u64, u8)>> = vec![Vec::new(); 16 * 128];
    let offset_err = |cur: &Cursor, msg: String| Error::Midi { offset: base + cur.pos, msg };

    while cur.pos < body.len() {
        tick += cur.varlen().map_err(|_| offset_err(&cur, "truncated delta time".into()))? as u64;
        let first = cur.u8().map_err(|_| offset_err(&cur, "truncated event".into()))?;
        let (status, first_data) = if first & 0x80 != 0 {
            (first, None)
        } else {
            let s = running.ok_or_else(|| offset_err(&cur, "data byte without running status".into()))?;
            (s, Some(first))
        };
        match status {
            0xff => {
                running = None;
                let kind = cur.u8().map_err(|e| rebase(e, base))?;
                let len = cur.varlen().map_err(|e| rebase(e, base))? as usize;
                let data = cur.take(len).map_err(|e| rebase(e, base))?;
                let t = rescale(tick, division);
                match kind {
                    0x2f => break,
                    0x51 if len == 3 => song.tempos.push(TempoEvent {
                        tick: t,
                        micros_per_quarter: u32::from_be_bytes([0, data[0], data[1], data[2]]),
                    }),
                    0x58 if len >= 2 => song.time_signatures.push(TimeSignature {
                        tick: t,
                        numerator: data[0],
                        denominator: 1u8.checked_shl(data[1] as u32).unwrap_or(0),
                    }),
                    0x05 => out.lyrics.push(LyricEvent { tick: t, text: String::from_utf8_lossy(data).into_owned() }),
                    0x01 => {
                        let text = String::from_utf8_lossy(data).into_owned();
                        // karaoke files put metadata in text events prefixed with '@'
                        if !text.starts_with('@') && !text.starts_with('%') {
                            out.texts.push(LyricEvent { tick: t, text });
                        }
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = cur.varlen().map_err(|e| rebase(e, base))? as usize;
                cur.take(len).map_err(|e| rebase(e, base))?;
            }
            0x80..=0xef => {
                running = Some(status);
                let nbytes = if matches!(status & 0xf0, 0xc0 | 0xd0) { 1 } else { 2 };
                let mut data = [0u8; 2];
                let mut k = 0;
                if let Some(d) = first_data {
                    data[0] = d;
                    k = 1;
                }
                while k < nbytes {
                    data[k] = cur.u8().map_err(|e| rebase(e, base))?;
                    k += 1;
                }
                if data[..nbytes].iter().any(|b| b & 0x80 != 0) {
                    return Err(offset_err(&cur, "status byte where data byte expected".into()));
                }
                let channel = (status & 0x0f) as usize;
                let slot = channel * 128 + data[0] as usize;
                match status & 0xf0 {
                    0x90 if data[1] > 0 => open[slot].push((tick, data[1])),
                    0x80 | 0x90 => {
                        if open[slot].is_empty() {
                            continue;
                        }
                        let (start, velocity) = open[slot].remove(0);
                        let onset = rescale(start, division);
                        let end = rescale(tick, division);
                        if end > onset {
                            out.notes.push(RawNote { onset, pitch: data[0], duration: end - onset, velocity });
                        } else {
                            song.warnings.push(format!("zero-length note {} at tick {onset} dropped", data[0]));
                        }
                    }
                    _ => {}
                }
            }
            _ => return Err(offset_err(&cur, format!("unexpected status byte {status:#04x}"))),
        }
    }
    for (slot, notes) in open.iter().enumerate() {
        for (start, _) in notes {
            let msg = format!("unterminated note {} at tick {} dropped", slot % 128, rescale(*start, division));
            warn!("{msg}");
            song.warnings.push(msg);
        }
    }
    out.notes.sort_by_key(|n| (n.onset, n.pitch));
    Ok(out)
}

fn rebase(e: Error, base: usize) -> Error {
    match e {
        Error::Midi { offset, msg } => Error::Midi { offset: offset + base, msg },
        other => other,
    }
}

/// Options for [`write_midi`].
#[derive(Debug, Clone, Copy)]
pub struct WriteOptions {
    pub division: u16,
    pub running_status: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            division: TICKS_PER_QUARTER as u16,
            running_status: false,
        }
    }
}

fn push_varlen(out: &mut Vec<u8>, mut v: u32) {
    let mut buf = [0u8; 4];
    let mut i = 3;
    buf[i] = (v & 0x7f) as u8;
    v >>= 7;
    while v > 0 {
        i -= 1;
        buf[i] = (v & 0x7f) as u8 | 0x80;
        v >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

/// Writes a type-0 file: tempo, time signature, lyric meta events and the
/// notes of every track on channel 0. Input ticks are at 480 per quarter.
pub fn write_midi(song: &RawSong, opts: WriteOptions) -> Vec<u8> {
    // (tick, order, bytes); order keeps meta < lyric < note-off < note-on at equal ticks
    let mut events: Vec<(u32, u8, Vec<u8>)> = Vec::new();
    let scale = |t: u32| -> u32 {
        ((t as u64 * opts.division as u64 + TICKS_PER_QUARTER as u64 / 2) / TICKS_PER_QUARTER as u64) as u32
    };
    for t in &song.tempos {
        let m = t.micros_per_quarter.to_be_bytes();
        events.push((scale(t.tick), 0, vec![0xff, 0x51, 3, m[1], m[2], m[3]]));
    }
    for ts in &song.time_signatures {
        let dd = ts.denominator.max(1).trailing_zeros() as u8;
        events.push((scale(ts.tick), 0, vec![0xff, 0x58, 4, ts.numerator, dd, 24, 8]));
    }
    for l in &song.lyrics {
        let mut e = vec![0xff, 0x05];
        push_varlen(&mut e, l.text.len() as u32);
        e.extend_from_slice(l.text.as_bytes());
        events.push((scale(l.tick), 1, e));
    }
    for track in &song.tracks {
        for n in track {
            events.push((scale(n.onset), 3, vec![0x90, n.pitch, n.velocity.max(1)]));
            events.push((scale(n.onset + n.duration), 2, vec![0x80, n.pitch, 0]));
        }
    }
    events.sort_by_key(|e| (e.0, e.1));

    let mut body = Vec::new();
    let mut last = 0u32;
    let mut running: Option<u8> = None;
    for (tick, _, bytes) in events {
        push_varlen(&mut body, tick - last);
        last = tick;
        let status = bytes[0];
        if status < 0xf0 {
            if opts.running_status && running == Some(status) {
                body.extend_from_slice(&bytes[1..]);
            } else {
                body.extend_from_slice(&bytes);
            }
            running = Some(status);
        } else {
            running = None;
            body.extend_from_slice(&bytes);
        }
    }
    body.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(body.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&opts.division.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_note_file() -> Vec<u8> {
        let mut f = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x01\xe0MTrk".to_vec();
        let body = [0x00, 0x90, 60, 100, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xff, 0x2f, 0x00];
        f.extend_from_slice(&(body.len() as u32).to_be_bytes());
        f.extend_from_slice(&body);
        f
    }

    #[test]
    fn minimal_file() {
        let song = parse_midi(&single_note_file()).unwrap();
        assert_eq!(song.tracks.len(), 1);
        assert_eq!(song.tracks[0], vec![RawNote { onset: 0, pitch: 60, duration: 480, velocity: 100 }]);
    }

    #[test]
    fn running_status_and_note_on_zero_velocity() {
        let mut f = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x00\x60MTrk".to_vec();
        // division 96: two quarter notes, second on/off pair using running status
        let body = [
            0x00, 0x90, 60, 90, 0x60, 60, 0, 0x00, 62, 90, 0x60, 62, 0, 0x00, 0xff, 0x2f, 0x00,
        ];
        f.extend_from_slice(&(body.len() as u32).to_be_bytes());
        f.extend_from_slice(&body);
        let song = parse_midi(&f).unwrap();
        let onsets: Vec<(u32, u8, u32)> = song.tracks[0].iter().map(|n| (n.onset, n.pitch, n.duration)).collect();
        assert_eq!(onsets, vec![(0, 60, 480), (480, 62, 480)]);
    }

    #[test]
    fn truncated_file_is_error() {
        let f = single_note_file();
        for cut in [3, 10, 20, f.len() - 6] {
            assert!(matches!(parse_midi(&f[..cut]), Err(Error::Midi { .. })), "cut at {cut}");
        }
    }

    #[test]
    fn unterminated_note_dropped_with_warning() {
        let mut f = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x01\xe0MTrk".to_vec();
        let body = [0x00, 0x90, 60, 100, 0x00, 0x90, 64, 100, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xff, 0x2f, 0x00];
        f.extend_from_slice(&(body.len() as u32).to_be_bytes());
        f.extend_from_slice(&body);
        let song = parse_midi(&f).unwrap();
        assert_eq!(song.tracks[0].len(), 1);
        assert_eq!(song.warnings.len(), 1);
    }

    #[test]
    fn writer_round_trip() {
        let song = RawSong {
            tracks: vec![vec![
                RawNote { onset: 0, pitch: 60, duration: 480, velocity: 80 },
                RawNote { onset: 480, pitch: 62, duration: 240, velocity: 80 },
                RawNote { onset: 960, pitch: 64, duration: 960, velocity: 80 },
            ]],
            tempos: vec![TempoEvent { tick: 0, micros_per_quarter: 600_000 }],
            time_signatures: vec![TimeSignature { tick: 0, numerator: 4, denominator: 4 }],
            lyrics: vec![
                LyricEvent { tick: 0, text: "Hel".into() },
                LyricEvent { tick: 480, text: "lo ".into() },
                LyricEvent { tick: 960, text: "world.".into() },
            ],
            lyric_track: Some(0),
            warnings: vec![],
        };
        for running_status in [false, true] {
            for division in [96, 480, 960] {
                let bytes = write_midi(&song, WriteOptions { division, running_status });
                let back = parse_midi(&bytes).unwrap();
                assert_eq!(back, song, "division {division}, running status {running_status}");
                assert_eq!(back.tempos[0].bpm(), 100.0);
            }
        }
    }

    #[test]
    fn rejects_smpte() {
        let mut f = single_note_file();
        f[12] = 0xe7;
        assert!(parse_midi(&f).is_err());
    }
}
