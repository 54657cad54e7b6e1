use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lyrmel::features::{melodic_peaks, rhythm_skeleton};
use lyrmel::ingestion::melody::{best_octave_shift, quantize_duration, quantize_onset};
use lyrmel::ingestion::{ingest_corpus, parse_midi, write_midi, IngestConfig, WriteOptions};
use lyrmel::metrics::{melody_distance, overlapped_area, Histogram};
use lyrmel::ngram::{build_lexicon, Family, NGramLexicon, SongFeatures};
use lyrmel::phrase::{melody_based_recognition, BoundarySource, PhraseConfig, PhraseSegmentation};
use lyrmel::pretraining::{
    attention_mask, build_sample, masked_attention_weights, sample_phrase_level, sample_song_level,
    sample_word_level, span_nll, AttentionMaskSpec, Corruption, PretrainConfig, ReplacementPool,
};
use lyrmel::representation::{decode_song, duration_values, encode_song, position_values};
use lyrmel::synthetic::{random_song, song_to_raw, toy_dictionary, SongShape};
use lyrmel::{AlignedSong, Note, TempoClass};

fn song(seed: u64) -> AlignedSong {
    random_song(&mut ChaCha8Rng::seed_from_u64(seed), &SongShape::default())
}

fn corpus() -> &'static (Vec<AlignedSong>, NGramLexicon) {
    static CORPUS: OnceLock<(Vec<AlignedSong>, NGramLexicon)> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let songs: Vec<AlignedSong> = (0..80).map(song).collect();
        let lex = build_lexicon(&songs).unwrap();
        (songs, lex)
    })
}

fn transpose(notes: &[Note], k: i16) -> Vec<Note> {
    notes.iter().map(|n| Note { pitch: (n.pitch as i16 + k) as u8, ..*n }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_round_trip(seed in any::<u64>()) {
        let s = song(seed);
        prop_assert_eq!(decode_song(&encode_song(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn onsets_snap_within_twenty_ticks(tick in 0u32..1_000_000) {
        let q = quantize_onset(tick);
        prop_assert!(q.abs_diff(tick) <= 20);
        prop_assert!(position_values().contains(&((q % 1920) as u16)));
    }

    #[test]
    fn durations_snap_to_nearest_value(d in 1u32..10_000) {
        let q = quantize_duration(d);
        let best = duration_values().iter().map(|&v| (v as u32).abs_diff(d)).min().unwrap();
        prop_assert_eq!((q as u32).abs_diff(d), best);
    }

    #[test]
    fn octave_shift_is_maximal(pitches in prop::collection::vec(0u8..128, 1..40)) {
        let (low, high) = (48u8, 84u8);
        let inside = |s: i32| pitches.iter().filter(|&&p| (low as i32..high as i32).contains(&(p as i32 + s))).count();
        let best = best_octave_shift(&pitches, low, high);
        for k in -10..=10 {
            let s = k * 12;
            let fits = pitches.iter().all(|&p| (0..=127).contains(&(p as i32 + s)));
            if fits {
                prop_assert!(inside(best) >= inside(s));
            }
        }
    }

    #[test]
    fn peaks_depend_on_neighbours_only(
        pitches in prop::collection::vec(40u8..90, 3..40),
        j in any::<prop::sample::Index>(),
        p in 40u8..90,
    ) {
        let j = j.index(pitches.len());
        let mut changed = pitches.clone();
        changed[j] = p;
        let (a, b) = (melodic_peaks(&pitches), melodic_peaks(&changed));
        for i in 0..pitches.len() {
            if i + 1 < j || i > j + 1 {
                prop_assert_eq!(a.get(i), b.get(i));
            }
        }
    }

    #[test]
    fn skeleton_ignores_pitch(seed in any::<u64>(), k in -12i16..12) {
        let s = song(seed);
        prop_assert_eq!(rhythm_skeleton(&s.notes), rhythm_skeleton(&transpose(&s.notes, k)));
    }

    #[test]
    fn phrase_ids_start_at_zero_and_step_by_one(seed in any::<u64>()) {
        let s = song(seed);
        prop_assert_eq!(s.note_phrase[0], 0);
        prop_assert!(s.note_phrase.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        prop_assert!(s.word_phrase.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn melody_boundaries_are_never_adjacent(seed in any::<u64>()) {
        let b = melody_based_recognition(&song(seed).notes, &PhraseConfig::default());
        prop_assert!(b.windows(2).all(|w| w[1] > w[0] + 1));
    }

    #[test]
    fn word_spans_are_disjoint_whole_words(seed in any::<u64>(), srr in any::<bool>()) {
        let (songs, lex) = corpus();
        let s = &songs[(seed % songs.len() as u64) as usize];
        let f = SongFeatures::new(s);
        let family = if srr { Family::Srr } else { Family::Smr };
        let pool = ReplacementPool::new(songs, &songs.iter().map(SongFeatures::new).collect::<Vec<_>>(), lex);
        let set = sample_word_level(s, &f, lex, family, &pool, &PretrainConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(set.check(s.notes.len()).is_ok());
        let starts: Vec<usize> = f.word_notes.iter().map(|r| r.start).collect();
        let ends: Vec<usize> = f.word_notes.iter().map(|r| r.end).collect();
        for sp in &set.spans {
            prop_assert!(starts.contains(&sp.start) && ends.contains(&sp.end()));
            if let Some(r) = &sp.replacement {
                prop_assert_eq!(r.len(), sp.len);
            }
        }
    }

    #[test]
    fn layout_part_lengths(seed in any::<u64>(), which in 0usize..3) {
        let (songs, lex) = corpus();
        let s = &songs[(seed % songs.len() as u64) as usize];
        let cfg = PretrainConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = match which {
            0 => {
                let f = SongFeatures::new(s);
                sample_word_level(s, &f, lex, Family::Smr, &ReplacementPool::default(), &cfg, &mut rng)
            }
            1 => {
                let seg = PhraseSegmentation::from_song(s, BoundarySource::Melody);
                sample_phrase_level(s, &seg, &cfg, &mut rng)
            }
            _ => sample_song_level(s, &cfg, &mut rng),
        };
        prop_assume!(!set.is_empty());
        let sample = build_sample(s, &set, usize::MAX, &mut rng).unwrap();
        prop_assert_eq!(sample.part_a, s.words.len());
        let masked: usize = set.spans.iter().filter(|sp| sp.action == Corruption::MaskOut).map(|sp| sp.len - 1).sum();
        prop_assert_eq!(sample.part_b, s.notes.len() - masked);
        prop_assert_eq!(sample.part_c, set.spans.len() + set.covered());
        for (k, target) in sample.span_targets().iter().enumerate() {
            let sp = &set.spans[k];
            prop_assert_eq!(&target[..], &s.notes[sp.start..sp.end()]);
        }
        let mut order = sample.c_order.clone();
        order.sort_unstable();
        prop_assert_eq!(order, (0..set.spans.len()).collect::<Vec<_>>());
        prop_assert_eq!(attention_mask(&sample), AttentionMaskSpec::from_parts(sample.part_a, sample.part_b, sample.part_c));
    }

    #[test]
    fn attention_rows_are_distributions(a in 1usize..12, b in 1usize..12, c in 1usize..12, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = a + b + c;
        let scores: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-50.0..50.0)).collect()).collect();
        let mask = AttentionMaskSpec::from_parts(a, b, c);
        let w = masked_attention_weights(&scores, &mask).unwrap();
        for (r, row) in w.iter().enumerate() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (col, &x) in row.iter().enumerate() {
                prop_assert!(mask.allows(r, col) || x == 0.0);
            }
        }
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(
        raw in prop::collection::vec((0u32..50, 0u32..50), 1..20),
    ) {
        prop_assume!(raw.iter().any(|p| p.0 > 0) && raw.iter().any(|p| p.1 > 0));
        let norm = |xs: Vec<u32>| {
            let t: u32 = xs.iter().sum();
            Histogram { bins: xs.iter().map(|&x| x as f64 / t as f64).collect(), normalized: true }
        };
        let h1 = norm(raw.iter().map(|p| p.0).collect());
        let h2 = norm(raw.iter().map(|p| p.1).collect());
        let (x, y) = (overlapped_area(&h1, &h2).unwrap(), overlapped_area(&h2, &h1).unwrap());
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&x));
        prop_assert!((overlapped_area(&h1, &h1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn melody_distance_symmetric_and_transposition_free(a in any::<u64>(), b in any::<u64>(), k in -7i16..8) {
        let (x, y) = (&song(a).notes, &song(b).notes);
        let d = melody_distance(x, y).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, melody_distance(y, x).unwrap());
        prop_assert_eq!(d, melody_distance(&transpose(x, k), y).unwrap());
        prop_assert_eq!(melody_distance(x, x).unwrap(), 0.0);
    }

    #[test]
    fn ingestion_report_reconciles(seed in any::<u64>(), n in 1usize..8, junk in 0usize..3) {
        let dict = toy_dictionary();
        let mut inputs: Vec<(String, Vec<u8>)> = (0..n)
            .map(|i| {
                let s = random_song(&mut ChaCha8Rng::seed_from_u64(seed ^ i as u64), &SongShape { words: 30..=50, ..SongShape::default() });
                (format!("f{i}"), write_midi(&song_to_raw(&s, 100.0), WriteOptions::default()))
            })
            .collect();
        for j in 0..junk {
            inputs.push((format!("junk{j}"), vec![0x4d, 0x54, j as u8]));
        }
        if n > 1 {
            inputs.push(("dup".into(), inputs[0].1.clone()));
        }
        let out = ingest_corpus(&inputs, dict, &IngestConfig::default());
        prop_assert!(out.report.reconciles());
        prop_assert_eq!(out.report.input, inputs.len());
        prop_assert_eq!(out.songs.len(), out.report.retained);
        prop_assert_eq!(out.rejections.len(), out.report.rejected_total());
    }

    #[test]
    fn midi_round_trip(seed in any::<u64>(), division in prop::sample::select(vec![480u16, 240, 960])) {
        let raw = song_to_raw(&song(seed), 96.0);
        let back = parse_midi(&write_midi(&raw, WriteOptions { division, running_status: seed % 2 == 0 })).unwrap();
        prop_assert_eq!(&back.tracks.concat(), &raw.tracks[0]);
        prop_assert_eq!(back.lyrics, raw.lyrics);
        prop_assert_eq!(back.time_signatures, raw.time_signatures);
    }
}

#[test]
fn lexicon_scores_decompose() {
    let (_, lex) = corpus();
    for family in Family::ALL {
        let fl = lex.family(family);
        assert!(!fl.is_empty());
        for e in &fl.entries {
            let s = e.score;
            assert_eq!(s.s, s.s_m + s.s_lm);
            assert!((0.0..=1.0).contains(&s.c));
            if s.m == 1 {
                assert_eq!(s.c, 1.0);
            }
        }
        assert!(fl.entries.windows(2).all(|w| w[0].score.s >= w[1].score.s));
    }
}

#[test]
fn span_nll_of_four_halves() {
    let notes: Vec<Note> = (0..8).map(|i| Note::at(i * 480, 60 + i as u8, 480, TempoClass::Moderato)).collect();
    let words = (0..8).map(|_| lyrmel::Word::new("la", vec![lyrmel::Stress::Primary])).collect();
    let s = AlignedSong::new(words, notes, (0..8).collect()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let set = sample_song_level(&s, &PretrainConfig::default(), &mut rng);
    let sample = build_sample(&s, &set, 1024, &mut rng).unwrap();
    assert_eq!(sample.target_positions().len(), 4);
    let nll = span_nll(&[0.5; 4], &sample).unwrap();
    assert!((nll - 4.0 * 2f64.ln()).abs() < 1e-12);
}
