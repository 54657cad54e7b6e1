//! Writes the bundled toy corpus: `toy_corpus <dir> [seed]`.

use std::path::PathBuf;

use lyrmel::synthetic::{toy_midi_corpus, TOY_DICTIONARY};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/toy".into()));
    let seed = args.next().map_or(7, |s| s.parse().expect("seed must be an integer"));
    std::fs::create_dir_all(dir.join("midi"))?;
    for (name, bytes) in toy_midi_corpus(seed) {
        std::fs::write(dir.join("midi").join(name), bytes)?;
    }
    std::fs::write(dir.join("dictionary.txt"), TOY_DICTIONARY)?;
    Ok(())
}
