//! Regenerates the bundled toy files under `data/`.
//!
//! ```text
//! cargo run -p herman-core --example toy_data -- data
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use herman_core::text::{write_jsonl, CorpusLine};
use herman_core::toy;

fn main() -> herman_core::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    let corpus: Vec<CorpusLine> = toy::corpus(toy::CORPUS_SIZE, toy::CORPUS_SEED).iter().map(Into::into).collect();
    write_jsonl(BufWriter::new(File::create(dir.join("toy_corpus.jsonl"))?), &corpus)?;

    let beams = toy::beams(toy::BEAM_COUNT, toy::BEAM_SIZE, toy::BEAM_SEED);
    let lines: Vec<_> = beams.iter().map(|b| b.beam.clone()).collect();
    write_jsonl(BufWriter::new(File::create(dir.join("toy_beams.jsonl"))?), &lines)?;
    let refs: Vec<CorpusLine> = beams
        .iter()
        .map(|b| CorpusLine { id: b.beam.id.clone(), article: b.beam.article.clone(), summary: b.reference.clone() })
        .collect();
    write_jsonl(BufWriter::new(File::create(dir.join("toy_references.jsonl"))?), &refs)?;
    println!("wrote {} records and {} beams to {}", corpus.len(), lines.len(), dir.display());
    Ok(())
}
