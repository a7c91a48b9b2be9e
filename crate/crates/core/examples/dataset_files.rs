//! Writes a synthetic corpus as a tab-separated dataset plus a word-vector
//! file, reads it back, and shows that embeddings survive the round trip.

use oris::corpus::{generate_synthetic, load_dataset, load_word_vectors, materialize_tokens, write_dataset, write_word_vectors, LabelSpace};

fn main() -> oris::Result<()> {
    let dir = std::env::temp_dir().join("oris-dataset-example");
    std::fs::create_dir_all(&dir).map_err(|e| oris::OrisError::Invalid(e.to_string()))?;
    let labels = LabelSpace::new(["sadness", "joy", "surprise", "anger", "fear"])?;
    let mut docs = generate_synthetic(&labels, &[4, 4, 1, 2, 2], 5, 3.0, 0)?;
    let table = materialize_tokens(&mut docs, "doc");

    write_dataset(&docs, &labels, dir.join("train.tsv"))?;
    write_word_vectors(&table, dir.join("vectors.txt"))?;
    let table = load_word_vectors(dir.join("vectors.txt"))?;
    let loaded = load_dataset(dir.join("train.tsv"), &table, &labels)?;

    let same = docs.iter().zip(&loaded).all(|(a, b)| a.embedding == b.embedding && a.true_class == b.true_class);
    println!("wrote and reloaded {} documents from {}", loaded.len(), dir.display());
    println!("embeddings and labels identical: {same}");
    for d in loaded.iter().take(3) {
        println!("  {:?} {} {:?}", d.tokens, labels.name(d.true_class), &d.embedding[..3]);
    }
    Ok(())
}
