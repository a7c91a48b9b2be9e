//! Tokenizes a few documents and embeds them by averaging word vectors.
//! Out-of-vocabulary tokens are skipped; a document with no known token
//! gets the zero vector.

use oris::corpus::{embed_document, tokenize, EmbeddingTable};

fn main() -> oris::Result<()> {
    let mut table = EmbeddingTable::new(3);
    table.insert("happy", vec![1.0, 0.0, 0.0])?;
    table.insert("sad", vec![0.0, 1.0, 0.0])?;
    table.insert("very", vec![0.0, 0.0, 1.0])?;

    for text in ["Very happy!", "sad, sad, very SAD...", "quantum chromodynamics"] {
        let tokens = tokenize(text);
        let v = embed_document(&tokens, &table);
        println!("{text:<26} tokens {tokens:?} -> {v:?}");
    }
    Ok(())
}
