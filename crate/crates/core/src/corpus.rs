//! Labels, documents, word vectors and streams.
//!
//! Documents carry a precomputed dense embedding: the mean of the word
//! vectors of their in-vocabulary tokens. Out-of-vocabulary tokens are
//! dropped from both the sum and the count, so a document with no known
//! token embeds to the zero vector.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{OrisError, Result};

/// Ordered, duplicate-free set of class names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    classes: Vec<String>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(classes: impl IntoIterator<Item = S>) -> Result<Self> {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        if classes.len() < 2 {
            return Err(OrisError::Invalid(format!(
                "a label space needs at least 2 classes, got {}",
                classes.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(OrisError::Invalid(format!("duplicate class name {c:?}")));
            }
        }
        Ok(LabelSpace { classes })
    }

    /// Class names `c0, c1, ...`.
    pub fn numbered(count: usize) -> Result<Self> {
        Self::new((0..count).map(|i| format!("c{i}")))
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn names(&self) -> &[String] {
        &self.classes
    }
}

/// One stream item.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: usize,
    pub tokens: Vec<String>,
    pub true_class: usize,
    pub embedding: Vec<f64>,
}

/// Word to vector lookup; words are lowercased on insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Inserts a vector; the first occurrence of a (lowercased) word wins.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(OrisError::Shape {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.vectors.entry(word.to_lowercase()).or_insert(vector);
        Ok(())
    }

    /// Adds every word of `other` not already present.
    pub fn merge(&mut self, other: EmbeddingTable) -> Result<()> {
        if other.dim != self.dim && !other.is_empty() {
            return Err(OrisError::Shape {
                expected: self.dim,
                actual: other.dim,
            });
        }
        for (w, v) in other.vectors {
            self.vectors.entry(w).or_insert(v);
        }
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Lowercases, splits on whitespace and trims ASCII punctuation from both
/// ends of every token. Tokens that become empty are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Reads the `<count> <dim>` header format.
///
/// Rows whose word is followed by unparseable numbers are skipped with a
/// warning. A row with the wrong number of components is a hard error.
pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| OrisError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, message: String| OrisError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let (_, header) = lines
        .next()
        .ok_or_else(|| OrisError::Empty(path.display().to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(parse_err(1, format!("bad header {header:?}"))),
        },
        _ => return Err(parse_err(1, format!("bad header {header:?}"))),
    };

    let mut table = EmbeddingTable::new(dim);
    let mut skipped = 0usize;
    for (i, line) in lines {
        let lineno = i + 1;
        let mut parts = line.split(' ').filter(|s| !s.is_empty());
        let Some(word) = parts.next() else {
            continue;
        };
        let raw: Vec<&str> = parts.collect();
        if raw.len() != dim {
            return Err(parse_err(
                lineno,
                format!("expected {dim} components, found {}", raw.len()),
            ));
        }
        match raw.iter().map(|v| v.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>() {
            Ok(v) => table.insert(word, v)?,
            Err(e) => {
                skipped += 1;
                warn!("{}:{lineno}: skipping malformed row for {word:?}: {e}", path.display());
            }
        }
    }
    if table.len() + skipped != count {
        warn!(
            "{}: header declares {count} words, read {} ({skipped} skipped)",
            path.display(),
            table.len()
        );
    }
    Ok(table)
}

/// Writes a table in the format read by [`load_word_vectors`], with
/// 17 significant digits so values round-trip exactly. Words are sorted.
pub fn write_word_vectors(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| OrisError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut words: Vec<&String> = table.vectors.keys().collect();
    words.sort();
    let io = |e| OrisError::io(path, e);
    writeln!(out, "{} {}", words.len(), table.dim).map_err(io)?;
    for w in words {
        write!(out, "{w}").map_err(io)?;
        for v in &table.vectors[w] {
            write!(out, " {v:.16e}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Mean of the vectors of in-vocabulary tokens.
pub fn embed_document<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for tok in tokens {
        if let Some(v) = table.get(tok.as_ref()) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        let n = n as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sum
}

/// Reads `<text>\t<label-name>` records. Blank lines are ignored.
pub fn load_dataset(
    path: impl AsRef<Path>,
    table: &EmbeddingTable,
    labels: &LabelSpace,
) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| OrisError::io(path, e))?;
    let mut docs = Vec::new();
    let mut unknown = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((body, label)) = line.rsplit_once('\t') else {
            return Err(OrisError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "missing tab separator".into(),
            });
        };
        let label = label.trim();
        match labels.index_of(label) {
            Some(class) => {
                let tokens = tokenize(body);
                let embedding = embed_document(&tokens, table);
                docs.push(Document {
                    id: docs.len(),
                    tokens,
                    true_class: class,
                    embedding,
                });
            }
            None => unknown.push((i + 1, label.to_owned())),
        }
    }
    if !unknown.is_empty() {
        return Err(OrisError::UnknownLabels {
            path: path.to_path_buf(),
            offending: unknown,
        });
    }
    if docs.is_empty() {
        return Err(OrisError::Empty(path.display().to_string()));
    }
    Ok(docs)
}

/// Writes documents as dataset records, tokens joined by single spaces.
pub fn write_dataset(docs: &[Document], labels: &LabelSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| OrisError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| OrisError::io(path, e);
    for d in docs {
        writeln!(out, "{}\t{}", d.tokens.join(" "), labels.name(d.true_class)).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Class-conditional Gaussian corpus: class `c` has mean `sep * e_c` and
/// identity covariance in `dim` dimensions. Documents are emitted class by
/// class with sequential ids and no tokens.
pub fn generate_synthetic(
    labels: &LabelSpace,
    per_class: &[usize],
    dim: usize,
    sep: f64,
    seed: u64,
) -> Result<Vec<Document>> {
    if per_class.len() != labels.len() {
        return Err(OrisError::Shape {
            expected: labels.len(),
            actual: per_class.len(),
        });
    }
    if dim < labels.len() {
        return Err(OrisError::Invalid(format!(
            "embedding dimension {dim} is smaller than the class count {}",
            labels.len()
        )));
    }
    if !(sep >= 0.0) {
        return Err(OrisError::Invalid(format!("separation must be >= 0, got {sep}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(per_class.iter().sum());
    for (class, &count) in per_class.iter().enumerate() {
        for _ in 0..count {
            let mut embedding: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            embedding[class] += sep;
            docs.push(Document {
                id: docs.len(),
                tokens: Vec::new(),
                true_class: class,
                embedding,
            });
        }
    }
    Ok(docs)
}

/// Splits `total` documents across classes in the given proportions using
/// largest-remainder rounding, so the counts sum to `total` exactly.
pub fn proportional_counts(proportions: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = proportions.iter().sum();
    let exact: Vec<f64> = proportions.iter().map(|p| p / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let missing = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    counts
}

/// Gives every document a unique token whose vector is its embedding, so a
/// token-less corpus can be written as a dataset plus a word-vector file and
/// loaded back with identical embeddings.
pub fn materialize_tokens(docs: &mut [Document], prefix: &str) -> EmbeddingTable {
    let dim = docs.first().map_or(0, |d| d.embedding.len());
    let mut table = EmbeddingTable::new(dim);
    for d in docs.iter_mut() {
        let word = format!("{prefix}{}", d.id);
        table
            .vectors
            .insert(word.clone(), d.embedding.clone());
        d.tokens = vec![word];
    }
    table
}

/// Single-pass cursor over a seeded permutation of a document list.
#[derive(Debug, Clone)]
pub struct StreamSource<'a> {
    docs: &'a [Document],
    order: Vec<usize>,
    cursor: usize,
    seed: u64,
}

impl<'a> StreamSource<'a> {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.order.len() - self.cursor
    }

    /// Document that the next call to `next` will return.
    pub fn peek(&self) -> Option<&'a Document> {
        self.order.get(self.cursor).map(|&i| &self.docs[i])
    }

    /// Stream order as document ids.
    pub fn ids(&self) -> Vec<usize> {
        self.order.iter().map(|&i| self.docs[i].id).collect()
    }
}

impl<'a> Iterator for StreamSource<'a> {
    type Item = &'a Document;

    fn next(&mut self) -> Option<&'a Document> {
        let doc = self.peek()?;
        self.cursor += 1;
        Some(doc)
    }
}

pub fn shuffle_stream(docs: &[Document], seed: u64) -> Result<StreamSource<'_>> {
    if docs.is_empty() {
        return Err(OrisError::Empty("document stream".into()));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(StreamSource {
        docs,
        order,
        cursor: 0,
        seed,
    })
}
