//! Fixed per-sample embedding vectors and the similarity measures built on them.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use crate::corpus::{AnnotatorIdx, Corpus, SampleIdx};
use crate::error::{Error, Result};
use crate::pool::LabeledPool;

pub mod pca;

pub use pca::{fit_pca, PcaModel};

/// Row-major embedding matrix; row `i` belongs to `ids[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, actual: 0 });
        }
        if data.len() != dim * ids.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * ids.len(),
                actual: data.len(),
            });
        }
        for (id, row) in ids.iter().zip(data.chunks(dim)) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(id.clone()));
            }
        }
        Ok(EmbeddingMatrix { dim, ids, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row for a corpus sample. The matrix must have been loaded with the
    /// corpus sample ids as `expected_ids`.
    pub fn row(&self, s: SampleIdx) -> &[f64] {
        &self.data[s.0 * self.dim..(s.0 + 1) * self.dim]
    }

    pub fn row_by_id(&self, id: &str) -> Option<&[f64]> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Checks that rows line up with the corpus sample order.
    pub fn is_aligned_with(&self, corpus: &Corpus) -> bool {
        self.ids.len() == corpus.num_samples() && self.ids.iter().map(String::as_str).eq(corpus.sample_ids())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["sample_id".to_string()];
        header.extend((0..self.dim).map(|i| format!("v{i}")));
        writer.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(self.data.chunks(self.dim)) {
            let mut record = Vec::with_capacity(self.dim + 1);
            record.push(id.clone());
            // `{:?}` prints the shortest string that round-trips exactly
            record.extend(row.iter().map(|v| format!("{v:?}")));
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Reads an embeddings CSV (`sample_id,v0,...,v{d-1}`) and returns the rows of
/// `expected_ids`, in that order. Rows for other ids are ignored.
pub fn load_embeddings<'a>(path: &Path, expected_ids: impl IntoIterator<Item = &'a str>) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers()?.clone();
    if header.len() < 2 || &header[0] != "sample_id" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: "expected header `sample_id,v0,...`".into(),
        });
    }
    let dim = header.len() - 1;

    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: record.len().saturating_sub(1),
            });
        }
        let id = record[0].to_string();
        let values = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    message: format!("{cell:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(id));
        }
        if rows.insert(id.clone(), values).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                message: format!("duplicate sample id {id:?}"),
            });
        }
    }

    let mut ids = Vec::new();
    let mut data = Vec::new();
    for id in expected_ids {
        let row = rows.get(id).ok_or_else(|| Error::MissingEmbedding(id.to_string()))?;
        ids.push(id.to_string());
        data.extend_from_slice(row);
    }
    EmbeddingMatrix::new(dim, ids, data)
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let denom = norm(u) * norm(v);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(u, v) / denom).clamp(-1.0, 1.0))
}

/// Mean cosine similarity between `sample` and every sample in `history`.
pub fn mean_similarity_to_history(sample: SampleIdx, history: &[SampleIdx], emb: &EmbeddingMatrix) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let x = emb.row(sample);
    let mut total = 0.0;
    for &h in history {
        total += cosine_similarity(x, emb.row(h))?;
    }
    Ok(total / history.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatorRepresentation {
    pub annotator: AnnotatorIdx,
    /// Mean of `[embedding(sample) ++ one_hot(label)]` over the history.
    pub vector: Vec<f64>,
    pub history_size: usize,
}

/// Averages `embedding ++ one_hot(label)` over the annotator's consumed triples.
pub fn annotator_representation(
    annotator: AnnotatorIdx,
    labeled: &LabeledPool,
    corpus: &Corpus,
    emb: &EmbeddingMatrix,
) -> Result<AnnotatorRepresentation> {
    let history = labeled.history(annotator);
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let d = emb.dim();
    let mut vector = vec![0.0; d + corpus.num_classes()];
    for &t in history {
        let triple = corpus.triple(t);
        for (acc, x) in vector.iter_mut().zip(emb.row(triple.sample)) {
            *acc += x;
        }
        vector[d + triple.label] += 1.0;
    }
    let n = history.len() as f64;
    vector.iter_mut().for_each(|v| *v /= n);
    Ok(AnnotatorRepresentation {
        annotator,
        vector,
        history_size: history.len(),
    })
}
