//! Binary checkpoint: magic, version, a JSON header describing the run
//! and tensor layout, then raw little-endian `f32` tensor data.
//!
//! ```text
//! b"MEMBCKPT" | u32 version | u64 header_len | header JSON | tensors...
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Token, Variant, Vocabulary};
use crate::matrix::Matrix;

use super::{EmbeddingMatrix, LstmParameters, Model, ModelError, TrainConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MEMBCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub variant: Variant,
    pub config: TrainConfig,
    pub model: Model<f32>,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    variant: Variant,
    config: TrainConfig,
    vocabulary: Vec<Token>,
    dtype: String,
    tensors: Vec<TensorInfo>,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn embedding_dim(&self) -> usize {
        self.model.embedding.dim()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        self.model.embedding.vocabulary()
    }

    fn shapes(vocab: usize, dim: usize, hidden: usize) -> Vec<(usize, usize)> {
        let mut shapes = vec![(vocab, dim)];
        shapes.extend([(hidden, dim + hidden); 4]);
        shapes.extend([(1, hidden); 4]);
        shapes.push((vocab, hidden));
        shapes.push((1, vocab));
        shapes
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let lstm = &self.model.lstm;
        let tensors = self.model.tensors();
        let shapes = Self::shapes(self.model.vocab(), self.embedding_dim(), lstm.hidden());
        let header = Header {
            variant: self.variant,
            config: self.config.clone(),
            vocabulary: self.vocabulary().tokens().to_vec(),
            dtype: "f32".into(),
            tensors: tensors
                .iter()
                .zip(&shapes)
                .map(|((name, _), &(rows, cols))| TensorInfo { name: name.clone(), rows, cols })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend(VERSION.to_le_bytes());
        out.extend((json.len() as u64).to_le_bytes());
        out.extend(json);
        for (_, t) in tensors {
            for x in t {
                out.extend(x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("file too short"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(|_| bad("missing version"))?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| bad("missing header length"))?;
        let len = u64::from_le_bytes(len) as usize;
        if r.len() < len {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&r[..len]).map_err(|e| bad(format!("header: {e}")))?;
        r = &r[len..];
        if header.dtype != "f32" {
            return Err(bad(format!("unsupported dtype {}", header.dtype)));
        }

        let vocabulary = Vocabulary::from_tokens(header.vocabulary.iter().copied());
        if vocabulary.tokens() != header.vocabulary.as_slice() || vocabulary.is_empty() {
            return Err(bad("vocabulary must be non-empty, sorted and distinct"));
        }
        let (dim, hidden) = (header.config.embedding_dim, header.config.hidden_size);
        let shapes = Self::shapes(vocabulary.len(), dim, hidden);
        if header.tensors.len() != shapes.len()
            || header.tensors.iter().zip(&shapes).any(|(t, &s)| (t.rows, t.cols) != s)
        {
            return Err(bad("tensor shapes disagree with config and vocabulary"));
        }
        let expected: usize = shapes.iter().map(|(a, b)| a * b).sum::<usize>() * 4;
        if r.len() != expected {
            return Err(bad(format!("expected {expected} bytes of tensor data, found {}", r.len())));
        }

        let mut floats = r.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        let mut take = |(rows, cols): (usize, usize)| -> Matrix<f32> {
            Matrix::from_vec(rows, cols, floats.by_ref().take(rows * cols).collect())
        };
        let embedding = take(shapes[0]);
        let mut lstm = LstmParameters::<f32>::zeros(vocabulary.len(), dim, hidden);
        for k in 0..4 {
            lstm.gate_weights[k] = take(shapes[1 + k]);
        }
        for k in 0..4 {
            lstm.gate_biases[k] = take(shapes[5 + k]).as_slice().to_vec();
        }
        lstm.output_weights = take(shapes[9]);
        lstm.output_bias = take(shapes[10]).as_slice().to_vec();

        let model = Model { embedding: EmbeddingMatrix::new(vocabulary, embedding), lstm };
        if !model.is_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(Self { variant: header.variant, config: header.config, model })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
