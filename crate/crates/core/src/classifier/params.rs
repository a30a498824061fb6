//! Flat parameter storage and the model file format.
//!
//! All parameters live in one `Vec<f64>`; a [`Layout`] derived from the
//! [`ClassifierSpec`] names each tensor and its offset. Gradients use the same
//! layout, so the optimizer and the finite-difference checks work on plain
//! slices.
//!
//! Model file: the 8-byte magic `VTEMODEL`, a little-endian `u32` format
//! version, a `u32` header length, a JSON header (spec and free-form
//! metadata), a `u64` value count, then the values as little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierKind, ClassifierSpec};
use crate::{rng_from_seed, Error, Result};

const MAGIC: &[u8; 8] = b"VTEMODEL";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of one LSTM direction: input weights `4H x in`, recurrent
/// weights `4H x H`, bias `4H`. Gate order is input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellLayout {
    pub input: usize,
    pub hidden: usize,
    pub w_ih: usize,
    pub w_hh: usize,
    pub bias: usize,
}

/// Offsets of a dense layer `out x in` plus bias `out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseLayout {
    pub input: usize,
    pub output: usize,
    pub weight: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub tensors: Vec<TensorInfo>,
    /// `cells[layer][direction]`; empty for the linear model.
    pub cells: Vec<Vec<CellLayout>>,
    /// First dense layer of the linear model.
    pub hidden_dense: Option<DenseLayout>,
    pub head: DenseLayout,
    pub total: usize,
}

impl Layout {
    pub fn new(spec: &ClassifierSpec) -> Self {
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize| {
            let start = offset;
            tensors.push(TensorInfo {
                name,
                offset: start,
                rows,
                cols,
            });
            offset += rows * cols;
            start
        };
        let h = spec.hidden_size;
        let mut cells = Vec::new();
        let mut hidden_dense = None;
        let head_input = match spec.kind {
            ClassifierKind::Linear => {
                let weight = push("dense1.weight".into(), h, spec.input_dim);
                let bias = push("dense1.bias".into(), h, 1);
                hidden_dense = Some(DenseLayout {
                    input: spec.input_dim,
                    output: h,
                    weight,
                    bias,
                });
                h
            }
            ClassifierKind::Lstm | ClassifierKind::BiLstm => {
                let dirs = spec.kind.directions();
                for layer in 0..spec.num_layers {
                    let input = if layer == 0 { spec.input_dim } else { dirs * h };
                    let mut per_dir = Vec::new();
                    for d in 0..dirs {
                        let tag = if d == 0 { "fwd" } else { "bwd" };
                        let w_ih = push(format!("lstm{layer}.{tag}.w_ih"), 4 * h, input);
                        let w_hh = push(format!("lstm{layer}.{tag}.w_hh"), 4 * h, h);
                        let bias = push(format!("lstm{layer}.{tag}.bias"), 4 * h, 1);
                        per_dir.push(CellLayout {
                            input,
                            hidden: h,
                            w_ih,
                            w_hh,
                            bias,
                        });
                    }
                    cells.push(per_dir);
                }
                dirs * h
            }
        };
        let weight = push("head.weight".into(), spec.num_classes, head_input);
        let bias = push("head.bias".into(), spec.num_classes, 1);
        Layout {
            tensors,
            cells,
            hidden_dense,
            head: DenseLayout {
                input: head_input,
                output: spec.num_classes,
                weight,
                bias,
            },
            total: offset,
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorInfo> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// Trainable parameters of one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ClassifierSpec,
    layout: Layout,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ClassifierSpec,
    #[serde(default)]
    metadata: serde_json::Value,
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(spec: &ClassifierSpec) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(spec);
        Ok(ModelParams {
            spec: spec.clone(),
            values: vec![0.0; layout.total],
            layout,
        })
    }

    /// Seeded initialization: every weight uniform in `±1/sqrt(fan)` with
    /// `fan` the hidden size for recurrent cells and the input width for
    /// dense layers; LSTM forget-gate biases start at 1, dense biases at 0.
    pub fn init(spec: &ClassifierSpec, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        let mut rng = rng_from_seed(seed);
        let layout = params.layout.clone();
        for per_dir in &layout.cells {
            for cell in per_dir {
                let bound = 1.0 / (cell.hidden as f64).sqrt();
                let n = 4 * cell.hidden * (cell.input + cell.hidden + 1);
                for v in &mut params.values[cell.w_ih..cell.w_ih + n] {
                    *v = rng.random_range(-bound..bound);
                }
                let forget = cell.bias + cell.hidden..cell.bias + 2 * cell.hidden;
                params.values[forget].fill(1.0);
            }
        }
        for dense in layout.hidden_dense.iter().chain(std::iter::once(&layout.head)) {
            let bound = 1.0 / (dense.input as f64).sqrt();
            for v in &mut params.values[dense.weight..dense.weight + dense.input * dense.output] {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.tensor(name).map(|t| &self.values[t.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.tensor(name)?.range();
        Some(&mut self.values[range])
    }

    pub fn write<W: Write>(&self, w: &mut W, metadata: &serde_json::Value) -> Result<()> {
        let header = serde_json::to_vec(&Header {
            spec: self.spec.clone(),
            metadata: metadata.clone(),
        })
        .map_err(|e| Error::Format(e.to_string()))?;
        let io = |e: std::io::Error| Error::Format(format!("writing model: {e}"));
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(header.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&header).map_err(io)?;
        w.write_all(&(self.values.len() as u64).to_le_bytes()).map_err(io)?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<(Self, serde_json::Value)> {
        let io = |e: std::io::Error| Error::Format(format!("reading model: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model file".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(io)?;
        let version = u32::from_le_bytes(word);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format version {version}")));
        }
        r.read_exact(&mut word).map_err(io)?;
        let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut header).map_err(io)?;
        let header: Header =
            serde_json::from_slice(&header).map_err(|e| Error::Format(format!("model header: {e}")))?;
        let mut count = [0u8; 8];
        r.read_exact(&mut count).map_err(io)?;
        let count = u64::from_le_bytes(count) as usize;
        let mut params = Self::zeros(&header.spec)?;
        if count != params.values.len() {
            return Err(Error::Format(format!(
                "model holds {count} values, spec needs {}",
                params.values.len()
            )));
        }
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes).map_err(io)?;
        for (v, b) in params.values.iter_mut().zip(bytes.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
        }
        if params.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("model contains non-finite values".into()));
        }
        Ok((params, header.metadata))
    }

    pub fn save(&self, path: impl AsRef<Path>, metadata: &serde_json::Value) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w, metadata)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, serde_json::Value)> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(&mut std::io::BufReader::new(file))
    }
}
