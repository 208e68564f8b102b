//! Named parameter store with a bit-exact binary checkpoint format.
//!
//! Checkpoint layout (little-endian):
//! `b"HENINPRM"` magic, `u32` version, `u64` parameter count, then per
//! parameter: `u32` name length + UTF-8 name, `u64` rows, `u64` cols,
//! `rows*cols` raw `f64` values in row-major order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{HeninError, Result};

const MAGIC: &[u8; 8] = b"HENINPRM";
const VERSION: u32 = 1;

/// Gradients keyed by parameter name.
pub type GradMap = BTreeMap<String, Array2<f64>>;

/// Every learnable matrix/vector of a model, addressable by name.
/// Iteration order is the name order, so all traversals are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParams {
    tensors: BTreeMap<String, Array2<f64>>,
}

impl ModelParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) {
        let name = name.into();
        assert!(
            !self.tensors.contains_key(&name),
            "duplicate parameter name '{name}'"
        );
        self.tensors.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Result<&Array2<f64>> {
        self.tensors
            .get(name)
            .ok_or_else(|| HeninError::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array2<f64>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| HeninError::UnknownParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(self.tensors.len() as u64)?;
        for (name, tensor) in &self.tensors {
            w.write_u32::<LittleEndian>(name.len() as u32)?;
            w.write_all(name.as_bytes())?;
            w.write_u64::<LittleEndian>(tensor.nrows() as u64)?;
            w.write_u64::<LittleEndian>(tensor.ncols() as u64)?;
            for &v in tensor.iter() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(HeninError::Checkpoint("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(HeninError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let count = r.read_u64::<LittleEndian>()?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.read_u32::<LittleEndian>()? as usize;
            let mut name_buf = vec![0u8; name_len];
            r.read_exact(&mut name_buf)?;
            let name = String::from_utf8(name_buf)
                .map_err(|_| HeninError::Checkpoint("non-UTF-8 parameter name".into()))?;
            let rows = r.read_u64::<LittleEndian>()? as usize;
            let cols = r.read_u64::<LittleEndian>()? as usize;
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                values.push(r.read_f64::<LittleEndian>()?);
            }
            let tensor = Array2::from_shape_vec((rows, cols), values)
                .map_err(|e| HeninError::Checkpoint(e.to_string()))?;
            tensors.insert(name, tensor);
        }
        Ok(Self { tensors })
    }

    pub fn save_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.save(std::io::BufWriter::new(file))
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(file))
    }
}

/// Fan-based uniform init: U(-limit, limit) with limit = sqrt(6/(fan_in+fan_out)).
pub fn glorot_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}
