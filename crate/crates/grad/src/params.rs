use crate::error::GradError;
use crate::tensor::Tensor;
use std::collections::HashMap;

/// Handle to a named parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

struct Entry {
    name: String,
    tensor: Tensor,
}

/// Flat registry of learnable tensors. Iteration order is registration
/// order, which keeps checkpoints and optimizer sweeps deterministic.
#[derive(Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, init: Tensor) -> Result<ParamId, GradError> {
        if self.by_name.contains_key(name) {
            return Err(GradError::DuplicateParam(name.to_string()));
        }
        let id = self.entries.len();
        self.by_name.insert(name.to_string(), id);
        self.entries.push(Entry {
            name: name.to_string(),
            tensor: init.with_grad(),
        });
        Ok(ParamId(id))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    /// Ids of every parameter whose name starts with `prefix`, in
    /// registration order.
    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.name.starts_with(prefix))
            .map(|(i, _)| ParamId(i))
            .collect()
    }

    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.numel()).sum()
    }
}

/// Per-parameter gradient buffers produced by a backward pass.
pub struct Gradients {
    buffers: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn empty(params: usize) -> Self {
        Gradients {
            buffers: (0..params).map(|_| None).collect(),
        }
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &[f64]) {
        match &mut self.buffers[id.0] {
            Some(buf) => {
                for (b, &g) in buf.iter_mut().zip(grad) {
                    *b += g;
                }
            }
            slot => *slot = Some(grad.to_vec()),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.buffers.get(id.0).and_then(|b| b.as_deref())
    }

    /// Merge another gradient set into this one.
    pub fn merge(&mut self, other: &Gradients) {
        for (i, buf) in other.buffers.iter().enumerate() {
            if let Some(g) = buf {
                self.accumulate(ParamId(i), g);
            }
        }
    }
}
