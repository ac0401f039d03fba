//! Named parameter store. Models register their parameters once in a fixed
//! order; every training step binds the current values as fresh leaf
//! variables, runs the graph, and collects gradients back by name.
//!
//! Initialization draws in f64 from a seeded generator before casting, so
//! the f32 training path and the f64 gradient-checking path see the same
//! values.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tensor_core::{Gradients, Scalar, Tensor};

use crate::error::{GformerError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    Const(f64),
    /// Zero-mean normal with the given standard deviation.
    Normal(f64),
    /// Normal scaled by 1/sqrt(fan_in), fan given explicitly.
    FanIn(usize),
}

#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

/// Ordered registry of parameter specs; the registration order defines the
/// checkpoint layout and the optimizer slot order.
#[derive(Debug, Default, Clone)]
pub struct ParamLayout {
    specs: Vec<ParamSpec>,
    index: HashMap<String, usize>,
}

impl ParamLayout {
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name {name}"
        );
        self.index.insert(name.clone(), self.specs.len());
        self.specs.push(ParamSpec {
            name,
            shape: shape.to_vec(),
            init,
        });
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    /// Materialize parameter values from a seed.
    pub fn init_params<T: Scalar>(&self, seed: u64) -> ParamSet<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = self
            .specs
            .iter()
            .map(|spec| {
                let n: usize = spec.shape.iter().product();
                let data: Vec<T> = match spec.init {
                    Init::Zeros => vec![T::zero(); n],
                    Init::Ones => vec![T::one(); n],
                    Init::Const(c) => vec![T::from_f64_c(c); n],
                    Init::Normal(std) => {
                        let dist = Normal::new(0.0f64, std).expect("valid std");
                        (0..n).map(|_| T::from_f64_c(dist.sample(&mut rng))).collect()
                    }
                    Init::FanIn(fan) => {
                        let std = (1.0 / fan as f64).sqrt();
                        let dist = Normal::new(0.0f64, std).expect("valid std");
                        (0..n).map(|_| T::from_f64_c(dist.sample(&mut rng))).collect()
                    }
                };
                ParamEntry {
                    name: spec.name.clone(),
                    shape: spec.shape.clone(),
                    data,
                }
            })
            .collect();
        ParamSet {
            entries,
            index: self.index.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamEntry<T: Scalar> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Current parameter values, in layout order.
#[derive(Debug, Clone)]
pub struct ParamSet<T: Scalar> {
    entries: Vec<ParamEntry<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParamSet<T> {
    /// Rebuild a set from raw entries (checkpoint loading).
    pub fn from_entries(entries: Vec<ParamEntry<T>>) -> ParamSet<T> {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        ParamSet { entries, index }
    }

    /// True if both sets list the same names and shapes in the same order.
    pub fn layout_matches(&self, other: &ParamSet<T>) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.data.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry<T>> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamEntry<T>> {
        let i = *self.index.get(name)?;
        Some(&mut self.entries[i])
    }

    /// Overwrite entries whose name carries the given prefix with values
    /// from another set (used to warm-start the decoder from a pretrained
    /// prior). Shapes must match; returns how many entries were copied.
    pub fn adopt_prefix(&mut self, other: &ParamSet<T>, prefix: &str) -> Result<usize> {
        let mut copied = 0;
        for entry in &mut self.entries {
            if !entry.name.starts_with(prefix) {
                continue;
            }
            let src = other.get(&entry.name).ok_or_else(|| {
                GformerError::Checkpoint(format!("source set lacks parameter {}", entry.name))
            })?;
            if src.shape != entry.shape {
                return Err(GformerError::Checkpoint(format!(
                    "parameter {} shape mismatch: {:?} vs {:?}",
                    entry.name, src.shape, entry.shape
                )));
            }
            entry.data = src.data.clone();
            copied += 1;
        }
        Ok(copied)
    }

    /// Zero every entry whose name starts with the prefix (test hook for
    /// residual-identity checks and prior freezing experiments).
    pub fn zero_prefix(&mut self, prefix: &str) -> usize {
        let mut n = 0;
        for e in &mut self.entries {
            if e.name.starts_with(prefix) {
                e.data.iter_mut().for_each(|v| *v = T::zero());
                n += 1;
            }
        }
        n
    }

    /// Names of all entries, in layout order.
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    /// Cast every entry (f32 <-> f64 bridging for the gradcheck path).
    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    data: e.data.iter().map(|v| U::from_f64_c(v.to_f64_c())).collect(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Bind current values as leaf variables for one forward/backward pass.
    pub fn bind(&self) -> Bound<T> {
        let leaves = self
            .entries
            .iter()
            .map(|e| Tensor::var(e.data.clone(), &e.shape).expect("entry shape"))
            .collect();
        Bound {
            leaves,
            index: self.index.clone(),
        }
    }

    /// Bind externally supplied leaves (the gradient checker perturbs them).
    pub fn bind_leaves(&self, leaves: Vec<Tensor<T>>) -> Bound<T> {
        assert_eq!(leaves.len(), self.entries.len());
        Bound {
            leaves,
            index: self.index.clone(),
        }
    }

    /// Gradients in layout order; zeros for parameters the loss ignored.
    pub fn collect_grads(&self, bound: &Bound<T>, grads: &Gradients<T>) -> Vec<Vec<T>> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                grads
                    .get(&bound.leaves[i])
                    .map(|g| g.to_vec())
                    .unwrap_or_else(|| vec![T::zero(); e.data.len()])
            })
            .collect()
    }

    /// Parameter buffers as mutable slices for the optimizer.
    pub fn data_mut(&mut self) -> Vec<&mut Vec<T>> {
        self.entries.iter_mut().map(|e| &mut e.data).collect()
    }

    pub fn param_lens(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.data.len()).collect()
    }
}

/// Leaf tensors for one pass, addressable by parameter name.
pub struct Bound<T: Scalar> {
    leaves: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Bound<T> {
    pub fn get(&self, name: &str) -> &Tensor<T> {
        let i = *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        &self.leaves[i]
    }

    pub fn leaves(&self) -> &[Tensor<T>] {
        &self.leaves
    }
}
