use super::Tensor;
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Weight and bias of one named layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Named parameters. Layers that share a name share one entry, which is how
/// weight tying works. Every mutation bumps a version counter so that caches
/// taken before the mutation are recognized as stale.
#[derive(Debug)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    id: u64,
    version: u64,
}

impl Default for ParamStore {
    fn default() -> Self {
        ParamStore {
            params: BTreeMap::new(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        ParamStore {
            params: self.params.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity of this store's current contents, recorded by forward caches.
    pub fn stamp(&self) -> (u64, u64) {
        (self.id, self.version)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&Param> {
        self.params
            .get(name)
            .ok_or_else(|| Error::shape(name, "no parameters under this name"))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.version += 1;
        self.params.get_mut(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, p: Param) {
        self.version += 1;
        self.params.insert(name.into(), p);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.version += 1;
        self.params.iter_mut()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.params.values().map(|p| p.weight.len() + p.bias.len()).sum()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamStore {
        let mut out = ParamStore::new();
        for (k, p) in &self.params {
            out.params.insert(
                k.clone(),
                Param {
                    weight: Tensor::zeros(p.weight.shape()),
                    bias: Tensor::zeros(p.bias.shape()),
                },
            );
        }
        out
    }

    /// Adds `other` entrywise; names absent here are inserted.
    pub fn accumulate(&mut self, other: &ParamStore) -> Result<()> {
        self.version += 1;
        for (k, p) in &other.params {
            match self.params.get_mut(k) {
                Some(q) => {
                    if q.weight.shape() != p.weight.shape() || q.bias.shape() != p.bias.shape() {
                        return Err(Error::shape(k, "gradient shapes disagree"));
                    }
                    for (a, b) in q.weight.data_mut().iter_mut().zip(p.weight.data()) {
                        *a += b;
                    }
                    for (a, b) in q.bias.data_mut().iter_mut().zip(p.bias.data()) {
                        *a += b;
                    }
                }
                None => {
                    self.params.insert(k.clone(), p.clone());
                }
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, p) in self.iter_mut() {
            p.weight.data_mut().iter_mut().for_each(|v| *v *= factor);
            p.bias.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Largest absolute entry; zero for an empty store.
    pub fn max_abs(&self) -> f64 {
        self.params
            .values()
            .flat_map(|p| p.weight.data().iter().chain(p.bias.data()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Flat view of every value in name order (weights before biases).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_values());
        for p in self.params.values() {
            out.extend_from_slice(p.weight.data());
            out.extend_from_slice(p.bias.data());
        }
        out
    }

    /// Mutable access to the `index`-th value of [`ParamStore::flatten`].
    pub fn value_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        self.version += 1;
        for p in self.params.values_mut() {
            let w = p.weight.len();
            if index < w {
                return Some(&mut p.weight.data_mut()[index]);
            }
            index -= w;
            let b = p.bias.len();
            if index < b {
                return Some(&mut p.bias.data_mut()[index]);
            }
            index -= b;
        }
        None
    }
}
