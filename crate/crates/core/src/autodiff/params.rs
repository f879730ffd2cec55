//! Named parameter store with Adam moment state.
//!
//! Entries keep their insertion order, which fixes both the checkpoint
//! record order and the deterministic iteration order of the optimizer.
//! Non-learnable entries hold normalization running statistics.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct ParamEntry<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<T>,
    pub learnable: bool,
    /// Adam first/second moments; empty for non-learnable entries.
    pub m: Vec<T>,
    pub v: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct ParamStore<T> {
    entries: Vec<ParamEntry<T>>,
    index: BTreeMap<String, usize>,
    /// Optimizer step counter (shared across all entries).
    pub step: u64,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            index: BTreeMap::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: &str, dims: &[usize], data: Vec<T>, learnable: bool) -> usize {
        assert_eq!(dims.iter().product::<usize>(), data.len(), "{name}: bad dims");
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name {name}"
        );
        let moments = if learnable {
            vec![T::ZERO; data.len()]
        } else {
            Vec::new()
        };
        let idx = self.entries.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            dims: dims.to_vec(),
            data,
            learnable,
            m: moments.clone(),
            v: moments,
        });
        self.index.insert(name.to_string(), idx);
        idx
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn entry(&self, idx: usize) -> &ParamEntry<T> {
        &self.entries[idx]
    }

    pub fn entry_mut(&mut self, idx: usize) -> &mut ParamEntry<T> {
        &mut self.entries[idx]
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn learnable_count(&self) -> usize {
        self.entries.iter().filter(|e| e.learnable).count()
    }

    pub fn learnable_values(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.learnable)
            .map(|e| e.data.len())
            .sum()
    }

    /// Converts every entry (and moment) to another element type.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        out.step = self.step;
        for e in &self.entries {
            let idx = out.add(
                &e.name,
                &e.dims,
                e.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
                e.learnable,
            );
            out.entries[idx].m = e.m.iter().map(|&x| U::from_f64(x.to_f64())).collect();
            out.entries[idx].v = e.v.iter().map(|&x| U::from_f64(x.to_f64())).collect();
        }
        out
    }
}
