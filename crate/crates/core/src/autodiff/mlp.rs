//! Shared multilayer perceptrons and the forward-pass session that leases
//! parameters from a store into a graph.
//!
//! A layer is linear → batch normalization → rectifier, with the
//! normalization and rectifier individually omittable (the prediction head
//! disables both; gradient-check mode disables normalization everywhere).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use super::graph::{BnMode, Graph, ShapeError, TensorId};
use super::params::ParamStore;
use super::scalar::Scalar;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub width: usize,
    pub norm: bool,
    pub relu: bool,
}

/// Widths and per-layer flags of one shared MLP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub input: usize,
    pub layers: Vec<LayerSpec>,
}

impl MlpSpec {
    /// All layers carry normalization and rectifier.
    pub fn new(input: usize, widths: &[usize]) -> Self {
        MlpSpec {
            input,
            layers: widths
                .iter()
                .map(|&w| LayerSpec {
                    width: w,
                    norm: true,
                    relu: true,
                })
                .collect(),
        }
    }

    /// Plain final layer: no normalization, no rectifier (prediction heads).
    pub fn head(input: usize, widths: &[usize]) -> Self {
        let mut spec = Self::new(input, widths);
        if let Some(last) = spec.layers.last_mut() {
            last.norm = false;
            last.relu = false;
        }
        spec
    }

    /// Copy of this spec with all normalization disabled (gradient-check mode).
    pub fn without_norm(&self) -> Self {
        let mut spec = self.clone();
        for layer in spec.layers.iter_mut() {
            layer.norm = false;
        }
        spec
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(self.input, |l| l.width)
    }
}

/// Registers the parameters of an MLP under `prefix`, with uniform fan-in
/// initialization for the linear maps and (1, 0) scale/shift plus (0, 1)
/// running statistics for the normalization layers.
pub fn init_mlp<T: Scalar>(store: &mut ParamStore<T>, prefix: &str, spec: &MlpSpec, rng: &mut Rng) {
    let mut fan_in = spec.input;
    for (li, layer) in spec.layers.iter().enumerate() {
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        let w: Vec<T> = (0..fan_in * layer.width)
            .map(|_| T::from_f64(rng.range_f64(-bound, bound)))
            .collect();
        let b: Vec<T> = (0..layer.width)
            .map(|_| T::from_f64(rng.range_f64(-bound, bound)))
            .collect();
        store.add(&format!("{prefix}.{li}.w"), &[fan_in, layer.width], w, true);
        store.add(&format!("{prefix}.{li}.b"), &[1, layer.width], b, true);
        if layer.norm {
            let ones = alloc::vec![T::ONE; layer.width];
            let zeros = alloc::vec![T::ZERO; layer.width];
            store.add(&format!("{prefix}.{li}.bn.gamma"), &[1, layer.width], ones.clone(), true);
            store.add(&format!("{prefix}.{li}.bn.beta"), &[1, layer.width], zeros.clone(), true);
            store.add(&format!("{prefix}.{li}.bn.mean"), &[1, layer.width], zeros, false);
            store.add(&format!("{prefix}.{li}.bn.var"), &[1, layer.width], ones, false);
        }
        fan_in = layer.width;
    }
}

/// Batch statistics observed by one normalization layer during a forward
/// pass, to be folded into the running statistics after the step.
pub struct BnObservation {
    pub mean_entry: usize,
    pub var_entry: usize,
    pub node: TensorId,
}

/// One forward pass: a graph plus the bookkeeping linking leased parameter
/// nodes back to their store entries.
pub struct Session<'s, T: Scalar> {
    pub graph: Graph<T>,
    store: &'s ParamStore<T>,
    pub mode: BnMode,
    leases: Vec<(usize, TensorId)>,
    lease_map: BTreeMap<usize, TensorId>,
    pub bn_observations: Vec<BnObservation>,
    bn_eps: T,
}

impl<'s, T: Scalar> Session<'s, T> {
    pub fn new(store: &'s ParamStore<T>, mode: BnMode) -> Self {
        Session {
            graph: Graph::new(),
            store,
            mode,
            leases: Vec::new(),
            lease_map: BTreeMap::new(),
            bn_observations: Vec::new(),
            bn_eps: T::from_f64(1e-5),
        }
    }

    pub fn store(&self) -> &ParamStore<T> {
        self.store
    }

    /// Leases a named parameter into the graph (at most once per session).
    pub fn param(&mut self, name: &str) -> TensorId {
        let idx = self
            .store
            .lookup(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        self.param_by_index(idx)
    }

    fn param_by_index(&mut self, idx: usize) -> TensorId {
        if let Some(&id) = self.lease_map.get(&idx) {
            return id;
        }
        let e = self.store.entry(idx);
        let (rows, cols) = match e.dims.len() {
            1 => (1, e.dims[0]),
            2 => (e.dims[0], e.dims[1]),
            n => panic!("parameter {} has {n} dims", e.name),
        };
        let id = if e.learnable {
            self.graph.variable(rows, cols, e.data.clone())
        } else {
            self.graph.constant(rows, cols, e.data.clone())
        };
        self.leases.push((idx, id));
        self.lease_map.insert(idx, id);
        id
    }

    /// Applies the MLP registered under `prefix` to every row of `x`.
    pub fn mlp(&mut self, prefix: &str, spec: &MlpSpec, x: TensorId) -> Result<TensorId, ShapeError> {
        if self.graph.cols(x) != spec.input {
            return Err(ShapeError {
                op: "shared_mlp",
                detail: format!(
                    "{prefix}: input has {} channels, spec expects {}",
                    self.graph.cols(x),
                    spec.input
                ),
            });
        }
        let mut h = x;
        for (li, layer) in spec.layers.iter().enumerate() {
            let w = self.param(&format!("{prefix}.{li}.w"));
            let b = self.param(&format!("{prefix}.{li}.b"));
            h = self.graph.matmul(h, w)?;
            h = self.graph.add_bias(h, b)?;
            if layer.norm {
                let gamma = self.param(&format!("{prefix}.{li}.bn.gamma"));
                let beta = self.param(&format!("{prefix}.{li}.bn.beta"));
                let mean_entry = self.store.lookup(&format!("{prefix}.{li}.bn.mean")).unwrap();
                let var_entry = self.store.lookup(&format!("{prefix}.{li}.bn.var")).unwrap();
                h = match self.mode {
                    BnMode::Batch => {
                        let out = self.graph.batch_norm(h, gamma, beta, BnMode::Batch, None, self.bn_eps)?;
                        self.bn_observations.push(BnObservation {
                            mean_entry,
                            var_entry,
                            node: out,
                        });
                        out
                    }
                    BnMode::Running => {
                        let rm = self.store.entry(mean_entry).data.clone();
                        let rv = self.store.entry(var_entry).data.clone();
                        self.graph
                            .batch_norm(h, gamma, beta, BnMode::Running, Some((&rm, &rv)), self.bn_eps)?
                    }
                };
            }
            if layer.relu {
                h = self.graph.relu(h);
            }
        }
        Ok(h)
    }

    /// Gradients of every leased learnable parameter, keyed by entry index,
    /// aligned with the store (entries never leased get `None`).
    pub fn parameter_grads(&self) -> Vec<Option<Vec<T>>> {
        let mut out: Vec<Option<Vec<T>>> = (0..self.store.len()).map(|_| None).collect();
        for &(idx, node) in &self.leases {
            if self.store.entry(idx).learnable {
                if let Some(g) = self.graph.grad(node) {
                    out[idx] = Some(g.to_vec());
                }
            }
        }
        out
    }

    /// Batch-mode normalization statistics observed this pass, keyed by
    /// (mean entry, var entry).
    pub fn bn_stats(&self) -> Vec<(usize, usize, Vec<T>, Vec<T>)> {
        self.bn_observations
            .iter()
            .filter_map(|o| {
                self.graph
                    .batch_stats(o.node)
                    .map(|(m, v)| (o.mean_entry, o.var_entry, m.to_vec(), v.to_vec()))
            })
            .collect()
    }
}
