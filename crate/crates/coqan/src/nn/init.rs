//! Named parameter storage with per-group learning-rate assignment.
//!
//! Parameters live in a sorted map keyed by dotted path names. Names under
//! `text.` belong to the text-encoder group, which trains with its own
//! learning rate; everything else is in the default group. Weight matrices
//! initialize from N(0, 0.01), biases from zero, and normalization gains
//! from one, all drawn from a seeded generator so runs reproduce exactly.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;

pub const INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    TextEncoder,
    Other,
}

impl ParamGroup {
    pub fn of(name: &str) -> ParamGroup {
        if name.starts_with("text.") {
            ParamGroup::TextEncoder
        } else {
            ParamGroup::Other
        }
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Option<Tensor>,
}

/// All trainable state of a model, keyed by name.
///
/// Iteration order is the sorted name order, which both the optimizer and
/// the checkpoint writer rely on for determinism.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    params: BTreeMap<String, Param>,
    rng: Option<ChaCha8Rng>,
}

impl ParameterStore {
    pub fn new(seed: u64) -> Self {
        ParameterStore {
            params: BTreeMap::new(),
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    /// Store for deserialized parameters; cannot create new entries.
    pub fn frozen() -> Self {
        ParameterStore {
            params: BTreeMap::new(),
            rng: None,
        }
    }

    fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
            .as_mut()
            .expect("parameter creation on a frozen store")
    }

    /// Weight matrix drawn from N(0, INIT_STD).
    pub fn weight(&mut self, name: &str, rows: usize, cols: usize) -> Tensor {
        if let Some(p) = self.params.get(name) {
            let have = p.value.shape();
            assert_eq!(have, (rows, cols), "parameter {} has shape {:?}", name, have);
            return p.value.clone();
        }
        let normal = Normal::new(0.0, INIT_STD).expect("valid stddev");
        let rng = self.rng();
        let data: Vec<f64> = (0..rows * cols).map(|_| normal.sample(rng)).collect();
        let t = Tensor::from_vec(rows, cols, data);
        self.insert_new(name, t.clone());
        t
    }

    /// Bias row initialized to zero.
    pub fn bias(&mut self, name: &str, cols: usize) -> Tensor {
        self.constant(name, cols, 0.0)
    }

    /// Normalization gain row initialized to one.
    pub fn gain(&mut self, name: &str, cols: usize) -> Tensor {
        self.constant(name, cols, 1.0)
    }

    fn constant(&mut self, name: &str, cols: usize, fill: f64) -> Tensor {
        if let Some(p) = self.params.get(name) {
            let have = p.value.shape();
            assert_eq!(have, (1, cols), "parameter {} has shape {:?}", name, have);
            return p.value.clone();
        }
        let t = Tensor::from_vec(1, cols, vec![fill; cols]);
        self.insert_new(name, t.clone());
        t
    }

    fn insert_new(&mut self, name: &str, value: Tensor) {
        let prior = self.params.insert(
            name.to_string(),
            Param { value, grad: None },
        );
        assert!(prior.is_none(), "parameter {} created twice", name);
    }

    pub fn insert_raw(&mut self, name: &str, value: Tensor) {
        self.insert_new(name, value);
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn value(&self, name: &str) -> &Tensor {
        &self
            .params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {}", name))
            .value
    }

    pub fn set_value(&mut self, name: &str, value: Tensor) {
        let p = self
            .params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {}", name));
        assert_eq!(
            p.value.shape(),
            value.shape(),
            "parameter {} shape change",
            name
        );
        p.value = value;
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn total_values(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// Accumulate gradients for this store's parameters out of a finished
    /// backward pass, keyed by the binding returned from [`bind`].
    pub fn absorb_gradients(&mut self, binding: &Binding, graph: &Graph, grads: &super::graph::Gradients) {
        for (name, &id) in &binding.ids {
            let g = grads.of(id, graph);
            let p = self.params.get_mut(name).expect("bound parameter exists");
            let (r, c) = p.value.shape();
            let add = Tensor::from_vec(r, c, g);
            match &mut p.grad {
                Some(acc) => {
                    for (a, b) in acc.data_mut().iter_mut().zip(add.data()) {
                        *a += b;
                    }
                }
                slot @ None => *slot = Some(add),
            }
        }
    }

    pub fn clear_gradients(&mut self) {
        for p in self.params.values_mut() {
            p.grad = None;
        }
    }
}

/// Maps parameter names to the leaf node ids of one graph so a backward
/// pass can be routed back into the store.
#[derive(Debug, Default)]
pub struct Binding {
    ids: BTreeMap<String, NodeId>,
}

impl Binding {
    pub fn new() -> Self {
        Binding::default()
    }

    pub fn id(&self, name: &str) -> NodeId {
        *self
            .ids
            .get(name)
            .unwrap_or_else(|| panic!("parameter {} not bound", name))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ids.keys().map(|s| s.as_str())
    }
}

/// Insert every parameter of `store` into `graph` as a leaf and record the
/// node ids. Call once per graph, before building the forward pass.
pub fn bind(store: &ParameterStore, graph: &mut Graph) -> Binding {
    let mut binding = Binding::new();
    for (name, param) in store.iter() {
        let id = graph.leaf(param.value.clone());
        binding.ids.insert(name.to_string(), id);
    }
    binding
}
