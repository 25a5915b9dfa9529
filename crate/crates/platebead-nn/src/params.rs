//! Named parameter storage with deterministic initialization.

use std::collections::HashMap;

use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tape::{Tape, Var};

/// Ordered map of named f64 tensors. Order is the insertion order and defines
/// the layout used by the optimizer and the checkpoint format.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<ArrayD<f64>>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn insert(&mut self, name: &str, value: ArrayD<f64>) {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        self.index.insert(name.to_string(), self.values.len());
        self.names.push(name.to_string());
        self.values.push(value);
    }

    pub fn get(&self, name: &str) -> &ArrayD<f64> {
        let i = *self.index.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        &self.values[i]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut ArrayD<f64> {
        let i = *self.index.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        &mut self.values[i]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<f64>)> {
        self.names.iter().map(|s| s.as_str()).zip(self.values.iter())
    }

    pub fn at(&self, i: usize) -> (&str, &ArrayD<f64>) {
        (&self.names[i], &self.values[i])
    }

    pub fn at_mut(&mut self, i: usize) -> (&str, &mut ArrayD<f64>) {
        (&self.names[i], &mut self.values[i])
    }

    pub fn total_elements(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }
}

/// Parameters bound onto a tape as differentiable leaves, addressable by name.
pub struct BoundParams {
    vars: HashMap<String, Var>,
    order: Vec<(String, Var)>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Var {
        *self.vars.get(name).unwrap_or_else(|| panic!("unbound parameter {name}"))
    }

    /// Gradients in store order, one slot per parameter.
    pub fn collect_grads(&self, grads: &crate::tape::Grads) -> Vec<Option<ArrayD<f64>>> {
        self.order.iter().map(|(_, v)| grads.get(*v).cloned()).collect()
    }
}

/// Put every parameter on the tape as a differentiable leaf.
pub fn bind(tape: &mut Tape, store: &ParamStore) -> BoundParams {
    bind_impl(tape, store, true)
}

/// Put every parameter on the tape as a constant: inference or guidance,
/// where only the inputs need gradients.
pub fn bind_frozen(tape: &mut Tape, store: &ParamStore) -> BoundParams {
    bind_impl(tape, store, false)
}

fn bind_impl(tape: &mut Tape, store: &ParamStore, differentiable: bool) -> BoundParams {
    let mut vars = HashMap::new();
    let mut order = Vec::new();
    for (name, value) in store.iter() {
        let v = if differentiable {
            tape.leaf(value.clone())
        } else {
            tape.constant(value.clone())
        };
        vars.insert(name.to_string(), v);
        order.push((name.to_string(), v));
    }
    BoundParams { vars, order }
}

/// Deterministic fan-in-scaled uniform initializer.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform(-a, a) with a = sqrt(3 / fan_in) (LeCun-style).
    pub fn uniform(&mut self, shape: &[usize], fan_in: usize) -> ArrayD<f64> {
        let a = (3.0 / fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| self.rng.gen_range(-a..a)).collect();
        ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
    }

    pub fn zeros(&mut self, shape: &[usize]) -> ArrayD<f64> {
        ArrayD::zeros(IxDyn(shape))
    }

    pub fn ones(&mut self, shape: &[usize]) -> ArrayD<f64> {
        ArrayD::ones(IxDyn(shape))
    }
}
