//! Named parameter storage and per-tape binding.

use std::cell::RefCell;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Gradients, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered collection of trainable tensors. Insertion order is the
/// serialization and optimizer order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<S> {
    names: Vec<String>,
    tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor.with_grad(true));
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.tensors.iter_mut().collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Replaces every value, keeping names and shapes.
    pub fn load_values(&mut self, values: Vec<Vec<S>>) -> Result<()> {
        if values.len() != self.tensors.len() {
            return Err(Error::dim(
                "load_values",
                format!("{} tensors for {} parameters", values.len(), self.tensors.len()),
            ));
        }
        for (i, (t, v)) in self.tensors.iter().zip(&values).enumerate() {
            if t.len() != v.len() {
                return Err(Error::dim(
                    "load_values",
                    format!("parameter {} expects {} values, got {}", self.names[i], t.len(), v.len()),
                ));
            }
        }
        for (t, v) in self.tensors.iter_mut().zip(values) {
            t.data_mut().copy_from_slice(&v);
        }
        Ok(())
    }
}

/// Lazily records parameters as tape leaves, once per tape.
pub struct Bound<'t, 'p, S> {
    tape: &'t Tape<S>,
    store: &'p ParamStore<S>,
    vars: RefCell<Vec<Option<Var<'t, S>>>>,
}

impl<'t, 'p, S: Scalar> Bound<'t, 'p, S> {
    pub fn new(tape: &'t Tape<S>, store: &'p ParamStore<S>) -> Self {
        Self {
            tape,
            store,
            vars: RefCell::new(vec![None; store.len()]),
        }
    }

    pub fn tape(&self) -> &'t Tape<S> {
        self.tape
    }

    pub fn store(&self) -> &'p ParamStore<S> {
        self.store
    }

    pub fn var(&self, id: ParamId) -> Var<'t, S> {
        let mut vars = self.vars.borrow_mut();
        *vars[id.0].get_or_insert_with(|| self.tape.leaf(self.store.get(id)))
    }

    /// Per-parameter gradients in store order; parameters never touched get zeros.
    pub fn collect_grads(&self, grads: &Gradients<S>) -> Vec<Vec<S>> {
        let vars = self.vars.borrow();
        self.store
            .ids()
            .map(|id| match vars[id.0] {
                Some(v) => grads
                    .wrt(&v)
                    .map(<[S]>::to_vec)
                    .unwrap_or_else(|| vec![S::zero(); self.store.get(id).len()]),
                None => vec![S::zero(); self.store.get(id).len()],
            })
            .collect()
    }
}

/// Uniform in `±1/√fan_in`.
pub fn uniform_init<S: Scalar, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| S::cast(rng.random_range(-bound..bound)))
        .collect();
    Tensor::from_vec(shape, data).expect("positive shape")
}

/// `mean + N(0, sigma²)` per entry.
pub fn normal_init<S: Scalar, R: Rng>(rng: &mut R, shape: &[usize], mean: f64, sigma: f64) -> Tensor<S> {
    let normal = Normal::new(mean, sigma).expect("finite sigma");
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| S::cast(normal.sample(rng))).collect();
    Tensor::from_vec(shape, data).expect("positive shape")
}
