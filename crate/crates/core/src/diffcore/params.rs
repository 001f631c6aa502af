use std::collections::HashMap;

use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named trainable tensors in insertion order, with Adam moment buffers.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<R> {
    names: Vec<String>,
    index: HashMap<String, usize>,
    params: Vec<Tensor<R>>,
    pub(crate) first_moment: Vec<Vec<R>>,
    pub(crate) second_moment: Vec<Vec<R>>,
}

impl<R: Real> ParamStore<R> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            index: HashMap::new(),
            params: Vec::new(),
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<R>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter {name}")));
        }
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.first_moment.push(vec![R::zero(); tensor.numel()]);
        self.second_moment.push(vec![R::zero(); tensor.numel()]);
        self.params.push(tensor);
        Ok(ParamId(id))
    }

    /// Uniform(-sqrt(3/fan_in), sqrt(3/fan_in)) initialization, unit output variance for unit inputs.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut impl Rng,
    ) -> Result<ParamId> {
        let bound = (3.0 / fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| R::lit(rng.random_range(-bound..bound)))
            .collect();
        self.add(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar parameter count.
    pub fn numel(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<R> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<R> {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<R>)> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, t)| (ParamId(i), self.names[i].as_str(), t))
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Tensor::zero_grad);
    }

    /// All values concatenated in store order.
    pub fn flat_values(&self) -> Vec<R> {
        self.params
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    /// All gradients concatenated in store order (zeros where absent).
    pub fn flat_grads(&self) -> Vec<R> {
        let mut out = Vec::with_capacity(self.numel());
        for t in &self.params {
            match t.grad() {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(std::iter::repeat_n(R::zero(), t.numel())),
            }
        }
        out
    }

    pub fn set_flat_values(&mut self, flat: &[R]) {
        assert_eq!(flat.len(), self.numel(), "flat parameter length");
        let mut off = 0;
        for t in &mut self.params {
            let n = t.numel();
            t.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    /// Copies values (not moments) from a store with the same layout.
    pub fn copy_values_from(&mut self, other: &Self) {
        assert_eq!(self.names, other.names, "parameter layouts differ");
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.data_mut().copy_from_slice(b.data());
        }
    }
}
