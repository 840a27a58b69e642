//! Named parameter storage with parallel gradient buffers.

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A parameter array: matrices for weights, vectors for biases and gains.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Vector(Array1<f64>),
    Matrix(Array2<f64>),
}

impl Tensor {
    pub fn zeros_like(&self) -> Tensor {
        match self {
            Tensor::Vector(v) => Tensor::Vector(Array1::zeros(v.len())),
            Tensor::Matrix(m) => Tensor::Matrix(Array2::zeros(m.dim())),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Tensor::Vector(v) => v.len(),
            Tensor::Matrix(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat view of the underlying scalars (row-major for matrices).
    pub fn as_slice(&self) -> &[f64] {
        match self {
            Tensor::Vector(v) => v.as_slice().expect("contiguous"),
            Tensor::Matrix(m) => m.as_slice().expect("contiguous"),
        }
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        match self {
            Tensor::Vector(v) => v.as_slice_mut().expect("contiguous"),
            Tensor::Matrix(m) => m.as_slice_mut().expect("contiguous"),
        }
    }
}

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Insertion-ordered collection of named parameters.
///
/// Iteration order is the registration order, which keeps optimizer updates
/// and serialization deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: IndexMap<String, ParamId>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(
            !self.names.contains_key(name),
            "duplicate parameter name: {name}"
        );
        let id = ParamId(self.values.len());
        self.names.insert(name.to_string(), id);
        self.values.push(value);
        id
    }

    /// Registers a matrix initialized uniformly in `±sqrt(1/fan_in)`.
    pub fn add_matrix(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let bound = (1.0 / fan_in as f64).sqrt();
        let data = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound));
        self.add(name, Tensor::Matrix(data))
    }

    /// Registers a vector initialized uniformly in `±sqrt(1/fan_in)`.
    pub fn add_vector(
        &mut self,
        name: &str,
        n: usize,
        fan_in: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let bound = (1.0 / fan_in as f64).sqrt();
        let data = Array1::from_shape_fn(n, |_| rng.random_range(-bound..bound));
        self.add(name, Tensor::Vector(data))
    }

    /// Registers a vector filled with a constant (layer-norm gains, biases).
    pub fn add_vector_const(&mut self, name: &str, n: usize, value: f64) -> ParamId {
        self.add(name, Tensor::Vector(Array1::from_elem(n, value)))
    }

    /// Registers a pre-built tensor under a name (deserialization path).
    pub fn add_tensor(&mut self, name: &str, value: Tensor) -> ParamId {
        self.add(name, value)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.names
            .iter()
            .find(|(_, v)| **v == id)
            .map(|(k, _)| k.as_str())
            .expect("unknown parameter id")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn mat(&self, id: ParamId) -> &Array2<f64> {
        match &self.values[id.0] {
            Tensor::Matrix(m) => m,
            Tensor::Vector(_) => panic!("parameter {} is a vector", self.name(id)),
        }
    }

    pub fn vec(&self, id: ParamId) -> &Array1<f64> {
        match &self.values[id.0] {
            Tensor::Vector(v) => v,
            Tensor::Matrix(_) => panic!("parameter {} is a matrix", self.name(id)),
        }
    }

    /// `(name, tensor)` pairs in registration order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|(name, id)| (name.as_str(), &self.values[id.0]))
    }

    /// Gradient buffers shaped like this store, zero-initialized.
    pub fn zero_grads(&self) -> Grads {
        Grads { values: self.values.iter().map(Tensor::zeros_like).collect() }
    }
}

/// Gradient accumulators parallel to a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    values: Vec<Tensor>,
}

impl Grads {
    pub fn zero(&mut self) {
        for t in &mut self.values {
            t.as_slice_mut().fill(0.0);
        }
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn mat_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        match &mut self.values[id.0] {
            Tensor::Matrix(m) => m,
            Tensor::Vector(_) => panic!("gradient {} is a vector", id.0),
        }
    }

    pub fn vec_mut(&mut self, id: ParamId) -> &mut Array1<f64> {
        match &mut self.values[id.0] {
            Tensor::Vector(v) => v,
            Tensor::Matrix(_) => panic!("gradient {} is a matrix", id.0),
        }
    }

    /// Scales every accumulated gradient (used to average over a batch).
    pub fn scale(&mut self, s: f64) {
        for t in &mut self.values {
            for g in t.as_slice_mut() {
                *g *= s;
            }
        }
    }

    pub(crate) fn values(&self) -> &[Tensor] {
        &self.values
    }
}
