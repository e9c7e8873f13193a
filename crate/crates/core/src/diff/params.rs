//! Named trainable parameters with gradient accumulators.

use rand::Rng as _;

use super::ndarray::{NdArray, Real};
use crate::util::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: NdArray,
    pub grad: NdArray,
}

/// Owns every parameter of a model in insertion order; names are unique
/// and double as checkpoint tensor names.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: NdArray) -> ParamId {
        assert!(
            self.entries.iter().all(|p| p.name != name),
            "duplicate parameter name {name:?}"
        );
        let grad = NdArray::zeros(value.shape());
        self.entries.push(Parameter { name: name.to_string(), value, grad });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> &NdArray {
        &self.entries[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.entries.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.grad.data_mut().fill(0.0);
        }
    }

    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|p| p.value.numel()).sum()
    }
}

fn uniform(rng: &mut Rng, bound: Real) -> Real {
    let u: Real = rng.random();
    (2.0 * u - 1.0) * bound
}

/// He-style uniform init scaled by fan-in.
pub fn init_he_uniform(shape: &[usize], fan_in: usize, rng: &mut Rng) -> NdArray {
    let bound = (6.0 / fan_in as Real).sqrt();
    let numel: usize = shape.iter().product();
    NdArray::new(shape.to_vec(), (0..numel).map(|_| uniform(rng, bound)).collect())
}

/// Gaussian init for embedding tables.
pub fn init_normal(shape: &[usize], std: Real, rng: &mut Rng) -> NdArray {
    let numel: usize = shape.iter().product();
    let mut data = Vec::with_capacity(numel);
    while data.len() < numel {
        // Box-Muller
        let u1: Real = rng.random::<Real>().max(1e-12);
        let u2: Real = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI as Real * u2;
        data.push(r * theta.cos() * std);
        if data.len() < numel {
            data.push(r * theta.sin() * std);
        }
    }
    NdArray::new(shape.to_vec(), data)
}

/// Orthogonal init for square recurrent weights (modified Gram-Schmidt over
/// a Gaussian matrix).
pub fn init_orthogonal(n: usize, rng: &mut Rng) -> NdArray {
    let g = init_normal(&[n, n], 1.0, rng);
    let mut rows: Vec<Vec<Real>> = (0..n).map(|i| g.row(i).to_vec()).collect();
    for i in 0..n {
        for j in 0..i {
            let dot: Real = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            for k in 0..n {
                rows[i][k] -= dot * rows[j][k];
            }
        }
        let norm: Real = rows[i].iter().map(|x| x * x).sum::<Real>().sqrt();
        let inv = if norm > 1e-12 { 1.0 / norm } else { 0.0 };
        for x in &mut rows[i] {
            *x *= inv;
        }
    }
    NdArray::from_rows(&rows)
}
