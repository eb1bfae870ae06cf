use std::collections::BTreeMap;

use super::NumericsError;

/// Row-major dense tensor of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NumericsError> {
        if shape.iter().any(|&d| d == 0) {
            return Err(NumericsError::InvalidTensor(format!(
                "zero-sized dimension in shape {shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NumericsError::InvalidTensor(format!(
                "shape {shape:?} implies {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a tensor known to hold a single element.
    pub fn scalar_value(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn into_parts(self) -> (Vec<usize>, Vec<f64>) {
        (self.shape, self.data)
    }
}

/// Named parameter tensors with deterministic (lexicographic) iteration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    map: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.map.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    /// Total number of scalar entries across all parameters.
    pub fn n_scalars(&self) -> usize {
        self.map.values().map(Tensor::len).sum()
    }
}

impl FromIterator<(String, Tensor)> for ParamSet {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        Self {
            map: iter.into_iter().collect(),
        }
    }
}

/// Per-parameter gradients; key set and shapes mirror the [`ParamSet`]
/// they were taken against.
#[derive(Debug, Clone, Default)]
pub struct GradRecord {
    map: BTreeMap<String, Tensor>,
}

impl GradRecord {
    /// Zero gradients matching `params` key-for-key.
    pub fn zeros_like(params: &ParamSet) -> Self {
        Self {
            map: params
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub(crate) fn insert(&mut self, name: String, t: Tensor) {
        self.map.insert(name, t);
    }

    /// Checks the key set and element shapes against `params`.
    pub fn matches(&self, params: &ParamSet) -> Result<(), NumericsError> {
        if self.map.len() != params.len() {
            return Err(NumericsError::GradMismatch {
                name: String::new(),
                detail: format!("{} gradients for {} parameters", self.map.len(), params.len()),
            });
        }
        for (name, g) in &self.map {
            let p = params.get(name).ok_or_else(|| NumericsError::GradMismatch {
                name: name.clone(),
                detail: "gradient has no matching parameter".into(),
            })?;
            if p.shape() != g.shape() {
                return Err(NumericsError::GradMismatch {
                    name: name.clone(),
                    detail: format!("shape {:?} vs parameter {:?}", g.shape(), p.shape()),
                });
            }
        }
        Ok(())
    }

    /// In-place `self += other`, used for fixed-order batch accumulation.
    pub fn accumulate(&mut self, other: &GradRecord) {
        for (name, g) in &mut self.map {
            if let Some(o) = other.map.get(name) {
                for (a, b) in g.data_mut().iter_mut().zip(o.data()) {
                    *a += b;
                }
            }
        }
    }

    /// In-place scale of every gradient entry.
    pub fn scale(&mut self, c: f64) {
        for g in self.map.values_mut() {
            for v in g.data_mut() {
                *v *= c;
            }
        }
    }
}
