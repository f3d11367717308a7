use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NetError;
use crate::adam::{adam_step, AdamState};
use crate::tensor::Tensor;

/// Handle to a parameter inside a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors in registration order, each with its Adam state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    params: IndexMap<String, Tensor>,
    adam: Vec<AdamState>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, NetError> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(NetError::DuplicateParameter(name));
        }
        self.adam.push(AdamState::new(value.shape()));
        let (idx, _) = self.params.insert_full(name, value);
        Ok(ParamId(idx))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.params.get_index_of(name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn adam_state(&self, id: ParamId) -> &AdamState {
        &self.adam[id.0]
    }

    pub fn set_adam_state(&mut self, id: ParamId, state: AdamState) -> Result<(), NetError> {
        if state.first_moment.shape() != self.params[id.0].shape()
            || state.second_moment.shape() != self.params[id.0].shape()
        {
            return Err(NetError::ParameterMismatch(format!(
                "optimizer state shape for {}",
                self.params.get_index(id.0).map(|(k, _)| k.as_str()).unwrap_or("?")
            )));
        }
        self.adam[id.0] = state;
        Ok(())
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            grads: self.params.values().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    /// One Adam update of every parameter, in registration order.
    pub fn adam_update(&mut self, grads: &Gradients, lr: f32) -> Result<(), NetError> {
        if grads.grads.len() != self.params.len() {
            return Err(NetError::ParameterMismatch(format!(
                "{} gradients for {} parameters",
                grads.grads.len(),
                self.params.len()
            )));
        }
        for ((p, g), s) in self.params.values_mut().zip(&grads.grads).zip(&mut self.adam) {
            adam_step(p, g, s, lr)?;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params.values().all(Tensor::is_finite)
    }

    /// Copies values (and optimizer state) from `other`, which must hold
    /// exactly the same names and shapes.
    pub fn load_from(&mut self, other: &ParameterStore) -> Result<(), NetError> {
        if other.len() != self.len() {
            return Err(NetError::ParameterMismatch(format!(
                "expected {} parameters, found {}",
                self.len(),
                other.len()
            )));
        }
        for (i, (name, value)) in self.params.iter_mut().enumerate() {
            let Some(j) = other.params.get_index_of(name) else {
                return Err(NetError::MissingParameter(name.clone()));
            };
            let src = &other.params[j];
            if src.shape() != value.shape() {
                return Err(NetError::ParameterMismatch(format!(
                    "{name}: expected shape {:?}, found {:?}",
                    value.shape(),
                    src.shape()
                )));
            }
            *value = src.clone();
            self.adam[i] = other.adam[j].clone();
        }
        Ok(())
    }

    /// Parameters whose name starts with `prefix`, in order.
    pub fn filter_prefix(&self, prefix: &str) -> ParameterStore {
        let mut out = ParameterStore::new();
        for (i, (k, v)) in self.params.iter().enumerate() {
            if k.starts_with(prefix) {
                out.params.insert(k.clone(), v.clone());
                out.adam.push(self.adam[i].clone());
            }
        }
        out
    }

    /// Appends every parameter of `other`.
    pub fn extend(&mut self, other: &ParameterStore) -> Result<(), NetError> {
        for (i, (k, v)) in other.params.iter().enumerate() {
            let id = self.register(k.clone(), v.clone())?;
            self.adam[id.0] = other.adam[i].clone();
        }
        Ok(())
    }
}

/// Gradient accumulators laid out like a [`ParameterStore`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn accumulate(&mut self, id: ParamId, grad: &Tensor) -> Result<(), NetError> {
        self.grads[id.0].add_assign(grad)?;
        Ok(())
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.grads.iter()
    }
}

/// Seeded parameter initialisation: weights uniform in `±sqrt(6 / fan_in)`, biases zero.
pub(crate) struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn weight(&mut self, shape: &[usize], fan_in: usize) -> Tensor {
        let limit = (6.0 / fan_in as f64).sqrt() as f32;
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.rng.gen_range(-limit..limit)).collect();
        Tensor::from_vec(shape, data).expect("initializer shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_ordered() {
        let mut s = ParameterStore::new();
        let a = s.register("a", Tensor::zeros(&[2])).unwrap();
        let b = s.register("b", Tensor::zeros(&[3])).unwrap();
        assert!(matches!(s.register("a", Tensor::zeros(&[1])), Err(NetError::DuplicateParameter(_))));
        assert_eq!((a.index(), b.index()), (0, 1));
        assert_eq!(s.names().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(s.scalar_count(), 5);
    }

    #[test]
    fn untouched_parameters_stay_put() {
        let mut s = ParameterStore::new();
        let a = s.register("a", Tensor::full(&[2], 1.0)).unwrap();
        let b = s.register("b", Tensor::full(&[2], 1.0)).unwrap();
        let mut g = s.zero_grads();
        g.accumulate(a, &Tensor::full(&[2], 0.5)).unwrap();
        for _ in 0..3 {
            s.adam_update(&g, 0.01).unwrap();
        }
        assert_ne!(s.get(a).data(), &[1.0, 1.0]);
        assert_eq!(s.get(b).data(), &[1.0, 1.0]);
    }

    #[test]
    fn prefix_filter_and_reload() {
        let mut s = ParameterStore::new();
        s.register("mln.x", Tensor::full(&[1], 1.0)).unwrap();
        s.register("mrn.y", Tensor::full(&[1], 2.0)).unwrap();
        let mrn = s.filter_prefix("mrn.");
        assert_eq!(mrn.names().collect::<Vec<_>>(), ["mrn.y"]);
        let mut target = ParameterStore::new();
        target.register("mrn.y", Tensor::zeros(&[1])).unwrap();
        target.load_from(&mrn).unwrap();
        assert_eq!(target.by_name("mrn.y").unwrap().data(), &[2.0]);
        assert!(target.load_from(&s).is_err());
    }
}
