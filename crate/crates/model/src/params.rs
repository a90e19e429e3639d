use candle_core::backprop::GradStore;
use candle_core::{DType, Device, Shape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Named trainable tensors of one network, created from a seeded stream so
/// initialization does not depend on the tensor runtime's global RNG.
pub struct ParamStore {
    dtype: DType,
    rng: ChaCha8Rng,
    vars: Vec<(String, Var)>,
}

impl ParamStore {
    pub fn new(dtype: DType, seed: u64) -> Self {
        Self {
            dtype,
            rng: ChaCha8Rng::seed_from_u64(seed),
            vars: Vec::new(),
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn vars(&self) -> &[(String, Var)] {
        &self.vars
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn num_parameters(&self) -> usize {
        self.vars.iter().map(|(_, v)| v.elem_count()).sum()
    }

    fn push(&mut self, name: String, t: Tensor) -> Result<Var> {
        if self.vars.iter().any(|(n, _)| *n == name) {
            return Err(Error::invalid(format!("duplicate parameter {name}")));
        }
        let var = Var::from_tensor(&t.to_dtype(self.dtype)?)?;
        self.vars.push((name, var.clone()));
        Ok(var)
    }

    pub fn normal(&mut self, name: impl Into<String>, shape: impl Into<Shape>, std: f64) -> Result<Var> {
        let shape = shape.into();
        let dist = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
        let data: Vec<f64> = (0..shape.elem_count()).map(|_| dist.sample(&mut self.rng)).collect();
        let t = Tensor::from_vec(data, shape, &Device::Cpu)?;
        self.push(name.into(), t)
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: impl Into<Shape>) -> Result<Var> {
        let t = Tensor::zeros(shape, DType::F64, &Device::Cpu)?;
        self.push(name.into(), t)
    }

    pub fn ones(&mut self, name: impl Into<String>, shape: impl Into<Shape>) -> Result<Var> {
        let t = Tensor::ones(shape, DType::F64, &Device::Cpu)?;
        self.push(name.into(), t)
    }

    /// Replaces every value from `(name, tensor)` pairs, checking names and shapes.
    pub fn load(&self, tensors: &[(String, Tensor)]) -> Result<()> {
        if tensors.len() != self.vars.len() {
            return Err(Error::invalid(format!(
                "expected {} tensors, got {}",
                self.vars.len(),
                tensors.len()
            )));
        }
        for ((name, var), (other, t)) in self.vars.iter().zip(tensors) {
            if name != other || var.shape() != t.shape() {
                return Err(Error::invalid(format!(
                    "parameter {name}{:?} does not match {other}{:?}",
                    var.dims(),
                    t.dims()
                )));
            }
            var.set(&t.to_dtype(self.dtype)?)?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Vec<(String, Tensor)> {
        self.vars
            .iter()
            .map(|(n, v)| (n.clone(), v.as_tensor().copy().expect("cpu copy")))
            .collect()
    }
}

/// Adam with bias correction and checkpointable moment estimates.
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    moments: Vec<Option<(Tensor, Tensor)>>,
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to every parameter of `params` that has a gradient.
    pub fn step(&mut self, params: &ParamStore, grads: &GradStore, lr: f64) -> Result<()> {
        self.moments.resize(params.vars.len(), None);
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((_, var), slot) in params.vars.iter().zip(self.moments.iter_mut()) {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            // Gradients can carry autograd history; moments must not keep it alive.
            let g = g.detach();
            let (m, v) = match slot.take() {
                Some(mv) => mv,
                None => (g.zeros_like()?, g.zeros_like()?),
            };
            let m = ((m * self.beta1)? + (&g * (1.0 - self.beta1))?)?.detach();
            let v = ((v * self.beta2)? + (g.sqr()? * (1.0 - self.beta2))?)?.detach();
            let denom = ((&v / c2)?.sqrt()? + self.eps)?;
            let update = ((&m / c1)? / denom)?;
            var.set(&(var.as_tensor().detach() - (update * lr)?)?)?;
            *slot = Some((m, v));
        }
        Ok(())
    }

    /// Moment tensors as `m.<name>` / `v.<name>` pairs.
    pub fn state(&self, params: &ParamStore) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for ((name, _), slot) in params.vars.iter().zip(&self.moments) {
            if let Some((m, v)) = slot {
                out.push((format!("m.{name}"), m.clone()));
                out.push((format!("v.{name}"), v.clone()));
            }
        }
        out
    }

    pub fn restore(&mut self, params: &ParamStore, t: u64, state: &[(String, Tensor)]) -> Result<()> {
        self.t = t;
        self.moments = vec![None; params.vars.len()];
        for (i, (name, var)) in params.vars.iter().enumerate() {
            let find = |p: &str| state.iter().find(|(n, _)| *n == format!("{p}.{name}")).map(|(_, t)| t);
            match (find("m"), find("v")) {
                (Some(m), Some(v)) => {
                    if m.shape() != var.shape() || v.shape() != var.shape() {
                        return Err(Error::invalid(format!("optimizer state for {name} has wrong shape")));
                    }
                    self.moments[i] = Some((m.to_dtype(params.dtype)?, v.to_dtype(params.dtype)?));
                }
                (None, None) => {}
                _ => return Err(Error::invalid(format!("incomplete optimizer state for {name}"))),
            }
        }
        Ok(())
    }
}
