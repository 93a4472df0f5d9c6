use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use candle_core::{DType, Device, Shape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::seed::mix_seed;

#[derive(Default)]
struct Inner {
    params: BTreeMap<String, Var>,
    buffers: BTreeMap<String, Var>,
}

/// Named trainable parameters plus non-trainable buffers (batch-norm running
/// statistics). Cloning shares the underlying variables.
#[derive(Clone)]
pub struct ParamStore {
    inner: Arc<Mutex<Inner>>,
    dtype: DType,
    device: Device,
    shape_only: bool,
}

impl ParamStore {
    pub fn new(dtype: DType, device: Device) -> Self {
        Self {
            inner: Arc::default(),
            dtype,
            device,
            shape_only: false,
        }
    }

    /// A store whose parameters are zero-filled instead of randomly drawn;
    /// for counting and shape audits.
    pub fn shape_only() -> Self {
        Self {
            shape_only: true,
            ..Self::new(DType::F32, Device::Cpu)
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("parameter store poisoned")
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Root builder; every initial value is a function of `seed` and the
    /// parameter's full name, so construction order does not matter.
    pub fn builder(&self, seed: u64) -> Builder {
        Builder {
            store: self.clone(),
            prefix: String::new(),
            seed,
        }
    }

    pub fn params(&self) -> BTreeMap<String, Var> {
        self.lock().params.clone()
    }

    pub fn buffers(&self) -> BTreeMap<String, Var> {
        self.lock().buffers.clone()
    }

    /// Trainable variables in name order.
    pub fn vars(&self) -> Vec<Var> {
        self.lock().params.values().cloned().collect()
    }

    pub fn count(&self) -> usize {
        self.lock().params.values().map(|v| v.elem_count()).sum()
    }

    /// Parameter count of every variable whose name starts with `prefix.`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        let dotted = format!("{prefix}.");
        self.lock()
            .params
            .iter()
            .filter(|(k, _)| k.starts_with(&dotted))
            .map(|(_, v)| v.elem_count())
            .sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Init {
    Uniform(f64),
    Const(f64),
}

#[derive(Clone)]
pub struct Builder {
    store: ParamStore,
    prefix: String,
    seed: u64,
}

fn name_hash(name: &str) -> u64 {
    // FNV-1a
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Builder {
    pub fn pp(&self, name: &str) -> Self {
        Self {
            store: self.store.clone(),
            prefix: self.path(name),
            seed: self.seed,
        }
    }

    fn path(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn dtype(&self) -> DType {
        self.store.dtype
    }

    pub fn device(&self) -> &Device {
        &self.store.device
    }

    fn make(&self, full: &str, shape: Shape, init: Init) -> Result<Tensor> {
        let n = shape.elem_count();
        if self.store.shape_only {
            return Ok(Tensor::zeros(shape, self.store.dtype, &self.store.device)?);
        }
        // Values are drawn in f32 so that f32 and f64 builds start identical.
        let values: Vec<f32> = match init {
            Init::Const(v) => vec![v as f32; n],
            Init::Uniform(bound) => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, name_hash(full)));
                let b = bound as f32;
                (0..n).map(|_| rng.random_range(-b..=b)).collect()
            }
        };
        Ok(Tensor::from_vec(values, shape, &self.store.device)?.to_dtype(self.store.dtype)?)
    }

    pub fn param(&self, name: &str, shape: impl Into<Shape>, init: Init) -> Result<Tensor> {
        let full = self.path(name);
        let t = self.make(&full, shape.into(), init)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.store.lock().params.insert(full, var);
        Ok(out)
    }

    pub fn buffer(&self, name: &str, shape: impl Into<Shape>, value: f64) -> Result<Var> {
        let full = self.path(name);
        let t = self.make(&full, shape.into(), Init::Const(value))?;
        let var = Var::from_tensor(&t)?;
        self.store.lock().buffers.insert(full, var.clone());
        Ok(var)
    }
}
