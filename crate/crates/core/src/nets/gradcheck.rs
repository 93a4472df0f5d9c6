//! Central finite-difference verification of autograd gradients. Meant for
//! models built in `f64`.

use candle_core::{DType, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub name: String,
    pub index: usize,
}

#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub probe: Probe,
    pub analytic: f64,
    pub numeric: f64,
}

impl ProbeResult {
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(1e-12);
        (self.analytic - self.numeric).abs() / scale
    }
}

fn values(t: &Tensor) -> Result<Vec<f64>> {
    Ok(t.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?)
}

fn set_element(var: &Var, index: usize, value: f64) -> Result<()> {
    let t = var.as_tensor();
    let mut v = values(t)?;
    v[index] = value;
    let replacement = Tensor::from_vec(v, t.shape(), t.device())?.to_dtype(t.dtype())?;
    var.set(&replacement)?;
    Ok(())
}

/// Picks `n` probes spread over distinct parameter tensors. Only entries
/// whose gradient is at least 1% of the largest gradient among the eligible
/// parameters qualify: for vanishing gradients a central difference measures
/// round-off, not the derivative.
pub fn choose_probes(
    store: &ParamStore,
    n: usize,
    seed: u64,
    prefixes: Option<&[&str]>,
    loss: impl Fn() -> Result<Tensor>,
) -> Result<Vec<Probe>> {
    let grads = loss()?.backward()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eligible: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, var) in store.params() {
        if !prefixes.is_none_or(|ps| ps.iter().any(|p| name.starts_with(p))) {
            continue;
        }
        if let Some(g) = grads.get(var.as_tensor()) {
            eligible.push((name, values(g)?));
        }
    }
    let global = eligible
        .iter()
        .flat_map(|(_, g)| g.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = 1e-2 * global;
    let mut probes = Vec::with_capacity(n);
    while probes.len() < n && !eligible.is_empty() {
        let (name, g) = eligible.swap_remove(rng.random_range(0..eligible.len()));
        let candidates: Vec<usize> = (0..g.len()).filter(|&i| g[i] != 0.0 && g[i].abs() >= threshold).collect();
        if candidates.is_empty() {
            continue;
        }
        let index = candidates[rng.random_range(0..candidates.len())];
        probes.push(Probe { name, index });
    }
    if probes.len() < n {
        return Err(Error::Contract(format!(
            "only {} parameter tensors carry a measurable gradient",
            probes.len()
        )));
    }
    Ok(probes)
}

/// Compares the autograd gradient of `loss` with a central difference of
/// step `eps` at every probe. Parameters are restored afterwards.
pub fn check_gradients(
    store: &ParamStore,
    probes: &[Probe],
    eps: f64,
    loss: impl Fn() -> Result<Tensor>,
) -> Result<Vec<ProbeResult>> {
    let params = store.params();
    let grads = loss()?.backward()?;
    let mut out = Vec::with_capacity(probes.len());
    for probe in probes {
        let var = params
            .get(&probe.name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {}", probe.name)))?;
        let analytic = match grads.get(var.as_tensor()) {
            Some(g) => values(g)?[probe.index],
            None => 0.0,
        };
        let original = values(var.as_tensor())?[probe.index];
        set_element(var, probe.index, original + eps)?;
        let plus = loss()?.to_dtype(DType::F64)?.to_scalar::<f64>()?;
        set_element(var, probe.index, original - eps)?;
        let minus = loss()?.to_dtype(DType::F64)?.to_scalar::<f64>()?;
        set_element(var, probe.index, original)?;
        out.push(ProbeResult {
            probe: probe.clone(),
            analytic,
            numeric: (plus - minus) / (2.0 * eps),
        });
    }
    Ok(out)
}
