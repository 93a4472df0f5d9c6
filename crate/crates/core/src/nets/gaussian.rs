use candle_core::{Tensor, D};

use crate::error::{Error, Result};

/// Diagonal Gaussian over the latent, batched as `(batch, z_dim)`.
#[derive(Clone, Debug)]
pub struct GaussianParams {
    pub mu: Tensor,
    pub log_sigma: Tensor,
}

impl GaussianParams {
    pub fn sigma(&self) -> Result<Tensor> {
        Ok(self.log_sigma.exp()?)
    }

    pub fn z_dim(&self) -> Result<usize> {
        Ok(self.mu.dim(D::Minus1)?)
    }
}

/// Reparameterized draw `mu + sigma * noise`.
pub fn sample_latent(p: &GaussianParams, noise: &Tensor) -> Result<Tensor> {
    if noise.dims() != p.mu.dims() {
        return Err(Error::Contract(format!(
            "noise shape {:?} does not match latent shape {:?}",
            noise.dims(),
            p.mu.dims()
        )));
    }
    Ok((&p.mu + (p.sigma()? * noise)?)?)
}

/// `KL(q || p)` summed over latent dimensions; one value per batch row.
pub fn kl_divergence(q: &GaussianParams, p: &GaussianParams) -> Result<Tensor> {
    if q.mu.dims() != p.mu.dims() {
        return Err(Error::Contract(format!(
            "KL between latents of shape {:?} and {:?}",
            q.mu.dims(),
            p.mu.dims()
        )));
    }
    let var_q = (&q.log_sigma * 2.0)?.exp()?;
    let var_p = (&p.log_sigma * 2.0)?.exp()?;
    let diff2 = (&q.mu - &p.mu)?.sqr()?;
    let term = ((&p.log_sigma - &q.log_sigma)? + ((var_q + diff2)? / (var_p * 2.0)?)?)?;
    Ok((term - 0.5)?.sum(D::Minus1)?)
}
