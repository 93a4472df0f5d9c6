use candle_core::{Tensor, Var, D};

use super::params::{Builder, Init};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct Linear {
    weight: Tensor,
    bias: Tensor,
}

impl Linear {
    pub fn new(b: &Builder, input: usize, output: usize) -> Result<Self> {
        let bound = 1.0 / (input as f64).sqrt();
        Ok(Self {
            weight: b.param("weight", (output, input), Init::Uniform(bound))?,
            bias: b.param("bias", output, Init::Uniform(bound))?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.weight.t()?)?.broadcast_add(&self.bias)?)
    }
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    pub fn new(b: &Builder, cin: usize, cout: usize, kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        let bound = 1.0 / ((cin * kernel * kernel) as f64).sqrt();
        Ok(Self {
            weight: b.param("weight", (cout, cin, kernel, kernel), Init::Uniform(bound))?,
            bias: b.param("bias", cout, Init::Uniform(bound))?,
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, self.padding, self.stride, 1, 1)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, (), 1, 1))?)?)
    }
}

#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl ConvTranspose2d {
    pub fn new(b: &Builder, cin: usize, cout: usize, kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        let bound = 1.0 / ((cout * kernel * kernel) as f64).sqrt();
        Ok(Self {
            weight: b.param("weight", (cin, cout, kernel, kernel), Init::Uniform(bound))?,
            bias: b.param("bias", cout, Init::Uniform(bound))?,
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv_transpose2d(&self.weight, self.padding, 0, self.stride, 1)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, (), 1, 1))?)?)
    }
}

/// Batch normalization over `(batch, features)`.
#[derive(Clone, Debug)]
pub struct BatchNorm1d {
    gamma: Tensor,
    beta: Tensor,
    running_mean: Var,
    running_var: Var,
}

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

impl BatchNorm1d {
    pub fn new(b: &Builder, features: usize) -> Result<Self> {
        Ok(Self {
            gamma: b.param("weight", features, Init::Const(1.0))?,
            beta: b.param("bias", features, Init::Const(0.0))?,
            running_mean: b.buffer("running_mean", features, 0.0)?,
            running_var: b.buffer("running_var", features, 1.0)?,
        })
    }

    /// `train` normalizes with batch statistics and folds them into the
    /// running estimates; otherwise the running estimates are used.
    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let (mean, var) = if train {
            let n = x.dim(0)?;
            let mean = x.mean_keepdim(0)?;
            let centered = x.broadcast_sub(&mean)?;
            let var = centered.sqr()?.mean_keepdim(0)?;
            let unbiased = if n > 1 {
                (var.detach() * (n as f64 / (n as f64 - 1.0)))?
            } else {
                var.detach()
            };
            let rm = ((self.running_mean.as_tensor() * (1.0 - BN_MOMENTUM))? + (mean.detach().squeeze(0)? * BN_MOMENTUM)?)?;
            let rv = ((self.running_var.as_tensor() * (1.0 - BN_MOMENTUM))? + (unbiased.squeeze(0)? * BN_MOMENTUM)?)?;
            self.running_mean.set(&rm)?;
            self.running_var.set(&rv)?;
            (mean, var)
        } else {
            (
                self.running_mean.as_tensor().unsqueeze(0)?,
                self.running_var.as_tensor().unsqueeze(0)?,
            )
        };
        let xhat = x.broadcast_sub(&mean)?.broadcast_div(&(var + BN_EPS)?.sqrt()?)?;
        Ok(xhat.broadcast_mul(&self.gamma)?.broadcast_add(&self.beta)?)
    }
}

/// Hidden and cell vectors of every layer of a stacked LSTM.
#[derive(Clone, Debug)]
pub struct RecurrentState {
    pub h: Vec<Tensor>,
    pub c: Vec<Tensor>,
}

#[derive(Clone, Debug)]
struct LstmLayer {
    w_ih: Tensor,
    w_hh: Tensor,
    bias: Tensor,
    hidden: usize,
}

impl LstmLayer {
    fn new(b: &Builder, input: usize, hidden: usize) -> Result<Self> {
        let bound = 1.0 / (hidden as f64).sqrt();
        Ok(Self {
            w_ih: b.param("w_ih", (4 * hidden, input), Init::Uniform(bound))?,
            w_hh: b.param("w_hh", (4 * hidden, hidden), Init::Uniform(bound))?,
            bias: b.param("bias", 4 * hidden, Init::Uniform(bound))?,
            hidden,
        })
    }

    fn step(&self, x: &Tensor, h: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor)> {
        let gates = x
            .matmul(&self.w_ih.t()?)?
            .add(&h.matmul(&self.w_hh.t()?)?)?
            .broadcast_add(&self.bias)?;
        let chunks = gates.chunk(4, D::Minus1)?;
        let i = candle_nn::ops::sigmoid(&chunks[0])?;
        let f = candle_nn::ops::sigmoid(&chunks[1])?;
        let g = chunks[2].tanh()?;
        let o = candle_nn::ops::sigmoid(&chunks[3])?;
        let c = ((f * c)? + (i * g)?)?;
        let h = (o * c.tanh()?)?;
        Ok((h, c))
    }
}

/// Stacked LSTM advanced one timestep at a time.
#[derive(Clone, Debug)]
pub struct Lstm {
    layers: Vec<LstmLayer>,
}

impl Lstm {
    pub fn new(b: &Builder, input: usize, hidden: usize, layers: usize) -> Result<Self> {
        let layers = (0..layers)
            .map(|l| LstmLayer::new(&b.pp(&format!("l{l}")), if l == 0 { input } else { hidden }, hidden))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn zero_state(&self, batch: usize, like: &Tensor) -> Result<RecurrentState> {
        let z = Tensor::zeros((batch, self.hidden()), like.dtype(), like.device())?;
        Ok(RecurrentState {
            h: vec![z.clone(); self.layers.len()],
            c: vec![z; self.layers.len()],
        })
    }

    /// Returns the top layer's hidden vector.
    pub fn step(&self, x: &Tensor, state: &RecurrentState) -> Result<(Tensor, RecurrentState)> {
        let mut input = x.clone();
        let mut next = RecurrentState {
            h: Vec::with_capacity(self.layers.len()),
            c: Vec::with_capacity(self.layers.len()),
        };
        for (l, layer) in self.layers.iter().enumerate() {
            let (h, c) = layer.step(&input, &state.h[l], &state.c[l])?;
            input = h.clone();
            next.h.push(h);
            next.c.push(c);
        }
        Ok((input, next))
    }
}

pub fn leaky_relu(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::leaky_relu(x, 0.2)?)
}
