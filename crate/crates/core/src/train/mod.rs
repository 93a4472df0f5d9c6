//! End-to-end optimization of any model kind: reconstruction in pixel and
//! normalized-taxel space plus a β-weighted KL between posterior and learned
//! prior, with full teacher forcing.

mod curves;
mod loss;
mod trainer;

pub use curves::{read_curves, write_curves, EpochRecord};
pub use loss::{compute_loss, loss_tensors, LossBreakdown, LossTensors};
pub use trainer::{curves_path, train, TeacherForcing, TrainConfig, TrainData, TrainOutcome, Trainer};
