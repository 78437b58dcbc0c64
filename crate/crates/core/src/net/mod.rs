//! Peephole LSTM pouring policy: forward pass, BPTT, Adam, training and checkpoints.

pub mod adam;
pub mod cell;
pub mod checkpoint;
pub mod gradcheck;
pub mod network;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use cell::{cell_forward, CellCache, LstmParams};
pub use checkpoint::{Hyper, ModelCheckpoint, FORMAT_VERSION};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use network::{batch_gradients, dropout, loss, sequence_loss, HeadParams, Network, RecurrentState, SequenceTrace};
pub use train::{evaluate_loss, format_curve, optimize, train, CurvePoint, TrainConfig, TrainOutcome};
