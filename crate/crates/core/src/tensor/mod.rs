//! Dense matrices, a reverse-mode tape, and the optimizer/checkpoint
//! plumbing around it.

mod checkpoint;
mod gradcheck;
mod init;
mod matrix;
mod optim;
mod segment;
mod tape;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gradcheck::{grad_check, GradCheckReport, REL_ERR_FLOOR};
pub use init::glorot_uniform;
pub use matrix::Matrix;
pub use optim::{adam_step, AdamConfig, AdamState};
pub use segment::SegmentIndex;
pub use tape::{sigmoid, Tape, Tensor};
