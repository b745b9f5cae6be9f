//! Dense feed-forward networks with exact backpropagation.
//!
//! Hidden layers use the rectifier; the output head is either linear or a
//! probability simplex (softmax), optionally split into several independent
//! groups so one network can emit several categorical distributions.

mod check;
mod loss;
mod net;
mod optim;
mod text;

pub use check::gradient_check;
pub use loss::{grouped_loss, loss, LossKind, LOG_CLAMP};
pub use net::{DenseNet, OutputHead};
pub use optim::{train_step, Adam, AdamConfig};
pub use text::{dump, restore};
