//! Dense numeric core with hand-written reverse-mode gradients.
//!
//! Activations are laid out as row-major `(rows, features)` matrices. Sequence
//! layers use `T * B` rows where row `t * B + b` holds time step `t` of batch
//! item `b`, so the input projection of a whole sequence is one matrix product.

mod adam;
mod dense;
mod gradcheck;
mod loss;
mod lstm;
mod param;

pub use adam::{Adam, AdamConfig};
pub use dense::{fc_forward, Dense};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{
    bce_with_logits, smooth_l1, smooth_l1_with_grad, softmax_cross_entropy, softmax_rows,
    SMOOTH_L1_BETA,
};
pub use lstm::{bilstm_forward, lstm_step, BiLstmCache, BiLstmLayer, LstmCache, LstmCell};
pub use param::{Param, Parameterized};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
