//! Robust symbol-level precoding for multiuser MIMO downlink under channel
//! aging.

pub mod channel;
pub mod cir;
pub mod config;
pub mod error;
pub mod lift;
pub mod linalg;
pub mod maxmin;
pub mod nnls;
pub mod precoders;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod validate;

pub use error::{Result, SlpError};
pub use linalg::{CMatrix, CVector, C64};
