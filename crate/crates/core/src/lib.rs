//! Zero-shot relation detection with representation adapters: a reverse-mode
//! autodiff core, BiLSTM question/relation encoders, the adapter and its
//! adversarial training loop, dataset tooling, and evaluation protocols.

pub mod adapter;
pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod dataspace;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod kbqa;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
