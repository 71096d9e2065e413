//! Differentially private top-k analytics.
//!
//! - [`noise`]: keyed, reproducible Laplace and Gumbel draws.
//! - [`store`]: columnar event tables answering group-by counts.
//! - [`mechanisms`]: the four histogram and top-k release algorithms.
//! - [`composition`]: bounded-range composition and parameter solving.
//! - [`budget`]: per-analyst information and call budgets.
//! - [`service`]: classification, admission, execution and the socket server.
//! - [`calibration`]: attack-probability calculators.

pub mod budget;
pub mod calibration;
pub mod composition;
pub mod mechanisms;
pub mod noise;
pub mod service;
pub mod store;

pub use budget::{Cost, Ledger};
pub use mechanisms::{DpResult, PrivacyParams, QueryClass};
pub use noise::{NoiseSeed, SecretKey};
pub use service::{QueryEngine, QueryResponse, QuerySpec};
pub use store::{HistogramSlice, Table};
