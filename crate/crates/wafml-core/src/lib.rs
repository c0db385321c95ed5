//! Machine-learning detectors for HTTP attack traffic.
//!
//! Two complementary methods over parsed, decoded requests:
//!
//! * a one-class Gaussian mixture classifier over counts of expert-chosen
//!   tokens ([`features`], [`gmm`]), and
//! * a per-field n-gram language model that scores how far each header or
//!   parameter value drifts from the traffic it was trained on ([`ngram`]).
//!
//! Verdicts from either method can be combined with an external rule
//! engine's verdicts ([`combine`]), and [`eval`] measures TPR/TNR over
//! labeled splits, including λ sweeps for ROC curves.

pub mod combine;
pub mod error;
pub mod eval;
pub mod features;
pub mod gmm;
pub mod http;
pub mod ngram;
pub mod stats;
pub mod verdict;

pub use error::Error;
pub use verdict::{Label, Verdict};
