//! Evolving recurrent interval type-2 fuzzy regression for data streams.
//!
//! A [`Model`] learns from one `(x, t)` pair at a time. Each sample is first
//! predicted, then either rejected by an entropy-based active-learning gate
//! or used to grow, recall, move and prune rules and to adapt consequents,
//! design factors and recurrent weights.
//!
//! ```
//! use evofuzz::{EngineConfig, Model};
//!
//! let mut model = Model::new(EngineConfig::default(), 1, 1).unwrap();
//! for i in 0..200 {
//!     let x = (i as f64 * 0.05).sin();
//!     model.process_sample(&[x], &[2.0 * x]).unwrap();
//! }
//! let y = model.predict(&[0.3]).unwrap();
//! assert!(y[0].is_finite());
//! ```
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`).

pub mod adapt;
pub mod density;
pub mod engine;
pub mod error;
pub mod fuzzy;
pub mod gate;
pub mod linalg;
pub mod rules;
pub mod scalar;
pub mod snapshot;

pub use engine::{Counters, EngineConfig, ModelState, SampleTrace, Scaler};
pub use error::{Error, Result};
pub use fuzzy::{Inference, IntervalFiring, Rule};
pub use scalar::Real;

pub type Model = ModelState<f64>;
pub type ModelF32 = ModelState<f32>;
pub type RuleF64 = Rule<f64>;
pub type RuleF32 = Rule<f32>;
