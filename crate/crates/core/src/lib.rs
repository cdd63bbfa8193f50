//! Co-learning engine built around fuzzy markup knowledge bases.
//!
//! * [`fml`]: document model, parser, serializer and validator for the
//!   Mamdani subset of the Fuzzy Markup Language.
//! * [`inference`]: Mamdani inference with centroid, mean-of-maxima and
//!   weighted-average defuzzification.
//! * [`pso`]: particle swarm optimization and knowledge-base tuning.
//! * [`raa`]: the speaking-assistant scoring state machine and its session
//!   and team statistics.
//! * [`analytics`]: learning-performance regression on student records.
//! * [`netlink`]: agent/device messages over MQTT-style topics, with an
//!   in-process broker and class simulator.

pub mod analytics;
pub mod fixtures;
pub mod fml;
pub mod inference;
pub mod netlink;
pub mod pso;
pub mod raa;

pub use fml::{parse_fml, serialize_fml, validate, FmlDocument, FmlError};
pub use inference::{infer, InferenceError, InferenceResult, DEFAULT_RESOLUTION};
