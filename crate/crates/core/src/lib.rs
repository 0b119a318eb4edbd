//! Sensor selection for 3D hybrid TOA/RSS wireless positioning.
//!
//! The CRLB of a sensor subset is the figure of merit throughout:
//! [`crlb`] computes it in trace and fractional form, [`dynamic`] selects
//! sensors for one known target location, [`robust`] minimises the worst
//! case over a grid of candidate locations, and [`positioning`] checks the
//! bound against a Monte-Carlo Gauss-Newton estimator. [`harness`] drives
//! seeded experiment batches and writes CSV records.
//!
//! With the default `parallel` feature, batch work runs on a rayon pool;
//! without it everything runs sequentially with identical results.

pub mod combin;
pub mod crlb;
pub mod dynamic;
pub mod error;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod positioning;
pub mod robust;
pub mod scene;

pub use crlb::{crlb_fractional, crlb_trace, fim, CrlbValue, FisherMatrix, FractionalParts};
pub use dynamic::{bof, exhaustive_dynamic, gss_f, gss_t, GreedyAlgorithm, GreedyConfig, OpCostModel, SelectionResult};
pub use error::{Result, SelectError};
pub use scene::{NoiseParams, Point3, Scene, SceneGenerator, SensorSpec, SensorTargetGeometry, TargetLayout};
