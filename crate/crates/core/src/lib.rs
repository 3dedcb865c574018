//! Deterministic point-cloud completion toolkit.
//!
//! The crate bundles the pieces of a parallel point-cloud completion
//! pipeline and the metrics used to judge it:
//!
//! * [`geometry`]: canonical ordering, farthest point sampling, k-NN,
//!   local grouping, ball queries and directed nearest-neighbour distances.
//! * [`pca`]: PCA-guided sorting and uniform interleaved decomposition of a
//!   cloud into `U` subsets (plus a seeded random baseline).
//! * [`metrics`]: Chamfer variants, density-aware Chamfer, EMD, F-Score,
//!   Fidelity, MMD, Consistency and Uniformity.
//! * [`loss`]: the flexible Chamfer loss over seeds, per-head parts and the
//!   merged output, with analytic gradients.
//! * [`nn`]: forward-only network stages (PointNet, SSM encoder, seed
//!   generator, attention decoder, multi-head reconstructor).
//! * [`pipeline`]: configuration, synthetic shapes, viewpoint cropping and
//!   end-to-end orchestration.
//! * [`io`]: XYZ / PCF1 point files and the PWT1 weight container.
//!
//! Everything is computed in `f64` and is a pure function of its inputs;
//! internal data parallelism never changes results.

pub mod cloud;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod parallel;
pub mod pca;
pub mod pipeline;
pub mod rng;

pub use cloud::{Point3, PointCloud};
pub use config::{ModelConfig, Scale};
pub use error::{Error, Result};
