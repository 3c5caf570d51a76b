// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Sampling, graph construction, subgraph functionals and limit theory for
//! hyperbolic random geometric graphs in the Poincaré ball.
//!
//! A typical pipeline samples a [`PointCloud`], builds an [`HGraph`], counts
//! per-vertex stars and cliques with [`compute_functionals`], and compares
//! the extremes and sums against the constants in [`theory`].

// Parameter checks are written as `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod functionals;
pub mod geometry;
pub mod graph;
pub mod limitsim;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use functionals::{
    compute_functionals, AnchoredSample, Centering, FunctionalKind, ProcessPath, VertexFunctionals,
};
pub use geometry::{ModelParams, PolarPoint};
pub use graph::{build_graph, HGraph, Orientation};
pub use limitsim::{BivariateRealization, Jump, LimitRealization};
pub use sampler::{sample_cloud, PointCloud, RadialLaw};
pub use stats::TailFit;
pub use theory::{CliqueConstants, StableKind, StarConstants, StarRegime};
pub use experiment::{run_experiment, Analysis, ExperimentConfig, OutputFormat, ReplicationData};
