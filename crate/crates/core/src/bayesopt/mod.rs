//! Bayesian optimization over parameter distributions: a Wasserstein metric
//! between search points, a Matérn Gaussian-process surrogate on that
//! metric, expected improvement, and the optimization loop.

mod acquisition;
mod distance;
mod gp;
mod search;

pub use acquisition::expected_improvement;
pub use distance::{
    quadrature_w2, search_distance, sinkhorn_w2, wasserstein2_marginal, SinkhornConfig,
    QUADRATURE_NODES,
};
pub use gp::{matern52, GpConfig, GpSurrogate};
pub use search::{
    bo_loop, BoConfig, BoOutcome, BoRecord, MarginalRange, ScalarRange, SearchPoint, SearchSpace,
    MARGINAL_NAMES,
};
