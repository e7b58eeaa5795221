//! Nuisance learners for the doubly-robust estimator.

pub mod density;
pub mod forest;
pub mod kernel;

pub use density::{cond_density_eval, cond_density_fit, CondDensity, DensityParams, ResidualKde};
pub use forest::{rf_fit, rf_predict, Forest, ForestParams, Tree};
pub use kernel::{cv_bandwidth, kernel_smooth, kernel_smooth_point, log_grid, Bandwidth, Kernel, SmoothPoint};
