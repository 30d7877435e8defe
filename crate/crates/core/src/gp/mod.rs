//! Exact Gaussian-process regression with an RBF kernel.

mod kernel;
mod likelihood;
pub mod linalg;
mod optimize;
mod posterior;

pub use kernel::{kernel_matrix, KernelSpec};
pub use likelihood::negative_log_likelihood;
pub use optimize::{optimize_hyperparameters, HyperBounds};
pub use posterior::{fit_posterior, posterior_mean_cov, sample_posterior, GpPosterior};

