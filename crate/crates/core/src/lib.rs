//! Nonparametric independence screening for ultra-high-dimensional
//! varying-coefficient models `Y = beta(W)^T X + eps`.
//!
//! * [`spline_basis`]: clamped B-spline basis on the exposure support.
//! * [`marginal_screen`]: per-covariate spline regressions and marginal utilities.
//! * [`permutation`]: permutation and conditional-permutation thresholds.
//! * [`group_scad`]: group-SCAD selection by local quadratic approximation with BIC tuning.
//! * [`inis`]: the conditional and greedy iterative drivers.
//! * [`simgen`]: simulation designs, the housing augmentation, and evaluation metrics.
//! * [`cli`]: the `vcnis` command-line front end.

pub mod cli;
pub mod data;
pub mod error;
pub mod group_scad;
pub mod inis;
pub mod linalg;
pub mod marginal_screen;
pub mod permutation;
pub mod rng;
pub mod simgen;
pub mod spline_basis;

pub use data::Dataset;
pub use error::{Error, Result};
pub use group_scad::{fit_group_scad, LambdaGrid, ScadConfig, ScadModel};
pub use inis::{run_conditional_inis, run_greedy_inis, run_inis, InisConfig, InisResult, Variant};
pub use marginal_screen::{screen_all, ScreenReport};
pub use permutation::PermutationConfig;
pub use spline_basis::SplineBasis;
