//! Frequentist comparators: parametric AFT regression, logistic regression,
//! the Kaplan-Meier estimator and the per-arm least-squares effect estimator.

mod aft;
mod km;
mod logistic;
mod ols;

pub use aft::{aft_mle, aft_mle_with, AftDistribution, AftFit, AftOptions};
pub use km::{kaplan_meier, StepSurvival};
pub use logistic::{logistic_irls, LogisticFit};
pub use ols::{least_squares, lr_treatment_effect, LrEffect, OlsFit};

use nalgebra::DMatrix;

/// Numerical rank test shared by the regressions.
pub(crate) fn is_full_rank(x: &DMatrix<f64>) -> bool {
    if x.nrows() < x.ncols() {
        return false;
    }
    let sv = x.clone().singular_values();
    let max = sv.max();
    max > 0.0 && sv.min() > 1e-10 * max
}
