//! Fisher scoring (IRLS) for the regression coefficients.
//!
//! Maximizes the unit-dispersion log-likelihood kernel
//! `sum_i [theta_i y_i - B(theta_i)]`; because the dispersion multiplies
//! this kernel as a whole, the maximizer is the maximum-likelihood estimate
//! for every dispersion value, under either link.

use nalgebra::{DMatrix, DVector};

use crate::fit::{validate_design, Link};
use crate::{Error, Result};

/// Divergence guard: a fitted mean within about `1e-6` of a boundary is
/// beyond anything the model can resolve, and with boundary-separated data
/// the estimate runs off to infinity rather than stopping here.
const MAX_ABS_LINEAR_PREDICTOR: f64 = 1e6;

/// Tuning knobs for [`fit_irls`].
#[derive(Debug, Clone, Copy)]
pub struct IrlsOptions {
    /// Maximum Fisher-scoring iterations.
    pub max_iter: u32,
    /// Convergence threshold on the max-norm of the score vector.
    pub grad_tol: f64,
    /// Maximum step halvings per iteration before giving up.
    pub max_step_halvings: u32,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-8,
            max_step_halvings: 30,
        }
    }
}

/// Result of a converged IRLS run.
#[derive(Debug, Clone)]
pub struct IrlsFit {
    /// Coefficient estimate.
    pub beta: DVector<f64>,
    /// Unit-dispersion log-likelihood kernel at the estimate; the full
    /// log-likelihood is `dispersion * kernel + sum_i log h(y_i)` where the
    /// base-measure term does not involve the coefficients.
    pub kernel_log_likelihood: f64,
    /// Max-norm of the score vector at the estimate.
    pub gradient_norm: f64,
    /// Fisher-scoring iterations used.
    pub iterations: u32,
}

/// Fit regression coefficients by iteratively reweighted least squares.
///
/// `x` is the n-by-p design, `y` the responses in `[0, 1]`. Starts from
/// `beta = 0` (centered means) and step-halves whenever a full Fisher step
/// fails to improve the objective. Errors with
/// [`Error::NoConvergence`](crate::Error::NoConvergence) when the score
/// cannot be driven below tolerance — which includes data whose likelihood
/// has no interior maximum (e.g. all responses on one boundary).
pub fn fit_irls(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    link: Link,
    options: &IrlsOptions,
) -> Result<IrlsFit> {
    validate_design(x, y)?;
    let n = x.nrows();
    let p = x.ncols();
    let mut beta = DVector::zeros(p);
    let mut objective = link.kernel(x, y, &beta)?;

    for iter in 1..=options.max_iter {
        let eta = x * &beta;
        // A linear predictor this large means the likelihood is still rising
        // toward a boundary (it grows like log |eta| there, so the score
        // eventually dips under any tolerance at an absurd estimate).
        if eta.amax() > MAX_ABS_LINEAR_PREDICTOR {
            return Err(Error::NoConvergence {
                context: "IRLS linear predictor diverged; the response may be \
                          concentrated on a boundary"
                    .into(),
                iterations: u64::from(iter),
            });
        }
        let mut score = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let (s, w) = link.score_weight(eta[i], y[i])?;
            let row = x.row(i);
            for a in 0..p {
                score[a] += s * row[a];
                for b in a..p {
                    info[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        info.fill_lower_triangle_with_upper_triangle();

        let gradient_norm = score.amax();
        if gradient_norm <= options.grad_tol {
            return Ok(IrlsFit {
                beta,
                kernel_log_likelihood: objective,
                gradient_norm,
                iterations: iter - 1,
            });
        }

        let chol = info.clone().cholesky().ok_or_else(|| {
            Error::Numeric("singular Fisher information; is the design rank-deficient?".into())
        })?;
        let full_step = chol.solve(&score);

        // Backtracking line search on the exact objective.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=options.max_step_halvings {
            let candidate = &beta + &full_step * scale;
            let value = link.kernel(x, y, &candidate)?;
            if value > objective - 1e-12 * objective.abs() {
                beta = candidate;
                objective = value;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                context: "IRLS step halving".into(),
                iterations: u64::from(options.max_step_halvings),
            });
        }
    }

    Err(Error::NoConvergence {
        context: "IRLS score tolerance".into(),
        iterations: u64::from(options.max_iter),
    })
}
