use nalgebra::{Cholesky, DVector};

use super::linalg::{dependent_columns, weighted_gram, x_vec, xt_vec};
use super::{aicc, bic, criterion_param_count, intensity, log_pl_from_eta, FittedModel};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct IrlsOptions {
    /// Relative log-pseudolikelihood change that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step halvings allowed when an update lowers the objective.
    pub max_halvings: usize,
    /// Pivot tolerance, relative to the largest pivot, for rank detection on
    /// the unit-diagonal quadrature-weighted Gram matrix.
    pub rank_tolerance: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions { tolerance: 1e-8, max_iterations: 100, max_halvings: 10, rank_tolerance: 1e-10 }
    }
}

pub fn fit_weighted_poisson(x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<FittedModel> {
    fit_weighted_poisson_with(x, y, w, &IrlsOptions::default(), None)
}

/// IRLS for the log-link weighted Poisson model.
///
/// Each iteration solves `(X^T W X) delta = X^T w (y - lambda)` with working
/// weights `W = w lambda`, which is the weighted least-squares update on the
/// working response. `start` warm-starts the coefficients.
pub fn fit_weighted_poisson_with(
    x: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    opts: &IrlsOptions,
    start: Option<&DVector<f64>>,
) -> Result<FittedModel> {
    let (n, p) = x.x.shape();
    if n == 0 || p == 0 {
        return Err(Error::invalid("empty design matrix"));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::invalid(format!(
            "design has {n} rows but response has {} and weights {}",
            y.len(),
            w.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(format!("response {} at row {i} is not a non-negative number", y[i])));
    }
    if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid(format!("weight {} at row {i} is not positive", w[i])));
    }
    if x.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design matrix has non-finite entries"));
    }

    let dependent = dependent_columns(&weighted_gram(&x.x, w), opts.rank_tolerance);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent.iter().map(|&j| x.labels[j].clone()).collect() });
    }

    let mut beta = match start {
        Some(b) if b.len() == p => b.clone(),
        _ => {
            let swy: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
            let sw: f64 = w.iter().sum();
            let mut b = DVector::zeros(p);
            b[0] = if swy > 0.0 { (swy / sw).ln() } else { -ETA_FLOOR };
            b
        }
    };
    let wy: Vec<f64> = y.iter().zip(w).map(|(a, b)| a * b).collect();

    let mut eta = x_vec(&x.x, &beta);
    let mut ll = log_pl_from_eta(&eta, y, w);
    let mut converged = false;
    let mut iterations = 0;
    let mut diagnostics = None;
    let mut working = vec![0.0; n];
    let mut resid = vec![0.0; n];

    while iterations < opts.max_iterations {
        iterations += 1;
        for i in 0..n {
            let lambda = intensity(eta[i]);
            working[i] = w[i] * lambda;
            resid[i] = wy[i] - working[i];
        }
        let info = weighted_gram(&x.x, &working);
        let score = xt_vec(&x.x, &resid);
        let chol = Cholesky::new(info).ok_or_else(|| {
            Error::Numerical(format!("information matrix not positive definite at iteration {iterations}"))
        })?;
        let step = chol.solve(&score);
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite IRLS step".into()));
        }

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = &beta + &step * scale;
            let trial_eta = x_vec(&x.x, &trial);
            let trial_ll = log_pl_from_eta(&trial_eta, y, w);
            if trial_ll.is_finite() && trial_ll >= ll - 1e-12 * ll.abs() {
                accepted = Some((trial, trial_eta, trial_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((new_beta, new_eta, new_ll)) = accepted else {
            diagnostics = Some(format!(
                "step halving exhausted at iteration {iterations}; logPL {ll}"
            ));
            break;
        };
        let change = (new_ll - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        beta = new_beta;
        eta = new_eta;
        ll = new_ll;
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged && diagnostics.is_none() {
        diagnostics = Some(format!("no convergence after {iterations} iterations; logPL {ll}"));
    }
    if eta.iter().any(|e| *e > super::ETA_CAP) {
        converged = false;
        diagnostics = Some("linear predictor overflow".into());
    }

    for i in 0..n {
        working[i] = w[i] * intensity(eta[i]);
    }
    let info = weighted_gram(&x.x, &working);
    let covariance = Cholesky::new(info)
        .ok_or_else(|| Error::Numerical("information matrix singular at the optimum".into()))?
        .inverse();

    let n_params = criterion_param_count(x);
    Ok(FittedModel {
        coefficients: beta,
        labels: x.labels.clone(),
        n_covariate_columns: x.n_covariate_columns,
        radial: x.radial.clone(),
        basis: x.basis,
        log_pl: ll,
        n_obs: n,
        n_params,
        bic: bic(ll, n_params, n),
        aicc: aicc(ll, n_params, n).ok(),
        covariance,
        converged,
        iterations,
        diagnostics,
    })
}

const ETA_FLOOR: f64 = 30.0;
