//! Scaling-relation residuals of a stored trajectory.
//!
//! A self-similar solution satisfies `n(x,t) = lambda^2 n(lambda x, lambda^2 t)`,
//! `grad c`, `grad v` and `u` with degree 1. The mean of `c` drifts on a
//! periodic box and `v` is only defined up to constants, so both are
//! compared through their gradients.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::solver::StateTuple;
use crate::spectral::{Grid, SpectralField, VectorField};

/// Annulus `inner <= |x| <= outer` where the comparison is made.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWindow {
    pub inner: f64,
    pub outer: f64,
}

impl SimilarityWindow {
    /// Excludes the mollification core `|x| < 8h` and the truncation
    /// envelope `|x| > L/4`.
    pub fn default_for(grid: &Grid) -> Self {
        Self {
            inner: 8.0 * grid.spacing(),
            outer: grid.half_width() / 4.0,
        }
    }

    pub fn sites(&self, grid: &Grid) -> Vec<usize> {
        let tol = 1e-9 * grid.spacing();
        grid.positions()
            .enumerate()
            .filter(|(_, x)| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                r >= self.inner - tol && r <= self.outer + tol
            })
            .map(|(k, _)| k)
            .collect()
    }
}

/// Maximum relative residual per component for one scale factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleResidual {
    pub lambda: f64,
    /// Number of stored-time pairs `(t, lambda^2 t)` compared.
    pub pairs: usize,
    pub n: f64,
    pub grad_c: f64,
    pub grad_v: f64,
    pub u: f64,
}

impl ScaleResidual {
    pub fn max(&self) -> f64 {
        self.n.max(self.grad_c).max(self.grad_v).max(self.u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarReport {
    pub window: SimilarityWindow,
    pub window_sites: usize,
    pub residuals: Vec<ScaleResidual>,
}

impl SelfSimilarReport {
    pub fn max(&self) -> f64 {
        self.residuals.iter().map(ScaleResidual::max).fold(0.0, f64::max)
    }
}

/// `max_W |a - b| / max_W |a|` for vector samples (0 when `a` vanishes on W).
fn relative(a: &[Vec<f64>], b: &[Vec<f64>], sites: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for &k in sites {
        let (mut d2, mut a2) = (0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            d2 += (x[k] - y[k]) * (x[k] - y[k]);
            a2 += x[k] * x[k];
        }
        num = num.max(d2.sqrt());
        den = den.max(a2.sqrt());
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

fn physical(v: &VectorField) -> Vec<Vec<f64>> {
    v.components().iter().map(SpectralField::to_physical).collect()
}

fn rescaled(v: &VectorField, lambda: f64, degree: f64) -> Result<Vec<Vec<f64>>> {
    Ok(physical(&v.rescale(lambda, degree)?))
}

/// Index offset `m` with `ratio^m = lambda^2` on a geometric trajectory.
fn time_offset(trajectory: &[StateTuple], lambda: f64) -> Result<usize> {
    if lambda == 1.0 {
        return Ok(0);
    }
    if trajectory.len() < 2 {
        return arg("self-similarity needs at least two stored times");
    }
    let ratio = trajectory[1].t / trajectory[0].t;
    let m = (lambda * lambda).ln() / ratio.ln();
    let mr = m.round();
    if mr < 1.0 || (m - mr).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "lambda^2 = {} is not an integer power of the time-grid ratio {ratio}",
            lambda * lambda
        )));
    }
    let mr = mr as usize;
    if mr >= trajectory.len() {
        return Err(Error::Precondition(format!(
            "lambda^2 t leaves the stored time range for lambda = {lambda}"
        )));
    }
    Ok(mr)
}

/// Compares each stored state at `t` with the rescaled state at `lambda^2 t`.
pub fn verify_self_similar(
    trajectory: &[StateTuple],
    gamma: f64,
    lambdas: &[f64],
    window: SimilarityWindow,
) -> Result<SelfSimilarReport> {
    if gamma != 0.0 {
        return Err(Error::Precondition(format!(
            "self-similarity requires gamma = 0, got {gamma}"
        )));
    }
    if trajectory.is_empty() {
        return arg("trajectory is empty");
    }
    let grid = trajectory[0].grid().clone();
    if grid.dim() != 3 {
        return Err(Error::Precondition(
            "self-similar scenarios are restricted to three dimensions".into(),
        ));
    }
    let sites = window.sites(&grid);
    if sites.is_empty() {
        return Err(Error::Precondition("comparison window contains no grid sites".into()));
    }
    let mut residuals = Vec::new();
    for &lambda in lambdas {
        let m = time_offset(trajectory, lambda)?;
        let mut r = ScaleResidual {
            lambda,
            pairs: trajectory.len() - m,
            n: 0.0,
            grad_c: 0.0,
            grad_v: 0.0,
            u: 0.0,
        };
        for k in 0..trajectory.len() - m {
            let (a, b) = (&trajectory[k], &trajectory[k + m]);
            let n_b = vec![b.n.rescale(lambda, 2.0)?.to_physical()];
            r.n = r.n.max(relative(&[a.n.to_physical()], &n_b, &sites));
            r.grad_c = r.grad_c.max(relative(
                &physical(&a.c.gradient()),
                &rescaled(&b.c.gradient(), lambda, 1.0)?,
                &sites,
            ));
            r.grad_v = r.grad_v.max(relative(
                &physical(&a.v.gradient()),
                &rescaled(&b.v.gradient(), lambda, 1.0)?,
                &sites,
            ));
            r.u = r.u.max(relative(&physical(&a.u), &rescaled(&b.u, lambda, 1.0)?, &sites));
        }
        residuals.push(r);
    }
    Ok(SelfSimilarReport {
        window,
        window_sites: sites.len(),
        residuals,
    })
}
