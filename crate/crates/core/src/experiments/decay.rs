//! Power-law fits of norm decay on the tail of a geometric time grid.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::experiments::admissibility::ExponentSet;
use crate::norms::{state_norms, BallSampling};
use crate::solver::StateTuple;

/// Minimum number of tail points for a fit.
pub const MIN_TAIL_POINTS: usize = 8;
/// Maximum number of tail points.
pub const MAX_TAIL_POINTS: usize = 10;

/// Solution component whose unweighted norm is fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayComponent {
    /// `||n(t)||` in `M^q_{q1}`.
    N,
    /// `||grad c(t)||` in `M^r_{r1}`.
    GradC,
    /// `||grad v(t)||` in `M^r_{r1}`.
    GradV,
    /// `||u(t)||` in `M^p_{p1}`.
    U,
}

impl DecayComponent {
    pub const ALL: [DecayComponent; 4] = [Self::N, Self::GradC, Self::GradV, Self::U];

    pub fn name(&self) -> &'static str {
        match self {
            Self::N => "n",
            Self::GradC => "grad_c",
            Self::GradV => "grad_v",
            Self::U => "u",
        }
    }

    /// Slope implied by a bounded weighted norm: `-l_q`, `-mu_r` or `-mu_p`.
    pub fn predicted_slope(&self, exps: &ExponentSet) -> f64 {
        let w = exps.weights();
        match self {
            Self::N => -w.l_q,
            Self::GradC | Self::GradV => -w.mu_r,
            Self::U => -w.mu_p,
        }
    }

    fn pick(&self, norms: &[f64; 5]) -> f64 {
        match self {
            Self::N => norms[0],
            Self::GradC => norms[2],
            Self::GradV => norms[3],
            Self::U => norms[4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub component: DecayComponent,
    /// Least-squares slope of `log ||.||` against `log t`; absent when the
    /// component vanishes on the tail.
    pub fitted_slope: Option<f64>,
    pub predicted_slope: f64,
    /// `|fitted - predicted| / |predicted|`.
    pub deviation: Option<f64>,
    pub tail_points: usize,
    pub applicable: bool,
}

/// Least-squares `(slope, intercept)` of `log y` against `log t`.
pub fn fit_power_law(times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    if times.len() != values.len() || times.len() < 2 {
        return arg("power-law fit needs at least two (t, y) pairs of equal length");
    }
    if times.iter().chain(values).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return arg("power-law fit needs positive finite data");
    }
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return arg("power-law fit needs distinct times");
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Indices of the tail: the last ten points, restricted to the top decade.
pub fn tail_indices(times: &[f64]) -> Result<Vec<usize>> {
    let Some(&t_max) = times.last() else {
        return arg("empty time series");
    };
    let start = times.len().saturating_sub(MAX_TAIL_POINTS);
    let idx: Vec<usize> = (start..times.len())
        .filter(|&k| times[k] >= t_max / 10.0 * (1.0 - 1e-12))
        .collect();
    if idx.len() < MIN_TAIL_POINTS {
        return Err(Error::Precondition(format!(
            "decay fit needs at least {MIN_TAIL_POINTS} tail points in the top decade, found {}",
            idx.len()
        )));
    }
    Ok(idx)
}

/// Fits a series directly; zero values on the tail yield a not-applicable fit.
pub fn fit_series(
    component: DecayComponent,
    times: &[f64],
    values: &[f64],
    predicted: f64,
) -> Result<DecayFit> {
    if times.len() != values.len() {
        return arg("times and values differ in length");
    }
    let idx = tail_indices(times)?;
    let t: Vec<f64> = idx.iter().map(|&k| times[k]).collect();
    let y: Vec<f64> = idx.iter().map(|&k| values[k]).collect();
    if y.iter().any(|v| !(*v > f64::MIN_POSITIVE)) {
        return Ok(DecayFit {
            component,
            fitted_slope: None,
            predicted_slope: predicted,
            deviation: None,
            tail_points: idx.len(),
            applicable: false,
        });
    }
    let (slope, _) = fit_power_law(&t, &y)?;
    Ok(DecayFit {
        component,
        fitted_slope: Some(slope),
        predicted_slope: predicted,
        deviation: Some((slope - predicted).abs() / predicted.abs()),
        tail_points: idx.len(),
        applicable: true,
    })
}

/// Unweighted norm of one component along a trajectory.
pub fn component_series(
    trajectory: &[StateTuple],
    component: DecayComponent,
    exps: &ExponentSet,
    sampling: &BallSampling,
) -> Vec<f64> {
    trajectory
        .iter()
        .map(|s| component.pick(&state_norms(s, exps, sampling)))
        .collect()
}

pub fn fit_decay_rate(
    trajectory: &[StateTuple],
    component: DecayComponent,
    exps: &ExponentSet,
    sampling: &BallSampling,
) -> Result<DecayFit> {
    let times: Vec<f64> = trajectory.iter().map(|s| s.t).collect();
    // validate the tail before paying for the norms
    tail_indices(&times)?;
    let values = component_series(trajectory, component, exps, sampling);
    fit_series(component, &times, &values, component.predicted_slope(exps))
}
