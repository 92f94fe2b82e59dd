//! Long-time comparison of two small solutions: weighted differences of the
//! solutions against weighted differences of their free evolutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{x_norm_sample, XNormSample};
use crate::solver::{
    caloric_extension, picard_solve, smallness_check, trajectory_difference, x_distance,
    InitialData, IterationTrace, SolverConfig, StateTuple,
};

/// Names of the five weighted quantities, in series order.
pub const SERIES_NAMES: [&str; 5] = ["n", "c_sup", "grad_c", "grad_v", "u"];

/// Five weighted series `t^{l_q}||n||`, `||c||_inf`, `t^{mu_r}||grad c||`,
/// `t^{mu_r}||grad v||`, `t^{mu_p}||u||` sampled on the time grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedSeries {
    pub n: Vec<f64>,
    pub c_sup: Vec<f64>,
    pub grad_c: Vec<f64>,
    pub grad_v: Vec<f64>,
    pub u: Vec<f64>,
}

impl WeightedSeries {
    fn from_samples(samples: &[XNormSample]) -> Self {
        Self {
            n: samples.iter().map(|s| s.n).collect(),
            c_sup: samples.iter().map(|s| s.c_sup).collect(),
            grad_c: samples.iter().map(|s| s.c_grad).collect(),
            grad_v: samples.iter().map(|s| s.v_grad).collect(),
            u: samples.iter().map(|s| s.u).collect(),
        }
    }

    pub fn columns(&self) -> [&[f64]; 5] {
        [&self.n, &self.c_sup, &self.grad_c, &self.grad_v, &self.u]
    }

    pub fn is_identically_zero(&self) -> bool {
        self.columns().iter().all(|c| c.iter().all(|v| *v == 0.0))
    }
}

/// Tail verdict for one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailVerdict {
    pub name: String,
    pub first: f64,
    pub last: f64,
    /// `last < first` over the final decade, or the series vanishes there.
    pub decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    /// Weighted differences of the two solutions.
    pub volta: WeightedSeries,
    /// Weighted differences of the two caloric extensions.
    pub ida: WeightedSeries,
    pub volta_tail: Vec<TailVerdict>,
    pub ida_tail: Vec<TailVerdict>,
    pub volta_decreasing: bool,
    pub ida_decreasing: bool,
    pub traces: Vec<IterationTrace>,
    /// Set when either solve diverged; the series are then empty.
    pub divergence: Option<IterationTrace>,
}

/// Index of the first time in the final decade.
pub fn final_decade_start(times: &[f64]) -> usize {
    let t_max = times.last().copied().unwrap_or(0.0);
    times
        .iter()
        .position(|&t| t >= t_max / 10.0 * (1.0 - 1e-12))
        .unwrap_or(0)
}

pub fn tail_verdicts(times: &[f64], series: &WeightedSeries) -> Vec<TailVerdict> {
    let k0 = final_decade_start(times);
    SERIES_NAMES
        .iter()
        .zip(series.columns())
        .map(|(name, col)| {
            let (first, last) = (col[k0], col[col.len() - 1]);
            TailVerdict {
                name: name.to_string(),
                first,
                last,
                decreasing: last < first || (first == 0.0 && last == 0.0),
            }
        })
        .collect()
}

fn weighted(diff: &[StateTuple], config: &SolverConfig) -> WeightedSeries {
    let samples: Vec<XNormSample> = diff
        .iter()
        .map(|s| x_norm_sample(s, &config.exps, &config.sampling))
        .collect();
    WeightedSeries::from_samples(&samples)
}

/// Solves from both data sets and compares the weighted solution
/// differences with the weighted caloric differences.
pub fn asymptotic_stability_run(
    data: &InitialData,
    perturbed: &InitialData,
    config: &SolverConfig,
) -> Result<StabilityReport> {
    for (label, d) in [("data", data), ("perturbed data", perturbed)] {
        let table = smallness_check(d, config)?;
        if table.small == Some(false) {
            return Err(Error::Precondition(format!(
                "{label} fails the smallness check: ||data||_I = {:.3e} > delta = {:.3e}",
                table.data_norm.unwrap_or(f64::NAN),
                table.delta.unwrap_or(f64::NAN)
            )));
        }
    }
    let times = config.time_grid.times();
    let mut traces = Vec::new();
    let mut solutions = Vec::new();
    for d in [data, perturbed] {
        match picard_solve(d, config) {
            Ok((x, trace)) => {
                traces.push(trace);
                solutions.push(x);
            }
            Err(Error::Divergence(trace)) => {
                return Ok(StabilityReport {
                    times,
                    volta: WeightedSeries::default(),
                    ida: WeightedSeries::default(),
                    volta_tail: Vec::new(),
                    ida_tail: Vec::new(),
                    volta_decreasing: false,
                    ida_decreasing: false,
                    traces,
                    divergence: Some(*trace),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let volta = weighted(&trajectory_difference(&solutions[0], &solutions[1])?, config);
    let y0 = caloric_extension(data, config.gamma, &config.time_grid)?;
    let y1 = caloric_extension(perturbed, config.gamma, &config.time_grid)?;
    let ida = weighted(&trajectory_difference(&y0, &y1)?, config);
    let volta_tail = tail_verdicts(&times, &volta);
    let ida_tail = tail_verdicts(&times, &ida);
    Ok(StabilityReport {
        volta_decreasing: volta_tail.iter().all(|v| v.decreasing),
        ida_decreasing: ida_tail.iter().all(|v| v.decreasing),
        times,
        volta,
        ida,
        volta_tail,
        ida_tail,
        traces,
        divergence: None,
    })
}

/// Measured Lipschitz ratio `||x - x~||_X / ||y - y~||_X` of the data-to-solution
/// map between `data` and `data + size * direction`.
pub fn lipschitz_ratio(
    data: &InitialData,
    direction: &InitialData,
    size: f64,
    config: &SolverConfig,
) -> Result<f64> {
    let other = data.add(&direction.scale(size))?;
    let (x0, _) = picard_solve(data, config)?;
    let (x1, _) = picard_solve(&other, config)?;
    let y0 = caloric_extension(data, config.gamma, &config.time_grid)?;
    let y1 = caloric_extension(&other, config.gamma, &config.time_grid)?;
    let dx = x_distance(&x0, &x1, &config.exps, &config.sampling)?;
    let dy = x_distance(&y0, &y1, &config.exps, &config.sampling)?;
    if dy == 0.0 {
        return Err(Error::Precondition("perturbation has zero caloric norm".into()));
    }
    Ok(dx / dy)
}
