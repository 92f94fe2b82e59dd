//! Caloric extension, the fixed-point map of the mild formulation, Picard
//! iteration and the smallness bookkeeping.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::duhamel::{
    compute_constants, dealiased, heat_table, spectral_divergence, ConstantsTable, ForceField,
    QuadratureRule, TimeGrid,
};
use crate::error::{arg, Error, Result};
use crate::experiments::admissibility::{check_admissible, ExponentSet};
use crate::norms::{besov_time_grid, data_norm_i, x_space_norms, BallSampling};
use crate::spectral::{Grid, SpectralField, VectorField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// The unknowns `(n, c, v, u)` at time `t`.
#[derive(Clone, Debug)]
pub struct StateTuple {
    pub t: f64,
    pub n: SpectralField,
    pub c: SpectralField,
    /// Zero mode pinned to 0.
    pub v: SpectralField,
    pub u: VectorField,
}

impl StateTuple {
    pub fn zeros(grid: &Grid, t: f64) -> Self {
        Self {
            t,
            n: SpectralField::zeros(grid),
            c: SpectralField::zeros(grid),
            v: SpectralField::zeros(grid).pinned(),
            u: VectorField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.n.grid()
    }

    /// Componentwise difference, keeping `self.t`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            t: self.t,
            n: self.n.sub(&other.n)?,
            c: self.c.sub(&other.c)?,
            v: self.v.sub(&other.v)?,
            u: self.u.sub(&other.u)?,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            t: self.t,
            n: self.n.scale(s),
            c: self.c.scale(s),
            v: self.v.scale(s),
            u: self.u.scale(s),
        }
    }

    /// `(1 - theta) a + theta b` on every coefficient, stamped with time `t`.
    pub fn blend(a: &Self, b: &Self, theta: f64, t: f64) -> Result<Self> {
        let mut out = a.scale(1.0 - theta);
        out.t = t;
        out.n.axpy(theta, &b.n)?;
        out.c.axpy(theta, &b.c)?;
        out.v.axpy(theta, &b.v)?;
        out.u.axpy(theta, &b.u)?;
        Ok(out)
    }
}

/// Initial data `(n0, c0, v0, u0)`.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub n0: SpectralField,
    pub c0: SpectralField,
    pub v0: SpectralField,
    pub u0: VectorField,
}

impl InitialData {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            n0: SpectralField::zeros(grid),
            c0: SpectralField::zeros(grid),
            v0: SpectralField::zeros(grid).pinned(),
            u0: VectorField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.n0.grid()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n0: self.n0.scale(s),
            c0: self.c0.scale(s),
            v0: self.v0.scale(s),
            u0: self.u0.scale(s),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            n0: self.n0.add(&other.n0)?,
            c0: self.c0.add(&other.c0)?,
            v0: self.v0.add(&other.v0)?,
            u0: self.u0.add(&other.u0)?,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.n0.is_zero() && self.c0.is_zero() && self.v0.is_zero() && self.u0.is_zero()
    }
}

/// Everything the Picard iteration needs besides the data.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub exps: ExponentSet,
    pub gamma: f64,
    pub grid: Grid,
    pub time_grid: TimeGrid,
    pub quad: QuadratureRule,
    pub max_iters: usize,
    pub tol: f64,
    pub force: Option<ForceField>,
    /// Ball sampling used for every solution-space norm.
    pub sampling: BallSampling,
}

impl SolverConfig {
    /// Defaults: 50 iterations, tolerance `1e-8`, 32 Gauss-Legendre nodes,
    /// no force, dyadic ball sampling.
    pub fn new(exps: ExponentSet, grid: Grid, time_grid: TimeGrid) -> Result<Self> {
        let sampling = BallSampling::dyadic(&grid, (grid.points() / 32).max(1));
        Ok(Self {
            gamma: exps.gamma,
            exps,
            grid,
            time_grid,
            quad: QuadratureRule::legendre(32)?,
            max_iters: 50,
            tol: 1e-8,
            force: None,
            sampling,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return arg("max_iters must be >= 1");
        }
        if !(self.tol > 0.0) {
            return arg("tolerance must be positive");
        }
        if !(self.gamma >= 0.0) {
            return arg("gamma must be >= 0");
        }
        if self.exps.dim != self.grid.dim() {
            return arg("exponent dimension does not match the grid");
        }
        if let Some(f) = &self.force {
            if *f.field().grid() != self.grid {
                return Err(Error::GridMismatch);
            }
        }
        Ok(())
    }
}

/// Per-iterate record of a Picard run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// `||x^(m)||_X` for `m = 1, 2, ...` (`x^(1)` is the caloric extension).
    pub x_norms: Vec<f64>,
    /// `d_m = ||x^(m+1) - x^(m)||_X`.
    pub differences: Vec<f64>,
    /// `d_(m+1) / d_m`.
    pub ratios: Vec<f64>,
    pub converged: bool,
    pub diverged: bool,
    /// `||x - F(x)||_X / ||x||_X` of the returned iterate (when converged).
    pub residual: Option<f64>,
    pub constants: Option<ConstantsTable>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.differences.len()
    }
}

/// Free evolutions `(e^{t Delta} n0, e^{t Delta} c0, e^{-gamma t} e^{t Delta} v0, e^{t Delta} P u0)`.
pub fn caloric_extension(
    data: &InitialData,
    gamma: f64,
    time_grid: &TimeGrid,
) -> Result<Vec<StateTuple>> {
    let u0 = if data.u0.divergence_defect() > 1e-12 {
        eprintln!("warning: initial velocity is not solenoidal; projecting");
        data.u0.leray_project()
    } else {
        data.u0.clone()
    };
    let v0 = data.v0.clone().pinned();
    time_grid
        .times()
        .into_iter()
        .map(|t| {
            Ok(StateTuple {
                t,
                n: data.n0.heat_apply(t)?,
                c: data.c0.heat_apply(t)?,
                v: v0.damped_heat_apply(t, gamma)?,
                u: u0.heat_apply(t)?,
            })
        })
        .collect()
}

/// Nonlinear sources of one state in spectral form:
/// `Hn = div(u n + n grad c + n grad v)`, `Hc = div(u c) + n c`,
/// `Hv = n - u . grad v`, `Hu = div(u (x) u) + n f`.
struct Sources {
    n: Vec<Complex64>,
    c: Vec<Complex64>,
    v: Vec<Complex64>,
    u: Vec<Vec<Complex64>>,
}

fn sources(s: &StateTuple, force: Option<&[Vec<f64>]>) -> Sources {
    let grid = s.grid().clone();
    let dim = grid.dim();
    let len = grid.len();
    let n = s.n.to_physical();
    let c = s.c.to_physical();
    let u: Vec<Vec<f64>> = s.u.components().iter().map(|x| x.to_physical()).collect();
    let gc: Vec<Vec<f64>> = (0..dim)
        .map(|a| s.c.derivative(a).expect("axis").to_physical())
        .collect();
    let gv: Vec<Vec<f64>> = (0..dim)
        .map(|a| s.v.derivative(a).expect("axis").to_physical())
        .collect();

    let mut flux_n = Vec::with_capacity(dim);
    let mut flux_c = Vec::with_capacity(dim);
    let mut transport = vec![0.0; len];
    for a in 0..dim {
        let fa: Vec<f64> = (0..len)
            .map(|i| n[i] * (u[a][i] + gc[a][i] + gv[a][i]))
            .collect();
        flux_n.push(dealiased(&grid, &fa));
        let ca: Vec<f64> = (0..len).map(|i| u[a][i] * c[i]).collect();
        flux_c.push(dealiased(&grid, &ca));
        for i in 0..len {
            transport[i] += u[a][i] * gv[a][i];
        }
    }
    let hn = spectral_divergence(&grid, &flux_n);
    let nc: Vec<f64> = (0..len).map(|i| n[i] * c[i]).collect();
    let mut hc = spectral_divergence(&grid, &flux_c);
    for (h, x) in hc.iter_mut().zip(dealiased(&grid, &nc)) {
        *h += x;
    }
    let mut hv = s.n.coeffs().to_vec();
    for (h, x) in hv.iter_mut().zip(dealiased(&grid, &transport)) {
        *h -= x;
    }

    let mut uu = vec![vec![Vec::new(); dim]; dim];
    for a in 0..dim {
        for b in a..dim {
            let p: Vec<f64> = (0..len).map(|i| u[a][i] * u[b][i]).collect();
            let spec = dealiased(&grid, &p);
            uu[b][a] = spec.clone();
            uu[a][b] = spec;
        }
    }
    let mut hu: Vec<Vec<Complex64>> = uu.iter().map(|row| spectral_divergence(&grid, row)).collect();
    if let Some(f) = force {
        for (a, h) in hu.iter_mut().enumerate() {
            let nf: Vec<f64> = (0..len).map(|i| n[i] * f[a][i]).collect();
            for (x, y) in h.iter_mut().zip(dealiased(&grid, &nf)) {
                *x += y;
            }
        }
    }
    Sources {
        n: hn,
        c: hc,
        v: hv,
        u: hu,
    }
}

fn check_trajectory(trajectory: &[StateTuple], config: &SolverConfig) -> Result<()> {
    let times = config.time_grid.times();
    if trajectory.len() != times.len() {
        return arg(format!(
            "trajectory has {} states, time grid has {}",
            trajectory.len(),
            times.len()
        ));
    }
    for (s, t) in trajectory.iter().zip(&times) {
        if (s.t - t).abs() > 1e-12 * t {
            return arg(format!("state time {} does not match grid time {t}", s.t));
        }
        if *s.grid() != config.grid {
            return Err(Error::GridMismatch);
        }
    }
    Ok(())
}

/// Applies the fixed-point map to a trajectory stored on the config's time
/// grid, given the caloric extension `caloric` of the data.
///
/// Nonlinear sources are formed at the stored times and interpolated
/// linearly in `log t` at the quadrature nodes; below the first stored time
/// they are held constant.
pub fn picard_map_with(
    trajectory: &[StateTuple],
    caloric: &[StateTuple],
    config: &SolverConfig,
) -> Result<Vec<StateTuple>> {
    config.validate()?;
    check_trajectory(trajectory, config)?;
    check_trajectory(caloric, config)?;
    let grid = &config.grid;
    let dim = grid.dim();
    let force = config.force.as_ref().map(ForceField::physical);
    let src: Vec<Sources> = trajectory
        .iter()
        .map(|s| sources(s, force.as_deref()))
        .collect();
    let tg = &config.time_grid;
    let rule = &config.quad;
    let len = grid.len();
    let msq: Vec<usize> = (0..len).map(|k| grid.mode_norm_sq(k)).collect();

    let mut out = Vec::with_capacity(trajectory.len());
    for y in caloric {
        let t = y.t;
        let mut acc_n = vec![ZERO; len];
        let mut acc_c = vec![ZERO; len];
        let mut acc_v = vec![ZERO; len];
        let mut acc_u = vec![vec![ZERO; len]; dim];
        for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
            let tau = t * z;
            let s = t - tau;
            let mut fac = w * t;
            if rule.a() != 0.0 {
                fac *= (1.0 - z).powf(rule.a());
            }
            if rule.b() != 0.0 {
                fac *= z.powf(rule.b());
            }
            let fac_v = fac * (-config.gamma * s).exp();
            let (j, theta) = tg.locate(tau.min(t));
            let j1 = (j + 1).min(src.len() - 1);
            let (wa, wb) = (1.0 - theta, theta);
            let table = heat_table(grid, s);
            let (a, b) = (&src[j], &src[j1]);
            for i in 0..len {
                let e = table[msq[i]];
                let m = fac * e;
                acc_n[i] += (a.n[i] * wa + b.n[i] * wb) * m;
                acc_c[i] += (a.c[i] * wa + b.c[i] * wb) * m;
                acc_v[i] += (a.v[i] * wa + b.v[i] * wb) * (fac_v * e);
                for d in 0..dim {
                    acc_u[d][i] += (a.u[d][i] * wa + b.u[d][i] * wb) * m;
                }
            }
        }
        let n = y.n.sub(&SpectralField::from_coeffs(grid, acc_n)?)?;
        let c = y.c.sub(&SpectralField::from_coeffs(grid, acc_c)?)?;
        let v = y.v.add(&SpectralField::from_coeffs(grid, acc_v)?)?.pinned();
        let du = VectorField::new(
            acc_u
                .into_iter()
                .map(|x| SpectralField::from_coeffs(grid, x))
                .collect::<Result<Vec<_>>>()?,
        )?
        .leray_project();
        let u = y.u.sub(&du)?;
        out.push(StateTuple { t, n, c, v, u });
    }
    Ok(out)
}

/// `F(trajectory)` for the given data.
pub fn picard_map(
    trajectory: &[StateTuple],
    data: &InitialData,
    config: &SolverConfig,
) -> Result<Vec<StateTuple>> {
    let caloric = caloric_extension(data, config.gamma, &config.time_grid)?;
    picard_map_with(trajectory, &caloric, config)
}

/// Componentwise difference of two trajectories on the same time grid.
pub fn trajectory_difference(a: &[StateTuple], b: &[StateTuple]) -> Result<Vec<StateTuple>> {
    if a.len() != b.len() {
        return arg("trajectories have different lengths");
    }
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

/// `||a - b||_X`.
pub fn x_distance(
    a: &[StateTuple],
    b: &[StateTuple],
    exps: &ExponentSet,
    sampling: &BallSampling,
) -> Result<f64> {
    Ok(x_space_norms(&trajectory_difference(a, b)?, exps, sampling)?.total)
}

/// Picard iteration `x^(1) = y`, `x^(m+1) = F(x^(m))` until
/// `d_m <= tol ||x^(m+1)||_X`.
pub fn picard_solve(
    data: &InitialData,
    config: &SolverConfig,
) -> Result<(Vec<StateTuple>, IterationTrace)> {
    config.validate()?;
    let caloric = caloric_extension(data, config.gamma, &config.time_grid)?;
    let xn = |x: &[StateTuple]| -> Result<f64> {
        Ok(x_space_norms(x, &config.exps, &config.sampling)?.total)
    };
    let mut trace = IterationTrace {
        x_norms: vec![xn(&caloric)?],
        differences: Vec::new(),
        ratios: Vec::new(),
        converged: false,
        diverged: false,
        residual: None,
        constants: None,
    };
    let mut x = caloric.clone();
    let mut rising = 0;
    for _ in 0..config.max_iters {
        let next = picard_map_with(&x, &caloric, config)?;
        let d = x_distance(&next, &x, &config.exps, &config.sampling)?;
        let norm = xn(&next)?;
        if let Some(&prev) = trace.differences.last() {
            trace.ratios.push(if prev > 0.0 { d / prev } else { 0.0 });
            if d > prev {
                rising += 1;
            } else {
                rising = 0;
            }
        }
        trace.differences.push(d);
        trace.x_norms.push(norm);
        x = next;
        if !d.is_finite() || !norm.is_finite() || rising >= 3 {
            trace.diverged = true;
            return Err(Error::Divergence(Box::new(trace)));
        }
        if d <= config.tol * norm {
            trace.converged = true;
            break;
        }
    }
    if trace.converged {
        let fx = picard_map_with(&x, &caloric, config)?;
        let r = x_distance(&fx, &x, &config.exps, &config.sampling)?;
        let norm = *trace.x_norms.last().expect("nonempty");
        trace.residual = Some(if norm > 0.0 { r / norm } else { r });
    }
    Ok((x, trace))
}

/// Probe grid used to measure the smoothing constants.
pub fn probe_grid(dim: usize) -> Result<Grid> {
    Grid::new(dim, 32, 8.0)
}

/// Full constants table for `data` under `config`, with `C0 = ||y||_X / ||data||_I`,
/// `epsilon = 1 / (8 K1 K2)`, `delta = epsilon / C0` and the smallness verdict.
pub fn smallness_check(data: &InitialData, config: &SolverConfig) -> Result<ConstantsTable> {
    config.validate()?;
    let verdict = check_admissible(&config.exps);
    if !verdict.admissible {
        return Err(Error::Inadmissible(verdict.failures));
    }
    let probe = probe_grid(config.grid.dim())?;
    let probe_sampling = BallSampling::dyadic(&probe, 1);
    let table = compute_constants(&config.exps, config.force.as_ref(), &probe, &probe_sampling)?;
    let (c0, dn) = measure_c0(data, config)?;
    Ok(table.with_data(c0, dn))
}

/// `(||y||_X / ||data||_I, ||data||_I)`; the ratio is absent for zero data.
pub fn measure_c0(data: &InitialData, config: &SolverConfig) -> Result<(Option<f64>, f64)> {
    let dn = data_norm_i(
        data,
        &config.exps,
        &besov_time_grid(&config.grid),
        &config.sampling,
    )?;
    if dn == 0.0 {
        return Ok((None, 0.0));
    }
    let y = caloric_extension(data, config.gamma, &config.time_grid)?;
    let yx = x_space_norms(&y, &config.exps, &config.sampling)?.total;
    Ok((Some(yx / dn), dn))
}

/// Evaluates a stored trajectory at an arbitrary time: linear in `log t`
/// between stored states, and `y(tau) + (tau / t0) w(t0)` below the first
/// stored time, where `w = x - y` is the Duhamel part.
pub fn state_at(
    trajectory: &[StateTuple],
    data: &InitialData,
    gamma: f64,
    time_grid: &TimeGrid,
    tau: f64,
) -> Result<StateTuple> {
    if !(tau > 0.0) {
        return arg(format!("state requested at non-positive time {tau}"));
    }
    if tau <= time_grid.t0() {
        let grid = TimeGrid::new(tau, 2.0, 1)?;
        let y = caloric_extension(data, gamma, &grid)?.remove(0);
        let y0 = caloric_extension(data, gamma, &TimeGrid::new(time_grid.t0(), 2.0, 1)?)?.remove(0);
        let w0 = trajectory[0].sub(&y0)?;
        let mut out = y;
        let s = tau / time_grid.t0();
        out.n.axpy(s, &w0.n)?;
        out.c.axpy(s, &w0.c)?;
        out.v.axpy(s, &w0.v)?;
        out.u.axpy(s, &w0.u)?;
        out.t = tau;
        return Ok(out);
    }
    let (j, theta) = time_grid.locate(tau);
    let j1 = (j + 1).min(trajectory.len() - 1);
    StateTuple::blend(&trajectory[j], &trajectory[j1], theta, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::admissibility::suggest_subindices;

    fn setup() -> (SolverConfig, InitialData) {
        let grid = Grid::new(2, 16, 4.0).unwrap();
        let exps = suggest_subindices(2, 0.0, 4.0, 3.0, 4.0).unwrap().unwrap();
        let tg = TimeGrid::geometric(0.05, 1.0, 6).unwrap();
        let mut cfg = SolverConfig::new(exps, grid.clone(), tg).unwrap();
        cfg.quad = QuadratureRule::legendre(8).unwrap();
        let g = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
        let data = InitialData {
            n0: SpectralField::from_fn(&grid, g).scale(0.01),
            c0: SpectralField::from_fn(&grid, g).scale(0.01),
            v0: SpectralField::from_fn(&grid, g).scale(0.01).pinned(),
            u0: VectorField::zeros(&grid),
        };
        (cfg, data)
    }

    #[test]
    fn zero_trajectory_maps_to_caloric() {
        let (cfg, data) = setup();
        let y = caloric_extension(&data, cfg.gamma, &cfg.time_grid).unwrap();
        let zero: Vec<StateTuple> = y.iter().map(|s| StateTuple::zeros(&cfg.grid, s.t)).collect();
        let fy = picard_map_with(&zero, &y, &cfg).unwrap();
        for (a, b) in fy.iter().zip(&y) {
            assert_eq!(a.n.coeffs(), b.n.coeffs());
            assert_eq!(a.c.coeffs(), b.c.coeffs());
            assert_eq!(a.v.coeffs(), b.v.coeffs());
            for d in 0..2 {
                assert_eq!(a.u.component(d).coeffs(), b.u.component(d).coeffs());
            }
        }
    }

    #[test]
    fn small_data_converges() {
        let (cfg, data) = setup();
        let (x, trace) = picard_solve(&data, &cfg).unwrap();
        assert!(trace.converged);
        assert!(trace.ratios.iter().all(|r| *r < 1.0));
        assert!(trace.residual.unwrap() < 2.0 * cfg.tol);
        assert_eq!(x.len(), cfg.time_grid.count());
    }
}
