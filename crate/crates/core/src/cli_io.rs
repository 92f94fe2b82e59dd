//! Scenario files, the command dispatcher, and report/table persistence.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::duhamel::{ConstantsTable, ForceField, QuadratureRule, TimeGrid};
use crate::error::{Error, Result};
use crate::experiments::admissibility::{check_admissible, suggest_subindices, Admissibility, ExponentSet};
use crate::experiments::decay::{fit_decay_rate, tail_indices, DecayComponent, DecayFit};
use crate::experiments::self_similar::{verify_self_similar, SelfSimilarReport, SimilarityWindow};
use crate::experiments::stability::{asymptotic_stability_run, StabilityReport};
use crate::norms::{besov_time_grid, data_norm_terms, x_space_norms, BallSampling, DataNorm, XNormsRecord};
use crate::profiles::{self, HomogeneousSpec};
use crate::solver::{caloric_extension, picard_solve, smallness_check, InitialData, IterationTrace, SolverConfig, StateTuple};
use crate::spectral::{Grid, SpectralField, VectorField};

pub const FORMAT_VERSION: &str = "chemoflow-report/1";

/// A real number written either as a TOML float/integer or as a string
/// fraction such as `"8/3"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Real(pub f64);

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            I(i64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(x) => Ok(Real(x)),
            Raw::I(x) => Ok(Real(x as f64)),
            Raw::S(s) => parse_fraction(&s).map(Real).ok_or_else(|| {
                serde::de::Error::custom(format!("`{s}` is not a number or fraction a/b"))
            }),
        }
    }
}

fn parse_fraction(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.trim().parse().ok(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSection {
    #[serde(default)]
    pub gamma: f64,
    pub p: Real,
    pub q: Real,
    pub r: Real,
    /// Sub-indices; when all four are omitted they are generated.
    pub p1: Option<Real>,
    pub q1: Option<Real>,
    pub r1: Option<Real>,
    pub n1: Option<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// First stored time; defaults to `h^2`.
    pub t_min: Option<f64>,
    /// Last stored time; exclusive with `ratio`.
    pub t_max: Option<f64>,
    /// Geometric ratio; exclusive with `t_max`.
    pub ratio: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    Dyadic,
    Default,
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_nodes")]
    pub quad_nodes: usize,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingKind,
    /// Center stride for dyadic sampling; defaults to `max(M/32, 1)`.
    pub stride: Option<usize>,
}

fn default_nodes() -> usize {
    32
}
fn default_iters() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-8
}
fn default_sampling() -> SamplingKind {
    SamplingKind::Dyadic
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            quad_nodes: default_nodes(),
            max_iters: default_iters(),
            tol: default_tol(),
            sampling: default_sampling(),
            stride: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataProfile {
    Zero,
    Gaussian,
    Homogeneous,
    Bump,
    Random,
}

/// Initial-data recipe. Unused keys of other profiles are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub profile: DataProfile,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Gaussian variance; defaults to `(L/8)^2`.
    pub variance: Option<f64>,
    /// Bump center and radius (radius defaults to `L/4`).
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    /// Homogeneous amplitudes and mollification.
    pub amp_n: Option<f64>,
    pub amp_u: Option<f64>,
    pub c0: Option<f64>,
    pub eps_cells: Option<f64>,
    /// Number of random blobs.
    pub blobs: Option<usize>,
    /// Rescale so that `||data||_I = delta_fraction * delta`.
    pub delta_fraction: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceProfile {
    None,
    Homogeneous,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSection {
    pub profile: ForceProfile,
    #[serde(default = "one")]
    pub amplitude: f64,
    pub variance: Option<f64>,
    pub eps_cells: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfSimilarSection {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_inner")]
    pub inner_cells: f64,
    #[serde(default = "default_outer")]
    pub outer_fraction: f64,
    #[serde(default = "default_ss_tol")]
    pub tolerance: f64,
}

fn default_lambdas() -> Vec<f64> {
    vec![2.0]
}
fn default_inner() -> f64 {
    8.0
}
fn default_outer() -> f64 {
    0.25
}
fn default_ss_tol() -> f64 {
    2e-2
}

impl Default for SelfSimilarSection {
    fn default() -> Self {
        Self {
            lambdas: default_lambdas(),
            inner_cells: default_inner(),
            outer_fraction: default_outer(),
            tolerance: default_ss_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    #[serde(default = "default_components")]
    pub components: Vec<DecayComponent>,
}

fn default_components() -> Vec<DecayComponent> {
    DecayComponent::ALL.to_vec()
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            components: default_components(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

/// A complete scenario document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridSection,
    pub exponents: ExponentSection,
    pub time: TimeSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub data: DataSection,
    pub force: Option<ForceSection>,
    /// Perturbation added to the data by the stability command.
    pub perturbation: Option<DataSection>,
    #[serde(default)]
    pub self_similar: SelfSimilarSection,
    #[serde(default)]
    pub decay: DecaySection,
    #[serde(default)]
    pub output: OutputSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

impl ScenarioConfig {
    /// Parses a scenario without checking exponent admissibility.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str::<Self>(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.points, self.grid.half_width)
    }

    /// The exponent set, generating sub-indices when none are given.
    pub fn exponent_set(&self) -> Result<ExponentSet> {
        let e = &self.exponents;
        let subs = [e.p1, e.q1, e.r1, e.n1];
        let given = subs.iter().filter(|s| s.is_some()).count();
        match given {
            4 => Ok(ExponentSet {
                dim: self.grid.dim,
                gamma: e.gamma,
                p: e.p.0,
                p1: e.p1.expect("given").0,
                q: e.q.0,
                q1: e.q1.expect("given").0,
                r: e.r.0,
                r1: e.r1.expect("given").0,
                n1: e.n1.expect("given").0,
            }),
            0 => suggest_subindices(self.grid.dim, e.gamma, e.p.0, e.q.0, e.r.0)?.ok_or_else(|| {
                Error::Config {
                    line: None,
                    message: "no admissible sub-indices found for the given p, q, r".into(),
                }
            }),
            _ => Err(Error::Config {
                line: None,
                message: "give all of p1, q1, r1, n1 or none of them".into(),
            }),
        }
    }

    pub fn time_grid(&self, grid: &Grid) -> Result<TimeGrid> {
        let t = &self.time;
        let t_min = t.t_min.unwrap_or(grid.spacing().powi(2));
        match (t.t_max, t.ratio) {
            (Some(t_max), None) => TimeGrid::geometric(t_min, t_max, t.count),
            (None, Some(ratio)) => TimeGrid::new(t_min, ratio, t.count),
            _ => Err(Error::Config {
                line: None,
                message: "[time] needs exactly one of `t_max` or `ratio`".into(),
            }),
        }
    }

    pub fn sampling(&self, grid: &Grid) -> Result<BallSampling> {
        Ok(match self.solver.sampling {
            SamplingKind::Dyadic => {
                BallSampling::dyadic(grid, self.solver.stride.unwrap_or((grid.points() / 32).max(1)))
            }
            SamplingKind::Default => BallSampling::default_for(grid),
            SamplingKind::Exhaustive => BallSampling::exhaustive(grid),
        })
    }
}

/// Reads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    load_config_str(&text)
}

pub fn load_config_str(text: &str) -> Result<ScenarioConfig> {
    let cfg = ScenarioConfig::parse(text)?;
    let verdict = check_admissible(&cfg.exponent_set()?);
    if !verdict.admissible {
        return Err(Error::Inadmissible(verdict.failures));
    }
    cfg.grid()?;
    Ok(cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Norms,
    SelfSimilar,
    Stability,
    Constants,
    Check,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Solve => "solve",
            Command::Norms => "norms",
            Command::SelfSimilar => "self-similar",
            Command::Stability => "stability",
            Command::Constants => "constants",
            Command::Check => "check",
        })
    }
}

/// Overrides from the command line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub quad_nodes: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Error => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything a run produced, in one serializable document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: String,
    pub command: Command,
    pub seed: u64,
    pub status: Status,
    pub error: Option<String>,
    pub config: Option<ScenarioConfig>,
    pub exponents: Option<ExponentSet>,
    pub admissibility: Option<Admissibility>,
    pub constants: Option<ConstantsTable>,
    pub data_norm: Option<DataNorm>,
    pub x_norms: Option<XNormsRecord>,
    pub trace: Option<IterationTrace>,
    pub mass_drift: Option<f64>,
    pub decay_fits: Vec<DecayFit>,
    pub self_similar: Option<SelfSimilarReport>,
    pub caloric_self_similar: Option<SelfSimilarReport>,
    pub stability: Option<StabilityReport>,
    pub verdicts: Vec<Verdict>,
    /// Wall-clock seconds per phase; excluded from determinism comparisons.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    fn new(command: Command, seed: u64) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            command,
            seed,
            status: Status::Pass,
            error: None,
            config: None,
            exponents: None,
            admissibility: None,
            constants: None,
            data_norm: None,
            x_norms: None,
            trace: None,
            mass_drift: None,
            decay_fits: Vec::new(),
            self_similar: None,
            caloric_self_similar: None,
            stability: None,
            verdicts: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    fn verdict(&mut self, name: &str, passed: bool, detail: String) {
        self.verdicts.push(Verdict {
            name: name.into(),
            passed,
            detail,
        });
    }

    fn finish(&mut self) {
        if self.status != Status::Error {
            self.status = if self.verdicts.iter().all(|v| v.passed) {
                Status::Pass
            } else {
                Status::Fail
            };
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The report with timing fields cleared.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.timings.clear();
        r
    }
}

/// A comma-separated table with a one-line header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Precondition(format!(
                    "non-finite value {bad} in table {}",
                    self.name
                )));
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        Ok(s)
    }
}

/// Report plus the tables written next to it.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub tables: Vec<Table>,
}

struct Context {
    cfg: ScenarioConfig,
    grid: Grid,
    exps: ExponentSet,
    solver: SolverConfig,
    seed: u64,
}

fn build_force(cfg: &ScenarioConfig, grid: &Grid, exps: &ExponentSet, sampling: &BallSampling) -> Result<Option<ForceField>> {
    let Some(f) = &cfg.force else { return Ok(None) };
    let field = match f.profile {
        ForceProfile::None => return Ok(None),
        ForceProfile::Homogeneous => {
            let spec = HomogeneousSpec {
                amp_f: f.amplitude,
                eps_cells: f.eps_cells.unwrap_or(HomogeneousSpec::default().eps_cells),
                ..HomogeneousSpec::default()
            };
            profiles::homogeneous_data(grid, &spec)?.1
        }
        ForceProfile::Gaussian => {
            let var = f.variance.unwrap_or((grid.half_width() / 8.0).powi(2));
            let a = f.amplitude;
            let dim = grid.dim();
            VectorField::from_fn(grid, move |x| {
                let r2: f64 = x.iter().take(dim).map(|v| v * v).sum();
                let g = a * (-r2 / (2.0 * var)).exp();
                x.iter().take(dim).map(|v| v * g).collect()
            })
        }
    };
    Ok(Some(ForceField::new(field, exps.n1, sampling)?))
}

fn build_context(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Context> {
    let grid = cfg.grid()?;
    let exps = cfg.exponent_set()?;
    let verdict = check_admissible(&exps);
    if !verdict.admissible {
        return Err(Error::Inadmissible(verdict.failures));
    }
    let mut solver = SolverConfig::new(exps, grid.clone(), cfg.time_grid(&grid)?)?;
    solver.gamma = exps.gamma;
    solver.quad = QuadratureRule::legendre(opts.quad_nodes.unwrap_or(cfg.solver.quad_nodes))?;
    solver.max_iters = cfg.solver.max_iters;
    solver.tol = cfg.solver.tol;
    solver.sampling = cfg.sampling(&grid)?;
    solver.force = build_force(cfg, &grid, &exps, &solver.sampling)?;
    solver.validate()?;
    Ok(Context {
        cfg: cfg.clone(),
        grid,
        exps,
        solver,
        seed: opts.seed,
    })
}

/// Builds the data described by `section`, before any `delta_fraction` scaling.
pub fn build_data(section: &DataSection, grid: &Grid, seed: u64) -> Result<InitialData> {
    let l = grid.half_width();
    let a = section.amplitude;
    Ok(match section.profile {
        DataProfile::Zero => InitialData::zeros(grid),
        DataProfile::Gaussian => {
            profiles::gaussian_data(grid, section.variance.unwrap_or((l / 8.0).powi(2)), a)
        }
        DataProfile::Bump => {
            let center = section.center.clone().unwrap_or_else(|| vec![0.0; grid.dim()]);
            profiles::bump_data(grid, &center, section.radius.unwrap_or(l / 4.0), a)
        }
        DataProfile::Homogeneous => {
            let d = HomogeneousSpec::default();
            let spec = HomogeneousSpec {
                amp_n: section.amp_n.unwrap_or(d.amp_n) * a,
                amp_u: section.amp_u.unwrap_or(d.amp_u) * a,
                c0: section.c0.unwrap_or(d.c0),
                amp_f: 0.0,
                eps_cells: section.eps_cells.unwrap_or(d.eps_cells),
            };
            profiles::homogeneous_data(grid, &spec)?.0
        }
        DataProfile::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let blobs = section.blobs.unwrap_or(4);
            let n0 = profiles::random_smooth_field(grid, &mut rng, blobs).scale(a);
            let c0 = profiles::random_smooth_field(grid, &mut rng, blobs).scale(a);
            let v0 = profiles::random_smooth_field(grid, &mut rng, blobs).scale(a).pinned();
            let psi = profiles::random_smooth_field(grid, &mut rng, blobs).scale(a);
            InitialData {
                n0,
                c0,
                v0,
                u0: profiles::swirl_of(&psi),
            }
        }
    })
}

/// Scales `data` to `fraction * delta` when requested; returns the data
/// and the constants table for the final data.
fn scaled_data(
    ctx: &Context,
    data: InitialData,
    fraction: Option<f64>,
) -> Result<(InitialData, ConstantsTable)> {
    let table = smallness_check(&data, &ctx.solver)?;
    let (Some(frac), Some(delta), Some(norm)) = (fraction, table.delta, table.data_norm) else {
        return Ok((data, table));
    };
    if norm == 0.0 {
        return Ok((data, table));
    }
    let scaled = data.scale(frac * delta / norm);
    let table = smallness_check(&scaled, &ctx.solver)?;
    Ok((scaled, table))
}

fn norms_table(name: &str, record: &XNormsRecord) -> Table {
    let mut t = Table::new(name, &["t", "n", "c_sup", "grad_c", "grad_v", "u"]);
    for s in &record.samples {
        t.rows.push(vec![s.t, s.n, s.c_sup, s.c_grad, s.v_grad, s.u]);
    }
    t
}

fn iterations_table(trace: &IterationTrace) -> Table {
    let mut t = Table::new("iterations", &["m", "x_norm", "difference", "ratio"]);
    for (m, d) in trace.differences.iter().enumerate() {
        let ratio = if m == 0 { 0.0 } else { trace.ratios[m - 1] };
        t.rows.push(vec![(m + 1) as f64, trace.x_norms[m + 1], *d, ratio]);
    }
    t
}

/// `max_t |mean n(t) - mean n0| / |mean n0|` (absolute when the mean vanishes).
pub fn mass_drift(trajectory: &[StateTuple], n0: &SpectralField) -> f64 {
    let m0 = n0.mean();
    let scale = if m0 == 0.0 { 1.0 } else { m0.abs() };
    trajectory
        .iter()
        .map(|s| (s.n.mean() - m0).abs() / scale)
        .fold(0.0, f64::max)
}

fn decay_fits(ctx: &Context, traj: &[StateTuple]) -> Result<Vec<DecayFit>> {
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    if tail_indices(&times).is_err() {
        return Ok(Vec::new());
    }
    ctx.cfg
        .decay
        .components
        .iter()
        .map(|&c| fit_decay_rate(traj, c, &ctx.exps, &ctx.solver.sampling))
        .collect()
}

fn timed<T>(report: &mut RunReport, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    report
        .timings
        .insert(phase.into(), start.elapsed().as_secs_f64());
    out
}

fn run_solve(ctx: &Context, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<()> {
    let data = build_data(&ctx.cfg.data, &ctx.grid, ctx.seed)?;
    let (data, table) = timed(report, "constants", || {
        scaled_data(ctx, data, ctx.cfg.data.delta_fraction)
    })?;
    report.data_norm = Some(data_norm_terms(
        &data,
        &ctx.exps,
        &besov_time_grid(&ctx.grid),
        &ctx.solver.sampling,
    )?);
    report.constants = Some(table.clone());
    let result = timed(report, "solve", || picard_solve(&data, &ctx.solver));
    let (traj, mut trace) = match result {
        Ok(v) => v,
        Err(Error::Divergence(trace)) => {
            tables.push(iterations_table(&trace));
            let detail = format!(
                "diverged after {} iterations (data small: {:?})",
                trace.iterations(),
                table.small
            );
            report.trace = Some(*trace);
            report.verdict("converged", false, detail);
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    trace.constants = Some(table);
    let record = x_space_norms(&traj, &ctx.exps, &ctx.solver.sampling)?;
    tables.push(norms_table("trajectory_norms", &record));
    tables.push(iterations_table(&trace));
    report.mass_drift = Some(mass_drift(&traj, &data.n0));
    report.decay_fits = timed(report, "decay", || decay_fits(ctx, &traj))?;
    report.verdict(
        "converged",
        trace.converged,
        format!("{} iterations", trace.iterations()),
    );
    report.x_norms = Some(record);
    report.trace = Some(trace);
    Ok(())
}

fn run_norms(ctx: &Context, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<()> {
    let data = build_data(&ctx.cfg.data, &ctx.grid, ctx.seed)?;
    let dn = data_norm_terms(
        &data,
        &ctx.exps,
        &besov_time_grid(&ctx.grid),
        &ctx.solver.sampling,
    )?;
    let y = caloric_extension(&data, ctx.solver.gamma, &ctx.solver.time_grid)?;
    let record = timed(report, "norms", || {
        x_space_norms(&y, &ctx.exps, &ctx.solver.sampling)
    })?;
    tables.push(norms_table("caloric_norms", &record));
    report.decay_fits = timed(report, "decay", || decay_fits(ctx, &y))?;
    report.verdict(
        "finite",
        record.total.is_finite() && dn.total.is_finite(),
        format!("||y||_X = {:e}, ||data||_I = {:e}", record.total, dn.total),
    );
    report.data_norm = Some(dn);
    report.x_norms = Some(record);
    Ok(())
}

fn run_self_similar(ctx: &Context, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<()> {
    let ss = &ctx.cfg.self_similar;
    if ctx.solver.gamma != 0.0 {
        return Err(Error::Precondition(format!(
            "self-similarity requires gamma = 0, got {}",
            ctx.solver.gamma
        )));
    }
    let window = SimilarityWindow {
        inner: ss.inner_cells * ctx.grid.spacing(),
        outer: ss.outer_fraction * ctx.grid.half_width(),
    };
    let data = build_data(&ctx.cfg.data, &ctx.grid, ctx.seed)?;
    let y = caloric_extension(&data, 0.0, &ctx.solver.time_grid)?;
    report.caloric_self_similar = Some(verify_self_similar(&y, 0.0, &ss.lambdas, window)?);
    drop(y);
    let (traj, trace) = match timed(report, "solve", || picard_solve(&data, &ctx.solver)) {
        Ok(v) => v,
        Err(Error::Divergence(trace)) => {
            report.trace = Some(*trace);
            report.verdict("converged", false, "Picard iteration diverged".into());
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let result = timed(report, "compare", || {
        verify_self_similar(&traj, 0.0, &ss.lambdas, window)
    })?;
    let mut t = Table::new("self_similar", &["lambda", "pairs", "n", "grad_c", "grad_v", "u"]);
    for r in &result.residuals {
        t.rows.push(vec![r.lambda, r.pairs as f64, r.n, r.grad_c, r.grad_v, r.u]);
    }
    tables.push(t);
    report.verdict("converged", trace.converged, format!("{} iterations", trace.iterations()));
    report.verdict(
        "self_similar",
        result.max() < ss.tolerance,
        format!("max residual {:e} (tolerance {:e})", result.max(), ss.tolerance),
    );
    report.trace = Some(trace);
    report.self_similar = Some(result);
    Ok(())
}

fn run_stability(ctx: &Context, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<()> {
    let base = build_data(&ctx.cfg.data, &ctx.grid, ctx.seed)?;
    let (data, table) = timed(report, "constants", || {
        scaled_data(ctx, base, ctx.cfg.data.delta_fraction)
    })?;
    let pert_section = ctx.cfg.perturbation.clone().unwrap_or(DataSection {
        profile: DataProfile::Bump,
        amplitude: 1.0,
        variance: None,
        center: None,
        radius: None,
        amp_n: None,
        amp_u: None,
        c0: None,
        eps_cells: None,
        blobs: None,
        delta_fraction: Some(0.01),
    });
    let mut pert = build_data(&pert_section, &ctx.grid, ctx.seed.wrapping_add(1))?;
    if let (Some(frac), Some(delta)) = (pert_section.delta_fraction, table.delta) {
        let pn = smallness_check(&pert, &ctx.solver)?.data_norm.unwrap_or(0.0);
        if pn > 0.0 {
            pert = pert.scale(frac * delta / pn);
        }
    }
    let perturbed = data.add(&pert)?;
    report.constants = Some(table);
    let rep = timed(report, "stability", || {
        asymptotic_stability_run(&data, &perturbed, &ctx.solver)
    })?;
    if let Some(trace) = &rep.divergence {
        report.verdict(
            "converged",
            false,
            format!("diverged after {} iterations", trace.iterations()),
        );
    } else {
        let mut t = Table::new(
            "stability",
            &[
                "t", "volta_n", "volta_c_sup", "volta_grad_c", "volta_grad_v", "volta_u", "ida_n",
                "ida_c_sup", "ida_grad_c", "ida_grad_v", "ida_u",
            ],
        );
        for (k, &time) in rep.times.iter().enumerate() {
            let mut row = vec![time];
            row.extend(rep.volta.columns().iter().map(|c| c[k]));
            row.extend(rep.ida.columns().iter().map(|c| c[k]));
            t.rows.push(row);
        }
        tables.push(t);
        report.verdict("volta_tail_decreasing", rep.volta_decreasing, tail_detail(&rep.volta_tail));
        report.verdict("ida_tail_decreasing", rep.ida_decreasing, tail_detail(&rep.ida_tail));
    }
    report.stability = Some(rep);
    Ok(())
}

fn tail_detail(v: &[crate::experiments::stability::TailVerdict]) -> String {
    v.iter()
        .map(|x| format!("{}: {:e} -> {:e}", x.name, x.first, x.last))
        .collect::<Vec<_>>()
        .join("; ")
}

fn run_constants(ctx: &Context, report: &mut RunReport) -> Result<()> {
    let data = build_data(&ctx.cfg.data, &ctx.grid, ctx.seed)?;
    let (_, table) = timed(report, "constants", || {
        scaled_data(ctx, data, ctx.cfg.data.delta_fraction)
    })?;
    report.verdict(
        "finite",
        [table.k1, table.k2, table.epsilon].iter().all(|v| v.is_finite()),
        format!("K1 = {:e}, K2 = {:e}, epsilon = {:e}", table.k1, table.k2, table.epsilon),
    );
    report.constants = Some(table);
    Ok(())
}

fn run_inner(
    cfg: &ScenarioConfig,
    command: Command,
    opts: &RunOptions,
    report: &mut RunReport,
    tables: &mut Vec<Table>,
) -> Result<()> {
    report.config = Some(cfg.clone());
    let exps = cfg.exponent_set()?;
    report.exponents = Some(exps);
    let verdict = check_admissible(&exps);
    report.admissibility = Some(verdict.clone());
    if command == Command::Check {
        report.verdict(
            "admissible",
            verdict.admissible,
            if verdict.admissible {
                format!("case {}", verdict.case.map(|c| c.to_string()).unwrap_or_default())
            } else {
                verdict.failures.join("; ")
            },
        );
        return Ok(());
    }
    let ctx = build_context(cfg, opts)?;
    match command {
        Command::Solve => run_solve(&ctx, report, tables),
        Command::Norms => run_norms(&ctx, report, tables),
        Command::SelfSimilar => run_self_similar(&ctx, report, tables),
        Command::Stability => run_stability(&ctx, report, tables),
        Command::Constants => run_constants(&ctx, report),
        Command::Check => unreachable!(),
    }
}

/// Runs one command; errors are captured in the report (status `error`).
pub fn run_scenario(cfg: &ScenarioConfig, command: Command, opts: &RunOptions) -> RunOutput {
    let mut report = RunReport::new(command, opts.seed);
    let mut tables = Vec::new();
    let start = Instant::now();
    if let Err(e) = run_inner(cfg, command, opts, &mut report, &mut tables) {
        report.status = Status::Error;
        report.error = Some(e.to_string());
    }
    report.finish();
    report
        .timings
        .insert("total".into(), start.elapsed().as_secs_f64());
    RunOutput { report, tables }
}

/// Writes `report.json` and one `<name>.csv` per table into `dir`.
pub fn write_output(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for t in &out.tables {
        fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?)?;
    }
    fs::write(dir.join("report.json"), out.report.to_json()?)?;
    Ok(())
}

/// Loads, runs and persists; returns the process exit code.
pub fn execute(config_path: &Path, command: Command, opts: &RunOptions) -> i32 {
    let fallback = opts.out.clone().unwrap_or_else(default_out);
    let cfg = match if command == Command::Check {
        fs::read_to_string(config_path)
            .map_err(Error::from)
            .and_then(|t| ScenarioConfig::parse(&t))
    } else {
        load_config(config_path)
    } {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            let mut report = RunReport::new(command, opts.seed);
            report.status = Status::Error;
            report.error = Some(e.to_string());
            let out = RunOutput {
                report,
                tables: Vec::new(),
            };
            if let Err(w) = write_output(&out, &fallback) {
                eprintln!("error: could not write report: {w}");
            }
            return 2;
        }
    };
    let dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let out = run_scenario(&cfg, command, opts);
    if let Some(e) = &out.report.error {
        eprintln!("error: {e}");
    }
    for v in &out.report.verdicts {
        println!(
            "{} {}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    if let Err(e) = write_output(&out, &dir) {
        eprintln!("error: could not write output: {e}");
        return 2;
    }
    out.report.status.exit_code()
}
